//! Orthonormal DCT-II features ranked by coefficient magnitude.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{zscore, Segment};

/// Cosine lookup for index `(2n+1)k mod 4N`, the only arguments an N-point
/// DCT-II ever needs.
fn cos_table(n: usize) -> Vec<f64> {
    let period = 4 * n;
    (0..period).map(|m| (PI * m as f64 / (2 * n) as f64).cos()).collect()
}

fn weight(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Orthonormal DCT-II:
/// `y[k] = w(k) * sum_n x[n] cos(pi (2n+1) k / 2N)` with `w(0) = 1/sqrt(N)`
/// and `w(k) = sqrt(2/N)` otherwise.
pub fn dct(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidInput("DCT of an empty sequence".into()));
    }
    let table = cos_table(n);
    let period = 4 * n;
    Ok((0..n)
        .map(|k| {
            let mut acc = 0.0;
            let mut idx = k; // (2*0 + 1) * k
            let step = (2 * k) % period;
            for &xn in x {
                acc += xn * table[idx];
                idx += step;
                if idx >= period {
                    idx -= period;
                }
            }
            weight(k, n) * acc
        })
        .collect())
}

/// Inverse of [`dct`] (the orthonormal DCT-III).
pub fn idct(y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("inverse DCT of an empty sequence".into()));
    }
    let table = cos_table(n);
    let period = 4 * n;
    let scaled: Vec<f64> = y.iter().enumerate().map(|(k, v)| weight(k, n) * v).collect();
    Ok((0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut idx = 0; // (2i+1) * 0
            let step = 2 * i + 1;
            for &yk in &scaled {
                acc += yk * table[idx];
                idx = (idx + step) % period;
            }
            acc
        })
        .collect())
}

/// The `u` largest-magnitude DCT coefficients of one z-scored segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Ordered by non-increasing absolute value.
    pub values: Vec<f64>,
    pub label: usize,
    pub subject_id: String,
}

impl FeatureVector {
    pub fn u(&self) -> usize {
        self.values.len()
    }
}

/// Indices of `coeffs` sorted by descending |value|, ties by ascending index.
pub fn rank_by_magnitude(coeffs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()).then(a.cmp(&b)));
    order
}

pub fn extract_features(segment: &Segment, u: usize) -> Result<FeatureVector> {
    let n = segment.values.len();
    if u == 0 || u > n {
        return Err(Error::InvalidInput(format!("feature dimension {u} outside 1..={n}")));
    }
    let coeffs = dct(&zscore(&segment.values))?;
    let values = rank_by_magnitude(&coeffs)
        .into_iter()
        .take(u)
        .map(|i| coeffs[i])
        .collect();
    Ok(FeatureVector {
        values,
        label: segment.label,
        subject_id: segment.subject_id.clone(),
    })
}

pub fn extract_all(segments: &[Segment], u: usize) -> Result<Vec<FeatureVector>> {
    segments.par_iter().map(|s| extract_features(s, u)).collect()
}

pub fn write_features_csv(path: &Path, features: &[FeatureVector]) -> Result<()> {
    let u = features.first().map_or(0, FeatureVector::u);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Context {
        context: path.display().to_string(),
        source: Box::new(e.into()),
    })?;
    let mut header = vec!["label".to_string(), "subject_id".to_string()];
    header.extend((1..=u).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for f in features {
        if f.u() != u {
            return Err(Error::DimensionMismatch { expected: u, found: f.u() });
        }
        let mut row = vec![f.label.to_string(), f.subject_id.clone()];
        row.extend(f.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<FeatureVector> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::malformed(path, line, e.to_string()))?;
        if rec.len() < 3 {
            return Err(Error::malformed(path, line, "row needs label, subject_id and at least one value"));
        }
        let label: usize = rec[0]
            .parse()
            .ok()
            .filter(|&l| l > 0)
            .ok_or_else(|| Error::malformed(path, line, format!("bad label {:?}", &rec[0])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::malformed(path, line, "non-numeric feature value"))?;
        out.push(FeatureVector {
            values,
            label,
            subject_id: rec[1].to_string(),
        });
    }
    if out.is_empty() {
        return Err(Error::malformed(path, 0, "feature file has no rows"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub u: usize,
    pub mean_accuracy: f64,
    /// Sample variance over the evaluator's runs.
    pub variance: f64,
    pub runs: usize,
}

/// Runs `evaluate` on the features of every `u` and summarizes the
/// accuracies it returns (one per fold or repeat).
pub fn sweep_dimensions<F>(segments: &[Segment], u_values: &[usize], mut evaluate: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(usize, &[FeatureVector]) -> Result<Vec<f64>>,
{
    let mut rows = Vec::with_capacity(u_values.len());
    for &u in u_values {
        let features = extract_all(segments, u).map_err(|e| e.context(format!("u={u}")))?;
        let accs = evaluate(u, &features).map_err(|e| e.context(format!("u={u}")))?;
        let (mean_accuracy, variance) = mean_and_sample_variance(&accs);
        rows.push(SweepRow {
            u,
            mean_accuracy,
            variance,
            runs: accs.len(),
        });
    }
    Ok(rows)
}

/// Mean and (n-1)-normalized variance; the variance of fewer than two values is 0.
pub fn mean_and_sample_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
