//! Soft-margin RBF-kernel SVM: SMO training, KKT verification and one-vs-one
//! multi-class prediction.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest training set for which the full Gram matrix is precomputed.
pub const DENSE_KERNEL_LIMIT: usize = 4096;
const ROW_CACHE_ROWS: usize = 512;
const TAU: f64 = 1e-12;
/// Absolute floating-point allowance on top of the caller's KKT tolerance.
pub const KKT_NUMERIC_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub c_penalty: f64,
    pub gamma: f64,
}

impl KernelParams {
    pub fn new(c_penalty: f64, gamma: f64) -> Result<Self> {
        let p = Self { c_penalty, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.c_penalty) && ok(self.gamma) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "C and gamma must be positive and finite, got C={} gamma={}",
                self.c_penalty, self.gamma
            )))
        }
    }
}

/// `exp(-gamma * |x1 - x2|^2)`.
pub fn rbf_kernel(x1: &[f64], x2: &[f64], gamma: f64) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x1.len(),
            found: x2.len(),
        });
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    Ok(rbf(x1, x2, gamma))
}

#[inline]
fn rbf(x1: &[f64], x2: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Gram matrix rows, dense for small problems and computed on demand with a
/// bounded FIFO cache above [`DENSE_KERNEL_LIMIT`].
enum KernelRows<'a> {
    Dense(Vec<Arc<[f64]>>),
    OnDemand {
        x: &'a [&'a [f64]],
        gamma: f64,
        cache: HashMap<usize, Arc<[f64]>>,
        order: VecDeque<usize>,
    },
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [&'a [f64]], gamma: f64) -> Self {
        if x.len() <= DENSE_KERNEL_LIMIT {
            let p = x.len();
            let mut full = vec![0.0; p * p];
            for i in 0..p {
                full[i * p + i] = 1.0;
                for j in 0..i {
                    let k = rbf(x[i], x[j], gamma);
                    full[i * p + j] = k;
                    full[j * p + i] = k;
                }
            }
            KernelRows::Dense(full.chunks(p).map(Arc::from).collect())
        } else {
            KernelRows::OnDemand {
                x,
                gamma,
                cache: HashMap::new(),
                order: VecDeque::new(),
            }
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        match self {
            KernelRows::Dense(rows) => Arc::clone(&rows[i]),
            KernelRows::OnDemand { x, gamma, cache, order } => {
                if let Some(r) = cache.get(&i) {
                    return Arc::clone(r);
                }
                let r: Arc<[f64]> = x.iter().map(|xj| rbf(x[i], xj, *gamma)).collect();
                if order.len() >= ROW_CACHE_ROWS {
                    if let Some(old) = order.pop_front() {
                        cache.remove(&old);
                    }
                }
                order.push_back(i);
                cache.insert(i, Arc::clone(&r));
                r
            }
        }
    }
}

/// SMO stopping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoSettings {
    /// Stop once the maximal KKT violation `m(a) - M(a)` drops to `tol`.
    pub tol: f64,
    /// Update budget in units of `P` pair updates; `None` means `5 * P`.
    pub max_passes: Option<usize>,
    /// Orders the working-set scan, which decides ties between equally
    /// violating indices.
    pub seed: u64,
}

impl Default for SmoSettings {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_passes: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    /// Position of each support vector in the training set.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub params: KernelParams,
    /// `(label mapped to +1, label mapped to -1)`.
    pub class_pair: (usize, usize),
    pub n_training: usize,
    /// Dual objective `sum(a) - 1/2 a'Qa` at the returned solution.
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvmModel {
    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    /// `f(x) = sum_i dual_coefs_i K(sv_i, x) + bias`.
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &c)| c * rbf(sv, x, self.params.gamma))
            .sum::<f64>()
            + self.bias
    }

    /// `+1` or `-1`; a zero decision value goes to `+1`.
    pub fn predict_sign(&self, x: &[f64]) -> f64 {
        if self.decision_value(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> usize {
        if self.predict_sign(x) > 0.0 {
            self.class_pair.0
        } else {
            self.class_pair.1
        }
    }
}

fn check_rows<X: AsRef<[f64]>>(features: &[X]) -> Result<usize> {
    let dim = features.first().map_or(0, |x| x.as_ref().len());
    for x in features {
        let x = x.as_ref();
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(dim)
}

/// Trains a binary soft-margin SVM with labels in `{-1, +1}` by SMO with
/// maximal-violating-pair working-set selection.
pub fn train_binary<X: AsRef<[f64]>>(
    features: &[X],
    labels: &[f64],
    params: KernelParams,
    settings: &SmoSettings,
) -> Result<BinarySvmModel> {
    params.validate()?;
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", settings.tol)));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidInput(format!("binary labels must be +1 or -1, got {bad}")));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    check_rows(features)?;

    let rows: Vec<&[f64]> = features.iter().map(AsRef::as_ref).collect();
    let p = rows.len();
    let c = params.c_penalty;
    let y = labels;
    let mut kernel = KernelRows::new(&rows, params.gamma);

    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(settings.seed));

    let budget = settings.max_passes.unwrap_or(5 * p).saturating_mul(p).max(1);
    let mut alpha = vec![0.0; p];
    let mut grad = vec![-1.0; p];
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    while iterations < budget {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        for &t in &order {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin <= settings.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let ki = kernel.row(i);
        let kj = kernel.row(j);
        let qij = y[i] * y[j] * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if y[i] != y[j] {
            let quad = (ki[i] + kj[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (ki[i] + kj[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..p {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // Fresh gradient, free of accumulated update error.
    let mut grad = vec![-1.0; p];
    for s in (0..p).filter(|&s| alpha[s] > 0.0) {
        let ks = kernel.row(s);
        for t in 0..p {
            grad[t] += y[t] * y[s] * alpha[s] * ks[t];
        }
    }

    let bias = compute_bias(&alpha, &grad, y, c);
    let dual_objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>();

    let support_indices: Vec<usize> = (0..p).filter(|&t| alpha[t] > 0.0).collect();
    Ok(BinarySvmModel {
        support_vectors: support_indices.iter().map(|&t| rows[t].to_vec()).collect(),
        dual_coefs: support_indices.iter().map(|&t| alpha[t] * y[t]).collect(),
        support_indices,
        bias,
        params,
        class_pair: (1, 2),
        n_training: p,
        dual_objective,
        iterations,
        converged,
    })
}

/// `b` as the mean of `-y_t G_t` over free vectors, or the midpoint of the
/// feasible interval when every multiplier sits at a bound.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum_free += v;
            n_free += 1;
        } else {
            // v is an upper bound on b for points in I_low only, lower bound for I_up only.
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            if up {
                lb = lb.max(v);
            } else {
                ub = ub.min(v);
            }
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else if lb.is_finite() && ub.is_finite() {
        0.5 * (lb + ub)
    } else if lb.is_finite() {
        lb
    } else if ub.is_finite() {
        ub
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest per-point KKT residual (margin condition or box bound).
    pub max_violation: f64,
    /// `m(a) - M(a)`, the maximal violating pair gap.
    pub dual_gap_proxy: f64,
    /// `|sum_i a_i y_i|`.
    pub equality_residual: f64,
    pub feasible: bool,
}

/// Checks the KKT conditions of `model` against the data it was trained on.
pub fn kkt_report<X: AsRef<[f64]>>(model: &BinarySvmModel, features: &[X], labels: &[f64], tol: f64) -> KktReport {
    let c = model.params.c_penalty;
    let mut alpha = vec![0.0; features.len()];
    for (&idx, &coef) in model.support_indices.iter().zip(&model.dual_coefs) {
        if let Some(a) = alpha.get_mut(idx) {
            *a = coef * labels[idx];
        }
    }
    let eps = 1e-10 * c.max(1.0);

    let mut max_violation: f64 = 0.0;
    let mut gmax = f64::NEG_INFINITY;
    let mut gmin = f64::INFINITY;
    for (t, x) in features.iter().enumerate() {
        let y = labels[t];
        let f = model.decision_value(x.as_ref());
        let margin = y * f;
        let a = alpha[t];
        let v = if a < -eps || a > c + eps {
            (-a).max(a - c)
        } else if a <= eps {
            (1.0 - margin).max(0.0)
        } else if a >= c - eps {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        max_violation = max_violation.max(v);

        let grad = margin - y * model.bias - 1.0;
        let score = -y * grad;
        if (y > 0.0 && a < c - eps) || (y < 0.0 && a > eps) {
            gmax = gmax.max(score);
        }
        if (y > 0.0 && a > eps) || (y < 0.0 && a < c - eps) {
            gmin = gmin.min(score);
        }
    }
    let equality_residual = model.dual_coefs.iter().sum::<f64>().abs();
    let dual_gap_proxy = if gmax.is_finite() && gmin.is_finite() {
        (gmax - gmin).max(0.0)
    } else {
        0.0
    };
    let bound = tol + KKT_NUMERIC_SLACK;
    KktReport {
        max_violation,
        dual_gap_proxy,
        equality_residual,
        feasible: max_violation <= bound && equality_residual <= bound,
    }
}

/// One-vs-one ensemble; `binary_models` follows the `(a, b)`, `a < b` pair
/// order over `classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvmModel {
    pub binary_models: Vec<BinarySvmModel>,
    pub classes: Vec<usize>,
    pub dim: usize,
}

impl MulticlassSvmModel {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn params(&self) -> KernelParams {
        self.binary_models[0].params
    }

    /// One-vs-one majority vote. Ties go to the class with the larger summed
    /// |decision value| over its won duels, then to the lower class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut confidence = vec![0.0f64; k];
        for m in &self.binary_models {
            let f = m.decision_value(x);
            let winner = if f >= 0.0 { m.class_pair.0 } else { m.class_pair.1 };
            let w = self.classes.binary_search(&winner).expect("pair labels come from classes");
            votes[w] += 1;
            confidence[w] += f.abs();
        }
        let best = (0..k)
            .max_by(|&a, &b| {
                votes[a]
                    .cmp(&votes[b])
                    .then(confidence[a].total_cmp(&confidence[b]))
                    .then(b.cmp(&a))
            })
            .expect("at least two classes");
        Ok(self.classes[best])
    }

    pub fn predict_all<X: AsRef<[f64]> + Sync>(&self, features: &[X]) -> Result<Vec<usize>> {
        features.par_iter().map(|x| self.predict(x.as_ref())).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.line(), e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::malformed(
                path,
                0,
                format!("unsupported model format {} v{}", file.format, file.version),
            ));
        }
        Ok(file.model)
    }
}

const MODEL_FORMAT: &str = "xgwo-svm-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: MulticlassSvmModel,
}

/// One binary model per unordered class pair, trained on that pair's
/// subset with the lower class id mapped to `+1`.
pub fn train_multiclass<X: AsRef<[f64]> + Sync>(
    features: &[X],
    labels: &[usize],
    params: KernelParams,
    settings: &SmoSettings,
) -> Result<MulticlassSvmModel> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = check_rows(features)?;
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let pairs: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| classes[i + 1..].iter().map(move |&b| (a, b)))
        .collect();

    let binary_models = pairs
        .par_iter()
        .enumerate()
        .map(|(pi, &(a, b))| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (x, &l) in features.iter().zip(labels) {
                if l == a || l == b {
                    xs.push(x.as_ref());
                    ys.push(if l == a { 1.0 } else { -1.0 });
                }
            }
            let pair_settings = SmoSettings {
                seed: settings.seed.wrapping_add(pi as u64),
                ..*settings
            };
            let mut m = train_binary(&xs, &ys, params, &pair_settings)
                .map_err(|e| e.context(format!("class pair ({a}, {b})")))?;
            m.class_pair = (a, b);
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MulticlassSvmModel {
        binary_models,
        classes,
        dim,
    })
}

/// Squared-label loss and its 0/1 counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessLoss {
    /// `(1/M) sum (y_i - h_i)^2` over integer class labels.
    pub loss: f64,
    pub error_rate: f64,
}

pub fn loss_from_predictions(truth: &[usize], predicted: &[usize]) -> Result<FitnessLoss> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("loss over zero samples".into()));
    }
    let m = truth.len() as f64;
    let sq: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(&y, &h)| {
            let d = y as f64 - h as f64;
            d * d
        })
        .sum();
    let wrong = truth.iter().zip(predicted).filter(|(y, h)| y != h).count();
    Ok(FitnessLoss {
        loss: sq / m,
        error_rate: wrong as f64 / m,
    })
}

pub fn fitness_loss<X: AsRef<[f64]> + Sync>(
    model: &MulticlassSvmModel,
    features: &[X],
    labels: &[usize],
) -> Result<FitnessLoss> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let predicted = model.predict_all(features)?;
    loss_from_predictions(labels, &predicted)
}
