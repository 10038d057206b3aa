//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct 1-based double loop: `y(k) = w(k) sum_n x(n) cos(pi (2n-1)(k-1) / 2N)`.
pub fn naive_dct(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (1..=n)
        .map(|k| {
            let w = if k == 1 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let mut acc = 0.0;
            for i in 1..=n {
                acc += x[i - 1] * (std::f64::consts::PI * (2 * i - 1) as f64 * (k - 1) as f64 / (2.0 * nf)).cos();
            }
            w * acc
        })
        .collect()
}

pub fn gaussian_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(r);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exact optimum of the soft-margin dual
/// `max sum a - 1/2 sum a_i a_j y_i y_j K_ij`, `0 <= a <= C`, `y.a = 0`,
/// found by enumerating which multipliers sit at 0, at C, or strictly
/// inside, and solving the equality-constrained stationarity system on
/// the free ones. Returns `(objective, alpha)`.
pub fn brute_force_dual(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> (f64, Vec<f64>) {
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * gaussian_kernel(&x[i], &x[j], gamma)).collect())
        .collect();
    let objective = |a: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q[i][j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        // status: 0 -> at zero, 1 -> at C, 2 -> free
        let mut status = vec![0u8; n];
        let mut m = code;
        for s in status.iter_mut() {
            *s = (m % 3) as u8;
            m /= 3;
        }
        let mut alpha: Vec<f64> = status.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == 2).collect();
        if !free.is_empty() {
            let f = free.len();
            let mut a = vec![vec![0.0; f + 1]; f + 1];
            let mut rhs = vec![0.0; f + 1];
            for (r, &i) in free.iter().enumerate() {
                for (cc, &j) in free.iter().enumerate() {
                    a[r][cc] = q[i][j];
                }
                a[r][f] = y[i];
                a[f][r] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|&j| status[j] == 1).map(|j| q[i][j] * c).sum::<f64>();
            }
            rhs[f] = -(0..n).filter(|&j| status[j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = solve(a, rhs) else { continue };
            if sol[..f].iter().any(|&v| v < -1e-12 || v > c + 1e-12) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r].clamp(0.0, c);
            }
        }
        let eq: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
        if eq.abs() > 1e-9 * (1.0 + c) {
            continue;
        }
        let w = objective(&alpha);
        if w > best.0 {
            best = (w, alpha);
        }
    }
    best
}

/// A random binary problem with both labels present.
pub fn random_binary_problem(seed: u64, max_points: usize) -> (Vec<Vec<f64>>, Vec<f64>, f64, f64) {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_points);
    let dim = r.random_range(1..=3);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let mut y: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let c = 10f64.powf(r.random_range(-1.0..1.0));
    let gamma = 10f64.powf(r.random_range(-1.0..0.5));
    (x, y, c, gamma)
}

pub struct Recount {
    pub pre: Vec<f64>,
    pub rec: Vec<f64>,
    pub f1: Vec<f64>,
    pub acc: Vec<f64>,
    pub top1: f64,
}

/// Per-class one-vs-rest metrics counted sample by sample.
pub fn recount(truth: &[usize], pred: &[usize], classes: &[usize]) -> Recount {
    let mut out = Recount {
        pre: vec![],
        rec: vec![],
        f1: vec![],
        acc: vec![],
        top1: truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / truth.len() as f64,
    };
    for &c in classes {
        let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                (false, false) => tn += 1.0,
            }
        }
        let pre = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        out.pre.push(pre);
        out.rec.push(rec);
        out.f1.push(if pre + rec > 0.0 { 2.0 * pre * rec / (pre + rec) } else { 0.0 });
        out.acc.push((tp + tn) / (tp + tn + fp + fn_));
    }
    out
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn tone(freq_hz: f64, fs: f64, seconds: f64) -> Vec<f64> {
    (0..(seconds * fs).round() as usize)
        .map(|i| (2.0 * std::f64::consts::PI * freq_hz * i as f64 / fs).sin())
        .collect()
}
