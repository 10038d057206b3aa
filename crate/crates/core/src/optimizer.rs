//! Swarm search over `(log10 C, log10 gamma)`.
//!
//! Four variants share one fitness contract ([`Fitness`], lower is better):
//!
//! * `gwo`   three-leader grey wolf optimizer with the linear schedule
//! * `n_gwo` the same update driven by a configurable nonlinear schedule
//! * `x_gwo` nonlinear schedule plus an extra quarter weight on the alpha
//!   wolf: `eta <- xi1/4 + (X1 + X2 + X3)/4`
//! * `pso`   global-best particle swarm with constriction constants
//!
//! Randomness is drawn from one ChaCha stream per `(iteration, agent)`
//! derived from the master seed, so traces do not depend on how fitness
//! evaluations are scheduled across threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm::{self, KernelParams, MulticlassSvmModel, SmoSettings};

/// Exploration-exploitation schedule `phi(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regulation {
    /// `2 - 2t/L`
    #[serde(rename = "f_phi1")]
    Linear,
    /// `4 / (1 + e^(t-L)) - 2`
    #[serde(rename = "f_phi2")]
    LateSigmoid,
    /// `-4 / (1 + e^(-t)) + 4`
    #[serde(rename = "f_phi3")]
    EarlySigmoid,
    /// `-2 (t - L + 1) / (L - t)`
    #[serde(rename = "f_phi4")]
    Reciprocal,
    /// `2 cos(pi / (2tL))`, anchored at 2 for `t = 0`
    #[serde(rename = "f_phi5")]
    Cosine,
}

impl Regulation {
    pub const ALL: [Regulation; 5] = [
        Regulation::Linear,
        Regulation::LateSigmoid,
        Regulation::EarlySigmoid,
        Regulation::Reciprocal,
        Regulation::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regulation::Linear => "f_phi1",
            Regulation::LateSigmoid => "f_phi2",
            Regulation::EarlySigmoid => "f_phi3",
            Regulation::Reciprocal => "f_phi4",
            Regulation::Cosine => "f_phi5",
        }
    }
}

impl fmt::Display for Regulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let kind = match key.as_str() {
            "f_phi1" | "phi1" | "f1" | "linear" => Regulation::Linear,
            "f_phi2" | "phi2" | "f2" => Regulation::LateSigmoid,
            "f_phi3" | "phi3" | "f3" => Regulation::EarlySigmoid,
            "f_phi4" | "phi4" | "f4" | "reciprocal" => Regulation::Reciprocal,
            "f_phi5" | "phi5" | "f5" | "cosine" => Regulation::Cosine,
            _ => return Err(Error::Config(format!("unknown regulation function {s:?}"))),
        };
        Ok(kind)
    }
}

/// `phi(t)` for iteration `t` of `max_iter`, clamped to `[0, 2]`.
///
/// The reciprocal schedule is undefined at `t = L`, so it accepts
/// `0 <= t <= L - 1`; the others also accept the endpoint `t = L`.
pub fn regulation_value(kind: Regulation, t: usize, max_iter: usize) -> Result<f64> {
    let limit = if kind == Regulation::Reciprocal { max_iter.saturating_sub(1) } else { max_iter };
    if max_iter == 0 || t > limit {
        return Err(Error::InvalidInput(format!(
            "{kind} is undefined at t={t} for L={max_iter}"
        )));
    }
    let (tf, l) = (t as f64, max_iter as f64);
    let v = match kind {
        Regulation::Linear => 2.0 - 2.0 * tf / l,
        Regulation::LateSigmoid => 4.0 / (1.0 + (tf - l).exp()) - 2.0,
        Regulation::EarlySigmoid => -4.0 / (1.0 + (-tf).exp()) + 4.0,
        Regulation::Reciprocal => -2.0 * (tf - l + 1.0) / (-tf + l),
        Regulation::Cosine => {
            if t == 0 {
                2.0
            } else {
                2.0 * (std::f64::consts::PI / (2.0 * tf * l)).cos()
            }
        }
    };
    // `+ 0.0` turns a clamped -0.0 into 0.0
    Ok(v.clamp(0.0, 2.0) + 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Gwo,
    NGwo,
    XGwo,
    Pso,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Pso, Variant::Gwo, Variant::NGwo, Variant::XGwo];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gwo => "gwo",
            Variant::NGwo => "n_gwo",
            Variant::XGwo => "x_gwo",
            Variant::Pso => "pso",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gwo" => Ok(Variant::Gwo),
            "n_gwo" | "ngwo" => Ok(Variant::NGwo),
            "x_gwo" | "xgwo" => Ok(Variant::XGwo),
            "pso" => Ok(Variant::Pso),
            other => Err(Error::Config(format!("unknown optimizer variant {other:?}"))),
        }
    }
}

/// Box constraints on the two search coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl SearchBounds {
    /// Bounds in `(log10 C, log10 gamma)`.
    pub fn log10(c_range: (f64, f64), gamma_range: (f64, f64)) -> Result<Self> {
        Self::new([c_range.0, gamma_range.0], [c_range.1, gamma_range.1])
    }

    pub fn new(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        Self::new([lo, lo], [hi, hi])
    }

    pub fn validate(&self) -> Result<()> {
        for d in 0..2 {
            if !self.lower[d].is_finite() || !self.upper[d].is_finite() || self.lower[d] >= self.upper[d] {
                return Err(Error::Config(format!(
                    "bounds in dimension {d} must satisfy low < high, got [{}, {}]",
                    self.lower[d], self.upper[d]
                )));
            }
        }
        Ok(())
    }

    pub fn range(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.lower[0], self.upper[0]),
            p[1].clamp(self.lower[1], self.upper[1]),
        ]
    }

    pub fn contains(&self, p: &[f64; 2]) -> bool {
        (0..2).all(|d| p[d] >= self.lower[d] && p[d] <= self.upper[d])
    }
}

impl Default for SearchBounds {
    /// `C` in `[1e-2, 1e3]`, `gamma` in `[1e-4, 1e1]`.
    fn default() -> Self {
        Self {
            lower: [-2.0, -4.0],
            upper: [3.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub n_agents: usize,
    pub max_iter: usize,
    pub bounds: SearchBounds,
    /// Schedule for `n_gwo` and `x_gwo`; `gwo` always runs the linear one.
    pub regulation: Regulation,
    pub variant: Variant,
    pub seed: u64,
    pub smo: SmoSettings,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_agents: 20,
            max_iter: 50,
            bounds: SearchBounds::default(),
            regulation: Regulation::Reciprocal,
            variant: Variant::XGwo,
            seed: 0,
            smo: SmoSettings::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 4 {
            return Err(Error::Config(format!("need at least 4 agents, got {}", self.n_agents)));
        }
        if self.max_iter < 2 {
            return Err(Error::Config(format!("need at least 2 iterations, got {}", self.max_iter)));
        }
        self.bounds.validate()
    }

    /// The schedule actually driving the run (`None` for PSO).
    pub fn effective_regulation(&self) -> Option<Regulation> {
        match self.variant {
            Variant::Gwo => Some(Regulation::Linear),
            Variant::NGwo | Variant::XGwo => Some(self.regulation),
            Variant::Pso => None,
        }
    }
}

/// Per-`(iteration, agent)` random streams under one master seed.
#[derive(Debug, Clone, Copy)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Stream used to initialize `agent`.
    pub fn init(&self, agent: usize) -> ChaCha8Rng {
        self.make(0, agent)
    }

    /// Stream for `agent`'s move at iteration `t`.
    pub fn step(&self, t: usize, agent: usize) -> ChaCha8Rng {
        self.make(t as u64 + 1, agent)
    }

    fn make(&self, slot: u64, agent: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((slot << 32) | agent as u64);
        rng
    }
}

/// Objective to minimize over a 2-D position.
pub trait Fitness: Sync {
    fn fitness(&self, position: &[f64; 2]) -> f64;
}

impl<F> Fitness for F
where
    F: Fn(&[f64; 2]) -> f64 + Sync,
{
    fn fitness(&self, position: &[f64; 2]) -> f64 {
        self(position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wolf {
    pub position: [f64; 2],
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pack {
    pub wolves: Vec<Wolf>,
}

pub fn init_pack(config: &OptimizerConfig) -> Result<Pack> {
    config.validate()?;
    let streams = RngStreams::new(config.seed);
    let b = &config.bounds;
    let wolves = (0..config.n_agents)
        .map(|i| {
            let mut rng = streams.init(i);
            Wolf {
                position: [
                    rng.random_range(b.lower[0]..=b.upper[0]),
                    rng.random_range(b.lower[1]..=b.upper[1]),
                ],
                fitness: None,
            }
        })
        .collect();
    Ok(Pack { wolves })
}

fn sanitize_fitness(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Evaluates every wolf in parallel. NaN fitness is recorded as `+inf`.
pub fn evaluate_pack<F: Fitness + ?Sized>(pack: &mut Pack, fitness: &F) {
    pack.wolves
        .par_iter_mut()
        .for_each(|w| w.fitness = Some(sanitize_fitness(fitness.fitness(&w.position))));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leader {
    pub position: [f64; 2],
    pub fitness: f64,
    /// Index of the wolf this leader came from, when taken from the current pack.
    pub wolf: Option<usize>,
}

/// Alpha, beta and delta, best first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderSet {
    pub leaders: [Leader; 3],
}

impl LeaderSet {
    pub fn xi1(&self) -> &Leader {
        &self.leaders[0]
    }

    pub fn positions(&self) -> [[f64; 2]; 3] {
        self.leaders.map(|l| l.position)
    }
}

/// The three lowest-loss wolves, ties broken by wolf index.
pub fn select_leaders(pack: &Pack) -> Result<LeaderSet> {
    merge_leaders(None, pack)
}

/// Lowest three among the previous leaders and the current pack. Previous
/// leaders win ties, so a leader is only displaced by a strictly better wolf.
pub fn merge_leaders(previous: Option<&LeaderSet>, pack: &Pack) -> Result<LeaderSet> {
    let mut candidates: Vec<Leader> = previous.map(|p| p.leaders.to_vec()).unwrap_or_default();
    for l in &mut candidates {
        l.wolf = None;
    }
    for (i, w) in pack.wolves.iter().enumerate() {
        let fitness = w
            .fitness
            .ok_or_else(|| Error::InvalidInput(format!("wolf {i} has not been evaluated")))?;
        candidates.push(Leader {
            position: w.position,
            fitness,
            wolf: Some(i),
        });
    }
    if candidates.len() < 3 {
        return Err(Error::InvalidInput("leader selection needs at least three wolves".into()));
    }
    candidates.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
    Ok(LeaderSet {
        leaders: [candidates[0], candidates[1], candidates[2]],
    })
}

/// Coefficient vectors for one wolf's move, one pair per leader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveCoefficients {
    /// `b_j = 2 phi r_j - phi`
    pub b: [[f64; 2]; 3],
    /// `c_j = 2 s_j`
    pub c: [[f64; 2]; 3],
}

impl MoveCoefficients {
    pub fn from_draws(phi: f64, r: [[f64; 2]; 3], s: [[f64; 2]; 3]) -> Self {
        Self {
            b: r.map(|rj| rj.map(|v| 2.0 * phi * v - phi)),
            c: s.map(|sj| sj.map(|v| 2.0 * v)),
        }
    }

    pub fn draw<R: Rng>(rng: &mut R, phi: f64) -> Self {
        let mut pair = || [rng.random::<f64>(), rng.random::<f64>()];
        let r = [pair(), pair(), pair()];
        let s = [pair(), pair(), pair()];
        Self::from_draws(phi, r, s)
    }
}

/// Unclamped new position of a wolf at `position` following `leaders`.
pub fn move_wolf(position: [f64; 2], leaders: &[[f64; 2]; 3], coeffs: &MoveCoefficients, variant: Variant) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (d, o) in out.iter_mut().enumerate() {
        let pulls: f64 = (0..3)
            .map(|j| {
                let xi = leaders[j][d];
                xi - coeffs.b[j][d] * (coeffs.c[j][d] * xi - position[d]).abs()
            })
            .sum();
        *o = match variant {
            Variant::XGwo => 0.25 * leaders[0][d] + 0.25 * pulls,
            _ => pulls / 3.0,
        };
    }
    out
}

/// Moves every wolf and clamps it into `bounds`. Fitness is reset.
pub fn update_positions(
    pack: &mut Pack,
    leaders: &LeaderSet,
    phi: f64,
    variant: Variant,
    bounds: &SearchBounds,
    streams: &RngStreams,
    t: usize,
) {
    let xi = leaders.positions();
    for (i, w) in pack.wolves.iter_mut().enumerate() {
        let coeffs = MoveCoefficients::draw(&mut streams.step(t, i), phi);
        w.position = bounds.clamp(move_wolf(w.position, &xi, &coeffs, variant));
        w.fitness = None;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `None` for PSO.
    pub phi: Option<f64>,
    /// Best fitness seen up to and including this iteration.
    pub best_fitness: f64,
    pub xi1: [f64; 2],
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub variant: Variant,
    pub regulation: Option<Regulation>,
    pub n_agents: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub bounds: SearchBounds,
    pub records: Vec<IterationRecord>,
    pub best_position: [f64; 2],
    pub best_fitness: f64,
    pub evaluations: usize,
    pub wall_ms: f64,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceLine<'a> {
    Header {
        variant: Variant,
        regulation: Option<Regulation>,
        n_agents: usize,
        max_iter: usize,
        seed: u64,
        bounds: &'a SearchBounds,
    },
    Iteration {
        t: usize,
        phi: Option<f64>,
        best_fitness: f64,
        xi1: [f64; 2],
        #[serde(skip_serializing_if = "Option::is_none")]
        wall_ms: Option<f64>,
    },
    Summary {
        best_fitness: f64,
        xi1: [f64; 2],
        c_opt: f64,
        gamma_opt: f64,
        evaluations: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        wall_ms: Option<f64>,
    },
}

impl RunTrace {
    /// `(C_o, gamma_o) = 10^xi1`.
    pub fn optimal_params(&self) -> (f64, f64) {
        (10f64.powf(self.best_position[0]), 10f64.powf(self.best_position[1]))
    }

    /// JSON lines: a header, one record per iteration, then a summary.
    /// Wall-clock fields are written only with `include_timing`, so traces
    /// are byte-reproducible by default.
    pub fn write_jsonl<W: Write>(&self, mut out: W, include_timing: bool) -> Result<()> {
        let io = |e: std::io::Error| Error::io("<trace>", e);
        let mut line = |l: &TraceLine| -> Result<()> {
            serde_json::to_writer(&mut out, l)?;
            out.write_all(b"\n").map_err(io)
        };
        line(&TraceLine::Header {
            variant: self.variant,
            regulation: self.regulation,
            n_agents: self.n_agents,
            max_iter: self.max_iter,
            seed: self.seed,
            bounds: &self.bounds,
        })?;
        for r in &self.records {
            line(&TraceLine::Iteration {
                t: r.t,
                phi: r.phi,
                best_fitness: r.best_fitness,
                xi1: r.xi1,
                wall_ms: include_timing.then_some(r.wall_ms),
            })?;
        }
        let (c_opt, gamma_opt) = self.optimal_params();
        line(&TraceLine::Summary {
            best_fitness: self.best_fitness,
            xi1: self.best_position,
            c_opt,
            gamma_opt,
            evaluations: self.evaluations,
            wall_ms: include_timing.then_some(self.wall_ms),
        })
    }
}

fn abort_if_hopeless(best: f64, t: usize) -> Result<()> {
    if best.is_finite() {
        Ok(())
    } else {
        Err(Error::OptimizerAbort(format!(
            "every fitness evaluation up to iteration {t} was infinite or NaN"
        )))
    }
}

/// Runs the configured variant against `fitness`.
pub fn run<F: Fitness + ?Sized>(config: &OptimizerConfig, fitness: &F) -> Result<RunTrace> {
    if config.variant == Variant::Pso {
        return run_pso(config, fitness);
    }
    config.validate()?;
    let regulation = config.effective_regulation().expect("grey wolf variants have a schedule");
    let started = Instant::now();
    let streams = RngStreams::new(config.seed);
    let mut pack = init_pack(config)?;
    let mut leaders: Option<LeaderSet> = None;
    let mut records = Vec::with_capacity(config.max_iter);
    let mut evaluations = 0;

    for t in 0..config.max_iter {
        evaluate_pack(&mut pack, fitness);
        evaluations += pack.wolves.len();
        let current = merge_leaders(leaders.as_ref(), &pack)?;
        abort_if_hopeless(current.xi1().fitness, t)?;
        let phi = regulation_value(regulation, t, config.max_iter)?;
        records.push(IterationRecord {
            t,
            phi: Some(phi),
            best_fitness: current.xi1().fitness,
            xi1: current.xi1().position,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        update_positions(&mut pack, &current, phi, config.variant, &config.bounds, &streams, t);
        leaders = Some(current);
    }

    let best = *leaders.expect("max_iter >= 2").xi1();
    Ok(RunTrace {
        variant: config.variant,
        regulation: Some(regulation),
        n_agents: config.n_agents,
        max_iter: config.max_iter,
        seed: config.seed,
        bounds: config.bounds,
        records,
        best_position: best.position,
        best_fitness: best.fitness,
        evaluations,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

pub const PSO_INERTIA: f64 = 0.729;
pub const PSO_COGNITIVE: f64 = 1.49445;
pub const PSO_SOCIAL: f64 = 1.49445;
/// Velocity limit as a fraction of each bound range.
pub const PSO_VELOCITY_FRACTION: f64 = 0.2;

/// Global-best PSO with the constriction constants above.
pub fn run_pso<F: Fitness + ?Sized>(config: &OptimizerConfig, fitness: &F) -> Result<RunTrace> {
    config.validate()?;
    let started = Instant::now();
    let streams = RngStreams::new(config.seed);
    let b = config.bounds;
    let vmax = [PSO_VELOCITY_FRACTION * b.range(0), PSO_VELOCITY_FRACTION * b.range(1)];

    let mut pack = init_pack(config)?;
    let mut velocity: Vec<[f64; 2]> = (0..config.n_agents)
        .map(|i| {
            // Continue the init stream past the two position draws.
            let mut rng = streams.init(i);
            let _ = (rng.random::<f64>(), rng.random::<f64>());
            [
                rng.random_range(-vmax[0]..=vmax[0]),
                rng.random_range(-vmax[1]..=vmax[1]),
            ]
        })
        .collect();
    let mut personal: Vec<([f64; 2], f64)> = vec![([0.0; 2], f64::INFINITY); config.n_agents];
    let mut global = ([0.0; 2], f64::INFINITY);
    let mut records = Vec::with_capacity(config.max_iter);
    let mut evaluations = 0;

    for t in 0..config.max_iter {
        evaluate_pack(&mut pack, fitness);
        evaluations += pack.wolves.len();
        for (i, w) in pack.wolves.iter().enumerate() {
            let f = w.fitness.expect("just evaluated");
            if f < personal[i].1 {
                personal[i] = (w.position, f);
            }
            if f < global.1 {
                global = (w.position, f);
            }
        }
        abort_if_hopeless(global.1, t)?;
        records.push(IterationRecord {
            t,
            phi: None,
            best_fitness: global.1,
            xi1: global.0,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        for (i, w) in pack.wolves.iter_mut().enumerate() {
            let mut rng = streams.step(t, i);
            for d in 0..2 {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let v = PSO_INERTIA * velocity[i][d]
                    + PSO_COGNITIVE * r1 * (personal[i].0[d] - w.position[d])
                    + PSO_SOCIAL * r2 * (global.0[d] - w.position[d]);
                velocity[i][d] = v.clamp(-vmax[d], vmax[d]);
                w.position[d] += velocity[i][d];
            }
            w.position = b.clamp(w.position);
            w.fitness = None;
        }
    }

    Ok(RunTrace {
        variant: Variant::Pso,
        regulation: None,
        n_agents: config.n_agents,
        max_iter: config.max_iter,
        seed: config.seed,
        bounds: b,
        records,
        best_position: global.0,
        best_fitness: global.1,
        evaluations,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// SVM validation loss at `(C, gamma) = 10^position`.
pub struct SvmFitness<'a> {
    pub train_features: Vec<&'a [f64]>,
    pub train_labels: Vec<usize>,
    pub test_features: Vec<&'a [f64]>,
    pub test_labels: Vec<usize>,
    pub smo: SmoSettings,
}

impl SvmFitness<'_> {
    pub fn params_at(position: &[f64; 2]) -> Result<KernelParams> {
        KernelParams::new(10f64.powf(position[0]), 10f64.powf(position[1]))
    }

    pub fn train_at(&self, position: &[f64; 2]) -> Result<MulticlassSvmModel> {
        svm::train_multiclass(&self.train_features, &self.train_labels, Self::params_at(position)?, &self.smo)
    }
}

impl Fitness for SvmFitness<'_> {
    /// Failed trainings score `+inf` instead of aborting the swarm.
    fn fitness(&self, position: &[f64; 2]) -> f64 {
        self.train_at(position)
            .and_then(|m| svm::fitness_loss(&m, &self.test_features, &self.test_labels))
            .map_or(f64::INFINITY, |l| l.loss)
    }
}

pub struct TuneOutcome {
    pub trace: RunTrace,
    pub params: KernelParams,
    /// Trained on the fitness training set at the optimal parameters.
    pub model: MulticlassSvmModel,
}

/// Runs the optimizer on SVM validation loss and trains the final model.
pub fn tune_svm(config: &OptimizerConfig, fitness: &SvmFitness<'_>) -> Result<TuneOutcome> {
    if fitness.train_features.is_empty() || fitness.test_features.is_empty() {
        return Err(Error::InvalidInput("tuning needs non-empty train and test sets".into()));
    }
    let trace = run(config, fitness)?;
    let params = SvmFitness::params_at(&trace.best_position)?;
    let model = fitness.train_at(&trace.best_position)?;
    Ok(TuneOutcome { trace, params, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(p: &[f64; 2]) -> f64 {
        p[0] * p[0] + p[1] * p[1]
    }

    fn cfg(variant: Variant, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            n_agents: 20,
            max_iter: 100,
            bounds: SearchBounds::square(-10.0, 10.0).unwrap(),
            variant,
            seed,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn reciprocal_schedule_values() {
        assert!((regulation_value(Regulation::Reciprocal, 0, 100).unwrap() - 1.98).abs() < 1e-15);
        let end = regulation_value(Regulation::Reciprocal, 99, 100).unwrap();
        assert!(end == 0.0 && end.is_sign_positive());
        assert!(regulation_value(Regulation::Reciprocal, 100, 100).is_err());
    }

    #[test]
    fn linear_schedule_endpoints() {
        assert_eq!(regulation_value(Regulation::Linear, 0, 40).unwrap(), 2.0);
        assert_eq!(regulation_value(Regulation::Linear, 40, 40).unwrap(), 0.0);
        assert!(regulation_value(Regulation::Linear, 41, 40).is_err());
    }

    #[test]
    fn schedules_stay_in_range() {
        for kind in Regulation::ALL {
            for l in [2, 10, 100, 500] {
                for t in 0..l {
                    let v = regulation_value(kind, t, l).unwrap();
                    assert!((0.0..=2.0).contains(&v), "{kind} t={t} L={l}: {v}");
                }
            }
            assert!(regulation_value(kind, 0, 100).unwrap() > 1.9, "{kind}");
        }
    }

    #[test]
    fn names_parse_back() {
        for kind in Regulation::ALL {
            assert_eq!(kind.name().parse::<Regulation>().unwrap(), kind);
        }
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("f_phi9".parse::<Regulation>().is_err());
        assert!("abc".parse::<Variant>().is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let c = OptimizerConfig {
            n_agents: 30,
            bounds: SearchBounds::log10((-2.0, 3.0), (-4.0, 1.0)).unwrap(),
            ..OptimizerConfig::default()
        };
        let a = init_pack(&c).unwrap();
        assert_eq!(a, init_pack(&c).unwrap());
        assert_eq!(a.wolves.len(), 30);
        assert!(a.wolves.iter().all(|w| c.bounds.contains(&w.position) && w.fitness.is_none()));
        let other = init_pack(&OptimizerConfig { seed: 1, ..c.clone() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig { n_agents: 3, ..OptimizerConfig::default() }.validate().is_err());
        assert!(OptimizerConfig { max_iter: 1, ..OptimizerConfig::default() }.validate().is_err());
        assert!(SearchBounds::new([1.0, 0.0], [1.0, 2.0]).is_err());
    }

    fn pack_with(fitness: &[f64]) -> Pack {
        Pack {
            wolves: fitness
                .iter()
                .enumerate()
                .map(|(i, &f)| Wolf {
                    position: [i as f64, 0.0],
                    fitness: Some(f),
                })
                .collect(),
        }
    }

    #[test]
    fn leaders_sorted_ascending() {
        let l = select_leaders(&pack_with(&[0.3, 0.1, 0.2, 0.9])).unwrap();
        let idx: Vec<_> = l.leaders.iter().map(|x| x.wolf.unwrap()).collect();
        assert_eq!(idx, vec![1, 2, 0]);
        let l = select_leaders(&pack_with(&[0.5; 4])).unwrap();
        let idx: Vec<_> = l.leaders.iter().map(|x| x.wolf.unwrap()).collect();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn fourth_wolf_never_leads() {
        let l = select_leaders(&pack_with(&[0.4, 0.3, 0.2, 0.1])).unwrap();
        assert!(l.leaders.iter().all(|x| x.wolf != Some(0)));
        let mut p = pack_with(&[0.1, 0.2, 0.3, 0.4]);
        assert!(select_leaders(&p).unwrap().leaders.iter().all(|x| x.wolf != Some(3)));
        p.wolves[2].fitness = None;
        assert!(select_leaders(&p).is_err());
    }

    #[test]
    fn previous_leaders_are_kept_until_beaten() {
        let first = select_leaders(&pack_with(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let merged = merge_leaders(Some(&first), &pack_with(&[0.5, 0.15, 0.9, 0.1])).unwrap();
        let f: Vec<f64> = merged.leaders.iter().map(|l| l.fitness).collect();
        assert_eq!(f, vec![0.1, 0.1, 0.15]);
        assert_eq!(merged.leaders[0].wolf, None);
    }

    #[test]
    fn coincident_pack_is_a_fixed_point() {
        let p = [0.37, -1.25];
        let coeffs = MoveCoefficients::from_draws(1.7, [[0.5; 2]; 3], [[0.8, 0.1], [0.3, 0.9], [0.5, 0.5]]);
        assert!(coeffs.b.iter().flatten().all(|&b| b == 0.0));
        let moved = move_wolf(p, &[p; 3], &coeffs, Variant::XGwo);
        assert!((moved[0] - p[0]).abs() <= 4.0 * f64::EPSILON * p[0].abs());
        assert!((moved[1] - p[1]).abs() <= 4.0 * f64::EPSILON * p[1].abs());
    }

    #[test]
    fn zero_phi_collapses_onto_weighted_leaders() {
        let leaders = [[1.0, 2.0], [3.0, -1.0], [-2.0, 0.5]];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs = MoveCoefficients::draw(&mut rng, 0.0);
        let x = move_wolf([9.0, -9.0], &leaders, &coeffs, Variant::XGwo);
        let expect = [0.25 * 1.0 + 0.25 * (1.0 + 3.0 - 2.0), 0.25 * 2.0 + 0.25 * (2.0 - 1.0 + 0.5)];
        assert!((x[0] - expect[0]).abs() < 1e-15 && (x[1] - expect[1]).abs() < 1e-15);
        let g = move_wolf([9.0, -9.0], &leaders, &coeffs, Variant::Gwo);
        assert!((g[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut widest: f64 = 0.0;
        for _ in 0..2000 {
            let phi = rng.random_range(0.0..=2.0);
            let c = MoveCoefficients::draw(&mut rng, phi);
            for j in 0..3 {
                for d in 0..2 {
                    assert!(c.b[j][d].abs() <= phi + 1e-15);
                    assert!((0.0..=2.0).contains(&c.c[j][d]));
                }
            }
            if phi > 1.99 {
                widest = widest.max(c.b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
        // Near phi = 2 some moves have |b| > 1, i.e. diverge from the leader.
        assert!(widest > 1.5);
    }

    #[test]
    fn evaluation_is_pure() {
        let c = cfg(Variant::XGwo, 4);
        let mut a = init_pack(&c).unwrap();
        a.wolves[3].position = a.wolves[1].position;
        evaluate_pack(&mut a, &sphere);
        let mut b = a.clone();
        evaluate_pack(&mut b, &sphere);
        assert_eq!(a, b);
        assert_eq!(a.wolves[3].fitness, a.wolves[1].fitness);
    }

    #[test]
    fn two_iterations_two_rounds() {
        let c = OptimizerConfig { max_iter: 2, ..cfg(Variant::XGwo, 0) };
        let t = run(&c, &sphere).unwrap();
        assert_eq!(t.records.len(), 2);
        assert_eq!(t.evaluations, 40);
    }

    #[test]
    fn runs_are_reproducible_and_monotone() {
        for v in Variant::ALL {
            let c = cfg(v, 12);
            let a = run(&c, &sphere).unwrap();
            let mut b = run(&c, &sphere).unwrap();
            for r in &mut b.records {
                r.wall_ms = 0.0;
            }
            let mut a2 = a.clone();
            for r in &mut a2.records {
                r.wall_ms = 0.0;
            }
            a2.wall_ms = 0.0;
            b.wall_ms = 0.0;
            assert_eq!(a2, b, "{v}");
            for w in a.records.windows(2) {
                assert!(w[1].best_fitness <= w[0].best_fitness);
            }
            assert!(c.bounds.contains(&a.best_position));
        }
    }

    #[test]
    fn positions_stay_in_bounds() {
        // A fitness peaked outside the box drives wolves into the walls.
        let c = OptimizerConfig {
            bounds: SearchBounds::square(-1.0, 1.0).unwrap(),
            ..cfg(Variant::XGwo, 2)
        };
        let streams = RngStreams::new(c.seed);
        let mut pack = init_pack(&c).unwrap();
        let far = |p: &[f64; 2]| (p[0] - 50.0).powi(2) + (p[1] + 50.0).powi(2);
        let mut leaders = None;
        for t in 0..30 {
            evaluate_pack(&mut pack, &far);
            let l = merge_leaders(leaders.as_ref(), &pack).unwrap();
            let phi = regulation_value(Regulation::Reciprocal, t, 30).unwrap();
            update_positions(&mut pack, &l, phi, Variant::XGwo, &c.bounds, &streams, t);
            assert!(pack.wolves.iter().all(|w| c.bounds.contains(&w.position)));
            leaders = Some(l);
        }
    }

    #[test]
    fn hopeless_fitness_aborts() {
        let c = cfg(Variant::Gwo, 0);
        assert!(matches!(run(&c, &|_: &[f64; 2]| f64::NAN), Err(Error::OptimizerAbort(_))));
        assert!(matches!(
            run(&OptimizerConfig { variant: Variant::Pso, ..c }, &|_: &[f64; 2]| f64::INFINITY),
            Err(Error::OptimizerAbort(_))
        ));
    }

    #[test]
    fn every_variant_finds_the_sphere_minimum() {
        for v in Variant::ALL {
            let t = run(&cfg(v, 21), &sphere).unwrap();
            assert!(t.best_fitness < 1e-3, "{v}: {}", t.best_fitness);
        }
    }

    #[test]
    fn pso_is_deterministic() {
        let c = cfg(Variant::Pso, 8);
        let a = run(&c, &sphere).unwrap();
        let b = run(&c, &sphere).unwrap();
        let strip = |t: &RunTrace| t.records.iter().map(|r| (r.best_fitness, r.xi1)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.regulation, None);
    }

    #[test]
    fn trace_jsonl_layout() {
        let t = run(&OptimizerConfig { max_iter: 3, ..cfg(Variant::Pso, 1) }, &sphere).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].contains("\"record\":\"header\"") && lines[0].contains("\"variant\":\"pso\""));
        assert!(lines[1].contains("\"record\":\"iteration\""));
        assert!(lines[4].contains("\"record\":\"summary\""));
        assert!(!text.contains("wall_ms"));
        let mut timed = Vec::new();
        t.write_jsonl(&mut timed, true).unwrap();
        assert!(String::from_utf8(timed).unwrap().contains("wall_ms"));
    }
}
