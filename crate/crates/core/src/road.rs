//! Observed-information adaptive design over the support of a fixed optimal design.
//!
//! After k round-robin replicates at each support point, every further
//! observation goes to the point, among those whose observed-information
//! share ω lags its optimal weight, that minimises the sensitivity of the
//! design τ_A with weights ω.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{weighted_gram, Criterion, Design, ExactDesign};
use crate::error_models::ErrorModel;
use crate::location::{location_mle, PointFit};
use crate::models::ModelSpec;
use crate::{Error, Result};

/// ω within this distance below w* counts as "reached" for candidate exclusion.
pub const OMEGA_TIE: f64 = 1e-12;

fn default_k() -> usize {
    3
}

fn default_q_floor() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_q_floor")]
    pub q_floor: f64,
    /// Target sample size; optional for live sessions.
    #[serde(default)]
    pub total_n: Option<usize>,
}

impl Default for RoadConfig {
    fn default() -> Self {
        RoadConfig { k: default_k(), q_floor: default_q_floor(), total_n: None }
    }
}

impl RoadConfig {
    pub fn with_total(total_n: usize) -> Self {
        RoadConfig { total_n: Some(total_n), ..Default::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointBuffer {
    pub y: Vec<f64>,
    /// Ancillaries, empty unless the error model carries one.
    pub a: Vec<f64>,
}

impl PointBuffer {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// One response at support point `point` (0-based index into the FOD support).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub point: usize,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentState {
    pub support: Vec<usize>,
    pub features: Vec<DVector<f64>>,
    pub w_star: Vec<f64>,
    pub err: ErrorModel,
    pub mu: f64,
    pub cfg: RoadConfig,
    pub buffers: Vec<PointBuffer>,
    /// Per-point location MLE; NaN until the point has data.
    pub eta_hat: Vec<f64>,
    pub i_a: Vec<f64>,
    pub q: Vec<f64>,
    pub q_total: f64,
    pub omega: Vec<f64>,
    pub history: Vec<Observation>,
}

impl ExperimentState {
    pub fn new(spec: &ModelSpec, fod: &Design, err: ErrorModel, cfg: RoadConfig) -> Result<Self> {
        fod.validate(spec)?;
        if cfg.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(cfg.q_floor > 0.0) {
            return Err(Error::Config("q_floor must be positive".into()));
        }
        let d = fod.d();
        if let Some(n) = cfg.total_n {
            if n < cfg.k * d {
                return Err(Error::Config(format!(
                    "total_n = {n} is smaller than the initial k·d = {}",
                    cfg.k * d
                )));
            }
        }
        let mu = err.moments()?.mu;
        let mut state = ExperimentState {
            support: fod.support.clone(),
            features: fod.support.iter().map(|&i| spec.feature(i).clone()).collect(),
            w_star: fod.weights.clone(),
            err,
            mu,
            cfg,
            buffers: vec![PointBuffer::default(); d],
            eta_hat: vec![f64::NAN; d],
            i_a: vec![0.0; d],
            q: vec![0.0; d],
            q_total: 0.0,
            omega: vec![0.0; d],
            history: Vec::new(),
        };
        state.update_weights();
        Ok(state)
    }

    pub fn d(&self) -> usize {
        self.support.len()
    }

    /// Observations so far.
    pub fn j(&self) -> usize {
        self.history.len()
    }

    pub fn init_len(&self) -> usize {
        self.cfg.k * self.d()
    }

    /// The k·d round-robin assignments that precede adaptation.
    pub fn initialization_schedule(&self) -> Vec<usize> {
        (0..self.cfg.k).flat_map(|_| 0..self.d()).collect()
    }

    pub fn in_initialization(&self) -> bool {
        self.j() < self.init_len()
    }

    pub fn record_response(&mut self, point: usize, y: f64, a: Option<f64>) -> Result<()> {
        if point >= self.d() {
            return Err(Error::DataShape(format!("support index {point} out of range (d = {})", self.d())));
        }
        if !y.is_finite() {
            return Err(Error::DataShape("response must be finite".into()));
        }
        self.err.check_draw(&crate::error_models::ErrorDraw { epsilon: 0.0, ancillary: a })?;
        let buf = &mut self.buffers[point];
        buf.y.push(y);
        if let Some(a) = a {
            buf.a.push(a);
        }
        self.history.push(Observation { point, y, a });
        self.refresh(point)
    }

    /// Recomputes η̂ and i_a at one point from its buffer.
    pub fn refresh(&mut self, point: usize) -> Result<()> {
        let buf = &self.buffers[point];
        let PointFit { eta_hat, info } = location_mle(&self.err, &buf.y, &buf.a).map_err(|e| match e {
            Error::Estimation(m) => Error::Estimation(format!("support point {point}: {m}")),
            other => other,
        })?;
        self.eta_hat[point] = eta_hat;
        self.i_a[point] = info;
        self.update_weights();
        Ok(())
    }

    fn update_weights(&mut self) {
        for i in 0..self.d() {
            self.q[i] = (self.i_a[i] / self.mu).max(self.cfg.q_floor);
        }
        self.q_total = self.q.iter().sum();
        for i in 0..self.d() {
            self.omega[i] = self.q[i] / self.q_total;
        }
    }

    /// Next support point: the schedule during initialization, the adaptive rule after.
    pub fn next_point(&self, crit: &Criterion) -> Result<usize> {
        if self.in_initialization() {
            return Ok(self.j() % self.d());
        }
        select_point(crit, &self.features, &self.w_star, &self.omega)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.buffers.iter().map(PointBuffer::len).collect()
    }

    pub fn exact_design(&self) -> ExactDesign {
        ExactDesign { support: self.support.clone(), counts: self.counts() }
    }

    /// i_a with the floor applied on the information scale.
    pub fn floored_info(&self) -> Vec<f64> {
        self.q.iter().map(|q| q * self.mu).collect()
    }

    /// J_A = Σ i_a f fᵀ over the support.
    pub fn observed_information(&self) -> DMatrix<f64> {
        let p = self.features[0].len();
        let info = self.floored_info();
        weighted_gram(p, self.features.iter().zip(info))
    }
}

/// The adaptive selection rule as a pure function of ω and w*.
pub fn select_point(crit: &Criterion, features: &[DVector<f64>], w_star: &[f64], omega: &[f64]) -> Result<usize> {
    let d = features.len();
    if d == 1 {
        return Ok(0);
    }
    let p = features[0].len();
    let m = weighted_gram(p, features.iter().zip(omega.iter().copied()));
    let kernel = crit.sensitivity_kernel(&m).map_err(|e| match e {
        Error::SingularInformation(msg) => Error::SingularInformation(format!("design τ_A: {msg}")),
        other => other,
    })?;
    let lagging: Vec<usize> = (0..d).filter(|&i| omega[i] < w_star[i] - OMEGA_TIE).collect();
    let pool: Vec<usize> = if lagging.is_empty() { (0..d).collect() } else { lagging };
    let mut best = (pool[0], f64::INFINITY);
    for &i in &pool {
        let phi = kernel.phi(&features[i]);
        if phi < best.1 {
            best = (i, phi);
        }
    }
    Ok(best.0)
}

/// Simulates a complete adaptive experiment with y = βᵀf(x) + ε.
pub fn run_road<R: Rng + ?Sized>(
    spec: &ModelSpec,
    fod: &Design,
    err: ErrorModel,
    crit: &Criterion,
    cfg: RoadConfig,
    rng: &mut R,
    beta: &DVector<f64>,
) -> Result<ExperimentState> {
    let total = cfg.total_n.ok_or_else(|| Error::Config("run_road needs total_n".into()))?;
    if beta.len() != spec.p() {
        return Err(Error::Config(format!("beta has length {}, model has p = {}", beta.len(), spec.p())));
    }
    let mut state = ExperimentState::new(spec, fod, err, cfg)?;
    let means: Vec<f64> = state.features.iter().map(|f| f.dot(beta)).collect();
    for step in 0..total {
        let x = state.next_point(crit).map_err(|e| at_step(e, step))?;
        let draw = err.sample_one(rng);
        state
            .record_response(x, means[x] + draw.epsilon, draw.ancillary)
            .map_err(|e| at_step(e, step))?;
    }
    Ok(state)
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Estimation(m) => Error::Estimation(format!("step {step}: {m}")),
        Error::SingularInformation(m) => Error::SingularInformation(format!("step {step}: {m}")),
        other => other,
    }
}
