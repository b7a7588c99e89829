//! Seeded Monte Carlo comparison of the adaptive design against the fixed optimal design.
//!
//! Every (arm, n, replicate) triple owns a ChaCha stream derived from the
//! master seed, so results do not depend on worker count or scheduling.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::Criterion;
use crate::error_models::ErrorModel;
use crate::fod::{curvature_report, round_to_exact, solve_fod, CurvatureReport, FodOptions, FodResult, HessianMethod};
use crate::inference::{chi2_test, fit_mle, fit_state, FitResult};
use crate::linalg::{compensated_sum, Spd};
use crate::models::{ModelRef, ModelSpec};
use crate::road::{run_road, PointBuffer, RoadConfig};
use crate::stats::mean_se;
use crate::{par, Error, Result};

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.01;
/// Delete-a-group jackknife groups for Ψ(MSE⁻¹).
pub const JACKKNIFE_GROUPS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "ROAD")]
    Road,
    #[serde(rename = "FOD")]
    Fod,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Road => "ROAD",
            Arm::Fod => "FOD",
        }
    }

    fn id(self) -> u64 {
        match self {
            Arm::Road => 0,
            Arm::Fod => 1,
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_target() -> f64 {
    0.8
}

fn default_replicates() -> usize {
    2000
}

fn default_arms() -> Vec<Arm> {
    vec![Arm::Road, Arm::Fod]
}

/// χ² test of cᵀβ = c0 run on every replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerBlock {
    pub c: Vec<f64>,
    #[serde(default)]
    pub c0: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Nominal power for the minimal-n interpolation.
    #[serde(default = "default_target")]
    pub target: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelRef,
    pub error_model: String,
    pub criterion: String,
    #[serde(default)]
    pub road_config: RoadConfig,
    /// True parameter; defaults to 1_p.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    #[serde(default)]
    pub power_block: Option<PowerBlock>,
}

/// A validated configuration with its optimal design solved.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub spec: ModelSpec,
    pub err: ErrorModel,
    pub crit: Criterion,
    pub fod: FodResult,
    pub beta: DVector<f64>,
    pub info_floor: f64,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("simulation config: {e}")))
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let spec = self.model.build()?;
        let err = ErrorModel::parse(&self.error_model)?;
        let crit = Criterion::parse(&self.criterion)?;
        crit.check_dim(spec.p())?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must not be empty".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::Config("arms must name at least one of ROAD, FOD".into()));
        }
        let beta = match &self.beta {
            Some(b) if b.len() != spec.p() => {
                return Err(Error::Config(format!("beta has length {}, model has p = {}", b.len(), spec.p())))
            }
            Some(b) => DVector::from_vec(b.clone()),
            None => DVector::from_element(spec.p(), 1.0),
        };
        if let Some(pb) = &self.power_block {
            if pb.c.len() != spec.p() || pb.c.iter().all(|&v| v == 0.0) {
                return Err(Error::Config("power_block.c must be a nonzero vector of length p".into()));
            }
            if !(pb.alpha > 0.0 && pb.alpha < 1.0) || !(pb.target > 0.0 && pb.target < 1.0) {
                return Err(Error::Config("power_block alpha and target must lie in (0, 1)".into()));
            }
        }
        let fod = solve_fod(&spec, &crit, None, &FodOptions::default())?;
        let min_n = self.road_config.k * fod.design.d();
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < min_n) {
            return Err(Error::Config(format!("n = {n} is below k·d = {min_n}")));
        }
        let info_floor = self.road_config.q_floor * err.moments()?.mu;
        Ok(Prepared { spec, err, crit, fod, beta, info_floor })
    }
}

/// Stream index for one (arm, n, replicate) triple.
pub fn stream_id(arm: Arm, n: usize, replicate: usize) -> u64 {
    (arm.id() << 62) | ((n as u64 & 0x3fff_ffff) << 32) | (replicate as u64 & 0xffff_ffff)
}

pub fn replicate_rng(master_seed: u64, arm: Arm, n: usize, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(arm, n, replicate));
    rng
}

/// What one replicate of one arm contributes.
#[derive(Clone, Debug)]
pub struct ReplicateOutcome {
    pub psi: f64,
    pub psi_fig: f64,
    pub deviation: DVector<f64>,
    pub reject: Option<bool>,
}

fn is_replicate_failure(e: &Error) -> bool {
    matches!(e, Error::Estimation(_) | Error::SingularInformation(_))
}

/// Fixed-design experiment: largest-remainder counts at each support point.
pub fn simulate_fod_arm(prep: &Prepared, n: usize, rng: &mut ChaCha8Rng) -> Result<FitResult> {
    let exact = round_to_exact(&prep.fod.design, n)?;
    let features: Vec<DVector<f64>> = exact.support.iter().map(|&i| prep.spec.feature(i).clone()).collect();
    let mut buffers = Vec::with_capacity(exact.support.len());
    for (f, &count) in features.iter().zip(&exact.counts) {
        let mean = f.dot(&prep.beta);
        let mut buf = PointBuffer::default();
        for draw in prep.err.sample(count, rng) {
            buf.y.push(mean + draw.epsilon);
            if let Some(a) = draw.ancillary {
                buf.a.push(a);
            }
        }
        buffers.push(buf);
    }
    fit_mle(&prep.err, &features, &buffers, prep.info_floor)
}

pub fn simulate_road_arm(prep: &Prepared, cfg: &RoadConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<FitResult> {
    let cfg = RoadConfig { total_n: Some(n), ..cfg.clone() };
    let state = run_road(&prep.spec, &prep.fod.design, prep.err, &prep.crit, cfg, rng, &prep.beta)?;
    fit_state(&state)
}

fn outcome(prep: &Prepared, fit: &FitResult, power: Option<&PowerBlock>) -> Result<ReplicateOutcome> {
    let j = &fit.j.entries;
    let reject = match power {
        Some(pb) => Some(chi2_test(fit, &DVector::from_vec(pb.c.clone()), pb.c0, pb.alpha)?.reject),
        None => None,
    };
    Ok(ReplicateOutcome {
        psi: prep.crit.value(j)?,
        psi_fig: prep.crit.report_value(j)?,
        deviation: &fit.beta_hat - &prep.beta,
        reject,
    })
}

pub fn run_replicate(config: &SimConfig, prep: &Prepared, arm: Arm, n: usize, r: usize) -> Result<ReplicateOutcome> {
    let mut rng = replicate_rng(config.master_seed, arm, n, r);
    let fit = match arm {
        Arm::Road => simulate_road_arm(prep, &config.road_config, n, &mut rng)?,
        Arm::Fod => simulate_fod_arm(prep, n, &mut rng)?,
    };
    outcome(prep, &fit, config.power_block.as_ref())
}

/// Mean with its standard error; `stderr` is absent when undefined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

impl Estimate {
    fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr: stderr.is_finite().then_some(stderr) }
    }

    /// a/b for independent estimates, delta-method error.
    fn ratio(a: Estimate, b: Estimate) -> Self {
        let r = a.value / b.value;
        let se = match (a.stderr, b.stderr) {
            (Some(sa), Some(sb)) => r.abs() * ((sa / a.value).powi(2) + (sb / b.value).powi(2)).sqrt(),
            _ => f64::NAN,
        };
        Estimate::new(r, se)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
    /// E[Ψ(J)] on the criterion scale (D: |J|^{1/p}).
    pub psi_j: Estimate,
    /// E[Ψ(J)] on the reporting scale (D: |J|^{1/2}).
    pub psi_j_fig: Estimate,
    pub mse: Vec<Vec<f64>>,
    pub psi_inv_mse: Estimate,
    pub psi_inv_mse_fig: Estimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject_rate: Option<Estimate>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Efficiency {
    pub n: usize,
    pub eff_ci: Estimate,
    pub eff_ci_fig: Estimate,
    pub eff_umse: Estimate,
    pub eff_umse_fig: Estimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimResult {
    pub model: String,
    pub error_model: String,
    pub criterion: String,
    pub master_seed: u64,
    pub replicates: usize,
    pub fod_support: Vec<usize>,
    pub fod_weights: Vec<f64>,
    pub arms: Vec<ArmSummary>,
    /// ROAD over FOD at each n, present when both arms ran.
    pub efficiencies: Vec<Efficiency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl SimResult {
    pub fn arm(&self, arm: Arm, n: usize) -> Option<&ArmSummary> {
        self.arms.iter().find(|s| s.arm == arm && s.n == n)
    }

    pub fn efficiency(&self, n: usize) -> Option<&Efficiency> {
        self.efficiencies.iter().find(|e| e.n == n)
    }
}

fn psi_inv(crit: &Criterion, mse: &DMatrix<f64>, fig: bool) -> f64 {
    match Spd::new(mse) {
        Ok(f) => {
            let inv = f.inverse();
            let v = if fig { crit.report_value(&inv) } else { crit.value(&inv) };
            v.unwrap_or(f64::NAN)
        }
        Err(_) => f64::NAN,
    }
}

fn mse_matrix<'a>(p: usize, devs: impl Iterator<Item = &'a DVector<f64>>) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(p, p);
    let mut count = 0usize;
    for d in devs {
        acc.ger(1.0, d, d, 1.0);
        count += 1;
    }
    acc / count.max(1) as f64
}

/// Ψ(MSE⁻¹) and its delete-a-group jackknife standard error.
fn psi_inv_mse(crit: &Criterion, p: usize, devs: &[&DVector<f64>], fig: bool) -> Estimate {
    let full = psi_inv(crit, &mse_matrix(p, devs.iter().copied()), fig);
    let g = JACKKNIFE_GROUPS.min(devs.len());
    if g < 2 {
        return Estimate::new(full, f64::NAN);
    }
    let leave_out: Vec<f64> = (0..g)
        .map(|k| {
            let kept = devs.iter().enumerate().filter(|(i, _)| i % g != k).map(|(_, d)| *d);
            psi_inv(crit, &mse_matrix(p, kept), fig)
        })
        .collect();
    let mean = compensated_sum(leave_out.iter().copied()) / g as f64;
    let ss = compensated_sum(leave_out.iter().map(|v| (v - mean) * (v - mean)));
    Estimate::new(full, ((g - 1) as f64 / g as f64 * ss).sqrt())
}

fn summarize(prep: &Prepared, arm: Arm, n: usize, outs: &[&ReplicateOutcome], failures: usize) -> ArmSummary {
    let p = prep.spec.p();
    let psi: Vec<f64> = outs.iter().map(|o| o.psi).collect();
    let psi_fig: Vec<f64> = outs.iter().map(|o| o.psi_fig).collect();
    let devs: Vec<&DVector<f64>> = outs.iter().map(|o| &o.deviation).collect();
    let mse = mse_matrix(p, devs.iter().copied());
    let reject_rate = if outs.iter().all(|o| o.reject.is_some()) && !outs.is_empty() {
        let hits: Vec<f64> = outs.iter().map(|o| if o.reject == Some(true) { 1.0 } else { 0.0 }).collect();
        let (m, se) = mean_se(&hits);
        Some(Estimate::new(m, se))
    } else {
        None
    };
    let (m, se) = mean_se(&psi);
    let (mf, sef) = mean_se(&psi_fig);
    ArmSummary {
        arm,
        n,
        replicates: outs.len(),
        failures,
        psi_j: Estimate::new(m, se),
        psi_j_fig: Estimate::new(mf, sef),
        mse: (0..p).map(|i| mse.row(i).iter().copied().collect()).collect(),
        psi_inv_mse: psi_inv_mse(&prep.crit, p, &devs, false),
        psi_inv_mse_fig: psi_inv_mse(&prep.crit, p, &devs, true),
        reject_rate,
    }
}

pub fn run_sim(config: &SimConfig) -> Result<SimResult> {
    let prep = config.prepare()?;
    run_prepared(config, &prep)
}

pub fn run_prepared(config: &SimConfig, prep: &Prepared) -> Result<SimResult> {
    let arms = dedup_arms(&config.arms);
    let tasks: Vec<(usize, usize)> =
        config.n_grid.iter().flat_map(|&n| (0..config.replicates).map(move |r| (n, r))).collect();
    let raw: Vec<Result<Vec<Option<ReplicateOutcome>>>> = par::map(tasks, |(n, r)| {
        arms.iter()
            .map(|&arm| match run_replicate(config, prep, arm, n, r) {
                Ok(o) => Ok(Some(o)),
                Err(e) if is_replicate_failure(&e) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(raw.len());
    for r in raw {
        rows.push(r?);
    }

    let mut summaries = Vec::new();
    let mut efficiencies = Vec::new();
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let block = &rows[ni * config.replicates..(ni + 1) * config.replicates];
        // matched pairs: a replicate counts only if every arm completed it
        let complete: Vec<&Vec<Option<ReplicateOutcome>>> =
            block.iter().filter(|row| row.iter().all(Option::is_some)).collect();
        let failures = config.replicates - complete.len();
        if failures as f64 > MAX_FAILURE_RATE * config.replicates as f64 {
            return Err(Error::Simulation(format!(
                "{failures} of {} replicates failed at n = {n}",
                config.replicates
            )));
        }
        if complete.is_empty() {
            return Err(Error::Simulation(format!("no replicate completed at n = {n}")));
        }
        let mut by_arm = Vec::new();
        for (k, &arm) in arms.iter().enumerate() {
            let outs: Vec<&ReplicateOutcome> = complete.iter().map(|row| row[k].as_ref().unwrap()).collect();
            by_arm.push(summarize(prep, arm, n, &outs, failures));
        }
        let road = by_arm.iter().find(|s| s.arm == Arm::Road);
        let fod = by_arm.iter().find(|s| s.arm == Arm::Fod);
        if let (Some(a), Some(b)) = (road, fod) {
            efficiencies.push(Efficiency {
                n,
                eff_ci: Estimate::ratio(a.psi_j, b.psi_j),
                eff_ci_fig: Estimate::ratio(a.psi_j_fig, b.psi_j_fig),
                eff_umse: Estimate::ratio(a.psi_inv_mse, b.psi_inv_mse),
                eff_umse_fig: Estimate::ratio(a.psi_inv_mse_fig, b.psi_inv_mse_fig),
            });
        }
        summaries.extend(by_arm);
    }
    Ok(SimResult {
        model: prep.spec.name().to_string(),
        error_model: prep.err.to_string(),
        criterion: prep.crit.to_string(),
        master_seed: config.master_seed,
        replicates: config.replicates,
        fod_support: prep.fod.design.support.clone(),
        fod_weights: prep.fod.design.weights.clone(),
        arms: summaries,
        efficiencies,
        wall_seconds: None,
    })
}

fn dedup_arms(arms: &[Arm]) -> Vec<Arm> {
    let mut out: Vec<Arm> = Vec::new();
    for &a in arms {
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

/// Monte Carlo E[Ψ(J)] against hΨ*n (ROAD) and hΨ*(n - γ²R*) (FOD), on
/// the criterion scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Theorem3Check {
    pub n: usize,
    pub lhs_road: Estimate,
    pub lhs_fod: Estimate,
    pub rhs_road: f64,
    pub rhs_fod: f64,
    pub z_road: f64,
    pub z_fod: f64,
    pub ratio: Estimate,
    pub s_star: f64,
    pub z_ratio: f64,
    pub curvature: CurvatureReport,
}

pub fn theorem3_check(config: &SimConfig, n: usize) -> Result<Theorem3Check> {
    let cfg = SimConfig { n_grid: vec![n], arms: vec![Arm::Road, Arm::Fod], ..config.clone() };
    let prep = cfg.prepare()?;
    let curvature = curvature_report(&prep.spec, &prep.crit, &prep.fod, &prep.err, n, HessianMethod::Auto)?;
    let res = run_prepared(&cfg, &prep)?;
    let road = res.arm(Arm::Road, n).expect("ROAD arm ran");
    let fod = res.arm(Arm::Fod, n).expect("FOD arm ran");
    // Ψ* is taken per observation on the expected-information scale, μΨ(M*)
    let base = curvature.h * curvature.moments.mu * curvature.psi_star;
    let rhs_road = base * n as f64;
    let rhs_fod = base * (n as f64 - curvature.gamma_sq * curvature.r_star);
    let z = |e: Estimate, target: f64| e.stderr.map_or(f64::NAN, |se| (e.value - target) / se);
    let ratio = Estimate::ratio(road.psi_j, fod.psi_j);
    Ok(Theorem3Check {
        n,
        lhs_road: road.psi_j,
        lhs_fod: fod.psi_j,
        rhs_road,
        rhs_fod,
        z_road: z(road.psi_j, rhs_road),
        z_fod: z(fod.psi_j, rhs_fod),
        ratio,
        s_star: curvature.s_star,
        z_ratio: z(ratio, curvature.s_star),
        curvature,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerPoint {
    pub n: usize,
    pub arm: Arm,
    pub power: Estimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerCurve {
    pub target: f64,
    pub points: Vec<PowerPoint>,
    /// Interpolated smallest n reaching `target`, per arm.
    pub min_n: Vec<(Arm, Option<f64>)>,
    pub result: SimResult,
}

/// First crossing of `target` along the grid, linear between grid points.
pub fn interpolate_min_n(curve: &[(usize, f64)], target: f64) -> Option<f64> {
    let mut sorted = curve.to_vec();
    sorted.sort_by_key(|c| c.0);
    for (k, &(n, p)) in sorted.iter().enumerate() {
        if p >= target {
            if k == 0 {
                return Some(n as f64);
            }
            let (n0, p0) = sorted[k - 1];
            return Some(n0 as f64 + (target - p0) / (p - p0) * (n - n0) as f64);
        }
    }
    None
}

pub fn power_curve(config: &SimConfig) -> Result<PowerCurve> {
    let pb = config
        .power_block
        .clone()
        .ok_or_else(|| Error::Config("power needs a power_block {c, c0, alpha}".into()))?;
    let result = run_sim(config)?;
    let mut points = Vec::new();
    let mut min_n = Vec::new();
    for arm in dedup_arms(&config.arms) {
        let mut curve = Vec::new();
        for &n in &config.n_grid {
            let s = result.arm(arm, n).expect("every arm is summarised at every n");
            let power = s.reject_rate.expect("power block present");
            curve.push((n, power.value));
            points.push(PowerPoint { n, arm, power });
        }
        min_n.push((arm, interpolate_min_n(&curve, pb.target)));
    }
    Ok(PowerCurve { target: pb.target, points, min_n, result })
}

/// One line of the long-format output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub arm: String,
    pub n: usize,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
}

pub fn result_rows(res: &SimResult) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    let mut push = |arm: &str, n: usize, reps: usize, metric: &str, e: Estimate| {
        rows.push(ResultRow {
            arm: arm.to_string(),
            n,
            metric: metric.to_string(),
            value: e.value,
            stderr: e.stderr,
            replicates: reps,
            seed: res.master_seed,
        })
    };
    for s in &res.arms {
        let label = s.arm.label();
        push(label, s.n, s.replicates, "psi_J", s.psi_j);
        push(label, s.n, s.replicates, "psi_J_fig", s.psi_j_fig);
        push(label, s.n, s.replicates, "psi_inv_mse", s.psi_inv_mse);
        push(label, s.n, s.replicates, "psi_inv_mse_fig", s.psi_inv_mse_fig);
        push(label, s.n, s.replicates, "failures", Estimate { value: s.failures as f64, stderr: None });
        if let Some(r) = s.reject_rate {
            push(label, s.n, s.replicates, "reject_rate", r);
        }
    }
    for e in &res.efficiencies {
        let reps = res.arm(Arm::Road, e.n).map_or(0, |s| s.replicates);
        push("ROAD/FOD", e.n, reps, "eff_ci", e.eff_ci);
        push("ROAD/FOD", e.n, reps, "eff_ci_fig", e.eff_ci_fig);
        push("ROAD/FOD", e.n, reps, "eff_umse", e.eff_umse);
        push("ROAD/FOD", e.n, reps, "eff_umse_fig", e.eff_umse_fig);
    }
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// Picks JSON for `.json` paths, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("arm,n,metric,value,stderr,replicates,seed\n");
    for r in rows {
        let se = r.stderr.map(|v| format!("{v:?}")).unwrap_or_default();
        out.push_str(&format!("{},{},{},{:?},{},{},{}\n", r.arm, r.n, r.metric, r.value, se, r.replicates, r.seed));
    }
    out
}

pub fn rows_to_json(rows: &[ResultRow]) -> Result<String> {
    serde_json::to_string_pretty(rows).map_err(|e| Error::Simulation(format!("serialising results: {e}")))
}

pub fn rows_from_json(text: &str) -> Result<Vec<ResultRow>> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("results file: {e}")))
}

pub fn render_results(res: &SimResult, format: OutputFormat) -> Result<String> {
    let rows = result_rows(res);
    match format {
        OutputFormat::Csv => Ok(rows_to_csv(&rows)),
        OutputFormat::Json => rows_to_json(&rows),
    }
}

/// Writes the long-format results; the caller chooses how the bytes reach disk.
pub fn emit_results(res: &SimResult, path: &Path, format: OutputFormat) -> Result<()> {
    let body = render_results(res, format)?;
    std::fs::write(path, body).map_err(|source| Error::Io { context: path.display().to_string(), source })
}

