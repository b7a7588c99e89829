//! Fixed optimal designs and their curvature quantities.
//!
//! The solver starts with first-order steps ξ(j) = (1/j)δ_x̄ + (1-1/j)ξ(j-1),
//! then sharpens the weights with vertex additions and an active-set Newton
//! iteration on the support, and finally certifies the result with the
//! general equivalence theorem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{argmin, info_matrix, weighted_gram, Criterion, Design, ExactDesign};
use crate::error_models::{ErrorModel, ErrorMoments};
use crate::linalg::{eig_range, Spd};
use crate::models::{ModelFamily, ModelSpec};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct FodOptions {
    pub max_iter: usize,
    /// Certificate tolerance on min φ.
    pub tol: f64,
    /// Weights below this are removed before the final certificate.
    pub prune: f64,
    /// Budget of plain first-order steps before the Newton refinement.
    pub first_order_steps: usize,
    pub record_trace: bool,
}

impl Default for FodOptions {
    fn default() -> Self {
        FodOptions { max_iter: 200_000, tol: 1e-7, prune: 1e-6, first_order_steps: 200, record_trace: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FodResult {
    pub design: Design,
    /// Ψ* = Ψ(M(ξ*)).
    pub criterion_value: f64,
    pub iterations: usize,
    /// min φ over candidates at the returned design.
    pub get_violation: f64,
    pub worst_point: usize,
    /// Ψ after every accepted step when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

/// Convex surrogate minimised by the solver: -log det M, tr M⁻¹ or cᵀM⁻¹c.
struct Objective<'a> {
    spec: &'a ModelSpec,
    crit: &'a Criterion,
}

struct Local {
    g: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl<'a> Objective<'a> {
    fn matrix(&self, w: &[f64]) -> DMatrix<f64> {
        weighted_gram(
            self.spec.p(),
            w.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, &x)| (self.spec.feature(i), x)),
        )
    }

    fn value_m(&self, m: &DMatrix<f64>) -> Option<f64> {
        let f = Spd::new(m).ok()?;
        Some(match self.crit {
            Criterion::D => -f.log_det(),
            Criterion::A => f.inverse().trace(),
            Criterion::C(c) => c.dot(&f.solve(c)),
        })
    }

    fn value(&self, w: &[f64]) -> Option<f64> {
        self.value_m(&self.matrix(w))
    }

    fn psi_from_g(&self, g: f64) -> f64 {
        match self.crit {
            Criterion::D => (-g / self.spec.p() as f64).exp(),
            _ => 1.0 / g,
        }
    }

    /// Value, gradient and Hessian restricted to `support`.
    fn local(&self, w: &[f64], support: &[usize]) -> Result<Local> {
        let m = self.matrix(w);
        let f = Spd::new(&m)?;
        let minv = f.inverse();
        let p = self.spec.p();
        let d = support.len();
        let fs = DMatrix::from_fn(d, p, |i, j| self.spec.feature(support[i])[j]);
        let fm = &fs * &minv;
        let b = &fm * fs.transpose();
        Ok(match self.crit {
            Criterion::D => Local {
                g: -f.log_det(),
                grad: DVector::from_fn(d, |i, _| -b[(i, i)]),
                hess: b.map(|x| x * x),
            },
            Criterion::A => {
                let c2 = &fm * fm.transpose();
                Local {
                    g: minv.trace(),
                    grad: DVector::from_fn(d, |i, _| -c2[(i, i)]),
                    hess: b.component_mul(&c2) * 2.0,
                }
            }
            Criterion::C(c) => {
                let u = &fm * c;
                let q = c.dot(&(&minv * c));
                Local {
                    g: q,
                    grad: DVector::from_fn(d, |i, _| -u[i] * u[i]),
                    hess: DMatrix::from_fn(d, d, |i, j| 2.0 * u[i] * u[j] * b[(i, j)]),
                }
            }
        })
    }
}

/// Pivoted selection of p candidates with linearly independent features.
fn independent_subset(spec: &ModelSpec) -> Vec<usize> {
    let p = spec.p();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(p);
    let mut resid: Vec<DVector<f64>> = spec.features().to_vec();
    while chosen.len() < p {
        let (best, norm) = resid
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .map(|(i, r)| (i, r.norm()))
            .fold((usize::MAX, 0.0), |acc, (i, n)| if n > acc.1 * (1.0 + 1e-12) { (i, n) } else { acc });
        if best == usize::MAX || norm <= 1e-12 {
            break;
        }
        let q = &resid[best] / norm;
        for r in resid.iter_mut() {
            let proj = q.dot(r);
            r.axpy(-proj, &q, 1.0);
        }
        basis.push(q);
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

fn phi_all(spec: &ModelSpec, crit: &Criterion, w: &[f64]) -> Result<Vec<f64>> {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let design = Design { weights: support.iter().map(|&i| w[i]).collect(), support };
    let m = info_matrix(spec, &design);
    let k = crit.sensitivity_kernel(&m.entries)?;
    Ok(spec.features().iter().map(|f| k.phi(f)).collect())
}

fn to_design(w: &[f64]) -> Design {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let total: f64 = support.iter().map(|&i| w[i]).sum();
    Design { weights: support.iter().map(|&i| w[i] / total).collect(), support }
}

fn renormalize(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
}

struct Solver<'a> {
    obj: Objective<'a>,
    opts: &'a FodOptions,
    iterations: usize,
    trace: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn record(&mut self, g: f64) {
        self.iterations += 1;
        if self.opts.record_trace {
            self.trace.push(self.obj.psi_from_g(g));
        }
    }

    /// Minimises G along (1-α)w + α e_x for α in [0, 1).
    fn vertex_step(&mut self, w: &mut [f64], x: usize) -> bool {
        let g0 = match self.obj.value(w) {
            Some(g) => g,
            None => return false,
        };
        let eval = |a: f64| {
            let mut t: Vec<f64> = w.iter().map(|v| v * (1.0 - a)).collect();
            t[x] += a;
            self.obj.value(&t).unwrap_or(f64::INFINITY)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-9);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - r * (hi - lo);
        let mut d = lo + r * (hi - lo);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..80 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - r * (hi - lo);
                fc = eval(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + r * (hi - lo);
                fd = eval(d);
            }
        }
        let a = 0.5 * (lo + hi);
        let ga = eval(a);
        // a tiny α can only be judged up to the resolution of G
        if !(ga < g0 || (a > 0.0 && ga <= g0 + 1e-13 * g0.abs())) {
            return false;
        }
        for v in w.iter_mut() {
            *v *= 1.0 - a;
        }
        w[x] += a;
        self.record(ga);
        true
    }

    /// Active-set Newton on the current support. Returns when the Newton
    /// decrement vanishes.
    fn newton(&mut self, w: &mut Vec<f64>) -> Result<()> {
        for _ in 0..500 {
            let mut support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
            if support.len() <= 1 {
                return Ok(());
            }
            let loc = self.obj.local(w, &support)?;
            let mut free: Vec<usize> = (0..support.len()).collect();
            let delta = loop {
                let delta = kkt_step(&loc, &free);
                // coordinates pinned at zero that want to go negative leave the free set
                let blocked: Vec<usize> = free
                    .iter()
                    .copied()
                    .filter(|&k| w[support[k]] <= 1e-15 && delta[k] < 0.0)
                    .collect();
                if blocked.is_empty() || free.len() - blocked.len() < 1 {
                    break delta;
                }
                free.retain(|k| !blocked.contains(k));
            };
            let slope = loc.grad.dot(&delta);
            if !(slope < 0.0) || delta.amax() < 1e-15 {
                return Ok(());
            }
            // Below this predicted decrease the objective cannot resolve the
            // step, so a full step is trusted as long as it does not visibly
            // increase G.
            let in_noise = -slope <= 1e-11 * loc.g.abs();
            let mut t_max = 1.0f64;
            let mut block = None;
            for (k, &dk) in delta.iter().enumerate() {
                if dk < 0.0 {
                    let t = w[support[k]] / -dk;
                    if t < t_max {
                        t_max = t;
                        block = Some(k);
                    }
                }
            }
            let mut t = t_max;
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial = w.clone();
                for (k, &i) in support.iter().enumerate() {
                    trial[i] = (trial[i] + t * delta[k]).max(0.0);
                }
                if t == t_max {
                    if let Some(k) = block {
                        trial[support[k]] = 0.0;
                    }
                }
                renormalize(&mut trial);
                if let Some(g) = self.obj.value(&trial) {
                    let noise_ok = in_noise && g <= loc.g + 1e-13 * loc.g.abs();
                    if g <= loc.g + 1e-4 * t * slope || noise_ok {
                        accepted = Some((trial, g));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, g)) => {
                    *w = trial;
                    self.record(g);
                }
                None => return Ok(()),
            }
            support.retain(|&i| w[i] > 0.0);
            if self.iterations >= self.opts.max_iter {
                return Ok(());
            }
        }
        Ok(())
    }
}

/// Equality-constrained Newton direction on the free coordinates.
fn kkt_step(loc: &Local, free: &[usize]) -> DVector<f64> {
    let n = free.len();
    let mut h = DMatrix::from_fn(n, n, |i, j| loc.hess[(free[i], free[j])]);
    let g = DVector::from_fn(n, |i, _| loc.grad[free[i]]);
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 1e-12 * scale;
    let chol = loop {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += ridge;
        }
        if let Some(c) = hr.cholesky() {
            break c;
        }
        ridge *= 100.0;
        if ridge > scale {
            for i in 0..n {
                h[(i, i)] += ridge;
            }
            break h.clone().cholesky().expect("diagonally dominated");
        }
    };
    let ones = DVector::from_element(n, 1.0);
    let hg = chol.solve(&g);
    let h1 = chol.solve(&ones);
    let lambda = -ones.dot(&hg) / ones.dot(&h1);
    let step = -(hg + h1 * lambda);
    let mut full = DVector::zeros(loc.grad.len());
    for (i, &k) in free.iter().enumerate() {
        full[k] = step[i];
    }
    full
}

/// Computes a Ψ-optimal continuous design over the candidate set.
pub fn solve_fod(spec: &ModelSpec, crit: &Criterion, init: Option<&Design>, opts: &FodOptions) -> Result<FodResult> {
    crit.check_dim(spec.p())?;
    let n = spec.num_candidates();
    let mut w = vec![0.0; n];
    match init {
        Some(d) => {
            d.validate(spec)?;
            for (&i, &x) in d.support.iter().zip(&d.weights) {
                w[i] = x;
            }
        }
        None => {
            let sub = independent_subset(spec);
            for &i in &sub {
                w[i] = 1.0 / sub.len() as f64;
            }
        }
    }
    renormalize(&mut w);
    let obj = Objective { spec, crit };
    if obj.value(&w).is_none() {
        return Err(Error::SingularInformation("initial design has singular information".into()));
    }
    let mut solver = Solver { obj, opts, iterations: 0, trace: Vec::new() };
    if opts.record_trace {
        let g = solver.obj.value(&w).unwrap();
        solver.trace.push(solver.obj.psi_from_g(g));
    }

    // first-order phase with α = 1/j
    let mut j = w.iter().filter(|&&x| x > 0.0).count();
    for _ in 0..opts.first_order_steps.min(opts.max_iter) {
        let phi = phi_all(spec, crit, &w)?;
        let (x, m) = argmin(&phi);
        if m >= -opts.tol {
            break;
        }
        j += 1;
        let g0 = solver.obj.value(&w).unwrap();
        let mut alpha = 1.0 / j as f64;
        let mut moved = false;
        for _ in 0..40 {
            let mut t: Vec<f64> = w.iter().map(|v| v * (1.0 - alpha)).collect();
            t[x] += alpha;
            if let Some(g) = solver.obj.value(&t) {
                if g < g0 {
                    w = t;
                    solver.record(g);
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }

    // refinement: Newton on the support, add the worst violator, repeat
    let mut pruned = false;
    loop {
        solver.newton(&mut w)?;
        let phi = phi_all(spec, crit, &w)?;
        let (x, m) = argmin(&phi);
        if m >= -opts.tol {
            if !pruned {
                pruned = true;
                let before = w.clone();
                for v in w.iter_mut() {
                    if *v < opts.prune {
                        *v = 0.0;
                    }
                }
                if w != before {
                    renormalize(&mut w);
                    if solver.obj.value(&w).is_none() {
                        w = before;
                    }
                    continue;
                }
            }
            let design = to_design(&w);
            let psi = crit.value(&info_matrix(spec, &design).entries)?;
            let cert = crate::design::get_certificate(crit, spec, &design, opts.tol)?;
            return Ok(FodResult {
                design,
                criterion_value: psi,
                iterations: solver.iterations,
                get_violation: cert.worst_violation,
                worst_point: cert.worst_point,
                trace: solver.trace,
            });
        }
        if solver.iterations >= opts.max_iter || !solver.vertex_step(&mut w, x) {
            return Err(Error::NonConvergence {
                iterations: solver.iterations,
                violation: m,
                best: Box::new(to_design(&w)),
            });
        }
    }
}

/// Largest-remainder rounding with lowest-index tie breaks and at least one
/// observation per support point.
pub fn round_to_exact(design: &Design, n: usize) -> Result<ExactDesign> {
    let d = design.d();
    if n < d {
        return Err(Error::InfeasibleRounding(format!("n = {n} is smaller than the support size {d}")));
    }
    let raw: Vec<f64> = design.weights.iter().map(|&w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&r| (r + 1e-9).floor() as usize).collect();
    let frac: Vec<f64> = raw.iter().zip(&counts).map(|(&r, &c)| r - c as f64).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        if (frac[a] - frac[b]).abs() > 1e-9 {
            frac[b].partial_cmp(&frac[a]).unwrap()
        } else {
            a.cmp(&b)
        }
    });
    let assigned: usize = counts.iter().sum();
    let mut rest = n.saturating_sub(assigned);
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    while let Some(z) = counts.iter().position(|&c| c == 0) {
        let donor = (0..d).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap();
        counts[donor] -= 1;
        counts[z] += 1;
    }
    Ok(ExactDesign { support: design.support.clone(), counts })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMethod {
    FiniteDifference,
    Analytic,
    /// Finite differences up to `AUTO_FD_MAX_D` support points, analytic beyond.
    Auto,
}

pub const AUTO_FD_MAX_D: usize = 120;
pub const FD_STEP: f64 = 1e-5;
/// Relative negative-eigenvalue slack for finite-difference Hessians.
pub const FD_PSD_SLACK: f64 = 1e-4;

/// H*, V* and R* for a design; independent of the error model.
#[derive(Clone, Debug)]
pub struct DesignCurvature {
    pub h_star: DMatrix<f64>,
    pub v_star: DMatrix<f64>,
    pub r_star: f64,
    pub psi_star: f64,
    pub d: usize,
    pub method: HessianMethod,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub h_star: Vec<Vec<f64>>,
    pub v_star: Vec<Vec<f64>>,
    pub r_star: f64,
    pub h: f64,
    pub s_star: f64,
    pub gamma_sq: f64,
    pub psi_star: f64,
    pub d: usize,
    pub n: usize,
    pub moments: ErrorMoments,
}

/// Ψ as a function of the first d-1 weights with w_d = 1 - Σ wᵢ.
fn reduced_psi<'a>(spec: &'a ModelSpec, crit: &'a Criterion, support: &'a [usize]) -> impl Fn(&[f64]) -> f64 + 'a {
    move |u: &[f64]| {
        let last = 1.0 - u.iter().sum::<f64>();
        let terms = support
            .iter()
            .enumerate()
            .map(|(k, &i)| (spec.feature(i), if k < u.len() { u[k] } else { last }));
        let m = weighted_gram(spec.p(), terms);
        crit.value(&m).unwrap_or(f64::NAN)
    }
}

/// Central-difference Hessian with one Richardson extrapolation step.
pub fn hessian_fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> DMatrix<f64> {
    let n = x.len();
    let second = |h: f64| {
        let mut out = DMatrix::zeros(n, n);
        let mut buf = x.to_vec();
        for i in 0..n {
            for j in 0..=i {
                let mut eval = |si: f64, sj: f64| {
                    buf.copy_from_slice(x);
                    buf[i] += si * h;
                    buf[j] += sj * h;
                    f(&buf)
                };
                let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    };
    let coarse = second(step);
    let fine = second(0.5 * step);
    (fine * 4.0 - coarse) / 3.0
}

/// Hessian of Ψ in all d weights, treated as free coordinates.
pub fn full_hessian_analytic(spec: &ModelSpec, crit: &Criterion, design: &Design) -> Result<DMatrix<f64>> {
    let obj = Objective { spec, crit };
    let mut w = vec![0.0; spec.num_candidates()];
    for (&i, &x) in design.support.iter().zip(&design.weights) {
        w[i] = x;
    }
    let loc = obj.local(&w, &design.support)?;
    let gg = &loc.grad * loc.grad.transpose();
    Ok(match crit {
        Criterion::D => {
            let p = spec.p() as f64;
            let psi = (-loc.g / p).exp();
            (gg / (p * p) - &loc.hess / p) * psi
        }
        _ => gg * (2.0 / loc.g.powi(3)) - &loc.hess / (loc.g * loc.g),
    })
}

/// V* = diag(w₍d₎) - w₍d₎w₍d₎ᵀ, the limiting covariance of the first d-1 allocation fractions.
pub fn v_star(weights: &[f64]) -> DMatrix<f64> {
    let m = weights.len().saturating_sub(1);
    DMatrix::from_fn(m, m, |i, j| if i == j { weights[i] * (1.0 - weights[i]) } else { -weights[i] * weights[j] })
}

pub fn design_curvature(spec: &ModelSpec, crit: &Criterion, design: &Design, method: HessianMethod) -> Result<DesignCurvature> {
    design.validate(spec)?;
    let d = design.d();
    let psi_star = crit.value(&info_matrix(spec, design).entries)?;
    if d == 1 {
        return Ok(DesignCurvature {
            h_star: DMatrix::zeros(0, 0),
            v_star: DMatrix::zeros(0, 0),
            r_star: 0.0,
            psi_star,
            d,
            method,
        });
    }
    let method = match method {
        HessianMethod::Auto if d <= AUTO_FD_MAX_D => HessianMethod::FiniteDifference,
        HessianMethod::Auto => HessianMethod::Analytic,
        m => m,
    };
    let h_star = match method {
        HessianMethod::FiniteDifference => {
            let u = &design.weights[..d - 1];
            -hessian_fd(reduced_psi(spec, crit, &design.support), u, FD_STEP)
        }
        _ => {
            let full = full_hessian_analytic(spec, crit, design)?;
            let last = d - 1;
            -DMatrix::from_fn(last, last, |i, j| {
                full[(i, j)] - full[(i, last)] - full[(last, j)] + full[(last, last)]
            })
        }
    };
    if h_star.iter().any(|x| !x.is_finite()) {
        return Err(Error::Curvature("non-finite design Hessian".into()));
    }
    let sym = (&h_star + h_star.transpose()) * 0.5;
    // Zero eigenvalues are legitimate when optimal weights are not unique.
    let (lo, hi) = eig_range(&sym);
    let slack = match method {
        HessianMethod::FiniteDifference => FD_PSD_SLACK,
        _ => 1e-9,
    };
    if lo < -slack * hi.abs().max(1.0) {
        return Err(Error::Curvature(format!(
            "design Hessian is indefinite (eigenvalues {lo:.3e}..{hi:.3e}); the input design is probably not optimal"
        )));
    }
    let v = v_star(&design.weights);
    let r_star = (&sym * &v).trace() / (2.0 * psi_star);
    Ok(DesignCurvature { h_star: sym, v_star: v, r_star, psi_star, d, method })
}

pub fn curvature_report(
    spec: &ModelSpec,
    crit: &Criterion,
    fod: &FodResult,
    err: &ErrorModel,
    n: usize,
    method: HessianMethod,
) -> Result<CurvatureReport> {
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let dc = design_curvature(spec, crit, &fod.design, method)?;
    let m = err.moments()?;
    let nf = n as f64;
    let h = 1.0 + dc.d as f64 / (2.0 * nf * m.mu * m.mu) * (m.mu3 * m.mu3 / m.mu + m.mu4);
    let deficit = m.gamma_sq * dc.r_star / nf;
    if deficit >= 1.0 {
        return Err(Error::Curvature(format!(
            "n = {n} is not larger than γ²R* = {:.3}; the efficiency ratio is undefined",
            m.gamma_sq * dc.r_star
        )));
    }
    let rows = |x: &DMatrix<f64>| (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
    Ok(CurvatureReport {
        h_star: rows(&dc.h_star),
        v_star: rows(&dc.v_star),
        r_star: dc.r_star,
        h,
        s_star: 1.0 / (1.0 - deficit),
        gamma_sq: m.gamma_sq,
        psi_star: dc.psi_star,
        d: dc.d,
        n,
        moments: m,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Table1Row {
    pub family: ModelFamily,
    pub s: usize,
    pub p: usize,
    pub criterion: String,
    pub r_star: Option<f64>,
    pub psi_star: Option<f64>,
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// R* for treatment, interaction and quadratic families over s = 1..=max_s.
/// Failed cells are reported in `error` rather than aborting the table.
pub fn table1(max_s: usize, quadratic_max_s: usize, criteria: &[Criterion]) -> Vec<Table1Row> {
    let mut cells = Vec::new();
    for fam in [ModelFamily::Treatment, ModelFamily::Interaction, ModelFamily::Quadratic] {
        let top = if fam == ModelFamily::Quadratic { max_s.min(quadratic_max_s) } else { max_s };
        for s in 1..=top {
            for c in criteria {
                cells.push((fam, s, c.clone()));
            }
        }
    }
    crate::par::map(cells, |(fam, s, crit)| table1_cell(fam, s, &crit))
}

pub fn table1_cell(family: ModelFamily, s: usize, crit: &Criterion) -> Table1Row {
    let spec = match family {
        ModelFamily::Treatment => ModelSpec::treatment(s),
        ModelFamily::Interaction => ModelSpec::interaction(s),
        _ => ModelSpec::quadratic(s),
    };
    let mut row = Table1Row {
        family,
        s,
        p: spec.as_ref().map(ModelSpec::p).unwrap_or(0),
        criterion: crit.to_string(),
        r_star: None,
        psi_star: None,
        d: None,
        error: None,
    };
    let run = || -> Result<DesignCurvature> {
        let spec = spec?;
        let fod = solve_fod(&spec, crit, None, &FodOptions::default())?;
        design_curvature(&spec, crit, &fod.design, HessianMethod::Auto)
    };
    match run() {
        Ok(dc) => {
            row.r_star = Some(dc.r_star);
            row.psi_star = Some(dc.psi_star);
            row.d = Some(dc.d);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}
