//! Full-sample estimation, observed information and χ² inference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{weighted_gram, InfoMatrix, InfoScale};
use crate::error_models::{ErrorDraw, ErrorModel};
use crate::linalg::Spd;
use crate::location::location_mle;
use crate::road::{ExperimentState, PointBuffer};
use crate::stats::{chi2_quantile, unit_ball_log_volume};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    /// J_A = Fᵀ I_A F on the total-observed scale.
    pub j: InfoMatrix,
    pub eta_hat: DVector<f64>,
    /// Per-point observed information after flooring.
    pub info: Vec<f64>,
    pub converged: bool,
    pub loglik: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub reject: bool,
    pub alpha: f64,
    /// c(J) = (cᵀJ⁻¹c)⁻¹.
    pub c_value: f64,
    pub critical: f64,
}

/// Fits β from per-point buffers; `info_floor` is applied to each i_a.
pub fn fit_mle(
    err: &ErrorModel,
    features: &[DVector<f64>],
    buffers: &[PointBuffer],
    info_floor: f64,
) -> Result<FitResult> {
    if features.len() != buffers.len() || features.is_empty() {
        return Err(Error::DataShape(format!(
            "{} support points but {} buffers",
            features.len(),
            buffers.len()
        )));
    }
    let mut eta = Vec::with_capacity(buffers.len());
    let mut info = Vec::with_capacity(buffers.len());
    for (i, b) in buffers.iter().enumerate() {
        let f = location_mle(err, &b.y, &b.a).map_err(|e| match e {
            Error::DataShape(m) => Error::DataShape(format!("support point {i}: {m}")),
            Error::Estimation(m) => Error::Estimation(format!("support point {i}: {m}")),
            other => other,
        })?;
        eta.push(f.eta_hat);
        info.push(f.info.max(info_floor));
    }
    fit_from_points(err, features, buffers, eta, info)
}

/// Fit reusing the per-point estimates already held by a ROAD state.
pub fn fit_state(state: &ExperimentState) -> Result<FitResult> {
    if let Some(i) = state.buffers.iter().position(PointBuffer::is_empty) {
        return Err(Error::DataShape(format!("support point {i} has no observations")));
    }
    fit_from_points(&state.err, &state.features, &state.buffers, state.eta_hat.clone(), state.floored_info())
}

fn fit_from_points(
    err: &ErrorModel,
    features: &[DVector<f64>],
    buffers: &[PointBuffer],
    eta: Vec<f64>,
    info: Vec<f64>,
) -> Result<FitResult> {
    let d = features.len();
    let p = features[0].len();
    if d < p {
        return Err(Error::SingularInformation(format!("{d} support points cannot identify {p} parameters")));
    }
    let j = weighted_gram(p, features.iter().zip(info.iter().copied()));
    let jf = Spd::new(&j)?;
    let eta_v = DVector::from_vec(eta);
    let loglik_at = |beta: &DVector<f64>| -> f64 {
        let mut l = 0.0;
        for (f, b) in features.iter().zip(buffers) {
            let m = f.dot(beta);
            for (k, &y) in b.y.iter().enumerate() {
                l += err.log_density(&ErrorDraw { epsilon: y - m, ancillary: b.a.get(k).copied() });
            }
        }
        l
    };
    if d == p {
        let fmat = DMatrix::from_fn(d, p, |i, k| features[i][k]);
        let beta = fmat
            .lu()
            .solve(&eta_v)
            .ok_or_else(|| Error::SingularInformation("support feature matrix is singular".into()))?;
        let loglik = loglik_at(&beta);
        return Ok(FitResult {
            beta_hat: beta,
            j: InfoMatrix { entries: j, scale: InfoScale::TotalObserved },
            eta_hat: eta_v,
            info,
            converged: true,
            loglik,
            iterations: 0,
        });
    }

    // information-weighted projection of η̂, then scoring steps with J as curvature
    let rhs = features
        .iter()
        .zip(eta_v.iter())
        .zip(&info)
        .fold(DVector::zeros(p), |acc, ((f, &e), &w)| acc + f * (w * e));
    let mut beta = jf.solve(&rhs);
    let mut l = loglik_at(&beta);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        let mut score = DVector::zeros(p);
        for (f, b) in features.iter().zip(buffers) {
            let m = f.dot(&beta);
            let s: f64 = b
                .y
                .iter()
                .enumerate()
                .map(|(k, &y)| err.log_density_derivative(1, &ErrorDraw { epsilon: y - m, ancillary: b.a.get(k).copied() }))
                .sum();
            score.axpy(s, f, 1.0);
        }
        let step = jf.solve(&score);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &beta + &step * t;
            let lt = loglik_at(&trial);
            if lt >= l {
                beta = trial;
                l = lt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        let size = step.amax() * t;
        if !moved || size <= 1e-11 * (1.0 + beta.amax()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Estimation("full-likelihood scoring did not converge".into()));
    }
    Ok(FitResult {
        beta_hat: beta,
        j: InfoMatrix { entries: j, scale: InfoScale::TotalObserved },
        eta_hat: eta_v,
        info,
        converged,
        loglik: l,
        iterations,
    })
}

/// log volume of {β : (β̂-β)ᵀJ(β̂-β) ≤ χ²_p quantile at 1-α}.
pub fn ellipsoid_log_volume(j: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    let p = j.nrows();
    let q = chi2_quantile(p as f64, 1.0 - alpha)?;
    let logdet = Spd::new(j)?.log_det();
    Ok(unit_ball_log_volume(p) + 0.5 * p as f64 * q.ln() - 0.5 * logdet)
}

/// χ²₁ test of cᵀβ = C₀ using the observed information.
pub fn chi2_test(fit: &FitResult, c: &DVector<f64>, c0: f64, alpha: f64) -> Result<TestResult> {
    if c.len() != fit.beta_hat.len() || c.iter().all(|&v| v == 0.0) {
        return Err(Error::Config("c must be a nonzero vector of length p".into()));
    }
    let jf = Spd::new(&fit.j.entries)?;
    let var = c.dot(&jf.solve(c));
    let diff = c.dot(&fit.beta_hat) - c0;
    let statistic = diff * diff / var;
    let critical = chi2_quantile(1.0, 1.0 - alpha)?;
    Ok(TestResult { statistic, reject: statistic >= critical, alpha, c_value: 1.0 / var, critical })
}
