//! Location MLE and observed information for the responses at one support point.
//!
//! The estimate is a pure function of the multiset of observations: data are
//! sorted and centred at their median before solving, so buffer order and a
//! common shift of all responses do not change the residual configuration.

use crate::error_models::{ErrorDraw, ErrorModel};
use crate::{Error, Result};

/// Grid size for the Student-t mode scan on small buffers.
pub const SCAN_POINTS: usize = 200;
/// Student-t buffers up to this size get the mode scan.
pub const SCAN_MAX_N: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointFit {
    pub eta_hat: f64,
    /// i_a = -Σ l̈(yⱼ - η̂), clamped at zero.
    pub info: f64,
}

fn check_shape(err: &ErrorModel, y: &[f64], a: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::DataShape("no observations at this support point".into()));
    }
    if err.has_ancillary() {
        if a.len() != y.len() {
            return Err(Error::DataShape(format!("{} responses but {} ancillaries", y.len(), a.len())));
        }
        if a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::DataShape("ancillaries must be positive and finite".into()));
        }
    } else if !a.is_empty() {
        return Err(Error::DataShape(format!("{err} observations take no ancillary")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DataShape("responses must be finite".into()));
    }
    Ok(())
}

fn draw(err: &ErrorModel, eps: f64, a: f64) -> ErrorDraw {
    ErrorDraw { epsilon: eps, ancillary: if err.has_ancillary() { Some(a) } else { None } }
}

/// Σⱼ l(yⱼ - η) up to an η-free constant.
pub fn point_loglik(err: &ErrorModel, y: &[f64], a: &[f64], eta: f64) -> f64 {
    y.iter()
        .enumerate()
        .map(|(j, &yj)| err.log_kernel(&draw(err, yj - eta, a.get(j).copied().unwrap_or(1.0))))
        .sum()
}

/// -Σⱼ l̈(yⱼ - η).
pub fn observed_info(err: &ErrorModel, y: &[f64], a: &[f64], eta: f64) -> f64 {
    y.iter()
        .enumerate()
        .map(|(j, &yj)| err.observed_info(&draw(err, yj - eta, a.get(j).copied().unwrap_or(1.0))))
        .sum()
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn location_mle(err: &ErrorModel, y: &[f64], a: &[f64]) -> Result<PointFit> {
    check_shape(err, y, a)?;
    let mut pairs: Vec<(f64, f64)> =
        y.iter().enumerate().map(|(j, &v)| (v, a.get(j).copied().unwrap_or(1.0))).collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(p.1.partial_cmp(&q.1).unwrap()));
    let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let centre = median_sorted(&ys);
    let u: Vec<f64> = ys.iter().map(|v| v - centre).collect();
    let av: Vec<f64> = if err.has_ancillary() { pairs.iter().map(|p| p.1).collect() } else { Vec::new() };

    let eta_u = match *err {
        ErrorModel::Normal => u.iter().sum::<f64>() / u.len() as f64,
        ErrorModel::GammaHyperbola { .. } => {
            // score Σ 2a sinh(u - η) = 0 has the closed form below
            let up = log_sum_exp(u.iter().zip(&av).map(|(x, a)| a.ln() + x));
            let dn = log_sum_exp(u.iter().zip(&av).map(|(x, a)| a.ln() - x));
            0.5 * (up - dn)
        }
        ErrorModel::StudentT { v } => student_mode(v, &u)?,
    };
    let info = observed_info(err, &u, &av, eta_u).max(0.0);
    Ok(PointFit { eta_hat: centre + eta_u, info })
}

/// Score and its η-derivative for Student-t residuals.
fn t_score(v: f64, u: &[f64], eta: f64) -> (f64, f64) {
    let mut s = 0.0;
    let mut ds = 0.0;
    for &x in u {
        let e = x - eta;
        let d = v + e * e;
        s += (v + 1.0) * e / d;
        ds -= (v + 1.0) * (v - e * e) / (d * d);
    }
    (s, ds)
}

fn t_loglik(v: f64, u: &[f64], eta: f64) -> f64 {
    u.iter().map(|&x| -0.5 * (v + 1.0) * ((x - eta) * (x - eta) / v).ln_1p()).sum()
}

fn student_mode(v: f64, u: &[f64]) -> Result<f64> {
    let (lo, hi) = (u[0], u[u.len() - 1]);
    if hi - lo <= 0.0 {
        return Ok(lo);
    }
    let mut start = 0.0;
    let mut bracket = (lo, hi);
    if u.len() <= SCAN_MAX_N {
        let h = (hi - lo) / (SCAN_POINTS - 1) as f64;
        let grid = |k: usize| if k + 1 == SCAN_POINTS { hi } else { lo + h * k as f64 };
        let mut best = (0usize, f64::NEG_INFINITY);
        for k in 0..SCAN_POINTS {
            let l = t_loglik(v, u, grid(k));
            let tie = (l - best.1).abs() <= 1e-12 * (1.0 + best.1.abs());
            if (tie && grid(k).abs() < grid(best.0).abs()) || (!tie && l > best.1) {
                best = (k, l);
            }
        }
        start = grid(best.0);
        let left = grid(best.0.saturating_sub(1));
        let right = grid((best.0 + 1).min(SCAN_POINTS - 1));
        if t_score(v, u, left).0 >= 0.0 && t_score(v, u, right).0 <= 0.0 {
            bracket = (left, right);
        }
    }
    safeguarded_newton(|x| t_score(v, u, x), bracket, start)
}

/// Newton on a decreasing score with bisection fallback. Requires
/// score(lo) ≥ 0 ≥ score(hi), so the limit is a local maximum.
pub fn safeguarded_newton<F: Fn(f64) -> (f64, f64)>(score: F, bracket: (f64, f64), x0: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let mut x = x0.clamp(lo, hi);
    for _ in 0..300 {
        let (s, ds) = score(x);
        if !s.is_finite() {
            return Err(Error::Estimation(format!("score is not finite at {x}")));
        }
        if s == 0.0 {
            return Ok(x);
        }
        if s > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if ds < 0.0 { x - s / ds } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let tol = 4.0 * f64::EPSILON * (1.0 + next.abs());
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Estimation(format!("location solver did not converge in [{lo}, {hi}]")))
}
