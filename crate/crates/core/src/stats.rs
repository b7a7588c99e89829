//! Distribution helpers used by the inference layer.

use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Upper-tail quantile: the x with P(χ²_df ≤ x) = prob.
///
/// Starts from the library inverse and polishes with Newton steps on the CDF.
pub fn chi2_quantile(df: f64, prob: f64) -> Result<f64> {
    if !(df > 0.0) || !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Config(format!("chi-square quantile needs df > 0 and 0 < p < 1 (df {df}, p {prob})")));
    }
    let dist = ChiSquared::new(df).map_err(|e| Error::Config(e.to_string()))?;
    let mut x = dist.inverse_cdf(prob);
    for _ in 0..50 {
        let f = dist.cdf(x) - prob;
        let dens = dist.pdf(x);
        if !(dens > 0.0) {
            break;
        }
        let step = f / dens;
        let next = (x - step).max(0.5 * x);
        if (next - x).abs() <= 1e-15 * x.max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// log of the volume of the unit ball in p dimensions.
pub fn unit_ball_log_volume(p: usize) -> f64 {
    let h = 0.5 * p as f64;
    h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// P(χ²₁(λ) ≥ χ²₁ quantile at 1-α).
pub fn noncentral_chi2_1_power(lambda: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    // the χ²₁ critical value is the square of the two-sided normal quantile
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut q = z.inverse_cdf(1.0 - 0.5 * alpha);
    for _ in 0..3 {
        q += (normal_cdf(-q) - 0.5 * alpha) / z.pdf(q);
    }
    let r = lambda.max(0.0).sqrt();
    Ok(normal_cdf(r - q) + normal_cdf(-r - q))
}

/// Mean and standard error (sample sd / √n).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = crate::linalg::compensated_sum(xs.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss = crate::linalg::compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}
