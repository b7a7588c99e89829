//! Location-family error distributions.
//!
//! All derivatives are taken with respect to the location η of a single
//! observation y = η + ε, so the k-th derivative picks up a factor (-1)^k
//! relative to the derivative of the log density in ε.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Absolute tolerance for moment quadrature.
pub const MOMENT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorModel {
    Normal,
    StudentT { v: f64 },
    /// Fisher's gamma hyperbola: joint density ∝ a^{2v-1} exp(-2a cosh ε).
    GammaHyperbola { v: f64 },
}

/// One residual draw; `ancillary` carries the hyperbola's a.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorDraw {
    pub epsilon: f64,
    pub ancillary: Option<f64>,
}

impl ErrorDraw {
    pub fn plain(epsilon: f64) -> Self {
        ErrorDraw { epsilon, ancillary: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMoments {
    /// Expected information per observation, -E[l̈].
    pub mu: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub gamma_sq: f64,
    pub nu20: f64,
    pub nu11: f64,
    pub nu02: f64,
}

impl ErrorModel {
    pub fn student_t(v: f64) -> Result<Self> {
        check_shape(v)?;
        Ok(ErrorModel::StudentT { v })
    }

    pub fn gamma_hyperbola(v: f64) -> Result<Self> {
        check_shape(v)?;
        Ok(ErrorModel::GammaHyperbola { v })
    }

    /// Parses `normal`, `str:v` or `ghr:v`.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        if name.eq_ignore_ascii_case("normal") {
            return Ok(ErrorModel::Normal);
        }
        let (fam, v) = name
            .split_once(':')
            .ok_or_else(|| Error::InvalidErrorModel(format!("unknown error model `{name}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidErrorModel(format!("bad shape in `{name}`")))?;
        match fam.trim().to_ascii_lowercase().as_str() {
            "str" => Self::student_t(v),
            "ghr" => Self::gamma_hyperbola(v),
            other => Err(Error::InvalidErrorModel(format!("unknown error family `{other}`"))),
        }
    }

    pub fn has_ancillary(&self) -> bool {
        matches!(self, ErrorModel::GammaHyperbola { .. })
    }

    pub fn shape(&self) -> Option<f64> {
        match *self {
            ErrorModel::Normal => None,
            ErrorModel::StudentT { v } | ErrorModel::GammaHyperbola { v } => Some(v),
        }
    }

    /// Checks that the ancillary is present exactly when the model needs it.
    pub fn check_draw(&self, draw: &ErrorDraw) -> Result<()> {
        match (self.has_ancillary(), draw.ancillary) {
            (true, Some(a)) if a > 0.0 && a.is_finite() => Ok(()),
            (true, Some(a)) => Err(Error::DataShape(format!("ancillary must be positive, got {a}"))),
            (true, None) => Err(Error::DataShape(format!("{self} observations need an ancillary a"))),
            (false, Some(_)) => Err(Error::DataShape(format!("{self} observations take no ancillary"))),
            (false, None) => Ok(()),
        }
    }

    /// Full log density of the draw (joint in (ε, a) for the hyperbola).
    pub fn log_density(&self, draw: &ErrorDraw) -> f64 {
        let e = draw.epsilon;
        match *self {
            ErrorModel::Normal => -0.5 * e * e - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            ErrorModel::StudentT { v } => t_log_norm(v) - 0.5 * (v + 1.0) * (e * e / v).ln_1p(),
            ErrorModel::GammaHyperbola { v } => {
                let a = draw.ancillary.unwrap_or(f64::NAN);
                std::f64::consts::LN_2 - 2.0 * ln_gamma(v) + (2.0 * v - 1.0) * a.ln()
                    - 2.0 * a * e.cosh()
            }
        }
    }

    /// The η-dependent part of the log likelihood of one observation.
    pub fn log_kernel(&self, draw: &ErrorDraw) -> f64 {
        let e = draw.epsilon;
        match *self {
            ErrorModel::Normal => -0.5 * e * e,
            ErrorModel::StudentT { v } => -0.5 * (v + 1.0) * (e * e / v).ln_1p(),
            ErrorModel::GammaHyperbola { .. } => -2.0 * draw.ancillary.unwrap_or(f64::NAN) * e.cosh(),
        }
    }

    /// k-th derivative (k = 1..=5) of the log likelihood with respect to η.
    pub fn log_density_derivative(&self, k: u32, draw: &ErrorDraw) -> f64 {
        assert!((1..=5).contains(&k), "derivative order must be 1..=5");
        let e = draw.epsilon;
        match *self {
            ErrorModel::Normal => match k {
                1 => e,
                2 => -1.0,
                _ => 0.0,
            },
            ErrorModel::StudentT { v } => {
                let n = v + 1.0;
                let d = v + e * e;
                let e2 = e * e;
                // derivatives of g(ε) = -(v+1)/2 log(1 + ε²/v)
                let g = match k {
                    1 => -n * e / d,
                    2 => -n * (v - e2) / (d * d),
                    3 => 2.0 * n * e * (3.0 * v - e2) / d.powi(3),
                    4 => 6.0 * n * (v * v - 6.0 * v * e2 + e2 * e2) / d.powi(4),
                    _ => -24.0 * n * e * (e2 * e2 - 10.0 * v * e2 + 5.0 * v * v) / d.powi(5),
                };
                if k % 2 == 1 {
                    -g
                } else {
                    g
                }
            }
            ErrorModel::GammaHyperbola { .. } => {
                let a = draw.ancillary.unwrap_or(f64::NAN);
                if k % 2 == 1 {
                    2.0 * a * e.sinh()
                } else {
                    -2.0 * a * e.cosh()
                }
            }
        }
    }

    /// Observed information contributed by one draw, -l̈.
    pub fn observed_info(&self, draw: &ErrorDraw) -> f64 {
        -self.log_density_derivative(2, draw)
    }

    /// Moments and curvature, computed once per (family, shape) and cached.
    pub fn moments(&self) -> Result<ErrorMoments> {
        static CACHE: OnceLock<Mutex<HashMap<(u8, u64), ErrorMoments>>> = OnceLock::new();
        let key = match *self {
            ErrorModel::Normal => (0, 0),
            ErrorModel::StudentT { v } => (1, v.to_bits()),
            ErrorModel::GammaHyperbola { v } => (2, v.to_bits()),
        };
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(m) = cache.lock().unwrap().get(&key) {
            return Ok(*m);
        }
        let m = self.compute_moments()?;
        cache.lock().unwrap().insert(key, m);
        Ok(m)
    }

    fn compute_moments(&self) -> Result<ErrorMoments> {
        match *self {
            ErrorModel::Normal => Ok(ErrorMoments {
                mu: 1.0,
                mu3: 0.0,
                mu4: 0.0,
                gamma_sq: 0.0,
                nu20: 1.0,
                nu11: 0.0,
                nu02: 0.0,
            }),
            ErrorModel::StudentT { v } => {
                let norm = t_log_norm(v);
                let dens = move |e: f64| (norm - 0.5 * (v + 1.0) * (e * e / v).ln_1p()).exp();
                let model = *self;
                let expect = |k: &dyn Fn(&ErrorDraw) -> f64, what: &str| {
                    integrate_real_line(|e| dens(e) * k(&ErrorDraw::plain(e)), MOMENT_TOL)
                        .map_err(|err| Error::MomentComputation(format!("{model} {what}: {err}")))
                };
                let d = |k: u32| move |x: &ErrorDraw| model.log_density_derivative(k, x);
                let total = expect(&|_| 1.0, "normalisation")?;
                let e1 = expect(&d(1), "E[l']")?;
                let e2 = expect(&d(2), "E[l'']")?;
                let e3 = expect(&d(3), "E[l''']")?;
                let e4 = expect(&d(4), "E[l'''']")?;
                let e11 = expect(&|x| d(1)(x).powi(2), "E[l'^2]")?;
                let e12 = expect(&|x| d(1)(x) * d(2)(x), "E[l' l'']")?;
                let e22 = expect(&|x| d(2)(x).powi(2), "E[l''^2]")?;
                finish_moments(*self, total, e1, e2, e3, e4, e11, e12, e22)
            }
            ErrorModel::GammaHyperbola { v } => {
                // E[a^m g(ε)] with the a-integral done in closed form:
                // ∫ a^{2v-1+m} e^{-2a cosh ε} da = Γ(2v+m) (2 cosh ε)^{-(2v+m)}.
                let lead = std::f64::consts::LN_2 - 2.0 * ln_gamma(v);
                let model = *self;
                let expect = |m: f64, g: &dyn Fn(f64) -> f64, what: &str| {
                    let c = lead + ln_gamma(2.0 * v + m);
                    integrate_real_line(
                        |e| {
                            let l2c = e.abs() + (-2.0 * e.abs()).exp().ln_1p();
                            g(e) * (c - 2.0 * v * l2c).exp()
                        },
                        MOMENT_TOL,
                    )
                    .map_err(|err| Error::MomentComputation(format!("{model} {what}: {err}")))
                };
                // g carries the m cosh/sinh factors, each divided by 2 cosh ε.
                let total = expect(0.0, &|_| 1.0, "normalisation")?;
                let e1 = 2.0 * expect(1.0, &|e| 0.5 * e.tanh(), "E[l']")?;
                let e2 = -2.0 * expect(1.0, &|_| 0.5, "E[l'']")?;
                let e3 = e1;
                let e4 = e2;
                let e11 = 4.0 * expect(2.0, &|e| 0.25 * e.tanh().powi(2), "E[l'^2]")?;
                let e12 = -4.0 * expect(2.0, &|e| 0.25 * e.tanh(), "E[l' l'']")?;
                let e22 = 4.0 * expect(2.0, &|_| 0.25, "E[l''^2]")?;
                finish_moments(*self, total, e1, e2, e3, e4, e11, e12, e22)
            }
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> ErrorDraw {
        match *self {
            ErrorModel::Normal => ErrorDraw::plain(StandardNormal.sample(rng)),
            ErrorModel::StudentT { v } => {
                ErrorDraw::plain(StudentT::new(v).expect("validated shape").sample(rng))
            }
            ErrorModel::GammaHyperbola { v } => {
                let g = Gamma::new(v, 1.0).expect("validated shape");
                loop {
                    let z1: f64 = g.sample(rng);
                    let z2: f64 = g.sample(rng);
                    if z1 > 0.0 && z2 > 0.0 {
                        return ErrorDraw {
                            epsilon: 0.5 * (z1 / z2).ln(),
                            ancillary: Some((z1 * z2).sqrt()),
                        };
                    }
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<ErrorDraw> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

impl fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorModel::Normal => write!(f, "normal"),
            ErrorModel::StudentT { v } => write!(f, "str:{v}"),
            ErrorModel::GammaHyperbola { v } => write!(f, "ghr:{v}"),
        }
    }
}

impl std::str::FromStr for ErrorModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn check_shape(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidErrorModel(format!("shape must be positive and finite, got {v}")))
    }
}

fn t_log_norm(v: f64) -> f64 {
    ln_gamma(0.5 * (v + 1.0)) - ln_gamma(0.5 * v) - 0.5 * (v * std::f64::consts::PI).ln()
}

#[allow(clippy::too_many_arguments)]
fn finish_moments(
    model: ErrorModel,
    total: f64,
    e1: f64,
    e2: f64,
    e3: f64,
    e4: f64,
    e11: f64,
    e12: f64,
    e22: f64,
) -> Result<ErrorMoments> {
    let mu = -e2;
    let check = 1e-7;
    if (total - 1.0).abs() > check || e1.abs() > check || (e11 - mu).abs() > check * mu.max(1.0) {
        return Err(Error::MomentComputation(format!(
            "{model}: quadrature identities failed (mass {total}, E[l'] {e1}, E[l'^2] {e11} vs mu {mu})"
        )));
    }
    let nu20 = e11;
    let nu11 = e12 - e1 * e2;
    let nu02 = e22 - e2 * e2;
    let gamma_sq = ((nu20 * nu02 - nu11 * nu11) / nu20.powi(3)).max(0.0);
    Ok(ErrorMoments { mu, mu3: e3, mu4: e4, gamma_sq, nu20, nu11, nu02 })
}

/// ∫ f over the real line via x = t/(1-t²) and double-exponential quadrature.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> std::result::Result<f64, String> {
    let g = |t: f64| {
        let d = 1.0 - t * t;
        if d <= 0.0 {
            return 0.0;
        }
        let x = t / d;
        f(x) * (1.0 + t * t) / (d * d)
    };
    let lo = quadrature::integrate(g, -1.0, 0.0, 0.5 * tol);
    let hi = quadrature::integrate(g, 0.0, 1.0, 0.5 * tol);
    let err = lo.error_estimate + hi.error_estimate;
    let val = lo.integral + hi.integral;
    if !val.is_finite() || err > 100.0 * tol {
        return Err(format!("integral {val} with error estimate {err:.3e}"));
    }
    Ok(val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for name in ["normal", "str:1", "str:0.5", "ghr:0.25"] {
            assert_eq!(ErrorModel::parse(name).unwrap().to_string(), name);
        }
        assert!(ErrorModel::parse("str:-1").is_err());
        assert!(ErrorModel::parse("laplace:1").is_err());
    }

    #[test]
    fn draw_shape_checks() {
        let g = ErrorModel::gamma_hyperbola(1.0).unwrap();
        assert!(g.check_draw(&ErrorDraw::plain(0.1)).is_err());
        assert!(ErrorModel::Normal.check_draw(&ErrorDraw { epsilon: 0.0, ancillary: Some(1.0) }).is_err());
    }
}
