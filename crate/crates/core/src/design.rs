//! Designs, information matrices, optimality criteria and sensitivities.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::Spd;
use crate::models::ModelSpec;
use crate::{Error, Result};

/// Tolerance on the sum of continuous weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Continuous design: support indices into the candidate list, weights summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Exact design: counts summing to n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactDesign {
    pub support: Vec<usize>,
    pub counts: Vec<usize>,
}

impl ExactDesign {
    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_continuous(&self) -> Design {
        let n = self.n() as f64;
        Design {
            support: self.support.clone(),
            weights: self.counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }
}

impl Design {
    pub fn uniform(support: Vec<usize>) -> Self {
        let w = 1.0 / support.len() as f64;
        let weights = vec![w; support.len()];
        Design { support, weights }
    }

    pub fn d(&self) -> usize {
        self.support.len()
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.weights.len() {
            return Err(Error::InvalidDesign(format!(
                "{} support points but {} weights",
                self.support.len(),
                self.weights.len()
            )));
        }
        if let Some(&i) = self.support.iter().find(|&&i| i >= spec.num_candidates()) {
            return Err(Error::InvalidDesign(format!(
                "support index {i} out of range for {} candidates",
                spec.num_candidates()
            )));
        }
        let mut s = self.support.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDesign("support indices are not distinct".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDesign("weights must be finite and nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDesign(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoScale {
    /// Per-observation expected information, M = FᵀWF.
    Normalized,
    /// Total observed information, J = FᵀI_A F.
    TotalObserved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoMatrix {
    pub entries: DMatrix<f64>,
    pub scale: InfoScale,
}

/// Σ wᵢ f(xᵢ)f(xᵢ)ᵀ over arbitrary feature vectors.
pub fn weighted_gram<'a, I>(p: usize, terms: I) -> DMatrix<f64>
where
    I: IntoIterator<Item = (&'a DVector<f64>, f64)>,
{
    let mut m = DMatrix::zeros(p, p);
    for (f, w) in terms {
        if w != 0.0 {
            m.syger(w, f, f, 1.0);
        }
    }
    m.fill_upper_triangle_with_lower_triangle();
    m
}

pub fn info_matrix(spec: &ModelSpec, design: &Design) -> InfoMatrix {
    let entries = weighted_gram(
        spec.p(),
        design.support.iter().zip(&design.weights).map(|(&i, &w)| (spec.feature(i), w)),
    );
    InfoMatrix { entries, scale: InfoScale::Normalized }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Criterion {
    D,
    A,
    C(DVector<f64>),
}

impl Criterion {
    /// Parses `D`, `A` or `c:[v1,...,vp]`.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        match name {
            "D" | "d" => return Ok(Criterion::D),
            "A" | "a" => return Ok(Criterion::A),
            _ => {}
        }
        let body = name
            .strip_prefix("c:")
            .or_else(|| name.strip_prefix("C:"))
            .ok_or_else(|| Error::InvalidCriterion(format!("unknown criterion `{name}`")))?;
        let body = body.trim().trim_start_matches('[').trim_end_matches(']');
        let c: Vec<f64> = body
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidCriterion(format!("bad c-vector in `{name}`")))?;
        Self::c(c)
    }

    pub fn c(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().all(|&v| v == 0.0) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCriterion("c-vector must be finite and nonzero".into()));
        }
        Ok(Criterion::C(DVector::from_vec(c)))
    }

    pub fn check_dim(&self, p: usize) -> Result<()> {
        match self {
            Criterion::C(c) if c.len() != p => Err(Error::InvalidCriterion(format!(
                "c-vector has length {}, model has p = {p}",
                c.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Criterion::D => "D",
            Criterion::A => "A",
            Criterion::C(_) => "c",
        }
    }

    /// Ψ(M): det^{1/p}, 1/tr(M⁻¹) or 1/(cᵀM⁻¹c).
    pub fn value(&self, m: &DMatrix<f64>) -> Result<f64> {
        self.check_dim(m.nrows())?;
        match self {
            Criterion::D => {
                let p = m.nrows() as f64;
                match Spd::new(m) {
                    Ok(f) => Ok((f.log_det() / p).exp()),
                    Err(_) => Ok(m.determinant().max(0.0).powf(1.0 / p)),
                }
            }
            Criterion::A => Ok(1.0 / Spd::new(m)?.inverse().trace()),
            Criterion::C(c) => {
                let f = Spd::new(m)?;
                Ok(1.0 / c.dot(&f.solve(c)))
            }
        }
    }

    pub fn value_of(&self, m: &InfoMatrix) -> Result<f64> {
        self.value(&m.entries)
    }

    /// D on the |M|^{1/2} scale used for reporting; identical to `value` for A and c.
    pub fn report_value(&self, m: &DMatrix<f64>) -> Result<f64> {
        match self {
            Criterion::D => Ok((0.5 * Spd::new(m)?.log_det()).exp()),
            _ => self.value(m),
        }
    }

    /// Precomputes what is needed to evaluate φ(x, ξ) for many x.
    pub fn sensitivity_kernel(&self, m: &DMatrix<f64>) -> Result<SensitivityKernel> {
        self.check_dim(m.nrows())?;
        let minv = Spd::new(m)?.inverse();
        let p = m.nrows() as f64;
        Ok(match self {
            Criterion::D => {
                let psi = 1.0 / self.value(m)?;
                SensitivityKernel::D { minv, psi, p }
            }
            Criterion::A => {
                let m2 = &minv * &minv;
                let tr = minv.trace();
                SensitivityKernel::A { m2, tr }
            }
            Criterion::C(c) => {
                let u = &minv * c;
                let q = c.dot(&u);
                SensitivityKernel::C { u, q }
            }
        })
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::D => f.write_str("D"),
            Criterion::A => f.write_str("A"),
            Criterion::C(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "c:[{}]", parts.join(","))
            }
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Directional derivative of ψ = 1/Ψ toward δ_x, with the inverse already formed.
pub enum SensitivityKernel {
    D { minv: DMatrix<f64>, psi: f64, p: f64 },
    A { m2: DMatrix<f64>, tr: f64 },
    C { u: DVector<f64>, q: f64 },
}

impl SensitivityKernel {
    pub fn phi(&self, f: &DVector<f64>) -> f64 {
        match self {
            SensitivityKernel::D { minv, psi, p } => psi / p * (p - quad_form(minv, f)),
            SensitivityKernel::A { m2, tr } => tr - quad_form(m2, f),
            SensitivityKernel::C { u, q } => {
                let t = f.dot(u);
                q - t * t
            }
        }
    }
}

fn quad_form(m: &DMatrix<f64>, f: &DVector<f64>) -> f64 {
    let n = f.len();
    let mut s = 0.0;
    for j in 0..n {
        let fj = f[j];
        if fj == 0.0 {
            continue;
        }
        let mut t = 0.0;
        for i in 0..n {
            t += m[(i, j)] * f[i];
        }
        s += t * fj;
    }
    s
}

/// φ(x, ξ) for candidate `x`.
pub fn sensitivity(crit: &Criterion, spec: &ModelSpec, design: &Design, x: usize) -> Result<f64> {
    let m = info_matrix(spec, design);
    Ok(crit.sensitivity_kernel(&m.entries)?.phi(spec.feature(x)))
}

/// φ(x, ξ) for every candidate point.
pub fn sensitivities(crit: &Criterion, spec: &ModelSpec, design: &Design) -> Result<Vec<f64>> {
    let m = info_matrix(spec, design);
    let k = crit.sensitivity_kernel(&m.entries)?;
    Ok(spec.features().iter().map(|f| k.phi(f)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub optimal: bool,
    /// Minimum of φ over the candidates (negative when the design can improve).
    pub worst_violation: f64,
    pub worst_point: usize,
}

pub fn get_certificate(crit: &Criterion, spec: &ModelSpec, design: &Design, tol: f64) -> Result<Certificate> {
    let phi = sensitivities(crit, spec, design)?;
    let (worst_point, worst_violation) = argmin(&phi);
    Ok(Certificate { optimal: worst_violation >= -tol, worst_violation, worst_point })
}

/// Index and value of the minimum; ties go to the lowest index.
pub fn argmin(v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}
