//! Linear model families y = βᵀf(x) + ε and their finite candidate regions.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::eig_range;
use crate::{Error, Result};

/// Largest quadratic factor count before the 3^s grid is refused.
pub const QUADRATIC_MAX_S: usize = 11;

/// Gram matrices with eigenvalue ratio below this are declared singular.
const GRAM_RCOND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Treatment,
    Interaction,
    Quadratic,
    Custom,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Treatment => "treatment",
            ModelFamily::Interaction => "interaction",
            ModelFamily::Quadratic => "quadratic",
            ModelFamily::Custom => "custom",
        })
    }
}

/// JSON form of a custom model: candidate points plus monomial exponent lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CustomModel {
    #[serde(default)]
    pub name: Option<String>,
    pub candidates: Vec<Vec<f64>>,
    pub basis: Vec<Vec<u32>>,
}

/// Either a family name such as `quadratic:2` or an inline custom model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    Custom(CustomModel),
}

impl ModelRef {
    pub fn build(&self) -> Result<ModelSpec> {
        match self {
            ModelRef::Name(n) => ModelSpec::parse(n),
            ModelRef::Custom(c) => ModelSpec::custom(c),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    family: ModelFamily,
    s: usize,
    name: String,
    basis: Vec<Vec<u32>>,
    candidates: Vec<Vec<f64>>,
    features: Vec<DVector<f64>>,
}

impl ModelSpec {
    pub fn treatment(s: usize) -> Result<Self> {
        check_s(s)?;
        let basis = (0..s).map(|i| unit_exponent(s, i, 1)).collect();
        let candidates = (0..s)
            .map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::assemble(ModelFamily::Treatment, s, format!("treatment:{s}"), basis, candidates)
    }

    pub fn interaction(s: usize) -> Result<Self> {
        check_s(s)?;
        let mut basis = vec![vec![0; s]];
        basis.extend((0..s).map(|i| unit_exponent(s, i, 1)));
        basis.extend(pairs(s).map(|(i, j)| pair_exponent(s, i, j)));
        let mut candidates = vec![vec![0.0; s]];
        candidates.extend((0..s).map(|i| indicator(s, &[i])));
        candidates.extend(pairs(s).map(|(i, j)| indicator(s, &[i, j])));
        Self::assemble(ModelFamily::Interaction, s, format!("interaction:{s}"), basis, candidates)
    }

    pub fn quadratic(s: usize) -> Result<Self> {
        check_s(s)?;
        if s > QUADRATIC_MAX_S {
            return Err(Error::CandidateSetTooLarge(format!(
                "quadratic:{s} would need 3^{s} grid points; supply a custom model instead"
            )));
        }
        let mut basis = vec![vec![0; s]];
        basis.extend((0..s).map(|i| unit_exponent(s, i, 1)));
        basis.extend((0..s).map(|i| unit_exponent(s, i, 2)));
        basis.extend(pairs(s).map(|(i, j)| pair_exponent(s, i, j)));
        let levels = [0.0, 0.5, 1.0];
        let total = 3usize.pow(s as u32);
        let candidates = (0..total)
            .map(|mut code| {
                let mut x = vec![0.0; s];
                for xi in x.iter_mut().rev() {
                    *xi = levels[code % 3];
                    code /= 3;
                }
                x
            })
            .collect();
        Self::assemble(ModelFamily::Quadratic, s, format!("quadratic:{s}"), basis, candidates)
    }

    pub fn custom(def: &CustomModel) -> Result<Self> {
        let s = def
            .candidates
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidModel("custom model has no candidate points".into()))?;
        check_s(s)?;
        if def.candidates.iter().any(|x| x.len() != s) {
            return Err(Error::InvalidModel("candidate points differ in length".into()));
        }
        if def.candidates.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("candidate coordinates must be finite".into()));
        }
        if def.basis.is_empty() || def.basis.iter().any(|e| e.len() != s) {
            return Err(Error::InvalidModel(format!(
                "basis must be a non-empty list of exponent vectors of length {s}"
            )));
        }
        let name = def.name.clone().unwrap_or_else(|| "custom".into());
        Self::assemble(ModelFamily::Custom, s, name, def.basis.clone(), def.candidates.clone())
    }

    pub fn from_custom_json(text: &str) -> Result<Self> {
        let def: CustomModel = serde_json::from_str(text)
            .map_err(|e| Error::InvalidModel(format!("custom model JSON: {e}")))?;
        Self::custom(&def)
    }

    /// Parses `treatment:s`, `interaction:s` or `quadratic:s`.
    pub fn parse(name: &str) -> Result<Self> {
        let (fam, s) = name
            .split_once(':')
            .ok_or_else(|| Error::InvalidModel(format!("expected family:s, got `{name}`")))?;
        let s: usize = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidModel(format!("bad factor count in `{name}`")))?;
        match fam.trim().to_ascii_lowercase().as_str() {
            "treatment" => Self::treatment(s),
            "interaction" => Self::interaction(s),
            "quadratic" => Self::quadratic(s),
            other => Err(Error::InvalidModel(format!("unknown model family `{other}`"))),
        }
    }

    fn assemble(
        family: ModelFamily,
        s: usize,
        name: String,
        basis: Vec<Vec<u32>>,
        candidates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut sorted: Vec<&Vec<f64>> = candidates.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("candidate points are not distinct".into()));
        }
        let features: Vec<DVector<f64>> = candidates.iter().map(|x| monomials(&basis, x)).collect();
        let spec = ModelSpec { family, s, name, basis, candidates, features };
        let gram = spec.gram();
        let (lo, hi) = eig_range(&gram);
        if !(hi > 0.0 && lo > GRAM_RCOND * hi) {
            return Err(Error::InvalidModel(format!(
                "{}: candidate Gram matrix is singular (eigenvalues {lo:.3e}..{hi:.3e})",
                spec.name
            )));
        }
        Ok(spec)
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    /// Number of design factors.
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn p(&self) -> usize {
        self.basis.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.basis
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn candidate(&self, i: usize) -> &[f64] {
        &self.candidates[i]
    }

    /// f(x) for candidate `i`.
    pub fn feature(&self, i: usize) -> &DVector<f64> {
        &self.features[i]
    }

    pub fn features(&self) -> &[DVector<f64>] {
        &self.features
    }

    /// f(x) for an arbitrary factor vector.
    pub fn regression_map(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.s {
            return Err(Error::InvalidDimension(format!(
                "factor vector has length {}, model expects {}",
                x.len(),
                self.s
            )));
        }
        Ok(monomials(&self.basis, x))
    }

    /// Σ f(xᵢ)f(xᵢ)ᵀ over every candidate point.
    pub fn gram(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut g = DMatrix::zeros(p, p);
        for f in &self.features {
            g.syger(1.0, f, f, 1.0);
        }
        g
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn check_s(s: usize) -> Result<()> {
    if s == 0 {
        Err(Error::InvalidDimension("number of factors must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn pairs(s: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..s).flat_map(move |i| (i + 1..s).map(move |j| (i, j)))
}

fn unit_exponent(s: usize, i: usize, e: u32) -> Vec<u32> {
    let mut v = vec![0; s];
    v[i] = e;
    v
}

fn pair_exponent(s: usize, i: usize, j: usize) -> Vec<u32> {
    let mut v = vec![0; s];
    v[i] = 1;
    v[j] = 1;
    v
}

fn indicator(s: usize, on: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; s];
    for &i in on {
        v[i] = 1.0;
    }
    v
}

fn monomials(basis: &[Vec<u32>], x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        basis.len(),
        basis
            .iter()
            .map(|e| e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!(ModelSpec::parse("treatment:4").unwrap().p(), 4);
        assert_eq!(ModelSpec::parse("interaction:3").unwrap().p(), 7);
        assert_eq!(ModelSpec::parse("quadratic:2").unwrap().num_candidates(), 9);
        assert!(ModelSpec::parse("cubic:2").is_err());
        assert!(ModelSpec::parse("treatment").is_err());
    }

    #[test]
    fn duplicate_candidates_rejected() {
        let def = CustomModel {
            name: None,
            candidates: vec![vec![0.0], vec![1.0], vec![1.0]],
            basis: vec![vec![0], vec![1]],
        };
        assert!(matches!(ModelSpec::custom(&def), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn unidentifiable_custom_rejected() {
        let def = CustomModel {
            name: None,
            candidates: vec![vec![0.0], vec![1.0]],
            basis: vec![vec![0], vec![1], vec![2]],
        };
        assert!(ModelSpec::custom(&def).is_err());
    }
}
