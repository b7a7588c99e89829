//! Live-experiment session files: a fixed design plus the responses collected so far.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::{Criterion, Design};
use crate::error_models::ErrorModel;
use crate::inference::{chi2_test, ellipsoid_log_volume, fit_state, TestResult};
use crate::models::ModelRef;
use crate::road::{ExperimentState, Observation, RoadConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub model: ModelRef,
    pub criterion: String,
    pub error_model: String,
    pub fod: Design,
    #[serde(default)]
    pub road_config: RoadConfig,
    #[serde(default)]
    pub observations: Vec<Observation>,
}

impl SessionFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("session file: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("session file: {e}")))
    }

    /// Replays every observation into a fresh experiment state.
    pub fn replay(&self) -> Result<(ExperimentState, Criterion)> {
        let spec = self.model.build()?;
        let crit = Criterion::parse(&self.criterion)?;
        crit.check_dim(spec.p())?;
        let err = ErrorModel::parse(&self.error_model)?;
        let cfg = RoadConfig { total_n: None, ..self.road_config.clone() };
        let mut state = ExperimentState::new(&spec, &self.fod, err, cfg)?;
        for (k, obs) in self.observations.iter().enumerate() {
            if err.has_ancillary() != obs.a.is_some() {
                return Err(Error::DataShape(format!(
                    "observation {k}: {err} {} an ancillary `a`",
                    if err.has_ancillary() { "requires" } else { "takes no" }
                )));
            }
            state.record_response(obs.point, obs.y, obs.a).map_err(|e| match e {
                Error::DataShape(m) => Error::DataShape(format!("observation {k}: {m}")),
                other => other,
            })?;
        }
        Ok((state, crit))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Recommendation {
    /// 0-based index into the design support.
    pub point: usize,
    /// Index of that point in the model's candidate list.
    pub candidate: usize,
    pub factors: Vec<f64>,
    pub features: Vec<f64>,
    pub observations: usize,
    pub initialization: bool,
    pub omega: Vec<f64>,
    pub w_star: Vec<f64>,
    pub q: Vec<f64>,
    pub q_total: f64,
}

pub fn recommend(session: &SessionFile) -> Result<Recommendation> {
    let spec = session.model.build()?;
    let (state, crit) = session.replay()?;
    let initialization = state.in_initialization();
    let point = state.next_point(&crit)?;
    let candidate = state.support[point];
    Ok(Recommendation {
        point,
        candidate,
        factors: spec.candidate(candidate).to_vec(),
        features: state.features[point].iter().copied().collect(),
        observations: state.j(),
        initialization,
        omega: state.omega.clone(),
        w_star: state.w_star.clone(),
        q: state.q.clone(),
        q_total: state.q_total,
    })
}

/// Optional χ² test requested alongside a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRequest {
    pub c: Vec<f64>,
    pub c0: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionFit {
    pub beta_hat: Vec<f64>,
    pub j: Vec<Vec<f64>>,
    pub eta_hat: Vec<f64>,
    pub info: Vec<f64>,
    pub counts: Vec<usize>,
    pub alpha: f64,
    /// log volume of the 1-α confidence ellipsoid.
    pub log_volume: f64,
    pub psi_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestResult>,
}

pub fn fit_session(session: &SessionFile, alpha: f64, test: Option<&TestRequest>) -> Result<SessionFit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (state, crit) = session.replay()?;
    let fit = fit_state(&state)?;
    let j = &fit.j.entries;
    let test = match test {
        Some(t) => Some(chi2_test(&fit, &DVector::from_vec(t.c.clone()), t.c0, t.alpha)?),
        None => None,
    };
    Ok(SessionFit {
        beta_hat: fit.beta_hat.iter().copied().collect(),
        j: (0..j.nrows()).map(|i| j.row(i).iter().copied().collect()).collect(),
        eta_hat: fit.eta_hat.iter().copied().collect(),
        info: fit.info.clone(),
        counts: state.counts(),
        alpha,
        log_volume: ellipsoid_log_volume(j, alpha)?,
        psi_j: crit.value(j)?,
        test,
    })
}
