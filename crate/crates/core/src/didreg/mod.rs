//! Bayesian piecewise-linear difference-in-differences regression.
//!
//! A treated series and its synthetic control are stacked into one dataset
//! with time `t` in years since the window start. The mean is
//!
//! ```text
//! y = alpha + beta t + beta_post h(t) + beta_gpt_post d_gpt h(t)
//! ```
//!
//! where `h(t) = (t - t_event) d_post` in hinge mode (continuous at the
//! event) and `h(t) = t d_post` in as-printed mode. `beta_gpt_post` is the
//! extra post-event log10 slope of the treated word.

mod diagnostics;
mod io;
mod sampler;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::YearMonth;
use crate::syncontrol::event_index;

pub use diagnostics::{effective_sample_size, split_rhat};
pub use io::{read_paired_csv, write_draws_csv, PairedSeries};
pub use sampler::{
    annual_pct_change, sample_posterior, summarize, DidPosterior, DidSummary, ParamSummary,
    PriorSpec, SamplerConfig, PARAM_NAMES, RHAT_WARN,
};

/// Regressor layout for the post-event terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    /// `(t - t_event) d_post`.
    #[default]
    Hinge,
    /// `t d_post`.
    AsPrinted,
}

impl fmt::Display for DesignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignMode::Hinge => "hinge",
            DesignMode::AsPrinted => "as_printed",
        })
    }
}

impl FromStr for DesignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(DesignMode::Hinge),
            "as_printed" => Ok(DesignMode::AsPrinted),
            _ => Err(Error::InvalidInput(format!(
                "unknown design mode '{s}' (expected hinge or as_printed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub t: f64,
    pub d_post: bool,
    pub d_gpt: bool,
    pub y: f64,
}

/// Observations of both groups on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DidDataset {
    observations: Vec<Observation>,
    t_event: f64,
}

impl DidDataset {
    /// Validates that `d_post` marks exactly `t > t_event` and that both
    /// groups are present on the same time grid.
    pub fn from_observations(observations: Vec<Observation>, t_event: f64) -> Result<Self> {
        if !t_event.is_finite() {
            return Err(Error::NonFinite("t_event".into()));
        }
        if let Some(o) = observations
            .iter()
            .find(|o| !o.t.is_finite() || !o.y.is_finite())
        {
            return Err(Error::NonFinite(format!("observation at t = {}", o.t)));
        }
        if let Some(o) = observations.iter().find(|o| o.d_post != (o.t > t_event)) {
            return Err(Error::InvalidInput(format!(
                "d_post = {} at t = {} with t_event = {t_event}",
                o.d_post, o.t
            )));
        }
        let grid = |g: bool| {
            let mut ts: Vec<f64> = observations
                .iter()
                .filter(|o| o.d_gpt == g)
                .map(|o| o.t)
                .collect();
            ts.sort_by(f64::total_cmp);
            ts
        };
        let (treated, control) = (grid(true), grid(false));
        if treated.is_empty() || control.is_empty() {
            return Err(Error::InvalidInput(
                "both treated and control observations are required".into(),
            ));
        }
        if treated != control {
            return Err(Error::DimensionMismatch(
                "treated and control observations are on different time grids".into(),
            ));
        }
        Ok(DidDataset {
            observations,
            t_event,
        })
    }

    /// Stacks a treated and a control series over `window`, treated first.
    /// `t` counts years from the window start; the event month is pre.
    pub fn from_paired(paired: &PairedSeries, event: YearMonth) -> Result<Self> {
        let window = paired.window;
        if paired.treated.len() != window.len() || paired.control.len() != window.len() {
            return Err(Error::DimensionMismatch(format!(
                "paired series have {} / {} months, window has {}",
                paired.treated.len(),
                paired.control.len(),
                window.len()
            )));
        }
        let idx = event_index(window, event)?;
        let t_event = idx as f64 / 12.0;
        let mut obs = Vec::with_capacity(2 * window.len());
        for (d_gpt, ys) in [(true, &paired.treated), (false, &paired.control)] {
            for (i, &y) in ys.iter().enumerate() {
                obs.push(Observation {
                    t: i as f64 / 12.0,
                    d_post: i > idx,
                    d_gpt,
                    y,
                });
            }
        }
        DidDataset::from_observations(obs, t_event)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn t_event(&self) -> f64 {
        self.t_event
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Multiplies every time value by `k` (a change of time unit).
    pub fn rescale_time(&self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time scale must be positive, got {k}"
            )));
        }
        let obs = self
            .observations
            .iter()
            .map(|o| Observation { t: o.t * k, ..*o })
            .collect();
        DidDataset::from_observations(obs, self.t_event * k)
    }

    /// Exchanges the treated and control labels.
    pub fn swap_groups(&self) -> Self {
        DidDataset {
            observations: self
                .observations
                .iter()
                .map(|o| Observation {
                    d_gpt: !o.d_gpt,
                    ..*o
                })
                .collect(),
            t_event: self.t_event,
        }
    }
}

/// Regressor row `[1, t, post, d_gpt * post]`.
pub fn design_row(o: &Observation, t_event: f64, mode: DesignMode) -> [f64; 4] {
    let post = match (o.d_post, mode) {
        (false, _) => 0.0,
        (true, DesignMode::Hinge) => o.t - t_event,
        (true, DesignMode::AsPrinted) => o.t,
    };
    let gpt = if o.d_gpt { post } else { 0.0 };
    [1.0, o.t, post, gpt]
}

/// Mean of the model at one time point for coefficients
/// `[alpha, beta, beta_post, beta_gpt_post]`.
pub fn fitted_mean(coef: &[f64; 4], t: f64, t_event: f64, d_gpt: bool, mode: DesignMode) -> f64 {
    let o = Observation {
        t,
        d_post: t > t_event,
        d_gpt,
        y: 0.0,
    };
    let row = design_row(&o, t_event, mode);
    row.iter().zip(coef).map(|(x, b)| x * b).sum()
}

/// A dataset with its design matrix and response.
#[derive(Debug, Clone)]
pub struct Design {
    pub dataset: DidDataset,
    pub mode: DesignMode,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

pub fn build_design(dataset: DidDataset, mode: DesignMode) -> Design {
    let n = dataset.len();
    let mut x = DMatrix::zeros(n, 4);
    for (i, o) in dataset.observations.iter().enumerate() {
        for (j, v) in design_row(o, dataset.t_event, mode).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let y = DVector::from_iterator(n, dataset.observations.iter().map(|o| o.y));
    Design {
        dataset,
        mode,
        x,
        y,
    }
}

/// Builds the design straight from paired monthly series.
pub fn build_paired_design(
    paired: &PairedSeries,
    event: YearMonth,
    mode: DesignMode,
) -> Result<Design> {
    Ok(build_design(DidDataset::from_paired(paired, event)?, mode))
}
