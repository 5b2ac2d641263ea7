use nalgebra::DMatrix;
use serde::Serialize;

use super::donors::DonorPool;
use super::solver::fit_simplex;
use crate::error::{Error, Result};
use crate::month::{MonthWindow, YearMonth};

/// Below this pre-period MSPE the ratio is reported as undefined.
pub const MSPE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MspeSummary {
    pub pre_mspe: f64,
    pub post_mspe: f64,
    /// `post_mspe / pre_mspe`; `None` when `pre_mspe < MSPE_FLOOR`.
    pub ratio: Option<f64>,
}

/// Simplex weights over donors (months x donors) fit to the treated series.
pub fn fit_weights(treated_pre: &[f64], donors_pre: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(fit_simplex(treated_pre, donors_pre)?.weights)
}

/// Index of the last pre-period month. The event month is pre; there must be
/// at least two pre months and one post month.
pub fn event_index(window: MonthWindow, event: YearMonth) -> Result<usize> {
    match window.index_of(event) {
        Some(i) if i >= 1 && i + 1 < window.len() => Ok(i),
        _ => Err(Error::InvalidInput(format!(
            "event month {event} must leave two pre months and one post month in {}..{}",
            window.start, window.end
        ))),
    }
}

/// Pre MSPE over `..=event_index`, post MSPE over the rest.
pub fn mspe_ratio(treated: &[f64], synthetic: &[f64], event_index: usize) -> Result<MspeSummary> {
    if treated.len() != synthetic.len() {
        return Err(Error::DimensionMismatch(format!(
            "treated has {} months, synthetic has {}",
            treated.len(),
            synthetic.len()
        )));
    }
    if event_index + 1 >= treated.len() {
        return Err(Error::InvalidInput(
            "event leaves no post-period months".into(),
        ));
    }
    let sq = |t: usize| (treated[t] - synthetic[t]).powi(2);
    let n_pre = event_index + 1;
    let n_post = treated.len() - n_pre;
    let pre_mspe = (0..n_pre).map(sq).sum::<f64>() / n_pre as f64;
    let post_mspe = (n_pre..treated.len()).map(sq).sum::<f64>() / n_post as f64;
    let ratio = (pre_mspe >= MSPE_FLOOR).then(|| post_mspe / pre_mspe);
    Ok(MspeSummary {
        pre_mspe,
        post_mspe,
        ratio,
    })
}

/// A fitted synthetic control for one treated series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticFit {
    pub treated_word: String,
    pub window: MonthWindow,
    pub event: YearMonth,
    pub donors: Vec<String>,
    pub weights: Vec<f64>,
    pub treated: Vec<f64>,
    pub synthetic: Vec<f64>,
    #[serde(flatten)]
    pub mspe: MspeSummary,
}

/// Fits on months `..=event_index` and projects over the full series.
pub(crate) fn synthesize_values(
    treated: &[f64],
    donors: &[&[f64]],
    event_index: usize,
) -> Result<(Vec<f64>, Vec<f64>, MspeSummary)> {
    let n_pre = event_index + 1;
    let x = DMatrix::from_fn(n_pre, donors.len(), |t, j| donors[j][t]);
    let weights = fit_weights(&treated[..n_pre], &x)?;
    let synthetic: Vec<f64> = (0..treated.len())
        .map(|t| donors.iter().zip(&weights).map(|(d, w)| w * d[t]).sum())
        .collect();
    let mspe = mspe_ratio(treated, &synthetic, event_index)?;
    Ok((weights, synthetic, mspe))
}

impl DonorPool {
    /// Fits the treated series against every donor in the pool.
    pub fn fit(&self, event: YearMonth) -> Result<SyntheticFit> {
        let idx = event_index(self.window(), event)?;
        let donors: Vec<&[f64]> = self
            .donors()
            .iter()
            .map(|d| d.log_rel_freq.as_slice())
            .collect();
        let treated = &self.treated().log_rel_freq;
        let (weights, synthetic, mspe) = synthesize_values(treated, &donors, idx)
            .map_err(|e| e.context(format!("synthetic control for '{}'", self.treated().word)))?;
        Ok(SyntheticFit {
            treated_word: self.treated().word.clone(),
            window: self.window(),
            event,
            donors: self.donors().iter().map(|d| d.word.clone()).collect(),
            weights,
            treated: treated.clone(),
            synthetic,
            mspe,
        })
    }
}
