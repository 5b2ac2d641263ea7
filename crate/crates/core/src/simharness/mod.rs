//! Synthetic frequency series with known adoption effects.
//!
//! Every word has a latent log10 containment probability
//!
//! ```text
//! base_w + slope t + post_slope h(t) + effect_w h(t) + noise
//! ```
//!
//! with `h(t) = (t - t_event)_+` in years. Monthly containment counts are
//! binomial draws from that probability and are smoothed exactly like corpus
//! counts, so downstream stages see ordinary [`FrequencySeries`].

mod pipeline;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::FrequencySeries;
use crate::didreg::{DesignMode, PriorSpec, SamplerConfig};
use crate::error::{Error, Result};
use crate::month::{MonthWindow, YearMonth};
use crate::rng::{derive_seed, substream};
use crate::syncontrol::DEFAULT_POOL_SIZE;

pub use pipeline::{
    calibrate, evaluate_pipeline, evaluate_replicates, write_report_csv, Calibration, WordReport,
};

/// Null words needed per treated word for a resolvable placebo p-value.
pub const MIN_NULLS_PER_TREATED: usize = 20;

fn default_start() -> YearMonth {
    YearMonth::new(2018, 12).expect("valid month")
}

/// A simulation scenario, read from a flat TOML file. Word names are
/// generated: `null000`, `null001`, ... and `treat000`, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdoptionScenario {
    pub seed: u64,
    /// First month of the window.
    pub start: YearMonth,
    /// Pre-period length; its last month is the event month.
    pub n_months_pre: usize,
    pub n_months_post: usize,
    pub docs_per_month: u64,
    pub n_null_words: usize,
    pub n_treated_words: usize,
    /// Center of the per-word baseline log10 probability.
    pub base_log10: f64,
    /// Baselines are uniform on `base_log10 +/- base_spread`.
    pub base_spread: f64,
    /// Common log10 slope per year.
    pub slope: f64,
    /// Common change of slope after the event, per year.
    pub post_slope: f64,
    /// Extra post-event slope of treated words, per year.
    pub effect: f64,
    /// Standard deviation of the latent log10-probability noise.
    pub noise_sd: f64,
    /// Replicates run by [`evaluate_replicates`].
    pub replicates: usize,
    /// Random donors per treated word, capped at the number of null words.
    pub pool_size: usize,
    pub mode: DesignMode,
    pub coef_prior_scale: f64,
    pub sigma_prior_scale: f64,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub warmup: usize,
}

impl Default for AdoptionScenario {
    fn default() -> Self {
        let prior = PriorSpec::default();
        let sampler = SamplerConfig::new(0);
        AdoptionScenario {
            seed: 0,
            start: default_start(),
            n_months_pre: 48,
            n_months_post: 18,
            docs_per_month: 100_000,
            n_null_words: 99,
            n_treated_words: 1,
            base_log10: -2.0,
            base_spread: 0.3,
            slope: 0.0,
            post_slope: 0.0,
            effect: 0.15,
            noise_sd: 0.05,
            replicates: 1,
            pool_size: DEFAULT_POOL_SIZE,
            mode: DesignMode::Hinge,
            coef_prior_scale: prior.coef_prior_scale,
            sigma_prior_scale: prior.sigma_prior_scale,
            chains: sampler.chains,
            draws_per_chain: sampler.draws_per_chain,
            warmup: sampler.warmup,
        }
    }
}

impl AdoptionScenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: AdoptionScenario =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AdoptionScenario::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn window(&self) -> MonthWindow {
        let len = (self.n_months_pre + self.n_months_post) as i64;
        MonthWindow::new(self.start, self.start.offset(len - 1)).expect("validated lengths")
    }

    /// Last pre-period month.
    pub fn event(&self) -> YearMonth {
        self.start.offset(self.n_months_pre as i64 - 1)
    }

    pub fn t_event(&self) -> f64 {
        (self.n_months_pre - 1) as f64 / 12.0
    }

    pub fn null_words(&self) -> Vec<String> {
        (0..self.n_null_words)
            .map(|i| format!("null{i:03}"))
            .collect()
    }

    pub fn treated_words(&self) -> Vec<String> {
        (0..self.n_treated_words)
            .map(|i| format!("treat{i:03}"))
            .collect()
    }

    pub fn prior(&self) -> PriorSpec {
        PriorSpec {
            coef_prior_scale: self.coef_prior_scale,
            sigma_prior_scale: self.sigma_prior_scale,
        }
    }

    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            draws_per_chain: self.draws_per_chain,
            warmup: self.warmup,
            seed,
        }
    }

    /// The same scenario with the seed of replicate `i`.
    pub fn replicate(&self, i: usize) -> Self {
        AdoptionScenario {
            seed: derive_seed(self.seed, "replicate", i as u64),
            ..self.clone()
        }
    }

    /// Largest noise-free latent log10 probability over the window.
    fn max_trend(&self) -> f64 {
        let te = self.t_event();
        let t_end = (self.n_months_pre + self.n_months_post - 1) as f64 / 12.0;
        let h_end = t_end - te;
        let top = self.base_log10 + self.base_spread;
        let effect = self.effect.max(0.0);
        [0.0, te, t_end]
            .iter()
            .map(|&t| {
                let h = if t > te { h_end } else { 0.0 };
                top + self.slope * t + (self.post_slope + effect) * h
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("scenario: {m}")));
        if self.n_months_pre < 2 || self.n_months_post < 1 {
            return bad("need at least 2 pre months and 1 post month".into());
        }
        if self.docs_per_month == 0 {
            return bad("docs_per_month must be positive".into());
        }
        if self.n_treated_words == 0 {
            return bad("need at least one treated word".into());
        }
        if self.n_null_words < MIN_NULLS_PER_TREATED * self.n_treated_words {
            return bad(format!(
                "{} null words for {} treated, need {MIN_NULLS_PER_TREATED} per treated word",
                self.n_null_words, self.n_treated_words
            ));
        }
        if self.pool_size.min(self.n_null_words) < MIN_NULLS_PER_TREATED {
            return bad(format!(
                "pool_size {} is below {MIN_NULLS_PER_TREATED}",
                self.pool_size
            ));
        }
        for (name, v) in [
            ("base_log10", self.base_log10),
            ("base_spread", self.base_spread),
            ("slope", self.slope),
            ("post_slope", self.post_slope),
            ("effect", self.effect),
            ("noise_sd", self.noise_sd),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} is not finite"));
            }
        }
        if self.base_spread < 0.0 || self.noise_sd < 0.0 {
            return bad("base_spread and noise_sd must be nonnegative".into());
        }
        let top = self.max_trend();
        if top >= 0.0 {
            return bad(format!(
                "latent log10 probability reaches {top:.3}; it must stay below 0"
            ));
        }
        if self.chains == 0 || self.draws_per_chain == 0 || self.replicates == 0 {
            return bad("chains, draws_per_chain and replicates must be positive".into());
        }
        self.prior().validate()
    }
}

/// Ground truth for one simulated word.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WordTruth {
    pub base_log10: f64,
    pub effect: f64,
    pub treated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSeries {
    pub window: MonthWindow,
    pub event: YearMonth,
    pub series: BTreeMap<String, FrequencySeries>,
    pub truth: BTreeMap<String, WordTruth>,
}

/// Draws every word's series. Each word has its own random stream, so adding
/// words never changes the draws of existing ones.
pub fn simulate_series(scenario: &AdoptionScenario) -> Result<SimulatedSeries> {
    scenario.validate()?;
    let window = scenario.window();
    let te = scenario.t_event();
    let n = scenario.docs_per_month;
    let noise = Normal::new(0.0, scenario.noise_sd).expect("validated noise");
    let words: Vec<(String, bool)> = scenario
        .null_words()
        .into_iter()
        .map(|w| (w, false))
        .chain(scenario.treated_words().into_iter().map(|w| (w, true)))
        .collect();
    let mut series = BTreeMap::new();
    let mut truth = BTreeMap::new();
    for (word, treated) in words {
        let mut rng = substream(scenario.seed, &format!("sim:{word}"), 0);
        let base = scenario.base_log10 + scenario.base_spread * rng.random_range(-1.0..=1.0);
        let effect = if treated { scenario.effect } else { 0.0 };
        let mut contain = Vec::with_capacity(window.len());
        for i in 0..window.len() {
            let t = i as f64 / 12.0;
            let h = if t > te { t - te } else { 0.0 };
            let log_p = base
                + scenario.slope * t
                + (scenario.post_slope + effect) * h
                + noise.sample(&mut rng);
            let p = 10f64.powf(log_p);
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "latent probability {p} for '{word}' in {} leaves (0, 1)",
                    window.start.offset(i as i64)
                )));
            }
            let draw = Binomial::new(n, p).expect("p in (0, 1)").sample(&mut rng);
            contain.push(draw);
        }
        let s = FrequencySeries::from_counts(word.clone(), window, vec![n; window.len()], contain)?;
        series.insert(word.clone(), s);
        truth.insert(
            word,
            WordTruth {
                base_log10: base,
                effect,
                treated,
            },
        );
    }
    Ok(SimulatedSeries {
        window,
        event: scenario.event(),
        series,
        truth,
    })
}
