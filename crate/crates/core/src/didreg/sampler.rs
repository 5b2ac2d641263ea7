//! Blocked Gibbs sampler for the linear-Gaussian model with
//! `coef ~ N(0, s^2 I)` and `sigma ~ HalfCauchy(0, A)`.
//!
//! The half-Cauchy prior is written as `sigma^2 | a ~ IG(1/2, 1/a)` with
//! `a ~ IG(1/2, 1/A^2)`, which makes every full conditional conjugate:
//!
//! - `coef | sigma^2 ~ N(M^-1 X'y, sigma^2 M^-1)` with `M = X'X + (sigma^2/s^2) I`
//! - `sigma^2 | coef, a ~ IG((n+1)/2, RSS/2 + 1/a)`
//! - `a | sigma^2 ~ IG(1, 1/A^2 + 1/sigma^2)`

use nalgebra::{DMatrix, DVector, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{effective_sample_size, split_rhat};
use super::{Design, DesignMode};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::stats::{hdi, mean, median, variance};

pub const PARAM_NAMES: [&str; 5] = ["alpha", "beta", "beta_post", "beta_gpt_post", "sigma"];
pub const RHAT_WARN: f64 = 1.05;
const MIN_OBSERVATIONS: usize = 8;
/// Keeps `sigma^2` representable when the data are fit exactly.
const SIGMA2_FLOOR: f64 = 1e-200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Standard deviation of the zero-mean normal prior on each coefficient.
    pub coef_prior_scale: f64,
    /// Scale of the half-Cauchy prior on sigma.
    pub sigma_prior_scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            coef_prior_scale: 10.0,
            sigma_prior_scale: 1.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("coef_prior_scale", self.coef_prior_scale),
            ("sigma_prior_scale", self.sigma_prior_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub draws_per_chain: usize,
    /// Discarded iterations before the kept draws of each chain.
    pub warmup: usize,
    pub seed: u64,
}

impl SamplerConfig {
    /// Four chains of 1000 kept draws after 1000 warm-up iterations.
    pub fn new(seed: u64) -> Self {
        SamplerConfig {
            chains: 4,
            draws_per_chain: 1000,
            warmup: 1000,
            seed,
        }
    }
}

/// Kept draws `[alpha, beta, beta_post, beta_gpt_post, sigma]` per chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DidPosterior {
    pub mode: DesignMode,
    pub t_event: f64,
    pub prior: PriorSpec,
    pub config: SamplerConfig,
    pub chains: Vec<Vec<[f64; 5]>>,
    pub warnings: Vec<String>,
}

impl DidPosterior {
    pub fn param_chains(&self, p: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.iter().map(|d| d[p]).collect())
            .collect()
    }

    pub fn pooled(&self, p: usize) -> Vec<f64> {
        self.chains.iter().flatten().map(|d| d[p]).collect()
    }

    pub fn mean(&self, p: usize) -> f64 {
        mean(&self.pooled(p))
    }

    pub fn rhat(&self, p: usize) -> f64 {
        split_rhat(&self.param_chains(p))
    }
}

fn rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let tol = 1e-10 * sv.max() * (x.nrows().max(x.ncols()) as f64);
    sv.iter().filter(|&&s| s > tol).count()
}

fn inv_gamma<R: Rng>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0)
        .expect("shape is positive")
        .sample(rng);
    scale / g
}

fn run_chain(
    design: &Design,
    prior: &PriorSpec,
    cfg: &SamplerConfig,
    chain: usize,
) -> Result<Vec<[f64; 5]>> {
    let x = &design.x;
    let y = &design.y;
    let n = y.len() as f64;
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let s2 = prior.coef_prior_scale.powi(2);
    let a2 = prior.sigma_prior_scale.powi(2);
    let mut rng = substream(cfg.seed, "did-chain", chain as u64);

    // Overdispersed start around the marginal variance of y.
    let spread = variance(y.as_slice()).max(1e-12);
    let z0: f64 = StandardNormal.sample(&mut rng);
    let mut sigma2 = spread * (2.0 * z0).exp();
    let mut a = a2;

    let mut kept = Vec::with_capacity(cfg.draws_per_chain);
    for iter in 0..cfg.warmup + cfg.draws_per_chain {
        let m = &xtx + DMatrix::identity(4, 4) * (sigma2 / s2);
        let chol = m.cholesky().ok_or_else(|| {
            Error::Infeasible("coefficient precision lost positive definiteness".into())
        })?;
        let center = chol.solve(&xty);
        let z = Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let l_t = chol.l().transpose();
        let dev = l_t
            .solve_upper_triangular(&DVector::from_column_slice(z.as_slice()))
            .expect("cholesky factor is nonsingular");
        let coef = center + dev * sigma2.sqrt();

        let rss = (y - x * &coef).norm_squared();
        sigma2 = inv_gamma(&mut rng, (n + 1.0) / 2.0, rss / 2.0 + 1.0 / a).max(SIGMA2_FLOOR);
        a = inv_gamma(&mut rng, 1.0, 1.0 / a2 + 1.0 / sigma2);

        if iter >= cfg.warmup {
            kept.push([coef[0], coef[1], coef[2], coef[3], sigma2.sqrt()]);
        }
    }
    Ok(kept)
}

/// Draws from the posterior with independent chains seeded from `cfg.seed`.
pub fn sample_posterior(
    design: &Design,
    prior: &PriorSpec,
    cfg: &SamplerConfig,
) -> Result<DidPosterior> {
    prior.validate()?;
    if cfg.chains == 0 || cfg.draws_per_chain == 0 {
        return Err(Error::InvalidInput(
            "need at least one chain and one draw".into(),
        ));
    }
    let n = design.y.len();
    if n < MIN_OBSERVATIONS {
        return Err(Error::InvalidInput(format!(
            "{n} observations, need at least {MIN_OBSERVATIONS}"
        )));
    }
    let r = rank(&design.x);
    if r < design.x.ncols() {
        return Err(Error::RankDeficient {
            rank: r,
            cols: design.x.ncols(),
        });
    }
    let chains = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(design, prior, cfg, c))
        .collect::<Result<Vec<_>>>()?;
    let mut post = DidPosterior {
        mode: design.mode,
        t_event: design.dataset.t_event(),
        prior: *prior,
        config: *cfg,
        chains,
        warnings: Vec::new(),
    };
    if cfg.chains > 1 && cfg.draws_per_chain >= 4 {
        for (p, name) in PARAM_NAMES.iter().enumerate() {
            let r = post.rhat(p);
            if r > RHAT_WARN {
                post.warnings
                    .push(format!("split R-hat for {name} is {r:.4} (> {RHAT_WARN})"));
            }
        }
    }
    Ok(post)
}

/// Percent change per year implied by a log10-per-year slope.
pub fn annual_pct_change(beta: f64) -> f64 {
    100.0 * (10f64.powf(beta) - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub hdi95: (f64, f64),
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PctChange {
    /// At the posterior mean of `beta_gpt_post`.
    pub mean: f64,
    /// At the bounds of its 95% HDI.
    pub hdi95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidSummary {
    pub mode: DesignMode,
    pub t_event: f64,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub warmup: usize,
    pub seed: u64,
    pub prior: PriorSpec,
    pub params: Vec<ParamSummary>,
    pub beta_gpt_post_annual_pct_change: PctChange,
    pub warnings: Vec<String>,
}

impl DidSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

pub fn summarize(post: &DidPosterior) -> DidSummary {
    let params: Vec<ParamSummary> = PARAM_NAMES
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let pooled = post.pooled(p);
            let chains = post.param_chains(p);
            ParamSummary {
                name: name.to_string(),
                mean: mean(&pooled),
                median: median(&pooled),
                sd: if pooled.len() > 1 {
                    variance(&pooled).sqrt()
                } else {
                    0.0
                },
                hdi95: hdi(&pooled, 0.95),
                rhat: split_rhat(&chains),
                ess: effective_sample_size(&chains),
            }
        })
        .collect();
    let g = &params[3];
    let pct = PctChange {
        mean: annual_pct_change(g.mean),
        hdi95: (annual_pct_change(g.hdi95.0), annual_pct_change(g.hdi95.1)),
    };
    DidSummary {
        mode: post.mode,
        t_event: post.t_event,
        chains: post.config.chains,
        draws_per_chain: post.config.draws_per_chain,
        warmup: post.config.warmup,
        seed: post.config.seed,
        prior: post.prior,
        params,
        beta_gpt_post_annual_pct_change: pct,
        warnings: post.warnings.clone(),
    }
}
