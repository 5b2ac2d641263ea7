use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_series, AdoptionScenario};
use crate::didreg::{build_paired_design, sample_posterior, summarize, PairedSeries};
use crate::error::{Error, Result};
use crate::month::YearMonth;
use crate::rng::derive_seed;
use crate::stats::ks_uniform;
use crate::syncontrol::{
    in_time_placebo, placebo_test, select_donors_random, DonorPool, DonorStrategy, IN_TIME_OFFSETS,
};

/// Truth against estimate for one treated word of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordReport {
    pub replicate: usize,
    pub word: String,
    pub true_effect: f64,
    pub effect_mean: f64,
    pub effect_hdi_lo: f64,
    pub effect_hdi_hi: f64,
    pub covered: bool,
    pub placebo_p: f64,
    pub treated_ratio: f64,
    pub n_placebo: usize,
    /// Date with the largest MSPE ratio among the fake dates and the true one.
    pub in_time_peak: Option<YearMonth>,
    pub true_ratio_exceeds_fakes: Option<bool>,
    pub max_rhat: f64,
}

fn evaluate_word(
    scenario: &AdoptionScenario,
    replicate: usize,
    index: usize,
    word: &str,
    sim: &super::SimulatedSeries,
    nulls: &BTreeSet<String>,
) -> Result<WordReport> {
    let pool_size = scenario.pool_size.min(nulls.len());
    let donor_seed = derive_seed(scenario.seed, "pipeline-donors", index as u64);
    let donors = select_donors_random(word, nulls, pool_size, donor_seed)?;
    let pool = DonorPool::from_store(&sim.series, word, DonorStrategy::Random, &donors, pool_size)?;
    let fit = pool.fit(sim.event)?;
    let placebo = placebo_test(&pool, sim.event)?;

    let (in_time_peak, exceeds) = if scenario.n_months_pre > IN_TIME_OFFSETS[0] as usize {
        let it = in_time_placebo(&pool, sim.event)?;
        let peak = it
            .fakes
            .iter()
            .map(|f| (f.date, f.ratio))
            .chain(std::iter::once((it.true_event, it.true_ratio)))
            .filter_map(|(d, r)| r.map(|r| (d, r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(d, _)| d);
        (peak, Some(it.true_ratio_exceeds_fakes()))
    } else {
        (None, None)
    };

    let paired = PairedSeries {
        window: fit.window,
        treated: fit.treated.clone(),
        control: fit.synthetic.clone(),
    };
    let design = build_paired_design(&paired, sim.event, scenario.mode)?;
    let did_seed = derive_seed(scenario.seed, "pipeline-did", index as u64);
    let post = sample_posterior(&design, &scenario.prior(), &scenario.sampler(did_seed))?;
    let summary = summarize(&post);
    let g = summary.param("beta_gpt_post").expect("parameter exists");
    let true_effect = sim.truth[word].effect;
    Ok(WordReport {
        replicate,
        word: word.to_string(),
        true_effect,
        effect_mean: g.mean,
        effect_hdi_lo: g.hdi95.0,
        effect_hdi_hi: g.hdi95.1,
        covered: g.hdi95.0 <= true_effect && true_effect <= g.hdi95.1,
        placebo_p: placebo.p_value,
        treated_ratio: placebo.treated_ratio,
        n_placebo: placebo.donor_ratios.len(),
        in_time_peak,
        true_ratio_exceeds_fakes: exceeds,
        max_rhat: summary
            .params
            .iter()
            .map(|p| p.rhat)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

fn evaluate(scenario: &AdoptionScenario, replicate: usize) -> Result<Vec<WordReport>> {
    let sim = simulate_series(scenario)?;
    let nulls: BTreeSet<String> = scenario.null_words().into_iter().collect();
    scenario
        .treated_words()
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            evaluate_word(scenario, replicate, i, w, &sim, &nulls)
                .map_err(|e| e.context(format!("word '{w}'")))
        })
        .collect()
}

/// Simulates once and runs random-donor synthetic control, placebo,
/// in-time placebo and DiD for every treated word.
pub fn evaluate_pipeline(scenario: &AdoptionScenario) -> Result<Vec<WordReport>> {
    scenario.validate()?;
    evaluate(scenario, 0)
}

/// Runs `scenario.replicates` independent replicates with derived seeds.
pub fn evaluate_replicates(scenario: &AdoptionScenario) -> Result<Vec<WordReport>> {
    scenario.validate()?;
    let per_rep: Vec<Vec<WordReport>> = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| {
            evaluate(&scenario.replicate(r), r).map_err(|e| e.context(format!("replicate {r}")))
        })
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// Aggregate behavior of the pipeline over many reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub n_reports: usize,
    /// Share of placebo p-values at or below 0.05.
    pub rejection_rate: f64,
    pub placebo_ks_statistic: f64,
    pub placebo_ks_p_value: f64,
    /// Share of 95% HDIs containing the true effect.
    pub hdi_coverage: f64,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    /// Share of reports whose true-date ratio beats every fake date.
    pub in_time_specificity: Option<f64>,
    pub max_rhat: f64,
}

pub fn calibrate(reports: &[WordReport]) -> Result<Calibration> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to calibrate".into()));
    }
    let n = reports.len() as f64;
    let share =
        |f: &dyn Fn(&WordReport) -> bool| reports.iter().filter(|r| f(r)).count() as f64 / n;
    let ps: Vec<f64> = reports.iter().map(|r| r.placebo_p).collect();
    let ks = ks_uniform(&ps);
    let errors: Vec<f64> = reports
        .iter()
        .map(|r| (r.effect_mean - r.true_effect).abs())
        .collect();
    let in_time: Vec<bool> = reports
        .iter()
        .filter_map(|r| r.true_ratio_exceeds_fakes)
        .collect();
    Ok(Calibration {
        n_reports: reports.len(),
        rejection_rate: share(&|r| r.placebo_p <= 0.05),
        placebo_ks_statistic: ks.statistic,
        placebo_ks_p_value: ks.p_value,
        hdi_coverage: share(&|r| r.covered),
        mean_abs_error: errors.iter().sum::<f64>() / n,
        max_abs_error: errors.iter().copied().fold(0.0, f64::max),
        in_time_specificity: (!in_time.is_empty())
            .then(|| in_time.iter().filter(|&&b| b).count() as f64 / in_time.len() as f64),
        max_rhat: reports
            .iter()
            .map(|r| r.max_rhat)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

pub fn write_report_csv<W: Write>(out: W, reports: &[WordReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<report csv>", e))
}
