//! Deterministic inputs shared by the benchmarks.

use std::collections::BTreeSet;

use lexshift_core::corpus::PreprocessConfig;
use lexshift_core::didreg::{build_design, Design, DesignMode, DidDataset, Observation};
use lexshift_core::gptscore::{CellKey, ContrastiveCell};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Treated series and donor matrix of log-frequency-like values. The
/// treated series is an exact mix of donors 3 and 7.
pub fn simplex_problem(months: usize, donors: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut r = rng(1);
    let x = DMatrix::from_fn(months, donors, |_, _| {
        -2.0 + 0.3 * r.sample::<f64, _>(StandardNormal)
    });
    let y = (0..months)
        .map(|t| 0.4 * x[(t, 3)] + 0.6 * x[(t, 7)])
        .collect();
    (y, x)
}

/// `n_cells` cells of `docs` pairs over a vocabulary of `vocab` stems.
pub fn contrastive_cells(n_cells: usize, docs: usize, vocab: usize) -> Vec<ContrastiveCell> {
    let mut r = rng(2);
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    let mut draw = |boost: f64| -> BTreeSet<String> {
        words
            .iter()
            .enumerate()
            .filter(|(i, _)| r.random::<f64>() < 0.02 + 0.3 / (1.0 + *i as f64) + boost)
            .map(|(_, w)| w.clone())
            .collect()
    };
    (0..n_cells)
        .map(|c| {
            let pairs: Vec<_> = (0..docs)
                .map(|_| (Some(draw(0.0)), Some(draw(0.01))))
                .collect();
            ContrastiveCell::from_pairs(CellKey::new(format!("d{c}"), "gpt", "polish"), pairs)
                .expect("pairs are nonempty")
        })
        .collect()
}

/// Paired monthly design over `months` months with the event at `event`.
pub fn did_design(months: usize, event: usize) -> Design {
    let mut r = rng(3);
    let te = event as f64 / 12.0;
    let mut obs = Vec::with_capacity(2 * months);
    for gpt in [true, false] {
        for i in 0..months {
            let t = i as f64 / 12.0;
            let post = t > te;
            let h = if post { t - te } else { 0.0 };
            let y = -2.0
                + 0.02 * t
                + if gpt { 0.15 * h } else { 0.0 }
                + 0.05 * r.sample::<f64, _>(StandardNormal);
            obs.push(Observation {
                t,
                d_post: post,
                d_gpt: gpt,
                y,
            });
        }
    }
    let dataset = DidDataset::from_observations(obs, te).expect("both groups present");
    build_design(dataset, DesignMode::Hinge)
}

/// English-like words for the stemmer and preprocessing benchmarks.
pub fn sample_text(words: usize) -> String {
    const STEMS: &[&str] = &[
        "delving",
        "realms",
        "intricate",
        "showcasing",
        "pivotal",
        "running",
        "generalizations",
        "conditional",
        "happiness",
        "relational",
        "hopefully",
        "meticulous",
        "comprehending",
        "boasting",
        "swiftly",
        "the",
        "and",
        "analysis",
        "transcripts",
        "talks",
    ];
    let mut r = rng(4);
    (0..words)
        .map(|_| STEMS[r.random_range(0..STEMS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn preprocess_config() -> PreprocessConfig {
    PreprocessConfig::default()
}
