//! Contrastive log-odds ratios and the Dirichlet-weighted GPT score.
//!
//! Each [`ContrastiveCell`] pairs human documents with their LLM-edited
//! versions for one (dataset, model, prompt) combination. Per cell, a word's
//! document probability is Laplace smoothed as `(k + 1) / (n + 1)`. The score
//! mixes those probabilities across cells with weights drawn from a nested
//! flat-Dirichlet prior, applies log-odds after mixing, and summarizes the
//! resulting log-odds ratios by their median and 95% percentile interval.

mod io;
mod weights;

pub use io::{load_contrastive_dir, read_score_csv, write_score_csv, CellLoadError};
pub use weights::{sample_weight, sample_weights, WeightGrid, WeightSample};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::porter_stem;
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_VOCAB_THRESHOLD: f64 = 0.001;

/// Words that edit prompts make the model repeat; removed after stemming.
/// `claritiy` is kept alongside `clarity` since both spellings circulate.
pub const EXCLUDED_PROMPT_WORDS: &[&str] = &[
    "rephrase",
    "polish",
    "dear",
    "text",
    "certainly",
    "subject",
    "readable",
    "clarity",
    "claritiy",
    "enhance",
    "version",
    "title",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub model: String,
    pub prompt: String,
}

impl CellKey {
    pub fn new(
        dataset: impl Into<String>,
        model: impl Into<String>,
        prompt: impl Into<String>,
    ) -> Self {
        CellKey {
            dataset: dataset.into(),
            model: model.into(),
            prompt: prompt.into(),
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}__{}__{}", self.dataset, self.model, self.prompt)
    }
}

/// Document counts per stem on one side of a cell.
#[derive(Debug, Clone)]
struct SideCounts {
    n: usize,
    counts: HashMap<String, usize>,
}

impl SideCounts {
    fn new(docs: &[BTreeSet<String>]) -> Self {
        let mut counts = HashMap::new();
        for d in docs {
            for w in d {
                *counts.entry(w.clone()).or_insert(0) += 1;
            }
        }
        SideCounts {
            n: docs.len(),
            counts,
        }
    }

    fn count(&self, word: &str) -> usize {
        self.counts.get(word).copied().unwrap_or(0)
    }

    fn probability(&self, word: &str) -> f64 {
        smoothed(self.count(word), self.n)
    }
}

fn smoothed(k: usize, n: usize) -> f64 {
    (k as f64 + 1.0) / (n as f64 + 1.0)
}

/// Aligned human/edited document pairs for one grid cell.
#[derive(Debug, Clone)]
pub struct ContrastiveCell {
    pub key: CellKey,
    human_docs: Vec<BTreeSet<String>>,
    edited_docs: Vec<BTreeSet<String>>,
    human: SideCounts,
    edited: SideCounts,
}

impl ContrastiveCell {
    /// Index `i` on both sides must be the same source text before and after
    /// editing.
    pub fn new(
        key: CellKey,
        human_docs: Vec<BTreeSet<String>>,
        edited_docs: Vec<BTreeSet<String>>,
    ) -> Result<Self> {
        if human_docs.len() != edited_docs.len() {
            return Err(Error::DimensionMismatch(format!(
                "cell {key}: {} human vs {} edited documents",
                human_docs.len(),
                edited_docs.len()
            )));
        }
        if human_docs.is_empty() {
            return Err(Error::InvalidInput(format!(
                "cell {key} has no document pairs"
            )));
        }
        let human = SideCounts::new(&human_docs);
        let edited = SideCounts::new(&edited_docs);
        Ok(ContrastiveCell {
            key,
            human_docs,
            edited_docs,
            human,
            edited,
        })
    }

    /// Builds a cell from possibly-failed pairs; a pair missing either side
    /// is dropped from both.
    pub fn from_pairs<I>(key: CellKey, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Option<BTreeSet<String>>, Option<BTreeSet<String>>)>,
    {
        let (human, edited) = pairs
            .into_iter()
            .filter_map(|(h, e)| Some((h?, e?)))
            .unzip();
        Self::new(key, human, edited)
    }

    pub fn len(&self) -> usize {
        self.human_docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.human_docs.is_empty()
    }

    pub fn human_docs(&self) -> &[BTreeSet<String>] {
        &self.human_docs
    }

    pub fn edited_docs(&self) -> &[BTreeSet<String>] {
        &self.edited_docs
    }

    pub fn p_human(&self, word: &str) -> f64 {
        self.human.probability(word)
    }

    pub fn p_gpt(&self, word: &str) -> f64 {
        self.edited.probability(word)
    }

    /// The same cell with human and edited sides exchanged.
    pub fn swapped(&self) -> Self {
        ContrastiveCell {
            key: self.key.clone(),
            human_docs: self.edited_docs.clone(),
            edited_docs: self.human_docs.clone(),
            human: self.edited.clone(),
            edited: self.human.clone(),
        }
    }

    fn stems(&self) -> impl Iterator<Item = &String> {
        self.human.counts.keys().chain(self.edited.counts.keys())
    }
}

/// `(k + 1) / (n + 1)` where `k` documents out of `n` contain `word`.
pub fn doc_probability(docs: &[BTreeSet<String>], word: &str) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("no documents".into()));
    }
    let k = docs.iter().filter(|d| d.contains(word)).count();
    Ok(smoothed(k, docs.len()))
}

/// `ln(p / (1 - p))`, defined on the open unit interval.
pub fn log_odds(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Saturated { p });
    }
    Ok((p / (1.0 - p)).ln())
}

/// Log-odds ratio of edited versus human document probability in one cell.
pub fn compute_lor(cell: &ContrastiveCell, word: &str) -> Result<f64> {
    Ok(log_odds(cell.p_gpt(word))? - log_odds(cell.p_human(word))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorEntry {
    pub word: String,
    pub cell: CellKey,
    pub p_human: f64,
    pub p_gpt: f64,
    pub lor: f64,
}

/// Per-(word, cell) log-odds ratios. Pairs that saturate are reported
/// separately instead of being given an infinite ratio.
#[derive(Debug, Clone, Default)]
pub struct LorTable {
    pub entries: Vec<LorEntry>,
    pub saturated: Vec<(String, CellKey)>,
}

pub fn lor_table(cells: &[ContrastiveCell], vocab: &BTreeSet<String>) -> LorTable {
    let mut table = LorTable::default();
    for word in vocab {
        for cell in cells {
            match compute_lor(cell, word) {
                Ok(lor) => table.entries.push(LorEntry {
                    word: word.clone(),
                    cell: cell.key.clone(),
                    p_human: cell.p_human(word),
                    p_gpt: cell.p_gpt(word),
                    lor,
                }),
                Err(_) => table.saturated.push((word.clone(), cell.key.clone())),
            }
        }
    }
    table
}

/// Stems whose raw document frequency reaches `threshold` on either side of
/// at least one cell, minus the stemmed prompt-word exclusion list.
pub fn vocabulary_filter(cells: &[ContrastiveCell], threshold: f64) -> BTreeSet<String> {
    let excluded: BTreeSet<String> = EXCLUDED_PROMPT_WORDS
        .iter()
        .map(|w| porter_stem(w))
        .collect();
    let mut keep = BTreeSet::new();
    for cell in cells {
        for stem in cell.stems() {
            if keep.contains(stem) || excluded.contains(stem) {
                continue;
            }
            let frequent = |side: &SideCounts| side.count(stem) as f64 / side.n as f64 >= threshold;
            if frequent(&cell.human) || frequent(&cell.edited) {
                keep.insert(stem.clone());
            }
        }
    }
    keep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GptScore {
    pub word: String,
    /// Median log-odds ratio across weight samples.
    pub score: f64,
    /// 2.5th and 97.5th percentiles.
    pub interval: (f64, f64),
    pub n_samples: usize,
    pub n_cells: usize,
}

/// Convex combination `sum_i w_i p_i`, evaluated as `min + sum_i w_i (p_i - min)`
/// so equal inputs reproduce exactly and the result never leaves `[min, max]`.
fn mix(probs: &[f64], weights: &[f64]) -> f64 {
    let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let excess: f64 = probs.iter().zip(weights).map(|(p, w)| w * (p - lo)).sum();
    (lo + excess).clamp(lo, hi)
}

/// A word left unscored, with the reason.
pub type DroppedWord = (String, Error);

/// Scores one word against pre-drawn weight samples. `cells` must be in the
/// grid's cell order.
pub fn score_with_samples(
    word: &str,
    cells: &[ContrastiveCell],
    samples: &[WeightSample],
) -> Result<GptScore> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no weight samples".into()));
    }
    let p_human: Vec<f64> = cells.iter().map(|c| c.p_human(word)).collect();
    let p_gpt: Vec<f64> = cells.iter().map(|c| c.p_gpt(word)).collect();
    let mut lors = Vec::with_capacity(samples.len());
    for s in samples {
        if s.weights.len() != cells.len() {
            return Err(Error::DimensionMismatch(format!(
                "weight sample has {} cells, expected {}",
                s.weights.len(),
                cells.len()
            )));
        }
        let h = mix(&p_human, &s.weights);
        let g = mix(&p_gpt, &s.weights);
        lors.push(log_odds(g)? - log_odds(h)?);
    }
    let sorted = stats::sorted(&lors);
    Ok(GptScore {
        word: word.to_string(),
        score: stats::quantile_sorted(&sorted, 0.5),
        interval: (
            stats::quantile_sorted(&sorted, 0.025),
            stats::quantile_sorted(&sorted, 0.975),
        ),
        n_samples: samples.len(),
        n_cells: cells.len(),
    })
}

/// Orders cells to match a grid built from them. Fails on duplicate keys.
fn grid_for(cells: &[ContrastiveCell]) -> Result<(WeightGrid, Vec<ContrastiveCell>)> {
    let grid = WeightGrid::new(cells.iter().map(|c| c.key.clone()))?;
    if grid.len() != cells.len() {
        return Err(Error::InvalidInput("duplicate cell keys".into()));
    }
    let mut ordered = cells.to_vec();
    ordered.sort_by(|a, b| a.key.cmp(&b.key));
    Ok((grid, ordered))
}

pub fn gpt_score(
    word: &str,
    cells: &[ContrastiveCell],
    n_samples: usize,
    seed: u64,
) -> Result<GptScore> {
    let (grid, ordered) = grid_for(cells)?;
    let samples = sample_weights(&grid, n_samples, seed);
    score_with_samples(word, &ordered, &samples)
}

/// Scores every word with a shared set of weight samples.
///
/// Returns scores sorted by descending score (ties by word) and the words
/// dropped because a mixed probability saturated.
pub fn score_vocabulary(
    cells: &[ContrastiveCell],
    vocab: &BTreeSet<String>,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<GptScore>, Vec<DroppedWord>)> {
    let (grid, ordered) = grid_for(cells)?;
    let samples = sample_weights(&grid, n_samples, seed);
    let words: Vec<&String> = vocab.iter().collect();
    let results: Vec<Result<GptScore>> = words
        .par_iter()
        .map(|w| score_with_samples(w, &ordered, &samples))
        .collect();
    let mut scores = Vec::new();
    let mut dropped = Vec::new();
    for (w, r) in words.into_iter().zip(results) {
        match r {
            Ok(s) => scores.push(s),
            Err(e) => dropped.push((w.clone(), e)),
        }
    }
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok((scores, dropped))
}
