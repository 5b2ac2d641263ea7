use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preprocess::{preprocess, PreprocessConfig};
use super::Document;
use crate::error::{Error, Result};
use crate::month::{MonthWindow, YearMonth};

/// Monthly document-containment counts for one stem.
///
/// `log_rel_freq[t] = log10((contain_count[t] + 1) / (doc_count[t] + 1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySeries {
    pub word: String,
    pub window: MonthWindow,
    pub doc_count: Vec<u64>,
    pub contain_count: Vec<u64>,
    pub log_rel_freq: Vec<f64>,
}

impl FrequencySeries {
    pub fn from_counts(
        word: impl Into<String>,
        window: MonthWindow,
        doc_count: Vec<u64>,
        contain_count: Vec<u64>,
    ) -> Result<Self> {
        let word = word.into();
        if doc_count.len() != window.len() || contain_count.len() != window.len() {
            return Err(Error::DimensionMismatch(format!(
                "series '{word}' has {} / {} months, window has {}",
                doc_count.len(),
                contain_count.len(),
                window.len()
            )));
        }
        if let Some(t) = (0..doc_count.len()).find(|&t| contain_count[t] > doc_count[t]) {
            return Err(Error::InvalidInput(format!(
                "series '{word}': {} containing documents exceed {} total in {}",
                contain_count[t],
                doc_count[t],
                window.start.offset(t as i64)
            )));
        }
        let log_rel_freq = doc_count
            .iter()
            .zip(&contain_count)
            .map(|(&n, &c)| smoothed_log10(c, n))
            .collect();
        Ok(FrequencySeries {
            word,
            window,
            doc_count,
            contain_count,
            log_rel_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.log_rel_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_rel_freq.is_empty()
    }

    pub fn months(&self) -> Vec<YearMonth> {
        self.window.months().collect()
    }

    /// Months with no documents at all. They stay in the series (with a
    /// smoothed value of 0) so callers can exclude them explicitly.
    pub fn empty_months(&self) -> Vec<YearMonth> {
        self.window
            .months()
            .zip(&self.doc_count)
            .filter(|(_, &n)| n == 0)
            .map(|(m, _)| m)
            .collect()
    }
}

fn smoothed_log10(contain: u64, total: u64) -> f64 {
    ((contain as f64 + 1.0) / (total as f64 + 1.0)).log10()
}

/// Accumulates per-month document totals and per-stem containment counts.
#[derive(Debug, Clone)]
pub struct MonthlyCounts {
    window: MonthWindow,
    doc_count: Vec<u64>,
    contain: BTreeMap<String, Vec<u64>>,
    skipped: usize,
}

impl MonthlyCounts {
    pub fn new(window: MonthWindow) -> Self {
        MonthlyCounts {
            window,
            doc_count: vec![0; window.len()],
            contain: BTreeMap::new(),
            skipped: 0,
        }
    }

    /// Adds one document's stem set. Documents outside the window are
    /// counted as skipped and otherwise ignored.
    pub fn add(&mut self, month: YearMonth, stems: &BTreeSet<String>) {
        let Some(t) = self.window.index_of(month) else {
            self.skipped += 1;
            return;
        };
        self.doc_count[t] += 1;
        let len = self.window.len();
        for stem in stems {
            self.contain
                .entry(stem.clone())
                .or_insert_with(|| vec![0; len])[t] += 1;
        }
    }

    pub fn window(&self) -> MonthWindow {
        self.window
    }

    pub fn doc_count(&self) -> &[u64] {
        &self.doc_count
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Stems containing at least `min_docs` documents over the whole window.
    pub fn stems_with_support(&self, min_docs: u64) -> BTreeSet<String> {
        self.contain
            .iter()
            .filter(|(_, c)| c.iter().sum::<u64>() >= min_docs)
            .map(|(w, _)| w.clone())
            .collect()
    }

    pub fn series(&self, word: &str) -> FrequencySeries {
        let contain = self
            .contain
            .get(word)
            .cloned()
            .unwrap_or_else(|| vec![0; self.window.len()]);
        FrequencySeries::from_counts(word, self.window, self.doc_count.clone(), contain)
            .expect("counts are consistent by construction")
    }
}

/// Builds one frequency series per vocabulary stem.
pub fn build_frequency_series(
    corpus: &[Document],
    vocab: &BTreeSet<String>,
    window: MonthWindow,
    cfg: &PreprocessConfig,
) -> Result<BTreeMap<String, FrequencySeries>> {
    if vocab.is_empty() {
        return Err(Error::InvalidInput("vocabulary is empty".into()));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidInput("corpus is empty".into()));
    }
    let window = MonthWindow::new(window.start, window.end)?;
    let counts = count_documents(corpus, window, cfg);
    Ok(vocab
        .iter()
        .map(|w| (w.clone(), counts.series(w)))
        .collect())
}

/// Preprocesses documents in parallel and merges their stems in input order.
pub fn count_documents(
    corpus: &[Document],
    window: MonthWindow,
    cfg: &PreprocessConfig,
) -> MonthlyCounts {
    let stems: Vec<BTreeSet<String>> = corpus
        .par_iter()
        .map(|d| preprocess(&d.text, cfg))
        .collect();
    let mut counts = MonthlyCounts::new(window);
    for (doc, s) in corpus.iter().zip(&stems) {
        counts.add(YearMonth::of_date(doc.timestamp), s);
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn window() -> MonthWindow {
        MonthWindow::new(
            YearMonth::new(2022, 1).unwrap(),
            YearMonth::new(2022, 3).unwrap(),
        )
        .unwrap()
    }

    fn doc(id: usize, month: u32, text: &str) -> Document {
        Document {
            id: id.to_string(),
            timestamp: NaiveDate::from_ymd_opt(2022, month, 15).unwrap(),
            category: None,
            text: text.into(),
        }
    }

    fn vocab(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn smoothing_examples() {
        // N = 9 with one containing document: log10(2/10).
        let mut docs: Vec<Document> = (0..8).map(|i| doc(i, 1, "other words")).collect();
        docs.push(doc(8, 1, "we delve deeper"));
        let s = build_frequency_series(
            &docs,
            &vocab(&["delv", "absent"]),
            window(),
            &Default::default(),
        )
        .unwrap();
        assert!((s["delv"].log_rel_freq[0] - (-0.698_970_004_336_018_8)).abs() < 1e-12);
        // Zero-count smoothing: log10(1/10) = -1.
        assert!((s["absent"].log_rel_freq[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn saturation_gives_zero() {
        let docs: Vec<Document> = (0..5).map(|i| doc(i, 2, "delve")).collect();
        let s = build_frequency_series(&docs, &vocab(&["delv"]), window(), &Default::default())
            .unwrap();
        assert_eq!(s["delv"].log_rel_freq[1], 0.0);
    }

    #[test]
    fn empty_months_retained_and_flagged() {
        let docs = vec![doc(0, 1, "delve")];
        let s = build_frequency_series(&docs, &vocab(&["delv"]), window(), &Default::default())
            .unwrap();
        let series = &s["delv"];
        assert_eq!(series.len(), 3);
        assert_eq!(
            series.empty_months(),
            vec![
                YearMonth::new(2022, 2).unwrap(),
                YearMonth::new(2022, 3).unwrap()
            ]
        );
        assert_eq!(series.log_rel_freq[2], 0.0);
    }

    #[test]
    fn rejects_empty_vocab_and_corpus() {
        let docs = vec![doc(0, 1, "delve")];
        assert!(
            build_frequency_series(&docs, &BTreeSet::new(), window(), &Default::default()).is_err()
        );
        assert!(
            build_frequency_series(&[], &vocab(&["x"]), window(), &Default::default()).is_err()
        );
    }

    #[test]
    fn from_counts_rejects_overcount() {
        assert!(FrequencySeries::from_counts("w", window(), vec![1, 1, 1], vec![2, 0, 0]).is_err());
        assert!(FrequencySeries::from_counts("w", window(), vec![1, 1], vec![0, 0]).is_err());
    }

    const WORDS: &[&str] = &["delve", "realm", "tapestry", "robust", "swift", "boast"];

    fn arb_docs() -> impl Strategy<Value = Vec<(u32, Vec<usize>)>> {
        prop::collection::vec(
            (1u32..=3, prop::collection::vec(0..WORDS.len(), 0..4)),
            1..25,
        )
    }

    fn to_docs(spec: &[(u32, Vec<usize>)]) -> Vec<Document> {
        spec.iter()
            .enumerate()
            .map(|(i, (m, ws))| {
                let text: Vec<&str> = ws.iter().map(|&w| WORDS[w]).collect();
                doc(i, *m, &text.join(" "))
            })
            .collect()
    }

    fn all_stems() -> BTreeSet<String> {
        WORDS
            .iter()
            .map(|w| crate::corpus::porter_stem(w))
            .collect()
    }

    proptest! {
        #[test]
        fn bounds_hold(spec in arb_docs()) {
            let s = build_frequency_series(&to_docs(&spec), &all_stems(), window(), &Default::default()).unwrap();
            for series in s.values() {
                for t in 0..series.len() {
                    let n = series.doc_count[t];
                    prop_assert!(series.contain_count[t] <= n);
                    let lo = (1.0 / (n as f64 + 1.0)).log10();
                    prop_assert!(series.log_rel_freq[t] <= 0.0);
                    prop_assert!(series.log_rel_freq[t] >= lo - 1e-15);
                }
            }
        }

        #[test]
        fn ingestion_order_is_irrelevant(spec in arb_docs(), rot in 0usize..25) {
            let docs = to_docs(&spec);
            let mut rotated = docs.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let a = build_frequency_series(&docs, &all_stems(), window(), &Default::default()).unwrap();
            let b = build_frequency_series(&rotated, &all_stems(), window(), &Default::default()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn adding_a_document_moves_series_monotonically(spec in arb_docs(), extra in prop::collection::vec(0..WORDS.len(), 1..3), month in 1u32..=3) {
            let mut docs = to_docs(&spec);
            let before = build_frequency_series(&docs, &all_stems(), window(), &Default::default()).unwrap();
            let text: Vec<&str> = extra.iter().map(|&w| WORDS[w]).collect();
            docs.push(doc(999, month, &text.join(" ")));
            let after = build_frequency_series(&docs, &all_stems(), window(), &Default::default()).unwrap();
            let present: BTreeSet<String> = extra.iter().map(|&w| crate::corpus::porter_stem(WORDS[w])).collect();
            let t = (month - 1) as usize;
            for (w, a) in &after {
                let b = &before[w];
                prop_assert!(a.contain_count[t] >= b.contain_count[t]);
                if present.contains(w) {
                    prop_assert!(a.log_rel_freq[t] >= b.log_rel_freq[t]);
                } else {
                    prop_assert!(a.log_rel_freq[t] < b.log_rel_freq[t]);
                }
            }
        }
    }
}
