use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingStore;
use crate::corpus::FrequencySeries;
use crate::error::{Error, Result};
use crate::gptscore::GptScore;
use crate::month::MonthWindow;
use crate::rng::substream;

pub const DEFAULT_POOL_SIZE: usize = 100;
pub const DEFAULT_POOL_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DonorStrategy {
    /// Near-zero GPT score, then nearest in embedding space.
    Untreated,
    /// Nearest in embedding space.
    Synonym,
    /// Uniform without replacement.
    Random,
}

impl fmt::Display for DonorStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DonorStrategy::Untreated => "untreated",
            DonorStrategy::Synonym => "synonym",
            DonorStrategy::Random => "random",
        })
    }
}

impl FromStr for DonorStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "untreated" => Ok(DonorStrategy::Untreated),
            "synonym" => Ok(DonorStrategy::Synonym),
            "random" => Ok(DonorStrategy::Random),
            _ => Err(Error::InvalidInput(format!(
                "unknown donor strategy '{s}' (expected untreated, synonym or random)"
            ))),
        }
    }
}

fn require_embedding(treated: &str, embeddings: &EmbeddingStore) -> Result<()> {
    if embeddings.contains(treated) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("'{treated}' has no embedding")))
    }
}

/// Candidates ranked by cosine similarity to `treated`, ties by word.
fn nearest<'a>(
    treated: &str,
    candidates: impl Iterator<Item = &'a str>,
    embeddings: &EmbeddingStore,
    pool_size: usize,
) -> Result<Vec<String>> {
    let mut ranked: Vec<(f64, &str)> = candidates
        .filter(|w| *w != treated)
        .filter_map(|w| embeddings.cosine(treated, w).map(|c| (c, w)))
        .collect();
    if ranked.len() < pool_size {
        return Err(Error::Infeasible(format!(
            "{} donor candidates for '{treated}', {pool_size} requested",
            ranked.len()
        )));
    }
    ranked.sort_by(|a, b| rank_order(*a, *b));
    Ok(ranked
        .into_iter()
        .take(pool_size)
        .map(|(_, w)| w.to_string())
        .collect())
}

/// The tenth of scored, embedded words (other than `treated`) with the
/// smallest absolute score, ties by word. The count is rounded up.
pub fn untreated_candidates(
    treated: &str,
    scores: &BTreeMap<String, GptScore>,
    embeddings: &EmbeddingStore,
) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = scores
        .iter()
        .filter(|(w, s)| w.as_str() != treated && embeddings.contains(w) && s.score.is_finite())
        .map(|(w, s)| (s.score.abs(), w.as_str()))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let n = scored.len().div_ceil(10);
    scored
        .into_iter()
        .take(n)
        .map(|(_, w)| w.to_string())
        .collect()
}

pub fn select_donors_untreated(
    treated: &str,
    scores: &BTreeMap<String, GptScore>,
    embeddings: &EmbeddingStore,
    pool_size: usize,
) -> Result<Vec<String>> {
    require_embedding(treated, embeddings)?;
    let candidates = untreated_candidates(treated, scores, embeddings);
    nearest(
        treated,
        candidates.iter().map(String::as_str),
        embeddings,
        pool_size,
    )
}

pub fn select_donors_synonym(
    treated: &str,
    embeddings: &EmbeddingStore,
    pool_size: usize,
) -> Result<Vec<String>> {
    require_embedding(treated, embeddings)?;
    nearest(treated, embeddings.words(), embeddings, pool_size)
}

/// Uniform sample of `pool_size` words from `vocab` without `treated`,
/// returned in lexicographic order.
pub fn select_donors_random(
    treated: &str,
    vocab: &BTreeSet<String>,
    pool_size: usize,
    seed: u64,
) -> Result<Vec<String>> {
    let candidates: Vec<&String> = vocab.iter().filter(|w| w.as_str() != treated).collect();
    if candidates.len() < pool_size {
        return Err(Error::Infeasible(format!(
            "{} donor candidates for '{treated}', {pool_size} requested",
            candidates.len()
        )));
    }
    let mut rng = substream(seed, "random-donors", 0);
    let mut picked: Vec<usize> =
        rand::seq::index::sample(&mut rng, candidates.len(), pool_size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| candidates[i].clone()).collect())
}

/// A treated series and the donor series its synthetic control is built from.
#[derive(Debug, Clone)]
pub struct DonorPool {
    treated: FrequencySeries,
    strategy: DonorStrategy,
    donors: Vec<FrequencySeries>,
}

impl DonorPool {
    pub fn new(
        treated: FrequencySeries,
        strategy: DonorStrategy,
        donors: Vec<FrequencySeries>,
        cap: usize,
    ) -> Result<Self> {
        if donors.is_empty() {
            return Err(Error::InvalidInput(format!(
                "donor pool for '{}' is empty",
                treated.word
            )));
        }
        if donors.len() > cap {
            return Err(Error::InvalidInput(format!(
                "donor pool for '{}' has {} words, cap is {cap}",
                treated.word,
                donors.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for d in &donors {
            if d.word == treated.word {
                return Err(Error::InvalidInput(format!(
                    "'{}' cannot be its own donor",
                    treated.word
                )));
            }
            if !seen.insert(d.word.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate donor '{}'", d.word)));
            }
            if d.window != treated.window {
                return Err(Error::DimensionMismatch(format!(
                    "donor '{}' covers {}..{}, treated '{}' covers {}..{}",
                    d.word,
                    d.window.start,
                    d.window.end,
                    treated.word,
                    treated.window.start,
                    treated.window.end
                )));
            }
        }
        Ok(DonorPool {
            treated,
            strategy,
            donors,
        })
    }

    /// Looks up the treated word and donors in a frequency store.
    pub fn from_store(
        store: &BTreeMap<String, FrequencySeries>,
        treated: &str,
        strategy: DonorStrategy,
        donor_words: &[String],
        cap: usize,
    ) -> Result<Self> {
        let lookup = |w: &str| {
            store
                .get(w)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("'{w}' is not in the frequency store")))
        };
        let treated = lookup(treated)?;
        let donors = donor_words
            .iter()
            .map(|w| lookup(w))
            .collect::<Result<Vec<_>>>()?;
        DonorPool::new(treated, strategy, donors, cap)
    }

    pub fn treated(&self) -> &FrequencySeries {
        &self.treated
    }

    pub fn strategy(&self) -> DonorStrategy {
        self.strategy
    }

    pub fn donors(&self) -> &[FrequencySeries] {
        &self.donors
    }

    pub fn window(&self) -> MonthWindow {
        self.treated.window
    }
}

/// Higher similarity first, ties by word.
fn rank_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::YearMonth;

    fn score(word: &str, s: f64) -> (String, GptScore) {
        (
            word.to_string(),
            GptScore {
                word: word.into(),
                score: s,
                interval: (s, s),
                n_samples: 1,
                n_cells: 1,
            },
        )
    }

    fn angle_store(words: &[(&str, f64)]) -> EmbeddingStore {
        EmbeddingStore::from_vectors(
            2,
            words
                .iter()
                .map(|(w, a)| (w.to_string(), vec![a.cos(), a.sin()])),
        )
        .unwrap()
    }

    #[test]
    fn synonym_order_matches_brute_force() {
        let store = angle_store(&[("delv", 0.0), ("dig", 0.3), ("probe", -0.1), ("cat", 2.0)]);
        let got = select_donors_synonym("delv", &store, 3).unwrap();
        assert_eq!(got, vec!["probe", "dig", "cat"]);
        // Brute force over all words.
        let mut brute: Vec<(f64, String)> = ["dig", "probe", "cat"]
            .iter()
            .map(|w| (store.cosine("delv", w).unwrap(), w.to_string()))
            .collect();
        brute.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        assert_eq!(got, brute.into_iter().map(|x| x.1).collect::<Vec<_>>());
        assert!(select_donors_synonym("delv", &store, 4).is_err());
        assert!(select_donors_synonym("missing", &store, 1).is_err());
    }

    #[test]
    fn synonym_excludes_treated_and_breaks_ties_by_word() {
        let store = angle_store(&[("t", 0.0), ("b", 0.5), ("a", -0.5), ("c", 1.0)]);
        let got = select_donors_synonym("t", &store, 2).unwrap();
        assert_eq!(got, vec!["a", "b"]);
        assert_eq!(rank_order((1.0, "a"), (1.0, "b")), Ordering::Less);
    }

    #[test]
    fn untreated_takes_lowest_tenth() {
        let words: Vec<String> = (0..1000).map(|i| format!("w{i:04}")).collect();
        let mut scores: BTreeMap<String, GptScore> = words
            .iter()
            .enumerate()
            .map(|(i, w)| score(w, (i as f64 - 500.0) / 100.0))
            .collect();
        scores.insert(score("treat", 5.0).0, score("treat", 5.0).1);
        let store = EmbeddingStore::from_vectors(
            2,
            words
                .iter()
                .chain(std::iter::once(&"treat".to_string()))
                .enumerate()
                .map(|(i, w)| (w.clone(), vec![1.0, i as f64 / 1000.0])),
        )
        .unwrap();
        let cand = untreated_candidates("treat", &scores, &store);
        assert_eq!(cand.len(), 100);
        assert!(cand.iter().all(|w| scores[w].score.abs() <= 0.5));
        let donors = select_donors_untreated("treat", &scores, &store, 20).unwrap();
        assert_eq!(donors.len(), 20);
        assert!(!donors.contains(&"treat".to_string()));
        assert!(donors.iter().all(|w| cand.contains(w)));
        assert!(select_donors_untreated("treat", &scores, &store, 101).is_err());
    }

    #[test]
    fn untreated_boundary_tie_is_lexicographic() {
        let mut scores: BTreeMap<String, GptScore> = BTreeMap::new();
        for (i, w) in ["k", "j", "i", "h", "g", "f", "e", "d", "c"]
            .iter()
            .enumerate()
        {
            let (k, v) = score(w, 1.0 + i as f64);
            scores.insert(k, v);
        }
        // Two words tie for the single slot at |score| = 0.5.
        for w in ["zz", "aa"] {
            let (k, v) = score(w, if w == "zz" { 0.5 } else { -0.5 });
            scores.insert(k, v);
        }
        let store =
            EmbeddingStore::from_vectors(1, scores.keys().map(|w| (w.clone(), vec![1.0]))).unwrap();
        assert_eq!(
            untreated_candidates("none", &scores, &store),
            vec!["aa", "zz"]
        );
        let store = store.restrict(|w| w != "k");
        assert_eq!(untreated_candidates("none", &scores, &store), vec!["aa"]);
    }

    #[test]
    fn random_is_seeded_and_excludes_treated() {
        let vocab: BTreeSet<String> = (0..50).map(|i| format!("w{i}")).collect();
        let a = select_donors_random("w3", &vocab, 10, 7).unwrap();
        let b = select_donors_random("w3", &vocab, 10, 7).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains(&"w3".to_string()));
        assert!(select_donors_random("w3", &vocab, 50, 7).is_err());
        assert!(select_donors_random("x", &vocab, 50, 7).is_ok());
    }

    #[test]
    fn random_inclusion_frequency_is_uniform() {
        let vocab: BTreeSet<String> = (0..40).map(|i| format!("w{i:02}")).collect();
        let pool = 10;
        let seeds = 10_000;
        let mut hits: BTreeMap<String, usize> = BTreeMap::new();
        for seed in 0..seeds {
            for w in select_donors_random("w00", &vocab, pool, seed).unwrap() {
                *hits.entry(w).or_default() += 1;
            }
        }
        // Each of the 39 eligible words appears with probability 10/39.
        let p = pool as f64 / 39.0;
        let se = (p * (1.0 - p) / seeds as f64).sqrt();
        assert_eq!(hits.len(), 39);
        for (w, h) in &hits {
            let freq = *h as f64 / seeds as f64;
            assert!((freq - p).abs() < 4.0 * se, "{w}: {freq} vs {p}");
        }
    }

    #[test]
    fn pool_validation() {
        let w = MonthWindow::new(
            YearMonth::new(2022, 1).unwrap(),
            YearMonth::new(2022, 3).unwrap(),
        )
        .unwrap();
        let w2 = MonthWindow::new(
            YearMonth::new(2022, 2).unwrap(),
            YearMonth::new(2022, 4).unwrap(),
        )
        .unwrap();
        let s = |name: &str, win| {
            FrequencySeries::from_counts(name, win, vec![5; 3], vec![1; 3]).unwrap()
        };
        let ok = DonorPool::new(
            s("t", w),
            DonorStrategy::Random,
            vec![s("a", w), s("b", w)],
            100,
        );
        assert!(ok.is_ok());
        assert!(DonorPool::new(s("t", w), DonorStrategy::Random, vec![s("t", w)], 100).is_err());
        assert!(DonorPool::new(s("t", w), DonorStrategy::Random, vec![s("a", w2)], 100).is_err());
        assert!(DonorPool::new(
            s("t", w),
            DonorStrategy::Random,
            vec![s("a", w), s("a", w)],
            100
        )
        .is_err());
        assert!(DonorPool::new(
            s("t", w),
            DonorStrategy::Random,
            vec![s("a", w), s("b", w)],
            1
        )
        .is_err());
        assert!(DonorPool::new(s("t", w), DonorStrategy::Random, vec![], 100).is_err());
        assert_eq!(
            "synonym".parse::<DonorStrategy>().unwrap(),
            DonorStrategy::Synonym
        );
        assert!("nearest".parse::<DonorStrategy>().is_err());
    }
}
