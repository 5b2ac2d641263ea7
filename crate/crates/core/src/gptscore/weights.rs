use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::CellKey;
use crate::error::{Error, Result};
use crate::rng::substream;

/// The (dataset, model, prompt) cells present in the data, indexed as a
/// dataset -> model -> prompt tree. Cells absent from the data (for example
/// a model whose edits all failed) are simply not part of the tree.
#[derive(Debug, Clone)]
pub struct WeightGrid {
    cells: Vec<CellKey>,
    /// For each dataset, for each model: indices into `cells`.
    tree: Vec<Vec<Vec<usize>>>,
}

/// One draw of mixing weights, aligned with [`WeightGrid::cells`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSample {
    pub weights: Vec<f64>,
}

impl WeightGrid {
    pub fn new(keys: impl IntoIterator<Item = CellKey>) -> Result<Self> {
        let mut nested: BTreeMap<String, BTreeMap<String, BTreeMap<String, ()>>> = BTreeMap::new();
        for k in keys {
            nested
                .entry(k.dataset)
                .or_default()
                .entry(k.model)
                .or_default()
                .insert(k.prompt, ());
        }
        if nested.is_empty() {
            return Err(Error::InvalidInput("weight grid has no cells".into()));
        }
        let mut cells = Vec::new();
        let mut tree = Vec::new();
        for (d, models) in nested {
            let mut by_model = Vec::new();
            for (m, prompts) in models {
                let mut idx = Vec::new();
                for p in prompts.into_keys() {
                    idx.push(cells.len());
                    cells.push(CellKey::new(d.clone(), m.clone(), p));
                }
                by_model.push(idx);
            }
            tree.push(by_model);
        }
        Ok(WeightGrid { cells, tree })
    }

    /// Cells in sorted key order.
    pub fn cells(&self) -> &[CellKey] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Draws P(D), then P(M | D) per dataset, then P(P | D, M) per
    /// (dataset, model), each from a flat Dirichlet, and multiplies them.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightSample {
        let mut weights = vec![0.0; self.cells.len()];
        let p_dataset = flat_dirichlet(rng, self.tree.len());
        for (models, pd) in self.tree.iter().zip(p_dataset) {
            let p_model = flat_dirichlet(rng, models.len());
            for (prompts, pm) in models.iter().zip(p_model) {
                let p_prompt = flat_dirichlet(rng, prompts.len());
                for (&i, pp) in prompts.iter().zip(p_prompt) {
                    weights[i] = pd * pm * pp;
                }
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        WeightSample { weights }
    }
}

/// Dirichlet(1, ..., 1) via normalized unit exponentials.
/// A single component is exactly 1.
fn flat_dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

pub fn sample_weight(grid: &WeightGrid, seed: u64) -> WeightSample {
    grid.sample(&mut substream(seed, "dirichlet-weights", 0))
}

/// `n` weight samples, sample `i` drawn from its own substream of `seed`.
pub fn sample_weights(grid: &WeightGrid, n: usize, seed: u64) -> Vec<WeightSample> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| grid.sample(&mut substream(seed, "dirichlet-weights", i)))
        .collect()
}
