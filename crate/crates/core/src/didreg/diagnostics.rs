//! Convergence diagnostics over equal-length chains. Each chain is split in
//! half so within-chain drift also inflates the statistics.

use crate::stats::{mean, variance};

fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .collect()
}

/// Returns `(W, var_plus)` for the split chains.
fn variance_components(halves: &[&[f64]]) -> (f64, f64) {
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let w = halves.iter().map(|c| variance(c)).sum::<f64>() / halves.len() as f64;
    let b = n * variance(&means);
    (w, (n - 1.0) / n * w + b / n)
}

fn usable(chains: &[Vec<f64>]) -> bool {
    !chains.is_empty() && chains[0].len() >= 4 && chains.iter().all(|c| c.len() == chains[0].len())
}

/// Split potential scale reduction factor. Constant draws give 1; chains of
/// unequal or insufficient length give NaN.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    if !usable(chains) {
        return f64::NAN;
    }
    let halves = split(chains);
    let (w, var_plus) = variance_components(&halves);
    if w == 0.0 {
        return if var_plus == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (var_plus / w).sqrt()
}

/// Effective sample size with Geyer's initial positive sequence over the
/// split chains' pooled autocorrelation.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    if !usable(chains) {
        return f64::NAN;
    }
    let halves = split(chains);
    let m = halves.len();
    let n = halves[0].len();
    let total = (m * n) as f64;
    let (w, var_plus) = variance_components(&halves);
    if w == 0.0 {
        return total;
    }
    let centered: Vec<Vec<f64>> = halves
        .iter()
        .map(|c| {
            let mu = mean(c);
            c.iter().map(|x| x - mu).collect()
        })
        .collect();
    // Autocovariance with the 1/n normalization, averaged over chains.
    let autocov = |lag: usize| -> f64 {
        centered
            .iter()
            .map(|c| (0..n - lag).map(|i| c[i] * c[i + lag]).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    let tau = (-1.0 + 2.0 * (rho(0) + sum)).max(1.0 / total.log10());
    total / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(seed: u64, m: usize, n: usize, shift: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|c| {
                (0..n)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        e + shift(c)
                    })
                    .collect::<Vec<f64>>()
            })
            .collect()
    }

    #[test]
    fn iid_chains_mix() {
        let chains = iid(1, 4, 1000, |_| 0.0);
        let r = split_rhat(&chains);
        assert!(r < 1.01, "{r}");
        let ess = effective_sample_size(&chains);
        assert!(ess > 3000.0 && ess < 5000.0, "{ess}");
    }

    #[test]
    fn separated_chains_flagged() {
        let chains = iid(2, 4, 1000, |c| c as f64);
        assert!(split_rhat(&chains) > 1.3);
    }

    #[test]
    fn autocorrelated_chain_has_low_ess() {
        // AR(1) with phi = 0.9: integrated autocorrelation time 19.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..5000)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = 0.9 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = effective_sample_size(&chains);
        let expected = 20_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.3, "{ess} vs {expected}");
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(split_rhat(&[vec![2.0; 10], vec![2.0; 10]]), 1.0);
        assert!(split_rhat(&[vec![1.0; 10], vec![2.0; 10]]).is_infinite());
        assert!(split_rhat(&[vec![1.0; 3]]).is_nan());
        assert!(split_rhat(&[vec![1.0; 10], vec![1.0; 9]]).is_nan());
    }
}
