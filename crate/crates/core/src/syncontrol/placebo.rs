use rayon::prelude::*;
use serde::Serialize;

use super::donors::DonorPool;
use super::fit::{event_index, synthesize_values};
use crate::error::{Error, Result};
use crate::month::YearMonth;

/// Fewest computable donor ratios for which a p-value of 0.05 is resolvable.
pub const MIN_PLACEBO_RATIOS: usize = 19;

/// Fake event dates precede the true one by these many months.
pub const IN_TIME_OFFSETS: [i64; 8] = [24, 21, 18, 15, 12, 9, 6, 3];

/// Fake dates leaving fewer pre-period months than this are skipped.
pub const MIN_IN_TIME_PRE_MONTHS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceboOutcome {
    pub treated_ratio: f64,
    /// Donor order as in the pool.
    pub donor_ratios: Vec<(String, f64)>,
    /// Donors whose placebo ratio was undefined.
    pub excluded: Vec<String>,
    pub p_value: f64,
}

/// `(1 + #{r >= treated_ratio}) / (N + 1)`.
pub fn placebo_p_value(treated_ratio: f64, donor_ratios: &[f64]) -> f64 {
    let at_least = donor_ratios.iter().filter(|&&r| r >= treated_ratio).count();
    (1 + at_least) as f64 / (donor_ratios.len() + 1) as f64
}

/// Ranks the treated MSPE ratio among placebo ratios of every donor, each
/// fit against the remaining donors.
pub fn placebo_test(pool: &DonorPool, event: YearMonth) -> Result<PlaceboOutcome> {
    let treated_fit = pool.fit(event)?;
    let treated_ratio = treated_fit.mspe.ratio.ok_or_else(|| {
        Error::Infeasible(format!(
            "treated '{}' fits its pre-period exactly; MSPE ratio undefined",
            pool.treated().word
        ))
    })?;
    let idx = event_index(pool.window(), event)?;
    let donors = pool.donors();
    let ratios: Vec<Option<f64>> = (0..donors.len())
        .into_par_iter()
        .map(|i| {
            let others: Vec<&[f64]> = donors
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, d)| d.log_rel_freq.as_slice())
                .collect();
            if others.is_empty() {
                return Ok(None);
            }
            synthesize_values(&donors[i].log_rel_freq, &others, idx)
                .map(|(_, _, m)| m.ratio)
                .map_err(|e| e.context(format!("placebo fit for donor '{}'", donors[i].word)))
        })
        .collect::<Result<_>>()?;
    let mut donor_ratios = Vec::new();
    let mut excluded = Vec::new();
    for (d, r) in donors.iter().zip(ratios) {
        match r {
            Some(r) => donor_ratios.push((d.word.clone(), r)),
            None => excluded.push(d.word.clone()),
        }
    }
    if donor_ratios.len() < MIN_PLACEBO_RATIOS {
        return Err(Error::Infeasible(format!(
            "only {} computable placebo ratios ({} excluded), need {MIN_PLACEBO_RATIOS}",
            donor_ratios.len(),
            excluded.len()
        )));
    }
    let values: Vec<f64> = donor_ratios.iter().map(|(_, r)| *r).collect();
    Ok(PlaceboOutcome {
        treated_ratio,
        p_value: placebo_p_value(treated_ratio, &values),
        donor_ratios,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FakeDateRatio {
    pub date: YearMonth,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InTimePlaceboResult {
    pub true_event: YearMonth,
    pub true_ratio: Option<f64>,
    /// Fake dates in ascending order.
    pub fakes: Vec<FakeDateRatio>,
    /// Fake dates skipped for leaving too short a pre-period.
    pub skipped: Vec<YearMonth>,
}

impl InTimePlaceboResult {
    /// True ratio strictly above every defined fake-date ratio.
    pub fn true_ratio_exceeds_fakes(&self) -> bool {
        let Some(t) = self.true_ratio else {
            return false;
        };
        self.fakes.iter().all(|f| f.ratio.is_none_or(|r| t > r))
    }
}

/// Refits the treated series with the event moved to each quarterly fake
/// date in the two years before `true_event`. Post periods always run to
/// the end of the window.
pub fn in_time_placebo(pool: &DonorPool, true_event: YearMonth) -> Result<InTimePlaceboResult> {
    let window = pool.window();
    let true_idx = event_index(window, true_event)?;
    if true_idx < IN_TIME_OFFSETS[0] as usize {
        return Err(Error::InvalidInput(format!(
            "window starting {} has fewer than 24 months before {true_event}",
            window.start
        )));
    }
    let treated = &pool.treated().log_rel_freq;
    let donors: Vec<&[f64]> = pool
        .donors()
        .iter()
        .map(|d| d.log_rel_freq.as_slice())
        .collect();
    let (mut fake_idx, skipped): (Vec<usize>, Vec<usize>) = IN_TIME_OFFSETS
        .iter()
        .map(|&o| true_idx - o as usize)
        .partition(|&i| i + 1 >= MIN_IN_TIME_PRE_MONTHS);
    fake_idx.sort_unstable();
    let mut indices = fake_idx.clone();
    indices.push(true_idx);
    let ratios: Vec<Option<f64>> = indices
        .par_iter()
        .map(|&i| synthesize_values(treated, &donors, i).map(|(_, _, m)| m.ratio))
        .collect::<Result<_>>()
        .map_err(|e| e.context(format!("in-time placebo for '{}'", pool.treated().word)))?;
    let at = |i: usize| window.start.offset(i as i64);
    Ok(InTimePlaceboResult {
        true_event,
        true_ratio: ratios[ratios.len() - 1],
        fakes: fake_idx
            .iter()
            .zip(&ratios)
            .map(|(&i, &ratio)| FakeDateRatio { date: at(i), ratio })
            .collect(),
        skipped: skipped.into_iter().map(at).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FrequencySeries;
    use crate::month::MonthWindow;
    use crate::syncontrol::DonorStrategy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_formula() {
        let donors: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(placebo_p_value(1000.0, &donors), 1.0 / 101.0);
        assert_eq!(placebo_p_value(-1.0, &donors), 1.0);
        assert_eq!(placebo_p_value(49.5, &donors), 51.0 / 101.0);
        // Ties count against the treated word.
        assert_eq!(placebo_p_value(99.0, &donors), 2.0 / 101.0);
    }

    fn window(months: i64) -> MonthWindow {
        let start = YearMonth::new(2019, 1).unwrap();
        MonthWindow::new(start, start.offset(months - 1)).unwrap()
    }

    fn noisy_pool(
        seed: u64,
        n_donors: usize,
        months: i64,
        effect_from: Option<usize>,
    ) -> DonorPool {
        let w = window(months);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10_000u64;
        let mut series = |name: String, shift: Option<usize>| {
            let counts: Vec<u64> = (0..months as usize)
                .map(|t| {
                    let mut p = 0.02 * (1.0 + 0.2 * rng.random_range(-1.0..1.0));
                    if let Some(s) = shift {
                        if t > s {
                            p *= 3.0;
                        }
                    }
                    (p * n as f64) as u64
                })
                .collect();
            FrequencySeries::from_counts(name, w, vec![n; months as usize], counts).unwrap()
        };
        let treated = series("treated".into(), effect_from);
        let donors = (0..n_donors)
            .map(|i| series(format!("d{i:03}"), None))
            .collect();
        DonorPool::new(treated, DonorStrategy::Random, donors, 100).unwrap()
    }

    #[test]
    fn strong_effect_ranks_first() {
        let pool = noisy_pool(1, 30, 48, Some(30));
        let event = pool.window().start.offset(30);
        let out = placebo_test(&pool, event).unwrap();
        assert_eq!(out.donor_ratios.len(), 30);
        assert_eq!(out.p_value, 1.0 / 31.0);
    }

    #[test]
    fn too_few_donors_is_an_error() {
        let pool = noisy_pool(2, 10, 48, Some(30));
        let event = pool.window().start.offset(30);
        assert!(placebo_test(&pool, event).is_err());
    }

    #[test]
    fn in_time_dates_and_skips() {
        let pool = noisy_pool(3, 20, 48, Some(30));
        let event = pool.window().start.offset(30);
        let out = in_time_placebo(&pool, event).unwrap();
        // Index 30 minus 24, 21 leaves 7 and 10 pre months: skipped.
        assert_eq!(out.skipped.len(), 2);
        assert_eq!(out.fakes.len(), 6);
        assert!(out.fakes.iter().all(|f| f.date < event));
        assert!(out
            .fakes
            .windows(2)
            .all(|p| p[1].date.months_until(p[0].date) == -3));
        assert!(out.true_ratio_exceeds_fakes());
        let short = pool.window().start.offset(20);
        assert!(in_time_placebo(&pool, short).is_err());
    }

    #[test]
    fn in_time_full_quarterly_grid() {
        let pool = noisy_pool(4, 20, 66, Some(47));
        let event = pool.window().start.offset(47);
        let out = in_time_placebo(&pool, event).unwrap();
        assert!(out.skipped.is_empty());
        let offsets: Vec<i64> = out
            .fakes
            .iter()
            .map(|f| f.date.months_until(event))
            .collect();
        assert_eq!(offsets, vec![24, 21, 18, 15, 12, 9, 6, 3]);
    }
}
