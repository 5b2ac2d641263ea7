//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles here are written independently of the library code.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lexshift_core::corpus::porter_stem;
use lexshift_core::didreg::{
    build_design, sample_posterior, DesignMode, DidDataset, Observation, PriorSpec, SamplerConfig,
    RHAT_WARN,
};
use lexshift_core::gptscore::{
    compute_lor, gpt_score, load_contrastive_dir, CellKey, ContrastiveCell,
};
use lexshift_core::simharness::{
    calibrate, evaluate_pipeline, evaluate_replicates, AdoptionScenario, WordReport,
};
use lexshift_core::syncontrol::{fit_simplex, placebo_p_value};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Brute-force LOR: count containing documents in the raw stem files and
/// apply the closed form with add-one smoothing.
fn oracle_lor(dir: &Path, cell: &str, word: &str) -> f64 {
    let prob = |side: &str| {
        let text = std::fs::read_to_string(dir.join(format!("{cell}.{side}.stems"))).unwrap();
        let docs: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let k = docs
            .iter()
            .filter(|d| d.split_whitespace().any(|t| t == word))
            .count();
        (k as f64 + 1.0) / (docs.len() as f64 + 1.0)
    };
    let logit = |p: f64| p.ln() - (1.0 - p).ln();
    logit(prob("edited")) - logit(prob("human"))
}

fn criterion_1() -> Outcome {
    let dir = fixtures().join("lor");
    let start = Instant::now();
    let (cells, errors) =
        load_contrastive_dir(&dir, &lexshift_core::corpus::PreprocessConfig::default()).unwrap();
    if !errors.is_empty() || cells.len() != 2 {
        return outcome(
            false,
            format!("{} cells loaded, {} errors", cells.len(), errors.len()),
        );
    }
    let mut vocab = BTreeSet::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        vocab.extend(text.split_whitespace().map(str::to_string));
    }
    let mut max_diff: f64 = 0.0;
    let mut compared = 0;
    for cell in &cells {
        if cell.len() != 10 {
            return outcome(false, format!("cell {} has {} pairs", cell.key, cell.len()));
        }
        for w in &vocab {
            let got = match compute_lor(cell, w) {
                Ok(v) => v,
                Err(e) => return outcome(false, format!("{w} in {}: {e}", cell.key)),
            };
            max_diff = max_diff.max((got - oracle_lor(&dir, &cell.key.to_string(), w)).abs());
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        max_diff <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("{compared} word-cell pairs, max |diff| {max_diff:.2e}, {elapsed:.2?}"),
    )
}

type Pair = (Option<BTreeSet<String>>, Option<BTreeSet<String>>);

fn docs(spec: &[(usize, bool)]) -> Vec<Pair> {
    spec.iter()
        .map(|&(i, has)| {
            let mut human: BTreeSet<String> = [format!("filler{i}")].into();
            let mut edited = human.clone();
            if has {
                edited.insert("delv".into());
            }
            if i % 3 == 0 {
                human.insert("delv".into());
            }
            (Some(human), Some(edited))
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let spec: Vec<(usize, bool)> = (0..12).map(|i| (i, i % 2 == 0)).collect();
    let cell = |d: &str| {
        ContrastiveCell::from_pairs(CellKey::new(d, "gpt", "polish"), docs(&spec)).unwrap()
    };
    let single = [cell("a")];
    let lor = compute_lor(&single[0], "delv").unwrap();
    let one = gpt_score("delv", &single, 200, 1).unwrap();
    let pair = [cell("a"), cell("b")];
    let two = gpt_score("delv", &pair, 200, 1).unwrap();
    let exact = |s: &lexshift_core::gptscore::GptScore| {
        s.score == lor && s.interval.0 == lor && s.interval.1 == lor
    };
    outcome(
        exact(&one) && exact(&two),
        format!(
            "lor {lor:.6}; single cell score {} [{}, {}]; equal-probability pair score {} [{}, {}]",
            one.score, one.interval.0, one.interval.1, two.score, two.interval.0, two.interval.1
        ),
    )
}

/// Minimizes the objective over `w a + (1 - w) b` on a 1e-4 grid, then on a
/// 1e-8 grid around the best coarse point.
fn grid_oracle(y: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let obj = |w: f64| -> f64 {
        y.iter()
            .zip(a.iter().zip(b))
            .map(|(yt, (at, bt))| (yt - w * at - (1.0 - w) * bt).powi(2))
            .sum()
    };
    let scan = |lo: f64, step: f64, n: usize| {
        (0..=n)
            .map(|i| (lo + i as f64 * step).clamp(0.0, 1.0))
            .map(|w| (w, obj(w)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
    };
    let (w0, _) = scan(0.0, 1e-4, 10_000);
    scan(w0 - 1e-4, 1e-8, 20_000)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (t_len, n_donors) = (48, 100);
    let noise = Normal::new(0.0, 1e-6).unwrap();
    let mut worst_w: f64 = 0.0;
    let mut worst_obj: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for _ in 0..5 {
        let x = DMatrix::from_fn(t_len, n_donors, |_, _| {
            -2.0 + 0.3 * rng.sample::<f64, _>(StandardNormal)
        });
        let (ia, ib) = (17, 61);
        let y: Vec<f64> = (0..t_len)
            .map(|t| 0.3 * x[(t, ia)] + 0.7 * x[(t, ib)] + noise.sample(&mut rng))
            .collect();
        let start = Instant::now();
        let fit = fit_simplex(&y, &x).unwrap();
        slowest = slowest.max(start.elapsed());
        let mut expected = vec![0.0; n_donors];
        expected[ia] = 0.3;
        expected[ib] = 0.7;
        let dev = fit
            .weights
            .iter()
            .zip(&expected)
            .map(|(w, e)| (w - e).abs())
            .fold(0.0, f64::max);
        worst_w = worst_w.max(dev);
        let col = |j: usize| x.column(j).iter().copied().collect::<Vec<f64>>();
        let (_, grid_obj) = grid_oracle(&y, &col(ia), &col(ib));
        worst_obj = worst_obj.max((fit.objective - grid_obj).abs());
    }
    outcome(
        worst_w <= 1e-3 && worst_obj <= 1e-8 && slowest < Duration::from_secs(1),
        format!(
            "5 fits at {n_donors}x{t_len}: max weight error {worst_w:.2e}, max objective gap {worst_obj:.2e}, slowest {slowest:.2?}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let scenario = AdoptionScenario {
        seed: 4,
        effect: 0.0,
        n_null_words: 99,
        pool_size: 99,
        replicates: 200,
        // Only the placebo p-values matter here; keep the DiD stage light.
        chains: 2,
        draws_per_chain: 200,
        warmup: 200,
        ..Default::default()
    };
    let start = Instant::now();
    let reports = evaluate_replicates(&scenario).unwrap();
    let elapsed = start.elapsed();
    let cal = calibrate(&reports).unwrap();
    outcome(
        cal.placebo_ks_p_value > 0.01
            && (0.02..=0.09).contains(&cal.rejection_rate)
            && elapsed < Duration::from_secs(300),
        format!(
            "{} replicates: KS D {:.4} p {:.4}, rejection rate {:.3}, {elapsed:.1?}",
            cal.n_reports, cal.placebo_ks_statistic, cal.placebo_ks_p_value, cal.rejection_rate
        ),
    )
}

fn recovery_reports() -> (Vec<WordReport>, Duration) {
    let scenario = AdoptionScenario {
        seed: 5,
        n_months_pre: 48,
        n_months_post: 18,
        effect: 0.15,
        slope: 0.02,
        post_slope: -0.01,
        noise_sd: 0.05,
        replicates: 100,
        ..Default::default()
    };
    let start = Instant::now();
    let reports = evaluate_replicates(&scenario).unwrap();
    (reports, start.elapsed())
}

fn criterion_5(reports: &[WordReport], elapsed: Duration) -> Outcome {
    let worst = reports
        .iter()
        .map(|r| (r.effect_mean - r.true_effect).abs())
        .fold(0.0, f64::max);
    let covered = reports.iter().filter(|r| r.covered).count();
    let max_rhat = reports.iter().map(|r| r.max_rhat).fold(0.0, f64::max);
    outcome(
        reports.len() == 100
            && worst <= 0.05
            && covered >= 90
            && max_rhat < RHAT_WARN
            && elapsed < Duration::from_secs(600),
        format!(
            "{} replicates: max |mean - truth| {worst:.4}, HDI coverage {covered}/100, max R-hat {max_rhat:.4}, {elapsed:.1?}",
            reports.len()
        ),
    )
}

/// Normal equations solved by Cholesky, independent of the sampler.
fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    xtx.cholesky().expect("full rank").solve(&xty)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let prior = PriorSpec {
        coef_prior_scale: 1e6,
        sigma_prior_scale: 1e3,
    };
    let mut worst: f64 = 0.0;
    for design_i in 0..20 {
        let n_months = rng.random_range(30..=80);
        let event_i = rng.random_range(8..n_months - 8);
        let t_event = event_i as f64 / 12.0;
        let coef: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let sigma = rng.random_range(0.02..0.2);
        let mut obs = Vec::new();
        let mut rows = Vec::new();
        for gpt in [true, false] {
            for i in 0..n_months {
                let t = i as f64 / 12.0;
                let post = t > t_event;
                let h = if post { t - t_event } else { 0.0 };
                let row = [1.0, t, h, if gpt { h } else { 0.0 }];
                let mean: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
                let y = mean + sigma * rng.sample::<f64, _>(StandardNormal);
                obs.push(Observation {
                    t,
                    d_post: post,
                    d_gpt: gpt,
                    y,
                });
                rows.push((row, y));
            }
        }
        let x = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i].0[j]);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let truth = ols(&x, &y);
        let dataset = DidDataset::from_observations(obs, t_event).unwrap();
        let design = build_design(dataset, DesignMode::Hinge);
        let post = sample_posterior(&design, &prior, &SamplerConfig::new(design_i)).unwrap();
        for p in 0..4 {
            worst = worst.max((post.mean(p) - truth[p]).abs());
        }
    }
    outcome(
        worst <= 1e-2,
        format!("20 designs: max |posterior mean - OLS| {worst:.2e}"),
    )
}

fn criterion_7(reports: &[WordReport]) -> Outcome {
    let hits = reports
        .iter()
        .filter(|r| r.true_ratio_exceeds_fakes == Some(true))
        .count();
    let evaluated = reports
        .iter()
        .filter(|r| r.true_ratio_exceeds_fakes.is_some())
        .count();
    outcome(
        evaluated == 100 && hits >= 80,
        format!("true date above all 8 fake dates in {hits}/{evaluated} replicates"),
    )
}

fn criterion_8() -> Outcome {
    let p = placebo_p_value(5.0, &[1.0; 100]);
    let exact = p == 1.0 / 101.0;
    let printed = format!("{p:.3}");
    let scenario = AdoptionScenario {
        seed: 8,
        n_null_words: 100,
        pool_size: 100,
        effect: 0.5,
        noise_sd: 0.02,
        chains: 2,
        draws_per_chain: 200,
        warmup: 200,
        ..Default::default()
    };
    let sim = &evaluate_pipeline(&scenario).unwrap()[0];
    outcome(
        exact && printed == "0.010" && sim.n_placebo == 100 && sim.placebo_p == 1.0 / 101.0,
        format!(
            "p = {p} prints as {printed}; simulated rank-1 word: {} donors, p = {}",
            sim.n_placebo, sim.placebo_p
        ),
    )
}

fn criterion_9() -> Outcome {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/porter_reference.txt");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut total = 0;
    let mut mismatches = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (word, expected) = line.split_once(' ').unwrap();
        total += 1;
        let got = porter_stem(word);
        if got != expected.trim() {
            mismatches.push(format!("{word} -> {got} (expected {expected})"));
        }
    }
    let running = porter_stem("running");
    outcome(
        mismatches.is_empty() && running == "run" && total > 10_000,
        format!(
            "{total} pairs, {} mismatches, running -> {running}{}",
            mismatches.len(),
            mismatches
                .first()
                .map(|m| format!("; first: {m}"))
                .unwrap_or_default()
        ),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixtures().join("config.toml");
    let start = Instant::now();
    let mut trees = Vec::new();
    for run in ["first", "second"] {
        let out = tmp.path().join(run);
        for cmd in ["ingest", "score", "synth", "placebo", "did"] {
            let o = Command::new(env!("CARGO_BIN_EXE_lexshift"))
                .args([cmd, "--config"])
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            if !o.status.success() {
                return outcome(
                    false,
                    format!(
                        "{run} run, {cmd} failed: {}",
                        String::from_utf8_lossy(&o.stderr)
                    ),
                );
            }
        }
        trees.push(read_tree(&out));
    }
    let elapsed = start.elapsed();
    let files = trees[0].len();
    let differing: Vec<String> = trees[0]
        .iter()
        .filter(|(p, bytes)| trees[1].get(*p) != Some(bytes))
        .map(|(p, _)| p.display().to_string())
        .collect();
    outcome(
        files > 0
            && trees[0].len() == trees[1].len()
            && differing.is_empty()
            && elapsed < Duration::from_secs(60),
        format!(
            "two runs, {files} files each, {} differing, {elapsed:.1?} total",
            differing.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "LOR oracle equivalence", criterion_1()),
        (2, "GPT-score degeneracy", criterion_2()),
        (3, "simplex recovery", criterion_3()),
        (4, "placebo calibration", criterion_4()),
    ];
    let (reports, elapsed) = recovery_reports();
    results.push((5, "DiD effect recovery", criterion_5(&reports, elapsed)));
    results.push((6, "sampler correctness", criterion_6()));
    results.push((7, "in-time placebo specificity", criterion_7(&reports)));
    results.push((8, "rank formula", criterion_8()));
    results.push((9, "stemmer conformance", criterion_9()));
    results.push((10, "end-to-end determinism", criterion_10()));
    let mut failed = 0;
    for (n, name, o) in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {status} {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
