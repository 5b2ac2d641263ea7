//! One function per subcommand. Commands hand off through files in the
//! output directory; every output is fully computed before it is written.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lexshift_core::corpus::{
    count_documents, porter_stem, read_documents, read_frequency_csv, write_frequency_csv,
    FrequencySeries, Rejection, RejectionReason,
};
use lexshift_core::didreg::{
    build_paired_design, read_paired_csv, sample_posterior, summarize, write_draws_csv,
};
use lexshift_core::gptscore::{
    load_contrastive_dir, read_score_csv, score_vocabulary, vocabulary_filter, write_score_csv,
    GptScore,
};
use lexshift_core::rng::derive_seed;
use lexshift_core::simharness::{
    calibrate, evaluate_replicates, write_report_csv, AdoptionScenario,
};
use lexshift_core::syncontrol::{
    in_time_placebo, placebo_test, select_donors_random, select_donors_synonym,
    select_donors_untreated, write_in_time_csv, write_paired_csv, write_plot_csv,
    write_weights_csv, DonorPool, DonorStrategy, EmbeddingStore, FitSummary,
};
use lexshift_core::YearMonth;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{fail, CliError, CliResult};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| fail(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> lexshift_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Rejects words that cannot name an output directory.
fn check_word(word: &str) -> CliResult<()> {
    if word.is_empty() || !word.chars().all(char::is_alphanumeric) {
        return Err(fail(format!("'{word}' is not a valid stem")));
    }
    Ok(())
}

/// Runs `f` for every word in parallel, reports failures on stderr and
/// fails when any word failed. Successful results come back in input order.
fn for_each_word<T: Send>(
    words: &[String],
    f: impl Fn(&str) -> CliResult<T> + Sync,
) -> CliResult<Vec<(String, T)>> {
    let results: Vec<CliResult<T>> = words
        .par_iter()
        .map(|w| check_word(w).and_then(|()| f(w)))
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (w, r) in words.iter().zip(results) {
        match r {
            Ok(v) => ok.push((w.clone(), v)),
            Err(e) => {
                eprintln!("error: word '{w}': {e}");
                failed.push(w.as_str());
            }
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(fail(format!(
            "{} word(s) failed: {}",
            failed.len(),
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct MonthCount {
    month: YearMonth,
    documents: u64,
}

#[derive(Serialize)]
struct IngestReport<'a> {
    window_start: YearMonth,
    window_end: YearMonth,
    records_read: usize,
    documents_kept: usize,
    documents_rejected: usize,
    rejected_by_reason: BTreeMap<&'static str, usize>,
    rejections: &'a [Rejection],
    min_word_docs: u64,
    vocabulary_size: usize,
    documents_per_month: Vec<MonthCount>,
    empty_months: Vec<YearMonth>,
}

fn reason_label(r: RejectionReason) -> &'static str {
    match r {
        RejectionReason::BadTimestamp => "bad_timestamp",
        RejectionReason::OutOfWindow => "out_of_window",
        RejectionReason::DuplicateId => "duplicate_id",
    }
}

/// Writes `frequency.csv` and `ingest_report.json`.
pub fn ingest(cfg: &RunConfig) -> CliResult<()> {
    let pre = cfg.preprocess()?;
    let outcome = read_documents(&cfg.corpus, cfg.window)?;
    if !outcome.malformed.is_empty() {
        for (line, msg) in &outcome.malformed {
            eprintln!("error: {}:{line}: {msg}", cfg.corpus.display());
        }
        return Err(fail(format!(
            "{} malformed record(s) in {}; nothing written",
            outcome.malformed.len(),
            cfg.corpus.display()
        )));
    }
    if outcome.documents.is_empty() {
        return Err(fail(format!(
            "no usable documents in {}",
            cfg.corpus.display()
        )));
    }
    let counts = count_documents(&outcome.documents, cfg.window, &pre);
    let vocab = counts.stems_with_support(cfg.min_word_docs);
    if vocab.is_empty() {
        return Err(fail(format!(
            "no stem appears in {} or more documents",
            cfg.min_word_docs
        )));
    }
    let series: BTreeMap<String, FrequencySeries> = vocab
        .iter()
        .map(|w| (w.clone(), counts.series(w)))
        .collect();

    let mut by_reason = BTreeMap::new();
    for r in &outcome.rejected {
        *by_reason.entry(reason_label(r.reason)).or_insert(0) += 1;
    }
    let per_month: Vec<MonthCount> = cfg
        .window
        .months()
        .zip(counts.doc_count())
        .map(|(month, &documents)| MonthCount { month, documents })
        .collect();
    let report = IngestReport {
        window_start: cfg.window.start,
        window_end: cfg.window.end,
        records_read: outcome.documents.len() + outcome.rejected.len(),
        documents_kept: outcome.documents.len(),
        documents_rejected: outcome.rejected.len(),
        rejected_by_reason: by_reason,
        rejections: &outcome.rejected,
        min_word_docs: cfg.min_word_docs,
        vocabulary_size: vocab.len(),
        empty_months: per_month
            .iter()
            .filter(|m| m.documents == 0)
            .map(|m| m.month)
            .collect(),
        documents_per_month: per_month,
    };
    let freq = csv_bytes(|b| write_frequency_csv(b, &series))?;
    let report_bytes = json_bytes(&report)?;
    write_file(&cfg.frequency_csv(), &freq)?;
    write_file(&cfg.output_dir.join("ingest_report.json"), &report_bytes)?;
    println!(
        "ingest: kept {} of {} records, {} stems",
        report.documents_kept,
        report.records_read,
        vocab.len()
    );
    Ok(())
}

/// Writes `scores.csv` and prints the top-k table.
pub fn score(cfg: &RunConfig) -> CliResult<()> {
    let pre = cfg.preprocess()?;
    let (cells, errors) = load_contrastive_dir(&cfg.contrastive_dir, &pre)?;
    for e in &errors {
        eprintln!("warning: cell {} unreadable: {}", e.cell, e.error);
    }
    if cells.is_empty() {
        return Err(fail(format!(
            "no readable contrastive cells in {} ({} failed)",
            cfg.contrastive_dir.display(),
            errors.len()
        )));
    }
    let vocab = vocabulary_filter(&cells, cfg.vocab_threshold);
    let seed = derive_seed(cfg.seed, "gpt-score", 0);
    let (scores, dropped) = score_vocabulary(&cells, &vocab, cfg.n_samples, seed)?;
    if !dropped.is_empty() {
        eprintln!("warning: {} word(s) dropped:", dropped.len());
        for (w, e) in &dropped {
            eprintln!("  {w}: {e}");
        }
    }
    let bytes = csv_bytes(|b| write_score_csv(b, &scores))?;
    write_file(&cfg.scores_csv(), &bytes)?;
    println!(
        "{:>4}  {:<20} {:>9} {:>9} {:>9}",
        "rank", "word", "score", "lo95", "hi95"
    );
    for (i, s) in scores.iter().take(cfg.top_k).enumerate() {
        println!(
            "{:>4}  {:<20} {:>9.4} {:>9.4} {:>9.4}",
            i + 1,
            s.word,
            s.score,
            s.interval.0,
            s.interval.1
        );
    }
    Ok(())
}

/// Embeddings keyed like the frequency store.
fn load_embeddings(
    cfg: &RunConfig,
    store: &BTreeMap<String, FrequencySeries>,
) -> CliResult<EmbeddingStore> {
    let raw = EmbeddingStore::load(&cfg.embeddings)?;
    let keyed = if cfg.stem_embeddings {
        raw.rekey(porter_stem)
    } else {
        raw
    };
    Ok(keyed.restrict(|w| store.contains_key(w)))
}

fn read_scores(cfg: &RunConfig) -> CliResult<BTreeMap<String, GptScore>> {
    let path = cfg.scores_csv();
    read_score_csv(&path).map_err(|e| fail(format!("{e} (run `score` first)")))
}

fn read_store(cfg: &RunConfig) -> CliResult<BTreeMap<String, FrequencySeries>> {
    let path = cfg.frequency_csv();
    let store = read_frequency_csv(&path).map_err(|e| fail(format!("{e} (run `ingest` first)")))?;
    if let Some(s) = store.values().next() {
        if s.window != cfg.window {
            return Err(fail(format!(
                "{} covers {}..{}, config window is {}..{}",
                path.display(),
                s.window.start,
                s.window.end,
                cfg.window.start,
                cfg.window.end
            )));
        }
    }
    Ok(store)
}

/// The `--word` list, or the top-k scored words that have a frequency series.
fn synth_words(
    cfg: &RunConfig,
    words: &[String],
    scores: Option<&BTreeMap<String, GptScore>>,
    store: &BTreeMap<String, FrequencySeries>,
) -> CliResult<Vec<String>> {
    if !words.is_empty() {
        return Ok(words.to_vec());
    }
    let owned;
    let scores = match scores {
        Some(s) => s,
        None => {
            owned = read_scores(cfg)?;
            &owned
        }
    };
    let mut ranked: Vec<&GptScore> = scores
        .values()
        .filter(|s| store.contains_key(&s.word))
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.word.cmp(&b.word))
    });
    let picked: Vec<String> = ranked
        .into_iter()
        .take(cfg.top_k)
        .map(|s| s.word.clone())
        .collect();
    if picked.is_empty() {
        return Err(fail("no scored word has a frequency series; pass --word"));
    }
    Ok(picked)
}

/// Words with a `words/<w>` directory, for commands run without `--word`.
fn fitted_words(cfg: &RunConfig, words: &[String]) -> CliResult<Vec<String>> {
    if !words.is_empty() {
        return Ok(words.to_vec());
    }
    let dir = cfg.output_dir.join("words");
    let mut found: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| fail(format!("{}: {e} (run `synth` first)", dir.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(fail(format!("no fitted words under {}", dir.display())));
    }
    Ok(found)
}

/// Writes `weights.csv`, `plot.csv`, `paired.csv` and `summary.json` per word.
pub fn synth(cfg: &RunConfig, words: &[String]) -> CliResult<()> {
    let store = read_store(cfg)?;
    let scores = match cfg.strategy {
        DonorStrategy::Untreated => Some(read_scores(cfg)?),
        _ => None,
    };
    let embeddings = match cfg.strategy {
        DonorStrategy::Random => None,
        _ => Some(load_embeddings(cfg, &store)?),
    };
    let words = synth_words(cfg, words, scores.as_ref(), &store)?;
    let vocab: BTreeSet<String> = store.keys().cloned().collect();
    let fitted = for_each_word(&words, |word| {
        if !store.contains_key(word) {
            return Err(fail(format!("'{word}' is not in the frequency store")));
        }
        let donors = match cfg.strategy {
            DonorStrategy::Untreated => select_donors_untreated(
                word,
                scores.as_ref().expect("loaded for this strategy"),
                embeddings.as_ref().expect("loaded for this strategy"),
                cfg.pool_size,
            )?,
            DonorStrategy::Synonym => select_donors_synonym(
                word,
                embeddings.as_ref().expect("loaded for this strategy"),
                cfg.pool_size,
            )?,
            DonorStrategy::Random => {
                let seed = derive_seed(cfg.seed, &format!("donors:{word}"), 0);
                select_donors_random(word, &vocab, cfg.pool_size, seed)?
            }
        };
        let pool = DonorPool::from_store(&store, word, cfg.strategy, &donors, cfg.pool_cap)?;
        let fit = pool.fit(cfg.event)?;
        let dir = cfg.word_dir(word);
        let weights = csv_bytes(|b| write_weights_csv(b, &fit))?;
        let plot = csv_bytes(|b| write_plot_csv(b, &fit))?;
        let paired = csv_bytes(|b| write_paired_csv(b, &fit))?;
        let summary = json_bytes(&FitSummary::from_fit(&fit, None))?;
        write_file(&dir.join("weights.csv"), &weights)?;
        write_file(&dir.join("plot.csv"), &plot)?;
        write_file(&dir.join("paired.csv"), &paired)?;
        write_file(&dir.join("summary.json"), &summary)?;
        Ok(fit)
    })?;
    for (word, fit) in fitted {
        let ratio = fit
            .mspe
            .ratio
            .map_or("undefined".to_string(), |r| format!("{r:.4}"));
        println!(
            "synth: {word} pre_mspe={:.3e} ratio={ratio}",
            fit.mspe.pre_mspe
        );
    }
    Ok(())
}

/// Rebuilds the pool recorded in `weights.csv`.
fn stored_pool(
    cfg: &RunConfig,
    store: &BTreeMap<String, FrequencySeries>,
    word: &str,
) -> CliResult<DonorPool> {
    let path = cfg.word_dir(word).join("weights.csv");
    let mut rdr = csv::Reader::from_path(&path)
        .map_err(|e| fail(format!("{}: {e} (run `synth` first)", path.display())))?;
    let donors = rdr
        .records()
        .map(|r| r.map(|rec| rec.get(0).unwrap_or_default().to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| fail(format!("{}: {e}", path.display())))?;
    Ok(DonorPool::from_store(
        store,
        word,
        cfg.strategy,
        &donors,
        cfg.pool_cap,
    )?)
}

fn placebo_csv(
    outcome: &lexshift_core::syncontrol::PlaceboOutcome,
    word: &str,
) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let err = |e: csv::Error| CliError(e.to_string());
    w.write_record(["word", "kind", "ratio"]).map_err(err)?;
    w.serialize((word, "treated", Some(outcome.treated_ratio)))
        .map_err(err)?;
    for (d, r) in &outcome.donor_ratios {
        w.serialize((d, "donor", Some(r))).map_err(err)?;
    }
    for d in &outcome.excluded {
        w.serialize((d, "excluded", None::<f64>)).map_err(err)?;
    }
    w.into_inner().map_err(|e| fail(e.to_string()))
}

/// Writes `placebo_ratios.csv` and adds the p-value to `summary.json`.
pub fn placebo(cfg: &RunConfig, words: &[String]) -> CliResult<()> {
    let store = read_store(cfg)?;
    let words = fitted_words(cfg, words)?;
    let done = for_each_word(&words, |word| {
        let pool = stored_pool(cfg, &store, word)?;
        let fit = pool.fit(cfg.event)?;
        let outcome = placebo_test(&pool, cfg.event)?;
        let dir = cfg.word_dir(word);
        let ratios = placebo_csv(&outcome, word)?;
        let summary = json_bytes(&FitSummary::from_fit(&fit, Some(outcome.p_value)))?;
        write_file(&dir.join("placebo_ratios.csv"), &ratios)?;
        write_file(&dir.join("summary.json"), &summary)?;
        Ok(outcome)
    })?;
    for (word, o) in done {
        println!(
            "placebo: {word} ratio={:.4} donors={} p={:.3}",
            o.treated_ratio,
            o.donor_ratios.len(),
            o.p_value
        );
    }
    Ok(())
}

/// Writes `intime.csv` and `intime.json`.
pub fn intime(cfg: &RunConfig, words: &[String]) -> CliResult<()> {
    let store = read_store(cfg)?;
    let words = fitted_words(cfg, words)?;
    let done = for_each_word(&words, |word| {
        let pool = stored_pool(cfg, &store, word)?;
        let result = in_time_placebo(&pool, cfg.event)?;
        let dir = cfg.word_dir(word);
        let table = csv_bytes(|b| write_in_time_csv(b, &result))?;
        let json = json_bytes(&result)?;
        write_file(&dir.join("intime.csv"), &table)?;
        write_file(&dir.join("intime.json"), &json)?;
        Ok(result)
    })?;
    for (word, r) in done {
        println!(
            "intime: {word} {} fake dates, true ratio exceeds all: {}",
            r.fakes.len(),
            r.true_ratio_exceeds_fakes()
        );
    }
    Ok(())
}

/// Writes `did_summary.json` and `did_draws.csv` from `paired.csv`.
pub fn did(cfg: &RunConfig, words: &[String]) -> CliResult<()> {
    let words = fitted_words(cfg, words)?;
    let done = for_each_word(&words, |word| {
        let dir = cfg.word_dir(word);
        let path = dir.join("paired.csv");
        let paired =
            read_paired_csv(&path).map_err(|e| fail(format!("{e} (run `synth` first)")))?;
        let design = build_paired_design(&paired, cfg.event, cfg.mode)?;
        let seed = derive_seed(cfg.seed, &format!("did:{word}"), 0);
        let post = sample_posterior(&design, &cfg.prior, &cfg.sampler(seed))?;
        let summary = summarize(&post);
        let draws = csv_bytes(|b| write_draws_csv(b, &post))?;
        let json = json_bytes(&summary)?;
        write_file(&dir.join("did_draws.csv"), &draws)?;
        write_file(&dir.join("did_summary.json"), &json)?;
        Ok(summary)
    })?;
    for (word, s) in done {
        for w in &s.warnings {
            eprintln!("warning: word '{word}': {w}");
        }
        let g = s.param("beta_gpt_post").expect("parameter exists");
        let pct = &s.beta_gpt_post_annual_pct_change;
        println!(
            "did: {word} beta_gpt_post mean={:.4} hdi95=[{:.4}, {:.4}] annual change {:+.1}% [{:+.1}%, {:+.1}%]",
            g.mean, g.hdi95.0, g.hdi95.1, pct.mean, pct.hdi95.0, pct.hdi95.1
        );
    }
    Ok(())
}

/// Writes `simulation_report.csv` and `calibration.json` into `out`.
pub fn simulate(scenario_path: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut scenario = AdoptionScenario::load(scenario_path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let reports = evaluate_replicates(&scenario)?;
    let cal = calibrate(&reports)?;
    let table = csv_bytes(|b| write_report_csv(b, &reports))?;
    let json = json_bytes(&cal)?;
    write_file(&out.join("simulation_report.csv"), &table)?;
    write_file(&out.join("calibration.json"), &json)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "simulate: {} reports, rejection rate {:.3}, KS p {:.3}, HDI coverage {:.3}, max |error| {:.4}, max R-hat {:.4}",
        cal.n_reports,
        cal.rejection_rate,
        cal.placebo_ks_p_value,
        cal.hdi_coverage,
        cal.max_abs_error,
        cal.max_rhat
    )?;
    Ok(())
}

/// Default output directory when no config is given.
pub fn default_out() -> PathBuf {
    PathBuf::from("out")
}
