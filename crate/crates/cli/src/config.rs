//! Run configuration: a flat TOML file whose relative paths resolve against
//! the file's own directory.

use std::path::{Path, PathBuf};

use lexshift_core::corpus::PreprocessConfig;
use lexshift_core::didreg::{DesignMode, PriorSpec, SamplerConfig};
use lexshift_core::gptscore::{DEFAULT_SAMPLES, DEFAULT_VOCAB_THRESHOLD};
use lexshift_core::syncontrol::{DonorStrategy, DEFAULT_POOL_CAP, DEFAULT_POOL_SIZE};
use lexshift_core::{MonthWindow, YearMonth};
use serde::Deserialize;

use crate::error::{fail, CliResult};

/// Every key, with its default.
pub const DOCUMENTED_DEFAULTS: &str = r#"# Input corpus: JSON lines {id, timestamp, category?, text}, optionally gzipped.
corpus = "corpus.jsonl"
# word2vec text embeddings; required by the untreated and synonym strategies.
embeddings = "embeddings.txt"
# Directory of <dataset>__<model>__<prompt>.{human,edited}.txt pairs.
contrastive_dir = "contrastive"
output_dir = "out"
# Optional stopword file, one word per line (defaults to the bundled English list).
# stopwords = "stopwords.txt"
min_token_length = 3
# Stem embedding words so they match corpus stems.
stem_embeddings = true
window_start = "2018-12"
window_end = "2024-05"
# The event month is the last pre-treatment month.
event_date = "2022-11-30"
# Words need this many containing documents to get a frequency series.
min_word_docs = 5
vocab_threshold = 0.001
n_samples = 1000
top_k = 10
strategy = "untreated"
pool_size = 100
pool_cap = 100
mode = "hinge"
coef_prior_scale = 10.0
sigma_prior_scale = 1.0
chains = 4
draws_per_chain = 1000
warmup = 1000
seed = 0
"#;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    corpus: PathBuf,
    embeddings: PathBuf,
    contrastive_dir: PathBuf,
    output_dir: PathBuf,
    stopwords: Option<PathBuf>,
    min_token_length: usize,
    stem_embeddings: bool,
    window_start: String,
    window_end: String,
    event_date: String,
    min_word_docs: u64,
    vocab_threshold: f64,
    n_samples: usize,
    top_k: usize,
    strategy: String,
    pool_size: usize,
    pool_cap: usize,
    mode: String,
    coef_prior_scale: f64,
    sigma_prior_scale: f64,
    chains: usize,
    draws_per_chain: usize,
    warmup: usize,
    seed: u64,
}

impl Default for RawConfig {
    fn default() -> Self {
        let prior = PriorSpec::default();
        let sampler = SamplerConfig::new(0);
        RawConfig {
            corpus: "corpus.jsonl".into(),
            embeddings: "embeddings.txt".into(),
            contrastive_dir: "contrastive".into(),
            output_dir: "out".into(),
            stopwords: None,
            min_token_length: 3,
            stem_embeddings: true,
            window_start: "2018-12".into(),
            window_end: "2024-05".into(),
            event_date: "2022-11-30".into(),
            min_word_docs: 5,
            vocab_threshold: DEFAULT_VOCAB_THRESHOLD,
            n_samples: DEFAULT_SAMPLES,
            top_k: 10,
            strategy: "untreated".into(),
            pool_size: DEFAULT_POOL_SIZE,
            pool_cap: DEFAULT_POOL_CAP,
            mode: "hinge".into(),
            coef_prior_scale: prior.coef_prior_scale,
            sigma_prior_scale: prior.sigma_prior_scale,
            chains: sampler.chains,
            draws_per_chain: sampler.draws_per_chain,
            warmup: sampler.warmup,
            seed: 0,
        }
    }
}

/// Validated configuration with absolute paths.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub embeddings: PathBuf,
    pub contrastive_dir: PathBuf,
    pub output_dir: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub min_token_length: usize,
    pub stem_embeddings: bool,
    pub window: MonthWindow,
    pub event: YearMonth,
    pub min_word_docs: u64,
    pub vocab_threshold: f64,
    pub n_samples: usize,
    pub top_k: usize,
    pub strategy: DonorStrategy,
    pub pool_size: usize,
    pub pool_cap: usize,
    pub mode: DesignMode,
    pub prior: PriorSpec,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub warmup: usize,
    pub seed: u64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strategy: Option<DonorStrategy>,
    pub mode: Option<DesignMode>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads `path`, or uses the defaults relative to the working directory.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let (raw, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| fail(format!("cannot read config {}: {e}", p.display())))?;
                let raw: RawConfig = toml::from_str(&text)
                    .map_err(|e| fail(format!("config {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (raw, base)
            }
            None => (RawConfig::default(), PathBuf::new()),
        };
        let cwd = std::env::current_dir().map_err(|e| fail(format!("working directory: {e}")))?;
        let base = resolve(&cwd, &base);
        let window_start: YearMonth = raw.window_start.parse()?;
        let window_end: YearMonth = raw.window_end.parse()?;
        let event: YearMonth = raw.event_date.parse()?;
        let window = MonthWindow::new(window_start, window_end)?;
        if !(window_start < event && event < window_end) {
            return Err(fail(format!(
                "event {event} must fall strictly inside {window_start}..{window_end}"
            )));
        }
        let prior = PriorSpec {
            coef_prior_scale: raw.coef_prior_scale,
            sigma_prior_scale: raw.sigma_prior_scale,
        };
        prior.validate()?;
        if raw.n_samples == 0 || raw.chains == 0 || raw.draws_per_chain == 0 {
            return Err(fail(
                "n_samples, chains and draws_per_chain must be positive",
            ));
        }
        if raw.pool_size == 0 || raw.pool_size > raw.pool_cap {
            return Err(fail(format!(
                "pool_size {} must be between 1 and pool_cap {}",
                raw.pool_size, raw.pool_cap
            )));
        }
        let output_dir = overrides
            .out
            .as_ref()
            .map(|o| resolve(&cwd, o))
            .unwrap_or_else(|| resolve(&base, &raw.output_dir));
        Ok(RunConfig {
            corpus: resolve(&base, &raw.corpus),
            embeddings: resolve(&base, &raw.embeddings),
            contrastive_dir: resolve(&base, &raw.contrastive_dir),
            output_dir,
            stopwords: raw.stopwords.as_deref().map(|p| resolve(&base, p)),
            min_token_length: raw.min_token_length,
            stem_embeddings: raw.stem_embeddings,
            window,
            event,
            min_word_docs: raw.min_word_docs,
            vocab_threshold: raw.vocab_threshold,
            n_samples: raw.n_samples,
            top_k: raw.top_k,
            strategy: match overrides.strategy {
                Some(s) => s,
                None => raw.strategy.parse()?,
            },
            pool_size: raw.pool_size,
            pool_cap: raw.pool_cap,
            mode: match overrides.mode {
                Some(m) => m,
                None => raw.mode.parse()?,
            },
            prior,
            chains: raw.chains,
            draws_per_chain: raw.draws_per_chain,
            warmup: raw.warmup,
            seed: overrides.seed.unwrap_or(raw.seed),
        })
    }

    pub fn preprocess(&self) -> CliResult<PreprocessConfig> {
        let mut cfg = PreprocessConfig::default().with_min_token_length(self.min_token_length)?;
        if let Some(p) = &self.stopwords {
            cfg = cfg.with_stopword_file(p)?;
        }
        Ok(cfg)
    }

    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            draws_per_chain: self.draws_per_chain,
            warmup: self.warmup,
            seed,
        }
    }

    pub fn frequency_csv(&self) -> PathBuf {
        self.output_dir.join("frequency.csv")
    }

    pub fn scores_csv(&self) -> PathBuf {
        self.output_dir.join("scores.csv")
    }

    pub fn word_dir(&self, word: &str) -> PathBuf {
        self.output_dir.join("words").join(word)
    }
}
