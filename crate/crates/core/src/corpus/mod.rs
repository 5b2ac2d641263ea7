//! Document ingestion, text preprocessing and monthly frequency series.

pub(crate) mod io;
mod porter;
mod preprocess;
mod series;

pub use io::{
    read_documents, read_frequency_csv, write_frequency_csv, IngestOutcome, Rejection,
    RejectionReason,
};
pub use porter::porter_stem;
pub use preprocess::{preprocess, tokenize, PreprocessConfig, DEFAULT_STOPWORDS};
pub use series::{build_frequency_series, count_documents, FrequencySeries, MonthlyCounts};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// One time-stamped unit of text (a video transcript, an episode, an abstract).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub timestamp: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub text: String,
}
