//! Synthetic controls for a treated word series.
//!
//! A donor pool is drawn from untreated words (by GPT score and embedding
//! similarity, by similarity alone, or at random). Simplex weights over the
//! donors are fit to the treated series before the event month, which itself
//! belongs to the pre period. Inference ranks the post/pre MSPE ratio among
//! placebo fits of each donor, and repeats the fit at earlier fake dates.

mod donors;
mod embeddings;
mod fit;
mod io;
mod placebo;
mod solver;

pub use donors::{
    select_donors_random, select_donors_synonym, select_donors_untreated, untreated_candidates,
    DonorPool, DonorStrategy, DEFAULT_POOL_CAP, DEFAULT_POOL_SIZE,
};
pub use embeddings::EmbeddingStore;
pub use fit::{event_index, fit_weights, mspe_ratio, MspeSummary, SyntheticFit, MSPE_FLOOR};
pub use io::{
    write_in_time_csv, write_paired_csv, write_plot_csv, write_weights_csv, FitSummary, PairedRow,
};
pub use placebo::{
    in_time_placebo, placebo_p_value, placebo_test, FakeDateRatio, InTimePlaceboResult,
    PlaceboOutcome, IN_TIME_OFFSETS, MIN_IN_TIME_PRE_MONTHS, MIN_PLACEBO_RATIOS,
};
pub use solver::{fit_simplex, SimplexFit};
