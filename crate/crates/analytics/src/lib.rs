//! Usage summaries per note-taking pair and paired-response statistics.

pub mod io;
pub mod report;
pub mod stats;
pub mod usage;
pub mod wilcoxon;

pub use io::{read_pair_map, read_paired_csv, read_usage_log, InputError};
pub use report::{analyze_paired, paired_csv, paired_table, usage_csv, usage_table, PairedItemReport};
pub use stats::{iqr, median, quantile, EmptySample};
pub use usage::{summarize_usage, PairMap, PairMapError, PairUsageSummary};
pub use wilcoxon::{wilcoxon_signed_rank, Method, PairedSample, WilcoxonError, WilcoxonResult, EXACT_MAX_N};
