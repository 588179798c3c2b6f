//! Sparse scale simulation random variables (Sparse SSRV) for differential
//! abundance analysis of sequence count data.
//!
//! Counts only identify each sample's composition, never its total scale, so
//! a log-fold change splits into an identified compositional part and one
//! unidentified scalar shift shared by every feature. This crate samples the
//! compositional part from per-sample Dirichlet posteriors and models the
//! shift as the negated mode of the compositional LFC distribution, with
//! uncertainty from a Laplace approximation or a two-stage bootstrap
//! (whichever is wider).
//!
//! ```no_run
//! use sparse_ssrv::{io, run_sparse_ssrv, AnalysisConfig};
//!
//! let table = io::read_count_table("counts.tsv", &io::TableFormat::default())?;
//! let meta = io::read_metadata("metadata.tsv", None)?;
//! let (labels, _loads) = meta.align(&table)?;
//! let report = run_sparse_ssrv(&table, &labels, &AnalysisConfig::default().with_seed(42))?;
//! io::write_report(&report, "out", io::LogBase::E)?;
//! # Ok::<(), sparse_ssrv::Error>(())
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod inference;
pub mod io;
pub mod kde;
pub mod lfc;
pub mod measurement;
pub mod rng;
pub mod scale;
pub mod sim;

pub use baselines::{clr_shift, run_baseline, ScalePrior};
pub use data::{validate_inputs, AnalysisConfig, AnalysisContext, ConditionLabels, CountTable};
pub use error::{Error, Result};
pub use inference::{consistency_probe, run_sparse_ssrv, summarize, DaReport, PosteriorSummary};
pub use kde::{default_bandwidth, kde_density, parzen_mode, KdeSpec};
pub use lfc::{comp_lfc, rank1_update, LfcDraw};
pub use measurement::{clr_transform, fit_posterior, sample_composition, CompositionDraw, DirichletPosterior};
pub use rng::{substream, RngStream};
pub use scale::{
    bootstrap_scale_fit, laplace_scale_fit, select_scale_model, ScaleModelFit, ScaleModelKind,
};
pub use sim::{generate, run_benchmark, sparsity_sweep, BenchmarkResult, GeneratorSpec, Method, SyntheticDataset};

/// Runs `f` on a dedicated pool of `threads` workers (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
