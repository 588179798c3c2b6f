//! Mode-estimating scale models.
//!
//! Both models centre the scale shift on the negated Parzen mode of the
//! compositional LFC vector. The Laplace model adds Gaussian noise whose
//! variance is the inverse curvature of the log-density at the mode; the
//! bootstrap model resamples samples within each condition and then
//! features before re-locating the mode.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AnalysisConfig, ConditionLabels, CountTable};
use crate::error::{Error, Result};
use crate::kde::{locate_mode, ModeEstimate, ModeSearch};
use crate::lfc::comp_lfc;
use crate::measurement::{sample_composition, CompositionDraw, DirichletPosterior};
use crate::rng::{role, stream_id, substream, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleModelKind {
    Laplace,
    Bootstrap,
    ClrDegenerate,
    GaussianClr,
    InformedLoad,
}

impl ScaleModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleModelKind::Laplace => "laplace",
            ScaleModelKind::Bootstrap => "bootstrap",
            ScaleModelKind::ClrDegenerate => "clr-degenerate",
            ScaleModelKind::GaussianClr => "gaussian-clr",
            ScaleModelKind::InformedLoad => "informed-load",
        }
    }
}

/// Scale-shift draws from one scale model, paired row-by-row with the
/// compositional LFC draws they were computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleModelFit {
    pub kind: ScaleModelKind,
    /// One scale shift per Monte Carlo draw.
    pub shift_draws: Vec<f64>,
    /// Sample variance of `shift_draws`.
    pub variance: f64,
    /// Parzen mode of each draw, before any noise.
    pub mode_point_estimates: Vec<f64>,
    /// S×D compositional LFC draws; row `s` pairs with `shift_draws[s]`.
    pub comp_lfc_draws: Array2<f64>,
    /// Per-draw Laplace variance (empty for other models).
    pub laplace_variances: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ScaleModelFit {
    pub fn num_draws(&self) -> usize {
        self.shift_draws.len()
    }

    /// S×D draws of the total LFC, `comp_lfc_draws[s] + shift_draws[s]`.
    pub fn total_lfc_draws(&self) -> Array2<f64> {
        let mut out = self.comp_lfc_draws.clone();
        for (mut row, &shift) in out.outer_iter_mut().zip(&self.shift_draws) {
            row.mapv_inplace(|v| v + shift);
        }
        out
    }
}

/// Unbiased sample variance (zero for fewer than two values).
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Variance of the Laplace approximation at the located mode:
/// `-1 / (ln p)''(mode)`. Returns the value and whether a fallback was used.
///
/// If the analytic curvature is not strictly negative, a central difference
/// of `ln p` with the scan grid's spacing is tried; if that is also not
/// negative the squared bandwidth is used.
pub fn laplace_variance(est: &ModeEstimate) -> (f64, bool) {
    let curvature = est.kde.log_density_second_derivative(est.mode);
    if curvature < 0.0 && curvature.is_finite() {
        return (-1.0 / curvature, false);
    }
    let (lo, hi) = est.spec.eval_interval;
    let step = (hi - lo) / (est.spec.effective_grid_points() - 1) as f64;
    let lp = |t: f64| est.kde.log_density(t);
    let fd = (lp(est.mode + step) - 2.0 * lp(est.mode) + lp(est.mode - step)) / (step * step);
    if fd < 0.0 && fd.is_finite() {
        (-1.0 / fd, true)
    } else {
        let h = est.kde.bandwidth();
        (h * h, true)
    }
}

fn all_identical(draws: ArrayView2<'_, f64>) -> bool {
    let first = draws.iter().next().copied();
    first.is_some_and(|f| draws.iter().all(|&v| v == f))
}

/// Laplace scale model over S×D compositional LFC draws. Draw `s` takes its
/// noise from `rng.derive(s)`.
pub fn laplace_scale_fit(
    comp_lfc_draws: ArrayView2<'_, f64>,
    search: &ModeSearch,
    rng: &RngStream,
) -> Result<ScaleModelFit> {
    laplace_scale_fit_oriented(comp_lfc_draws, search, rng, 1.0)
}

/// Noise orientation of a labelling: +1 when the first sample is a control,
/// -1 otherwise. Multiplying the Laplace noise by it makes swapping the two
/// conditions mirror every shift draw.
pub fn noise_orientation(labels: &ConditionLabels) -> f64 {
    if labels.is_case(0) {
        -1.0
    } else {
        1.0
    }
}

/// [`laplace_scale_fit`] with every noise term multiplied by `orientation`.
pub fn laplace_scale_fit_oriented(
    comp_lfc_draws: ArrayView2<'_, f64>,
    search: &ModeSearch,
    rng: &RngStream,
    orientation: f64,
) -> Result<ScaleModelFit> {
    let s_count = comp_lfc_draws.nrows();
    if s_count < 2 {
        return Err(Error::InvalidInput(format!("at least 2 draws are required, got {s_count}")));
    }
    if comp_lfc_draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("compositional LFC draws contain non-finite values".into()));
    }
    let per_draw: Vec<(f64, f64, f64, bool)> = (0..s_count)
        .into_par_iter()
        .map(|s| {
            let row = comp_lfc_draws.row(s);
            let values: Vec<f64> = row.to_vec();
            let est = locate_mode(&values, search);
            let (tau2, fallback) = laplace_variance(&est);
            let z: f64 = rng.derive(s as u64).sample(StandardNormal);
            let shift = -est.mode + orientation * tau2.sqrt() * z;
            (est.mode, tau2, shift, fallback)
        })
        .collect();

    let mut warnings = Vec::new();
    if all_identical(comp_lfc_draws) {
        warnings.push("degenerate compositional LFC: every draw has identical entries".to_string());
    }
    let fallbacks = per_draw.iter().filter(|d| d.3).count();
    if fallbacks > 0 {
        warnings.push(format!(
            "Laplace curvature was not negative at the mode in {fallbacks} of {s_count} draws; used fallback variance"
        ));
    }
    let shift_draws: Vec<f64> = per_draw.iter().map(|d| d.2).collect();
    Ok(ScaleModelFit {
        kind: ScaleModelKind::Laplace,
        variance: sample_variance(&shift_draws),
        mode_point_estimates: per_draw.iter().map(|d| d.0).collect(),
        laplace_variances: per_draw.iter().map(|d| d.1).collect(),
        shift_draws,
        comp_lfc_draws: comp_lfc_draws.to_owned(),
        warnings,
    })
}

/// Which resampling stages of the bootstrap are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BootstrapStages {
    /// Resample sample columns within each condition.
    pub samples: bool,
    /// Resample the entries of the compositional LFC vector.
    pub features: bool,
}

impl Default for BootstrapStages {
    fn default() -> Self {
        BootstrapStages {
            samples: true,
            features: true,
        }
    }
}

/// Column indices resampled with replacement within each condition; column
/// `j` of the result is drawn from the condition of column `j`.
pub fn stratified_resample<R: Rng + ?Sized>(labels: &ConditionLabels, rng: &mut R) -> Vec<usize> {
    let case = labels.case_indices();
    let control = labels.control_indices();
    labels
        .assignment()
        .iter()
        .map(|&is_case| {
            let pool = if is_case { &case } else { &control };
            pool[rng.random_range(0..pool.len())]
        })
        .collect()
}

/// One bootstrap replicate: returns the (sample-resampled) compositional LFC
/// vector and the mode of its feature-resampled copy.
pub(crate) fn bootstrap_replicate(
    comp: &CompositionDraw,
    labels: &ConditionLabels,
    search: &ModeSearch,
    stages: BootstrapStages,
    sample_rng: &mut RngStream,
    feature_rng: &mut RngStream,
) -> Result<(Array1<f64>, f64)> {
    let lfc = if stages.samples {
        let cols = stratified_resample(labels, sample_rng);
        comp_lfc(&comp.select_samples(&cols), labels)?
    } else {
        comp_lfc(comp, labels)?
    };
    let mode = if stages.features {
        let d = lfc.len();
        let resampled: Vec<f64> = (0..d).map(|_| lfc[feature_rng.random_range(0..d)]).collect();
        locate_mode(&resampled, search).mode
    } else {
        locate_mode(lfc.as_slice().expect("contiguous"), search).mode
    };
    Ok((lfc, mode))
}

pub(crate) fn bootstrap_rngs(rng: &RngStream, s: usize) -> (RngStream, RngStream) {
    let base = rng.derive(s as u64);
    (base.derive(role::SAMPLE_BOOTSTRAP), base.derive(role::FEATURE_BOOTSTRAP))
}

pub(crate) fn group_size_warning(labels: &ConditionLabels) -> Option<String> {
    (labels.num_case() == 1 || labels.num_control() == 1).then(|| {
        "a condition has a single sample; within-condition bootstrap cannot vary that group".to_string()
    })
}

pub(crate) fn assemble_bootstrap_fit(
    replicates: Vec<(Array1<f64>, f64)>,
    num_features: usize,
    mut warnings: Vec<String>,
) -> ScaleModelFit {
    let s_count = replicates.len();
    let mut comp_lfc_draws = Array2::<f64>::zeros((s_count, num_features));
    let mut modes = Vec::with_capacity(s_count);
    for (s, (lfc, mode)) in replicates.into_iter().enumerate() {
        comp_lfc_draws.row_mut(s).assign(&lfc);
        modes.push(mode);
    }
    let shift_draws: Vec<f64> = modes.iter().map(|m| -m).collect();
    if shift_draws.iter().all(|&v| v == shift_draws[0]) && s_count > 1 {
        warnings.push("bootstrap scale draws are all identical".to_string());
    }
    ScaleModelFit {
        kind: ScaleModelKind::Bootstrap,
        variance: sample_variance(&shift_draws),
        mode_point_estimates: modes,
        shift_draws,
        comp_lfc_draws,
        laplace_variances: Vec::new(),
        warnings,
    }
}

/// Bootstrap scale model over caller-supplied composition draws.
/// `compositions(s)` must return draw `s`; resampling for draw `s` uses
/// streams derived from `rng` and `s`.
pub fn bootstrap_scale_fit_with<F>(
    compositions: F,
    num_draws: usize,
    labels: &ConditionLabels,
    search: &ModeSearch,
    stages: BootstrapStages,
    rng: &RngStream,
) -> Result<ScaleModelFit>
where
    F: Fn(usize) -> CompositionDraw + Sync,
{
    if num_draws < 2 {
        return Err(Error::InvalidInput(format!("at least 2 draws are required, got {num_draws}")));
    }
    let replicates = (0..num_draws)
        .into_par_iter()
        .map(|s| {
            let comp = compositions(s);
            let (mut sample_rng, mut feature_rng) = bootstrap_rngs(rng, s);
            bootstrap_replicate(&comp, labels, search, stages, &mut sample_rng, &mut feature_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let d = replicates[0].0.len();
    let warnings = group_size_warning(labels).into_iter().collect();
    Ok(assemble_bootstrap_fit(replicates, d, warnings))
}

/// Composition draw `s` of an analysis: keyed by the analysis seed, so the
/// Laplace and bootstrap paths (and the baselines) see the same draws.
pub fn composition_draw(post: &DirichletPosterior, seed: u64, s: usize) -> CompositionDraw {
    sample_composition(post, &mut substream(seed, stream_id(role::COMPOSITION, s as u64)))
}

/// Two-stage bootstrap scale model. Compositions come from
/// [`composition_draw`] with `config.seed`; resampling from `rng`.
pub fn bootstrap_scale_fit(
    table: &CountTable,
    labels: &ConditionLabels,
    post: &DirichletPosterior,
    config: &AnalysisConfig,
    rng: &RngStream,
) -> Result<ScaleModelFit> {
    if table.num_samples() != labels.len() || post.num_samples() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} samples, posterior {}, labels {}",
            table.num_samples(),
            post.num_samples(),
            labels.len()
        )));
    }
    let search = ModeSearch {
        interval: config.mode_search_interval,
        grid_size: config.kde_grid_size,
    };
    bootstrap_scale_fit_with(
        |s| composition_draw(post, config.seed, s),
        config.num_draws,
        labels,
        &search,
        BootstrapStages::default(),
        rng,
    )
}

/// Keeps the fit with the strictly larger variance; near-ties (1e-12) go to
/// the bootstrap fit.
pub fn select_scale_model(laplace: ScaleModelFit, bootstrap: ScaleModelFit) -> ScaleModelFit {
    let scale = laplace.variance.abs().max(bootstrap.variance.abs()).max(1.0);
    if laplace.variance > bootstrap.variance + 1e-12 * scale {
        laplace
    } else {
        bootstrap
    }
}
