//! The full analysis: composition draws, both scale models, selection, and
//! per-feature posterior summaries with FDR-controlled calls.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{validate_inputs, AnalysisConfig, AnalysisContext, ConditionLabels, CountTable};
use crate::error::{Error, Result};
use crate::kde::{bandwidth_or_fallback, linear_grid, Kde, ModeSearch};
use crate::lfc::comp_lfc;
use crate::measurement::{fit_posterior, DirichletPosterior};
use crate::rng::{derive_seed, role, stream_id, substream, RngStream};
use crate::sim::{analyze_dataset, generate, GeneratorSpec, Method};
use crate::scale::{
    assemble_bootstrap_fit, bootstrap_replicate, bootstrap_rngs, composition_draw, group_size_warning,
    laplace_scale_fit_oriented, noise_orientation, select_scale_model, BootstrapStages, ScaleModelFit, ScaleModelKind,
};

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Posterior summary of one feature's total log-fold change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean_lfc: f64,
    pub sd_lfc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tail_p: f64,
    pub q_value: f64,
    pub significant: bool,
}

/// Mean scale-model density of the compositional LFC draws on a fixed grid,
/// and the per-draw modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDiagnostics {
    pub grid: Vec<f64>,
    pub mean_density: Vec<f64>,
    pub mode_draws: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaReport {
    pub method: String,
    pub feature_ids: Vec<String>,
    /// Row of each reported feature in the unfiltered input table.
    pub retained: Vec<usize>,
    pub summaries: Vec<PosteriorSummary>,
    pub scale_model_kind: ScaleModelKind,
    pub scale_variance: f64,
    /// Variances of the candidate scale models, when more than one was fit.
    pub candidate_variances: Vec<(ScaleModelKind, f64)>,
    pub config: AnalysisConfig,
    pub warnings: Vec<String>,
    pub diagnostics: Option<DensityDiagnostics>,
    pub software_version: String,
}

impl DaReport {
    pub fn num_significant(&self) -> usize {
        self.summaries.iter().filter(|s| s.significant).count()
    }

    pub fn significant_ids(&self) -> Vec<&str> {
        self.feature_ids
            .iter()
            .zip(&self.summaries)
            .filter(|(_, s)| s.significant)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Benjamini–Hochberg adjusted p-values (step-up), in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        let adjusted = p_values[i] * m as f64 / (rank + 1) as f64;
        running = running.min(adjusted).min(1.0);
        q[i] = running;
    }
    q
}

/// Two-sided Monte Carlo tail probability with add-one smoothing:
/// `2 * min(#{x > 0} + 1, #{x < 0} + 1) / (S + 1)`, capped at one.
pub fn tail_probability(draws: &[f64]) -> f64 {
    let above = draws.iter().filter(|&&x| x > 0.0).count();
    let below = draws.iter().filter(|&&x| x < 0.0).count();
    let tail = (above.min(below) + 1) as f64;
    (2.0 * tail / (draws.len() + 1) as f64).min(1.0)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    crate::kde::sorted_quantile(sorted, q)
}

/// Per-feature summaries of S×D total-LFC draws. Credible intervals are
/// equal-tailed at level `1 - target_fdr`; calls are BH at `target_fdr`.
pub fn summarize(theta_draws: ArrayView2<'_, f64>, target_fdr: f64) -> Result<Vec<PosteriorSummary>> {
    let s_count = theta_draws.nrows();
    if s_count < 2 {
        return Err(Error::InvalidInput(format!("at least 2 draws are required, got {s_count}")));
    }
    let partial: Vec<(f64, f64, f64, f64, f64)> = theta_draws
        .columns()
        .into_iter()
        .map(|col| {
            let mut v = col.to_vec();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            let p = tail_probability(&v);
            v.sort_by(f64::total_cmp);
            let lo = quantile_sorted(&v, target_fdr / 2.0);
            let hi = quantile_sorted(&v, 1.0 - target_fdr / 2.0);
            (mean, sd, lo, hi, p)
        })
        .collect();
    let p_values: Vec<f64> = partial.iter().map(|t| t.4).collect();
    let q_values = benjamini_hochberg(&p_values);
    Ok(partial
        .into_iter()
        .zip(q_values)
        .map(|((mean, sd, lo, hi, p), q)| PosteriorSummary {
            mean_lfc: mean,
            sd_lfc: sd,
            ci_low: lo,
            ci_high: hi,
            tail_p: p,
            q_value: q,
            significant: q <= target_fdr,
        })
        .collect())
}

pub(crate) fn mode_search(config: &AnalysisConfig) -> ModeSearch {
    ModeSearch {
        interval: config.mode_search_interval,
        grid_size: config.kde_grid_size,
    }
}

/// Noise stream of the Laplace scale model for an analysis seed.
pub fn laplace_stream(seed: u64) -> RngStream {
    substream(seed, stream_id(role::LAPLACE_NOISE, 0))
}

/// Resampling stream of the bootstrap scale model for an analysis seed.
pub fn bootstrap_stream(seed: u64) -> RngStream {
    substream(seed, stream_id(role::SAMPLE_BOOTSTRAP, 0))
}

/// Both scale-model fits for one analysis, and the selected one.
#[derive(Clone, Debug)]
pub struct ScaleModels {
    pub laplace: ScaleModelFit,
    pub bootstrap: ScaleModelFit,
    pub selected: ScaleModelKind,
}

impl ScaleModels {
    pub fn selected_fit(&self) -> &ScaleModelFit {
        match self.selected {
            ScaleModelKind::Laplace => &self.laplace,
            _ => &self.bootstrap,
        }
    }
}

/// Runs both scale models on shared composition draws. Identical to calling
/// [`crate::scale::laplace_scale_fit_oriented`] on the draws' LFCs and
/// [`crate::scale::bootstrap_scale_fit`] separately with the streams from
/// [`laplace_stream`] and [`bootstrap_stream`].
pub fn fit_scale_models(ctx: &AnalysisContext, post: &DirichletPosterior) -> Result<ScaleModels> {
    let config = &ctx.config;
    let labels = &ctx.labels;
    let search = mode_search(config);
    let boot_rng = bootstrap_stream(config.seed);
    let per_draw = (0..config.num_draws)
        .into_par_iter()
        .map(|s| {
            let comp = composition_draw(post, config.seed, s);
            let lfc = comp_lfc(&comp, labels)?;
            let (mut sample_rng, mut feature_rng) = bootstrap_rngs(&boot_rng, s);
            let replicate = bootstrap_replicate(
                &comp,
                labels,
                &search,
                BootstrapStages::default(),
                &mut sample_rng,
                &mut feature_rng,
            )?;
            Ok((lfc, replicate))
        })
        .collect::<Result<Vec<_>>>()?;

    let d = ctx.table.num_features();
    let mut comp_draws = Array2::<f64>::zeros((config.num_draws, d));
    let mut replicates = Vec::with_capacity(config.num_draws);
    for (s, (lfc, replicate)) in per_draw.into_iter().enumerate() {
        comp_draws.row_mut(s).assign(&lfc);
        replicates.push(replicate);
    }
    let laplace = laplace_scale_fit_oriented(
        comp_draws.view(),
        &search,
        &laplace_stream(config.seed),
        noise_orientation(labels),
    )?;
    let bootstrap = assemble_bootstrap_fit(replicates, d, group_size_warning(labels).into_iter().collect());
    let selected = select_scale_model(laplace.clone(), bootstrap.clone()).kind;
    Ok(ScaleModels {
        laplace,
        bootstrap,
        selected,
    })
}

/// Averages each draw's KDE (own bandwidth) over a grid spanning all draws.
pub fn density_diagnostics(comp_lfc_draws: ArrayView2<'_, f64>, modes: &[f64], grid_size: usize) -> DensityDiagnostics {
    let rows: Vec<Vec<f64>> = comp_lfc_draws.outer_iter().map(|r| r.to_vec()).collect();
    let bandwidths: Vec<f64> = rows.iter().map(|r| bandwidth_or_fallback(r).0).collect();
    let h_max = bandwidths.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = comp_lfc_draws
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let grid = linear_grid(lo - 3.0 * h_max, hi + 3.0 * h_max, grid_size.max(2));
    let per_draw: Vec<Vec<f64>> = rows
        .par_iter()
        .zip(&bandwidths)
        .map(|(r, &h)| Kde::new(r, h).density_on_grid(&grid))
        .collect();
    let s = per_draw.len() as f64;
    let mean_density = (0..grid.len())
        .map(|i| per_draw.iter().map(|d| d[i]).sum::<f64>() / s)
        .collect();
    DensityDiagnostics {
        grid,
        mean_density,
        mode_draws: modes.to_vec(),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_report(
    ctx: &AnalysisContext,
    method: &str,
    theta_draws: ArrayView2<'_, f64>,
    kind: ScaleModelKind,
    scale_variance: f64,
    candidate_variances: Vec<(ScaleModelKind, f64)>,
    warnings: Vec<String>,
    diagnostics: Option<DensityDiagnostics>,
) -> Result<DaReport> {
    Ok(DaReport {
        method: method.to_string(),
        feature_ids: ctx.table.feature_ids().to_vec(),
        retained: ctx.retained.clone(),
        summaries: summarize(theta_draws, ctx.config.target_fdr)?,
        scale_model_kind: kind,
        scale_variance,
        candidate_variances,
        config: ctx.config.clone(),
        warnings,
        diagnostics,
        software_version: SOFTWARE_VERSION.to_string(),
    })
}

/// Sparse SSRV on a validated context.
pub fn run_sparse_ssrv_on(ctx: &AnalysisContext) -> Result<DaReport> {
    let post = fit_posterior(&ctx.table, ctx.config.alpha_prior)?;
    let models = fit_scale_models(ctx, &post)?;
    let fit = models.selected_fit();
    let theta = fit.total_lfc_draws();
    let mut warnings = models.laplace.warnings.clone();
    for w in &models.bootstrap.warnings {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    let diagnostics = ctx.config.collect_diagnostics.then(|| {
        density_diagnostics(
            models.laplace.comp_lfc_draws.view(),
            &models.laplace.mode_point_estimates,
            ctx.config.kde_grid_size,
        )
    });
    build_report(
        ctx,
        "sparse-ssrv",
        theta.view(),
        fit.kind,
        fit.variance,
        vec![
            (ScaleModelKind::Laplace, models.laplace.variance),
            (ScaleModelKind::Bootstrap, models.bootstrap.variance),
        ],
        warnings,
        diagnostics,
    )
}

/// Validates the inputs and runs the Sparse SSRV analysis.
pub fn run_sparse_ssrv(table: &CountTable, labels: &ConditionLabels, config: &AnalysisConfig) -> Result<DaReport> {
    run_sparse_ssrv_on(&validate_inputs(table, labels, config)?)
}

/// One rung of the consistency ladder: sequencing depth and feature count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub depth: f64,
    pub num_features: usize,
}

/// The default ladder `(1e3, 100), (1e4, 400), (1e5, 1600)`.
pub fn default_ladder() -> Vec<LadderRung> {
    [(1e3, 100), (1e4, 400), (1e5, 1600)]
        .into_iter()
        .map(|(depth, num_features)| LadderRung { depth, num_features })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub depth: f64,
    pub num_features: usize,
    /// Median over seeds of the RMSE of the posterior mean against truth.
    pub median_rmse: f64,
    /// Median over seeds of the feature-averaged posterior sd.
    pub median_posterior_sd: f64,
    pub rmse: Vec<f64>,
    pub posterior_sd: Vec<f64>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    crate::kde::sorted_quantile(&v, 0.5)
}

/// Runs `method` on synthetic data along a ladder of (depth, D) and reports
/// how far the posterior mean is from the generating truth, and how wide
/// the posterior is. Seed `i` of every rung uses generator seed
/// `derive_seed(base.seed, i)`.
pub fn consistency_probe(
    base: &GeneratorSpec,
    ladder: &[LadderRung],
    seeds: usize,
    method: &Method,
    config: &AnalysisConfig,
) -> Result<Vec<ProbeRow>> {
    if seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    ladder
        .iter()
        .map(|rung| {
            let results = (0..seeds)
                .into_par_iter()
                .map(|i| {
                    let spec = GeneratorSpec {
                        depth: rung.depth,
                        num_features: rung.num_features,
                        seed: derive_seed(base.seed, i as u64),
                        ..base.clone()
                    };
                    let data = generate(&spec)?;
                    let cfg = AnalysisConfig {
                        seed: derive_seed(config.seed, i as u64),
                        collect_diagnostics: false,
                        ..config.clone()
                    };
                    let report = analyze_dataset(method, &data, &cfg)?;
                    let k = report.summaries.len() as f64;
                    let sq: f64 = report
                        .retained
                        .iter()
                        .zip(&report.summaries)
                        .map(|(&row, s)| (s.mean_lfc - data.truth[row]).powi(2))
                        .sum();
                    let sd = report.summaries.iter().map(|s| s.sd_lfc).sum::<f64>() / k;
                    Ok(((sq / k).sqrt(), sd))
                })
                .collect::<Result<Vec<_>>>()?;
            let rmse: Vec<f64> = results.iter().map(|r| r.0).collect();
            let posterior_sd: Vec<f64> = results.iter().map(|r| r.1).collect();
            Ok(ProbeRow {
                depth: rung.depth,
                num_features: rung.num_features,
                median_rmse: median(&rmse),
                median_posterior_sd: median(&posterior_sd),
                rmse,
                posterior_sd,
            })
        })
        .collect()
}
