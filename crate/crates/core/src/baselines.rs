//! Comparison scale models: CLR normalization (degenerate scale), its
//! Gaussian stochastic-scale relaxation, and a scale model informed by
//! measured total loads.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{validate_inputs, AnalysisConfig, AnalysisContext, ConditionLabels, CountTable};
use crate::error::{Error, Result};
use crate::inference::{build_report, DaReport};
use crate::lfc::comp_lfc;
use crate::measurement::{column_log_means, fit_posterior, CompositionDraw};
use crate::rng::{role, stream_id, substream};
use crate::scale::{composition_draw, sample_variance, ScaleModelKind};

/// Default per-sample log-scale variance for the informed model.
pub const DEFAULT_INFORMED_GAMMA2: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalePrior {
    /// Scale fixed by CLR normalization.
    ClrDegenerate,
    /// `log W_perp[n] ~ Normal(-clr_centre[n], gamma2)`.
    GaussianClr { gamma2: f64 },
    /// `log W_perp[n] ~ Normal(ln loads[n], gamma2)`.
    InformedLoad { loads: Vec<f64>, gamma2: f64 },
}

impl ScalePrior {
    pub fn kind(&self) -> ScaleModelKind {
        match self {
            ScalePrior::ClrDegenerate => ScaleModelKind::ClrDegenerate,
            ScalePrior::GaussianClr { .. } => ScaleModelKind::GaussianClr,
            ScalePrior::InformedLoad { .. } => ScaleModelKind::InformedLoad,
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            ScalePrior::ClrDegenerate => "clr",
            ScalePrior::GaussianClr { .. } => "gaussian-clr",
            ScalePrior::InformedLoad { .. } => "informed",
        }
    }

    pub fn validate(&self, num_samples: usize) -> Result<()> {
        let check_gamma = |g: f64| {
            if g.is_finite() && g >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("gamma2 must be non-negative, got {g}")))
            }
        };
        match self {
            ScalePrior::ClrDegenerate => Ok(()),
            ScalePrior::GaussianClr { gamma2 } => check_gamma(*gamma2),
            ScalePrior::InformedLoad { loads, gamma2 } => {
                check_gamma(*gamma2)?;
                if loads.len() != num_samples {
                    return Err(Error::InvalidInput(format!(
                        "informed scale model needs a load for every sample: {} loads for {num_samples} samples",
                        loads.len()
                    )));
                }
                if let Some(n) = loads.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
                    return Err(Error::InvalidInput(format!("load of sample {n} is not positive: {}", loads[n])));
                }
                Ok(())
            }
        }
    }
}

/// Case-minus-control difference of group means of per-sample log scales.
pub fn scale_term(log_scales: &[f64], labels: &ConditionLabels) -> Result<f64> {
    if log_scales.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} log scales for {} labels",
            log_scales.len(),
            labels.len()
        )));
    }
    let (mut case_sum, mut case_n, mut ctrl_sum, mut ctrl_n) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &is_case) in log_scales.iter().zip(labels.assignment()) {
        if is_case {
            case_sum += v;
            case_n += 1;
        } else {
            ctrl_sum += v;
            ctrl_n += 1;
        }
    }
    if case_n == 0 || ctrl_n == 0 {
        return Err(Error::SingleCondition {
            control: ctrl_n,
            case: case_n,
        });
    }
    Ok(case_sum / case_n as f64 - ctrl_sum / ctrl_n as f64)
}

fn clr_log_scales(comp: &CompositionDraw) -> Vec<f64> {
    column_log_means(comp.log_proportions()).into_iter().map(|m| -m).collect()
}

/// The scale shift implied by CLR normalization:
/// `mean_case(-centre) - mean_control(-centre)` with `centre` the per-sample
/// mean log-proportion.
pub fn clr_shift(comp: &CompositionDraw, labels: &ConditionLabels) -> Result<f64> {
    scale_term(&clr_log_scales(comp), labels)
}

/// Runs a comparison scale model through the same measurement model and
/// decision rule as the sparse analysis. Draw `s` uses the same composition
/// as draw `s` of [`crate::inference::run_sparse_ssrv`] for the same seed.
pub fn run_baseline(
    table: &CountTable,
    labels: &ConditionLabels,
    config: &AnalysisConfig,
    prior: &ScalePrior,
) -> Result<DaReport> {
    prior.validate(table.num_samples())?;
    run_baseline_on(&validate_inputs(table, labels, config)?, prior)
}

pub fn run_baseline_on(ctx: &AnalysisContext, prior: &ScalePrior) -> Result<DaReport> {
    prior.validate(ctx.table.num_samples())?;
    let config = &ctx.config;
    let labels = &ctx.labels;
    let post = fit_posterior(&ctx.table, config.alpha_prior)?;
    let per_draw = (0..config.num_draws)
        .into_par_iter()
        .map(|s| {
            let comp = composition_draw(&post, config.seed, s);
            let lfc = comp_lfc(&comp, labels)?;
            let log_scales: Vec<f64> = match prior {
                ScalePrior::ClrDegenerate => clr_log_scales(&comp),
                ScalePrior::GaussianClr { gamma2 } => {
                    let mut rng = substream(config.seed, stream_id(role::BASELINE_SCALE, s as u64));
                    let gamma = gamma2.sqrt();
                    clr_log_scales(&comp)
                        .into_iter()
                        .map(|centre| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            centre + gamma * z
                        })
                        .collect()
                }
                ScalePrior::InformedLoad { loads, gamma2 } => {
                    let mut rng = substream(config.seed, stream_id(role::BASELINE_SCALE, s as u64));
                    let gamma = gamma2.sqrt();
                    loads
                        .iter()
                        .map(|&load| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            load.ln() + gamma * z
                        })
                        .collect()
                }
            };
            let shift = scale_term(&log_scales, labels)?;
            Ok((lfc, shift))
        })
        .collect::<Result<Vec<_>>>()?;

    let d = ctx.table.num_features();
    let mut theta = Array2::<f64>::zeros((config.num_draws, d));
    let mut shifts = Vec::with_capacity(config.num_draws);
    for (s, (lfc, shift)) in per_draw.into_iter().enumerate() {
        theta.row_mut(s).assign(&lfc.mapv(|v| v + shift));
        shifts.push(shift);
    }
    let kind = prior.kind();
    let variance = sample_variance(&shifts);
    build_report(
        ctx,
        prior.method_name(),
        theta.view(),
        kind,
        variance,
        vec![(kind, variance)],
        Vec::new(),
        None,
    )
}
