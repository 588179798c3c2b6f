//! Multinomial–Dirichlet measurement model and the CLR transform.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};

use crate::data::CountTable;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-sample Dirichlet posteriors: `concentration[d][n] = counts[d][n] + alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletPosterior {
    concentration: Array2<f64>,
    alpha: f64,
}

impl DirichletPosterior {
    /// Fits from a raw count matrix. Unlike [`CountTable`], all-zero columns
    /// are accepted and yield a symmetric Dirichlet.
    pub fn from_counts(counts: ArrayView2<'_, u64>, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!("Dirichlet alpha must be positive, got {alpha}")));
        }
        Ok(DirichletPosterior {
            concentration: counts.mapv(|c| c as f64 + alpha),
            alpha,
        })
    }

    pub fn concentration(&self) -> ArrayView2<'_, f64> {
        self.concentration.view()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_features(&self) -> usize {
        self.concentration.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.concentration.ncols()
    }
}

pub fn fit_posterior(table: &CountTable, alpha: f64) -> Result<DirichletPosterior> {
    DirichletPosterior::from_counts(table.counts(), alpha)
}

/// One posterior realization of the D×N proportion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionDraw {
    proportions: Array2<f64>,
    log_proportions: Array2<f64>,
}

impl CompositionDraw {
    /// Wraps an explicit proportion matrix. Entries must be strictly positive
    /// and each column must sum to one within 1e-10.
    pub fn new(proportions: Array2<f64>) -> Result<Self> {
        for (n, col) in proportions.axis_iter(Axis(1)).enumerate() {
            if let Some(d) = col.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "composition entry ({d}, {n}) = {} is not strictly positive",
                    col[d]
                )));
            }
            let s: f64 = col.sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!("composition column {n} sums to {s}, not 1")));
            }
        }
        let log_proportions = proportions.mapv(f64::ln);
        Ok(CompositionDraw {
            proportions,
            log_proportions,
        })
    }

    pub fn proportions(&self) -> ArrayView2<'_, f64> {
        self.proportions.view()
    }

    pub fn log_proportions(&self) -> ArrayView2<'_, f64> {
        self.log_proportions.view()
    }

    pub fn num_features(&self) -> usize {
        self.proportions.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.proportions.ncols()
    }

    /// Keeps the given columns, in order (repeats allowed).
    pub fn select_samples(&self, cols: &[usize]) -> CompositionDraw {
        CompositionDraw {
            proportions: self.proportions.select(Axis(1), cols),
            log_proportions: self.log_proportions.select(Axis(1), cols),
        }
    }
}

/// Log of a Gamma(shape, 1) variate. Shapes below one use the boosted form
/// `Gamma(shape + 1) * U^(1/shape)`, evaluated in log space so that tiny
/// variates do not underflow.
fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape is positive").sample(rng);
        let u: f64 = Open01.sample(rng);
        g.ln() + u.ln() / shape
    } else {
        Gamma::new(shape, 1.0).expect("shape is positive").sample(rng).ln()
    }
}

/// Draws every column from its Dirichlet posterior by normalizing
/// independent Gamma variates.
pub fn sample_composition(post: &DirichletPosterior, rng: &mut RngStream) -> CompositionDraw {
    let (d, n) = post.concentration.dim();
    let mut log_p = Array2::<f64>::zeros((d, n));
    for col in 0..n {
        let mut max = f64::NEG_INFINITY;
        for row in 0..d {
            let v = log_gamma_variate(post.concentration[[row, col]], rng);
            log_p[[row, col]] = v;
            max = max.max(v);
        }
        let total: f64 = (0..d).map(|row| (log_p[[row, col]] - max).exp()).sum();
        let lse = max + total.ln();
        for row in 0..d {
            log_p[[row, col]] -= lse;
        }
    }
    let proportions = log_p.mapv(f64::exp);
    CompositionDraw {
        proportions,
        log_proportions: log_p,
    }
}

/// Centered log-ratio of every column of a composition draw.
pub fn clr_transform(comp: &CompositionDraw) -> Array2<f64> {
    center_columns(comp.log_proportions())
}

/// CLR of an arbitrary positive matrix (columns need not be normalized).
pub fn clr_columns(values: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if let Some(((d, n), v)) = values.indexed_iter().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "CLR requires strictly positive entries; entry ({d}, {n}) = {v}"
        )));
    }
    Ok(center_columns(values.mapv(f64::ln).view()))
}

/// Per-column mean of log-proportions (the CLR centering term).
pub fn column_log_means(log_values: ArrayView2<'_, f64>) -> Vec<f64> {
    let d = log_values.nrows() as f64;
    log_values
        .axis_iter(Axis(1))
        .map(|col| col.sum() / d)
        .collect()
}

fn center_columns(log_values: ArrayView2<'_, f64>) -> Array2<f64> {
    let means = column_log_means(log_values);
    let mut out = log_values.to_owned();
    for (mut col, m) in out.axis_iter_mut(Axis(1)).zip(means) {
        col.mapv_inplace(|v| v - m);
    }
    out
}
