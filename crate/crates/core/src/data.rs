//! Domain types shared by every stage of the analysis.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A D×N table of read counts: features are rows, samples are columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCountTable", into = "RawCountTable")]
pub struct CountTable {
    feature_ids: Vec<String>,
    sample_ids: Vec<String>,
    counts: Array2<u64>,
    depths: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawCountTable {
    feature_ids: Vec<String>,
    sample_ids: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl TryFrom<RawCountTable> for CountTable {
    type Error = Error;

    fn try_from(raw: RawCountTable) -> Result<Self> {
        let d = raw.counts.len();
        let n = raw.sample_ids.len();
        let mut flat = Vec::with_capacity(d * n);
        for (i, row) in raw.counts.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} counts, expected {n}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        let counts = Array2::from_shape_vec((d, n), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        CountTable::new(raw.feature_ids, raw.sample_ids, counts)
    }
}

impl From<CountTable> for RawCountTable {
    fn from(t: CountTable) -> Self {
        RawCountTable {
            counts: t.counts.outer_iter().map(|r| r.to_vec()).collect(),
            feature_ids: t.feature_ids,
            sample_ids: t.sample_ids,
        }
    }
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

impl CountTable {
    pub fn new(feature_ids: Vec<String>, sample_ids: Vec<String>, counts: Array2<u64>) -> Result<Self> {
        let (d, n) = counts.dim();
        if feature_ids.len() != d || sample_ids.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "counts are {d}x{n} but {} feature ids and {} sample ids were given",
                feature_ids.len(),
                sample_ids.len()
            )));
        }
        if d < 2 || n < 2 {
            return Err(Error::InvalidInput(format!(
                "a count table needs at least 2 features and 2 samples, got {d}x{n}"
            )));
        }
        check_unique(&feature_ids, "feature")?;
        check_unique(&sample_ids, "sample")?;
        let depths: Vec<u64> = counts.sum_axis(Axis(0)).to_vec();
        if let Some(n) = depths.iter().position(|&x| x == 0) {
            return Err(Error::InvalidInput(format!(
                "sample '{}' has zero total reads",
                sample_ids[n]
            )));
        }
        Ok(CountTable {
            feature_ids,
            sample_ids,
            counts,
            depths,
        })
    }

    /// Builds a table with generated ids `f1..fD` and `s1..sN`.
    pub fn from_counts(counts: Array2<u64>) -> Result<Self> {
        let (d, n) = counts.dim();
        let features = (1..=d).map(|i| format!("f{i}")).collect();
        let samples = (1..=n).map(|i| format!("s{i}")).collect();
        CountTable::new(features, samples, counts)
    }

    pub fn num_features(&self) -> usize {
        self.counts.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.counts.ncols()
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn counts(&self) -> ArrayView2<'_, u64> {
        self.counts.view()
    }

    /// Column sums.
    pub fn depths(&self) -> &[u64] {
        &self.depths
    }

    /// Restricts the table to the given feature rows, in the given order.
    pub fn select_features(&self, rows: &[usize]) -> Result<Self> {
        let counts = self.counts.select(Axis(0), rows);
        let ids = rows.iter().map(|&r| self.feature_ids[r].clone()).collect();
        CountTable::new(ids, self.sample_ids.clone(), counts)
    }

    /// Reorders the sample columns.
    pub fn select_samples(&self, cols: &[usize]) -> Result<Self> {
        let counts = self.counts.select(Axis(1), cols);
        let ids = cols.iter().map(|&c| self.sample_ids[c].clone()).collect();
        CountTable::new(self.feature_ids.clone(), ids, counts)
    }

    /// Mean count per feature.
    pub fn feature_means(&self) -> Vec<f64> {
        let n = self.num_samples() as f64;
        self.counts
            .outer_iter()
            .map(|row| row.iter().map(|&c| c as f64).sum::<f64>() / n)
            .collect()
    }

    /// Fraction of samples in which each feature is observed.
    pub fn feature_prevalence(&self) -> Vec<f64> {
        let n = self.num_samples() as f64;
        self.counts
            .outer_iter()
            .map(|row| row.iter().filter(|&&c| c > 0).count() as f64 / n)
            .collect()
    }
}

/// Binary condition assignment per sample: `false` is control (0), `true`
/// is case (1).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionLabels {
    assignment: Vec<bool>,
}

impl ConditionLabels {
    pub fn new(assignment: Vec<bool>) -> Result<Self> {
        let case = assignment.iter().filter(|&&x| x).count();
        let control = assignment.len() - case;
        if case == 0 || control == 0 {
            return Err(Error::SingleCondition { control, case });
        }
        Ok(ConditionLabels { assignment })
    }

    /// From 0/1 indicators; any other value is rejected.
    pub fn from_indicators(values: &[u8]) -> Result<Self> {
        let assignment = values
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidInput(format!("condition indicator {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        ConditionLabels::new(assignment)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[bool] {
        &self.assignment
    }

    pub fn is_case(&self, n: usize) -> bool {
        self.assignment[n]
    }

    pub fn case_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.assignment[n]).collect()
    }

    pub fn control_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.assignment[n]).collect()
    }

    pub fn num_case(&self) -> usize {
        self.assignment.iter().filter(|&&x| x).count()
    }

    pub fn num_control(&self) -> usize {
        self.len() - self.num_case()
    }

    /// Case and control exchanged.
    pub fn swapped(&self) -> Self {
        ConditionLabels {
            assignment: self.assignment.iter().map(|x| !x).collect(),
        }
    }

    pub fn select(&self, cols: &[usize]) -> Result<Self> {
        ConditionLabels::new(cols.iter().map(|&c| self.assignment[c]).collect())
    }
}

/// Settings for one analysis run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Dirichlet pseudo-count added to every cell.
    pub alpha_prior: f64,
    /// Number of Monte Carlo draws.
    pub num_draws: usize,
    pub seed: u64,
    pub target_fdr: f64,
    /// Fixed mode-search interval; when absent each draw uses
    /// `[min - 3h, max + 3h]` of its own values.
    pub mode_search_interval: Option<(f64, f64)>,
    pub kde_grid_size: usize,
    pub filter_min_mean_count: f64,
    pub filter_min_prevalence: f64,
    /// Compute the averaged LFC density exported by `write_report`.
    pub collect_diagnostics: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            alpha_prior: 0.5,
            num_draws: 128,
            seed: 0,
            target_fdr: 0.05,
            mode_search_interval: None,
            kde_grid_size: 512,
            filter_min_mean_count: 0.0,
            filter_min_prevalence: 0.0,
            collect_diagnostics: true,
        }
    }
}

impl AnalysisConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_draws(mut self, num_draws: usize) -> Self {
        self.num_draws = num_draws;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.alpha_prior.is_finite() || self.alpha_prior <= 0.0 {
            return bad(format!("alpha_prior must be a positive finite number, got {}", self.alpha_prior));
        }
        if self.num_draws < 2 {
            return bad(format!("num_draws must be at least 2, got {}", self.num_draws));
        }
        if !self.target_fdr.is_finite() || self.target_fdr <= 0.0 || self.target_fdr >= 1.0 {
            return bad(format!("target_fdr must lie in (0, 1), got {}", self.target_fdr));
        }
        if let Some((lo, hi)) = self.mode_search_interval {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return bad(format!("mode search interval must satisfy t_l < t_u, got [{lo}, {hi}]"));
            }
        }
        if self.kde_grid_size < 16 {
            return bad(format!("kde_grid_size must be at least 16, got {}", self.kde_grid_size));
        }
        if !self.filter_min_mean_count.is_finite() || self.filter_min_mean_count < 0.0 {
            return bad(format!(
                "filter_min_mean_count must be non-negative, got {}",
                self.filter_min_mean_count
            ));
        }
        if !self.filter_min_prevalence.is_finite() || !(0.0..=1.0).contains(&self.filter_min_prevalence) {
            return bad(format!(
                "filter_min_prevalence must lie in [0, 1], got {}",
                self.filter_min_prevalence
            ));
        }
        Ok(())
    }
}

/// Inputs that passed validation, restricted to the retained features.
#[derive(Clone, Debug)]
pub struct AnalysisContext {
    pub table: CountTable,
    pub labels: ConditionLabels,
    pub config: AnalysisConfig,
    /// Row indices of the retained features in the original table.
    pub retained: Vec<usize>,
}

/// Checks every invariant and applies the mean-count and prevalence filters.
pub fn validate_inputs(
    table: &CountTable,
    labels: &ConditionLabels,
    config: &AnalysisConfig,
) -> Result<AnalysisContext> {
    config.validate()?;
    if labels.len() != table.num_samples() {
        return Err(Error::DimensionMismatch(format!(
            "{} condition labels for {} samples",
            labels.len(),
            table.num_samples()
        )));
    }
    let means = table.feature_means();
    let prevalence = table.feature_prevalence();
    let retained: Vec<usize> = (0..table.num_features())
        .filter(|&d| means[d] >= config.filter_min_mean_count && prevalence[d] >= config.filter_min_prevalence)
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    if retained.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} feature retained after filtering; at least 2 are required",
            retained.len()
        )));
    }
    let filtered = if retained.len() == table.num_features() {
        table.clone()
    } else {
        table.select_features(&retained)?
    };
    Ok(AnalysisContext {
        table: filtered,
        labels: labels.clone(),
        config: config.clone(),
        retained,
    })
}
