//! Synthetic count data and the replicate benchmark harness.
//!
//! The generator is a transparent log-normal / multinomial model: per-feature
//! baseline log abundances, case-group effects of magnitude `5 * Beta(1, 3) + 1`
//! on a random subset of features, a per-sample log-load jitter, and
//! multinomial sequencing at a fixed (or Poisson) depth.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline_on, ScalePrior, DEFAULT_INFORMED_GAMMA2};
use crate::data::{validate_inputs, AnalysisConfig, ConditionLabels, CountTable};
use crate::error::{Error, Result};
use crate::inference::{run_sparse_ssrv_on, DaReport};
use crate::rng::{derive_seed, role, stream_id, substream, RngStream};

/// Declared in every benchmark export.
pub const GENERATOR_NOTE: &str =
    "synthetic data from a log-normal abundance / multinomial sequencing generator (simplified stand-in for a trained microbiome simulator)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub num_features: usize,
    pub num_samples: usize,
    /// Expected reads per sample.
    pub depth: f64,
    /// Fraction of features with a true effect.
    pub prop_relevant: f64,
    /// Fraction of the relevant effects that are positive.
    pub pos_frac: f64,
    pub base_log_mean: f64,
    pub base_log_sd: f64,
    /// Standard deviation of the per-sample log-load jitter.
    pub load_sd: f64,
    /// Draw per-sample depth from Poisson(depth) instead of fixing it.
    pub poisson_depth: bool,
    /// Multiplies the absolute abundances of every case sample. Counts do
    /// not depend on it; only the true loads do.
    pub case_load_multiplier: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            num_features: 300,
            num_samples: 100,
            depth: 750_000.0,
            prop_relevant: 0.2,
            pos_frac: 0.8,
            base_log_mean: 0.0,
            base_log_sd: 1.5,
            load_sd: 0.25,
            poisson_depth: false,
            case_load_multiplier: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_features < 2 || self.num_samples < 2 {
            return bad(format!(
                "need at least 2 features and 2 samples, got {}x{}",
                self.num_features, self.num_samples
            ));
        }
        if !(0.0..=1.0).contains(&self.prop_relevant) || !(0.0..=1.0).contains(&self.pos_frac) {
            return bad("prop_relevant and pos_frac must lie in [0, 1]".into());
        }
        if !(self.depth.is_finite() && self.depth >= self.num_features as f64) {
            return bad(format!(
                "depth ({}) must be at least the number of features ({})",
                self.depth, self.num_features
            ));
        }
        if !(self.base_log_sd.is_finite() && self.base_log_sd >= 0.0)
            || !(self.load_sd.is_finite() && self.load_sd >= 0.0)
            || !self.base_log_mean.is_finite()
        {
            return bad("abundance and load parameters must be finite with non-negative spreads".into());
        }
        if !(self.case_load_multiplier > 0.0 && self.case_load_multiplier.is_finite()) {
            return bad("case_load_multiplier must be positive".into());
        }
        Ok(())
    }

    pub fn num_relevant(&self) -> usize {
        (self.prop_relevant * self.num_features as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub table: CountTable,
    pub labels: ConditionLabels,
    /// True log-fold change per feature (0 for unaffected features).
    pub truth: Vec<f64>,
    /// Total absolute abundance of each sample.
    pub true_loads: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SyntheticDataset {
    pub fn relevant(&self) -> Vec<bool> {
        self.truth.iter().map(|&t| t != 0.0).collect()
    }
}

fn gen_rng(seed: u64, part: u64) -> RngStream {
    substream(seed, stream_id(role::GENERATOR, part))
}

/// Effect magnitude `5 * Beta(1, 3) + 1`, in `[1, 6]`.
pub fn draw_effect_magnitude<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    5.0 * Beta::new(1.0, 3.0).expect("valid beta").sample(rng) + 1.0
}

fn multinomial<R: Rng + ?Sized>(total: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = total;
    let mut mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
    out
}

/// Draws one dataset. Controls are the first `N / 2` samples.
///
/// Every random component uses its own stream, so datasets that differ only
/// in `pos_frac` share baseline abundances, the relevant set, and the effect
/// magnitudes; the positive effects of a smaller `pos_frac` are a subset of
/// those of a larger one.
pub fn generate(spec: &GeneratorSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let d = spec.num_features;
    let n = spec.num_samples;
    let mut warnings = Vec::new();

    let mut base_rng = gen_rng(spec.seed, 0);
    let base_dist = Normal::new(spec.base_log_mean, spec.base_log_sd).expect("validated");
    let base: Vec<f64> = (0..d).map(|_| base_dist.sample(&mut base_rng)).collect();

    let k = spec.num_relevant();
    if k == 0 && spec.prop_relevant > 0.0 {
        warnings.push(format!(
            "prop_relevant {} rounds to zero relevant features among {d}; dataset is pure null",
            spec.prop_relevant
        ));
    }
    let mut truth = vec![0.0; d];
    let mut select_rng = gen_rng(spec.seed, 1);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut select_rng);
    let relevant = &order[..k];
    let mut effect_rng = gen_rng(spec.seed, 2);
    let magnitudes: Vec<f64> = (0..k).map(|_| draw_effect_magnitude(&mut effect_rng)).collect();
    let mut sign_order: Vec<usize> = (0..k).collect();
    sign_order.shuffle(&mut gen_rng(spec.seed, 3));
    let num_positive = (spec.pos_frac * k as f64).round() as usize;
    for (rank, &j) in sign_order.iter().enumerate() {
        let sign = if rank < num_positive { 1.0 } else { -1.0 };
        truth[relevant[j]] = sign * magnitudes[j];
    }

    let assignment: Vec<bool> = (0..n).map(|i| i >= n / 2).collect();
    let labels = ConditionLabels::new(assignment)?;

    let mut load_rng = gen_rng(spec.seed, 4);
    let jitter: Vec<f64> = if spec.load_sd > 0.0 {
        let dist = Normal::new(0.0, spec.load_sd).expect("validated");
        (0..n).map(|_| dist.sample(&mut load_rng)).collect()
    } else {
        vec![0.0; n]
    };

    let mut depth_rng = gen_rng(spec.seed, 5);
    let depths: Vec<u64> = (0..n)
        .map(|_| {
            if spec.poisson_depth {
                let x: f64 = Poisson::new(spec.depth).expect("validated").sample(&mut depth_rng);
                (x as u64).max(1)
            } else {
                spec.depth.round() as u64
            }
        })
        .collect();

    let mut counts = Array2::<u64>::zeros((d, n));
    let mut true_loads = Vec::with_capacity(n);
    for col in 0..n {
        let case = labels.is_case(col);
        let log_abundance: Vec<f64> = (0..d)
            .map(|row| base[row] + if case { truth[row] } else { 0.0 } + jitter[col])
            .collect();
        let max = log_abundance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = log_abundance.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = rel.iter().sum();
        let probs: Vec<f64> = rel.iter().map(|r| r / total).collect();
        let multiplier = if case { spec.case_load_multiplier } else { 1.0 };
        true_loads.push(max.exp() * total * multiplier);
        let mut rng = gen_rng(spec.seed, 16 + col as u64);
        let column = multinomial(depths[col], &probs, &mut rng);
        for (row, c) in column.into_iter().enumerate() {
            counts[[row, col]] = c;
        }
    }
    let table = CountTable::from_counts(counts)?;
    Ok(SyntheticDataset {
        table,
        labels,
        truth,
        true_loads,
        warnings,
    })
}

/// Methods the benchmark can score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    SparseSsrv,
    Clr,
    GaussianClr { gamma2: f64 },
    /// Informed scale model fed the generator's true loads.
    Informed { gamma2: f64 },
    /// Reports exactly the truly relevant features.
    Oracle,
    /// Reports every feature.
    FlagAll,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::SparseSsrv => "sparse-ssrv".into(),
            Method::Clr => "clr".into(),
            Method::GaussianClr { gamma2 } => format!("gaussian-clr(gamma2={gamma2})"),
            Method::Informed { gamma2 } => format!("informed(gamma2={gamma2})"),
            Method::Oracle => "oracle".into(),
            Method::FlagAll => "flag-all".into(),
        }
    }

    pub fn parse(name: &str, gamma2: Option<f64>) -> Result<Self> {
        match name {
            "sparse-ssrv" => Ok(Method::SparseSsrv),
            "clr" => Ok(Method::Clr),
            "gaussian-clr" => Ok(Method::GaussianClr {
                gamma2: gamma2.unwrap_or(DEFAULT_INFORMED_GAMMA2),
            }),
            "informed" => Ok(Method::Informed {
                gamma2: gamma2.unwrap_or(DEFAULT_INFORMED_GAMMA2),
            }),
            "oracle" => Ok(Method::Oracle),
            "flag-all" => Ok(Method::FlagAll),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Runs a statistical method on a synthetic dataset.
pub fn analyze_dataset(method: &Method, data: &SyntheticDataset, config: &AnalysisConfig) -> Result<DaReport> {
    let ctx = validate_inputs(&data.table, &data.labels, config)?;
    match method {
        Method::SparseSsrv => run_sparse_ssrv_on(&ctx),
        Method::Clr => run_baseline_on(&ctx, &ScalePrior::ClrDegenerate),
        Method::GaussianClr { gamma2 } => run_baseline_on(&ctx, &ScalePrior::GaussianClr { gamma2: *gamma2 }),
        Method::Informed { gamma2 } => run_baseline_on(
            &ctx,
            &ScalePrior::InformedLoad {
                loads: data.true_loads.clone(),
                gamma2: *gamma2,
            },
        ),
        Method::Oracle | Method::FlagAll => Err(Error::InvalidConfig(format!(
            "{} is a reference classifier, not a statistical method",
            method.name()
        ))),
    }
}

/// Per-feature calls (in original feature order) of a method on a dataset.
pub fn calls(method: &Method, data: &SyntheticDataset, config: &AnalysisConfig) -> Result<Vec<bool>> {
    match method {
        Method::Oracle => Ok(data.relevant()),
        Method::FlagAll => Ok(vec![true; data.truth.len()]),
        _ => {
            let report = analyze_dataset(method, data, config)?;
            let mut out = vec![false; data.truth.len()];
            for (&row, s) in report.retained.iter().zip(&report.summaries) {
                out[row] = s.significant;
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn score(calls: &[bool], relevant: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&call, &rel) in calls.iter().zip(relevant) {
            match (call, rel) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// `FP / max(1, FP + TP)`.
    pub fn fdr(&self) -> f64 {
        self.fp as f64 / (self.fp + self.tp).max(1) as f64
    }

    /// `TP / (TP + FN)`; 1 when there is nothing to find.
    pub fn tpr(&self) -> f64 {
        let positives = self.tp + self.fn_;
        if positives == 0 {
            1.0
        } else {
            self.tp as f64 / positives as f64
        }
    }

    /// `1.25 TP / (1.25 TP + 0.25 FN + FP)`; 1 when the denominator is zero.
    pub fn f_half(&self) -> f64 {
        let beta2 = 0.25;
        let num = (1.0 + beta2) * self.tp as f64;
        let den = num + beta2 * self.fn_ as f64 + self.fp as f64;
        if den == 0.0 {
            1.0
        } else {
            num / den
        }
    }

    pub fn discoveries(&self) -> usize {
        self.tp + self.fp
    }

    /// Discoveries as a fraction of all features.
    pub fn discovery_fraction(&self) -> f64 {
        self.discoveries() as f64 / (self.tp + self.fp + self.tn + self.fn_).max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub spec: GeneratorSpec,
}

/// Aggregated scores for one (scenario, method) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub scenario: String,
    pub method: String,
    pub replicates: usize,
    pub failures: usize,
    pub fdr: f64,
    pub tpr: f64,
    pub f_half: f64,
    pub discovery_fraction: f64,
    /// Per replicate; `None` where the method failed.
    pub confusions: Vec<Option<Confusion>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub note: String,
    pub scenarios: Vec<Scenario>,
    pub scores: Vec<MethodScore>,
}

impl BenchmarkResult {
    pub fn score(&self, scenario: &str, method: &str) -> Option<&MethodScore> {
        self.scores.iter().find(|s| s.scenario == scenario && s.method == method)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Generator seed of replicate `r` for a scenario.
pub fn replicate_seed(spec_seed: u64, r: usize) -> u64 {
    derive_seed(spec_seed, r as u64)
}

/// Generates, analyzes and scores every scenario × method × replicate.
/// Replicate `r` uses generator seed `replicate_seed(spec.seed, r)` and
/// analysis seed `derive_seed(analysis.seed, r)`, so scenarios sharing a
/// generator seed are matched replicate-by-replicate. A method error on a
/// replicate is recorded as a failure.
pub fn run_benchmark(
    scenarios: &[Scenario],
    methods: &[Method],
    replicates: usize,
    analysis: &AnalysisConfig,
) -> Result<BenchmarkResult> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("at least one replicate is required".into()));
    }
    analysis.validate()?;
    for sc in scenarios {
        sc.spec.validate()?;
    }
    let mut scores = Vec::with_capacity(scenarios.len() * methods.len());
    for sc in scenarios {
        let per_rep: Vec<Result<Vec<Option<Confusion>>>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let spec = GeneratorSpec {
                    seed: replicate_seed(sc.spec.seed, r),
                    ..sc.spec.clone()
                };
                let data = generate(&spec)?;
                let relevant = data.relevant();
                let config = AnalysisConfig {
                    seed: derive_seed(analysis.seed, r as u64),
                    collect_diagnostics: false,
                    ..analysis.clone()
                };
                Ok(methods
                    .iter()
                    .map(|m| calls(m, &data, &config).ok().map(|c| Confusion::score(&c, &relevant)))
                    .collect())
            })
            .collect();
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
        for (mi, method) in methods.iter().enumerate() {
            let confusions: Vec<Option<Confusion>> = per_rep.iter().map(|r| r[mi]).collect();
            let ok: Vec<Confusion> = confusions.iter().flatten().copied().collect();
            scores.push(MethodScore {
                scenario: sc.name.clone(),
                method: method.name(),
                replicates,
                failures: replicates - ok.len(),
                fdr: mean(ok.iter().map(Confusion::fdr)),
                tpr: mean(ok.iter().map(Confusion::tpr)),
                f_half: mean(ok.iter().map(Confusion::f_half)),
                discovery_fraction: mean(ok.iter().map(Confusion::discovery_fraction)),
                confusions,
            });
        }
    }
    Ok(BenchmarkResult {
        note: GENERATOR_NOTE.to_string(),
        scenarios: scenarios.to_vec(),
        scores,
    })
}

/// Which generator parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Sparsity,
    Sign,
    Features,
    Samples,
    Depth,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sparsity" => Ok(SweepParameter::Sparsity),
            "sign" => Ok(SweepParameter::Sign),
            "features" => Ok(SweepParameter::Features),
            "samples" => Ok(SweepParameter::Samples),
            "depth" => Ok(SweepParameter::Depth),
            other => Err(Error::InvalidConfig(format!("unknown sweep '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Sparsity => "sparsity",
            SweepParameter::Sign => "sign",
            SweepParameter::Features => "features",
            SweepParameter::Samples => "samples",
            SweepParameter::Depth => "depth",
        }
    }

    pub fn apply(self, base: &GeneratorSpec, level: f64) -> GeneratorSpec {
        let mut spec = base.clone();
        match self {
            SweepParameter::Sparsity => spec.prop_relevant = level,
            SweepParameter::Sign => spec.pos_frac = level,
            SweepParameter::Features => spec.num_features = level.round() as usize,
            SweepParameter::Samples => spec.num_samples = level.round() as usize,
            SweepParameter::Depth => spec.depth = level,
        }
        spec
    }
}

/// One scenario per level, all sharing the base generator seed.
pub fn sweep_scenarios(parameter: SweepParameter, base: &GeneratorSpec, levels: &[f64]) -> Vec<Scenario> {
    levels
        .iter()
        .map(|&level| Scenario {
            name: format!("{}={level}", parameter.name()),
            spec: parameter.apply(base, level),
        })
        .collect()
}

/// Benchmark across levels of `prop_relevant`.
pub fn sparsity_sweep(
    base: &GeneratorSpec,
    prop_levels: &[f64],
    methods: &[Method],
    replicates: usize,
    analysis: &AnalysisConfig,
) -> Result<BenchmarkResult> {
    if let Some(bad) = prop_levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidConfig(format!("sparsity level {bad} is outside [0, 1]")));
    }
    run_benchmark(
        &sweep_scenarios(SweepParameter::Sparsity, base, prop_levels),
        methods,
        replicates,
        analysis,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> GeneratorSpec {
        GeneratorSpec {
            num_features: 60,
            num_samples: 10,
            depth: 20_000.0,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate(&small_spec()).unwrap();
        let b = generate(&small_spec()).unwrap();
        assert_eq!(a, b);
        let c = generate(&GeneratorSpec { seed: 4, ..small_spec() }).unwrap();
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn depths_are_fixed_by_default() {
        let data = generate(&small_spec()).unwrap();
        assert!(data.table.depths().iter().all(|&d| d == 20_000));
        let jittered = generate(&GeneratorSpec {
            poisson_depth: true,
            ..small_spec()
        })
        .unwrap();
        assert!(jittered.table.depths().iter().any(|&d| d != 20_000));
    }

    #[test]
    fn null_generator_has_no_effects() {
        let data = generate(&GeneratorSpec {
            prop_relevant: 0.0,
            ..small_spec()
        })
        .unwrap();
        assert!(data.truth.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn tiny_proportion_is_flagged() {
        let data = generate(&GeneratorSpec {
            prop_relevant: 0.001,
            ..small_spec()
        })
        .unwrap();
        assert!(data.truth.iter().all(|&t| t == 0.0));
        assert_eq!(data.warnings.len(), 1);
    }

    #[test]
    fn relevant_count_and_sign_split() {
        let data = generate(&small_spec()).unwrap();
        let nonzero: Vec<f64> = data.truth.iter().copied().filter(|&t| t != 0.0).collect();
        assert_eq!(nonzero.len(), 12);
        assert_eq!(nonzero.iter().filter(|&&t| t > 0.0).count(), 10);
        assert!(nonzero.iter().all(|t| (1.0..=6.0).contains(&t.abs())));
    }

    #[test]
    fn sign_sweeps_share_everything_but_signs() {
        let a = generate(&GeneratorSpec { pos_frac: 0.5, ..small_spec() }).unwrap();
        let b = generate(&GeneratorSpec { pos_frac: 1.0, ..small_spec() }).unwrap();
        for (x, y) in a.truth.iter().zip(&b.truth) {
            assert_eq!(x.abs(), y.abs());
            if *x > 0.0 {
                assert!(*y > 0.0);
            }
        }
    }

    #[test]
    fn case_load_multiplier_changes_loads_not_counts() {
        let a = generate(&small_spec()).unwrap();
        let b = generate(&GeneratorSpec {
            case_load_multiplier: 7.5,
            ..small_spec()
        })
        .unwrap();
        assert_eq!(a.table, b.table);
        for n in 0..10 {
            let ratio = b.true_loads[n] / a.true_loads[n];
            let expected = if a.labels.is_case(n) { 7.5 } else { 1.0 };
            assert!((ratio - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = substream(1, 1);
        let probs = [0.1, 0.0, 0.6, 0.3];
        let c = multinomial(1000, &probs, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(c[1], 0);
    }

    #[test]
    fn confusion_scores() {
        // Hand-checked triple: TP=8, FP=2, FN=4.
        let c = Confusion { tp: 8, fp: 2, tn: 86, fn_: 4 };
        assert!((c.fdr() - 0.2).abs() < 1e-15);
        assert!((c.tpr() - 8.0 / 12.0).abs() < 1e-15);
        assert!((c.f_half() - 10.0 / 13.0).abs() < 1e-15);
        assert!((c.fdr() + 8.0 / 10.0 - 1.0).abs() < 1e-15);
        let empty = Confusion { tp: 0, fp: 0, tn: 10, fn_: 0 };
        assert_eq!(empty.fdr(), 0.0);
    }

    #[test]
    fn oracle_and_flag_all() {
        let scenario = Scenario {
            name: "base".into(),
            spec: small_spec(),
        };
        let result = run_benchmark(
            &[scenario],
            &[Method::Oracle, Method::FlagAll],
            3,
            &AnalysisConfig::default(),
        )
        .unwrap();
        let oracle = result.score("base", "oracle").unwrap();
        assert_eq!((oracle.fdr, oracle.tpr, oracle.f_half), (0.0, 1.0, 1.0));
        let all = result.score("base", "flag-all").unwrap();
        assert_eq!(all.tpr, 1.0);
        assert!((all.fdr - 0.8).abs() < 1e-12);
    }

    #[test]
    fn singleton_sweep_is_one_scenario() {
        let result = sparsity_sweep(&small_spec(), &[0.05], &[Method::Oracle], 2, &AnalysisConfig::default()).unwrap();
        assert_eq!(result.scenarios.len(), 1);
        assert_eq!(result.scenarios[0].spec.prop_relevant, 0.05);
        assert!(sparsity_sweep(&small_spec(), &[1.5], &[Method::Oracle], 2, &AnalysisConfig::default()).is_err());
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // Every feature filtered out: the method errors on each replicate.
        let config = AnalysisConfig {
            filter_min_mean_count: 1e12,
            ..Default::default()
        };
        let scenario = Scenario {
            name: "x".into(),
            spec: small_spec(),
        };
        let result = run_benchmark(&[scenario], &[Method::Clr, Method::Oracle], 2, &config).unwrap();
        assert_eq!(result.score("x", "clr").unwrap().failures, 2);
        assert_eq!(result.score("x", "oracle").unwrap().failures, 0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(GeneratorSpec { depth: 10.0, ..small_spec() }.validate().is_err());
        assert!(GeneratorSpec { pos_frac: 1.5, ..small_spec() }.validate().is_err());
    }
}
