use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sparse_ssrv::baselines::{run_baseline_on, DEFAULT_INFORMED_GAMMA2};
use sparse_ssrv::inference::{run_sparse_ssrv_on, LadderRung, SOFTWARE_VERSION};
use sparse_ssrv::io::{self, LogBase, RunManifest, TableFormat};
use sparse_ssrv::sim::{run_benchmark, sweep_scenarios, Scenario, SweepParameter};
use sparse_ssrv::{consistency_probe, generate, validate_inputs, AnalysisConfig, GeneratorSpec, Method, ScalePrior};

const THREADS_VAR: &str = "SPARSE_SSRV_THREADS";

#[derive(Parser, Debug)]
#[command(name = "sparse-ssrv", version, about = "Differential abundance analysis with sparse scale models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze a count table against a two-condition sample sheet.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic dataset with known truth.
    Simulate(SimulateArgs),
    /// Score methods over replicated synthetic scenarios.
    Benchmark(BenchmarkArgs),
    /// Write only the LFC density diagnostic of an analysis.
    Diagnose(DiagnoseArgs),
    /// Track estimation error along a ladder of depth and feature count.
    ProbeConsistency(ProbeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AnalysisMethod {
    SparseSsrv,
    Clr,
    GaussianClr,
    Informed,
}

impl AnalysisMethod {
    fn name(self) -> &'static str {
        match self {
            AnalysisMethod::SparseSsrv => "sparse-ssrv",
            AnalysisMethod::Clr => "clr",
            AnalysisMethod::GaussianClr => "gaussian-clr",
            AnalysisMethod::Informed => "informed",
        }
    }

    fn parse(name: &str) -> Result<Self> {
        AnalysisMethod::from_str(name, false).map_err(|e| anyhow::anyhow!("unknown method '{name}': {e}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LogBaseArg {
    E,
    #[value(name = "2")]
    Two,
}

impl From<LogBaseArg> for LogBase {
    fn from(b: LogBaseArg) -> Self {
        match b {
            LogBaseArg::E => LogBase::E,
            LogBaseArg::Two => LogBase::Two,
        }
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Count table (features as rows unless --transpose).
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Sample sheet with sample_id, condition and optional load columns.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Condition value to treat as the case group.
    #[arg(long)]
    case: Option<String>,
    /// The count table has samples as rows.
    #[arg(long)]
    transpose: bool,
    /// Field delimiter of the count table (default: by extension).
    #[arg(long)]
    delimiter: Option<char>,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Dirichlet pseudo-count.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Monte Carlo draws.
    #[arg(long, default_value_t = 128)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target false discovery rate.
    #[arg(long, default_value_t = 0.05)]
    fdr: f64,
    #[arg(long, default_value_t = 0.0)]
    min_mean_count: f64,
    #[arg(long, default_value_t = 0.0)]
    min_prevalence: f64,
    /// Grid points of the density diagnostic.
    #[arg(long, default_value_t = 512)]
    grid_size: usize,
}

impl ConfigArgs {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            alpha_prior: self.alpha,
            num_draws: self.draws,
            seed: self.seed,
            target_fdr: self.fdr,
            kde_grid_size: self.grid_size,
            filter_min_mean_count: self.min_mean_count,
            filter_min_prevalence: self.min_prevalence,
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = AnalysisMethod::SparseSsrv)]
    method: AnalysisMethod,
    /// Log-scale variance for gaussian-clr and informed.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Base of the reported log-fold changes.
    #[arg(long, value_enum, default_value_t = LogBaseArg::E)]
    log_base: LogBaseArg,
    /// Repeat the run recorded in a manifest.json (other inputs ignored).
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct GeneratorArgs {
    #[arg(long, default_value_t = 300)]
    features: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Expected reads per sample.
    #[arg(long, default_value_t = 750_000.0)]
    depth: f64,
    #[arg(long, default_value_t = 0.2)]
    prop_relevant: f64,
    #[arg(long, default_value_t = 0.8)]
    pos_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    base_log_mean: f64,
    #[arg(long, default_value_t = 1.5)]
    base_log_sd: f64,
    #[arg(long, default_value_t = 0.25)]
    load_sd: f64,
    /// Draw each sample's depth from a Poisson around --depth.
    #[arg(long)]
    poisson_depth: bool,
    /// Multiply case-group loads (counts are unaffected).
    #[arg(long, default_value_t = 1.0)]
    case_load_multiplier: f64,
    #[arg(long = "gen-seed", default_value_t = 0)]
    gen_seed: u64,
}

impl GeneratorArgs {
    fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            num_features: self.features,
            num_samples: self.samples,
            depth: self.depth,
            prop_relevant: self.prop_relevant,
            pos_frac: self.pos_frac,
            base_log_mean: self.base_log_mean,
            base_log_sd: self.base_log_sd,
            load_sd: self.load_sd,
            poisson_depth: self.poisson_depth,
            case_load_multiplier: self.case_load_multiplier,
            seed: self.gen_seed,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// JSON list of scenarios ({"name": ..., "spec": {...}}).
    #[arg(long, conflicts_with = "sweep")]
    scenarios: Option<PathBuf>,
    /// Generator parameter to sweep: sparsity, sign, features, samples, depth.
    #[arg(long, requires = "levels")]
    sweep: Option<String>,
    /// Comma-separated sweep levels.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    /// Comma-separated methods: sparse-ssrv, clr, gaussian-clr, informed, oracle, flag-all.
    #[arg(long, value_delimiter = ',', default_value = "sparse-ssrv,clr")]
    methods: Vec<String>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Monte Carlo draws per analysis. Calls need roughly S > 2 D / target_fdr.
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    fdr: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = LogBaseArg::E)]
    log_base: LogBaseArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Ladder rungs as depth:features pairs.
    #[arg(long, value_delimiter = ',', default_value = "1e3:100,1e4:400,1e5:1600")]
    ladder: Vec<String>,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value = "sparse-ssrv")]
    method: String,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long, default_value_t = 128)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output TSV.
    #[arg(long)]
    out: PathBuf,
}

fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_VAR} must be a non-negative integer, got '{v}'")),
        Err(_) => Ok(0),
    }
}

fn table_format(input: &InputArgs) -> Result<TableFormat> {
    let delimiter = match input.delimiter {
        None => None,
        Some(c) if c.is_ascii() => Some(c as u8),
        Some(c) => bail!("delimiter must be a single ASCII character, got '{c}'"),
    };
    Ok(TableFormat {
        delimiter,
        transpose: input.transpose,
    })
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| anyhow::anyhow!("missing required input --{flag}"))
}

struct Loaded {
    table: sparse_ssrv::CountTable,
    labels: sparse_ssrv::ConditionLabels,
    loads: Option<Vec<f64>>,
}

fn load_inputs(counts: &Path, metadata: &Path, format: &TableFormat, case: Option<&str>) -> Result<Loaded> {
    let table = io::read_count_table(counts, format)?;
    let meta = io::read_metadata(metadata, case)?;
    let (labels, loads) = meta.align(&table)?;
    Ok(Loaded { table, labels, loads })
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn analyze(args: AnalyzeArgs, threads: usize) -> Result<()> {
    let started = io::unix_now();
    let mut manifest = match &args.from_manifest {
        Some(path) => io::read_manifest(path)?,
        None => RunManifest {
            command: "analyze".into(),
            method: args.method.name().into(),
            counts_path: Some(required(&args.input.counts, "counts")?.to_path_buf()),
            metadata_path: Some(required(&args.input.metadata, "metadata")?.to_path_buf()),
            table_format: table_format(&args.input)?,
            case_value: args.input.case.clone(),
            gamma2: args.gamma2,
            log_base: args.log_base.into(),
            config: args.config.config(),
            seed: args.config.seed,
            software_version: SOFTWARE_VERSION.into(),
            started_unix: 0.0,
            finished_unix: 0.0,
            threads,
            warnings: Vec::new(),
        },
    };
    let method = AnalysisMethod::parse(&manifest.method)?;
    let counts = required(&manifest.counts_path, "counts")?.to_path_buf();
    let metadata = required(&manifest.metadata_path, "metadata")?.to_path_buf();
    let inputs = load_inputs(&counts, &metadata, &manifest.table_format, manifest.case_value.as_deref())?;
    let ctx = validate_inputs(&inputs.table, &inputs.labels, &manifest.config)?;
    let gamma2 = manifest.gamma2.unwrap_or(DEFAULT_INFORMED_GAMMA2);
    let report = sparse_ssrv::with_threads(threads, || match method {
        AnalysisMethod::SparseSsrv => run_sparse_ssrv_on(&ctx),
        AnalysisMethod::Clr => run_baseline_on(&ctx, &ScalePrior::ClrDegenerate),
        AnalysisMethod::GaussianClr => run_baseline_on(&ctx, &ScalePrior::GaussianClr { gamma2 }),
        AnalysisMethod::Informed => match &inputs.loads {
            Some(loads) => run_baseline_on(
                &ctx,
                &ScalePrior::InformedLoad {
                    loads: loads.clone(),
                    gamma2,
                },
            ),
            None => Err(sparse_ssrv::Error::InvalidInput(
                "the informed method needs a load column in the metadata".into(),
            )),
        },
    })??;

    manifest.started_unix = started;
    manifest.finished_unix = io::unix_now();
    manifest.threads = threads;
    manifest.software_version = SOFTWARE_VERSION.into();
    manifest.warnings = report.warnings.clone();
    io::write_report_with_manifest(&report, &args.out, manifest.log_base, &manifest)?;
    print_warnings(&report.warnings);
    println!(
        "{}: {} of {} features significant at FDR {}; results in {}",
        report.method,
        report.num_significant(),
        report.summaries.len(),
        report.config.target_fdr,
        args.out.display()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = args.generator.spec();
    let data = generate(&spec)?;
    io::write_dataset(&data, &args.out)?;
    io::write_json(&spec, args.out.join("spec.json"))?;
    print_warnings(&data.warnings);
    println!(
        "simulated {} features x {} samples ({} relevant) into {}",
        spec.num_features,
        spec.num_samples,
        data.relevant().iter().filter(|&&r| r).count(),
        args.out.display()
    );
    Ok(())
}

fn benchmark(args: BenchmarkArgs, threads: usize) -> Result<()> {
    let (scenarios, sweep) = match (&args.scenarios, &args.sweep) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| sparse_ssrv::Error::Io { path: path.clone(), source: e })?;
            let scenarios: Vec<Scenario> =
                serde_json::from_str(&text).with_context(|| format!("invalid scenario file {}", path.display()))?;
            (scenarios, None)
        }
        (None, Some(name)) => {
            let parameter = SweepParameter::parse(name)?;
            if args.levels.is_empty() {
                bail!("--sweep needs --levels");
            }
            (sweep_scenarios(parameter, &args.generator.spec(), &args.levels), Some(parameter))
        }
        (None, None) => (
            vec![Scenario {
                name: "baseline".into(),
                spec: args.generator.spec(),
            }],
            None,
        ),
    };
    if scenarios.is_empty() {
        bail!("no scenarios to run");
    }
    let methods = args
        .methods
        .iter()
        .map(|m| Method::parse(m.trim(), args.gamma2))
        .collect::<sparse_ssrv::Result<Vec<_>>>()?;
    let config = AnalysisConfig {
        alpha_prior: args.alpha,
        num_draws: args.draws,
        seed: args.seed,
        target_fdr: args.fdr,
        ..AnalysisConfig::default()
    };
    let result = sparse_ssrv::with_threads(threads, || run_benchmark(&scenarios, &methods, args.replicates, &config))??;
    io::write_benchmark(&result, &args.out, sweep.map(|p| (p.name(), args.levels.as_slice())))?;
    println!("{}", result.note);
    for s in &result.scores {
        println!(
            "{:<24} {:<28} FDR {:.4}  TPR {:.4}  F0.5 {:.4}  failures {}",
            s.scenario, s.method, s.fdr, s.tpr, s.f_half, s.failures
        );
    }
    Ok(())
}

fn diagnose(args: DiagnoseArgs, threads: usize) -> Result<()> {
    let counts = required(&args.input.counts, "counts")?;
    let metadata = required(&args.input.metadata, "metadata")?;
    let inputs = load_inputs(counts, metadata, &table_format(&args.input)?, args.input.case.as_deref())?;
    let config = AnalysisConfig {
        collect_diagnostics: true,
        ..args.config.config()
    };
    let ctx = validate_inputs(&inputs.table, &inputs.labels, &config)?;
    let report = sparse_ssrv::with_threads(threads, || run_sparse_ssrv_on(&ctx))??;
    let written = io::write_diagnostics(&report, &args.out, args.log_base.into())?;
    print_warnings(&report.warnings);
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn parse_ladder(items: &[String]) -> Result<Vec<LadderRung>> {
    items
        .iter()
        .map(|item| {
            let (depth, features) = item
                .split_once(':')
                .with_context(|| format!("ladder rung '{item}' is not depth:features"))?;
            Ok(LadderRung {
                depth: depth.trim().parse().with_context(|| format!("bad depth in '{item}'"))?,
                num_features: features.trim().parse().with_context(|| format!("bad feature count in '{item}'"))?,
            })
        })
        .collect()
}

fn probe(args: ProbeArgs, threads: usize) -> Result<()> {
    let ladder = parse_ladder(&args.ladder)?;
    let method = Method::parse(&args.method, args.gamma2)?;
    let config = AnalysisConfig::default().with_draws(args.draws).with_seed(args.seed);
    let base = args.generator.spec();
    let rows = sparse_ssrv::with_threads(threads, || consistency_probe(&base, &ladder, args.seeds, &method, &config))??;
    io::write_probe(&rows, &args.out)?;
    print!("{}", io::probe_tsv(&rows));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = thread_count()?;
    match cli.command {
        Command::Analyze(a) => analyze(a, threads),
        Command::Simulate(a) => simulate(a),
        Command::Benchmark(a) => benchmark(a, threads),
        Command::Diagnose(a) => diagnose(a, threads),
        Command::ProbeConsistency(a) => probe(a, threads),
    }
}

/// 2 for I/O failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io_failure = err.chain().any(|cause| {
        cause.downcast_ref::<sparse_ssrv::Error>().is_some_and(|e| e.is_io()) || cause.is::<std::io::Error>()
    });
    if io_failure {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
