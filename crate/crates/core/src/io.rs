//! File formats: count tables, sample metadata, reports, manifests,
//! synthetic datasets, and benchmark exports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{AnalysisConfig, ConditionLabels, CountTable};
use crate::error::{Error, Result};
use crate::inference::{DaReport, ProbeRow};
use crate::sim::{BenchmarkResult, SyntheticDataset};

/// How to parse a count table file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableFormat {
    /// Field delimiter; sniffed from the extension when absent (`.csv` is
    /// comma-separated, anything else tab-separated).
    pub delimiter: Option<u8>,
    /// The file has samples as rows and features as columns.
    pub transpose: bool,
}

pub fn sniff_delimiter(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => b',',
        _ => b'\t',
    }
}

fn read_records(path: &Path, delimiter: u8) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        rows.push(record.iter().map(|s| s.trim().to_string()).collect());
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            row,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

fn parse_count(cell: &str, path: &Path, row: usize, column: usize) -> Result<u64> {
    let err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_nan() => Err(err(format!("count '{cell}' is not a number"))),
        Ok(v) if v < 0.0 => Err(err(format!("negative count '{cell}'"))),
        Ok(v) if v.is_infinite() => Err(err(format!("count '{cell}' is not finite"))),
        Ok(v) if v.fract() != 0.0 => Err(err(format!("non-integer count '{cell}'"))),
        Ok(v) if v <= u64::MAX as f64 => Ok(v as u64),
        Ok(_) => Err(err(format!("count '{cell}' is too large"))),
        Err(_) => Err(err(format!("non-numeric count '{cell}'"))),
    }
}

/// Reads a delimited count table. The header row holds sample ids (its first
/// cell is ignored); each further row is a feature id followed by
/// non-negative integer counts. Rows and columns in error messages are
/// 1-based positions in the file.
pub fn read_count_table(path: impl AsRef<Path>, format: &TableFormat) -> Result<CountTable> {
    let path = path.as_ref();
    let delimiter = format.delimiter.unwrap_or_else(|| sniff_delimiter(path));
    let rows = read_records(path, delimiter)?;
    let (header, body) = rows.split_first().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        row: 1,
        column: 1,
        message: "file is empty".into(),
    })?;
    let col_ids: Vec<String> = header[1..].to_vec();
    let width = header.len();
    let mut row_ids = Vec::with_capacity(body.len());
    let mut flat = Vec::with_capacity(body.len() * col_ids.len());
    for (i, record) in body.iter().enumerate() {
        let line = i + 2;
        if record.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: record.len().min(width) + 1,
                message: format!("ragged row: {} fields, header has {width}", record.len()),
            });
        }
        row_ids.push(record[0].clone());
        for (j, cell) in record[1..].iter().enumerate() {
            flat.push(parse_count(cell, path, line, j + 2)?);
        }
    }
    let counts = Array2::from_shape_vec((row_ids.len(), col_ids.len()), flat)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    if format.transpose {
        CountTable::new(col_ids, row_ids, counts.reversed_axes().as_standard_layout().to_owned())
    } else {
        CountTable::new(row_ids, col_ids, counts)
    }
}

fn create_file(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create_file(path)?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes a features-as-rows TSV that [`read_count_table`] reads back
/// unchanged.
pub fn write_count_table(table: &CountTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("feature_id");
    for s in table.sample_ids() {
        out.push('\t');
        out.push_str(s);
    }
    out.push('\n');
    for (id, row) in table.feature_ids().iter().zip(table.counts().outer_iter()) {
        out.push_str(id);
        for c in row {
            out.push('\t');
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

/// Sample sheet: id, condition, and optionally a measured total load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub sample_ids: Vec<String>,
    /// Per sample, in file order: `true` for the case condition.
    pub is_case: Vec<bool>,
    pub control_value: String,
    pub case_value: String,
    pub loads: Option<Vec<f64>>,
}

impl SampleMetadata {
    /// Labels (and loads) reordered to the table's sample order.
    pub fn align(&self, table: &CountTable) -> Result<(ConditionLabels, Option<Vec<f64>>)> {
        let index: std::collections::HashMap<&str, usize> =
            self.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if self.sample_ids.len() != table.num_samples() {
            return Err(Error::DimensionMismatch(format!(
                "metadata lists {} samples, count table has {}",
                self.sample_ids.len(),
                table.num_samples()
            )));
        }
        let mut order = Vec::with_capacity(table.num_samples());
        for s in table.sample_ids() {
            let i = index.get(s.as_str()).ok_or_else(|| {
                Error::DimensionMismatch(format!("sample '{s}' of the count table is missing from the metadata"))
            })?;
            order.push(*i);
        }
        let labels = ConditionLabels::new(order.iter().map(|&i| self.is_case[i]).collect())?;
        let loads = self.loads.as_ref().map(|l| order.iter().map(|&i| l[i]).collect());
        Ok((labels, loads))
    }
}

fn find_column(header: &[String], names: &[&str]) -> Option<usize> {
    header
        .iter()
        .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
}

/// Reads a sample sheet. Columns are found by header name (`sample_id`,
/// `condition`, optional `load`), falling back to the first two columns.
/// Conditions map to control/case by first appearance unless `case` names
/// the case value.
pub fn read_metadata(path: impl AsRef<Path>, case: Option<&str>) -> Result<SampleMetadata> {
    let path = path.as_ref();
    let rows = read_records(path, sniff_delimiter(path))?;
    let (header, body) = rows.split_first().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        row: 1,
        column: 1,
        message: "file is empty".into(),
    })?;
    if header.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: 1,
            message: "metadata needs sample_id and condition columns".into(),
        });
    }
    let id_col = find_column(header, &["sample_id", "sample", "id"]).unwrap_or(0);
    let cond_col = find_column(header, &["condition", "group"]).unwrap_or(if id_col == 1 { 0 } else { 1 });
    let load_col = find_column(header, &["load", "microbial_load", "total_load"]);

    let mut sample_ids = Vec::with_capacity(body.len());
    let mut conditions = Vec::with_capacity(body.len());
    let mut loads = load_col.map(|_| Vec::with_capacity(body.len()));
    for (i, record) in body.iter().enumerate() {
        let line = i + 2;
        let cell = |c: usize| {
            record.get(c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: c + 1,
                message: "missing field".into(),
            })
        };
        sample_ids.push(cell(id_col)?.clone());
        conditions.push(cell(cond_col)?.clone());
        if let (Some(c), Some(l)) = (load_col, loads.as_mut()) {
            let raw = cell(c)?;
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: c + 1,
                message: format!("load '{raw}' is not a number"),
            })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    column: c + 1,
                    message: format!("load '{raw}' must be positive"),
                });
            }
            l.push(v);
        }
    }
    let mut distinct: Vec<&str> = Vec::new();
    for c in &conditions {
        if !distinct.contains(&c.as_str()) {
            distinct.push(c);
        }
    }
    if distinct.len() > 2 {
        return Err(Error::InvalidInput(format!(
            "condition must take exactly two values, found {}: {}",
            distinct.len(),
            distinct.join(", ")
        )));
    }
    if distinct.len() < 2 {
        return Err(Error::SingleCondition {
            control: conditions.len(),
            case: 0,
        });
    }
    let (control_value, case_value) = match case {
        Some(c) if c == distinct[0] => (distinct[1].to_string(), distinct[0].to_string()),
        Some(c) if c == distinct[1] => (distinct[0].to_string(), distinct[1].to_string()),
        Some(c) => {
            return Err(Error::InvalidInput(format!(
                "case value '{c}' is not one of the conditions ({}, {})",
                distinct[0], distinct[1]
            )))
        }
        None => (distinct[0].to_string(), distinct[1].to_string()),
    };
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = sample_ids.iter().find(|s| !seen.insert(s.as_str())) {
        return Err(Error::InvalidInput(format!("duplicate sample id '{dup}' in metadata")));
    }
    Ok(SampleMetadata {
        is_case: conditions.iter().map(|c| *c == case_value).collect(),
        sample_ids,
        control_value,
        case_value,
        loads,
    })
}

/// Base used when rendering log-fold changes. Internal math is always in
/// natural log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    E,
    Two,
}

impl LogBase {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "e" => Ok(LogBase::E),
            "2" => Ok(LogBase::Two),
            other => Err(Error::InvalidConfig(format!("log base must be 'e' or '2', got '{other}'"))),
        }
    }

    fn factor(self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => std::f64::consts::LOG2_E,
        }
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub const RESULTS_HEADER: &str = "feature_id\tmean_lfc\tsd_lfc\tci_low\tci_high\ttail_p\tq_value\tsignificant";

/// The per-feature results table as text.
pub fn results_tsv(report: &DaReport, log_base: LogBase) -> String {
    let k = log_base.factor();
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for (id, s) in report.feature_ids.iter().zip(&report.summaries) {
        let fields = [
            fmt_f64(s.mean_lfc * k),
            fmt_f64(s.sd_lfc * k),
            fmt_f64(s.ci_low * k),
            fmt_f64(s.ci_high * k),
            fmt_f64(s.tail_p),
            fmt_f64(s.q_value),
            s.significant.to_string(),
        ];
        out.push_str(id);
        for f in fields {
            out.push('\t');
            out.push_str(&f);
        }
        out.push('\n');
    }
    out
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub method: String,
    pub counts_path: Option<PathBuf>,
    pub metadata_path: Option<PathBuf>,
    pub table_format: TableFormat,
    pub case_value: Option<String>,
    pub gamma2: Option<f64>,
    pub log_base: LogBase,
    pub config: AnalysisConfig,
    pub seed: u64,
    pub software_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub threads: usize,
    pub warnings: Vec<String>,
}

impl RunManifest {
    /// A manifest carrying only what the report itself knows.
    pub fn from_report(report: &DaReport) -> Self {
        RunManifest {
            command: "analyze".into(),
            method: report.method.clone(),
            counts_path: None,
            metadata_path: None,
            table_format: TableFormat::default(),
            case_value: None,
            gamma2: None,
            log_base: LogBase::E,
            config: report.config.clone(),
            seed: report.config.seed,
            software_version: report.software_version.clone(),
            started_unix: 0.0,
            finished_unix: 0.0,
            threads: rayon::current_num_threads(),
            warnings: report.warnings.clone(),
        }
    }
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    write_text(path.as_ref(), &(text + "\n"))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}

/// Writes `results.tsv`, `manifest.json` and, when the report carries them,
/// `diagnostics/lfc_density.tsv` and `diagnostics/mode_draws.tsv`. Returns
/// the paths written.
pub fn write_report_with_manifest(
    report: &DaReport,
    dir: impl AsRef<Path>,
    log_base: LogBase,
    manifest: &RunManifest,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let results = dir.join("results.tsv");
    write_text(&results, &results_tsv(report, log_base))?;
    written.push(results);

    written.extend(write_diagnostics(report, dir, log_base)?);

    let path = dir.join("manifest.json");
    write_json(manifest, &path)?;
    written.push(path);
    Ok(written)
}

/// Writes `diagnostics/lfc_density.tsv` (t, mean density across draws; one
/// row per grid point) and `diagnostics/mode_draws.tsv` (draw, mode) when
/// the report carries diagnostics.
pub fn write_diagnostics(report: &DaReport, dir: impl AsRef<Path>, log_base: LogBase) -> Result<Vec<PathBuf>> {
    let Some(diag) = &report.diagnostics else {
        return Ok(Vec::new());
    };
    let dir = dir.as_ref().join("diagnostics");
    let k = log_base.factor();
    let mut density = String::from("t\tmean_density\n");
    for (t, p) in diag.grid.iter().zip(&diag.mean_density) {
        // A density in t scales inversely with t.
        density.push_str(&format!("{}\t{}\n", fmt_f64(t * k), fmt_f64(p / k)));
    }
    let density_path = dir.join("lfc_density.tsv");
    write_text(&density_path, &density)?;

    let mut modes = String::from("draw\tmode\n");
    for (s, m) in diag.mode_draws.iter().enumerate() {
        modes.push_str(&format!("{s}\t{}\n", fmt_f64(m * k)));
    }
    let modes_path = dir.join("mode_draws.tsv");
    write_text(&modes_path, &modes)?;
    Ok(vec![density_path, modes_path])
}

pub fn write_report(report: &DaReport, dir: impl AsRef<Path>, log_base: LogBase) -> Result<Vec<PathBuf>> {
    let mut manifest = RunManifest::from_report(report);
    manifest.log_base = log_base;
    write_report_with_manifest(report, dir, log_base, &manifest)
}

/// Writes `counts.tsv`, `metadata.tsv` (sample_id, condition, load) and
/// `truth.tsv` (feature_id, true_lfc).
pub fn write_dataset(data: &SyntheticDataset, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let counts = dir.join("counts.tsv");
    write_count_table(&data.table, &counts)?;

    let mut meta = String::from("sample_id\tcondition\tload\n");
    for (n, id) in data.table.sample_ids().iter().enumerate() {
        let cond = if data.labels.is_case(n) { "case" } else { "control" };
        meta.push_str(&format!("{id}\t{cond}\t{}\n", fmt_f64(data.true_loads[n])));
    }
    let metadata = dir.join("metadata.tsv");
    write_text(&metadata, &meta)?;

    let mut truth = String::from("feature_id\ttrue_lfc\n");
    for (id, t) in data.table.feature_ids().iter().zip(&data.truth) {
        truth.push_str(&format!("{id}\t{}\n", fmt_f64(*t)));
    }
    let truth_path = dir.join("truth.tsv");
    write_text(&truth_path, &truth)?;
    Ok(vec![counts, metadata, truth_path])
}

/// Long-format benchmark table: scenario, method, metric, value. The first
/// line is a comment describing the data generator.
pub fn benchmark_tsv(result: &BenchmarkResult) -> String {
    let mut out = format!("# {}\nscenario\tmethod\tmetric\tvalue\n", result.note);
    for s in &result.scores {
        let metrics = [
            ("fdr", s.fdr),
            ("tpr", s.tpr),
            ("f_half", s.f_half),
            ("discovery_fraction", s.discovery_fraction),
            ("replicates", s.replicates as f64),
            ("failures", s.failures as f64),
        ];
        for (name, v) in metrics {
            out.push_str(&format!("{}\t{}\t{name}\t{}\n", s.scenario, s.method, fmt_f64(v)));
        }
    }
    out
}

/// Plot-ready sweep curve: one row per (level, method).
pub fn sweep_csv(result: &BenchmarkResult, parameter: &str, levels: &[f64]) -> String {
    let mut out = format!("# {}\n{parameter},method,fdr,tpr,f_half\n", result.note);
    for (scenario, level) in result.scenarios.iter().zip(levels) {
        for s in result.scores.iter().filter(|s| s.scenario == scenario.name) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(*level),
                s.method,
                fmt_f64(s.fdr),
                fmt_f64(s.tpr),
                fmt_f64(s.f_half)
            ));
        }
    }
    out
}

/// Writes `benchmark.tsv`, `benchmark.json` and, for sweeps, `sweep.csv`.
pub fn write_benchmark(
    result: &BenchmarkResult,
    dir: impl AsRef<Path>,
    sweep: Option<(&str, &[f64])>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let tsv = dir.join("benchmark.tsv");
    write_text(&tsv, &benchmark_tsv(result))?;
    let json = dir.join("benchmark.json");
    write_json(result, &json)?;
    let mut written = vec![tsv, json];
    if let Some((parameter, levels)) = sweep {
        let csv = dir.join("sweep.csv");
        write_text(&csv, &sweep_csv(result, parameter, levels))?;
        written.push(csv);
    }
    Ok(written)
}

pub fn probe_tsv(rows: &[ProbeRow]) -> String {
    let mut out = String::from("depth\tnum_features\tmedian_rmse\tmedian_posterior_sd\tseeds\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            fmt_f64(r.depth),
            r.num_features,
            fmt_f64(r.median_rmse),
            fmt_f64(r.median_posterior_sd),
            r.rmse.len()
        ));
    }
    out
}

pub fn write_probe(rows: &[ProbeRow], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &probe_tsv(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_small_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.tsv", "id\ta\tb\nx\t1\t2\ny\t3\t4\nz\t0\t5\n");
        let t = read_count_table(&p, &TableFormat::default()).unwrap();
        assert_eq!(t.num_features(), 3);
        assert_eq!(t.depths(), &[4, 11]);
        assert_eq!(t.sample_ids(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn reads_csv_by_extension_and_transposed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.csv", "sample,x,y,z\na,1,3,0\nb,2,4,5\n");
        let t = read_count_table(
            &p,
            &TableFormat {
                transpose: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(t.feature_ids(), &["x".to_string(), "y".to_string(), "z".to_string()]);
        assert_eq!(t.counts(), array![[1, 2], [3, 4], [0, 5]]);
    }

    #[test]
    fn negative_cell_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.tsv", "id\ta\tb\nx\t1\t-1\ny\t3\t4\n");
        let err = read_count_table(&p, &TableFormat::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("column 3") && msg.contains("-1"), "{msg}");
    }

    #[test]
    fn fractional_cell_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.tsv", "id\ta\tb\nx\t3.7\t1\ny\t3\t4\n");
        let msg = read_count_table(&p, &TableFormat::default()).unwrap_err().to_string();
        assert!(msg.contains("non-integer count"), "{msg}");
    }

    #[test]
    fn nan_and_text_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.tsv", "id\ta\tb\nx\tNaN\t1\ny\t3\t4\n");
        assert!(read_count_table(&p, &TableFormat::default()).is_err());
        let p = write(dir.path(), "d.tsv", "id\ta\tb\nx\tabc\t1\ny\t3\t4\n");
        let msg = read_count_table(&p, &TableFormat::default()).unwrap_err().to_string();
        assert!(msg.contains("non-numeric"), "{msg}");
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.tsv", "id\ta\tb\nx\t1\ny\t3\t4\n");
        let msg = read_count_table(&p, &TableFormat::default()).unwrap_err().to_string();
        assert!(msg.contains("ragged"), "{msg}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.tsv", "id\ta\tb\nx\t1\t2\nx\t3\t4\n");
        assert!(read_count_table(&p, &TableFormat::default()).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_count_table("/nonexistent/file.tsv", &TableFormat::default()).unwrap_err();
        assert!(err.is_io(), "{err:?}");
    }

    #[test]
    fn metadata_case_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.tsv", "sample_id\tcondition\nb\tcase\na\tctrl\n");
        let m = read_metadata(&p, Some("case")).unwrap();
        assert_eq!(m.case_value, "case");
        assert_eq!(m.is_case, vec![true, false]);
        let m = read_metadata(&p, None).unwrap();
        // First seen is control by default.
        assert_eq!(m.control_value, "case");
        let table = CountTable::new(vec!["x".into(), "y".into()], vec!["a".into(), "b".into()], array![[1, 2], [3, 4]]).unwrap();
        let m = read_metadata(&p, Some("case")).unwrap();
        let (labels, loads) = m.align(&table).unwrap();
        assert_eq!(labels.assignment(), &[false, true]);
        assert!(loads.is_none());
    }

    #[test]
    fn metadata_with_three_conditions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.tsv", "sample_id\tcondition\na\tx\nb\ty\nc\tz\n");
        assert!(read_metadata(&p, None).is_err());
    }

    #[test]
    fn metadata_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.tsv", "sample_id\tcondition\tload\na\tx\t1.5\nb\ty\t2e9\n");
        let m = read_metadata(&p, None).unwrap();
        assert_eq!(m.loads, Some(vec![1.5, 2e9]));
        let p = write(dir.path(), "n.tsv", "sample_id\tcondition\tload\na\tx\t0\nb\ty\t2\n");
        assert!(read_metadata(&p, None).is_err());
    }

    #[test]
    fn metadata_sample_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.tsv", "sample_id\tcondition\na\tx\nq\ty\n");
        let table = CountTable::new(vec!["x".into(), "y".into()], vec!["a".into(), "b".into()], array![[1, 2], [3, 4]]).unwrap();
        assert!(read_metadata(&p, None).unwrap().align(&table).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.0, 1.5, -2.25e-9, 3.0e20, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn table_round_trips(d in 2usize..6, n in 2usize..6, seed in any::<u64>()) {
            let counts = Array2::from_shape_fn((d, n), |(i, j)| {
                (seed.wrapping_mul(31).wrapping_add((i * 7 + j * 13) as u64) % 1000) + 1
            });
            let table = CountTable::from_counts(counts).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.tsv");
            write_count_table(&table, &p).unwrap();
            prop_assert_eq!(read_count_table(&p, &TableFormat::default()).unwrap(), table);
        }
    }
}
