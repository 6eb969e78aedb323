//! Config resolution, experiment execution, and atomic output writing.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use streamforest_core::eval::{
    aggregate_runs, build_model, convergence_index, run_prequential, write_summary_json,
    write_trace_csv, AggregateSummary, MetricConfig, ModelKind, PrequentialReport,
    SummaryDocument,
};
use streamforest_core::forest::{confidence, min_learners_for_confidence};
use streamforest_core::streams::{
    generate_redundant_sensors, generate_waveform, inject_drift, load_arff_with_target, load_csv,
    CsvDeclaration, DriftKind, DriftSpec, DriftTransform, StreamSource, TaskDecl,
};
use streamforest_core::types::{RunConfig, Task};

use crate::{ConfidenceArgs, RunArgs, SweepArgs};

const SENSOR_NOISE_SD: f64 = 0.12;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration (flags, config file, ranges). Exit 2.
    Config(String),
    /// Dataset or output I/O problems. Exit 3.
    Data(String),
    /// Violated internal invariants. Exit 4.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Internal(m) => write!(f, "internal: {m}"),
        }
    }
}

#[derive(Debug, Clone)]
enum DatasetSpec {
    Csv {
        path: String,
        decl: CsvDeclaration,
    },
    Arff {
        path: String,
        target: Option<String>,
    },
    Generator {
        name: String,
        count: usize,
    },
}

impl DatasetSpec {
    fn label(&self) -> String {
        match self {
            DatasetSpec::Csv { path, .. } | DatasetSpec::Arff { path, .. } => path.clone(),
            DatasetSpec::Generator { name, count } => format!("{name}:{count}"),
        }
    }
}

#[derive(Debug, Clone)]
struct ResolvedRun {
    dataset: DatasetSpec,
    model: ModelKind,
    run_config: RunConfig,
    metric: MetricConfig,
    drift: Option<(DriftKind, usize, usize)>,
    seeds: Vec<u64>,
    fixed_stream: bool,
    out: PathBuf,
    stride: usize,
}

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "config file line {} is not key=value: '{line}'",
                i + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Flag value, else config-file value, else default.
fn pick<T: Clone + FromStr>(
    flag: &Option<T>,
    file: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    match file.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| CliError::Config(format!("bad value '{raw}' for '{key}'"))),
        None => Ok(default),
    }
}

fn pick_opt<T: Clone + FromStr>(
    flag: &Option<T>,
    file: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag.clone());
    }
    match file.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("bad value '{raw}' for '{key}'"))),
        None => Ok(None),
    }
}

fn parse_drift(spec: &str) -> Result<DriftKind, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| CliError::Config(format!("bad drift index '{s}'")))
    };
    match parts.as_slice() {
        ["abrupt", at] => Ok(DriftKind::Abrupt { at: num(at)? }),
        ["gradual", start, end] => Ok(DriftKind::Gradual {
            start: num(start)?,
            end: num(end)?,
        }),
        _ => Err(CliError::Config(format!(
            "drift must be abrupt:IDX or gradual:START:END, got '{spec}'"
        ))),
    }
}

fn resolve(args: &RunArgs) -> Result<ResolvedRun, CliError> {
    let file = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => HashMap::new(),
    };

    let csv = pick_opt(&args.csv, &file, "csv")?;
    let arff = pick_opt(&args.arff, &file, "arff")?;
    let generator = pick_opt(&args.generator, &file, "generator")?;
    let sources = usize::from(csv.is_some()) + usize::from(arff.is_some()) + usize::from(generator.is_some());
    if sources != 1 {
        return Err(CliError::Config(
            "exactly one of --csv, --arff, --generator is required".into(),
        ));
    }
    let target = pick_opt(&args.target, &file, "target")?;
    let dataset = if let Some(path) = csv {
        let task = match pick(&args.task, &file, "task", "regression".to_string())?.as_str() {
            "classification" => TaskDecl::Classification,
            "regression" => TaskDecl::Regression,
            other => {
                return Err(CliError::Config(format!(
                    "task must be classification or regression, got '{other}'"
                )))
            }
        };
        let nominal = pick_opt(&args.nominal, &file, "nominal")?
            .map(|s: String| s.split(',').map(|c| c.trim().to_string()).collect())
            .unwrap_or_default();
        DatasetSpec::Csv {
            path,
            decl: CsvDeclaration {
                task,
                nominal_features: nominal,
                target_column: target,
            },
        }
    } else if let Some(path) = arff {
        DatasetSpec::Arff { path, target }
    } else {
        let name = generator.unwrap();
        if name != "waveform" && name != "sensors" {
            return Err(CliError::Config(format!(
                "generator must be waveform or sensors, got '{name}'"
            )));
        }
        DatasetSpec::Generator {
            name,
            count: pick(&args.count, &file, "count", 5000)?,
        }
    };

    let model = match pick(&args.model, &file, "model", "hybrid".to_string())?.as_str() {
        "single" => ModelKind::Single,
        "rf" => ModelKind::RandomForest,
        "hybrid" => ModelKind::Hybrid,
        other => {
            return Err(CliError::Config(format!(
                "model must be single, rf, or hybrid, got '{other}'"
            )))
        }
    };

    let defaults = RunConfig::default();
    let run_config = RunConfig {
        delta: pick(&args.delta, &file, "delta", defaults.delta)?,
        grace_period: pick(&args.grace, &file, "grace", defaults.grace_period)?,
        tie_threshold: pick(&args.tie, &file, "tie", defaults.tie_threshold)?,
        weak_learner_count: pick(&args.m, &file, "m", defaults.weak_learner_count)?,
        d_hybrid_impact: pick(&args.d, &file, "d", defaults.d_hybrid_impact)?,
        k_window_size: pick(&args.k, &file, "k", defaults.k_window_size)?,
        regression_correctness_tolerance: pick(
            &args.tol,
            &file,
            "tol",
            defaults.regression_correctness_tolerance,
        )?,
        drift_threshold: pick(
            &args.drift_threshold,
            &file,
            "drift-threshold",
            defaults.drift_threshold,
        )?,
        rng_seed: 0,
    };
    run_config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let metric_defaults = MetricConfig::default();
    let metric = MetricConfig {
        rolling_window: pick(&args.wmetric, &file, "wmetric", metric_defaults.rolling_window)?,
        convergence_threshold: pick(
            &args.threshold,
            &file,
            "threshold",
            metric_defaults.convergence_threshold,
        )?,
        memory_snapshot_stride: metric_defaults.memory_snapshot_stride,
    };
    if metric.rolling_window == 0 {
        return Err(CliError::Config("wmetric must be positive".into()));
    }
    if !(metric.convergence_threshold > 0.0 && metric.convergence_threshold <= 1.0) {
        return Err(CliError::Config("threshold must be in (0,1]".into()));
    }

    let drift = match pick_opt(&args.drift, &file, "drift")? {
        Some(spec) => {
            let kind = parse_drift(&spec)?;
            let swap = pick(&args.drift_swap, &file, "drift-swap", "0:1".to_string())?;
            let (a, b) = swap
                .split_once(':')
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| {
                    CliError::Config(format!("drift-swap must be A:B, got '{swap}'"))
                })?;
            Some((kind, a, b))
        }
        None => None,
    };

    let seed_count = pick(&args.seeds, &file, "seeds", 1usize)?;
    if seed_count == 0 {
        return Err(CliError::Config("seeds must be at least 1".into()));
    }
    let fixed_stream =
        args.fixed_stream || file.get("fixed-stream").map(|v| v == "true").unwrap_or(false);
    let stride = pick(&args.stride, &file, "stride", 1usize)?.max(1);
    let out = PathBuf::from(pick(&args.out, &file, "out", "out".to_string())?);

    Ok(ResolvedRun {
        dataset,
        model,
        run_config,
        metric,
        drift,
        seeds: (0..seed_count as u64).collect(),
        fixed_stream,
        out,
        stride,
    })
}

fn open_stream(run: &ResolvedRun, seed: u64) -> Result<StreamSource, CliError> {
    let stream_seed = if run.fixed_stream { 0 } else { seed };
    let source = match &run.dataset {
        DatasetSpec::Csv { path, decl } => load_csv(path, decl)
            .map_err(|e| CliError::Data(format!("{path}: {e}")))?,
        DatasetSpec::Arff { path, target } => load_arff_with_target(path, target.as_deref())
            .map_err(|e| CliError::Data(format!("{path}: {e}")))?,
        DatasetSpec::Generator { name, count } => match name.as_str() {
            "waveform" => generate_waveform(*count, stream_seed),
            "sensors" => generate_redundant_sensors(*count, SENSOR_NOISE_SD, stream_seed),
            _ => unreachable!("validated in resolve"),
        },
    };
    match &run.drift {
        None => Ok(source),
        Some((kind, a, b)) => {
            let transform = match source.schema().task() {
                Task::Classification { class_count } => {
                    if *a >= class_count || *b >= class_count {
                        return Err(CliError::Config(format!(
                            "drift-swap {a}:{b} out of range for {class_count} classes"
                        )));
                    }
                    DriftTransform::class_swap(*a, *b, class_count)
                }
                // Regression streams have no classes to swap; reverse the
                // feature order instead.
                Task::Regression => DriftTransform {
                    class_permutation: None,
                    feature_permutation: Some(
                        (0..source.schema().feature_count()).rev().collect(),
                    ),
                },
            };
            inject_drift(
                source,
                DriftSpec {
                    kind: *kind,
                    transform,
                },
                stream_seed,
            )
            .map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

fn run_seed(run: &ResolvedRun, seed: u64) -> Result<PrequentialReport, CliError> {
    let source = open_stream(run, seed)?;
    let schema = source.schema().clone();
    let cfg = RunConfig {
        rng_seed: seed,
        ..run.run_config.clone()
    };
    let mut model =
        build_model(run.model, schema, cfg.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let report = run_prequential(model.as_mut(), source, &cfg, &run.metric)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(reason) = &report.incomplete {
        return Err(CliError::Data(format!("stream aborted: {reason}")));
    }
    Ok(report)
}

/// Writes via a temp file in the destination directory plus rename, so a
/// crash never leaves a partial file behind.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Data(format!("cannot create temp file in {}: {e}", dir.display())))?;
    std::io::Write::write_all(&mut tmp, bytes)
        .map_err(|e| CliError::Data(format!("write failed: {e}")))?;
    tmp.persist(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn model_label(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Single => "single",
        ModelKind::RandomForest => "rf",
        ModelKind::Hybrid => "hybrid",
    }
}

fn execute(run: &ResolvedRun) -> Result<AggregateSummary, CliError> {
    fs::create_dir_all(&run.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", run.out.display())))?;
    let mut reports: Vec<(u64, PrequentialReport)> = run
        .seeds
        .par_iter()
        .map(|&seed| run_seed(run, seed).map(|r| (seed, r)))
        .collect::<Result<Vec<_>, _>>()?;
    reports.sort_by_key(|(seed, _)| *seed);

    for (seed, report) in &reports {
        let mut trace = Vec::new();
        write_trace_csv(&mut trace, report, run.stride)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        atomic_write(&run.out.join(format!("trace_seed{seed}.csv")), &trace)?;

        let doc = SummaryDocument {
            method: model_label(run.model).to_string(),
            dataset: run.dataset.label(),
            seeds: vec![*seed],
            samples: report.records.len(),
            mean_accuracy: report.final_cumulative_accuracy().unwrap_or(0.0),
            stddev: 0.0,
            convergence_index: convergence_index(report, run.metric.convergence_threshold)
                .map(|i| i as f64),
            drift_latencies: vec![report.drift_indices.clone()],
            final_memory_estimate: vec![report.final_memory_estimate().unwrap_or(0)],
        };
        let mut buf = Vec::new();
        write_summary_json(&mut buf, &doc).map_err(|e| CliError::Internal(e.to_string()))?;
        atomic_write(&run.out.join(format!("summary_seed{seed}.json")), &buf)?;
    }

    let plain: Vec<PrequentialReport> = reports.into_iter().map(|(_, r)| r).collect();
    let summary = aggregate_runs(&plain).map_err(|e| CliError::Internal(e.to_string()))?;
    let doc = SummaryDocument {
        method: model_label(run.model).to_string(),
        dataset: run.dataset.label(),
        seeds: run.seeds.clone(),
        samples: plain.first().map(|r| r.records.len()).unwrap_or(0),
        mean_accuracy: summary.mean_accuracy,
        stddev: summary.stddev_accuracy,
        convergence_index: summary.mean_convergence_index,
        drift_latencies: plain.iter().map(|r| r.drift_indices.clone()).collect(),
        final_memory_estimate: plain
            .iter()
            .map(|r| r.final_memory_estimate().unwrap_or(0))
            .collect(),
    };
    let mut buf = Vec::new();
    write_summary_json(&mut buf, &doc).map_err(|e| CliError::Internal(e.to_string()))?;
    atomic_write(&run.out.join("aggregate.json"), &buf)?;
    Ok(summary)
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let run = resolve(args)?;
    let summary = execute(&run)?;
    println!(
        "{} on {}: mean accuracy {:.4} (stddev {:.4}) over {} seed(s), convergence {}",
        model_label(run.model),
        run.dataset.label(),
        summary.mean_accuracy,
        summary.stddev_accuracy,
        summary.runs,
        match summary.mean_convergence_index {
            Some(i) => format!("{i:.0}"),
            None => "not reached".to_string(),
        }
    );
    Ok(())
}

pub fn cmd_confidence(args: &ConfidenceArgs) -> Result<(), CliError> {
    if let Some(n_max) = args.n_max {
        if n_max == 0 || args.n_step == 0 || args.m_max == 0 {
            return Err(CliError::Config("grid bounds must be positive".into()));
        }
        println!("n,m,confidence");
        let mut n = args.n_step;
        while n <= n_max {
            for m in 1..=args.m_max {
                println!("{n},{m},{:.6}", confidence(n, m));
            }
            n += args.n_step;
        }
        return Ok(());
    }
    let n = args
        .n
        .ok_or_else(|| CliError::Config("--n is required without --n-max".into()))?;
    if n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    match (args.m, args.target) {
        (Some(m), None) => {
            println!("{:.12}", confidence(n, m));
            Ok(())
        }
        (None, Some(target)) => {
            let m = min_learners_for_confidence(n, target)
                .map_err(|e| CliError::Config(e.to_string()))?;
            println!("{m}");
            Ok(())
        }
        _ => Err(CliError::Config(
            "provide exactly one of --m or --target".into(),
        )),
    }
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    let values: Result<Vec<T>, _> = raw.split(',').map(|v| v.trim().parse::<T>()).collect();
    let values = values.map_err(|_| CliError::Config(format!("bad {what} list '{raw}'")))?;
    if values.is_empty() {
        return Err(CliError::Config(format!("{what} list is empty")));
    }
    Ok(values)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let base = resolve(&args.run)?;
    let d_values: Vec<f64> = parse_list(&args.d_values, "d")?;
    let k_values: Vec<usize> = parse_list(&args.k_values, "k")?;
    fs::create_dir_all(&base.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", base.out.display())))?;

    let mut matrix = String::from("d,k,mean_acc,stddev,convergence_index\n");
    for &d in &d_values {
        for &k in &k_values {
            let cell = ResolvedRun {
                run_config: RunConfig {
                    d_hybrid_impact: d,
                    k_window_size: k,
                    ..base.run_config.clone()
                },
                out: base.out.join(format!("d{d}_k{k}")),
                ..base.clone()
            };
            cell.run_config
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let summary = execute(&cell)?;
            matrix.push_str(&format!(
                "{d},{k},{:.6},{:.6},{}\n",
                summary.mean_accuracy,
                summary.stddev_accuracy,
                match summary.mean_convergence_index {
                    Some(i) => format!("{i:.0}"),
                    None => String::new(),
                }
            ));
        }
    }
    atomic_write(&base.out.join("sweep.csv"), matrix.as_bytes())?;
    println!(
        "swept {} cell(s) into {}",
        d_values.len() * k_values.len(),
        base.out.display()
    );
    Ok(())
}
