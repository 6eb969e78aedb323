//! Prequential (test-then-train) evaluation: per-sample traces, windowed
//! accuracy, convergence detection, drift-recovery metrics, and
//! repeated-run aggregation.

use std::collections::VecDeque;
use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::forest::{
    prediction_correct, DriftEvent, ForestError, HybridForest, RandomForest,
};
use crate::hoeffding::{HoeffdingTreeClassifier, HoeffdingTreeRegressor};
use crate::streams::{DriftKind, DriftSpec, StreamSource};
use crate::types::{
    validate_instance, Instance, Prediction, RunConfig, Schema, Target, Task, ValidateError,
};


#[derive(Debug, Error)]
pub enum EvalError {
    #[error("model schema does not match stream schema")]
    TaskMismatch,
    #[error(transparent)]
    Invalid(#[from] ValidateError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("aggregate needs at least one report")]
    NoReports,
    #[error("reports cover different stream lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Metric knobs, separate from the learning knobs in `RunConfig`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Rolling accuracy window, also the convergence guard length.
    pub rolling_window: usize,
    /// Rolling accuracy a model must reach to count as converged.
    pub convergence_threshold: f64,
    /// Memory estimates are snapshotted every this many samples.
    pub memory_snapshot_stride: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            rolling_window: 200,
            convergence_threshold: 0.90,
            memory_snapshot_stride: 200,
        }
    }
}

/// What one model step produced, uniform across model families.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub prediction: Prediction,
    pub drift: Option<DriftEvent>,
}

/// A streaming learner evaluated test-then-train: `step` must predict the
/// instance before learning from it.
pub trait StreamModel {
    fn schema(&self) -> &Schema;
    fn step(&mut self, inst: &Instance) -> Result<StepOutcome, ValidateError>;
    fn memory_estimate(&self) -> u64;
    fn node_count(&self) -> usize;
}

/// Model families the experiment harness compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Single,
    RandomForest,
    Hybrid,
}

enum SingleTreeInner {
    Classifier(HoeffdingTreeClassifier),
    Regressor(HoeffdingTreeRegressor),
}

/// One Hoeffding tree over the full feature set.
pub struct SingleTreeModel {
    inner: SingleTreeInner,
}

impl SingleTreeModel {
    pub fn new(schema: Schema, config: RunConfig) -> Self {
        let inner = match schema.task() {
            Task::Classification { .. } => {
                SingleTreeInner::Classifier(HoeffdingTreeClassifier::new(schema, config))
            }
            Task::Regression => {
                SingleTreeInner::Regressor(HoeffdingTreeRegressor::new(schema, config))
            }
        };
        SingleTreeModel { inner }
    }
}

impl StreamModel for SingleTreeModel {
    fn schema(&self) -> &Schema {
        match &self.inner {
            SingleTreeInner::Classifier(t) => t.schema(),
            SingleTreeInner::Regressor(t) => t.schema(),
        }
    }

    fn step(&mut self, inst: &Instance) -> Result<StepOutcome, ValidateError> {
        validate_instance(self.schema(), inst)?;
        let prediction = match &mut self.inner {
            SingleTreeInner::Classifier(t) => {
                let p = t.predict(inst);
                t.train(inst);
                p
            }
            SingleTreeInner::Regressor(t) => {
                let p = t.predict(inst);
                t.train(inst);
                p
            }
        };
        Ok(StepOutcome { prediction, drift: None })
    }

    fn memory_estimate(&self) -> u64 {
        match &self.inner {
            SingleTreeInner::Classifier(t) => t.memory_estimate(),
            SingleTreeInner::Regressor(t) => t.memory_estimate(),
        }
    }

    fn node_count(&self) -> usize {
        match &self.inner {
            SingleTreeInner::Classifier(t) => t.node_count(),
            SingleTreeInner::Regressor(t) => t.node_count(),
        }
    }
}

impl StreamModel for RandomForest {
    fn schema(&self) -> &Schema {
        RandomForest::schema(self)
    }

    fn step(&mut self, inst: &Instance) -> Result<StepOutcome, ValidateError> {
        let prediction = RandomForest::step(self, inst)?;
        Ok(StepOutcome { prediction, drift: None })
    }

    fn memory_estimate(&self) -> u64 {
        RandomForest::memory_estimate(self)
    }

    fn node_count(&self) -> usize {
        RandomForest::node_count(self)
    }
}

impl StreamModel for HybridForest {
    fn schema(&self) -> &Schema {
        HybridForest::schema(self)
    }

    fn step(&mut self, inst: &Instance) -> Result<StepOutcome, ValidateError> {
        let out = HybridForest::step(self, inst)?;
        Ok(StepOutcome {
            prediction: out.emitted,
            drift: out.drift,
        })
    }

    fn memory_estimate(&self) -> u64 {
        HybridForest::memory_estimate(self)
    }

    fn node_count(&self) -> usize {
        HybridForest::node_count(self)
    }
}

pub fn build_model(
    kind: ModelKind,
    schema: Schema,
    config: RunConfig,
) -> Result<Box<dyn StreamModel + Send>, ForestError> {
    Ok(match kind {
        ModelKind::Single => Box::new(SingleTreeModel::new(schema, config)),
        ModelKind::RandomForest => Box::new(RandomForest::new(schema, config)?),
        ModelKind::Hybrid => Box::new(HybridForest::new(schema, config)?),
    })
}

/// One evaluated sample. `index` is 0-based arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub index: usize,
    pub prediction: Prediction,
    pub truth: Target,
    pub correct: bool,
    pub rolling_accuracy: f64,
    pub cumulative_accuracy: f64,
    pub drift: Option<DriftEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemorySnapshot {
    pub index: usize,
    pub estimate: u64,
}

#[derive(Debug)]
pub struct PrequentialReport {
    pub records: Vec<SampleRecord>,
    pub memory_snapshots: Vec<MemorySnapshot>,
    /// Sample indices where the model flagged drift.
    pub drift_indices: Vec<usize>,
    pub final_node_count: usize,
    pub metric: MetricConfig,
    /// Set when a stream error aborted the run; records up to that point
    /// are kept.
    pub incomplete: Option<String>,
}

impl PrequentialReport {
    pub fn final_cumulative_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.cumulative_accuracy)
    }

    pub fn final_memory_estimate(&self) -> Option<u64> {
        self.memory_snapshots.last().map(|s| s.estimate)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Runs a model over a stream test-then-train and records the full trace.
///
/// The regression correctness tolerance comes with the config: a regression
/// prediction counts as correct when its relative error is within it.
pub fn run_prequential(
    model: &mut dyn StreamModel,
    source: StreamSource,
    run_config: &RunConfig,
    cfg: &MetricConfig,
) -> Result<PrequentialReport, EvalError> {
    if model.schema() != source.schema() {
        return Err(EvalError::TaskMismatch);
    }
    let stride = cfg.memory_snapshot_stride.max(1);
    let window = cfg.rolling_window.max(1);
    let tol = run_config.regression_correctness_tolerance;

    let mut records = Vec::with_capacity(source.len_hint().unwrap_or(0));
    let mut memory_snapshots = Vec::new();
    let mut drift_indices = Vec::new();
    let mut recent: VecDeque<bool> = VecDeque::with_capacity(window);
    let mut recent_sum = 0usize;
    let mut correct_total = 0usize;
    let mut incomplete = None;

    for (index, item) in source.enumerate() {
        let inst = match item {
            Ok(inst) => inst,
            Err(e) => {
                incomplete = Some(e.to_string());
                break;
            }
        };
        let outcome = model.step(&inst)?;
        let correct = prediction_correct(&outcome.prediction, &inst.target, tol);
        correct_total += usize::from(correct);
        if recent.len() == window {
            recent_sum -= usize::from(recent.pop_front().unwrap());
        }
        recent.push_back(correct);
        recent_sum += usize::from(correct);
        if let Some(ev) = &outcome.drift {
            drift_indices.push(ev.sample_index as usize);
        }
        records.push(SampleRecord {
            index,
            prediction: outcome.prediction,
            truth: inst.target,
            correct,
            rolling_accuracy: recent_sum as f64 / recent.len() as f64,
            cumulative_accuracy: correct_total as f64 / (index + 1) as f64,
            drift: outcome.drift,
        });
        if index % stride == 0 {
            memory_snapshots.push(MemorySnapshot {
                index,
                estimate: model.memory_estimate(),
            });
        }
    }
    if let Some(last) = records.last() {
        if last.index % stride != 0 {
            memory_snapshots.push(MemorySnapshot {
                index: last.index,
                estimate: model.memory_estimate(),
            });
        }
    }
    Ok(PrequentialReport {
        records,
        memory_snapshots,
        drift_indices,
        final_node_count: model.node_count(),
        metric: *cfg,
        incomplete,
    })
}

/// Number of samples after which the rolling accuracy first reaches
/// `threshold` over a full window and then stays above `threshold - 0.05`
/// for the following window (a stability guard against single spikes).
/// Returns `None` when the model never converges.
pub fn convergence_index(report: &PrequentialReport, threshold: f64) -> Option<usize> {
    let w = report.metric.rolling_window.max(1);
    let records = &report.records;
    let guard = threshold - 0.05;
    'outer: for i in (w - 1)..records.len() {
        if records[i].rolling_accuracy < threshold {
            continue;
        }
        let end = (i + 1 + w).min(records.len());
        for r in &records[i + 1..end] {
            if r.rolling_accuracy < guard {
                continue 'outer;
            }
        }
        return Some(i + 1);
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSummary {
    pub runs: usize,
    pub mean_accuracy: f64,
    /// Population standard deviation of the final cumulative accuracies.
    pub stddev_accuracy: f64,
    pub convergence_indices: Vec<Option<usize>>,
    /// Mean over the runs that converged; `None` when none did.
    pub mean_convergence_index: Option<f64>,
}

pub fn aggregate_runs(reports: &[PrequentialReport]) -> Result<AggregateSummary, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    for r in reports {
        if r.records.len() != first.records.len() {
            return Err(EvalError::LengthMismatch(first.records.len(), r.records.len()));
        }
    }
    let finals: Vec<f64> = reports
        .iter()
        .map(|r| r.final_cumulative_accuracy().unwrap_or(0.0))
        .collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let var = finals.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / finals.len() as f64;
    let convergence_indices: Vec<Option<usize>> = reports
        .iter()
        .map(|r| convergence_index(r, r.metric.convergence_threshold))
        .collect();
    let converged: Vec<f64> = convergence_indices.iter().flatten().map(|&i| i as f64).collect();
    let mean_convergence_index = if converged.is_empty() {
        None
    } else {
        Some(converged.iter().sum::<f64>() / converged.len() as f64)
    };
    Ok(AggregateSummary {
        runs: reports.len(),
        mean_accuracy: mean,
        stddev_accuracy: var.sqrt(),
        convergence_indices,
        mean_convergence_index,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftRecovery {
    /// Samples between the drift point and the first drift event at or
    /// after it; `None` when no such event was emitted.
    pub detection_latency: Option<usize>,
    /// Rolling accuracy just before the drift point minus the minimum
    /// rolling accuracy from the drift point onward.
    pub accuracy_dip: f64,
}

pub fn drift_recovery_trace(report: &PrequentialReport, spec: &DriftSpec) -> DriftRecovery {
    let point = match spec.kind {
        DriftKind::Abrupt { at } => at,
        DriftKind::Gradual { start, .. } => start,
    };
    let detection_latency = report
        .drift_indices
        .iter()
        .find(|&&i| i >= point)
        .map(|&i| i - point);
    let pre = if point == 0 || report.records.is_empty() {
        0.0
    } else {
        report.records[point.min(report.records.len()) - 1].rolling_accuracy
    };
    let post_min = report.records[point.min(report.records.len())..]
        .iter()
        .map(|r| r.rolling_accuracy)
        .fold(f64::INFINITY, f64::min);
    let accuracy_dip = if post_min.is_finite() { pre - post_min } else { 0.0 };
    DriftRecovery {
        detection_latency,
        accuracy_dip,
    }
}

fn prediction_field(p: &Prediction) -> String {
    match p {
        Prediction::Classification { class, .. } => class.to_string(),
        Prediction::Regression(v) => format!("{v}"),
    }
}

fn target_field(t: &Target) -> String {
    match t {
        Target::Class(c) => c.to_string(),
        Target::Value(v) => format!("{v}"),
    }
}

/// Writes the per-sample trace as CSV. `stride` down-samples the emission
/// (1 = every record); metrics themselves are never down-sampled.
pub fn write_trace_csv<W: io::Write>(
    out: W,
    report: &PrequentialReport,
    stride: usize,
) -> Result<(), EvalError> {
    let stride = stride.max(1);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "prediction",
        "truth",
        "correct",
        "rolling_acc",
        "cumulative_acc",
        "drift_flag",
        "mem_estimate",
    ])?;
    let mut snap = 0usize;
    let mut current_mem = 0u64;
    for r in &report.records {
        while snap < report.memory_snapshots.len() && report.memory_snapshots[snap].index <= r.index
        {
            current_mem = report.memory_snapshots[snap].estimate;
            snap += 1;
        }
        if r.index % stride != 0 {
            continue;
        }
        w.write_record([
            r.index.to_string(),
            prediction_field(&r.prediction),
            target_field(&r.truth),
            u8::from(r.correct).to_string(),
            format!("{:.6}", r.rolling_accuracy),
            format!("{:.6}", r.cumulative_accuracy),
            u8::from(r.drift.is_some()).to_string(),
            current_mem.to_string(),
        ])?;
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io_err) => EvalError::Io(io_err),
            other => EvalError::Io(io::Error::other(format!("csv error: {other:?}"))),
        }
    }
}

/// Per-experiment summary document, one per invocation.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryDocument {
    pub method: String,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub samples: usize,
    pub mean_accuracy: f64,
    pub stddev: f64,
    /// Mean convergence index over converged runs; null when none converged.
    pub convergence_index: Option<f64>,
    /// First drift-event index per run; empty inner list when none fired.
    pub drift_latencies: Vec<Vec<usize>>,
    pub final_memory_estimate: Vec<u64>,
}

pub fn write_summary_json<W: io::Write>(out: W, doc: &SummaryDocument) -> Result<(), EvalError> {
    serde_json::to_writer_pretty(out, doc)?;
    Ok(())
}
