//! Weak-learner bags, vote combination, the hybrid forest with its windowed
//! impact controller, and drift detection.

use crate::hoeffding::{HoeffdingTreeClassifier, HoeffdingTreeRegressor};
use crate::types::{
    ConfigError, Instance, Prediction, RunConfig, Schema, Target, Task, ValidateError,
    validate_instance,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use thiserror::Error;

/// Features per weak learner: ceil(sqrt(f_total)), capped at f_total.
pub fn weak_learner_feature_count(f_total: usize) -> usize {
    assert!(f_total >= 1, "f_total must be positive");
    ((f_total as f64).sqrt().ceil() as usize).min(f_total)
}

/// Feature subset owned by one weak learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBag {
    pub learner_id: usize,
    /// Strictly increasing indices into the full schema.
    pub features: Vec<usize>,
}

/// Samples `m` bags of distinct features, uniformly without replacement
/// within a bag, deterministically from the seed.
pub fn generate_bags(schema: &Schema, m: usize, rng_seed: u64) -> Vec<FeatureBag> {
    let f_total = schema.feature_count();
    let size = weak_learner_feature_count(f_total);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..m)
        .map(|learner_id| {
            let mut features = rand::seq::index::sample(&mut rng, f_total, size).into_vec();
            features.sort_unstable();
            FeatureBag { learner_id, features }
        })
        .collect()
}

/// Probability that a given feature is drawn at least once across m weak
/// learners of sqrt(n) with-replacement draws each:
/// 1 - ((n-1)/n)^(m sqrt(n)), with real-valued sqrt(n).
pub fn confidence(n: usize, m: usize) -> f64 {
    assert!(n >= 1, "n must be positive");
    if m == 0 {
        return 0.0;
    }
    let base = (n as f64 - 1.0) / n as f64;
    1.0 - base.powf(m as f64 * (n as f64).sqrt())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("confidence target {0} is unreachable for finite ensembles")]
    UnreachableTarget(f64),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Smallest m with confidence(n, m) >= target.
pub fn min_learners_for_confidence(n: usize, target: f64) -> Result<usize, ForestError> {
    assert!(n >= 2, "n must be at least 2");
    if !(target < 1.0) {
        return Err(ForestError::UnreachableTarget(target));
    }
    if target <= 0.0 {
        return Ok(1);
    }
    // confidence is monotone in m: 1 - b^(m sqrt(n)) >= t  <=>
    // m >= ln(1-t) / (sqrt(n) ln b); verify by direct evaluation around the
    // analytic guess to absorb floating-point edge cases.
    let base = (n as f64 - 1.0) / n as f64;
    let guess = ((1.0 - target).ln() / ((n as f64).sqrt() * base.ln())).ceil() as usize;
    let mut m = guess.saturating_sub(2).max(1);
    while confidence(n, m) < target {
        m += 1;
    }
    Ok(m)
}

fn plurality(outputs: &[&Prediction], preferred: Option<usize>) -> Prediction {
    let class_count = match outputs[0] {
        Prediction::Classification { votes, .. } => votes.len(),
        Prediction::Regression(_) => unreachable!("plurality over regression outputs"),
    };
    let mut tally = vec![0usize; class_count];
    for p in outputs {
        tally[p.class().expect("classification output")] += 1;
    }
    let max = *tally.iter().max().unwrap();
    let class = match preferred {
        Some(c) if tally[c] == max => c,
        _ => tally.iter().position(|&v| v == max).unwrap(),
    };
    let total = outputs.len() as f64;
    Prediction::Classification {
        class,
        votes: tally.iter().map(|&v| v as f64 / total).collect(),
    }
}

/// Majority vote over weak outputs plus the main tree, one vote each; ties
/// break in favor of the main tree's class. With no weak learners the main
/// output passes through unchanged.
pub fn combine_classification(weak_outputs: &[Prediction], main_output: &Prediction) -> Prediction {
    if weak_outputs.is_empty() {
        return main_output.clone();
    }
    let mut all: Vec<&Prediction> = weak_outputs.iter().collect();
    all.push(main_output);
    plurality(&all, main_output.class())
}

/// Arithmetic mean of all outputs (weak plus main).
pub fn combine_regression(weak_outputs: &[Prediction], main_output: &Prediction) -> Prediction {
    if weak_outputs.is_empty() {
        return main_output.clone();
    }
    let sum: f64 = weak_outputs
        .iter()
        .chain(std::iter::once(main_output))
        .map(|p| p.value().expect("regression output"))
        .sum();
    Prediction::Regression(sum / (weak_outputs.len() + 1) as f64)
}

/// FIFO window of binary records with a running sum; always exactly `k`
/// entries long.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceWindow {
    buf: VecDeque<bool>,
    ones: usize,
}

impl PerformanceWindow {
    pub fn filled(k: usize, value: bool) -> Self {
        assert!(k >= 1);
        PerformanceWindow {
            buf: VecDeque::from(vec![value; k]),
            ones: if value { k } else { 0 },
        }
    }

    pub fn push(&mut self, value: bool) {
        let evicted = self.buf.pop_front().expect("window is never empty");
        if evicted {
            self.ones -= 1;
        }
        if value {
            self.ones += 1;
        }
        self.buf.push_back(value);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sum(&self) -> usize {
        self.ones
    }

    pub fn fraction(&self) -> f64 {
        self.ones as f64 / self.buf.len() as f64
    }

    pub fn contents(&self) -> Vec<bool> {
        self.buf.iter().copied().collect()
    }

    pub fn reset(&mut self, value: bool) {
        let k = self.buf.len();
        self.buf.clear();
        self.buf.extend(std::iter::repeat(value).take(k));
        self.ones = if value { k } else { 0 };
    }
}

/// Concept drift flagged by the disagreement window.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEvent {
    pub sample_index: u64,
    pub disagreement_fraction: f64,
}

/// The windowed decision unit: a correctness window W (initialized to all
/// ones) gating ensemble vs. main-tree output, and a disagreement window
/// driving drift detection.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactController {
    window: PerformanceWindow,
    disagreement: PerformanceWindow,
    d_hybrid_impact: f64,
    drift_threshold: f64,
}

impl ImpactController {
    pub fn new(d_hybrid_impact: f64, k_window_size: usize, drift_threshold: f64) -> Self {
        ImpactController {
            window: PerformanceWindow::filled(k_window_size, true),
            disagreement: PerformanceWindow::filled(k_window_size, false),
            d_hybrid_impact,
            drift_threshold,
        }
    }

    /// Strict comparison per the controller rule: sum(W) > d * k.
    pub fn use_ensemble(&self) -> bool {
        self.window.sum() as f64 > self.d_hybrid_impact * self.window.len() as f64
    }

    pub fn record_outcome(&mut self, emitted_correct: bool) {
        self.window.push(emitted_correct);
    }

    /// Pushes the [ensemble-correct AND main-wrong] record; fires (and
    /// resets the disagreement window) when its fraction strictly exceeds
    /// the drift threshold.
    pub fn record_disagreement(
        &mut self,
        ensemble_correct: bool,
        main_correct: bool,
        sample_index: u64,
    ) -> Option<DriftEvent> {
        self.disagreement.push(ensemble_correct && !main_correct);
        let fraction = self.disagreement.fraction();
        if fraction > self.drift_threshold {
            self.disagreement.reset(false);
            Some(DriftEvent { sample_index, disagreement_fraction: fraction })
        } else {
            None
        }
    }

    pub fn window(&self) -> &PerformanceWindow {
        &self.window
    }

    pub fn disagreement_window(&self) -> &PerformanceWindow {
        &self.disagreement
    }
}

/// Whether a prediction counts as correct against the true target.
/// Classification: class equality. Regression: relative error within the
/// tolerance, with an absolute floor guarding a zero target.
pub fn prediction_correct(pred: &Prediction, target: &Target, tolerance: f64) -> bool {
    match (pred, target) {
        (Prediction::Classification { class, .. }, Target::Class(truth)) => class == truth,
        (Prediction::Regression(y_hat), Target::Value(y)) => {
            (y_hat - y).abs() / y.abs().max(1e-12) <= tolerance
        }
        _ => false,
    }
}

#[derive(Debug, Clone)]
enum TreeSet {
    Classification {
        main: Option<HoeffdingTreeClassifier>,
        weak: Vec<HoeffdingTreeClassifier>,
    },
    Regression {
        main: Option<HoeffdingTreeRegressor>,
        weak: Vec<HoeffdingTreeRegressor>,
    },
}

impl TreeSet {
    fn build(schema: &Schema, config: &RunConfig, bags: &[FeatureBag], with_main: bool) -> Self {
        match schema.task() {
            Task::Classification { .. } => TreeSet::Classification {
                main: with_main
                    .then(|| HoeffdingTreeClassifier::new(schema.clone(), config.clone())),
                weak: bags
                    .iter()
                    .map(|b| {
                        HoeffdingTreeClassifier::new(schema.project(&b.features), config.clone())
                    })
                    .collect(),
            },
            Task::Regression => TreeSet::Regression {
                main: with_main
                    .then(|| HoeffdingTreeRegressor::new(schema.clone(), config.clone())),
                weak: bags
                    .iter()
                    .map(|b| {
                        HoeffdingTreeRegressor::new(schema.project(&b.features), config.clone())
                    })
                    .collect(),
            },
        }
    }

    fn predict_all(&self, inst: &Instance, bags: &[FeatureBag]) -> (Option<Prediction>, Vec<Prediction>) {
        match self {
            TreeSet::Classification { main, weak } => (
                main.as_ref().map(|t| t.predict(inst)),
                weak.iter()
                    .zip(bags)
                    .map(|(t, b)| t.predict(&inst.project(&b.features)))
                    .collect(),
            ),
            TreeSet::Regression { main, weak } => (
                main.as_ref().map(|t| t.predict(inst)),
                weak.iter()
                    .zip(bags)
                    .map(|(t, b)| t.predict(&inst.project(&b.features)))
                    .collect(),
            ),
        }
    }

    fn train_all(&mut self, inst: &Instance, bags: &[FeatureBag]) {
        match self {
            TreeSet::Classification { main, weak } => {
                if let Some(t) = main {
                    t.train(inst);
                }
                for (t, b) in weak.iter_mut().zip(bags) {
                    t.train(&inst.project(&b.features));
                }
            }
            TreeSet::Regression { main, weak } => {
                if let Some(t) = main {
                    t.train(inst);
                }
                for (t, b) in weak.iter_mut().zip(bags) {
                    t.train(&inst.project(&b.features));
                }
            }
        }
    }

    fn memory_estimate(&self) -> u64 {
        match self {
            TreeSet::Classification { main, weak } => {
                main.as_ref().map_or(0, |t| t.memory_estimate())
                    + weak.iter().map(|t| t.memory_estimate()).sum::<u64>()
            }
            TreeSet::Regression { main, weak } => {
                main.as_ref().map_or(0, |t| t.memory_estimate())
                    + weak.iter().map(|t| t.memory_estimate()).sum::<u64>()
            }
        }
    }

    fn node_count(&self) -> usize {
        match self {
            TreeSet::Classification { main, weak } => {
                main.as_ref().map_or(0, |t| t.node_count())
                    + weak.iter().map(|t| t.node_count()).sum::<usize>()
            }
            TreeSet::Regression { main, weak } => {
                main.as_ref().map_or(0, |t| t.node_count())
                    + weak.iter().map(|t| t.node_count()).sum::<usize>()
            }
        }
    }
}

fn combine_for_task(task: Task, weak: &[Prediction], main: &Prediction) -> Prediction {
    match task {
        Task::Classification { .. } => combine_classification(weak, main),
        Task::Regression => combine_regression(weak, main),
    }
}

/// Everything one hybrid step produced, for callers that want more than the
/// emitted prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridStepOutput {
    pub emitted: Prediction,
    pub drift: Option<DriftEvent>,
    pub used_ensemble: bool,
    pub main: Prediction,
    pub ensemble: Prediction,
}

/// One full-feature main tree plus a bag of weak learners, gated by the
/// impact controller. Test-then-train per step.
#[derive(Debug, Clone)]
pub struct HybridForest {
    schema: Schema,
    config: RunConfig,
    bags: Vec<FeatureBag>,
    trees: TreeSet,
    controller: ImpactController,
    samples_seen: u64,
}

impl HybridForest {
    pub fn new(schema: Schema, config: RunConfig) -> Result<Self, ForestError> {
        config.validate()?;
        let bags = generate_bags(&schema, config.weak_learner_count, config.rng_seed);
        let trees = TreeSet::build(&schema, &config, &bags, true);
        let controller = ImpactController::new(
            config.d_hybrid_impact,
            config.k_window_size,
            config.drift_threshold,
        );
        Ok(HybridForest { schema, config, bags, trees, controller, samples_seen: 0 })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn bags(&self) -> &[FeatureBag] {
        &self.bags
    }

    pub fn controller(&self) -> &ImpactController {
        &self.controller
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// Test-then-train: collect per-tree outputs, gate through the window,
    /// score the emitted prediction, update drift state, then train.
    pub fn step(&mut self, inst: &Instance) -> Result<HybridStepOutput, ValidateError> {
        validate_instance(&self.schema, inst)?;
        let (main, weak) = self.trees.predict_all(inst, &self.bags);
        let main = main.expect("hybrid forest always has a main tree");
        let ensemble = combine_for_task(self.schema.task(), &weak, &main);
        let used_ensemble = self.controller.use_ensemble();
        let emitted = if used_ensemble { ensemble.clone() } else { main.clone() };

        let tol = self.config.regression_correctness_tolerance;
        let emitted_correct = prediction_correct(&emitted, &inst.target, tol);
        self.controller.record_outcome(emitted_correct);

        let ensemble_correct = prediction_correct(&ensemble, &inst.target, tol);
        let main_correct = prediction_correct(&main, &inst.target, tol);
        let drift =
            self.controller
                .record_disagreement(ensemble_correct, main_correct, self.samples_seen);

        self.trees.train_all(inst, &self.bags);
        self.samples_seen += 1;
        Ok(HybridStepOutput { emitted, drift, used_ensemble, main, ensemble })
    }

    /// Tree memory plus the two windows, in cost-model bytes.
    pub fn memory_estimate(&self) -> u64 {
        self.trees.memory_estimate() + 2 * self.config.k_window_size as u64
    }

    pub fn node_count(&self) -> usize {
        self.trees.node_count()
    }
}

/// Plain random forest of weak learners only; the Fig. 1-style baseline.
#[derive(Debug, Clone)]
pub struct RandomForest {
    schema: Schema,
    bags: Vec<FeatureBag>,
    trees: TreeSet,
    samples_seen: u64,
}

impl RandomForest {
    pub fn new(schema: Schema, config: RunConfig) -> Result<Self, ForestError> {
        config.validate()?;
        if config.weak_learner_count == 0 {
            return Err(ForestError::Config(ConfigError(
                "random forest needs at least one weak learner".into(),
            )));
        }
        let bags = generate_bags(&schema, config.weak_learner_count, config.rng_seed);
        let trees = TreeSet::build(&schema, &config, &bags, false);
        Ok(RandomForest { schema, bags, trees, samples_seen: 0 })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn bags(&self) -> &[FeatureBag] {
        &self.bags
    }

    /// Test-then-train; always combines the weak learners (ties break to the
    /// lowest class index). A single learner's output passes through as-is.
    pub fn step(&mut self, inst: &Instance) -> Result<Prediction, ValidateError> {
        validate_instance(&self.schema, inst)?;
        let (_, weak) = self.trees.predict_all(inst, &self.bags);
        let combined = match self.schema.task() {
            Task::Classification { .. } => {
                if weak.len() == 1 {
                    weak[0].clone()
                } else {
                    plurality(&weak.iter().collect::<Vec<_>>(), None)
                }
            }
            Task::Regression => {
                let sum: f64 = weak.iter().map(|p| p.value().unwrap()).sum();
                Prediction::Regression(sum / weak.len() as f64)
            }
        };
        self.trees.train_all(inst, &self.bags);
        self.samples_seen += 1;
        Ok(combined)
    }

    pub fn memory_estimate(&self) -> u64 {
        self.trees.memory_estimate()
    }

    pub fn node_count(&self) -> usize {
        self.trees.node_count()
    }
}
