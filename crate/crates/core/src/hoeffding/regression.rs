//! Incremental regression tree, split on standard-deviation reduction.

use super::bound::{hoeffding_epsilon, HoeffdingBoundParams};
use super::classification::{SplitError, SplitKind};
use super::observers::{RegObserver, TargetMoments};
use crate::types::{FeatureKind, FeatureValue, Instance, Prediction, RunConfig, Schema, Target};

/// Sufficient statistics of one regression leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafStatsReg {
    target: TargetMoments,
    observers: Vec<RegObserver>,
    available: Vec<bool>,
    seen_since_check: usize,
}

impl LeafStatsReg {
    pub fn new(schema: &Schema) -> Self {
        Self::with_available(schema, vec![true; schema.feature_count()])
    }

    fn with_available(schema: &Schema, available: Vec<bool>) -> Self {
        let observers = schema
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numeric => RegObserver::numeric(),
                FeatureKind::Nominal { categories } => RegObserver::nominal(categories),
            })
            .collect();
        LeafStatsReg {
            target: TargetMoments::default(),
            observers,
            available,
            seen_since_check: 0,
        }
    }

    pub fn count(&self) -> u64 {
        self.target.count
    }

    pub fn mean(&self) -> f64 {
        self.target.mean()
    }

    pub fn variance(&self) -> f64 {
        self.target.variance()
    }

    pub fn observers(&self) -> &[RegObserver] {
        &self.observers
    }

    pub fn prediction(&self) -> Option<Prediction> {
        if self.target.count == 0 {
            None
        } else {
            Some(Prediction::Regression(self.target.mean()))
        }
    }

    /// Freezes every numeric observer's histogram; called at the first grace
    /// checkpoint of the leaf.
    fn freeze_numeric_observers(&mut self) {
        for obs in &mut self.observers {
            obs.freeze();
        }
    }

    fn field_count(&self) -> usize {
        3 + self
            .observers
            .iter()
            .map(RegObserver::field_count)
            .sum::<usize>()
            + 2
    }
}

/// Updates target moments and all observers with one instance.
pub fn observe_regression(leaf: &mut LeafStatsReg, inst: &Instance) {
    let y = match inst.target {
        Target::Value(y) => y,
        Target::Class(_) => unreachable!("classification target in regression leaf"),
    };
    leaf.target.add(y);
    leaf.seen_since_check += 1;
    for (obs, value) in leaf.observers.iter_mut().zip(&inst.values) {
        match value {
            FeatureValue::Numeric(x) => obs.observe_numeric(*x, y),
            FeatureValue::Nominal(c) => obs.observe_nominal(*c, y),
        }
    }
}

/// A scored regression split: standard-deviation reduction normalized by the
/// leaf's own standard deviation, clamped to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RegCandidate {
    pub feature: Option<usize>,
    pub score: f64,
    pub kind: Option<SplitKind>,
}

impl RegCandidate {
    fn null() -> Self {
        RegCandidate { feature: None, score: 0.0, kind: None }
    }
}

fn sdr_score(parts: &[TargetMoments], leaf: &TargetMoments) -> f64 {
    let leaf_sd = leaf.std_dev();
    if leaf_sd <= 0.0 {
        return 0.0;
    }
    let n = leaf.count as f64;
    let weighted: f64 = parts
        .iter()
        .filter(|p| p.count > 0)
        .map(|p| p.count as f64 / n * p.std_dev())
        .sum();
    ((leaf_sd - weighted) / leaf_sd).clamp(0.0, 1.0)
}

fn best_numeric_reg_split(obs: &RegObserver, leaf: &TargetMoments) -> Option<(f64, f64)> {
    let hist = match obs {
        RegObserver::Numeric { bins: Some(h), .. } => h,
        _ => return None,
    };
    let mut best: Option<(f64, f64)> = None;
    let mut below = TargetMoments::default();
    let total_count: u64 = hist.bins.iter().map(|b| b.count).sum();
    for i in 0..hist.bins.len() - 1 {
        below.merge(&hist.bins[i]);
        if below.count == 0 || below.count == total_count {
            continue;
        }
        let above = TargetMoments {
            count: leaf.count - below.count,
            sum: leaf.sum - below.sum,
            sum_sq: leaf.sum_sq - below.sum_sq,
        };
        let score = sdr_score(&[below, above], leaf);
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((hist.boundary(i), score));
        }
    }
    best
}

/// The two best regression candidates; the null split is always a candidate.
pub fn best_two_splits_regression(
    leaf: &LeafStatsReg,
) -> Result<(RegCandidate, RegCandidate), SplitError> {
    if leaf.count() < 2 {
        return Err(SplitError::InsufficientData(leaf.count()));
    }
    let mut candidates = vec![RegCandidate::null()];
    for (i, obs) in leaf.observers.iter().enumerate() {
        if !leaf.available[i] {
            continue;
        }
        match obs {
            RegObserver::Nominal { per_category } => {
                candidates.push(RegCandidate {
                    feature: Some(i),
                    score: sdr_score(per_category, &leaf.target),
                    kind: Some(SplitKind::Nominal { arity: per_category.len() }),
                });
            }
            RegObserver::Numeric { .. } => {
                if let Some((thr, score)) = best_numeric_reg_split(obs, &leaf.target) {
                    candidates.push(RegCandidate {
                        feature: Some(i),
                        score,
                        kind: Some(SplitKind::NumericThreshold(thr)),
                    });
                }
            }
        }
    }
    candidates.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    let best = candidates[0].clone();
    let second = candidates.get(1).cloned().unwrap_or_else(RegCandidate::null);
    Ok((best, second))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegSplitDecision {
    NoSplit,
    Split(RegCandidate),
}

/// Ratio-form Hoeffding test with R = 1: split when second/best < 1 - eps,
/// or on the tie threshold.
pub fn try_split_regression(leaf: &LeafStatsReg, config: &RunConfig) -> RegSplitDecision {
    let n = leaf.count();
    let (best, second) = match best_two_splits_regression(leaf) {
        Ok(pair) => pair,
        Err(_) => return RegSplitDecision::NoSplit,
    };
    if best.feature.is_none() || best.score <= 0.0 {
        return RegSplitDecision::NoSplit;
    }
    let eps = hoeffding_epsilon(
        HoeffdingBoundParams::new(1.0, config.delta, n).expect("validated config"),
    );
    let ratio = second.score / best.score;
    if ratio < 1.0 - eps || eps < config.tie_threshold {
        RegSplitDecision::Split(best)
    } else {
        RegSplitDecision::NoSplit
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(LeafStatsReg),
    Split {
        feature: usize,
        kind: SplitKind,
        children: Vec<Node>,
        fallback: Prediction,
    },
}

/// Single-writer incremental regression tree; leaves predict the running
/// target mean.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingTreeRegressor {
    schema: Schema,
    config: RunConfig,
    root: Node,
    node_count: usize,
}

impl HoeffdingTreeRegressor {
    pub fn new(schema: Schema, config: RunConfig) -> Self {
        let root = Node::Leaf(LeafStatsReg::new(&schema));
        HoeffdingTreeRegressor { schema, config, root, node_count: 1 }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    fn route_child(kind: &SplitKind, feature: usize, inst: &Instance) -> usize {
        match (kind, inst.values[feature]) {
            (SplitKind::NumericThreshold(thr), FeatureValue::Numeric(x)) => usize::from(x > *thr),
            (SplitKind::Nominal { .. }, FeatureValue::Nominal(c)) => c,
            _ => unreachable!("instance does not match split kind"),
        }
    }

    pub fn predict(&self, inst: &Instance) -> Prediction {
        let mut node = &self.root;
        let mut fallback = Prediction::Regression(0.0);
        loop {
            match node {
                Node::Leaf(stats) => return stats.prediction().unwrap_or(fallback),
                Node::Split { feature, kind, children, fallback: cached } => {
                    fallback = cached.clone();
                    node = &children[Self::route_child(kind, *feature, inst)];
                }
            }
        }
    }

    pub fn train(&mut self, inst: &Instance) {
        let mut splits = 0;
        Self::train_node(&mut self.root, inst, &self.schema, &self.config, &mut splits);
        self.node_count += splits;
    }

    fn train_node(
        node: &mut Node,
        inst: &Instance,
        schema: &Schema,
        config: &RunConfig,
        new_nodes: &mut usize,
    ) {
        match node {
            Node::Split { feature, kind, children, .. } => {
                let idx = Self::route_child(kind, *feature, inst);
                Self::train_node(&mut children[idx], inst, schema, config, new_nodes);
            }
            Node::Leaf(stats) => {
                observe_regression(stats, inst);
                if stats.seen_since_check < config.grace_period {
                    return;
                }
                stats.seen_since_check = 0;
                stats.freeze_numeric_observers();
                if let RegSplitDecision::Split(choice) = try_split_regression(stats, config) {
                    let feature = choice.feature.expect("split has a feature");
                    let kind = choice.kind.expect("split has a kind");
                    let arity = match kind {
                        SplitKind::Nominal { arity } => arity,
                        SplitKind::NumericThreshold(_) => 2,
                    };
                    let mut available = stats.available.clone();
                    if matches!(kind, SplitKind::Nominal { .. }) {
                        available[feature] = false;
                    }
                    let fallback = stats.prediction().expect("non-empty leaf");
                    let children = (0..arity)
                        .map(|_| Node::Leaf(LeafStatsReg::with_available(schema, available.clone())))
                        .collect();
                    *new_nodes += arity;
                    *node = Node::Split { feature, kind, children, fallback };
                }
            }
        }
    }

    pub fn memory_estimate(&self) -> u64 {
        fn walk(node: &Node) -> u64 {
            match node {
                Node::Leaf(stats) => stats.field_count() as u64,
                Node::Split { children, .. } => {
                    4 + children.iter().map(walk).sum::<u64>()
                }
            }
        }
        walk(&self.root) * 8
    }
}
