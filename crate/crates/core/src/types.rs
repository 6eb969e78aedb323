//! Shared domain types: schemas, instances, predictions and run configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Learning task attached to a [`Schema`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Classification { class_count: usize },
    Regression,
}

/// Kind of a single feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Nominal { categories: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn nominal(name: impl Into<String>, categories: usize) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Nominal { categories },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("schema must declare at least one feature")]
    NoFeatures,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("nominal feature `{0}` must have at least 2 categories")]
    TooFewCategories(String),
    #[error("classification schema must have at least 2 classes")]
    TooFewClasses,
}

/// Immutable description of the feature vector and the target of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<FeatureSpec>,
    task: Task,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>, task: Task) -> Result<Self, SchemaError> {
        if features.is_empty() {
            return Err(SchemaError::NoFeatures);
        }
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(SchemaError::DuplicateFeature(f.name.clone()));
            }
            if let FeatureKind::Nominal { categories } = f.kind {
                if categories < 2 {
                    return Err(SchemaError::TooFewCategories(f.name.clone()));
                }
            }
        }
        if let Task::Classification { class_count } = task {
            if class_count < 2 {
                return Err(SchemaError::TooFewClasses);
            }
        }
        Ok(Schema { features, task })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn class_count(&self) -> Option<usize> {
        match self.task {
            Task::Classification { class_count } => Some(class_count),
            Task::Regression => None,
        }
    }

    /// Schema restricted to the given feature indices (in the given order).
    ///
    /// Panics if an index is out of range; callers produce indices from this
    /// schema.
    pub fn project(&self, indices: &[usize]) -> Schema {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        Schema {
            features,
            task: self.task,
        }
    }
}

/// One observed feature value, aligned with its `FeatureSpec`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Numeric(f64),
    Nominal(usize),
}

/// Supervised target of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Value(f64),
}

/// One stream sample: feature values plus the true target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<FeatureValue>,
    pub target: Target,
}

impl Instance {
    pub fn new(values: Vec<FeatureValue>, target: Target) -> Self {
        Instance { values, target }
    }

    /// Instance restricted to the given feature indices.
    pub fn project(&self, indices: &[usize]) -> Instance {
        Instance {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            target: self.target,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidateError {
    #[error("instance has {got} values, schema expects {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("value out of domain for `{field}`: {detail}")]
    ValueOutOfDomain { field: String, detail: String },
    #[error("target kind mismatch for `{field}`: {detail}")]
    TargetKindMismatch { field: String, detail: String },
}

/// Checks an instance against a schema: arity, per-feature domains and the
/// target kind. Missing values are not representable and NaNs are rejected.
pub fn validate_instance(schema: &Schema, inst: &Instance) -> Result<(), ValidateError> {
    if inst.values.len() != schema.feature_count() {
        return Err(ValidateError::ArityMismatch {
            expected: schema.feature_count(),
            got: inst.values.len(),
        });
    }
    for (spec, value) in schema.features().iter().zip(&inst.values) {
        match (spec.kind, value) {
            (FeatureKind::Numeric, FeatureValue::Numeric(x)) => {
                if !x.is_finite() {
                    return Err(ValidateError::ValueOutOfDomain {
                        field: spec.name.clone(),
                        detail: format!("non-finite numeric value {x}"),
                    });
                }
            }
            (FeatureKind::Nominal { categories }, FeatureValue::Nominal(c)) => {
                if *c >= categories {
                    return Err(ValidateError::ValueOutOfDomain {
                        field: spec.name.clone(),
                        detail: format!("category {c} >= {categories}"),
                    });
                }
            }
            (FeatureKind::Numeric, FeatureValue::Nominal(_)) => {
                return Err(ValidateError::ValueOutOfDomain {
                    field: spec.name.clone(),
                    detail: "nominal value for numeric feature".into(),
                });
            }
            (FeatureKind::Nominal { .. }, FeatureValue::Numeric(_)) => {
                return Err(ValidateError::ValueOutOfDomain {
                    field: spec.name.clone(),
                    detail: "numeric value for nominal feature".into(),
                });
            }
        }
    }
    match (schema.task(), inst.target) {
        (Task::Classification { class_count }, Target::Class(c)) => {
            if c >= class_count {
                return Err(ValidateError::ValueOutOfDomain {
                    field: "target".into(),
                    detail: format!("class {c} >= {class_count}"),
                });
            }
        }
        (Task::Regression, Target::Value(y)) => {
            if !y.is_finite() {
                return Err(ValidateError::TargetKindMismatch {
                    field: "target".into(),
                    detail: format!("non-finite target {y}"),
                });
            }
        }
        (Task::Classification { .. }, Target::Value(_)) => {
            return Err(ValidateError::TargetKindMismatch {
                field: "target".into(),
                detail: "real-valued target for classification schema".into(),
            });
        }
        (Task::Regression, Target::Class(_)) => {
            return Err(ValidateError::TargetKindMismatch {
                field: "target".into(),
                detail: "class target for regression schema".into(),
            });
        }
    }
    Ok(())
}

/// Model output for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    Classification { class: usize, votes: Vec<f64> },
    Regression(f64),
}

impl Prediction {
    pub fn class(&self) -> Option<usize> {
        match self {
            Prediction::Classification { class, .. } => Some(*class),
            Prediction::Regression(_) => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Prediction::Regression(v) => Some(*v),
            Prediction::Classification { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid run config: {0}")]
pub struct ConfigError(pub String);

/// Learner and controller parameters for one run.
///
/// `grace_period` and `tie_threshold` default to values calibrated so an
/// out-of-the-box single tree tracks the accuracy the reference experiments
/// report; both are freely configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub delta: f64,
    pub grace_period: usize,
    pub tie_threshold: f64,
    pub weak_learner_count: usize,
    pub d_hybrid_impact: f64,
    pub k_window_size: usize,
    pub regression_correctness_tolerance: f64,
    pub drift_threshold: f64,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            delta: 1e-7,
            grace_period: 50,
            tie_threshold: 0.7,
            weak_learner_count: 10,
            d_hybrid_impact: 0.2,
            k_window_size: 15,
            regression_correctness_tolerance: 0.10,
            drift_threshold: 0.5,
            rng_seed: 0,
        }
    }
}

impl RunConfig {
    /// Validates all field ranges; call after construction or mutation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError(format!("delta must be in (0,1), got {}", self.delta)));
        }
        if self.grace_period == 0 {
            return Err(ConfigError("grace_period must be positive".into()));
        }
        if !(self.tie_threshold >= 0.0) {
            return Err(ConfigError(format!(
                "tie_threshold must be >= 0, got {}",
                self.tie_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.d_hybrid_impact) {
            return Err(ConfigError(format!(
                "d_hybrid_impact must be in [0,1], got {}",
                self.d_hybrid_impact
            )));
        }
        if self.k_window_size == 0 {
            return Err(ConfigError("k_window_size must be >= 1".into()));
        }
        if !(self.regression_correctness_tolerance > 0.0
            && self.regression_correctness_tolerance < 1.0)
        {
            return Err(ConfigError(format!(
                "regression_correctness_tolerance must be in (0,1), got {}",
                self.regression_correctness_tolerance
            )));
        }
        if !(self.drift_threshold > 0.0 && self.drift_threshold <= 1.0) {
            return Err(ConfigError(format!(
                "drift_threshold must be in (0,1], got {}",
                self.drift_threshold
            )));
        }
        Ok(())
    }
}
