//! Data sources: file ingestion (CSV, ARFF) and synthetic generators
//! (waveform, redundant-sensor regression, drift injection).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::types::{
    FeatureKind, FeatureSpec, FeatureValue, Instance, Schema, Target, Task, ValidateError,
};

mod arff_input;
mod csv_input;

pub use arff_input::{load_arff, load_arff_with_target};
pub use csv_input::{load_csv, CsvDeclaration, TaskDecl};

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("missing value at line {0}")]
    MissingValue(usize),
    #[error("unsupported ARFF feature: {0}")]
    UnsupportedArffFeature(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error(transparent)]
    Invalid(#[from] ValidateError),
}

/// A single-consumer stream of instances with a declared schema.
///
/// File-backed sources read incrementally; generators produce values on
/// demand. `len_hint` is exact for files and bounded generators.
pub struct StreamSource {
    schema: Schema,
    len: Option<usize>,
    inner: Box<dyn Iterator<Item = Result<Instance, StreamError>> + Send>,
}

impl StreamSource {
    pub fn new<I>(schema: Schema, len: Option<usize>, inner: I) -> Self
    where
        I: Iterator<Item = Result<Instance, StreamError>> + Send + 'static,
    {
        StreamSource {
            schema,
            len,
            inner: Box::new(inner),
        }
    }

    pub fn from_instances(schema: Schema, items: Vec<Instance>) -> Self {
        let len = items.len();
        StreamSource::new(schema, Some(len), items.into_iter().map(Ok))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Total length when known up front (files, bounded generators).
    pub fn len_hint(&self) -> Option<usize> {
        self.len
    }

    /// Drains the stream, failing on the first bad record.
    pub fn collect_instances(self) -> Result<Vec<Instance>, StreamError> {
        self.inner.collect()
    }
}

impl Iterator for StreamSource {
    type Item = Result<Instance, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next()
    }
}

impl std::fmt::Debug for StreamSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamSource")
            .field("schema", &self.schema)
            .field("len", &self.len)
            .finish_non_exhaustive()
    }
}

pub const WAVEFORM_FEATURES: usize = 21;
pub const WAVEFORM_CLASSES: usize = 3;

/// The three triangular base waves of the classic waveform generator,
/// sampled at the 21 attribute positions.
const BASE_WAVES: [[f64; WAVEFORM_FEATURES]; 3] = [
    [
        0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    ],
    [
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 5.0, 4.0,
        3.0, 2.0, 1.0, 0.0,
    ],
    [
        0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    ],
];

/// Class c mixes base waves CLASS_PAIRS[c].0 and .1.
const CLASS_PAIRS: [(usize, usize); WAVEFORM_CLASSES] = [(0, 1), (0, 2), (1, 2)];

pub fn waveform_schema() -> Schema {
    let features = (0..WAVEFORM_FEATURES)
        .map(|i| FeatureSpec::numeric(format!("x{i}")))
        .collect();
    Schema::new(
        features,
        Task::Classification {
            class_count: WAVEFORM_CLASSES,
        },
    )
    .expect("waveform schema is statically valid")
}

/// Classic waveform stream: each instance is a random convex combination
/// u·h_i + (1−u)·h_j of two base waves plus unit Gaussian noise per
/// attribute; the class is the index of the pair. Deterministic per seed.
pub fn generate_waveform(count: usize, rng_seed: u64) -> StreamSource {
    let schema = waveform_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let iter = (0..count).map(move |_| {
        let class = rng.gen_range(0..WAVEFORM_CLASSES);
        let (a, b) = CLASS_PAIRS[class];
        let u: f64 = rng.gen();
        let values = (0..WAVEFORM_FEATURES)
            .map(|i| {
                let noise: f64 = rng.sample(StandardNormal);
                FeatureValue::Numeric(u * BASE_WAVES[a][i] + (1.0 - u) * BASE_WAVES[b][i] + noise)
            })
            .collect();
        Ok(Instance::new(values, Target::Class(class)))
    });
    StreamSource::new(schema, Some(count), iter)
}

pub const SENSOR_FEATURES: usize = 16;

pub fn sensor_schema() -> Schema {
    let features = (0..SENSOR_FEATURES)
        .map(|i| FeatureSpec::numeric(format!("s{i}")))
        .collect();
    Schema::new(features, Task::Regression).expect("sensor schema is statically valid")
}

/// Synthetic regression stream: a latent signal s ~ U[1,2] is read by 16
/// redundant sensors, each reporting s plus independent Gaussian noise of
/// standard deviation `noise_sd`; the target is s itself. Recovering s well
/// requires combining several sensors, which favours averaging ensembles.
pub fn generate_redundant_sensors(count: usize, noise_sd: f64, rng_seed: u64) -> StreamSource {
    let schema = sensor_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let iter = (0..count).map(move |_| {
        let signal: f64 = 1.0 + rng.gen::<f64>();
        let values = (0..SENSOR_FEATURES)
            .map(|_| {
                let noise: f64 = rng.sample(StandardNormal);
                FeatureValue::Numeric(signal + noise_sd * noise)
            })
            .collect();
        Ok(Instance::new(values, Target::Value(signal)))
    });
    StreamSource::new(schema, Some(count), iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftKind {
    /// Instances before `at` pass through; from `at` onward the transform
    /// applies.
    Abrupt { at: usize },
    /// Between `start` and `end` the transform applies with probability
    /// ramping linearly from 0 to 1; from `end` onward it always applies.
    Gradual { start: usize, end: usize },
}

/// Concept permutation: class relabeling and/or feature permutation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DriftTransform {
    /// `class_permutation[old_class] = new_class`.
    pub class_permutation: Option<Vec<usize>>,
    /// `new_values[i] = old_values[feature_permutation[i]]`.
    pub feature_permutation: Option<Vec<usize>>,
}

impl DriftTransform {
    pub fn class_swap(a: usize, b: usize, class_count: usize) -> Self {
        let mut p: Vec<usize> = (0..class_count).collect();
        p.swap(a, b);
        DriftTransform {
            class_permutation: Some(p),
            feature_permutation: None,
        }
    }

    pub fn is_identity(&self) -> bool {
        let id = |p: &Option<Vec<usize>>| match p {
            None => true,
            Some(v) => v.iter().enumerate().all(|(i, &j)| i == j),
        };
        id(&self.class_permutation) && id(&self.feature_permutation)
    }

    fn apply(&self, inst: &Instance) -> Instance {
        let values = match &self.feature_permutation {
            Some(p) => p.iter().map(|&j| inst.values[j].clone()).collect(),
            None => inst.values.clone(),
        };
        let target = match (&self.class_permutation, &inst.target) {
            (Some(p), Target::Class(c)) => Target::Class(p[*c]),
            _ => inst.target.clone(),
        };
        Instance::new(values, target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub transform: DriftTransform,
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in p {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

fn validate_drift(spec: &DriftSpec, schema: &Schema) -> Result<(), StreamError> {
    match spec.kind {
        DriftKind::Abrupt { at } if at == 0 => {
            return Err(StreamError::IndexOutOfRange("drift index must be >= 1".into()))
        }
        DriftKind::Gradual { start, end } if start == 0 || start >= end => {
            return Err(StreamError::IndexOutOfRange(format!(
                "gradual drift needs 1 <= start < end, got {start}..{end}"
            )))
        }
        _ => {}
    }
    if let Some(p) = &spec.transform.class_permutation {
        let classes = schema.class_count().ok_or_else(|| {
            StreamError::SchemaMismatch("class permutation on a regression stream".into())
        })?;
        if !is_permutation(p, classes) {
            return Err(StreamError::IndexOutOfRange(format!(
                "{p:?} is not a permutation of {classes} classes"
            )));
        }
    }
    if let Some(p) = &spec.transform.feature_permutation {
        let n = schema.feature_count();
        if !is_permutation(p, n) {
            return Err(StreamError::IndexOutOfRange(format!(
                "{p:?} is not a permutation of {n} features"
            )));
        }
        for (i, &j) in p.iter().enumerate() {
            let (a, b) = (schema.features()[i].kind, schema.features()[j].kind);
            let compatible = match (a, b) {
                (FeatureKind::Numeric, FeatureKind::Numeric) => true,
                (FeatureKind::Nominal { categories: ca }, FeatureKind::Nominal { categories: cb }) => {
                    ca == cb
                }
                _ => false,
            };
            if !compatible {
                return Err(StreamError::SchemaMismatch(format!(
                    "feature permutation maps incompatible kinds at position {i}"
                )));
            }
        }
    }
    Ok(())
}

/// Overlays a concept change on an existing stream. Length and schema are
/// preserved; the randomness of the gradual ramp is seeded independently of
/// the source.
pub fn inject_drift(
    source: StreamSource,
    spec: DriftSpec,
    rng_seed: u64,
) -> Result<StreamSource, StreamError> {
    validate_drift(&spec, source.schema())?;
    let schema = source.schema().clone();
    let len = source.len_hint();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let iter = source.inner.enumerate().map(move |(idx, item)| {
        let inst = item?;
        let transformed = match spec.kind {
            DriftKind::Abrupt { at } => idx >= at,
            DriftKind::Gradual { start, end } => {
                if idx < start {
                    // Consume no randomness before the ramp so traces align.
                    false
                } else if idx >= end {
                    true
                } else {
                    let p = (idx - start) as f64 / (end - start) as f64;
                    rng.gen::<f64>() < p
                }
            }
        };
        Ok(if transformed {
            spec.transform.apply(&inst)
        } else {
            inst
        })
    });
    Ok(StreamSource::new(schema, len, iter))
}
