//! CSV ingestion: header row, comma-separated, '.' decimal separator.
//!
//! The loader makes two passes. The first scans the file to build the schema
//! (nominal categories and class labels are assigned dense indices in
//! first-appearance order) and to count rows; the second streams instances
//! incrementally.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use crate::types::{FeatureSpec, FeatureValue, Instance, Schema, Target, Task};

use super::{StreamError, StreamSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskDecl {
    Classification,
    Regression,
}

/// Caller-supplied shape of a CSV file.
#[derive(Debug, Clone)]
pub struct CsvDeclaration {
    pub task: TaskDecl,
    /// Header names of feature columns holding categories rather than reals.
    pub nominal_features: Vec<String>,
    /// Header name of the target column; defaults to the last column.
    pub target_column: Option<String>,
}

impl CsvDeclaration {
    pub fn regression() -> Self {
        CsvDeclaration {
            task: TaskDecl::Regression,
            nominal_features: Vec::new(),
            target_column: None,
        }
    }

    pub fn classification() -> Self {
        CsvDeclaration {
            task: TaskDecl::Classification,
            nominal_features: Vec::new(),
            target_column: None,
        }
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "?"
}

/// Maps raw tokens to dense indices in first-appearance order.
#[derive(Debug, Default)]
struct CategoryMap {
    by_token: HashMap<String, usize>,
}

impl CategoryMap {
    fn intern(&mut self, token: &str) -> usize {
        let next = self.by_token.len();
        *self.by_token.entry(token.to_string()).or_insert(next)
    }

    fn get(&self, token: &str) -> Option<usize> {
        self.by_token.get(token).copied()
    }

    fn len(&self) -> usize {
        self.by_token.len()
    }
}

struct CsvLayout {
    /// Column index of each feature, in schema order.
    feature_columns: Vec<usize>,
    target_column: usize,
    /// Category maps for nominal feature columns, keyed by column index.
    categories: HashMap<usize, CategoryMap>,
    /// Class-label map for a classification target.
    classes: Option<CategoryMap>,
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, StreamError> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn field<'r>(
    record: &'r csv::StringRecord,
    column: usize,
    line: usize,
) -> Result<&'r str, StreamError> {
    let raw = record.get(column).ok_or(StreamError::Parse {
        line,
        column: column + 1,
        reason: "row has too few fields".into(),
    })?;
    let trimmed = raw.trim();
    if is_missing(trimmed) {
        return Err(StreamError::MissingValue(line));
    }
    Ok(trimmed)
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback)
}

pub fn load_csv(path: impl AsRef<Path>, decl: &CsvDeclaration) -> Result<StreamSource, StreamError> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let mut reader = open_reader(&path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| StreamError::SchemaMismatch(format!("unreadable header row: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(StreamError::SchemaMismatch("empty header row".into()));
    }

    let target_column = match &decl.target_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StreamError::SchemaMismatch(format!("no column named '{name}'")))?,
        None => headers.len() - 1,
    };
    for name in &decl.nominal_features {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StreamError::SchemaMismatch(format!("no column named '{name}'")))?;
        if idx == target_column {
            return Err(StreamError::SchemaMismatch(format!(
                "'{name}' is the target column, not a feature"
            )));
        }
    }
    let feature_columns: Vec<usize> = (0..headers.len()).filter(|&c| c != target_column).collect();
    if feature_columns.is_empty() {
        return Err(StreamError::SchemaMismatch(
            "file has a target column but no feature columns".into(),
        ));
    }
    let nominal_columns: Vec<usize> = decl
        .nominal_features
        .iter()
        .map(|name| headers.iter().position(|h| h == name).unwrap())
        .collect();

    // First pass: discover categories / class labels and count rows.
    let mut layout = CsvLayout {
        feature_columns,
        target_column,
        categories: nominal_columns
            .iter()
            .map(|&c| (c, CategoryMap::default()))
            .collect(),
        classes: match decl.task {
            TaskDecl::Classification => Some(CategoryMap::default()),
            TaskDecl::Regression => None,
        },
    };
    let mut row_count = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| StreamError::Parse {
            line: i + 2,
            column: 1,
            reason: e.to_string(),
        })?;
        let line = record_line(&record, i + 2);
        for (&col, map) in layout.categories.iter_mut() {
            map.intern(field(&record, col, line)?);
        }
        if let Some(classes) = layout.classes.as_mut() {
            classes.intern(field(&record, target_column, line)?);
        }
        row_count += 1;
    }

    let task = match &layout.classes {
        Some(classes) => {
            if classes.len() < 2 {
                return Err(StreamError::SchemaMismatch(format!(
                    "classification target has {} distinct label(s), need at least 2",
                    classes.len()
                )));
            }
            Task::Classification {
                class_count: classes.len(),
            }
        }
        None => Task::Regression,
    };
    let features: Vec<FeatureSpec> = layout
        .feature_columns
        .iter()
        .map(|&c| match layout.categories.get(&c) {
            Some(map) => FeatureSpec::nominal(headers[c].clone(), map.len()),
            None => FeatureSpec::numeric(headers[c].clone()),
        })
        .collect();
    let schema = Schema::new(features, task)
        .map_err(|e| StreamError::SchemaMismatch(e.to_string()))?;

    // Second pass: stream rows as instances.
    let reader = open_reader(&path)?;
    let iter = reader
        .into_records()
        .enumerate()
        .map(move |(i, record)| parse_row(&layout, i + 2, record));
    Ok(StreamSource::new(schema, Some(row_count), iter))
}

fn parse_row(
    layout: &CsvLayout,
    fallback_line: usize,
    record: Result<csv::StringRecord, csv::Error>,
) -> Result<Instance, StreamError> {
    let record = record.map_err(|e| StreamError::Parse {
        line: fallback_line,
        column: 1,
        reason: e.to_string(),
    })?;
    let line = record_line(&record, fallback_line);
    let mut values = Vec::with_capacity(layout.feature_columns.len());
    for &col in &layout.feature_columns {
        let token = field(&record, col, line)?;
        let value = match layout.categories.get(&col) {
            Some(map) => {
                let idx = map.get(token).ok_or(StreamError::Parse {
                    line,
                    column: col + 1,
                    reason: format!("unknown category '{token}'"),
                })?;
                FeatureValue::Nominal(idx)
            }
            None => FeatureValue::Numeric(token.parse::<f64>().map_err(|_| StreamError::Parse {
                line,
                column: col + 1,
                reason: format!("'{token}' is not a number"),
            })?),
        };
        values.push(value);
    }
    let token = field(&record, layout.target_column, line)?;
    let target = match &layout.classes {
        Some(classes) => Target::Class(classes.get(token).ok_or(StreamError::Parse {
            line,
            column: layout.target_column + 1,
            reason: format!("unknown class label '{token}'"),
        })?),
        None => Target::Value(token.parse::<f64>().map_err(|_| StreamError::Parse {
            line,
            column: layout.target_column + 1,
            reason: format!("'{token}' is not a number"),
        })?),
    };
    Ok(Instance::new(values, target))
}
