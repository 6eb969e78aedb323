//! ARFF ingestion: the @relation/@attribute/@data subset with numeric and
//! nominal attributes. Strings, dates, relational attributes, and sparse
//! data rows are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::types::{FeatureSpec, FeatureValue, Instance, Schema, Target, Task};

use super::{StreamError, StreamSource};

#[derive(Debug, Clone)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    ty: AttrType,
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Splits `@attribute <name> <type>` where the name may be quoted.
fn parse_attribute(rest: &str, line: usize) -> Result<Attribute, StreamError> {
    let rest = rest.trim();
    let (name, ty_str) = if rest.starts_with('\'') || rest.starts_with('"') {
        let quote = rest.chars().next().unwrap();
        let close = rest[1..].find(quote).ok_or(StreamError::Parse {
            line,
            column: 1,
            reason: "unterminated quoted attribute name".into(),
        })? + 1;
        (rest[1..close].to_string(), rest[close + 1..].trim())
    } else {
        let mut parts = rest.splitn(2, char::is_whitespace);
        let name = parts.next().unwrap_or("").to_string();
        (name, parts.next().unwrap_or("").trim())
    };
    if name.is_empty() || ty_str.is_empty() {
        return Err(StreamError::Parse {
            line,
            column: 1,
            reason: "attribute needs a name and a type".into(),
        });
    }
    let lower = ty_str.to_ascii_lowercase();
    let ty = if lower == "numeric" || lower == "real" || lower == "integer" {
        AttrType::Numeric
    } else if ty_str.starts_with('{') && ty_str.ends_with('}') {
        let cats: Vec<String> = ty_str[1..ty_str.len() - 1]
            .split(',')
            .map(|c| strip_quotes(c).to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if cats.is_empty() {
            return Err(StreamError::Parse {
                line,
                column: 1,
                reason: "nominal attribute with no categories".into(),
            });
        }
        AttrType::Nominal(cats)
    } else if lower == "string" || lower.starts_with("date") || lower.starts_with("relational") {
        return Err(StreamError::UnsupportedArffFeature(format!(
            "attribute '{name}' has type '{ty_str}'"
        )));
    } else {
        return Err(StreamError::Parse {
            line,
            column: 1,
            reason: format!("unknown attribute type '{ty_str}'"),
        });
    };
    Ok(Attribute { name, ty })
}

struct ArffHeader {
    attributes: Vec<Attribute>,
    /// 1-based file line of the first data row.
    data_start_line: usize,
    data_rows: usize,
}

fn parse_header(path: &Path) -> Result<ArffHeader, StreamError> {
    let reader = BufReader::new(File::open(path)?);
    let mut attributes = Vec::new();
    let mut data_start_line = None;
    let mut data_rows = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        let lineno = i + 1;
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        if data_start_line.is_some() {
            data_rows += 1;
            continue;
        }
        let lower = text.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        } else if lower.starts_with("@attribute") {
            attributes.push(parse_attribute(&text["@attribute".len()..], lineno)?);
        } else if lower.starts_with("@data") {
            data_start_line = Some(lineno + 1);
        } else {
            return Err(StreamError::Parse {
                line: lineno,
                column: 1,
                reason: format!("unexpected line '{text}' in ARFF header"),
            });
        }
    }
    let data_start_line = data_start_line.ok_or(StreamError::SchemaMismatch(
        "ARFF file has no @data section".into(),
    ))?;
    if attributes.len() < 2 {
        return Err(StreamError::SchemaMismatch(
            "ARFF file needs at least one feature attribute and a target".into(),
        ));
    }
    Ok(ArffHeader {
        attributes,
        data_start_line,
        data_rows,
    })
}

/// Loads an ARFF file with the last attribute as the target.
pub fn load_arff(path: impl AsRef<Path>) -> Result<StreamSource, StreamError> {
    load_arff_with_target(path, None)
}

/// Loads an ARFF file; `target` overrides which attribute is the target
/// (by name), defaulting to the last one. A nominal target makes the stream
/// a classification task, a numeric target a regression task.
pub fn load_arff_with_target(
    path: impl AsRef<Path>,
    target: Option<&str>,
) -> Result<StreamSource, StreamError> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let header = parse_header(&path)?;
    let target_idx = match target {
        Some(name) => header
            .attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| StreamError::SchemaMismatch(format!("no attribute named '{name}'")))?,
        None => header.attributes.len() - 1,
    };
    let task = match &header.attributes[target_idx].ty {
        AttrType::Numeric => Task::Regression,
        AttrType::Nominal(cats) => {
            if cats.len() < 2 {
                return Err(StreamError::SchemaMismatch(
                    "classification target needs at least 2 categories".into(),
                ));
            }
            Task::Classification {
                class_count: cats.len(),
            }
        }
    };
    let feature_idx: Vec<usize> =
        (0..header.attributes.len()).filter(|&i| i != target_idx).collect();
    let features: Vec<FeatureSpec> = feature_idx
        .iter()
        .map(|&i| {
            let a = &header.attributes[i];
            match &a.ty {
                AttrType::Numeric => FeatureSpec::numeric(a.name.clone()),
                AttrType::Nominal(cats) => FeatureSpec::nominal(a.name.clone(), cats.len()),
            }
        })
        .collect();
    let schema = Schema::new(features, task)
        .map_err(|e| StreamError::SchemaMismatch(e.to_string()))?;

    let reader = BufReader::new(File::open(&path)?);
    let attributes = header.attributes;
    let iter = reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let lineno = i + 1;
            match line {
                Err(e) => Some((lineno, Err(e))),
                Ok(text) => {
                    let t = text.trim().to_string();
                    if t.is_empty() || t.starts_with('%') || t.starts_with('@') {
                        None
                    } else {
                        Some((lineno, Ok(t)))
                    }
                }
            }
        })
        .skip_while({
            let first_data = header.data_start_line;
            move |(lineno, _)| *lineno < first_data
        })
        .map(move |(lineno, line)| {
            let text = line?;
            parse_data_row(&attributes, &feature_idx, target_idx, lineno, &text)
        });
    Ok(StreamSource::new(schema, Some(header.data_rows), iter))
}

fn parse_data_row(
    attributes: &[Attribute],
    feature_idx: &[usize],
    target_idx: usize,
    line: usize,
    text: &str,
) -> Result<Instance, StreamError> {
    if text.starts_with('{') {
        return Err(StreamError::UnsupportedArffFeature(format!(
            "sparse data row at line {line}"
        )));
    }
    let fields: Vec<&str> = text.split(',').map(|f| strip_quotes(f.trim())).collect();
    if fields.len() != attributes.len() {
        return Err(StreamError::Parse {
            line,
            column: 1,
            reason: format!(
                "row has {} fields, expected {}",
                fields.len(),
                attributes.len()
            ),
        });
    }
    let parse_one = |idx: usize| -> Result<FeatureValue, StreamError> {
        let token = fields[idx];
        if token == "?" {
            return Err(StreamError::MissingValue(line));
        }
        match &attributes[idx].ty {
            AttrType::Numeric => Ok(FeatureValue::Numeric(token.parse::<f64>().map_err(
                |_| StreamError::Parse {
                    line,
                    column: idx + 1,
                    reason: format!("'{token}' is not a number"),
                },
            )?)),
            AttrType::Nominal(cats) => {
                let pos = cats.iter().position(|c| c == token).ok_or(StreamError::Parse {
                    line,
                    column: idx + 1,
                    reason: format!("'{token}' is not a declared category"),
                })?;
                Ok(FeatureValue::Nominal(pos))
            }
        }
    };
    let values = feature_idx
        .iter()
        .map(|&i| parse_one(i))
        .collect::<Result<Vec<_>, _>>()?;
    let target = match parse_one(target_idx)? {
        FeatureValue::Numeric(v) => Target::Value(v),
        FeatureValue::Nominal(c) => Target::Class(c),
    };
    Ok(Instance::new(values, target))
}
