use std::collections::BTreeSet;
use std::path::Path;

use super::{Dataset, Split};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    /// Requires a header row.
    Name(String),
}

/// How to read a CSV file: one label column, every other column a feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub has_header: bool,
    pub label: LabelColumn,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            has_header: true,
            label: LabelColumn::Index(0),
        }
    }
}

fn csv_error(e: ::csv::Error, path: &Path) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        ::csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            line,
            msg: format!("{kind:?}"),
        },
    }
}

/// Reads a labelled CSV. Labels must be integral; they are remapped to
/// `0..C` in ascending order of their original value.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(::csv::Trim::All)
        .from_reader(file);

    let label_col = match &schema.label {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => {
            if !schema.has_header {
                return Err(Error::Config(format!(
                    "label column '{name}' named but the file has no header"
                )));
            }
            let headers = reader.headers().map_err(|e| csv_error(e, path))?;
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("no column named '{name}'"),
            })?
        }
    };

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(e, path))?;
        let line = rec.position().map_or(0, |p| p.line());
        if label_col >= rec.len() {
            return Err(Error::Parse {
                line,
                msg: format!("label column {label_col} missing from {} fields", rec.len()),
            });
        }
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Parse {
                line,
                msg: "inconsistent number of fields".into(),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("column {j}: '{field}' is not a number"),
            })?;
            if j == label_col {
                if value.fract() != 0.0 || !value.is_finite() {
                    return Err(Error::Data(format!(
                        "line {line}: label '{field}' is not an integer"
                    )));
                }
                raw_labels.push(value as i64);
            } else {
                features.push(T::of(value));
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    let d = width.unwrap_or(1) - 1;
    if d == 0 {
        return Err(Error::Parse {
            line: 0,
            msg: "no feature columns".into(),
        });
    }

    let class_values: Vec<i64> = raw_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = raw_labels
        .iter()
        .map(|v| class_values.binary_search(v).expect("collected above"))
        .collect();
    let features = Tensor::from_vec(&[raw_labels.len(), d], features)?;
    Dataset::with_class_values(features, labels, class_values, Split::Train)
}

/// Writes `label,f0,f1,…` with the original label values. Floats use the
/// shortest representation that reads back to the same value.
pub fn write_csv<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = ::csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..data.dim()).map(|j| format!("f{j}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_error(e, path))?;
    for i in 0..data.len() {
        let row: Vec<String> = std::iter::once(data.class_values[data.labels[i]].to_string())
            .chain(data.features.row(i).iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(|e| csv_error(e, path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
