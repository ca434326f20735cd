//! CSV ingestion and JSON/CSV persistence.
//!
//! Dataset files hold one sample per row, comma separated. A header row is
//! detected when any cell of the first row fails to parse as a number.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::LabelVector;
use crate::error::{DscofsError, Result};
use crate::model::{DataMatrix, Mat};

pub const DEFAULT_LABEL_COLUMN: &str = "label";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How to read a dataset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFile {
    pub path: PathBuf,
    /// Name of the label column; `None` reads every column as a feature.
    pub label_column: Option<String>,
    /// Fail when the label column is missing instead of reading features only.
    pub require_labels: bool,
}

impl DatasetFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DatasetFile {
            path: path.into(),
            label_column: Some(DEFAULT_LABEL_COLUMN.to_string()),
            require_labels: false,
        }
    }

    pub fn require_labels(mut self) -> Self {
        self.require_labels = true;
        self
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> DscofsError {
    let context = context.into();
    move |source| DscofsError::Io { context, source }
}

/// Parses CSV text; see [`load_csv`].
pub fn parse_csv(text: &str, file: &DatasetFile) -> Result<(DataMatrix, Option<LabelVector>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(crate::stats::csv_error)?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(DscofsError::invalid("empty dataset file"));
    }
    let has_header = rows[0].iter().any(|c| c.parse::<f64>().is_err());
    let width = rows[0].len();
    let (header, body, first_line) = if has_header {
        (Some(rows[0].clone()), &rows[1..], 2)
    } else {
        (None, &rows[..], 1)
    };

    let label_idx = match (&file.label_column, &header) {
        (Some(name), Some(h)) => h.iter().position(|c| c == name),
        _ => None,
    };
    if file.require_labels && label_idx.is_none() {
        return Err(DscofsError::Parse {
            line: 1,
            col: 0,
            msg: format!(
                "label column {:?} not found",
                file.label_column.as_deref().unwrap_or(DEFAULT_LABEL_COLUMN)
            ),
        });
    }

    let d = width - usize::from(label_idx.is_some());
    let n = body.len();
    let mut values = Mat::zeros(d, n);
    let mut raw_labels = Vec::with_capacity(n);
    for (j, rec) in body.iter().enumerate() {
        let line = first_line + j;
        if rec.len() != width {
            return Err(DscofsError::Parse {
                line,
                col: rec.len(),
                msg: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        let mut feature = 0;
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| DscofsError::Parse {
                line,
                col: c + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(DscofsError::Parse {
                    line,
                    col: c + 1,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            values[(feature, j)] = v;
            feature += 1;
        }
    }
    let labels = label_idx.map(|_| LabelVector::encode(&raw_labels));
    Ok((DataMatrix::new(values)?, labels))
}

/// Reads a samples-as-rows CSV into a `d × n` matrix (not centered) and optional labels.
pub fn load_csv(file: &DatasetFile) -> Result<(DataMatrix, Option<LabelVector>)> {
    let text = fs::read_to_string(&file.path)
        .map_err(io_err(format!("reading {}", file.path.display())))?;
    parse_csv(&text, file)
}

/// Renders a `d × n` matrix as samples-as-rows CSV with a header row.
pub fn csv_string(data: &Mat, labels: Option<&LabelVector>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..data.nrows()).map(|i| format!("f{}", i + 1)).collect();
    out.push_str(&header.join(","));
    if labels.is_some() {
        out.push(',');
        out.push_str(DEFAULT_LABEL_COLUMN);
    }
    out.push('\n');
    for j in 0..data.ncols() {
        let row: Vec<String> = data.column(j).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        if let Some(l) = labels {
            out.push(',');
            out.push_str(&l.as_slice()[j].to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(format!("creating {}", tmp.display())))?;
        f.write_all(contents)
            .map_err(io_err(format!("writing {}", tmp.display())))?;
    }
    fs::rename(&tmp, path).map_err(io_err(format!("renaming to {}", path.display())))
}

pub fn save_csv(data: &Mat, labels: Option<&LabelVector>, path: &Path) -> Result<()> {
    write_atomic(path, csv_string(data, labels).as_bytes())
}

/// Wrapper written around every JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub body: T,
}

impl<T> Report<T> {
    pub fn new(kind: impl Into<String>, seed: u64, body: T) -> Self {
        Report {
            tool: "dscofs".into(),
            version: VERSION.into(),
            kind: kind.into(),
            seed,
            body,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Serializes `report` as pretty JSON (field order fixed by the type).
pub fn save_report<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    write_atomic(path, to_json(report)?.as_bytes())
}

pub fn load_report<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_labeled_file() {
        let text = "a,b,label\n1,2,x\n3,4,y\n5,6,x\n";
        let (data, labels) = parse_csv(text, &DatasetFile::new("t.csv")).unwrap();
        assert_eq!(data.values(), &Mat::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]));
        assert_eq!(labels.unwrap().as_slice(), &[0, 1, 0]);
    }

    #[test]
    fn headerless_without_labels() {
        let (data, labels) = parse_csv("1,2\n3,4\n", &DatasetFile::new("t.csv")).unwrap();
        assert_eq!(data.d(), 2);
        assert_eq!(data.n(), 2);
        assert!(labels.is_none());
    }

    #[test]
    fn errors_carry_location() {
        match parse_csv("a,b\n1,2\n3\n", &DatasetFile::new("t")) {
            Err(DscofsError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_csv("a,b\n1,2\n3,zz\n", &DatasetFile::new("t")) {
            Err(DscofsError::Parse { line, col, .. }) => assert_eq!((line, col), (3, 2)),
            other => panic!("{other:?}"),
        }
        assert!(parse_csv("a,b\n1,2\n3,4\n", &DatasetFile::new("t").require_labels()).is_err());
    }
}
