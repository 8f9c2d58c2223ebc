use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompDataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::float::{parse_float, Float};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelColumn {
    Last,
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMapping {
    /// Distinct label values, sorted (numerically when every value is a
    /// number), become classes `0..c`.
    SortedDistinct,
    /// Labels are already `1..=classes`.
    OneBased { classes: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub header: bool,
    pub label: LabelColumn,
    pub mapping: LabelMapping,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            header: false,
            label: LabelColumn::Last,
            mapping: LabelMapping::SortedDistinct,
        }
    }
}

struct RawTable<F> {
    x: Vec<F>,
    d: usize,
    labels: Vec<String>,
}

fn read_table<F: Float>(path: &Path, schema: &CsvSchema) -> Result<RawTable<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;

    let label_idx_from_header = match &schema.label {
        LabelColumn::Name(name) => {
            if !schema.header {
                return Err(Error::Config(format!(
                    "label column `{name}` given by name but the file has no header"
                )));
            }
            let headers = reader.headers().map_err(csv_err)?;
            Some(headers.iter().position(|h| h == name).ok_or_else(|| {
                Error::Config(format!("no column named `{name}`"))
            })?)
        }
        _ => None,
    };

    let mut width = None;
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::InconsistentWidth {
                line,
                expected: w,
                got: record.len(),
            });
        }
        let label_idx = match (&schema.label, label_idx_from_header) {
            (_, Some(i)) => i,
            (LabelColumn::Last, _) => w - 1,
            (LabelColumn::Index(i), _) => *i,
            (LabelColumn::Name(_), None) => unreachable!(),
        };
        if label_idx >= w {
            return Err(Error::Config(format!(
                "label column {label_idx} out of range for {w} columns"
            )));
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                if field.is_empty() {
                    return Err(Error::Parse {
                        line,
                        msg: "missing label".into(),
                    });
                }
                labels.push(field.to_string());
            } else {
                let v = parse_float::<F>(field).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("column {}: not a number: `{field}`", j + 1),
                })?;
                x.push(v);
            }
        }
    }
    let d = width.ok_or(Error::EmptyDataset)? - 1;
    Ok(RawTable { x, d, labels })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

/// Load a labelled CSV. Returns the dataset and, for each class index, the
/// original label string.
pub fn load_csv<F: Float>(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
) -> Result<(LabeledDataset<F>, Vec<String>)> {
    let table = read_table::<F>(path.as_ref(), schema)?;
    let (y, names) = map_labels(&table.labels, &schema.mapping)?;
    let c = names.len();
    Ok((LabeledDataset::new(table.x, table.d, c, y)?, names))
}

fn map_labels(raw: &[String], mapping: &LabelMapping) -> Result<(Vec<usize>, Vec<String>)> {
    match mapping {
        LabelMapping::SortedDistinct => {
            let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse().ok()).collect();
            let names: Vec<String> = match numeric {
                Some(vals) => {
                    let mut pairs: Vec<(f64, &String)> = vals.into_iter().zip(raw).collect();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    pairs.dedup_by(|a, b| a.0 == b.0);
                    pairs.into_iter().map(|(_, s)| s.clone()).collect()
                }
                None => raw
                    .iter()
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
            };
            let y = raw
                .iter()
                .map(|s| {
                    names
                        .iter()
                        .position(|n| n == s || same_number(n, s))
                        .expect("label present")
                })
                .collect();
            Ok((y, names))
        }
        LabelMapping::OneBased { classes } => {
            let y = raw
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let v: usize = s.parse().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("label `{s}` is not a positive integer"),
                    })?;
                    if v == 0 || v > *classes {
                        return Err(Error::LabelOutOfRange {
                            label: v,
                            classes: *classes,
                        });
                    }
                    Ok(v - 1)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((y, (1..=*classes).map(|k| k.to_string()).collect()))
        }
    }
}

fn same_number(a: &str, b: &str) -> bool {
    matches!((a.parse::<f64>(), b.parse::<f64>()), (Ok(x), Ok(y)) if x == y)
}

fn write_rows<F: Float>(
    path: &Path,
    x: &[F],
    d: usize,
    labels: &[usize],
    label_name: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push(label_name.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (row, &y) in x.chunks(d).zip(labels) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        rec.push((y + 1).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Header `x1..xd,label`, features at 17 significant digits, 1-based labels.
pub fn save_csv<F: Float>(data: &LabeledDataset<F>, path: impl AsRef<Path>) -> Result<()> {
    write_rows(path.as_ref(), data.features(), data.dim(), data.labels(), "label")
}

/// Header `x1..xd,ybar`. Hidden true labels are not written.
pub fn save_comp_csv<F: Float>(data: &CompDataset<F>, path: impl AsRef<Path>) -> Result<()> {
    write_rows(
        path.as_ref(),
        data.features(),
        data.dim(),
        data.complementary_labels(),
        "ybar",
    )
}

/// Read a file written by [`save_comp_csv`].
pub fn load_comp_csv<F: Float>(path: impl AsRef<Path>, classes: usize) -> Result<CompDataset<F>> {
    let schema = CsvSchema {
        header: true,
        label: LabelColumn::Last,
        mapping: LabelMapping::OneBased { classes },
    };
    let table = read_table::<F>(path.as_ref(), &schema)?;
    let (ybar, _) = map_labels(&table.labels, &schema.mapping)?;
    CompDataset::new(table.x, table.d, classes, ybar)
}
