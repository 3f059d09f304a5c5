use std::collections::BTreeSet;
use std::path::Path;

use super::{Dataset, FeatureInfo, FeatureKind};
use crate::{Error, Result};

/// How to read a delimited file with a header row.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Header name or zero-based index of the label column.
    pub label_column: String,
    /// Header names or indices of categorical feature columns.
    pub categorical: Vec<String>,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            label_column: "label".into(),
            categorical: Vec::new(),
            delimiter: b',',
        }
    }
}

const MISSING: [&str; 4] = ["", "?", "NA", "NaN"];

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = resolve_column(&header, &options.label_column)?;
    let mut categorical = BTreeSet::new();
    for c in &options.categorical {
        let idx = resolve_column(&header, c)?;
        if idx == label_idx {
            return Err(Error::InvalidParam(format!("column {c:?} is the label column")));
        }
        categorical.insert(idx);
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            if MISSING.contains(&field) {
                return Err(Error::MissingValue {
                    row,
                    column: header[j].clone(),
                });
            }
            cells[j].push(field.to_owned());
        }
    }
    if cells[label_idx].is_empty() {
        return Err(Error::EmptyDataset);
    }

    let (labels, label_names) = encode_labels(&cells[label_idx])?;
    let mut columns = Vec::new();
    let mut features = Vec::new();
    for (j, col) in cells.into_iter().enumerate() {
        if j == label_idx {
            continue;
        }
        let (values, kind) = if categorical.contains(&j) {
            encode_categories(col)
        } else {
            (parse_numbers(&col, &header[j])?, FeatureKind::Numerical)
        };
        columns.push(values);
        features.push(FeatureInfo {
            name: header[j].clone(),
            kind,
            range: (0.0, 0.0),
        });
    }
    Dataset::new(columns, labels, features, label_names)
}

fn resolve_column(header: &[String], key: &str) -> Result<usize> {
    if let Some(i) = header.iter().position(|h| h == key) {
        return Ok(i);
    }
    match key.parse::<usize>() {
        Ok(i) if i < header.len() => Ok(i),
        _ => Err(Error::InvalidParam(format!("no column named {key:?}"))),
    }
}

/// `0`/`1` map to themselves; any other pair of values maps in sorted order.
pub(crate) fn encode_labels(raw: &[String]) -> Result<(Vec<u8>, [String; 2])> {
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    if distinct.len() > 2 {
        let shown: Vec<&str> = distinct.iter().take(5).copied().collect();
        return Err(Error::NonBinaryLabels(format!(
            "{} distinct label values ({})",
            distinct.len(),
            shown.join(", ")
        )));
    }
    let names: [String; 2] = if distinct.iter().all(|v| *v == "0" || *v == "1") {
        ["0".into(), "1".into()]
    } else {
        let mut it = distinct.iter();
        let first = it.next().copied().unwrap_or_default().to_owned();
        let second = it.next().map(|s| s.to_string()).unwrap_or_else(|| format!("not {first}"));
        [first, second]
    };
    let labels = raw.iter().map(|v| (*v == names[1]) as u8).collect();
    Ok((labels, names))
}

fn encode_categories(col: Vec<String>) -> (Vec<f64>, FeatureKind) {
    let categories: Vec<String> = col.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let values = col
        .iter()
        .map(|v| categories.binary_search(v).unwrap_or_default() as f64)
        .collect();
    (values, FeatureKind::Categorical { categories })
}

fn parse_numbers(col: &[String], name: &str) -> Result<Vec<f64>> {
    col.iter()
        .enumerate()
        .map(|(row, v)| {
            v.parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {row}, column {name:?}: {v:?} is not a number")))
        })
        .collect()
}
