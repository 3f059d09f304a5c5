use super::csv_file::encode_labels;
use super::{Dataset, FeatureInfo, FeatureKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ArffOptions {
    /// Target attribute; the last attribute when `None`.
    pub target: Option<String>,
    /// Skip rows with missing values instead of failing.
    pub drop_missing: bool,
    /// Target value mapped to 1, all others to 0. Needed for multi-class targets.
    pub positive: Option<String>,
}

#[derive(Debug)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

/// Parses a dense ARFF document. Nominal attributes other than the target
/// become categorical features; string and date attributes are rejected.
pub fn parse_arff(text: &str, options: &ArffOptions) -> Result<Dataset> {
    let mut attrs: Vec<(String, AttrType)> = Vec::new();
    let mut lines = text.lines().enumerate();
    for (n, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        }
        if lower.starts_with("@data") {
            break;
        }
        if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(line[10..].trim(), n + 1)?);
            continue;
        }
        return Err(Error::Parse(format!("line {}: unexpected header line {line:?}", n + 1)));
    }
    if attrs.is_empty() {
        return Err(Error::Parse("no attributes declared".into()));
    }
    let target = match &options.target {
        Some(name) => attrs
            .iter()
            .position(|(a, _)| a == name)
            .ok_or_else(|| Error::Parse(format!("target attribute {name:?} not declared")))?,
        None => attrs.len() - 1,
    };

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); attrs.len()];
    let mut raw_labels = Vec::new();
    let mut row = 0;
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if line.starts_with('{') {
            return Err(Error::Parse(format!("line {}: sparse ARFF rows are not supported", n + 1)));
        }
        let fields = split_fields(line);
        if fields.len() != attrs.len() {
            return Err(Error::Parse(format!(
                "line {}: {} values, {} attributes",
                n + 1,
                fields.len(),
                attrs.len()
            )));
        }
        if let Some(j) = fields.iter().position(|f| f == "?") {
            if options.drop_missing {
                continue;
            }
            return Err(Error::MissingValue {
                row,
                column: attrs[j].0.clone(),
            });
        }
        for (j, (field, (name, kind))) in fields.iter().zip(&attrs).enumerate() {
            if j == target {
                raw_labels.push(field.clone());
                continue;
            }
            let v = match kind {
                AttrType::Numeric => field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: {field:?} is not a number ({name})", n + 1)))?,
                AttrType::Nominal(values) => values
                    .iter()
                    .position(|v| v == field)
                    .ok_or_else(|| Error::Parse(format!("line {}: {field:?} is not a value of {name}", n + 1)))?
                    as f64,
            };
            columns[j].push(v);
        }
        row += 1;
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (labels, label_names) = match &options.positive {
        Some(p) => (
            raw_labels.iter().map(|v| (v == p) as u8).collect(),
            [format!("not {p}"), p.clone()],
        ),
        None => encode_labels(&raw_labels)?,
    };
    let mut features = Vec::new();
    let mut kept = Vec::new();
    for (j, ((name, kind), col)) in attrs.into_iter().zip(columns).enumerate() {
        if j == target {
            continue;
        }
        let kind = match kind {
            AttrType::Numeric => FeatureKind::Numerical,
            AttrType::Nominal(categories) => FeatureKind::Categorical { categories },
        };
        features.push(FeatureInfo {
            name,
            kind,
            range: (0.0, 0.0),
        });
        kept.push(col);
    }
    Dataset::new(kept, labels, features, label_names)
}

fn parse_attribute(rest: &str, line: usize) -> Result<(String, AttrType)> {
    let (name, spec) = if let Some(quoted) = rest.strip_prefix('\'') {
        let end = quoted
            .find('\'')
            .ok_or_else(|| Error::Parse(format!("line {line}: unterminated attribute name")))?;
        (quoted[..end].to_owned(), quoted[end + 1..].trim())
    } else {
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        (rest[..end].to_owned(), rest[end..].trim())
    };
    if let Some(inner) = spec.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| Error::Parse(format!("line {line}: unterminated nominal list")))?;
        let values = split_fields(inner);
        return Ok((name, AttrType::Nominal(values)));
    }
    match spec.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok((name, AttrType::Numeric)),
        other => Err(Error::Parse(format!("line {line}: unsupported attribute type {other:?} for {name}"))),
    }
}

/// Splits on commas, honouring single and double quotes.
fn split_fields(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for ch in line.chars() {
        match (quote, ch) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), c) => cur.push(c),
            (None, '\'' | '"') => quote = Some(ch),
            (None, ',') => out.push(std::mem::take(&mut cur).trim().to_owned()),
            (None, c) => cur.push(c),
        }
    }
    out.push(cur.trim().to_owned());
    out
}
