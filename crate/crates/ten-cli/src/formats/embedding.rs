//! Pre-trained embedding file: one token per line followed by its vector,
//! whitespace-separated. Blank lines and lines starting with `#` are
//! skipped. All rows must have the same width; whether that width matches
//! the model is checked when training starts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::CliError;

pub fn read_embeddings(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = BTreeMap::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-blank line has a first field");
        let mut values = Vec::new();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                CliError::data(path, format!("line {line_no}: {field:?} is not a number"))
            })?;
            if !v.is_finite() {
                return Err(CliError::data(
                    path,
                    format!("line {line_no}: embedding for {token:?} has a non-finite value"),
                ));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(CliError::data(
                path,
                format!("line {line_no}: token {token:?} has no vector"),
            ));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(CliError::data(
                    path,
                    format!(
                        "line {line_no}: row has {} value(s), earlier rows have {w}",
                        values.len()
                    ),
                ));
            }
            Some(_) => {}
        }
        if rows.insert(token.to_string(), values).is_some() {
            return Err(CliError::data(
                path,
                format!("line {line_no}: token {token:?} appears twice"),
            ));
        }
    }
    if rows.is_empty() {
        return Err(CliError::data(path, "no embedding rows found"));
    }
    Ok(rows)
}
