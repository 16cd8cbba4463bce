//! CSV loading and writing for [`Dataset`].
//!
//! On load, the label and sensitive columns are identified by header name and
//! every remaining column becomes a feature, preserving header order. On
//! write, columns are emitted features-first, then the label, then the
//! sensitive attributes, so a write/read round trip normalizes column order
//! but preserves every value exactly (floats are printed in shortest
//! round-trip form).

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Load a dataset from a headered CSV file.
///
/// `label_column` and each of `sensitive_columns` must appear in the header;
/// all other columns are parsed as numeric features. Labels and sensitive
/// values must be exactly `0` or `1`. Errors name the offending row (1-based,
/// excluding the header) and column.
pub fn load_csv(path: &Path, label_column: &str, sensitive_columns: &[String]) -> Result<Dataset> {
    if sensitive_columns.iter().any(|s| s == label_column) {
        return Err(Error::config(format!(
            "label column `{label_column}` also listed as a sensitive column"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot open `{}`: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(format!("cannot read header of `{}`: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();

    let mut seen = std::collections::BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::data(format!("duplicate CSV header `{h}`")));
        }
    }
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("column `{name}` not found in CSV header")))
    };
    let label_idx = find(label_column)?;
    let mut sensitive_idx = BTreeMap::new();
    for name in sensitive_columns {
        sensitive_idx.insert(name.clone(), find(name)?);
    }

    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|i| *i != label_idx && !sensitive_idx.values().any(|&j| j == *i))
        .collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&i| headers[i].clone()).collect();

    let parse_binary = |field: &str, row: usize, col: &str| -> Result<u8> {
        match field.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::data(format!(
                "value `{other}` at row {row}, column `{col}` is not 0 or 1"
            ))),
        }
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut sensitive: BTreeMap<String, Vec<u8>> = sensitive_columns
        .iter()
        .map(|n| (n.clone(), Vec::new()))
        .collect();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1; // 1-based data row, header excluded
        let record =
            record.map_err(|e| Error::data(format!("malformed CSV record at row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::data(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for &c in &feature_cols {
            let field = &record[c];
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::data(format!(
                    "value `{field}` at row {row}, column `{}` is not numeric",
                    headers[c]
                ))
            })?;
            values.push(v);
        }
        labels.push(parse_binary(&record[label_idx], row, label_column)?);
        for (name, &c) in &sensitive_idx {
            let v = parse_binary(&record[c], row, name)?;
            sensitive.get_mut(name).expect("populated above").push(v);
        }
    }

    let n = labels.len();
    let m = feature_cols.len();
    if m == 0 {
        return Err(Error::data(
            "CSV has no feature columns beyond label and sensitive columns",
        ));
    }
    let features = Array2::from_shape_vec((n, m), values)
        .map_err(|e| Error::data(format!("inconsistent CSV shape: {e}")))?;
    Dataset::new(features, feature_names, labels, sensitive)
}

/// Write a dataset to CSV: feature columns in order, then `label`, then the
/// sensitive columns.
///
/// The label header is literally `label`; sensitive headers are the attribute
/// names. Floats are written in shortest round-trip form, so reading the file
/// back reproduces every value exactly.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::data(format!("cannot create `{}`: {e}", path.display())))?;
    let mut header: Vec<String> = dataset.feature_names().to_vec();
    header.push("label".to_string());
    let sensitive_names: Vec<String> = dataset
        .sensitive_columns()
        .keys()
        .map(String::clone)
        .collect();
    header.extend(sensitive_names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::data(format!("cannot write CSV header: {e}")))?;

    let features = dataset.features();
    for i in 0..dataset.n_rows() {
        let mut record: Vec<String> = (0..dataset.n_features())
            .map(|j| format!("{}", features[[i, j]]))
            .collect();
        record.push(dataset.labels()[i].to_string());
        for name in &sensitive_names {
            record.push(dataset.sensitive_columns()[name][i].to_string());
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::data(format!("cannot write CSV row {}: {e}", i + 1)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::data(format!("cannot flush CSV: {e}")))?;
    Ok(())
}
