use std::collections::HashSet;
use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};

/// Loads a headered, comma-separated file.
///
/// Every column other than `label_column` and `group_column` is a numeric
/// feature, kept in header order. Row numbers in errors are 1-based file
/// lines, so the header is line 1 and the first record is line 2.
pub fn load_csv(path: &Path, label_column: &str, group_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = position(label_column)?;
    let group_idx = position(group_column)?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != label_idx && i != group_idx)
        .collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&i| header[i].clone()).collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row: line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row: line,
                        column: header[c].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        let raw_label = record[label_idx].trim();
        let label = match raw_label.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(Error::BadLabel {
                    row: line,
                    value: raw_label.to_string(),
                })
            }
        };
        labels.push(label);
        groups.push(record[group_idx].trim().to_string());
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::from_flat(features, feature_names.len(), labels, groups, feature_names)
}

/// Writes features, then `label`, then `group`. Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push("label");
    header.push("group");
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (i, row) in data.rows().enumerate() {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(data.label(i).to_string());
        record.push(data.group_keys()[i].clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_split_manifest(path: &Path, data: &Dataset, split: &Split) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row_index", "group_key", "split"])?;
    for (i, name) in split.assignment(data.len()).into_iter().enumerate() {
        let name = name
            .ok_or_else(|| Error::InvalidConfig(format!("row {i} is not assigned to any split")))?;
        w.write_record([i.to_string().as_str(), data.group_keys()[i].as_str(), name])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_split_manifest(path: &Path) -> Result<Split> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut split = Split::default();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let corrupt = |reason: String| Error::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        if record.len() != 3 {
            return Err(corrupt(format!("line {}: expected 3 fields", k + 2)));
        }
        let row: usize = record[0]
            .parse()
            .map_err(|_| corrupt(format!("line {}: bad row index '{}'", k + 2, &record[0])))?;
        match &record[2] {
            "train" => split.train.push(row),
            "val" => split.val.push(row),
            "test" => split.test.push(row),
            other => return Err(corrupt(format!("line {}: unknown split '{other}'", k + 2))),
        }
    }
    Ok(split)
}
