use serde::Serialize;

use super::model::MlpModel;
use crate::data::Dataset;
use crate::error::{check_len, Result};

/// F1 for `positive_class`. Zero when there are no true positives,
/// including the case where the class never occurs and is never predicted.
pub fn f1_score(preds: &[u8], labels: &[u8], positive_class: u8) -> Result<f64> {
    check_len(labels.len(), preds.len())?;
    let (tp, fp, fn_) = confusion(preds, labels, positive_class);
    Ok(f1_from_counts(tp, fp, fn_))
}

fn confusion(preds: &[u8], labels: &[u8], class: u8) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for (&p, &y) in preds.iter().zip(labels) {
        match (p == class, y == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    (tp, fp, fn_)
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: u8,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

pub fn class_report(preds: &[u8], labels: &[u8], class: u8) -> Result<ClassReport> {
    check_len(labels.len(), preds.len())?;
    let (tp, fp, fn_) = confusion(preds, labels, class);
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(ClassReport {
        class,
        f1: f1_from_counts(tp, fp, fn_),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        support: tp + fn_,
    })
}

pub fn predict_all(model: &MlpModel, data: &Dataset, threshold: f64) -> Result<Vec<u8>> {
    data.rows()
        .map(|r| model.predict_class(r, threshold))
        .collect()
}
