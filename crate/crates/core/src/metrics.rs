//! ROC/AUC, single-threshold confusion metrics and cross-validated AUC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::models::{Classifier, ModelError};
use crate::split::FoldPlan;
use crate::stats::{mean, sample_sd};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<MetricsError>,
    },
    #[error("fold {fold}: {source}")]
    FoldModel {
        fold: usize,
        #[source]
        source: ModelError,
    },
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore { index });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    Ok((pos, neg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Distinct scores, descending. Point `i + 1` of the curve classifies
    /// `score >= thresholds[i]` as positive; point 0 is the origin.
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve, MetricsError> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut thresholds = Vec::new();
    let (mut fpr, mut tpr) = (vec![0.0], vec![0.0]);
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in count units, exact in f64 for any realistic n.
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        thresholds.push(s);
        fpr.push(fp as f64 / neg as f64);
        tpr.push(tp as f64 / pos as f64);
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocCurve { thresholds, fpr, tpr, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionReport, MetricsError> {
    check_inputs(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let sensitivity = ratio(tp, tp + fn_);
    let f1 = if precision + sensitivity == 0.0 {
        0.0
    } else {
        2.0 * precision * sensitivity / (precision + sensitivity)
    };
    Ok(ConfusionReport {
        threshold,
        tp,
        fp,
        tn,
        fn_,
        accuracy: ratio(tp + tn, scores.len()),
        sensitivity,
        specificity: ratio(tn, tn + fp),
        precision,
        f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub fold_auc: Vec<f64>,
    pub mean_auc: f64,
    /// Sample standard deviation across folds; zero with a single fold.
    pub sd_auc: f64,
}

/// Fit on every fold's complement, score the fold, and summarise the AUCs.
pub fn cv_evaluate<M, F>(mut fit: F, x: &Matrix, y: &[bool], plan: &FoldPlan) -> Result<CvSummary, MetricsError>
where
    M: Classifier,
    F: FnMut(&Matrix, &[bool]) -> Result<M, ModelError>,
{
    if x.rows() != y.len() {
        return Err(MetricsError::LengthMismatch { scores: x.rows(), labels: y.len() });
    }
    let mut fold_auc = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let train = plan.train_rows(fold);
        let held = plan.fold_rows(fold);
        let ty: Vec<bool> = train.iter().map(|&r| y[r]).collect();
        let hy: Vec<bool> = held.iter().map(|&r| y[r]).collect();
        let model = fit(&x.select_rows(&train), &ty).map_err(|source| MetricsError::FoldModel { fold, source })?;
        let scores = model
            .predict_proba(&x.select_rows(&held))
            .map_err(|source| MetricsError::FoldModel { fold, source })?;
        let roc = roc_auc(&scores, &hy).map_err(|e| MetricsError::Fold { fold, source: Box::new(e) })?;
        fold_auc.push(roc.auc);
    }
    let mean_auc = mean(&fold_auc).unwrap_or(f64::NAN);
    let sd_auc = sample_sd(&fold_auc).unwrap_or(0.0);
    Ok(CvSummary { fold_auc, mean_auc, sd_auc })
}

/// One row of the per-model metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub subset: String,
    pub auc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub threshold: f64,
}

impl MetricsRow {
    pub fn evaluate(model: &str, subset: &str, scores: &[f64], labels: &[bool], threshold: f64) -> Result<Self, MetricsError> {
        let roc = roc_auc(scores, labels)?;
        let c = confusion_at(scores, labels, threshold)?;
        Ok(Self {
            model: model.to_string(),
            subset: subset.to_string(),
            auc: roc.auc,
            accuracy: c.accuracy,
            sensitivity: c.sensitivity,
            specificity: c.specificity,
            f1: c.f1,
            threshold,
        })
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("model,subset,auc,accuracy,sensitivity,specificity,f1,threshold\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            r.model, r.subset, r.auc, r.accuracy, r.sensitivity, r.specificity, r.f1, r.threshold
        ));
    }
    out
}
