use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression scores. `r2` is None when the targets have zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionScores {
    pub r2: Option<f64>,
    pub mae: f64,
    pub medae: f64,
}

/// Scores for the positive class 1+ plus balanced accuracy. `precision` is
/// None with no predicted positives, `recall` with no actual positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: f64,
    pub balanced_accuracy: f64,
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::EmptyInput("no observations to score".into()));
    }
    Ok(())
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn regression_scores(y: &[f64], yhat: &[f64]) -> Result<RegressionScores> {
    same_len(y.len(), yhat.len())?;
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    let mut abs: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect();
    let mae = abs.iter().sum::<f64>() / n;
    Ok(RegressionScores {
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        mae,
        medae: median(&mut abs),
    })
}

/// Labels are compared as `value >= 0.5`, so 0/1 vectors and probabilities both work.
pub fn classification_scores(y: &[f64], yhat: &[f64]) -> Result<ClassificationScores> {
    same_len(y.len(), yhat.len())?;
    let (mut tp, mut fp, mut fneg, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&a, &b) in y.iter().zip(yhat) {
        match (a >= 0.5, b >= 0.5) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(scores_from_confusion(tp, fp, fneg, tn))
}

pub fn scores_from_confusion(tp: usize, fp: usize, fneg: usize, tn: usize) -> ClassificationScores {
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let specificity = ratio(tn, tn + fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => 2.0 * p * r / (p + r),
        _ => 0.0,
    };
    let present: Vec<f64> = [recall, specificity].into_iter().flatten().collect();
    ClassificationScores {
        precision,
        recall,
        f1,
        balanced_accuracy: present.iter().sum::<f64>() / present.len() as f64,
    }
}
