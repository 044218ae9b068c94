use serde::{Deserialize, Serialize};

use super::model::{fit, Family, HyperParams, Task};
use crate::error::{Error, Result};
use crate::evaluation::{classification_scores, regression_scores};
use crate::features::FeatureMatrix;

/// Cartesian grid over the tuned hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_estimators: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub min_samples_leaf: Vec<usize>,
}

impl Grid {
    /// The tuning ranges used for each family: trees/stages 200..500,
    /// boosting rates 0.02..0.1, leaf sizes 2..25 (bagging) or 10..25.
    pub fn standard(family: Family) -> Self {
        match family {
            Family::ExtraTrees => Self {
                n_estimators: vec![200, 500],
                learning_rate: vec![1.0],
                min_samples_leaf: vec![2, 5, 10, 25],
            },
            Family::HistGb => Self {
                n_estimators: vec![200, 500],
                learning_rate: vec![0.02, 0.04, 0.1],
                min_samples_leaf: vec![10, 25],
            },
            Family::NgBoost => Self {
                n_estimators: vec![500],
                learning_rate: vec![0.02],
                min_samples_leaf: vec![1],
            },
        }
    }

    pub fn single(p: &HyperParams) -> Self {
        Self {
            n_estimators: vec![p.n_estimators],
            learning_rate: vec![p.learning_rate],
            min_samples_leaf: vec![p.min_samples_leaf],
        }
    }

    pub fn points(&self, base: &HyperParams) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &n in &self.n_estimators {
            for &lr in &self.learning_rate {
                for &msl in &self.min_samples_leaf {
                    out.push(HyperParams {
                        n_estimators: n,
                        learning_rate: lr,
                        min_samples_leaf: msl,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }

    fn warn_outside_ranges(&self, family: Family) {
        let msl_range = if family == Family::ExtraTrees { 2..=25 } else { 10..=25 };
        if self.n_estimators.iter().any(|n| !(200..=500).contains(n))
            || (family == Family::HistGb && self.learning_rate.iter().any(|l| !(0.02..=0.1).contains(l)))
            || (family != Family::NgBoost && self.min_samples_leaf.iter().any(|m| !msl_range.contains(m)))
        {
            log::warn!("tuning grid for {family} leaves the standard ranges");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: HyperParams,
    /// Development score of every grid point, in grid order.
    pub scores: Vec<(HyperParams, f64)>,
}

/// Development score: balanced accuracy for classifiers, R^2 otherwise
/// (undefined R^2 scores as negative infinity).
pub fn dev_score(task: Task, y: &[f64], pred: &[f64]) -> Result<f64> {
    Ok(match task {
        Task::Classification => classification_scores(y, pred)?.balanced_accuracy,
        Task::Regression => regression_scores(y, pred)?.r2.unwrap_or(f64::NEG_INFINITY),
    })
}

/// Grid search on a development split. Equal scores prefer fewer
/// estimators, then larger leaves, then the earlier grid point.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    family: Family,
    task: Task,
    grid: &Grid,
    base: &HyperParams,
    x_train: &FeatureMatrix,
    y_train: &[f64],
    x_dev: &FeatureMatrix,
    y_dev: &[f64],
    seed: u64,
) -> Result<TuneResult> {
    let points = grid.points(base);
    if points.is_empty() {
        return Err(Error::invalid("empty tuning grid"));
    }
    grid.warn_outside_ranges(family);
    let mut scores = Vec::with_capacity(points.len());
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in points.iter().enumerate() {
        let s = if points.len() == 1 {
            f64::NAN
        } else {
            let m = fit(family, task, x_train, y_train, p, seed)?;
            dev_score(task, y_dev, &m.predict(x_dev)?)?
        };
        let better = match best {
            None => true,
            Some((bs, bi)) => {
                let b = &points[bi];
                s > bs
                    || (s == bs
                        && (p.n_estimators < b.n_estimators
                            || (p.n_estimators == b.n_estimators && p.min_samples_leaf > b.min_samples_leaf)))
            }
        };
        if better {
            best = Some((s, i));
        }
        scores.push((p.clone(), s));
    }
    let (_, bi) = best.expect("non-empty grid");
    Ok(TuneResult {
        best: points[bi].clone(),
        scores,
    })
}
