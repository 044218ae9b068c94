use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::EnsembleModel;
use crate::error::{Error, Result};
use crate::evaluation::{classification_scores, regression_scores, spearman_rho};
use crate::features::FeatureMatrix;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    R2,
    BalancedAccuracy,
    Spearman,
}

impl Metric {
    /// Score of predictions; undefined values are NaN.
    pub fn score(self, y: &[f64], pred: &[f64]) -> Result<f64> {
        Ok(match self {
            Metric::R2 => regression_scores(y, pred)?.r2.unwrap_or(f64::NAN),
            Metric::BalancedAccuracy => classification_scores(y, pred)?.balanced_accuracy,
            Metric::Spearman => spearman_rho(y, pred)?.unwrap_or(f64::NAN),
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::R2 => "r2",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::Spearman => "spearman",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r2" => Ok(Metric::R2),
            "balanced_accuracy" | "bacc" => Ok(Metric::BalancedAccuracy),
            "spearman" | "rho" => Ok(Metric::Spearman),
            _ => Err(Error::invalid(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: String,
    /// Baseline score minus the mean score with this column shuffled.
    pub importance: f64,
    /// Standard deviation of the drop over repeats.
    pub std: f64,
}

/// Permutation importance of every column, in column order.
pub fn permutation_importance(
    model: &EnsembleModel,
    x: &FeatureMatrix,
    y: &[f64],
    metric: Metric,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<Importance>> {
    if n_repeats == 0 {
        return Err(Error::invalid("n_repeats must be positive"));
    }
    let baseline = metric.score(y, &model.predict(x)?)?;
    let mut out = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let mut drops = Vec::with_capacity(n_repeats);
        for rep in 0..n_repeats {
            let mut col = x.column(j).to_vec();
            col.shuffle(&mut rng(derive_seed(seed, (j * n_repeats + rep) as u64)));
            let shuffled = x.with_column_replaced(j, col);
            drops.push(baseline - metric.score(y, &model.predict(&shuffled)?)?);
        }
        let mean = drops.iter().sum::<f64>() / n_repeats as f64;
        let var = drops.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n_repeats as f64;
        out.push(Importance {
            feature: x.columns()[j].name.clone(),
            importance: mean,
            std: var.sqrt(),
        });
    }
    Ok(out)
}

/// Importances sorted by decreasing value (stable on ties).
pub fn ranked(mut imp: Vec<Importance>) -> Vec<Importance> {
    imp.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    imp
}
