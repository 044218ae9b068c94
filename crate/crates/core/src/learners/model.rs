use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hist::{grow_hist_tree, Binner, GrowConfig, MAX_BINS};
use super::tree::{grow_extra_tree, ExtraConfig, Tree};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::{derive_seed, rng};

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Floor added to the mean count before taking the initial log-rate.
pub const POISSON_EPS: f64 = 1e-9;
const MIN_HESSIAN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    ExtraTrees,
    HistGb,
    #[serde(rename = "ngboost")]
    NgBoost,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::ExtraTrees => "extra-trees",
            Family::HistGb => "hist-gb",
            Family::NgBoost => "ngboost",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "extra-trees" | "et" | "extrat" => Ok(Family::ExtraTrees),
            "hist-gb" | "hgb" | "hgboost" => Ok(Family::HistGb),
            "ngboost" | "ngb" => Ok(Family::NgBoost),
            _ => Err(Error::invalid(format!("unknown learner family `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    ExtraTreesRegressor,
    ExtraTreesClassifier,
    HistGbRegressor,
    HistGbClassifier,
    NgBoostPoisson,
}

impl ModelKind {
    pub fn of(family: Family, task: Task) -> Result<Self> {
        match (family, task) {
            (Family::ExtraTrees, Task::Regression) => Ok(ModelKind::ExtraTreesRegressor),
            (Family::ExtraTrees, Task::Classification) => Ok(ModelKind::ExtraTreesClassifier),
            (Family::HistGb, Task::Regression) => Ok(ModelKind::HistGbRegressor),
            (Family::HistGb, Task::Classification) => Ok(ModelKind::HistGbClassifier),
            (Family::NgBoost, Task::Regression) => Ok(ModelKind::NgBoostPoisson),
            (Family::NgBoost, Task::Classification) => {
                Err(Error::invalid("NGBoost is fitted to counts, not class labels"))
            }
        }
    }

    pub fn is_classifier(self) -> bool {
        matches!(self, ModelKind::ExtraTreesClassifier | ModelKind::HistGbClassifier)
    }
}

/// Hyperparameters of all three families; each family reads its subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Trees (bagging) or boosting stages.
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// None grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    /// Candidate features per split; None = sqrt(F) (classification) or F/3.
    pub max_features: Option<usize>,
    pub max_bins: usize,
    /// Balanced class weights `n / (2 n_c)` for classifiers.
    pub class_weight: bool,
}

impl HyperParams {
    pub fn defaults(family: Family) -> Self {
        match family {
            Family::ExtraTrees => Self {
                n_estimators: 200,
                learning_rate: 1.0,
                min_samples_leaf: 2,
                max_depth: None,
                max_features: None,
                max_bins: MAX_BINS,
                class_weight: true,
            },
            Family::HistGb => Self {
                n_estimators: 200,
                learning_rate: 0.1,
                min_samples_leaf: 20,
                max_depth: None,
                max_features: None,
                max_bins: MAX_BINS,
                class_weight: true,
            },
            Family::NgBoost => Self {
                n_estimators: 500,
                learning_rate: 0.02,
                min_samples_leaf: 1,
                max_depth: Some(3),
                max_features: None,
                max_bins: MAX_BINS,
                class_weight: false,
            },
        }
    }

    fn validate(&self, family: Family) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::invalid("n_estimators must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be positive"));
        }
        if family != Family::ExtraTrees && !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!("learning rate {} outside [0, 1]", self.learning_rate)));
        }
        if self.max_features == Some(0) {
            return Err(Error::invalid("max_features must be positive"));
        }
        Ok(())
    }
}

/// A fitted ensemble with its feature registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub params: HyperParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub registry_hash: String,
    /// Initial raw prediction (boosting); 0 for bagging.
    pub init: f64,
    pub trees: Vec<Tree>,
    /// Per-stage multiplier of each boosting tree; empty for bagging.
    pub stage_scales: Vec<f64>,
    /// `(w_0, w_1)` for classifiers fitted with class weights.
    pub class_weights: Option<[f64; 2]>,
    /// Training loss before the first and after every stage (boosting).
    pub train_loss: Vec<f64>,
}

fn check_xy(x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if x.n_cols() == 0 {
        return Err(Error::EmptyInput("no feature columns".into()));
    }
    if y.len() != x.n_rows() {
        return Err(Error::invalid(format!("{} targets for {} rows", y.len(), x.n_rows())));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite target {v}")));
    }
    Ok(())
}

fn check_binary(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("classification targets must be 0 or 1"));
    }
    Ok(())
}

/// Balanced weights `n / (2 n_c)`; a missing class gets weight 0.
pub fn balanced_class_weights(y: &[f64]) -> [f64; 2] {
    let n1 = y.iter().filter(|&&v| v == 1.0).count() as f64;
    let n0 = y.len() as f64 - n1;
    let n = y.len() as f64;
    let w = |c: f64| if c > 0.0 { n / (2.0 * c) } else { 0.0 };
    [w(n0), w(n1)]
}

fn sample_weights(y: &[f64], cw: Option<[f64; 2]>) -> Vec<f64> {
    match cw {
        Some(cw) => y.iter().map(|&v| cw[v as usize]).collect(),
        None => vec![1.0; y.len()],
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Natural gradient of the Poisson negative log-likelihood in `theta = ln mu`:
/// the ordinary gradient `mu - y` divided by the Fisher information `mu`.
pub fn poisson_natural_gradient(y: f64, mu: f64) -> f64 {
    (mu - y) / mu
}

/// Mean Poisson negative log-likelihood without the `ln y!` term.
fn poisson_nll(y: &[f64], theta: &[f64]) -> f64 {
    y.iter().zip(theta).map(|(&y, &t)| t.exp() - y * t).sum::<f64>() / y.len() as f64
}

fn logistic_loss(y: &[f64], w: &[f64], raw: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        // log(1 + e^z) - y z, stable for both signs
        let z = raw[i];
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        total += w[i] * (softplus - y[i] * z);
    }
    total / w.iter().sum::<f64>()
}

fn squared_loss(y: &[f64], raw: &[f64]) -> f64 {
    y.iter().zip(raw).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * y.len() as f64)
}

fn column_refs(x: &FeatureMatrix) -> Vec<&[f64]> {
    x.values().iter().map(Vec::as_slice).collect()
}

/// Fits one model of `family` for `task` on `x`, `y`.
pub fn fit(family: Family, task: Task, x: &FeatureMatrix, y: &[f64], params: &HyperParams, seed: u64) -> Result<EnsembleModel> {
    let kind = ModelKind::of(family, task)?;
    params.validate(family)?;
    check_xy(x, y)?;
    if task == Task::Classification {
        check_binary(y)?;
    }
    if family == Family::ExtraTrees && y.len() < 2 * params.min_samples_leaf {
        return Err(Error::invalid(format!(
            "{} rows cannot fill two leaves of {}",
            y.len(),
            params.min_samples_leaf
        )));
    }
    if y.iter().all(|&v| v == y[0]) {
        log::warn!("degenerate target (all rows equal {}); the model will be constant", y[0]);
    }
    let mut model = EnsembleModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        params: params.clone(),
        seed,
        feature_names: x.names().iter().map(|s| s.to_string()).collect(),
        registry_hash: x.registry_hash(),
        init: 0.0,
        trees: Vec::new(),
        stage_scales: Vec::new(),
        class_weights: None,
        train_loss: Vec::new(),
    };
    match family {
        Family::ExtraTrees => fit_extra_trees(&mut model, x, y, task),
        Family::HistGb => fit_hist_gb(&mut model, x, y, task),
        Family::NgBoost => fit_ngboost(&mut model, x, y)?,
    }
    Ok(model)
}

pub fn fit_extra_trees(model: &mut EnsembleModel, x: &FeatureMatrix, y: &[f64], task: Task) {
    let classification = task == Task::Classification;
    let p = &model.params;
    let f = x.n_cols();
    let auto = if classification {
        ((f as f64).sqrt() as usize).max(1)
    } else {
        (f / 3).max(1)
    };
    let cfg = ExtraConfig {
        min_samples_leaf: p.min_samples_leaf,
        max_features: p.max_features.unwrap_or(auto).min(f),
        max_depth: p.max_depth,
        classification,
    };
    let cw = (classification && p.class_weight).then(|| balanced_class_weights(y));
    let w = sample_weights(y, cw);
    let cols = column_refs(x);
    let seed = model.seed;
    model.trees = (0..p.n_estimators as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = rng(derive_seed(seed, t));
            grow_extra_tree(&cols, y, &w, (0..y.len()).collect(), &cfg, &mut r)
        })
        .collect();
    model.class_weights = cw;
}

pub fn fit_hist_gb(model: &mut EnsembleModel, x: &FeatureMatrix, y: &[f64], task: Task) {
    let classification = task == Task::Classification;
    let p = model.params.clone();
    let n = y.len();
    let cols = column_refs(x);
    let rows: Vec<usize> = (0..n).collect();
    let binner = Binner::fit(&cols, &rows, p.max_bins);
    let binned = binner.transform(&cols, n);
    let cw = (classification && p.class_weight).then(|| balanced_class_weights(y));
    let w = sample_weights(y, cw);
    let init = if classification {
        let pos: f64 = (0..n).map(|i| w[i] * y[i]).sum();
        let neg: f64 = (0..n).map(|i| w[i] * (1.0 - y[i])).sum();
        if pos > 0.0 && neg > 0.0 {
            (pos / neg).ln()
        } else {
            0.0
        }
    } else {
        y.iter().sum::<f64>() / n as f64
    };
    let loss = |raw: &[f64]| {
        if classification {
            logistic_loss(y, &w, raw)
        } else {
            squared_loss(y, raw)
        }
    };
    let cfg = GrowConfig {
        min_samples_leaf: p.min_samples_leaf,
        max_depth: p.max_depth,
        min_hessian: if classification { MIN_HESSIAN } else { 0.0 },
    };
    let newton = |g: f64, h: f64| if h > 0.0 { -g / h } else { 0.0 };
    let mut raw = vec![init; n];
    let mut current = loss(&raw);
    model.train_loss.push(current);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..p.n_estimators {
        for i in 0..n {
            if classification {
                let pr = sigmoid(raw[i]);
                g[i] = w[i] * (pr - y[i]);
                h[i] = w[i] * pr * (1.0 - pr);
            } else {
                g[i] = raw[i] - y[i];
                h[i] = 1.0;
            }
        }
        let tree = grow_hist_tree(&binned, &binner, &g, &h, rows.clone(), &cfg, &newton);
        let step: Vec<f64> = (0..n).map(|i| tree.predict(|f| cols[f][i])).collect();
        // Newton steps on the logistic loss can overshoot; halve until the
        // training loss does not increase (never fires for squared loss).
        let mut scale = p.learning_rate;
        let mut next: Vec<f64>;
        let mut attempts = 0;
        loop {
            next = raw.iter().zip(&step).map(|(r, s)| r + scale * s).collect();
            let l = loss(&next);
            if l <= current || attempts >= 40 {
                if l > current {
                    scale = 0.0;
                    next = raw.clone();
                } else {
                    current = l;
                }
                break;
            }
            scale /= 2.0;
            attempts += 1;
        }
        raw = next;
        model.train_loss.push(current);
        model.trees.push(tree);
        model.stage_scales.push(scale);
    }
    model.init = init;
    model.class_weights = cw;
}

/// NGBoost with a Poisson output on `theta = ln mu`. Each stage fits a tree
/// to the natural gradients `(mu - y) / mu` under Fisher weights `mu`, so a
/// leaf holds `sum(mu - y) / sum(mu)`. Where that step would overshoot the
/// leaf's exact minimizer `ln(Y / M)` the minimizer is used instead, which
/// keeps the training loss monotone without a line search.
pub fn fit_ngboost(model: &mut EnsembleModel, x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|&&v| v < 0.0 || v.fract() != 0.0) {
        return Err(Error::invalid(format!("Poisson targets must be non-negative integers, got {v}")));
    }
    let p = model.params.clone();
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    model.init = (mean + POISSON_EPS).ln();
    let mut theta = vec![model.init; n];
    model.train_loss.push(poisson_nll(y, &theta));
    if mean == 0.0 {
        log::warn!("all Poisson targets are zero; returning the floored constant model");
        return Ok(());
    }
    let cols = column_refs(x);
    let rows: Vec<usize> = (0..n).collect();
    let binner = Binner::fit(&cols, &rows, p.max_bins);
    let binned = binner.transform(&cols, n);
    let cfg = GrowConfig {
        min_samples_leaf: p.min_samples_leaf,
        max_depth: p.max_depth,
        min_hessian: 0.0,
    };
    // leaf value in natural-gradient units: theta moves by -scale * value
    let leaf = |g: f64, h: f64| {
        if h <= 0.0 {
            return 0.0;
        }
        let (m, yy) = (h, h - g);
        if yy > m {
            -(yy / m).ln()
        } else {
            g / h
        }
    };
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..p.n_estimators {
        for i in 0..n {
            let mu = theta[i].exp();
            // Fisher-weighted natural gradient: weight mu times (mu - y)/mu
            h[i] = mu;
            g[i] = mu * poisson_natural_gradient(y[i], mu);
        }
        let tree = grow_hist_tree(&binned, &binner, &g, &h, rows.clone(), &cfg, &leaf);
        for (i, t) in theta.iter_mut().enumerate() {
            *t -= p.learning_rate * tree.predict(|f| cols[f][i]);
        }
        model.train_loss.push(poisson_nll(y, &theta));
        model.trees.push(tree);
        model.stage_scales.push(-p.learning_rate);
    }
    Ok(())
}

impl EnsembleModel {
    fn check_schema(&self, x: &FeatureMatrix) -> Result<()> {
        if x.registry_hash() != self.registry_hash {
            return Err(Error::Schema(format!(
                "feature registry {} does not match the model's {}",
                x.registry_hash(),
                self.registry_hash
            )));
        }
        Ok(())
    }

    fn raw(&self, cols: &[&[f64]], r: usize) -> f64 {
        match self.kind {
            ModelKind::ExtraTreesRegressor | ModelKind::ExtraTreesClassifier => {
                self.trees.iter().map(|t| t.predict(|f| cols[f][r])).sum::<f64>() / self.trees.len() as f64
            }
            _ => {
                self.init
                    + self
                        .trees
                        .iter()
                        .zip(&self.stage_scales)
                        .map(|(t, s)| s * t.predict(|f| cols[f][r]))
                        .sum::<f64>()
            }
        }
    }

    /// Regression value, class-1 probability, or Poisson mean per row.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema(x)?;
        let cols = column_refs(x);
        Ok((0..x.n_rows())
            .map(|r| {
                let raw = self.raw(&cols, r);
                match self.kind {
                    ModelKind::HistGbClassifier => sigmoid(raw),
                    ModelKind::NgBoostPoisson => raw.exp(),
                    _ => raw,
                }
            })
            .collect())
    }

    /// `[P(class 0), P(class 1+)]` per row (classifiers only).
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<[f64; 2]>> {
        if !self.kind.is_classifier() {
            return Err(Error::invalid("class probabilities from a non-classifier"));
        }
        Ok(self.predict(x)?.into_iter().map(|p| [1.0 - p, p]).collect())
    }

    /// Argmax class labels (ties go to class 1+).
    pub fn predict_label(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        Ok(self.predict_proba(x)?.iter().map(|p| u8::from(p[1] >= p[0])).collect())
    }

    /// `1 - exp(-mu)` for Poisson models.
    pub fn change_probability(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if self.kind != ModelKind::NgBoostPoisson {
            return Err(Error::invalid("change probability needs a Poisson model"));
        }
        Ok(self.predict(x)?.into_iter().map(|mu| 1.0 - (-mu).exp()).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::parse("model", e))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "model format version {} (this build reads {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json().as_bytes())
            .map_err(|e| Error::io("<model>", e))
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s).map_err(|e| Error::io("<model>", e))?;
        Self::from_json(&s)
    }
}
