use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{content_hash, FeatureOptions, ModelSetup};
use crate::error::{Error, Result};
use crate::evaluation::{Method, DEFAULT_REALIZATIONS};
use crate::features::TargetKind;
use crate::learners::{Family, Grid, HyperParams};
use crate::related::DEFAULT_K;
use crate::snapshot::LinkScope;
use crate::synthetic::GeneratorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputSource {
    /// A directory of `crawl_NN.jsonl` files.
    Directory { path: PathBuf },
    Generator { generator: GeneratorConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridChoice {
    /// Only the configured (or default) hyperparameters.
    Single,
    /// The family's standard tuning grid.
    Standard,
    Custom(Grid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub target: TargetKind,
    pub scope: LinkScope,
    pub lbla: bool,
    pub grid: GridChoice,
    pub params: Option<HyperParams>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: Family::ExtraTrees,
            target: TargetKind::Nnl,
            scope: LinkScope::Internal,
            lbla: false,
            grid: GridChoice::Single,
            params: None,
        }
    }
}

impl ModelConfig {
    pub fn setup(&self, features: FeatureOptions) -> Result<ModelSetup> {
        if self.family == Family::NgBoost && self.target != TargetKind::Nnl {
            return Err(Error::invalid("NGBoost models the new-link count (target nnl)"));
        }
        let params = self.params.clone().unwrap_or_else(|| HyperParams::defaults(self.family));
        let grid = match &self.grid {
            GridChoice::Single => Grid::single(&params),
            GridChoice::Standard => Grid::standard(self.family),
            GridChoice::Custom(g) => g.clone(),
        };
        Ok(ModelSetup {
            lbla: self.lbla,
            ..ModelSetup::new(self.family, self.target, self.scope, features)
        }
        .with_params(params, grid))
    }

    /// Ranking method tag of this model, if it has one.
    pub fn method(&self) -> Option<Method> {
        let m = match (self.family, self.target) {
            (Family::ExtraTrees, TargetKind::Lcr) => [Method::LcrEt, Method::LcrEtLbla],
            (Family::ExtraTrees, TargetKind::Nl) => [Method::NlEt, Method::NlEtLbla],
            (Family::ExtraTrees, TargetKind::Nnl) => [Method::NnlEt, Method::NnlEtLbla],
            (Family::NgBoost, TargetKind::Nnl) => [Method::NnlNgb, Method::NnlNgbLbla],
            _ => return None,
        };
        Some(m[usize::from(self.lbla)])
    }
}

/// A complete, serializable experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Split-tune-train-test repetitions.
    pub repetitions: usize,
    /// Tie-breaking realizations of Precision@k%.
    pub realizations: usize,
    pub neighbors: usize,
    /// Let the content change rate read the target interval too.
    pub include_target_interval: bool,
    pub input: InputSource,
    pub features: FeatureOptions,
    pub model: ModelConfig,
    /// Ranking method tags; the model's method plus the baselines when absent.
    pub methods: Option<Vec<String>>,
    /// Extra history sizes to evaluate, one metrics file each.
    pub history_sweep: Vec<usize>,
    /// Permutation repeats for the importance table; 0 skips it.
    pub importance_repeats: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            repetitions: 3,
            realizations: DEFAULT_REALIZATIONS,
            neighbors: DEFAULT_K,
            include_target_interval: false,
            input: InputSource::Generator {
                generator: GeneratorConfig::default(),
            },
            features: FeatureOptions::default(),
            model: ModelConfig::default(),
            methods: None,
            history_sweep: Vec::new(),
            importance_repeats: 5,
            output_dir: PathBuf::from("outlink-run"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 || self.realizations == 0 || self.neighbors == 0 {
            return Err(Error::invalid("repetitions, realizations and neighbors must be positive"));
        }
        if let InputSource::Generator { generator } = &self.input {
            generator.validate()?;
        }
        self.model.setup(self.features.clone())?;
        self.methods()?;
        Ok(())
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        match &self.methods {
            Some(tags) => tags.iter().map(|t| t.parse()).collect(),
            None => Ok(self
                .model
                .method()
                .into_iter()
                .chain([Method::NnlAv, Method::NnlPr, Method::Ccr])
                .collect()),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of the canonical serialization. The output directory is left
    /// out so that the same experiment hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        content_hash(&c.to_toml())
    }
}
