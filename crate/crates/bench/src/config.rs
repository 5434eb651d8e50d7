//! JSON experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use mfvi_core::lda::LdaParams;
use mfvi_core::mmsb::{MmsbMethod, MmsbParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pg,
    Ff,
}

impl From<Method> for MmsbMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Pg => MmsbMethod::PartiallyGrouped,
            Method::Ff => MmsbMethod::FullyFactorized,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPolicy {
    #[default]
    Jittered,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Lda {
        alpha: Vec<f64>,
        /// `K × V` topic-word matrix.
        eta: Vec<Vec<f64>>,
        #[serde(default = "one")]
        docs: usize,
        /// Overrides `docs × size` when present.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        doc_lengths: Option<Vec<usize>>,
    },
    Mmsb {
        alpha: Vec<f64>,
        b: Vec<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

impl ModelSpec {
    /// Two groups, `α = (1, 1)`, `B = [[0.9, 0.3], [0.3, 0.9]]`.
    pub fn assortative_mmsb() -> Self {
        ModelSpec::Mmsb {
            alpha: vec![1.0, 1.0],
            b: vec![vec![0.9, 0.3], vec![0.3, 0.9]],
        }
    }

    /// `α = (½, …, ½)` and uniform `η` over `v` words.
    pub fn rate_lda(k: usize, v: usize, docs: usize) -> Self {
        ModelSpec::Lda {
            alpha: vec![0.5; k],
            eta: vec![vec![1.0 / v as f64; v]; k],
            docs,
            doc_lengths: None,
        }
    }

    pub fn lda_params(&self, size: usize) -> Result<LdaParams> {
        match self {
            ModelSpec::Lda {
                alpha,
                eta,
                docs,
                doc_lengths,
            } => {
                let lengths = doc_lengths.clone().unwrap_or_else(|| vec![size; *docs]);
                Ok(LdaParams::new(alpha.clone(), eta.clone(), lengths)?)
            }
            ModelSpec::Mmsb { .. } => Err(BenchError::Config("expected an LDA model".into())),
        }
    }

    pub fn mmsb_params(&self, n: usize) -> Result<MmsbParams> {
        match self {
            ModelSpec::Mmsb { alpha, b } => Ok(MmsbParams::new(n, alpha.clone(), b.clone())?),
            ModelSpec::Lda { .. } => Err(BenchError::Config("expected an MMSB model".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Node counts (MMSB) or words per document (LDA).
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "one")]
    pub restarts: usize,
    #[serde(default)]
    pub init: InitPolicy,
    /// Group whose indicator correlations are reported.
    #[serde(default)]
    pub group: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Pg, Method::Ff]
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_sweeps() -> usize {
    1000
}

impl ExperimentConfig {
    fn base(experiment: &str, model: Option<ModelSpec>) -> Self {
        ExperimentConfig {
            experiment: experiment.into(),
            model,
            sizes: Vec::new(),
            seeds: vec![0],
            methods: default_methods(),
            tol: default_tol(),
            max_sweeps: default_max_sweeps(),
            restarts: 1,
            init: InitPolicy::Jittered,
            group: 0,
            out: None,
        }
    }

    /// MMSB ELBO comparison: `n ∈ {50, 100, 200}`, three seeds, five
    /// restarts per method.
    pub fn figure_elbo() -> Self {
        ExperimentConfig {
            sizes: vec![50, 100, 200],
            seeds: vec![0, 1, 2],
            restarts: 5,
            ..Self::base("figure-elbo", Some(ModelSpec::assortative_mmsb()))
        }
    }

    pub fn corr_report() -> Self {
        ExperimentConfig {
            sizes: vec![200],
            methods: vec![Method::Pg],
            init: InitPolicy::Symmetric,
            ..Self::base("corr-report", Some(ModelSpec::assortative_mmsb()))
        }
    }

    pub fn rate_check() -> Self {
        ExperimentConfig {
            sizes: vec![4, 6, 8, 10, 12],
            restarts: 20,
            tol: 1e-12,
            max_sweeps: 2000,
            ..Self::base("rate-check", Some(ModelSpec::rate_lda(2, 2, 1)))
        }
    }

    pub fn identity_suite() -> Self {
        ExperimentConfig {
            seeds: (0..20).collect(),
            tol: 1e-13,
            max_sweeps: 5000,
            ..Self::base("identity-suite", None)
        }
    }

    pub fn sample() -> Self {
        ExperimentConfig {
            sizes: vec![50],
            ..Self::base("sample", Some(ModelSpec::assortative_mmsb()))
        }
    }

    pub fn fit_lda() -> Self {
        let model = ModelSpec::Lda {
            alpha: vec![0.5, 0.5],
            eta: vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.1, 0.2, 0.3, 0.4]],
            docs: 2,
            doc_lengths: None,
        };
        ExperimentConfig {
            sizes: vec![50],
            ..Self::base("fit-lda", Some(model))
        }
    }

    pub fn fit_mmsb() -> Self {
        ExperimentConfig {
            sizes: vec![50],
            restarts: 5,
            ..Self::base("fit-mmsb", Some(ModelSpec::assortative_mmsb()))
        }
    }

    pub fn oracle() -> Self {
        ExperimentConfig {
            sizes: vec![6],
            ..Self::base("oracle", Some(ModelSpec::rate_lda(2, 2, 1)))
        }
    }

    pub fn preset(experiment: &str) -> Option<Self> {
        Some(match experiment {
            "fit-lda" => Self::fit_lda(),
            "fit-mmsb" => Self::fit_mmsb(),
            "oracle" => Self::oracle(),
            "figure-elbo" => Self::figure_elbo(),
            "corr-report" => Self::corr_report(),
            "rate-check" => Self::rate_check(),
            "identity-suite" => Self::identity_suite(),
            "sample" => Self::sample(),
            _ => return None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| BenchError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() {
            return Err(BenchError::Config("experiment name is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Config("seed list is empty".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(BenchError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.restarts == 0 {
            return Err(BenchError::Config("restarts must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Config("method list is empty".into()));
        }
        Ok(())
    }

    pub fn fit_options(&self) -> Result<mfvi_core::FitOptions> {
        Ok(mfvi_core::FitOptions::new(self.tol, self.max_sweeps)?)
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| BenchError::Config(format!("{} needs a model", self.experiment)))
    }

    pub fn require_sizes(&self) -> Result<&[usize]> {
        if self.sizes.is_empty() {
            return Err(BenchError::Config(format!(
                "{} needs a non-empty size grid",
                self.experiment
            )));
        }
        Ok(&self.sizes)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    /// Short digest of everything that affects results; the output
    /// directory is left out.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&ExperimentConfig {
            out: None,
            ..self.clone()
        })
        .expect("config serializes");
        Sha256::digest(&canonical)[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
