//! JSON data and fit files. Word and group indices are 1-based on disk.

use std::fs;
use std::path::Path;

use mfvi_core::lda::{LdaCorpus, LdaFit, LdaParams};
use mfvi_core::mmsb::{MmsbFit, MmsbGraph, MmsbParams, MmsbState, pairs};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "V")]
    pub v: usize,
    pub n_d: Vec<usize>,
    pub alpha: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub words: Vec<Vec<usize>>,
}

impl CorpusFile {
    pub fn new(params: &LdaParams, corpus: &LdaCorpus) -> Self {
        CorpusFile {
            d: params.num_docs(),
            k: params.num_topics(),
            v: params.vocab_size(),
            n_d: params.doc_lengths().to_vec(),
            alpha: params.alpha().to_vec(),
            eta: params.eta().to_vec(),
            words: corpus
                .words
                .iter()
                .map(|doc| doc.iter().map(|&w| w + 1).collect())
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<(LdaParams, LdaCorpus)> {
        let params = LdaParams::new(self.alpha.clone(), self.eta.clone(), self.n_d.clone())?;
        if (self.d, self.k, self.v) != (params.num_docs(), params.num_topics(), params.vocab_size()) {
            return Err(BenchError::Config("corpus header disagrees with its arrays".into()));
        }
        let words = self
            .words
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|&w| {
                        w.checked_sub(1)
                            .ok_or_else(|| BenchError::Config("word indices are 1-based".into()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((params.clone(), LdaCorpus::new(&params, words)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    /// 0/1 entries, `null` on the diagonal.
    #[serde(rename = "X")]
    pub x: Vec<Vec<Option<u8>>>,
}

impl GraphFile {
    pub fn new(params: &MmsbParams, graph: &MmsbGraph) -> Self {
        let n = graph.num_nodes();
        GraphFile {
            n,
            k: params.num_groups(),
            alpha: params.alpha().to_vec(),
            b: params.b().to_vec(),
            x: (0..n)
                .map(|i| (0..n).map(|j| (i != j).then(|| graph.edge(i, j) as u8)).collect())
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<(MmsbParams, MmsbGraph)> {
        let params = MmsbParams::new(self.n, self.alpha.clone(), self.b.clone())?;
        if self.x.len() != self.n || self.k != params.num_groups() {
            return Err(BenchError::Config("graph header disagrees with its arrays".into()));
        }
        let rows = self
            .x
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != self.n {
                    return Err(BenchError::Config(format!(
                        "row {} of X has {} entries",
                        i + 1,
                        row.len()
                    )));
                }
                row.iter()
                    .enumerate()
                    .map(|(j, &x)| match (i == j, x) {
                        (true, _) => Ok(false),
                        (false, Some(0)) => Ok(false),
                        (false, Some(1)) => Ok(true),
                        _ => Err(BenchError::Config(format!("X[{}][{}] must be 0 or 1", i + 1, j + 1))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((params, MmsbGraph::from_rows(&rows)?))
    }

    /// Number of off-diagonal entries.
    pub fn num_entries(&self) -> usize {
        self.x.iter().flatten().filter(|x| x.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaFitExport {
    pub phi: Vec<Vec<Vec<f64>>>,
    pub gamma: Vec<Vec<f64>>,
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

impl From<&LdaFit> for LdaFitExport {
    fn from(fit: &LdaFit) -> Self {
        LdaFitExport {
            phi: fit.state.phi.clone(),
            gamma: fit.state.gamma.clone(),
            elbo_trace: fit.elbo_trace.clone(),
            converged: fit.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsbFitExport {
    pub method: String,
    /// 1-based `(i, j)` per pair, in the order of `y`.
    pub pairs: Vec<[usize; 2]>,
    /// Partially grouped: one `K²` row per pair. Fully factorized: sender
    /// and receiver rows per pair.
    pub y: Vec<Vec<Vec<f64>>>,
    pub gamma: Vec<Vec<f64>>,
    pub elbo_trace: Vec<f64>,
    pub best_restart: usize,
    pub final_elbos: Vec<f64>,
}

impl MmsbFitExport {
    pub fn new(params: &MmsbParams, fit: &MmsbFit) -> Self {
        let run = fit.best_run();
        let k = params.num_groups();
        let y = match &run.state {
            MmsbState::Pg(s) => s.y.chunks_exact(k * k).map(|r| vec![r.to_vec()]).collect(),
            MmsbState::Ff(s) => s
                .y_out
                .chunks_exact(k)
                .zip(s.y_in.chunks_exact(k))
                .map(|(o, r)| vec![o.to_vec(), r.to_vec()])
                .collect(),
        };
        let method = match run.state {
            MmsbState::Pg(_) => "pg",
            MmsbState::Ff(_) => "ff",
        };
        MmsbFitExport {
            method: method.into(),
            pairs: pairs(params.num_nodes()).map(|(i, j)| [i + 1, j + 1]).collect(),
            y,
            gamma: run.state.gamma().chunks(k).map(<[f64]>::to_vec).collect(),
            elbo_trace: run.elbo_trace.clone(),
            best_restart: fit.best,
            final_elbos: fit.runs.iter().map(|r| r.final_elbo()).collect(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}
