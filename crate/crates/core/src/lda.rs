//! Latent Dirichlet allocation: generative sampling, the collapsed energy
//! `Υ(z)`, and coordinate-ascent mean-field inference.
//!
//! Topic and word indices are 0-based throughout; file formats convert.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::FitOptions;
use crate::error::{Error, Result};
use crate::numerics::{
    RngSeed, SimplexVector, digamma_pos, ln, log_gamma_pos, normalize_log_weights, sample_categorical,
    sample_dirichlet, sample_uniform, xlogy,
};

/// Row-sum tolerance for `η`.
const ETA_ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaParams {
    alpha: Vec<f64>,
    /// `K × V`, row ℓ is the word distribution of topic ℓ.
    eta: Vec<Vec<f64>>,
    doc_lengths: Vec<usize>,
}

impl LdaParams {
    pub fn new(alpha: Vec<f64>, eta: Vec<Vec<f64>>, doc_lengths: Vec<usize>) -> Result<Self> {
        let k = alpha.len();
        if k == 0 {
            return Err(Error::InvalidParams("LDA needs at least one topic".into()));
        }
        if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha entries must be positive, got {a}")));
        }
        if eta.len() != k {
            return Err(Error::DimensionMismatch {
                what: "eta rows",
                expected: k,
                found: eta.len(),
            });
        }
        let v = eta[0].len();
        if v == 0 {
            return Err(Error::InvalidParams("LDA needs a nonempty vocabulary".into()));
        }
        for (l, row) in eta.iter().enumerate() {
            if row.len() != v {
                return Err(Error::DimensionMismatch {
                    what: "eta columns",
                    expected: v,
                    found: row.len(),
                });
            }
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidParams(format!("eta row {l} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ETA_ROW_TOL {
                return Err(Error::InvalidParams(format!("eta row {l} sums to {sum}")));
            }
        }
        for r in 0..v {
            if eta.iter().all(|row| row[r] == 0.0) {
                return Err(Error::InvalidParams(format!(
                    "word {r} has zero probability under every topic"
                )));
            }
        }
        if doc_lengths.is_empty() {
            return Err(Error::InvalidParams("LDA needs at least one document".into()));
        }
        if doc_lengths.contains(&0) {
            return Err(Error::InvalidParams("every document needs at least one word".into()));
        }
        Ok(LdaParams {
            alpha,
            eta,
            doc_lengths,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn num_topics(&self) -> usize {
        self.alpha.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.eta[0].len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn eta(&self) -> &[Vec<f64>] {
        &self.eta
    }

    pub fn doc_lengths(&self) -> &[usize] {
        &self.doc_lengths
    }

    pub fn total_words(&self) -> usize {
        self.doc_lengths.iter().sum()
    }

    /// Same hyperparameters restricted to the listed documents.
    pub fn select_docs(&self, docs: &[usize]) -> Result<Self> {
        LdaParams::new(
            self.alpha.clone(),
            self.eta.clone(),
            docs.iter().map(|&d| self.doc_lengths[d]).collect(),
        )
    }

    fn check_ragged<T>(&self, what: &'static str, table: &[Vec<T>]) -> Result<()> {
        if table.len() != self.num_docs() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.num_docs(),
                found: table.len(),
            });
        }
        for (row, &n) in table.iter().zip(&self.doc_lengths) {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Ok(())
    }
}

/// Observed words `X[d][i] ∈ 0..V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdaCorpus {
    pub words: Vec<Vec<usize>>,
}

impl LdaCorpus {
    pub fn new(params: &LdaParams, words: Vec<Vec<usize>>) -> Result<Self> {
        params.check_ragged("corpus", &words)?;
        let v = params.vocab_size();
        if let Some(&w) = words.iter().flatten().find(|&&w| w >= v) {
            return Err(Error::InvalidParams(format!(
                "word index {w} outside vocabulary of {v}"
            )));
        }
        Ok(LdaCorpus { words })
    }

    pub fn select_docs(&self, docs: &[usize]) -> Self {
        LdaCorpus {
            words: docs.iter().map(|&d| self.words[d].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaLatents {
    pub pi: Vec<SimplexVector>,
    pub z: Vec<Vec<usize>>,
}

/// Topic counts of an assignment: `N[d][ℓ]` and `N[d][ℓ][r]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdaCounts {
    pub doc_topic: Vec<Vec<usize>>,
    pub doc_topic_word: Vec<Vec<Vec<usize>>>,
}

impl LdaCounts {
    pub fn from_assignment(params: &LdaParams, corpus: &LdaCorpus, z: &[Vec<usize>]) -> Result<Self> {
        params.check_ragged("assignment", z)?;
        let (k, v) = (params.num_topics(), params.vocab_size());
        let mut doc_topic = vec![vec![0; k]; params.num_docs()];
        let mut doc_topic_word = vec![vec![vec![0; v]; k]; params.num_docs()];
        for (d, (zs, xs)) in z.iter().zip(&corpus.words).enumerate() {
            for (&l, &x) in zs.iter().zip(xs) {
                if l >= k {
                    return Err(Error::InvalidParams(format!("topic {l} out of range")));
                }
                doc_topic[d][l] += 1;
                doc_topic_word[d][l][x] += 1;
            }
        }
        Ok(LdaCounts {
            doc_topic,
            doc_topic_word,
        })
    }
}

/// Draws `(X, π, Z)` from the generative process. Document `d` uses
/// substream `d` of `seed`.
pub fn sample(params: &LdaParams, seed: RngSeed) -> Result<(LdaCorpus, LdaLatents)> {
    let mut words = Vec::with_capacity(params.num_docs());
    let mut pi = Vec::with_capacity(params.num_docs());
    let mut z = Vec::with_capacity(params.num_docs());
    for (d, &n) in params.doc_lengths.iter().enumerate() {
        let mut rng = seed.substream(d as u64).rng();
        let pi_d = sample_dirichlet(&params.alpha, &mut rng)?;
        let mut zd = Vec::with_capacity(n);
        let mut xd = Vec::with_capacity(n);
        for _ in 0..n {
            let l = sample_categorical(pi_d.as_slice(), &mut rng);
            zd.push(l);
            xd.push(sample_categorical(&params.eta[l], &mut rng));
        }
        pi.push(pi_d);
        z.push(zd);
        words.push(xd);
    }
    Ok((LdaCorpus { words }, LdaLatents { pi, z }))
}

/// Collapsed log-weight
/// `Υ(z) = Σ N_{dℓr} ln η_{ℓr} + Σ lnΓ(N_{dℓ}+α_ℓ) − Σ_d lnΓ(n_d+Σα)`,
/// `−∞` when `z` sends a word to a topic that cannot emit it.
pub fn collapsed_energy(params: &LdaParams, corpus: &LdaCorpus, z: &[Vec<usize>]) -> Result<f64> {
    let counts = LdaCounts::from_assignment(params, corpus, z)?;
    let alpha_sum = params.alpha_sum();
    let mut emission = 0.0;
    let mut dirichlet = 0.0;
    for (d, &n) in params.doc_lengths.iter().enumerate() {
        for (l, &a) in params.alpha.iter().enumerate() {
            dirichlet += log_gamma_pos(counts.doc_topic[d][l] as f64 + a);
            for (r, &c) in counts.doc_topic_word[d][l].iter().enumerate() {
                emission += xlogy(c as f64, params.eta[l][r]);
            }
        }
        dirichlet -= log_gamma_pos(n as f64 + alpha_sum);
    }
    Ok(emission + dirichlet)
}

/// Mean-field factors: `φ[d][i]` over topics and Dirichlet `γ[d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaState {
    pub phi: Vec<Vec<Vec<f64>>>,
    pub gamma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LdaInit {
    /// `γ[d][ℓ] = (α_ℓ + n_d/K)·U(0.95, 1.05)`, document `d` drawing from
    /// substream `d`.
    Jittered(RngSeed),
    /// `γ[d][ℓ] = α_ℓ + n_d/K` exactly.
    Symmetric,
    Explicit(Vec<Vec<f64>>),
}

impl LdaState {
    /// Builds `γ` from `init`, then sets `φ` by one responsibility update.
    pub fn initialize(params: &LdaParams, corpus: &LdaCorpus, init: &LdaInit) -> Result<Self> {
        let k = params.num_topics();
        let gamma: Vec<Vec<f64>> = match init {
            LdaInit::Explicit(g) => {
                if g.len() != params.num_docs() {
                    return Err(Error::DimensionMismatch {
                        what: "initial gamma",
                        expected: params.num_docs(),
                        found: g.len(),
                    });
                }
                if g.iter().any(|row| row.len() != k || row.iter().any(|&x| !(x > 0.0))) {
                    return Err(Error::InvalidParams("initial gamma must be positive D×K".into()));
                }
                g.clone()
            }
            LdaInit::Symmetric | LdaInit::Jittered(_) => params
                .doc_lengths
                .iter()
                .enumerate()
                .map(|(d, &n)| {
                    let mut rng = match init {
                        LdaInit::Jittered(seed) => Some(seed.substream(d as u64).rng()),
                        _ => None,
                    };
                    params
                        .alpha
                        .iter()
                        .map(|&a| {
                            let base = a + n as f64 / k as f64;
                            match rng.as_mut() {
                                Some(r) => base * (0.95 + 0.1 * sample_uniform(r)),
                                None => base,
                            }
                        })
                        .collect()
                })
                .collect(),
        };
        let phi = responsibilities(params, corpus, &gamma)?;
        Ok(LdaState { phi, gamma })
    }

    pub fn num_docs(&self) -> usize {
        self.gamma.len()
    }
}

/// `φ[d][i][ℓ] ∝ η_{ℓ,X_{di}} exp(ψ(γ_{dℓ}))`.
fn responsibilities(params: &LdaParams, corpus: &LdaCorpus, gamma: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut site = 0;
    let mut phi = Vec::with_capacity(params.num_docs());
    for (xs, g) in corpus.words.iter().zip(gamma) {
        let psi: Vec<f64> = g.iter().map(|&x| digamma_pos(x)).collect();
        let mut rows = Vec::with_capacity(xs.len());
        for &x in xs {
            let mut row: Vec<f64> = psi
                .iter()
                .zip(&params.eta)
                .map(|(&p, eta_l)| ln(eta_l[x]) + p)
                .collect();
            normalize_log_weights(&mut row).ok_or(Error::DegenerateRow { site })?;
            rows.push(row);
            site += 1;
        }
        phi.push(rows);
    }
    Ok(phi)
}

fn refresh_gamma(params: &LdaParams, phi: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    phi.iter()
        .map(|rows| {
            params
                .alpha
                .iter()
                .enumerate()
                .map(|(l, &a)| a + rows.iter().map(|row| row[l]).sum::<f64>())
                .collect()
        })
        .collect()
}

fn check_state(params: &LdaParams, state: &LdaState) -> Result<()> {
    params.check_ragged("phi", &state.phi)?;
    if state.gamma.len() != params.num_docs() {
        return Err(Error::DimensionMismatch {
            what: "gamma",
            expected: params.num_docs(),
            found: state.gamma.len(),
        });
    }
    let k = params.num_topics();
    if state.gamma.iter().any(|g| g.len() != k) || state.phi.iter().flatten().any(|row| row.len() != k) {
        return Err(Error::InvalidParams("state rows must have K entries".into()));
    }
    Ok(())
}

/// One CAVI sweep: every `φ` row from the current `γ`, then `γ = α + Σ_i φ`.
pub fn cavi_step(params: &LdaParams, corpus: &LdaCorpus, state: &LdaState) -> Result<LdaState> {
    check_state(params, state)?;
    let phi = responsibilities(params, corpus, &state.gamma)?;
    let gamma = refresh_gamma(params, &phi);
    Ok(LdaState { phi, gamma })
}

/// `E_q[ln π_ℓ]` under `Dir(γ)`.
pub(crate) fn expected_log_pi(gamma: &[f64]) -> Vec<f64> {
    let psi_sum = digamma_pos(gamma.iter().sum());
    gamma.iter().map(|&g| digamma_pos(g) - psi_sum).collect()
}

/// `ln Γ(Σw) − Σ ln Γ(w)`, the log normalizer of `Dir(w)`.
pub(crate) fn dirichlet_log_norm(w: &[f64]) -> f64 {
    log_gamma_pos(w.iter().sum()) - w.iter().map(|&x| log_gamma_pos(x)).sum::<f64>()
}

/// Evidence lower bound `E_q[ln p(π, Z, X)] − E_q[ln q(π, Z)]`.
pub fn elbo(params: &LdaParams, corpus: &LdaCorpus, state: &LdaState) -> Result<f64> {
    check_state(params, state)?;
    let prior_norm = dirichlet_log_norm(&params.alpha);
    let mut total = 0.0;
    for ((xs, rows), g) in corpus.words.iter().zip(&state.phi).zip(&state.gamma) {
        let e_log_pi = expected_log_pi(g);
        let mut doc = prior_norm - dirichlet_log_norm(g);
        for ((&a, &gl), &e) in params.alpha.iter().zip(g).zip(&e_log_pi) {
            doc += (a - gl) * e;
        }
        for (&x, row) in xs.iter().zip(rows) {
            for (l, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    doc += p * (e_log_pi[l] + ln(params.eta[l][x]) - ln(p));
                }
            }
        }
        total += doc;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    pub state: LdaState,
    /// ELBO after each sweep.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

impl LdaFit {
    pub fn final_elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("a fit runs at least one sweep")
    }
}

/// Runs [`cavi_step`] until the relative ELBO change drops below `opts.tol`
/// or `opts.max_sweeps` sweeps have run.
pub fn fit(params: &LdaParams, corpus: &LdaCorpus, init: &LdaInit, opts: FitOptions) -> Result<LdaFit> {
    let mut state = LdaState::initialize(params, corpus, init)?;
    let mut previous = elbo(params, corpus, &state)?;
    if !previous.is_finite() {
        return Err(Error::NonFiniteObjective {
            sweep: 0,
            value: previous,
        });
    }
    let mut elbo_trace = Vec::new();
    let mut converged = false;
    for sweep in 1..=opts.max_sweeps.max(1) {
        state = cavi_step(params, corpus, &state)?;
        let current = elbo(params, corpus, &state)?;
        if !current.is_finite() {
            return Err(Error::NonFiniteObjective { sweep, value: current });
        }
        elbo_trace.push(current);
        if opts.converged(previous, current) {
            converged = true;
            break;
        }
        previous = current;
    }
    Ok(LdaFit {
        state,
        elbo_trace,
        converged,
    })
}
