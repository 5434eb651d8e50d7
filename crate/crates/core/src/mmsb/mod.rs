//! Mixed membership stochastic blockmodel.
//!
//! Ordered pairs `(i, j)`, `i ≠ j`, are stored row-major in a flat index (see
//! [`pair_index`]). Each pair carries a sender membership `Z_{i→j}` and a
//! receiver membership `Z_{i←j}`; the partially grouped family treats the two
//! as one categorical site over `K²` cells indexed `ℓ·K + ℓ′`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::FitOptions;
use crate::error::{Error, Result};
use crate::numerics::{
    RngSeed, SimplexVector, log_gamma_pos, sample_categorical, sample_dirichlet, sample_uniform, xlogy,
};

mod correlation;
mod ff;
mod pg;

pub use correlation::{PairCorrelation, TwoMeans, indicator_correlation, pair_correlations, two_means};
pub use ff::{FfState, ff_cavi_step, ff_elbo};
pub use pg::{PgState, pg_cavi_step, pg_elbo};

#[derive(Debug, Clone, PartialEq)]
pub struct MmsbParams {
    n: usize,
    alpha: Vec<f64>,
    /// `K × K` edge probabilities.
    b: Vec<Vec<f64>>,
}

impl MmsbParams {
    pub fn new(n: usize, alpha: Vec<f64>, b: Vec<Vec<f64>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("MMSB needs at least two nodes, got {n}")));
        }
        let k = alpha.len();
        if k == 0 {
            return Err(Error::InvalidParams("MMSB needs at least one group".into()));
        }
        if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha entries must be positive, got {a}")));
        }
        if b.len() != k {
            return Err(Error::DimensionMismatch {
                what: "B rows",
                expected: k,
                found: b.len(),
            });
        }
        for row in &b {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    what: "B columns",
                    expected: k,
                    found: row.len(),
                });
            }
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidParams("B entries must lie in [0, 1]".into()));
            }
        }
        if b.iter().flatten().all(|&x| x == 0.0) {
            return Err(Error::InvalidParams("B must not be the zero matrix".into()));
        }
        if b.iter().flatten().all(|&x| x == 1.0) {
            return Err(Error::InvalidParams("B must not be the all-ones matrix".into()));
        }
        Ok(MmsbParams { n, alpha, b })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_groups(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn b(&self) -> &[Vec<f64>] {
        &self.b
    }

    /// `ln B` (edge) or `ln(1−B)` (non-edge) per cell `ℓ·K + ℓ′`.
    pub(crate) fn log_likelihood_table(&self, edge: bool) -> Vec<f64> {
        self.b
            .iter()
            .flatten()
            .map(|&b| crate::numerics::ln(if edge { b } else { 1.0 - b }))
            .collect()
    }

    /// `B` or `1−B` per cell.
    pub(crate) fn likelihood_table(&self, edge: bool) -> Vec<f64> {
        self.b
            .iter()
            .flatten()
            .map(|&b| if edge { b } else { 1.0 - b })
            .collect()
    }

    /// Parameters with group labels permuted: new group `perm[ℓ]` is old
    /// group `ℓ`.
    pub fn permute_groups(&self, perm: &[usize]) -> Result<Self> {
        let k = self.num_groups();
        let mut alpha = vec![0.0; k];
        let mut b = vec![vec![0.0; k]; k];
        for l in 0..k {
            alpha[perm[l]] = self.alpha[l];
            for m in 0..k {
                b[perm[l]][perm[m]] = self.b[l][m];
            }
        }
        MmsbParams::new(self.n, alpha, b)
    }
}

/// Flat index of the ordered pair `(i, j)`, `i ≠ j`.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j > i { j - 1 } else { j }
}

/// Ordered pairs in flat-index order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// Directed binary graph; the diagonal is ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmsbGraph {
    n: usize,
    adjacency: Vec<bool>,
}

impl MmsbGraph {
    /// `edges[i][j]` for `i ≠ j`; diagonal entries are ignored.
    pub fn from_rows(edges: &[Vec<bool>]) -> Result<Self> {
        let n = edges.len();
        if n < 2 {
            return Err(Error::InvalidParams("graph needs at least two nodes".into()));
        }
        let mut adjacency = vec![false; n * n];
        for (i, row) in edges.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "adjacency row",
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &e) in row.iter().enumerate() {
                adjacency[i * n + j] = e && i != j;
            }
        }
        Ok(MmsbGraph { n, adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count()
    }

    /// Fraction of ordered pairs carrying an edge.
    pub fn density(&self) -> f64 {
        self.num_edges() as f64 / (self.n * (self.n - 1)) as f64
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.edge(i, j)).collect())
            .collect()
    }

    pub(crate) fn check(&self, params: &MmsbParams) -> Result<()> {
        if self.n != params.n {
            return Err(Error::DimensionMismatch {
                what: "graph nodes",
                expected: params.n,
                found: self.n,
            });
        }
        Ok(())
    }
}

/// Joint membership assignment, indexed by [`pair_index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmsbAssignment {
    pub sender: Vec<usize>,
    pub receiver: Vec<usize>,
}

impl MmsbAssignment {
    /// Decodes per-pair cells `ℓ·K + ℓ′`.
    pub fn from_cells(cells: &[usize], k: usize) -> Self {
        MmsbAssignment {
            sender: cells.iter().map(|&c| c / k).collect(),
            receiver: cells.iter().map(|&c| c % k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsbLatents {
    pub pi: Vec<SimplexVector>,
    pub z: MmsbAssignment,
}

/// Membership counts `N[i][ℓ]`, pair counts `A[ℓ][ℓ′]` and edge counts
/// `M[ℓ][ℓ′]` of an assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmsbCounts {
    pub membership: Vec<Vec<usize>>,
    pub pairs: Vec<Vec<usize>>,
    pub edges: Vec<Vec<usize>>,
}

impl MmsbCounts {
    pub fn from_assignment(params: &MmsbParams, graph: &MmsbGraph, z: &MmsbAssignment) -> Result<Self> {
        graph.check(params)?;
        let (n, k) = (params.n, params.num_groups());
        for (what, v) in [("sender assignment", &z.sender), ("receiver assignment", &z.receiver)] {
            if v.len() != params.num_pairs() {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: params.num_pairs(),
                    found: v.len(),
                });
            }
            if v.iter().any(|&l| l >= k) {
                return Err(Error::InvalidParams(format!("{what} has a group outside 0..{k}")));
            }
        }
        let mut membership = vec![vec![0; k]; n];
        let mut pair_counts = vec![vec![0; k]; k];
        let mut edges = vec![vec![0; k]; k];
        for (p, (i, j)) in pairs(n).enumerate() {
            let (s, r) = (z.sender[p], z.receiver[p]);
            membership[i][s] += 1;
            membership[j][r] += 1;
            pair_counts[s][r] += 1;
            if graph.edge(i, j) {
                edges[s][r] += 1;
            }
        }
        Ok(MmsbCounts {
            membership,
            pairs: pair_counts,
            edges,
        })
    }
}

/// Draws `(X, π, Z)` from the generative process.
pub fn sample(params: &MmsbParams, seed: RngSeed) -> Result<(MmsbGraph, MmsbLatents)> {
    let mut rng = seed.rng();
    let n = params.n;
    let pi: Vec<SimplexVector> = (0..n)
        .map(|_| sample_dirichlet(&params.alpha, &mut rng))
        .collect::<Result<_>>()?;
    let mut adjacency = vec![false; n * n];
    let mut sender = Vec::with_capacity(params.num_pairs());
    let mut receiver = Vec::with_capacity(params.num_pairs());
    for (i, j) in pairs(n) {
        let s = sample_categorical(pi[i].as_slice(), &mut rng);
        let r = sample_categorical(pi[j].as_slice(), &mut rng);
        adjacency[i * n + j] = sample_uniform(&mut rng) < params.b[s][r];
        sender.push(s);
        receiver.push(r);
    }
    Ok((
        MmsbGraph { n, adjacency },
        MmsbLatents {
            pi,
            z: MmsbAssignment { sender, receiver },
        },
    ))
}

/// Collapsed log-weight
/// `Υ(z) = Σ [M ln B + (A−M) ln(1−B)] + Σ lnΓ(N_{iℓ}+α_ℓ) − n lnΓ(2n−2+Σα)`.
pub fn collapsed_energy(params: &MmsbParams, graph: &MmsbGraph, z: &MmsbAssignment) -> Result<f64> {
    let counts = MmsbCounts::from_assignment(params, graph, z)?;
    let k = params.num_groups();
    let mut likelihood = 0.0;
    for l in 0..k {
        for m in 0..k {
            let b = params.b[l][m];
            let edges = counts.edges[l][m] as f64;
            let non_edges = (counts.pairs[l][m] - counts.edges[l][m]) as f64;
            likelihood += xlogy(edges, b) + xlogy(non_edges, 1.0 - b);
        }
    }
    let mut dirichlet = 0.0;
    for row in &counts.membership {
        for (&c, &a) in row.iter().zip(&params.alpha) {
            dirichlet += log_gamma_pos(c as f64 + a);
        }
    }
    let total = 2.0 * (params.n - 1) as f64 + params.alpha_sum();
    dirichlet -= params.n as f64 * log_gamma_pos(total);
    Ok(likelihood + dirichlet)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MmsbInit {
    /// `γ[i][ℓ] = (α_ℓ + 2(n−1)/K)·U(0.95, 1.05)` from the seed's stream.
    Jittered(RngSeed),
    /// `γ[i][ℓ] = α_ℓ + 2(n−1)/K` exactly.
    Symmetric,
    Explicit(Vec<Vec<f64>>),
}

impl MmsbInit {
    pub(crate) fn gamma(&self, params: &MmsbParams) -> Result<Vec<f64>> {
        let (n, k) = (params.n, params.num_groups());
        let base = |l: usize| params.alpha[l] + 2.0 * (n - 1) as f64 / k as f64;
        match self {
            MmsbInit::Symmetric => Ok((0..n).flat_map(|_| (0..k).map(base)).collect()),
            MmsbInit::Jittered(seed) => {
                let mut rng = seed.rng();
                Ok((0..n * k)
                    .map(|c| base(c % k) * (0.95 + 0.1 * sample_uniform(&mut rng)))
                    .collect())
            }
            MmsbInit::Explicit(g) => {
                if g.len() != n || g.iter().any(|row| row.len() != k) {
                    return Err(Error::DimensionMismatch {
                        what: "initial gamma",
                        expected: n * k,
                        found: g.iter().map(Vec::len).sum(),
                    });
                }
                if g.iter().flatten().any(|&x| !(x > 0.0)) {
                    return Err(Error::InvalidParams("initial gamma must be positive".into()));
                }
                Ok(g.iter().flatten().copied().collect())
            }
        }
    }

    fn for_restart(&self, restart: usize) -> MmsbInit {
        match self {
            MmsbInit::Jittered(seed) => MmsbInit::Jittered(seed.substream(restart as u64)),
            other => other.clone(),
        }
    }
}

/// Dirichlet parameters `γ[i]` as flat `n × K` storage.
pub(crate) fn gamma_rows(gamma: &[f64], k: usize) -> impl Iterator<Item = &[f64]> {
    gamma.chunks_exact(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MmsbMethod {
    /// Each pair's `(Z_{i→j}, Z_{i←j})` is one `K²`-category factor.
    PartiallyGrouped,
    /// Sender and receiver memberships get separate factors.
    FullyFactorized,
}

impl MmsbMethod {
    pub fn label(self) -> &'static str {
        match self {
            MmsbMethod::PartiallyGrouped => "pg",
            MmsbMethod::FullyFactorized => "ff",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MmsbState {
    Pg(PgState),
    Ff(FfState),
}

impl MmsbState {
    pub fn initialize(params: &MmsbParams, graph: &MmsbGraph, method: MmsbMethod, init: &MmsbInit) -> Result<Self> {
        Ok(match method {
            MmsbMethod::PartiallyGrouped => MmsbState::Pg(PgState::initialize(params, graph, init)?),
            MmsbMethod::FullyFactorized => MmsbState::Ff(FfState::initialize(params, graph, init)?),
        })
    }

    pub fn step(&self, params: &MmsbParams, graph: &MmsbGraph) -> Result<Self> {
        Ok(match self {
            MmsbState::Pg(s) => MmsbState::Pg(pg_cavi_step(params, graph, s)?),
            MmsbState::Ff(s) => MmsbState::Ff(ff_cavi_step(params, graph, s)?),
        })
    }

    pub fn elbo(&self, params: &MmsbParams, graph: &MmsbGraph) -> Result<f64> {
        match self {
            MmsbState::Pg(s) => pg_elbo(params, graph, s),
            MmsbState::Ff(s) => ff_elbo(params, graph, s),
        }
    }

    pub fn gamma(&self) -> &[f64] {
        match self {
            MmsbState::Pg(s) => &s.gamma,
            MmsbState::Ff(s) => &s.gamma,
        }
    }

    pub fn as_pg(&self) -> Option<&PgState> {
        match self {
            MmsbState::Pg(s) => Some(s),
            MmsbState::Ff(_) => None,
        }
    }

    pub fn as_ff(&self) -> Option<&FfState> {
        match self {
            MmsbState::Ff(s) => Some(s),
            MmsbState::Pg(_) => None,
        }
    }
}

/// One converged (or exhausted) coordinate-ascent run.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsbRun {
    pub state: MmsbState,
    /// ELBO after each sweep.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

impl MmsbRun {
    pub fn final_elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("a run has at least one sweep")
    }

    pub fn sweeps(&self) -> usize {
        self.elbo_trace.len()
    }
}

pub fn fit_once(
    params: &MmsbParams,
    graph: &MmsbGraph,
    method: MmsbMethod,
    init: &MmsbInit,
    opts: FitOptions,
) -> Result<MmsbRun> {
    graph.check(params)?;
    let mut state = MmsbState::initialize(params, graph, method, init)?;
    let mut previous = state.elbo(params, graph)?;
    if !previous.is_finite() {
        return Err(Error::NonFiniteObjective {
            sweep: 0,
            value: previous,
        });
    }
    let mut elbo_trace = Vec::new();
    let mut converged = false;
    for sweep in 1..=opts.max_sweeps.max(1) {
        state = state.step(params, graph)?;
        let current = state.elbo(params, graph)?;
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
    Ok(MmsbRun {
        state,
        elbo_trace,
        converged,
    })
}

/// Best of several restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsbFit {
    pub runs: Vec<MmsbRun>,
    pub best: usize,
}

impl MmsbFit {
    pub fn best_run(&self) -> &MmsbRun {
        &self.runs[self.best]
    }

    pub fn best_elbo(&self) -> f64 {
        self.best_run().final_elbo()
    }
}

/// Runs `restarts` fits; restart `r` of a jittered init uses substream `r`
/// of its seed. Ties keep the earliest restart.
pub fn fit(
    params: &MmsbParams,
    graph: &MmsbGraph,
    method: MmsbMethod,
    init: &MmsbInit,
    opts: FitOptions,
    restarts: usize,
) -> Result<MmsbFit> {
    if restarts == 0 {
        return Err(Error::InvalidParams("restarts must be at least 1".into()));
    }
    let runs = (0..restarts)
        .map(|r| fit_once(params, graph, method, &init.for_restart(r), opts))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.final_elbo() > runs[best].final_elbo() {
            best = r;
        }
    }
    Ok(MmsbFit { runs, best })
}
