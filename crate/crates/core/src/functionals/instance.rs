use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lda::{self, LdaCorpus, LdaParams, LdaState};
use crate::mmsb::{self, FfState, MmsbAssignment, MmsbGraph, MmsbParams, PgState, pairs};
use crate::numerics::{SimplexVector, ln, log_gamma_pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryMap {
    /// Site category is the group itself.
    Identity,
    /// Sender half `c / K` of a pair cell.
    Sender,
    /// Receiver half `c % K` of a pair cell.
    Receiver,
}

impl CategoryMap {
    #[inline]
    pub fn apply(self, c: usize, k: usize) -> usize {
        match self {
            CategoryMap::Identity => c,
            CategoryMap::Sender => c / k,
            CategoryMap::Receiver => c % k,
        }
    }
}

/// One count contribution of a site: category `c` adds one to
/// `Ñ[group][map(c)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub group: usize,
    pub map: CategoryMap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Lda(LdaParams, LdaCorpus),
    Mmsb(MmsbParams, MmsbGraph),
}

/// A collapsed posterior `P(z) ∝ μ(z) exp(f(z))` over categorical sites.
///
/// LDA sites are words (doc-major) with `K` categories and one slot in their
/// document. MMSB sites are ordered pairs with `K²` categories and two slots,
/// sender node and receiver node.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedInstance {
    source: Source,
    k: usize,
    categories: usize,
    alpha: Vec<f64>,
    /// Sites charged to each group (document length or `2(n−1)`).
    group_totals: Vec<usize>,
    slots: Vec<Vec<Slot>>,
    /// `μ_s(c)` per site.
    mu: Vec<Vec<f64>>,
    /// `ln c_s`, the normalizer turning the model's factor into `μ_s`.
    log_norm: Vec<f64>,
}

impl CollapsedInstance {
    pub fn lda(params: &LdaParams, corpus: &LdaCorpus) -> Result<Self> {
        LdaCorpus::new(params, corpus.words.clone())?;
        let k = params.num_topics();
        let mut slots = Vec::new();
        let mut mu = Vec::new();
        let mut log_norm = Vec::new();
        for (d, xs) in corpus.words.iter().enumerate() {
            for &x in xs {
                let col: Vec<f64> = params.eta().iter().map(|row| row[x]).collect();
                let c: f64 = col.iter().sum();
                slots.push(vec![Slot {
                    group: d,
                    map: CategoryMap::Identity,
                }]);
                mu.push(col.iter().map(|&e| e / c).collect());
                log_norm.push(ln(c));
            }
        }
        Ok(CollapsedInstance {
            source: Source::Lda(params.clone(), corpus.clone()),
            k,
            categories: k,
            alpha: params.alpha().to_vec(),
            group_totals: params.doc_lengths().to_vec(),
            slots,
            mu,
            log_norm,
        })
    }

    pub fn mmsb(params: &MmsbParams, graph: &MmsbGraph) -> Result<Self> {
        if graph.num_nodes() != params.num_nodes() {
            return Err(Error::DimensionMismatch {
                what: "graph nodes",
                expected: params.num_nodes(),
                found: graph.num_nodes(),
            });
        }
        let (n, k) = (params.num_nodes(), params.num_groups());
        let tables = [params.likelihood_table(false), params.likelihood_table(true)];
        let norms: Vec<f64> = tables.iter().map(|t| t.iter().sum()).collect();
        let mut slots = Vec::with_capacity(params.num_pairs());
        let mut mu = Vec::with_capacity(params.num_pairs());
        let mut log_norm = Vec::with_capacity(params.num_pairs());
        for (i, j) in pairs(n) {
            let x = graph.edge(i, j) as usize;
            slots.push(vec![
                Slot {
                    group: i,
                    map: CategoryMap::Sender,
                },
                Slot {
                    group: j,
                    map: CategoryMap::Receiver,
                },
            ]);
            mu.push(tables[x].iter().map(|&v| v / norms[x]).collect());
            log_norm.push(ln(norms[x]));
        }
        Ok(CollapsedInstance {
            source: Source::Mmsb(params.clone(), graph.clone()),
            k,
            categories: k * k,
            alpha: params.alpha().to_vec(),
            group_totals: vec![2 * (n - 1); n],
            slots,
            mu,
            log_norm,
        })
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn num_sites(&self) -> usize {
        self.slots.len()
    }

    /// Categories per site.
    pub fn num_categories(&self) -> usize {
        self.categories
    }

    /// Model groups `K`.
    pub fn num_topics(&self) -> usize {
        self.k
    }

    /// Dirichlet-count groups: documents or nodes.
    pub fn num_groups(&self) -> usize {
        self.group_totals.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn slots(&self, site: usize) -> &[Slot] {
        &self.slots[site]
    }

    pub fn mu(&self, site: usize) -> &[f64] {
        &self.mu[site]
    }

    /// `Σ_s ln c_s`, the gap between `log𝒮` (engine weights) and the
    /// `μ`-normalized log partition.
    pub fn log_norm_total(&self) -> f64 {
        self.log_norm.iter().sum()
    }

    /// `lnΓ(Σα) − Σ lnΓ(α)`, one per Dirichlet group.
    pub fn dirichlet_constant(&self) -> f64 {
        lda::dirichlet_log_norm(&self.alpha)
    }

    /// `Σ_g lnΓ(total_g + Σα)`, the count-independent part of `F`.
    pub(crate) fn total_term(&self) -> f64 {
        let a: f64 = self.alpha.iter().sum();
        self.group_totals.iter().map(|&t| log_gamma_pos(t as f64 + a)).sum()
    }

    /// Sites feeding `Ñ[g]`, with the slot map they use.
    pub(crate) fn group_members(&self) -> Vec<Vec<(usize, CategoryMap)>> {
        let mut members = vec![Vec::new(); self.num_groups()];
        for (s, slots) in self.slots.iter().enumerate() {
            for slot in slots {
                members[slot.group].push((s, slot.map));
            }
        }
        members
    }

    /// Engine collapsed energy `Υ(z)` of a site assignment.
    pub fn energy(&self, z: &[usize]) -> Result<f64> {
        self.check_assignment(z)?;
        match &self.source {
            Source::Lda(params, corpus) => {
                let mut rest = z;
                let mut nested = Vec::with_capacity(params.num_docs());
                for &len in params.doc_lengths() {
                    let (head, tail) = rest.split_at(len);
                    nested.push(head.to_vec());
                    rest = tail;
                }
                lda::collapsed_energy(params, corpus, &nested)
            }
            Source::Mmsb(params, graph) => {
                mmsb::collapsed_energy(params, graph, &MmsbAssignment::from_cells(z, self.k))
            }
        }
    }

    /// `ln μ(z) = Σ_s ln μ_s(z_s)`.
    pub fn log_base(&self, z: &[usize]) -> f64 {
        z.iter().zip(&self.mu).map(|(&c, m)| ln(m[c])).sum()
    }

    pub(crate) fn check_assignment(&self, z: &[usize]) -> Result<()> {
        if z.len() != self.num_sites() {
            return Err(Error::DimensionMismatch {
                what: "assignment sites",
                expected: self.num_sites(),
                found: z.len(),
            });
        }
        if z.iter().any(|&c| c >= self.categories) {
            return Err(Error::InvalidParams("assignment category out of range".into()));
        }
        Ok(())
    }

    pub(crate) fn check(&self, y: &ProductDistribution) -> Result<()> {
        if y.num_sites() != self.num_sites() {
            return Err(Error::DimensionMismatch {
                what: "product distribution sites",
                expected: self.num_sites(),
                found: y.num_sites(),
            });
        }
        if let Some(row) = y.rows.iter().find(|r| r.len() != self.categories) {
            return Err(Error::DimensionMismatch {
                what: "product distribution categories",
                expected: self.categories,
                found: row.len(),
            });
        }
        Ok(())
    }
}

/// `Q_y = ⊗_s y_s`, one simplex row per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    rows: Vec<SimplexVector>,
}

impl ProductDistribution {
    pub fn new(rows: Vec<SimplexVector>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("ProductDistribution"));
        }
        Ok(ProductDistribution { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(SimplexVector::new).collect::<Result<_>>()?)
    }

    /// Rows normalized without the strict simplex check; used for rows that
    /// come out of arithmetic already normalized.
    pub(crate) fn from_normalized(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(SimplexVector::from_weights)
                .collect::<Result<_>>()?,
        )
    }

    /// One-hot embedding `G(z)`.
    pub fn one_hot(z: &[usize], categories: usize) -> Result<Self> {
        if z.iter().any(|&c| c >= categories) {
            return Err(Error::InvalidParams("assignment category out of range".into()));
        }
        Self::new(z.iter().map(|&c| SimplexVector::point(categories, c)).collect())
    }

    pub fn uniform(sites: usize, categories: usize) -> Result<Self> {
        Self::new(vec![SimplexVector::uniform(categories); sites])
    }

    /// Word responsibilities `φ` of an LDA state, doc-major.
    pub fn from_lda(state: &LdaState) -> Result<Self> {
        Self::from_normalized(state.phi.iter().flatten().cloned().collect())
    }

    pub fn from_pg(state: &PgState) -> Result<Self> {
        let kk = state.k * state.k;
        Self::from_normalized(state.y.chunks_exact(kk).map(<[f64]>::to_vec).collect())
    }

    /// Sender ⊗ receiver cells of a fully factorized state.
    pub fn from_ff(state: &FfState) -> Result<Self> {
        Self::from_pg(&PgState::from_product(state))
    }

    pub fn num_sites(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn set_row(&mut self, site: usize, row: SimplexVector) {
        self.rows[site] = row;
    }

    pub fn row(&self, site: usize) -> &[f64] {
        self.rows[site].as_slice()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(SimplexVector::as_slice)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &ProductDistribution) -> f64 {
        self.rows()
            .zip(other.rows())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// `ln Q_y(z)`.
    pub fn log_prob(&self, z: &[usize]) -> f64 {
        z.iter().zip(&self.rows).map(|(&c, r)| ln(r[c])).sum()
    }
}
