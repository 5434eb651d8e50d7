//! Experiment drivers. Each returns plain data; the CLI renders it.

use std::time::{Duration, Instant};

use mfvi_core::RngSeed;
use mfvi_core::functionals::{
    CollapsedInstance, CollapsedMode, ProductDistribution, YInit, collapsed_vi, energy_f, eval_f, exact_objective,
    expected_energy,
};
use mfvi_core::lda::{self, LdaInit, LdaParams};
use mfvi_core::mmsb::{
    self, MmsbGraph, MmsbInit, MmsbMethod, MmsbParams, MmsbState, TwoMeans, pair_correlations, two_means,
};
use mfvi_core::numerics::{SeededRng, sample_uniform};
use mfvi_core::oracle::{enumerate_posterior, exact_kl, full_model_kl, log_evidence};

use crate::config::{ExperimentConfig, InitPolicy, Method, ModelSpec};
use crate::error::{BenchError, Result};

/// Seed of one `(seed, size)` cell; substream 0 draws data, substream 1
/// initializes fits.
pub fn cell_seed(seed: u64, size: usize) -> RngSeed {
    RngSeed(seed).substream(size as u64)
}

pub fn data_seed(seed: u64, size: usize) -> RngSeed {
    cell_seed(seed, size).substream(0)
}

pub fn init_seed(seed: u64, size: usize) -> RngSeed {
    cell_seed(seed, size).substream(1)
}

pub fn sample_graph(params: &MmsbParams, seed: u64) -> Result<MmsbGraph> {
    Ok(mmsb::sample(params, data_seed(seed, params.num_nodes()))?.0)
}

fn mmsb_init(policy: InitPolicy, seed: u64, n: usize) -> MmsbInit {
    match policy {
        InitPolicy::Jittered => MmsbInit::Jittered(init_seed(seed, n)),
        InitPolicy::Symmetric => MmsbInit::Symmetric,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub method: Method,
    pub elbo: f64,
    /// `ELBO / n²`.
    pub scaled_elbo: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub best_restart: usize,
    pub wall_time: Duration,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub n: usize,
    pub pg_scaled: f64,
    pub ff_scaled: f64,
    /// Mean over seeds of `PG_scaled − FF_scaled`.
    pub gap: f64,
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureElbo {
    pub rows: Vec<ResultRow>,
    pub gaps: Vec<GapRow>,
}

impl FigureElbo {
    /// Positive gap for every seed at every size.
    pub fn gaps_positive(&self) -> bool {
        !self.gaps.is_empty() && self.gaps.iter().all(|g| g.min_gap > 0.0)
    }

    /// Largest over smallest mean gap across sizes.
    pub fn gap_spread(&self) -> Option<f64> {
        let lo = self.gaps.iter().map(|g| g.gap).fold(f64::INFINITY, f64::min);
        let hi = self.gaps.iter().map(|g| g.gap).fold(f64::NEG_INFINITY, f64::max);
        (lo > 0.0).then(|| hi / lo)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Fits every method on every `(size, seed)` cell, best of `restarts`.
pub fn figure_elbo(cfg: &ExperimentConfig) -> Result<FigureElbo> {
    let model = cfg.model()?;
    let opts = cfg.fit_options()?;
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for &n in cfg.require_sizes()? {
        let params = model.mmsb_params(n)?;
        let scale = (n * n) as f64;
        let mut diffs = Vec::new();
        let mut by_method = [Vec::new(), Vec::new()];
        for &seed in &cfg.seeds {
            let graph = sample_graph(&params, seed)?;
            let init = mmsb_init(cfg.init, seed, n);
            let mut finals = [None, None];
            for &method in &cfg.methods {
                let start = Instant::now();
                let fit = mmsb::fit(&params, &graph, method.into(), &init, opts, cfg.restarts);
                let wall_time = start.elapsed();
                let row = match fit {
                    Ok(fit) => {
                        let run = fit.best_run();
                        finals[method as usize] = Some(run.final_elbo() / scale);
                        ResultRow {
                            experiment: cfg.experiment.clone(),
                            seed,
                            n,
                            k: params.num_groups(),
                            method,
                            elbo: run.final_elbo(),
                            scaled_elbo: run.final_elbo() / scale,
                            sweeps: run.sweeps(),
                            converged: run.converged,
                            best_restart: fit.best,
                            wall_time,
                            error: None,
                        }
                    }
                    Err(e) => ResultRow {
                        experiment: cfg.experiment.clone(),
                        seed,
                        n,
                        k: params.num_groups(),
                        method,
                        elbo: f64::NAN,
                        scaled_elbo: f64::NAN,
                        sweeps: 0,
                        converged: false,
                        best_restart: 0,
                        wall_time,
                        error: Some(e.to_string()),
                    },
                };
                rows.push(row);
            }
            for (m, f) in finals.iter().enumerate() {
                if let Some(v) = f {
                    by_method[m].push(*v);
                }
            }
            if let [Some(pg), Some(ff)] = finals {
                diffs.push(pg - ff);
            }
        }
        if !diffs.is_empty() {
            gaps.push(GapRow {
                n,
                pg_scaled: mean(&by_method[Method::Pg as usize]),
                ff_scaled: mean(&by_method[Method::Ff as usize]),
                gap: mean(&diffs),
                min_gap: diffs.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
    }
    Ok(FigureElbo { rows, gaps })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub center: f64,
    pub proportion: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    pub edge: bool,
    pub corr: Option<f64>,
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrReport {
    pub n: usize,
    pub seed: u64,
    pub density: f64,
    pub elbo: f64,
    pub sweeps: usize,
    pub pairs: Vec<PairRow>,
    pub undefined: usize,
    /// Ascending centers; a single entry when the correlations do not
    /// spread.
    pub clusters: Vec<ClusterSummary>,
}

fn cluster_summaries(values: &[f64]) -> (Vec<ClusterSummary>, Vec<usize>) {
    match two_means(values) {
        Some(TwoMeans { centers, sizes, labels }) => {
            let total = values.len() as f64;
            let clusters = (0..2)
                .map(|c| ClusterSummary {
                    center: centers[c],
                    proportion: sizes[c] as f64 / total,
                    size: sizes[c],
                })
                .collect();
            (clusters, labels)
        }
        None if values.is_empty() => (Vec::new(), Vec::new()),
        None => (
            vec![ClusterSummary {
                center: values[0],
                proportion: 1.0,
                size: values.len(),
            }],
            vec![0; values.len()],
        ),
    }
}

/// Pair correlations of a partially grouped fit on the first size and seed.
pub fn corr_report(cfg: &ExperimentConfig) -> Result<CorrReport> {
    let n = *cfg.require_sizes()?.first().expect("sizes checked non-empty");
    let seed = cfg.seeds[0];
    let params = cfg.model()?.mmsb_params(n)?;
    if cfg.group >= params.num_groups() {
        return Err(BenchError::Config(format!("group {} out of range", cfg.group)));
    }
    let graph = sample_graph(&params, seed)?;
    let fit = mmsb::fit(
        &params,
        &graph,
        MmsbMethod::PartiallyGrouped,
        &mmsb_init(cfg.init, seed, n),
        cfg.fit_options()?,
        cfg.restarts,
    )?;
    let run = fit.best_run();
    let state = run.state.as_pg().expect("partially grouped fit");
    let corrs = pair_correlations(state, n, cfg.group);
    let defined: Vec<f64> = corrs.iter().filter_map(|c| c.corr).collect();
    let (clusters, labels) = cluster_summaries(&defined);
    let mut labels = labels.into_iter();
    let pairs = corrs
        .iter()
        .map(|c| PairRow {
            i: c.i,
            j: c.j,
            edge: graph.edge(c.i, c.j),
            corr: c.corr,
            cluster: c.corr.and_then(|_| labels.next()),
        })
        .collect();
    Ok(CorrReport {
        n,
        seed,
        density: graph.density(),
        elbo: run.final_elbo(),
        sweeps: run.sweeps(),
        pairs,
        undefined: corrs.len() - defined.len(),
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Smallest exact KL over restarts.
    pub kl: f64,
    pub kl_per_n: f64,
    /// `(DK/5n)·ln(n/(DK) + 2)`.
    pub lower_bound: f64,
    /// `KL / (DK·ln(n/(DK) + 2))`.
    pub ratio: f64,
    pub converged_restarts: usize,
}

impl RateRow {
    pub fn holds(&self) -> bool {
        self.kl_per_n >= self.lower_bound
    }
}

pub fn rate_bound(n: usize, dk: usize) -> f64 {
    let (n, dk) = (n as f64, dk as f64);
    dk / (5.0 * n) * (n / dk + 2.0).ln()
}

/// Best-of-restarts exact collapsed VI against the enumerated posterior.
pub fn rate_check(cfg: &ExperimentConfig) -> Result<Vec<RateRow>> {
    let model = cfg.model()?;
    let opts = cfg.fit_options()?;
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    for &n in cfg.require_sizes()? {
        let params = model.lda_params(n)?;
        let (corpus, _) = lda::sample(&params, data_seed(seed, n))?;
        let inst = CollapsedInstance::lda(&params, &corpus)?;
        let table = enumerate_posterior(&inst)?;
        let mut kl = f64::INFINITY;
        let mut converged_restarts = 0;
        for r in 0..cfg.restarts {
            let init = YInit::Random(init_seed(seed, n).substream(r as u64));
            let fit = collapsed_vi(&inst, CollapsedMode::Exact, &init, opts)?;
            converged_restarts += fit.converged as usize;
            kl = kl.min(exact_kl(&fit.y, &table)?);
        }
        let total = params.total_words();
        let dk = params.num_docs() * params.num_topics();
        rows.push(RateRow {
            n: total,
            d: params.num_docs(),
            k: params.num_topics(),
            kl,
            kl_per_n: kl / total as f64,
            lower_bound: rate_bound(total, dk),
            ratio: kl / (dk as f64 * (total as f64 / dk as f64 + 2.0).ln()),
            converged_restarts,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub seed: u64,
    pub instance: String,
    pub check: &'static str,
    pub residual: f64,
    pub tol: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.residual <= self.tol
    }
}

pub const IDENTITY_TOL: f64 = 1e-8;
const RANDOM_Y: usize = 50;
const RANDOM_Z: usize = 200;

fn uniform_in(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * sample_uniform(rng)
}

fn pick(rng: &mut SeededRng, lo: usize, hi: usize) -> usize {
    lo + ((sample_uniform(rng) * (hi - lo + 1) as f64) as usize).min(hi - lo)
}

/// Random enumerable LDA instance: `D ≤ 2`, `n_d ≤ 6`, `K ≤ 3`, `V ≤ 4`.
pub fn random_lda(seed: RngSeed) -> Result<(LdaParams, lda::LdaCorpus)> {
    let mut rng = seed.rng();
    let d = pick(&mut rng, 1, 2);
    let k = pick(&mut rng, 1, 3);
    let v = pick(&mut rng, 2, 4);
    let lengths: Vec<usize> = (0..d).map(|_| pick(&mut rng, 1, 6)).collect();
    let alpha: Vec<f64> = (0..k).map(|_| uniform_in(&mut rng, 0.2, 2.0)).collect();
    let eta: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let w: Vec<f64> = (0..v).map(|_| uniform_in(&mut rng, 0.05, 1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let params = LdaParams::new(alpha, eta, lengths)?;
    let (corpus, _) = lda::sample(&params, seed.substream(0))?;
    Ok((params, corpus))
}

/// Random MMSB instance with `n = 3`, `K = 2`.
pub fn random_mmsb(seed: RngSeed) -> Result<(MmsbParams, MmsbGraph)> {
    let mut rng = seed.rng();
    let alpha = vec![uniform_in(&mut rng, 0.3, 2.0), uniform_in(&mut rng, 0.3, 2.0)];
    let b: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..2).map(|_| uniform_in(&mut rng, 0.05, 0.95)).collect())
        .collect();
    let params = MmsbParams::new(3, alpha, b)?;
    let (graph, _) = mmsb::sample(&params, seed.substream(0))?;
    Ok((params, graph))
}

/// Exact identities of one instance: the full-model KL gap of each fitted
/// state, the collapsed KL identity, the Jensen bound and `F(G(z)) = f(z)`.
fn instance_checks(
    seed: u64,
    name: &str,
    inst: &CollapsedInstance,
    fitted: &[(String, ProductDistribution, Vec<Vec<f64>>, f64)],
    elbo_offset: f64,
) -> Result<Vec<IdentityCheck>> {
    let table = enumerate_posterior(inst)?;
    let evidence = log_evidence(&table);
    let base = RngSeed(seed).substream(7);
    let mut checks = Vec::new();
    let check = |instance: String, check: &'static str, residual: f64| IdentityCheck {
        seed,
        instance,
        check,
        residual,
        tol: IDENTITY_TOL,
    };
    for (label, y, gamma, elbo) in fitted {
        let kl = full_model_kl(y, gamma, &table)?;
        checks.push(check(
            format!("{name}/{label}"),
            "evidence-gap",
            (evidence - (elbo + elbo_offset) - kl).abs(),
        ));
    }
    let mut lemma = 0.0f64;
    let mut jensen = 0.0f64;
    for r in 0..RANDOM_Y {
        let y = YInit::Random(base.substream(r as u64)).build(inst)?;
        let kl = exact_kl(&y, &table)?;
        lemma = lemma.max((kl - (table.log_partition_mu() - exact_objective(inst, &y)?)).abs());
        jensen = jensen.max(eval_f(inst, &y)? - expected_energy(inst, &y)?);
    }
    checks.push(check(name.into(), "collapsed-kl", lemma));
    checks.push(check(name.into(), "jensen", jensen.max(0.0)));
    let mut rng = base.substream(u64::MAX).rng();
    let mut one_hot = 0.0f64;
    let c = inst.num_categories();
    for _ in 0..RANDOM_Z {
        let z: Vec<usize> = (0..inst.num_sites()).map(|_| pick(&mut rng, 0, c - 1)).collect();
        let upsilon = inst.energy(&z)?;
        if upsilon.is_finite() {
            let f = upsilon - inst.log_base(&z) - inst.log_norm_total();
            one_hot = one_hot.max((energy_f(inst, &z)? - f).abs());
        }
    }
    checks.push(check(name.into(), "one-hot", one_hot));
    Ok(checks)
}

/// Runs the exact identities on one random instance per seed; even seeds
/// draw LDA instances, odd seeds MMSB. `elbo_offset` is added to every
/// fitted ELBO (zero outside harness self-tests).
pub fn identity_suite(cfg: &ExperimentConfig, elbo_offset: f64) -> Result<Vec<IdentityCheck>> {
    let opts = cfg.fit_options()?;
    let mut checks = Vec::new();
    for &seed in &cfg.seeds {
        let rs = RngSeed(seed).substream(0x1d);
        if seed % 2 == 0 {
            let (params, corpus) = random_lda(rs)?;
            let inst = CollapsedInstance::lda(&params, &corpus)?;
            let fit = lda::fit(&params, &corpus, &LdaInit::Jittered(rs.substream(1)), opts)?;
            let y = ProductDistribution::from_lda(&fit.state)?;
            let fitted = vec![("cavi".to_string(), y, fit.state.gamma.clone(), fit.final_elbo())];
            let name = format!(
                "lda D={} K={} V={} n_d={:?}",
                params.num_docs(),
                params.num_topics(),
                params.vocab_size(),
                params.doc_lengths()
            );
            checks.extend(instance_checks(seed, &name, &inst, &fitted, elbo_offset)?);
        } else {
            let (params, graph) = random_mmsb(rs)?;
            let inst = CollapsedInstance::mmsb(&params, &graph)?;
            let mut fitted = Vec::new();
            for method in [MmsbMethod::PartiallyGrouped, MmsbMethod::FullyFactorized] {
                let run = mmsb::fit_once(&params, &graph, method, &MmsbInit::Jittered(rs.substream(1)), opts)?;
                let y = match &run.state {
                    MmsbState::Pg(s) => ProductDistribution::from_pg(s)?,
                    MmsbState::Ff(s) => ProductDistribution::from_ff(s)?,
                };
                let gamma = run.state.gamma().chunks(2).map(<[f64]>::to_vec).collect();
                fitted.push((method.label().to_string(), y, gamma, run.final_elbo()));
            }
            checks.extend(instance_checks(seed, "mmsb n=3 K=2", &inst, &fitted, elbo_offset)?);
        }
    }
    Ok(checks)
}

/// Fits used by `fit-lda` when no corpus file is given.
pub fn lda_from_config(cfg: &ExperimentConfig) -> Result<(LdaParams, lda::LdaCorpus)> {
    let model = cfg.model()?;
    let size = cfg.sizes.first().copied().unwrap_or(0);
    if size == 0
        && !matches!(
            model,
            ModelSpec::Lda {
                doc_lengths: Some(_),
                ..
            }
        )
    {
        return Err(BenchError::Config("LDA model needs a size or doc_lengths".into()));
    }
    let params = model.lda_params(size)?;
    let (corpus, _) = lda::sample(&params, data_seed(cfg.seeds[0], size))?;
    Ok((params, corpus))
}

pub fn mmsb_from_config(cfg: &ExperimentConfig) -> Result<(MmsbParams, MmsbGraph)> {
    let n = *cfg.require_sizes()?.first().expect("sizes checked non-empty");
    let params = cfg.model()?.mmsb_params(n)?;
    let graph = sample_graph(&params, cfg.seeds[0])?;
    Ok((params, graph))
}

/// Initial state policy of a config as an engine init for seed `seed`.
pub fn lda_init(cfg: &ExperimentConfig, seed: u64, size: usize) -> LdaInit {
    match cfg.init {
        InitPolicy::Jittered => LdaInit::Jittered(init_seed(seed, size)),
        InitPolicy::Symmetric => LdaInit::Symmetric,
    }
}

pub fn mmsb_init_for(cfg: &ExperimentConfig, seed: u64, n: usize) -> MmsbInit {
    mmsb_init(cfg.init, seed, n)
}
