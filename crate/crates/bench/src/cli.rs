//! Command-line interface.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfvi_core::functionals::CollapsedInstance;
use mfvi_core::lda;
use mfvi_core::mmsb::{self, pair_correlations};
use mfvi_core::oracle::{STORE_CAP, enumerate_posterior, log_evidence};

use crate::config::{ExperimentConfig, InitPolicy, Method, ModelSpec};
use crate::error::{BenchError, Result};
use crate::experiments::{self, data_seed};
use crate::formats::{CorpusFile, GraphFile, LdaFitExport, MmsbFitExport, read_json, write_json};
use crate::report::{Provenance, Table, fmt_f64, fmt_opt};

/// Largest posterior written out by `oracle`.
const DUMP_CAP: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "mfvi-bench", version, about = "Mean-field VI experiments for LDA and MMSB")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw corpora or graphs and write them as JSON.
    Sample,
    /// Fit LDA by coordinate ascent.
    FitLda,
    /// Fit MMSB with the partially grouped and/or fully factorized family.
    FitMmsb,
    /// Compare converged PG and FF ELBOs across graph sizes.
    FigureElbo,
    /// Sender/receiver correlations of a PG fit, clustered in two.
    CorrReport,
    /// Exact collapsed KL against the LDA rate lower bound.
    RateCheck,
    /// Exact identities against the enumeration oracle.
    IdentitySuite {
        /// Adds a constant to every fitted ELBO, to check the suite catches it.
        #[arg(long, default_value_t = 0.0, hide = true)]
        inject_elbo_offset: f64,
    },
    /// Enumerate a tiny posterior.
    Oracle,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::FitLda => "fit-lda",
            Command::FitMmsb => "fit-mmsb",
            Command::FigureElbo => "figure-elbo",
            Command::CorrReport => "corr-report",
            Command::RateCheck => "rate-check",
            Command::IdentitySuite { .. } => "identity-suite",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pg,
    Ff,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Jittered,
    Symmetric,
}

#[derive(Debug, Default, Args)]
pub struct Common {
    /// JSON experiment config; defaults to the subcommand's preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replaces the config's seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replaces the config's size grid; repeatable.
    #[arg(long = "size", global = true)]
    pub sizes: Vec<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_sweeps: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub method: Option<MethodArg>,
    #[arg(long, value_enum, global = true)]
    pub init: Option<InitArg>,
    /// Corpus or graph JSON to fit instead of sampling one.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub failed_checks: usize,
}

pub fn resolve_config(command: &Command, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(command.name())
            .ok_or_else(|| BenchError::Usage(format!("{} needs --config", command.name())))?,
    };
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if !common.sizes.is_empty() {
        cfg.sizes = common.sizes.clone();
    }
    if let Some(r) = common.restarts {
        cfg.restarts = r;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(m) = common.max_sweeps {
        cfg.max_sweeps = m;
    }
    if let Some(m) = common.method {
        cfg.methods = match m {
            MethodArg::Pg => vec![Method::Pg],
            MethodArg::Ff => vec![Method::Ff],
            MethodArg::Both => vec![Method::Pg, Method::Ff],
        };
    }
    if let Some(i) = common.init {
        cfg.init = match i {
            InitArg::Jittered => InitPolicy::Jittered,
            InitArg::Symmetric => InitPolicy::Symmetric,
        };
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(&cli.command, &cli.common)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&out).map_err(|e| BenchError::io(&out, e))?;
    let mut ctx = Context {
        provenance: Provenance {
            config_hash: cfg.hash(),
            seeds: cfg.seeds.clone(),
        },
        out,
        files: Vec::new(),
        summary: String::new(),
        failed: 0,
    };
    match &cli.command {
        Command::Sample => sample(&cfg, &mut ctx)?,
        Command::FitLda => fit_lda(&cfg, cli.common.input.as_deref(), &mut ctx)?,
        Command::FitMmsb => fit_mmsb(&cfg, cli.common.input.as_deref(), &mut ctx)?,
        Command::FigureElbo => figure_elbo(&cfg, &mut ctx)?,
        Command::CorrReport => corr_report(&cfg, &mut ctx)?,
        Command::RateCheck => rate_check(&cfg, &mut ctx)?,
        Command::IdentitySuite { inject_elbo_offset } => identity_suite(&cfg, *inject_elbo_offset, &mut ctx)?,
        Command::Oracle => oracle(&cfg, cli.common.input.as_deref(), &mut ctx)?,
    }
    Ok(Outcome {
        summary: ctx.summary,
        files: ctx.files,
        failed_checks: ctx.failed,
    })
}

struct Context {
    provenance: Provenance,
    out: PathBuf,
    files: Vec<PathBuf>,
    summary: String,
    failed: usize,
}

impl Context {
    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.out.join(name);
        table.write(&path, &self.provenance)?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.out.join(name);
        write_json(&path, value)?;
        self.files.push(path);
        Ok(())
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }
}

fn sample(cfg: &ExperimentConfig, ctx: &mut Context) -> Result<()> {
    let model = cfg.model()?;
    for &size in cfg.require_sizes()? {
        for &seed in &cfg.seeds {
            match model {
                ModelSpec::Lda { .. } => {
                    let params = model.lda_params(size)?;
                    let (corpus, _) = lda::sample(&params, data_seed(seed, size))?;
                    ctx.json(
                        &format!("corpus_n{size}_seed{seed}.json"),
                        &CorpusFile::new(&params, &corpus),
                    )?;
                }
                ModelSpec::Mmsb { .. } => {
                    let params = model.mmsb_params(size)?;
                    let graph = experiments::sample_graph(&params, seed)?;
                    ctx.json(
                        &format!("graph_n{size}_seed{seed}.json"),
                        &GraphFile::new(&params, &graph),
                    )?;
                }
            }
        }
    }
    let n = ctx.files.len();
    ctx.line(format!("wrote {n} data file(s)"));
    Ok(())
}

fn trace_table(traces: &[(String, usize, &[f64])]) -> Table {
    let mut t = Table::new(vec!["method", "restart", "sweep", "elbo"]);
    for (label, restart, trace) in traces {
        for (s, &e) in trace.iter().enumerate() {
            t.push(vec![
                label.clone(),
                restart.to_string(),
                (s + 1).to_string(),
                fmt_f64(e),
            ]);
        }
    }
    t
}

fn fit_lda(cfg: &ExperimentConfig, input: Option<&Path>, ctx: &mut Context) -> Result<()> {
    let (params, corpus) = match input {
        Some(path) => read_json::<CorpusFile>(path)?.to_model()?,
        None => experiments::lda_from_config(cfg)?,
    };
    let size = params.total_words();
    let init = experiments::lda_init(cfg, cfg.seeds[0], size);
    let fit = lda::fit(&params, &corpus, &init, cfg.fit_options()?)?;
    ctx.json("lda_fit.json", &LdaFitExport::from(&fit))?;
    ctx.table("lda_elbo.csv", &trace_table(&[("cavi".into(), 0, &fit.elbo_trace)]))?;
    ctx.line(format!(
        "lda: D={} K={} words={} elbo={} sweeps={} converged={}",
        params.num_docs(),
        params.num_topics(),
        size,
        fmt_f64(fit.final_elbo()),
        fit.elbo_trace.len(),
        fit.converged
    ));
    Ok(())
}

fn fit_mmsb(cfg: &ExperimentConfig, input: Option<&Path>, ctx: &mut Context) -> Result<()> {
    let (params, graph) = match input {
        Some(path) => read_json::<GraphFile>(path)?.to_model()?,
        None => experiments::mmsb_from_config(cfg)?,
    };
    let n = params.num_nodes();
    let init = experiments::mmsb_init_for(cfg, cfg.seeds[0], n);
    let opts = cfg.fit_options()?;
    for &method in &cfg.methods {
        let fit = mmsb::fit(&params, &graph, method.into(), &init, opts, cfg.restarts)?;
        let label = mfvi_core::mmsb::MmsbMethod::from(method).label();
        ctx.json(&format!("mmsb_fit_{label}.json"), &MmsbFitExport::new(&params, &fit))?;
        let traces: Vec<(String, usize, &[f64])> = fit
            .runs
            .iter()
            .enumerate()
            .map(|(r, run)| (label.to_string(), r, run.elbo_trace.as_slice()))
            .collect();
        ctx.table(&format!("mmsb_elbo_{label}.csv"), &trace_table(&traces))?;
        if let Some(state) = fit.best_run().state.as_pg() {
            let corrs = pair_correlations(state, n, cfg.group);
            let defined: Vec<f64> = corrs.iter().filter_map(|c| c.corr).collect();
            let labels = mmsb::two_means(&defined).map(|t| t.labels);
            let mut labels = labels.into_iter().flatten();
            let mut t = Table::new(vec!["i", "j", "corr", "cluster"]);
            for c in &corrs {
                let cluster = c.corr.and_then(|_| labels.next());
                t.push(vec![
                    (c.i + 1).to_string(),
                    (c.j + 1).to_string(),
                    fmt_opt(c.corr),
                    cluster.map(|k| k.to_string()).unwrap_or_default(),
                ]);
            }
            ctx.table("mmsb_correlations.csv", &t)?;
        }
        ctx.line(format!(
            "{label}: n={n} elbo={} scaled={} best_restart={} sweeps={}",
            fmt_f64(fit.best_elbo()),
            fmt_f64(fit.best_elbo() / (n * n) as f64),
            fit.best,
            fit.best_run().sweeps()
        ));
    }
    Ok(())
}

fn figure_elbo(cfg: &ExperimentConfig, ctx: &mut Context) -> Result<()> {
    let fig = experiments::figure_elbo(cfg)?;
    let mut rows = Table::new(vec![
        "experiment",
        "seed",
        "n",
        "K",
        "method",
        "elbo",
        "scaled_elbo",
        "sweeps",
        "converged",
        "best_restart",
        "error",
    ]);
    let mut timings = Table::new(vec!["seed", "n", "method", "wall_seconds"]);
    for r in &fig.rows {
        let method = mfvi_core::mmsb::MmsbMethod::from(r.method).label().to_string();
        rows.push(vec![
            r.experiment.clone(),
            r.seed.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            method.clone(),
            fmt_f64(r.elbo),
            fmt_f64(r.scaled_elbo),
            r.sweeps.to_string(),
            r.converged.to_string(),
            r.best_restart.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
        timings.push(vec![
            r.seed.to_string(),
            r.n.to_string(),
            method,
            format!("{:.3}", r.wall_time.as_secs_f64()),
        ]);
    }
    let mut gaps = Table::new(vec!["n", "pg_scaled", "ff_scaled", "gap", "min_gap"]);
    for g in &fig.gaps {
        gaps.push(vec![
            g.n.to_string(),
            fmt_f64(g.pg_scaled),
            fmt_f64(g.ff_scaled),
            fmt_f64(g.gap),
            fmt_f64(g.min_gap),
        ]);
        ctx.line(format!(
            "n={} scaled gap {} (min over seeds {})",
            g.n,
            fmt_f64(g.gap),
            fmt_f64(g.min_gap)
        ));
    }
    ctx.table("figure_elbo.csv", &rows)?;
    ctx.table("figure_elbo_gaps.csv", &gaps)?;
    // wall times vary run to run, so they stay out of the result tables
    ctx.table("timings.csv", &timings)?;
    ctx.failed += fig.failures();
    if !fig.gaps.is_empty() {
        if !fig.gaps_positive() {
            ctx.failed += 1;
            ctx.line("FAIL: PG does not beat FF at every size and seed");
        }
        match fig.gap_spread() {
            Some(s) if s < 2.0 => ctx.line(format!("gap spread {s:.3} (< 2)")),
            Some(s) => {
                ctx.failed += 1;
                ctx.line(format!("FAIL: gap spread {s:.3} (≥ 2)"));
            }
            None => {}
        }
    }
    Ok(())
}

fn corr_report(cfg: &ExperimentConfig, ctx: &mut Context) -> Result<()> {
    let report = experiments::corr_report(cfg)?;
    let mut pairs = Table::new(vec!["i", "j", "x", "corr", "cluster"]);
    for p in &report.pairs {
        pairs.push(vec![
            (p.i + 1).to_string(),
            (p.j + 1).to_string(),
            (p.edge as u8).to_string(),
            fmt_opt(p.corr),
            p.cluster.map(|c| c.to_string()).unwrap_or_default(),
        ]);
    }
    let mut clusters = Table::new(vec!["cluster", "center", "proportion", "size"]);
    for (c, s) in report.clusters.iter().enumerate() {
        clusters.push(vec![
            c.to_string(),
            fmt_f64(s.center),
            fmt_f64(s.proportion),
            s.size.to_string(),
        ]);
    }
    ctx.table("corr_pairs.csv", &pairs)?;
    ctx.table("corr_clusters.csv", &clusters)?;
    let mut line = format!(
        "n={} density={:.4} undefined={} elbo={}",
        report.n,
        report.density,
        report.undefined,
        fmt_f64(report.elbo)
    );
    for s in &report.clusters {
        let _ = write!(line, " | center {:+.4} share {:.3}", s.center, s.proportion);
    }
    ctx.line(line);
    Ok(())
}

fn rate_check(cfg: &ExperimentConfig, ctx: &mut Context) -> Result<()> {
    let rows = experiments::rate_check(cfg)?;
    let mut t = Table::new(vec![
        "n",
        "D",
        "K",
        "kl",
        "kl_per_n",
        "lower_bound",
        "ratio",
        "holds",
        "converged_restarts",
    ]);
    for r in &rows {
        t.push(vec![
            r.n.to_string(),
            r.d.to_string(),
            r.k.to_string(),
            fmt_f64(r.kl),
            fmt_f64(r.kl_per_n),
            fmt_f64(r.lower_bound),
            fmt_f64(r.ratio),
            r.holds().to_string(),
            r.converged_restarts.to_string(),
        ]);
        ctx.line(format!(
            "{} n={}: KL/n={} bound={}",
            if r.holds() { "ok  " } else { "FAIL" },
            r.n,
            fmt_f64(r.kl_per_n),
            fmt_f64(r.lower_bound)
        ));
        if !r.holds() {
            ctx.failed += 1;
        }
    }
    ctx.table("rate_check.csv", &t)?;
    Ok(())
}

fn identity_suite(cfg: &ExperimentConfig, offset: f64, ctx: &mut Context) -> Result<()> {
    let checks = experiments::identity_suite(cfg, offset)?;
    let mut t = Table::new(vec!["seed", "instance", "check", "residual", "tol", "passed"]);
    for c in &checks {
        t.push(vec![
            c.seed.to_string(),
            c.instance.clone(),
            c.check.to_string(),
            fmt_f64(c.residual),
            fmt_f64(c.tol),
            c.passed().to_string(),
        ]);
        if !c.passed() {
            ctx.failed += 1;
            ctx.line(format!(
                "FAIL seed {} {} {}: residual {}",
                c.seed,
                c.instance,
                c.check,
                fmt_f64(c.residual)
            ));
        }
    }
    ctx.table("identity_suite.csv", &t)?;
    let worst = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    ctx.line(format!(
        "{} checks, {} failed, worst residual {}",
        checks.len(),
        ctx.failed,
        fmt_f64(worst)
    ));
    Ok(())
}

fn oracle(cfg: &ExperimentConfig, input: Option<&Path>, ctx: &mut Context) -> Result<()> {
    let inst = match input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
            if let Ok(graph) = serde_json::from_str::<GraphFile>(&text) {
                let (p, g) = graph.to_model()?;
                CollapsedInstance::mmsb(&p, &g)?
            } else {
                let corpus: CorpusFile =
                    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
                let (p, c) = corpus.to_model()?;
                CollapsedInstance::lda(&p, &c)?
            }
        }
        None => match cfg.model()? {
            ModelSpec::Lda { .. } => {
                let (p, c) = experiments::lda_from_config(cfg)?;
                CollapsedInstance::lda(&p, &c)?
            }
            ModelSpec::Mmsb { .. } => {
                let (p, g) = experiments::mmsb_from_config(cfg)?;
                CollapsedInstance::mmsb(&p, &g)?
            }
        },
    };
    let table = enumerate_posterior(&inst)?;
    if table.num_states() <= DUMP_CAP && (table.num_states() as f64) <= STORE_CAP {
        let mut t = Table::new(vec!["assignment", "log_weight", "log_prob"]);
        table.for_each(|z, log_p| {
            let code: Vec<String> = z.iter().map(|c| (c + 1).to_string()).collect();
            t.push(vec![
                code.join("-"),
                fmt_f64(log_p + table.log_partition()),
                fmt_f64(log_p),
            ]);
            Ok(())
        })?;
        ctx.table("posterior.csv", &t)?;
    }
    ctx.line(format!(
        "states={} log_partition={} log_evidence={}",
        table.num_states(),
        fmt_f64(table.log_partition()),
        fmt_f64(log_evidence(&table))
    ));
    Ok(())
}
