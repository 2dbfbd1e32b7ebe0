//! Command-line front end. Exit codes: 0 ok, 2 configuration error, 3 runtime error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{env_from_name, resolve_workers, RunConfig};
use crate::environments::{EnvSpec, NoiseConfig, RewardShape};
use crate::error::{Error, Result};
use crate::evolution::{train_es, EsTrace};
use crate::infometrics::{channel_capacity, compute_report, verify_prop1, BinCheck, MetricOptions, MetricsReport};
use crate::plot::{line_chart, scatter_chart, Series};
use crate::policies::{Policy, PolicySpec};
use crate::rollout::{collect_returns, merge, with_workers, ReturnMatrix, SamplingPlan};
use crate::scoring::{normalized_score, random_sampling_score, run_bag, BagConfig, BagResult, ScoreInputs};
use crate::stats::{
    correlate_all, CorrelationEntry, MetricTable, TABLE_CARTPOLE_NOISE, TABLE_CHANNEL_CAPACITY, TABLE_POOLED,
    TABLE_SHAPING,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pic", version, about = "Task difficulty from random policy sampling")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Environment name (synthetic, cartpole, pendulum, mountain_car,
    /// mountain_car_continuous, acrobot, pointmaze, constant).
    #[arg(long, global = true)]
    pub env: Option<String>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true)]
    pub u_init: Option<f64>,
    #[arg(long, global = true)]
    pub u_dyn: Option<f64>,
    /// Parameter particles.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Episodes per particle.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = crate::config::WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Proceed with a warning when bins do not exceed episodes per particle.
    #[arg(long, global = true)]
    pub allow_few_bins: bool,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub svg: bool,
    #[arg(long, global = true)]
    pub save_params: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample returns and compute every metric.
    Estimate,
    /// Run the architecture bag, pool the matrices, and report per-prior maxima.
    Sweep,
    /// Evolution strategies with per-epoch metrics.
    TrainEs,
    /// Random-sampling and algorithm-bag normalized scores.
    Score,
    /// Correlate metric columns of a table against the scores.
    Correlate {
        #[arg(long)]
        table: Option<PathBuf>,
        /// Shipped table: pooled, channel_capacity, shaping or cartpole_noise.
        #[arg(long, default_value = "pooled")]
        builtin: String,
        /// Row keys to leave out.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
    },
    /// PIC and POIC for every point-maze reward variant.
    ShapingSweep,
    /// Check the misordering bound for two Gaussian return distributions.
    Prop1 {
        #[arg(long)]
        mu1: f64,
        #[arg(long)]
        sigma1: f64,
        #[arg(long)]
        mu2: f64,
        #[arg(long)]
        sigma2: f64,
        /// Returns sampled per policy.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
}

/// Failure tagged with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

fn config_err(error: Error) -> CliError {
    CliError { code: EXIT_CONFIG, error }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::InvalidSpec(_)
            | Error::SpecMismatch(_)
            | Error::DimensionMismatch { .. }
            | Error::TooFewBins { .. }
            | Error::NonPositiveTemperature(_)
            | Error::Toml(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        CliError { code, error }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Envelope for every JSON output.
#[derive(Debug, Serialize)]
pub struct Envelope<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    pub result: T,
}

/// SHA-256 over the bit patterns of all returns, row-major.
pub fn matrix_digest(m: &ReturnMatrix) -> String {
    let mut h = Sha256::new();
    h.update((m.n() as u64).to_le_bytes());
    h.update((m.m() as u64).to_le_bytes());
    for v in m.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// Applies flags over the file configuration.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &common.env {
        let mut noise = NoiseConfig::default();
        if let Some(u) = common.u_init {
            noise.u_init = u;
        }
        if let Some(u) = common.u_dyn {
            noise.u_dyn = u;
        }
        cfg.env = Some(env_from_name(name, common.horizon, noise)?);
    } else if let (Some(h), Some(env)) = (common.horizon, &cfg.env) {
        let mut id = env.id.clone();
        match &mut id {
            crate::environments::EnvId::Synthetic { horizon }
            | crate::environments::EnvId::Constant { horizon, .. } => *horizon = h,
            _ if env.horizon == h => {}
            _ => return Err(Error::SpecMismatch(format!("{} has horizon {}", env.name(), env.horizon))),
        }
        cfg.env = Some(EnvSpec::new(id)?);
    }
    if let Some(n) = common.n {
        cfg.plan.n = n;
    }
    if let Some(m) = common.m {
        cfg.plan.m = m;
    }
    if let Some(s) = common.seed {
        cfg.plan.seed = s;
    }
    if common.workers.is_some() {
        cfg.plan.workers = common.workers;
    }
    if let Some(b) = common.bins {
        cfg.metrics.bins = b;
    }
    if common.allow_few_bins {
        cfg.metrics.bin_check = BinCheck::Warn;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = Some(o.clone());
    }
    cfg.output.svg |= common.svg;
    cfg.output.save_params |= common.save_params;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("pic-out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn envelope<T: Serialize>(
    cfg: &RunConfig,
    command: &'static str,
    input: Option<String>,
    result: T,
) -> Result<Envelope<T>> {
    Ok(Envelope {
        tool: "pic",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_digest: cfg.digest()?,
        input_digest: input,
        result,
    })
}

/// Entry point shared by the binary and tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.error);
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(&cli.common).map_err(config_err)?;
    let workers = resolve_workers(cfg.plan.workers);
    with_workers(workers, || dispatch(&cli.command, &cfg)).map_err(config_err)?
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> CliResult<()> {
    match cmd {
        Command::Estimate => cmd_estimate(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::TrainEs => cmd_train_es(cfg),
        Command::Score => cmd_score(cfg),
        Command::Correlate { table, builtin, exclude } => cmd_correlate(cfg, table.as_deref(), builtin, exclude),
        Command::ShapingSweep => cmd_shaping_sweep(cfg),
        Command::Prop1 { mu1, sigma1, mu2, sigma2, samples, trials } => {
            cmd_prop1(cfg, *mu1, *sigma1, *mu2, *sigma2, *samples, *trials)
        }
    }
}

fn collect(env: &EnvSpec, policy: &PolicySpec, plan: &SamplingPlan, save_params: bool) -> Result<ReturnMatrix> {
    let mut m = collect_returns(env, policy, plan)?;
    if save_params {
        m.params = Some(crate::rollout::sample_particles(env, policy, plan)?);
    }
    Ok(m)
}

fn cmd_estimate(cfg: &RunConfig) -> CliResult<()> {
    let env = cfg.env().map_err(config_err)?;
    let policy = cfg.policy()?;
    let plan = cfg.plan.sampling_plan();
    plan.validate()?;
    let mat = collect(env, &policy, &plan, cfg.output.save_params)?;
    let report = compute_report(&mat, &cfg.metrics)?;
    let dir = out_dir(cfg)?;
    mat.write_csv(&dir.join("returns.csv"))?;
    write_json(&dir.join("report.json"), &envelope(cfg, "estimate", Some(matrix_digest(&mat)), &report)?)?;
    println!(
        "{} pic={:.6} poic={:.6} eta*={:.6e} h_r={:.6} h_r|theta={:.6} variance={:.6}",
        report.provenance.env,
        report.pic,
        report.poic,
        report.eta_star,
        report.h_r,
        report.h_r_given_theta,
        report.normalized_variance
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub per_prior: Vec<MetricsReport>,
    pub pooled: MetricsReport,
    pub channel_capacity_pic: f64,
    pub channel_capacity_poic: f64,
    #[serde(skip)]
    pub pooled_matrix: ReturnMatrix,
}

/// Collects each policy spec with its own stream group, then pools.
pub fn run_sweep(
    env: &EnvSpec,
    specs: &[PolicySpec],
    plan: &SamplingPlan,
    metrics: &MetricOptions,
) -> Result<SweepResult> {
    if specs.is_empty() {
        return Err(Error::Empty("architecture bag"));
    }
    let mut mats = Vec::with_capacity(specs.len());
    let mut per_prior = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let m = collect_returns(env, spec, &plan.with_group(k as u64))?;
        per_prior.push(compute_report(&m, metrics)?);
        mats.push(m);
    }
    let pooled_matrix = merge(&mats)?;
    let pooled = compute_report(&pooled_matrix, metrics)?;
    let (cc_pic, cc_poic) = channel_capacity(&per_prior)?;
    Ok(SweepResult { per_prior, pooled, channel_capacity_pic: cc_pic, channel_capacity_poic: cc_poic, pooled_matrix })
}

fn cmd_sweep(cfg: &RunConfig) -> CliResult<()> {
    let env = cfg.env().map_err(config_err)?;
    let plan = cfg.plan.sampling_plan();
    plan.validate()?;
    let specs = cfg.bag.specs();
    let res = run_sweep(env, &specs, &plan, &cfg.metrics)?;
    let dir = out_dir(cfg)?;
    let mut w = csv::Writer::from_path(dir.join("per_prior.csv")).map_err(Error::from)?;
    w.write_record(["policy", "pic", "poic", "eta_star", "h_r", "h_r_given_theta", "normalized_variance"])
        .map_err(Error::from)?;
    for (spec, r) in specs.iter().zip(&res.per_prior) {
        w.write_record([
            spec.label(),
            format!("{:?}", r.pic),
            format!("{:?}", r.poic),
            format!("{:?}", r.eta_star),
            format!("{:?}", r.h_r),
            format!("{:?}", r.h_r_given_theta),
            format!("{:?}", r.normalized_variance),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    res.pooled_matrix.write_csv(&dir.join("pooled_returns.csv"))?;
    write_json(&dir.join("sweep.json"), &envelope(cfg, "sweep", Some(matrix_digest(&res.pooled_matrix)), &res)?)?;
    println!(
        "{} pooled pic={:.6} poic={:.6} | channel capacity pic={:.6} poic={:.6} | {} priors",
        res.pooled.provenance.env,
        res.pooled.pic,
        res.pooled.poic,
        res.channel_capacity_pic,
        res.channel_capacity_poic,
        specs.len()
    );
    Ok(())
}

fn mu_label(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

fn cmd_train_es(cfg: &RunConfig) -> CliResult<()> {
    let env = cfg.env().map_err(config_err)?;
    let policy = cfg.policy()?;
    let dir = out_dir(cfg)?;
    let dim = Policy::new(
        &policy.with_prior(crate::policies::PriorSpec::standard_normal()),
        env.state_dim,
        &env.action_space,
    )?
    .param_count();
    let runs: Vec<(String, Vec<f64>)> = if cfg.es.mu0_sweep.is_empty() {
        vec![("es_trace".into(), cfg.es.cfg.mu0.clone())]
    } else {
        cfg.es.mu0_sweep.iter().map(|&v| (format!("es_trace_mu{}", mu_label(v)), vec![v; dim])).collect()
    };
    let mut traces: Vec<(String, EsTrace)> = Vec::new();
    for (name, mu0) in runs {
        let es = crate::evolution::EsConfig { mu0, ..cfg.es.cfg.clone() };
        let mat_dir = dir.join(&name);
        if cfg.output.save_matrices {
            fs::create_dir_all(&mat_dir).map_err(Error::from)?;
        }
        let mut save_err = None;
        let trace = train_es(env, &policy, &es, cfg.plan.seed, Some(&cfg.metrics), |epoch, m| {
            if cfg.output.save_matrices && save_err.is_none() {
                if let Err(e) = m.write_csv(&mat_dir.join(format!("epoch_{epoch}.csv"))) {
                    save_err = Some(e);
                }
            }
        })?;
        if let Some(e) = save_err {
            return Err(e.into());
        }
        trace.write_csv(BufWriter::new(File::create(dir.join(format!("{name}.csv"))).map_err(Error::from)?))?;
        let last = trace.records.last();
        println!(
            "{name}: epochs={} final_mean_return={} reached_0.9_at={}",
            trace.records.len(),
            last.map_or("-".into(), |r| format!("{:.4}", r.mean_return)),
            trace.epochs_to_reach(0.9).map_or("never".into(), |e| e.to_string())
        );
        traces.push((name, trace));
    }
    if cfg.output.svg {
        let ret: Vec<Series> = traces
            .iter()
            .map(|(n, t)| Series::new(n.clone(), t.records.iter().map(|r| (r.epoch as f64, r.mean_return)).collect()))
            .collect();
        let poic: Vec<Series> = traces
            .iter()
            .map(|(n, t)| {
                Series::new(n.clone(), t.records.iter().map(|r| (r.epoch as f64, r.poic.unwrap_or(f64::NAN))).collect())
            })
            .collect();
        fs::write(dir.join("es_return.svg"), line_chart("Average return", "epoch", "return", &ret))
            .map_err(Error::from)?;
        fs::write(dir.join("es_poic.svg"), line_chart("POIC", "epoch", "nats", &poic)).map_err(Error::from)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScoreOutput {
    score_algorithm: f64,
    score_random: f64,
    r_ave_algo: f64,
    r_max_algo: f64,
    r_ave_rand: f64,
    r_min_rand: f64,
    r_max_rand: f64,
    bag: BagResult,
}

fn cmd_score(cfg: &RunConfig) -> CliResult<()> {
    let env = cfg.env().map_err(config_err)?;
    let policy = cfg.policy()?;
    let plan = cfg.plan.sampling_plan();
    plan.validate()?;
    let mat = collect_returns(env, &policy, &plan)?;
    let bag_cfg = cfg.score.clone().unwrap_or_else(BagConfig::desk);
    let bag = run_bag(env, &policy, &bag_cfg)?;
    let score_algorithm = normalized_score(&ScoreInputs {
        r_ave: bag.r_ave_algo,
        r_min_rand: mat.r_min,
        r_max_rand: mat.r_max,
        r_max_algo: Some(bag.r_max_algo),
    })?;
    let score_random = random_sampling_score(&mat, Some(bag.r_max_algo))?;
    let dir = out_dir(cfg)?;
    bag.write_csv(BufWriter::new(File::create(dir.join("bag.csv")).map_err(Error::from)?))?;
    let out = ScoreOutput {
        score_algorithm,
        score_random,
        r_ave_algo: bag.r_ave_algo,
        r_max_algo: bag.r_max_algo,
        r_ave_rand: mat.mean(),
        r_min_rand: mat.r_min,
        r_max_rand: mat.r_max,
        bag,
    };
    write_json(&dir.join("score.json"), &envelope(cfg, "score", Some(matrix_digest(&mat)), &out)?)?;
    println!("{} score(algorithm)={:.4} score(random)={:.4}", env.name(), score_algorithm, score_random);
    Ok(())
}

fn builtin_table(name: &str) -> Result<&'static str> {
    Ok(match name {
        "pooled" => TABLE_POOLED,
        "channel_capacity" => TABLE_CHANNEL_CAPACITY,
        "shaping" => TABLE_SHAPING,
        "cartpole_noise" => TABLE_CARTPOLE_NOISE,
        other => return Err(Error::InvalidSpec(format!("unknown shipped table `{other}`"))),
    })
}

/// Correlations of a table, after dropping excluded rows.
pub fn correlate_table(text: &str, exclude: &[String]) -> Result<Vec<CorrelationEntry>> {
    let table = MetricTable::parse(text)?.without(exclude);
    correlate_all(&table)
}

fn cmd_correlate(cfg: &RunConfig, table: Option<&Path>, builtin: &str, exclude: &[String]) -> CliResult<()> {
    let text = match table {
        Some(p) => fs::read_to_string(p).map_err(|e| config_err(e.into()))?,
        None => builtin_table(builtin)?.to_string(),
    };
    let parsed = MetricTable::parse(&text)?.without(exclude);
    let entries = correlate_all(&parsed)?;
    for e in &entries {
        println!("{:<8} {:<16} R={:.4} p={:.4} n={}", e.target, e.metric, e.result.r, e.result.p_value, e.result.n);
    }
    let dir = out_dir(cfg)?;
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    write_json(&dir.join("correlations.json"), &envelope(cfg, "correlate", Some(digest), &entries)?)?;
    if cfg.output.svg {
        if let (Ok(x), Ok(y)) = (parsed.column("poic"), parsed.column("score_a")) {
            let s = Series::new("environments", x.into_iter().zip(y).collect());
            fs::write(dir.join("poic_vs_score.svg"), scatter_chart("POIC vs score", "POIC", "Score(A)", &[s]))
                .map_err(Error::from)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapingRow {
    pub family: String,
    pub params: String,
    pub report: MetricsReport,
}

/// Every reward variant on the same sampled trajectories (shared streams).
pub fn run_shaping(
    variants: &[RewardShape],
    policy: &PolicySpec,
    plan: &SamplingPlan,
    metrics: &MetricOptions,
) -> Result<Vec<ShapingRow>> {
    variants
        .iter()
        .map(|shape| {
            let env = EnvSpec::pointmaze(*shape)?;
            let m = collect_returns(&env, policy, plan)?;
            Ok(ShapingRow {
                family: shape.family_name().into(),
                params: shape.params(),
                report: compute_report(&m, metrics)?,
            })
        })
        .collect()
}

fn cmd_shaping_sweep(cfg: &RunConfig) -> CliResult<()> {
    let plan = cfg.plan.sampling_plan();
    plan.validate()?;
    let rows = run_shaping(&cfg.shaping.variants(), &cfg.shaping.policy, &plan, &cfg.metrics)?;
    let dir = out_dir(cfg)?;
    let mut w = csv::Writer::from_path(dir.join("shaping.csv")).map_err(Error::from)?;
    w.write_record(["family", "params", "pic", "poic", "eta_star", "r_min", "r_max", "mean_return"])
        .map_err(Error::from)?;
    for r in &rows {
        w.write_record([
            r.family.clone(),
            r.params.clone(),
            format!("{:?}", r.report.pic),
            format!("{:?}", r.report.poic),
            format!("{:?}", r.report.eta_star),
            format!("{:?}", r.report.r_min),
            format!("{:?}", r.report.r_max),
            format!("{:?}", r.report.mean_return),
        ])
        .map_err(Error::from)?;
        println!("{:<9} {:<22} pic={:.4} poic={:.6}", r.family, r.params, r.report.pic, r.report.poic);
    }
    w.flush().map_err(Error::from)?;
    write_json(&dir.join("shaping.json"), &envelope(cfg, "shaping-sweep", None, &rows)?)?;
    if cfg.output.svg {
        let mut series: Vec<Series> = Vec::new();
        for fam in ["l1", "l2", "fraction", "sparse"] {
            let pts = rows.iter().filter(|r| r.family == fam).map(|r| (r.report.pic, r.report.poic)).collect();
            series.push(Series::new(fam, pts));
        }
        fs::write(dir.join("shaping.svg"), scatter_chart("Reward shaping", "PIC", "POIC", &series))
            .map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_prop1(
    cfg: &RunConfig,
    mu1: f64,
    sigma1: f64,
    mu2: f64,
    sigma2: f64,
    samples: usize,
    trials: usize,
) -> CliResult<()> {
    let check = verify_prop1(mu1, sigma1, mu2, sigma2, samples, trials, cfg.plan.seed).map_err(config_err)?;
    println!(
        "bound={:.6} empirical={:.6} stderr={:.6} holds={}",
        check.bound,
        check.empirical_rate,
        check.std_error,
        check.holds()
    );
    let dir = out_dir(cfg)?;
    write_json(&dir.join("prop1.json"), &envelope(cfg, "prop1", None, &check)?)?;
    Ok(())
}
