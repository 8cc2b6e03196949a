use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bridgecouple::censored::{censored_weighted_stats, from_uniforms, CensoredConfig, CensoringModel};
use bridgecouple::coupling::{couple_exponential_sums, max_discrepancy, DEFAULT_REFINE_DEPTH};
use bridgecouple::harness::{
    censored_identity_report, run_ladder, run_ladder_jobs, summary_json, verify_exact_laws, write_csv,
    ExperimentConfig, StatId, StatJob,
};
use bridgecouple::process::ProcessBundle;
use bridgecouple::rng::{replicate_stream, Role, RngStream};
use bridgecouple::stats::{
    stat_empirical_full, stat_empirical_increment, stat_quantile_full, stat_quantile_increment, stat_restricted,
    tail_sup_discrepancy, TailSide, WeightConfig, DEFAULT_GRID_PER_CELL,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Coupled uniform empirical and quantile processes and Brownian bridges.
#[derive(Parser)]
#[command(name = "bridgecouple", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump one coupled path as `k S_k W_k` rows.
    Couple(CoupleArgs),
    /// Evaluate one statistic on one replicate and print it as JSON.
    Stats(StatsArgs),
    /// Run a ladder experiment; writes CSV rows and a JSON summary.
    Mc(McArgs),
    /// Run the exact-law suite.
    Verify(VerifyArgs),
    /// Censored statistics over a ladder, with the identity checks.
    Censored(CensoredArgs),
}

#[derive(Args)]
struct CoupleArgs {
    /// Number of summands, a power of two.
    #[arg(long, default_value_t = 1024)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Left,
    Right,
}

impl From<Side> for TailSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => TailSide::Left,
            Side::Right => TailSide::Right,
        }
    }
}

#[derive(Args)]
struct WeightArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    t: f64,
}

impl WeightArgs {
    fn config(&self) -> WeightConfig {
        WeightConfig {
            lambda: self.lambda,
            eta: self.eta,
            nu: self.nu,
            t: self.t,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_GRID_PER_CELL)]
    grid_per_cell: usize,
    #[arg(long, default_value_t = DEFAULT_REFINE_DEPTH)]
    refine_depth: u32,
}

#[derive(Args)]
struct CensoringArgs {
    /// Rate of the exponential censoring law.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Use Uniform(0, b) censoring instead of Exp(c).
    #[arg(long)]
    uniform_b: Option<f64>,
    /// Weight exponent of the censored statistics.
    #[arg(long, default_value_t = 0.1)]
    xi: f64,
}

impl CensoringArgs {
    fn model(&self) -> bridgecouple::Result<CensoringModel> {
        match self.uniform_b {
            Some(b) => CensoringModel::uniform(b),
            None => CensoringModel::exponential(self.c),
        }
    }
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, default_value = "approx1")]
    stat: StatId,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    rep: usize,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Tail width for `ineq1-tail`.
    #[arg(long, default_value_t = 64.0)]
    d: f64,
    #[arg(long, value_enum, default_value = "left")]
    side: Side,
    #[command(flatten)]
    censoring: CensoringArgs,
}

#[derive(Args)]
struct LadderArgs {
    #[arg(long, value_delimiter = ',', default_value = "512,1024,2048,4096,8192")]
    n_ladder: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long)]
    threads: Option<usize>,
    /// CSV output file; stdout when absent. The JSON summary goes next to it
    /// with a `.json` extension, or to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value = "approx1")]
    stat: StatId,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    ladder: LadderArgs,
    #[arg(long, default_value_t = 64.0)]
    d: f64,
    #[arg(long, value_enum, default_value = "left")]
    side: Side,
    #[command(flatten)]
    censoring: CensoringArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long)]
    threads: Option<usize>,
    /// JSON report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CensoredArgs {
    #[command(flatten)]
    censoring: CensoringArgs,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    ladder: LadderArgs,
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<bridgecouple::Error> for Failure {
    fn from(e: bridgecouple::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Couple(a) => couple(a),
        Command::Stats(a) => stats(a),
        Command::Mc(a) => mc(a),
        Command::Verify(a) => verify(a),
        Command::Censored(a) => censored(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Outcome {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn couple(a: CoupleArgs) -> Outcome {
    let path = couple_exponential_sums(a.m, RngStream::new(a.seed, a.stream))?;
    let mut out = output(a.out.as_deref())?;
    path.write_dump(&mut out)?;
    out.flush()?;
    let (gap, k) = max_discrepancy(&path);
    eprintln!("max |S_k - k - W(k)| = {gap} at k = {k}; clamped quantiles: {}", path.clamp_count());
    Ok(())
}

fn stats(a: StatsArgs) -> Outcome {
    let cfg = a.weights.config();
    cfg.validate()?;
    let g = a.common.grid_per_cell;
    let bundle = ProcessBundle::generate(a.n, a.common.seed, a.rep, a.common.refine_depth)?;
    let (order, bridge) = (bundle.order(), bundle.bridge());
    let result = match a.stat {
        StatId::Approx1 => stat_quantile_full(order, &bridge, &cfg, g)?,
        StatId::Approx2 => stat_empirical_full(order, &bridge, &cfg, g)?,
        StatId::Approx3 => stat_quantile_increment(order, &bridge, &cfg, g)?,
        StatId::Approx4 => stat_empirical_increment(order, &bridge, &cfg, g)?,
        StatId::Restricted => stat_restricted(order, &bridge, &cfg, g)?,
        StatId::Ineq1Tail => tail_sup_discrepancy(order, &bridge, a.d, a.side.into(), g)?,
        StatId::CensH0 | StatId::CensH1 => {
            let model = a.censoring.model()?;
            let ccfg = CensoredConfig {
                lambda: cfg.lambda,
                xi: a.censoring.xi,
            };
            let stream = replicate_stream(a.common.seed, a.n, a.rep, Role::Censoring);
            let xi = from_uniforms(order, &model, stream)?.xi_order()?;
            let (h0, h1) = censored_weighted_stats(&xi, &model, &bridge, &ccfg, g)?;
            if a.stat == StatId::CensH0 {
                h0
            } else {
                h1
            }
        }
    };
    let value = serde_json::json!({
        "statistic": a.stat,
        "n": a.n,
        "rep": a.rep,
        "seed": a.common.seed,
        "result": result,
    });
    write_json(None, &value)
}

fn summary_path(out: Option<&Path>) -> Option<PathBuf> {
    out.map(|p| p.with_extension("json"))
}

fn emit(ladder: &LadderArgs, rows: &[bridgecouple::harness::Row], summary: serde_json::Value) -> Outcome {
    write_csv(rows, output(ladder.out.as_deref())?)?;
    match summary_path(ladder.out.as_deref()) {
        Some(p) => write_json(Some(&p), &summary)?,
        None => eprintln!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}

fn mc(a: McArgs) -> Outcome {
    let cfg = ExperimentConfig {
        stat: a.stat,
        weights: a.weights.config(),
        n_ladder: a.ladder.n_ladder.clone(),
        reps: a.ladder.reps,
        seed: a.common.seed,
        grid_per_cell: a.common.grid_per_cell,
        refine_depth: a.common.refine_depth,
        threads: a.ladder.threads,
        tail_d: a.d,
        tail_side: a.side.into(),
        model: a.censoring.model()?,
        censored: CensoredConfig {
            lambda: a.weights.lambda,
            xi: a.censoring.xi,
        },
        kmt_tail: false,
    };
    let report = run_ladder(&cfg)?;
    let summary = summary_json(&cfg, std::slice::from_ref(&report));
    emit(&a.ladder, &report.rows, summary)
}

fn verify(a: VerifyArgs) -> Outcome {
    let report = verify_exact_laws(a.seed, a.reps, a.threads)?;
    write_json(a.out.as_deref(), &serde_json::to_value(&report)?)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification("at least one exact law is violated".into()))
    }
}

fn censored(a: CensoredArgs) -> Outcome {
    let cfg = ExperimentConfig {
        stat: StatId::CensH0,
        weights: WeightConfig {
            lambda: a.lambda,
            ..Default::default()
        },
        n_ladder: a.ladder.n_ladder.clone(),
        reps: a.ladder.reps,
        seed: a.common.seed,
        grid_per_cell: a.common.grid_per_cell,
        refine_depth: a.common.refine_depth,
        threads: a.ladder.threads,
        model: a.censoring.model()?,
        censored: CensoredConfig {
            lambda: a.lambda,
            xi: a.censoring.xi,
        },
        ..Default::default()
    };
    let jobs = [StatId::CensH0, StatId::CensH1].map(|stat| StatJob {
        stat,
        weights: cfg.weights,
    });
    let reports = run_ladder_jobs(&cfg, &jobs)?;
    let identities = censored_identity_report(&cfg)?;
    let mut summary = summary_json(&cfg, &reports);
    summary["identity_checks"] = serde_json::json!({
        "passed": identities.passed(),
        "checked": identities.checked,
        "max_abs_diff": identities.max_abs_diff,
        "failures": identities.failures.iter().take(20).collect::<Vec<_>>(),
    });
    let rows: Vec<_> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    emit(&a.ladder, &rows, summary)?;
    if identities.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} representation identities failed",
            identities.failures.len()
        )))
    }
}
