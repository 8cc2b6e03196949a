//! Replicated experiments over a ladder of sample sizes.
//!
//! Every replicate `(n, rep)` is generated from streams derived from
//! `(seed, n, rep)` alone and results are collected in ladder order, so the
//! output does not depend on the number of worker threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censored::{
    censored_weighted_stats, from_uniforms, representation_check, survival_representation_check, CensoredConfig,
    CensoringModel, RepresentationReport,
};
use crate::coupling::{fit_kmt_tail, KmtTailFit, DEFAULT_REFINE_DEPTH};
use crate::error::{Error, Result};
use crate::gof::{ols, quadratic_fit, quantile_sorted, wilson_interval, LinearFit};
use crate::process::{floor_combination_rational, ProcessBundle};
use crate::rng::{replicate_stream, Role, RngStream};
use crate::stats::{
    stat_empirical_full, stat_empirical_increment, stat_quantile_full, stat_quantile_increment, stat_restricted,
    tail_sup_discrepancy, IncrementSup, ProcessKind, TailSide, Weight, WeightConfig, WeightedSupResult,
    DEFAULT_GRID_PER_CELL,
};

/// Statistic identifiers as used on the command line and in CSV output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatId {
    /// Weighted quantile process over `[λ/n, 1-λ/n]`.
    Approx1,
    /// Weighted empirical process over `[λ/n, 1-λ/n]`.
    Approx2,
    /// Weighted quantile increments over `[λ/n, t)`.
    Approx3,
    /// Weighted empirical increments over `[λ/n, t)`.
    Approx4,
    Restricted,
    Ineq1Tail,
    CensH0,
    CensH1,
}

impl StatId {
    pub const ALL: [StatId; 8] = [
        StatId::Approx1,
        StatId::Approx2,
        StatId::Approx3,
        StatId::Approx4,
        StatId::Restricted,
        StatId::Ineq1Tail,
        StatId::CensH0,
        StatId::CensH1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatId::Approx1 => "approx1",
            StatId::Approx2 => "approx2",
            StatId::Approx3 => "approx3",
            StatId::Approx4 => "approx4",
            StatId::Restricted => "restricted",
            StatId::Ineq1Tail => "ineq1-tail",
            StatId::CensH0 => "cens-h0",
            StatId::CensH1 => "cens-h1",
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, StatId::CensH0 | StatId::CensH1)
    }
}

impl fmt::Display for StatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownStatistic(s.to_string()))
    }
}

/// One statistic to evaluate on every replicate, with its own parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatJob {
    pub stat: StatId,
    pub weights: WeightConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub stat: StatId,
    pub weights: WeightConfig,
    pub n_ladder: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub grid_per_cell: usize,
    pub refine_depth: u32,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Tail width `d` for `ineq1-tail`, capped at `n`.
    pub tail_d: f64,
    pub tail_side: TailSide,
    pub model: CensoringModel,
    pub censored: CensoredConfig,
    /// Also fit the coupling tail on the ladder (powers of two only).
    pub kmt_tail: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            stat: StatId::Approx1,
            weights: WeightConfig::default(),
            n_ladder: vec![512, 1024, 2048, 4096, 8192],
            reps: 500,
            seed: 1,
            grid_per_cell: DEFAULT_GRID_PER_CELL,
            refine_depth: DEFAULT_REFINE_DEPTH,
            threads: None,
            tail_d: 64.0,
            tail_side: TailSide::Left,
            model: CensoringModel::Exponential { c: 1.0 },
            censored: CensoredConfig::default(),
            kmt_tail: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::precondition("reps must be at least 1"));
        }
        if self.n_ladder.is_empty() {
            return Err(Error::precondition("the n ladder is empty"));
        }
        if self.n_ladder.iter().any(|&n| n < 2) {
            return Err(Error::precondition("every n in the ladder must be at least 2"));
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::precondition("the n ladder must be strictly ascending"));
        }
        if self.grid_per_cell == 0 {
            return Err(Error::precondition("grid_per_cell must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::precondition("threads must be at least 1"));
        }
        self.weights.validate()?;
        self.censored.validate()
    }

    pub fn job(&self) -> StatJob {
        StatJob {
            stat: self.stat,
            weights: self.weights,
        }
    }
}

/// One output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub statistic: String,
    pub n: usize,
    pub rep: usize,
    pub value: f64,
    pub arg_s: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub n: usize,
    pub reps: usize,
    pub q50: f64,
    pub q90: f64,
    pub q95: f64,
    pub q99: f64,
}

impl QuantileSummary {
    fn from_values(n: usize, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            n,
            reps: v.len(),
            q50: quantile_sorted(&v, 0.5),
            q90: quantile_sorted(&v, 0.9),
            q95: quantile_sorted(&v, 0.95),
            q99: quantile_sorted(&v, 0.99),
        }
    }
}

/// Regression of the 95% quantile on `ln n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tightness {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    /// Slope `<= 0`, or `0` inside `slope ± 2 se`.
    pub passes: bool,
}

impl Tightness {
    fn from_fit(fit: &LinearFit) -> Self {
        Self {
            slope: fit.slope,
            slope_se: fit.slope_se,
            intercept: fit.intercept,
            passes: fit.slope <= 0.0 || fit.slope - 2.0 * fit.slope_se <= 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderReport {
    pub statistic: String,
    pub weights: WeightConfig,
    pub rows: Vec<Row>,
    pub quantiles: Vec<QuantileSummary>,
    /// Needs at least three ladder sizes.
    pub tightness: Option<Tightness>,
    pub kmt_tail: Option<KmtTailFit>,
}

impl LadderReport {
    /// Summary without the per-replicate rows.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "statistic": self.statistic,
            "weights": self.weights,
            "quantiles": self.quantiles,
            "tightness": self.tightness,
            "kmt_tail": self.kmt_tail,
        })
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::precondition(format!("cannot build a pool of {t} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn replicate_grid(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    cfg.n_ladder
        .iter()
        .flat_map(|&n| (0..cfg.reps).map(move |rep| (n, rep)))
        .collect()
}

/// Evaluates the jobs on one replicate.
fn evaluate_jobs(cfg: &ExperimentConfig, jobs: &[StatJob], n: usize, rep: usize) -> Result<Vec<WeightedSupResult>> {
    let bundle = ProcessBundle::generate(n, cfg.seed, rep, cfg.refine_depth)?;
    let (order, bridge) = (bundle.order(), bundle.bridge());
    let g = cfg.grid_per_cell;
    let xi_order = if jobs.iter().any(|j| j.stat.is_censored()) {
        let stream = replicate_stream(cfg.seed, n, rep, Role::Censoring);
        Some(from_uniforms(order, &cfg.model, stream)?.xi_order()?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(jobs.len());
    for job in jobs {
        let w = &job.weights;
        let r = match job.stat {
            StatId::Approx1 => stat_quantile_full(order, &bridge, w, g)?,
            StatId::Approx2 => stat_empirical_full(order, &bridge, w, g)?,
            StatId::Approx3 => stat_quantile_increment(order, &bridge, w, g)?,
            StatId::Approx4 => stat_empirical_increment(order, &bridge, w, g)?,
            StatId::Restricted => stat_restricted(order, &bridge, w, g)?,
            StatId::Ineq1Tail => tail_sup_discrepancy(order, &bridge, cfg.tail_d.min(n as f64), cfg.tail_side, g)?,
            StatId::CensH0 | StatId::CensH1 => {
                let xi = xi_order.as_ref().expect("censored sample built above");
                let (h0, h1) = censored_weighted_stats(xi, &cfg.model, &bridge, &cfg.censored, g)?;
                if job.stat == StatId::CensH0 {
                    h0
                } else {
                    h1
                }
            }
        };
        out.push(r);
    }
    Ok(out)
}

/// Runs several statistics on the same replicates, one report per job.
pub fn run_ladder_jobs(cfg: &ExperimentConfig, jobs: &[StatJob]) -> Result<Vec<LadderReport>> {
    cfg.validate()?;
    if jobs.is_empty() {
        return Err(Error::precondition("no statistics requested"));
    }
    for job in jobs {
        job.weights.validate()?;
    }
    let grid = replicate_grid(cfg);
    let results: Vec<Vec<WeightedSupResult>> = with_threads(cfg.threads, || {
        grid.par_iter()
            .map(|&(n, rep)| evaluate_jobs(cfg, jobs, n, rep))
            .collect::<Result<Vec<_>>>()
    })??;

    let kmt_tail = if cfg.kmt_tail {
        let stream = RngStream::new(cfg.seed, 0);
        Some(with_threads(cfg.threads, || fit_kmt_tail(&cfg.n_ladder, cfg.reps, stream))??)
    } else {
        None
    };

    let mut reports = Vec::with_capacity(jobs.len());
    for (j, job) in jobs.iter().enumerate() {
        let rows: Vec<Row> = grid
            .iter()
            .zip(&results)
            .map(|(&(n, rep), r)| Row {
                statistic: job.stat.name().to_string(),
                n,
                rep,
                value: r[j].value,
                arg_s: r[j].arg_s,
                seed: cfg.seed,
            })
            .collect();
        let (quantiles, tightness) = summarize(&rows, &cfg.n_ladder)?;
        reports.push(LadderReport {
            statistic: job.stat.name().to_string(),
            weights: job.weights,
            rows,
            quantiles,
            tightness,
            kmt_tail: kmt_tail.clone(),
        });
    }
    Ok(reports)
}

pub fn run_ladder(cfg: &ExperimentConfig) -> Result<LadderReport> {
    Ok(run_ladder_jobs(cfg, &[cfg.job()])?.remove(0))
}

/// Per-`n` quantiles and the tightness regression. The result does not depend
/// on the order of `rows`.
pub fn summarize(rows: &[Row], ladder: &[usize]) -> Result<(Vec<QuantileSummary>, Option<Tightness>)> {
    let mut quantiles = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let values: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.value).collect();
        if values.is_empty() {
            return Err(Error::precondition(format!("no rows for n = {n}")));
        }
        quantiles.push(QuantileSummary::from_values(n, &values));
    }
    let tightness = if quantiles.len() >= 3 {
        let x: Vec<f64> = quantiles.iter().map(|q| (q.n as f64).ln()).collect();
        let y: Vec<f64> = quantiles.iter().map(|q| q.q95).collect();
        Some(Tightness::from_fit(&ols(&x, &y)?))
    } else {
        None
    };
    Ok((quantiles, tightness))
}

pub const CSV_HEADER: &str = "statistic,n,rep,value,arg_s,seed";

pub fn write_csv<W: Write>(rows: &[Row], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.statistic, r.n, r.rep, r.value, r.arg_s, r.seed)?;
    }
    out.flush()
}

/// JSON summary of a run: the configuration and one entry per report.
pub fn summary_json(cfg: &ExperimentConfig, reports: &[LadderReport]) -> serde_json::Value {
    serde_json::json!({
        "config": cfg,
        "results": reports.iter().map(LadderReport::summary).collect::<Vec<_>>(),
    })
}

/// Identity checks of the censored representation on every replicate of the
/// ladder, merged.
pub fn censored_identity_report(cfg: &ExperimentConfig) -> Result<RepresentationReport> {
    cfg.validate()?;
    let grid = replicate_grid(cfg);
    let v_grid = identity_grid(&cfg.model);
    let parts = with_threads(cfg.threads, || {
        grid.par_iter()
            .map(|&(n, rep)| {
                let bundle = ProcessBundle::generate(n, cfg.seed, rep, cfg.refine_depth)?;
                let stream = replicate_stream(cfg.seed, n, rep, Role::Censoring);
                let sample = from_uniforms(bundle.order(), &cfg.model, stream)?;
                let mut r = representation_check(&sample, &cfg.model, &v_grid)?;
                r.merge(&survival_representation_check(&sample, &cfg.model, &v_grid)?);
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut total = RepresentationReport::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Points `v` spread over the bulk of the observation law.
pub fn identity_grid(model: &CensoringModel) -> Vec<f64> {
    let theta = model.theta();
    (1..20)
        .map(|i| {
            let p = i as f64 / 20.0;
            model.h1_inv(p * theta)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ineq1Point {
    pub n: usize,
    pub d: f64,
    pub side: TailSide,
    pub x: f64,
    /// `a ln d + x`, compared with `√n` times the tail supremum.
    pub threshold: f64,
    pub exceedances: usize,
    pub reps: usize,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Fit of `ln p = ln b - c x` over the points with a nonzero estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ineq1Fit {
    pub n: usize,
    pub d: f64,
    pub side: TailSide,
    pub nonzero_points: usize,
    /// `None` when fewer than two points are nonzero.
    pub c_hat: Option<f64>,
    pub b_hat: Option<f64>,
    pub r_squared: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ineq1Estimate {
    pub a_used: f64,
    pub d_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub points: Vec<Ineq1Point>,
    pub fits: Vec<Ineq1Fit>,
}

impl Ineq1Estimate {
    pub fn fit(&self, n: usize, d: f64, side: TailSide) -> Option<&Ineq1Fit> {
        self.fits.iter().find(|f| f.n == n && f.d == d && f.side == side)
    }
}

/// Exceedance probabilities `P{√n sup |β̃ - B̃| >= a ln d + x}` over both
/// tails, for every `n` of the ladder and every `(d, x)` of the grids.
pub fn estimate_ineq1(cfg: &ExperimentConfig, d_grid: &[f64], x_grid: &[f64], a: f64) -> Result<Ineq1Estimate> {
    cfg.validate()?;
    if d_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::precondition("the d and x grids must be nonempty"));
    }
    if !(a > 0.0) {
        return Err(Error::domain(format!("a must be positive, got {a}")));
    }
    for &n in &cfg.n_ladder {
        for &d in d_grid {
            if !(d >= 1.0 && d <= n as f64) {
                return Err(Error::domain(format!("d = {d} is outside [1, n = {n}]")));
            }
            if let Some(&x) = x_grid.iter().find(|&&x| !(x >= 0.0 && x <= d.sqrt())) {
                return Err(Error::domain(format!("x = {x} is outside [0, sqrt(d) = {}]", d.sqrt())));
            }
        }
    }
    let sides = [TailSide::Left, TailSide::Right];
    let grid = replicate_grid(cfg);
    // Scaled suprema per replicate, indexed by (d, side).
    let sups: Vec<Vec<f64>> = with_threads(cfg.threads, || {
        grid.par_iter()
            .map(|&(n, rep)| {
                let bundle = ProcessBundle::generate(n, cfg.seed, rep, cfg.refine_depth)?;
                let (order, bridge) = (bundle.order(), bundle.bridge());
                let mut v = Vec::with_capacity(d_grid.len() * 2);
                for &d in d_grid {
                    for side in sides {
                        let r = tail_sup_discrepancy(order, &bridge, d, side, cfg.grid_per_cell)?;
                        v.push((n as f64).sqrt() * r.value);
                    }
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut points = Vec::new();
    let mut fits = Vec::new();
    for &n in &cfg.n_ladder {
        for (di, &d) in d_grid.iter().enumerate() {
            for (si, &side) in sides.iter().enumerate() {
                let col = di * 2 + si;
                let values: Vec<f64> = grid
                    .iter()
                    .zip(&sups)
                    .filter(|((m, _), _)| *m == n)
                    .map(|(_, v)| v[col])
                    .collect();
                let reps = values.len();
                let mut xs = Vec::new();
                let mut ln_p = Vec::new();
                for &x in x_grid {
                    let threshold = a * d.ln() + x;
                    let k = values.iter().filter(|&&v| v >= threshold).count();
                    let p_hat = k as f64 / reps as f64;
                    let (lo, hi) = wilson_interval(k, reps, 1.96);
                    if k > 0 {
                        xs.push(x);
                        ln_p.push(p_hat.ln());
                    }
                    points.push(Ineq1Point {
                        n,
                        d,
                        side,
                        x,
                        threshold,
                        exceedances: k,
                        reps,
                        p_hat,
                        wilson_lo: lo,
                        wilson_hi: hi,
                    });
                }
                let fit = if xs.len() >= 2 { ols(&xs, &ln_p).ok() } else { None };
                fits.push(Ineq1Fit {
                    n,
                    d,
                    side,
                    nonzero_points: xs.len(),
                    c_hat: fit.map(|f| -f.slope),
                    b_hat: fit.map(|f| f.intercept.exp()),
                    r_squared: fit.map(|f| f.r_squared),
                });
            }
        }
    }
    Ok(Ineq1Estimate {
        a_used: a,
        d_grid: d_grid.to_vec(),
        x_grid: x_grid.to_vec(),
        points,
        fits,
    })
}

/// One estimated probability against its known value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LawCheck {
    pub law: String,
    pub parameter: f64,
    pub estimate: f64,
    pub expected: f64,
    /// Three binomial standard deviations.
    pub tolerance: f64,
    pub passed: bool,
}

impl LawCheck {
    fn new(law: &str, parameter: f64, hits: usize, reps: usize, expected: f64) -> Self {
        let estimate = hits as f64 / reps as f64;
        let tolerance = 3.0 * (expected * (1.0 - expected) / reps as f64).sqrt();
        Self {
            law: law.to_string(),
            parameter,
            estimate,
            expected,
            tolerance,
            passed: (estimate - expected).abs() <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FloorScan {
    pub max_n: u64,
    pub den: u64,
    pub cases: u64,
    pub min: i64,
    pub max: i64,
    pub passed: bool,
}

/// Floor combination `[nt] - [n(t-s)] - [ns]` at every `s = i/den < t = j/den`
/// and every `n <= max_n`.
pub fn floor_scan(max_n: u64, den: u64) -> FloorScan {
    let (mut lo, mut hi, mut cases) = (i64::MAX, i64::MIN, 0u64);
    for n in 1..=max_n {
        for j in 1..den {
            for i in 0..j {
                let v = floor_combination_rational(n, i, j, den);
                lo = lo.min(v);
                hi = hi.max(v);
                cases += 1;
            }
        }
    }
    FloorScan {
        max_n,
        den,
        cases,
        min: lo,
        max: hi,
        passed: lo >= -2 && hi <= 1,
    }
}

/// Tail of the bridge modulus `P{sup_{|s-a|<=h} |B(a) - B(s)| >= u √h}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusCheck {
    pub a: f64,
    pub h: f64,
    pub u: Vec<f64>,
    pub p_hat: Vec<f64>,
    /// `ln p ≈ c0 + c1 u + c2 u²`.
    pub quadratic: Option<[f64; 3]>,
    pub decreasing: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactLawReport {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub min_ratio: Vec<LawCheck>,
    pub gamma_tail: Vec<LawCheck>,
    pub floor_scan: FloorScan,
    pub modulus: ModulusCheck,
    pub passed: bool,
}

pub const EXACT_LAW_N: usize = 50;
pub const MIN_EXACT_LAW_REPS: usize = 10_000;
const MODULUS_POINTS: usize = 65;

/// Checks the laws known in closed form on `reps` replicates at `n = 50`.
pub fn verify_exact_laws(seed: u64, reps: usize, threads: Option<usize>) -> Result<ExactLawReport> {
    if reps < MIN_EXACT_LAW_REPS {
        return Err(Error::precondition(format!(
            "verify_exact_laws needs at least {MIN_EXACT_LAW_REPS} replicates, got {reps}"
        )));
    }
    let n = EXACT_LAW_N;
    let taus = [0.05, 0.1, 0.25];
    let us = [0.0, 0.5, 1.0, 2.0];
    let (a, h) = (0.5, 0.1);
    let mod_u: Vec<f64> = (1..=7).map(|i| 0.5 * i as f64).collect();

    // Per replicate: min ratio, S_2, bridge modulus.
    let draws: Vec<(f64, f64, f64)> = with_threads(threads, || {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let b = ProcessBundle::generate_default(n, seed, rep)?;
                let center = b.eval_bridge(a);
                let mut sup = 0.0f64;
                for j in 0..MODULUS_POINTS {
                    let s = a - h + 2.0 * h * j as f64 / (MODULUS_POINTS - 1) as f64;
                    sup = sup.max((center - b.eval_bridge(s)).abs());
                }
                Ok((b.min_ratio(), b.sums()[2], sup / h.sqrt()))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let min_ratio = taus
        .iter()
        .map(|&tau| {
            let k = draws.iter().filter(|d| d.0 <= tau).count();
            LawCheck::new("min_k n U_k/k <= tau", tau, k, reps, tau)
        })
        .collect::<Vec<_>>();
    let gamma_tail = us
        .iter()
        .map(|&u| {
            let k = draws.iter().filter(|d| d.1 > u).count();
            LawCheck::new("S_2 > u", u, k, reps, (1.0 + u) * (-u).exp())
        })
        .collect::<Vec<_>>();
    let floor = floor_scan(50, 200);

    let p_hat: Vec<f64> = mod_u
        .iter()
        .map(|&u| draws.iter().filter(|d| d.2 >= u).count() as f64 / reps as f64)
        .collect();
    let decreasing = p_hat.windows(2).all(|w| w[1] < w[0]);
    let quadratic = if p_hat.iter().all(|&p| p > 0.0) {
        let ln_p: Vec<f64> = p_hat.iter().map(|p| p.ln()).collect();
        quadratic_fit(&mod_u, &ln_p).ok()
    } else {
        None
    };
    let modulus = ModulusCheck {
        a,
        h,
        u: mod_u,
        p_hat,
        quadratic,
        decreasing,
        passed: decreasing && quadratic.is_some_and(|c| c[2] < 0.0),
    };

    let passed = min_ratio.iter().all(|c| c.passed)
        && gamma_tail.iter().all(|c| c.passed)
        && floor.passed
        && modulus.passed;
    Ok(ExactLawReport {
        n,
        reps,
        seed,
        min_ratio,
        gamma_tail,
        floor_scan: floor,
        modulus,
        passed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GlobalSupReport {
    pub n_ladder: Vec<usize>,
    /// Medians of `n^{1/4} sup_s |α̃(s;t) - B̃(s)| / ((ln n)^{1/2} (ln ln n)^{1/4})`.
    pub medians: Vec<f64>,
    /// Largest over smallest median.
    pub ratio: f64,
    pub passed: bool,
    pub low_confidence: bool,
}

/// Unweighted increment discrepancy over `0 <= s < t`, normalized by its
/// almost sure rate, across the ladder.
pub fn sanity_global_sup(cfg: &ExperimentConfig) -> Result<GlobalSupReport> {
    cfg.validate()?;
    let t = cfg.weights.t;
    let grid = replicate_grid(cfg);
    let values: Vec<f64> = with_threads(cfg.threads, || {
        grid.par_iter()
            .map(|&(n, rep)| {
                let b = ProcessBundle::generate(n, cfg.seed, rep, cfg.refine_depth)?;
                let sup = IncrementSup {
                    kind: ProcessKind::Empirical,
                    t,
                    lo: 0.0,
                    hi: t,
                    scale: 1.0,
                    weight: Weight::Unit,
                };
                let v = sup.evaluate(b.order(), &b.bridge(), cfg.grid_per_cell)?.value;
                let nf = n as f64;
                let rate = nf.ln().sqrt() * nf.ln().ln().max(f64::MIN_POSITIVE).powf(0.25) / nf.powf(0.25);
                Ok(v / rate)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let medians: Vec<f64> = cfg
        .n_ladder
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = grid.iter().zip(&values).filter(|((m, _), _)| *m == n).map(|(_, v)| *v).collect();
            v.sort_by(f64::total_cmp);
            quantile_sorted(&v, 0.5)
        })
        .collect();
    let max = medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = medians.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    Ok(GlobalSupReport {
        n_ladder: cfg.n_ladder.clone(),
        medians,
        ratio,
        passed: ratio <= 3.0,
        low_confidence: cfg.reps < 30,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(stat: StatId) -> ExperimentConfig {
        ExperimentConfig {
            stat,
            n_ladder: vec![16, 32, 64],
            reps: 8,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn stat_names_round_trip() {
        for id in StatId::ALL {
            assert_eq!(id.name().parse::<StatId>().unwrap(), id);
        }
        assert!(matches!("approx5".parse::<StatId>(), Err(Error::UnknownStatistic(_))));
    }

    #[test]
    fn single_row_is_reproducible() {
        let cfg = ExperimentConfig {
            n_ladder: vec![4],
            reps: 1,
            ..Default::default()
        };
        let a = run_ladder(&cfg).unwrap();
        let b = run_ladder(&cfg).unwrap();
        assert_eq!(a.rows.len(), 1);
        assert_eq!(a.rows[0].value.to_bits(), b.rows[0].value.to_bits());
        assert!(a.tightness.is_none());
    }

    #[test]
    fn config_contracts() {
        let mut cfg = small(StatId::Approx1);
        cfg.reps = 0;
        assert!(matches!(run_ladder(&cfg), Err(Error::Precondition(_))));
        let mut cfg = small(StatId::Approx1);
        cfg.n_ladder = vec![64, 32];
        assert!(cfg.validate().is_err());
        cfg.n_ladder = vec![1, 8];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rows_and_quantiles_are_consistent() {
        let jobs: Vec<StatJob> = StatId::ALL
            .into_iter()
            .map(|stat| StatJob {
                stat,
                weights: WeightConfig::default(),
            })
            .collect();
        let cfg = small(StatId::Approx1);
        let reports = run_ladder_jobs(&cfg, &jobs).unwrap();
        for r in &reports {
            assert_eq!(r.rows.len(), cfg.n_ladder.len() * cfg.reps);
            for q in &r.quantiles {
                assert!(q.q50 <= q.q90 && q.q90 <= q.q95 && q.q95 <= q.q99);
            }
            assert!(r.tightness.is_some());
            assert!(r.rows.iter().all(|row| row.value >= 0.0));
        }
        // Reusing bundles gives the same values as separate runs.
        let alone = run_ladder(&small(StatId::Approx3)).unwrap();
        assert_eq!(alone.rows, reports[2].rows);
    }

    #[test]
    fn summaries_ignore_row_order() {
        let r = run_ladder(&small(StatId::Approx2)).unwrap();
        let mut rows = r.rows.clone();
        rows.reverse();
        rows.swap(0, 7);
        let (q, t) = summarize(&rows, &[16, 32, 64]).unwrap();
        assert_eq!(q, r.quantiles);
        assert_eq!(t, r.tightness);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut cfg = small(StatId::Approx4);
        let mut outputs = Vec::new();
        for threads in [1, 3] {
            cfg.threads = Some(threads);
            let mut buf = Vec::new();
            write_csv(&run_ladder(&cfg).unwrap().rows, &mut buf).unwrap();
            outputs.push(buf);
        }
        assert_eq!(outputs[0], outputs[1]);
        let text = String::from_utf8(outputs.remove(0)).unwrap();
        assert!(text.starts_with("statistic,n,rep,value,arg_s,seed\napprox4,16,0,"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 1 + 3 * 8);
    }

    #[test]
    fn floor_scan_bounds() {
        let s = floor_scan(50, 200);
        assert!(s.passed);
        assert_eq!((s.min, s.max), (0, 1));
        assert_eq!(s.cases, 50 * 199 * 200 / 2);
    }

    #[test]
    fn ineq1_empty_event_and_monotonicity() {
        let cfg = ExperimentConfig {
            n_ladder: vec![256],
            reps: 40,
            ..Default::default()
        };
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let est = estimate_ineq1(&cfg, &[16.0], &xs, 1.0).unwrap();
        for side in [TailSide::Left, TailSide::Right] {
            let p: Vec<&Ineq1Point> = est.points.iter().filter(|p| p.side == side).collect();
            assert_eq!(p.len(), xs.len());
            for w in p.windows(2) {
                assert!(w[1].exceedances <= w[0].exceedances);
            }
            for q in &p {
                assert!(q.wilson_lo <= q.p_hat && q.p_hat <= q.wilson_hi);
                assert!((0.0..=1.0).contains(&q.wilson_lo) && q.wilson_hi <= 1.0);
            }
        }
        // A huge a makes every threshold unreachable.
        let est = estimate_ineq1(&cfg, &[16.0], &xs, 1e6).unwrap();
        assert!(est.points.iter().all(|p| p.p_hat == 0.0 && p.wilson_lo == 0.0 && p.wilson_hi > 0.0));
        assert!(est.fits.iter().all(|f| f.c_hat.is_none()));
        assert!(estimate_ineq1(&cfg, &[16.0], &[5.0], 1.0).is_err());
        assert!(estimate_ineq1(&cfg, &[512.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn exact_laws_need_enough_replicates() {
        assert!(matches!(verify_exact_laws(1, 100, None), Err(Error::Precondition(_))));
    }

    #[test]
    fn global_sup_single_size_ratio_is_one() {
        let cfg = ExperimentConfig {
            n_ladder: vec![64],
            reps: 3,
            ..Default::default()
        };
        let r = sanity_global_sup(&cfg).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert!(r.passed && r.low_confidence);
    }

    #[test]
    fn censored_identities_hold_on_ladder() {
        let mut cfg = small(StatId::CensH0);
        cfg.n_ladder = vec![3, 10];
        let r = censored_identity_report(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.failures.first());
        assert!(r.checked.iter().all(|&c| c > 0));
    }
}
