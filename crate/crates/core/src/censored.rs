//! Right-censored samples, their sub-distribution functions and the
//! uniformization `ξ = δ H1(Z) + (1 - δ)(θ + H0(Z))`.
//!
//! `X ~ Exp(1)` is censored by an independent `Y`; we observe `Z = min(X, Y)`
//! and `δ = 1{X <= Y}`. With `H1(z) = P{Z <= z, δ = 1}`, `H0(z) = P{Z <= z, δ = 0}`
//! and `θ = H1(∞)`, the `ξ_i` are iid uniform and
//!
//! ```text
//! H1_n(v) = U_n(H1(v))
//! H0_n(v) = U_n(H0(v) + θ) - U_n(θ)
//! ```
//!
//! where `U_n` is the empirical CDF of the `ξ_i`. The survival forms use
//! `H̄i(v) = Hi(∞) - Hi(v)`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{Bridge, OrderStats, Side};
use crate::rng::RngStream;
use crate::stats::{DirectSup, IncrementSup, ProcessKind, Weight, WeightedSupResult};

const MAX_REDRAWS: usize = 1000;
const MAX_PERTURB_STEPS: usize = 64;

/// Censoring law for `Y`; `X ~ Exp(1)` throughout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CensoringModel {
    /// `Y ~ Exp(c)`.
    Exponential { c: f64 },
    /// `Y ~ Uniform(0, b)`.
    Uniform { b: f64 },
}

impl CensoringModel {
    pub fn exponential(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("censoring rate must be positive, got {c}")));
        }
        Ok(Self::Exponential { c })
    }

    pub fn uniform(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::domain(format!("censoring bound must be positive, got {b}")));
        }
        Ok(Self::Uniform { b })
    }

    /// `θ = H1(∞) = P{δ = 1}`.
    pub fn theta(&self) -> f64 {
        match *self {
            Self::Exponential { c } => 1.0 / (1.0 + c),
            Self::Uniform { b } => self.h1(b),
        }
    }

    /// `H0(∞) = P{δ = 0}`.
    pub fn h0_inf(&self) -> f64 {
        match *self {
            Self::Exponential { c } => c / (1.0 + c),
            Self::Uniform { b } => -(-b).exp_m1() / b,
        }
    }

    /// `P{Z <= z, δ = 1}`.
    pub fn h1(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { c } => -(-(1.0 + c) * z).exp_m1() / (1.0 + c),
            Self::Uniform { b } => {
                let z = z.min(b);
                // ∫_0^z e^{-x}(1 - x/b) dx
                -(-z).exp_m1() - (-(-z).exp_m1() - z * (-z).exp()) / b
            }
        }
    }

    /// `P{Z <= z, δ = 0}`.
    pub fn h0(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { c } => c * -(-(1.0 + c) * z).exp_m1() / (1.0 + c),
            Self::Uniform { b } => -(-z.min(b)).exp_m1() / b,
        }
    }

    /// `H(z) = P{Z <= z}`.
    pub fn h(&self, z: f64) -> f64 {
        self.h0(z) + self.h1(z)
    }

    /// `1 - F(z)` for `X ~ Exp(1)`.
    pub fn survival_x(&self, z: f64) -> f64 {
        (-z.max(0.0)).exp()
    }

    /// `1 - G(z)`.
    pub fn survival_y(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { c } => (-c * z).exp(),
            Self::Uniform { b } => (1.0 - z / b).max(0.0),
        }
    }

    pub fn h1_bar(&self, v: f64) -> f64 {
        self.theta() - self.h1(v)
    }

    pub fn h0_bar(&self, v: f64) -> f64 {
        self.h0_inf() - self.h0(v)
    }

    /// Inverse of `H1` on `[0, θ)`.
    pub fn h1_inv(&self, u: f64) -> f64 {
        match *self {
            Self::Exponential { c } => -(-u * (1.0 + c)).ln_1p() / (1.0 + c),
            Self::Uniform { b } => {
                let (mut lo, mut hi) = (0.0f64, b);
                while hi - lo > 0.0 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.h1(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Inverse of `H0` on `[0, H0(∞))`.
    pub fn h0_inv(&self, u: f64) -> f64 {
        match *self {
            Self::Exponential { c } => -(-u * (1.0 + c) / c).ln_1p() / (1.0 + c),
            Self::Uniform { b } => -(-u * b).ln_1p(),
        }
    }

    pub fn xi(&self, z: f64, delta: bool) -> f64 {
        if delta {
            self.h1(z)
        } else {
            self.theta() + self.h0(z)
        }
    }

    fn draw_y<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { c } => {
                let e: f64 = rng.sample(Exp1);
                e / c
            }
            Self::Uniform { b } => b * rng.random::<f64>(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensoredSample {
    pub z: Vec<f64>,
    pub delta: Vec<bool>,
    pub xi: Vec<f64>,
    /// Rejected draws (ties or inconsistent `ξ`) before this sample.
    pub redraws: usize,
}

impl CensoredSample {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Sorted `ξ_i` as order statistics.
    pub fn xi_order(&self) -> Result<OrderStats> {
        let mut v = self.xi.clone();
        v.sort_by(f64::total_cmp);
        OrderStats::from_sorted(&v)
    }

    /// From explicit observations; `ξ` is computed from the model.
    pub fn from_observations(model: &CensoringModel, z: Vec<f64>, delta: Vec<bool>) -> Result<Self> {
        if z.len() != delta.len() || z.is_empty() {
            return Err(Error::precondition("need equally many (Z, δ) pairs, at least one"));
        }
        let xi = z.iter().zip(&delta).map(|(&z, &d)| model.xi(z, d)).collect();
        let s = Self {
            z,
            delta,
            xi,
            redraws: 0,
        };
        s.validate(model)?;
        Ok(s)
    }

    fn validate(&self, model: &CensoringModel) -> Result<()> {
        let theta = model.theta();
        for ((&z, &d), &x) in self.z.iter().zip(&self.delta).zip(&self.xi) {
            let consistent = if d { x > 0.0 && x < theta } else { x > theta && x < 1.0 };
            if !(z > 0.0 && z.is_finite()) || !consistent {
                return Err(Error::domain(format!(
                    "observation (Z = {z}, δ = {d}) maps to ξ = {x}, inconsistent with θ = {theta}"
                )));
            }
        }
        let mut zs = self.z.clone();
        zs.sort_by(f64::total_cmp);
        let mut xs = self.xi.clone();
        xs.sort_by(f64::total_cmp);
        if zs.windows(2).any(|p| p[0] == p[1]) || xs.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::domain("tied observations"));
        }
        Ok(())
    }
}

/// Draws `n` censored observations, redrawing the whole sample on ties.
pub fn generate(model: &CensoringModel, n: usize, stream: RngStream) -> Result<CensoredSample> {
    if n == 0 {
        return Err(Error::precondition("censored sample size must be at least 1"));
    }
    let mut rng = stream.rng();
    for redraws in 0..MAX_REDRAWS {
        let mut z = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.sample(Exp1);
            let y = model.draw_y(&mut rng);
            z.push(x.min(y));
            delta.push(x <= y);
        }
        if let Ok(mut s) = CensoredSample::from_observations(model, z, delta) {
            s.redraws = redraws;
            return Ok(s);
        }
    }
    Err(Error::precondition(format!(
        "no tie-free censored sample in {MAX_REDRAWS} draws"
    )))
}

/// Censored sample whose `ξ` values are the given uniform order statistics
/// (up to rounding), listed in a random order: each `U_k` is mapped to
/// `(Z, δ)` through the inverse sub-distribution functions and `ξ` is then
/// recomputed from `(Z, δ)`.
pub fn from_uniforms(order: &OrderStats, model: &CensoringModel, stream: RngStream) -> Result<CensoredSample> {
    let theta = model.theta();
    let h0_top = model.h0_inf();
    let mut u = order.values()[1..].to_vec();
    u.shuffle(&mut stream.rng());
    let mut z = Vec::with_capacity(u.len());
    let mut delta = Vec::with_capacity(u.len());
    for &v in &u {
        if v < theta {
            z.push(model.h1_inv(v));
            delta.push(true);
        } else {
            z.push(model.h0_inv((v - theta).min(h0_top)));
            delta.push(false);
        }
    }
    CensoredSample::from_observations(model, z, delta)
}

/// Sub-empirical functions of a censored sample.
#[derive(Clone, Debug)]
pub struct SubEmpiricals {
    n: usize,
    z0: Vec<f64>,
    z1: Vec<f64>,
    xi: OrderStats,
}

fn count_le(sorted: &[f64], v: f64) -> usize {
    sorted.partition_point(|&x| x <= v)
}

impl SubEmpiricals {
    pub fn new(sample: &CensoredSample) -> Result<Self> {
        let mut z0 = Vec::new();
        let mut z1 = Vec::new();
        for (&z, &d) in sample.z.iter().zip(&sample.delta) {
            if d {
                z1.push(z);
            } else {
                z0.push(z);
            }
        }
        z0.sort_by(f64::total_cmp);
        z1.sort_by(f64::total_cmp);
        Ok(Self {
            n: sample.n(),
            z0,
            z1,
            xi: sample.xi_order()?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xi_order(&self) -> &OrderStats {
        &self.xi
    }

    /// `#{δ_i = 1, Z_i <= v}`.
    pub fn count1(&self, v: f64) -> usize {
        count_le(&self.z1, v)
    }

    /// `#{δ_i = 0, Z_i <= v}`.
    pub fn count0(&self, v: f64) -> usize {
        count_le(&self.z0, v)
    }

    /// `#{ξ_i <= s}`.
    pub fn count_xi(&self, s: f64) -> usize {
        self.xi.count_le(s)
    }

    pub fn h1_n(&self, v: f64) -> f64 {
        self.count1(v) as f64 / self.n as f64
    }

    pub fn h0_n(&self, v: f64) -> f64 {
        self.count0(v) as f64 / self.n as f64
    }

    pub fn h_n(&self, v: f64) -> f64 {
        (self.count0(v) + self.count1(v)) as f64 / self.n as f64
    }

    pub fn h1_bar_n(&self, v: f64) -> f64 {
        (self.z1.len() - self.count1(v)) as f64 / self.n as f64
    }

    pub fn h0_bar_n(&self, v: f64) -> f64 {
        (self.z0.len() - self.count0(v)) as f64 / self.n as f64
    }

    /// Empirical CDF of the `ξ_i`.
    pub fn u_n(&self, s: f64) -> f64 {
        self.xi.cdf(s)
    }

    /// `α*_n(s) = √n (U_n(s) - s)`.
    pub fn alpha_star(&self, s: f64) -> f64 {
        self.xi.empirical(s, Side::At)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IdentityFailure {
    pub v: f64,
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RepresentationReport {
    /// Evaluations per identity, in declaration order.
    pub checked: [usize; 2],
    /// Largest difference between real-valued sides (survival forms only).
    pub max_abs_diff: f64,
    pub failures: Vec<IdentityFailure>,
}

impl RepresentationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn merge(&mut self, other: &RepresentationReport) {
        self.checked[0] += other.checked[0];
        self.checked[1] += other.checked[1];
        self.max_abs_diff = self.max_abs_diff.max(other.max_abs_diff);
        self.failures.extend(other.failures.iter().cloned());
    }
}

/// Tolerance for the real-valued survival displays, whose two sides differ by
/// rounding only once the integer counts agree.
pub const SURVIVAL_TOLERANCE: f64 = 1e-12;

// Arguments handed to U_n for an observation's own status.
fn own_arguments(model: &CensoringModel, v: f64, delta: bool) -> [f64; 2] {
    if delta {
        [model.h1(v), model.theta() - model.h1_bar(v)]
    } else {
        [model.theta() + model.h0(v), 1.0 - model.h0_bar(v)]
    }
}

/// Points just above and below `Z_i` at which every transformed argument
/// lands on the same side of `ξ_i` as the point lands of `Z_i`. The offset
/// starts at one ulp of `Z_i` and doubles until that holds, since a flat
/// stretch of `H` can absorb many ulps of `v`.
pub fn perturbations(model: &CensoringModel, z: f64, delta: bool) -> (f64, f64) {
    let xi = model.xi(z, delta);
    let ulp = z.next_up() - z;
    let mut up = z.next_up();
    let mut step = ulp;
    for _ in 0..MAX_PERTURB_STEPS {
        if own_arguments(model, up, delta).iter().all(|&a| a >= xi) {
            break;
        }
        step *= 2.0;
        up = z + step;
    }
    let mut down = z.next_down();
    let mut step = ulp;
    for _ in 0..MAX_PERTURB_STEPS {
        if own_arguments(model, down, delta).iter().all(|&a| a < xi) {
            break;
        }
        step *= 2.0;
        down = z - step;
    }
    (up, down)
}

fn evaluation_points(sample: &CensoredSample, model: &CensoringModel, v_grid: &[f64]) -> Vec<f64> {
    let mut pts = v_grid.to_vec();
    for (&z, &d) in sample.z.iter().zip(&sample.delta) {
        let (up, down) = perturbations(model, z, d);
        pts.extend([up, down]);
    }
    pts
}

fn record(report: &mut RepresentationReport, v: f64, identity: &str, lhs: f64, rhs: f64) {
    report.failures.push(IdentityFailure {
        v,
        identity: identity.to_string(),
        lhs,
        rhs,
    });
}

/// Checks `H1_n(v) = U_n(H1(v))` and `H0_n(v) = U_n(H0(v) + θ) - U_n(θ)` as
/// integer count equalities at every `v` of `v_grid` inside the domains and at
/// the two perturbations of every `Z_i`.
pub fn representation_check(sample: &CensoredSample, model: &CensoringModel, v_grid: &[f64]) -> Result<RepresentationReport> {
    let sub = SubEmpiricals::new(sample)?;
    let theta = model.theta();
    let mut rep = RepresentationReport::default();
    for v in evaluation_points(sample, model, v_grid) {
        let h1 = model.h1(v);
        if h1 > 0.0 && h1 < theta {
            rep.checked[0] += 1;
            let (l, r) = (sub.count1(v), sub.count_xi(h1));
            if l != r {
                record(&mut rep, v, "H1_n(v) = U_n(H1(v))", l as f64, r as f64);
            }
        }
        let h0 = model.h0(v);
        if h0 > 0.0 && h0 < model.h0_inf() {
            rep.checked[1] += 1;
            let l = sub.count0(v) as i64;
            let r = sub.count_xi(h0 + theta) as i64 - sub.count_xi(theta) as i64;
            if l != r {
                record(&mut rep, v, "H0_n(v) = U_n(H0(v) + θ) - U_n(θ)", l as f64, r as f64);
            }
        }
    }
    Ok(rep)
}

/// Checks `√n(H̄0_n(v) - H̄0(v)) = -α*_n(1 - H̄0(v))` and
/// `√n(H̄1_n(v) - H̄1(v)) = α*_n(H̄1(v); θ)`: the underlying counts must agree
/// exactly and the real values within [`SURVIVAL_TOLERANCE`].
pub fn survival_representation_check(
    sample: &CensoredSample,
    model: &CensoringModel,
    v_grid: &[f64],
) -> Result<RepresentationReport> {
    let sub = SubEmpiricals::new(sample)?;
    let theta = model.theta();
    let n = sub.n();
    let sqrt_n = (n as f64).sqrt();
    let mut rep = RepresentationReport::default();
    for v in evaluation_points(sample, model, v_grid) {
        let hb0 = model.h0_bar(v);
        if hb0 > 0.0 && hb0 < model.h0_inf() {
            rep.checked[0] += 1;
            let arg = 1.0 - hb0;
            let l_count = sub.z0.len() - sub.count0(v);
            let r_count = n - sub.count_xi(arg);
            let lhs = sqrt_n * (sub.h0_bar_n(v) - hb0);
            let rhs = -sub.alpha_star(arg);
            rep.max_abs_diff = rep.max_abs_diff.max((lhs - rhs).abs());
            if l_count != r_count || (lhs - rhs).abs() > SURVIVAL_TOLERANCE {
                record(&mut rep, v, "√n(H̄0_n - H̄0) = -α*(1 - H̄0)", lhs, rhs);
            }
        }
        let hb1 = model.h1_bar(v);
        if hb1 > 0.0 && hb1 < theta {
            rep.checked[1] += 1;
            let arg = theta - hb1;
            let l_count = sub.z1.len() - sub.count1(v);
            let r_count = sub.count_xi(theta) as i64 - sub.count_xi(arg) as i64;
            let lhs = sqrt_n * (sub.h1_bar_n(v) - hb1);
            let rhs = sub.alpha_star(theta) - sub.alpha_star(arg);
            rep.max_abs_diff = rep.max_abs_diff.max((lhs - rhs).abs());
            if l_count as i64 != r_count || (lhs - rhs).abs() > SURVIVAL_TOLERANCE {
                record(&mut rep, v, "√n(H̄1_n - H̄1) = α*(H̄1; θ)", lhs, rhs);
            }
        }
    }
    Ok(rep)
}

/// Parameters of the censored weighted statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensoredConfig {
    pub lambda: f64,
    /// Weight exponent in `[0, 1/4)`.
    pub xi: f64,
}

impl Default for CensoredConfig {
    fn default() -> Self {
        Self { lambda: 1.0, xi: 0.1 }
    }
}

impl CensoredConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..0.25).contains(&self.xi) {
            return Err(Error::domain(format!("xi must lie in [0, 1/4), got {}", self.xi)));
        }
        Ok(())
    }
}

/// Statistic over `λ/n <= H̄0(v)`, written in `r = 1 - H̄0(v) ∈ [θ, 1 - λ/n]`:
/// `n^ξ |α*(r) - B(r)| / (1 - r)^{1/2 - ξ}`.
pub fn censored_h0_sup(n: usize, theta: f64, cfg: &CensoredConfig) -> Result<DirectSup> {
    cfg.validate()?;
    let hi = 1.0 - cfg.lambda / n as f64;
    if theta > hi {
        return Err(Error::EmptyDomain(format!(
            "θ = {theta} exceeds 1 - λ/n = {hi}"
        )));
    }
    Ok(DirectSup {
        kind: ProcessKind::Empirical,
        lo: theta,
        hi,
        scale: (n as f64).powf(cfg.xi),
        weight: Weight::Upper(0.5 - cfg.xi),
    })
}

/// Statistic over `λ/n <= H̄1(v) < θ`, written in `s = H̄1(v)`:
/// `n^ξ |α*(s; θ) - B(s)| / s^{1/2 - ξ}`.
pub fn censored_h1_sup(n: usize, theta: f64, cfg: &CensoredConfig) -> Result<IncrementSup> {
    cfg.validate()?;
    let lo = cfg.lambda / n as f64;
    if lo >= theta {
        return Err(Error::EmptyDomain(format!("λ/n = {lo} is not below θ = {theta}")));
    }
    Ok(IncrementSup {
        kind: ProcessKind::Empirical,
        t: theta,
        lo,
        hi: theta,
        scale: (n as f64).powf(cfg.xi),
        weight: Weight::Lower(0.5 - cfg.xi),
    })
}

/// Both censored weighted statistics for the `ξ` order statistics against
/// `bridge`.
pub fn censored_weighted_stats(
    xi_order: &OrderStats,
    model: &CensoringModel,
    bridge: &dyn Bridge,
    cfg: &CensoredConfig,
    g: usize,
) -> Result<(WeightedSupResult, WeightedSupResult)> {
    let n = xi_order.n();
    let theta = model.theta();
    let h0 = censored_h0_sup(n, theta, cfg)?.evaluate(xi_order, bridge, g)?;
    let h1 = censored_h1_sup(n, theta, cfg)?.evaluate(xi_order, bridge, g)?;
    Ok((h0, h1))
}
