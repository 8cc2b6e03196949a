//! Weighted supremum discrepancies between the empirical or quantile process
//! and a bridge.
//!
//! Every statistic is a maximum over a finite evaluation set:
//!
//! * both one-sided limits at every jump of the step process inside the
//!   domain,
//! * `G` equispaced points per cell `[k/n, (k+1)/n)` (the lattice included),
//! * the closed endpoints of the domain, and the one-sided limit at an open
//!   endpoint.
//!
//! Between jumps the step processes are linear, so the only approximation
//! comes from evaluating the bridge on that set.
//!
//! Increment statistics are scanned in `x = t - s`, the argument at which the
//! process is evaluated, so the grid and the jumps are placed in `x`. A left
//! limit in `x` is a right limit in `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{lattice_index, Bridge, OrderStats, Side};

pub const DEFAULT_GRID_PER_CELL: usize = 8;

/// Parameters of the weighted statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub lambda: f64,
    /// Exponent for the quantile-process statistics, in `[0, 1/2)`.
    pub eta: f64,
    /// Exponent for the empirical-process statistics, in `[0, 1/4)`.
    pub nu: f64,
    /// Increment anchor in `(0, 1)`.
    pub t: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eta: 0.0,
            nu: 0.0,
            t: 0.5,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..0.5).contains(&self.eta) {
            return Err(Error::domain(format!("eta must lie in [0, 1/2), got {}", self.eta)));
        }
        if !(0.0..0.25).contains(&self.nu) {
            return Err(Error::domain(format!("nu must lie in [0, 1/4), got {}", self.nu)));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::domain(format!("t must lie in (0, 1), got {}", self.t)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// Every evaluated bridge point lies on the lattice `k/n`.
    ExactAtJumps,
    /// Some bridge values come from the dyadic refinement.
    GridApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSupResult {
    pub value: f64,
    pub arg_s: f64,
    /// Side of the bridge argument at the maximizer.
    pub side: Side,
    /// Process argument and side for increment statistics (`t - arg_s` up to
    /// rounding).
    pub arg_x: Option<f64>,
    pub x_side: Option<Side>,
    pub grid_points: usize,
    pub discretization: Discretization,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcessKind {
    /// `α_n`, jumps at the order statistics.
    Empirical,
    /// `β_n`, jumps on the lattice `k/n`.
    Quantile,
}

impl ProcessKind {
    pub fn eval(self, order: &OrderStats, x: f64, side: Side) -> f64 {
        match self {
            ProcessKind::Empirical => order.empirical(x, side),
            ProcessKind::Quantile => order.quantile(x, side),
        }
    }
}

/// Denominator of a weighted statistic as a function of `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    /// `[s(1-s)]^p`
    Symmetric(f64),
    /// `s^p`
    Lower(f64),
    /// `(1-s)^p`
    Upper(f64),
    Unit,
}

impl Weight {
    pub fn eval(self, s: f64) -> f64 {
        match self {
            Weight::Symmetric(p) => (s * (1.0 - s)).powf(p),
            Weight::Lower(p) => s.powf(p),
            Weight::Upper(p) => (1.0 - s).powf(p),
            Weight::Unit => 1.0,
        }
    }
}

/// One point of an evaluation set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    /// Bridge argument.
    pub s: f64,
    pub s_side: Side,
    /// Process argument.
    pub x: f64,
    pub x_side: Side,
}

impl Candidate {
    fn direct(s: f64, side: Side) -> Self {
        Self {
            s,
            s_side: side,
            x: s,
            x_side: side,
        }
    }
}

/// A full-range statistic `scale · |P(s) - B(s)| / w(s)` over `lo <= s <= hi`.
#[derive(Clone, Copy, Debug)]
pub struct DirectSup {
    pub kind: ProcessKind,
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
    pub weight: Weight,
}

/// An increment statistic `scale · |P(t) - P(t-s) - B(s)| / w(s)` over
/// `lo <= s < hi` (with `hi <= t`).
#[derive(Clone, Copy, Debug)]
pub struct IncrementSup {
    pub kind: ProcessKind,
    pub t: f64,
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
    pub weight: Weight,
}

fn jump_points(order: &OrderStats, kind: ProcessKind) -> Vec<f64> {
    let n = order.n();
    match kind {
        ProcessKind::Empirical => order.values()[1..].to_vec(),
        ProcessKind::Quantile => (1..=n).map(|k| k as f64 / n as f64).collect(),
    }
}

fn check_grid(g: usize) -> Result<()> {
    if g == 0 {
        return Err(Error::precondition("grid_per_cell must be at least 1"));
    }
    Ok(())
}

impl DirectSup {
    pub fn candidates(&self, order: &OrderStats, g: usize) -> Result<Vec<Candidate>> {
        check_grid(g)?;
        if !(self.lo <= self.hi) {
            return Err(Error::EmptyDomain(format!("[{}, {}]", self.lo, self.hi)));
        }
        let (lo, hi) = (self.lo, self.hi);
        let n = order.n();
        // The grid is dense near the domain only; skip cells wholly outside.
        let k_lo = lattice_index(n, lo).saturating_sub(1);
        let k_hi = (lattice_index(n, hi) + 1).min(n);
        let (nf, gf) = (n as f64, g as f64);
        let mut out = Vec::with_capacity((k_hi - k_lo + 1) * (g + 2) + 2);
        for k in k_lo..=k_hi {
            let top = if k == n { 1 } else { g };
            for j in 0..top {
                let s = (k as f64 + j as f64 / gf) / nf;
                if lo <= s && s <= hi {
                    out.push(Candidate::direct(s, Side::At));
                }
            }
        }
        for p in jump_points(order, self.kind) {
            if lo <= p && p <= hi {
                out.push(Candidate::direct(p, Side::At));
            }
            if lo < p && p <= hi {
                out.push(Candidate::direct(p, Side::Before));
            }
        }
        out.push(Candidate::direct(lo, Side::At));
        out.push(Candidate::direct(hi, Side::At));
        Ok(out)
    }

    pub fn value_at(&self, order: &OrderStats, bridge: &dyn Bridge, c: &Candidate) -> f64 {
        let p = self.kind.eval(order, c.x, c.x_side);
        let b = bridge.at_side(c.s, c.s_side);
        self.scale * (p - b).abs() / self.weight.eval(c.s)
    }

    pub fn evaluate(&self, order: &OrderStats, bridge: &dyn Bridge, g: usize) -> Result<WeightedSupResult> {
        let cands = self.candidates(order, g)?;
        Ok(maximize(&cands, |c| self.value_at(order, bridge, c), order.n(), false))
    }
}

impl IncrementSup {
    pub fn candidates(&self, order: &OrderStats, g: usize) -> Result<Vec<Candidate>> {
        check_grid(g)?;
        if !(self.lo < self.hi && self.hi <= self.t) {
            return Err(Error::EmptyDomain(format!(
                "[{}, {}) with t = {}",
                self.lo, self.hi, self.t
            )));
        }
        let (lo, hi, t) = (self.lo, self.hi, self.t);
        let (x_lo, x_hi) = (t - hi, t - lo);
        let n = order.n();
        let k_lo = lattice_index(n, x_lo).saturating_sub(1);
        let k_hi = (lattice_index(n, x_hi) + 1).min(n);
        let (nf, gf) = (n as f64, g as f64);
        let mut out = Vec::with_capacity((k_hi - k_lo + 1) * (g + 2) + 2);
        for k in k_lo..=k_hi {
            let top = if k == n { 1 } else { g };
            for j in 0..top {
                let x = (k as f64 + j as f64 / gf) / nf;
                if x_lo < x && x <= x_hi {
                    out.push(Candidate::direct(t - x, Side::At).with_x(x, Side::At));
                }
            }
        }
        for p in jump_points(order, self.kind) {
            if x_lo < p && p <= x_hi {
                let s = t - p;
                out.push(Candidate::direct(s, Side::At).with_x(p, Side::At));
                out.push(Candidate::direct(s, Side::After).with_x(p, Side::Before));
            }
        }
        out.push(Candidate::direct(lo, Side::At).with_x(x_hi, Side::At));
        out.push(Candidate::direct(hi, Side::Before).with_x(x_lo, Side::At));
        Ok(out)
    }

    pub fn value_at(&self, order: &OrderStats, bridge: &dyn Bridge, c: &Candidate) -> f64 {
        let inc = self.kind.eval(order, self.t, Side::At) - self.kind.eval(order, c.x, c.x_side);
        let b = bridge.at_side(c.s, c.s_side);
        self.scale * (inc - b).abs() / self.weight.eval(c.s)
    }

    pub fn evaluate(&self, order: &OrderStats, bridge: &dyn Bridge, g: usize) -> Result<WeightedSupResult> {
        let cands = self.candidates(order, g)?;
        Ok(maximize(&cands, |c| self.value_at(order, bridge, c), order.n(), true))
    }
}

impl Candidate {
    fn with_x(mut self, x: f64, side: Side) -> Self {
        self.x = x;
        self.x_side = side;
        self
    }
}

fn on_lattice(n: usize, s: f64) -> bool {
    let k = lattice_index(n, s);
    k as f64 / n as f64 == s
}

fn maximize<F: Fn(&Candidate) -> f64>(
    cands: &[Candidate],
    value: F,
    n: usize,
    increment: bool,
) -> WeightedSupResult {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for (i, c) in cands.iter().enumerate() {
        let v = value(c);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let c = cands[best];
    let exact = cands.iter().all(|c| on_lattice(n, c.s));
    WeightedSupResult {
        value: best_v,
        arg_s: c.s,
        side: c.s_side,
        arg_x: increment.then_some(c.x),
        x_side: increment.then_some(c.x_side),
        grid_points: cands.len(),
        discretization: if exact {
            Discretization::ExactAtJumps
        } else {
            Discretization::GridApprox
        },
    }
}

/// `n^e` as used by the scale factors.
fn scale(n: usize, e: f64) -> f64 {
    (n as f64).powf(e)
}

fn full_range(n: usize, lambda: f64) -> Result<(f64, f64)> {
    let lo = lambda / n as f64;
    let hi = 1.0 - lo;
    if lo > hi {
        return Err(Error::EmptyDomain(format!(
            "lambda/n = {lo} exceeds 1 - lambda/n for n = {n}"
        )));
    }
    Ok((lo, hi))
}

pub fn quantile_full_sup(n: usize, cfg: &WeightConfig) -> Result<DirectSup> {
    cfg.validate()?;
    let (lo, hi) = full_range(n, cfg.lambda)?;
    Ok(DirectSup {
        kind: ProcessKind::Quantile,
        lo,
        hi,
        scale: scale(n, cfg.eta),
        weight: Weight::Symmetric(0.5 - cfg.eta),
    })
}

pub fn empirical_full_sup(n: usize, cfg: &WeightConfig) -> Result<DirectSup> {
    cfg.validate()?;
    let (lo, hi) = full_range(n, cfg.lambda)?;
    Ok(DirectSup {
        kind: ProcessKind::Empirical,
        lo,
        hi,
        scale: scale(n, cfg.nu),
        weight: Weight::Symmetric(0.5 - cfg.nu),
    })
}

fn increment_sup(n: usize, cfg: &WeightConfig, kind: ProcessKind, e: f64) -> Result<IncrementSup> {
    cfg.validate()?;
    let lo = cfg.lambda / n as f64;
    if lo >= cfg.t {
        return Err(Error::EmptyDomain(format!(
            "lambda/n = {lo} is not below t = {}",
            cfg.t
        )));
    }
    Ok(IncrementSup {
        kind,
        t: cfg.t,
        lo,
        hi: cfg.t,
        scale: scale(n, e),
        weight: Weight::Lower(0.5 - e),
    })
}

pub fn quantile_increment_sup(n: usize, cfg: &WeightConfig) -> Result<IncrementSup> {
    increment_sup(n, cfg, ProcessKind::Quantile, cfg.eta)
}

pub fn empirical_increment_sup(n: usize, cfg: &WeightConfig) -> Result<IncrementSup> {
    increment_sup(n, cfg, ProcessKind::Empirical, cfg.nu)
}

/// Domain `[U_{1:n}, min(U_{t_n:n}, t))` with `t_n = [nt]`.
pub fn restricted_sup(order: &OrderStats, cfg: &WeightConfig) -> Result<IncrementSup> {
    cfg.validate()?;
    let n = order.n();
    let t_n = lattice_index(n, cfg.t);
    if t_n < 2 {
        return Err(Error::EmptyDomain(format!("t_n = [nt] = {t_n} is below 2")));
    }
    let u = order.values();
    // The increment is defined for s < t only.
    let hi = u[t_n].min(cfg.t);
    if u[1] >= hi {
        return Err(Error::EmptyDomain(format!("[{}, {hi}) is empty", u[1])));
    }
    Ok(IncrementSup {
        kind: ProcessKind::Empirical,
        t: cfg.t,
        lo: u[1],
        hi,
        scale: scale(n, cfg.nu),
        weight: Weight::Lower(0.5 - cfg.nu),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSide {
    Left,
    Right,
}

pub fn tail_sup(n: usize, d: f64, side: TailSide) -> Result<DirectSup> {
    if !(d >= 1.0 && d <= n as f64) {
        return Err(Error::domain(format!("d must lie in [1, n = {n}], got {d}")));
    }
    let w = d / n as f64;
    let (lo, hi) = match side {
        TailSide::Left => (0.0, w),
        TailSide::Right => (1.0 - w, 1.0),
    };
    Ok(DirectSup {
        kind: ProcessKind::Quantile,
        lo,
        hi,
        scale: 1.0,
        weight: Weight::Unit,
    })
}

/// Weighted sup of `|β_n - B_n|` over `[λ/n, 1 - λ/n]` with exponent `η`.
pub fn stat_quantile_full(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> Result<WeightedSupResult> {
    quantile_full_sup(order.n(), cfg)?.evaluate(order, bridge, g)
}

/// Weighted sup of `|α_n - B_n|` over `[λ/n, 1 - λ/n]` with exponent `ν`.
pub fn stat_empirical_full(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> Result<WeightedSupResult> {
    empirical_full_sup(order.n(), cfg)?.evaluate(order, bridge, g)
}

/// Weighted sup of `|β_n(s;t) - B_n(s)|` over `λ/n <= s < t`.
pub fn stat_quantile_increment(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> Result<WeightedSupResult> {
    quantile_increment_sup(order.n(), cfg)?.evaluate(order, bridge, g)
}

/// Weighted sup of `|α_n(s;t) - B_n(s)|` over `λ/n <= s < t`.
pub fn stat_empirical_increment(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> Result<WeightedSupResult> {
    empirical_increment_sup(order.n(), cfg)?.evaluate(order, bridge, g)
}

/// As [`stat_empirical_increment`] over `U_{1:n} <= s < U_{[nt]:n}`.
pub fn stat_restricted(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> Result<WeightedSupResult> {
    restricted_sup(order, cfg)?.evaluate(order, bridge, g)
}

/// Unweighted sup of `|β_n - B_n|` over `[0, d/n]` or `[1 - d/n, 1]`.
pub fn tail_sup_discrepancy(order: &OrderStats, bridge: &dyn Bridge, d: f64, side: TailSide, g: usize) -> Result<WeightedSupResult> {
    tail_sup(order.n(), d, side)?.evaluate(order, bridge, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{FnBridge, ProcessBundle};
    use std::collections::HashMap;

    fn toy() -> OrderStats {
        OrderStats::from_sorted(&[0.25, 0.75]).unwrap()
    }

    fn zero_bridge() -> FnBridge<impl Fn(f64, Side) -> f64 + Sync> {
        FnBridge(|_s: f64, _side: Side| 0.0)
    }

    #[test]
    fn config_validation() {
        assert!(WeightConfig::default().validate().is_ok());
        for bad in [
            WeightConfig { lambda: 0.0, ..Default::default() },
            WeightConfig { eta: 0.5, ..Default::default() },
            WeightConfig { nu: 0.25, ..Default::default() },
            WeightConfig { t: 1.0, ..Default::default() },
            WeightConfig { nu: -0.1, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn identical_processes_give_zero() {
        let b = ProcessBundle::generate_default(40, 1, 0).unwrap();
        let o = b.order().clone();
        let cfg = WeightConfig { eta: 0.25, nu: 0.1, ..Default::default() };
        let oq = o.clone();
        let beta = FnBridge(move |s: f64, side: Side| oq.quantile(s, side));
        let oe = o.clone();
        let alpha = FnBridge(move |s: f64, side: Side| oe.empirical(s, side));
        assert_eq!(stat_quantile_full(&o, &beta, &cfg, 8).unwrap().value, 0.0);
        assert_eq!(stat_empirical_full(&o, &alpha, &cfg, 8).unwrap().value, 0.0);
        assert_eq!(tail_sup_discrepancy(&o, &beta, 7.0, TailSide::Left, 8).unwrap().value, 0.0);

        // Bridges overwritten to equal the increment process at every point of
        // the evaluation set.
        let pinned = |sup: IncrementSup| {
            let mut table = HashMap::new();
            for c in sup.candidates(&o, 8).unwrap() {
                let v = sup.kind.eval(&o, sup.t, Side::At) - sup.kind.eval(&o, c.x, c.x_side);
                table.entry((c.s.to_bits(), c.s_side)).or_insert(v);
            }
            FnBridge(move |s: f64, side: Side| table[&(s.to_bits(), side)])
        };
        let beta_inc = pinned(quantile_increment_sup(o.n(), &cfg).unwrap());
        let alpha_inc = pinned(empirical_increment_sup(o.n(), &cfg).unwrap());
        let restricted_inc = pinned(restricted_sup(&o, &cfg).unwrap());
        assert_eq!(stat_quantile_increment(&o, &beta_inc, &cfg, 8).unwrap().value, 0.0);
        assert_eq!(stat_empirical_increment(&o, &alpha_inc, &cfg, 8).unwrap().value, 0.0);
        assert_eq!(stat_restricted(&o, &restricted_inc, &cfg, 8).unwrap().value, 0.0);
    }

    #[test]
    fn single_point_discrepancy() {
        // P - B = δ0 only at s = 1/2, zero elsewhere: weight (1/4)^{1/2} = 1/2.
        let n = 16;
        let b = ProcessBundle::generate_default(n, 2, 0).unwrap();
        let o = b.order().clone();
        let delta0 = 0.37;
        let cfg = WeightConfig::default();
        let oq = o.clone();
        let beta = FnBridge(move |s: f64, side: Side| {
            oq.quantile(s, side) - if s == 0.5 { delta0 } else { 0.0 }
        });
        let r = stat_quantile_full(&o, &beta, &cfg, 8).unwrap();
        assert!((r.value - 2.0 * delta0).abs() < 1e-15);
        assert_eq!(r.arg_s, 0.5);
        let oe = o.clone();
        let alpha = FnBridge(move |s: f64, side: Side| {
            oe.empirical(s, side) - if s == 0.5 { delta0 } else { 0.0 }
        });
        let r = stat_empirical_full(&o, &alpha, &cfg, 8).unwrap();
        assert!((r.value - 2.0 * delta0).abs() < 1e-15);
    }

    #[test]
    fn hand_increment_value() {
        // n = 2, U = {0.25, 0.75}, t = 0.9, s = 0.5, zero bridge, η = 0:
        // |β(0.9) - β(0.4)| / √0.5 = √2 · 0.25 / √0.5 = 0.5.
        let o = toy();
        let sup = IncrementSup {
            kind: ProcessKind::Quantile,
            t: 0.9,
            lo: 0.5,
            hi: 0.9,
            scale: 1.0,
            weight: Weight::Lower(0.5),
        };
        let c = Candidate::direct(0.5, Side::At).with_x(0.9 - 0.5, Side::At);
        let v = sup.value_at(&o, &zero_bridge(), &c);
        assert!((v - 0.5).abs() < 1e-15, "{v}");
    }

    #[test]
    fn empty_domains_and_bad_arguments() {
        let o = toy();
        let cfg = WeightConfig { lambda: 1.5, ..Default::default() };
        assert!(matches!(
            stat_quantile_full(&o, &zero_bridge(), &cfg, 8),
            Err(Error::EmptyDomain(_))
        ));
        let cfg = WeightConfig { lambda: 1.0, t: 0.4, ..Default::default() };
        assert!(matches!(
            stat_quantile_increment(&o, &zero_bridge(), &cfg, 8),
            Err(Error::EmptyDomain(_))
        ));
        assert!(matches!(
            stat_restricted(&o, &zero_bridge(), &WeightConfig::default(), 8),
            Err(Error::EmptyDomain(_))
        ));
        assert!(tail_sup_discrepancy(&o, &zero_bridge(), 0.5, TailSide::Left, 8).is_err());
        assert!(tail_sup_discrepancy(&o, &zero_bridge(), 3.0, TailSide::Left, 8).is_err());
        assert!(stat_quantile_full(&o, &zero_bridge(), &WeightConfig::default(), 0).is_err());
    }

    #[test]
    fn full_tail_equals_global_sup() {
        let b = ProcessBundle::generate_default(32, 4, 0).unwrap();
        let br = b.bridge();
        let left = tail_sup_discrepancy(b.order(), &br, 32.0, TailSide::Left, 8).unwrap();
        let right = tail_sup_discrepancy(b.order(), &br, 32.0, TailSide::Right, 8).unwrap();
        assert_eq!(left.value, right.value);
        let sup = DirectSup {
            kind: ProcessKind::Quantile,
            lo: 0.0,
            hi: 1.0,
            scale: 1.0,
            weight: Weight::Unit,
        };
        assert_eq!(sup.evaluate(b.order(), &br, 8).unwrap().value, left.value);
    }

    #[test]
    fn discretization_flag() {
        let b = ProcessBundle::generate_default(32, 4, 0).unwrap();
        let cfg = WeightConfig { lambda: 2.0, ..Default::default() };
        let exact = stat_quantile_full(b.order(), &b.bridge(), &cfg, 1).unwrap();
        assert_eq!(exact.discretization, Discretization::ExactAtJumps);
        let approx = stat_quantile_full(b.order(), &b.bridge(), &cfg, 8).unwrap();
        assert_eq!(approx.discretization, Discretization::GridApprox);
        assert!(approx.value >= exact.value);
    }
}
