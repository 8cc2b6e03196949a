//! Exhaustive reference evaluations of the weighted statistics.
//!
//! These rebuild the evaluation sets with plain loops and evaluate the step
//! processes by linear counting, without the binary searches, lattice-index
//! corrections or candidate machinery of [`crate::stats`]. The final
//! arithmetic per point is written out identically, so on the same set the
//! maxima agree bit for bit. Intended for small `n`.

use crate::censored::{CensoredConfig, CensoringModel};
use crate::process::{Bridge, OrderStats, Side};
use crate::stats::{TailSide, WeightConfig};

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Empirical,
    Quantile,
}

#[derive(Clone, Copy)]
enum W {
    Symmetric(f64),
    Lower(f64),
    Upper(f64),
    Unit,
}

fn weight(w: W, s: f64) -> f64 {
    match w {
        W::Symmetric(p) => (s * (1.0 - s)).powf(p),
        W::Lower(p) => s.powf(p),
        W::Upper(p) => (1.0 - s).powf(p),
        W::Unit => 1.0,
    }
}

// Linear-scan process values.
fn process(u: &[f64], kind: Kind, x: f64, side: Side) -> f64 {
    let n = u.len() - 1;
    let sqrt_n = (n as f64).sqrt();
    match kind {
        Kind::Empirical => {
            let mut count = 0usize;
            for &v in &u[1..] {
                let hit = match side {
                    Side::Before => v < x,
                    Side::At | Side::After => v <= x,
                };
                if hit {
                    count += 1;
                }
            }
            sqrt_n * (count as f64 / n as f64 - x)
        }
        Kind::Quantile => {
            let mut k = 0usize;
            for j in 0..=n {
                let p = j as f64 / n as f64;
                let below = match side {
                    Side::Before => p < x,
                    Side::At | Side::After => p <= x,
                };
                if below {
                    k = j;
                }
            }
            sqrt_n * (x - u[k])
        }
    }
}

fn jumps(u: &[f64], kind: Kind) -> Vec<f64> {
    let n = u.len() - 1;
    match kind {
        Kind::Empirical => u[1..].to_vec(),
        Kind::Quantile => (1..=n).map(|j| j as f64 / n as f64).collect(),
    }
}

fn fine_grid(n: usize, g: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * g + 1);
    for i in 0..n * g {
        let (k, j) = (i / g, i % g);
        out.push((k as f64 + j as f64 / g as f64) / n as f64);
    }
    out.push(1.0);
    out
}

#[allow(clippy::too_many_arguments)]
fn direct(u: &[f64], bridge: &dyn Bridge, kind: Kind, lo: f64, hi: f64, scale: f64, w: W, g: usize) -> f64 {
    let value = |s: f64, side: Side| {
        scale * (process(u, kind, s, side) - bridge.at_side(s, side)).abs() / weight(w, s)
    };
    let mut best = value(lo, Side::At).max(value(hi, Side::At));
    for s in fine_grid(u.len() - 1, g) {
        if s >= lo && s <= hi {
            best = best.max(value(s, Side::At));
        }
    }
    for p in jumps(u, kind) {
        if p >= lo && p <= hi {
            best = best.max(value(p, Side::At));
            if p > lo {
                best = best.max(value(p, Side::Before));
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn increment(u: &[f64], bridge: &dyn Bridge, kind: Kind, t: f64, lo: f64, hi: f64, scale: f64, w: W, g: usize) -> f64 {
    let at_t = process(u, kind, t, Side::At);
    let value = |s: f64, s_side: Side, x: f64, x_side: Side| {
        scale * ((at_t - process(u, kind, x, x_side)) - bridge.at_side(s, s_side)).abs() / weight(w, s)
    };
    let (x_lo, x_hi) = (t - hi, t - lo);
    let mut best = value(lo, Side::At, x_hi, Side::At).max(value(hi, Side::Before, x_lo, Side::At));
    for x in fine_grid(u.len() - 1, g) {
        if x > x_lo && x <= x_hi {
            best = best.max(value(t - x, Side::At, x, Side::At));
        }
    }
    for p in jumps(u, kind) {
        if p > x_lo && p <= x_hi {
            best = best.max(value(t - p, Side::At, p, Side::At));
            best = best.max(value(t - p, Side::After, p, Side::Before));
        }
    }
    best
}

fn n_of(order: &OrderStats) -> f64 {
    order.n() as f64
}

pub fn quantile_full(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> f64 {
    let lo = cfg.lambda / n_of(order);
    let scale = n_of(order).powf(cfg.eta);
    direct(order.values(), bridge, Kind::Quantile, lo, 1.0 - lo, scale, W::Symmetric(0.5 - cfg.eta), g)
}

pub fn empirical_full(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> f64 {
    let lo = cfg.lambda / n_of(order);
    let scale = n_of(order).powf(cfg.nu);
    direct(order.values(), bridge, Kind::Empirical, lo, 1.0 - lo, scale, W::Symmetric(0.5 - cfg.nu), g)
}

pub fn quantile_increment(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> f64 {
    let lo = cfg.lambda / n_of(order);
    let scale = n_of(order).powf(cfg.eta);
    increment(order.values(), bridge, Kind::Quantile, cfg.t, lo, cfg.t, scale, W::Lower(0.5 - cfg.eta), g)
}

pub fn empirical_increment(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> f64 {
    let lo = cfg.lambda / n_of(order);
    let scale = n_of(order).powf(cfg.nu);
    increment(order.values(), bridge, Kind::Empirical, cfg.t, lo, cfg.t, scale, W::Lower(0.5 - cfg.nu), g)
}

pub fn restricted(order: &OrderStats, bridge: &dyn Bridge, cfg: &WeightConfig, g: usize) -> f64 {
    let u = order.values();
    let n = order.n();
    // t_n = [nt] by direct search.
    let mut t_n = 0;
    for j in 0..=n {
        if j as f64 / n as f64 <= cfg.t {
            t_n = j;
        }
    }
    let scale = n_of(order).powf(cfg.nu);
    let hi = if u[t_n] < cfg.t { u[t_n] } else { cfg.t };
    increment(u, bridge, Kind::Empirical, cfg.t, u[1], hi, scale, W::Lower(0.5 - cfg.nu), g)
}

pub fn tail(order: &OrderStats, bridge: &dyn Bridge, d: f64, side: TailSide, g: usize) -> f64 {
    let w = d / n_of(order);
    let (lo, hi) = match side {
        TailSide::Left => (0.0, w),
        TailSide::Right => (1.0 - w, 1.0),
    };
    direct(order.values(), bridge, Kind::Quantile, lo, hi, 1.0, W::Unit, g)
}

pub fn censored_h0(xi: &OrderStats, model: &CensoringModel, bridge: &dyn Bridge, cfg: &CensoredConfig, g: usize) -> f64 {
    let hi = 1.0 - cfg.lambda / n_of(xi);
    let scale = n_of(xi).powf(cfg.xi);
    direct(xi.values(), bridge, Kind::Empirical, model.theta(), hi, scale, W::Upper(0.5 - cfg.xi), g)
}

pub fn censored_h1(xi: &OrderStats, model: &CensoringModel, bridge: &dyn Bridge, cfg: &CensoredConfig, g: usize) -> f64 {
    let theta = model.theta();
    let lo = cfg.lambda / n_of(xi);
    let scale = n_of(xi).powf(cfg.xi);
    increment(xi.values(), bridge, Kind::Empirical, theta, lo, theta, scale, W::Lower(0.5 - cfg.xi), g)
}
