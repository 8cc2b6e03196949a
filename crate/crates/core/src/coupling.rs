//! Joint construction of exponential partial sums and a Brownian motion.
//!
//! The Brownian values are drawn first: `W(m)` and then bridge midpoints by
//! bisection, breadth first. Every Gaussian variable is reused, through its
//! normal CDF, as the uniform driving a conditional quantile transform of the
//! sums: the total `S_m ~ Gamma(m, 1)` at the top, and at each split of a block
//! of `k` summands the left share of the block sum, which is `Beta(k/2, k/2)`
//! and independent of the sum. The leaves are the individual `Exp(1)`
//! increments.
//!
//! Values of `W` between integer times are produced lazily, per unit cell, by
//! further bridge bisection from a sub-stream keyed by the cell index, so the
//! result does not depend on query order.

use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{median, ols};
use crate::numerics::{beta_quantile_of_normal, gamma_quantile_of_normal};
use crate::rng::RngStream;

pub const DEFAULT_REFINE_DEPTH: u32 = 6;
pub const MAX_REFINE_DEPTH: u32 = 24;

const REFINE_KEY: u64 = 0x7265_6669_6e65;

#[derive(Debug, Clone)]
struct Refinement {
    depth: u32,
    stream: RngStream,
    cells: Vec<OnceLock<Box<[f64]>>>,
}

/// Exponential partial sums `S_0..S_m` and Brownian values on one path.
#[derive(Debug, Clone)]
pub struct CoupledPath {
    m: usize,
    s: Vec<f64>,
    w: Vec<f64>,
    clamp_count: usize,
    refinement: Refinement,
}

fn check_pow2(m: usize) -> Result<()> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::precondition(format!(
            "path size must be a power of two, got {m}"
        )));
    }
    Ok(())
}

/// Builds a coupled path of `m = 2^L` summands from `stream`.
pub fn couple_exponential_sums(m: usize, stream: RngStream) -> Result<CoupledPath> {
    check_pow2(m)?;
    let mut rng = stream.rng();
    let normals: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    couple_from_normals(m, &normals, stream.substream(REFINE_KEY))
}

/// Builds a coupled path from explicit standard normals in breadth-first
/// order: `normals[0]` drives the top level, then each level's blocks left
/// to right. Exactly `m` values are consumed.
pub fn couple_from_normals(
    m: usize,
    normals: &[f64],
    refinement_stream: RngStream,
) -> Result<CoupledPath> {
    check_pow2(m)?;
    if normals.len() < m {
        return Err(Error::precondition(format!(
            "need {m} normals, got {}",
            normals.len()
        )));
    }
    let mut w = vec![0.0; m + 1];
    let mut clamp_count = 0;

    let z0 = normals[0];
    w[m] = (m as f64).sqrt() * z0;
    let (top, clamped) = gamma_quantile_of_normal(m as f64, z0).map_err(|e| Error::Coupling {
        m,
        start: 0,
        end: m,
        source: Box::new(e),
    })?;
    clamp_count += clamped as usize;

    let mut sums = vec![top];
    let mut k = m;
    let mut next_normal = 1;
    while k >= 2 {
        let half = k / 2;
        let sd = (k as f64 / 4.0).sqrt();
        let shape = half as f64;
        let mut next = Vec::with_capacity(2 * sums.len());
        for (b, &block_sum) in sums.iter().enumerate() {
            let a = b * k;
            let z = normals[next_normal];
            next_normal += 1;
            w[a + half] = 0.5 * (w[a] + w[a + k]) + sd * z;
            let (x, y, clamped) =
                beta_quantile_of_normal(shape, shape, z).map_err(|e| Error::Coupling {
                    m,
                    start: a,
                    end: a + k,
                    source: Box::new(e),
                })?;
            clamp_count += clamped as usize;
            next.push(block_sum * x);
            next.push(block_sum * y);
        }
        sums = next;
        k = half;
    }

    let mut s = Vec::with_capacity(m + 1);
    s.push(0.0);
    let mut acc = 0.0;
    for inc in sums {
        acc += inc;
        s.push(acc);
    }

    Ok(CoupledPath {
        m,
        s,
        w,
        clamp_count,
        refinement: Refinement {
            depth: DEFAULT_REFINE_DEPTH,
            stream: refinement_stream,
            cells: (0..m).map(|_| OnceLock::new()).collect(),
        },
    })
}

impl CoupledPath {
    /// Replaces the refinement stream and depth. Any cached refinement is
    /// discarded.
    pub fn with_refinement(mut self, stream: RngStream, depth: u32) -> Result<Self> {
        if depth > MAX_REFINE_DEPTH {
            return Err(Error::precondition(format!(
                "refinement depth {depth} exceeds the maximum {MAX_REFINE_DEPTH}"
            )));
        }
        self.refinement = Refinement {
            depth,
            stream,
            cells: (0..self.m).map(|_| OnceLock::new()).collect(),
        };
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Partial sums `S_0 = 0, S_1, …, S_m`.
    pub fn sums(&self) -> &[f64] {
        &self.s
    }

    /// Brownian values at the integers `0..=m`.
    pub fn brownian(&self) -> &[f64] {
        &self.w
    }

    /// `S_k - S_{k-1}` for `k = 1..=m`.
    pub fn increments(&self) -> Vec<f64> {
        self.s.windows(2).map(|p| p[1] - p[0]).collect()
    }

    pub fn clamp_count(&self) -> usize {
        self.clamp_count
    }

    pub fn refinement_depth(&self) -> u32 {
        self.refinement.depth
    }

    fn cell(&self, c: usize) -> &[f64] {
        self.refinement.cells[c].get_or_init(|| self.bisect_cell(c))
    }

    fn bisect_cell(&self, c: usize) -> Box<[f64]> {
        let depth = self.refinement.depth;
        let len = 1usize << depth;
        let mut v = vec![0.0; len + 1];
        v[0] = self.w[c];
        v[len] = self.w[c + 1];
        let mut rng = self.refinement.stream.substream(c as u64).rng();
        let mut step = len;
        while step >= 2 {
            let half = step / 2;
            let sd = (step as f64 / len as f64 / 4.0).sqrt();
            for left in (0..len).step_by(step) {
                let z: f64 = rng.sample(StandardNormal);
                v[left + half] = 0.5 * (v[left] + v[left + step]) + sd * z;
            }
            step = half;
        }
        v.into_boxed_slice()
    }

    // Value at grid index `r` of the finest dyadic grid (spacing 2^-depth).
    fn at_grid(&self, r: u64) -> f64 {
        let depth = self.refinement.depth;
        let cell = (r >> depth) as usize;
        let off = (r & ((1u64 << depth) - 1)) as usize;
        if off == 0 {
            self.w[cell]
        } else {
            self.cell(cell)[off]
        }
    }

    /// `W(t)` with `t` rounded to the finest refinement grid. `t` is clamped to
    /// `[0, m]`.
    pub fn w_at(&self, t: f64) -> f64 {
        let scale = (1u64 << self.refinement.depth) as f64;
        let top = (self.m as u64) << self.refinement.depth;
        let r = (t * scale).round().clamp(0.0, top as f64) as u64;
        self.at_grid(r)
    }

    /// `W(t')` where `t'` is `t` rounded to the dyadic grid of spacing
    /// `2^-depth`.
    pub fn refine_brownian(&self, t: f64, depth: u32) -> Result<f64> {
        if depth > self.refinement.depth {
            return Err(Error::precondition(format!(
                "requested depth {depth} exceeds the configured maximum {}",
                self.refinement.depth
            )));
        }
        if !(0.0..=self.m as f64).contains(&t) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.m)));
        }
        let coarse = (t * (1u64 << depth) as f64).round() as u64;
        Ok(self.at_grid(coarse << (self.refinement.depth - depth)))
    }

    /// Materializes every refinement cell; afterwards all reads are plain
    /// loads.
    pub fn freeze(&self) {
        for c in 0..self.m {
            self.cell(c);
        }
    }

    /// Writes `k S_k W_k` rows, space separated, after a header line.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k S_k W_k")?;
        for k in 0..=self.m {
            writeln!(out, "{} {} {}", k, self.s[k], self.w[k])?;
        }
        Ok(())
    }
}

/// `max_{1≤k≤m} |S_k - k - W(k)|` and the first `k` attaining it.
pub fn max_discrepancy(path: &CoupledPath) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 1..=path.m {
        let d = (path.s[k] - k as f64 - path.w[k]).abs();
        if d > best.0 {
            best = (d, k);
        }
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KmtTailFit {
    /// Slope of the median maximal gap against `ln m`; `None` when the ladder
    /// has a single size.
    pub c_hat: Option<f64>,
    pub growth_r_squared: Option<f64>,
    pub k_hat: f64,
    pub mu_hat: f64,
    pub m_ladder: Vec<usize>,
    pub medians: Vec<f64>,
    /// Residual standard error of the tail regression.
    pub residual: f64,
    pub tail_points: usize,
}

pub const MIN_TAIL_REPS: usize = 100;

/// Fits the logarithmic growth and exponential tail of the maximal gap.
///
/// For each `m` in the ladder, `reps` independent paths are built. The median
/// gap is regressed on `ln m` (`C_hat` is the slope). The pooled exceedance
/// `P{max ≥ C_hat ln m + x}` is then estimated on `x = 0, 0.5, 1, …` and its
/// logarithm regressed on `x`; `-mu_hat` is the slope and `ln K_hat` the
/// intercept. Only points with at least 5 exceedances and at least one
/// non-exceedance enter the tail fit.
pub fn fit_kmt_tail(ladder: &[usize], reps: usize, stream: RngStream) -> Result<KmtTailFit> {
    if ladder.is_empty() {
        return Err(Error::precondition("fit_kmt_tail needs a nonempty ladder"));
    }
    if reps < MIN_TAIL_REPS {
        return Err(Error::precondition(format!(
            "fit_kmt_tail needs at least {MIN_TAIL_REPS} replicates, got {reps}"
        )));
    }
    let mut maxima = Vec::with_capacity(ladder.len());
    for &m in ladder {
        check_pow2(m)?;
        let size_stream = stream.substream(m as u64);
        let values = (0..reps)
            .into_par_iter()
            .map(|rep| {
                couple_exponential_sums(m, size_stream.substream(rep as u64))
                    .map(|p| max_discrepancy(&p).0)
            })
            .collect::<Result<Vec<f64>>>()?;
        maxima.push(values);
    }
    let medians: Vec<f64> = maxima.iter().map(|v| median(v)).collect();

    let (c_hat, growth_r_squared) = if ladder.len() >= 2 {
        let x: Vec<f64> = ladder.iter().map(|&m| (m as f64).ln()).collect();
        let fit = ols(&x, &medians)?;
        (Some(fit.slope), Some(fit.r_squared))
    } else {
        (None, None)
    };

    let baseline = c_hat.unwrap_or(0.0);
    let excess: Vec<f64> = ladder
        .iter()
        .zip(&maxima)
        .flat_map(|(&m, v)| v.iter().map(move |d| d - baseline * (m as f64).ln()))
        .collect();
    let total = excess.len();
    let top = excess.iter().cloned().fold(0.0f64, f64::max);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut x = 0.0;
    while x <= top {
        let count = excess.iter().filter(|&&e| e >= x).count();
        if count >= 5 && count < total {
            xs.push(x);
            ys.push((count as f64 / total as f64).ln());
        }
        x += 0.5;
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "only {} usable exceedance estimates for the tail fit",
            xs.len()
        )));
    }
    let tail = ols(&xs, &ys)?;
    Ok(KmtTailFit {
        c_hat,
        growth_r_squared,
        k_hat: tail.intercept.exp(),
        mu_hat: -tail.slope,
        m_ladder: ladder.to_vec(),
        medians,
        residual: tail.residual_se,
        tail_points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::reg_gamma_p;

    fn origin() -> RngStream {
        RngStream::new(0, 0)
    }

    // Bisection root of (1 + x) e^{-x} = 1/2, independent of the gamma code.
    fn gamma2_median_oracle() -> f64 {
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (1.0 + mid) * (-mid).exp() > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn single_summand_at_zero_is_ln2() {
        let p = couple_from_normals(1, &[0.0], origin()).unwrap();
        assert_eq!(p.brownian(), &[0.0, 0.0]);
        assert!((p.sums()[1] - std::f64::consts::LN_2).abs() < 1e-15);
        let (d, k) = max_discrepancy(&p);
        assert_eq!(k, 1);
        assert!((d - (1.0 - std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((d - 0.306_853).abs() < 1e-6);
    }

    #[test]
    fn two_summands_at_zero_split_the_gamma2_median() {
        let p = couple_from_normals(2, &[0.0, 0.0], origin()).unwrap();
        let median = gamma2_median_oracle();
        assert!((median - 1.678_35).abs() < 1e-5);
        assert!((p.sums()[2] - median).abs() < 1e-12);
        assert!((p.sums()[1] - median / 2.0).abs() < 1e-12);
        assert_eq!(p.brownian(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn normals_are_consumed_breadth_first() {
        // m = 4: z0 top, z1 splits [0,4), z2 splits [0,2), z3 splits [2,4).
        let z = [0.3, -0.4, 1.1, -0.7];
        let p = couple_from_normals(4, &z, origin()).unwrap();
        let w = p.brownian();
        assert!((w[4] - 2.0 * 0.3).abs() < 1e-15);
        assert!((w[2] - (0.5 * w[4] - 0.4)).abs() < 1e-15);
        assert!((w[1] - (0.5 * w[2] + 0.5f64.sqrt() * 1.1)).abs() < 1e-15);
        assert!((w[3] - (0.5 * (w[2] + w[4]) - 0.5f64.sqrt() * 0.7)).abs() < 1e-15);
        // The first split's Beta(2,2) share is monotone in z1: z1 < 0 puts less
        // mass on the left.
        let s = p.sums();
        assert!(s[2] < s[4] / 2.0);
    }

    #[test]
    fn rejects_non_powers_of_two() {
        assert!(couple_exponential_sums(3, origin()).is_err());
        assert!(couple_exponential_sums(0, origin()).is_err());
        assert!(couple_from_normals(4, &[0.0; 3], origin()).is_err());
    }

    #[test]
    fn deterministic_and_increasing() {
        let st = RngStream::new(11, 5);
        let a = couple_exponential_sums(256, st).unwrap();
        let b = couple_exponential_sums(256, st).unwrap();
        assert_eq!(a.sums(), b.sums());
        assert_eq!(a.brownian(), b.brownian());
        assert!(a.increments().iter().all(|&d| d > 0.0));
        assert_eq!(a.brownian()[0], 0.0);
        assert_eq!(a.clamp_count(), 0);
    }

    #[test]
    fn refinement_contract() {
        let p = couple_exponential_sums(8, RngStream::new(3, 1)).unwrap();
        assert_eq!(p.refine_brownian(0.0, 3).unwrap(), 0.0);
        assert_eq!(p.refine_brownian(5.0, 0).unwrap(), p.brownian()[5]);
        let a = p.refine_brownian(2.5, 1).unwrap();
        let b = p.refine_brownian(2.5, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, p.w_at(2.5));
        // Rounding to the requested grid.
        assert_eq!(p.refine_brownian(2.49, 1).unwrap(), a);
        assert!(p.refine_brownian(2.5, 7).is_err());
        assert!(p.refine_brownian(8.5, 2).is_err());
        // Query order does not matter.
        let q = couple_exponential_sums(8, RngStream::new(3, 1)).unwrap();
        let late = q.w_at(6.75);
        q.freeze();
        assert_eq!(late, q.w_at(6.75));
        assert_eq!(late, p.w_at(6.75));
    }

    #[test]
    fn refinement_bridge_variance() {
        // Var of W(a + 1/2) given the endpoints is 1/4.
        let reps = 4000;
        let mut acc = 0.0;
        for r in 0..reps {
            let p = couple_exponential_sums(2, RngStream::new(8, r)).unwrap();
            let w = p.brownian();
            let dev = p.w_at(0.5) - 0.5 * (w[0] + w[1]);
            acc += dev * dev;
        }
        let var = acc / reps as f64;
        // Sample variance of 4000 draws: relative sd about sqrt(2/4000) ≈ 2.2%.
        assert!((var - 0.25).abs() < 0.25 * 0.09, "var = {var}");
    }

    #[test]
    fn max_discrepancy_matches_loop_and_zero_case() {
        let p = couple_exponential_sums(64, RngStream::new(1, 2)).unwrap();
        let (v, k) = max_discrepancy(&p);
        let brute = (1..=64)
            .map(|k| (p.sums()[k] - k as f64 - p.brownian()[k]).abs())
            .fold(0.0f64, f64::max);
        assert_eq!(v, brute);
        assert_eq!((p.sums()[k] - k as f64 - p.brownian()[k]).abs(), v);

        let mut synthetic = p.clone();
        synthetic.w = (0..=64).map(|k| synthetic.s[k] - k as f64).collect();
        assert_eq!(max_discrepancy(&synthetic).0, 0.0);
    }

    #[test]
    fn dump_format() {
        let p = couple_from_normals(1, &[0.0], origin()).unwrap();
        let mut buf = Vec::new();
        p.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k S_k W_k");
        assert_eq!(lines[1], "0 0 0");
        assert!(lines[2].starts_with("1 0.693147"));
    }

    #[test]
    fn top_sum_is_gamma_distributed() {
        let m = 16;
        let reps = 2000;
        let xs: Vec<f64> = (0..reps)
            .map(|r| couple_exponential_sums(m, RngStream::new(21, r)).unwrap().sums()[m])
            .collect();
        let ks = crate::gof::ks_test(&xs, |x| reg_gamma_p(m as f64, x.max(0.0)).unwrap());
        assert!(ks.passes(0.01), "{ks:?}");
    }

    #[test]
    fn tail_fit_contracts() {
        let st = RngStream::new(5, 0);
        assert!(fit_kmt_tail(&[16], 99, st).is_err());
        assert!(fit_kmt_tail(&[], 100, st).is_err());
        let fit = fit_kmt_tail(&[64], 100, st).unwrap();
        assert!(fit.c_hat.is_none() && fit.growth_r_squared.is_none());
        assert!(fit.mu_hat.is_finite());
        assert_eq!(fit.medians.len(), 1);
    }
}
