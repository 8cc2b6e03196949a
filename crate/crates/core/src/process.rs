//! Uniform order statistics, empirical and quantile processes and the coupled
//! Brownian bridge for a fixed sample size `n`.
//!
//! Two independent coupled paths are spliced: the interleaved sequence
//! `Y_1..Y_{n+1}` takes the first `[n/2]` increments of path 1 in reverse order
//! followed by the first `n + 1 - [n/2]` increments of path 2 in reverse
//! order, and
//!
//! ```text
//! W_n(s) = W1(s)                                  s <= [n/2]
//!        = W1([n/2]) + W2(n+1-[n/2]) - W2(n+1-s)  otherwise
//! B_n(s) = n^{-1/2} (s W_n(n) - W_n(sn))
//! U_k    = S_k / S_{n+1}
//! ```

use serde::{Deserialize, Serialize};

use crate::coupling::{couple_exponential_sums, CoupledPath, DEFAULT_REFINE_DEPTH};
use crate::error::{Error, Result};
use crate::rng::{replicate_stream, Role};

/// Which value of a càdlàg function is meant at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// The value at the point (equal to the right limit).
    At,
    /// The left limit.
    Before,
    /// The right limit, kept distinct for processes that are not
    /// right-continuous in the variable being scanned.
    After,
}

/// A bridge-like process on `[0, 1]`.
pub trait Bridge: Sync {
    fn at(&self, s: f64) -> f64;

    /// One-sided value; continuous bridges ignore `side`.
    fn at_side(&self, s: f64, side: Side) -> f64 {
        let _ = side;
        self.at(s)
    }
}

/// Bridge given by a closure of `(s, side)`, mainly for synthetic tests.
pub struct FnBridge<F>(pub F);

impl<F: Fn(f64, Side) -> f64 + Sync> Bridge for FnBridge<F> {
    fn at(&self, s: f64) -> f64 {
        (self.0)(s, Side::At)
    }

    fn at_side(&self, s: f64, side: Side) -> f64 {
        (self.0)(s, side)
    }
}

/// `Y_1..Y_{n+1}` from the two source sequences (0-based slices holding the
/// 1-based sequences `seq[1], seq[2], …`).
pub fn interleave<T: Copy>(n: usize, seq1: &[T], seq2: &[T]) -> Result<Vec<T>> {
    if n < 2 {
        return Err(Error::precondition(format!("interleave needs n >= 2, got {n}")));
    }
    let h = n / 2;
    if seq1.len() < h || seq2.len() < n + 1 - h {
        return Err(Error::precondition(format!(
            "interleave with n = {n} needs {h} and {} source values, got {} and {}",
            n + 1 - h,
            seq1.len(),
            seq2.len()
        )));
    }
    let mut y = Vec::with_capacity(n + 1);
    for j in 1..=h {
        y.push(seq1[h - j]);
    }
    for j in h + 1..=n + 1 {
        y.push(seq2[n + 1 - j]);
    }
    Ok(y)
}

/// Largest `k` in `0..=n` with `k/n <= x` (as computed by `k as f64 / n as f64`),
/// i.e. `[nx]` clamped to `0..=n`.
pub fn lattice_index(n: usize, x: f64) -> usize {
    if !(x > 0.0) {
        return 0;
    }
    let nf = n as f64;
    let mut k = ((x * nf).floor().max(0.0) as usize).min(n);
    while k < n && ((k + 1) as f64) / nf <= x {
        k += 1;
    }
    while k > 0 && (k as f64) / nf > x {
        k -= 1;
    }
    k
}

/// Sorted uniform sample with the empirical and quantile processes built on it.
#[derive(Clone, Debug)]
pub struct OrderStats {
    n: usize,
    sqrt_n: f64,
    /// `u[0] = 0`, `u[k]` the `k`-th smallest value.
    u: Vec<f64>,
}

impl OrderStats {
    /// From strictly increasing values in `(0, 1)`.
    pub fn from_sorted(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::precondition("order statistics need at least one value"));
        }
        let mut u = Vec::with_capacity(n + 1);
        u.push(0.0);
        for &v in values {
            if !(v > *u.last().unwrap() && v < 1.0) {
                return Err(Error::domain(format!(
                    "order statistics must be strictly increasing inside (0, 1); got {v} after {}",
                    u.last().unwrap()
                )));
            }
            u.push(v);
        }
        Ok(Self {
            n,
            sqrt_n: (n as f64).sqrt(),
            u,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `U_{0:n} = 0, U_{1:n}, …, U_{n:n}`.
    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// `#{k >= 1 : U_k <= x}`.
    pub fn count_le(&self, x: f64) -> usize {
        self.u[1..].partition_point(|&v| v <= x)
    }

    /// `#{k >= 1 : U_k < x}`.
    pub fn count_lt(&self, x: f64) -> usize {
        self.u[1..].partition_point(|&v| v < x)
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, s: f64) -> f64 {
        self.count_le(s) as f64 / self.n as f64
    }

    /// `α_n(s) = √n (G_n(s) - s)`.
    pub fn empirical(&self, s: f64, side: Side) -> f64 {
        let count = match side {
            Side::At | Side::After => self.count_le(s),
            Side::Before => self.count_lt(s),
        };
        self.sqrt_n * (count as f64 / self.n as f64 - s)
    }

    /// `β_n(s) = √n (s - U_{[ns]:n})`.
    pub fn quantile(&self, s: f64, side: Side) -> f64 {
        let mut k = lattice_index(self.n, s);
        if side == Side::Before && k > 0 && (k as f64) / (self.n as f64) == s {
            k -= 1;
        }
        self.sqrt_n * (s - self.u[k])
    }
}

/// `f(s; t) = f(t) - f(t - s)` for `0 <= s < t < 1`.
pub fn increment<F: Fn(f64) -> f64>(f: F, s: f64, t: f64) -> Result<f64> {
    if !(0.0 <= s && s < t && t < 1.0) {
        return Err(Error::domain(format!(
            "increment needs 0 <= s < t < 1, got s = {s}, t = {t}"
        )));
    }
    Ok(f(t) - f(t - s))
}

/// `[nt] - [n(t-s)] - [ns]` with floating-point floors.
pub fn floor_combination(n: usize, s: f64, t: f64) -> Result<i64> {
    if !(0.0 <= s && s < t && t < 1.0) {
        return Err(Error::domain(format!(
            "floor combination needs 0 <= s < t < 1, got s = {s}, t = {t}"
        )));
    }
    let nf = n as f64;
    let v = (nf * t).floor() as i64 - (nf * (t - s)).floor() as i64 - (nf * s).floor() as i64;
    debug_assert!((-2..=1).contains(&v));
    Ok(v)
}

/// The same combination at `s = i/den`, `t = j/den` in exact integer
/// arithmetic.
pub fn floor_combination_rational(n: u64, i: u64, j: u64, den: u64) -> i64 {
    assert!(i < j && j < den, "need 0 <= i < j < den");
    ((n * j) / den) as i64 - ((n * (j - i)) / den) as i64 - ((n * i) / den) as i64
}

/// Summand counts needed from each path for sample size `n`.
pub fn path_sizes(n: usize) -> (usize, usize) {
    let h = n / 2;
    (h.max(1).next_power_of_two(), (n + 1 - h).next_power_of_two())
}

/// One replicate at sample size `n`: the two coupled paths, the interleaved
/// exponentials, their partial sums and the uniform order statistics.
#[derive(Clone, Debug)]
pub struct ProcessBundle {
    n: usize,
    path1: CoupledPath,
    path2: CoupledPath,
    y: Vec<f64>,
    s: Vec<f64>,
    order: OrderStats,
    sqrt_n: f64,
}

impl ProcessBundle {
    /// Builds the replicate `(seed, n, rep)` with refinement depth `depth`.
    pub fn generate(n: usize, seed: u64, rep: usize, depth: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::precondition(format!("sample size must be >= 2, got {n}")));
        }
        let (m1, m2) = path_sizes(n);
        let refine = replicate_stream(seed, n, rep, Role::Refinement);
        let path1 = couple_exponential_sums(m1, replicate_stream(seed, n, rep, Role::Path1))?
            .with_refinement(refine.substream(1), depth)?;
        let path2 = couple_exponential_sums(m2, replicate_stream(seed, n, rep, Role::Path2))?
            .with_refinement(refine.substream(2), depth)?;
        Self::from_paths(n, path1, path2)
    }

    /// As [`ProcessBundle::generate`] with the default refinement depth.
    pub fn generate_default(n: usize, seed: u64, rep: usize) -> Result<Self> {
        Self::generate(n, seed, rep, DEFAULT_REFINE_DEPTH)
    }

    pub fn from_paths(n: usize, path1: CoupledPath, path2: CoupledPath) -> Result<Self> {
        let h = n / 2;
        if path1.m() < h.max(1) || path2.m() < n + 1 - h {
            return Err(Error::precondition(format!(
                "paths of sizes {} and {} are too short for n = {n}",
                path1.m(),
                path2.m()
            )));
        }
        let y = interleave(n, &path1.increments(), &path2.increments())?;
        let mut s = Vec::with_capacity(n + 2);
        s.push(0.0);
        let mut acc = 0.0;
        for &v in &y {
            acc += v;
            s.push(acc);
        }
        let total = s[n + 1];
        let u: Vec<f64> = s[1..=n].iter().map(|&v| v / total).collect();
        let order = OrderStats::from_sorted(&u)?;
        Ok(Self {
            n,
            path1,
            path2,
            y,
            s,
            order,
            sqrt_n: (n as f64).sqrt(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn paths(&self) -> (&CoupledPath, &CoupledPath) {
        (&self.path1, &self.path2)
    }

    /// `Y_1..Y_{n+1}`.
    pub fn interleaved(&self) -> &[f64] {
        &self.y
    }

    /// `S_0..S_{n+1}`.
    pub fn sums(&self) -> &[f64] {
        &self.s
    }

    pub fn order(&self) -> &OrderStats {
        &self.order
    }

    /// Materializes all bridge refinement cells.
    pub fn freeze(&self) {
        self.path1.freeze();
        self.path2.freeze();
    }

    /// `W_n(s)` for `0 <= s <= n + 1`.
    pub fn eval_w_n(&self, s: f64) -> Result<f64> {
        if !(0.0..=(self.n + 1) as f64).contains(&s) {
            return Err(Error::domain(format!(
                "W_n argument {s} outside [0, {}]",
                self.n + 1
            )));
        }
        Ok(self.w_n(s))
    }

    fn w_n(&self, s: f64) -> f64 {
        let h = self.n / 2;
        if s <= h as f64 {
            self.path1.w_at(s)
        } else {
            self.w_n_second_branch(s)
        }
    }

    /// The second branch of the splice evaluated at an arbitrary point, for
    /// continuity checks.
    pub fn w_n_second_branch(&self, s: f64) -> f64 {
        let h = self.n / 2;
        let top = self.n + 1 - h;
        let w2 = self.path2.brownian();
        self.path1.brownian()[h] + (w2[top] - self.path2.w_at((self.n + 1) as f64 - s))
    }

    /// `B_n(s) = n^{-1/2}(s W_n(n) - W_n(sn))` for `0 <= s <= 1`.
    pub fn eval_bridge(&self, s: f64) -> f64 {
        (s * self.w_n(self.n as f64) - self.w_n(s * self.n as f64)) / self.sqrt_n
    }

    pub fn bridge(&self) -> BridgeEvaluator<'_> {
        BridgeEvaluator { bundle: self }
    }

    pub fn empirical_process(&self, s: f64) -> f64 {
        self.order.empirical(s, Side::At)
    }

    pub fn quantile_process(&self, s: f64) -> f64 {
        self.order.quantile(s, Side::At)
    }

    /// `min_{1<=k<=n} n U_k / k`.
    pub fn min_ratio(&self) -> f64 {
        let nf = self.n as f64;
        (1..=self.n)
            .map(|k| nf * self.order.u[k] / k as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

/// The coupled bridge of a [`ProcessBundle`].
#[derive(Clone, Copy)]
pub struct BridgeEvaluator<'a> {
    bundle: &'a ProcessBundle,
}

impl Bridge for BridgeEvaluator<'_> {
    fn at(&self, s: f64) -> f64 {
        self.bundle.eval_bridge(s)
    }
}
