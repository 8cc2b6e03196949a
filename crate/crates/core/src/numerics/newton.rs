use crate::error::{Error, Result};

const MAX_ITER: usize = 300;
const REL_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Bracket {
    lo: f64,
    hi: f64,
}

impl Bracket {
    pub(crate) fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn fallback(&self, x: f64) -> f64 {
        if self.hi.is_infinite() {
            return (2.0 * x).max(1.0);
        }
        if self.lo > 0.0 && self.hi / self.lo > 8.0 {
            (self.lo * self.hi).sqrt()
        } else {
            0.5 * (self.lo + self.hi)
        }
    }
}

/// Newton iteration on an increasing `g` with a maintained sign bracket.
/// `eval` returns `(g(x), g'(x))`. Any step that leaves the bracket (or is not
/// finite) is replaced by a bisection step, geometric when the bracket spans
/// orders of magnitude.
pub(crate) fn safeguarded_newton<F>(mut bracket: Bracket, x0: f64, eval: F) -> Result<f64>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let mut x = if x0 > bracket.lo && x0 < bracket.hi {
        x0
    } else {
        bracket.fallback(bracket.lo.max(1.0))
    };
    for _ in 0..MAX_ITER {
        let (g, dg) = eval(x)?;
        if g == 0.0 {
            return Ok(x);
        }
        if g < 0.0 {
            bracket.lo = x;
        } else {
            bracket.hi = x;
        }
        let mut next = x - g / dg;
        if !next.is_finite() || next <= bracket.lo || next >= bracket.hi {
            next = bracket.fallback(x);
        }
        if (next - x).abs() <= REL_TOL * next.abs() {
            return Ok(next);
        }
        if bracket.hi.is_finite() && bracket.hi - bracket.lo <= REL_TOL * bracket.hi.abs() {
            return Ok(0.5 * (bracket.lo + bracket.hi));
        }
        x = next;
    }
    Err(Error::NonConvergence {
        routine: "safeguarded newton",
        a: bracket.lo,
        b: bracket.hi,
        p: x,
    })
}
