//! Brute-force evaluation of piecewise-linear functions on a rational grid.
//!
//! Works directly from breakpoint/slope/anchor data with scaled `i128`
//! arithmetic, sharing nothing with [`crate::pwl`] beyond the input format.

use num_bigint::BigInt;
use rand::Rng;

use crate::int::Int;
use crate::pwl::{rational, Extended, PwlConvex, Sign};

/// A piecewise-linear function given by finite breakpoints `b_0 < … < b_k`,
/// one slope per piece and a value at `b_0`. Outside `[b_0, b_k]` it is +∞.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPwl {
    pub breakpoints: Vec<i64>,
    pub slopes: Vec<i64>,
    pub start_value: i64,
}

impl RawPwl {
    pub fn lower(&self) -> i64 {
        self.breakpoints[0]
    }

    pub fn upper(&self) -> i64 {
        *self.breakpoints.last().unwrap()
    }

    /// `den · f(k / den)`, or `None` outside the domain.
    pub fn eval_scaled(&self, k: i64, den: i64) -> Option<i128> {
        let (k, den) = (k as i128, den as i128);
        if k < self.lower() as i128 * den || k > self.upper() as i128 * den {
            return None;
        }
        let mut acc = self.start_value as i128 * den;
        for (i, s) in self.slopes.iter().enumerate() {
            let lo = self.breakpoints[i] as i128 * den;
            let hi = self.breakpoints[i + 1] as i128 * den;
            if k <= lo {
                break;
            }
            acc += *s as i128 * (k.min(hi) - lo);
        }
        Some(acc)
    }
}

/// `den · min { Σ f_i(x_i) : Σ a_i·x_i = t }` at `t = k / den`, minimizing over
/// the grid `x_i ∈ (1/den)ℤ` for all but the last function, whose argument is
/// then determined. `signs` are ±1.
pub fn interpolation_scaled(fs: &[RawPwl], signs: &[i64], k: i64, den: i64) -> Option<i128> {
    assert_eq!(fs.len(), signs.len());
    assert!(!fs.is_empty());
    fn go(fs: &[RawPwl], signs: &[i64], rest: i64, den: i64) -> Option<i128> {
        let (f, a) = (&fs[0], signs[0]);
        if fs.len() == 1 {
            // a·x = rest with a = ±1
            return f.eval_scaled(a * rest, den);
        }
        let mut best: Option<i128> = None;
        for x in f.lower() * den..=f.upper() * den {
            let Some(v) = f.eval_scaled(x, den) else { continue };
            if let Some(r) = go(&fs[1..], &signs[1..], rest - a * x, den) {
                let total = v + r;
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
        }
        best
    }
    go(fs, signs, k, den)
}

/// Random function with integral breakpoints in [-5, 5], 0–3 pieces and
/// nondecreasing slopes in [-5, 5].
pub fn random_raw<R: Rng>(rng: &mut R) -> RawPwl {
    let pieces = rng.gen_range(0..=3);
    let mut pts: Vec<i64> = (-5..=5).collect();
    let mut breakpoints = Vec::new();
    for _ in 0..=pieces {
        let i = rng.gen_range(0..pts.len());
        breakpoints.push(pts.swap_remove(i));
    }
    breakpoints.sort_unstable();
    let mut slopes: Vec<i64> = (0..pieces).map(|_| rng.gen_range(-5..=5)).collect();
    slopes.sort_unstable();
    RawPwl { breakpoints, slopes, start_value: rng.gen_range(-5..=5) }
}

/// The same data as a [`PwlConvex`]; slopes must be nondecreasing.
pub fn to_pwl(raw: &RawPwl) -> PwlConvex {
    PwlConvex::new(
        raw.breakpoints.iter().map(|&b| Extended::from(b)).collect(),
        raw.slopes.iter().map(|&s| Int::from(s)).collect(),
        (Int::from(raw.breakpoints[0]), Int::from(raw.start_value)),
    )
    .expect("nondecreasing slopes are convex")
}

/// Compares `result` with brute-force interpolation of `raws` at every grid
/// point `k / den` covering the sum of the domains plus a margin. Returns the
/// number of points checked.
pub fn compare_on_grid(result: &PwlConvex, raws: &[RawPwl], signs: &[Sign], den: i64) -> Result<usize, String> {
    let ints: Vec<i64> = signs.iter().map(|s| s.as_i8() as i64).collect();
    let reach: i64 = raws.iter().map(|r| r.lower().abs().max(r.upper().abs())).sum::<i64>() + 1;
    let mut checked = 0;
    for k in -reach * den..=reach * den {
        let want = interpolation_scaled(raws, &ints, k, den).map(BigInt::from);
        let got = result.evaluate_rational(&rational(k, den)).map(|v| v * rational(den, 1));
        let got = match got {
            Some(v) if !v.is_integer() => return Err(format!("non-integral scaled value at t={k}/{den}")),
            other => other.map(|v| v.to_integer()),
        };
        if got != want {
            return Err(format!("mismatch at t={k}/{den}: got {got:?}, want {want:?} for {raws:?} signs {ints:?}"));
        }
        checked += 1;
    }
    Ok(checked)
}
