//! Exact piecewise-linear convex functions over the extended integers.
//!
//! A [`PwlConvex`] is finite on a (possibly unbounded) closed interval and `+∞`
//! elsewhere. Breakpoints, slopes and the values at breakpoints are exact
//! integers; the canonical form never has two adjacent pieces with the same
//! slope, so structural equality is functional equality.

use std::borrow::Cow;

use smallvec::{smallvec, SmallVec};

/// Inline storage for breakpoint data; most messages have few pieces.
type Ints = SmallVec<[Int; 4]>;
use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::int::Int;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PwlError {
    #[error("slopes are not increasing")]
    NonConvex,
    #[error("breakpoints must be strictly increasing with infinities only at the ends")]
    MalformedDomain,
    #[error("expected {expected} slopes for the given breakpoints, got {got}")]
    PieceCount { expected: usize, got: usize },
    #[error("anchor point lies outside the domain")]
    AnchorOutOfDomain,
    #[error("function is unbounded below")]
    Unbounded,
    #[error("domains do not intersect")]
    EmptyDomain,
    #[error("interpolation needs at least one function")]
    NoFunctions,
    #[error("{functions} functions but {signs} signs")]
    LengthMismatch { functions: usize, signs: usize },
}

/// An integer extended with `±∞`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Extended {
    NegInf,
    Finite(Int),
    PosInf,
}

impl Extended {
    pub fn finite(v: impl Into<Int>) -> Extended {
        Extended::Finite(v.into())
    }

    pub fn as_finite(&self) -> Option<&Int> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => f.write_str("-inf"),
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInf => f.write_str("inf"),
        }
    }
}

impl From<Int> for Extended {
    fn from(v: Int) -> Self {
        Extended::Finite(v)
    }
}

impl From<i64> for Extended {
    fn from(v: i64) -> Self {
        Extended::Finite(Int::from(v))
    }
}

/// Coefficient of an argument transform `z ↦ a·z + b` with `a = ±1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_i8(a: i8) -> Sign {
        if a >= 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn negate(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Piecewise-linear convex function with exact integer data.
///
/// Layout: `knots` are the finite breakpoints in increasing order and
/// `values[i]` is the function value at `knots[i]`. The piece with index `p`
/// spans `[knot(p - off), knot(p - off + 1)]` where `off = left_open as usize`
/// and out-of-range knots stand for `±∞`. A linear function on all of ℝ has no
/// knots; its single entry in `values` is the value at zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PwlConvex {
    knots: Ints,
    values: Ints,
    slopes: Ints,
    left_open: bool,
    right_open: bool,
}

/// One linear piece as seen from a reference point during stitching.
struct Piece<'a> {
    slope: &'a Int,
    /// `None` for the infinite end piece.
    len: Option<Int>,
}

impl PwlConvex {
    /// Validating constructor from breakpoints `a_0 < … < a_k`, the `k` piece
    /// slopes, and an anchor `(z, f(z))` with `z` finite and inside the domain.
    /// A single finite breakpoint with no slopes is the indicator of that point.
    pub fn new(breakpoints: Vec<Extended>, slopes: Vec<Int>, anchor: (Int, Int)) -> Result<Self, PwlError> {
        if breakpoints.is_empty() {
            return Err(PwlError::MalformedDomain);
        }
        let last = breakpoints.len() - 1;
        for (i, b) in breakpoints.iter().enumerate() {
            match b {
                Extended::NegInf if i != 0 => return Err(PwlError::MalformedDomain),
                Extended::PosInf if i != last => return Err(PwlError::MalformedDomain),
                _ => {}
            }
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PwlError::MalformedDomain);
        }
        if breakpoints.len() == 1 && !breakpoints[0].is_finite() {
            return Err(PwlError::MalformedDomain);
        }
        if slopes.len() != last {
            return Err(PwlError::PieceCount { expected: last, got: slopes.len() });
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(PwlError::NonConvex);
        }
        let left_open = breakpoints[0] == Extended::NegInf;
        let right_open = breakpoints[last] == Extended::PosInf;
        let knots: Ints = breakpoints.into_iter().filter_map(|b| match b {
            Extended::Finite(v) => Some(v),
            _ => None,
        }).collect();

        let (z0, v0) = anchor;
        let lo = knots.first().cloned().map(Extended::Finite).unwrap_or(Extended::NegInf);
        let hi = knots.last().cloned().map(Extended::Finite).unwrap_or(Extended::PosInf);
        let z = Extended::Finite(z0.clone());
        if (!left_open && z < lo) || (!right_open && z > hi) {
            return Err(PwlError::AnchorOutOfDomain);
        }

        if knots.is_empty() {
            // linear on all of ℝ
            let value_at_zero = &v0 - &(&slopes[0] * &z0);
            return Ok(PwlConvex {
                knots,
                values: smallvec![value_at_zero],
                slopes: slopes.into(),
                left_open,
                right_open,
            });
        }

        // Propagate the anchor to the first knot.
        let off = left_open as usize;
        let mut value_at_first = v0;
        let mut pos = z0;
        // walk left knot by knot until reaching knots[0]
        let j = knots.partition_point(|k| *k < pos);
        let mut idx = j;
        if idx == knots.len() {
            // anchor right of the last knot: on the right-infinite piece
            let s = &slopes[knots.len() - 1 + off];
            let k = &knots[knots.len() - 1];
            value_at_first = &value_at_first - &(s * &(&pos - k));
            pos = k.clone();
            idx = knots.len() - 1;
        } else if knots[idx] != pos {
            if idx == 0 {
                // left of the first knot on the left-infinite piece
                let s = &slopes[0];
                value_at_first = &value_at_first + &(s * &(&knots[0] - &pos));
                pos = knots[0].clone();
            } else {
                let s = &slopes[idx + off - 1];
                let k = &knots[idx - 1];
                value_at_first = &value_at_first - &(s * &(&pos - k));
                pos = k.clone();
                idx -= 1;
            }
        }
        while idx > 0 {
            let s = &slopes[idx + off - 1];
            value_at_first = &value_at_first - &(s * &(&knots[idx] - &knots[idx - 1]));
            idx -= 1;
        }
        debug_assert!(pos >= knots[0]);
        Ok(Self::from_parts(knots, slopes.into(), left_open, right_open, value_at_first))
    }

    /// The all-zero function on ℝ.
    pub fn zero() -> Self {
        PwlConvex {
            knots: Ints::new(),
            values: smallvec![Int::ZERO],
            slopes: smallvec![Int::ZERO],
            left_open: true,
            right_open: true,
        }
    }

    /// Indicator of a single point, with the given value there.
    pub fn point(at: Int, value: Int) -> Self {
        PwlConvex {
            knots: smallvec![at],
            values: smallvec![value],
            slopes: Ints::new(),
            left_open: false,
            right_open: false,
        }
    }

    /// `z ↦ slope·z` on `[lo, hi]`; either end may be infinite.
    pub fn linear(slope: Int, lo: Extended, hi: Extended) -> Result<Self, PwlError> {
        match (&lo, &hi) {
            (Extended::NegInf, Extended::PosInf) => Ok(PwlConvex {
                knots: Ints::new(),
                values: smallvec![Int::ZERO],
                slopes: smallvec![slope],
                left_open: true,
                right_open: true,
            }),
            (Extended::Finite(a), Extended::Finite(b)) if a == b => {
                let v = &slope * a;
                Ok(Self::point(a.clone(), v))
            }
            _ => {
                let anchor_at = lo.as_finite().or(hi.as_finite()).cloned().ok_or(PwlError::MalformedDomain)?;
                let v = &slope * &anchor_at;
                Self::new(vec![lo, hi], vec![slope], (anchor_at, v))
            }
        }
    }

    /// Builds the canonical form, merging adjacent pieces of equal slope.
    /// `base` is the value at `knots[0]` (ignored when `knots` is empty and
    /// then interpreted as the value at zero).
    fn from_parts(knots: Ints, slopes: Ints, left_open: bool, right_open: bool, base: Int) -> Self {
        if knots.is_empty() {
            debug_assert!(left_open && right_open && slopes.len() == 1);
            return PwlConvex { knots, values: smallvec![base], slopes, left_open, right_open };
        }
        let off = left_open as usize;
        debug_assert_eq!(slopes.len() + 1, knots.len() + off + right_open as usize);
        if slopes.windows(2).all(|w| w[0] != w[1]) {
            let mut values = Ints::with_capacity(knots.len());
            let mut val = base;
            for i in 1..knots.len() {
                let next = &val + &(&slopes[i + off - 1] * &(&knots[i] - &knots[i - 1]));
                values.push(std::mem::replace(&mut val, next));
            }
            values.push(val);
            return PwlConvex { knots, values, slopes, left_open, right_open };
        }
        let mut out_knots = Ints::with_capacity(knots.len());
        let mut out_values = Ints::with_capacity(knots.len());
        let mut out_slopes = Ints::with_capacity(slopes.len());
        if left_open {
            out_slopes.push(slopes[0].clone());
        }
        let mut val = base;
        for i in 0..knots.len() {
            if i > 0 {
                val += &slopes[i + off - 1] * &(&knots[i] - &knots[i - 1]);
            }
            let left = (i + off >= 1).then(|| &slopes[i + off - 1]);
            let right = slopes.get(i + off);
            if let (Some(l), Some(r)) = (left, right) {
                if l == r {
                    continue;
                }
            }
            out_knots.push(knots[i].clone());
            out_values.push(val.clone());
            if let Some(r) = right {
                out_slopes.push(r.clone());
            }
        }
        if out_knots.is_empty() {
            // every knot was interior to a single slope: a line on ℝ
            let s = out_slopes[0].clone();
            let at_zero = &val - &(&s * &knots[knots.len() - 1]);
            return PwlConvex { knots: out_knots, values: smallvec![at_zero], slopes: out_slopes, left_open, right_open };
        }
        PwlConvex { knots: out_knots, values: out_values, slopes: out_slopes, left_open, right_open }
    }

    fn is_canonical(&self) -> bool {
        self.slopes.windows(2).all(|w| w[0] < w[1])
    }

    fn off(&self) -> usize {
        self.left_open as usize
    }

    fn is_line(&self) -> bool {
        self.knots.is_empty()
    }

    /// Number of linear pieces, `p(f)`.
    pub fn piece_count(&self) -> usize {
        self.slopes.len()
    }

    pub fn slopes(&self) -> &[Int] {
        &self.slopes
    }

    /// Finite breakpoints in increasing order.
    pub fn knots(&self) -> &[Int] {
        &self.knots
    }

    /// Breakpoints `a_0 < … < a_k` including infinite ends.
    pub fn breakpoints(&self) -> Vec<Extended> {
        let mut out = Vec::with_capacity(self.knots.len() + 2);
        if self.left_open {
            out.push(Extended::NegInf);
        }
        out.extend(self.knots.iter().cloned().map(Extended::Finite));
        if self.right_open {
            out.push(Extended::PosInf);
        }
        out
    }

    /// Canonical anchor: the first finite breakpoint and its value, or zero
    /// for a line on ℝ.
    pub fn anchor(&self) -> (Int, Int) {
        match self.knots.first() {
            Some(k) => (k.clone(), self.values[0].clone()),
            None => (Int::ZERO, self.values[0].clone()),
        }
    }

    pub fn lower(&self) -> Extended {
        if self.left_open {
            Extended::NegInf
        } else {
            Extended::Finite(self.knots[0].clone())
        }
    }

    pub fn upper(&self) -> Extended {
        if self.right_open {
            Extended::PosInf
        } else {
            Extended::Finite(self.knots[self.knots.len() - 1].clone())
        }
    }

    pub fn domain(&self) -> (Extended, Extended) {
        (self.lower(), self.upper())
    }

    pub fn contains(&self, z: &Int) -> bool {
        (self.left_open || *z >= self.knots[0]) && (self.right_open || *z <= self.knots[self.knots.len() - 1])
    }

    /// Exact value at an integer point; `None` stands for `+∞`.
    pub fn evaluate(&self, z: &Int) -> Option<Int> {
        if self.is_line() {
            return Some(&self.values[0] + &(&self.slopes[0] * z));
        }
        let j = self.knots.partition_point(|k| k <= z);
        if j == 0 {
            if !self.left_open {
                return None;
            }
            return Some(&self.values[0] - &(&self.slopes[0] * &(&self.knots[0] - z)));
        }
        let i = j - 1;
        if self.knots[i] == *z {
            return Some(self.values[i].clone());
        }
        if j == self.knots.len() && !self.right_open {
            return None;
        }
        Some(&self.values[i] + &(&self.slopes[i + self.off()] * &(z - &self.knots[i])))
    }

    /// Exact value at a rational point; `None` stands for `+∞`.
    pub fn evaluate_rational(&self, z: &BigRational) -> Option<BigRational> {
        let to_r = |v: &Int| BigRational::from_integer(v.to_bigint());
        if self.is_line() {
            return Some(to_r(&self.values[0]) + to_r(&self.slopes[0]) * z);
        }
        let j = self.knots.partition_point(|k| to_r(k) <= *z);
        if j == 0 {
            if !self.left_open {
                return None;
            }
            return Some(to_r(&self.values[0]) - to_r(&self.slopes[0]) * (to_r(&self.knots[0]) - z));
        }
        let i = j - 1;
        if to_r(&self.knots[i]) == *z {
            return Some(to_r(&self.values[i]));
        }
        if j == self.knots.len() && !self.right_open {
            return None;
        }
        Some(to_r(&self.values[i]) + to_r(&self.slopes[i + self.off()]) * (z - to_r(&self.knots[i])))
    }

    /// Slope of the piece immediately right of `z`; `None` at or past the
    /// upper end of the domain.
    pub fn right_slope(&self, z: &Int) -> Option<&Int> {
        if self.is_line() {
            return Some(&self.slopes[0]);
        }
        let j = self.knots.partition_point(|k| k <= z) + self.off();
        if j == 0 {
            return None;
        }
        self.slopes.get(j - 1)
    }

    /// Slope of the piece immediately left of `z`; `None` at or past the
    /// lower end of the domain.
    pub fn left_slope(&self, z: &Int) -> Option<&Int> {
        if self.is_line() {
            return Some(&self.slopes[0]);
        }
        let j = self.knots.partition_point(|k| k < z) + self.off();
        if j == 0 {
            return None;
        }
        self.slopes.get(j - 1)
    }

    /// Smallest minimizer.
    ///
    /// Fails with [`PwlError::Unbounded`] when the function has no smallest
    /// minimizer because it keeps decreasing (or stays flat) towards an
    /// infinite end.
    pub fn argmin(&self) -> Result<Int, PwlError> {
        let zero = Int::ZERO;
        if self.is_line() || (self.left_open && self.slopes[0] >= zero) {
            return Err(PwlError::Unbounded);
        }
        match self.support_index(&zero) {
            Some(i) => Ok(self.knots[i].clone()),
            None => Err(PwlError::Unbounded),
        }
    }

    /// Minimum value, or [`PwlError::Unbounded`] if the function is unbounded
    /// below.
    pub fn min_value(&self) -> Result<Int, PwlError> {
        let zero = Int::ZERO;
        if self.is_line() {
            return if self.slopes[0].is_zero() { Ok(self.values[0].clone()) } else { Err(PwlError::Unbounded) };
        }
        if self.left_open && self.slopes[0] > zero {
            return Err(PwlError::Unbounded);
        }
        match self.support_index(&zero) {
            Some(i) => Ok(self.values[i].clone()),
            None => Err(PwlError::Unbounded),
        }
    }

    /// Index of the first knot where `sigma` is a subgradient, if any.
    fn support_index(&self, sigma: &Int) -> Option<usize> {
        let off = self.off();
        // right slope at knot i is slopes[i + off], increasing in i
        let i = self.slopes[off..].partition_point(|s| s < sigma);
        if i >= self.knots.len() {
            return None;
        }
        if i + off >= 1 && self.slopes[i + off - 1] > *sigma {
            return None;
        }
        Some(i)
    }

    /// Range of subgradients `[lo, hi]`, `None` meaning unbounded on that side.
    fn slope_range(&self) -> (Option<&Int>, Option<&Int>) {
        (
            self.left_open.then(|| &self.slopes[0]),
            self.right_open.then(|| &self.slopes[self.slopes.len() - 1]),
        )
    }

    /// Adds a constant to every finite value.
    pub fn shifted(mut self, delta: &Int) -> Self {
        for v in &mut self.values {
            *v += delta;
        }
        self
    }

    /// Re-anchors so that the canonical anchor value is zero.
    pub fn normalized(self) -> Self {
        let a = self.values[0].clone();
        if a.is_zero() {
            self
        } else {
            self.shifted(&-a)
        }
    }

    /// `z ↦ f(a·z + b)`.
    pub fn compose_affine(&self, a: Sign, b: &Int) -> Self {
        self.clone().into_composed(a, b)
    }

    /// Owning form of [`PwlConvex::compose_affine`]; reuses the buffers.
    pub fn into_composed(mut self, a: Sign, b: &Int) -> Self {
        if self.is_line() {
            // value at 0 becomes f(b)
            self.values[0] += &self.slopes[0] * b;
            if a == Sign::Minus {
                self.slopes[0] = -&self.slopes[0];
            }
            return self;
        }
        match a {
            Sign::Plus => {
                if !b.is_zero() {
                    for k in &mut self.knots {
                        *k -= b;
                    }
                }
            }
            Sign::Minus => {
                self.knots.reverse();
                for k in &mut self.knots {
                    *k = b - &*k;
                }
                self.values.reverse();
                self.slopes.reverse();
                for s in &mut self.slopes {
                    *s = -&*s;
                }
                std::mem::swap(&mut self.left_open, &mut self.right_open);
            }
        }
        self
    }

    /// Pointwise combination on `[lo, hi]`; `subtract` selects `f - g`.
    fn pointwise(&self, other: &PwlConvex, lo: Extended, hi: Extended, subtract: bool) -> PwlConvex {
        let comb = |a: &Int, b: &Int| if subtract { a - b } else { a + b };
        let left_open = lo == Extended::NegInf;
        let right_open = hi == Extended::PosInf;
        let mut knots: Ints = Ints::with_capacity(self.knots.len() + other.knots.len() + 2);
        if let Extended::Finite(a) = &lo {
            knots.push(a.clone());
        }
        let (mut i, mut j) = (0, 0);
        loop {
            let next = match (self.knots.get(i), other.knots.get(j)) {
                (Some(a), Some(b)) => match a.cmp(b) {
                    Ordering::Less => {
                        i += 1;
                        a
                    }
                    Ordering::Greater => {
                        j += 1;
                        b
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        a
                    }
                },
                (Some(a), None) => {
                    i += 1;
                    a
                }
                (None, Some(b)) => {
                    j += 1;
                    b
                }
                (None, None) => break,
            };
            if let Extended::Finite(h) = &hi {
                if next >= h {
                    break;
                }
            }
            if knots.last().is_none_or(|k| next > k) {
                knots.push(next.clone());
            }
        }
        if let Extended::Finite(b) = &hi {
            if knots.last() != Some(b) {
                knots.push(b.clone());
            }
        }
        if knots.is_empty() {
            let s = comb(&self.slopes[0], &other.slopes[0]);
            let v = comb(&self.values[0], &other.values[0]);
            return PwlConvex { knots, values: smallvec![v], slopes: smallvec![s], left_open, right_open };
        }
        let base = comb(
            &self.evaluate(&knots[0]).expect("knot inside domain"),
            &other.evaluate(&knots[0]).expect("knot inside domain"),
        );
        let mut slopes = Ints::with_capacity(knots.len() + 1);
        if left_open {
            slopes.push(comb(&self.slopes[0], &other.slopes[0]));
        }
        // slope index to the right of x is (#knots <= x) + off - 1
        let (mut cf, mut cg) = (0, 0);
        let last = knots.len() - 1 + right_open as usize;
        for x in &knots[..last] {
            while cf < self.knots.len() && self.knots[cf] <= *x {
                cf += 1;
            }
            while cg < other.knots.len() && other.knots[cg] <= *x {
                cg += 1;
            }
            let a = if self.is_line() { &self.slopes[0] } else { &self.slopes[cf + self.off() - 1] };
            let b = if other.is_line() { &other.slopes[0] } else { &other.slopes[cg + other.off() - 1] };
            slopes.push(comb(a, b));
        }
        Self::from_parts(knots, slopes, left_open, right_open, base)
    }

    /// Pointwise sum on the intersection of the domains.
    pub fn add(&self, other: &PwlConvex) -> Result<PwlConvex, PwlError> {
        let lo = self.lower().max(other.lower());
        let hi = self.upper().min(other.upper());
        if lo > hi {
            return Err(PwlError::EmptyDomain);
        }
        let out = self.pointwise(other, lo, hi, false);
        debug_assert!(out.is_canonical());
        Ok(out)
    }

    /// Pointwise difference `self - other` on the domain of `self`, which must
    /// be contained in the domain of `other`; fails with `NonConvex` if the
    /// difference is not convex.
    pub fn subtract(&self, other: &PwlConvex) -> Result<PwlConvex, PwlError> {
        let (lo, hi) = self.domain();
        if lo < other.lower() || hi > other.upper() {
            return Err(PwlError::EmptyDomain);
        }
        let out = self.pointwise(other, lo, hi, true);
        if !out.is_canonical() {
            return Err(PwlError::NonConvex);
        }
        Ok(out)
    }

    /// Infimal convolution `t ↦ min_{x + y = t} f(x) + g(y)`.
    ///
    /// Both functions are walked outward from a common-subgradient point
    /// (the smallest minimizers when both are bounded), always taking the
    /// cheaper piece next; the cost is linear in `p(f) + p(g)`.
    pub fn inf_convolve(&self, other: &PwlConvex) -> Result<PwlConvex, PwlError> {
        let (flo, fhi) = self.slope_range();
        let (glo, ghi) = other.slope_range();
        let lo = match (flo, glo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (fhi, ghi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return Err(PwlError::Unbounded);
            }
        }
        let zero = Int::ZERO;
        let sigma = match (lo, hi) {
            (Some(l), _) if *l > zero => l,
            (_, Some(h)) if *h < zero => h,
            _ => &zero,
        };

        // Lines on ℝ contribute only through their value at a support point.
        let support = |f: &PwlConvex| -> (Option<usize>, Int, Int) {
            if f.is_line() {
                (None, Int::ZERO, f.values[0].clone())
            } else {
                let i = f.support_index(sigma).expect("sigma inside slope range");
                (Some(i), f.knots[i].clone(), f.values[i].clone())
            }
        };
        let (fi, fx, fv) = support(self);
        let (gi, gx, gv) = support(other);
        let t0 = &fx + &gx;
        let v0 = &fv + &gv;

        // Left pieces are emitted outward from t0 and reversed afterwards.
        let mut knots: Ints = Ints::with_capacity(self.knots.len() + other.knots.len() + 1);
        let mut slopes: Ints = Ints::with_capacity(self.slopes.len() + other.slopes.len());
        let mut base = v0;
        let mut pos = t0.clone();
        let mut left_open = false;
        stitch(Cursor::new(self, fi, false), Cursor::new(other, gi, false), |a, b| a >= b, |s, len| {
            match len {
                Some(len) => {
                    pos -= &len;
                    base -= &(s * &len);
                    knots.push(pos.clone());
                }
                None => left_open = true,
            }
            slopes.push(s.clone());
        });
        knots.reverse();
        slopes.reverse();
        let mut right_open = false;
        let mut pos = t0;
        knots.push(pos.clone());
        stitch(Cursor::new(self, fi, true), Cursor::new(other, gi, true), |a, b| a <= b, |s, len| {
            match len {
                Some(len) => {
                    pos += &len;
                    knots.push(pos.clone());
                }
                None => right_open = true,
            }
            slopes.push(s.clone());
        });

        let out = Self::from_parts(knots, slopes, left_open, right_open, base);
        debug_assert!(out.is_canonical());
        Ok(out)
    }

    /// Scaled interpolation `t ↦ min { Σ f_i(x_i) : Σ a_i·x_i = t }` computed
    /// by a balanced pairwise reduction of infimal convolutions.
    pub fn scaled_interpolation(fs: &[PwlConvex], signs: &[Sign]) -> Result<PwlConvex, PwlError> {
        if fs.is_empty() {
            return Err(PwlError::NoFunctions);
        }
        if fs.len() != signs.len() {
            return Err(PwlError::LengthMismatch { functions: fs.len(), signs: signs.len() });
        }
        let items: Vec<(&PwlConvex, Sign)> = fs.iter().zip(signs.iter().copied()).collect();
        Self::scaled_interpolation_of(&items)
    }

    /// Borrowing form of [`PwlConvex::scaled_interpolation`].
    pub fn scaled_interpolation_of(items: &[(&PwlConvex, Sign)]) -> Result<PwlConvex, PwlError> {
        if items.is_empty() {
            return Err(PwlError::NoFunctions);
        }
        let mut layer: Vec<Cow<'_, PwlConvex>> = items
            .iter()
            .map(|(f, a)| match a {
                Sign::Plus => Cow::Borrowed(*f),
                Sign::Minus => Cow::Owned((*f).clone().into_composed(Sign::Minus, &Int::ZERO)),
            })
            .collect();
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len().div_ceil(2));
            let mut it = layer.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(Cow::Owned(a.inf_convolve(&b)?)),
                    None => next.push(a),
                }
            }
            layer = next;
        }
        Ok(layer.pop().expect("non-empty").into_owned())
    }
}

/// Walks the pieces of a function outward from a knot (or from zero for a
/// line on ℝ), yielding the infinite end piece last.
struct Cursor<'a> {
    f: &'a PwlConvex,
    knot: usize,
    rightward: bool,
    tail_done: bool,
}

impl<'a> Cursor<'a> {
    fn new(f: &'a PwlConvex, start: Option<usize>, rightward: bool) -> Self {
        Cursor { f, knot: start.unwrap_or(0), rightward, tail_done: false }
    }
}

impl<'a> Iterator for Cursor<'a> {
    type Item = Piece<'a>;

    fn next(&mut self) -> Option<Piece<'a>> {
        let f = self.f;
        let off = f.off();
        let n = f.knots.len();
        if self.rightward {
            if n > 0 && self.knot + 1 < n {
                let k = self.knot;
                self.knot += 1;
                return Some(Piece { slope: &f.slopes[k + off], len: Some(&f.knots[k + 1] - &f.knots[k]) });
            }
            if f.right_open && !self.tail_done {
                self.tail_done = true;
                return Some(Piece { slope: &f.slopes[f.slopes.len() - 1], len: None });
            }
        } else {
            if n > 0 && self.knot >= 1 {
                let k = self.knot;
                self.knot -= 1;
                return Some(Piece { slope: &f.slopes[k + off - 1], len: Some(&f.knots[k] - &f.knots[k - 1]) });
            }
            if f.left_open && !self.tail_done {
                self.tail_done = true;
                return Some(Piece { slope: &f.slopes[0], len: None });
            }
        }
        None
    }
}

/// Merges two piece sequences in the order given by `before`, passing each
/// piece to `emit`. An infinite piece (`len == None`) ends the walk.
fn stitch<'a>(
    mut a: impl Iterator<Item = Piece<'a>>,
    mut b: impl Iterator<Item = Piece<'a>>,
    before: impl Fn(&Int, &Int) -> bool,
    mut emit: impl FnMut(&Int, Option<Int>),
) {
    let mut pa = a.next();
    let mut pb = b.next();
    loop {
        let take_a = match (&pa, &pb) {
            (None, None) => return,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(x), Some(y)) => {
                if x.slope == y.slope {
                    // finite piece first
                    x.len.is_some()
                } else {
                    before(x.slope, y.slope)
                }
            }
        };
        let piece = if take_a {
            std::mem::replace(&mut pa, a.next())
        } else {
            std::mem::replace(&mut pb, b.next())
        }
        .expect("checked above");
        let done = piece.len.is_none();
        emit(piece.slope, piece.len);
        if done {
            return;
        }
    }
}

impl fmt::Debug for PwlConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bps: Vec<String> = self.breakpoints().iter().map(|b| b.to_string()).collect();
        let (z, v) = self.anchor();
        write!(f, "Pwl[{}; slopes {:?}; f({z})={v}]", bps.join(","), self.slopes)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BreakpointDto {
    Num(Int),
    Sentinel(String),
}

#[derive(Serialize, Deserialize)]
struct PwlDto {
    anchor: (Int, Int),
    breakpoints: Vec<BreakpointDto>,
    slopes: Vec<Int>,
}

impl Serialize for PwlConvex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let dto = PwlDto {
            anchor: self.anchor(),
            breakpoints: self
                .breakpoints()
                .into_iter()
                .map(|b| match b {
                    Extended::NegInf => BreakpointDto::Sentinel("-inf".into()),
                    Extended::PosInf => BreakpointDto::Sentinel("inf".into()),
                    Extended::Finite(v) => BreakpointDto::Num(v),
                })
                .collect(),
            slopes: self.slopes.to_vec(),
        };
        dto.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PwlConvex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let dto = PwlDto::deserialize(deserializer)?;
        let mut bps = Vec::with_capacity(dto.breakpoints.len());
        for b in dto.breakpoints {
            bps.push(match b {
                BreakpointDto::Num(v) => Extended::Finite(v),
                BreakpointDto::Sentinel(s) => match s.as_str() {
                    "-inf" | "−inf" => Extended::NegInf,
                    "inf" | "+inf" => Extended::PosInf,
                    other => match other.parse::<Int>() {
                        Ok(v) => Extended::Finite(v),
                        Err(_) => return Err(D::Error::custom(format!("bad breakpoint {other:?}"))),
                    },
                },
            });
        }
        PwlConvex::new(bps, dto.slopes, dto.anchor).map_err(D::Error::custom)
    }
}

/// Rational helper for tests and oracles.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i(v: i64) -> Int {
        Int::from(v)
    }
    fn fin(v: i64) -> Extended {
        Extended::finite(v)
    }
    fn ints(v: &[i64]) -> Vec<Int> {
        v.iter().map(|&x| Int::from(x)).collect()
    }

    /// f with breakpoints (0,1,2), slopes (−1,2), f(1)=0.
    fn vee() -> PwlConvex {
        PwlConvex::new(vec![fin(0), fin(1), fin(2)], ints(&[-1, 2]), (i(1), i(0))).unwrap()
    }

    fn ramp(slope: i64, lo: i64, hi: i64) -> PwlConvex {
        PwlConvex::linear(i(slope), fin(lo), fin(hi)).unwrap()
    }

    #[test]
    fn construct_examples() {
        let zero = PwlConvex::new(vec![Extended::NegInf, Extended::PosInf], ints(&[0]), (i(0), i(0))).unwrap();
        assert_eq!(zero, PwlConvex::zero());
        assert_eq!(zero.evaluate(&i(-1000)), Some(i(0)));

        let f = vee();
        assert_eq!(f.evaluate(&i(0)), Some(i(1)));
        assert_eq!(f.evaluate(&i(1)), Some(i(0)));
        assert_eq!(f.evaluate(&i(2)), Some(i(2)));

        let bad = PwlConvex::new(vec![fin(0), fin(1), fin(2)], ints(&[2, 1]), (i(0), i(0)));
        assert_eq!(bad, Err(PwlError::NonConvex));
        let bad = PwlConvex::new(vec![fin(1), fin(0)], ints(&[1]), (i(0), i(0)));
        assert_eq!(bad, Err(PwlError::MalformedDomain));
        let bad = PwlConvex::new(vec![fin(0), fin(1)], ints(&[1]), (i(5), i(0)));
        assert_eq!(bad, Err(PwlError::AnchorOutOfDomain));
    }

    #[test]
    fn equal_slopes_merge_on_construction() {
        let f = PwlConvex::new(vec![fin(0), fin(1), fin(3)], ints(&[2, 2]), (i(0), i(0))).unwrap();
        assert_eq!(f, ramp(2, 0, 3));
        assert_eq!(f.piece_count(), 1);
    }

    #[test]
    fn anchor_anywhere_in_domain() {
        let a = PwlConvex::new(vec![Extended::NegInf, fin(0), fin(2), Extended::PosInf], ints(&[-3, 0, 5]), (i(-4), i(12)))
            .unwrap();
        assert_eq!(a.evaluate(&i(0)), Some(i(0)));
        let b = PwlConvex::new(vec![Extended::NegInf, fin(0), fin(2), Extended::PosInf], ints(&[-3, 0, 5]), (i(7), i(25)))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_examples() {
        let id = ramp(1, 0, 2);
        assert_eq!(id.evaluate(&i(2)), Some(i(2)));
        assert_eq!(id.evaluate(&i(3)), None);
        assert_eq!(vee().evaluate(&i(2)), Some(i(2)));
        assert_eq!(vee().evaluate_rational(&rational(1, 2)), Some(rational(1, 2)));
        assert_eq!(vee().evaluate_rational(&rational(5, 2)), None);
    }

    #[test]
    fn argmin_examples() {
        assert_eq!(ramp(0, 0, 1).argmin(), Ok(i(0)));
        assert_eq!(vee().argmin(), Ok(i(1)));
        let down = PwlConvex::linear(i(-1), fin(0), Extended::PosInf).unwrap();
        assert_eq!(down.argmin(), Err(PwlError::Unbounded));
    }

    #[test]
    fn add_examples() {
        let f = ramp(1, 0, 2);
        let g = ramp(-1, 0, 1);
        assert_eq!(f.add(&g).unwrap(), ramp(0, 0, 1));
        assert_eq!(f.add(&PwlConvex::zero()).unwrap(), f);
        let sum = vee().add(&f).unwrap();
        let expected = PwlConvex::new(vec![fin(0), fin(1), fin(2)], ints(&[0, 3]), (i(0), i(1))).unwrap();
        assert_eq!(sum, expected);
        assert_eq!(ramp(1, 0, 1).add(&ramp(1, 2, 3)), Err(PwlError::EmptyDomain));
    }

    #[test]
    fn compose_affine_examples() {
        let f = ramp(1, 0, 2);
        let g = f.compose_affine(Sign::Minus, &i(1));
        let expected = PwlConvex::new(vec![fin(-1), fin(1)], ints(&[-1]), (i(-1), i(2))).unwrap();
        assert_eq!(g, expected);
        assert_eq!(f.compose_affine(Sign::Plus, &i(0)), f);
        let r = vee().compose_affine(Sign::Minus, &i(0));
        assert_eq!(r.breakpoints(), vec![fin(-2), fin(-1), fin(0)]);
        assert_eq!(r.slopes(), &ints(&[-2, 1])[..]);
        assert_eq!(r.evaluate(&i(-1)), Some(i(0)));
    }

    #[test]
    fn inf_convolve_examples() {
        let h = ramp(1, 0, 1).inf_convolve(&ramp(2, 0, 1)).unwrap();
        let expected = PwlConvex::new(vec![fin(0), fin(1), fin(2)], ints(&[1, 2]), (i(0), i(0))).unwrap();
        assert_eq!(h, expected);

        let h = vee().inf_convolve(&ramp(1, 0, 1)).unwrap();
        assert_eq!(h.breakpoints(), vec![fin(0), fin(1), fin(2), fin(3)]);
        assert_eq!(h.slopes(), &ints(&[-1, 1, 2])[..]);
        let vals: Vec<_> = (0..=3).map(|z| h.evaluate(&i(z)).unwrap()).collect();
        assert_eq!(vals, ints(&[1, 0, 1, 3]));
        assert_eq!(h.piece_count(), 3);

        let p = PwlConvex::point(i(5), i(7)).inf_convolve(&PwlConvex::point(i(-2), i(1))).unwrap();
        assert_eq!(p, PwlConvex::point(i(3), i(8)));
    }

    #[test]
    fn inf_convolve_with_unbounded_inputs() {
        // zero on ℝ absorbs any function that attains its minimum
        let h = vee().inf_convolve(&PwlConvex::zero()).unwrap();
        assert_eq!(h, PwlConvex::zero());
        // increasing slope-1 half line convolved with a bounded vee
        let up = PwlConvex::linear(i(1), fin(0), Extended::PosInf).unwrap();
        let h = vee().inf_convolve(&up).unwrap();
        // min over x in [0,2] of vee(x) + (t - x) for t - x >= 0
        for t in 0..8 {
            let brute = (0..=2)
                .filter(|x| t - x >= 0)
                .map(|x| vee().evaluate(&i(x)).unwrap() + i(t - x))
                .min();
            assert_eq!(h.evaluate(&i(t)), brute, "t = {t}");
        }
        // both decreasing to the right: unbounded
        let down = PwlConvex::linear(i(-1), fin(0), Extended::PosInf).unwrap();
        let up_left = PwlConvex::linear(i(1), Extended::NegInf, fin(0)).unwrap();
        assert_eq!(down.inf_convolve(&up_left), Err(PwlError::Unbounded));
    }

    #[test]
    fn inf_convolve_of_two_sided_functions() {
        let abs = PwlConvex::new(vec![Extended::NegInf, fin(0), Extended::PosInf], ints(&[-1, 1]), (i(0), i(0))).unwrap();
        assert_eq!(abs.inf_convolve(&abs).unwrap(), abs);
        let line = |v| PwlConvex::new(vec![Extended::NegInf, Extended::PosInf], ints(&[2]), (i(0), i(v))).unwrap();
        assert_eq!(line(3).inf_convolve(&line(4)).unwrap(), line(7));
        // a line through a kinked function keeps the line's slope
        let steep = PwlConvex::new(vec![Extended::NegInf, fin(1), Extended::PosInf], ints(&[-3, 3]), (i(1), i(0))).unwrap();
        let h = steep.inf_convolve(&line(0)).unwrap();
        assert_eq!(h.slopes(), &ints(&[2])[..]);
        assert_eq!(h.evaluate(&i(1)), Some(i(0)));
    }

    #[test]
    fn scaled_interpolation_examples() {
        let f = vee();
        assert_eq!(PwlConvex::scaled_interpolation(std::slice::from_ref(&f), &[Sign::Plus]).unwrap(), f);

        let id = ramp(1, 0, 1);
        let abs = PwlConvex::scaled_interpolation(&[id.clone(), id], &[Sign::Plus, Sign::Minus]).unwrap();
        let expected = PwlConvex::new(vec![fin(-1), fin(0), fin(1)], ints(&[-1, 1]), (i(0), i(0))).unwrap();
        assert_eq!(abs, expected);

        let two = ramp(2, 0, 1);
        let s = PwlConvex::scaled_interpolation(&[two.clone(), two.clone(), two], &[Sign::Plus; 3]).unwrap();
        assert_eq!(s, ramp(2, 0, 3));

        assert_eq!(PwlConvex::scaled_interpolation(&[], &[]), Err(PwlError::NoFunctions));
    }

    #[test]
    fn piece_count_examples() {
        assert_eq!(PwlConvex::zero().piece_count(), 1);
        assert_eq!(vee().piece_count(), 2);
        assert_eq!(PwlConvex::point(i(0), i(0)).piece_count(), 0);
    }

    #[test]
    fn subtract_recovers_summand() {
        let f = vee();
        let g = ramp(3, -1, 4);
        let sum = f.add(&g).unwrap();
        assert_eq!(sum.subtract(&g).unwrap(), f);
        // a concave difference is rejected
        assert_eq!(ramp(0, 0, 2).subtract(&vee()), Err(PwlError::NonConvex));
    }

    #[test]
    fn one_sided_slopes() {
        let f = vee();
        assert_eq!(f.right_slope(&i(1)), Some(&i(2)));
        assert_eq!(f.left_slope(&i(1)), Some(&i(-1)));
        assert_eq!(f.right_slope(&i(0)), Some(&i(-1)));
        assert_eq!(f.left_slope(&i(0)), None);
        assert_eq!(f.right_slope(&i(2)), None);
        assert_eq!(f.left_slope(&i(2)), Some(&i(2)));
    }

    #[test]
    fn json_debug_format() {
        let f = PwlConvex::linear(i(3), fin(0), Extended::PosInf).unwrap();
        let js = serde_json::to_string(&f).unwrap();
        assert_eq!(js, r#"{"anchor":[0,0],"breakpoints":[0,"inf"],"slopes":[3]}"#);
        let back: PwlConvex = serde_json::from_str(&js).unwrap();
        assert_eq!(back, f);
        let js = serde_json::to_string(&PwlConvex::zero()).unwrap();
        assert_eq!(js, r#"{"anchor":[0,0],"breakpoints":["-inf","inf"],"slopes":[0]}"#);
    }
}
