//! Exact integers with an `i128` fast path.
//!
//! Every arithmetic operation is checked; on overflow the value is promoted to
//! a heap-allocated [`BigInt`] and demoted back as soon as it fits again, so the
//! representation of a given number is always unique.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone)]
enum Repr {
    Small(i128),
    Big(Box<BigInt>),
}

/// An exact, arbitrary-precision integer.
#[derive(Clone)]
pub struct Int(Repr);

impl Int {
    pub const ZERO: Int = Int(Repr::Small(0));
    pub const ONE: Int = Int(Repr::Small(1));

    fn from_big(b: BigInt) -> Int {
        match b.to_i128() {
            Some(v) => Int(Repr::Small(v)),
            None => Int(Repr::Big(Box::new(b))),
        }
    }

    pub fn to_bigint(&self) -> BigInt {
        match &self.0 {
            Repr::Small(v) => BigInt::from(*v),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn to_i128(&self) -> Option<i128> {
        match &self.0 {
            Repr::Small(v) => Some(*v),
            Repr::Big(_) => None,
        }
    }

    pub fn to_i64(&self) -> Option<i64> {
        self.to_i128().and_then(|v| i64::try_from(v).ok())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0))
    }

    pub fn signum(&self) -> i32 {
        match &self.0 {
            Repr::Small(v) => v.signum() as i32,
            Repr::Big(b) => {
                if b.is_negative() {
                    -1
                } else {
                    1
                }
            }
        }
    }

    pub fn abs(&self) -> Int {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Returns `self / rhs` when the division is exact.
    pub fn div_exact(&self, rhs: &Int) -> Option<Int> {
        if rhs.is_zero() {
            return None;
        }
        match (&self.0, &rhs.0) {
            (Repr::Small(a), Repr::Small(b)) => {
                if a.checked_rem(*b)? == 0 {
                    a.checked_div(*b).map(Int::from)
                } else {
                    None
                }
            }
            _ => {
                let (q, r) = self.to_bigint().div_rem(&rhs.to_bigint());
                r.is_zero().then(|| Int::from_big(q))
            }
        }
    }

    /// Floor division. Panics on a zero divisor.
    pub fn div_floor(&self, rhs: &Int) -> Int {
        assert!(!rhs.is_zero(), "division by zero");
        match (&self.0, &rhs.0) {
            (Repr::Small(a), Repr::Small(b)) => match a.checked_div_euclid(*b) {
                Some(_) => Int::from(Integer::div_floor(a, b)),
                None => Int::from_big(Integer::div_floor(&BigInt::from(*a), &BigInt::from(*b))),
            },
            _ => Int::from_big(Integer::div_floor(&self.to_bigint(), &rhs.to_bigint())),
        }
    }
}

impl Default for Int {
    fn default() -> Self {
        Int::ZERO
    }
}

macro_rules! from_prim {
    ($($t:ty),*) => {$(
        impl From<$t> for Int {
            fn from(v: $t) -> Int {
                Int(Repr::Small(v as i128))
            }
        }
    )*};
}
from_prim!(i8, i16, i32, i64, u8, u16, u32, usize, isize);

impl From<u64> for Int {
    fn from(v: u64) -> Int {
        Int(Repr::Small(v as i128))
    }
}

impl From<i128> for Int {
    fn from(v: i128) -> Int {
        Int(Repr::Small(v))
    }
}

impl From<BigInt> for Int {
    fn from(v: BigInt) -> Int {
        Int::from_big(v)
    }
}

impl From<&Int> for BigInt {
    fn from(v: &Int) -> BigInt {
        v.to_bigint()
    }
}

impl PartialEq for Int {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a == b,
            (Repr::Big(a), Repr::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Int {}

impl Hash for Int {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(v) => v.hash(state),
            Repr::Big(b) => b.hash(state),
        }
    }
}

impl PartialOrd for Int {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Int {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.cmp(b),
            // A big value is always outside the i128 range.
            (Repr::Small(_), Repr::Big(b)) => {
                if b.is_negative() {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
            (Repr::Big(a), Repr::Small(_)) => {
                if a.is_negative() {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            (Repr::Big(a), Repr::Big(b)) => a.cmp(b),
        }
    }
}

impl PartialEq<i64> for Int {
    fn eq(&self, other: &i64) -> bool {
        matches!(self.0, Repr::Small(v) if v == *other as i128)
    }
}

impl PartialOrd<i64> for Int {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Int::from(*other)))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident, $op:tt) => {
        impl<'a> $trait<&'a Int> for &'a Int {
            type Output = Int;
            #[inline]
            fn $method(self, rhs: &'a Int) -> Int {
                if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
                    if let Some(v) = a.$checked(*b) {
                        return Int(Repr::Small(v));
                    }
                }
                Int::from_big(self.to_bigint() $op rhs.to_bigint())
            }
        }
        impl $trait<Int> for Int {
            type Output = Int;
            #[inline]
            fn $method(self, rhs: Int) -> Int {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Int> for Int {
            type Output = Int;
            #[inline]
            fn $method(self, rhs: &'a Int) -> Int {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Int> for &'a Int {
            type Output = Int;
            #[inline]
            fn $method(self, rhs: Int) -> Int {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, checked_add, +);
binop!(Sub, sub, checked_sub, -);
binop!(Mul, mul, checked_mul, *);

impl AddAssign<&Int> for Int {
    #[inline]
    fn add_assign(&mut self, rhs: &Int) {
        if let (Repr::Small(a), Repr::Small(b)) = (&mut self.0, &rhs.0) {
            if let Some(v) = a.checked_add(*b) {
                *a = v;
                return;
            }
        }
        *self = &*self + rhs;
    }
}

impl AddAssign<Int> for Int {
    fn add_assign(&mut self, rhs: Int) {
        *self += &rhs;
    }
}

impl SubAssign<&Int> for Int {
    #[inline]
    fn sub_assign(&mut self, rhs: &Int) {
        if let (Repr::Small(a), Repr::Small(b)) = (&mut self.0, &rhs.0) {
            if let Some(v) = a.checked_sub(*b) {
                *a = v;
                return;
            }
        }
        *self = &*self - rhs;
    }
}

impl Neg for &Int {
    type Output = Int;
    fn neg(self) -> Int {
        match &self.0 {
            Repr::Small(v) => match v.checked_neg() {
                Some(n) => Int(Repr::Small(n)),
                None => Int::from_big(-BigInt::from(*v)),
            },
            Repr::Big(b) => Int::from_big(-&**b),
        }
    }
}

impl Neg for Int {
    type Output = Int;
    fn neg(self) -> Int {
        -&self
    }
}

impl std::iter::Sum for Int {
    fn sum<I: Iterator<Item = Int>>(iter: I) -> Int {
        iter.fold(Int::ZERO, |mut acc, x| {
            acc += &x;
            acc
        })
    }
}

impl<'a> std::iter::Sum<&'a Int> for Int {
    fn sum<I: Iterator<Item = &'a Int>>(iter: I) -> Int {
        iter.fold(Int::ZERO, |mut acc, x| {
            acc += x;
            acc
        })
    }
}

impl fmt::Display for Int {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(v) => write!(f, "{v}"),
            Repr::Big(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Debug for Int {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Int {
    type Err = num_bigint::ParseBigIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<i128>() {
            Ok(v) => Ok(Int::from(v)),
            Err(_) => s.parse::<BigInt>().map(Int::from_big),
        }
    }
}

// JSON: a number when it fits in i64, otherwise a decimal string.
impl Serialize for Int {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.to_i64() {
            Some(v) => serializer.serialize_i64(v),
            None => serializer.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Int {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct IntVisitor;
        impl Visitor<'_> for IntVisitor {
            type Value = Int;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a decimal integer string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Int, E> {
                Ok(Int::from(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Int, E> {
                Ok(Int::from(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Int, E> {
                v.trim().parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(IntVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn promotes_on_overflow_and_demotes_back() {
        let max = Int::from(i128::MAX);
        let over = &max + &Int::ONE;
        assert!(over.to_i128().is_none());
        assert_eq!(over.to_bigint(), BigInt::from(i128::MAX) + 1);
        let back = &over - &Int::ONE;
        assert_eq!(back, max);
        assert_eq!(back.to_i128(), Some(i128::MAX));
    }

    #[test]
    fn ordering_across_representations() {
        let big = &Int::from(i128::MAX) * &Int::from(4);
        let neg_big = -&big;
        assert!(big > Int::from(7));
        assert!(neg_big < Int::from(-7));
        assert!(neg_big < big);
    }

    #[test]
    fn exact_and_floor_division() {
        assert_eq!(Int::from(12).div_exact(&Int::from(4)), Some(Int::from(3)));
        assert_eq!(Int::from(13).div_exact(&Int::from(4)), None);
        assert_eq!(Int::from(-7).div_floor(&Int::from(2)), Int::from(-4));
        assert_eq!(Int::from(7).div_floor(&Int::from(2)), Int::from(3));
    }

    #[test]
    fn json_roundtrip() {
        let small = Int::from(-42);
        let big = &Int::from(i128::MAX) * &Int::from(3);
        let js = serde_json::to_string(&vec![small.clone(), big.clone()]).unwrap();
        assert!(js.starts_with("[-42,\""));
        let back: Vec<Int> = serde_json::from_str(&js).unwrap();
        assert_eq!(back, vec![small, big]);
    }
}
