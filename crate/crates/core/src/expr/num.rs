//! Numeric constants inside expressions: exact rationals that degrade to
//! floats on overflow or when mixed with a float literal.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, One, Signed, ToPrimitive, Zero};

pub type Q = Ratio<i128>;

/// A float with bitwise equality and a total order, so it can live inside
/// structurally compared expression trees.
#[derive(Clone, Copy, Debug)]
pub struct Flt(pub f64);

impl PartialEq for Flt {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}
impl Eq for Flt {}
impl PartialOrd for Flt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Flt {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl Hash for Flt {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Num {
    Rat(Q),
    Flt(f64),
}

impl Num {
    pub fn int(v: i128) -> Num {
        Num::Rat(Q::from_integer(v))
    }

    pub fn zero() -> Num {
        Num::int(0)
    }

    pub fn one() -> Num {
        Num::int(1)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Num::Rat(q) => q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN),
            Num::Flt(f) => f,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Num::Rat(q) => q.is_zero(),
            Num::Flt(f) => f == 0.0,
        }
    }

    /// Exact rational one only.
    pub fn is_one(self) -> bool {
        matches!(self, Num::Rat(q) if q.is_one())
    }

    pub fn is_negative(self) -> bool {
        match self {
            Num::Rat(q) => q.is_negative(),
            Num::Flt(f) => f < 0.0,
        }
    }

    pub fn add(self, o: Num) -> Num {
        match (self, o) {
            (Num::Rat(a), Num::Rat(b)) => match a.checked_add(&b) {
                Some(c) => Num::Rat(c),
                None => Num::Flt(self.to_f64() + o.to_f64()),
            },
            _ => Num::Flt(self.to_f64() + o.to_f64()),
        }
    }

    pub fn mul(self, o: Num) -> Num {
        match (self, o) {
            (Num::Rat(a), Num::Rat(b)) => match a.checked_mul(&b) {
                Some(c) => Num::Rat(c),
                None => Num::Flt(self.to_f64() * o.to_f64()),
            },
            _ => Num::Flt(self.to_f64() * o.to_f64()),
        }
    }

    pub fn neg(self) -> Num {
        match self {
            Num::Rat(q) => Num::Rat(-q),
            Num::Flt(f) => Num::Flt(-f),
        }
    }

    /// Integer power; `None` for 0 to a negative power.
    pub fn powi(self, k: i64) -> Option<Num> {
        if self.is_zero() && k < 0 {
            return None;
        }
        match self {
            Num::Rat(_) if k.unsigned_abs() > 4096 => Some(Num::Flt(self.to_f64().powf(k as f64))),
            Num::Rat(q) => {
                let base = if k < 0 { q.recip() } else { q };
                let mut acc = Q::one();
                for _ in 0..k.unsigned_abs() {
                    match acc.checked_mul(&base) {
                        Some(v) => acc = v,
                        None => return Some(Num::Flt(self.to_f64().powi(k as i32))),
                    }
                }
                Some(Num::Rat(acc))
            }
            Num::Flt(f) => Some(Num::Flt(f.powi(k as i32))),
        }
    }

    /// The value as an integer, when it is an exact integer rational.
    pub fn as_integer(self) -> Option<i64> {
        match self {
            Num::Rat(q) if q.is_integer() => q.numer().to_i64(),
            _ => None,
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Rat(q) => {
                if q.is_integer() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            Num::Flt(v) => write!(f, "{}", format_float(*v)),
        }
    }
}

/// Shortest round-trip decimal rendering that always carries a decimal point.
pub fn format_float(v: f64) -> String {
    let s = format!("{}", v);
    if s.contains('.') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{}.0", s)
    }
}

/// Integer k-th root when `v` is a perfect k-th power.
pub(crate) fn exact_root(v: i128, k: u32) -> Option<i128> {
    if v < 0 {
        return None;
    }
    if v < 2 {
        return Some(v);
    }
    let guess = (v as f64).powf(1.0 / k as f64).round() as i128;
    for c in [guess - 1, guess, guess + 1] {
        if c >= 0 && c.checked_pow(k) == Some(v) {
            return Some(c);
        }
    }
    None
}
