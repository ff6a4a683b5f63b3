//! Outward-rounded interval arithmetic.
//!
//! Every operation first computes with round-to-nearest and then widens the
//! result by one ulp on each side, so the true real result is always
//! contained. This over-approximates (directed rounding would be tighter by
//! one ulp per op) but needs no access to the FPU rounding mode.

use std::fmt;

use super::eval::{CircuitValue, EvalError};
use super::NodeId;
use crate::Rational;

/// A closed interval `[lo, hi]`, `lo <= hi`, endpoints never NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(!lo.is_nan() && !hi.is_nan() && lo <= hi, "invalid interval");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Interval {
        Interval::new(x, x)
    }

    /// Tightest interval around an exact rational: a single point when the
    /// value is a float, otherwise the two adjacent floats bracketing it.
    pub fn enclosing(value: &Rational) -> Interval {
        let f = value.to_f64();
        if !f.is_finite() {
            // Saturated conversion: clamp the finite side to the extreme float.
            return if f > 0.0 {
                Interval::new(f64::MAX, f64::INFINITY)
            } else {
                Interval::new(f64::NEG_INFINITY, f64::MIN)
            };
        }
        match Rational::from_f64(f) {
            Some(exact) if &exact == value => Interval::point(f),
            Some(exact) if exact < *value => Interval::new(f, f.next_up()),
            _ => Interval::new(f.next_down(), f),
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    fn widen(lo: f64, hi: f64) -> Interval {
        Interval::new(lo.next_down(), hi.next_up())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl CircuitValue for Interval {
    fn from_rational(value: &Rational) -> Option<Self> {
        Some(Interval::enclosing(value))
    }

    fn add(&self, rhs: &Self) -> Self {
        Interval::widen(self.lo + rhs.lo, self.hi + rhs.hi)
    }

    fn mul(&self, rhs: &Self) -> Self {
        let products = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        // 0 * inf products would be NaN; they only arise from unbounded
        // operands, where the conservative answer is the full line.
        if products.iter().any(|p| p.is_nan()) {
            return Interval::new(f64::NEG_INFINITY, f64::INFINITY);
        }
        let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::widen(lo, hi)
    }

    fn neg(&self) -> Self {
        Interval::widen(-self.hi, -self.lo)
    }

    fn inv(&self) -> Option<Self> {
        if self.contains_zero() {
            return None;
        }
        Some(Interval::widen(1.0 / self.hi, 1.0 / self.lo))
    }

    fn inv_error(at: NodeId) -> EvalError {
        EvalError::IntervalContainsZero { at }
    }
}

#[cfg(test)]
mod tests {
    use super::super::eval::eval_interval;
    use super::super::DagStore;
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn enclosing_is_a_point_for_representable_values() {
        let i = Interval::enclosing(&q("1/2"));
        assert_eq!((i.lo(), i.hi()), (0.5, 0.5));
        let j = Interval::enclosing(&q("1/3"));
        assert!(j.lo() < j.hi());
        assert!(j.contains(1.0 / 3.0));
        assert_eq!(j.hi(), j.lo().next_up(), "adjacent floats");
    }

    #[test]
    fn operations_widen_outward() {
        let a = Interval::point(0.1);
        let b = Interval::point(0.2);
        let s = a.add(&b);
        assert!(s.lo() < 0.1 + 0.2 && 0.1 + 0.2 < s.hi());
        let p = a.mul(&b);
        assert!(p.lo() < 0.1 * 0.2 && 0.1 * 0.2 < p.hi());
        let n = a.neg();
        assert!(n.contains(-0.1));
        let i = a.inv().unwrap();
        assert!(i.contains(10.0));
    }

    #[test]
    fn inverse_of_zero_straddling_interval_fails() {
        assert!(Interval::new(-1.0, 1.0).inv().is_none());
        assert!(Interval::new(0.0, 1.0).inv().is_none());
        assert!(Interval::new(-2.0, -1.0).inv().unwrap().contains(-0.7));
    }

    #[test]
    fn negative_intervals_invert_correctly() {
        let i = Interval::new(-4.0, -2.0).inv().unwrap();
        assert!(i.contains(-0.5) && i.contains(-0.25));
        assert!(i.lo() <= -0.5 && i.hi() >= -0.25);
    }

    #[test]
    fn interval_evaluation_contains_the_exact_value() {
        let mut s = DagStore::new();
        s.register_param("x");
        let x = s.mk_param("x").unwrap();
        let one = s.mk_const(q("1")).unwrap();
        let two = s.mk_const(q("2")).unwrap();
        let omx = s.mk_sub(one, x).unwrap();
        let sq = s.mk_mul(omx, omx).unwrap();
        let den = s.mk_sub(two, x).unwrap();
        let root = s.mk_div(sq, den).unwrap();
        let exact = crate::acir::eval_exact(&s, root, &[q("1/3")]).unwrap();
        let iv = eval_interval(&s, root, &[Interval::enclosing(&q("1/3"))]).unwrap();
        assert!(iv.contains(exact.to_f64()));
        assert!(iv.diameter() < 1e-13);
    }
}
