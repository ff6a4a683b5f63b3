//! Bottom-up circuit evaluation over pluggable value domains.

use super::{DagStore, NodeId, NodeKind};
use crate::Rational;

/// A value domain circuits can be evaluated in: exact rationals, floats,
/// intervals, or prime-field elements.
pub trait CircuitValue: Clone {
    /// Image of an exact rational constant. `None` when the domain cannot
    /// represent it (e.g. a denominator divisible by the field prime).
    fn from_rational(value: &Rational) -> Option<Self>;
    fn add(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse; `None` signals division by zero.
    fn inv(&self) -> Option<Self>;
    /// The error reported when [`CircuitValue::inv`] fails at node `at`.
    fn inv_error(at: NodeId) -> EvalError {
        EvalError::DivisionByZero { at }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero at node {at}")]
    DivisionByZero { at: NodeId },
    #[error("interval operand of the inverse at node {at} contains zero")]
    IntervalContainsZero { at: NodeId },
    #[error("constant at node {at} is not representable in the evaluation domain")]
    UnrepresentableConstant { at: NodeId },
}

/// Precomputed evaluation plan for a fixed set of roots: the reachable
/// sub-dag in ascending id order (ids only ever point downward, so this is a
/// topological order) plus a dense slot map.
///
/// The plan stays valid when the store grows afterwards; it must only be
/// used with the store it was built from.
pub struct Evaluator {
    order: Vec<NodeId>,
    slot: Vec<u32>,
    roots: Vec<NodeId>,
}

impl Evaluator {
    pub fn new(store: &DagStore, roots: &[NodeId]) -> Evaluator {
        let n = store.node_count();
        let mut reach = vec![false; n];
        for &r in roots {
            assert!(r.index() < n, "root {r} out of range");
            reach[r.index()] = true;
        }
        for i in (0..n).rev() {
            if !reach[i] {
                continue;
            }
            match store.kind(NodeId::from_index(i)) {
                NodeKind::Add(l, r) | NodeKind::Mul(l, r) => {
                    reach[l.index()] = true;
                    reach[r.index()] = true;
                }
                NodeKind::Neg(c) | NodeKind::Inv(c) => reach[c.index()] = true,
                NodeKind::Const(_) | NodeKind::Param(_) => {}
            }
        }
        let mut order = Vec::new();
        let mut slot = vec![u32::MAX; n];
        for (i, &is_reachable) in reach.iter().enumerate() {
            if is_reachable {
                slot[i] = order.len() as u32;
                order.push(NodeId::from_index(i));
            }
        }
        Evaluator {
            order,
            slot,
            roots: roots.to_vec(),
        }
    }

    /// Number of nodes reachable from the roots.
    pub fn node_count(&self) -> usize {
        self.order.len()
    }

    /// Reachable node ids in ascending order.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    /// Evaluates every reachable node; the result is indexed by position in
    /// [`Evaluator::order`]. `valuation` holds one value per store parameter.
    pub fn eval_all<T: CircuitValue>(
        &self,
        store: &DagStore,
        valuation: &[T],
    ) -> Result<Vec<T>, EvalError> {
        assert_eq!(
            valuation.len(),
            store.param_count(),
            "valuation must supply one value per parameter"
        );
        let mut vals: Vec<T> = Vec::with_capacity(self.order.len());
        for &id in &self.order {
            let v = match store.kind(id) {
                NodeKind::Const(c) => T::from_rational(store.constant(c))
                    .ok_or(EvalError::UnrepresentableConstant { at: id })?,
                NodeKind::Param(p) => valuation[p as usize].clone(),
                NodeKind::Add(l, r) => self.value_of(&vals, l).add(self.value_of(&vals, r)),
                NodeKind::Mul(l, r) => self.value_of(&vals, l).mul(self.value_of(&vals, r)),
                NodeKind::Neg(c) => self.value_of(&vals, c).neg(),
                NodeKind::Inv(c) => self
                    .value_of(&vals, c)
                    .inv()
                    .ok_or_else(|| T::inv_error(id))?,
            };
            vals.push(v);
        }
        Ok(vals)
    }

    /// Looks up the value of a reachable node inside an [`Evaluator::eval_all`]
    /// result.
    pub fn value_of<'a, T>(&self, vals: &'a [T], id: NodeId) -> &'a T {
        let s = self.slot[id.index()];
        debug_assert_ne!(s, u32::MAX, "node {id} not reachable from the roots");
        &vals[s as usize]
    }

    /// Evaluates and returns one value per root.
    pub fn eval<T: CircuitValue>(
        &self,
        store: &DagStore,
        valuation: &[T],
    ) -> Result<Vec<T>, EvalError> {
        let vals = self.eval_all(store, valuation)?;
        Ok(self
            .roots
            .iter()
            .map(|&r| self.value_of(&vals, r).clone())
            .collect())
    }
}

impl CircuitValue for Rational {
    fn from_rational(value: &Rational) -> Option<Self> {
        Some(value.clone())
    }

    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn neg(&self) -> Self {
        -self
    }

    fn inv(&self) -> Option<Self> {
        self.recip()
    }
}

impl CircuitValue for f64 {
    fn from_rational(value: &Rational) -> Option<Self> {
        Some(value.to_f64())
    }

    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn neg(&self) -> Self {
        -self
    }

    fn inv(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }
}

/// Exact rational value of the sub-circuit rooted at `root`.
pub fn eval_exact(
    store: &DagStore,
    root: NodeId,
    valuation: &[Rational],
) -> Result<Rational, EvalError> {
    Ok(Evaluator::new(store, &[root])
        .eval(store, valuation)?
        .pop()
        .expect("one root"))
}

/// Round-to-nearest floating-point value of the sub-circuit at `root`.
pub fn eval_float(store: &DagStore, root: NodeId, valuation: &[f64]) -> Result<f64, EvalError> {
    Ok(Evaluator::new(store, &[root])
        .eval(store, valuation)?
        .pop()
        .expect("one root"))
}

/// Outward-rounded interval enclosure of the sub-circuit at `root`.
pub fn eval_interval(
    store: &DagStore,
    root: NodeId,
    valuation: &[super::Interval],
) -> Result<super::Interval, EvalError> {
    Ok(Evaluator::new(store, &[root])
        .eval(store, valuation)?
        .pop()
        .expect("one root"))
}
