//! Randomized circuit canonicalization.
//!
//! Nodes are fingerprinted by their values under `k` random valuations over
//! the prime field Z_p, p = 2^61 - 1. Two reachable nodes with identical
//! fingerprints are merged onto the lower-indexed one; by the
//! Schwartz-Zippel bound the probability of merging genuinely different
//! rational functions is negligible for circuits of the sizes produced by
//! state elimination.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{CircuitValue, Evaluator};
use super::{AcirError, DagStore, NodeId, NodeKind};
use crate::Rational;

/// The Mersenne prime 2^61 - 1: the fingerprinting field modulus.
pub const FIELD_PRIME: u64 = (1 << 61) - 1;

/// How many whole-valuation redraws are tolerated before giving up. Redraws
/// happen when a random point hits a pole of the circuit (an `Inv` whose
/// operand evaluates to zero) or a constant has no field image.
const RESAMPLE_LIMIT: u32 = 64;

/// An element of Z_p, p = 2^61 - 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement(u64);

impl FieldElement {
    pub fn new(v: u64) -> FieldElement {
        FieldElement(v % FIELD_PRIME)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn residue(value: &Rational) -> Option<FieldElement> {
        let p = BigInt::from(FIELD_PRIME);
        let n = value.numer().mod_floor(&p).to_u64().expect("residue fits");
        let d = value.denom().mod_floor(&p).to_u64().expect("residue fits");
        let d = FieldElement(d).inv()?;
        Some(FieldElement(n).mul(&d))
    }

    fn pow(self, mut e: u64) -> FieldElement {
        let mut base = self;
        let mut acc = FieldElement(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
}

impl CircuitValue for FieldElement {
    fn from_rational(value: &Rational) -> Option<Self> {
        FieldElement::residue(value)
    }

    fn add(&self, rhs: &Self) -> Self {
        let s = self.0 + rhs.0;
        FieldElement(if s >= FIELD_PRIME { s - FIELD_PRIME } else { s })
    }

    fn mul(&self, rhs: &Self) -> Self {
        FieldElement(((self.0 as u128 * rhs.0 as u128) % FIELD_PRIME as u128) as u64)
    }

    fn neg(&self) -> Self {
        FieldElement(if self.0 == 0 { 0 } else { FIELD_PRIME - self.0 })
    }

    fn inv(&self) -> Option<Self> {
        if self.0 == 0 {
            None
        } else {
            Some(self.pow(FIELD_PRIME - 2))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SzError {
    #[error("exceeded {RESAMPLE_LIMIT} valuation redraws while fingerprinting")]
    ResampleLimitExceeded,
    #[error(transparent)]
    Store(#[from] AcirError),
}

/// Values of every node reachable from the roots under `k` successfully
/// sampled field valuations.
pub(crate) struct Fingerprints {
    pub evaluator: Evaluator,
    /// One inner vector per valuation, indexed like `evaluator.order()`.
    pub per_valuation: Vec<Vec<FieldElement>>,
}

impl Fingerprints {
    /// The `k`-tuple fingerprint of the node at `pos` in evaluation order.
    fn tuple(&self, pos: usize) -> Vec<u64> {
        self.per_valuation.iter().map(|v| v[pos].0).collect()
    }
}

pub(crate) fn sample_fingerprints(
    store: &DagStore,
    roots: &[NodeId],
    k: usize,
    seed: u64,
) -> Result<Fingerprints, SzError> {
    assert!(k >= 1, "at least one valuation required");
    let evaluator = Evaluator::new(store, roots);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_valuation = Vec::with_capacity(k);
    let mut redraws = 0u32;
    while per_valuation.len() < k {
        let valuation: Vec<FieldElement> = (0..store.param_count())
            .map(|_| FieldElement(rng.gen_range(0..FIELD_PRIME)))
            .collect();
        match evaluator.eval_all(store, &valuation) {
            Ok(values) => per_valuation.push(values),
            Err(_) => {
                redraws += 1;
                if redraws > RESAMPLE_LIMIT {
                    return Err(SzError::ResampleLimitExceeded);
                }
            }
        }
    }
    Ok(Fingerprints {
        evaluator,
        per_valuation,
    })
}

/// Merges reachable nodes whose `k` random field values coincide, directing
/// each equivalence class at its lowest-indexed member. Returns the
/// old-to-new mapping for every node reachable from `roots` (identity for
/// nodes that stay put). The store is append-only, so merged structure is
/// rebuilt at fresh ids where necessary; the sub-dag reachable from the
/// mapped roots never has more nodes than the original.
pub fn sz_canonicalize(
    store: &mut DagStore,
    roots: &[NodeId],
    k: usize,
    seed: u64,
) -> Result<HashMap<NodeId, NodeId>, SzError> {
    let prints = sample_fingerprints(store, roots, k, seed)?;
    let mut map: HashMap<NodeId, NodeId> = HashMap::new();
    let mut representative: HashMap<Vec<u64>, NodeId> = HashMap::new();
    for pos in 0..prints.evaluator.order().len() {
        let id = prints.evaluator.order()[pos];
        let tuple = prints.tuple(pos);
        if let Some(&rep) = representative.get(&tuple) {
            map.insert(id, rep);
            continue;
        }
        let rebuilt = match store.kind(id) {
            NodeKind::Const(_) | NodeKind::Param(_) => id,
            NodeKind::Add(l, r) => store.mk_add(map[&l], map[&r])?,
            NodeKind::Mul(l, r) => store.mk_mul(map[&l], map[&r])?,
            NodeKind::Neg(c) => store.mk_neg(map[&c])?,
            NodeKind::Inv(c) => store.mk_inv(map[&c])?,
        };
        map.insert(id, rebuilt);
        representative.insert(tuple, rebuilt);
    }
    Ok(map)
}
