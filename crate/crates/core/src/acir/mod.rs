//! Append-only arithmetic-circuit store.
//!
//! Circuits are DAGs whose nodes are constants, parameters, binary `Add` /
//! `Mul`, and unary `Neg` / `Inv`. Every node packs into one 64-bit word:
//! bits `[0..4)` hold the type nibble (0 const, 1 param, 2 add, 3 mul,
//! 4 neg, 5 inv), constants and parameters keep their payload in bits
//! `[4..64)`, binary nodes keep their operands in bits `[4..34)` and
//! `[34..64)`, and unary nodes keep their child in bits `[4..34)` with the
//! rest zero. Node ids stay below 2^30 so they fit the operand slots.
//!
//! Construction goes through the `mk_*` methods, which apply local algebraic
//! rewrites (constant folding, neutral and absorbing elements, double
//! negation and double inverse cancellation, commutative operand ordering)
//! and then hash-cons on the packed word, so structurally equal nodes share
//! one id. The store only ever grows; ids stay valid for its lifetime.

pub mod codec;
mod eval;
mod interval;
pub(crate) mod sz;

pub use eval::{eval_exact, eval_float, eval_interval, CircuitValue, EvalError, Evaluator};
pub use interval::Interval;
pub use sz::{sz_canonicalize, FieldElement, SzError, FIELD_PRIME};

use std::collections::HashMap;
use std::fmt;

use crate::Rational;

/// Hard cap on the number of nodes in one store: ids must fit 30 bits.
pub const MAX_NODES: usize = 1 << 30;

const TAG_CONST: u64 = 0;
const TAG_PARAM: u64 = 1;
const TAG_ADD: u64 = 2;
const TAG_MUL: u64 = 3;
const TAG_NEG: u64 = 4;
const TAG_INV: u64 = 5;

const OPERAND_MASK: u64 = (1 << 30) - 1;

/// Index of a node in a [`DagStore`]; strictly less than [`MAX_NODES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub(crate) fn from_index(i: usize) -> NodeId {
        debug_assert!(i < MAX_NODES);
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Decoded view of one node. Payload of `Const` indexes the store's constant
/// table; payload of `Param` is the parameter index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Const(u32),
    Param(u32),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Inv(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AcirError {
    #[error("circuit store is full ({MAX_NODES} nodes)")]
    CapacityExceeded,
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("multiplicative inverse of the zero constant")]
    DivisionByZero,
}

fn pack_payload(tag: u64, payload: u64) -> u64 {
    debug_assert!(payload < 1 << 60);
    tag | payload << 4
}

fn pack_binary(tag: u64, l: NodeId, r: NodeId) -> u64 {
    tag | (l.0 as u64) << 4 | (r.0 as u64) << 34
}

fn pack_unary(tag: u64, c: NodeId) -> u64 {
    tag | (c.0 as u64) << 4
}

/// The circuit arena: packed node words plus the parameter and constant
/// tables they reference.
pub struct DagStore {
    words: Vec<u64>,
    hashcons: HashMap<u64, NodeId>,
    params: Vec<String>,
    param_index: HashMap<String, u32>,
    constants: Vec<Rational>,
    const_index: HashMap<Rational, u32>,
}

impl Default for DagStore {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for DagStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DagStore")
            .field("nodes", &self.words.len())
            .field("params", &self.params)
            .field("constants", &self.constants.len())
            .finish()
    }
}

impl DagStore {
    pub fn new() -> DagStore {
        DagStore {
            words: Vec::new(),
            hashcons: HashMap::new(),
            params: Vec::new(),
            param_index: HashMap::new(),
            constants: Vec::new(),
            const_index: HashMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.words.len()
    }

    /// The raw packed words, in id order. This is the on-disk node section.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// All node ids in creation (hence topological) order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.words.len()).map(NodeId::from_index)
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        let w = self.words[id.index()];
        let op = |shift: u64| NodeId((w >> shift & OPERAND_MASK) as u32);
        match w & 0xF {
            TAG_CONST => NodeKind::Const((w >> 4) as u32),
            TAG_PARAM => NodeKind::Param((w >> 4) as u32),
            TAG_ADD => NodeKind::Add(op(4), op(34)),
            TAG_MUL => NodeKind::Mul(op(4), op(34)),
            TAG_NEG => NodeKind::Neg(op(4)),
            TAG_INV => NodeKind::Inv(op(4)),
            t => unreachable!("corrupt node tag {t}"),
        }
    }

    /// Declared parameter names, in index order.
    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Registers a parameter name (idempotent) and returns its index.
    pub fn register_param(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.param_index.get(name) {
            return i;
        }
        let i = self.params.len() as u32;
        self.params.push(name.to_owned());
        self.param_index.insert(name.to_owned(), i);
        i
    }

    pub fn param_id(&self, name: &str) -> Option<u32> {
        self.param_index.get(name).copied()
    }

    /// The deduplicated constant table referenced by `Const` payloads.
    pub fn constants(&self) -> &[Rational] {
        &self.constants
    }

    pub fn constant(&self, idx: u32) -> &Rational {
        &self.constants[idx as usize]
    }

    /// The rational value of `id` if it is a constant node.
    pub fn const_value(&self, id: NodeId) -> Option<&Rational> {
        match self.kind(id) {
            NodeKind::Const(c) => Some(self.constant(c)),
            _ => None,
        }
    }

    pub fn is_const_zero(&self, id: NodeId) -> bool {
        self.const_value(id).is_some_and(Rational::is_zero)
    }

    pub fn is_const_one(&self, id: NodeId) -> bool {
        self.const_value(id).is_some_and(Rational::is_one)
    }

    fn check(&self, id: NodeId) {
        assert!(id.index() < self.words.len(), "node id {id} out of range");
    }

    fn intern(&mut self, word: u64) -> Result<NodeId, AcirError> {
        if let Some(&id) = self.hashcons.get(&word) {
            return Ok(id);
        }
        if self.words.len() >= MAX_NODES {
            return Err(AcirError::CapacityExceeded);
        }
        let id = NodeId::from_index(self.words.len());
        self.words.push(word);
        self.hashcons.insert(word, id);
        Ok(id)
    }

    /// Interns `value`, reduced to canonical form, as a constant node.
    pub fn mk_const(&mut self, value: Rational) -> Result<NodeId, AcirError> {
        let idx = match self.const_index.get(&value) {
            Some(&i) => i,
            None => {
                let i = self.constants.len() as u32;
                self.constants.push(value.clone());
                self.const_index.insert(value, i);
                i
            }
        };
        self.intern(pack_payload(TAG_CONST, idx as u64))
    }

    /// Node for a previously registered parameter.
    pub fn mk_param(&mut self, name: &str) -> Result<NodeId, AcirError> {
        let idx = self
            .param_id(name)
            .ok_or_else(|| AcirError::UnknownParameter(name.to_owned()))?;
        self.intern(pack_payload(TAG_PARAM, idx as u64))
    }

    pub fn mk_add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AcirError> {
        self.check(a);
        self.check(b);
        if let (Some(x), Some(y)) = (self.const_value(a), self.const_value(b)) {
            let sum = x + y;
            return self.mk_const(sum);
        }
        if self.is_const_zero(a) {
            return Ok(b);
        }
        if self.is_const_zero(b) {
            return Ok(a);
        }
        let (l, r) = if a <= b { (a, b) } else { (b, a) };
        self.intern(pack_binary(TAG_ADD, l, r))
    }

    pub fn mk_mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AcirError> {
        self.check(a);
        self.check(b);
        if let (Some(x), Some(y)) = (self.const_value(a), self.const_value(b)) {
            let prod = x * y;
            return self.mk_const(prod);
        }
        if self.is_const_zero(a) || self.is_const_zero(b) {
            return self.mk_const(Rational::zero());
        }
        if self.is_const_one(a) {
            return Ok(b);
        }
        if self.is_const_one(b) {
            return Ok(a);
        }
        let (l, r) = if a <= b { (a, b) } else { (b, a) };
        self.intern(pack_binary(TAG_MUL, l, r))
    }

    pub fn mk_neg(&mut self, a: NodeId) -> Result<NodeId, AcirError> {
        self.check(a);
        if let Some(x) = self.const_value(a) {
            let v = -x;
            return self.mk_const(v);
        }
        if let NodeKind::Neg(inner) = self.kind(a) {
            return Ok(inner);
        }
        self.intern(pack_unary(TAG_NEG, a))
    }

    pub fn mk_inv(&mut self, a: NodeId) -> Result<NodeId, AcirError> {
        self.check(a);
        if let Some(x) = self.const_value(a) {
            let v = x.recip().ok_or(AcirError::DivisionByZero)?;
            return self.mk_const(v);
        }
        if let NodeKind::Inv(inner) = self.kind(a) {
            return Ok(inner);
        }
        self.intern(pack_unary(TAG_INV, a))
    }

    /// `a - b` as `a + Neg(b)`.
    pub fn mk_sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AcirError> {
        let nb = self.mk_neg(b)?;
        self.mk_add(a, nb)
    }

    /// `a / b` as `a * Inv(b)`.
    pub fn mk_div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AcirError> {
        let ib = self.mk_inv(b)?;
        self.mk_mul(a, ib)
    }
}

/// Copies the sub-dag reachable from `roots` into a fresh store, preserving
/// all parameter names (so parameter indices and valuations stay compatible)
/// and returns the images of `roots`.
pub fn extract(store: &DagStore, roots: &[NodeId]) -> (DagStore, Vec<NodeId>) {
    let ev = Evaluator::new(store, roots);
    let mut out = DagStore::new();
    for name in store.params() {
        out.register_param(name);
    }
    let mut map: HashMap<NodeId, NodeId> = HashMap::new();
    for &id in ev.order() {
        let new_id = match store.kind(id) {
            NodeKind::Const(c) => out.mk_const(store.constant(c).clone()),
            NodeKind::Param(p) => out.mk_param(&store.params()[p as usize]),
            NodeKind::Add(l, r) => out.mk_add(map[&l], map[&r]),
            NodeKind::Mul(l, r) => out.mk_mul(map[&l], map[&r]),
            NodeKind::Neg(c) => out.mk_neg(map[&c]),
            NodeKind::Inv(c) => out.mk_inv(map[&c]),
        }
        .expect("extraction cannot fail on a well-formed store");
        map.insert(id, new_id);
    }
    let new_roots = roots.iter().map(|r| map[r]).collect();
    (out, new_roots)
}
