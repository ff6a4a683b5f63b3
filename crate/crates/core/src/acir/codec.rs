//! Binary serialization of circuit stores (`.acir`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   "ACIR\x01"
//! params  u32 count, then per param: u32 byte length + UTF-8 name
//! consts  u32 count, then per constant: u32 byte length + "numer/denom"
//! nodes   u32 count, then one u64 packed word per node
//! roots   u32 count, then one u32 node id per root
//! ```
//!
//! Decoding validates everything it reads: magic, buffer bounds, UTF-8,
//! canonical reduced constants, known type nibbles, operands that point
//! strictly downward, zeroed padding bits, no duplicate words (which would
//! break hash-consing), and in-range roots. No trailing bytes are allowed.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{DagStore, NodeId, MAX_NODES, OPERAND_MASK, TAG_ADD, TAG_CONST, TAG_INV, TAG_MUL, TAG_NEG, TAG_PARAM};
use crate::Rational;

pub const MAGIC: [u8; 5] = *b"ACIR\x01";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed .acir: {0}")]
pub struct MalformedAcir(pub String);

fn bad(msg: impl Into<String>) -> MalformedAcir {
    MalformedAcir(msg.into())
}

/// Serializes the whole store plus the given roots.
pub fn encode(store: &DagStore, roots: &[NodeId]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    push_u32(&mut out, store.params.len() as u32);
    for name in &store.params {
        push_str(&mut out, name);
    }
    push_u32(&mut out, store.constants.len() as u32);
    for c in &store.constants {
        push_str(&mut out, &format!("{}/{}", c.numer(), c.denom()));
    }
    push_u32(&mut out, store.words.len() as u32);
    for w in &store.words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    push_u32(&mut out, roots.len() as u32);
    for r in roots {
        assert!(r.index() < store.words.len(), "root out of range");
        push_u32(&mut out, r.index() as u32);
    }
    out
}

/// Parses and validates a serialized store; returns it with its roots.
pub fn decode(bytes: &[u8]) -> Result<(DagStore, Vec<NodeId>), MalformedAcir> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(bad("bad magic"));
    }

    let param_count = cur.u32()? as usize;
    let mut params = Vec::with_capacity(param_count.min(1 << 16));
    let mut param_index = HashMap::new();
    for i in 0..param_count {
        let name = cur.string()?;
        if name.is_empty() {
            return Err(bad(format!("parameter {i} has an empty name")));
        }
        if param_index.insert(name.clone(), i as u32).is_some() {
            return Err(bad(format!("duplicate parameter name `{name}`")));
        }
        params.push(name);
    }

    let const_count = cur.u32()? as usize;
    let mut constants = Vec::with_capacity(const_count.min(1 << 16));
    let mut const_index = HashMap::new();
    for i in 0..const_count {
        let text = cur.string()?;
        let value = parse_canonical_fraction(&text)
            .ok_or_else(|| bad(format!("constant {i} is not a canonical fraction: `{text}`")))?;
        if const_index.insert(value.clone(), i as u32).is_some() {
            return Err(bad(format!("duplicate constant {value}")));
        }
        constants.push(value);
    }

    let node_count = cur.u32()? as usize;
    if node_count > MAX_NODES {
        return Err(bad("node count exceeds the 2^30 id space"));
    }
    let mut words = Vec::with_capacity(node_count.min(1 << 20));
    let mut hashcons = HashMap::new();
    for i in 0..node_count {
        let w = cur.u64()?;
        validate_word(i, w, param_count, const_count)?;
        if hashcons.insert(w, NodeId::from_index(i)).is_some() {
            return Err(bad(format!("node {i} duplicates an earlier node word")));
        }
        words.push(w);
    }

    let root_count = cur.u32()? as usize;
    let mut roots = Vec::with_capacity(root_count.min(1 << 16));
    for _ in 0..root_count {
        let r = cur.u32()? as usize;
        if r >= node_count {
            return Err(bad(format!("root {r} out of range")));
        }
        roots.push(NodeId::from_index(r));
    }

    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes after the root section"));
    }

    Ok((
        DagStore {
            words,
            hashcons,
            params,
            param_index,
            constants,
            const_index,
        },
        roots,
    ))
}

fn validate_word(
    index: usize,
    w: u64,
    param_count: usize,
    const_count: usize,
) -> Result<(), MalformedAcir> {
    let tag = w & 0xF;
    let payload = w >> 4;
    let left = (payload & OPERAND_MASK) as usize;
    let right = (w >> 34) as usize;
    match tag {
        TAG_CONST => {
            if payload >= const_count as u64 {
                return Err(bad(format!("node {index}: constant index out of range")));
            }
        }
        TAG_PARAM => {
            if payload >= param_count as u64 {
                return Err(bad(format!("node {index}: parameter index out of range")));
            }
        }
        TAG_ADD | TAG_MUL => {
            if left >= index || right >= index {
                return Err(bad(format!("node {index}: operand does not point downward")));
            }
        }
        TAG_NEG | TAG_INV => {
            if left >= index {
                return Err(bad(format!("node {index}: operand does not point downward")));
            }
            if right != 0 {
                return Err(bad(format!("node {index}: nonzero padding bits")));
            }
        }
        t => return Err(bad(format!("node {index}: unknown type nibble {t}"))),
    }
    Ok(())
}

/// Strictly parses `numer/denom` with both parts in canonical reduced form:
/// denominator positive, gcd one, no superfluous characters.
fn parse_canonical_fraction(s: &str) -> Option<Rational> {
    let (n, d) = s.split_once('/')?;
    if !is_canonical_int(n, true) || !is_canonical_int(d, false) {
        return None;
    }
    let numer: BigInt = n.parse().ok()?;
    let denom: BigInt = d.parse().ok()?;
    if !denom.is_positive() {
        return None;
    }
    if numer.gcd(&denom) != BigInt::one() && !numer.is_zero() {
        return None;
    }
    if numer.is_zero() && !denom.is_one() {
        return None;
    }
    Rational::new(numer, denom)
}

/// Digits with no leading zeros (optionally a single leading `-`).
fn is_canonical_int(s: &str, allow_sign: bool) -> bool {
    let digits = match s.strip_prefix('-') {
        Some(rest) if allow_sign => rest,
        Some(_) => return false,
        None => s,
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    digits == "0" || !digits.starts_with('0')
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    push_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MalformedAcir> {
        if self.bytes.len() - self.pos < n {
            return Err(bad("truncated file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, MalformedAcir> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, MalformedAcir> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, MalformedAcir> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| bad("invalid UTF-8 string"))
    }
}
