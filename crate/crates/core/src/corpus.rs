//! Bundled example models and deterministic model generators.
//!
//! The generators exist for cross-checking the elimination engine against
//! the dense oracle on many small random instances; everything is seeded, so
//! failures reproduce exactly.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acir::{DagStore, NodeId};
use crate::pmc::{Pmc, RewardMap};
use crate::Rational;

/// The 13-state biased-coin die (parameter `x`), outcomes labeled
/// `one` .. `six`.
pub const DICE_MODEL: &str = include_str!("../../../models/dice.pmc");

/// Two-state rotation with parametric rewards `a`, `b`; long-run average
/// (a + b) / 2.
pub const TWO_CYCLE_MODEL: &str = include_str!("../../../models/two_cycle.pmc");

/// Bounded-retransmission-style protocol over a lossy data channel (delivery
/// probability `pk`) and a lossy ack channel (delivery probability `pl`):
/// `chunks` file chunks, each attempted at most `max_retries + 1` times.
/// Three states per (chunk, attempt) plus absorbing `ok` and `err`, so
/// `3 * chunks * (max_retries + 1) + 2` states in total.
pub fn brp_model(chunks: usize, max_retries: usize) -> String {
    assert!(chunks > 0);
    let tries = max_retries + 1;
    let send = |i: usize, r: usize| 3 * (i * tries + r);
    let ack = |i: usize, r: usize| send(i, r) + 1;
    let retry = |i: usize, r: usize| send(i, r) + 2;
    let ok = 3 * chunks * tries;
    let err = ok + 1;

    let mut out = String::new();
    out.push_str("# Bounded retransmission: chunks=");
    out.push_str(&chunks.to_string());
    out.push_str(" retries=");
    out.push_str(&max_retries.to_string());
    out.push('\n');
    out.push_str("@parameters\npk\npl\n");
    out.push_str(&format!("@states {}\n", err + 1));
    out.push_str("@initial 0\n");
    out.push_str(&format!("@labels\n{ok}: \"ok\"\n{err}: \"err\"\n"));
    out.push_str("@transitions\n");
    for i in 0..chunks {
        for r in 0..tries {
            out.push_str(&format!("{} {} pk\n", send(i, r), ack(i, r)));
            out.push_str(&format!("{} {} 1 - pk\n", send(i, r), retry(i, r)));
            let delivered = if i + 1 < chunks { send(i + 1, 0) } else { ok };
            out.push_str(&format!("{} {} pl\n", ack(i, r), delivered));
            out.push_str(&format!("{} {} 1 - pl\n", ack(i, r), retry(i, r)));
            let next = if r + 1 < tries { send(i, r + 1) } else { err };
            out.push_str(&format!("{} {} 1\n", retry(i, r), next));
        }
    }
    out.push_str(&format!("{ok} {ok} 1\n{err} {err} 1\n"));
    out
}

/// Five fixed valuations inside `(0, 1)^2` for exact cross-checks on
/// two-parameter chains.
pub fn sample_valuations() -> Vec<Vec<Rational>> {
    [
        ("1/2", "1/2"),
        ("1/3", "2/3"),
        ("1/7", "3/5"),
        ("9/10", "1/10"),
        ("2/5", "4/7"),
    ]
    .iter()
    .map(|(x, y)| vec![x.parse().unwrap(), y.parse().unwrap()])
    .collect()
}

/// Shared stock of circuit nodes the row patterns draw from.
struct Patterns {
    x: NodeId,
    y: NodeId,
    one_minus_x: NodeId,
    one_minus_y: NodeId,
    third: NodeId,
    two_thirds: NodeId,
    xy: NodeId,
    x_one_minus_y: NodeId,
    half_x: NodeId,
    one_minus_half_x: NodeId,
    one: NodeId,
}

impl Patterns {
    fn new(store: &mut DagStore) -> Patterns {
        store.register_param("x");
        store.register_param("y");
        let q = |s: &str| -> Rational { s.parse().unwrap() };
        let x = store.mk_param("x").unwrap();
        let y = store.mk_param("y").unwrap();
        let one = store.mk_const(q("1")).unwrap();
        let one_minus_x = store.mk_sub(one, x).unwrap();
        let one_minus_y = store.mk_sub(one, y).unwrap();
        let third = store.mk_const(q("1/3")).unwrap();
        let two_thirds = store.mk_const(q("2/3")).unwrap();
        let xy = store.mk_mul(x, y).unwrap();
        let x_one_minus_y = store.mk_mul(x, one_minus_y).unwrap();
        let half = store.mk_const(q("1/2")).unwrap();
        let half_x = store.mk_mul(half, x).unwrap();
        let one_minus_half_x = store.mk_sub(one, half_x).unwrap();
        Patterns {
            x,
            y,
            one_minus_x,
            one_minus_y,
            third,
            two_thirds,
            xy,
            x_one_minus_y,
            half_x,
            one_minus_half_x,
            one,
        }
    }

    /// A stochastic row over the given candidate successors: between one and
    /// three transitions whose probabilities sum to one and stay strictly
    /// positive for x, y in (0, 1).
    fn random_row(
        &self,
        rng: &mut ChaCha8Rng,
        candidates: &[u32],
        allow_absorbing: bool,
        self_state: Option<u32>,
    ) -> Vec<(u32, NodeId)> {
        debug_assert!(!candidates.is_empty());
        loop {
            let choice = rng.gen_range(0..6u32);
            match choice {
                0 if allow_absorbing => {
                    let s = self_state.expect("absorbing rows need a self state");
                    return vec![(s, self.one)];
                }
                0 => continue,
                1..=4 if candidates.len() >= 2 => {
                    let (d1, d2) = pick_two(rng, candidates);
                    let (p1, p2) = match choice {
                        1 => (self.x, self.one_minus_x),
                        2 => (self.y, self.one_minus_y),
                        3 => (self.third, self.two_thirds),
                        _ => (self.half_x, self.one_minus_half_x),
                    };
                    return vec![(d1, p1), (d2, p2)];
                }
                1..=4 => {
                    // Single candidate: a sure move.
                    return vec![(candidates[0], self.one)];
                }
                _ if candidates.len() >= 3 => {
                    let (d1, d2, d3) = pick_three(rng, candidates);
                    return vec![
                        (d1, self.xy),
                        (d2, self.x_one_minus_y),
                        (d3, self.one_minus_x),
                    ];
                }
                _ => continue,
            }
        }
    }
}

fn pick_two(rng: &mut ChaCha8Rng, candidates: &[u32]) -> (u32, u32) {
    let i = rng.gen_range(0..candidates.len());
    let mut j = rng.gen_range(0..candidates.len() - 1);
    if j >= i {
        j += 1;
    }
    (candidates[i], candidates[j])
}

fn pick_three(rng: &mut ChaCha8Rng, candidates: &[u32]) -> (u32, u32, u32) {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    for k in 0..3 {
        let pick = rng.gen_range(k..idx.len());
        idx.swap(k, pick);
    }
    (
        candidates[idx[0]],
        candidates[idx[1]],
        candidates[idx[2]],
    )
}

/// Seeded random chain over parameters `x`, `y` with `2..=max_states`
/// states. Rows are stochastic and strictly positive on `(0, 1)^2`; any
/// structure (self-loops, unreachable parts, several bottom components) may
/// occur.
pub fn random_pmc(seed: u64, max_states: usize) -> Pmc {
    assert!(max_states >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_states) as u32;
    let mut store = DagStore::new();
    let patterns = Patterns::new(&mut store);
    let mut pmc = Pmc::new(store, n as usize, 0);
    let all: Vec<u32> = (0..n).collect();
    for s in 0..n {
        for (dst, node) in patterns.random_row(&mut rng, &all, true, Some(s)) {
            pmc.add_transition(s, dst, node).unwrap();
        }
    }
    pmc
}

/// One or two random target states for a chain of `n` states.
pub fn random_targets(seed: u64, n: usize) -> BTreeSet<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a7a_7a7a);
    let mut targets = BTreeSet::new();
    targets.insert(rng.gen_range(0..n as u32));
    if rng.gen_bool(0.5) {
        targets.insert(rng.gen_range(0..n as u32));
    }
    targets
}

/// Random nonnegative reward node drawn from a fixed stock.
fn random_reward(rng: &mut ChaCha8Rng, store: &mut DagStore) -> NodeId {
    let q = |s: &str| -> Rational { s.parse().unwrap() };
    let x = store.mk_param("x").unwrap();
    let y = store.mk_param("y").unwrap();
    match rng.gen_range(0..7u32) {
        0 => store.mk_const(q("0")).unwrap(),
        1 => store.mk_const(q("1")).unwrap(),
        2 => store.mk_const(q("5/2")).unwrap(),
        3 => x,
        4 => y,
        5 => store.mk_add(x, y).unwrap(),
        _ => {
            let one = store.mk_const(q("1")).unwrap();
            store.mk_add(one, x).unwrap()
        }
    }
}

/// Random strictly positive reward node (for long-run average denominators).
fn random_positive_reward(rng: &mut ChaCha8Rng, store: &mut DagStore) -> NodeId {
    let q = |s: &str| -> Rational { s.parse().unwrap() };
    let x = store.mk_param("x").unwrap();
    match rng.gen_range(0..4u32) {
        0 => store.mk_const(q("1")).unwrap(),
        1 => store.mk_const(q("2")).unwrap(),
        2 => store.mk_const(q("1/2")).unwrap(),
        _ => {
            let one = store.mk_const(q("1")).unwrap();
            store.mk_add(one, x).unwrap()
        }
    }
}

/// Seeded random chain whose targets are reached almost surely from every
/// state: non-target states move strictly forward (modulo benign partial
/// self-loops), targets are absorbing. Returns the chain, its targets, and a
/// nonnegative reward map.
pub fn random_acc_pmc(seed: u64, max_states: usize) -> (Pmc, BTreeSet<u32>, RewardMap) {
    assert!(max_states >= 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_states) as u32;
    let target_count = if rng.gen_bool(0.3) { 2 } else { 1 };
    let first_target = n - target_count;
    let mut store = DagStore::new();
    let patterns = Patterns::new(&mut store);
    let mut pmc = Pmc::new(store, n as usize, 0);
    for s in 0..first_target {
        // Strictly forward candidates, occasionally plus a self-loop arm.
        let forward: Vec<u32> = (s + 1..n).collect();
        let with_self = rng.gen_bool(0.25);
        let candidates: Vec<u32> = if with_self {
            std::iter::once(s).chain(forward.iter().copied()).collect()
        } else {
            forward
        };
        let mut row = patterns.random_row(&mut rng, &candidates, false, None);
        // A row may not loop on itself only: guarantee a forward edge.
        if row.iter().all(|&(d, _)| d == s) {
            row = vec![(n - 1, patterns.one)];
        }
        for (dst, node) in row {
            pmc.add_transition(s, dst, node).unwrap();
        }
    }
    for t in first_target..n {
        pmc.add_transition(t, t, patterns.one).unwrap();
    }
    let targets: BTreeSet<u32> = (first_target..n).collect();
    let rewards = RewardMap::new(
        (0..n)
            .map(|_| random_reward(&mut rng, pmc.store_mut()))
            .collect(),
    );
    (pmc, targets, rewards)
}

/// Seeded random chain with exactly one to three bottom components (small
/// parametric cycles at the top of the index range, transients feeding
/// forward into them) plus an upper reward map and a strictly positive lower
/// reward map, for long-run average cross-checks.
pub fn random_lra_pmc(seed: u64, max_states: usize) -> (Pmc, RewardMap, RewardMap) {
    assert!(max_states >= 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=max_states as u32);
    let bscc_count = rng.gen_range(1..=3u32);
    // Component sizes of 1..=3 states, reserving room for the rest.
    let mut sizes = Vec::new();
    let mut bscc_total = 0u32;
    for i in 0..bscc_count {
        let reserved = bscc_count - i - 1;
        let cap = (n - bscc_total - reserved).min(3);
        let size = rng.gen_range(1..=cap);
        sizes.push(size);
        bscc_total += size;
    }
    let transient = n - bscc_total;

    let mut store = DagStore::new();
    let patterns = Patterns::new(&mut store);
    let mut pmc = Pmc::new(store, n as usize, 0);

    // Bottom components occupy the top indices, one after another.
    let mut base = transient;
    let mut entry_points = Vec::new();
    for &size in &sizes {
        entry_points.push(base);
        for j in 0..size {
            let here = base + j;
            let next = base + (j + 1) % size;
            if size == 1 {
                pmc.add_transition(here, here, patterns.one).unwrap();
            } else if size >= 3 && rng.gen_bool(0.5) {
                let skip = base + (j + 2) % size;
                pmc.add_transition(here, next, patterns.x).unwrap();
                pmc.add_transition(here, skip, patterns.one_minus_x)
                    .unwrap();
            } else if rng.gen_bool(0.5) {
                pmc.add_transition(here, next, patterns.y).unwrap();
                pmc.add_transition(here, here, patterns.one_minus_y)
                    .unwrap();
            } else {
                pmc.add_transition(here, next, patterns.one).unwrap();
            }
        }
        base += size;
    }

    // Transients move strictly forward, so they form no extra bottom
    // components and all mass ends up in the cycles.
    for s in 0..transient {
        let candidates: Vec<u32> = (s + 1..n).collect();
        let row = patterns.random_row(&mut rng, &candidates, false, None);
        for (dst, node) in row {
            pmc.add_transition(s, dst, node).unwrap();
        }
    }

    let upper = RewardMap::new(
        (0..n)
            .map(|_| random_reward(&mut rng, pmc.store_mut()))
            .collect(),
    );
    let lower = RewardMap::new(
        (0..n)
            .map(|_| random_positive_reward(&mut rng, pmc.store_mut()))
            .collect(),
    );
    (pmc, upper, lower)
}
