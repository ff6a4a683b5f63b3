//! State-elimination solver for reachability, accumulated reward, and
//! fractional long-run average reward, parameterized by an elimination-order
//! heuristic.
//!
//! The solver repeatedly removes a state from the chain: first the state's
//! self-loop is folded into its remaining outgoing probabilities (and reward),
//! then every predecessor is wired directly to every successor with the
//! bypass probability added in. What remains at the end is a tiny chain over
//! the initial state and the retained states, from which the requested
//! quantity is read off as a single circuit node.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acir::{AcirError, DagStore, EvalError, Evaluator, NodeId};
use crate::pmc::{tarjan_sccs, Pmc, RewardMap};
use crate::Rational;

/// Elimination-order strategies. All are deterministic given their inputs;
/// `Random` carries its seed explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    /// Pick the state introducing the fewest transitions that do not already
    /// exist. Recomputed against the current graph before every pick.
    NumNew,
    /// Pick the state with the smallest predecessor-count times
    /// successor-count product, counting pairs whether or not the transition
    /// already exists. Recomputed before every pick.
    MinProd,
    /// Backward breadth-first order from the target states.
    TargetBfs,
    /// Uniformly random order.
    Random(u64),
    /// Breadth-first order from the initial state.
    Bfs,
    /// The breadth-first order from the initial state, reversed.
    ReverseBfs,
}

#[derive(Debug, Error)]
pub enum ElimError {
    /// The state's only transition is a self-loop; it can never be left and
    /// cannot be renormalized.
    #[error("state {0} is absorbing and cannot be eliminated")]
    AbsorbingState(u32),
    /// Accumulated rewards are only defined when the targets are reached
    /// almost surely; this trap component never reaches them.
    #[error("targets are not reached almost surely (trap component {component:?})")]
    NonAlmostSureReachability { component: Vec<u32> },
    /// A long-run average denominator reward evaluates to zero at the
    /// witness valuation.
    #[error("lower reward of component representative {representative} is zero at the witness")]
    DenominatorZero { representative: u32 },
    #[error(transparent)]
    Store(#[from] AcirError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Mutable working copy of the chain during elimination: forward rows, their
/// exact transpose, and any attached reward layers.
struct ElimWorkspace<'a> {
    store: &'a mut DagStore,
    rows: Vec<BTreeMap<u32, NodeId>>,
    preds: Vec<BTreeSet<u32>>,
    rewards: Vec<Vec<NodeId>>,
    alive: Vec<bool>,
}

impl<'a> ElimWorkspace<'a> {
    fn new(
        store: &'a mut DagStore,
        rows: Vec<BTreeMap<u32, NodeId>>,
        rewards: Vec<Vec<NodeId>>,
    ) -> Self {
        let n = rows.len();
        let mut preds: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
        for (s, row) in rows.iter().enumerate() {
            for &t in row.keys() {
                preds[t as usize].insert(s as u32);
            }
        }
        ElimWorkspace {
            store,
            rows,
            preds,
            rewards,
            alive: vec![true; n],
        }
    }

    /// True when `s` has no successor other than itself.
    fn post_empty(&self, s: u32) -> bool {
        self.rows[s as usize].keys().all(|&t| t == s)
    }

    /// Folds the self-loop of `se` into its other outgoing probabilities,
    /// multiplying each by 1/(1 - P(se,se)), and scales the state's reward
    /// by the same factor (the expected number of visits per entry). No-op
    /// without a self-loop.
    fn normalize_self_loop(&mut self, se: u32) -> Result<(), ElimError> {
        let row = &self.rows[se as usize];
        let q = match row.get(&se) {
            Some(&q) => q,
            None => return Ok(()),
        };
        if row.len() == 1 {
            return Err(ElimError::AbsorbingState(se));
        }
        let one = self.store.mk_const(Rational::one())?;
        let stay = self.store.mk_neg(q)?;
        let escape = self.store.mk_add(one, stay)?;
        let factor = self.store.mk_inv(escape)?;
        self.rows[se as usize].remove(&se);
        self.preds[se as usize].remove(&se);
        let entries: Vec<(u32, NodeId)> =
            self.rows[se as usize].iter().map(|(&t, &p)| (t, p)).collect();
        for (t, p) in entries {
            let scaled = self.store.mk_mul(p, factor)?;
            self.rows[se as usize].insert(t, scaled);
        }
        for layer in &mut self.rewards {
            layer[se as usize] = self.store.mk_mul(layer[se as usize], factor)?;
        }
        Ok(())
    }

    /// Removes `se` from the chain, adding the bypass probability
    /// P(s1,se)·P(se,s2) to every predecessor/successor pair and charging
    /// P(s1,se)·r(se) to each predecessor's reward. Requires the self-loop
    /// to be gone (see `normalize_self_loop`).
    fn eliminate_state(&mut self, se: u32) -> Result<(), ElimError> {
        debug_assert!(self.alive[se as usize]);
        debug_assert!(!self.rows[se as usize].contains_key(&se), "self-loop not normalized");
        let pre: Vec<u32> = self.preds[se as usize].iter().copied().collect();
        let post: Vec<(u32, NodeId)> =
            self.rows[se as usize].iter().map(|(&t, &p)| (t, p)).collect();
        for &s1 in &pre {
            let p_in = self.rows[s1 as usize][&se];
            for &(s2, p_out) in &post {
                let bypass = self.store.mk_mul(p_in, p_out)?;
                let merged = match self.rows[s1 as usize].get(&s2) {
                    Some(&old) => self.store.mk_add(old, bypass)?,
                    None => bypass,
                };
                if self.store.is_const_zero(merged) {
                    // A vanished entry is no edge at all; keep the graph
                    // invariant (edges are non-zero nodes) intact.
                    self.rows[s1 as usize].remove(&s2);
                    self.preds[s2 as usize].remove(&s1);
                } else {
                    self.rows[s1 as usize].insert(s2, merged);
                    self.preds[s2 as usize].insert(s1);
                }
            }
            for layer in 0..self.rewards.len() {
                let charge = self.store.mk_mul(p_in, self.rewards[layer][se as usize])?;
                let merged = self.store.mk_add(self.rewards[layer][s1 as usize], charge)?;
                self.rewards[layer][s1 as usize] = merged;
            }
            self.rows[s1 as usize].remove(&se);
        }
        for &(s2, _) in &post {
            self.preds[s2 as usize].remove(&se);
        }
        self.rows[se as usize].clear();
        self.preds[se as usize].clear();
        self.alive[se as usize] = false;
        #[cfg(debug_assertions)]
        self.audit();
        Ok(())
    }

    /// Checks that forward rows and the transpose agree, and that eliminated
    /// states have no incident transitions.
    #[cfg(debug_assertions)]
    fn audit(&self) {
        for s in 0..self.rows.len() {
            if !self.alive[s] {
                assert!(self.rows[s].is_empty() && self.preds[s].is_empty());
            }
            for &t in self.rows[s].keys() {
                assert!(self.alive[t as usize]);
                assert!(self.preds[t as usize].contains(&(s as u32)));
            }
            for &p in &self.preds[s] {
                assert!(self.alive[p as usize]);
                assert!(self.rows[p as usize].contains_key(&(s as u32)));
            }
        }
    }

    /// Sum of the entries of `row` selected by `keys`, or `None` when no
    /// entry is present.
    fn sum_entries(&mut self, s: u32, keys: &BTreeSet<u32>) -> Result<Option<NodeId>, ElimError> {
        let picked: Vec<NodeId> = self.rows[s as usize]
            .iter()
            .filter(|(t, _)| keys.contains(t))
            .map(|(_, &p)| p)
            .collect();
        let mut acc: Option<NodeId> = None;
        for p in picked {
            acc = Some(match acc {
                Some(a) => self.store.mk_add(a, p)?,
                None => p,
            });
        }
        Ok(acc)
    }

    /// 1/(1 - P(s,s)) as a node, removing the self-loop; `None` without one.
    fn escape_factor(&mut self, s: u32) -> Result<Option<NodeId>, ElimError> {
        let q = match self.rows[s as usize].get(&s) {
            Some(&q) => q,
            None => return Ok(None),
        };
        let one = self.store.mk_const(Rational::one())?;
        let stay = self.store.mk_neg(q)?;
        let escape = self.store.mk_add(one, stay)?;
        Ok(Some(self.store.mk_inv(escape)?))
    }
}

/// The elimination order the heuristic assigns to every eliminable state
/// (everything except the initial state and the targets). The driver skips
/// states whose successor set has become empty when their turn arrives.
pub fn order_states(pmc: &Pmc, targets: &BTreeSet<u32>, heuristic: Heuristic) -> Vec<u32> {
    let n = pmc.state_count() as u32;
    let candidates: Vec<u32> = (0..n)
        .filter(|s| *s != pmc.initial() && !targets.contains(s))
        .collect();
    match heuristic {
        Heuristic::TargetBfs => {
            let dist = pmc.graph().backward_bfs(targets);
            let mut order = candidates;
            order.sort_by_key(|&s| (dist[s as usize], s));
            order
        }
        Heuristic::Bfs => bfs_order(pmc, candidates),
        Heuristic::ReverseBfs => {
            let mut order = bfs_order(pmc, candidates);
            order.reverse();
            order
        }
        Heuristic::Random(seed) => {
            let mut order = candidates;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            order
        }
        Heuristic::NumNew => greedy_order(pmc, candidates, false),
        Heuristic::MinProd => greedy_order(pmc, candidates, true),
    }
}

fn bfs_order(pmc: &Pmc, mut candidates: Vec<u32>) -> Vec<u32> {
    let sources: BTreeSet<u32> = [pmc.initial()].into_iter().collect();
    let dist = pmc.graph().forward_bfs(&sources);
    candidates.sort_by_key(|&s| (dist[s as usize], s));
    candidates
}

/// Dynamic greedy orders: before every pick, the weight of each remaining
/// candidate is recomputed against the current working graph, mirroring the
/// driver's own updates (including its skip of successor-less states). Ties
/// break toward the smallest state index.
fn greedy_order(pmc: &Pmc, candidates: Vec<u32>, product: bool) -> Vec<u32> {
    let n = pmc.state_count();
    let mut adj: Vec<BTreeSet<u32>> = (0..n as u32)
        .map(|s| pmc.row(s).keys().copied().collect())
        .collect();
    let mut radj: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
    for (s, row) in adj.iter().enumerate() {
        for &t in row {
            radj[t as usize].insert(s as u32);
        }
    }
    let mut remaining: BTreeSet<u32> = candidates.into_iter().collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, u32)> = None;
        for &s in &remaining {
            let pre: Vec<u32> = radj[s as usize].iter().copied().filter(|&p| p != s).collect();
            let post: Vec<u32> = adj[s as usize].iter().copied().filter(|&t| t != s).collect();
            let weight = if product {
                pre.len() * post.len()
            } else {
                pre.iter()
                    .map(|&p| post.iter().filter(|&&t| !adj[p as usize].contains(&t)).count())
                    .sum()
            };
            if best.map_or(true, |(w, b)| (weight, s) < (w, b)) {
                best = Some((weight, s));
            }
        }
        let (_, se) = best.expect("remaining set is non-empty");
        remaining.remove(&se);
        order.push(se);
        let post: Vec<u32> = adj[se as usize].iter().copied().filter(|&t| t != se).collect();
        if post.is_empty() {
            // The driver will skip this state and leave the graph unchanged.
            continue;
        }
        let pre: Vec<u32> = radj[se as usize].iter().copied().filter(|&p| p != se).collect();
        for &p in &pre {
            for &t in &post {
                adj[p as usize].insert(t);
                radj[t as usize].insert(p);
            }
            adj[p as usize].remove(&se);
        }
        for &t in &post {
            radj[t as usize].remove(&se);
        }
        adj[se as usize].clear();
        radj[se as usize].clear();
    }
    order
}

/// Circuit for the probability of ever reaching `targets` from the initial
/// state. The chain must be trimmed (every state reachable from the initial
/// state). States that lose all successors along the way are retained and
/// contribute nothing.
pub fn reach_probability(
    pmc: &mut Pmc,
    targets: &BTreeSet<u32>,
    heuristic: Heuristic,
) -> Result<NodeId, ElimError> {
    let initial = pmc.initial();
    if targets.contains(&initial) {
        return Ok(pmc.store_mut().mk_const(Rational::one())?);
    }
    let order = order_states(pmc, targets, heuristic);
    let rows: Vec<BTreeMap<u32, NodeId>> =
        (0..pmc.state_count() as u32).map(|s| pmc.row(s).clone()).collect();
    let mut ws = ElimWorkspace::new(pmc.store_mut(), rows, Vec::new());
    for se in order {
        if ws.post_empty(se) {
            continue;
        }
        ws.normalize_self_loop(se)?;
        ws.eliminate_state(se)?;
    }
    let direct = ws.sum_entries(initial, targets)?;
    let total = match direct {
        Some(z) => match ws.escape_factor(initial)? {
            Some(factor) => ws.store.mk_mul(z, factor)?,
            None => z,
        },
        None => ws.store.mk_const(Rational::zero())?,
    };
    Ok(total)
}

/// Circuit for the expected reward accumulated strictly before the first
/// visit to `targets` (target-state rewards are never collected). Requires
/// absorption to be almost sure, which is verified at `witness`: in the
/// graph of transitions with nonzero value there, every bottom component
/// must contain a target.
pub fn accumulated_reward(
    pmc: &mut Pmc,
    rewards: &RewardMap,
    targets: &BTreeSet<u32>,
    heuristic: Heuristic,
    witness: &[Rational],
) -> Result<NodeId, ElimError> {
    assert_eq!(rewards.len(), pmc.state_count(), "reward map arity mismatch");
    let initial = pmc.initial();
    if targets.contains(&initial) {
        return Ok(pmc.store_mut().mk_const(Rational::zero())?);
    }
    check_almost_sure(pmc, targets, witness)?;
    let order = order_states(pmc, targets, heuristic);
    let rows: Vec<BTreeMap<u32, NodeId>> =
        (0..pmc.state_count() as u32).map(|s| pmc.row(s).clone()).collect();
    let layer = rewards.nodes().to_vec();
    let mut ws = ElimWorkspace::new(pmc.store_mut(), rows, vec![layer]);
    for se in order {
        if ws.post_empty(se) {
            continue;
        }
        ws.normalize_self_loop(se)?;
        ws.eliminate_state(se)?;
    }
    ws.normalize_self_loop(initial)?;
    Ok(ws.rewards[0][initial as usize])
}

/// Circuit for the long-run average ratio of the `upper` and `lower` reward
/// layers: the reach probability into each bottom component, times the
/// component's accumulated upper reward per accumulated lower reward.
/// `lower` must be nonzero per component, which is checked at `witness`.
pub fn lra(
    pmc: &mut Pmc,
    upper: &RewardMap,
    lower: &RewardMap,
    heuristic: Heuristic,
    witness: &[Rational],
) -> Result<NodeId, ElimError> {
    assert_eq!(upper.len(), pmc.state_count(), "upper reward arity mismatch");
    assert_eq!(lower.len(), pmc.state_count(), "lower reward arity mismatch");
    let initial = pmc.initial();
    let components = pmc.bsccs();
    let reps: Vec<u32> = components
        .iter()
        .map(|c| if c.contains(&initial) { initial } else { c[0] })
        .collect();
    let rep_set: BTreeSet<u32> = reps.iter().copied().collect();
    let order = order_states(pmc, &rep_set, heuristic);
    let in_bscc: BTreeSet<u32> = components.iter().flatten().copied().collect();

    let rows: Vec<BTreeMap<u32, NodeId>> =
        (0..pmc.state_count() as u32).map(|s| pmc.row(s).clone()).collect();
    let layers = vec![upper.nodes().to_vec(), lower.nodes().to_vec()];
    let initial_in_bscc = in_bscc.contains(&initial);
    let mut ws = ElimWorkspace::new(pmc.store_mut(), rows, layers);

    // Pass 1: inside every bottom component, collapse all states onto the
    // representative; its rewards then hold the per-visit-cycle totals.
    for &se in &order {
        if in_bscc.contains(&se) {
            ws.normalize_self_loop(se)?;
            ws.eliminate_state(se)?;
        }
    }
    let lower_at_reps: Vec<Rational> = {
        let roots: Vec<NodeId> = reps.iter().map(|&r| ws.rewards[1][r as usize]).collect();
        let evaluator = Evaluator::new(ws.store, &roots);
        evaluator.eval::<Rational>(ws.store, witness)?
    };
    for (&rep, value) in reps.iter().zip(&lower_at_reps) {
        if value.is_zero() {
            return Err(ElimError::DenominatorZero { representative: rep });
        }
    }
    if initial_in_bscc {
        // A trimmed chain that starts inside a bottom component has no other
        // component; the answer is the initial state's own ratio.
        let u = ws.rewards[0][initial as usize];
        let l = ws.rewards[1][initial as usize];
        let inv = ws.store.mk_inv(l)?;
        return Ok(ws.store.mk_mul(u, inv)?);
    }

    // Pass 2: collapse the transient part, leaving direct edges from the
    // initial state to each representative.
    for &se in &order {
        if !in_bscc.contains(&se) {
            if ws.post_empty(se) {
                continue;
            }
            ws.normalize_self_loop(se)?;
            ws.eliminate_state(se)?;
        }
    }
    ws.normalize_self_loop(initial)?;

    let mut total: Option<NodeId> = None;
    for &rep in &reps {
        let p = match ws.rows[initial as usize].get(&rep) {
            Some(&p) => p,
            None => continue,
        };
        let u = ws.rewards[0][rep as usize];
        let l = ws.rewards[1][rep as usize];
        let inv = ws.store.mk_inv(l)?;
        let ratio = ws.store.mk_mul(u, inv)?;
        let term = ws.store.mk_mul(p, ratio)?;
        total = Some(match total {
            Some(t) => ws.store.mk_add(t, term)?,
            None => term,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(ws.store.mk_const(Rational::zero())?),
    }
}

/// Errors unless, in the graph of transitions with nonzero value at
/// `witness`, every bottom component contains a target state. This is
/// exactly the condition for the targets to be reached with probability one
/// from everywhere.
fn check_almost_sure(
    pmc: &Pmc,
    targets: &BTreeSet<u32>,
    witness: &[Rational],
) -> Result<(), ElimError> {
    let n = pmc.state_count();
    let mut roots: Vec<NodeId> = Vec::new();
    let mut edges: Vec<(u32, u32, usize)> = Vec::new();
    for s in 0..n as u32 {
        for (&t, &node) in pmc.row(s) {
            let slot = match roots.iter().position(|&r| r == node) {
                Some(i) => i,
                None => {
                    roots.push(node);
                    roots.len() - 1
                }
            };
            edges.push((s, t, slot));
        }
    }
    let evaluator = Evaluator::new(pmc.store(), &roots);
    let values = evaluator.eval::<Rational>(pmc.store(), witness)?;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (s, t, slot) in edges {
        if !values[slot].is_zero() {
            adj[s as usize].push(t);
        }
    }
    for component in tarjan_sccs(&adj) {
        let members: BTreeSet<u32> = component.iter().copied().collect();
        let is_bottom = component
            .iter()
            .all(|&s| adj[s as usize].iter().all(|t| members.contains(t)));
        if is_bottom && component.iter().all(|s| !targets.contains(s)) {
            let mut sorted = component.clone();
            sorted.sort_unstable();
            return Err(ElimError::NonAlmostSureReachability { component: sorted });
        }
    }
    Ok(())
}
