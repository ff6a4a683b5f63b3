//! Parametric Markov chains and their underlying graphs.
//!
//! A chain is a set of states with one distinguished initial state; each
//! transition probability is a circuit node in the chain's own
//! [`DagStore`]. Structural questions (reachability, bottom strongly
//! connected components) are answered on the underlying graph, which has an
//! edge wherever a transition node is present. Constructors drop transitions
//! whose node is the literal zero constant, so graph edges are exactly the
//! not-identically-zero entries the rewrite engine can see.

use std::collections::{BTreeMap, BTreeSet};

use crate::acir::{CircuitValue, DagStore, EvalError, Evaluator, FieldElement, NodeId};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PmcError {
    #[error("state {state} out of range (chain has {count} states)")]
    StateOutOfRange { state: u32, count: usize },
    #[error("duplicate transition {src} -> {dst}")]
    DuplicateTransition { src: u32, dst: u32 },
    #[error("label `{0}` already bound")]
    DuplicateLabel(String),
}

/// A parametric Markov chain plus the circuit store its transition
/// probabilities live in.
#[derive(Debug)]
pub struct Pmc {
    store: DagStore,
    initial: u32,
    /// Per state: sorted sparse row of (successor, probability node).
    rows: Vec<BTreeMap<u32, NodeId>>,
    /// Named state sets, e.g. target labels.
    labels: BTreeMap<String, BTreeSet<u32>>,
}

impl Pmc {
    pub fn new(store: DagStore, state_count: usize, initial: u32) -> Pmc {
        assert!(
            (initial as usize) < state_count,
            "initial state out of range"
        );
        Pmc {
            store,
            initial,
            rows: vec![BTreeMap::new(); state_count],
            labels: BTreeMap::new(),
        }
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    pub fn store(&self) -> &DagStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut DagStore {
        &mut self.store
    }

    /// Consumes the chain, returning its store.
    pub fn into_store(self) -> DagStore {
        self.store
    }

    fn check_state(&self, s: u32) -> Result<(), PmcError> {
        if (s as usize) < self.rows.len() {
            Ok(())
        } else {
            Err(PmcError::StateOutOfRange {
                state: s,
                count: self.rows.len(),
            })
        }
    }

    /// Records `P(src, dst) = node`. A literal zero node is dropped (the
    /// transition does not exist); anything else creates a graph edge.
    pub fn add_transition(&mut self, src: u32, dst: u32, node: NodeId) -> Result<(), PmcError> {
        self.check_state(src)?;
        self.check_state(dst)?;
        if self
            .store
            .const_value(node)
            .is_some_and(Rational::is_zero)
        {
            return Ok(());
        }
        if self.rows[src as usize].contains_key(&dst) {
            return Err(PmcError::DuplicateTransition { src, dst });
        }
        self.rows[src as usize].insert(dst, node);
        Ok(())
    }

    /// Adds `state` to the label set `name`; binding the same state to the
    /// same label twice is an error.
    pub fn add_label(&mut self, name: &str, state: u32) -> Result<(), PmcError> {
        self.check_state(state)?;
        let set = self.labels.entry(name.to_owned()).or_default();
        if !set.insert(state) {
            return Err(PmcError::DuplicateLabel(name.to_owned()));
        }
        Ok(())
    }

    pub fn labels(&self) -> &BTreeMap<String, BTreeSet<u32>> {
        &self.labels
    }

    pub fn label_states(&self, name: &str) -> Option<&BTreeSet<u32>> {
        self.labels.get(name)
    }

    /// Sparse transition row of `s`, sorted by successor.
    pub fn row(&self, s: u32) -> &BTreeMap<u32, NodeId> {
        &self.rows[s as usize]
    }

    /// Successors of `s` in the underlying graph, excluding `s` itself.
    pub fn post(&self, s: u32) -> BTreeSet<u32> {
        self.rows[s as usize]
            .keys()
            .copied()
            .filter(|&t| t != s)
            .collect()
    }

    /// Predecessors of `s` in the underlying graph, excluding `s` itself.
    pub fn pre(&self, s: u32) -> BTreeSet<u32> {
        let mut result = BTreeSet::new();
        for (u, row) in self.rows.iter().enumerate() {
            if u as u32 != s && row.contains_key(&s) {
                result.insert(u as u32);
            }
        }
        result
    }

    pub fn graph(&self) -> UnderlyingGraph {
        UnderlyingGraph::new(self)
    }

    /// States reachable from `from` (including itself), as a dense mask.
    pub fn reachable_from(&self, from: u32) -> Vec<bool> {
        let mut seen = vec![false; self.state_count()];
        let mut stack = vec![from];
        seen[from as usize] = true;
        while let Some(s) = stack.pop() {
            for &t in self.rows[s as usize].keys() {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Drops every state unreachable from the initial state, renumbering the
    /// survivors in ascending old order. Labels on dropped states disappear.
    pub fn trim_unreachable(&mut self) -> StateRemap {
        let keep = self.reachable_from(self.initial);
        let mut old_to_new = vec![None; self.state_count()];
        let mut new_to_old = Vec::new();
        for (old, &k) in keep.iter().enumerate() {
            if k {
                old_to_new[old] = Some(new_to_old.len() as u32);
                new_to_old.push(old as u32);
            }
        }
        let mut rows = vec![BTreeMap::new(); new_to_old.len()];
        for (new, &old) in new_to_old.iter().enumerate() {
            rows[new] = self.rows[old as usize]
                .iter()
                .map(|(&dst, &node)| (old_to_new[dst as usize].expect("successor kept"), node))
                .collect();
        }
        self.rows = rows;
        self.initial = old_to_new[self.initial as usize].expect("initial kept");
        self.labels = self
            .labels
            .iter()
            .filter_map(|(name, states)| {
                let kept: BTreeSet<u32> = states
                    .iter()
                    .filter_map(|&s| old_to_new[s as usize])
                    .collect();
                (!kept.is_empty()).then(|| (name.clone(), kept))
            })
            .collect();
        StateRemap {
            old_to_new,
            new_to_old,
        }
    }

    /// Bottom strongly connected components: SCCs with no edge leaving them.
    /// Each component is sorted ascending; components are ordered by their
    /// smallest state.
    pub fn bsccs(&self) -> Vec<Vec<u32>> {
        let graph = self.graph();
        let mut sccs = tarjan_sccs(&graph.fwd);
        sccs.retain(|component| {
            component.iter().all(|&s| {
                self.rows[s as usize]
                    .keys()
                    .all(|dst| component.binary_search(dst).is_ok())
            })
        });
        sccs.sort_by_key(|component| component[0]);
        sccs
    }

    /// Checks that every row sums to one, either exactly at the given
    /// valuations or probabilistically by comparing random prime-field
    /// fingerprints of the row sums against 1.
    pub fn check_stochastic(&self, mode: StochasticCheck<'_>) -> StochasticReport {
        match mode {
            StochasticCheck::ExactAt(valuations) => self.check_stochastic_exact(valuations),
            StochasticCheck::Fingerprint { k, seed } => self.check_stochastic_fp(k, seed),
        }
    }

    fn check_stochastic_exact(&self, valuations: &[Vec<Rational>]) -> StochasticReport {
        let mut failures = Vec::new();
        'states: for s in 0..self.state_count() as u32 {
            let nodes: Vec<NodeId> = self.rows[s as usize].values().copied().collect();
            let evaluator = Evaluator::new(&self.store, &nodes);
            for v in valuations {
                match evaluator.eval::<Rational>(&self.store, v) {
                    Ok(values) => {
                        let sum = values
                            .into_iter()
                            .fold(Rational::zero(), |acc, x| acc + x);
                        if !sum.is_one() {
                            failures.push(RowFailure {
                                state: s,
                                deficit: Some(Rational::one() - sum),
                            });
                            continue 'states;
                        }
                    }
                    Err(_) => {
                        failures.push(RowFailure {
                            state: s,
                            deficit: None,
                        });
                        continue 'states;
                    }
                }
            }
        }
        StochasticReport { failures }
    }

    fn check_stochastic_fp(&self, k: usize, seed: u64) -> StochasticReport {
        let all_nodes: Vec<NodeId> = {
            let mut set = BTreeSet::new();
            for row in &self.rows {
                set.extend(row.values().copied());
            }
            set.into_iter().collect()
        };
        let prints = match crate::acir::sz::sample_fingerprints(&self.store, &all_nodes, k, seed) {
            Ok(p) => p,
            Err(_) => {
                // Some row contains an everywhere-singular circuit; no row
                // can be certified, report them all.
                return StochasticReport {
                    failures: (0..self.state_count() as u32)
                        .map(|state| RowFailure {
                            state,
                            deficit: None,
                        })
                        .collect(),
                };
            }
        };
        let one = FieldElement::new(1);
        let mut failures = Vec::new();
        for s in 0..self.state_count() as u32 {
            let row_ok = prints.per_valuation.iter().all(|values| {
                let sum = self.rows[s as usize]
                    .values()
                    .fold(FieldElement::new(0), |acc, &node| {
                        acc.add(prints.evaluator.value_of(values, node))
                    });
                sum == one
            });
            if !row_ok {
                failures.push(RowFailure {
                    state: s,
                    deficit: None,
                });
            }
        }
        StochasticReport { failures }
    }
}

/// How [`Pmc::check_stochastic`] certifies row sums.
pub enum StochasticCheck<'a> {
    /// Exact rational evaluation at each listed valuation.
    ExactAt(&'a [Vec<Rational>]),
    /// Schwartz-Zippel style: `k` random field valuations drawn from `seed`.
    Fingerprint { k: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticReport {
    pub failures: Vec<RowFailure>,
}

impl StochasticReport {
    pub fn is_stochastic(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A row whose probabilities did not sum to one. `deficit` is `1 - sum` at
/// the first offending exact valuation; `None` when the row could not be
/// evaluated or the check was fingerprint-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFailure {
    pub state: u32,
    pub deficit: Option<Rational>,
}

/// Result of renumbering states, e.g. by [`Pmc::trim_unreachable`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateRemap {
    /// `None` for dropped states.
    pub old_to_new: Vec<Option<u32>>,
    pub new_to_old: Vec<u32>,
}

impl StateRemap {
    pub fn apply(&self, old: u32) -> Option<u32> {
        self.old_to_new[old as usize]
    }
}

/// State rewards, one circuit node per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardMap {
    nodes: Vec<NodeId>,
}

impl RewardMap {
    pub fn new(nodes: Vec<NodeId>) -> RewardMap {
        RewardMap { nodes }
    }

    /// The same reward node for every state.
    pub fn uniform(state_count: usize, node: NodeId) -> RewardMap {
        RewardMap {
            nodes: vec![node; state_count],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, s: u32) -> NodeId {
        self.nodes[s as usize]
    }

    pub fn set(&mut self, s: u32, node: NodeId) {
        self.nodes[s as usize] = node;
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Rewards of the surviving states after a renumbering.
    pub fn remap(&self, remap: &StateRemap) -> RewardMap {
        RewardMap {
            nodes: remap
                .new_to_old
                .iter()
                .map(|&old| self.nodes[old as usize])
                .collect(),
        }
    }

    /// Exact reward values at a valuation, for preflight sign checks.
    pub fn eval_exact(
        &self,
        store: &DagStore,
        valuation: &[Rational],
    ) -> Result<Vec<Rational>, EvalError> {
        let evaluator = Evaluator::new(store, &self.nodes);
        evaluator.eval(store, valuation)
    }
}

/// Forward and reverse adjacency of the not-identically-zero transitions.
#[derive(Debug, Clone)]
pub struct UnderlyingGraph {
    /// `fwd[s]` = successors of `s`, ascending (self-loops included).
    pub fwd: Vec<Vec<u32>>,
    /// `rev[s]` = predecessors of `s`, ascending (self-loops included).
    pub rev: Vec<Vec<u32>>,
}

impl UnderlyingGraph {
    fn new(pmc: &Pmc) -> UnderlyingGraph {
        let n = pmc.state_count();
        let mut fwd = vec![Vec::new(); n];
        let mut rev = vec![Vec::new(); n];
        for (s, row) in pmc.rows.iter().enumerate() {
            for &dst in row.keys() {
                fwd[s].push(dst);
                rev[dst as usize].push(s as u32);
            }
        }
        for preds in &mut rev {
            preds.sort_unstable();
        }
        UnderlyingGraph { fwd, rev }
    }

    pub fn state_count(&self) -> usize {
        self.fwd.len()
    }

    /// Multi-source backward BFS: distance (in reversed edges) from the
    /// nearest source, `u32::MAX` where unreachable.
    pub fn backward_bfs(&self, sources: &BTreeSet<u32>) -> Vec<u32> {
        bfs_layers(&self.rev, sources)
    }

    /// Multi-source forward BFS distances, `u32::MAX` where unreachable.
    pub fn forward_bfs(&self, sources: &BTreeSet<u32>) -> Vec<u32> {
        bfs_layers(&self.fwd, sources)
    }
}

fn bfs_layers(adj: &[Vec<u32>], sources: &BTreeSet<u32>) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    for &s in sources {
        dist[s as usize] = 0;
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        for &t in &adj[s as usize] {
            if dist[t as usize] == u32::MAX {
                dist[t as usize] = dist[s as usize] + 1;
                queue.push_back(t);
            }
        }
    }
    dist
}

/// Iterative Tarjan SCC decomposition. Components come out sorted ascending
/// internally; their relative order is reverse topological.
pub(crate) fn tarjan_sccs(adj: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let n = adj.len();
    const UNSET: u32 = u32::MAX;
    let mut index = vec![UNSET; n];
    let mut lowlink = vec![UNSET; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0u32;
    let mut components = Vec::new();
    // Explicit DFS frames: (state, position in its adjacency list).
    let mut frames: Vec<(u32, usize)> = Vec::new();

    for root in 0..n as u32 {
        if index[root as usize] != UNSET {
            continue;
        }
        frames.push((root, 0));
        index[root as usize] = next_index;
        lowlink[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;

        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            if let Some(&w) = adj[v as usize].get(*pos) {
                *pos += 1;
                if index[w as usize] == UNSET {
                    index[w as usize] = next_index;
                    lowlink[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    frames.push((w, 0));
                } else if on_stack[w as usize] {
                    lowlink[v as usize] = lowlink[v as usize].min(index[w as usize]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    lowlink[parent as usize] = lowlink[parent as usize].min(lowlink[v as usize]);
                }
                if lowlink[v as usize] == index[v as usize] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w as usize] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}
