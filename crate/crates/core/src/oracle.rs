//! Desk-scale exact reference solvers over rationals.
//!
//! These solve the same quantities as [`crate::elim`] but numerically, at a
//! fixed valuation, by dense Gaussian elimination. They exist to keep the
//! symbolic engine honest in tests and are only meant for small models.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::acir::{EvalError, Evaluator, NodeId};
use crate::pmc::{Pmc, RewardMap};
use crate::Rational;

#[derive(Debug, Error)]
pub enum OracleError {
    /// The linear system has no unique solution; for reachability and reward
    /// systems this indicates a modeling error (states that never reach the
    /// targets).
    #[error("linear system is singular")]
    SingularSystem,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Dense square matrix of exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    n: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zero(n: usize) -> Self {
        RationalMatrix { n, entries: vec![Rational::zero(); n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> &Rational {
        &self.entries[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Rational) {
        self.entries[row * self.n + col] = value;
    }

    /// Solves `self * x = b` in place by Gaussian elimination with pivoting
    /// on the first nonzero entry of each column.
    pub fn solve(mut self, mut b: Vec<Rational>) -> Result<Vec<Rational>, OracleError> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        for col in 0..n {
            let pivot_row = (col..n)
                .find(|&r| !self.get(r, col).is_zero())
                .ok_or(OracleError::SingularSystem)?;
            if pivot_row != col {
                for c in 0..n {
                    self.entries.swap(pivot_row * n + c, col * n + c);
                }
                b.swap(pivot_row, col);
            }
            let pivot = self.get(col, col).clone();
            for r in col + 1..n {
                if self.get(r, col).is_zero() {
                    continue;
                }
                let factor = self.get(r, col) / &pivot;
                for c in col..n {
                    let delta = &factor * self.get(col, c);
                    self.set(r, c, self.get(r, c) - &delta);
                }
                let delta = &factor * &b[col];
                b[r] = &b[r] - &delta;
            }
        }
        for col in (0..n).rev() {
            let mut acc = b[col].clone();
            for c in col + 1..n {
                acc = &acc - &(self.get(col, c) * &b[c]);
            }
            b[col] = &acc / self.get(col, col);
        }
        Ok(b)
    }
}

/// Evaluates every transition expression of `pmc` at `valuation`, returning
/// the instantiated transition matrix as dense rows.
pub fn instantiate(pmc: &Pmc, valuation: &[Rational]) -> Result<Vec<Vec<Rational>>, OracleError> {
    let n = pmc.state_count() as usize;
    let mut roots: Vec<NodeId> = Vec::new();
    let mut slots: Vec<Vec<(usize, usize)>> = Vec::new();
    for s in 0..n {
        for (&t, &node) in pmc.row(s as u32) {
            match roots.iter().position(|&r| r == node) {
                Some(i) => slots[i].push((s, t as usize)),
                None => {
                    roots.push(node);
                    slots.push(vec![(s, t as usize)]);
                }
            }
        }
    }
    let evaluator = Evaluator::new(pmc.store(), &roots);
    let values = evaluator.eval::<Rational>(pmc.store(), valuation)?;
    let mut matrix = vec![vec![Rational::zero(); n]; n];
    for (value, targets) in values.into_iter().zip(&slots) {
        for &(s, t) in targets {
            matrix[s][t] = value.clone();
        }
    }
    Ok(matrix)
}

fn eval_rewards(pmc: &Pmc, rewards: &RewardMap, valuation: &[Rational]) -> Result<Vec<Rational>, OracleError> {
    let roots: Vec<NodeId> = rewards.nodes().to_vec();
    let evaluator = Evaluator::new(pmc.store(), &roots);
    Ok(evaluator.eval::<Rational>(pmc.store(), valuation)?)
}

/// Probability of reaching `targets` from the initial state, at `valuation`.
///
/// States that cannot reach the targets in the underlying graph are fixed at
/// zero; the remaining unknowns solve `z = P z + b` with `b` the one-step
/// probability into the targets.
pub fn solve_reach(
    pmc: &Pmc,
    targets: &BTreeSet<u32>,
    valuation: &[Rational],
) -> Result<Rational, OracleError> {
    if targets.contains(&pmc.initial()) {
        return Ok(Rational::one());
    }
    let graph = pmc.graph();
    let can_reach = graph.backward_bfs(targets);
    let unknowns: Vec<usize> = (0..pmc.state_count() as usize)
        .filter(|&s| can_reach[s] != u32::MAX && !targets.contains(&(s as u32)))
        .collect();
    if can_reach[pmc.initial() as usize] == u32::MAX {
        return Ok(Rational::zero());
    }
    let p = instantiate(pmc, valuation)?;
    let index_of = |s: usize| unknowns.iter().position(|&u| u == s);
    let n = unknowns.len();
    let mut matrix = RationalMatrix::zero(n);
    let mut rhs = vec![Rational::zero(); n];
    for (i, &s) in unknowns.iter().enumerate() {
        matrix.set(i, i, Rational::one());
        for t in 0..pmc.state_count() as usize {
            if p[s][t].is_zero() {
                continue;
            }
            if targets.contains(&(t as u32)) {
                rhs[i] = &rhs[i] + &p[s][t];
            } else if let Some(j) = index_of(t) {
                matrix.set(i, j, matrix.get(i, j) - &p[s][t]);
            }
        }
    }
    let solution = matrix.solve(rhs)?;
    let i = index_of(pmc.initial() as usize).expect("initial state can reach the targets");
    Ok(solution[i].clone())
}

/// Expected reward accumulated strictly before absorption into `targets`,
/// from the initial state, at `valuation`.
///
/// Solves `(I - P_T) z = r_T` over the non-target states; the system is
/// singular exactly when absorption is not almost sure.
pub fn solve_acc(
    pmc: &Pmc,
    rewards: &RewardMap,
    targets: &BTreeSet<u32>,
    valuation: &[Rational],
) -> Result<Rational, OracleError> {
    if targets.contains(&pmc.initial()) {
        return Ok(Rational::zero());
    }
    let p = instantiate(pmc, valuation)?;
    let r = eval_rewards(pmc, rewards, valuation)?;
    let unknowns: Vec<usize> = (0..pmc.state_count() as usize)
        .filter(|&s| !targets.contains(&(s as u32)))
        .collect();
    let index_of = |s: usize| unknowns.iter().position(|&u| u == s);
    let n = unknowns.len();
    let mut matrix = RationalMatrix::zero(n);
    let mut rhs = vec![Rational::zero(); n];
    for (i, &s) in unknowns.iter().enumerate() {
        matrix.set(i, i, Rational::one());
        rhs[i] = r[s].clone();
        for t in 0..pmc.state_count() as usize {
            if p[s][t].is_zero() || targets.contains(&(t as u32)) {
                continue;
            }
            let j = index_of(t).expect("non-target successor is an unknown");
            matrix.set(i, j, matrix.get(i, j) - &p[s][t]);
        }
    }
    let solution = matrix.solve(rhs)?;
    let i = index_of(pmc.initial() as usize).expect("initial state is not a target");
    Ok(solution[i].clone())
}

/// Exact stationary distribution of a single BSCC, at `valuation`.
///
/// `component` lists the member states; the result is aligned with it.
/// Solves `pi P = pi` with the last balance equation replaced by the
/// normalization `sum pi = 1`.
pub fn stationary(
    pmc: &Pmc,
    component: &[u32],
    valuation: &[Rational],
) -> Result<Vec<Rational>, OracleError> {
    let p = instantiate(pmc, valuation)?;
    let n = component.len();
    let mut matrix = RationalMatrix::zero(n);
    let mut rhs = vec![Rational::zero(); n];
    // Rows 0..n-1: balance equations pi_j = sum_i pi_i P(i,j).
    for (j, &sj) in component.iter().enumerate().take(n - 1) {
        matrix.set(j, j, Rational::one());
        for (i, &si) in component.iter().enumerate() {
            let entry = &p[si as usize][sj as usize];
            if !entry.is_zero() {
                matrix.set(j, i, matrix.get(j, i) - entry);
            }
        }
    }
    // Last row: normalization.
    for i in 0..n {
        matrix.set(n - 1, i, Rational::one());
    }
    rhs[n - 1] = Rational::one();
    matrix.solve(rhs)
}

/// Long-run average reference value: the reach probability into each BSCC
/// weighted by that BSCC's stationary ratio of the two reward layers.
pub fn lra_reference(
    pmc: &Pmc,
    upper: &RewardMap,
    lower: &RewardMap,
    valuation: &[Rational],
) -> Result<Rational, OracleError> {
    let u = eval_rewards(pmc, upper, valuation)?;
    let l = eval_rewards(pmc, lower, valuation)?;
    let mut total = Rational::zero();
    for component in pmc.bsccs() {
        let members: Vec<u32> = component.iter().copied().collect();
        let pi = stationary(pmc, &members, valuation)?;
        let targets: BTreeSet<u32> = members.iter().copied().collect();
        let p_c = solve_reach(pmc, &targets, valuation)?;
        let mut num = Rational::zero();
        let mut den = Rational::zero();
        for (w, &s) in pi.iter().zip(&members) {
            num = &num + &(w * &u[s as usize]);
            den = &den + &(w * &l[s as usize]);
        }
        total = &total + &(&p_c * &(&num / &den));
    }
    Ok(total)
}
