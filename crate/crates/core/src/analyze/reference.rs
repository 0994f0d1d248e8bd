//! Whole-model in-memory engine: explicit breadth-first construction, plain
//! value iteration, and the classic graph-based prob0/prob1 algorithms on
//! the full graph. Used as an oracle for the partitioned engine.

use std::collections::VecDeque;

use indexmap::IndexSet;

use super::{better, rel_error, ConvergenceConfig};
use crate::error::{Error, Result};
use crate::lang::{Direction, TypedModel, TypedProperty};
use crate::semantics::ExplicitState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub probability: f64,
    pub reward: f64,
    pub target: usize,
}

/// An MDP held entirely in memory; state 0 is initial.
#[derive(Debug, Clone, Default)]
pub struct ExplicitMdp {
    pub states: Vec<ExplicitState>,
    pub targets: Vec<bool>,
    /// Per state, its transitions; each transition is a list of branches.
    pub transitions: Vec<Vec<Vec<Branch>>>,
}

impl ExplicitMdp {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Breadth-first construction from the initial state, indexing states
    /// in discovery order.
    pub fn build(model: &TypedModel, target: &TypedProperty) -> Result<ExplicitMdp> {
        let mut seen: IndexSet<ExplicitState> = IndexSet::new();
        seen.insert(model.initial_state());
        let mut mdp = ExplicitMdp::default();
        let mut next = 0usize;
        while next < seen.len() {
            let s = seen.get_index(next).unwrap().clone();
            next += 1;
            let mut ts = Vec::new();
            for t in model.enabled_transitions(&s)? {
                let mut bs = Vec::with_capacity(t.branches.len());
                for b in t.branches {
                    let (idx, _) = seen.insert_full(b.target);
                    bs.push(Branch {
                        probability: b.probability,
                        reward: b.reward,
                        target: idx,
                    });
                }
                ts.push(bs);
            }
            mdp.targets.push(model.is_target(&s, target)?);
            mdp.transitions.push(ts);
        }
        mdp.states = seen.into_iter().collect();
        Ok(mdp)
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (s, ts) in self.transitions.iter().enumerate() {
            for t in ts {
                for b in t {
                    pred[b.target].push(s);
                }
            }
        }
        for p in &mut pred {
            p.dedup();
        }
        pred
    }
}

/// Called with the whole value vector after every sweep.
pub type SweepObserver<'a> = &'a mut dyn FnMut(&[f64]);

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOutcome {
    pub values: Vec<f64>,
    pub sweeps: u64,
}

impl ReferenceOutcome {
    pub fn initial(&self) -> f64 {
        self.values[0]
    }
}

/// Plain value iteration for min/max reachability probabilities. Calls
/// `observe` with the whole vector after every sweep.
pub fn reach_reference(
    mdp: &ExplicitMdp,
    direction: Direction,
    cfg: &ConvergenceConfig,
    mut observe: Option<SweepObserver<'_>>,
) -> Result<ReferenceOutcome> {
    let mut values: Vec<f64> = mdp.targets.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let mut sweeps = 0u64;
    loop {
        if cfg.max_outer.is_some_and(|cap| sweeps >= cap as u64) {
            return Err(Error::NotConverged {
                iterations: sweeps as usize,
            });
        }
        sweeps += 1;
        let mut error = 0.0f64;
        for s in 0..mdp.len() {
            if mdp.targets[s] || mdp.transitions[s].is_empty() {
                continue;
            }
            let mut best = 0.0;
            for (ti, t) in mdp.transitions[s].iter().enumerate() {
                let mut sum = 0.0;
                for b in t {
                    sum += b.probability * values[b.target];
                }
                best = if ti == 0 { sum } else { better(direction, best, sum) };
            }
            error = error.max(rel_error(values[s], best));
            values[s] = best;
        }
        if let Some(f) = observe.as_mut() {
            f(&values);
        }
        if error < cfg.epsilon {
            return Ok(ReferenceOutcome { values, sweeps });
        }
    }
}

/// Expected accumulated reward until the target is first reached; infinite
/// outside the prob1 set of the dual direction.
pub fn reward_reference(
    mdp: &ExplicitMdp,
    direction: Direction,
    cfg: &ConvergenceConfig,
    mut observe: Option<SweepObserver<'_>>,
) -> Result<ReferenceOutcome> {
    let required = prob1(mdp, direction.dual());
    let mut values: Vec<f64> = (0..mdp.len())
        .map(|s| {
            if mdp.targets[s] || required[s] {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if !required[0] {
        return Ok(ReferenceOutcome { values, sweeps: 0 });
    }
    let mut sweeps = 0u64;
    loop {
        if cfg.max_outer.is_some_and(|cap| sweeps >= cap as u64) {
            return Err(Error::NotConverged {
                iterations: sweeps as usize,
            });
        }
        sweeps += 1;
        let mut error = 0.0f64;
        for s in 0..mdp.len() {
            if mdp.targets[s] || !required[s] || mdp.transitions[s].is_empty() {
                continue;
            }
            let mut best = 0.0;
            for (ti, t) in mdp.transitions[s].iter().enumerate() {
                let mut sum = 0.0;
                for b in t {
                    sum += b.probability * (b.reward + values[b.target]);
                }
                best = if ti == 0 { sum } else { better(direction, best, sum) };
            }
            error = error.max(rel_error(values[s], best));
            values[s] = best;
        }
        if let Some(f) = observe.as_mut() {
            f(&values);
        }
        if error < cfg.epsilon {
            return Ok(ReferenceOutcome { values, sweeps });
        }
    }
}

/// Backward closure of `seed` along edges accepted by `admit(pred, set)`,
/// processed with a worklist.
fn backward_closure(
    mdp: &ExplicitMdp,
    pred: &[Vec<usize>],
    mut set: Vec<bool>,
    admit: impl Fn(usize, &[bool]) -> bool,
) -> Vec<bool> {
    let mut work: VecDeque<usize> = (0..mdp.len()).filter(|&s| set[s]).collect();
    while let Some(s) = work.pop_front() {
        for &p in &pred[s] {
            if !set[p] && admit(p, &set) {
                set[p] = true;
                work.push_back(p);
            }
        }
    }
    set
}

/// States with optimal reachability probability exactly 0.
pub fn prob0(mdp: &ExplicitMdp, direction: Direction) -> Vec<bool> {
    let pred = mdp.predecessors();
    let positive = match direction {
        // some path to the target exists
        Direction::Max => backward_closure(mdp, &pred, mdp.targets.clone(), |_, _| true),
        // every transition has a branch into the positive set
        Direction::Min => backward_closure(mdp, &pred, mdp.targets.clone(), |p, set| {
            let ts = &mdp.transitions[p];
            !ts.is_empty() && ts.iter().all(|t| t.iter().any(|b| set[b.target]))
        }),
    };
    positive.into_iter().map(|b| !b).collect()
}

/// States with optimal reachability probability exactly 1.
pub fn prob1(mdp: &ExplicitMdp, direction: Direction) -> Vec<bool> {
    let pred = mdp.predecessors();
    match direction {
        Direction::Max => {
            let mut u = vec![true; mdp.len()];
            loop {
                let r = backward_closure(mdp, &pred, mdp.targets.clone(), |p, set| {
                    mdp.transitions[p].iter().any(|t| {
                        t.iter().all(|b| u[b.target]) && t.iter().any(|b| set[b.target])
                    })
                });
                if r == u {
                    return u;
                }
                u = r;
            }
        }
        Direction::Min => {
            let zero = prob0(mdp, Direction::Min);
            let targets = &mdp.targets;
            let bad = backward_closure(mdp, &pred, zero, |p, _| !targets[p]);
            bad.into_iter().map(|b| !b).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn branch(probability: f64, target: usize) -> Branch {
        Branch {
            probability,
            reward: 0.0,
            target,
        }
    }

    fn cfg() -> ConvergenceConfig {
        ConvergenceConfig {
            epsilon: 1e-10,
            max_outer: Some(100_000),
        }
    }

    /// s0 has two choices, reaching the target with 0.3 or 0.8.
    fn two_choices() -> ExplicitMdp {
        ExplicitMdp {
            states: Vec::new(),
            targets: vec![false, true, false],
            transitions: vec![
                vec![
                    vec![branch(0.3, 1), branch(0.7, 2)],
                    vec![branch(0.8, 1), branch(0.2, 2)],
                ],
                vec![],
                vec![],
            ],
        }
    }

    #[test]
    fn max_and_min_choice() {
        let m = two_choices();
        let max = reach_reference(&m, Direction::Max, &cfg(), None).unwrap();
        let min = reach_reference(&m, Direction::Min, &cfg(), None).unwrap();
        assert!((max.initial() - 0.8).abs() < 1e-12);
        assert!((min.initial() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn certain_step_converges_after_one_update() {
        let m = ExplicitMdp {
            states: Vec::new(),
            targets: vec![false, true],
            transitions: vec![vec![vec![branch(1.0, 1)]], vec![]],
        };
        let mut first = None;
        let mut obs = |v: &[f64]| {
            first.get_or_insert(v[0]);
        };
        let r = reach_reference(&m, Direction::Max, &cfg(), Some(&mut obs)).unwrap();
        assert_eq!(first, Some(1.0));
        assert_eq!(r.initial(), 1.0);
    }

    #[test]
    fn sets_on_two_choices() {
        let m = two_choices();
        assert_eq!(prob0(&m, Direction::Max), vec![false, false, true]);
        assert_eq!(prob1(&m, Direction::Max), vec![false, true, false]);
        assert_eq!(prob1(&m, Direction::Min), vec![false, true, false]);
    }

    #[test]
    fn prob1_max_needs_nested_fixpoint() {
        // s0 -> {s1 0.5, s2 0.5}; s1 target; s2 -> s0 or dead end s3.
        // The loop through s2 reaches the target surely under max.
        let m = ExplicitMdp {
            states: Vec::new(),
            targets: vec![false, true, false, false],
            transitions: vec![
                vec![vec![branch(0.5, 1), branch(0.5, 2)]],
                vec![],
                vec![vec![branch(1.0, 0)], vec![branch(1.0, 3)]],
                vec![],
            ],
        };
        assert_eq!(prob1(&m, Direction::Max), vec![true, true, true, false]);
        assert_eq!(prob1(&m, Direction::Min), vec![false, true, false, false]);
        assert_eq!(prob0(&m, Direction::Min), vec![false, false, true, true]);
    }
}
