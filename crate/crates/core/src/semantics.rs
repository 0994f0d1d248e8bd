//! On-the-fly expansion of a typed model into explicit MDP states,
//! transitions and branches, plus partition and target classification.

use std::fmt;

use thiserror::Error;

use crate::lang::{EvalError, TypedModel, TypedProperty};

/// Tolerance for the per-state sum-to-one check of a distribution.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// One valuation of the model variables, in declaration order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExplicitState(Box<[i32]>);

impl ExplicitState {
    pub fn new(values: impl Into<Box<[i32]>>) -> Self {
        ExplicitState(values.into())
    }

    pub fn values(&self) -> &[i32] {
        &self.0
    }

    /// Serialized width in bytes for a model with `vars` variables.
    pub fn width(vars: usize) -> usize {
        4 * vars
    }

    /// Appends the little-endian encoding to `out`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        for v in self.0.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn decode(bytes: &[u8]) -> Self {
        ExplicitState(
            bytes
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    }
}

impl fmt::Debug for ExplicitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Partition identifier, `1..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionId(pub u32);

impl PartitionId {
    pub const FIRST: PartitionId = PartitionId(1);

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based slot for per-partition tables.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for PartitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedBranch {
    pub probability: f64,
    pub reward: f64,
    pub target: ExplicitState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedTransition {
    pub branches: Vec<ExpandedBranch>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("in state {state}: {source}")]
    Eval {
        state: String,
        #[source]
        source: EvalError,
    },
    #[error("in state {state}: probabilities of command {command} sum to {sum}, not 1")]
    ProbabilitySum {
        state: String,
        command: usize,
        sum: f64,
    },
    #[error("in state {state}: command {command} has negative probability {probability}")]
    NegativeProbability {
        state: String,
        command: usize,
        probability: f64,
    },
    #[error("in state {state}: command {command} has non-finite reward {reward}")]
    BadReward {
        state: String,
        command: usize,
        reward: f64,
    },
    #[error("in state {state}: command {command} sets `{var}` to {value}, outside {lower}..{upper}")]
    OutOfDomain {
        state: String,
        command: usize,
        var: String,
        value: i64,
        lower: i32,
        upper: i32,
    },
    #[error("in state {state}: partition expression yields {value}, outside 1..{bound}")]
    PartitionOutOfRange { state: String, value: i64, bound: u32 },
    #[error("initial state {state} lies in partition {value}; it must lie in partition 1")]
    InitialPartition { state: String, value: u32 },
}

impl TypedModel {
    pub fn describe(&self, s: &ExplicitState) -> String {
        let parts: Vec<String> = self
            .variables
            .iter()
            .zip(s.values())
            .map(|(v, x)| format!("{}={x}", v.name))
            .collect();
        format!("[{}]", parts.join(", "))
    }

    fn eval_err(&self, s: &ExplicitState) -> impl Fn(EvalError) -> ModelError + '_ {
        let state = self.describe(s);
        move |source| ModelError::Eval {
            state: state.clone(),
            source,
        }
    }

    pub fn initial_state(&self) -> ExplicitState {
        ExplicitState::new(self.variables.iter().map(|v| v.init).collect::<Vec<_>>())
    }

    /// Expands `s`: one transition per enabled command in declaration order,
    /// branches in alternative order, zero-probability branches dropped.
    pub fn enabled_transitions(
        &self,
        s: &ExplicitState,
    ) -> Result<Vec<ExpandedTransition>, ModelError> {
        let val = s.values();
        let mut out = Vec::new();
        for (ci, cmd) in self.commands.iter().enumerate() {
            if !cmd.guard.eval_bool(val).map_err(self.eval_err(s))? {
                continue;
            }
            let command = ci + 1;
            let mut sum = 0.0;
            let mut branches = Vec::with_capacity(cmd.alternatives.len());
            for alt in &cmd.alternatives {
                let p = alt.probability.eval_real(val).map_err(self.eval_err(s))?;
                if p < 0.0 {
                    return Err(ModelError::NegativeProbability {
                        state: self.describe(s),
                        command,
                        probability: p,
                    });
                }
                sum += p;
                if p == 0.0 {
                    continue;
                }
                let reward = alt.reward.eval_real(val).map_err(self.eval_err(s))?;
                if !reward.is_finite() {
                    return Err(ModelError::BadReward {
                        state: self.describe(s),
                        command,
                        reward,
                    });
                }
                let mut target = val.to_vec();
                for (slot, e) in &alt.updates {
                    let v = e.eval_int(val).map_err(self.eval_err(s))?;
                    let decl = &self.variables[*slot];
                    if v < decl.lower as i64 || v > decl.upper as i64 {
                        return Err(ModelError::OutOfDomain {
                            state: self.describe(s),
                            command,
                            var: decl.name.clone(),
                            value: v,
                            lower: decl.lower,
                            upper: decl.upper,
                        });
                    }
                    target[*slot] = v as i32;
                }
                branches.push(ExpandedBranch {
                    probability: p,
                    reward,
                    target: ExplicitState::new(target),
                });
            }
            let within = (sum - 1.0).abs() <= PROBABILITY_TOLERANCE;
            // NaN sums are not within tolerance either
            if !within {
                return Err(ModelError::ProbabilitySum {
                    state: self.describe(s),
                    command,
                    sum,
                });
            }
            out.push(ExpandedTransition { branches });
        }
        Ok(out)
    }

    pub fn partition_of(&self, s: &ExplicitState) -> Result<PartitionId, ModelError> {
        let v = self
            .partition
            .expr
            .eval_int(s.values())
            .map_err(self.eval_err(s))?;
        if v < 1 || v > self.partition.bound as i64 {
            return Err(ModelError::PartitionOutOfRange {
                state: self.describe(s),
                value: v,
                bound: self.partition.bound,
            });
        }
        Ok(PartitionId(v as u32))
    }

    pub fn is_target(&self, s: &ExplicitState, prop: &TypedProperty) -> Result<bool, ModelError> {
        prop.target.eval_bool(s.values()).map_err(self.eval_err(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::lang::{parse_model, type_check, PartitionSpec};
    use std::collections::{HashSet, VecDeque};

    fn typed(src: &str) -> TypedModel {
        let ast = parse_model(src).unwrap();
        let props: Vec<_> = ast.properties.iter().map(|p| p.spec.clone()).collect();
        let part = ast.partition.clone().unwrap_or_else(PartitionSpec::single);
        type_check(&ast, &props, &part).unwrap()
    }

    #[test]
    fn coin_expansion() {
        let m = typed(corpus::COIN.source);
        let s0 = m.initial_state();
        assert_eq!(s0.values(), &[0]);
        let ts = m.enabled_transitions(&s0).unwrap();
        assert_eq!(ts.len(), 1);
        let b = &ts[0].branches;
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].probability, b[0].reward, b[0].target.values()), (0.5, 0.0, &[1][..]));
        assert_eq!((b[1].probability, b[1].reward, b[1].target.values()), (0.5, 0.0, &[2][..]));
        assert!(m.enabled_transitions(&ExplicitState::new(vec![1])).unwrap().is_empty());
    }

    #[test]
    fn coin_partition_and_target() {
        let m = typed(corpus::COIN.source);
        let p = &m.properties[0];
        assert_eq!(m.partition_of(&ExplicitState::new(vec![0])).unwrap(), PartitionId(1));
        assert_eq!(m.partition_of(&ExplicitState::new(vec![2])).unwrap(), PartitionId(3));
        assert!(m.is_target(&ExplicitState::new(vec![2]), p).unwrap());
        assert!(!m.is_target(&ExplicitState::new(vec![0]), p).unwrap());
    }

    #[test]
    fn two_variable_initial_state() {
        let m = typed("var x : 0..3 init 1; var y : 0..9 init 5;");
        assert_eq!(m.initial_state().values(), &[1, 5]);
    }

    #[test]
    fn partition_zero_is_an_error() {
        let m = typed("var c : 0..2 init 0; partition c bound 3;");
        assert!(matches!(
            m.partition_of(&m.initial_state()),
            Err(ModelError::PartitionOutOfRange { value: 0, .. })
        ));
    }

    #[test]
    fn distribution_sum_checked_at_expansion() {
        let m = typed("var c : 0..2 init 0; [] c=0 -> 0.3 : (c'=1) + 0.3 : (c'=2);");
        match m.enabled_transitions(&m.initial_state()) {
            Err(ModelError::ProbabilitySum { sum, .. }) => assert!((sum - 0.6).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn domain_violation_flagged() {
        let m = typed("var c : 0..2 init 0; [] true -> (c'=3);");
        assert!(matches!(
            m.enabled_transitions(&m.initial_state()),
            Err(ModelError::OutOfDomain { value: 3, .. })
        ));
    }

    #[test]
    fn negative_probability_flagged() {
        let m = typed("var c : 0..2 init 0; [] true -> 1.5 : (c'=1) + -0.5 : (c'=2);");
        assert!(matches!(
            m.enabled_transitions(&m.initial_state()),
            Err(ModelError::NegativeProbability { .. })
        ));
    }

    #[test]
    fn zero_probability_branches_dropped() {
        let m = typed("var c : 0..2 init 0; [] true -> 0 : (c'=1) + 1 : (c'=2);");
        let ts = m.enabled_transitions(&m.initial_state()).unwrap();
        assert_eq!(ts[0].branches.len(), 1);
        assert_eq!(ts[0].branches[0].target.values(), &[2]);
    }

    #[test]
    fn knuth_yao_die_reachable_set() {
        let m = typed(corpus::DIE.source);
        let ts = m.enabled_transitions(&m.initial_state()).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(
            ts[0].branches.iter().map(|b| b.probability).collect::<Vec<_>>(),
            vec![0.5, 0.5]
        );
        // brute-force BFS; also checks determinism and the support property
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([m.initial_state()]);
        seen.insert(m.initial_state());
        while let Some(s) = queue.pop_front() {
            let ts = m.enabled_transitions(&s).unwrap();
            assert_eq!(ts, m.enabled_transitions(&s).unwrap());
            for t in ts {
                for b in t.branches {
                    assert!(b.probability > 0.0);
                    if seen.insert(b.target.clone()) {
                        queue.push_back(b.target);
                    }
                }
            }
        }
        assert_eq!(seen.len(), 13);
    }

    #[test]
    fn state_codec() {
        let s = ExplicitState::new(vec![-1, 0, 7, i32::MAX]);
        let mut buf = Vec::new();
        s.encode_into(&mut buf);
        assert_eq!(buf.len(), ExplicitState::width(4));
        assert_eq!(&buf[..4], &[0xff, 0xff, 0xff, 0xff]);
        assert_eq!(ExplicitState::decode(&buf), s);
    }
}
