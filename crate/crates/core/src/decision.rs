//! Single-stage maintenance influence diagram.
//!
//! The diagram has one uncertain current health state `H_t` (belief supplied
//! by the classifier), one decision `d_t`, a transition to `H_{t+1}` that
//! depends on both, and additive utilities on the action and on the next
//! state. Everything here is a pure function of its inputs.
//!
//! ```text
//! EU(d | p)      = sum_h p(h) * [ sum_h' P(h' | h, d) U(h') ] + U(d)
//! MEU            = max_d EU(d | p)
//! MEU(observed)  = sum_h p(h) * max_d [ sum_h' P(h' | h, d) U(h') + U(d) ]
//! EVPI           = MEU(observed) - MEU
//! ```

use crate::prob::{
    argmax_with_tiebreak, dot, Action, DiscreteDistribution, ProbError, TransitionCpt,
    UtilityTable,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// EVPI values in `[-EVPI_CLAMP, 0)` are reported as exactly zero.
pub const EVPI_CLAMP: f64 = 1e-9;

/// Convergence threshold (max-abs change) for [`stationary_distribution`].
pub const STATIONARY_TOLERANCE: f64 = 1e-12;
pub const STATIONARY_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("action {action} outside 0..{actions}")]
    ActionOutOfRange { action: usize, actions: usize },
    #[error("at least two actions are required, got {0}")]
    TooFewActions(usize),
    #[error("inspection cost must be non-negative, got {0}")]
    NegativeInspectionCost(f64),
    #[error("transition chain is reducible: state {from} cannot reach state {to}")]
    Reducible { from: usize, to: usize },
    #[error("power iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Tables of the maintenance decision problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecisionProcessRaw", into = "DecisionProcessRaw")]
pub struct DecisionProcess {
    transitions: Vec<TransitionCpt>,
    u_action: UtilityTable,
    u_state: UtilityTable,
    c_ins: f64,
    /// `future[a][h] = sum_h' P(h' | h, a) U(h')`, cached at construction.
    future: Vec<Vec<f64>>,
}

impl DecisionProcess {
    pub fn new(
        transitions: Vec<TransitionCpt>,
        u_action: UtilityTable,
        u_state: UtilityTable,
        c_ins: f64,
    ) -> Result<Self, DecisionError> {
        let actions = transitions.len();
        if actions < 2 {
            return Err(DecisionError::TooFewActions(actions));
        }
        if u_action.len() != actions {
            return Err(DecisionError::DimensionMismatch {
                what: "u_action",
                expected: actions,
                got: u_action.len(),
            });
        }
        let k = u_state.len();
        for cpt in &transitions {
            if cpt.k() != k {
                return Err(DecisionError::DimensionMismatch {
                    what: "transition table",
                    expected: k,
                    got: cpt.k(),
                });
            }
        }
        if c_ins.is_nan() || c_ins < 0.0 {
            return Err(DecisionError::NegativeInspectionCost(c_ins));
        }
        let future = transitions
            .iter()
            .map(|cpt| {
                cpt.rows()
                    .iter()
                    .map(|row| dot(row, u_state.values()).expect("row length checked"))
                    .collect()
            })
            .collect();
        Ok(DecisionProcess {
            transitions,
            u_action,
            u_state,
            c_ins,
            future,
        })
    }

    /// Four-state process with do-nothing / maintain actions used for the
    /// two-feature numerical study (inspection cost 7).
    pub fn synthetic_example() -> Self {
        let do_nothing = TransitionCpt::from_row_major(
            4,
            &[
                0.8, 0.18, 0.015, 0.005, //
                0.0, 0.8, 0.15, 0.05, //
                0.0, 0.0, 0.8, 0.2, //
                0.0, 0.0, 0.0, 1.0,
            ],
        )
        .expect("valid table");
        let maintain = TransitionCpt::from_row_major(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.99, 0.01, 0.0, 0.0, //
                0.99, 0.0, 0.01, 0.0, //
                0.99, 0.0, 0.0, 0.01,
            ],
        )
        .expect("valid table");
        DecisionProcess::new(
            vec![do_nothing, maintain],
            UtilityTable::new(vec![0.0, -30.0]).unwrap(),
            UtilityTable::new(vec![10.0, 10.0, 5.0, -75.0]).unwrap(),
            7.0,
        )
        .expect("valid process")
    }

    /// Bridge process with two undamaged states (normal, cold) and two
    /// damage states (inspection cost 30). Repair destinations for damaged
    /// states follow the stationary split of the undamaged sub-chain.
    pub fn z24_example() -> Self {
        // row 2 reuses the damage entries of row 1 so that it sums to one
        let do_nothing = TransitionCpt::from_row_major(
            4,
            &[
                0.7, 0.28, 0.015, 0.005, //
                0.43, 0.55, 0.015, 0.005, //
                0.0, 0.0, 0.8, 0.2, //
                0.0, 0.0, 0.0, 1.0,
            ],
        )
        .expect("valid table");
        let maintain = TransitionCpt::from_row_major(
            4,
            &[
                0.7143, 0.2857, 0.0, 0.0, //
                0.4388, 0.5612, 0.0, 0.0, //
                0.5996, 0.3904, 0.01, 0.0, //
                0.5996, 0.3904, 0.0, 0.01,
            ],
        )
        .expect("valid table");
        DecisionProcess::new(
            vec![do_nothing, maintain],
            UtilityTable::new(vec![0.0, -100.0]).unwrap(),
            UtilityTable::new(vec![10.0, 10.0, -50.0, -1000.0]).unwrap(),
            30.0,
        )
        .expect("valid process")
    }

    pub fn with_inspection_cost(mut self, c_ins: f64) -> Result<Self, DecisionError> {
        if c_ins.is_nan() || c_ins < 0.0 {
            return Err(DecisionError::NegativeInspectionCost(c_ins));
        }
        self.c_ins = c_ins;
        Ok(self)
    }

    pub fn states(&self) -> usize {
        self.u_state.len()
    }

    pub fn actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn transitions(&self) -> &[TransitionCpt] {
        &self.transitions
    }

    pub fn u_action(&self) -> &UtilityTable {
        &self.u_action
    }

    pub fn u_state(&self) -> &UtilityTable {
        &self.u_state
    }

    pub fn inspection_cost(&self) -> f64 {
        self.c_ins
    }

    /// Utility of taking `action` when the current state is known to be `state`.
    pub fn state_action_utility(&self, state: usize, action: Action) -> f64 {
        self.future[action.index()][state] + self.u_action.get(action.index())
    }

    /// Optimal action when the current state is known.
    pub fn perfect_information_action(&self, state: usize) -> PolicyResult {
        let eus: Vec<f64> = (0..self.actions())
            .map(|a| self.state_action_utility(state, Action(a)))
            .collect();
        let a = argmax_with_tiebreak(&eus).expect("at least two actions");
        PolicyResult {
            action: Action(a),
            expected_utility: eus[a],
        }
    }

    /// Upper bound on any EVPI for this process.
    pub fn utility_range(&self) -> f64 {
        self.u_state.max() - self.u_state.min() + self.u_action.max() - self.u_action.min()
    }

    fn check_posterior(&self, posterior: &DiscreteDistribution) -> Result<(), DecisionError> {
        if posterior.len() != self.states() {
            return Err(DecisionError::DimensionMismatch {
                what: "posterior",
                expected: self.states(),
                got: posterior.len(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionProcessRaw {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "A")]
    a: usize,
    /// One row-major `K*K` array per action.
    transitions: Vec<Vec<f64>>,
    u_action: Vec<f64>,
    u_state: Vec<f64>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    c_ins: f64,
}

impl TryFrom<DecisionProcessRaw> for DecisionProcess {
    type Error = DecisionError;

    fn try_from(raw: DecisionProcessRaw) -> Result<Self, Self::Error> {
        if raw.transitions.len() != raw.a {
            return Err(DecisionError::DimensionMismatch {
                what: "transitions",
                expected: raw.a,
                got: raw.transitions.len(),
            });
        }
        if raw.u_state.len() != raw.k {
            return Err(DecisionError::DimensionMismatch {
                what: "u_state",
                expected: raw.k,
                got: raw.u_state.len(),
            });
        }
        let transitions = raw
            .transitions
            .iter()
            .map(|t| TransitionCpt::from_row_major(raw.k, t))
            .collect::<Result<Vec<_>, _>>()?;
        DecisionProcess::new(
            transitions,
            UtilityTable::new(raw.u_action)?,
            UtilityTable::new(raw.u_state)?,
            raw.c_ins,
        )
    }
}

impl From<DecisionProcess> for DecisionProcessRaw {
    fn from(dp: DecisionProcess) -> Self {
        DecisionProcessRaw {
            k: dp.states(),
            a: dp.actions(),
            transitions: dp
                .transitions
                .iter()
                .map(|t| t.rows().iter().flatten().copied().collect())
                .collect(),
            u_action: dp.u_action.values().to_vec(),
            u_state: dp.u_state.values().to_vec(),
            c_ins: dp.c_ins,
        }
    }
}

/// An action together with the expected utility that selected it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub action: Action,
    pub expected_utility: f64,
}

pub fn expected_utility(
    dp: &DecisionProcess,
    posterior: &DiscreteDistribution,
    action: Action,
) -> Result<f64, DecisionError> {
    dp.check_posterior(posterior)?;
    if action.index() >= dp.actions() {
        return Err(DecisionError::ActionOutOfRange {
            action: action.index(),
            actions: dp.actions(),
        });
    }
    let future = dot(posterior.probs(), &dp.future[action.index()])?;
    Ok(future + dp.u_action.get(action.index()))
}

/// Best action when the current state is known only through `posterior`.
pub fn meu_unobserved(
    dp: &DecisionProcess,
    posterior: &DiscreteDistribution,
) -> Result<PolicyResult, DecisionError> {
    let eus = (0..dp.actions())
        .map(|a| expected_utility(dp, posterior, Action(a)))
        .collect::<Result<Vec<_>, _>>()?;
    let best = argmax_with_tiebreak(&eus)?;
    Ok(PolicyResult {
        action: Action(best),
        expected_utility: eus[best],
    })
}

/// Expected utility of acting after the current state has been revealed.
pub fn meu_observed(
    dp: &DecisionProcess,
    posterior: &DiscreteDistribution,
) -> Result<f64, DecisionError> {
    dp.check_posterior(posterior)?;
    Ok(posterior
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(h, &p)| p * dp.perfect_information_action(h).expected_utility)
        .sum())
}

/// Expected value of perfect information about the current state,
/// `MEU(observed) - MEU(unobserved)`.
///
/// Evaluated as the posterior-expected regret of the unobserved choice,
/// `sum_h p_h [max_d U(h, d) - U(h, d*)]`. Every term is non-negative, and
/// the sum is exactly zero when `d*` is optimal in every state with mass.
pub fn evpi(dp: &DecisionProcess, posterior: &DiscreteDistribution) -> Result<f64, DecisionError> {
    let chosen = meu_unobserved(dp, posterior)?.action;
    let regret = posterior
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(h, &p)| {
            let taken = dp.state_action_utility(h, chosen);
            let best = (0..dp.actions())
                .map(|a| dp.state_action_utility(h, Action(a)))
                .fold(taken, f64::max);
            p * (best - taken)
        })
        .sum();
    Ok(clamp_evpi(regret))
}

pub(crate) fn clamp_evpi(v: f64) -> f64 {
    if v < 0.0 && v >= -EVPI_CLAMP {
        0.0
    } else {
        v
    }
}

/// Whether an inspection is worth its cost: `EVPI > c_ins`, strictly.
pub fn query_indicated(
    dp: &DecisionProcess,
    posterior: &DiscreteDistribution,
) -> Result<bool, DecisionError> {
    Ok(evpi(dp, posterior)? > dp.inspection_cost())
}

/// Stationary distribution of an irreducible, aperiodic chain by power
/// iteration from the first state.
pub fn stationary_distribution(cpt: &TransitionCpt) -> Result<DiscreteDistribution, DecisionError> {
    let k = cpt.k();
    check_irreducible(cpt)?;
    let mut pi = vec![0.0; k];
    pi[0] = 1.0;
    let mut next = vec![0.0; k];
    for _ in 0..STATIONARY_MAX_ITER {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &mass) in pi.iter().enumerate() {
            for (j, slot) in next.iter_mut().enumerate() {
                *slot += mass * cpt.get(i, j);
            }
        }
        let delta = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if delta < STATIONARY_TOLERANCE {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|v| *v /= total);
            return Ok(DiscreteDistribution::new(pi)?);
        }
    }
    Err(DecisionError::NonConvergence(STATIONARY_MAX_ITER))
}

fn check_irreducible(cpt: &TransitionCpt) -> Result<(), DecisionError> {
    let k = cpt.k();
    for from in 0..k {
        let mut seen = vec![false; k];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if !seen[j] && cpt.get(i, j) > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(to) = seen.iter().position(|s| !s) {
            return Err(DecisionError::Reducible { from, to });
        }
    }
    Ok(())
}
