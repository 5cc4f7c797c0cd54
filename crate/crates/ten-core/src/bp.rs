//! Probabilistic state aggregation along the turn chain.
//!
//! Per slot, the state posterior after turn t is the marginal of a chain
//! factor graph: turn-label variables y_1..y_t (each with unary factor
//! α_τ), state variables x_1..x_t, and deterministic transition factors
//! g(x_{τ-1}, y_τ, x_τ) = [x_{τ-1} ◁ y_τ = x_τ], with x_0 pinned to
//! `unknown`. Because the chain has no cycles, one forward sum-product
//! sweep is exact, and each step is
//!
//! ```text
//! μ_t(v) = Σ_{v', v''} g(v', v'', v) · γ_t(v') · β_t(v'')
//! ```
//!
//! with γ_t = μ_{t-1} (the incoming state message) and β_t = α_t (the
//! turn-label message). The ◁ structure collapses the double sum to the
//! closed form
//!
//! ```text
//! μ_t(unknown) = γ_t(unknown) · β_t(unknown)
//! μ_t(v)       = β_t(v) + γ_t(v) · β_t(unknown)     v ≠ unknown
//! ```
//!
//! — a turn either asserts v outright, or says nothing (mass β(unknown))
//! and the previous posterior carries through. The closed form is the
//! production path; [`bp_step_double_sum`] (a literal double sum) and
//! [`brute_force_marginal`] (exhaustive enumeration of all chain
//! assignments, sharing no code with the message recursion) exist to check
//! it and are used heavily by the test suites.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dist::{DiscreteDist, DistError};
use crate::state::{indicator_g, Ontology, SlotId, StateConfig, StateError, ValueId, UNKNOWN};

#[derive(Debug, Clone, PartialEq)]
pub enum BpError {
    State(StateError),
    Dist(DistError),
    /// Messages fed to one step must refer to the same slot.
    SlotMismatch { left: usize, right: usize },
    /// Message length must equal |𝒱*(slot)|.
    LengthMismatch { slot: usize, expected: usize, got: usize },
    /// Enumeration would exceed the term budget.
    InstanceTooLarge { terms_log10: f64 },
    /// Turn index out of the provided α sequence.
    TurnOutOfRange { turn: usize, turns: usize },
}

impl fmt::Display for BpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BpError::State(e) => write!(f, "{e}"),
            BpError::Dist(e) => write!(f, "{e}"),
            BpError::SlotMismatch { left, right } => {
                write!(f, "messages refer to different slots ({left} vs {right})")
            }
            BpError::LengthMismatch { slot, expected, got } => {
                write!(f, "message for slot {slot} has {got} entries, expected {expected}")
            }
            BpError::InstanceTooLarge { terms_log10 } => {
                write!(f, "brute-force enumeration would need ~10^{terms_log10:.1} terms")
            }
            BpError::TurnOutOfRange { turn, turns } => {
                write!(f, "turn {turn} out of range (have {turns} turn messages)")
            }
        }
    }
}

impl From<StateError> for BpError {
    fn from(e: StateError) -> Self {
        BpError::State(e)
    }
}

impl From<DistError> for BpError {
    fn from(e: DistError) -> Self {
        BpError::Dist(e)
    }
}

/// The closed-form step on raw probability slices (index 0 = unknown).
/// No validation or renormalization happens here — this is the bare
/// kernel shared by the checked wrapper below and the differentiable tape
/// op, exposed so tests can probe the arithmetic itself. If the inputs
/// each sum to 1, the output does too (up to float rounding): the column
/// sums telescope, Σμ = γ_0 β_0 + Σ_{v≥1} β_v + β_0 (Σγ − γ_0) = Σβ.
pub fn bp_step_closed(gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let b0 = beta[0];
    let mut mu = vec![0.0; beta.len()];
    mu[0] = gamma[0] * b0;
    for v in 1..beta.len() {
        mu[v] = beta[v] + gamma[v] * b0;
    }
    mu
}

/// The start-of-dialogue state message μ_0: all mass on `unknown`.
pub fn bp_init(ontology: &Ontology, slot: SlotId) -> Result<DiscreteDist, BpError> {
    ontology.check_slot(slot)?;
    Ok(DiscreteDist::point_mass(slot, UNKNOWN, ontology.value_count(slot)))
}

fn check_pair(
    ontology: &Ontology,
    gamma: &DiscreteDist,
    beta: &DiscreteDist,
) -> Result<(), BpError> {
    if gamma.slot() != beta.slot() {
        return Err(BpError::SlotMismatch {
            left: gamma.slot().index(),
            right: beta.slot().index(),
        });
    }
    ontology.check_slot(gamma.slot())?;
    let expected = ontology.value_count(gamma.slot());
    for d in [gamma, beta] {
        if d.len() != expected {
            return Err(BpError::LengthMismatch {
                slot: d.slot().index(),
                expected,
                got: d.len(),
            });
        }
    }
    Ok(())
}

/// One aggregation step via the closed form. `DiscreteDist` construction
/// guarantees the inputs are normalized (renormalizing within 1e-6 and
/// rejecting beyond), and the output is renormalized the same way, so
/// chains of any length stay normalized.
pub fn bp_step(
    ontology: &Ontology,
    gamma: &DiscreteDist,
    beta: &DiscreteDist,
) -> Result<DiscreteDist, BpError> {
    check_pair(ontology, gamma, beta)?;
    Ok(DiscreteDist::new(gamma.slot(), bp_step_closed(gamma.probs(), beta.probs()))?)
}

/// The same step as a literal double sum over the transition indicator —
/// the slow reference the closed form is verified against.
pub fn bp_step_double_sum(
    ontology: &Ontology,
    gamma: &DiscreteDist,
    beta: &DiscreteDist,
) -> Result<DiscreteDist, BpError> {
    check_pair(ontology, gamma, beta)?;
    let slot = gamma.slot();
    let n = ontology.value_count(slot);
    let mut mu = vec![0.0; n];
    for (v, m) in mu.iter_mut().enumerate() {
        let mut acc = 0.0;
        for v_prev in 0..n {
            for v_label in 0..n {
                if indicator_g(ontology, slot, ValueId(v_prev), ValueId(v_label), ValueId(v))? {
                    acc += gamma.prob(ValueId(v_prev)) * beta.prob(ValueId(v_label));
                }
            }
        }
        *m = acc;
    }
    Ok(DiscreteDist::new(slot, mu)?)
}

/// The messages flowing through one turn of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct BpTurn {
    /// Incoming state message (= previous turn's μ).
    pub gamma: DiscreteDist,
    /// Turn-label message (= the turn's α).
    pub beta: DiscreteDist,
    /// Outgoing state posterior.
    pub mu: DiscreteDist,
}

/// Full message trace of one slot's chain, μ_0 included so turn 0 can be
/// rendered by inspection tooling.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageTrace {
    pub slot: SlotId,
    pub mu0: DiscreteDist,
    pub turns: Vec<BpTurn>,
}

impl MessageTrace {
    /// The per-turn state posteriors μ_1..μ_T.
    pub fn marginals(&self) -> Vec<&DiscreteDist> {
        self.turns.iter().map(|t| &t.mu).collect()
    }
}

/// Runs the whole chain for one slot from μ_0, recording every message.
pub fn run_chain(
    ontology: &Ontology,
    slot: SlotId,
    alphas: &[DiscreteDist],
) -> Result<MessageTrace, BpError> {
    let mu0 = bp_init(ontology, slot)?;
    let mut turns = Vec::with_capacity(alphas.len());
    let mut gamma = mu0.clone();
    for beta in alphas {
        let mu = bp_step(ontology, &gamma, beta)?;
        turns.push(BpTurn { gamma: gamma.clone(), beta: beta.clone(), mu: mu.clone() });
        gamma = mu;
    }
    Ok(MessageTrace { slot, mu0, turns })
}

/// Exhaustive-enumeration oracle for the turn-`t` posterior (1-based):
/// sums `Π_τ α_τ(y_τ) · Π_τ g(x_{τ-1}, y_τ, x_τ)` over every assignment
/// of y_1..y_t and x_1..x_{t-1}, with x_0 = unknown and x_t fixed to the
/// queried value. Independent of the message recursion by construction.
/// Rejects instances beyond ~10^7 terms.
pub fn brute_force_marginal(
    ontology: &Ontology,
    slot: SlotId,
    alphas: &[DiscreteDist],
    t: usize,
) -> Result<DiscreteDist, BpError> {
    ontology.check_slot(slot)?;
    if t == 0 || t > alphas.len() {
        return Err(BpError::TurnOutOfRange { turn: t, turns: alphas.len() });
    }
    for a in &alphas[..t] {
        if a.slot() != slot {
            return Err(BpError::SlotMismatch { left: slot.index(), right: a.slot().index() });
        }
        if a.len() != ontology.value_count(slot) {
            return Err(BpError::LengthMismatch {
                slot: slot.index(),
                expected: ontology.value_count(slot),
                got: a.len(),
            });
        }
    }
    let n = ontology.value_count(slot);
    // Free positions: y_1..y_t and x_1..x_{t-1}; the total term count over
    // all queried values is n^(2t). Budget: 1e7.
    let digits = 2 * t - 1;
    let terms_log10 = (digits + 1) as f64 * libm::log10(n as f64);
    if terms_log10 > 7.0 {
        return Err(BpError::InstanceTooLarge { terms_log10 });
    }

    let mut totals = vec![0.0; n];
    // Odometer over the free positions: assignment[0..t] = y_1..y_t,
    // assignment[t..] = x_1..x_{t-1}.
    let mut assignment = vec![0usize; digits];
    loop {
        // Chain weight for each queried final value under this assignment.
        let mut weight = 1.0;
        let mut consistent = true;
        for tau in 1..=t {
            let y = ValueId(assignment[tau - 1]);
            weight *= alphas[tau - 1].prob(y);
            if tau < t {
                let x_prev = if tau == 1 { UNKNOWN } else { ValueId(assignment[t + tau - 2]) };
                let x_next = ValueId(assignment[t + tau - 1]);
                if !indicator_g(ontology, slot, x_prev, y, x_next)? {
                    consistent = false;
                    break;
                }
            }
        }
        if consistent {
            let x_prev = if t == 1 { UNKNOWN } else { ValueId(assignment[t + t - 2]) };
            let y_last = ValueId(assignment[t - 1]);
            for (v, total) in totals.iter_mut().enumerate() {
                if indicator_g(ontology, slot, x_prev, y_last, ValueId(v))? {
                    *total += weight;
                }
            }
        }
        // Advance the odometer.
        let mut pos = 0;
        loop {
            if pos == digits {
                return Ok(DiscreteDist::new(slot, totals)?);
            }
            assignment[pos] += 1;
            if assignment[pos] < n {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

/// Hard aggregation: per-slot argmax of the turn-label distributions,
/// folded into the previous state with ◁. `alphas` must carry one
/// distribution per slot in ontology order.
pub fn aggregate_hard(
    ontology: &Ontology,
    x_prev: &StateConfig,
    alphas: &[DiscreteDist],
) -> Result<StateConfig, BpError> {
    if alphas.len() != ontology.slot_count() {
        return Err(BpError::State(StateError::SlotCountMismatch {
            expected: ontology.slot_count(),
            got: alphas.len(),
        }));
    }
    let mut values = Vec::with_capacity(alphas.len());
    for (i, a) in alphas.iter().enumerate() {
        if a.slot() != SlotId(i) {
            return Err(BpError::SlotMismatch { left: i, right: a.slot().index() });
        }
        values.push(a.argmax());
    }
    let y_hat = StateConfig::from_values(values);
    Ok(crate::state::aggregate_state(ontology, x_prev, &y_hat)?)
}
