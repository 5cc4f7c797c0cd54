//! Accuracy metrics over per-turn assignments.
//!
//! All metrics compare two parallel collections shaped as
//! `[dialogue][turn] -> StateConfig` and report exact hit counts alongside
//! the quotient, so downstream reports can show both.

use alloc::vec::Vec;
use core::fmt;

use crate::state::StateConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    DialogueCountMismatch { expected: usize, got: usize },
    TurnCountMismatch { dialogue: usize, expected: usize, got: usize },
    SlotCountMismatch { dialogue: usize, turn: usize },
    Empty,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::DialogueCountMismatch { expected, got } => {
                write!(f, "prediction has {got} dialogues, gold has {expected}")
            }
            MetricsError::TurnCountMismatch { dialogue, expected, got } => write!(
                f,
                "dialogue {dialogue}: prediction has {got} turns, gold has {expected}"
            ),
            MetricsError::SlotCountMismatch { dialogue, turn } => {
                write!(f, "dialogue {dialogue} turn {turn}: slot counts differ")
            }
            MetricsError::Empty => write!(f, "no turns to score"),
        }
    }
}

/// An exact hit count with its denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub hits: usize,
    pub total: usize,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.hits as f64 / self.total as f64
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.hits, self.total)
    }
}

fn check_shapes(
    gold: &[Vec<StateConfig>],
    pred: &[Vec<StateConfig>],
) -> Result<(), MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::DialogueCountMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    let mut turns = 0usize;
    for (d, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(MetricsError::TurnCountMismatch {
                dialogue: d,
                expected: g.len(),
                got: p.len(),
            });
        }
        for (t, (gs, ps)) in g.iter().zip(p).enumerate() {
            if gs.values().len() != ps.values().len() {
                return Err(MetricsError::SlotCountMismatch { dialogue: d, turn: t + 1 });
            }
        }
        turns += g.len();
    }
    if turns == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Fraction of turns where the full predicted assignment matches gold on
/// every slot at once.
pub fn joint_accuracy(
    gold: &[Vec<StateConfig>],
    pred: &[Vec<StateConfig>],
) -> Result<Ratio, MetricsError> {
    check_shapes(gold, pred)?;
    let mut hits = 0;
    let mut total = 0;
    for (g, p) in gold.iter().zip(pred) {
        for (gs, ps) in g.iter().zip(p) {
            total += 1;
            if gs == ps {
                hits += 1;
            }
        }
    }
    Ok(Ratio { hits, total })
}

/// Per-slot accuracy over all turns, in slot order.
pub fn per_slot_accuracy(
    gold: &[Vec<StateConfig>],
    pred: &[Vec<StateConfig>],
) -> Result<Vec<Ratio>, MetricsError> {
    check_shapes(gold, pred)?;
    let n_slots = gold
        .iter()
        .flat_map(|d| d.iter())
        .next()
        .map(|s| s.values().len())
        .unwrap_or(0);
    let mut ratios = alloc::vec![Ratio { hits: 0, total: 0 }; n_slots];
    for (g, p) in gold.iter().zip(pred) {
        for (gs, ps) in g.iter().zip(p) {
            for (slot, (gv, pv)) in gs.values().iter().zip(ps.values()).enumerate() {
                ratios[slot].total += 1;
                if gv == pv {
                    ratios[slot].hits += 1;
                }
            }
        }
    }
    Ok(ratios)
}

/// Joint accuracy at each turn index: entry `t` scores only the dialogues
/// that have at least `t + 1` turns, so the denominators shrink along the
/// curve for ragged corpora.
pub fn per_turn_curve(
    gold: &[Vec<StateConfig>],
    pred: &[Vec<StateConfig>],
) -> Result<Vec<Ratio>, MetricsError> {
    check_shapes(gold, pred)?;
    let max_turns = gold.iter().map(Vec::len).max().unwrap_or(0);
    let mut ratios = alloc::vec![Ratio { hits: 0, total: 0 }; max_turns];
    for (g, p) in gold.iter().zip(pred) {
        for (t, (gs, ps)) in g.iter().zip(p).enumerate() {
            ratios[t].total += 1;
            if gs == ps {
                ratios[t].hits += 1;
            }
        }
    }
    Ok(ratios)
}
