//! EPR extraction from a GHZ state by local operations.
//!
//! A selection sequence `P` marks exactly two GHZ qubits as the pair to keep.
//! Every other qubit is measured in the Hadamard basis; the kept pair is left
//! in `|Φ⁺⟩` when the XOR of those outcomes is 0 and in `|Φ⁻⟩` otherwise, so
//! a Z on either pair qubit conditioned on the parity always yields `|Φ⁺⟩`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::sim::{Basis, Gate, Sampler, SimError, StateVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractionError {
    #[error("selection sequence must contain exactly two ones, found {0}")]
    InvalidSequence(usize),
    #[error("winner {winner} is not an end-node of a network with {n} end-nodes")]
    WinnerOutOfRange { winner: usize, n: usize },
    #[error("pair ({0}, {1}) is not two distinct nodes of the register")]
    InvalidPair(usize, usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl crate::branch::BranchError for ExtractionError {
    fn is_zero_probability(&self) -> bool {
        matches!(self, ExtractionError::Sim(SimError::ZeroProbabilityBranch { .. }))
    }
}

pub fn phi_plus() -> StateVector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    StateVector::from_amplitudes(vec![h, z, z, h]).expect("normalized")
}

pub fn phi_minus() -> StateVector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    StateVector::from_amplitudes(vec![h, z, z, -h]).expect("normalized")
}

/// Per-node selection bits `p_0..p_n`; exactly two are set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PSequence {
    bits: Vec<bool>,
}

impl PSequence {
    pub fn new(bits: Vec<bool>) -> Result<Self, ExtractionError> {
        let ones = bits.iter().filter(|&&b| b).count();
        if ones != 2 {
            return Err(ExtractionError::InvalidSequence(ones));
        }
        Ok(Self { bits })
    }

    /// Pairs the orchestrator `N_0` with end-node `N_winner`.
    pub fn for_winner(winner: usize, n: usize) -> Result<Self, ExtractionError> {
        if winner == 0 || winner > n {
            return Err(ExtractionError::WinnerOutOfRange { winner, n });
        }
        Self::for_pair(0, winner, n)
    }

    /// Selects nodes `i` and `j` out of `N_0..N_n`.
    pub fn for_pair(i: usize, j: usize, n: usize) -> Result<Self, ExtractionError> {
        if i == j || i > n || j > n {
            return Err(ExtractionError::InvalidPair(i, j));
        }
        let mut bits = vec![false; n + 1];
        bits[i] = true;
        bits[j] = true;
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The selected pair, lower index first.
    pub fn pair(&self) -> (usize, usize) {
        let mut it = self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i);
        let first = it.next().expect("two ones");
        let second = it.next().expect("two ones");
        (first, second)
    }

    pub fn losers(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i)
    }
}

/// Local unitary for one selection bit: H for 0, I for 1.
pub fn unitary_for(selected: bool) -> Gate {
    if selected {
        Gate::Identity
    } else {
        Gate::Hadamard
    }
}

fn check_width(state: &StateVector, p: &PSequence) -> Result<(), ExtractionError> {
    if state.num_qubits() != p.len() {
        return Err(SimError::DimensionMismatch { left: state.num_qubits(), right: p.len() }.into());
    }
    Ok(())
}

/// Applies `U_{p_0} ⊗ … ⊗ U_{p_n}`.
pub fn apply_up(state: &mut StateVector, p: &PSequence) -> Result<(), ExtractionError> {
    check_width(state, p)?;
    for (qubit, &bit) in p.bits().iter().enumerate() {
        state.apply_single(qubit, unitary_for(bit))?;
    }
    Ok(())
}

/// A local step taken during extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum LocalOp {
    Gate { qubit: usize, gate: Gate },
    Measure { qubit: usize, basis: Basis },
}

impl LocalOp {
    /// Every step touches exactly one qubit.
    pub fn qubits(&self) -> [usize; 1] {
        match *self {
            LocalOp::Gate { qubit, .. } | LocalOp::Measure { qubit, .. } => [qubit],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractionResult {
    pub pair: (usize, usize),
    /// Hadamard-basis outcome of every loser qubit.
    pub outcomes: BTreeMap<usize, bool>,
    pub parity: bool,
    /// The full register; losers are pinned to their outcomes.
    pub state: StateVector,
    pub ops: Vec<LocalOp>,
}

impl ExtractionResult {
    /// Two-qubit state of the selected pair.
    pub fn pair_state(&self) -> Result<StateVector, SimError> {
        self.state.subsystem(&[self.pair.0, self.pair.1])
    }
}

/// Vacates every unselected GHZ qubit with a Hadamard-basis measurement.
///
/// The selected qubits get `I`; an unselected qubit's `H` from `U_P`
/// followed by a computational readout is the same as one Hadamard-basis
/// measurement of the raw qubit, which is what is performed here.
pub fn extract_epr<S: Sampler>(
    mut state: StateVector,
    p: &PSequence,
    sampler: &mut S,
) -> Result<ExtractionResult, ExtractionError> {
    check_width(&state, p)?;
    let mut ops = Vec::with_capacity(p.len());
    let mut outcomes = BTreeMap::new();
    for (qubit, &bit) in p.bits().iter().enumerate() {
        if bit {
            state.apply_single(qubit, Gate::Identity)?;
            ops.push(LocalOp::Gate { qubit, gate: Gate::Identity });
        } else {
            let record = sampler.measure(&mut state, qubit, Basis::Hadamard)?;
            ops.push(LocalOp::Measure { qubit, basis: Basis::Hadamard });
            outcomes.insert(qubit, record.outcome);
        }
    }
    let parity = outcomes.values().fold(false, |acc, &g| acc ^ g);
    Ok(ExtractionResult { pair: p.pair(), outcomes, parity, state, ops })
}

/// Z on `qubit` when `parity` is odd, turning `|Φ⁻⟩` into `|Φ⁺⟩`.
pub fn parity_correct(state: &mut StateVector, parity: bool, qubit: usize) -> Result<(), SimError> {
    if parity {
        state.apply_single(qubit, Gate::PauliZ)?;
    }
    Ok(())
}
