//! Resource-state preparation and the leader-aware circuit.
//!
//! The leader-aware state over `n` end-nodes is `|W⟩_n` followed by
//! `m = ⌈log2 n⌉` orchestrator ancillas. End-node `N_i` holds W qubit
//! `i - 1`; ancilla `a_j` is qubit `n + j` and carries bit `j` (least
//! significant first) of `i - 1` for the one-hot position `i`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::sim::{Gate, SimError, StateVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("register size {size} is below the minimum of {min}")]
    RegisterTooSmall { size: usize, min: usize },
    #[error("gate index {index} is outside a {width}-qubit register")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("CX control and target are both {0}")]
    SameQubit(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Number of ancillas needed to name one of `n` end-nodes.
pub fn ancilla_count(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Qubit placement for the leader-aware register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeaderAwareLayout {
    n: usize,
    m: usize,
}

impl LeaderAwareLayout {
    pub fn new(n: usize) -> Result<Self, CircuitError> {
        if n == 0 {
            return Err(CircuitError::RegisterTooSmall { size: 0, min: 1 });
        }
        Ok(Self { n, m: ancilla_count(n) })
    }

    pub fn end_nodes(&self) -> usize {
        self.n
    }

    pub fn ancillas(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> usize {
        self.n + self.m
    }

    /// W qubit held by end-node `N_node`, `1 <= node <= n`.
    pub fn w_qubit(&self, node: usize) -> usize {
        debug_assert!((1..=self.n).contains(&node));
        node - 1
    }

    pub fn ancilla(&self, j: usize) -> usize {
        debug_assert!(j < self.m);
        self.n + j
    }

    pub fn ancilla_qubits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).map(|j| self.ancilla(j))
    }

    /// Ancilla bits `a_0..a_{m-1}` that identify `N_node`.
    pub fn encode(&self, node: usize) -> Vec<bool> {
        (0..self.m).map(|j| (node - 1) >> j & 1 == 1).collect()
    }
}

/// One instruction of a [`GateList`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateEntry {
    Single { gate: Gate, target: usize },
    Cx { control: usize, target: usize },
}

impl GateEntry {
    pub fn name(&self) -> &'static str {
        match self {
            GateEntry::Single { gate, .. } => gate.name(),
            GateEntry::Cx { .. } => "CX",
        }
    }

    pub fn control(&self) -> Option<usize> {
        match self {
            GateEntry::Single { .. } => None,
            GateEntry::Cx { control, .. } => Some(*control),
        }
    }

    pub fn target(&self) -> usize {
        match self {
            GateEntry::Single { target, .. } | GateEntry::Cx { target, .. } => *target,
        }
    }
}

impl fmt::Display for GateEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateEntry::Single { gate, target } => write!(f, "{} {target}", gate.name()),
            GateEntry::Cx { control, target } => write!(f, "CX {control} {target}"),
        }
    }
}

/// A validated, ordered gate sequence over a fixed register width.
///
/// The text form is a `QUBITS <count>` header followed by one gate per line,
/// `CX <control> <target>` or `<H|X|Z|I> <target>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateList {
    num_qubits: usize,
    entries: Vec<GateEntry>,
}

impl GateList {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, entries: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn entries(&self) -> &[GateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: GateEntry) -> Result<(), CircuitError> {
        let in_range = |index: usize| {
            if index < self.num_qubits {
                Ok(())
            } else {
                Err(CircuitError::IndexOutOfRange { index, width: self.num_qubits })
            }
        };
        in_range(entry.target())?;
        if let Some(control) = entry.control() {
            in_range(control)?;
            if control == entry.target() {
                return Err(CircuitError::SameQubit(control));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn apply(&self, state: &mut StateVector) -> Result<(), CircuitError> {
        if state.num_qubits() != self.num_qubits {
            return Err(SimError::DimensionMismatch {
                left: state.num_qubits(),
                right: self.num_qubits,
            }
            .into());
        }
        for entry in &self.entries {
            match *entry {
                GateEntry::Single { gate, target } => state.apply_single(target, gate)?,
                GateEntry::Cx { control, target } => state.apply_cnot(control, target)?,
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GateList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QUBITS {}", self.num_qubits)?;
        for entry in &self.entries {
            writeln!(f, "{entry}")?;
        }
        Ok(())
    }
}

impl FromStr for GateList {
    type Err = CircuitError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut list: Option<GateList> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |message: String| CircuitError::Parse { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let index = |s: &str| {
                s.parse::<usize>().map_err(|_| err(format!("`{s}` is not a qubit index")))
            };
            match (list.as_mut(), fields.as_slice()) {
                (None, ["QUBITS", count]) => list = Some(GateList::new(index(count)?)),
                (None, _) => return Err(err("expected `QUBITS <count>` header".into())),
                (Some(_), ["QUBITS", ..]) => return Err(err("duplicate QUBITS header".into())),
                (Some(l), ["CX", c, t]) => l
                    .push(GateEntry::Cx { control: index(c)?, target: index(t)? })
                    .map_err(|e| err(e.to_string()))?,
                (Some(l), [name, t]) => {
                    let gate = Gate::from_name(name)
                        .ok_or_else(|| err(format!("unknown gate `{name}`")))?;
                    l.push(GateEntry::Single { gate, target: index(t)? })
                        .map_err(|e| err(e.to_string()))?
                }
                (Some(_), _) => return Err(err(format!("malformed instruction `{content}`"))),
            }
        }
        list.ok_or(CircuitError::Parse { line: 0, message: "empty gate list".into() })
    }
}

/// `(|0…0⟩ + |1…1⟩)/√2` over `q >= 2` qubits.
pub fn prepare_ghz(q: usize) -> Result<StateVector, CircuitError> {
    if q < 2 {
        return Err(CircuitError::RegisterTooSmall { size: q, min: 2 });
    }
    let dim = 1usize << q;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    amps[0] = h;
    amps[dim - 1] = h;
    Ok(StateVector::from_amplitudes(amps)?)
}

fn one_hot(width: usize, position: usize) -> usize {
    1 << (width - 1 - position)
}

/// Equal superposition of the `n` one-hot basis states.
pub fn prepare_w(n: usize) -> Result<StateVector, CircuitError> {
    if n < 1 {
        return Err(CircuitError::RegisterTooSmall { size: n, min: 1 });
    }
    let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    for position in 0..n {
        amps[one_hot(n, position)] = amp;
    }
    Ok(StateVector::from_amplitudes(amps)?)
}

/// CNOTs that write `i - 1` into the ancillas, controlled by `W_i`:
/// one `CX(W_i, a_j)` for every set bit `j` of `i - 1`, ascending `i`
/// then ascending `j`.
pub fn leader_aware_circuit(n: usize) -> Result<GateList, CircuitError> {
    let layout = LeaderAwareLayout::new(n)?;
    let mut list = GateList::new(layout.width());
    for node in 1..=n {
        for (j, bit) in layout.encode(node).into_iter().enumerate() {
            if bit {
                list.push(GateEntry::Cx {
                    control: layout.w_qubit(node),
                    target: layout.ancilla(j),
                })?;
            }
        }
    }
    Ok(list)
}

/// The leader-aware state built amplitude by amplitude: `n` terms of
/// weight `1/√n`, term `i` having `W_i = 1` and ancillas spelling `i - 1`.
pub fn prepare_leader_aware(n: usize) -> Result<StateVector, CircuitError> {
    let layout = LeaderAwareLayout::new(n)?;
    let width = layout.width();
    let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << width];
    for node in 1..=n {
        let mut index = one_hot(width, layout.w_qubit(node));
        for (j, bit) in layout.encode(node).into_iter().enumerate() {
            if bit {
                index |= one_hot(width, layout.ancilla(j));
            }
        }
        amps[index] = amp;
    }
    Ok(StateVector::from_amplitudes(amps)?)
}
