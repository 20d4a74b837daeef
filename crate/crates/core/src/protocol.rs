//! Uplink and downlink slot execution.
//!
//! Each slot consumes a fresh GHZ state over `N_0..N_n` and a fresh
//! leader-aware state. End-nodes measure their W qubits; the single node that
//! reads 1 wins the slot and every other end-node vacates the GHZ state with a
//! Hadamard-basis measurement. The orchestrator learns the winner only from
//! its ancillas. In an uplink slot the winner teleports its payload to the
//! orchestrator; in a downlink slot the orchestrator teleports the payload
//! addressed to the winner.
//!
//! Every end-node sends exactly one two-bit report per slot, padded with
//! random dummy bits, so the classical traffic never depends on who won.
//! Quantum operations go through an audit layer that rejects any operation
//! touching a qubit the acting node does not hold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch::BranchError;
use crate::circuits::{prepare_ghz, prepare_leader_aware, CircuitError, LeaderAwareLayout};
use crate::sim::{Basis, Gate, RandomSource, Sampler, SimError, StateVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("{ones} end-nodes read 1 from the W state; exactly one is required")]
    Collision { ones: usize },
    #[error("ancillas decode to N_{decoded} but the network has {n} end-nodes")]
    CorruptAncilla { decoded: usize, n: usize },
    #[error("{node} cannot act on {register:?} qubit {qubit} held by {owner}")]
    NonLocal { node: NodeId, register: RegisterKind, qubit: usize, owner: NodeId },
    #[error("invalid payloads: {0}")]
    InvalidPayloads(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl BranchError for ProtocolError {
    fn is_zero_probability(&self) -> bool {
        matches!(self, ProtocolError::Sim(SimError::ZeroProbabilityBranch { .. }))
    }
}

/// `N_0` is the orchestrator, `N_1..N_n` are end-nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ORCHESTRATOR: NodeId = NodeId(0);

    pub fn is_orchestrator(self) -> bool {
        self == Self::ORCHESTRATOR
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N_{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Transmitter,
    Receiver,
    Loser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Uplink,
    Downlink,
}

impl SlotKind {
    pub fn name(self) -> &'static str {
        match self {
            SlotKind::Uplink => "uplink",
            SlotKind::Downlink => "downlink",
        }
    }
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "u" | "up" | "uplink" => Ok(SlotKind::Uplink),
            "d" | "down" | "downlink" => Ok(SlotKind::Downlink),
            other => Err(format!("unknown slot type `{other}`")),
        }
    }
}

/// The realized transmitter/receiver assignment of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ContentionOutcome {
    pub slot: SlotKind,
    pub transmitter: NodeId,
    pub receiver: NodeId,
    /// The end-node member of the pair.
    pub winner: NodeId,
}

impl ContentionOutcome {
    pub fn new(slot: SlotKind, winner: NodeId) -> Self {
        let (transmitter, receiver) = match slot {
            SlotKind::Uplink => (winner, NodeId::ORCHESTRATOR),
            SlotKind::Downlink => (NodeId::ORCHESTRATOR, winner),
        };
        Self { slot, transmitter, receiver, winner }
    }

    /// Indicator of the ordered (transmitter, receiver) pair.
    pub fn chi(&self, transmitter: NodeId, receiver: NodeId) -> bool {
        transmitter == self.transmitter && receiver == self.receiver
    }

    /// Number of ordered pairs of distinct nodes among `N_0..N_n` selected.
    pub fn selected_pairs(&self, n: usize) -> usize {
        let nodes = || (0..=n).map(NodeId);
        nodes()
            .flat_map(|t| nodes().map(move |r| (t, r)))
            .filter(|(t, r)| t != r && self.chi(*t, *r))
            .count()
    }

    pub fn role_of(&self, node: NodeId) -> Role {
        if node == self.transmitter {
            Role::Transmitter
        } else if node == self.receiver {
            Role::Receiver
        } else {
            Role::Loser
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipient {
    Node(NodeId),
    Broadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageBody {
    /// `g` is a GHZ outcome (or `g*`); `q` is `q*` or a dummy.
    EndNodeReport {
        g: bool,
        q: bool,
    },
    OrchestratorBroadcast {
        q_star: bool,
        g0: bool,
        parity: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ClassicalMessage {
    pub from: NodeId,
    pub to: Recipient,
    #[serde(flatten)]
    pub body: MessageBody,
}

impl ClassicalMessage {
    fn report(from: usize, g: bool, q: bool) -> Self {
        Self {
            from: NodeId(from),
            to: Recipient::Node(NodeId::ORCHESTRATOR),
            body: MessageBody::EndNodeReport { g, q },
        }
    }

    pub fn bits(&self) -> usize {
        match self.body {
            MessageBody::EndNodeReport { .. } => 2,
            MessageBody::OrchestratorBroadcast { .. } => 3,
        }
    }

    pub fn observed_by(&self, node: NodeId) -> bool {
        self.from == node || self.to == Recipient::Node(node) || self.to == Recipient::Broadcast
    }

    /// Everything about the message except its bit values.
    pub fn shape(&self) -> (NodeId, Recipient, usize) {
        (self.from, self.to, self.bits())
    }
}

/// What one node knows at the end of a slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LocalView {
    pub node: NodeId,
    /// Own W outcome; `None` for the orchestrator.
    pub w: Option<bool>,
    /// Own measurement outcomes in the order taken.
    pub outcomes: Vec<bool>,
    /// Messages sent by, addressed to, or broadcast to the node.
    pub observed: Vec<ClassicalMessage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegisterKind {
    Ghz,
    LeaderAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Measure { basis: Basis },
    Gate { gate: Gate },
    Join,
    TeleportSend,
    TeleportReceive,
}

/// One audited quantum operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub node: NodeId,
    pub register: RegisterKind,
    pub qubits: Vec<usize>,
    #[serde(flatten)]
    pub action: Action,
}

/// The two entangled resources of one slot.
///
/// Slot execution takes these by value, so a resource can never serve two
/// slots; `generation` identifies the distribution round.
#[derive(Debug, Clone)]
pub struct SlotResources {
    pub generation: u64,
    pub layout: LeaderAwareLayout,
    pub ghz: StateVector,
    pub leader_aware: StateVector,
}

impl SlotResources {
    pub fn prepare(n: usize, generation: u64) -> Result<Self, ProtocolError> {
        let layout = LeaderAwareLayout::new(n)?;
        Ok(Self {
            generation,
            layout,
            ghz: prepare_ghz(n + 1)?,
            leader_aware: prepare_leader_aware(n)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlotReport {
    pub generation: u64,
    pub outcome: ContentionOutcome,
    /// W outcomes of `N_1..N_n`.
    #[serde(serialize_with = "crate::fmt::serialize_bits")]
    pub w: Vec<bool>,
    /// Orchestrator readout `a_0..a_{m-1}`.
    #[serde(serialize_with = "crate::fmt::serialize_bits")]
    pub ancilla: Vec<bool>,
    pub decoded: NodeId,
    pub parity: bool,
    pub messages: Vec<ClassicalMessage>,
    /// Fidelity of the delivered qubit to the payload meant for this slot.
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub fidelity: f64,
    #[serde(skip)]
    pub views: Vec<LocalView>,
    #[serde(skip)]
    pub audit: Vec<AuditEntry>,
}

impl SlotReport {
    pub fn classical_bits(&self) -> usize {
        self.messages.iter().map(ClassicalMessage::bits).sum()
    }

    pub fn traffic_shape(&self) -> Vec<(NodeId, Recipient, usize)> {
        self.messages.iter().map(ClassicalMessage::shape).collect()
    }

    pub fn view(&self, node: NodeId) -> &LocalView {
        &self.views[node.0]
    }
}

/// Classical bits on the wire in one slot: a two-bit report from each
/// end-node, plus the three-bit broadcast in downlink.
pub fn classical_budget(kind: SlotKind, n: usize) -> usize {
    match kind {
        SlotKind::Uplink => 2 * n,
        SlotKind::Downlink => 2 * n + 3,
    }
}

/// The unique end-node whose W outcome is 1.
fn single_winner(w: &[bool]) -> Result<NodeId, ProtocolError> {
    let ones = w.iter().filter(|&&b| b).count();
    if ones != 1 {
        return Err(ProtocolError::Collision { ones });
    }
    Ok(NodeId(w.iter().position(|&b| b).expect("one winner") + 1))
}

#[derive(Debug, Clone)]
pub struct Contention {
    pub winner: NodeId,
    pub w: Vec<bool>,
    /// The leader-aware register after the W measurements; the ancillas now
    /// hold the winner's index.
    pub state: StateVector,
}

/// Every end-node measures its W qubit in the computational basis.
pub fn contend<S: Sampler>(
    mut leader_aware: StateVector,
    layout: &LeaderAwareLayout,
    sampler: &mut S,
) -> Result<Contention, ProtocolError> {
    if leader_aware.num_qubits() != layout.width() {
        return Err(SimError::DimensionMismatch {
            left: leader_aware.num_qubits(),
            right: layout.width(),
        }
        .into());
    }
    let mut w = Vec::with_capacity(layout.end_nodes());
    for node in 1..=layout.end_nodes() {
        w.push(
            sampler.measure(&mut leader_aware, layout.w_qubit(node), Basis::Computational)?.outcome,
        );
    }
    let winner = single_winner(&w)?;
    Ok(Contention { winner, w, state: leader_aware })
}

/// Winner index from the ancilla readout: `N_{1 + Σ a_j 2^j}`.
pub fn decode_ancilla(ancilla: &[bool], n: usize) -> Result<NodeId, ProtocolError> {
    let index = ancilla.iter().enumerate().fold(0usize, |acc, (j, &a)| acc | usize::from(a) << j);
    let decoded = index + 1;
    if decoded > n {
        return Err(ProtocolError::CorruptAncilla { decoded, n });
    }
    Ok(NodeId(decoded))
}

/// Orchestrator readout of every ancilla.
pub fn measure_ancillas<S: Sampler>(
    state: &mut StateVector,
    layout: &LeaderAwareLayout,
    sampler: &mut S,
) -> Result<Vec<bool>, ProtocolError> {
    layout
        .ancilla_qubits()
        .map(|q| Ok(sampler.measure(state, q, Basis::Computational)?.outcome))
        .collect()
}

/// Result of one stand-alone leader election.
#[derive(Debug, Clone, Serialize)]
pub struct Election {
    pub n: usize,
    pub winner: NodeId,
    #[serde(serialize_with = "crate::fmt::serialize_bits")]
    pub w: Vec<bool>,
    #[serde(serialize_with = "crate::fmt::serialize_bits")]
    pub ancilla: Vec<bool>,
    pub decoded: NodeId,
}

/// Contention on a fresh leader-aware state followed by the ancilla readout.
pub fn elect<S: Sampler>(n: usize, sampler: &mut S) -> Result<Election, ProtocolError> {
    let layout = LeaderAwareLayout::new(n)?;
    let contention = contend(prepare_leader_aware(n)?, &layout, sampler)?;
    let mut state = contention.state;
    let ancilla = measure_ancillas(&mut state, &layout, sampler)?;
    let decoded = decode_ancilla(&ancilla, n)?;
    Ok(Election { n, winner: contention.winner, w: contention.w, ancilla, decoded })
}

/// Bell-measures `payload` together with `epr_half`: CNOT from the payload,
/// H on the payload, then computational readout of both. Returns `(q*, g*)`.
pub fn teleport_send<S: Sampler>(
    state: &mut StateVector,
    payload: usize,
    epr_half: usize,
    sampler: &mut S,
) -> Result<(bool, bool), ProtocolError> {
    state.apply_cnot(payload, epr_half)?;
    state.apply_single(payload, Gate::Hadamard)?;
    let q_star = sampler.measure(state, payload, Basis::Computational)?.outcome;
    let g_star = sampler.measure(state, epr_half, Basis::Computational)?.outcome;
    Ok((q_star, g_star))
}

/// `X^{g*}` then `Z^{q* ⊕ parity}` on the receiving half. The parity term
/// repairs a `|Φ⁻⟩` resource.
pub fn teleport_receive(
    state: &mut StateVector,
    qubit: usize,
    q_star: bool,
    g_star: bool,
    parity: bool,
) -> Result<(), SimError> {
    if g_star {
        state.apply_single(qubit, Gate::PauliX)?;
    }
    if q_star ^ parity {
        state.apply_single(qubit, Gate::PauliZ)?;
    }
    Ok(())
}

struct Register {
    kind: RegisterKind,
    state: StateVector,
    owners: Vec<NodeId>,
}

/// Shared simulation state of a slot with per-node access control.
struct SlotContext {
    ghz: Register,
    leader_aware: Register,
    audit: Vec<AuditEntry>,
}

impl SlotContext {
    fn new(resources: SlotResources) -> Self {
        let layout = resources.layout;
        let n = layout.end_nodes();
        let mut la_owners: Vec<NodeId> = (1..=n).map(NodeId).collect();
        la_owners.extend(std::iter::repeat_n(NodeId::ORCHESTRATOR, layout.ancillas()));
        Self {
            ghz: Register {
                kind: RegisterKind::Ghz,
                state: resources.ghz,
                owners: (0..=n).map(NodeId).collect(),
            },
            leader_aware: Register {
                kind: RegisterKind::LeaderAware,
                state: resources.leader_aware,
                owners: la_owners,
            },
            audit: Vec::new(),
        }
    }

    fn register(&mut self, kind: RegisterKind) -> &mut Register {
        match kind {
            RegisterKind::Ghz => &mut self.ghz,
            RegisterKind::LeaderAware => &mut self.leader_aware,
        }
    }

    /// Grants `node` access to `qubits`, all of which it must hold.
    fn local(
        &mut self,
        node: NodeId,
        kind: RegisterKind,
        qubits: &[usize],
        action: Action,
    ) -> Result<&mut StateVector, ProtocolError> {
        let register = self.register(kind);
        for &qubit in qubits {
            let owner = *register
                .owners
                .get(qubit)
                .ok_or(SimError::QubitOutOfRange { qubit, num_qubits: register.owners.len() })?;
            if owner != node {
                return Err(ProtocolError::NonLocal {
                    node,
                    register: register.kind,
                    qubit,
                    owner,
                });
            }
        }
        self.audit.push(AuditEntry { node, register: kind, qubits: qubits.to_vec(), action });
        Ok(&mut self.register(kind).state)
    }

    /// Appends a locally held qubit to the GHZ register; returns its index.
    fn join(&mut self, node: NodeId, payload: &StateVector) -> usize {
        let index = self.ghz.owners.len();
        self.ghz.state = self.ghz.state.tensor(payload);
        self.ghz.owners.push(node);
        self.audit.push(AuditEntry {
            node,
            register: RegisterKind::Ghz,
            qubits: vec![index],
            action: Action::Join,
        });
        index
    }
}

fn check_payloads(payloads: &[StateVector], n: usize) -> Result<(), ProtocolError> {
    if payloads.len() != n {
        return Err(ProtocolError::InvalidPayloads(format!(
            "expected {n} payloads, got {}",
            payloads.len()
        )));
    }
    if let Some(p) = payloads.iter().find(|p| p.num_qubits() != 1) {
        return Err(ProtocolError::InvalidPayloads(format!(
            "payloads must be single qubits, got {} qubits",
            p.num_qubits()
        )));
    }
    Ok(())
}

/// Runs one complete slot on the given resources.
///
/// `payloads[i - 1]` is the qubit `N_i` sends in uplink, or the qubit the
/// orchestrator holds for `N_i` in downlink.
pub fn execute_slot<S: Sampler>(
    kind: SlotKind,
    resources: SlotResources,
    payloads: &[StateVector],
    sampler: &mut S,
) -> Result<SlotReport, ProtocolError> {
    let layout = resources.layout;
    let n = layout.end_nodes();
    check_payloads(payloads, n)?;
    let generation = resources.generation;
    let mut ctx = SlotContext::new(resources);
    let measure_w = Action::Measure { basis: Basis::Computational };
    let measure_h = Action::Measure { basis: Basis::Hadamard };

    // Contention: each end-node reads its own W qubit.
    let mut w = Vec::with_capacity(n);
    for i in 1..=n {
        let q = layout.w_qubit(i);
        let state = ctx.local(NodeId(i), RegisterKind::LeaderAware, &[q], measure_w)?;
        w.push(sampler.measure(state, q, Basis::Computational)?.outcome);
    }
    let winner = single_winner(&w)?;

    // End-node phase, ascending node id. Losers leave the GHZ state; the
    // winner teleports (uplink) or waits (downlink).
    let mut outcomes: Vec<Vec<bool>> = vec![Vec::new(); n + 1];
    let mut messages = Vec::with_capacity(n + 1);
    for i in 1..=n {
        let node = NodeId(i);
        if !w[i - 1] {
            let state = ctx.local(node, RegisterKind::Ghz, &[i], measure_h)?;
            let g = sampler.measure(state, i, Basis::Hadamard)?.outcome;
            outcomes[i].push(g);
            messages.push(ClassicalMessage::report(i, g, sampler.coin()));
            continue;
        }
        match kind {
            SlotKind::Uplink => {
                let payload = ctx.join(node, &payloads[i - 1]);
                let state =
                    ctx.local(node, RegisterKind::Ghz, &[payload, i], Action::TeleportSend)?;
                let (q_star, g_star) = teleport_send(state, payload, i, sampler)?;
                outcomes[i].extend([q_star, g_star]);
                messages.push(ClassicalMessage::report(i, g_star, q_star));
            }
            SlotKind::Downlink => {
                let (d0, d1) = (sampler.coin(), sampler.coin());
                messages.push(ClassicalMessage::report(i, d0, d1));
            }
        }
    }

    // Orchestrator: identify the winner from the ancillas alone, route its
    // report through the switch and take the loser parity from the rest.
    let mut ancilla = Vec::with_capacity(layout.ancillas());
    for q in layout.ancilla_qubits() {
        let state = ctx.local(NodeId::ORCHESTRATOR, RegisterKind::LeaderAware, &[q], measure_w)?;
        ancilla.push(sampler.measure(state, q, Basis::Computational)?.outcome);
    }
    outcomes[0].extend(&ancilla);
    let decoded = decode_ancilla(&ancilla, n)?;
    if decoded != winner {
        return Err(ProtocolError::Invariant(format!(
            "ancillas name {decoded} but {winner} won the contention"
        )));
    }
    let mut selected = None;
    let mut parity = false;
    for m in &messages {
        if let MessageBody::EndNodeReport { g, q } = m.body {
            if m.from == decoded {
                selected = Some((g, q));
            } else {
                parity ^= g;
            }
        }
    }
    let (selected_g, selected_q) = selected.expect("every end-node reports");

    let (delivered_qubit, reference) = match kind {
        SlotKind::Uplink => {
            let state =
                ctx.local(NodeId::ORCHESTRATOR, RegisterKind::Ghz, &[0], Action::TeleportReceive)?;
            teleport_receive(state, 0, selected_q, selected_g, parity)?;
            (0, &payloads[winner.0 - 1])
        }
        SlotKind::Downlink => {
            let message = &payloads[decoded.0 - 1];
            let payload = ctx.join(NodeId::ORCHESTRATOR, message);
            let state = ctx.local(
                NodeId::ORCHESTRATOR,
                RegisterKind::Ghz,
                &[payload, 0],
                Action::TeleportSend,
            )?;
            let (q_star, g0) = teleport_send(state, payload, 0, sampler)?;
            outcomes[0].extend([q_star, g0]);
            messages.push(ClassicalMessage {
                from: NodeId::ORCHESTRATOR,
                to: Recipient::Broadcast,
                body: MessageBody::OrchestratorBroadcast { q_star, g0, parity },
            });
            // Only the winner acts on the broadcast.
            let state =
                ctx.local(winner, RegisterKind::Ghz, &[winner.0], Action::TeleportReceive)?;
            teleport_receive(state, winner.0, q_star, g0, parity)?;
            (winner.0, &payloads[winner.0 - 1])
        }
    };

    let delivered = ctx.ghz.state.subsystem(&[delivered_qubit])?;
    let fidelity = delivered.fidelity(reference)?;

    let views = (0..=n)
        .map(|i| {
            let node = NodeId(i);
            LocalView {
                node,
                w: (i > 0).then(|| w[i - 1]),
                outcomes: std::mem::take(&mut outcomes[i]),
                observed: messages.iter().filter(|m| m.observed_by(node)).copied().collect(),
            }
        })
        .collect();

    Ok(SlotReport {
        generation,
        outcome: ContentionOutcome::new(kind, winner),
        w,
        ancilla,
        decoded,
        parity,
        messages,
        fidelity,
        views,
        audit: ctx.audit,
    })
}

pub fn run_slot(
    kind: SlotKind,
    n: usize,
    payloads: &[StateVector],
    seed: u64,
) -> Result<SlotReport, ProtocolError> {
    let mut rng = RandomSource::new(seed);
    execute_slot(kind, SlotResources::prepare(n, 0)?, payloads, &mut rng)
}

pub fn run_uplink_slot(
    n: usize,
    payloads: &[StateVector],
    seed: u64,
) -> Result<SlotReport, ProtocolError> {
    run_slot(SlotKind::Uplink, n, payloads, seed)
}

pub fn run_downlink_slot(
    n: usize,
    payloads: &[StateVector],
    seed: u64,
) -> Result<SlotReport, ProtocolError> {
    run_slot(SlotKind::Downlink, n, payloads, seed)
}
