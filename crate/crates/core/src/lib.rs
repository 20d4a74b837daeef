//! Entanglement access control for a star quantum network.
//!
//! An orchestrator `N_0` and `n` end-nodes share two resources per time slot:
//! an `(n+1)`-qubit GHZ state used as the communication resource and a
//! leader-aware state (a W state plus `⌈log2 n⌉` orchestrator-held ancillas)
//! used to resolve contention. Measuring the W qubits elects exactly one
//! end-node, the ancillas tell the orchestrator who won, and the losers
//! vacate the GHZ state with Hadamard-basis measurements, leaving an EPR pair
//! between the winner and the orchestrator that is then consumed by
//! teleportation in either direction.
//!
//! Everything runs on an exact dense state-vector simulator ([`sim`]).

pub mod branch;
pub mod circuits;
pub mod extraction;
pub mod fmt;
pub mod harness;
pub mod protocol;
pub mod sim;

pub use circuits::{GateEntry, GateList, LeaderAwareLayout};
pub use extraction::{ExtractionResult, PSequence};
pub use harness::{PayloadPolicy, SessionConfig, SessionStats, TraceRecord};
pub use protocol::{ClassicalMessage, ContentionOutcome, NodeId, SlotKind, SlotReport};
pub use sim::{Basis, Gate, MeasurementRecord, RandomSource, Sampler, SimError, StateVector};
