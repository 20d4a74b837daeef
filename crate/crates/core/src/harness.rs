//! Slotted sessions and batch experiments.
//!
//! A session repeats a pattern of uplink and downlink slots for a number of
//! trials. Every slot gets freshly prepared resources. Trial `t` draws all
//! of its randomness from a generator seeded with `seed ^ t`, so trials can
//! run in parallel and still merge into the same trace.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::branch::explore;
use crate::protocol::{
    classical_budget, elect, execute_slot, ClassicalMessage, NodeId, ProtocolError, SlotKind,
    SlotResources,
};
use crate::sim::{RandomSource, StateVector};

/// Largest network the exhaustive anonymity check accepts.
pub const MAX_EXHAUSTIVE_NODES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadPolicy {
    /// A fresh Haar-random qubit per end-node and slot.
    HaarRandom,
    /// `N_i` always uses `|i mod 2⟩`.
    FixedBasis,
}

impl PayloadPolicy {
    fn payloads(self, n: usize, rng: &mut RandomSource) -> Vec<StateVector> {
        match self {
            PayloadPolicy::HaarRandom => {
                (0..n).map(|_| StateVector::haar_random_qubit(rng)).collect()
            }
            PayloadPolicy::FixedBasis => {
                (1..=n).map(|i| StateVector::basis_state(1, i % 2)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionConfig {
    pub n: usize,
    pub slots: Vec<SlotKind>,
    pub trials: usize,
    pub seed: u64,
    pub payloads: PayloadPolicy,
}

impl SessionConfig {
    /// One trial of a downlink slot followed by an uplink slot.
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            slots: vec![SlotKind::Downlink, SlotKind::Uplink],
            trials: 1,
            seed,
            payloads: PayloadPolicy::HaarRandom,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n == 0 {
            return Err(HarnessError::InvalidConfig("n must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.slots.is_empty() {
            return Err(HarnessError::InvalidConfig("slot pattern is empty".into()));
        }
        Ok(())
    }
}

/// One line of the session trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub trial: usize,
    pub slot: usize,
    pub kind: SlotKind,
    /// Distribution round of the resources consumed by this slot.
    pub generation: u64,
    pub winner: NodeId,
    pub transmitter: NodeId,
    pub receiver: NodeId,
    pub w: String,
    pub ancilla: String,
    pub decoded: NodeId,
    pub parity: bool,
    pub messages: Vec<ClassicalMessage>,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub fidelity: f64,
}

impl TraceRecord {
    pub fn classical_bits(&self) -> usize {
        self.messages.iter().map(ClassicalMessage::bits).sum()
    }
}

/// Pearson goodness-of-fit against the uniform distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub statistic: f64,
    pub dof: usize,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub p_value: f64,
}

impl ChiSquare {
    pub fn uniform(counts: &[u64]) -> Option<Self> {
        let total: u64 = counts.iter().sum();
        if counts.len() < 2 || total == 0 {
            return None;
        }
        let expected = total as f64 / counts.len() as f64;
        let statistic =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum::<f64>();
        let dof = counts.len() - 1;
        Some(Self { statistic, dof, p_value: chi_square_sf(statistic, dof) })
    }

    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// Upper tail `P(X >= x)` of a chi-square variable with `dof >= 1` degrees
/// of freedom, using the finite series of the regularized upper incomplete
/// gamma function at integer and half-integer shape.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    assert!(dof >= 1, "chi-square needs at least one degree of freedom");
    if x <= 0.0 {
        return 1.0;
    }
    let half = x / 2.0;
    let (mut sum, mut term, first, steps) = if dof.is_multiple_of(2) {
        (0.0, 1.0, 0.0, dof / 2)
    } else {
        let t = 2.0 * half.sqrt() / std::f64::consts::PI.sqrt();
        (libm::erfc(half.sqrt()), t, 0.5, (dof - 1) / 2)
    };
    // term_i = half^(i + first) / Γ(i + first + 1), scaled by e^{-half} below.
    let mut series = 0.0;
    for i in 0..steps {
        series += term;
        term *= half / (i as f64 + first + 1.0);
    }
    sum += (-half).exp() * series;
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotKindStats {
    pub kind: SlotKind,
    pub slots: usize,
    /// Wins of `N_1..N_n`.
    pub histogram: Vec<u64>,
    pub chi_square: Option<ChiSquare>,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub fidelity_min: f64,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub fidelity_mean: f64,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub fidelity_max: f64,
    pub messages: usize,
    pub classical_bits: usize,
    /// Same senders, recipients and sizes in every slot of this kind.
    pub traffic_shape_uniform: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStats {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub pattern: Vec<SlotKind>,
    pub per_kind: Vec<SlotKindStats>,
    /// No two slots consumed resources from the same distribution round.
    pub resources_fresh: bool,
    /// Exhaustive anonymity check, run for small networks only.
    pub anonymity: Vec<AnonymityReport>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub stats: SessionStats,
    pub trace: Vec<TraceRecord>,
}

impl Session {
    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.trace {
            out.push_str(&serde_json::to_string(record).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

fn run_trial(config: &SessionConfig, trial: usize) -> Result<Vec<TraceRecord>, ProtocolError> {
    let mut rng = RandomSource::new(config.seed ^ trial as u64);
    let per_trial = config.slots.len();
    config
        .slots
        .iter()
        .enumerate()
        .map(|(slot, &kind)| {
            let payloads = config.payloads.payloads(config.n, &mut rng);
            let generation = (trial * per_trial + slot) as u64;
            let resources = SlotResources::prepare(config.n, generation)?;
            let report = execute_slot(kind, resources, &payloads, &mut rng)?;
            Ok(TraceRecord {
                trial,
                slot,
                kind,
                generation: report.generation,
                winner: report.outcome.winner,
                transmitter: report.outcome.transmitter,
                receiver: report.outcome.receiver,
                w: crate::fmt::bitstring(&report.w),
                ancilla: crate::fmt::bitstring(&report.ancilla),
                decoded: report.decoded,
                parity: report.parity,
                messages: report.messages,
                fidelity: report.fidelity,
            })
        })
        .collect()
}

fn kind_stats(kind: SlotKind, n: usize, trace: &[TraceRecord]) -> Option<SlotKindStats> {
    let records: Vec<&TraceRecord> = trace.iter().filter(|r| r.kind == kind).collect();
    if records.is_empty() {
        return None;
    }
    let mut histogram = vec![0u64; n];
    for r in &records {
        histogram[r.winner.0 - 1] += 1;
    }
    let fidelities = records.iter().map(|r| r.fidelity);
    let shapes: BTreeSet<Vec<_>> =
        records.iter().map(|r| r.messages.iter().map(ClassicalMessage::shape).collect()).collect();
    Some(SlotKindStats {
        kind,
        slots: records.len(),
        chi_square: ChiSquare::uniform(&histogram),
        histogram,
        fidelity_min: fidelities.clone().fold(f64::INFINITY, f64::min),
        fidelity_mean: fidelities.clone().sum::<f64>() / records.len() as f64,
        fidelity_max: fidelities.fold(f64::NEG_INFINITY, f64::max),
        messages: records.iter().map(|r| r.messages.len()).sum(),
        classical_bits: records.iter().map(|r| r.classical_bits()).sum(),
        traffic_shape_uniform: shapes.len() == 1,
    })
}

/// Runs every trial of the session and aggregates the results. Identical
/// configurations give identical traces regardless of thread count.
pub fn run_session(config: &SessionConfig) -> Result<Session, HarnessError> {
    config.validate()?;
    let trials: Vec<Vec<TraceRecord>> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect::<Result<_, _>>()?;
    let trace: Vec<TraceRecord> = trials.into_iter().flatten().collect();

    let generations: BTreeSet<u64> = trace.iter().map(|r| r.generation).collect();
    let kinds: BTreeSet<SlotKind> = config.slots.iter().copied().collect();
    let anonymity = if (3..=4).contains(&config.n) {
        kinds.iter().map(|&k| anonymity_experiment(config.n, k)).collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let stats = SessionStats {
        n: config.n,
        trials: config.trials,
        seed: config.seed,
        pattern: config.slots.clone(),
        per_kind: kinds.iter().filter_map(|&k| kind_stats(k, config.n, &trace)).collect(),
        resources_fresh: generations.len() == trace.len(),
        anonymity,
    };
    Ok(Session { stats, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub histogram: Vec<u64>,
    pub chi_square: ChiSquare,
    /// Trials where the ancilla readout named someone other than the winner.
    pub decode_mismatches: usize,
}

/// Repeated stand-alone elections; the histogram is tested against the
/// uniform distribution with `n - 1` degrees of freedom.
pub fn fairness_experiment(
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<FairnessReport, HarnessError> {
    if n < 2 {
        return Err(HarnessError::InvalidConfig("fairness needs at least 2 end-nodes".into()));
    }
    if trials == 0 {
        return Err(HarnessError::InvalidConfig("trials must be at least 1".into()));
    }
    let elections = (0..trials)
        .into_par_iter()
        .map(|t| elect(n, &mut RandomSource::new(seed ^ t as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut histogram = vec![0u64; n];
    let mut decode_mismatches = 0;
    for e in &elections {
        histogram[e.winner.0 - 1] += 1;
        decode_mismatches += usize::from(e.decoded != e.winner);
    }
    let chi_square = ChiSquare::uniform(&histogram).expect("n >= 2 and trials >= 1");
    Ok(FairnessReport { n, trials, seed, histogram, chi_square, decode_mismatches })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoserPosterior {
    pub node: NodeId,
    /// Distinct local views this node can end up with while losing.
    pub views: usize,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnonymityReport {
    pub n: usize,
    pub kind: SlotKind,
    pub branches: usize,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub total_probability: f64,
    /// With fewer than two other end-nodes there is nobody to hide among.
    pub vacuous: bool,
    /// Largest gap between a loser's posterior over the winner and uniform.
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub max_deviation: f64,
    pub losers: Vec<LoserPosterior>,
    /// Message senders, recipients and sizes are the same in every branch.
    pub traffic_shape_uniform: bool,
    pub classical_bits: usize,
    #[serde(serialize_with = "crate::fmt::serialize_sig12")]
    pub min_fidelity: f64,
}

/// Enumerates every branch of one slot and, for each end-node, the
/// posterior over the winner given everything that node saw while losing.
pub fn anonymity_experiment(n: usize, kind: SlotKind) -> Result<AnonymityReport, HarnessError> {
    if n == 0 || n > MAX_EXHAUSTIVE_NODES {
        return Err(HarnessError::InvalidConfig(format!(
            "exhaustive enumeration supports 1..={MAX_EXHAUSTIVE_NODES} end-nodes, got {n}"
        )));
    }
    let payloads = PayloadPolicy::HaarRandom.payloads(n, &mut RandomSource::new(n as u64));
    let branches =
        explore(|script| execute_slot(kind, SlotResources::prepare(n, 0)?, &payloads, script))?;

    let total_probability = branches.iter().map(|b| b.probability).sum();
    let shapes: BTreeSet<Vec<_>> = branches.iter().map(|b| b.value.traffic_shape()).collect();
    let bits: BTreeSet<usize> = branches.iter().map(|b| b.value.classical_bits()).collect();
    let min_fidelity = branches.iter().map(|b| b.value.fidelity).fold(f64::INFINITY, f64::min);

    let vacuous = n <= 2;
    let mut losers = Vec::with_capacity(n);
    for node in (1..=n).map(NodeId) {
        // view -> probability mass per winner index
        let mut table: BTreeMap<_, Vec<f64>> = BTreeMap::new();
        for b in branches.iter().filter(|b| b.value.outcome.winner != node) {
            let mass = table.entry(b.value.view(node)).or_insert_with(|| vec![0.0; n + 1]);
            mass[b.value.outcome.winner.0] += b.probability;
        }
        let mut max_deviation: f64 = 0.0;
        if !vacuous {
            let uniform = 1.0 / (n - 1) as f64;
            for mass in table.values() {
                let total: f64 = mass.iter().sum();
                for j in (1..=n).filter(|&j| j != node.0) {
                    max_deviation = max_deviation.max((mass[j] / total - uniform).abs());
                }
            }
        }
        losers.push(LoserPosterior { node, views: table.len(), max_deviation });
    }
    let max_deviation = losers.iter().map(|l| l.max_deviation).fold(0.0, f64::max);

    Ok(AnonymityReport {
        n,
        kind,
        branches: branches.len(),
        total_probability,
        vacuous,
        max_deviation,
        losers,
        traffic_shape_uniform: shapes.len() == 1 && bits.len() == 1,
        classical_bits: classical_budget(kind, n),
        min_fidelity,
    })
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("ascii output")
}

/// `node,count` rows for a fairness histogram.
pub fn fairness_csv(report: &FairnessReport) -> String {
    csv_string(|w| {
        w.write_record(["node", "count"])?;
        for (i, c) in report.histogram.iter().enumerate() {
            w.write_record([(i + 1).to_string(), c.to_string()])?;
        }
        Ok(())
    })
}

/// `slot,node,count` rows, one block per slot type.
pub fn session_csv(stats: &SessionStats) -> String {
    csv_string(|w| {
        w.write_record(["slot", "node", "count"])?;
        for k in &stats.per_kind {
            for (i, c) in k.histogram.iter().enumerate() {
                w.write_record([k.kind.name().to_string(), (i + 1).to_string(), c.to_string()])?;
            }
        }
        Ok(())
    })
}
