//! Dense state-vector simulation.
//!
//! Qubit 0 is the leftmost label in ket notation: in a register of `N`
//! qubits, qubit `k` corresponds to bit `N - 1 - k` of the basis-state index.
//! Measured qubits stay in the register, pinned to their outcome, so indices
//! remain stable while a protocol runs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for norm and fidelity checks.
pub const TOLERANCE: f64 = 1e-10;

/// Branches with less probability than this are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("qubit {qubit} is out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("control and target are both qubit {0}")]
    SameQubit(usize),
    #[error("qubit {0} is listed more than once")]
    DuplicateQubit(usize),
    #[error("register size mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("outcome {} on qubit {qubit} has zero probability", u8::from(*outcome))]
    ZeroProbabilityBranch { qubit: usize, outcome: bool },
    #[error("invalid amplitude vector: {0}")]
    InvalidAmplitudes(String),
    #[error("qubits {0:?} are entangled with the rest of the register")]
    NotSeparable(Vec<usize>),
}

/// Single-qubit gates used by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    Identity,
    Hadamard,
    PauliX,
    PauliZ,
}

impl Gate {
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Gate::Identity => [[ONE, ZERO], [ZERO, ONE]],
            Gate::Hadamard => [[h, h], [h, -h]],
            Gate::PauliX => [[ZERO, ONE], [ONE, ZERO]],
            Gate::PauliZ => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    /// Every gate in the set is self-inverse.
    pub fn inverse(self) -> Gate {
        self
    }

    /// Mnemonic used in gate-list text.
    pub fn name(self) -> &'static str {
        match self {
            Gate::Identity => "I",
            Gate::Hadamard => "H",
            Gate::PauliX => "X",
            Gate::PauliZ => "Z",
        }
    }

    pub fn from_name(name: &str) -> Option<Gate> {
        match name {
            "I" => Some(Gate::Identity),
            "H" => Some(Gate::Hadamard),
            "X" => Some(Gate::PauliX),
            "Z" => Some(Gate::PauliZ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Computational,
    Hadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub qubit: usize,
    pub basis: Basis,
    pub outcome: bool,
    /// Probability of the recorded outcome before the measurement.
    pub probability: f64,
}

/// Seeded, reproducible source of uniform randomness.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform real in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bit(&mut self) -> bool {
        self.rng.random::<bool>()
    }
}

/// Decides measurement outcomes and classical coin flips.
///
/// [`RandomSource`] samples Born probabilities; scripted implementations
/// (see [`crate::branch`]) force outcomes to walk every branch.
pub trait Sampler {
    fn measure(
        &mut self,
        state: &mut StateVector,
        qubit: usize,
        basis: Basis,
    ) -> Result<MeasurementRecord, SimError>;

    /// A fair classical coin, used for dummy message bits.
    fn coin(&mut self) -> bool;
}

impl Sampler for RandomSource {
    fn measure(
        &mut self,
        state: &mut StateVector,
        qubit: usize,
        basis: Basis,
    ) -> Result<MeasurementRecord, SimError> {
        state.measure(qubit, basis, self)
    }

    fn coin(&mut self) -> bool {
        self.bit()
    }
}

/// One outcome branch of a multi-qubit measurement.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcomes: Vec<bool>,
    pub probability: f64,
    pub state: StateVector,
}

/// Pure state of `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state `|index⟩`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Self {
        assert!(num_qubits >= 1, "a register needs at least one qubit");
        let dim = 1usize << num_qubits;
        assert!(index < dim, "basis index {index} out of range");
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Self { num_qubits, amplitudes }
    }

    pub fn zero(num_qubits: usize) -> Self {
        Self::basis_state(num_qubits, 0)
    }

    /// Basis state from bits listed in qubit order.
    pub fn from_bits(bits: &[bool]) -> Self {
        let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
        Self::basis_state(bits.len(), index)
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, SimError> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(SimError::InvalidAmplitudes(format!(
                "length {dim} is not a power of two >= 2"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(SimError::InvalidAmplitudes(format!("squared norm is {norm}")));
        }
        Ok(Self { num_qubits: dim.trailing_zeros() as usize, amplitudes })
    }

    /// `alpha|0⟩ + beta|1⟩`, renormalized.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Self {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        assert!(norm > 0.0, "cannot normalize the zero vector");
        Self { num_qubits: 1, amplitudes: vec![alpha / norm, beta / norm] }
    }

    /// Haar-random single-qubit state: `|alpha|²` is uniform on `[0, 1]`
    /// and the relative phase is uniform on `[0, 2π)`.
    pub fn haar_random_qubit(rng: &mut RandomSource) -> Self {
        let u = rng.uniform();
        let phase = 2.0 * PI * rng.uniform();
        Self::qubit(Complex64::new(u.sqrt(), 0.0), Complex64::from_polar((1.0 - u).sqrt(), phase))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check(&self, qubit: usize) -> Result<(), SimError> {
        if qubit < self.num_qubits {
            Ok(())
        } else {
            Err(SimError::QubitOutOfRange { qubit, num_qubits: self.num_qubits })
        }
    }

    fn check_distinct(&self, qubits: &[usize]) -> Result<(), SimError> {
        for (k, &q) in qubits.iter().enumerate() {
            self.check(q)?;
            if qubits[..k].contains(&q) {
                return Err(SimError::DuplicateQubit(q));
            }
        }
        Ok(())
    }

    /// `self ⊗ other`; `self`'s qubits come first.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            amplitudes.extend(other.amplitudes.iter().map(|b| a * b));
        }
        StateVector { num_qubits: self.num_qubits + other.num_qubits, amplitudes }
    }

    pub fn apply_single(&mut self, qubit: usize, gate: Gate) -> Result<(), SimError> {
        self.check(qubit)?;
        if gate == Gate::Identity {
            return Ok(());
        }
        self.apply_matrix(qubit, gate.matrix());
        Ok(())
    }

    fn apply_matrix(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let mask = self.mask(qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
                self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
                self.amplitudes[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<(), SimError> {
        self.check(control)?;
        self.check(target)?;
        if control == target {
            return Err(SimError::SameQubit(control));
        }
        let (cm, tm) = (self.mask(control), self.mask(target));
        for i in 0..self.amplitudes.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amplitudes.swap(i, i | tm);
            }
        }
        Ok(())
    }

    /// Probability that a computational-basis measurement of `qubit` gives 1.
    pub fn probability_one(&self, qubit: usize) -> Result<f64, SimError> {
        self.check(qubit)?;
        let mask = self.mask(qubit);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects `qubit` onto `outcome` in the given basis and renormalizes.
    ///
    /// A Hadamard-basis measurement applies H and then measures in the
    /// computational basis, so the collapsed qubit is left pinned to
    /// `|outcome⟩`.
    pub fn collapse(
        &mut self,
        qubit: usize,
        basis: Basis,
        outcome: bool,
    ) -> Result<MeasurementRecord, SimError> {
        self.check(qubit)?;
        let mut rotated = self.clone();
        if basis == Basis::Hadamard {
            rotated.apply_matrix(qubit, Gate::Hadamard.matrix());
        }
        let p1 = rotated.probability_one(qubit)?;
        let probability = if outcome { p1 } else { 1.0 - p1 };
        if probability < ZERO_PROBABILITY {
            return Err(SimError::ZeroProbabilityBranch { qubit, outcome });
        }
        rotated.project(qubit, outcome, probability);
        *self = rotated;
        Ok(MeasurementRecord { qubit, basis, outcome, probability })
    }

    fn project(&mut self, qubit: usize, outcome: bool, probability: f64) {
        let mask = self.mask(qubit);
        let scale = 1.0 / probability.sqrt();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if (i & mask != 0) == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
    }

    /// Samples a measurement outcome with Born probabilities.
    pub fn measure(
        &mut self,
        qubit: usize,
        basis: Basis,
        rng: &mut RandomSource,
    ) -> Result<MeasurementRecord, SimError> {
        self.check(qubit)?;
        if basis == Basis::Hadamard {
            self.apply_matrix(qubit, Gate::Hadamard.matrix());
        }
        let p1 = self.probability_one(qubit)?;
        let outcome = rng.uniform() < p1;
        let probability = if outcome { p1 } else { 1.0 - p1 };
        self.project(qubit, outcome, probability);
        Ok(MeasurementRecord { qubit, basis, outcome, probability })
    }

    /// Every nonzero-probability outcome of measuring `qubits` in order, each
    /// in the matching basis. Outcome vectors are listed lexicographically.
    pub fn enumerate_branches(
        &self,
        qubits: &[usize],
        bases: &[Basis],
    ) -> Result<Vec<Branch>, SimError> {
        self.check_distinct(qubits)?;
        if qubits.len() != bases.len() {
            return Err(SimError::DimensionMismatch { left: qubits.len(), right: bases.len() });
        }
        let mut branches =
            vec![Branch { outcomes: Vec::new(), probability: 1.0, state: self.clone() }];
        for (&qubit, &basis) in qubits.iter().zip(bases) {
            let mut next = Vec::with_capacity(branches.len() * 2);
            for branch in branches {
                for outcome in [false, true] {
                    let mut state = branch.state.clone();
                    match state.collapse(qubit, basis, outcome) {
                        Ok(record) => {
                            let mut outcomes = branch.outcomes.clone();
                            outcomes.push(outcome);
                            next.push(Branch {
                                outcomes,
                                probability: branch.probability * record.probability,
                                state,
                            });
                        }
                        Err(SimError::ZeroProbabilityBranch { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            branches = next;
        }
        Ok(branches)
    }

    /// `|⟨reference|self⟩|²`.
    pub fn fidelity(&self, reference: &StateVector) -> Result<f64, SimError> {
        if self.num_qubits != reference.num_qubits {
            return Err(SimError::DimensionMismatch {
                left: self.num_qubits,
                right: reference.num_qubits,
            });
        }
        let overlap: Complex64 =
            reference.amplitudes.iter().zip(&self.amplitudes).map(|(r, s)| r.conj() * s).sum();
        Ok(overlap.norm_sqr())
    }

    /// Computational-basis outcome probabilities on `qubits`. Entry `k` of
    /// the result is the probability of the bit-vector whose binary value is
    /// `k`, with the first listed qubit as the most significant bit.
    pub fn marginal_distribution(&self, qubits: &[usize]) -> Result<Vec<f64>, SimError> {
        self.check_distinct(qubits)?;
        let masks: Vec<usize> = qubits.iter().map(|&q| self.mask(q)).collect();
        let mut table = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let key = masks.iter().fold(0usize, |acc, m| (acc << 1) | usize::from(i & m != 0));
            table[key] += a.norm_sqr();
        }
        Ok(table)
    }

    /// The pure state of `keep` (in the listed order) when it is in a
    /// product state with the rest of the register, up to global phase.
    pub fn subsystem(&self, keep: &[usize]) -> Result<StateVector, SimError> {
        self.check_distinct(keep)?;
        if keep.is_empty() {
            return Err(SimError::InvalidAmplitudes("empty subsystem".into()));
        }
        let keep_masks: Vec<usize> = keep.iter().map(|&q| self.mask(q)).collect();
        let keep_all = keep_masks.iter().fold(0, |acc, m| acc | m);
        let rest_masks: Vec<usize> =
            (0..self.num_qubits).map(|q| self.mask(q)).filter(|m| m & keep_all == 0).collect();

        let kdim = 1usize << keep.len();
        let rdim = 1usize << rest_masks.len();
        // Columns of the kdim x rdim coefficient matrix, one per rest configuration.
        let mut columns = vec![vec![ZERO; kdim]; rdim];
        for (i, &a) in self.amplitudes.iter().enumerate() {
            let k = keep_masks.iter().fold(0usize, |acc, m| (acc << 1) | usize::from(i & m != 0));
            let r = rest_masks.iter().fold(0usize, |acc, m| (acc << 1) | usize::from(i & m != 0));
            columns[r][k] = a;
        }
        let norm_of = |c: &[Complex64]| c.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let best = columns
            .iter()
            .max_by(|a, b| norm_of(a).total_cmp(&norm_of(b)))
            .expect("at least one column");
        let norm = norm_of(best).sqrt();
        let candidate: Vec<Complex64> = best.iter().map(|a| a / norm).collect();

        // Rank one iff every column is parallel to the candidate.
        let captured: f64 = columns
            .iter()
            .map(|c| {
                candidate.iter().zip(c).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
            })
            .sum();
        if (captured - self.norm_sqr()).abs() > TOLERANCE {
            return Err(SimError::NotSeparable(keep.to_vec()));
        }
        Ok(StateVector { num_qubits: keep.len(), amplitudes: candidate })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < TOLERANCE
    }

    fn bell_plus() -> StateVector {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        StateVector::from_amplitudes(vec![h, ZERO, ZERO, h]).unwrap()
    }

    fn bell_minus() -> StateVector {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        StateVector::from_amplitudes(vec![h, ZERO, ZERO, -h]).unwrap()
    }

    fn ghz3() -> StateVector {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let mut amps = vec![ZERO; 8];
        amps[0] = h;
        amps[7] = h;
        StateVector::from_amplitudes(amps).unwrap()
    }

    fn w4() -> StateVector {
        let mut amps = vec![ZERO; 16];
        for i in 0..4 {
            amps[1 << i] = Complex64::new(0.5, 0.0);
        }
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn tensor_of_basis_states() {
        let s = StateVector::zero(1).tensor(&StateVector::basis_state(1, 1));
        assert_eq!(s.num_qubits(), 2);
        assert_eq!(s.amplitude(0b01), ONE);
    }

    #[test]
    fn tensor_bell_with_zero() {
        let s = bell_plus().tensor(&StateVector::zero(1));
        assert!(approx(s.amplitude(0b000).re, FRAC_1_SQRT_2));
        assert!(approx(s.amplitude(0b110).re, FRAC_1_SQRT_2));
        assert!(approx(s.norm_sqr(), 1.0));
    }

    #[test]
    fn tensor_payload_with_ghz_is_normalized() {
        let payload = StateVector::qubit(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let s = payload.tensor(&ghz3());
        assert_eq!(s.num_qubits(), 4);
        assert!(approx(s.norm_sqr(), 1.0));
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::zero(1);
        s.apply_single(0, Gate::Hadamard).unwrap();
        assert!(approx(s.amplitude(0).re, FRAC_1_SQRT_2));
        assert!(approx(s.amplitude(1).re, FRAC_1_SQRT_2));
    }

    #[test]
    fn identity_is_a_no_op() {
        let mut s = w4();
        s.apply_single(2, Gate::Identity).unwrap();
        assert_eq!(s, w4());
    }

    #[test]
    fn middle_hadamard_on_ghz3() {
        // (|000⟩ + |111⟩)/√2 under I⊗H⊗I expands to
        // (|000⟩ + |010⟩ + |101⟩ − |111⟩)/2.
        let mut s = ghz3();
        s.apply_single(1, Gate::Hadamard).unwrap();
        let expected = [0.5, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, -0.5];
        for (i, e) in expected.iter().enumerate() {
            assert!(approx(s.amplitude(i).re, *e), "index {i}");
            assert!(approx(s.amplitude(i).im, 0.0));
        }
    }

    #[test]
    fn single_gate_rejects_bad_index() {
        let mut s = StateVector::zero(2);
        assert_eq!(
            s.apply_single(2, Gate::Hadamard),
            Err(SimError::QubitOutOfRange { qubit: 2, num_qubits: 2 })
        );
    }

    #[test]
    fn cnot_definition() {
        let mut s = StateVector::basis_state(2, 0b10);
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s.amplitude(0b11), ONE);
        let mut s = StateVector::zero(2);
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s.amplitude(0b00), ONE);
    }

    #[test]
    fn cnot_errors() {
        let mut s = StateVector::zero(2);
        assert_eq!(s.apply_cnot(1, 1), Err(SimError::SameQubit(1)));
        assert!(matches!(s.apply_cnot(0, 5), Err(SimError::QubitOutOfRange { .. })));
    }

    #[test]
    fn measure_uniform_superposition() {
        let mut ones = 0;
        let mut rng = RandomSource::new(11);
        for _ in 0..2000 {
            let mut s = StateVector::zero(1);
            s.apply_single(0, Gate::Hadamard).unwrap();
            let r = s.measure(0, Basis::Computational, &mut rng).unwrap();
            assert!(approx(r.probability, 0.5));
            ones += usize::from(r.outcome);
        }
        assert!((900..1100).contains(&ones), "{ones}");
    }

    #[test]
    fn hadamard_basis_measure_of_plus_is_deterministic() {
        let mut rng = RandomSource::new(3);
        for _ in 0..50 {
            let mut s = StateVector::zero(1);
            s.apply_single(0, Gate::Hadamard).unwrap();
            let r = s.measure(0, Basis::Hadamard, &mut rng).unwrap();
            assert!(!r.outcome);
            assert!(approx(r.probability, 1.0));
        }
    }

    #[test]
    fn w_qubit_reads_one_with_probability_quarter() {
        let s = w4();
        assert!(approx(s.probability_one(1).unwrap(), 0.25));
        let mut t = s.clone();
        let r = t.collapse(1, Basis::Computational, true).unwrap();
        assert!(approx(r.probability, 0.25));
        assert_eq!(t, StateVector::basis_state(4, 0b0100));
    }

    #[test]
    fn collapse_rejects_impossible_outcome() {
        let mut s = StateVector::zero(2);
        assert_eq!(
            s.collapse(0, Basis::Computational, true),
            Err(SimError::ZeroProbabilityBranch { qubit: 0, outcome: true })
        );
        assert_eq!(s, StateVector::zero(2));
    }

    #[test]
    fn branches_of_bell_qubit() {
        let b = bell_plus().enumerate_branches(&[0], &[Basis::Computational]).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|x| approx(x.probability, 0.5)));
    }

    #[test]
    fn branches_of_w4_are_one_hot() {
        let b = w4().enumerate_branches(&[0, 1, 2, 3], &[Basis::Computational; 4]).unwrap();
        assert_eq!(b.len(), 4);
        for x in &b {
            assert!(approx(x.probability, 0.25));
            assert_eq!(x.outcomes.iter().filter(|&&o| o).count(), 1);
        }
    }

    #[test]
    fn fidelity_cases() {
        assert!(approx(w4().fidelity(&w4()).unwrap(), 1.0));
        assert!(approx(
            StateVector::zero(1).fidelity(&StateVector::basis_state(1, 1)).unwrap(),
            0.0
        ));
        assert!(approx(bell_plus().fidelity(&bell_minus()).unwrap(), 0.0));
        assert_eq!(
            bell_plus().fidelity(&StateVector::zero(1)),
            Err(SimError::DimensionMismatch { left: 2, right: 1 })
        );
    }

    #[test]
    fn marginals() {
        let m = ghz3().marginal_distribution(&[1]).unwrap();
        assert!(approx(m[0], 0.5) && approx(m[1], 0.5));
        let m = w4().marginal_distribution(&[2]).unwrap();
        assert!(approx(m[0], 0.75) && approx(m[1], 0.25));
        assert_eq!(ghz3().marginal_distribution(&[0, 0]), Err(SimError::DuplicateQubit(0)));
    }

    #[test]
    fn subsystem_of_product_and_entangled_states() {
        let payload = StateVector::qubit(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let joint = StateVector::basis_state(2, 0b10).tensor(&payload);
        let back = joint.subsystem(&[2]).unwrap();
        assert!(approx(back.fidelity(&payload).unwrap(), 1.0));
        let pair = bell_plus().tensor(&StateVector::basis_state(1, 1)).subsystem(&[0, 1]).unwrap();
        assert!(approx(pair.fidelity(&bell_plus()).unwrap(), 1.0));
        assert_eq!(ghz3().subsystem(&[0]), Err(SimError::NotSeparable(vec![0])));
    }

    #[test]
    fn gates_are_unitary() {
        for gate in [Gate::Identity, Gate::Hadamard, Gate::PauliX, Gate::PauliZ] {
            let m = gate.matrix();
            for r in 0..2 {
                for c in 0..2 {
                    let v: Complex64 = (0..2).map(|k| m[k][r].conj() * m[k][c]).sum();
                    let expect = if r == c { ONE } else { ZERO };
                    assert!((v - expect).norm() < 1e-12, "{gate:?}");
                }
            }
            assert_eq!(Gate::from_name(gate.name()), Some(gate));
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        let xs: Vec<f64> = (0..16).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..16).map(|_| b.uniform()).collect();
        assert_eq!(xs, ys);
    }
}
