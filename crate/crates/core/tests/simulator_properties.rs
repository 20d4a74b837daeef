use eac_core::circuits::{prepare_ghz, prepare_leader_aware, prepare_w, LeaderAwareLayout};
use eac_core::sim::{Basis, Gate, RandomSource, StateVector, TOLERANCE};
use num_complex::Complex64;
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Single(usize, Gate),
    Cnot(usize, usize),
}

fn gate() -> impl Strategy<Value = Gate> {
    prop_oneof![Just(Gate::Identity), Just(Gate::Hadamard), Just(Gate::PauliX), Just(Gate::PauliZ)]
}

fn ops(width: usize) -> impl Strategy<Value = Vec<Op>> {
    let op = prop_oneof![
        (0..width, gate()).prop_map(|(q, g)| Op::Single(q, g)),
        (0..width, 0..width)
            .prop_filter("distinct", |(c, t)| c != t)
            .prop_map(|(c, t)| Op::Cnot(c, t)),
    ];
    prop::collection::vec(op, 0..40)
}

fn random_state(width: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << width)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            let amps = v.into_iter().map(|(a, b)| Complex64::new(a / norm, b / norm)).collect();
            StateVector::from_amplitudes(amps).unwrap()
        })
}

fn apply(state: &mut StateVector, ops: &[Op]) {
    for op in ops {
        match *op {
            Op::Single(q, g) => state.apply_single(q, g).unwrap(),
            Op::Cnot(c, t) => state.apply_cnot(c, t).unwrap(),
        }
    }
}

proptest! {
    #[test]
    fn gates_and_measurements_preserve_norm(
        start in random_state(4),
        seq in ops(4),
        measured in prop::collection::vec((0usize..4, any::<bool>()), 0..4),
        seed in any::<u64>(),
    ) {
        let mut s = start;
        apply(&mut s, &seq);
        prop_assert!((s.norm_sqr() - 1.0).abs() < TOLERANCE);
        let mut rng = RandomSource::new(seed);
        for (q, hadamard) in measured {
            let basis = if hadamard { Basis::Hadamard } else { Basis::Computational };
            s.measure(q, basis, &mut rng).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < TOLERANCE);
        }
    }

    #[test]
    fn inverse_sequence_restores_state(start in random_state(4), seq in ops(4)) {
        let mut s = start.clone();
        apply(&mut s, &seq);
        let inverse: Vec<Op> = seq
            .iter()
            .rev()
            .map(|op| match *op {
                Op::Single(q, g) => Op::Single(q, g.inverse()),
                Op::Cnot(c, t) => Op::Cnot(c, t),
            })
            .collect();
        apply(&mut s, &inverse);
        prop_assert!((s.fidelity(&start).unwrap() - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn hadamard_basis_is_h_then_computational(start in random_state(3), q in 0usize..3) {
        let direct = start.enumerate_branches(&[q], &[Basis::Hadamard]).unwrap();
        let mut rotated = start.clone();
        rotated.apply_single(q, Gate::Hadamard).unwrap();
        let via_h = rotated.enumerate_branches(&[q], &[Basis::Computational]).unwrap();
        prop_assert_eq!(direct.len(), via_h.len());
        for (a, b) in direct.iter().zip(&via_h) {
            prop_assert_eq!(&a.outcomes, &b.outcomes);
            prop_assert!((a.probability - b.probability).abs() < TOLERANCE);
            prop_assert!((a.state.fidelity(&b.state).unwrap() - 1.0).abs() < TOLERANCE);
        }
    }

    #[test]
    fn branch_probabilities_sum_to_one(start in random_state(4), k in 1usize..=4) {
        let qubits: Vec<usize> = (0..k).collect();
        let branches = start.enumerate_branches(&qubits, &vec![Basis::Computational; k]).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < TOLERANCE);
        let marginal = start.marginal_distribution(&qubits).unwrap();
        for b in &branches {
            let key = b.outcomes.iter().fold(0usize, |acc, &o| (acc << 1) | usize::from(o));
            prop_assert!((marginal[key] - b.probability).abs() < TOLERANCE);
        }
    }

    #[test]
    fn tensor_product_is_normalized(a in random_state(1), b in random_state(3)) {
        let t = a.tensor(&b);
        prop_assert_eq!(t.num_qubits(), 4);
        prop_assert!((t.norm_sqr() - 1.0).abs() < TOLERANCE);
        prop_assert!((t.subsystem(&[0]).unwrap().fidelity(&a).unwrap() - 1.0).abs() < TOLERANCE);
    }

    #[test]
    fn ghz_is_invariant_under_qubit_relabeling(q in 2usize..8, a in 0usize..8, b in 0usize..8) {
        let (a, b) = (a % q, b % q);
        let ghz = prepare_ghz(q).unwrap();
        let mut swapped = ghz.clone();
        if a != b {
            // SWAP from three CNOTs.
            swapped.apply_cnot(a, b).unwrap();
            swapped.apply_cnot(b, a).unwrap();
            swapped.apply_cnot(a, b).unwrap();
        }
        prop_assert_eq!(swapped, ghz);
    }
}

#[test]
fn sampled_frequencies_match_enumerated_probabilities() {
    // Three-sigma binomial bound at 10^5 samples.
    let mut state = prepare_w(3).unwrap();
    state.apply_single(0, Gate::Hadamard).unwrap();
    state.apply_cnot(0, 2).unwrap();
    let branches = state.enumerate_branches(&[0, 1, 2], &[Basis::Computational; 3]).unwrap();
    let samples = 100_000;
    let mut counts = [0u64; 8];
    let mut rng = RandomSource::new(2024);
    for _ in 0..samples {
        let mut s = state.clone();
        let key = (0..3).fold(0usize, |acc, q| {
            (acc << 1) | usize::from(s.measure(q, Basis::Computational, &mut rng).unwrap().outcome)
        });
        counts[key] += 1;
    }
    for b in branches {
        let key = b.outcomes.iter().fold(0usize, |acc, &o| (acc << 1) | usize::from(o));
        let sigma = (samples as f64 * b.probability * (1.0 - b.probability)).sqrt();
        let expected = samples as f64 * b.probability;
        assert!(
            (counts[key] as f64 - expected).abs() <= 3.0 * sigma,
            "outcome {key:03b}: {} vs {expected}",
            counts[key]
        );
    }
}

#[test]
fn w_marginals_for_every_size() {
    for n in 1..=10 {
        let w = prepare_w(n).unwrap();
        for q in 0..n {
            let m = w.marginal_distribution(&[q]).unwrap();
            assert!((m[1] - 1.0 / n as f64).abs() < TOLERANCE);
            assert!((m[0] - (n - 1) as f64 / n as f64).abs() < TOLERANCE);
        }
    }
}

#[test]
fn leader_aware_state_shape_and_truth_table() {
    for n in 2..=10 {
        let layout = LeaderAwareLayout::new(n).unwrap();
        let s = prepare_leader_aware(n).unwrap();
        let terms: Vec<usize> =
            (0..s.amplitudes().len()).filter(|&i| s.amplitude(i).norm() > TOLERANCE).collect();
        assert_eq!(terms.len(), n);
        let amp = 1.0 / (n as f64).sqrt();
        for &i in &terms {
            assert!((s.amplitude(i).re - amp).abs() < TOLERANCE);
            let bits: Vec<bool> =
                (0..layout.width()).map(|q| i >> (layout.width() - 1 - q) & 1 == 1).collect();
            let node = bits[..n].iter().position(|&b| b).unwrap() + 1;
            assert_eq!(bits[..n].iter().filter(|&&b| b).count(), 1);
            let encoded: usize =
                bits[n..].iter().enumerate().map(|(j, &b)| usize::from(b) << j).sum();
            assert_eq!(encoded, node - 1, "n={n} node={node}");
        }
    }
}

#[test]
fn ancilla_pair_of_four_node_state_is_uniform() {
    let m = prepare_leader_aware(4).unwrap().marginal_distribution(&[4, 5]).unwrap();
    assert!(m.iter().all(|p| (p - 0.25).abs() < TOLERANCE));
}
