//! Exhaustive exploration of every execution branch of a randomized run.
//!
//! A run is any closure that takes its measurement outcomes and coin flips
//! from a [`Sampler`]. [`explore`] replays the closure with scripted
//! decisions, depth first, until every sequence of decisions with nonzero
//! probability has been visited exactly once.

use crate::sim::{Basis, MeasurementRecord, Sampler, SimError, StateVector};

/// Errors that can signal an impossible branch.
pub trait BranchError {
    fn is_zero_probability(&self) -> bool;
}

impl BranchError for SimError {
    fn is_zero_probability(&self) -> bool {
        matches!(self, SimError::ZeroProbabilityBranch { .. })
    }
}

/// A sampler that follows a fixed decision prefix and answers `false` past it.
#[derive(Debug, Clone)]
pub struct BranchScript {
    choices: Vec<bool>,
    cursor: usize,
    probability: f64,
}

impl BranchScript {
    pub fn new(prefix: Vec<bool>) -> Self {
        Self { choices: prefix, cursor: 0, probability: 1.0 }
    }

    fn next(&mut self) -> bool {
        if self.cursor == self.choices.len() {
            self.choices.push(false);
        }
        let c = self.choices[self.cursor];
        self.cursor += 1;
        c
    }

    /// Probability of the decisions taken so far.
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn consumed(&self) -> &[bool] {
        &self.choices[..self.cursor]
    }
}

impl Sampler for BranchScript {
    fn measure(
        &mut self,
        state: &mut StateVector,
        qubit: usize,
        basis: Basis,
    ) -> Result<MeasurementRecord, SimError> {
        let outcome = self.next();
        let record = state.collapse(qubit, basis, outcome)?;
        self.probability *= record.probability;
        Ok(record)
    }

    fn coin(&mut self) -> bool {
        self.probability *= 0.5;
        self.next()
    }
}

/// One complete execution of an explored run.
#[derive(Debug, Clone)]
pub struct Explored<T> {
    pub value: T,
    pub probability: f64,
    pub choices: Vec<bool>,
}

/// Runs `run` once per nonzero-probability decision sequence, in
/// lexicographic order of the decisions. Branches that hit a
/// zero-probability outcome are dropped; any other error aborts.
pub fn explore<T, E, F>(mut run: F) -> Result<Vec<Explored<T>>, E>
where
    E: BranchError,
    F: FnMut(&mut BranchScript) -> Result<T, E>,
{
    let mut out = Vec::new();
    let mut pending = vec![Vec::new()];
    while let Some(prefix) = pending.pop() {
        let fixed = prefix.len();
        let mut script = BranchScript::new(prefix);
        let result = run(&mut script);
        let consumed = script.consumed();
        for k in fixed..consumed.len() {
            if !consumed[k] {
                let mut alt = consumed[..k].to_vec();
                alt.push(true);
                pending.push(alt);
            }
        }
        match result {
            Ok(value) => out.push(Explored {
                value,
                probability: script.probability(),
                choices: script.consumed().to_vec(),
            }),
            Err(e) if e.is_zero_probability() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Gate;

    #[test]
    fn coins_enumerate_all_sequences_in_order() {
        let runs =
            explore(|s: &mut BranchScript| -> Result<_, SimError> { Ok((s.coin(), s.coin())) })
                .unwrap();
        let values: Vec<_> = runs.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![(false, false), (false, true), (true, false), (true, true)]);
        assert!(runs.iter().all(|r| (r.probability - 0.25).abs() < 1e-15));
    }

    #[test]
    fn impossible_outcomes_are_pruned() {
        // Bell pair: the second measurement is fixed by the first.
        let runs = explore(|s: &mut BranchScript| {
            let mut st = StateVector::zero(2);
            st.apply_single(0, Gate::Hadamard)?;
            st.apply_cnot(0, 1)?;
            let a = s.measure(&mut st, 0, Basis::Computational)?.outcome;
            let b = s.measure(&mut st, 1, Basis::Computational)?.outcome;
            Ok::<_, SimError>((a, b))
        })
        .unwrap();
        let values: Vec<_> = runs.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![(false, false), (true, true)]);
        let total: f64 = runs.iter().map(|r| r.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn branch_count_can_depend_on_earlier_outcomes() {
        let runs = explore(|s: &mut BranchScript| -> Result<_, SimError> {
            let first = s.coin();
            let second = if first { Some(s.coin()) } else { None };
            Ok((first, second))
        })
        .unwrap();
        assert_eq!(runs.len(), 3);
        let total: f64 = runs.iter().map(|r| r.probability).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn other_errors_abort() {
        let res = explore(|s: &mut BranchScript| {
            let mut st = StateVector::zero(1);
            s.measure(&mut st, 3, Basis::Computational)
        });
        assert!(matches!(res, Err(SimError::QubitOutOfRange { .. })));
    }
}
