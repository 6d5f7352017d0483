//! Pieces shared by every solver: the capacity pre-check and best-candidate
//! bookkeeping over fully evaluated allocations.

use crate::model::{Instance, SolveReport};
use crate::scalar::Scalar;

/// `Σ_n r_{k,n}(0)` per user: the rate user `k` would get holding every
/// subcarrier with all power sent to the decoder.
pub fn max_secrecy_capacity<T: Scalar>(inst: &Instance<T>) -> Vec<T> {
    (0..inst.num_users())
        .map(|k| {
            (0..inst.num_subcarriers())
                .map(|n| inst.rate_unchecked(k, n, T::zero()))
                .fold(T::zero(), |a, b| a + b)
        })
        .collect()
}

/// True when some demand exceeds that user's capacity, in which case no
/// assignment can be feasible.
pub fn infeasible_by_capacity<T: Scalar>(inst: &Instance<T>, tol: T) -> bool {
    max_secrecy_capacity(inst)
        .iter()
        .enumerate()
        .any(|(k, &cap)| cap < inst.demand(k) - tol)
}

/// Feasible beats infeasible, then larger objective, then smaller violation.
pub(crate) fn report_beats<T: Scalar>(a: &SolveReport<T>, b: &SolveReport<T>) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.objective > b.objective,
        (false, false) => a.violation < b.violation,
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate<T, A> {
    pub alloc: A,
    pub report: SolveReport<T>,
}

impl<T: Scalar, A> Candidate<T, A> {
    /// Keeps the better of `slot` and the offered allocation; earlier wins ties.
    pub fn offer(slot: &mut Option<Self>, alloc: A, report: SolveReport<T>) {
        if slot
            .as_ref()
            .is_none_or(|c| report_beats(&report, &c.report))
        {
            *slot = Some(Candidate { alloc, report });
        }
    }

    pub fn beats(&self, other: &SolveReport<T>) -> bool {
        report_beats(&self.report, other)
    }
}
