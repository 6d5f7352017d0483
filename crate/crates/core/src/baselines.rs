//! Benchmark schemes: a fixed splitting ratio with optimised assignment, and
//! a fixed assignment with optimised ratios.

use serde::{Deserialize, Serialize};

use crate::dual::{update_duals, DualOptions, DualState};
use crate::model::{
    evaluate_with_tolerance, AllocationPa, Assignment, Instance, Iterations, SolveReport,
};
use crate::ppa::{ratio_step, PpaOptions};
use crate::recovery::{release_idle, repair, settle, FixedRatioRx, PracticalRx, Primal, Receiver};
use crate::scalar::Scalar;
use crate::solve::infeasible_by_capacity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpsOptions {
    /// Ratio used by every user.
    pub ratio: f64,
    pub dual: DualOptions,
    pub rate_tolerance: f64,
}

impl Default for FpsOptions {
    fn default() -> Self {
        Self {
            ratio: 0.5,
            dual: DualOptions::default(),
            rate_tolerance: crate::model::DEFAULT_RATE_TOLERANCE,
        }
    }
}

/// Upper-bound comparator at a common fixed ratio:
/// `argmax_k ζ p_n (ρ h[k][n] + Σ_{k'≠k} h[k'][n]) + μ_k r_{k,n}(ρ)`,
/// lowest index on ties.
pub fn assign_subcarriers_fixed_ratio<T: Scalar>(
    inst: &Instance<T>,
    ratio: T,
    mu: &[T],
) -> Assignment {
    let users = inst.num_users();
    let owner = (0..inst.num_subcarriers())
        .map(|n| {
            let mut best = (T::neg_infinity(), 0);
            for (k, &m) in mu.iter().enumerate() {
                // the k-independent ζ p Σ h is dropped
                let v = m * inst.rate_unchecked(k, n, ratio)
                    - inst.zeta() * (T::one() - ratio) * inst.rx(k, n);
                if v > best.0 {
                    best = (v, k);
                }
            }
            Some(best.1)
        })
        .collect();
    Assignment::from_owners(users, owner).expect("owners in range")
}

/// Fixed power splitting. Harvested power does not depend on the
/// assignment, so the loop stops at the first feasible assignment.
pub fn solve_fps<T: Scalar>(
    inst: &Instance<T>,
    opts: &FpsOptions,
) -> (AllocationPa<T>, SolveReport<T>) {
    let tol = T::lit(opts.rate_tolerance);
    let ratio = T::lit(opts.ratio);
    assert!(
        ratio >= T::zero() && ratio <= T::one(),
        "fixed ratio outside [0, 1]"
    );
    let rx = FixedRatioRx(ratio);
    let mut iters = Iterations {
        starts: 1,
        ..Iterations::default()
    };
    let (users, subcarriers) = (inst.num_users(), inst.num_subcarriers());
    let best = if infeasible_by_capacity(inst, tol) {
        repair(&rx, inst, &Assignment::unassigned(users, subcarriers), tol)
    } else {
        let demands = inst.config().secrecy_demand();
        let mut state: DualState<T> = opts.dual.initial_state(inst);
        let mut best: Option<Primal<T>> = None;
        let mut last: Option<Primal<T>> = None;
        for _ in 0..opts.dual.max_iters {
            iters.dual += 1;
            let x = assign_subcarriers_fixed_ratio(inst, ratio, state.multipliers());
            let p = match last.take() {
                Some(p) if p.assignment == x => p,
                _ => settle(&rx, inst, &x, tol),
            };
            let rates: Vec<T> = p.plans.iter().map(|u| u.rate).collect();
            if best.as_ref().is_none_or(|b| p.better_than(b)) {
                best = Some(p.clone());
            }
            if p.feasible {
                iters.dual_converged = true;
                break;
            }
            last = Some(p);
            let next = update_duals(&state, &rates, demands);
            let converged = opts.dual.converged(inst, &state, &next);
            state = next;
            if converged {
                iters.dual_converged = true;
                break;
            }
        }
        let best = best.expect("at least one dual iteration");
        if best.feasible {
            best
        } else {
            let fixed = repair(&rx, inst, &best.assignment, tol);
            if fixed.better_than(&best) {
                fixed
            } else {
                best
            }
        }
    };
    let mut alloc = rx.build(&best.assignment, &best.plans);
    release_idle(inst, &mut alloc);
    let mut report = evaluate_with_tolerance(inst, &alloc, tol);
    report.iterations = iters;
    (alloc, report)
}

/// Rule that fixes the assignment for [`solve_fsa`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FsaAssignment {
    /// Subcarrier `n` goes to user `n mod K`.
    #[default]
    RoundRobin,
    /// Uniformly random owners drawn from the given seed.
    Random(u64),
}

impl FsaAssignment {
    pub fn assignment(&self, users: usize, subcarriers: usize) -> Assignment {
        match *self {
            FsaAssignment::RoundRobin => {
                Assignment::from_owners(users, (0..subcarriers).map(|n| Some(n % users)).collect())
                    .expect("owners in range")
            }
            FsaAssignment::Random(seed) => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                crate::ppa::random_assignment(users, subcarriers, &mut rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsaOptions {
    pub assignment: FsaAssignment,
    /// Ratio search and dual settings; `num_starts` and `seed` are unused.
    pub ppa: PpaOptions,
}

/// Fixed subcarrier assignment with per-user ratios from the practical
/// solver's ratio search.
pub fn solve_fsa<T: Scalar>(
    inst: &Instance<T>,
    opts: &FsaOptions,
) -> (AllocationPa<T>, SolveReport<T>) {
    let tol = T::lit(opts.ppa.rate_tolerance);
    let x = opts
        .assignment
        .assignment(inst.num_users(), inst.num_subcarriers());
    let demands = inst.config().secrecy_demand();
    let mut iters = Iterations {
        starts: 1,
        ..Iterations::default()
    };
    let mut split = vec![T::one(); inst.num_users()];
    let mut best: Option<(AllocationPa<T>, SolveReport<T>)> = None;
    if !infeasible_by_capacity(inst, tol) {
        let mut state: DualState<T> = opts.ppa.dual.initial_state(inst);
        for _ in 0..opts.ppa.dual.max_iters {
            iters.dual += 1;
            ratio_step(
                inst,
                &x,
                state.multipliers(),
                &opts.ppa,
                &mut split,
                &mut iters,
            );
            let alloc = AllocationPa {
                assignment: x.clone(),
                split: split.clone(),
            };
            let rep = evaluate_with_tolerance(inst, &alloc, tol);
            let next = update_duals(&state, &rep.per_user_rate, demands);
            if best
                .as_ref()
                .is_none_or(|(_, b)| crate::solve::report_beats(&rep, b))
            {
                best = Some((alloc, rep));
            }
            let converged = opts.ppa.dual.converged(inst, &state, &next);
            state = next;
            if converged {
                iters.dual_converged = true;
                break;
            }
        }
    }
    // for a fixed assignment the exact per-user optimum is available directly
    let p = settle(&PracticalRx, inst, &x, tol);
    let alloc = PracticalRx.build(&p.assignment, &p.plans);
    let rep = evaluate_with_tolerance(inst, &alloc, tol);
    let (alloc, mut report) = match best {
        Some((a, r)) if crate::solve::report_beats(&r, &rep) => (a, r),
        _ => (alloc, rep),
    };
    report.iterations = iters;
    (alloc, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelState, SystemConfig};
    use approx::assert_relative_eq;

    fn inst(demands: Vec<f64>) -> Instance<f64> {
        let cfg = SystemConfig::new(vec![1.0; 4], 1.0, 0.5, demands).unwrap();
        let ch =
            ChannelState::from_rows(&[vec![5.0, 1.0, 8.0, 2.0], vec![1.0, 6.0, 2.0, 9.0]]).unwrap();
        Instance::new(cfg, ch).unwrap()
    }

    #[test]
    fn fps_without_demands_harvests_half() {
        let i = inst(vec![0.0, 0.0]);
        let (alloc, rep) = solve_fps(&i, &FpsOptions::default());
        assert!(rep.feasible);
        assert_eq!(alloc.split, vec![0.5, 0.5]);
        assert_relative_eq!(rep.objective, 0.5 * i.full_harvest());
    }

    #[test]
    fn fps_keeps_ratio_under_demands() {
        let i = inst(vec![1.0, 1.0]);
        let (alloc, rep) = solve_fps(&i, &FpsOptions::default());
        assert!(rep.feasible);
        assert_eq!(alloc.split, vec![0.5, 0.5]);
    }

    #[test]
    fn fsa_round_robin_and_no_demands() {
        let i = inst(vec![0.0, 0.0]);
        let (alloc, rep) = solve_fsa(&i, &FsaOptions::default());
        assert_eq!(
            alloc.assignment.owners(),
            &[Some(0), Some(1), Some(0), Some(1)]
        );
        assert_eq!(alloc.split, vec![1.0, 1.0]);
        assert_relative_eq!(rep.objective, i.full_harvest());
    }

    #[test]
    fn fsa_assignment_is_fixed() {
        let i = inst(vec![1.0, 1.0]);
        let opts = FsaOptions {
            assignment: FsaAssignment::Random(3),
            ..Default::default()
        };
        let (alloc, _) = solve_fsa(&i, &opts);
        assert_eq!(alloc.assignment, FsaAssignment::Random(3).assignment(2, 4));
    }
}
