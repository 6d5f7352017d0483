//! Dual method for the upper-bound problem, where every (user, subcarrier)
//! pair has its own splitting ratio. For fixed multipliers the Lagrangian
//! separates per subcarrier and each term has a closed-form maximiser, so the
//! dual function is evaluated exactly and its value is a valid upper bound on
//! both problem variants.

use crate::dual::{update_duals, DualOptions, DualState};
use crate::model::{
    evaluate_with_tolerance, AllocationUb, Assignment, Instance, Iterations, SolveReport,
};
use crate::recovery::{local_search, repair, settle, PerSubcarrierRx, Primal, Receiver};
use crate::scalar::Scalar;
use crate::solve::{infeasible_by_capacity, Candidate};

/// Which stationary-point formula [`rho_star_ub`] uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoFormula {
    /// Root of `ζ p h = λ p h / (ln2 (p h (1 − ρ) + σ²))`, clamped to the
    /// positive-rate region and compared against full harvesting.
    #[default]
    Derived,
    /// `[1 − λ h / (ζ ln2 p Σ_k h) + σ² / (ln2 h p)]₀¹`, kept when it does not
    /// exceed `1 − β/h`, else 1. Kept for comparison only; it is not a
    /// stationary point of the per-term Lagrangian in general.
    Printed,
}

/// Per-(k, n) Lagrangian term `ζ ρ p_n h + λ r(ρ)`.
pub fn ub_term_value<T: Scalar>(inst: &Instance<T>, k: usize, n: usize, lambda: T, ratio: T) -> T {
    inst.zeta() * ratio * inst.rx(k, n) + lambda * inst.rate_unchecked(k, n, ratio)
}

/// Unclamped stationary point of the per-term Lagrangian.
pub fn stationary_ratio<T: Scalar>(inst: &Instance<T>, k: usize, n: usize, lambda: T) -> T {
    let rx = inst.rx(k, n);
    T::one() + inst.noise() / rx - lambda / (inst.zeta() * T::LN_2() * rx)
}

/// Optimal splitting ratio of user `k` on subcarrier `n` for multiplier `λ_k`.
pub fn rho_star_ub<T: Scalar>(
    inst: &Instance<T>,
    k: usize,
    n: usize,
    lambda: T,
    formula: RhoFormula,
) -> T {
    assert!(lambda >= T::zero(), "multiplier must be nonnegative");
    let edge = inst.rate_breakpoint(k, n);
    match formula {
        RhoFormula::Derived => {
            if lambda == T::zero() || edge <= T::zero() {
                return T::one();
            }
            let cand = stationary_ratio(inst, k, n, lambda)
                .max(T::zero())
                .min(edge);
            let full = ub_term_value(inst, k, n, lambda, T::one());
            if ub_term_value(inst, k, n, lambda, cand) > full {
                cand
            } else {
                T::one()
            }
        }
        RhoFormula::Printed => {
            let ch = inst.channel();
            let h = ch.gain(k, n);
            let p = inst.config().subcarrier_power()[n];
            let column: T = (0..inst.num_users())
                .map(|j| ch.gain(j, n))
                .fold(T::zero(), |a, b| a + b);
            let ln2 = T::LN_2();
            let dot = (T::one() - lambda * h / (inst.zeta() * ln2 * p * column)
                + inst.noise() / (ln2 * h * p))
                .clamp01();
            if dot <= edge {
                dot
            } else {
                T::one()
            }
        }
    }
}

/// Output of one per-subcarrier maximisation of the Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct UbStep<T> {
    pub allocation: AllocationUb<T>,
    /// `g(λ)`: the maximised Lagrangian including `−Σ λ_k C_k`.
    pub dual_value: T,
}

/// For each subcarrier, gives it to the user with the largest
/// `L_n(k) = ζ p_n (ρ*_{k,n} h[k][n] + Σ_{k'≠k} h[k'][n]) + λ_k r_{k,n}(ρ*)`
/// (lowest index on ties). Everyone else keeps `ρ = 1` on that subcarrier.
pub fn assign_subcarriers_ub<T: Scalar>(
    inst: &Instance<T>,
    lambda: &[T],
    formula: RhoFormula,
) -> UbStep<T> {
    let (users, subcarriers) = (inst.num_users(), inst.num_subcarriers());
    assert_eq!(lambda.len(), users);
    let zeta = inst.zeta();
    let mut owner = Vec::with_capacity(subcarriers);
    let mut split = vec![T::one(); users * subcarriers];
    let mut value = T::zero();
    for n in 0..subcarriers {
        let column = (0..users)
            .map(|k| inst.rx(k, n))
            .fold(T::zero(), |a, b| a + b);
        let mut best = (T::neg_infinity(), 0, T::one());
        for (k, &lam) in lambda.iter().enumerate() {
            let rho = rho_star_ub(inst, k, n, lam, formula);
            // L_n(k) minus the k-independent ζ p Σ h
            let score =
                lam * inst.rate_unchecked(k, n, rho) - zeta * (T::one() - rho) * inst.rx(k, n);
            if score > best.0 {
                best = (score, k, rho);
            }
        }
        let (score, k, rho) = best;
        owner.push(Some(k));
        split[k * subcarriers + n] = rho;
        value += zeta * column + score;
    }
    let demand_term = lambda
        .iter()
        .zip(inst.config().secrecy_demand())
        .fold(T::zero(), |a, (&l, &c)| a + l * c);
    UbStep {
        allocation: AllocationUb {
            assignment: Assignment::from_owners(users, owner).expect("owners in range"),
            split,
        },
        dual_value: value - demand_term,
    }
}

/// Comparator written as a full column sum,
/// `H_{k,n} = Σ_{k'} ζ ρ_{k',n} p_n h[k'][n] + λ_k r_{k,n}`, where the column
/// ratios are those of candidate `k` (its `ρ*`, everyone else 1). Returns the
/// winning user. Equal to [`assign_subcarriers_ub`]'s choice by construction.
pub fn column_sum_choice<T: Scalar>(
    inst: &Instance<T>,
    n: usize,
    lambda: &[T],
    formula: RhoFormula,
) -> usize {
    let users = inst.num_users();
    let mut best = (T::neg_infinity(), 0);
    for (k, &lam) in lambda.iter().enumerate().take(users) {
        let rho = rho_star_ub(inst, k, n, lam, formula);
        let harvest = (0..users)
            .map(|j| if j == k { rho } else { T::one() } * inst.rx(j, n))
            .fold(T::zero(), |a, b| a + b);
        let h = inst.zeta() * harvest + lam * inst.rate_unchecked(k, n, rho);
        if h > best.0 {
            best = (h, k);
        }
    }
    best.1
}

/// `λ ← [λ + α (C − r)]⁺`; same rule as the practical solver.
pub fn update_duals_ub<T: Scalar>(
    state: &DualState<T>,
    rates: &[T],
    demands: &[T],
) -> DualState<T> {
    update_duals(state, rates, demands)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PubOptions {
    pub dual: DualOptions,
    pub rate_tolerance: f64,
    pub rho_formula: RhoFormula,
    /// Stop once the best feasible primal is within this relative distance
    /// of the best dual bound.
    pub gap_tolerance: f64,
    /// Passes of single-subcarrier reassignment applied to the recovered
    /// primal; 0 disables it.
    pub local_search_sweeps: usize,
}

impl Default for PubOptions {
    fn default() -> Self {
        Self {
            dual: DualOptions::default(),
            rate_tolerance: crate::model::DEFAULT_RATE_TOLERANCE,
            rho_formula: RhoFormula::Derived,
            gap_tolerance: 1e-6,
            local_search_sweeps: 20,
        }
    }
}

pub fn solve_pub<T: Scalar>(
    inst: &Instance<T>,
    opts: &PubOptions,
) -> (AllocationUb<T>, SolveReport<T>) {
    let tol = T::lit(opts.rate_tolerance);
    let rx = PerSubcarrierRx;
    if infeasible_by_capacity(inst, tol) {
        let p = repair(
            &rx,
            inst,
            &Assignment::unassigned(inst.num_users(), inst.num_subcarriers()),
            tol,
        );
        return finish(inst, &rx, p, Iterations::default(), None, tol);
    }
    let demands = inst.config().secrecy_demand();
    let mut state: DualState<T> = opts.dual.initial_state(inst);
    let mut iters = Iterations {
        starts: 1,
        ..Iterations::default()
    };
    let mut best: Option<Primal<T>> = None;
    let mut raw_best: Option<Candidate<T, AllocationUb<T>>> = None;
    let mut dual_bound: Option<T> = None;
    let mut last: Option<Assignment> = None;
    for _ in 0..opts.dual.max_iters {
        iters.dual += 1;
        let step = assign_subcarriers_ub(inst, state.multipliers(), opts.rho_formula);
        if opts.rho_formula == RhoFormula::Derived {
            dual_bound = Some(dual_bound.map_or(step.dual_value, |d: T| d.min(step.dual_value)));
        }
        let raw = evaluate_with_tolerance(inst, &step.allocation, tol);
        let rates = raw.per_user_rate.clone();
        Candidate::offer(&mut raw_best, step.allocation.clone(), raw);
        if last.as_ref() != Some(&step.allocation.assignment) {
            let p = settle(&rx, inst, &step.allocation.assignment, tol);
            if best.as_ref().is_none_or(|b| p.better_than(b)) {
                best = Some(p);
            }
            last = Some(step.allocation.assignment);
        }
        let next = update_duals_ub(&state, &rates, demands);
        let converged = opts.dual.converged(inst, &state, &next);
        state = next;
        if converged {
            iters.dual_converged = true;
            break;
        }
        if let (Some(b), Some(d)) = (&best, dual_bound) {
            if b.feasible && d - b.objective <= T::lit(opts.gap_tolerance) * d.abs() {
                iters.dual_converged = true;
                break;
            }
        }
    }
    let mut best = best.expect("at least one dual iteration");
    if !best.feasible {
        let fixed = repair(&rx, inst, &best.assignment, tol);
        if fixed.better_than(&best) {
            best = fixed;
        }
    }
    let best = local_search(&rx, inst, best, tol, opts.local_search_sweeps);
    let (alloc, mut report) = finish(inst, &rx, best, iters, dual_bound, tol);
    if let Some(raw) = raw_best {
        if raw.beats(&report) {
            report = raw.report;
            report.iterations = iters;
            report.dual_bound = dual_bound;
            return (raw.alloc, report);
        }
    }
    (alloc, report)
}

fn finish<T: Scalar>(
    inst: &Instance<T>,
    rx: &PerSubcarrierRx,
    p: Primal<T>,
    iterations: Iterations,
    dual_bound: Option<T>,
    tol: T,
) -> (AllocationUb<T>, SolveReport<T>) {
    let alloc = rx.build(&p.assignment, &p.plans);
    let mut report = evaluate_with_tolerance(inst, &alloc, tol);
    report.iterations = iterations;
    report.dual_bound = dual_bound;
    (alloc, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelState, SystemConfig};
    use approx::assert_relative_eq;

    fn single(h: f64, beta: f64, zeta: f64) -> Instance<f64> {
        let cfg = SystemConfig::new(vec![1.0], 1.0, zeta, vec![1.0, 0.0]).unwrap();
        let ch = ChannelState::from_rows(&[vec![h], vec![beta]]).unwrap();
        Instance::new(cfg, ch).unwrap()
    }

    #[test]
    fn zero_multiplier_harvests_everything() {
        let inst = single(4.0, 1.0, 0.5);
        assert_eq!(rho_star_ub(&inst, 0, 0, 0.0, RhoFormula::Derived), 1.0);
    }

    #[test]
    fn analytic_stationary_point() {
        // β → 0 is approximated with a tiny competing gain
        let inst = single(1.0, 1e-12, 0.999_999);
        let zeta = inst.zeta();
        let lambda = zeta;
        let dot = stationary_ratio(&inst, 0, 0, lambda);
        assert_relative_eq!(dot, 2.0 - 1.0 / std::f64::consts::LN_2, epsilon = 1e-12);
        let rho = rho_star_ub(&inst, 0, 0, lambda, RhoFormula::Derived);
        // grid oracle, step 1e-4
        let (mut arg, mut val) = (0.0, f64::NEG_INFINITY);
        for i in 0..=10_000 {
            let r = i as f64 / 10_000.0;
            let v = ub_term_value(&inst, 0, 0, lambda, r);
            if v > val {
                (arg, val) = (r, v);
            }
        }
        assert!((rho - arg).abs() <= 1e-4, "{rho} vs {arg}");
        assert!(ub_term_value(&inst, 0, 0, lambda, rho) >= val - 1e-12);
    }

    #[test]
    fn stronger_eavesdropper_means_full_harvest() {
        let inst = single(1.0, 2.0, 0.5);
        assert_eq!(rho_star_ub(&inst, 0, 0, 100.0, RhoFormula::Derived), 1.0);
    }

    #[test]
    fn all_zero_multipliers_assign_user_zero() {
        let cfg = SystemConfig::new(vec![1.0, 1.0], 1.0, 0.4, vec![0.0, 0.0, 0.0]).unwrap();
        let ch =
            ChannelState::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let inst = Instance::new(cfg, ch).unwrap();
        let step = assign_subcarriers_ub(&inst, &[0.0; 3], RhoFormula::Derived);
        assert_eq!(step.allocation.assignment.owners(), &[Some(0), Some(0)]);
        assert!(step.allocation.split.iter().all(|&r| r == 1.0));
        assert_relative_eq!(step.dual_value, inst.full_harvest());
    }

    #[test]
    fn dominant_rate_term_wins_subcarrier() {
        // user 1 has a much better secrecy rate
        let cfg = SystemConfig::new(vec![1.0], 1.0, 0.4, vec![1.0, 1.0]).unwrap();
        let ch = ChannelState::from_rows(&[vec![1.0], vec![20.0]]).unwrap();
        let inst = Instance::new(cfg, ch).unwrap();
        let step = assign_subcarriers_ub(&inst, &[1.0, 10.0], RhoFormula::Derived);
        assert_eq!(step.allocation.assignment.owner(0), Some(1));
        assert_eq!(step.allocation.split_at(0, 0), 1.0);
        assert!(step.allocation.split_at(1, 0) < 1.0);
        assert_eq!(
            column_sum_choice(&inst, 0, &[1.0, 10.0], RhoFormula::Derived),
            1
        );
        // at λ = 1 the lost harvest outweighs the rate, so user 0 keeps it at ρ = 1
        let step = assign_subcarriers_ub(&inst, &[1.0, 1.0], RhoFormula::Derived);
        assert_eq!(step.allocation.assignment.owner(0), Some(0));
    }

    #[test]
    fn unconstrained_solve_is_full_harvest() {
        let cfg = SystemConfig::new(vec![1.0, 2.0], 1.0, 0.4, vec![0.0, 0.0]).unwrap();
        let ch = ChannelState::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let inst = Instance::new(cfg, ch).unwrap();
        let (alloc, rep) = solve_pub(&inst, &PubOptions::default());
        assert!(rep.feasible);
        assert!(alloc.split.iter().all(|&r| r == 1.0));
        assert_relative_eq!(rep.objective, inst.full_harvest());
    }
}
