//! Practical receiver: one splitting ratio per user, shared by all of its
//! subcarriers. The problem is non-convex, so the dual loop wraps a
//! block-coordinate ascent over (assignment, ratios) and is restarted from
//! several random assignments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{update_duals, DualOptions, DualState};
use crate::model::{
    evaluate_with_tolerance, AllocationPa, Assignment, Instance, Iterations, SolveReport,
};
use crate::recovery::{local_search, release_idle, repair, settle, PracticalRx, Primal, Receiver};
use crate::scalar::Scalar;
use crate::solve::infeasible_by_capacity;

/// `L(X, ρ, μ) = Σ_k ζ ρ_k Σ_n p_n h[k][n] + Σ_k μ_k (r_k − C_k)`.
pub fn lagrangian_pa<T: Scalar>(inst: &Instance<T>, alloc: &AllocationPa<T>, mu: &[T]) -> T {
    (0..inst.num_users())
        .map(|k| {
            let rate = alloc
                .assignment
                .subcarriers_of(k)
                .map(|n| inst.rate_unchecked(k, n, alloc.split[k]))
                .fold(T::zero(), |a, b| a + b);
            inst.zeta() * alloc.split[k] * inst.total_rx(k) + mu[k] * (rate - inst.demand(k))
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Each subcarrier goes to `argmax_k μ_k r_{k,n}(ρ_k)`, lowest index on ties,
/// and stays unassigned when every comparator is 0. The harvested power does
/// not depend on the assignment, so it drops out.
pub fn assign_subcarriers_pa<T: Scalar>(inst: &Instance<T>, split: &[T], mu: &[T]) -> Assignment {
    let users = inst.num_users();
    assert_eq!(split.len(), users);
    assert_eq!(mu.len(), users);
    let owner = (0..inst.num_subcarriers())
        .map(|n| {
            let mut best = (T::neg_infinity(), 0);
            for k in 0..users {
                let v = mu[k] * inst.rate_unchecked(k, n, split[k]);
                if v > best.0 {
                    best = (v, k);
                }
            }
            (best.0 > T::zero()).then_some(best.1)
        })
        .collect();
    Assignment::from_owners(users, owner).expect("owners in range")
}

/// `∂L_k/∂ρ = ζ Σ_n p_n h − μ Σ_{n assigned, r > 0} p_n h / (ln2 (p_n h (1 − ρ) + σ²))`.
pub fn dlk_drho<T: Scalar>(
    inst: &Instance<T>,
    k: usize,
    ratio: T,
    assignment: &Assignment,
    mu: T,
) -> T {
    let loss = assignment
        .subcarriers_of(k)
        .filter(|&n| inst.rate_unchecked(k, n, ratio) > T::zero())
        .map(|n| {
            let rx = inst.rx(k, n);
            rx / (T::LN_2() * (rx * (T::one() - ratio) + inst.noise()))
        })
        .fold(T::zero(), |a, b| a + b);
    inst.zeta() * inst.total_rx(k) - mu * loss
}

/// Result of the per-user ratio search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSearch<T> {
    pub ratio: T,
    /// False when some bisection hit its cap before `|∂L/∂ρ| < ε`.
    pub converged: bool,
    pub iterations: usize,
}

/// Maximises `L_k(ρ) = ζ ρ Σ_n p_n h + μ Σ_{n ∈ X_k} r_{k,n}(ρ)` over `[0, 1]`.
///
/// Each assigned subcarrier stops contributing rate above `1 − β/h`, so `L_k`
/// is concave between consecutive breakpoints but only piecewise so overall.
/// Every segment is solved on its own (endpoint, or bisection on the
/// derivative to `|∂L/∂ρ| < tol`) and the best segment wins.
pub fn optimize_rho_bisect<T: Scalar>(
    inst: &Instance<T>,
    k: usize,
    assignment: &Assignment,
    mu: T,
    tol: T,
    max_iters: usize,
) -> RhoSearch<T> {
    let done = |ratio| RhoSearch {
        ratio,
        converged: true,
        iterations: 0,
    };
    if mu <= T::zero() {
        return done(T::one());
    }
    // (breakpoint, p h) for subcarriers that can carry rate, breakpoints descending
    let mut items: Vec<(T, T)> = assignment
        .subcarriers_of(k)
        .map(|n| (inst.rate_breakpoint(k, n), inst.rx(k, n)))
        .filter(|&(b, _)| b > T::zero())
        .collect();
    if items.is_empty() {
        return done(T::one());
    }
    items.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let slope = inst.zeta() * inst.total_rx(k);
    let sigma2 = inst.noise();
    let ln2 = T::LN_2();
    let objective = |rho: T| {
        let rate = assignment
            .subcarriers_of(k)
            .map(|n| inst.rate_unchecked(k, n, rho))
            .fold(T::zero(), |a, b| a + b);
        slope * rho + mu * rate
    };
    let mut best = (T::one(), objective(T::one()));
    let mut converged = true;
    let mut iterations = 0;
    for j in 0..items.len() {
        let hi = items[j].0;
        let lo = items.get(j + 1).map_or(T::zero(), |it| it.0.max(T::zero()));
        let active = &items[..=j];
        let deriv = |rho: T| {
            let loss = active
                .iter()
                .map(|&(_, rx)| rx / (ln2 * (rx * (T::one() - rho) + sigma2)))
                .fold(T::zero(), |a, b| a + b);
            slope - mu * loss
        };
        let cand = if deriv(hi) >= T::zero() {
            hi
        } else if deriv(lo) <= T::zero() {
            lo
        } else {
            let (mut a, mut b) = (lo, hi);
            let mut mid = T::half() * (a + b);
            let mut ok = false;
            for _ in 0..max_iters {
                iterations += 1;
                mid = T::half() * (a + b);
                let d = deriv(mid);
                if d.abs() < tol {
                    ok = true;
                    break;
                }
                if mid <= a || mid >= b {
                    break;
                }
                if d > T::zero() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            if !ok {
                // resolution exhausted counts as converged; the cap does not
                converged &= b - a <= T::epsilon() * T::two() * b.max(T::one());
            }
            mid
        };
        let v = objective(cand);
        if v > best.1 {
            best = (cand, v);
        }
    }
    RhoSearch {
        ratio: best.0,
        converged,
        iterations,
    }
}

/// `μ ← [μ + α (C − r)]⁺`.
pub fn update_duals_pa<T: Scalar>(
    state: &DualState<T>,
    rates: &[T],
    demands: &[T],
) -> DualState<T> {
    update_duals(state, rates, demands)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpaOptions {
    /// Random initial assignments tried; the best result is kept.
    pub num_starts: usize,
    pub seed: u64,
    /// Stop a ratio bisection once `|∂L/∂ρ|` falls below this.
    pub bisection_tolerance: f64,
    pub max_bisect_iters: usize,
    /// Cap on assignment/ratio alternations per dual iteration.
    pub max_bcd_passes: usize,
    pub dual: DualOptions,
    pub rate_tolerance: f64,
    /// Passes of single-subcarrier reassignment applied to each start's
    /// result; 0 disables it.
    pub local_search_sweeps: usize,
}

impl Default for PpaOptions {
    fn default() -> Self {
        Self {
            num_starts: 20,
            seed: 0,
            bisection_tolerance: 1e-8,
            max_bisect_iters: 200,
            max_bcd_passes: 50,
            dual: DualOptions::default(),
            rate_tolerance: crate::model::DEFAULT_RATE_TOLERANCE,
            local_search_sweeps: 20,
        }
    }
}

/// Uniformly random owner for every subcarrier.
pub fn random_assignment<R: Rng>(users: usize, subcarriers: usize, rng: &mut R) -> Assignment {
    let owner = (0..subcarriers)
        .map(|_| Some(rng.gen_range(0..users)))
        .collect();
    Assignment::from_owners(users, owner).expect("owners in range")
}

/// Ratio step for every user at fixed assignment and multipliers.
pub(crate) fn ratio_step<T: Scalar>(
    inst: &Instance<T>,
    assignment: &Assignment,
    mu: &[T],
    opts: &PpaOptions,
    split: &mut [T],
    iters: &mut Iterations,
) {
    let tol = T::lit(opts.bisection_tolerance) * inst.zeta() * max_total_rx(inst);
    for (k, s) in split.iter_mut().enumerate() {
        let r = optimize_rho_bisect(inst, k, assignment, mu[k], tol, opts.max_bisect_iters);
        iters.bisections += r.iterations;
        iters.bisect_failures += usize::from(!r.converged);
        *s = r.ratio;
    }
}

fn max_total_rx<T: Scalar>(inst: &Instance<T>) -> T {
    (0..inst.num_users())
        .map(|k| inst.total_rx(k))
        .fold(T::zero(), T::max)
}

fn user_rates<T: Scalar>(inst: &Instance<T>, assignment: &Assignment, split: &[T]) -> Vec<T> {
    (0..inst.num_users())
        .map(|k| {
            assignment
                .subcarriers_of(k)
                .map(|n| inst.rate_unchecked(k, n, split[k]))
                .fold(T::zero(), |a, b| a + b)
        })
        .collect()
}

/// One dual run from a given initial assignment.
fn run_start<T: Scalar>(
    inst: &Instance<T>,
    start: Assignment,
    opts: &PpaOptions,
) -> (Primal<T>, Iterations) {
    let tol = T::lit(opts.rate_tolerance);
    let demands = inst.config().secrecy_demand();
    let mut state: DualState<T> = opts.dual.initial_state(inst);
    let mut iters = Iterations::default();
    let mut x = start;
    let mut split = vec![T::one(); inst.num_users()];
    let mut best: Option<Primal<T>> = None;
    let mut last: Option<Assignment> = None;
    for _ in 0..opts.dual.max_iters {
        iters.dual += 1;
        let mu = state.multipliers();
        let mut passes = 0;
        loop {
            ratio_step(inst, &x, mu, opts, &mut split, &mut iters);
            let next = assign_subcarriers_pa(inst, &split, mu);
            passes += 1;
            if next == x {
                break;
            }
            x = next;
            if passes >= opts.max_bcd_passes {
                ratio_step(inst, &x, mu, opts, &mut split, &mut iters);
                break;
            }
        }
        iters.bcd_passes += passes;
        if last.as_ref() != Some(&x) {
            let p = settle(&PracticalRx, inst, &x, tol);
            if best.as_ref().is_none_or(|b| p.better_than(b)) {
                best = Some(p);
            }
            last = Some(x.clone());
        }
        let next = update_duals_pa(&state, &user_rates(inst, &x, &split), demands);
        let converged = opts.dual.converged(inst, &state, &next);
        state = next;
        if converged {
            iters.dual_converged = true;
            break;
        }
    }
    let mut best = best.expect("at least one dual iteration");
    if !best.feasible {
        let fixed = repair(&PracticalRx, inst, &best.assignment, tol);
        if fixed.better_than(&best) {
            best = fixed;
        }
    }
    let best = local_search(&PracticalRx, inst, best, tol, opts.local_search_sweeps);
    (best, iters)
}

pub fn solve_ppa<T: Scalar>(
    inst: &Instance<T>,
    opts: &PpaOptions,
) -> (AllocationPa<T>, SolveReport<T>) {
    let tol = T::lit(opts.rate_tolerance);
    let (users, subcarriers) = (inst.num_users(), inst.num_subcarriers());
    let mut iters = Iterations::default();
    let best = if infeasible_by_capacity(inst, tol) {
        repair(
            &PracticalRx,
            inst,
            &Assignment::unassigned(users, subcarriers),
            tol,
        )
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let starts: Vec<Assignment> = (0..opts.num_starts.max(1))
            .map(|_| random_assignment(users, subcarriers, &mut rng))
            .collect();
        let mut best: Option<Primal<T>> = None;
        for s in starts {
            let (p, it) = run_start(inst, s, opts);
            iters.starts += 1;
            iters.absorb(&it);
            if best.as_ref().is_none_or(|b| p.better_than(b)) {
                best = Some(p);
            }
        }
        best.expect("at least one start")
    };
    let mut alloc = PracticalRx.build(&best.assignment, &best.plans);
    release_idle(inst, &mut alloc);
    let mut report = evaluate_with_tolerance(inst, &alloc, tol);
    report.iterations = iters;
    (alloc, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelState, SystemConfig};
    use approx::assert_relative_eq;

    fn one_sub(h: f64, beta: f64, zeta: f64) -> Instance<f64> {
        let cfg = SystemConfig::new(vec![1.0], 1.0, zeta, vec![1.0, 0.0]).unwrap();
        Instance::new(
            cfg,
            ChannelState::from_rows(&[vec![h], vec![beta]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_subcarrier_root() {
        // p = h = σ² = 1, μ = ζ, β ≈ 0: ρ* = 2 − 1/ln2
        let inst = one_sub(1.0, 1e-12, 0.999_999);
        let x = Assignment::from_owners(2, vec![Some(0)]).unwrap();
        let r = optimize_rho_bisect(&inst, 0, &x, inst.zeta(), 1e-10, 200);
        assert!(r.converged);
        assert_relative_eq!(r.ratio, 2.0 - 1.0 / std::f64::consts::LN_2, epsilon = 1e-8);
        assert!(dlk_drho(&inst, 0, r.ratio, &x, inst.zeta()).abs() < 1e-8);
    }

    #[test]
    fn zero_multiplier_gives_full_harvest() {
        let inst = one_sub(4.0, 1.0, 0.5);
        let x = Assignment::from_owners(2, vec![Some(0)]).unwrap();
        assert_eq!(optimize_rho_bisect(&inst, 0, &x, 0.0, 1e-8, 100).ratio, 1.0);
    }

    #[test]
    fn large_multiplier_gives_zero_ratio() {
        let inst = one_sub(4.0, 1.0, 0.5);
        let x = Assignment::from_owners(2, vec![Some(0)]).unwrap();
        assert_eq!(optimize_rho_bisect(&inst, 0, &x, 1e6, 1e-8, 100).ratio, 0.0);
    }

    #[test]
    fn assignment_ties_go_to_lowest_index() {
        let cfg = SystemConfig::new(vec![1.0, 1.0], 1.0, 0.5, vec![1.0, 1.0]).unwrap();
        let ch = ChannelState::from_rows(&[vec![2.0, 2.0], vec![2.0, 9.0]]).unwrap();
        let inst = Instance::new(cfg, ch).unwrap();
        let x = assign_subcarriers_pa(&inst, &[0.0, 0.0], &[1.0, 1.0]);
        // equal gains give zero rate for both on subcarrier 0
        assert_eq!(x.owners(), &[None, Some(1)]);
        let x = assign_subcarriers_pa(&inst, &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(x.owners(), &[None, None]);
    }

    #[test]
    fn unconstrained_solve_harvests_everything() {
        let cfg = SystemConfig::new(vec![1.0, 1.0], 1.0, 0.5, vec![0.0, 0.0]).unwrap();
        let ch = ChannelState::from_rows(&[vec![2.0, 3.0], vec![1.0, 9.0]]).unwrap();
        let inst = Instance::new(cfg, ch).unwrap();
        let (alloc, rep) = solve_ppa(
            &inst,
            &PpaOptions {
                num_starts: 2,
                ..Default::default()
            },
        );
        assert!(rep.feasible);
        assert_eq!(alloc.split, vec![1.0, 1.0]);
        assert_relative_eq!(rep.objective, inst.full_harvest());
    }
}
