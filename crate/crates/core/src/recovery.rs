//! Primal side of the dual loops: the best splitting ratios for a fixed
//! subcarrier assignment, and a greedy reassignment pass that hands
//! subcarriers to users whose demand is out of reach.
//!
//! With the assignment fixed every problem variant separates per user, so
//! each receiver model only has to answer "how much can user `k` harvest on
//! these subcarriers while meeting `C_k`".

use std::cmp::Ordering;

use crate::model::{AllocationPa, AllocationUb, Assignment, Instance};
use crate::scalar::Scalar;
use crate::upper_bound::{rho_star_ub, RhoFormula};

const BISECT_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Ratios<T> {
    Uniform(T),
    /// `(n, ρ)` for the user's assigned subcarriers; everything else is 1.
    PerSubcarrier(Vec<(usize, T)>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct UserPlan<T> {
    pub harvest: T,
    pub rate: T,
    pub feasible: bool,
    pub ratios: Ratios<T>,
}

/// Receiver model as seen by the primal recovery.
pub(crate) trait Receiver<T: Scalar> {
    type Alloc;

    fn plan(&self, inst: &Instance<T>, k: usize, subs: &[usize], tol: T) -> UserPlan<T>;

    /// Best secrecy rate subcarrier `n` can give user `k` under this model.
    fn peak_rate(&self, inst: &Instance<T>, k: usize, n: usize) -> T;

    fn build(&self, assignment: &Assignment, plans: &[UserPlan<T>]) -> Self::Alloc;
}

/// `Σ_{n ∈ subs} r_{k,n}(ρ)`
pub(crate) fn uniform_rate<T: Scalar>(inst: &Instance<T>, k: usize, subs: &[usize], ratio: T) -> T {
    subs.iter()
        .map(|&n| inst.rate_unchecked(k, n, ratio))
        .fold(T::zero(), |a, b| a + b)
}

/// Largest `ρ` with `Σ_{n ∈ subs} r_{k,n}(ρ) ≥ demand`, assuming `ρ = 0`
/// reaches it. The rate is nonincreasing in `ρ`, so plain bisection applies.
pub(crate) fn max_ratio_for_demand<T: Scalar>(
    inst: &Instance<T>,
    k: usize,
    subs: &[usize],
    demand: T,
) -> T {
    if demand <= T::zero() {
        return T::one();
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..BISECT_STEPS {
        let mid = T::half() * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if uniform_rate(inst, k, subs, mid) >= demand {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One splitting ratio per user (practical receiver).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PracticalRx;

impl<T: Scalar> Receiver<T> for PracticalRx {
    type Alloc = AllocationPa<T>;

    fn plan(&self, inst: &Instance<T>, k: usize, subs: &[usize], tol: T) -> UserPlan<T> {
        let demand = inst.demand(k);
        let peak = uniform_rate(inst, k, subs, T::zero());
        let ratio = if peak < demand - tol {
            T::zero()
        } else if peak < demand {
            // within tolerance only: give every bit we have
            T::zero()
        } else {
            max_ratio_for_demand(inst, k, subs, demand)
        };
        let rate = uniform_rate(inst, k, subs, ratio);
        UserPlan {
            harvest: inst.zeta() * ratio * inst.total_rx(k),
            rate,
            feasible: rate >= demand - tol,
            ratios: Ratios::Uniform(ratio),
        }
    }

    fn peak_rate(&self, inst: &Instance<T>, k: usize, n: usize) -> T {
        inst.rate_unchecked(k, n, T::zero())
    }

    fn build(&self, assignment: &Assignment, plans: &[UserPlan<T>]) -> AllocationPa<T> {
        let split = plans
            .iter()
            .map(|p| match p.ratios {
                Ratios::Uniform(r) => r,
                Ratios::PerSubcarrier(_) => unreachable!("practical plan is uniform"),
            })
            .collect();
        AllocationPa {
            assignment: assignment.clone(),
            split,
        }
    }
}

/// Every user splits with the same fixed ratio.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FixedRatioRx<T>(pub T);

impl<T: Scalar> Receiver<T> for FixedRatioRx<T> {
    type Alloc = AllocationPa<T>;

    fn plan(&self, inst: &Instance<T>, k: usize, subs: &[usize], tol: T) -> UserPlan<T> {
        let rate = uniform_rate(inst, k, subs, self.0);
        UserPlan {
            harvest: inst.zeta() * self.0 * inst.total_rx(k),
            rate,
            feasible: rate >= inst.demand(k) - tol,
            ratios: Ratios::Uniform(self.0),
        }
    }

    fn peak_rate(&self, inst: &Instance<T>, k: usize, n: usize) -> T {
        inst.rate_unchecked(k, n, self.0)
    }

    fn build(&self, assignment: &Assignment, plans: &[UserPlan<T>]) -> AllocationPa<T> {
        PracticalRx.build(assignment, plans)
    }
}

/// Independent ratio per (user, subcarrier) (upper-bound receiver).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PerSubcarrierRx;

impl PerSubcarrierRx {
    fn harvest_of<T: Scalar>(inst: &Instance<T>, k: usize, ratios: &[(usize, T)]) -> T {
        let lost = ratios
            .iter()
            .map(|&(n, r)| (T::one() - r) * inst.rx(k, n))
            .fold(T::zero(), |a, b| a + b);
        inst.zeta() * (inst.total_rx(k) - lost)
    }

    fn rate_of<T: Scalar>(inst: &Instance<T>, k: usize, ratios: &[(usize, T)]) -> T {
        ratios
            .iter()
            .map(|&(n, r)| inst.rate_unchecked(k, n, r))
            .fold(T::zero(), |a, b| a + b)
    }

    fn sorted<T: Scalar>(useful: &[usize], key: impl Fn(usize) -> T) -> Vec<usize> {
        let mut v = useful.to_vec();
        v.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(&b)));
        v
    }

    /// Water-filling restricted to `set`: the common level `W = y + σ²`
    /// that meets `demand`, or `None` if the set cannot.
    fn level_split<T: Scalar>(
        inst: &Instance<T>,
        k: usize,
        set: &[usize],
        demand: T,
        sigma2: T,
    ) -> Option<Vec<(usize, T)>> {
        let level_rate = |w: T| -> T {
            set.iter()
                .map(|&n| {
                    (w.min(inst.rx(k, n) + sigma2) / inst.leak(k, n))
                        .log2()
                        .pos()
                })
                .fold(T::zero(), |a, b| a + b)
        };
        let top = set
            .iter()
            .map(|&n| inst.rx(k, n) + sigma2)
            .fold(T::zero(), T::max);
        if level_rate(top) < demand {
            return None;
        }
        let (mut lo, mut hi) = (sigma2, top);
        for _ in 0..BISECT_STEPS {
            let mid = T::half() * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if level_rate(mid) >= demand {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(Self::ratios_at_level(inst, k, set, hi, sigma2))
    }

    fn ratios_at_level<T: Scalar>(
        inst: &Instance<T>,
        k: usize,
        set: &[usize],
        w: T,
        sigma2: T,
    ) -> Vec<(usize, T)> {
        set.iter()
            .map(|&n| {
                if w <= inst.leak(k, n) {
                    (n, T::one())
                } else {
                    let y = w.min(inst.rx(k, n) + sigma2) - sigma2;
                    (n, (T::one() - y / inst.rx(k, n)).clamp01())
                }
            })
            .collect()
    }

    /// Minimum-decoder-power split reaching `demand`: find the smallest
    /// multiplier whose per-subcarrier optimum reaches the demand, then lower
    /// the common water level on the subcarriers it switched on until the
    /// demand is met with equality.
    fn water_level_split<T: Scalar>(
        inst: &Instance<T>,
        k: usize,
        useful: &[usize],
        demand: T,
    ) -> Vec<(usize, T)> {
        let zeta = inst.zeta();
        let ln2 = T::LN_2();
        let sigma2 = inst.noise();
        let ratios_at = |lambda: T| -> Vec<(usize, T)> {
            useful
                .iter()
                .map(|&n| (n, rho_star_ub(inst, k, n, lambda, RhoFormula::Derived)))
                .collect()
        };
        let mut hi = useful
            .iter()
            .map(|&n| {
                let full = inst.rate_unchecked(k, n, T::zero());
                (zeta * ln2 * (inst.rx(k, n) + sigma2)).max(zeta * inst.rx(k, n) / full)
            })
            .fold(T::zero(), T::max)
            * T::two();
        while Self::rate_of(inst, k, &ratios_at(hi)) < demand && hi.is_finite() {
            hi *= T::two();
        }
        let mut lo = T::zero();
        for _ in 0..BISECT_STEPS {
            let mid = T::half() * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if Self::rate_of(inst, k, &ratios_at(mid)) >= demand {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let active: Vec<usize> = ratios_at(hi)
            .into_iter()
            .filter(|&(_, r)| r < T::one())
            .map(|(n, _)| n)
            .collect();
        let level_rate = |w: T| -> T {
            active
                .iter()
                .map(|&n| {
                    (w.min(inst.rx(k, n) + sigma2) / inst.leak(k, n))
                        .log2()
                        .pos()
                })
                .fold(T::zero(), |a, b| a + b)
        };
        // water level `W = y + σ²` implied by the multiplier on active subcarriers
        let (mut wlo, mut whi) = (sigma2, hi / (zeta * ln2));
        if level_rate(whi) < demand {
            return ratios_at(hi);
        }
        for _ in 0..BISECT_STEPS {
            let mid = T::half() * (wlo + whi);
            if mid <= wlo || mid >= whi {
                break;
            }
            if level_rate(mid) >= demand {
                whi = mid;
            } else {
                wlo = mid;
            }
        }
        Self::ratios_at_level(inst, k, &active, whi, sigma2)
    }
}

impl<T: Scalar> Receiver<T> for PerSubcarrierRx {
    type Alloc = AllocationUb<T>;

    fn plan(&self, inst: &Instance<T>, k: usize, subs: &[usize], tol: T) -> UserPlan<T> {
        let demand = inst.demand(k);
        if demand <= T::zero() {
            return UserPlan {
                harvest: inst.zeta() * inst.total_rx(k),
                rate: T::zero(),
                feasible: true,
                ratios: Ratios::PerSubcarrier(Vec::new()),
            };
        }
        let useful: Vec<usize> = subs
            .iter()
            .copied()
            .filter(|&n| inst.rate_breakpoint(k, n) > T::zero())
            .collect();
        let all_in: Vec<(usize, T)> = useful.iter().map(|&n| (n, T::zero())).collect();
        let peak = Self::rate_of(inst, k, &all_in);
        let ratios = if peak < demand {
            all_in
        } else {
            let ok = |r: &[(usize, T)]| Self::rate_of(inst, k, r) >= demand - tol;
            let mut best: Option<(T, Vec<(usize, T)>)> = None;
            let mut offer = |r: Vec<(usize, T)>| {
                if ok(&r) {
                    let h = Self::harvest_of(inst, k, &r);
                    if best.as_ref().is_none_or(|(bh, _)| h > *bh) {
                        best = Some((h, r));
                    }
                }
            };
            offer(Self::water_level_split(inst, k, &useful, demand));
            // the uniform split is always admissible here
            let rho = max_ratio_for_demand(inst, k, &useful, demand);
            offer(
                useful
                    .iter()
                    .map(|&n| {
                        let r = if inst.rate_unchecked(k, n, rho) > T::zero() {
                            rho
                        } else {
                            T::one()
                        };
                        (n, r)
                    })
                    .collect(),
            );
            // Each subcarrier costs p β of decoder power before it yields any
            // rate, so water-filling fewer subcarriers can be cheaper. Try
            // prefixes of a few natural orderings.
            let sigma2 = inst.noise();
            let by_leak = Self::sorted(&useful, |n| inst.leak(k, n));
            let by_rate = Self::sorted(&useful, |n| -inst.rate_unchecked(k, n, T::zero()));
            let by_rx = Self::sorted(&useful, |n| -inst.rx(k, n));
            for order in [by_leak, by_rate, by_rx] {
                for len in 1..=order.len() {
                    if let Some(r) = Self::level_split(inst, k, &order[..len], demand, sigma2) {
                        offer(r);
                    }
                }
            }
            match best {
                Some((_, r)) => r,
                None => all_in,
            }
        };
        let rate = Self::rate_of(inst, k, &ratios);
        UserPlan {
            harvest: Self::harvest_of(inst, k, &ratios),
            rate,
            feasible: rate >= demand - tol,
            ratios: Ratios::PerSubcarrier(ratios),
        }
    }

    fn peak_rate(&self, inst: &Instance<T>, k: usize, n: usize) -> T {
        inst.rate_unchecked(k, n, T::zero())
    }

    fn build(&self, assignment: &Assignment, plans: &[UserPlan<T>]) -> AllocationUb<T> {
        let subcarriers = assignment.num_subcarriers();
        let mut split = vec![T::one(); plans.len() * subcarriers];
        for (k, p) in plans.iter().enumerate() {
            match &p.ratios {
                Ratios::PerSubcarrier(r) => {
                    for &(n, v) in r {
                        split[k * subcarriers + n] = v;
                    }
                }
                Ratios::Uniform(_) => unreachable!("upper-bound plan is per subcarrier"),
            }
        }
        AllocationUb {
            assignment: assignment.clone(),
            split,
        }
    }
}

/// Assignment plus the per-user plans the receiver chose for it.
#[derive(Debug, Clone)]
pub(crate) struct Primal<T> {
    pub assignment: Assignment,
    pub plans: Vec<UserPlan<T>>,
    pub objective: T,
    pub violation: T,
    pub feasible: bool,
}

impl<T: Scalar> Primal<T> {
    /// Feasible beats infeasible; among feasible the larger objective wins,
    /// among infeasible the smaller violation.
    pub fn better_than(&self, other: &Primal<T>) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.objective > other.objective,
            (false, false) => {
                self.violation < other.violation
                    || (self.violation == other.violation && self.objective > other.objective)
            }
        }
    }
}

pub(crate) fn subcarriers_by_user(assignment: &Assignment) -> Vec<Vec<usize>> {
    let mut subs = vec![Vec::new(); assignment.num_users()];
    for (n, o) in assignment.owners().iter().enumerate() {
        if let Some(k) = o {
            subs[*k].push(n);
        }
    }
    subs
}

/// Best ratios for a fixed assignment.
pub(crate) fn settle<T: Scalar, R: Receiver<T>>(
    rx: &R,
    inst: &Instance<T>,
    assignment: &Assignment,
    tol: T,
) -> Primal<T> {
    let subs = subcarriers_by_user(assignment);
    let plans: Vec<UserPlan<T>> = subs
        .iter()
        .enumerate()
        .map(|(k, s)| rx.plan(inst, k, s, tol))
        .collect();
    assemble(inst, assignment.clone(), plans)
}

fn assemble<T: Scalar>(
    inst: &Instance<T>,
    assignment: Assignment,
    plans: Vec<UserPlan<T>>,
) -> Primal<T> {
    let objective = plans.iter().fold(T::zero(), |a, p| a + p.harvest);
    let violation = plans
        .iter()
        .enumerate()
        .map(|(k, p)| (inst.demand(k) - p.rate).pos())
        .fold(T::zero(), T::max);
    let feasible = plans.iter().all(|p| p.feasible);
    Primal {
        assignment,
        plans,
        objective,
        violation,
        feasible,
    }
}

/// Greedy feasibility repair. While some user misses its demand, give the
/// most-violated user the subcarrier with the best ratio of rate gained to
/// harvest lost by its current holder, never taking from a user who would
/// then fall short. Infeasible users never multiply, so the loop terminates.
pub(crate) fn repair<T: Scalar, R: Receiver<T>>(
    rx: &R,
    inst: &Instance<T>,
    start: &Assignment,
    tol: T,
) -> Primal<T> {
    let mut current = settle(rx, inst, start, tol);
    let (users, subcarriers) = (inst.num_users(), inst.num_subcarriers());
    let eps = T::lit(1e-12) * inst.full_harvest().max(T::min_positive_value());
    for _ in 0..users * subcarriers + 1 {
        if current.feasible {
            break;
        }
        // most violated user first, lowest index on ties
        let Some(k) = (0..users)
            .filter(|&k| !current.plans[k].feasible)
            .max_by(|&a, &b| {
                let da = inst.demand(a) - current.plans[a].rate;
                let db = inst.demand(b) - current.plans[b].rate;
                da.partial_cmp(&db)
                    .unwrap_or(Ordering::Equal)
                    .then(b.cmp(&a))
            })
        else {
            break;
        };
        let subs = subcarriers_by_user(&current.assignment);
        let mut best: Option<(T, usize, Option<UserPlan<T>>)> = None;
        for n in 0..subcarriers {
            let holder = current.assignment.owner(n);
            if holder == Some(k) {
                continue;
            }
            let gain = rx.peak_rate(inst, k, n);
            if gain <= T::zero() {
                continue;
            }
            let (loss, new_plan) = match holder {
                None => (T::zero(), None),
                Some(j) => {
                    if !current.plans[j].feasible {
                        continue;
                    }
                    let rest: Vec<usize> = subs[j].iter().copied().filter(|&m| m != n).collect();
                    let plan = rx.plan(inst, j, &rest, tol);
                    if !plan.feasible {
                        continue;
                    }
                    ((current.plans[j].harvest - plan.harvest).pos(), Some(plan))
                }
            };
            let score = gain / (loss + eps);
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, n, new_plan));
            }
        }
        let Some((_, n, holder_plan)) = best else {
            break;
        };
        let mut assignment = current.assignment.clone();
        let holder = assignment.owner(n);
        assignment.set(n, Some(k));
        let mut plans = current.plans.clone();
        if let (Some(j), Some(p)) = (holder, holder_plan) {
            plans[j] = p;
        }
        let mine: Vec<usize> = assignment.subcarriers_of(k).collect();
        plans[k] = rx.plan(inst, k, &mine, tol);
        current = assemble(inst, assignment, plans);
    }
    current
}

/// First-improvement local search over single-subcarrier moves between
/// users. Only the two users involved are re-planned per move. Stops when no
/// move improves the primal or after `max_sweeps` passes.
pub(crate) fn local_search<T: Scalar, R: Receiver<T>>(
    rx: &R,
    inst: &Instance<T>,
    start: Primal<T>,
    tol: T,
    max_sweeps: usize,
) -> Primal<T> {
    let (users, subcarriers) = (inst.num_users(), inst.num_subcarriers());
    let mut current = start;
    let mut subs = subcarriers_by_user(&current.assignment);
    for _ in 0..max_sweeps {
        let mut improved = false;
        for n in 0..subcarriers {
            let from = current.assignment.owner(n);
            for to in 0..users {
                if Some(to) == from || rx.peak_rate(inst, to, n) <= T::zero() {
                    continue;
                }
                let mut plans = current.plans.clone();
                if let Some(j) = from {
                    let rest: Vec<usize> = subs[j].iter().copied().filter(|&m| m != n).collect();
                    plans[j] = rx.plan(inst, j, &rest, tol);
                }
                let mut mine = subs[to].clone();
                mine.push(n);
                mine.sort_unstable();
                plans[to] = rx.plan(inst, to, &mine, tol);
                let mut assignment = current.assignment.clone();
                assignment.set(n, Some(to));
                let cand = assemble(inst, assignment, plans);
                if cand.better_than(&current) && !nearly_equal(&cand, &current) {
                    current = cand;
                    subs = subcarriers_by_user(&current.assignment);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    current
}

/// Unassigns subcarriers that carry no secrecy rate for their holder at its
/// splitting ratio. Rates and harvest are unchanged; only the power routed to
/// a decoder with nothing to decode is dropped from the allocation.
pub(crate) fn release_idle<T: Scalar>(inst: &Instance<T>, alloc: &mut AllocationPa<T>) {
    for n in 0..inst.num_subcarriers() {
        if let Some(k) = alloc.assignment.owner(n) {
            if inst.rate_unchecked(k, n, alloc.split[k]) <= T::zero() {
                alloc.assignment.set(n, None);
            }
        }
    }
}

/// Guards against cycling on improvements at rounding level.
fn nearly_equal<T: Scalar>(a: &Primal<T>, b: &Primal<T>) -> bool {
    a.feasible == b.feasible
        && if a.feasible {
            a.objective - b.objective <= T::lit(1e-12) * b.objective.abs()
        } else {
            b.violation - a.violation <= T::lit(1e-12) * b.violation.abs()
        }
}
