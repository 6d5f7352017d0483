//! Brute-force reference solutions for small instances: every assignment in
//! `{unassigned, 0..K}^N` combined with a grid search over splitting ratios.
//!
//! With the assignment fixed, both problem variants separate per user, so
//! each user's best grid point is found on its own and memoised by the set
//! of subcarriers it holds. The result equals the joint grid search.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{evaluate, AllocationPa, AllocationUb, Assignment, Instance, SolveReport};
use crate::scalar::Scalar;

pub use crate::solve::max_secrecy_capacity;

/// Ratio grid step used when none is given.
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 256.0;
/// Cap on enumerated assignments, `(K + 1)^N`.
pub const MAX_ASSIGNMENTS: f64 = 1e5;
/// Cap on grid points searched jointly.
pub const MAX_GRID_POINTS: f64 = 1e7;

fn grid_intervals(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grid step {step} outside (0, 1]"
        )));
    }
    Ok((1.0 / step).round().max(1.0) as usize)
}

fn check_assignments<T: Scalar>(inst: &Instance<T>) -> Result<usize> {
    let (k, n) = (inst.num_users(), inst.num_subcarriers());
    let count = ((k + 1) as f64).powi(n as i32);
    if count > MAX_ASSIGNMENTS || n > 63 {
        return Err(Error::GuardRail(format!(
            "(K+1)^N = {count:.3e} assignments exceeds {MAX_ASSIGNMENTS:.0e}"
        )));
    }
    Ok(count as usize)
}

fn owners_of(code: usize, users: usize, subcarriers: usize) -> Vec<Option<usize>> {
    let mut c = code;
    (0..subcarriers)
        .map(|_| {
            let d = c % (users + 1);
            c /= users + 1;
            d.checked_sub(1)
        })
        .collect()
}

fn masks_of(owner: &[Option<usize>], users: usize) -> Vec<u64> {
    let mut m = vec![0u64; users];
    for (n, o) in owner.iter().enumerate() {
        if let Some(k) = o {
            m[*k] |= 1 << n;
        }
    }
    m
}

fn subs_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|n| mask >> n & 1 == 1).collect()
}

/// Best grid outcome for one user: harvest, rate and the ratios chosen.
#[derive(Debug, Clone)]
struct UserBest<T> {
    harvest: T,
    feasible: bool,
    shortfall: T,
    ratios: Vec<T>,
}

/// Enumerates assignments and combines per-user results. `user` receives
/// `(k, mask)` and is called once per distinct pair.
fn enumerate<T: Scalar>(
    inst: &Instance<T>,
    mut user: impl FnMut(usize, u64) -> UserBest<T>,
) -> Result<(Assignment, Vec<UserBest<T>>)> {
    let (users, subcarriers) = (inst.num_users(), inst.num_subcarriers());
    let count = check_assignments(inst)?;
    let mut memo: HashMap<(usize, u64), UserBest<T>> = HashMap::new();
    // (feasible, objective, violation, code)
    let mut best: Option<(bool, T, T, usize)> = None;
    for code in 0..count {
        let owner = owners_of(code, users, subcarriers);
        let masks = masks_of(&owner, users);
        let (mut obj, mut viol, mut ok) = (T::zero(), T::zero(), true);
        for (k, &m) in masks.iter().enumerate() {
            let b = memo.entry((k, m)).or_insert_with(|| user(k, m));
            obj += b.harvest;
            viol = viol.max(b.shortfall);
            ok &= b.feasible;
        }
        let better = match best {
            None => true,
            Some((bf, bo, bv, _)) => match (ok, bf) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => obj > bo,
                (false, false) => viol < bv,
            },
        };
        if better {
            best = Some((ok, obj, viol, code));
        }
    }
    let (_, _, _, code) = best.expect("at least one assignment");
    let owner = owners_of(code, users, subcarriers);
    let masks = masks_of(&owner, users);
    let plans = masks
        .iter()
        .enumerate()
        .map(|(k, m)| memo[&(k, *m)].clone())
        .collect();
    Ok((Assignment::from_owners(users, owner)?, plans))
}

fn rate_sum<T: Scalar>(inst: &Instance<T>, k: usize, subs: &[usize], ratio: T) -> T {
    subs.iter()
        .map(|&n| inst.rate_unchecked(k, n, ratio))
        .fold(T::zero(), |a, b| a + b)
}

/// Exhaustive search for the practical receiver with ratios on
/// `{0, step, 2 step, ..., 1}`.
pub fn oracle_pa<T: Scalar>(
    inst: &Instance<T>,
    grid_step: f64,
) -> Result<(AllocationPa<T>, SolveReport<T>)> {
    let g = grid_intervals(grid_step)?;
    let joint = ((g + 1) as f64).powi(inst.num_users() as i32);
    if joint > MAX_GRID_POINTS {
        return Err(Error::GuardRail(format!(
            "grid^K = {joint:.3e} exceeds {MAX_GRID_POINTS:.0e}"
        )));
    }
    let tol = T::lit(crate::model::DEFAULT_RATE_TOLERANCE);
    let gt = T::from_usize(g).unwrap();
    let (assignment, plans) = enumerate(inst, |k, mask| {
        let subs = subs_of(mask);
        let demand = inst.demand(k);
        // rate is nonincreasing in ρ: the first grid point from the top that
        // meets the demand harvests the most
        let hit = (0..=g)
            .rev()
            .map(|i| T::from_usize(i).unwrap() / gt)
            .find(|&r| rate_sum(inst, k, &subs, r) >= demand - tol);
        match hit {
            Some(r) => UserBest {
                harvest: inst.zeta() * r * inst.total_rx(k),
                feasible: true,
                shortfall: (demand - rate_sum(inst, k, &subs, r)).pos(),
                ratios: vec![r],
            },
            None => UserBest {
                harvest: T::zero(),
                feasible: false,
                shortfall: demand - rate_sum(inst, k, &subs, T::zero()),
                ratios: vec![T::zero()],
            },
        }
    })?;
    let split = plans.iter().map(|p| p.ratios[0]).collect();
    let alloc = AllocationPa::new(assignment, split)?;
    let report = evaluate(inst, &alloc);
    Ok((alloc, report))
}

/// Exhaustive search for the upper-bound receiver with an independent grid
/// ratio on every assigned pair; unassigned pairs harvest fully.
pub fn oracle_ub<T: Scalar>(
    inst: &Instance<T>,
    grid_step: f64,
) -> Result<(AllocationUb<T>, SolveReport<T>)> {
    let g = grid_intervals(grid_step)?;
    let n = inst.num_subcarriers();
    let joint = ((g + 1) as f64).powi(n as i32 - 1);
    if joint > MAX_GRID_POINTS {
        return Err(Error::GuardRail(format!(
            "grid^(N-1) = {joint:.3e} exceeds {MAX_GRID_POINTS:.0e}"
        )));
    }
    let tol = T::lit(crate::model::DEFAULT_RATE_TOLERANCE);
    let gt = T::from_usize(g).unwrap();
    let point = |i: usize| T::from_usize(i).unwrap() / gt;
    let (assignment, plans) = enumerate(inst, |k, mask| {
        let demand = inst.demand(k);
        let subs = subs_of(mask);
        let mut ratios = vec![T::one(); subs.len()];
        let full = |ratios: &[T]| UserBest {
            harvest: harvest_ub(inst, k, &subs, ratios),
            feasible: true,
            shortfall: T::zero(),
            ratios: ratios.to_vec(),
        };
        if demand <= T::zero() {
            return full(&ratios);
        }
        // pairs that can never carry rate stay at ρ = 1
        let useful: Vec<usize> = (0..subs.len())
            .filter(|&i| inst.rate_breakpoint(k, subs[i]) > T::zero())
            .collect();
        let peak = useful
            .iter()
            .map(|&i| inst.rate_unchecked(k, subs[i], T::zero()))
            .fold(T::zero(), |a, b| a + b);
        if peak < demand - tol {
            for &i in &useful {
                ratios[i] = T::zero();
            }
            return UserBest {
                harvest: harvest_ub(inst, k, &subs, &ratios),
                feasible: false,
                shortfall: demand - peak,
                ratios,
            };
        }
        let (last, head) = useful.split_last().expect("peak > 0 means a useful pair");
        let last_n = subs[*last];
        let mut best: Option<(T, Vec<T>)> = None;
        let mut idx = vec![0usize; head.len()];
        loop {
            let head_rate = head
                .iter()
                .zip(&idx)
                .map(|(&i, &j)| inst.rate_unchecked(k, subs[i], point(j)))
                .fold(T::zero(), |a, b| a + b);
            let need = demand - tol - head_rate;
            // largest grid index on the last pair still meeting the demand
            let pick = if need <= T::zero() {
                Some(g)
            } else if inst.rate_unchecked(k, last_n, T::zero()) < need {
                None
            } else {
                let (mut lo, mut hi) = (0usize, g);
                while lo < hi {
                    let mid = (lo + hi).div_ceil(2);
                    if inst.rate_unchecked(k, last_n, point(mid)) >= need {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                Some(lo)
            };
            if let Some(j_last) = pick {
                let mut r = ratios.clone();
                for (&i, &j) in head.iter().zip(&idx) {
                    r[i] = point(j);
                }
                r[*last] = point(j_last);
                let h = harvest_ub(inst, k, &subs, &r);
                if best.as_ref().is_none_or(|(bh, _)| h > *bh) {
                    best = Some((h, r));
                }
            }
            // odometer over the head grid indices
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] <= g {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
        let (_, r) = best.expect("ρ = 0 everywhere meets the demand");
        full(&r)
    })?;
    let (users, subcarriers) = (inst.num_users(), n);
    let mut split = vec![T::one(); users * subcarriers];
    for (k, p) in plans.iter().enumerate() {
        for (&sn, &r) in assignment
            .subcarriers_of(k)
            .collect::<Vec<_>>()
            .iter()
            .zip(&p.ratios)
        {
            split[k * subcarriers + sn] = r;
        }
    }
    let alloc = AllocationUb::new(assignment, split)?;
    let report = evaluate(inst, &alloc);
    Ok((alloc, report))
}

fn harvest_ub<T: Scalar>(inst: &Instance<T>, k: usize, subs: &[usize], ratios: &[T]) -> T {
    let lost = subs
        .iter()
        .zip(ratios)
        .map(|(&n, &r)| (T::one() - r) * inst.rx(k, n))
        .fold(T::zero(), |a, b| a + b);
    inst.zeta() * (inst.total_rx(k) - lost)
}
