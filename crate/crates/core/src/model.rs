//! Physical model of the secure SWIPT OFDMA downlink.
//!
//! One base station serves `K` users over `N` subcarriers with equal power per
//! subcarrier. Every receiver splits its RF signal: a fraction `ρ` goes to the
//! energy harvester and `1 − ρ` to the information decoder. Every other user
//! is treated as a potential eavesdropper, so the eavesdropping gain seen by
//! user `k` on subcarrier `n` is the strongest competing gain on `n`.
//!
//! Rates are in bits per OFDM symbol (base-2 logarithms) and all powers are
//! linear milliwatts; dBm appears only at configuration boundaries.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feasibility slack on secrecy-rate constraints, in bits.
pub const DEFAULT_RATE_TOLERANCE: f64 = 1e-6;

/// Static problem parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    subcarrier_power: Vec<T>,
    noise_power: T,
    conversion_efficiency: T,
    secrecy_demand: Vec<T>,
}

impl<T: Scalar> SystemConfig<T> {
    pub fn new(
        subcarrier_power: Vec<T>,
        noise_power: T,
        conversion_efficiency: T,
        secrecy_demand: Vec<T>,
    ) -> Result<Self> {
        let cfg = Self {
            subcarrier_power,
            noise_power,
            conversion_efficiency,
            secrecy_demand,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Splits `total_power_mw` evenly over `num_subcarriers`.
    pub fn with_uniform_power(
        total_power_mw: T,
        num_subcarriers: usize,
        noise_power: T,
        conversion_efficiency: T,
        secrecy_demand: Vec<T>,
    ) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::InvalidConfig("need at least one subcarrier".into()));
        }
        let per = total_power_mw / T::from_usize(num_subcarriers).unwrap();
        Self::new(
            vec![per; num_subcarriers],
            noise_power,
            conversion_efficiency,
            secrecy_demand,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.subcarrier_power.is_empty() {
            return Err(Error::InvalidConfig("need at least one subcarrier".into()));
        }
        if self.secrecy_demand.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least two users, got {}",
                self.secrecy_demand.len()
            )));
        }
        if let Some(p) = self
            .subcarrier_power
            .iter()
            .find(|p| !(p.is_finite() && **p > T::zero()))
        {
            return Err(Error::InvalidConfig(format!(
                "subcarrier power {p} must be > 0"
            )));
        }
        if !(self.noise_power.is_finite() && self.noise_power > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "noise power {} must be > 0",
                self.noise_power
            )));
        }
        let z = self.conversion_efficiency;
        if !(z > T::zero() && z < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "conversion efficiency {z} must lie in (0, 1)"
            )));
        }
        if let Some(c) = self
            .secrecy_demand
            .iter()
            .find(|c| !(c.is_finite() && **c >= T::zero()))
        {
            return Err(Error::InvalidConfig(format!(
                "secrecy demand {c} must be >= 0"
            )));
        }
        Ok(())
    }

    /// Same parameters with different per-user demands.
    pub fn with_demands(&self, secrecy_demand: Vec<T>) -> Result<Self> {
        if secrecy_demand.len() != self.num_users() {
            return Err(Error::InvalidConfig(format!(
                "expected {} demands, got {}",
                self.num_users(),
                secrecy_demand.len()
            )));
        }
        Self::new(
            self.subcarrier_power.clone(),
            self.noise_power,
            self.conversion_efficiency,
            secrecy_demand,
        )
    }

    pub fn num_users(&self) -> usize {
        self.secrecy_demand.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarrier_power.len()
    }

    pub fn subcarrier_power(&self) -> &[T] {
        &self.subcarrier_power
    }

    pub fn noise_power(&self) -> T {
        self.noise_power
    }

    pub fn conversion_efficiency(&self) -> T {
        self.conversion_efficiency
    }

    pub fn secrecy_demand(&self) -> &[T] {
        &self.secrecy_demand
    }
}

/// Per-(user, subcarrier) power gains and the induced eavesdropper gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState<T> {
    users: usize,
    subcarriers: usize,
    gain: Vec<T>,
    eaves: Vec<T>,
}

impl<T: Scalar> ChannelState<T> {
    /// Builds the state from a row-major `users × subcarriers` gain matrix.
    pub fn from_gains(users: usize, subcarriers: usize, gain: Vec<T>) -> Result<Self> {
        if users < 2 {
            return Err(Error::InvalidChannel(format!(
                "need at least two users, got {users}"
            )));
        }
        if subcarriers == 0 || gain.len() != users * subcarriers {
            return Err(Error::InvalidChannel(format!(
                "gain matrix has {} entries, expected {users}x{subcarriers}",
                gain.len()
            )));
        }
        if let Some(g) = gain.iter().find(|g| !(g.is_finite() && **g > T::zero())) {
            return Err(Error::InvalidChannel(format!("gain {g} must be > 0")));
        }
        let eaves = eavesdropper_gains(users, subcarriers, &gain);
        Ok(Self {
            users,
            subcarriers,
            gain,
            eaves,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let subcarriers = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != subcarriers) {
            return Err(Error::InvalidChannel("ragged gain rows".into()));
        }
        Self::from_gains(rows.len(), subcarriers, rows.concat())
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarriers
    }

    #[inline]
    pub fn gain(&self, k: usize, n: usize) -> T {
        self.gain[k * self.subcarriers + n]
    }

    #[inline]
    pub fn eaves_gain(&self, k: usize, n: usize) -> T {
        self.eaves[k * self.subcarriers + n]
    }

    pub fn gains(&self) -> &[T] {
        &self.gain
    }

    /// True when every stored eavesdropper gain equals the max over the
    /// other users' gains.
    pub fn eaves_consistent(&self) -> bool {
        eavesdropper_gains(self.users, self.subcarriers, &self.gain) == self.eaves
    }
}

fn eavesdropper_gains<T: Scalar>(users: usize, subcarriers: usize, gain: &[T]) -> Vec<T> {
    let mut eaves = vec![T::zero(); gain.len()];
    for n in 0..subcarriers {
        // best and runner-up per column give the max over k' != k in O(K)
        let (mut best, mut second, mut best_k) = (T::neg_infinity(), T::neg_infinity(), 0);
        for k in 0..users {
            let g = gain[k * subcarriers + n];
            if g > best {
                second = best;
                best = g;
                best_k = k;
            } else if g > second {
                second = g;
            }
        }
        for k in 0..users {
            eaves[k * subcarriers + n] = if k == best_k { second } else { best };
        }
    }
    eaves
}

/// A configuration paired with a channel realisation, with the products the
/// solvers touch in every inner loop precomputed.
#[derive(Debug, Clone)]
pub struct Instance<T> {
    cfg: SystemConfig<T>,
    ch: ChannelState<T>,
    /// `p_n h[k][n]`
    rx: Vec<T>,
    /// `p_n β[k][n] + σ²`
    leak: Vec<T>,
    /// `Σ_n p_n h[k][n]`
    total_rx: Vec<T>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(cfg: SystemConfig<T>, ch: ChannelState<T>) -> Result<Self> {
        if cfg.num_users() != ch.num_users() || cfg.num_subcarriers() != ch.num_subcarriers() {
            return Err(Error::InvalidConfig(format!(
                "config is {}x{} but channel is {}x{}",
                cfg.num_users(),
                cfg.num_subcarriers(),
                ch.num_users(),
                ch.num_subcarriers()
            )));
        }
        debug_assert!(ch.eaves_consistent());
        let (users, subcarriers) = (cfg.num_users(), cfg.num_subcarriers());
        let sigma2 = cfg.noise_power();
        let mut rx = Vec::with_capacity(users * subcarriers);
        let mut leak = Vec::with_capacity(users * subcarriers);
        for k in 0..users {
            for n in 0..subcarriers {
                let p = cfg.subcarrier_power()[n];
                rx.push(p * ch.gain(k, n));
                leak.push(p * ch.eaves_gain(k, n) + sigma2);
            }
        }
        let total_rx = rx
            .chunks(subcarriers)
            .map(|row| row.iter().fold(T::zero(), |a, &b| a + b))
            .collect();
        Ok(Self {
            cfg,
            ch,
            rx,
            leak,
            total_rx,
        })
    }

    pub fn config(&self) -> &SystemConfig<T> {
        &self.cfg
    }

    pub fn channel(&self) -> &ChannelState<T> {
        &self.ch
    }

    pub fn num_users(&self) -> usize {
        self.cfg.num_users()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.cfg.num_subcarriers()
    }

    pub fn zeta(&self) -> T {
        self.cfg.conversion_efficiency()
    }

    pub fn noise(&self) -> T {
        self.cfg.noise_power()
    }

    pub fn demand(&self, k: usize) -> T {
        self.cfg.secrecy_demand()[k]
    }

    /// Received power `p_n h[k][n]` in mW.
    #[inline]
    pub fn rx(&self, k: usize, n: usize) -> T {
        self.rx[k * self.num_subcarriers() + n]
    }

    /// Eavesdropper-side denominator `p_n β[k][n] + σ²` in mW.
    #[inline]
    pub fn leak(&self, k: usize, n: usize) -> T {
        self.leak[k * self.num_subcarriers() + n]
    }

    /// `Σ_n p_n h[k][n]`, the power user `k` receives over the whole band.
    #[inline]
    pub fn total_rx(&self, k: usize) -> T {
        self.total_rx[k]
    }

    /// Ratio below which subcarrier `n` carries a positive secrecy rate for
    /// user `k`, i.e. `1 − β/h`. Non-positive when the eavesdropper is at
    /// least as strong.
    #[inline]
    pub fn rate_breakpoint(&self, k: usize, n: usize) -> T {
        T::one() - self.ch.eaves_gain(k, n) / self.ch.gain(k, n)
    }

    /// Same instance with new demands.
    pub fn with_demands(&self, demands: Vec<T>) -> Result<Self> {
        Ok(Self {
            cfg: self.cfg.with_demands(demands)?,
            ch: self.ch.clone(),
            rx: self.rx.clone(),
            leak: self.leak.clone(),
            total_rx: self.total_rx.clone(),
        })
    }

    /// `ζ Σ_k Σ_n p_n h[k][n]`, the harvest when nobody decodes anything.
    pub fn full_harvest(&self) -> T {
        self.zeta() * self.total_rx.iter().fold(T::zero(), |a, &b| a + b)
    }

    #[inline]
    pub(crate) fn rate_unchecked(&self, k: usize, n: usize, ratio: T) -> T {
        let s = self.num_subcarriers();
        let i = k * s + n;
        (((T::one() - ratio) * self.rx[i] + self.cfg.noise_power()) / self.leak[i])
            .log2()
            .pos()
    }
}

/// Which user (if any) holds each subcarrier. Storing one owner per
/// subcarrier makes `Σ_k x[k][n] ≤ 1` hold by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    users: usize,
    owner: Vec<Option<usize>>,
}

impl Assignment {
    pub fn unassigned(users: usize, subcarriers: usize) -> Self {
        Self {
            users,
            owner: vec![None; subcarriers],
        }
    }

    pub fn from_owners(users: usize, owner: Vec<Option<usize>>) -> Result<Self> {
        if let Some(k) = owner.iter().flatten().find(|&&k| k >= users) {
            return Err(Error::InvalidAllocation(format!(
                "owner {k} out of range for {users} users"
            )));
        }
        Ok(Self { users, owner })
    }

    /// Builds from a binary `x[k][n]` matrix; rejects columns with more than
    /// one set entry.
    pub fn from_matrix(x: &[Vec<bool>]) -> Result<Self> {
        let subcarriers = x.first().map_or(0, Vec::len);
        let mut owner = vec![None; subcarriers];
        for (k, row) in x.iter().enumerate() {
            if row.len() != subcarriers {
                return Err(Error::InvalidAllocation("ragged assignment matrix".into()));
            }
            for (n, &set) in row.iter().enumerate() {
                if set {
                    if owner[n].is_some() {
                        return Err(Error::InvalidAllocation(format!(
                            "subcarrier {n} assigned to more than one user"
                        )));
                    }
                    owner[n] = Some(k);
                }
            }
        }
        Ok(Self {
            users: x.len(),
            owner,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.owner.len()
    }

    #[inline]
    pub fn owner(&self, n: usize) -> Option<usize> {
        self.owner[n]
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owner
    }

    #[inline]
    pub fn set(&mut self, n: usize, owner: Option<usize>) {
        debug_assert!(owner.is_none_or(|k| k < self.users));
        self.owner[n] = owner;
    }

    /// `x[k][n]`
    #[inline]
    pub fn is_assigned(&self, k: usize, n: usize) -> bool {
        self.owner[n] == Some(k)
    }

    pub fn subcarriers_of(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.owner
            .iter()
            .enumerate()
            .filter_map(move |(n, o)| (*o == Some(k)).then_some(n))
    }

    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        (0..self.users)
            .map(|k| self.owner.iter().map(|o| *o == Some(k)).collect())
            .collect()
    }
}

/// Common view over both allocation variants.
pub trait Allocation<T: Scalar> {
    fn assignment(&self) -> &Assignment;

    /// Splitting ratio applied by user `k` on subcarrier `n`.
    fn ratio(&self, k: usize, n: usize) -> T;

    /// Harvested power of user `k`, mW.
    fn harvested(&self, inst: &Instance<T>, k: usize) -> T;
}

/// Practical receiver: one splitting ratio per user, applied before OFDM
/// demodulation and therefore to every subcarrier alike.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPa<T> {
    pub assignment: Assignment,
    pub split: Vec<T>,
}

impl<T: Scalar> AllocationPa<T> {
    pub fn new(assignment: Assignment, split: Vec<T>) -> Result<Self> {
        if split.len() != assignment.num_users() {
            return Err(Error::InvalidAllocation(format!(
                "{} ratios for {} users",
                split.len(),
                assignment.num_users()
            )));
        }
        if let Some(r) = split
            .iter()
            .find(|r| !(**r >= T::zero() && **r <= T::one()))
        {
            return Err(Error::InvalidAllocation(format!(
                "ratio {r} outside [0, 1]"
            )));
        }
        Ok(Self { assignment, split })
    }
}

impl<T: Scalar> Allocation<T> for AllocationPa<T> {
    fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    fn ratio(&self, k: usize, _n: usize) -> T {
        self.split[k]
    }

    fn harvested(&self, inst: &Instance<T>, k: usize) -> T {
        harvested_power_pa(inst, k, self.split[k])
    }
}

/// Upper-bound receiver: an independent ratio per (user, subcarrier).
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationUb<T> {
    pub assignment: Assignment,
    /// Row-major `K × N`.
    pub split: Vec<T>,
}

impl<T: Scalar> AllocationUb<T> {
    pub fn new(assignment: Assignment, split: Vec<T>) -> Result<Self> {
        let expected = assignment.num_users() * assignment.num_subcarriers();
        if split.len() != expected {
            return Err(Error::InvalidAllocation(format!(
                "{} ratios, expected {expected}",
                split.len()
            )));
        }
        if let Some(r) = split
            .iter()
            .find(|r| !(**r >= T::zero() && **r <= T::one()))
        {
            return Err(Error::InvalidAllocation(format!(
                "ratio {r} outside [0, 1]"
            )));
        }
        Ok(Self { assignment, split })
    }

    /// Embeds a practical allocation: every subcarrier of user `k` gets `ρ_k`.
    pub fn from_pa(pa: &AllocationPa<T>) -> Self {
        let n = pa.assignment.num_subcarriers();
        let split = pa
            .split
            .iter()
            .flat_map(|&r| std::iter::repeat_n(r, n))
            .collect();
        Self {
            assignment: pa.assignment.clone(),
            split,
        }
    }

    #[inline]
    pub fn split_at(&self, k: usize, n: usize) -> T {
        self.split[k * self.assignment.num_subcarriers() + n]
    }
}

impl<T: Scalar> Allocation<T> for AllocationUb<T> {
    fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    fn ratio(&self, k: usize, n: usize) -> T {
        self.split_at(k, n)
    }

    fn harvested(&self, inst: &Instance<T>, k: usize) -> T {
        harvested_power_ub(inst, self, k)
    }
}

/// Loop counters reported by the solvers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Iterations {
    pub starts: usize,
    pub dual: usize,
    pub bcd_passes: usize,
    pub bisections: usize,
    /// Bisections that hit their iteration cap before `|∂L/∂ρ| < ε`.
    pub bisect_failures: usize,
    pub dual_converged: bool,
}

impl Iterations {
    pub(crate) fn absorb(&mut self, other: &Iterations) {
        self.dual += other.dual;
        self.bcd_passes += other.bcd_passes;
        self.bisections += other.bisections;
        self.bisect_failures += other.bisect_failures;
        self.dual_converged |= other.dual_converged;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    /// `E_sum`, mW.
    pub objective: T,
    pub per_user_rate: Vec<T>,
    pub per_user_harvest: Vec<T>,
    pub feasible: bool,
    /// `max_k [C_k − r_k]⁺`, bits.
    pub violation: T,
    /// Power routed to the information decoders, mW.
    pub info_power: T,
    pub iterations: Iterations,
    /// Smallest dual function value seen, when the solver evaluates it exactly.
    pub dual_bound: Option<T>,
}

/// Secrecy rate of subcarrier `n` for user `k` at splitting ratio `ratio`:
/// `[log2(((1−ρ) p_n h + σ²) / (p_n β + σ²))]⁺`.
///
/// Used for both receiver variants; only the origin of `ratio` differs.
///
/// Panics if `ratio` is outside `[0, 1]` or an index is out of range.
pub fn secrecy_rate<T: Scalar>(inst: &Instance<T>, k: usize, n: usize, ratio: T) -> T {
    assert!(
        ratio >= T::zero() && ratio <= T::one(),
        "splitting ratio {ratio} outside [0, 1]"
    );
    assert!(k < inst.num_users() && n < inst.num_subcarriers());
    inst.rate_unchecked(k, n, ratio)
}

/// `r_k = Σ_n x[k][n] r_{k,n}` under the allocation's own ratios.
pub fn user_secrecy_rate<T: Scalar, A: Allocation<T>>(
    inst: &Instance<T>,
    alloc: &A,
    k: usize,
) -> T {
    alloc
        .assignment()
        .subcarriers_of(k)
        .map(|n| secrecy_rate(inst, k, n, alloc.ratio(k, n)))
        .fold(T::zero(), |a, b| a + b)
}

/// `ζ ρ_k Σ_n p_n h[k][n]`; the sum covers all subcarriers since the splitter
/// sits in front of the demodulator.
pub fn harvested_power_pa<T: Scalar>(inst: &Instance<T>, k: usize, ratio: T) -> T {
    assert!(
        ratio >= T::zero() && ratio <= T::one(),
        "splitting ratio {ratio} outside [0, 1]"
    );
    inst.zeta() * ratio * inst.total_rx(k)
}

/// `ζ Σ_n ρ[k][n] p_n h[k][n]`
pub fn harvested_power_ub<T: Scalar>(inst: &Instance<T>, alloc: &AllocationUb<T>, k: usize) -> T {
    let acc = (0..inst.num_subcarriers())
        .map(|n| alloc.split_at(k, n) * inst.rx(k, n))
        .fold(T::zero(), |a, b| a + b);
    inst.zeta() * acc
}

pub fn evaluate<T: Scalar, A: Allocation<T>>(inst: &Instance<T>, alloc: &A) -> SolveReport<T> {
    evaluate_with_tolerance(inst, alloc, T::lit(DEFAULT_RATE_TOLERANCE))
}

pub fn evaluate_with_tolerance<T: Scalar, A: Allocation<T>>(
    inst: &Instance<T>,
    alloc: &A,
    rate_tolerance: T,
) -> SolveReport<T> {
    let users = inst.num_users();
    let per_user_rate: Vec<T> = (0..users)
        .map(|k| user_secrecy_rate(inst, alloc, k))
        .collect();
    let per_user_harvest: Vec<T> = (0..users).map(|k| alloc.harvested(inst, k)).collect();
    let objective = per_user_harvest.iter().fold(T::zero(), |a, &b| a + b);
    let violation = (0..users)
        .map(|k| (inst.demand(k) - per_user_rate[k]).pos())
        .fold(T::zero(), T::max);
    let info_power = alloc
        .assignment()
        .owners()
        .iter()
        .enumerate()
        .filter_map(|(n, o)| o.map(|k| (T::one() - alloc.ratio(k, n)) * inst.rx(k, n)))
        .fold(T::zero(), |a, b| a + b);
    SolveReport {
        objective,
        per_user_rate,
        per_user_harvest,
        feasible: violation <= rate_tolerance,
        violation,
        info_power,
        iterations: Iterations::default(),
        dual_bound: None,
    }
}

pub fn dbm_to_mw<T: Scalar>(dbm: T) -> T {
    T::lit(10.0).powf(dbm / T::lit(10.0))
}

pub fn mw_to_dbm<T: Scalar>(mw: T) -> T {
    T::lit(10.0) * mw.log10()
}

/// Linear power ratio of a dB value.
pub fn db_to_linear<T: Scalar>(db: T) -> T {
    dbm_to_mw(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Two users, `N` subcarriers with `p_n = 1`, `σ² = 1`; user 0 sees the
    /// given gains, user 1 sees `eaves` so that `β[0][n] = eaves[n]`.
    fn two_user(gains: &[f64], eaves: &[f64], zeta: f64, demands: [f64; 2]) -> Instance<f64> {
        let n = gains.len();
        let cfg = SystemConfig::new(vec![1.0; n], 1.0, zeta, demands.to_vec()).unwrap();
        let ch = ChannelState::from_rows(&[gains.to_vec(), eaves.to_vec()]).unwrap();
        Instance::new(cfg, ch).unwrap()
    }

    #[test]
    fn rate_hand_values() {
        let inst = two_user(&[3.0], &[1.0], 0.5, [0.0, 0.0]);
        assert_relative_eq!(secrecy_rate(&inst, 0, 0, 0.0), 1.0, epsilon = 1e-15);
        assert_eq!(secrecy_rate(&inst, 0, 0, 1.0), 0.0);
        // user 1 is weaker than its eavesdropper (user 0)
        assert_eq!(secrecy_rate(&inst, 1, 0, 0.0), 0.0);

        let inst = two_user(&[1.0], &[2.0], 0.5, [0.0, 0.0]);
        assert_eq!(secrecy_rate(&inst, 0, 0, 0.0), 0.0);
    }

    #[test]
    fn rate_boundary_of_positive_region() {
        let inst = two_user(&[4.0], &[2.0], 0.5, [0.0, 0.0]);
        let b = inst.rate_breakpoint(0, 0);
        assert_relative_eq!(b, 0.5);
        assert_eq!(secrecy_rate(&inst, 0, 0, b), 0.0);
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn rate_rejects_out_of_range_ratio() {
        let inst = two_user(&[3.0], &[1.0], 0.5, [0.0, 0.0]);
        secrecy_rate(&inst, 0, 0, 1.5);
    }

    #[test]
    fn user_rate_sums_assigned() {
        let inst = two_user(&[3.0, 3.0], &[1.0, 1.0], 0.5, [0.0, 0.0]);
        let none = AllocationPa::new(Assignment::unassigned(2, 2), vec![0.0, 0.0]).unwrap();
        assert_eq!(user_secrecy_rate(&inst, &none, 0), 0.0);
        let both = AllocationPa::new(
            Assignment::from_owners(2, vec![Some(0), Some(0)]).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        assert_relative_eq!(user_secrecy_rate(&inst, &both, 0), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn harvest_hand_values() {
        // Σ_n h[0][n] = 4
        let inst = two_user(&[1.0, 3.0], &[0.1, 0.1], 0.5, [0.0, 0.0]);
        assert_relative_eq!(harvested_power_pa(&inst, 0, 1.0), 2.0);
        assert_eq!(harvested_power_pa(&inst, 0, 0.0), 0.0);

        let inst = two_user(&[4.0, 6.0], &[0.1, 0.1], 0.4, [0.0, 0.0]);
        assert_relative_eq!(harvested_power_pa(&inst, 0, 0.5), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn harvest_ub_hand_values() {
        let cfg = SystemConfig::new(vec![1.0, 2.0], 1.0, 0.4, vec![0.0, 0.0]).unwrap();
        let ch = ChannelState::from_rows(&[vec![1.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let inst = Instance::new(cfg, ch).unwrap();
        let alloc = AllocationUb::new(
            Assignment::from_owners(2, vec![Some(0), Some(0)]).unwrap(),
            vec![1.0, 0.5, 1.0, 1.0],
        )
        .unwrap();
        assert_relative_eq!(harvested_power_ub(&inst, &alloc, 0), 0.8, epsilon = 1e-14);
        let zero = AllocationUb::new(Assignment::unassigned(2, 2), vec![0.0; 4]).unwrap();
        assert_eq!(harvested_power_ub(&inst, &zero, 0), 0.0);

        let cfg = SystemConfig::new(vec![1.0, 2.0], 1.0, 0.5, vec![0.0, 0.0]).unwrap();
        let inst = Instance::new(cfg, inst.channel().clone()).unwrap();
        let ones = AllocationUb::new(Assignment::unassigned(2, 2), vec![1.0; 4]).unwrap();
        // ζ = 0.5 here, so the identity-ratio harvest is half of Σ p h = 3
        assert_relative_eq!(harvested_power_ub(&inst, &ones, 0), 1.5);
    }

    #[test]
    fn evaluate_unconstrained_and_forced_violation() {
        let inst = two_user(&[3.0, 3.0], &[1.0, 1.0], 0.5, [0.0, 0.0]);
        let alloc = AllocationPa::new(Assignment::unassigned(2, 2), vec![1.0, 1.0]).unwrap();
        let rep = evaluate(&inst, &alloc);
        assert!(rep.feasible);
        assert!(rep.per_user_rate.iter().all(|&r| r == 0.0));
        assert_relative_eq!(rep.objective, inst.full_harvest());

        let inst = inst.with_demands(vec![1.5, 0.0]).unwrap();
        let rep = evaluate(&inst, &alloc);
        assert!(!rep.feasible);
        assert_eq!(rep.violation, 1.5);
    }

    #[test]
    fn evaluate_composes_hand_values() {
        // two subcarriers, each worth 1 bit to user 0 at ρ = 0; harvest of
        // user 0 at ρ = 0 is zero, user 1 harvests ζ Σ h[1] = 0.5 · 2
        let inst = two_user(&[3.0, 3.0], &[1.0, 1.0], 0.5, [2.0, 0.0]);
        let alloc = AllocationPa::new(
            Assignment::from_owners(2, vec![Some(0), Some(0)]).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        let rep = evaluate(&inst, &alloc);
        assert_relative_eq!(rep.per_user_rate[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(rep.objective, 1.0, epsilon = 1e-14);
        assert!(rep.feasible);
        // info power: (1 − 0) · (3 + 3)
        assert_relative_eq!(rep.info_power, 6.0);
        let total: f64 = rep.per_user_harvest.iter().sum();
        assert_relative_eq!(total, rep.objective);
    }

    #[test]
    fn dbm_values() {
        assert_relative_eq!(dbm_to_mw(0.0f64), 1.0);
        assert_relative_eq!(dbm_to_mw(15.0f64), 31.622_776_601_683_79, epsilon = 1e-12);
        assert_relative_eq!(dbm_to_mw(-30.0f64), 1e-3, epsilon = 1e-18);
        assert_relative_eq!(db_to_linear(-30.0f64), 1e-3, epsilon = 1e-18);
    }

    #[test]
    fn eavesdropper_gain_is_max_of_others() {
        let ch = ChannelState::from_rows(&[
            vec![1.0, 5.0, 2.0],
            vec![3.0, 4.0, 2.0],
            vec![2.0, 1.0, 0.5],
        ])
        .unwrap();
        assert_eq!(ch.eaves_gain(0, 0), 3.0);
        assert_eq!(ch.eaves_gain(1, 0), 2.0);
        assert_eq!(ch.eaves_gain(2, 1), 5.0);
        assert_eq!(ch.eaves_gain(0, 1), 4.0);
        // tied best
        assert_eq!(ch.eaves_gain(0, 2), 2.0);
        assert_eq!(ch.eaves_gain(1, 2), 2.0);
        assert!(ch.eaves_consistent());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SystemConfig::new(vec![1.0], 1.0, 0.5, vec![0.0]).is_err());
        assert!(SystemConfig::new(vec![0.0], 1.0, 0.5, vec![0.0, 0.0]).is_err());
        assert!(SystemConfig::new(vec![1.0], 0.0, 0.5, vec![0.0, 0.0]).is_err());
        assert!(SystemConfig::new(vec![1.0], 1.0, 1.0, vec![0.0, 0.0]).is_err());
        assert!(SystemConfig::new(vec![1.0], 1.0, 0.5, vec![-1.0, 0.0]).is_err());
        assert!(ChannelState::from_rows(&[vec![1.0]]).is_err());
        assert!(ChannelState::from_rows(&[vec![1.0], vec![0.0]]).is_err());
        assert!(Assignment::from_matrix(&[vec![true], vec![true]]).is_err());
        assert!(AllocationPa::new(Assignment::unassigned(2, 1), vec![0.5, 1.2]).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let x = vec![vec![true, false, false], vec![false, false, true]];
        let a = Assignment::from_matrix(&x).unwrap();
        assert_eq!(a.owners(), &[Some(0), None, Some(1)]);
        assert_eq!(a.to_matrix(), x);
    }

    fn random_instance() -> impl Strategy<Value = Instance<f64>> {
        (2usize..4, 1usize..5).prop_flat_map(|(k, n)| {
            (
                prop::collection::vec(1e-3f64..10.0, k * n),
                prop::collection::vec(0.1f64..3.0, n),
                0.01f64..2.0,
                0.05f64..0.95,
            )
                .prop_map(move |(h, p, s, z)| {
                    let cfg = SystemConfig::new(p, s, z, vec![0.0; k]).unwrap();
                    let ch = ChannelState::from_gains(k, n, h).unwrap();
                    Instance::new(cfg, ch).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn rate_nonincreasing_in_ratio(inst in random_instance(), k in 0usize..2, n in 0usize..1) {
            let mut prev = f64::INFINITY;
            for i in 0..=64 {
                let r = secrecy_rate(&inst, k, n, i as f64 / 64.0);
                prop_assert!(r >= 0.0);
                prop_assert!(r <= prev + 1e-15);
                prev = r;
            }
            prop_assert_eq!(secrecy_rate(&inst, k, n, 1.0), 0.0);
        }

        #[test]
        fn rate_positive_iff_beats_eavesdropper(inst in random_instance(), rho in 0.0f64..1.0) {
            let ch = inst.channel();
            for k in 0..inst.num_users() {
                for n in 0..inst.num_subcarriers() {
                    let positive = secrecy_rate(&inst, k, n, rho) > 0.0;
                    let beats = (1.0 - rho) * ch.gain(k, n) > ch.eaves_gain(k, n);
                    // exact ties are measure zero; skip numerically marginal samples
                    let margin = ((1.0 - rho) * ch.gain(k, n) - ch.eaves_gain(k, n)).abs();
                    if margin > 1e-9 * ch.gain(k, n) {
                        prop_assert_eq!(positive, beats);
                    }
                }
            }
        }

        #[test]
        fn harvest_linear_in_ratio(inst in random_instance(), rho in 0.0f64..1.0, a in 0.0f64..1.0) {
            let lhs = harvested_power_pa(&inst, 0, a * rho);
            let rhs = a * harvested_power_pa(&inst, 0, rho);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }

        #[test]
        fn pa_embeds_into_ub(
            inst in random_instance(),
            owners in prop::collection::vec(prop::option::of(0usize..2), 4),
            split in prop::collection::vec(0.0f64..=1.0, 3),
        ) {
            let (k, n) = (inst.num_users(), inst.num_subcarriers());
            let a = Assignment::from_owners(k, owners[..n].to_vec()).unwrap();
            let pa = AllocationPa::new(a, split[..k].to_vec()).unwrap();
            let ub = AllocationUb::from_pa(&pa);
            let (rp, ru) = (evaluate(&inst, &pa), evaluate(&inst, &ub));
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-300);
            prop_assert!(close(rp.objective, ru.objective));
            prop_assert!(close(rp.info_power, ru.info_power));
            for u in 0..k {
                prop_assert!(close(rp.per_user_rate[u], ru.per_user_rate[u]));
            }
        }

        #[test]
        fn dbm_round_trip(x in 1e-9f64..1e6) {
            let back = dbm_to_mw(mw_to_dbm(x));
            prop_assert!((back - x).abs() <= 1e-12 * x);
        }
    }
}
