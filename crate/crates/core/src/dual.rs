//! Projected-subgradient updates for the secrecy-rate multipliers.

use crate::model::Instance;
use crate::scalar::Scalar;

/// Nonnegative multiplier vector plus its diminishing step schedule
/// `α(t) = α₀ / √(t + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState<T> {
    multipliers: Vec<T>,
    initial_step: T,
    iteration: usize,
}

impl<T: Scalar> DualState<T> {
    /// Negative entries are projected to zero.
    pub fn new(multipliers: Vec<T>, initial_step: T) -> Self {
        assert!(initial_step > T::zero(), "step must be positive");
        Self {
            multipliers: multipliers.into_iter().map(Scalar::pos).collect(),
            initial_step,
            iteration: 0,
        }
    }

    pub fn multipliers(&self) -> &[T] {
        &self.multipliers
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Step used by the next update.
    pub fn step(&self) -> T {
        self.initial_step / T::from_usize(self.iteration + 1).unwrap().sqrt()
    }
}

/// `μ_k ← [μ_k + α (C_k − r_k)]⁺` for every user, then advances the schedule.
pub fn update_duals<T: Scalar>(state: &DualState<T>, rates: &[T], demands: &[T]) -> DualState<T> {
    assert_eq!(rates.len(), state.multipliers.len());
    assert_eq!(demands.len(), state.multipliers.len());
    let step = state.step();
    let multipliers = state
        .multipliers
        .iter()
        .zip(rates.iter().zip(demands))
        .map(|(&m, (&r, &c))| (m + step * (c - r)).pos())
        .collect();
    DualState {
        multipliers,
        initial_step: state.initial_step,
        iteration: state.iteration + 1,
    }
}

/// `‖a − b‖∞`
pub(crate) fn max_change<T: Scalar>(a: &DualState<T>, b: &DualState<T>) -> T {
    a.multipliers
        .iter()
        .zip(&b.multipliers)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}

/// Natural unit of the multipliers, `ζ (σ² + mean_{k,n} p_n h[k][n])` in
/// mW per bit: a multiplier near `ζ ln2 (y + σ²)` is what makes routing
/// `y` mW to the decoder worthwhile, so raw steps are scaled by this.
pub fn multiplier_scale<T: Scalar>(inst: &Instance<T>) -> T {
    let cells = T::from_usize(inst.num_users() * inst.num_subcarriers()).unwrap();
    let mean_rx = (0..inst.num_users())
        .map(|k| inst.total_rx(k))
        .fold(T::zero(), |a, b| a + b)
        / cells;
    inst.zeta() * (inst.noise() + mean_rx)
}

/// Tuning shared by every dual loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualOptions {
    pub max_iters: usize,
    /// `α₀ = step_scale · scale / max(1, mean C_k)`, with `scale` from
    /// [`multiplier_scale`].
    pub step_scale: f64,
    /// Stop when `‖Δμ‖∞ < tolerance · scale`.
    pub tolerance: f64,
    /// Starting multiplier of users with a positive demand, in units of
    /// [`multiplier_scale`]; users without a demand start at zero.
    pub initial_multiplier: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_scale: 0.5,
            tolerance: 1e-5,
            initial_multiplier: 1.0,
        }
    }
}

impl DualOptions {
    pub(crate) fn initial_state<T: Scalar>(&self, inst: &Instance<T>) -> DualState<T> {
        let scale = multiplier_scale(inst);
        let demands = inst.config().secrecy_demand();
        let mean_c =
            demands.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize(demands.len()).unwrap();
        let step = T::lit(self.step_scale) * scale / mean_c.max(T::one());
        let init = T::lit(self.initial_multiplier) * scale;
        let mu = demands
            .iter()
            .map(|&c| if c > T::zero() { init } else { T::zero() })
            .collect();
        DualState::new(mu, step)
    }

    pub(crate) fn converged<T: Scalar>(
        &self,
        inst: &Instance<T>,
        old: &DualState<T>,
        new: &DualState<T>,
    ) -> bool {
        max_change(old, new) < T::lit(self.tolerance) * multiplier_scale(inst)
    }
}
