//! Random channel realisations: users dropped at uniform distance in an
//! annulus around the base station, log-distance path loss, and independent
//! Rayleigh fading on every (user, subcarrier) pair.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.3), seeded from a single
//! `u64`; fading powers are unit-mean exponential variates obtained by
//! inversion, `−ln(1 − U)`. Both are fixed algorithms, so a seed reproduces
//! the same gains on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, ChannelState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub num_users: usize,
    pub num_subcarriers: usize,
    /// Reference distance `d0`, metres.
    #[serde(default = "default_ref_distance")]
    pub ref_distance: f64,
    /// Outer radius of the user annulus, metres.
    #[serde(default = "default_max_distance")]
    pub max_distance: f64,
    /// Path loss at `d0`, dB (negative).
    #[serde(default = "default_pathloss_at_ref")]
    pub pathloss_at_ref: f64,
    #[serde(default = "default_pathloss_exponent")]
    pub pathloss_exponent: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_ref_distance() -> f64 {
    1.0
}
fn default_max_distance() -> f64 {
    10.0
}
fn default_pathloss_at_ref() -> f64 {
    -30.0
}
fn default_pathloss_exponent() -> f64 {
    3.0
}

impl ScenarioParams {
    /// Indoor defaults: `d0 = 1 m`, users out to 10 m, −30 dB at `d0`,
    /// exponent 3.
    pub fn new(num_users: usize, num_subcarriers: usize, rng_seed: u64) -> Self {
        Self {
            num_users,
            num_subcarriers,
            ref_distance: default_ref_distance(),
            max_distance: default_max_distance(),
            pathloss_at_ref: default_pathloss_at_ref(),
            pathloss_exponent: default_pathloss_exponent(),
            rng_seed,
        }
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.num_users < 2 {
            return Err(Error::InvalidScenario(format!(
                "need at least two users, got {}",
                self.num_users
            )));
        }
        if self.num_subcarriers == 0 {
            return Err(Error::InvalidScenario(
                "need at least one subcarrier".into(),
            ));
        }
        if !(self.ref_distance > 0.0) {
            return Err(Error::InvalidScenario(
                "reference distance must be > 0".into(),
            ));
        }
        // max == ref is accepted as the degenerate "all users at d0" case
        if !(self.max_distance >= self.ref_distance) {
            return Err(Error::InvalidScenario(
                "max distance must not be below the reference distance".into(),
            ));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::InvalidScenario(
                "path-loss exponent must be >= 2".into(),
            ));
        }
        if !self.pathloss_at_ref.is_finite() {
            return Err(Error::InvalidScenario(
                "path loss at d0 must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Mean power gain at distance `d`.
    pub fn mean_gain(&self, d: f64) -> f64 {
        db_to_linear(self.pathloss_at_ref) * (d / self.ref_distance).powf(-self.pathloss_exponent)
    }
}

/// One channel realisation plus the user distances it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Realisation<T> {
    pub channel: ChannelState<T>,
    pub distances: Vec<f64>,
}

pub fn generate<T: Scalar>(params: &ScenarioParams) -> Result<ChannelState<T>> {
    generate_with_distances(params).map(|r| r.channel)
}

pub fn generate_with_distances<T: Scalar>(params: &ScenarioParams) -> Result<Realisation<T>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let (users, subcarriers) = (params.num_users, params.num_subcarriers);
    let mut distances = Vec::with_capacity(users);
    let mut gain = Vec::with_capacity(users * subcarriers);
    for _ in 0..users {
        let u: f64 = rng.gen();
        let d = params.ref_distance + u * (params.max_distance - params.ref_distance);
        let mean = params.mean_gain(d);
        distances.push(d);
        for _ in 0..subcarriers {
            gain.push(T::lit(mean * unit_exponential(&mut rng)));
        }
    }
    Ok(Realisation {
        channel: ChannelState::from_gains(users, subcarriers, gain)?,
        distances,
    })
}

/// Unit-mean exponential variate, i.e. the power of a unit Rayleigh amplitude.
/// Strictly positive so that every gain stays valid.
fn unit_exponential<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen(); // [0, 1)
    let e = -(1.0 - u).ln();
    e.max(f64::MIN_POSITIVE)
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed and a path of
/// indices by folding each index through SplitMix64.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &i| {
        splitmix64(acc ^ splitmix64(i))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_channel() {
        let p = ScenarioParams::new(4, 16, 7);
        let a: ChannelState<f64> = generate(&p).unwrap();
        let b: ChannelState<f64> = generate(&p).unwrap();
        assert_eq!(a, b);
        let q = ScenarioParams { rng_seed: 8, ..p };
        let c: ChannelState<f64> = generate(&q).unwrap();
        assert_ne!(a.gains(), c.gains());
    }

    #[test]
    fn two_users_eaves_is_the_other() {
        let ch: ChannelState<f64> = generate(&ScenarioParams::new(2, 32, 3)).unwrap();
        for n in 0..32 {
            assert_eq!(ch.eaves_gain(0, n), ch.gain(1, n));
            assert_eq!(ch.eaves_gain(1, n), ch.gain(0, n));
        }
        assert!(ch.eaves_consistent());
    }

    #[test]
    fn rejects_single_user_and_bad_geometry() {
        assert!(generate::<f64>(&ScenarioParams::new(1, 4, 0)).is_err());
        let mut p = ScenarioParams::new(2, 4, 0);
        p.pathloss_exponent = 1.5;
        assert!(generate::<f64>(&p).is_err());
        p.pathloss_exponent = 3.0;
        p.max_distance = 0.5;
        assert!(generate::<f64>(&p).is_err());
    }

    #[test]
    fn mean_gain_at_reference_is_minus_30_db() {
        // all users at d0: E[h] = 1e-3 within 5% at 1e5 samples
        let mut p = ScenarioParams::new(2, 50_000, 11);
        p.max_distance = p.ref_distance;
        let ch: ChannelState<f64> = generate(&p).unwrap();
        let mean = ch.gains().iter().sum::<f64>() / ch.gains().len() as f64;
        assert!((mean / 1e-3 - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn normalised_fading_has_unit_mean() {
        let p = ScenarioParams::new(4, 25_000, 5);
        let r: Realisation<f64> = generate_with_distances(&p).unwrap();
        let mut acc = 0.0;
        for (k, &d) in r.distances.iter().enumerate() {
            assert!((1.0..=10.0).contains(&d));
            let g = p.mean_gain(d);
            acc += (0..p.num_subcarriers)
                .map(|n| r.channel.gain(k, n) / g)
                .sum::<f64>();
        }
        let mean = acc / (4.0 * 25_000.0);
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn f32_generation_matches_f64() {
        let p = ScenarioParams::new(3, 8, 9);
        let a: ChannelState<f64> = generate(&p).unwrap();
        let b: ChannelState<f32> = generate(&p).unwrap();
        for (x, y) in a.gains().iter().zip(b.gains()) {
            assert!(((*x as f32) - y).abs() <= f32::EPSILON * y.abs());
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|t| derive_seed(42, &[t, 0])).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), s.len());
        assert_eq!(derive_seed(42, &[3, 1]), derive_seed(42, &[3, 1]));
        assert_ne!(derive_seed(42, &[3, 1]), derive_seed(43, &[3, 1]));
    }
}
