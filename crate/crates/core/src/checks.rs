//! Runtime self-checks behind the CLI's `selftest` and `oracle-check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{solve_fps, solve_fsa, FpsOptions, FsaOptions};
use crate::channel::{derive_seed, generate, ScenarioParams};
use crate::error::Result;
use crate::experiment::{trial_channel, ExperimentConfig};
use crate::model::{dbm_to_mw, secrecy_rate, Assignment, Instance, SystemConfig};
use crate::oracle::{max_secrecy_capacity, oracle_pa, oracle_ub, DEFAULT_GRID_STEP};
use crate::ppa::{dlk_drho, optimize_rho_bisect, solve_ppa, PpaOptions};
use crate::upper_bound::{rho_star_ub, solve_pub, ub_term_value, PubOptions, RhoFormula};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Random instance with demands drawn as fractions of each user's capacity.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    users: usize,
    subcarriers: usize,
    demand_frac: f64,
) -> Instance<f64> {
    let params = ScenarioParams::new(users, subcarriers, rng.gen());
    let ch = generate(&params).expect("valid scenario");
    let pt = dbm_to_mw(rng.gen_range(5.0..25.0));
    let cfg = SystemConfig::with_uniform_power(pt, subcarriers, 1e-3, 0.4, vec![0.0; users])
        .expect("valid system");
    let inst = Instance::new(cfg, ch).expect("matching dimensions");
    let demands = max_secrecy_capacity(&inst)
        .iter()
        .map(|c| c * demand_frac * rng.gen::<f64>())
        .collect();
    inst.with_demands(demands).expect("nonnegative demands")
}

fn outcome(name: &'static str, failures: usize, total: usize) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: failures == 0,
        detail: format!("{failures} failures in {total} cases"),
    }
}

/// Invariant suite on seeded random instances.
pub fn selftest(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut bad = 0;
    for _ in 0..200 {
        let inst = random_instance(&mut rng, 3, 4, 0.0);
        for k in 0..3 {
            for n in 0..4 {
                let mut prev = f64::INFINITY;
                for i in 0..=32 {
                    let r = secrecy_rate(&inst, k, n, i as f64 / 32.0);
                    bad += usize::from(r > prev || r < 0.0);
                    prev = r;
                }
            }
        }
    }
    out.push(outcome("rate nonincreasing in splitting ratio", bad, 200));

    let mut bad = 0;
    for _ in 0..1000 {
        let inst = random_instance(&mut rng, 2, 1, 0.0);
        let scale = inst.zeta() * (inst.noise() + inst.rx(0, 0));
        let lambda = scale * rng.gen_range(0.0..10.0);
        let rho = rho_star_ub(&inst, 0, 0, lambda, RhoFormula::Derived);
        let best = (0..=1000)
            .map(|i| ub_term_value(&inst, 0, 0, lambda, i as f64 / 1000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        bad += usize::from(
            ub_term_value(&inst, 0, 0, lambda, rho) < best - 1e-9 * best.abs().max(1e-30),
        );
    }
    out.push(outcome("closed-form ratio beats 1e-3 grid", bad, 1000));

    let mut bad = 0;
    for _ in 0..200 {
        let inst = random_instance(&mut rng, 2, 3, 0.0);
        let x = Assignment::from_owners(2, vec![Some(0); 3]).expect("valid owners");
        let mu = inst.zeta() * (inst.noise() + inst.total_rx(0)) * rng.gen_range(0.0..20.0);
        let tol = 1e-12 * inst.zeta() * inst.total_rx(0);
        let r = optimize_rho_bisect(&inst, 0, &x, mu, tol, 200);
        let interior =
            r.ratio > 0.0 && r.ratio < 1.0 && (0..3).all(|n| inst.rate_breakpoint(0, n) != r.ratio);
        bad += usize::from(interior && dlk_drho(&inst, 0, r.ratio, &x, mu).abs() >= tol);
        bad += usize::from(!(0.0..=1.0).contains(&r.ratio));
    }
    out.push(outcome("ratio search stationary when interior", bad, 200));

    let mut bad = 0;
    let cases = 30;
    for _ in 0..cases {
        let inst = random_instance(&mut rng, 2, 3, 0.6);
        let ppa = solve_ppa(
            &inst,
            &PpaOptions {
                num_starts: 5,
                seed: rng.gen(),
                ..Default::default()
            },
        )
        .1;
        let ub = solve_pub(&inst, &PubOptions::default()).1;
        let fps = solve_fps(&inst, &FpsOptions::default()).1;
        let fsa = solve_fsa(&inst, &FsaOptions::default()).1;
        let slack = |v: f64| 1e-6 * v.abs();
        if ub.feasible && ppa.feasible {
            bad += usize::from(ub.objective < ppa.objective - slack(ppa.objective));
        }
        for b in [&fps, &fsa] {
            if b.feasible && ppa.feasible {
                bad += usize::from(b.objective > ppa.objective + slack(ppa.objective));
            }
        }
        let (_, opa) = oracle_pa(&inst, DEFAULT_GRID_STEP).expect("small instance");
        let (_, oub) = oracle_ub(&inst, DEFAULT_GRID_STEP).expect("small instance");
        bad += usize::from(opa.feasible && oub.objective < opa.objective - slack(opa.objective));
        if let Some(d) = ub.dual_bound {
            bad += usize::from(oub.feasible && d < oub.objective - slack(oub.objective));
        }
    }
    out.push(outcome(
        "objective dominance pub >= ppa >= baselines",
        bad,
        cases,
    ));

    let inst = random_instance(&mut rng, 3, 6, 0.5);
    let opts = PpaOptions {
        num_starts: 3,
        seed: 5,
        ..Default::default()
    };
    let same = solve_ppa(&inst, &opts) == solve_ppa(&inst, &opts);
    out.push(CheckOutcome {
        name: "solver determinism",
        passed: same,
        detail: String::new(),
    });
    out
}

/// Solver-vs-oracle comparison over an experiment's instances.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub instances: usize,
    pub pa_feasible: usize,
    /// Feasible instances where the solver reached 98% of the oracle.
    pub ppa_within: usize,
    pub ub_feasible: usize,
    /// Feasible instances where the solver reached 95% of the oracle.
    pub pub_within: usize,
    /// Solver / oracle objective ratios on feasible instances.
    pub ppa_ratios: Vec<f64>,
    pub pub_ratios: Vec<f64>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.ppa_within as f64 >= 0.9 * self.pa_feasible as f64
            && self.pub_within as f64 >= 0.85 * self.ub_feasible as f64
    }
}

/// Compares the practical and upper-bound solvers with their oracles on
/// every (power, demand, trial) instance of `cfg`.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<OracleReport> {
    cfg.validate()?;
    let (users, subcarriers) = (cfg.scenario.num_users, cfg.scenario.num_subcarriers);
    let mut rep = OracleReport::default();
    for t in 0..cfg.run.trials {
        let ch = trial_channel(cfg, t)?;
        for &pt in &cfg.sweep.total_power_dbm {
            for &cbar in &cfg.sweep.cbar_bits {
                let system = SystemConfig::with_uniform_power(
                    dbm_to_mw(pt),
                    subcarriers,
                    dbm_to_mw(cfg.system.noise_dbm),
                    cfg.system.conversion_efficiency,
                    cfg.sweep.demand_pattern.demands(users, cbar),
                )?;
                let inst = Instance::new(system, ch.clone())?;
                let (_, opa) = oracle_pa(&inst, cfg.oracle.grid_step)?;
                let (_, oub) = oracle_ub(&inst, cfg.oracle.grid_step)?;
                let ppa_opts = PpaOptions {
                    seed: derive_seed(cfg.run.seed, &[t as u64, 1]),
                    ..cfg.ppa.clone()
                };
                let ppa = solve_ppa(&inst, &ppa_opts).1;
                let ub = solve_pub(&inst, &cfg.pub_).1;
                rep.instances += 1;
                let ratio = |s: &crate::model::SolveReport<f64>, o: f64| {
                    if !s.feasible {
                        0.0
                    } else if o > 0.0 {
                        s.objective / o
                    } else {
                        1.0
                    }
                };
                if opa.feasible {
                    rep.pa_feasible += 1;
                    let r = ratio(&ppa, opa.objective);
                    rep.ppa_within += usize::from(r >= 0.98);
                    rep.ppa_ratios.push(r);
                }
                if oub.feasible {
                    rep.ub_feasible += 1;
                    let r = ratio(&ub, oub.objective);
                    rep.pub_within += usize::from(r >= 0.95);
                    rep.pub_ratios.push(r);
                }
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in selftest(1) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
