//! Model and solver invariants on small random instances.

use proptest::prelude::*;
use swipt_ofdma::dual::update_duals;
use swipt_ofdma::ppa::{assign_subcarriers_pa, lagrangian_pa, optimize_rho_bisect};
use swipt_ofdma::{
    evaluate, max_secrecy_capacity, oracle_pa, oracle_ub, secrecy_rate, solve_fps, solve_fsa,
    solve_ppa, solve_pub, AllocationPa, Assignment, ChannelState, DualState, FpsOptions,
    FsaOptions, Instance, PpaOptions, PubOptions, SolveReport, SystemConfig,
};

const GRID: f64 = 1.0 / 64.0;
const RATE_TOL: f64 = 1e-6;

prop_compose! {
    /// Unit-scale instance with demands drawn as fractions of capacity.
    fn instance(max_users: usize, max_subs: usize)
        (users in 2..=max_users, subs in 1..=max_subs)
        (gains in prop::collection::vec(0.05f64..5.0, users * subs),
         power in prop::collection::vec(0.1f64..5.0, subs),
         noise in 0.05f64..1.0,
         zeta in 0.1f64..1.0,
         frac in prop::collection::vec(0.0f64..1.0, users),
         users in Just(users), subs in Just(subs))
        -> Instance<f64>
    {
        let ch = ChannelState::from_gains(users, subs, gains).unwrap();
        let cfg = SystemConfig::new(power, noise, zeta, vec![0.0; users]).unwrap();
        let inst = Instance::new(cfg, ch).unwrap();
        let demands = max_secrecy_capacity(&inst).iter().zip(&frac).map(|(c, f)| c * f).collect();
        inst.with_demands(demands).unwrap()
    }
}

fn harvest_scale(inst: &Instance<f64>) -> f64 {
    inst.zeta() * (0..inst.num_users()).map(|k| inst.total_rx(k)).sum::<f64>()
}

fn report_is_consistent<A: swipt_ofdma::Allocation<f64>>(
    inst: &Instance<f64>,
    alloc: &A,
    rep: &SolveReport<f64>,
) {
    let fresh = evaluate(inst, alloc);
    assert!((fresh.objective - rep.objective).abs() <= 1e-12 * rep.objective.abs().max(1.0));
    if rep.feasible {
        for k in 0..inst.num_users() {
            assert!(rep.per_user_rate[k] >= inst.demand(k) - 2.0 * RATE_TOL);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_is_nonincreasing_and_vanishes_without_advantage(inst in instance(3, 4), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for k in 0..inst.num_users() {
            for n in 0..inst.num_subcarriers() {
                let (r_lo, r_hi) = (secrecy_rate(&inst, k, n, lo), secrecy_rate(&inst, k, n, hi));
                prop_assert!(r_hi <= r_lo && r_hi >= 0.0);
                if inst.channel().gain(k, n) <= inst.channel().eaves_gain(k, n) {
                    prop_assert_eq!(r_lo, 0.0);
                }
            }
        }
    }

    #[test]
    fn eavesdropper_gain_is_best_other_user(inst in instance(4, 4)) {
        let ch = inst.channel();
        for k in 0..ch.num_users() {
            for n in 0..ch.num_subcarriers() {
                let best = (0..ch.num_users()).filter(|&j| j != k).map(|j| ch.gain(j, n)).fold(0.0, f64::max);
                prop_assert_eq!(ch.eaves_gain(k, n), best);
            }
        }
    }

    #[test]
    fn coordinate_steps_never_lower_the_lagrangian(
        inst in instance(3, 5),
        split in prop::collection::vec(0.0f64..1.0, 3),
        mu_units in prop::collection::vec(0.0f64..5.0, 3),
        owners in prop::collection::vec(0usize..3, 5),
    ) {
        let (users, subs) = (inst.num_users(), inst.num_subcarriers());
        let unit = inst.zeta() * (inst.noise() + harvest_scale(&inst) / inst.zeta() / (users * subs) as f64);
        let mu: Vec<f64> = mu_units[..users].iter().map(|m| m * unit).collect();
        let split = split[..users].to_vec();
        let x = Assignment::from_owners(users, owners[..subs].iter().map(|&o| Some(o % users)).collect()).unwrap();
        let start = AllocationPa::new(x, split.clone()).unwrap();
        let l0 = lagrangian_pa(&inst, &start, &mu);

        let x1 = assign_subcarriers_pa(&inst, &split, &mu);
        let after_x = AllocationPa::new(x1.clone(), split).unwrap();
        let l1 = lagrangian_pa(&inst, &after_x, &mu);
        let slack = 1e-12 * (l0.abs() + l1.abs()).max(1e-30);
        prop_assert!(l1 >= l0 - slack);

        let tol = 1e-12 * harvest_scale(&inst);
        let split2: Vec<f64> = (0..users).map(|k| optimize_rho_bisect(&inst, k, &x1, mu[k], tol, 200).ratio).collect();
        let l2 = lagrangian_pa(&inst, &AllocationPa::new(x1, split2).unwrap(), &mu);
        prop_assert!(l2 >= l1 - slack);
    }

    #[test]
    fn ratio_search_beats_a_fine_grid(inst in instance(2, 4), mu_unit in 0.0f64..10.0) {
        let subs = inst.num_subcarriers();
        let x = Assignment::from_owners(2, vec![Some(0); subs]).unwrap();
        let mu = mu_unit * inst.zeta() * (inst.noise() + inst.total_rx(0));
        let value = |rho: f64| {
            inst.zeta() * rho * inst.total_rx(0) + mu * (0..subs).map(|n| secrecy_rate(&inst, 0, n, rho)).sum::<f64>()
        };
        let r = optimize_rho_bisect(&inst, 0, &x, mu, 1e-12 * inst.total_rx(0), 200);
        prop_assert!((0.0..=1.0).contains(&r.ratio));
        let best = (0..=1000).map(|i| value(i as f64 / 1000.0)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(value(r.ratio) >= best - 1e-10 * best.abs());
    }

    #[test]
    fn dual_update_keeps_multipliers_nonnegative(
        mu in prop::collection::vec(0.0f64..3.0, 4),
        rates in prop::collection::vec(0.0f64..3.0, 4),
        demands in prop::collection::vec(0.0f64..3.0, 4),
        step in 0.01f64..2.0,
    ) {
        let state = DualState::new(mu.clone(), step);
        let next = update_duals(&state, &rates, &demands);
        for k in 0..4 {
            prop_assert!(next.multipliers()[k] >= 0.0);
            let expected = (mu[k] + state.step() * (demands[k] - rates[k])).max(0.0);
            prop_assert!((next.multipliers()[k] - expected).abs() <= 1e-12 * (1.0 + expected));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solvers_respect_oracles_and_each_other(inst in instance(2, 3), seed in any::<u64>()) {
        let (pa_alloc, ppa) = solve_ppa(&inst, &PpaOptions { num_starts: 5, seed, ..Default::default() });
        let (ub_alloc, ub) = solve_pub(&inst, &PubOptions::default());
        let (fps_alloc, fps) = solve_fps(&inst, &FpsOptions::default());
        let (fsa_alloc, fsa) = solve_fsa(&inst, &FsaOptions::default());
        report_is_consistent(&inst, &pa_alloc, &ppa);
        report_is_consistent(&inst, &ub_alloc, &ub);
        report_is_consistent(&inst, &fps_alloc, &fps);
        report_is_consistent(&inst, &fsa_alloc, &fsa);

        let (_, opa) = oracle_pa(&inst, GRID).unwrap();
        let (_, oub) = oracle_ub(&inst, GRID).unwrap();
        // grid optima trail the continuous ones by at most one step per ratio
        let grid_slack = 2.0 * GRID * harvest_scale(&inst);
        let rel = |x: f64| 1e-6 * x.abs();
        if opa.feasible {
            prop_assert!(oub.feasible && oub.objective >= opa.objective - rel(opa.objective));
        }
        if ppa.feasible {
            prop_assert!(ppa.objective <= opa.objective + grid_slack + rel(ppa.objective));
        }
        if ub.feasible {
            prop_assert!(ub.objective <= oub.objective + grid_slack + rel(ub.objective));
        }
        if let (Some(d), true) = (ub.dual_bound, oub.feasible) {
            prop_assert!(d >= oub.objective - rel(oub.objective));
        }
        if ppa.feasible && ub.feasible {
            prop_assert!(ub.objective >= ppa.objective - rel(ppa.objective));
        }
        for b in [&fps, &fsa] {
            if b.feasible && ppa.feasible {
                prop_assert!(b.objective <= ppa.objective + rel(ppa.objective));
            }
        }
        for s in &pa_alloc.split {
            prop_assert!((0.0..=1.0).contains(s));
        }
    }

    #[test]
    fn practical_solver_is_deterministic(inst in instance(3, 5), seed in any::<u64>()) {
        let opts = PpaOptions { num_starts: 3, seed, ..Default::default() };
        prop_assert_eq!(solve_ppa(&inst, &opts), solve_ppa(&inst, &opts));
    }

    #[test]
    fn single_precision_matches_double(inst in instance(3, 4)) {
        let (alloc, rep) = solve_pub(&inst, &PubOptions::default());
        let cast = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let cfg = inst.config();
        let cfg32 = SystemConfig::new(
            cast(cfg.subcarrier_power()),
            cfg.noise_power() as f32,
            cfg.conversion_efficiency() as f32,
            cast(cfg.secrecy_demand()),
        ).unwrap();
        let ch = inst.channel();
        let ch32 = ChannelState::from_gains(ch.num_users(), ch.num_subcarriers(), cast(ch.gains())).unwrap();
        let inst32 = Instance::new(cfg32, ch32).unwrap();
        let alloc32 = swipt_ofdma::AllocationUb::new(alloc.assignment.clone(), cast(&alloc.split)).unwrap();
        let rep32 = evaluate(&inst32, &alloc32);
        prop_assert!((rep32.objective as f64 - rep.objective).abs() <= 1e-5 * rep.objective.max(1e-9));
        let (_, solved32) = solve_pub(&inst32, &PubOptions::default());
        prop_assert!(solved32.objective.is_finite());
    }
}
