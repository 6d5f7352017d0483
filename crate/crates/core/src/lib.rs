//! Harvested-power maximisation for a secure SWIPT OFDMA downlink.
//!
//! A base station serves `K` users over `N` subcarriers. Each user splits its
//! received power between an energy harvester and an information decoder,
//! and every other user is treated as a potential eavesdropper. The solvers
//! choose the subcarrier assignment and splitting ratios that maximise total
//! harvested power while every user keeps its secrecy-rate demand.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64`/`*32` aliases below fix the type.
//!
//! ```
//! use swipt_ofdma::{solve_ppa, ChannelState64, Instance64, PpaOptions, SystemConfig64};
//!
//! let cfg = SystemConfig64::new(vec![1.0, 1.0], 1.0, 0.5, vec![1.0, 0.0]).unwrap();
//! let ch = ChannelState64::from_rows(&[vec![8.0, 2.0], vec![1.0, 3.0]]).unwrap();
//! let inst = Instance64::new(cfg, ch).unwrap();
//! let (alloc, report) = solve_ppa(&inst, &PpaOptions::default());
//! assert!(report.feasible);
//! assert!(report.per_user_rate[0] >= 1.0 - 1e-6);
//! assert!(alloc.split[1] == 1.0);
//! ```

pub mod baselines;
pub mod channel;
pub mod checks;
pub mod dual;
pub mod error;
pub mod experiment;
pub mod model;
pub mod oracle;
pub mod ppa;
mod recovery;
mod scalar;
mod solve;
pub mod upper_bound;

pub use baselines::{solve_fps, solve_fsa, FpsOptions, FsaAssignment, FsaOptions};
pub use channel::{derive_seed, generate, generate_with_distances, Realisation, ScenarioParams};
pub use dual::{DualOptions, DualState};
pub use error::{Error, Result};
pub use model::{
    dbm_to_mw, evaluate, evaluate_with_tolerance, harvested_power_pa, harvested_power_ub,
    mw_to_dbm, secrecy_rate, user_secrecy_rate, Allocation, AllocationPa, AllocationUb, Assignment,
    ChannelState, Instance, Iterations, SolveReport, SystemConfig,
};
pub use oracle::{max_secrecy_capacity, oracle_pa, oracle_ub};
pub use ppa::{solve_ppa, PpaOptions};
pub use scalar::Scalar;
pub use solve::infeasible_by_capacity;
pub use upper_bound::{rho_star_ub, solve_pub, PubOptions, RhoFormula};

pub type SystemConfig64 = SystemConfig<f64>;
pub type SystemConfig32 = SystemConfig<f32>;
pub type ChannelState64 = ChannelState<f64>;
pub type ChannelState32 = ChannelState<f32>;
pub type Instance64 = Instance<f64>;
pub type Instance32 = Instance<f32>;
pub type AllocationPa64 = AllocationPa<f64>;
pub type AllocationPa32 = AllocationPa<f32>;
pub type AllocationUb64 = AllocationUb<f64>;
pub type AllocationUb32 = AllocationUb<f32>;
pub type SolveReport64 = SolveReport<f64>;
pub type SolveReport32 = SolveReport<f32>;
