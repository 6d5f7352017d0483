//! Monte-Carlo sweeps over total transmit power and secrecy demand, with
//! per-point aggregation and CSV output.
//!
//! Channel realisations depend only on `(seed, trial)`, so every sweep point
//! sees the same channels and adding points never reshuffles the others.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{solve_fps, solve_fsa, FpsOptions, FsaOptions};
use crate::channel::{derive_seed, generate, ScenarioParams};
use crate::error::{Error, Result};
use crate::model::{dbm_to_mw, ChannelState, Instance, SolveReport, SystemConfig};
use crate::oracle::{oracle_pa, oracle_ub, DEFAULT_GRID_STEP};
use crate::ppa::{solve_ppa, PpaOptions};
use crate::upper_bound::{solve_pub, PubOptions};

pub const CSV_HEADER: [&str; 9] = [
    "scheme",
    "pt_dbm",
    "cbar_bits",
    "trials",
    "feasible_frac",
    "esum_mw_mean",
    "esum_mw_std",
    "info_power_mw_mean",
    "wall_ms_mean",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Fps,
    Fsa,
    Oracle,
    OracleUb,
    Ppa,
    Pub,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Fps,
        Scheme::Fsa,
        Scheme::Oracle,
        Scheme::OracleUb,
        Scheme::Ppa,
        Scheme::Pub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fps => "fps",
            Scheme::Fsa => "fsa",
            Scheme::Oracle => "oracle",
            Scheme::OracleUb => "oracle_ub",
            Scheme::Ppa => "ppa",
            Scheme::Pub => "pub",
        }
    }

    fn is_oracle(self) -> bool {
        matches!(self, Scheme::Oracle | Scheme::OracleUb)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

/// Parses a comma-separated scheme list such as `ppa,pub`.
pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Scheme::from_str)
        .collect()
}

/// Which users receive the swept demand `C̄`; the rest demand nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DemandPattern {
    /// Users `0..⌈K/2⌉`.
    #[default]
    FirstHalf,
    All,
    /// Users `0..m`.
    First(usize),
}

impl DemandPattern {
    pub fn demands(self, users: usize, cbar: f64) -> Vec<f64> {
        let m = match self {
            DemandPattern::FirstHalf => users.div_ceil(2),
            DemandPattern::All => users,
            DemandPattern::First(m) => m.min(users),
        };
        (0..users).map(|k| if k < m { cbar } else { 0.0 }).collect()
    }
}

impl TryFrom<String> for DemandPattern {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "first-half" => Ok(DemandPattern::FirstHalf),
            "all" => Ok(DemandPattern::All),
            other => other
                .strip_prefix("first:")
                .and_then(|m| m.parse().ok())
                .map(DemandPattern::First)
                .ok_or_else(|| {
                    format!("demand pattern {other:?}: expected first-half, all or first:<m>")
                }),
        }
    }
}

impl From<DemandPattern> for String {
    fn from(p: DemandPattern) -> String {
        match p {
            DemandPattern::FirstHalf => "first-half".into(),
            DemandPattern::All => "all".into(),
            DemandPattern::First(m) => format!("first:{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub noise_dbm: f64,
    pub conversion_efficiency: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            noise_dbm: -30.0,
            conversion_efficiency: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub total_power_dbm: Vec<f64>,
    pub cbar_bits: Vec<f64>,
    #[serde(default)]
    pub demand_pattern: DemandPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Fill `wall_ms_mean`. Off by default so that output is byte-stable.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub grid_step: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

/// Whole experiment description; see `configs/` for annotated examples.
///
/// `scenario.rng_seed` is ignored: trial `t` uses channel seed
/// `derive_seed(run.seed, [t])`, and the practical solver's multistart seed
/// is `derive_seed(run.seed, [t, 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioParams,
    #[serde(default)]
    pub system: SystemSection,
    pub sweep: SweepSection,
    pub run: RunSection,
    #[serde(default)]
    pub ppa: PpaOptions,
    #[serde(default, rename = "pub")]
    pub pub_: PubOptions,
    #[serde(default)]
    pub fps: FpsOptions,
    #[serde(default)]
    pub fsa: FsaOptions,
    #[serde(default)]
    pub oracle: OracleSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.sweep.total_power_dbm.is_empty() || self.sweep.cbar_bits.is_empty() {
            return bad("sweeps must be nonempty");
        }
        if self.sweep.total_power_dbm.iter().any(|p| !p.is_finite()) {
            return bad("total powers must be finite");
        }
        if self
            .sweep
            .cbar_bits
            .iter()
            .any(|c| !(c.is_finite() && *c >= 0.0))
        {
            return bad("secrecy demands must be finite and nonnegative");
        }
        if self.run.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.run.schemes.is_empty() {
            return bad("no schemes selected");
        }
        if !self.system.noise_dbm.is_finite() {
            return bad("noise power must be finite");
        }
        if self.ppa.num_starts == 0 || self.ppa.dual.max_iters == 0 || self.pub_.dual.max_iters == 0
        {
            return bad("iteration counts must be positive");
        }
        if !(0.0..=1.0).contains(&self.fps.ratio) {
            return bad("fps ratio must lie in [0, 1]");
        }
        // builds one system to surface bad ζ or σ² early
        SystemConfig::<f64>::with_uniform_power(
            dbm_to_mw(self.sweep.total_power_dbm[0]),
            self.scenario.num_subcarriers,
            dbm_to_mw(self.system.noise_dbm),
            self.system.conversion_efficiency,
            vec![0.0; self.scenario.num_users],
        )?;
        Ok(())
    }

    /// Refuses oracle schemes on instances beyond the oracle's guard rails.
    pub fn check_guard_rails(&self) -> Result<()> {
        if !self.run.schemes.iter().any(|s| s.is_oracle()) {
            return Ok(());
        }
        let probe = ScenarioParams {
            rng_seed: 0,
            ..self.scenario.clone()
        };
        let ch: ChannelState<f64> = generate(&probe)?;
        let cfg = SystemConfig::with_uniform_power(
            dbm_to_mw(self.sweep.total_power_dbm[0]),
            probe.num_subcarriers,
            dbm_to_mw(self.system.noise_dbm),
            self.system.conversion_efficiency,
            vec![0.0; probe.num_users],
        )?;
        let inst = Instance::new(cfg, ch)?;
        for s in &self.run.schemes {
            match s {
                Scheme::Oracle => {
                    oracle_pa(&inst, self.oracle.grid_step)?;
                }
                Scheme::OracleUb => {
                    oracle_ub(&inst, self.oracle.grid_step)?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One scheme on one channel realisation at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub pt_dbm: f64,
    pub cbar_bits: f64,
    pub trial: usize,
    pub feasible: bool,
    pub objective: f64,
    pub violation: f64,
    pub info_power: f64,
    pub wall_ms: f64,
    pub dual_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub pt_dbm: f64,
    pub cbar_bits: f64,
    pub trials: usize,
    pub feasible_frac: f64,
    /// Mean harvested power, infeasible trials counted as 0.
    pub esum_mean: f64,
    /// Sample standard deviation of the same values (0 for a single trial).
    pub esum_std: f64,
    /// Mean over feasible trials; `None` when there are none.
    pub info_power_mean: Option<f64>,
    pub wall_ms_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    /// Sorted by (scheme, pt_dbm, cbar_bits).
    pub rows: Vec<AggregateRow>,
    /// Ordered by (pt, cbar, trial, scheme) as configured.
    pub trials: Vec<TrialRecord>,
}

impl ExperimentResult {
    pub fn row(&self, scheme: Scheme, pt_dbm: f64, cbar_bits: f64) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.pt_dbm == pt_dbm && r.cbar_bits == cbar_bits)
    }
}

pub fn solve_scheme(
    scheme: Scheme,
    inst: &Instance<f64>,
    cfg: &ExperimentConfig,
    solver_seed: u64,
) -> Result<SolveReport<f64>> {
    Ok(match scheme {
        Scheme::Ppa => {
            let opts = PpaOptions {
                seed: solver_seed,
                ..cfg.ppa.clone()
            };
            solve_ppa(inst, &opts).1
        }
        Scheme::Pub => solve_pub(inst, &cfg.pub_).1,
        Scheme::Fps => solve_fps(inst, &cfg.fps).1,
        Scheme::Fsa => solve_fsa(inst, &cfg.fsa).1,
        Scheme::Oracle => oracle_pa(inst, cfg.oracle.grid_step)?.1,
        Scheme::OracleUb => oracle_ub(inst, cfg.oracle.grid_step)?.1,
    })
}

/// Channel realisation of trial `t`.
pub fn trial_channel(cfg: &ExperimentConfig, trial: usize) -> Result<ChannelState<f64>> {
    let params = ScenarioParams {
        rng_seed: derive_seed(cfg.run.seed, &[trial as u64]),
        ..cfg.scenario.clone()
    };
    generate(&params)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    cfg.check_guard_rails()?;
    let (users, subcarriers) = (cfg.scenario.num_users, cfg.scenario.num_subcarriers);
    let channels = (0..cfg.run.trials)
        .map(|t| trial_channel(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    for &pt in &cfg.sweep.total_power_dbm {
        for &cbar in &cfg.sweep.cbar_bits {
            let system = SystemConfig::with_uniform_power(
                dbm_to_mw(pt),
                subcarriers,
                dbm_to_mw(cfg.system.noise_dbm),
                cfg.system.conversion_efficiency,
                cfg.sweep.demand_pattern.demands(users, cbar),
            )?;
            for (t, ch) in channels.iter().enumerate() {
                let inst = Instance::new(system.clone(), ch.clone())?;
                let solver_seed = derive_seed(cfg.run.seed, &[t as u64, 1]);
                for &scheme in &cfg.run.schemes {
                    let start = Instant::now();
                    let rep = solve_scheme(scheme, &inst, cfg, solver_seed)?;
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    if !rep.feasible {
                        log::debug!(
                            "{scheme} pt={pt} cbar={cbar} trial={t}: infeasible, violation {:.3e}",
                            rep.violation
                        );
                    }
                    if !rep.iterations.dual_converged && !scheme.is_oracle() {
                        log::trace!(
                            "{scheme} pt={pt} cbar={cbar} trial={t}: dual loop hit its cap"
                        );
                    }
                    records.push(TrialRecord {
                        scheme,
                        pt_dbm: pt,
                        cbar_bits: cbar,
                        trial: t,
                        feasible: rep.feasible,
                        objective: rep.objective,
                        violation: rep.violation,
                        info_power: rep.info_power,
                        wall_ms,
                        dual_iterations: rep.iterations.dual,
                    });
                }
            }
        }
    }
    let rows = aggregate(&records, cfg.run.timing);
    Ok(ExperimentResult {
        rows,
        trials: records,
    })
}

pub fn aggregate(records: &[TrialRecord], timing: bool) -> Vec<AggregateRow> {
    let mut keys: Vec<(Scheme, f64, f64)> = Vec::new();
    for r in records {
        let key = (r.scheme, r.pt_dbm, r.cbar_bits);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort_by(|a, b| {
        a.0.name()
            .cmp(b.0.name())
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    keys.into_iter()
        .map(|(scheme, pt, cbar)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.scheme == scheme && r.pt_dbm == pt && r.cbar_bits == cbar)
                .collect();
            let n = group.len() as f64;
            let esum: Vec<f64> = group
                .iter()
                .map(|r| if r.feasible { r.objective } else { 0.0 })
                .collect();
            let mean = esum.iter().sum::<f64>() / n;
            let std = if group.len() > 1 {
                (esum.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let feasible: Vec<&&TrialRecord> = group.iter().filter(|r| r.feasible).collect();
            let info = (!feasible.is_empty()).then(|| {
                feasible.iter().map(|r| r.info_power).sum::<f64>() / feasible.len() as f64
            });
            AggregateRow {
                scheme,
                pt_dbm: pt,
                cbar_bits: cbar,
                trials: group.len(),
                feasible_frac: feasible.len() as f64 / n,
                esum_mean: mean,
                esum_std: std,
                info_power_mean: info,
                wall_ms_mean: timing.then(|| group.iter().map(|r| r.wall_ms).sum::<f64>() / n),
            }
        })
        .collect()
}

/// `%.9g`: nine significant digits, trailing zeros removed, exponent form
/// outside `[1e-4, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(format_sig9).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.scheme.name().to_string(),
            format_sig9(r.pt_dbm),
            format_sig9(r.cbar_bits),
            r.trials.to_string(),
            format_sig9(r.feasible_frac),
            format_sig9(r.esum_mean),
            format_sig9(r.esum_std),
            opt(r.info_power_mean),
            opt(r.wall_ms_mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(rows, std::io::BufWriter::new(file))
}
