//! Named experiments: sweeps over M and over the normalized Doppler,
//! required-power search and power-scaling checks.

use crate::det_equiv::{de_rate_with_kernel, de_terms_from_kernel, de_sinr, power_scaling_sinr, DeKernel};
use crate::downlink::{hardening_sinr_mc, SinrReport, Source, SymbolPlan};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::scenario::{build_correlation, drop_users, CorrelationSet, LoTopology, SystemConfig, UserDrop};
use std::fmt;

/// Largest M and T_c accepted for Monte-Carlo runs without `paper_scale`.
pub const DESK_MAX_ANTENNAS: usize = 128;
pub const DESK_MAX_COHERENCE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SweepM,
    SweepDoppler,
    PowerForTargetRate,
    PowerScaling,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SweepM => "sweep_m",
            ExperimentKind::SweepDoppler => "sweep_doppler",
            ExperimentKind::PowerForTargetRate => "power_for_rate",
            ExperimentKind::PowerScaling => "power_scaling",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sweep_m" | "sweepm" => Ok(ExperimentKind::SweepM),
            "sweep_doppler" | "sweepdoppler" => Ok(ExperimentKind::SweepDoppler),
            "power_for_rate" | "powerfortargetrate" => Ok(ExperimentKind::PowerForTargetRate),
            "power_scaling" | "powerscaling" => Ok(ExperimentKind::PowerScaling),
            other => Err(Error::config("experiment", format!("unknown experiment `{other}`"))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Phase-noise standard deviations in degrees at the BS and the users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseNoiseCase {
    pub bs_deg: f64,
    pub user_deg: f64,
}

impl PhaseNoiseCase {
    pub fn new(bs_deg: f64, user_deg: f64) -> Self {
        PhaseNoiseCase { bs_deg, user_deg }
    }

    pub fn label(&self) -> String {
        format!("pn{}-{}", self.bs_deg, self.user_deg)
    }

    /// `cfg` with this case's phase-noise levels.
    pub fn apply(&self, cfg: &SystemConfig) -> SystemConfig {
        let bs_len = match cfg.lo_topology {
            LoTopology::Slo => cfg.antennas,
            LoTopology::Clo | LoTopology::Ilo => 1,
        };
        SystemConfig {
            sigma_phi_deg: vec![self.bs_deg; bs_len],
            sigma_varphi_deg: vec![self.user_deg],
            ..cfg.clone()
        }
    }
}

/// How the large-scale gains `β_k` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LargeScale {
    /// One seeded drop in the cell, shared by every grid point and case.
    Dropped,
    /// `β_k = 1` for every user.
    Unit,
}

/// Label of the no-aging reference case of the Doppler sweep.
pub const REFERENCE_CASE: &str = "ref";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub grid: Vec<f64>,
    pub base: SystemConfig,
    pub trials: usize,
    pub seed: u64,
    pub phase_cases: Vec<PhaseNoiseCase>,
    pub large_scale: LargeScale,
    pub monte_carlo: bool,
    pub symbol_stride: usize,
    /// Evaluate a single data symbol instead of the whole data phase.
    pub eval_lag: Option<usize>,
    /// Per-user target in bits/s/Hz, taken as `𝒮 / K`.
    pub target_rate: f64,
    pub q_values: Vec<f64>,
    /// Scale `p_u` together with `p_d` in the power search.
    pub couple_uplink_power: bool,
    /// Record unreachable power targets as `inf` instead of failing the run.
    pub skip_infeasible: bool,
    pub paper_scale: bool,
}

impl ExperimentSpec {
    pub fn new(name: &str, kind: ExperimentKind, base: SystemConfig, grid: Vec<f64>) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            kind,
            grid,
            base,
            trials: 200,
            seed: 1,
            phase_cases: vec![PhaseNoiseCase::new(0.0, 0.0)],
            large_scale: LargeScale::Dropped,
            monte_carlo: true,
            symbol_stride: 1,
            eval_lag: None,
            target_rate: 1.0,
            q_values: vec![0.4, 0.5, 0.6],
            couple_uplink_power: false,
            skip_infeasible: false,
            paper_scale: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("grid", "must not be empty"));
        }
        if self.grid.iter().any(|v| !v.is_finite()) || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("grid", "values must be finite and strictly increasing"));
        }
        if self.phase_cases.is_empty() {
            return Err(Error::config("phase_cases", "need at least one case"));
        }
        if self.symbol_stride == 0 {
            return Err(Error::config("symbol_stride", "must be >= 1"));
        }
        let uses_mc = self.monte_carlo && matches!(self.kind, ExperimentKind::SweepM | ExperimentKind::SweepDoppler);
        if uses_mc && self.trials < 2 {
            return Err(Error::config("trials", "Monte-Carlo needs at least 2 trials"));
        }
        match self.kind {
            ExperimentKind::SweepM | ExperimentKind::PowerForTargetRate | ExperimentKind::PowerScaling => {
                if self.grid.iter().any(|&m| m < 1.0 || m.fract() != 0.0) {
                    return Err(Error::config("grid", "antenna counts must be positive integers"));
                }
            }
            ExperimentKind::SweepDoppler => {
                if self.grid.iter().any(|&v| v < 0.0) {
                    return Err(Error::config("grid", "normalized Doppler must be >= 0"));
                }
            }
        }
        if self.kind == ExperimentKind::PowerForTargetRate && !(self.target_rate >= 0.0) {
            return Err(Error::config("target_rate", "must be >= 0"));
        }
        if self.kind == ExperimentKind::PowerScaling && self.q_values.iter().any(|&q| !(q > 0.0)) {
            return Err(Error::config("q_values", "every q must be > 0"));
        }
        if uses_mc && !self.paper_scale {
            let max_m = match self.kind {
                ExperimentKind::SweepM => self.grid.last().copied().unwrap_or(0.0) as usize,
                _ => self.base.antennas,
            };
            if max_m > DESK_MAX_ANTENNAS {
                return Err(Error::config(
                    "m",
                    format!("Monte-Carlo with M = {max_m} > {DESK_MAX_ANTENNAS} needs --paper-scale"),
                ));
            }
            if self.base.coherence_symbols > DESK_MAX_COHERENCE {
                return Err(Error::config(
                    "t_c",
                    format!(
                        "Monte-Carlo with T_c = {} > {DESK_MAX_COHERENCE} needs --paper-scale",
                        self.base.coherence_symbols
                    ),
                ));
            }
        }
        for case in &self.phase_cases {
            self.config_for(self.base.antennas, case).validate()?;
        }
        Ok(())
    }

    fn config_for(&self, antennas: usize, case: &PhaseNoiseCase) -> SystemConfig {
        case.apply(&SystemConfig {
            antennas,
            ..self.base.clone()
        })
    }

    fn plan(&self, cfg: &SystemConfig) -> SymbolPlan {
        match self.eval_lag {
            Some(n) => SymbolPlan::single(cfg, n),
            None => SymbolPlan::strided(cfg, self.symbol_stride),
        }
    }

    fn large_scale_drop(&self) -> Result<UserDrop> {
        match self.large_scale {
            LargeScale::Dropped => drop_users(&self.base, &RngStream::new(self.seed).child(DROP_STREAM)),
            LargeScale::Unit => Ok(UserDrop {
                radii_m: vec![self.base.guard_radius_m; self.base.users],
                angles_rad: vec![0.0; self.base.users],
                shadow: vec![1.0; self.base.users],
                betas: vec![1.0; self.base.users],
            }),
        }
    }
}

const DROP_STREAM: u64 = 0xD809;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep: f64,
    pub case: String,
    pub source: Source,
    pub rates: Vec<f64>,
    pub sum_se: f64,
    /// 95% half-width per user rate (Monte-Carlo rows only).
    pub ci_halfwidth: Option<Vec<f64>>,
    pub sum_se_ci: Option<f64>,
}

impl ResultRow {
    fn from_report(sweep: f64, case: &str, report: &SinrReport) -> Self {
        ResultRow {
            sweep,
            case: case.to_string(),
            source: report.source,
            rates: report.rates.clone(),
            sum_se: report.sum_se(),
            ci_halfwidth: report.rate_ci.clone(),
            sum_se_ci: report.sum_se_ci,
        }
    }
}

/// Required downlink power found for one `(M, case)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub antennas: usize,
    pub case: String,
    pub required_pd: f64,
    pub achieved_rate: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingClass {
    Growing,
    Converging,
    Vanishing,
}

impl ScalingClass {
    pub fn label(self) -> &'static str {
        match self {
            ScalingClass::Growing => "growing",
            ScalingClass::Converging => "converging",
            ScalingClass::Vanishing => "vanishing",
        }
    }
}

/// Log-log slope of `γ̄` in M beyond which a sequence counts as growing or vanishing.
pub const SLOPE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub q: f64,
    pub antennas: Vec<usize>,
    pub sinr: Vec<f64>,
    /// `d log γ̄ / d log M` between the last two grid points.
    pub slope: f64,
    pub class: ScalingClass,
    /// The M-independent closed-form limit for `q = 1/2`.
    pub limit: f64,
}

pub fn classify_slope(slope: f64) -> ScalingClass {
    if slope > SLOPE_THRESHOLD {
        ScalingClass::Growing
    } else if slope < -SLOPE_THRESHOLD {
        ScalingClass::Vanishing
    } else {
        ScalingClass::Converging
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub power: Vec<PowerRow>,
    pub scaling: Vec<ScalingRow>,
}

impl ResultTable {
    /// Sorts rows by `(sweep, case, source)`.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.sweep
                .total_cmp(&b.sweep)
                .then_with(|| a.case.cmp(&b.case))
                .then_with(|| a.source.cmp(&b.source))
        });
        self.power
            .sort_by(|a, b| a.antennas.cmp(&b.antennas).then_with(|| a.case.cmp(&b.case)));
    }

    pub fn row(&self, sweep: f64, case: &str, source: Source) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep == sweep && r.case == case && r.source == source)
    }

    /// `(sweep, sum_se)` of one curve in grid order.
    pub fn curve(&self, case: &str, source: Source) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.case == case && r.source == source)
            .map(|r| (r.sweep, r.sum_se))
            .collect()
    }
}

fn evaluate_point(spec: &ExperimentSpec, cfg: &SystemConfig, corr: &CorrelationSet, sweep: f64, case: &str, out: &mut Vec<ResultRow>) -> Result<()> {
    let plan = spec.plan(cfg);
    let de = de_rate_with_kernel(cfg, &DeKernel::from_config(cfg, corr)?, &plan)?;
    out.push(ResultRow::from_report(sweep, case, &de));
    if spec.monte_carlo {
        let mc = hardening_sinr_mc(cfg, corr, &plan, spec.trials, spec.seed)?;
        out.push(ResultRow::from_report(sweep, case, &mc));
    }
    Ok(())
}

/// Sum spectral efficiency over the M grid for each phase-noise case.
pub fn run_sweep_m(spec: &ExperimentSpec) -> Result<ResultTable> {
    expect_kind(spec, ExperimentKind::SweepM)?;
    spec.validate()?;
    let drop = spec.large_scale_drop()?;
    let mut rows = Vec::new();
    for &m in &spec.grid {
        for case in &spec.phase_cases {
            let cfg = spec.config_for(m as usize, case);
            let corr = build_correlation(&cfg, &drop)?;
            evaluate_point(spec, &cfg, &corr, m, &case.label(), &mut rows)?;
        }
    }
    let mut table = ResultTable {
        rows,
        ..ResultTable::default()
    };
    table.sort();
    Ok(table)
}

/// Sum spectral efficiency over `f_D T_s` at fixed M, plus a no-aging reference.
pub fn run_sweep_doppler(spec: &ExperimentSpec) -> Result<ResultTable> {
    expect_kind(spec, ExperimentKind::SweepDoppler)?;
    spec.validate()?;
    let drop = spec.large_scale_drop()?;
    let m = spec.base.antennas;
    let corr = build_correlation(&spec.base, &drop)?;
    let mut rows = Vec::new();
    let reference = SystemConfig {
        doppler_hz: 0.0,
        ..PhaseNoiseCase::new(0.0, 0.0).apply(&spec.base)
    };
    let mut reference_rows = Vec::new();
    evaluate_point(spec, &reference, &corr, 0.0, REFERENCE_CASE, &mut reference_rows)?;
    for &v in &spec.grid {
        for case in &spec.phase_cases {
            let cfg = SystemConfig {
                doppler_hz: v / spec.base.symbol_time_s,
                ..spec.config_for(m, case)
            };
            evaluate_point(spec, &cfg, &corr, v, &case.label(), &mut rows)?;
        }
        for r in &reference_rows {
            rows.push(ResultRow { sweep: v, ..r.clone() });
        }
    }
    let mut table = ResultTable {
        rows,
        ..ResultTable::default()
    };
    table.sort();
    Ok(table)
}

pub const POWER_BRACKET: (f64, f64) = (1e-6, 1e6);
pub const RATE_TOLERANCE: f64 = 1e-4;
pub const MAX_BISECTION_STEPS: usize = 60;

fn average_de_rate(cfg: &SystemConfig, corr: &CorrelationSet, plan: &SymbolPlan) -> Result<f64> {
    let report = de_rate_with_kernel(cfg, &DeKernel::from_config(cfg, corr)?, plan)?;
    Ok(report.sum_se() / cfg.users as f64)
}

/// Smallest `p_d` in the bracket at which the average DE rate per user
/// reaches `target`, by bisection on `log p_d`.
pub fn required_power(cfg: &SystemConfig, corr: &CorrelationSet, plan: &SymbolPlan, target: f64, couple_uplink: bool) -> Result<(f64, f64, usize)> {
    let at = |p: f64| {
        let c = SystemConfig {
            p_d: p,
            p_u: if couple_uplink { p } else { cfg.p_u },
            ..cfg.clone()
        };
        average_de_rate(&c, corr, plan)
    };
    let (lo_p, hi_p) = POWER_BRACKET;
    let lo_rate = at(lo_p)?;
    if lo_rate >= target {
        return Ok((lo_p, lo_rate, 0));
    }
    let hi_rate = at(hi_p)?;
    if hi_rate < target - RATE_TOLERANCE {
        return Err(Error::TargetInfeasible(format!(
            "{hi_rate:.6} bits/s/Hz at p_d = {hi_p:e} is below the target {target}"
        )));
    }
    let (mut lo, mut hi) = (lo_p.ln(), hi_p.ln());
    let (mut best_p, mut best_rate) = (hi_p, hi_rate);
    for step in 1..=MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let rate = at(mid.exp())?;
        if rate >= target {
            hi = mid;
            best_p = mid.exp();
            best_rate = rate;
        } else {
            lo = mid;
        }
        if (rate - target).abs() < RATE_TOLERANCE {
            return Ok((mid.exp(), rate, step));
        }
    }
    Ok((best_p, best_rate, MAX_BISECTION_STEPS))
}

/// Required `p_d` for the target per-user rate at each M and case.
pub fn find_power_for_rate(spec: &ExperimentSpec) -> Result<ResultTable> {
    expect_kind(spec, ExperimentKind::PowerForTargetRate)?;
    spec.validate()?;
    let drop = spec.large_scale_drop()?;
    let mut table = ResultTable::default();
    for &m in &spec.grid {
        for case in &spec.phase_cases {
            let cfg = spec.config_for(m as usize, case);
            let corr = build_correlation(&cfg, &drop)?;
            let plan = spec.plan(&cfg);
            let (p, rate, iterations) = match required_power(&cfg, &corr, &plan, spec.target_rate, spec.couple_uplink_power) {
                Err(Error::TargetInfeasible(_)) if spec.skip_infeasible => {
                    let top = SystemConfig {
                        p_d: POWER_BRACKET.1,
                        p_u: if spec.couple_uplink_power { POWER_BRACKET.1 } else { cfg.p_u },
                        ..cfg.clone()
                    };
                    table.power.push(PowerRow {
                        antennas: m as usize,
                        case: case.label(),
                        required_pd: f64::INFINITY,
                        achieved_rate: average_de_rate(&top, &corr, &plan)?,
                        iterations: 0,
                    });
                    continue;
                }
                other => other?,
            };
            let found = SystemConfig {
                p_d: p,
                p_u: if spec.couple_uplink_power { p } else { cfg.p_u },
                ..cfg.clone()
            };
            let report = de_rate_with_kernel(&found, &DeKernel::from_config(&found, &corr)?, &plan)?;
            table.rows.push(ResultRow::from_report(m, &case.label(), &report));
            table.power.push(PowerRow {
                antennas: m as usize,
                case: case.label(),
                required_pd: p,
                achieved_rate: rate,
                iterations,
            });
        }
    }
    table.sort();
    Ok(table)
}

/// Deterministic-equivalent SINR at the first data symbol under
/// `p_u = E_u/M^q`, `p_d = E_d/M^q`, with `E_u`, `E_d` taken from the base config.
pub fn scaled_sinr(spec: &ExperimentSpec, drop: &UserDrop, q: f64, antennas: usize) -> Result<(SystemConfig, CorrelationSet, f64)> {
    let scale = (antennas as f64).powf(-q);
    let case = spec.phase_cases[0];
    let cfg = SystemConfig {
        p_u: spec.base.p_u * scale,
        p_d: spec.base.p_d * scale,
        ..spec.config_for(antennas, &case)
    };
    let corr = build_correlation(&cfg, drop)?;
    let n = spec.eval_lag.unwrap_or(cfg.tau + 1);
    let terms = de_terms_from_kernel(&cfg, &DeKernel::from_config(&cfg, &corr)?, n)?;
    let gamma = de_sinr(&terms, &cfg, 0, n)?;
    Ok((cfg, corr, gamma))
}

/// Classifies each `q` by the growth of the closed-form SINR of user 0.
pub fn verify_power_scaling(spec: &ExperimentSpec, q_values: &[f64]) -> Result<ResultTable> {
    expect_kind(spec, ExperimentKind::PowerScaling)?;
    spec.validate()?;
    if spec.grid.len() < 2 {
        return Err(Error::config("grid", "classification needs at least two antenna counts"));
    }
    if spec.base.common_bs_phase_variance().is_none() {
        return Err(Error::HeterogeneousBsVariance);
    }
    let drop = spec.large_scale_drop()?;
    let mut table = ResultTable::default();
    for &q in q_values {
        if !(q > 0.0) {
            return Err(Error::config("q_values", format!("q must be > 0, got {q}")));
        }
        let mut antennas = Vec::new();
        let mut sinr = Vec::new();
        let mut limit = 0.0;
        for &m in &spec.grid {
            let m = m as usize;
            let (cfg, corr, gamma) = scaled_sinr(spec, &drop, q, m)?;
            let plan = spec.plan(&cfg);
            let report = de_rate_with_kernel(&cfg, &DeKernel::from_config(&cfg, &corr)?, &plan)?;
            table.rows.push(ResultRow::from_report(m as f64, &format!("q{q}"), &report));
            let n = spec.eval_lag.unwrap_or(cfg.tau + 1);
            limit = power_scaling_sinr(&cfg, &corr, 0, n, 0.5, spec.base.p_u, spec.base.p_d, 0)?;
            antennas.push(m);
            sinr.push(gamma);
        }
        let last = sinr.len() - 1;
        let slope = (sinr[last] / sinr[last - 1]).ln() / (antennas[last] as f64 / antennas[last - 1] as f64).ln();
        table.scaling.push(ScalingRow {
            q,
            antennas,
            sinr,
            slope,
            class: classify_slope(slope),
            limit,
        });
    }
    table.sort();
    Ok(table)
}

/// Dispatches on `spec.kind`.
pub fn run(spec: &ExperimentSpec) -> Result<ResultTable> {
    match spec.kind {
        ExperimentKind::SweepM => run_sweep_m(spec),
        ExperimentKind::SweepDoppler => run_sweep_doppler(spec),
        ExperimentKind::PowerForTargetRate => find_power_for_rate(spec),
        ExperimentKind::PowerScaling => verify_power_scaling(spec, &spec.q_values),
    }
}

/// Per-symbol ratio of Monte-Carlo to closed-form SINR, averaged over users.
pub fn mc_de_ratio(cfg: &SystemConfig, corr: &CorrelationSet, plan: &SymbolPlan, trials: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let mc = hardening_sinr_mc(cfg, corr, plan, trials, seed)?;
    let de = de_rate_with_kernel(cfg, &DeKernel::from_config(cfg, corr)?, plan)?;
    let k = cfg.users;
    Ok(plan
        .times
        .iter()
        .enumerate()
        .map(|(slot, &n)| {
            let ratio = (0..k)
                .map(|u| mc.entry(slot, u).sinr / de.entry(slot, u).sinr)
                .sum::<f64>()
                / k as f64;
            (n, ratio)
        })
        .collect())
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind == kind {
        Ok(())
    } else {
        Err(Error::config(
            "experiment",
            format!("spec is `{}`, expected `{}`", spec.kind, kind),
        ))
    }
}
