//! Config files, presets, CSV output and the run manifest.
//!
//! A config file holds one `key = value` per line; `#` starts a comment,
//! lists are comma separated and keys are case-insensitive.

use crate::downlink::Source;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentKind, ExperimentSpec, LargeScale, PhaseNoiseCase, ResultTable};
use crate::scenario::{AgingPath, LoTopology, SystemConfig};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Every accepted config key with its unit and default.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("m", "BS antennas [count], default 64"),
    ("k", "users [count], default 8"),
    ("tau", "pilot length [symbols], >= k, default 8"),
    ("t_c", "coherence block [symbols], default 500"),
    ("p_u", "uplink pilot power [linear], default 1"),
    ("p_d", "downlink power [linear], default 1"),
    ("sigma_b2", "BS noise variance [linear], default 1e-4"),
    ("sigma_k2", "user noise variance [linear], default 1e-4"),
    ("f_d", "Doppler spread [Hz], default 250"),
    ("t_s", "symbol time [s], default 2.5e-8"),
    ("f_c", "carrier frequency [Hz], default 2e9"),
    ("lo_topology", "CLO, ILO or SLO, default CLO"),
    ("sigma_phi_deg", "BS phase increment std [deg], 1 value (M for SLO), default 0"),
    ("sigma_varphi_deg", "user phase increment std [deg], 1 or K values, default 0"),
    ("cell_radius", "cell radius [m], default 1000"),
    ("guard_radius", "guard radius r0 [m], default 100"),
    ("shadow_std_db", "log-normal shadowing std [dB], default 8"),
    ("path_loss_exp", "path-loss exponent, default 3.8"),
    ("antenna_correlation", "exponential correlation coefficient in [0, 1), default 0"),
    ("aging_path", "direct_jakes_lag or recursive_ar1, default direct_jakes_lag"),
    ("preset", "fig1, fig2, fig3 or scaling"),
    ("experiment", "sweep_m, sweep_doppler, power_for_rate or power_scaling"),
    ("grid", "sweep values: M for sweep_m/power_for_rate/power_scaling, f_D T_s for sweep_doppler"),
    ("trials", "Monte-Carlo coherence blocks [count], default 200"),
    ("seed", "root seed [u64], default 1"),
    ("phase_cases", "bs_deg:user_deg pairs, default 0:0,0:2,2:2"),
    ("large_scale", "dropped (one seeded drop) or unit (beta = 1)"),
    ("monte_carlo", "true/false, run the simulator next to the closed form"),
    ("symbol_stride", "evaluate every n-th data symbol [count], default 4"),
    ("eval_lag", "evaluate one symbol only [symbols] or none"),
    ("target_rate", "per-user target for power_for_rate [bits/s/Hz], default 1"),
    ("q_values", "power-scaling exponents, default 0.4,0.5,0.6"),
    ("couple_uplink_power", "true/false, scale p_u with p_d in power_for_rate"),
    ("skip_infeasible", "true/false, report unreachable power targets as inf instead of failing"),
];

pub fn config_help() -> String {
    let mut out = String::from("Config keys (key = value, one per line):\n");
    for (key, text) in CONFIG_KEYS {
        let _ = writeln!(out, "  {key:<20} {text}");
    }
    out
}

pub const PRESETS: &[&str] = &["fig1", "fig2", "fig3", "scaling"];

fn default_cases() -> Vec<PhaseNoiseCase> {
    vec![
        PhaseNoiseCase::new(0.0, 0.0),
        PhaseNoiseCase::new(0.0, 2.0),
        PhaseNoiseCase::new(2.0, 2.0),
    ]
}

/// `T_c = 1 ms` expressed in symbols.
fn full_coherence(symbol_time_s: f64) -> usize {
    (1e-3 / symbol_time_s + 1e-9).floor() as usize
}

/// Desk-scale (or, with `paper_scale`, full-size) setup of a named experiment.
pub fn preset(name: &str, paper_scale: bool) -> Result<ExperimentSpec> {
    let base = SystemConfig::default();
    let mut spec = match name.trim().to_ascii_lowercase().as_str() {
        "fig1" => {
            let grid = if paper_scale {
                vec![30.0, 60.0, 100.0, 150.0, 200.0, 300.0]
            } else {
                vec![16.0, 32.0, 64.0, 128.0]
            };
            let base = SystemConfig {
                doppler_hz: 0.0,
                ..base
            };
            ExperimentSpec {
                symbol_stride: 4,
                ..ExperimentSpec::new("fig1", ExperimentKind::SweepM, base, grid)
            }
        }
        "fig2" => {
            let base = SystemConfig {
                antennas: 60,
                ..base
            };
            let grid = vec![0.0, 1e-4, 2e-4, 4e-4, 7e-4, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4];
            ExperimentSpec {
                symbol_stride: 4,
                ..ExperimentSpec::new("fig2", ExperimentKind::SweepDoppler, base, grid)
            }
        }
        "fig3" => {
            let base = SystemConfig {
                doppler_hz: 0.0,
                ..base
            };
            ExperimentSpec {
                monte_carlo: false,
                couple_uplink_power: true,
                skip_infeasible: true,
                target_rate: 1.0,
                ..ExperimentSpec::new(
                    "fig3",
                    ExperimentKind::PowerForTargetRate,
                    base,
                    vec![32.0, 64.0, 128.0],
                )
            }
        }
        "scaling" => {
            let base = SystemConfig {
                users: 1,
                tau: 1,
                p_u: 1.0,
                p_d: 1.0,
                sigma_b2: 1.0,
                sigma_k2: 1.0,
                doppler_hz: 0.0,
                ..base
            };
            ExperimentSpec {
                monte_carlo: false,
                large_scale: LargeScale::Unit,
                phase_cases: vec![PhaseNoiseCase::new(0.0, 0.0)],
                ..ExperimentSpec::new(
                    "scaling",
                    ExperimentKind::PowerScaling,
                    base,
                    vec![64.0, 256.0, 1024.0, 4096.0],
                )
            }
        }
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (expected one of {})", PRESETS.join(", ")),
            ))
        }
    };
    if spec.phase_cases.len() == 1 && spec.kind != ExperimentKind::PowerScaling {
        spec.phase_cases = default_cases();
    }
    if paper_scale {
        spec.paper_scale = true;
        spec.base.coherence_symbols = full_coherence(spec.base.symbol_time_s);
        if spec.monte_carlo {
            spec.symbol_stride = 100;
        }
    }
    Ok(spec)
}

fn preset_for_kind(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SweepM => "fig1",
        ExperimentKind::SweepDoppler => "fig2",
        ExperimentKind::PowerForTargetRate => "fig3",
        ExperimentKind::PowerScaling => "scaling",
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub paper_scale: bool,
}

/// Splits config text into `(key, value)` pairs, rejecting duplicates.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
        })?;
        let key = key.trim().to_ascii_lowercase();
        if !CONFIG_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::config(key, "unknown key"));
        }
        if seen.insert(key.clone(), ()).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}` as {}", std::any::type_name::<T>())))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| num::<f64>(key, v))
        .collect()
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{value}`"))),
    }
}

fn phase_cases(key: &str, value: &str) -> Result<Vec<PhaseNoiseCase>> {
    value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|pair| {
            let (bs, user) = pair
                .split_once(':')
                .ok_or_else(|| Error::config(key, format!("expected bs_deg:user_deg, got `{pair}`")))?;
            Ok(PhaseNoiseCase::new(num(key, bs.trim())?, num(key, user.trim())?))
        })
        .collect()
}

fn apply_key(spec: &mut ExperimentSpec, key: &str, value: &str) -> Result<()> {
    let b = &mut spec.base;
    match key {
        "m" => b.antennas = num(key, value)?,
        "k" => b.users = num(key, value)?,
        "tau" => b.tau = num(key, value)?,
        "t_c" => b.coherence_symbols = num(key, value)?,
        "p_u" => b.p_u = num(key, value)?,
        "p_d" => b.p_d = num(key, value)?,
        "sigma_b2" => b.sigma_b2 = num(key, value)?,
        "sigma_k2" => b.sigma_k2 = num(key, value)?,
        "f_d" => b.doppler_hz = num(key, value)?,
        "t_s" => b.symbol_time_s = num(key, value)?,
        "f_c" => b.carrier_hz = num(key, value)?,
        "lo_topology" => b.lo_topology = value.parse::<LoTopology>().map_err(|e| Error::config(key, e))?,
        "sigma_phi_deg" => b.sigma_phi_deg = list(key, value)?,
        "sigma_varphi_deg" => b.sigma_varphi_deg = list(key, value)?,
        "cell_radius" => b.cell_radius_m = num(key, value)?,
        "guard_radius" => b.guard_radius_m = num(key, value)?,
        "shadow_std_db" => b.shadow_std_db = num(key, value)?,
        "path_loss_exp" => b.path_loss_exp = num(key, value)?,
        "antenna_correlation" => b.antenna_correlation = num(key, value)?,
        "aging_path" => b.aging_path = value.parse::<AgingPath>().map_err(|e| Error::config(key, e))?,
        "preset" | "experiment" => {}
        "grid" => spec.grid = list(key, value)?,
        "trials" => spec.trials = num(key, value)?,
        "seed" => spec.seed = num(key, value)?,
        "phase_cases" => spec.phase_cases = phase_cases(key, value)?,
        "large_scale" => {
            spec.large_scale = match value.to_ascii_lowercase().as_str() {
                "dropped" => LargeScale::Dropped,
                "unit" => LargeScale::Unit,
                _ => return Err(Error::config(key, format!("expected dropped or unit, got `{value}`"))),
            }
        }
        "monte_carlo" => spec.monte_carlo = boolean(key, value)?,
        "symbol_stride" => spec.symbol_stride = num(key, value)?,
        "eval_lag" => {
            spec.eval_lag = if value.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(num(key, value)?)
            }
        }
        "target_rate" => spec.target_rate = num(key, value)?,
        "q_values" => spec.q_values = list(key, value)?,
        "couple_uplink_power" => spec.couple_uplink_power = boolean(key, value)?,
        "skip_infeasible" => spec.skip_infeasible = boolean(key, value)?,
        _ => return Err(Error::config(key, "unknown key")),
    }
    Ok(())
}

/// Resolves config text and command-line overrides into a validated spec.
///
/// The starting point is the preset (from the flag, then the file), or the
/// preset matching `experiment`; file keys then flags are applied on top.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentSpec> {
    let pairs = parse_pairs(text)?;
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let kind = get("experiment").map(|v| v.parse::<ExperimentKind>()).transpose()?;
    let preset_name = match (overrides.preset.clone().or_else(|| get("preset")), kind) {
        (Some(name), _) => name,
        (None, Some(kind)) => preset_for_kind(kind).to_string(),
        (None, None) => return Err(Error::config("experiment", "missing: give `preset` or `experiment`")),
    };
    let mut spec = preset(&preset_name, overrides.paper_scale)?;
    if let Some(kind) = kind {
        if kind != spec.kind {
            return Err(Error::config(
                "experiment",
                format!("`{kind}` conflicts with preset `{preset_name}`"),
            ));
        }
    }
    for (key, value) in &pairs {
        apply_key(&mut spec, key, value)?;
    }
    if let Some(t) = overrides.trials {
        spec.trials = t;
    }
    if let Some(s) = overrides.seed {
        spec.seed = s;
    }
    spec.base.validate()?;
    spec.validate()?;
    Ok(spec)
}

pub fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Every key of the resolved spec in config-file syntax.
pub fn config_entries(spec: &ExperimentSpec) -> Vec<(String, String)> {
    let b = &spec.base;
    let cases = spec
        .phase_cases
        .iter()
        .map(|c| format!("{}:{}", c.bs_deg, c.user_deg))
        .collect::<Vec<_>>()
        .join(",");
    let mut out = vec![
        ("experiment", spec.kind.to_string()),
        ("m", b.antennas.to_string()),
        ("k", b.users.to_string()),
        ("tau", b.tau.to_string()),
        ("t_c", b.coherence_symbols.to_string()),
        ("p_u", b.p_u.to_string()),
        ("p_d", b.p_d.to_string()),
        ("sigma_b2", b.sigma_b2.to_string()),
        ("sigma_k2", b.sigma_k2.to_string()),
        ("f_d", b.doppler_hz.to_string()),
        ("t_s", b.symbol_time_s.to_string()),
        ("f_c", b.carrier_hz.to_string()),
        ("lo_topology", b.lo_topology.to_string()),
        ("sigma_phi_deg", join(&b.sigma_phi_deg)),
        ("sigma_varphi_deg", join(&b.sigma_varphi_deg)),
        ("cell_radius", b.cell_radius_m.to_string()),
        ("guard_radius", b.guard_radius_m.to_string()),
        ("shadow_std_db", b.shadow_std_db.to_string()),
        ("path_loss_exp", b.path_loss_exp.to_string()),
        ("antenna_correlation", b.antenna_correlation.to_string()),
        ("aging_path", b.aging_path.to_string()),
        ("grid", join(&spec.grid)),
        ("trials", spec.trials.to_string()),
        ("seed", spec.seed.to_string()),
        ("phase_cases", cases),
        (
            "large_scale",
            match spec.large_scale {
                LargeScale::Dropped => "dropped".to_string(),
                LargeScale::Unit => "unit".to_string(),
            },
        ),
        ("monte_carlo", spec.monte_carlo.to_string()),
        ("symbol_stride", spec.symbol_stride.to_string()),
        (
            "eval_lag",
            spec.eval_lag.map(|n| n.to_string()).unwrap_or_else(|| "none".into()),
        ),
        ("target_rate", spec.target_rate.to_string()),
        ("q_values", join(&spec.q_values)),
        ("couple_uplink_power", spec.couple_uplink_power.to_string()),
        ("skip_infeasible", spec.skip_infeasible.to_string()),
    ];
    out.sort_by(|a, b| a.0.cmp(b.0));
    out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Decimal rendering with 12 significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub const CSV_HEADER: &str = "sweep,case,source,user,rate,sum_se,ci_halfwidth";

/// Main result table, one line per user.
pub fn render_csv(table: &ResultTable) -> String {
    let mut rows: Vec<_> = table.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.sweep
            .total_cmp(&b.sweep)
            .then_with(|| a.case.cmp(&b.case))
            .then_with(|| a.source.label().cmp(b.source.label()))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        for (user, rate) in row.rates.iter().enumerate() {
            let ci = match (&row.ci_halfwidth, row.source) {
                (Some(ci), Source::MonteCarlo) => format_sig(ci[user]),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                format_sig(row.sweep),
                row.case,
                row.source.label(),
                user,
                format_sig(*rate),
                format_sig(row.sum_se),
                ci
            );
        }
    }
    out
}

pub fn render_power_csv(table: &ResultTable) -> String {
    let mut out = String::from("m,case,required_pd,required_pd_db,achieved_rate,iterations\n");
    for p in &table.power {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.antennas,
            p.case,
            format_sig(p.required_pd),
            format_sig(10.0 * p.required_pd.log10()),
            format_sig(p.achieved_rate),
            p.iterations
        );
    }
    out
}

pub fn render_scaling_csv(table: &ResultTable) -> String {
    let mut out = String::from("q,m,sinr,slope,class,limit\n");
    for row in &table.scaling {
        for (m, g) in row.antennas.iter().zip(&row.sinr) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                format_sig(row.q),
                m,
                format_sig(*g),
                format_sig(row.slope),
                row.class.label(),
                format_sig(row.limit)
            );
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    write_file(path, &render_csv(table))
}

/// Writes the result CSVs under `out` and returns their paths.
pub fn write_outputs(spec: &ExperimentSpec, table: &ResultTable, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    let mut files = Vec::new();
    let main = out.join(format!("{}.csv", spec.name));
    emit_csv(table, &main)?;
    files.push(main);
    if !table.power.is_empty() {
        let p = out.join(format!("{}_required_pd.csv", spec.name));
        write_file(&p, &render_power_csv(table))?;
        files.push(p);
    }
    if !table.scaling.is_empty() {
        let p = out.join(format!("{}_classes.csv", spec.name));
        write_file(&p, &render_scaling_csv(table))?;
        files.push(p);
    }
    Ok(files)
}

/// Manifest in config syntax; metadata lines are comments so the file can
/// be fed back with `--config`.
pub fn render_manifest(spec: &ExperimentSpec, files: &[PathBuf], started_unix_s: u64, elapsed_s: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tool_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# name = {}", spec.name);
    let _ = writeln!(out, "# root_seed = {}", spec.seed);
    let _ = writeln!(out, "# started_unix_s = {started_unix_s}");
    let _ = writeln!(out, "# wall_clock_s = {elapsed_s:.3}");
    let _ = writeln!(out, "# paper_scale = {}", spec.paper_scale);
    for f in files {
        let _ = writeln!(out, "# output = {}", f.display());
    }
    if spec.paper_scale {
        let _ = writeln!(out, "# rerun with --paper-scale");
    }
    let _ = writeln!(out, "preset = {}", preset_for_kind(spec.kind));
    for (k, v) in config_entries(spec) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

pub fn write_manifest(spec: &ExperimentSpec, files: &[PathBuf], out: &Path, started_unix_s: u64, elapsed_s: f64) -> Result<PathBuf> {
    let path = out.join("manifest.txt");
    write_file(&path, &render_manifest(spec, files, started_unix_s, elapsed_s))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ResultRow;

    #[test]
    fn minimal_file_gets_defaults() {
        let spec = parse_config("M = 64\nK = 8\npreset = fig1\n", &Overrides::default()).unwrap();
        assert_eq!(spec.kind, ExperimentKind::SweepM);
        assert_eq!(spec.base.antennas, 64);
        assert_eq!(spec.base.doppler_hz, 0.0);
        let echo = config_entries(&spec);
        assert_eq!(echo.len(), CONFIG_KEYS.len() - 1);
        assert!(echo.iter().any(|(k, v)| k == "sigma_b2" && v == "0.0001"));
    }

    #[test]
    fn slo_length_names_key() {
        let text = "preset = fig1\nlo_topology = SLO\nsigma_phi_deg = 1,2\n";
        let err = parse_config(text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("sigma_phi_deg"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let o = Overrides {
            trials: Some(1000),
            ..Overrides::default()
        };
        let spec = parse_config("preset = fig1\ntrials = 100\n", &o).unwrap();
        assert_eq!(spec.trials, 1000);
    }

    #[test]
    fn unknown_and_malformed() {
        let o = Overrides::default();
        assert!(parse_config("preset = fig1\nfoo = 1\n", &o).unwrap_err().to_string().contains("`foo`"));
        assert!(parse_config("preset = fig1\nm = many\n", &o).unwrap_err().to_string().contains("`m`"));
        assert!(parse_config("m = 4\n", &o).unwrap_err().to_string().contains("`experiment`"));
        assert!(parse_config("preset = fig9\n", &o).is_err());
        assert!(parse_config("preset = fig1\nm = 4\nm = 5\n", &o).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(preset("fig1", false).unwrap().base.doppler_hz, 0.0);
        let fig2 = preset("fig2", false).unwrap();
        assert_eq!(fig2.kind, ExperimentKind::SweepDoppler);
        assert_eq!(fig2.base.antennas, 60);
        let fig3 = preset("fig3", false).unwrap();
        assert_eq!(fig3.kind, ExperimentKind::PowerForTargetRate);
        assert_eq!(fig3.target_rate, 1.0);
        for name in ["fig1", "fig2", "fig3"] {
            let labels: Vec<String> = preset(name, false).unwrap().phase_cases.iter().map(|c| c.label()).collect();
            assert_eq!(labels, ["pn0-0", "pn0-2", "pn2-2"]);
        }
        let big = preset("fig1", true).unwrap();
        assert_eq!(big.base.coherence_symbols, 40_000);
        assert_eq!(*big.grid.last().unwrap(), 300.0);
        assert!(preset("nope", false).is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let o = Overrides {
            seed: Some(42),
            ..Overrides::default()
        };
        let spec = parse_config("preset = fig2\nk = 4\ntau = 6\n", &o).unwrap();
        let text = render_manifest(&spec, &[PathBuf::from("x/fig2.csv")], 0, 1.0);
        let mut again = parse_config(&text, &Overrides::default()).unwrap();
        again.name = spec.name.clone();
        assert_eq!(again, spec);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(1.0), "1.00000000000");
        assert_eq!(format_sig(1234.5), "1234.50000000");
        assert_eq!(format_sig(-0.000125), "-0.000125000000000");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn csv_layout() {
        let mut table = ResultTable::default();
        assert_eq!(render_csv(&table), format!("{CSV_HEADER}\n"));
        table.rows.push(ResultRow {
            sweep: 16.0,
            case: "pn0-0".into(),
            source: Source::MonteCarlo,
            rates: vec![0.5],
            sum_se: 0.5,
            ci_halfwidth: Some(vec![0.01]),
            sum_se_ci: Some(0.01),
        });
        let text = render_csv(&table);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].ends_with(",0.0100000000000"));
        assert!(!text.contains('\r'));
    }
}
