//! Single-cell geometry, system parameters and per-user spatial covariances.

use crate::error::{Error, Result};
use crate::numerics::{bessel_j0, deg_to_rad_variance, CMatrix, Covariance, RngStream};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Local-oscillator arrangement at the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoTopology {
    /// One oscillator shared by all antennas.
    #[default]
    Clo,
    /// One oscillator per antenna, all with the same variance.
    Ilo,
    /// One oscillator per antenna, each with its own variance.
    Slo,
}

impl FromStr for LoTopology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CLO" => Ok(LoTopology::Clo),
            "ILO" => Ok(LoTopology::Ilo),
            "SLO" => Ok(LoTopology::Slo),
            other => Err(format!("unknown LO topology `{other}` (expected CLO, ILO or SLO)")),
        }
    }
}

impl fmt::Display for LoTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoTopology::Clo => "CLO",
            LoTopology::Ilo => "ILO",
            LoTopology::Slo => "SLO",
        })
    }
}

/// How the channel at symbol `n` is related to the channel at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AgingPath {
    /// First-order recursion with one-step correlation `J₀(2π f_D T_s)`;
    /// the lag-n correlation is its n-th power.
    RecursiveAr1,
    /// `(h_0, h_n)` drawn jointly with exact lag correlation `J₀(2π f_D T_s n)`.
    #[default]
    DirectJakesLag,
}

impl FromStr for AgingPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "recursivear1" | "ar1" => Ok(AgingPath::RecursiveAr1),
            "directjakeslag" | "jakes" => Ok(AgingPath::DirectJakesLag),
            other => Err(format!(
                "unknown aging path `{other}` (expected recursive_ar1 or direct_jakes_lag)"
            )),
        }
    }
}

impl fmt::Display for AgingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgingPath::RecursiveAr1 => "recursive_ar1",
            AgingPath::DirectJakesLag => "direct_jakes_lag",
        })
    }
}

/// Every scalar parameter of the link. Powers and noise variances are linear;
/// phase-noise magnitudes are per-symbol increment standard deviations in
/// degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub antennas: usize,
    pub users: usize,
    /// Pilot length in symbols.
    pub tau: usize,
    /// Coherence block length in symbols.
    pub coherence_symbols: usize,
    pub p_u: f64,
    pub p_d: f64,
    pub sigma_b2: f64,
    pub sigma_k2: f64,
    pub doppler_hz: f64,
    pub symbol_time_s: f64,
    pub carrier_hz: f64,
    pub lo_topology: LoTopology,
    /// One value for CLO/ILO, M values for SLO.
    pub sigma_phi_deg: Vec<f64>,
    /// One value (shared) or K values.
    pub sigma_varphi_deg: Vec<f64>,
    pub cell_radius_m: f64,
    pub guard_radius_m: f64,
    pub shadow_std_db: f64,
    pub path_loss_exp: f64,
    pub antenna_correlation: f64,
    pub aging_path: AgingPath,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            antennas: 64,
            users: 8,
            tau: 8,
            coherence_symbols: 500,
            p_u: 1.0,
            p_d: 1.0,
            sigma_b2: 1e-4,
            sigma_k2: 1e-4,
            doppler_hz: 250.0,
            symbol_time_s: 2.5e-8,
            carrier_hz: 2e9,
            lo_topology: LoTopology::Clo,
            sigma_phi_deg: vec![0.0],
            sigma_varphi_deg: vec![0.0],
            cell_radius_m: 1000.0,
            guard_radius_m: 100.0,
            shadow_std_db: 8.0,
            path_loss_exp: 3.8,
            antenna_correlation: 0.0,
            aging_path: AgingPath::DirectJakesLag,
        }
    }
}

fn positive(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and > 0, got {value}")))
    }
}

fn non_negative(key: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and >= 0, got {value}")))
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::config("m", "need at least one antenna"));
        }
        if self.users == 0 {
            return Err(Error::config("k", "need at least one user"));
        }
        if self.tau < self.users {
            return Err(Error::config(
                "tau",
                format!("pilot length {} is shorter than K = {}", self.tau, self.users),
            ));
        }
        if self.tau > self.coherence_symbols {
            return Err(Error::config(
                "tau",
                format!("pilot length {} exceeds T_c = {}", self.tau, self.coherence_symbols),
            ));
        }
        positive("p_u", self.p_u)?;
        positive("p_d", self.p_d)?;
        positive("sigma_b2", self.sigma_b2)?;
        positive("sigma_k2", self.sigma_k2)?;
        non_negative("f_d", self.doppler_hz)?;
        positive("t_s", self.symbol_time_s)?;
        positive("f_c", self.carrier_hz)?;
        positive("cell_radius", self.cell_radius_m)?;
        positive("guard_radius", self.guard_radius_m)?;
        if self.guard_radius_m >= self.cell_radius_m {
            return Err(Error::config("guard_radius", "must be smaller than cell_radius"));
        }
        non_negative("shadow_std_db", self.shadow_std_db)?;
        positive("path_loss_exp", self.path_loss_exp)?;
        if !(0.0..1.0).contains(&self.antenna_correlation) {
            return Err(Error::config("antenna_correlation", "must lie in [0, 1)"));
        }
        let expected_bs = match self.lo_topology {
            LoTopology::Clo | LoTopology::Ilo => 1,
            LoTopology::Slo => self.antennas,
        };
        if self.sigma_phi_deg.len() != expected_bs {
            return Err(Error::config(
                "sigma_phi_deg",
                format!(
                    "{} topology needs {} value(s), got {}",
                    self.lo_topology,
                    expected_bs,
                    self.sigma_phi_deg.len()
                ),
            ));
        }
        for &s in &self.sigma_phi_deg {
            non_negative("sigma_phi_deg", s)?;
        }
        if self.sigma_varphi_deg.len() != 1 && self.sigma_varphi_deg.len() != self.users {
            return Err(Error::config(
                "sigma_varphi_deg",
                format!("need 1 or K = {} values, got {}", self.users, self.sigma_varphi_deg.len()),
            ));
        }
        for &s in &self.sigma_varphi_deg {
            non_negative("sigma_varphi_deg", s)?;
        }
        Ok(())
    }

    /// Per-antenna BS phase increment variances in rad², length M.
    pub fn bs_phase_variances(&self) -> Vec<f64> {
        match self.lo_topology {
            LoTopology::Clo | LoTopology::Ilo => {
                let v = deg_to_rad_variance(self.sigma_phi_deg[0]).unwrap_or(0.0);
                vec![v; self.antennas]
            }
            LoTopology::Slo => self
                .sigma_phi_deg
                .iter()
                .map(|&s| deg_to_rad_variance(s).unwrap_or(0.0))
                .collect(),
        }
    }

    /// The single BS variance used by the closed forms, if all antennas share it.
    pub fn common_bs_phase_variance(&self) -> Option<f64> {
        let v = self.bs_phase_variances();
        let first = v[0];
        v.iter().all(|&x| x == first).then_some(first)
    }

    /// Phase increment variance of user `k` in rad².
    pub fn user_phase_variance(&self, k: usize) -> f64 {
        let s = if self.sigma_varphi_deg.len() == 1 {
            self.sigma_varphi_deg[0]
        } else {
            self.sigma_varphi_deg[k]
        };
        deg_to_rad_variance(s).unwrap_or(0.0)
    }

    /// Effective pilot power `p_p = τ p_u`.
    pub fn pilot_power(&self) -> f64 {
        self.tau as f64 * self.p_u
    }

    pub fn normalized_doppler(&self) -> f64 {
        self.doppler_hz * self.symbol_time_s
    }

    /// Jakes temporal correlation `J₀(2π f_D T_s n)` at lag `n`.
    pub fn time_correlation(&self, lag: usize) -> f64 {
        bessel_j0(2.0 * PI * self.normalized_doppler() * lag as f64).unwrap_or(0.0)
    }

    /// Absolute symbol times of the downlink data phase, `τ+1 ..= T_c`.
    pub fn data_symbols(&self) -> std::ops::RangeInclusive<usize> {
        (self.tau + 1)..=self.coherence_symbols
    }

    pub fn data_symbol_count(&self) -> usize {
        self.coherence_symbols - self.tau
    }
}

/// Positions, shadowing and large-scale gains of one user drop.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    pub radii_m: Vec<f64>,
    pub angles_rad: Vec<f64>,
    pub shadow: Vec<f64>,
    pub betas: Vec<f64>,
}

/// `β = z / (r / r_0)^υ`.
pub fn large_scale_gain(cfg: &SystemConfig, radius_m: f64, shadow: f64) -> f64 {
    shadow / (radius_m / cfg.guard_radius_m).powf(cfg.path_loss_exp)
}

impl UserDrop {
    /// Builds a drop from explicit radii and linear shadow factors.
    pub fn at_radii(cfg: &SystemConfig, radii_m: &[f64], shadow: &[f64]) -> Result<Self> {
        if radii_m.len() != shadow.len() {
            return Err(Error::DimensionMismatch("radii and shadow factors differ in length".into()));
        }
        let betas = radii_m
            .iter()
            .zip(shadow)
            .map(|(&r, &z)| large_scale_gain(cfg, r, z))
            .collect();
        Ok(UserDrop {
            radii_m: radii_m.to_vec(),
            angles_rad: vec![0.0; radii_m.len()],
            shadow: shadow.to_vec(),
            betas,
        })
    }
}

/// Places K users uniformly in area on the annulus `[r_0, R]` with lognormal
/// shadowing whose dB value is `N(0, shadow_std_db²)`.
pub fn drop_users(cfg: &SystemConfig, stream: &RngStream) -> Result<UserDrop> {
    cfg.validate()?;
    let mut rng = stream.rng();
    let shadow_db = Normal::new(0.0, cfg.shadow_std_db)
        .map_err(|e| Error::config("shadow_std_db", e.to_string()))?;
    let r0_sq = cfg.guard_radius_m * cfg.guard_radius_m;
    let span = cfg.cell_radius_m * cfg.cell_radius_m - r0_sq;
    let mut drop = UserDrop {
        radii_m: Vec::with_capacity(cfg.users),
        angles_rad: Vec::with_capacity(cfg.users),
        shadow: Vec::with_capacity(cfg.users),
        betas: Vec::with_capacity(cfg.users),
    };
    for _ in 0..cfg.users {
        let u: f64 = rng.random();
        let r = (r0_sq + u * span).sqrt();
        let angle = 2.0 * PI * rng.random::<f64>();
        let z = 10f64.powf(shadow_db.sample(&mut rng) / 10.0);
        drop.radii_m.push(r);
        drop.angles_rad.push(angle);
        drop.shadow.push(z);
        drop.betas.push(large_scale_gain(cfg, r, z));
    }
    Ok(drop)
}

/// Spatial covariances `R_k` (with Hermitian square roots) for all users.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSet {
    covs: Vec<Covariance>,
}

impl CorrelationSet {
    pub fn new(covs: Vec<Covariance>) -> Result<Self> {
        let dim = covs.first().map(Covariance::dim).unwrap_or(0);
        if covs.iter().any(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch("covariances differ in size".into()));
        }
        Ok(CorrelationSet { covs })
    }

    /// `R_k = β_k I_M` for every user.
    pub fn scalar(betas: &[f64], antennas: usize) -> Self {
        CorrelationSet {
            covs: betas.iter().map(|&b| Covariance::scaled(antennas, b)).collect(),
        }
    }

    /// Validates arbitrary Hermitian PSD matrices.
    pub fn from_matrices(matrices: Vec<CMatrix>) -> Result<Self> {
        let covs = matrices.into_iter().map(Covariance::dense).collect::<Result<Vec<_>>>()?;
        Self::new(covs)
    }

    pub fn users(&self) -> usize {
        self.covs.len()
    }

    pub fn antennas(&self) -> usize {
        self.covs.first().map(Covariance::dim).unwrap_or(0)
    }

    pub fn get(&self, k: usize) -> &Covariance {
        &self.covs[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Covariance> {
        self.covs.iter()
    }

    pub fn r(&self, k: usize) -> CMatrix {
        self.covs[k].to_dense()
    }

    pub fn sqrt_r(&self, k: usize) -> CMatrix {
        self.covs[k].sqrt_dense()
    }

    pub fn is_scalar(&self) -> bool {
        self.covs.iter().all(|c| c.as_scalar().is_some())
    }
}

/// Exponential-model correlation `C[i][j] = a^{|i-j|}`.
fn exponential_correlation(antennas: usize, a: f64) -> CMatrix {
    CMatrix::from_fn(antennas, antennas, |i, j| {
        Complex64::new(a.powi((i as i32 - j as i32).abs()), 0.0)
    })
}

/// `R_k = β_k I` without antenna correlation, `β_k C` with the exponential
/// model otherwise.
pub fn build_correlation(cfg: &SystemConfig, drop: &UserDrop) -> Result<CorrelationSet> {
    let a = cfg.antenna_correlation;
    if !(0.0..1.0).contains(&a) {
        return Err(Error::SingularCorrelation(format!(
            "antenna correlation {a} must lie in [0, 1)"
        )));
    }
    if drop.betas.len() != cfg.users {
        return Err(Error::DimensionMismatch(format!(
            "drop has {} users, config has {}",
            drop.betas.len(),
            cfg.users
        )));
    }
    if a == 0.0 {
        return Ok(CorrelationSet::scalar(&drop.betas, cfg.antennas));
    }
    let base = exponential_correlation(cfg.antennas, a);
    let base_cov = Covariance::dense(base.clone())?;
    let base_sqrt = base_cov.sqrt_dense();
    let covs = drop
        .betas
        .iter()
        .map(|&b| Covariance::Dense {
            matrix: &base * Complex64::new(b, 0.0),
            sqrt: &base_sqrt * Complex64::new(b.sqrt(), 0.0),
        })
        .collect();
    CorrelationSet::new(covs)
}
