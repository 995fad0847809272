//! Uplink pilot phase, joint channel/phase-noise LMMSE estimation and the
//! MSE-optimal aging operator.

use crate::channel::ChannelBlock;
use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigen, hermitian_solve, standard_complex_vector, CMatrix, CVector, Covariance, RngStream};
use crate::scenario::{CorrelationSet, SystemConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

/// Per-user estimates `ĝ_{k,0}` and their covariances `D_k`.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub g_hat: Vec<CVector>,
    pub d: Vec<Covariance>,
    pub p_p: f64,
}

/// The linear map `W = (I + (σ_b²/p_p) R⁻¹)⁻¹` together with `D = W R`.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    weights: Weights,
    d: Covariance,
}

#[derive(Debug, Clone)]
enum Weights {
    Scaled(f64),
    Dense(CMatrix),
}

impl LmmseFilter {
    pub fn new(cov: &Covariance, sigma_b2: f64, p_p: f64) -> Result<Self> {
        if !(sigma_b2 >= 0.0 && p_p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need sigma_b2 >= 0 and p_p > 0, got {sigma_b2} and {p_p}"
            )));
        }
        let c = sigma_b2 / p_p;
        match cov {
            Covariance::Scaled { dim, scale } => {
                if *scale <= 0.0 {
                    return Err(Error::SingularCorrelation("R_k = 0".into()));
                }
                let w = scale / (scale + c);
                Ok(LmmseFilter {
                    weights: Weights::Scaled(w),
                    d: Covariance::scaled(*dim, w * scale),
                })
            }
            Covariance::Dense { matrix, .. } => {
                let (values, _) = hermitian_eigen(matrix)?;
                let top = values.last().copied().unwrap_or(0.0);
                if values[0] <= 1e-12 * top.max(f64::MIN_POSITIVE) {
                    return Err(Error::SingularCorrelation(format!(
                        "R_k has smallest eigenvalue {:e}",
                        values[0]
                    )));
                }
                // (I + c R⁻¹) X = R  ⇔  (R + c I) X = R², and since R commutes with
                // (R + cI)⁻¹ the filter itself is W = (R + cI)⁻¹ R.
                let m = matrix.nrows();
                let shifted = matrix + CMatrix::identity(m, m) * Complex64::new(c, 0.0);
                let w = hermitian_solve(&shifted, matrix)?;
                let mut d = &w * matrix;
                for i in 0..m {
                    d[(i, i)].im = 0.0;
                    for j in (i + 1)..m {
                        let avg = 0.5 * (d[(i, j)] + d[(j, i)].conj());
                        d[(i, j)] = avg;
                        d[(j, i)] = avg.conj();
                    }
                }
                Ok(LmmseFilter {
                    weights: Weights::Dense(w),
                    d: Covariance::dense(d)?,
                })
            }
        }
    }

    pub fn apply(&self, obs: &CVector) -> CVector {
        match &self.weights {
            Weights::Scaled(w) => obs * Complex64::new(*w, 0.0),
            Weights::Dense(w) => w * obs,
        }
    }

    pub fn error_free_covariance(&self) -> &Covariance {
        &self.d
    }
}

/// Adds despread pilot noise `z̃/√p_p`, `z̃ ~ CN(0, σ_b² I)`, to each `g`.
pub fn observe_pilots<R: Rng + ?Sized>(g0: &[CVector], sigma_b2: f64, p_p: f64, rng: &mut R) -> Vec<CVector> {
    let std = (sigma_b2 / p_p).sqrt();
    g0.iter()
        .map(|g| {
            if std == 0.0 {
                g.clone()
            } else {
                g + standard_complex_vector(rng, g.len()) * Complex64::new(std, 0.0)
            }
        })
        .collect()
}

/// Despread pilot observations `ỹ_{k,0} = g_{k,0} + z̃/√p_p` for all users.
pub fn pilot_observe(cfg: &SystemConfig, block: &ChannelBlock, stream: &RngStream) -> Result<Vec<CVector>> {
    if cfg.tau < cfg.users {
        return Err(Error::PilotShortage {
            tau: cfg.tau,
            users: cfg.users,
        });
    }
    if block.users() != cfg.users || block.is_empty() {
        return Err(Error::DimensionMismatch("channel block does not match the config".into()));
    }
    let g0: Vec<CVector> = block.g.iter().map(|gk| gk[0].clone()).collect();
    let mut rng = stream.rng();
    Ok(observe_pilots(&g0, cfg.sigma_b2, cfg.pilot_power(), &mut rng))
}

/// LMMSE estimate of the effective channel from one observation.
pub fn lmmse_estimate(obs: &CVector, cov: &Covariance, sigma_b2: f64, p_p: f64) -> Result<(CVector, Covariance)> {
    if obs.len() != cov.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} entries, covariance is {}",
            obs.len(),
            cov.dim()
        )));
    }
    let filter = LmmseFilter::new(cov, sigma_b2, p_p)?;
    Ok((filter.apply(obs), filter.d))
}

/// Estimates every user's effective channel.
pub fn estimate_channels(cfg: &SystemConfig, corr: &CorrelationSet, observations: &[CVector]) -> Result<ChannelEstimate> {
    if observations.len() != corr.users() {
        return Err(Error::DimensionMismatch("one observation per user expected".into()));
    }
    let p_p = cfg.pilot_power();
    let mut g_hat = Vec::with_capacity(observations.len());
    let mut d = Vec::with_capacity(observations.len());
    for (k, obs) in observations.iter().enumerate() {
        let (gk, dk) = lmmse_estimate(obs, corr.get(k), cfg.sigma_b2, p_p)?;
        g_hat.push(gk);
        d.push(dk);
    }
    Ok(ChannelEstimate { g_hat, d, p_p })
}

/// Estimate covariances `D_k` for all users, without any observation.
pub fn estimate_covariances(cfg: &SystemConfig, corr: &CorrelationSet) -> Result<Vec<Covariance>> {
    let p_p = cfg.pilot_power();
    corr.iter()
        .map(|cov| LmmseFilter::new(cov, cfg.sigma_b2, p_p).map(|f| f.d))
        .collect()
}

/// `A_n = J₀(2π f_D T_s n) e^{−σ_ϕk² n/2} ΔΦ_n` for user k.
#[derive(Debug, Clone, PartialEq)]
pub struct AgingOperator {
    pub lag: usize,
    /// `ρ_n e^{−σ_ϕk² n/2}`.
    pub scalar_part: f64,
    /// `e^{−σ_φm² n/2}` per antenna.
    pub diag_part: Vec<f64>,
}

impl AgingOperator {
    /// Diagonal entries of `A_n`.
    pub fn entries(&self) -> Vec<f64> {
        self.diag_part.iter().map(|d| self.scalar_part * d).collect()
    }

    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.entries()))
    }

    /// `α_n` when `A_n = α_n I`.
    pub fn as_scalar(&self) -> Option<f64> {
        let first = *self.diag_part.first()?;
        self.diag_part
            .iter()
            .all(|&d| d == first)
            .then_some(self.scalar_part * first)
    }

    /// `A_n v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        CVector::from_fn(v.len(), |m, _| v[m] * (self.scalar_part * self.diag_part[m]))
    }
}

pub fn aging_operator(cfg: &SystemConfig, k: usize, lag: usize) -> AgingOperator {
    let n = lag as f64;
    let scalar_part = cfg.time_correlation(lag) * (-0.5 * cfg.user_phase_variance(k) * n).exp();
    let diag_part = cfg
        .bs_phase_variances()
        .iter()
        .map(|&v| (-0.5 * v * n).exp())
        .collect();
    AgingOperator {
        lag,
        scalar_part,
        diag_part,
    }
}

/// `tr E_{k,n}` for a real diagonal candidate `A`:
/// `tr[R + A R A − 2 ρ_n e^{−σ_ϕk² n/2} A R ΔΦ_n]`.
pub fn mse_of_operator(candidate: &[f64], cfg: &SystemConfig, r: &CMatrix, k: usize, lag: usize) -> f64 {
    let reference = aging_operator(cfg, k, lag);
    let m = r.nrows();
    (0..m)
        .map(|i| {
            let r_ii = r[(i, i)].re;
            let a = candidate[i];
            r_ii + a * a * r_ii - 2.0 * reference.scalar_part * a * r_ii * reference.diag_part[i]
        })
        .sum()
}
