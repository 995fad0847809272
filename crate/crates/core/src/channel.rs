//! Time-varying small-scale fading and the effective (phase-rotated) channel.

use crate::error::{Error, Result};
use crate::numerics::{sample_circular_gaussian, CMatrix, CVector, Covariance, RngStream};
use crate::phase_noise::{theta_matrix, PhaseState};
use crate::scenario::{AgingPath, CorrelationSet, SystemConfig};
use num_complex::Complex64;
use rand::Rng;

/// True channels `h[k][n]` and effective channels `g[k][n] = Θ_{k,n} h[k][n]`
/// for `n = 0..=T_c`.
#[derive(Debug, Clone)]
pub struct ChannelBlock {
    pub h: Vec<Vec<CVector>>,
    pub g: Vec<Vec<CVector>>,
    pub aging_path: AgingPath,
}

impl ChannelBlock {
    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn len(&self) -> usize {
        self.h.first().map(Vec::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws `ρ h_prev + √(1−ρ²) R^{1/2} w`; the innovation is skipped when `|ρ| = 1`.
pub fn correlated_step<R: Rng + ?Sized>(previous: &CVector, rho: f64, cov: &Covariance, rng: &mut R) -> CVector {
    let innovation = (1.0 - rho * rho).max(0.0).sqrt();
    let mut next = previous * Complex64::new(rho, 0.0);
    if innovation > 0.0 {
        next += cov.sample(rng) * Complex64::new(innovation, 0.0);
    }
    next
}

/// Correlation between `h_0` and `h_n` implied by the configured aging path.
pub fn lag_correlation(cfg: &SystemConfig, lag: usize) -> f64 {
    match cfg.aging_path {
        AgingPath::DirectJakesLag => cfg.time_correlation(lag),
        AgingPath::RecursiveAr1 => cfg.time_correlation(1).powi(lag as i32),
    }
}

fn apply_theta(theta: &[Complex64], h: &CVector) -> CVector {
    CVector::from_fn(h.len(), |m, _| theta[m] * h[m])
}

/// Generates one coherence block of channels for every user.
pub fn generate_block(
    cfg: &SystemConfig,
    corr: &CorrelationSet,
    phase: &PhaseState,
    stream: &RngStream,
) -> Result<ChannelBlock> {
    let steps = cfg.coherence_symbols;
    if corr.users() != cfg.users || corr.antennas() != cfg.antennas {
        return Err(Error::DimensionMismatch(format!(
            "correlation set is {} users x {} antennas, config is {} x {}",
            corr.users(),
            corr.antennas(),
            cfg.users,
            cfg.antennas
        )));
    }
    if phase.phi_bs.nrows() != cfg.antennas
        || phase.varphi_user.nrows() != cfg.users
        || phase.phi_bs.ncols() != steps + 1
    {
        return Err(Error::DimensionMismatch("phase state does not match the config".into()));
    }
    let rho_one = cfg.time_correlation(1);
    let mut h = Vec::with_capacity(cfg.users);
    let mut g = Vec::with_capacity(cfg.users);
    for k in 0..cfg.users {
        let cov = corr.get(k);
        let mut rng = stream.child(k as u64).rng();
        let mut hk = Vec::with_capacity(steps + 1);
        hk.push(cov.sample(&mut rng));
        for n in 1..=steps {
            let next = match cfg.aging_path {
                AgingPath::RecursiveAr1 => correlated_step(&hk[n - 1], rho_one, cov, &mut rng),
                AgingPath::DirectJakesLag => correlated_step(&hk[0], cfg.time_correlation(n), cov, &mut rng),
            };
            hk.push(next);
        }
        let gk = hk
            .iter()
            .enumerate()
            .map(|(n, hn)| Ok(apply_theta(&theta_matrix(phase, k, n)?.diagonal, hn)))
            .collect::<Result<Vec<_>>>()?;
        h.push(hk);
        g.push(gk);
    }
    Ok(ChannelBlock {
        h,
        g,
        aging_path: cfg.aging_path,
    })
}

/// Statistical-model alternative to symbol-wise evolution:
/// `A g0 + e` with `e ~ CN(0, R − A R Aᴴ)` and `A` real diagonal.
pub fn aged_channel_direct(g0: &CVector, aging_diag: &[f64], r: &CMatrix, stream: &RngStream) -> Result<CVector> {
    let m = g0.len();
    if aging_diag.len() != m || r.nrows() != m || r.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "channel has {m} entries, operator {} and covariance {}x{}",
            aging_diag.len(),
            r.nrows(),
            r.ncols()
        )));
    }
    let innovation_cov = CMatrix::from_fn(m, m, |i, j| r[(i, j)] * (1.0 - aging_diag[i] * aging_diag[j]));
    let e = match sample_circular_gaussian(stream, m, &innovation_cov) {
        Ok(e) => e,
        Err(Error::InvalidCovariance(_)) => return Err(Error::InvalidAgingOperator),
        Err(other) => return Err(other),
    };
    Ok(CVector::from_fn(m, |i, _| g0[i] * aging_diag[i] + e[i]))
}
