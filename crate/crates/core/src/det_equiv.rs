//! Large-system deterministic equivalents of the normalization, the SINR
//! and the rate, and the power-scaling expressions.

use crate::downlink::{rates_from_entries, SinrEntry, SinrReport, Source, SymbolPlan};
use crate::error::{Error, Result};
use crate::estimation::estimate_covariances;
use crate::numerics::{CMatrix, Covariance};
use crate::scenario::{CorrelationSet, SystemConfig};

/// Lag-independent traces of one `(R, D)` configuration.
///
/// Every deterministic-equivalent quantity at lag `n` is a scalar
/// combination of these once `A_n = α_k(n) I`.
#[derive(Debug, Clone)]
pub struct DeKernel {
    pub antennas: usize,
    /// `tr D_k`.
    pub tr_d: Vec<f64>,
    /// `tr D_k R_k`.
    pub tr_dr_own: Vec<f64>,
    /// `tr D_k²`.
    pub tr_d2: Vec<f64>,
    /// `tr_dr[i][k] = tr D_i R_k`.
    pub tr_dr: Vec<Vec<f64>>,
}

/// `tr(A B)` for Hermitian `A`, `B` in `O(M²)`.
fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

fn trace_pair(a: &Covariance, b: &Covariance) -> f64 {
    match (a.as_scalar(), b.as_scalar()) {
        (Some(x), Some(y)) => x * y * a.dim() as f64,
        (Some(x), None) => x * b.trace(),
        (None, Some(y)) => y * a.trace(),
        (None, None) => trace_product(&a.to_dense(), &b.to_dense()),
    }
}

impl DeKernel {
    pub fn new(corr: &CorrelationSet, d: &[Covariance]) -> Result<Self> {
        let k = corr.users();
        if d.len() != k || d.iter().any(|x| x.dim() != corr.antennas()) {
            return Err(Error::DimensionMismatch("one M x M estimate covariance per user expected".into()));
        }
        let tr_d = d.iter().map(Covariance::trace).collect();
        let tr_dr_own = (0..k).map(|u| trace_pair(&d[u], corr.get(u))).collect();
        let tr_d2 = d.iter().map(|x| trace_pair(x, x)).collect();
        let tr_dr = (0..k)
            .map(|i| (0..k).map(|u| trace_pair(&d[i], corr.get(u))).collect())
            .collect();
        Ok(DeKernel {
            antennas: corr.antennas(),
            tr_d,
            tr_dr_own,
            tr_d2,
            tr_dr,
        })
    }

    pub fn from_config(cfg: &SystemConfig, corr: &CorrelationSet) -> Result<Self> {
        Self::new(corr, &estimate_covariances(cfg, corr)?)
    }
}

/// The `δ` terms and `λ̄` at one lag.
#[derive(Debug, Clone, PartialEq)]
pub struct DeTerms {
    pub lambda_bar: f64,
    /// `δ_k = (1/M) tr A_n² D_k`.
    pub delta: Vec<f64>,
    /// `δ'_k = (1/M) tr A_n² D_k (R_k − A_n² D_k)`.
    pub delta_prime: Vec<f64>,
    /// `delta_double_prime[i][k] = (1/M) tr A_n² D_i R_k`.
    pub delta_double_prime: Vec<Vec<f64>>,
    /// `e^{−2(σ_ϕk² + σ_φ²) n}`.
    pub phase_decay: Vec<f64>,
    pub antennas: usize,
}

const ALPHA_FLOOR: f64 = 1e-12;

/// `α_k(n)` of the scalar aging operator, or an error when the BS
/// oscillators do not share one variance.
fn scalar_aging(cfg: &SystemConfig, k: usize, n: usize) -> Result<(f64, f64)> {
    let bs = cfg.common_bs_phase_variance().ok_or(Error::HeterogeneousBsVariance)?;
    let s = bs + cfg.user_phase_variance(k);
    let nf = n as f64;
    let mut alpha = cfg.time_correlation(n) * (-0.5 * s * nf).exp();
    // Below the accuracy of J₀ the operator is indistinguishable from zero.
    if alpha.abs() < ALPHA_FLOOR {
        alpha = 0.0;
    }
    Ok((alpha, (-2.0 * s * nf).exp()))
}

pub fn de_terms_from_kernel(cfg: &SystemConfig, kernel: &DeKernel, n: usize) -> Result<DeTerms> {
    let k = kernel.tr_d.len();
    let m = kernel.antennas as f64;
    let mut alpha2 = Vec::with_capacity(k);
    let mut phase_decay = Vec::with_capacity(k);
    for u in 0..k {
        let (a, decay) = scalar_aging(cfg, u, n)?;
        alpha2.push(a * a);
        phase_decay.push(decay);
    }
    let delta: Vec<f64> = (0..k).map(|u| alpha2[u] * kernel.tr_d[u] / m).collect();
    let delta_prime = (0..k)
        .map(|u| alpha2[u] * (kernel.tr_dr_own[u] - alpha2[u] * kernel.tr_d2[u]) / m)
        .collect();
    let delta_double_prime = (0..k)
        .map(|i| (0..k).map(|u| alpha2[i] * kernel.tr_dr[i][u] / m).collect())
        .collect();
    let mean_delta = delta.iter().sum::<f64>() / k as f64;
    if !(mean_delta > 0.0) {
        return Err(Error::ZeroEffectiveChannel);
    }
    Ok(DeTerms {
        lambda_bar: 1.0 / mean_delta,
        delta,
        delta_prime,
        delta_double_prime,
        phase_decay,
        antennas: kernel.antennas,
    })
}

/// `δ` terms at lag `n` from the estimate covariances `d`.
pub fn de_terms(cfg: &SystemConfig, corr: &CorrelationSet, d: &[Covariance], n: usize) -> Result<DeTerms> {
    de_terms_from_kernel(cfg, &DeKernel::new(corr, d)?, n)
}

/// Signal and interference terms of the closed-form SINR for user `k`.
pub fn de_entry(terms: &DeTerms, cfg: &SystemConfig, k: usize, n: usize) -> Result<SinrEntry> {
    let m = terms.antennas as f64;
    let signal = terms.phase_decay[k] * terms.delta[k] * terms.delta[k];
    let bf = terms.delta_prime[k] / m;
    let noise = cfg.sigma_k2 / (cfg.p_d * terms.lambda_bar * m);
    let cross: f64 = (0..terms.delta.len())
        .filter(|&i| i != k)
        .map(|i| terms.delta_double_prime[i][k] / m)
        .sum();
    if bf + cross + noise <= 0.0 {
        return Err(Error::ZeroDenominator(k));
    }
    Ok(SinrEntry::new(k, n, signal, bf, cross, noise))
}

/// `γ̄_{k,n}`.
pub fn de_sinr(terms: &DeTerms, cfg: &SystemConfig, k: usize, n: usize) -> Result<f64> {
    Ok(de_entry(terms, cfg, k, n)?.sinr)
}

/// Deterministic-equivalent rates over the symbols of `plan`.
pub fn de_rate_with_kernel(cfg: &SystemConfig, kernel: &DeKernel, plan: &SymbolPlan) -> Result<SinrReport> {
    let k = kernel.tr_d.len();
    let mut entries = Vec::with_capacity(plan.len() * k);
    for &n in &plan.times {
        let terms = de_terms_from_kernel(cfg, kernel, n)?;
        for u in 0..k {
            entries.push(de_entry(&terms, cfg, u, n)?);
        }
    }
    let rates = rates_from_entries(&entries, k, plan, cfg.coherence_symbols);
    Ok(SinrReport {
        source: Source::DeterministicEquivalent,
        plan: plan.clone(),
        coherence_symbols: cfg.coherence_symbols,
        entries,
        rates,
        rate_ci: None,
        sum_se_ci: None,
    })
}

/// Deterministic-equivalent rate of every user over all data symbols.
pub fn de_rate(cfg: &SystemConfig, corr: &CorrelationSet, d: &[Covariance]) -> Result<SinrReport> {
    de_rate_with_kernel(cfg, &DeKernel::new(corr, d)?, &SymbolPlan::full(cfg))
}

/// Closed-form SINR under power scaling `p_u ∝ 1/√M`, `p_d = E_d/M^q`,
/// using the low-pilot-SNR form `D_k ≈ (p_p/σ²) R_k²`.
///
/// For `q = 1/2` this is the M-independent limit, which carries `τ²`;
/// other `q` use the general form with a single `τ`. The two agree only
/// for `τ = 1`. Valid when `p_p · λ_max(R_k) / σ_b² ≪ 1`.
#[allow(clippy::too_many_arguments)]
pub fn power_scaling_sinr(
    cfg: &SystemConfig,
    corr: &CorrelationSet,
    k: usize,
    n: usize,
    q: f64,
    e_u: f64,
    e_d: f64,
    m: usize,
) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("scaling exponent q must be > 0, got {q}")));
    }
    if k >= corr.users() || m >= corr.antennas() {
        return Err(Error::IndexOutOfRange(format!(
            "user {k} / antenna {m} outside {} users x {} antennas",
            corr.users(),
            corr.antennas()
        )));
    }
    let bs = cfg.common_bs_phase_variance().ok_or(Error::HeterogeneousBsVariance)?;
    let s = bs + cfg.user_phase_variance(k);
    let nf = n as f64;
    let rho = cfg.time_correlation(n);
    let r = corr.r(k);
    let r2_mm: f64 = (0..r.nrows()).map(|j| r[(m, j)].norm_sqr()).sum();
    let sigma4 = cfg.sigma_k2 * cfg.sigma_k2;
    let tau = cfg.tau as f64;
    let common = e_d * e_u / sigma4 * rho * rho * (-3.0 * s * nf).exp() * r2_mm;
    if q == 0.5 {
        Ok(tau * tau * common)
    } else {
        let big_m = cfg.antennas as f64;
        Ok(tau * common / big_m.powf(2.0 * q - 1.0))
    }
}
