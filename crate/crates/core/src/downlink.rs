//! MRT precoding, power normalization and Monte-Carlo evaluation of the
//! hardening-bound SINR and achievable rate.

use crate::channel::lag_correlation;
use crate::error::{Error, Result};
use crate::estimation::{aging_operator, observe_pilots, AgingOperator, ChannelEstimate, LmmseFilter};
use crate::numerics::{standard_complex_vector, CMatrix, CVector, RngStream};
use crate::phase_noise::PhaseSnapshots;
use crate::scenario::{CorrelationSet, SystemConfig};
use num_complex::Complex64;
use rayon::prelude::*;

/// Largest number of trial groups used for parallel accumulation and the
/// jackknife confidence interval.
pub const MAX_GROUPS: usize = 100;

/// `z` quantile for a two-sided 95% interval.
const Z_95: f64 = 1.959963984540054;

/// Precoding matrix with its normalization `λ = K / E[tr F Fᴴ]`.
#[derive(Debug, Clone)]
pub struct Precoder {
    pub f: CMatrix,
    pub lambda: f64,
}

impl Precoder {
    /// `(1/K) tr(λ F Fᴴ)` for this realization.
    pub fn normalized_power(&self) -> f64 {
        let k = self.f.ncols() as f64;
        self.lambda * self.f.norm_squared() / k
    }
}

/// MRT precoder `F[:, k] = A_n(k) ĝ_{k,0}`.
///
/// With `lambda = None` the normalization is taken from this realization
/// alone; pass an ensemble value to use the expectation form.
pub fn mrt_precoder(estimate: &ChannelEstimate, aging: &[AgingOperator], lambda: Option<f64>) -> Result<Precoder> {
    let k = estimate.g_hat.len();
    if aging.len() != k || k == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates but {} aging operators",
            k,
            aging.len()
        )));
    }
    let m = estimate.g_hat[0].len();
    let mut f = CMatrix::zeros(m, k);
    for (i, (g, a)) in estimate.g_hat.iter().zip(aging).enumerate() {
        if g.len() != m || a.diag_part.len() != m {
            return Err(Error::DimensionMismatch("estimate and operator lengths differ".into()));
        }
        f.set_column(i, &a.apply(g));
    }
    let lambda = match lambda {
        Some(l) => l,
        None => {
            let power = f.norm_squared();
            if power == 0.0 {
                return Err(Error::ZeroEffectiveChannel);
            }
            k as f64 / power
        }
    };
    Ok(Precoder { f, lambda })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    DeterministicEquivalent,
    MonteCarlo,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::MonteCarlo => "MC",
            Source::DeterministicEquivalent => "DE",
        }
    }
}

/// Signal and interference terms of user `k` at symbol `n`, all scaled by `1/M²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrEntry {
    pub user: usize,
    pub n: usize,
    pub signal: f64,
    pub bf_variance: f64,
    pub cross_user: f64,
    pub noise: f64,
    pub sinr: f64,
}

impl SinrEntry {
    pub fn new(user: usize, n: usize, signal: f64, bf_variance: f64, cross_user: f64, noise: f64) -> Self {
        let denom = bf_variance + cross_user + noise;
        SinrEntry {
            user,
            n,
            signal,
            bf_variance,
            cross_user,
            noise,
            sinr: signal / denom,
        }
    }

    pub fn interference(&self) -> f64 {
        self.bf_variance + self.cross_user + self.noise
    }
}

/// Data symbols to evaluate and the number of symbols each one stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPlan {
    pub times: Vec<usize>,
    pub weights: Vec<f64>,
}

impl SymbolPlan {
    /// Every data symbol `τ+1 ..= T_c` with unit weight.
    pub fn full(cfg: &SystemConfig) -> Self {
        Self::strided(cfg, 1)
    }

    /// Every `stride`-th data symbol; each evaluated symbol represents the
    /// block of `stride` symbols starting at it.
    pub fn strided(cfg: &SystemConfig, stride: usize) -> Self {
        let stride = stride.max(1);
        let end = cfg.coherence_symbols;
        let mut times = Vec::new();
        let mut weights = Vec::new();
        let mut n = cfg.tau + 1;
        while n <= end {
            times.push(n);
            weights.push((stride.min(end + 1 - n)) as f64);
            n += stride;
        }
        SymbolPlan { times, weights }
    }

    /// A single symbol `n` standing in for the whole data phase.
    pub fn single(cfg: &SystemConfig, n: usize) -> Self {
        SymbolPlan {
            times: vec![n],
            weights: vec![cfg.data_symbol_count() as f64],
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Per-symbol SINR terms and the resulting rates.
#[derive(Debug, Clone)]
pub struct SinrReport {
    pub source: Source,
    pub plan: SymbolPlan,
    pub coherence_symbols: usize,
    /// `entries[slot * K + k]`.
    pub entries: Vec<SinrEntry>,
    pub rates: Vec<f64>,
    /// 95% half-widths of `rates` (Monte-Carlo only).
    pub rate_ci: Option<Vec<f64>>,
    pub sum_se_ci: Option<f64>,
}

impl SinrReport {
    pub fn users(&self) -> usize {
        self.rates.len()
    }

    pub fn entry(&self, slot: usize, k: usize) -> &SinrEntry {
        &self.entries[slot * self.users() + k]
    }

    pub fn sum_se(&self) -> f64 {
        sum_spectral_efficiency(self)
    }
}

/// `R_k = (1/T_c) Σ_n w_n log₂(1 + γ_{k,n})`.
pub fn rate_from_sinr(sinr: &[f64], weights: &[f64], coherence_symbols: usize) -> f64 {
    let total: f64 = sinr
        .iter()
        .zip(weights)
        .map(|(g, w)| w * (1.0 + g).log2())
        .sum();
    total / coherence_symbols as f64
}

pub fn sum_spectral_efficiency(report: &SinrReport) -> f64 {
    report.rates.iter().sum()
}

pub(crate) fn rates_from_entries(entries: &[SinrEntry], users: usize, plan: &SymbolPlan, coherence_symbols: usize) -> Vec<f64> {
    (0..users)
        .map(|k| {
            let sinr: Vec<f64> = (0..plan.len()).map(|s| entries[s * users + k].sinr).collect();
            rate_from_sinr(&sinr, &plan.weights, coherence_symbols)
        })
        .collect()
}

/// Sums of `|ĝ_{i,m}|²` over trials, used for `λ`.
#[derive(Debug, Clone)]
struct PowerAcc {
    trials: usize,
    power: Vec<f64>,
}

impl PowerAcc {
    fn new(len: usize) -> Self {
        PowerAcc {
            trials: 0,
            power: vec![0.0; len],
        }
    }

    fn add(&mut self, other: &PowerAcc) {
        self.trials += other.trials;
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a += b;
        }
    }

    fn sub(&mut self, other: &PowerAcc) {
        self.trials -= other.trials;
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a -= b;
        }
    }
}

/// Per (slot, user) sums of the own gain, its square and the cross-gain power.
#[derive(Debug, Clone)]
struct GainAcc {
    trials: usize,
    own: Vec<Complex64>,
    own_sq: Vec<f64>,
    cross_sq: Vec<f64>,
}

impl GainAcc {
    fn new(len: usize) -> Self {
        GainAcc {
            trials: 0,
            own: vec![Complex64::new(0.0, 0.0); len],
            own_sq: vec![0.0; len],
            cross_sq: vec![0.0; len],
        }
    }

    fn add(&mut self, other: &GainAcc) {
        self.trials += other.trials;
        for i in 0..self.own.len() {
            self.own[i] += other.own[i];
            self.own_sq[i] += other.own_sq[i];
            self.cross_sq[i] += other.cross_sq[i];
        }
    }

    fn sub(&mut self, other: &GainAcc) {
        self.trials -= other.trials;
        for i in 0..self.own.len() {
            self.own[i] -= other.own[i];
            self.own_sq[i] -= other.own_sq[i];
            self.cross_sq[i] -= other.cross_sq[i];
        }
    }
}

/// Contiguous trial ranges; the partition depends only on `trials`.
fn trial_groups(trials: usize) -> Vec<std::ops::Range<usize>> {
    let groups = trials.min(MAX_GROUPS);
    (0..groups)
        .map(|g| (g * trials / groups)..((g + 1) * trials / groups))
        .collect()
}

struct Engine<'a> {
    cfg: &'a SystemConfig,
    corr: &'a CorrelationSet,
    filters: Vec<LmmseFilter>,
    plan: &'a SymbolPlan,
    aging: Vec<Vec<AgingOperator>>,
    rho: Vec<f64>,
    stream: RngStream,
}

impl Engine<'_> {
    fn estimates(&self, rng: &mut rand_chacha::ChaCha12Rng) -> (Vec<CVector>, Vec<CVector>) {
        let h0: Vec<CVector> = self.corr.iter().map(|c| c.sample(rng)).collect();
        let obs = observe_pilots(&h0, self.cfg.sigma_b2, self.cfg.pilot_power(), rng);
        let g_hat = obs.iter().zip(&self.filters).map(|(y, f)| f.apply(y)).collect();
        (h0, g_hat)
    }

    fn power_pass(&self, range: std::ops::Range<usize>) -> PowerAcc {
        let (m, k) = (self.cfg.antennas, self.cfg.users);
        let mut acc = PowerAcc::new(m * k);
        let stream = self.stream.child(1);
        for t in range {
            let mut rng = stream.child(t as u64).rng();
            let (_, g_hat) = self.estimates(&mut rng);
            for (i, g) in g_hat.iter().enumerate() {
                for (mm, z) in g.iter().enumerate() {
                    acc.power[i * m + mm] += z.norm_sqr();
                }
            }
            acc.trials += 1;
        }
        acc
    }

    fn gain_pass(&self, range: std::ops::Range<usize>) -> GainAcc {
        let (m, k) = (self.cfg.antennas, self.cfg.users);
        let mut acc = GainAcc::new(self.plan.len() * k);
        let stream = self.stream.child(0);
        let mut v = vec![Complex64::new(0.0, 0.0); k * m];
        let mut f = vec![Complex64::new(0.0, 0.0); k * m];
        for t in range {
            let mut rng = stream.child(t as u64).rng();
            let (h0, g_hat) = self.estimates(&mut rng);
            let phases = PhaseSnapshots::sample(self.cfg, &self.plan.times, &mut rng);
            for slot in 0..self.plan.len() {
                let rho = self.rho[slot];
                let innovation = (1.0 - rho * rho).max(0.0).sqrt();
                for user in 0..k {
                    // v = conj(Θ) h, so that hᴴ Θ f = vᴴ f.
                    let theta = phases.theta(slot, user);
                    let mut h = &h0[user] * Complex64::new(rho, 0.0);
                    if innovation > 0.0 {
                        let w = standard_complex_vector(&mut rng, m);
                        h += self.corr.get(user).apply_sqrt(&w) * Complex64::new(innovation, 0.0);
                    }
                    let a = &self.aging[slot][user];
                    for mm in 0..m {
                        v[user * m + mm] = theta[mm].conj() * h[mm];
                        f[user * m + mm] = g_hat[user][mm] * (a.scalar_part * a.diag_part[mm]);
                    }
                }
                for user in 0..k {
                    let vk = &v[user * m..(user + 1) * m];
                    let mut cross = 0.0;
                    for i in 0..k {
                        let fi = &f[i * m..(i + 1) * m];
                        let gain: Complex64 = vk.iter().zip(fi).map(|(a, b)| a.conj() * b).sum();
                        if i == user {
                            acc.own[slot * k + user] += gain;
                            acc.own_sq[slot * k + user] += gain.norm_sqr();
                        } else {
                            cross += gain.norm_sqr();
                        }
                    }
                    acc.cross_sq[slot * k + user] += cross;
                }
            }
            acc.trials += 1;
        }
        acc
    }

    fn lambdas(&self, power: &PowerAcc) -> Result<Vec<f64>> {
        let (m, k) = (self.cfg.antennas, self.cfg.users);
        let trials = power.trials as f64;
        self.aging
            .iter()
            .map(|ops| {
                let mut total = 0.0;
                for (i, a) in ops.iter().enumerate() {
                    for mm in 0..m {
                        let e = a.scalar_part * a.diag_part[mm];
                        total += e * e * power.power[i * m + mm] / trials;
                    }
                }
                if total > 0.0 {
                    Ok(k as f64 / total)
                } else {
                    Err(Error::ZeroEffectiveChannel)
                }
            })
            .collect()
    }

    fn entries(&self, power: &PowerAcc, gains: &GainAcc) -> Result<Vec<SinrEntry>> {
        let k = self.cfg.users;
        let m2 = (self.cfg.antennas * self.cfg.antennas) as f64;
        let lambdas = self.lambdas(power)?;
        let trials = gains.trials as f64;
        let noise = self.cfg.sigma_k2 / (self.cfg.p_d * m2);
        let mut out = Vec::with_capacity(self.plan.len() * k);
        for (slot, &n) in self.plan.times.iter().enumerate() {
            let scale = lambdas[slot] / m2;
            for user in 0..k {
                let idx = slot * k + user;
                let mean = gains.own[idx] / trials;
                let second = gains.own_sq[idx] / trials;
                let variance = (second - mean.norm_sqr()).max(0.0);
                out.push(SinrEntry::new(
                    user,
                    n,
                    scale * mean.norm_sqr(),
                    scale * variance,
                    scale * gains.cross_sq[idx] / trials,
                    noise,
                ));
            }
        }
        Ok(out)
    }
}

/// Monte-Carlo hardening-bound SINR over `trials` independent coherence
/// blocks, evaluated at the symbols of `plan`.
///
/// Results depend only on `(cfg, corr, plan, trials, seed)`: trials are
/// split into a fixed set of contiguous groups whose sums are combined in
/// group order, whatever the thread count.
pub fn hardening_sinr_mc(
    cfg: &SystemConfig,
    corr: &CorrelationSet,
    plan: &SymbolPlan,
    trials: usize,
    seed: u64,
) -> Result<SinrReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    cfg.validate()?;
    if corr.users() != cfg.users || corr.antennas() != cfg.antennas {
        return Err(Error::DimensionMismatch("correlation set does not match the config".into()));
    }
    if plan.is_empty() {
        return Err(Error::InvalidArgument("no data symbols to evaluate".into()));
    }
    let filters = corr
        .iter()
        .map(|c| LmmseFilter::new(c, cfg.sigma_b2, cfg.pilot_power()))
        .collect::<Result<Vec<_>>>()?;
    let aging = plan
        .times
        .iter()
        .map(|&n| (0..cfg.users).map(|k| aging_operator(cfg, k, n)).collect())
        .collect();
    let rho = plan.times.iter().map(|&n| lag_correlation(cfg, n)).collect();
    let engine = Engine {
        cfg,
        corr,
        filters,
        plan,
        aging,
        rho,
        stream: RngStream::new(seed),
    };

    let groups = trial_groups(trials);
    let parts: Vec<(PowerAcc, GainAcc)> = groups
        .par_iter()
        .map(|r| (engine.power_pass(r.clone()), engine.gain_pass(r.clone())))
        .collect();
    let k = cfg.users;
    let mut power = PowerAcc::new(cfg.antennas * k);
    let mut gains = GainAcc::new(plan.len() * k);
    for (p, g) in &parts {
        power.add(p);
        gains.add(g);
    }
    let entries = engine.entries(&power, &gains)?;
    let rates = rates_from_entries(&entries, k, plan, cfg.coherence_symbols);

    // Grouped delete-one jackknife.
    let g = parts.len() as f64;
    let leave_out: Vec<Vec<f64>> = parts
        .iter()
        .map(|(p, gg)| {
            let mut pw = power.clone();
            pw.sub(p);
            let mut ga = gains.clone();
            ga.sub(gg);
            let e = engine.entries(&pw, &ga)?;
            Ok(rates_from_entries(&e, k, plan, cfg.coherence_symbols))
        })
        .collect::<Result<_>>()?;
    let half_width = |values: &[f64]| {
        let mean = values.iter().sum::<f64>() / g;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Z_95 * ((g - 1.0) / g * ss).sqrt()
    };
    let rate_ci = (0..k)
        .map(|user| half_width(&leave_out.iter().map(|r| r[user]).collect::<Vec<_>>()))
        .collect();
    let sum_se_ci = half_width(&leave_out.iter().map(|r| r.iter().sum()).collect::<Vec<_>>());

    Ok(SinrReport {
        source: Source::MonteCarlo,
        plan: plan.clone(),
        coherence_symbols: cfg.coherence_symbols,
        entries,
        rates,
        rate_ci: Some(rate_ci),
        sum_se_ci: Some(sum_se_ci),
    })
}

/// Sample mean of `(1/K) tr(λ F Fᴴ)` over fresh trials, with `λ` taken
/// from a Monte-Carlo report's pre-pass.
pub fn mean_transmit_power(cfg: &SystemConfig, corr: &CorrelationSet, n: usize, lambda: f64, trials: usize, seed: u64) -> Result<f64> {
    let filters = corr
        .iter()
        .map(|c| LmmseFilter::new(c, cfg.sigma_b2, cfg.pilot_power()))
        .collect::<Result<Vec<_>>>()?;
    let aging: Vec<AgingOperator> = (0..cfg.users).map(|k| aging_operator(cfg, k, n)).collect();
    let stream = RngStream::new(seed);
    let mut total = 0.0;
    for t in 0..trials {
        let mut rng = stream.child(t as u64).rng();
        let h0: Vec<CVector> = corr.iter().map(|c| c.sample(&mut rng)).collect();
        let obs = observe_pilots(&h0, cfg.sigma_b2, cfg.pilot_power(), &mut rng);
        let estimate = ChannelEstimate {
            g_hat: obs.iter().zip(&filters).map(|(y, f)| f.apply(y)).collect(),
            d: filters.iter().map(|f| f.error_free_covariance().clone()).collect(),
            p_p: cfg.pilot_power(),
        };
        total += mrt_precoder(&estimate, &aging, Some(lambda))?.normalized_power();
    }
    Ok(total / trials as f64)
}

/// Ensemble `λ` at symbol `n` estimated from `trials` pilot rounds.
pub fn estimate_lambda(cfg: &SystemConfig, corr: &CorrelationSet, n: usize, trials: usize, seed: u64) -> Result<f64> {
    let plan = SymbolPlan {
        times: vec![n],
        weights: vec![1.0],
    };
    let engine = Engine {
        cfg,
        corr,
        filters: corr
            .iter()
            .map(|c| LmmseFilter::new(c, cfg.sigma_b2, cfg.pilot_power()))
            .collect::<Result<Vec<_>>>()?,
        plan: &plan,
        aging: vec![(0..cfg.users).map(|k| aging_operator(cfg, k, n)).collect()],
        rho: vec![lag_correlation(cfg, n)],
        stream: RngStream::new(seed),
    };
    let acc = engine.power_pass(0..trials);
    Ok(engine.lambdas(&acc)?[0])
}
