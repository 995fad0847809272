//! Wiener phase noise at the base-station and user oscillators.

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::scenario::{LoTopology, SystemConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write;

/// Unwrapped phase trajectories over one coherence block, columns `0..=T_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    /// M × (T_c+1), radians.
    pub phi_bs: DMatrix<f64>,
    /// K × (T_c+1), radians.
    pub varphi_user: DMatrix<f64>,
    pub topology: LoTopology,
}

/// Phases at a single symbol, used to seed a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseColumn {
    pub bs: Vec<f64>,
    pub users: Vec<f64>,
}

/// Diagonal of `Θ_{k,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    pub diagonal: Vec<Complex64>,
}

impl PhaseMatrix {
    pub fn identity(antennas: usize) -> Self {
        PhaseMatrix {
            diagonal: vec![Complex64::new(1.0, 0.0); antennas],
        }
    }
}

// Always consumes one draw so that runs differing only in σ stay aligned.
fn gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    if std == 0.0 {
        0.0
    } else {
        std * z
    }
}

/// Simulates one block of Wiener phase noise. Without `initial`, every phase
/// starts at 0 at n = 0.
pub fn evolve_phase(cfg: &SystemConfig, stream: &RngStream, initial: Option<&PhaseColumn>) -> Result<PhaseState> {
    cfg.validate()?;
    let m = cfg.antennas;
    let k = cfg.users;
    let steps = cfg.coherence_symbols;
    if let Some(col) = initial {
        if col.bs.len() != m || col.users.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "initial column has {} BS and {} user phases, expected {m} and {k}",
                col.bs.len(),
                col.users.len()
            )));
        }
    }
    let bs_std: Vec<f64> = cfg.bs_phase_variances().iter().map(|v| v.sqrt()).collect();
    let mut phi = DMatrix::zeros(m, steps + 1);
    let mut varphi = DMatrix::zeros(k, steps + 1);
    if let Some(col) = initial {
        for (i, &p) in col.bs.iter().enumerate() {
            phi[(i, 0)] = p;
        }
        for (i, &p) in col.users.iter().enumerate() {
            varphi[(i, 0)] = p;
        }
    }

    let mut bs_rng = stream.child(0).rng();
    for n in 1..=steps {
        match cfg.lo_topology {
            LoTopology::Clo => {
                let delta = gaussian(&mut bs_rng, bs_std[0]);
                for i in 0..m {
                    phi[(i, n)] = phi[(i, n - 1)] + delta;
                }
            }
            LoTopology::Ilo | LoTopology::Slo => {
                for i in 0..m {
                    phi[(i, n)] = phi[(i, n - 1)] + gaussian(&mut bs_rng, bs_std[i]);
                }
            }
        }
    }
    for user in 0..k {
        let std = cfg.user_phase_variance(user).sqrt();
        let mut rng = stream.child(1).child(user as u64).rng();
        for n in 1..=steps {
            varphi[(user, n)] = varphi[(user, n - 1)] + gaussian(&mut rng, std);
        }
    }
    Ok(PhaseState {
        phi_bs: phi,
        varphi_user: varphi,
        topology: cfg.lo_topology,
    })
}

/// `Θ_{k,n} = diag(exp(j(φ_{m,n} + ϕ_{k,n})))`.
pub fn theta_matrix(state: &PhaseState, k: usize, n: usize) -> Result<PhaseMatrix> {
    if k >= state.varphi_user.nrows() {
        return Err(Error::IndexOutOfRange(format!("user {k} of {}", state.varphi_user.nrows())));
    }
    if n >= state.phi_bs.ncols() {
        return Err(Error::IndexOutOfRange(format!(
            "symbol {n} beyond block end {}",
            state.phi_bs.ncols() - 1
        )));
    }
    let user = state.varphi_user[(k, n)];
    Ok(PhaseMatrix {
        diagonal: (0..state.phi_bs.nrows())
            .map(|m| Complex64::from_polar(1.0, state.phi_bs[(m, n)] + user))
            .collect(),
    })
}

impl PhaseState {
    /// Writes `symbol,source,index,phase_rad` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "symbol,source,index,phase_rad")?;
        for n in 0..self.phi_bs.ncols() {
            for m in 0..self.phi_bs.nrows() {
                writeln!(out, "{n},bs,{m},{:.12e}", self.phi_bs[(m, n)])?;
            }
            for k in 0..self.varphi_user.nrows() {
                writeln!(out, "{n},user,{k},{:.12e}", self.varphi_user[(k, n)])?;
            }
        }
        Ok(())
    }
}

/// Phases sampled only at selected symbols.
///
/// The increments between consecutive requested times are drawn with
/// variance `σ² Δn`, which is the exact joint law of the Wiener process at
/// those times. Monte-Carlo runs use this to skip symbols they never read.
#[derive(Debug, Clone)]
pub struct PhaseSnapshots {
    times: Vec<usize>,
    shared_bs: bool,
    antennas: usize,
    bs: Vec<f64>,
    users: Vec<f64>,
    user_count: usize,
}

impl PhaseSnapshots {
    /// `times` must be strictly increasing; phases at time 0 are 0.
    pub fn sample<R: Rng + ?Sized>(cfg: &SystemConfig, times: &[usize], rng: &mut R) -> Self {
        let shared_bs = cfg.lo_topology == LoTopology::Clo;
        let m = cfg.antennas;
        let k = cfg.users;
        let bs_cols = if shared_bs { 1 } else { m };
        let bs_var = cfg.bs_phase_variances();
        let user_var: Vec<f64> = (0..k).map(|u| cfg.user_phase_variance(u)).collect();
        let mut bs = vec![0.0; times.len() * bs_cols];
        let mut users = vec![0.0; times.len() * k];
        let mut prev_time = 0usize;
        for (t, &time) in times.iter().enumerate() {
            let gap = (time - prev_time) as f64;
            for col in 0..bs_cols {
                let before = if t == 0 { 0.0 } else { bs[(t - 1) * bs_cols + col] };
                bs[t * bs_cols + col] = before + gaussian(rng, (bs_var[col] * gap).sqrt());
            }
            for u in 0..k {
                let before = if t == 0 { 0.0 } else { users[(t - 1) * k + u] };
                users[t * k + u] = before + gaussian(rng, (user_var[u] * gap).sqrt());
            }
            prev_time = time;
        }
        PhaseSnapshots {
            times: times.to_vec(),
            shared_bs,
            antennas: m,
            bs,
            users,
            user_count: k,
        }
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn bs_phase(&self, slot: usize, m: usize) -> f64 {
        if self.shared_bs {
            self.bs[slot]
        } else {
            self.bs[slot * self.antennas + m]
        }
    }

    pub fn user_phase(&self, slot: usize, k: usize) -> f64 {
        self.users[slot * self.user_count + k]
    }

    /// Diagonal of `Θ_{k,n}` at the `slot`-th requested time.
    pub fn theta(&self, slot: usize, k: usize) -> Vec<Complex64> {
        let user = self.user_phase(slot, k);
        (0..self.antennas)
            .map(|m| Complex64::from_polar(1.0, self.bs_phase(slot, m) + user))
            .collect()
    }
}
