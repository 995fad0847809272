use super::linalg::{psd_factor, CMatrix, CVector};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

/// Immutable descriptor of an independent random stream.
///
/// A stream is addressed by a root seed and a path such as
/// `[trial, user]`; the generator seed is a pure function of both, so
/// parallel workers reproduce the same draws regardless of scheduling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngStream {
    root_seed: u64,
    path: Vec<u64>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(root_seed: u64) -> Self {
        RngStream {
            root_seed,
            path: Vec::new(),
        }
    }

    pub fn with_path(root_seed: u64, path: &[u64]) -> Self {
        RngStream {
            root_seed,
            path: path.to_vec(),
        }
    }

    /// Sub-stream obtained by appending `index` to the path.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        RngStream {
            root_seed: self.root_seed,
            path,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut state = self.root_seed ^ 0x6A09_E667_F3BC_C908;
        let mut h = splitmix64(&mut state);
        for (depth, &p) in self.path.iter().enumerate() {
            let mut s = p ^ (depth as u64 + 1).wrapping_mul(0xD6E8_FEB8_6659_FD93);
            h = splitmix64(&mut state) ^ h.rotate_left(17) ^ splitmix64(&mut s);
            state ^= h;
        }
        state ^= (self.path.len() as u64).wrapping_mul(0xA076_1D64_78BD_642F);
        let mut out = [0u8; 32];
        for chunk in out.chunks_exact_mut(8) {
            let word = splitmix64(&mut state) ^ h;
            chunk.copy_from_slice(&word.to_le_bytes());
            h = h.rotate_left(23).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
        out
    }

    pub fn rng(&self) -> ChaCha12Rng {
        ChaCha12Rng::from_seed(self.seed_bytes())
    }
}

/// One draw from `CN(0, 1)`: real and imaginary parts each `N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

pub fn standard_complex_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng))
}

/// Draws one `CN(0, C)` vector of length `n` from `stream`.
pub fn sample_circular_gaussian(stream: &RngStream, n: usize, covariance: &CMatrix) -> Result<CVector> {
    if covariance.nrows() != n || covariance.ncols() != n {
        return Err(Error::InvalidCovariance(format!(
            "expected {n}x{n}, got {}x{}",
            covariance.nrows(),
            covariance.ncols()
        )));
    }
    let factor = psd_factor(covariance)?;
    let mut rng = stream.rng();
    let u = standard_complex_vector(&mut rng, n);
    Ok(factor * u)
}
