//! Numerical building blocks shared by every other module: complex linear
//! algebra kernels, reproducible random streams, Bessel J₀ and unit helpers.

mod bessel;
mod linalg;
mod rng;

pub use bessel::bessel_j0;
pub use linalg::{
    hermitian_eigen, hermitian_solve, hermitian_sqrt, is_hermitian, max_abs, psd_factor,
    CMatrix, CVector, Covariance,
};
pub use rng::{complex_normal, sample_circular_gaussian, standard_complex_vector, RngStream};

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Converts a per-symbol phase increment standard deviation in degrees into
/// a variance in radians².
pub fn deg_to_rad_variance(sigma_deg: f64) -> Result<f64> {
    if !sigma_deg.is_finite() {
        return Err(Error::NonFinite("deg_to_rad_variance"));
    }
    if sigma_deg < 0.0 {
        return Err(Error::Negative {
            what: "phase standard deviation (degrees)",
            value: sigma_deg,
        });
    }
    let rad = sigma_deg.to_radians();
    Ok(rad * rad)
}

/// Wiener increment variance `4π² f_c c T_s` of a free-running oscillator.
pub fn phase_increment_variance(carrier_hz: f64, oscillator_const: f64, symbol_time_s: f64) -> Result<f64> {
    for (what, value) in [
        ("carrier frequency", carrier_hz),
        ("oscillator constant", oscillator_const),
        ("symbol time", symbol_time_s),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFinite("phase_increment_variance"));
        }
        if value < 0.0 {
            return Err(Error::Negative { what, value });
        }
    }
    Ok(4.0 * PI * PI * carrier_hz * oscillator_const * symbol_time_s)
}

/// Decibels to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
