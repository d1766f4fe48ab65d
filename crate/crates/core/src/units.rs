//! Unit conventions.
//!
//! Every angular frequency and rate inside the library is in rad/µs. Files on
//! disk use ordinary frequencies: MHz for detunings and couplings, kHz for
//! loss rates. Both are multiplied by 2π on the way in.

use std::f64::consts::TAU;

/// Electron gyromagnetic ratio, rad/(s·T).
pub const GAMMA_E: f64 = TAU * 28.024e9;

/// Johnson-Nyquist magnetic noise floor at ambient temperature, T/√Hz.
pub const JOHNSON_NYQUIST_FLOOR: f64 = 97e-15;

/// ¹⁴N hyperfine splitting of the NV ground-state transition, MHz.
pub const NV14_HYPERFINE_MHZ: f64 = 2.16;

#[inline]
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

#[inline]
pub fn khz(f: f64) -> f64 {
    TAU * f * 1e-3
}

#[inline]
pub fn to_mhz(w: f64) -> f64 {
    w / TAU
}

#[inline]
pub fn to_khz(w: f64) -> f64 {
    w / TAU * 1e3
}

/// rad/µs to rad/s.
#[inline]
pub fn per_us_to_per_s(w: f64) -> f64 {
    w * 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((to_mhz(mhz(2.16)) - 2.16).abs() < 1e-15);
        assert!((to_khz(khz(167.0)) - 167.0).abs() < 1e-12);
        assert!((khz(1000.0) - mhz(1.0)).abs() < 1e-15);
    }
}
