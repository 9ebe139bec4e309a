//! Conversions between ordinary frequencies (as quoted in configuration files)
//! and the angular frequencies used internally.
//!
//! Internal unit system: time in microseconds, length in micrometres, and all
//! frequencies and energies as angular frequencies in rad/us. An ordinary
//! frequency of 1 MHz is therefore `2*pi` rad/us.

use std::f64::consts::TAU;

pub fn mhz_to_angular(mhz: f64) -> f64 {
    TAU * mhz
}

pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / TAU
}

pub fn khz_to_angular(khz: f64) -> f64 {
    TAU * khz * 1e-3
}

pub fn angular_to_khz(omega: f64) -> f64 {
    omega / TAU * 1e3
}

/// Uniform grid of `n` points on `[0, t_max]`.
///
/// Points are computed as `t_max * i / (n - 1)` so that the spacing is uniform
/// to a few ulps regardless of `n`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((angular_to_mhz(mhz_to_angular(3.2)) - 3.2).abs() < 1e-15);
        assert!((angular_to_khz(khz_to_angular(0.8)) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(10.0, 501);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[500], 10.0);
        assert!((g[1] - 0.02).abs() < 1e-15);
        assert!(uniform_grid(1.0, 0).is_empty());
    }
}
