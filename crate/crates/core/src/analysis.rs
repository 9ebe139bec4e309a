//! Fourier spectra and revival-contrast metrics of observable time series.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MIN_POINTS: usize = 16;
const SPACING_TOLERANCE: f64 = 1e-12;

/// Values on a uniform time grid (us).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    time_grid: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(time_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if time_grid.len() != values.len() {
            return Err(invalid("time grid and values differ in length"));
        }
        if time_grid.len() < MIN_POINTS {
            return Err(invalid(format!(
                "time series needs at least {MIN_POINTS} points, got {}",
                time_grid.len()
            )));
        }
        let n = time_grid.len();
        let dt = (time_grid[n - 1] - time_grid[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(invalid("time grid must be ascending"));
        }
        // relative tolerance on the step, plus rounding of the stored times
        let tol = SPACING_TOLERANCE * dt + 4.0 * f64::EPSILON * time_grid[n - 1].abs().max(time_grid[0].abs());
        if time_grid.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
            return Err(invalid("time grid is not uniformly spaced"));
        }
        Ok(Self { time_grid, values })
    }

    /// Series starting at `t0` with step `dt`.
    pub fn from_uniform(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        let grid = (0..values.len()).map(|i| t0 + dt * i as f64).collect();
        Self::new(grid, values)
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        let n = self.time_grid.len();
        (self.time_grid[n - 1] - self.time_grid[0]) / (n - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Self::Rectangular => vec![1.0; n],
            // periodic Hann
            Self::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// MHz, from 0 to the Nyquist frequency.
    pub frequencies: Vec<f64>,
    /// One-sided amplitudes; their squares sum to the energy of the windowed,
    /// mean-subtracted series.
    pub magnitudes: Vec<f64>,
    /// Largest magnitude above DC, MHz.
    pub peak_frequency: f64,
    /// Power-weighted mean frequency above DC, MHz.
    pub centroid_frequency: f64,
    pub window: Window,
}

impl SpectrumResult {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }
}

pub fn fourier_spectrum(series: &TimeSeries) -> SpectrumResult {
    fourier_spectrum_with(series, Window::default())
}

pub fn fourier_spectrum_with(series: &TimeSeries, window: Window) -> SpectrumResult {
    let n = series.values.len();
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let w = window.weights(n);
    let mut buf: Vec<Complex64> = series
        .values
        .iter()
        .zip(&w)
        .map(|(v, wi)| Complex64::new((v - mean) * wi, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let scale = 1.0 / (n as f64).sqrt();
    let magnitudes: Vec<f64> = (0..=half)
        .map(|k| {
            let m = buf[k].norm() * scale;
            if k == 0 || (n.is_multiple_of(2) && k == half) {
                m
            } else {
                m * 2f64.sqrt()
            }
        })
        .collect();
    let df = 1.0 / (n as f64 * series.spacing());
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 * df).collect();
    let peak = (1..magnitudes.len())
        .max_by(|&a, &b| magnitudes[a].total_cmp(&magnitudes[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let power: f64 = magnitudes[1..].iter().map(|m| m * m).sum();
    let centroid = if power > 0.0 {
        magnitudes[1..]
            .iter()
            .zip(&frequencies[1..])
            .map(|(m, f)| m * m * f)
            .sum::<f64>()
            / power
    } else {
        0.0
    };
    SpectrumResult {
        peak_frequency: frequencies[peak],
        frequencies,
        magnitudes,
        centroid_frequency: centroid,
        window,
    }
}

/// Energy of the windowed, mean-subtracted series (the Parseval reference).
pub fn windowed_energy(series: &TimeSeries, window: Window) -> f64 {
    let n = series.values.len();
    let mean = series.values.iter().sum::<f64>() / n as f64;
    series
        .values
        .iter()
        .zip(window.weights(n))
        .map(|(v, w)| ((v - mean) * w).powi(2))
        .sum()
}

fn window_indices(grid: &[f64], (lo, hi): (f64, f64)) -> Vec<usize> {
    (0..grid.len()).filter(|&i| grid[i] >= lo && grid[i] <= hi).collect()
}

/// `max(revival window) - mean(collapse window)`.
pub fn revival_contrast(series: &TimeSeries, collapse_window: (f64, f64), revival_window: (f64, f64)) -> Result<f64> {
    let (c, r) = (collapse_window, revival_window);
    if !(c.0 < c.1) || !(r.0 < r.1) {
        return Err(invalid("windows must have positive length"));
    }
    if c.0 < r.1 && r.0 < c.1 {
        return Err(invalid("collapse and revival windows overlap"));
    }
    let ci = window_indices(&series.time_grid, c);
    let ri = window_indices(&series.time_grid, r);
    if ci.is_empty() || ri.is_empty() {
        return Err(invalid("a contrast window contains no grid points"));
    }
    let plateau = ci.iter().map(|&i| series.values[i]).sum::<f64>() / ci.len() as f64;
    let peak = ri.iter().map(|&i| series.values[i]).fold(f64::NEG_INFINITY, f64::max);
    Ok(peak - plateau)
}

/// Collapse and revival windows, us.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevivalWindows {
    pub collapse: (f64, f64),
    pub revival: (f64, f64),
}

impl RevivalWindows {
    /// Windows for a mean of 7 atoms at 1 MHz.
    pub const REFERENCE: Self = Self {
        collapse: (2.0, 4.0),
        revival: (4.5, 6.5),
    };

    /// Reference windows rescaled by the revival time `4 pi sqrt(mean) / Omega`.
    pub fn for_mean(mean_n: f64, rabi: f64) -> Self {
        let reference = 2.0 * 7f64.sqrt();
        let s = 4.0 * PI * mean_n.sqrt() / rabi / reference;
        let r = Self::REFERENCE;
        Self {
            collapse: (r.collapse.0 * s, r.collapse.1 * s),
            revival: (r.revival.0 * s, r.revival.1 * s),
        }
    }

    pub fn contrast(&self, series: &TimeSeries) -> Result<f64> {
        revival_contrast(series, self.collapse, self.revival)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::uniform_grid;

    fn series(f: impl Fn(f64) -> f64, t_max: f64, n: usize) -> TimeSeries {
        let g = uniform_grid(t_max, n);
        let v = g.iter().map(|&t| f(t)).collect();
        TimeSeries::new(g, v).unwrap()
    }

    #[test]
    fn collective_frequency_peak() {
        let om = 2.0 * PI;
        let s = series(|t| (20f64.sqrt() * om * t / 2.0).sin().powi(2), 20.0, 2001);
        for w in [Window::Hann, Window::Rectangular] {
            let sp = fourier_spectrum_with(&s, w);
            assert!((sp.peak_frequency - 20f64.sqrt()).abs() <= sp.resolution(), "{}", sp.peak_frequency);
        }
    }

    #[test]
    fn constant_series_has_no_spectrum() {
        let sp = fourier_spectrum(&series(|_| 0.7, 10.0, 101));
        assert!(sp.magnitudes.iter().all(|&m| m < 1e-12));
    }

    #[test]
    fn parseval() {
        let s = series(|t| (3.1 * t).sin() + 0.2 * (7.7 * t).cos() + 0.1 * t, 10.0, 500);
        for w in [Window::Hann, Window::Rectangular] {
            let sp = fourier_spectrum_with(&s, w);
            let e: f64 = sp.magnitudes.iter().map(|m| m * m).sum();
            assert!((e / windowed_energy(&s, w) - 1.0).abs() < 1e-9);
        }
        let odd = series(|t| (2.0 * t).cos(), 10.0, 501);
        let sp = fourier_spectrum_with(&odd, Window::Rectangular);
        let e: f64 = sp.magnitudes.iter().map(|m| m * m).sum();
        assert!((e / windowed_energy(&odd, Window::Rectangular) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_on_bin() {
        let f0 = 1.3;
        let s = series(|t| (2.0 * PI * f0 * t).cos(), 9.99, 1000);
        let sp = fourier_spectrum(&s);
        assert!((sp.peak_frequency - f0).abs() <= sp.resolution());
        assert!((sp.frequencies.last().unwrap() - 1.0 / (2.0 * s.spacing())).abs() < 1e-9);
    }

    #[test]
    fn grid_checks() {
        assert!(TimeSeries::new(vec![0.0; 5], vec![0.0; 5]).is_err());
        let mut g = uniform_grid(1.0, 20);
        g[7] += 1e-4;
        assert!(TimeSeries::new(g, vec![0.0; 20]).is_err());
    }

    #[test]
    fn contrast_examples() {
        let s = series(|t| if t > 5.0 { 1.0 } else { 0.5 }, 10.0, 101);
        assert!((revival_contrast(&s, (1.0, 4.0), (6.0, 8.0)).unwrap() - 0.5).abs() < 1e-15);
        let flat = series(|_| 0.3, 10.0, 101);
        assert!(revival_contrast(&flat, (1.0, 4.0), (6.0, 8.0)).unwrap().abs() < 1e-15);
        let shifted = series(|t| (t * 1.7).sin() + 4.0, 10.0, 101);
        let base = series(|t| (t * 1.7).sin(), 10.0, 101);
        let w = RevivalWindows::REFERENCE;
        assert!((w.contrast(&shifted).unwrap() - w.contrast(&base).unwrap()).abs() < 1e-12);
        assert!(revival_contrast(&s, (1.0, 4.0), (3.0, 8.0)).is_err());
        assert!(revival_contrast(&s, (20.0, 30.0), (40.0, 50.0)).is_err());
    }

    #[test]
    fn window_scaling() {
        let w = RevivalWindows::for_mean(7.0, 2.0 * PI);
        assert!((w.collapse.0 - 2.0).abs() < 1e-12 && (w.revival.1 - 6.5).abs() < 1e-12);
        let w10 = RevivalWindows::for_mean(10.0, 2.0 * PI);
        assert!((w10.revival.0 / 4.5 - (10.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }
}
