//! Adaptive Dormand-Prince 5(4) integrator for complex linear-or-not systems.
//!
//! The step is clipped so that every requested output time is hit exactly;
//! no interpolation is involved.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the first derivative.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            h_init: None,
            max_steps: 5_000_000,
        }
    }
}

/// Step statistics of a finished integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest scaled error estimate among accepted steps (<= 1).
    pub worst_error: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn scaled_rms(y: &[Complex64], z: &[Complex64], v: &[Complex64], o: &OdeOptions) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = y
        .iter()
        .zip(z)
        .zip(v)
        .map(|((a, b), e)| {
            let sc = o.atol + o.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `times[0]`, returning the state at each
/// entry of `times` (which must be non-decreasing).
pub fn integrate<F>(mut f: F, y0: &[Complex64], times: &[f64], opts: &OdeOptions) -> Result<(Vec<Vec<Complex64>>, OdeStats)>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("output times must be non-decreasing"));
    }
    let n = y0.len();
    let mut out = Vec::with_capacity(times.len());
    let mut stats = OdeStats::default();
    if times.is_empty() {
        return Ok((out, stats));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut t = times[0];
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    let mut err = vec![zero; n];

    f(t, &y, &mut k1);
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            let d0 = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let d1 = k1.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if d0 > 1e-5 && d1 > 1e-5 {
                0.01 * d0 / d1
            } else {
                1e-6
            }
        }
    };

    out.push(y.clone());
    for &t_out in &times[1..] {
        while t < t_out {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Integration {
                    time: t,
                    step: h,
                    local_error: stats.worst_error,
                });
            }
            let last = t + h >= t_out;
            let hs = if last { t_out - t } else { h };

            let stage = |tmp: &mut [Complex64], coef: &[(f64, &[Complex64])]| {
                for (i, slot) in tmp.iter_mut().enumerate() {
                    let mut acc = zero;
                    for (c, k) in coef {
                        acc += k[i] * *c;
                    }
                    *slot = y[i] + acc * hs;
                }
            };
            stage(&mut tmp, &[(A21, &k1)]);
            f(t + C2 * hs, &tmp, &mut k2);
            stage(&mut tmp, &[(A31, &k1), (A32, &k2)]);
            f(t + C3 * hs, &tmp, &mut k3);
            stage(&mut tmp, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(t + C4 * hs, &tmp, &mut k4);
            stage(&mut tmp, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            f(t + C5 * hs, &tmp, &mut k5);
            stage(&mut tmp, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            f(t + hs, &tmp, &mut k6);
            stage(&mut ynew, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            f(t + hs, &ynew, &mut k7);
            for i in 0..n {
                err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
            }
            let e = scaled_rms(&y, &ynew, &err, opts);
            let factor = if e == 0.0 {
                5.0
            } else {
                (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
            };
            if e <= 1.0 {
                stats.accepted += 1;
                stats.worst_error = stats.worst_error.max(e);
                t = if last { t_out } else { t + hs };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                // a clipped final step says nothing about the natural step size
                if !last || hs >= h {
                    h = hs * factor;
                }
            } else {
                stats.rejected += 1;
                h = hs * factor.min(1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Integration {
                        time: t,
                        step: h,
                        local_error: e,
                    });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
