//! Finite detection efficiency: each Rydberg atom is registered independently
//! with probability `T`, which thins the excitation-number distribution
//! binomially.

use serde::{Deserialize, Serialize};

use crate::dynamics::ExcitationHistogram;
use crate::error::{invalid, Result};
use crate::jc_reference::binomial_coefficient;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    efficiency: f64,
}

impl DetectionModel {
    pub fn new(efficiency: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(invalid(format!(
                "detection efficiency must lie in [0, 1], got {efficiency}"
            )));
        }
        Ok(Self { efficiency })
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }
}

/// `s(k) = sum_{i>=k} C(i,k) T^k (1-T)^(i-k) q(i)` over the finite support of `q`.
pub fn detection_transform(q: &[f64], model: &DetectionModel) -> Result<Vec<f64>> {
    if let Some(bad) = q.iter().find(|&&x| !(-1e-12..=1.0 + 1e-9).contains(&x)) {
        return Err(invalid(format!("probability {bad} outside [0, 1]")));
    }
    if q.iter().sum::<f64>() > 1.0 + 1e-9 {
        return Err(invalid("probabilities sum to more than one"));
    }
    Ok(thin(q, model.efficiency))
}

fn thin(q: &[f64], t: f64) -> Vec<f64> {
    let miss = 1.0 - t;
    (0..q.len())
        .map(|k| {
            (k..q.len())
                .map(|i| binomial_coefficient(i, k) * t.powi(k as i32) * miss.powi((i - k) as i32) * q[i])
                .sum()
        })
        .collect()
}

/// Applies the transform to every time column.
pub fn detected_timeseries(hist: &ExcitationHistogram, model: &DetectionModel) -> Result<ExcitationHistogram> {
    let mut out = ExcitationHistogram::zeros(&hist.time_grid, hist.max_count());
    for j in 0..hist.time_grid.len() {
        let s = detection_transform(&hist.column(j), model)?;
        for (row, v) in out.q.iter_mut().zip(s) {
            row[j] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn perfect_detector_is_identity() {
        let q = [0.1, 0.3, 0.4, 0.2];
        let s = detection_transform(&q, &DetectionModel::new(1.0).unwrap()).unwrap();
        assert_eq!(s, q);
    }

    #[test]
    fn coin_flips() {
        let half = DetectionModel::new(0.5).unwrap();
        assert!(close(&detection_transform(&[0.0, 1.0], &half).unwrap(), &[0.5, 0.5]));
        assert!(close(
            &detection_transform(&[0.0, 0.0, 1.0], &half).unwrap(),
            &[0.25, 0.5, 0.25]
        ));
    }

    #[test]
    fn blind_detector() {
        let q = [0.1, 0.3, 0.4, 0.2];
        let s = detection_transform(&q, &DetectionModel::new(0.0).unwrap()).unwrap();
        assert!(close(&s, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DetectionModel::new(1.2).is_err());
        let m = DetectionModel::new(0.3).unwrap();
        assert!(detection_transform(&[0.7, 0.7], &m).is_err());
        assert!(detection_transform(&[-0.1, 0.5], &m).is_err());
    }

    #[test]
    fn timeseries_columns() {
        let hist = ExcitationHistogram {
            time_grid: vec![0.0, 1.0],
            q: vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]],
        };
        let s = detected_timeseries(&hist, &DetectionModel::new(0.5).unwrap()).unwrap();
        assert_eq!(s.column(0), vec![1.0, 0.0, 0.0]);
        assert!(close(&s.column(1), &[0.25, 0.5, 0.25]));
    }
}
