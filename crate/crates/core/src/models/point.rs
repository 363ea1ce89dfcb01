use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fourier_phase, CoordinateRole, Interval, SourceGroup, SourceRef};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

fn default_interval() -> Interval {
    Interval::new(1.0, 2.0)
}

/// `psi = sum_j a_j delta_{x_j}` on the unit circle, so
/// `g_k = sum_j a_j e^{-2 pi i x_j k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSourceParams {
    pub amplitudes: Vec<f64>,
    pub positions: Vec<f64>,
    /// Admissible amplitude interval `I`; its bound is `A_I`.
    #[serde(default = "default_interval")]
    pub amplitude_interval: Interval,
}

impl PointSourceParams {
    pub fn new(amplitudes: Vec<f64>, positions: Vec<f64>, amplitude_interval: Interval) -> Result<Self> {
        let p = PointSourceParams {
            amplitudes,
            positions,
            amplitude_interval,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() {
            return Err(Error::InvalidModel("point model needs n >= 1 sources".into()));
        }
        if self.amplitudes.len() != self.positions.len() {
            return Err(Error::InvalidModel(format!(
                "{} amplitudes but {} positions",
                self.amplitudes.len(),
                self.positions.len()
            )));
        }
        self.amplitude_interval.validate("amplitude")?;
        validate_sources(&self.amplitudes, &self.positions, "point source")
    }

    pub(super) fn flatten(&self) -> Vec<f64> {
        let mut t = self.amplitudes.clone();
        t.extend_from_slice(&self.positions);
        t
    }

    pub(super) fn unflatten(&self, theta: &[f64]) -> Self {
        let n = self.len();
        PointSourceParams {
            amplitudes: theta[..n].to_vec(),
            positions: theta[n..2 * n].to_vec(),
            amplitude_interval: self.amplitude_interval,
        }
    }

    pub(super) fn roles(&self) -> Vec<CoordinateRole> {
        let n = self.len();
        let mut r = vec![CoordinateRole::Amplitude(self.amplitude_interval); n];
        r.extend(std::iter::repeat_n(CoordinateRole::Position, n));
        r
    }

    pub(super) fn source_groups(&self) -> Vec<SourceGroup> {
        let n = self.len();
        vec![SourceGroup {
            label: "source".into(),
            sources: (0..n)
                .map(|j| SourceRef {
                    position: n + j,
                    amplitudes: vec![j],
                })
                .collect(),
        }]
    }

    pub(super) fn forward(&self, grid: &FrequencyGrid) -> Vec<Complex64> {
        grid.frequencies()
            .into_iter()
            .map(|w| {
                self.amplitudes
                    .iter()
                    .zip(&self.positions)
                    .map(|(&a, &x)| a * fourier_phase(x, w))
                    .sum()
            })
            .collect()
    }

    pub(super) fn jacobian(&self, grid: &FrequencyGrid) -> DMatrix<Complex64> {
        let n = self.len();
        let freqs = grid.frequencies();
        let mut j = DMatrix::zeros(freqs.len(), 2 * n);
        for (r, &w) in freqs.iter().enumerate() {
            let d = Complex64::new(0.0, -2.0 * PI * w);
            for s in 0..n {
                let e = fourier_phase(self.positions[s], w);
                j[(r, s)] = e;
                j[(r, n + s)] = d * self.amplitudes[s] * e;
            }
        }
        j
    }

    /// Analytic per-frequency Hessians: the only nonzero entries are
    /// `d2/da_j dx_j = -2 pi i k e_j` and `d2/dx_j^2 = (-2 pi i k)^2 a_j e_j`.
    pub(super) fn hessians(&self, grid: &FrequencyGrid) -> Vec<DMatrix<Complex64>> {
        let n = self.len();
        grid.frequencies()
            .into_iter()
            .map(|w| {
                let d = Complex64::new(0.0, -2.0 * PI * w);
                let mut h = DMatrix::zeros(2 * n, 2 * n);
                for s in 0..n {
                    let e = fourier_phase(self.positions[s], w);
                    h[(s, n + s)] = d * e;
                    h[(n + s, s)] = d * e;
                    h[(n + s, n + s)] = d * d * self.amplitudes[s] * e;
                }
                h
            })
            .collect()
    }
}

/// Shared checks for Dirac-type sources: finite, nonzero amplitudes and
/// pairwise distinct positions in `[0, 1)`.
pub(super) fn validate_sources(amplitudes: &[f64], positions: &[f64], what: &str) -> Result<()> {
    for (j, (&a, &x)) in amplitudes.iter().zip(positions).enumerate() {
        if !a.is_finite() || a == 0.0 {
            return Err(Error::InvalidModel(format!(
                "{what} {j}: amplitude must be finite and nonzero, got {a}"
            )));
        }
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidModel(format!("{what} {j}: position {x} outside [0, 1)")));
        }
    }
    if let Some(d) = super::min_separation(positions) {
        if d == 0.0 {
            return Err(Error::InvalidModel(format!(
                "{what} positions must be pairwise distinct"
            )));
        }
    }
    Ok(())
}
