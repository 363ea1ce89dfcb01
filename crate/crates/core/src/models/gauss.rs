use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fourier_phase, CoordinateRole, Interval, SourceGroup, SourceRef};
use crate::error::{Error, Result};
use crate::grid::{wrap_unit, FrequencyGrid};

/// Gaussian mixture `psi(x) = sum_j w_j exp(-(x - mu_j)^2 / (2 s_j^2))` with
/// the real-line transform
/// `g_k = sqrt(2 pi) sum_j w_j s_j e^{-2 pi i mu_j k} e^{-2 pi^2 s_j^2 k^2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussParams {
    pub weights: Vec<f64>,
    pub widths: Vec<f64>,
    pub means: Vec<f64>,
    /// `I_1`.
    pub weight_interval: Interval,
    /// `I_2`, strictly positive.
    pub width_interval: Interval,
}

impl GaussParams {
    pub fn new(
        weights: Vec<f64>,
        widths: Vec<f64>,
        means: Vec<f64>,
        weight_interval: Interval,
        width_interval: Interval,
    ) -> Result<Self> {
        let p = GaussParams {
            weights,
            widths,
            means,
            weight_interval,
            width_interval,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidModel("Gaussian mixture needs n >= 1 components".into()));
        }
        if self.widths.len() != n || self.means.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} weights, {} widths, {} means",
                n,
                self.widths.len(),
                self.means.len()
            )));
        }
        self.weight_interval.validate("weight")?;
        self.width_interval.validate("width")?;
        if self.width_interval.lo <= 0.0 {
            return Err(Error::InvalidModel("width interval must be positive".into()));
        }
        for j in 0..n {
            let (w, s, m) = (self.weights[j], self.widths[j], self.means[j]);
            if !w.is_finite() || w == 0.0 {
                return Err(Error::InvalidModel(format!(
                    "component {j}: weight must be finite and nonzero"
                )));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "component {j}: width must be positive, got {s}"
                )));
            }
            if !(0.0..1.0).contains(&m) {
                return Err(Error::InvalidModel(format!("component {j}: mean {m} outside [0, 1)")));
            }
        }
        for p in 0..n {
            for q in p + 1..n {
                if self.widths[p] == self.widths[q] && self.means[p] == self.means[q] {
                    return Err(Error::InvalidModel(format!(
                        "components {p} and {q} share (width, mean)"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(super) fn flatten(&self) -> Vec<f64> {
        let mut t = self.weights.clone();
        t.extend_from_slice(&self.widths);
        t.extend_from_slice(&self.means);
        t
    }

    pub(super) fn unflatten(&self, theta: &[f64]) -> Self {
        let n = self.len();
        GaussParams {
            weights: theta[..n].to_vec(),
            widths: theta[n..2 * n].to_vec(),
            means: theta[2 * n..3 * n].to_vec(),
            weight_interval: self.weight_interval,
            width_interval: self.width_interval,
        }
    }

    pub(super) fn roles(&self) -> Vec<CoordinateRole> {
        let n = self.len();
        let mut r = vec![CoordinateRole::Amplitude(self.weight_interval); n];
        r.extend(std::iter::repeat_n(CoordinateRole::Width(self.width_interval), n));
        r.extend(std::iter::repeat_n(CoordinateRole::Position, n));
        r
    }

    pub(super) fn source_groups(&self) -> Vec<SourceGroup> {
        let n = self.len();
        vec![SourceGroup {
            label: "component".into(),
            sources: (0..n)
                .map(|j| SourceRef {
                    position: 2 * n + j,
                    amplitudes: vec![j],
                })
                .collect(),
        }]
    }

    /// Wraps means and reflects nonpositive widths. `g_k` is odd in the
    /// width, so `(w, s) -> (-w, -s)` leaves every sample unchanged.
    pub(super) fn project(&self, theta: &mut [f64]) {
        let n = self.len();
        for j in 0..n {
            if theta[n + j] < 0.0 {
                theta[n + j] = -theta[n + j];
                theta[j] = -theta[j];
            }
            theta[2 * n + j] = wrap_unit(theta[2 * n + j]);
        }
    }

    pub(super) fn fd_scales(&self, wavelength: f64) -> Vec<f64> {
        let mut s: Vec<f64> = self.weights.iter().map(|w| w.abs().max(1e-3)).collect();
        s.extend(self.widths.iter().map(|w| w.abs().max(1e-6)));
        s.extend(self.widths.iter().map(|w| w.abs().max(1e-6).min(wavelength)));
        s
    }

    /// `e^{-2 pi i mu w} e^{-2 pi^2 s^2 w^2}` for component `j`.
    fn kernel(&self, j: usize, w: f64) -> Complex64 {
        let s = self.widths[j];
        fourier_phase(self.means[j], w) * (-2.0 * PI * PI * s * s * w * w).exp()
    }

    pub(super) fn forward(&self, grid: &FrequencyGrid) -> Vec<Complex64> {
        let c = (2.0 * PI).sqrt();
        grid.frequencies()
            .into_iter()
            .map(|w| {
                (0..self.len())
                    .map(|j| c * self.weights[j] * self.widths[j] * self.kernel(j, w))
                    .sum()
            })
            .collect()
    }

    pub(super) fn jacobian(&self, grid: &FrequencyGrid) -> DMatrix<Complex64> {
        let n = self.len();
        let c = (2.0 * PI).sqrt();
        let freqs = grid.frequencies();
        let mut jac = DMatrix::zeros(freqs.len(), 3 * n);
        for (row, &w) in freqs.iter().enumerate() {
            for j in 0..n {
                let (a, s) = (self.weights[j], self.widths[j]);
                let e = self.kernel(j, w) * c;
                jac[(row, j)] = e * s;
                jac[(row, n + j)] = e * (a - 4.0 * PI * PI * a * s * s * w * w);
                jac[(row, 2 * n + j)] = e * Complex64::new(0.0, -2.0 * PI * w) * a * s;
            }
        }
        jac
    }
}
