use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::point::validate_sources;
use super::{fourier_phase, CoordinateRole, Interval, SourceGroup, SourceRef};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Sources of one derivative order `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriOrder {
    pub amplitudes: Vec<f64>,
    pub positions: Vec<f64>,
    pub amplitude_interval: Interval,
}

impl FriOrder {
    pub fn new(amplitudes: Vec<f64>, positions: Vec<f64>, amplitude_interval: Interval) -> Self {
        FriOrder {
            amplitudes,
            positions,
            amplitude_interval,
        }
    }

    pub fn empty() -> Self {
        FriOrder::new(Vec::new(), Vec::new(), Interval::new(-1.0, 1.0))
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// Derivatives of Diracs: `orders[r]` holds the order-`r` sources and
/// `g_k = sum_{r,j} a_{r,j} (-2 pi i k)^r e^{-2 pi i x_{r,j} k}`.
///
/// Amplitudes are used exactly as they multiply `(-2 pi i k)^r`; no
/// per-order rescaling is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriParams {
    pub orders: Vec<FriOrder>,
}

const ORDER_LABELS: [&str; 3] = ["monopole", "dipole", "quadrupole"];

/// Display label of derivative order `r`.
pub fn order_label(r: usize) -> String {
    ORDER_LABELS
        .get(r)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("order{r}"))
}

impl FriParams {
    pub fn new(orders: Vec<FriOrder>) -> Result<Self> {
        let p = FriParams { orders };
        p.validate()?;
        Ok(p)
    }

    /// Highest derivative order `R`.
    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    /// `n_r` for `r = 0..=R`.
    pub fn counts(&self) -> Vec<usize> {
        self.orders.iter().map(FriOrder::len).collect()
    }

    /// `N = sum_r n_r`.
    pub fn total_sources(&self) -> usize {
        self.orders.iter().map(FriOrder::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_sources() == 0 {
            return Err(Error::InvalidModel("FRI model needs at least one source".into()));
        }
        for (r, o) in self.orders.iter().enumerate() {
            if o.amplitudes.len() != o.positions.len() {
                return Err(Error::InvalidModel(format!(
                    "order {r}: {} amplitudes but {} positions",
                    o.amplitudes.len(),
                    o.positions.len()
                )));
            }
            o.amplitude_interval.validate("amplitude")?;
            validate_sources(&o.amplitudes, &o.positions, &format!("order-{r} source"))?;
        }
        Ok(())
    }

    /// `(r, amplitude, position)` in flattening order.
    fn sources(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.orders
            .iter()
            .enumerate()
            .flat_map(|(r, o)| o.amplitudes.iter().zip(&o.positions).map(move |(&a, &x)| (r, a, x)))
    }

    pub(super) fn flatten(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.sources().map(|(_, a, _)| a).collect();
        t.extend(self.sources().map(|(_, _, x)| x));
        t
    }

    pub(super) fn unflatten(&self, theta: &[f64]) -> Self {
        let n = self.total_sources();
        let mut at = 0;
        let orders = self
            .orders
            .iter()
            .map(|o| {
                let len = o.len();
                let out = FriOrder {
                    amplitudes: theta[at..at + len].to_vec(),
                    positions: theta[n + at..n + at + len].to_vec(),
                    amplitude_interval: o.amplitude_interval,
                };
                at += len;
                out
            })
            .collect();
        FriParams { orders }
    }

    pub(super) fn roles(&self) -> Vec<CoordinateRole> {
        let mut r: Vec<CoordinateRole> = self
            .orders
            .iter()
            .flat_map(|o| std::iter::repeat_n(CoordinateRole::Amplitude(o.amplitude_interval), o.len()))
            .collect();
        r.extend(std::iter::repeat_n(CoordinateRole::Position, self.total_sources()));
        r
    }

    pub(super) fn source_groups(&self) -> Vec<SourceGroup> {
        let n = self.total_sources();
        let mut at = 0;
        let mut groups = Vec::new();
        for (r, o) in self.orders.iter().enumerate() {
            if !o.is_empty() {
                groups.push(SourceGroup {
                    label: order_label(r),
                    sources: (at..at + o.len())
                        .map(|i| SourceRef {
                            position: n + i,
                            amplitudes: vec![i],
                        })
                        .collect(),
                });
            }
            at += o.len();
        }
        groups
    }

    pub(super) fn forward(&self, grid: &FrequencyGrid) -> Vec<Complex64> {
        grid.frequencies()
            .into_iter()
            .map(|w| {
                let d = Complex64::new(0.0, -2.0 * PI * w);
                self.sources()
                    .map(|(r, a, x)| a * d.powu(r as u32) * fourier_phase(x, w))
                    .sum()
            })
            .collect()
    }

    pub(super) fn jacobian(&self, grid: &FrequencyGrid) -> DMatrix<Complex64> {
        let n = self.total_sources();
        let freqs = grid.frequencies();
        let mut j = DMatrix::zeros(freqs.len(), 2 * n);
        for (row, &w) in freqs.iter().enumerate() {
            let d = Complex64::new(0.0, -2.0 * PI * w);
            for (s, (r, a, x)) in self.sources().enumerate() {
                let e = fourier_phase(x, w);
                let dr = d.powu(r as u32);
                j[(row, s)] = dr * e;
                j[(row, n + s)] = a * dr * d * e;
            }
        }
        j
    }
}
