//! Spectral extrapolation and physical-domain synthesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, Measurement};
use crate::models::{cis_turns, ChirpParams, FriParams, ModelInstance};

/// Uniform grid `x_t = t / G`, `t = 0..G`, on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalGrid {
    size: usize,
}

impl PhysicalGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidGrid("physical grid needs at least one point".into()));
        }
        Ok(PhysicalGrid { size })
    }

    /// Smallest grid that resolves `|k| <= k_max`.
    pub fn for_k_max(k_max: usize) -> Self {
        PhysicalGrid { size: 2 * k_max + 1 }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn step(&self) -> f64 {
        1.0 / self.size as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size).map(|t| t as f64 / self.size as f64).collect()
    }

    fn check(&self, k_max: usize) -> Result<()> {
        if self.size < 2 * k_max + 1 {
            return Err(Error::InvalidGrid(format!(
                "{} points cannot carry frequencies up to |k| = {k_max}",
                self.size
            )));
        }
        Ok(())
    }
}

/// `x_t = t / divisor` for `t = 0..=divisor`, both ends of `[0, 1]` included.
pub fn closed_unit_grid(divisor: usize) -> Vec<f64> {
    (0..=divisor).map(|t| t as f64 / divisor as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    /// Raw measured data.
    Raw,
    /// `P_H(theta_hat)` of a fitted model.
    Fitted { model: ModelInstance },
}

/// Samples on a (typically high-resolution) grid with where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub measurement: Measurement,
    pub provenance: Provenance,
}

impl Spectrum {
    pub fn raw(measurement: Measurement) -> Self {
        Spectrum {
            measurement,
            provenance: Provenance::Raw,
        }
    }
}

/// `P_H(theta_hat)`: the fitted model sampled on `|k| <= k_high`.
pub fn extrapolate(theta_hat: &ModelInstance, k_high: usize) -> Result<Spectrum> {
    let measurement = theta_hat.forward(&FrequencyGrid::full(k_high))?;
    Ok(Spectrum {
        measurement,
        provenance: Provenance::Fitted {
            model: theta_hat.clone(),
        },
    })
}

/// Dirichlet kernel `D_K(x) = sum_{|k| <= K} e^{2 pi i k x}
/// = sin((2K+1) pi x) / sin(pi x)`.
pub fn dirichlet(k_max: usize, x: f64) -> f64 {
    let e = x - x.round();
    let m = (2 * k_max + 1) as f64;
    if e == 0.0 {
        return m;
    }
    (m * PI * e).sin() / (PI * e).sin()
}

/// `s(x_t) = sum_k g_k e^{2 pi i k x_t}` by inverse FFT: `g_k` goes to bin
/// `k mod G` of an unnormalised inverse DFT of length `G`.
pub fn synthesize(spectrum: &Measurement, grid: &PhysicalGrid) -> Result<Vec<Complex64>> {
    let g = grid.size();
    grid.check(spectrum.grid().k_max())?;
    let mut buf = vec![Complex64::new(0.0, 0.0); g];
    for (k, v) in spectrum.iter() {
        buf[k.rem_euclid(g as i64) as usize] += v;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(g).process(&mut buf);
    Ok(buf)
}

/// Band-limited rendering of a derivatives-of-Diracs signal,
/// `sum_{r,j} a_{r,j} sum_{|k| <= K} (-2 pi i k)^r e^{2 pi i k (x - y_{r,j})}`,
/// by direct summation. The factor `(-2 pi i k)^r` follows the forward map,
/// so this agrees with `synthesize(forward(params))`.
pub fn fri_truth_render(params: &FriParams, k_max: usize, grid: &PhysicalGrid) -> Result<Vec<Complex64>> {
    grid.check(k_max)?;
    let k_max = k_max as i64;
    Ok(grid
        .points()
        .into_iter()
        .map(|x| {
            let mut s = Complex64::new(0.0, 0.0);
            for (r, o) in params.orders.iter().enumerate() {
                for (&a, &y) in o.amplitudes.iter().zip(&o.positions) {
                    for k in -k_max..=k_max {
                        let d = Complex64::new(0.0, -2.0 * PI * k as f64).powu(r as u32);
                        s += a * d * cis_turns(k as f64 * (x - y));
                    }
                }
            }
            s
        })
        .collect())
}

/// The chirp profile `psi(x)` evaluated directly at each point.
pub fn chirp_profile(params: &ChirpParams, points: &[f64]) -> Vec<Complex64> {
    points.iter().map(|&x| params.profile(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FriOrder, Interval, PointSourceParams};

    #[test]
    fn dirichlet_examples() {
        assert_eq!(dirichlet(4, 0.0), 9.0);
        assert_eq!(dirichlet(4, 3.0), 9.0);
        assert!((dirichlet(1, 0.5) + 1.0).abs() < 1e-15);
        let near = dirichlet(10, 1e-9);
        assert!((near - 21.0).abs() < 1e-9);
    }

    #[test]
    fn unit_source_synthesizes_to_dirichlet() {
        let p = 0.3;
        let m: ModelInstance = PointSourceParams::new(vec![1.0], vec![p], Interval::new(1.0, 2.0))
            .unwrap()
            .into();
        let k = 12;
        let grid = PhysicalGrid::new(64).unwrap();
        let s = synthesize(&extrapolate(&m, k).unwrap().measurement, &grid).unwrap();
        for (x, v) in grid.points().iter().zip(&s) {
            assert!((v.re - dirichlet(k, x - p)).abs() < 1e-11);
            assert!(v.im.abs() < 1e-11);
        }
    }

    #[test]
    fn zero_spectrum_and_small_grid() {
        let z = Measurement::zeros(FrequencyGrid::full(3));
        let s = synthesize(&z, &PhysicalGrid::new(7).unwrap()).unwrap();
        assert!(s.iter().all(|v| v.norm() == 0.0));
        assert!(synthesize(&z, &PhysicalGrid::new(6).unwrap()).is_err());
    }

    #[test]
    fn dipole_vanishes_at_its_position() {
        let y = 0.25;
        let p = FriParams::new(vec![
            FriOrder::empty(),
            FriOrder::new(vec![0.7], vec![y], Interval::new(0.5, 1.0)),
        ])
        .unwrap();
        let grid = PhysicalGrid::new(16).unwrap();
        let s = fri_truth_render(&p, 5, &grid).unwrap();
        assert!(s[4].norm() < 1e-10);
    }

    #[test]
    fn extrapolate_at_low_cutoff_is_forward() {
        let m: ModelInstance = PointSourceParams::new(vec![1.1, 1.9], vec![0.1, 0.7], Interval::new(1.0, 2.0))
            .unwrap()
            .into();
        let low = FrequencyGrid::full(6);
        assert_eq!(extrapolate(&m, 6).unwrap().measurement, m.forward(&low).unwrap());
    }
}
