use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{CoordinateRole, Interval, SourceGroup, SourceRef};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Physical sampling grid `x_t = t / divisor`, `t = 0..samples`.
///
/// With `samples == divisor` this is the plain DFT grid. The `closed127`
/// layout has 128 samples over divisor 127, so its last sample sits at
/// `x = 1` and aliases onto `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChirpGrid {
    pub samples: usize,
    pub divisor: usize,
}

impl ChirpGrid {
    /// `G` samples at `t / G`; `G` must be a power of two.
    pub fn uniform(g: usize) -> Result<Self> {
        if g < 2 || !g.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "fft grid size {g} is not a power of two >= 2"
            )));
        }
        Ok(ChirpGrid { samples: g, divisor: g })
    }

    /// 128 samples at `t / 127`.
    pub fn closed127() -> Self {
        ChirpGrid {
            samples: 128,
            divisor: 127,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(move |t| t as f64 / self.divisor as f64)
    }

    /// Largest `|k|` the grid resolves without aliasing.
    pub fn max_frequency(&self) -> usize {
        (self.divisor - 1) / 2
    }

    fn validate(&self) -> Result<()> {
        let ok = self.divisor >= 2 && (self.samples == self.divisor || self.samples == self.divisor + 1);
        if !ok {
            return Err(Error::InvalidGrid(format!(
                "chirp grid with {} samples over divisor {} is unsupported",
                self.samples, self.divisor
            )));
        }
        if self.samples == self.divisor && !self.samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "fft grid size {} is not a power of two",
                self.samples
            )));
        }
        Ok(())
    }
}

/// Sum of chirped Gaussians
/// `c_j(x) = (k0 + i k1) e^{i(k2 x^2 + k3 x)} e^{-(x - k4)^2 / (2 k5^2)}`.
///
/// Samples `g_k` are the Riemann-sum transform
/// `(1/divisor) sum_t psi(x_t) e^{-2 pi i k x_t}` over the physical grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub quadratic: Vec<f64>,
    pub linear: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// Interval for both amplitude parts `k0`, `k1`.
    pub amplitude_interval: Interval,
    pub grid: ChirpGrid,
}

impl ChirpParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        re: Vec<f64>,
        im: Vec<f64>,
        quadratic: Vec<f64>,
        linear: Vec<f64>,
        centers: Vec<f64>,
        widths: Vec<f64>,
        amplitude_interval: Interval,
        grid: ChirpGrid,
    ) -> Result<Self> {
        let p = ChirpParams {
            re,
            im,
            quadratic,
            linear,
            centers,
            widths,
            amplitude_interval,
            grid,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    fn rows(&self) -> [&Vec<f64>; 6] {
        [
            &self.re,
            &self.im,
            &self.quadratic,
            &self.linear,
            &self.centers,
            &self.widths,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidModel("chirp model needs at least one component".into()));
        }
        if self.rows().iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel("chirp parameter rows differ in length".into()));
        }
        if self.rows().iter().any(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidModel("chirp parameters must be finite".into()));
        }
        self.amplitude_interval.validate("amplitude")?;
        self.grid.validate()?;
        for j in 0..n {
            if self.re[j] == 0.0 && self.im[j] == 0.0 {
                return Err(Error::InvalidModel(format!("component {j}: zero amplitude")));
            }
            if !(self.centers[j] > 0.0 && self.centers[j] < 1.0) {
                return Err(Error::InvalidModel(format!(
                    "component {j}: center {} outside (0, 1)",
                    self.centers[j]
                )));
            }
            if self.widths[j] <= 0.0 {
                return Err(Error::InvalidModel(format!("component {j}: width must be positive")));
            }
        }
        Ok(())
    }

    pub(super) fn flatten(&self) -> Vec<f64> {
        self.rows().iter().flat_map(|r| r.iter().copied()).collect()
    }

    pub(super) fn unflatten(&self, theta: &[f64]) -> Self {
        let n = self.len();
        let row = |i: usize| theta[i * n..(i + 1) * n].to_vec();
        ChirpParams {
            re: row(0),
            im: row(1),
            quadratic: row(2),
            linear: row(3),
            centers: row(4),
            widths: row(5),
            amplitude_interval: self.amplitude_interval,
            grid: self.grid,
        }
    }

    pub(super) fn roles(&self) -> Vec<CoordinateRole> {
        let n = self.len();
        let mut r = vec![CoordinateRole::Amplitude(self.amplitude_interval); 2 * n];
        r.extend(std::iter::repeat_n(CoordinateRole::Phase, 2 * n));
        r.extend(std::iter::repeat_n(CoordinateRole::Position, n));
        r.extend(std::iter::repeat_n(CoordinateRole::Width(Interval::new(0.0, 1.0)), n));
        r
    }

    pub(super) fn source_groups(&self) -> Vec<SourceGroup> {
        let n = self.len();
        vec![SourceGroup {
            label: "component".into(),
            sources: (0..n)
                .map(|j| SourceRef {
                    position: 4 * n + j,
                    amplitudes: vec![j, n + j],
                })
                .collect(),
        }]
    }

    /// Reflects negative widths (the profile is even in the width) and
    /// returns the flattened indices of centers outside `(0, 1)`.
    pub(super) fn project(&self, theta: &mut [f64]) -> Vec<usize> {
        let n = self.len();
        let mut out = Vec::new();
        for j in 0..n {
            theta[5 * n + j] = theta[5 * n + j].abs();
            let c = theta[4 * n + j];
            if !(c > 0.0 && c < 1.0) {
                out.push(4 * n + j);
            }
        }
        out
    }

    pub(super) fn fd_scales(&self) -> Vec<f64> {
        let n = self.len();
        let mut s = Vec::with_capacity(6 * n);
        s.extend(self.re.iter().map(|v| v.abs().max(1e-3)));
        s.extend(self.im.iter().map(|v| v.abs().max(1e-3)));
        s.extend(std::iter::repeat_n(1.0, 2 * n));
        s.extend(self.widths.iter().map(|w| w.abs().max(1e-6)));
        s.extend(self.widths.iter().map(|w| w.abs().max(1e-6)));
        s
    }

    /// `e^{i(k2 x^2 + k3 x)} e^{-(x - k4)^2 / (2 k5^2)}` for component `j`.
    fn envelope(&self, j: usize, x: f64) -> Complex64 {
        let u = x - self.centers[j];
        let s = self.widths[j];
        let phase = self.quadratic[j] * x * x + self.linear[j] * x;
        Complex64::from_polar((-u * u / (2.0 * s * s)).exp(), phase)
    }

    fn amplitude(&self, j: usize) -> Complex64 {
        Complex64::new(self.re[j], self.im[j])
    }

    /// `psi(x)` evaluated directly.
    pub fn profile(&self, x: f64) -> Complex64 {
        (0..self.len()).map(|j| self.amplitude(j) * self.envelope(j, x)).sum()
    }

    fn check_grid(&self, grid: &FrequencyGrid) -> Result<()> {
        if grid.k_max() > self.grid.max_frequency() {
            return Err(Error::GridMismatch(format!(
                "K = {} exceeds what {} physical samples over divisor {} resolve",
                grid.k_max(),
                self.grid.samples,
                self.grid.divisor
            )));
        }
        Ok(())
    }

    /// Riemann-sum transforms of several sampled signals at once.
    fn transform(&self, signals: Vec<Vec<Complex64>>, grid: &FrequencyGrid) -> Vec<Vec<Complex64>> {
        let d = self.grid.divisor;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(d);
        let scale = 1.0 / d as f64;
        signals
            .into_iter()
            .map(|sig| {
                let mut buf = vec![Complex64::new(0.0, 0.0); d];
                for (t, v) in sig.into_iter().enumerate() {
                    buf[t % d] += v;
                }
                fft.process(&mut buf);
                grid.indices()
                    .into_iter()
                    .map(|k| buf[k.rem_euclid(d as i64) as usize] * scale)
                    .collect()
            })
            .collect()
    }

    pub(super) fn forward(&self, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        self.check_grid(grid)?;
        let sig: Vec<Complex64> = self.grid.points().map(|x| self.profile(x)).collect();
        Ok(self.transform(vec![sig], grid).pop().unwrap_or_default())
    }

    pub(super) fn jacobian(&self, grid: &FrequencyGrid) -> Result<DMatrix<Complex64>> {
        self.check_grid(grid)?;
        let n = self.len();
        let xs: Vec<f64> = self.grid.points().collect();
        let mut columns = vec![Vec::with_capacity(xs.len()); 6 * n];
        let i = Complex64::new(0.0, 1.0);
        for &x in &xs {
            for j in 0..n {
                let e = self.envelope(j, x);
                let be = self.amplitude(j) * e;
                let (u, s) = (x - self.centers[j], self.widths[j]);
                columns[j].push(e);
                columns[n + j].push(i * e);
                columns[2 * n + j].push(i * x * x * be);
                columns[3 * n + j].push(i * x * be);
                columns[4 * n + j].push(be * (u / (s * s)));
                columns[5 * n + j].push(be * (u * u / (s * s * s)));
            }
        }
        let cols = self.transform(columns, grid);
        Ok(DMatrix::from_fn(grid.len(), 6 * n, |r, c| cols[c][r]))
    }
}
