//! Signal models: parameter spaces, forward maps `g_k(theta)`, Jacobians and
//! Hessian data.
//!
//! Every model flattens to a real parameter vector with all amplitude-like
//! coordinates first, then positions (then widths/means for the Gaussian
//! mixture, and the six rows of the chirp model).

mod chirp;
mod fri;
mod gauss;
mod point;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{circular_distance, FrequencyGrid, Measurement};
use crate::linalg::spectral_norm;

pub use chirp::{ChirpGrid, ChirpParams};
pub use fri::{order_label, FriOrder, FriParams};
pub use gauss::GaussParams;
pub use point::PointSourceParams;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `max(|lo|, |hi|)`.
    pub fn bound(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub(crate) fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::InvalidModel(format!(
                "{what} interval [{}, {}] is not a finite closed interval",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Point,
    Fri,
    Gauss,
    Chirp,
}

/// What a flattened coordinate means to initialisation and region building.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinateRole {
    /// Linear weight, with its admissible interval.
    Amplitude(Interval),
    /// Location on the unit circle (periodic for point/FRI/Gauss; chirp
    /// centers live in the open interval `(0, 1)`).
    Position,
    /// Positive scale (Gaussian standard deviation, chirp width).
    Width(Interval),
    /// Chirp phase coefficients.
    Phase,
}

/// One source of a model: its position coordinate and amplitude coordinates
/// (indices into the flattened parameter vector).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRef {
    pub position: usize,
    pub amplitudes: Vec<usize>,
}

/// Sources that are interchangeable for matching purposes.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGroup {
    pub label: String,
    pub sources: Vec<SourceRef>,
}

/// A concrete signal model with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelInstance {
    Point(PointSourceParams),
    Fri(FriParams),
    Gauss(GaussParams),
    Chirp(ChirpParams),
}

impl From<PointSourceParams> for ModelInstance {
    fn from(p: PointSourceParams) -> Self {
        ModelInstance::Point(p)
    }
}

impl From<FriParams> for ModelInstance {
    fn from(p: FriParams) -> Self {
        ModelInstance::Fri(p)
    }
}

impl From<GaussParams> for ModelInstance {
    fn from(p: GaussParams) -> Self {
        ModelInstance::Gauss(p)
    }
}

impl From<ChirpParams> for ModelInstance {
    fn from(p: ChirpParams) -> Self {
        ModelInstance::Chirp(p)
    }
}

/// Shifts applied to a parameter vector by [`ModelInstance::project`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Projection {
    /// Coordinates that were redrawn because they left their domain.
    pub reinitialized: Vec<usize>,
}

impl ModelInstance {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelInstance::Point(_) => ModelKind::Point,
            ModelInstance::Fri(_) => ModelKind::Fri,
            ModelInstance::Gauss(_) => ModelKind::Gauss,
            ModelInstance::Chirp(_) => ModelKind::Chirp,
        }
    }

    /// Number of real parameters `m`.
    pub fn dim(&self) -> usize {
        match self {
            ModelInstance::Point(p) => 2 * p.len(),
            ModelInstance::Fri(p) => 2 * p.total_sources(),
            ModelInstance::Gauss(p) => 3 * p.len(),
            ModelInstance::Chirp(p) => 6 * p.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelInstance::Point(p) => p.validate(),
            ModelInstance::Fri(p) => p.validate(),
            ModelInstance::Gauss(p) => p.validate(),
            ModelInstance::Chirp(p) => p.validate(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            ModelInstance::Point(p) => p.flatten(),
            ModelInstance::Fri(p) => p.flatten(),
            ModelInstance::Gauss(p) => p.flatten(),
            ModelInstance::Chirp(p) => p.flatten(),
        }
    }

    /// A copy of this model with its parameters replaced by `theta`.
    /// Shape (counts, intervals, grids) is kept.
    pub fn with_theta(&self, theta: &[f64]) -> Result<ModelInstance> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has length {}, model expects {}",
                theta.len(),
                self.dim()
            )));
        }
        Ok(match self {
            ModelInstance::Point(p) => ModelInstance::Point(p.unflatten(theta)),
            ModelInstance::Fri(p) => ModelInstance::Fri(p.unflatten(theta)),
            ModelInstance::Gauss(p) => ModelInstance::Gauss(p.unflatten(theta)),
            ModelInstance::Chirp(p) => ModelInstance::Chirp(p.unflatten(theta)),
        })
    }

    pub fn roles(&self) -> Vec<CoordinateRole> {
        match self {
            ModelInstance::Point(p) => p.roles(),
            ModelInstance::Fri(p) => p.roles(),
            ModelInstance::Gauss(p) => p.roles(),
            ModelInstance::Chirp(p) => p.roles(),
        }
    }

    pub fn source_groups(&self) -> Vec<SourceGroup> {
        match self {
            ModelInstance::Point(p) => p.source_groups(),
            ModelInstance::Fri(p) => p.source_groups(),
            ModelInstance::Gauss(p) => p.source_groups(),
            ModelInstance::Chirp(p) => p.source_groups(),
        }
    }

    /// Largest admissible amplitude modulus `A_I`.
    pub fn amplitude_bound(&self) -> f64 {
        self.roles()
            .iter()
            .filter_map(|r| match r {
                CoordinateRole::Amplitude(i) => Some(i.bound()),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    /// Sample count the model's own identifiability condition asks for, if
    /// `grid` falls short (point/FRI: `K_L >= n`; Gauss: `2K_L+1 >= 3n`;
    /// masked or chirp grids: at least `m` samples).
    pub fn identifiability_warning(&self, grid: &FrequencyGrid) -> Option<String> {
        let k = grid.k_max();
        let msg = match self {
            ModelInstance::Point(p) if grid.is_full() && k < p.len() => {
                Some(format!("K_L = {k} is below the source count n = {}", p.len()))
            }
            ModelInstance::Fri(p) if grid.is_full() && k < p.total_sources() => Some(format!(
                "K_L = {k} is below the total source count N = {}",
                p.total_sources()
            )),
            ModelInstance::Gauss(p) if grid.is_full() && 2 * k + 1 < 3 * p.len() => {
                Some(format!("2K_L+1 = {} is below 3n = {}", 2 * k + 1, 3 * p.len()))
            }
            _ => None,
        };
        msg.or_else(|| {
            (grid.len() < self.dim()).then(|| format!("{} samples for {} real parameters", grid.len(), self.dim()))
        })
    }

    /// Samples `g_k` on `grid`.
    pub fn forward(&self, grid: &FrequencyGrid) -> Result<Measurement> {
        check_grid(grid)?;
        if let Some(w) = self.identifiability_warning(grid) {
            log::debug!("forward: {w}");
        }
        let values = match self {
            ModelInstance::Point(p) => p.forward(grid),
            ModelInstance::Fri(p) => p.forward(grid),
            ModelInstance::Gauss(p) => p.forward(grid),
            ModelInstance::Chirp(p) => p.forward(grid)?,
        };
        Measurement::new(grid.clone(), values)
    }

    /// Jacobian `dg_k / dtheta_p`, rows in grid order, columns in flattening
    /// order.
    pub fn jacobian(&self, grid: &FrequencyGrid) -> Result<DMatrix<Complex64>> {
        check_grid(grid)?;
        match self {
            ModelInstance::Point(p) => Ok(p.jacobian(grid)),
            ModelInstance::Fri(p) => Ok(p.jacobian(grid)),
            ModelInstance::Gauss(p) => Ok(p.jacobian(grid)),
            ModelInstance::Chirp(p) => p.jacobian(grid),
        }
    }

    /// Per-frequency Hessians `nabla^2 g_k`, one complex symmetric `m x m`
    /// matrix per grid index. Analytic for the point model; central
    /// differences of the analytic Jacobian otherwise.
    pub fn hessians(&self, grid: &FrequencyGrid) -> Result<Vec<DMatrix<Complex64>>> {
        check_grid(grid)?;
        match self {
            ModelInstance::Point(p) => Ok(p.hessians(grid)),
            _ => self.fd_hessians(grid),
        }
    }

    /// Operator norms `xi_k = ||nabla^2 g_k||`.
    ///
    /// The point model uses its analytic Hessian and a dense SVD. The other
    /// models run power iteration on `H^* H`, where products with `H` come
    /// from the finite-difference Hessian; iteration stops when the relative
    /// change of the estimate drops below `1e-6` and fails after 500 steps.
    pub fn hessian_norms(&self, grid: &FrequencyGrid) -> Result<Vec<f64>> {
        let hs = self.hessians(grid)?;
        match self {
            ModelInstance::Point(_) => Ok(hs.iter().map(spectral_norm).collect()),
            _ => grid
                .indices()
                .into_iter()
                .zip(&hs)
                .map(|(k, h)| {
                    power_iteration_norm(h, POWER_TOL, POWER_MAX_ITERS).ok_or(Error::PowerIteration {
                        k,
                        iterations: POWER_MAX_ITERS,
                    })
                })
                .collect(),
        }
    }

    /// Maps a raw iterate back into the parameter domain in place: positions
    /// wrap modulo 1, negative widths are reflected, and chirp centers that
    /// leave `(0, 1)` are redrawn uniformly from `reinit`.
    pub fn project(&self, theta: &mut [f64], reinit: (f64, f64), rng: &mut dyn RngCore) -> Projection {
        let mut out = Projection::default();
        match self {
            ModelInstance::Point(_) | ModelInstance::Fri(_) => {
                for (x, role) in theta.iter_mut().zip(self.roles()) {
                    if role == CoordinateRole::Position {
                        *x = crate::grid::wrap_unit(*x);
                    }
                }
            }
            ModelInstance::Gauss(p) => p.project(theta),
            ModelInstance::Chirp(p) => {
                for i in p.project(theta) {
                    theta[i] = rng.random_range(reinit.0..reinit.1);
                    out.reinitialized.push(i);
                }
            }
        }
        out
    }

    /// Per-coordinate characteristic scales used for finite-difference steps.
    pub fn fd_scales(&self, grid: &FrequencyGrid) -> Vec<f64> {
        let wavelength = 1.0 / (2.0 * PI * grid.k_max().max(1) as f64);
        match self {
            ModelInstance::Point(p) => p
                .flatten()
                .iter()
                .enumerate()
                .map(|(i, a)| if i < p.len() { a.abs().max(1.0) } else { wavelength })
                .collect(),
            ModelInstance::Fri(p) => {
                let n = p.total_sources();
                p.flatten()
                    .iter()
                    .enumerate()
                    .map(|(i, a)| if i < n { a.abs().max(1e-3) } else { wavelength })
                    .collect()
            }
            ModelInstance::Gauss(p) => p.fd_scales(wavelength),
            ModelInstance::Chirp(p) => p.fd_scales(),
        }
    }

    fn fd_hessians(&self, grid: &FrequencyGrid) -> Result<Vec<DMatrix<Complex64>>> {
        let theta = self.flatten();
        let m = theta.len();
        let rows = grid.len();
        let scales = self.fd_scales(grid);
        let mut hs = vec![DMatrix::<Complex64>::zeros(m, m); rows];
        for b in 0..m {
            let eps = FD_HESSIAN_STEP * scales[b];
            let mut plus = theta.clone();
            plus[b] += eps;
            let mut minus = theta.clone();
            minus[b] -= eps;
            let jp = self.with_theta(&plus)?.jacobian(grid)?;
            let jm = self.with_theta(&minus)?.jacobian(grid)?;
            for (r, h) in hs.iter_mut().enumerate() {
                for a in 0..m {
                    h[(a, b)] = (jp[(r, a)] - jm[(r, a)]) / (2.0 * eps);
                }
            }
        }
        for h in &mut hs {
            let sym = (&*h + h.transpose()) * Complex64::new(0.5, 0.0);
            *h = sym;
        }
        Ok(hs)
    }
}

const FD_HESSIAN_STEP: f64 = 1e-4;
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 500;

fn check_grid(grid: &FrequencyGrid) -> Result<()> {
    if grid.step() != 1.0 {
        return Err(Error::InvalidGrid("models are defined on the unit-step grid".into()));
    }
    Ok(())
}

/// `e^{2 pi i t}` with `t` reduced modulo 1 first, which keeps the phase exact
/// for large `|t|`.
#[inline]
pub fn cis_turns(t: f64) -> Complex64 {
    let r = t - t.round();
    let (s, c) = (2.0 * PI * r).sin_cos();
    Complex64::new(c, s)
}

/// `e^{-2 pi i x k}`.
#[inline]
pub(crate) fn fourier_phase(x: f64, k: f64) -> Complex64 {
    cis_turns(-x * k)
}

/// Largest singular value of `h` by power iteration on `h^* h`. Returns `None`
/// when the estimate has not settled to `tol` relative change in `max_iters`.
pub fn power_iteration_norm(h: &DMatrix<Complex64>, tol: f64, max_iters: usize) -> Option<f64> {
    let n = h.ncols();
    if n == 0 {
        return Some(0.0);
    }
    let hh = h.adjoint();
    let mut v = nalgebra::DVector::<Complex64>::from_fn(n, |i, _| {
        Complex64::new(1.0 + 0.37 * i as f64 / n as f64, 0.11 * (i % 3) as f64)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut estimate = 0.0f64;
    for _ in 0..max_iters {
        let w = &hh * (h * &v);
        let nw = w.norm();
        if nw == 0.0 {
            return Some(0.0);
        }
        let next = nw.sqrt();
        v = w / Complex64::new(nw, 0.0);
        if (next - estimate).abs() <= tol * next {
            return Some(next);
        }
        estimate = next;
    }
    None
}

/// Minimum pairwise wrap distance among `xs`, or `None` with fewer than two.
pub fn min_separation(xs: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let d = circular_distance(xs[i], xs[j]);
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}
