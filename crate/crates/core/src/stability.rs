//! Operator-norm bounds for the high-frequency Jacobian, local convexity
//! certificates, noise thresholds and empirical Lipschitz ratios.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, Measurement};
use crate::linalg::{min_singular_value, spectral_norm, symmetric_extremes};
use crate::models::{min_separation, CoordinateRole, GaussParams, Interval, ModelInstance};

/// `C'` with
/// `C'^2 = (2K_H+1) n + (4 n pi^2 A^2 / 3) K_H (K_H+1) (2K_H+1)`.
pub fn dph_bound_point(n: usize, k_high: usize, a_bound: f64) -> f64 {
    let n = n as f64;
    let k = k_high as f64;
    ((2.0 * k + 1.0) * n + 4.0 * n * PI * PI * a_bound * a_bound / 3.0 * k * (k + 1.0) * (2.0 * k + 1.0)).sqrt()
}

/// `C'` for derivatives of Diracs,
/// `C'^2 = sum_{|k| <= K} sum_r n_r (2 pi k)^{2r} (1 + 4 pi^2 k^2 A^2)`,
/// with `K = K_H`.
pub fn dph_bound_fri(counts: &[usize], k_high: usize, a_bound: f64) -> Result<f64> {
    fri_bound_sum(counts, k_high, a_bound)
}

/// The same double sum restricted to `|k| <= K_L`, as the bound is printed.
pub fn dph_bound_fri_low_range(counts: &[usize], k_low: usize, a_bound: f64) -> Result<f64> {
    fri_bound_sum(counts, k_low, a_bound)
}

/// Sums in log space so that large `R K` stays representable until the
/// final result itself is not.
fn fri_bound_sum(counts: &[usize], k_max: usize, a_bound: f64) -> Result<f64> {
    let mut logs = Vec::new();
    for k in -(k_max as i64)..=k_max as i64 {
        let kf = k as f64;
        let tail = (4.0 * PI * PI * kf * kf * a_bound * a_bound).ln_1p();
        for (r, &n) in counts.iter().enumerate() {
            if n == 0 || (k == 0 && r > 0) {
                continue;
            }
            let deriv = if r == 0 {
                0.0
            } else {
                2.0 * r as f64 * (2.0 * PI * kf.abs()).ln()
            };
            logs.push((n as f64).ln() + deriv + tail);
        }
    }
    if logs.is_empty() {
        return Ok(0.0);
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    let c = (0.5 * lse).exp();
    if !c.is_finite() {
        return Err(Error::Overflow(format!(
            "FRI bound with R = {} and K = {k_max}",
            counts.len().saturating_sub(1)
        )));
    }
    Ok(c)
}

/// One term `(w^2 + s^2 + 16 pi^4 w^2 s^4 k^4 + 4 pi^2 w^2 s^2 k^2) e^{-4 pi^2 s^2 k^2}`
/// of the mixture series.
pub fn gauss_series_term(w: f64, s: f64, k: f64) -> f64 {
    gauss_term_split(w, s, s, k)
}

/// The term with its polynomial factor at width `s_poly` and its decay at
/// `s_decay`; with `s_poly >= s >= s_decay` this dominates the term at `s`.
fn gauss_term_split(w: f64, s_poly: f64, s_decay: f64, k: f64) -> f64 {
    let (w2, s2, k2) = (w * w, s_poly * s_poly, k * k);
    let p = w2 + s2 + 16.0 * PI.powi(4) * w2 * s2 * s2 * k2 * k2 + 4.0 * PI * PI * w2 * s2 * k2;
    p * (-4.0 * PI * PI * s_decay * s_decay * k2).exp()
}

/// Sums `term(k)` over `|k| <= k_high`, stopping once past the peak of the
/// series the new terms fall below `1e-16` of the running sum.
fn gauss_series(k_high: usize, peak: f64, term: impl Fn(f64) -> f64) -> f64 {
    let mut sum = term(0.0);
    for k in 1..=k_high {
        let kf = k as f64;
        let t = 2.0 * term(kf);
        sum += t;
        if kf > peak && t < 1e-16 * sum {
            break;
        }
    }
    sum
}

/// The mixture series `S = sum_j sum_{|k| <= K_H} term_j(k)` at the given
/// parameters, without the transform's `2 pi` factor.
pub fn gauss_series_sum(params: &GaussParams, k_high: usize) -> f64 {
    (0..params.len())
        .map(|j| {
            let (w, s) = (params.weights[j], params.widths[j]);
            gauss_series(k_high, 1.0 / (2.0 * PI * s), |k| gauss_series_term(w, s, k))
        })
        .sum()
}

/// `C' = sqrt(2 pi S)` for the Gaussian mixture at `params`.
///
/// The `2 pi` restores the squared `sqrt(2 pi)` prefactor of `g_k`; without
/// it the series alone does not dominate `||DP_H||_F` (already at `k = 0`).
pub fn dph_bound_gauss(params: &GaussParams, k_high: usize) -> f64 {
    (2.0 * PI * gauss_series_sum(params, k_high)).sqrt()
}

/// `C'` valid for every parameter in `region` (a Gaussian-mixture box):
/// each term is bounded by its weight and polynomial at the box maximum and
/// its decay at the smallest width.
pub fn dph_bound_gauss_region(region: &Region, n: usize, k_high: usize) -> f64 {
    let sum: f64 = (0..n)
        .map(|j| {
            let w = region.lo[j].abs().max(region.hi[j].abs());
            let (s_lo, s_hi) = (region.lo[n + j].max(0.0), region.hi[n + j]);
            let peak = 1.0 / (2.0 * PI * s_lo.max(1e-300));
            gauss_series(k_high, peak, |k| gauss_term_split(w, s_hi, s_lo, k))
        })
        .sum();
    (2.0 * PI * sum).sqrt()
}

/// `C'` for `model` on the grid `|k| <= k_high`: the point and FRI bounds
/// use the amplitude bound `A_I`; the mixture bound is evaluated at the
/// model's parameters.
pub fn dph_bound(model: &ModelInstance, k_high: usize) -> Result<f64> {
    match model {
        ModelInstance::Point(p) => Ok(dph_bound_point(p.len(), k_high, model.amplitude_bound())),
        ModelInstance::Fri(p) => dph_bound_fri(&p.counts(), k_high, model.amplitude_bound()),
        ModelInstance::Gauss(p) => Ok(dph_bound_gauss(p, k_high)),
        ModelInstance::Chirp(_) => Err(Error::InvalidArgument("no Jacobian bound for the chirp model".into())),
    }
}

/// `C'` valid on a whole region around `model`'s parameters.
pub fn dph_bound_on(model: &ModelInstance, region: &Region, k_high: usize) -> Result<f64> {
    match model {
        ModelInstance::Gauss(p) => Ok(dph_bound_gauss_region(region, p.len(), k_high)),
        _ => dph_bound(model, k_high),
    }
}

/// `||DP(theta)||_F` on `grid`.
pub fn jacobian_frobenius(model: &ModelInstance, grid: &FrequencyGrid) -> Result<f64> {
    let j = model.jacobian(grid)?;
    Ok(j.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

/// `nabla^2 phi = Re{J^* J + sum_k r_k conj(nabla^2 g_k)}` with `r = g - y`.
pub fn objective_hessian(model: &ModelInstance, y: &Measurement) -> Result<DMatrix<f64>> {
    let grid = y.grid();
    let g = model.forward(grid)?;
    let j = model.jacobian(grid)?;
    let hs = model.hessians(grid)?;
    let mut h = (j.adjoint() * &j).map(|z| z.re);
    for ((gk, yk), hk) in g.values().iter().zip(y.values()).zip(&hs) {
        let r = gk - yk;
        if r.norm_sqr() == 0.0 {
            continue;
        }
        h += hk.map(|z| (r * z.conj()).re);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    /// Extreme eigenvalues of `nabla^2 phi` at the point.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `sigma_min(DP_L)`.
    pub sigma_min_jacobian: f64,
    /// `||xi||` with `xi_k = ||nabla^2 g_k||`.
    pub xi_norm: f64,
    /// `sigma_min(DP_L)^2 / ||xi||`.
    pub threshold: f64,
}

/// Hessian spectrum of `phi` at `theta_hat` against `y`, plus the noise level
/// below which the objective is locally strongly convex there.
pub fn convexity_certificate(theta_hat: &ModelInstance, y: &Measurement) -> Result<ConvexityCertificate> {
    let h = objective_hessian(theta_hat, y)?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("objective Hessian has non-finite entries".into()));
    }
    let (lambda_min, lambda_max) = symmetric_extremes(&h);
    if !(lambda_min.is_finite() && lambda_max.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalues".into()));
    }
    let (sigma_min_jacobian, xi_norm) = noise_threshold_parts(theta_hat, y.grid())?;
    let threshold = if xi_norm > 0.0 {
        sigma_min_jacobian * sigma_min_jacobian / xi_norm
    } else {
        f64::INFINITY
    };
    Ok(ConvexityCertificate {
        lambda_min,
        lambda_max,
        sigma_min_jacobian,
        xi_norm,
        threshold,
    })
}

/// `sigma_min(DP_L)^2 / ||xi||` at `theta` on `grid`.
pub fn noise_threshold(theta: &ModelInstance, grid: &FrequencyGrid) -> Result<f64> {
    let (s, xi) = noise_threshold_parts(theta, grid)?;
    Ok(if xi > 0.0 { s * s / xi } else { f64::INFINITY })
}

fn noise_threshold_parts(theta: &ModelInstance, grid: &FrequencyGrid) -> Result<(f64, f64)> {
    let j = theta.jacobian(grid)?;
    let xi = theta.hessian_norms(grid)?;
    Ok((min_singular_value(&j), xi.iter().map(|v| v * v).sum::<f64>().sqrt()))
}

/// Axis-aligned box of raw (unwrapped) parameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Position radius used when a model has a single source and the minimum
/// separation is undefined.
pub const SINGLE_SOURCE_RADIUS: f64 = 0.25;

impl Region {
    /// The neighbourhood `U` of `truth`: amplitudes in `B(a, |a|/2) ∩ I`,
    /// positions in `B(x, Delta)` with `Delta` half the minimum wrap
    /// separation (per derivative order for FRI), mixture widths in
    /// `B(s, s/2) ∩ I_2`.
    pub fn around(truth: &ModelInstance) -> Result<Region> {
        let center = truth.flatten();
        let roles = truth.roles();
        let mut delta = vec![0.0; center.len()];
        let radius = |xs: &[f64]| -> f64 {
            min_separation(xs)
                .map(|d| 0.5 * d)
                .unwrap_or(SINGLE_SOURCE_RADIUS)
                .min(SINGLE_SOURCE_RADIUS)
        };
        match truth {
            ModelInstance::Point(p) => {
                let r = radius(&p.positions);
                delta[p.len()..].fill(r);
            }
            ModelInstance::Fri(p) => {
                let n = p.total_sources();
                let mut at = n;
                for o in &p.orders {
                    let r = radius(&o.positions);
                    delta[at..at + o.len()].fill(r);
                    at += o.len();
                }
            }
            ModelInstance::Gauss(p) => {
                let r = radius(&p.means);
                delta[2 * p.len()..].fill(r);
            }
            ModelInstance::Chirp(_) => {
                return Err(Error::InvalidArgument(
                    "no stability region is defined for the chirp model".into(),
                ))
            }
        }
        let mut lo = Vec::with_capacity(center.len());
        let mut hi = Vec::with_capacity(center.len());
        for ((c, role), d) in center.iter().zip(&roles).zip(&delta) {
            let ball = |r: f64| Interval::new(c - r, c + r);
            let iv = match role {
                CoordinateRole::Amplitude(i) => ball(0.5 * c.abs()).intersect(i),
                CoordinateRole::Width(i) => ball(0.5 * c.abs()).intersect(i),
                CoordinateRole::Position => ball(*d),
                CoordinateRole::Phase => ball(0.0),
            };
            if iv.lo > iv.hi {
                return Err(Error::InvalidModel(format!(
                    "parameter {c} lies outside its admissible interval"
                )));
            }
            lo.push(iv.lo);
            hi.push(iv.hi);
        }
        Ok(Region { center, lo, hi })
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| x >= a && x <= b)
    }

    /// Uniform draw from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a < b { rng.random_range(a..=b) } else { a })
            .collect()
    }
}

/// Ratios observed over random pairs `(theta, theta')` drawn in a region.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSample {
    /// Pairs evaluated (identical pairs are skipped).
    pub pairs: usize,
    /// `max ||theta - theta'|| / ||P_L(theta) - P_L(theta')||`, a lower bound
    /// on `C_U`.
    pub c_u: f64,
    /// `max ||P_H(theta) - P_H(theta')|| / ||P_L(theta) - P_L(theta')||`.
    pub c_u_high: f64,
    /// `max ||P_H(theta) - P_H(theta')|| / ||theta - theta'||`, which a valid
    /// `C'` must dominate.
    pub high_over_param: f64,
    /// Per pair `||P_H(theta) - P_H(theta')|| / ||P_L(theta) - P_L(theta')||`.
    pub high_low_ratios: Vec<f64>,
}

/// Draws `samples` pairs uniformly in `region` and records Lipschitz ratios
/// between parameter, low- and high-frequency distances. Pair `i` uses its
/// own ChaCha stream `i` of `seed`, so the result does not depend on thread
/// scheduling.
pub fn empirical_lipschitz(
    model: &ModelInstance,
    region: &Region,
    k_low: usize,
    k_high: usize,
    samples: usize,
    seed: u64,
) -> Result<LipschitzSample> {
    if k_low > k_high {
        return Err(Error::InvalidArgument(format!("K_L = {k_low} exceeds K_H = {k_high}")));
    }
    let high = FrequencyGrid::full(k_high);
    let per_pair: Vec<Option<(f64, f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<Option<(f64, f64, f64)>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let a = region.sample(&mut rng);
            let b = region.sample(&mut rng);
            pair_ratios(model, &a, &b, &high, k_low)
        })
        .collect::<Result<_>>()?;
    let mut out = LipschitzSample::default();
    for (dp, lo, hi) in per_pair.into_iter().flatten() {
        out.pairs += 1;
        out.c_u = out.c_u.max(dp / lo);
        out.c_u_high = out.c_u_high.max(hi / lo);
        out.high_over_param = out.high_over_param.max(hi / dp);
        out.high_low_ratios.push(hi / lo);
    }
    Ok(out)
}

/// `(||theta - theta'||, ||P_L diff||, ||P_H diff||)`, or `None` for a
/// degenerate pair.
pub fn pair_ratios(
    model: &ModelInstance,
    a: &[f64],
    b: &[f64],
    high: &FrequencyGrid,
    k_low: usize,
) -> Result<Option<(f64, f64, f64)>> {
    let dp = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    if dp == 0.0 {
        return Ok(None);
    }
    let ga = model.with_theta(a)?.forward(high)?;
    let gb = model.with_theta(b)?.forward(high)?;
    let diff = ga.sub(&gb)?;
    let hi = diff.norm();
    let lo = crate::grid::downsample(&diff, k_low)?.norm();
    if lo == 0.0 {
        return Ok(None);
    }
    Ok(Some((dp, lo, hi)))
}

/// Everything the stability and convexity theory says about one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Bound on `||DP_H||_op` via the Frobenius norm.
    pub c_prime: f64,
    /// `||DP_H(theta_hat)||_op` computed numerically, for tightness.
    pub jacobian_high_spectral: f64,
    pub sigma_min_jacobian: f64,
    pub xi_norm: f64,
    pub noise_threshold: f64,
    pub hessian_lambda_min: f64,
    pub hessian_lambda_max: f64,
    /// Empirical `C_U` (lower bound) and its sample count.
    pub c_u_empirical: f64,
    pub lipschitz_pairs: usize,
    pub lipschitz_ratio_samples: Vec<f64>,
}

/// Full report at `theta_hat` for data `y` on the low grid. Region-based
/// quantities are computed around `theta_hat`.
pub fn stability_report(
    theta_hat: &ModelInstance,
    y: &Measurement,
    k_high: usize,
    samples: usize,
    seed: u64,
) -> Result<StabilityReport> {
    let k_low = y.grid().k_max();
    let cert = convexity_certificate(theta_hat, y)?;
    let region = Region::around(theta_hat)?;
    let c_prime = dph_bound_on(theta_hat, &region, k_high)?;
    let j_high = theta_hat.jacobian(&FrequencyGrid::full(k_high))?;
    let lip = empirical_lipschitz(theta_hat, &region, k_low, k_high, samples, seed)?;
    Ok(StabilityReport {
        c_prime,
        jacobian_high_spectral: spectral_norm(&j_high),
        sigma_min_jacobian: cert.sigma_min_jacobian,
        xi_norm: cert.xi_norm,
        noise_threshold: cert.threshold,
        hessian_lambda_min: cert.lambda_min,
        hessian_lambda_max: cert.lambda_max,
        c_u_empirical: lip.c_u,
        lipschitz_pairs: lip.pairs,
        lipschitz_ratio_samples: lip.high_low_ratios,
    })
}

/// `||P_H(theta_hat) - P_H(theta*)|| <= 2 C' C_U sigma`: returns the left
/// side and the right side.
pub fn stability_check(
    theta_hat: &ModelInstance,
    truth: &ModelInstance,
    k_high: usize,
    c_prime: f64,
    c_u: f64,
    sigma: f64,
) -> Result<(f64, f64)> {
    let grid = FrequencyGrid::full(k_high);
    let lhs = theta_hat.forward(&grid)?.sub(&truth.forward(&grid)?)?.norm();
    Ok((lhs, 2.0 * c_prime * c_u * sigma))
}
