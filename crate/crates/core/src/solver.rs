//! Nonlinear least-squares recovery: `phi(theta) = 1/2 ||P(theta) - y||^2`
//! minimised by Nesterov accelerated gradient descent.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap_unit, Measurement};
use crate::models::{CoordinateRole, ModelInstance, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSize {
    /// Backtracking by halving from `1 / ||J(theta_0)||_F^2`.
    Auto,
    Fixed(f64),
}

/// Where escaped chirp centers are redrawn from, and the seed of that draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinitPolicy {
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl Default for ReinitPolicy {
    fn default() -> Self {
        ReinitPolicy {
            lo: 0.0,
            hi: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub step_size: StepSize,
    /// Stop once `phi < tol_residual`.
    pub tol_residual: f64,
    /// Stop once `||grad phi|| < tol_grad`.
    pub tol_grad: f64,
    pub reinit: ReinitPolicy,
    /// Noise level for the admissibility check in the report.
    pub sigma: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 10_000,
            step_size: StepSize::Auto,
            tol_residual: 1e-7,
            tol_grad: 1e-12,
            reinit: ReinitPolicy::default(),
            sigma: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol_residual > 0.0 && self.tol_grad > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if let StepSize::Fixed(h) = self.step_size {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidArgument(format!("step size {h} must be positive")));
            }
        }
        if !(self.reinit.lo < self.reinit.hi) {
            return Err(Error::InvalidArgument("reinit bounds must satisfy lo < hi".into()));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument("sigma must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// `phi` dropped below `tol_residual`.
    Residual,
    /// Gradient norm dropped below `tol_grad`.
    Gradient,
    MaxIters,
    /// No step size produced a decrease, or `phi` stopped changing beyond
    /// rounding for a long run of iterations.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub theta_hat: ModelInstance,
    /// `phi` at the initial point and at every accepted iterate.
    pub objective_history: Vec<f64>,
    pub final_objective: f64,
    /// `||P_L(theta_hat) - y||`.
    pub residual_norm: f64,
    pub grad_norm_final: f64,
    pub iterations: usize,
    pub sigma: Option<f64>,
    /// `residual_norm < sigma` when a `sigma` was supplied.
    pub admissible: Option<bool>,
    pub reinit_count: usize,
    pub status: SolveStatus,
}

fn residual(model: &ModelInstance, theta: &[f64], y: &Measurement) -> Result<(ModelInstance, Vec<Complex64>)> {
    let m = model.with_theta(theta)?;
    let g = m.forward(y.grid())?;
    if g.grid() != y.grid() {
        return Err(Error::GridMismatch("forward grid differs from measurement grid".into()));
    }
    let r = g.values().iter().zip(y.values()).map(|(a, b)| a - b).collect();
    Ok((m, r))
}

fn half_norm_sq(r: &[Complex64]) -> f64 {
    0.5 * r.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `Re{J^* r}`.
fn real_adjoint_apply(j: &DMatrix<Complex64>, r: &[Complex64]) -> Vec<f64> {
    (0..j.ncols())
        .map(|p| j.column(p).iter().zip(r).map(|(a, b)| (a.conj() * b).re).sum())
        .collect()
}

/// `phi(theta) = 1/2 sum_k |g_k(theta) - y_k|^2`.
pub fn objective(model: &ModelInstance, theta: &[f64], y: &Measurement) -> Result<f64> {
    let (_, r) = residual(model, theta, y)?;
    Ok(half_norm_sq(&r))
}

/// `grad phi = Re{conj(J)^T (g(theta) - y)}`.
pub fn gradient(model: &ModelInstance, theta: &[f64], y: &Measurement) -> Result<Vec<f64>> {
    Ok(objective_and_gradient(model, theta, y)?.1)
}

pub fn objective_and_gradient(model: &ModelInstance, theta: &[f64], y: &Measurement) -> Result<(f64, Vec<f64>)> {
    let (m, r) = residual(model, theta, y)?;
    let j = m.jacobian(y.grid())?;
    Ok((half_norm_sq(&r), real_adjoint_apply(&j, &r)))
}

/// `||P(theta) - y|| < sigma`.
pub fn admissible(model: &ModelInstance, theta: &[f64], y: &Measurement, sigma: f64) -> Result<bool> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let (_, r) = residual(model, theta, y)?;
    Ok(norm(&r) < sigma)
}

fn norm(r: &[Complex64]) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Initial guess from a ground truth: every position moves by
/// `±position_offset` (independent fair sign per source), amplitudes go to
/// the midpoint of their interval, widths and phases stay at truth.
/// Periodic positions are wrapped into `[0, 1)`.
pub fn perturb_init<R: Rng + ?Sized>(
    truth: &ModelInstance,
    position_offset: f64,
    rng: &mut R,
) -> Result<ModelInstance> {
    if !(position_offset >= 0.0 && position_offset.is_finite()) {
        return Err(Error::InvalidArgument("position offset must be nonnegative".into()));
    }
    let periodic = truth.kind() != ModelKind::Chirp;
    let mut theta = truth.flatten();
    for (x, role) in theta.iter_mut().zip(truth.roles()) {
        match role {
            CoordinateRole::Amplitude(i) => *x = i.midpoint(),
            CoordinateRole::Position => {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *x += s * position_offset;
                if periodic {
                    *x = wrap_unit(*x);
                }
            }
            CoordinateRole::Width(_) | CoordinateRole::Phase => {}
        }
    }
    truth.with_theta(&theta)
}

/// Objective and gradient at one point.
struct Eval {
    phi: f64,
    grad: Vec<f64>,
    grad_norm: f64,
}

struct Problem<'a> {
    model: &'a ModelInstance,
    y: &'a Measurement,
    periodic: Vec<bool>,
}

impl Problem<'_> {
    fn phi(&self, theta: &[f64]) -> Result<f64> {
        objective(self.model, theta, self.y)
    }

    fn eval(&self, theta: &[f64]) -> Result<Eval> {
        let (phi, grad) = objective_and_gradient(self.model, theta, self.y)?;
        let grad_norm = vec_norm(&grad);
        Ok(Eval { phi, grad, grad_norm })
    }

    /// `a - b` with periodic coordinates taken along the shorter arc.
    fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.periodic)
            .map(|((x, y), &p)| {
                let d = x - y;
                if p {
                    d - d.round()
                } else {
                    d
                }
            })
            .collect()
    }
}

fn finite(e: &Eval) -> bool {
    e.phi.is_finite() && e.grad.iter().all(|g| g.is_finite())
}

const MAX_HALVINGS: usize = 60;
/// Factor applied to the `auto` step after a step accepted without halving.
const STEP_GROWTH: f64 = 1.25;
/// Consecutive iterations without a decrease above rounding level after
/// which the solve is declared stalled.
const STALL_WINDOW: usize = 100;
const REINIT_ATTEMPTS: usize = 16;

/// Nesterov accelerated gradient descent from `model_init` on data `y`.
///
/// Each step is `theta = proj(z - eta grad phi(z))` at the extrapolated point
/// `z`, with the standard momentum schedule `t' = (1 + sqrt(1 + 4 t^2)) / 2`.
/// With [`StepSize::Auto`], `eta` is halved until
/// `phi(theta) <= phi(z) - eta/2 ||grad phi(z)||^2` and grows by a constant
/// factor after a step that needed no halving. If an accepted step
/// would raise `phi` above the previous iterate, momentum restarts (`t = 1`)
/// and a plain gradient step is taken instead, so the recorded history never
/// increases. Chirp centers that leave `(0, 1)` are redrawn from the reinit
/// policy; a redraw is kept only if it does not increase `phi`.
pub fn nesterov_solve(model_init: &ModelInstance, y: &Measurement, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    model_init.validate()?;
    if y.values().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidArgument("measurement contains non-finite values".into()));
    }
    let roles = model_init.roles();
    let periodic_positions = model_init.kind() != ModelKind::Chirp;
    let problem = Problem {
        model: model_init,
        y,
        periodic: roles
            .iter()
            .map(|r| periodic_positions && *r == CoordinateRole::Position)
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.reinit.seed);
    let bounds = (opts.reinit.lo, opts.reinit.hi);

    let mut theta = model_init.flatten();
    let mut current = problem.eval(&theta)?;
    let non_finite = |iteration: usize, theta: &[f64]| -> Error {
        match model_init.with_theta(theta) {
            Ok(m) => Error::NonFinite {
                iteration,
                last_valid: Box::new(m),
            },
            Err(e) => e,
        }
    };
    if !finite(&current) {
        return Err(non_finite(0, &theta));
    }

    let mut eta = match opts.step_size {
        StepSize::Fixed(h) => h,
        StepSize::Auto => {
            let j = model_init.jacobian(y.grid())?;
            let l = j.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if l > 0.0 {
                1.0 / l
            } else {
                1.0
            }
        }
    };
    let backtrack = opts.step_size == StepSize::Auto;

    let mut history = vec![current.phi];
    let mut t = 1.0f64;
    let mut previous = theta.clone();
    let mut reinit_count = 0usize;
    let mut iterations = 0usize;
    let mut flat = 0usize;
    let mut status = SolveStatus::MaxIters;

    // One projected gradient step from `z`; returns the candidate, its
    // objective and the number of accepted center redraws.
    let mut step = |z: &[f64], ez: &Eval, eta: &mut f64, floor: f64| -> Result<Option<(Vec<f64>, f64, usize)>> {
        let g2 = ez.grad_norm * ez.grad_norm;
        for halvings in 0..=MAX_HALVINGS {
            let mut x: Vec<f64> = z.iter().zip(&ez.grad).map(|(a, g)| a - *eta * g).collect();
            let proj = model_init.project(&mut x, bounds, &mut rng);
            let mut phi = problem.phi(&x)?;
            let mut redraws = 0;
            if !proj.reinitialized.is_empty() {
                // Keep the first redraw that does not increase the objective.
                let mut accepted = phi.is_finite() && phi <= floor;
                let mut attempt = 1;
                while !accepted && attempt < REINIT_ATTEMPTS {
                    for &i in &proj.reinitialized {
                        x[i] = rng.random_range(bounds.0..bounds.1);
                    }
                    phi = problem.phi(&x)?;
                    accepted = phi.is_finite() && phi <= floor;
                    attempt += 1;
                }
                if accepted {
                    redraws = proj.reinitialized.len();
                } else {
                    phi = f64::INFINITY;
                }
            }
            let sufficient = phi <= ez.phi - 0.5 * *eta * g2;
            if !backtrack || (sufficient && phi.is_finite()) {
                if backtrack && halvings == 0 {
                    *eta *= STEP_GROWTH;
                }
                return Ok(Some((x, phi, redraws)));
            }
            *eta *= 0.5;
        }
        Ok(None)
    };

    while iterations < opts.max_iters {
        if current.phi < opts.tol_residual {
            status = SolveStatus::Residual;
            break;
        }
        if current.grad_norm < opts.tol_grad {
            status = SolveStatus::Gradient;
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let mut accepted = None;
        if beta > 0.0 {
            let d = problem.difference(&theta, &previous);
            let z: Vec<f64> = theta.iter().zip(&d).map(|(a, b)| a + beta * b).collect();
            let ez = problem.eval(&z)?;
            if finite(&ez) {
                if let Some((x, phi, r)) = step(&z, &ez, &mut eta, current.phi)? {
                    if phi <= current.phi {
                        accepted = Some((x, phi, r, t_next));
                    }
                }
            }
        }
        if accepted.is_none() {
            // Restart: plain gradient step from the current iterate.
            if let Some((x, phi, r)) = step(&theta, &current, &mut eta, current.phi)? {
                if phi <= current.phi {
                    // Momentum restarts from t = 1, whose successor is this.
                    accepted = Some((x, phi, r, 0.5 * (1.0 + 5f64.sqrt())));
                }
            }
        }
        let Some((x, phi, redraws, t_new)) = accepted else {
            status = SolveStatus::Stalled;
            break;
        };
        let next = problem.eval(&x)?;
        if !finite(&next) {
            return Err(non_finite(iterations + 1, &theta));
        }
        if current.phi - next.phi <= 8.0 * f64::EPSILON * current.phi {
            flat += 1;
        } else {
            flat = 0;
        }
        debug_assert!((next.phi - phi).abs() <= 1e-12 * phi.abs().max(1e-300) || !phi.is_finite());
        previous = std::mem::replace(&mut theta, x);
        current = next;
        t = t_new;
        reinit_count += redraws;
        iterations += 1;
        history.push(current.phi);
        if flat >= STALL_WINDOW {
            status = SolveStatus::Stalled;
            break;
        }
    }
    if iterations == opts.max_iters && status == SolveStatus::MaxIters {
        if current.phi < opts.tol_residual {
            status = SolveStatus::Residual;
        } else if current.grad_norm < opts.tol_grad {
            status = SolveStatus::Gradient;
        }
    }

    let theta_hat = model_init.with_theta(&theta)?;
    let residual_norm = (2.0 * current.phi).sqrt();
    let admissible = opts.sigma.map(|s| residual_norm < s);
    log::debug!(
        "nesterov_solve: {:?} after {} iterations, phi = {:.3e}, |grad| = {:.3e}",
        status,
        iterations,
        current.phi,
        current.grad_norm
    );
    Ok(SolveReport {
        theta_hat,
        objective_history: history,
        final_objective: current.phi,
        residual_norm,
        grad_norm_final: current.grad_norm,
        iterations,
        sigma: opts.sigma,
        admissible,
        reinit_count,
        status,
    })
}
