//! Acceptance suite. Every test writes one `criterion N: PASS|FAIL` line to
//! stderr (outside the test harness capture) before asserting.

mod common;

use std::f64::consts::PI;
use std::io::Write as _;

use common::*;
use modelsr::experiments::emit::load_trials_csv;
use modelsr::experiments::summary::Summary;
use modelsr::experiments::{emit, run_scenario, snr_sweep, ExperimentConfig, Format};
use modelsr::grid::{circular_distance, downsample, FrequencyGrid, Measurement};
use modelsr::models::{GaussParams, Interval, PointSourceParams};
use modelsr::render::{dirichlet, extrapolate, synthesize, PhysicalGrid};
use modelsr::solver::{admissible, gradient, nesterov_solve, objective, perturb_init, SolveOptions};
use modelsr::stability::{
    dph_bound_fri, dph_bound_gauss, dph_bound_point, jacobian_frobenius, noise_threshold, objective_hessian, Region,
};
use modelsr::ModelInstance;
use num_complex::Complex64;
use rand::Rng;

const GRADIENT_TOL: f64 = 1e-6;
const JACOBIAN_TOL: f64 = 1e-6;
const HESSIAN_TOL: f64 = 1e-5;
const RECOVERY_RESIDUAL: f64 = 1e-7;
const QUADRATURE_TOL: f64 = 1e-8;
const DIRICHLET_TOL: f64 = 1e-12;
const SYNTHESIS_TOL: f64 = 1e-10;
const PARSEVAL_TOL: f64 = 1e-10;
const CUTOFF_TOL: f64 = 1e-12;

fn report(n: u32, ok: bool, detail: &str) {
    let line = format!("criterion {n}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn low_cutoff(m: &ModelInstance) -> usize {
    if matches!(m, ModelInstance::Chirp(_)) {
        16
    } else {
        10
    }
}

fn noisy_data<R: Rng>(m: &ModelInstance, grid: &FrequencyGrid, rng: &mut R) -> Measurement {
    let clean = m.forward(grid).unwrap();
    let scale = 0.1 * clean.norm() / (grid.len() as f64).sqrt();
    let w = random_measurement(rng, grid).scale(scale);
    clean.add(&w).unwrap()
}

/// Relative error of an analytic gradient against central differences,
/// taking the best step per coordinate.
fn gradient_error(m: &ModelInstance, y: &Measurement) -> f64 {
    let theta = m.flatten();
    let g = gradient(m, &theta, y).unwrap();
    let scales = m.fd_scales(y.grid());
    let mut err2 = 0.0;
    for p in 0..theta.len() {
        let best = FD_STEPS
            .iter()
            .map(|h| {
                let h = h * scales[p];
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[p] += h;
                minus[p] -= h;
                let fd = (objective(m, &plus, y).unwrap() - objective(m, &minus, y).unwrap()) / (2.0 * h);
                (fd - g[p]).abs()
            })
            .fold(f64::INFINITY, f64::min);
        err2 += best * best;
    }
    err2.sqrt() / g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300)
}

#[test]
fn criterion_1_gradient_matches_finite_differences() {
    let mut r = rng(101);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        for (i, m) in all_models(&mut r).into_iter().enumerate() {
            let y = noisy_data(&m, &FrequencyGrid::full(low_cutoff(&m)), &mut r);
            worst[i] = worst[i].max(gradient_error(&m, &y));
        }
    }
    let ok = worst.iter().all(|&e| e < GRADIENT_TOL);
    report(
        1,
        ok,
        &format!("worst relative error point/fri/gauss/chirp = {}", sci(&worst)),
    );
    assert!(ok);
}

fn jacobian_error(m: &ModelInstance, grid: &FrequencyGrid) -> f64 {
    let j = m.jacobian(grid).unwrap();
    let theta = m.flatten();
    let scales = m.fd_scales(grid);
    let f = |t: &[f64]| m.with_theta(t).unwrap().forward(grid).unwrap().into_values();
    (0..theta.len())
        .map(|p| {
            let col: Vec<Complex64> = j.column(p).iter().copied().collect();
            let norm = vec_norm(&col).max(1e-12);
            FD_STEPS
                .iter()
                .map(|h| vec_diff_norm(&col, &central_difference(&theta, p, h * scales[p], f)) / norm)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Relative Frobenius error of the point-model objective Hessian against
/// central differences of the analytic gradient.
fn hessian_error(m: &ModelInstance, y: &Measurement) -> f64 {
    let h = objective_hessian(m, y).unwrap();
    let theta = m.flatten();
    let scales = m.fd_scales(y.grid());
    let mut err2 = 0.0;
    for p in 0..theta.len() {
        let col: Vec<f64> = h.column(p).iter().copied().collect();
        let best = FD_STEPS
            .iter()
            .map(|step| {
                let step = step * scales[p];
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[p] += step;
                minus[p] -= step;
                let gp = gradient(m, &plus, y).unwrap();
                let gm = gradient(m, &minus, y).unwrap();
                col.iter()
                    .zip(gp.iter().zip(&gm))
                    .map(|(c, (a, b))| (c - (a - b) / (2.0 * step)).powi(2))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        err2 += best;
    }
    err2.sqrt() / h.norm().max(1e-300)
}

#[test]
fn criterion_2_jacobian_and_hessian_match_finite_differences() {
    let mut r = rng(202);
    let mut jac = 0.0f64;
    let mut hess = 0.0f64;
    for _ in 0..20 {
        for m in all_models(&mut r) {
            jac = jac.max(jacobian_error(&m, &FrequencyGrid::full(low_cutoff(&m))));
        }
        let m = random_point(&mut r, 3);
        let y = noisy_data(&m, &FrequencyGrid::full(10), &mut r);
        hess = hess.max(hessian_error(&m, &y));
    }
    let ok = jac < JACOBIAN_TOL && hess < HESSIAN_TOL;
    report(2, ok, &format!("Jacobian {jac:.2e}, point Hessian {hess:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_3_sub_rayleigh_noiseless_recovery() {
    let k_low = 5;
    let sep = 1.0 / (2.0 * k_low as f64) / 100.0;
    let (x1, x2) = (0.4, 0.4 + sep);
    let amps = Interval::new(0.5, 2.0);
    let truth: ModelInstance = PointSourceParams::new(vec![1.0, 1.0], vec![x1, x2], amps)
        .unwrap()
        .into();
    let init: ModelInstance = PointSourceParams::new(vec![1.0, 1.0], vec![x1 - 0.5 * sep, x2 + 0.5 * sep], amps)
        .unwrap()
        .into();
    let y = truth.forward(&FrequencyGrid::full(k_low)).unwrap();
    let opts = SolveOptions {
        max_iters: 200_000,
        tol_residual: 1e-16,
        tol_grad: 1e-15,
        ..SolveOptions::default()
    };
    let rep = nesterov_solve(&init, &y, &opts).unwrap();
    let ModelInstance::Point(p) = &rep.theta_hat else {
        unreachable!()
    };
    let mut x = p.positions.clone();
    x.sort_by(f64::total_cmp);
    let err = circular_distance(x[0], x1).max(circular_distance(x[1], x2));
    let ok = rep.final_objective <= RECOVERY_RESIDUAL && err < sep / 10.0;
    report(
        3,
        ok,
        &format!(
            "phi {:.2e} after {} iterations, position error {err:.2e} vs separation {sep:.0e}",
            rep.final_objective, rep.iterations
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_downsampling_commutes_with_extrapolation() {
    let mut r = rng(404);
    let mut mismatches = 0;
    for _ in 0..1000 {
        for m in all_models(&mut r) {
            let k_low = low_cutoff(&m);
            let k_high = if matches!(m, ModelInstance::Chirp(_)) {
                63
            } else {
                k_low + r.random_range(0..60)
            };
            let high = extrapolate(&m, k_high).unwrap().measurement;
            let low = m.forward(&FrequencyGrid::full(k_low)).unwrap();
            if downsample(&high, k_low).unwrap() != low {
                mismatches += 1;
            }
        }
    }
    let ok = mismatches == 0;
    report(4, ok, &format!("{mismatches} of 4000 instances differ"));
    assert!(ok);
}

#[test]
fn criterion_5_closed_forms_match_oracles() {
    let mut r = rng(505);
    let mut quad = 0.0f64;
    for _ in 0..5 {
        let m = random_gauss(&mut r, 2);
        let ModelInstance::Gauss(p) = &m else { unreachable!() };
        let g = m.forward(&FrequencyGrid::full(10)).unwrap();
        for (k, v) in g.iter() {
            let q: Complex64 = (0..p.len())
                .map(|j| {
                    let (w, s, mu) = (p.weights[j], p.widths[j], p.means[j]);
                    integrate(
                        |x| w * (-(x - mu).powi(2) / (2.0 * s * s)).exp() * fourier_kernel(k as f64, x),
                        mu - 12.0 * s,
                        mu + 12.0 * s,
                        1e-14,
                    )
                })
                .sum();
            quad = quad.max((v - q).norm());
        }
    }

    let mut dir = 0.0f64;
    for _ in 0..2000 {
        let k = r.random_range(0..40usize);
        let x: f64 = r.random_range(-1.0..1.0);
        let direct: f64 = (-(k as i64)..=k as i64).map(|j| (2.0 * PI * j as f64 * x).cos()).sum();
        dir = dir.max((dirichlet(k, x) - direct).abs());
    }

    let mut syn = 0.0f64;
    let mut parseval = 0.0f64;
    for _ in 0..20 {
        let k = r.random_range(0..40usize);
        let y = random_measurement(&mut r, &FrequencyGrid::full(k));
        let grid = PhysicalGrid::new(2 * k + 1 + r.random_range(0..40)).unwrap();
        let s = synthesize(&y, &grid).unwrap();
        for (x, v) in grid.points().iter().zip(&s) {
            let direct: Complex64 = y.iter().map(|(k, g)| g * fourier_kernel(-(k as f64), *x)).sum();
            syn = syn.max((v - direct).norm());
        }
        let energy = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.size() as f64;
        parseval = parseval.max(rel_err(energy, y.norm().powi(2)));
    }

    let ok = quad < QUADRATURE_TOL && dir < DIRICHLET_TOL && syn < SYNTHESIS_TOL && parseval < PARSEVAL_TOL;
    report(
        5,
        ok,
        &format!("quadrature {quad:.1e}, Dirichlet {dir:.1e}, synthesis {syn:.1e}, Parseval {parseval:.1e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_6_jacobian_bounds_dominate() {
    let k_high = 40;
    let high = FrequencyGrid::full(k_high);
    let mut r = rng(606);
    let mut violations = 0;
    let mut draws = 0;
    for kind in 0..3 {
        for _ in 0..200 {
            let truth = match kind {
                0 => random_point(&mut r, 3),
                1 => random_fri(&mut r),
                _ => random_gauss(&mut r, 2),
            };
            let region = Region::around(&truth).unwrap();
            let theta = truth.with_theta(&region.sample(&mut r)).unwrap();
            let bound = match &theta {
                ModelInstance::Point(p) => dph_bound_point(p.len(), k_high, theta.amplitude_bound()),
                ModelInstance::Fri(p) => dph_bound_fri(&p.counts(), k_high, theta.amplitude_bound()).unwrap(),
                ModelInstance::Gauss(p) => dph_bound_gauss(p, k_high),
                ModelInstance::Chirp(_) => unreachable!(),
            };
            draws += 1;
            if jacobian_frobenius(&theta, &high).unwrap() > bound {
                violations += 1;
            }
        }
    }

    // K_H-independence of the mixture bound above 3 / (2 pi s_min).
    let mut worst_cutoff = 0.0f64;
    for _ in 0..50 {
        let m = random_gauss(&mut r, 2);
        let ModelInstance::Gauss(p) = &m else { unreachable!() };
        let s_min = p.widths.iter().copied().fold(f64::INFINITY, f64::min);
        let cutoff = (3.0 / (2.0 * PI * s_min)).floor() as usize + 1;
        for k in [cutoff, 2 * cutoff, 4 * cutoff] {
            worst_cutoff = worst_cutoff.max(rel_err(dph_bound_gauss(p, k), dph_bound_gauss(p, 2 * k)));
        }
    }
    // The same check on one fixed mixture, for the record.
    let fixed = GaussParams::new(
        vec![1.0],
        vec![0.01],
        vec![0.5],
        Interval::new(0.5, 2.0),
        Interval::new(0.005, 0.1),
    )
    .unwrap();
    let c = (3.0 / (2.0 * PI * 0.01)).floor() as usize + 1;
    let fixed_diff = rel_err(dph_bound_gauss(&fixed, c), dph_bound_gauss(&fixed, 2 * c));

    let ok = violations == 0 && worst_cutoff < CUTOFF_TOL;
    report(
        6,
        ok,
        &format!(
            "{violations} of {draws} draws exceed C'; Gauss C' change K_H to 2 K_H above the cutoff {worst_cutoff:.1e} \
             (s = 0.01: {fixed_diff:.1e})"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_small_noise_gives_admissible_convex_solutions() {
    let k_low = 10;
    let grid = FrequencyGrid::full(k_low);
    let truth: ModelInstance =
        PointSourceParams::new(vec![1.2, 1.5, 1.8], vec![0.2, 0.5, 0.75], Interval::new(1.0, 2.0))
            .unwrap()
            .into();
    let clean = truth.forward(&grid).unwrap();
    let threshold = noise_threshold(&truth, &grid).unwrap();
    let mut r = rng(707);
    let mut failures = Vec::new();
    let mut min_lambda = f64::INFINITY;
    for draw in 0..50 {
        let w = random_measurement(&mut r, &grid);
        let w = w.scale(0.5 * threshold / w.norm());
        let y = clean.add(&w).unwrap();
        let init = perturb_init(&truth, 0.01, &mut r).unwrap();
        let opts = SolveOptions {
            max_iters: 50_000,
            tol_grad: 1e-12,
            sigma: Some(w.norm()),
            ..SolveOptions::default()
        };
        let rep = nesterov_solve(&init, &y, &opts).unwrap();
        let below = w.norm() < noise_threshold(&rep.theta_hat, &grid).unwrap();
        let adm = admissible(&rep.theta_hat, &rep.theta_hat.flatten(), &y, w.norm()).unwrap();
        let (lambda, _) = modelsr::linalg::symmetric_extremes(&objective_hessian(&rep.theta_hat, &y).unwrap());
        min_lambda = min_lambda.min(lambda);
        if !(below && adm && lambda > 0.0) {
            failures.push(draw);
        }
    }
    let ok = failures.is_empty();
    report(
        7,
        ok,
        &format!("threshold {threshold:.2e}, failing draws {failures:?}, smallest lambda_min {min_lambda:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_stability_inequality_holds_on_point_groups() {
    let out = run_scenario(&ExperimentConfig::point_groups()).unwrap();
    let checks: Vec<_> = out.trials.iter().flat_map(|t| t.stability.iter()).collect();
    let failed = out.trials.iter().filter(|t| t.failed()).count();
    let violated = checks.iter().filter(|c| !c.ok).count();
    let worst = checks.iter().map(|c| c.hi_err / c.bound).fold(0.0, f64::max);
    let ok = failed == 0 && violated == 0 && checks.len() == out.trials.len() * out.config.k_high.len();
    report(
        8,
        ok,
        &format!(
            "{violated} of {} checks violated, {failed} failed trials, worst ratio {worst:.2e}",
            checks.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_9_presets_run_and_error_falls_with_snr() {
    let dir = tempfile::tempdir().unwrap();
    let mut missing = Vec::new();
    let mut failed = 0;
    for name in ["point-groups", "multipole", "chirp"] {
        let config = ExperimentConfig::preset(name).unwrap();
        let out = run_scenario(&config).unwrap();
        failed += out.trials.iter().filter(|t| t.failed()).count();
        let files = emit(&out, Format::All, &dir.path().join(name)).unwrap();
        let svgs = files
            .iter()
            .filter(|p| p.extension().is_some_and(|e| e == "svg"))
            .count();
        for f in [
            "trials.csv",
            "summary.json",
            "position_errors.svg",
            "amplitude_errors.svg",
        ] {
            if !files.iter().any(|p| p.ends_with(f)) {
                missing.push(format!("{name}/{f}"));
            }
        }
        if svgs < 3 {
            missing.push(format!("{name}: reconstruction figures"));
        }
    }

    let sweep = snr_sweep(&ExperimentConfig::point_groups(), &[10.0, 20.0, 30.0]).unwrap();
    let medians: Vec<f64> = sweep
        .iter()
        .map(|o| Summary::pooled_position_median(&o.trials).unwrap_or(f64::NAN))
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let ok = missing.is_empty() && failed == 0 && decreasing;
    report(
        9,
        ok,
        &format!(
            "missing {missing:?}, {failed} failed trials, median position error at 10/20/30 dB = {}",
            sci(&medians)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::point_groups();
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = run_scenario(&config).unwrap();
        let path = dir.path().join(run);
        emit(&out, Format::Csv, &path).unwrap();
        bytes.push(std::fs::read(path.join("trials.csv")).unwrap());
    }
    let parsed = load_trials_csv(&dir.path().join("a").join("trials.csv")).unwrap();
    let ok = bytes[0] == bytes[1] && parsed.len() == config.trials;
    report(
        10,
        ok,
        &format!("{} bytes, identical = {}", bytes[0].len(), bytes[0] == bytes[1]),
    );
    assert!(ok);
}
