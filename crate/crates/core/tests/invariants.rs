mod common;

use common::*;
use modelsr::experiments::noise::gen_noise;
use modelsr::grid::{circular_distance, downsample, FrequencyGrid};
use modelsr::models::{CoordinateRole, FriOrder, FriParams};
use modelsr::render::{dirichlet, extrapolate, synthesize, PhysicalGrid};
use modelsr::solver::{admissible, nesterov_solve, objective, perturb_init, SolveOptions, SolveStatus};
use modelsr::stability::{dph_bound_gauss, dph_bound_on, pair_ratios, Region};
use modelsr::ModelInstance;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn model_of_kind(kind: usize, seed: u64) -> ModelInstance {
    let mut r = rng(seed);
    match kind {
        0 => random_point(&mut r, 1 + (seed % 5) as usize),
        1 => random_fri(&mut r),
        2 => random_gauss(&mut r, 1 + (seed % 3) as usize),
        _ => random_chirp(&mut r, 1 + (seed % 3) as usize),
    }
}

fn amplitude_mask(m: &ModelInstance) -> Vec<bool> {
    m.roles()
        .iter()
        .map(|r| matches!(r, CoordinateRole::Amplitude(_)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn downsampling_the_high_grid_gives_the_low_grid(kind in 0usize..4, seed: u64, k_low in 0usize..12, extra in 0usize..20) {
        let m = model_of_kind(kind, seed);
        let k_high = k_low + extra;
        let k_high = if kind == 3 { k_high.min(63) } else { k_high };
        let k_low = k_low.min(k_high);
        let low = m.forward(&FrequencyGrid::full(k_low)).unwrap();
        let high = m.forward(&FrequencyGrid::full(k_high)).unwrap();
        prop_assert_eq!(downsample(&high, k_low).unwrap(), low);
    }

    #[test]
    fn repeated_downsampling_composes(seed: u64, k1 in 0usize..30, k2 in 0usize..30) {
        let (k1, k2) = (k1.max(k2), k1.min(k2));
        let y = random_measurement(&mut rng(seed), &FrequencyGrid::full(40));
        let twice = downsample(&downsample(&y, k1).unwrap(), k2).unwrap();
        prop_assert_eq!(twice, downsample(&y, k2).unwrap());
    }

    #[test]
    fn wrap_distance_is_a_metric(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let d = circular_distance;
        prop_assert_eq!(d(a, a), 0.0);
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert!(d(a, b) >= 0.0 && d(a, b) <= 0.5);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-15);
        if a != b {
            prop_assert!(d(a, b) > 0.0);
        }
    }

    #[test]
    fn real_signals_have_conjugate_symmetric_samples(kind in 0usize..3, seed: u64) {
        let m = model_of_kind(kind, seed);
        // Keep only even derivative orders, whose transforms are real-even.
        let m = match m {
            ModelInstance::Fri(p) => {
                let orders = p.orders.iter().enumerate()
                    .map(|(r, o)| if r % 2 == 0 { o.clone() } else { FriOrder::empty() })
                    .collect();
                FriParams::new(orders).unwrap().into()
            }
            other => other,
        };
        let g = m.forward(&FrequencyGrid::full(15)).unwrap();
        for (k, v) in g.iter() {
            let w = g.get(-k).unwrap();
            prop_assert!((w - v.conj()).norm() <= 1e-12 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn forward_is_linear_in_amplitudes(kind in 0usize..3, seed: u64, c in -3.0f64..3.0) {
        prop_assume!(c.abs() > 1e-3);
        let m = model_of_kind(kind, seed);
        let mask = amplitude_mask(&m);
        let theta: Vec<f64> = m.flatten().iter().zip(&mask).map(|(v, &a)| if a { c * v } else { *v }).collect();
        let grid = FrequencyGrid::full(12);
        let scaled = m.with_theta(&theta).unwrap().forward(&grid).unwrap();
        let base = m.forward(&grid).unwrap().scale(c);
        for ((_, a), (_, b)) in scaled.iter().zip(base.iter()) {
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn translating_point_sources_modulates_samples(seed: u64, s in -1.0f64..1.0) {
        let m = model_of_kind(0, seed);
        let mask = amplitude_mask(&m);
        let mut theta: Vec<f64> = m.flatten().iter().zip(&mask)
            .map(|(v, &a)| if a { *v } else { v + s })
            .collect();
        m.project(&mut theta, (0.0, 1.0), &mut rng(0));
        let grid = FrequencyGrid::full(20);
        let shifted = m.with_theta(&theta).unwrap().forward(&grid).unwrap();
        let base = m.forward(&grid).unwrap();
        for ((k, a), (_, b)) in shifted.iter().zip(base.iter()) {
            let want = b * fourier_kernel(k as f64, s);
            prop_assert!((a - want).norm() <= 1e-11 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn integer_position_shifts_are_invisible(kind in 0usize..2, seed: u64, n in -3i32..=3) {
        let m = model_of_kind(kind, seed);
        let roles = m.roles();
        let mut theta: Vec<f64> = m.flatten().iter().zip(&roles)
            .map(|(v, r)| if *r == CoordinateRole::Position { v + n as f64 } else { *v })
            .collect();
        m.project(&mut theta, (0.0, 1.0), &mut rng(0));
        let grid = FrequencyGrid::full(25);
        let a = m.with_theta(&theta).unwrap().forward(&grid).unwrap();
        let b = m.forward(&grid).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).norm() <= 1e-10 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn synthesis_preserves_energy(seed: u64, k in 0usize..40, extra in 0usize..50) {
        let y = random_measurement(&mut rng(seed), &FrequencyGrid::full(k));
        let grid = PhysicalGrid::new(2 * k + 1 + extra).unwrap();
        let s = synthesize(&y, &grid).unwrap();
        let lhs: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.size() as f64;
        let rhs: f64 = y.values().iter().map(|v| v.norm_sqr()).sum();
        prop_assert!(rel_err(lhs, rhs) < 1e-10);
    }

    #[test]
    fn dirichlet_closed_form_matches_sum(k in 0usize..30, x in -2.0f64..2.0, tiny in -1e-9f64..1e-9) {
        for x in [x, tiny, 1.0 + tiny] {
            let direct: f64 = 1.0 + 2.0 * (1..=k).map(|j| (2.0 * std::f64::consts::PI * j as f64 * x).cos()).sum::<f64>();
            prop_assert!((dirichlet(k, x) - direct).abs() < 1e-11 * (2 * k + 1) as f64);
        }
    }

    #[test]
    fn realized_snr_hits_the_target(seed: u64, snr in -10.0f64..40.0) {
        let mut r = rng(seed);
        let clean = model_of_kind(0, seed).forward(&FrequencyGrid::full(10)).unwrap();
        let (noise, sigma) = gen_noise(&clean, snr, &mut r).unwrap();
        let realized = 10.0 * (clean.norm() / noise.norm()).log10();
        prop_assert!((realized - snr).abs() < 1e-9);
        prop_assert!(rel_err(noise.norm(), sigma) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn high_grid_differences_respect_the_operator_bound(kind in 0usize..3, seed: u64) {
        let m = model_of_kind(kind, seed);
        let region = Region::around(&m).unwrap();
        let k_high = 30;
        let c_prime = dph_bound_on(&m, &region, k_high).unwrap();
        let high = FrequencyGrid::full(k_high);
        let mut r = rng(seed ^ 1);
        for _ in 0..50 {
            let (a, b) = (region.sample(&mut r), region.sample(&mut r));
            if let Some((dp, _, hi)) = pair_ratios(&m, &a, &b, &high, 10).unwrap() {
                prop_assert!(hi <= c_prime * dp * (1.0 + 1e-12), "{hi} > {c_prime} * {dp}");
            }
        }
    }

    #[test]
    fn low_jacobian_is_injective_on_the_region(kind in 0usize..3, seed: u64) {
        let m = model_of_kind(kind, seed);
        let region = Region::around(&m).unwrap();
        let grid = FrequencyGrid::full(10);
        let mut r = rng(seed ^ 2);
        for _ in 0..20 {
            let theta = region.sample(&mut r);
            let j = m.with_theta(&theta).unwrap().jacobian(&grid).unwrap();
            let real = DMatrix::from_fn(2 * j.nrows(), j.ncols(), |i, c| {
                let z = j[(i % j.nrows(), c)];
                if i < j.nrows() { z.re } else { z.im }
            });
            let s = real.singular_values().min();
            prop_assert!(s > 1e-12, "sigma_min = {s:e}");
        }
    }

    #[test]
    fn gauss_bound_is_monotone_and_settles(seed: u64) {
        let ModelInstance::Gauss(p) = model_of_kind(2, seed) else { unreachable!() };
        let values: Vec<f64> = (0..200).map(|k| dph_bound_gauss(&p, k)).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        let tail = (values[199] - values[198]).abs();
        prop_assert!(tail <= 1e-12 * values[199]);
    }

    #[test]
    fn solver_is_deterministic_and_monotone(seed: u64) {
        let mut r = rng(seed);
        let truth = random_point(&mut r, 3);
        let grid = FrequencyGrid::full(8);
        let clean = truth.forward(&grid).unwrap();
        let (noise, sigma) = gen_noise(&clean, 30.0, &mut r).unwrap();
        let y = clean.add(&noise).unwrap();
        let init = perturb_init(&truth, 0.005, &mut r).unwrap();
        let opts = SolveOptions { max_iters: 3000, sigma: Some(1.5 * sigma), ..SolveOptions::default() };
        let a = nesterov_solve(&init, &y, &opts).unwrap();
        let b = nesterov_solve(&init, &y, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        for w in a.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        if a.status == SolveStatus::Gradient {
            prop_assert!(a.grad_norm_final <= opts.tol_grad);
        }
        // Not above the objective of the truth implies admissible.
        let phi_truth = objective(&truth, &truth.flatten(), &y).unwrap();
        if a.final_objective <= phi_truth {
            prop_assert!(admissible(&a.theta_hat, &a.theta_hat.flatten(), &y, 1.0000001 * sigma).unwrap());
        }
    }
}

#[test]
fn srf_one_extrapolation_is_plain_band_limited_reconstruction() {
    let mut r = rng(9);
    let m = random_point(&mut r, 4);
    let y = m.forward(&FrequencyGrid::full(10)).unwrap();
    let grid = PhysicalGrid::new(64).unwrap();
    let a = synthesize(&extrapolate(&m, 10).unwrap().measurement, &grid).unwrap();
    let b = synthesize(&y, &grid).unwrap();
    assert_eq!(a, b);
}

#[test]
fn synthesis_matches_direct_summation() {
    let y = random_measurement(&mut rng(4), &FrequencyGrid::full(30));
    let grid = PhysicalGrid::new(128).unwrap();
    let s = synthesize(&y, &grid).unwrap();
    for (x, v) in grid.points().iter().zip(&s) {
        let direct: Complex64 = y.iter().map(|(k, g)| g * fourier_kernel(-(k as f64), *x)).sum();
        assert!((v - direct).norm() < 1e-10);
    }
}

#[test]
fn admissibility_examples() {
    let m = random_point(&mut rng(1), 2);
    let grid = FrequencyGrid::full(5);
    let y = m.forward(&grid).unwrap();
    assert!(admissible(&m, &m.flatten(), &y, 1e-12).unwrap());
    let w = random_measurement(&mut rng(2), &grid);
    let sigma = w.norm() / 0.9;
    let noisy = y.add(&w).unwrap();
    assert!(admissible(&m, &m.flatten(), &noisy, sigma).unwrap());
}
