#![allow(dead_code)]

use std::f64::consts::PI;

use modelsr::grid::{FrequencyGrid, Measurement};
use modelsr::models::{ChirpGrid, ChirpParams, FriOrder, FriParams, GaussParams, Interval, PointSourceParams};
use modelsr::ModelInstance;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` positions in `[0, 1)` at least `min_sep` apart on the circle.
pub fn separated_positions<R: Rng>(rng: &mut R, n: usize, min_sep: f64) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        x.sort_by(f64::total_cmp);
        let ok = (0..n).all(|i| {
            let d = if i + 1 < n {
                x[i + 1] - x[i]
            } else {
                1.0 + x[0] - x[n - 1]
            };
            n == 1 || d >= min_sep
        });
        if ok {
            return x;
        }
    }
}

pub fn random_point<R: Rng>(rng: &mut R, n: usize) -> ModelInstance {
    let a = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
    let x = separated_positions(rng, n, 0.02);
    PointSourceParams::new(a, x, Interval::new(1.0, 2.0)).unwrap().into()
}

/// Monopoles, dipoles and a quadrupole with random amplitudes.
pub fn random_fri<R: Rng>(rng: &mut R) -> ModelInstance {
    let counts = [2usize, 2, 1];
    let x = separated_positions(rng, 5, 0.02);
    let mut orders = Vec::new();
    let mut next = 0;
    for (r, &c) in counts.iter().enumerate() {
        let scale = 0.1f64.powi(r as i32);
        let a = (0..c).map(|_| scale * rng.random_range(1.0..2.0)).collect();
        orders.push(FriOrder::new(
            a,
            x[next..next + c].to_vec(),
            Interval::new(scale, 2.0 * scale),
        ));
        next += c;
    }
    FriParams::new(orders).unwrap().into()
}

pub fn random_gauss<R: Rng>(rng: &mut R, n: usize) -> ModelInstance {
    let w = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
    let s = (0..n).map(|_| rng.random_range(0.01..0.05)).collect();
    let m = separated_positions(rng, n, 0.05);
    GaussParams::new(w, s, m, Interval::new(1.0, 2.0), Interval::new(0.005, 0.1))
        .unwrap()
        .into()
}

pub fn random_chirp<R: Rng>(rng: &mut R, n: usize) -> ModelInstance {
    let mut u = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
    let re = u(1.0, 2.0);
    let im = u(1.0, 2.0);
    let q = u(-20.0, 20.0);
    let l = u(-6.0, 6.0);
    let s = u(0.02, 0.05);
    let c = separated_positions(rng, n, 0.1)
        .into_iter()
        .map(|c| 0.15 + 0.7 * c)
        .collect();
    ChirpParams::new(re, im, q, l, c, s, Interval::new(1.0, 2.0), ChirpGrid::closed127())
        .unwrap()
        .into()
}

/// One random instance of each model kind.
pub fn all_models<R: Rng>(rng: &mut R) -> Vec<ModelInstance> {
    vec![
        random_point(rng, 3),
        random_fri(rng),
        random_gauss(rng, 2),
        random_chirp(rng, 2),
    ]
}

pub fn random_measurement<R: Rng>(rng: &mut R, grid: &FrequencyGrid) -> Measurement {
    let v = (0..grid.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Measurement::new(grid.clone(), v).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Central-difference column `d f / d theta_p` with step `h`.
pub fn central_difference<F>(theta: &[f64], p: usize, h: f64, f: F) -> Vec<Complex64>
where
    F: Fn(&[f64]) -> Vec<Complex64>,
{
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[p] += h;
    minus[p] -= h;
    let (fp, fm) = (f(&plus), f(&minus));
    fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub const FD_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const K_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = f(c) * K_WEIGHTS[7];
    let mut g = f(c) * G_WEIGHTS[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += s * K_WEIGHTS[i];
        if i % 2 == 1 {
            g += s * G_WEIGHTS[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Globally adaptive Gauss-Kronrod quadrature of a complex integrand on
/// `[a, b]`: the interval with the largest error estimate is bisected until
/// the total estimate drops below `tol` or the interval budget runs out.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> Complex64 {
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..4000 {
        let total: f64 = parts.iter().map(|p| p.3).sum();
        if total <= tol {
            break;
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// `e^{-2 pi i k x}`, computed independently of the library.
pub fn fourier_kernel(k: f64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * k * x)
}
