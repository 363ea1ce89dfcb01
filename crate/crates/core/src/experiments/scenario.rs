use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, NoiseSpec, ScenarioKind};
use super::matching::{model_errors, GroupErrors};
use super::noise::{gen_noise, noise_with_norm, snr_db};
use super::summary::Summary;
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, Measurement};
use crate::models::{ChirpGrid, ChirpParams, FriOrder, FriParams, Interval, ModelInstance, PointSourceParams};
use crate::solver::{nesterov_solve, perturb_init, SolveReport};
use crate::stability::{dph_bound_on, empirical_lipschitz, stability_check, Region};

/// Five pairs, 1 RL apart within a pair and 3 RL between pairs at `K_L = 10`.
pub const POINT_GROUP_POSITIONS: [f64; 10] = [0.05, 0.10, 0.25, 0.30, 0.45, 0.50, 0.65, 0.70, 0.85, 0.90];
pub const MONOPOLE_POSITIONS: [f64; 5] = [0.1, 0.15, 0.45, 0.55, 0.9];
pub const DIPOLE_POSITIONS: [f64; 2] = [0.7, 0.8];
pub const QUADRUPOLE_POSITION: f64 = 0.3;
pub const CHIRP_CENTERS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const CHIRP_WIDTHS: [f64; 4] = [0.02, 0.03, 0.01, 0.01];
pub const CHIRP_QUADRATIC: [f64; 4] = [20.0, -15.0, 10.0, -10.0];
pub const CHIRP_LINEAR: [f64; 4] = [5.0, 3.0, -4.0, 6.0];

/// Amplitudes of point sources and monopoles are drawn from this interval.
pub const UNIT_AMPLITUDES: Interval = Interval { lo: 1.0, hi: 2.0 };

fn draw_amplitudes<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(UNIT_AMPLITUDES.lo..=UNIT_AMPLITUDES.hi))
        .collect()
}

pub fn point_groups_truth<R: Rng + ?Sized>(rng: &mut R) -> Result<ModelInstance> {
    let a = draw_amplitudes(POINT_GROUP_POSITIONS.len(), rng);
    Ok(PointSourceParams::new(a, POINT_GROUP_POSITIONS.to_vec(), UNIT_AMPLITUDES)?.into())
}

fn block_norm(order: usize, amplitudes: Vec<f64>, positions: Vec<f64>, k_low: usize) -> Result<f64> {
    let mut orders = vec![FriOrder::empty(); order + 1];
    orders[order] = FriOrder::new(amplitudes, positions, Interval::new(-1.0, 1.0));
    let m: ModelInstance = FriParams::new(orders)?.into();
    Ok(m.forward(&FrequencyGrid::full(k_low))?.norm())
}

/// Dipole and quadrupole amplitudes `(b, c)` giving each source type the same
/// low-frequency norm as the monopole block with amplitudes `a`.
pub fn multipole_amplitudes(k_low: usize, a: &[f64]) -> Result<(f64, f64)> {
    let mono = block_norm(0, a.to_vec(), MONOPOLE_POSITIONS.to_vec(), k_low)?;
    let di = block_norm(1, vec![1.0; DIPOLE_POSITIONS.len()], DIPOLE_POSITIONS.to_vec(), k_low)?;
    let quad = block_norm(2, vec![1.0], vec![QUADRUPOLE_POSITION], k_low)?;
    Ok((mono / di, mono / quad))
}

/// Admissible amplitude intervals `[v, 2 v]` for dipoles and quadrupoles,
/// where `v` is the normalised amplitude at unit monopoles.
pub fn multipole_intervals(k_low: usize) -> Result<(Interval, Interval)> {
    let (b1, c1) = multipole_amplitudes(k_low, &[1.0; MONOPOLE_POSITIONS.len()])?;
    Ok((Interval::new(b1, 2.0 * b1), Interval::new(c1, 2.0 * c1)))
}

pub fn multipole_truth<R: Rng + ?Sized>(k_low: usize, rng: &mut R) -> Result<ModelInstance> {
    let a = draw_amplitudes(MONOPOLE_POSITIONS.len(), rng);
    let (b, c) = multipole_amplitudes(k_low, &a)?;
    let (ib, ic) = multipole_intervals(k_low)?;
    let p = FriParams::new(vec![
        FriOrder::new(a, MONOPOLE_POSITIONS.to_vec(), UNIT_AMPLITUDES),
        FriOrder::new(vec![b; DIPOLE_POSITIONS.len()], DIPOLE_POSITIONS.to_vec(), ib),
        FriOrder::new(vec![c], vec![QUADRUPOLE_POSITION], ic),
    ])?;
    Ok(p.into())
}

pub fn chirp_truth<R: Rng + ?Sized>(rng: &mut R) -> Result<ModelInstance> {
    let n = CHIRP_CENTERS.len();
    let re = draw_amplitudes(n, rng);
    let im = draw_amplitudes(n, rng);
    Ok(ChirpParams::new(
        re,
        im,
        CHIRP_QUADRATIC.to_vec(),
        CHIRP_LINEAR.to_vec(),
        CHIRP_CENTERS.to_vec(),
        CHIRP_WIDTHS.to_vec(),
        UNIT_AMPLITUDES,
        ChirpGrid::closed127(),
    )?
    .into())
}

pub fn build_truth<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<ModelInstance> {
    match config.scenario {
        ScenarioKind::PointGroups => point_groups_truth(rng),
        ScenarioKind::Multipole => multipole_truth(config.k_low, rng),
        ScenarioKind::Chirp => chirp_truth(rng),
        ScenarioKind::Custom => config
            .model
            .clone()
            .ok_or_else(|| Error::InvalidArgument("custom scenario needs a model".into())),
    }
}

/// Seed of trial `index`: the first word of ChaCha stream `index` under the
/// master seed, so trials are independent of scheduling.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheck {
    pub k_high: usize,
    /// `||P_H(theta_hat) - P_H(theta*)||`.
    pub hi_err: f64,
    /// `2 C' C_U sigma`.
    pub bound: f64,
    pub ok: bool,
}

/// What a trial needs for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDetail {
    pub truth: ModelInstance,
    pub measurement: Measurement,
    pub report: Option<SolveReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub sigma: f64,
    /// `phi(theta_hat)`.
    pub final_residual: f64,
    pub iterations: usize,
    pub admissible: Option<bool>,
    pub reinit_count: usize,
    /// Solver status, or `error` when the trial could not run.
    pub status: String,
    pub groups: Vec<GroupErrors>,
    pub stability: Vec<StabilityCheck>,
    pub detail: Option<Box<TrialDetail>>,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.status == "error"
    }

    fn error(trial: usize, seed: u64, e: &Error) -> Self {
        log::warn!("trial {trial} failed: {e}");
        TrialResult {
            trial,
            seed,
            snr_db: f64::NAN,
            sigma: f64::NAN,
            final_residual: f64::NAN,
            iterations: 0,
            admissible: None,
            reinit_count: 0,
            status: "error".into(),
            groups: Vec::new(),
            stability: Vec::new(),
            detail: None,
        }
    }
}

fn status_name(r: &SolveReport) -> String {
    serde_json::to_value(r.status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Runs one trial; failures are recorded in the result, never propagated.
pub fn run_trial(config: &ExperimentConfig, index: usize) -> TrialResult {
    let seed = trial_seed(config.seed, index);
    match try_trial(config, index, seed) {
        Ok(r) => r,
        Err(e) => TrialResult::error(index, seed, &e),
    }
}

fn try_trial(config: &ExperimentConfig, index: usize, seed: u64) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = build_truth(config, &mut rng)?;
    let grid = FrequencyGrid::full(config.k_low);
    let clean = truth.forward(&grid)?;
    let (noise, sigma) = match config.noise {
        NoiseSpec::SnrDb(s) => gen_noise(&clean, s, &mut rng)?,
        NoiseSpec::Sigma(s) => {
            let n = noise_with_norm(&clean, s, &mut rng)?;
            let norm = n.norm();
            (n, norm)
        }
    };
    let realized = snr_db(&clean, &noise);
    let y = clean.add(&noise)?;
    let init = perturb_init(&truth, config.init.absolute_offset(config.k_low)?, &mut rng)?;
    let mut opts = config.solver.clone();
    opts.sigma = (sigma > 0.0).then_some(sigma);
    opts.reinit.seed = rng.next_u64();
    let report = nesterov_solve(&init, &y, &opts)?;
    let groups = model_errors(&report.theta_hat, &truth)?;

    let mut stability = Vec::new();
    if let Some(spec) = config.stability {
        let region = Region::around(&truth)?;
        let c_u = empirical_lipschitz(&truth, &region, config.k_low, config.k_low, spec.pairs, rng.next_u64())?.c_u;
        for &k in &config.k_high {
            let c_prime = dph_bound_on(&truth, &region, k)?;
            let (hi_err, bound) = stability_check(&report.theta_hat, &truth, k, c_prime, c_u, sigma)?;
            stability.push(StabilityCheck {
                k_high: k,
                hi_err,
                bound,
                ok: hi_err <= bound,
            });
        }
    }

    Ok(TrialResult {
        trial: index,
        seed,
        snr_db: realized,
        sigma,
        final_residual: report.final_objective,
        iterations: report.iterations,
        admissible: report.admissible,
        reinit_count: report.reinit_count,
        status: status_name(&report),
        groups,
        stability,
        detail: Some(Box::new(TrialDetail {
            truth,
            measurement: y,
            report: Some(report),
        })),
    })
}

/// Runs `f` on a pool capped by `MODELSR_THREADS` when that is set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var("MODELSR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub summary: Summary,
}

/// All trials of `config`, in trial order.
pub fn run_scenario(config: &ExperimentConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let trials: Vec<TrialResult> = with_thread_cap(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, i))
            .collect()
    });
    let summary = Summary::from_trials(&trials);
    Ok(ScenarioOutput {
        config: config.clone(),
        trials,
        summary,
    })
}

/// The same scenario at each target SNR.
pub fn snr_sweep(config: &ExperimentConfig, snrs: &[f64]) -> Result<Vec<ScenarioOutput>> {
    snrs.iter()
        .map(|&s| {
            let mut c = config.clone();
            c.noise = NoiseSpec::SnrDb(s);
            run_scenario(&c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_group_geometry() {
        let rl = 0.05;
        for pair in POINT_GROUP_POSITIONS.chunks(2) {
            assert!((pair[1] - pair[0] - rl).abs() < 1e-12);
        }
        for w in POINT_GROUP_POSITIONS.windows(2).skip(1).step_by(2) {
            assert!((w[1] - w[0] - 3.0 * rl).abs() < 1e-12);
        }
        let wrap = 1.0 + POINT_GROUP_POSITIONS[0] - POINT_GROUP_POSITIONS[9];
        assert!((wrap - 3.0 * rl).abs() < 1e-12);
    }

    #[test]
    fn multipole_blocks_have_equal_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = multipole_truth(10, &mut rng).unwrap();
        let ModelInstance::Fri(p) = &m else { unreachable!() };
        let norms: Vec<f64> = p
            .orders
            .iter()
            .enumerate()
            .map(|(r, o)| block_norm(r, o.amplitudes.clone(), o.positions.clone(), 10).unwrap())
            .collect();
        for n in &norms[1..] {
            assert!((n - norms[0]).abs() < 1e-10 * norms[0]);
        }
        for o in &p.orders {
            assert!(o.amplitudes.iter().all(|a| o.amplitude_interval.contains(*a)));
        }
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(7, 4));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }
}
