use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Measurement;

/// `10 log10(||signal|| / ||noise||)`; note the ratio of norms, not of
/// energies.
pub fn snr_db(signal: &Measurement, noise: &Measurement) -> f64 {
    10.0 * (signal.norm() / noise.norm()).log10()
}

/// Complex Gaussian noise on `signal`'s grid rescaled to norm `target`.
pub fn noise_with_norm<R: Rng + ?Sized>(signal: &Measurement, target: f64, rng: &mut R) -> Result<Measurement> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise norm {target} must be finite and nonnegative"
        )));
    }
    let raw: Vec<Complex64> = (0..signal.len())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let n = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = if n > 0.0 { target / n } else { 0.0 };
    Measurement::new(signal.grid().clone(), raw.into_iter().map(|z| z * scale).collect())
}

/// Noise realising `target_snr_db` exactly; returns it with `sigma = ||noise||`.
pub fn gen_noise<R: Rng + ?Sized>(signal: &Measurement, target_snr_db: f64, rng: &mut R) -> Result<(Measurement, f64)> {
    let s = signal.norm();
    if s == 0.0 {
        return Err(Error::InvalidArgument("cannot set an SNR against a zero signal".into()));
    }
    if !target_snr_db.is_finite() {
        return Err(Error::InvalidArgument("target SNR must be finite".into()));
    }
    let target = s / 10f64.powf(target_snr_db / 10.0);
    let noise = noise_with_norm(signal, target, rng)?;
    let sigma = noise.norm();
    Ok((noise, sigma))
}
