//! Energy detection, a-posteriori threshold choice and the Gaussian BER model.

use crate::error::{Error, Result};
use crate::phy::BitStream;
use crate::waveform::SampledWaveform;

/// Per-symbol energies `sum |y|^2 dt` over
/// `[first_peak_time + j T - T/2, first_peak_time + j T + T/2)`.
pub fn energy_detect(
    rx: &SampledWaveform,
    symbol_rate: f64,
    first_peak_time: f64,
    bit_count: usize,
) -> Result<Vec<f64>> {
    let period = 1.0 / symbol_rate;
    let slack = 1e-6 * rx.dt();
    let start = first_peak_time - period / 2.0;
    let end = first_peak_time + (bit_count as f64 - 0.5) * period;
    if start < rx.t0() - slack || end > rx.end_time() + slack {
        return Err(Error::WindowOutOfBounds { start, end, lo: rx.t0(), hi: rx.end_time() });
    }
    Ok((0..bit_count)
        .map(|j| {
            let c = first_peak_time + j as f64 * period;
            rx.energy_between(c - period / 2.0, c + period / 2.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub energies: Vec<f64>,
    /// A symbol decodes as 1 when its energy is strictly above this value.
    pub threshold: f64,
    pub decided_bits: Vec<bool>,
    pub bit_errors: usize,
    pub ber: f64,
}

/// Picks the threshold that minimizes bit errors against the known bits.
///
/// Candidates are the midpoints between consecutive distinct energies plus
/// one value below the minimum (everything decodes as 1) and the maximum
/// itself (everything decodes as 0). Ties go to the smaller threshold.
pub fn optimize_threshold(energies: &[f64], true_bits: &BitStream) -> Result<DetectionRecord> {
    if energies.len() != true_bits.len() {
        return Err(Error::LengthMismatch(energies.len(), true_bits.len()));
    }
    if energies.is_empty() {
        return Err(Error::LengthMismatch(0, 0));
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical("non-finite symbol energy".into()));
    }
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));

    let min = energies[order[0]];
    let max = energies[*order.last().unwrap()];
    let below = min - (max - min).max(min.abs()).max(f64::MIN_POSITIVE);

    // threshold below everything: every 0 is an error
    let total_ones = true_bits.ones();
    let mut errors = true_bits.len() - total_ones;
    let mut best = (errors, below);

    // sweep upward; after passing a group of equal energies those symbols
    // decode as 0
    let mut i = 0;
    while i < order.len() {
        let e = energies[order[i]];
        let mut j = i;
        while j < order.len() && energies[order[j]] == e {
            if true_bits.bits[order[j]] {
                errors += 1;
            } else {
                errors -= 1;
            }
            j += 1;
        }
        let threshold = if j < order.len() { 0.5 * (e + energies[order[j]]) } else { e };
        if errors < best.0 {
            best = (errors, threshold);
        }
        i = j;
    }

    let (bit_errors, threshold) = best;
    let decided_bits: Vec<bool> = energies.iter().map(|&e| e > threshold).collect();
    debug_assert_eq!(
        decided_bits.iter().zip(&true_bits.bits).filter(|(a, b)| a != b).count(),
        bit_errors
    );
    Ok(DetectionRecord {
        energies: energies.to_vec(),
        threshold,
        decided_bits,
        bit_errors,
        ber: bit_errors as f64 / energies.len() as f64,
    })
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Theoretical BER of the OOK energy detector under the Gaussian
/// approximation.
///
/// Parameterization: the window holds `window_samples` complex AWGN samples
/// and collects a mean noise energy `noise_energy` (= noise power times
/// window length). A 0 symbol then has energy with mean `N` and variance
/// `N^2 / M`; a 1 symbol adds `mean_energy_one = S` to the mean and
/// `2 N S / M` to the variance (signal-noise cross term). The threshold is
/// the optimum for the two Gaussians and
/// `BER = Q((a - mu0)/sigma0) / 2 + Q((mu1 - a)/sigma1) / 2`. With equal
/// variances this reduces to `Q((S/2)/sigma)`.
pub fn ber_theoretical_ook(mean_energy_one: f64, noise_energy: f64, window_samples: f64) -> f64 {
    let s = mean_energy_one.max(0.0);
    if s == 0.0 {
        return 0.5;
    }
    if !(noise_energy > 0.0) {
        return 0.0;
    }
    let m = window_samples.max(1.0);
    let (mu0, v0) = (noise_energy, noise_energy * noise_energy / m);
    let (mu1, v1) = (noise_energy + s, v0 + 2.0 * noise_energy * s / m);
    let (sd0, sd1) = (v0.sqrt(), v1.sqrt());
    let ber = |a: f64| 0.5 * q_function((a - mu0) / sd0) + 0.5 * q_function((mu1 - a) / sd1);

    // equal weighted densities: (a-mu0)^2/v0 - (a-mu1)^2/v1 = ln(v1/v0)
    let qa = 1.0 / v0 - 1.0 / v1;
    let qb = -2.0 * (mu0 / v0 - mu1 / v1);
    let qc = mu0 * mu0 / v0 - mu1 * mu1 / v1 - (v1 / v0).ln();
    let disc = qb * qb - 4.0 * qa * qc;
    let closed_form = if qa.abs() < 1e-300 {
        Some(-qc / qb)
    } else if disc >= 0.0 {
        let r = disc.sqrt();
        [(-qb - r) / (2.0 * qa), (-qb + r) / (2.0 * qa)]
            .into_iter()
            .find(|a| (mu0..=mu1).contains(a))
    } else {
        None
    };
    let a = closed_form.unwrap_or_else(|| golden_min(ber, mu0, mu1));
    ber(a)
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) <= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse of [`ber_theoretical_ook`] in the signal energy, by bisection.
pub fn ook_energy_for_ber(target_ber: f64, noise_energy: f64, window_samples: f64) -> Result<f64> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::Numerical(format!("target BER {target_ber} outside (0, 0.5)")));
    }
    let mut lo = 0.0;
    let mut hi = noise_energy.max(f64::MIN_POSITIVE);
    while ber_theoretical_ook(hi, noise_energy, window_samples) > target_ber {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("no signal energy reaches the target BER".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber_theoretical_ook(mid, noise_energy, window_samples) > target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
