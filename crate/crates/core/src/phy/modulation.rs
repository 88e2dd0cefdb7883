//! Bit sources and on-off keyed impulse trains.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::waveform::SampledWaveform;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub bits: Vec<bool>,
    pub seed: u64,
}

impl BitStream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits, seed: 0 }
    }
}

/// Pseudo-random bits, a pure function of `(count, seed)`.
pub fn gen_bits(count: usize, seed: u64) -> Result<BitStream> {
    gen_bits_stream(count, seed, 0)
}

/// Same as [`gen_bits`] on an independent ChaCha stream, so that several
/// links can share one scenario seed.
pub fn gen_bits_stream(count: usize, seed: u64, stream: u64) -> Result<BitStream> {
    if count == 0 {
        return Err(invalid("count", "need at least one bit"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let bits = (0..count).map(|_| rng.random::<bool>()).collect();
    Ok(BitStream { bits, seed })
}

/// Impulse-radio OOK: a 1 places an impulse of energy `tx_power * T_sym` at
/// `j * T_sym` (amplitude `sqrt(tx_power * T_sym / dt)` on one bin), a 0
/// places nothing. The average power over equiprobable bits is
/// `tx_power / 2`.
pub fn ook_modulate(bits: &BitStream, symbol_rate: f64, dt: f64, tx_power: f64) -> Result<SampledWaveform> {
    if !(symbol_rate > 0.0 && symbol_rate.is_finite()) {
        return Err(invalid("symbol_rate", format!("must be positive, got {symbol_rate}")));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    if !(tx_power >= 0.0 && tx_power.is_finite()) {
        return Err(invalid("tx_power", format!("must be finite and >= 0, got {tx_power}")));
    }
    let period = 1.0 / symbol_rate;
    if period < dt * (1.0 - 1e-9) {
        return Err(Error::SymbolPeriodTooShort { period, dt });
    }
    let bins_per_symbol = period / dt;
    let len = ((bits.len() as f64 * bins_per_symbol).round() as usize).max(1);
    let amplitude = (tx_power * period / dt).sqrt();
    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    for (j, _) in bits.bits.iter().enumerate().filter(|(_, &b)| b) {
        let k = (j as f64 * bins_per_symbol).round() as usize;
        samples[k.min(len - 1)] = Complex64::new(amplitude, 0.0);
    }
    SampledWaveform::new(samples, dt, 0.0)
}
