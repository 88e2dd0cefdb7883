//! Uniformly sampled complex baseband signals.
//!
//! Every time signal in the simulator (channel responses, TR filters,
//! modulated symbol trains, received waveforms) is carried as a
//! [`SampledWaveform`]. Amplitudes are volt-equivalent against a 1 ohm
//! reference, so `|x|^2` is instantaneous power and `sum |x|^2 * dt` is
//! energy.

use num_complex::Complex64;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    samples: Vec<Complex64>,
    dt: f64,
    t0: f64,
}

impl SampledWaveform {
    pub fn new(samples: Vec<Complex64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive and finite, got {dt}")));
        }
        if samples.is_empty() {
            return Err(invalid("samples", "waveform needs at least one sample"));
        }
        if !t0.is_finite() {
            return Err(invalid("t0", "must be finite"));
        }
        Ok(Self { samples, dt, t0 })
    }

    /// All-zero waveform of `len` samples.
    pub fn zeros(len: usize, dt: f64, t0: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len.max(1)], dt, t0)
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<Complex64>, dt: f64, t0: f64) -> Self {
        debug_assert!(!samples.is_empty() && dt > 0.0);
        Self { samples, dt, t0 }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Time of the first instant past the last sample.
    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration()
    }

    /// Time stamp of sample `k`.
    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// `sum |x|^2 * dt`
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x.norm_sqr()).sum::<f64>() * self.dt
    }

    /// Energy of the bins whose time stamps fall in `[start, end)`, clamped to
    /// the waveform support.
    pub fn energy_between(&self, start: f64, end: f64) -> f64 {
        let (lo, hi) = self.bin_range(start, end);
        self.samples[lo..hi].iter().map(|x| x.norm_sqr()).sum::<f64>() * self.dt
    }

    /// Largest `|x|^2` among the bins in `[start, end)`, 0 when the range is empty.
    pub fn peak_power_between(&self, start: f64, end: f64) -> f64 {
        let (lo, hi) = self.bin_range(start, end);
        self.samples[lo..hi].iter().map(|x| x.norm_sqr()).fold(0.0, f64::max)
    }

    /// Half-open bin index range covering time stamps in `[start, end)`.
    pub fn bin_range(&self, start: f64, end: f64) -> (usize, usize) {
        let n = self.samples.len();
        let to_bin = |t: f64| {
            let x = (t - self.t0) / self.dt;
            // absorb rounding noise so grid-aligned edges land on their bin
            let k = (x - 1e-9).ceil();
            if k <= 0.0 {
                0
            } else if k >= n as f64 {
                n
            } else {
                k as usize
            }
        };
        let lo = to_bin(start);
        let hi = to_bin(end).max(lo);
        (lo, hi)
    }

    /// Index of the sample with the largest magnitude (first one on ties).
    pub fn argmax_magnitude(&self) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (k, x) in self.samples.iter().enumerate() {
            let v = x.norm_sqr();
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        best
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|x| x * factor).collect(),
            dt: self.dt,
            t0: self.t0,
        }
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for x in &mut self.samples {
            *x *= factor;
        }
    }

    /// Rescale to `sum |x|^2 * dt = 1`.
    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if !(e > 0.0 && e.is_finite()) {
            return Err(crate::Error::ZeroEnergy);
        }
        Ok(self.scaled(1.0 / e.sqrt()))
    }

    /// Time-reversed conjugate on the same grid, starting at `t0 = 0`:
    /// `y[k] = conj(x[K-1-k])`.
    pub fn conj_reversed(&self) -> Self {
        Self {
            samples: self.samples.iter().rev().map(|x| x.conj()).collect(),
            dt: self.dt,
            t0: 0.0,
        }
    }

    /// Adds `other` into `self`, growing `self` as needed. Both waveforms must
    /// share `dt` and their start times must differ by a whole number of bins.
    pub fn accumulate(&mut self, other: &SampledWaveform) -> Result<()> {
        if (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(crate::Error::GridMismatch(self.dt, other.dt));
        }
        let offset_bins = ((other.t0 - self.t0) / self.dt).round();
        if offset_bins < 0.0 {
            let shift = (-offset_bins) as usize;
            let mut grown = vec![Complex64::new(0.0, 0.0); shift];
            grown.extend_from_slice(&self.samples);
            self.samples = grown;
            self.t0 = other.t0;
        }
        let offset = ((other.t0 - self.t0) / self.dt).round() as usize;
        let needed = offset + other.samples.len();
        if needed > self.samples.len() {
            self.samples.resize(needed, Complex64::new(0.0, 0.0));
        }
        for (dst, src) in self.samples[offset..].iter_mut().zip(&other.samples) {
            *dst += src;
        }
        Ok(())
    }

    /// Zero-extends the tail so the waveform has at least `len` samples.
    pub fn pad_to(&mut self, len: usize) {
        if len > self.samples.len() {
            self.samples.resize(len, Complex64::new(0.0, 0.0));
        }
    }
}
