//! Linear convolution and closed-form channel correlation.
//!
//! [`convolve`] is the Riemann approximation of continuous convolution,
//! `y[k] = dt * sum_i a[i] b[k-i]`, backed by two interchangeable engines:
//! a direct sum that skips zero samples and an FFT overlap-add.
//!
//! [`cross_corr_analytic`] evaluates the double tap sum
//! `R(t) = sum_n' sum_n A_n' A_n exp(j(theta_n' - theta_n)) delta(t - (tau_n' + tau_n))`
//! where the second CIR is the time-reversed member. Fed with the delays of
//! the causal TR filter (see [`reflect_delays`]) it predicts the numeric
//! `h1 * TR(h2)` exactly on the grid, which is what
//! [`verify_numeric_vs_analytic`] checks.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::channel::{to_sampled, AnalyticCir, MultipathTap, DELAY_MERGE_TOLERANCE};
use crate::error::{Error, Result};
use crate::waveform::SampledWaveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionEngine {
    /// Pick whichever engine is cheaper for the operand sizes and sparsity.
    Auto,
    Direct,
    Fft,
}

/// Full linear convolution of `a` and `b` scaled by `dt`.
///
/// The output has `|a| + |b| - 1` samples and starts at `a.t0 + b.t0`.
pub fn convolve(a: &SampledWaveform, b: &SampledWaveform) -> Result<SampledWaveform> {
    convolve_with(a, b, ConvolutionEngine::Auto)
}

pub fn convolve_with(
    a: &SampledWaveform,
    b: &SampledWaveform,
    engine: ConvolutionEngine,
) -> Result<SampledWaveform> {
    let dt = a.dt();
    if (a.dt() - b.dt()).abs() > 1e-12 * dt {
        return Err(Error::GridMismatch(a.dt(), b.dt()));
    }
    let engine = match engine {
        ConvolutionEngine::Auto => pick_engine(a.samples(), b.samples()),
        e => e,
    };
    let mut out = match engine {
        ConvolutionEngine::Direct => direct(a.samples(), b.samples()),
        _ => fft_overlap_add(a.samples(), b.samples()),
    };
    for y in &mut out {
        *y *= dt;
    }
    Ok(SampledWaveform::from_parts_unchecked(out, dt, a.t0() + b.t0()))
}

/// Passes `signal` through a sampled response stored in the energy
/// convention of [`to_sampled`] (tap `A` held as `A / sqrt(dt)`).
///
/// This is `convolve(signal, response) / sqrt(dt)`, i.e. the discrete FIR
/// with taps `response[k] * sqrt(dt)`. A unit tap at zero delay is the
/// identity, and a unit-energy response keeps its FIR taps at unit norm.
pub fn apply_response(signal: &SampledWaveform, response: &SampledWaveform) -> Result<SampledWaveform> {
    let mut y = convolve(signal, response)?;
    y.scale_in_place(1.0 / signal.dt().sqrt());
    Ok(y)
}

fn nnz(x: &[Complex64]) -> usize {
    x.iter().filter(|v| v.re != 0.0 || v.im != 0.0).count()
}

fn pick_engine(a: &[Complex64], b: &[Complex64]) -> ConvolutionEngine {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let direct_cost = (nnz(a) as f64 * m).min(nnz(b) as f64 * n);
    let short = n.min(m).max(1.0);
    let fft_cost = 4.0 * (n + m) * (4.0 * short).log2().max(1.0) + 64.0;
    if direct_cost <= fft_cost {
        ConvolutionEngine::Direct
    } else {
        ConvolutionEngine::Fft
    }
}

fn direct(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    // iterate over the sparser operand's non-zeros
    let (outer, inner) = if nnz(a) * b.len() <= nnz(b) * a.len() { (a, b) } else { (b, a) };
    for (i, &x) in outer.iter().enumerate() {
        if x.re == 0.0 && x.im == 0.0 {
            continue;
        }
        for (dst, &y) in out[i..i + inner.len()].iter_mut().zip(inner) {
            *dst += x * y;
        }
    }
    out
}

fn fft_overlap_add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let out_len = long.len() + short.len() - 1;
    let mut planner = FftPlanner::<f64>::new();

    // single transform when the whole output is not much larger than a block
    let block_fft = (4 * short.len()).next_power_of_two().max(64);
    let fft_len = if out_len <= block_fft { out_len.next_power_of_two() } else { block_fft };
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);

    let mut kernel = vec![Complex64::new(0.0, 0.0); fft_len];
    kernel[..short.len()].copy_from_slice(short);
    forward.process(&mut kernel);

    let block = fft_len - short.len() + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    let norm = 1.0 / fft_len as f64;
    let mut start = 0;
    while start < long.len() {
        let end = (start + block).min(long.len());
        buf.fill(Complex64::new(0.0, 0.0));
        buf[..end - start].copy_from_slice(&long[start..end]);
        circular_product(&forward, &inverse, &mut buf, &kernel);
        let valid = (end - start + short.len() - 1).min(out_len - start);
        for (dst, v) in out[start..start + valid].iter_mut().zip(&buf[..valid]) {
            *dst += v * norm;
        }
        start = end;
    }
    out
}

fn circular_product(
    forward: &Arc<dyn Fft<f64>>,
    inverse: &Arc<dyn Fft<f64>>,
    buf: &mut [Complex64],
    kernel_spectrum: &[Complex64],
) {
    forward.process(buf);
    for (x, k) in buf.iter_mut().zip(kernel_spectrum) {
        *x *= k;
    }
    inverse.process(buf);
}

/// Closed-form correlation: tap list over the lag/time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    taps: Vec<MultipathTap>,
}

impl CorrelationResult {
    /// Components sorted by delay, coincident delays already merged.
    pub fn taps(&self) -> &[MultipathTap] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Component with the largest magnitude.
    pub fn peak(&self) -> Option<&MultipathTap> {
        self.taps.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    }

    pub fn into_cir(self) -> Result<AnalyticCir> {
        AnalyticCir::new(self.taps)
    }
}

/// All `N * N'` cross terms of `h1` against the time-reversed member `h2`:
/// amplitude `A_n' A_n`, phase `theta_n' - theta_n`, delay `tau_n' + tau_n`.
/// Components closer than [`DELAY_MERGE_TOLERANCE`] are summed as phasors.
pub fn cross_corr_analytic(h1: &AnalyticCir, h2: &AnalyticCir) -> CorrelationResult {
    let mut terms: Vec<(f64, Complex64)> = Vec::with_capacity(h1.len() * h2.len());
    for a in h1.taps() {
        for b in h2.taps() {
            let gain = Complex64::from_polar(a.amplitude * b.amplitude, a.phase - b.phase);
            terms.push((a.delay + b.delay, gain));
        }
    }
    terms.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut merged: Vec<(f64, Complex64)> = Vec::new();
    for (delay, gain) in terms {
        match merged.last_mut() {
            Some((d, g)) if delay - *d < DELAY_MERGE_TOLERANCE => *g += gain,
            _ => merged.push((delay, gain)),
        }
    }
    let taps = merged
        .into_iter()
        .map(|(d, g)| {
            let amplitude = g.norm();
            let phase = if amplitude > 0.0 { g.arg() } else { 0.0 };
            MultipathTap {
                amplitude,
                phase: crate::channel::wrap_phase(phase),
                delay: d,
            }
        })
        .collect();
    CorrelationResult { taps }
}

/// Auto-correlation, `cross_corr_analytic(h, h)`.
pub fn auto_corr_analytic(h: &AnalyticCir) -> CorrelationResult {
    cross_corr_analytic(h, h)
}

/// Moves every tap from `tau` to `horizon - tau` (phases untouched): the
/// delay axis of the causal TR filter built over a support of length
/// `horizon`.
pub fn reflect_delays(h: &AnalyticCir, horizon: f64) -> Result<AnalyticCir> {
    let taps = h
        .taps()
        .iter()
        .map(|t| MultipathTap::new(t.amplitude, t.phase, (horizon - t.delay).max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    AnalyticCir::new(taps)
}

/// Grid-level comparison of `to_sampled(h1) * conj_reverse(to_sampled(h2))`
/// against the analytic double sum.
///
/// With taps stored as `A / sqrt(dt)` the `dt`-scaled numeric convolution
/// carries bare `A_n' A_n` products, so the analytic components are placed
/// unscaled on their nearest bins. The time-reversed member is built over
/// the sampled support of `h2`, so the analytic sum uses delays
/// `tau_n' + (T2 - tau_n)` with `T2 = (K2 - 1) dt`. Returns the largest
/// absolute sample error divided by the analytic peak magnitude.
///
/// Delays are expected to sit on the grid; off-grid delays incur rounding
/// mismatches of one bin.
pub fn verify_numeric_vs_analytic(h1: &AnalyticCir, h2: &AnalyticCir, dt: f64) -> Result<f64> {
    let s1 = to_sampled(h1, dt, 0.0)?.waveform;
    let s2 = to_sampled(h2, dt, 0.0)?.waveform;
    let horizon = (s2.len() - 1) as f64 * dt;
    let numeric = convolve(&s1, &s2.conj_reversed())?;

    let analytic = cross_corr_analytic(h1, &reflect_delays(h2, horizon)?);
    let mut expected = vec![Complex64::new(0.0, 0.0); numeric.len()];
    for t in analytic.taps() {
        let k = (t.delay / dt).round() as usize;
        if k >= expected.len() {
            expected.resize(k + 1, Complex64::new(0.0, 0.0));
        }
        expected[k] += t.phasor();
    }

    let peak = expected.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let zero = Complex64::new(0.0, 0.0);
    let len = expected.len().max(numeric.len());
    let err = (0..len)
        .map(|k| {
            let n = numeric.samples().get(k).copied().unwrap_or(zero);
            let e = expected.get(k).copied().unwrap_or(zero);
            (n - e).norm()
        })
        .fold(0.0, f64::max);
    Ok(err / peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn wf(v: &[f64], dt: f64) -> SampledWaveform {
        SampledWaveform::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect(), dt, 0.0).unwrap()
    }

    #[test]
    fn scaled_delta_is_identity() {
        let dt = 0.25;
        let delta = wf(&[1.0 / dt], dt);
        let x = wf(&[1.0, -2.0, 3.5], dt);
        for engine in [ConvolutionEngine::Direct, ConvolutionEngine::Fft] {
            let y = convolve_with(&delta, &x, engine).unwrap();
            for (a, b) in y.samples().iter().zip(x.samples()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rect_self_convolution_is_triangle() {
        let l = 5;
        let rect = wf(&vec![1.0; l], 1.0);
        for engine in [ConvolutionEngine::Direct, ConvolutionEngine::Fft] {
            let y = convolve_with(&rect, &rect, engine).unwrap();
            assert_eq!(y.len(), 2 * l - 1);
            for (k, v) in y.samples().iter().enumerate() {
                let tri = (l - (k as isize - (l as isize - 1)).unsigned_abs()) as f64;
                assert!((v.re - tri).abs() < 1e-12 && v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn start_times_add() {
        let a = SampledWaveform::new(vec![Complex64::new(1.0, 0.0)], 1.0, 2.0).unwrap();
        let b = SampledWaveform::new(vec![Complex64::new(1.0, 0.0)], 1.0, 3.0).unwrap();
        assert_eq!(convolve(&a, &b).unwrap().t0(), 5.0);
    }

    #[test]
    fn mismatched_grid_is_an_error() {
        let a = wf(&[1.0], 1.0);
        let b = wf(&[1.0], 2.0);
        assert!(matches!(convolve(&a, &b), Err(Error::GridMismatch(..))));
    }

    #[test]
    fn overlap_add_matches_direct_on_long_input() {
        let a: Vec<f64> = (0..5000).map(|k| ((k * 37 % 101) as f64 - 50.0) / 50.0).collect();
        let b: Vec<f64> = (0..70).map(|k| ((k * 13 % 29) as f64) / 29.0).collect();
        let (a, b) = (wf(&a, 1e-3), wf(&b, 1e-3));
        let d = convolve_with(&a, &b, ConvolutionEngine::Direct).unwrap();
        let f = convolve_with(&a, &b, ConvolutionEngine::Fft).unwrap();
        let err = d.samples().iter().zip(f.samples()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn apply_response_identity() {
        let dt = 1e-12;
        let h = to_sampled(&AnalyticCir::impulse(0.0).unwrap(), dt, 0.0).unwrap().waveform;
        let x = wf(&[1.0, 2.0, -1.0], dt);
        let y = apply_response(&x, &h).unwrap();
        for (a, b) in y.samples().iter().zip(x.samples()) {
            assert!((a - b).norm() < 1e-9 * b.norm().max(1.0));
        }
    }

    #[test]
    fn one_term_double_sum() {
        let h1 = AnalyticCir::new(vec![MultipathTap::new(2.0, PI / 3.0, 1e-9).unwrap()]).unwrap();
        let h2 = AnalyticCir::new(vec![MultipathTap::new(3.0, PI / 6.0, 2e-9).unwrap()]).unwrap();
        let r = cross_corr_analytic(&h1, &h2);
        assert_eq!(r.len(), 1);
        let t = r.taps()[0];
        assert!((t.amplitude - 6.0).abs() < 1e-15);
        assert!((t.phase - PI / 6.0).abs() < 1e-15);
        assert!((t.delay - 3e-9).abs() < 1e-24);
    }

    #[test]
    fn autocorrelation_diagonal_terms_are_real() {
        let h = AnalyticCir::new(vec![
            MultipathTap::new(1.0, 0.3, 1e-9).unwrap(),
            MultipathTap::new(0.5, 2.0, 2.5e-9).unwrap(),
            MultipathTap::new(0.25, 4.0, 4.5e-9).unwrap(),
        ])
        .unwrap();
        let r = auto_corr_analytic(&h);
        for tap in h.taps() {
            let c = r
                .taps()
                .iter()
                .find(|c| (c.delay - 2.0 * tap.delay).abs() < 1e-18)
                .expect("diagonal component");
            assert!((c.amplitude - tap.amplitude.powi(2)).abs() < 1e-15);
            assert!(c.phase.abs() < 1e-12);
        }
    }

    #[test]
    fn single_tap_pair_verifies() {
        let h1 = AnalyticCir::new(vec![MultipathTap::new(0.7, 1.0, 3e-12).unwrap()]).unwrap();
        let h2 = AnalyticCir::new(vec![MultipathTap::new(1.3, 2.0, 5e-12).unwrap()]).unwrap();
        assert!(verify_numeric_vs_analytic(&h1, &h2, 1e-12).unwrap() < 1e-12);
    }

    #[test]
    fn reflected_autocorrelation_peaks_at_horizon() {
        let h = AnalyticCir::new(vec![
            MultipathTap::new(1.0, 0.3, 1e-12).unwrap(),
            MultipathTap::new(0.5, 2.0, 4e-12).unwrap(),
        ])
        .unwrap();
        let horizon = 6e-12;
        let r = cross_corr_analytic(&h, &reflect_delays(&h, horizon).unwrap());
        let peak = r.peak().unwrap();
        assert!((peak.delay - horizon).abs() < 1e-24);
        assert!((peak.amplitude - h.energy()).abs() < 1e-15);
    }
}
