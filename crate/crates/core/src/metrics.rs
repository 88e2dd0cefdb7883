//! Windowed SINR, spatial focusing and peak statistics.

use std::collections::BTreeMap;

use crate::channel::NodeId;
use crate::error::{invalid, Error, Result};
use crate::waveform::SampledWaveform;

/// Energies collected around a focusing peak.
///
/// The denominator of `sinr_db` is `isi_energy + cci_energy + noise_energy`,
/// where `noise_energy = noise_power * t_rate` is the noise collected by the
/// same `t_rate`-wide window as the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrReport {
    pub signal_energy: f64,
    pub isi_energy: f64,
    pub cci_energy: f64,
    pub noise_power: f64,
    pub noise_energy: f64,
    pub sinr_db: f64,
}

impl SinrReport {
    pub fn sinr_linear(&self) -> f64 {
        10f64.powf(self.sinr_db / 10.0)
    }
}

/// SINR of a single isolated link. `y` is the noiseless response to one
/// transmitted symbol; the signal window is `[peak - t_rate/2, peak + t_rate/2)`
/// and ISI is everything from the start of the response up to the window
/// plus everything from the window end to `2 * peak_time`.
pub fn sinr_stsr(y: &SampledWaveform, symbol_rate: f64, peak_time: f64, noise_power: f64) -> Result<SinrReport> {
    windowed_sinr(y, &[], symbol_rate, peak_time, noise_power, 2.0 * peak_time)
}

/// SINR with co-channel interference. Each interferer response is the
/// contribution of one other link at this receiver, simulated with the
/// desired link silenced; its energy inside the signal window counts as CCI.
pub fn sinr_mtmr(
    y: &SampledWaveform,
    interferer_responses: &[SampledWaveform],
    symbol_rate: f64,
    peak_time: f64,
    noise_power: f64,
) -> Result<SinrReport> {
    windowed_sinr(y, interferer_responses, symbol_rate, peak_time, noise_power, 2.0 * peak_time)
}

/// [`sinr_mtmr`] with an explicit end for the trailing ISI integral. The
/// TR forms stop at `2 * peak_time`, where the focused autocorrelation
/// ends; an unprecoded response has no such symmetry and is integrated to
/// its own end.
pub fn windowed_sinr(
    y: &SampledWaveform,
    interferers: &[SampledWaveform],
    symbol_rate: f64,
    peak_time: f64,
    noise_power: f64,
    isi_end: f64,
) -> Result<SinrReport> {
    if !(symbol_rate > 0.0 && symbol_rate.is_finite()) {
        return Err(invalid("symbol_rate", format!("must be positive, got {symbol_rate}")));
    }
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(invalid("noise_power", format!("must be finite and >= 0, got {noise_power}")));
    }
    if !(peak_time >= y.t0() && peak_time <= y.end_time()) {
        return Err(Error::PeakOutsideWaveform(peak_time));
    }
    let t_rate = 1.0 / symbol_rate;
    let (t1, t2) = (peak_time - t_rate / 2.0, peak_time + t_rate / 2.0);

    let signal_energy = y.energy_between(t1, t2);
    let isi_energy = y.energy_between(y.t0(), t1) + y.energy_between(t2, isi_end);
    let cci_energy: f64 = interferers.iter().map(|w| w.energy_between(t1, t2)).sum();
    let noise_energy = noise_power * t_rate;

    let denom = isi_energy + cci_energy + noise_energy;
    let sinr_db = if signal_energy == 0.0 {
        f64::NEG_INFINITY
    } else if denom == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal_energy / denom).log10()
    };
    Ok(SinrReport { signal_energy, isi_energy, cci_energy, noise_power, noise_energy, sinr_db })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusingRatio {
    /// `P_target / sum(P_others)`; `+inf` when nothing reaches the others.
    pub ratio: f64,
    pub unbounded: bool,
}

/// Power at `target` over the summed power at every other node.
pub fn focusing_ratio(powers: &BTreeMap<NodeId, f64>, target: &NodeId) -> Result<FocusingRatio> {
    let p_target = *powers.get(target).ok_or_else(|| Error::UnknownNode(target.to_string()))?;
    if powers.len() < 2 {
        return Err(invalid("powers", "need at least one node besides the target"));
    }
    if powers.values().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(invalid("powers", "must be finite and >= 0"));
    }
    let others: f64 = powers.iter().filter(|(n, _)| *n != target).map(|(_, p)| p).sum();
    Ok(if others == 0.0 {
        FocusingRatio { ratio: f64::INFINITY, unbounded: true }
    } else {
        FocusingRatio { ratio: p_target / others, unbounded: false }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakStats {
    pub peak_power: f64,
    pub in_window_energy: f64,
    pub out_window_energy: f64,
}

impl PeakStats {
    /// `10 log10(in / out)`, `+inf` when nothing leaks out of the window.
    pub fn in_out_ratio_db(&self) -> f64 {
        if self.out_window_energy == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (self.in_window_energy / self.out_window_energy).log10()
        }
    }
}

/// Splits the energy of `y` at `[peak_time - window/2, peak_time + window/2)`.
pub fn peak_stats(y: &SampledWaveform, window: f64, peak_time: f64) -> Result<PeakStats> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(invalid("window", format!("must be positive, got {window}")));
    }
    let (start, end) = (peak_time - window / 2.0, peak_time + window / 2.0);
    Ok(PeakStats {
        peak_power: y.peak_power_between(start, end),
        in_window_energy: y.energy_between(start, end),
        out_window_energy: y.energy_between(f64::NEG_INFINITY, start) + y.energy_between(end, f64::INFINITY),
    })
}
