//! Time-reversal precoding filters.
//!
//! The ideal filter is the conjugated, time-reversed sampled CIR, shifted by
//! the CIR duration `T` so that it is causal. Convolved with its own channel
//! it peaks at `t = T`. Realizable variants are derived from it by
//! zero-order hold at a finite sampling rate, a timing offset of the held
//! samples, and uniform amplitude quantization. Every constructor and
//! transform returns a unit-energy filter; transmit power is applied at
//! modulation time.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::content_lines;
use crate::error::{invalid, Error, Result};
use crate::waveform::SampledWaveform;

/// One construction step, in application order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterStage {
    Ideal,
    /// Zero-order hold at `sampling_rate` Hz with the first sampling instant
    /// at `phase / sampling_rate` after the filter start.
    Zoh { sampling_rate: f64, phase: f64 },
    /// Held samples moved by `offset_fraction` sampling periods.
    Jittered { offset_fraction: f64 },
    Quantized { bits: u32 },
}

impl fmt::Display for FilterStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterStage::Ideal => f.write_str("ideal"),
            FilterStage::Zoh { sampling_rate, phase } => {
                write!(f, "zoh@{}GHz", sampling_rate / 1e9)?;
                if *phase != 0.0 {
                    write!(f, "/{phase}")?;
                }
                Ok(())
            }
            FilterStage::Jittered { offset_fraction } => write!(f, "jitter@{offset_fraction}"),
            FilterStage::Quantized { bits } => write!(f, "quant@{bits}"),
        }
    }
}

impl FromStr for FilterStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid("filter", format!("unknown filter stage `{s}`"));
        let s = s.trim();
        if s == "ideal" {
            return Ok(FilterStage::Ideal);
        }
        let (name, arg) = s.split_once('@').ok_or_else(bad)?;
        match name {
            "zoh" => {
                let (rate, phase) = match arg.split_once('/') {
                    Some((r, p)) => (r, p.parse::<f64>().map_err(|_| bad())?),
                    None => (arg, 0.0),
                };
                let ghz = rate
                    .strip_suffix("GHz")
                    .and_then(|g| g.parse::<f64>().ok())
                    .ok_or_else(bad)?;
                Ok(FilterStage::Zoh { sampling_rate: ghz * 1e9, phase })
            }
            "jitter" => Ok(FilterStage::Jittered { offset_fraction: arg.parse().map_err(|_| bad())? }),
            "quant" => Ok(FilterStage::Quantized { bits: arg.parse().map_err(|_| bad())? }),
            _ => Err(bad()),
        }
    }
}

/// Ordered stage list, rendered as `ideal+zoh@100GHz+jitter@0.5`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Construction(Vec<FilterStage>);

impl Construction {
    pub fn stages(&self) -> &[FilterStage] {
        &self.0
    }

    /// Sampling rate of the most recent hold stage.
    pub fn zoh_rate(&self) -> Option<f64> {
        self.0.iter().rev().find_map(|s| match s {
            FilterStage::Zoh { sampling_rate, .. } => Some(*sampling_rate),
            _ => None,
        })
    }

    fn with(&self, stage: FilterStage) -> Self {
        let mut v = self.0.clone();
        v.push(stage);
        Self(v)
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&labels.join("+"))
    }
}

impl FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split('+').map(str::parse).collect::<Result<Vec<_>>>().map(Construction)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrFilter {
    pub waveform: SampledWaveform,
    /// Shift `T` applied to the anti-causal `h*(-t)`; the focused peak of
    /// `h * g` sits at this time.
    pub causal_delay: f64,
    pub construction: Construction,
    /// Energy of the source CIR before normalization.
    pub source_energy: f64,
}

impl TrFilter {
    fn derive(&self, samples: Vec<Complex64>, stage: FilterStage) -> Result<TrFilter> {
        let w = SampledWaveform::new(samples, self.waveform.dt(), self.waveform.t0())?;
        Ok(TrFilter {
            waveform: w.normalized()?,
            causal_delay: self.causal_delay,
            construction: self.construction.with(stage),
            source_energy: self.source_energy,
        })
    }
}

/// `g[k] = conj(h[K-1-k])`, scaled to unit energy.
pub fn ideal_tr(cir_sampled: &SampledWaveform) -> Result<TrFilter> {
    let source_energy = cir_sampled.energy();
    if !(source_energy > 0.0 && source_energy.is_finite()) {
        return Err(Error::ZeroEnergy);
    }
    let waveform = cir_sampled.conj_reversed().normalized()?;
    let causal_delay = cir_sampled.t0() + (cir_sampled.len() - 1) as f64 * cir_sampled.dt();
    Ok(TrFilter {
        waveform,
        causal_delay,
        construction: Construction(vec![FilterStage::Ideal]),
        source_energy,
    })
}

/// Zero-order hold with the sampling grid anchored at the filter start.
pub fn zoh_resample(filter: &TrFilter, sampling_rate: f64) -> Result<TrFilter> {
    zoh_resample_with_phase(filter, sampling_rate, 0.0)
}

/// Samples the filter at `(n + phase) / sampling_rate` and holds each value
/// on the fine grid until the next instant. Bins before the first instant
/// are zero.
pub fn zoh_resample_with_phase(filter: &TrFilter, sampling_rate: f64, phase: f64) -> Result<TrFilter> {
    let dt = filter.waveform.dt();
    let grid_rate = 1.0 / dt;
    if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
        return Err(invalid("sampling_rate", format!("must be positive, got {sampling_rate}")));
    }
    if sampling_rate > grid_rate * (1.0 + 1e-9) {
        return Err(Error::CannotUpsample { rate: sampling_rate, grid_rate });
    }
    if !(0.0..1.0).contains(&phase) {
        return Err(invalid("phase", format!("must lie in [0, 1), got {phase}")));
    }
    let src = filter.waveform.samples();
    let bins_per_sample = grid_rate / sampling_rate;
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    let mut n = 0u64;
    loop {
        let start = ((n as f64 + phase) * bins_per_sample).round() as usize;
        if start >= src.len() {
            break;
        }
        let next = (((n + 1) as f64 + phase) * bins_per_sample).round() as usize;
        let held = src[start];
        for v in &mut out[start..next.min(src.len())] {
            *v = held;
        }
        n += 1;
    }
    filter.derive(out, FilterStage::Zoh { sampling_rate, phase })
}

/// Shifts the held samples by `offset_fraction / f_s` (positive is later).
/// Samples pushed past either end are dropped and the vacated bins are
/// zero.
pub fn apply_jitter(filter: &TrFilter, offset_fraction: f64) -> Result<TrFilter> {
    let rate = filter.construction.zoh_rate().ok_or(Error::JitterRequiresSampledFilter)?;
    if !(offset_fraction.abs() <= 1.0) {
        return Err(invalid("offset_fraction", format!("|offset| must be <= 1, got {offset_fraction}")));
    }
    let src = filter.waveform.samples();
    let shift = (offset_fraction / (rate * filter.waveform.dt())).round() as isize;
    let len = src.len() as isize;
    let out = (0..len)
        .map(|k| {
            let from = k - shift;
            if (0..len).contains(&from) {
                src[from as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    filter.derive(out, FilterStage::Jittered { offset_fraction })
}

/// Uniform mid-rise quantizer with `2^bits` levels spanning
/// `[-m, +m]`, `m` the largest real or imaginary magnitude, applied to both
/// components independently.
pub fn quantize_amplitude(filter: &TrFilter, bits: u32) -> Result<TrFilter> {
    if !(1..=52).contains(&bits) {
        return Err(invalid("bits", format!("must lie in 1..=52, got {bits}")));
    }
    let src = filter.waveform.samples();
    let m = src.iter().map(|x| x.re.abs().max(x.im.abs())).fold(0.0, f64::max);
    let top = ((1u64 << bits) - 1) as f64;
    let step = 2.0 * m / top;
    let q = |x: f64| -m + ((x + m) / step).round().clamp(0.0, top) * step;
    let out = src.iter().map(|x| Complex64::new(q(x.re), q(x.im))).collect();
    filter.derive(out, FilterStage::Quantized { bits })
}

/// How to build the precoding filter for every link.
///
/// `none` transmits the symbol train without precoding; otherwise the ideal
/// TR filter followed by the listed transforms. Text form:
/// `none` | `tr` | `tr+zoh@100GHz+jitter@0.5+quant@6`.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterRecipe {
    NonTr,
    Tr(Vec<FilterStage>),
}

impl Default for FilterRecipe {
    fn default() -> Self {
        FilterRecipe::Tr(Vec::new())
    }
}

impl FilterRecipe {
    pub fn is_tr(&self) -> bool {
        matches!(self, FilterRecipe::Tr(_))
    }

    /// Sets the hold rate, replacing an existing hold stage or inserting one
    /// right after the ideal filter. No effect on `none`.
    pub fn with_zoh_rate(&self, sampling_rate: f64) -> Self {
        match self {
            FilterRecipe::NonTr => FilterRecipe::NonTr,
            FilterRecipe::Tr(stages) => {
                let mut stages = stages.clone();
                match stages.iter_mut().find(|s| matches!(s, FilterStage::Zoh { .. })) {
                    Some(FilterStage::Zoh { sampling_rate: r, .. }) => *r = sampling_rate,
                    _ => stages.insert(0, FilterStage::Zoh { sampling_rate, phase: 0.0 }),
                }
                FilterRecipe::Tr(stages)
            }
        }
    }

    pub fn zoh_rate(&self) -> Option<f64> {
        match self {
            FilterRecipe::NonTr => None,
            FilterRecipe::Tr(stages) => stages.iter().find_map(|s| match s {
                FilterStage::Zoh { sampling_rate, .. } => Some(*sampling_rate),
                _ => None,
            }),
        }
    }

    /// `None` for the non-TR baseline.
    pub fn build(&self, cir_sampled: &SampledWaveform) -> Result<Option<TrFilter>> {
        let FilterRecipe::Tr(stages) = self else {
            return Ok(None);
        };
        let mut f = ideal_tr(cir_sampled)?;
        for stage in stages {
            f = match *stage {
                FilterStage::Ideal => f,
                FilterStage::Zoh { sampling_rate, phase } => zoh_resample_with_phase(&f, sampling_rate, phase)?,
                FilterStage::Jittered { offset_fraction } => apply_jitter(&f, offset_fraction)?,
                FilterStage::Quantized { bits } => quantize_amplitude(&f, bits)?,
            };
        }
        Ok(Some(f))
    }
}

impl fmt::Display for FilterRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterRecipe::NonTr => f.write_str("none"),
            FilterRecipe::Tr(stages) => {
                f.write_str("tr")?;
                for s in stages {
                    write!(f, "+{s}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for FilterRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" {
            return Ok(FilterRecipe::NonTr);
        }
        let mut parts = s.split('+');
        if parts.next() != Some("tr") {
            return Err(invalid("filter", format!("recipe must be `none` or start with `tr`, got `{s}`")));
        }
        let stages = parts
            .map(str::parse::<FilterStage>)
            .filter(|s| !matches!(s, Ok(FilterStage::Ideal)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterRecipe::Tr(stages))
    }
}

const FILTER_HEADER: &str = "filter v1";

/// `filter v1` text form: a header carrying grid and provenance, then one
/// `<re> <im>` line per sample.
pub fn export_filter(filter: &TrFilter) -> String {
    let w = &filter.waveform;
    let mut out = format!(
        "{FILTER_HEADER} samples={} dt={:.17e} t0={:.17e} causal_delay={:.17e} source_energy={:.17e} construction={}\n",
        w.len(),
        w.dt(),
        w.t0(),
        filter.causal_delay,
        filter.source_energy,
        filter.construction,
    );
    for x in w.samples() {
        out.push_str(&format!("{:.17e} {:.17e}\n", x.re, x.im));
    }
    out
}

pub fn import_filter(text: &str) -> Result<TrFilter> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, reason: "missing header".into() })?;
    let rest = header
        .strip_prefix(FILTER_HEADER)
        .ok_or_else(|| Error::Parse { line: hline, reason: format!("expected `{FILTER_HEADER}` header") })?;
    let mut fields = std::collections::BTreeMap::new();
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: hline, reason: format!("malformed field `{kv}`") })?;
        fields.insert(k, v);
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Parse { line: hline, reason: format!("missing `{k}=`") })
    };
    let num = |k: &str| {
        get(k)?
            .parse::<f64>()
            .map_err(|_| Error::Parse { line: hline, reason: format!("invalid `{k}`") })
    };
    let count: usize = get("samples")?
        .parse()
        .map_err(|_| Error::Parse { line: hline, reason: "invalid `samples`".into() })?;
    let construction: Construction = get("construction")?
        .parse()
        .map_err(|e: Error| Error::Parse { line: hline, reason: e.to_string() })?;

    let mut samples = Vec::with_capacity(count);
    for (line, body) in lines {
        let v: Vec<&str> = body.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse { line, reason: format!("invalid number `{s}`") });
        if v.len() != 2 {
            return Err(Error::Parse { line, reason: "expected `<re> <im>`".into() });
        }
        samples.push(Complex64::new(parse(v[0])?, parse(v[1])?));
    }
    if samples.len() != count {
        return Err(Error::Parse {
            line: hline,
            reason: format!("header declares {count} samples, found {}", samples.len()),
        });
    }
    Ok(TrFilter {
        waveform: SampledWaveform::new(samples, num("dt")?, num("t0")?)?,
        causal_delay: num("causal_delay")?,
        construction,
        source_energy: num("source_energy")?,
    })
}
