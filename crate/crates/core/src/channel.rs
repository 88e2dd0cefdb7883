//! Channel impulse responses.
//!
//! A channel between one transmitter and one receiver is a tapped delay line
//! `h(t) = sum_n A_n exp(j theta_n) delta(t - tau_n)` held as an
//! [`AnalyticCir`]. CIRs come either from [`synth_reverberant`], a
//! Poisson-arrival / exponential-decay stand-in for a full-wave solver, or
//! from the text interchange format read by [`import_cir`].
//!
//! Synthesized channels are unit energy. Absolute path loss is carried
//! separately as a per-pair gain in [`ChannelMatrix`].

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};

use crate::error::{invalid, Error, Result};
use crate::waveform::SampledWaveform;

/// Default discretization step (1 ps).
pub const DEFAULT_GRID_DT: f64 = 1e-12;
/// Default zero padding appended after the last tap when sampling (2 ns).
pub const DEFAULT_CIR_PAD: f64 = 2e-9;
/// Taps whose delays differ by less than this are treated as coincident.
pub const DELAY_MERGE_TOLERANCE: f64 = 1e-15;

/// One multipath component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultipathTap {
    pub amplitude: f64,
    /// Radians in `[0, 2pi)`.
    pub phase: f64,
    /// Seconds.
    pub delay: f64,
}

impl MultipathTap {
    pub fn new(amplitude: f64, phase: f64, delay: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(invalid("amplitude", format!("must be finite and >= 0, got {amplitude}")));
        }
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(invalid("delay", format!("must be finite and >= 0, got {delay}")));
        }
        if !phase.is_finite() {
            return Err(invalid("phase", "must be finite"));
        }
        Ok(Self { amplitude, phase: wrap_phase(phase), delay })
    }

    pub fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    /// Builds a tap from a complex gain; the phase of a zero gain is 0.
    pub fn from_phasor(gain: Complex64, delay: f64) -> Result<Self> {
        let amplitude = gain.norm();
        let phase = if amplitude > 0.0 { gain.arg() } else { 0.0 };
        Self::new(amplitude, phase, delay)
    }
}

pub(crate) fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Tap list sorted by ascending delay with positive total energy.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCir {
    taps: Vec<MultipathTap>,
}

impl AnalyticCir {
    pub fn new(mut taps: Vec<MultipathTap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyChannel);
        }
        taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        let cir = Self { taps };
        if !(cir.energy() > 0.0) {
            return Err(Error::EmptyChannel);
        }
        Ok(cir)
    }

    /// Single tap of unit amplitude and zero phase at `delay`.
    pub fn impulse(delay: f64) -> Result<Self> {
        Self::new(vec![MultipathTap::new(1.0, 0.0, delay)?])
    }

    pub fn taps(&self) -> &[MultipathTap] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// `sum A_n^2`
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.amplitude * t.amplitude).sum()
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.last().map_or(0.0, |t| t.delay)
    }

    pub fn min_delay(&self) -> f64 {
        self.taps.first().map_or(0.0, |t| t.delay)
    }

    /// Copy with amplitudes scaled so that `sum A_n^2 = 1`.
    pub fn normalized(&self) -> Self {
        let s = 1.0 / self.energy().sqrt();
        Self {
            taps: self
                .taps
                .iter()
                .map(|t| MultipathTap { amplitude: t.amplitude * s, ..*t })
                .collect(),
        }
    }

    /// Smallest gap between consecutive distinct tap delays, `None` for a
    /// single tap.
    pub fn min_tap_gap(&self) -> Option<f64> {
        self.taps.windows(2).map(|w| w[1].delay - w[0].delay).reduce(f64::min)
    }

    /// Delays rounded to the grid `k * dt`, with taps that land on the same
    /// grid point summed as phasors. Zero-sum bins are dropped.
    pub fn snapped_to_grid(&self, dt: f64) -> Result<Self> {
        let mut bins: BTreeMap<u64, Complex64> = BTreeMap::new();
        for t in &self.taps {
            *bins.entry(nearest_bin(t.delay, dt)).or_default() += t.phasor();
        }
        let taps = bins
            .into_iter()
            .filter(|(_, g)| g.norm_sqr() > 0.0)
            .map(|(k, g)| MultipathTap::from_phasor(g, k as f64 * dt))
            .collect::<Result<Vec<_>>>()?;
        Self::new(taps)
    }
}

fn nearest_bin(delay: f64, dt: f64) -> u64 {
    (delay / dt).round() as u64
}

/// Parameters of the reverberant channel synthesizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSynthParams {
    /// Mean diffuse tap arrivals per second.
    pub tap_arrival_rate: f64,
    /// Power-delay profile decay constant, seconds.
    pub decay_time_constant: f64,
    /// Support after the first arrival, seconds.
    pub span: f64,
    /// Line-of-sight amplitude relative to the unit-power diffuse profile
    /// head; 0 disables it.
    pub los_gain: f64,
    pub first_arrival_delay: f64,
}

impl Default for ChannelSynthParams {
    fn default() -> Self {
        Self {
            tap_arrival_rate: 2e10,
            decay_time_constant: 0.5e-9,
            span: 4e-9,
            los_gain: 0.0,
            first_arrival_delay: 0.0,
        }
    }
}

impl ChannelSynthParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tap_arrival_rate", self.tap_arrival_rate),
            ("decay_time_constant", self.decay_time_constant),
            ("span", self.span),
            ("los_gain", self.los_gain),
            ("first_arrival_delay", self.first_arrival_delay),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.span > 0.0) {
            return Err(invalid("span", "must be > 0"));
        }
        Ok(())
    }
}

/// Draws a reverberant CIR.
///
/// Diffuse taps arrive as a Poisson process of rate `tap_arrival_rate` over
/// `[first_arrival_delay, first_arrival_delay + span]`. A tap at excess delay
/// `x` has mean power `exp(-x / decay_time_constant)` and Rayleigh amplitude
/// with uniform phase. The optional LOS tap sits at the first arrival with
/// zero phase. The result is scaled to unit energy.
pub fn synth_reverberant(params: &ChannelSynthParams, seed: u64) -> Result<AnalyticCir> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps = Vec::new();

    if params.los_gain > 0.0 {
        taps.push(MultipathTap::new(params.los_gain, 0.0, params.first_arrival_delay)?);
    }

    if params.tap_arrival_rate > 0.0 && params.decay_time_constant > 0.0 {
        let gaps = Exp::new(params.tap_arrival_rate)
            .map_err(|e| invalid("tap_arrival_rate", e.to_string()))?;
        let mut excess = gaps.sample(&mut rng);
        while excess <= params.span {
            let mean_power = (-excess / params.decay_time_constant).exp();
            let fade: f64 = Exp1.sample(&mut rng);
            let amplitude = (mean_power * fade).sqrt();
            let phase = rng.random::<f64>() * TAU;
            if amplitude > 0.0 {
                taps.push(MultipathTap::new(
                    amplitude,
                    phase,
                    params.first_arrival_delay + excess,
                )?);
            }
            excess += gaps.sample(&mut rng);
        }
    }

    if taps.is_empty() {
        return Err(Error::EmptyChannel);
    }
    Ok(AnalyticCir::new(taps)?.normalized())
}

/// A CIR laid onto a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCir {
    pub waveform: SampledWaveform,
    /// Taps that shared a grid bin with an earlier tap. Non-zero means the
    /// grid is coarser than the smallest tap spacing and energy is no longer
    /// conserved exactly.
    pub merged_taps: usize,
}

impl SampledCir {
    pub fn has_merged_taps(&self) -> bool {
        self.merged_taps > 0
    }
}

/// Places each tap on the nearest bin of a grid starting at `t = 0` and
/// covering `[0, max_delay + pad]`.
///
/// A tap contributes `A exp(j theta) / sqrt(dt)` so that
/// `sum |x|^2 * dt = sum A_n^2` when no two taps share a bin.
pub fn to_sampled(cir: &AnalyticCir, dt: f64, pad: f64) -> Result<SampledCir> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(pad >= 0.0 && pad.is_finite()) {
        return Err(invalid("pad", format!("must be >= 0, got {pad}")));
    }
    let last_bin = nearest_bin(cir.max_delay(), dt) as usize;
    let covered = ((cir.max_delay() + pad) / dt + 1e-9).floor() as usize;
    let len = covered.max(last_bin) + 1;

    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    let mut occupied = vec![false; len];
    let mut merged_taps = 0;
    let scale = 1.0 / dt.sqrt();
    for tap in cir.taps() {
        let k = nearest_bin(tap.delay, dt) as usize;
        if occupied[k] {
            merged_taps += 1;
        }
        occupied[k] = true;
        samples[k] += tap.phasor() * scale;
    }
    Ok(SampledCir {
        waveform: SampledWaveform::new(samples, dt, 0.0)?,
        merged_taps,
    })
}

/// RMS delay spread: square root of the second central moment of the
/// power-delay profile.
pub fn rms_delay_spread(cir: &AnalyticCir) -> f64 {
    let total = cir.energy();
    let mean = cir.taps().iter().map(|t| t.amplitude.powi(2) * t.delay).sum::<f64>() / total;
    let var = cir
        .taps()
        .iter()
        .map(|t| t.amplitude.powi(2) * (t.delay - mean).powi(2))
        .sum::<f64>()
        / total;
    var.max(0.0).sqrt()
}

const CIR_HEADER: &str = "cir v1";

/// Renders a CIR in the `cir v1` interchange format.
pub fn export_cir(cir: &AnalyticCir) -> String {
    let mut out = format!("{CIR_HEADER} taps={}\n", cir.len());
    for t in cir.taps() {
        out.push_str(&format!("{:.17e} {:.17e} {:.17e}\n", t.amplitude, t.phase, t.delay));
    }
    out
}

/// Parses the `cir v1` interchange format. Blank lines and lines starting
/// with `#` are ignored.
pub fn import_cir(text: &str) -> Result<AnalyticCir> {
    let mut lines = content_lines(text);
    let (header_line, header) = lines.next().ok_or(Error::EmptyChannel)?;
    let declared = parse_header(header, header_line)?;

    let mut taps = Vec::with_capacity(declared);
    for (line, body) in lines {
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                reason: format!("expected `<amplitude> <phase_rad> <delay_s>`, got {} fields", fields.len()),
            });
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                reason: format!("invalid {what} `{s}`"),
            })
        };
        let amplitude = num(fields[0], "amplitude")?;
        let phase = num(fields[1], "phase")?;
        let delay = num(fields[2], "delay")?;
        if amplitude < 0.0 {
            return Err(Error::Parse { line, reason: format!("negative amplitude {amplitude}") });
        }
        if delay < 0.0 {
            return Err(Error::Parse { line, reason: format!("negative delay {delay}") });
        }
        let tap = MultipathTap::new(amplitude, phase, delay)
            .map_err(|e| Error::Parse { line, reason: e.to_string() })?;
        taps.push(tap);
    }
    if taps.len() != declared {
        return Err(Error::Parse {
            line: header_line,
            reason: format!("header declares {declared} taps, found {}", taps.len()),
        });
    }
    AnalyticCir::new(taps)
}

/// Non-comment, non-blank lines with 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header(header: &str, line: usize) -> Result<usize> {
    let rest = header.strip_prefix(CIR_HEADER).ok_or_else(|| Error::Parse {
        line,
        reason: format!("expected header `{CIR_HEADER} taps=<N>`"),
    })?;
    let count = rest
        .trim()
        .strip_prefix("taps=")
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| Error::Parse { line, reason: "missing or invalid `taps=<N>`".into() })?;
    if count == 0 {
        return Err(Error::EmptyChannel);
    }
    Ok(count)
}

/// Identifier of an antenna / node on the package.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEntry {
    pub cir: AnalyticCir,
    /// Linear power gain applied on top of the (unit-energy) CIR.
    pub gain: f64,
}

/// CIR per ordered (transmitter, receiver) pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelMatrix {
    nodes: BTreeSet<NodeId>,
    cirs: BTreeMap<(NodeId, NodeId), ChannelEntry>,
}

impl ChannelMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId) {
        self.nodes.insert(id);
    }

    pub fn insert(&mut self, tx: NodeId, rx: NodeId, cir: AnalyticCir) -> Result<()> {
        self.insert_with_gain(tx, rx, cir, 1.0)
    }

    pub fn insert_with_gain(&mut self, tx: NodeId, rx: NodeId, cir: AnalyticCir, gain: f64) -> Result<()> {
        if tx == rx {
            return Err(invalid("channel", format!("self pair {tx} -> {rx} is not allowed")));
        }
        if !(gain >= 0.0 && gain.is_finite()) {
            return Err(invalid("gain", format!("must be finite and >= 0, got {gain}")));
        }
        self.nodes.insert(tx.clone());
        self.nodes.insert(rx.clone());
        self.cirs.insert((tx, rx), ChannelEntry { cir, gain });
        Ok(())
    }

    pub fn get(&self, tx: &NodeId, rx: &NodeId) -> Option<&ChannelEntry> {
        self.cirs.get(&(tx.clone(), rx.clone()))
    }

    pub fn require(&self, tx: &NodeId, rx: &NodeId) -> Result<&ChannelEntry> {
        self.get(tx, rx).ok_or_else(|| Error::MissingChannel {
            tx: tx.to_string(),
            rx: rx.to_string(),
        })
    }

    pub fn contains(&self, tx: &NodeId, rx: &NodeId) -> bool {
        self.get(tx, rx).is_some()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&NodeId, &NodeId, &ChannelEntry)> {
        self.cirs.iter().map(|((t, r), e)| (t, r, e))
    }

    /// Receivers reachable from `tx`.
    pub fn receivers_of<'a>(&'a self, tx: &'a NodeId) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.cirs.keys().filter(move |(t, _)| t == tx).map(|(_, r)| r)
    }
}
