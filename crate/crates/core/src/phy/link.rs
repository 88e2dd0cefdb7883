//! Multi-link precoding, propagation and end-to-end BER.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{to_sampled, ChannelMatrix, NodeId, SampledCir, DEFAULT_CIR_PAD, DEFAULT_GRID_DT};
use crate::correlation::apply_response;
use crate::error::{invalid, Error, Result};
use crate::metrics::{focusing_ratio, windowed_sinr, FocusingRatio, SinrReport};
use crate::phy::{energy_detect, gen_bits_stream, ook_modulate, optimize_threshold, BitStream, DetectionRecord};
use crate::trfilter::{FilterRecipe, TrFilter};
use crate::waveform::SampledWaveform;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

pub const DEFAULT_NOISE_TEMPERATURE: f64 = 300.0;

const NOISE_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub tx: NodeId,
    pub rx: NodeId,
    pub bit_count: usize,
    /// Linear power gain (path loss) applied to everything `tx` sends to `rx`.
    pub link_gain: f64,
    /// Share of the total transmit power relative to the other links.
    pub power_weight: f64,
}

impl LinkSpec {
    pub fn new(tx: impl Into<NodeId>, rx: impl Into<NodeId>, bit_count: usize) -> Self {
        Self { tx: tx.into(), rx: rx.into(), bit_count, link_gain: 1.0, power_weight: 1.0 }
    }

    pub fn with_gain(mut self, link_gain: f64) -> Self {
        self.link_gain = link_gain;
        self
    }

    pub fn with_weight(mut self, power_weight: f64) -> Self {
        self.power_weight = power_weight;
        self
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId::new(s)
    }
}

/// Everything needed to run one Monte Carlo point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    pub links: Vec<LinkSpec>,
    pub channel: ChannelMatrix,
    pub symbol_rate: f64,
    /// Average power over all links, watts. With equiprobable bits each
    /// link's on-symbol power is twice its average share.
    pub total_tx_power: f64,
    pub noise_temperature: f64,
    /// Bandwidth in `k T B`; the symbol rate when `None`.
    pub noise_bandwidth: Option<f64>,
    pub filter_recipe: FilterRecipe,
    pub grid_dt: f64,
    pub cir_pad: f64,
    pub bit_seed: u64,
    pub noise_seed: u64,
}

impl LinkScenario {
    pub fn new(links: Vec<LinkSpec>, channel: ChannelMatrix, symbol_rate: f64, total_tx_power: f64) -> Self {
        Self {
            links,
            channel,
            symbol_rate,
            total_tx_power,
            noise_temperature: DEFAULT_NOISE_TEMPERATURE,
            noise_bandwidth: None,
            filter_recipe: FilterRecipe::default(),
            grid_dt: DEFAULT_GRID_DT,
            cir_pad: DEFAULT_CIR_PAD,
            bit_seed: 0,
            noise_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(invalid("links", "need at least one link"));
        }
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(invalid("symbol_rate", format!("must be positive, got {}", self.symbol_rate)));
        }
        if !(self.total_tx_power > 0.0 && self.total_tx_power.is_finite()) {
            return Err(invalid("total_tx_power", format!("must be positive, got {}", self.total_tx_power)));
        }
        if !(self.noise_temperature >= 0.0 && self.noise_temperature.is_finite()) {
            return Err(invalid("noise_temperature", format!("must be >= 0, got {}", self.noise_temperature)));
        }
        if let Some(b) = self.noise_bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid("noise_bandwidth", format!("must be positive, got {b}")));
            }
        }
        if !(self.grid_dt > 0.0 && self.grid_dt.is_finite()) {
            return Err(invalid("grid_dt", format!("must be positive, got {}", self.grid_dt)));
        }
        if !(self.cir_pad >= 0.0 && self.cir_pad.is_finite()) {
            return Err(invalid("cir_pad", format!("must be >= 0, got {}", self.cir_pad)));
        }
        let period = 1.0 / self.symbol_rate;
        if period < self.grid_dt * (1.0 - 1e-9) {
            return Err(Error::SymbolPeriodTooShort { period, dt: self.grid_dt });
        }
        let mut seen = BTreeSet::new();
        for l in &self.links {
            if l.bit_count == 0 {
                return Err(invalid("bit_count", format!("link {} -> {} has no bits", l.tx, l.rx)));
            }
            if !(l.link_gain >= 0.0 && l.link_gain.is_finite()) {
                return Err(invalid("link_gain", format!("link {} -> {}: must be >= 0", l.tx, l.rx)));
            }
            if !(l.power_weight > 0.0 && l.power_weight.is_finite()) {
                return Err(invalid("power_weight", format!("link {} -> {}: must be positive", l.tx, l.rx)));
            }
            self.channel.require(&l.tx, &l.rx)?;
            if !seen.insert((l.tx.clone(), l.rx.clone())) {
                return Err(invalid("links", format!("duplicate link {} -> {}", l.tx, l.rx)));
            }
        }
        Ok(())
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.symbol_rate
    }

    /// `k_B T B`, watts.
    pub fn noise_power(&self) -> f64 {
        BOLTZMANN * self.noise_temperature * self.noise_bandwidth.unwrap_or(self.symbol_rate)
    }

    /// Average power of link `index`; on-symbol impulses carry twice this.
    pub fn link_power(&self, index: usize) -> f64 {
        let total_weight: f64 = self.links.iter().map(|l| l.power_weight).sum();
        self.total_tx_power * self.links[index].power_weight / total_weight
    }

    /// Amplitude factor for everything `tx` sends to `rx`.
    pub fn pair_amplitude(&self, tx: &NodeId, rx: &NodeId) -> Result<f64> {
        let entry = self.channel.require(tx, rx)?;
        let link_gain = self.links.iter().find(|l| &l.tx == tx && &l.rx == rx).map_or(1.0, |l| l.link_gain);
        Ok((entry.gain * link_gain).sqrt())
    }

    pub fn transmitters(&self) -> BTreeSet<NodeId> {
        self.links.iter().map(|l| l.tx.clone()).collect()
    }

    pub fn receivers(&self) -> BTreeSet<NodeId> {
        self.links.iter().map(|l| l.rx.clone()).collect()
    }

    /// Noise stream of a receiver, disjoint from the per-link bit streams.
    fn node_stream(&self, node: &NodeId) -> u64 {
        NOISE_STREAM_BASE + self.channel.node_ids().position(|n| n == node).unwrap_or(0) as u64
    }

    /// Samples every channel leaving a transmitter of this scenario.
    pub fn sample_channels(&self) -> Result<BTreeMap<(NodeId, NodeId), SampledCir>> {
        let mut out = BTreeMap::new();
        for tx in self.transmitters() {
            for rx in self.channel.receivers_of(&tx) {
                let entry = self.channel.require(&tx, rx)?;
                out.insert((tx.clone(), rx.clone()), to_sampled(&entry.cir, self.grid_dt, self.cir_pad)?);
            }
        }
        Ok(out)
    }
}

/// Bits of link `index`, on ChaCha stream `index` of the scenario bit seed.
pub fn link_bits(scenario: &LinkScenario, index: usize) -> Result<BitStream> {
    gen_bits_stream(scenario.links[index].bit_count, scenario.bit_seed, index as u64)
}

/// OOK train of link `index` at twice its average power share.
pub fn modulate_link(scenario: &LinkScenario, index: usize, bits: &BitStream) -> Result<SampledWaveform> {
    ook_modulate(bits, scenario.symbol_rate, scenario.grid_dt, 2.0 * scenario.link_power(index))
}

/// TR filter of every link (all `None` for the non-TR baseline).
pub fn build_filters(
    scenario: &LinkScenario,
    sampled: &BTreeMap<(NodeId, NodeId), SampledCir>,
) -> Result<Vec<Option<TrFilter>>> {
    scenario
        .links
        .iter()
        .map(|l| {
            let cir = sampled.get(&(l.tx.clone(), l.rx.clone())).ok_or_else(|| Error::MissingChannel {
                tx: l.tx.to_string(),
                rx: l.rx.to_string(),
            })?;
            scenario.filter_recipe.build(&cir.waveform)
        })
        .collect()
}

/// Sum over the links leaving `tx` of each modulated stream passed through
/// its TR filter. `modulated` and `filters` are indexed like
/// `scenario.links`. Links from other transmitters contribute nothing.
pub fn precode_tx(
    tx: &NodeId,
    scenario: &LinkScenario,
    modulated: &[SampledWaveform],
    filters: &[Option<TrFilter>],
) -> Result<SampledWaveform> {
    if modulated.len() != scenario.links.len() {
        return Err(invalid("modulated", format!("{} streams for {} links", modulated.len(), scenario.links.len())));
    }
    if filters.len() != scenario.links.len() {
        return Err(invalid("filters", format!("{} filters for {} links", filters.len(), scenario.links.len())));
    }
    let mut out: Option<SampledWaveform> = None;
    for (i, link) in scenario.links.iter().enumerate().filter(|(_, l)| &l.tx == tx) {
        let contribution = if scenario.filter_recipe.is_tr() {
            let filter = filters[i].as_ref().ok_or_else(|| Error::MissingFilter {
                tx: link.tx.to_string(),
                rx: link.rx.to_string(),
            })?;
            apply_response(&modulated[i], &filter.waveform)?
        } else {
            modulated[i].clone()
        };
        match out.as_mut() {
            Some(acc) => acc.accumulate(&contribution)?,
            None => out = Some(contribution),
        }
    }
    out.ok_or_else(|| Error::UnknownNode(tx.to_string()))
}

/// Noiseless superposition at every link receiver. Transmitters missing from
/// `tx_waveforms` are silent.
pub fn propagate_noiseless(
    scenario: &LinkScenario,
    sampled: &BTreeMap<(NodeId, NodeId), SampledCir>,
    tx_waveforms: &BTreeMap<NodeId, SampledWaveform>,
) -> Result<BTreeMap<NodeId, SampledWaveform>> {
    let mut out = BTreeMap::new();
    for rx in scenario.receivers() {
        let mut acc: Option<SampledWaveform> = None;
        for (tx, w) in tx_waveforms.iter().filter(|(tx, _)| **tx != rx) {
            let key = (tx.clone(), rx.clone());
            let cir = match sampled.get(&key) {
                Some(c) => c.waveform.clone(),
                None => to_sampled(&scenario.channel.require(tx, &rx)?.cir, scenario.grid_dt, scenario.cir_pad)?.waveform,
            };
            let mut y = apply_response(w, &cir)?;
            y.scale_in_place(scenario.pair_amplitude(tx, &rx)?);
            match acc.as_mut() {
                Some(a) => a.accumulate(&y)?,
                None => acc = Some(y),
            }
        }
        let w = match acc {
            Some(w) => w,
            None => SampledWaveform::zeros(1, scenario.grid_dt, 0.0)?,
        };
        out.insert(rx, w);
    }
    Ok(out)
}

/// Adds circularly symmetric complex Gaussian noise with
/// `E|n|^2 = noise_power` per sample, drawn from ChaCha stream `stream`.
pub fn add_awgn(w: &mut SampledWaveform, noise_power: f64, seed: u64, stream: u64) -> Result<()> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(invalid("noise_power", format!("must be finite and >= 0, got {noise_power}")));
    }
    if noise_power == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, (noise_power / 2.0).sqrt()).map_err(|e| Error::Numerical(e.to_string()))?;
    for x in w.samples_mut() {
        x.re += normal.sample(&mut rng);
        x.im += normal.sample(&mut rng);
    }
    Ok(())
}

/// Channel superposition plus `k_B T B` noise at every link receiver.
/// The noise of each receiver is drawn from the scenario noise seed on a
/// stream fixed by the receiver's position in the node list, offset by
/// 2^32 so it never shares a keystream with the bit generators.
pub fn propagate(
    scenario: &LinkScenario,
    tx_waveforms: &BTreeMap<NodeId, SampledWaveform>,
) -> Result<BTreeMap<NodeId, SampledWaveform>> {
    let mut out = propagate_noiseless(scenario, &BTreeMap::new(), tx_waveforms)?;
    let p = scenario.noise_power();
    for (rx, w) in out.iter_mut() {
        add_awgn(w, p, scenario.noise_seed, scenario.node_stream(rx))?;
    }
    Ok(out)
}

/// Center of the first detection window for a link.
///
/// With TR this is the filter's causal delay. Without TR the receiver is
/// genie-aligned to the `t_rate` window that captures the most energy of
/// the channel response.
pub fn first_peak_time(cir: &SampledCir, filter: Option<&TrFilter>, symbol_rate: f64) -> f64 {
    if let Some(f) = filter {
        return f.causal_delay;
    }
    let h = &cir.waveform;
    let period = 1.0 / symbol_rate;
    let m = ((period / h.dt()).round() as usize).max(1);
    let power: Vec<f64> = h.samples().iter().map(|x| x.norm_sqr()).collect();
    let mut window: f64 = power.iter().take(m).sum();
    let (mut best, mut best_start) = (window, 0);
    for s in 1..power.len() {
        window -= power[s - 1];
        if let Some(p) = power.get(s + m - 1) {
            window += p;
        }
        if window > best * (1.0 + 1e-12) {
            best = window;
            best_start = s;
        }
    }
    h.t0() + best_start as f64 * h.dt() + period / 2.0
}

fn cover(w: &SampledWaveform, start: f64, end: f64) -> Result<SampledWaveform> {
    let dt = w.dt();
    let k_lo = ((start - w.t0()) / dt + 1e-9).floor().min(0.0) as i64;
    let k_hi = (((end - w.t0()) / dt - 1e-9).ceil() as i64).max(w.len() as i64);
    let mut out = SampledWaveform::zeros((k_hi - k_lo) as usize, dt, w.t0() + k_lo as f64 * dt)?;
    out.accumulate(w)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkResult {
    pub link: usize,
    pub tx: NodeId,
    pub rx: NodeId,
    pub bits: BitStream,
    pub detection: DetectionRecord,
    pub ber: f64,
    pub bit_errors: usize,
    pub threshold: f64,
    pub first_peak_time: f64,
    /// From noiseless single-symbol responses; the other links count as CCI.
    /// Without TR the trailing ISI runs to the end of the response.
    pub sinr: SinrReport,
    /// Peak `|y|^2` at the intended receiver over the peak at every other
    /// node reachable from the transmitter. `None` when the transmitter
    /// reaches no other node.
    pub focusing: Option<FocusingRatio>,
    /// Largest `|y|^2` of the single-symbol response inside the detection window.
    pub peak_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub links: Vec<LinkResult>,
    pub noise_power: f64,
    /// Channel pairs whose CIR had taps merged by grid discretization.
    pub merged_taps: Vec<(NodeId, NodeId, usize)>,
}

/// Runs the full chain for every link: bits, OOK, TR precoding, channel,
/// noise, energy detection and threshold optimization.
pub fn simulate(scenario: &LinkScenario) -> Result<ScenarioResult> {
    scenario.validate()?;
    let sampled = scenario.sample_channels()?;
    let filters = build_filters(scenario, &sampled)?;
    let n_links = scenario.links.len();
    let period = scenario.symbol_period();

    let peaks: Vec<f64> = (0..n_links)
        .map(|i| {
            let l = &scenario.links[i];
            first_peak_time(&sampled[&(l.tx.clone(), l.rx.clone())], filters[i].as_ref(), scenario.symbol_rate)
        })
        .collect();
    let bits = (0..n_links).map(|i| link_bits(scenario, i)).collect::<Result<Vec<_>>>()?;
    let modulated = (0..n_links).map(|i| modulate_link(scenario, i, &bits[i])).collect::<Result<Vec<_>>>()?;

    let mut tx_waveforms = BTreeMap::new();
    for tx in scenario.transmitters() {
        let w = precode_tx(&tx, scenario, &modulated, &filters)?;
        tx_waveforms.insert(tx, w);
    }
    drop(modulated);
    let received = propagate_noiseless(scenario, &sampled, &tx_waveforms)?;
    drop(tx_waveforms);

    let noise_power = scenario.noise_power();
    let mut energies: Vec<Vec<f64>> = vec![Vec::new(); n_links];
    for (rx, w) in &received {
        let spans = (0..n_links).filter(|&i| &scenario.links[i].rx == rx).map(|i| {
            let n = scenario.links[i].bit_count as f64;
            (peaks[i] - period / 2.0, peaks[i] + (n - 0.5) * period)
        });
        let (start, end) = spans.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (s, e)| (a.min(s), b.max(e)));
        let mut w = cover(w, start, end)?;
        add_awgn(&mut w, noise_power, scenario.noise_seed, scenario.node_stream(rx))?;
        for i in (0..n_links).filter(|&i| &scenario.links[i].rx == rx) {
            energies[i] = energy_detect(&w, scenario.symbol_rate, peaks[i], scenario.links[i].bit_count)?;
        }
    }
    drop(received);

    // single-symbol responses of every link at every node its tx reaches
    let mut responses: Vec<BTreeMap<NodeId, SampledWaveform>> = Vec::with_capacity(n_links);
    for i in 0..n_links {
        let l = &scenario.links[i];
        let one = modulate_link(scenario, i, &BitStream::from_bits(vec![true]))?;
        let pre = match &filters[i] {
            Some(f) => apply_response(&one, &f.waveform)?,
            None => one,
        };
        let mut at = BTreeMap::new();
        for ((tx, rx), cir) in sampled.iter().filter(|((tx, _), _)| tx == &l.tx) {
            let mut y = apply_response(&pre, &cir.waveform)?;
            y.scale_in_place(scenario.pair_amplitude(tx, rx)?);
            at.insert(rx.clone(), y);
        }
        responses.push(at);
    }

    let mut links = Vec::with_capacity(n_links);
    for (i, l) in scenario.links.iter().enumerate() {
        let detection = optimize_threshold(&energies[i], &bits[i])?;
        let desired = &responses[i][&l.rx];
        let interferers: Vec<SampledWaveform> = (0..n_links)
            .filter(|&j| j != i)
            .filter_map(|j| responses[j].get(&l.rx).cloned())
            .collect();
        let isi_end = if filters[i].is_some() { 2.0 * peaks[i] } else { desired.end_time() };
        let sinr = windowed_sinr(desired, &interferers, scenario.symbol_rate, peaks[i], noise_power, isi_end)?;
        let powers: BTreeMap<NodeId, f64> = responses[i]
            .iter()
            .map(|(n, y)| (n.clone(), y.peak_power_between(f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        let focusing = if powers.len() > 1 { Some(focusing_ratio(&powers, &l.rx)?) } else { None };
        let peak_power = desired.peak_power_between(peaks[i] - period / 2.0, peaks[i] + period / 2.0);
        links.push(LinkResult {
            link: i,
            tx: l.tx.clone(),
            rx: l.rx.clone(),
            bits: bits[i].clone(),
            ber: detection.ber,
            bit_errors: detection.bit_errors,
            threshold: detection.threshold,
            detection,
            first_peak_time: peaks[i],
            sinr,
            focusing,
            peak_power,
        });
    }

    let merged_taps = sampled
        .iter()
        .filter(|(_, c)| c.has_merged_taps())
        .map(|((t, r), c)| (t.clone(), r.clone(), c.merged_taps))
        .collect();
    Ok(ScenarioResult { links, noise_power, merged_taps })
}
