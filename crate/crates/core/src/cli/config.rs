//! Scenario configuration files (TOML, `schema_version = 1`).
//!
//! Every physical quantity carries its unit in the key name:
//!
//! ```toml
//! schema_version = 1
//! name = "demo"                      # default: file stem
//! nodes = ["e"]                      # extra observer nodes for focusing
//!
//! [simulation]
//! symbol_rate_gbps = 10.0            # required unless swept
//! total_tx_power_dbm = 10.0
//! noise_temperature_kelvin = 300.0
//! noise_bandwidth_ghz = 10.0         # default: the symbol rate
//! grid_dt_ps = 1.0
//! cir_pad_ns = 2.0
//! bit_count = 10000
//! bit_seed = 0
//! noise_seed = 1
//! recipes = ["tr", "none", "tr+zoh@100GHz"]
//!
//! [[links]]
//! tx = "a"
//! rx = "b"
//! link_gain_db = -60.0
//! power_weight = 1.0
//!
//! [[channels]]                        # explicit pair
//! tx = "a"
//! rx = "b"
//! source = "file"                     # or "synth" with a seed
//! path = "ab.cir"
//!
//! [default_channel]                   # every other pair a transmitter reaches
//! source = "synth"
//! seed = 7
//! tap_arrival_rate_ghz = 20.0
//! decay_ns = 0.5
//! span_ns = 4.0
//!
//! [sweep]
//! axis = "symbol_rate"                # symbol_rate | total_tx_power | zoh_sampling_rate
//!                                     # | concurrent_links | noise_temperature
//! values = [1, 2, 5, 10, 20, 50]      # or range = { start, stop, points, scale = "log" }
//! repeat_seeds = 3
//!
//! [output]
//! results_csv = "results.csv"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::{import_cir, synth_reverberant, AnalyticCir, ChannelMatrix, ChannelSynthParams, NodeId};
use crate::cli::CliError;
use crate::phy::{LinkScenario, LinkSpec};
use crate::trfilter::FilterRecipe;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    name: Option<String>,
    nodes: Option<Vec<String>>,
    simulation: Option<RawSimulation>,
    links: Option<Vec<RawLink>>,
    channels: Option<Vec<RawChannel>>,
    default_channel: Option<RawChannel>,
    sweep: Option<RawSweep>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    symbol_rate_gbps: Option<f64>,
    total_tx_power_dbm: Option<f64>,
    noise_temperature_kelvin: Option<f64>,
    noise_bandwidth_ghz: Option<f64>,
    grid_dt_ps: Option<f64>,
    cir_pad_ns: Option<f64>,
    bit_count: Option<usize>,
    bit_seed: Option<u64>,
    noise_seed: Option<u64>,
    recipes: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    tx: String,
    rx: String,
    link_gain_db: Option<f64>,
    power_weight: Option<f64>,
    bit_count: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    tx: Option<String>,
    rx: Option<String>,
    source: String,
    path: Option<PathBuf>,
    seed: Option<u64>,
    tap_arrival_rate_ghz: Option<f64>,
    decay_ns: Option<f64>,
    span_ns: Option<f64>,
    los_gain: Option<f64>,
    first_arrival_ns: Option<f64>,
    gain_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    values: Option<Vec<f64>>,
    range: Option<RawRange>,
    repeat_seeds: Option<u32>,
    vary_channel_seeds: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    start: f64,
    stop: f64,
    points: usize,
    scale: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    results_csv: Option<PathBuf>,
    summary_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SymbolRate,
    TotalTxPower,
    ZohSamplingRate,
    ConcurrentLinks,
    NoiseTemperature,
}

impl SweepAxis {
    /// Column label, including the unit of the swept values.
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::SymbolRate => "symbol_rate_gbps",
            SweepAxis::TotalTxPower => "total_tx_power_dbm",
            SweepAxis::ZohSamplingRate => "zoh_sampling_rate_ghz",
            SweepAxis::ConcurrentLinks => "concurrent_links",
            SweepAxis::NoiseTemperature => "noise_temperature_kelvin",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "symbol_rate" => SweepAxis::SymbolRate,
            "total_tx_power" => SweepAxis::TotalTxPower,
            "zoh_sampling_rate" => SweepAxis::ZohSamplingRate,
            "concurrent_links" => SweepAxis::ConcurrentLinks,
            "noise_temperature" => SweepAxis::NoiseTemperature,
            other => {
                return Err(format!(
                    "unknown axis `{other}` (expected symbol_rate, total_tx_power, zoh_sampling_rate, \
                     concurrent_links or noise_temperature)"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// In the unit of [`SweepAxis::label`].
    pub values: Vec<f64>,
    pub repeat_seeds: u32,
    pub vary_channel_seeds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Synth { params: ChannelSynthParams, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub source: ChannelSource,
    /// Linear power gain.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub tx: NodeId,
    pub rx: NodeId,
    pub link_gain: f64,
    pub power_weight: f64,
    pub bit_count: usize,
}

/// A validated configuration with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub name: String,
    /// Symbol rate in Hz; `None` only when it is the swept axis.
    pub symbol_rate: Option<f64>,
    pub total_tx_power_dbm: f64,
    pub noise_temperature: f64,
    pub noise_bandwidth: Option<f64>,
    pub grid_dt: f64,
    pub cir_pad: f64,
    pub bit_seed: u64,
    pub noise_seed: u64,
    pub recipes: Vec<FilterRecipe>,
    pub nodes: BTreeSet<NodeId>,
    pub links: Vec<LinkConfig>,
    pub channels: BTreeMap<(NodeId, NodeId), ChannelSpec>,
    pub sweep: Option<SweepSpec>,
    pub results_csv: PathBuf,
    pub summary_csv: PathBuf,
    /// Human-readable list of every default that was filled in.
    pub defaults_applied: Vec<String>,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn config_err(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(field, format!("must be a positive number, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(field, format!("must be a finite number >= 0, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(field, format!("must be finite, got {v}")))
    }
}

struct Defaults(Vec<String>);

impl Defaults {
    fn take<T: std::fmt::Display>(&mut self, value: Option<T>, key: &str, default: T, note: &str) -> T {
        value.unwrap_or_else(|| {
            let note = if note.is_empty() { String::new() } else { format!(" ({note})") };
            self.0.push(format!("{key} = {default}{note}"));
            default
        })
    }
}

/// Stable per-pair seed offset for channels drawn from `default_channel`.
fn pair_seed(base: u64, tx: &NodeId, rx: &NodeId) -> u64 {
    // FNV-1a over "tx\0rx"
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tx.as_str().bytes().chain([0u8]).chain(rx.as_str().bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    base.wrapping_add(h)
}

fn parse_channel(raw: &RawChannel, field: &str, base_dir: &Path) -> Result<ChannelSpec, CliError> {
    let gain = db_to_linear(finite(&format!("{field}.gain_db"), raw.gain_db.unwrap_or(0.0))?);
    let source = match raw.source.as_str() {
        "file" => {
            let synth_keys = [
                raw.seed.is_some(),
                raw.tap_arrival_rate_ghz.is_some(),
                raw.decay_ns.is_some(),
                raw.span_ns.is_some(),
                raw.los_gain.is_some(),
                raw.first_arrival_ns.is_some(),
            ];
            if synth_keys.iter().any(|&k| k) {
                return Err(config_err(field, "synthesis keys are not allowed with source = \"file\""));
            }
            let path = raw.path.as_ref().ok_or_else(|| config_err(&format!("{field}.path"), "missing"))?;
            ChannelSource::File(base_dir.join(path))
        }
        "synth" => {
            if raw.path.is_some() {
                return Err(config_err(&format!("{field}.path"), "only allowed with source = \"file\""));
            }
            let d = ChannelSynthParams::default();
            let params = ChannelSynthParams {
                tap_arrival_rate: raw.tap_arrival_rate_ghz.map_or(d.tap_arrival_rate, |v| v * 1e9),
                decay_time_constant: raw.decay_ns.map_or(d.decay_time_constant, |v| v * 1e-9),
                span: raw.span_ns.map_or(d.span, |v| v * 1e-9),
                los_gain: raw.los_gain.unwrap_or(d.los_gain),
                first_arrival_delay: raw.first_arrival_ns.map_or(d.first_arrival_delay, |v| v * 1e-9),
            };
            params.validate().map_err(|e| config_err(field, e))?;
            let seed = raw.seed.ok_or_else(|| config_err(&format!("{field}.seed"), "missing (synth channels need a seed)"))?;
            ChannelSource::Synth { params, seed }
        }
        other => return Err(config_err(&format!("{field}.source"), format!("expected \"synth\" or \"file\", got \"{other}\""))),
    };
    Ok(ChannelSpec { source, gain })
}

fn parse_sweep(raw: &RawSweep, defaults: &mut Defaults) -> Result<SweepSpec, CliError> {
    let axis: SweepAxis = raw.axis.parse().map_err(|e| config_err("sweep.axis", e))?;
    let values = match (&raw.values, &raw.range) {
        (Some(v), None) => v.clone(),
        (None, Some(r)) => {
            if r.points == 0 {
                return Err(config_err("sweep.range.points", "must be >= 1"));
            }
            let scale = r.scale.as_deref().unwrap_or("linear");
            let n = r.points;
            let at = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            match scale {
                "linear" => (0..n).map(|i| r.start + (r.stop - r.start) * at(i)).collect(),
                "log" => {
                    positive("sweep.range.start", r.start)?;
                    positive("sweep.range.stop", r.stop)?;
                    (0..n).map(|i| r.start * (r.stop / r.start).powf(at(i))).collect()
                }
                other => return Err(config_err("sweep.range.scale", format!("expected \"linear\" or \"log\", got \"{other}\""))),
            }
        }
        (Some(_), Some(_)) => return Err(config_err("sweep", "give either values or range, not both")),
        (None, None) => return Err(config_err("sweep.values", "missing (or give sweep.range)")),
    };
    if values.is_empty() {
        return Err(config_err("sweep.values", "must not be empty"));
    }
    for &v in &values {
        match axis {
            SweepAxis::TotalTxPower => finite("sweep.values", v)?,
            SweepAxis::NoiseTemperature => non_negative("sweep.values", v)?,
            SweepAxis::ConcurrentLinks => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(config_err("sweep.values", format!("link counts must be whole numbers >= 1, got {v}")));
                }
                v
            }
            _ => positive("sweep.values", v)?,
        };
    }
    let repeat_seeds = defaults.take(raw.repeat_seeds, "sweep.repeat_seeds", 1, "");
    if repeat_seeds == 0 {
        return Err(config_err("sweep.repeat_seeds", "must be >= 1"));
    }
    let vary_channel_seeds = defaults.take(raw.vary_channel_seeds, "sweep.vary_channel_seeds", false, "");
    Ok(SweepSpec { axis, values, repeat_seeds, vary_channel_seeds })
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
        Config::parse(&text, &base_dir, &stem)
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, default_name: &str) -> Result<Config, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim().to_owned()))?;
        let mut defaults = Defaults(Vec::new());

        match raw.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(config_err("schema_version", format!("unsupported version {v} (expected {SCHEMA_VERSION})"))),
            None => return Err(config_err("schema_version", "missing")),
        }
        let name = defaults.take(raw.name, "name", default_name.to_owned(), "file stem");
        let sim = raw.simulation.unwrap_or_default();
        let sweep = raw.sweep.as_ref().map(|s| parse_sweep(s, &mut defaults)).transpose()?;
        let swept = |a: SweepAxis| sweep.as_ref().is_some_and(|s| s.axis == a);

        let symbol_rate = match sim.symbol_rate_gbps {
            Some(v) => Some(positive("simulation.symbol_rate_gbps", v)? * 1e9),
            None if swept(SweepAxis::SymbolRate) => None,
            None => return Err(config_err("simulation.symbol_rate_gbps", "missing (required unless swept)")),
        };
        let total_tx_power_dbm = finite(
            "simulation.total_tx_power_dbm",
            defaults.take(sim.total_tx_power_dbm, "simulation.total_tx_power_dbm", 10.0, "average over equiprobable bits"),
        )?;
        let noise_temperature = non_negative(
            "simulation.noise_temperature_kelvin",
            defaults.take(sim.noise_temperature_kelvin, "simulation.noise_temperature_kelvin", 300.0, ""),
        )?;
        let noise_bandwidth = match sim.noise_bandwidth_ghz {
            Some(v) => Some(positive("simulation.noise_bandwidth_ghz", v)? * 1e9),
            None => {
                defaults.0.push("simulation.noise_bandwidth_ghz = symbol rate".into());
                None
            }
        };
        let grid_dt = positive("simulation.grid_dt_ps", defaults.take(sim.grid_dt_ps, "simulation.grid_dt_ps", 1.0, ""))? * 1e-12;
        let cir_pad = non_negative("simulation.cir_pad_ns", defaults.take(sim.cir_pad_ns, "simulation.cir_pad_ns", 2.0, ""))? * 1e-9;
        let bit_count = defaults.take(sim.bit_count, "simulation.bit_count", 10_000, "");
        if bit_count == 0 {
            return Err(config_err("simulation.bit_count", "must be >= 1"));
        }
        let bit_seed = defaults.take(sim.bit_seed, "simulation.bit_seed", 0, "");
        let noise_seed = defaults.take(sim.noise_seed, "simulation.noise_seed", 1, "");
        let recipe_text = match sim.recipes {
            Some(r) => r,
            None => {
                defaults.0.push("simulation.recipes = [\"tr\"]".into());
                vec!["tr".to_owned()]
            }
        };
        if recipe_text.is_empty() {
            return Err(config_err("simulation.recipes", "must not be empty"));
        }
        let recipes = recipe_text
            .iter()
            .enumerate()
            .map(|(i, r)| r.parse::<FilterRecipe>().map_err(|e| config_err(&format!("simulation.recipes[{i}]"), e)))
            .collect::<Result<Vec<_>, _>>()?;

        let raw_links = raw.links.unwrap_or_default();
        if raw_links.is_empty() {
            return Err(config_err("links", "at least one [[links]] entry is required"));
        }
        let mut links = Vec::new();
        let mut weights_defaulted = false;
        for (i, l) in raw_links.iter().enumerate() {
            let field = format!("links[{i}]");
            if l.tx == l.rx {
                return Err(config_err(&field, format!("tx and rx are both \"{}\"", l.tx)));
            }
            weights_defaulted |= l.power_weight.is_none();
            let link = LinkConfig {
                tx: NodeId::new(l.tx.clone()),
                rx: NodeId::new(l.rx.clone()),
                link_gain: db_to_linear(finite(&format!("{field}.link_gain_db"), l.link_gain_db.unwrap_or(0.0))?),
                power_weight: positive(&format!("{field}.power_weight"), l.power_weight.unwrap_or(1.0))?,
                bit_count: l.bit_count.unwrap_or(bit_count),
            };
            if link.bit_count == 0 {
                return Err(config_err(&format!("{field}.bit_count"), "must be >= 1"));
            }
            if links.iter().any(|o: &LinkConfig| o.tx == link.tx && o.rx == link.rx) {
                return Err(config_err(&field, format!("duplicate link {} -> {}", link.tx, link.rx)));
            }
            links.push(link);
        }
        if weights_defaulted {
            defaults.0.push("links[*].power_weight = 1 (equal power split)".into());
        }

        let mut nodes: BTreeSet<NodeId> = raw.nodes.unwrap_or_default().into_iter().map(NodeId::new).collect();
        for l in &links {
            nodes.insert(l.tx.clone());
            nodes.insert(l.rx.clone());
        }

        let mut channels = BTreeMap::new();
        for (i, c) in raw.channels.unwrap_or_default().iter().enumerate() {
            let field = format!("channels[{i}]");
            let (Some(tx), Some(rx)) = (&c.tx, &c.rx) else {
                return Err(config_err(&field, "tx and rx are required"));
            };
            if tx == rx {
                return Err(config_err(&field, format!("tx and rx are both \"{tx}\"")));
            }
            let key = (NodeId::new(tx.clone()), NodeId::new(rx.clone()));
            nodes.insert(key.0.clone());
            nodes.insert(key.1.clone());
            if channels.insert(key, parse_channel(c, &field, base_dir)?).is_some() {
                return Err(config_err(&field, format!("duplicate channel {tx} -> {rx}")));
            }
        }

        let default_channel = match &raw.default_channel {
            Some(c) => {
                if c.tx.is_some() || c.rx.is_some() {
                    return Err(config_err("default_channel", "tx/rx are not allowed here"));
                }
                Some(parse_channel(c, "default_channel", base_dir)?)
            }
            None => None,
        };
        let transmitters: BTreeSet<NodeId> = links.iter().map(|l| l.tx.clone()).collect();
        for tx in &transmitters {
            for rx in nodes.iter().filter(|n| *n != tx) {
                let key = (tx.clone(), rx.clone());
                if channels.contains_key(&key) {
                    continue;
                }
                let Some(d) = &default_channel else {
                    return Err(config_err("channels", format!("no channel for {tx} -> {rx} and no [default_channel]")));
                };
                let spec = match &d.source {
                    ChannelSource::Synth { params, seed } => {
                        ChannelSpec { source: ChannelSource::Synth { params: *params, seed: pair_seed(*seed, tx, rx) }, gain: d.gain }
                    }
                    ChannelSource::File(p) => ChannelSpec { source: ChannelSource::File(p.clone()), gain: d.gain },
                };
                channels.insert(key, spec);
            }
        }

        if let Some(s) = &sweep {
            if s.axis == SweepAxis::ConcurrentLinks {
                if let Some(&v) = s.values.iter().find(|&&v| v as usize > links.len()) {
                    return Err(config_err("sweep.values", format!("{v} concurrent links requested but only {} configured", links.len())));
                }
            }
            if s.axis == SweepAxis::ZohSamplingRate && !recipes.iter().any(FilterRecipe::is_tr) {
                return Err(config_err("sweep.axis", "zoh_sampling_rate sweep needs at least one TR recipe"));
            }
        }

        let out = raw.output.unwrap_or(RawOutput { results_csv: None, summary_csv: None });
        let results_csv = base_dir.join(defaults.take(
            out.results_csv.map(|p| p.display().to_string()),
            "output.results_csv",
            format!("{name}_results.csv"),
            "next to the config",
        ));
        let summary_csv = match out.summary_csv {
            Some(p) => base_dir.join(p),
            None => summary_path_for(&results_csv),
        };

        Ok(Config {
            name,
            symbol_rate,
            total_tx_power_dbm,
            noise_temperature,
            noise_bandwidth,
            grid_dt,
            cir_pad,
            bit_seed,
            noise_seed,
            recipes,
            nodes,
            links,
            channels,
            sweep,
            results_csv,
            summary_csv,
            defaults_applied: defaults.0,
        })
    }

    /// Replaces the bit and noise seeds; the noise seed is derived so the
    /// two never coincide.
    pub fn override_seed(&mut self, seed: u64) {
        self.bit_seed = seed;
        self.noise_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    }

    /// Builds the channel matrix for repetition `rep`. Synthesized channels
    /// shift their seed by `rep` when the sweep varies channel seeds.
    pub fn channel_matrix(&self, rep: u32) -> Result<ChannelMatrix, CliError> {
        let shift = if self.sweep.as_ref().is_some_and(|s| s.vary_channel_seeds) { u64::from(rep) } else { 0 };
        let mut m = ChannelMatrix::new();
        let mut file_cache: BTreeMap<PathBuf, AnalyticCir> = BTreeMap::new();
        for node in &self.nodes {
            m.add_node(node.clone());
        }
        for ((tx, rx), spec) in &self.channels {
            let cir = match &spec.source {
                ChannelSource::Synth { params, seed } => synth_reverberant(params, seed.wrapping_add(shift))
                    .map_err(|e| config_err(&format!("channel {tx} -> {rx}"), e))?,
                ChannelSource::File(path) => match file_cache.get(path) {
                    Some(c) => c.clone(),
                    None => {
                        let text = std::fs::read_to_string(path)
                            .map_err(|e| CliError::Io(format!("cannot read CIR file {}: {e}", path.display())))?;
                        let cir = import_cir(&text)
                            .map_err(|e| CliError::Config(format!("CIR file {}: {e}", path.display())))?;
                        file_cache.insert(path.clone(), cir.clone());
                        cir
                    }
                },
            };
            m.insert_with_gain(tx.clone(), rx.clone(), cir, spec.gain)
                .map_err(|e| config_err(&format!("channel {tx} -> {rx}"), e))?;
        }
        Ok(m)
    }

    /// Scenario at one sweep point (`axis_value` in the axis unit).
    pub fn scenario(
        &self,
        channel: &ChannelMatrix,
        recipe: &FilterRecipe,
        axis_value: Option<f64>,
        rep: u32,
    ) -> Result<LinkScenario, CliError> {
        let axis = self.sweep.as_ref().map(|s| s.axis);
        let mut symbol_rate = self.symbol_rate;
        let mut power_dbm = self.total_tx_power_dbm;
        let mut temperature = self.noise_temperature;
        let mut effective = recipe.clone();
        let mut n_links = self.links.len();
        if let (Some(axis), Some(v)) = (axis, axis_value) {
            match axis {
                SweepAxis::SymbolRate => symbol_rate = Some(v * 1e9),
                SweepAxis::TotalTxPower => power_dbm = v,
                SweepAxis::ZohSamplingRate => effective = recipe.with_zoh_rate(v * 1e9),
                SweepAxis::ConcurrentLinks => n_links = v as usize,
                SweepAxis::NoiseTemperature => temperature = v,
            }
        }
        let symbol_rate = symbol_rate.ok_or_else(|| config_err("simulation.symbol_rate_gbps", "missing"))?;
        let links = self.links[..n_links]
            .iter()
            .map(|l| LinkSpec::new(l.tx.clone(), l.rx.clone(), l.bit_count).with_gain(l.link_gain).with_weight(l.power_weight))
            .collect();
        let mut s = LinkScenario::new(links, channel.clone(), symbol_rate, dbm_to_watts(power_dbm));
        s.noise_temperature = temperature;
        s.noise_bandwidth = self.noise_bandwidth;
        s.filter_recipe = effective;
        s.grid_dt = self.grid_dt;
        s.cir_pad = self.cir_pad;
        s.bit_seed = self.bit_seed.wrapping_add(u64::from(rep));
        s.noise_seed = self.noise_seed.wrapping_add(u64::from(rep));
        s.validate().map_err(|e| CliError::Config(format!("scenario {}: {e}", self.point_label(recipe.to_string(), axis_value))))?;
        Ok(s)
    }

    pub fn axis_values(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }

    pub fn repeats(&self) -> u32 {
        self.sweep.as_ref().map_or(1, |s| s.repeat_seeds)
    }

    pub fn axis_label(&self) -> &'static str {
        self.sweep.as_ref().map_or("none", |s| s.axis.label())
    }

    pub fn point_label(&self, filter: String, axis_value: Option<f64>) -> String {
        match axis_value {
            Some(v) => format!("{}/{}/{}={}", self.name, filter, self.axis_label(), v),
            None => format!("{}/{}", self.name, filter),
        }
    }

    /// Text printed by `validate`.
    pub fn report(&self) -> String {
        let mut s = String::from("ok\n");
        let _ = writeln!(s, "name: {}", self.name);
        match self.symbol_rate {
            Some(r) => { let _ = writeln!(s, "symbol rate: {} Gb/s", r / 1e9); }
            None => { let _ = writeln!(s, "symbol rate: swept"); }
        }
        let _ = writeln!(s, "total tx power: {} dBm ({:e} W)", self.total_tx_power_dbm, dbm_to_watts(self.total_tx_power_dbm));
        let _ = writeln!(s, "noise temperature: {} K", self.noise_temperature);
        let _ = writeln!(s, "grid: {} ps, CIR pad {} ns", self.grid_dt * 1e12, self.cir_pad * 1e9);
        let _ = writeln!(s, "recipes: {}", self.recipes.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", "));
        let _ = writeln!(s, "links:");
        let _ = writeln!(s, "  {:<4} {:<12} {:<12} {:>12} {:>8} {:>10}", "#", "tx", "rx", "gain_db", "weight", "bits");
        for (i, l) in self.links.iter().enumerate() {
            let _ = writeln!(
                s,
                "  {:<4} {:<12} {:<12} {:>12.3} {:>8} {:>10}",
                i,
                l.tx.as_str(),
                l.rx.as_str(),
                10.0 * l.link_gain.log10(),
                l.power_weight,
                l.bit_count
            );
        }
        let _ = writeln!(s, "channels:");
        for ((tx, rx), c) in &self.channels {
            let src = match &c.source {
                ChannelSource::Synth { seed, .. } => format!("synth seed {seed}"),
                ChannelSource::File(p) => format!("file {}", p.display()),
            };
            let _ = writeln!(s, "  {tx} -> {rx}: {src}, gain {:.3} dB", 10.0 * c.gain.log10());
        }
        match &self.sweep {
            Some(sw) => {
                let _ = writeln!(
                    s,
                    "sweep: {} over {:?}, {} seed(s){}",
                    sw.axis.label(),
                    sw.values,
                    sw.repeat_seeds,
                    if sw.vary_channel_seeds { ", channels redrawn per seed" } else { "" }
                );
            }
            None => {
                let _ = writeln!(s, "sweep: none");
            }
        }
        let _ = writeln!(s, "results: {}", self.results_csv.display());
        let _ = writeln!(s, "summary: {}", self.summary_csv.display());
        if self.defaults_applied.is_empty() {
            let _ = writeln!(s, "defaults applied: none");
        } else {
            let _ = writeln!(s, "defaults applied:");
            for d in &self.defaults_applied {
                let _ = writeln!(s, "  {d}");
            }
        }
        s
    }
}

/// `results.csv` -> `results_summary.csv`.
pub fn summary_path_for(results: &Path) -> PathBuf {
    let stem = results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    results.with_file_name(format!("{stem}_summary.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[simulation]
symbol_rate_gbps = 1.0
[[links]]
tx = "a"
rx = "b"
[default_channel]
source = "synth"
seed = 3
"#;

    fn parse(text: &str) -> Result<Config, CliError> {
        Config::parse(text, Path::new("/tmp/x"), "cfg")
    }

    #[test]
    fn defaults_are_reported() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.noise_temperature, 300.0);
        assert_eq!(c.grid_dt, 1e-12);
        assert_eq!(c.total_tx_power_dbm, 10.0);
        let r = c.report();
        for key in ["noise_temperature_kelvin = 300", "grid_dt_ps = 1", "equal power split", "bit_count = 10000"] {
            assert!(r.contains(key), "{key} missing from\n{r}");
        }
        assert_eq!(c.results_csv, Path::new("/tmp/x/cfg_results.csv"));
        assert_eq!(c.summary_csv, Path::new("/tmp/x/cfg_results_summary.csv"));
    }

    #[test]
    fn missing_symbol_rate_names_field() {
        let e = parse(&MINIMAL.replace("symbol_rate_gbps = 1.0", "")).unwrap_err();
        assert!(e.to_string().contains("symbol_rate_gbps"), "{e}");
        let swept = MINIMAL.replace("symbol_rate_gbps = 1.0", "") + "[sweep]\naxis = \"symbol_rate\"\nvalues = [1, 2]\n";
        assert!(parse(&swept).is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(parse(&(MINIMAL.to_owned() + "bogus = 1\n")).is_err());
        assert!(parse(&MINIMAL.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(parse(&MINIMAL.replace("symbol_rate_gbps = 1.0", "symbol_rate_gbps = 1.0\nsymbol_rate_hz = 1")).is_err());
    }

    #[test]
    fn missing_pairs_need_default_channel() {
        let text = MINIMAL.replace("[default_channel]\nsource = \"synth\"\nseed = 3\n", "");
        let e = parse(&text).unwrap_err();
        assert!(e.to_string().contains("a -> b"), "{e}");
    }

    #[test]
    fn pair_seeds_are_distinct_and_stable() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 1\nnodes = [\"c\"]");
        let c = parse(&text).unwrap();
        let seeds: Vec<u64> = c
            .channels
            .values()
            .map(|s| match s.source {
                ChannelSource::Synth { seed, .. } => seed,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(seeds.len(), 2);
        assert_ne!(seeds[0], seeds[1]);
        assert_eq!(c, parse(&text).unwrap());
    }

    #[test]
    fn sweep_ranges() {
        let text = MINIMAL.to_owned() + "[sweep]\naxis = \"total_tx_power\"\nrange = { start = 0, stop = 10, points = 3 }\n";
        assert_eq!(parse(&text).unwrap().sweep.unwrap().values, vec![0.0, 5.0, 10.0]);
        let text = MINIMAL.to_owned() + "[sweep]\naxis = \"symbol_rate\"\nrange = { start = 1, stop = 100, points = 3, scale = \"log\" }\n";
        let v = parse(&text).unwrap().sweep.unwrap().values;
        assert!((v[1] - 10.0).abs() < 1e-12);
        let text = MINIMAL.to_owned() + "[sweep]\naxis = \"concurrent_links\"\nvalues = [2]\n";
        assert!(parse(&text).is_err());
        let text = MINIMAL.to_owned() + "[sweep]\naxis = \"bandwidth\"\nvalues = [2]\n";
        assert!(parse(&text).is_err());
    }

    #[test]
    fn scenario_applies_axis() {
        let text = MINIMAL.to_owned() + "[sweep]\naxis = \"zoh_sampling_rate\"\nvalues = [100]\nrepeat_seeds = 2\n";
        let c = parse(&text).unwrap();
        let m = c.channel_matrix(0).unwrap();
        let s = c.scenario(&m, &c.recipes[0], Some(100.0), 1).unwrap();
        assert_eq!(s.filter_recipe.zoh_rate(), Some(1e11));
        assert_eq!(s.bit_seed, 1);
        assert!((s.total_tx_power - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn units() {
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((db_to_linear(-60.0) - 1e-6).abs() < 1e-18);
    }
}
