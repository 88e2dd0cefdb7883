//! SVG line plots from a results CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::cli::run::RESULTS_HEADER;
use crate::cli::CliError;
use crate::trfilter::FilterRecipe;

/// Rates whose mean BER stays at or below this count as supported.
pub const RATE_BER_TARGET: f64 = 1e-3;
/// Stand-in for BER 0 on a log axis.
const BER_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// BER against symbol rate, log-log.
    BerVsRate,
    /// SINR against total transmit power.
    SinrVsPower,
    /// Highest symbol rate meeting the BER target against the hold rate in
    /// the filter label.
    RateVsSampling,
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ber_vs_rate" => Ok(PlotKind::BerVsRate),
            "sinr_vs_power" => Ok(PlotKind::SinrVsPower),
            "rate_vs_sampling" => Ok(PlotKind::RateVsSampling),
            other => Err(format!("unknown plot kind `{other}` (expected ber_vs_rate, sinr_vs_power or rate_vs_sampling)")),
        }
    }
}

struct Row {
    link_id: String,
    filter: String,
    axis: String,
    axis_value: f64,
    ber: f64,
    sinr_db: f64,
}

fn read_rows(text: &str) -> Result<Vec<Row>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::Config(format!("results csv: {e}")))?.clone();
    if header.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(CliError::Config(format!(
            "results csv: unexpected header `{}` (expected `{}`)",
            header.iter().collect::<Vec<_>>().join(","),
            RESULTS_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Config(format!("results csv line {line}: {e}")))?;
        let num = |col: usize| -> Result<f64, CliError> {
            rec[col].parse::<f64>().map_err(|_| {
                CliError::Config(format!("results csv line {line}: column {} is not a number: `{}`", RESULTS_HEADER[col], &rec[col]))
            })
        };
        rows.push(Row {
            link_id: rec[1].to_owned(),
            filter: rec[2].to_owned(),
            axis: rec[3].to_owned(),
            axis_value: num(4)?,
            ber: num(5)?,
            sinr_db: num(6)?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Config("results csv: no rows".into()));
    }
    Ok(rows)
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

/// Averages `y` over repeated seeds per series and x.
fn average(points: impl Iterator<Item = (String, f64, f64)>) -> Series {
    let mut acc: BTreeMap<String, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for (name, x, y) in points {
        let v = acc.entry(name).or_default();
        match v.iter_mut().find(|p| p.0 == x) {
            Some(p) => {
                p.1 += y;
                p.2 += 1;
            }
            None => v.push((x, y, 1)),
        }
    }
    acc.into_iter()
        .map(|(k, mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            (k, v.into_iter().map(|(x, s, n)| (x, s / n as f64)).collect())
        })
        .collect()
}

fn require_axis(rows: &[Row], axis: &str, kind: &str) -> Result<(), CliError> {
    match rows.iter().find(|r| r.axis != axis) {
        Some(r) => Err(CliError::Config(format!("{kind} needs a `{axis}` sweep, found axis `{}`", r.axis))),
        None => Ok(()),
    }
}

struct Axes {
    title: &'static str,
    x_label: &'static str,
    y_label: &'static str,
    log_x: bool,
    log_y: bool,
}

fn build(kind: PlotKind, rows: &[Row]) -> Result<(Axes, Series), CliError> {
    let name = |r: &Row| format!("{} {}", r.link_id, r.filter);
    Ok(match kind {
        PlotKind::BerVsRate => {
            require_axis(rows, "symbol_rate_gbps", "ber_vs_rate")?;
            let s = average(rows.iter().map(|r| (name(r), r.axis_value, r.ber)));
            let s = s.into_iter().map(|(k, v)| (k, v.into_iter().map(|(x, y)| (x, y.max(BER_FLOOR))).collect())).collect();
            (Axes { title: "BER vs symbol rate", x_label: "symbol rate (Gb/s)", y_label: "BER", log_x: true, log_y: true }, s)
        }
        PlotKind::SinrVsPower => {
            require_axis(rows, "total_tx_power_dbm", "sinr_vs_power")?;
            let s = average(rows.iter().filter(|r| r.sinr_db.is_finite()).map(|r| (name(r), r.axis_value, r.sinr_db)));
            (Axes { title: "SINR vs transmit power", x_label: "total tx power (dBm)", y_label: "SINR (dB)", log_x: false, log_y: false }, s)
        }
        PlotKind::RateVsSampling => {
            require_axis(rows, "symbol_rate_gbps", "rate_vs_sampling")?;
            let mut with_zoh = Vec::new();
            for r in rows {
                let recipe: FilterRecipe =
                    r.filter.parse().map_err(|e| CliError::Config(format!("filter `{}`: {e}", r.filter)))?;
                if let Some(rate) = recipe.zoh_rate() {
                    with_zoh.push((r, rate / 1e9));
                }
            }
            if with_zoh.is_empty() {
                return Err(CliError::Config("rate_vs_sampling needs filters with a zoh stage".into()));
            }
            let mean_ber = average(with_zoh.iter().map(|(r, fs)| (format!("{}\0{fs}", r.link_id), r.axis_value, r.ber)));
            let mut best: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for (key, curve) in &mean_ber {
                let (link, fs) = key.split_once('\0').expect("key built above");
                let fs: f64 = fs.parse().expect("key built above");
                let rate = curve.iter().filter(|p| p.1 <= RATE_BER_TARGET).map(|p| p.0).fold(0.0, f64::max);
                best.entry(link.to_owned()).or_default().push((fs, rate));
            }
            for v in best.values_mut() {
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            (Axes { title: "Supported rate vs hold rate", x_label: "sampling rate (GHz)", y_label: "max symbol rate (Gb/s)", log_x: false, log_y: false }, best)
        }
    })
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn render(axes: &Axes, series: &Series) -> String {
    let tx = |v: f64, log: bool| if log { v.log10() } else { v };
    let usable = |x: f64, y: f64| (!axes.log_x || x > 0.0) && (!axes.log_y || y > 0.0);
    let pts = || series.values().flatten().filter(|p| usable(p.0, p.1));
    let (x0, x1) = range(pts().map(|p| tx(p.0, axes.log_x)));
    let (y0, y1) = range(pts().map(|p| tx(p.1, axes.log_y)));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (tx(x, axes.log_x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (tx(y, axes.log_y) - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, axes.title);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let label = |v: f64, log: bool| if log { format!("{:.3e}", 10f64.powf(v)) } else { format!("{v:.3}") };
        let px = LEFT + f * pw;
        let py = TOP + ph - f * ph;
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/>"##, TOP + ph);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#, TOP + ph + 14.0, label(xv, axes.log_x));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#, LEFT - 4.0, py + 3.0, label(yv, axes.log_y));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, axes.x_label);
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#, TOP + ph / 2.0, TOP + ph / 2.0, axes.y_label);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> =
            pts.iter().filter(|p| usable(p.0, p.1)).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if coords.len() > 1 {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        }
        for c in &coords {
            let (cx, cy) = c.split_once(',').expect("formatted above");
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 16.0 * i as f64;
        let lx = LEFT + pw + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#, lx + 22.0, ly + 3.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

/// Renders the results CSV text as an SVG document.
pub fn plot_csv(csv_text: &str, kind: PlotKind) -> Result<String, CliError> {
    let rows = read_rows(csv_text)?;
    let (axes, series) = build(kind, &rows)?;
    if series.values().all(Vec::is_empty) {
        return Err(CliError::Config("nothing to plot".into()));
    }
    Ok(render(&axes, &series))
}

pub fn plot_file(csv: &Path, kind: PlotKind, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(csv).map_err(|e| CliError::Io(format!("cannot read {}: {e}", csv.display())))?;
    let svg = plot_csv(&text, kind)?;
    crate::cli::write_atomic(out, svg.as_bytes())
}
