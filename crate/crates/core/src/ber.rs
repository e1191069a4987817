//! Monte Carlo BER sweeps: configuration, paired SDP/ML evaluation, CSV
//! results and a static semilog plot.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sdp::SolverOptions;
use crate::uwb::{random_symbols, sample_channel, simulate_block, trial_rng, BlockConfig, ChannelPreset};
use crate::volterra::{demodulate_ml, demodulate_sdp};

const NS: f64 = 1e-9;
const GHZ: f64 = 1e9;

/// Trials evaluated between early-abort checks. Fixed, so the set of trials
/// run does not depend on the thread count.
const BATCH: usize = 64;

pub const CSV_HEADER: &str = "preset,ebn0_db,detector,bits,errors,ber,iters,gap,seed";

/// Lowest BER drawn on the plot; zero estimates are pinned here.
pub const PLOT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Detector {
    Sdp,
    Ml,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::Sdp => "sdp",
            Detector::Ml => "ml",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdp" => Ok(Detector::Sdp),
            "ml" => Ok(Detector::Ml),
            _ => Err(Error::invalid(format!("unknown detector `{s}` (expected sdp or ml)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Eb/N0 in here is ignored; each cell sets its own.
    pub block: BlockConfig,
    pub presets: Vec<ChannelPreset>,
    pub ebn0_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub detectors: Vec<Detector>,
    pub gap_tol: Option<f64>,
    pub max_iter: usize,
    /// Stop a cell once every detector has this many errors; 0 runs all trials.
    pub max_errors: u64,
    pub threads: Option<usize>,
    pub out_csv: Option<PathBuf>,
    pub out_plot: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            block: BlockConfig::default(),
            presets: vec![ChannelPreset::Cm1],
            ebn0_db: vec![8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0],
            trials: 100,
            seed: 1,
            detectors: vec![Detector::Sdp, Detector::Ml],
            gap_tol: None,
            max_iter: SolverOptions::default().max_iter,
            max_errors: 200,
            threads: None,
            out_csv: None,
            out_plot: None,
        }
    }
}

fn list<T>(value: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect()
}

fn number<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("`{s}` is not a valid number"))
}

/// Accepts `inf`/`none` for an unlimited cutoff.
fn cutoff_ghz(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "none" => Ok(f64::INFINITY),
        _ => number::<f64>(s).map(|v| v * GHZ),
    }
}

impl SweepConfig {
    /// Parses `key = value` lines; `#` starts a comment, lists are
    /// comma-separated. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(|msg| Error::parse(line_no, format!("{key}: {msg}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let b = &mut self.block;
        match key {
            "nb" => b.nb = number(value)?,
            "np" => b.np = number(value)?,
            "ts_ns" => b.ts = number::<f64>(value)? * NS,
            "tau_m_ns" => b.tau_m = number::<f64>(value)? * NS,
            "offsets_ns" => b.offsets = list(value, |s| number::<f64>(s).map(|v| v * NS))?,
            "code" => b.code = list(value, number)?,
            "delay_ns" => b.delay = number::<f64>(value)? * NS,
            "fs_ghz" => b.fs = number::<f64>(value)? * GHZ,
            "rx_cutoff_ghz" => b.rx_cutoff = cutoff_ghz(value)?,
            "presets" => self.presets = list(value, |s| ChannelPreset::from_name(s).map_err(|e| e.to_string()))?,
            "ebn0_db" => self.ebn0_db = list(value, number)?,
            "trials" => self.trials = number(value)?,
            "seed" => self.seed = number(value)?,
            "detectors" => self.detectors = list(value, |s| s.parse().map_err(|e: Error| e.to_string()))?,
            "gap_tol" => self.gap_tol = if value == "auto" { None } else { Some(number(value)?) },
            "max_iter" => self.max_iter = number(value)?,
            "max_errors" => self.max_errors = number(value)?,
            "threads" => self.threads = Some(number(value)?),
            "out_csv" => self.out_csv = Some(PathBuf::from(value)),
            "out_plot" => self.out_plot = Some(PathBuf::from(value)),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.ebn0_db.is_empty() {
            return Err(Error::invalid("Eb/N0 list is empty"));
        }
        if self.ebn0_db.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::invalid("Eb/N0 values must be numbers or inf"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("detector set is empty"));
        }
        if self.presets.is_empty() {
            return Err(Error::invalid("preset list is empty"));
        }
        if let Some(t) = self.gap_tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid("gap_tol must be positive"));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        self.block.validate()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            gap_tol: self.gap_tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub preset: String,
    pub ebn0_db: f64,
    pub detector: Detector,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    /// Mean solver iterations per block (0 for ML).
    pub iters: f64,
    /// Mean final duality gap per block (0 for ML).
    pub gap: f64,
    pub seed: u64,
    /// Blocks whose solve failed; their partial decisions are still scored.
    pub failures: u64,
}

impl BerRecord {
    fn sort_key(&self) -> (&str, f64, Detector) {
        (&self.preset, self.ebn0_db, self.detector)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    errors: u64,
    iters: f64,
    gap: f64,
    failures: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.errors += o.errors;
        self.iters += o.iters;
        self.gap += o.gap;
        self.failures += o.failures;
    }
}

fn bit_errors(d: &[f64], d_hat: &[i8]) -> u64 {
    d.iter().zip(d_hat).filter(|(a, b)| a.signum() != f64::from(**b)).count() as u64
}

/// Stream seed for one channel preset, so presets draw independent channels
/// while Eb/N0 points within a preset share them.
fn cell_seed(master: u64, preset_index: usize) -> u64 {
    trial_rng(master, u64::MAX - preset_index as u64).random()
}

/// One trial of one cell: the same block feeds every detector.
fn run_trial(
    cfg: &SweepConfig,
    block: &BlockConfig,
    preset: ChannelPreset,
    seed: u64,
    trial: usize,
    opts: &SolverOptions,
) -> Result<Vec<Tally>> {
    let mut rng = trial_rng(seed, trial as u64);
    let channel = sample_channel(preset, &mut rng);
    let d = random_symbols(&mut rng, block.nb);
    let sys = simulate_block(block, &channel, &d, &mut rng)?.system(block)?;
    cfg.detectors
        .iter()
        .map(|det| match det {
            Detector::Sdp => {
                let (res, failed) = match demodulate_sdp(&sys, opts) {
                    Ok(r) => (r, 0),
                    Err(Error::Demod { partial, .. }) => (*partial, 1),
                    Err(e) => return Err(e),
                };
                Ok(Tally {
                    errors: bit_errors(&d, &res.d_hat),
                    iters: res.iterations as f64,
                    gap: res.gap,
                    failures: failed,
                })
            }
            Detector::Ml => {
                let (d_hat, _) = demodulate_ml(&sys)?;
                Ok(Tally {
                    errors: bit_errors(&d, &d_hat),
                    ..Tally::default()
                })
            }
        })
        .collect()
}

fn run_cell(cfg: &SweepConfig, preset_index: usize, ebn0_db: f64, opts: &SolverOptions) -> Result<Vec<BerRecord>> {
    let preset = cfg.presets[preset_index];
    let block = BlockConfig { ebn0_db, ..cfg.block.clone() };
    let seed = cell_seed(cfg.seed, preset_index);
    let mut totals = vec![Tally::default(); cfg.detectors.len()];
    let mut done = 0;
    while done < cfg.trials {
        let end = (done + BATCH).min(cfg.trials);
        let batch: Vec<Vec<Tally>> = (done..end)
            .into_par_iter()
            .map(|t| run_trial(cfg, &block, preset, seed, t, opts))
            .collect::<Result<_>>()?;
        for row in &batch {
            for (total, t) in totals.iter_mut().zip(row) {
                total.add(t);
            }
        }
        done = end;
        if cfg.max_errors > 0 && totals.iter().all(|t| t.errors >= cfg.max_errors) {
            break;
        }
    }
    let bits = (done * block.nb) as u64;
    Ok(cfg
        .detectors
        .iter()
        .zip(&totals)
        .map(|(&detector, t)| BerRecord {
            preset: preset.name().to_string(),
            ebn0_db,
            detector,
            bits,
            errors: t.errors,
            ber: t.errors as f64 / bits as f64,
            iters: t.iters / done as f64,
            gap: t.gap / done as f64,
            seed: cfg.seed,
            failures: t.failures,
        })
        .collect())
}

/// Runs every (preset, Eb/N0) cell. Trials within a cell run in parallel on
/// the current rayon pool; output is sorted by preset, Eb/N0 and detector.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let opts = cfg.solver_options();
    let mut records = Vec::new();
    for p in 0..cfg.presets.len() {
        for &e in &cfg.ebn0_db {
            records.extend(run_cell(cfg, p, e, &opts)?);
        }
    }
    sort_records(&mut records);
    Ok(records)
}

pub fn sort_records(records: &mut [BerRecord]) {
    records.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
    });
}

/// `printf("%.6g")`.
pub fn fmt_g6(x: f64) -> String {
    const P: i32 = 6;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_string(records: &[BerRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.preset,
            fmt_g6(r.ebn0_db),
            r.detector,
            r.bits,
            r.errors,
            fmt_g6(r.ber),
            fmt_g6(r.iters),
            fmt_g6(r.gap),
            r.seed
        )
        .unwrap();
    }
    out
}

pub fn emit_csv(records: &[BerRecord], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, csv_string(records))?;
    Ok(())
}

/// Parses the output of [`csv_string`]. Failure counts are not part of the
/// file and come back as 0.
pub fn parse_csv(text: &str) -> Result<Vec<BerRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{CSV_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(Error::parse(line_no, format!("expected 9 fields, found {}", f.len())));
        }
        let bad = |what: &str| Error::parse(line_no, format!("bad {what}"));
        let rec = BerRecord {
            preset: f[0].to_string(),
            ebn0_db: f[1].parse().map_err(|_| bad("ebn0_db"))?,
            detector: f[2].parse().map_err(|_| bad("detector"))?,
            bits: f[3].parse().map_err(|_| bad("bits"))?,
            errors: f[4].parse().map_err(|_| bad("errors"))?,
            ber: f[5].parse().map_err(|_| bad("ber"))?,
            iters: f[6].parse().map_err(|_| bad("iters"))?,
            gap: f[7].parse().map_err(|_| bad("gap"))?,
            seed: f[8].parse().map_err(|_| bad("seed"))?,
            failures: 0,
        };
        if rec.errors > rec.bits || rec.bits == 0 {
            return Err(Error::parse(line_no, "errors must lie in 0..=bits and bits must be positive"));
        }
        out.push(rec);
    }
    Ok(out)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Semilog BER plot, one series per (preset, detector).
pub fn render_svg(records: &[BerRecord]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 160.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);

    let mut series: Vec<((String, Detector), Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        let key = (r.preset.clone(), r.detector);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((r.ebn0_db, r.ber)),
            None => series.push((key, vec![(r.ebn0_db, r.ber)])),
        }
    }
    series.sort_by(|a, b| a.0.cmp(&b.0));
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let xs = records.iter().map(|r| r.ebn0_db).filter(|x| x.is_finite());
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if x0 > x1 {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        (x0, x1) = (x0 - 1.0, x1 + 1.0);
    }
    let lowest = records
        .iter()
        .map(|r| r.ber.max(PLOT_FLOOR))
        .fold(1.0f64, f64::min);
    let d_lo = lowest.log10().floor().min(-1.0);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |ber: f64| TOP + (-ber.max(PLOT_FLOOR).log10()) / (-d_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for d in (d_lo as i32)..=0 {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ccc"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let ticks = 6;
    for i in 0..=ticks {
        let x = x0 + (x1 - x0) * i as f64 / ticks as f64;
        let px = sx(x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            fmt_g6((x * 100.0).round() / 100.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Eb/N0 (dB)</text>"#,
        LEFT + pw / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">BER</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut clipped = false;
    for (i, ((preset, det), pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = if *det == Detector::Ml { r#" stroke-dasharray="6 3""# } else { "" };
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite())
            .map(|&(x, b)| format!("{:.2},{:.2}", sx(x), sy(b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            path.join(" ")
        );
        for &(x, b) in pts.iter().filter(|p| p.0.is_finite()) {
            let (px, py) = (sx(x), sy(b));
            if b <= 0.0 {
                clipped = true;
                let _ = writeln!(
                    s,
                    r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{px:.2},{:.2} Z" fill="{color}"/>"#,
                    px - 4.0,
                    py - 6.0,
                    px + 4.0,
                    py - 6.0,
                    py
                );
            } else {
                let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}">{preset} {det}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        );
    }
    if clipped {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">▼ BER = 0, drawn at 1e-6</text>"#,
            LEFT + pw + 12.0,
            TOP + 10.0 + 18.0 * series.len() as f64 + 8.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(csv_path: impl AsRef<Path>, out_path: impl AsRef<Path>) -> Result<()> {
    let records = parse_csv(&std::fs::read_to_string(csv_path)?)?;
    std::fs::write(out_path, render_svg(&records))?;
    Ok(())
}
