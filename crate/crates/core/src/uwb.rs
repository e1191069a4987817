//! Waveform-level simulation of a differential UWB link with an
//! autocorrelation receiver.
//!
//! Every pulse position, the correlator delay and the window edges sit on the
//! sample grid, so the channel response is sampled once and shifted per pulse.
//! Correlator outputs and `B[m]` are reported in units of the monocycle
//! energy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::symmat::SymMat;
use crate::volterra::{PulseLayout, VolterraSystem};

const NS: f64 = 1e-9;

/// Half-width of the sampled monocycle support, in units of `tau_m`.
const PULSE_SUPPORT: f64 = 5.0;

/// Samples of white noise fed through the front end before the first grid
/// sample, so the filter has settled.
const FILTER_WARMUP: usize = 2000;

/// Fourth-order Butterworth lowpass as two cascaded biquads.
#[derive(Debug, Clone)]
struct Lowpass {
    sections: [[f64; 5]; 2],
}

impl Lowpass {
    fn new(cutoff: f64, fs: f64) -> Option<Self> {
        if !cutoff.is_finite() {
            return None;
        }
        let w0 = 2.0 * std::f64::consts::PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let section = |q: f64| {
            let alpha = sin / (2.0 * q);
            let a0 = 1.0 + alpha;
            let b0 = 0.5 * (1.0 - cos) / a0;
            [b0, 2.0 * b0, b0, -2.0 * cos / a0, (1.0 - alpha) / a0]
        };
        let q1 = 0.5 / (std::f64::consts::PI / 8.0).cos();
        let q2 = 0.5 / (3.0 * std::f64::consts::PI / 8.0).cos();
        Some(Lowpass {
            sections: [section(q1), section(q2)],
        })
    }

    fn apply(&self, x: &mut [f64]) {
        for [b0, b1, b2, a1, a2] in self.sections {
            let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
            for v in x.iter_mut() {
                let y = b0 * *v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
                x2 = x1;
                x1 = *v;
                y2 = y1;
                y1 = y;
                *v = y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    pub nb: usize,
    pub np: usize,
    /// Symbol duration (s).
    pub ts: f64,
    /// Monocycle width parameter (s).
    pub tau_m: f64,
    /// Pulse times relative to the symbol start (s).
    pub offsets: Vec<f64>,
    pub code: Vec<f64>,
    /// Correlator delay (s).
    pub delay: f64,
    /// Sample rate (Hz).
    pub fs: f64,
    /// `f64::INFINITY` disables noise.
    pub ebn0_db: f64,
    /// Cutoff of the receiver's front-end lowpass (Hz); `f64::INFINITY`
    /// passes the waveform unfiltered.
    pub rx_cutoff: f64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            nb: 10,
            np: 4,
            ts: 8.0 * NS,
            tau_m: 0.2877 * NS,
            offsets: vec![0.0, 2.0 * NS, 4.0 * NS, 6.0 * NS],
            code: vec![1.0, -1.0, 1.0, 1.0],
            delay: 2.0 * NS,
            fs: 200e9,
            ebn0_db: f64::INFINITY,
            rx_cutoff: 6e9,
        }
    }
}

fn on_grid(t: f64, dt: f64) -> Option<i64> {
    let k = (t / dt).round();
    ((t / dt - k).abs() <= 1e-6).then_some(k as i64)
}

impl BlockConfig {
    /// Block duration (s).
    pub fn block_duration(&self) -> f64 {
        self.nb as f64 * self.ts
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn validate(&self) -> Result<()> {
        if self.nb == 0 {
            return Err(Error::invalid("block needs at least one symbol"));
        }
        if self.np < 2 || self.np % 2 != 0 {
            return Err(Error::invalid("pulses per symbol must be even and at least 2"));
        }
        for (what, v) in [("ts", self.ts), ("tau_m", self.tau_m), ("delay", self.delay), ("fs", self.fs)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{what} must be positive and finite")));
            }
        }
        if !(self.rx_cutoff > 0.0) {
            return Err(Error::invalid("front-end cutoff must be positive (inf disables it)"));
        }
        if self.rx_cutoff.is_finite() && self.rx_cutoff >= 0.5 * self.fs {
            return Err(Error::invalid("front-end cutoff must lie below the Nyquist frequency"));
        }
        if self.ebn0_db.is_nan() || self.ebn0_db == f64::NEG_INFINITY {
            return Err(Error::invalid("Eb/N0 must be a number or +inf"));
        }
        if self.offsets.len() != self.np || self.code.len() != self.np {
            return Err(Error::invalid(format!(
                "offsets and code must both have {} entries",
                self.np
            )));
        }
        if self.code.iter().any(|&c| c != 1.0 && c != -1.0) {
            return Err(Error::invalid("amplitude code entries must be ±1"));
        }
        if self.offsets[0] < 0.0 || self.offsets.windows(2).any(|w| w[0] >= w[1]) || self.offsets[self.np - 1] >= self.ts {
            return Err(Error::invalid("pulse offsets must increase within [0, Ts)"));
        }
        if self.fs * self.tau_m < 20.0 {
            return Err(Error::invalid(format!(
                "sample rate too low: fs·tau_m = {:.2} < 20",
                self.fs * self.tau_m
            )));
        }
        for pair in self.offsets.chunks(2) {
            if ((pair[1] - pair[0]) - self.delay).abs() > 1e-6 * self.delay {
                return Err(Error::invalid("correlator delay must equal the reference-to-data spacing"));
            }
        }
        let dt = self.dt();
        for (what, t) in [("ts", self.ts), ("delay", self.delay)]
            .into_iter()
            .chain(self.offsets.iter().map(|&c| ("offset", c)))
        {
            if on_grid(t, dt).is_none() {
                return Err(Error::invalid(format!("{what} is not a multiple of the sample period")));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<PulseLayout> {
        PulseLayout::alternating(self.nb, self.np, &self.code)
    }

    /// Transmit time of every pulse in the block (s).
    pub fn pulse_times(&self) -> Vec<f64> {
        (0..self.nb)
            .flat_map(|n| self.offsets.iter().map(move |c| n as f64 * self.ts + c))
            .collect()
    }

    fn pulse_samples(&self) -> Vec<i64> {
        let dt = self.dt();
        (0..self.nb)
            .flat_map(|n| {
                self.offsets
                    .iter()
                    .map(move |&c| on_grid(n as f64 * self.ts, dt).unwrap() + on_grid(c, dt).unwrap())
            })
            .collect()
    }
}

/// Second-derivative Gaussian monocycle.
pub fn monocycle(t: f64, tau_m: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = t / tau_m;
    let x2 = std::f64::consts::PI * x * x;
    (1.0 - 4.0 * x2) * (-2.0 * x2).exp()
}

/// `∫ monocycle(t)² dt`.
pub fn monocycle_energy(tau_m: f64) -> f64 {
    0.375 * tau_m
}

/// Differentially encoded pulse amplitudes for one block; the first
/// reference pulse is +1.
pub fn encode_block(config: &BlockConfig, d: &[f64]) -> Result<Vec<f64>> {
    if d.len() != config.nb {
        return Err(Error::DimensionMismatch {
            expected: config.nb,
            got: d.len(),
        });
    }
    if config.code.len() != config.np {
        return Err(Error::invalid("amplitude code length differs from Np"));
    }
    let np = config.np;
    let mut a = Vec::with_capacity(config.nb * np);
    let mut prev = 1.0;
    for (n, &dn) in d.iter().enumerate() {
        for i in 0..np {
            let v = match (n, i) {
                (0, 0) => 1.0,
                (_, 0) => prev * d[n - 1] * config.code[np - 1],
                _ => prev * dn * config.code[i - 1],
            };
            a.push(v);
            prev = v;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelPreset {
    Cm1,
    Cm6,
    SingleTap,
}

/// Simplified Saleh-Valenzuela parameters (rates in 1/s, times in s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvParams {
    pub cluster_rate: f64,
    pub ray_rate: f64,
    pub cluster_decay: f64,
    pub ray_decay: f64,
    pub truncation: f64,
}

impl ChannelPreset {
    pub const ALL: [ChannelPreset; 3] = [ChannelPreset::Cm1, ChannelPreset::Cm6, ChannelPreset::SingleTap];

    pub fn name(self) -> &'static str {
        match self {
            ChannelPreset::Cm1 => "cm1",
            ChannelPreset::Cm6 => "cm6",
            ChannelPreset::SingleTap => "single",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cm1" | "cm1-like" => Ok(ChannelPreset::Cm1),
            "cm6" | "cm6-like" => Ok(ChannelPreset::Cm6),
            "single" | "single-tap" => Ok(ChannelPreset::SingleTap),
            other => Err(Error::invalid(format!("unknown channel preset {other:?}"))),
        }
    }

    pub fn params(self) -> Option<SvParams> {
        match self {
            ChannelPreset::Cm1 => Some(SvParams {
                cluster_rate: 0.047 / NS,
                ray_rate: 1.54 / NS,
                cluster_decay: 22.6 * NS,
                ray_decay: 12.5 * NS,
                truncation: 120.0 * NS,
            }),
            ChannelPreset::Cm6 => Some(SvParams {
                cluster_rate: 0.07 / NS,
                ray_rate: 1.1 / NS,
                cluster_decay: 60.0 * NS,
                ray_decay: 30.0 * NS,
                truncation: 250.0 * NS,
            }),
            ChannelPreset::SingleTap => None,
        }
    }

    /// RMS delay spread of the mean power-delay profile (s).
    pub fn nominal_rms_delay(self) -> f64 {
        self.params().map_or(0.0, |p| p.mean_profile_rms_delay())
    }
}

impl SvParams {
    /// Mean power density at delay `t > 0` (the unit-power first ray at `t = 0`
    /// is excluded).
    fn mean_density(&self, t: f64) -> f64 {
        let (big, small) = (self.cluster_decay, self.ray_decay);
        let mixed = if (big - small).abs() < 1e-15 * big {
            t * (-t / big).exp()
        } else {
            ((-t / big).exp() - (-t / small).exp()) / (1.0 / small - 1.0 / big)
        };
        self.ray_rate * (-t / small).exp()
            + self.cluster_rate * (-t / big).exp()
            + self.cluster_rate * self.ray_rate * mixed
    }

    pub fn mean_profile_rms_delay(&self) -> f64 {
        let steps = 100_000;
        let h = self.truncation / steps as f64;
        let (mut m0, mut m1, mut m2) = (1.0, 0.0, 0.0);
        for i in 0..=steps {
            let t = i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 * h } else { h };
            let p = self.mean_density(t) * w;
            m0 += p;
            m1 += p * t;
            m2 += p * t * t;
        }
        let mean = m1 / m0;
        (m2 / m0 - mean * mean).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `(delay s, gain)`, delays ascending.
    pub taps: Vec<(f64, f64)>,
    pub preset: String,
}

impl ChannelRealization {
    pub fn new(taps: Vec<(f64, f64)>, preset: impl Into<String>) -> Result<Self> {
        for &(t, g) in &taps {
            if !t.is_finite() || !g.is_finite() {
                return Err(Error::NonFinite("channel taps"));
            }
            if t < 0.0 {
                return Err(Error::invalid("channel delays must be nonnegative"));
            }
        }
        if taps.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::invalid("channel delays must be ascending"));
        }
        Ok(ChannelRealization {
            taps,
            preset: preset.into(),
        })
    }

    pub fn single_tap() -> Self {
        ChannelRealization {
            taps: vec![(0.0, 1.0)],
            preset: ChannelPreset::SingleTap.name().into(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|(_, g)| g * g).sum()
    }

    /// Power-weighted RMS delay spread (s).
    pub fn rms_delay(&self) -> f64 {
        let e = self.energy();
        if e == 0.0 {
            return 0.0;
        }
        let mean = self.taps.iter().map(|(t, g)| t * g * g).sum::<f64>() / e;
        let m2 = self.taps.iter().map(|(t, g)| t * t * g * g).sum::<f64>() / e;
        (m2 - mean * mean).max(0.0).sqrt()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for &(t, g) in &self.taps {
            let _ = writeln!(s, "{:e} {:e}", t / NS, g);
        }
        s
    }

    pub fn from_text(text: &str, preset: impl Into<String>) -> Result<Self> {
        let mut taps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(i + 1, "expected `delay_ns gain`"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(i + 1, e.to_string()));
            taps.push((num(fields[0])? * NS, num(fields[1])?));
        }
        Self::new(taps, preset)
    }

    pub fn load(path: impl AsRef<Path>, preset: impl Into<String>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, preset)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Draws one energy-normalized realization of the preset.
pub fn sample_channel<R: Rng + ?Sized>(preset: ChannelPreset, rng: &mut R) -> ChannelRealization {
    let Some(p) = preset.params() else {
        return ChannelRealization::single_tap();
    };
    let cluster_gap = Exp::new(p.cluster_rate).expect("positive rate");
    let ray_gap = Exp::new(p.ray_rate).expect("positive rate");
    let mut taps = Vec::new();
    let mut cluster = 0.0;
    while cluster < p.truncation {
        let mut ray = 0.0;
        while cluster + ray < p.truncation {
            let power = (-cluster / p.cluster_decay - ray / p.ray_decay).exp();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let magnitude = (0.5 * power).sqrt() * re.hypot(im);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            taps.push((cluster + ray, sign * magnitude));
            ray += ray_gap.sample(rng);
        }
        cluster += cluster_gap.sample(rng);
    }
    taps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let norm = taps.iter().map(|(_, g)| g * g).sum::<f64>().sqrt();
    for tap in &mut taps {
        tap.1 /= norm;
    }
    ChannelRealization {
        taps,
        preset: preset.name().into(),
    }
}

/// One simulated block: correlator outputs, the matching `B[m]` and the
/// received waveform.
#[derive(Debug, Clone)]
pub struct Block {
    pub z: Vec<f64>,
    pub b: Vec<SymMat>,
    pub amplitudes: Vec<f64>,
    /// Transmitted energy per information bit (J, unit-amplitude pulses).
    pub eb: f64,
    /// Per-sample noise standard deviation (0 when noiseless).
    pub noise_std: f64,
    /// Received samples starting at `start` (s).
    pub received: Vec<f64>,
    pub start: f64,
}

impl Block {
    pub fn system(&self, config: &BlockConfig) -> Result<VolterraSystem> {
        VolterraSystem::with_layout(config.nb, config.np, config.layout()?, self.b.clone(), self.z.clone())
    }
}

/// Trapezoid weights over an inclusive index range.
fn trapezoid(lo: usize, hi: usize, dt: f64) -> impl Iterator<Item = (usize, f64)> {
    (lo..=hi).map(move |i| (i, if i == lo || i == hi { 0.5 * dt } else { dt }))
}

/// Channel response to a unit monocycle sent at time 0, sampled at `k·dt`
/// for `k = 0..len`, with `k = 0` corresponding to `offset` samples before
/// the pulse.
fn sampled_response(channel: &ChannelRealization, tau_m: f64, dt: f64, offset: i64, len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    let reach = PULSE_SUPPORT * tau_m;
    for &(delay, gain) in &channel.taps {
        if gain == 0.0 {
            continue;
        }
        let lo = (((delay - reach) / dt).ceil() as i64 + offset).max(0);
        let hi = (((delay + reach) / dt).floor() as i64 + offset).min(len as i64 - 1);
        for k in lo..=hi {
            let t = (k - offset) as f64 * dt;
            h[k as usize] += gain * monocycle(t - delay, tau_m);
        }
    }
    h
}

/// Simulates one block and estimates `B[m]` from the noiseless per-pulse
/// responses. Noise is drawn from `rng` only when Eb/N0 is finite.
pub fn simulate_block<R: Rng + ?Sized>(
    config: &BlockConfig,
    channel: &ChannelRealization,
    d: &[f64],
    rng: &mut R,
) -> Result<Block> {
    config.validate()?;
    let amplitudes = encode_block(config, d)?;
    let dt = config.dt();
    let ew = monocycle_energy(config.tau_m);
    let pulses = config.pulse_samples();
    let n = pulses.len();
    let half = on_grid(config.ts, dt).unwrap() / 2;
    let ts_len = 2 * half;
    let lag = on_grid(config.delay, dt).unwrap() as usize;

    // Grid covers every window and its delayed copy.
    let data: Vec<i64> = pulses.iter().skip(1).step_by(2).copied().collect();
    let first = data[0] - half - lag as i64;
    let last = data[data.len() - 1] + half;
    let len = (last - first + 1) as usize;

    // Responses of all pulses are shifts of one sampled response.
    let latest = pulses[n - 1] - first;
    let span = len as i64 + latest;
    let mut base = sampled_response(channel, config.tau_m, dt, latest, span as usize);
    let front_end = Lowpass::new(config.rx_cutoff, config.fs);
    if let Some(f) = &front_end {
        f.apply(&mut base);
    }
    let local: Vec<usize> = pulses.iter().map(|&p| (p - first) as usize).collect();

    let mut noiseless = vec![0.0; len];
    for (&pj, &aj) in local.iter().zip(&amplitudes) {
        let shift = latest as usize - pj;
        for (y, &v) in noiseless.iter_mut().zip(&base[shift..shift + len]) {
            *y += aj * v;
        }
    }

    let eb = transmitted_energy(config, &amplitudes) / config.nb as f64;
    let noise_std = if config.ebn0_db.is_finite() {
        let n0 = eb / 10f64.powf(config.ebn0_db / 10.0);
        (0.5 * n0 * config.fs).sqrt()
    } else {
        0.0
    };
    let received: Vec<f64> = if noise_std > 0.0 {
        let warmup = if front_end.is_some() { FILTER_WARMUP } else { 0 };
        let mut noise: Vec<f64> = (0..warmup + len)
            .map(|_| noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Some(f) = &front_end {
            f.apply(&mut noise);
        }
        noiseless.iter().zip(&noise[warmup..]).map(|(y, n)| y + n).collect()
    } else {
        noiseless
    };

    let mut z = Vec::with_capacity(data.len());
    let windows: Vec<(usize, usize)> = data
        .iter()
        .map(|&t| {
            let lo = (t - half - first) as usize;
            (lo, lo + ts_len as usize)
        })
        .collect();
    for &(lo, hi) in &windows {
        let zm: f64 = trapezoid(lo, hi, dt).map(|(i, w)| w * received[i] * received[i - lag]).sum();
        z.push(zm / ew);
    }

    // Window sums of g_j(t)·g_k(t − D) only depend on the relative shift of
    // the two pulses, so each shift gets one running sum over `base`.
    let mut by_shift: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
    for j in 0..n {
        for k in 0..n {
            let shift = (lag + local[k]) as i64 - local[j] as i64;
            by_shift.entry(shift).or_default().push((j, k));
        }
    }
    let mut cross = vec![vec![0.0; n * n]; windows.len()];
    let mut sums = vec![0.0; span as usize + 1];
    let mut products = vec![0.0; span as usize];
    for (&shift, pairs) in &by_shift {
        products.iter_mut().for_each(|p| *p = 0.0);
        if shift.unsigned_abs() < span as u64 {
            let s = shift.unsigned_abs() as usize;
            let m = span as usize - s;
            let (out, lead, trail) = if shift >= 0 {
                (&mut products[s..], &base[s..], &base[..m])
            } else {
                (&mut products[..m], &base[..m], &base[s..])
            };
            for ((p, u), v) in out.iter_mut().zip(lead).zip(trail) {
                *p = u * v;
            }
        }
        let mut c = 0.0;
        for (acc, p) in sums[1..].iter_mut().zip(&products) {
            c += p;
            *acc = c;
        }
        for &(j, k) in pairs {
            for (cm, &(lo, hi)) in cross.iter_mut().zip(&windows) {
                let a = (lo + latest as usize - local[j]) as usize;
                let b = (hi + latest as usize - local[j]) as usize;
                let inner = sums[b + 1] - sums[a] - 0.5 * (products[a] + products[b]);
                cm[j * n + k] = inner * dt;
            }
        }
    }
    let b = cross
        .iter()
        .map(|c| SymMat::symmetrized(n, c).scaled(1.0 / ew))
        .collect();

    Ok(Block {
        z,
        b,
        amplitudes,
        eb,
        noise_std,
        received,
        start: first as f64 * dt,
    })
}

/// `∫ s(t)² dt` of the transmitted pulse train.
pub fn transmitted_energy(config: &BlockConfig, amplitudes: &[f64]) -> f64 {
    let dt = config.dt();
    let pulses = config.pulse_samples();
    let reach = (PULSE_SUPPORT * config.tau_m / dt).ceil() as i64;
    let first = pulses[0] - reach;
    let len = (pulses[pulses.len() - 1] + reach - first + 1) as usize;
    let mut s = vec![0.0; len];
    for (&p, &a) in pulses.iter().zip(amplitudes) {
        for k in -reach..=reach {
            s[(p + k - first) as usize] += a * monocycle(k as f64 * dt, config.tau_m);
        }
    }
    trapezoid(0, len - 1, dt).map(|(i, w)| w * s[i] * s[i]).sum()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Equiprobable ±1 information symbols.
pub fn random_symbols<R: Rng + ?Sized>(rng: &mut R, nb: usize) -> Vec<f64> {
    (0..nb).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Independent stream for one Monte Carlo trial.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(trial)))
}

/// Writes `UWB1 <fs> <n>\n` followed by the samples as little-endian f64.
pub fn write_waveform(path: impl AsRef<Path>, fs: f64, samples: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "UWB1 {} {}", fs, samples.len())?;
    for s in samples {
        out.write_all(&s.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_waveform(path: impl AsRef<Path>) -> Result<(f64, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(1, "missing waveform header"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::parse(1, e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "UWB1" {
        return Err(Error::parse(1, "expected `UWB1 fs n_samples`"));
    }
    let fs: f64 = fields[1].parse().map_err(|_| Error::parse(1, "bad sample rate"))?;
    let n: usize = fields[2].parse().map_err(|_| Error::parse(1, "bad sample count"))?;
    let body = &bytes[nl + 1..];
    if body.len() != 8 * n {
        return Err(Error::parse(1, format!("expected {n} samples, found {} bytes", body.len())));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((fs, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn isi_free() -> BlockConfig {
        BlockConfig {
            nb: 3,
            np: 2,
            offsets: vec![0.0, 2.0 * NS],
            code: vec![1.0, 1.0],
            rx_cutoff: f64::INFINITY,
            ..BlockConfig::default()
        }
    }

    #[test]
    fn monocycle_values() {
        assert_eq!(monocycle(0.0, 1.0), 1.0);
        let tau = 0.2877e-9;
        let v = monocycle(tau / 2.0, tau);
        assert!((v - (1.0 - std::f64::consts::PI) * (-std::f64::consts::FRAC_PI_2).exp()).abs() < 1e-12);
        assert!((v + 0.44527).abs() < 1e-4);
        assert!(monocycle(50.0 * tau, tau).abs() < 1e-300);
    }

    #[test]
    fn monocycle_energy_matches_quadrature() {
        let tau = 0.2877e-9;
        let dt = tau / 2000.0;
        let e: f64 = (-20000..=20000).map(|k| monocycle(k as f64 * dt, tau).powi(2) * dt).sum();
        assert!((e / monocycle_energy(tau) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encode_examples() {
        let mut cfg = BlockConfig {
            code: vec![1.0; 4],
            ..BlockConfig::default()
        };
        assert!(encode_block(&cfg, &[1.0; 10]).unwrap().iter().all(|&a| a == 1.0));
        cfg.nb = 1;
        cfg.np = 2;
        cfg.code = vec![1.0, 1.0];
        cfg.offsets.truncate(2);
        assert_eq!(encode_block(&cfg, &[-1.0]).unwrap(), vec![1.0, -1.0]);
        assert!(encode_block(&cfg, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn encoding_matches_volterra_layout() {
        let cfg = BlockConfig::default();
        let layout = cfg.layout().unwrap();
        let d = [1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0];
        let a = encode_block(&cfg, &d).unwrap();
        for k in 0..a.len() {
            let pd: f64 = (0..cfg.nb).map(|s| layout.p[k * cfg.nb + s] * d[s]).sum();
            assert_eq!(a[k], layout.q[k] * (layout.r[k] + pd));
        }
    }

    #[test]
    fn config_validation() {
        assert!(BlockConfig::default().validate().is_ok());
        let low_rate = BlockConfig {
            fs: 20e9,
            ..BlockConfig::default()
        };
        assert!(low_rate.validate().is_err());
        let bad_delay = BlockConfig {
            delay: 1.0 * NS,
            ..BlockConfig::default()
        };
        assert!(bad_delay.validate().is_err());
        let unordered = BlockConfig {
            offsets: vec![0.0, 2.0 * NS, 1.0 * NS, 3.0 * NS],
            ..BlockConfig::default()
        };
        assert!(unordered.validate().is_err());
    }

    #[test]
    fn single_tap_preset() {
        let mut rng = trial_rng(1, 0);
        let ch = sample_channel(ChannelPreset::SingleTap, &mut rng);
        assert_eq!(ch.taps, vec![(0.0, 1.0)]);
    }

    #[test]
    fn presets_are_normalized_and_ordered() {
        for preset in [ChannelPreset::Cm1, ChannelPreset::Cm6] {
            let mut rng = trial_rng(7, 3);
            let ch = sample_channel(preset, &mut rng);
            assert!((ch.energy() - 1.0).abs() < 1e-9);
            assert!(ch.taps.windows(2).all(|w| w[0].0 <= w[1].0));
            assert_eq!(ch.taps[0].0, 0.0);
        }
        assert!(ChannelPreset::Cm6.nominal_rms_delay() > ChannelPreset::Cm1.nominal_rms_delay());
    }

    #[test]
    fn isi_free_block_reads_the_data() {
        let cfg = isi_free();
        let d = [1.0, -1.0, -1.0];
        let mut rng = trial_rng(0, 0);
        let blk = simulate_block(&cfg, &ChannelRealization::single_tap(), &d, &mut rng).unwrap();
        for (z, dn) in blk.z.iter().zip(d) {
            assert!((z - dn).abs() < 1e-9, "{z} vs {dn}");
        }
        let sys = blk.system(&cfg).unwrap();
        let pred = sys.predict_z(&d).unwrap();
        for (p, z) in pred.iter().zip(&blk.z) {
            assert!((p - z).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_channel_gives_zero_b() {
        let cfg = BlockConfig {
            ebn0_db: 10.0,
            ..isi_free()
        };
        let ch = ChannelRealization::new(vec![(0.0, 0.0), (1e-9, 0.0)], "zero").unwrap();
        let mut rng = trial_rng(0, 1);
        let blk = simulate_block(&cfg, &ch, &[1.0, 1.0, -1.0], &mut rng).unwrap();
        assert!(blk.b.iter().all(|m| m.max_abs() == 0.0));
        assert!(blk.z.iter().any(|&z| z != 0.0));
    }

    #[test]
    fn channel_text_round_trip() {
        let mut rng = trial_rng(5, 5);
        let ch = sample_channel(ChannelPreset::Cm1, &mut rng);
        let back = ChannelRealization::from_text(&ch.to_text(), "cm1").unwrap();
        assert_eq!(back.taps.len(), ch.taps.len());
        for (a, b) in back.taps.iter().zip(&ch.taps) {
            assert!((a.0 - b.0).abs() <= 1e-15 * b.0.abs().max(1e-9));
            assert!((a.1 - b.1).abs() <= 1e-15 * b.1.abs());
        }
        assert!(ChannelRealization::from_text("1.0\n", "x").is_err());
        assert!(ChannelRealization::from_text("2 1\n1 1\n", "x").is_err());
    }

    #[test]
    fn waveform_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        write_waveform(&path, 20e9, &[1.0, -2.5, 3.25]).unwrap();
        let (fs, s) = read_waveform(&path).unwrap();
        assert_eq!(fs, 20e9);
        assert_eq!(s, vec![1.0, -2.5, 3.25]);
    }

    #[test]
    fn trial_streams_differ() {
        let a: u64 = trial_rng(1, 0).random();
        let b: u64 = trial_rng(1, 1).random();
        let c: u64 = trial_rng(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
