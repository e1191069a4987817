//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vsdp::sdp::{Objective, SumOfSquares};
use vsdp::uwb::{
    random_symbols, sample_channel, simulate_block, trial_rng, BlockConfig, ChannelPreset, ChannelRealization,
};
use vsdp::volterra::{PulseLayout, VolterraSystem};
use vsdp::SymMat;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_sym(rng: &mut impl Rng, n: usize, scale: f64) -> SymMat {
    SymMat::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn zero_diag_sym(rng: &mut impl Rng, n: usize, scale: f64) -> SymMat {
    gaussian_sym(rng, n, scale).with_zero_diagonal()
}

/// `V Vᵗ − I` for random unit rows of `V`: feasible by construction.
pub fn random_feasible(rng: &mut impl Rng, n: usize, rank: usize) -> SymMat {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..rank).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    SymMat::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum()
        }
    })
}

pub fn random_sos(rng: &mut impl Rng, n: usize, terms: usize) -> SumOfSquares {
    let terms = (0..terms)
        .map(|_| (rng.sample::<f64, _>(StandardNormal), zero_diag_sym(rng, n, 1.0)))
        .collect();
    SumOfSquares::new(n, terms).unwrap()
}

/// Plain Cholesky trial: PSD iff every pivot stays above `-tol`.
pub fn cholesky_psd(m: &SymMat, tol: f64) -> bool {
    let n = m.n();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol {
            return false;
        }
        let d = d.max(0.0).sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = if d > 1e-300 { s / d } else { 0.0 };
        }
    }
    true
}

/// Spectral norm by power iteration on `M²`.
pub fn spectral_norm(m: &SymMat) -> f64 {
    let n = m.n();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut est = 0.0;
    for _ in 0..2000 {
        let w = m.mul_vec(&m.mul_vec(&v));
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / norm).collect();
        est = norm.sqrt();
    }
    est
}

/// Grid search for `min Σλ s.t. G + diag(λ) ⪰ 0` on 2×2 and 3×3 zero-diagonal
/// `G`, step `h` over `[0, 3‖G‖₂]`. The last coordinate is the smallest grid
/// value satisfying the Schur-complement condition for the others.
pub fn dual_grid_oracle(g: &SymMat, h: f64) -> f64 {
    let hi = 3.0 * spectral_norm(g);
    let steps = (hi / h).ceil() as usize;
    let up = |x: f64| (x / h - 1e-9).ceil().max(0.0) * h;
    match g.n() {
        2 => {
            let b = g.get(0, 1);
            (1..=steps)
                .map(|i| {
                    let l1 = i as f64 * h;
                    l1 + up(b * b / l1)
                })
                .fold(if b == 0.0 { 0.0 } else { f64::INFINITY }, f64::min)
        }
        3 => {
            let (a, b, c) = (g.get(0, 1), g.get(0, 2), g.get(1, 2));
            let mut best = f64::INFINITY;
            for i in 1..=steps {
                let l1 = i as f64 * h;
                for j in 1..=steps {
                    let l2 = j as f64 * h;
                    let det = l1 * l2 - a * a;
                    if det <= 0.0 {
                        continue;
                    }
                    // λ3 ≥ [b c] A⁻¹ [b c]ᵗ with A = [[l1, a], [a, l2]].
                    let need = (l2 * b * b - 2.0 * a * b * c + l1 * c * c) / det;
                    let total = l1 + l2 + up(need);
                    if total < best {
                        best = total;
                    }
                }
            }
            best
        }
        _ => panic!("grid oracle covers n = 2 and 3 only"),
    }
}

/// All `2ⁿ⁻¹` sign points `x xᵗ − I` with `x₀ = +1`.
pub fn sign_points(n: usize) -> impl Iterator<Item = SymMat> {
    (0u64..1 << (n - 1)).map(move |mask| {
        let x: Vec<f64> = (0..n)
            .map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        SymMat::from_fn(n, |i, j| if i == j { 0.0 } else { x[i] * x[j] })
    })
}

pub fn min_over_sign_points(obj: &(impl Objective + ?Sized)) -> f64 {
    sign_points(obj.dim()).map(|p| obj.eval(&p)).fold(f64::INFINITY, f64::min)
}

/// One simulated block with its transmitted symbols.
pub struct Trial {
    pub d: Vec<f64>,
    pub channel: ChannelRealization,
    pub z: Vec<f64>,
    pub system: VolterraSystem,
}

pub fn simulate_trial(cfg: &BlockConfig, preset: ChannelPreset, seed: u64, trial: u64) -> Trial {
    let mut rng = trial_rng(seed, trial);
    let channel = sample_channel(preset, &mut rng);
    let d = random_symbols(&mut rng, cfg.nb);
    let block = simulate_block(cfg, &channel, &d, &mut rng).unwrap();
    let system = block.system(cfg).unwrap();
    Trial {
        d,
        channel,
        z: block.z,
        system,
    }
}

pub fn bit_errors(d: &[f64], d_hat: &[i8]) -> usize {
    d.iter().zip(d_hat).filter(|(a, b)| **a != f64::from(**b)).count()
}

/// Largest entry-wise gap between the projected gradient and central
/// differences, relative to the largest gradient entry.
pub fn gradient_error(obj: &impl Objective, x: &SymMat, h: f64) -> f64 {
    let n = obj.dim();
    let g = obj.grad(x);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let mut e = SymMat::zeros(n);
            e.set(i, j, h);
            // A symmetric bump moves X_ij and X_ji, so the slope is 2·G_ij.
            let fd = (obj.eval(&(x + &e)) - obj.eval(&(x - &e))) / (2.0 * h);
            worst = worst.max((fd - 2.0 * g.get(i, j)).abs());
            scale = scale.max(fd.abs()).max(2.0 * g.get(i, j).abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Worst violation of each certificate invariant, recomputed from `G`
/// without the certificate's own bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct CertCheck {
    pub psd_ok: bool,
    pub complementarity: f64,
    pub normalization: f64,
    pub trace_identity: f64,
    pub min_weight: f64,
}

impl CertCheck {
    pub fn holds(&self) -> bool {
        self.psd_ok
            && self.complementarity <= 1e-6
            && self.normalization <= 1e-6
            && self.trace_identity <= 1e-6
            && self.min_weight >= 0.0
    }
}

pub fn check_certificate(g: &SymMat, cert: &vsdp::sdp::DualCertificate) -> CertCheck {
    let n = g.n();
    let m = g.add_diag(&cert.lambda);
    let shifted = m.add_diag(&vec![1e-7; n]);
    let quad = |a: &SymMat, v: &[f64]| -> f64 {
        let av = a.mul_vec(v);
        av.iter().zip(v).map(|(x, y)| x * y).sum()
    };
    let complementarity = cert.vectors.iter().map(|v| quad(&m, v).abs()).fold(0.0, f64::max);
    let normalization = (0..n)
        .map(|k| {
            let s: f64 = cert.weights.iter().zip(&cert.vectors).map(|(w, v)| w * v[k] * v[k]).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let ya: f64 = cert.weights.iter().zip(&cert.vectors).map(|(w, v)| w * quad(g, v)).sum();
    let lambda_sum: f64 = cert.lambda.iter().sum();
    CertCheck {
        psd_ok: cholesky_psd(&shifted, 0.0),
        complementarity,
        normalization,
        trace_identity: (lambda_sum + ya).abs(),
        min_weight: cert.weights.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

/// Alternating layout with a random code and Gaussian `B[m]`, measured
/// without noise at `d`.
pub fn random_system(rng: &mut impl Rng, nb: usize, np: usize, nr: usize, d: &[f64]) -> VolterraSystem {
    let code: Vec<f64> = (0..np).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let layout = PulseLayout::alternating(nb, np, &code).unwrap();
    let b: Vec<SymMat> = (0..nr).map(|_| gaussian_sym(rng, nb * np, 1.0)).collect();
    let sys = VolterraSystem::with_layout(nb, np, layout, b, vec![0.0; nr]).unwrap();
    let z = sys.predict_z(d).unwrap();
    sys.with_measurements(z).unwrap()
}

/// Valid random block geometry on the sample grid. Pulses come in
/// (reference, data) pairs `D` apart, one pair per `2·Ts/Np` slot.
pub fn random_block_config(rng: &mut impl Rng) -> BlockConfig {
    let fs = [100e9, 200e9][rng.random_range(0..2)];
    let dt = 1.0 / fs;
    let np = [2, 4][rng.random_range(0..2)];
    let ts_samples: usize = (rng.random_range(4e-9..10e-9) / dt) as usize;
    let slot = 2 * ts_samples / np;
    let d_samples = rng.random_range(slot / 3..slot * 9 / 10);
    let offsets = (0..np)
        .map(|i| ((i / 2) * slot + (i % 2) * d_samples) as f64 * dt)
        .collect();
    let rx_cutoff = if rng.random::<bool>() { f64::INFINITY } else { rng.random_range(3e9..8e9) };
    BlockConfig {
        nb: rng.random_range(1..=6),
        np,
        ts: ts_samples as f64 * dt,
        tau_m: rng.random_range(0.2e-9..0.5e-9),
        offsets,
        code: (0..np).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        delay: d_samples as f64 * dt,
        fs,
        ebn0_db: f64::INFINITY,
        rx_cutoff,
    }
}
