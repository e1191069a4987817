//! Quick invariant checks behind `vsdp selftest`. Each one is a reduced
//! version of a test-suite property, run on a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ber::{csv_string, parse_csv, BerRecord, Detector};
use crate::sdp::{dual_subproblem, Objective, SolverOptions};
use crate::symmat::SymMat;
use crate::uwb::{random_symbols, sample_channel, simulate_block, trial_rng, BlockConfig, ChannelPreset};
use crate::volterra::{build_objective, demodulate_ml, demodulate_sdp};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut ChaCha8Rng) -> Result<String, String>;

const CHECKS: [(&str, Check); 7] = [
    ("eigendecomposition", eig_check),
    ("feasibility predicate", feasibility_check),
    ("dual certificates", certificate_check),
    ("waveform vs symbol model", waveform_check),
    ("gradient", gradient_check),
    ("noiseless recovery", recovery_check),
    ("csv round trip", csv_check),
];

pub fn run() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
            let (passed, detail) = match check(&mut rng) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult { name, passed, detail }
        })
        .collect()
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
    SymMat::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn eig_check(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for k in 0..40 {
        let m = random_sym(rng, 1 + k % 12);
        let e = m.eig_sym().map_err(|e| e.to_string())?;
        let err = (&e.reconstruct() - &m).frobenius_norm() / m.frobenius_norm().max(1.0);
        worst = worst.max(err);
    }
    ensure(worst <= 1e-10, || format!("reconstruction error {worst:.2e}"))?;
    Ok(format!("40 matrices, worst relative residual {worst:.1e}"))
}

fn cholesky_psd(m: &SymMat) -> bool {
    let n = m.n();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -1e-9 {
            return false;
        }
        let d = d.max(0.0).sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = if d > 0.0 { s / d } else { 0.0 };
        }
    }
    true
}

fn feasibility_check(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut feasible = 0;
    for k in 0..200 {
        let n = 2 + k % 10;
        let scale = rng.random_range(0.05..0.6);
        let x = random_sym(rng, n).scaled(scale).with_zero_diagonal();
        let got = x.is_feasible(1e-9).map_err(|e| e.to_string())?;
        let want = cholesky_psd(&(&x + &SymMat::identity(n)));
        ensure(got == want, || format!("disagreement on case {k}"))?;
        feasible += usize::from(got);
    }
    Ok(format!("200 matrices agree with a Cholesky test ({feasible} feasible)"))
}

fn certificate_check(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let g = random_sym(rng, 2 + k % 10).with_zero_diagonal();
        let cert = dual_subproblem(&g).map_err(|e| e.to_string())?;
        let report = cert.check(&g).map_err(|e| e.to_string())?;
        ensure(report.holds(), || format!("certificate {k} fails: {report:?}"))?;
        worst = worst.max(report.violation());
    }
    Ok(format!("50 certificates, worst tolerance ratio {worst:.2}"))
}

fn waveform_check(_: &mut ChaCha8Rng) -> Result<String, String> {
    let cfg = BlockConfig::default();
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let mut rng = trial_rng(11, trial);
        let ch = sample_channel(ChannelPreset::Cm1, &mut rng);
        let d = random_symbols(&mut rng, cfg.nb);
        let block = simulate_block(&cfg, &ch, &d, &mut rng).map_err(|e| e.to_string())?;
        let sys = block.system(&cfg).map_err(|e| e.to_string())?;
        let pred = sys.predict_z(&d).map_err(|e| e.to_string())?;
        let scale = block.z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        for (p, z) in pred.iter().zip(&block.z) {
            worst = worst.max((p - z).abs() / scale);
        }
    }
    ensure(worst <= 1e-6, || format!("relative mismatch {worst:.2e}"))?;
    Ok(format!("5 CM1 blocks, worst relative mismatch {worst:.1e}"))
}

fn gradient_check(_: &mut ChaCha8Rng) -> Result<String, String> {
    let cfg = BlockConfig { nb: 4, ebn0_db: 15.0, ..BlockConfig::default() };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let mut rng = trial_rng(12, trial);
        let ch = sample_channel(ChannelPreset::Cm1, &mut rng);
        let d = random_symbols(&mut rng, cfg.nb);
        let sys = simulate_block(&cfg, &ch, &d, &mut rng)
            .and_then(|b| b.system(&cfg))
            .map_err(|e| e.to_string())?;
        let obj = build_objective(&sys);
        let n = obj.dim();
        let x = SymMat::from_fn(n, |_, _| rng.random_range(-0.1..0.1)).with_zero_diagonal();
        let g = obj.grad(&x);
        let gmax = g.max_abs().max(1e-300);
        for i in 0..n {
            for j in i + 1..n {
                let mut e = SymMat::zeros(n);
                e.set(i, j, 1.0);
                let fd = (obj.eval(&(&x + &e.scaled(h))) - obj.eval(&(&x - &e.scaled(h)))) / (2.0 * h);
                worst = worst.max((fd - 2.0 * g.get(i, j)).abs() / gmax.max(fd.abs()));
            }
        }
    }
    ensure(worst <= 1e-5, || format!("relative error {worst:.2e}"))?;
    Ok(format!("5 systems, worst relative error {worst:.1e}"))
}

fn recovery_check(_: &mut ChaCha8Rng) -> Result<String, String> {
    let cfg = BlockConfig::default();
    // Noiseless optima sit at f = 0, so only a tight absolute gap pins the signs.
    let opts = SolverOptions {
        gap_tol: Some(1e-9),
        max_iter: 30_000,
        ..SolverOptions::default()
    };
    let mut errors = 0;
    for trial in 0..5 {
        let mut rng = trial_rng(13, trial);
        let ch = sample_channel(ChannelPreset::Cm1, &mut rng);
        let d = random_symbols(&mut rng, cfg.nb);
        let sys = simulate_block(&cfg, &ch, &d, &mut rng)
            .and_then(|b| b.system(&cfg))
            .map_err(|e| e.to_string())?;
        let sdp = demodulate_sdp(&sys, &opts).map_err(|e| e.to_string())?;
        let (ml, _) = demodulate_ml(&sys).map_err(|e| e.to_string())?;
        for (k, &b) in d.iter().enumerate() {
            errors += usize::from(f64::from(sdp.d_hat[k]) != b) + usize::from(f64::from(ml[k]) != b);
        }
    }
    ensure(errors == 0, || format!("{errors} bit errors"))?;
    Ok("5 noiseless CM1 blocks, no errors for either detector".into())
}

fn csv_check(_: &mut ChaCha8Rng) -> Result<String, String> {
    let records = vec![BerRecord {
        preset: "cm6".into(),
        ebn0_db: 12.5,
        detector: Detector::Sdp,
        bits: 20000,
        errors: 317,
        ber: 317.0 / 20000.0,
        iters: 41.37,
        gap: 2.0 / 3.0 * 1e-4,
        seed: 7,
        failures: 0,
    }];
    let text = csv_string(&records);
    let back = parse_csv(&text).map_err(|e| e.to_string())?;
    ensure(csv_string(&back) == text, || "re-emitted CSV differs".into())?;
    Ok("emit, parse and re-emit agree".into())
}
