//! Symbol-level second-order Volterra model and the SDP equalizer built on it.
//!
//! Measurements follow `z[m] = (r + Pd)ᵗ Qᵗ B[m] Q (r + Pd)`. The detector
//! relaxes `[1; d][1; d]ᵗ` to a unit-diagonal PSD matrix `U`, minimizes the
//! squared residuals with the conditional-gradient solver on `X = U − I`,
//! and thresholds the first row of `U`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sdp::{self, Objective, SolveOutcome, SolverOptions, SumOfSquares};
use crate::symmat::SymMat;

/// Largest block length accepted by the exhaustive detector.
pub const ML_MAX_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSystem {
    nb: usize,
    np: usize,
    q: Vec<f64>,
    r: Vec<f64>,
    /// `N x Nb`, row-major.
    p: Vec<f64>,
    b: Vec<SymMat>,
    z: Vec<f64>,
}

/// Placement of data and reference pulses for alternating reference/data
/// pulses inside each symbol, with `Q` the running product of the amplitude
/// code.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseLayout {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub p: Vec<f64>,
}

impl PulseLayout {
    pub fn alternating(nb: usize, np: usize, code: &[f64]) -> Result<Self> {
        if np < 2 || np % 2 != 0 {
            return Err(Error::invalid("pulses per symbol must be even and at least 2"));
        }
        if code.len() != np {
            return Err(Error::DimensionMismatch {
                expected: np,
                got: code.len(),
            });
        }
        if code.iter().any(|&c| c != 1.0 && c != -1.0) {
            return Err(Error::invalid("amplitude code entries must be ±1"));
        }
        let n = nb * np;
        let mut q = Vec::with_capacity(n);
        let mut acc = 1.0;
        for k in 0..n {
            q.push(acc);
            acc *= code[k % np];
        }
        let mut r = vec![0.0; n];
        let mut p = vec![0.0; n * nb];
        for sym in 0..nb {
            for i in 0..np {
                let k = sym * np + i;
                if i % 2 == 1 {
                    p[k * nb + sym] = 1.0;
                } else {
                    r[k] = 1.0;
                }
            }
        }
        Ok(PulseLayout { q, r, p })
    }
}

impl VolterraSystem {
    pub fn new(
        nb: usize,
        np: usize,
        q: Vec<f64>,
        r: Vec<f64>,
        p: Vec<f64>,
        b: Vec<SymMat>,
        z: Vec<f64>,
    ) -> Result<Self> {
        let sys = VolterraSystem {
            nb,
            np,
            q,
            r,
            p,
            b,
            z,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_layout(nb: usize, np: usize, layout: PulseLayout, b: Vec<SymMat>, z: Vec<f64>) -> Result<Self> {
        Self::new(nb, np, layout.q, layout.r, layout.p, b, z)
    }

    fn validate(&self) -> Result<()> {
        let (nb, n) = (self.nb, self.pulses());
        if nb == 0 || self.np == 0 {
            return Err(Error::invalid("block must contain at least one symbol and one pulse"));
        }
        for (what, len, want) in [
            ("Q", self.q.len(), n),
            ("r", self.r.len(), n),
            ("P", self.p.len(), n * nb),
            ("z", self.z.len(), self.b.len()),
        ] {
            if len != want {
                return Err(Error::invalid(format!("{what} has length {len}, expected {want}")));
            }
        }
        if self.q.iter().any(|&x| x != 1.0 && x != -1.0) {
            return Err(Error::invalid("Q diagonal entries must be ±1"));
        }
        if self.r.iter().any(|&x| x != 0.0 && x != 1.0) || self.p.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::invalid("r and P must be 0/1"));
        }
        for k in 0..n {
            let row = &self.p[k * nb..(k + 1) * nb];
            let ones = row.iter().filter(|&&x| x != 0.0).count();
            if ones > 1 {
                return Err(Error::invalid(format!("P row {k} has {ones} nonzeros")));
            }
            if ones == 1 && self.r[k] != 0.0 {
                return Err(Error::invalid(format!("pulse {k} is both reference and data (Pᵗr ≠ 0)")));
            }
        }
        for col in 0..nb {
            if (0..n).all(|k| self.p[k * nb + col] == 0.0) {
                return Err(Error::invalid(format!("symbol {col} is carried by no pulse")));
            }
        }
        if self.b.len() < nb {
            return Err(Error::invalid(format!(
                "need at least Nb = {nb} measurements, got {}",
                self.b.len()
            )));
        }
        for (m, bm) in self.b.iter().enumerate() {
            if bm.n() != n {
                return Err(Error::invalid(format!("B[{m}] is {}x{0}, expected {n}x{n}", bm.n())));
            }
            if !bm.is_finite() {
                return Err(Error::NonFinite("B matrix"));
            }
        }
        if self.z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("measurements"));
        }
        Ok(())
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn nr(&self) -> usize {
        self.b.len()
    }

    pub fn pulses(&self) -> usize {
        self.nb * self.np
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn b(&self) -> &[SymMat] {
        &self.b
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn with_measurements(&self, z: Vec<f64>) -> Result<Self> {
        let mut s = self.clone();
        s.z = z;
        s.validate()?;
        Ok(s)
    }

    /// `Q(r + Pd)`, the pulse amplitudes for data `d`.
    pub fn amplitudes(&self, d: &[f64]) -> Vec<f64> {
        let nb = self.nb;
        (0..self.pulses())
            .map(|k| {
                let pd: f64 = (0..nb).map(|j| self.p[k * nb + j] * d[j]).sum();
                self.q[k] * (self.r[k] + pd)
            })
            .collect()
    }

    /// Noiseless measurements for data `d`.
    pub fn predict_z(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.nb {
            return Err(Error::DimensionMismatch {
                expected: self.nb,
                got: d.len(),
            });
        }
        if d.iter().any(|&x| x != 1.0 && x != -1.0) {
            return Err(Error::invalid("data symbols must be ±1"));
        }
        let a = self.amplitudes(d);
        Ok(self.b.iter().map(|bm| bm.quad_form(&a)).collect())
    }

    pub fn residual(&self, d: &[f64]) -> Result<f64> {
        let pred = self.predict_z(d)?;
        Ok(self.z.iter().zip(&pred).map(|(z, p)| (z - p).powi(2)).sum())
    }

    /// Per-measurement pieces of the expanded residual.
    fn expansion(&self) -> Vec<Expansion> {
        let (n, nb) = (self.pulses(), self.nb);
        let qr: Vec<f64> = (0..n).map(|k| self.q[k] * self.r[k]).collect();
        // Column j of QP.
        let qp: Vec<Vec<f64>> = (0..nb)
            .map(|j| (0..n).map(|k| self.q[k] * self.p[k * nb + j]).collect())
            .collect();
        self.b
            .iter()
            .map(|bm| {
                let bqr = bm.mul_vec(&qr);
                let reference = dot(&qr, &bqr);
                // (Qr)ᵗB(QP) and (Qr)ᵗBᵗ(QP): identical for symmetric B, kept apart
                // to mirror the expansion.
                let cross: Vec<f64> = qp.iter().map(|col| dot(&bqr, col)).collect();
                let cross_t: Vec<f64> = qp
                    .iter()
                    .map(|col| {
                        let mut s = 0.0;
                        for i in 0..n {
                            if qr[i] == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                s += qr[i] * bm.get(j, i) * col[j];
                            }
                        }
                        s
                    })
                    .collect();
                let bqp: Vec<Vec<f64>> = qp.iter().map(|col| bm.mul_vec(col)).collect();
                let data = SymMat::from_fn(nb, |a, b| dot(&qp[a], &bqp[b]));
                Expansion {
                    reference,
                    cross,
                    cross_t,
                    data,
                }
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let (n, nb) = (self.pulses(), self.nb);
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.nb, self.np, self.nr()).unwrap();
        write_row(&mut s, &self.q);
        write_row(&mut s, &self.r);
        for k in 0..n {
            write_row(&mut s, &self.p[k * nb..(k + 1) * nb]);
        }
        for bm in &self.b {
            for i in 0..n {
                write_row(&mut s, bm.row(i));
            }
        }
        write_row(&mut s, &self.z);
        s
    }

    /// Whitespace-separated: `nb np nr`, Q diagonal, r, P (row-major), each
    /// B[m] (row-major), z.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .enumerate()
            .flat_map(|(i, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (i + 1, t))
            })
            .peekable();
        let mut next_usize = |what: &str| -> Result<usize> {
            let (line, t) = tokens.next().ok_or_else(|| Error::parse(0, format!("missing {what}")))?;
            t.parse().map_err(|_| Error::parse(line, format!("bad {what} '{t}'")))
        };
        let nb = next_usize("nb")?;
        let np = next_usize("np")?;
        let nr = next_usize("nr")?;
        let n = nb * np;
        let mut take = |count: usize, what: &str| -> Result<Vec<f64>> {
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                let (line, t) = tokens
                    .next()
                    .ok_or_else(|| Error::parse(0, format!("unexpected end of input in {what}")))?;
                v.push(t.parse().map_err(|_| Error::parse(line, format!("bad number '{t}' in {what}")))?);
            }
            Ok(v)
        };
        let q = take(n, "Q")?;
        let r = take(n, "r")?;
        let p = take(n * nb, "P")?;
        let mut b = Vec::with_capacity(nr);
        for m in 0..nr {
            let data = take(n * n, "B")?;
            b.push(SymMat::from_row_major(n, data).map_err(|e| Error::parse(0, format!("B[{m}]: {e}")))?);
        }
        let z = take(nr, "z")?;
        if let Some((line, t)) = tokens.next() {
            return Err(Error::parse(line, format!("trailing token '{t}'")));
        }
        Self::new(nb, np, q, r, p, b, z)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn write_row(s: &mut String, v: &[f64]) {
    let mut first = true;
    for x in v {
        if !first {
            s.push(' ');
        }
        first = false;
        write!(s, "{x}").unwrap();
    }
    s.push('\n');
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
struct Expansion {
    /// rᵗQᵗB Qr
    reference: f64,
    /// rᵗQᵗB QP
    cross: Vec<f64>,
    /// rᵗQᵗBᵗQP
    cross_t: Vec<f64>,
    /// PᵗQᵗB QP
    data: SymMat,
}

/// Least-squares objective on `X = U − I` for a [`VolterraSystem`].
///
/// `eval` expands each residual on `U` directly (first row as `d`, trailing
/// block as `D` with unit diagonal). Gradient, curvature and line search use
/// the equivalent compiled form `Σ (cₘ − Lₘ·X)²`.
#[derive(Debug, Clone)]
pub struct VolterraObjective {
    nb: usize,
    z: Vec<f64>,
    terms: Vec<Expansion>,
    compiled: SumOfSquares,
}

pub fn build_objective(sys: &VolterraSystem) -> VolterraObjective {
    let nb = sys.nb;
    let n = nb + 1;
    let terms = sys.expansion();
    let compiled_terms = terms
        .iter()
        .zip(&sys.z)
        .map(|(t, &z)| {
            // d-coefficients land on both (0, j+1) and (j+1, 0), hence the half.
            let mut l = SymMat::zeros(n);
            for j in 0..nb {
                l.set(0, j + 1, 0.5 * (t.cross[j] + t.cross_t[j]));
            }
            for a in 0..nb {
                for b in (a + 1)..nb {
                    l.set(a + 1, b + 1, t.data.get(a, b));
                }
            }
            (z - t.reference - t.data.trace(), l)
        })
        .collect();
    let compiled = SumOfSquares::new(n, compiled_terms).expect("compiled terms are well formed");
    VolterraObjective {
        nb,
        z: sys.z.clone(),
        terms,
        compiled,
    }
}

impl VolterraObjective {
    pub fn compiled(&self) -> &SumOfSquares {
        &self.compiled
    }

    /// Residuals evaluated on `U` (unit diagonal assumed; diagonal of `u` ignored).
    pub fn residuals_on_u(&self, u: &SymMat) -> Vec<f64> {
        let nb = self.nb;
        let d: Vec<f64> = (0..nb).map(|j| u.get(0, j + 1)).collect();
        self.terms
            .iter()
            .zip(&self.z)
            .map(|(t, &z)| {
                let mut tr = 0.0;
                for a in 0..nb {
                    for b in 0..nb {
                        let dab = if a == b { 1.0 } else { u.get(a + 1, b + 1) };
                        tr += dab * t.data.get(b, a);
                    }
                }
                z - t.reference - dot(&t.cross, &d) - dot(&t.cross_t, &d) - tr
            })
            .collect()
    }
}

impl Objective for VolterraObjective {
    fn dim(&self) -> usize {
        self.nb + 1
    }

    fn eval(&self, x: &SymMat) -> f64 {
        self.residuals_on_u(x).iter().map(|r| r * r).sum()
    }

    fn grad(&self, x: &SymMat) -> SymMat {
        self.compiled.grad(x)
    }

    fn curvature_bound(&self) -> f64 {
        self.compiled.curvature_bound()
    }

    fn quadratic_along(&self, x: &SymMat, d: &SymMat) -> Option<(f64, f64)> {
        self.compiled.quadratic_along(x, d)
    }
}

#[derive(Debug, Clone)]
pub struct DemodResult {
    /// Detected symbols, ±1.
    pub d_hat: Vec<i8>,
    /// `X + I` at termination.
    pub u_final: SymMat,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `+1` for `x ≥ 0`, `−1` otherwise.
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Threshold the first row of `U`.
pub fn threshold(u: &SymMat) -> Vec<i8> {
    (1..u.n()).map(|j| sign(u.get(0, j))).collect()
}

fn demod_from(outcome: &SolveOutcome) -> DemodResult {
    let n = outcome.x.n();
    let u = &outcome.x + &SymMat::identity(n);
    DemodResult {
        d_hat: threshold(&u),
        u_final: u,
        gap: outcome.trace.final_gap(),
        iterations: outcome.trace.iterations(),
        converged: outcome.trace.converged,
    }
}

pub fn demodulate_sdp(sys: &VolterraSystem, opts: &SolverOptions) -> Result<DemodResult> {
    demodulate_sdp_traced(sys, opts).map(|(r, _)| r)
}

pub fn demodulate_sdp_traced(sys: &VolterraSystem, opts: &SolverOptions) -> Result<(DemodResult, SolveOutcome)> {
    let obj = build_objective(sys);
    let x0 = SymMat::zeros(sys.nb + 1);
    match sdp::solve(&obj, &x0, opts) {
        Ok(out) => Ok((demod_from(&out), out)),
        Err(Error::SolveAborted { source, partial }) => Err(Error::Demod {
            source,
            partial: Box::new(demod_from(&partial)),
        }),
        Err(e) => Err(e),
    }
}

/// Exhaustive minimum-residual detector. Ties resolve to the
/// lexicographically smallest sequence with `+1 < −1`.
pub fn demodulate_ml(sys: &VolterraSystem) -> Result<(Vec<i8>, f64)> {
    let nb = sys.nb;
    if nb > ML_MAX_BITS {
        return Err(Error::Budget { nb, max: ML_MAX_BITS });
    }
    // z(d) = reference + (cross + cross_t)·d + dᵗ W d
    let terms = sys.expansion();
    let lin: Vec<Vec<f64>> = terms
        .iter()
        .map(|t| t.cross.iter().zip(&t.cross_t).map(|(a, b)| a + b).collect())
        .collect();
    let mut best = f64::INFINITY;
    let mut best_idx = 0usize;
    let mut d = vec![0.0; nb];
    for idx in 0..(1usize << nb) {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = if (idx >> (nb - 1 - j)) & 1 == 0 { 1.0 } else { -1.0 };
        }
        let mut res = 0.0;
        for ((t, l), &z) in terms.iter().zip(&lin).zip(&sys.z) {
            let pred = t.reference + dot(l, &d) + t.data.quad_form(&d);
            res += (z - pred).powi(2);
            if res >= best {
                break;
            }
        }
        if res < best {
            best = res;
            best_idx = idx;
        }
    }
    let d_hat: Vec<i8> = (0..nb)
        .map(|j| if (best_idx >> (nb - 1 - j)) & 1 == 0 { 1 } else { -1 })
        .collect();
    Ok((d_hat, best))
}

/// `[1; d][1; d]ᵗ − I`, the solver-space image of a sign vector.
pub fn rank_one_point(d: &[f64]) -> SymMat {
    let mut x: Vec<f64> = Vec::with_capacity(d.len() + 1);
    x.push(1.0);
    x.extend_from_slice(d);
    let mut m = SymMat::zeros(x.len());
    m.add_outer(1.0, &x);
    m.with_zero_diagonal()
}
