//! Approximate solver for unit-diagonal SDPs.
//!
//! The solver works on `X = U − I`: symmetric, zero diagonal, `λ_min(X) ≥ −1`.
//! Each iteration solves the diagonal dual subproblem
//! `min Σλₖ  s.t. ∇f(X) + diag(λ) ⪰ 0`, whose KKT weights `y` and null
//! vectors `vᵢ` give the rank-deficient target `Σ yᵢvᵢvᵢᵗ − I` that the
//! iterate moves toward. The duality gap `g(X) = X·∇f(X) + Σλₖ` bounds the
//! suboptimality and drives the stopping rule.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::barrier;
use crate::error::{Error, Result};
use crate::lp::PackingLp;
use crate::symmat::SymMat;

/// A convex objective over the zero-diagonal feasible set.
///
/// `eval` must not depend on diagonal entries; `grad` is taken with respect
/// to the trace inner product and is projected to zero diagonal by the solver.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &SymMat) -> f64;
    fn grad(&self, x: &SymMat) -> SymMat;
    /// Declared bound on `sup [f(Y) − f(X) − ⟨Y−X, ∇f(X)⟩] / β²`.
    fn curvature_bound(&self) -> f64;
    /// `(slope, curvature)` with `f(x + t·d) = f(x) + slope·t + curvature·t²`,
    /// when the objective is quadratic along lines.
    fn quadratic_along(&self, _x: &SymMat, _d: &SymMat) -> Option<(f64, f64)> {
        None
    }
}

/// `f(X) = Σₘ (cₘ − Lₘ·X)²` with zero-diagonal symmetric `Lₘ`.

#[derive(Debug, Clone)]
pub struct SumOfSquares {
    n: usize,
    offsets: Vec<f64>,
    forms: Vec<SymMat>,
    curvature: f64,
}

impl SumOfSquares {
    /// Diagonals of the supplied forms are discarded.
    pub fn new(n: usize, terms: Vec<(f64, SymMat)>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(terms.len());
        let mut forms = Vec::with_capacity(terms.len());
        for (c, l) in terms {
            if l.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: l.n(),
                });
            }
            if !c.is_finite() || !l.is_finite() {
                return Err(Error::NonFinite("sum-of-squares term"));
            }
            offsets.push(c);
            forms.push(l.with_zero_diagonal());
        }
        let diameter_sq = 4.0 * (n * (n - 1)) as f64;
        let curvature = forms
            .iter()
            .map(|l| l.frobenius_norm().powi(2))
            .sum::<f64>()
            * diameter_sq;
        Ok(SumOfSquares {
            n,
            offsets,
            forms,
            curvature,
        })
    }

    pub fn terms(&self) -> impl Iterator<Item = (f64, &SymMat)> {
        self.offsets.iter().copied().zip(self.forms.iter())
    }

    pub fn residuals(&self, x: &SymMat) -> Vec<f64> {
        self.terms().map(|(c, l)| c - l.dot(x)).collect()
    }
}

impl Objective for SumOfSquares {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &SymMat) -> f64 {
        self.residuals(x).iter().map(|r| r * r).sum()
    }

    fn grad(&self, x: &SymMat) -> SymMat {
        let mut g = SymMat::zeros(self.n);
        for (c, l) in self.terms() {
            g.axpy(-2.0 * (c - l.dot(x)), l);
        }
        g
    }

    fn curvature_bound(&self) -> f64 {
        self.curvature
    }

    fn quadratic_along(&self, x: &SymMat, d: &SymMat) -> Option<(f64, f64)> {
        let mut slope = 0.0;
        let mut curv = 0.0;
        for (c, l) in self.terms() {
            let e = c - l.dot(x);
            let s = l.dot(d);
            slope -= 2.0 * e * s;
            curv += s * s;
        }
        Some((slope, curv))
    }
}

/// How the dual subproblem is solved. Both produce the same certificate
/// type; the interior-point path is much faster at this problem size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualMethod {
    #[default]
    InteriorPoint,
    CuttingPlane,
}

#[derive(Debug, Clone, Copy)]
pub struct DualOptions {
    pub method: DualMethod,
    /// Interior-point iterations or cutting-plane rounds.
    pub max_rounds: usize,
    /// Cuts are added for eigenvalues below `−cut_tol · max(1, ‖G‖_F)`,
    /// capped at `1e-7 / n`.
    pub cut_tol: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions {
            method: DualMethod::default(),
            max_rounds: 200,
            cut_tol: 1e-9,
        }
    }
}

/// Optimal diagonal dual plus the KKT data of the active constraints.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub lambda: Vec<f64>,
    /// Unit vectors `vᵢ` of the active set.
    pub vectors: Vec<Vec<f64>>,
    /// `αᵢ = vᵢᵗ G vᵢ`.
    pub alphas: Vec<f64>,
    /// KKT weights `yᵢ ≥ 0`.
    pub weights: Vec<f64>,
    pub rounds: usize,
    /// Uniform shift added to the multipliers to make `G + diag(λ)` PSD.
    pub shift: f64,
}

impl DualCertificate {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// `Σ yᵢ vᵢvᵢᵗ`
    pub fn direction_target(&self) -> SymMat {
        SymMat::weighted_outer_sum(
            self.n(),
            self.weights
                .iter()
                .zip(&self.vectors)
                .map(|(&w, v)| (w, v.as_slice())),
        )
    }

    pub fn check(&self, g: &SymMat) -> Result<CertificateReport> {
        let psd_min = g.add_diag(&self.lambda).lambda_min()?;
        Ok(self.report(g, psd_min))
    }

    /// The report given an already known `λ_min(G + diag(λ))`.
    fn report(&self, g: &SymMat, psd_min: f64) -> CertificateReport {
        let n = self.n();
        let m = g.add_diag(&self.lambda);
        let complementarity = self
            .vectors
            .iter()
            .map(|v| m.quad_form(v).abs())
            .fold(0.0, f64::max);
        let normalization = (0..n)
            .map(|k| {
                let s: f64 = self
                    .weights
                    .iter()
                    .zip(&self.vectors)
                    .map(|(w, v)| w * v[k] * v[k])
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        let ya: f64 = self.weights.iter().zip(&self.alphas).map(|(y, a)| y * a).sum();
        let trace_identity = (self.lambda_sum() + ya).abs();
        let min_weight = self.weights.iter().cloned().fold(f64::INFINITY, f64::min);
        CertificateReport {
            psd_min,
            complementarity,
            normalization,
            trace_identity,
            min_weight,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertificateReport {
    /// `λ_min(G + diag(λ))`
    pub psd_min: f64,
    pub complementarity: f64,
    pub normalization: f64,
    pub trace_identity: f64,
    pub min_weight: f64,
}

impl CertificateReport {
    /// Largest violation as a multiple of its tolerance; `≤ 1` when the
    /// certificate holds.
    pub fn violation(&self) -> f64 {
        if self.min_weight < 0.0 {
            return f64::INFINITY;
        }
        (-self.psd_min / 1e-7)
            .max(self.complementarity / 1e-6)
            .max(self.normalization / 1e-6)
            .max(self.trace_identity / 1e-6)
    }

    pub fn holds(&self) -> bool {
        self.psd_min >= -1e-7
            && self.complementarity <= 1e-6
            && self.normalization <= 1e-6
            && self.trace_identity <= 1e-6
            && self.min_weight >= 0.0
    }
}

pub fn dual_subproblem(g: &SymMat) -> Result<DualCertificate> {
    dual_subproblem_with(g, &DualOptions::default())
}

/// Solves `min Σλₖ s.t. G + diag(λ) ⪰ 0` and returns the KKT certificate.
pub fn dual_subproblem_with(g: &SymMat, opts: &DualOptions) -> Result<DualCertificate> {
    if !g.is_finite() {
        return Err(Error::NonFinite("dual subproblem input"));
    }
    let scale = g.frobenius_norm().max(1.0);
    if g.max_abs_diag() > 1e-12 * scale {
        return Err(Error::invalid("dual subproblem requires a zero-diagonal matrix"));
    }

    // With zero diagonal, G ⪰ 0 only when G = 0.
    if g.frobenius_norm() == 0.0 {
        return Ok(trivial_certificate(g));
    }
    if opts.method == DualMethod::InteriorPoint {
        if let Some((cert, report)) = interior_point(g, opts)? {
            if report.holds() {
                return Ok(cert);
            }
            // At large |G| the absolute tolerances sit near the arithmetic
            // limit; keep whichever certificate comes closer.
            if let Ok(fallback) = cutting_plane(g, opts, scale) {
                if fallback.check(g)?.violation() < report.violation() {
                    return Ok(fallback);
                }
            }
            return Ok(cert);
        }
    }
    cutting_plane(g, opts, scale)
}

/// Central-path solve of the primal-dual pair. The active vectors and
/// weights are the eigenpairs of the primal matrix `S`, whose unit diagonal
/// is the weight normalization. Returns `None` if the path breaks down; the
/// caller still checks the result, since the tolerances are absolute.
fn interior_point(g: &SymMat, opts: &DualOptions) -> Result<Option<(DualCertificate, CertificateReport)>> {
    let n = g.n();
    let Some(point) = barrier::central_path(g, 1e-14, opts.max_rounds) else {
        return Ok(None);
    };
    let es = point.primal.eig_sym()?;
    // Near the optimum each eigenvector of S is either in the range of S or
    // in that of the slack matrix; assign it to whichever side dominates.
    let slack = g.add_diag(&point.lambda);
    let mut vectors = Vec::new();
    let mut weights = Vec::new();
    for (mu, v) in es.eigenvalues.iter().zip(&es.eigenvectors) {
        if *mu > slack.quad_form(v).max(1e-300) {
            vectors.push(v.clone());
            weights.push(*mu);
        }
    }
    if vectors.is_empty() {
        return Ok(None);
    }
    let lmin = slack.lambda_min()?;
    let shift = (-lmin).max(0.0);
    let lambda: Vec<f64> = point.lambda.iter().map(|l| l + shift).collect();
    debug_assert_eq!(lambda.len(), n);
    let cert = DualCertificate {
        lambda,
        alphas: vectors.iter().map(|v| g.quad_form(v)).collect(),
        vectors,
        weights,
        rounds: point.iterations,
        shift,
    };
    let report = cert.report(g, lmin + shift);
    if report.holds() {
        return Ok(Some((cert, report)));
    }
    // A nearly rank-one S stalls the path before its small eigenvalues
    // vanish; the exact optimum is then x xᵗ with x a sign vector.
    let top = &es.eigenvectors[n - 1];
    let root = 1.0 / (n as f64).sqrt();
    let signed: Vec<f64> = top.iter().map(|&t| if t < 0.0 { -root } else { root }).collect();
    let snapped = DualCertificate {
        alphas: vec![g.quad_form(&signed)],
        vectors: vec![signed],
        weights: vec![n as f64],
        ..cert.clone()
    };
    let snapped_report = snapped.report(g, lmin + shift);
    Ok(Some(if snapped_report.violation() < report.violation() {
        (snapped, snapped_report)
    } else {
        (cert, report)
    }))
}

/// Cutting-plane solve.
///
/// Every unit vector `v` yields the valid cut `Σₖ vₖ²λₖ ≥ −vᵗGv`. The LP over
/// the current cuts is solved in its packing form, whose primal variables
/// are the KKT weights and whose row multipliers are `λ`. Eigenvectors of
/// `G + diag(λ)` with negative eigenvalues become new cuts until none remain.
fn cutting_plane(g: &SymMat, opts: &DualOptions, scale: f64) -> Result<DualCertificate> {
    let n = g.n();
    let eig = g.eig_sym()?;

    let mut lp = PackingLp::new(n);
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    let add_cut = |lp: &mut PackingLp, cuts: &mut Vec<Vec<f64>>, v: &[f64]| {
        let a: Vec<f64> = v.iter().map(|x| x * x).collect();
        lp.add_column(a, -g.quad_form(v));
        cuts.push(v.to_vec());
    };
    for v in &eig.eigenvectors {
        add_cut(&mut lp, &mut cuts, v);
    }

    // The final uniform shift costs n·|λ_min| in the trace identity.
    let threshold = (opts.cut_tol * scale).min(1e-7 / n as f64);
    let mut rounds = 0;
    loop {
        rounds += 1;
        let sol = lp.solve()?;
        let m = g.add_diag(&sol.lambda);
        let e = m.eig_sym()?;
        let lmin = e.eigenvalues[0];
        if lmin >= -threshold {
            return Ok(assemble(g, &cuts, &sol, lmin, rounds));
        }
        if rounds >= opts.max_rounds {
            return Err(Error::DualNoConvergence {
                rounds,
                residual: lmin,
                lambda: sol.lambda,
            });
        }
        for (gamma, v) in e.eigenvalues.iter().zip(&e.eigenvectors) {
            if *gamma < -threshold {
                add_cut(&mut lp, &mut cuts, v);
            }
        }
    }
}

fn trivial_certificate(g: &SymMat) -> DualCertificate {
    let n = g.n();
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            e
        })
        .collect();
    DualCertificate {
        lambda: vec![0.0; n],
        alphas: vectors.iter().map(|v| g.quad_form(v)).collect(),
        vectors,
        weights: vec![1.0; n],
        rounds: 0,
        shift: 0.0,
    }
}

fn assemble(
    g: &SymMat,
    cuts: &[Vec<f64>],
    sol: &crate::lp::PackingSolution,
    lmin: f64,
    rounds: usize,
) -> DualCertificate {
    let n = g.n();
    let shift = (-lmin).max(0.0);
    let lambda: Vec<f64> = sol.lambda.iter().map(|l| l + shift).collect();
    let mut vectors = Vec::new();
    let mut weights = Vec::new();
    let mut alphas = Vec::new();
    for (v, &y) in cuts.iter().zip(&sol.y) {
        if y > 0.0 {
            alphas.push(g.quad_form(v));
            vectors.push(v.clone());
            weights.push(y);
        }
    }
    // A positive row slack is the weight on the bound cut λₖ ≥ 0 (v = eₖ).
    for k in 0..n {
        if sol.slack[k] > 0.0 {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            alphas.push(0.0);
            vectors.push(e);
            weights.push(sol.slack[k]);
        }
    }
    DualCertificate {
        lambda,
        vectors,
        alphas,
        weights,
        rounds,
        shift,
    }
}

/// `g = X·G + Σλₖ`.
pub fn duality_gap(x: &SymMat, g: &SymMat, cert: &DualCertificate) -> Result<f64> {
    if x.n() != g.n() || cert.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: if x.n() != g.n() { x.n() } else { cert.n() },
        });
    }
    Ok(x.dot(g) + cert.lambda_sum())
}

/// `Σ yᵢvᵢvᵢᵗ − X − I`, with zero diagonal.
pub fn direction(x: &SymMat, cert: &DualCertificate) -> SymMat {
    let mut d = cert.direction_target();
    d.axpy(-1.0, x);
    d.with_zero_diagonal()
}

/// `X + β(Σ yᵢvᵢvᵢᵗ − X − I)` with the diagonal set to exactly zero.
pub fn fw_step(x: &SymMat, cert: &DualCertificate, beta: f64) -> Result<SymMat> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("step size {beta} outside [0, 1]")));
    }
    if cert.n() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: cert.n(),
        });
    }
    if beta == 0.0 {
        return Ok(x.clone());
    }
    let mut next = x.scaled(1.0 - beta);
    next.axpy(beta, &cert.direction_target());
    Ok(next.with_zero_diagonal())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepPolicy {
    /// Exact minimization along the segment for quadratic objectives,
    /// `2/(k+2)` otherwise.
    #[default]
    LineSearch,
    /// Always `2/(k+2)`.
    Schedule,
}

pub fn schedule_step(k: usize) -> f64 {
    2.0 / (k as f64 + 2.0)
}

pub fn choose_beta<O: Objective + ?Sized>(
    obj: &O,
    x: &SymMat,
    direction: &SymMat,
    k: usize,
    policy: StepPolicy,
) -> f64 {
    if policy == StepPolicy::LineSearch {
        if let Some((slope, curv)) = obj.quadratic_along(x, direction) {
            if !(slope.is_finite() && curv.is_finite()) {
                return 0.0;
            }
            if curv > 0.0 {
                return (-slope / (2.0 * curv)).clamp(0.0, 1.0);
            }
            return if slope < 0.0 { 1.0 } else { 0.0 };
        }
    }
    schedule_step(k)
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Absolute gap threshold. `None` means `1e−3 · max(1, f(X₀))`.
    pub gap_tol: Option<f64>,
    pub max_iter: usize,
    pub step: StepPolicy,
    pub dual: DualOptions,
    /// Keep every iterate in the trace.
    pub keep_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: None,
            max_iter: 300,
            step: StepPolicy::LineSearch,
            dual: DualOptions::default(),
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub k: usize,
    pub f: f64,
    pub gap: f64,
    /// Step taken from this iterate; `NaN` for the final one.
    pub beta: f64,
    pub lambda_min: f64,
    /// Milliseconds since the solve started.
    pub elapsed_ms: f64,
    pub dual_rounds: usize,
    /// `f(X_k) − β g(X_k) + β² C_f − f(X_{k+1})`; must be non-negative.
    pub descent_margin: Option<f64>,
}

impl TraceRecord {
    /// Dual function value `w(X_k) = f(X_k) − g(X_k)`.
    pub fn dual_value(&self) -> f64 {
        self.f - self.gap
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    pub iterates: Vec<SymMat>,
    pub converged: bool,
    pub curvature_bound: f64,
    pub gap_tol: f64,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.gap)
    }

    pub fn min_gap(&self) -> f64 {
        self.records.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min)
    }

    pub fn descent_violations(&self, slack: f64) -> usize {
        self.records
            .iter()
            .filter_map(|r| r.descent_margin)
            .filter(|&m| m < -slack)
            .count()
    }

    /// Tab-separated `k f g beta lambda_min ms`, one line per iteration.
    pub fn write_tsv(&self, w: &mut impl Write) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(
                w,
                "{}\t{:e}\t{:e}\t{}\t{:e}\t{:.3}",
                r.k,
                r.f,
                r.gap,
                if r.beta.is_nan() { "nan".to_string() } else { format!("{:e}", r.beta) },
                r.lambda_min,
                r.elapsed_ms
            )?;
        }
        Ok(())
    }

    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_tsv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: SymMat,
    pub trace: SolveTrace,
}

/// Runs the conditional-gradient iteration from `x0` until the duality gap
/// falls below the threshold or `max_iter` steps have been taken.
pub fn solve<O: Objective + ?Sized>(obj: &O, x0: &SymMat, opts: &SolverOptions) -> Result<SolveOutcome> {
    let n = obj.dim();
    if x0.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.n(),
        });
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("starting point"));
    }
    let lmin0 = x0.lambda_min()?;
    if x0.max_abs_diag() > 1e-9 || lmin0 < -1.0 - 1e-9 {
        return Err(Error::Infeasible {
            lambda_min: lmin0,
            max_diag: x0.max_abs_diag(),
        });
    }

    let mut x = x0.clone().with_zero_diagonal();
    let mut trace = SolveTrace {
        curvature_bound: obj.curvature_bound(),
        ..Default::default()
    };
    match iterate(obj, &mut x, lmin0, opts, &mut trace) {
        Ok(()) => Ok(SolveOutcome { x, trace }),
        Err(source) => Err(Error::SolveAborted {
            source: Box::new(source),
            partial: Box::new(SolveOutcome { x, trace }),
        }),
    }
}

fn iterate<O: Objective + ?Sized>(
    obj: &O,
    x: &mut SymMat,
    lmin0: f64,
    opts: &SolverOptions,
    trace: &mut SolveTrace,
) -> Result<()> {
    let start = Instant::now();
    let curvature = trace.curvature_bound;
    let mut gap_tol = opts.gap_tol.unwrap_or(f64::NAN);

    for k in 0..=opts.max_iter {
        trace.gap_tol = gap_tol;
        let f = obj.eval(x);
        if !f.is_finite() {
            return Err(Error::NonFinite("objective value"));
        }
        if k == 0 && opts.gap_tol.is_none() {
            gap_tol = 1e-3 * f.max(1.0);
        }
        let g = obj.grad(x).with_zero_diagonal();
        if !g.is_finite() {
            return Err(Error::NonFinite("objective gradient"));
        }
        let cert = dual_subproblem_with(&g, &opts.dual)?;
        let gap = duality_gap(x, &g, &cert)?;
        let lambda_min = if k == 0 { lmin0 } else { x.lambda_min()? };

        if let Some(prev) = trace.records.last_mut() {
            let b = prev.beta;
            prev.descent_margin = Some(prev.f - b * prev.gap + b * b * curvature - f);
        }
        trace.records.push(TraceRecord {
            k,
            f,
            gap,
            beta: f64::NAN,
            lambda_min,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            dual_rounds: cert.rounds,
            descent_margin: None,
        });
        if opts.keep_iterates {
            trace.iterates.push(x.clone());
        }

        if gap <= gap_tol {
            trace.converged = true;
            break;
        }
        if k == opts.max_iter {
            break;
        }
        let d = direction(x, &cert);
        let beta = choose_beta(obj, x, &d, k, opts.step);
        if beta == 0.0 {
            // No descent available along the conditional-gradient direction.
            break;
        }
        *x = fw_step(x, &cert, beta)?;
        if let Some(last) = trace.records.last_mut() {
            last.beta = beta;
        }
    }
    trace.gap_tol = gap_tol;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offdiag(v: &[(usize, usize, f64)], n: usize) -> SymMat {
        let mut m = SymMat::zeros(n);
        for &(i, j, x) in v {
            m.set(i, j, x);
        }
        m
    }

    #[test]
    fn zero_gradient_is_trivial() {
        let c = dual_subproblem(&SymMat::zeros(4)).unwrap();
        assert_eq!(c.lambda, vec![0.0; 4]);
        assert!(c.check(&SymMat::zeros(4)).unwrap().holds());
    }

    #[test]
    fn two_by_two_analytic() {
        let g = offdiag(&[(0, 1, 1.0)], 2);
        let c = dual_subproblem(&g).unwrap();
        // Σλ is flat to second order around the optimum, so λ itself is only
        // pinned to roughly the square root of the cut tolerance.
        assert!((c.lambda[0] - 1.0).abs() < 1e-4 && (c.lambda[1] - 1.0).abs() < 1e-4);
        assert!((c.lambda_sum() - 2.0).abs() < 1e-8);
        let s = c.direction_target();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-9);
        assert!((s.get(0, 1) + 1.0).abs() < 1e-9);
        assert!(c.check(&g).unwrap().holds());
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let g = SymMat::identity(3);
        assert!(dual_subproblem(&g).is_err());
    }

    #[test]
    fn gap_examples() {
        let g = offdiag(&[(0, 1, 1.0)], 2);
        let c = dual_subproblem(&g).unwrap();
        let gap = duality_gap(&SymMat::zeros(2), &g, &c).unwrap();
        assert!((gap - 2.0).abs() < 1e-8);
        let z = SymMat::zeros(2);
        let cz = dual_subproblem(&z).unwrap();
        assert_eq!(duality_gap(&z, &z, &cz).unwrap(), 0.0);
        assert!(duality_gap(&SymMat::zeros(3), &g, &c).is_err());
    }

    #[test]
    fn step_examples() {
        let g = offdiag(&[(0, 1, 1.0)], 2);
        let c = dual_subproblem(&g).unwrap();
        let x = SymMat::zeros(2);
        assert_eq!(fw_step(&x, &c, 0.0).unwrap(), x);
        let half = fw_step(&x, &c, 0.5).unwrap();
        assert!((half.get(0, 1) + 0.5).abs() < 1e-9);
        assert_eq!(half.get(0, 0), 0.0);
        let full = fw_step(&x, &c, 1.0).unwrap();
        assert!((full.get(0, 1) + 1.0).abs() < 1e-9);
        assert!(fw_step(&x, &c, 1.5).is_err());
        assert!(fw_step(&x, &c, -0.1).is_err());
    }

    #[test]
    fn schedule_values() {
        assert_eq!(schedule_step(0), 1.0);
        assert!((schedule_step(8) - 0.2).abs() < 1e-15);
        let obj = SumOfSquares::new(2, vec![]).unwrap();
        let x = SymMat::zeros(2);
        assert_eq!(choose_beta(&obj, &x, &x, 8, StepPolicy::Schedule), 0.2);
    }

    #[test]
    fn unique_minimizer_at_start() {
        let l = offdiag(&[(0, 1, 1.0), (1, 2, -0.5)], 3);
        let obj = SumOfSquares::new(3, vec![(0.0, l)]).unwrap();
        let out = solve(&obj, &SymMat::zeros(3), &SolverOptions::default()).unwrap();
        assert_eq!(out.trace.iterations(), 0);
        assert!(out.trace.converged);
        assert_eq!(out.x, SymMat::zeros(3));
    }

    #[test]
    fn infeasible_start_rejected() {
        let obj = SumOfSquares::new(2, vec![]).unwrap();
        let bad = offdiag(&[(0, 1, -1.5)], 2);
        assert!(matches!(
            solve(&obj, &bad, &SolverOptions::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn trace_tsv_format() {
        let l = offdiag(&[(0, 1, 1.0)], 2);
        let obj = SumOfSquares::new(2, vec![(0.6, l)]).unwrap();
        let out = solve(&obj, &SymMat::zeros(2), &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        out.trace.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines() {
            assert_eq!(line.split('\t').count(), 6);
        }
        assert_eq!(text.lines().count(), out.trace.records.len());
    }
}
