//! Primal-dual interior-point solve of the pair
//! `min Σλ s.t. G + diag(λ) ⪰ 0` / `max −G·S s.t. diag(S) = 1, S ⪰ 0`.
//!
//! Matrices are dense row-major `n x n` slices; `n` is small, so everything
//! is plain loops over preallocated buffers.

use crate::symmat::SymMat;

pub(crate) struct BarrierPoint {
    pub lambda: Vec<f64>,
    pub primal: SymMat,
    pub iterations: usize,
}

/// Lower Cholesky factor of `a` written to `l`; `false` when `a` is not
/// numerically positive definite.
fn cholesky(n: usize, a: &[f64], l: &mut [f64]) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
        for j in i + 1..n {
            l[i * n + j] = 0.0;
        }
    }
    true
}

fn cholesky_solve(n: usize, l: &[f64], b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn inverse(n: usize, l: &[f64], inv: &mut [f64], col: &mut [f64]) {
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        cholesky_solve(n, l, col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    symmetrize(n, inv);
}

fn symmetrize(n: usize, m: &mut [f64]) {
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
}

/// Smallest eigenvalue of the symmetric matrix in `a` (overwritten), by
/// Householder reduction to tridiagonal form and implicit QL.
fn min_eigenvalue(n: usize, a: &mut [f64], v: &mut [f64], w: &mut [f64]) -> f64 {
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[i * n + k] * a[i * n + k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for i in 0..n {
            v[i] = if i <= k { 0.0 } else { a[i * n + k] };
        }
        v[k + 1] -= alpha;
        let vv: f64 = v[k + 1..n].iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        // A ← H A H with H = I − 2vvᵗ/vᵗv, via p = 2Av/vᵗv and w = p − (vᵗp/vᵗv) v.
        let vs = &v[k + 1..n];
        for i in k + 1..n {
            let row = &a[i * n + k + 1..(i + 1) * n];
            w[i] = 2.0 * row.iter().zip(vs).map(|(x, y)| x * y).sum::<f64>() / vv;
        }
        let kappa = vs.iter().zip(&w[k + 1..n]).map(|(x, y)| x * y).sum::<f64>() / vv;
        for i in k + 1..n {
            w[i] -= kappa * v[i];
        }
        let ws = &w[k + 1..n];
        for i in k + 1..n {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a[i * n + k + 1..(i + 1) * n];
            for ((r, vj), wj) in row.iter_mut().zip(vs).zip(ws) {
                *r -= vi * wj + wi * vj;
            }
        }
        a[(k + 1) * n + k] = alpha;
        a[k * n + k + 1] = alpha;
        for i in k + 2..n {
            a[i * n + k] = 0.0;
            a[k * n + i] = 0.0;
        }
    }
    let d = v;
    let e = w;
    for i in 0..n {
        d[i] = a[i * n + i];
        e[i] = if i + 1 < n { a[(i + 1) * n + i] } else { 0.0 };
    }
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return f64::NAN;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d[..n].iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Inverse of a lower-triangular factor, itself lower triangular.
fn invert_lower(n: usize, l: &[f64], li: &mut [f64]) {
    li.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        li[i * n + i] = 1.0 / l[i * n + i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s += l[i * n + k] * li[k * n + j];
            }
            li[i * n + j] = -s / l[i * n + i];
        }
    }
}

struct Workspace {
    n: usize,
    half: Vec<f64>,
    scaled: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            n,
            half: vec![0.0; n * n],
            scaled: vec![0.0; n * n],
            v: vec![0.0; n],
            w: vec![0.0; n],
        }
    }

    /// Largest `α ≤ 1` keeping `LLᵗ + α·dir` positive semidefinite, from the
    /// smallest eigenvalue of `L⁻¹ dir L⁻ᵗ`; `li` is `L⁻¹`.
    fn max_step(&mut self, li: &[f64], dir: &[f64]) -> f64 {
        let n = self.n;
        // half = L⁻¹ dir, scaled = half L⁻ᵗ (lower triangle, then mirrored).
        self.half.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let row = &mut self.half[i * n..(i + 1) * n];
            for k in 0..=i {
                let f = li[i * n + k];
                for (h, d) in row.iter_mut().zip(&dir[k * n..(k + 1) * n]) {
                    *h += f * d;
                }
            }
        }
        for i in 0..n {
            let hrow = &self.half[i * n..(i + 1) * n];
            for j in 0..=i {
                let lrow = &li[j * n..j * n + j + 1];
                let v: f64 = hrow[..=j].iter().zip(lrow).map(|(a, b)| a * b).sum();
                self.scaled[i * n + j] = v;
                self.scaled[j * n + i] = v;
            }
        }
        let m = min_eigenvalue(n, &mut self.scaled, &mut self.v, &mut self.w);
        if m.is_nan() {
            0.0
        } else if m < 0.0 {
            (-1.0 / m).min(1.0)
        } else {
            1.0
        }
    }
}

/// Newton step towards `ZX = R` keeping `diag(X) = 1` and the dual slack
/// structure: `(Z⁻¹∘X) dλ = diag(Z⁻¹R) − 1`,
/// `dX = Z⁻¹R − X − Z⁻¹ diag(dλ) X` (symmetrized, zero diagonal).
/// `target = None` stands for `R = 0`.
fn newton_direction(
    n: usize,
    zi: &[f64],
    x: &[f64],
    schur_factor: &[f64],
    target: Option<&[f64]>,
    dx: &mut [f64],
    dl: &mut [f64],
) {
    // dx temporarily holds Z⁻¹R.
    match target {
        Some(r) => matmul(n, zi, r, dx),
        None => dx.iter_mut().for_each(|v| *v = 0.0),
    }
    for i in 0..n {
        dl[i] = dx[i * n + i] - 1.0;
    }
    cholesky_solve(n, schur_factor, dl);
    for i in 0..n {
        let row = &mut dx[i * n..(i + 1) * n];
        for k in 0..n {
            let f = zi[i * n + k] * dl[k];
            for (r, xv) in row.iter_mut().zip(&x[k * n..(k + 1) * n]) {
                *r -= f * xv;
            }
        }
        for (r, xv) in row.iter_mut().zip(&x[i * n..(i + 1) * n]) {
            *r -= xv;
        }
    }
    symmetrize(n, dx);
    for i in 0..n {
        dx[i * n + i] = 0.0;
    }
}

fn matmul(n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    c.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let row = &mut c[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            for (r, bv) in row.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                *r += aik * bv;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Follows the central path until `S·(G + diag(λ)) ≤ rel_gap · max(1, |Σλ|)`,
/// progress stalls, or the iteration budget runs out; returns the strictly
/// feasible pair with the smallest gap seen.
pub(crate) fn central_path(g: &SymMat, rel_gap: f64, max_iter: usize) -> Option<BarrierPoint> {
    let n = g.n();
    let gm = g.as_row_major();
    let mut lambda: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| gm[i * n + j].abs()).sum::<f64>() + 1.0)
        .collect();
    let mut x = SymMat::identity(n).as_row_major().to_vec();
    let slack = |lambda: &[f64], z: &mut [f64]| {
        z.copy_from_slice(gm);
        for i in 0..n {
            z[i * n + i] += lambda[i];
        }
    };
    let mut z = vec![0.0; n * n];
    slack(&lambda, &mut z);

    let mut work = Workspace::new(n);
    let mut lx = vec![0.0; n * n];
    let mut lz = vec![0.0; n * n];
    let mut lxi = vec![0.0; n * n];
    let mut lzi = vec![0.0; n * n];
    let mut ls = vec![0.0; n * n];
    let mut zi = vec![0.0; n * n];
    let mut schur = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    let mut dx_aff = vec![0.0; n * n];
    let mut dl_aff = vec![0.0; n];
    let mut dx = vec![0.0; n * n];
    let mut dl = vec![0.0; n];
    let mut dz = vec![0.0; n * n];
    let mut target = vec![0.0; n * n];
    let mut next_x = vec![0.0; n * n];
    let mut next_z = vec![0.0; n * n];
    let mut next_lambda = vec![0.0; n];
    let mut next_lx = vec![0.0; n * n];
    let mut next_lz = vec![0.0; n * n];

    if !(cholesky(n, &x, &mut lx) && cholesky(n, &z, &mut lz)) {
        return None;
    }
    let mut gap = dot(&z, &x);
    let mut best = (x.clone(), lambda.clone(), gap);
    let mut stalled = 0;
    let mut iterations = 0;
    while iterations < max_iter {
        let value: f64 = lambda.iter().sum();
        if gap <= rel_gap * value.abs().max(1.0) {
            break;
        }
        iterations += 1;
        invert_lower(n, &lx, &mut lxi);
        invert_lower(n, &lz, &mut lzi);
        inverse(n, &lz, &mut zi, &mut col);
        for ((s, a), b) in schur.iter_mut().zip(&zi).zip(&x) {
            *s = a * b;
        }
        // A failed factorization this deep means the point is as accurate as
        // the arithmetic allows.
        if !cholesky(n, &schur, &mut ls) {
            break;
        }

        // Affine-scaling predictor picks the centering weight.
        newton_direction(n, &zi, &x, &ls, None, &mut dx_aff, &mut dl_aff);
        dz.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            dz[i * n + i] = dl_aff[i];
        }
        let ap_aff = work.max_step(&lxi, &dx_aff);
        let ad_aff = work.max_step(&lzi, &dz);
        let mut predicted = 0.0;
        for i in 0..n * n {
            predicted += (z[i] + ad_aff * dz[i]) * (x[i] + ap_aff * dx_aff[i]);
        }
        let sigma = (predicted.max(0.0) / gap).powi(3).clamp(0.0, 1.0);
        let mu = sigma * gap / n as f64;
        // Corrector target `μI − dZ·dX` with `dZ = diag(dλ)` from the predictor.
        for i in 0..n {
            for j in 0..n {
                target[i * n + j] = -dl_aff[i] * dx_aff[i * n + j];
            }
            target[i * n + i] += mu;
        }
        newton_direction(n, &zi, &x, &ls, Some(&target), &mut dx, &mut dl);
        for i in 0..n {
            dz[i * n + i] = dl[i];
        }
        let ap = 0.95 * work.max_step(&lxi, &dx);
        let ad = 0.95 * work.max_step(&lzi, &dz);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        for ((nx, a), d) in next_x.iter_mut().zip(&x).zip(&dx) {
            *nx = a + ap * d;
        }
        for ((nl, a), d) in next_lambda.iter_mut().zip(&lambda).zip(&dl) {
            *nl = a + ad * d;
        }
        slack(&next_lambda, &mut next_z);
        if !(cholesky(n, &next_x, &mut next_lx) && cholesky(n, &next_z, &mut next_lz)) {
            break;
        }
        std::mem::swap(&mut x, &mut next_x);
        std::mem::swap(&mut lambda, &mut next_lambda);
        std::mem::swap(&mut z, &mut next_z);
        std::mem::swap(&mut lx, &mut next_lx);
        std::mem::swap(&mut lz, &mut next_lz);
        gap = dot(&z, &x);
        if gap < 0.5 * best.2 {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        }
        if gap < best.2 {
            best = (x.clone(), lambda.clone(), gap);
        }
    }
    let (x, lambda, gap) = best;
    let primal = SymMat::symmetrized(n, &x);
    (primal.is_finite() && gap.is_finite()).then_some(BarrierPoint {
        lambda,
        primal,
        iterations,
    })
}
