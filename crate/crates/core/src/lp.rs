//! Small dense linear programs.
//!
//! [`LinearProgram::solve`] is a textbook two-phase tableau simplex for
//! `min cᵗx` subject to mixed `≤ / ≥ / =` rows and `x ≥ 0`. It reports the
//! primal point and the row multipliers. [`PackingLp`] reuses the same engine
//! for `max bᵗy, Σ yⱼaⱼ ≤ 1, y ≥ 0` with columns appended over time; each
//! re-solve restarts from the previous optimal basis, which stays primal
//! feasible when columns are added.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;
/// Degenerate pivots tolerated under Dantzig pricing before switching to Bland.
const DEGENERATE_STREAK: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("pivot limit reached")]
    PivotLimit,
    #[error("row {row} has {got} coefficients, expected {expected}")]
    Shape { row: usize, expected: usize, got: usize },
    #[error("basis became singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }
}

/// `min cᵗx` over `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `∂(optimal value)/∂rhsᵢ` for each original row. Non-negative for `≥`
    /// rows, non-positive for `≤` rows.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

/// Working tableau `B⁻¹[A | b]` over a fixed column set.
struct Tableau {
    m: usize,
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    t: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols.len() + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width() + j]
    }

    fn rhs_at(&self, i: usize) -> f64 {
        self.at(i, self.cols.len())
    }

    /// Rebuilds the tableau for `basis` by Gauss-Jordan elimination on the
    /// original columns.
    fn load(&mut self, basis: &[usize]) -> Result<(), LpError> {
        let w = self.width();
        let m = self.m;
        let ncol = self.cols.len();
        self.t = vec![0.0; m * w];
        for (j, col) in self.cols.iter().enumerate() {
            for i in 0..m {
                self.t[i * w + j] = col[i];
            }
        }
        for i in 0..m {
            self.t[i * w + ncol] = self.rhs[i];
        }
        self.basis = vec![usize::MAX; m];
        let mut used = vec![false; m];
        for &col in basis {
            let mut best = None;
            let mut best_abs = PIVOT_EPS;
            for i in 0..m {
                if !used[i] {
                    let a = self.t[i * w + col].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(i);
                    }
                }
            }
            let row = best.ok_or(LpError::Singular)?;
            used[row] = true;
            self.pivot(row, col);
        }
        Ok(())
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.t[row * w + col];
        for j in 0..w {
            self.t[row * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.t[row * w..(row + 1) * w].to_vec();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.t[i * w + col];
            if f != 0.0 {
                for j in 0..w {
                    self.t[i * w + j] -= f * pivot_row[j];
                }
                self.t[i * w + col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut r = cost[j];
        for i in 0..self.m {
            r -= cost[self.basis[i]] * self.at(i, j);
        }
        r
    }

    /// Primal simplex from the current (feasible) basis.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), LpError> {
        let ncol = self.cols.len();
        let mut bland = false;
        let mut streak = 0;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::PivotLimit);
            }
            let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            let mut entering = None;
            let mut best = -COST_EPS * scale;
            for j in 0..ncol {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let r = self.reduced_cost(cost, j);
                if bland {
                    if r < -COST_EPS * scale {
                        entering = Some(j);
                        break;
                    }
                } else if r < best {
                    best = r;
                    entering = Some(j);
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };

            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, col);
                if a > PIVOT_EPS {
                    let ratio = self.rhs_at(i).max(0.0) / a;
                    let better = match leaving {
                        None => true,
                        Some((r, best_ratio)) => {
                            ratio < best_ratio - 1e-14
                                || (ratio <= best_ratio + 1e-14 && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return Err(LpError::Unbounded);
            };
            if ratio <= 1e-14 {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            self.pivot(row, col);
        }
    }

    /// Recomputes `x_B = B⁻¹b` and `π = B⁻ᵗc_B` from the original data.
    fn refined(&self, cost: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LpError> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        let mut bt = vec![0.0; m * m];
        for (k, &col) in self.basis.iter().enumerate() {
            for i in 0..m {
                bmat[i * m + k] = self.cols[col][i];
                bt[k * m + i] = self.cols[col][i];
            }
        }
        let xb = solve_dense(m, bmat, self.rhs.clone()).ok_or(LpError::Singular)?;
        let cb: Vec<f64> = self.basis.iter().map(|&c| cost[c]).collect();
        let pi = solve_dense(m, bt, cb).ok_or(LpError::Singular)?;
        Ok((xb, pi))
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
pub(crate) fn solve_dense(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pmax < 1e-300 {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = a[i * n + k] / a[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k * n + k];
    }
    Some(x)
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn constrain(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
        self
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.objective.len();
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Shape {
                    row,
                    expected: n,
                    got: c.coeffs.len(),
                });
            }
        }
        let m = self.constraints.len();
        if m == 0 {
            if self.objective.iter().any(|&c| c < 0.0) {
                return Err(LpError::Unbounded);
            }
            return Ok(LpSolution {
                x: vec![0.0; n],
                objective: 0.0,
                duals: Vec::new(),
                pivots: 0,
            });
        }

        // Standard form: flip rows to rhs ≥ 0, then add slack/surplus and
        // artificial columns.
        let mut flip = vec![1.0; m];
        let mut rel = Vec::with_capacity(m);
        for (i, c) in self.constraints.iter().enumerate() {
            let mut r = c.relation;
            if c.rhs < 0.0 {
                flip[i] = -1.0;
                r = match r {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            rel.push(r);
        }
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..m).map(|i| flip[i] * self.constraints[i].coeffs[j]).collect())
            .collect();
        let rhs: Vec<f64> = (0..m).map(|i| flip[i] * self.constraints[i].rhs).collect();
        let mut start_basis = vec![usize::MAX; m];
        for i in 0..m {
            match rel[i] {
                Relation::Le => {
                    start_basis[i] = cols.len();
                    cols.push(unit(m, i, 1.0));
                }
                Relation::Ge => cols.push(unit(m, i, -1.0)),
                Relation::Eq => {}
            }
        }
        let first_artificial = cols.len();
        for i in 0..m {
            if rel[i] != Relation::Le {
                start_basis[i] = cols.len();
                cols.push(unit(m, i, 1.0));
            }
        }
        let ncol = cols.len();
        let is_artificial: Vec<bool> = (0..ncol).map(|j| j >= first_artificial).collect();

        let mut tab = Tableau {
            m,
            cols,
            rhs,
            t: Vec::new(),
            basis: Vec::new(),
            pivots: 0,
        };
        tab.load(&start_basis)?;

        let mut live_rows: Vec<usize> = (0..m).collect();
        if first_artificial < ncol {
            // Phase 1: minimize the sum of artificials.
            let cost1: Vec<f64> = is_artificial.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
            let allowed = vec![true; ncol];
            tab.optimize(&cost1, &allowed)?;
            let infeas: f64 = (0..m)
                .filter(|&i| is_artificial[tab.basis[i]])
                .map(|i| tab.rhs_at(i))
                .sum();
            let bscale = 1.0 + tab.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if infeas > 1e-9 * bscale {
                return Err(LpError::Infeasible);
            }
            // Drive remaining (zero-level) artificials out; drop redundant rows.
            let mut i = 0;
            while i < tab.m {
                if is_artificial[tab.basis[i]] {
                    let col = (0..ncol)
                        .filter(|&j| !is_artificial[j] && !tab.basis.contains(&j))
                        .max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()))
                        .filter(|&j| tab.at(i, j).abs() > 1e-9);
                    match col {
                        Some(j) => tab.pivot(i, j),
                        None => {
                            remove_row(&mut tab, i);
                            live_rows.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        // Phase 2.
        let mut cost2 = vec![0.0; ncol];
        cost2[..n].copy_from_slice(&self.objective);
        let allowed: Vec<bool> = is_artificial.iter().map(|a| !a).collect();
        tab.optimize(&cost2, &allowed)?;

        let (xb, pi) = tab.refined(&cost2)?;
        let mut x = vec![0.0; n];
        for (k, &col) in tab.basis.iter().enumerate() {
            if col < n {
                x[col] = xb[k].max(0.0);
            }
        }
        let mut duals = vec![0.0; m];
        for (k, &orig) in live_rows.iter().enumerate() {
            duals[orig] = flip[orig] * pi[k];
        }
        let objective = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution {
            x,
            objective,
            duals,
            pivots: tab.pivots,
        })
    }
}

fn unit(m: usize, i: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[i] = v;
    e
}

fn remove_row(tab: &mut Tableau, row: usize) {
    let w = tab.width();
    tab.t.drain(row * w..(row + 1) * w);
    tab.basis.remove(row);
    tab.rhs.remove(row);
    for c in tab.cols.iter_mut() {
        c.remove(row);
    }
    tab.m -= 1;
}

/// `max Σ bⱼyⱼ` subject to `Σ yⱼaⱼ ≤ 1` (componentwise), `y ≥ 0`.
///
/// The slack basis is feasible from the start, so no phase 1 is needed and
/// appended columns never break feasibility of the current basis.
#[derive(Debug, Clone)]
pub struct PackingLp {
    n: usize,
    columns: Vec<Vec<f64>>,
    profits: Vec<f64>,
    basis: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PackingSolution {
    /// One weight per appended column.
    pub y: Vec<f64>,
    /// Row slacks `1 − Σ yⱼaⱼ`.
    pub slack: Vec<f64>,
    /// Row multipliers; these are the optimal variables of the dual
    /// `min Σ λₖ, aⱼ·λ ≥ bⱼ, λ ≥ 0`.
    pub lambda: Vec<f64>,
    pub value: f64,
}

impl PackingLp {
    pub fn new(n: usize) -> Self {
        PackingLp {
            n,
            columns: Vec::new(),
            profits: Vec::new(),
            // Slack columns are indexed after all structural ones; stored as
            // usize::MAX - row until resolved in `solve`.
            basis: (0..n).map(|k| usize::MAX - k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn add_column(&mut self, a: Vec<f64>, profit: f64) {
        assert_eq!(a.len(), self.n);
        self.columns.push(a);
        self.profits.push(profit);
    }

    pub fn solve(&mut self) -> Result<PackingSolution, LpError> {
        let n = self.n;
        let ncut = self.columns.len();
        let mut cols = self.columns.clone();
        for k in 0..n {
            cols.push(unit(n, k, 1.0));
        }
        let mut cost: Vec<f64> = self.profits.iter().map(|p| -p).collect();
        cost.extend(std::iter::repeat_n(0.0, n));

        let start: Vec<usize> = self
            .basis
            .iter()
            .map(|&b| if b >= usize::MAX - n { ncut + (usize::MAX - b) } else { b })
            .collect();
        let mut tab = Tableau {
            m: n,
            cols,
            rhs: vec![1.0; n],
            t: Vec::new(),
            basis: Vec::new(),
            pivots: 0,
        };
        if tab.load(&start).is_err() || (0..n).any(|i| tab.rhs_at(i) < -1e-9) {
            let slack_basis: Vec<usize> = (ncut..ncut + n).collect();
            tab.load(&slack_basis)?;
        }
        let allowed = vec![true; ncut + n];
        tab.optimize(&cost, &allowed)?;
        let (xb, pi) = tab.refined(&cost)?;

        self.basis = tab
            .basis
            .iter()
            .map(|&c| if c >= ncut { usize::MAX - (c - ncut) } else { c })
            .collect();

        let mut y = vec![0.0; ncut];
        let mut slack = vec![0.0; n];
        for (k, &col) in tab.basis.iter().enumerate() {
            let v = xb[k].max(0.0);
            if col < ncut {
                y[col] = v;
            } else {
                slack[col - ncut] = v;
            }
        }
        let lambda: Vec<f64> = pi.iter().map(|p| (-p).max(0.0)).collect();
        let value = y.iter().zip(&self.profits).map(|(a, b)| a * b).sum();
        Ok(PackingSolution {
            y,
            slack,
            lambda,
            value,
        })
    }
}
