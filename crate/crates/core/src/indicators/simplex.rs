//! Two-phase revised simplex for `min c^T x, A x = b, x >= 0` with Bland's
//! rule. `A` is held column-sparse, the basis inverse dense.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column-sparse constraint matrix with `rows` rows.
#[derive(Clone, Debug, Default)]
pub struct SparseColumns {
    pub rows: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
}

impl SparseColumns {
    pub fn new(rows: usize) -> Self {
        Self { rows, cols: Vec::new() }
    }

    /// Appends a column and returns its index.
    pub fn push(&mut self, entries: Vec<(usize, f64)>) -> usize {
        debug_assert!(entries.iter().all(|e| e.0 < self.rows));
        self.cols.push(entries);
        self.cols.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    /// `A x - b` in the max norm.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut r: Vec<f64> = b.iter().map(|v| -v).collect();
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, a) in col {
                r[i] += a * x[j];
            }
        }
        r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 64;
const MAX_ITERATIONS: usize = 1_000_000;

struct Tableau<'a> {
    a: &'a SparseColumns,
    b: Vec<f64>,
    /// Row signs applied so that `b >= 0`.
    sign: Vec<f64>,
    /// Basic variable per row; indices `>= n` are artificials.
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    n: usize,
    iterations: usize,
}

impl<'a> Tableau<'a> {
    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.a.cols[j].iter().map(|&(i, v)| (i, self.sign[i] * v)).collect()
        } else {
            vec![(j - self.n, 1.0)]
        }
    }

    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let m = self.b.len();
        let mut u = vec![0.0; m];
        for &(k, v) in col {
            for i in 0..m {
                u[i] += self.binv[(i, k)] * v;
            }
        }
        u
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.b.len();
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (r, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                bmat[(i, r)] = v;
            }
        }
        self.binv = bmat
            .try_inverse()
            .ok_or_else(|| Error::Lp("basis became singular".into()))?;
        let b = nalgebra::DVector::from_vec(self.b.clone());
        let xb = &self.binv * b;
        self.xb = xb.iter().map(|v| v.max(0.0)).collect();
        Ok(())
    }

    fn pivot(&mut self, row: usize, entering: usize, u: &[f64]) {
        let m = self.b.len();
        let p = u[row];
        let theta = self.xb[row] / p;
        for i in 0..m {
            if i != row {
                self.xb[i] -= theta * u[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-13 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[row] = theta;
        for k in 0..m {
            let prow = self.binv[(row, k)] / p;
            self.binv[(row, k)] = prow;
            if prow != 0.0 {
                for i in 0..m {
                    if i != row && u[i] != 0.0 {
                        self.binv[(i, k)] -= u[i] * prow;
                    }
                }
            }
        }
        self.basis[row] = entering;
        self.iterations += 1;
    }

    /// Runs simplex iterations with `cost` (length `n + m`) over the columns
    /// permitted by `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<()> {
        let m = self.b.len();
        let total = self.n + m;
        let mut in_basis = vec![false; total];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        let mut since_refactor = 0;
        loop {
            if self.iterations > MAX_ITERATIONS {
                return Err(Error::Lp("iteration limit reached".into()));
            }
            // y = c_B^T B^-1
            let mut y = vec![0.0; m];
            for (r, &j) in self.basis.iter().enumerate() {
                let c = cost[j];
                if c != 0.0 {
                    for k in 0..m {
                        y[k] += c * self.binv[(r, k)];
                    }
                }
            }
            // Bland: smallest index with negative reduced cost
            let entering = (0..total).find(|&j| {
                if in_basis[j] || !allowed(j) {
                    return false;
                }
                let col = self.column(j);
                let d = cost[j] - col.iter().map(|&(i, v)| y[i] * v).sum::<f64>();
                d < -COST_TOL
            });
            let Some(entering) = entering else {
                return Ok(());
            };
            let u = self.ftran(&self.column(entering));
            // ratio test, ties broken by smallest basic index
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                if u[i] > PIVOT_TOL {
                    let t = self.xb[i] / u[i];
                    best = match best {
                        None => Some((i, t)),
                        Some((bi, bt)) => {
                            if t < bt - 1e-14 || (t <= bt + 1e-14 && self.basis[i] < self.basis[bi]) {
                                Some((i, t))
                            } else {
                                Some((bi, bt))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(Error::Lp("objective is unbounded below".into()));
            };
            in_basis[self.basis[row]] = false;
            in_basis[entering] = true;
            self.pivot(row, entering, &u);
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }
}

/// Solves `min c^T x` subject to `A x = b`, `x >= 0`. Redundant equality rows
/// are tolerated. Fails when the problem is infeasible or unbounded.
pub fn solve(a: &SparseColumns, b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = a.rows;
    let n = a.ncols();
    if b.len() != m || c.len() != n {
        return Err(Error::Lp("dimension mismatch".into()));
    }
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let bb: Vec<f64> = b.iter().zip(&sign).map(|(v, s)| v * s).collect();
    let mut t = Tableau {
        a,
        b: bb.clone(),
        sign,
        basis: (n..n + m).collect(),
        binv: DMatrix::identity(m, m),
        xb: bb,
        n,
        iterations: 0,
    };

    // phase 1: minimize the sum of artificials
    let mut cost1 = vec![0.0; n + m];
    cost1[n..].fill(1.0);
    t.optimize(&cost1, |_| true)?;
    t.refactor()?;
    let scale = t.b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let infeasibility: f64 = t.basis.iter().zip(&t.xb).filter(|(&j, _)| j >= n).map(|(_, v)| v).sum();
    if infeasibility > 1e-9 * scale {
        return Err(Error::Lp(format!("infeasible (phase one residual {infeasibility:e})")));
    }

    // drive zero-level artificials out of the basis where possible; rows where
    // no structural column can replace them are redundant and keep their
    // artificial at zero
    for row in 0..m {
        if t.basis[row] < n {
            continue;
        }
        let in_basis: Vec<bool> = {
            let mut v = vec![false; n];
            for &j in &t.basis {
                if j < n {
                    v[j] = true;
                }
            }
            v
        };
        let binv_row: Vec<f64> = (0..m).map(|k| t.binv[(row, k)]).collect();
        let candidate = (0..n).filter(|&j| !in_basis[j]).find(|&j| {
            let col = t.column(j);
            col.iter().map(|&(i, v)| binv_row[i] * v).sum::<f64>().abs() > 1e-9
        });
        if let Some(j) = candidate {
            let u = t.ftran(&t.column(j));
            t.xb[row] = 0.0;
            t.pivot(row, j, &u);
        }
    }
    t.refactor()?;

    // phase 2
    let mut cost2 = c.to_vec();
    cost2.extend(std::iter::repeat(0.0).take(m));
    t.optimize(&cost2, |j| j < n)?;
    t.refactor()?;

    let mut x = vec![0.0; n];
    for (r, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.xb[r];
        }
    }
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: t.iterations,
    })
}
