//! Dense two-phase primal simplex with Bland's rule, for the small LPs that
//! price dependency rows.
//!
//! Solves  min cᵀx  s.t.  Ax = b, x ≥ 0  and reports the row duals y = c_B B⁻¹.

const TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Lp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    PivotLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // m rows of n + m coefficients followed by the rhs
    basis: Vec<usize>,
    n: usize,
    m: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n + self.m]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let width = self.n + self.m;
        let mut d = cost.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..width {
                    d[j] -= cb * row[j];
                }
            }
        }
        d
    }

    /// Runs Bland pivots on `cost` over the columns allowed by `enter_ok`.
    fn optimize(&mut self, cost: &[f64], enter_ok: impl Fn(usize) -> bool) -> LpStatus {
        for _ in 0..MAX_PIVOTS {
            let d = self.reduced_costs(cost);
            let Some(col) = (0..self.n + self.m).find(|&j| enter_ok(j) && d[j] < -TOL) else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.rows[i][col];
                if a > TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - TOL
                                || (ratio <= best + TOL && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return LpStatus::Unbounded,
                Some((r, _)) => self.pivot(r, col),
            }
        }
        LpStatus::PivotLimit
    }
}

pub fn solve(lp: &Lp) -> LpSolution {
    let m = lp.a.len();
    let n = lp.c.len();
    let mut sign = vec![1.0; m];
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        if lp.b[i] < 0.0 {
            sign[i] = -1.0;
        }
        let mut row = vec![0.0; n + m + 1];
        for j in 0..n {
            row[j] = sign[i] * lp.a[i][j];
        }
        row[n + i] = 1.0;
        row[n + m] = sign[i] * lp.b[i];
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        n,
        m,
    };

    let mut phase1 = vec![0.0; n + m];
    for c in phase1.iter_mut().skip(n) {
        *c = 1.0;
    }
    let status = t.optimize(&phase1, |_| true);
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs(i)).sum();
    if status != LpStatus::Optimal || infeasibility > 1e-7 * (1.0 + lp.b.iter().map(|v| v.abs()).sum::<f64>()) {
        return LpSolution {
            status: if status == LpStatus::PivotLimit {
                status
            } else {
                LpStatus::Infeasible
            },
            x: vec![0.0; n],
            duals: vec![0.0; m],
            objective: f64::NAN,
        };
    }
    // Drive leftover artificials out of the basis where a structural column allows it.
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t.rows[i][j].abs() > TOL) {
                t.pivot(i, j);
            }
        }
    }

    let mut phase2 = lp.c.clone();
    phase2.extend(std::iter::repeat_n(0.0, m));
    let status = t.optimize(&phase2, |j| j < n);

    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i);
        }
    }
    let mut duals = vec![0.0; m];
    for (j, y) in duals.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..m {
            acc += phase2[t.basis[i]] * t.rows[i][n + j];
        }
        *y = acc * sign[j];
    }
    let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpSolution {
        status,
        x,
        duals,
        objective,
    }
}
