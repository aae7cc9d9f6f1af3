//! Dense two-phase tableau simplex for `max cᵀx  s.t.  Ax ≤ b, x ≥ 0`.
//!
//! Sized for the relaxations solved inside branch-and-bound (a few hundred
//! rows at most). Dantzig pricing, switching to Bland's rule after a run of
//! degenerate pivots.

const TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f.abs() > 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = self.obj[c];
        if f.abs() > 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Optimizes the current objective row over columns with `allowed[j]`.
    /// Returns false when unbounded.
    fn optimize(&mut self, allowed: &[bool]) -> bool {
        let rhs = self.cols;
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let entering = if bland {
                (0..self.cols).find(|&j| allowed[j] && self.obj[j] < -TOL)
            } else {
                (0..self.cols)
                    .filter(|&j| allowed[j] && self.obj[j] < -TOL)
                    .min_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]))
            };
            let Some(c) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.t.iter().enumerate() {
                if row[c] > TOL {
                    let ratio = row[rhs] / row[c];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - TOL || (ratio <= lratio + TOL && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return false;
            };
            if ratio.abs() <= TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }
}

pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    debug_assert_eq!(b.len(), m);
    let n_art = b.iter().filter(|&&v| v < 0.0).count();
    let cols = n + m + n_art;
    let rhs = cols;

    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut art_rows = Vec::with_capacity(n_art);
    let mut next_art = n + m;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = sign;
        t[i][rhs] = sign * b[i];
        if b[i] < 0.0 {
            t[i][next_art] = 1.0;
            basis[i] = next_art;
            art_rows.push(i);
            next_art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau {
        t,
        obj: vec![0.0; cols + 1],
        basis,
        cols,
    };

    if n_art > 0 {
        // phase 1: maximize −Σ artificials
        for &i in &art_rows {
            for j in 0..=cols {
                if j < n + m || j == rhs {
                    tab.obj[j] -= tab.t[i][j];
                }
            }
        }
        let all = vec![true; cols];
        tab.optimize(&all);
        if tab.obj[rhs] < -1e-7 {
            return LpOutcome::Infeasible;
        }
        // drive zero-level artificials out of the basis
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n + m {
                match (0..n + m).find(|&j| tab.t[r][j].abs() > 1e-7) {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        // redundant row
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // phase 2
    tab.obj = vec![0.0; cols + 1];
    for j in 0..n {
        tab.obj[j] = -c[j];
    }
    for r in 0..tab.t.len() {
        let bc = tab.basis[r];
        let f = tab.obj[bc];
        if f != 0.0 {
            let row = tab.t[r].clone();
            for (v, rv) in tab.obj.iter_mut().zip(&row) {
                *v -= f * rv;
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < n + m).collect();
    if !tab.optimize(&allowed) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (r, &bc) in tab.basis.iter().enumerate() {
        if bc < n {
            x[bc] = tab.t[r][rhs];
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, value }
}
