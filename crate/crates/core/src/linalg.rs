//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Moore-Penrose pseudo-inverse together with the numerical rank it used.
pub struct PseudoInverse {
    pub matrix: CMatrix,
    pub rank: usize,
}

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

pub fn pseudo_inverse(a: &CMatrix) -> PseudoInverse {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return PseudoInverse {
            matrix: CMatrix::zeros(cols, rows),
            rank: 0,
        };
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * RANK_RTOL * rows.max(cols) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    if rank == 0 {
        return PseudoInverse {
            matrix: CMatrix::zeros(cols, rows),
            rank: 0,
        };
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut out = CMatrix::zeros(cols, rows);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        // V Σ⁺ Uᴴ, one rank-one term per kept singular value
        let vi = v_t.row(i).adjoint();
        let ui = u.column(i).adjoint();
        out += (vi * ui) * C64::new(1.0 / s, 0.0);
    }
    PseudoInverse { matrix: out, rank }
}

/// Columns `idx` of `a`, in the given order.
pub fn select_columns(a: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])])
}

pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn row_norms(a: &CMatrix) -> Vec<f64> {
    a.row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_column_rank_is_left_inverse() {
        let a = CMatrix::from_fn(5, 3, |r, c| {
            C64::new((r * 3 + c) as f64 % 7.0 - 2.0, ((r + 2 * c) % 5) as f64)
        });
        let p = pseudo_inverse(&a);
        assert_eq!(p.rank, 3);
        let id = &p.matrix * &a;
        assert!((id - CMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn pinv_detects_rank_deficiency() {
        let col = CVector::from_fn(4, |i, _| C64::new(i as f64 + 1.0, 0.5));
        let a = CMatrix::from_columns(&[col.clone(), col * C64::new(0.0, 2.0)]);
        let p = pseudo_inverse(&a);
        assert_eq!(p.rank, 1);
        // Penrose condition A A⁺ A = A
        assert!((&a * &p.matrix * &a - &a).norm() < 1e-10);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
