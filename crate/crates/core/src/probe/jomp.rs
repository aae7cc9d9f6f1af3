//! J-OMP compressed-sensing baseline.
//!
//! Each user measures `y = Φ·ȟ + n` with a Gaussian `Φ`. Since `ȟ = F·h` with
//! `h` sparse in beamspace, orthogonal matching pursuit runs on the
//! dictionary `A = Φ·F`, one user at a time, for the given sparsity order.
//! An optional joint stage first picks atoms with the largest correlation
//! summed over all users and seeds every user's support with them.

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JompOptions {
    /// Atoms shared by all users, chosen before the per-user iterations.
    /// 0 disables the joint stage.
    pub joint_atoms: usize,
    /// Stop once `‖r‖ ≤ residual_tol·‖y‖`.
    pub residual_tol: f64,
}

impl Default for JompOptions {
    fn default() -> Self {
        JompOptions {
            joint_atoms: 0,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JompEstimate {
    /// Beamspace coefficients, length `M`.
    pub beamspace: CVector,
    /// `F·x̂`.
    pub spatial: CVector,
    /// Selected atoms in selection order.
    pub atoms: Vec<usize>,
    /// The requested sparsity exceeded `T` and was capped.
    pub capped: bool,
}

/// Least-squares fit on a growing atom set via modified Gram-Schmidt.
struct Fit {
    y: CVector,
    atoms: Vec<usize>,
    /// Orthonormal basis of the selected atoms.
    q: Vec<CVector>,
    /// Upper-triangular `R`, column by column.
    r: Vec<Vec<C64>>,
    residual: CVector,
}

impl Fit {
    fn new(y: CVector) -> Self {
        Fit {
            residual: y.clone(),
            y,
            atoms: Vec::new(),
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    /// Adds atom `j`; false when it is numerically in the current span.
    fn push(&mut self, j: usize, dict: &CMatrix) -> bool {
        let a = dict.column(j).into_owned();
        let mut v = a.clone();
        let mut col = Vec::with_capacity(self.q.len() + 1);
        for q in &self.q {
            let c = q.dotc(&v);
            v -= q * c;
            col.push(c);
        }
        // one reorthogonalization pass
        for (q, c) in self.q.iter().zip(col.iter_mut()) {
            let d = q.dotc(&v);
            v -= q * d;
            *c += d;
        }
        let n = v.norm();
        if n <= 1e-12 * a.norm() || n == 0.0 {
            return false;
        }
        let q = v / C64::new(n, 0.0);
        col.push(C64::new(n, 0.0));
        let proj = q.dotc(&self.residual);
        self.residual -= &q * proj;
        self.q.push(q);
        self.r.push(col);
        self.atoms.push(j);
        true
    }

    /// Solves `R·c = Qᴴ·y` by back substitution.
    fn coefficients(&self) -> Vec<C64> {
        let k = self.q.len();
        let b: Vec<C64> = self.q.iter().map(|q| q.dotc(&self.y)).collect();
        let mut c = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = b[i];
            for j in i + 1..k {
                acc -= self.r[j][i] * c[j];
            }
            c[i] = acc / self.r[i][i];
        }
        c
    }
}

pub fn jomp_estimate(
    y_all: &[CVector],
    phi: &CMatrix,
    f: &CMatrix,
    sparsity: &[usize],
    opts: &JompOptions,
) -> Result<Vec<JompEstimate>> {
    let (t, m) = phi.shape();
    if f.shape() != (m, m) {
        return Err(Error::Dimension(format!("dictionary must be {m}×{m}")));
    }
    if y_all.len() != sparsity.len() {
        return Err(Error::Dimension(format!(
            "{} measurement vectors, {} sparsity orders",
            y_all.len(),
            sparsity.len()
        )));
    }
    if let Some(y) = y_all.iter().find(|y| y.len() != t) {
        return Err(Error::Dimension(format!(
            "measurement of length {} for T = {t}",
            y.len()
        )));
    }
    let dict = phi * f;
    let col_norms: Vec<f64> = dict.column_iter().map(|c| c.norm()).collect();

    let correlations = |r: &CVector| -> Vec<f64> {
        let c = dict.adjoint() * r;
        c.iter()
            .zip(&col_norms)
            .map(|(v, &n)| if n > 0.0 { v.norm() / n } else { 0.0 })
            .collect()
    };

    let mut shared = Vec::new();
    if opts.joint_atoms > 0 {
        let mut score = vec![0.0; m];
        for y in y_all {
            for (s, c) in score.iter_mut().zip(correlations(y)) {
                *s += c * c;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        shared = order.into_iter().take(opts.joint_atoms.min(t)).collect();
    }

    y_all
        .iter()
        .zip(sparsity)
        .enumerate()
        .map(|(k, (y, &s))| {
            let capped = s > t;
            if capped {
                debug!("j-omp: user {k} sparsity {s} exceeds T = {t}, capping");
            }
            let budget = s.min(t);
            let y_norm = y.norm();
            let mut fit = Fit::new(y.clone());
            if budget > 0 {
                for &a in shared.iter().take(budget) {
                    fit.push(a, &dict);
                }
            }
            while fit.atoms.len() < budget && fit.residual.norm() > opts.residual_tol * y_norm && y_norm > 0.0 {
                let corr = correlations(&fit.residual);
                let next = (0..m)
                    .filter(|j| !fit.atoms.contains(j))
                    .max_by(|&a, &b| corr[a].total_cmp(&corr[b]).then(b.cmp(&a)));
                let Some(j) = next else { break };
                if !fit.push(j, &dict) {
                    break;
                }
            }
            let coeffs = fit.coefficients();
            let atoms = fit.atoms;
            let mut beamspace = CVector::from_element(m, C64::new(0.0, 0.0));
            for (&a, c) in atoms.iter().zip(coeffs.iter()) {
                beamspace[a] = *c;
            }
            let spatial = f * &beamspace;
            Ok(JompEstimate {
                beamspace,
                spatial,
                atoms,
                capped,
            })
        })
        .collect()
}
