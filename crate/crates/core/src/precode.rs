//! Greedy zero-forcing and ergodic rate bounds.

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, CMatrix, CVector, CompensatedSum, C64};

pub const DEFAULT_SELECT_TOL: f64 = 1e-6;

/// Indices of a maximal linearly independent subset of `est`, considered in
/// order of decreasing norm. A vector is kept when its residual after
/// projection on the kept ones exceeds `tol·‖vector‖`. Returned sorted.
pub fn greedy_select(est: &[CVector], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..est.len()).collect();
    let norms: Vec<f64> = est.iter().map(|v| v.norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut basis: Vec<CVector> = Vec::new();
    let mut chosen = Vec::new();
    for k in order {
        if !(norms[k] > 0.0) {
            continue;
        }
        let mut r = est[k].clone();
        // two Gram-Schmidt passes keep the basis orthogonal in floating point
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&r);
                r -= q * c;
            }
        }
        let rn = r.norm();
        if rn > tol * norms[k] {
            basis.push(r / C64::new(rn, 0.0));
            chosen.push(k);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Unit-norm zero-forcing columns, one per served user.
#[derive(Debug, Clone)]
pub struct ZfPrecoder {
    /// `M × K′`.
    pub columns: CMatrix,
    /// User ids matching the columns.
    pub users: Vec<usize>,
}

impl ZfPrecoder {
    pub fn empty(antennas: usize) -> Self {
        ZfPrecoder {
            columns: CMatrix::zeros(antennas, 0),
            users: Vec::new(),
        }
    }

    pub fn served(&self) -> usize {
        self.users.len()
    }
}

/// `Q = pinv(Ĥᴴ)` with normalized columns. `est` must have full column rank.
pub fn build_zf(est: &CMatrix, users: Vec<usize>) -> Result<ZfPrecoder> {
    if est.ncols() != users.len() {
        return Err(Error::Dimension(format!(
            "{} columns for {} users",
            est.ncols(),
            users.len()
        )));
    }
    if est.ncols() == 0 {
        return Ok(ZfPrecoder::empty(est.nrows()));
    }
    let pinv = pseudo_inverse(&est.adjoint());
    if pinv.rank < est.ncols() {
        return Err(Error::InvalidArgument(format!(
            "estimate matrix has rank {} < {} users",
            pinv.rank,
            est.ncols()
        )));
    }
    let mut columns = pinv.matrix;
    for mut c in columns.column_iter_mut() {
        let n = c.norm();
        c /= C64::new(n, 0.0);
    }
    Ok(ZfPrecoder { columns, users })
}

/// Greedy selection followed by ZF. If the selected set is still numerically
/// rank deficient, the weakest selected user is dropped and selection reruns.
/// `est[i]` belongs to user `users[i]`.
pub fn greedy_zf(est: &[CVector], users: &[usize], antennas: usize, tol: f64) -> Result<ZfPrecoder> {
    if est.len() != users.len() {
        return Err(Error::Dimension("one estimate per user required".into()));
    }
    if let Some(v) = est.iter().find(|v| v.len() != antennas) {
        return Err(Error::Dimension(format!(
            "estimate of length {} for M = {antennas}",
            v.len()
        )));
    }
    let mut pool: Vec<usize> = (0..est.len()).collect();
    loop {
        let candidates: Vec<CVector> = pool.iter().map(|&i| est[i].clone()).collect();
        let picked: Vec<usize> = greedy_select(&candidates, tol).into_iter().map(|j| pool[j]).collect();
        if picked.is_empty() {
            return Ok(ZfPrecoder::empty(antennas));
        }
        let cols: Vec<CVector> = picked.iter().map(|&i| est[i].clone()).collect();
        let mat = CMatrix::from_columns(&cols);
        match build_zf(&mat, picked.iter().map(|&i| users[i]).collect()) {
            Ok(zf) => return Ok(zf),
            Err(_) => {
                let weakest = *picked
                    .iter()
                    .min_by(|&&a, &&b| est[a].norm().total_cmp(&est[b].norm()).then(b.cmp(&a)))
                    .expect("non-empty");
                pool.retain(|&i| i != weakest);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateBounds {
    /// Bits per channel use, indexed by user id.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sum_lower: f64,
    pub sum_upper: f64,
    /// `1 − T/N_c`.
    pub prelog: f64,
    pub trials: usize,
}

/// One Monte-Carlo trial: the true channels of all `K` users and the
/// precoder built from that trial's estimates.
#[derive(Debug, Clone, Copy)]
pub struct RateTrial<'a> {
    pub channels: &'a [CVector],
    pub precoder: &'a ZfPrecoder,
}

/// Sample-statistics rate bounds with `g_{k,j} = √(P/K′)·ȟ_kᴴ·t_j`.
///
/// A user not served in a trial gets zero rate there. Its gain statistics
/// are taken over the trials in which it is served, with `g_{k,j} = 0` when
/// `j` is not co-served, and its variance penalty is weighted by the fraction
/// of such trials. Variances are population variances.
pub fn evaluate_rates(cfg: &SystemConfig, trials: &[RateTrial<'_>]) -> Result<RateBounds> {
    let (t, nc) = (cfg.pilot_dim, cfg.block_len);
    if t > nc {
        return Err(Error::PilotsExceedBlock { pilots: t, block: nc });
    }
    if trials.is_empty() {
        return Err(Error::InvalidArgument("at least one trial required".into()));
    }
    let k = trials[0].channels.len();
    let n = trials.len() as f64;
    let prelog = 1.0 - t as f64 / nc as f64;

    // per-trial K×K gains
    let mut gains: Vec<CMatrix> = Vec::with_capacity(trials.len());
    for tr in trials {
        if tr.channels.len() != k {
            return Err(Error::Dimension("user count changes across trials".into()));
        }
        let mut g = CMatrix::zeros(k, k);
        let served = tr.precoder.served();
        if served > 0 {
            let scale = (cfg.dl_power / served as f64).sqrt();
            for (col, &j) in tr.precoder.users.iter().enumerate() {
                if j >= k {
                    return Err(Error::Dimension(format!("served user {j} but only {k} channels")));
                }
                let t_col = tr.precoder.columns.column(col);
                for (i, h) in tr.channels.iter().enumerate() {
                    if h.len() != t_col.len() {
                        return Err(Error::Dimension("channel and precoder length differ".into()));
                    }
                    g[(i, j)] = h.dotc(&t_col) * scale;
                }
            }
        }
        gains.push(g);
    }

    let mut upper = vec![0.0; k];
    let mut lower = vec![0.0; k];
    for user in 0..k {
        let served: Vec<&CMatrix> = trials
            .iter()
            .zip(&gains)
            .filter(|(tr, _)| tr.precoder.users.contains(&user))
            .map(|(_, g)| g)
            .collect();
        if served.is_empty() {
            continue;
        }
        let ns = served.len() as f64;
        let mut rate = CompensatedSum::default();
        for g in &served {
            let signal = g[(user, user)].norm_sqr();
            let interference: f64 = (0..k).filter(|&j| j != user).map(|j| g[(user, j)].norm_sqr()).sum();
            rate.add((1.0 + signal / (1.0 + interference)).log2());
        }
        let ub = prelog * rate.value() / n;
        let mut penalty = CompensatedSum::default();
        for j in 0..k {
            let mean_re = served
                .iter()
                .map(|g| g[(user, j)].re)
                .collect::<CompensatedSum>()
                .value()
                / ns;
            let mean_im = served
                .iter()
                .map(|g| g[(user, j)].im)
                .collect::<CompensatedSum>()
                .value()
                / ns;
            let mean = C64::new(mean_re, mean_im);
            let var = served
                .iter()
                .map(|g| (g[(user, j)] - mean).norm_sqr())
                .collect::<CompensatedSum>()
                .value()
                / ns;
            penalty.add((1.0 + nc as f64 * var).log2());
        }
        upper[user] = ub;
        lower[user] = (ub - ns / n * prelog * penalty.value() / nc as f64).max(0.0);
    }
    Ok(RateBounds {
        sum_lower: lower.iter().copied().collect::<CompensatedSum>().value(),
        sum_upper: upper.iter().copied().collect::<CompensatedSum>().value(),
        lower,
        upper,
        prelog,
        trials: trials.len(),
    })
}
