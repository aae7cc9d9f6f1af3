//! Uplink support estimation and transfer to the downlink carrier.
//!
//! The `L` uplink snapshots share one beamspace support, so the support is
//! read off the non-zero rows of the row-sparse solution of
//!
//! ```text
//! minimize ‖X‖₂,₁  subject to  ‖Y − F X‖_F ≤ √(ML)·σ
//! ```
//!
//! Every surviving row `i` stands for the angular interval `𝓘_{ul,i}`; the
//! union of those intervals estimates the scattering support, which is then
//! intersected with the downlink beam intervals.

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{beam_interval, support_of_angles, AngularSet, Band, ChannelSampler, SupportSet, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, row_norms, CMatrix, C64};
use crate::rng::complex_gaussian_matrix;

/// Received uplink pilots `Y = [y_1 … y_L]` (pilot symbols normalized to 1).
#[derive(Debug, Clone)]
pub struct UplinkSnapshotBlock {
    pub y: CMatrix,
    /// Noise standard deviation `σ`.
    pub sigma: f64,
}

impl UplinkSnapshotBlock {
    pub fn new(y: CMatrix, sigma: f64) -> Result<Self> {
        if y.ncols() == 0 {
            return Err(Error::Dimension("need at least one snapshot".into()));
        }
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("non-finite observation".into()));
        }
        Ok(UplinkSnapshotBlock { y, sigma })
    }

    pub fn snapshots(&self) -> usize {
        self.y.ncols()
    }
}

/// Draws `L` independent channel snapshots through `sampler` plus AWGN of
/// variance `cfg.ul_noise_var`.
pub fn simulate_uplink<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    sampler: &ChannelSampler,
    rng: &mut R,
) -> Result<UplinkSnapshotBlock> {
    if sampler.band() != Band::Uplink {
        return Err(Error::InvalidArgument("uplink block needs an uplink sampler".into()));
    }
    let m = cfg.antennas;
    let l = cfg.ul_pilots;
    let sigma = cfg.ul_noise_var.sqrt();
    let mut y = CMatrix::zeros(m, l);
    for c in 0..l {
        y.set_column(c, &sampler.draw_spatial(rng));
    }
    y += complex_gaussian_matrix(rng, m, l) * C64::new(sigma, 0.0);
    UplinkSnapshotBlock::new(y, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmvOptions {
    pub max_iter: usize,
    /// Relative objective change declaring convergence.
    pub rel_tol: f64,
    /// Relative slack on the noise ball when tracking the best iterate. The
    /// returned iterate is pulled back inside the exact ball.
    pub feas_tol: f64,
}

impl Default for MmvOptions {
    fn default() -> Self {
        MmvOptions {
            max_iter: 5000,
            rel_tol: 1e-6,
            feas_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmvSolution {
    /// Beamspace coefficients `X` (M × L).
    pub x: CMatrix,
    /// `‖X_{i,·}‖₂` per row.
    pub row_norms: Vec<f64>,
    pub iterations: usize,
    /// `‖Y − F X‖_F`.
    pub residual: f64,
    pub converged: bool,
    /// Objective of the best feasible iterate after each iteration.
    pub objective_trace: Vec<f64>,
}

impl MmvSolution {
    pub fn objective(&self) -> f64 {
        self.row_norms.iter().sum()
    }
}

pub fn l21_norm(x: &CMatrix) -> f64 {
    row_norms(x).iter().sum()
}

/// Row-wise soft shrinkage, the proximal map of `tau·‖·‖₂,₁`.
pub fn block_shrink(x: &CMatrix, tau: f64) -> CMatrix {
    let mut out = x.clone();
    for (i, n) in row_norms(x).into_iter().enumerate() {
        let scale = if n > tau { 1.0 - tau / n } else { 0.0 };
        out.row_mut(i).scale_mut(scale);
    }
    out
}

/// Projection of `x` onto `{ v : ‖v − centre‖_F ≤ radius }`.
fn project_ball(x: &CMatrix, centre: &CMatrix, radius: f64) -> CMatrix {
    let d = x - centre;
    let n = frobenius_sq(&d).sqrt();
    if n <= radius {
        x.clone()
    } else {
        centre + d * C64::new(radius / n, 0.0)
    }
}

/// ℓ2,1 MMV recovery by ADMM on the splitting `X = V`, `V` in the noise ball.
///
/// With `F` unitary the constraint is `‖FᴴY − V‖_F ≤ ε`, so the `V` update is
/// a ball projection and the `X` update is a row shrinkage. The penalty is
/// rebalanced from the primal/dual residual ratio. The returned iterate is the
/// feasible one with the lowest objective; when no iterate was feasible the
/// last projected `V` is returned and `converged` is false.
pub fn solve_mmv(block: &UplinkSnapshotBlock, f: &CMatrix, opts: &MmvOptions) -> Result<MmvSolution> {
    let (m, l) = block.y.shape();
    if f.nrows() != m || f.ncols() != m {
        return Err(Error::Dimension(format!(
            "dictionary is {}×{}, observations have {m} rows",
            f.nrows(),
            f.ncols()
        )));
    }
    if !(block.sigma.is_finite() && block.sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma = {} must be positive",
            block.sigma
        )));
    }
    let gram_err = (f.adjoint() * f - CMatrix::identity(m, m)).norm();
    if gram_err > 1e-8 * m as f64 {
        return Err(Error::InvalidArgument("dictionary must be unitary".into()));
    }

    let z = f.adjoint() * &block.y;
    let eps = (m as f64 * l as f64).sqrt() * block.sigma;
    let finish = |x: CMatrix, iterations: usize, converged: bool, trace: Vec<f64>| {
        let residual = frobenius_sq(&(&block.y - f * &x)).sqrt();
        MmvSolution {
            row_norms: row_norms(&x),
            x,
            iterations,
            residual,
            converged,
            objective_trace: trace,
        }
    };

    if frobenius_sq(&z).sqrt() <= eps {
        return Ok(finish(CMatrix::zeros(m, l), 0, true, vec![0.0]));
    }

    let feasible_radius = eps * (1.0 + opts.feas_tol);
    // initial penalty from the scale of the noise ball, so the iterates are
    // equivariant under a joint scaling of Y and σ
    let mut rho = (m as f64).sqrt() / eps;
    let mut v = z.clone();
    let mut u = CMatrix::zeros(m, l);
    let mut best: Option<(f64, CMatrix)> = None;
    let mut trace = Vec::new();
    let mut prev_obj = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let x = block_shrink(&(&v - &u), 1.0 / rho);
        let v_old = std::mem::replace(&mut v, project_ball(&(&x + &u), &z, eps));
        u += &x - &v;

        let obj = l21_norm(&x);
        let r = frobenius_sq(&(&x - &v)).sqrt();
        let s = rho * frobenius_sq(&(&v - &v_old)).sqrt();
        let feasible = frobenius_sq(&(&x - &z)).sqrt() <= feasible_radius;
        if feasible && best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x.clone()));
        }
        if let Some((b, _)) = &best {
            trace.push(*b);
        }

        let scale = frobenius_sq(&x)
            .sqrt()
            .max(frobenius_sq(&v).sqrt())
            .max(f64::MIN_POSITIVE);
        let dual_scale = rho * frobenius_sq(&u).sqrt();
        let small_change = (prev_obj - obj).abs() <= opts.rel_tol * obj.max(f64::MIN_POSITIVE);
        if feasible && small_change && r <= 1e-4 * scale && s <= 1e-4 * dual_scale.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        prev_obj = obj;

        if it % 10 == 9 {
            if r > 10.0 * s {
                rho *= 2.0;
                u.scale_mut(0.5);
            } else if s > 10.0 * r {
                rho *= 0.5;
                u.scale_mut(2.0);
            }
        }
    }

    if !converged {
        debug!("mmv: no convergence after {iterations} iterations");
    }
    Ok(match best {
        Some((_, x)) => {
            // pull the slack-feasible iterate back inside the ball along the
            // segment towards FᴴY
            let dev = &x - &z;
            let d = frobenius_sq(&dev).sqrt();
            let x = if d > eps { &z + dev * C64::new(eps / d, 0.0) } else { x };
            finish(x, iterations, converged, trace)
        }
        None => finish(v, iterations, false, trace),
    })
}

/// `{ i : ‖X_{i,·}‖₂ ≥ ε }` on the uplink carrier.
pub fn threshold_support(sol: &MmvSolution, epsilon: f64) -> Result<SupportSet> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be ≥ 0")));
    }
    let idx = (0..sol.row_norms.len())
        .filter(|&i| sol.row_norms[i] >= epsilon)
        .collect();
    SupportSet::new(idx, Band::Uplink, sol.row_norms.len())
}

/// How the activity threshold `ε` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// `ε = fraction · max_i ‖X_{i,·}‖₂`; an all-zero solution yields the
    /// empty support.
    Relative(f64),
    Absolute(f64),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Relative(DEFAULT_RELATIVE_THRESHOLD)
    }
}

/// Default relative threshold. Dirichlet sidelobes of a cluster decay like
/// `1/√distance` in row norm, so a low threshold admits several leakage
/// beams per cluster edge.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 0.25;

impl ThresholdRule {
    pub fn apply(&self, sol: &MmvSolution) -> Result<SupportSet> {
        match *self {
            ThresholdRule::Absolute(e) => threshold_support(sol, e),
            ThresholdRule::Relative(frac) => {
                let max = sol.row_norms.iter().cloned().fold(0.0, f64::max);
                if max <= 0.0 {
                    return Ok(SupportSet::empty(Band::Uplink));
                }
                threshold_support(sol, frac * max)
            }
        }
    }
}

/// `𝓧̂_γ = ∪_{i ∈ 𝓢̂_ul} 𝓘_{ul,i}`, merged into disjoint intervals.
pub fn interpolate_scattering_support(cfg: &SystemConfig, s_ul: &SupportSet) -> Result<AngularSet> {
    if s_ul.band() != Band::Uplink {
        return Err(Error::InvalidArgument("expected an uplink support".into()));
    }
    if let Some(&i) = s_ul.indices().last() {
        if i >= cfg.antennas {
            return Err(Error::InvalidArgument(format!("support index {i} ≥ M")));
        }
    }
    Ok(AngularSet::from_intervals(s_ul.indices().iter().flat_map(|&i| {
        beam_interval(cfg, Band::Uplink, i).intervals().to_vec()
    })))
}

/// `𝓢̂_dl = { i : 𝓘_{dl,i} ∩ 𝓧̂_γ ≠ ∅ }`.
pub fn map_to_dl_support(cfg: &SystemConfig, x_hat: &AngularSet) -> Result<SupportSet> {
    let slack = 1e-12 * cfg.theta_max;
    if x_hat
        .intervals()
        .iter()
        .any(|iv| iv.lo < -cfg.theta_max - slack || iv.hi > cfg.theta_max + slack)
    {
        return Err(Error::AngleOutOfRange {
            theta: x_hat.intervals()[0].lo,
            theta_max: cfg.theta_max,
        });
    }
    Ok(support_of_angles(cfg, Band::Downlink, x_hat))
}

/// Everything the uplink stage produces for one user.
#[derive(Debug, Clone)]
pub struct SupportEstimate {
    pub ul: SupportSet,
    pub angles: AngularSet,
    pub dl: SupportSet,
    pub mmv_converged: bool,
    pub mmv_iterations: usize,
}

pub fn estimate_dl_support(
    cfg: &SystemConfig,
    block: &UplinkSnapshotBlock,
    f: &CMatrix,
    opts: &MmvOptions,
    rule: ThresholdRule,
) -> Result<SupportEstimate> {
    let sol = solve_mmv(block, f, opts)?;
    let ul = rule.apply(&sol)?;
    let angles = interpolate_scattering_support(cfg, &ul)?;
    let dl = map_to_dl_support(cfg, &angles)?;
    Ok(SupportEstimate {
        ul,
        angles,
        dl,
        mmv_converged: sol.converged,
        mmv_iterations: sol.iterations,
    })
}
