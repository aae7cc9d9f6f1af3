//! Downlink probing and effective-channel estimation.
//!
//! The BS sends `T` random pilot vectors through the pre-beamformer `B`.
//! User `k` observes `y = Ψ·B·ȟ + n` and feeds the `T` symbols back as-is.
//! Knowing `Ω_k`, the BS recovers the effective channel `B·ȟ` with least
//! squares on the `Ω_k` columns of `Ψ`.

mod jomp;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, select_columns, CMatrix, CVector, C64};
use crate::rng::{complex_gaussian, complex_gaussian_matrix};

pub use jomp::{jomp_estimate, JompEstimate, JompOptions};

/// `T × n` pilot matrix with every row scaled to squared norm `P`.
#[derive(Debug, Clone)]
pub struct ProbingMatrix {
    psi: CMatrix,
    power: f64,
}

impl ProbingMatrix {
    /// Wraps a given pilot matrix. Every row must have squared norm `power`
    /// to within `1e-9` relative.
    pub fn from_psi(psi: CMatrix, power: f64) -> Result<Self> {
        if psi.nrows() == 0 || psi.ncols() == 0 {
            return Err(Error::InvalidArgument("empty probing matrix".into()));
        }
        for (j, row) in psi.row_iter().enumerate() {
            let e: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            if !((e - power).abs() <= 1e-9 * power) {
                return Err(Error::InvalidArgument(format!(
                    "row {j} has power {e}, expected {power}"
                )));
            }
        }
        Ok(ProbingMatrix { psi, power })
    }

    pub fn psi(&self) -> &CMatrix {
        &self.psi
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn pilots(&self) -> usize {
        self.psi.nrows()
    }

    pub fn width(&self) -> usize {
        self.psi.ncols()
    }
}

pub fn generate_probing<R: Rng + ?Sized>(
    pilots: usize,
    width: usize,
    power: f64,
    rng: &mut R,
) -> Result<ProbingMatrix> {
    if pilots == 0 || width == 0 {
        return Err(Error::InvalidArgument(
            "probing matrix needs T ≥ 1 and at least one beam".into(),
        ));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "probing power {power} must be positive"
        )));
    }
    let mut psi = complex_gaussian_matrix(rng, pilots, width);
    for mut row in psi.row_iter_mut() {
        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // a Gaussian row is zero with probability 0
        let scale = power.sqrt() / norm;
        for z in row.iter_mut() {
            *z *= scale;
        }
    }
    Ok(ProbingMatrix { psi, power })
}

/// `B·ȟ`.
pub fn effective_channel(pre_beamformer: &CMatrix, h_spatial: &CVector) -> Result<CVector> {
    if pre_beamformer.ncols() != h_spatial.len() {
        return Err(Error::Dimension(format!(
            "pre-beamformer has {} columns, channel has {} entries",
            pre_beamformer.ncols(),
            h_spatial.len()
        )));
    }
    Ok(pre_beamformer * h_spatial)
}

/// `y = Ψ·B·ȟ + n` with `n ~ CN(0, noise_var·I)`. `noise_var = 0` gives the
/// noiseless observation.
pub fn receive_pilots<R: Rng + ?Sized>(
    probing: &ProbingMatrix,
    pre_beamformer: &CMatrix,
    h_spatial: &CVector,
    noise_var: f64,
    rng: &mut R,
) -> Result<CVector> {
    if probing.width() != pre_beamformer.nrows() {
        return Err(Error::Dimension(format!(
            "probing width {} vs {} selected beams",
            probing.width(),
            pre_beamformer.nrows()
        )));
    }
    let h_eff = effective_channel(pre_beamformer, h_spatial)?;
    observe(probing, &h_eff, noise_var, rng)
}

/// `y = Ψ·h + n` for a channel already expressed in the probed coordinates.
pub fn observe<R: Rng + ?Sized>(probing: &ProbingMatrix, h: &CVector, noise_var: f64, rng: &mut R) -> Result<CVector> {
    if probing.width() != h.len() {
        return Err(Error::Dimension(format!(
            "probing width {} vs channel length {}",
            probing.width(),
            h.len()
        )));
    }
    if noise_var < 0.0 {
        return Err(Error::InvalidArgument("noise variance must be ≥ 0".into()));
    }
    let mut y = &probing.psi * h;
    if noise_var > 0.0 {
        let sd = noise_var.sqrt();
        for v in y.iter_mut() {
            *v += complex_gaussian(rng) * sd;
        }
    }
    Ok(y)
}

/// LS estimate of one user's effective channel.
#[derive(Debug, Clone)]
pub struct EffectiveChannelEstimate {
    pub user: usize,
    /// Length `|𝓑|`; zero outside `omega`.
    pub h_eff: CVector,
    /// 0-based positions inside `𝓑`.
    pub omega: Vec<usize>,
    /// `Ψ_Ω` had numerically dependent columns; the minimum-norm solution
    /// was returned.
    pub rank_deficient: bool,
}

impl EffectiveChannelEstimate {
    /// Back to the antenna domain: `Bᴴ·ĥ_eff`.
    pub fn spatial(&self, pre_beamformer: &CMatrix) -> CVector {
        pre_beamformer.adjoint() * &self.h_eff
    }
}

/// Precomputed `pinv(Ψ_Ω)` for repeated estimates with one probing matrix.
#[derive(Debug, Clone)]
pub struct SupportLs {
    pinv: CMatrix,
    omega: Vec<usize>,
    pilots: usize,
    width: usize,
    rank_deficient: bool,
}

impl SupportLs {
    pub fn new(probing: &ProbingMatrix, omega: &[usize]) -> Result<Self> {
        let (t, width) = probing.psi.shape();
        if omega.len() > t {
            return Err(Error::SupportExceedsPilots {
                omega: omega.len(),
                pilots: t,
            });
        }
        if let Some(&p) = omega.iter().find(|&&p| p >= width) {
            return Err(Error::Dimension(format!("position {p} outside {width} beams")));
        }
        let pinv = pseudo_inverse(&select_columns(&probing.psi, omega));
        Ok(SupportLs {
            rank_deficient: pinv.rank < omega.len(),
            pinv: pinv.matrix,
            omega: omega.to_vec(),
            pilots: t,
            width,
        })
    }

    pub fn estimate(&self, user: usize, y: &CVector) -> Result<EffectiveChannelEstimate> {
        if y.len() != self.pilots {
            return Err(Error::Dimension(format!(
                "{} observations for T = {}",
                y.len(),
                self.pilots
            )));
        }
        let mut h_eff = CVector::from_element(self.width, C64::new(0.0, 0.0));
        if !self.omega.is_empty() {
            let coeffs = &self.pinv * y;
            for (&p, c) in self.omega.iter().zip(coeffs.iter()) {
                h_eff[p] = *c;
            }
        }
        Ok(EffectiveChannelEstimate {
            user,
            h_eff,
            omega: self.omega.clone(),
            rank_deficient: self.rank_deficient,
        })
    }
}

/// `ĥ_eff` on `Ω = pinv(Ψ_Ω)·y`, zero elsewhere.
pub fn estimate_effective(
    user: usize,
    y: &CVector,
    probing: &ProbingMatrix,
    omega: &[usize],
) -> Result<EffectiveChannelEstimate> {
    SupportLs::new(probing, omega)?.estimate(user, y)
}
