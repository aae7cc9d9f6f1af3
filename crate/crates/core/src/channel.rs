//! Array geometry, DFT beamspace and angular-scattering channel synthesis.
//!
//! A channel is the superposition of plane waves arriving from a continuum
//! of angles in `Θ = [-θmax, θmax)`, weighted by a white complex Gaussian
//! process whose power density is the user's angular scattering function.
//! The continuum is discretized on a uniform grid of `grid_size` cells; each
//! cell contributes an independent gain whose variance is the scattering
//! power falling inside the cell.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::rng::complex_gaussian;

/// Which carrier a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    Uplink,
    Downlink,
}

/// Scalar system parameters shared by every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Number of BS antennas `M`.
    pub antennas: usize,
    /// Number of users `K`.
    pub users: usize,
    /// Downlink pilot dimension `T`.
    pub pilot_dim: usize,
    /// Resource block size `N_c` (signal dimensions per coherence block).
    pub block_len: usize,
    /// Uplink pilot count `L`.
    pub ul_pilots: usize,
    /// Downlink transmit power `P` (linear, unit noise).
    pub dl_power: f64,
    /// Uplink noise variance `σ²` (linear).
    pub ul_noise_var: f64,
    pub f_ul: f64,
    pub f_dl: f64,
    /// Propagation speed in m/s.
    pub propagation_speed: f64,
    /// Antenna spacing `d` in metres.
    pub spacing: f64,
    /// Half angular range in radians.
    pub theta_max: f64,
    /// Number of angle-grid cells used for synthesis and quadrature.
    pub grid_size: usize,
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

impl Default for SystemConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl SystemConfig {
    /// Reference geometry: `M = 128`, `K = 20`, `L = 10`, `N_c = 128`,
    /// `2θmax = 2π/3`, `f_dl = 1.1 f_ul`, `d = λ_ul / (2 sin θmax)`,
    /// `P = M × 10 dB`, uplink SNR 15 dB.
    pub fn full_scale() -> Self {
        let f_ul = 1.9e9;
        let theta_max = PI / 3.0;
        let lambda_ul = SPEED_OF_LIGHT / f_ul;
        let antennas = 128;
        SystemConfig {
            antennas,
            users: 20,
            pilot_dim: 39,
            block_len: 128,
            ul_pilots: 10,
            dl_power: antennas as f64 * db_to_linear(10.0),
            ul_noise_var: db_to_linear(-15.0),
            f_ul,
            f_dl: 1.1 * f_ul,
            propagation_speed: SPEED_OF_LIGHT,
            spacing: lambda_ul / (2.0 * theta_max.sin()),
            theta_max,
            grid_size: 8 * antennas,
        }
    }

    /// Same geometry with `m` antennas; the grid follows at `8·m` and the
    /// transmit power keeps its per-antenna SNR.
    pub fn with_antennas(mut self, m: usize) -> Self {
        let snr = self.dl_power / self.antennas as f64;
        self.antennas = m;
        self.grid_size = 8 * m;
        self.dl_power = snr * m as f64;
        self
    }

    /// Sets `P = M · SNR`.
    pub fn with_dl_snr_db(mut self, snr_db: f64) -> Self {
        self.dl_power = self.antennas as f64 * db_to_linear(snr_db);
        self
    }

    pub fn with_ul_snr_db(mut self, snr_db: f64) -> Self {
        self.ul_noise_var = db_to_linear(-snr_db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.antennas < 2 {
            return bad(format!("antennas = {} (need ≥ 2)", self.antennas));
        }
        if self.pilot_dim < 1 || self.pilot_dim > self.block_len {
            return bad(format!(
                "pilot_dim = {} must lie in 1..={}",
                self.pilot_dim, self.block_len
            ));
        }
        if self.ul_pilots < 1 {
            return bad("ul_pilots must be ≥ 1".into());
        }
        if self.grid_size < 4 * self.antennas {
            return bad(format!(
                "grid_size = {} below 4·M = {}",
                self.grid_size,
                4 * self.antennas
            ));
        }
        if !(self.theta_max > 0.0 && self.theta_max <= PI / 2.0) {
            return bad(format!("theta_max = {} not in (0, π/2]", self.theta_max));
        }
        for (name, v) in [
            ("dl_power", self.dl_power),
            ("ul_noise_var", self.ul_noise_var),
            ("f_ul", self.f_ul),
            ("f_dl", self.f_dl),
            ("propagation_speed", self.propagation_speed),
            ("spacing", self.spacing),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        Ok(())
    }

    pub fn carrier(&self, band: Band) -> f64 {
        match band {
            Band::Uplink => self.f_ul,
            Band::Downlink => self.f_dl,
        }
    }

    /// `d·f/c`: the coefficient of `sin θ` in the normalized spatial frequency.
    pub fn spatial_scale(&self, band: Band) -> f64 {
        self.spacing * self.carrier(band) / self.propagation_speed
    }

    /// `ψ_{band,i}(θ) = (d/c)·f·sin θ − i/M + 1/2`.
    pub fn psi(&self, band: Band, index: usize, theta: f64) -> f64 {
        self.spatial_scale(band) * theta.sin() - index as f64 / self.antennas as f64 + 0.5
    }

    fn check_angle(&self, theta: f64) -> Result<()> {
        // closed at +θmax so the range endpoint itself can be evaluated
        let slack = 1e-12 * self.theta_max;
        if !theta.is_finite() || theta < -self.theta_max - slack || theta > self.theta_max + slack {
            return Err(Error::AngleOutOfRange {
                theta,
                theta_max: self.theta_max,
            });
        }
        Ok(())
    }

    /// Uniform grid cells `(lo, hi)` covering `Θ`.
    pub fn grid_cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let step = 2.0 * self.theta_max / self.grid_size as f64;
        (0..self.grid_size).map(move |g| {
            let lo = -self.theta_max + g as f64 * step;
            (lo, lo + step)
        })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Closed angular interval `[lo, hi]` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngleInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        AngleInterval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersects(&self, other: &AngleInterval) -> bool {
        self.lo.max(other.lo) <= self.hi.min(other.hi)
    }
}

/// A finite union of disjoint closed intervals, kept sorted and merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AngularSet {
    intervals: Vec<AngleInterval>,
}

impl AngularSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Union of arbitrary (possibly overlapping) intervals.
    pub fn from_intervals(iter: impl IntoIterator<Item = AngleInterval>) -> Self {
        let mut v: Vec<AngleInterval> = iter.into_iter().filter(|i| i.lo <= i.hi).collect();
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<AngleInterval> = Vec::with_capacity(v.len());
        for iv in v {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        AngularSet { intervals: merged }
    }

    pub fn intervals(&self) -> &[AngleInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(AngleInterval::width).sum()
    }

    pub fn intersects_interval(&self, iv: &AngleInterval) -> bool {
        self.intervals.iter().any(|a| a.intersects(iv))
    }

    pub fn intersects(&self, other: &AngularSet) -> bool {
        other.intervals.iter().any(|iv| self.intersects_interval(iv))
    }

    /// Whether every interval of `other` lies inside some interval of `self`.
    pub fn covers(&self, other: &AngularSet) -> bool {
        other
            .intervals
            .iter()
            .all(|o| self.intervals.iter().any(|s| s.lo <= o.lo && o.hi <= s.hi))
    }

    pub fn union(&self, other: &AngularSet) -> AngularSet {
        AngularSet::from_intervals(self.intervals.iter().chain(&other.intervals).copied())
    }
}

/// One piece of a piecewise-constant angular scattering function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPiece {
    pub lo: f64,
    pub hi: f64,
    /// Power per radian.
    pub density: f64,
}

/// Piecewise-constant angular scattering function `γ(θ)`.
///
/// After construction the pieces are disjoint, sorted and carry strictly
/// positive density; overlapping inputs are summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringProfile {
    pieces: Vec<ScatterPiece>,
}

impl ScatteringProfile {
    /// Validated profile on `[-theta_max, theta_max)`.
    pub fn new(theta_max: f64, pieces: impl IntoIterator<Item = ScatterPiece>) -> Result<Self> {
        let pieces: Vec<ScatterPiece> = pieces.into_iter().collect();
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.density.is_finite()) {
                return Err(Error::InvalidProfile(format!("non-finite piece {p:?}")));
            }
            if p.lo >= p.hi {
                return Err(Error::InvalidProfile(format!("empty piece [{}, {})", p.lo, p.hi)));
            }
            if p.density < 0.0 {
                return Err(Error::InvalidProfile(format!("negative density {}", p.density)));
            }
            let slack = 1e-12 * theta_max;
            if p.lo < -theta_max - slack || p.hi > theta_max + slack {
                return Err(Error::InvalidProfile(format!(
                    "piece [{}, {}) outside [-{theta_max}, {theta_max})",
                    p.lo, p.hi
                )));
            }
        }
        let profile = Self::unchecked(pieces);
        if profile.total_power() <= 0.0 {
            return Err(Error::InvalidProfile("total power is zero".into()));
        }
        Ok(profile)
    }

    /// Normalizes the pieces without any validation. Operations that consume
    /// a profile still reject one with zero total power.
    pub fn unchecked(pieces: impl IntoIterator<Item = ScatterPiece>) -> Self {
        let pieces: Vec<ScatterPiece> = pieces.into_iter().filter(|p| p.lo < p.hi).collect();
        let mut cuts: Vec<f64> = pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out: Vec<ScatterPiece> = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let density: f64 = pieces
                .iter()
                .filter(|p| p.lo <= mid && mid < p.hi)
                .map(|p| p.density)
                .sum();
            if density <= 0.0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.hi == lo && last.density == density => last.hi = hi,
                _ => out.push(ScatterPiece { lo, hi, density }),
            }
        }
        ScatteringProfile { pieces: out }
    }

    /// Sum of uniform clusters, each carrying an equal share of `total_power`.
    pub fn equal_power_clusters(theta_max: f64, clusters: &[AngleInterval], total_power: f64) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidProfile("no clusters".into()));
        }
        let share = total_power / clusters.len() as f64;
        Self::new(
            theta_max,
            clusters.iter().map(|c| ScatterPiece {
                lo: c.lo,
                hi: c.hi,
                density: share / c.width(),
            }),
        )
    }

    pub fn pieces(&self) -> &[ScatterPiece] {
        &self.pieces
    }

    pub fn total_power(&self) -> f64 {
        self.pieces.iter().map(|p| p.density * (p.hi - p.lo)).sum()
    }

    /// `∫_lo^hi γ(θ) dθ`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.density * (p.hi.min(hi) - p.lo.max(lo)).max(0.0))
            .sum()
    }

    /// `𝓧_γ`, the closure of `{θ : γ(θ) > 0}`.
    pub fn support(&self) -> AngularSet {
        AngularSet::from_intervals(self.pieces.iter().map(|p| AngleInterval::new(p.lo, p.hi)))
    }

    fn check_usable(&self, cfg: &SystemConfig) -> Result<()> {
        if !(self.total_power() > 0.0) {
            return Err(Error::InvalidProfile("total power is zero".into()));
        }
        let slack = 1e-12 * cfg.theta_max;
        if let Some(p) = self
            .pieces
            .iter()
            .find(|p| p.lo < -cfg.theta_max - slack || p.hi > cfg.theta_max + slack)
        {
            return Err(Error::InvalidProfile(format!(
                "piece [{}, {}) outside the angular range",
                p.lo, p.hi
            )));
        }
        Ok(())
    }
}

/// Band-specific antenna-domain and beamspace channel vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Antenna-domain vector `ȟ`.
    pub h_spatial: CVector,
    /// Beamspace coefficients `h = Fᴴ ȟ`.
    pub h_fourier: CVector,
    pub band: Band,
}

/// Sorted set of active beamspace indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    indices: Vec<usize>,
    band: Band,
}

impl SupportSet {
    pub fn new(mut indices: Vec<usize>, band: Band, antennas: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate support index".into()));
        }
        if let Some(&i) = indices.last() {
            if i >= antennas {
                return Err(Error::InvalidArgument(format!(
                    "support index {i} out of range for M = {antennas}"
                )));
            }
        }
        Ok(SupportSet { indices, band })
    }

    pub fn empty(band: Band) -> Self {
        SupportSet {
            indices: Vec::new(),
            band,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_superset_of(&self, other: &SupportSet) -> bool {
        other.indices.iter().all(|&i| self.contains(i))
    }
}

/// `[a(θ)]_ℓ = exp(j·2π·(f/c)·ℓ·d·sin θ)`, `ℓ = 0…M−1`.
pub fn array_response(cfg: &SystemConfig, theta: f64, band: Band) -> Result<CVector> {
    cfg.check_angle(theta)?;
    Ok(steering(cfg.antennas, cfg.spatial_scale(band) * theta.sin()))
}

fn steering(m: usize, spatial_freq: f64) -> CVector {
    CVector::from_fn(m, |l, _| C64::from_polar(1.0, 2.0 * PI * spatial_freq * l as f64))
}

/// Unitary DFT with `[F]_{k,ℓ} = M^{-1/2} exp(j·(2π/M)·k·(ℓ − M/2))`.
///
/// Column `ℓ` is the beam that the `ℓ`-th beamspace coefficient measures.
pub fn dft_matrix(m: usize) -> CMatrix {
    let scale = 1.0 / (m as f64).sqrt();
    let mf = m as f64;
    CMatrix::from_fn(m, m, |k, l| {
        C64::from_polar(scale, 2.0 * PI / mf * k as f64 * (l as f64 - mf / 2.0))
    })
}

/// `D_M(ψ) = sin(πψM) / sin(πψ)`, continuous at integer `ψ` (value `±M`).
pub fn dirichlet_kernel(psi: f64, m: usize) -> f64 {
    let mf = m as f64;
    let den = (PI * psi).sin();
    if den.abs() < 1e-9 {
        // l'Hôpital
        mf * (PI * psi * mf).cos() / (PI * psi).cos()
    } else {
        (PI * psi * mf).sin() / den
    }
}

/// Grid-cell centres and their scattering power `∫_cell γ`.
fn cell_weights(cfg: &SystemConfig, profile: &ScatteringProfile) -> Vec<(f64, f64)> {
    cfg.grid_cells()
        .filter_map(|(lo, hi)| {
            let w = profile.mass_between(lo, hi);
            (w > 0.0).then_some((0.5 * (lo + hi), w))
        })
        .collect()
}

/// Precomputed synthesis operator for one `(config, profile, band)`.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    band: Band,
    /// Steering vectors of the cells with non-zero power, scaled by the
    /// square root of the cell power.
    weighted_steering: CMatrix,
    dft_adjoint: CMatrix,
}

impl ChannelSampler {
    pub fn new(cfg: &SystemConfig, profile: &ScatteringProfile, band: Band) -> Result<Self> {
        cfg.validate()?;
        profile.check_usable(cfg)?;
        let cells = cell_weights(cfg, profile);
        let scale = cfg.spatial_scale(band);
        let m = cfg.antennas;
        let mut weighted_steering = CMatrix::zeros(m, cells.len());
        for (c, &(theta, w)) in cells.iter().enumerate() {
            let col = steering(m, scale * theta.sin()) * C64::new(w.sqrt(), 0.0);
            weighted_steering.set_column(c, &col);
        }
        Ok(ChannelSampler {
            band,
            weighted_steering,
            dft_adjoint: dft_matrix(m).adjoint(),
        })
    }

    pub fn band(&self) -> Band {
        self.band
    }

    /// Antenna-domain channel `ȟ` only.
    pub fn draw_spatial<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let gains = CVector::from_fn(self.weighted_steering.ncols(), |_, _| complex_gaussian(rng));
        &self.weighted_steering * gains
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let h_spatial = self.draw_spatial(rng);
        let h_fourier = &self.dft_adjoint * &h_spatial;
        ChannelRealization {
            h_spatial,
            h_fourier,
            band: self.band,
        }
    }
}

/// One channel draw. Prefer [`ChannelSampler`] for repeated draws.
pub fn sample_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    profile: &ScatteringProfile,
    band: Band,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(cfg, profile, band)?.draw(rng))
}

/// Per-index beamspace variance
/// `[v]_i = (1/M)·∫ γ(θ)·|D_M(ψ_{band,i}(θ))|² dθ` by quadrature on the grid.
pub fn variance_vector(cfg: &SystemConfig, profile: &ScatteringProfile, band: Band) -> Result<Vec<f64>> {
    cfg.validate()?;
    profile.check_usable(cfg)?;
    let cells = cell_weights(cfg, profile);
    let m = cfg.antennas;
    Ok((0..m)
        .map(|i| {
            cells
                .iter()
                .map(|&(theta, w)| w * dirichlet_kernel(cfg.psi(band, i, theta), m).powi(2))
                .sum::<f64>()
                / m as f64
        })
        .collect())
}

/// `𝓘_{band,i} ∩ Θ`: angles whose spatial frequency lies within `1/M` of
/// beam `i`.
///
/// Distances are taken modulo 1 because `|D_M|²` is 1-periodic; on the
/// downlink carrier the spatial-frequency range exceeds one period and the
/// outermost beams alias to the opposite edge.
pub fn beam_interval(cfg: &SystemConfig, band: Band, index: usize) -> AngularSet {
    let m = cfg.antennas as f64;
    let a = cfg.spatial_scale(band);
    let smax = cfg.theta_max.sin();
    let reach = a * smax;
    let centre = index as f64 / m - 0.5;
    let half = 1.0 / m;
    let n_lo = (-reach - centre - half).ceil() as i64;
    let n_hi = (reach - centre + half).floor() as i64;
    AngularSet::from_intervals((n_lo..=n_hi).filter_map(|n| {
        let lo = ((centre - half + n as f64) / a).max(-smax);
        let hi = ((centre + half + n as f64) / a).min(smax);
        (lo <= hi).then(|| AngleInterval::new(lo.asin(), hi.asin()))
    }))
}

/// `{ i : 𝓘_{band,i} ∩ set ≠ ∅ }`.
pub fn support_of_angles(cfg: &SystemConfig, band: Band, set: &AngularSet) -> SupportSet {
    let indices = if set.is_empty() {
        Vec::new()
    } else {
        (0..cfg.antennas)
            .filter(|&i| set.intersects(&beam_interval(cfg, band, i)))
            .collect()
    };
    SupportSet { indices, band }
}

/// Beam indices whose `1/M` neighbourhood meets the scattering support.
pub fn theoretical_support(cfg: &SystemConfig, profile: &ScatteringProfile, band: Band) -> Result<SupportSet> {
    cfg.validate()?;
    profile.check_usable(cfg)?;
    Ok(support_of_angles(cfg, band, &profile.support()))
}

/// Linearized support size of a cluster of angular `width`: the fraction of
/// `2θmax` it spans, times `M`, rounded.
pub fn nominal_cluster_size(cfg: &SystemConfig, width: f64) -> usize {
    (cfg.antennas as f64 * width / (2.0 * cfg.theta_max)).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn cfg(m: usize) -> SystemConfig {
        SystemConfig::full_scale().with_antennas(m)
    }

    #[test]
    fn broadside_response_is_all_ones() {
        let a = array_response(&cfg(16), 0.0, Band::Uplink).unwrap();
        for z in a.iter() {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn response_entries_have_unit_modulus() {
        let c = cfg(32);
        for &theta in &[-1.0, -0.3, 0.2, 0.9] {
            for band in [Band::Uplink, Band::Downlink] {
                let a = array_response(&c, theta, band).unwrap();
                assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn response_at_range_edge_alternates_sign() {
        // d = λ_ul / (2 sin θmax) puts the UL phase step at π for θ = θmax
        let c = cfg(16);
        let a = array_response(&c, c.theta_max, Band::Uplink).unwrap();
        for (l, z) in a.iter().enumerate() {
            let want = C64::from_polar(1.0, PI * l as f64);
            assert!((z - want).norm() < 1e-9, "entry {l}: {z} vs {want}");
        }
    }

    #[test]
    fn response_rejects_out_of_range_angle() {
        let c = cfg(8);
        assert!(matches!(
            array_response(&c, 1.2, Band::Uplink),
            Err(Error::AngleOutOfRange { .. })
        ));
        assert!(array_response(&c, f64::NAN, Band::Uplink).is_err());
    }

    #[test]
    fn dft_of_size_one() {
        let f = dft_matrix(1);
        assert_relative_eq!(f[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(f[(0, 0)].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dft_is_unitary() {
        let f = dft_matrix(8);
        assert!((f.adjoint() * &f - CMatrix::identity(8, 8)).norm() < 1e-10);
        let f = dft_matrix(128);
        for c in f.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_limits_and_zeros() {
        assert_relative_eq!(dirichlet_kernel(0.0, 128), 128.0, epsilon = 1e-9);
        assert!(dirichlet_kernel(1.0 / 128.0, 128).abs() < 1e-9);
        // odd M keeps the sign at ψ = 1, even M flips it
        assert_relative_eq!(dirichlet_kernel(1.0, 7), 7.0, epsilon = 1e-6);
        assert_relative_eq!(dirichlet_kernel(1.0, 8), -8.0, epsilon = 1e-6);
        // continuity across the removable singularity
        let near = dirichlet_kernel(1e-7, 16);
        assert!((near - 16.0).abs() < 1e-6);
    }

    #[test]
    fn profile_merges_overlaps() {
        let p = ScatteringProfile::new(
            1.0,
            [
                ScatterPiece {
                    lo: -0.5,
                    hi: 0.0,
                    density: 1.0,
                },
                ScatterPiece {
                    lo: -0.2,
                    hi: 0.3,
                    density: 2.0,
                },
                ScatterPiece {
                    lo: 0.6,
                    hi: 0.7,
                    density: 0.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(p.pieces().len(), 3);
        assert_relative_eq!(p.total_power(), 0.3 + 0.6 + 0.6, epsilon = 1e-12);
        assert_eq!(p.support().intervals(), &[AngleInterval::new(-0.5, 0.3)]);
    }

    #[test]
    fn profile_validation() {
        let zero = [ScatterPiece {
            lo: 0.0,
            hi: 0.1,
            density: 0.0,
        }];
        assert!(ScatteringProfile::new(1.0, zero).is_err());
        let outside = [ScatterPiece {
            lo: 0.9,
            hi: 1.1,
            density: 1.0,
        }];
        assert!(ScatteringProfile::new(1.0, outside).is_err());
        let negative = [ScatterPiece {
            lo: 0.0,
            hi: 0.1,
            density: -1.0,
        }];
        assert!(ScatteringProfile::new(1.0, negative).is_err());
    }

    #[test]
    fn sampling_rejects_zero_power_profile() {
        let c = cfg(8);
        let p = ScatteringProfile::unchecked([ScatterPiece {
            lo: 0.0,
            hi: 0.1,
            density: 0.0,
        }]);
        let mut rng = stream(0, "t", 0, 0);
        assert!(sample_channel(&c, &p, Band::Uplink, &mut rng).is_err());

        let tiny = ScatteringProfile::new(
            c.theta_max,
            [ScatterPiece {
                lo: 0.0,
                hi: 1e-3,
                density: 1.0,
            }],
        )
        .unwrap();
        let h = sample_channel(&c, &tiny, Band::Downlink, &mut rng).unwrap();
        assert!(h
            .h_spatial
            .iter()
            .chain(h.h_fourier.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn sampled_channel_norm_is_preserved() {
        let c = cfg(32);
        let p = ScatteringProfile::new(
            c.theta_max,
            [ScatterPiece {
                lo: -0.4,
                hi: 0.1,
                density: 2.0,
            }],
        )
        .unwrap();
        let s = ChannelSampler::new(&c, &p, Band::Uplink).unwrap();
        let mut rng = stream(3, "t", 0, 0);
        for _ in 0..20 {
            let h = s.draw(&mut rng);
            let (a, b) = (h.h_spatial.norm(), h.h_fourier.norm());
            assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
        }
    }

    #[test]
    fn variance_concentrates_on_aligned_beam() {
        // narrow interval where ψ_i(θ) = 0 for i = M/2 + 4
        let c = cfg(32);
        let i = 20usize;
        let target = (i as f64 / 32.0 - 0.5) / c.spatial_scale(Band::Uplink);
        let theta = target.asin();
        let w = 1e-4;
        let p = ScatteringProfile::new(
            c.theta_max,
            [ScatterPiece {
                lo: theta - w,
                hi: theta + w,
                density: 1.0,
            }],
        )
        .unwrap();
        let v = variance_vector(&c, &p, Band::Uplink).unwrap();
        let argmax = (0..32).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert_eq!(argmax, i);
        let total: f64 = v.iter().sum();
        assert!(v[i] / total > 0.9);
    }

    #[test]
    fn variance_trace_equals_m_times_power() {
        // Σ_i (1/M)|D_M(ψ_i)|² = ‖Fᴴa‖² = M for every angle
        let c = cfg(64);
        let p = ScatteringProfile::new(
            c.theta_max,
            [ScatterPiece {
                lo: -c.theta_max,
                hi: c.theta_max,
                density: 0.7,
            }],
        )
        .unwrap();
        for band in [Band::Uplink, Band::Downlink] {
            let v = variance_vector(&c, &p, band).unwrap();
            let trace: f64 = v.iter().sum();
            let want = c.antennas as f64 * p.total_power();
            assert!((trace - want).abs() < 0.01 * want, "{trace} vs {want}");
        }
    }

    #[test]
    fn full_coverage_support_is_every_reachable_beam() {
        let c = cfg(32);
        let p = ScatteringProfile::new(
            c.theta_max,
            [ScatterPiece {
                lo: -c.theta_max,
                hi: c.theta_max,
                density: 1.0,
            }],
        )
        .unwrap();
        for band in [Band::Uplink, Band::Downlink] {
            let s = theoretical_support(&c, &p, band).unwrap();
            let reachable: Vec<usize> = (0..32).filter(|&i| !beam_interval(&c, band, i).is_empty()).collect();
            assert_eq!(s.indices(), reachable.as_slice());
        }
    }

    #[test]
    fn reciprocity_degenerates_without_frequency_gap() {
        let mut c = cfg(64);
        c.f_dl = c.f_ul;
        let p = ScatteringProfile::new(
            c.theta_max,
            [
                ScatterPiece {
                    lo: -0.9,
                    hi: -0.7,
                    density: 1.0,
                },
                ScatterPiece {
                    lo: 0.2,
                    hi: 0.35,
                    density: 3.0,
                },
            ],
        )
        .unwrap();
        let ul = theoretical_support(&c, &p, Band::Uplink).unwrap();
        let dl = theoretical_support(&c, &p, Band::Downlink).unwrap();
        assert_eq!(ul.indices(), dl.indices());
    }

    #[test]
    fn one_cluster_support_is_contiguous_and_near_nominal_size() {
        let c = SystemConfig::full_scale();
        let width = 2.0 * c.theta_max / 10.0;
        assert_eq!(nominal_cluster_size(&c, width), 13);
        let mut sizes = Vec::new();
        for step in 0..=20 {
            let lo = -c.theta_max + step as f64 * (2.0 * c.theta_max - width) / 20.0;
            let p = ScatteringProfile::new(
                c.theta_max,
                [ScatterPiece {
                    lo,
                    hi: lo + width,
                    density: 1.0,
                }],
            )
            .unwrap();
            let s = theoretical_support(&c, &p, Band::Uplink).unwrap();
            // contiguous modulo M
            let idx = s.indices();
            let gaps = idx
                .iter()
                .zip(idx.iter().cycle().skip(1))
                .filter(|(&a, &b)| (b + 128 - a) % 128 != 1)
                .count();
            assert!(gaps <= 1, "non-contiguous support {idx:?}");
            sizes.push(s.len());
        }
        // the sin θ compression makes edge clusters narrower than central ones
        assert!(sizes.first().unwrap().abs_diff(13) <= 2, "{sizes:?}");
        assert!(sizes.last().unwrap().abs_diff(13) <= 2, "{sizes:?}");
        assert!(sizes.iter().all(|&s| (11..=19).contains(&s)), "{sizes:?}");
    }

    #[test]
    fn adjacent_beam_intervals_overlap() {
        let c = SystemConfig::full_scale();
        for i in 1..127 {
            let a = beam_interval(&c, Band::Uplink, i);
            let b = beam_interval(&c, Band::Uplink, i + 1);
            assert!(a.intersects(&b), "beams {i} and {}", i + 1);
        }
    }
}
