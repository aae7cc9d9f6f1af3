use fdd_core::channel::{
    theoretical_support, variance_vector, AngleInterval, Band, ChannelSampler, ScatteringProfile, SystemConfig,
};
use fdd_core::harness::ScaleProfile;
use fdd_core::linalg::CMatrix;
use fdd_core::rng::stream;
use rand::Rng;

fn padded_mass(cfg: &SystemConfig, profile: &ScatteringProfile, band: Band) -> f64 {
    let v = variance_vector(cfg, profile, band).unwrap();
    let s = theoretical_support(cfg, profile, band).unwrap();
    let m = cfg.antennas;
    let mut keep = vec![false; m];
    for &i in s.indices() {
        for d in [m - 1, 0, 1] {
            keep[(i + d) % m] = true;
        }
    }
    let total: f64 = v.iter().sum();
    v.iter().zip(&keep).filter(|(_, &k)| k).map(|(x, _)| x).sum::<f64>() / total
}

fn single_cluster(cfg: &SystemConfig, seed: u64) -> ScatteringProfile {
    let mut rng = stream(seed, "model-cluster", 0, 0);
    let width = 2.0 * cfg.theta_max / 10.0;
    let lo = -cfg.theta_max + rng.random::<f64>() * (2.0 * cfg.theta_max - width);
    ScatteringProfile::equal_power_clusters(cfg.theta_max, &[AngleInterval::new(lo, lo + width)], 1.0).unwrap()
}

#[test]
fn padded_support_holds_most_of_the_variance() {
    let cfg = SystemConfig::full_scale();
    for seed in 0..20 {
        let p = single_cluster(&cfg, seed);
        for band in [Band::Uplink, Band::Downlink] {
            let f = padded_mass(&cfg, &p, band);
            assert!(f >= 0.96, "seed {seed} {band:?}: {f}");
        }
    }
}

/// The Dirichlet side lobes of a sharp-edged cluster leave 2 to 3% of the
/// variance beyond one guard index on each side, so the 99% bound does not hold.
#[test]
#[ignore = "±1 padding captures 97-98% of the variance, not 99%"]
fn padded_support_holds_99_percent() {
    let cfg = SystemConfig::full_scale();
    for seed in 0..20 {
        let p = single_cluster(&cfg, seed);
        for band in [Band::Uplink, Band::Downlink] {
            let f = padded_mass(&cfg, &p, band);
            assert!(f >= 0.99, "seed {seed} {band:?}: {f}");
        }
    }
}

#[test]
fn beamspace_covariance_is_diagonal_dominant() {
    let cfg = ScaleProfile::Desk.system();
    let p = single_cluster(&cfg, 3);
    let sampler = ChannelSampler::new(&cfg, &p, Band::Downlink).unwrap();
    let m = cfg.antennas;
    let draws = 10_000;
    let mut cov = CMatrix::zeros(m, m);
    for n in 0..draws {
        let h = sampler.draw(&mut stream(3, "model-cov", 0, n)).h_fourier;
        cov += &h * h.adjoint();
    }
    cov /= fdd_core::C64::new(draws as f64, 0.0);
    // energy of the off-diagonal part; entrywise absolute sums are several
    // times the trace for any continuous cluster
    let total = cov.norm_squared();
    let diag: f64 = (0..m).map(|i| cov[(i, i)].norm_sqr()).sum();
    let off = (total - diag) / total;
    assert!(off < 0.1, "off-diagonal energy fraction {off}");
}
