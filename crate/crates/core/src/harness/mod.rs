//! Seeded experiment sweeps.
//!
//! A geometry seed fixes the cluster layout, every user's scattering profile,
//! the uplink estimation and the cached downlink channel draws. Every
//! `(T, SNR, method)` cell of that geometry reuses the same channels, probing
//! matrices and noise, so differences between cells come from the method and
//! not from fresh randomness.
//!
//! Stream tags (user and trial ids in parentheses):
//! - `geometry`: cluster positions
//! - `clusters` (k): which clusters user `k` couples to
//! - `ul` (k): uplink snapshots and noise
//! - `dl-channel` (k, n): downlink channel of user `k` in trial `n`
//! - `probe/T{t}`, `feedback/T{t}` (k, n): proposed pilots and user noise
//! - `jomp/T{t}`, `jomp-noise/T{t}` (k, n): baseline sensing and noise

mod config;
mod report;

use std::time::Instant;

use log::{debug, info, warn};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{
    dft_matrix, theoretical_support, AngleInterval, Band, ChannelSampler, ScatteringProfile, SupportSet, SystemConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, CompensatedSum};
use crate::precode::{evaluate_rates, greedy_zf, RateBounds, RateTrial, ZfPrecoder, DEFAULT_SELECT_TOL};
use crate::probe::{generate_probing, jomp_estimate, observe, JompOptions, SupportLs};
use crate::rng::stream;
use crate::sparsify::{
    build_graph_for, build_plan, solve_ilp_with, BeamUserGraph, IlpInstance, IlpOptions, SparsificationPlan,
};
use crate::support::{estimate_dl_support, simulate_uplink, SupportEstimate};

pub use config::{ExperimentConfig, ScaleProfile, ScenarioSpec};
pub use report::{
    format_g, read_report, report_to_string, write_report, CellFailure, ExperimentReport, Method, ReportRow, HEADER,
};

/// Seed of geometry `g`.
pub fn geometry_seed(master: u64, g: usize) -> u64 {
    master.wrapping_add(g as u64)
}

/// `count` clusters of width `width`, placed uniformly inside `[-θmax, θmax]`.
pub fn draw_clusters<R: Rng + ?Sized>(cfg: &SystemConfig, count: usize, width: f64, rng: &mut R) -> Vec<AngleInterval> {
    let span = 2.0 * cfg.theta_max - width;
    (0..count)
        .map(|_| {
            let lo = -cfg.theta_max + rng.random::<f64>() * span;
            AngleInterval::new(lo, lo + width)
        })
        .collect()
}

/// Cluster layout and unit-power user profiles of one geometry.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub seed: u64,
    pub clusters: Vec<AngleInterval>,
    /// Indices into `clusters` per user.
    pub assignment: Vec<Vec<usize>>,
    pub profiles: Vec<ScatteringProfile>,
}

pub fn draw_geometry(cfg: &SystemConfig, spec: &ScenarioSpec, seed: u64) -> Result<Geometry> {
    let clusters = draw_clusters(
        cfg,
        spec.cluster_count,
        spec.cluster_width,
        &mut stream(seed, "geometry", 0, 0),
    );
    let max = spec.max_clusters_per_user.min(spec.cluster_count);
    let mut assignment = Vec::with_capacity(cfg.users);
    let mut profiles = Vec::with_capacity(cfg.users);
    for k in 0..cfg.users {
        let mut rng = stream(seed, "clusters", k as u64, 0);
        let n = rng.random_range(1..=max);
        let mut chosen = sample(&mut rng, spec.cluster_count, n).into_vec();
        chosen.sort_unstable();
        let intervals: Vec<AngleInterval> = chosen.iter().map(|&c| clusters[c]).collect();
        profiles.push(ScatteringProfile::equal_power_clusters(cfg.theta_max, &intervals, 1.0)?);
        assignment.push(chosen);
    }
    Ok(Geometry {
        seed,
        clusters,
        assignment,
        profiles,
    })
}

/// Everything a geometry contributes to its cells.
struct Prepared {
    geometry: Geometry,
    estimates: Vec<SupportEstimate>,
    /// Theoretical DL support sizes, fed to J-OMP as sparsity orders.
    true_dl_sizes: Vec<usize>,
    /// `channels[n][k]`: spatial DL channel of user `k` in trial `n`.
    channels: Vec<Vec<CVector>>,
}

/// Uplink estimation for every user of a geometry, plus the theoretical DL
/// support sizes.
fn uplink_stage(
    cfg: &SystemConfig,
    spec: &ScenarioSpec,
    geometry: &Geometry,
    f: &CMatrix,
) -> Result<(Vec<SupportEstimate>, Vec<usize>)> {
    let seed = geometry.seed;
    let mut estimates = Vec::with_capacity(cfg.users);
    let mut true_dl_sizes = Vec::with_capacity(cfg.users);
    for (k, profile) in geometry.profiles.iter().enumerate() {
        let ul = ChannelSampler::new(cfg, profile, Band::Uplink)?;
        let block = simulate_uplink(cfg, &ul, &mut stream(seed, "ul", k as u64, 0))?;
        let est = estimate_dl_support(cfg, &block, f, &spec.mmv, spec.threshold)?;
        if !est.mmv_converged {
            debug!(
                "seed {seed}: user {k} MMV stopped after {} iterations",
                est.mmv_iterations
            );
        }
        estimates.push(est);
        true_dl_sizes.push(theoretical_support(cfg, profile, Band::Downlink)?.len());
    }
    Ok((estimates, true_dl_sizes))
}

fn prepare(cfg: &SystemConfig, spec: &ScenarioSpec, seed: u64, f: &CMatrix) -> Result<Prepared> {
    let geometry = draw_geometry(cfg, spec, seed)?;
    let (estimates, true_dl_sizes) = uplink_stage(cfg, spec, &geometry, f)?;
    let dl_samplers = geometry
        .profiles
        .iter()
        .map(|p| ChannelSampler::new(cfg, p, Band::Downlink))
        .collect::<Result<Vec<_>>>()?;
    let channels = (0..spec.rate_trials)
        .map(|n| {
            dl_samplers
                .iter()
                .enumerate()
                .map(|(k, s)| s.draw_spatial(&mut stream(seed, "dl-channel", k as u64, n as u64)))
                .collect()
        })
        .collect();
    Ok(Prepared {
        geometry,
        estimates,
        true_dl_sizes,
        channels,
    })
}

/// Beam/user graph over users with a non-empty estimated DL support.
fn graph_of(estimates: &[SupportEstimate]) -> Result<BeamUserGraph> {
    let labelled: Vec<(usize, &SupportSet)> = estimates
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.dl.is_empty())
        .map(|(k, e)| (k, &e.dl))
        .collect();
    if labelled.is_empty() {
        return Err(Error::NothingToProbe);
    }
    build_graph_for(&labelled)
}

/// The selection problems a sweep would solve, one per geometry and pilot
/// dimension, as `(geometry seed, instance)`.
pub fn ilp_instances(spec: &ScenarioSpec, cfg: &SystemConfig) -> Result<Vec<(u64, IlpInstance)>> {
    let cfg = cfg.clone().with_ul_snr_db(spec.ul_snr_db);
    spec.validate(&cfg)?;
    let f = dft_matrix(cfg.antennas);
    let mut out = Vec::new();
    for g in 0..spec.geometry_seeds {
        let seed = geometry_seed(spec.master_seed, g);
        let geometry = draw_geometry(&cfg, spec, seed)?;
        let (estimates, _) = uplink_stage(&cfg, spec, &geometry, &f)?;
        let graph = graph_of(&estimates)?;
        for &t in &spec.pilot_dims {
            out.push((
                seed,
                IlpInstance {
                    pilots: t,
                    antennas: cfg.antennas,
                    graph: graph.clone(),
                },
            ));
        }
    }
    Ok(out)
}

fn plan_for(
    cfg: &SystemConfig,
    spec: &ScenarioSpec,
    prep: &Prepared,
    t: usize,
    f: &CMatrix,
) -> Result<SparsificationPlan> {
    let graph = graph_of(&prep.estimates)?;
    let opts = IlpOptions {
        node_limit: spec.ilp_node_limit,
    };
    let sol = solve_ilp_with(&graph, t, cfg.antennas, &opts)?;
    if !sol.proven_optimal {
        warn!(
            "seed {}: T = {t} ILP hit the node limit, using incumbent with objective {}",
            prep.geometry.seed, sol.objective
        );
    }
    build_plan(&graph, &sol.z, &sol.u, f, t)
}

fn rates_of(cfg: &SystemConfig, prep: &Prepared, precoders: &[ZfPrecoder]) -> Result<(RateBounds, f64)> {
    let trials: Vec<RateTrial> = prep
        .channels
        .iter()
        .zip(precoders)
        .map(|(channels, precoder)| RateTrial { channels, precoder })
        .collect();
    let bounds = evaluate_rates(cfg, &trials)?;
    let served = precoders
        .iter()
        .map(|p| p.served() as f64)
        .collect::<CompensatedSum>()
        .value()
        / precoders.len() as f64;
    Ok((bounds, served))
}

fn proposed_cell(cfg: &SystemConfig, prep: &Prepared, plan: &SparsificationPlan) -> Result<(RateBounds, f64)> {
    let t = cfg.pilot_dim;
    let seed = prep.geometry.seed;
    let b = &plan.pre_beamformer;
    let probing = generate_probing(
        t,
        b.nrows(),
        cfg.dl_power,
        &mut stream(seed, &format!("probe/T{t}"), 0, 0),
    )?;
    let users = plan.served_users();
    let estimators: Vec<SupportLs> = users
        .iter()
        .map(|k| SupportLs::new(&probing, &plan.omega[k]))
        .collect::<Result<_>>()?;
    let tag = format!("feedback/T{t}");
    let precoders = prep
        .channels
        .iter()
        .enumerate()
        .map(|(n, channels)| {
            let mut est = Vec::with_capacity(users.len());
            for (&k, ls) in users.iter().zip(&estimators) {
                let h_eff = b * &channels[k];
                let y = observe(&probing, &h_eff, 1.0, &mut stream(seed, &tag, k as u64, n as u64))?;
                est.push(ls.estimate(k, &y)?.spatial(b));
            }
            greedy_zf(&est, &users, cfg.antennas, DEFAULT_SELECT_TOL)
        })
        .collect::<Result<Vec<_>>>()?;
    rates_of(cfg, prep, &precoders)
}

fn jomp_cell(cfg: &SystemConfig, spec: &ScenarioSpec, prep: &Prepared, f: &CMatrix) -> Result<(RateBounds, f64)> {
    let t = cfg.pilot_dim;
    let seed = prep.geometry.seed;
    let phi = generate_probing(
        t,
        cfg.antennas,
        cfg.dl_power,
        &mut stream(seed, &format!("jomp/T{t}"), 0, 0),
    )?;
    let users: Vec<usize> = (0..cfg.users).collect();
    let opts = JompOptions {
        joint_atoms: spec.joint_atoms,
        ..JompOptions::default()
    };
    let tag = format!("jomp-noise/T{t}");
    let precoders = prep
        .channels
        .iter()
        .enumerate()
        .map(|(n, channels)| {
            let ys = channels
                .iter()
                .enumerate()
                .map(|(k, h)| observe(&phi, h, 1.0, &mut stream(seed, &tag, k as u64, n as u64)))
                .collect::<Result<Vec<_>>>()?;
            let est = jomp_estimate(&ys, phi.psi(), f, &prep.true_dl_sizes, &opts)?;
            let spatial: Vec<CVector> = est.into_iter().map(|e| e.spatial).collect();
            greedy_zf(&spatial, &users, cfg.antennas, DEFAULT_SELECT_TOL)
        })
        .collect::<Result<Vec<_>>>()?;
    rates_of(cfg, prep, &precoders)
}

fn run_geometry(cfg: &SystemConfig, spec: &ScenarioSpec, g: usize, f: &CMatrix) -> ExperimentReport {
    let seed = geometry_seed(spec.master_seed, g);
    let mut report = ExperimentReport::default();
    let fail = |t: Option<usize>, snr: Option<f64>, method: Option<Method>, e: &Error| CellFailure {
        seed,
        pilot_dim: t,
        dl_snr_db: snr,
        method,
        message: e.to_string(),
    };
    let prep = match prepare(cfg, spec, seed, f) {
        Ok(p) => p,
        Err(e) => {
            report.failures.push(fail(None, None, None, &e));
            return report;
        }
    };
    for &t in &spec.pilot_dims {
        let start = Instant::now();
        let plan = plan_for(cfg, spec, &prep, t, f);
        let plan_time = start.elapsed().as_secs_f64();
        for &snr in &spec.dl_snr_db {
            let mut cell_cfg = cfg.clone().with_dl_snr_db(snr);
            cell_cfg.pilot_dim = t;
            for method in [Method::Proposed, Method::Jomp] {
                let start = Instant::now();
                let outcome = match method {
                    Method::Proposed => match &plan {
                        Ok(plan) => proposed_cell(&cell_cfg, &prep, plan),
                        Err(e) => Err(Error::Infeasible(format!("sparsification failed: {e}"))),
                    },
                    Method::Jomp => jomp_cell(&cell_cfg, spec, &prep, f),
                };
                let mut elapsed = start.elapsed().as_secs_f64();
                if method == Method::Proposed {
                    elapsed += plan_time;
                }
                match outcome {
                    Ok((bounds, served)) => report.rows.push(ReportRow {
                        method,
                        pilot_dim: t,
                        dl_snr_db: snr,
                        sum_lb: bounds.sum_lower,
                        sum_ub: bounds.sum_upper,
                        served_users: served,
                        selected_beams: match (&plan, method) {
                            (Ok(p), Method::Proposed) => p.selected_beams.len(),
                            _ => 0,
                        },
                        feedback_symbols: t,
                        wall_time_s: if spec.record_timing { elapsed } else { 0.0 },
                        seed,
                    }),
                    Err(e) => report.failures.push(fail(Some(t), Some(snr), Some(method), &e)),
                }
            }
        }
    }
    report
}

/// Full sweep over geometries, pilot dimensions, DL SNR values and both
/// methods. Stage failures are collected per cell; only an invalid
/// configuration aborts the run.
pub fn run_experiment(spec: &ScenarioSpec, cfg: &SystemConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone().with_ul_snr_db(spec.ul_snr_db);
    // pilot_dim is set per cell; validate the rest
    cfg.pilot_dim = 1;
    cfg.validate()?;
    spec.validate(&cfg)?;
    let f = dft_matrix(cfg.antennas);
    info!(
        "running {} geometries × {} pilot dims × {} SNR points, {} trials each",
        spec.geometry_seeds,
        spec.pilot_dims.len(),
        spec.dl_snr_db.len(),
        spec.rate_trials
    );
    let parts: Vec<ExperimentReport> = (0..spec.geometry_seeds)
        .into_par_iter()
        .map(|g| run_geometry(&cfg, spec, g, &f))
        .collect();
    let mut out = ExperimentReport::default();
    for p in parts {
        out.rows.extend(p.rows);
        out.failures.extend(p.failures);
    }
    Ok(out)
}

/// Mean of `|h_i|²` over `draws` channel samples, per beamspace index.
pub fn empirical_variance(
    cfg: &SystemConfig,
    profile: &ScatteringProfile,
    band: Band,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let sampler = ChannelSampler::new(cfg, profile, band)?;
    let mut acc = vec![CompensatedSum::default(); cfg.antennas];
    for n in 0..draws {
        let h = sampler.draw(&mut stream(seed, "variance", 0, n as u64));
        for (a, z) in acc.iter_mut().zip(h.h_fourier.iter()) {
            a.add(z.norm_sqr());
        }
    }
    Ok(acc.iter().map(|a| a.value() / draws as f64).collect())
}

/// One single-cluster user: true and estimated supports.
#[derive(Debug, Clone)]
pub struct SupportDemo {
    pub profile: ScatteringProfile,
    pub true_ul: SupportSet,
    pub true_dl: SupportSet,
    pub estimate: SupportEstimate,
}

impl SupportDemo {
    pub fn contains_truth(&self) -> bool {
        self.estimate.dl.is_superset_of(&self.true_dl)
    }

    pub fn excess(&self) -> usize {
        self.estimate.dl.len().saturating_sub(self.true_dl.len())
    }
}

/// UL→DL support estimation for one user coupled to a single random cluster
/// of the scenario's width.
pub fn support_demo(cfg: &SystemConfig, spec: &ScenarioSpec, seed: u64) -> Result<SupportDemo> {
    let cfg = cfg.clone().with_ul_snr_db(spec.ul_snr_db);
    let cluster = draw_clusters(&cfg, 1, spec.cluster_width, &mut stream(seed, "geometry", 0, 0));
    let profile = ScatteringProfile::equal_power_clusters(cfg.theta_max, &cluster, 1.0)?;
    let f = dft_matrix(cfg.antennas);
    let ul = ChannelSampler::new(&cfg, &profile, Band::Uplink)?;
    let block = simulate_uplink(&cfg, &ul, &mut stream(seed, "ul", 0, 0))?;
    let estimate = estimate_dl_support(&cfg, &block, &f, &spec.mmv, spec.threshold)?;
    Ok(SupportDemo {
        true_ul: theoretical_support(&cfg, &profile, Band::Uplink)?,
        true_dl: theoretical_support(&cfg, &profile, Band::Downlink)?,
        profile,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (ScenarioSpec, SystemConfig) {
        let mut cfg = ScaleProfile::Desk.system().with_antennas(16);
        cfg.users = 3;
        let spec = ScenarioSpec {
            pilot_dims: vec![2, 5, cfg.block_len],
            rate_trials: 8,
            geometry_seeds: 2,
            ..ScaleProfile::Desk.scenario()
        };
        (spec, cfg)
    }

    #[test]
    fn geometry_is_seeded() {
        let (spec, cfg) = tiny();
        let a = draw_geometry(&cfg, &spec, 5).unwrap();
        let b = draw_geometry(&cfg, &spec, 5).unwrap();
        assert_eq!(a.clusters, b.clusters);
        assert_eq!(a.assignment, b.assignment);
        for c in &a.clusters {
            assert!(c.lo >= -cfg.theta_max && c.hi <= cfg.theta_max);
        }
        for (p, chosen) in a.profiles.iter().zip(&a.assignment) {
            assert!(!chosen.is_empty() && chosen.len() <= 2);
            assert!((p.total_power() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_sweep_rows() {
        let (spec, cfg) = tiny();
        let r = run_experiment(&spec, &cfg).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.rows.len(), 2 * 3 * 2 * 2);
        for row in &r.rows {
            assert!(row.sum_lb <= row.sum_ub);
            assert_eq!(row.feedback_symbols, row.pilot_dim);
            assert_eq!(row.wall_time_s, 0.0);
            if row.pilot_dim == cfg.block_len {
                assert_eq!(row.sum_ub, 0.0);
                assert_eq!(row.sum_lb, 0.0);
            }
        }
    }

    #[test]
    fn oversized_pilot_dimension_is_a_cell_failure() {
        let (mut spec, cfg) = tiny();
        spec.pilot_dims = vec![cfg.block_len + 1];
        spec.geometry_seeds = 1;
        let r = run_experiment(&spec, &cfg).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.failures.len(), 4);
    }

    #[test]
    fn invalid_config_aborts() {
        let (mut spec, cfg) = tiny();
        spec.rate_trials = 0;
        assert!(run_experiment(&spec, &cfg).is_err());
    }
}
