use fdd_core::channel::dft_matrix;
use fdd_core::harness::format_g;
use fdd_core::linalg::{select_columns, CMatrix, CVector};
use fdd_core::precode::{greedy_select, greedy_zf, DEFAULT_SELECT_TOL};
use fdd_core::probe::{generate_probing, observe, SupportLs};
use fdd_core::rng::{complex_gaussian_vector, stream};
use fdd_core::sparsify::{
    build_plan, exhaustive_objective, greedy_selection, is_feasible, parse_instance, solve_ilp, write_instance,
    BeamUserGraph, IlpInstance,
};
use fdd_core::C64;
use proptest::prelude::*;

const M: usize = 32;

prop_compose! {
    fn graphs()(beams in 1usize..=9, users in 1usize..=7)
        (adj in proptest::collection::vec(any::<bool>(), beams * users),
         ids in proptest::sample::subsequence((0..M).collect::<Vec<_>>(), beams),
         beams in Just(beams), users in Just(users)) -> BeamUserGraph {
        let mut edges: Vec<(usize, usize)> = (0..beams).map(|a| (a, a % users)).collect();
        edges.extend((0..beams * users).filter(|&i| adj[i]).map(|i| (i / users, i % users)));
        BeamUserGraph::new(ids, (0..users).collect(), edges).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ilp_matches_exhaustive(g in graphs(), t in 1usize..=5) {
        let sol = solve_ilp(&g, t, M).unwrap();
        prop_assert!(sol.proven_optimal);
        prop_assert!(is_feasible(&g, &sol.z, &sol.u, t, M));
        prop_assert_eq!(sol.objective, exhaustive_objective(&g, t, M).unwrap());
        let (z, u) = greedy_selection(&g, t);
        prop_assert!(is_feasible(&g, &z, &u, t, M));
        prop_assert!(z.iter().chain(&u).filter(|&&b| b).count() <= sol.objective);
    }

    #[test]
    fn more_pilots_never_hurt(g in graphs(), t in 1usize..=4) {
        let a = solve_ilp(&g, t, M).unwrap().objective;
        let b = solve_ilp(&g, t + 1, M).unwrap().objective;
        prop_assert!(a <= b);
    }

    #[test]
    fn plan_invariants(g in graphs(), t in 1usize..=5) {
        let sol = solve_ilp(&g, t, M).unwrap();
        let f = dft_matrix(M);
        let plan = build_plan(&g, &sol.z, &sol.u, &f, t).unwrap();
        let b = &plan.pre_beamformer;
        let gram = b * b.adjoint();
        let eye = CMatrix::identity(b.nrows(), b.nrows());
        prop_assert!((gram - eye).norm() < 1e-10);
        for (user, omega) in &plan.omega {
            prop_assert!(omega.len() <= t);
            let k = g.users().iter().position(|u| u == user).unwrap();
            for &p in omega {
                let a = g.beams().iter().position(|&x| x == plan.selected_beams[p]).unwrap();
                prop_assert!(g.is_adjacent(a, k));
            }
        }
        for &beam in &plan.selected_beams {
            let a = g.beams().iter().position(|&x| x == beam).unwrap();
            prop_assert!(plan.served_users().iter().any(|u| g.is_adjacent(a, *u)));
        }
    }

    #[test]
    fn instance_text_round_trips(g in graphs(), t in 1usize..=5) {
        let inst = IlpInstance { pilots: t, antennas: M, graph: g };
        let back = parse_instance(&write_instance(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn ls_inverts_noiseless_probing(seed in any::<u64>(), t in 1usize..=12, width in 1usize..=16, frac in 0.0f64..=1.0) {
        let mut rng = stream(seed, "prop-ls", 0, 0);
        let probing = generate_probing(t, width, 10.0, &mut rng).unwrap();
        let size = ((t.min(width) as f64) * frac).round() as usize;
        let omega: Vec<usize> = rand::seq::index::sample(&mut rng, width, size).into_vec();
        let mut h = CVector::zeros(width);
        for &p in &omega {
            h[p] = fdd_core::rng::complex_gaussian(&mut rng);
        }
        let y = observe(&probing, &h, 0.0, &mut rng).unwrap();
        let est = SupportLs::new(&probing, &omega).unwrap().estimate(3, &y).unwrap();
        prop_assert!(!est.rank_deficient);
        prop_assert!((&est.h_eff - &h).norm() <= 1e-9 * h.norm().max(1e-300));
    }

    #[test]
    fn ls_error_is_permutation_invariant(seed in any::<u64>(), t in 2usize..=10, width in 2usize..=12) {
        let mut rng = stream(seed, "prop-perm", 0, 0);
        let probing = generate_probing(t, width, 5.0, &mut rng).unwrap();
        let size = t.min(width) / 2 + 1;
        let omega: Vec<usize> = rand::seq::index::sample(&mut rng, width, size).into_vec();
        let h = complex_gaussian_vector(&mut rng, width);
        let y = observe(&probing, &h, 0.5, &mut rng).unwrap();
        let err = (SupportLs::new(&probing, &omega).unwrap().estimate(0, &y).unwrap().h_eff - &h).norm();

        let perm: Vec<usize> = rand::seq::index::sample(&mut rng, width, width).into_vec();
        // column p of the permuted matrix is column perm[p] of the original
        let mut inverse = vec![0; width];
        for (p, &q) in perm.iter().enumerate() {
            inverse[q] = p;
        }
        let psi_perm = select_columns(probing.psi(), &perm);
        let permuted = fdd_core::probe::ProbingMatrix::from_psi(psi_perm, probing.power()).unwrap();
        let h_perm = CVector::from_fn(width, |p, _| h[perm[p]]);
        let omega_perm: Vec<usize> = omega.iter().map(|&q| inverse[q]).collect();
        let est = SupportLs::new(&permuted, &omega_perm).unwrap().estimate(0, &y).unwrap();
        let err_perm = (est.h_eff - h_perm).norm();
        prop_assert!((err - err_perm).abs() <= 1e-9 * err.max(1.0));
    }

    #[test]
    fn greedy_selection_is_a_basis(seed in any::<u64>(), m in 2usize..=8, k in 1usize..=10, rank in 1usize..=8) {
        let mut rng = stream(seed, "prop-select", 0, 0);
        let rank = rank.min(m);
        let basis: Vec<CVector> = (0..rank).map(|_| complex_gaussian_vector(&mut rng, m)).collect();
        let vs: Vec<CVector> = (0..k)
            .map(|_| {
                basis.iter().fold(CVector::zeros(m), |acc, b| acc + b * fdd_core::rng::complex_gaussian(&mut rng))
            })
            .collect();
        let picked = greedy_select(&vs, DEFAULT_SELECT_TOL);
        prop_assert_eq!(picked.len(), rank.min(k));
        let mat = CMatrix::from_columns(&picked.iter().map(|&i| vs[i].clone()).collect::<Vec<_>>());
        let sv = mat.clone().svd(false, false).singular_values;
        prop_assert!(sv.iter().all(|&s| s > 1e-8 * sv[0]));
        let zf = greedy_zf(&vs, &(0..k).collect::<Vec<_>>(), m, DEFAULT_SELECT_TOL).unwrap();
        for c in zf.columns.column_iter() {
            prop_assert!((c.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_channels_are_unitary_pairs(seed in any::<u64>(), lo in -1.0f64..0.8, w in 0.05f64..0.3) {
        let cfg = fdd_core::harness::ScaleProfile::Desk.system();
        let clusters = [fdd_core::channel::AngleInterval::new(lo, (lo + w).min(cfg.theta_max))];
        let profile = fdd_core::channel::ScatteringProfile::equal_power_clusters(cfg.theta_max, &clusters, 1.0).unwrap();
        for band in [fdd_core::channel::Band::Uplink, fdd_core::channel::Band::Downlink] {
            let s = fdd_core::channel::ChannelSampler::new(&cfg, &profile, band).unwrap();
            let h = s.draw(&mut stream(seed, "prop-unitary", 0, 0));
            prop_assert!((h.h_fourier.norm() - h.h_spatial.norm()).abs() <= 1e-9 * h.h_spatial.norm());
        }
    }

    #[test]
    fn format_g_keeps_six_digits(x in prop_oneof![-1e12f64..1e12, -1e-3f64..1e-3]) {
        let s = format_g(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs(), "{} -> {}", x, s);
        prop_assert!(s.len() <= 13);
    }

    #[test]
    fn probing_rows_have_exact_power(seed in any::<u64>(), t in 1usize..=20, width in 1usize..=20, p in 0.1f64..1e3) {
        let probing = generate_probing(t, width, p, &mut stream(seed, "prop-power", 0, 0)).unwrap();
        for row in probing.psi().row_iter() {
            let e: f64 = row.iter().map(|z: &C64| z.norm_sqr()).sum();
            prop_assert!((e - p).abs() <= 1e-12 * p.max(1.0));
        }
    }
}
