//! Property tests for the structural invariants of each module.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use common::{connected_graph, jacobi_eigenvalues, make_params, random_model, rng, ParamSource};
use frde::adversary::{self, AdversarySet, MagnitudePolicy};
use frde::bounds::EnvelopeState;
use frde::graph::{self, GeometricConstraints, Graph, SubsetPartition};
use frde::harness::{run, write_csv, RunOptions};
use frde::params::{self, build_j};
use frde::protocol::{self, AgentState, Flag, Message, ThresholdState};
use frde::sensing::{self, NoiseMode, NoiseSource, ParameterSpec};
use frde::spectral::{self, SymmetricMatrix};
use frde::ExecMode;

fn random_edges(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|_| r.random_bool(p))
        .collect();
    Graph::new(n, edges).unwrap()
}

fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let a = common::gaussian(n, n, &mut rng(seed));
    (&a + a.transpose()) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric_and_loop_free(n in 1usize..40, p in 0.0f64..1.0, seed: u64) {
        let g = random_edges(n, p, seed);
        for &(u, v) in g.edges() {
            prop_assert!(u != v && u < n && v < n);
        }
        for u in 0..n {
            for v in 0..n {
                prop_assert_eq!(g.has_edge(u, v), g.has_edge(v, u));
                prop_assert_eq!(g.has_edge(u, v), g.neighbors(u).contains(&v));
            }
        }
        let back = Graph::parse_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn laplacian_has_zero_rows_and_psd_spectrum(n in 1usize..30, p in 0.0f64..1.0, seed: u64) {
        let g = random_edges(n, p, seed);
        let l = graph::laplacian(&g);
        let m = l.as_matrix();
        for i in 0..n {
            prop_assert_eq!(m.row(i).sum(), 0.0);
            prop_assert_eq!(m[(i, i)], g.degree(i) as f64);
        }
        let ev = spectral::eig_sym(&l, false).unwrap().eigenvalues;
        let scale = n as f64;
        prop_assert!(ev[0].abs() <= 1e-10 * scale);
        prop_assert!(ev.iter().all(|&x| x >= -1e-10 * scale));
        // The multiplicity of zero counts the components, so λ₂ > 0 iff connected.
        if n > 1 {
            prop_assert_eq!(ev[1] > 1e-9 * scale, graph::is_graph_connected(&g));
        }
    }

    #[test]
    fn partition_covers_vertices(n in 1usize..30, seed: u64) {
        let g = random_edges(n, 0.3, seed);
        let mut r = rng(seed ^ 1);
        let subset: Vec<usize> = (0..n).filter(|_| r.random_bool(0.5)).collect();
        prop_assume!(!subset.is_empty());
        let part = SubsetPartition::new(&g, &subset).unwrap();
        let mut all: Vec<usize> = part.subset.iter().chain(&part.complement).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(part.subset.iter().all(|v| !part.complement.contains(v)));
    }

    #[test]
    fn geometric_graphs_meet_their_constraints(n in 2usize..40, min_degree in 0usize..3, seed: u64) {
        let min_degree = min_degree.min(n - 1);
        let c = GeometricConstraints { min_degree, ..Default::default() };
        let g = graph::random_geometric(n, 0.5, seed, &c).unwrap();
        prop_assert!(graph::is_graph_connected(&g));
        prop_assert!((0..n).all(|v| g.degree(v) >= min_degree));
        prop_assert_eq!(g, graph::random_geometric(n, 0.5, seed, &c).unwrap());
    }

    #[test]
    fn eigensolver_matches_jacobi_oracle(n in 1usize..12, seed: u64) {
        let a = random_symmetric(n, seed);
        let res = spectral::eig_sym(&SymmetricMatrix::new(a.clone()).unwrap(), true).unwrap();
        let oracle = jacobi_eigenvalues(&a);
        let scale = a.norm().max(1.0);
        for (x, y) in res.eigenvalues.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-10 * scale, "{} vs {}", x, y);
        }
        prop_assert!(res.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let v = res.eigenvectors.unwrap();
        for (i, &lambda) in res.eigenvalues.iter().enumerate() {
            let col = v.column(i);
            prop_assert!((&a * col - col * lambda).norm() <= 1e-10 * scale);
        }
        prop_assert!((v.transpose() * &v - DMatrix::identity(n, n)).norm() <= 1e-10 * n as f64);
    }

    #[test]
    fn null_space_basis_is_annihilated(rows in 0usize..5, cols in 1usize..6, seed: u64) {
        let a = common::gaussian(rows, cols, &mut rng(seed));
        let basis = spectral::null_space_basis(&a, spectral::RANK_TOL).unwrap();
        prop_assert_eq!(basis.ncols(), cols - rows.min(cols));
        prop_assert!((&a * &basis).norm() <= 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn normalized_sensing_is_contractive(n in 1usize..10, m in 1usize..5, b in 0.0f64..2.0, seed: u64) {
        let mut r = rng(seed);
        let raw: Vec<DMatrix<f64>> = (0..n)
            .map(|_| common::gaussian(r.random_range(0..=m), m, &mut r) * 3.0)
            .collect();
        let model = sensing::normalize_sensing(raw, b).unwrap();
        prop_assert!(model.noise_bound() <= b);
        for i in 0..n {
            let g = SymmetricMatrix::new(model.gram(i).clone()).unwrap();
            prop_assert!(spectral::max_eig(&g).unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn honest_measurements_stay_within_noise_bound(m in 1usize..5, b in 0.0f64..1.0, seed: u64, round in 0usize..10_000) {
        let mut r = rng(seed);
        let model = random_model(3, m, b, &mut r);
        let theta = DVector::from_fn(m, |_, _| r.random_range(-5.0..5.0));
        for mode in [NoiseMode::Uniform, NoiseMode::WorstCase] {
            let src = NoiseSource { seed, mode };
            for agent in 0..3 {
                let y = sensing::measure(&model, &theta, agent, round, &src);
                let w = &y.value - model.h(agent) * &theta;
                prop_assert!(w.norm() <= model.noise_bound() * (1.0 + 1e-12) + 1e-12);
            }
        }
    }

    #[test]
    fn procedures_give_certified_params(n in 2usize..25, m in 1usize..4, seed: u64) {
        let mut r = rng(seed);
        let g = connected_graph(n, r.random());
        let model = random_model(n, m, 0.1, &mut r);
        for src in [ParamSource::Procedure1, ParamSource::Procedure2Exact, ParamSource::Procedure2Fallback] {
            let p = make_params(src, &g, &model);
            prop_assert!(p.alpha > 0.0 && p.beta > 0.0 && p.r1 > 0.0 && p.r1 <= 1.0);
            let cert = params::certify(&p, &g, &model).unwrap();
            prop_assert!(cert.passes(), "{:?} {:?}", src, cert);
        }
    }

    #[test]
    fn procedure1_ignores_joint_scaling(n in 2usize..20, m in 1usize..4, scale in 0.01f64..100.0, seed: u64) {
        let mut r = rng(seed);
        let g = connected_graph(n, r.random());
        let model = random_model(n, m, 0.1, &mut r);
        let a = params::procedure1(&g, &model, 1.0, 10.0).unwrap();
        let b = params::procedure1(&g, &model, scale, 10.0 * scale).unwrap();
        prop_assert!((a.alpha - b.alpha).abs() <= 1e-10 * a.alpha);
        prop_assert!((a.beta - b.beta).abs() <= 1e-10 * a.beta);
        prop_assert!((a.r1 - b.r1).abs() <= 1e-8 * a.r1);
    }

    #[test]
    fn j_is_positive_definite_on_connected_observable_subsets(n in 2usize..25, m in 1usize..4, seed: u64) {
        let mut r = rng(seed);
        let g = connected_graph(n, r.random());
        let model = random_model(n, m, 0.1, &mut r);
        let p = params::procedure1(&g, &model, 1.0, 10.0).unwrap();
        let start = r.random_range(0..n);
        let mut subset = vec![start];
        // Breadth-first growth keeps the subset connected.
        let mut i = 0;
        while i < subset.len() && !sensing::is_globally_observable(&model, &subset).unwrap() {
            for &v in g.neighbors(subset[i]) {
                if !subset.contains(&v) {
                    subset.push(v);
                }
            }
            i += 1;
        }
        subset.sort_unstable();
        prop_assume!(sensing::is_globally_observable(&model, &subset).unwrap());
        let (lo, hi) = build_j(&g, &model, &subset, p.beta, p.alpha).unwrap().extreme_eigs().unwrap();
        prop_assert!(lo > 0.0);
        prop_assert!(hi <= 1.0 + 1e-9);
    }

    #[test]
    fn flags_are_monotone_and_strict(m in 1usize..4, d in 0.0f64..10.0, seed: u64) {
        let mut r = rng(seed);
        let x = DVector::from_fn(m, |_, _| r.random_range(-10.0..10.0));
        let u = common::unit_vector(m, &mut r);
        let payload = &x + &u * d;
        let gap = protocol::deviation(&x, &payload);
        let inbox = [Message { sender: 1, receiver: 0, round: 0, payload }];
        let quiet = AgentState { estimate: x.clone(), flag: Flag::NoAttack };
        prop_assert_eq!(protocol::flag_update(0, 0, &quiet, &inbox, &[1], gap).unwrap(), Flag::NoAttack);
        prop_assert_eq!(protocol::flag_update(0, 0, &quiet, &inbox, &[1], gap * 2.0 + 1.0).unwrap(), Flag::NoAttack);
        let raised = AgentState { estimate: x, flag: Flag::Attack };
        prop_assert_eq!(protocol::flag_update(0, 0, &raised, &inbox, &[1], f64::INFINITY).unwrap(), Flag::Attack);
    }

    #[test]
    fn threshold_follows_recursion_and_stays_above_fixed_point(
        eta in 0.1f64..1000.0, n in 1usize..200, alpha in 1e-4f64..0.5, b in 0.0f64..1.0, r1 in 1e-4f64..1.0,
    ) {
        let mut th = ThresholdState::new(eta, n, alpha, b, r1);
        let sqrt_n = (n as f64).sqrt();
        prop_assert_eq!(th.gamma, 2.0 * eta * sqrt_n);
        let fp = alpha * b * sqrt_n / r1;
        prop_assume!(th.gamma >= fp);
        for _ in 0..500 {
            let next = th.step();
            prop_assert_eq!(next.gamma, (1.0 - r1) * th.gamma + alpha * b * sqrt_n);
            prop_assert!(next.gamma <= th.gamma);
            prop_assert!(next.gamma >= fp * (1.0 - 1e-12));
            th = next;
        }
    }

    #[test]
    fn w_envelope_recursion_matches_closed_form(lmin in 1e-3f64..1.0, b in 0.0f64..1.0, n in 1usize..50, t in 0usize..300) {
        let p = params::FrdeParams::manual(0.01, 0.1, lmin).unwrap();
        let mut env = EnvelopeState::new(lmin, None, &p, b, n, n, 10.0).unwrap();
        prop_assert_eq!(env.w, 10.0 * (n as f64).sqrt());
        let closed = env.w_closed_form(t);
        for _ in 0..t {
            env.w_step();
        }
        prop_assert!((env.w - closed).abs() <= 1e-9 * closed.max(1e-12));
    }

    #[test]
    fn null_space_attacks_are_invisible_and_feasible(seed: u64) {
        let mut r = rng(seed);
        let m = r.random_range(2..=4);
        let n = r.random_range(2..=8);
        // Normal agents sense a random strict subspace.
        let k = r.random_range(1..m);
        let basis = common::gaussian(k, m, &mut r);
        let h: Vec<DMatrix<f64>> = (0..n)
            .map(|_| common::gaussian(r.random_range(1..=3), k, &mut r) * &basis)
            .collect();
        let model = sensing::normalize_sensing(h, 0.1).unwrap();
        let normal: Vec<usize> = (0..n).collect();
        let spec = ParameterSpec::random_in_ball(m, r.random_range(1.0..100.0), r.random()).unwrap();
        let attack = adversary::synthesize_null_space_attack(&model, &normal, &spec, MagnitudePolicy::MaxFeasible).unwrap();
        let theta_bar = attack.theta_bar().unwrap();
        let mu = theta_bar - &spec.theta_star;
        prop_assert!(theta_bar.norm() <= spec.eta);
        prop_assert!(mu.norm() > 0.0);
        let seen = model.stacked(&normal) * &mu;
        prop_assert!(seen.norm() <= spectral::RANK_TOL * mu.norm() * model.stacked(&normal).norm().max(1.0));
    }

    #[test]
    fn adversary_sets_partition_agents(n in 1usize..40, seed: u64) {
        let mut r = rng(seed);
        let members: Vec<usize> = (0..n).filter(|_| r.random_bool(0.3)).collect();
        let set = AdversarySet::new(n, &members).unwrap();
        let mut all: Vec<usize> = set.members().iter().chain(set.normal()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(set.normal().iter().all(|&v| !set.contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn normal_error_never_exceeds_global_error(seed in 0u64..1000) {
        let s = common::hub_riding_scenario(seed, 0.5, 20_000);
        let s = frde::harness::Scenario { rounds: 200, ..s };
        let t = run(&s, &RunOptions::default()).unwrap();
        for row in &t.rows {
            prop_assert!(row.err_normal <= row.err_global);
        }
        for i in 0..t.errors.len() {
            prop_assert!(t.errors.subset_error(i, s.adversaries.normal()) <= t.rows[i].err_global);
        }
    }

    #[test]
    fn execution_mode_does_not_change_results(seed in 0u64..1000) {
        let s = common::honest_scenario(seed, ParamSource::nth(seed), 100);
        let csv = |exec| {
            let t = run(&s, &RunOptions { exec, ..RunOptions::default() }).unwrap();
            let mut out = Vec::new();
            write_csv(&t, &mut out, true).unwrap();
            out
        };
        prop_assert_eq!(csv(ExecMode::Sequential), csv(ExecMode::Parallel));
    }
}

#[test]
fn large_spectra_keep_trace_and_orthonormality() {
    for (n, seed) in [(1, 1), (37, 2), (150, 3), (500, 4)] {
        let a = random_symmetric(n, seed);
        let res = spectral::eig_sym(&SymmetricMatrix::new(a.clone()).unwrap(), true).unwrap();
        let scale = a.norm();
        let sum: f64 = res.eigenvalues.iter().sum();
        assert!((a.trace() - sum).abs() <= 1e-8 * scale, "n = {n}");
        let v = res.eigenvectors.unwrap();
        let gap = (v.transpose() * &v - DMatrix::identity(n, n)).amax();
        assert!(gap <= 1e-8, "n = {n}: {gap:e}");
    }
}
