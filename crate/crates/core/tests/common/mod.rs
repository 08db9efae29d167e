//! Random instance generators and a reference eigensolver shared by the
//! integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use frde::adversary::{AdversarySet, AttackStrategy};
use frde::bounds::{normal_set_r2, EnvelopeState};
use frde::graph::{self, GeometricConstraints, Graph};
use frde::harness::Scenario;
use frde::params::{self, FrdeParams, LaplacianBounds, Procedure2Inputs};
use frde::protocol::ThresholdState;
use frde::sensing::{self, NoiseMode, ParameterSpec, SensingModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic Jacobi rotations on a dense symmetric matrix. Slow but simple
/// enough to trust as an oracle. Returns ascending eigenvalues.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Radius giving a reasonable chance of a connected geometric graph.
pub fn geometric_radius(n: usize) -> f64 {
    let n = n as f64;
    (3.0 * n.ln().max(1.0) / (std::f64::consts::PI * n))
        .sqrt()
        .clamp(0.3, 1.0)
}

pub fn connected_graph(n: usize, seed: u64) -> Graph {
    graph::random_geometric(
        n,
        geometric_radius(n),
        seed,
        &GeometricConstraints::default(),
    )
    .expect("connected geometric graph")
}

pub fn gaussian(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

/// Random Gaussian sensing with 1 to `m` rows per agent, normalized and
/// redrawn until the whole network is observable.
pub fn random_model(n: usize, m: usize, raw_b: f64, r: &mut ChaCha8Rng) -> SensingModel {
    loop {
        let raw: Vec<DMatrix<f64>> = (0..n)
            .map(|_| {
                let rows = r.random_range(1..=m);
                gaussian(rows, m, r)
            })
            .collect();
        let model = sensing::normalize_sensing(raw, raw_b).unwrap();
        if sensing::is_globally_observable(&model, &(0..n).collect::<Vec<_>>()).unwrap() {
            return model;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSource {
    Procedure1,
    Procedure2Exact,
    Procedure2Fallback,
}

impl ParamSource {
    pub fn nth(i: u64) -> Self {
        match i % 3 {
            0 => ParamSource::Procedure1,
            1 => ParamSource::Procedure2Exact,
            _ => ParamSource::Procedure2Fallback,
        }
    }
}

pub fn make_params(src: ParamSource, g: &Graph, model: &SensingModel) -> FrdeParams {
    match src {
        ParamSource::Procedure1 => params::procedure1(g, model, 1.0, 10.0).unwrap(),
        ParamSource::Procedure2Exact => params::procedure2(
            &Procedure2Inputs::from_network(g, model, LaplacianBounds::Exact, None).unwrap(),
        )
        .unwrap(),
        ParamSource::Procedure2Fallback => params::procedure2(
            &Procedure2Inputs::from_network(g, model, LaplacianBounds::Fallback, None).unwrap(),
        )
        .unwrap(),
    }
}

/// Noise bound drawn so that roughly one instance in five is noiseless.
pub fn random_noise_bound(r: &mut ChaCha8Rng) -> f64 {
    if r.random_bool(0.2) {
        0.0
    } else {
        r.random_range(0.005..0.5)
    }
}

pub fn random_parameter(m: usize, r: &mut ChaCha8Rng) -> ParameterSpec {
    let eta = r.random_range(1.0..100.0);
    ParameterSpec::random_in_ball(m, eta, r.random()).unwrap()
}

/// An adversary-free scenario with `N ∈ [5, 60]`, params from `src`.
pub fn honest_scenario(seed: u64, src: ParamSource, rounds: usize) -> Scenario {
    let mut r = rng(seed);
    let n = r.random_range(5..=60);
    let m = r.random_range(1..=4);
    let g = connected_graph(n, r.random());
    let b = random_noise_bound(&mut r);
    let model = random_model(n, m, b, &mut r);
    let parameter = random_parameter(m, &mut r);
    let params = make_params(src, &g, &model);
    Scenario {
        name: format!("honest_{seed}"),
        graph: g,
        model,
        parameter,
        noise_mode: if r.random_bool(0.2) {
            NoiseMode::WorstCase
        } else {
            NoiseMode::Uniform
        },
        params,
        adversaries: AdversarySet::none(n),
        strategy: None,
        rounds,
        seed: r.random(),
    }
}

pub fn unit_vector(m: usize, r: &mut ChaCha8Rng) -> DVector<f64> {
    let v = DVector::from_fn(m, |_, _| r.sample::<f64, _>(StandardNormal));
    let n = v.norm();
    v / n
}

/// Riding instances where every adversary neighbors every normal agent and
/// the normal agents share one full-rank sensing matrix. Each normal agent
/// then receives the same push, so the ride cannot open a gap between two
/// normal agents.
///
/// The noise bound is positive: with `B = 0` the threshold decays below the
/// round-off in `‖(x + ργu) − x‖` and a ride at `ρ < 1` can cross it. Draws
/// whose `Z` needs more than `cap` rounds to settle are discarded.
pub fn hub_riding_scenario(seed: u64, rho: f64, cap: usize) -> Scenario {
    let mut r = rng(seed);
    loop {
        let s = hub_riding_draw(&mut r, seed, rho);
        let rounds = z_settle_rounds(&s, 1e-10, cap);
        if rounds < cap {
            return Scenario { rounds, ..s };
        }
    }
}

fn hub_riding_draw(r: &mut ChaCha8Rng, seed: u64, rho: f64) -> Scenario {
    let m = r.random_range(1..=3);
    let n_normal = r.random_range(5..=30);
    let n_adv = r.random_range(1..=5);
    let n = n_normal + n_adv;
    let inner = connected_graph(n_normal, r.random());
    let mut edges: Vec<(usize, usize)> = inner.edges().to_vec();
    for a in n_normal..n {
        for v in 0..n_normal {
            edges.push((v, a));
        }
        for b in (a + 1)..n {
            if r.random_bool(0.5) {
                edges.push((a, b));
            }
        }
    }
    let g = Graph::new(n, edges).unwrap();
    let b = r.random_range(0.005..0.5);
    let shared = loop {
        let h = gaussian(m, m, r);
        if h.clone().svd(false, false).singular_values.min() > 0.1 {
            break h;
        }
    };
    let raw: Vec<DMatrix<f64>> = (0..n)
        .map(|i| {
            if i < n_normal {
                shared.clone()
            } else {
                let rows = r.random_range(1..=m);
                gaussian(rows, m, r)
            }
        })
        .collect();
    let model = sensing::normalize_sensing(raw, b).unwrap();
    let parameter = random_parameter(m, r);
    let params = make_params(ParamSource::Procedure1, &g, &model);
    let members: Vec<usize> = (n_normal..n).collect();
    let adversaries = AdversarySet::new(n, &members).unwrap();
    let dir = unit_vector(m, r);
    Scenario {
        name: format!("riding_{seed}"),
        graph: g,
        model,
        parameter,
        noise_mode: NoiseMode::Uniform,
        params,
        adversaries,
        strategy: Some(AttackStrategy::threshold_riding(rho, dir).unwrap()),
        rounds: 0,
        seed: r.random(),
    }
}

/// First `t` at which `Z_t` is within `rel` of its limit, capped at `cap`.
pub fn z_settle_rounds(s: &Scenario, rel: f64, cap: usize) -> usize {
    let n = s.graph.n_vertices();
    let normal = s.adversaries.normal();
    let cert = params::certify(&s.params, &s.graph, &s.model).unwrap();
    let r2 = normal_set_r2(&s.graph, &s.model, normal, &s.params).unwrap();
    let b = s.model.noise_bound();
    let mut env = EnvelopeState::new(
        cert.lambda_min,
        r2,
        &s.params,
        b,
        n,
        normal.len(),
        s.parameter.eta,
    )
    .unwrap();
    let limit = env.z_limit().unwrap();
    let mut th = ThresholdState::new(s.parameter.eta, n, s.params.alpha, b, s.params.r1);
    for t in 0..cap {
        if (env.z.unwrap() - limit).abs() <= rel * limit.max(f64::MIN_POSITIVE) {
            return t;
        }
        env.step(th.gamma);
        th = th.step();
    }
    cap
}

/// Coordinate-aligned instances whose normal agents never see the last
/// `k ≥ 1` coordinates. Only adversaries sense them, so the normal set is
/// connected but unobservable while the whole network is observable.
/// Draws whose `W` needs more than 20000 rounds to settle are discarded.
pub fn null_space_scenario(seed: u64) -> Scenario {
    let mut r = rng(seed);
    loop {
        let m = r.random_range(2..=4);
        let hidden = r.random_range(1..m);
        let visible = m - hidden;
        let n = r.random_range(6..=30);
        let g = connected_graph(n, r.random());
        let n_adv = r.random_range(1..=(n / 3).max(hidden));
        let mut ids: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            ids.swap(i, r.random_range(0..=i));
        }
        let mut members = ids[..n_adv].to_vec();
        members.sort_unstable();
        let adversaries = AdversarySet::new(n, &members).unwrap();
        if !graph::is_connected(&g, adversaries.normal()).unwrap() {
            continue;
        }
        let coord_rows = |coords: &[usize]| {
            DMatrix::from_fn(
                coords.len(),
                m,
                |i, j| if coords[i] == j { 1.0 } else { 0.0 },
            )
        };
        let pick = |from: std::ops::Range<usize>, r: &mut ChaCha8Rng| -> Vec<usize> {
            let c: Vec<usize> = from.clone().filter(|_| r.random_bool(0.5)).collect();
            if c.is_empty() {
                vec![r.random_range(from)]
            } else {
                c
            }
        };
        let mut h = vec![DMatrix::zeros(0, m); n];
        for (k, &v) in adversaries.normal().iter().enumerate() {
            // The first `visible` normal agents cover each visible coordinate once.
            let coords = if k < visible {
                vec![k]
            } else {
                pick(0..visible, &mut r)
            };
            h[v] = coord_rows(&coords);
        }
        for (k, &a) in members.iter().enumerate() {
            let coords = if k < hidden {
                vec![visible + k]
            } else {
                pick(0..m, &mut r)
            };
            h[a] = coord_rows(&coords);
        }
        if adversaries.normal().len() < visible || members.len() < hidden {
            continue;
        }
        let b = random_noise_bound(&mut r);
        let model = SensingModel::new(h, b).unwrap();
        let parameter = random_parameter(m, &mut r);
        let params = make_params(ParamSource::Procedure1, &g, &model);
        let strategy = frde::adversary::synthesize_null_space_attack(
            &model,
            adversaries.normal(),
            &parameter,
            frde::adversary::MagnitudePolicy::MaxFeasible,
        )
        .unwrap();
        let mut s = Scenario {
            name: format!("null_space_{seed}"),
            graph: g,
            model,
            parameter,
            noise_mode: NoiseMode::Uniform,
            params,
            adversaries,
            strategy: Some(strategy),
            rounds: 0,
            seed: r.random(),
        };
        s.rounds = w_settle_rounds(&s, 1e-10, 20_000);
        if s.rounds < 20_000 {
            return s;
        }
    }
}

/// First `t` at which `W_t` is within `rel` of its limit, or below
/// `1e-9·W_0` when the limit is zero, capped at `cap`.
pub fn w_settle_rounds(s: &Scenario, rel: f64, cap: usize) -> usize {
    let cert = params::certify(&s.params, &s.graph, &s.model).unwrap();
    let n = s.graph.n_vertices();
    let mut env = EnvelopeState::new(
        cert.lambda_min,
        None,
        &s.params,
        s.model.noise_bound(),
        n,
        n,
        s.parameter.eta,
    )
    .unwrap();
    let limit = env.w_limit();
    let w0 = env.w;
    for t in 0..cap {
        let settled = if limit > 0.0 {
            (env.w - limit).abs() <= rel * limit
        } else {
            env.w <= 1e-9 * w0
        };
        if settled {
            return t;
        }
        env.w_step();
    }
    cap
}
