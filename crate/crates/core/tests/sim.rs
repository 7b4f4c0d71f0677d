mod common;

use common::*;
use gascert_core::model::NetworkModel;
use gascert_core::sim::{metrics, run, NodeScenario, Schedule, Simulator};
use gascert_core::{CertifyOptions, Matrix, Mode, Scenario};
use proptest::prelude::*;

#[test]
fn equilibrium_stays_put() {
    let net = toy_pair();
    let sc = Scenario::new(2.0, 1e-2);
    for mode in [Mode::Decentralized, Mode::Distributed] {
        let tr = run(&net, &sc, mode).unwrap();
        assert!(tr.nodes.iter().all(|n| n.x_bar.iter().flatten().all(|&x| x == 0.0)));
        assert!(tr.v.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn zero_horizon_records_one_sample() {
    let tr = run(&toy_pair(), &toy_scenario(0.0, 1e-3), Mode::Distributed).unwrap();
    assert_eq!(tr.time, vec![0.0]);
    assert_eq!(tr.v.len(), 1);
    assert!(!tr.diverged);
}

#[test]
fn runs_are_bit_identical() {
    let (net, sc) = (toy_pair(), toy_scenario(3.0, 1e-3));
    for mode in [Mode::Decentralized, Mode::Distributed] {
        let a = run(&net, &sc, mode).unwrap();
        let b = run(&net, &sc, mode).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn toy_pair_is_certified_and_lyapunov_decreases() {
    let (net, sc) = (toy_pair(), toy_scenario(60.0, 1e-3));
    let tr = run(&net, &sc, Mode::Distributed).unwrap();
    assert!(tr.certified && !tr.diverged);
    let tol_v = 1e-6 * (1.0 + tr.v[0]);
    for (k, w) in tr.v.windows(2).enumerate().skip(10) {
        assert!(w[1] <= w[0] + tol_v, "V rose by {} at step {k}", w[1] - w[0]);
    }
    for n in &tr.nodes {
        let x0 = n.x_tilde_norm[0];
        assert!(*n.x_tilde_norm.last().unwrap() <= 1e-3 * x0.max(1.0));
    }
    for m in metrics(&tr).nodes {
        assert!(m.steady_state_error <= 1e-4, "{}: |y − r| = {}", m.id, m.steady_state_error);
    }
}

#[test]
fn rk4_is_fourth_order() {
    // decoupled, non-adaptive scalar loop: ẋ = a x + w
    let net = NetworkModel::new(vec![plain_node("s", mat(2, 2, &[-1.0, 3.0, -3.0, -1.0]), Matrix::identity(2, 2), 1.0, 0.0)], vec![])
        .unwrap();
    let end = |dt: f64| {
        let mut sc = Scenario::new(2.0, dt);
        sc.nodes = vec![NodeScenario { id: "s".into(), x0: Some(vec![1.0, -0.5]), x_hat0: Some(vec![0.0, 0.0]), ..Default::default() }];
        let tr = run(&net, &sc, Mode::Distributed).unwrap();
        tr.nodes[0].x_bar.last().unwrap().clone()
    };
    let reference = end(0.1 / 8.0);
    let err = |x: Vec<f64>| x.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let ratio = err(end(0.1)) / err(end(0.05));
    assert!((8.0..=32.0).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn unstable_coupling_is_flagged_as_divergence() {
    // Γ ≈ 0 so adaptation cannot out-run the coupling
    let net = NetworkModel::new(
        vec![
            plain_node("s1", scalar(-2.0), Matrix::identity(1, 1), 1e-9, 1.0),
            plain_node("s2", scalar(-2.0), Matrix::identity(1, 1), 1e-9, 1.0),
        ],
        vec![
            gascert_core::Interconnection::new("s2", "s1", scalar(50.0)),
            gascert_core::Interconnection::new("s1", "s2", scalar(50.0)),
        ],
    )
    .unwrap();
    let mut sc = Scenario::new(100.0, 1e-3);
    sc.nodes = vec![NodeScenario { id: "s1".into(), x0: Some(vec![1.0]), ..Default::default() }];
    let tr = run(&net, &sc, Mode::Decentralized).unwrap();
    assert!(tr.diverged);
    assert!(tr.diverged_at.unwrap() < 100.0);
    assert!(tr.v.iter().all(|v| v.is_finite()));
}

#[test]
fn bad_scenarios_are_rejected() {
    let net = toy_pair();
    let opts = CertifyOptions::default();
    assert!(Simulator::new(&net, &Scenario::new(1.0, 0.0), Mode::Distributed, &opts).is_err());
    assert!(Simulator::new(&net, &Scenario::new(-1.0, 0.1), Mode::Distributed, &opts).is_err());
    let mut sc = Scenario::new(1.0, 0.1);
    sc.nodes = vec![NodeScenario { id: "ghost".into(), ..Default::default() }];
    assert!(Simulator::new(&net, &sc, Mode::Distributed, &opts).is_err());
    sc.nodes = vec![NodeScenario { id: "s1".into(), reference: Schedule::constant(vec![1.0, 2.0]), ..Default::default() }];
    assert!(Simulator::new(&net, &sc, Mode::Distributed, &opts).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn certified_random_networks_decrease_v(seed in any::<u64>(), k in 1usize..=3) {
        use rand::Rng;
        let mut r = rng(seed);
        let net = random_network(&mut r, k, 0.2);
        let mut sc = Scenario::new(5.0, 1e-2);
        sc.nodes = net
            .nodes()
            .iter()
            .map(|n| {
                let d = n.dim();
                NodeScenario {
                    id: n.id().to_string(),
                    x0: Some((0..d).map(|_| r.random_range(-1.0..1.0)).collect()),
                    x_hat0: Some(vec![0.0; d]),
                    // inside {g ≤ 0}, where the projection law guarantees V̇ ≤ 0
                    theta: Some(
                        random_matrix(&mut r, d, 1).normalize()
                            * (n.tuning.theta_max / (1.0 + n.tuning.eps0).sqrt() * r.random_range(0.0..1.0)),
                    ),
                    ..Default::default()
                }
            })
            .collect();
        let sim = Simulator::new(&net, &sc, Mode::Distributed, &CertifyOptions::default()).unwrap();
        prop_assume!(sim.certified());
        let tr = sim.run().unwrap();
        let tol_v = 1e-6 * (1.0 + tr.v[0]);
        for w in tr.v.windows(2).skip(10) {
            prop_assert!(w[1] <= w[0] + tol_v);
        }
    }
}
