#![allow(dead_code)]

use gascert_core::model::{Interconnection, NetworkModel, NodeSpec, Subsystem, Tuning};
use gascert_core::numerics::{eigenvalues, Complex64};
use gascert_core::Matrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mat(rows: usize, cols: usize, v: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, v)
}

pub fn scalar(a: f64) -> Matrix {
    Matrix::from_element(1, 1, a)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random Hurwitz matrix: a random matrix shifted left past its spectrum.
pub fn random_hurwitz(rng: &mut impl Rng, n: usize) -> Matrix {
    let a = random_matrix(rng, n, n) * 2.0;
    let shift = eigenvalues(&a).unwrap().max_real() + rng.random_range(0.1..2.0);
    a - Matrix::identity(n, n) * shift
}

pub fn sigma_min_shifted(a: &Matrix, omega: f64) -> f64 {
    let n = a.nrows();
    let shifted: DMatrix<Complex64> =
        DMatrix::from_fn(n, n, |i, j| Complex64::new(a[(i, j)], if i == j { -omega } else { 0.0 }));
    shifted.singular_values().min()
}

/// Brute-force `min_ω σ_min(A − jωI)`: dense grid on `[0, 2‖A‖₂]` plus a
/// golden-section polish around every grid-local minimum.
pub fn distance_oracle(a: &Matrix) -> f64 {
    let top = 2.0 * a.singular_values().max();
    let k = 4000;
    let grid: Vec<f64> = (0..=k).map(|i| top * i as f64 / k as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&w| sigma_min_shifted(a, w)).collect();
    let mut best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    for i in 0..=k {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i == k { f64::INFINITY } else { vals[i + 1] };
        if vals[i] <= left && vals[i] <= right {
            let (mut lo, mut hi) = (grid[i.saturating_sub(1)], grid[(i + 1).min(k)]);
            for _ in 0..100 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if sigma_min_shifted(a, m1) < sigma_min_shifted(a, m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.min(sigma_min_shifted(a, 0.5 * (lo + hi)));
        }
    }
    best
}

fn unit(id: &str, n: usize, q: usize) -> Subsystem {
    Subsystem::new(
        id,
        -Matrix::identity(n, n),
        Matrix::from_element(n, 1, 1.0),
        Matrix::from_element(q, n, 1.0),
        Matrix::zeros(q, 1),
        Matrix::zeros(n, 1),
    )
    .unwrap()
}

/// Node with raw dimension `n`, no integral states (`q = 0`) and the given
/// reference model.
pub fn plain_node(id: &str, am: Matrix, q: Matrix, gamma: f64, theta_max: f64) -> NodeSpec {
    let s = unit(id, am.nrows(), 0);
    NodeSpec::new(&s, am, None, Tuning::new(q, gamma, theta_max, 0.1)).unwrap()
}

/// Two scalar subsystems `a = −2`, coupled both ways with gain `k`.
pub fn scalar_pair(k: f64) -> NetworkModel {
    let nodes = vec![
        plain_node("s1", scalar(-2.0), Matrix::identity(1, 1), 1.0, 1.0),
        plain_node("s2", scalar(-2.0), Matrix::identity(1, 1), 1.0, 1.0),
    ];
    NetworkModel::new(
        nodes,
        vec![
            Interconnection::new("s2", "s1", scalar(k)),
            Interconnection::new("s1", "s2", scalar(k)),
        ],
    )
    .unwrap()
}

/// Random network of `k` nodes with dimension ≤ 3 and sparse random edges
/// of norm ≤ `scale`.
pub fn random_network(rng: &mut impl Rng, k: usize, scale: f64) -> NetworkModel {
    let dims: Vec<usize> = (0..k).map(|_| rng.random_range(1..=3)).collect();
    let nodes: Vec<NodeSpec> = dims
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let am = random_hurwitz(rng, n);
            let l = random_matrix(rng, n, n);
            let q = &l * l.transpose() + Matrix::identity(n, n) * 0.5;
            plain_node(&format!("n{i}"), am, q, rng.random_range(0.5..5.0), rng.random_range(0.0..2.0))
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i != j && rng.random_bool(0.5) {
                let a = random_matrix(rng, dims[i], dims[j]) * scale;
                edges.push(Interconnection::new(format!("n{j}"), format!("n{i}"), a));
            }
        }
    }
    NetworkModel::new(nodes, edges).unwrap()
}

/// Certified two-node toy network: first-order lag plants with integral
/// augmentation, coupled by 0.2 both ways.
pub fn toy_pair() -> NetworkModel {
    use gascert_core::control::reference_model;
    use gascert_core::model::augment;
    let node = |id: &str| {
        let s = Subsystem::new(id, scalar(-1.0), scalar(1.0), scalar(1.0), scalar(0.0), scalar(1.0)).unwrap();
        let k_bl = mat(1, 2, &[2.0, -2.0]);
        let am = reference_model(&augment(&s).unwrap(), &k_bl).unwrap();
        NodeSpec::new(&s, am, Some(k_bl), Tuning::new(Matrix::identity(2, 2), 10.0, 2.0, 0.1)).unwrap()
    };
    NetworkModel::new(
        vec![node("s1"), node("s2")],
        vec![
            Interconnection::new("s2", "s1", scalar(0.2)),
            Interconnection::new("s1", "s2", scalar(0.2)),
        ],
    )
    .unwrap()
}

/// Reference steps plus a load step on `s2` at t = 5 s.
pub fn toy_scenario(horizon: f64, dt: f64) -> gascert_core::Scenario {
    use gascert_core::sim::{DisturbanceRouting, NodeScenario, Schedule};
    let mut sc = gascert_core::Scenario::new(horizon, dt);
    sc.disturbance_routing = DisturbanceRouting::Measured;
    sc.nodes = vec![
        NodeScenario {
            id: "s1".into(),
            reference: Schedule::constant(vec![1.0]),
            theta: Some(mat(2, 1, &[0.5, -0.3])),
            ..NodeScenario::default()
        },
        NodeScenario {
            id: "s2".into(),
            reference: Schedule::constant(vec![0.5]),
            disturbance: Schedule::step(vec![0.0], 5.0, vec![0.5]),
            theta: Some(mat(2, 1, &[-0.4, 0.2])),
            ..NodeScenario::default()
        },
    ];
    sc
}
