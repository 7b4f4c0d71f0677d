//! Acceptance criteria 1–9. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr (bypassing libtest's capture) and then asserts.
//! Tolerances are pinned below.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use gascert_cli::config::{self, Loaded};
use gascert_core::connective::{analyze, small_gain_network};
use gascert_core::control::{g_convex, projection, update_projection, ProjectionBounds};
use gascert_core::numerics::{
    default_eig_tol, distance_to_instability, eigenvalues, hamiltonian, is_hyperbolic, solve_are, solve_lyapunov,
    spectral_norm, symmetric_extremes, Complex64,
};
use gascert_core::riccati::{certify_gas, gas_margin};
use gascert_core::sim::Simulator;
use gascert_core::{CertifyOptions, Interconnection, Matrix, Mode, NetworkModel, NodeSpec, Subsystem, Tuning, Vector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SMALL_GAIN_EXPECTED: f64 = 2.0588e9;
const SMALL_GAIN_REL: f64 = 1e-3;
const COND_RATIO_MAX: f64 = 1e-6;
const EXPECTED_LMAX_P: f64 = 2.28e4;
const EXPECTED_LMIN_P: f64 = 723.2;
const ARE_RESIDUAL_REL: f64 = 1e-8;
const GOLDEN_ABS: f64 = 1e-12;
const DISTANCE_TOL: f64 = 1e-9;
const DISTANCE_REL: f64 = 1e-4;
const LEMMA2_BAND: f64 = 1e-6;
const PROJECTION_SLACK: f64 = 1e-6;
const V_TOL_REL: f64 = 1e-6;
const X_TILDE_REL: f64 = 1e-3;
const TRACKING_ABS: f64 = 1e-4;
const INEQUALITY_REL: f64 = 1e-10;

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} — {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn load(name: &str) -> Loaded {
    config::load(&fixture(name)).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_hurwitz(r: &mut impl Rng, n: usize) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| r.random_range(-2.0..2.0));
    let shift = eigenvalues(&a).unwrap().max_real() + r.random_range(0.1..2.0);
    a - Matrix::identity(n, n) * shift
}

fn sigma_min_shifted(a: &Matrix, omega: f64) -> f64 {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| Complex64::new(a[(i, j)], if i == j { -omega } else { 0.0 }))
        .singular_values()
        .min()
}

/// `min_ω σ_min(A − jωI)` on a dense grid with ternary-search polish.
fn distance_oracle(a: &Matrix) -> f64 {
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
                let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
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

#[test]
fn criterion_1_small_gain_regression() {
    let t0 = Instant::now();
    let net = load("sva.json").network;
    let r = small_gain_network(&net).unwrap();
    let elapsed = t0.elapsed();
    let lp = &r.loops[0].check;
    let rel = (lp.raw_gain_product / SMALL_GAIN_EXPECTED - 1.0).abs();
    let pass = r.loops.len() == 1 && rel <= SMALL_GAIN_REL && !r.verdict.passed() && elapsed < Duration::from_secs(1);
    report(
        1,
        pass,
        format!(
            "raw product {:.5e} (rel err {rel:.1e}), H∞ product {:.5e}, verdict {:?}, {elapsed:.2?}",
            lp.raw_gain_product, lp.hinf_product, r.verdict
        ),
    );
}

#[test]
fn criterion_2_connective_failure_regression() {
    let t0 = Instant::now();
    let net = load("sva.json").network;
    let am = &net.nodes()[0].am;
    let p1 = solve_lyapunov(am, &Matrix::identity(3, 3)).unwrap();
    let (lmin, lmax) = symmetric_extremes(&p1).unwrap();
    let r = analyze(&net).unwrap();
    let elapsed = t0.elapsed();
    let lhs = r.m[(0, 0)].abs();
    let rhs = r.m[(0, 1)];
    let ratio = lhs / rhs;
    let decade = |x: f64, want: f64| (x / want).log10().abs() <= 1.0;
    let (lmax_ok, lmin_ok) = (decade(lmax, EXPECTED_LMAX_P), decade(lmin, EXPECTED_LMIN_P));
    let pass = ratio < COND_RATIO_MAX && !r.verdict.passed() && lmax_ok && lmin_ok && elapsed < Duration::from_secs(1);
    report(
        2,
        pass,
        format!(
            "cond_diag LHS/RHS {ratio:.2e}, verdict {:?}; λ_max(P₁) {lmax:.4e} vs {EXPECTED_LMAX_P:e} (within a decade: {lmax_ok}), \
             λ_min(P₁) {lmin:.4e} vs {EXPECTED_LMIN_P} (within a decade: {lmin_ok}); {elapsed:.2?}",
            r.verdict
        ),
    );
}

#[test]
fn criterion_3_are_oracle_suite() {
    let t0 = Instant::now();
    let mut r = rng(0xA2E0);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for k in 0..100 {
        let n = r.random_range(1..=4);
        let a = random_hurwitz(&mut r, n);
        let nn = r.random_range(1..=3usize);
        let gamma = distance_to_instability(&a, nn, 1e-12).unwrap();
        let xi = r.random_range(0.0..0.9) * gamma / (nn as f64).sqrt();
        let xi2 = xi * xi;
        let eps = 0.5 * (gamma * gamma / nn as f64 - xi2);
        match solve_are(&a, nn, xi2 + eps) {
            Ok(sol) => {
                let pn = spectral_norm(&sol.p).unwrap();
                let rel = sol.residual_norm / (pn * pn).max(1.0);
                worst = worst.max(rel);
                let pd = symmetric_extremes(&sol.p).unwrap().0 > 0.0;
                let stable = eigenvalues(&(&a + &sol.p * nn as f64)).unwrap().is_hurwitz();
                if rel > ARE_RESIDUAL_REL || !pd || !stable {
                    failures.push(k);
                }
            }
            Err(_) => failures.push(k),
        }
    }
    let s = |a: f64| Matrix::from_element(1, 1, a);
    let g1 = (solve_are(&s(-2.0), 1, 1.0).unwrap().p[(0, 0)] - (2.0 - 3f64.sqrt())).abs();
    let g2 = (solve_are(&s(-3.0), 1, 1.0).unwrap().p[(0, 0)] - (3.0 - 2.0 * 2f64.sqrt())).abs();
    let elapsed = t0.elapsed();
    let pass = failures.is_empty() && g1 <= GOLDEN_ABS && g2 <= GOLDEN_ABS && elapsed < Duration::from_secs(10);
    report(
        3,
        pass,
        format!(
            "100 instances, failures {failures:?}, worst residual/max(1,‖P‖²) {worst:.1e}; golden errors {g1:.1e}, {g2:.1e}; {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_4_bisection_vs_brute_force() {
    let t0 = Instant::now();
    let mut r = rng(0xD1570);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for k in 0..50 {
        let n = r.random_range(1..=4);
        let a = random_hurwitz(&mut r, n);
        let got = distance_to_instability(&a, 1, DISTANCE_TOL).unwrap();
        let oracle = distance_oracle(&a);
        let err = (got - oracle).abs();
        worst = worst.max(err / oracle);
        if err > DISTANCE_TOL.max(DISTANCE_REL * oracle) {
            bad.push(k);
        }
    }
    let s = Matrix::from_element(1, 1, -1.0);
    let margin = gas_margin(&s, 1, 1.0, DISTANCE_TOL).unwrap();
    let node = |id: &str| {
        let sub = Subsystem::new(id, s.clone(), s.clone(), Matrix::zeros(0, 1), Matrix::zeros(0, 1), Matrix::zeros(1, 0)).unwrap();
        NodeSpec::new(&sub, s.clone(), None, Tuning::new(Matrix::identity(1, 1), 1.0, 1.0, 0.1)).unwrap()
    };
    let boundary = NetworkModel::new(
        vec![node("a"), node("b")],
        vec![Interconnection::new("b", "a", Matrix::from_element(1, 1, 1.0))],
    )
    .unwrap();
    let cert = certify_gas(&boundary, &CertifyOptions::default()).unwrap();
    let boundary_fails = margin <= 0.0 && cert.failing == vec!["a".to_string()];
    let elapsed = t0.elapsed();
    let pass = bad.is_empty() && boundary_fails && elapsed < Duration::from_secs(30);
    report(
        4,
        pass,
        format!(
            "50 matrices, out of tolerance {bad:?}, worst relative gap {worst:.1e}; boundary margin {margin:.1e}, certified {}; {elapsed:.2?}",
            cert.is_certified()
        ),
    );
}

#[test]
fn criterion_5_lemma2_equivalence() {
    let mut r = rng(0x1E20);
    let (mut checked, mut disagreements) = (0, 0);
    while checked < 200 {
        let n = r.random_range(1..=4);
        let a = random_hurwitz(&mut r, n);
        let nn = r.random_range(1..=3usize);
        let gamma = distance_to_instability(&a, nn, 1e-12).unwrap();
        let u: f64 = if r.random_bool(0.5) { r.random_range(0.0..0.95) } else { r.random_range(1.05..2.0) };
        let xi = u * gamma / (nn as f64).sqrt();
        let d = gamma - xi * (nn as f64).sqrt();
        if d.abs() <= LEMMA2_BAND * gamma.max(1.0) {
            continue;
        }
        checked += 1;
        let h = hamiltonian(&a, nn, xi * xi).unwrap();
        if is_hyperbolic(&h, default_eig_tol(&h).unwrap()).unwrap() != (d > 0.0) {
            disagreements += 1;
        }
    }
    report(5, disagreements == 0, format!("{checked} instances, {disagreements} disagreements"));
}

#[test]
fn criterion_6_projection_suite() {
    let mut r = rng(0x9706);
    let unit = |r: &mut ChaCha8Rng, n: usize| {
        let v = Vector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
        if v.norm() > 0.0 { v.normalize() } else { Vector::from_element(n, 1.0 / (n as f64).sqrt()) }
    };
    let radius = |tm: f64, eps0: f64, level: f64| tm * ((1.0 + level * eps0) / (1.0 + eps0)).sqrt();
    let (mut p1_bad, mut p2_bad, mut p2_worst) = (0, 0, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let n = r.random_range(1..=4);
        let (tm, eps0) = (r.random_range(0.1..5.0), r.random_range(0.01..1.0));
        let y = Vector::from_fn(n, |_, _| r.random_range(-10.0..10.0));
        // Property 1: strictly inside g < 0, output equals input exactly
        let inside = unit(&mut r, n) * (radius(tm, eps0, 0.0) * 0.999 * r.random_range(0.0..1.0f64).sqrt());
        if projection(&inside, &y, tm, eps0).unwrap() != y {
            p1_bad += 1;
        }
        // Property 2: θ̂ in g ≤ 1, θ* in g ≤ 0
        let theta_hat = unit(&mut r, n) * (radius(tm, eps0, 1.0) * r.random_range(0.0..1.0f64).sqrt());
        let theta_star = unit(&mut r, n) * (radius(tm, eps0, 0.0) * r.random_range(0.0..1.0f64).sqrt());
        let proj = projection(&theta_hat, &y, tm, eps0).unwrap();
        let inner = (&theta_hat - &theta_star).dot(&(proj - &y));
        p2_worst = p2_worst.max(inner);
        if inner > 0.0 {
            p2_bad += 1;
        }
    }
    // adversarial outward drive, Euler step at step·Γ·‖drive‖ = 0.01·θ_max
    let (tm, eps0, gamma) = (2.0, 0.1, 10.0);
    let bounds = ProjectionBounds { theta_max: tm, eps0 };
    let (p, bbar) = (Matrix::identity(2, 2), Matrix::from_row_slice(2, 1, &[1.0, 0.5]));
    let x_tilde = -Vector::from_row_slice(&[1.0, 0.5]);
    let step = 0.01 * tm / (gamma * 1.25 * 3.0);
    let mut theta = Matrix::zeros(2, 1);
    let mut g_max = f64::NEG_INFINITY;
    for _ in 0..100_000 {
        let dir = if theta.norm() > 0.0 { theta.column(0).normalize() } else { Vector::from_row_slice(&[1.0, 0.0]) };
        let x_bar = dir * 3.0;
        theta += update_projection(&x_tilde, &p, &bbar, &x_bar, gamma, &theta, bounds).unwrap() * step;
        g_max = g_max.max(g_convex(&theta.column(0).into_owned(), tm, eps0).unwrap());
    }
    let pass = p1_bad == 0 && p2_bad == 0 && g_max <= 1.0 + PROJECTION_SLACK;
    report(
        6,
        pass,
        format!(
            "Property 1 violations {p1_bad}/1000, Property 2 violations {p2_bad}/1000 (max inner product {p2_worst:.2e}), \
             max g over 1e5 Euler steps {g_max:.9}"
        ),
    );
}

#[test]
fn criterion_7_simulation_properties() {
    let loaded = load("toy_pair.json");
    let mut scenario = loaded.scenario().unwrap().clone();
    scenario.record_every = 1;
    let t0 = Instant::now();
    let sim = Simulator::new(&loaded.network, &scenario, Mode::Distributed, &CertifyOptions::default()).unwrap();
    let trace = sim.run().unwrap();
    let elapsed = t0.elapsed();
    let tol_v = V_TOL_REL * (1.0 + trace.v[0]);
    let worst_rise = trace.v.windows(2).skip(10).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let x_tilde = |k: usize| trace.nodes.iter().map(|n| n.x_tilde_norm[k].powi(2)).sum::<f64>().sqrt();
    let (xt0, xt_end) = (x_tilde(0), x_tilde(trace.len() - 1));
    let tracking = trace
        .nodes
        .iter()
        .map(|n| {
            let (y, r) = (n.y.last().unwrap(), n.reference.last().unwrap());
            (0..r.len()).map(|i| (y[i] - r[i]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let pass = trace.certified
        && !trace.diverged
        && (scenario.dt - 1e-3).abs() < 1e-15
        && worst_rise <= tol_v
        && xt_end <= X_TILDE_REL * xt0.max(1.0)
        && tracking <= TRACKING_ABS
        && elapsed < Duration::from_secs(60);
    report(
        7,
        pass,
        format!(
            "certified {}, {} steps; worst V rise {worst_rise:.1e} (tol {tol_v:.1e}); ‖x̃(T)‖ {xt_end:.1e}; max |y − r| {tracking:.1e}; {elapsed:.2?}",
            trace.certified,
            trace.len() - 1
        ),
    );
}

#[test]
fn criterion_8_determinism() {
    let bin = env!("CARGO_BIN_EXE_gascert");
    let dir = tempfile::tempdir().unwrap();
    let mut fixtures: Vec<String> = std::fs::read_dir(fixture(""))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    fixtures.sort();
    let mut runs = 0;
    let mut mismatches = Vec::new();
    for f in &fixtures {
        let cfg = fixture(f);
        let mut jobs: Vec<(String, Vec<String>)> = ["connective", "riccati", "smallgain"]
            .iter()
            .map(|c| (c.to_string(), vec![c.to_string(), cfg.display().to_string()]))
            .collect();
        let has_scenario = load_opt(f).map(|l| l.config.scenario.is_some()).unwrap_or(false);
        if has_scenario {
            for mode in ["dec", "dist"] {
                jobs.push((format!("simulate-{mode}"), vec!["simulate".into(), cfg.display().to_string(), "--mode".into(), mode.into()]));
            }
        }
        for (name, args) in jobs {
            let mut outputs = Vec::new();
            for rep in 0..2 {
                let csv = dir.path().join(format!("{f}-{name}-{rep}.csv"));
                let mut cmd = Command::new(bin);
                cmd.args(&args);
                if name.starts_with("simulate") {
                    cmd.arg("--out").arg(&csv);
                }
                let out = cmd.output().unwrap();
                let trace = std::fs::read(&csv).unwrap_or_default();
                outputs.push((out.status.code(), out.stdout, out.stderr, trace));
                runs += 1;
            }
            if outputs[0] != outputs[1] {
                mismatches.push(format!("{f}:{name}"));
            }
        }
    }
    report(
        8,
        mismatches.is_empty(),
        format!("{runs} runs over {} fixtures, mismatches {mismatches:?}", fixtures.len()),
    );
}

fn load_opt(name: &str) -> Option<Loaded> {
    config::load(&fixture(name)).ok()
}

#[test]
fn criterion_9_inequality_lemma() {
    let mut r = rng(0x5EED9);
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for _ in 0..500 {
        let (rows, cols) = (r.random_range(1..=6), r.random_range(1..=6));
        let sx = r.random_range(0.1..10.0);
        let sy = r.random_range(0.1..10.0);
        let x = Matrix::from_fn(rows, cols, |_, _| r.random_range(-sx..sx));
        let y = Matrix::from_fn(rows, cols, |_, _| r.random_range(-sy..sy));
        let s = x.transpose() * &x + y.transpose() * &y - x.transpose() * &y - y.transpose() * &x;
        let scale = (x.norm() + y.norm()).powi(2);
        let lo = symmetric_extremes(&s).unwrap().0 / scale;
        worst = worst.min(lo);
        if lo < -INEQUALITY_REL {
            bad += 1;
        }
    }
    report(9, bad == 0, format!("500 pairs, violations {bad}, min λ_min/scale {worst:.1e}"));
}
