//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::time::{Duration, Instant};

use bessel_trace::conservativeness::{
    classify_discrete, harmonic_growth, mixed_adapted_check, mixed_euclidean_check, Growth, Status,
};
use bessel_trace::continuum_form::{heat_mass, inequality_ratio, InequalityMode, TestFunction};
use bessel_trace::harmonic_extension::{det_mk, det_mk_direct};
use bessel_trace::lattice::SupportSpec;
use bessel_trace::markov_sim::{simulate, SimConfig};
use bessel_trace::spectral_semigroup::{
    assemble, decay_ratio, eig_low, heat_content, Boundary, DiscreteOperator,
};
use bessel_trace::trace_forms::{approx_trace_energy, finite_trace_energy, quadrature_crosscheck, trace_energy};
use bessel_trace::{LatticeFunction, MeasureSpec, QuadratureConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Check {
    Check { ok, detail: detail.into() }
}

fn random_vector(rng: &mut ChaCha8Rng, max_site: usize, len: usize) -> LatticeFunction {
    loop {
        let start = rng.random_range(1..=max_site - len + 1);
        let mut v = vec![0.0; start + len - 1];
        for x in &mut v[start - 1..] {
            *x = rng.random_range(-1.0..1.0);
        }
        let u = LatticeFunction::new(v).unwrap();
        if trace_energy(&u) > 0.0 {
            return u;
        }
    }
}

fn heat_kernel_normalisation() -> Check {
    let start = Instant::now();
    let q = QuadratureConfig::default();
    let grid = [0.1, 1.0, 10.0];
    let mut worst = 0.0_f64;
    for &t in &grid {
        for &x in &grid {
            worst = worst.max((heat_mass(t, x, &q).unwrap() - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("max |mass - 1| = {worst:.2e}, {elapsed:.2?}"),
    )
}

fn determinant_identity() -> Check {
    let lambdas: Vec<f64> = (-6..=2).map(|e| 10f64.powi(e)).collect();
    let mut worst = 0.0_f64;
    for k in 1..=10_000 {
        for &l in &lambdas {
            let a = det_mk(k, l).unwrap();
            let b = det_mk_direct(k, l).unwrap();
            worst = worst.max(((a - b) / a).abs());
        }
    }
    check(worst <= 1e-10, format!("max relative error {worst:.2e}"))
}

fn closed_form_vs_quadrature() -> Check {
    let q = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let len = rng.random_range(1..=8);
        let u = random_vector(&mut rng, 20, len);
        let lambda = if i % 2 == 0 { 0.1 } else { 1.0 };
        let (closed, quad) = quadrature_crosscheck(&u, lambda, SupportSpec::InfiniteDiscrete, &q).unwrap();
        worst = worst.max(((closed - quad) / closed).abs());
    }
    check(worst <= 1e-5, format!("max relative disagreement {worst:.2e} over 100 vectors"))
}

fn small_lambda_limit() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut vectors = vec![LatticeFunction::unit(1), LatticeFunction::indicator(&[1, 2])];
    for _ in 0..5 {
        vectors.push(random_vector(&mut rng, 30, 10));
    }
    let lambdas: Vec<f64> = (2..=8).map(|e| 10f64.powi(-e)).collect();
    let mut ok = true;
    let mut worst_final = 0.0_f64;
    for u in &vectors {
        let qv = trace_energy(u);
        let energies: Vec<f64> = lambdas
            .iter()
            .map(|&l| approx_trace_energy(u, l, SupportSpec::InfiniteDiscrete).unwrap())
            .collect();
        let gaps: Vec<f64> = energies.iter().map(|e| (e - qv).abs()).collect();
        // lambda decreases along the grid: gaps shrink, energies decrease.
        ok &= gaps.windows(2).all(|w| w[1] <= w[0]);
        ok &= energies.windows(2).all(|w| w[1] <= w[0]);
        let rel = gaps[gaps.len() - 1] / qv;
        worst_final = worst_final.max(rel);
        ok &= rel < 1e-6;
    }
    check(ok, format!("{} vectors, max relative gap at 1e-8: {worst_final:.2e}", vectors.len()))
}

fn conservativeness_matrix() -> Check {
    let start = Instant::now();
    let horizon = 1_000_000;
    let cases = [
        (MeasureSpec::constant(1.0), Status::Conservative, Growth::Unbounded),
        (MeasureSpec::exponential(1.0), Status::NotConservative, Growth::Bounded),
        (MeasureSpec::sparse_dyadic(), Status::NotConservative, Growth::Bounded),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, status, growth) in cases {
        let v = classify_discrete(&m, horizon).unwrap();
        let g = harmonic_growth(&m, 1.0, horizon, 1e12).unwrap();
        ok &= v.status == status && g.verdict == growth;
        parts.push(format!("{}: {:?}/{:?}", m.name(), v.status, g.verdict));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    check(ok, format!("{}, {elapsed:.2?}", parts.join(", ")))
}

fn finite_set_killing() -> Check {
    let mut ok = true;
    for n in 1..=20 {
        ok &= finite_trace_energy(&LatticeFunction::constant(1.0, n), n).unwrap() == n as f64;
    }
    let op = assemble(
        &MeasureSpec::constant(1.0),
        SupportSpec::finite(3).unwrap(),
        3,
        Boundary::Absorbing,
        None,
    )
    .unwrap();
    let h = heat_content(&op, 0.1, 1).unwrap();
    ok &= h < 1.0;
    check(ok, format!("E[1] = N for N <= 20; heat content (N = 3, t = 0.1) = {h:.6}"))
}

fn absorbing(m: &MeasureSpec, n: usize) -> DiscreteOperator {
    assemble(m, SupportSpec::InfiniteDiscrete, n, Boundary::Absorbing, None).unwrap()
}

fn simulation_vs_semigroup() -> Check {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    // Absorption on reaching site N + 1 is the absorbing truncation at N;
    // chain time T corresponds to semigroup time T/2.
    for (m, n, must_lose_mass) in [
        (MeasureSpec::constant(1.0), 800, false),
        (MeasureSpec::sparse_dyadic(), 512, true),
    ] {
        let cfg = SimConfig {
            horizon: 1.0,
            trajectories: 10_000,
            site_cap: n + 1,
            seed: 20_241_016,
            ..SimConfig::default()
        };
        let r = simulate(&m, &cfg).unwrap();
        let hc = heat_content(&absorbing(&m, n), 0.5, 1).unwrap();
        let hc_half = heat_content(&absorbing(&m, n / 2), 0.5, 1).unwrap();
        let drift = (hc - hc_half).abs();
        let se = (r.standard_error.powi(2) + drift * drift).sqrt();
        let diff = (r.survival_fraction - hc).abs();
        ok &= diff <= 3.0 * se;
        if must_lose_mass {
            ok &= 1.0 - r.survival_fraction > 3.0 * se;
        }
        parts.push(format!(
            "{}: survival {:.4} vs heat content {:.6} (combined se {:.2e})",
            m.name(),
            r.survival_fraction,
            hc,
            se
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    check(ok, format!("{}, {elapsed:.2?}", parts.join("; ")))
}

fn mixed_criteria() -> Check {
    let horizon = 100_000;
    let power = mixed_euclidean_check(&MeasureSpec::power(2.0), horizon).unwrap();
    let constant_e = mixed_euclidean_check(&MeasureSpec::constant(1.0), horizon).unwrap();
    let constant_a = mixed_adapted_check(&MeasureSpec::constant(1.0), horizon).unwrap();
    let expo_e = mixed_euclidean_check(&MeasureSpec::exponential(1.0), horizon).unwrap();
    let expo_a = mixed_adapted_check(&MeasureSpec::exponential(1.0), horizon).unwrap();
    let ok = power.status == Status::Conservative
        && (power.jump_bound - 1.0).abs() < 1e-12
        && constant_e.status != Status::Conservative
        && constant_a.status == Status::Conservative
        && constant_a.max_jump <= 1.0 + 1e-12
        && expo_e.status == Status::NotConservative
        && expo_a.status == Status::NotConservative;
    check(
        ok,
        format!(
            "power(2) sup k^2/a_k = {}, volume surrogate {:.3e}; constant(1) Euclidean {:?}, adapted {:?} (max jump {}); exponential(1) {:?}",
            power.jump_bound, power.volume_liminf, constant_e.status, constant_a.status, constant_a.max_jump, expo_e.status
        ),
    )
}

fn decay_scan(n: usize) -> (f64, f64) {
    let m = MeasureSpec::constant(1.0);
    let op = absorbing(&m, n);
    let eig = eig_low(&op, 10)
        .unwrap()
        .iter()
        .map(|p| decay_ratio(&p.vector, &op).unwrap())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut random = 0.0_f64;
    for _ in 0..1000 {
        let start = rng.random_range(1..=100);
        let len = rng.random_range(1..=50);
        let mut u = vec![0.0; n];
        for x in &mut u[start - 1..start - 1 + len] {
            *x = rng.random_range(-1.0..1.0);
        }
        random = random.max(decay_ratio(&u, &op).unwrap());
    }
    (eig, random)
}

fn decay_property() -> Check {
    let (e1, r1) = decay_scan(500);
    let (e2, r2) = decay_scan(1000);
    let stable = |a: f64, b: f64| (b - a).abs() <= 0.1 * a;
    let ok = e1.is_finite() && r1.is_finite() && stable(e1, e2) && stable(r1, r2) && stable(e1.max(r1), e2.max(r2));
    check(
        ok,
        format!("eigenvectors {e1:.4} -> {e2:.4}, random vectors {r1:.4} -> {r2:.4} (N = 500 -> 1000)"),
    )
}

fn spot_checks() -> Check {
    let mut ok = true;
    for n in 1..=10usize {
        let nf = n as f64;
        ok &= trace_energy(&LatticeFunction::unit(n)) == 2.0 * nf * nf;
        let pair = trace_energy(&LatticeFunction::indicator(&[n, n + 1]));
        let next = trace_energy(&LatticeFunction::unit(n + 1));
        ok &= next == 2.0 * (nf + 1.0).powi(2);
        ok &= pair == 2.0 * nf * nf + 2.0 * nf + 2.0;
        ok &= pair != trace_energy(&LatticeFunction::unit(n)) + next;
    }
    for (m, alpha) in [
        (MeasureSpec::constant(1.0), 1.0),
        (MeasureSpec::exponential(0.5), 0.3),
        (MeasureSpec::sparse_dyadic(), 2.0),
    ] {
        let g = harmonic_growth(&m, alpha, 1000, 1e12).unwrap();
        ok &= g.values[0] == 1.0 && g.values[1] == 1.0 + alpha * m.weight(1);
    }
    check(ok, "Q[e_N] = 2N^2, Q[1_{N,N+1}] = 2N^2+2N+2, Q[e_{N+1}] = 2(N+1)^2, u_2 = (1 + alpha a_1) u_1")
}

fn inequality_ratios() -> Check {
    let q = QuadratureConfig::default();
    let family = vec![
        TestFunction::exponential(1.0),
        TestFunction::exponential(3.0),
        TestFunction::gaussian(0.5),
        TestFunction::hat(0.5, 1.0, 2.0).unwrap(),
        TestFunction::plateau(0.2, 0.5, 1.5, 3.0).unwrap(),
        TestFunction::sampled(vec![0.0, 0.5, 1.0, 2.0], vec![1.0, 0.8, 0.3, 0.0]).unwrap(),
    ];
    let modes = [
        InequalityMode::Sobolev { p: 3.0 },
        InequalityMode::Sobolev { p: 4.0 },
        InequalityMode::Sobolev { p: 6.0 },
        InequalityMode::Strauss { sigma: 0.5 },
        InequalityMode::Strauss { sigma: 0.75 },
        InequalityMode::Strauss { sigma: 1.0 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ok = true;
    let mut worst = 0.0_f64;
    let mut max_ratio = 0.0_f64;
    for f in &family {
        for &mode in &modes {
            let base = inequality_ratio(f, mode, &q).unwrap();
            ok &= base.is_finite() && base > 0.0;
            max_ratio = max_ratio.max(base);
            for _ in 0..3 {
                let c = 10f64.powf(rng.random_range(-3.0..3.0)) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let r = inequality_ratio(&f.scaled(c), mode, &q).unwrap();
                let rel = ((r - base) / base).abs();
                worst = worst.max(rel);
                ok &= rel <= 1e-12;
            }
        }
    }
    check(
        ok,
        format!(
            "{} functions x {} modes, max ratio {max_ratio:.4}, max scale deviation {worst:.1e}",
            family.len(),
            modes.len()
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("heat-kernel normalisation", heat_kernel_normalisation),
        ("determinant identity", determinant_identity),
        ("closed form vs quadrature", closed_form_vs_quadrature),
        ("small-lambda limit", small_lambda_limit),
        ("conservativeness matrix", conservativeness_matrix),
        ("finite-set killing", finite_set_killing),
        ("simulation vs semigroup", simulation_vs_semigroup),
        ("mixed-support criteria", mixed_criteria),
        ("decay property", decay_property),
        ("spot checks", spot_checks),
        ("inequality ratios", inequality_ratios),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let c = match std::panic::catch_unwind(f) {
            Ok(c) => c,
            Err(_) => check(false, "panicked"),
        };
        if !c.ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  {}",
            i + 1,
            name,
            if c.ok { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
