//! Trace energies: the limit form `Q[u] = sum k(k+1) (u_{k+1} - u_k)^2`,
//! its finite and mixed variants, the approximating forms `E_lambda` and
//! the generator of the trace chain.

use serde::{Deserialize, Serialize};

use crate::continuum_form::{unit_interval_integrals, TestFunction};
use crate::error::{Error, Result};
use crate::harmonic_extension::{extend, extend_mixed, PiecewiseBesselSolution};
use crate::lattice::{LatticeFunction, SupportSpec};
use crate::measure::MeasureSpec;
use crate::quadrature::{integrate_with_breaks, QuadratureConfig};
use crate::special_fn::{bessel_half_scaled, BesselKind, BesselOrder};

/// Edge weight `b(k, j) = kj/2` for neighbours, 0 otherwise.
pub fn edge_weight(k: usize, j: usize) -> f64 {
    if k.abs_diff(j) == 1 {
        (k * j) as f64 / 2.0
    } else {
        0.0
    }
}

/// `Q[u] = sum_k k(k+1) (u_{k+1} - u_k)^2`.
pub fn trace_energy(u: &LatticeFunction) -> f64 {
    (1..=u.support_max())
        .map(|k| {
            let d = u.get(k + 1) - u.get(k);
            (k * (k + 1)) as f64 * d * d
        })
        .sum()
}

/// `sum_k sum_{j ~ k} b(k, j) (u_k - u_j)^2`; equal to [`trace_energy`].
pub fn trace_energy_double_sum(u: &LatticeFunction) -> f64 {
    let top = u.support_max();
    let mut total = 0.0;
    for k in 1..=top + 1 {
        for j in [k - 1, k + 1] {
            if j >= 1 {
                let d = u.get(k) - u.get(j);
                total += edge_weight(k, j) * d * d;
            }
        }
    }
    total
}

/// Trace energy on `{1, ..., N}`: `sum_{k<N} k(k+1) (u_{k+1} - u_k)^2 + N u_N^2`.
pub fn finite_trace_energy(u: &LatticeFunction, n: usize) -> Result<f64> {
    check_finite_support(u, n)?;
    let inner: f64 = (1..n)
        .map(|k| {
            let d = u.get(k + 1) - u.get(k);
            (k * (k + 1)) as f64 * d * d
        })
        .sum();
    Ok(inner + n as f64 * u.get(n).powi(2))
}

fn check_finite_support(u: &LatticeFunction, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("finite support needs N >= 1"));
    }
    if u.support_max() > n {
        return Err(Error::domain(format!(
            "data at site {} lies outside the support 1..{n}",
            u.support_max()
        )));
    }
    Ok(())
}

/// Approximating form `E_lambda[u] = E_lambda[P_lambda u]` on discrete
/// supports. The infinite case uses the closed form; the finite case the
/// boundary terms of the extension including its decaying tail.
pub fn approx_trace_energy(u: &LatticeFunction, lambda: f64, support: SupportSpec) -> Result<f64> {
    match support {
        SupportSpec::InfiniteDiscrete => approx_closed_form(u, lambda),
        SupportSpec::FiniteDiscrete { n } => {
            check_finite_support(u, n)?;
            extend(u, lambda, support)?.node_energy()
        }
        SupportSpec::Mixed => Err(Error::domain(
            "mixed support needs the continuum part; use approx_mixed_trace_energy",
        )),
    }
}

fn approx_closed_form(u: &LatticeFunction, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let s = (2.0 * lambda).sqrt();
    if s > 700.0 {
        return Err(Error::domain(format!("lambda = {lambda} is too large for double precision")));
    }
    let coth = s / s.tanh();
    let csch = s / s.sinh();
    let mut total = 0.0;
    for k in 1..=u.support_max() {
        let (uk, un) = (u.get(k), u.get(k + 1));
        let (kf, nf) = (k as f64, k as f64 + 1.0);
        total += -2.0 * uk * un * kf * nf * csch + un * un * (nf * nf * coth - nf) + uk * uk * (kf * kf * coth + kf);
    }
    let u1 = u.get(1);
    if u1 != 0.0 {
        let ratio = bessel_half_scaled(BesselKind::I, BesselOrder::ThreeHalves, s)?
            / bessel_half_scaled(BesselKind::I, BesselOrder::Half, s)?;
        total += s * u1 * u1 * ratio;
    }
    Ok(total)
}

/// `E_lambda` on the mixed support `(0,1] ∪ N`:
/// `int_0^1 (u')^2 x^2 dx + lambda int_0^1 u^2 2x^2 dx` plus lattice boundary terms.
pub fn approx_mixed_trace_energy(f: &MixedFunction, lambda: f64, q: &QuadratureConfig) -> Result<f64> {
    let sol = extend_mixed(f, lambda)?;
    let (e, n) = unit_interval_integrals(&f.psi, q)?;
    Ok(e + 2.0 * lambda * n + sol.node_energy()?)
}

/// `int (P')^2 x^2 + lambda int P^2 2 x^2` over the extension by adaptive
/// quadrature.
pub fn extension_energy_by_quadrature(sol: &PiecewiseBesselSolution, q: &QuadratureConfig) -> Result<f64> {
    let lambda = sol.lambda();
    let (lo, hi) = sol.integration_range();
    let mut breaks: Vec<f64> = vec![lo];
    let mut k = lo.floor() + 1.0;
    while k < hi {
        breaks.push(k);
        k += 1.0;
    }
    breaks.push(hi);
    let mut total = integrate_with_breaks(
        |x| {
            if x <= 0.0 {
                return 0.0;
            }
            let p = sol.evaluate(x).unwrap_or(0.0);
            let dp = sol.derivative(x).unwrap_or(0.0);
            (dp * dp + 2.0 * lambda * p * p) * x * x
        },
        &breaks,
        q,
    )?
    .value;
    if lo > 0.0 {
        total += integrate_with_breaks(
            |x| {
                let p = sol.evaluate(x).unwrap_or(0.0);
                let dp = sol.derivative(x).unwrap_or(0.0);
                (dp * dp + 2.0 * lambda * p * p) * x * x
            },
            &[0.0, lo],
            q,
        )?
        .value;
    }
    Ok(total)
}

/// `(closed form, quadrature)` values of `E_lambda[u]` on a discrete support.
pub fn quadrature_crosscheck(
    u: &LatticeFunction,
    lambda: f64,
    support: SupportSpec,
    q: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let closed = approx_trace_energy(u, lambda, support)?;
    let sol = extend(u, lambda, support)?;
    Ok((closed, extension_energy_by_quadrature(&sol, q)?))
}

/// `(closed form, quadrature)` values of `E_lambda` on the mixed support.
pub fn mixed_quadrature_crosscheck(f: &MixedFunction, lambda: f64, q: &QuadratureConfig) -> Result<(f64, f64)> {
    let closed = approx_mixed_trace_energy(f, lambda, q)?;
    let sol = extend_mixed(f, lambda)?;
    Ok((closed, extension_energy_by_quadrature(&sol, q)?))
}

/// A function on `[0,1] ∪ N`: `psi` on the interval and lattice values,
/// glued by `psi(1) = u_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedFunction {
    pub psi: TestFunction,
    pub lattice: LatticeFunction,
}

impl MixedFunction {
    pub fn new(psi: TestFunction, lattice: LatticeFunction) -> Result<Self> {
        let f = Self { psi, lattice };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        self.psi.validate()?;
        let (p1, u1) = (self.psi.value(1.0), self.lattice.get(1));
        if (p1 - u1).abs() > 1e-12 * (1.0 + u1.abs()) {
            return Err(Error::domain(format!("junction mismatch: psi(1) = {p1} but u_1 = {u1}")));
        }
        Ok(())
    }

    pub fn continuum(&self) -> &TestFunction {
        &self.psi
    }

    pub fn lattice(&self) -> &LatticeFunction {
        &self.lattice
    }
}

/// `int_0^1 (psi')^2 x^2 dx + Q[u]`.
pub fn mixed_trace_energy(f: &MixedFunction, q: &QuadratureConfig) -> Result<f64> {
    f.validate()?;
    let (e, _) = unit_interval_integrals(&f.psi, q)?;
    Ok(e + trace_energy(&f.lattice))
}

/// `(L u)(k) = (1/a_k) sum_j b(k, j) (u_k - u_j)`.
pub fn generator_apply(m: &MeasureSpec, u: &LatticeFunction, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("the generator acts on sites k >= 1"));
    }
    m.check_range(k)?;
    let uk = u.get(k);
    let mut flux = edge_weight(k, k + 1) * (uk - u.get(k + 1));
    if k > 1 {
        flux += edge_weight(k, k - 1) * (uk - u.get(k - 1));
    }
    Ok(flux * (-m.ln_weight(k)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lf(v: &[f64]) -> LatticeFunction {
        LatticeFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn edge_weights() {
        assert_eq!(edge_weight(2, 3), 3.0);
        assert_eq!(edge_weight(3, 2), 3.0);
        assert_eq!(edge_weight(2, 4), 0.0);
        assert_eq!(edge_weight(2, 2), 0.0);
    }

    #[test]
    fn limit_form_values() {
        assert_eq!(trace_energy(&LatticeFunction::unit(1)), 2.0);
        for n in 1..=10 {
            let e = trace_energy(&LatticeFunction::unit(n));
            assert_eq!(e, 2.0 * (n * n) as f64);
            assert_eq!(e, trace_energy_double_sum(&LatticeFunction::unit(n)));
        }
        // constant on 1..K then zero: only the edge (K, K+1)
        assert_eq!(trace_energy(&LatticeFunction::constant(1.0, 6)), 42.0);
    }

    #[test]
    fn finite_form_values() {
        for n in 1..=20 {
            assert_eq!(finite_trace_energy(&LatticeFunction::constant(1.0, n), n).unwrap(), n as f64);
        }
        assert_eq!(finite_trace_energy(&LatticeFunction::unit(1), 3).unwrap(), 2.0);
        assert_eq!(finite_trace_energy(&LatticeFunction::unit(3), 3).unwrap(), 9.0);
        assert!(finite_trace_energy(&LatticeFunction::unit(4), 3).unwrap_err().is_domain());
    }

    #[test]
    fn approximating_form_for_unit_data() {
        let e = approx_trace_energy(&LatticeFunction::unit(1), 0.5, SupportSpec::InfiniteDiscrete).unwrap();
        assert!((e - 2.626070).abs() < 1e-5);
        let tiny = approx_trace_energy(&LatticeFunction::unit(1), 1e-8, SupportSpec::InfiniteDiscrete).unwrap();
        assert!((tiny - 2.0).abs() < 1e-6);
        assert_eq!(approx_trace_energy(&LatticeFunction::zeros(3), 0.4, SupportSpec::InfiniteDiscrete).unwrap(), 0.0);
        assert!(approx_trace_energy(&LatticeFunction::unit(1), 0.0, SupportSpec::InfiniteDiscrete).is_err());
    }

    #[test]
    fn closed_form_equals_extension_boundary_terms() {
        let u = lf(&[0.4, -1.0, 0.0, 2.5]);
        for lambda in [1e-3, 0.5, 7.0] {
            let closed = approx_trace_energy(&u, lambda, SupportSpec::InfiniteDiscrete).unwrap();
            let nodes = extend(&u, lambda, SupportSpec::InfiniteDiscrete).unwrap().node_energy().unwrap();
            assert!((closed - nodes).abs() < 1e-10 * closed);
        }
    }

    #[test]
    fn crosscheck_examples() {
        let q = QuadratureConfig::default();
        let (c, n) = quadrature_crosscheck(&LatticeFunction::unit(1), 0.5, SupportSpec::InfiniteDiscrete, &q).unwrap();
        assert!((c - 2.626070).abs() < 1e-5 && (c - n).abs() < 1e-6 * c);
        let (c, n) = quadrature_crosscheck(&lf(&[1.0, 1.0]), 1.0, SupportSpec::InfiniteDiscrete, &q).unwrap();
        assert!((c - n).abs() < 1e-6 * c);
        let (c, n) = quadrature_crosscheck(&LatticeFunction::zeros(2), 1.0, SupportSpec::InfiniteDiscrete, &q).unwrap();
        assert_eq!((c, n), (0.0, 0.0));
        let (c, n) = quadrature_crosscheck(&lf(&[1.0, -0.5, 2.0]), 0.3, SupportSpec::finite(3).unwrap(), &q).unwrap();
        assert!((c - n).abs() < 1e-6 * c);
    }

    #[test]
    fn finite_approx_form_converges_to_killed_form() {
        // The decaying tail gives P'(N+)/P(N) = -1/N - sqrt(2 lambda), so the
        // gap to the killed form is N^2 u_N^2 sqrt(2 lambda) to leading order.
        let u = lf(&[1.0, 0.5, -0.25]);
        let limit = finite_trace_energy(&u, 3).unwrap();
        for lambda in [1e-7, 1e-9, 1e-11] {
            let e = approx_trace_energy(&u, lambda, SupportSpec::finite(3).unwrap()).unwrap();
            let lead = 9.0 * 0.0625 * (2.0f64 * lambda).sqrt();
            assert!(((e - limit) / lead - 1.0).abs() < 1e-2, "lambda={lambda}");
        }
        let one = approx_trace_energy(&LatticeFunction::constant(1.0, 5), 1e-12, SupportSpec::finite(5).unwrap()).unwrap();
        assert!((one - 5.0).abs() < 1e-4);
    }

    #[test]
    fn mixed_energies() {
        let q = QuadratureConfig::default();
        let f = MixedFunction::new(TestFunction::polynomial(vec![0.0, 1.0]), LatticeFunction::unit(1)).unwrap();
        assert!((mixed_trace_energy(&f, &q).unwrap() - (1.0 / 3.0 + 2.0)).abs() < 1e-12);
        let zero = MixedFunction::new(TestFunction::polynomial(vec![0.0]), LatticeFunction::zeros(2)).unwrap();
        assert_eq!(mixed_trace_energy(&zero, &q).unwrap(), 0.0);
        let constant = MixedFunction::new(TestFunction::polynomial(vec![1.0]), LatticeFunction::constant(1.0, 4)).unwrap();
        assert_eq!(mixed_trace_energy(&constant, &q).unwrap(), 20.0);
        assert!(MixedFunction::new(TestFunction::polynomial(vec![0.0, 2.0]), LatticeFunction::unit(1))
            .unwrap_err()
            .is_domain());

        let (c, n) = mixed_quadrature_crosscheck(&f, 0.5, &q).unwrap();
        assert!((c - n).abs() < 1e-6 * c);
        let small = approx_mixed_trace_energy(&f, 1e-9, &q).unwrap();
        assert!((small - 7.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn generator_examples() {
        let one = MeasureSpec::constant(1.0);
        let e2 = LatticeFunction::unit(2);
        assert_eq!(generator_apply(&one, &e2, 2).unwrap(), 4.0);
        assert_eq!(generator_apply(&one, &e2, 1).unwrap(), -1.0);
        let c = LatticeFunction::constant(3.0, 50);
        for k in 1..50 {
            assert_eq!(generator_apply(&MeasureSpec::power(1.5), &c, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn lambda_monotone_and_convergent() {
        let u = lf(&[1.0, 0.3, -0.7, 0.2]);
        let q = trace_energy(&u);
        let mut last_gap = f64::INFINITY;
        let mut last = f64::INFINITY;
        for e in (2..=8).map(|p| 10f64.powi(-p)) {
            let v = approx_trace_energy(&u, e, SupportSpec::InfiniteDiscrete).unwrap();
            assert!(v <= last);
            let gap = (v - q).abs();
            assert!(gap < last_gap);
            last_gap = gap;
            last = v;
        }
        assert!(last_gap < 1e-6 * q);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn crosscheck_random(v in prop::collection::vec(-1.0f64..1.0, 1..6), lambda in 0.05f64..2.0) {
            let u = LatticeFunction::new(v).unwrap();
            prop_assume!(!u.is_zero());
            let (c, n) = quadrature_crosscheck(&u, lambda, SupportSpec::InfiniteDiscrete, &QuadratureConfig::default()).unwrap();
            prop_assert!((c - n).abs() <= 1e-5 * c);
        }

        #[test]
        fn polarization_symmetric(a in prop::collection::vec(-2.0f64..2.0, 1..8), b in prop::collection::vec(-2.0f64..2.0, 1..8), lambda in 0.01f64..3.0) {
            let (u, v) = (LatticeFunction::new(a).unwrap(), LatticeFunction::new(b).unwrap());
            let e = |w: &LatticeFunction| approx_trace_energy(w, lambda, SupportSpec::InfiniteDiscrete).unwrap();
            let uv = (e(&u.add(&v)) - e(&u.add(&v.scaled(-1.0)))) / 4.0;
            let vu = (e(&v.add(&u)) - e(&v.add(&u.scaled(-1.0)))) / 4.0;
            prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + e(&u) + e(&v)));
            let quv = (trace_energy(&u.add(&v)) - trace_energy(&u.add(&v.scaled(-1.0)))) / 4.0;
            let qvu = (trace_energy(&v.add(&u)) - trace_energy(&v.add(&u.scaled(-1.0)))) / 4.0;
            prop_assert!((quv - qvu).abs() <= 1e-12 * (1.0 + trace_energy(&u) + trace_energy(&v)));
        }
    }
}
