//! Truncated trace operators and their heat semigroups.
//!
//! Every operator here is a weighted Jacobi pencil `(A, M)`: `A` is the
//! symmetric tridiagonal energy matrix (edge conductances plus killing),
//! `M` a positive diagonal mass. The semigroup is `exp(-t M^{-1} A)`.
//!
//! `exp(-X)` is evaluated by a contour integral on a cotangent contour
//! around the negative real axis, i.e. a rational approximation with
//! error `~ e^{-1.36 n}`, uniformly on `[0, inf)`. Each node needs one
//! complex tridiagonal solve. Because all eigenvalues of the pencil are
//! real and nonnegative, the accuracy does not depend on `||X||`, which
//! matters here: masses like `2^{-k}` make the spectrum span hundreds of
//! orders of magnitude.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SupportSpec;
use crate::measure::{MeasureSpec, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Paths reaching `N + 1` are killed (the edge to `N + 1` becomes killing).
    #[default]
    Absorbing,
    /// The edge to `N + 1` is dropped.
    Reflecting,
}

/// Mesh on `(0, 1]` for the continuum part of a mixed operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedMesh {
    nodes: Vec<f64>,
}

impl MixedMesh {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::domain("a mesh needs at least two nodes"));
        }
        if !(nodes[0] > 0.0) {
            return Err(Error::domain("mesh nodes must be positive"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("mesh nodes must be strictly increasing"));
        }
        if nodes[nodes.len() - 1] != 1.0 {
            return Err(Error::domain("the last mesh node must be 1"));
        }
        Ok(Self { nodes })
    }

    /// Nodes `x_min^{1 - j/elements}`, `j = 0..=elements`.
    pub fn geometric(elements: usize, x_min: f64) -> Result<Self> {
        if elements == 0 || !(x_min > 0.0 && x_min < 1.0) {
            return Err(Error::domain("geometric mesh needs elements >= 1 and 0 < x_min < 1"));
        }
        let mut nodes: Vec<f64> = (0..=elements)
            .map(|j| x_min.powf(1.0 - j as f64 / elements as f64))
            .collect();
        nodes[elements] = 1.0;
        Self::new(nodes)
    }

    /// Nodes `j/elements`, `j = 1..=elements`.
    pub fn uniform(elements: usize) -> Result<Self> {
        if elements < 1 {
            return Err(Error::domain("uniform mesh needs at least one element"));
        }
        Self::new((1..=elements).map(|j| j as f64 / elements as f64).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }
}

impl TryFrom<Vec<f64>> for MixedMesh {
    type Error = Error;
    fn try_from(nodes: Vec<f64>) -> Result<Self> {
        Self::new(nodes)
    }
}

impl From<MixedMesh> for Vec<f64> {
    fn from(m: MixedMesh) -> Self {
        m.nodes
    }
}

/// A truncated trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    /// Conductance between dof `i` and `i + 1`.
    edges: Vec<f64>,
    killing: Vec<f64>,
    mass: Vec<f64>,
    boundary: Boundary,
    /// Dof index of lattice site 1.
    offset: usize,
    measure: MeasureSpec,
    support: SupportSpec,
}

/// Builds the truncated operator on sites `1..=n` (plus the mesh nodes in
/// the mixed case).
pub fn assemble(
    m: &MeasureSpec,
    support: SupportSpec,
    n: usize,
    bc: Boundary,
    mesh: Option<&MixedMesh>,
) -> Result<DiscreteOperator> {
    m.validate()?;
    support.validate()?;
    if n < 3 {
        return Err(Error::domain("truncation needs N >= 3"));
    }
    m.check_range(n)?;
    let is_mixed = matches!(support, SupportSpec::Mixed);
    if is_mixed != mesh.is_some() {
        return Err(Error::domain("a mesh is required exactly for mixed support"));
    }
    let n = match support {
        SupportSpec::FiniteDiscrete { n: sn } => {
            if sn < 3 {
                return Err(Error::domain("truncation needs N >= 3"));
            }
            sn
        }
        _ => n,
    };

    let mut edges = Vec::new();
    let mut mass = Vec::new();
    if let Some(mesh) = mesh {
        let x = mesh.nodes();
        // Lumped mass: int x^2 over the dual cell; the first cell reaches 0.
        let cube = |a: f64, b: f64| (b.powi(3) - a.powi(3)) / 3.0;
        for i in 0..x.len() {
            let lo = if i == 0 { 0.0 } else { 0.5 * (x[i - 1] + x[i]) };
            let hi = if i + 1 == x.len() { 1.0 } else { 0.5 * (x[i] + x[i + 1]) };
            mass.push(cube(lo, hi));
        }
        for w in x.windows(2) {
            let h = w[1] - w[0];
            edges.push(cube(w[0], w[1]) / (h * h));
        }
        let last = mass.len() - 1;
        mass[last] += m.weight(1);
    } else {
        mass.push(m.weight(1));
    }
    let offset = mass.len() - 1;
    for k in 2..=n {
        mass.push(m.weight(k));
        edges.push(((k - 1) * k) as f64);
    }
    if let Some(k) = mass.iter().position(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::domain(format!(
            "mass at dof {k} is {}; the truncation is too deep for this family",
            mass[k]
        )));
    }
    let mut killing = vec![0.0; mass.len()];
    let last = killing.len() - 1;
    match support {
        SupportSpec::FiniteDiscrete { .. } => killing[last] = n as f64,
        _ if bc == Boundary::Absorbing => killing[last] = (n * (n + 1)) as f64,
        _ => {}
    }
    Ok(DiscreteOperator {
        edges,
        killing,
        mass,
        boundary: bc,
        offset,
        measure: m.clone(),
        support,
    })
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Largest lattice site represented.
    pub fn sites(&self) -> usize {
        self.dim() - self.offset
    }

    /// Dof index of lattice site `k`.
    pub fn site_index(&self, k: usize) -> Result<usize> {
        if k == 0 || k > self.sites() {
            return Err(Error::domain(format!("site {k} outside 1..={}", self.sites())));
        }
        Ok(self.offset + k - 1)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn killing(&self) -> &[f64] {
        &self.killing
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.measure
    }

    pub fn support(&self) -> SupportSpec {
        self.support
    }

    /// Number of continuum (mesh) dofs before site 1; zero for discrete supports.
    pub fn mesh_dofs(&self) -> usize {
        self.offset
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let left = if i > 0 { self.edges[i - 1] } else { 0.0 };
                let right = self.edges.get(i).copied().unwrap_or(0.0);
                left + right + self.killing[i]
            })
            .collect()
    }

    /// Dense energy matrix; meant for small operators.
    pub fn dense_energy(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let d = self.diagonal();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = d[i];
            if i + 1 < n {
                a[i][i + 1] = -self.edges[i];
                a[i + 1][i] = -self.edges[i];
            }
        }
        a
    }

    /// `A u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let n = self.dim();
        Ok((0..n)
            .map(|i| {
                let mut r = self.killing[i] * u[i];
                if i > 0 {
                    r += self.edges[i - 1] * (u[i] - u[i - 1]);
                }
                if i + 1 < n {
                    r += self.edges[i] * (u[i] - u[i + 1]);
                }
                r
            })
            .collect())
    }

    /// `u^T A u`, summed edge by edge (no cancellation).
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        let edges: f64 = self.edges.iter().zip(u.windows(2)).map(|(w, p)| w * (p[1] - p[0]).powi(2)).sum();
        let kill: f64 = self.killing.iter().zip(u).map(|(k, x)| k * x * x).sum();
        Ok(edges + kill)
    }

    /// `sum M_i u_i v_i`.
    pub fn mass_inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        Ok(self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum())
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Solves `(z M + t A) x = rhs`. Pivots are carried as their excess over
    /// the next conductance, which keeps the recurrence free of cancellation
    /// when `|z| M` is negligible against the conductances.
    fn shifted_solve(&self, z: Complex64, t: f64, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        let mut excess = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mut r = z * self.mass[i] + t * self.killing[i];
            let mut rhs_i = rhs[i];
            if i > 0 {
                let wl = t * self.edges[i - 1];
                let p_prev: Complex64 = pivots[i - 1];
                r += wl * excess / p_prev;
                rhs_i += wl * g[i - 1] / p_prev;
            }
            let wr = if i + 1 < n { t * self.edges[i] } else { 0.0 };
            let mut p = r + wr;
            if p == Complex64::new(0.0, 0.0) {
                p = Complex64::new(f64::MIN_POSITIVE, 0.0);
            }
            excess = r;
            pivots.push(p);
            g.push(rhs_i);
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut v = g[i];
            if i + 1 < n {
                v += t * self.edges[i] * x[i + 1];
            }
            x[i] = v / pivots[i];
        }
        x
    }

    /// Number of eigenvalues of the pencil below `theta` (Sylvester inertia).
    fn count_below(&self, theta: f64) -> usize {
        let n = self.dim();
        let mut count = 0;
        let mut excess = 0.0;
        let mut prev_pivot = 1.0;
        for i in 0..n {
            let mut r = self.killing[i] - theta * self.mass[i];
            if i > 0 {
                r += self.edges[i - 1] * excess / prev_pivot;
            }
            let wr = if i + 1 < n { self.edges[i] } else { 0.0 };
            let mut p = r + wr;
            if p == 0.0 {
                p = -f64::MIN_POSITIVE;
            }
            if p < 0.0 {
                count += 1;
            }
            excess = r;
            prev_pivot = p;
        }
        count
    }

    fn real_shifted_solve(&self, theta: f64, rhs: &[f64]) -> Vec<f64> {
        let rhs: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.shifted_solve(Complex64::new(-theta, 0.0), 1.0, &rhs)
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Upper bound on the spectrum of `M^{-1} A` (Gershgorin).
    fn spectral_bound(&self) -> f64 {
        let d = self.diagonal();
        (0..self.dim())
            .map(|i| {
                let off = if i > 0 { self.edges[i - 1] } else { 0.0 } + self.edges.get(i).copied().unwrap_or(0.0);
                (d[i] + off) / self.mass[i]
            })
            .fold(0.0, f64::max)
    }
}

/// Contour nodes and weights: `exp(-x) ~ 2 Re sum_j w_j / (z_j + x)`.
fn contour_rule() -> Vec<(Complex64, Complex64)> {
    const NODES: usize = 32;
    let nf = NODES as f64;
    (0..NODES / 2)
        .map(|j| {
            // theta in (0, pi); the conjugate half is implied.
            let theta = std::f64::consts::PI * (2 * j + 1) as f64 / nf;
            let (s, c) = (0.6407 * theta).sin_cos();
            let z = Complex64::new(nf * (0.5017 * theta * c / s - 0.6122), nf * 0.2645 * theta);
            let dz = Complex64::new(
                nf * (0.5017 * c / s - 0.5017 * 0.6407 * theta / (s * s)),
                nf * 0.2645,
            );
            let w = z.exp() * dz / Complex64::new(0.0, nf);
            (z, w)
        })
        .collect()
}

/// `exp(-t M^{-1} A) u0`.
pub fn evolve(op: &DiscreteOperator, t: f64, u0: &[f64]) -> Result<Vec<f64>> {
    op.check_len(u0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial data must be finite"));
    }
    if t == 0.0 {
        return Ok(u0.to_vec());
    }
    let rhs: Vec<Complex64> = u0
        .iter()
        .zip(&op.mass)
        .map(|(&u, &m)| Complex64::new(u * m, 0.0))
        .collect();
    let parts: Vec<Vec<f64>> = contour_rule()
        .par_iter()
        .map(|&(z, w)| {
            op.shifted_solve(z, t, &rhs)
                .into_iter()
                .map(|x| 2.0 * (w * x).re)
                .collect()
        })
        .collect();
    let mut out = vec![0.0; op.dim()];
    for p in &parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(out)
}

/// `(exp(-t M^{-1} A) 1)` at lattice site `site`.
pub fn heat_content(op: &DiscreteOperator, t: f64, site: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("heat content needs t > 0, got {t}")));
    }
    let i = op.site_index(site)?;
    Ok(evolve(op, t, &vec![1.0; op.dim()])?[i])
}

/// Heat content at several times, one evolution per time.
pub fn heat_content_curve(op: &DiscreteOperator, times: &[f64], site: usize) -> Result<Vec<f64>> {
    times.iter().map(|&t| heat_content(op, t, site)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub value: f64,
    /// Mass-normalised.
    pub vector: Vec<f64>,
    /// `||A v - theta M v|| / ||v||`.
    pub residual: f64,
}

const EIG_RESIDUAL_TOL: f64 = 1e-8;

/// The `count` smallest generalized eigenpairs of `A v = theta M v`.
pub fn eig_low(op: &DiscreteOperator, count: usize) -> Result<Vec<EigenPair>> {
    let n = op.dim();
    if count == 0 || count > n {
        return Err(Error::domain(format!("eigenpair count must lie in 1..={n}")));
    }
    let top = op.spectral_bound() * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(count);
    for j in 0..count {
        let theta = bisect_eigenvalue(op, j, top);
        let pair = inverse_iteration(op, theta, &pairs)?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// The `j`-th (0-based) eigenvalue by bisection on the inertia count,
/// geometric while the bracket spans orders of magnitude.
fn bisect_eigenvalue(op: &DiscreteOperator, j: usize, top: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, top);
    for _ in 0..4000 {
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else if lo == 0.0 && hi > 1.0 {
            (hi.sqrt()).min(0.5 * hi)
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if op.count_below(mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi || hi < 1e-300 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn inverse_iteration(op: &DiscreteOperator, theta: f64, previous: &[EigenPair]) -> Result<EigenPair> {
    let n = op.dim();
    // Shift slightly below theta so the solve stays finite at an exact
    // eigenvalue (including the zero mode of reflecting operators).
    let scale = op.diagonal().iter().cloned().fold(0.0, f64::max) / op.mass.iter().cloned().fold(0.0, f64::max);
    let shift = theta - 1e-13 * theta.max(scale);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.7).sin()).collect();
    let mut best: Option<EigenPair> = None;
    for _ in 0..8 {
        let rhs: Vec<f64> = v.iter().zip(&op.mass).map(|(x, m)| x * m).collect();
        let mut x = op.real_shifted_solve(shift, &rhs);
        for p in previous {
            let c = op.mass_inner(&x, &p.vector)?;
            for (xi, pi) in x.iter_mut().zip(&p.vector) {
                *xi -= c * pi;
            }
        }
        let norm = op.mass_inner(&x, &x)?.sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::numeric(format!("inverse iteration broke down near {theta:e}")));
        }
        x.iter_mut().for_each(|xi| *xi /= norm);
        // Fix the sign so that results are reproducible.
        let lead = x.iter().copied().fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            x.iter_mut().for_each(|xi| *xi = -*xi);
        }
        let ax = op.apply(&x)?;
        let value = op.quadratic_form(&x)?.max(0.0);
        let resid = ax
            .iter()
            .zip(&x)
            .zip(&op.mass)
            .map(|((a, xi), m)| (a - value * m * xi).powi(2))
            .sum::<f64>()
            .sqrt()
            / x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
        v = x.clone();
        let better = best.as_ref().map_or(true, |b| resid < b.residual);
        if better {
            best = Some(EigenPair {
                value,
                vector: x,
                residual: resid,
            });
        }
        if resid <= 1e-3 * EIG_RESIDUAL_TOL {
            break;
        }
    }
    let best = best.expect("at least one iteration");
    if best.residual > EIG_RESIDUAL_TOL {
        return Err(Error::numeric(format!(
            "eigenpair near {theta:e} did not converge: residual {:e}",
            best.residual
        )));
    }
    Ok(best)
}

/// `max_k sqrt(k) |u_k| / sqrt(u^T A u)` over the lattice sites.
pub fn decay_ratio(u: &[f64], op: &DiscreteOperator) -> Result<f64> {
    let e = op.quadratic_form(u)?;
    if !(e > 0.0) {
        return Err(Error::domain("decay ratio needs positive energy"));
    }
    let sup = u[op.offset..]
        .iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64).sqrt() * x.abs())
        .fold(0.0, f64::max);
    Ok(sup / e.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingTail {
    pub p: f64,
    pub tail_start: usize,
    /// `sum_{k >= tail_start} a_k / k^{p/2}`.
    pub tail_sum: f64,
    /// Largest `sum |u_k|^p a_k` found over unit-energy `u` supported in
    /// `[tail_start, N]`.
    pub empirical_sup: f64,
}

/// Compact-embedding probe for `l^p(mu)`.
pub fn embedding_tail(m: &MeasureSpec, p: f64, tail_start: usize, op: &DiscreteOperator) -> Result<EmbeddingTail> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("embedding exponent must be >= 1, got {p}")));
    }
    if tail_start == 0 || tail_start >= op.sites() {
        return Err(Error::domain(format!(
            "tail start must lie in 1..{}",
            op.sites()
        )));
    }
    let q = p / 2.0;
    match m.series_tail(1, q) {
        Tail::Finite(_) => {}
        Tail::Divergent => {
            return Err(Error::domain(format!("sum a_k / k^{q} diverges; no compact embedding")))
        }
        Tail::Unknown => {
            return Err(Error::domain(format!(
                "cannot decide convergence of sum a_k / k^{q} for {}",
                m.name()
            )))
        }
    }
    let tail_sum = m
        .series_tail(tail_start, q)
        .finite()
        .ok_or_else(|| Error::numeric("tail sum unavailable"))?;

    // Restrict to sites >= tail_start: the edge into the block becomes killing.
    let first = op.site_index(tail_start)?;
    let block = DiscreteOperator {
        edges: op.edges[first..].to_vec(),
        killing: {
            let mut k = op.killing[first..].to_vec();
            if first > 0 {
                k[0] += op.edges[first - 1];
            }
            k
        },
        mass: op.mass[first..].to_vec(),
        boundary: op.boundary,
        offset: 0,
        measure: op.measure.clone(),
        support: op.support,
    };
    if block.killing.iter().all(|&k| k == 0.0) {
        return Err(Error::domain("the restricted energy is not coercive; use absorbing truncation"));
    }
    let weights: Vec<f64> = (tail_start..tail_start + block.dim()).map(|k| m.weight(k)).collect();
    let functional = |u: &[f64]| -> f64 { u.iter().zip(&weights).map(|(x, a)| x.abs().powf(p) * a).sum() };
    let normalise = |mut u: Vec<f64>| -> Result<Vec<f64>> {
        let e = block.quadratic_form(&u)?.sqrt();
        u.iter_mut().for_each(|x| *x /= e);
        Ok(u)
    };

    let mut best = 0.0_f64;
    let n = block.dim();
    let starts: Vec<usize> = (0..n).filter(|&i| i < 8 || i.is_power_of_two() || i + 1 == n).collect();
    for s in starts {
        let mut e = vec![0.0; n];
        e[s] = 1.0;
        let mut u = normalise(block.real_shifted_solve(0.0, &e))?;
        let mut f = functional(&u);
        for _ in 0..200 {
            let grad: Vec<f64> = u
                .iter()
                .zip(&weights)
                .map(|(x, a)| p * a * x.abs().powf(p - 1.0) * x.signum())
                .collect();
            let next = normalise(block.real_shifted_solve(0.0, &grad))?;
            let fnext = functional(&next);
            if !(fnext > f * (1.0 + 1e-12)) {
                if fnext > f {
                    f = fnext;
                }
                break;
            }
            u = next;
            f = fnext;
        }
        best = best.max(f);
    }
    Ok(EmbeddingTail {
        p,
        tail_start,
        tail_sum,
        empirical_sup: best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransienceWitness {
    pub trials: usize,
    pub seed: u64,
    /// Largest `sum |u_k| e^{-k} / sqrt(u^T A u)` found.
    pub max_ratio: f64,
}

/// `sum_k |u_k| e^{-k} / sqrt(u^T A u)`, i.e. `int |u| g dmu / sqrt(E[u])`
/// with `g(k) = e^{-k} / a_k`.
pub fn transience_ratio(u: &[f64], op: &DiscreteOperator) -> Result<f64> {
    let e = op.quadratic_form(u)?;
    if !(e > 0.0) {
        return Err(Error::domain("transience ratio needs positive energy"));
    }
    let num: f64 = u[op.offset..]
        .iter()
        .enumerate()
        .map(|(i, x)| x.abs() * (-((i + 1) as f64)).exp())
        .sum();
    Ok(num / e.sqrt())
}

/// Maximises the transience ratio over random finitely supported vectors:
/// windows of length 1..=20 starting in the first 20 sites, entries
/// uniform in `[-1, 1]`, plus the unit vector at site 1.
pub fn transience_witness(op: &DiscreteOperator, trials: usize, seed: u64) -> Result<TransienceWitness> {
    if trials == 0 {
        return Err(Error::domain("transience witness needs at least one trial"));
    }
    let sites = op.sites();
    let mut e1 = vec![0.0; op.dim()];
    e1[op.offset] = 1.0;
    let mut best = transience_ratio(&e1, op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let start = rng.random_range(1..=20.min(sites));
        let len = rng.random_range(1..=20);
        let mut u = vec![0.0; op.dim()];
        for k in start..(start + len).min(sites + 1) {
            u[op.offset + k - 1] = rng.random_range(-1.0..=1.0);
        }
        if let Ok(r) = transience_ratio(&u, op) {
            best = best.max(r);
        }
    }
    Ok(TransienceWitness {
        trials,
        seed,
        max_ratio: best,
    })
}
