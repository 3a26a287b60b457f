//! Global assembly of the Brinkman blocks, the Picard-frozen convection and Forchheimer
//! matrices, point-source and smooth loads, Dirichlet lifting and the augmented
//! saddle-point system.
//!
//! All velocity forms are diagonal in the velocity component, so they are assembled as
//! `n_scalar × n_scalar` blocks and expanded with [`velocity_block`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::geometry::ElementGeometry;
use crate::mesh::{point_segment_distance, Mesh};
use crate::quadrature::{triangle_quadrature, QuadratureRule, MAX_DEGREE};
use crate::scalar::{dot, Point2, Scalar};
use crate::spaces::{p1_shape, velocity_shape, MixedSpace, PairKind, MAX_LOCAL};
use crate::sparse::{refine, CsrMatrix, SparseLu};
use crate::{Error, Result};

/// Exact degree for products of the polynomial basis (mini mass matrix is degree 6).
pub const POLYNOMIAL_DEGREE: usize = 6;

/// Tolerance for matching Dirichlet data at corners shared by two boundary segments.
pub const DIRICHLET_CORNER_TOL: f64 = 1e-12;

/// A Dirac source `F δ_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource<T> {
    pub z: Point2<T>,
    pub force: Point2<T>,
}

impl<T: Scalar> PointSource<T> {
    pub fn new(z: Point2<T>, force: Point2<T>) -> Self {
        Self { z, force }
    }
}

/// Element matrices of the polynomial forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBrinkman<T> {
    /// `∫ ∇ψ_j·∇ψ_i`
    pub a0: [[T; MAX_LOCAL]; MAX_LOCAL],
    /// `∫ ψ_j ψ_i`
    pub a1: [[T; MAX_LOCAL]; MAX_LOCAL],
    /// `b[c][q][j] = −∫ χ_q ∂_c ψ_j` with `χ_q` the P1 pressure basis.
    pub b: [[[T; MAX_LOCAL]; 3]; 2],
    /// `∫ χ_q`
    pub m: [T; 3],
}

/// Element matrices of `a0`, `a1`, `b` and the pressure mean on one triangle.
pub fn local_brinkman<T: Scalar>(pair: PairKind, geom: &ElementGeometry<T>, rule: &QuadratureRule<T>) -> LocalBrinkman<T> {
    let n = pair.velocity_local_count();
    let mut out = LocalBrinkman {
        a0: [[T::zero(); MAX_LOCAL]; MAX_LOCAL],
        a1: [[T::zero(); MAX_LOCAL]; MAX_LOCAL],
        b: [[[T::zero(); MAX_LOCAL]; 3]; 2],
        m: [T::zero(); 3],
    };
    for (bary, &w) in rule.points.iter().zip(&rule.weights) {
        let wa = w * geom.area;
        let s = velocity_shape(pair, geom, *bary);
        let p = p1_shape(geom, *bary);
        for i in 0..n {
            for j in 0..n {
                out.a0[i][j] += wa * dot(s.gradients[i], s.gradients[j]);
                out.a1[i][j] += wa * s.values[i] * s.values[j];
            }
        }
        for q in 0..3 {
            out.m[q] += wa * p.values[q];
            for j in 0..n {
                for c in 0..2 {
                    out.b[c][q][j] -= wa * p.values[q] * s.gradients[j][c];
                }
            }
        }
    }
    out
}

/// Element matrices of the frozen convection and Forchheimer forms for a velocity field
/// given at each quadrature point by `u_at(bary)`:
/// `nc[i][j] = −∫ ψ_j (u·∇ψ_i)` and `nd[i][j] = ∫ |u| ψ_j ψ_i`.
#[allow(clippy::type_complexity)]
pub fn local_nonlinear<T: Scalar>(
    pair: PairKind,
    geom: &ElementGeometry<T>,
    rule: &QuadratureRule<T>,
    u_at: impl Fn([T; 3]) -> Point2<T>,
) -> ([[T; MAX_LOCAL]; MAX_LOCAL], [[T; MAX_LOCAL]; MAX_LOCAL]) {
    let n = pair.velocity_local_count();
    let mut nc = [[T::zero(); MAX_LOCAL]; MAX_LOCAL];
    let mut nd = [[T::zero(); MAX_LOCAL]; MAX_LOCAL];
    for (bary, &w) in rule.points.iter().zip(&rule.weights) {
        let wa = w * geom.area;
        let s = velocity_shape(pair, geom, *bary);
        let u = u_at(*bary);
        let speed = u[0].hypot(u[1]);
        for i in 0..n {
            let transport = dot(u, s.gradients[i]);
            for j in 0..n {
                nc[i][j] -= wa * transport * s.values[j];
                nd[i][j] += wa * speed * s.values[i] * s.values[j];
            }
        }
    }
    (nc, nd)
}

/// Globally assembled constant blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BrinkmanBlocks<T> {
    /// Scalar stiffness block of `a0`.
    pub a0: CsrMatrix<T>,
    /// Scalar mass block of `a1`.
    pub a1: CsrMatrix<T>,
    /// `B[q, (c, j)] = −∫ χ_q div φ_j`, of size `n_pressure × n_velocity`.
    pub b: CsrMatrix<T>,
    /// Pressure means `∫ χ_q`.
    pub m: Vec<T>,
}

pub fn assemble_brinkman<T: Scalar>(mesh: &Mesh<T>, space: &MixedSpace<T>) -> BrinkmanBlocks<T> {
    let rule = triangle_quadrature(POLYNOMIAL_DEGREE).expect("polynomial rule available");
    let n = space.n_local();
    let mut t0 = Vec::with_capacity(mesh.n_elements() * n * n);
    let mut t1 = Vec::with_capacity(t0.capacity());
    let mut tb = Vec::with_capacity(mesh.n_elements() * 6 * n);
    let mut m = vec![T::zero(); space.n_pressure()];
    for k in 0..mesh.n_elements() {
        let local = local_brinkman(space.pair, &mesh.geometry(k), &rule);
        let dofs = space.element_dofs(k);
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                t0.push((gi, gj, local.a0[i][j]));
                t1.push((gi, gj, local.a1[i][j]));
            }
        }
        for (q, gq) in space.element_pressure_dofs(k).into_iter().enumerate() {
            m[gq] += local.m[q];
            for c in 0..2 {
                for (j, &gj) in dofs.iter().enumerate() {
                    tb.push((gq, space.velocity_index(c, gj), local.b[c][q][j]));
                }
            }
        }
    }
    let ns = space.n_scalar();
    BrinkmanBlocks {
        a0: CsrMatrix::from_triplets(ns, ns, &t0),
        a1: CsrMatrix::from_triplets(ns, ns, &t1),
        b: CsrMatrix::from_triplets(space.n_pressure(), space.n_velocity(), &tb),
        m,
    }
}

/// `blockdiag(S, S)` acting on `[u_x, u_y]`.
pub fn velocity_block<T: Scalar>(scalar: &CsrMatrix<T>) -> CsrMatrix<T> {
    let ns = scalar.nrows();
    let mut t = Vec::with_capacity(2 * scalar.nnz());
    for c in 0..2 {
        t.extend(scalar.triplets().into_iter().map(|(i, j, v)| (c * ns + i, c * ns + j, v)));
    }
    CsrMatrix::from_triplets(2 * ns, 2 * ns, &t)
}

fn check_velocity_len<T: Scalar>(space: &MixedSpace<T>, u: &[T]) -> Result<()> {
    if u.len() < space.n_velocity() {
        return Err(Error::Argument(format!(
            "velocity vector of length {} for a space with {} velocity dofs",
            u.len(),
            space.n_velocity()
        )));
    }
    Ok(())
}

/// Scalar blocks `(N_c, N_d)` for the frozen velocity `u_prev` (velocity block or full
/// stacked vector), integrated with the degree-19 rule.
pub fn assemble_nonlinear<T: Scalar>(
    mesh: &Mesh<T>,
    space: &MixedSpace<T>,
    u_prev: &[T],
) -> Result<(CsrMatrix<T>, CsrMatrix<T>)> {
    check_velocity_len(space, u_prev)?;
    let rule = triangle_quadrature(MAX_DEGREE)?;
    let n = space.n_local();
    let mut tc = Vec::with_capacity(mesh.n_elements() * n * n);
    let mut td = Vec::with_capacity(tc.capacity());
    for k in 0..mesh.n_elements() {
        let geom = mesh.geometry(k);
        let (nc, nd) = local_nonlinear(space.pair, &geom, &rule, |bary| {
            space.velocity_at(k, &velocity_shape(space.pair, &geom, bary), u_prev).0
        });
        let dofs = space.element_dofs(k);
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                tc.push((gi, gj, nc[i][j]));
                td.push((gi, gj, nd[i][j]));
            }
        }
    }
    let ns = space.n_scalar();
    Ok((CsrMatrix::from_triplets(ns, ns, &tc), CsrMatrix::from_triplets(ns, ns, &td)))
}

/// Scalar block of `c(u_prev, ·; ·)`.
pub fn assemble_convection<T: Scalar>(mesh: &Mesh<T>, space: &MixedSpace<T>, u_prev: &[T]) -> Result<CsrMatrix<T>> {
    assemble_nonlinear(mesh, space, u_prev).map(|(c, _)| c)
}

/// Scalar block of `d(u_prev, ·; ·)`.
pub fn assemble_forchheimer<T: Scalar>(mesh: &Mesh<T>, space: &MixedSpace<T>, u_prev: &[T]) -> Result<CsrMatrix<T>> {
    assemble_nonlinear(mesh, space, u_prev).map(|(_, d)| d)
}

/// Checks that `z` lies in the closed domain and off its boundary; returns the elements
/// containing it.
pub fn check_source<T: Scalar>(mesh: &Mesh<T>, z: Point2<T>) -> Result<Vec<usize>> {
    let containing = mesh.locate_point(z);
    if containing.is_empty() {
        return Err(Error::SourceOutsideDomain { x: z[0].as_f64(), y: z[1].as_f64() });
    }
    for &k in &containing {
        for e in mesh.element_edges(k) {
            if !mesh.is_boundary_edge(e) {
                continue;
            }
            let [a, b] = mesh.edge(e);
            let tol = T::lit(crate::geometry::INCLUSION_TOL) * mesh.edge_length(e);
            if point_segment_distance(z, mesh.vertex(a), mesh.vertex(b)) <= tol {
                return Err(Error::SourceOnBoundary { x: z[0].as_f64(), y: z[1].as_f64() });
            }
        }
    }
    Ok(containing)
}

/// `rhs[i] = Σ_z F_z·φ_i(z)`, of length `n_velocity`.
pub fn assemble_dirac_load<T: Scalar>(space: &MixedSpace<T>, mesh: &Mesh<T>, sources: &[PointSource<T>]) -> Result<Vec<T>> {
    let mut rhs = vec![T::zero(); space.n_velocity()];
    for src in sources {
        let containing = check_source(mesh, src.z)?;
        // the continuous basis has the same value in every containing element
        let k = containing[0];
        let geom = mesh.geometry(k);
        let s = velocity_shape(space.pair, &geom, geom.barycentric(src.z));
        for (i, &d) in space.element_dofs(k).iter().enumerate() {
            for c in 0..2 {
                rhs[space.velocity_index(c, d)] += src.force[c] * s.values[i];
            }
        }
    }
    Ok(rhs)
}

/// `rhs[i] = ∫ f·φ_i` with the degree-19 rule.
pub fn assemble_smooth_load<T: Scalar>(
    space: &MixedSpace<T>,
    mesh: &Mesh<T>,
    f: impl Fn(Point2<T>) -> Point2<T>,
) -> Vec<T> {
    let rule = triangle_quadrature::<T>(MAX_DEGREE).expect("degree-19 rule available");
    let mut rhs = vec![T::zero(); space.n_velocity()];
    for k in 0..mesh.n_elements() {
        let geom = mesh.geometry(k);
        let dofs = space.element_dofs(k);
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let wa = w * geom.area;
            let fx = f(geom.point(*bary));
            let s = velocity_shape(space.pair, &geom, *bary);
            for (i, &d) in dofs.iter().enumerate() {
                for c in 0..2 {
                    rhs[space.velocity_index(c, d)] += wa * fx[c] * s.values[i];
                }
            }
        }
    }
    rhs
}

type BoundaryFn<T> = Arc<dyn Fn(Point2<T>) -> Point2<T> + Send + Sync>;

/// Velocity boundary data per boundary segment tag; segments without a function get the
/// default (zero unless set with [`DirichletData::uniform`]).
#[derive(Clone, Default)]
pub struct DirichletData<T> {
    segments: BTreeMap<usize, BoundaryFn<T>>,
    default: Option<BoundaryFn<T>>,
}

impl<T> fmt::Debug for DirichletData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletData")
            .field("segments", &self.segments.keys().collect::<Vec<_>>())
            .field("default", &self.default.is_some())
            .finish()
    }
}

impl<T: Scalar> DirichletData<T> {
    /// Homogeneous data `u = 0` on all of `∂Ω`.
    pub fn zero() -> Self {
        Self {
            segments: BTreeMap::new(),
            default: None,
        }
    }

    /// The same function on every segment.
    pub fn uniform(g: impl Fn(Point2<T>) -> Point2<T> + Send + Sync + 'static) -> Self {
        Self {
            segments: BTreeMap::new(),
            default: Some(Arc::new(g)),
        }
    }

    pub fn with_segment(mut self, tag: usize, g: impl Fn(Point2<T>) -> Point2<T> + Send + Sync + 'static) -> Self {
        self.segments.insert(tag, Arc::new(g));
        self
    }

    /// `u = (y(1−y), 0)` on the two lateral sides `x = ±1.5` of the T-shaped domain
    /// (outline sides 3 and 5), zero elsewhere.
    pub fn t_shape_inflow() -> Self {
        let profile = |x: Point2<T>| [x[1] * (T::one() - x[1]), T::zero()];
        Self::zero().with_segment(3, profile).with_segment(5, profile)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.segments.is_empty() && self.default.is_none()
    }

    pub fn value_on(&self, tag: usize, x: Point2<T>) -> Point2<T> {
        match self.segments.get(&tag).or(self.default.as_ref()) {
            Some(g) => g(x),
            None => [T::zero(); 2],
        }
    }

    /// Lifting vector of length `n_velocity`: interpolated boundary values on Dirichlet
    /// dofs, zero elsewhere. Fails if two segments meeting at a node disagree there.
    pub fn interpolate(&self, space: &MixedSpace<T>) -> Result<Vec<T>> {
        let mut g = vec![T::zero(); space.n_velocity()];
        if self.is_homogeneous() {
            return Ok(g);
        }
        for s in 0..space.n_scalar() {
            if !space.is_dirichlet(s) {
                continue;
            }
            let x = space.node(s).expect("Dirichlet dofs are Lagrange nodes");
            let tags = space.boundary_segments(s);
            let value = self.value_on(tags[0], x);
            for &other in &tags[1..] {
                let v = self.value_on(other, x);
                let gap = (v[0] - value[0]).hypot(v[1] - value[1]).as_f64();
                if gap > DIRICHLET_CORNER_TOL {
                    return Err(Error::IncompatibleDirichlet { vertex: s, gap });
                }
            }
            for c in 0..2 {
                g[space.velocity_index(c, s)] = value[c];
            }
        }
        Ok(g)
    }
}

/// Velocity–pressure system before the mean constraint is appended.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSystem<T> {
    /// `n_velocity × n_velocity`
    pub a: CsrMatrix<T>,
    /// `n_pressure × n_velocity`
    pub b: CsrMatrix<T>,
    pub m: Vec<T>,
    pub rhs_u: Vec<T>,
    pub rhs_p: Vec<T>,
}

impl<T: Scalar> SaddleSystem<T> {
    pub fn new(a: CsrMatrix<T>, blocks: &BrinkmanBlocks<T>, rhs_u: Vec<T>) -> Self {
        let np = blocks.b.nrows();
        Self {
            a,
            b: blocks.b.clone(),
            m: blocks.m.clone(),
            rhs_u,
            rhs_p: vec![T::zero(); np],
        }
    }
}

/// Symmetric elimination of the Dirichlet velocity dofs with lifting by the interpolated
/// data: `rhs ← rhs − [A; B]·g`, then the eliminated rows and columns of `A` become the
/// identity, the columns of `B` are cleared and `rhs_u` carries `g` on those dofs.
pub fn apply_dirichlet<T: Scalar>(system: SaddleSystem<T>, space: &MixedSpace<T>, data: &DirichletData<T>) -> Result<SaddleSystem<T>> {
    let g = data.interpolate(space)?;
    let fixed: Vec<bool> = (0..space.n_velocity())
        .map(|i| space.is_dirichlet(i % space.n_scalar()))
        .collect();
    let SaddleSystem { a, b, m, mut rhs_u, mut rhs_p } = system;
    let ag = a.mul_vec(&g);
    let bg = b.mul_vec(&g);
    for (r, v) in rhs_u.iter_mut().zip(&ag) {
        *r -= *v;
    }
    for (r, v) in rhs_p.iter_mut().zip(&bg) {
        *r -= *v;
    }
    let mut ta: Vec<_> = a
        .triplets()
        .into_iter()
        .filter(|&(i, j, _)| !fixed[i] && !fixed[j])
        .collect();
    for (i, &f) in fixed.iter().enumerate() {
        if f {
            ta.push((i, i, T::one()));
            rhs_u[i] = g[i];
        }
    }
    let tb: Vec<_> = b.triplets().into_iter().filter(|&(_, j, _)| !fixed[j]).collect();
    Ok(SaddleSystem {
        a: CsrMatrix::from_triplets(a.nrows(), a.ncols(), &ta),
        b: CsrMatrix::from_triplets(b.nrows(), b.ncols(), &tb),
        m,
        rhs_u,
        rhs_p,
    })
}

/// Augmented matrix `[A Bᵀ 0; B 0 m; 0 mᵀ 0]` and right-hand side `[rhs_u; rhs_p; 0]`;
/// the last unknown is the multiplier enforcing `∫ p = 0`.
pub fn build_saddle<T: Scalar>(system: &SaddleSystem<T>) -> (CsrMatrix<T>, Vec<T>) {
    let nu = system.a.nrows();
    let np = system.b.nrows();
    let n = nu + np + 1;
    let mut t = system.a.triplets();
    t.reserve(2 * system.b.nnz() + 2 * np);
    for (q, j, v) in system.b.triplets() {
        t.push((nu + q, j, v));
        t.push((j, nu + q, v));
    }
    for (q, &mq) in system.m.iter().enumerate() {
        t.push((nu + q, n - 1, mq));
        t.push((n - 1, nu + q, mq));
    }
    let mut rhs = Vec::with_capacity(n);
    rhs.extend_from_slice(&system.rhs_u);
    rhs.extend_from_slice(&system.rhs_p);
    rhs.push(T::zero());
    (CsrMatrix::from_triplets(n, n, &t), rhs)
}

/// Solves the augmented system of [`build_saddle`] and returns `[u; p; λ]`.
///
/// A dense multiplier row ruins the sparsity of a pivoted LU, so the factorization is
/// of the velocity–pressure matrix with one continuity row replaced by pinning the
/// pressure dof of largest mean weight. The multiplier is recovered exactly from the
/// dropped row and the constant pressure mode from the mean constraint. [`refine`]
/// against the full augmented matrix follows. Its doubled-precision residuals matter
/// near point sources, where the pressure is large and a plain residual leaves a noise
/// floor above the Picard tolerance; it also turns a numerically singular system into
/// [`Error::Singular`].
pub fn solve_saddle<T: Scalar>(system: &SaddleSystem<T>) -> Result<Vec<T>> {
    let nu = system.a.nrows();
    let np = system.b.nrows();
    let n = nu + np;
    if np == 0 || system.m.len() != np {
        return Err(Error::Argument("saddle system without pressure unknowns".into()));
    }
    let k = (0..np).fold(0, |best, q| if system.m[q].abs() > system.m[best].abs() { q } else { best });
    let pinned = nu + k;
    let mut t = system.a.triplets();
    t.reserve(2 * system.b.nnz() + 1);
    for (q, j, v) in system.b.triplets() {
        t.push((j, nu + q, v));
        if q != k {
            t.push((nu + q, j, v));
        }
    }
    t.push((pinned, pinned, T::one()));
    let lu = SparseLu::factor(&CsrMatrix::from_triplets(n, n, &t))?;

    let mean_total: T = system.m.iter().copied().fold(T::zero(), |a, b| a + b);
    // response to a unit multiplier
    let mut border = vec![T::zero(); n];
    for q in 0..np {
        if q != k {
            border[nu + q] = -system.m[q];
        }
    }
    let x1 = lu.solve(&border)?;
    let b_row_k = |x: &[T]| system.b.row(k).fold(T::zero(), |acc, (j, v)| acc + v * x[j]);
    let denom = b_row_k(&x1) + system.m[k];
    if !(denom.abs() > T::epsilon() * mean_total.abs()) {
        return Err(Error::Singular { pivot: n });
    }

    let bordered = |rhs: &[T]| -> Result<Vec<T>> {
        let mut r0 = rhs[..n].to_vec();
        r0[pinned] = T::zero();
        let x0 = lu.solve(&r0)?;
        let lambda = (rhs[pinned] - b_row_k(&x0)) / denom;
        let mut x: Vec<T> = x0.iter().zip(&x1).map(|(&a, &b)| a + lambda * b).collect();
        let mean = (0..np).fold(T::zero(), |acc, q| acc + system.m[q] * x[nu + q]);
        let shift = (rhs[n] - mean) / mean_total;
        for p in &mut x[nu..] {
            *p += shift;
        }
        x.push(lambda);
        Ok(x)
    };

    let (full, rhs) = build_saddle(system);
    let mut x = bordered(&rhs)?;
    refine(&full, &rhs, &mut x, bordered)?;
    Ok(x)
}
