//! Picard fixed-point iteration for the discrete nonlinear problem, and discrete fields
//! built from its solution.

use std::sync::Arc;

use crate::assembly::{
    apply_dirichlet, assemble_brinkman, assemble_dirac_load, assemble_nonlinear, assemble_smooth_load,
    solve_saddle, velocity_block, BrinkmanBlocks, DirichletData, PointSource, SaddleSystem,
};
use crate::geometry::ElementGeometry;
use crate::mesh::Mesh;
use crate::scalar::{Point2, Scalar};
use crate::spaces::{p1_shape, velocity_shape, MixedSpace};
use crate::sparse::CsrMatrix;
use crate::weights::ElementField;
use crate::{Error, Result};

/// Stopping tolerance on the Euclidean norm of the stacked coefficient increment.
pub const PICARD_TOL: f64 = 1e-8;
pub const PICARD_MAX_ITER: usize = 100;

/// Coefficient vectors `(u_T, p_T)`; `u` is laid out `[u_x, u_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair<T> {
    pub u: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Scalar> SolutionPair<T> {
    pub fn zeros(space: &MixedSpace<T>) -> Self {
        Self {
            u: vec![T::zero(); space.n_velocity()],
            p: vec![T::zero(); space.n_pressure()],
        }
    }

    /// `[u; p]`, the vector whose increments Picard measures.
    pub fn stacked(&self) -> Vec<T> {
        let mut x = self.u.clone();
        x.extend_from_slice(&self.p);
        x
    }

    fn from_stacked(space: &MixedSpace<T>, x: &[T]) -> Self {
        let nu = space.n_velocity();
        Self {
            u: x[..nu].to_vec(),
            p: x[nu..nu + space.n_pressure()].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    pub final_increment: f64,
    pub converged: bool,
    /// Increment after each iteration.
    pub increments: Vec<f64>,
}

type SmoothFn<T> = Arc<dyn Fn(Point2<T>) -> Point2<T> + Send + Sync>;

/// Right-hand side, boundary data and model switches of one discrete solve.
#[derive(Clone, Debug)]
pub struct ProblemData<T> {
    pub sources: Vec<PointSource<T>>,
    pub smooth: Option<SmoothForce<T>>,
    pub dirichlet: DirichletData<T>,
    /// Convection and Forchheimer terms on; off gives the Brinkman problem.
    pub nonlinear: bool,
}

/// Smooth body force wrapper.
#[derive(Clone)]
pub struct SmoothForce<T>(pub SmoothFn<T>);

impl<T> std::fmt::Debug for SmoothForce<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SmoothForce")
    }
}

impl<T: Scalar> ProblemData<T> {
    pub fn point_sources(sources: Vec<PointSource<T>>) -> Self {
        Self {
            sources,
            smooth: None,
            dirichlet: DirichletData::zero(),
            nonlinear: true,
        }
    }

    pub fn smooth(f: impl Fn(Point2<T>) -> Point2<T> + Send + Sync + 'static) -> Self {
        Self {
            sources: Vec::new(),
            smooth: Some(SmoothForce(Arc::new(f))),
            dirichlet: DirichletData::zero(),
            nonlinear: true,
        }
    }

    pub fn with_dirichlet(mut self, dirichlet: DirichletData<T>) -> Self {
        self.dirichlet = dirichlet;
        self
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    /// Velocity load vector `⟨f, φ_i⟩`.
    pub fn load(&self, mesh: &Mesh<T>, space: &MixedSpace<T>) -> Result<Vec<T>> {
        let mut rhs = assemble_dirac_load(space, mesh, &self.sources)?;
        if let Some(f) = &self.smooth {
            let g = assemble_smooth_load(space, mesh, |x| (f.0)(x));
            for (r, v) in rhs.iter_mut().zip(g) {
                *r += v;
            }
        }
        Ok(rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: PICARD_TOL,
            max_iter: PICARD_MAX_ITER,
        }
    }
}

/// Scalar velocity operator `a0 + a1 (+ N_c + N_d)` frozen at `u_prev`.
fn scalar_operator<T: Scalar>(
    mesh: &Mesh<T>,
    space: &MixedSpace<T>,
    brinkman: &CsrMatrix<T>,
    u_prev: Option<&[T]>,
) -> Result<CsrMatrix<T>> {
    match u_prev {
        Some(u) => {
            let (nc, nd) = assemble_nonlinear(mesh, space, u)?;
            Ok(brinkman.add_scaled(&nc.add_scaled(&nd, T::one()), T::one()))
        }
        None => Ok(brinkman.clone()),
    }
}

/// Algorithm: starting from `(u⁰, p⁰) = 0`, solve the linear problem with convection and
/// Forchheimer coefficients frozen at the previous velocity until the Euclidean norm of
/// the stacked increment drops to `tol`.
pub fn picard_solve<T: Scalar>(
    mesh: &Mesh<T>,
    space: &MixedSpace<T>,
    data: &ProblemData<T>,
    options: PicardOptions,
) -> Result<(SolutionPair<T>, PicardReport)> {
    let blocks = assemble_brinkman(mesh, space);
    picard_solve_with(mesh, space, &blocks, data, options)
}

/// As [`picard_solve`] with preassembled constant blocks.
pub fn picard_solve_with<T: Scalar>(
    mesh: &Mesh<T>,
    space: &MixedSpace<T>,
    blocks: &BrinkmanBlocks<T>,
    data: &ProblemData<T>,
    options: PicardOptions,
) -> Result<(SolutionPair<T>, PicardReport)> {
    let load = data.load(mesh, space)?;
    let brinkman = blocks.a0.add_scaled(&blocks.a1, T::one());
    let mut current = SolutionPair::zeros(space);
    let mut increments = Vec::new();
    let mut linear_solution: Option<Vec<T>> = None;
    for iteration in 1..=options.max_iter {
        // the Brinkman system does not change between iterations
        let x = match &linear_solution {
            Some(x) => x.clone(),
            None => {
                let frozen = if data.nonlinear && iteration > 1 { Some(current.u.as_slice()) } else { None };
                let a = velocity_block(&scalar_operator(mesh, space, &brinkman, frozen)?);
                let system = apply_dirichlet(SaddleSystem::new(a, blocks, load.clone()), space, &data.dirichlet)?;
                let x = solve_saddle(&system)?;
                if !data.nonlinear {
                    linear_solution = Some(x.clone());
                }
                x
            }
        };
        let next = SolutionPair::from_stacked(space, &x);
        let increment = next
            .stacked()
            .iter()
            .zip(current.stacked())
            .map(|(a, b)| (*a - b).as_f64().powi(2))
            .sum::<f64>()
            .sqrt();
        increments.push(increment);
        current = next;
        if increment <= options.tol {
            let report = PicardReport {
                iterations: iteration,
                final_increment: increment,
                converged: true,
                increments,
            };
            return Ok((current, report));
        }
    }
    Err(Error::NonConvergence { increments })
}

/// Residual of the discrete equations at `sol`: the max-norm of the momentum residual
/// over free velocity dofs and the max-norm of `B u`.
pub fn discrete_residuals<T: Scalar>(
    mesh: &Mesh<T>,
    space: &MixedSpace<T>,
    data: &ProblemData<T>,
    sol: &SolutionPair<T>,
) -> Result<(f64, f64)> {
    let blocks = assemble_brinkman(mesh, space);
    let brinkman = blocks.a0.add_scaled(&blocks.a1, T::one());
    let frozen = if data.nonlinear { Some(sol.u.as_slice()) } else { None };
    let a = velocity_block(&scalar_operator(mesh, space, &brinkman, frozen)?);
    let load = data.load(mesh, space)?;
    let au = a.mul_vec(&sol.u);
    let btp = blocks.b.transpose_mul_vec(&sol.p);
    let momentum = (0..space.n_velocity())
        .filter(|&i| !space.is_dirichlet(i % space.n_scalar()))
        .map(|i| (load[i] - au[i] - btp[i]).abs().as_f64())
        .fold(0.0, f64::max);
    let divergence = blocks.b.mul_vec(&sol.u).iter().map(|v| v.abs().as_f64()).fold(0.0, f64::max);
    Ok((momentum, divergence))
}

/// `∫ p_T`.
pub fn pressure_mean<T: Scalar>(mesh: &Mesh<T>, space: &MixedSpace<T>, p: &[T]) -> T {
    let blocks_m = assemble_brinkman(mesh, space).m;
    blocks_m.iter().zip(p).map(|(&m, &q)| m * q).sum()
}

/// Discrete solution viewed as an elementwise field.
#[derive(Debug, Clone)]
pub struct DiscreteSolution<'a, T> {
    pub space: &'a MixedSpace<T>,
    pub solution: &'a SolutionPair<T>,
    geometry: Vec<ElementGeometry<T>>,
    stacked: Vec<T>,
}

impl<'a, T: Scalar> DiscreteSolution<'a, T> {
    pub fn new(mesh: &Mesh<T>, space: &'a MixedSpace<T>, solution: &'a SolutionPair<T>) -> Self {
        Self {
            space,
            solution,
            geometry: (0..mesh.n_elements()).map(|k| mesh.geometry(k)).collect(),
            stacked: solution.stacked(),
        }
    }

    pub fn geometry(&self, k: usize) -> &ElementGeometry<T> {
        &self.geometry[k]
    }

    /// Velocity and its Jacobian (`jac[c][d] = ∂_d u_c`) on element `k`.
    pub fn velocity(&self, k: usize, bary: [T; 3]) -> (Point2<T>, [Point2<T>; 2]) {
        let s = velocity_shape(self.space.pair, &self.geometry[k], bary);
        self.space.velocity_at(k, &s, &self.solution.u)
    }

    /// Pressure and its gradient on element `k`.
    pub fn pressure(&self, k: usize, bary: [T; 3]) -> (T, Point2<T>) {
        let s = p1_shape(&self.geometry[k], bary);
        self.space.pressure_at(k, &s, &self.stacked)
    }

    pub fn divergence(&self, k: usize, bary: [T; 3]) -> T {
        let (_, j) = self.velocity(k, bary);
        j[0][0] + j[1][1]
    }

    pub fn velocity_field(&self) -> VelocityView<'_, 'a, T> {
        VelocityView(self)
    }

    pub fn pressure_field(&self) -> PressureView<'_, 'a, T> {
        PressureView(self)
    }

    pub fn divergence_field(&self) -> DivergenceView<'_, 'a, T> {
        DivergenceView(self)
    }
}

/// `u_T` as an [`ElementField`].
pub struct VelocityView<'s, 'a, T>(&'s DiscreteSolution<'a, T>);
/// `p_T` as an [`ElementField`].
pub struct PressureView<'s, 'a, T>(&'s DiscreteSolution<'a, T>);
/// `div u_T` as a scalar [`ElementField`] (gradient not provided).
pub struct DivergenceView<'s, 'a, T>(&'s DiscreteSolution<'a, T>);

impl<T: Scalar> ElementField<T> for VelocityView<'_, '_, T> {
    fn value_sq(&self, k: usize, _: Point2<T>, bary: [T; 3]) -> T {
        let (u, _) = self.0.velocity(k, bary);
        u[0] * u[0] + u[1] * u[1]
    }

    fn gradient_sq(&self, k: usize, _: Point2<T>, bary: [T; 3]) -> T {
        let (_, j) = self.0.velocity(k, bary);
        j[0][0] * j[0][0] + j[0][1] * j[0][1] + j[1][0] * j[1][0] + j[1][1] * j[1][1]
    }
}

impl<T: Scalar> ElementField<T> for PressureView<'_, '_, T> {
    fn value_sq(&self, k: usize, _: Point2<T>, bary: [T; 3]) -> T {
        let (p, _) = self.0.pressure(k, bary);
        p * p
    }

    fn gradient_sq(&self, k: usize, _: Point2<T>, bary: [T; 3]) -> T {
        let (_, g) = self.0.pressure(k, bary);
        g[0] * g[0] + g[1] * g[1]
    }
}

impl<T: Scalar> ElementField<T> for DivergenceView<'_, '_, T> {
    fn value_sq(&self, k: usize, _: Point2<T>, bary: [T; 3]) -> T {
        let d = self.0.divergence(k, bary);
        d * d
    }

    fn gradient_sq(&self, _: usize, _: Point2<T>, _: [T; 3]) -> T {
        T::zero()
    }
}

/// `u_T − u*` for an analytic velocity `u*` with Jacobian `jac[c][d] = ∂_d u*_c`.
pub struct VelocityError<'s, 'a, T, F, G> {
    pub discrete: &'s DiscreteSolution<'a, T>,
    pub exact: F,
    pub jacobian: G,
}

impl<T, F, G> ElementField<T> for VelocityError<'_, '_, T, F, G>
where
    T: Scalar,
    F: Fn(Point2<T>) -> Point2<T>,
    G: Fn(Point2<T>) -> [Point2<T>; 2],
{
    fn value_sq(&self, k: usize, x: Point2<T>, bary: [T; 3]) -> T {
        let (u, _) = self.discrete.velocity(k, bary);
        let e = (self.exact)(x);
        (u[0] - e[0]).powi(2) + (u[1] - e[1]).powi(2)
    }

    fn gradient_sq(&self, k: usize, x: Point2<T>, bary: [T; 3]) -> T {
        let (_, j) = self.discrete.velocity(k, bary);
        let e = (self.jacobian)(x);
        let mut s = T::zero();
        for c in 0..2 {
            for d in 0..2 {
                s += (j[c][d] - e[c][d]).powi(2);
            }
        }
        s
    }
}

/// `p_T − p*` for an analytic pressure with gradient.
pub struct PressureError<'s, 'a, T, F, G> {
    pub discrete: &'s DiscreteSolution<'a, T>,
    pub exact: F,
    pub gradient: G,
}

impl<T, F, G> ElementField<T> for PressureError<'_, '_, T, F, G>
where
    T: Scalar,
    F: Fn(Point2<T>) -> T,
    G: Fn(Point2<T>) -> Point2<T>,
{
    fn value_sq(&self, k: usize, x: Point2<T>, bary: [T; 3]) -> T {
        let (p, _) = self.discrete.pressure(k, bary);
        (p - (self.exact)(x)).powi(2)
    }

    fn gradient_sq(&self, k: usize, x: Point2<T>, bary: [T; 3]) -> T {
        let (_, g) = self.discrete.pressure(k, bary);
        let e = (self.gradient)(x);
        (g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2)
    }
}
