//! Adaptive finite elements for the stationary Brinkman–Darcy–Forchheimer equations
//!
//! ```text
//! −Δu + (u·∇)u + |u|u + u + ∇p = Σ_z F_z δ_z,   div u = 0   in Ω ⊂ ℝ²
//! ```
//!
//! driven by Dirac point sources. Velocity errors are measured in Muckenhoupt-weighted
//! norms `|x − z|^α`, and meshes are adapted with a weighted residual estimator.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common `f64` instantiation.

pub mod adaptivity;
pub mod assembly;
pub mod estimator;
pub mod experiments;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod scalar;
pub mod spaces;
pub mod solver;
pub mod sparse;
pub mod weights;

mod error;

pub use adaptivity::{adapt, adapt_with, fit_rate, AdaptiveOutcome, AdaptiveProblem, AdaptiveTrace, TraceRow};
pub use assembly::{
    apply_dirichlet, assemble_brinkman, assemble_convection, assemble_dirac_load, assemble_forchheimer,
    assemble_smooth_load, build_saddle, solve_saddle, BrinkmanBlocks, DirichletData, PointSource, SaddleSystem,
};
pub use error::{Error, Result};
pub use estimator::{compute_indicators, global_estimator, mark, EstimatorSetup, IndicatorField, IndicatorTerms};
pub use experiments::{run, run_with, verify_manufactured, ExperimentConfig, RunSummary};
pub use geometry::{multi_source_distance, ElementGeometry, INCLUSION_TOL};
pub use mesh::{DomainKind, DomainSpec, Mesh, PointLocator, Refinement};
pub use quadrature::{gauss_segment, triangle_quadrature, QuadratureRule, MAX_DEGREE};
pub use scalar::{Point2, Scalar};
pub use spaces::{shape_eval, Component, MixedSpace, PairKind, ShapeValues};
pub use solver::{
    picard_solve, DiscreteSolution, PicardOptions, PicardReport, ProblemData, SolutionPair, PICARD_MAX_ITER, PICARD_TOL,
};
pub use sparse::{solve_linear, CsrMatrix, SparseLu};
pub use weights::{weighted_h1_seminorm, weighted_l2_norm, ElementField, WeightSpec, WeightedIntegrator};

pub type Mesh64 = Mesh<f64>;
pub type Mesh32 = Mesh<f32>;
pub type DomainSpec64 = DomainSpec<f64>;
pub type MixedSpace64 = MixedSpace<f64>;
pub type WeightSpec64 = WeightSpec<f64>;
pub type CsrMatrix64 = CsrMatrix<f64>;
