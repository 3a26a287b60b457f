//! Weighted residual error indicators, the global estimator and maximum marking.

use crate::assembly::PointSource;
use crate::geometry::multi_source_distance;
use crate::mesh::Mesh;
use crate::quadrature::{gauss_segment, triangle_quadrature, QuadratureRule, MAX_DEGREE};
use crate::scalar::{Point2, Scalar};
use crate::solver::DiscreteSolution;
use crate::spaces::{velocity_laplacians, velocity_shape};
use crate::weights::{WeightSpec, WeightedIntegrator};
use crate::{Error, Result};

/// Gauss points per edge; exact to degree 11.
pub const EDGE_POINTS: usize = 6;

/// Squared contributions of the four indicator terms on one element.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IndicatorTerms<T> {
    pub residual: T,
    pub divergence: T,
    pub jump: T,
    pub dirac: T,
}

impl<T: Scalar> IndicatorTerms<T> {
    pub fn total_sq(&self) -> T {
        self.residual + self.divergence + self.jump + self.dirac
    }
}

/// Per-element indicators, their term breakdown and the global estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField<T> {
    pub values: Vec<T>,
    pub terms: Vec<IndicatorTerms<T>>,
    pub global: T,
}

impl<T: Scalar> IndicatorField<T> {
    pub fn from_terms(terms: Vec<IndicatorTerms<T>>) -> Self {
        let values: Vec<T> = terms.iter().map(|t| t.total_sq().sqrt()).collect();
        let global = global_estimator(&values);
        Self { values, terms, global }
    }
}

/// Weight exponent, sources and the weight applied to the divergence term.
///
/// With a single source and the power weight `d_z^α` this is the indicator `E_α`; with
/// the composite weight ρ over several sources it is the indicator `D_α`, where the
/// local distance becomes `D_{K,Z} = min_z D_K(z)`. Without sources the local distance
/// factor is one.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSetup<T> {
    pub alpha: T,
    pub sources: Vec<PointSource<T>>,
    pub weight: WeightSpec<T>,
}

impl<T: Scalar> EstimatorSetup<T> {
    /// `E_α` for one source, weighted by `d_z^α`.
    pub fn single(alpha: T, source: PointSource<T>) -> Result<Self> {
        Ok(Self {
            alpha,
            weight: WeightSpec::power(alpha, T::one(), source.z)?,
            sources: vec![source],
        })
    }

    /// `D_α` for several sources, weighted by ρ.
    pub fn multi(alpha: T, sources: Vec<PointSource<T>>, mesh: &Mesh<T>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Argument("multi-source estimator needs at least one source".into()));
        }
        let weight = WeightSpec::composite(alpha, sources.iter().map(|s| s.z).collect(), mesh)?;
        Ok(Self { alpha, sources, weight })
    }

    /// Single-source form for one source, multi-source form otherwise; the unweighted
    /// estimator when there are no sources.
    pub fn for_sources(alpha: T, sources: Vec<PointSource<T>>, mesh: &Mesh<T>) -> Result<Self> {
        match sources.len() {
            0 => Ok(Self {
                alpha,
                sources,
                weight: WeightSpec::Unweighted,
            }),
            1 => Self::single(alpha, sources[0]),
            _ => Self::multi(alpha, sources, mesh),
        }
    }

    fn source_points(&self) -> Vec<Point2<T>> {
        self.sources.iter().map(|s| s.z).collect()
    }
}

/// `‖R_K‖_{L²(K)}` for `R_K = Δu − u − (u·∇)u − u div u − |u|u − ∇p`.
pub fn element_residual_norm<T: Scalar>(discrete: &DiscreteSolution<'_, T>, k: usize) -> T {
    let rule = triangle_quadrature::<T>(MAX_DEGREE).expect("degree-19 rule available");
    element_residual_sq(discrete, k, &rule).sqrt()
}

fn element_residual_sq<T: Scalar>(discrete: &DiscreteSolution<'_, T>, k: usize, rule: &QuadratureRule<T>) -> T {
    let space = discrete.space;
    let geom = discrete.geometry(k);
    let dofs = space.element_dofs(k);
    let mut sum = T::zero();
    for (bary, &w) in rule.points.iter().zip(&rule.weights) {
        let s = velocity_shape(space.pair, geom, *bary);
        let (u, jac) = space.velocity_at(k, &s, &discrete.solution.u);
        let (_, grad_p) = discrete.pressure(k, *bary);
        let lap = velocity_laplacians(space.pair, geom, *bary);
        let div = jac[0][0] + jac[1][1];
        let speed = u[0].hypot(u[1]);
        let mut r_sq = T::zero();
        for c in 0..2 {
            let mut lap_u = T::zero();
            for (i, &d) in dofs.iter().enumerate() {
                lap_u += discrete.solution.u[space.velocity_index(c, d)] * lap[i];
            }
            let convect = u[0] * jac[c][0] + u[1] * jac[c][1];
            let r = lap_u - u[c] - convect - u[c] * div - speed * u[c] - grad_p[c];
            r_sq += r * r;
        }
        sum += w * r_sq;
    }
    sum * geom.area
}

/// `‖J_γ‖_{L²(γ)}` of the normal stress jump `⟦(∇u − pI)ν⟧` across interior edge `e`;
/// zero on boundary edges.
pub fn edge_jump_norm<T: Scalar>(mesh: &Mesh<T>, discrete: &DiscreteSolution<'_, T>, e: usize) -> T {
    let (nodes, weights) = gauss_segment::<T>(EDGE_POINTS);
    edge_jump_sq(mesh, discrete, e, &nodes, &weights).sqrt()
}

fn edge_jump_sq<T: Scalar>(mesh: &Mesh<T>, discrete: &DiscreteSolution<'_, T>, e: usize, nodes: &[T], weights: &[T]) -> T {
    let (k1, Some(k2)) = mesh.edge_elements(e) else {
        return T::zero();
    };
    let [a, b] = mesh.edge(e);
    let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
    let sides: Vec<(usize, Point2<T>)> = [k1, k2]
        .into_iter()
        .map(|k| {
            let local = mesh.element_edges(k).iter().position(|&x| x == e).expect("edge of its element");
            (k, discrete.geometry(k).outward_normal(local))
        })
        .collect();
    let mut sum = T::zero();
    for (&t, &w) in nodes.iter().zip(weights) {
        let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
        let mut jump = [T::zero(); 2];
        for &(k, nu) in &sides {
            let bary = discrete.geometry(k).barycentric(x);
            let (_, jac) = discrete.velocity(k, bary);
            let (p, _) = discrete.pressure(k, bary);
            for c in 0..2 {
                jump[c] += jac[c][0] * nu[0] + jac[c][1] * nu[1] - p * nu[c];
            }
        }
        sum += w * (jump[0] * jump[0] + jump[1] * jump[1]);
    }
    sum * mesh.edge_length(e)
}

/// Indicators on every element.
pub fn compute_indicators<T: Scalar>(
    mesh: &Mesh<T>,
    discrete: &DiscreteSolution<'_, T>,
    setup: &EstimatorSetup<T>,
) -> IndicatorField<T> {
    let rule = triangle_quadrature::<T>(MAX_DEGREE).expect("degree-19 rule available");
    let (nodes, weights) = gauss_segment::<T>(EDGE_POINTS);
    let integrator = WeightedIntegrator::new();
    let jumps: Vec<T> = (0..mesh.n_edges())
        .map(|e| edge_jump_sq(mesh, discrete, e, &nodes, &weights))
        .collect();
    let points = setup.source_points();
    let alpha = setup.alpha;
    let mut terms: Vec<IndicatorTerms<T>> = (0..mesh.n_elements())
        .map(|k| {
            let geom = discrete.geometry(k);
            let h = geom.diameter();
            let d_alpha = if points.is_empty() {
                T::one()
            } else {
                multi_source_distance(geom, &points).expect("nonempty sources").powf(alpha)
            };
            let jump: T = mesh.element_edges(k).iter().map(|&e| jumps[e]).sum();
            let divergence = integrator.integrate(geom, &setup.weight, |_, bary| {
                let d = discrete.divergence(k, bary);
                d * d
            });
            IndicatorTerms {
                residual: h * h * d_alpha * element_residual_sq(discrete, k, &rule),
                divergence,
                jump: h * d_alpha * jump,
                dirac: T::zero(),
            }
        })
        .collect();
    for src in &setup.sources {
        let f_sq = src.force[0] * src.force[0] + src.force[1] * src.force[1];
        for k in mesh.locate_point(src.z) {
            let h = discrete.geometry(k).diameter();
            terms[k].dirac += h.powf(alpha) * f_sq;
        }
    }
    IndicatorField::from_terms(terms)
}

/// `E_α(K)` (or `D_α(K)`) with its breakdown on one element.
pub fn local_indicator<T: Scalar>(
    mesh: &Mesh<T>,
    discrete: &DiscreteSolution<'_, T>,
    setup: &EstimatorSetup<T>,
    k: usize,
) -> IndicatorTerms<T> {
    let rule = triangle_quadrature::<T>(MAX_DEGREE).expect("degree-19 rule available");
    let (nodes, weights) = gauss_segment::<T>(EDGE_POINTS);
    let geom = discrete.geometry(k);
    let h = geom.diameter();
    let points = setup.source_points();
    let d_alpha = if points.is_empty() {
        T::one()
    } else {
        multi_source_distance(geom, &points).expect("nonempty sources").powf(setup.alpha)
    };
    let jump: T = mesh
        .element_edges(k)
        .iter()
        .map(|&e| edge_jump_sq(mesh, discrete, e, &nodes, &weights))
        .sum();
    let divergence = WeightedIntegrator::new().integrate(geom, &setup.weight, |_, bary| {
        let d = discrete.divergence(k, bary);
        d * d
    });
    let dirac = setup
        .sources
        .iter()
        .filter(|s| geom.contains(s.z))
        .map(|s| h.powf(setup.alpha) * (s.force[0] * s.force[0] + s.force[1] * s.force[1]))
        .sum();
    IndicatorTerms {
        residual: h * h * d_alpha * element_residual_sq(discrete, k, &rule),
        divergence,
        jump: h * d_alpha * jump,
        dirac,
    }
}

/// `D_α(K)` for the composite weight built from the given sources.
pub fn multi_source_indicator<T: Scalar>(
    mesh: &Mesh<T>,
    discrete: &DiscreteSolution<'_, T>,
    alpha: T,
    sources: &[PointSource<T>],
    k: usize,
) -> Result<T> {
    let setup = EstimatorSetup::multi(alpha, sources.to_vec(), mesh)?;
    Ok(local_indicator(mesh, discrete, &setup, k).total_sq().sqrt())
}

/// `(Σ_K E(K)²)^{1/2}`.
pub fn global_estimator<T: Scalar>(values: &[T]) -> T {
    values.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// Maximum marking: `{K : E(K) > ½ max E}`; the argmax when that set is empty while the
/// maximum is positive.
pub fn mark<T: Scalar>(values: &[T]) -> Vec<usize> {
    let Some((argmax, &max)) = values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &T)>, (k, v)| match best {
            Some((_, b)) if *b >= *v => best,
            _ => Some((k, v)),
        })
    else {
        return Vec::new();
    };
    if max <= T::zero() {
        return Vec::new();
    }
    let threshold = max / T::lit(2.0);
    let marked: Vec<usize> = (0..values.len()).filter(|&k| values[k] > threshold).collect();
    if marked.is_empty() {
        vec![argmax]
    } else {
        marked
    }
}
