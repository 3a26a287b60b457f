//! Power weights `|x − z|^{±α}`, the composite multi-source weight ρ, and weighted
//! `L²` / `H¹`-seminorm evaluation.

use crate::geometry::ElementGeometry;
use crate::mesh::{point_segment_distance, Mesh};
use crate::quadrature::{triangle_quadrature, QuadratureRule, MAX_DEGREE};
use crate::scalar::{dist, Point2, Scalar};
use crate::{Error, Result};

/// Uniform subdivision levels applied to elements touching a singular point of the weight.
pub const NEAR_SOURCE_LEVELS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec<T> {
    Unweighted,
    /// `|x − z|^{sign·α}`.
    Power { alpha: T, sign: T, z: Point2<T> },
    /// `ρ(x) = |x − z|^α` inside `B(z, d_Z/2)` for the (unique) nearby source, `1` elsewhere.
    Composite {
        alpha: T,
        sources: Vec<Point2<T>>,
        separation: T,
    },
}

impl<T: Scalar> WeightSpec<T> {
    /// `sign` must be `+1` or `−1` and `sign·α ∈ (−2, 2)`.
    pub fn power(alpha: T, sign: T, z: Point2<T>) -> Result<Self> {
        if sign != T::one() && sign != -T::one() {
            return Err(Error::Argument("weight sign must be +1 or -1".into()));
        }
        let two = T::lit(2.0);
        if !(alpha > -two && alpha < two) {
            return Err(Error::Argument(format!("power weight exponent {alpha} outside (-2, 2)")));
        }
        Ok(Self::Power { alpha, sign, z })
    }

    /// Composite weight for the sources `Z`; the separation radius
    /// `d_Z = min(dist(Z, ∂Ω), min |z − z'|)` is measured against the mesh boundary.
    pub fn composite(alpha: T, sources: Vec<Point2<T>>, mesh: &Mesh<T>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Argument("composite weight needs at least one source".into()));
        }
        let two = T::lit(2.0);
        if !(alpha > -two && alpha < two) {
            return Err(Error::Argument(format!("weight exponent {alpha} outside (-2, 2)")));
        }
        let mut separation = T::infinity();
        for (i, &z) in sources.iter().enumerate() {
            if mesh.locate_point(z).is_empty() {
                return Err(Error::SourceOutsideDomain { x: z[0].as_f64(), y: z[1].as_f64() });
            }
            for e in (0..mesh.n_edges()).filter(|&e| mesh.is_boundary_edge(e)) {
                let [a, b] = mesh.edge(e);
                separation = separation.min(point_segment_distance(z, mesh.vertex(a), mesh.vertex(b)));
            }
            for &other in &sources[i + 1..] {
                separation = separation.min(dist(z, other));
            }
        }
        if separation <= T::zero() {
            return Err(Error::Argument("sources must be distinct interior points".into()));
        }
        Ok(Self::Composite {
            alpha,
            sources,
            separation,
        })
    }

    /// Points where the weight is singular or degenerate.
    pub fn singular_points(&self) -> &[Point2<T>] {
        match self {
            WeightSpec::Unweighted => &[],
            WeightSpec::Power { z, .. } => std::slice::from_ref(z),
            WeightSpec::Composite { sources, .. } => sources,
        }
    }

    pub fn value(&self, x: Point2<T>) -> Result<T> {
        match self {
            WeightSpec::Unweighted => Ok(T::one()),
            WeightSpec::Power { alpha, sign, z } => power(dist(x, *z), *alpha * *sign),
            WeightSpec::Composite {
                alpha,
                sources,
                separation,
            } => {
                let radius = *separation / T::lit(2.0);
                match sources.iter().map(|&z| dist(x, z)).find(|&r| r < radius) {
                    Some(r) => power(r, *alpha),
                    None => Ok(T::one()),
                }
            }
        }
    }
}

fn power<T: Scalar>(r: T, exponent: T) -> Result<T> {
    if exponent == T::zero() {
        Ok(T::one())
    } else if r == T::zero() && exponent < T::zero() {
        Err(Error::SingularWeight)
    } else {
        Ok(r.powf(exponent))
    }
}

/// Quantity that can be sampled elementwise: the squared magnitude of a field and of its
/// gradient at a point `x` of element `element` with barycentric coordinates `bary`.
pub trait ElementField<T: Scalar> {
    fn value_sq(&self, element: usize, x: Point2<T>, bary: [T; 3]) -> T;
    fn gradient_sq(&self, element: usize, x: Point2<T>, bary: [T; 3]) -> T;
}

/// Analytic scalar field given by its value and gradient.
pub struct ScalarFunction<F, G>(pub F, pub G);

impl<T, F, G> ElementField<T> for ScalarFunction<F, G>
where
    T: Scalar,
    F: Fn(Point2<T>) -> T,
    G: Fn(Point2<T>) -> Point2<T>,
{
    fn value_sq(&self, _: usize, x: Point2<T>, _: [T; 3]) -> T {
        let v = (self.0)(x);
        v * v
    }

    fn gradient_sq(&self, _: usize, x: Point2<T>, _: [T; 3]) -> T {
        let g = (self.1)(x);
        g[0] * g[0] + g[1] * g[1]
    }
}

/// Analytic vector field given by its value and Jacobian (`jac[c][d] = ∂_d u_c`).
pub struct VectorFunction<F, G>(pub F, pub G);

impl<T, F, G> ElementField<T> for VectorFunction<F, G>
where
    T: Scalar,
    F: Fn(Point2<T>) -> Point2<T>,
    G: Fn(Point2<T>) -> [Point2<T>; 2],
{
    fn value_sq(&self, _: usize, x: Point2<T>, _: [T; 3]) -> T {
        let v = (self.0)(x);
        v[0] * v[0] + v[1] * v[1]
    }

    fn gradient_sq(&self, _: usize, x: Point2<T>, _: [T; 3]) -> T {
        let j = (self.1)(x);
        j[0][0] * j[0][0] + j[0][1] * j[0][1] + j[1][0] * j[1][0] + j[1][1] * j[1][1]
    }
}

/// Degree-19 element integration against a weight, subdividing near singular points.
#[derive(Debug, Clone)]
pub struct WeightedIntegrator<T> {
    rule: QuadratureRule<T>,
    refined: QuadratureRule<T>,
}

impl<T: Scalar> Default for WeightedIntegrator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> WeightedIntegrator<T> {
    pub fn new() -> Self {
        let rule = triangle_quadrature(MAX_DEGREE).expect("degree-19 rule available");
        let refined = rule.subdivided(NEAR_SOURCE_LEVELS);
        Self { rule, refined }
    }

    /// `∫_K f(x, λ(x)) w(x) dx`.
    pub fn integrate(
        &self,
        geom: &ElementGeometry<T>,
        weight: &WeightSpec<T>,
        f: impl Fn(Point2<T>, [T; 3]) -> T,
    ) -> T {
        let singular: Vec<Point2<T>> = weight
            .singular_points()
            .iter()
            .copied()
            .filter(|&z| geom.contains(z))
            .collect();
        let rule = if singular.is_empty() { &self.rule } else { &self.refined };
        let h = geom.diameter();
        let centroid = geom.centroid();
        let mut sum = T::zero();
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let mut x = geom.point(*bary);
            let mut b = *bary;
            if singular.iter().any(|&z| dist(x, z) <= T::lit(1e-14) * h) {
                x = nudge_inward(x, centroid, geom, h);
                b = geom.barycentric(x);
            }
            let wx = weight.value(x).unwrap_or(T::zero());
            sum += w * wx * f(x, b);
        }
        sum * geom.area
    }
}

/// Moves `x` by `1e-12·h` toward the centroid (toward vertex 0 if `x` is the centroid).
fn nudge_inward<T: Scalar>(x: Point2<T>, centroid: Point2<T>, geom: &ElementGeometry<T>, h: T) -> Point2<T> {
    let mut d = [centroid[0] - x[0], centroid[1] - x[1]];
    let mut len = d[0].hypot(d[1]);
    if len == T::zero() {
        d = [geom.vertices[0][0] - x[0], geom.vertices[0][1] - x[1]];
        len = d[0].hypot(d[1]);
    }
    let step = T::lit(1e-12) * h / len;
    [x[0] + step * d[0], x[1] + step * d[1]]
}

/// `(Σ_K ∫_K |field|² w)^{1/2}`.
pub fn weighted_l2_norm<T: Scalar>(field: &impl ElementField<T>, weight: &WeightSpec<T>, mesh: &Mesh<T>) -> T {
    let integrator = WeightedIntegrator::new();
    (0..mesh.n_elements())
        .map(|k| integrator.integrate(&mesh.geometry(k), weight, |x, b| field.value_sq(k, x, b)))
        .sum::<T>()
        .sqrt()
}

/// `(Σ_K ∫_K |∇field|² w)^{1/2}`.
pub fn weighted_h1_seminorm<T: Scalar>(field: &impl ElementField<T>, weight: &WeightSpec<T>, mesh: &Mesh<T>) -> T {
    let integrator = WeightedIntegrator::new();
    (0..mesh.n_elements())
        .map(|k| integrator.integrate(&mesh.geometry(k), weight, |x, b| field.gradient_sq(k, x, b)))
        .sum::<T>()
        .sqrt()
}
