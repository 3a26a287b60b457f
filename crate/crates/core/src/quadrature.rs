//! Symmetric triangle rules up to degree 19 and Gauss–Legendre rules on segments.

use fenris_quadrature::{polyquad, univariate};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Highest supported polynomial degree of the triangle rules.
pub const MAX_DEGREE: usize = 19;

/// Triangle rule in barycentric coordinates; weights sum to one, so that
/// `∫_K f ≈ |K| Σ_q w_q f(x_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
    pub exact_degree: usize,
}

/// Smallest tabulated symmetric rule (all weights positive, all nodes interior) exact
/// for polynomials of total degree `degree`.
pub fn triangle_quadrature<T: Scalar>(degree: usize) -> Result<QuadratureRule<T>> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    let (weights, points) =
        polyquad::triangle(degree).map_err(|_| Error::UnsupportedDegree(degree))?;
    // reference triangle (−1,−1), (1,−1), (−1,1) of area 2
    let points = points
        .iter()
        .map(|&[x, y]| {
            let l1 = (x + 1.0) / 2.0;
            let l2 = (y + 1.0) / 2.0;
            [T::lit(1.0 - l1 - l2), T::lit(l1), T::lit(l2)]
        })
        .collect();
    let weights = weights.iter().map(|&w| T::lit(w / 2.0)).collect();
    Ok(QuadratureRule {
        points,
        weights,
        exact_degree: degree,
    })
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integral over the reference triangle `(0,0), (1,0), (0,1)` of `f(x, y)`.
    pub fn integrate_reference(&self, f: impl Fn(T, T) -> T) -> T {
        let half = T::lit(0.5);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(l, &w)| w * f(l[1], l[2]))
            .sum::<T>()
            * half
    }

    /// Uniform (red) refinement into `4^levels` sub-rules, expressed in the barycentric
    /// coordinates of the parent triangle.
    pub fn subdivided(&self, levels: usize) -> Self {
        let mut triangles: Vec<[[T; 3]; 3]> = vec![[
            [T::one(), T::zero(), T::zero()],
            [T::zero(), T::one(), T::zero()],
            [T::zero(), T::zero(), T::one()],
        ]];
        for _ in 0..levels {
            triangles = triangles.iter().flat_map(|t| red_children(t)).collect();
        }
        let scale = T::one() / T::from_count(triangles.len());
        let mut points = Vec::with_capacity(triangles.len() * self.len());
        let mut weights = Vec::with_capacity(points.capacity());
        for t in &triangles {
            for (l, &w) in self.points.iter().zip(&self.weights) {
                let mut p = [T::zero(); 3];
                for (c, pc) in p.iter_mut().enumerate() {
                    *pc = l[0] * t[0][c] + l[1] * t[1][c] + l[2] * t[2][c];
                }
                points.push(p);
                weights.push(w * scale);
            }
        }
        Self {
            points,
            weights,
            exact_degree: self.exact_degree,
        }
    }
}

fn red_children<T: Scalar>(t: &[[T; 3]; 3]) -> [[[T; 3]; 3]; 4] {
    let half = T::lit(0.5);
    let mid = |a: &[T; 3], b: &[T; 3]| [(a[0] + b[0]) * half, (a[1] + b[1]) * half, (a[2] + b[2]) * half];
    let (m01, m12, m20) = (mid(&t[0], &t[1]), mid(&t[1], &t[2]), mid(&t[2], &t[0]));
    [
        [t[0], m01, m20],
        [m01, t[1], m12],
        [m20, m12, t[2]],
        [m12, m20, m01],
    ]
}

/// Gauss–Legendre rule on `[0, 1]`: `(nodes, weights)` with weights summing to one.
pub fn gauss_segment<T: Scalar>(points: usize) -> (Vec<T>, Vec<T>) {
    let (weights, nodes) = univariate::gauss(points);
    (
        nodes.iter().map(|&[x]| T::lit((x + 1.0) / 2.0)).collect(),
        weights.iter().map(|&w| T::lit(w / 2.0)).collect(),
    )
}
