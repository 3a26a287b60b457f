//! Affine triangle geometry: barycentric coordinates, gradients of the barycentric
//! functions, diameters and edge normals.

use crate::scalar::{cross, dist, sub, Point2, Scalar};

/// Barycentric inclusion tolerance for closed triangles.
pub const INCLUSION_TOL: f64 = 1e-12;

/// Geometry of one (counterclockwise) triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry<T> {
    pub vertices: [Point2<T>; 3],
    /// Gradients of the barycentric coordinates, constant on the triangle.
    pub grad_lambda: [Point2<T>; 3],
    pub area: T,
}

impl<T: Scalar> ElementGeometry<T> {
    pub fn new(vertices: [Point2<T>; 3]) -> Self {
        let twice_area = cross(sub(vertices[1], vertices[0]), sub(vertices[2], vertices[0]));
        let mut grad_lambda = [[T::zero(); 2]; 3];
        for i in 0..3 {
            let a = vertices[(i + 1) % 3];
            let b = vertices[(i + 2) % 3];
            grad_lambda[i] = [(a[1] - b[1]) / twice_area, (b[0] - a[0]) / twice_area];
        }
        Self {
            vertices,
            grad_lambda,
            area: twice_area / T::lit(2.0),
        }
    }

    /// Signed area, positive for counterclockwise vertex order.
    pub fn signed_area(&self) -> T {
        self.area
    }

    pub fn barycentric(&self, x: Point2<T>) -> [T; 3] {
        let l1 = self.lambda_affine(1, x);
        let l2 = self.lambda_affine(2, x);
        [T::one() - l1 - l2, l1, l2]
    }

    fn lambda_affine(&self, i: usize, x: Point2<T>) -> T {
        // λ_i vanishes on the opposite edge, which passes through vertex i+1.
        let g = self.grad_lambda[i];
        let base = self.vertices[(i + 1) % 3];
        g[0] * (x[0] - base[0]) + g[1] * (x[1] - base[1])
    }

    pub fn point(&self, bary: [T; 3]) -> Point2<T> {
        let v = &self.vertices;
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    pub fn centroid(&self) -> Point2<T> {
        let third = T::one() / T::lit(3.0);
        self.point([third; 3])
    }

    /// Length of edge `i`, the edge opposite vertex `i`.
    pub fn edge_length(&self, i: usize) -> T {
        dist(self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3])
    }

    /// `diam(K)`, the longest edge length.
    pub fn diameter(&self) -> T {
        self.edge_length(0)
            .max(self.edge_length(1))
            .max(self.edge_length(2))
    }

    /// Outward unit normal on edge `i` (opposite vertex `i`).
    pub fn outward_normal(&self, i: usize) -> Point2<T> {
        let a = self.vertices[(i + 1) % 3];
        let b = self.vertices[(i + 2) % 3];
        let t = sub(b, a);
        let len = t[0].hypot(t[1]);
        // counterclockwise orientation: the outward side is to the right of a→b
        [t[1] / len, -t[0] / len]
    }

    /// Closed-triangle membership with the barycentric tolerance [`INCLUSION_TOL`].
    pub fn contains(&self, x: Point2<T>) -> bool {
        let tol = T::lit(INCLUSION_TOL);
        self.barycentric(x).iter().all(|&l| l >= -tol)
    }

    /// `max_{x∈K} |x − z|`, attained at a vertex.
    pub fn local_distance(&self, z: Point2<T>) -> T {
        self.vertices
            .iter()
            .map(|&v| dist(v, z))
            .fold(T::zero(), T::max)
    }

    /// Smallest interior angle in radians.
    pub fn min_angle(&self) -> T {
        let mut best = T::infinity();
        for i in 0..3 {
            let p = self.vertices[i];
            let a = sub(self.vertices[(i + 1) % 3], p);
            let b = sub(self.vertices[(i + 2) % 3], p);
            let angle = cross(a, b).abs().atan2(a[0] * b[0] + a[1] * b[1]);
            best = best.min(angle);
        }
        best
    }
}

/// `min_{z∈Z} max_{x∈K} |x − z|`.
pub fn multi_source_distance<T: Scalar>(
    element: &ElementGeometry<T>,
    sources: &[Point2<T>],
) -> crate::Result<T> {
    if sources.is_empty() {
        return Err(crate::Error::Argument(
            "multi-source distance needs at least one source".into(),
        ));
    }
    Ok(sources
        .iter()
        .map(|&z| element.local_distance(z))
        .fold(T::infinity(), T::min))
}
