//! Local shape functions and the global degree-of-freedom layout of the Taylor–Hood
//! (P2/P1) and mini (P1+bubble/P1) pairs.

use crate::geometry::ElementGeometry;
use crate::mesh::Mesh;
use crate::scalar::{dot, Point2, Scalar};

/// Largest number of local scalar velocity basis functions (P2).
pub const MAX_LOCAL: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    TaylorHood,
    Mini,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Velocity,
    Pressure,
}

impl PairKind {
    /// Local scalar velocity functions per element.
    pub fn velocity_local_count(self) -> usize {
        match self {
            PairKind::TaylorHood => 6,
            PairKind::Mini => 4,
        }
    }
}

/// Values and physical gradients of the local scalar basis at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValues<T> {
    pub n: usize,
    pub values: [T; MAX_LOCAL],
    pub gradients: [Point2<T>; MAX_LOCAL],
}

impl<T: Scalar> ShapeValues<T> {
    fn zeroed(n: usize) -> Self {
        Self {
            n,
            values: [T::zero(); MAX_LOCAL],
            gradients: [[T::zero(); 2]; MAX_LOCAL],
        }
    }
}

/// Linear basis `λ_0, λ_1, λ_2`.
pub fn p1_shape<T: Scalar>(geom: &ElementGeometry<T>, bary: [T; 3]) -> ShapeValues<T> {
    let mut s = ShapeValues::zeroed(3);
    for i in 0..3 {
        s.values[i] = bary[i];
        s.gradients[i] = geom.grad_lambda[i];
    }
    s
}

/// Velocity basis of the pair: P2 as `[λ_i(2λ_i−1); 4λ_{i+1}λ_{i+2}]`, or P1 plus the
/// bubble `27λ_0λ_1λ_2` (value one at the barycenter).
pub fn velocity_shape<T: Scalar>(pair: PairKind, geom: &ElementGeometry<T>, bary: [T; 3]) -> ShapeValues<T> {
    let g = &geom.grad_lambda;
    let l = bary;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    match pair {
        PairKind::TaylorHood => {
            let mut s = ShapeValues::zeroed(6);
            for i in 0..3 {
                s.values[i] = l[i] * (two * l[i] - T::one());
                let c = four * l[i] - T::one();
                s.gradients[i] = [c * g[i][0], c * g[i][1]];
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                s.values[3 + i] = four * l[j] * l[k];
                s.gradients[3 + i] = [
                    four * (l[j] * g[k][0] + l[k] * g[j][0]),
                    four * (l[j] * g[k][1] + l[k] * g[j][1]),
                ];
            }
            s
        }
        PairKind::Mini => {
            let mut s = p1_shape(geom, bary);
            s.n = 4;
            let c = T::lit(27.0);
            s.values[3] = c * l[0] * l[1] * l[2];
            s.gradients[3] = [
                c * (l[1] * l[2] * g[0][0] + l[0] * l[2] * g[1][0] + l[0] * l[1] * g[2][0]),
                c * (l[1] * l[2] * g[0][1] + l[0] * l[2] * g[1][1] + l[0] * l[1] * g[2][1]),
            ];
            s
        }
    }
}

/// Laplacians of the velocity basis: constant for P2, zero for P1 and linear for the bubble.
pub fn velocity_laplacians<T: Scalar>(pair: PairKind, geom: &ElementGeometry<T>, bary: [T; 3]) -> [T; MAX_LOCAL] {
    let g = &geom.grad_lambda;
    let mut out = [T::zero(); MAX_LOCAL];
    match pair {
        PairKind::TaylorHood => {
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                out[i] = T::lit(4.0) * dot(g[i], g[i]);
                out[3 + i] = T::lit(8.0) * dot(g[j], g[k]);
            }
        }
        PairKind::Mini => {
            let l = bary;
            out[3] = T::lit(54.0) * (l[0] * dot(g[1], g[2]) + l[1] * dot(g[0], g[2]) + l[2] * dot(g[0], g[1]));
        }
    }
    out
}

/// Shape values and gradients of either field of the pair at a physical point `x ∈ K`.
pub fn shape_eval<T: Scalar>(
    pair: PairKind,
    component: Component,
    geom: &ElementGeometry<T>,
    x: Point2<T>,
) -> ShapeValues<T> {
    let bary = geom.barycentric(x);
    match component {
        Component::Velocity => velocity_shape(pair, geom, bary),
        Component::Pressure => p1_shape(geom, bary),
    }
}

/// Global numbering of a mixed velocity/pressure pair over a mesh.
///
/// Unknown vectors are laid out as `[u_x (n_scalar), u_y (n_scalar), p (n_pressure)]`.
/// Scalar velocity dofs are numbered vertices first, then edges (Taylor–Hood) or element
/// bubbles (mini); pressure dofs are the mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSpace<T> {
    pub pair: PairKind,
    n_scalar: usize,
    n_pressure: usize,
    element_dofs: Vec<[usize; MAX_LOCAL]>,
    dirichlet: Vec<bool>,
    /// Interpolation node of each Lagrange dof, `None` for bubbles.
    nodes: Vec<Option<Point2<T>>>,
    /// Boundary segments carrying each Dirichlet dof.
    boundary_segments: Vec<Vec<usize>>,
}

impl<T: Scalar> MixedSpace<T> {
    pub fn new(mesh: &Mesh<T>, pair: PairKind) -> Self {
        let nv = mesh.n_vertices();
        let n_extra = match pair {
            PairKind::TaylorHood => mesh.n_edges(),
            PairKind::Mini => mesh.n_elements(),
        };
        let n_scalar = nv + n_extra;
        let element_dofs = (0..mesh.n_elements())
            .map(|k| {
                let tri = mesh.element(k);
                let mut dofs = [usize::MAX; MAX_LOCAL];
                dofs[..3].copy_from_slice(&tri);
                match pair {
                    PairKind::TaylorHood => {
                        for (i, e) in mesh.element_edges(k).into_iter().enumerate() {
                            dofs[3 + i] = nv + e;
                        }
                    }
                    PairKind::Mini => dofs[3] = nv + k,
                }
                dofs
            })
            .collect();

        let vertex_tags = mesh.vertex_boundary_tags();
        let mut dirichlet = vec![false; n_scalar];
        let mut nodes: Vec<Option<Point2<T>>> = mesh.vertices().iter().map(|&v| Some(v)).collect();
        let mut boundary_segments = vertex_tags.clone();
        for (v, tags) in vertex_tags.iter().enumerate() {
            dirichlet[v] = !tags.is_empty();
        }
        match pair {
            PairKind::TaylorHood => {
                for e in 0..mesh.n_edges() {
                    nodes.push(Some(mesh.edge_midpoint(e)));
                    let tag = mesh.boundary_tag(e);
                    dirichlet[nv + e] = tag.is_some();
                    boundary_segments.push(tag.into_iter().collect());
                }
            }
            PairKind::Mini => {
                nodes.extend(std::iter::repeat(None).take(mesh.n_elements()));
                boundary_segments.extend(std::iter::repeat(Vec::new()).take(mesh.n_elements()));
            }
        }
        Self {
            pair,
            n_scalar,
            n_pressure: nv,
            element_dofs,
            dirichlet,
            nodes,
            boundary_segments,
        }
    }

    /// Scalar velocity dofs per component.
    pub fn n_scalar(&self) -> usize {
        self.n_scalar
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_scalar
    }

    pub fn n_pressure(&self) -> usize {
        self.n_pressure
    }

    /// `Ndof = dim V + dim P`, pressure counted before the mean constraint.
    pub fn ndof(&self) -> usize {
        self.n_velocity() + self.n_pressure
    }

    pub fn n_local(&self) -> usize {
        self.pair.velocity_local_count()
    }

    /// Global scalar velocity dofs of element `k`.
    pub fn element_dofs(&self, k: usize) -> &[usize] {
        &self.element_dofs[k][..self.n_local()]
    }

    /// Pressure dofs of element `k` (its vertices).
    pub fn element_pressure_dofs(&self, k: usize) -> [usize; 3] {
        let d = self.element_dofs[k];
        [d[0], d[1], d[2]]
    }

    pub fn velocity_index(&self, component: usize, scalar: usize) -> usize {
        component * self.n_scalar + scalar
    }

    pub fn pressure_index(&self, q: usize) -> usize {
        self.n_velocity() + q
    }

    pub fn is_dirichlet(&self, scalar: usize) -> bool {
        self.dirichlet[scalar]
    }

    pub fn dirichlet_flags(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn node(&self, scalar: usize) -> Option<Point2<T>> {
        self.nodes[scalar]
    }

    pub fn boundary_segments(&self, scalar: usize) -> &[usize] {
        &self.boundary_segments[scalar]
    }

    /// Velocity value and Jacobian (`jac[c][d] = ∂_d u_c`) of the coefficient vector
    /// `coeffs` on element `k`, given the local shape values there. `coeffs` may be the
    /// velocity block alone or the full stacked unknown vector.
    pub fn velocity_at(&self, k: usize, shape: &ShapeValues<T>, coeffs: &[T]) -> (Point2<T>, [Point2<T>; 2]) {
        let mut u = [T::zero(); 2];
        let mut jac = [[T::zero(); 2]; 2];
        for (i, &d) in self.element_dofs(k).iter().enumerate() {
            for c in 0..2 {
                let a = coeffs[self.velocity_index(c, d)];
                u[c] += a * shape.values[i];
                jac[c][0] += a * shape.gradients[i][0];
                jac[c][1] += a * shape.gradients[i][1];
            }
        }
        (u, jac)
    }

    /// Pressure value and gradient on element `k` from the full stacked vector.
    pub fn pressure_at(&self, k: usize, p1: &ShapeValues<T>, coeffs: &[T]) -> (T, Point2<T>) {
        let mut p = T::zero();
        let mut g = [T::zero(); 2];
        for (i, q) in self.element_pressure_dofs(k).into_iter().enumerate() {
            let a = coeffs[self.pressure_index(q)];
            p += a * p1.values[i];
            g[0] += a * p1.gradients[i][0];
            g[1] += a * p1.gradients[i][1];
        }
        (p, g)
    }
}
