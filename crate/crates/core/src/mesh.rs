//! Conforming triangulations of rectilinear polygonal domains, patch queries and
//! longest-edge bisection with conformity closure.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::geometry::ElementGeometry;
use crate::scalar::{cross, dist, sub, Point2, Scalar};
use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// The experiment domains, plus arbitrary rectilinear polygons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    UnitSquare,
    LShape,
    TShape,
    Polygon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec<T> {
    pub kind: DomainKind,
    /// Boundary vertices; only read for [`DomainKind::Polygon`].
    pub polygon: Vec<Point2<T>>,
}

impl<T: Scalar> DomainSpec<T> {
    /// `(0,1)²`.
    pub fn unit_square() -> Self {
        Self {
            kind: DomainKind::UnitSquare,
            polygon: Vec::new(),
        }
    }

    /// `(−1,1)² ∖ [0,1)×(−1,0]`.
    pub fn l_shape() -> Self {
        Self {
            kind: DomainKind::LShape,
            polygon: Vec::new(),
        }
    }

    /// `((−1.5,1.5)×(0,1)) ∪ ((−0.5,0.5)×(−2,1))`.
    pub fn t_shape() -> Self {
        Self {
            kind: DomainKind::TShape,
            polygon: Vec::new(),
        }
    }

    pub fn polygon(vertices: Vec<Point2<T>>) -> Self {
        Self {
            kind: DomainKind::Polygon,
            polygon: vertices,
        }
    }

    /// Boundary polygon. Side `i` joins vertex `i` to vertex `i+1`; boundary segment tags
    /// index these sides.
    pub fn outline(&self) -> Vec<Point2<T>> {
        let pts: &[[f64; 2]] = match self.kind {
            DomainKind::UnitSquare => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            DomainKind::LShape => &[
                [-1.0, -1.0],
                [0.0, -1.0],
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [-1.0, 1.0],
            ],
            DomainKind::TShape => &[
                [-0.5, -2.0],
                [0.5, -2.0],
                [0.5, 0.0],
                [1.5, 0.0],
                [1.5, 1.0],
                [-1.5, 1.0],
                [-1.5, 0.0],
                [-0.5, 0.0],
            ],
            DomainKind::Polygon => return self.polygon.clone(),
        };
        pts.iter().map(|p| [T::lit(p[0]), T::lit(p[1])]).collect()
    }

    /// Shoelace area of the outline.
    pub fn area(&self) -> T {
        polygon_signed_area(&self.outline()).abs()
    }
}

fn polygon_signed_area<T: Scalar>(poly: &[Point2<T>]) -> T {
    let n = poly.len();
    let mut s = T::zero();
    for i in 0..n {
        s += cross(poly[i], poly[(i + 1) % n]);
    }
    s / T::lit(2.0)
}

/// Conforming triangulation with edge connectivity and boundary segment tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    vertices: Vec<Point2<T>>,
    elements: Vec<[usize; 3]>,
    /// Sorted vertex pairs.
    edges: Vec<[usize; 2]>,
    /// Incident elements; the second entry is `NONE` on the boundary.
    edge_elements: Vec<[usize; 2]>,
    /// Local edge `i` of an element is the edge opposite its vertex `i`.
    element_edges: Vec<[usize; 3]>,
    boundary_tags: Vec<Option<usize>>,
    refinement_edge: Vec<usize>,
}

/// Output of [`Mesh::bisect`].
#[derive(Debug, Clone)]
pub struct Refinement<T> {
    pub mesh: Mesh<T>,
    /// For each new element, the element of the input mesh containing it.
    pub parent: Vec<usize>,
}

impl<T: Scalar> Mesh<T> {
    /// Criss-cross triangulation of the domain: every cell of an axis-aligned grid is split
    /// into four triangles through its centroid.
    pub fn build(domain: &DomainSpec<T>) -> Result<Self> {
        let mut outline = domain.outline();
        validate_polygon(&outline)?;
        if polygon_signed_area(&outline) < T::zero() {
            outline.reverse();
        }
        let h = match domain.kind {
            DomainKind::UnitSquare => T::lit(0.5),
            DomainKind::LShape | DomainKind::TShape => T::one(),
            DomainKind::Polygon => grid_spacing(&outline)?,
        };

        let xmin = outline.iter().map(|p| p[0]).fold(T::infinity(), T::min);
        let ymin = outline.iter().map(|p| p[1]).fold(T::infinity(), T::min);
        let xmax = outline.iter().map(|p| p[0]).fold(T::neg_infinity(), T::max);
        let ymax = outline.iter().map(|p| p[1]).fold(T::neg_infinity(), T::max);
        let nx = ((xmax - xmin) / h).round().to_usize().unwrap_or(0);
        let ny = ((ymax - ymin) / h).round().to_usize().unwrap_or(0);

        // vertex keys in half-cell units
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut vertices = Vec::new();
        let half = h / T::lit(2.0);
        let mut vertex = |key: (usize, usize)| -> usize {
            *ids.entry(key).or_insert_with(|| {
                vertices.push([
                    xmin + T::from_count(key.0) * half,
                    ymin + T::from_count(key.1) * half,
                ]);
                vertices.len() - 1
            })
        };
        let mut elements = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let center = [
                    xmin + (T::from_count(i) + T::lit(0.5)) * h,
                    ymin + (T::from_count(j) + T::lit(0.5)) * h,
                ];
                if !point_in_polygon(&outline, center) {
                    continue;
                }
                let c00 = vertex((2 * i, 2 * j));
                let c10 = vertex((2 * i + 2, 2 * j));
                let c11 = vertex((2 * i + 2, 2 * j + 2));
                let c01 = vertex((2 * i, 2 * j + 2));
                let m = vertex((2 * i + 1, 2 * j + 1));
                elements.extend_from_slice(&[[c00, c10, m], [c10, c11, m], [c11, c01, m], [c01, c00, m]]);
            }
        }
        if elements.is_empty() {
            return Err(Error::Geometry("polygon covers no grid cell".into()));
        }

        let tol = h * T::lit(1e-9);
        let tag_of = |a: Point2<T>, b: Point2<T>| -> Option<usize> {
            (0..outline.len()).find(|&s| {
                let p = outline[s];
                let q = outline[(s + 1) % outline.len()];
                point_segment_distance(a, p, q) <= tol && point_segment_distance(b, p, q) <= tol
            })
        };
        let mesh = Self::assemble(vertices, elements, |verts, a, b| tag_of(verts[a], verts[b]))?;
        mesh.check_conformity()?;
        Ok(mesh)
    }

    /// Mesh from raw triangles (counterclockwise or not); every boundary edge gets tag 0.
    pub fn from_triangles(vertices: Vec<Point2<T>>, elements: Vec<[usize; 3]>) -> Result<Self> {
        let mut elements = elements;
        for tri in &mut elements {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Geometry("triangle references a missing vertex".into()));
            }
            let g = ElementGeometry::new([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if g.signed_area() < T::zero() {
                tri.swap(1, 2);
            }
        }
        let mesh = Self::assemble(vertices, elements, |_, _, _| Some(0))?;
        mesh.check_conformity()?;
        Ok(mesh)
    }

    fn assemble(
        vertices: Vec<Point2<T>>,
        elements: Vec<[usize; 3]>,
        boundary_tag: impl Fn(&[Point2<T>], usize, usize) -> Option<usize>,
    ) -> Result<Self> {
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_elements: Vec<[usize; 2]> = Vec::new();
        let mut element_edges = Vec::with_capacity(elements.len());
        for (k, tri) in elements.iter().enumerate() {
            let mut local = [0; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_elements.push([NONE, NONE]);
                    edges.len() - 1
                });
                let inc = &mut edge_elements[e];
                if inc[0] == NONE {
                    inc[0] = k;
                } else if inc[1] == NONE {
                    inc[1] = k;
                } else {
                    return Err(Error::Geometry(format!(
                        "edge ({}, {}) shared by more than two triangles",
                        key.0, key.1
                    )));
                }
                *slot = e;
            }
            element_edges.push(local);
        }
        let mut boundary_tags = vec![None; edges.len()];
        for (e, inc) in edge_elements.iter().enumerate() {
            if inc[1] == NONE {
                let tag = boundary_tag(&vertices, edges[e][0], edges[e][1]).ok_or_else(|| {
                    Error::Geometry(format!("boundary edge {e} lies on no boundary segment"))
                })?;
                boundary_tags[e] = Some(tag);
            }
        }
        let refinement_edge = elements
            .iter()
            .map(|tri| longest_local_edge(&vertices, tri))
            .collect();
        Ok(Self {
            vertices,
            elements,
            edges,
            edge_elements,
            element_edges,
            boundary_tags,
            refinement_edge,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point2<T> {
        self.vertices[v]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> [usize; 3] {
        self.elements[k]
    }

    pub fn geometry(&self, k: usize) -> ElementGeometry<T> {
        let [a, b, c] = self.elements[k];
        ElementGeometry::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// The one or two elements incident to edge `e`.
    pub fn edge_elements(&self, e: usize) -> (usize, Option<usize>) {
        let [a, b] = self.edge_elements[e];
        (a, (b != NONE).then_some(b))
    }

    pub fn element_edges(&self, k: usize) -> [usize; 3] {
        self.element_edges[k]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_elements[e][1] == NONE
    }

    /// Boundary segment label of a boundary edge, `None` for interior edges.
    pub fn boundary_tag(&self, e: usize) -> Option<usize> {
        self.boundary_tags[e]
    }

    /// Local index of the longest edge of element `k`.
    pub fn refinement_edge(&self, k: usize) -> usize {
        self.refinement_edge[k]
    }

    pub fn edge_midpoint(&self, e: usize) -> Point2<T> {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [(p[0] + q[0]) / T::lit(2.0), (p[1] + q[1]) / T::lit(2.0)]
    }

    pub fn edge_length(&self, e: usize) -> T {
        let [a, b] = self.edges[e];
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn area(&self) -> T {
        (0..self.n_elements()).map(|k| self.geometry(k).area).sum()
    }

    /// Boundary segment tags touching each vertex (empty for interior vertices).
    pub fn vertex_boundary_tags(&self) -> Vec<Vec<usize>> {
        let mut tags = vec![Vec::new(); self.n_vertices()];
        for e in 0..self.n_edges() {
            if let Some(tag) = self.boundary_tags[e] {
                for v in self.edges[e] {
                    if !tags[v].contains(&tag) {
                        tags[v].push(tag);
                    }
                }
            }
        }
        tags
    }

    /// Elements incident to each vertex, in increasing order.
    pub fn vertex_elements(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for (k, tri) in self.elements.iter().enumerate() {
            for &v in tri {
                adj[v].push(k);
            }
        }
        adj
    }

    /// Structural checks: positive areas, one or two elements per edge, Euler relation
    /// `V − E + T = 1` and boundary tags on exactly the boundary edges.
    pub fn check_conformity(&self) -> Result<()> {
        for k in 0..self.n_elements() {
            if self.geometry(k).signed_area() <= T::zero() {
                return Err(Error::Geometry(format!("element {k} has nonpositive area")));
            }
        }
        for e in 0..self.n_edges() {
            let boundary = self.is_boundary_edge(e);
            if boundary != self.boundary_tags[e].is_some() {
                return Err(Error::Geometry(format!("edge {e} has inconsistent boundary tag")));
            }
        }
        // A hanging node shows up as a vertex in the interior of some edge.
        let euler = self.n_vertices() as i64 - self.n_edges() as i64 + self.n_elements() as i64;
        if euler != 1 {
            return Err(Error::Geometry(format!("Euler characteristic {euler} != 1")));
        }
        let mut boundary_vertices = BTreeSet::new();
        for e in (0..self.n_edges()).filter(|&e| self.is_boundary_edge(e)) {
            boundary_vertices.extend(self.edges[e]);
        }
        let n_boundary_edges = (0..self.n_edges()).filter(|&e| self.is_boundary_edge(e)).count();
        if boundary_vertices.len() != n_boundary_edges {
            return Err(Error::Geometry("boundary is not a single closed curve".into()));
        }
        Ok(())
    }

    /// Every element whose closed triangle contains `x`.
    pub fn locate_point(&self, x: Point2<T>) -> Vec<usize> {
        (0..self.n_elements())
            .filter(|&k| self.geometry(k).contains(x))
            .collect()
    }

    /// `(N_K, N_K*)`: elements sharing an interior side with `k`, and elements sharing at
    /// least a vertex with `k`. Both include `k` and are sorted.
    pub fn patches(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let mut side = BTreeSet::from([k]);
        for e in self.element_edges[k] {
            let (a, b) = self.edge_elements(e);
            side.insert(a);
            if let Some(b) = b {
                side.insert(b);
            }
        }
        let tri = self.elements[k];
        let point: BTreeSet<usize> = (0..self.n_elements())
            .filter(|&j| self.elements[j].iter().any(|v| tri.contains(v)))
            .collect();
        (side.into_iter().collect(), point.into_iter().collect())
    }

    /// Longest-edge bisection of every marked element, closed by longest-edge propagation
    /// so that no hanging nodes remain.
    pub fn bisect(&self, marked: &[usize]) -> Refinement<T> {
        let mut work = BisectionWork::new(self);
        let mut order: Vec<usize> = marked.to_vec();
        order.sort_unstable();
        order.dedup();
        // a marked element already split by an earlier path keeps its slot for one
        // child, so compare against the generation before any refinement
        for k in order {
            while work.generation[k] == 0 {
                work.refine_path(k);
            }
        }
        work.finish()
    }

    /// `rounds` sweeps of bisecting every element.
    pub fn refine_uniformly(&self, rounds: usize) -> Self {
        let mut mesh = self.clone();
        for _ in 0..rounds {
            let all: Vec<usize> = (0..mesh.n_elements()).collect();
            mesh = mesh.bisect(&all).mesh;
        }
        mesh
    }

    /// Plain-text dump: vertex list then triangle list.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vertices {}", self.n_vertices());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e}", v[0].as_f64(), v[1].as_f64());
        }
        let _ = writeln!(out, "triangles {}", self.n_elements());
        for t in &self.elements {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    /// Parses [`Mesh::to_text`] output; boundary edges are tagged 0.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Geometry(format!("mesh text: {msg}"));
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let count = |line: Option<&&str>, name: &str| -> Result<usize> {
            line.and_then(|l| l.strip_prefix(name))
                .and_then(|n| n.trim().parse().ok())
                .ok_or_else(|| bad(&format!("expected `{name} <count>`")))
        };
        let numbers = |line: &str| -> Result<Vec<f64>> {
            line.split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("bad number")))
                .collect()
        };
        let nv = count(lines.first(), "vertices")?;
        let nt = count(lines.get(nv + 1), "triangles")?;
        if lines.len() < nv + nt + 2 {
            return Err(bad("truncated"));
        }
        let mut vertices = Vec::with_capacity(nv);
        for line in &lines[1..=nv] {
            match numbers(line)?.as_slice() {
                [x, y] => vertices.push([T::lit(*x), T::lit(*y)]),
                _ => return Err(bad("vertex needs two coordinates")),
            }
        }
        let mut elements = Vec::with_capacity(nt);
        for line in &lines[nv + 2..nv + 2 + nt] {
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("bad index")))
                .collect::<Result<_>>()?;
            match ids.as_slice() {
                [a, b, c] => elements.push([*a, *b, *c]),
                _ => return Err(bad("triangle needs three indices")),
            }
        }
        Self::from_triangles(vertices, elements)
    }
}

/// Bucket grid for repeated point location.
#[derive(Debug, Clone)]
pub struct PointLocator<'a, T> {
    mesh: &'a Mesh<T>,
    origin: Point2<T>,
    cell: T,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a, T: Scalar> PointLocator<'a, T> {
    pub fn new(mesh: &'a Mesh<T>) -> Self {
        let vs = mesh.vertices();
        let xmin = vs.iter().map(|p| p[0]).fold(T::infinity(), T::min);
        let ymin = vs.iter().map(|p| p[1]).fold(T::infinity(), T::min);
        let xmax = vs.iter().map(|p| p[0]).fold(T::neg_infinity(), T::max);
        let ymax = vs.iter().map(|p| p[1]).fold(T::neg_infinity(), T::max);
        let n = (mesh.n_elements() as f64).sqrt().ceil().max(1.0);
        let span = (xmax - xmin).max(ymax - ymin);
        let cell = span / T::lit(n);
        let nx = ((xmax - xmin) / cell).floor().to_usize().unwrap_or(0) + 1;
        let ny = ((ymax - ymin) / cell).floor().to_usize().unwrap_or(0) + 1;
        let origin = [xmin, ymin];
        let mut buckets = vec![Vec::new(); nx * ny];
        let slack = cell * T::lit(1e-9);
        for k in 0..mesh.n_elements() {
            let g = mesh.geometry(k);
            let lo = |d: usize| g.vertices.iter().map(|p| p[d]).fold(T::infinity(), T::min) - slack;
            let hi = |d: usize| g.vertices.iter().map(|p| p[d]).fold(T::neg_infinity(), T::max) + slack;
            let (i0, i1) = (Self::index(lo(0), xmin, cell, nx), Self::index(hi(0), xmin, cell, nx));
            let (j0, j1) = (Self::index(lo(1), ymin, cell, ny), Self::index(hi(1), ymin, cell, ny));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(k);
                }
            }
        }
        Self {
            mesh,
            origin,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn index(x: T, origin: T, cell: T, n: usize) -> usize {
        let i = ((x - origin) / cell).floor();
        if i < T::zero() {
            0
        } else {
            i.to_usize().unwrap_or(n - 1).min(n - 1)
        }
    }

    /// Same contract as [`Mesh::locate_point`].
    pub fn locate(&self, x: Point2<T>) -> Vec<usize> {
        let i = Self::index(x[0], self.origin[0], self.cell, self.nx);
        let j = Self::index(x[1], self.origin[1], self.cell, self.ny);
        self.buckets[j * self.nx + i]
            .iter()
            .copied()
            .filter(|&k| self.mesh.geometry(k).contains(x))
            .collect()
    }
}

fn longest_local_edge<T: Scalar>(vertices: &[Point2<T>], tri: &[usize; 3]) -> usize {
    let len2 = |i: usize| {
        let d = sub(vertices[tri[(i + 1) % 3]], vertices[tri[(i + 2) % 3]]);
        d[0] * d[0] + d[1] * d[1]
    };
    let tol = T::lit(1e-12);
    let mut best = 0;
    for i in 1..3 {
        let (li, lb) = (len2(i), len2(best));
        if li > lb * (T::one() + tol) || (li >= lb * (T::one() - tol) && tri[i] < tri[best]) {
            best = i;
        }
    }
    best
}

struct BisectionWork<T> {
    vertices: Vec<Point2<T>>,
    tris: Vec<[usize; 3]>,
    origin: Vec<usize>,
    generation: Vec<u32>,
    edge_map: HashMap<(usize, usize), [usize; 2]>,
    boundary: HashMap<(usize, usize), usize>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl<T: Scalar> BisectionWork<T> {
    fn new(mesh: &Mesh<T>) -> Self {
        let mut edge_map = HashMap::with_capacity(mesh.n_edges());
        let mut boundary = HashMap::new();
        for e in 0..mesh.n_edges() {
            let [a, b] = mesh.edges[e];
            edge_map.insert((a, b), mesh.edge_elements[e]);
            if let Some(tag) = mesh.boundary_tags[e] {
                boundary.insert((a, b), tag);
            }
        }
        Self {
            vertices: mesh.vertices.clone(),
            tris: mesh.elements.clone(),
            origin: (0..mesh.n_elements()).collect(),
            generation: vec![0; mesh.n_elements()],
            edge_map,
            boundary,
        }
    }

    fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        let tri = self.tris[t];
        let inc = self.edge_map[&key(tri[(i + 1) % 3], tri[(i + 2) % 3])];
        let other = if inc[0] == t { inc[1] } else { inc[0] };
        (other != NONE).then_some(other)
    }

    fn edge_len2(&self, t: usize, i: usize) -> T {
        let tri = self.tris[t];
        let d = sub(self.vertices[tri[(i + 1) % 3]], self.vertices[tri[(i + 2) % 3]]);
        d[0] * d[0] + d[1] * d[1]
    }

    fn local_index_of_edge(&self, t: usize, a: usize, b: usize) -> usize {
        let tri = self.tris[t];
        (0..3)
            .find(|&i| key(tri[(i + 1) % 3], tri[(i + 2) % 3]) == key(a, b))
            .expect("neighbor shares the edge")
    }

    /// Follows the longest-edge propagation path from `t` and bisects its terminal edge.
    fn refine_path(&mut self, mut t: usize) {
        loop {
            let i = longest_local_edge(&self.vertices, &self.tris[t]);
            let Some(n) = self.neighbor(t, i) else {
                self.split_edge(t, i, None);
                return;
            };
            let tri = self.tris[t];
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let j = self.local_index_of_edge(n, a, b);
            let jn = longest_local_edge(&self.vertices, &self.tris[n]);
            let shared = self.edge_len2(t, i);
            if jn == j || self.edge_len2(n, jn) <= shared * (T::one() + T::lit(1e-12)) {
                self.split_edge(t, i, Some((n, j)));
                return;
            }
            t = n;
        }
    }

    fn split_edge(&mut self, t: usize, i: usize, other: Option<(usize, usize)>) {
        let tri = self.tris[t];
        let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let two = T::lit(2.0);
        self.vertices.push([(pa[0] + pb[0]) / two, (pa[1] + pb[1]) / two]);
        let m = self.vertices.len() - 1;
        self.edge_map.remove(&key(a, b));
        if let Some(tag) = self.boundary.remove(&key(a, b)) {
            self.boundary.insert(key(a, m), tag);
            self.boundary.insert(key(m, b), tag);
        }
        self.split_triangle(t, i, m);
        if let Some((n, j)) = other {
            self.split_triangle(n, j, m);
        }
    }

    fn add_incidence(&mut self, e: (usize, usize), t: usize) {
        let inc = self.edge_map.entry(e).or_insert([NONE, NONE]);
        if inc[0] == NONE {
            inc[0] = t;
        } else {
            debug_assert_eq!(inc[1], NONE);
            inc[1] = t;
        }
    }

    fn split_triangle(&mut self, t: usize, i: usize, m: usize) {
        let tri = self.tris[t];
        let (p, a, b) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let n = self.tris.len();
        self.tris[t] = [p, a, m];
        self.tris.push([p, m, b]);
        self.origin.push(self.origin[t]);
        self.generation[t] += 1;
        self.generation.push(0);
        let inc = self.edge_map.get_mut(&key(b, p)).expect("edge present");
        for slot in inc.iter_mut() {
            if *slot == t {
                *slot = n;
            }
        }
        self.add_incidence(key(a, m), t);
        self.add_incidence(key(m, b), n);
        self.add_incidence(key(p, m), t);
        self.add_incidence(key(p, m), n);
    }

    fn finish(self) -> Refinement<T> {
        let boundary = self.boundary;
        let mesh = Mesh::assemble(self.vertices, self.tris, |_, a, b| boundary.get(&key(a, b)).copied())
            .expect("bisection preserves conformity");
        Refinement {
            mesh,
            parent: self.origin,
        }
    }
}

fn validate_polygon<T: Scalar>(poly: &[Point2<T>]) -> Result<()> {
    let n = poly.len();
    if n < 4 {
        return Err(Error::Geometry("polygon needs at least four vertices".into()));
    }
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        if p == q {
            return Err(Error::Geometry(format!("repeated polygon vertex {i}")));
        }
        if p[0] != q[0] && p[1] != q[1] {
            return Err(Error::Geometry(format!("polygon side {i} is not axis-aligned")));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (p1, p2) = (poly[i], poly[(i + 1) % n]);
            let (q1, q2) = (poly[j], poly[(j + 1) % n]);
            if adjacent {
                // adjacent sides may only share their common vertex
                let shared = if j == i + 1 { p2 } else { p1 };
                let (far_p, far_q) = if j == i + 1 { (p1, q2) } else { (p2, q1) };
                let u = sub(far_p, shared);
                let v = sub(far_q, shared);
                if cross(u, v) == T::zero() && u[0] * v[0] + u[1] * v[1] > T::zero() {
                    return Err(Error::Geometry(format!("polygon sides {i} and {j} overlap")));
                }
            } else if segments_intersect(p1, p2, q1, q2) {
                return Err(Error::Geometry(format!("polygon sides {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

fn segments_intersect<T: Scalar>(p1: Point2<T>, p2: Point2<T>, q1: Point2<T>, q2: Point2<T>) -> bool {
    let orient = |a: Point2<T>, b: Point2<T>, c: Point2<T>| {
        let v = cross(sub(b, a), sub(c, a));
        if v > T::zero() {
            1
        } else if v < T::zero() {
            -1
        } else {
            0
        }
    };
    let on_segment = |a: Point2<T>, b: Point2<T>, c: Point2<T>| {
        c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
    let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && on_segment(q1, q2, p1))
        || (d2 == 0 && on_segment(q1, q2, p2))
        || (d3 == 0 && on_segment(p1, p2, q1))
        || (d4 == 0 && on_segment(p1, p2, q2))
}

/// Largest dyadic spacing `2^{-k}` on which all polygon coordinates lie.
fn grid_spacing<T: Scalar>(poly: &[Point2<T>]) -> Result<T> {
    let xmin = poly.iter().map(|p| p[0]).fold(T::infinity(), T::min);
    let ymin = poly.iter().map(|p| p[1]).fold(T::infinity(), T::min);
    let mut h = T::one();
    for _ in 0..30 {
        let on_grid = |c: T, origin: T| {
            let r = (c - origin) / h;
            (r - r.round()).abs() <= T::lit(1e-9)
        };
        if poly.iter().all(|p| on_grid(p[0], xmin) && on_grid(p[1], ymin)) {
            return Ok(h);
        }
        h = h / T::lit(2.0);
    }
    Err(Error::Geometry("polygon vertices do not lie on a dyadic grid".into()))
}

fn point_in_polygon<T: Scalar>(poly: &[Point2<T>], x: Point2<T>) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let t = (x[1] - a[1]) / (b[1] - a[1]);
            if x[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

pub(crate) fn point_segment_distance<T: Scalar>(x: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((x[0] - a[0]) * ab[0] + (x[1] - a[1]) * ab[1]) / len2;
    let t = t.max(T::zero()).min(T::one());
    dist(x, [a[0] + t * ab[0], a[1] + t * ab[1]])
}
