//! Independent oracles shared by the integration tests: a collapsed Gauss rule, Lagrange
//! bases built from monomial Vandermonde systems, and dense Gaussian elimination.

#![allow(dead_code)]

use bdf_afem::mesh::Mesh;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Gauss–Legendre nodes and weights on `[0, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Collapsed (Duffy) tensor rule on a physical triangle: points and weights summing to
/// the area. Exact for polynomials of degree `2n − 2`.
pub fn duffy_rule(v: [[f64; 2]; 3], n: usize) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(n);
    let det = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs();
    let mut out = Vec::with_capacity(n * n);
    for (i, &s) in x.iter().enumerate() {
        for (j, &t) in x.iter().enumerate() {
            let (a, b) = (s, t * (1.0 - s));
            let p = [
                v[0][0] + a * (v[1][0] - v[0][0]) + b * (v[2][0] - v[0][0]),
                v[0][1] + a * (v[1][1] - v[0][1]) + b * (v[2][1] - v[0][1]),
            ];
            out.push((p, w[i] * w[j] * (1.0 - s) * det));
        }
    }
    out
}

/// Dense solve with partial pivoting; `None` for a (numerically) singular matrix.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Numerical rank by elimination with full pivoting and a relative threshold.
pub fn dense_rank(mut a: Vec<Vec<f64>>, rel_tol: f64) -> usize {
    let (m, n) = (a.len(), a[0].len());
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut rank = 0;
    for step in 0..m.min(n) {
        let mut best = (step, step, 0.0f64);
        for (i, row) in a.iter().enumerate().skip(step) {
            for (j, v) in row.iter().enumerate().skip(step) {
                if v.abs() > best.2 {
                    best = (i, j, v.abs());
                }
            }
        }
        if best.2 <= rel_tol * scale {
            break;
        }
        a.swap(step, best.0);
        for row in a.iter_mut() {
            row.swap(step, best.1);
        }
        for r in step + 1..m {
            let f = a[r][step] / a[step][step];
            for c in step..n {
                a[r][c] -= f * a[step][c];
            }
        }
        rank += 1;
    }
    rank
}

/// Quadratic or linear polynomial in monomial form around the origin.
#[derive(Debug, Clone, Copy)]
pub struct Poly {
    /// Coefficients of `1, x, y, x², xy, y²`.
    pub c: [f64; 6],
}

impl Poly {
    pub fn value(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        self.c[0] + self.c[1] * x + self.c[2] * y + self.c[3] * x * x + self.c[4] * x * y + self.c[5] * y * y
    }

    pub fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        [
            self.c[1] + 2.0 * self.c[3] * x + self.c[4] * y,
            self.c[2] + self.c[4] * x + 2.0 * self.c[5] * y,
        ]
    }

    pub fn laplacian(&self) -> f64 {
        2.0 * (self.c[3] + self.c[5])
    }
}

/// Lagrange basis on the nodes `[v0, v1, v2, m12, m20, m01]` (quadratic) or the
/// vertices (linear), from the Vandermonde matrix in monomials.
pub fn lagrange_basis(v: [[f64; 2]; 3], quadratic: bool) -> Vec<Poly> {
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let nodes: Vec<[f64; 2]> = if quadratic {
        vec![v[0], v[1], v[2], mid(v[1], v[2]), mid(v[2], v[0]), mid(v[0], v[1])]
    } else {
        v.to_vec()
    };
    let n = nodes.len();
    let monomials = |p: [f64; 2]| -> Vec<f64> {
        let all = [1.0, p[0], p[1], p[0] * p[0], p[0] * p[1], p[1] * p[1]];
        all[..n].to_vec()
    };
    (0..n)
        .map(|i| {
            let a: Vec<Vec<f64>> = nodes.iter().map(|&p| monomials(p)).collect();
            let rhs: Vec<f64> = (0..n).map(|r| if r == i { 1.0 } else { 0.0 }).collect();
            let coef = dense_solve(a, rhs).expect("unisolvent nodes");
            let mut c = [0.0; 6];
            c[..n].copy_from_slice(&coef);
            Poly { c }
        })
        .collect()
}

/// Value and gradient of every local scalar velocity function at `p`, in the crate's
/// local order: P2 (`taylor_hood`) or P1 plus the cubic bubble.
pub fn velocity_basis(v: [[f64; 2]; 3], taylor_hood: bool, p: [f64; 2]) -> Vec<(f64, [f64; 2])> {
    if taylor_hood {
        lagrange_basis(v, true).iter().map(|b| (b.value(p), b.grad(p))).collect()
    } else {
        let lin = lagrange_basis(v, false);
        let l: Vec<f64> = lin.iter().map(|b| b.value(p)).collect();
        let g: Vec<[f64; 2]> = lin.iter().map(|b| b.grad(p)).collect();
        let mut out: Vec<(f64, [f64; 2])> = l.iter().zip(&g).map(|(&a, &b)| (a, b)).collect();
        let bubble = 27.0 * l[0] * l[1] * l[2];
        let gb = [0, 1].map(|d| 27.0 * (g[0][d] * l[1] * l[2] + l[0] * g[1][d] * l[2] + l[0] * l[1] * g[2][d]));
        out.push((bubble, gb));
        out
    }
}

/// Random counterclockwise triangle with minimum angle bounded away from zero.
pub fn random_triangle(rng: &mut StdRng) -> [[f64; 2]; 3] {
    loop {
        let v: [[f64; 2]; 3] = std::array::from_fn(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        let area2 = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let g = bdf_afem::geometry::ElementGeometry::new(if area2 > 0.0 { v } else { [v[0], v[2], v[1]] });
        if g.min_angle() > 0.3 {
            return g.vertices;
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn single_element(v: [[f64; 2]; 3]) -> Mesh<f64> {
    Mesh::from_triangles(v.to_vec(), vec![[0, 1, 2]]).expect("valid triangle")
}
