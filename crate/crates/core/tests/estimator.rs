mod common;

use bdf_afem::estimator::{edge_jump_norm, element_residual_norm, local_indicator};
use bdf_afem::experiments::ExperimentConfig;
use bdf_afem::{
    adapt, compute_indicators, global_estimator, mark, picard_solve, triangle_quadrature, DiscreteSolution,
    DomainSpec, EstimatorSetup, Mesh, MixedSpace, PairKind, PicardOptions, PointSource, ProblemData, SolutionPair,
    WeightSpec,
};
use common::{gauss_legendre, lagrange_basis, rng, single_element, velocity_basis};
use rand::Rng;

const PAIRS: [(PairKind, bool); 2] = [(PairKind::TaylorHood, true), (PairKind::Mini, false)];

#[test]
fn residual_of_pure_pressure_gradient() {
    let mesh = single_element([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let space = MixedSpace::new(&mesh, PairKind::TaylorHood);
    let mut sol = SolutionPair::zeros(&space);
    assert_eq!(element_residual_norm(&DiscreteSolution::new(&mesh, &space, &sol), 0), 0.0);
    // p = x
    for (q, v) in space.element_pressure_dofs(0).into_iter().enumerate() {
        sol.p[v] = mesh.geometry(0).vertices[q][0];
    }
    let r = element_residual_norm(&DiscreteSolution::new(&mesh, &space, &sol), 0);
    assert!((r - 0.5f64.sqrt()).abs() < 1e-14, "{r}");
}

/// Residual oracle from the Vandermonde basis; Laplacian of the bubble by the product
/// rule on the linear Lagrange functions.
fn oracle_residual(v: [[f64; 2]; 3], th: bool, ux: &[f64], uy: &[f64], p: &[f64]) -> f64 {
    let quad = lagrange_basis(v, true);
    let lin = lagrange_basis(v, false);
    let rule = triangle_quadrature::<f64>(19).unwrap();
    let area = bdf_afem::ElementGeometry::new(v).area;
    let mut sum = 0.0;
    for (bary, w) in rule.points.iter().zip(&rule.weights) {
        let x = [0, 1].map(|d| bary[0] * v[0][d] + bary[1] * v[1][d] + bary[2] * v[2][d]);
        let basis = velocity_basis(v, th, x);
        let lap: Vec<f64> = if th {
            quad.iter().map(|b| b.laplacian()).collect()
        } else {
            let l: Vec<f64> = lin.iter().map(|b| b.value(x)).collect();
            let g: Vec<[f64; 2]> = lin.iter().map(|b| b.grad(x)).collect();
            let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
            let bubble = 54.0 * (l[0] * dot(g[1], g[2]) + l[1] * dot(g[0], g[2]) + l[2] * dot(g[0], g[1]));
            vec![0.0, 0.0, 0.0, bubble]
        };
        let coef = [ux, uy];
        let mut u = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        let mut lap_u = [0.0; 2];
        for c in 0..2 {
            for (i, (phi, grad)) in basis.iter().enumerate() {
                u[c] += coef[c][i] * phi;
                jac[c][0] += coef[c][i] * grad[0];
                jac[c][1] += coef[c][i] * grad[1];
                lap_u[c] += coef[c][i] * lap[i];
            }
        }
        let grad_p = [0, 1].map(|d| (0..3).map(|q| p[q] * lin[q].grad(x)[d]).sum::<f64>());
        let div = jac[0][0] + jac[1][1];
        let speed = u[0].hypot(u[1]);
        for c in 0..2 {
            let r = lap_u[c] - u[c] - (u[0] * jac[c][0] + u[1] * jac[c][1]) - u[c] * div - speed * u[c] - grad_p[c];
            sum += w * area * r * r;
        }
    }
    sum.sqrt()
}

#[test]
fn residual_matches_independent_evaluation_on_random_elements() {
    let mut r = rng(31);
    for _ in 0..10 {
        let v = common::random_triangle(&mut r);
        let mesh = single_element(v);
        let geom_vertices = mesh.geometry(0).vertices;
        for (pair, th) in PAIRS {
            let space = MixedSpace::new(&mesh, pair);
            let n = pair.velocity_local_count();
            // a dominant constant keeps |u| away from its kink at zero
            let ux: Vec<f64> = (0..n).map(|i| if !th && i == 3 { 0.0 } else { 3.0 } + r.random_range(-0.5..0.5)).collect();
            let uy: Vec<f64> = (0..n).map(|_| r.random_range(-0.5..0.5)).collect();
            let p: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
            let mut sol = SolutionPair::zeros(&space);
            for (i, &d) in space.element_dofs(0).iter().enumerate() {
                sol.u[space.velocity_index(0, d)] = ux[i];
                sol.u[space.velocity_index(1, d)] = uy[i];
            }
            for (q, dof) in space.element_pressure_dofs(0).into_iter().enumerate() {
                sol.p[dof] = p[q];
            }
            let got = element_residual_norm(&DiscreteSolution::new(&mesh, &space, &sol), 0);
            let want = oracle_residual(geom_vertices, th, &ux, &uy, &p);
            assert!((got - want).abs() <= 1e-11 * want, "{pair:?}: {got} vs {want}");
        }
    }
}

fn two_triangle_square() -> Mesh<f64> {
    Mesh::from_triangles(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap()
}

fn interior_edge(mesh: &Mesh<f64>) -> usize {
    (0..mesh.n_edges()).find(|&e| !mesh.is_boundary_edge(e)).unwrap()
}

#[test]
fn no_jump_for_globally_linear_velocity_and_constant_pressure() {
    let mesh = Mesh::build(&DomainSpec::unit_square()).unwrap();
    for (pair, _) in PAIRS {
        let space = MixedSpace::new(&mesh, pair);
        let mut sol = SolutionPair::zeros(&space);
        for d in 0..space.n_scalar() {
            if let Some(x) = space.node(d) {
                sol.u[space.velocity_index(0, d)] = 2.0 * x[0] - x[1] + 0.3;
                sol.u[space.velocity_index(1, d)] = -0.5 * x[0] + 4.0 * x[1];
            }
        }
        sol.p.iter_mut().for_each(|p| *p = 1.7);
        let discrete = DiscreteSolution::new(&mesh, &space, &sol);
        for e in 0..mesh.n_edges() {
            assert!(edge_jump_norm(&mesh, &discrete, e) < 1e-13);
        }
    }
}

#[test]
fn unit_normal_derivative_jump_gives_square_root_of_length() {
    // u_x = max(x − y, 0)/√2 has a kink of unit normal slope across the diagonal
    let mesh = two_triangle_square();
    let space = MixedSpace::new(&mesh, PairKind::TaylorHood);
    let mut sol = SolutionPair::zeros(&space);
    for d in 0..space.n_scalar() {
        let x = space.node(d).unwrap();
        sol.u[space.velocity_index(0, d)] = (x[0] - x[1]).max(0.0) / 2f64.sqrt();
    }
    let discrete = DiscreteSolution::new(&mesh, &space, &sol);
    let e = interior_edge(&mesh);
    let got = edge_jump_norm(&mesh, &discrete, e);
    let want = mesh.edge_length(e).sqrt();
    assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    for b in (0..mesh.n_edges()).filter(|&b| mesh.is_boundary_edge(b)) {
        assert_eq!(edge_jump_norm(&mesh, &discrete, b), 0.0);
    }
}

#[test]
fn jump_matches_independent_evaluation() {
    let mut r = rng(32);
    let mesh = two_triangle_square();
    let e = interior_edge(&mesh);
    let [a, b] = mesh.edge(e);
    let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
    for (pair, th) in PAIRS {
        let space = MixedSpace::new(&mesh, pair);
        let mut sol = SolutionPair::zeros(&space);
        sol.u.iter_mut().for_each(|u| *u = r.random_range(-1.0..1.0));
        sol.p.iter_mut().for_each(|p| *p = r.random_range(-1.0..1.0));
        let (nodes, weights) = gauss_legendre(6);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let mut sum = 0.0;
        for (t, w) in nodes.iter().zip(&weights) {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let mut jump = [0.0; 2];
            for k in 0..2 {
                let v = mesh.geometry(k).vertices;
                let third = *v.iter().find(|p| **p != pa && **p != pb).unwrap();
                let mut nu = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                if nu[0] * (third[0] - pa[0]) + nu[1] * (third[1] - pa[1]) > 0.0 {
                    nu = [-nu[0], -nu[1]];
                }
                let basis = velocity_basis(v, th, x);
                let lin = lagrange_basis(v, false);
                let dofs = space.element_dofs(k);
                let pdofs = space.element_pressure_dofs(k);
                let p: f64 = (0..3).map(|q| sol.p[pdofs[q]] * lin[q].value(x)).sum();
                for c in 0..2 {
                    let mut dn = 0.0;
                    for (i, (_, g)) in basis.iter().enumerate() {
                        dn += sol.u[space.velocity_index(c, dofs[i])] * (g[0] * nu[0] + g[1] * nu[1]);
                    }
                    jump[c] += dn - p * nu[c];
                }
            }
            sum += w * len * (jump[0] * jump[0] + jump[1] * jump[1]);
        }
        let got = edge_jump_norm(&mesh, &DiscreteSolution::new(&mesh, &space, &sol), e);
        assert!((got - sum.sqrt()).abs() <= 1e-12 * (1.0 + got), "{pair:?}: {got} vs {}", sum.sqrt());
    }
}

#[test]
fn dirac_term_alone_for_zero_solution() {
    let mesh = single_element([[0.0, 0.0], [0.8, 0.1], [0.2, 0.7]]);
    let space = MixedSpace::new(&mesh, PairKind::TaylorHood);
    let sol = SolutionPair::zeros(&space);
    let discrete = DiscreteSolution::new(&mesh, &space, &sol);
    let h = mesh.geometry(0).diameter();
    assert!(h < 1.0);
    let mut previous = f64::INFINITY;
    for alpha in [0.5, 1.0, 1.5] {
        let setup = EstimatorSetup::single(alpha, PointSource::new([0.3, 0.25], [1.0, 1.0])).unwrap();
        let terms = local_indicator(&mesh, &discrete, &setup, 0);
        assert!((terms.total_sq() - 2.0 * h.powf(alpha)).abs() < 1e-14);
        assert_eq!(terms.residual + terms.divergence + terms.jump, 0.0);
        assert!(terms.dirac < previous);
        previous = terms.dirac;
        let field = compute_indicators(&mesh, &discrete, &setup);
        assert!((field.values[0] - terms.total_sq().sqrt()).abs() < 1e-15);
    }
    let none = EstimatorSetup::for_sources(1.0, vec![], &mesh).unwrap();
    assert_eq!(compute_indicators(&mesh, &discrete, &none).global, 0.0);
}

#[test]
fn vertex_source_charges_every_element_around_it() {
    // hexagonal fan around the origin with an outer ring of triangles
    let mut vertices = vec![[0.0, 0.0]];
    let angle = |i: usize, offset: f64| std::f64::consts::PI / 3.0 * (i as f64 + offset);
    vertices.extend((0..6).map(|i| [angle(i, 0.0).cos(), angle(i, 0.0).sin()]));
    vertices.extend((0..6).map(|i| [2.0 * angle(i, 0.5).cos(), 2.0 * angle(i, 0.5).sin()]));
    let mut elements = Vec::new();
    for i in 0..6 {
        let (a, b) = (1 + i, 1 + (i + 1) % 6);
        elements.push([0, a, b]);
        elements.push([a, 7 + i, b]);
    }
    let mesh = Mesh::from_triangles(vertices, elements).unwrap();
    let space = MixedSpace::new(&mesh, PairKind::Mini);
    let sol = SolutionPair::zeros(&space);
    let discrete = DiscreteSolution::new(&mesh, &space, &sol);
    let setup = EstimatorSetup::single(1.0, PointSource::new([0.0, 0.0], [1.0, 1.0])).unwrap();
    let field = compute_indicators(&mesh, &discrete, &setup);
    assert_eq!(mesh.n_elements(), 12);
    assert_eq!(field.terms.iter().filter(|t| t.dirac > 0.0).count(), 6);
}

#[test]
fn two_separated_sources_charge_two_elements() {
    // the T-shape sources nudged off the mesh skeleton so each lies inside one element
    let mesh = Mesh::<f64>::build(&DomainSpec::t_shape()).unwrap();
    let sources = vec![
        PointSource::new([0.0123, 0.5071], [1.0, 1.0]),
        PointSource::new([0.0123, -0.9929], [1.0, 1.0]),
    ];
    let space = MixedSpace::new(&mesh, PairKind::TaylorHood);
    let sol = SolutionPair::zeros(&space);
    let discrete = DiscreteSolution::new(&mesh, &space, &sol);
    let setup = EstimatorSetup::multi(1.0, sources.clone(), &mesh).unwrap();
    let field = compute_indicators(&mesh, &discrete, &setup);
    let charged: Vec<usize> = (0..mesh.n_elements()).filter(|&k| field.terms[k].dirac > 0.0).collect();
    assert_eq!(charged.len(), 2);
    for &k in &charged {
        assert_eq!(sources.iter().filter(|s| mesh.geometry(k).contains(s.z)).count(), 1);
        let h = mesh.geometry(k).diameter();
        assert!((field.terms[k].dirac - 2.0 * h).abs() < 1e-13);
    }
    assert!(EstimatorSetup::multi(1.0, vec![], &mesh).is_err());
}

fn example1_solution(mesh: &Mesh<f64>, space: &MixedSpace<f64>) -> SolutionPair<f64> {
    let data = ExperimentConfig::example1().problem_data();
    picard_solve(mesh, space, &data, PicardOptions::default()).unwrap().0
}

#[test]
fn multi_source_estimator_reduces_to_single_source_for_wide_separation() {
    let config = ExperimentConfig::example1();
    let mesh = Mesh::build(&config.domain).unwrap().refine_uniformly(1);
    let space = MixedSpace::new(&mesh, PairKind::TaylorHood);
    let sol = example1_solution(&mesh, &space);
    let discrete = DiscreteSolution::new(&mesh, &space, &sol);
    let source = PointSource::new([0.5, 0.5], [1.0, 1.0]);
    let single = compute_indicators(&mesh, &discrete, &EstimatorSetup::single(1.0, source).unwrap());
    let composite = EstimatorSetup {
        alpha: 1.0,
        sources: vec![source],
        weight: WeightSpec::Composite {
            alpha: 1.0,
            sources: vec![source.z],
            separation: 1e3,
        },
    };
    let multi = compute_indicators(&mesh, &discrete, &composite);
    for (&d, &e) in multi.values.iter().zip(&single.values) {
        assert!((d - e).abs() <= 1e-12 * e, "{d} vs {e}");
    }
    // global and local consistency with the term breakdown
    let sum_sq: f64 = multi.values.iter().map(|v| v * v).sum();
    assert!((multi.global * multi.global - sum_sq).abs() <= 1e-12 * sum_sq);
    for (v, t) in multi.values.iter().zip(&multi.terms) {
        assert!((v * v - t.total_sq()).abs() <= 1e-12 * t.total_sq());
        assert!(t.residual >= 0.0 && t.divergence >= 0.0 && t.jump >= 0.0 && t.dirac >= 0.0);
    }
}

#[test]
fn global_estimator_and_marking_rules() {
    assert_eq!(global_estimator(&[3.0, 4.0]), 5.0);
    assert_eq!(global_estimator::<f64>(&[0.0, 0.0]), 0.0);
    assert_eq!(mark(&[2.0, 2.0, 2.0]), vec![0, 1, 2]);
    assert_eq!(mark(&[0.0, 5.0, 0.0]), vec![1]);
    assert!(mark(&[0.0, 0.0]).is_empty());
    // strict inequality leaves exact halves unmarked
    assert_eq!(mark(&[4.0, 2.0, 2.1]), vec![0, 2]);
}

#[test]
fn zero_sources_leave_the_mesh_alone() {
    let mut problem = ExperimentConfig::example1().adaptive_problem().unwrap();
    problem.data = ProblemData::point_sources(vec![]);
    problem.iterations = 4;
    let outcome = adapt(&problem).unwrap();
    assert_eq!(outcome.trace.rows.len(), 4);
    let first = outcome.trace.rows[0].elements;
    for row in &outcome.trace.rows {
        assert_eq!(row.estimator, 0.0);
        assert_eq!(row.elements, first);
    }
}
