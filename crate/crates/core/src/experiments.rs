//! Experiment configurations and drivers: the three point-source examples, the
//! manufactured-solution convergence study, effectivity indices and VTK output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adaptivity::{adapt_with, fit_rate, AdaptiveProblem, AdaptiveTrace, IterationState};
use crate::assembly::{check_source, DirichletData, PointSource};
use crate::estimator::IndicatorField;
use crate::mesh::{DomainKind, DomainSpec, Mesh, PointLocator};
use crate::scalar::Point2;
use crate::solver::{
    picard_solve, DiscreteSolution, PicardOptions, PressureError, ProblemData, SolutionPair, VelocityError,
    PICARD_MAX_ITER, PICARD_TOL,
};
use crate::spaces::{MixedSpace, PairKind};
use crate::weights::{weighted_h1_seminorm, weighted_l2_norm, WeightSpec, WeightedIntegrator};
use crate::{Error, Result};

/// Boundary data presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirichletPreset {
    Zero,
    TShapeInflow,
}

impl DirichletPreset {
    pub fn data(self) -> DirichletData<f64> {
        match self {
            DirichletPreset::Zero => DirichletData::zero(),
            DirichletPreset::TShapeInflow => DirichletData::t_shape_inflow(),
        }
    }
}

/// Everything one adaptive run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainSpec<f64>,
    pub pair: PairKind,
    pub alpha: f64,
    pub sources: Vec<PointSource<f64>>,
    pub dirichlet: DirichletPreset,
    pub iterations: usize,
    pub nonlinear: bool,
    pub tol: f64,
    pub max_picard: usize,
    /// Trailing trace rows used for the fitted rate.
    pub rate_tail: usize,
    pub timing: bool,
    pub ndof_cap: Option<usize>,
    pub output: PathBuf,
}

pub const PRESETS: [&str; 4] = ["example1", "example2", "example3", "manufactured"];

impl ExperimentConfig {
    fn base(domain: DomainSpec<f64>, sources: Vec<PointSource<f64>>, iterations: usize, name: &str) -> Self {
        Self {
            domain,
            pair: PairKind::TaylorHood,
            alpha: 1.0,
            sources,
            dirichlet: DirichletPreset::Zero,
            iterations,
            nonlinear: true,
            tol: PICARD_TOL,
            max_picard: PICARD_MAX_ITER,
            rate_tail: 10,
            timing: true,
            ndof_cap: None,
            output: PathBuf::from("out").join(name),
        }
    }

    /// Unit square, `z = (0.5, 0.5)`, `F = (1, 1)`, 20 iterations.
    pub fn example1() -> Self {
        Self::base(
            DomainSpec::unit_square(),
            vec![PointSource::new([0.5, 0.5], [1.0, 1.0])],
            20,
            "example1",
        )
    }

    /// L-shape, `z = (0.5, 0.5)`, `F = (1, 1)`, 40 iterations.
    pub fn example2() -> Self {
        Self::base(
            DomainSpec::l_shape(),
            vec![PointSource::new([0.5, 0.5], [1.0, 1.0])],
            40,
            "example2",
        )
    }

    /// T-shape with sources at `(0, 0.5)` and `(0, −1)` and lateral inflow, 60 iterations.
    pub fn example3() -> Self {
        let mut c = Self::base(
            DomainSpec::t_shape(),
            vec![
                PointSource::new([0.0, 0.5], [1.0, 1.0]),
                PointSource::new([0.0, -1.0], [1.0, 1.0]),
            ],
            60,
            "example3",
        );
        c.dirichlet = DirichletPreset::TShapeInflow;
        c
    }

    /// Unit square without point sources; the adaptive driver is not used for the
    /// manufactured solution, see [`verify_manufactured`].
    pub fn manufactured() -> Self {
        Self::base(DomainSpec::unit_square(), Vec::new(), 4, "manufactured")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "example1" => Ok(Self::example1()),
            "example2" => Ok(Self::example2()),
            "example3" => Ok(Self::example3()),
            "manufactured" => Ok(Self::manufactured()),
            other => Err(config_error("preset", format!("unknown preset `{other}` (expected one of {PRESETS:?})"))),
        }
    }

    /// Range checks on every field plus source placement against the initial mesh.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(config_error("alpha", format!("{} outside (0, 2)", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(config_error("iterations", "must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(config_error("tol", "must be positive".into()));
        }
        if self.max_picard == 0 {
            return Err(config_error("max_picard", "must be at least 1".into()));
        }
        if self.rate_tail < 2 {
            return Err(config_error("rate_tail", "must be at least 2".into()));
        }
        if self.dirichlet == DirichletPreset::TShapeInflow && self.domain.kind != DomainKind::TShape {
            return Err(config_error("dirichlet", "t_shape_inflow needs the t_shape domain".into()));
        }
        let mesh = Mesh::build(&self.domain).map_err(|e| config_error("domain", e.to_string()))?;
        for s in &self.sources {
            check_source(&mesh, s.z).map_err(|e| config_error("sources", e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let domain = match self.domain.kind {
            DomainKind::UnitSquare => "unit_square",
            DomainKind::LShape => "l_shape",
            DomainKind::TShape => "t_shape",
            DomainKind::Polygon => "polygon",
        };
        let _ = writeln!(out, "domain = {domain}");
        if self.domain.kind == DomainKind::Polygon {
            let pts: Vec<String> = self.domain.polygon.iter().map(|p| format!("{} {}", p[0], p[1])).collect();
            let _ = writeln!(out, "polygon = {}", pts.join("; "));
        }
        let _ = writeln!(out, "pair = {}", pair_name(self.pair));
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let sources: Vec<String> = self
            .sources
            .iter()
            .map(|s| format!("{} {} {} {}", s.z[0], s.z[1], s.force[0], s.force[1]))
            .collect();
        let _ = writeln!(out, "sources = {}", sources.join("; "));
        let dirichlet = match self.dirichlet {
            DirichletPreset::Zero => "zero",
            DirichletPreset::TShapeInflow => "t_shape_inflow",
        };
        let _ = writeln!(out, "dirichlet = {dirichlet}");
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "nonlinear = {}", on_off(self.nonlinear));
        let _ = writeln!(out, "tol = {:e}", self.tol);
        let _ = writeln!(out, "max_picard = {}", self.max_picard);
        let _ = writeln!(out, "rate_tail = {}", self.rate_tail);
        let _ = writeln!(out, "timing = {}", on_off(self.timing));
        match self.ndof_cap {
            Some(n) => {
                let _ = writeln!(out, "ndof_cap = {n}");
            }
            None => {
                let _ = writeln!(out, "ndof_cap = none");
            }
        }
        let _ = writeln!(out, "output = {}", self.output.display());
        out
    }

    /// Parses `key = value` lines. An optional leading `preset = <name>` line sets the
    /// defaults that later keys override; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::example1();
        let mut polygon: Option<Vec<Point2<f64>>> = None;
        let mut domain_kind: Option<DomainKind> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| config_error("line", format!("{}: expected `key = value`", n + 1)))?;
            match key {
                "preset" => {
                    let output = config.output.clone();
                    config = Self::preset(value)?;
                    if text.contains("output") {
                        config.output = output;
                    }
                }
                "domain" => {
                    domain_kind = Some(match value {
                        "unit_square" => DomainKind::UnitSquare,
                        "l_shape" => DomainKind::LShape,
                        "t_shape" => DomainKind::TShape,
                        "polygon" => DomainKind::Polygon,
                        _ => return Err(config_error(key, format!("unknown domain `{value}`"))),
                    })
                }
                "polygon" => {
                    let pts = parse_tuples(key, value, 2)?.into_iter().map(|t| [t[0], t[1]]).collect();
                    polygon = Some(pts);
                }
                "pair" => config.pair = parse_pair(value)?,
                "alpha" => config.alpha = parse_num(key, value)?,
                "sources" => {
                    config.sources = parse_tuples(key, value, 4)?
                        .into_iter()
                        .map(|t| PointSource::new([t[0], t[1]], [t[2], t[3]]))
                        .collect()
                }
                "dirichlet" => {
                    config.dirichlet = match value {
                        "zero" => DirichletPreset::Zero,
                        "t_shape_inflow" => DirichletPreset::TShapeInflow,
                        _ => return Err(config_error(key, format!("unknown boundary data `{value}`"))),
                    }
                }
                "iterations" => config.iterations = parse_num(key, value)?,
                "nonlinear" => config.nonlinear = parse_switch(key, value)?,
                "tol" => config.tol = parse_num(key, value)?,
                "max_picard" => config.max_picard = parse_num(key, value)?,
                "rate_tail" => config.rate_tail = parse_num(key, value)?,
                "timing" => config.timing = parse_switch(key, value)?,
                "ndof_cap" => {
                    config.ndof_cap = if value == "none" { None } else { Some(parse_num(key, value)?) }
                }
                "output" => config.output = PathBuf::from(value),
                _ => return Err(config_error(key, "unknown key".into())),
            }
        }
        match (domain_kind, polygon) {
            (Some(DomainKind::Polygon), Some(p)) => config.domain = DomainSpec::polygon(p),
            (Some(DomainKind::Polygon), None) => return Err(config_error("polygon", "missing for domain = polygon".into())),
            (Some(DomainKind::UnitSquare), _) => config.domain = DomainSpec::unit_square(),
            (Some(DomainKind::LShape), _) => config.domain = DomainSpec::l_shape(),
            (Some(DomainKind::TShape), _) => config.domain = DomainSpec::t_shape(),
            (None, Some(_)) => return Err(config_error("polygon", "given without domain = polygon".into())),
            (None, None) => {}
        }
        Ok(config)
    }

    pub fn problem_data(&self) -> ProblemData<f64> {
        ProblemData {
            sources: self.sources.clone(),
            smooth: None,
            dirichlet: self.dirichlet.data(),
            nonlinear: self.nonlinear,
        }
    }

    pub fn adaptive_problem(&self) -> Result<AdaptiveProblem<f64>> {
        Ok(AdaptiveProblem {
            initial_mesh: Mesh::build(&self.domain)?,
            pair: self.pair,
            alpha: self.alpha,
            data: self.problem_data(),
            iterations: self.iterations,
            picard: PicardOptions {
                tol: self.tol,
                max_iter: self.max_picard,
            },
            ndof_cap: self.ndof_cap,
            timing: self.timing,
        })
    }
}

fn config_error(field: &str, message: String) -> Error {
    Error::Config {
        field: field.to_string(),
        message,
    }
}

pub fn pair_name(pair: PairKind) -> &'static str {
    match pair {
        PairKind::TaylorHood => "th",
        PairKind::Mini => "mini",
    }
}

pub fn parse_pair(value: &str) -> Result<PairKind> {
    match value {
        "th" | "taylor_hood" => Ok(PairKind::TaylorHood),
        "mini" => Ok(PairKind::Mini),
        _ => Err(config_error("pair", format!("unknown pair `{value}` (expected th or mini)"))),
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(config_error(key, format!("expected on or off, got `{value}`"))),
    }
}

fn parse_num<N: std::str::FromStr>(key: &str, value: &str) -> Result<N> {
    value
        .parse()
        .map_err(|_| config_error(key, format!("cannot parse `{value}`")))
}

fn parse_tuples(key: &str, value: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|t| {
            let nums: Vec<f64> = t.split_whitespace().map(|v| parse_num(key, v)).collect::<Result<_>>()?;
            if nums.len() != width {
                return Err(config_error(key, format!("expected {width} numbers in `{t}`")));
            }
            Ok(nums)
        })
        .collect()
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub trace: AdaptiveTrace,
    pub rate: Option<f64>,
    pub output: PathBuf,
}

impl RunSummary {
    pub fn line(&self) -> String {
        let last = self.trace.rows.last();
        format!(
            "iterations={} elements={} vertices={} ndof={} estimator={:e} rate={}{}",
            self.trace.rows.len(),
            last.map_or(0, |r| r.elements),
            last.map_or(0, |r| r.vertices),
            last.map_or(0, |r| r.ndof),
            last.map_or(f64::NAN, |r| r.estimator),
            self.rate.map_or("nan".to_string(), |r| format!("{r:.4}")),
            self.trace
                .failure
                .as_ref()
                .map_or(String::new(), |f| format!(" failure=\"{f}\"")),
        )
    }
}

/// Runs the adaptive loop and writes `trace.csv`, `rate.txt`, `mesh.vtk` and
/// `solution.vtk` into the output directory. A solver failure still writes the trace
/// and is reported through [`AdaptiveTrace::failure`].
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    run_with(config, |_| {})
}

/// As [`run`], calling `progress` after each adaptive iteration.
pub fn run_with(config: &ExperimentConfig, progress: impl FnMut(&IterationState<'_, f64>)) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(&config.output)?;
    let outcome = adapt_with(&config.adaptive_problem()?, progress)?;
    fs::write(config.output.join("trace.csv"), outcome.trace.to_csv())?;
    let tail = config.rate_tail.min(outcome.trace.rows.len());
    let rate = fit_rate(&outcome.trace.rows, tail).ok();
    fs::write(
        config.output.join("rate.txt"),
        format!("{}\n", rate.map_or("nan".to_string(), |r| r.to_string())),
    )?;
    if let Some(last) = &outcome.last {
        export_vtk(&last.mesh, None, None, Some(&last.indicators), &config.output.join("mesh.vtk"))?;
        export_vtk(
            &last.mesh,
            Some(&last.space),
            Some(&last.solution),
            Some(&last.indicators),
            &config.output.join("solution.vtk"),
        )?;
    }
    Ok(RunSummary {
        trace: outcome.trace,
        rate,
        output: config.output.clone(),
    })
}

/// Legacy ASCII VTK unstructured grid with the vertex-sampled velocity and pressure as
/// point data and the indicator as cell data.
pub fn vtk_string(
    mesh: &Mesh<f64>,
    space: Option<&MixedSpace<f64>>,
    solution: Option<&SolutionPair<f64>>,
    indicators: Option<&IndicatorField<f64>>,
) -> String {
    let nv = mesh.n_vertices();
    let ne = mesh.n_elements();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nBrinkman-Darcy-Forchheimer adaptive solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:e} {:e} 0", v[0], v[1]);
    }
    let _ = writeln!(out, "CELLS {ne} {}", 4 * ne);
    for t in mesh.elements() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        out.push_str("5\n");
    }
    if let (Some(space), Some(sol)) = (space, solution) {
        let _ = writeln!(out, "POINT_DATA {nv}");
        out.push_str("VECTORS velocity double\n");
        // vertex dofs come first in both pairs, and bubbles vanish at vertices
        for v in 0..nv {
            let _ = writeln!(out, "{:e} {:e} 0", sol.u[space.velocity_index(0, v)], sol.u[space.velocity_index(1, v)]);
        }
        out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
        for v in 0..nv {
            let _ = writeln!(out, "{:e}", sol.p[v]);
        }
    }
    if let Some(ind) = indicators {
        let _ = writeln!(out, "CELL_DATA {ne}");
        out.push_str("SCALARS indicator double 1\nLOOKUP_TABLE default\n");
        for v in &ind.values {
            let _ = writeln!(out, "{v:e}");
        }
    }
    out
}

pub fn export_vtk(
    mesh: &Mesh<f64>,
    space: Option<&MixedSpace<f64>>,
    solution: Option<&SolutionPair<f64>>,
    indicators: Option<&IndicatorField<f64>>,
    path: &Path,
) -> Result<()> {
    fs::write(path, vtk_string(mesh, space, solution, indicators))?;
    Ok(())
}

/// Smooth solution on `(0,1)²`: `u* = curl(x²(1−x)²y²(1−y)²)`, `p* = x − ½`.
pub mod manufactured {
    use crate::scalar::Point2;

    fn b(t: f64) -> [f64; 4] {
        // t²(1−t)² and its first three derivatives
        [
            t * t * (1.0 - t) * (1.0 - t),
            2.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
            2.0 * (1.0 - 6.0 * t + 6.0 * t * t),
            12.0 * (2.0 * t - 1.0),
        ]
    }

    pub fn velocity(x: Point2<f64>) -> Point2<f64> {
        let (bx, by) = (b(x[0]), b(x[1]));
        [bx[0] * by[1], -bx[1] * by[0]]
    }

    /// `jac[c][d] = ∂_d u*_c`.
    pub fn jacobian(x: Point2<f64>) -> [Point2<f64>; 2] {
        let (bx, by) = (b(x[0]), b(x[1]));
        [[bx[1] * by[1], bx[0] * by[2]], [-bx[2] * by[0], -bx[1] * by[1]]]
    }

    pub fn laplacian(x: Point2<f64>) -> Point2<f64> {
        let (bx, by) = (b(x[0]), b(x[1]));
        [bx[2] * by[1] + bx[0] * by[3], -(bx[3] * by[0] + bx[1] * by[2])]
    }

    pub fn pressure(x: Point2<f64>) -> f64 {
        x[0] - 0.5
    }

    pub fn pressure_gradient(_: Point2<f64>) -> Point2<f64> {
        [1.0, 0.0]
    }

    /// `f = −Δu* + (u*·∇)u* + |u*|u* + u* + ∇p*`.
    pub fn forcing(x: Point2<f64>) -> Point2<f64> {
        let u = velocity(x);
        let j = jacobian(x);
        let lap = laplacian(x);
        let gp = pressure_gradient(x);
        let speed = u[0].hypot(u[1]);
        let mut f = [0.0; 2];
        for c in 0..2 {
            f[c] = -lap[c] + u[0] * j[c][0] + u[1] * j[c][1] + speed * u[c] + u[c] + gp[c];
        }
        f
    }
}

/// One level of the manufactured-solution study.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedRow {
    pub h: f64,
    pub ndof: usize,
    pub velocity_h1: f64,
    pub pressure_l2: f64,
    /// `log2` of the error ratio to the previous level (`None` on the first level).
    pub velocity_order: Option<f64>,
    pub pressure_order: Option<f64>,
}

/// Errors of the full nonlinear model against the smooth manufactured solution on the
/// initial unit-square mesh and `refinements` successive halvings of the mesh size.
pub fn verify_manufactured(pair: PairKind, refinements: usize) -> Result<Vec<ManufacturedRow>> {
    if refinements < 1 {
        return Err(Error::Argument("at least one refinement is needed for an order".into()));
    }
    let data = ProblemData::smooth(manufactured::forcing);
    let mut rows: Vec<ManufacturedRow> = Vec::new();
    let mut mesh = Mesh::build(&DomainSpec::unit_square())?;
    for level in 0..=refinements {
        if level > 0 {
            // two bisection sweeps halve every edge of the criss-cross mesh
            mesh = mesh.refine_uniformly(2);
        }
        let space = MixedSpace::new(&mesh, pair);
        let (sol, _) = picard_solve(&mesh, &space, &data, PicardOptions::default())?;
        let discrete = DiscreteSolution::new(&mesh, &space, &sol);
        let velocity_h1 = weighted_h1_seminorm(
            &VelocityError {
                discrete: &discrete,
                exact: manufactured::velocity,
                jacobian: manufactured::jacobian,
            },
            &WeightSpec::Unweighted,
            &mesh,
        );
        let pressure_l2 = weighted_l2_norm(
            &PressureError {
                discrete: &discrete,
                exact: manufactured::pressure,
                gradient: manufactured::pressure_gradient,
            },
            &WeightSpec::Unweighted,
            &mesh,
        );
        let h = (0..mesh.n_elements()).map(|k| mesh.geometry(k).diameter()).fold(0.0, f64::max);
        let prev = rows.last();
        rows.push(ManufacturedRow {
            h,
            ndof: space.ndof(),
            velocity_h1,
            pressure_l2,
            velocity_order: prev.map(|p| (p.velocity_h1 / velocity_h1).log2()),
            pressure_order: prev.map(|p| (p.pressure_l2 / pressure_l2).log2()),
        });
    }
    Ok(rows)
}

/// Effectivity index at selected iterations of an adaptive run.
#[derive(Debug, Clone, PartialEq)]
pub struct Effectivity {
    pub iter: usize,
    pub error: f64,
    pub estimator: f64,
    pub index: f64,
}

/// Runs `config` for `max(iterations)` rounds and compares each selected iterate with a
/// reference solution on the last mesh refined uniformly `reference_halvings` times.
/// The error is `(|∇(u_ref − u_T)|²_{L²(d_z^α)} + ‖p_ref − p_T‖²_{L²(d_z^α)})^{1/2}` with
/// the first source as `z`.
pub fn effectivity_indices(config: &ExperimentConfig, iterations: &[usize], reference_halvings: usize) -> Result<Vec<Effectivity>> {
    let source = *config
        .sources
        .first()
        .ok_or_else(|| config_error("sources", "effectivity needs a point source".into()))?;
    let mut problem = config.adaptive_problem()?;
    problem.iterations = iterations.iter().copied().max().unwrap_or(0);
    problem.timing = false;
    let mut snapshots = Vec::new();
    let outcome = adapt_with(&problem, |state| {
        if iterations.contains(&state.iter) {
            snapshots.push((
                state.iter,
                state.mesh.clone(),
                state.space.clone(),
                state.solution.clone(),
                state.indicators.global,
            ));
        }
    })?;
    if let Some(f) = outcome.trace.failure {
        return Err(Error::Argument(format!("adaptive run failed: {f}")));
    }
    let last = outcome.last.expect("at least one iteration");
    let fine_mesh = last.mesh.refine_uniformly(2 * reference_halvings);
    let fine_space = MixedSpace::new(&fine_mesh, config.pair);
    let (fine_sol, _) = picard_solve(
        &fine_mesh,
        &fine_space,
        &config.problem_data(),
        PicardOptions {
            tol: config.tol,
            max_iter: config.max_picard,
        },
    )?;
    let fine = DiscreteSolution::new(&fine_mesh, &fine_space, &fine_sol);
    let weight = WeightSpec::power(config.alpha, 1.0, source.z)?;
    let integrator = WeightedIntegrator::new();
    let mut out = Vec::new();
    for (iter, mesh, space, sol, estimator) in snapshots {
        let coarse = DiscreteSolution::new(&mesh, &space, &sol);
        let locator = PointLocator::new(&mesh);
        let mut err_sq = 0.0;
        for k in 0..fine_mesh.n_elements() {
            let geom = fine.geometry(k);
            // the reference mesh is nested in every adaptive mesh
            let parent = *locator
                .locate(geom.centroid())
                .first()
                .ok_or_else(|| Error::Geometry("reference element outside the coarse mesh".into()))?;
            let parent_geom = *coarse.geometry(parent);
            err_sq += integrator.integrate(geom, &weight, |x, bary| {
                let cb = parent_geom.barycentric(x);
                let (_, jf) = fine.velocity(k, bary);
                let (_, jc) = coarse.velocity(parent, cb);
                let (pf, _) = fine.pressure(k, bary);
                let (pc, _) = coarse.pressure(parent, cb);
                let mut s = (pf - pc) * (pf - pc);
                for c in 0..2 {
                    for d in 0..2 {
                        s += (jf[c][d] - jc[c][d]).powi(2);
                    }
                }
                s
            });
        }
        let error = err_sq.sqrt();
        out.push(Effectivity {
            iter,
            error,
            estimator,
            index: error / estimator,
        });
    }
    Ok(out)
}
