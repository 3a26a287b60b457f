//! The adaptive loop: solve, estimate, mark, bisect.

use std::fmt::Write as _;
use std::time::Instant;

use crate::assembly::assemble_brinkman;
use crate::estimator::{compute_indicators, mark, EstimatorSetup, IndicatorField};
use crate::mesh::Mesh;
use crate::scalar::Scalar;
use crate::solver::{picard_solve_with, DiscreteSolution, PicardOptions, PicardReport, ProblemData, SolutionPair};
use crate::spaces::{MixedSpace, PairKind};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "iter,elements,vertices,ndof,estimator,picard_iters,seconds";

/// One adaptive iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub elements: usize,
    pub vertices: usize,
    pub ndof: usize,
    pub estimator: f64,
    pub picard_iters: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptiveTrace {
    pub rows: Vec<TraceRow>,
    /// Why the loop stopped early, if it did.
    pub failure: Option<String>,
}

impl AdaptiveTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{},{:.6}",
                r.iter, r.elements, r.vertices, r.ndof, r.estimator, r.picard_iters, r.seconds
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::Argument("trace CSV header mismatch".into()));
        }
        let bad = |l: &str| Error::Argument(format!("malformed trace row `{l}`"));
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 7 {
                    return Err(bad(l));
                }
                let u = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(l));
                let x = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(l));
                Ok(TraceRow {
                    iter: u(f[0])?,
                    elements: u(f[1])?,
                    vertices: u(f[2])?,
                    ndof: u(f[3])?,
                    estimator: x(f[4])?,
                    picard_iters: u(f[5])?,
                    seconds: x(f[6])?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows, failure: None })
    }
}

/// Least-squares slope of `log(estimator)` against `log(Ndof)` over the last `tail` rows.
pub fn fit_rate(rows: &[TraceRow], tail: usize) -> Result<f64> {
    if tail < 2 || rows.len() < tail {
        return Err(Error::Fit(format!("need at least {} rows, have {}", tail.max(2), rows.len())));
    }
    let tail_rows = &rows[rows.len() - tail..];
    if let Some(r) = tail_rows.iter().find(|r| !(r.estimator > 0.0) || r.ndof == 0) {
        return Err(Error::Fit(format!("nonpositive estimator or Ndof at iteration {}", r.iter)));
    }
    let xs: Vec<f64> = tail_rows.iter().map(|r| (r.ndof as f64).ln()).collect();
    let ys: Vec<f64> = tail_rows.iter().map(|r| r.estimator.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("Ndof constant over the fitted rows".into()));
    }
    Ok(sxy / sxx)
}

/// Inputs of the adaptive loop.
#[derive(Debug, Clone)]
pub struct AdaptiveProblem<T> {
    pub initial_mesh: Mesh<T>,
    pub pair: PairKind,
    pub alpha: T,
    pub data: ProblemData<T>,
    /// Number of solve/estimate rounds; the mesh is bisected between rounds.
    pub iterations: usize,
    pub picard: PicardOptions,
    /// Stop before solving on a space with more unknowns than this.
    pub ndof_cap: Option<usize>,
    /// Record wall time per iteration; off keeps traces bitwise reproducible.
    pub timing: bool,
}

/// State of one iteration, handed to observers before the mesh is refined.
pub struct IterationState<'a, T> {
    pub iter: usize,
    pub mesh: &'a Mesh<T>,
    pub space: &'a MixedSpace<T>,
    pub solution: &'a SolutionPair<T>,
    pub report: &'a PicardReport,
    pub indicators: &'a IndicatorField<T>,
    pub marked: &'a [usize],
}

/// Last mesh solved on, with its solution and indicators.
#[derive(Debug, Clone)]
pub struct FinalState<T> {
    pub mesh: Mesh<T>,
    pub space: MixedSpace<T>,
    pub solution: SolutionPair<T>,
    pub indicators: IndicatorField<T>,
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome<T> {
    pub trace: AdaptiveTrace,
    pub last: Option<FinalState<T>>,
}

pub fn adapt<T: Scalar>(problem: &AdaptiveProblem<T>) -> Result<AdaptiveOutcome<T>> {
    adapt_with(problem, |_| {})
}

/// Runs the loop, calling `observe` after each iteration's marking step. Picard
/// nonconvergence or a singular solve stops the loop and is recorded in
/// [`AdaptiveTrace::failure`]; invalid inputs are returned as errors.
pub fn adapt_with<T: Scalar>(
    problem: &AdaptiveProblem<T>,
    mut observe: impl FnMut(&IterationState<'_, T>),
) -> Result<AdaptiveOutcome<T>> {
    if problem.iterations == 0 {
        return Err(Error::Argument("adaptive loop needs at least one iteration".into()));
    }
    let setup = EstimatorSetup::for_sources(problem.alpha, problem.data.sources.clone(), &problem.initial_mesh)?;
    let mut trace = AdaptiveTrace::default();
    let mut last = None;
    let mut mesh = problem.initial_mesh.clone();
    for iter in 1..=problem.iterations {
        let start = Instant::now();
        let space = MixedSpace::new(&mesh, problem.pair);
        if problem.ndof_cap.is_some_and(|cap| space.ndof() > cap) {
            break;
        }
        let blocks = assemble_brinkman(&mesh, &space);
        let (solution, report) = match picard_solve_with(&mesh, &space, &blocks, &problem.data, problem.picard) {
            Ok(ok) => ok,
            Err(e @ (Error::NonConvergence { .. } | Error::Singular { .. })) => {
                trace.failure = Some(format!("iteration {iter}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let discrete = DiscreteSolution::new(&mesh, &space, &solution);
        let indicators = compute_indicators(&mesh, &discrete, &setup);
        let marked = mark(&indicators.values);
        observe(&IterationState {
            iter,
            mesh: &mesh,
            space: &space,
            solution: &solution,
            report: &report,
            indicators: &indicators,
            marked: &marked,
        });
        let next = (iter < problem.iterations && !marked.is_empty()).then(|| mesh.bisect(&marked).mesh);
        trace.rows.push(TraceRow {
            iter,
            elements: mesh.n_elements(),
            vertices: mesh.n_vertices(),
            ndof: space.ndof(),
            estimator: indicators.global.as_f64(),
            picard_iters: report.iterations,
            seconds: if problem.timing { start.elapsed().as_secs_f64() } else { 0.0 },
        });
        let solved_on = match next {
            Some(refined) => std::mem::replace(&mut mesh, refined),
            None => mesh.clone(),
        };
        last = Some(FinalState {
            mesh: solved_on,
            space,
            solution,
            indicators,
        });
    }
    Ok(AdaptiveOutcome { trace, last })
}
