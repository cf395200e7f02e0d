//! Bulk marking and the `SOLVE → ESTIMATE → MARK → REFINE` loop.

use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::estimator::{error_norms, estimate, EstimatorReport};
use crate::fem::ReferenceTables;
use crate::hdg::{self, HdgParams, HdgSolution};
use crate::mesh::Mesh;
use crate::problems::ProblemSpec;

/// Bulk fractions for faces (`θ₁`) and elements (`θ₂`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkingParams {
    pub theta1: f64,
    pub theta2: f64,
}

impl Default for MarkingParams {
    fn default() -> Self {
        MarkingParams { theta1: 0.5, theta2: 0.5 }
    }
}

impl MarkingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta1", self.theta1), ("theta2", self.theta2)] {
            if !(v > 0.0 && v <= 1.0) {
                return invalid(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

/// Greedy bulk selection: entities by descending indicator (ties by
/// ascending id) until the marked sum reaches `θ` times the total.
/// Returns ids in ascending order; empty when every indicator is zero.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return invalid(format!("bulk fraction must lie in (0, 1], got {theta}"));
    }
    if let Some(i) = indicators.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return invalid(format!("indicator {i} is negative or not finite: {}", indicators[i]));
    }
    let total: f64 = indicators.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let target = theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if sum >= target || indicators[i] == 0.0 {
            break;
        }
        sum += indicators[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Whether `Σ_marked ≥ θ Σ_all` holds.
pub fn bulk_satisfied(indicators: &[f64], marked: &[usize], theta: f64) -> bool {
    let total: f64 = indicators.iter().sum();
    let chosen: f64 = marked.iter().map(|&i| indicators[i]).sum();
    chosen >= theta * total
}

/// Elements adjacent to the marked faces together with the marked elements,
/// sorted and deduplicated.
pub fn marked_faces_to_elements(mesh: &Mesh, faces: &[usize], elements: &[usize]) -> Result<Vec<usize>> {
    if let Some(&f) = faces.iter().find(|&&f| f >= mesh.n_faces()) {
        return invalid(format!("face {f} out of range"));
    }
    let mut out: Vec<usize> = faces.iter().flat_map(|&f| mesh.face(f).elements()).chain(elements.iter().copied()).collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Settings of the adaptive loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopParams {
    pub hdg: HdgParams,
    pub marking: MarkingParams,
    /// Meshes with more trace DOFs than this are not solved.
    pub max_dofs: usize,
    /// Number of refinement steps; the loop solves `max_iters + 1` meshes at most.
    pub max_iters: usize,
    /// Evaluate the conservation defect of every solve.
    pub check_conservation: bool,
}

impl LoopParams {
    pub fn new(p: usize) -> Result<Self> {
        Ok(LoopParams {
            hdg: HdgParams::new(p, 1.0)?,
            marking: MarkingParams::default(),
            max_dofs: 200_000,
            max_iters: 40,
            check_conservation: false,
        })
    }
}

/// One row of the convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub iter: usize,
    /// Number of trace degrees of freedom.
    pub n_dofs: usize,
    pub n_elements: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub eta: f64,
    /// `‖(q − q_h, u − u_h)‖_h`
    pub err_h: Option<f64>,
    /// `⦀(q − q_h, u − u_h)⦀_h`
    pub err_energy: Option<f64>,
    /// Relative residual of the skeleton solve.
    pub residual: f64,
    /// Largest flux-moment defect over interior faces, when checked.
    pub conservation: Option<f64>,
    pub oscillation: f64,
    /// Wall time of solve, estimate and error evaluation.
    pub seconds: f64,
}

/// Why the loop ended.
#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    MaxIterations,
    MaxDofs,
    /// Nothing marked: every indicator vanished.
    Converged,
    Failed(String),
}

/// Everything seen during one iteration, handed to observers.
pub struct IterationView<'a> {
    pub record: &'a ConvergenceRecord,
    pub mesh: &'a Mesh,
    pub tables: &'a ReferenceTables,
    pub solution: &'a HdgSolution,
    pub report: &'a EstimatorReport,
    /// Marked faces and elements; `None` on the final iteration.
    pub marked: Option<(&'a [usize], &'a [usize])>,
}

/// Result of an adaptive run. On failure the history holds every completed
/// iteration and `mesh` is the mesh the failing step worked on.
pub struct AdaptiveRun {
    pub records: Vec<ConvergenceRecord>,
    pub mesh: Mesh,
    pub solution: Option<HdgSolution>,
    pub report: Option<EstimatorReport>,
    pub stop: StopReason,
}

/// Runs the adaptive loop from `mesh`.
pub fn adaptive_loop(problem: &ProblemSpec, mesh: Mesh, params: &LoopParams) -> Result<AdaptiveRun> {
    adaptive_loop_with(problem, mesh, params, |_| {})
}

/// [`adaptive_loop`] with a callback invoked after each ESTIMATE/MARK.
pub fn adaptive_loop_with(
    problem: &ProblemSpec,
    mut mesh: Mesh,
    params: &LoopParams,
    mut observer: impl FnMut(&IterationView<'_>),
) -> Result<AdaptiveRun> {
    params.marking.validate()?;
    let tables = ReferenceTables::with_default_quadrature(params.hdg.p)?;
    let mut records = Vec::new();
    let mut iter = 0;
    loop {
        let start = Instant::now();
        let step = solve_and_estimate(problem, &mesh, &tables, params);
        let (solution, stats, report, errs, conservation) = match step {
            Ok(v) => v,
            Err(e) => return Ok(AdaptiveRun { records, mesh, solution: None, report: None, stop: StopReason::Failed(e.to_string()) }),
        };
        let record = ConvergenceRecord {
            iter,
            n_dofs: stats.dofs,
            n_elements: mesh.n_elements(),
            eta1: report.eta1,
            eta2: report.eta2,
            eta: report.eta,
            err_h: errs.map(|e| e.0),
            err_energy: errs.map(|e| e.1),
            residual: stats.relative_residual,
            conservation,
            oscillation: report.total_oscillation(),
            seconds: start.elapsed().as_secs_f64(),
        };
        let finish = |records, mesh, stop| Ok(AdaptiveRun { records, mesh, solution: Some(solution.clone()), report: Some(report.clone()), stop });
        if iter >= params.max_iters {
            observer(&IterationView { record: &record, mesh: &mesh, tables: &tables, solution: &solution, report: &report, marked: None });
            records.push(record);
            return finish(records, mesh, StopReason::MaxIterations);
        }
        let faces = dorfler_mark(&report.face, params.marking.theta1)?;
        let elements = dorfler_mark(&report.element, params.marking.theta2)?;
        observer(&IterationView {
            record: &record,
            mesh: &mesh,
            tables: &tables,
            solution: &solution,
            report: &report,
            marked: Some((&faces, &elements)),
        });
        records.push(record);
        let refine = marked_faces_to_elements(&mesh, &faces, &elements)?;
        if refine.is_empty() {
            return finish(records, mesh, StopReason::Converged);
        }
        let next = mesh.refine(&refine)?;
        if tables.face_dim() * next.n_faces() > params.max_dofs {
            return finish(records, mesh, StopReason::MaxDofs);
        }
        mesh = next;
        iter += 1;
    }
}

type Step = (HdgSolution, hdg::SolveStats, EstimatorReport, Option<(f64, f64)>, Option<f64>);

fn solve_and_estimate(problem: &ProblemSpec, mesh: &Mesh, tables: &ReferenceTables, params: &LoopParams) -> Result<Step> {
    let (solution, stats) = hdg::solve(mesh, problem, tables, &params.hdg)?;
    let report = estimate(mesh, problem, tables, &solution)?;
    if !report.eta.is_finite() {
        return Err(Error::State("estimator is not finite".into()));
    }
    let errs = match problem.exact {
        Some(_) => Some(error_norms(mesh, problem, tables, &solution)?),
        None => None,
    };
    let conservation = params.check_conservation.then(|| hdg::max_conservation_defect(mesh, problem, tables, &solution));
    Ok((solution, stats, report, errs, conservation))
}
