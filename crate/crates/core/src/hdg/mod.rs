//! Hybridizable discontinuous Galerkin discretisation.
//!
//! [`local`] builds the element matrices and eliminates `(q_h, u_h)`;
//! this module assembles the condensed skeleton system for `û_h`, solves it
//! and recovers the element fields. [`monolithic`] solves the uncondensed
//! system densely and serves as a reference on small meshes.

pub mod local;
pub mod monolithic;

use nalgebra::DVector;
use rayon::prelude::*;

pub use local::{assemble_local, condense, stabilization_tau, Condensed, LocalBlocks};

use crate::error::{invalid, Error, Result};
use crate::fem::{l2_project_face, ReferenceTables, SUPPORTED_DEGREES};
use crate::linsolve::{self, CsrMatrix};
use crate::mesh::Mesh;
use crate::problems::ProblemSpec;

/// Discretisation parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HdgParams {
    pub p: usize,
    pub rho0: f64,
}

impl HdgParams {
    pub fn new(p: usize, rho0: f64) -> Result<Self> {
        if !SUPPORTED_DEGREES.contains(&p) {
            return invalid(format!("polynomial degree {p} not in {SUPPORTED_DEGREES:?}"));
        }
        if !(rho0 > 0.0 && rho0 <= 1.0) {
            return invalid(format!("rho0 must satisfy 0 < rho0 <= 1, got {rho0}"));
        }
        Ok(HdgParams { p, rho0 })
    }
}

/// Global index of trace mode `m` on face `f`.
pub fn trace_dof(nf: usize, f: usize, m: usize) -> usize {
    f * nf + m
}

/// Local trace coefficients `[face 0, face 1, face 2]` of element `t`.
pub fn gather_trace(mesh: &Mesh, nf: usize, uhat: &[f64], t: usize) -> DVector<f64> {
    let faces = mesh.triangle(t).faces;
    DVector::from_fn(3 * nf, |r, _| uhat[trace_dof(nf, faces[r / nf], r % nf)])
}

/// The condensed system for the trace unknowns.
///
/// Boundary trace DOFs keep their rows as identity rows carrying the `L²`
/// projection of `g`; their columns are moved to the right-hand side of the
/// interior rows.
#[derive(Clone, Debug)]
pub struct SkeletonSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Prescribed value of each boundary DOF, `None` for interior DOFs.
    pub dirichlet: Vec<Option<f64>>,
    /// Per-element condensation data, when kept for recovery.
    pub local: Option<Vec<Condensed>>,
    pub taus: Vec<[f64; 3]>,
}

impl SkeletonSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Element fields for a given trace vector.
    pub fn recover_local(&self, mesh: &Mesh, uhat: &[f64], t: usize) -> Result<DVector<f64>> {
        let local = self.local.as_ref().ok_or_else(|| Error::State("local condensation data were not stored".into()))?;
        let nf = self.dim() / mesh.n_faces().max(1);
        let cond = local.get(t).ok_or_else(|| Error::InvalidArgument(format!("element {t} out of range")))?;
        Ok(cond.recover(&gather_trace(mesh, nf, uhat, t)))
    }
}

/// `L²` projections of `g` on the boundary faces, indexed by DOF.
pub fn boundary_projection(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables) -> Vec<Option<f64>> {
    let nf = tables.face_dim();
    let mut out = vec![None; nf * mesh.n_faces()];
    for (f, face) in mesh.faces().iter().enumerate() {
        if face.is_boundary() {
            let c = l2_project_face(tables, mesh, f, |x| (problem.g)(x), &problem.g_breakpoints);
            for (m, cm) in c.into_iter().enumerate() {
                out[trace_dof(nf, f, m)] = Some(cm);
            }
        }
    }
    out
}

/// Assembles element blocks in parallel, in element order.
fn condense_all(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, rho0: f64) -> Result<Vec<(Condensed, [f64; 3])>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let blocks = assemble_local(mesh, problem, tables, t, rho0)?;
            Ok((condense(&blocks, t)?, blocks.tau))
        })
        .collect()
}

/// Builds the condensed skeleton system.
pub fn assemble_global(
    mesh: &Mesh,
    problem: &ProblemSpec,
    tables: &ReferenceTables,
    rho0: f64,
    keep_local: bool,
) -> Result<SkeletonSystem> {
    let nf = tables.face_dim();
    let n = nf * mesh.n_faces();
    let dirichlet = boundary_projection(mesh, problem, tables);
    let condensed = condense_all(mesh, problem, tables, rho0)?;

    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(condensed.len() * 9 * nf * nf);
    for (t, (cond, _)) in condensed.iter().enumerate() {
        let faces = mesh.triangle(t).faces;
        let dof = |r: usize| trace_dof(nf, faces[r / nf], r % nf);
        for r in 0..3 * nf {
            let i = dof(r);
            if dirichlet[i].is_some() {
                continue;
            }
            rhs[i] += cond.r[r];
            for s in 0..3 * nf {
                let j = dof(s);
                match dirichlet[j] {
                    Some(g) => rhs[i] -= cond.k[(r, s)] * g,
                    None => triplets.push((i, j, cond.k[(r, s)])),
                }
            }
        }
    }
    for (i, g) in dirichlet.iter().enumerate() {
        if let Some(g) = g {
            triplets.push((i, i, 1.0));
            rhs[i] = *g;
        }
    }
    let matrix = CsrMatrix::from_triplets(n, n, &triplets)?;
    let taus = condensed.iter().map(|(_, tau)| *tau).collect();
    let local = keep_local.then(|| condensed.into_iter().map(|(c, _)| c).collect());
    Ok(SkeletonSystem { matrix, rhs, dirichlet, local, taus })
}

/// Discrete solution: per-element `q_h = (q₁, q₂)` and `u_h` coefficients and
/// per-face `û_h` coefficients, all in the basis of [`ReferenceTables`].
#[derive(Clone, Debug, PartialEq)]
pub struct HdgSolution {
    pub p: usize,
    /// `q[t]` holds `[q₁ (nb), q₂ (nb)]`
    pub q: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// `uhat[trace_dof(nf, f, m)]`
    pub uhat: Vec<f64>,
    /// Stabilisation parameters of each element's faces.
    pub taus: Vec<[f64; 3]>,
}

impl HdgSolution {
    /// Number of trace degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.uhat.len()
    }

    pub fn face_trace(&self, nf: usize, f: usize) -> &[f64] {
        &self.uhat[f * nf..(f + 1) * nf]
    }
}

/// Diagnostics of one global solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub dofs: usize,
    pub nnz: usize,
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

/// Assembles, solves and recovers.
pub fn solve(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, params: &HdgParams) -> Result<(HdgSolution, SolveStats)> {
    if tables.p != params.p {
        return invalid(format!("tables of degree {} for a degree {} solve", tables.p, params.p));
    }
    let system = assemble_global(mesh, problem, tables, params.rho0, true)?;
    let report = linsolve::solve(&system.matrix, &system.rhs)?;
    let stats = SolveStats {
        dofs: system.dim(),
        nnz: system.matrix.nnz(),
        relative_residual: report.relative_residual,
        refinement_steps: report.refinement_steps,
    };
    let solution = recover_all(mesh, tables, &system, report.x)?;
    Ok((solution, stats))
}

/// Recovers `(q_h, u_h)` on every element from a trace vector.
pub fn recover_all(mesh: &Mesh, tables: &ReferenceTables, system: &SkeletonSystem, uhat: Vec<f64>) -> Result<HdgSolution> {
    let nb = tables.element_dim();
    let fields: Vec<DVector<f64>> =
        (0..mesh.n_elements()).into_par_iter().map(|t| system.recover_local(mesh, &uhat, t)).collect::<Result<_>>()?;
    let q = fields.iter().map(|x| x.as_slice()[..2 * nb].to_vec()).collect();
    let u = fields.iter().map(|x| x.as_slice()[2 * nb..].to_vec()).collect();
    Ok(HdgSolution { p: tables.p, q, u, uhat, taus: system.taus.clone() })
}

/// Moments `⟨q_h·n + (β·n) û_h + τ (u_h − û_h), μ_m⟩_F` of the numerical flux
/// on an interior face, from the left and from the right element (each with
/// its own outward normal). Conservation means they sum to zero.
pub fn numerical_flux_moments(
    mesh: &Mesh,
    problem: &ProblemSpec,
    tables: &ReferenceTables,
    solution: &HdgSolution,
    f: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if f >= mesh.n_faces() {
        return invalid(format!("face {f} out of range"));
    }
    let face = mesh.face(f);
    let Some(right) = face.right else {
        return invalid(format!("face {f} lies on the boundary"));
    };
    Ok((side_flux_moments(mesh, problem, tables, solution, face.left, f), side_flux_moments(mesh, problem, tables, solution, right, f)))
}

fn side_flux_moments(
    mesh: &Mesh,
    problem: &ProblemSpec,
    tables: &ReferenceTables,
    solution: &HdgSolution,
    t: usize,
    f: usize,
) -> Vec<f64> {
    let nb = tables.element_dim();
    let nf = tables.face_dim();
    let k = mesh.triangle(t).local_face(f).expect("face belongs to element");
    let n = mesh.element_outward_normal(t, k);
    let tau = solution.taus[t][k];
    let (q, u) = (&solution.q[t], &solution.u[t]);
    let uhat = solution.face_trace(nf, f);
    let mut out = vec![0.0; nf];
    for tp in local::trace_points(mesh, tables, t, k) {
        let q1: f64 = (0..nb).map(|i| q[i] * tp.phi[i]).sum();
        let q2: f64 = (0..nb).map(|i| q[nb + i] * tp.phi[i]).sum();
        let uv: f64 = (0..nb).map(|i| u[i] * tp.phi[i]).sum();
        let uh: f64 = (0..nf).map(|m| uhat[m] * tp.mu[m]).sum();
        let flux = q1 * n.x + q2 * n.y + (problem.beta)(tp.x).dot(&n) * uh + tau * (uv - uh);
        for (o, mu) in out.iter_mut().zip(&tp.mu) {
            *o += tp.w * flux * mu;
        }
    }
    out
}

/// Largest `|left + right|` flux moment over all interior faces.
pub fn max_conservation_defect(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, solution: &HdgSolution) -> f64 {
    (0..mesh.n_faces())
        .into_par_iter()
        .filter(|&f| !mesh.face(f).is_boundary())
        .map(|f| {
            let (l, r) = numerical_flux_moments(mesh, problem, tables, solution, f).expect("interior face");
            l.iter().zip(&r).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()))
        })
        .reduce(|| 0.0, f64::max)
}
