//! Dense solve of the full `(q_h, u_h, û_h)` system, without condensation.
//!
//! Intended as a reference for small meshes only: the cost is cubic in the
//! total number of unknowns.

use nalgebra::{DMatrix, DVector};

use super::{assemble_local, boundary_projection, trace_dof, HdgSolution};
use crate::error::{invalid, Error, Result};
use crate::fem::ReferenceTables;
use crate::mesh::Mesh;
use crate::problems::ProblemSpec;

/// Largest system (in unknowns) accepted by [`solve_monolithic`].
pub const MAX_UNKNOWNS: usize = 4000;

/// Solves the uncondensed HDG system with dense LU.
pub fn solve_monolithic(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, rho0: f64) -> Result<HdgSolution> {
    let nb = tables.element_dim();
    let nf = tables.face_dim();
    let ne = mesh.n_elements();
    let n_elem = 3 * nb * ne;
    let n = n_elem + nf * mesh.n_faces();
    if n > MAX_UNKNOWNS {
        return invalid(format!("{n} unknowns exceed the dense reference limit {MAX_UNKNOWNS}"));
    }
    let dirichlet = boundary_projection(mesh, problem, tables);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut taus = Vec::with_capacity(ne);
    for t in 0..ne {
        let blocks = assemble_local(mesh, problem, tables, t, rho0)?;
        let faces = mesh.triangle(t).faces;
        let x0 = 3 * nb * t;
        let tr = |r: usize| n_elem + trace_dof(nf, faces[r / nf], r % nf);
        for i in 0..3 * nb {
            for j in 0..3 * nb {
                a[(x0 + i, x0 + j)] += blocks.a[(i, j)];
            }
            for s in 0..3 * nf {
                a[(x0 + i, tr(s))] += blocks.b[(i, s)];
            }
            rhs[x0 + i] += blocks.f[i];
        }
        for r in 0..3 * nf {
            let row = tr(r);
            if dirichlet[row - n_elem].is_some() {
                continue;
            }
            for j in 0..3 * nb {
                a[(row, x0 + j)] += blocks.c[(r, j)];
            }
            for s in 0..3 * nf {
                a[(row, tr(s))] += blocks.d[(r, s)];
            }
        }
        taus.push(blocks.tau);
    }
    for (i, g) in dirichlet.iter().enumerate() {
        if let Some(g) = g {
            a[(n_elem + i, n_elem + i)] = 1.0;
            rhs[n_elem + i] = *g;
        }
    }
    let x = a.lu().solve(&rhs).ok_or(Error::SingularMatrix { pivot: 0 })?;
    let q = (0..ne).map(|t| x.as_slice()[3 * nb * t..3 * nb * t + 2 * nb].to_vec()).collect();
    let u = (0..ne).map(|t| x.as_slice()[3 * nb * t + 2 * nb..3 * nb * (t + 1)].to_vec()).collect();
    Ok(HdgSolution { p: tables.p, q, u, uhat: x.as_slice()[n_elem..].to_vec(), taus })
}
