//! Element-level HDG matrices and static condensation.
//!
//! Unknowns on an element are ordered `[q₁ (nb), q₂ (nb), u (nb)]`; traces
//! are ordered face by face, `[û on face 0 (nf), face 1, face 2]`, each in
//! the global orientation of the face. The local equations read
//!
//! ```text
//! A x + B û = F          (element equations tested with r and w)
//! flux = C x + D û       (moments of q·n + (β·n) û + τ (u − û) against μ)
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::fem::{face_reversed, AffineMap, ReferenceTables};
use crate::mesh::Mesh;
use crate::problems::ProblemSpec;
use crate::{Point, Vec2};

/// `τ = max(sup β·n, 0) + min(ρ₀ ε / h_T, 1)`.
pub fn stabilization_tau(sup_beta_n: f64, eps: f64, h_t: f64, rho0: f64) -> Result<f64> {
    if !(rho0 > 0.0 && rho0 <= 1.0) {
        return invalid(format!("rho0 must satisfy 0 < rho0 <= 1, got {rho0}"));
    }
    if !(eps > 0.0 && h_t > 0.0) {
        return invalid(format!("eps and h_T must be positive, got {eps} and {h_t}"));
    }
    Ok(sup_beta_n.max(0.0) + (rho0 * eps / h_t).min(1.0))
}

/// Face parameters where suprema over a face are sampled: the quadrature
/// points plus both endpoints.
pub fn face_sample_params(tables: &ReferenceTables) -> impl Iterator<Item = f64> + '_ {
    tables.face_rule.points.iter().copied().chain([0.0, 1.0])
}

/// `max β·n` over the sample points of local face `k` of element `t`.
pub fn sup_beta_normal(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, t: usize, k: usize) -> f64 {
    let f = mesh.triangle(t).faces[k];
    let [a, b] = mesh.face_points(f);
    let n = mesh.element_outward_normal(t, k);
    face_sample_params(tables).map(|s| (problem.beta)(a + (b - a) * s).dot(&n)).fold(f64::NEG_INFINITY, f64::max)
}

/// Stabilisation parameters of the three faces of element `t`.
pub fn element_taus(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, t: usize, rho0: f64) -> Result<[f64; 3]> {
    let h = mesh.diameter(t);
    let mut tau = [0.0; 3];
    for (k, tk) in tau.iter_mut().enumerate() {
        *tk = stabilization_tau(sup_beta_normal(mesh, problem, tables, t, k), problem.eps, h, rho0)?;
    }
    Ok(tau)
}

/// Physical data of one face quadrature point as seen from one element.
pub(crate) struct TracePoint {
    pub x: Point,
    /// quadrature weight times face length
    pub w: f64,
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Face quadrature points of local face `k`, in the global face orientation.
pub(crate) fn trace_points(mesh: &Mesh, tables: &ReferenceTables, t: usize, k: usize) -> Vec<TracePoint> {
    let tri = mesh.triangle(t);
    let f = tri.faces[k];
    let [a, b] = mesh.face_points(f);
    let h = (b - a).norm();
    let o = usize::from(face_reversed(tri, k));
    tables
        .face_rule
        .points
        .iter()
        .zip(&tables.face_rule.weights)
        .enumerate()
        .map(|(q, (&s, &w))| TracePoint {
            x: a + (b - a) * s,
            w: w * h,
            phi: tables.trace_values[k][o][q].clone(),
            mu: tables.face_values[q].clone(),
        })
        .collect()
}

/// Dense element matrices; see the module documentation for the layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBlocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub tau: [f64; 3],
}

/// Assembles the element matrices of element `t`.
pub fn assemble_local(
    mesh: &Mesh,
    problem: &ProblemSpec,
    tables: &ReferenceTables,
    t: usize,
    rho0: f64,
) -> Result<LocalBlocks> {
    mesh.check_element(t)?;
    let nb = tables.element_dim();
    let nf = tables.face_dim();
    let eps = problem.eps;
    let map = AffineMap::of_element(mesh, t);
    let tau = element_taus(mesh, problem, tables, t, rho0)?;

    let mut a = DMatrix::<f64>::zeros(3 * nb, 3 * nb);
    let mut b = DMatrix::<f64>::zeros(3 * nb, 3 * nf);
    let mut f = DVector::<f64>::zeros(3 * nb);
    let mut c = DMatrix::<f64>::zeros(3 * nf, 3 * nb);
    let mut d = DMatrix::<f64>::zeros(3 * nf, 3 * nf);
    let u0 = 2 * nb;

    // (ε⁻¹ q, r): the physical mass matrix of the orthonormal basis is det·I
    for i in 0..2 * nb {
        a[(i, i)] = map.det / eps;
    }
    for (q, (xi, wq)) in tables.element_rule.points.iter().zip(&tables.element_rule.weights).enumerate() {
        let x = map.map(xi);
        let w = wq * map.det;
        let phi = &tables.element_values[q];
        let grads: Vec<Vec2> = tables.element_gradients[q].iter().map(|g| map.gradient(g)).collect();
        let beta = (problem.beta)(x);
        let reaction = (problem.c)(x) - (problem.div_beta)(x);
        let fx = (problem.f)(x);
        for i in 0..nb {
            let gi = grads[i];
            let bgi = beta.dot(&gi);
            for j in 0..nb {
                let pj = w * phi[j];
                // −(u, div r) and −(q, ∇w)
                a[(i, u0 + j)] -= pj * gi.x;
                a[(nb + i, u0 + j)] -= pj * gi.y;
                a[(u0 + i, j)] -= pj * gi.x;
                a[(u0 + i, nb + j)] -= pj * gi.y;
                // −(β u, ∇w) + ((c − div β) u, w)
                a[(u0 + i, u0 + j)] += pj * (reaction * phi[i] - bgi);
            }
            f[u0 + i] += w * fx * phi[i];
        }
    }
    for (k, &tk) in tau.iter().enumerate() {
        let n = mesh.element_outward_normal(t, k);
        for tp in trace_points(mesh, tables, t, k) {
            let bn = (problem.beta)(tp.x).dot(&n);
            for i in 0..nb {
                let wi = tp.w * tp.phi[i];
                for j in 0..nb {
                    let wij = wi * tp.phi[j];
                    a[(u0 + i, j)] += wij * n.x;
                    a[(u0 + i, nb + j)] += wij * n.y;
                    a[(u0 + i, u0 + j)] += tk * wij;
                }
                for m in 0..nf {
                    let wim = wi * tp.mu[m];
                    b[(i, k * nf + m)] += wim * n.x;
                    b[(nb + i, k * nf + m)] += wim * n.y;
                    b[(u0 + i, k * nf + m)] += (bn - tk) * wim;
                    c[(k * nf + m, i)] += wim * n.x;
                    c[(k * nf + m, nb + i)] += wim * n.y;
                    c[(k * nf + m, u0 + i)] += tk * wim;
                }
            }
            for l in 0..nf {
                for m in 0..nf {
                    d[(k * nf + l, k * nf + m)] += (bn - tk) * tp.w * tp.mu[l] * tp.mu[m];
                }
            }
        }
    }
    Ok(LocalBlocks { a, b, f, c, d, tau })
}

/// Result of eliminating `(q, u)` from the local equations:
/// `x = x_f − X_b û`, with element contribution `K û − r` to the skeleton.
#[derive(Clone, Debug, PartialEq)]
pub struct Condensed {
    /// `A⁻¹ B`
    pub ainv_b: DMatrix<f64>,
    /// `A⁻¹ F`
    pub ainv_f: DVector<f64>,
    /// `D − C A⁻¹ B`
    pub k: DMatrix<f64>,
    /// `−C A⁻¹ F`
    pub r: DVector<f64>,
}

/// Static condensation of one element.
pub fn condense(blocks: &LocalBlocks, element: usize) -> Result<Condensed> {
    let fail = |reason: &str| Error::NumericalFailure { element, reason: reason.into() };
    let lu = blocks.a.clone().lu();
    let ainv_b = lu.solve(&blocks.b).ok_or_else(|| fail("singular (q, u) block"))?;
    let ainv_f = lu.solve(&blocks.f).ok_or_else(|| fail("singular (q, u) block"))?;
    if ainv_b.iter().chain(ainv_f.iter()).any(|v| !v.is_finite()) {
        return Err(fail("non-finite local solution"));
    }
    let k = &blocks.d - &blocks.c * &ainv_b;
    let r = -(&blocks.c * &ainv_f);
    Ok(Condensed { ainv_b, ainv_f, k, r })
}

impl Condensed {
    /// `(q, u)` coefficients from the element's trace coefficients.
    pub fn recover(&self, uhat: &DVector<f64>) -> DVector<f64> {
        &self.ainv_f - &self.ainv_b * uhat
    }
}
