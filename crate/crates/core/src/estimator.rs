//! Residual a posteriori error estimator and error norms for HDG solutions.
//!
//! With `R_h = f − div q_h − β·∇u_h − c u_h` and the weights
//! `α_S = min(h_S / √ε, 1)` and `γ_F` from [`gamma`], the indicators are
//!
//! ```text
//! η_T²   = α_T² ‖R_h‖²_T + ε⁻¹ ‖q_h + ε∇u_h‖²_T
//! η_F⁰²  = ε^{-1/2} α_F ‖⟦q_h·n⟧‖²_F + γ_F ‖⟦u_h⟧‖²_F      (interior faces)
//! η_F^∂² = γ_F ‖u_h − g‖²_F                                (boundary faces)
//! ```
//!
//! Jumps are `left − right` with the face normal pointing out of the left
//! element.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fem::{face_point_reference, face_quadrature, face_reversed, AffineMap, ReferenceTables};
use crate::hdg::HdgSolution;
use crate::mesh::Mesh;
use crate::problems::ProblemSpec;
use crate::{Point, Vec2};

/// `α = min(h ε^{-1/2}, 1)`.
pub fn alpha(h: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    if !(h >= 0.0) {
        return invalid(format!("length scale must be nonnegative, got {h}"));
    }
    Ok((h / eps.sqrt()).min(1.0))
}

/// `γ_F = min{ ε/h + (h/ε + ε^{-1/2} α_F) ‖β‖ + h, (ε + ‖β‖)/h + h }`.
pub fn gamma(h_f: f64, eps: f64, beta_inf: f64) -> Result<f64> {
    if !(h_f > 0.0) {
        return invalid(format!("face length must be positive, got {h_f}"));
    }
    let a = alpha(h_f, eps)?;
    let first = eps / h_f + (h_f / eps + a / eps.sqrt()) * beta_inf + h_f;
    let second = (eps + beta_inf) / h_f + h_f;
    Ok(first.min(second))
}

/// `max |β|` over the sample points of face `f`.
pub fn beta_sup_on_face(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, f: usize) -> f64 {
    let [a, b] = mesh.face_points(f);
    crate::hdg::local::face_sample_params(tables).map(|s| (problem.beta)(a + (b - a) * s).norm()).fold(0.0, f64::max)
}

/// Discrete fields at one element quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct ElementSample {
    pub x: Point,
    /// physical quadrature weight
    pub w: f64,
    pub u: f64,
    pub grad_u: Vec2,
    pub q: Vec2,
    pub div_q: f64,
}

fn expand(c: &[f64], v: &[f64]) -> f64 {
    c.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn expand_grad(map: &AffineMap, c: &[f64], g: &[[f64; 2]]) -> Vec2 {
    let r = c.iter().zip(g).fold([0.0; 2], |acc, (a, gi)| [acc[0] + a * gi[0], acc[1] + a * gi[1]]);
    map.gradient(&r)
}

/// `(u_h, ∇u_h, q_h, div q_h)` at reference point `xi` of element `t`.
pub fn eval_discrete(tables: &ReferenceTables, map: &AffineMap, solution: &HdgSolution, t: usize, xi: &[f64; 2]) -> (f64, Vec2, Vec2, f64) {
    let v = tables.basis.values(xi);
    let g = tables.basis.gradients(xi);
    eval_from_tables(tables, map, solution, t, &v, &g)
}

fn eval_from_tables(
    tables: &ReferenceTables,
    map: &AffineMap,
    solution: &HdgSolution,
    t: usize,
    v: &[f64],
    g: &[[f64; 2]],
) -> (f64, Vec2, Vec2, f64) {
    let nb = tables.element_dim();
    let (q1, q2) = solution.q[t].split_at(nb);
    let u = &solution.u[t];
    let gq1 = expand_grad(map, q1, g);
    let gq2 = expand_grad(map, q2, g);
    (expand(u, v), expand_grad(map, u, g), Vec2::new(expand(q1, v), expand(q2, v)), gq1.x + gq2.y)
}

/// Discrete fields at the element quadrature points of `t`.
pub fn sample_element(mesh: &Mesh, tables: &ReferenceTables, solution: &HdgSolution, t: usize) -> Vec<ElementSample> {
    let map = AffineMap::of_element(mesh, t);
    tables
        .element_rule
        .points
        .iter()
        .zip(&tables.element_rule.weights)
        .enumerate()
        .map(|(k, (xi, w))| {
            let (u, grad_u, q, div_q) =
                eval_from_tables(tables, &map, solution, t, &tables.element_values[k], &tables.element_gradients[k]);
            ElementSample { x: map.map(xi), w: w * map.det, u, grad_u, q, div_q }
        })
        .collect()
}

/// `R_h` at the samples.
pub fn residual_values(problem: &ProblemSpec, samples: &[ElementSample]) -> Vec<f64> {
    samples
        .iter()
        .map(|s| (problem.f)(s.x) - s.div_q - (problem.beta)(s.x).dot(&s.grad_u) - (problem.c)(s.x) * s.u)
        .collect()
}

/// Element quantities: `(‖R_h‖², η_T², osc²)`.
pub fn element_terms(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, solution: &HdgSolution, t: usize) -> Result<(f64, f64, f64)> {
    let eps = problem.eps;
    let a_t = alpha(mesh.diameter(t), eps)?;
    let samples = sample_element(mesh, tables, solution, t);
    let r = residual_values(problem, &samples);
    let res2: f64 = samples.iter().zip(&r).map(|(s, ri)| s.w * ri * ri).sum();
    let flux2: f64 = samples.iter().map(|s| s.w * (s.q + s.grad_u * eps).norm_squared()).sum();
    // P_W R_h via the orthonormal basis: c_i = Σ ŵ R φ̂_i
    let nb = tables.element_dim();
    let mut c = vec![0.0; nb];
    for (k, (ri, w)) in r.iter().zip(&tables.element_rule.weights).enumerate() {
        for (ci, phi) in c.iter_mut().zip(&tables.element_values[k]) {
            *ci += w * ri * phi;
        }
    }
    let osc: f64 = samples
        .iter()
        .zip(&r)
        .enumerate()
        .map(|(k, (s, ri))| {
            let d = ri - expand(&c, &tables.element_values[k]);
            s.w * d * d
        })
        .sum();
    Ok((res2, a_t * a_t * res2 + flux2 / eps, a_t * a_t * osc))
}

/// Squared indicator of face `f`: `(η_F⁰)²` or `(η_F^∂)²`.
pub fn face_term(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, solution: &HdgSolution, f: usize) -> Result<f64> {
    let eps = problem.eps;
    let geo = mesh.face_geometry(f)?;
    let g_f = gamma(geo.length, eps, beta_sup_on_face(mesh, problem, tables, f))?;
    let face = mesh.face(f);
    let [a, b] = mesh.face_points(f);
    let nb = tables.element_dim();
    let side = |t: usize| {
        let tri = mesh.triangle(t);
        let k = tri.local_face(f).expect("face of element");
        (k, usize::from(face_reversed(tri, k)))
    };
    match face.right {
        Some(right) => {
            let a_f = alpha(geo.length, eps)?;
            let n = face.unit_normal;
            let (kl, ol) = side(face.left);
            let (kr, or) = side(right);
            let (mut jq, mut ju) = (0.0, 0.0);
            for (qp, w) in tables.face_rule.weights.iter().enumerate() {
                let vl = &tables.trace_values[kl][ol][qp];
                let vr = &tables.trace_values[kr][or][qp];
                let ql = &solution.q[face.left];
                let qr = &solution.q[right];
                let qn = |q: &[f64], v: &[f64]| expand(&q[..nb], v) * n.x + expand(&q[nb..], v) * n.y;
                let dq = qn(ql, vl) - qn(qr, vr);
                let du = expand(&solution.u[face.left], vl) - expand(&solution.u[right], vr);
                jq += w * geo.length * dq * dq;
                ju += w * geo.length * du * du;
            }
            Ok(a_f / eps.sqrt() * jq + g_f * ju)
        }
        None => {
            let (k, o) = side(face.left);
            let mut e2 = 0.0;
            for (s, w) in face_quadrature(&tables.face_rule, &a, &b, &problem.g_breakpoints) {
                let v = tables.basis.values(&face_point_reference(k, o == 1, s));
                let d = expand(&solution.u[face.left], &v) - (problem.g)(a + (b - a) * s);
                e2 += w * geo.length * d * d;
            }
            Ok(g_f * e2)
        }
    }
}

/// Indicators of a discrete solution. All indicator vectors hold squares.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    /// `η_T²` per element
    pub element: Vec<f64>,
    /// `(η_F⁰)²` or `(η_F^∂)²` per face
    pub face: Vec<f64>,
    pub face_is_boundary: Vec<bool>,
    /// `osc_h(R_h, T)²` per element
    pub oscillation: Vec<f64>,
    /// `‖R_h‖²_T` per element
    pub residual: Vec<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub eta: f64,
}

impl EstimatorReport {
    /// One row per entity: `id,type,value2`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "id,type,value2")?;
        for (t, v) in self.element.iter().enumerate() {
            writeln!(out, "{t},element,{v:.16e}")?;
        }
        for (f, (v, b)) in self.face.iter().zip(&self.face_is_boundary).enumerate() {
            let kind = if *b { "boundary_face" } else { "interior_face" };
            writeln!(out, "{f},{kind},{v:.16e}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn total_oscillation(&self) -> f64 {
        self.oscillation.iter().sum::<f64>().sqrt()
    }
}

/// Evaluates every indicator.
pub fn estimate(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, solution: &HdgSolution) -> Result<EstimatorReport> {
    let elements: Vec<(f64, f64, f64)> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| element_terms(mesh, problem, tables, solution, t))
        .collect::<Result<_>>()?;
    let face: Vec<f64> =
        (0..mesh.n_faces()).into_par_iter().map(|f| face_term(mesh, problem, tables, solution, f)).collect::<Result<_>>()?;
    let residual = elements.iter().map(|e| e.0).collect();
    let element: Vec<f64> = elements.iter().map(|e| e.1).collect();
    let oscillation = elements.iter().map(|e| e.2).collect();
    let e1: f64 = element.iter().sum();
    let e2: f64 = face.iter().sum();
    Ok(EstimatorReport {
        element,
        face,
        face_is_boundary: mesh.faces().iter().map(|f| f.is_boundary()).collect(),
        oscillation,
        residual,
        eta1: e1.sqrt(),
        eta2: e2.sqrt(),
        eta: (e1 + e2).sqrt(),
    })
}

/// Value of a piecewise-smooth pair `(p, w)` and the derivatives the energy
/// norm needs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldValue {
    pub p: Vec2,
    pub div_p: f64,
    pub w: f64,
    pub grad_w: Vec2,
}

/// A pair `(p, w)` defined element by element.
pub trait PiecewiseField: Sync {
    /// Value at the point `x` (reference coordinates `xi`) of element `t`.
    fn eval(&self, t: usize, x: Point, xi: &[f64; 2]) -> FieldValue;
}

/// `(p, w) = (q − q_h, u − u_h)` for a problem with an exact solution.
pub struct ErrorField<'a> {
    mesh: &'a Mesh,
    problem: &'a ProblemSpec,
    tables: &'a ReferenceTables,
    solution: &'a HdgSolution,
}

impl<'a> ErrorField<'a> {
    pub fn new(mesh: &'a Mesh, problem: &'a ProblemSpec, tables: &'a ReferenceTables, solution: &'a HdgSolution) -> Result<Self> {
        if problem.exact.is_none() {
            return invalid(format!("problem '{}' has no exact solution", problem.name));
        }
        Ok(ErrorField { mesh, problem, tables, solution })
    }
}

impl PiecewiseField for ErrorField<'_> {
    fn eval(&self, t: usize, x: Point, xi: &[f64; 2]) -> FieldValue {
        let ex = self.problem.exact.as_ref().expect("checked on construction");
        let eps = self.problem.eps;
        let map = AffineMap::of_element(self.mesh, t);
        let (u, gu, q, dq) = eval_discrete(self.tables, &map, self.solution, t, xi);
        FieldValue {
            p: -(ex.grad)(x) * eps - q,
            div_p: -eps * (ex.laplacian)(x) - dq,
            w: (ex.u)(x) - u,
            grad_w: (ex.grad)(x) - gu,
        }
    }
}

/// The discrete pair `(q_h, u_h)` itself.
pub struct DiscreteField<'a> {
    pub mesh: &'a Mesh,
    pub tables: &'a ReferenceTables,
    pub solution: &'a HdgSolution,
}

impl PiecewiseField for DiscreteField<'_> {
    fn eval(&self, t: usize, _x: Point, xi: &[f64; 2]) -> FieldValue {
        let map = AffineMap::of_element(self.mesh, t);
        let (w, grad_w, p, div_p) = eval_discrete(self.tables, &map, self.solution, t, xi);
        FieldValue { p, div_p, w, grad_w }
    }
}

/// A globally defined pair given by closures (the same on every element).
pub struct FnField<F: Fn(Point) -> FieldValue + Sync>(pub F);

impl<F: Fn(Point) -> FieldValue + Sync> PiecewiseField for FnField<F> {
    fn eval(&self, _t: usize, x: Point, _xi: &[f64; 2]) -> FieldValue {
        (self.0)(x)
    }
}

/// Squared contributions to the energy norm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms {
    /// `Σ ε⁻¹‖p‖² + ‖w‖²`
    pub l2: f64,
    /// `Σ ε‖∇w‖²`
    pub gradient: f64,
    /// `Σ α_T² ‖div p + β·∇w‖²`
    pub streamline: f64,
    /// interior and boundary face terms
    pub faces: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.l2 + self.gradient + self.streamline + self.faces
    }
}

/// Element contributions to the energy norm of `field` on element `t`.
pub fn energy_element_terms(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, field: &dyn PiecewiseField, t: usize) -> Result<[f64; 4]> {
    let eps = problem.eps;
    let a_t = alpha(mesh.diameter(t), eps)?;
    let map = AffineMap::of_element(mesh, t);
    let mut out = [0.0; 4];
    for (xi, w) in tables.element_rule.points.iter().zip(&tables.element_rule.weights) {
        let x = map.map(xi);
        let w = w * map.det;
        let v = field.eval(t, x, xi);
        out[0] += w * v.p.norm_squared() / eps;
        out[1] += w * v.w * v.w;
        out[2] += w * eps * v.grad_w.norm_squared();
        let s = v.div_p + (problem.beta)(x).dot(&v.grad_w);
        out[3] += w * a_t * a_t * s * s;
    }
    Ok(out)
}

/// Face contribution to the energy norm of `field` on face `f`.
pub fn energy_face_term(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, field: &dyn PiecewiseField, f: usize) -> Result<f64> {
    let eps = problem.eps;
    let geo = mesh.face_geometry(f)?;
    let g_f = gamma(geo.length, eps, beta_sup_on_face(mesh, problem, tables, f))?;
    let face = mesh.face(f);
    let [a, b] = mesh.face_points(f);
    let at = |t: usize, s: f64| {
        let tri = mesh.triangle(t);
        let k = tri.local_face(f).expect("face of element");
        let xi = face_point_reference(k, face_reversed(tri, k), s);
        field.eval(t, a + (b - a) * s, &xi)
    };
    let mut out = 0.0;
    match face.right {
        Some(right) => {
            let a_f = alpha(geo.length, eps)?;
            let n = face.unit_normal;
            for (s, w) in tables.face_rule.points.iter().zip(&tables.face_rule.weights) {
                let (l, r) = (at(face.left, *s), at(right, *s));
                let jp = (l.p - r.p).dot(&n);
                let jw = l.w - r.w;
                out += w * geo.length * (a_f / eps.sqrt() * jp * jp + g_f * jw * jw);
            }
        }
        None => {
            for (s, w) in face_quadrature(&tables.face_rule, &a, &b, &problem.g_breakpoints) {
                let v = at(face.left, s);
                out += w * geo.length * g_f * v.w * v.w;
            }
        }
    }
    Ok(out)
}

/// All squared terms of the energy norm of `field`.
pub fn energy_terms(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, field: &dyn PiecewiseField) -> Result<EnergyTerms> {
    let el: Vec<[f64; 4]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| energy_element_terms(mesh, problem, tables, field, t))
        .collect::<Result<_>>()?;
    let faces: Vec<f64> =
        (0..mesh.n_faces()).into_par_iter().map(|f| energy_face_term(mesh, problem, tables, field, f)).collect::<Result<_>>()?;
    Ok(EnergyTerms {
        l2: el.iter().map(|e| e[0] + e[1]).sum(),
        gradient: el.iter().map(|e| e[2]).sum(),
        streamline: el.iter().map(|e| e[3]).sum(),
        faces: faces.iter().sum(),
    })
}

/// Energy norm `⦀(p, w)⦀_h`.
pub fn energy_norm(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, field: &dyn PiecewiseField) -> Result<f64> {
    Ok(energy_terms(mesh, problem, tables, field)?.total().sqrt())
}

/// `‖(p, w)‖_h = (Σ_T ε⁻¹‖p‖² + ‖w‖²)^{1/2}`.
pub fn simple_error_norm(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, field: &dyn PiecewiseField) -> Result<f64> {
    let el: Vec<[f64; 4]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| energy_element_terms(mesh, problem, tables, field, t))
        .collect::<Result<_>>()?;
    Ok(el.iter().map(|e| e[0] + e[1]).sum::<f64>().sqrt())
}

/// Both error norms `(‖·‖_h, ⦀·⦀_h)` of `(q − q_h, u − u_h)`.
pub fn error_norms(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, solution: &HdgSolution) -> Result<(f64, f64)> {
    let field = ErrorField::new(mesh, problem, tables, solution)?;
    let terms = energy_terms(mesh, problem, tables, &field)?;
    Ok((terms.l2.sqrt(), terms.total().sqrt()))
}
