//! Polynomial spaces, quadrature and `L²` projections.
//!
//! Element functions are expanded in an `L²`-orthonormal basis of the
//! reference triangle pulled back through the affine element map, so the
//! physical mass matrix of element `T` is `2|T| · I`. Face functions use
//! orthonormal Legendre polynomials in the face parameter `s ∈ [0, 1]`,
//! running from the lower to the higher global vertex id; the physical face
//! mass matrix is `h_F · I`.

pub mod basis;
pub mod quadrature;

use nalgebra::Matrix2;

pub use basis::{element_dim, ElementBasis, FaceBasis, SUPPORTED_DEGREES};
pub use quadrature::{element_rule, face_rule, ElementRule, FaceRule, QuadratureRule};

use crate::error::Result;
use crate::mesh::{Mesh, Triangle};
use crate::{Point, Vec2};

/// Quadrature degree used for every bilinear form and data term.
pub fn default_quadrature_degree(p: usize) -> usize {
    2 * p + 4
}

/// Reference vertices of the reference triangle.
pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Affine map `x = a + J ξ` from the reference triangle onto an element.
#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    pub origin: Point,
    pub jacobian: Matrix2<f64>,
    pub det: f64,
    pub inv_transpose: Matrix2<f64>,
}

impl AffineMap {
    pub fn new([a, b, c]: [Point; 3]) -> Self {
        let jacobian = Matrix2::from_columns(&[b - a, c - a]);
        let det = jacobian.determinant();
        let inv = jacobian.try_inverse().unwrap_or_else(Matrix2::zeros);
        AffineMap { origin: a, jacobian, det, inv_transpose: inv.transpose() }
    }

    pub fn of_element(mesh: &Mesh, t: usize) -> Self {
        Self::new(mesh.element_points(t))
    }

    pub fn map(&self, xi: &[f64; 2]) -> Point {
        self.origin + self.jacobian * Vec2::new(xi[0], xi[1])
    }

    pub fn to_reference(&self, x: &Point) -> [f64; 2] {
        let r = self.inv_transpose.transpose() * (x - self.origin);
        [r.x, r.y]
    }

    /// Physical gradient from a reference gradient.
    pub fn gradient(&self, g: &[f64; 2]) -> Vec2 {
        self.inv_transpose * Vec2::new(g[0], g[1])
    }
}

/// Orientation of local face `k` of `tri` relative to its global face
/// parameterisation: `false` when `s = 0` sits at local vertex `k + 1`.
pub fn face_reversed(tri: &Triangle, k: usize) -> bool {
    let (la, lb) = Triangle::face_local_vertices(k);
    tri.vertices[la] > tri.vertices[lb]
}

/// Reference coordinates of the point with face parameter `s` on local face `k`.
pub fn face_point_reference(k: usize, reversed: bool, s: f64) -> [f64; 2] {
    let (la, lb) = Triangle::face_local_vertices(k);
    let (a, b) = if reversed { (lb, la) } else { (la, lb) };
    let (pa, pb) = (REFERENCE_VERTICES[a], REFERENCE_VERTICES[b]);
    [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
}

/// Basis values and quadrature tables shared by all elements of one degree.
#[derive(Clone, Debug)]
pub struct ReferenceTables {
    pub p: usize,
    pub basis: ElementBasis,
    pub face_basis: FaceBasis,
    pub element_rule: ElementRule,
    /// `element_values[q][i]`
    pub element_values: Vec<Vec<f64>>,
    /// `element_gradients[q][i]`, reference gradients
    pub element_gradients: Vec<Vec<[f64; 2]>>,
    pub face_rule: FaceRule,
    /// `face_values[q][k]`, face basis at face quadrature points
    pub face_values: Vec<Vec<f64>>,
    /// `trace_values[local face][reversed][q][i]`, element basis on faces
    pub trace_values: [[Vec<Vec<f64>>; 2]; 3],
    pub trace_gradients: [[Vec<Vec<[f64; 2]>>; 2]; 3],
}

impl ReferenceTables {
    /// Tables for degree `p` with quadrature exact to `quadrature_degree`.
    pub fn new(p: usize, quadrature_degree: usize) -> Result<Self> {
        let basis = ElementBasis::new(p)?;
        let face_basis = FaceBasis::new(p)?;
        let element_rule = element_rule(quadrature_degree)?;
        let face_rule = face_rule(quadrature_degree)?;
        let (element_values, element_gradients) = basis.eval(&element_rule.points);
        let face_values = face_rule.points.iter().map(|&s| face_basis.values(s)).collect();
        let trace = |k: usize, rev: bool| {
            let pts: Vec<[f64; 2]> = face_rule.points.iter().map(|&s| face_point_reference(k, rev, s)).collect();
            basis.eval(&pts)
        };
        let mut trace_values: [[Vec<Vec<f64>>; 2]; 3] = Default::default();
        let mut trace_gradients: [[Vec<Vec<[f64; 2]>>; 2]; 3] = Default::default();
        for k in 0..3 {
            for (o, rev) in [false, true].into_iter().enumerate() {
                let (v, g) = trace(k, rev);
                trace_values[k][o] = v;
                trace_gradients[k][o] = g;
            }
        }
        Ok(ReferenceTables {
            p,
            basis,
            face_basis,
            element_rule,
            element_values,
            element_gradients,
            face_rule,
            face_values,
            trace_values,
            trace_gradients,
        })
    }

    /// Tables with the default quadrature degree `2p + 4`.
    pub fn with_default_quadrature(p: usize) -> Result<Self> {
        Self::new(p, default_quadrature_degree(p))
    }

    pub fn element_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn face_dim(&self) -> usize {
        self.face_basis.dim()
    }
}

/// Evaluates `Σ c_i φ_i` from precomputed basis values.
pub fn combine(coefficients: &[f64], values: &[f64]) -> f64 {
    coefficients.iter().zip(values).map(|(c, v)| c * v).sum()
}

/// Face quadrature in the face parameter, split at any `breakpoints` lying
/// strictly inside the face. Returns `(s, weight)` pairs with weights
/// summing to one.
pub fn face_quadrature(rule: &FaceRule, a: &Point, b: &Point, breakpoints: &[Point]) -> Vec<(f64, f64)> {
    let e = b - a;
    let len2 = e.norm_squared();
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .filter_map(|x| {
            let s = (x - a).dot(&e) / len2;
            let dist = (a + e * s - x).norm();
            (s > 1e-12 && s < 1.0 - 1e-12 && dist <= 1e-12 * len2.sqrt()).then_some(s)
        })
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut nodes = vec![0.0];
    nodes.extend(cuts);
    nodes.push(1.0);
    nodes
        .windows(2)
        .flat_map(|w| {
            let (lo, hi) = (w[0], w[1]);
            rule.points.iter().zip(&rule.weights).map(move |(s, wt)| (lo + (hi - lo) * s, (hi - lo) * wt))
        })
        .collect()
}

/// `L²` projection of `field` onto `P_p(T)`, as basis coefficients.
pub fn l2_project_element(tables: &ReferenceTables, mesh: &Mesh, t: usize, field: impl Fn(Point) -> f64) -> Vec<f64> {
    let map = AffineMap::of_element(mesh, t);
    let mut c = vec![0.0; tables.element_dim()];
    for (q, (xi, w)) in tables.element_rule.points.iter().zip(&tables.element_rule.weights).enumerate() {
        let v = w * field(map.map(xi));
        for (ci, phi) in c.iter_mut().zip(&tables.element_values[q]) {
            *ci += v * phi;
        }
    }
    c
}

/// `L²` projection of `field` onto `P_p(F)`, as face basis coefficients.
pub fn l2_project_face(
    tables: &ReferenceTables,
    mesh: &Mesh,
    f: usize,
    field: impl Fn(Point) -> f64,
    breakpoints: &[Point],
) -> Vec<f64> {
    let [a, b] = mesh.face_points(f);
    let mut c = vec![0.0; tables.face_dim()];
    for (s, w) in face_quadrature(&tables.face_rule, &a, &b, breakpoints) {
        let v = w * field(a + (b - a) * s);
        for (ck, psi) in c.iter_mut().zip(tables.face_basis.values(s)) {
            *ck += v * psi;
        }
    }
    c
}

/// Evaluates an element expansion at a physical point inside element `t`.
pub fn eval_element(tables: &ReferenceTables, map: &AffineMap, coefficients: &[f64], x: &Point) -> f64 {
    combine(coefficients, &tables.basis.values(&map.to_reference(x)))
}
