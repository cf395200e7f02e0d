use nalgebra::{DMatrix, DVector};

use super::quadrature::element_rule;
use crate::error::{invalid, Result};

/// Polynomial degrees supported by the element and face bases.
pub const SUPPORTED_DEGREES: std::ops::RangeInclusive<usize> = 1..=3;

const CENTER: f64 = 1.0 / 3.0;

/// Dimension of `P_p` in two variables.
pub fn element_dim(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Exponents `(a, b)` of the monomials `x^a y^b`, ordered by total degree.
fn exponents(p: usize) -> Vec<(i32, i32)> {
    (0..=p as i32)
        .flat_map(|k| (0..=k).map(move |b| (k - b, b)))
        .collect()
}

/// Basis of `P_p` on the reference triangle, orthonormal in `L²`.
///
/// Built by Gram–Schmidt (with one re-orthogonalisation pass) from the
/// monomials centred at the barycentre, in order of total degree, so the
/// first `dim P_k` functions span `P_k` for each `k ≤ p`.
#[derive(Clone, Debug)]
pub struct ElementBasis {
    degree: usize,
    exponents: Vec<(i32, i32)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coefficients: DMatrix<f64>,
    gram_condition: f64,
}

impl ElementBasis {
    pub fn new(p: usize) -> Result<Self> {
        if !SUPPORTED_DEGREES.contains(&p) {
            return invalid(format!("element basis degree {p} not in {SUPPORTED_DEGREES:?}"));
        }
        Ok(Self::build(p))
    }

    /// Like [`ElementBasis::new`] without the range restriction; used for
    /// projections onto `P_0`.
    pub(crate) fn build(p: usize) -> Self {
        let exps = exponents(p);
        let n = exps.len();
        let rule = element_rule(2 * p).expect("degree within tabulated range");
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let m: Vec<f64> = exps.iter().map(|&e| monomial(e, pt)).collect();
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        let eig = gram.clone().symmetric_eigenvalues();
        let gram_condition = eig.max() / eig.min();

        let inner = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(&gram * b));
        let mut rows: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = DVector::<f64>::zeros(n);
            v[i] = 1.0;
            for _ in 0..2 {
                for r in &rows {
                    let c = inner(r, &v);
                    v -= r * c;
                }
            }
            let norm = inner(&v, &v).sqrt();
            rows.push(v / norm);
        }
        let coefficients = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        ElementBasis { degree: p, exponents: exps, coefficients, gram_condition }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Condition number of the monomial Gram matrix the basis was built from.
    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    /// Values of all basis functions at a reference point.
    pub fn values(&self, xi: &[f64; 2]) -> Vec<f64> {
        let m: Vec<f64> = self.exponents.iter().map(|&e| monomial(e, xi)).collect();
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.coefficients[(i, j)] * m[j]).sum())
            .collect()
    }

    /// Reference gradients of all basis functions at a reference point.
    pub fn gradients(&self, xi: &[f64; 2]) -> Vec<[f64; 2]> {
        let dm: Vec<[f64; 2]> = self.exponents.iter().map(|&e| monomial_gradient(e, xi)).collect();
        (0..self.dim())
            .map(|i| {
                let mut g = [0.0; 2];
                for (j, d) in dm.iter().enumerate() {
                    g[0] += self.coefficients[(i, j)] * d[0];
                    g[1] += self.coefficients[(i, j)] * d[1];
                }
                g
            })
            .collect()
    }

    /// Values and reference gradients at each point: `(values[q][i], gradients[q][i])`.
    pub fn eval(&self, points: &[[f64; 2]]) -> (Vec<Vec<f64>>, Vec<Vec<[f64; 2]>>) {
        points.iter().map(|xi| (self.values(xi), self.gradients(xi))).unzip()
    }
}

fn monomial((a, b): (i32, i32), xi: &[f64; 2]) -> f64 {
    (xi[0] - CENTER).powi(a) * (xi[1] - CENTER).powi(b)
}

fn monomial_gradient((a, b): (i32, i32), xi: &[f64; 2]) -> [f64; 2] {
    let (x, y) = (xi[0] - CENTER, xi[1] - CENTER);
    let dx = if a == 0 { 0.0 } else { f64::from(a) * x.powi(a - 1) * y.powi(b) };
    let dy = if b == 0 { 0.0 } else { f64::from(b) * x.powi(a) * y.powi(b - 1) };
    [dx, dy]
}

/// Orthonormal shifted Legendre polynomials `√(2k+1) P_k(2s − 1)` on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct FaceBasis {
    degree: usize,
}

impl FaceBasis {
    pub fn new(p: usize) -> Result<Self> {
        if !SUPPORTED_DEGREES.contains(&p) {
            return invalid(format!("face basis degree {p} not in {SUPPORTED_DEGREES:?}"));
        }
        Ok(FaceBasis { degree: p })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn values(&self, s: f64) -> Vec<f64> {
        let z = 2.0 * s - 1.0;
        let mut out = Vec::with_capacity(self.dim());
        let (mut p0, mut p1) = (1.0, z);
        for k in 0..=self.degree {
            let pk = match k {
                0 => 1.0,
                1 => z,
                _ => {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                    p2
                }
            };
            out.push((2.0 * k as f64 + 1.0).sqrt() * pk);
        }
        out
    }
}
