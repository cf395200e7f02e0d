//! Gauss rules on the unit interval and collapsed (conical product) Gauss
//! rules on the reference triangle `(0,0), (1,0), (0,1)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

/// Highest polynomial degree a rule can be requested for.
pub const MAX_DEGREE: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    /// Polynomials up to this total degree are integrated exactly.
    pub degree: usize,
}

impl<P> QuadratureRule<P> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub type FaceRule = QuadratureRule<f64>;
pub type ElementRule = QuadratureRule<[f64; 2]>;

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)`.
pub(crate) fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p1 = z;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Jacobi rule for the weight `(1 - x)^α (1 + x)^β` on `[-1, 1]`
/// (Golub–Welsch).
fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = alpha + beta;
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        t[(k, k)] = diag;
        if k + 1 < n {
            let m = kf + 1.0;
            let num = 4.0 * m * (m + alpha) * (m + beta) * (m + ab);
            let s = 2.0 * m + ab;
            let den = s * s * (s + 1.0) * (s - 1.0);
            let off = (num / den).sqrt();
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma_int(alpha) * gamma_int(beta) / gamma_int(ab + 1.0);
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `Γ(x + 1)` for small nonnegative integers `x`.
fn gamma_int(x: f64) -> f64 {
    (1..=x.round() as u64).map(|k| k as f64).product()
}

/// Gauss rule on `[0, 1]` exact to `degree`, with `⌈(degree+1)/2⌉` points.
pub fn face_rule(degree: usize) -> Result<FaceRule> {
    if degree > MAX_DEGREE {
        return invalid(format!("face quadrature of degree {degree} exceeds {MAX_DEGREE}"));
    }
    let (x, w) = gauss_legendre(points_for(degree));
    Ok(QuadratureRule {
        points: x.iter().map(|z| 0.5 * (z + 1.0)).collect(),
        weights: w.iter().map(|v| 0.5 * v).collect(),
        degree,
    })
}

/// Positive-weight rule on the reference triangle exact to `degree`.
///
/// Conical product of Gauss–Legendre in `a` and Gauss–Jacobi (weight
/// `1 - b`) in `b` under `(x, y) = (a (1 - b), b)`.
pub fn element_rule(degree: usize) -> Result<ElementRule> {
    if degree > MAX_DEGREE {
        return invalid(format!("triangle quadrature of degree {degree} exceeds {MAX_DEGREE}"));
    }
    let n = points_for(degree);
    let (xa, wa) = gauss_legendre(n);
    let (xb, wb) = gauss_jacobi(n, 1.0, 0.0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (b, wbj) in xb.iter().zip(&wb) {
        let b = 0.5 * (b + 1.0);
        for (a, wai) in xa.iter().zip(&wa) {
            let a = 0.5 * (a + 1.0);
            points.push([a * (1.0 - b), b]);
            weights.push(0.5 * wai * 0.25 * wbj);
        }
    }
    Ok(QuadratureRule { points, weights, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ over the reference triangle of x^a y^b = a! b! / (a + b + 2)!.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn triangle_rules_are_exact() {
        for degree in 0..=16 {
            let rule = element_rule(degree).unwrap();
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = monomial_integral(a, b);
                    assert!(((q - exact) / exact).abs() <= 1e-12, "degree {degree} x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn face_rules_are_exact() {
        for degree in 0..=20 {
            let rule = face_rule(degree).unwrap();
            assert_eq!(rule.len(), degree / 2 + 1);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for k in 0..=degree as i32 {
                let q: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k)).sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(((q - exact) / exact).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn small_cases() {
        let r = face_rule(3).unwrap();
        assert_eq!(r.len(), 2);
        let q: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(3)).sum();
        assert!((q - 0.25).abs() < 1e-15);

        let r = element_rule(2).unwrap();
        let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((q - 1.0 / 24.0).abs() < 1e-15);

        let r = element_rule(0).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);

        assert!(element_rule(MAX_DEGREE + 1).is_err());
        assert!(face_rule(MAX_DEGREE + 1).is_err());
    }
}
