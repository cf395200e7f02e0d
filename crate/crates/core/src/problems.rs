//! Benchmark problems for `−ε Δu + β·∇u + c u = f` in `Ω = [0,1]²`, `u = g`
//! on `∂Ω`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::{Point, Vec2};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> Vec2 + Send + Sync>;

/// Exact solution with the derivatives needed for error norms.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub grad: VectorFn,
    pub laplacian: ScalarFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    /// Diffusion coefficient, `0 < ε ≤ 1`.
    pub eps: f64,
    pub beta: VectorFn,
    pub div_beta: ScalarFn,
    pub c: ScalarFn,
    pub f: ScalarFn,
    pub g: ScalarFn,
    /// Points of `∂Ω` where `g` jumps; face integrals of `g` are split there.
    pub g_breakpoints: Vec<Point>,
    pub exact: Option<ExactSolution>,
    /// Width of the steepest layer of the exact solution, when known.
    pub layer_width: Option<f64>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// `f − (−εΔu + β·∇u + c u)` at `x`; zero when `f` matches the exact solution.
    pub fn pde_residual(&self, x: Point) -> Option<f64> {
        let ex = self.exact.as_ref()?;
        let lhs = -self.eps * (ex.laplacian)(x) + (self.beta)(x).dot(&(ex.grad)(x)) + (self.c)(x) * (ex.u)(x);
        Some((self.f)(x) - lhs)
    }

    /// Exact flux `q = −ε ∇u`.
    pub fn exact_flux(&self, x: Point) -> Option<Vec2> {
        self.exact.as_ref().map(|ex| -(ex.grad)(x) * self.eps)
    }

    /// Smallest value of `c − ½ div β` over the sample points.
    pub fn min_reaction_margin(&self, samples: &[Point]) -> f64 {
        samples
            .iter()
            .map(|&x| (self.c)(x) - 0.5 * (self.div_beta)(x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("diffusion coefficient must satisfy 0 < eps <= 1, got {eps}"));
    }
    Ok(())
}

/// `exp(z)`, flushed to zero below `−700`.
pub fn layer_exp(z: f64) -> f64 {
    if z < -700.0 {
        0.0
    } else {
        z.exp()
    }
}

fn constant(v: f64) -> ScalarFn {
    Arc::new(move |_| v)
}

fn constant_vector(v: Vec2) -> VectorFn {
    Arc::new(move |_| v)
}

/// Outflow boundary layers along `x = 1` and `y = 1`; `β = (1, 1)`, `c = 0`.
///
/// `u = x + y(1−x) + (e^{−1/ε} − e^{−(1−x)(1−y)/ε}) / (1 − e^{−1/ε})`.
pub fn make_example1(eps: f64) -> Result<ProblemSpec> {
    check_eps(eps)?;
    let e1 = layer_exp(-1.0 / eps);
    let d = 1.0 - e1;
    let layer = move |x: Point| layer_exp(-(1.0 - x.x) * (1.0 - x.y) / eps);
    let u: ScalarFn = Arc::new(move |x: Point| x.x + x.y * (1.0 - x.x) + (e1 - layer(x)) / d);
    let grad: VectorFn = Arc::new(move |x: Point| {
        let l = layer(x) / (eps * d);
        Vec2::new((1.0 - x.y) * (1.0 - l), (1.0 - x.x) * (1.0 - l))
    });
    let laplacian: ScalarFn = Arc::new(move |x: Point| {
        let (a, b) = (1.0 - x.x, 1.0 - x.y);
        -(a * a + b * b) * layer(x) / (eps * eps * d)
    });
    let f: ScalarFn = Arc::new(move |x: Point| {
        let (a, b) = (1.0 - x.x, 1.0 - x.y);
        let l = layer(x) / (eps * d);
        (a * a + b * b) * l + (a + b) * (1.0 - l)
    });
    Ok(ProblemSpec {
        name: "example1".into(),
        eps,
        beta: constant_vector(Vec2::new(1.0, 1.0)),
        div_beta: constant(0.0),
        c: constant(0.0),
        f,
        g: u.clone(),
        g_breakpoints: Vec::new(),
        exact: Some(ExactSolution { u, grad, laplacian }),
        layer_width: Some(eps),
    })
}

/// Internal layer of width `α` along `x = 1/2`; `β = (0, 1)`, `c = 1`.
///
/// `u = ½ (1 − tanh((½ − x)/α))`.
pub fn make_example2(alpha: f64, eps: f64) -> Result<ProblemSpec> {
    check_eps(eps)?;
    if !(alpha > 0.0) {
        return invalid(format!("layer width alpha must be positive, got {alpha}"));
    }
    let th = move |x: Point| ((0.5 - x.x) / alpha).tanh();
    let u: ScalarFn = Arc::new(move |x: Point| 0.5 * (1.0 - th(x)));
    let grad: VectorFn = Arc::new(move |x: Point| {
        let t = th(x);
        Vec2::new(0.5 * (1.0 - t * t) / alpha, 0.0)
    });
    let laplacian: ScalarFn = Arc::new(move |x: Point| {
        let t = th(x);
        t * (1.0 - t * t) / (alpha * alpha)
    });
    let f: ScalarFn = Arc::new(move |x: Point| {
        let t = th(x);
        -eps * t * (1.0 - t * t) / (alpha * alpha) + 0.5 * (1.0 - t)
    });
    Ok(ProblemSpec {
        name: "example2".into(),
        eps,
        beta: constant_vector(Vec2::new(0.0, 1.0)),
        div_beta: constant(0.0),
        c: constant(1.0),
        f,
        g: u.clone(),
        g_breakpoints: Vec::new(),
        exact: Some(ExactSolution { u, grad, laplacian }),
        layer_width: Some(alpha),
    })
}

/// Interior and outflow layers from discontinuous inflow data;
/// `β = (1/2, √3/2)`, `c = 0`, `f = 0`, no exact solution.
///
/// `g = 1` on `{y = 0}` and on `{x = 0, y ≤ 1/5}`, `g = 0` elsewhere.
pub fn make_example3(eps: f64) -> Result<ProblemSpec> {
    check_eps(eps)?;
    let g: ScalarFn = Arc::new(|x: Point| {
        let tol = 1e-12;
        if x.y.abs() <= tol || (x.x.abs() <= tol && x.y <= 0.2) {
            1.0
        } else {
            0.0
        }
    });
    Ok(ProblemSpec {
        name: "example3".into(),
        eps,
        beta: constant_vector(Vec2::new(0.5, 3f64.sqrt() / 2.0)),
        div_beta: constant(0.0),
        c: constant(0.0),
        f: constant(0.0),
        g,
        g_breakpoints: vec![Point::new(0.0, 0.2)],
        exact: None,
        layer_width: Some(eps),
    })
}

/// A polynomial `Σ c_ab x^a y^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<((i32, i32), f64)>,
}

impl Polynomial {
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|((a, b), _)| (a + b) as usize).max().unwrap_or(0)
    }

    /// `(x + y)^p` expanded.
    pub fn binomial(p: usize) -> Self {
        let p = p as i32;
        let mut coef = 1.0;
        let mut terms = Vec::new();
        for k in 0..=p {
            terms.push(((p - k, k), coef));
            coef = coef * f64::from(p - k) / f64::from(k + 1);
        }
        Polynomial { terms }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms.iter().map(|&((a, b), c)| c * x.x.powi(a) * x.y.powi(b)).sum()
    }

    pub fn gradient(&self, x: Point) -> Vec2 {
        self.terms.iter().fold(Vec2::zeros(), |acc, &((a, b), c)| {
            let dx = if a > 0 { c * f64::from(a) * x.x.powi(a - 1) * x.y.powi(b) } else { 0.0 };
            let dy = if b > 0 { c * f64::from(b) * x.x.powi(a) * x.y.powi(b - 1) } else { 0.0 };
            acc + Vec2::new(dx, dy)
        })
    }

    pub fn laplacian(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|&((a, b), c)| {
                let dxx = if a > 1 { f64::from(a * (a - 1)) * x.x.powi(a - 2) * x.y.powi(b) } else { 0.0 };
                let dyy = if b > 1 { f64::from(b * (b - 1)) * x.x.powi(a) * x.y.powi(b - 2) } else { 0.0 };
                c * (dxx + dyy)
            })
            .sum()
    }
}

/// Manufactured problem with exact solution `u`, constant `β` and `c`.
pub fn make_manufactured(u: Polynomial, eps: f64, beta: Vec2, c: f64) -> Result<ProblemSpec> {
    check_eps(eps)?;
    let u = Arc::new(u);
    let (uu, ug, ul, uf) = (u.clone(), u.clone(), u.clone(), u);
    let value: ScalarFn = Arc::new(move |x| uu.eval(x));
    let f: ScalarFn = Arc::new(move |x| -eps * uf.laplacian(x) + beta.dot(&uf.gradient(x)) + c * uf.eval(x));
    Ok(ProblemSpec {
        name: "poly".into(),
        eps,
        beta: constant_vector(beta),
        div_beta: constant(0.0),
        c: constant(c),
        f,
        g: value.clone(),
        g_breakpoints: Vec::new(),
        exact: Some(ExactSolution {
            u: value,
            grad: Arc::new(move |x| ug.gradient(x)),
            laplacian: Arc::new(move |x| ul.laplacian(x)),
        }),
        layer_width: None,
    })
}

/// Manufactured problem with exact solution `(x + y)^p`.
pub fn make_manufactured_poly(p: usize, eps: f64, beta: Vec2, c: f64) -> Result<ProblemSpec> {
    if p > 3 {
        return invalid(format!("manufactured polynomial degree {p} exceeds 3"));
    }
    make_manufactured(Polynomial::binomial(p), eps, beta, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn samples(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point::new(rng.random(), rng.random())).collect()
    }

    fn assert_residual_identity(problem: &ProblemSpec) {
        for x in samples(1000, 11) {
            let r = problem.pde_residual(x).unwrap();
            let scale = (problem.f)(x).abs().max(1.0);
            assert!(r.abs() <= 1e-8 * scale, "{}: residual {r} at {x:?}", problem.name);
        }
    }

    /// Finite-difference check of the hand-coded derivatives.
    fn assert_derivatives(problem: &ProblemSpec, h: f64, tol: f64) {
        let ex = problem.exact.as_ref().unwrap();
        for x in samples(50, 3) {
            let x = Point::new(0.05 + 0.9 * x.x, 0.05 + 0.9 * x.y);
            let dx = Vec2::new(h, 0.0);
            let dy = Vec2::new(0.0, h);
            let u = |p: Point| (ex.u)(p);
            let fd = Vec2::new((u(x + dx) - u(x - dx)) / (2.0 * h), (u(x + dy) - u(x - dy)) / (2.0 * h));
            let lap = (u(x + dx) + u(x - dx) + u(x + dy) + u(x - dy) - 4.0 * u(x)) / (h * h);
            let g = (ex.grad)(x);
            assert!((fd - g).norm() <= tol * g.norm().max(1.0), "gradient at {x:?}");
            let l = (ex.laplacian)(x);
            assert!((lap - l).abs() <= tol * l.abs().max(1.0), "laplacian at {x:?}: {lap} vs {l}");
        }
    }

    #[test]
    fn example1_values() {
        for eps in [1.0, 0.1, 1e-3, 1e-6] {
            let p = make_example1(eps).unwrap();
            let ex = p.exact.as_ref().unwrap();
            for y in [0.0, 0.3, 0.99, 1.0] {
                assert!((ex.u)(Point::new(1.0, y)).abs() < 1e-14);
                assert!((ex.u)(Point::new(y, 1.0)).abs() < 1e-14);
            }
            assert_residual_identity(&p);
            assert!(p.min_reaction_margin(&samples(100, 1)) >= 0.0);
        }
        let p = make_example1(1e-6).unwrap();
        let u = (p.exact.as_ref().unwrap().u)(Point::new(0.5, 0.5));
        assert!((u - 0.75).abs() < 1e-10);
        assert!(make_example1(0.0).is_err());
        assert!(make_example1(-1.0).is_err());
    }

    #[test]
    fn example1_boundary_data_matches_solution() {
        let p = make_example1(1e-3).unwrap();
        let ex = p.exact.as_ref().unwrap();
        for s in [0.0, 0.1, 0.5, 0.77, 1.0] {
            for x in [Point::new(s, 0.0), Point::new(s, 1.0), Point::new(0.0, s), Point::new(1.0, s)] {
                assert_eq!((p.g)(x), (ex.u)(x));
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        assert_derivatives(&make_example1(0.2).unwrap(), 1e-4, 1e-5);
        assert_derivatives(&make_example2(0.1, 1e-3).unwrap(), 1e-4, 1e-5);
        let beta = Vec2::new(0.7, -0.3);
        assert_derivatives(&make_manufactured_poly(3, 1e-2, beta, 2.0).unwrap(), 1e-4, 1e-6);
    }

    #[test]
    fn example2_values() {
        let p = make_example2(1e-3, 1e-5).unwrap();
        let ex = p.exact.as_ref().unwrap();
        assert!(((ex.u)(Point::new(0.5, 0.3)) - 0.5).abs() < 1e-15);
        assert!((ex.u)(Point::new(0.0, 0.7)).abs() < 1e-15);
        for x in samples(100, 5) {
            assert_eq!((ex.grad)(x).y, 0.0);
        }
        assert_residual_identity(&p);
        assert_residual_identity(&make_example2(1e-4, 1e-6).unwrap());
        assert!(make_example2(0.0, 1e-3).is_err());
        assert!(make_example2(1e-3, 0.0).is_err());
    }

    #[test]
    fn example3_data() {
        let p = make_example3(1e-4).unwrap();
        assert_eq!((p.g)(Point::new(0.5, 0.0)), 1.0);
        assert_eq!((p.g)(Point::new(0.0, 0.1)), 1.0);
        assert_eq!((p.g)(Point::new(0.0, 0.3)), 0.0);
        assert_eq!((p.g)(Point::new(1.0, 0.5)), 0.0);
        assert_eq!((p.g)(Point::new(0.4, 1.0)), 0.0);
        for x in samples(100, 9) {
            assert_eq!((p.f)(x), 0.0);
        }
        assert!(p.exact.is_none());
        assert!(make_example3(2.0).is_err());
    }

    #[test]
    fn manufactured_source_terms() {
        let beta = Vec2::new(1.0, 1.0);
        let p = make_manufactured_poly(1, 0.3, beta, 1.0).unwrap();
        for x in samples(20, 2) {
            assert!(((p.f)(x) - (2.0 + x.x + x.y)).abs() < 1e-14);
            assert!((p.exact_flux(x).unwrap() - Vec2::new(-0.3, -0.3)).norm() < 1e-15);
        }
        let eps = 0.01;
        let (b1, c) = (0.8, 2.0);
        let u = Polynomial { terms: vec![((2, 0), 1.0)] };
        let p = make_manufactured(u, eps, Vec2::new(b1, -0.4), c).unwrap();
        for x in samples(20, 4) {
            let expected = -2.0 * eps + 2.0 * x.x * b1 + c * x.x * x.x;
            assert!(((p.f)(x) - expected).abs() < 1e-14);
        }
        for deg in 0..=3 {
            let p = make_manufactured_poly(deg, 1e-6, Vec2::new(0.3, 1.0), 0.5).unwrap();
            for x in samples(50, 8) {
                assert!(p.pde_residual(x).unwrap().abs() <= 1e-12);
            }
        }
        assert!(make_manufactured_poly(4, 1.0, beta, 1.0).is_err());
    }

    #[test]
    fn binomial_expansion() {
        let b = Polynomial::binomial(3);
        let x = Point::new(0.3, 0.45);
        assert!((b.eval(x) - 0.75f64.powi(3)).abs() < 1e-15);
        assert_eq!(b.degree(), 3);
    }
}
