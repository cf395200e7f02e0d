//! Acceptance checks P1–P9, one `PASS`/`FAIL` line each.
//!
//! The process exits with status 0 after printing every verdict so that a
//! known failure does not hide the remaining results; set
//! `HDG_ACCEPTANCE_STRICT=1` to turn any failure into a nonzero exit status.

use std::time::Instant;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hdg_adapt::adapt::{adaptive_loop_with, bulk_satisfied, dorfler_mark, AdaptiveRun, IterationView, LoopParams, StopReason};
use hdg_adapt::cli::{loglog_slope, ProblemName, RunConfig};
use hdg_adapt::estimator::{element_terms, error_norms, estimate, face_term, simple_error_norm, FieldValue, FnField};
use hdg_adapt::fem::{element_rule, face_rule, ReferenceTables};
use hdg_adapt::hdg::{self, monolithic::solve_monolithic, HdgParams, HdgSolution};
use hdg_adapt::mesh::{Diagonal, Mesh};
use hdg_adapt::problems::{make_example1, make_example2, make_example3, make_manufactured_poly, ProblemSpec};
use hdg_adapt::{Point, Vec2};

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { id, pass, detail: detail.into() }
}

fn unit(n: usize) -> Mesh {
    Mesh::structured_unit_square(n, Diagonal::Forward).expect("structured mesh")
}

fn refine_all(mesh: &Mesh) -> Mesh {
    let all: Vec<usize> = (0..mesh.n_elements()).collect();
    mesh.refine(&all).expect("uniform refinement")
}

/// Adaptive run with conservation checks, reporting the largest defect.
fn adaptive(
    problem: &ProblemSpec,
    mesh: Mesh,
    p: usize,
    max_dofs: usize,
    max_iters: usize,
    observer: impl FnMut(&IterationView<'_>),
) -> AdaptiveRun {
    let mut params = LoopParams::new(p).expect("loop parameters");
    params.max_dofs = max_dofs;
    params.max_iters = max_iters;
    params.check_conservation = true;
    adaptive_loop_with(problem, mesh, &params, observer).expect("adaptive loop")
}

fn max_defect(run: &AdaptiveRun) -> f64 {
    run.records.iter().filter_map(|r| r.conservation).fold(0.0, f64::max)
}

/// Bulk criterion recomputed from scratch, plus minimality of the greedy set.
fn check_marking(indicators: &[f64], marked: &[usize], theta: f64) -> Result<(), String> {
    let total: f64 = indicators.iter().sum();
    let chosen: f64 = marked.iter().map(|&i| indicators[i]).sum();
    if total > 0.0 && chosen < theta * total {
        return Err(format!("marked {chosen:e} < {theta} x {total:e}"));
    }
    if let Some(&drop) = marked.iter().min_by(|&&a, &&b| indicators[a].total_cmp(&indicators[b])) {
        if chosen - indicators[drop] >= theta * total && marked.len() > 1 {
            return Err("marked set is not minimal".into());
        }
    }
    if marked.windows(2).any(|w| w[0] >= w[1]) {
        return Err("marked ids not strictly ascending".into());
    }
    Ok(())
}

fn last_decade_slope(run: &AdaptiveRun) -> Option<f64> {
    let last = run.records.last()?.n_dofs as f64;
    let (x, y): (Vec<f64>, Vec<f64>) =
        run.records.iter().filter(|r| r.n_dofs as f64 >= last / 10.0).map(|r| (r.n_dofs as f64, r.eta)).unzip();
    (x.len() >= 4).then(|| loglog_slope(&x, &y).ok()).flatten()
}

fn p1() -> Verdict {
    let start = Instant::now();
    let mesh = refine_all(&unit(2));
    let mut worst: (f64, f64) = (0.0, 0.0);
    let mut failures = Vec::new();
    for p in 1..=3 {
        let tables = ReferenceTables::with_default_quadrature(p).unwrap();
        for eps in [1.0, 1e-3, 1e-6] {
            let problem = make_manufactured_poly(p, eps, Vec2::new(1.0, 1.0), 1.0).unwrap();
            let (sol, _) = hdg::solve(&mesh, &problem, &tables, &HdgParams::new(p, 1.0).unwrap()).unwrap();
            let (err_h, _) = error_norms(&mesh, &problem, &tables, &sol).unwrap();
            let ex = problem.exact.clone().unwrap();
            let exact = FnField(move |x: Point| FieldValue {
                p: -(ex.grad)(x) * eps,
                div_p: -eps * (ex.laplacian)(x),
                w: (ex.u)(x),
                grad_w: (ex.grad)(x),
            });
            let rel = err_h / simple_error_norm(&mesh, &problem, &tables, &exact).unwrap();
            let eta = estimate(&mesh, &problem, &tables, &sol).unwrap().eta;
            worst = (worst.0.max(rel), worst.1.max(eta));
            if !(rel <= 1e-8 && eta <= 1e-8) {
                failures.push(format!("p={p} eps={eps:e}: rel err {rel:.2e}, eta {eta:.2e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 10.0;
    verdict("P1", pass, format!("max rel err_h {:.2e}, max eta {:.2e}, {secs:.2} s {}", worst.0, worst.1, failures.join("; ")))
}

fn max_coefficient_gap(a: &HdgSolution, b: &HdgSolution) -> f64 {
    let pairs = a.q.iter().flatten().zip(b.q.iter().flatten()).chain(a.u.iter().flatten().zip(b.u.iter().flatten())).chain(a.uhat.iter().zip(&b.uhat));
    pairs.map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0)).fold(0.0, f64::max)
}

fn p2() -> Verdict {
    let start = Instant::now();
    let problems = [make_example1(1e-2).unwrap(), make_example1(1e-5).unwrap(), make_example2(1e-2, 1e-2).unwrap(), make_example2(1e-3, 1e-5).unwrap()];
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=4 {
        for diag in [Diagonal::Forward, Diagonal::Backward] {
            let mesh = Mesh::structured_unit_square(n, diag).unwrap();
            assert!(mesh.n_elements() <= 32);
            for p in 1..=2 {
                let tables = ReferenceTables::with_default_quadrature(p).unwrap();
                for problem in &problems {
                    let (cond, _) = hdg::solve(&mesh, problem, &tables, &HdgParams::new(p, 1.0).unwrap()).unwrap();
                    let mono = solve_monolithic(&mesh, problem, &tables, 1.0).unwrap();
                    worst = worst.max(max_coefficient_gap(&cond, &mono));
                    cases += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict("P2", worst <= 1e-10 && secs < 30.0, format!("{cases} cases, max coefficient gap {worst:.2e}, {secs:.2} s"))
}

/// Runs shared by P3–P6 and P9.
struct Benchmarks {
    /// Example 1, eps = 1e-5, p = 1, 2, 3 up to 1e5 DOFs
    convergence: Vec<AdaptiveRun>,
    /// Example 1, p = 1, eps = 1e-4 and 1e-6 (1e-5 is `convergence[0]`)
    effectivity: Vec<(f64, AdaptiveRun)>,
    marking_errors: Vec<String>,
    marking_checks: usize,
}

fn benchmarks() -> Benchmarks {
    let mut marking_errors = Vec::new();
    let mut marking_checks = 0;
    let mut observe = |v: &IterationView<'_>| {
        if let Some((faces, elements)) = v.marked {
            for (ind, marked, what) in [(&v.report.face, faces, "faces"), (&v.report.element, elements, "elements")] {
                marking_checks += 1;
                if let Err(e) = check_marking(ind, marked, 0.5) {
                    marking_errors.push(format!("iter {} {what}: {e}", v.record.iter));
                }
            }
        }
    };
    let e1 = make_example1(1e-5).unwrap();
    let convergence: Vec<AdaptiveRun> = (1..=3).map(|p| adaptive(&e1, unit(20), p, 100_000, 60, &mut observe)).collect();
    let mut effectivity = Vec::new();
    for eps in [1e-4, 1e-6] {
        let problem = make_example1(eps).unwrap();
        effectivity.push((eps, adaptive(&problem, unit(20), 1, 100_000, 60, &mut observe)));
    }
    Benchmarks { convergence, effectivity, marking_errors, marking_checks }
}

fn p4(b: &Benchmarks) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, run) in (1..=3).zip(&b.convergence) {
        let slope = last_decade_slope(run);
        let ok = match (p, slope) {
            (1, Some(s)) => (s + 0.5).abs() <= 0.15,
            (2, Some(s)) => (s + 1.0).abs() <= 0.15,
            (3, Some(s)) => s <= -0.85,
            _ => false,
        };
        pass &= ok;
        let n = run.records.last().map_or(0, |r| r.n_dofs);
        parts.push(format!("p={p}: N={n} slope {}", slope.map_or("n/a".into(), |s| format!("{s:.3}"))));
    }
    verdict("P4", pass, parts.join(", "))
}

fn p5(b: &Benchmarks) -> Verdict {
    let mut ratios = Vec::new();
    let runs = std::iter::once((1e-5, &b.convergence[0])).chain(b.effectivity.iter().map(|(e, r)| (*e, r)));
    let mut all = Vec::new();
    for (eps, run) in runs {
        let eff: Vec<f64> = run.records.iter().filter(|r| r.iter >= 5).filter_map(|r| Some(r.eta / r.err_energy?)).collect();
        let (lo, hi) = eff.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        ratios.push(format!("eps={eps:e}: [{lo:.3}, {hi:.3}]"));
        all.extend(eff);
    }
    let (lo, hi) = all.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    let pass = !all.is_empty() && lo > 0.0 && hi / lo <= 10.0;
    verdict("P5", pass, format!("max/min {:.3} ({})", hi / lo, ratios.join(", ")))
}

fn p6(b: &Benchmarks, extra_errors: &[String], extra_checks: usize) -> Verdict {
    let small = dorfler_mark(&[16.0, 9.0, 4.0, 1.0], 0.5).unwrap();
    let small_ok = small == vec![0] && bulk_satisfied(&[16.0, 9.0, 4.0, 1.0], &small, 0.5);
    let errors: Vec<&String> = b.marking_errors.iter().chain(extra_errors).collect();
    let pass = small_ok && errors.is_empty();
    let detail = format!("{} marking steps re-verified, {{16,9,4,1}} -> {small:?}", b.marking_checks + extra_checks);
    let detail = if errors.is_empty() { detail } else { format!("{detail}; {}", errors.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")) };
    verdict("P6", pass, detail)
}

struct Example3Result {
    verdict: Verdict,
    defect: f64,
    marking_errors: Vec<String>,
    marking_checks: usize,
}

fn p7() -> Example3Result {
    let cfg = RunConfig { eps: 1e-4, ..RunConfig::defaults(ProblemName::Example3) };
    let problem = make_example3(1e-4).unwrap();
    let initial = cfg.initial_mesh().unwrap();
    let reference = refine_all(&refine_all(&initial)).min_angle();
    let mut issues = Vec::new();
    let mut min_seen = f64::INFINITY;
    let mut marking_errors = Vec::new();
    let mut marking_checks = 0;
    let run = adaptive(&problem, initial, 1, 2_000_000, 25, |v| {
        let report = v.mesh.conformity_check();
        if !report.passed() {
            issues.push(format!("iter {}: {report}", v.record.iter));
        }
        min_seen = min_seen.min(v.mesh.min_angle());
        if let Some((faces, elements)) = v.marked {
            for (ind, marked) in [(&v.report.face, faces), (&v.report.element, elements)] {
                marking_checks += 1;
                if let Err(e) = check_marking(ind, marked, 0.5) {
                    marking_errors.push(format!("example 3 iter {}: {e}", v.record.iter));
                }
            }
        }
    });
    let refinements = run.records.len().saturating_sub(1);
    let pass = refinements == 25 && run.stop == StopReason::MaxIterations && issues.is_empty() && min_seen >= reference - 1e-12;
    let detail = format!(
        "{refinements} refinements, {} elements, min angle {:.4} deg (generation-2 value {:.4} deg){}",
        run.mesh.n_elements(),
        min_seen.to_degrees(),
        reference.to_degrees(),
        if issues.is_empty() { String::new() } else { format!("; {}", issues.join("; ")) }
    );
    Example3Result { verdict: verdict("P7", pass, detail), defect: max_defect(&run), marking_errors, marking_checks }
}

/// Straight-loop reimplementation of the indicators: its own geometry, a
/// split-element quadrature and physical-to-reference point location.
mod oracle {
    use super::*;

    pub struct Geometry {
        pub origin: Point,
        pub jac: Matrix2<f64>,
        pub inv: Matrix2<f64>,
        pub det: f64,
    }

    pub fn geometry(mesh: &Mesh, t: usize) -> Geometry {
        let [a, b, c] = mesh.element_points(t);
        let jac = Matrix2::new(b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y);
        Geometry { origin: a, jac, inv: jac.try_inverse().unwrap(), det: jac.determinant() }
    }

    pub struct Fields {
        pub u: f64,
        pub grad_u: Vec2,
        pub q: Vec2,
        pub div_q: f64,
    }

    pub fn fields(tables: &ReferenceTables, sol: &HdgSolution, g: &Geometry, t: usize, x: Point) -> Fields {
        let r = g.inv * (x - g.origin);
        let xi = [r.x, r.y];
        let v = tables.basis.values(&xi);
        let d = tables.basis.gradients(&xi);
        let nb = v.len();
        let phys = |i: usize| g.inv.transpose() * Vec2::new(d[i][0], d[i][1]);
        let mut f = Fields { u: 0.0, grad_u: Vec2::zeros(), q: Vec2::zeros(), div_q: 0.0 };
        for i in 0..nb {
            let (cu, c1, c2) = (sol.u[t][i], sol.q[t][i], sol.q[t][nb + i]);
            let gi = phys(i);
            f.u += cu * v[i];
            f.grad_u += gi * cu;
            f.q += Vec2::new(c1 * v[i], c2 * v[i]);
            f.div_q += c1 * gi.x + c2 * gi.y;
        }
        f
    }

    /// Quadrature on element `t` after splitting the reference triangle into four.
    pub fn element_points(mesh: &Mesh, t: usize, degree: usize) -> Vec<(Point, f64)> {
        let g = geometry(mesh, t);
        let rule = element_rule(degree).unwrap();
        let subs = [
            ([0.0, 0.0], [0.5, 0.0], [0.0, 0.5]),
            ([0.5, 0.0], [1.0, 0.0], [0.5, 0.5]),
            ([0.0, 0.5], [0.5, 0.5], [0.0, 1.0]),
            ([0.5, 0.5], [0.0, 0.5], [0.5, 0.0]),
        ];
        let mut out = Vec::new();
        for (a, b, c) in subs {
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let xi = [a[0] + (b[0] - a[0]) * p[0] + (c[0] - a[0]) * p[1], a[1] + (b[1] - a[1]) * p[0] + (c[1] - a[1]) * p[1]];
                let x = g.origin + g.jac * Vec2::new(xi[0], xi[1]);
                out.push((x, w * 0.25 * g.det));
            }
        }
        out
    }

    pub fn diameter(mesh: &Mesh, t: usize) -> f64 {
        let p = mesh.element_points(t);
        (0..3).map(|k| (p[(k + 1) % 3] - p[k]).norm()).fold(0.0, f64::max)
    }

    /// `(η_T², osc²)`
    pub fn element(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, sol: &HdgSolution, t: usize) -> (f64, f64) {
        let eps = problem.eps;
        let g = geometry(mesh, t);
        let a = (diameter(mesh, t) / eps.sqrt()).min(1.0);
        let pts = element_points(mesh, t, 4 * tables.p + 2);
        let resid = |x: Point, f: &Fields| (problem.f)(x) - f.div_q - (problem.beta)(x).dot(&f.grad_u) - (problem.c)(x) * f.u;
        let (mut r2, mut flux2) = (0.0, 0.0);
        let nb = tables.element_dim();
        let mut proj = vec![0.0; nb];
        for &(x, w) in &pts {
            let f = fields(tables, sol, &g, t, x);
            let r = resid(x, &f);
            r2 += w * r * r;
            flux2 += w * (f.q + f.grad_u * eps).norm_squared();
            let r_ref = g.inv * (x - g.origin);
            for (c, phi) in proj.iter_mut().zip(tables.basis.values(&[r_ref.x, r_ref.y])) {
                *c += w * r * phi / g.det;
            }
        }
        let mut osc = 0.0;
        for &(x, w) in &pts {
            let f = fields(tables, sol, &g, t, x);
            let r_ref = g.inv * (x - g.origin);
            let pr: f64 = proj.iter().zip(tables.basis.values(&[r_ref.x, r_ref.y])).map(|(c, v)| c * v).sum();
            let d = resid(x, &f) - pr;
            osc += w * d * d;
        }
        (a * a * r2 + flux2 / eps, a * a * osc)
    }

    pub fn face(mesh: &Mesh, problem: &ProblemSpec, tables: &ReferenceTables, sol: &HdgSolution, f: usize) -> f64 {
        let eps = problem.eps;
        let face = mesh.face(f);
        let [a, b] = mesh.face_points(f);
        let h = (b - a).norm();
        let beta = (problem.beta)(Point::from((a.coords + b.coords) * 0.5)).norm();
        let af = (h / eps.sqrt()).min(1.0);
        let gamma = (eps / h + (h / eps + af / eps.sqrt()) * beta + h).min((eps + beta) / h + h);
        let tangent = (b - a) / h;
        let mut n = Vec2::new(tangent.y, -tangent.x);
        let left = geometry(mesh, face.left);
        let centroid = mesh.element_points(face.left).iter().fold(Vec2::zeros(), |s, p| s + p.coords) / 3.0;
        if n.dot(&(a.coords - centroid)) < 0.0 {
            n = -n;
        }
        let rule = face_rule(4 * tables.p + 2).unwrap();
        let mut sum = 0.0;
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            let x = a + (b - a) * *s;
            let fl = fields(tables, sol, &left, face.left, x);
            match face.right {
                Some(r) => {
                    let fr = fields(tables, sol, &geometry(mesh, r), r, x);
                    let jq = (fl.q - fr.q).dot(&n);
                    let ju = fl.u - fr.u;
                    sum += w * h * (af / eps.sqrt() * jq * jq + gamma * ju * ju);
                }
                None => {
                    let d = fl.u - (problem.g)(x);
                    sum += w * h * gamma * d * d;
                }
            }
        }
        sum
    }
}

fn p8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20261014);
    let mut mesh = unit(3);
    for k in 0..4 {
        mesh = mesh.refine(&[k, mesh.n_elements() / 2, mesh.n_elements() - 1]).unwrap();
    }
    let mut worst = 0.0f64;
    let mut entries = 0;
    for p in 1..=3 {
        let tables = ReferenceTables::with_default_quadrature(p).unwrap();
        let nb = tables.element_dim();
        for eps in [1.0, 1e-2, 1e-5] {
            let problem = make_manufactured_poly(p, eps, Vec2::new(0.8, -0.6), 0.7).unwrap();
            for _ in 0..3 {
                let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
                let sol = HdgSolution {
                    p,
                    q: (0..mesh.n_elements()).map(|_| draw(2 * nb)).collect(),
                    u: (0..mesh.n_elements()).map(|_| draw(nb)).collect(),
                    uhat: draw((p + 1) * mesh.n_faces()),
                    taus: vec![[1.0; 3]; mesh.n_elements()],
                };
                let mut pairs = Vec::new();
                for t in 0..mesh.n_elements() {
                    let (_, eta, osc) = element_terms(&mesh, &problem, &tables, &sol, t).unwrap();
                    let (oe, oo) = oracle::element(&mesh, &problem, &tables, &sol, t);
                    pairs.push((eta, oe));
                    pairs.push((osc, oo));
                }
                for f in 0..mesh.n_faces() {
                    pairs.push((face_term(&mesh, &problem, &tables, &sol, f).unwrap(), oracle::face(&mesh, &problem, &tables, &sol, f)));
                }
                let scale = pairs.iter().fold(0.0f64, |m, (_, b)| m.max(b.abs()));
                for (a, b) in pairs {
                    worst = worst.max((a - b).abs() / b.abs().max(1e-6 * scale));
                    entries += 1;
                }
            }
        }
    }
    verdict("P8", worst <= 1e-12, format!("{entries} indicator entries, max relative gap {worst:.2e}"))
}

fn near_fraction(mesh: &Mesh, near: impl Fn(Point) -> bool) -> f64 {
    let hits = (0..mesh.n_elements()).filter(|&t| near(mesh.element_geometry(t).unwrap().centroid)).count();
    hits as f64 / mesh.n_elements() as f64
}

fn p9() -> (Verdict, f64) {
    let e1 = make_example1(1e-4).unwrap();
    let run1 = adaptive(&e1, unit(20), 2, 2_000_000, 20, |_| {});
    let f1 = near_fraction(&run1.mesh, |x| (1.0 - x.x).min(1.0 - x.y) <= 0.1);
    let e2 = make_example2(1e-3, 1e-5).unwrap();
    let run2 = adaptive(&e2, unit(8), 2, 2_000_000, 32, |_| {});
    let f2 = near_fraction(&run2.mesh, |x| (x.x - 0.5).abs() <= 0.05);
    let pass = run1.records.len() == 21 && run2.records.len() == 33 && f1 > 0.5 && f2 > 0.5;
    let detail = format!(
        "example 1: {:.1}% of {} elements near the outflow edges; example 2: {:.1}% of {} elements near x = 0.5",
        100.0 * f1,
        run1.mesh.n_elements(),
        100.0 * f2,
        run2.mesh.n_elements()
    );
    (verdict("P9", pass, detail), max_defect(&run1).max(max_defect(&run2)))
}

fn main() {
    let start = Instant::now();
    let mut verdicts = vec![p1(), p2()];
    let bench = benchmarks();
    let ex3 = p7();
    let (v9, defect9) = p9();
    let defect = bench.convergence.iter().chain(bench.effectivity.iter().map(|(_, r)| r)).map(max_defect).fold(ex3.defect.max(defect9), f64::max);
    verdicts.push(verdict("P3", defect <= 1e-10, format!("max interior-face flux defect {defect:.2e} over all benchmark solves")));
    verdicts.push(p4(&bench));
    verdicts.push(p5(&bench));
    verdicts.push(p6(&bench, &ex3.marking_errors, ex3.marking_checks));
    verdicts.push(ex3.verdict);
    verdicts.push(p8());
    verdicts.push(v9);
    verdicts.sort_by_key(|v| v.id);

    for v in &verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.id, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {}/{} passed in {:.1} s", verdicts.len() - failed, verdicts.len(), start.elapsed().as_secs_f64());
    if failed > 0 && std::env::var_os("HDG_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
