//! Checks shared by the property tests and the acceptance report. Each
//! returns the measured quantity so callers decide how to report it.

#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use koiter_dpg::assembly::{assemble, element_gram, point_location, ElementSystem};
use koiter_dpg::estimator::{estimate, solve};
use koiter_dpg::mesh::{initial_rectangle_mesh, refine, Mesh, Rect};
use koiter_dpg::shell::{apply_c, apply_cinv, BcTable, Load, ShellProblem, SideBc};
use koiter_dpg::tensor::{Mat2, Vec2};
use koiter_dpg::testspace::{ElementTests, P3_DIM, TEST_DIM, V_OFFSET, Z_OFFSET};
use koiter_dpg::traces::{DofMap, TraceOptions};
use koiter_dpg::Benchmark;

/// Four triangles of a rectangle meeting at an arbitrary interior point.
pub fn fan_mesh(rect: Rect, center: Vec2) -> Mesh {
    let vertices = vec![
        [rect.x0, rect.y0],
        [rect.x1, rect.y0],
        [rect.x1, rect.y1],
        [rect.x0, rect.y1],
        center,
    ];
    Mesh::from_parts(rect, vertices, vec![[4, 0, 1], [4, 1, 2], [4, 2, 3], [4, 3, 0]]).unwrap()
}

/// The unit square split along one diagonal.
pub fn two_element_mesh() -> Mesh {
    let rect = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    Mesh::from_parts(rect, vertices, vec![[0, 1, 2], [2, 3, 0]]).unwrap()
}

pub fn custom(rect: Rect, b: Mat2, d: f64, load: Load, bc: SideBc) -> ShellProblem {
    ShellProblem::custom(rect, b, d, 0.3, load, BcTable::uniform(bc)).unwrap()
}

pub fn max_abs(m: &Mat<f64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

/// Smallest eigenvalue of the diagonally equilibrated Gram matrix (a
/// congruence of the Gram matrix) and the relative asymmetry, over the
/// four triangles of a fan mesh.
pub fn gram_spectrum(w: f64, h: f64, center: Vec2, b: Mat2, d: f64) -> (f64, f64) {
    let rect = Rect::new(0.0, w, 0.0, h).unwrap();
    let mesh = fan_mesh(rect, [center[0] * w, center[1] * h]);
    let problem = custom(rect, b, d, Load::Constant { f: 1.0, p: [0.0, 0.0] }, SideBc::CLAMPED);
    let mut lmin = f64::INFINITY;
    let mut asym = 0.0f64;
    for t in 0..mesh.num_triangles() {
        let el = ElementTests::new(&mesh, t).unwrap();
        let g = element_gram(&el, &problem);
        let s: Vec<f64> = (0..TEST_DIM).map(|i| 1.0 / g[(i, i)].sqrt()).collect();
        let scaled = Mat::<f64>::from_fn(TEST_DIM, TEST_DIM, |i, j| s[i] * g[(i, j)] * s[j]);
        for i in 0..TEST_DIM {
            for j in 0..i {
                asym = asym.max((scaled[(i, j)] - scaled[(j, i)]).abs());
            }
        }
        let eig = scaled.self_adjoint_eigenvalues(Side::Lower).unwrap();
        lmin = eig.into_iter().fold(lmin, f64::min);
    }
    (lmin, asym)
}

/// L2 coefficients of a scalar function in the orthonormal P3 test basis.
fn scalar_coefficients(el: &ElementTests, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
    (0..P3_DIM)
        .map(|i| {
            el.jets
                .iter()
                .zip(&el.weights)
                .zip(&el.points)
                .map(|((jets, w), x)| w * f(*x) * jets[i].value)
                .sum()
        })
        .collect()
}

/// `sum_T c_T^T B_T` for the test coefficients produced by `tests`, indexed
/// by global dof.
fn global_pairing(
    mesh: &Mesh,
    problem: &ShellProblem,
    dofmap: &DofMap,
    tests: impl Fn(&ElementTests) -> Vec<f64>,
) -> Vec<f64> {
    let mut out = vec![0.0; dofmap.total()];
    for t in 0..mesh.num_triangles() {
        let el = ElementTests::new(mesh, t).unwrap();
        let c = tests(&el);
        let sys = ElementSystem::new(mesh, problem, dofmap, t, None).unwrap();
        for (local, global) in dofmap.element_dofs(mesh, t).into_iter().enumerate() {
            out[global] += (0..TEST_DIM).map(|i| c[i] * sys.b[(i, local)]).sum::<f64>();
        }
    }
    out
}

/// Pairs the membrane trace with a globally continuous cubic `v` and the
/// moment trace (with corner functionals) with a globally smooth cubic `z`.
/// Returns the largest interior-edge pairing divided by the edge length and
/// the largest boundary-edge pairing, which must not vanish.
pub fn trace_conformity(k: usize) -> (f64, f64) {
    let rect = Rect::new(-1.0, 2.0, 0.0, 1.5).unwrap();
    let mut mesh = initial_rectangle_mesh(rect).unwrap();
    mesh = refine(&mesh, &[0, 2]).unwrap();
    mesh = refine(&mesh, &[1, 5]).unwrap();
    let problem = custom(rect, [[0.5, 0.1], [0.1, -0.3]], 0.1, Load::Constant { f: 0.0, p: [0.0, 0.0] }, SideBc::FREE);
    let dofmap = DofMap::new(&mesh, TraceOptions::new(k).unwrap(), &problem.bc).unwrap();
    let v = |x: Vec2| 0.3 + x[0] - 2.0 * x[1] * x[0] + x[0] * x[0] * x[1] - 0.5 * x[1].powi(3);
    let z = |x: Vec2| 1.0 - x[0] * x[1] + 0.7 * x[0].powi(3) + x[1] * x[1];
    let by_v = |component: usize| {
        global_pairing(&mesh, &problem, &dofmap, |el| {
            let mut c = vec![0.0; TEST_DIM];
            let range = V_OFFSET + component * P3_DIM..V_OFFSET + (component + 1) * P3_DIM;
            c[range].copy_from_slice(&scalar_coefficients(el, v));
            c
        })
    };
    let by_z = global_pairing(&mesh, &problem, &dofmap, |el| {
        let mut c = vec![0.0; TEST_DIM];
        c[Z_OFFSET..Z_OFFSET + P3_DIM].copy_from_slice(&scalar_coefficients(el, z));
        c
    });
    let pv = [by_v(0), by_v(1)];
    let mut interior = 0.0f64;
    let mut boundary = 0.0f64;
    for (e, edge) in mesh.edges().iter().enumerate() {
        let mut values = Vec::new();
        for c in 0..2 {
            values.push(pv[0][dofmap.n_edge(e, c)]);
            values.push(pv[1][dofmap.n_edge(e, c)]);
            values.push(by_z[dofmap.m_edge(e, c)]);
            values.push(by_z[dofmap.corner(e, c)]);
        }
        let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if edge.boundary.is_some() {
            boundary = boundary.max(m);
        } else {
            interior = interior.max(m / edge.length);
        }
    }
    (interior, boundary)
}

/// Relative differences (matrix, load, asymmetry) between the assembled
/// normal equations on a two-element mesh and `B^T G^{-1} B`, `B^T G^{-1} l`
/// formed monolithically with an LU solve.
pub fn dense_oracle(k: usize) -> (f64, f64, f64) {
    let mesh = two_element_mesh();
    let problem = custom(mesh.rect(), [[0.0, 0.0], [0.0, 1.0]], 0.5, Load::Constant { f: 1.0, p: [0.2, -0.1] }, SideBc::FREE);
    let dofmap = DofMap::new(&mesh, TraceOptions::new(k).unwrap(), &problem.bc).unwrap();
    let n = dofmap.num_free();
    let nt = mesh.num_triangles();
    let mut g = Mat::<f64>::zeros(nt * TEST_DIM, nt * TEST_DIM);
    let mut b = Mat::<f64>::zeros(nt * TEST_DIM, n);
    let mut l = Mat::<f64>::zeros(nt * TEST_DIM, 1);
    for t in 0..nt {
        let sys = ElementSystem::new(&mesh, &problem, &dofmap, t, None).unwrap();
        let o = t * TEST_DIM;
        for i in 0..TEST_DIM {
            l[(o + i, 0)] = sys.load[i];
            for j in 0..TEST_DIM {
                g[(o + i, o + j)] = sys.gram[(i, j)];
            }
        }
        for (local, global) in dofmap.element_dofs(&mesh, t).into_iter().enumerate() {
            if let Some(f) = dofmap.free_index(global) {
                for i in 0..TEST_DIM {
                    b[(o + i, f)] += sys.b[(i, local)];
                }
            }
        }
    }
    let lu = g.partial_piv_lu();
    let a_oracle = b.transpose() * lu.solve(&b);
    let rhs_oracle = b.transpose() * lu.solve(&l);
    let system = assemble(&mesh, &problem, &dofmap).unwrap();
    let a = system.to_dense();
    let matrix = max_abs(&(&a - &a_oracle)) / max_abs(&a_oracle);
    let rhs_scale = (0..n).map(|i| rhs_oracle[(i, 0)].abs()).fold(0.0, f64::max);
    let rhs = (0..n).map(|i| (system.rhs[i] - rhs_oracle[(i, 0)]).abs()).fold(0.0, f64::max) / rhs_scale;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    (matrix, rhs, asym / max_abs(&a))
}

/// Largest solution coefficient and total estimator for vanishing loads.
pub fn zero_data(k: usize) -> (f64, f64) {
    let rect = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
    let mut mesh = initial_rectangle_mesh(rect).unwrap();
    mesh = refine(&mesh, &[0, 1, 2, 3]).unwrap();
    let problem = custom(rect, [[1.0, 0.0], [0.0, 0.5]], 1e-2, Load::Constant { f: 0.0, p: [0.0, 0.0] }, SideBc::CLAMPED);
    let sol = solve(&mesh, &problem, TraceOptions::new(k).unwrap(), 1e-10).unwrap();
    let est = estimate(&mesh, &problem, &sol).unwrap();
    (sol.x.iter().fold(0.0f64, |a, v| a.max(v.abs())), est.total)
}

/// `|B^T G^{-1} (l - B x)| / |B^T G^{-1} l|` on the free dofs after solving
/// the clamped cylinder, and the solver's own relative residual.
pub fn galerkin_orthogonality(k: usize, tol: f64) -> (f64, f64) {
    let problem = Benchmark::CylClamped.problem(1e-2).unwrap();
    let mut mesh = initial_rectangle_mesh(problem.rect).unwrap();
    for _ in 0..2 {
        let all: Vec<usize> = (0..mesh.num_triangles()).collect();
        mesh = refine(&mesh, &all).unwrap();
    }
    let sol = solve(&mesh, &problem, TraceOptions::new(k).unwrap(), tol).unwrap();
    let dofmap = &sol.dofmap;
    let point = point_location(&mesh, &problem).unwrap();
    let mut residual = vec![0.0; dofmap.num_free()];
    let mut rhs = vec![0.0; dofmap.num_free()];
    for t in 0..mesh.num_triangles() {
        let fe = ElementSystem::factored(&mesh, &problem, dofmap, t, point).unwrap();
        let dofs = dofmap.element_dofs(&mesh, t);
        let x: Vec<f64> = dofs.iter().map(|&g| sol.x[g]).collect();
        let r: Vec<f64> = (0..fe.w.nrows())
            .map(|i| fe.g[i] - (0..x.len()).map(|j| fe.w[(i, j)] * x[j]).sum::<f64>())
            .collect();
        for (local, &global) in dofs.iter().enumerate() {
            if let Some(f) = dofmap.free_index(global) {
                residual[f] += (0..r.len()).map(|i| fe.w[(i, local)] * r[i]).sum::<f64>();
                rhs[f] += (0..r.len()).map(|i| fe.w[(i, local)] * fe.g[i]).sum::<f64>();
            }
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm(&residual) / norm(&rhs), sol.relative_residual)
}

/// Largest error of the degree-8 triangle and interval rules on monomials
/// up to degree 8.
pub fn quadrature_error() -> f64 {
    use koiter_dpg::quadrature::{GaussRule, TriangleRule};
    let rule = TriangleRule::new(8).unwrap();
    // int_{ref triangle} x^a y^b = a! b! / (a + b + 2)!
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let mut worst = 0.0f64;
    for a in 0..=8u32 {
        for b in 0..=(8 - a) {
            let exact = fact(a) * fact(b) / fact(a + b + 2);
            let q: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                .sum();
            worst = worst.max((q - exact).abs());
        }
    }
    let gauss = GaussRule::for_degree(8).unwrap();
    for a in 0..=8i32 {
        let q: f64 = gauss.points.iter().zip(&gauss.weights).map(|(x, w)| w * x.powi(a)).sum();
        worst = worst.max((q - 1.0 / (a + 1) as f64).abs());
    }
    worst
}

/// Largest entry of `C C^{-1} eps - eps` and `C^{-1} C eps - eps`, relative
/// to `1 + |eps|_max`.
pub fn material_roundtrip(eps: Mat2, nu: f64) -> f64 {
    let back = apply_c(&apply_cinv(&eps, nu).unwrap(), nu).unwrap();
    let again = apply_cinv(&apply_c(&eps, nu).unwrap(), nu).unwrap();
    let scale = 1.0 + eps.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for r in 0..2 {
        for s in 0..2 {
            worst = worst.max((back[r][s] - eps[r][s]).abs()).max((again[r][s] - eps[r][s]).abs());
        }
    }
    worst / scale
}
