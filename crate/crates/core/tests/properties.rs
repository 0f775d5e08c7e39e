//! Structural properties of the discretization checked against independent
//! dense computations.

mod common;

use koiter_dpg::assembly::{element_gram, point_location, ElementSystem};
use koiter_dpg::mesh::{initial_rectangle_mesh, refine, Rect};
use koiter_dpg::shell::{Load, SideBc};
use koiter_dpg::testspace::{ElementTests, P3_DIM, TEST_DIM, T_OFFSET, Z_OFFSET};
use koiter_dpg::traces::{DofMap, TraceOptions};
use koiter_dpg::Benchmark;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gram_is_positive_definite_on_random_triangles(
        w in 0.2f64..3.0,
        h in 0.2f64..3.0,
        cx in 0.05f64..0.95,
        cy in 0.05f64..0.95,
        b11 in -2.0f64..2.0,
        b12 in -2.0f64..2.0,
        b22 in -2.0f64..2.0,
        di in 0usize..3,
    ) {
        let d = [1.0, 1e-2, 1e-4][di];
        let (lmin, asym) = common::gram_spectrum(w, h, [cx, cy], [[b11, b12], [b12, b22]], d);
        prop_assert!(asym <= 1e-14);
        prop_assert!(lmin > 0.0, "smallest eigenvalue {lmin}");
    }

    #[test]
    fn material_law_inverts(e11 in -5.0f64..5.0, e12 in -5.0f64..5.0, e22 in -5.0f64..5.0, nu in -0.9f64..0.49) {
        prop_assert!(common::material_roundtrip([[e11, e12], [e12, e22]], nu) <= 1e-13);
    }

    #[test]
    fn refinement_keeps_area_and_conformity(marks in proptest::collection::vec(0usize..1000, 1..6), steps in 1usize..4) {
        let rect = Rect::new(-1.0, 2.0, 0.0, 1.0).unwrap();
        let mut mesh = initial_rectangle_mesh(rect).unwrap();
        for _ in 0..steps {
            let n = mesh.num_triangles();
            let marked: Vec<usize> = marks.iter().map(|m| m % n).collect();
            let next = refine(&mesh, &marked).unwrap();
            prop_assert!(next.num_triangles() >= n + 3);
            prop_assert!((next.total_area() - rect.area()).abs() <= 1e-12 * rect.area());
            next.check_conforming().unwrap();
            // Every coarse vertex survives with its coordinates.
            prop_assert_eq!(&next.vertices()[..mesh.num_vertices()], mesh.vertices());
            mesh = next;
        }
    }

    #[test]
    fn dorfler_marking_is_minimal(etas in proptest::collection::vec(0.0f64..10.0, 1..40), theta in 0.05f64..1.0) {
        let marked = koiter_dpg::mesh::dorfler_mark(&etas, theta).unwrap();
        let total: f64 = etas.iter().map(|e| e * e).sum();
        if total > 0.0 {
            let covered: f64 = marked.iter().map(|&i| etas[i] * etas[i]).sum();
            prop_assert!(covered >= theta * total * (1.0 - 1e-12));
            // No set with one element fewer reaches the bulk: dropping the
            // smallest marked contribution falls below it.
            let smallest = marked.iter().map(|&i| etas[i] * etas[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(covered - smallest < theta * total);
        }
    }
}

#[test]
fn gram_of_constant_identity_tensor_is_twice_the_area() {
    let rect = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let mesh = common::fan_mesh(rect, [0.3, 0.6]);
    let problem = common::custom(rect, [[0.0; 2]; 2], 1.0, Load::Constant { f: 0.0, p: [0.0, 0.0] }, SideBc::FREE);
    let el = ElementTests::new(&mesh, 2).unwrap();
    let g = element_gram(&el, &problem);
    // The constant scalar test function is 1/sqrt(area).
    let c = el.area.sqrt();
    let mut x = vec![0.0; TEST_DIM];
    x[T_OFFSET] = c;
    x[T_OFFSET + 2 * P3_DIM] = c;
    let mut q = 0.0;
    for i in 0..TEST_DIM {
        for j in 0..TEST_DIM {
            q += x[i] * g[(i, j)] * x[j];
        }
    }
    assert!((q - 2.0 * el.area).abs() < 1e-12 * el.area, "{q} vs {}", 2.0 * el.area);
}

#[test]
fn membrane_and_moment_traces_vanish_on_conforming_tests() {
    for k in [0, 1] {
        let (interior, boundary) = common::trace_conformity(k);
        assert!(interior <= 1e-12, "k = {k}: {interior}");
        assert!(boundary > 1e-3, "k = {k}: boundary pairing {boundary} should not vanish");
    }
}

#[test]
fn normal_equations_match_dense_oracle() {
    for k in [0, 1] {
        let (matrix, rhs, asym) = common::dense_oracle(k);
        assert!(matrix <= 1e-10, "k = {k}: matrix {matrix}");
        assert!(rhs <= 1e-10, "k = {k}: load {rhs}");
        assert!(asym <= 1e-12, "k = {k}: asymmetry {asym}");
    }
}

#[test]
fn zero_data_gives_zero_solution_and_estimator() {
    for k in [0, 1] {
        assert_eq!(common::zero_data(k), (0.0, 0.0));
    }
}

#[test]
fn discrete_residual_is_orthogonal_to_trial_space() {
    let tol = 1e-10;
    for k in [0, 1] {
        let (rel, reported) = common::galerkin_orthogonality(k, tol);
        assert!(rel <= 10.0 * tol.max(reported), "k = {k}: {rel}");
    }
}

#[test]
fn quadrature_rules_integrate_degree_eight_monomials() {
    assert!(common::quadrature_error() <= 1e-14);
}

#[test]
fn point_load_enters_one_element_only() {
    let problem = Benchmark::PointElliptic.problem(1e-2).unwrap();
    let mesh = initial_rectangle_mesh(problem.rect).unwrap();
    let dofmap = DofMap::new(&mesh, TraceOptions::new(0).unwrap(), &problem.bc).unwrap();
    let point = point_location(&mesh, &problem).unwrap();
    let (t0, _) = point.expect("point load is located");
    for t in 0..mesh.num_triangles() {
        let sys = ElementSystem::new(&mesh, &problem, &dofmap, t, point).unwrap();
        let z_block = &sys.load[Z_OFFSET..Z_OFFSET + P3_DIM];
        assert_eq!(z_block.iter().any(|v| *v != 0.0), t == t0, "element {t}");
    }
}

#[test]
fn field_pairings_are_combinations_of_test_norm_features() {
    use koiter_dpg::assembly::{element_b, element_features, element_field_map};
    use koiter_dpg::traces::{LocalLayout, FIELD_DOFS};
    let rect = Rect::new(-0.5, 1.5, 0.0, 0.7).unwrap();
    let mesh = common::fan_mesh(rect, [0.2, 0.45]);
    let mut problem = common::custom(rect, [[0.7, -0.4], [-0.4, 1.3]], 3e-3, Load::Constant { f: 1.0, p: [0.0, 0.0] }, SideBc::FREE);
    problem.scalings.c_disp = [[2.0, 0.5], [0.5, 0.8]];
    let options = TraceOptions::new(1).unwrap();
    for t in 0..mesh.num_triangles() {
        let el = ElementTests::new(&mesh, t).unwrap();
        let b = element_b(&el, &problem, &LocalLayout::new(options), 1);
        let combined = element_features(&el, &problem).transpose() * element_field_map(&el, &problem);
        for j in 0..FIELD_DOFS {
            let scale = (0..TEST_DIM).map(|i| b[(i, j)].abs()).fold(0.0, f64::max);
            for i in 0..TEST_DIM {
                let diff = (combined[(i, j)] - b[(i, j)]).abs();
                assert!(diff <= 1e-11 * scale, "element {t}, test {i}, field {j}: {} vs {}", combined[(i, j)], b[(i, j)]);
            }
        }
    }
}
