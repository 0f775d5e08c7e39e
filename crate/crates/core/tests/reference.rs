//! Reference solutions against independent evaluations.

use koiter_dpg::adaptive::{adaptive_loop, AdaptiveConfig};
use koiter_dpg::reference::{FourierReference, Geometry, Inextensional, ReferenceSolution};
use koiter_dpg::traces::TraceOptions;
use koiter_dpg::Benchmark;

fn frobenius(a: [[f64; 2]; 2]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn fourier_truncation_is_converged_away_from_the_load() {
    let points = [[0.5, 0.3], [-0.7, 0.1], [0.2, -0.6], [0.9, 0.9], [-0.25, 0.75]];
    for g in [Geometry::Elliptic, Geometry::Parabolic, Geometry::Hyperbolic] {
        let coarse = FourierReference::new(g, 1e-2, 100);
        let fine = FourierReference::new(g, 1e-2, 150);
        let peak_w = fine.fields([0.0, 0.0]).w.abs();
        for x in points {
            let (a, b) = (coarse.fields(x), fine.fields(x));
            let scale = frobenius(b.n).max(1e-3);
            let diff = frobenius([[a.n[0][0] - b.n[0][0], a.n[0][1] - b.n[0][1]], [a.n[1][0] - b.n[1][0], a.n[1][1] - b.n[1][1]]]);
            assert!(diff <= 1e-2 * scale, "{g:?} at {x:?}: {diff} vs {scale}");
            assert!((a.w - b.w).abs() <= 1e-3 * peak_w, "{g:?} at {x:?}: {} vs {}", a.w, b.w);
        }
    }
}

#[test]
fn free_cylinder_deflection_error_decreases() {
    // The free cylinder solution is smooth, so the error in w falls on the
    // first uniform refinements.
    let problem = Benchmark::CylFree.problem(1e-2).unwrap();
    let reference = Inextensional { d: 1e-2 };
    let config = AdaptiveConfig::uniform(TraceOptions::new(1).unwrap(), 3);
    let run = adaptive_loop(&problem, &config, Some(&reference)).unwrap();
    let errs: Vec<f64> = run.levels.iter().map(|l| l.errors.unwrap().w).collect();
    assert!(errs[3] < 0.5 * errs[1], "{errs:?}");
}
