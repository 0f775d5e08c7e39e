//! Reference solutions, error norms and benchmark functionals.
//!
//! Derived fields follow the constitutive relations with `nu = 0`:
//! `N = eps u + B w` and `M = -(d^2/12) eps(grad w)`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{DpgError, Result};
use crate::estimator::{DiscreteSolution, FieldValues};
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;
use crate::shell::{Benchmark, ShellProblem};
use crate::tensor::{self, Mat2, Vec2};
use crate::testspace::VOLUME_DEGREE;

/// Pointwise exact fields.
pub trait ReferenceSolution: Sync {
    fn fields(&self, x: Vec2) -> FieldValues;
}

/// Builds `N = C(eps u + B w)` and `M = -(d^2/12) C eps(grad w)` for `nu = 0`.
fn constitutive(u: Vec2, w: f64, grad_u: Mat2, hess_w: Mat2, b: &Mat2, d: f64) -> FieldValues {
    let eps = tensor::sym(&grad_u);
    let n = tensor::mat_add(&eps, &tensor::mat_scale(w, b));
    let m = tensor::mat_scale(-d * d / 12.0, &hess_w);
    FieldValues { u, w, n, m }
}

/// Inextensional bending state of the cylinder with free ends:
/// `w = 3/(4 d^2) cos 2y`, `u = (0, -3/(8 d^2) sin 2y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inextensional {
    pub d: f64,
}

impl ReferenceSolution for Inextensional {
    fn fields(&self, x: Vec2) -> FieldValues {
        let d2 = self.d * self.d;
        let (s, c) = (2.0 * x[1]).sin_cos();
        let w = 0.75 / d2 * c;
        let u = [0.0, -0.375 / d2 * s];
        let grad_u = [[0.0, 0.0], [0.0, -0.75 / d2 * c]];
        let hess_w = [[0.0, 0.0], [0.0, -3.0 / d2 * c]];
        constitutive(u, w, grad_u, hess_w, &[[0.0, 0.0], [0.0, 1.0]], self.d)
    }
}

/// Shell geometry of the point-load benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl Geometry {
    pub fn curvature(self) -> Mat2 {
        match self {
            Geometry::Elliptic => tensor::IDENTITY,
            Geometry::Parabolic => [[0.0, 0.0], [0.0, 1.0]],
            Geometry::Hyperbolic => [[0.0, 1.0], [1.0, 0.0]],
        }
    }

    pub fn from_benchmark(b: Benchmark) -> Option<Self> {
        match b {
            Benchmark::PointElliptic => Some(Geometry::Elliptic),
            Benchmark::PointParabolic => Some(Geometry::Parabolic),
            Benchmark::PointHyperbolic => Some(Geometry::Hyperbolic),
            _ => None,
        }
    }
}

/// Fourier coefficients `(W, alpha, beta)` of mode `(m, n)`, with
/// `M = (m - 1/2) pi`, `N = (n - 1/2) pi`.
pub fn fourier_coefficients(geometry: Geometry, d: f64, m: usize, n: usize) -> (f64, f64, f64) {
    let mm = (m as f64 - 0.5) * PI;
    let nn = (n as f64 - 0.5) * PI;
    let k = mm * mm + nn * nn;
    let d2 = d * d;
    match geometry {
        Geometry::Elliptic => {
            let w = 12.0 / (d2 * k * k + 12.0);
            let den = d2 * k * k * k + 12.0 * k;
            (w, -12.0 * mm / den, -12.0 * nn / den)
        }
        Geometry::Parabolic => {
            let den = d2 * k.powi(4) + 12.0 * mm.powi(4);
            let w = 12.0 * k * k / den;
            let alpha = 12.0 * mm * nn * nn / den;
            let beta = -12.0 * nn * (2.0 * mm * mm + nn * nn) / den;
            (w, alpha, beta)
        }
        Geometry::Hyperbolic => {
            let den = d2 * k.powi(4) + 48.0 * mm * mm * nn * nn;
            let w = 12.0 * k * k / den;
            (w, -24.0 * nn.powi(3) / den, -24.0 * mm.powi(3) / den)
        }
    }
}

/// Truncated Fourier series solution of the point-load problems on
/// `(-1, 1)^2`.
#[derive(Debug, Clone)]
pub struct FourierReference {
    pub geometry: Geometry,
    pub d: f64,
    pub terms: usize,
    wavenumbers: Vec<f64>,
    /// Coefficient tables indexed `m * terms + n`, grouped by the trigonometric
    /// product they multiply.
    cc: [Vec<f64>; 5],
    ss: [Vec<f64>; 3],
    sc: Vec<f64>,
    cs: Vec<f64>,
}

/// Truncation bound used by default (10^4 terms).
pub const DEFAULT_TERMS: usize = 100;

impl FourierReference {
    pub fn new(geometry: Geometry, d: f64, terms: usize) -> Self {
        let wavenumbers: Vec<f64> = (1..=terms).map(|m| (m as f64 - 0.5) * PI).collect();
        let len = terms * terms;
        let mut cc: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; len]);
        let mut ss: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
        let mut sc = vec![0.0; len];
        let mut cs = vec![0.0; len];
        for m in 0..terms {
            for n in 0..terms {
                let (w, a, b) = fourier_coefficients(geometry, d, m + 1, n + 1);
                let (km, kn) = (wavenumbers[m], wavenumbers[n]);
                let i = m * terms + n;
                // cc: w, w_xx, w_yy, d1 u1 (or d2 u1), d2 u2 (or d1 u2)
                cc[0][i] = w;
                cc[1][i] = -w * km * km;
                cc[2][i] = -w * kn * kn;
                // ss: w_xy, and the two remaining displacement derivatives
                ss[0][i] = w * km * kn;
                match geometry {
                    Geometry::Elliptic | Geometry::Parabolic => {
                        // u1 = a sin cos, u2 = b cos sin
                        cc[3][i] = a * km; // d1 u1
                        cc[4][i] = b * kn; // d2 u2
                        ss[1][i] = -a * kn; // d2 u1
                        ss[2][i] = -b * km; // d1 u2
                        sc[i] = a;
                        cs[i] = b;
                    }
                    Geometry::Hyperbolic => {
                        // u1 = a cos sin, u2 = b sin cos
                        cc[3][i] = a * kn; // d2 u1
                        cc[4][i] = b * km; // d1 u2
                        ss[1][i] = -a * km; // d1 u1
                        ss[2][i] = -b * kn; // d2 u2
                        cs[i] = a;
                        sc[i] = b;
                    }
                }
            }
        }
        FourierReference { geometry, d, terms, wavenumbers, cc, ss, sc, cs }
    }

    /// `cos(K x)` and `sin(K x)` for all wavenumbers via angle addition.
    fn trig(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let (s1, c1) = (PI * x).sin_cos();
        let (s0, c0) = (0.5 * PI * x).sin_cos();
        let mut c = Vec::with_capacity(self.terms);
        let mut s = Vec::with_capacity(self.terms);
        let (mut cur_c, mut cur_s) = (c0, s0);
        for m in 0..self.terms {
            if m % 16 == 0 {
                // Re-anchor to bound the accumulated rounding error.
                let (sa, ca) = (self.wavenumbers[m] * x).sin_cos();
                cur_c = ca;
                cur_s = sa;
            }
            c.push(cur_c);
            s.push(cur_s);
            let next_c = cur_c * c1 - cur_s * s1;
            cur_s = cur_s * c1 + cur_c * s1;
            cur_c = next_c;
        }
        (c, s)
    }
}

impl ReferenceSolution for FourierReference {
    fn fields(&self, x: Vec2) -> FieldValues {
        let (cx, sx) = self.trig(x[0]);
        let (cy, sy) = self.trig(x[1]);
        let t = self.terms;
        let mut cc = [0.0; 5];
        let mut ss = [0.0; 3];
        let (mut sc, mut cs) = (0.0, 0.0);
        for m in 0..t {
            let row = m * t..(m + 1) * t;
            let dot = |table: &[f64], y: &[f64]| -> f64 {
                table[row.clone()].iter().zip(y).map(|(a, b)| a * b).sum()
            };
            for (acc, table) in cc.iter_mut().zip(&self.cc) {
                *acc += cx[m] * dot(table, &cy);
            }
            for (acc, table) in ss.iter_mut().zip(&self.ss) {
                *acc += sx[m] * dot(table, &sy);
            }
            sc += sx[m] * dot(&self.sc, &cy);
            cs += cx[m] * dot(&self.cs, &sy);
        }
        let w = cc[0];
        let hess_w = [[cc[1], ss[0]], [ss[0], cc[2]]];
        let (u, grad_u) = match self.geometry {
            Geometry::Elliptic | Geometry::Parabolic => ([sc, cs], [[cc[3], ss[1]], [ss[2], cc[4]]]),
            Geometry::Hyperbolic => ([cs, sc], [[ss[1], cc[3]], [cc[4], ss[2]]]),
        };
        constitutive(u, w, grad_u, hess_w, &self.geometry.curvature(), self.d)
    }
}

/// Scaled field errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorTable {
    /// `d |w - w_h|`
    pub w: f64,
    /// `|C_disp (u - u_h)|`
    pub u: f64,
    /// `d^{-1} |M - M_h|`
    pub m: f64,
    /// `|N - N_h|`
    pub n: f64,
}

/// Error norms of the piecewise constant fields against `reference`.
pub fn error_norms(
    mesh: &Mesh,
    problem: &ShellProblem,
    solution: &DiscreteSolution,
    reference: &dyn ReferenceSolution,
) -> Result<ErrorTable> {
    let rule = TriangleRule::new(VOLUME_DEGREE)?;
    let c_disp = problem.scalings.c_disp;
    let per_element: Vec<[f64; 4]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let [p0, p1, p2] = mesh.triangle_points(t);
            let area2 = 2.0 * mesh.area(t);
            let h = solution.fields(t);
            let mut acc = [0.0; 4];
            for (xi, wq) in rule.points.iter().zip(&rule.weights) {
                let x = [
                    p0[0] + xi[0] * (p1[0] - p0[0]) + xi[1] * (p2[0] - p0[0]),
                    p0[1] + xi[0] * (p1[1] - p0[1]) + xi[1] * (p2[1] - p0[1]),
                ];
                let e = reference.fields(x);
                let w = wq * area2;
                acc[0] += w * (e.w - h.w).powi(2);
                let du = tensor::mat_vec(&c_disp, tensor::sub(e.u, h.u));
                acc[1] += w * tensor::dot(du, du);
                acc[2] += w * tensor::ddot(&tensor::mat_sub(&e.m, &h.m), &tensor::mat_sub(&e.m, &h.m));
                acc[3] += w * tensor::ddot(&tensor::mat_sub(&e.n, &h.n), &tensor::mat_sub(&e.n, &h.n));
            }
            acc
        })
        .collect();
    let mut sums = [0.0; 4];
    for acc in &per_element {
        for (s, a) in sums.iter_mut().zip(acc) {
            *s += a;
        }
    }
    let d = problem.d;
    Ok(ErrorTable { w: d * sums[0].sqrt(), u: sums[1].sqrt(), m: sums[2].sqrt() / d, n: sums[3].sqrt() })
}

/// Corner displacement functional `u2 sin(alpha) - w cos(alpha)` at
/// `(0, alpha R)`, averaged over the elements touching the corner.
pub fn scordelis_lo_functional(mesh: &Mesh, solution: &DiscreteSolution) -> Result<f64> {
    use crate::shell::scordelis_lo::{ALPHA, RADIUS};
    let corner = [0.0, ALPHA * RADIUS];
    let v = mesh.find_vertex(corner).ok_or_else(|| {
        DpgError::Configuration(format!("corner {corner:?} is not a mesh vertex"))
    })?;
    let touching = mesh.triangles_at_vertex(v);
    let (s, c) = ALPHA.sin_cos();
    let sum: f64 = touching
        .iter()
        .map(|&t| {
            let f = solution.fields(t);
            f.u[1] * s - f.w * c
        })
        .sum();
    Ok(sum / touching.len() as f64)
}

/// One component `N_ij` of the membrane force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component(pub usize, pub usize);

/// Samples the discrete `N_ij` at `samples` uniformly spaced points of the
/// segment `from -> to`. Points on element boundaries take the value of the
/// lowest-index containing element.
pub fn discrete_line(
    mesh: &Mesh,
    solution: &DiscreteSolution,
    from: Vec2,
    to: Vec2,
    samples: usize,
    component: Component,
) -> Vec<(f64, f64)> {
    line_points(from, to, samples)
        .into_iter()
        .filter_map(|(s, x)| mesh.locate(x).map(|t| (s, solution.fields(t).n[component.0][component.1])))
        .collect()
}

/// Samples the reference `N_ij` along a segment.
pub fn reference_line(
    reference: &dyn ReferenceSolution,
    from: Vec2,
    to: Vec2,
    samples: usize,
    component: Component,
) -> Vec<(f64, f64)> {
    line_points(from, to, samples)
        .into_iter()
        .map(|(s, x)| (s, reference.fields(x).n[component.0][component.1]))
        .collect()
}

fn line_points(from: Vec2, to: Vec2, samples: usize) -> Vec<(f64, Vec2)> {
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            (s, tensor::add(from, tensor::scale(s, tensor::sub(to, from))))
        })
        .collect()
}
