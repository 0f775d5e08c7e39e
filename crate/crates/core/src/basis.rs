//! Polynomial bases on the reference triangle and their affine push-forward.
//!
//! `TriangleBasis::new(k)` is orthonormal in `L2` of the reference triangle
//! and hierarchical: its first `dim(P_j)` functions span `P_j` for every
//! `j <= k`, so one degree-4 table serves all test blocks.

use faer::{Mat, Side};

use crate::error::{DpgError, Result};
use crate::quadrature::TriangleRule;
use crate::tensor::{Mat2, Vec2};

/// Number of polynomials of total degree at most `k` in two variables.
pub const fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Value, gradient and Hessian of one function at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec2,
    pub hess: Mat2,
}

/// Orthonormal basis of `P_k` on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone)]
pub struct TriangleBasis {
    degree: usize,
    /// Exponents of the shifted monomials `(x - 1/3)^a (y - 1/3)^b`.
    exponents: Vec<(i32, i32)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: Vec<Vec<f64>>,
}

impl TriangleBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > 8 {
            return Err(DpgError::UnsupportedDegree { degree, max: 8 });
        }
        let n = dim_p(degree);
        let exponents: Vec<(i32, i32)> = (0..=degree as i32)
            .flat_map(|total| (0..=total).map(move |b| (total - b, b)))
            .collect();

        let rule = TriangleRule::new(2 * degree)?;
        let mut gram = Mat::<f64>::zeros(n, n);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let m: Vec<f64> = exponents.iter().map(|&e| shifted_monomial(e, *p)).collect();
            for i in 0..n {
                for j in 0..=i {
                    gram[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        let llt = gram
            .llt(Side::Lower)
            .map_err(|_| DpgError::InvalidParameter("monomial Gram matrix is singular".into()))?;
        // Basis = L^{-1} m; the inverse of a lower-triangular matrix is lower
        // triangular, which keeps the basis hierarchical.
        let inv = llt.L().to_owned();
        let mut ident = Mat::<f64>::identity(n, n);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(
            inv.as_ref(),
            ident.as_mut(),
            faer::Par::Seq,
        );
        let coeffs = (0..n)
            .map(|i| (0..n).map(|j| if j <= i { ident[(i, j)] } else { 0.0 }).collect())
            .collect();
        Ok(TriangleBasis { degree, exponents, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Values of all basis functions at a reference point.
    pub fn values(&self, p: Vec2) -> Vec<f64> {
        let m: Vec<f64> = self.exponents.iter().map(|&e| shifted_monomial(e, p)).collect();
        self.coeffs
            .iter()
            .map(|c| c.iter().zip(&m).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Values, reference gradients and reference Hessians at a point.
    pub fn jets(&self, p: Vec2) -> Vec<Jet> {
        let mono: Vec<Jet> = self.exponents.iter().map(|&e| monomial_jet(e, p)).collect();
        self.coeffs
            .iter()
            .map(|c| {
                let mut jet = Jet::default();
                for (a, m) in c.iter().zip(&mono) {
                    if *a == 0.0 {
                        continue;
                    }
                    jet.value += a * m.value;
                    jet.grad[0] += a * m.grad[0];
                    jet.grad[1] += a * m.grad[1];
                    for r in 0..2 {
                        for s in 0..2 {
                            jet.hess[r][s] += a * m.hess[r][s];
                        }
                    }
                }
                jet
            })
            .collect()
    }
}

fn ipow(x: f64, e: i32) -> f64 {
    if e < 0 {
        0.0
    } else {
        x.powi(e)
    }
}

fn shifted_monomial((a, b): (i32, i32), p: Vec2) -> f64 {
    ipow(p[0] - 1.0 / 3.0, a) * ipow(p[1] - 1.0 / 3.0, b)
}

fn monomial_jet((a, b): (i32, i32), p: Vec2) -> Jet {
    let x = p[0] - 1.0 / 3.0;
    let y = p[1] - 1.0 / 3.0;
    let (af, bf) = (a as f64, b as f64);
    let xa = ipow(x, a);
    let yb = ipow(y, b);
    let dxa = af * ipow(x, a - 1);
    let dyb = bf * ipow(y, b - 1);
    let ddxa = af * (af - 1.0) * ipow(x, a - 2);
    let ddyb = bf * (bf - 1.0) * ipow(y, b - 2);
    Jet {
        value: xa * yb,
        grad: [dxa * yb, xa * dyb],
        hess: [[ddxa * yb, dxa * dyb], [dxa * dyb, xa * ddyb]],
    }
}

/// Affine map `x = p0 + J xi` from the reference triangle onto a physical one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: Vec2,
    pub jacobian: Mat2,
    /// Inverse Jacobian `J^{-1}`.
    pub inverse: Mat2,
    /// `det J`, twice the physical area.
    pub det: f64,
}

impl AffineMap {
    pub fn new(points: [Vec2; 3]) -> Result<Self> {
        let [p0, p1, p2] = points;
        let jacobian = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = crate::tensor::det(&jacobian);
        let scale = crate::tensor::max_abs(&jacobian);
        if !(det.is_finite()) || det.abs() <= 1e-14 * scale * scale {
            return Err(DpgError::InvalidGeometry(format!(
                "degenerate triangle {points:?}"
            )));
        }
        let inverse = crate::tensor::inverse(&jacobian).expect("nonzero determinant");
        Ok(AffineMap { origin: p0, jacobian, inverse, det })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn to_physical(&self, xi: Vec2) -> Vec2 {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Vec2) -> Vec2 {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        crate::tensor::mat_vec(&self.inverse, d)
    }

    /// Physical gradient `J^{-T} grad_xi`.
    pub fn push_grad(&self, g: Vec2) -> Vec2 {
        let k = &self.inverse;
        [k[0][0] * g[0] + k[1][0] * g[1], k[0][1] * g[0] + k[1][1] * g[1]]
    }

    /// Physical Hessian `J^{-T} H_xi J^{-1}`.
    pub fn push_hess(&self, h: &Mat2) -> Mat2 {
        let k = &self.inverse;
        let mut out = [[0.0; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (s, entry) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += k[a][r] * h[a][b] * k[b][s];
                    }
                }
                *entry = acc;
            }
        }
        out
    }

    /// Pushes a reference jet forward, optionally scaling the function by `c`.
    pub fn push_jet(&self, jet: &Jet, c: f64) -> Jet {
        let g = self.push_grad(jet.grad);
        let h = self.push_hess(&jet.hess);
        Jet {
            value: c * jet.value,
            grad: [c * g[0], c * g[1]],
            hess: [[c * h[0][0], c * h[0][1]], [c * h[1][0], c * h[1][1]]],
        }
    }
}
