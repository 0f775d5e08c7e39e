//! Gauss rules on the unit interval and on the reference triangle.
//!
//! The triangle rules are tensor Gauss rules collapsed onto the triangle
//! `{(x, y): x, y >= 0, x + y <= 1}` by `x = s (1 - t)`, `y = t`.

use crate::error::{DpgError, Result};
use crate::tensor::Vec2;

/// Highest polynomial degree for which a triangle rule can be requested.
pub const MAX_DEGREE: usize = 40;

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DEGREE {
            return Err(DpgError::UnsupportedDegree { degree: n, max: MAX_DEGREE });
        }
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev-type initial guess for the i-th root on [-1, 1].
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Ok(GaussRule { points, weights })
    }

    /// Smallest rule exact for degree `degree`.
    pub fn for_degree(degree: usize) -> Result<Self> {
        Self::new(degree / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle; weights sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Rule exact for all polynomials of total degree `degree`.
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(DpgError::UnsupportedDegree { degree, max: MAX_DEGREE });
        }
        // The collapsed integrand has degree `degree` in s and `degree + 1` in t.
        let rs = GaussRule::for_degree(degree)?;
        let rt = GaussRule::for_degree(degree + 1)?;
        let mut points = Vec::with_capacity(rs.len() * rt.len());
        let mut weights = Vec::with_capacity(rs.len() * rt.len());
        for (t, wt) in rt.points.iter().zip(&rt.weights) {
            for (s, ws) in rs.points.iter().zip(&rs.weights) {
                points.push([s * (1.0 - t), *t]);
                weights.push(ws * wt * (1.0 - t));
            }
        }
        Ok(TriangleRule { points, weights, degree })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
