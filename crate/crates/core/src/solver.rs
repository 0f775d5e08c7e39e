//! Sparse symmetric positive definite solves for the normal equations.
//!
//! The matrix is equilibrated symmetrically by its diagonal, factored with a
//! sparse Cholesky factorization (fill-reducing ordering included) and the
//! solution is polished by iterative refinement. If the factorization meets
//! a nonpositive pivot it is repeated with a small diagonal shift and used as
//! preconditioner for conjugate gradients; Jacobi-preconditioned conjugate
//! gradients is the last resort.
//!
//! A residual tolerance below what double precision can represent is
//! replaced by the rounding floor `64 eps | |A| |x| | / |b|`, reported as
//! [`SolveReport::attainable`].

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::assembly::NormalEquations;
use crate::error::{DpgError, Result};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Which path produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cholesky,
    ConjugateGradient,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub method: SolveMethod,
    pub refinement_steps: usize,
    /// Effective tolerance: `max(tol, rounding floor)`.
    pub attainable: f64,
}

/// Iteration cap of the conjugate gradient fallback.
const MAX_CG_ITERATIONS: usize = 20_000;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(system: &NormalEquations, x: &[f64], b_norm: f64) -> f64 {
    let ax = system.apply(x);
    let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    norm(&r) / b_norm
}

/// Solves `A x = b` to relative residual `tol`.
pub fn solve_spd(system: &NormalEquations, tol: f64) -> Result<SolveReport> {
    let n = system.dim();
    let b_norm = norm(&system.rhs);
    if b_norm == 0.0 {
        return Ok(SolveReport {
            x: vec![0.0; n],
            relative_residual: 0.0,
            method: SolveMethod::Cholesky,
            refinement_steps: 0,
            attainable: tol,
        });
    }
    let diag = diagonal(system)?;
    let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let with_floor = |mut r: SolveReport| {
        r.attainable = tol.max(rounding_floor(system, &r.x, b_norm));
        r
    };

    let factor = factor_shifted(system, &scale);
    let first = match &factor {
        Ok((llt, shift)) => {
            let solve = |rhs: &[f64]| apply_factor(llt, &scale, rhs);
            let refined = with_floor(refine(system, &solve, tol, b_norm));
            if *shift == 0.0 && refined.relative_residual <= refined.attainable {
                return Ok(refined);
            }
            // A shifted factor (or a stalled refinement) still makes an
            // excellent preconditioner.
            let cg = pcg(system, &solve, Some(refined.x.clone()), tol, b_norm, MAX_FACTORED_CG).map(with_floor);
            Ok(match cg {
                Ok(cg) if cg.relative_residual < refined.relative_residual => cg,
                _ => refined,
            })
        }
        Err(e) => Err(e.clone()),
    };
    if let Ok(report) = &first {
        if report.relative_residual <= report.attainable {
            return Ok(report.clone());
        }
    }
    let start = first.as_ref().ok().map(|r| r.x.clone());
    let jacobi = |r: &[f64]| r.iter().zip(&diag).map(|(a, d)| a / d).collect::<Vec<f64>>();
    let cg = pcg(system, &jacobi, start, tol, b_norm, MAX_CG_ITERATIONS.min(20 * n + 1000)).map(with_floor);
    let best = match (&first, &cg) {
        (Ok(a), Ok(b)) => Some(if a.relative_residual <= b.relative_residual { a } else { b }),
        (Ok(a), Err(_)) => Some(a),
        (Err(_), Ok(b)) => Some(b),
        (Err(_), Err(_)) => None,
    };
    match best {
        Some(r) if r.relative_residual <= r.attainable => Ok(r.clone()),
        _ => {
            let describe = |r: &Result<SolveReport>| match r {
                Ok(r) => format!("residual {:.3e}", r.relative_residual),
                Err(e) => e.to_string(),
            };
            Err(DpgError::Solver(format!(
                "tolerance {tol:.1e} not reached: factorization gave {}, conjugate gradients gave {}",
                describe(&first),
                describe(&cg)
            )))
        }
    }
}

/// Iteration cap of conjugate gradients preconditioned by the factorization.
const MAX_FACTORED_CG: usize = 500;

/// Diagonal shifts of the equilibrated matrix tried when the plain
/// factorization meets a nonpositive pivot.
const SHIFTS: [f64; 6] = [0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

/// `64 eps | |A| |x| | / |b|`: the residual size rounding alone can produce.
fn rounding_floor(system: &NormalEquations, x: &[f64], b_norm: f64) -> f64 {
    let abs_x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let mut y = vec![0.0; x.len()];
    let sym = system.lower.symbolic();
    let values = system.lower.val();
    for j in 0..system.dim() {
        let range = sym.col_range(j);
        for (i, v) in sym.row_idx()[range.clone()].iter().zip(&values[range]) {
            y[*i] += v.abs() * abs_x[j];
            if *i != j {
                y[j] += v.abs() * abs_x[*i];
            }
        }
    }
    64.0 * f64::EPSILON * norm(&y) / b_norm
}

fn diagonal(system: &NormalEquations) -> Result<Vec<f64>> {
    let n = system.dim();
    let mut diag = vec![0.0; n];
    let sym = system.lower.symbolic();
    let values = system.lower.val();
    for j in 0..n {
        let range = sym.col_range(j);
        for (i, v) in sym.row_idx()[range.clone()].iter().zip(&values[range]) {
            if *i == j {
                diag[j] += v;
            }
        }
    }
    if let Some(j) = diag.iter().position(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(DpgError::Solver(format!(
            "matrix is not positive definite: diagonal entry {j} is {}",
            diag[j]
        )));
    }
    Ok(diag)
}

type Factor = faer::sparse::linalg::solvers::Llt<usize, f64>;

/// Cholesky factor of `S A S + shift I` (`S` the equilibration) for the
/// smallest shift in [`SHIFTS`] that succeeds.
fn factor_shifted(system: &NormalEquations, scale: &[f64]) -> Result<(Factor, f64)> {
    let n = system.dim();
    let sym = system.lower.symbolic();
    let values = system.lower.val();
    let mut last_error = String::new();
    for shift in SHIFTS {
        let mut triplets = Vec::with_capacity(values.len() + n);
        for j in 0..n {
            let range = sym.col_range(j);
            for (i, v) in sym.row_idx()[range.clone()].iter().zip(&values[range]) {
                triplets.push(Triplet::new(*i, j, scale[*i] * v * scale[j]));
            }
            if shift > 0.0 {
                triplets.push(Triplet::new(j, j, shift));
            }
        }
        let scaled = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| DpgError::Solver(format!("{e:?}")))?;
        match scaled.sp_cholesky(Side::Lower) {
            Ok(llt) => return Ok((llt, shift)),
            Err(e) => last_error = format!("{e:?}"),
        }
    }
    Err(DpgError::Solver(format!("sparse Cholesky failed: {last_error}")))
}

fn apply_factor(llt: &Factor, scale: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut col = Col::<f64>::from_fn(n, |i| scale[i] * rhs[i]);
    llt.solve_in_place(col.as_mat_mut());
    (0..n).map(|i| scale[i] * col[i]).collect()
}

/// Direct solve followed by up to ten steps of iterative refinement.
fn refine(system: &NormalEquations, solve: &dyn Fn(&[f64]) -> Vec<f64>, tol: f64, b_norm: f64) -> SolveReport {
    let mut x = solve(&system.rhs);
    let mut res = relative_residual(system, &x, b_norm);
    let mut steps = 0;
    while res > 0.1 * tol && steps < 10 {
        let ax = system.apply(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let new_res = relative_residual(system, &candidate, b_norm);
        steps += 1;
        if new_res >= res {
            break;
        }
        x = candidate;
        res = new_res;
    }
    SolveReport { x, relative_residual: res, method: SolveMethod::Cholesky, refinement_steps: steps, attainable: tol }
}

/// Preconditioned conjugate gradients; `precond` applies an approximate inverse.
fn pcg(
    system: &NormalEquations,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    start: Option<Vec<f64>>,
    tol: f64,
    b_norm: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let n = system.dim();
    let mut x = start.unwrap_or_else(|| vec![0.0; n]);
    let ax = system.apply(&x);
    let mut r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut iterations = 0;
    let mut best = (norm(&r), x.clone());
    while norm(&r) > 0.1 * tol * b_norm && iterations < max_iter {
        let ap = system.apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            if iterations == 0 {
                return Err(DpgError::Solver(format!(
                    "conjugate gradients broke down at iteration {iterations} (p^T A p = {pap:e})"
                )));
            }
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        let rn = norm(&r);
        if rn < best.0 {
            best = (rn, x.clone());
        }
    }
    let x = best.1;
    let res = relative_residual(system, &x, b_norm);
    Ok(SolveReport {
        x,
        relative_residual: res,
        method: SolveMethod::ConjugateGradient,
        refinement_steps: iterations,
        attainable: tol,
    })
}

/// Builds normal equations from a dense symmetric matrix (lower triangle used).
pub fn from_dense(a: &Mat<f64>, rhs: Vec<f64>) -> Result<NormalEquations> {
    let n = a.nrows();
    let mut triplets = Vec::new();
    for j in 0..n {
        for i in j..n {
            if a[(i, j)] != 0.0 {
                triplets.push(Triplet::new(i, j, a[(i, j)]));
            }
        }
    }
    let lower = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| DpgError::Solver(format!("{e:?}")))?;
    Ok(NormalEquations { lower, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let a = Mat::<f64>::identity(5, 5);
        let rhs = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let sys = from_dense(&a, rhs.clone()).unwrap();
        let report = solve_spd(&sys, DEFAULT_TOL).unwrap();
        for (x, b) in report.x.iter().zip(&rhs) {
            assert!((x - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let sys = from_dense(&Mat::<f64>::identity(3, 3), vec![0.0; 3]).unwrap();
        assert_eq!(solve_spd(&sys, DEFAULT_TOL).unwrap().x, vec![0.0; 3]);
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let m = Mat::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = m.transpose() * &m + Mat::<f64>::identity(n, n);
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = from_dense(&a, rhs.clone()).unwrap();
        let report = solve_spd(&sys, DEFAULT_TOL).unwrap();
        let dense = a.llt(Side::Lower).unwrap().solve(Col::<f64>::from_fn(n, |i| rhs[i]));
        let err: f64 = (0..n).map(|i| (report.x[i] - dense[i]).powi(2)).sum::<f64>().sqrt();
        let size: f64 = (0..n).map(|i| dense[i].powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * size);
        assert_eq!(report.method, SolveMethod::Cholesky);
    }

    #[test]
    fn badly_scaled_system_is_equilibrated() {
        let n = 4;
        let scales = [1e-8, 1.0, 1e6, 1e-3];
        let a = Mat::<f64>::from_fn(n, n, |i, j| {
            let base = if i == j { 4.0 } else { 1.0 };
            base * scales[i] * scales[j]
        });
        let rhs = vec![1e-8, 2.0, 3e6, 4e-3];
        let report = solve_spd(&from_dense(&a, rhs).unwrap(), DEFAULT_TOL).unwrap();
        assert!(report.relative_residual <= DEFAULT_TOL);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 3.0 });
        let err = solve_spd(&from_dense(&a, vec![1.0, 0.0]).unwrap(), DEFAULT_TOL);
        assert!(matches!(err, Err(DpgError::Solver(_))));
    }
}
