//! Discrete solutions and the built-in residual estimator
//! `eta(T)^2 = r_T^T G_T^{-1} r_T`, `r_T = l_T - B_T x_T`.

use rayon::prelude::*;

use crate::assembly::{self, local_coefficients, point_location, ElementSystem, COL_M, COL_N, COL_U, COL_W};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::shell::ShellProblem;
use crate::solver::{self, SolveMethod};
use crate::tensor::{Mat2, Vec2};
use crate::traces::{DofMap, TraceOptions};

/// Piecewise constant field values on one element.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldValues {
    pub u: Vec2,
    pub w: f64,
    /// Membrane forces, general 2x2.
    pub n: Mat2,
    /// Bending moments, symmetric.
    pub m: Mat2,
}

/// Solution of the discrete problem on one mesh.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub dofmap: DofMap,
    /// Coefficients of all unknowns; constrained entries are zero.
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub method: SolveMethod,
}

impl DiscreteSolution {
    /// Number of free unknowns (`#dof`).
    pub fn num_dofs(&self) -> usize {
        self.dofmap.num_free()
    }

    pub fn fields(&self, t: usize) -> FieldValues {
        let f = |j: usize| self.x[self.dofmap.field(t, j)];
        let m01 = f(COL_M + 1);
        FieldValues {
            u: [f(COL_U), f(COL_U + 1)],
            w: f(COL_W),
            n: [[f(COL_N), f(COL_N + 1)], [f(COL_N + 2), f(COL_N + 3)]],
            m: [[f(COL_M), m01], [m01, f(COL_M + 2)]],
        }
    }

    /// Coefficients restricted to the free unknowns.
    pub fn free_coefficients(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dofmap.num_free()];
        for (g, v) in self.x.iter().enumerate() {
            if let Some(i) = self.dofmap.free_index(g) {
                out[i] = *v;
            }
        }
        out
    }
}

/// Assembles and solves the normal equations on `mesh`.
pub fn solve(mesh: &Mesh, problem: &ShellProblem, options: TraceOptions, tol: f64) -> Result<DiscreteSolution> {
    problem.validate()?;
    let dofmap = DofMap::new(mesh, options, &problem.bc)?;
    let system = assembly::assemble(mesh, problem, &dofmap)?;
    let report = solver::solve_spd(&system, tol)?;
    let mut x = vec![0.0; dofmap.total()];
    for (g, slot) in x.iter_mut().enumerate() {
        if let Some(i) = dofmap.free_index(g) {
            *slot = report.x[i];
        }
    }
    Ok(DiscreteSolution { dofmap, x, relative_residual: report.relative_residual, method: report.method })
}

/// Per-element estimator contributions `eta(T)` and the total `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub local: Vec<f64>,
    pub total: f64,
}

/// Evaluates `eta(T)` on every element.
pub fn estimate(mesh: &Mesh, problem: &ShellProblem, solution: &DiscreteSolution) -> Result<Estimate> {
    let point = point_location(mesh, problem)?;
    let local: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let factored = ElementSystem::factored(mesh, problem, &solution.dofmap, t, point)?;
            let x = local_coefficients(mesh, &solution.dofmap, &solution.x, t);
            Ok(factored.residual_squared(&x).max(0.0).sqrt())
        })
        .collect::<Result<_>>()?;
    let total = local.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(Estimate { local, total })
}
