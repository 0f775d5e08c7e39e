//! Solve, estimate, mark and refine.

use crate::error::{DpgError, Result};
use crate::estimator::{estimate, solve, DiscreteSolution};
use crate::mesh::{dorfler_mark, initial_rectangle_mesh, refine, MarkSet, Mesh};
use crate::reference::{self, ErrorTable, ReferenceSolution};
use crate::shell::{Benchmark, ShellProblem};
use crate::solver::DEFAULT_TOL;
use crate::traces::TraceOptions;

/// Element selection rule between levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    /// Every element is marked.
    Uniform,
    /// Bulk marking with parameter `theta`.
    Adaptive,
}

impl RefinementMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(RefinementMode::Uniform),
            "adaptive" => Ok(RefinementMode::Adaptive),
            other => Err(DpgError::Configuration(format!("unknown refinement mode '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RefinementMode::Uniform => "uniform",
            RefinementMode::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub mode: RefinementMode,
    pub theta: f64,
    /// Number of refinement steps; `0` solves on the initial mesh only.
    pub max_levels: usize,
    /// No further level is started once `#dof` exceeds this value.
    pub max_dofs: usize,
    pub options: TraceOptions,
    pub tol: f64,
}

impl AdaptiveConfig {
    pub fn new(options: TraceOptions) -> Self {
        AdaptiveConfig {
            mode: RefinementMode::Adaptive,
            theta: 0.25,
            max_levels: 25,
            max_dofs: 30_000,
            options,
            tol: DEFAULT_TOL,
        }
    }

    pub fn uniform(options: TraceOptions, max_levels: usize) -> Self {
        AdaptiveConfig { mode: RefinementMode::Uniform, max_levels, ..Self::new(options) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(DpgError::InvalidParameter(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(DpgError::InvalidParameter(format!("solver tolerance must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }
}

/// Result of one level.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    pub mesh: Mesh,
    pub solution: DiscreteSolution,
    pub local_eta: Vec<f64>,
    pub eta: f64,
    pub errors: Option<ErrorTable>,
    /// Benchmark functional, when defined (corner displacement for the roof).
    pub functional: Option<f64>,
    /// Elements marked for the next refinement; empty on the last level.
    pub marked: MarkSet,
}

impl LevelRecord {
    pub fn num_elements(&self) -> usize {
        self.mesh.num_triangles()
    }

    pub fn num_dofs(&self) -> usize {
        self.solution.num_dofs()
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub config: AdaptiveConfig,
    pub levels: Vec<LevelRecord>,
}

impl AdaptiveRun {
    pub fn last(&self) -> &LevelRecord {
        self.levels.last().expect("a run has at least one level")
    }
}

/// Reference solution attached to a benchmark, if one is known.
pub fn benchmark_reference(problem: &ShellProblem) -> Option<Box<dyn ReferenceSolution>> {
    match problem.benchmark {
        Benchmark::CylFree => Some(Box::new(reference::Inextensional { d: problem.d })),
        b => reference::Geometry::from_benchmark(b).map(|g| {
            Box::new(reference::FourierReference::new(g, problem.d, reference::DEFAULT_TERMS))
                as Box<dyn ReferenceSolution>
        }),
    }
}

/// Runs the loop on the initial mesh of `problem.rect`, reporting errors
/// against `reference` when given.
pub fn adaptive_loop(
    problem: &ShellProblem,
    config: &AdaptiveConfig,
    reference: Option<&dyn ReferenceSolution>,
) -> Result<AdaptiveRun> {
    adaptive_loop_with(problem, config, reference, |_| {})
}

/// As [`adaptive_loop`], calling `on_level` after each level is recorded.
pub fn adaptive_loop_with(
    problem: &ShellProblem,
    config: &AdaptiveConfig,
    reference: Option<&dyn ReferenceSolution>,
    mut on_level: impl FnMut(&LevelRecord),
) -> Result<AdaptiveRun> {
    config.validate()?;
    problem.validate()?;
    let mut mesh = initial_rectangle_mesh(problem.rect)?;
    let mut levels: Vec<LevelRecord> = Vec::new();
    for level in 0..=config.max_levels {
        let solution = solve(&mesh, problem, config.options, config.tol)?;
        let est = estimate(&mesh, problem, &solution)?;
        let errors = match reference {
            Some(r) => Some(reference::error_norms(&mesh, problem, &solution, r)?),
            None => None,
        };
        let functional = match problem.benchmark {
            Benchmark::ScordelisLo => Some(reference::scordelis_lo_functional(&mesh, &solution)?),
            _ => None,
        };
        let last = level == config.max_levels || solution.num_dofs() >= config.max_dofs;
        let marked = if last {
            Vec::new()
        } else {
            match config.mode {
                RefinementMode::Uniform => (0..mesh.num_triangles()).collect(),
                RefinementMode::Adaptive => dorfler_mark(&est.local, config.theta)?,
            }
        };
        let next = if last || marked.is_empty() { None } else { Some(refine(&mesh, &marked)?) };
        let record = LevelRecord {
            level,
            mesh,
            solution,
            local_eta: est.local,
            eta: est.total,
            errors,
            functional,
            marked,
        };
        on_level(&record);
        levels.push(record);
        match next {
            Some(m) => mesh = m,
            None => break,
        }
    }
    Ok(AdaptiveRun { config: *config, levels })
}

/// Least-squares slope of `-log(value)` against `log(#dof)`, i.e. the
/// algebraic convergence rate.
pub fn fitted_rate(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(d, _)| (*d as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}
