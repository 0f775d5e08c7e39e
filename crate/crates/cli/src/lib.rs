//! Command-line driver for the shell benchmarks: configuration parsing, the
//! refinement loop and plot-ready output files.

pub mod config;
pub mod output;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use koiter_dpg::adaptive::{adaptive_loop_with, benchmark_reference, LevelRecord};
use koiter_dpg::{Benchmark, DpgError};
use thiserror::Error;

pub use config::{parse_config, ConfigError, RunConfig, OUTPUT_DIR_ENV};
use output::LineSpec;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Model(#[from] DpgError),
}

/// File name of the convergence table inside the output directory.
pub const CONVERGENCE_FILE: &str = "convergence.dat";

/// Line extractions written for a benchmark after the last level.
pub fn line_specs(benchmark: Benchmark) -> Vec<LineSpec> {
    match benchmark {
        Benchmark::PointElliptic => vec![LineSpec {
            file: "line_N11_y0.dat",
            coordinate: "x",
            component: (0, 0),
            from: [-1.0, 0.0],
            to: [1.0, 0.0],
        }],
        Benchmark::PointParabolic => vec![LineSpec {
            file: "line_N22_x0.dat",
            coordinate: "y",
            component: (1, 1),
            from: [0.0, -1.0],
            to: [0.0, 1.0],
        }],
        _ => Vec::new(),
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub levels: usize,
    pub final_dofs: usize,
    pub final_eta: f64,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Runs the configured refinement loop, writing all files into
/// `config.output_dir`. `progress` receives one line per level.
pub fn run(config: &RunConfig, mut progress: impl FnMut(&str)) -> Result<RunSummary, RunError> {
    config.validate()?;
    let problem = config.problem()?;
    let adaptive = config.adaptive_config()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let reference = benchmark_reference(&problem);

    let table_path = dir.join(CONVERGENCE_FILE);
    let mut table = BufWriter::new(File::create(&table_path).map_err(io_err(&table_path))?);
    output::convergence_header(&mut table).map_err(io_err(&table_path))?;

    let mut failure: Option<RunError> = None;
    let mut on_level = |record: &LevelRecord| {
        if failure.is_some() {
            return;
        }
        let result = output::convergence_row(&mut table, record)
            .and_then(|_| table.flush())
            .map_err(io_err(&table_path))
            .and_then(|_| output::write_mesh(&dir, record).map_err(io_err(&dir)))
            .and_then(|_| output::write_fields(&dir, record).map_err(io_err(&dir)));
        match result {
            Ok(()) => progress(&format!(
                "level {:2}  elements {:6}  dof {:7}  eta {:.4e}",
                record.level,
                record.num_elements(),
                record.num_dofs(),
                record.eta
            )),
            Err(e) => failure = Some(e),
        }
    };
    let run = adaptive_loop_with(&problem, &adaptive, reference.as_deref(), &mut on_level)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let last = run.last();
    for spec in line_specs(problem.benchmark) {
        output::write_line(&dir, &spec, last, reference.as_deref(), config.line_samples)
            .map_err(io_err(&dir.join(spec.file)))?;
    }
    Ok(RunSummary {
        output_dir: dir,
        levels: run.levels.len(),
        final_dofs: last.num_dofs(),
        final_eta: last.eta,
    })
}
