use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use koiter_dpg_cli::{run, ConfigError, RunConfig, RunError, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "koiter-dpg", version, about = "DPG solver for shallow Koiter shells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a benchmark on a sequence of refined meshes.
    Run(RunArgs),
}

/// Every flag mirrors the configuration key of the same name.
#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    max_levels: Option<String>,
    #[arg(long)]
    max_dofs: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    corner_moments: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    length: Option<String>,
    #[arg(long)]
    c_disp: Option<String>,
    #[arg(long)]
    c_q: Option<String>,
    #[arg(long)]
    line_samples: Option<String>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    curvature: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    load_f: Option<String>,
    #[arg(long)]
    load_p: Option<String>,
    #[arg(long)]
    point_load: Option<String>,
    #[arg(long)]
    bc_left: Option<String>,
    #[arg(long)]
    bc_right: Option<String>,
    #[arg(long)]
    bc_bottom: Option<String>,
    #[arg(long)]
    bc_top: Option<String>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, &String)> {
        let all = [
            ("benchmark", &self.benchmark),
            ("d", &self.d),
            ("k", &self.k),
            ("mode", &self.mode),
            ("theta", &self.theta),
            ("max_levels", &self.max_levels),
            ("max_dofs", &self.max_dofs),
            ("tol", &self.tol),
            ("corner_moments", &self.corner_moments),
            ("output_dir", &self.output_dir),
            ("length", &self.length),
            ("c_disp", &self.c_disp),
            ("c_q", &self.c_q),
            ("line_samples", &self.line_samples),
            ("domain", &self.domain),
            ("curvature", &self.curvature),
            ("nu", &self.nu),
            ("load_f", &self.load_f),
            ("load_p", &self.load_p),
            ("point_load", &self.point_load),
            ("bc_left", &self.bc_left),
            ("bc_right", &self.bc_right),
            ("bc_bottom", &self.bc_bottom),
            ("bc_top", &self.bc_top),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    fn to_config(&self) -> Result<RunConfig, RunError> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|source| RunError::Io { path: path.clone(), source })?;
            config.apply_lines(&text).map_err(|e| {
                RunError::Config(ConfigError::Invalid(format!("{}: {e}", path.display())))
            })?;
        }
        for (key, value) in self.pairs() {
            config.set(0, key, value).map_err(|e| {
                let flag = key.replace('_', "-");
                let message = match e {
                    ConfigError::Value { value, message, .. } => {
                        format!("invalid value '{value}' for --{flag}: {message}")
                    }
                    other => format!("--{flag}: {other}"),
                };
                RunError::Config(ConfigError::Invalid(message))
            })?;
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                config.output_dir = PathBuf::from(dir);
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    let config = match args.to_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config, |line| println!("{line}")) {
        Ok(summary) => {
            println!(
                "wrote {} levels to {} (final dof {}, eta {:.4e})",
                summary.levels,
                summary.output_dir.display(),
                summary.final_dofs,
                summary.final_eta
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
