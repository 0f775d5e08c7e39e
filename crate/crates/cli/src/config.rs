//! Run configuration: `key = value` lines with `#` comments.

use std::path::PathBuf;

use koiter_dpg::adaptive::{AdaptiveConfig, RefinementMode};
use koiter_dpg::mesh::Side;
use koiter_dpg::shell::{generic_c_q, generic_scalings, BcTable, Load, SideBc};
use koiter_dpg::solver::DEFAULT_TOL;
use koiter_dpg::{Benchmark, DpgError, Rect, ShellProblem, TraceOptions};
use thiserror::Error;

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "KOITER_DPG_OUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value '{value}' for '{key}': {message}")]
    Value { line: usize, key: String, value: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] DpgError),
}

/// Geometry, material and loads of a custom problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CustomSpec {
    pub domain: Option<Rect>,
    pub curvature: Option<[f64; 3]>,
    pub nu: f64,
    pub load_f: f64,
    pub load_p: [f64; 2],
    pub point_load: Option<[f64; 3]>,
    pub bc: [Option<SideBc>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub benchmark: Benchmark,
    /// Thickness; `None` takes the benchmark default.
    pub d: Option<f64>,
    pub k: usize,
    pub mode: RefinementMode,
    pub theta: f64,
    pub max_levels: usize,
    pub max_dofs: usize,
    pub tol: f64,
    pub corner_moments: bool,
    pub output_dir: PathBuf,
    pub length: Option<f64>,
    /// `C_disp` as `(c11, c12, c22)`.
    pub c_disp: Option<[f64; 3]>,
    pub c_q: Option<f64>,
    /// Number of samples of the line extractions.
    pub line_samples: usize,
    pub custom: CustomSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            benchmark: Benchmark::ScordelisLo,
            d: None,
            k: 0,
            mode: RefinementMode::Adaptive,
            theta: 0.25,
            max_levels: 25,
            max_dofs: 30_000,
            tol: DEFAULT_TOL,
            corner_moments: true,
            output_dir: PathBuf::from("koiter-dpg-out"),
            length: None,
            c_disp: None,
            c_q: None,
            line_samples: 401,
            custom: CustomSpec::default(),
        }
    }
}

/// Recognized keys; `-` and `_` are interchangeable in input.
pub const KEYS: &[&str] = &[
    "benchmark",
    "d",
    "k",
    "mode",
    "theta",
    "max_levels",
    "max_dofs",
    "tol",
    "corner_moments",
    "output_dir",
    "length",
    "c_disp",
    "c_q",
    "line_samples",
    "domain",
    "curvature",
    "nu",
    "load_f",
    "load_p",
    "point_load",
    "bc_left",
    "bc_right",
    "bc_bottom",
    "bc_top",
];

/// Parses configuration text. Later lines override earlier ones.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    config.apply_lines(text)?;
    config.validate()?;
    Ok(config)
}

fn numbers<const N: usize>(value: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers"));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse::<f64>().map_err(|e| e.to_string())?;
        if !slot.is_finite() {
            return Err("numbers must be finite".into());
        }
    }
    Ok(out)
}

fn boolean(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

impl RunConfig {
    /// Applies `key = value` lines on top of the current values.
    pub fn apply_lines(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', found '{content}'"),
            })?;
            self.set(line, key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one key; `line` is used in error messages.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line, key });
        }
        let bad = |message: String| ConfigError::Value {
            line,
            key: key.clone(),
            value: value.to_string(),
            message,
        };
        let float = |v: &str| -> Result<f64, ConfigError> {
            let x: f64 = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(bad("must be finite".into()))
            }
        };
        let integer = |v: &str| -> Result<usize, ConfigError> {
            v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))
        };
        match key.as_str() {
            "benchmark" => {
                self.benchmark = Benchmark::from_name(value).ok_or_else(|| {
                    let names: Vec<&str> = Benchmark::ALL.iter().map(|b| b.name()).collect();
                    bad(format!("expected one of {}", names.join(", ")))
                })?
            }
            "d" => self.d = Some(float(value)?),
            "k" => self.k = integer(value)?,
            "mode" => self.mode = RefinementMode::parse(value).map_err(|e| bad(e.to_string()))?,
            "theta" => self.theta = float(value)?,
            "max_levels" => self.max_levels = integer(value)?,
            "max_dofs" => self.max_dofs = integer(value)?,
            "tol" => self.tol = float(value)?,
            "corner_moments" => self.corner_moments = boolean(value).map_err(bad)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "length" => self.length = Some(float(value)?),
            "c_disp" => self.c_disp = Some(numbers::<3>(value).map_err(bad)?),
            "c_q" => self.c_q = Some(float(value)?),
            "line_samples" => self.line_samples = integer(value)?,
            "domain" => {
                let [x0, x1, y0, y1] = numbers::<4>(value).map_err(bad)?;
                self.custom.domain = Some(Rect::new(x0, x1, y0, y1).map_err(|e| bad(e.to_string()))?);
            }
            "curvature" => self.custom.curvature = Some(numbers::<3>(value).map_err(bad)?),
            "nu" => self.custom.nu = float(value)?,
            "load_f" => self.custom.load_f = float(value)?,
            "load_p" => self.custom.load_p = numbers::<2>(value).map_err(bad)?,
            "point_load" => self.custom.point_load = Some(numbers::<3>(value).map_err(bad)?),
            side => {
                let index = match side {
                    "bc_left" => Side::Left,
                    "bc_right" => Side::Right,
                    "bc_bottom" => Side::Bottom,
                    _ => Side::Top,
                }
                .index();
                self.custom.bc[index] = Some(SideBc::parse(value).map_err(|e| bad(e.to_string()))?);
            }
        }
        Ok(())
    }

    /// Checks ranges and the presence of the custom geometry.
    pub fn validate(&self) -> Result<(), ConfigError> {
        TraceOptions::new(self.k)?;
        self.adaptive_config()?.validate()?;
        if let Some(d) = self.d {
            if !(d > 0.0 && d <= 1.0) {
                return Err(ConfigError::Invalid(format!("d = {d} must lie in (0, 1]")));
            }
        }
        if self.line_samples < 2 {
            return Err(ConfigError::Invalid("line_samples must be at least 2".into()));
        }
        if self.benchmark == Benchmark::Custom {
            let mut missing = Vec::new();
            if self.custom.domain.is_none() {
                missing.push("domain");
            }
            if self.custom.curvature.is_none() {
                missing.push("curvature");
            }
            if self.d.is_none() {
                missing.push("d");
            }
            if !missing.is_empty() {
                return Err(ConfigError::Invalid(format!(
                    "the custom benchmark requires the keys: {}",
                    missing.join(", ")
                )));
            }
        } else if self.custom != CustomSpec::default() {
            return Err(ConfigError::Invalid(format!(
                "geometry, load and boundary keys only apply to the custom benchmark, not {}",
                self.benchmark
            )));
        }
        Ok(())
    }

    pub fn thickness(&self) -> f64 {
        self.d.or(self.benchmark.default_thickness()).unwrap_or(f64::NAN)
    }

    pub fn adaptive_config(&self) -> Result<AdaptiveConfig, ConfigError> {
        let options = TraceOptions::new(self.k)?.with_corner_moments(self.corner_moments);
        Ok(AdaptiveConfig {
            mode: self.mode,
            theta: self.theta,
            max_levels: self.max_levels,
            max_dofs: self.max_dofs,
            options,
            tol: self.tol,
        })
    }

    /// The problem with all overrides applied.
    pub fn problem(&self) -> Result<ShellProblem, ConfigError> {
        let d = self.thickness();
        let mut problem = if self.benchmark == Benchmark::Custom {
            let c = &self.custom;
            let rect = c.domain.ok_or_else(|| ConfigError::Invalid("missing domain".into()))?;
            let [b11, b12, b22] = c.curvature.ok_or_else(|| ConfigError::Invalid("missing curvature".into()))?;
            let load = match c.point_load {
                Some([x, y, weight]) => {
                    if c.load_f != 0.0 {
                        return Err(ConfigError::Invalid("point_load and load_f are exclusive".into()));
                    }
                    Load::Point { at: [x, y], weight }
                }
                None => Load::Constant { f: c.load_f, p: c.load_p },
            };
            let side = |s: Side| c.bc[s.index()].unwrap_or(SideBc::FREE);
            let bc = BcTable::new(side(Side::Left), side(Side::Right), side(Side::Bottom), side(Side::Top));
            ShellProblem::custom(rect, [[b11, b12], [b12, b22]], d, c.nu, load, bc)?
        } else {
            self.benchmark.problem(d)?
        };
        if let Some(length) = self.length {
            if problem.benchmark == Benchmark::Custom {
                problem.scalings = generic_scalings(&problem.b, d, length);
            } else {
                problem.scalings.length = length;
                problem.scalings.c_q = generic_c_q(&problem.b, d, length);
            }
        }
        if let Some([a, b, c]) = self.c_disp {
            problem.scalings.c_disp = [[a, b], [b, c]];
        }
        if let Some(c_q) = self.c_q {
            problem.scalings.c_q = c_q;
        }
        problem.validate()?;
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.theta, 0.25);
        assert_eq!(c.k, 0);
        assert_eq!(c.mode, RefinementMode::Adaptive);
        assert_eq!(c.tol, 1e-10);
    }

    #[test]
    fn comments_and_overrides() {
        let c = parse_config("# roof\nbenchmark = cyl_free # inline\nk=1\nd = 1e-3\nk = 0\n").unwrap();
        assert_eq!(c.benchmark, Benchmark::CylFree);
        assert_eq!(c.k, 0);
        assert_eq!(c.d, Some(1e-3));
    }

    #[test]
    fn dashes_and_underscores_are_equivalent() {
        let c = parse_config("max-levels = 3\nmax_dofs=100").unwrap();
        assert_eq!((c.max_levels, c.max_dofs), (3, 100));
    }
}
