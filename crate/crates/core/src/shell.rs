//! Shallow shell problem data: curvature, material law, loads, boundary
//! conditions and the scaling parameters of the test norm.
//!
//! All quantities are in scaled variables: the Young modulus and the physical
//! load magnitude enter only through the load functions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{DpgError, Result};
use crate::mesh::{Rect, Side};
use crate::tensor::{self, Mat2, Vec2};

/// Plane-stress law `C eps = (1/(1 - nu^2)) [(1 - nu) eps + nu tr(eps) I]`.
pub fn apply_c(eps: &Mat2, nu: f64) -> Result<Mat2> {
    check_nu(nu)?;
    let s = 1.0 / (1.0 - nu * nu);
    let tr = tensor::trace(eps);
    Ok([
        [s * ((1.0 - nu) * eps[0][0] + nu * tr), s * (1.0 - nu) * eps[0][1]],
        [s * (1.0 - nu) * eps[1][0], s * ((1.0 - nu) * eps[1][1] + nu * tr)],
    ])
}

/// Inverse law `C^{-1} sigma = (1 + nu) sigma - nu tr(sigma) I`.
pub fn apply_cinv(sigma: &Mat2, nu: f64) -> Result<Mat2> {
    check_nu(nu)?;
    let tr = tensor::trace(sigma);
    Ok([
        [(1.0 + nu) * sigma[0][0] - nu * tr, (1.0 + nu) * sigma[0][1]],
        [(1.0 + nu) * sigma[1][0], (1.0 + nu) * sigma[1][1] - nu * tr],
    ])
}

fn check_nu(nu: f64) -> Result<()> {
    if nu.is_finite() && nu.abs() < 1.0 {
        Ok(())
    } else {
        Err(DpgError::SingularMaterial(nu))
    }
}

/// Kinematic constraints on one side of the domain; `true` means the
/// quantity is held at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SideBc {
    pub u1: bool,
    pub u2: bool,
    pub w: bool,
    pub dnw: bool,
}

impl SideBc {
    pub const FREE: SideBc = SideBc { u1: false, u2: false, w: false, dnw: false };
    pub const CLAMPED: SideBc = SideBc { u1: true, u2: true, w: true, dnw: true };

    pub fn u(&self, component: usize) -> bool {
        if component == 0 {
            self.u1
        } else {
            self.u2
        }
    }

    /// Parses a comma-separated list drawn from `u1, u2, w, dn`, or one of
    /// the words `free` and `clamped`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bc = SideBc::FREE;
        for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token {
                "free" | "none" => {}
                "clamped" => bc = SideBc::CLAMPED,
                "u1" => bc.u1 = true,
                "u2" => bc.u2 = true,
                "u" => {
                    bc.u1 = true;
                    bc.u2 = true;
                }
                "w" => bc.w = true,
                "dn" | "dnw" => bc.dnw = true,
                other => {
                    return Err(DpgError::Configuration(format!(
                        "unknown boundary constraint '{other}'"
                    )))
                }
            }
        }
        Ok(bc)
    }
}

impl fmt::Display for SideBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.u1, "u1"), (self.u2, "u2"), (self.w, "w"), (self.dnw, "dn")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, name)| *name)
            .collect();
        if names.is_empty() {
            write!(f, "free")
        } else {
            write!(f, "{}", names.join(","))
        }
    }
}

/// Kinematic boundary conditions for the four sides of the rectangle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BcTable {
    sides: [SideBc; 4],
}

impl BcTable {
    pub fn new(left: SideBc, right: SideBc, bottom: SideBc, top: SideBc) -> Self {
        BcTable { sides: [left, right, bottom, top] }
    }

    pub fn uniform(bc: SideBc) -> Self {
        BcTable { sides: [bc; 4] }
    }

    pub fn side(&self, side: Side) -> SideBc {
        self.sides[side.index()]
    }

    pub fn set(&mut self, side: Side, bc: SideBc) {
        self.sides[side.index()] = bc;
    }
}

/// Pointwise distributed load function returning `(f, p)`.
pub type LoadFn = Arc<dyn Fn(Vec2) -> (f64, Vec2) + Send + Sync>;

/// Vertical load `f` and tangential load `p`.
#[derive(Clone)]
pub enum Load {
    /// Constant `f` and `p`.
    Constant { f: f64, p: Vec2 },
    /// Self-weight of a cylindrical roof of radius `radius`:
    /// `p = (0, a sin(y/R))`, `f = -a cos(y/R)` with `a = g / (d E)`.
    Roof { amplitude: f64, radius: f64 },
    /// `f = cos(2y)`, `p = 0`.
    CosTwoY,
    /// Unit point load `f = weight * delta_at`, `p = 0`.
    Point { at: Vec2, weight: f64 },
    /// Arbitrary smooth load.
    Function(LoadFn),
}

impl fmt::Debug for Load {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Load::Constant { f: fv, p } => write!(f, "Constant {{ f: {fv}, p: {p:?} }}"),
            Load::Roof { amplitude, radius } => {
                write!(f, "Roof {{ amplitude: {amplitude}, radius: {radius} }}")
            }
            Load::CosTwoY => write!(f, "CosTwoY"),
            Load::Point { at, weight } => write!(f, "Point {{ at: {at:?}, weight: {weight} }}"),
            Load::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Load data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadValue {
    Distributed { f: f64, p: Vec2 },
    /// The vertical load is a point load; `p` is still distributed.
    Point { at: Vec2, weight: f64, p: Vec2 },
}

impl Load {
    pub fn eval(&self, x: Vec2) -> LoadValue {
        match self {
            Load::Constant { f, p } => LoadValue::Distributed { f: *f, p: *p },
            Load::Roof { amplitude, radius } => {
                let phi = x[1] / radius;
                LoadValue::Distributed {
                    f: -amplitude * phi.cos(),
                    p: [0.0, amplitude * phi.sin()],
                }
            }
            Load::CosTwoY => LoadValue::Distributed { f: (2.0 * x[1]).cos(), p: [0.0, 0.0] },
            Load::Point { at, weight } => LoadValue::Point { at: *at, weight: *weight, p: [0.0, 0.0] },
            Load::Function(func) => {
                let (f, p) = func(x);
                LoadValue::Distributed { f, p }
            }
        }
    }

    /// Distributed part `(f, p)` at `x`; a point load contributes nothing here.
    pub fn distributed(&self, x: Vec2) -> (f64, Vec2) {
        match self.eval(x) {
            LoadValue::Distributed { f, p } => (f, p),
            LoadValue::Point { p, .. } => (0.0, p),
        }
    }

    pub fn point(&self) -> Option<(Vec2, f64)> {
        match self {
            Load::Point { at, weight } => Some((*at, *weight)),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Load::Constant { f, p } => *f == 0.0 && p[0] == 0.0 && p[1] == 0.0,
            Load::Roof { amplitude, .. } => *amplitude == 0.0,
            Load::Point { weight, .. } => *weight == 0.0,
            _ => false,
        }
    }
}

/// Parameters of the scaled test norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalings {
    /// Length scale `D`.
    pub length: f64,
    /// Displacement weight `C_disp`, symmetric positive definite.
    pub c_disp: Mat2,
    /// Weight `c_Q` of the skew test block.
    pub c_q: f64,
}

impl Scalings {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(DpgError::InvalidParameter(format!(
                "length scale D = {} must be positive",
                self.length
            )));
        }
        if !tensor::is_spd(&self.c_disp) {
            return Err(DpgError::InvalidParameter(format!(
                "C_disp = {:?} is not symmetric positive definite",
                self.c_disp
            )));
        }
        if !(self.c_q > 0.0 && self.c_q <= 1.0) {
            return Err(DpgError::InvalidParameter(format!(
                "c_Q = {} outside (0, 1]",
                self.c_q
            )));
        }
        Ok(())
    }
}

/// The benchmark problems with fixed data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    ScordelisLo,
    CylClamped,
    CylFree,
    CylSliding,
    PointElliptic,
    PointParabolic,
    PointHyperbolic,
    Custom,
}

impl Benchmark {
    pub const ALL: [Benchmark; 8] = [
        Benchmark::ScordelisLo,
        Benchmark::CylClamped,
        Benchmark::CylFree,
        Benchmark::CylSliding,
        Benchmark::PointElliptic,
        Benchmark::PointParabolic,
        Benchmark::PointHyperbolic,
        Benchmark::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::ScordelisLo => "scordelis_lo",
            Benchmark::CylClamped => "cyl_clamped",
            Benchmark::CylFree => "cyl_free",
            Benchmark::CylSliding => "cyl_sliding",
            Benchmark::PointElliptic => "point_elliptic",
            Benchmark::PointParabolic => "point_parabolic",
            Benchmark::PointHyperbolic => "point_hyperbolic",
            Benchmark::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    /// Thickness used when none is given; `None` if the benchmark has no default.
    pub fn default_thickness(self) -> Option<f64> {
        match self {
            Benchmark::ScordelisLo => Some(scordelis_lo::THICKNESS),
            Benchmark::PointElliptic | Benchmark::PointParabolic | Benchmark::PointHyperbolic => Some(1e-2),
            Benchmark::CylClamped | Benchmark::CylFree => Some(1e-2),
            Benchmark::CylSliding => Some(1e-3),
            Benchmark::Custom => None,
        }
    }

    /// Builds the benchmark problem with thickness `d`.
    pub fn problem(self, d: f64) -> Result<ShellProblem> {
        let cylinder_rect = || Rect::new(-1.0, 1.0, 0.0, PI / 4.0);
        let square = || Rect::new(-1.0, 1.0, -1.0, 1.0);
        let cyl_b = [[0.0, 0.0], [0.0, 1.0]];
        let (rect, b, load, bc) = match self {
            Benchmark::ScordelisLo => {
                let r = scordelis_lo::RADIUS;
                let rect = Rect::new(0.0, r, 0.0, scordelis_lo::ALPHA * r)?;
                let amplitude = scordelis_lo::GRAVITY / (d * scordelis_lo::YOUNG);
                let bc = BcTable::new(
                    SideBc { u1: true, dnw: true, ..SideBc::FREE },
                    SideBc { u2: true, w: true, ..SideBc::FREE },
                    SideBc { u2: true, dnw: true, ..SideBc::FREE },
                    SideBc::FREE,
                );
                (rect, [[0.0, 0.0], [0.0, 1.0 / r]], Load::Roof { amplitude, radius: r }, bc)
            }
            Benchmark::CylClamped | Benchmark::CylFree | Benchmark::CylSliding => {
                let ends = match self {
                    Benchmark::CylClamped => SideBc::CLAMPED,
                    Benchmark::CylSliding => SideBc { w: true, ..SideBc::FREE },
                    _ => SideBc::FREE,
                };
                let bc = BcTable::new(
                    ends,
                    ends,
                    SideBc { u2: true, dnw: true, ..SideBc::FREE },
                    SideBc { u1: true, w: true, ..SideBc::FREE },
                );
                (cylinder_rect()?, cyl_b, Load::CosTwoY, bc)
            }
            Benchmark::PointElliptic | Benchmark::PointParabolic | Benchmark::PointHyperbolic => {
                let (b, vertical, horizontal) = match self {
                    Benchmark::PointElliptic => (
                        tensor::IDENTITY,
                        SideBc { u2: true, w: true, ..SideBc::FREE },
                        SideBc { u1: true, w: true, ..SideBc::FREE },
                    ),
                    Benchmark::PointParabolic => (
                        cyl_b,
                        SideBc { u2: true, w: true, ..SideBc::FREE },
                        SideBc { u1: true, w: true, ..SideBc::FREE },
                    ),
                    _ => (
                        [[0.0, 1.0], [1.0, 0.0]],
                        SideBc { u1: true, w: true, ..SideBc::FREE },
                        SideBc { u2: true, w: true, ..SideBc::FREE },
                    ),
                };
                let bc = BcTable::new(vertical, vertical, horizontal, horizontal);
                (square()?, b, Load::Point { at: [0.0, 0.0], weight: 1.0 }, bc)
            }
            Benchmark::Custom => {
                return Err(DpgError::Configuration(
                    "the custom problem needs explicit geometry, curvature and loads".into(),
                ))
            }
        };
        let scalings = select_scalings(&rect, &b, d, self);
        let problem = ShellProblem { rect, b, d, nu: 0.0, load, bc, scalings, benchmark: self };
        problem.validate()?;
        Ok(problem)
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constants of the cylindrical roof benchmark.
pub mod scordelis_lo {
    pub const RADIUS: f64 = 25.0;
    pub const ALPHA: f64 = 2.0 * std::f64::consts::PI / 9.0;
    pub const THICKNESS: f64 = 0.25;
    pub const YOUNG: f64 = 4.32e8;
    pub const GRAVITY: f64 = 90.0;
    /// Reference value of the corner displacement functional.
    pub const REFERENCE_VALUE: f64 = 0.3086;
}

/// Scaling parameters for a problem.
///
/// The generic rule takes `D = diam(Omega)`, `C_disp = c I` with
/// `c = min{1, d / (|B| D^2)}`; the benchmarks override `D` and `C_disp`.
/// Always `c_Q = min{1, d^2 |B|^{-2} D^{-4}}`. Here `|B|` is the largest
/// absolute entry and `min{1, 1/0} = 1`.
pub fn select_scalings(rect: &Rect, b: &Mat2, d: f64, kind: Benchmark) -> Scalings {
    let diag = |a: f64, c: f64| [[a, 0.0], [0.0, c]];
    let (length, c_disp) = match kind {
        Benchmark::ScordelisLo => {
            let r = scordelis_lo::RADIUS;
            (r, diag(1.0, d / r))
        }
        Benchmark::CylClamped => (1.0, diag(1.0, d)),
        Benchmark::CylFree | Benchmark::CylSliding => (1.0, diag(d, d)),
        Benchmark::PointElliptic | Benchmark::PointParabolic => (1.0, diag(d, d)),
        Benchmark::PointHyperbolic => (1.0, diag(1.0, 1.0)),
        Benchmark::Custom => return generic_scalings(b, d, rect.diameter()),
    };
    Scalings { length, c_disp, c_q: generic_c_q(b, d, length) }
}

fn capped(b_norm: f64, value: f64) -> f64 {
    if b_norm == 0.0 {
        1.0
    } else {
        value.min(1.0)
    }
}

/// `c_Q = min{1, d^2 |B|^{-2} D^{-4}}`.
pub fn generic_c_q(b: &Mat2, d: f64, length: f64) -> f64 {
    let b_norm = tensor::max_abs(b);
    capped(b_norm, d * d / (b_norm * b_norm * length.powi(4)))
}

/// The generic rule for a given length scale `D`.
pub fn generic_scalings(b: &Mat2, d: f64, length: f64) -> Scalings {
    let b_norm = tensor::max_abs(b);
    let c = capped(b_norm, d / (b_norm * length * length));
    Scalings { length, c_disp: [[c, 0.0], [0.0, c]], c_q: generic_c_q(b, d, length) }
}

/// A complete shallow shell problem in scaled variables.
#[derive(Debug, Clone)]
pub struct ShellProblem {
    pub rect: Rect,
    /// Curvature tensor `B`.
    pub b: Mat2,
    /// Scaled thickness `d`.
    pub d: f64,
    /// Poisson ratio.
    pub nu: f64,
    pub load: Load,
    pub bc: BcTable,
    pub scalings: Scalings,
    pub benchmark: Benchmark,
}

impl ShellProblem {
    /// Custom problem with generic scalings.
    pub fn custom(rect: Rect, b: Mat2, d: f64, nu: f64, load: Load, bc: BcTable) -> Result<Self> {
        let scalings = select_scalings(&rect, &b, d, Benchmark::Custom);
        let problem = ShellProblem { rect, b, d, nu, load, bc, scalings, benchmark: Benchmark::Custom };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        self.rect.validate()?;
        if !tensor::is_symmetric(&self.b) || self.b.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DpgError::InvalidParameter(format!(
                "curvature tensor {:?} must be finite and symmetric",
                self.b
            )));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(DpgError::InvalidParameter(format!(
                "thickness d = {} must be positive",
                self.d
            )));
        }
        check_nu(self.nu)?;
        self.scalings.validate()?;
        if let Some((at, _)) = self.load.point() {
            if !self.rect.contains(at) {
                return Err(DpgError::Configuration(format!(
                    "point load location {at:?} lies outside the domain"
                )));
            }
        }
        Ok(())
    }

    pub fn eval_loads(&self, x: Vec2) -> LoadValue {
        self.load.eval(x)
    }

    pub fn apply_c(&self, eps: &Mat2) -> Mat2 {
        apply_c(eps, self.nu).expect("validated Poisson ratio")
    }

    pub fn apply_cinv(&self, sigma: &Mat2) -> Mat2 {
        apply_cinv(sigma, self.nu).expect("validated Poisson ratio")
    }
}
