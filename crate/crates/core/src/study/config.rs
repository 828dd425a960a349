//! Study configuration: flat `section.key = value` text or the equivalent JSON.
//!
//! ```text
//! study.kind = converge
//! geometry.r0 = 1
//! geometry.R = 2
//! geometry.h = 0.1 0.05 0.025 0.0125
//! materials.mu = 1 2 3            # exterior membrane core
//! materials.q_e = 1 -1            # re im
//! boundary.mode = 1 0.5 0         # k re im, repeatable
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotic_model::{zm_hypothesis_ratio, JumpForm};
use crate::full_model::{GridSpec, MaterialSet};
use crate::geometry::CircularGeometry;
use crate::spectral::BoundarySpectrum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Single,
    Converge,
    ZmSweep,
    CellNeumann,
    Diagnostics,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Single => "single",
            StudyKind::Converge => "converge",
            StudyKind::ZmSweep => "zm_sweep",
            StudyKind::CellNeumann => "cell_neumann",
            StudyKind::Diagnostics => "diagnostics",
        }
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "single" | "solve" => StudyKind::Single,
            "converge" => StudyKind::Converge,
            "zm_sweep" | "zm-sweep" => StudyKind::ZmSweep,
            "cell_neumann" | "cell-neumann" => StudyKind::CellNeumann,
            "diagnostics" => StudyKind::Diagnostics,
            other => {
                return Err(Error::config(
                    "study.kind",
                    format!("unknown study kind `{other}`"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTarget {
    /// Neumann data on the outer circle.
    Outer,
    /// Neumann data on the outer membrane circle of an isolated cell.
    Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryBlock {
    pub r0: f64,
    #[serde(rename = "R")]
    pub outer_radius: f64,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialsBlock {
    /// Exterior, membrane, core.
    pub mu: [f64; 3],
    pub q_e: [f64; 2],
    pub q_m: [f64; 2],
    pub q_c: [f64; 2],
    pub zm_zero: bool,
    pub biological: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficient {
    pub k: i32,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBlock {
    pub modes: Vec<ModeCoefficient>,
    pub target: BoundaryTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverBlock {
    #[serde(rename = "K")]
    pub k_max: usize,
    pub n_core: usize,
    pub n_membrane: usize,
    pub n_exterior: usize,
    /// Grid doublings allowed to bring the discretization error under the threshold.
    pub max_doublings: u32,
    pub jump_form: JumpForm,
    /// Largest accepted ratio of discretization estimate to model error.
    pub subdominance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZmBlock {
    /// `|z_m|` values, decreasing.
    pub values: Vec<f64>,
    /// Direction of `z_m` in the complex plane; normalized before use.
    pub direction: [f64; 2],
    /// Membrane thickness of the `|z_m|` sweep.
    pub h: f64,
    /// `z_m` used for the thickness sweep of the `z_m = 0` asymptotics.
    pub tiny: [f64; 2],
    pub hypothesis_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBlock {
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub geometry: GeometryBlock,
    pub materials: MaterialsBlock,
    pub boundary: BoundaryBlock,
    pub solver: SolverBlock,
    pub zm: ZmBlock,
    pub output: OutputBlock,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            kind: StudyKind::Converge,
            geometry: GeometryBlock {
                r0: 1.0,
                outer_radius: 2.0,
                h: vec![0.1, 0.05, 0.025, 0.0125],
            },
            materials: MaterialsBlock {
                mu: [1.0, 2.0, 3.0],
                q_e: [1.0, -1.0],
                q_m: [0.8, -0.5],
                q_c: [1.5, -2.0],
                zm_zero: false,
                biological: false,
            },
            boundary: BoundaryBlock {
                modes: [(1, 0.5), (-1, 0.5), (3, 0.25), (-3, 0.25)]
                    .iter()
                    .map(|&(k, re)| ModeCoefficient { k, re, im: 0.0 })
                    .collect(),
                target: BoundaryTarget::Outer,
            },
            solver: SolverBlock {
                k_max: 8,
                n_core: 512,
                n_membrane: 64,
                n_exterior: 512,
                max_doublings: 3,
                jump_form: JumpForm::Reduced,
                subdominance: 0.01,
            },
            zm: ZmBlock {
                values: vec![1e-2, 5e-3, 2.5e-3, 1e-3],
                direction: [1.0, -1.0],
                h: 0.05,
                tiny: [1e-8, -1e-8],
                hypothesis_bound: 10.0,
            },
            output: OutputBlock { dir: "out".into() },
        }
    }
}

fn parse_f64(field: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::config(field, format!("`{v}` is not a number")))
}

fn parse_list(field: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| parse_f64(field, t)).collect()
}

fn parse_fixed<const N: usize>(field: &str, v: &str) -> Result<[f64; N]> {
    let vals = parse_list(field, v)?;
    vals.try_into().map_err(|vals: Vec<f64>| {
        Error::config(field, format!("expected {N} numbers, got {}", vals.len()))
    })
}

fn parse_usize(field: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::config(field, format!("`{v}` is not a non-negative integer")))
}

fn parse_bool(field: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(field, format!("`{v}` is not a boolean"))),
    }
}

fn parse_mode(field: &str, v: &str) -> Result<ModeCoefficient> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::config(
            field,
            format!("expected `k re im`, got `{v}`"),
        ));
    }
    let k = parts[0].parse::<i32>().map_err(|_| {
        Error::config(
            field,
            format!("mode index `{}` is not an integer", parts[0]),
        )
    })?;
    Ok(ModeCoefficient {
        k,
        re: parse_f64(field, parts[1])?,
        im: parse_f64(field, parts[2])?,
    })
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

impl StudyConfig {
    /// Flat text or JSON (anything whose first non-blank character is `{`).
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let cfg: StudyConfig = serde_json::from_str(text)?;
            return Ok(cfg);
        }
        let mut cfg = StudyConfig::default();
        let mut modes_seen = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", no + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            let (key, value) = (key.trim(), value.trim());
            let tag = |e: Error| match e {
                Error::Config { field, message } => Error::Config {
                    field: format!("line {}: {field}", no + 1),
                    message,
                },
                other => other,
            };
            if key == "boundary.mode" {
                if !modes_seen {
                    cfg.boundary.modes.clear();
                    modes_seen = true;
                }
                cfg.boundary
                    .modes
                    .push(parse_mode(key, value).map_err(tag)?);
            } else {
                cfg.set(key, value).map_err(tag)?;
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Set one dotted key. `boundary.mode` replaces the whole mode list; separate
    /// several entries with `;`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "study.kind" => self.kind = v.parse()?,
            "geometry.r0" => self.geometry.r0 = parse_f64(key, v)?,
            "geometry.R" => self.geometry.outer_radius = parse_f64(key, v)?,
            "geometry.h" => self.geometry.h = parse_list(key, v)?,
            "materials.mu" => self.materials.mu = parse_fixed(key, v)?,
            "materials.q_e" => self.materials.q_e = parse_fixed(key, v)?,
            "materials.q_m" => self.materials.q_m = parse_fixed(key, v)?,
            "materials.q_c" => self.materials.q_c = parse_fixed(key, v)?,
            "materials.zm_zero" => self.materials.zm_zero = parse_bool(key, v)?,
            "materials.biological" => self.materials.biological = parse_bool(key, v)?,
            "boundary.mode" => {
                self.boundary.modes = v
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_mode(key, s))
                    .collect::<Result<_>>()?
            }
            "boundary.target" => {
                self.boundary.target = match v {
                    "outer" => BoundaryTarget::Outer,
                    "cell" => BoundaryTarget::Cell,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("`{v}` is not `outer` or `cell`"),
                        ))
                    }
                }
            }
            "solver.K" => self.solver.k_max = parse_usize(key, v)?,
            "solver.n_core" => self.solver.n_core = parse_usize(key, v)?,
            "solver.n_membrane" => self.solver.n_membrane = parse_usize(key, v)?,
            "solver.n_exterior" => self.solver.n_exterior = parse_usize(key, v)?,
            "solver.max_doublings" => self.solver.max_doublings = parse_usize(key, v)? as u32,
            "solver.jump_form" => {
                self.solver.jump_form = v
                    .parse()
                    .map_err(|e: Error| Error::config(key, e.to_string()))?
            }
            "solver.subdominance" => self.solver.subdominance = parse_f64(key, v)?,
            "zm.values" => self.zm.values = parse_list(key, v)?,
            "zm.direction" => self.zm.direction = parse_fixed(key, v)?,
            "zm.h" => self.zm.h = parse_f64(key, v)?,
            "zm.tiny" => self.zm.tiny = parse_fixed(key, v)?,
            "zm.hypothesis_bound" => self.zm.hypothesis_bound = parse_f64(key, v)?,
            "output.dir" => self.output.dir = v.to_string(),
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must be `key=value`"))?;
        self.set(k.trim(), v)
    }

    /// Flat text form; parsing it gives back an equal config.
    pub fn to_flat(&self) -> String {
        let mut s = String::new();
        let m = &self.materials;
        let z = &self.zm;
        let sv = &self.solver;
        let _ = writeln!(s, "study.kind = {}", self.kind.name());
        let _ = writeln!(s, "geometry.r0 = {}", self.geometry.r0);
        let _ = writeln!(s, "geometry.R = {}", self.geometry.outer_radius);
        let _ = writeln!(s, "geometry.h = {}", join(&self.geometry.h));
        let _ = writeln!(s, "materials.mu = {}", join(&m.mu));
        let _ = writeln!(s, "materials.q_e = {}", join(&m.q_e));
        let _ = writeln!(s, "materials.q_m = {}", join(&m.q_m));
        let _ = writeln!(s, "materials.q_c = {}", join(&m.q_c));
        let _ = writeln!(s, "materials.zm_zero = {}", m.zm_zero);
        let _ = writeln!(s, "materials.biological = {}", m.biological);
        for c in &self.boundary.modes {
            let _ = writeln!(s, "boundary.mode = {} {} {}", c.k, c.re, c.im);
        }
        let target = match self.boundary.target {
            BoundaryTarget::Outer => "outer",
            BoundaryTarget::Cell => "cell",
        };
        let _ = writeln!(s, "boundary.target = {target}");
        let _ = writeln!(s, "solver.K = {}", sv.k_max);
        let _ = writeln!(s, "solver.n_core = {}", sv.n_core);
        let _ = writeln!(s, "solver.n_membrane = {}", sv.n_membrane);
        let _ = writeln!(s, "solver.n_exterior = {}", sv.n_exterior);
        let _ = writeln!(s, "solver.max_doublings = {}", sv.max_doublings);
        let _ = writeln!(s, "solver.jump_form = {}", sv.jump_form.name());
        let _ = writeln!(s, "solver.subdominance = {}", sv.subdominance);
        let _ = writeln!(s, "zm.values = {}", join(&z.values));
        let _ = writeln!(s, "zm.direction = {}", join(&z.direction));
        let _ = writeln!(s, "zm.h = {}", z.h);
        let _ = writeln!(s, "zm.tiny = {}", join(&z.tiny));
        let _ = writeln!(s, "zm.hypothesis_bound = {}", z.hypothesis_bound);
        let _ = writeln!(s, "output.dir = {}", self.output.dir);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.r0 > 0.0) {
            return Err(Error::config(
                "geometry.r0",
                format!("must be positive, got {}", g.r0),
            ));
        }
        if !(g.outer_radius > g.r0) {
            return Err(Error::config(
                "geometry.R",
                format!("must exceed r0 = {}", g.r0),
            ));
        }
        if g.h.is_empty() {
            return Err(Error::config(
                "geometry.h",
                "at least one thickness is required",
            ));
        }
        for &h in &g.h {
            self.check_thickness("geometry.h", h)?;
        }
        if matches!(
            self.kind,
            StudyKind::Converge | StudyKind::CellNeumann | StudyKind::ZmSweep
        ) {
            if g.h.len() < 3 {
                return Err(Error::config(
                    "geometry.h",
                    "a sweep needs at least 3 thicknesses",
                ));
            }
            if g.h.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::config(
                    "geometry.h",
                    "thicknesses must be strictly decreasing",
                ));
            }
        }
        self.grid()?;
        self.material_set()?;
        if self.materials.biological && self.materials.mu != [1.0, 1.0, 1.0] {
            return Err(Error::config(
                "materials.mu",
                format!(
                    "the biological regime requires mu = 1 1 1, got {}",
                    join(&self.materials.mu)
                ),
            ));
        }
        if let Some(c) = self
            .boundary
            .modes
            .iter()
            .find(|c| c.k.unsigned_abs() as usize > self.solver.k_max)
        {
            return Err(Error::config(
                "boundary.mode",
                format!(
                    "mode {} exceeds the truncation K = {}",
                    c.k, self.solver.k_max
                ),
            ));
        }
        if !(self.solver.subdominance > 0.0) {
            return Err(Error::config("solver.subdominance", "must be positive"));
        }
        if self.kind == StudyKind::ZmSweep {
            if !self.materials.biological {
                return Err(Error::config(
                    "materials.biological",
                    "the z_m sweep needs the biological flag",
                ));
            }
            let z = &self.zm;
            if z.values.len() < 3
                || z.values.iter().any(|&v| !(v > 0.0))
                || z.values.windows(2).any(|w| !(w[1] < w[0]))
            {
                return Err(Error::config(
                    "zm.values",
                    "need at least 3 positive, strictly decreasing magnitudes",
                ));
            }
            self.check_thickness("zm.h", z.h)?;
            for zm in self.zm_values()? {
                zm_hypothesis_ratio(zm, z.hypothesis_bound)
                    .map_err(|e| Error::config("zm.direction", e.to_string()))?;
            }
            zm_hypothesis_ratio(self.zm_tiny(), z.hypothesis_bound)
                .map_err(|e| Error::config("zm.tiny", e.to_string()))?;
        }
        Ok(())
    }

    fn check_thickness(&self, field: &str, h: f64) -> Result<()> {
        let g = &self.geometry;
        if !(h > 0.0 && h < g.r0) {
            return Err(Error::config(
                field,
                format!(
                    "h = {h} must satisfy 0 < h < h0 = 1/max|kappa| = r0 = {}",
                    g.r0
                ),
            ));
        }
        if self.boundary.target == BoundaryTarget::Outer && !(g.r0 + h < g.outer_radius) {
            return Err(Error::config(
                field,
                format!(
                    "r0 + h = {} must stay inside R = {}",
                    g.r0 + h,
                    g.outer_radius
                ),
            ));
        }
        Ok(())
    }

    pub fn geometry_for(&self, h: f64) -> Result<CircularGeometry> {
        match self.boundary.target {
            BoundaryTarget::Outer => {
                CircularGeometry::new(self.geometry.r0, h, self.geometry.outer_radius)
            }
            BoundaryTarget::Cell => CircularGeometry::cell(self.geometry.r0, h),
        }
    }

    /// Materials as configured; `zm_zero` sets `q_m = 0`.
    pub fn material_set(&self) -> Result<MaterialSet> {
        let m = &self.materials;
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        if m.zm_zero {
            let mut set = MaterialSet::new(m.mu, [c(m.q_e), Complex64::new(1.0, -1.0), c(m.q_c)])
                .map_err(|e| Error::config("materials", e.to_string()))?;
            set = set.with_zero_membrane();
            Ok(set)
        } else {
            MaterialSet::new(m.mu, [c(m.q_e), c(m.q_m), c(m.q_c)])
                .map_err(|e| Error::config("materials", e.to_string()))
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let s = &self.solver;
        GridSpec::new(s.n_core, s.n_membrane, s.n_exterior)
            .map_err(|e| Error::config("solver", e.to_string()))
    }

    /// Boundary coefficients on a circle of the given radius.
    pub fn spectrum(&self, radius: f64) -> Result<BoundarySpectrum> {
        let modes: Vec<(i32, Complex64)> = self
            .boundary
            .modes
            .iter()
            .map(|c| (c.k, Complex64::new(c.re, c.im)))
            .collect();
        BoundarySpectrum::from_modes(self.solver.k_max, radius, &modes)
            .map_err(|e| Error::config("boundary.mode", e.to_string()))
    }

    pub fn zm_direction(&self) -> Result<Complex64> {
        let d = Complex64::new(self.zm.direction[0], self.zm.direction[1]);
        if d.norm() == 0.0 {
            return Err(Error::config("zm.direction", "direction must be nonzero"));
        }
        Ok(d / d.norm())
    }

    pub fn zm_values(&self) -> Result<Vec<Complex64>> {
        let d = self.zm_direction()?;
        Ok(self.zm.values.iter().map(|&m| d * m).collect())
    }

    pub fn zm_tiny(&self) -> Complex64 {
        Complex64::new(self.zm.tiny[0], self.zm.tiny[1])
    }
}
