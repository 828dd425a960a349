//! The resolved three-region problem: core `[0, r0]`, membrane `[r0, r0 + h]`
//! and exterior `[r0 + h, R]`, with continuity of `u` and `(1/mu) u_r` across
//! both circles and Neumann data on the outer boundary.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::CircularGeometry;
use crate::radial_ode::{
    GreenCheck, InnerBoundary, InterfaceCondition, OuterBoundary, RadialModeSolution,
    RadialProblem, RadialSegment, SegmentProfile, MIN_SEGMENT_INTERVALS,
};
use crate::spectral::BoundarySpectrum;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Permeabilities `mu` and complex permittivities `q` of the exterior,
/// membrane and core. The PDE coefficient is `z = mu q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSet {
    pub mu_e: f64,
    pub mu_m: f64,
    pub mu_c: f64,
    pub q_e: Complex64,
    pub q_m: Complex64,
    pub q_c: Complex64,
    /// Membrane with `z_m = 0`; `q_m` is then forced to zero and exempt from
    /// the sign constraints.
    #[serde(default)]
    pub zm_zero: bool,
}

fn lossy_dielectric(q: Complex64) -> bool {
    q.re > 0.0 && q.im < 0.0
}

impl MaterialSet {
    /// `mu` and `q` ordered (exterior, membrane, core).
    pub fn new(mu: [f64; 3], q: [Complex64; 3]) -> Result<Self> {
        let m = MaterialSet {
            mu_e: mu[0],
            mu_m: mu[1],
            mu_c: mu[2],
            q_e: q[0],
            q_m: q[1],
            q_c: q[2],
            zm_zero: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(mu: f64, q: Complex64) -> Result<Self> {
        Self::new([mu; 3], [q; 3])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [
            ("mu_e", self.mu_e),
            ("mu_m", self.mu_m),
            ("mu_c", self.mu_c),
        ] {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {mu}"
                )));
            }
        }
        for (name, q) in [("q_e", self.q_e), ("q_c", self.q_c)] {
            if !lossy_dielectric(q) {
                return Err(Error::invalid(format!(
                    "{name} = {q} must have positive real part and negative imaginary part"
                )));
            }
        }
        if self.zm_zero {
            if self.q_m != ZERO {
                return Err(Error::invalid("z_m = 0 flag set but q_m is nonzero"));
            }
        } else if !lossy_dielectric(self.q_m) {
            return Err(Error::invalid(format!(
                "q_m = {} must have positive real part and negative imaginary part (or set the z_m = 0 flag)",
                self.q_m
            )));
        }
        Ok(())
    }

    /// Same materials with `q_m = 0` in the membrane, `mu_m` kept.
    pub fn with_zero_membrane(&self) -> Self {
        MaterialSet {
            q_m: ZERO,
            zm_zero: true,
            ..*self
        }
    }

    /// Replace the membrane permittivity so that `z_m` takes the given value.
    pub fn with_membrane_z(&self, z_m: Complex64) -> Result<Self> {
        let m = MaterialSet {
            q_m: z_m / self.mu_m,
            zm_zero: false,
            ..*self
        };
        m.validate()?;
        Ok(m)
    }

    pub fn z_e(&self) -> Complex64 {
        self.q_e * self.mu_e
    }

    pub fn z_m(&self) -> Complex64 {
        self.q_m * self.mu_m
    }

    pub fn z_c(&self) -> Complex64 {
        self.q_c * self.mu_c
    }

    pub fn mu(&self, region: Region) -> f64 {
        match region {
            Region::Core => self.mu_c,
            Region::Membrane => self.mu_m,
            Region::Exterior => self.mu_e,
        }
    }

    pub fn z(&self, region: Region) -> Complex64 {
        match region {
            Region::Core => self.z_c(),
            Region::Membrane => self.z_m(),
            Region::Exterior => self.z_e(),
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.mu_e == self.mu_m
            && self.mu_m == self.mu_c
            && self.q_e == self.q_m
            && self.q_m == self.q_c
    }

    pub fn has_unit_mu(&self) -> bool {
        self.mu_e == 1.0 && self.mu_m == 1.0 && self.mu_c == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Core,
    Membrane,
    Exterior,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Core => "core",
            Region::Membrane => "membrane",
            Region::Exterior => "exterior",
        }
    }
}

/// Interval counts per region; all must be even and at least 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_core: usize,
    pub n_membrane: usize,
    pub n_exterior: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_core: 512,
            n_membrane: 64,
            n_exterior: 512,
        }
    }
}

impl GridSpec {
    pub fn new(n_core: usize, n_membrane: usize, n_exterior: usize) -> Result<Self> {
        let g = GridSpec {
            n_core,
            n_membrane,
            n_exterior,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("n_core", self.n_core),
            ("n_membrane", self.n_membrane),
            ("n_exterior", self.n_exterior),
        ] {
            if n < MIN_SEGMENT_INTERVALS || n % 2 != 0 {
                return Err(Error::invalid(format!(
                    "{name} = {n} must be even and at least {MIN_SEGMENT_INTERVALS}"
                )));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: usize) -> Self {
        GridSpec {
            n_core: self.n_core * factor,
            n_membrane: self.n_membrane * factor,
            n_exterior: self.n_exterior * factor,
        }
    }

    pub fn intervals(&self, region: Region) -> usize {
        match region {
            Region::Core => self.n_core,
            Region::Membrane => self.n_membrane,
            Region::Exterior => self.n_exterior,
        }
    }
}

/// Segments for the geometric regions of `geom` (no exterior when the outer
/// boundary is the membrane's outer circle), with `(mu, z)` chosen per region.
pub(crate) fn layout(
    geom: &CircularGeometry,
    grid: &GridSpec,
    coeffs: impl Fn(Region) -> (f64, Complex64),
) -> Result<(Vec<RadialSegment>, Vec<Region>)> {
    grid.validate()?;
    let r0 = geom.r0();
    let r1 = r0 + geom.h();
    let mut regions = vec![Region::Core, Region::Membrane];
    if geom.outer_radius() > r1 {
        regions.push(Region::Exterior);
    }
    let bounds = [(0.0, r0), (r0, r1), (r1, geom.outer_radius())];
    let segments = regions
        .iter()
        .zip(bounds)
        .map(|(&reg, (a, b))| {
            let (mu, z) = coeffs(reg);
            RadialSegment::new(a, b, mu, z, grid.intervals(reg))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((segments, regions))
}

/// Solve every mode `-k_max..=k_max` in parallel; results are in mode order.
pub(crate) fn solve_all_modes<F>(k_max: usize, build: F) -> Result<Vec<RadialModeSolution>>
where
    F: Fn(i32) -> Result<RadialProblem> + Sync,
{
    let k_max = k_max as i32;
    (-k_max..=k_max)
        .into_par_iter()
        .map(|k| build(k)?.solve(k))
        .collect()
}

/// Per-mode radial profiles over a sequence of regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldExpansion {
    pub geometry: CircularGeometry,
    pub materials: MaterialSet,
    pub regions: Vec<Region>,
    k_max: usize,
    modes: Vec<RadialModeSolution>,
}

impl FieldExpansion {
    pub(crate) fn from_parts(
        geometry: CircularGeometry,
        materials: MaterialSet,
        regions: Vec<Region>,
        k_max: usize,
        modes: Vec<RadialModeSolution>,
    ) -> Self {
        debug_assert_eq!(modes.len(), 2 * k_max + 1);
        debug_assert!(modes.iter().all(|m| m.segments.len() == regions.len()));
        FieldExpansion {
            geometry,
            materials,
            regions,
            k_max,
            modes,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn modes(&self) -> impl Iterator<Item = (i32, &RadialModeSolution)> + '_ {
        self.modes.iter().map(|m| (m.k, m))
    }

    pub(crate) fn modes_mut(&mut self) -> impl Iterator<Item = &mut RadialModeSolution> + '_ {
        self.modes.iter_mut()
    }

    pub fn mode(&self, k: i32) -> Option<&RadialModeSolution> {
        let idx = k + self.k_max as i32;
        if idx < 0 {
            return None;
        }
        self.modes.get(idx as usize)
    }

    pub fn region_index(&self, region: Region) -> Option<usize> {
        self.regions.iter().position(|&r| r == region)
    }

    pub fn profile(&self, k: i32, region: Region) -> Option<&SegmentProfile> {
        let i = self.region_index(region)?;
        self.mode(k).map(|m| &m.segments[i])
    }

    /// `u(r, theta)`; at an interface the inner region's value is used.
    pub fn eval(&self, r: f64, theta: f64) -> Result<Complex64> {
        let mut acc = ZERO;
        for (k, m) in self.modes() {
            let v = m.value_at(r).ok_or_else(|| {
                Error::invalid(format!(
                    "r = {r} outside [0, {}]",
                    self.geometry.outer_radius()
                ))
            })?;
            acc += v * Complex64::from_polar(1.0, k as f64 * theta);
        }
        Ok(acc)
    }

    pub fn max_abs(&self) -> f64 {
        self.modes.iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|m| m.is_finite())
    }

    /// Largest `|value jump| + |flux jump|` mismatch over modes and interfaces.
    pub fn transmission_residual(&self) -> f64 {
        self.modes
            .iter()
            .flat_map(|m| m.interface_residuals())
            .map(|r| r.value + r.flux)
            .fold(0.0, f64::max)
    }

    /// `10 dr^2 max|u|`, with `dr` the largest spacing next to an interface
    /// (the one-sided derivative stencils are second order in that spacing).
    pub fn transmission_tolerance(&self) -> f64 {
        let dr = self
            .modes
            .first()
            .map(|m| {
                m.interface_residuals()
                    .iter()
                    .map(|r| r.spacing)
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0);
        10.0 * dr * dr * self.max_abs()
    }

    /// Discrete energy identity summed over modes with the `2 pi` angular factor.
    pub fn green_check(&self) -> GreenCheck {
        let mut energy = ZERO;
        let mut boundary = ZERO;
        let mut scale = 0.0;
        for m in &self.modes {
            let g = m.green_check();
            energy += g.energy;
            boundary += g.boundary;
            scale += g.energy.norm().max(g.boundary.norm());
        }
        let two_pi = 2.0 * PI;
        let rel = if scale > 0.0 {
            (energy - boundary).norm() / scale
        } else {
            0.0
        };
        GreenCheck {
            energy: energy * two_pi,
            boundary: boundary * two_pi,
            relative_residual: rel,
        }
    }

    /// `u^m(1, theta) - u^m(0, theta)`.
    pub fn transmembrane_potential(&self, theta: f64) -> Result<Complex64> {
        let i = self
            .region_index(Region::Membrane)
            .ok_or_else(|| Error::invalid("field has no membrane region"))?;
        Ok(self
            .modes()
            .map(|(k, m)| {
                let s = &m.segments[i];
                (s.last() - s.first()) * Complex64::from_polar(1.0, k as f64 * theta)
            })
            .sum())
    }

    pub fn same_layout(&self, other: &FieldExpansion) -> bool {
        self.k_max == other.k_max
            && self.regions == other.regions
            && self.modes.iter().zip(&other.modes).all(|(a, b)| {
                a.segments.iter().zip(&b.segments).all(|(s, t)| {
                    s.r.len() == t.r.len()
                        && (s.segment.a - t.segment.a).abs() <= 1e-12
                        && (s.segment.b - t.segment.b).abs() <= 1e-12
                })
            })
    }

    /// `a self + b other` on a shared grid; metadata is taken from `self`.
    pub fn combine(
        &self,
        a: Complex64,
        other: &FieldExpansion,
        b: Complex64,
    ) -> Result<FieldExpansion> {
        if !self.same_layout(other) {
            return Err(Error::invalid(
                "fields are on different grids; resample before combining",
            ));
        }
        let mut out = self.clone();
        for (m, o) in out.modes.iter_mut().zip(&other.modes) {
            for (s, t) in m.segments.iter_mut().zip(&o.segments) {
                for (u, v) in s.u.iter_mut().zip(&t.u) {
                    *u = *u * a + v * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &FieldExpansion) -> Result<FieldExpansion> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// `self + alpha other`.
    pub fn axpy(&self, alpha: Complex64, other: &FieldExpansion) -> Result<FieldExpansion> {
        self.combine(Complex64::new(1.0, 0.0), other, alpha)
    }

    /// Keep every other node, halving each segment's interval count.
    pub fn restrict(&self) -> Result<FieldExpansion> {
        let mut out = self.clone();
        for m in out.modes.iter_mut() {
            for s in m.segments.iter_mut() {
                if s.segment.n % 2 != 0 {
                    return Err(Error::invalid(
                        "cannot restrict a segment with an odd interval count",
                    ));
                }
                s.segment.n /= 2;
                s.r = s.r.iter().step_by(2).copied().collect();
                s.u = s.u.iter().step_by(2).copied().collect();
            }
        }
        Ok(out)
    }

    /// Rows `region,k,r,re,im` for every node of every mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "region,k,r,re,im")?;
        for m in &self.modes {
            for (s, reg) in m.segments.iter().zip(&self.regions) {
                for (r, u) in s.r.iter().zip(&s.u) {
                    writeln!(w, "{},{},{},{},{}", reg.name(), m.k, r, u.re, u.im)?;
                }
            }
        }
        Ok(())
    }
}

fn check_boundary_radius(phi: &BoundarySpectrum, radius: f64) -> Result<()> {
    if (phi.radius() - radius).abs() > 1e-12 * radius.max(1.0) {
        return Err(Error::invalid(format!(
            "boundary data given on radius {} but the boundary is at {radius}",
            phi.radius()
        )));
    }
    Ok(())
}

/// Resolved solve with Neumann data `phi` on the outer circle.
pub fn solve_full(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    phi: &BoundarySpectrum,
    grid: &GridSpec,
) -> Result<FieldExpansion> {
    materials.validate()?;
    check_boundary_radius(phi, geom.outer_radius())?;
    let (segments, regions) = layout(geom, grid, |r| (materials.mu(r), materials.z(r)))?;
    let interfaces: Vec<_> = segments[1..]
        .iter()
        .map(|s| InterfaceCondition::homogeneous(s.a))
        .collect();
    let modes = solve_all_modes(phi.k_max(), |k| {
        RadialProblem::new(
            segments.clone(),
            interfaces.clone(),
            InnerBoundary::Regular,
            OuterBoundary::Neumann(phi.coeff(k)),
        )
    })?;
    Ok(FieldExpansion::from_parts(
        *geom,
        *materials,
        regions,
        phi.k_max(),
        modes,
    ))
}

/// `u(r0 + h eta, theta)` from the membrane profiles.
pub fn eval_membrane_local(field: &FieldExpansion, eta: f64, theta: f64) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta = {eta} outside [0, 1]")));
    }
    let i = field
        .region_index(Region::Membrane)
        .ok_or_else(|| Error::invalid("field has no membrane region"))?;
    let r = field.geometry.membrane_radius(eta);
    Ok(field
        .modes()
        .map(|(k, m)| m.segments[i].value_at(r) * Complex64::from_polar(1.0, k as f64 * theta))
        .sum())
}
