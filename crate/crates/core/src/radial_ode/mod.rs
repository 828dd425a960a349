//! Per-mode radial boundary-value problems with interface conditions.
//!
//! For Fourier mode `k` the field on a segment with constants `(mu, z = mu q)`
//! satisfies
//!
//! ```text
//! (1/mu) (r u')' - (k^2 / (mu r)) u + q r u = 0
//! ```
//!
//! which is discretized by a vertex-centred finite-volume scheme: every node
//! carries the balance of the flux `F = (r/mu) u'` over its (half-)cell. At an
//! interface `r*` both sides own a node; the two half-cell balances are added
//! into a single row enforcing the prescribed flux jump and a second row
//! enforces the value jump. The resulting system is banded with one sub- and
//! two super-diagonals and is solved by [`banded::BandedMatrix`].

pub mod banded;
pub mod bessel;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use banded::BandedMatrix;

pub use bessel::{bessel_oracle, bessel_oracle_derivative};

pub const MIN_SEGMENT_INTERVALS: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSegment {
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub z: Complex64,
    /// Number of intervals; the segment has `n + 1` nodes.
    pub n: usize,
}

impl RadialSegment {
    pub fn new(a: f64, b: f64, mu: f64, z: Complex64, n: usize) -> Result<Self> {
        if !(a >= 0.0 && b > a) {
            return Err(Error::invalid(format!(
                "segment [{a}, {b}] must satisfy 0 <= a < b"
            )));
        }
        if !(mu > 0.0) {
            return Err(Error::invalid(format!(
                "segment mu must be positive, got {mu}"
            )));
        }
        if n < MIN_SEGMENT_INTERVALS {
            return Err(Error::invalid(format!(
                "segment needs at least {MIN_SEGMENT_INTERVALS} intervals, got {n}"
            )));
        }
        Ok(RadialSegment { a, b, mu, z, n })
    }

    pub fn q(&self) -> Complex64 {
        self.z / self.mu
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n {
            self.b
        } else {
            self.a + j as f64 * self.spacing()
        }
    }

    /// Weights of node `j`: the exact `int r dr` over its (half-)cell, and
    /// `int dr / r` lumped as that mass over `r_j^2`. The lumping is exact for
    /// `u ~ r` near the origin and additive across a homogeneous interface.
    fn cell_weights(&self, j: usize) -> (f64, f64) {
        let d = self.spacing();
        let r = self.node(j);
        let lo = if j == 0 { r } else { r - 0.5 * d };
        let hi = if j == self.n { r } else { r + 0.5 * d };
        let mass = 0.5 * (hi * hi - lo * lo);
        let stiff = if r > 0.0 { mass / (r * r) } else { 0.0 };
        (mass, stiff)
    }

    /// Reaction coefficient of node `j`: `-(k^2/mu) int dr/r + q int r dr`.
    fn reaction(&self, k: i32, j: usize) -> Complex64 {
        let (mass, stiff) = self.cell_weights(j);
        let k2 = (k as f64).powi(2);
        Complex64::new(-k2 / self.mu * stiff, 0.0) + self.q() * mass
    }

    /// Conductance of the edge between nodes `j` and `j + 1`: `r_{j+1/2} / (mu dr)`.
    fn conductance(&self, j: usize) -> f64 {
        let d = self.spacing();
        (self.a + (j as f64 + 0.5) * d) / (self.mu * d)
    }
}

/// Jump conditions at the junction of two segments, left minus right:
/// `u_L - u_R = value_jump`, `(1/mu_L) u'_L - (1/mu_R) u'_R = flux_jump`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceCondition {
    pub location: f64,
    pub value_jump: Complex64,
    pub flux_jump: Complex64,
}

impl InterfaceCondition {
    pub fn homogeneous(location: f64) -> Self {
        InterfaceCondition {
            location,
            value_jump: ZERO,
            flux_jump: ZERO,
        }
    }

    pub fn new(location: f64, value_jump: Complex64, flux_jump: Complex64) -> Self {
        InterfaceCondition {
            location,
            value_jump,
            flux_jump,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnerBoundary {
    /// Only valid when the innermost segment starts at `r = 0`:
    /// `u'(0) = 0` for `k = 0` and `u(0) = 0` otherwise.
    Regular,
    Dirichlet(Complex64),
    /// Prescribes `u'(a)`.
    Neumann(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OuterBoundary {
    /// Prescribes `u'(b)` (no `1/mu` factor).
    Neumann(Complex64),
    Dirichlet(Complex64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub segments: Vec<RadialSegment>,
    pub interfaces: Vec<InterfaceCondition>,
    pub inner: InnerBoundary,
    pub outer: OuterBoundary,
}

impl RadialProblem {
    pub fn new(
        segments: Vec<RadialSegment>,
        interfaces: Vec<InterfaceCondition>,
        inner: InnerBoundary,
        outer: OuterBoundary,
    ) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("radial problem needs at least one segment"));
        }
        if interfaces.len() + 1 != segments.len() {
            return Err(Error::invalid(format!(
                "{} segments need {} interfaces, got {}",
                segments.len(),
                segments.len() - 1,
                interfaces.len()
            )));
        }
        for (i, w) in segments.windows(2).enumerate() {
            let junction = w[0].b;
            let tol = 1e-12 * junction.abs().max(1.0);
            if (w[1].a - junction).abs() > tol {
                return Err(Error::invalid(format!(
                    "segments {i} and {} are not contiguous ({} vs {})",
                    i + 1,
                    junction,
                    w[1].a
                )));
            }
            if (interfaces[i].location - junction).abs() > tol {
                return Err(Error::invalid(format!(
                    "interface {i} at {} is not at the segment junction {junction}",
                    interfaces[i].location
                )));
            }
        }
        let starts_at_origin = segments[0].a == 0.0;
        match inner {
            InnerBoundary::Regular if !starts_at_origin => {
                return Err(Error::invalid(
                    "regularity condition requires the first segment to start at r = 0",
                ))
            }
            InnerBoundary::Dirichlet(_) | InnerBoundary::Neumann(_) if starts_at_origin => {
                return Err(Error::invalid(
                    "a segment starting at r = 0 requires the regularity condition",
                ))
            }
            _ => {}
        }
        Ok(RadialProblem {
            segments,
            interfaces,
            inner,
            outer,
        })
    }

    /// Same problem with every segment's interval count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut out = self.clone();
        out.segments.iter_mut().for_each(|s| s.n *= factor);
        out
    }

    pub fn unknowns(&self) -> usize {
        self.segments.iter().map(|s| s.n + 1).sum()
    }

    pub fn solve(&self, k: i32) -> Result<RadialModeSolution> {
        solve_mode(self, k)
    }
}

pub fn solve_mode(problem: &RadialProblem, k: i32) -> Result<RadialModeSolution> {
    let n_total = problem.unknowns();
    let mut a = BandedMatrix::zeros(n_total, 1, 2);
    let mut rhs = vec![ZERO; n_total];
    let one = Complex64::new(1.0, 0.0);
    let nseg = problem.segments.len();

    let mut offset = 0;
    for (s, seg) in problem.segments.iter().enumerate() {
        let n = seg.n;
        for j in 1..n {
            let g = offset + j;
            let (gl, gr) = (seg.conductance(j - 1), seg.conductance(j));
            a.set(g, g - 1, gl.into());
            a.set(g, g, Complex64::new(-(gl + gr), 0.0) + seg.reaction(k, j));
            a.set(g, g + 1, gr.into());
        }

        if s == 0 {
            let g = offset;
            match (problem.inner, k) {
                (InnerBoundary::Regular, 0) | (InnerBoundary::Neumann(_), _) => {
                    let c = seg.conductance(0);
                    a.set(g, g, Complex64::new(-c, 0.0) + seg.reaction(k, 0));
                    a.set(g, g + 1, c.into());
                    if let InnerBoundary::Neumann(du) = problem.inner {
                        rhs[g] = du * (seg.a / seg.mu);
                    }
                }
                (InnerBoundary::Regular, _) => a.set(g, g, one),
                (InnerBoundary::Dirichlet(v), _) => {
                    a.set(g, g, one);
                    rhs[g] = v;
                }
            }
        }

        let g = offset + n;
        if s + 1 == nseg {
            match problem.outer {
                OuterBoundary::Neumann(du) => {
                    let c = seg.conductance(n - 1);
                    a.set(g, g - 1, c.into());
                    a.set(g, g, Complex64::new(-c, 0.0) + seg.reaction(k, n));
                    rhs[g] = -du * (seg.b / seg.mu);
                }
                OuterBoundary::Dirichlet(v) => {
                    a.set(g, g, one);
                    rhs[g] = v;
                }
            }
        } else {
            // Row g: summed half-cell balances (flux jump); row g + 1: value jump.
            let right = &problem.segments[s + 1];
            let iface = &problem.interfaces[s];
            let cl = seg.conductance(n - 1);
            let cr = right.conductance(0);
            a.set(g, g - 1, cl.into());
            a.set(g, g, Complex64::new(-cl, 0.0) + seg.reaction(k, n));
            a.set(g, g + 1, Complex64::new(-cr, 0.0) + right.reaction(k, 0));
            a.set(g, g + 2, cr.into());
            rhs[g] = -iface.flux_jump * iface.location;

            a.set(g + 1, g, one);
            a.set(g + 1, g + 1, -one);
            rhs[g + 1] = iface.value_jump;
        }
        offset += n + 1;
    }

    let u = a.solve(rhs).map_err(|e| e.with_mode(k))?;

    let mut segments = Vec::with_capacity(nseg);
    let mut offset = 0;
    for seg in &problem.segments {
        let n = seg.n;
        segments.push(SegmentProfile {
            segment: *seg,
            r: (0..=n).map(|j| seg.node(j)).collect(),
            u: u[offset..=offset + n].to_vec(),
        });
        offset += n + 1;
    }
    Ok(RadialModeSolution {
        k,
        segments,
        interfaces: problem.interfaces.clone(),
        inner: problem.inner,
        outer: problem.outer,
    })
}

/// Nodal values of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProfile {
    pub segment: RadialSegment,
    pub r: Vec<f64>,
    pub u: Vec<Complex64>,
}

impl SegmentProfile {
    pub fn spacing(&self) -> f64 {
        self.segment.spacing()
    }

    pub fn first(&self) -> Complex64 {
        self.u[0]
    }

    pub fn last(&self) -> Complex64 {
        *self.u.last().expect("non-empty segment")
    }

    /// `u'(a)`, one-sided three-point, second order.
    pub fn left_derivative(&self) -> Complex64 {
        let u = &self.u;
        (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * self.spacing())
    }

    /// `u'(b)`, one-sided three-point, second order.
    pub fn right_derivative(&self) -> Complex64 {
        let n = self.u.len() - 1;
        let u = &self.u;
        (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * self.spacing())
    }

    /// `u''(a)`, one-sided four-point, second order.
    pub fn left_second_derivative(&self) -> Complex64 {
        let u = &self.u;
        (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / self.spacing().powi(2)
    }

    /// `u''(b)`, one-sided four-point, second order.
    pub fn right_second_derivative(&self) -> Complex64 {
        let n = self.u.len() - 1;
        let u = &self.u;
        (2.0 * u[n] - 5.0 * u[n - 1] + 4.0 * u[n - 2] - u[n - 3]) / self.spacing().powi(2)
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.segment.a && r <= self.segment.b
    }

    /// Four-point Lagrange (cubic) interpolation of the nodal values.
    pub fn value_at(&self, r: f64) -> Complex64 {
        cubic_interpolate(&self.r, &self.u, r)
    }

    /// Scheme-consistent boundary fluxes `(r/mu) u'` at `a` and `b`, recovered
    /// from the half-cell balances of the end nodes.
    fn end_fluxes(&self, k: i32) -> (Complex64, Complex64) {
        let seg = &self.segment;
        let n = seg.n;
        let u = &self.u;
        let left = (u[1] - u[0]) * seg.conductance(0) + seg.reaction(k, 0) * u[0];
        let right = (u[n] - u[n - 1]) * seg.conductance(n - 1) - seg.reaction(k, n) * u[n];
        (left, right)
    }

    /// Discrete `int (r/mu)|u'|^2 + (k^2/(mu r))|u|^2 - q r |u|^2 dr`.
    fn discrete_energy(&self, k: i32) -> (Complex64, f64) {
        let seg = &self.segment;
        let mut energy = ZERO;
        let mut scale = 0.0;
        for j in 0..seg.n {
            let e = seg.conductance(j) * (self.u[j + 1] - self.u[j]).norm_sqr();
            energy += e;
            scale += e.abs();
        }
        for j in 0..=seg.n {
            let t = seg.reaction(k, j) * self.u[j].norm_sqr();
            energy -= t;
            scale += t.norm();
        }
        (energy, scale)
    }
}

/// Cubic Lagrange interpolation on sorted nodes, using the four nodes
/// surrounding `x` (shifted inwards near the ends).
pub fn cubic_interpolate(x: &[f64], y: &[Complex64], at: f64) -> Complex64 {
    let n = x.len();
    assert!(n >= 2 && n == y.len());
    if n < 4 {
        // Linear fallback for tiny arrays.
        let i = x.partition_point(|&v| v <= at).clamp(1, n - 1);
        let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
        return y[i - 1] * (1.0 - t) + y[i] * t;
    }
    let i = x.partition_point(|&v| v <= at);
    let start = i.saturating_sub(2).min(n - 4);
    let xs = &x[start..start + 4];
    let ys = &y[start..start + 4];
    let mut acc = ZERO;
    for a in 0..4 {
        if at == xs[a] {
            return ys[a];
        }
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (at - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc += ys[a] * w;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceResidual {
    pub location: f64,
    pub value: f64,
    pub flux: f64,
    /// Largest grid spacing adjacent to the interface.
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenCheck {
    pub energy: Complex64,
    pub boundary: Complex64,
    /// `|energy - boundary| / scale`.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialModeSolution {
    pub k: i32,
    pub segments: Vec<SegmentProfile>,
    pub interfaces: Vec<InterfaceCondition>,
    pub inner: InnerBoundary,
    pub outer: OuterBoundary,
}

impl RadialModeSolution {
    pub fn value_at(&self, r: f64) -> Option<Complex64> {
        self.segments
            .iter()
            .find(|s| s.contains(r))
            .map(|s| s.value_at(r))
    }

    pub fn max_abs(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.u.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.segments
            .iter()
            .flat_map(|s| s.u.iter())
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Mismatch of the prescribed jumps, with derivatives from one-sided
    /// second-order stencils.
    pub fn interface_residuals(&self) -> Vec<InterfaceResidual> {
        self.segments
            .windows(2)
            .zip(&self.interfaces)
            .map(|(w, iface)| {
                let (l, r) = (&w[0], &w[1]);
                let value = (l.last() - r.first() - iface.value_jump).norm();
                let flux = (l.right_derivative() / l.segment.mu
                    - r.left_derivative() / r.segment.mu
                    - iface.flux_jump)
                    .norm();
                InterfaceResidual {
                    location: iface.location,
                    value,
                    flux,
                    spacing: l.spacing().max(r.spacing()),
                }
            })
            .collect()
    }

    /// Discrete energy identity: summed segment energies equal the boundary
    /// and interface terms implied by the prescribed data.
    pub fn green_check(&self) -> GreenCheck {
        let k = self.k;
        let mut energy = ZERO;
        let mut scale = 0.0;
        for s in &self.segments {
            let (e, sc) = s.discrete_energy(k);
            energy += e;
            scale += sc;
        }
        let first = &self.segments[0];
        let last = self.segments.last().expect("non-empty");
        let (inner_flux, _) = first.end_fluxes(k);
        let (_, computed_outer) = last.end_fluxes(k);
        let outer_flux = match self.outer {
            OuterBoundary::Neumann(du) => du * (last.segment.b / last.segment.mu),
            OuterBoundary::Dirichlet(_) => computed_outer,
        };
        let inner_flux = match self.inner {
            InnerBoundary::Regular => ZERO,
            InnerBoundary::Neumann(du) => du * (first.segment.a / first.segment.mu),
            InnerBoundary::Dirichlet(_) => inner_flux,
        };
        let mut boundary = outer_flux * last.last().conj() - inner_flux * first.first().conj();
        for (w, iface) in self.segments.windows(2).zip(&self.interfaces) {
            // F_L conj(u_L) - F_R conj(u_R) with F_L - F_R = r* J_f and u_L - u_R = J_v.
            let (_, left_flux) = w[0].end_fluxes(k);
            boundary += iface.flux_jump * iface.location * w[1].first().conj()
                + left_flux * iface.value_jump.conj();
        }
        let denom = scale.max(boundary.norm()).max(f64::MIN_POSITIVE);
        GreenCheck {
            energy,
            boundary,
            relative_residual: (energy - boundary).norm() / denom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeOrder {
    Observed(f64),
    /// Successive differences fell below the noise floor.
    Indeterminate,
}

pub const ORDER_NOISE_FLOOR: f64 = 1e-13;

/// Richardson order estimate `log2(|u_N - u_2N| / |u_2N - u_4N|)` at `probe`.
pub fn estimate_scheme_order(problem: &RadialProblem, k: i32, probe: f64) -> Result<SchemeOrder> {
    let mut vals = Vec::with_capacity(3);
    for factor in [1, 2, 4] {
        let sol = problem.refined(factor).solve(k)?;
        let v = sol.value_at(probe).ok_or_else(|| {
            Error::invalid(format!("probe r = {probe} outside the radial domain"))
        })?;
        vals.push(v);
    }
    let d1 = (vals[0] - vals[1]).norm();
    let d2 = (vals[1] - vals[2]).norm();
    if d1 < ORDER_NOISE_FLOOR || d2 < ORDER_NOISE_FLOOR {
        return Ok(SchemeOrder::Indeterminate);
    }
    Ok(SchemeOrder::Observed((d1 / d2).log2()))
}
