//! Two-term thin-membrane asymptotics `u ~ u0 + h u1`.
//!
//! The membrane is removed and the cell boundary `r0` carries effective
//! transmission conditions: `u0` sees a perfect interface between core and
//! exterior media, and `u1` solves the same two-medium problem with
//! inhomogeneous jumps built from traces of `u0`. Inside the membrane the field
//! is reconstructed as `u^m_0 + h u^m_1`, affine in the normal coordinate.
//!
//! The solves reuse the resolved model's radial layout: the membrane annulus
//! `[r0, r0 + h]` is covered by a segment carrying the exterior medium, so
//! `u^e` extends into the membrane and every node matches a node of the
//! resolved solve.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::full_model::{
    layout, solve_all_modes, solve_full, FieldExpansion, GridSpec, MaterialSet, Region,
};
use crate::geometry::CircularGeometry;
use crate::radial_ode::{
    InnerBoundary, InterfaceCondition, OuterBoundary, RadialModeSolution, RadialProblem,
    RadialSegment,
};
use crate::spectral::BoundarySpectrum;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How the order-one flux jump is written. Both are equal for exact `u0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpForm {
    /// `(1/mu_m - 1/mu_e) d_t^2 u0 + (q_m - q_e) u0`.
    #[default]
    Reduced,
    /// `(1/mu_m)(d_t^2 u0 + z_m u0) + (1/mu_e) d_n^2 u0^e + (1/mu_c) kappa d_n u0^c`.
    Curvature,
}

impl std::str::FromStr for JumpForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduced" => Ok(JumpForm::Reduced),
            "curvature" => Ok(JumpForm::Curvature),
            other => Err(Error::invalid(format!(
                "unknown jump form `{other}` (reduced | curvature)"
            ))),
        }
    }
}

impl JumpForm {
    pub fn name(self) -> &'static str {
        match self {
            JumpForm::Reduced => "reduced",
            JumpForm::Curvature => "curvature",
        }
    }
}

fn two_medium_layout(
    geom: &CircularGeometry,
    grid: &GridSpec,
    materials: &MaterialSet,
) -> Result<(Vec<RadialSegment>, Vec<Region>)> {
    layout(geom, grid, |r| match r {
        Region::Core => (materials.mu_c, materials.z_c()),
        Region::Membrane | Region::Exterior => (materials.mu_e, materials.z_e()),
    })
}

fn solve_two_medium(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    grid: &GridSpec,
    k_max: usize,
    jumps: impl Fn(i32) -> (Complex64, Complex64) + Sync,
    outer: impl Fn(i32) -> Complex64 + Sync,
) -> Result<FieldExpansion> {
    let (segments, regions) = two_medium_layout(geom, grid, materials)?;
    let modes = solve_all_modes(k_max, |k| {
        let (vj, fj) = jumps(k);
        let mut interfaces = vec![InterfaceCondition::new(geom.r0(), vj, fj)];
        interfaces.extend(
            segments[2..]
                .iter()
                .map(|s| InterfaceCondition::homogeneous(s.a)),
        );
        RadialProblem::new(
            segments.clone(),
            interfaces,
            InnerBoundary::Regular,
            OuterBoundary::Neumann(outer(k)),
        )
    })?;
    Ok(FieldExpansion::from_parts(
        *geom, *materials, regions, k_max, modes,
    ))
}

fn grid_of(field: &FieldExpansion) -> GridSpec {
    let m = field.mode(0).expect("mode 0 present");
    let n = |r: Region| {
        field
            .region_index(r)
            .map(|i| m.segments[i].segment.n)
            .unwrap_or(0)
    };
    GridSpec {
        n_core: n(Region::Core),
        n_membrane: n(Region::Membrane),
        n_exterior: n(Region::Exterior),
    }
}

/// Core and exterior media joined at `r0` with continuity of `u` and `(1/mu) u_r`,
/// Neumann data `phi` on the outer circle.
pub fn solve_order0(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    phi: &BoundarySpectrum,
    grid: &GridSpec,
) -> Result<FieldExpansion> {
    materials.validate()?;
    if (phi.radius() - geom.outer_radius()).abs() > 1e-12 * geom.outer_radius() {
        return Err(Error::invalid(format!(
            "boundary data given on radius {} but the boundary is at {}",
            phi.radius(),
            geom.outer_radius()
        )));
    }
    solve_two_medium(
        geom,
        materials,
        grid,
        phi.k_max(),
        |_| (ZERO, ZERO),
        |k| phi.coeff(k),
    )
}

/// Traces of `u0` at the cell boundary for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CellTraces {
    value: Complex64,
    /// `u0^c'(r0)`, core side.
    core_slope: Complex64,
    /// `u0^e''(r0)`, exterior side.
    ext_curvature: Complex64,
}

fn traces(m: &RadialModeSolution) -> CellTraces {
    let core = &m.segments[0];
    let ext = &m.segments[1];
    CellTraces {
        value: core.last(),
        core_slope: core.right_derivative(),
        ext_curvature: ext.left_second_derivative(),
    }
}

/// `(value jump, flux jump)` of the order-one problem for mode `k`.
pub fn order1_jumps(
    k: i32,
    u0: Complex64,
    core_slope: Complex64,
    ext_curvature: Complex64,
    materials: &MaterialSet,
    r0: f64,
    form: JumpForm,
) -> (Complex64, Complex64) {
    let m = materials;
    let dtt = u0 * (-(k as f64).powi(2) / (r0 * r0));
    let value = core_slope * ((m.mu_e - m.mu_m) / m.mu_c);
    let flux = match form {
        JumpForm::Reduced => dtt * (1.0 / m.mu_m - 1.0 / m.mu_e) + (m.q_m - m.q_e) * u0,
        JumpForm::Curvature => {
            (dtt + m.z_m() * u0) / m.mu_m + ext_curvature / m.mu_e + core_slope / (m.mu_c * r0)
        }
    };
    (value, flux)
}

/// Order-one field: same two-medium problem with jumps from `order0` and
/// homogeneous outer Neumann data.
pub fn solve_order1(
    order0: &FieldExpansion,
    materials: &MaterialSet,
    geom: &CircularGeometry,
    form: JumpForm,
) -> Result<FieldExpansion> {
    let grid = grid_of(order0);
    let r0 = geom.r0();
    let tr: Vec<(i32, CellTraces)> = order0.modes().map(|(k, m)| (k, traces(m))).collect();
    let k_max = order0.k_max();
    solve_two_medium(
        geom,
        materials,
        &grid,
        k_max,
        |k| {
            let t = tr[(k + k_max as i32) as usize].1;
            order1_jumps(
                k,
                t.value,
                t.core_slope,
                t.ext_curvature,
                materials,
                r0,
                form,
            )
        },
        |_| ZERO,
    )
}

/// Per-mode membrane reconstruction `u^m_0 + h u^m_1` with
/// `u^m_1 = slope * eta + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneMode {
    pub k: i32,
    pub um0: Complex64,
    pub um1_offset: Complex64,
    pub um1_slope: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneAsymptotics {
    pub h: f64,
    pub r0: f64,
    pub modes: Vec<MembraneMode>,
}

impl MembraneAsymptotics {
    pub fn mode(&self, k: i32) -> Option<&MembraneMode> {
        self.modes.iter().find(|m| m.k == k)
    }

    /// `u^m_1(eta)` for mode `k`.
    pub fn first_order(&self, k: i32, eta: f64) -> Complex64 {
        self.mode(k)
            .map(|m| m.um1_offset + m.um1_slope * eta)
            .unwrap_or(ZERO)
    }

    /// `u^m_0 + h u^m_1(eta)` for mode `k`.
    pub fn value(&self, k: i32, eta: f64) -> Complex64 {
        self.mode(k)
            .map(|m| m.um0 + (m.um1_offset + m.um1_slope * eta) * self.h)
            .unwrap_or(ZERO)
    }

    pub fn eval(&self, eta: f64, theta: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|m| self.value(m.k, eta) * Complex64::from_polar(1.0, m.k as f64 * theta))
            .sum()
    }

    fn eta(&self, r: f64) -> f64 {
        (r - self.r0) / self.h
    }
}

/// `u^m_0 = u0^c(r0)`, `u^m_1 = eta (mu_m/mu_c) u0^c'(r0) + u1^c(r0)`.
pub fn membrane_terms(
    order0: &FieldExpansion,
    order1: &FieldExpansion,
    materials: &MaterialSet,
    geom: &CircularGeometry,
) -> MembraneAsymptotics {
    let modes = order0
        .modes()
        .zip(order1.modes())
        .map(|((k, m0), (_, m1))| {
            let t = traces(m0);
            MembraneMode {
                k,
                um0: t.value,
                um1_offset: m1.segments[0].last(),
                um1_slope: t.core_slope * (materials.mu_m / materials.mu_c),
            }
        })
        .collect();
    MembraneAsymptotics {
        h: geom.h(),
        r0: geom.r0(),
        modes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticExpansion {
    pub h: f64,
    pub jump_form: JumpForm,
    pub order0: FieldExpansion,
    pub order1: FieldExpansion,
    pub membrane: MembraneAsymptotics,
}

/// Zeroth and first order plus the membrane reconstruction.
pub fn solve_asymptotic(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    phi: &BoundarySpectrum,
    grid: &GridSpec,
    form: JumpForm,
) -> Result<AsymptoticExpansion> {
    let order0 = solve_order0(geom, materials, phi, grid)?;
    let order1 = solve_order1(&order0, materials, geom, form)?;
    let membrane = membrane_terms(&order0, &order1, materials, geom);
    Ok(AsymptoticExpansion {
        h: geom.h(),
        jump_form: form,
        order0,
        order1,
        membrane,
    })
}

/// The composed approximation on the shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    /// `v^c = u0^c + h u1^c` on the core, `v^e = u0^e + h u1^e` elsewhere
    /// (including the membrane annulus).
    pub v: FieldExpansion,
    /// As `v`, but with the membrane reconstruction on the membrane annulus.
    pub v_tilde: FieldExpansion,
}

fn replace_membrane(field: &mut FieldExpansion, membrane: &MembraneAsymptotics) {
    let i = field
        .region_index(Region::Membrane)
        .expect("membrane region");
    for m in field.modes_mut() {
        let k = m.k;
        let s = &mut m.segments[i];
        for (u, &r) in s.u.iter_mut().zip(&s.r) {
            *u = membrane.value(k, membrane.eta(r));
        }
    }
}

pub fn compose(expansion: &AsymptoticExpansion) -> Result<Composition> {
    let v = expansion
        .order0
        .axpy(Complex64::new(expansion.h, 0.0), &expansion.order1)?;
    let mut v_tilde = v.clone();
    replace_membrane(&mut v_tilde, &expansion.membrane);
    Ok(Composition { v, v_tilde })
}

/// Asymptotics for Neumann data `gamma` on the outer membrane circle of an
/// isolated cell, with the resolved reference on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellNeumannSolution {
    pub order0: FieldExpansion,
    pub order1: FieldExpansion,
    pub membrane: MembraneAsymptotics,
    /// `u0^c + h u1^c` on the core, the membrane reconstruction on the membrane.
    pub approximation: FieldExpansion,
    pub reference: FieldExpansion,
}

/// `geom` must be a cell geometry (outer boundary at `r0 + h`).
pub fn solve_cell_neumann(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    gamma: &BoundarySpectrum,
    grid: &GridSpec,
) -> Result<CellNeumannSolution> {
    let (r0, h) = (geom.r0(), geom.h());
    if (geom.outer_radius() - (r0 + h)).abs() > 1e-12 * geom.outer_radius() {
        return Err(Error::invalid(
            "cell Neumann problem needs the outer boundary at r0 + h",
        ));
    }
    let reference = solve_full(geom, materials, gamma, grid)?;
    let m = materials;
    let core = RadialSegment::new(0.0, r0, m.mu_c, m.z_c(), grid.n_core)?;
    let ratio = m.mu_c / m.mu_m;
    let k_max = gamma.k_max();
    let single = |data: &(dyn Fn(i32) -> Complex64 + Sync)| {
        solve_all_modes(k_max, |k| {
            RadialProblem::new(
                vec![core],
                vec![],
                InnerBoundary::Regular,
                OuterBoundary::Neumann(data(k)),
            )
        })
    };
    let modes0 = single(&|k| gamma.coeff(k) * ratio)?;
    let traces0: Vec<Complex64> = modes0.iter().map(|s| s.segments[0].last()).collect();
    let modes1 = single(&|k| {
        let u0 = traces0[(k + k_max as i32) as usize];
        let k2 = (k as f64).powi(2);
        (gamma.coeff(k) / r0 - u0 * (k2 / (r0 * r0)) + m.z_m() * u0) * ratio
    })?;
    let core_geom = *geom;
    let order0 = FieldExpansion::from_parts(core_geom, *m, vec![Region::Core], k_max, modes0);
    let order1 = FieldExpansion::from_parts(core_geom, *m, vec![Region::Core], k_max, modes1);

    let membrane = MembraneAsymptotics {
        h,
        r0,
        modes: order0
            .modes()
            .zip(order1.modes())
            .map(|((k, a), (_, b))| MembraneMode {
                k,
                um0: a.segments[0].last(),
                um1_offset: b.segments[0].last(),
                um1_slope: gamma.coeff(k),
            })
            .collect(),
    };

    // Approximation on the reference grid: core from the core solves, membrane reconstructed.
    let v_core = order0.axpy(Complex64::new(h, 0.0), &order1)?;
    let mut approximation = reference.clone();
    for (m_ref, (_, m_core)) in approximation.modes_mut().zip(v_core.modes()) {
        m_ref.segments[0].u = m_core.segments[0].u.clone();
    }
    replace_membrane(&mut approximation, &membrane);
    Ok(CellNeumannSolution {
        order0,
        order1,
        membrane,
        approximation,
        reference,
    })
}

/// Which membrane model to solve in the small-`z_m` study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Resolved model with the actual `z_m`.
    FullZm,
    /// Resolved model with `z_m` replaced by 0 in the membrane.
    ZmZeroMembrane,
    /// Asymptotic model with `z_m = 0`; requires `mu = 1` everywhere.
    Biological,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ZmSolution {
    Full(FieldExpansion),
    Asymptotic(Box<AsymptoticExpansion>),
}

/// `-|z_m| / Im z_m`, which must lie in `(0, bound)`; zero for `z_m = 0`.
pub fn zm_hypothesis_ratio(z_m: Complex64, bound: f64) -> Result<f64> {
    if z_m == ZERO {
        return Ok(0.0);
    }
    let ratio = -z_m.norm() / z_m.im;
    if !(ratio > 0.0 && ratio < bound) {
        return Err(Error::invalid(format!(
            "z_m = {z_m} violates 0 < -|z_m|/Im(z_m) < {bound} (ratio {ratio:.4})"
        )));
    }
    Ok(ratio)
}

pub fn solve_zm_variants(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    phi: &BoundarySpectrum,
    grid: &GridSpec,
    regime: Regime,
    hypothesis_bound: f64,
) -> Result<ZmSolution> {
    match regime {
        Regime::FullZm => Ok(ZmSolution::Full(solve_full(geom, materials, phi, grid)?)),
        Regime::ZmZeroMembrane => Ok(ZmSolution::Full(solve_full(
            geom,
            &materials.with_zero_membrane(),
            phi,
            grid,
        )?)),
        Regime::Biological => {
            if !materials.has_unit_mu() {
                return Err(Error::invalid(format!(
                    "biological regime requires mu = 1 in every region, got ({}, {}, {})",
                    materials.mu_e, materials.mu_m, materials.mu_c
                )));
            }
            zm_hypothesis_ratio(materials.z_m(), hypothesis_bound)?;
            Ok(ZmSolution::Asymptotic(Box::new(solve_asymptotic(
                geom,
                &materials.with_zero_membrane(),
                phi,
                grid,
                JumpForm::Reduced,
            )?)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::full_model::tests::{c, default_materials, default_phi};
    use crate::norms_errors::{difference_h1, field_h1};

    fn geom(h: f64) -> CircularGeometry {
        CircularGeometry::new(1.0, h, 2.0).unwrap()
    }

    fn small() -> GridSpec {
        GridSpec::new(128, 32, 128).unwrap()
    }

    const ALL: [Region; 3] = [Region::Core, Region::Membrane, Region::Exterior];

    #[test]
    fn uniform_materials_degenerate() {
        let m = MaterialSet::uniform(1.3, c(1.0, -0.6)).unwrap();
        let g = geom(0.05);
        let phi = default_phi();
        let a = solve_asymptotic(&g, &m, &phi, &small(), JumpForm::Reduced).unwrap();
        assert!(a.order1.max_abs() < 1e-10);
        let u = solve_full(&g, &m, &phi, &small()).unwrap();
        assert!(difference_h1(&u, &a.order0, &ALL).unwrap() < 1e-10 * field_h1(&u).unwrap());
    }

    #[test]
    fn zero_data() {
        let a = solve_asymptotic(
            &geom(0.05),
            &default_materials(),
            &BoundarySpectrum::zeros(3, 2.0),
            &small(),
            JumpForm::Curvature,
        )
        .unwrap();
        assert_eq!(a.order0.max_abs(), 0.0);
        assert_eq!(a.order1.max_abs(), 0.0);
        assert!(a
            .membrane
            .modes
            .iter()
            .all(|m| m.um0 == ZERO && m.um1_slope == ZERO));
    }

    #[test]
    fn membrane_like_exterior_gives_no_correction() {
        let d = default_materials();
        let m = MaterialSet::new([2.0, 2.0, 3.0], [d.q_e, d.q_e, d.q_c]).unwrap();
        let a =
            solve_asymptotic(&geom(0.05), &m, &default_phi(), &small(), JumpForm::Reduced).unwrap();
        assert!(a.order1.max_abs() < 1e-12);
    }

    #[test]
    fn jump_coefficients() {
        // mu_m = mu_c = mu_e: no value jump, flux jump (q_m - q_e) u0 only.
        let m = MaterialSet::new([2.0; 3], [c(1.0, -1.0), c(0.5, -0.2), c(1.5, -2.0)]).unwrap();
        let u0 = c(0.3, 0.1);
        let (v, f) = order1_jumps(2, u0, c(1.0, 1.0), c(0.0, 0.0), &m, 1.0, JumpForm::Reduced);
        assert_eq!(v, ZERO);
        assert!((f - (m.q_m - m.q_e) * u0).norm() < 1e-15);
        // Unit mu with q_m = 0: flux jump -q_e u0.
        let b = MaterialSet::new([1.0; 3], [c(1.0, -1.0), c(0.5, -0.2), c(1.5, -2.0)])
            .unwrap()
            .with_zero_membrane();
        let (v, f) = order1_jumps(3, u0, c(1.0, 1.0), ZERO, &b, 1.0, JumpForm::Reduced);
        assert_eq!(v, ZERO);
        assert!((f + b.q_e * u0).norm() < 1e-15);
    }

    #[test]
    fn order1_value_jump_matches_core_slope() {
        let m = default_materials();
        let a = solve_asymptotic(
            &geom(0.05),
            &m,
            &default_phi(),
            &GridSpec::default(),
            JumpForm::Reduced,
        )
        .unwrap();
        for ((_, m0), (_, m1)) in a.order0.modes().zip(a.order1.modes()) {
            let expected = m0.segments[0].right_derivative() * ((m.mu_e - m.mu_m) / m.mu_c);
            let got = m1.segments[0].last() - m1.segments[1].first();
            assert!((got - expected).norm() < 1e-12);
        }
        for res in a.order1.modes().flat_map(|(_, m)| m.interface_residuals()) {
            assert!(res.value < 1e-12);
        }
    }

    #[test]
    fn forms_agree_and_converge() {
        let m = default_materials();
        let phi = default_phi();
        let g = geom(0.05);
        let diff = |grid: GridSpec| {
            let o0 = solve_order0(&g, &m, &phi, &grid).unwrap();
            let red = solve_order1(&o0, &m, &g, JumpForm::Reduced).unwrap();
            let cur = solve_order1(&o0, &m, &g, JumpForm::Curvature).unwrap();
            difference_h1(&red, &cur, &ALL).unwrap() / field_h1(&red).unwrap()
        };
        let d1 = diff(GridSpec::default());
        let d2 = diff(GridSpec::default().scaled(2));
        assert!(d1 < 1e-4, "{d1}");
        assert!(d1 / d2 >= 2.0, "{d1} {d2}");
    }

    #[test]
    fn membrane_reconstruction_structure() {
        let m = default_materials();
        let a =
            solve_asymptotic(&geom(0.05), &m, &default_phi(), &small(), JumpForm::Reduced).unwrap();
        let comp = compose(&a).unwrap();
        for (k, mode) in comp.v_tilde.modes() {
            // eta = 0 equals the core trace of v.
            let mem = &mode.segments[1];
            let core = &comp.v.mode(k).unwrap().segments[0];
            assert!((mem.first() - core.last()).norm() < 1e-14);
            // Affine in eta: vanishing second differences.
            for w in mem.u.windows(3) {
                assert!((w[0] - 2.0 * w[1] + w[2]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn equal_membrane_and_core_mu_gives_unit_slope_factor() {
        let d = default_materials();
        let m = MaterialSet::new([1.0, 3.0, 3.0], [d.q_e, d.q_m, d.q_c]).unwrap();
        let a =
            solve_asymptotic(&geom(0.05), &m, &default_phi(), &small(), JumpForm::Reduced).unwrap();
        for (k, m0) in a.order0.modes() {
            assert_eq!(
                a.membrane.mode(k).unwrap().um1_slope,
                m0.segments[0].right_derivative()
            );
        }
    }

    #[test]
    fn membrane_reconstruction_is_second_order_taylor_for_uniform_media() {
        let m = MaterialSet::uniform(1.0, c(1.0, -1.0)).unwrap();
        let phi = default_phi();
        let err = |h: f64| {
            let g = geom(h);
            let grid = GridSpec::new(1024, 64, 1024).unwrap();
            let u = solve_full(&g, &m, &phi, &grid).unwrap();
            let a = solve_asymptotic(&g, &m, &phi, &grid, JumpForm::Reduced).unwrap();
            [0.25, 0.5, 1.0]
                .iter()
                .map(|&eta| {
                    (crate::full_model::eval_membrane_local(&u, eta, 0.4).unwrap()
                        - a.membrane.eval(eta, 0.4))
                    .norm()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(0.05) / err(0.025);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn linear_in_data() {
        let m = default_materials();
        let g = geom(0.05);
        let phi = default_phi();
        let a =
            compose(&solve_asymptotic(&g, &m, &phi, &small(), JumpForm::Reduced).unwrap()).unwrap();
        let b = compose(
            &solve_asymptotic(
                &g,
                &m,
                &phi.scaled(c(2.0, 0.0)),
                &small(),
                JumpForm::Reduced,
            )
            .unwrap(),
        )
        .unwrap();
        let d = b
            .v_tilde
            .combine(c(1.0, 0.0), &a.v_tilde, c(-2.0, 0.0))
            .unwrap();
        assert!(d.max_abs() < 1e-12 * b.v_tilde.max_abs());
    }

    #[test]
    fn cell_neumann_zero_and_uniform() {
        let g = CircularGeometry::cell(1.0, 0.05).unwrap();
        let grid = GridSpec::new(128, 32, 128).unwrap();
        let zero = solve_cell_neumann(
            &g,
            &default_materials(),
            &BoundarySpectrum::zeros(2, 1.05),
            &grid,
        )
        .unwrap();
        assert_eq!(zero.approximation.max_abs(), 0.0);
        assert_eq!(zero.reference.max_abs(), 0.0);

        let m = MaterialSet::uniform(2.0, c(1.0, -1.0)).unwrap();
        let gamma =
            BoundarySpectrum::from_modes(3, 1.05, &[(0, c(0.2, 0.0)), (2, c(0.5, 0.1))]).unwrap();
        let s = solve_cell_neumann(&g, &m, &gamma, &grid).unwrap();
        let ref_norm = field_h1(&s.reference).unwrap();
        let e = difference_h1(
            &s.reference,
            &s.approximation,
            &[Region::Core, Region::Membrane],
        )
        .unwrap();
        assert!(e < 1e-2 * ref_norm, "{e}");
    }

    #[test]
    fn cell_neumann_rejects_open_geometry() {
        let gamma = BoundarySpectrum::zeros(2, 1.05);
        assert!(solve_cell_neumann(&geom(0.05), &default_materials(), &gamma, &small()).is_err());
    }

    #[test]
    fn zm_regimes() {
        let g = geom(0.05);
        let phi = default_phi();
        let bio = MaterialSet::new([1.0; 3], [c(1.0, -1.0), c(1e-3, -1e-3), c(1.5, -2.0)]).unwrap();
        assert!(matches!(
            solve_zm_variants(&g, &bio, &phi, &small(), Regime::Biological, 10.0).unwrap(),
            ZmSolution::Asymptotic(_)
        ));
        assert!(solve_zm_variants(
            &g,
            &default_materials(),
            &phi,
            &small(),
            Regime::Biological,
            10.0
        )
        .is_err());
        // -|z|/Im z = sqrt(2) for z = 1 - i; a bound of 1.2 rejects it.
        assert!(solve_zm_variants(&g, &bio, &phi, &small(), Regime::Biological, 1.2).is_err());
        assert!(zm_hypothesis_ratio(c(1e-3, 1e-3), 10.0).is_err());
        assert_eq!(zm_hypothesis_ratio(ZERO, 10.0).unwrap(), 0.0);

        let zero = match solve_zm_variants(&g, &bio, &phi, &small(), Regime::ZmZeroMembrane, 10.0)
            .unwrap()
        {
            ZmSolution::Full(f) => f,
            _ => unreachable!(),
        };
        let tiny = solve_full(
            &g,
            &bio.with_membrane_z(c(1e-12, -1e-12)).unwrap(),
            &phi,
            &small(),
        )
        .unwrap();
        assert!(difference_h1(&zero, &tiny, &ALL).unwrap() < 1e-9);
    }

    #[test]
    fn jump_form_parses() {
        assert_eq!("reduced".parse::<JumpForm>().unwrap(), JumpForm::Reduced);
        assert_eq!(
            "curvature".parse::<JumpForm>().unwrap(),
            JumpForm::Curvature
        );
        assert!("other".parse::<JumpForm>().is_err());
    }
}
