//! Solver self-checks that do not need an `h` sweep of the model error.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::runner::Check;
use crate::asymptotic_model::{solve_asymptotic, solve_order1, JumpForm};
use crate::full_model::{solve_full, FieldExpansion, GridSpec, MaterialSet};
use crate::geometry::CircularGeometry;
use crate::norms_errors::{
    derivative, field_h1, poincare_diagnostic, simpson, ConvergencePoint, ConvergenceReport,
    PoincareRatio, GREEN_TOLERANCE,
};
use crate::radial_ode::{
    bessel_oracle, bessel_oracle_derivative, estimate_scheme_order, InnerBoundary,
    InterfaceCondition, OuterBoundary, RadialProblem, RadialSegment, SchemeOrder,
};
use crate::spectral::BoundarySpectrum;
use crate::{Error, Result};

pub const ORDER_RANGE: (f64, f64) = (1.8, 2.2);
pub const ORACLE_INTERVALS: usize = 2048;
pub const ORACLE_TOLERANCE: f64 = 1e-6;
pub const DEGENERACY_ZEROTH: f64 = 1e-7;
pub const DEGENERACY_FIRST: f64 = 1e-9;
pub const FORM_TOLERANCE: f64 = 1e-4;
pub const FORM_REFINEMENT_RATIO: f64 = 2.0;
pub const CROSS_MODE_TOLERANCE: f64 = 1e-12;
pub const INVARIANT_TOLERANCE: f64 = 1e-10;
pub const PARSEVAL_TOLERANCE: f64 = 1e-8;
pub const POINCARE_SPREAD: f64 = 2.0;

const ORACLE_Z: Complex64 = Complex64::new(2.0, -1.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderProbe {
    pub case: String,
    pub k: i32,
    pub probe: f64,
    pub order: SchemeOrder,
}

fn disk_problem(n: usize, k: i32) -> Result<RadialProblem> {
    RadialProblem::new(
        vec![RadialSegment::new(0.0, 1.0, 1.0, ORACLE_Z, n)?],
        vec![],
        InnerBoundary::Regular,
        OuterBoundary::Neumann(bessel_oracle_derivative(ORACLE_Z, k, 1.0)?),
    )
}

fn layered_problem() -> Result<RadialProblem> {
    let segs = vec![
        RadialSegment::new(0.0, 1.0, 3.0, c(4.5, -6.0), 64)?,
        RadialSegment::new(1.0, 1.05, 2.0, c(1.6, -1.0), 16)?,
        RadialSegment::new(1.05, 2.0, 1.0, c(1.0, -1.0), 64)?,
    ];
    let interfaces = vec![
        InterfaceCondition::homogeneous(1.0),
        InterfaceCondition::homogeneous(1.05),
    ];
    RadialProblem::new(
        segs,
        interfaces,
        InnerBoundary::Regular,
        OuterBoundary::Neumann(c(1.0, 0.0)),
    )
}

/// Observed order under two grid doublings, on a homogeneous disk and on a
/// three-layer problem, for modes 0, 1 and 2.
pub fn scheme_orders() -> Result<Vec<OrderProbe>> {
    let mut out = Vec::new();
    for k in 0..3 {
        out.push(OrderProbe {
            case: "disk".into(),
            k,
            probe: 0.5,
            order: estimate_scheme_order(&disk_problem(64, k)?, k, 0.5)?,
        });
        let layered = layered_problem()?;
        for probe in [0.5, 1.5] {
            out.push(OrderProbe {
                case: "layered".into(),
                k,
                probe,
                order: estimate_scheme_order(&layered, k, probe)?,
            });
        }
    }
    Ok(out)
}

/// Largest nodal error against `J_k(sqrt(z) r)`, relative to the largest `|u|`.
pub fn oracle_errors() -> Result<Vec<(i32, f64)>> {
    (0..3)
        .map(|k| {
            let sol = disk_problem(ORACLE_INTERVALS, k)?.solve(k)?;
            let s = &sol.segments[0];
            let mut worst: f64 = 0.0;
            for (&r, u) in s.r.iter().zip(&s.u) {
                worst = worst.max((u - bessel_oracle(ORACLE_Z, k, r)?).norm());
            }
            Ok((k, worst / sol.max_abs()))
        })
        .collect()
}

pub fn scheme_checks() -> Result<Vec<Check>> {
    let orders = scheme_orders()?;
    let ok = orders.iter().all(
        |p| matches!(p.order, SchemeOrder::Observed(o) if o >= ORDER_RANGE.0 && o <= ORDER_RANGE.1),
    );
    let detail: Vec<String> = orders
        .iter()
        .map(|p| match p.order {
            SchemeOrder::Observed(o) => format!("{} k={} r={}: {o:.3}", p.case, p.k, p.probe),
            SchemeOrder::Indeterminate => {
                format!("{} k={} r={}: indeterminate", p.case, p.k, p.probe)
            }
        })
        .collect();
    let oracle = oracle_errors()?;
    let worst = oracle.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(vec![
        Check::new("radial scheme order in [1.8, 2.2]", ok, detail.join("; ")),
        Check::new(
            "disk modes 0..2 match the Bessel oracle",
            worst < ORACLE_TOLERANCE,
            format!("worst relative nodal error {worst:.3e} at N = {ORACLE_INTERVALS}"),
        ),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    /// `||u - u0||_{H1} / ||u||_{H1}`.
    pub zeroth: f64,
    /// `||u1||_{H1} / ||u0||_{H1}`.
    pub first: f64,
}

impl Degeneracy {
    pub fn check(&self) -> Check {
        Check::new(
            "uniform materials: u = u0 and u1 = 0",
            self.zeroth < DEGENERACY_ZEROTH && self.first < DEGENERACY_FIRST,
            format!(
                "|u - u0|/|u| = {:.3e}, |u1|/|u0| = {:.3e}",
                self.zeroth, self.first
            ),
        )
    }
}

/// Same medium everywhere, so the membrane is invisible.
pub fn degeneracy(
    geom: &CircularGeometry,
    phi: &BoundarySpectrum,
    grid: &GridSpec,
) -> Result<Degeneracy> {
    let m = MaterialSet::uniform(2.0, c(1.0, -1.0))?;
    let u = solve_full(geom, &m, phi, grid)?;
    let exp = solve_asymptotic(geom, &m, phi, grid, JumpForm::Reduced)?;
    let nu = field_h1(&u)?;
    let n0 = field_h1(&exp.order0)?;
    Ok(Degeneracy {
        zeroth: if nu > 0.0 {
            field_h1(&u.sub(&exp.order0)?)? / nu
        } else {
            0.0
        },
        first: if n0 > 0.0 {
            field_h1(&exp.order1)? / n0
        } else {
            0.0
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormEquivalence {
    /// Relative H1 gap between the two order-one fields on `G`, `2G`, `4G`.
    pub relative: Vec<f64>,
}

impl FormEquivalence {
    pub fn ratios(&self) -> Vec<f64> {
        self.relative.windows(2).map(|w| w[0] / w[1]).collect()
    }

    pub fn check(&self) -> Check {
        let ratios = self.ratios();
        let ok =
            self.relative[0] < FORM_TOLERANCE && ratios.iter().all(|&r| r >= FORM_REFINEMENT_RATIO);
        let fmt = |v: &[f64], p: usize| {
            v.iter()
                .map(|x| format!("{x:.*e}", p))
                .collect::<Vec<_>>()
                .join(", ")
        };
        Check::new(
            "reduced and curvature jump forms agree",
            ok,
            format!(
                "relative gap [{}], shrink ratios [{}]",
                fmt(&self.relative, 3),
                fmt(&ratios, 2)
            ),
        )
    }
}

pub fn form_equivalence(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    phi: &BoundarySpectrum,
    grid: &GridSpec,
) -> Result<FormEquivalence> {
    let relative = [1, 2, 4]
        .iter()
        .map(|&f| {
            let exp = solve_asymptotic(geom, materials, phi, &grid.scaled(f), JumpForm::Reduced)?;
            let curv = solve_order1(&exp.order0, materials, geom, JumpForm::Curvature)?;
            Ok(field_h1(&exp.order1.sub(&curv)?)? / field_h1(&exp.order1)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FormEquivalence { relative })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSuite {
    /// `(max_{k != 2} max|u_k| / max|u_2|)^2` for data in mode 2 only.
    pub cross_mode_energy: f64,
    pub rotation_error: f64,
    pub linearity_error: f64,
    pub green_residual: f64,
    pub transmission_residual: f64,
    /// `10 dr^2`, `dr` the largest spacing next to an interface.
    pub transmission_bound: f64,
    pub parseval_error: f64,
    pub deterministic: bool,
}

impl InvariantSuite {
    pub fn checks(&self) -> Vec<Check> {
        let e = |v: f64| format!("{v:.3e}");
        vec![
            Check::new(
                "mode decoupling",
                self.cross_mode_energy < CROSS_MODE_TOLERANCE,
                e(self.cross_mode_energy),
            ),
            Check::new(
                "rotation equivariance",
                self.rotation_error < INVARIANT_TOLERANCE,
                e(self.rotation_error),
            ),
            Check::new(
                "linearity",
                self.linearity_error < INVARIANT_TOLERANCE,
                e(self.linearity_error),
            ),
            Check::new(
                "Green identity",
                self.green_residual < GREEN_TOLERANCE,
                e(self.green_residual),
            ),
            Check::new(
                "transmission residual <= 10 dr^2",
                self.transmission_residual <= self.transmission_bound,
                format!(
                    "{} (bound {})",
                    e(self.transmission_residual),
                    e(self.transmission_bound)
                ),
            ),
            Check::new(
                "Parseval consistency",
                self.parseval_error < PARSEVAL_TOLERANCE,
                e(self.parseval_error),
            ),
            Check::new("deterministic output", self.deterministic, ""),
        ]
    }
}

fn sample_error(
    a: &FieldExpansion,
    b: impl Fn(f64, f64) -> Result<Complex64>,
    radii: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &r in radii {
        for j in 0..12 {
            let t = 2.0 * PI * j as f64 / 12.0;
            worst = worst.max((a.eval(r, t)? - b(r, t)?).norm());
        }
    }
    Ok(worst / a.max_abs().max(f64::MIN_POSITIVE))
}

/// `||u||_{H1}` from samples of the synthesized field on an `M`-point angular
/// grid, compared with the mode-sum value.
pub fn parseval_error(field: &FieldExpansion) -> Result<f64> {
    let m = 4 * field.k_max() + 8;
    let mut total = 0.0;
    for &reg in &field.regions {
        let i = field.region_index(reg).expect("listed region");
        let (_, first) = field
            .modes()
            .next()
            .ok_or_else(|| Error::invalid("empty field"))?;
        let r = &first.segments[i].r;
        let per_mode: Vec<(f64, &[Complex64], Vec<Complex64>)> = field
            .modes()
            .map(|(k, s)| {
                let u = &s.segments[i].u;
                (k as f64, u.as_slice(), derivative(r, u))
            })
            .collect();
        let mut f = vec![0.0; r.len()];
        for t in 0..m {
            let theta = 2.0 * PI * t as f64 / m as f64;
            for (j, &rj) in r.iter().enumerate() {
                let (mut u, mut ur, mut ut) = (
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                );
                for (k, uk, dk) in &per_mode {
                    let e = Complex64::from_polar(1.0, k * theta);
                    u += uk[j] * e;
                    ur += dk[j] * e;
                    ut += uk[j] * e * Complex64::new(0.0, *k);
                }
                let ang = if rj > 0.0 { ut.norm_sqr() / rj } else { 0.0 };
                f[j] += (rj * (u.norm_sqr() + ur.norm_sqr()) + ang) * (2.0 * PI / m as f64);
            }
        }
        total += simpson(r, &f);
    }
    let quad = total.sqrt();
    let modal = field_h1(field)?;
    Ok((quad - modal).abs() / modal.max(f64::MIN_POSITIVE))
}

pub fn invariant_suite(
    geom: &CircularGeometry,
    materials: &MaterialSet,
    phi: &BoundarySpectrum,
    grid: &GridSpec,
) -> Result<InvariantSuite> {
    let radius = geom.outer_radius();
    let k_max = phi.k_max();
    let solve = |data: &BoundarySpectrum| solve_full(geom, materials, data, grid);
    let radii = [
        0.3 * geom.r0(),
        geom.r0() + 0.5 * geom.h(),
        0.5 * (geom.r0() + radius),
        radius,
    ];

    let single = solve(&BoundarySpectrum::from_modes(
        k_max,
        radius,
        &[(2, c(1.0, 0.0))],
    )?)?;
    let main = single.mode(2).map(|m| m.max_abs()).unwrap_or(0.0);
    let leak = single
        .modes()
        .filter(|(k, _)| *k != 2)
        .map(|(_, m)| m.max_abs())
        .fold(0.0, f64::max);

    let u = solve(phi)?;
    let alpha = 0.7;
    let rotated = solve(&phi.rotated(alpha))?;
    let rotation_error = sample_error(&rotated, |r, t| u.eval(r, t - alpha), &radii)?;

    let other = BoundarySpectrum::from_modes(k_max, radius, &[(0, c(1.0, 0.0)), (2, c(0.0, 0.3))])?;
    let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
    let mixed: Vec<(i32, Complex64)> = (-(k_max as i32)..=k_max as i32)
        .map(|k| (k, a * phi.coeff(k) + b * other.coeff(k)))
        .collect();
    let combined = solve(&BoundarySpectrum::from_modes(k_max, radius, &mixed)?)?;
    let u2 = solve(&other)?;
    let linearity_error = sample_error(
        &combined,
        |r, t| Ok(a * u.eval(r, t)? + b * u2.eval(r, t)?),
        &radii,
    )?;

    let r0 = geom.r0();
    let dr = [
        r0 / grid.n_core as f64,
        geom.h() / grid.n_membrane as f64,
        (radius - r0 - geom.h()) / grid.n_exterior as f64,
    ];
    let dr = if radius > r0 + geom.h() {
        dr[0].max(dr[1]).max(dr[2])
    } else {
        dr[0].max(dr[1])
    };

    let again = solve(phi)?;
    let deterministic = serde_json::to_string(&u)? == serde_json::to_string(&again)?;

    Ok(InvariantSuite {
        cross_mode_energy: if main > 0.0 {
            (leak / main).powi(2)
        } else {
            f64::INFINITY
        },
        rotation_error,
        linearity_error,
        green_residual: u.green_check().relative_residual,
        transmission_residual: u.transmission_residual(),
        transmission_bound: 10.0 * dr * dr,
        parseval_error: parseval_error(&u)?,
        deterministic,
    })
}

/// Weighted-norm ratio of one fixed membrane function across an `h` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSweep {
    pub points: Vec<PoincareRatio>,
}

/// Samples in `eta` of the fixed family `e^{i theta} + 0.5 e^{3 i theta}`.
/// Any `eta` dependence adds a `1/h` term to the denominator, so this
/// constant-in-`eta` family gives the slowest decay of the ratio in `h`.
pub fn poincare_family(n_eta: usize) -> Vec<(i32, Vec<Complex64>)> {
    vec![(1, vec![c(1.0, 0.0); n_eta]), (3, vec![c(0.5, 0.0); n_eta])]
}

impl PoincareSweep {
    pub fn spread(&self) -> f64 {
        let max = self.points.iter().map(|p| p.ratio).fold(0.0, f64::max);
        let min = self
            .points
            .iter()
            .map(|p| p.ratio)
            .fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn check(&self) -> Check {
        let ratios: Vec<String> = self
            .points
            .iter()
            .map(|p| format!("h={}: {:.4e} (ratio/h {:.4})", p.h, p.ratio, p.ratio / p.h))
            .collect();
        Check::new(
            "weighted-norm ratio spread < 2 across the h sweep",
            self.spread() < POINCARE_SPREAD,
            format!("spread {:.3}; {}", self.spread(), ratios.join("; ")),
        )
    }

    pub fn report(&self) -> Result<ConvergenceReport> {
        let points = self
            .points
            .iter()
            .map(|p| ConvergencePoint {
                x: p.h,
                channels: [
                    ("ratio".to_string(), p.ratio),
                    ("ratio_over_h".to_string(), p.ratio / p.h),
                ]
                .into_iter()
                .collect(),
                report: None,
            })
            .collect();
        ConvergenceReport::new("h", points, 0.0)
    }
}

pub fn poincare_sweep(geom: &CircularGeometry, hs: &[f64]) -> Result<PoincareSweep> {
    let w = poincare_family(65);
    let points = hs
        .iter()
        .map(|&h| poincare_diagnostic(&w, &geom.with_h(h)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(PoincareSweep { points })
}
