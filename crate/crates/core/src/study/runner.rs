//! Study drivers. Each returns a [`StudyOutcome`]: the reports it produced and
//! a list of named checks, all of which must pass for a zero exit status.

use std::collections::BTreeMap;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{StudyConfig, StudyKind};
use super::diagnostics;
use crate::asymptotic_model::{
    compose, solve_asymptotic, solve_cell_neumann, solve_zm_variants, zm_hypothesis_ratio, Regime,
    ZmSolution,
};
use crate::full_model::{solve_full, FieldExpansion, GridSpec, MaterialSet, Region};
use crate::geometry::CircularGeometry;
use crate::norms_errors::{
    difference_h1, field_h1, membrane_error, ConvergencePoint, ConvergenceReport, Diagnostics,
    ErrorReport, FitOutcome, GREEN_TOLERANCE,
};
use crate::{Error, Result};

/// Lower bound on the fitted rate of the first-order channels.
pub const SLOPE_MIN: f64 = 1.45;
/// Accepted range for the rate of the zeroth-order error in `h` and of the
/// `z_m` perturbation in `|z_m|`.
pub const UNIT_SLOPE: (f64, f64) = (0.85, 1.15);
/// Channel values below this multiple of `||u||_{H1}` count as exact.
pub const FLOOR_FRACTION: f64 = 1e-10;

const ALL_REGIONS: [Region; 3] = [Region::Core, Region::Membrane, Region::Exterior];

pub type Channels = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub kind: StudyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single: Option<ErrorReport>,
    pub reports: BTreeMap<String, ConvergenceReport>,
    pub checks: Vec<Check>,
    /// Fields exported next to the reports; not part of the JSON.
    #[serde(skip)]
    pub fields: Vec<(String, FieldExpansion)>,
}

impl StudyOutcome {
    fn new(kind: StudyKind) -> Self {
        StudyOutcome {
            kind,
            single: None,
            reports: BTreeMap::new(),
            checks: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Channel values at the finer grid of a Richardson pair, with the estimate of
/// their own discretization error.
#[derive(Debug, Clone)]
pub struct RefinedPoint {
    /// Finer grid of the accepted pair.
    pub grid: GridSpec,
    pub values: Channels,
    pub estimates: Channels,
    /// Largest estimate-to-value ratio over the checked channels above the floor.
    pub ratio: f64,
    pub subdominant: bool,
    pub doublings: u32,
    pub floor: f64,
    /// Fields on the finer grid; the first is the resolved reference.
    pub fields: Vec<FieldExpansion>,
}

/// Solve on `G` and `2G`, take the values from `2G` and estimate their error as
/// `channels(fields_2G - fields_G) / 3`. While any checked channel has an
/// estimate above `threshold` times its value, double the grid, at most
/// `max_doublings` times.
pub fn refine_point<S, C>(
    base: &GridSpec,
    max_doublings: u32,
    threshold: f64,
    checked: &[&str],
    solve: S,
    channels: C,
) -> Result<RefinedPoint>
where
    S: Fn(&GridSpec) -> Result<Vec<FieldExpansion>>,
    C: Fn(&[FieldExpansion]) -> Result<Channels>,
{
    let mut grid = *base;
    let mut coarse = solve(&grid)?;
    let mut doublings = 0;
    loop {
        let fine_grid = grid.scaled(2);
        let fine = solve(&fine_grid)?;
        let values = channels(&fine)?;
        let diffs = fine
            .iter()
            .zip(&coarse)
            .map(|(f, c)| f.restrict()?.sub(c))
            .collect::<Result<Vec<_>>>()?;
        let estimates: Channels = channels(&diffs)?
            .into_iter()
            .map(|(k, v)| (k, v / 3.0))
            .collect();
        let floor = FLOOR_FRACTION * field_h1(&fine[0])?;
        let ratio = checked
            .iter()
            .filter_map(|&name| {
                let v = *values.get(name)?;
                (v > floor).then(|| estimates.get(name).copied().unwrap_or(f64::INFINITY) / v)
            })
            .fold(0.0, f64::max);
        let subdominant = ratio <= threshold;
        if subdominant || doublings >= max_doublings {
            return Ok(RefinedPoint {
                grid: fine_grid,
                values,
                estimates,
                ratio,
                subdominant,
                doublings,
                floor,
                fields: fine,
            });
        }
        debug!(
            "estimate ratio {ratio:.3e} above {threshold}; doubling to {:?}",
            fine_grid
        );
        grid = fine_grid;
        coarse = fine;
        doublings += 1;
    }
}

fn report_for(h: f64, p: &RefinedPoint, primary: [&str; 3]) -> Result<ErrorReport> {
    let u = &p.fields[0];
    let get = |n: &str| p.values.get(n).copied().unwrap_or(0.0);
    let report = ErrorReport {
        h,
        e_core: get(primary[0]),
        e_membrane: get(primary[1]),
        e_exterior: get(primary[2]),
        diagnostics: Diagnostics {
            transmission_residual: u.transmission_residual(),
            transmission_tolerance: u.transmission_tolerance(),
            green_residual: u.green_check().relative_residual,
            discretization: p.estimates.clone(),
            subdominance_ratio: p.ratio,
            subdominant: p.subdominant,
            grid_doublings: p.doublings,
            channels: p.values.clone(),
        },
    };
    report.validate()?;
    Ok(report)
}

fn point(x: f64, report: ErrorReport) -> ConvergencePoint {
    ConvergencePoint {
        x,
        channels: report.diagnostics.channels.clone(),
        report: Some(report),
    }
}

/// The three first-order channels, their components, the zeroth-order error
/// and the error of the membrane reconstruction. Fields: `u, v, v_tilde, u0`.
fn model_channels(f: &[FieldExpansion], materials: &MaterialSet) -> Result<Channels> {
    let (u, v, v_tilde, u0) = (&f[0], &f[1], &f[2], &f[3]);
    let e = membrane_error(u, v, materials)?;
    let mut c = Channels::new();
    c.insert("core".into(), difference_h1(u, v, &[Region::Core])?);
    c.insert("membrane".into(), e.total);
    c.insert("exterior".into(), difference_h1(u, v, &[Region::Exterior])?);
    c.insert(
        "zeroth_order".into(),
        difference_h1(u, u0, &[Region::Core, Region::Exterior])?,
    );
    c.insert("membrane_l2".into(), e.l2);
    c.insert("membrane_normal_flux".into(), e.normal_flux);
    c.insert("membrane_tangential".into(), e.tangential);
    c.insert(
        "membrane_reconstruction".into(),
        difference_h1(u, v_tilde, &[Region::Membrane])?,
    );
    Ok(c)
}

const MODEL_CHECKED: [&str; 4] = ["core", "membrane", "exterior", "zeroth_order"];

fn model_point(
    cfg: &StudyConfig,
    geom: &CircularGeometry,
    materials: &MaterialSet,
) -> Result<RefinedPoint> {
    let phi = cfg.spectrum(geom.outer_radius())?;
    let form = cfg.solver.jump_form;
    refine_point(
        &cfg.grid()?,
        cfg.solver.max_doublings,
        cfg.solver.subdominance,
        &MODEL_CHECKED,
        |g| {
            let u = solve_full(geom, materials, &phi, g)?;
            let exp = solve_asymptotic(geom, materials, &phi, g, form)?;
            let comp = compose(&exp)?;
            Ok(vec![u, comp.v, comp.v_tilde, exp.order0])
        },
        |f| model_channels(f, materials),
    )
}

fn sweep<T, F>(xs: &[T], f: F) -> Result<Vec<RefinedPoint>>
where
    T: Sync,
    F: Fn(&T) -> Result<RefinedPoint> + Sync + Send,
{
    xs.par_iter().map(f).collect()
}

/// `max ||u||_{H1}`-scaled floor over the sweep.
fn sweep_floor(points: &[RefinedPoint]) -> f64 {
    points.iter().map(|p| p.floor).fold(0.0, f64::max)
}

fn slope_check(
    report: &ConvergenceReport,
    channel: &str,
    accept: impl Fn(f64) -> bool,
    want: &str,
) -> Check {
    let name = format!("{channel} rate {want}");
    match report.fits.get(channel) {
        Some(FitOutcome::Fitted(fit)) => {
            let mut detail = format!("slope {:.3} +/- {:.3}", fit.slope, fit.slope_stderr);
            if fit.stagnant {
                detail.push_str("; stagnant: discretization-dominated, try doubling the grid");
                warn!("{channel}: {detail}");
            }
            Check::new(name, accept(fit.slope), detail)
        }
        // A channel sitting at the solver floor everywhere has no rate to check.
        Some(FitOutcome::Indeterminate { reason }) => {
            let at_floor = reason.contains("solver floor");
            Check::new(name, at_floor, format!("indeterminate: {reason}"))
        }
        None => Check::new(name, false, "channel missing"),
    }
}

fn subdominance_check(points: &[RefinedPoint], threshold: f64) -> Check {
    let worst = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let doublings: Vec<String> = points.iter().map(|p| p.doublings.to_string()).collect();
    Check::new(
        "discretization subdominance",
        points.iter().all(|p| p.subdominant),
        format!(
            "worst estimate/error {worst:.3e} (limit {threshold}); grid doublings per point [{}]",
            doublings.join(", ")
        ),
    )
}

fn solver_diagnostics_check(reports: &[&ErrorReport]) -> Check {
    let ok = reports.iter().all(|r| {
        let d = &r.diagnostics;
        d.transmission_residual <= d.transmission_tolerance && d.green_residual < GREEN_TOLERANCE
    });
    let worst_t = reports
        .iter()
        .map(|r| {
            r.diagnostics.transmission_residual
                / r.diagnostics.transmission_tolerance.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let worst_g = reports
        .iter()
        .map(|r| r.diagnostics.green_residual)
        .fold(0.0, f64::max);
    Check::new(
        "solver diagnostics",
        ok,
        format!("transmission residual/tolerance <= {worst_t:.3}, Green residual <= {worst_g:.3e}"),
    )
}

fn in_range(r: (f64, f64)) -> impl Fn(f64) -> bool {
    move |s| s >= r.0 && s <= r.1
}

pub fn run(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    info!("running {} study", cfg.kind.name());
    match cfg.kind {
        StudyKind::Single => run_single(cfg),
        StudyKind::Converge => run_converge(cfg),
        StudyKind::ZmSweep => run_zm_sweep(cfg),
        StudyKind::CellNeumann => run_cell_neumann(cfg),
        StudyKind::Diagnostics => run_diagnostics(cfg),
    }
}

/// Resolved and asymptotic solves at the first configured `h`.
pub fn run_single(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let h = cfg.geometry.h[0];
    let geom = cfg.geometry_for(h)?;
    let materials = cfg.material_set()?;
    let p = model_point(cfg, &geom, &materials)?;
    let report = report_for(h, &p, ["core", "membrane", "exterior"])?;
    let mut out = StudyOutcome::new(StudyKind::Single);
    out.checks.push(solver_diagnostics_check(&[&report]));
    out.checks.push(subdominance_check(
        std::slice::from_ref(&p),
        cfg.solver.subdominance,
    ));
    let [u, v, v_tilde, u0]: [FieldExpansion; 4] = p
        .fields
        .try_into()
        .map_err(|_| Error::Report("unexpected field count".into()))?;
    out.fields = vec![
        ("u".into(), u),
        ("v".into(), v),
        ("v_tilde".into(), v_tilde),
        ("u0".into(), u0),
    ];
    out.single = Some(report);
    Ok(out)
}

pub fn run_converge(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let materials = cfg.material_set()?;
    let hs = &cfg.geometry.h;
    let points = sweep(hs, |&h| model_point(cfg, &cfg.geometry_for(h)?, &materials))?;
    let reports = hs
        .iter()
        .zip(&points)
        .map(|(&h, p)| report_for(h, p, ["core", "membrane", "exterior"]))
        .collect::<Result<Vec<_>>>()?;
    let report = ConvergenceReport::new(
        "h",
        reports
            .iter()
            .cloned()
            .zip(hs)
            .map(|(r, &h)| point(h, r))
            .collect(),
        sweep_floor(&points),
    )?;

    let mut out = StudyOutcome::new(StudyKind::Converge);
    for ch in ["core", "membrane", "exterior"] {
        out.checks
            .push(slope_check(&report, ch, |s| s >= SLOPE_MIN, ">= 1.45"));
    }
    out.checks.push(slope_check(
        &report,
        "zeroth_order",
        in_range(UNIT_SLOPE),
        "in [0.85, 1.15]",
    ));
    out.checks
        .push(subdominance_check(&points, cfg.solver.subdominance));
    out.checks.push(solver_diagnostics_check(
        &reports.iter().collect::<Vec<_>>(),
    ));
    out.reports.insert("converge".into(), report);
    Ok(out)
}

/// Curve (i): `||u(z_m) - u(0)||_{H1}` against `|z_m|` at fixed `h`.
/// Curve (ii): error of the `z_m = 0` asymptotics against `h` at a tiny `z_m`.
pub fn run_zm_sweep(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let base = cfg.material_set()?;
    let grid = cfg.grid()?;
    let bound = cfg.zm.hypothesis_bound;
    let (doublings, threshold) = (cfg.solver.max_doublings, cfg.solver.subdominance);

    let geom = cfg.geometry_for(cfg.zm.h)?;
    let phi = cfg.spectrum(geom.outer_radius())?;
    let zms = cfg.zm_values()?;
    for &zm in &zms {
        zm_hypothesis_ratio(zm, bound)?;
    }
    let perturbation = sweep(&zms, |&zm| {
        let m = base.with_membrane_z(zm)?;
        refine_point(
            &grid,
            doublings,
            threshold,
            &["h1"],
            |g| {
                Ok(vec![
                    solve_full(&geom, &m, &phi, g)?,
                    solve_full(&geom, &m.with_zero_membrane(), &phi, g)?,
                ])
            },
            |f| {
                Ok(Channels::from([(
                    "h1".to_string(),
                    difference_h1(&f[0], &f[1], &ALL_REGIONS)?,
                )]))
            },
        )
    })?;
    let zm_points = zms
        .iter()
        .zip(&perturbation)
        .map(|(zm, p)| ConvergencePoint {
            x: zm.norm(),
            channels: p.values.clone(),
            report: None,
        })
        .collect();
    let zm_report = ConvergenceReport::new("abs_zm", zm_points, sweep_floor(&perturbation))?;

    let tiny = base.with_membrane_z(cfg.zm_tiny())?;
    let hs = &cfg.geometry.h;
    let asym = sweep(hs, |&h| {
        let geom = cfg.geometry_for(h)?;
        let phi = cfg.spectrum(geom.outer_radius())?;
        refine_point(
            &grid,
            doublings,
            threshold,
            &["total"],
            |g| {
                let u = solve_full(&geom, &tiny, &phi, g)?;
                let ZmSolution::Asymptotic(exp) =
                    solve_zm_variants(&geom, &tiny, &phi, g, Regime::Biological, bound)?
                else {
                    return Err(Error::Report(
                        "biological regime returned a resolved field".into(),
                    ));
                };
                Ok(vec![u, compose(&exp)?.v_tilde])
            },
            |f| {
                let mut c = Channels::new();
                c.insert("total".into(), difference_h1(&f[0], &f[1], &ALL_REGIONS)?);
                for r in ALL_REGIONS {
                    c.insert(r.name().into(), difference_h1(&f[0], &f[1], &[r])?);
                }
                Ok(c)
            },
        )
    })?;
    let h_points = hs
        .iter()
        .zip(&asym)
        .map(|(&h, p)| ConvergencePoint {
            x: h,
            channels: p.values.clone(),
            report: None,
        })
        .collect();
    let h_report = ConvergenceReport::new("h", h_points, sweep_floor(&asym))?;

    let mut out = StudyOutcome::new(StudyKind::ZmSweep);
    out.checks.push(slope_check(
        &zm_report,
        "h1",
        in_range(UNIT_SLOPE),
        "in [0.85, 1.15] in |z_m|",
    ));
    out.checks.push(slope_check(
        &h_report,
        "total",
        |s| s >= SLOPE_MIN,
        ">= 1.45 at tiny z_m",
    ));
    let all: Vec<RefinedPoint> = perturbation.into_iter().chain(asym).collect();
    out.checks.push(subdominance_check(&all, threshold));
    out.reports.insert("zm_perturbation".into(), zm_report);
    out.reports.insert("zm_zero_asymptotics".into(), h_report);
    Ok(out)
}

/// Neumann data on the outer membrane circle of an isolated cell; the error
/// `W` is measured over the core and the membrane.
pub fn run_cell_neumann(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let materials = cfg.material_set()?;
    let hs = &cfg.geometry.h;
    let r0 = cfg.geometry.r0;
    let points = sweep(hs, |&h| {
        let geom = CircularGeometry::cell(r0, h)?;
        let gamma = cfg.spectrum(r0 + h)?;
        refine_point(
            &cfg.grid()?,
            cfg.solver.max_doublings,
            cfg.solver.subdominance,
            &["W"],
            |g| {
                let s = solve_cell_neumann(&geom, &materials, &gamma, g)?;
                Ok(vec![s.reference, s.approximation])
            },
            |f| {
                let mut c = Channels::new();
                c.insert(
                    "W".into(),
                    difference_h1(&f[0], &f[1], &[Region::Core, Region::Membrane])?,
                );
                c.insert("core".into(), difference_h1(&f[0], &f[1], &[Region::Core])?);
                c.insert(
                    "membrane".into(),
                    difference_h1(&f[0], &f[1], &[Region::Membrane])?,
                );
                Ok(c)
            },
        )
    })?;
    let pts = hs
        .iter()
        .zip(&points)
        .map(|(&h, p)| ConvergencePoint {
            x: h,
            channels: p.values.clone(),
            report: None,
        })
        .collect();
    let report = ConvergenceReport::new("h", pts, sweep_floor(&points))?;
    let mut out = StudyOutcome::new(StudyKind::CellNeumann);
    out.checks
        .push(slope_check(&report, "W", |s| s >= SLOPE_MIN, ">= 1.45"));
    out.checks
        .push(subdominance_check(&points, cfg.solver.subdominance));
    out.reports.insert("cell_neumann".into(), report);
    Ok(out)
}

/// Scheme order, degeneracy, form equivalence, the invariant suite and the
/// weighted-norm ratio sweep.
pub fn run_diagnostics(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::new(StudyKind::Diagnostics);
    out.checks.extend(diagnostics::scheme_checks()?);
    let h = cfg.geometry.h[0];
    let geom = cfg.geometry_for(h)?;
    let phi = cfg.spectrum(geom.outer_radius())?;
    let grid = cfg.grid()?;
    out.checks
        .push(diagnostics::degeneracy(&geom, &phi, &grid)?.check());
    out.checks
        .push(diagnostics::form_equivalence(&geom, &cfg.material_set()?, &phi, &grid)?.check());
    out.checks
        .extend(diagnostics::invariant_suite(&geom, &cfg.material_set()?, &phi, &grid)?.checks());
    let sweep = diagnostics::poincare_sweep(&cfg.geometry_for(h)?, &cfg.geometry.h)?;
    out.checks.push(sweep.check());
    out.reports.insert("poincare".into(), sweep.report()?);
    Ok(out)
}
