use thinlayer::asymptotic_model::solve_cell_neumann;
use thinlayer::full_model::{solve_full, GridSpec, MaterialSet, Region};
use thinlayer::geometry::CircularGeometry;
use thinlayer::norms_errors::{difference_h1, field_h1};
use thinlayer::spectral::BoundarySpectrum;
use thinlayer::study::runner::{run_single, run_zm_sweep};
use thinlayer::study::StudyConfig;
use thinlayer::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn uniform_single_run_is_exact() {
    let mut cfg = StudyConfig::default();
    for (k, v) in [
        ("study.kind", "single"),
        ("geometry.h", "0.05"),
        ("materials.mu", "1.5 1.5 1.5"),
        ("materials.q_m", "1 -1"),
        ("materials.q_c", "1 -1"),
    ] {
        cfg.set(k, v).unwrap();
    }
    let out = run_single(&cfg).unwrap();
    assert!(out.passed());
    let r = out.single.unwrap();
    assert!(
        r.e_core < 1e-8 && r.e_membrane < 1e-8 && r.e_exterior < 1e-8,
        "{r:?}"
    );
    assert!(r.diagnostics.channels["zeroth_order"] < 1e-8);
}

#[test]
fn default_single_run_passes_its_checks() {
    let mut cfg = StudyConfig::default();
    cfg.set("study.kind", "single").unwrap();
    cfg.set("geometry.h", "0.05").unwrap();
    let out = run_single(&cfg).unwrap();
    assert!(out.passed(), "{:?}", out.checks);
    let r = out.single.unwrap();
    assert!(r.diagnostics.passed());
    assert!(r.e_core > 0.0 && r.e_exterior > 0.0);
}

#[test]
fn zero_zm_against_zero_zm() {
    let geom = CircularGeometry::new(1.0, 0.05, 2.0).unwrap();
    let m = MaterialSet::uniform(1.0, c(1.0, -1.0))
        .unwrap()
        .with_zero_membrane();
    let phi = BoundarySpectrum::from_modes(4, 2.0, &[(1, c(1.0, 0.0))]).unwrap();
    let grid = GridSpec::new(64, 16, 64).unwrap();
    let a = solve_full(&geom, &m, &phi, &grid).unwrap();
    let b = solve_full(&geom, &m.with_zero_membrane(), &phi, &grid).unwrap();
    assert_eq!(
        difference_h1(&a, &b, &[Region::Core, Region::Membrane, Region::Exterior]).unwrap(),
        0.0
    );
}

#[test]
fn zm_sweep_rejects_hypothesis_violation() {
    let mut cfg = StudyConfig::default();
    for (k, v) in [
        ("study.kind", "zm_sweep"),
        ("materials.mu", "1 1 1"),
        ("materials.biological", "true"),
        ("zm.direction", "1 -0.01"),
    ] {
        cfg.set(k, v).unwrap();
    }
    assert!(cfg.validate().is_err());
    assert!(run_zm_sweep(&cfg).is_err());
}

#[test]
fn cell_with_zero_data_is_zero() {
    let geom = CircularGeometry::cell(1.0, 0.05).unwrap();
    let m = MaterialSet::new([1.0, 2.0, 3.0], [c(1.0, -1.0), c(0.8, -0.5), c(1.5, -2.0)]).unwrap();
    let s = solve_cell_neumann(
        &geom,
        &m,
        &BoundarySpectrum::zeros(4, 1.05),
        &GridSpec::default(),
    )
    .unwrap();
    assert_eq!(field_h1(&s.reference).unwrap(), 0.0);
    assert_eq!(
        difference_h1(
            &s.reference,
            &s.approximation,
            &[Region::Core, Region::Membrane]
        )
        .unwrap(),
        0.0
    );
}

#[test]
fn cell_with_membrane_equal_to_core_leaves_taylor_remainder() {
    // A homogeneous disk: the core error is the Taylor remainder of the data
    // shift from r0 + h to r0, and the affine membrane profile misses the
    // curvature of u, an O(h) gradient error on a layer of width h.
    let m = MaterialSet::new(
        [1.0, 3.0, 3.0],
        [c(1.0, -1.0), c(0.5, -2.0 / 3.0), c(0.5, -2.0 / 3.0)],
    )
    .unwrap();
    let w = |h: f64| {
        let geom = CircularGeometry::cell(1.0, h).unwrap();
        let gamma = BoundarySpectrum::from_modes(4, 1.0 + h, &[(0, c(1.0, 0.0)), (2, c(0.0, 0.5))])
            .unwrap();
        let s = solve_cell_neumann(&geom, &m, &gamma, &GridSpec::default()).unwrap();
        difference_h1(
            &s.reference,
            &s.approximation,
            &[Region::Core, Region::Membrane],
        )
        .unwrap()
            / field_h1(&s.reference).unwrap()
    };
    let (a, b) = (w(0.05), w(0.025));
    assert!(a / b > 2f64.powf(1.45), "{a} {b}");
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = StudyConfig::default();
    cfg.set("boundary.mode", "0 1 0; 2 0.25 -0.5").unwrap();
    cfg.set("solver.jump_form", "curvature").unwrap();
    let path = dir.path().join("study.cfg");
    std::fs::write(&path, cfg.to_flat()).unwrap();
    assert_eq!(StudyConfig::from_file(&path).unwrap(), cfg);
}
