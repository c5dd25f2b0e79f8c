use std::f64::consts::PI;

use harvest_core::continuation::{self, Branch, Endpoint, TraceOptions};
use harvest_core::{domain, forms, spectra, Mesh, Params, Regime};

const N: usize = 128;

fn opts(cap: f64) -> TraceOptions {
    TraceOptions {
        lambda_cap: cap,
        ..Default::default()
    }
}

fn trace(p: f64, q: f64, cap: f64) -> (Mesh, Branch) {
    let mesh = Mesh::interval(PI, N).unwrap();
    let params = Params::new(p, q, 0.0, 0.0, 1.0).unwrap();
    let b = continuation::trace_from_neumann(&mesh, &params, &opts(cap)).unwrap();
    (mesh, b)
}

fn check_points(mesh: &Mesh, b: &Branch, tol: f64) {
    let thr = mesh.trivial_threshold();
    for (i, pt) in b.points.iter().enumerate() {
        assert!(pt.lambda >= 0.0, "point {i} has lambda {}", pt.lambda);
        assert!(pt.residual_norm <= tol, "point {i} residual {}", pt.residual_norm);
        let par = b.params.with_lambda(pt.lambda);
        let r = forms::residual_norm(mesh, &pt.field, &par).unwrap();
        assert!(r <= 10.0 * tol, "point {i} recomputed residual {r}");
        if pt.lambda > 0.0 && pt.sup_norm >= thr {
            assert!(pt.sup_norm < 1.0, "point {i} sup {}", pt.sup_norm);
            assert!(pt.field.min() > -thr, "point {i} min {}", pt.field.min());
        }
        let h1 = domain::h1_norm(mesh, &pt.field).unwrap();
        assert!((h1 - pt.h1_norm).abs() <= 1e-12 * (1.0 + h1));
    }
    assert_eq!(b.points[0].lambda, 0.0);
    assert!((b.points[0].sup_norm - 1.0).abs() < 1e-12);
}

#[test]
fn superlinear_branch_reaches_the_cap() {
    let (mesh, b) = trace(3.0, 0.5, 20.0);
    assert_eq!(b.params.regime(), Regime::PqGreater);
    check_points(&mesh, &b, 1e-9);
    assert_eq!(b.endpoints[0], Endpoint::NeumannState { value: 1.0 });
    assert!(matches!(b.endpoints[1], Endpoint::RangeExhausted { lambda } if (lambda - 20.0).abs() < 1e-9));
    assert!(b.folds.is_empty());
    assert!(!b.is_partial());
    let sups: Vec<f64> = b.points.iter().map(|p| p.sup_norm).collect();
    assert!(sups.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn sublinear_branch_turns_back_to_the_trivial_line() {
    let (mesh, b) = trace(1.5, 0.5, 20.0);
    assert_eq!(b.params.regime(), Regime::PqLess);
    check_points(&mesh, &b, 1e-9);
    assert_eq!(b.folds.len(), 1);
    assert!(matches!(b.endpoints[1], Endpoint::TrivialLine { lambda } if lambda == 0.0));
    let lmax = b.lambda_max;
    // The fold is interpolated between samples, so it may sit slightly above the largest one.
    assert!(
        (b.folds[0].lambda - lmax).abs() <= 0.01 * lmax,
        "fold {} vs {lmax}",
        b.folds[0].lambda
    );
    // Below the fold there are two solutions, above it none.
    let last = b.points.last().unwrap();
    assert_eq!(
        continuation::lambda_crossings(&b, 0.75 * lmax).len(),
        2,
        "last point {} {}",
        last.lambda,
        last.sup_norm
    );
    assert!(continuation::lambda_crossings(&b, 1.1 * lmax).is_empty());
}

#[test]
fn critical_branch_contacts_a_positive_lambda() {
    let (mesh, b) = trace(2.0, 0.5, 20.0);
    assert_eq!(b.params.regime(), Regime::PqEqual);
    check_points(&mesh, &b, 1e-9);
    match b.endpoints[1] {
        Endpoint::TrivialLine { lambda } => assert!(lambda > 1.0 && lambda < 1.5, "contact at {lambda}"),
        ref e => panic!("unexpected endpoint {e}"),
    }
    let tail = b.tail.as_ref().unwrap();
    assert!(tail.positive_contact);
    assert!(b.folds.is_empty());
    assert_eq!(b.lambda_bar(), None);
}

#[test]
fn consecutive_points_are_close() {
    let (mesh, b) = trace(3.0, 0.5, 5.0);
    let opts = TraceOptions::default();
    for w in b.points.windows(2) {
        let du = w[1].field.axpy(-1.0, &w[0].field);
        let d = (domain::h1_norm(&mesh, &du).unwrap().powi(2) + (w[1].lambda - w[0].lambda).powi(2)).sqrt();
        assert!(d <= 2.0 * opts.max_step + 1e-12, "step {d}");
    }
}

#[test]
fn zero_cap_keeps_the_start_point_only() {
    let (_, b) = trace(3.0, 0.5, 0.0);
    assert_eq!(b.points.len(), 1);
    assert_eq!(b.points[0].lambda, 0.0);
}

#[test]
fn branch_is_deterministic() {
    let (_, a) = trace(1.5, 0.5, 5.0);
    let (_, b) = trace(1.5, 0.5, 5.0);
    assert_eq!(a.points.len(), b.points.len());
    for (x, y) in a.points.iter().zip(&b.points) {
        assert_eq!(x.lambda.to_bits(), y.lambda.to_bits());
        assert_eq!(x.field, y.field);
    }
}

#[test]
fn continuum_start_scales_with_alpha() {
    let mesh = Mesh::interval(PI, N).unwrap();
    let lb = spectra::steklov_principal(&mesh, 0.5).unwrap().value;
    let mut starts = Vec::new();
    for alpha in [1e-3, 1e-4] {
        let b = continuation::trace_regularized_continuum(&mesh, alpha, 0.5, 2.0, 0.5, &opts(20.0)).unwrap();
        let expected = spectra::regularized_bifurcation_lambda(lb, alpha, 0.5).unwrap();
        let l0 = b.points[0].lambda;
        assert!((l0 - expected).abs() <= 0.02 * expected, "start {l0} vs {expected}");
        assert!(matches!(b.endpoints[1], Endpoint::NeumannState { value } if (value - 0.5).abs() < 1e-6));
        starts.push(l0);
    }
    let ratio = starts[0] / starts[1];
    assert!((ratio - 10f64.sqrt()).abs() < 0.05 * 10f64.sqrt(), "ratio {ratio}");
}

#[test]
fn nonresonant_branch_has_no_folds() {
    let mesh = Mesh::interval(2.0 * PI, N).unwrap();
    let params = Params::new(2.0, 0.5, 0.0, 0.0, 1.0).unwrap();
    let b = continuation::trace_from_neumann(&mesh, &params, &opts(30.0)).unwrap();
    check_points(&mesh, &b, 1e-9);
    assert!(b.folds.is_empty());
    assert!(matches!(b.endpoints[1], Endpoint::RangeExhausted { .. }));
    assert!((b.lambda_max - 30.0).abs() < 1e-9);
}

#[test]
fn disk_branch_matches_regime() {
    let mesh = Mesh::disk(2.404_825_557_695_773, 128).unwrap();
    let params = Params::new(3.0, 0.5, 0.0, 0.0, 1.0).unwrap();
    let b = continuation::trace_from_neumann(&mesh, &params, &opts(10.0)).unwrap();
    check_points(&mesh, &b, 1e-9);
    assert!(matches!(b.endpoints[1], Endpoint::RangeExhausted { .. }));
}
