//! Verification scenarios shared by `harvest verify` and the acceptance suite.

use std::f64::consts::PI;

use harvest_core::continuation::{self, TraceOptions};
use harvest_core::newton::{self, MonotoneOptions, MonotoneResult};
use harvest_core::{forms, Mesh, MeshKind, Params};
use serde::Serialize;

use crate::config::J01;
use crate::{parallel_map, CliError};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.to_string(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    /// Passes when `value < limit`.
    pub fn below(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.to_string(),
            value,
            limit,
            passed: value < limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.to_string(),
            value,
            limit,
            passed: value >= limit,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub family: String,
    pub lambda: f64,
    pub sup_norm: f64,
    pub energy_defect: f64,
    pub residual: f64,
}

struct Family {
    label: &'static str,
    kind: MeshKind,
    extent: f64,
    p: f64,
    q: f64,
    alpha: f64,
    beta: f64,
    cap: f64,
}

const FAMILIES: &[Family] = &[
    Family {
        label: "resonant pq>1",
        kind: MeshKind::Interval,
        extent: PI,
        p: 3.0,
        q: 0.5,
        alpha: 0.0,
        beta: 1.0,
        cap: 50.0,
    },
    Family {
        label: "resonant pq=1",
        kind: MeshKind::Interval,
        extent: PI,
        p: 2.0,
        q: 0.5,
        alpha: 0.0,
        beta: 1.0,
        cap: 50.0,
    },
    Family {
        label: "resonant pq<1",
        kind: MeshKind::Interval,
        extent: PI,
        p: 1.5,
        q: 0.5,
        alpha: 0.0,
        beta: 1.0,
        cap: 50.0,
    },
    Family {
        label: "nonresonant",
        kind: MeshKind::Interval,
        extent: 2.0 * PI,
        p: 2.0,
        q: 0.5,
        alpha: 0.0,
        beta: 1.0,
        cap: 50.0,
    },
    Family {
        label: "continuum beta=0.5",
        kind: MeshKind::Interval,
        extent: PI,
        p: 2.0,
        q: 0.5,
        alpha: 1e-2,
        beta: 0.5,
        cap: 50.0,
    },
    Family {
        label: "disk pq>1",
        kind: MeshKind::RadialDisk,
        extent: J01,
        p: 3.0,
        q: 0.5,
        alpha: 0.0,
        beta: 1.0,
        cap: 20.0,
    },
    Family {
        label: "disk pq<1",
        kind: MeshKind::RadialDisk,
        extent: J01,
        p: 1.5,
        q: 0.5,
        alpha: 0.0,
        beta: 1.0,
        cap: 20.0,
    },
];

/// Positive solutions with `λ > 0` collected along branches in every regime.
pub fn regime_sweep(n: usize) -> Result<Vec<Sample>, CliError> {
    let runs = parallel_map(FAMILIES, |f| -> Result<Vec<Sample>, CliError> {
        let mesh = Mesh::new(f.kind, f.extent, n)?;
        let opts = TraceOptions {
            lambda_cap: f.cap,
            ..Default::default()
        };
        let branch = if f.alpha > 0.0 {
            continuation::trace_regularized_continuum(&mesh, f.alpha, f.beta, f.p, f.q, &opts)?
        } else {
            continuation::trace_from_neumann(&mesh, &Params::new(f.p, f.q, 0.0, f.alpha, f.beta)?, &opts)?
        };
        let thr = mesh.trivial_threshold();
        let mut out = Vec::new();
        for pt in branch.points.iter().filter(|pt| pt.lambda > 0.0 && pt.sup_norm >= thr) {
            let par = branch.params.with_lambda(pt.lambda);
            out.push(Sample {
                family: f.label.to_string(),
                lambda: pt.lambda,
                sup_norm: pt.sup_norm,
                energy_defect: forms::energy_identity_defect(&mesh, &pt.field, &par)?.abs(),
                residual: pt.residual_norm,
            });
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for r in runs {
        all.extend(r?);
    }
    Ok(all)
}

pub fn bound_checks(samples: &[Sample], defect_tol: f64) -> Vec<Check> {
    let max_sup = samples.iter().map(|s| s.sup_norm).fold(0.0, f64::max);
    let max_defect = samples.iter().map(|s| s.energy_defect).fold(0.0, f64::max);
    vec![
        Check::at_least("solution count", samples.len() as f64, 200.0),
        Check::below("max sup norm", max_sup, 1.0),
        Check::at_most("max energy identity defect", max_defect, defect_tol),
    ]
}

/// Minimal and maximal solutions between the explicit subsolution and `u ≡ 1`
/// at resonance with `pq > 1`.
pub fn monotone_pair(n: usize, p: f64, q: f64, lambda: f64, tau: f64) -> Result<MonotoneResult, CliError> {
    let mesh = Mesh::interval(PI, n)?;
    let recipe = newton::subsolution_recipe(&mesh, p, q, tau, lambda)?;
    let params = Params::new(p, q, lambda, 0.0, 1.0)?;
    Ok(newton::monotone_iterate(
        &mesh,
        &recipe.subsolution(),
        &mesh.constant(1.0),
        &params,
        &recipe,
        &MonotoneOptions::default(),
    )?)
}

pub fn uniqueness_checks(pair: &MonotoneResult, tol: f64) -> Vec<Check> {
    let diff = pair.maximal.field.max_diff(&pair.minimal.field);
    let order = pair
        .minimal
        .field
        .values
        .iter()
        .zip(&pair.maximal.field.values)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    vec![
        Check::at_most("minimal minus maximal", order, 1e-12),
        Check::at_most("max |maximal - minimal|", diff, tol),
    ]
}
