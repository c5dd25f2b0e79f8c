//! One function per subcommand. Each writes its files into the output
//! directory and maps failures onto [`CliError`].

use std::path::Path;

use harvest_core::analysis;
use harvest_core::continuation::{self, Branch, Endpoint, TraceOptions};
use harvest_core::newton::{self, NewtonOptions};
use harvest_core::{spectra, Field, Mesh, Params};
use serde::Serialize;

use crate::output::{num, opt, write_json, write_plot, Csv};
use crate::scenarios::{self, Check};
use crate::{parallel_map, CliError, RunConfig};

#[derive(Serialize)]
struct DomainMeta {
    kind: String,
    extent: f64,
    n: usize,
    h: f64,
}

fn domain_meta(m: &Mesh) -> DomainMeta {
    DomainMeta {
        kind: m.kind.to_string(),
        extent: m.extent,
        n: m.n,
        h: m.h,
    }
}

#[derive(Serialize)]
struct ParamsMeta {
    p: f64,
    q: f64,
    alpha: f64,
    beta: f64,
    lambda: f64,
}

fn params_meta(p: &Params) -> ParamsMeta {
    ParamsMeta {
        p: p.p,
        q: p.q,
        alpha: p.alpha,
        beta: p.beta,
        lambda: p.lambda,
    }
}

fn mesh_of(cfg: &RunConfig) -> Result<Mesh, CliError> {
    Ok(Mesh::new(cfg.kind, cfg.extent, cfg.n)?)
}

fn trace_options(cfg: &RunConfig) -> TraceOptions {
    TraceOptions {
        step: cfg.step,
        max_step: cfg.max_step,
        max_points: cfg.max_points,
        lambda_cap: cfg.lambda_cap,
        tol: cfg.tol,
        ..Default::default()
    }
}

fn field_csv(mesh: &Mesh, name: &str, f: &Field) -> Csv {
    let mut csv = Csv::new(&["index", "x", name]);
    for (i, (x, v)) in mesh.nodes.iter().zip(&f.values).enumerate() {
        csv.row(&[i.to_string(), num(*x), num(*v)]);
    }
    csv
}

#[derive(Serialize)]
struct EigMeta {
    domain: DomainMeta,
    #[serde(rename = "beta_Omega")]
    beta_omega: f64,
    residual_norm: f64,
    /// Boundary eigenvalue for the configured `beta`, when it lies below `beta_Omega`.
    lambda_beta: Option<f64>,
    lambda_beta_residual: Option<f64>,
}

pub fn eig(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mesh = mesh_of(cfg)?;
    let d = spectra::dirichlet_principal(&mesh)?;
    let stek = if cfg.beta < d.value {
        Some(spectra::steklov_principal(&mesh, cfg.beta)?)
    } else {
        None
    };
    field_csv(&mesh, "phi", &d.func).write(&out.join("eig.csv"))?;
    if let Some(s) = &stek {
        field_csv(&mesh, "phi_beta", &s.func).write(&out.join("eig_boundary.csv"))?;
    }
    write_json(
        &out.join("eig.json"),
        &EigMeta {
            domain: domain_meta(&mesh),
            beta_omega: d.value,
            residual_norm: d.residual_norm,
            lambda_beta: stek.as_ref().map(|s| s.value),
            lambda_beta_residual: stek.as_ref().map(|s| s.residual_norm),
        },
    )
}

#[derive(Serialize)]
struct SolveMeta {
    domain: DomainMeta,
    params: ParamsMeta,
    method: &'static str,
    residual_norm: f64,
    iterations: usize,
    mu1: Option<f64>,
    trivial: bool,
    max_value: f64,
    gap_to_one: f64,
    boundary_min: f64,
    boundary_positive_weight: f64,
    energy_identity_defect: f64,
    profile_distance: Option<f64>,
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mesh = mesh_of(cfg)?;
    let params = cfg.params()?;
    let nopts = NewtonOptions {
        tol: cfg.tol,
        ..Default::default()
    };
    let guess = mesh.constant(params.neumann_state());
    let (sol, method) = match newton::newton_solve(&mesh, &guess, &params, &nopts) {
        Ok(s) if !s.trivial => (s, "newton"),
        _ => {
            // Follow the branch from the constant state to the requested λ.
            let opts = TraceOptions {
                lambda_cap: params.lambda.max(cfg.lambda_cap),
                ..trace_options(cfg)
            };
            let b = continuation::trace_from_neumann(&mesh, &params.with_lambda(0.0), &opts)?;
            let fields = continuation::solutions_at(&mesh, &b, params.lambda, cfg.tol)?;
            let f = fields
                .into_iter()
                .next()
                .ok_or_else(|| CliError::Numeric(format!("no solution found at lambda = {}", params.lambda)))?;
            (newton::newton_solve(&mesh, &f, &params, &nopts)?, "continuation")
        }
    };
    let phi = spectra::dirichlet_principal(&mesh)?.func;
    let rep = analysis::check_solution_report(&mesh, &sol, &phi)?;
    field_csv(&mesh, "u", &sol.field).write(&out.join("solution.csv"))?;
    write_json(
        &out.join("solution.json"),
        &SolveMeta {
            domain: domain_meta(&mesh),
            params: params_meta(&params),
            method,
            residual_norm: sol.residual_norm,
            iterations: sol.iterations,
            mu1: sol.mu1,
            trivial: sol.trivial,
            max_value: rep.max_value,
            gap_to_one: rep.gap_to_one,
            boundary_min: rep.boundary_min,
            boundary_positive_weight: rep.boundary_positive_weight,
            energy_identity_defect: rep.energy_identity_defect,
            profile_distance: rep.profile_distance,
        },
    )
}

#[derive(Serialize)]
struct EndpointMeta {
    kind: &'static str,
    lambda: f64,
    value: Option<f64>,
}

fn endpoint_meta(e: &Endpoint) -> EndpointMeta {
    EndpointMeta {
        kind: e.tag(),
        lambda: e.lambda(),
        value: match e {
            Endpoint::NeumannState { value } => Some(*value),
            _ => None,
        },
    }
}

#[derive(Serialize)]
struct FoldMeta {
    index: usize,
    lambda: f64,
}

#[derive(Serialize)]
struct TailMeta {
    sups: Vec<f64>,
    lambdas: Vec<f64>,
    extrapolated: f64,
    positive_contact: bool,
}

#[derive(Serialize)]
struct BranchMeta {
    domain: DomainMeta,
    params: ParamsMeta,
    regime: String,
    points: usize,
    endpoints: Vec<EndpointMeta>,
    folds: Vec<FoldMeta>,
    lambda_max: f64,
    lambda_bar: Option<f64>,
    step: f64,
    tail: Option<TailMeta>,
    partial: bool,
    diagnostic: Option<String>,
}

fn branch_meta(mesh: &Mesh, b: &Branch) -> BranchMeta {
    BranchMeta {
        domain: domain_meta(mesh),
        params: params_meta(&b.params),
        regime: b.params.regime().to_string(),
        points: b.points.len(),
        endpoints: b.endpoints.iter().map(endpoint_meta).collect(),
        folds: b
            .folds
            .iter()
            .map(|f| FoldMeta {
                index: f.index,
                lambda: f.lambda,
            })
            .collect(),
        lambda_max: b.lambda_max,
        lambda_bar: b.lambda_bar(),
        step: b.step,
        tail: b.tail.as_ref().map(|t| TailMeta {
            sups: t.sups.clone(),
            lambdas: t.lambdas.clone(),
            extrapolated: t.extrapolated,
            positive_contact: t.positive_contact,
        }),
        partial: b.is_partial(),
        diagnostic: b.diagnostic.clone(),
    }
}

pub const BRANCH_HEADER: &[&str] = &[
    "index", "lambda", "sup_norm", "h1_norm", "s_comp", "energy", "mu1", "residual",
];

fn branch_csv(b: &Branch) -> Csv {
    let mut csv = Csv::new(BRANCH_HEADER);
    for (i, p) in b.points.iter().enumerate() {
        csv.row(&[
            i.to_string(),
            num(p.lambda),
            num(p.sup_norm),
            num(p.h1_norm),
            num(p.s_comp),
            num(p.energy),
            opt(p.mu1),
            num(p.residual_norm),
        ]);
    }
    csv
}

fn write_branch(mesh: &Mesh, b: &Branch, out: &Path, stem: &str) -> Result<(), CliError> {
    branch_csv(b).write(&out.join(format!("{stem}.csv")))?;
    write_json(&out.join(format!("{stem}.json")), &branch_meta(mesh, b))?;
    let xy: Vec<(f64, f64)> = b.points.iter().map(|p| (p.lambda, p.sup_norm)).collect();
    let title = format!(
        "{} branch, p={} q={} beta={} alpha={}",
        b.params.regime(),
        b.params.p,
        b.params.q,
        b.params.beta,
        b.params.alpha
    );
    write_plot(out, stem, &title, &xy, "sup norm")
}

#[derive(Serialize)]
struct FamilyMeta {
    parameter: &'static str,
    values: Vec<f64>,
    distances: Vec<f64>,
    strictly_decreasing: bool,
    converged: bool,
    error: Option<String>,
}

fn trace_one(mesh: &Mesh, params: &Params, opts: &TraceOptions) -> Result<Branch, CliError> {
    if params.alpha > 0.0 {
        Ok(continuation::trace_regularized_continuum(
            mesh,
            params.alpha,
            params.beta,
            params.p,
            params.q,
            opts,
        )?)
    } else {
        Ok(continuation::trace_from_neumann(mesh, params, opts)?)
    }
}

pub fn branch(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mesh = mesh_of(cfg)?;
    let base = cfg.params()?.with_lambda(0.0);
    let opts = trace_options(cfg);
    let (parameter, values) = if !cfg.alphas.is_empty() {
        ("alpha", cfg.alphas.clone())
    } else if !cfg.betas.is_empty() {
        ("beta", cfg.betas.clone())
    } else {
        ("", Vec::new())
    };
    let main = if values.is_empty() {
        trace_one(&mesh, &base, &opts)?
    } else {
        let members: Vec<Params> = values
            .iter()
            .map(|&v| {
                let (a, b) = if parameter == "alpha" {
                    (v, base.beta)
                } else {
                    (base.alpha, v)
                };
                Ok(Params::new(base.p, base.q, 0.0, a, b)?)
            })
            .collect::<Result<_, CliError>>()?;
        let branches = parallel_map(&members, |p| trace_one(&mesh, p, &opts));
        let branches: Vec<Branch> = branches.into_iter().collect::<Result<_, _>>()?;
        for (i, b) in branches.iter().enumerate() {
            write_branch(&mesh, b, out, &format!("branch_{i}"))?;
        }
        let step_scale = 2.0 * cfg.step;
        let meta = match continuation::homotopy_limit(&branches, step_scale) {
            Ok(r) => FamilyMeta {
                parameter,
                values: values.clone(),
                distances: r.distances,
                strictly_decreasing: r.strictly_decreasing,
                converged: r.converged,
                error: None,
            },
            Err(e) => FamilyMeta {
                parameter,
                values: values.clone(),
                distances: Vec::new(),
                strictly_decreasing: false,
                converged: false,
                error: Some(e.to_string()),
            },
        };
        write_json(&out.join("family.json"), &meta)?;
        branches.into_iter().last().expect("nonempty family")
    };
    write_branch(&mesh, &main, out, "branch")?;
    match &main.diagnostic {
        Some(d) => Err(CliError::Partial(d.clone())),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    scenario: String,
    passed: bool,
    checks: Vec<Check>,
    first_failure: Option<Check>,
}

pub const SCENARIOS: &[&str] = &["a-priori-bound", "uniqueness", "prop21-bound", "thm-I-uniqueness"];

pub fn verify(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let scenario = cfg
        .scenario
        .clone()
        .ok_or_else(|| CliError::Config("verify needs a scenario".into()))?;
    let checks = match scenario.as_str() {
        "a-priori-bound" | "prop21-bound" => {
            let samples = scenarios::regime_sweep(cfg.n)?;
            scenarios::bound_checks(&samples, cfg.verify_tol.unwrap_or(1e-8))
        }
        "uniqueness" | "thm-I-uniqueness" => {
            let pair = scenarios::monotone_pair(cfg.n, 3.0, 0.5, 0.05, cfg.tau)?;
            scenarios::uniqueness_checks(&pair, cfg.verify_tol.unwrap_or(1e-8))
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown scenario {other:?}; expected one of {SCENARIOS:?}"
            )))
        }
    };
    let first_failure = checks.iter().find(|c| !c.passed).cloned();
    let report = VerifyReport {
        scenario,
        passed: first_failure.is_none(),
        checks,
        first_failure: first_failure.clone(),
    };
    write_json(&out.join("verify.json"), &report)?;
    match first_failure {
        None => Ok(()),
        Some(c) => Err(CliError::Verification(format!(
            "{}: value {:e} against limit {:e}",
            c.name, c.value, c.limit
        ))),
    }
}

#[derive(Serialize)]
struct LambdaStarMeta {
    domain_kind: String,
    extent: f64,
    p: f64,
    q: f64,
    levels: Vec<usize>,
    estimates: Vec<f64>,
    lambda_max: Vec<f64>,
    mean: f64,
    spread: f64,
    relative_spread: f64,
}

pub fn lambda_star(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let est = continuation::estimate_lambda_star(cfg.kind, cfg.extent, cfg.p, cfg.q, &cfg.levels, &trace_options(cfg))
        .map_err(|e| match e {
            harvest_core::Error::EstimationFailure(m) => CliError::Partial(m),
            other => other.into(),
        })?;
    write_json(
        &out.join("lambda_star.json"),
        &LambdaStarMeta {
            domain_kind: cfg.kind.to_string(),
            extent: cfg.extent,
            p: cfg.p,
            q: cfg.q,
            levels: est.estimates.iter().map(|e| e.0).collect(),
            estimates: est.estimates.iter().map(|e| e.1).collect(),
            lambda_max: est.lambda_max.clone(),
            mean: est.mean,
            spread: est.spread,
            relative_spread: est.spread / est.mean,
        },
    )
}

#[derive(Serialize)]
struct PerturbMeta {
    extent: f64,
    n: usize,
    p: f64,
    k_list: Vec<usize>,
    h1_decreasing: bool,
    profile_decreasing: bool,
}

pub fn perturb(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let rep = analysis::domain_perturbation_study(cfg.extent, &cfg.k_list, cfg.n, cfg.p)?;
    let mut csv = Csv::new(&["k", "h1_norm", "profile_distance", "h1_norm_full", "beta_k", "positive"]);
    for i in 0..rep.ks.len() {
        csv.row(&[
            rep.ks[i].to_string(),
            num(rep.h1_norms[i]),
            num(rep.profile_distances[i]),
            num(rep.h1_norms_full[i]),
            num(rep.eigenvalues[i]),
            rep.positive[i].to_string(),
        ]);
    }
    csv.write(&out.join("perturb.csv"))?;
    write_json(
        &out.join("perturb.json"),
        &PerturbMeta {
            extent: cfg.extent,
            n: cfg.n,
            p: cfg.p,
            k_list: rep.ks.clone(),
            h1_decreasing: rep.h1_decreasing,
            profile_decreasing: rep.profile_decreasing,
        },
    )?;
    if rep.positive.iter().all(|&p| p) {
        Ok(())
    } else {
        Err(CliError::Partial("a perturbed domain has no positive solution".into()))
    }
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mesh = mesh_of(cfg)?;
    let ps = if cfg.p_list.is_empty() {
        vec![cfg.p]
    } else {
        cfg.p_list.clone()
    };
    let qs = if cfg.q_list.is_empty() {
        vec![cfg.q]
    } else {
        cfg.q_list.clone()
    };
    let mut grid = Vec::new();
    for &p in &ps {
        for &q in &qs {
            grid.push(Params::new(p, q, 0.0, cfg.alpha, cfg.beta)?);
        }
    }
    let opts = trace_options(cfg);
    let results = parallel_map(&grid, |par| trace_one(&mesh, par, &opts));
    let mut csv = Csv::new(&[
        "p",
        "q",
        "regime",
        "points",
        "lambda_max",
        "folds",
        "lambda_bar",
        "start",
        "end",
        "end_lambda",
        "status",
    ]);
    let mut partial = 0;
    for (par, res) in grid.iter().zip(&results) {
        let mut row = vec![num(par.p), num(par.q), par.regime().to_string()];
        match res {
            Ok(b) => {
                if b.is_partial() {
                    partial += 1;
                }
                row.extend([
                    b.points.len().to_string(),
                    num(b.lambda_max),
                    b.folds.len().to_string(),
                    opt(b.lambda_bar()),
                    b.endpoints[0].tag().to_string(),
                    b.endpoints[1].tag().to_string(),
                    num(b.endpoints[1].lambda()),
                    if b.is_partial() { "partial" } else { "ok" }.to_string(),
                ]);
            }
            Err(e) => {
                partial += 1;
                row.extend(["0", "", "", "", "", "", ""].map(String::from));
                row.push(format!("\"{e}\""));
            }
        }
        csv.row(&row);
    }
    csv.write(&out.join("sweep.csv"))?;
    if partial > 0 {
        Err(CliError::Partial(format!(
            "{partial} of {} traces incomplete",
            grid.len()
        )))
    } else {
        Ok(())
    }
}
