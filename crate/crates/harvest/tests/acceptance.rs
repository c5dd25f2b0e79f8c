//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use harvest::scenarios;
use harvest_core::analysis;
use harvest_core::continuation::{self, Branch, Endpoint, TraceOptions};
use harvest_core::newton::{self, NewtonOptions};
use harvest_core::{forms, spectra, Field, Mesh, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const J01: f64 = 2.404_825_557_695_773;

// Eigenvalue oracles.
const TOL_EIG_PI: f64 = 1e-3;
const TOL_EIG_2PI: f64 = 3e-4;
const TOL_EIG_DISK: f64 = 2e-3;
const TOL_STEKLOV: f64 = 1e-3;
// Jacobian check.
const FD_STATES: usize = 20;
const FD_STEP: f64 = 1e-6;
const TOL_FD: f64 = 1e-6;
// A priori bound sweep.
const MIN_SOLUTIONS: usize = 200;
const TOL_DEFECT: f64 = 1e-8;
// Resonant pq > 1.
const MONOTONE_LAMBDAS: [f64; 4] = [0.05, 0.5, 5.0, 50.0];
const TAU: f64 = 1.5;
const TOL_COINCIDE: f64 = 1e-8;
const ORDER_SLACK: f64 = 1e-12;
const PROFILE_LIMIT: f64 = 0.1;
// Resonant pq < 1.
const HOMOTOPY_BETAS: [f64; 4] = [0.9, 0.99, 0.999, 1.0];
const TOL_ENDPOINT: f64 = 1e-3;
// Resonant pq = 1.
const LEVELS: [usize; 3] = [128, 256, 512];
const MAX_SPREAD: f64 = 0.05;
const SMALL_LAMBDAS: [f64; 4] = [0.01, 0.02, 0.05, 0.1];
// Regularized continuum.
const CONTINUUM_START_REL: f64 = 0.02;
const CONTINUUM_END_LAMBDA: f64 = 1e-3;
const CONTINUUM_ALPHAS: [f64; 3] = [1e-2, 1e-3, 1e-4];
// Nonresonant branch.
const NONRES_CAP: f64 = 60.0;
const NONRES_SAMPLES: [f64; 3] = [10.0, 20.0, 50.0];
// Perturbation study.
const K_LIST: [usize; 4] = [4, 8, 16, 32];
// Order.
const MIN_RATIO: f64 = 3.5;

const N: usize = 256;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn opts(cap: f64) -> TraceOptions {
    TraceOptions {
        lambda_cap: cap,
        ..Default::default()
    }
}

fn eigen_oracles() -> Outcome {
    let b1 = spectra::dirichlet_principal(&Mesh::interval(PI, 256).map_err(err)?)
        .map_err(err)?
        .value;
    let b2 = spectra::dirichlet_principal(&Mesh::interval(2.0 * PI, 256).map_err(err)?)
        .map_err(err)?
        .value;
    let b3 = spectra::dirichlet_principal(&Mesh::disk(J01, 512).map_err(err)?)
        .map_err(err)?
        .value;
    let s = spectra::steklov_principal(&Mesh::interval(PI, 256).map_err(err)?, 0.25)
        .map_err(err)?
        .value;
    let e = [(b1 - 1.0).abs(), (b2 - 0.25).abs(), (b3 - 1.0).abs(), (s - 0.5).abs()];
    check(
        e[0] <= TOL_EIG_PI && e[1] <= TOL_EIG_2PI && e[2] <= TOL_EIG_DISK && e[3] <= TOL_STEKLOV,
        format!(
            "errors pi {:.2e}, 2pi {:.2e}, disk {:.2e}, boundary {:.2e}",
            e[0], e[1], e[2], e[3]
        ),
    )
}

fn jacobian_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_261_015);
    let mut worst: f64 = 0.0;
    for k in 0..FD_STATES {
        let mesh = if k % 4 == 3 {
            Mesh::disk(J01, 64)
        } else {
            Mesh::interval(PI, 64)
        }
        .map_err(err)?;
        let alpha = if k % 2 == 0 { 0.0 } else { 0.1 };
        let p = rng.gen_range(1.2..4.0);
        let q = rng.gen_range(0.1..0.9);
        let par = Params::new(p, q, rng.gen_range(0.0..10.0), alpha, rng.gen_range(0.1..1.0)).map_err(err)?;
        let u = Field::new((0..mesh.len()).map(|_| rng.gen_range(0.05..1.2)).collect());
        let d = Field::new((0..mesh.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let rp = forms::residual(&mesh, &u.axpy(FD_STEP, &d), &par).map_err(err)?;
        let rm = forms::residual(&mesh, &u.axpy(-FD_STEP, &d), &par).map_err(err)?;
        let jd = forms::jacobian(&mesh, &u, &par).map_err(err)?.matvec(&d.values);
        let mut num = 0.0;
        let mut den = 0.0;
        for ((a, b), j) in rp.values.iter().zip(&rm.values).zip(&jd) {
            let fd = (a - b) / (2.0 * FD_STEP);
            num += (fd - j) * (fd - j);
            den += j * j;
        }
        worst = worst.max((num / den).sqrt());
    }
    check(
        worst <= TOL_FD,
        format!("{FD_STATES} states, worst relative error {worst:.2e}"),
    )
}

fn a_priori_bound() -> Outcome {
    let samples = scenarios::regime_sweep(N).map_err(err)?;
    let checks = scenarios::bound_checks(&samples, TOL_DEFECT);
    let detail = checks
        .iter()
        .map(|c| format!("{} {:.6e}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        samples.len() >= MIN_SOLUTIONS && checks.iter().all(|c| c.passed),
        detail,
    )
}

fn resonant_superlinear() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for lam in MONOTONE_LAMBDAS {
        let pair = scenarios::monotone_pair(N, 3.0, 0.5, lam, TAU).map_err(err)?;
        let order = pair
            .minimal
            .field
            .values
            .iter()
            .zip(&pair.maximal.field.values)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        let diff = pair.maximal.field.max_diff(&pair.minimal.field);
        ok &= order <= ORDER_SLACK;
        if lam == MONOTONE_LAMBDAS[0] {
            ok &= diff <= TOL_COINCIDE;
        }
        lines.push(format!("lambda {lam}: gap {diff:.1e}"));
    }
    let mesh = Mesh::interval(PI, N).map_err(err)?;
    let par = Params::new(3.0, 0.5, 0.0, 0.0, 1.0).map_err(err)?;
    let b = continuation::trace_from_neumann(&mesh, &par, &opts(50.0)).map_err(err)?;
    let h1_dec = b.points.windows(2).all(|w| w[1].h1_norm < w[0].h1_norm);
    let phi = spectra::dirichlet_principal(&mesh).map_err(err)?.func;
    let last = b.points.last().unwrap();
    let dist = analysis::profile_distance(&mesh, &last.field, &phi).map_err(err)?;
    ok &= h1_dec && dist < PROFILE_LIMIT && b.folds.is_empty() && last.lambda == 50.0;
    lines.push(format!("h1 decreasing {h1_dec}, profile distance at 50 {dist:.3e}"));
    check(ok, lines.join("; "))
}

fn limit_branch(mesh: &Mesh, p: f64, q: f64) -> Result<(Vec<Branch>, Branch), String> {
    let fams: Vec<Branch> = HOMOTOPY_BETAS
        .iter()
        .map(|&b| {
            let par = Params::new(p, q, 0.0, 0.0, b).map_err(err)?;
            continuation::trace_from_neumann(mesh, &par, &opts(50.0)).map_err(err)
        })
        .collect::<Result<_, _>>()?;
    let last = fams.last().unwrap().clone();
    Ok((fams, last))
}

fn resonant_sublinear() -> Outcome {
    let mesh = Mesh::interval(PI, N).map_err(err)?;
    let (fam, b) = limit_branch(&mesh, 1.5, 0.5)?;
    let report = continuation::homotopy_limit(&fam, 2.0 * TraceOptions::default().step).map_err(err)?;
    let lbar = b.lambda_bar().ok_or("no fold on the limit branch")?;
    let target = 0.5 * lbar;
    let sols = continuation::solutions_at(&mesh, &b, target, 1e-10).map_err(err)?;
    let ordered = sols.len() >= 2 && {
        let (hi, lo) = if sols[0].sup() > sols[1].sup() {
            (&sols[0], &sols[1])
        } else {
            (&sols[1], &sols[0])
        };
        hi.values.iter().zip(&lo.values).all(|(a, b)| a > b)
    };
    let start_ok = matches!(b.endpoints[0], Endpoint::NeumannState { value } if (value - 1.0).abs() <= TOL_ENDPOINT);
    let end = b.points.last().unwrap();
    let end_ok = matches!(b.endpoints[1], Endpoint::TrivialLine { lambda } if lambda == 0.0)
        && !b.tail.as_ref().map(|t| t.positive_contact).unwrap_or(true);
    check(
        lbar > 0.0 && lbar.is_finite() && ordered && start_ok && end_ok && report.strictly_decreasing,
        format!(
            "fold {lbar:.5}, {} ordered solutions at {target:.4}, ends {} / {} (last point lambda {:.3e}, sup {:.2e}), homotopy distances {:?}",
            sols.len(),
            b.endpoints[0],
            b.endpoints[1],
            end.lambda,
            end.sup_norm,
            report.distances.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn resonant_critical() -> Outcome {
    let est = continuation::estimate_lambda_star(harvest_core::MeshKind::Interval, PI, 2.0, 0.5, &LEVELS, &opts(50.0))
        .map_err(err)?;
    let rel = est.spread / est.mean;
    let bounded = est
        .estimates
        .iter()
        .zip(&est.lambda_max)
        .all(|(e, m)| e.1 > 0.0 && e.1 <= m * 1.05);
    let mesh = Mesh::interval(PI, N).map_err(err)?;
    let (_, b) = limit_branch(&mesh, 2.0, 0.5)?;
    let counts: Vec<usize> = SMALL_LAMBDAS
        .iter()
        .map(|&l| continuation::lambda_crossings(&b, l).len())
        .collect();
    let contact = matches!(b.endpoints[1], Endpoint::TrivialLine { lambda } if lambda > 0.0);
    check(
        rel <= MAX_SPREAD && bounded && contact && counts.iter().all(|&c| c == 1),
        format!(
            "estimates {:?}, mean {:.5}, relative spread {:.2e}; crossings near 0 {:?}",
            est.estimates.iter().map(|e| format!("{:.5}", e.1)).collect::<Vec<_>>(),
            est.mean,
            rel,
            counts
        ),
    )
}

fn continuum() -> Outcome {
    let mesh = Mesh::interval(PI, N).map_err(err)?;
    let (beta, p, q) = (0.5, 2.0, 0.5);
    let lb = spectra::steklov_principal(&mesh, beta).map_err(err)?.value;
    let mut branches = Vec::new();
    for a in CONTINUUM_ALPHAS {
        branches.push(continuation::trace_regularized_continuum(&mesh, a, beta, p, q, &opts(50.0)).map_err(err)?);
    }
    let b = &branches[0];
    let lab = spectra::regularized_bifurcation_lambda(lb, CONTINUUM_ALPHAS[0], q).map_err(err)?;
    let start = b.endpoints[0].lambda();
    let start_ok =
        matches!(b.endpoints[0], Endpoint::TrivialLine { .. }) && (start - lab).abs() <= CONTINUUM_START_REL * lab;
    let last = b.points.last().unwrap();
    let c = f64::powf(beta, 1.0 / (p - 1.0));
    let end_dev = last.field.max_diff(&mesh.constant(c));
    let end_ok = last.lambda <= CONTINUUM_END_LAMBDA && end_dev <= TOL_ENDPOINT;
    let polys: Vec<_> = branches.iter().map(continuation::polyline).collect();
    let d: Vec<f64> = polys
        .windows(2)
        .map(|w| continuation::hausdorff(&w[0], &w[1]))
        .collect();
    let dec = d.windows(2).all(|w| w[1] < w[0]);
    check(
        start_ok && end_ok && dec,
        format!(
            "start {start:.5} vs {lab:.5}, end lambda {:.1e} deviation {end_dev:.1e}, Hausdorff {:?}",
            last.lambda,
            d.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn nonresonant() -> Outcome {
    let mesh = Mesh::interval(2.0 * PI, N).map_err(err)?;
    let par = Params::new(2.0, 0.5, 0.0, 0.0, 1.0).map_err(err)?;
    let b = continuation::trace_from_neumann(&mesh, &par, &opts(NONRES_CAP)).map_err(err)?;
    let ud = analysis::solve_dirichlet_logistic(&mesh, 1.0, 2.0).map_err(err)?;
    let mut dists = Vec::new();
    for l in NONRES_SAMPLES {
        let s = continuation::solutions_at(&mesh, &b, l, 1e-10).map_err(err)?;
        if s.len() != 1 {
            return Err(format!("{} solutions at lambda {l}", s.len()));
        }
        dists.push(analysis::l2_distance(&mesh, &s[0], &ud.field).map_err(err)?);
    }
    let dec = dists.windows(2).all(|w| w[1] < w[0]);
    check(
        b.lambda_max > 50.0 && b.folds.is_empty() && ud.positive && dec,
        format!(
            "lambda_max {}, folds {}, l2 distances {:?}",
            b.lambda_max,
            b.folds.len(),
            dists
        ),
    )
}

fn perturbation() -> Outcome {
    let r = analysis::domain_perturbation_study(PI, &K_LIST, N, 2.0).map_err(err)?;
    check(
        r.h1_decreasing && r.profile_decreasing && r.positive.iter().all(|&p| p),
        format!("h1 {:?}, profile {:?}", r.h1_norms, r.profile_distances),
    )
}

fn solution_error(n: usize, reference: &Field, nref: usize) -> Result<f64, String> {
    let mesh = Mesh::interval(PI, n).map_err(err)?;
    let par = Params::new(3.0, 0.5, 1.0, 0.0, 1.0).map_err(err)?;
    let s = newton::newton_solve(&mesh, &mesh.constant(0.8), &par, &NewtonOptions::default()).map_err(err)?;
    let stride = nref / n;
    Ok((0..=n)
        .map(|i| (s.field.values[i] - reference.values[i * stride]).abs())
        .fold(0.0, f64::max))
}

fn determinism_and_order() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "p = 1.5\nq = 0.5\nbetas = 0.9, 0.99, 1\n").map_err(err)?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        let code = harvest::run([
            "harvest",
            "branch",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        if code != 0 {
            return Err(format!("branch run exited with {code}"));
        }
        let mut files = Vec::new();
        for name in ["branch.csv", "branch.json", "branch_0.csv", "family.json"] {
            files.push(fs::read(out.join(name)).map_err(err)?);
        }
        outputs.push(files);
    }
    let identical = outputs[0] == outputs[1];

    let eig_err = |n| -> Result<f64, String> {
        Ok((spectra::dirichlet_principal(&Mesh::interval(PI, n).map_err(err)?)
            .map_err(err)?
            .value
            - 1.0)
            .abs())
    };
    let eig_ratio = eig_err(64)? / eig_err(128)?;
    let nref = 2048;
    let mref = Mesh::interval(PI, nref).map_err(err)?;
    let par = Params::new(3.0, 0.5, 1.0, 0.0, 1.0).map_err(err)?;
    let reference = newton::newton_solve(&mref, &mref.constant(0.8), &par, &NewtonOptions::default())
        .map_err(err)?
        .field;
    let sol_ratio = solution_error(64, &reference, nref)? / solution_error(128, &reference, nref)?;
    check(
        identical && eig_ratio >= MIN_RATIO && sol_ratio >= MIN_RATIO,
        format!("byte-identical {identical}, eigenvalue ratio {eig_ratio:.3}, solution ratio {sol_ratio:.3}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("eigenvalue oracles", eigen_oracles),
        ("jacobian consistency", jacobian_consistency),
        ("a priori bound sweep", a_priori_bound),
        ("resonant pq>1", resonant_superlinear),
        ("resonant pq<1", resonant_sublinear),
        ("resonant pq=1", resonant_critical),
        ("regularized continuum", continuum),
        ("nonresonant branch", nonresonant),
        ("domain perturbation", perturbation),
        ("determinism and order", determinism_and_order),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {:>2} PASS  {name} ({secs:.2}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2}s): {d}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
