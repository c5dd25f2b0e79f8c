//! Diagnostics on computed states: the decomposition `u = sφ_Ω + v` with `v`
//! `H¹`-orthogonal to `φ_Ω`, distances to the principal profile, boundary
//! energy quantities, the Dirichlet logistic problem and its behaviour on
//! shrinking neighbourhoods of a resonant interval.

use alloc::string::String;
use alloc::vec::Vec;

use crate::domain::{self, Field, Mesh};
use crate::error::{Error, Result};
use crate::forms::{self, Params};
use crate::linalg::SymTridiag;
use crate::math::{powf, sqrt};
use crate::newton::Solution;
use crate::spectra;

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub s: f64,
    pub v: Field,
    /// `|⟨v, φ_Ω⟩_{H¹}|`.
    pub orth_defect: f64,
}

fn check_unit(mesh: &Mesh, phi: &Field) -> Result<()> {
    let n = domain::h1_norm(mesh, phi)?;
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("profile must have unit H1 norm"));
    }
    Ok(())
}

pub fn decompose(mesh: &Mesh, u: &Field, phi: &Field) -> Result<DecompositionResult> {
    check_unit(mesh, phi)?;
    let s = domain::h1_inner(mesh, u, phi)?;
    let v = u.axpy(-s, phi);
    let orth_defect = domain::h1_inner(mesh, &v, phi)?.abs();
    Ok(DecompositionResult { s, v, orth_defect })
}

/// `‖u/‖u‖ - φ‖_{H¹}`.
pub fn profile_distance(mesh: &Mesh, u: &Field, phi: &Field) -> Result<f64> {
    let n = domain::h1_norm(mesh, u)?;
    if !(n > 0.0) {
        return Err(Error::invalid("profile distance of the zero field"));
    }
    domain::h1_norm(mesh, &u.scaled(1.0 / n).axpy(-1.0, phi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDiagnostics {
    /// `E(v) = ∫ |∇v|² - β ∫ v²`.
    pub e_of_v: f64,
    /// `∫_{∂Ω} |v|^{q+1}`.
    pub boundary_q1_integral: f64,
    /// `(λ/2) ∫_{∂Ω} |v|^{q+1} - 2s ∫_{∂Ω} (-∂φ/∂ν) v`.
    pub i_value: f64,
}

impl EnergyDiagnostics {
    /// `E(v) + c ∫_{∂Ω} |v|^{q+1}`, expected nonpositive for small states.
    pub fn small_state_value(&self, c: f64) -> f64 {
        self.e_of_v + c * self.boundary_q1_integral
    }
}

pub fn energy_diagnostics(mesh: &Mesh, u: &Field, params: &Params, phi: &Field) -> Result<EnergyDiagnostics> {
    let d = decompose(mesh, u, phi)?;
    let e_of_v = forms::energy(mesh, &d.v, params.beta)?;
    let flux = spectra::boundary_flux(mesh, phi)?;
    let mut bq = 0.0;
    let mut bf = 0.0;
    for (k, &(i, w)) in mesh.boundary.iter().enumerate() {
        let v = d.v.values[i];
        bq += w * powf(v.abs(), params.q + 1.0);
        bf += w * flux[k] * v;
    }
    Ok(EnergyDiagnostics {
        e_of_v,
        boundary_q1_integral: bq,
        i_value: 0.5 * params.lambda * bq - 2.0 * d.s * bf,
    })
}

/// Positive solution of `-Δu = βu - u^p` with zero boundary values.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub field: Field,
    pub beta: f64,
    pub p: f64,
    /// `false` when `β` does not exceed the principal Dirichlet eigenvalue,
    /// in which case `field` is zero.
    pub positive: bool,
    /// Interior residual in the mass-scaled norm over `1 + ‖u‖_{H¹}`.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solves the Dirichlet logistic problem by damped Newton from the projection
/// `sφ_Ω` onto the principal mode. States with `β` within `10h²` (relative)
/// of the discrete eigenvalue count as resonant and return the zero field.
pub fn solve_dirichlet_logistic(mesh: &Mesh, beta: f64, p: f64) -> Result<DirichletSolution> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid("p must exceed 1"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta must be positive"));
    }
    let eig = spectra::dirichlet_principal(mesh)?;
    let trivial = DirichletSolution {
        field: mesh.constant(0.0),
        beta,
        p,
        positive: false,
        residual_norm: 0.0,
        iterations: 0,
    };
    if (beta - eig.value) / beta <= 10.0 * mesh.h * mesh.h {
        return Ok(trivial);
    }
    let phi = &eig.func;
    let m2 = domain::l2_inner(mesh, phi, phi)?;
    let mp = domain::integrate(mesh, &phi.map(|v| powf(v, p + 1.0)))?;
    let s = powf((beta - eig.value) * m2 / mp, 1.0 / (p - 1.0));
    let range = mesh.interior();
    let k = mesh.stiffness.slice(range.start, range.end);
    let w = &mesh.quad_weights[range.clone()];
    let resid = |x: &[f64]| -> Vec<f64> {
        let mut r = k.matvec(x);
        for (j, ri) in r.iter_mut().enumerate() {
            *ri += w[j] * (forms::odd_power(x[j], p) - beta * x[j]);
        }
        r
    };
    let dual = |r: &[f64]| sqrt(r.iter().zip(w).map(|(a, b)| a * a / b).sum());
    let mut x: Vec<f64> = phi.values[range.clone()].iter().map(|v| s * v).collect();
    let mut r = resid(&x);
    let mut rn = dual(&r);
    let tol = 1e-10;
    let mut iterations = 0;
    let full = |x: &[f64]| {
        let mut f = mesh.constant(0.0);
        f.values[range.clone()].copy_from_slice(x);
        f
    };
    loop {
        let unorm = domain::h1_norm(mesh, &full(&x))?;
        if rn / (1.0 + unorm) <= tol {
            break;
        }
        if iterations == 60 {
            return Err(Error::numeric("Dirichlet logistic solve", iterations));
        }
        let mut j: SymTridiag = k.clone();
        for (i, d) in j.diag.iter_mut().enumerate() {
            *d += w[i] * (p * powf(x[i].abs(), p - 1.0) - beta);
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = j.solve(&neg)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            let rt = resid(&trial);
            let rtn = dual(&rt);
            if rtn.is_finite() && rtn <= (1.0 - 1e-4 * t) * rn {
                x = trial;
                r = rt;
                rn = rtn;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(Error::numeric("Dirichlet logistic line search", iterations));
            }
        }
        iterations += 1;
    }
    let field = full(&x);
    if x.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::numeric(
            "Dirichlet logistic solve left the positive cone",
            iterations,
        ));
    }
    let residual_norm = rn / (1.0 + domain::h1_norm(mesh, &field)?);
    Ok(DirichletSolution {
        field,
        beta,
        p,
        positive: true,
        residual_norm,
        iterations,
    })
}

/// Piecewise linear function on its own node set.
struct P1<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl P1<'_> {
    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= t).min(n - 1).max(1);
        let (a, b) = (self.x[i - 1], self.x[i]);
        let s = (t - a) / (b - a);
        self.y[i - 1] + s * (self.y[i] - self.y[i - 1])
    }
}

/// Exact `H¹(a, b)` inner product of two piecewise linear functions.
fn p1_h1_inner(f: &P1, g: &P1, a: f64, b: f64) -> f64 {
    let mut pts: Vec<f64> =
        f.x.iter()
            .chain(g.x.iter())
            .copied()
            .filter(|&t| t > a && t < b)
            .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|u, v| u.partial_cmp(v).unwrap());
    pts.dedup_by(|u, v| (*u - *v).abs() <= 1e-14 * (1.0 + v.abs()));
    let mut acc = 0.0;
    for s in pts.windows(2) {
        let (l, r) = (s[0], s[1]);
        let len = r - l;
        if len <= 0.0 {
            continue;
        }
        let (fl, fr) = (f.eval(l), f.eval(r));
        let (gl, gr) = (g.eval(l), g.eval(r));
        let (fm, gm) = (0.5 * (fl + fr), 0.5 * (gl + gr));
        // Simpson is exact for the quadratic product.
        acc += len / 6.0 * (fl * gl + 4.0 * fm * gm + fr * gr);
        acc += (fr - fl) * (gr - gl) / len;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub ks: Vec<usize>,
    /// `H¹(Ω)` norm of the restriction of `u_k` to the base interval.
    pub h1_norms: Vec<f64>,
    /// `‖u_k/‖u_k‖ - φ_Ω‖_{H¹(Ω)}` on the base interval.
    pub profile_distances: Vec<f64>,
    /// `H¹(Ω_k)` norm of `u_k`.
    pub h1_norms_full: Vec<f64>,
    /// Principal Dirichlet eigenvalue of each `Ω_k`.
    pub eigenvalues: Vec<f64>,
    pub positive: Vec<bool>,
    pub h1_decreasing: bool,
    pub profile_decreasing: bool,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Dirichlet logistic solutions (`β = 1`) on `Ω_k = (-1/k, L + 1/k)` for a
/// resonant base interval of length `L = π`, compared with `φ_Ω` on `(0, L)`.
/// Each `Ω_k` gets its own uniform mesh with spacing close to `L/n`; the
/// comparison integrates the two piecewise linear functions exactly.
pub fn domain_perturbation_study(length: f64, ks: &[usize], n: usize, p: f64) -> Result<PerturbationReport> {
    if (length - core::f64::consts::PI).abs() > 1e-9 {
        return Err(Error::invalid(
            "the perturbation study needs the resonant interval of length pi",
        ));
    }
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("k values must be positive and increasing"));
    }
    let base = Mesh::interval(length, n)?;
    let phi = spectra::dirichlet_principal(&base)?.func;
    let phi_p1 = P1 {
        x: &base.nodes,
        y: &phi.values,
    };
    let mut rep = PerturbationReport {
        ks: ks.to_vec(),
        h1_norms: Vec::new(),
        profile_distances: Vec::new(),
        h1_norms_full: Vec::new(),
        eigenvalues: Vec::new(),
        positive: Vec::new(),
        h1_decreasing: false,
        profile_decreasing: false,
    };
    for &k in ks {
        let shift = 1.0 / k as f64;
        let lk = length + 2.0 * shift;
        let nk = ((n as f64) * lk / length + 0.5) as usize;
        let mk = Mesh::interval(lk, nk)?;
        let sol = solve_dirichlet_logistic(&mk, 1.0, p)?;
        let xs: Vec<f64> = mk.nodes.iter().map(|x| x - shift).collect();
        let uk = P1 {
            x: &xs,
            y: &sol.field.values,
        };
        let nn = sqrt(p1_h1_inner(&uk, &uk, 0.0, length).max(0.0));
        let dist = if nn > 0.0 {
            let cross = p1_h1_inner(&uk, &phi_p1, 0.0, length) / nn;
            let pp = p1_h1_inner(&phi_p1, &phi_p1, 0.0, length);
            sqrt((1.0 - 2.0 * cross + pp).max(0.0))
        } else {
            f64::NAN
        };
        rep.eigenvalues.push(spectra::dirichlet_principal(&mk)?.value);
        rep.h1_norms.push(nn);
        rep.profile_distances.push(dist);
        rep.h1_norms_full.push(domain::h1_norm(&mk, &sol.field)?);
        rep.positive.push(sol.positive);
    }
    rep.h1_decreasing = strictly_decreasing(&rep.h1_norms);
    rep.profile_decreasing =
        rep.profile_distances.iter().all(|d| d.is_finite()) && strictly_decreasing(&rep.profile_distances);
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub max_value: f64,
    /// `1 - max u`.
    pub gap_to_one: f64,
    /// `λ = 0` with `u ≡ 1`, where the gap is zero by construction.
    pub neumann_special: bool,
    pub boundary_min: f64,
    /// Total boundary weight where `u > 10h²`.
    pub boundary_positive_weight: f64,
    pub energy_identity_defect: f64,
    pub mu1: Option<f64>,
    pub profile_distance: Option<f64>,
    pub notes: Vec<String>,
}

pub fn check_solution_report(mesh: &Mesh, solution: &Solution, phi: &Field) -> Result<SolutionReport> {
    let u = &solution.field;
    mesh.check(u)?;
    let max_value = u.max();
    let thr = mesh.trivial_threshold();
    let mut boundary_min = f64::INFINITY;
    let mut weight = 0.0;
    for &(i, w) in &mesh.boundary {
        boundary_min = boundary_min.min(u.values[i]);
        if u.values[i] > thr {
            weight += w;
        }
    }
    let neumann_special = solution.params.lambda == 0.0 && u.max_diff(&mesh.constant(1.0)) == 0.0;
    let mut notes = Vec::new();
    if neumann_special {
        notes.push(String::from("constant state at lambda = 0"));
    }
    let profile_distance = if u.sup() > 0.0 {
        Some(profile_distance(mesh, u, phi)?)
    } else {
        None
    };
    Ok(SolutionReport {
        max_value,
        gap_to_one: 1.0 - max_value,
        neumann_special,
        boundary_min,
        boundary_positive_weight: weight,
        energy_identity_defect: forms::energy_identity_defect(mesh, u, &solution.params)?,
        mu1: solution.mu1,
        profile_distance,
        notes,
    })
}

#[derive(Debug, Clone)]
pub struct Rescaled {
    /// `U = λ^{-1/(1-q)} u`.
    pub field: Field,
    pub multiplier: f64,
    /// Mass-scaled residual of `-ΔU = βU - λ^{(p-1)/(1-q)}U^p` with the flux
    /// `(U + α')^{q-1} U`, `α' = α λ^{-1/(1-q)}`.
    pub residual_norm: f64,
}

pub fn rescaled_solution(mesh: &Mesh, solution: &Solution) -> Result<Rescaled> {
    let par = &solution.params;
    if !(par.lambda > 0.0) {
        return Err(Error::invalid("rescaling needs lambda > 0"));
    }
    let multiplier = powf(par.lambda, -1.0 / (1.0 - par.q));
    let field = solution.field.scaled(multiplier);
    let c = 1.0 / multiplier;
    let bulk = powf(c, par.p - 1.0);
    let mut r = mesh.stiffness.matvec(&field.values);
    for (i, ri) in r.iter_mut().enumerate() {
        let v = field.values[i];
        *ri += mesh.quad_weights[i] * (bulk * forms::odd_power(v, par.p) - par.beta * v);
    }
    for &(i, w) in &mesh.boundary {
        r[i] += w * forms::boundary_map(field.values[i], par.q, par.alpha * multiplier)?;
    }
    let residual_norm = forms::dual_norm(mesh, &Field::new(r));
    Ok(Rescaled {
        field,
        multiplier,
        residual_norm,
    })
}

/// Distance in `L²` between two fields on the same mesh.
pub fn l2_distance(mesh: &Mesh, a: &Field, b: &Field) -> Result<f64> {
    let d = a.axpy(-1.0, b);
    Ok(sqrt(domain::l2_inner(mesh, &d, &d)?.max(0.0)))
}
