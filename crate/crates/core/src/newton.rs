//! Damped Newton for the discrete problem, the explicit subsolution
//! `φ_ε = ε(φ_Ω + ε^τ)` and the monotone sub/supersolution iteration.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::domain::{self, Field, Mesh};
use crate::error::{Error, Result};
use crate::forms::{self, Params, Regime};
use crate::linalg::SymTridiag;
use crate::math::powf;
use crate::spectra;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Bound on `‖F(u)‖ / (1 + ‖u‖_{H¹})`.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking line search on the residual norm.
    pub damping: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            damping: true,
        }
    }
}

/// Boundary values below this count as zero for the `α = 0` Jacobian.
pub const BOUNDARY_FREEZE: f64 = 1e-12;
const DAMPING_FLOOR: f64 = 1.0 / 1048576.0;

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub params: Params,
    /// Scaled residual `‖F(u)‖ / (1 + ‖u‖_{H¹})`.
    pub residual_norm: f64,
    /// Smallest linearized eigenvalue, when the Jacobian exists at the state.
    pub mu1: Option<f64>,
    pub iterations: usize,
    /// Sup norm below the scheme-accuracy threshold `10 h²`.
    pub trivial: bool,
}

/// `‖F(u)‖ / ‖u‖_{H¹}`, the stopping measure of the monotone iteration. It does
/// not let a near-zero iterate pass as converged.
pub fn relative_residual(mesh: &Mesh, u: &Field, params: &Params) -> Result<f64> {
    let r = forms::residual_norm(mesh, u, params)?;
    let n = domain::h1_norm(mesh, u)?;
    Ok(if n > 0.0 {
        r / n
    } else if r == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

/// `‖F(u)‖ / (1 + ‖u‖_{H¹})`.
pub fn scaled_residual(mesh: &Mesh, u: &Field, params: &Params) -> Result<f64> {
    let r = forms::residual_norm(mesh, u, params)?;
    Ok(r / (1.0 + domain::h1_norm(mesh, u)?))
}

pub(crate) fn stability_if_defined(mesh: &Mesh, u: &Field, params: &Params) -> Option<f64> {
    spectra::linearized_stability(mesh, u, params).ok()
}

pub(crate) fn make_solution(mesh: &Mesh, field: Field, params: &Params, iterations: usize) -> Result<Solution> {
    let residual_norm = scaled_residual(mesh, &field, params)?;
    let mu1 = stability_if_defined(mesh, &field, params);
    let trivial = field.sup() < mesh.trivial_threshold();
    Ok(Solution {
        field,
        params: *params,
        residual_norm,
        mu1,
        iterations,
        trivial,
    })
}

/// Jacobian with the boundary derivative dropped at nodes where it does not
/// exist (`α = 0` and a boundary value under [`BOUNDARY_FREEZE`]).
pub(crate) fn safe_jacobian(mesh: &Mesh, u: &Field, params: &Params) -> Result<SymTridiag> {
    let mut j = forms::bulk_jacobian(mesh, u, params);
    if params.lambda != 0.0 {
        for &(i, w) in &mesh.boundary {
            let ub = u.values[i];
            if params.alpha == 0.0 && ub < BOUNDARY_FREEZE {
                continue;
            }
            j.diag[i] += params.lambda * w * forms::boundary_map_derivative(ub, params.q, params.alpha)?;
        }
    }
    Ok(j)
}

pub fn newton_solve(mesh: &Mesh, u0: &Field, params: &Params, opts: &NewtonOptions) -> Result<Solution> {
    params.validate()?;
    mesh.check(u0)?;
    let mut u = u0.clone();
    let mut r = forms::residual(mesh, &u, params)?;
    let mut rn = forms::dual_norm(mesh, &r);
    for it in 0..=opts.max_iter {
        let unorm = domain::h1_norm(mesh, &u)?;
        if rn / (1.0 + unorm) <= opts.tol {
            return make_solution(mesh, u, params, it);
        }
        if it == opts.max_iter {
            break;
        }
        let j = safe_jacobian(mesh, &u, params)?;
        let neg: Vec<f64> = r.values.iter().map(|v| -v).collect();
        let du = Field::new(j.solve(&neg)?);
        let mut t = 1.0;
        let mut accepted = false;
        while t >= DAMPING_FLOOR {
            let trial = u.axpy(t, &du);
            if let Ok(rt) = forms::residual(mesh, &trial, params) {
                let rtn = forms::dual_norm(mesh, &rt);
                if rtn.is_finite() && (!opts.damping || rtn <= (1.0 - 1e-4 * t) * rn) {
                    u = trial;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            } else if !opts.damping {
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: rn / (1.0 + unorm),
                best: Box::new(u),
            });
        }
    }
    let unorm = domain::h1_norm(mesh, &u)?;
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: rn / (1.0 + unorm),
        best: Box::new(u),
    })
}

/// `φ_ε = ε(φ + ε^τ)`.
pub fn build_subsolution(phi: &Field, eps: f64, tau: f64) -> Field {
    let lift = powf(eps, tau);
    phi.map(|v| eps * (v + lift))
}

/// Constants of the explicit subsolution and of the monotone iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsolutionRecipe {
    pub tau: f64,
    pub eps_bar: f64,
    pub eps_bar_1: f64,
    pub eps_bar_2: f64,
    /// `min (-∂φ_Ω/∂ν)` over the boundary.
    pub c1: f64,
    /// Bulk monotonization constant for the supersolution `u ≡ 1`.
    pub k: f64,
    /// Boundary monotonization constant.
    pub m: f64,
    /// Largest `λ` the subsolution is built for.
    pub lambda_cap: f64,
    /// `φ_Ω`, `H¹`-normalized.
    pub phi: Field,
    pub p: f64,
    pub q: f64,
}

impl SubsolutionRecipe {
    pub fn subsolution(&self) -> Field {
        build_subsolution(&self.phi, self.eps_bar, self.tau)
    }
}

pub fn subsolution_recipe(mesh: &Mesh, p: f64, q: f64, tau: f64, lambda_cap: f64) -> Result<SubsolutionRecipe> {
    Params::new(p, q, 0.0, 0.0, 1.0)?;
    if Params::new(p, q, 0.0, 0.0, 1.0)?.regime() != Regime::PqGreater {
        return Err(Error::invalid("the explicit subsolution needs pq > 1"));
    }
    let lo = (1.0 - q) / q;
    if !(tau > lo && tau < p - 1.0) {
        return Err(Error::invalid(format!("tau must lie in ({lo}, {})", p - 1.0)));
    }
    if !(lambda_cap > 0.0 && lambda_cap.is_finite()) {
        return Err(Error::invalid("lambda cap must be positive"));
    }
    let pair = spectra::dirichlet_principal(mesh)?;
    let c1 = spectra::boundary_flux(mesh, &pair.func)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(c1 > 0.0) {
        return Err(Error::numeric("nonpositive boundary flux of the eigenfunction", 0));
    }
    let maxphi = pair.func.max();
    let e1 = 0.99 * powf(1.0 / powf(1.0 + maxphi, p), 1.0 / (p - tau - 1.0)).min(1.0);
    let e2 = 0.99 * powf(c1 / lambda_cap, 1.0 / (q + tau * q - 1.0));
    let eps_bar = e1.min(e2);
    let k = p + 1.0;
    let cmin = powf(eps_bar, 1.0 + tau);
    let m = lambda_cap * q * powf(cmin, q - 1.0) + 1.0;
    Ok(SubsolutionRecipe {
        tau,
        eps_bar,
        eps_bar_1: e1,
        eps_bar_2: e2,
        c1,
        k,
        m,
        lambda_cap,
        phi: pair.func,
        p,
        q,
    })
}

/// The sweep operator is kept at least this far above singular (relative to the
/// mass) so that rounding cannot break the ordering of the iterates.
const SPECTRAL_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct MonotoneResult {
    pub minimal: Solution,
    pub maximal: Solution,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct MonotoneOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        MonotoneOptions {
            tol: 1e-10,
            max_sweeps: 200_000,
        }
    }
}

/// Sub/supersolution iteration.
///
/// Both sequences take the sweep
///
/// ```text
/// (K + c M + m₀ B) u⁺ + B h(u⁺) = c M u + M f(u),   h(t) = λ g(t) - m₀ t,
/// ```
///
/// with `f(t) = βt - |t|^{p-1}t`. The bulk constant `c` is the smallest value
/// making `t ↦ ct + f(t)` nondecreasing on the current order interval (capped by
/// `p max(1, sup super)^{p-1} + 1`), and `m₀ = λ g'` at the top of the interval
/// so that `h` is nondecreasing. The boundary nonlinearity is kept implicit:
/// since it enters with the monotone sign, no large boundary constant is needed
/// and the comparison principle holds for any `c` that keeps the operator
/// positive definite. The implicit step reduces to a system in the boundary
/// values only.
pub fn monotone_iterate(
    mesh: &Mesh,
    sub: &Field,
    sup: &Field,
    params: &Params,
    recipe: &SubsolutionRecipe,
    opts: &MonotoneOptions,
) -> Result<MonotoneResult> {
    params.validate()?;
    mesh.check(sub)?;
    mesh.check(sup)?;
    if recipe.phi.len() != mesh.len() {
        return Err(Error::invalid("recipe built on a different mesh"));
    }
    let order_tol = |x: f64| 1e-12 + 1e-9 * x.abs();
    for i in 0..mesh.len() {
        if sub.values[i] > sup.values[i] + order_tol(sup.values[i]) {
            return Err(Error::invalid(format!("sub exceeds super at node {i}")));
        }
    }
    let rs = forms::residual(mesh, sub, params)?;
    let rp = forms::residual(mesh, sup, params)?;
    let slack = 1e-12 * (1.0 + rs.sup().max(rp.sup()));
    if rs.values.iter().any(|&v| v > slack) {
        return Err(Error::invalid("sub is not a discrete subsolution"));
    }
    if rp.values.iter().any(|&v| v < -slack) {
        return Err(Error::invalid("super is not a discrete supersolution"));
    }

    let p = params.p;
    let k_cap = p * powf(sup.sup().max(1.0), p - 1.0) + 1.0;
    let wq = &mesh.quad_weights;
    let nb = mesh.boundary.len();
    let mut v = sub.clone();
    let mut w = sup.clone();
    let mut sweeps = 0;
    loop {
        let rv = relative_residual(mesh, &v, params)?;
        let rw = relative_residual(mesh, &w, params)?;
        if rv <= opts.tol && rw <= opts.tol {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(Error::NonConvergence {
                iterations: sweeps,
                residual: rv.max(rw),
                best: Box::new(v),
            });
        }
        let mut c = (p * powf(w.sup(), p - 1.0) - params.beta).min(k_cap);
        // Smallest boundary slope on the order interval, per boundary node.
        let m0: Vec<f64> = mesh
            .boundary
            .iter()
            .map(|&(i, _)| {
                if params.lambda == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(params.lambda * forms::boundary_map_derivative(w.values[i], params.q, params.alpha)?)
                }
            })
            .collect::<Result<_>>()?;
        let mut op = mesh.stiffness.clone();
        let build = |c: f64, op: &mut SymTridiag| {
            for ((d, k), w) in op.diag.iter_mut().zip(&mesh.stiffness.diag).zip(wq.iter()) {
                *d = k + (c - SPECTRAL_MARGIN) * w;
            }
            for (k, &(i, wb)) in mesh.boundary.iter().enumerate() {
                op.diag[i] += m0[k] * wb;
            }
        };
        build(c, &mut op);
        let mut bump = 1e-6;
        while !op.is_positive_definite() {
            if c >= k_cap {
                return Err(Error::numeric("monotone operator is not positive definite", sweeps));
            }
            c = (c + bump).min(k_cap);
            bump *= 4.0;
            build(c, &mut op);
        }
        for (d, w) in op.diag.iter_mut().zip(wq) {
            *d += SPECTRAL_MARGIN * w;
        }
        let rhs = |u: &Field| -> Vec<f64> {
            (0..mesh.len())
                .map(|i| {
                    let x = u.values[i];
                    wq[i] * (c * x + params.beta * x - forms::odd_power(x, p))
                })
                .collect()
        };
        // Responses to unit boundary loads.
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(nb);
        for &(i, _) in &mesh.boundary {
            let mut e = alloc::vec![0.0; mesh.len()];
            e[i] = 1.0;
            z.push(op.solve(&e)?);
        }
        let step = |u: &Field| -> Result<Field> {
            let y = op.solve(&rhs(u))?;
            let x = boundary_solve(mesh, params, &m0, &z, &y, u)?;
            let mut out = y;
            for (k, &(_, wb)) in mesh.boundary.iter().enumerate() {
                let hk = boundary_h(params, m0[k], x[k])?;
                for (o, zi) in out.iter_mut().zip(&z[k]) {
                    *o -= zi * wb * hk;
                }
            }
            for (k, &(i, _)) in mesh.boundary.iter().enumerate() {
                out[i] = x[k];
            }
            Ok(Field::new(out))
        };
        let vn = step(&v)?;
        let wn = step(&w)?;
        sweeps += 1;
        for i in 0..mesh.len() {
            let checks = [
                (v.values[i] - vn.values[i], vn.values[i]),
                (wn.values[i] - w.values[i], wn.values[i]),
                (vn.values[i] - wn.values[i], wn.values[i]),
            ];
            for (excess, scale) in checks {
                if excess > order_tol(scale) {
                    return Err(Error::MonotonicityFailure {
                        iteration: sweeps,
                        node: i,
                        excess,
                    });
                }
            }
        }
        if vn == v && wn == w {
            return Err(Error::NonConvergence {
                iterations: sweeps,
                residual: rv.max(rw),
                best: Box::new(v),
            });
        }
        v = vn;
        w = wn;
    }
    Ok(MonotoneResult {
        minimal: make_solution(mesh, v, params, sweeps)?,
        maximal: make_solution(mesh, w, params, sweeps)?,
        iterations: sweeps,
    })
}

fn boundary_h(params: &Params, m0: f64, x: f64) -> Result<f64> {
    if params.lambda == 0.0 {
        return Ok(-m0 * x);
    }
    Ok(params.lambda * forms::boundary_map(x, params.q, params.alpha)? - m0 * x)
}

fn boundary_h_slope(params: &Params, m0: f64, x: f64) -> f64 {
    if params.lambda == 0.0 {
        return -m0;
    }
    match forms::boundary_map_derivative(x, params.q, params.alpha) {
        Ok(d) => params.lambda * d - m0,
        Err(_) => f64::INFINITY,
    }
}

/// Solves `x_a + Σ_b z_b(a) w_b h_b(x_b) = y(a)` for the boundary values by a
/// safeguarded Newton iteration that keeps `x` inside the domain of `g`.
fn boundary_solve(
    mesh: &Mesh,
    params: &Params,
    m0: &[f64],
    z: &[Vec<f64>],
    y: &[f64],
    start: &Field,
) -> Result<Vec<f64>> {
    let nb = mesh.boundary.len();
    let idx: Vec<usize> = mesh.boundary.iter().map(|b| b.0).collect();
    let wb: Vec<f64> = mesh.boundary.iter().map(|b| b.1).collect();
    let floor = if params.alpha == 0.0 { 0.0 } else { -params.alpha };
    let mut x: Vec<f64> = idx.iter().map(|&i| start.values[i].max(floor)).collect();
    let resid = |x: &[f64]| -> Result<Vec<f64>> {
        let mut r = alloc::vec![0.0; nb];
        for a in 0..nb {
            let mut s = x[a] - y[idx[a]];
            for b in 0..nb {
                s += z[b][idx[a]] * wb[b] * boundary_h(params, m0[b], x[b])?;
            }
            r[a] = s;
        }
        Ok(r)
    };
    let mut r = resid(&x)?;
    for it in 0..200 {
        let scale = x.iter().chain(y.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if r.iter().all(|v| v.abs() <= 4.0 * f64::EPSILON * scale) {
            return Ok(x);
        }
        // Jacobian I + Z W diag(h').
        let slopes: Vec<f64> = (0..nb).map(|b| boundary_h_slope(params, m0[b], x[b])).collect();
        let jac = |a: usize, b: usize| -> f64 { (if a == b { 1.0 } else { 0.0 }) + z[b][idx[a]] * wb[b] * slopes[b] };
        let dx: Vec<f64> = if slopes.iter().any(|s| !s.is_finite()) {
            // At x = 0 with α = 0: step up by a fraction of the right-hand side.
            (0..nb)
                .map(|a| {
                    if slopes[a].is_finite() {
                        0.0
                    } else {
                        0.5 * y[idx[a]].abs().max(1e-300)
                    }
                })
                .collect()
        } else if nb == 1 {
            alloc::vec![-r[0] / jac(0, 0)]
        } else {
            let (a11, a12, a21, a22) = (jac(0, 0), jac(0, 1), jac(1, 0), jac(1, 1));
            let det = a11 * a22 - a12 * a21;
            alloc::vec![(-r[0] * a22 + r[1] * a12) / det, (-r[1] * a11 + r[0] * a21) / det]
        };
        let mut t = 1.0;
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        loop {
            let trial: Vec<f64> = (0..nb)
                .map(|a| {
                    let xn = x[a] + t * dx[a];
                    if xn <= floor {
                        floor + 0.1 * (x[a] - floor)
                    } else {
                        xn
                    }
                })
                .collect();
            let rt = resid(&trial)?;
            if norm(&rt) < norm(&r) || t < 1e-6 {
                x = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
        if it == 199 {
            break;
        }
    }
    Err(Error::numeric(
        "boundary step of the monotone sweep did not converge",
        200,
    ))
}
