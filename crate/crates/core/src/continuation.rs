//! Pseudo-arclength continuation in `λ`.
//!
//! States are pairs `(u, λ)` measured in the metric `‖u‖²_{H¹} + λ²`. A step
//! predicts along the secant of the last two points (the tangent for the first
//! step) and corrects with Newton on the system bordered by the arclength
//! condition. Branches stop when `λ` turns negative, passes a cap, or the field
//! collapses below the trivial threshold `10 h²`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::{self, Field, Mesh};
use crate::error::{Error, Result};
use crate::forms::{self, Params, Regime};
use crate::linalg::{self, SymTridiag};
use crate::math::{hypot, sqrt};
use crate::newton::{self, NewtonOptions};
use crate::spectra;

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    pub field: Field,
    pub sup_norm: f64,
    pub h1_norm: f64,
    /// Coefficient of `φ_Ω` in the `H¹`-orthogonal decomposition.
    pub s_comp: f64,
    /// `E_β(u)`.
    pub energy: f64,
    pub mu1: Option<f64>,
    /// Scaled residual.
    pub residual_norm: f64,
}

/// Direction of a branch in `(u, λ)`.
#[derive(Debug, Clone)]
pub struct Tangent {
    pub du: Field,
    pub dlambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    /// The branch collapses onto `u = 0` at this `λ` (zero for the origin).
    TrivialLine { lambda: f64 },
    /// The constant state `β^{1/(p-1)}` at `λ = 0`.
    NeumannState { value: f64 },
    /// The trace broke down right after a turning point.
    FoldTurnback { lambda: f64 },
    /// Cap, point budget or corrector failure.
    RangeExhausted { lambda: f64 },
}

impl Endpoint {
    pub fn tag(&self) -> &'static str {
        match self {
            Endpoint::TrivialLine { .. } => "trivial-line",
            Endpoint::NeumannState { .. } => "neumann-state",
            Endpoint::FoldTurnback { .. } => "fold-turnback",
            Endpoint::RangeExhausted { .. } => "range-exhausted",
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Endpoint::TrivialLine { lambda }
            | Endpoint::FoldTurnback { lambda }
            | Endpoint::RangeExhausted { lambda } => lambda,
            Endpoint::NeumannState { .. } => 0.0,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::NeumannState { value } => write!(f, "neumann-state(u={value})"),
            other => write!(f, "{}(lambda={})", other.tag(), other.lambda()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fold {
    pub index: usize,
    pub lambda: f64,
}

/// Extrapolation of `λ` along the collapsing tail of a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    /// Sup norms of the probe solutions, largest first.
    pub sups: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Aitken limit of `lambdas`.
    pub extrapolated: f64,
    /// The limit is bounded away from zero.
    pub positive_contact: bool,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// Parameters of the family (`lambda` is that of the first point).
    pub params: Params,
    pub lambda_max: f64,
    /// Classification of the first and last point.
    pub endpoints: [Endpoint; 2],
    pub folds: Vec<Fold>,
    /// Initial arclength step.
    pub step: f64,
    pub tail: Option<TailEstimate>,
    /// Set when the trace stopped early.
    pub diagnostic: Option<String>,
}

impl Branch {
    pub fn is_partial(&self) -> bool {
        self.diagnostic.is_some()
    }

    /// Largest fold `λ`, the empirical `λ̄`.
    pub fn lambda_bar(&self) -> Option<f64> {
        self.folds.iter().map(|f| f.lambda).reduce(f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub step: f64,
    pub max_step: f64,
    pub max_points: usize,
    pub lambda_cap: f64,
    pub tol: f64,
    pub max_corrector_iter: usize,
    /// Step halvings allowed before the trace gives up.
    pub max_halvings: u32,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            step: 1e-2,
            max_step: 0.25,
            max_points: 5000,
            lambda_cap: 100.0,
            tol: 1e-10,
            max_corrector_iter: 25,
            max_halvings: 5,
        }
    }
}

/// Helper holding the per-mesh data a trace needs.
struct Ctx<'a> {
    mesh: &'a Mesh,
    params: Params,
    phi: Field,
    metric: SymTridiag,
    tol: f64,
}

impl<'a> Ctx<'a> {
    fn new(mesh: &'a Mesh, params: &Params, tol: f64) -> Result<Ctx<'a>> {
        params.validate()?;
        let phi = spectra::dirichlet_principal(mesh)?.func;
        let mut metric = mesh.stiffness.clone();
        metric.add_diagonal(&mesh.quad_weights);
        Ok(Ctx {
            mesh,
            params: *params,
            phi,
            metric,
            tol,
        })
    }

    fn inner(&self, a: &Field, b: &Field) -> f64 {
        self.metric.bilinear(&a.values, &b.values)
    }

    fn point(&self, u: Field, lambda: f64) -> Result<BranchPoint> {
        let par = self.params.with_lambda(lambda);
        let nm = domain::norms(self.mesh, &u)?;
        Ok(BranchPoint {
            lambda,
            sup_norm: nm.sup,
            h1_norm: nm.h1,
            s_comp: self.inner(&u, &self.phi),
            energy: forms::energy(self.mesh, &u, par.beta)?,
            mu1: spectra::linearized_stability(self.mesh, &u, &par).ok(),
            residual_norm: newton::scaled_residual(self.mesh, &u, &par)?,
            field: u,
        })
    }

    fn converged(&self, u: &Field, lambda: f64) -> Result<bool> {
        if lambda < 0.0 {
            return Ok(false);
        }
        Ok(newton::scaled_residual(self.mesh, u, &self.params.with_lambda(lambda))? <= self.tol)
    }

    /// Residual with `λ` allowed to be slightly negative during correction.
    fn residual(&self, u: &Field, lambda: f64) -> Result<Field> {
        let par = self.params.with_lambda(lambda.abs());
        let mut r = forms::residual(self.mesh, u, &par)?;
        if lambda < 0.0 {
            let b = forms::boundary_term(self.mesh, u, &par)?;
            for &(i, _) in &self.mesh.boundary {
                r.values[i] -= 2.0 * lambda.abs() * b[i];
            }
        }
        Ok(r)
    }

    fn jacobian(&self, u: &Field, lambda: f64) -> Result<SymTridiag> {
        let par = self.params.with_lambda(lambda.abs());
        let mut j = newton::safe_jacobian(self.mesh, u, &par)?;
        if lambda < 0.0 {
            let b = forms::bulk_jacobian(self.mesh, u, &par);
            // Flip the sign of the boundary contribution.
            for &(i, _) in &self.mesh.boundary {
                let bd = j.diag[i] - b.diag[i];
                j.diag[i] -= 2.0 * bd;
            }
        }
        Ok(j)
    }

    /// Newton on `F(u, λ) = 0` bordered by `⟨c, u⟩ + cλ λ = target`.
    fn bordered_newton(
        &self,
        u0: &Field,
        lambda0: f64,
        c: &[f64],
        c_lambda: f64,
        target: f64,
        max_iter: usize,
    ) -> Result<(Field, f64)> {
        let mesh = self.mesh;
        let mut u = u0.clone();
        let mut lam = lambda0;
        let constraint = |u: &Field, lam: f64| linalg::dot(c, &u.values) + c_lambda * lam - target;
        let cscale = sqrt(linalg::dot(c, c) + c_lambda * c_lambda).max(1e-300);
        let mut r = self.residual(&u, lam)?;
        let mut g = constraint(&u, lam);
        let merit = |r: &Field, g: f64| forms::dual_norm(mesh, r) + g.abs() / cscale;
        let mut m = merit(&r, g);
        for _ in 0..max_iter {
            let unorm = domain::h1_norm(mesh, &u)?;
            if forms::dual_norm(mesh, &r) / (1.0 + unorm) <= 0.1 * self.tol
                && g.abs() / cscale <= 1e-12 * (1.0 + unorm + lam.abs())
            {
                return Ok((u, lam));
            }
            let j = self.jacobian(&u, lam)?;
            let fl = forms::lambda_derivative(mesh, &u, &self.params)?;
            let neg: Vec<f64> = r.values.iter().map(|v| -v).collect();
            let (du, dl) = linalg::solve_bordered_refined(&j, &fl, c, c_lambda, &neg, -g)?;
            let du = Field::new(du);
            let mut t = 1.0;
            let mut accepted = false;
            while t >= 1.0 / 1024.0 {
                let ut = u.axpy(t, &du);
                let lt = lam + t * dl;
                if let Ok(rt) = self.residual(&ut, lt) {
                    let gt = constraint(&ut, lt);
                    let mt = merit(&rt, gt);
                    if mt.is_finite() && (mt < m || t == 1.0 && mt < 2.0 * m) {
                        u = ut;
                        lam = lt;
                        r = rt;
                        g = gt;
                        m = mt;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let unorm = domain::h1_norm(mesh, &u)?;
        if forms::dual_norm(mesh, &r) / (1.0 + unorm) <= self.tol {
            return Ok((u, lam));
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: forms::dual_norm(mesh, &r) / (1.0 + unorm),
            best: alloc::boxed::Box::new(u),
        })
    }

    /// Solve at fixed `λ` starting from `u0`.
    fn solve_at(&self, u0: &Field, lambda: f64) -> Result<Field> {
        let opts = NewtonOptions {
            tol: self.tol,
            ..Default::default()
        };
        Ok(newton::newton_solve(self.mesh, u0, &self.params.with_lambda(lambda), &opts)?.field)
    }

    /// Solve with the `H¹` component along `e` fixed to `a`, `λ` free.
    fn solve_fixed_component(&self, u0: &Field, lambda0: f64, e: &Field, a: f64) -> Result<(Field, f64)> {
        let c = self.metric.matvec(&e.values);
        self.bordered_newton(u0, lambda0, &c, 0.0, a, 40)
    }

    fn normalize(&self, du: &Field, dl: f64) -> Result<Tangent> {
        let n = sqrt(self.inner(du, du) + dl * dl);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("zero tangent"));
        }
        Ok(Tangent {
            du: du.scaled(1.0 / n),
            dlambda: dl / n,
        })
    }
}

/// The constant state `u ≡ β^{1/(p-1)}` at `λ = 0` and the branch tangent there,
/// oriented towards increasing `λ`.
pub fn start_from_neumann(mesh: &Mesh, params: &Params) -> Result<(BranchPoint, Tangent)> {
    let params = params.with_lambda(0.0);
    let ctx = Ctx::new(mesh, &params, 1e-10)?;
    let u = mesh.constant(params.neumann_state());
    let j = newton::safe_jacobian(mesh, &u, &params)?;
    let mu = linalg::smallest_eigenpair(&j, &mesh.quad_weights)?.0;
    if !(mu > 1e-12) {
        return Err(Error::numeric("degenerate constant state", 0));
    }
    let fl = forms::lambda_derivative(mesh, &u, &params.with_lambda(1.0))?;
    let neg: Vec<f64> = fl.iter().map(|v| -v).collect();
    let du = Field::new(j.solve(&neg)?);
    let tangent = ctx.normalize(&du, 1.0)?;
    Ok((ctx.point(u, 0.0)?, tangent))
}

enum Stop {
    Continue,
    NegativeLambda,
    Cap,
    Trivial,
}

/// Traces the branch through `seed` in the direction of `tangent`.
pub fn trace_branch(
    mesh: &Mesh,
    params: &Params,
    seed: &BranchPoint,
    tangent: &Tangent,
    opts: &TraceOptions,
) -> Result<Branch> {
    let ctx = Ctx::new(mesh, params, opts.tol)?;
    mesh.check(&seed.field)?;
    if !ctx.converged(&seed.field, seed.lambda)? {
        return Err(Error::invalid("seed is not a converged solution"));
    }
    let t = ctx.normalize(&tangent.du, tangent.dlambda)?;
    let start = classify_start(&ctx, seed);
    trace_from(&ctx, vec![seed.clone()], Some(t), start, opts)
}

fn classify_start(ctx: &Ctx, seed: &BranchPoint) -> Endpoint {
    let c = ctx.params.neumann_state();
    if seed.lambda == 0.0 && seed.field.max_diff(&ctx.mesh.constant(c)) < 1e-8 {
        Endpoint::NeumannState { value: c }
    } else if seed.sup_norm < ctx.mesh.trivial_threshold() {
        Endpoint::TrivialLine { lambda: seed.lambda }
    } else {
        Endpoint::RangeExhausted { lambda: seed.lambda }
    }
}

fn trace_from(
    ctx: &Ctx,
    mut points: Vec<BranchPoint>,
    tangent: Option<Tangent>,
    start: Endpoint,
    opts: &TraceOptions,
) -> Result<Branch> {
    let mesh = ctx.mesh;
    let thr = mesh.trivial_threshold();
    let mut ds = opts.step;
    let mut clean = 0;
    let mut diagnostic = None;
    let mut stop = Stop::Continue;
    let mut first_tangent = tangent;
    // Starts on the trivial line must leave it before collapse counts.
    let mut lifted = points.iter().any(|p| p.sup_norm >= thr);

    if points.last().map(|p| p.lambda).unwrap_or(0.0) >= opts.lambda_cap {
        stop = Stop::Cap;
    }
    while matches!(stop, Stop::Continue) && points.len() < opts.max_points {
        let last = points.last().unwrap();
        let dir = if points.len() >= 2 {
            let prev = &points[points.len() - 2];
            ctx.normalize(&last.field.axpy(-1.0, &prev.field), last.lambda - prev.lambda)?
        } else {
            match first_tangent.take() {
                Some(t) => t,
                None => return Err(Error::invalid("a single seed needs a tangent")),
            }
        };
        let mut halvings = 0;
        let accepted = loop {
            let up = last.field.axpy(ds, &dir.du);
            let lp = last.lambda + ds * dir.dlambda;
            let c = ctx.metric.matvec(&dir.du.values);
            let target = linalg::dot(&c, &up.values) + dir.dlambda * lp;
            let res = ctx.bordered_newton(&up, lp, &c, dir.dlambda, target, opts.max_corrector_iter);
            let ok = match res {
                Ok((u, l)) => {
                    let du = u.axpy(-1.0, &last.field);
                    let dist = sqrt(ctx.inner(&du, &du) + (l - last.lambda) * (l - last.lambda));
                    // Reject jumps and reversals along the secant.
                    let forward = ctx.inner(&du, &dir.du) + (l - last.lambda) * dir.dlambda;
                    if dist <= 2.0 * ds && forward > 0.0 {
                        Some((u, l))
                    } else {
                        None
                    }
                }
                Err(Error::Domain(_)) | Err(Error::NonConvergence { .. }) | Err(Error::NumericFailure { .. }) => None,
                Err(e) => return Err(e),
            };
            match ok {
                Some(x) => break Some(x),
                None => {
                    halvings += 1;
                    clean = 0;
                    if halvings > opts.max_halvings {
                        break None;
                    }
                    ds *= 0.5;
                }
            }
        };
        let Some((u, l)) = accepted else {
            diagnostic = Some(format!(
                "corrector failed after {} step halvings at lambda = {}",
                opts.max_halvings, last.lambda
            ));
            break;
        };
        let lam_last = last.lambda;
        let field_last = last.field.clone();
        if l < 0.0 || (l == 0.0 && lam_last > 0.0) {
            // Interpolate to λ = 0 and solve there.
            let th = lam_last / (lam_last - l);
            let guess = field_last.axpy(th, &u.axpy(-1.0, &field_last));
            let f = ctx.solve_at(&guess, 0.0).unwrap_or(guess);
            points.push(ctx.point(f, 0.0)?);
            stop = Stop::NegativeLambda;
            break;
        }
        if l > opts.lambda_cap {
            let th = (opts.lambda_cap - lam_last) / (l - lam_last);
            let guess = field_last.axpy(th, &u.axpy(-1.0, &field_last));
            match ctx.solve_at(&guess, opts.lambda_cap) {
                Ok(f) => points.push(ctx.point(f, opts.lambda_cap)?),
                Err(_) => points.push(ctx.point(u, l)?),
            }
            stop = Stop::Cap;
            break;
        }
        let p = ctx.point(u, l)?;
        let trivial = lifted && p.sup_norm < thr;
        lifted |= p.sup_norm >= thr;
        points.push(p);
        if trivial {
            stop = Stop::Trivial;
            break;
        }
        if halvings == 0 {
            clean += 1;
            if clean >= 4 {
                ds = (ds * 1.3).min(opts.max_step);
                clean = 0;
            }
        }
    }

    let last = points.last().unwrap();
    let mut tail = None;
    let end = match stop {
        Stop::NegativeLambda => {
            let c = ctx.params.neumann_state();
            if last.field.max_diff(&mesh.constant(c)) <= 1e-6 {
                Endpoint::NeumannState { value: c }
            } else if last.sup_norm < thr {
                Endpoint::TrivialLine { lambda: 0.0 }
            } else {
                Endpoint::RangeExhausted { lambda: 0.0 }
            }
        }
        Stop::Cap => Endpoint::RangeExhausted { lambda: last.lambda },
        Stop::Trivial => {
            let est = tail_estimate(ctx, &points);
            let ep = match &est {
                Some(t) if t.positive_contact => Endpoint::TrivialLine { lambda: t.extrapolated },
                _ => Endpoint::TrivialLine { lambda: 0.0 },
            };
            tail = est;
            ep
        }
        Stop::Continue => {
            if diagnostic.is_some() && points.len() >= 3 && !detect_folds(&points).is_empty() {
                let n = points.len();
                let d1 = points[n - 1].lambda - points[n - 2].lambda;
                let d0 = points[n - 2].lambda - points[n - 3].lambda;
                if d1 * d0 < 0.0 {
                    Endpoint::FoldTurnback { lambda: last.lambda }
                } else {
                    Endpoint::RangeExhausted { lambda: last.lambda }
                }
            } else {
                if diagnostic.is_none() {
                    diagnostic = Some(format!("point budget of {} exhausted", opts.max_points));
                }
                Endpoint::RangeExhausted { lambda: last.lambda }
            }
        }
    };
    // A point budget stop is a normal termination, not a failure.
    if matches!(stop, Stop::Continue) && points.len() >= opts.max_points {
        diagnostic = None;
    }
    let folds = detect_folds(&points);
    let lambda_max = points.iter().map(|p| p.lambda).fold(f64::NEG_INFINITY, f64::max);
    Ok(Branch {
        params: ctx.params.with_lambda(points[0].lambda),
        lambda_max,
        endpoints: [start, end],
        folds,
        step: opts.step,
        tail,
        diagnostic,
        points,
    })
}

/// Probes the collapsing tail at sup levels `4θ, 2θ, θ` (`θ = 10h²`) with the
/// component along the last profile fixed, then extrapolates `λ` by Aitken's
/// formula.
fn tail_estimate(ctx: &Ctx, points: &[BranchPoint]) -> Option<TailEstimate> {
    let thr = ctx.mesh.trivial_threshold();
    let anchor = points.iter().rev().find(|p| p.sup_norm >= thr)?;
    let e = anchor.field.scaled(1.0 / sqrt(ctx.inner(&anchor.field, &anchor.field)));
    let a_anchor = ctx.inner(&anchor.field, &e);
    let mut sups = Vec::new();
    let mut lambdas = Vec::new();
    let (mut u, mut lam) = (anchor.field.clone(), anchor.lambda);
    let mut a_prev = a_anchor;
    for k in [4.0, 2.0, 1.0] {
        let a = a_anchor * k * thr / anchor.sup_norm;
        let guess = u.scaled(a / a_prev);
        let (f, l) = ctx.solve_fixed_component(&guess, lam, &e, a).ok()?;
        sups.push(f.sup());
        lambdas.push(l);
        u = f;
        lam = l;
        a_prev = a;
    }
    let (l1, l2, l3) = (lambdas[0], lambdas[1], lambdas[2]);
    let (d1, d2) = (l1 - l2, l2 - l3);
    let ratio = d2 / d1;
    let extrapolated = if d1 != 0.0 && ratio > 0.0 && ratio < 0.95 {
        l3 - d2 * d2 / (d1 - d2)
    } else if d2 > 0.0 {
        // λ keeps falling by non-shrinking amounts as the amplitude halves.
        0.0
    } else {
        l3
    };
    let positive_contact = extrapolated > 0.25 * l3;
    Some(TailEstimate {
        sups,
        lambdas,
        extrapolated: extrapolated.max(0.0),
        positive_contact,
    })
}

/// The branch `C_{α,β}` from its bifurcation point `(λ_{α,β}, 0)` on the trivial
/// line, continued until `λ` reaches zero.
pub fn trace_regularized_continuum(
    mesh: &Mesh,
    alpha: f64,
    beta: f64,
    p: f64,
    q: f64,
    opts: &TraceOptions,
) -> Result<Branch> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("the regularized continuum needs alpha > 0"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("the regularized continuum needs 0 < beta < 1"));
    }
    let stek = spectra::steklov_principal(mesh, beta)?;
    let lab = spectra::regularized_bifurcation_lambda(stek.value, alpha, q)?;
    let params = Params::new(p, q, lab, alpha, beta)?;
    let ctx = Ctx::new(mesh, &params, opts.tol)?;
    let e = &stek.func;
    // Boundary values well below α keep the start on the linearized branch.
    let delta = (1e-3 * alpha / e.sup()).min(mesh.trivial_threshold());
    let (u1, l1) = ctx.solve_fixed_component(&e.scaled(delta), lab, e, delta)?;
    let (u2, l2) = ctx.solve_fixed_component(&u1.scaled(2.0), l1, e, 2.0 * delta)?;
    let contact = (2.0 * l1 - l2).max(0.0);
    let pts = vec![ctx.point(u1, l1)?, ctx.point(u2, l2)?];
    let opts = TraceOptions {
        step: opts.step.min(0.1 * alpha),
        ..*opts
    };
    let mut branch = trace_from(&ctx, pts, None, Endpoint::TrivialLine { lambda: contact }, &opts)?;
    if !matches!(branch.endpoints[1], Endpoint::NeumannState { .. }) {
        let msg = format!(
            "regularized continuum ended at {} instead of the constant state",
            branch.endpoints[1]
        );
        if branch.diagnostic.is_none() {
            branch.diagnostic = Some(msg.clone());
        }
        return Err(Error::TopologyFailure(msg));
    }
    Ok(branch)
}

/// Sign changes of the `λ` increment along the branch. Fold `λ` values come from
/// the parabola through the three points around each turn.
pub fn detect_folds(points: &[BranchPoint]) -> Vec<Fold> {
    let mut out = Vec::new();
    if points.len() < 3 {
        return out;
    }
    let mut last_sign = 0.0;
    let mut last_idx = 0;
    for i in 1..points.len() {
        let d = points[i].lambda - points[i - 1].lambda;
        if d == 0.0 {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign {
            let k = i - 1;
            let lam = if last_idx + 1 == k && k >= 1 {
                parabola_extremum(&points[k - 1], &points[k], &points[k + 1])
            } else {
                points[k].lambda
            };
            out.push(Fold { index: k, lambda: lam });
        }
        last_sign = s;
        last_idx = i - 1;
    }
    out
}

fn parabola_extremum(a: &BranchPoint, b: &BranchPoint, c: &BranchPoint) -> f64 {
    // Parameterize by cumulative distance in the (λ, h1) plane.
    let s1 = hypot(b.lambda - a.lambda, b.h1_norm - a.h1_norm);
    let s2 = s1 + hypot(c.lambda - b.lambda, c.h1_norm - b.h1_norm);
    let (y0, y1, y2) = (a.lambda, b.lambda, c.lambda);
    // Divided differences.
    let f01 = (y1 - y0) / s1;
    let f12 = (y2 - y1) / (s2 - s1);
    let f012 = (f12 - f01) / s2;
    if f012 == 0.0 || !f012.is_finite() {
        return y1;
    }
    // y(s) = y0 + f01 s + f012 s (s - s1); y'(s*) = 0.
    let st = (f012 * s1 - f01) / (2.0 * f012);
    if !(st >= 0.0 && st <= s2) {
        return y1;
    }
    let v = y0 + f01 * st + f012 * st * (st - s1);
    if v.is_finite() {
        v
    } else {
        y1
    }
}

/// Polyline of a branch in the `(λ, sup)` plane.
pub fn polyline(branch: &Branch) -> Vec<(f64, f64)> {
    branch.points.iter().map(|p| (p.lambda, p.sup_norm)).collect()
}

fn resample(poly: &[(f64, f64)], count: usize) -> Vec<(f64, f64)> {
    if poly.len() == 1 {
        return vec![poly[0]; count];
    }
    let mut cum = vec![0.0];
    for w in poly.windows(2) {
        let l = cum.last().unwrap() + hypot(w[1].0 - w[0].0, w[1].1 - w[0].1);
        cum.push(l);
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let s = total * k as f64 / (count - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 {
            ((s - cum[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (poly[seg], poly[seg + 1]);
        out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
    out
}

fn point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    hypot(p.0 - a.0 - t * dx, p.1 - a.1 - t * dy)
}

fn directed(samples: &[(f64, f64)], poly: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&s| {
            if poly.len() == 1 {
                return hypot(s.0 - poly[0].0, s.1 - poly[0].1);
            }
            poly.windows(2)
                .map(|w| point_segment(s, w[0], w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines, each sampled at 200 points of
/// equal arclength and measured against the other's segments.
pub fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let sa = resample(a, 200);
    let sb = resample(b, 200);
    directed(&sa, b).max(directed(&sb, a))
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Distance between consecutive branches of the sequence.
    pub distances: Vec<f64>,
    pub strictly_decreasing: bool,
    pub converged: bool,
    /// Index of the branch taken as the limit (the last one).
    pub limit: usize,
}

/// Hausdorff distances between consecutive members of a homotopy family.
/// `tolerance` is the convergence threshold for the last distance (twice the
/// continuation step in the usual setting).
pub fn homotopy_limit(branches: &[Branch], tolerance: f64) -> Result<ConvergenceReport> {
    if branches.len() < 3 {
        return Err(Error::invalid("a homotopy limit needs at least three branches"));
    }
    let polys: Vec<Vec<(f64, f64)>> = branches.iter().map(polyline).collect();
    let distances: Vec<f64> = polys.windows(2).map(|w| hausdorff(&w[0], &w[1])).collect();
    let strictly_decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    if !distances.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Divergence(format!(
            "branch distances do not decrease: {distances:?}"
        )));
    }
    let converged = *distances.last().unwrap() <= tolerance;
    Ok(ConvergenceReport {
        distances,
        strictly_decreasing,
        converged,
        limit: branches.len() - 1,
    })
}

/// Traces `C_β` at `α = 0` from the constant state (`β = 1` gives the limit
/// branch `C*_{p,q}` directly).
pub fn trace_from_neumann(mesh: &Mesh, params: &Params, opts: &TraceOptions) -> Result<Branch> {
    let (seed, tangent) = start_from_neumann(mesh, params)?;
    trace_branch(mesh, &params.with_lambda(0.0), &seed, &tangent, opts)
}

#[derive(Debug, Clone)]
pub struct LambdaStarEstimate {
    /// `(cells, λ*)` per refinement level.
    pub estimates: Vec<(usize, f64)>,
    /// `λ_max` of each traced branch.
    pub lambda_max: Vec<f64>,
    pub mean: f64,
    /// `max - min` over the levels.
    pub spread: f64,
}

/// Trivial-line contact of the limit branch for `pq = 1`, repeated over grid
/// levels. Each level traces the `β = 1`, `α = 0` branch from `(0, 1)` and
/// takes the extrapolated collapse point.
pub fn estimate_lambda_star(
    kind: domain::MeshKind,
    extent: f64,
    p: f64,
    q: f64,
    levels: &[usize],
    opts: &TraceOptions,
) -> Result<LambdaStarEstimate> {
    let params = Params::new(p, q, 0.0, 0.0, 1.0)?;
    if params.regime() != Regime::PqEqual {
        return Err(Error::invalid("the trivial-line contact estimate needs pq = 1"));
    }
    if levels.is_empty() {
        return Err(Error::invalid("at least one refinement level is needed"));
    }
    let mut estimates = Vec::new();
    let mut lambda_max = Vec::new();
    for &n in levels {
        let mesh = Mesh::new(kind, extent, n)?;
        let b = trace_from_neumann(&mesh, &params, opts)?;
        match b.endpoints[1] {
            Endpoint::TrivialLine { lambda } if lambda > 0.0 => {
                estimates.push((n, lambda));
                lambda_max.push(b.lambda_max);
            }
            other => {
                return Err(Error::EstimationFailure(format!(
                    "branch on {n} cells ended at {other}, not on the trivial line at positive lambda"
                )))
            }
        }
    }
    let vals: Vec<f64> = estimates.iter().map(|e| e.1).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread =
        vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LambdaStarEstimate {
        estimates,
        lambda_max,
        mean,
        spread,
    })
}

/// Places where the branch crosses `λ = target`: `(segment index, fraction)`.
pub fn lambda_crossings(branch: &Branch, target: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for i in 0..branch.points.len().saturating_sub(1) {
        let (a, b) = (branch.points[i].lambda, branch.points[i + 1].lambda);
        if (a - target) * (b - target) < 0.0 || (b == target && i + 2 == branch.points.len()) || a == target {
            let t = if b != a { (target - a) / (b - a) } else { 0.0 };
            out.push((i, t));
        }
    }
    out
}

/// Solutions at exactly `λ = target` on every crossing of the branch, polished
/// by Newton from the interpolated state.
pub fn solutions_at(mesh: &Mesh, branch: &Branch, target: f64, tol: f64) -> Result<Vec<Field>> {
    let ctx = Ctx::new(mesh, &branch.params, tol)?;
    let mut out = Vec::new();
    for (i, t) in lambda_crossings(branch, target) {
        let a = &branch.points[i].field;
        let b = &branch.points[i + 1].field;
        let guess = a.axpy(t, &b.axpy(-1.0, a));
        out.push(ctx.solve_at(&guess, target)?);
    }
    Ok(out)
}

/// `λ` where the branch reaches a given sup level, by interpolation on the
/// last crossing.
pub fn lambda_at_sup(branch: &Branch, level: f64) -> Option<f64> {
    let pts = &branch.points;
    (0..pts.len().saturating_sub(1)).rev().find_map(|i| {
        let (a, b) = (pts[i].sup_norm, pts[i + 1].sup_norm);
        if (a - level) * (b - level) <= 0.0 && a != b {
            let t = (level - a) / (b - a);
            Some(pts[i].lambda + t * (pts[i + 1].lambda - pts[i].lambda))
        } else {
            None
        }
    })
}
