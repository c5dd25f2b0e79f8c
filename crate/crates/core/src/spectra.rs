//! Principal eigenpairs: the Dirichlet pair `(β_Ω, φ_Ω)`, the boundary
//! eigenvalue `λ_β` of `-Δφ = βφ, ∂φ/∂ν = -λφ`, and the smallest eigenvalue of
//! the linearization at a state.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{self, Field, Mesh, MeshKind};
use crate::error::{Error, Result};
use crate::forms::{self, Params};
use crate::linalg::{self, SymTridiag};
use crate::math::{powf, sqrt};

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Eigenfunction, nonnegative and normalized to `H¹` norm one.
    pub func: Field,
    /// `‖A φ - value · W φ‖` in the mass-scaled norm.
    pub residual_norm: f64,
}

fn normalize_h1(mesh: &Mesh, f: &mut Field) -> Result<()> {
    let nrm = domain::h1_norm(mesh, f)?;
    if !(nrm > 0.0) {
        return Err(Error::numeric("zero eigenvector", 0));
    }
    for v in f.values.iter_mut() {
        *v /= nrm;
    }
    Ok(())
}

/// Smallest Dirichlet eigenvalue and its positive eigenfunction (zero on the boundary).
pub fn dirichlet_principal(mesh: &Mesh) -> Result<EigenPair> {
    let range = mesh.interior();
    let k = mesh.stiffness.slice(range.start, range.end);
    let w = &mesh.quad_weights[range.clone()];
    let (value, x) = linalg::smallest_eigenpair(&k, w)?;
    let mut func = mesh.constant(0.0);
    func.values[range.clone()].copy_from_slice(&x);
    normalize_h1(mesh, &mut func)?;
    let kx = k.matvec(&func.values[range.clone()]);
    let r = sqrt(
        kx.iter()
            .enumerate()
            .map(|(j, a)| {
                let d = a - value * w[j] * func.values[range.start + j];
                d * d / w[j]
            })
            .sum(),
    );
    if range.clone().any(|i| !(func.values[i] > 0.0)) {
        return Err(Error::numeric("principal Dirichlet eigenvector changes sign", 0));
    }
    Ok(EigenPair {
        value,
        func,
        residual_norm: r,
    })
}

/// `-∂φ/∂ν` at each boundary node (in `mesh.boundary` order) by second-order
/// one-sided differences.
pub fn boundary_flux(mesh: &Mesh, phi: &Field) -> Result<Vec<f64>> {
    mesh.check(phi)?;
    let h = mesh.h;
    let u = &phi.values;
    let n = mesh.n;
    let right = -(3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
    Ok(match mesh.kind {
        MeshKind::Interval => vec![(-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h), right],
        MeshKind::RadialDisk => vec![right],
    })
}

/// `G = K - β M`.
fn shifted_stiffness(mesh: &Mesh, beta: f64) -> SymTridiag {
    let mut g = mesh.stiffness.clone();
    for (d, w) in g.diag.iter_mut().zip(&mesh.quad_weights) {
        *d -= beta * w;
    }
    g
}

/// Principal (largest) `λ_β` of `-Δφ = βφ` in `Ω`, `∂φ/∂ν = -λφ` on `∂Ω`, with
/// `φ_β > 0` on the closed domain.
///
/// The interior unknowns are eliminated exactly, which leaves an eigenproblem
/// of the size of the boundary node set (two nodes or one).
pub fn steklov_principal(mesh: &Mesh, beta: f64) -> Result<EigenPair> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta must be positive"));
    }
    let g = shifted_stiffness(mesh, beta);
    let range = mesh.interior();
    let gii = g.slice(range.start, range.end);
    if !gii.is_positive_definite() {
        return Err(Error::invalid(
            "beta is not below the principal Dirichlet eigenvalue of the mesh",
        ));
    }
    let nb = mesh.boundary.len();
    // Interior response to a unit value at each boundary node.
    let mut responses: Vec<Vec<f64>> = Vec::with_capacity(nb);
    for &(b, _) in &mesh.boundary {
        let mut rhs = vec![0.0; range.len()];
        if b > 0 && range.contains(&(b - 1)) {
            rhs[b - 1 - range.start] = -g.off[b - 1];
        }
        if range.contains(&(b + 1)) {
            rhs[b + 1 - range.start] = -g.off[b];
        }
        responses.push(gii.solve(&rhs)?);
    }
    let lift = |coef: &[f64]| -> Field {
        let mut f = mesh.constant(0.0);
        for (k, &(b, _)) in mesh.boundary.iter().enumerate() {
            f.values[b] = coef[k];
            for (j, r) in responses[k].iter().enumerate() {
                f.values[range.start + j] += coef[k] * r;
            }
        }
        f
    };
    // Schur complement S[a][b] = (G φ_b)_a where φ_b is the lift of the unit vector.
    let mut s = vec![vec![0.0; nb]; nb];
    for bcol in 0..nb {
        let mut e = vec![0.0; nb];
        e[bcol] = 1.0;
        let gf = g.matvec(&lift(&e).values);
        for (a, &(ia, _)) in mesh.boundary.iter().enumerate() {
            s[a][bcol] = gf[ia];
        }
    }
    let wts: Vec<f64> = mesh.boundary.iter().map(|b| b.1).collect();
    // -S φ_B = λ W φ_B.
    let (value, coef) = match nb {
        1 => (-s[0][0] / wts[0], vec![1.0]),
        2 => {
            let (a, b, c) = (-s[0][0] / wts[0], -s[0][1] / sqrt(wts[0] * wts[1]), -s[1][1] / wts[1]);
            let tr = 0.5 * (a + c);
            let disc = sqrt(0.25 * (a - c) * (a - c) + b * b);
            let lam = tr + disc;
            // Eigenvector of the scaled 2x2 matrix, then unscale.
            let (y0, y1) = if (lam - a).abs() >= (lam - c).abs() {
                (b, lam - a)
            } else {
                (lam - c, b)
            };
            let (y0, y1) = if y0 == 0.0 && y1 == 0.0 { (1.0, 1.0) } else { (y0, y1) };
            (lam, vec![y0 / sqrt(wts[0]), y1 / sqrt(wts[1])])
        }
        _ => return Err(Error::invalid("unsupported boundary node count")),
    };
    let mut func = lift(&coef);
    if func.values.iter().sum::<f64>() < 0.0 {
        func = func.scaled(-1.0);
    }
    normalize_h1(mesh, &mut func)?;
    if func.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::numeric("principal boundary eigenfunction changes sign", 0));
    }
    let mut r = g.matvec(&func.values);
    for &(i, w) in &mesh.boundary {
        r[i] += value * w * func.values[i];
    }
    let residual_norm = forms::dual_norm(mesh, &Field::new(r));
    Ok(EigenPair {
        value,
        func,
        residual_norm,
    })
}

/// `λ_{α,β} = λ_β α^{1-q}`.
pub fn regularized_bifurcation_lambda(lambda_beta: f64, alpha: f64, q: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    Ok(lambda_beta * powf(alpha, 1.0 - q))
}

/// Smallest eigenvalue `μ₁` of the Jacobian at `u` relative to the mass.
/// `μ₁ > 0` marks a linearly stable state.
pub fn linearized_stability(mesh: &Mesh, u: &Field, params: &Params) -> Result<f64> {
    let j = forms::jacobian(mesh, u, params)?;
    Ok(linalg::smallest_eigenpair(&j, &mesh.quad_weights)?.0)
}

/// Smallest eigenpair of the Jacobian, with its eigenvector.
pub fn linearized_eigenpair(mesh: &Mesh, u: &Field, params: &Params) -> Result<(f64, Field)> {
    let j = forms::jacobian(mesh, u, params)?;
    let (mu, v) = linalg::smallest_eigenpair(&j, &mesh.quad_weights)?;
    Ok((mu, Field::new(v)))
}
