//! Uniform meshes on an interval `(0, L)` or a radially symmetric disk of
//! radius `R`, with the lumped quadrature, boundary weights and stiffness
//! matrix shared by every other module.
//!
//! The interval uses trapezoid weights. The disk uses control volumes around
//! each radius, so the weights carry the `2πr` Jacobian and sum to `πR²`
//! exactly; the centre row of the stiffness reproduces the symmetric limit
//! `2u''(0)` of the radial Laplacian.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::SymTridiag;
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Interval,
    RadialDisk,
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshKind::Interval => "interval",
            MeshKind::RadialDisk => "radial-disk",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub kind: MeshKind,
    /// Length `L` or radius `R`.
    pub extent: f64,
    /// Number of cells.
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// `(node index, weight)` for each boundary node.
    pub boundary: Vec<(usize, f64)>,
    /// Discrete `∫ ∇u·∇v`.
    pub stiffness: SymTridiag,
}

impl Mesh {
    pub fn new(kind: MeshKind, extent: f64, n: usize) -> Result<Mesh> {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::invalid("mesh extent must be positive and finite"));
        }
        if n < 2 {
            return Err(Error::invalid("mesh needs at least 2 cells"));
        }
        let h = extent / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| if i == n { extent } else { i as f64 * h }).collect();
        let mut stiffness = SymTridiag::zeros(n + 1);
        let quad_weights;
        let boundary;
        match kind {
            MeshKind::Interval => {
                let mut w = vec![h; n + 1];
                w[0] = 0.5 * h;
                w[n] = 0.5 * h;
                quad_weights = w;
                for i in 0..n {
                    stiffness.off[i] = -1.0 / h;
                    stiffness.diag[i] += 1.0 / h;
                    stiffness.diag[i + 1] += 1.0 / h;
                }
                boundary = vec![(0, 1.0), (n, 1.0)];
            }
            MeshKind::RadialDisk => {
                let mut w: Vec<f64> = nodes.iter().map(|&r| 2.0 * PI * r * h).collect();
                w[0] = PI * 0.25 * h * h;
                let inner = extent - 0.5 * h;
                w[n] = PI * (extent * extent - inner * inner);
                quad_weights = w;
                for i in 0..n {
                    let c = 2.0 * PI * (i as f64 + 0.5) * h / h;
                    stiffness.off[i] = -c;
                    stiffness.diag[i] += c;
                    stiffness.diag[i + 1] += c;
                }
                boundary = vec![(n, 2.0 * PI * extent)];
            }
        }
        Ok(Mesh {
            kind,
            extent,
            n,
            h,
            nodes,
            quad_weights,
            boundary,
            stiffness,
        })
    }

    pub fn interval(length: f64, n: usize) -> Result<Mesh> {
        Mesh::new(MeshKind::Interval, length, n)
    }

    pub fn disk(radius: f64, n: usize) -> Result<Mesh> {
        Mesh::new(MeshKind::RadialDisk, radius, n)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `|Ω|`: length or area.
    pub fn measure(&self) -> f64 {
        match self.kind {
            MeshKind::Interval => self.extent,
            MeshKind::RadialDisk => PI * self.extent * self.extent,
        }
    }

    /// `|∂Ω|`: two endpoints or the circumference.
    pub fn boundary_measure(&self) -> f64 {
        self.boundary.iter().map(|b| b.1).sum()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary.iter().any(|b| b.0 == i)
    }

    /// Nodes not on the boundary, as a contiguous range.
    pub fn interior(&self) -> core::ops::Range<usize> {
        match self.kind {
            MeshKind::Interval => 1..self.n,
            MeshKind::RadialDisk => 0..self.n,
        }
    }

    /// Diagonal of the boundary mass: boundary weight at boundary nodes, zero elsewhere.
    pub fn boundary_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for &(i, w) in &self.boundary {
            d[i] = w;
        }
        d
    }

    /// The trivial-solution threshold `10 h²` used for classification.
    pub fn trivial_threshold(&self) -> f64 {
        10.0 * self.h * self.h
    }

    pub fn field_from_fn(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.nodes.iter().map(|&x| f(x)).collect())
    }

    pub fn constant(&self, c: f64) -> Field {
        Field::new(vec![c; self.len()])
    }

    pub(crate) fn check(&self, f: &Field) -> Result<()> {
        if f.values.len() != self.len() {
            return Err(Error::invalid("field does not belong to this mesh"));
        }
        Ok(())
    }
}

/// Nodal values of a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Field {
        Field { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field::new(self.values.iter().map(|v| c * v).collect())
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        Field::new(self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Largest nodal `|self - other|`.
    pub fn max_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub sup: f64,
}

pub fn integrate(mesh: &Mesh, f: &Field) -> Result<f64> {
    mesh.check(f)?;
    Ok(mesh.quad_weights.iter().zip(&f.values).map(|(w, v)| w * v).sum())
}

pub fn integrate_boundary(mesh: &Mesh, g: &Field) -> Result<f64> {
    mesh.check(g)?;
    Ok(mesh.boundary.iter().map(|&(i, w)| w * g.values[i]).sum())
}

/// `∫ u v` with the lumped mass.
pub fn l2_inner(mesh: &Mesh, u: &Field, v: &Field) -> Result<f64> {
    mesh.check(u)?;
    mesh.check(v)?;
    Ok((0..mesh.len())
        .map(|i| mesh.quad_weights[i] * u.values[i] * v.values[i])
        .sum())
}

/// `∫ ∇u·∇v`.
pub fn grad_inner(mesh: &Mesh, u: &Field, v: &Field) -> Result<f64> {
    mesh.check(u)?;
    mesh.check(v)?;
    Ok(mesh.stiffness.bilinear(&u.values, &v.values))
}

/// The `H¹` inner product `∫ ∇u·∇v + ∫ u v`.
pub fn h1_inner(mesh: &Mesh, u: &Field, v: &Field) -> Result<f64> {
    Ok(grad_inner(mesh, u, v)? + l2_inner(mesh, u, v)?)
}

/// `L²` norm of the gradient.
pub fn grad_l2(mesh: &Mesh, f: &Field) -> Result<f64> {
    Ok(sqrt(grad_inner(mesh, f, f)?.max(0.0)))
}

pub fn norms(mesh: &Mesh, f: &Field) -> Result<Norms> {
    let l2sq = l2_inner(mesh, f, f)?;
    let g2 = grad_inner(mesh, f, f)?.max(0.0);
    Ok(Norms {
        l2: sqrt(l2sq),
        h1: sqrt(g2 + l2sq),
        sup: f.sup(),
    })
}

pub fn h1_norm(mesh: &Mesh, f: &Field) -> Result<f64> {
    Ok(norms(mesh, f)?.h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::sin;
    use proptest::prelude::*;

    #[test]
    fn interval_nodes() {
        let m = Mesh::interval(PI, 4).unwrap();
        let want = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI];
        for (a, b) in m.nodes.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = Mesh::interval(2.0 * PI, 8).unwrap();
        assert_eq!(m.len(), 9);
        assert!((m.h - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Mesh::interval(0.0, 4).is_err());
        assert!(Mesh::interval(-1.0, 4).is_err());
        assert!(Mesh::interval(1.0, 1).is_err());
        assert!(Mesh::disk(f64::NAN, 8).is_err());
    }

    #[test]
    fn disk_area() {
        let m = Mesh::disk(1.0, 100).unwrap();
        let s: f64 = m.quad_weights.iter().sum();
        assert!((s - PI).abs() <= 1e-12 * PI);
        assert!(m.quad_weights.iter().all(|&w| w > 0.0));
        assert_eq!(m.boundary, vec![(100, 2.0 * PI)]);
    }

    #[test]
    fn integrals_of_constants() {
        let m = Mesh::interval(PI, 16).unwrap();
        assert!((integrate(&m, &m.constant(1.0)).unwrap() - PI).abs() < 1e-14);
        assert!((integrate_boundary(&m, &m.constant(1.0)).unwrap() - 2.0).abs() < 1e-15);
        let d = Mesh::disk(1.0, 50).unwrap();
        assert!((integrate(&d, &d.constant(1.0)).unwrap() - PI).abs() < 1e-10);
        assert!((integrate_boundary(&d, &d.constant(1.0)).unwrap() - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn sine_integrals() {
        let m = Mesh::interval(PI, 256).unwrap();
        let s = m.field_from_fn(sin);
        assert!((integrate(&m, &s).unwrap() - 2.0).abs() < 1e-4);
        assert!(integrate_boundary(&m, &s).unwrap().abs() < 1e-12);
        let nm = norms(&m, &s).unwrap();
        assert!((nm.h1 - sqrt(PI)).abs() < 1e-3);
    }

    #[test]
    fn sine_integral_is_second_order() {
        let err = |n| {
            let m = Mesh::interval(PI, n).unwrap();
            (integrate(&m, &m.field_from_fn(sin)).unwrap() - 2.0).abs()
        };
        assert!(err(64) / err(128) >= 3.5);
    }

    #[test]
    fn mismatch_is_rejected() {
        let m = Mesh::interval(1.0, 4).unwrap();
        assert!(integrate(&m, &Field::new(vec![1.0; 3])).is_err());
        assert!(norms(&m, &Field::new(vec![1.0; 6])).is_err());
    }

    #[test]
    fn zero_and_constant_norms() {
        let m = Mesh::disk(1.5, 20).unwrap();
        let z = norms(&m, &m.constant(0.0)).unwrap();
        assert_eq!((z.l2, z.h1, z.sup), (0.0, 0.0, 0.0));
        let c = norms(&m, &m.constant(-2.0)).unwrap();
        assert!((c.l2 - 2.0 * sqrt(m.measure())).abs() < 1e-12);
        assert!((c.h1 - c.l2).abs() < 1e-12);
        assert_eq!(c.sup, 2.0);
    }

    proptest! {
        #[test]
        fn affine_data_integrated_exactly(a in -5.0f64..5.0, b in -5.0f64..5.0, l in 0.1f64..10.0, n in 2usize..200) {
            let m = Mesh::interval(l, n).unwrap();
            let f = m.field_from_fn(|x| a * x + b);
            let exact = 0.5 * a * l * l + b * l;
            let got = integrate(&m, &f).unwrap();
            prop_assert!((got - exact).abs() <= 1e-13 * (1.0 + exact.abs() + a.abs() * l * l));
        }

        #[test]
        fn h1_splits_into_gradient_and_l2(vals in proptest::collection::vec(-3.0f64..3.0, 11), disk in any::<bool>()) {
            let m = if disk { Mesh::disk(2.0, 10).unwrap() } else { Mesh::interval(3.0, 10).unwrap() };
            let f = Field::new(vals);
            let nm = norms(&m, &f).unwrap();
            let g = grad_l2(&m, &f).unwrap();
            let lhs = nm.h1 * nm.h1;
            let rhs = g * g + nm.l2 * nm.l2;
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs));
            prop_assert!(nm.h1 >= nm.l2);
        }

        #[test]
        fn weights_sum_to_measure(r in 0.1f64..5.0, n in 2usize..300, disk in any::<bool>()) {
            let m = Mesh::new(if disk { MeshKind::RadialDisk } else { MeshKind::Interval }, r, n).unwrap();
            let s: f64 = m.quad_weights.iter().sum();
            prop_assert!((s - m.measure()).abs() <= 1e-12 * m.measure());
            prop_assert!(m.nodes.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
