//! Equidistant meshes on [0, 1], Lagrange spaces of degree 1 and 2 with
//! homogeneous Dirichlet conditions, and assembly of the mass and stiffness
//! matrices.
//!
//! Degrees of freedom are the interior Lagrange nodes, numbered from left to
//! right; boundary values are eliminated, so every matrix is interior-only.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

pub use crate::linalg::SymMatrix;

const MAX_LEVEL: u32 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    level: u32,
    n0: usize,
    n_elements: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Node count of the level-0 mesh this one was refined from.
    pub fn initial_nodes(&self) -> usize {
        self.n0
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Uniform mesh with `(n0 - 1) * 2^level` elements.
pub fn build_mesh(n0: usize, level: u32) -> Result<Mesh1D> {
    if n0 < 2 {
        return Err(Error::InvalidMesh(format!(
            "initial node count must be at least 2, got {n0}"
        )));
    }
    if level > MAX_LEVEL {
        return Err(Error::InvalidMesh(format!(
            "refinement level {level} exceeds {MAX_LEVEL}"
        )));
    }
    let n_elements = (n0 - 1) << level;
    let nodes = (0..=n_elements)
        .map(|i| i as f64 / n_elements as f64)
        .collect();
    Ok(Mesh1D {
        level,
        n0,
        n_elements,
        h: 1.0 / n_elements as f64,
        nodes,
    })
}

/// Continuous piecewise polynomials of degree `p` vanishing at 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeSpace {
    mesh: Mesh1D,
    degree: usize,
    n_dofs: usize,
}

pub fn make_fespace(mesh: Mesh1D, p: usize) -> Result<FeSpace> {
    if !(1..=2).contains(&p) {
        return Err(Error::UnsupportedDegree(p));
    }
    let n_dofs = p * mesh.n_elements - 1;
    Ok(FeSpace {
        mesh,
        degree: p,
        n_dofs,
    })
}

/// Local Lagrange shape functions on the reference element [0, 1], as
/// monomial coefficients `[c0, c1, c2]`.
const SHAPE_P1: [[f64; 3]; 2] = [[1.0, -1.0, 0.0], [0.0, 1.0, 0.0]];
const SHAPE_P2: [[f64; 3]; 3] = [[1.0, -3.0, 2.0], [0.0, 4.0, -4.0], [0.0, -1.0, 2.0]];

fn shape_coeffs(p: usize) -> &'static [[f64; 3]] {
    match p {
        1 => &SHAPE_P1,
        _ => &SHAPE_P2,
    }
}

#[inline]
fn poly(c: &[f64; 3], t: f64) -> f64 {
    c[0] + t * (c[1] + t * c[2])
}

#[inline]
fn poly_dt(c: &[f64; 3], t: f64) -> f64 {
    c[1] + 2.0 * c[2] * t
}

impl FeSpace {
    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn h(&self) -> f64 {
        self.mesh.h
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements
    }

    /// Coordinate of the Lagrange node carrying dof `i`.
    pub fn dof_coordinate(&self, i: usize) -> f64 {
        (i + 1) as f64 / (self.degree * self.mesh.n_elements) as f64
    }

    /// Dof indices of the local shape functions on element `e`; `None` marks
    /// an eliminated boundary node.
    pub fn element_dofs(&self, e: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        let last = self.degree * self.mesh.n_elements;
        (0..=self.degree).map(move |a| {
            let node = self.degree * e + a;
            (node != 0 && node != last).then(|| node - 1)
        })
    }

    /// Elements on which the basis function of dof `i` is supported.
    pub fn support(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        let node = i + 1;
        let p = self.degree;
        if node % p == 0 {
            // element vertex
            let v = node / p;
            (v - 1)..=v.min(self.mesh.n_elements - 1)
        } else {
            let e = node / p;
            e..=e
        }
    }

    /// Element index containing `x` and the local coordinate `t` in [0, 1].
    /// Points on an element boundary belong to the element on their left,
    /// except `x = 0`, which belongs to the first element.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        let n = self.mesh.n_elements;
        let s = x * n as f64;
        let e = (s.ceil() as usize).saturating_sub(1).min(n - 1);
        Ok((e, (s - e as f64).clamp(0.0, 1.0)))
    }

    /// Nonzero basis values (`derivative_order = 0`) or derivatives
    /// (`derivative_order = 1`) at `x`, as `(dof, value)` pairs.
    pub fn basis_at(&self, x: f64, derivative_order: usize) -> Result<Vec<(usize, f64)>> {
        let (e, t) = self.locate(x)?;
        let shapes = shape_coeffs(self.degree);
        let scale = 1.0 / self.mesh.h;
        let mut out = Vec::with_capacity(self.degree + 1);
        for (a, dof) in self.element_dofs(e).enumerate() {
            if let Some(i) = dof {
                let v = match derivative_order {
                    0 => poly(&shapes[a], t),
                    1 => poly_dt(&shapes[a], t) * scale,
                    d => {
                        return Err(Error::InvalidParameter(format!(
                            "derivative order {d} not supported"
                        )))
                    }
                };
                out.push((i, v));
            }
        }
        Ok(out)
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        DVector::from_fn(self.n_dofs, |i, _| f(self.dof_coordinate(i)))
    }
}

fn assembly_rule(p: usize) -> GaussLegendre {
    GaussLegendre::new((2 * p + 1).div_ceil(2) + 1)
}

/// Element matrix `weight_mass * ∫ N_a N_b + weight_grad * ∫ N_a' N_b'`
/// assembled over all elements.
fn assemble(fe: &FeSpace, mass_weight: f64, grad_weight: f64) -> SymMatrix {
    let n = fe.n_dofs;
    let p = fe.degree;
    let h = fe.mesh.h;
    let rule = assembly_rule(p);
    let shapes = shape_coeffs(p);
    let nloc = p + 1;

    let mut local = [[0.0; 3]; 3];
    for a in 0..nloc {
        for b in 0..nloc {
            let mut m = 0.0;
            let mut k = 0.0;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                m += w * poly(&shapes[a], t) * poly(&shapes[b], t);
                k += w * poly_dt(&shapes[a], t) * poly_dt(&shapes[b], t);
            }
            local[a][b] = mass_weight * m * h + grad_weight * k / h;
        }
    }

    let mut data = DMatrix::zeros(n, n);
    for e in 0..fe.mesh.n_elements {
        let dofs: Vec<Option<usize>> = fe.element_dofs(e).collect();
        for (a, da) in dofs.iter().enumerate() {
            let Some(i) = *da else { continue };
            for (b, db) in dofs.iter().enumerate() {
                let Some(j) = *db else { continue };
                data[(i, j)] += local[a][b];
            }
        }
    }
    SymMatrix::from_parts(data, p)
}

/// Gramian `M_ij = (φ_i, φ_j)`.
pub fn assemble_mass(fe: &FeSpace) -> SymMatrix {
    assemble(fe, 1.0, 0.0)
}

/// Galerkin matrix of `-u'' + κ² u`: `L = K + κ² M`.
pub fn assemble_stiffness(fe: &FeSpace, kappa: f64) -> SymMatrix {
    assemble(fe, kappa * kappa, 1.0)
}

/// Value (or first derivative) of `Σ c_j φ_j` at `x`.
pub fn eval_fe(fe: &FeSpace, coeffs: &[f64], x: f64, derivative_order: usize) -> Result<f64> {
    if coeffs.len() != fe.n_dofs {
        return Err(Error::DimensionMismatch {
            expected: fe.n_dofs,
            found: coeffs.len(),
        });
    }
    Ok(fe
        .basis_at(x, derivative_order)?
        .into_iter()
        .map(|(i, v)| coeffs[i] * v)
        .sum())
}

/// Moments `C_m = ∫_0^1 t^m cos(θt) dt` and `S_m = ∫_0^1 t^m sin(θt) dt`
/// for `m = 0, 1, 2`.
pub(crate) fn trig_moments(theta: f64) -> ([f64; 3], [f64; 3]) {
    let mut c = [0.0; 3];
    let mut s = [0.0; 3];
    if theta.abs() < 2.0 {
        // Taylor series; alternating with shrinking terms for |θ| < 2.
        let th2 = theta * theta;
        for m in 0..3 {
            let mf = m as f64;
            let mut term_c = 1.0; // θ^{2n} / (2n)!
            let mut term_s = theta; // θ^{2n+1} / (2n+1)!
            let mut sc = 0.0;
            let mut ss = 0.0;
            for n in 0..30 {
                let nf = n as f64;
                sc += term_c / (2.0 * nf + mf + 1.0);
                ss += term_s / (2.0 * nf + mf + 2.0);
                term_c *= -th2 / ((2.0 * nf + 1.0) * (2.0 * nf + 2.0));
                term_s *= -th2 / ((2.0 * nf + 2.0) * (2.0 * nf + 3.0));
                if term_c.abs() < 1e-18 * sc.abs().max(1e-300) && term_s.abs() < 1e-18 {
                    break;
                }
            }
            c[m] = sc;
            s[m] = ss;
        }
    } else {
        let (sn, cs) = theta.sin_cos();
        c[0] = sn / theta;
        s[0] = (1.0 - cs) / theta;
        for m in 1..3 {
            let mf = m as f64;
            c[m] = sn / theta - mf / theta * s[m - 1];
            s[m] = -cs / theta + mf / theta * c[m - 1];
        }
    }
    (c, s)
}

/// `sin(jπ e / n)` and `cos(jπ e / n)` with exact integer range reduction.
fn sin_cos_at_vertex(j: usize, e: usize, n: usize) -> (f64, f64) {
    let r = (j as u128 * e as u128 % (2 * n as u128)) as f64;
    (PI * r / n as f64).sin_cos()
}

/// Entries `∫ φ_i(x) √2 sin(jπx) dx` (or, with `derivative`,
/// `∫ φ_i'(x) √2 jπ cos(jπx) dx`) for all dofs, in closed form.
pub fn sine_inner_products(fe: &FeSpace, j: usize, derivative: bool) -> DVector<f64> {
    let mut out = DVector::zeros(fe.n_dofs);
    add_sine_inner_products(fe, j, derivative, 1.0, out.as_mut_slice());
    out
}

/// Accumulates `weight *` [`sine_inner_products`] into `out`.
pub(crate) fn add_sine_inner_products(
    fe: &FeSpace,
    j: usize,
    derivative: bool,
    weight: f64,
    out: &mut [f64],
) {
    assert!(j >= 1, "sine modes are indexed from 1");
    let n = fe.mesh.n_elements;
    let h = fe.mesh.h;
    let omega = j as f64 * PI;
    let theta = omega * h;
    let (cm, sm) = trig_moments(theta);
    let shapes = shape_coeffs(fe.degree);

    // Per local shape function: coefficients multiplying sin(ωa) and cos(ωa).
    let mut coef_sin = [0.0; 3];
    let mut coef_cos = [0.0; 3];
    for (a, c) in shapes.iter().enumerate() {
        if derivative {
            // ∫_0^1 N_a'(t) cos(ωa + θt) dt
            let d = [c[1], 2.0 * c[2]];
            let cc = d[0] * cm[0] + d[1] * cm[1];
            let ss = d[0] * sm[0] + d[1] * sm[1];
            coef_cos[a] = SQRT_2 * omega * cc;
            coef_sin[a] = -SQRT_2 * omega * ss;
        } else {
            // h ∫_0^1 N_a(t) sin(ωa + θt) dt
            let cc = c[0] * cm[0] + c[1] * cm[1] + c[2] * cm[2];
            let ss = c[0] * sm[0] + c[1] * sm[1] + c[2] * sm[2];
            coef_sin[a] = SQRT_2 * h * cc;
            coef_cos[a] = SQRT_2 * h * ss;
        }
    }

    for e in 0..n {
        let (sa, ca) = sin_cos_at_vertex(j, e, n);
        for (a, dof) in fe.element_dofs(e).enumerate() {
            if let Some(i) = dof {
                out[i] += weight * (coef_sin[a] * sa + coef_cos[a] * ca);
            }
        }
    }
}
