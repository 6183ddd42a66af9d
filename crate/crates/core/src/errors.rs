//! Error functionals comparing sinc-Galerkin fields and covariances with the
//! truncated Karhunen–Loève reference.
//!
//! Field errors in `L2` and the gradient seminorm are evaluated exactly via
//! the Gram expansion `‖u - v‖² = ‖u‖² - 2(u, v) + ‖v‖²`: the finite element
//! part uses the mass (or Laplacian stiffness) matrix, the cross term uses the
//! closed-form sine inner products, and the reference part is a Parseval sum.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem1d::{
    add_sine_inner_products, assemble_mass, assemble_stiffness, build_mesh, make_fespace,
    sine_inner_products, FeSpace, SymMatrix,
};
use crate::linalg::BandCholesky;
use crate::fracop::{exact_discrete_frac, CovarianceMatrix, FieldSample};
use crate::spectral::{solve_discrete_eigs, ContinuousSpectrum};

/// Equidistant evaluation grid `x_j = j / (n - 1)`, `j = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    nodes: Vec<f64>,
}

impl EvalGrid {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::InvalidParameter(format!(
                "evaluation grid needs at least 2 nodes, got {n_nodes}"
            )));
        }
        let d = (n_nodes - 1) as f64;
        Ok(Self {
            nodes: (0..n_nodes).map(|j| j as f64 / d).collect(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trapezoid weights: `1/(n-1)`, halved at the endpoints.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let w = 1.0 / (n - 1) as f64;
        (0..n)
            .map(|j| if j == 0 || j == n - 1 { 0.5 * w } else { w })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormTag {
    L2,
    H1Semi,
    Linf,
    CovL2,
    CovLinf,
}

impl NormTag {
    pub const ALL: [NormTag; 5] = [
        NormTag::L2,
        NormTag::H1Semi,
        NormTag::Linf,
        NormTag::CovL2,
        NormTag::CovLinf,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NormTag::L2 => "L2",
            NormTag::H1Semi => "H1semi",
            NormTag::Linf => "Linf",
            NormTag::CovL2 => "CovL2",
            NormTag::CovLinf => "CovLinf",
        }
    }

    pub fn is_covariance(&self) -> bool {
        matches!(self, NormTag::CovL2 | NormTag::CovLinf)
    }
}

impl fmt::Display for NormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown norm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorValue {
    pub norm: NormTag,
    pub value: f64,
    pub level: u32,
    pub beta: f64,
    pub p: usize,
}

/// Truncated KL reference field `Σ_j ξ_j λ_j^{-β} e_j`.
#[derive(Debug, Clone, Copy)]
pub struct KlReference<'a> {
    pub spectrum: &'a ContinuousSpectrum,
    pub beta: f64,
    pub xi: &'a [f64],
}

impl KlReference<'_> {
    /// Series coefficients `ξ_j λ_j^{-β}`.
    pub fn coefficients(&self) -> Result<DVector<f64>> {
        if self.xi.len() != self.spectrum.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.spectrum.n_modes(),
                found: self.xi.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.xi.len(),
            self.xi
                .iter()
                .zip(self.spectrum.lambdas())
                .map(|(&z, &lam)| z * lam.powf(-self.beta)),
        ))
    }
}

/// Point evaluation of finite element functions on an [`EvalGrid`].
#[derive(Debug, Clone)]
pub struct GridBasis {
    n_dofs: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl GridBasis {
    pub fn new(fe: &FeSpace, grid: &EvalGrid) -> Result<Self> {
        let rows = grid
            .nodes()
            .iter()
            .map(|&x| fe.basis_at(x, 0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_dofs: fe.n_dofs(),
            rows,
        })
    }

    pub fn eval(&self, coeffs: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(i, v)| coeffs[i] * v).sum())
            .collect()
    }

    /// `Φ A Φ^T` for a coefficient-space matrix `A`.
    fn sandwich(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.rows.len();
        // T = A Φ^T, column j holds A φ(x_j)
        let mut t = DMatrix::zeros(self.n_dofs, n);
        for (j, row) in self.rows.iter().enumerate() {
            let mut col = t.column_mut(j);
            for &(k, v) in row {
                col.axpy(v, &a.column(k), 1.0);
            }
        }
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let tj = t.column(j);
            for (i, row) in self.rows.iter().enumerate() {
                out[(i, j)] = row.iter().map(|&(k, v)| v * tj[k]).sum();
            }
        }
        out
    }
}

/// Sine modes `√2 sin(jπx)` tabulated on a grid, `j = 1..=n_modes`.
#[derive(Debug, Clone)]
pub struct SineTable {
    grid: EvalGrid,
    values: DMatrix<f64>,
}

impl SineTable {
    pub fn new(grid: EvalGrid, n_modes: usize) -> Self {
        let values = DMatrix::from_fn(grid.len(), n_modes, |i, j| {
            ContinuousSpectrum::eigenfunction(j + 1, grid.nodes[i])
        });
        Self { grid, values }
    }

    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.values.ncols()
    }

    /// Values of `Σ_j c_j e_j` at the grid nodes.
    pub fn eval(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.values * coeffs
    }
}

/// Matrices reused by every field error evaluated in one finite element
/// space.
#[derive(Debug, Clone)]
pub struct FieldErrorContext {
    fe: FeSpace,
    mass: SymMatrix,
    mass_chol: BandCholesky,
    laplacian: SymMatrix,
    laplacian_chol: BandCholesky,
    // column j-1 holds (φ_i, e_j)
    sine: DMatrix<f64>,
    // column j-1 holds (φ_i', e_j')
    sine_grad: DMatrix<f64>,
    grid_basis: Option<GridBasis>,
}

impl FieldErrorContext {
    pub fn new(fe: &FeSpace, n_modes: usize, grid: Option<&EvalGrid>) -> Result<Self> {
        let n = fe.n_dofs();
        let mut sine = DMatrix::zeros(n, n_modes);
        let mut sine_grad = DMatrix::zeros(n, n_modes);
        for j in 1..=n_modes {
            add_sine_inner_products(fe, j, false, 1.0, sine.column_mut(j - 1).as_mut_slice());
            add_sine_inner_products(fe, j, true, 1.0, sine_grad.column_mut(j - 1).as_mut_slice());
        }
        let mass = assemble_mass(fe);
        let laplacian = assemble_stiffness(fe, 0.0);
        Ok(Self {
            fe: fe.clone(),
            mass_chol: mass.cholesky()?,
            laplacian_chol: laplacian.cholesky()?,
            mass,
            laplacian,
            sine,
            sine_grad,
            grid_basis: grid.map(|g| GridBasis::new(fe, g)).transpose()?,
        })
    }

    pub fn fe(&self) -> &FeSpace {
        &self.fe
    }

    fn check(&self, sample: &FieldSample, reference: &KlReference) -> Result<()> {
        if sample.xi.as_slice() != reference.xi || sample.beta != reference.beta {
            return Err(Error::NoiseMismatch);
        }
        if sample.coeffs.len() != self.fe.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.fe.n_dofs(),
                found: sample.coeffs.len(),
            });
        }
        if reference.spectrum.n_modes() != self.sine.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.sine.ncols(),
                found: reference.spectrum.n_modes(),
            });
        }
        Ok(())
    }

    fn value(&self, norm: NormTag, value: f64, beta: f64) -> Result<ErrorValue> {
        if !value.is_finite() {
            return Err(Error::NonFinite("error value"));
        }
        Ok(ErrorValue {
            norm,
            value,
            level: self.fe.mesh().level(),
            beta,
            p: self.fe.degree(),
        })
    }
}

// Splits off the Galerkin projection `P a` of the reference:
// ‖c - a‖² = ‖c - P a‖² + (‖a‖² - ‖P a‖²). The first term carries no
// cancellation; the second is formed mode by mode as a^T (w a - S^T P a).
fn gram_distance(
    c: &DVector<f64>,
    gram: &SymMatrix,
    chol: &BandCholesky,
    cross: &DMatrix<f64>,
    a: &DVector<f64>,
    mode_weight: impl Fn(usize) -> f64,
) -> f64 {
    let proj = chol.solve(&(cross * a));
    let d = c - &proj;
    let fe_part = d.dot(&gram.mul_vec(&d));
    let back = cross.transpose() * &proj;
    let tail: f64 = a
        .iter()
        .zip(back.iter())
        .enumerate()
        .map(|(i, (&x, &b))| x * (x * mode_weight(i + 1) - b))
        .sum();
    (fe_part + tail.max(0.0)).sqrt()
}

/// `‖Z_h - Z_ref‖_{L2(0,1)}`.
pub fn field_error_l2(
    ctx: &FieldErrorContext,
    sample: &FieldSample,
    reference: &KlReference,
) -> Result<ErrorValue> {
    ctx.check(sample, reference)?;
    let a = reference.coefficients()?;
    let v = gram_distance(&sample.coeffs, &ctx.mass, &ctx.mass_chol, &ctx.sine, &a, |_| 1.0);
    ctx.value(NormTag::L2, v, reference.beta)
}

/// `‖(Z_h - Z_ref)'‖_{L2(0,1)}`.
pub fn field_error_h1(
    ctx: &FieldErrorContext,
    sample: &FieldSample,
    reference: &KlReference,
) -> Result<ErrorValue> {
    ctx.check(sample, reference)?;
    let a = reference.coefficients()?;
    let v = gram_distance(&sample.coeffs, &ctx.laplacian, &ctx.laplacian_chol, &ctx.sine_grad, &a, |j| {
        let w = j as f64 * std::f64::consts::PI;
        w * w
    });
    ctx.value(NormTag::H1Semi, v, reference.beta)
}

/// `max_j |Z_h(x_j) - Z_ref(x_j)|` over the nodes of `table`'s grid.
pub fn field_error_sup(
    ctx: &FieldErrorContext,
    sample: &FieldSample,
    reference: &KlReference,
    table: &SineTable,
) -> Result<ErrorValue> {
    ctx.check(sample, reference)?;
    let owned;
    let basis = match &ctx.grid_basis {
        Some(b) if b.rows.len() == table.grid.len() => b,
        _ => {
            owned = GridBasis::new(&ctx.fe, &table.grid)?;
            &owned
        }
    };
    let a = reference.coefficients()?;
    if table.n_modes() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: table.n_modes(),
        });
    }
    let zh = basis.eval(sample.coeffs.as_slice());
    let zr = table.eval(&a);
    let v = zh
        .iter()
        .zip(zr.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ctx.value(NormTag::Linf, v, reference.beta)
}

/// Covariance function tabulated on the lattice `grid × grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceLattice {
    values: DMatrix<f64>,
}

impl CovarianceLattice {
    /// `ρ_h(x_i, x_j) = φ(x_i)^T Cov φ(x_j)`.
    pub fn from_fe(cov: &CovarianceMatrix, fe: &FeSpace, grid: &EvalGrid) -> Result<Self> {
        if cov.order() != fe.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: fe.n_dofs(),
                found: cov.order(),
            });
        }
        let basis = GridBasis::new(fe, grid)?;
        Ok(Self::symmetric(basis.sandwich(cov.as_dense())))
    }

    /// `Σ_j λ_j^{-2β} e_j(x_i) e_j(x_k)` over the modes of `table`.
    pub fn reference(spectrum: &ContinuousSpectrum, beta: f64, table: &SineTable) -> Result<Self> {
        if table.n_modes() > spectrum.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.n_modes(),
                found: table.n_modes(),
            });
        }
        let mut scaled = table.values.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= spectrum.lambdas()[j].powf(-beta);
        }
        Ok(Self::symmetric(&scaled * scaled.transpose()))
    }

    pub fn from_values(values: DMatrix<f64>) -> Self {
        Self::symmetric(values)
    }

    fn symmetric(mut values: DMatrix<f64>) -> Self {
        crate::linalg::symmetrize(&mut values);
        Self { values }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn transposed(&self) -> Self {
        Self {
            values: self.values.transpose(),
        }
    }
}

/// Trapezoid-weighted `L2(D×D)` distance between two lattices.
pub fn lattice_l2_distance(a: &CovarianceLattice, b: &CovarianceLattice, grid: &EvalGrid) -> f64 {
    let w = grid.trapezoid_weights();
    let n = w.len();
    assert_eq!(a.values.nrows(), n);
    assert_eq!(b.values.nrows(), n);
    // sum over the lower triangle; both lattices are exactly symmetric
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..n {
        let d = a.values[(j, j)] - b.values[(j, j)];
        diag += d * d * w[j] * w[j];
        let mut col = 0.0;
        for i in (j + 1)..n {
            let d = a.values[(i, j)] - b.values[(i, j)];
            col += d * d * w[i];
        }
        off += col * w[j];
    }
    (diag + 2.0 * off).sqrt()
}

/// Maximum absolute difference over the lattice.
pub fn lattice_sup_distance(a: &CovarianceLattice, b: &CovarianceLattice) -> f64 {
    (&a.values - &b.values).amax()
}

/// `L2(D×D)` error of the sinc-Galerkin covariance function against the
/// truncated KL covariance.
pub fn cov_error_l2(
    cov: &CovarianceMatrix,
    fe: &FeSpace,
    spectrum: &ContinuousSpectrum,
    beta: f64,
    grid: &EvalGrid,
) -> Result<ErrorValue> {
    let table = SineTable::new(grid.clone(), spectrum.n_modes());
    let approx = CovarianceLattice::from_fe(cov, fe, grid)?;
    let reference = CovarianceLattice::reference(spectrum, beta, &table)?;
    Ok(ErrorValue {
        norm: NormTag::CovL2,
        value: lattice_l2_distance(&approx, &reference, grid),
        level: fe.mesh().level(),
        beta,
        p: fe.degree(),
    })
}

/// Lattice sup error of the sinc-Galerkin covariance function.
pub fn cov_error_sup(
    cov: &CovarianceMatrix,
    fe: &FeSpace,
    spectrum: &ContinuousSpectrum,
    beta: f64,
    grid: &EvalGrid,
) -> Result<ErrorValue> {
    let table = SineTable::new(grid.clone(), spectrum.n_modes());
    let approx = CovarianceLattice::from_fe(cov, fe, grid)?;
    let reference = CovarianceLattice::reference(spectrum, beta, &table)?;
    Ok(ErrorValue {
        norm: NormTag::CovLinf,
        value: lattice_sup_distance(&approx, &reference),
        level: fe.mesh().level(),
        beta,
        p: fe.degree(),
    })
}

/// Error of the deterministic fractional Galerkin solution on one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub level: u32,
    pub h: f64,
    pub error: f64,
}

/// Parameters of [`deterministic_frac_error`].
#[derive(Debug, Clone, PartialEq)]
pub struct FracProblem {
    pub kappa: f64,
    pub beta: f64,
    /// 0 for `L2`, 1 for the gradient seminorm.
    pub sigma: u32,
    /// Sine coefficients `g_j` of the data, `j = 1..`.
    pub g: Vec<f64>,
    pub n0: usize,
    pub p: usize,
}

/// `‖L^{-β} g - L_h^{-β} Π_h g‖` per level, where `Π_h` is the `L2`
/// projection and `L_h^{-β}` is evaluated spectrally.
pub fn deterministic_frac_error(problem: &FracProblem, levels: &[u32]) -> Result<Vec<LevelError>> {
    if problem.sigma > 1 {
        return Err(Error::InvalidParameter(format!(
            "sigma must be 0 or 1, got {}",
            problem.sigma
        )));
    }
    let n_modes = problem.g.len().max(1);
    let spectrum = crate::spectral::continuous_spectrum(problem.kappa, n_modes)?;
    let a: Vec<f64> = problem
        .g
        .iter()
        .zip(spectrum.lambdas())
        .map(|(&g, &lam)| g * lam.powf(-problem.beta))
        .collect();

    levels
        .iter()
        .map(|&level| {
            let fe = make_fespace(build_mesh(problem.n0, level)?, problem.p)?;
            let m = assemble_mass(&fe);
            let l = assemble_stiffness(&fe, problem.kappa);
            let basis = solve_discrete_eigs(&l, &m)?;

            let mut load = DVector::zeros(fe.n_dofs());
            for (j, &g) in problem.g.iter().enumerate() {
                if g != 0.0 {
                    add_sine_inner_products(&fe, j + 1, false, g, load.as_mut_slice());
                }
            }
            let projection = m.cholesky()?.solve(&load);
            let u = exact_discrete_frac(&basis, &m, problem.beta, &projection);

            let derivative = problem.sigma == 1;
            let gram = if derivative {
                assemble_stiffness(&fe, 0.0)
            } else {
                m
            };
            let mut err2 = u.dot(&gram.mul_vec(&u));
            for (j, &aj) in a.iter().enumerate() {
                if aj == 0.0 {
                    continue;
                }
                let s = sine_inner_products(&fe, j + 1, derivative);
                let w = if derivative {
                    ((j + 1) as f64 * std::f64::consts::PI).powi(2)
                } else {
                    1.0
                };
                err2 += aj * aj * w - 2.0 * aj * u.dot(&s);
            }
            Ok(LevelError {
                level,
                h: fe.h(),
                error: err2.max(0.0).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem1d::{build_mesh, make_fespace};
    use crate::spectral::continuous_spectrum;
    use std::f64::consts::PI;

    fn sample_with(coeffs: DVector<f64>, xi: Vec<f64>, beta: f64) -> FieldSample {
        FieldSample {
            coeffs,
            xi,
            beta,
            k: None,
            level: 0,
            p: 1,
            seed: 0,
        }
    }

    #[test]
    fn grid_nodes_and_weights() {
        let g = EvalGrid::new(1001).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[1000], 1.0);
        assert!((g.nodes()[1] - 1e-3).abs() < 1e-18);
        let w: f64 = g.trapezoid_weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!(EvalGrid::new(1).is_err());
    }

    #[test]
    fn norm_tags_parse() {
        for t in NormTag::ALL {
            assert_eq!(t.as_str().parse::<NormTag>().unwrap(), t);
        }
        assert_eq!("h1SEMI".parse::<NormTag>().unwrap(), NormTag::H1Semi);
        assert!("H2".parse::<NormTag>().is_err());
    }

    #[test]
    fn zero_inputs_give_zero() {
        let fe = make_fespace(build_mesh(9, 1).unwrap(), 1).unwrap();
        let spec = continuous_spectrum(0.5, 50).unwrap();
        let grid = EvalGrid::new(101).unwrap();
        let table = SineTable::new(grid.clone(), 50);
        let ctx = FieldErrorContext::new(&fe, 50, Some(&grid)).unwrap();
        let xi = vec![0.0; 50];
        let s = sample_with(DVector::zeros(fe.n_dofs()), xi.clone(), 1.0);
        let r = KlReference {
            spectrum: &spec,
            beta: 1.0,
            xi: &xi,
        };
        assert_eq!(field_error_l2(&ctx, &s, &r).unwrap().value, 0.0);
        assert_eq!(field_error_h1(&ctx, &s, &r).unwrap().value, 0.0);
        assert_eq!(field_error_sup(&ctx, &s, &r, &table).unwrap().value, 0.0);
    }

    #[test]
    fn single_mode_h1_value() {
        let fe = make_fespace(build_mesh(9, 1).unwrap(), 1).unwrap();
        let spec = continuous_spectrum(0.5, 20).unwrap();
        let ctx = FieldErrorContext::new(&fe, 20, None).unwrap();
        let mut xi = vec![0.0; 20];
        xi[0] = 1.0;
        let s = sample_with(DVector::zeros(fe.n_dofs()), xi.clone(), 1.0);
        let r = KlReference {
            spectrum: &spec,
            beta: 1.0,
            xi: &xi,
        };
        let v = field_error_h1(&ctx, &s, &r).unwrap().value;
        assert!((v - PI / (PI * PI + 0.25)).abs() < 1e-14);
        assert!((v - 0.31043).abs() < 3e-5);
        let v = field_error_l2(&ctx, &s, &r).unwrap().value;
        assert!((v - 1.0 / (PI * PI + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn projection_pythagoras() {
        let fe = make_fespace(build_mesh(9, 1).unwrap(), 2).unwrap();
        let n_modes = 40;
        let spec = continuous_spectrum(0.5, n_modes).unwrap();
        let ctx = FieldErrorContext::new(&fe, n_modes, None).unwrap();
        let xi: Vec<f64> = (0..n_modes).map(|i| ((i * 7919) % 13) as f64 / 6.0 - 1.0).collect();
        let r = KlReference {
            spectrum: &spec,
            beta: 0.8,
            xi: &xi,
        };
        let a = r.coefficients().unwrap();
        let load = &ctx.sine * &a;
        let m = assemble_mass(&fe);
        let c = m.cholesky().unwrap().solve(&load);
        let s = sample_with(c.clone(), xi.clone(), 0.8);
        let err = field_error_l2(&ctx, &s, &r).unwrap().value;
        let ref_norm2 = a.norm_squared();
        let proj_norm2 = c.dot(&m.mul_vec(&c));
        assert!((err * err - (ref_norm2 - proj_norm2)).abs() < 1e-14);
    }

    #[test]
    fn noise_mismatch_detected() {
        let fe = make_fespace(build_mesh(9, 0).unwrap(), 1).unwrap();
        let spec = continuous_spectrum(0.5, 10).unwrap();
        let ctx = FieldErrorContext::new(&fe, 10, None).unwrap();
        let xi = vec![1.0; 10];
        let other = vec![0.5; 10];
        let s = sample_with(DVector::zeros(fe.n_dofs()), xi, 1.0);
        let r = KlReference {
            spectrum: &spec,
            beta: 1.0,
            xi: &other,
        };
        assert_eq!(field_error_l2(&ctx, &s, &r), Err(Error::NoiseMismatch));
    }

    #[test]
    fn sup_error_monotone_under_grid_refinement() {
        let fe = make_fespace(build_mesh(9, 0).unwrap(), 1).unwrap();
        let spec = continuous_spectrum(0.5, 30).unwrap();
        let ctx = FieldErrorContext::new(&fe, 30, None).unwrap();
        let xi: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).sin()).collect();
        let c = DVector::from_fn(fe.n_dofs(), |i, _| 0.05 * (i as f64).cos());
        let s = sample_with(c, xi.clone(), 0.7);
        let r = KlReference {
            spectrum: &spec,
            beta: 0.7,
            xi: &xi,
        };
        let coarse = SineTable::new(EvalGrid::new(1001).unwrap(), 30);
        let fine = SineTable::new(EvalGrid::new(2001).unwrap(), 30);
        let a = field_error_sup(&ctx, &s, &r, &coarse).unwrap().value;
        let b = field_error_sup(&ctx, &s, &r, &fine).unwrap().value;
        assert!(b >= a);
    }

    #[test]
    fn lattice_reference_matches_pointwise_series() {
        let spec = continuous_spectrum(0.5, 200).unwrap();
        let grid = EvalGrid::new(11).unwrap();
        let table = SineTable::new(grid.clone(), 200);
        let lat = CovarianceLattice::reference(&spec, 0.8, &table).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                let want = crate::spectral::kl_covariance(&spec, 0.8, grid.nodes()[i], grid.nodes()[j]);
                assert!((lat.values()[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identical_lattices_have_zero_distance_and_swap_symmetry() {
        let spec = continuous_spectrum(0.5, 100).unwrap();
        let grid = EvalGrid::new(51).unwrap();
        let table = SineTable::new(grid.clone(), 100);
        let a = CovarianceLattice::reference(&spec, 0.6, &table).unwrap();
        assert_eq!(lattice_l2_distance(&a, &a, &grid), 0.0);
        assert_eq!(lattice_sup_distance(&a, &a), 0.0);
        let b = CovarianceLattice::reference(&spec, 0.9, &table).unwrap();
        let d = lattice_l2_distance(&a, &b, &grid);
        let dt = lattice_l2_distance(&a.transposed(), &b.transposed(), &grid);
        assert_eq!(d.to_bits(), dt.to_bits());
        assert_eq!(
            lattice_sup_distance(&a, &b).to_bits(),
            lattice_sup_distance(&a.transposed(), &b.transposed()).to_bits()
        );
    }

    #[test]
    fn deterministic_zero_data() {
        let problem = FracProblem {
            kappa: 0.5,
            beta: 0.7,
            sigma: 0,
            g: vec![0.0; 3],
            n0: 9,
            p: 1,
        };
        for e in deterministic_frac_error(&problem, &[0, 1]).unwrap() {
            assert_eq!(e.error, 0.0);
        }
        let bad = FracProblem { sigma: 2, ..problem };
        assert!(deterministic_frac_error(&bad, &[0]).is_err());
    }
}
