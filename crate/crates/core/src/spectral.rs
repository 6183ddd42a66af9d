//! Eigenpairs of `L = -d²/dx² + κ²` on (0, 1) with Dirichlet conditions,
//! their finite element counterparts, and the truncated Karhunen–Loève
//! reference field and covariance.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem1d::{sine_inner_products, FeSpace, SymMatrix};
use crate::linalg::generalized_symmetric_eigen;

/// Minimum `|<e_j, e_{j,h}>|` for which a discrete mode's sign is trusted.
pub const SIGN_OVERLAP_MIN: f64 = 1e-3;

/// `λ_j = j²π² + κ²`, `e_j(x) = √2 sin(jπx)` for `j = 1..=n_modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSpectrum {
    kappa: f64,
    lambdas: Vec<f64>,
}

pub fn continuous_spectrum(kappa: f64, n_modes: usize) -> Result<ContinuousSpectrum> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be at least 1".into()));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa = {kappa}")));
    }
    let lambdas = (1..=n_modes)
        .map(|j| {
            let w = j as f64 * PI;
            w * w + kappa * kappa
        })
        .collect();
    Ok(ContinuousSpectrum { kappa, lambdas })
}

impl ContinuousSpectrum {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// All eigenvalues; index 0 is `λ_1`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `λ_j` (1-based).
    pub fn lambda(&self, j: usize) -> f64 {
        self.lambdas[j - 1]
    }

    /// `e_j(x) = √2 sin(jπx)`.
    pub fn eigenfunction(j: usize, x: f64) -> f64 {
        SQRT_2 * (j as f64 * PI * x).sin()
    }

    /// `e_j'(x) = √2 jπ cos(jπx)`.
    pub fn eigenfunction_derivative(j: usize, x: f64) -> f64 {
        let w = j as f64 * PI;
        SQRT_2 * w * (w * x).cos()
    }
}

/// Generalized eigenpairs of the Galerkin pencil `(L, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEigenbasis {
    lambdas: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl DiscreteEigenbasis {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Nondecreasing discrete eigenvalues; index 0 is `λ_{1,h}`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Coefficient vectors as columns, `M`-orthonormal.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Coefficient vector of mode `j` (1-based).
    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j - 1).into_owned()
    }

    /// Negates mode `j` (1-based).
    pub fn flip_sign(&mut self, j: usize) {
        let mut col = self.vectors.column_mut(j - 1);
        col.neg_mut();
    }
}

/// Full spectrum of `(L, M)` by Cholesky reduction and a dense symmetric
/// eigensolver.
pub fn solve_discrete_eigs(l: &SymMatrix, m: &SymMatrix) -> Result<DiscreteEigenbasis> {
    let (lambdas, vectors) = generalized_symmetric_eigen(l, m)?;
    Ok(DiscreteEigenbasis { lambdas, vectors })
}

/// `<e_j, e_{j,h}>_{L2}` for every discrete mode.
pub fn mode_overlaps(basis: &DiscreteEigenbasis, fe: &FeSpace) -> Vec<f64> {
    (1..=basis.len())
        .map(|j| sine_inner_products(fe, j, false).dot(&basis.vectors.column(j - 1)))
        .collect()
}

/// Flips each discrete mode so that it has positive `L2` overlap with the
/// continuous eigenfunction of the same index.
pub fn align_signs(mut basis: DiscreteEigenbasis, fe: &FeSpace) -> Result<DiscreteEigenbasis> {
    if fe.n_dofs() != basis.vectors.nrows() {
        return Err(Error::DimensionMismatch {
            expected: fe.n_dofs(),
            found: basis.vectors.nrows(),
        });
    }
    for (idx, overlap) in mode_overlaps(&basis, fe).into_iter().enumerate() {
        if overlap.abs() < SIGN_OVERLAP_MIN {
            return Err(Error::AmbiguousSign {
                mode: idx + 1,
                overlap,
            });
        }
        if overlap < 0.0 {
            basis.flip_sign(idx + 1);
        }
    }
    Ok(basis)
}

/// `R_ij = (φ_i, e_{j,h})`, i.e. `R = M E`.
pub fn assemble_r(m: &SymMatrix, basis: &DiscreteEigenbasis) -> DMatrix<f64> {
    m.mul_mat(&basis.vectors)
}

/// `Σ_j ξ_j λ_j^{-β} e_j(x)` over the first `xi.len()` modes.
pub fn kl_field(spectrum: &ContinuousSpectrum, beta: f64, xi: &[f64], x: f64) -> Result<f64> {
    if xi.len() != spectrum.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.n_modes(),
            found: xi.len(),
        });
    }
    Ok(xi
        .iter()
        .zip(&spectrum.lambdas)
        .enumerate()
        .rev()
        .map(|(i, (&z, &lam))| z * lam.powf(-beta) * ContinuousSpectrum::eigenfunction(i + 1, x))
        .sum())
}

/// `Σ_j λ_j^{-2β} e_j(x) e_j(y)`, summed from the highest mode down.
pub fn kl_covariance(spectrum: &ContinuousSpectrum, beta: f64, x: f64, y: f64) -> f64 {
    // e_j(x) e_j(y) computed as a symmetric product so swapping x, y is exact
    let mut acc = 0.0;
    for (i, &lam) in spectrum.lambdas.iter().enumerate().rev() {
        let j = i + 1;
        let a = ContinuousSpectrum::eigenfunction(j, x);
        let b = ContinuousSpectrum::eigenfunction(j, y);
        acc += lam.powf(-2.0 * beta) * (a * b);
    }
    acc
}

/// First `n` KL coefficients `ξ_j λ_j^{-β}` of the spectral Galerkin
/// truncation.
pub fn spectral_truncation_coeffs(
    spectrum: &ContinuousSpectrum,
    beta: f64,
    xi: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    if n > spectrum.n_modes() || n > xi.len() {
        return Err(Error::InvalidParameter(format!(
            "truncation {n} exceeds available modes {}",
            spectrum.n_modes().min(xi.len())
        )));
    }
    Ok(xi[..n]
        .iter()
        .zip(&spectrum.lambdas)
        .map(|(&z, &lam)| z * lam.powf(-beta))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem1d::{assemble_mass, assemble_stiffness, build_mesh, make_fespace};

    fn setup(n0: usize, level: u32, p: usize) -> (FeSpace, SymMatrix, SymMatrix) {
        let fe = make_fespace(build_mesh(n0, level).unwrap(), p).unwrap();
        let m = assemble_mass(&fe);
        let l = assemble_stiffness(&fe, 0.5);
        (fe, m, l)
    }

    #[test]
    fn continuous_values() {
        let s = continuous_spectrum(0.5, 1000).unwrap();
        assert_eq!(s.n_modes(), 1000);
        assert!((s.lambda(1) - (PI * PI + 0.25)).abs() < 1e-14);
        assert!((s.lambda(1) - 10.1196).abs() < 1e-4);
        let s0 = continuous_spectrum(0.0, 3).unwrap();
        assert!((s0.lambda(2) - 4.0 * PI * PI).abs() < 1e-12);
        assert!(s.lambdas().windows(2).all(|w| w[0] < w[1]));
        assert!(continuous_spectrum(0.5, 0).is_err());
    }

    #[test]
    fn scalar_pencil() {
        let a = SymMatrix::from_dense(DMatrix::from_element(1, 1, 3.0)).unwrap();
        let b = SymMatrix::from_dense(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let basis = solve_discrete_eigs(&a, &b).unwrap();
        assert!((basis.lambdas()[0] - 1.5).abs() < 1e-15);
        assert!((basis.vector(1)[0].abs() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let r = assemble_r(&b, &basis);
        assert!((r[(0, 0)].abs() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn discrete_basis_contracts() {
        for p in [1, 2] {
            let (fe, m, l) = setup(9, 2, p);
            let basis = solve_discrete_eigs(&l, &m).unwrap();
            let e = basis.vectors();
            let gram = e.transpose() * m.as_dense() * e;
            let n = fe.n_dofs();
            assert!((gram - DMatrix::identity(n, n)).amax() <= 1e-8);
            for j in 1..=n {
                let v = basis.vector(j);
                let lam = basis.lambdas()[j - 1];
                let mv = m.mul_vec(&v);
                let res = l.mul_vec(&v) - &mv * lam;
                assert!(res.norm() <= 1e-8 * lam * mv.norm(), "p={p} j={j}");
            }
            let spec = continuous_spectrum(0.5, n).unwrap();
            for (j, &lh) in basis.lambdas().iter().enumerate() {
                assert!(spec.lambdas()[j] <= lh * (1.0 + 1e-8), "min-max p={p} j={j}");
            }
        }
    }

    #[test]
    fn align_is_idempotent_and_undoes_negation() {
        let (fe, m, l) = setup(9, 2, 1);
        let basis = align_signs(solve_discrete_eigs(&l, &m).unwrap(), &fe).unwrap();
        let again = align_signs(basis.clone(), &fe).unwrap();
        assert_eq!(basis, again);
        let mut neg = basis.clone();
        for j in 1..=neg.len() {
            neg.flip_sign(j);
        }
        assert_eq!(align_signs(neg, &fe).unwrap(), basis);
        let overlaps = mode_overlaps(&basis, &fe);
        assert!(overlaps.iter().all(|&o| o > 0.0));
        assert!(overlaps[0] >= 0.99);
    }

    #[test]
    fn r_factorizes_mass() {
        for p in [1, 2] {
            let (fe, m, l) = setup(9, 1, p);
            let basis = align_signs(solve_discrete_eigs(&l, &m).unwrap(), &fe).unwrap();
            let r = assemble_r(&m, &basis);
            let d = &r * r.transpose() - m.as_dense();
            assert!(d.amax() <= 1e-8 * m.as_dense().amax());
        }
    }

    #[test]
    fn kl_field_examples() {
        let s = continuous_spectrum(0.5, 1000).unwrap();
        let mut xi = vec![0.0; 1000];
        assert_eq!(kl_field(&s, 1.0, &xi, 0.3).unwrap(), 0.0);
        xi[0] = 1.0;
        let v = kl_field(&s, 1.0, &xi, 0.5).unwrap();
        assert!((v - SQRT_2 / (PI * PI + 0.25)).abs() < 1e-15);
        assert!((v - 0.13976).abs() < 2e-5);
        assert_eq!(kl_field(&s, 1.0, &xi, 0.0).unwrap(), 0.0);
        assert!(kl_field(&s, 1.0, &xi[..5], 0.5).is_err());
    }

    #[test]
    fn kl_covariance_symmetry_and_boundary() {
        let s = continuous_spectrum(0.5, 1000).unwrap();
        for &(x, y) in &[(0.1, 0.7), (0.33, 0.5), (0.999, 0.001)] {
            assert_eq!(kl_covariance(&s, 0.8, x, y), kl_covariance(&s, 0.8, y, x));
        }
        assert_eq!(kl_covariance(&s, 0.8, 0.0, 0.4), 0.0);
    }

    #[test]
    fn kl_covariance_matches_long_direct_sum() {
        // κ = 0, β = 1, x = y = 1/2: only odd modes contribute 2 / (jπ)^4
        let s = continuous_spectrum(0.0, 1000).unwrap();
        let v = kl_covariance(&s, 1.0, 0.5, 0.5);
        let mut brute = 0.0;
        for j in (1..=100_000u64).rev() {
            if j % 2 == 1 {
                brute += 2.0 / (j as f64 * PI).powi(4);
            }
        }
        assert!((v - brute).abs() <= 1e-8);
        // closed form Σ_{j odd} j^{-4} = π⁴/96
        assert!((brute - 2.0 / 96.0).abs() < 1e-14);
    }

    #[test]
    fn truncation_coefficients() {
        let s = continuous_spectrum(0.5, 10).unwrap();
        let xi: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 3.0).collect();
        let all = spectral_truncation_coeffs(&s, 0.7, &xi, 10).unwrap();
        let head = spectral_truncation_coeffs(&s, 0.7, &xi, 4).unwrap();
        assert_eq!(&all[..4], &head[..]);
        assert!(spectral_truncation_coeffs(&s, 0.7, &xi, 11).is_err());
        // Parseval: squared L2 error of truncation is the tail sum
        let tail: f64 = all[4..].iter().map(|c| c * c).sum();
        let x_pts = 4000;
        let mut quad = 0.0;
        for k in 0..x_pts {
            let x = (k as f64 + 0.5) / x_pts as f64;
            let mut d = 0.0;
            for (i, c) in all.iter().enumerate().skip(4) {
                d += c * ContinuousSpectrum::eigenfunction(i + 1, x);
            }
            quad += d * d / x_pts as f64;
        }
        assert!((quad - tail).abs() < 1e-10);
    }
}
