//! Fractional powers of the Galerkin operator: exponent splitting, the sinc
//! quadrature `Q_k^{β★}`, the coefficient recursion for field samples, the
//! exact spectral oracle, and closed-form covariance matrices.
//!
//! All matrices act on finite element coefficient vectors. "Load" vectors
//! (such as `b = R ξ`) live in the dual space; the coloring operator maps a
//! load vector to the coefficient vector of a field sample.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem1d::SymMatrix;
use crate::linalg::BandCholesky;
use crate::spectral::DiscreteEigenbasis;

/// Fractional parts inside `(0, BAND)` or `(1 - BAND, 1)` are rejected.
pub const FRACTIONAL_BAND: f64 = 0.02;

/// `β = n_β + β★` with `n_β ∈ ℕ₀` and `β★ ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalExponent {
    pub beta: f64,
    pub n_beta: u32,
    pub beta_star: f64,
}

impl FractionalExponent {
    pub fn is_integer(&self) -> bool {
        self.beta_star == 0.0
    }
}

pub fn split_beta(beta: f64) -> Result<FractionalExponent> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    let n = beta.floor();
    Ok(FractionalExponent {
        beta,
        n_beta: n as u32,
        beta_star: beta - n,
    })
}

/// Sinc step `k = -1 / (β ln h)` matched to the mesh width.
pub fn calibrate_k(h: f64, beta: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mesh width {h} must lie in (0, 1)"
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(-1.0 / (beta * h.ln()))
}

/// Sinc quadrature rule for `λ^{-β★}` with step `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincRule {
    pub beta_star: f64,
    pub k: f64,
    pub k_minus: usize,
    pub k_plus: usize,
}

impl SincRule {
    pub fn new(beta_star: f64, k: f64) -> Result<Self> {
        if !(beta_star > 0.0 && beta_star < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sinc quadrature needs a fractional part in (0, 1), got {beta_star}"
            )));
        }
        if beta_star < FRACTIONAL_BAND || beta_star > 1.0 - FRACTIONAL_BAND {
            return Err(Error::FractionalPartRejected(beta_star));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("sinc step {k}")));
        }
        let c = PI * PI / (4.0 * k * k);
        Ok(Self {
            beta_star,
            k,
            k_minus: (c / beta_star).ceil() as usize,
            k_plus: (c / (1.0 - beta_star)).ceil() as usize,
        })
    }

    pub fn node_count(&self) -> usize {
        self.k_minus + self.k_plus + 1
    }

    /// Quadrature value for a scalar `λ > 0`; approximates `λ^{-β★}`.
    pub fn scalar(&self, lambda: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, w) in self.shifts() {
            acc += w / (a + b * lambda);
        }
        acc
    }

    /// Terms `(a, b, w)` such that the rule equals `Σ w (a M + b L)^{-1}`.
    ///
    /// For positive ℓ the shifted matrix is rescaled by `e^{-2ℓk}` so no
    /// term overflows.
    fn shifts(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let pre = 2.0 * self.k * (PI * self.beta_star).sin() / PI;
        let k = self.k;
        let bs = self.beta_star;
        (-(self.k_minus as i64)..=self.k_plus as i64).map(move |l| {
            let y = 2.0 * l as f64 * k;
            if l <= 0 {
                (1.0, y.exp(), pre * (bs * y).exp())
            } else {
                ((-y).exp(), 1.0, pre * ((bs - 1.0) * y).exp())
            }
        })
    }
}

/// `Q_k^{β★} V` for a block of load vectors `V` (columns).
pub fn apply_sinc_matrix(
    rule: &SincRule,
    m: &SymMatrix,
    l: &SymMatrix,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_pair(m, l)?;
    if v.nrows() != m.order() {
        return Err(Error::DimensionMismatch {
            expected: m.order(),
            found: v.nrows(),
        });
    }
    let mut out = DMatrix::zeros(v.nrows(), v.ncols());
    let mut work = v.clone();
    for (a, b, w) in rule.shifts() {
        let shifted = m.combine(a, l, b);
        let chol = BandCholesky::factor(&shifted)?;
        work.copy_from(v);
        chol.solve_matrix_in_place(&mut work);
        for (o, x) in out.iter_mut().zip(work.iter()) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// `(2k sin(πβ★)/π) Σ_ℓ e^{2β★ℓk} (M + e^{2ℓk} L)^{-1} v`.
pub fn apply_sinc(
    rule: &SincRule,
    m: &SymMatrix,
    l: &SymMatrix,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let block = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let out = apply_sinc_matrix(rule, m, l, &block)?;
    Ok(DVector::from_column_slice(out.as_slice()))
}

fn check_pair(m: &SymMatrix, l: &SymMatrix) -> Result<()> {
    if m.order() != l.order() {
        return Err(Error::DimensionMismatch {
            expected: m.order(),
            found: l.order(),
        });
    }
    Ok(())
}

/// Linear map from load vectors `b` to sample coefficients `Z_k^β`:
/// `L^{-1}(M L^{-1})^{n_β-1}` for integer β and `Q_k^{β★}(M L^{-1})^{n_β}`
/// otherwise.
#[derive(Debug, Clone)]
pub struct ColoringOperator<'a> {
    frac: FractionalExponent,
    rule: Option<SincRule>,
    m: &'a SymMatrix,
    l: &'a SymMatrix,
    l_chol: BandCholesky,
}

impl<'a> ColoringOperator<'a> {
    /// `rule` is required exactly when `β★ > 0`; its fractional part must
    /// match `frac`.
    pub fn new(
        frac: FractionalExponent,
        rule: Option<SincRule>,
        m: &'a SymMatrix,
        l: &'a SymMatrix,
    ) -> Result<Self> {
        check_pair(m, l)?;
        if frac.is_integer() {
            if frac.n_beta == 0 {
                return Err(Error::InvalidBeta(frac.beta));
            }
        } else {
            let r = rule.ok_or_else(|| {
                Error::InvalidParameter("fractional exponent needs a sinc rule".into())
            })?;
            if (r.beta_star - frac.beta_star).abs() > 1e-14 {
                return Err(Error::InvalidParameter(format!(
                    "sinc rule built for {} but exponent has fractional part {}",
                    r.beta_star, frac.beta_star
                )));
            }
        }
        let l_chol = l.cholesky()?;
        Ok(Self {
            frac,
            rule: if frac.is_integer() { None } else { rule },
            m,
            l,
            l_chol,
        })
    }

    pub fn order(&self) -> usize {
        self.m.order()
    }

    /// Applies the operator to each column of `b`.
    pub fn apply(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: b.nrows(),
            });
        }
        let mut x = b.clone();
        match self.rule {
            None => {
                // L^{-1} (M L^{-1})^{n-1}
                self.l_chol.solve_matrix_in_place(&mut x);
                for _ in 1..self.frac.n_beta {
                    x = self.m.mul_mat(&x);
                    self.l_chol.solve_matrix_in_place(&mut x);
                }
                Ok(x)
            }
            Some(rule) => {
                // Q (M L^{-1})^n
                for _ in 0..self.frac.n_beta {
                    self.l_chol.solve_matrix_in_place(&mut x);
                    x = self.m.mul_mat(&x);
                }
                apply_sinc_matrix(&rule, self.m, self.l, &x)
            }
        }
    }

    pub fn apply_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let out = self.apply(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(DVector::from_column_slice(out.as_slice()))
    }

    /// `X S X^T` for the operator `X` and a symmetric `S`.
    pub fn congruence(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let xs = self.apply(s)?;
        self.apply(&xs.transpose())
    }
}

/// One realization of the sinc-Galerkin field: coefficients in the finite
/// element basis together with the noise and parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub coeffs: DVector<f64>,
    pub xi: Vec<f64>,
    pub beta: f64,
    /// Sinc step; `None` for integer β.
    pub k: Option<f64>,
    pub level: u32,
    pub p: usize,
    pub seed: u64,
}

/// `Z_k^β` for a single load vector `b`.
pub fn sample_coeffs(
    frac: FractionalExponent,
    rule: Option<&SincRule>,
    m: &SymMatrix,
    l: &SymMatrix,
    b: &DVector<f64>,
) -> Result<DVector<f64>> {
    ColoringOperator::new(frac, rule.copied(), m, l)?.apply_vec(b)
}

/// `Σ_j λ_{j,h}^{-β} (e_{j,h}^T M v) e_{j,h}`.
pub fn exact_discrete_frac(
    basis: &DiscreteEigenbasis,
    m: &SymMatrix,
    beta: f64,
    v: &DVector<f64>,
) -> DVector<f64> {
    let e = basis.vectors();
    let mut proj = e.transpose() * m.mul_vec(v);
    for (c, &lam) in proj.iter_mut().zip(basis.lambdas()) {
        *c *= lam.powf(-beta);
    }
    e * proj
}

/// Covariance matrix `Cov(Z_k^β)` of the coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    data: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn from_dense(data: DMatrix<f64>) -> Self {
        Self { data }
    }

    pub fn as_dense(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }
}

/// `X M X^T` where `X` is the coloring operator; no sampling involved.
pub fn covariance_matrix(
    frac: FractionalExponent,
    rule: Option<&SincRule>,
    m: &SymMatrix,
    l: &SymMatrix,
) -> Result<CovarianceMatrix> {
    let op = ColoringOperator::new(frac, rule.copied(), m, l)?;
    Ok(CovarianceMatrix {
        data: op.congruence(m.as_dense())?,
    })
}

/// Max entrywise difference, relative to the largest entry, between the
/// covariance of `X R ξ` (`X R R^T X^T`) and that of `X b` with
/// `b ~ N(0, M)`.
pub fn covariance_equivalence_check(
    frac: FractionalExponent,
    rule: Option<&SincRule>,
    m: &SymMatrix,
    l: &SymMatrix,
    r: &DMatrix<f64>,
) -> Result<f64> {
    let op = ColoringOperator::new(frac, rule.copied(), m, l)?;
    let via_mass = op.congruence(m.as_dense())?;
    let xr = op.apply(r)?;
    let via_r = &xr * xr.transpose();
    let scale = via_mass.amax();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((via_r - via_mass).amax() / scale)
}
