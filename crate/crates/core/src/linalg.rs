//! Dense/banded symmetric matrices and the generalized symmetric eigensolver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric real matrix stored densely, with a known half-bandwidth.
///
/// The half-bandwidth is used by [`BandCholesky`]; a dense matrix simply has
/// half-bandwidth `order - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
    half_bandwidth: usize,
}

impl SymMatrix {
    /// Wraps a dense matrix, checking symmetry to `1e-12` relative.
    pub fn from_dense(data: DMatrix<f64>) -> Result<Self> {
        if !data.is_square() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        let scale = data.amax();
        let asym = (&data - data.transpose()).amax();
        if scale > 0.0 && asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym / scale));
        }
        let half_bandwidth = detect_half_bandwidth(&data);
        Ok(Self {
            data,
            half_bandwidth,
        })
    }

    pub(crate) fn from_parts(data: DMatrix<f64>, half_bandwidth: usize) -> Self {
        Self {
            data,
            half_bandwidth,
        }
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    pub fn as_dense(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_dense(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.data * v
    }

    pub fn mul_mat(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        &self.data * v
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        let data = &self.data * a + &other.data * b;
        SymMatrix {
            data,
            half_bandwidth: self.half_bandwidth.max(other.half_bandwidth),
        }
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }

    /// Applies `v -> X v` for a congruence `X^T A X` in a changed basis.
    pub fn congruence(&self, x: &DMatrix<f64>) -> Result<SymMatrix> {
        let mut data = x.transpose() * &self.data * x;
        symmetrize(&mut data);
        SymMatrix::from_dense(data)
    }
}

fn detect_half_bandwidth(data: &DMatrix<f64>) -> usize {
    let n = data.nrows();
    let mut bw = 0;
    for j in 0..n {
        for i in (j + 1)..n {
            if data[(i, j)] != 0.0 {
                bw = bw.max(i - j);
            }
        }
    }
    bw
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
}

/// Cholesky factor `A = C C^T` of a banded SPD matrix, stored by rows of the
/// lower band.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i holds C[i, i-bw ..= i] at offsets 0 ..= bw
    band: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let n = a.order();
        let bw = a.half_bandwidth.min(n.saturating_sub(1));
        let width = bw + 1;
        let mut band = vec![0.0; n * width];
        let at = |i: usize, j: usize| i * width + (j + bw - i);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = a.data[(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    sum -= band[at(i, k)] * band[at(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::NotPositiveDefinite("Cholesky pivot"));
                    }
                    band[at(i, i)] = sum.sqrt();
                } else {
                    band[at(i, j)] = sum / band[at(j, j)];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.band[i * (self.bw + 1) + (j + self.bw - i)]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        let bw = self.bw;
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.c(i, k) * x[k];
            }
            x[i] = s / self.c(i, i);
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + bw + 1).min(self.n) {
                s -= self.c(k, i) * x[k];
            }
            x[i] = s / self.c(i, i);
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Solves `A X = B` column by column, in place.
    pub fn solve_matrix_in_place(&self, b: &mut DMatrix<f64>) {
        let n = self.n;
        for mut col in b.column_iter_mut() {
            let slice = col.as_mut_slice();
            debug_assert_eq!(slice.len(), n);
            self.solve_in_place(slice);
        }
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.solve_matrix_in_place(&mut x);
        x
    }
}

/// Full spectrum of the pencil `(a, b)` with `b` SPD: eigenvalues in
/// nondecreasing order and `b`-orthonormal eigenvectors as columns.
///
/// Reduces to a standard problem through `b = C C^T`, solves
/// `C^{-1} a C^{-T} y = λ y` densely and back-transforms `x = C^{-T} y`.
pub fn generalized_symmetric_eigen(
    a: &SymMatrix,
    b: &SymMatrix,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.order();
    if b.order() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.order(),
        });
    }
    let chol = nalgebra::linalg::Cholesky::new(b.data.clone())
        .ok_or(Error::NotPositiveDefinite("mass matrix"))?;
    let c = chol.l();
    let x = c
        .solve_lower_triangular(&a.data)
        .ok_or(Error::NotPositiveDefinite("mass matrix factor"))?;
    let mut reduced = c
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::NotPositiveDefinite("mass matrix factor"))?;
    symmetrize(&mut reduced);

    let eig = nalgebra::linalg::SymmetricEigen::try_new(reduced, f64::EPSILON, 0)
        .ok_or(Error::NonFinite("symmetric eigensolver did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        y.set_column(dst, &eig.eigenvectors.column(src));
    }
    let vectors = c
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(Error::NotPositiveDefinite("mass matrix factor"))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("generalized eigenvalues"));
    }
    Ok((values, vectors))
}
