//! Dense complex matrix kernels.
//!
//! Thin layer over `nalgebra` that fixes the conventions the rest of the
//! crate relies on: singular values and eigenvalues are always returned in
//! descending order, inputs are checked for finiteness, and Hermitian PSD
//! matrices carry their own validated newtype.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Relative tolerance for conjugate symmetry.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues below `-PSD_TOL * lambda_max` reject a matrix as non-PSD.
pub const PSD_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn ensure_finite(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

/// Real diagonal matrix embedded in a `rows x cols` complex matrix.
pub fn real_diag(values: &[f64], rows: usize, cols: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for (k, &v) in values.iter().enumerate().take(rows.min(cols)) {
        m[(k, k)] = c64(v, 0.0);
    }
    m
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn hermitian_defect(a: &ComplexMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

fn check_hermitian(a: &ComplexMatrix, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dims(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a, what)?;
    let scale = a.norm();
    if hermitian_defect(a) > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!("{what} is not Hermitian")));
    }
    Ok(())
}

/// A Hermitian positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPsd(ComplexMatrix);

impl HermitianPsd {
    /// Validates conjugate symmetry and eigenvalue sign, then stores the exactly
    /// Hermitian part.
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        check_hermitian(&a, "matrix")?;
        let h = hermitian_part(&a);
        let eig = eig_sorted(&h);
        let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(&low) = eig.values.last() {
            if low < -PSD_TOL * top.max(f64::MIN_POSITIVE) {
                return Err(Error::invalid(format!(
                    "matrix is not PSD (eigenvalue {low:e})"
                )));
            }
        }
        Ok(HermitianPsd(h))
    }

    /// Wraps a matrix that is PSD by construction (a Gram product or a sum of
    /// them), removing rounding asymmetry.
    pub(crate) fn from_product(a: ComplexMatrix) -> Self {
        HermitianPsd(hermitian_part(&a))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianPsd(ComplexMatrix::zeros(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        assert!(s >= 0.0, "scaled_identity needs a nonnegative scale");
        HermitianPsd(ComplexMatrix::identity(n, n).scale(s))
    }

    pub fn from_real_diag(d: &[f64]) -> Result<Self> {
        if d.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid("diagonal entries must be finite and >= 0"));
        }
        Ok(HermitianPsd(real_diag(d, d.len(), d.len())))
    }

    /// `B X B^H` for a PSD `X`.
    pub fn congruence(&self, b: &ComplexMatrix) -> Result<Self> {
        if b.ncols() != self.dim() {
            return Err(Error::dims(format!(
                "congruence: {}x{} against {}x{}",
                b.nrows(),
                b.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(Self::from_product(b * &self.0 * b.adjoint()))
    }

    pub fn add(&self, other: &HermitianPsd) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dims("PSD sum of different sizes"));
        }
        Ok(HermitianPsd(&self.0 + &other.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn eig(&self) -> HermEig {
        eig_sorted(&self.0)
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eig().values.first().copied().unwrap_or(0.0)
    }

    /// `v^H A v`, real for Hermitian `A`.
    pub fn quadratic_form(&self, v: &ComplexVector) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }

    /// `log2 det(A)`; fails if `A` is not positive definite.
    pub fn log2_det(&self) -> Result<f64> {
        let chol = Cholesky::new(self.0.clone()).ok_or_else(|| {
            Error::NumericalFailure("matrix is not positive definite".into())
        })?;
        let l = chol.l_dirty();
        Ok(2.0 * l.diagonal().iter().map(|z| z.re.log2()).sum::<f64>())
    }

    /// `A^{-1}`; fails if `A` is not positive definite.
    pub fn inverse(&self) -> Result<HermitianPsd> {
        let chol = Cholesky::new(self.0.clone()).ok_or_else(|| {
            Error::NumericalFailure("matrix is not positive definite".into())
        })?;
        Ok(Self::from_product(chol.inverse()))
    }
}

/// Thin SVD `A = L diag(sigma) R^H` with `sigma` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub left: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub right: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.sigma.len();
        &self.left * real_diag(&self.sigma, k, k) * self.right.adjoint()
    }
}

pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    ensure_finite(a, "svd input")?;
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok(Svd {
            left: ComplexMatrix::zeros(a.nrows(), 0),
            sigma: Vec::new(),
            right: ComplexMatrix::zeros(a.ncols(), 0),
        });
    }
    let dec = SVD::new(a.clone(), true, true);
    let u = dec
        .u
        .ok_or_else(|| Error::NumericalFailure("svd did not return U".into()))?;
    let v_t = dec
        .v_t
        .ok_or_else(|| Error::NumericalFailure("svd did not return V^H".into()))?;
    let v = v_t.adjoint();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));

    let mut left = ComplexMatrix::zeros(a.nrows(), k);
    let mut right = ComplexMatrix::zeros(a.ncols(), k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_column(dst, &v.column(src));
        sigma.push(dec.singular_values[src]);
    }
    Ok(Svd { left, sigma, right })
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn top_vector(&self) -> ComplexVector {
        self.vectors.column(0).into_owned()
    }
}

pub fn herm_eig(a: &ComplexMatrix) -> Result<HermEig> {
    check_hermitian(a, "herm_eig input")?;
    Ok(eig_sorted(&hermitian_part(a)))
}

fn eig_sorted(h: &ComplexMatrix) -> HermEig {
    let n = h.nrows();
    if n == 0 {
        return HermEig {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        };
    }
    let dec = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dec.eigenvalues[j].total_cmp(&dec.eigenvalues[i]));
    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &dec.eigenvectors.column(src));
        values.push(dec.eigenvalues[src]);
    }
    HermEig { values, vectors }
}

/// `n x n` matrix of i.i.d. `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re * s, im * s)
    })
}

/// Haar-distributed `n x n` unitary: QR of a complex Gaussian matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    assert!(n >= 1, "haar_unitary needs n >= 1");
    let z = complex_gaussian(n, n, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Uniform draw from the complex unit sphere in `C^n`.
pub fn unit_sphere_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexVector {
    loop {
        let g = complex_gaussian(n, 1, rng);
        let norm = g.norm();
        if norm > 0.0 {
            return g.column(0).unscale(norm);
        }
    }
}

/// `||A^H A - I||_F` for a matrix with supposedly orthonormal columns.
pub fn orthonormality_defect(a: &ComplexMatrix) -> f64 {
    (a.adjoint() * a - ComplexMatrix::identity(a.ncols(), a.ncols())).norm()
}
