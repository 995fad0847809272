use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// True when `max |X[i][j] − conj(X[j][i])| ≤ 1e-12 · max |X|`.
pub fn is_hermitian(m: &CMatrix) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m);
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !is_hermitian(m) {
        return Err(Error::InvalidCovariance("matrix is not Hermitian".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

fn check_psd(values: &[f64]) -> Result<()> {
    let top = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&lowest) = values.first() {
        if lowest < -PSD_TOL * top.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidCovariance(format!(
                "matrix is indefinite (smallest eigenvalue {lowest:e})"
            )));
        }
    }
    Ok(())
}

/// Hermitian positive semi-definite square root `U diag(√λ) Uᴴ`.
pub fn hermitian_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(m)?;
    check_psd(&values)?;
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    let mut root = &scaled * vectors.adjoint();
    // Symmetrise away rounding so the result stays exactly Hermitian.
    for i in 0..n {
        root[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = 0.5 * (root[(i, j)] + root[(j, i)].conj());
            root[(i, j)] = avg;
            root[(j, i)] = avg.conj();
        }
    }
    Ok(root)
}

/// Lower-triangular factor `L` with `L Lᴴ = C` for a Hermitian PSD `C`.
///
/// Zero pivots are allowed (semidefinite input); their columns are left at
/// zero, so degenerate directions receive exactly zero energy.
pub fn psd_factor(c: &CMatrix) -> Result<CMatrix> {
    if !is_hermitian(c) {
        return Err(Error::InvalidCovariance("matrix is not Hermitian".into()));
    }
    let n = c.nrows();
    let scale = max_abs(c);
    let tol = PSD_TOL * scale;
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = c[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if pivot < -tol {
            return Err(Error::InvalidCovariance(format!(
                "matrix is indefinite (pivot {pivot:e} at {j})"
            )));
        }
        if pivot <= tol {
            // Semidefinite direction: the remaining column must vanish too.
            for i in (j + 1)..n {
                let mut s = c[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                if s.norm() > tol.max(1e-300).sqrt() * scale.sqrt() {
                    return Err(Error::InvalidCovariance(format!(
                        "matrix is indefinite (inconsistent null pivot at {j})"
                    )));
                }
            }
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "system is {}x{}, right-hand side has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularCorrelation("system matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Spatial covariance with its Hermitian square root.
///
/// Scaled identities are kept symbolic so that very large arrays (thousands of
/// antennas in closed-form sweeps) never materialise an M×M matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Scaled { dim: usize, scale: f64 },
    Dense { matrix: CMatrix, sqrt: CMatrix },
}

impl Covariance {
    pub fn scaled(dim: usize, scale: f64) -> Self {
        Covariance::Scaled { dim, scale }
    }

    /// Validates a Hermitian PSD matrix and computes its square root.
    pub fn dense(matrix: CMatrix) -> Result<Self> {
        let sqrt = hermitian_sqrt(&matrix)?;
        Ok(Covariance::Dense { matrix, sqrt })
    }

    pub fn dim(&self) -> usize {
        match self {
            Covariance::Scaled { dim, .. } => *dim,
            Covariance::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Covariance::Scaled { scale, .. } => Some(*scale),
            Covariance::Dense { .. } => None,
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Covariance::Scaled { dim, scale } => CMatrix::identity(*dim, *dim) * Complex64::new(*scale, 0.0),
            Covariance::Dense { matrix, .. } => matrix.clone(),
        }
    }

    pub fn sqrt_dense(&self) -> CMatrix {
        match self {
            Covariance::Scaled { dim, scale } => {
                CMatrix::identity(*dim, *dim) * Complex64::new(scale.sqrt(), 0.0)
            }
            Covariance::Dense { sqrt, .. } => sqrt.clone(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Covariance::Scaled { dim, scale } => vec![*scale; *dim],
            Covariance::Dense { matrix, .. } => (0..matrix.nrows()).map(|i| matrix[(i, i)].re).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Returns `C^{1/2} v`.
    pub fn apply_sqrt(&self, v: &CVector) -> CVector {
        match self {
            Covariance::Scaled { scale, .. } => v * Complex64::new(scale.sqrt(), 0.0),
            Covariance::Dense { sqrt, .. } => sqrt * v,
        }
    }

    /// Returns `C v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        match self {
            Covariance::Scaled { scale, .. } => v * Complex64::new(*scale, 0.0),
            Covariance::Dense { matrix, .. } => matrix * v,
        }
    }

    /// Draws one `CN(0, C)` vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let w = super::standard_complex_vector(rng, self.dim());
        self.apply_sqrt(&w)
    }
}
