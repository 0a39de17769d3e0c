//! Dense small-matrix kernels: symmetric/SPD newtypes, `vec`, Kronecker products,
//! the matrix exponential, spectral decomposition and the SPD square root.

use core::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Real symmetric matrix, stored with exactly mirrored entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m` after checking that it is square and exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Symmetric part `(m + mᵀ)/2`, which is exactly symmetric by construction.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.nrows();
        let mut out = m.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        SymMatrix(out)
    }

    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    /// The `n×n` basis matrix `e_ii`.
    pub fn unit_diagonal(n: usize, i: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, i)] = 1.0;
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, k: f64) -> Self {
        SymMatrix(&self.0 * k)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0)
    }

    /// `self + k·other`.
    pub fn add_scaled(&self, other: &SymMatrix, k: f64) -> Self {
        SymMatrix(&self.0 + &other.0 * k)
    }

    /// Whether all eigenvalues are ≥ `-tol·max(1, ‖self‖)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let scale = self.0.amax().max(1.0);
        min_eigenvalue(self) >= -tol * scale
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;
    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(SymMatrix);

impl SpdMatrix {
    /// Accepts `s` when its Cholesky factorization exists.
    pub fn new(s: SymMatrix) -> Result<Self> {
        if Cholesky::new(s.0.clone()).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(SpdMatrix(s))
    }

    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_row_slice(n, entries)?)
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(SymMatrix::identity(n))
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }
}

impl Deref for SpdMatrix {
    type Target = SymMatrix;
    fn deref(&self) -> &SymMatrix {
        &self.0
    }
}

/// Column-stacking vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major, which is exactly the vec ordering
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a matrix with `rows` rows.
pub fn unvec(v: &DVector<f64>, rows: usize) -> DMatrix<f64> {
    assert!(rows > 0 && v.len() % rows == 0, "length not divisible by rows");
    DMatrix::from_column_slice(rows, v.len() / rows, v.as_slice())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = a.shape();
    let (r, s) = b.shape();
    let mut out = DMatrix::zeros(p * r, q * s);
    for i in 0..p {
        for j in 0..q {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..r {
                for l in 0..s {
                    out[(i * r + k, j * s + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `tr[a·b]` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn is_exactly_symmetric(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| ((i + 1)..n).all(|j| m[(i, j)] == m[(j, i)]))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential.
///
/// Exactly symmetric inputs go through the eigendecomposition; everything else
/// uses scaling and squaring with the degree-13 Padé approximant.
pub fn mat_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "mat_exp needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    if is_exactly_symmetric(m) {
        let eig = SymmetricEigen::new(m.clone());
        let q = &eig.eigenvectors;
        let mut scaled = q.clone();
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            let e = libm::exp(*lambda);
            for i in 0..n {
                scaled[(i, j)] *= e;
            }
        }
        return SymMatrix::symmetrize(&(scaled * q.transpose())).into_inner();
    }
    pade13_exp(m)
}

fn pade13_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm1 = (0..n)
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        libm::ceil(libm::log2(norm1 / THETA13)) as i32
    } else {
        0
    };
    let a = m * libm::pow(2.0, -squarings as f64);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Eigen-pairs of a symmetric matrix, eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
}

impl Spectral {
    /// `Σ λᵢ γᵢγᵢᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let g = self.vectors.column(k);
            out += (g * g.transpose()) * self.values[k];
        }
        out
    }
}

pub fn spectral_decomp(s: &SymMatrix) -> Spectral {
    let n = s.dim();
    let eig = SymmetricEigen::new(s.as_matrix().clone());
    let mut order: alloc::vec::Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Spectral { values, vectors }
}

pub fn min_eigenvalue(s: &SymMatrix) -> f64 {
    SymmetricEigen::new(s.as_matrix().clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(s: &SymMatrix) -> f64 {
    SymmetricEigen::new(s.as_matrix().clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Symmetric positive definite square root.
pub fn matrix_sqrt(s: &SpdMatrix) -> Result<SpdMatrix> {
    let spec = spectral_decomp(s.as_sym());
    let n = spec.values.len();
    if spec.values.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let mut scaled = spec.vectors.clone();
    for j in 0..n {
        let r = libm::sqrt(spec.values[j]);
        for i in 0..n {
            scaled[(i, j)] *= r;
        }
    }
    let root = SymMatrix::symmetrize(&(scaled * spec.vectors.transpose()));
    SpdMatrix::new(root)
}

/// Solves `a·x = b` by LU with partial pivoting.
pub fn solve<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: nalgebra::ComplexField,
{
    a.clone().lu().solve(b).ok_or(Error::SingularMatrix)
}

/// Embeds a real matrix into the complex matrices.
pub fn complexify(m: &DMatrix<f64>) -> DMatrix<num_complex::Complex64> {
    m.map(|x| num_complex::Complex64::new(x, 0.0))
}

/// Eigenvalues of a general real matrix.
pub fn general_eigenvalues(m: &DMatrix<f64>) -> Result<alloc::vec::Vec<num_complex::Complex64>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(alloc::vec![num_complex::Complex64::new(m[(0, 0)], 0.0)]);
    }
    let schur = nalgebra::linalg::Schur::try_new(complexify(m), f64::EPSILON, 10_000)
        .ok_or(Error::NoConvergence("Schur decomposition"))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}
