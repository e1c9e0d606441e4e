//! Exact small-dimension linear algebra.
//!
//! Complex Hermitian matrices of dimension 2 or 4 are diagonalized through
//! their real symmetric embedding
//!
//! ```text
//!     H = A + iB   ↦   S = [[A, -B], [B, A]]
//! ```
//!
//! with cyclic Jacobi sweeps. Every eigenvalue of `H` appears twice in `S`,
//! and any real function of `S` is the embedding of the same function of `H`,
//! which gives spectral calculus (and the unitary `exp(-iHt)`) without complex
//! eigenvectors.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance on `|H_ij - conj(H_ji)|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// A complex self-adjoint matrix of dimension 2 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: DMatrix<C64>,
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored column-wise, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl HermitianMatrix {
    /// Validates Hermiticity to [`HERMITIAN_TOL`] and stores the exactly
    /// symmetrized matrix `(H + H†)/2`.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerance(entries, HERMITIAN_TOL)
    }

    pub fn with_tolerance(entries: DMatrix<C64>, tol: f64) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || !(rows == 2 || rows == 4) {
            return Err(Error::validation(format!(
                "Hermitian matrices must be 2x2 or 4x4, got {rows}x{cols}"
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::validation("matrix has non-finite entries"));
        }
        let adjoint = entries.adjoint();
        let defect = (&entries - &adjoint)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > tol {
            return Err(Error::validation(format!(
                "matrix is not Hermitian: max |H - H†| = {defect:e}"
            )));
        }
        Ok(HermitianMatrix {
            entries: (entries + adjoint).scale(0.5),
        })
    }

    pub fn from_matrix2(m: &Matrix2<C64>) -> Result<Self> {
        Self::new(DMatrix::from_iterator(2, 2, m.iter().copied()))
    }

    pub fn from_matrix4(m: &Matrix4<C64>) -> Result<Self> {
        Self::new(DMatrix::from_iterator(4, 4, m.iter().copied()))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
    fn embedding(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = self.entries[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }

    /// Ascending eigenvalues.
    pub fn eigvals(&self) -> Vec<f64> {
        let eig = symmetric_eigen(&self.embedding());
        eig.values
            .chunks(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect()
    }

    pub fn min_eigval(&self) -> f64 {
        self.eigvals()[0]
    }

    pub fn max_eigval(&self) -> f64 {
        *self.eigvals().last().expect("dimension is at least 2")
    }

    /// `f(H)` for a real function `f` (spectral calculus).
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let eig = symmetric_eigen(&self.embedding());
        let mut fs = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for (k, &lambda) in eig.values.iter().enumerate() {
            let col = eig.vectors.column(k);
            fs += (col * col.transpose()) * f(lambda);
        }
        let entries = DMatrix::from_fn(n, n, |i, j| C64::new(fs[(i, j)], fs[(i + n, j)]));
        HermitianMatrix {
            entries: (&entries + entries.adjoint()).scale(0.5),
        }
    }

    /// Largest absolute eigenvalue.
    pub fn op_norm(&self) -> f64 {
        self.eigvals().iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> f64 {
        self.eigvals().iter().map(|x| x.abs()).sum()
    }
}

/// Ascending eigenvalues of a Hermitian matrix given as raw entries.
pub fn herm_eigvals(h: &DMatrix<C64>) -> Result<Vec<f64>> {
    Ok(HermitianMatrix::new(h.clone())?.eigvals())
}

pub fn op_norm(x: &HermitianMatrix) -> f64 {
    x.op_norm()
}

pub fn trace_norm(x: &HermitianMatrix) -> f64 {
    x.trace_norm()
}

/// Cyclic Jacobi diagonalization of a real symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius mass drops below
/// `1e-14 · max(1, ‖A‖_F)`.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> SymmetricEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut a = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) < JACOBI_OFF_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymmetricEigen { values, vectors }
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Pauli basis `(𝟙, σx, σy, σz)`.
pub fn pauli(k: usize) -> Matrix2<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => Matrix2::new(l, o, o, l),
        1 => Matrix2::new(o, l, l, o),
        2 => Matrix2::new(o, -i, i, o),
        3 => Matrix2::new(l, o, o, -l),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Raising operator `σ₊ = |0⟩⟨1|` (|0⟩ is the +z Bloch pole).
pub fn sigma_plus() -> Matrix2<C64> {
    (pauli(1) + pauli(2) * C64::new(0.0, 1.0)).scale(0.5)
}

/// Lowering operator `σ₋ = |1⟩⟨0|`.
pub fn sigma_minus() -> Matrix2<C64> {
    (pauli(1) - pauli(2) * C64::new(0.0, 1.0)).scale(0.5)
}

/// Operator `½ Σ_k c_k σ_k` from (possibly complex) Pauli coefficients.
pub fn from_pauli_coefficients(c: &[C64; 4]) -> Matrix2<C64> {
    (0..4)
        .fold(Matrix2::zeros(), |acc, k| acc + pauli(k) * c[k])
        .scale(0.5)
}

/// Pauli coefficients `c_k = tr(σ_k X)`.
pub fn pauli_coefficients(x: &Matrix2<C64>) -> [C64; 4] {
    std::array::from_fn(|k| (pauli(k) * x).trace())
}

/// Choi matrix `(Φ ⊗ id)(|Ω⟩⟨Ω|)` with `|Ω⟩ = |00⟩ + |11⟩` (trace 2 for
/// trace-preserving maps) of the linear qubit map whose Pauli-coefficient
/// action is the real 4×4 matrix `m`.
///
/// Index convention: row `2a + i`, column `2b + j` holds `Φ(|i⟩⟨j|)_{ab}`.
pub fn choi_from_bloch_matrix(m: &Matrix4<f64>) -> Result<HermitianMatrix> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("Bloch matrix has non-finite entries"));
    }
    let mut choi = DMatrix::<C64>::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            let mut unit = Matrix2::<C64>::zeros();
            unit[(i, j)] = C64::new(1.0, 0.0);
            let x = pauli_coefficients(&unit);
            let y: [C64; 4] = std::array::from_fn(|k| (0..4).map(|l| x[l] * m[(k, l)]).sum());
            let out = from_pauli_coefficients(&y);
            for a in 0..2 {
                for b in 0..2 {
                    choi[(2 * a + i, 2 * b + j)] = out[(a, b)];
                }
            }
        }
    }
    HermitianMatrix::new(choi)
}

/// Kronecker product of two square complex matrices.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Partial trace over the second qubit of a 4×4 operator on `S ⊗ E`.
pub fn ptrace_second(x: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |s, t| x[(2 * s, 2 * t)] + x[(2 * s + 1, 2 * t + 1)])
}

/// Partial trace over the first qubit of a 4×4 operator on `S ⊗ E`.
pub fn ptrace_first(x: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |e, f| x[(e, f)] + x[(2 + e, 2 + f)])
}

/// `exp(-iHt)` via spectral calculus, `cos(Ht) - i sin(Ht)`.
pub fn unitary_evolution(h: &HermitianMatrix, t: f64) -> DMatrix<C64> {
    let c = h.map_spectrum(|x| (x * t).cos()).into_matrix();
    let s = h.map_spectrum(|x| (x * t).sin()).into_matrix();
    c - s * C64::new(0.0, 1.0)
}
