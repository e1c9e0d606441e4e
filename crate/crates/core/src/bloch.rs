//! The qubit Bloch isomorphism for states, effects and maps.
//!
//! States are `ρ = ½(𝟙 + r·σ)` with `‖r‖ ≤ 1`; self-adjoint operators are
//! `A = ½(a₀𝟙 + α·σ)`; a Hermiticity- and trace-preserving map is the 4×4
//! block matrix `M = [[1, 0ᵀ], [v, Λ]]` acting on `(1, r)`. The dual
//! (Heisenberg) map is represented by `Mᵀ` acting on `(a₀, α)`.

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix4, Vector3, Vector4};

use crate::smallmat::{from_pauli_coefficients, pauli, pauli_coefficients, HermitianMatrix, C64};
use crate::{Error, Result, Tolerances};

/// A qubit density matrix in Bloch form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    r: Vector3<f64>,
}

impl QubitState {
    pub fn new(r: Vector3<f64>) -> Result<Self> {
        let tol = Tolerances::default().bloch;
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("Bloch vector has non-finite entries"));
        }
        if r.norm() > 1.0 + tol {
            return Err(Error::validation(format!(
                "Bloch vector norm {} exceeds 1",
                r.norm()
            )));
        }
        Ok(QubitState { r })
    }

    /// From `(1, x, y, z)`.
    pub fn from_r4(r4: &Vector4<f64>) -> Result<Self> {
        if (r4[0] - 1.0).abs() > Tolerances::default().bloch {
            return Err(Error::validation(format!(
                "leading Bloch component must be 1, got {}",
                r4[0]
            )));
        }
        Self::new(Vector3::new(r4[1], r4[2], r4[3]))
    }

    pub fn maximally_mixed() -> Self {
        QubitState {
            r: Vector3::zeros(),
        }
    }

    /// Pure state along the direction of `n` (normalized here).
    pub fn pure(n: Vector3<f64>) -> Result<Self> {
        let len = n.norm();
        if len == 0.0 || !len.is_finite() {
            return Err(Error::validation("pure state needs a nonzero direction"));
        }
        Self::new(n / len)
    }

    pub fn bloch(&self) -> Vector3<f64> {
        self.r
    }

    pub fn r4(&self) -> Vector4<f64> {
        Vector4::new(1.0, self.r.x, self.r.y, self.r.z)
    }

    pub fn matrix(&self) -> HermitianMatrix {
        state_matrix(self)
    }
}

/// `½(𝟙 + r·σ)`.
pub fn state_matrix(s: &QubitState) -> HermitianMatrix {
    bloch_operator(&s.r4())
}

/// Inverse of [`state_matrix`]; requires unit trace and PSD within `1e-10`.
pub fn state_from_matrix(rho: &HermitianMatrix) -> Result<QubitState> {
    let tol = Tolerances::default();
    let a4 = bloch_coefficients(rho)?;
    if (a4[0] - 1.0).abs() > tol.psd {
        return Err(Error::validation(format!(
            "density matrix has trace {}",
            a4[0]
        )));
    }
    let min = rho.min_eigval();
    if min < -tol.psd {
        return Err(Error::validation(format!(
            "density matrix has negative eigenvalue {min:e}"
        )));
    }
    let r = Vector3::new(a4[1], a4[2], a4[3]);
    let len = r.norm();
    // Clamp roundoff beyond the sphere for states validated as PSD above.
    let r = if len > 1.0 { r / len } else { r };
    QubitState::new(r)
}

/// A qubit effect `0 ≤ A ≤ 𝟙` in Bloch form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitEffect {
    a0: f64,
    alpha: Vector3<f64>,
}

impl QubitEffect {
    /// Requires `0 ≤ a₀ ≤ 2` and `‖α‖ ≤ min(a₀, 2 − a₀)` (to `1e-12`).
    pub fn new(a0: f64, alpha: Vector3<f64>) -> Result<Self> {
        let tol = Tolerances::default().bloch;
        if !a0.is_finite() || alpha.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("effect has non-finite entries"));
        }
        if !(-tol..=2.0 + tol).contains(&a0) {
            return Err(Error::validation(format!(
                "effect a0 = {a0} outside [0, 2]"
            )));
        }
        let bound = a0.min(2.0 - a0);
        if alpha.norm() > bound + tol {
            return Err(Error::validation(format!(
                "effect |alpha| = {} exceeds min(a0, 2 - a0) = {bound}",
                alpha.norm()
            )));
        }
        Ok(QubitEffect { a0, alpha })
    }

    pub fn from_a4(a4: &Vector4<f64>) -> Result<Self> {
        Self::new(a4[0], Vector3::new(a4[1], a4[2], a4[3]))
    }

    pub fn zero() -> Self {
        QubitEffect {
            a0: 0.0,
            alpha: Vector3::zeros(),
        }
    }

    pub fn identity() -> Self {
        QubitEffect {
            a0: 2.0,
            alpha: Vector3::zeros(),
        }
    }

    /// Rank-one projector onto the pure state along `n`.
    pub fn projector(n: Vector3<f64>) -> Result<Self> {
        let len = n.norm();
        if len == 0.0 || !len.is_finite() {
            return Err(Error::validation("projector needs a nonzero direction"));
        }
        Self::new(1.0, n / len)
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn alpha(&self) -> Vector3<f64> {
        self.alpha
    }

    pub fn a4(&self) -> Vector4<f64> {
        Vector4::new(self.a0, self.alpha.x, self.alpha.y, self.alpha.z)
    }

    /// `𝟙 − A`.
    pub fn complement(&self) -> Self {
        QubitEffect {
            a0: 2.0 - self.a0,
            alpha: -self.alpha,
        }
    }

    pub fn matrix(&self) -> HermitianMatrix {
        effect_matrix(self)
    }
}

/// `½(a₀𝟙 + α·σ)`.
pub fn effect_matrix(e: &QubitEffect) -> HermitianMatrix {
    bloch_operator(&e.a4())
}

/// Inverse of [`effect_matrix`]; requires spectrum in `[−1e-10, 1 + 1e-10]`.
pub fn effect_from_matrix(e: &HermitianMatrix) -> Result<QubitEffect> {
    let tol = Tolerances::default().psd;
    let ev = e.eigvals();
    if ev[0] < -tol || ev[1] > 1.0 + tol {
        return Err(Error::validation(format!(
            "operator spectrum {ev:?} is not within [0, 1]"
        )));
    }
    let a4 = bloch_coefficients(e)?;
    let a0 = a4[0].clamp(0.0, 2.0);
    let alpha = Vector3::new(a4[1], a4[2], a4[3]);
    let bound = a0.min(2.0 - a0);
    let alpha = if alpha.norm() > bound && alpha.norm() > 0.0 {
        alpha * (bound / alpha.norm())
    } else {
        alpha
    };
    QubitEffect::new(a0, alpha)
}

/// `½ Σ_k a_k σ_k` for a real coefficient vector.
pub fn bloch_operator(a4: &Vector4<f64>) -> HermitianMatrix {
    let c: [C64; 4] = std::array::from_fn(|k| C64::new(a4[k], 0.0));
    HermitianMatrix::from_matrix2(&from_pauli_coefficients(&c)).expect("real Pauli combination")
}

/// Real coefficients `a_k = tr(σ_k A)` of a 2×2 Hermitian operator.
pub fn bloch_coefficients(a: &HermitianMatrix) -> Result<Vector4<f64>> {
    if a.dim() != 2 {
        return Err(Error::validation("Bloch coefficients need a 2x2 operator"));
    }
    let m = Matrix2::from_fn(|i, j| a.matrix()[(i, j)]);
    let c = pauli_coefficients(&m);
    Ok(Vector4::new(c[0].re, c[1].re, c[2].re, c[3].re))
}

/// An affine qubit map `r ↦ Λr + v`, i.e. `M = [[1, 0ᵀ], [v, Λ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAffine {
    pub v: Vector3<f64>,
    pub lambda: Matrix3<f64>,
}

impl BlochAffine {
    pub fn new(v: Vector3<f64>, lambda: Matrix3<f64>) -> Result<Self> {
        if v.iter().chain(lambda.iter()).any(|x| !x.is_finite()) {
            return Err(Error::validation("Bloch map has non-finite entries"));
        }
        Ok(BlochAffine { v, lambda })
    }

    pub fn identity() -> Self {
        BlochAffine {
            v: Vector3::zeros(),
            lambda: Matrix3::identity(),
        }
    }

    /// Completely depolarizing map `Λ₀[ρ] = 𝟙/2`.
    pub fn depolarizing() -> Self {
        BlochAffine {
            v: Vector3::zeros(),
            lambda: Matrix3::zeros(),
        }
    }

    /// Reads the block form back; the first row must be `(1, 0, 0, 0)` to `1e-9`.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let row = [m[(0, 0)] - 1.0, m[(0, 1)], m[(0, 2)], m[(0, 3)]];
        if row.iter().any(|x| x.abs() > 1e-9) {
            return Err(Error::validation(format!(
                "not a trace-preserving Bloch matrix: first row {:?}",
                [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(0, 3)]]
            )));
        }
        Self::new(
            Vector3::new(m[(1, 0)], m[(2, 0)], m[(3, 0)]),
            m.fixed_view::<3, 3>(1, 1).into_owned(),
        )
    }

    /// Pauli-coefficient matrix `M_{kl} = ½ tr(σ_k Φ(σ_l))` of the map with
    /// the given Kraus operators; fails unless the map is trace preserving.
    pub fn from_kraus(kraus: &[Matrix2<C64>]) -> Result<Self> {
        let m = Matrix4::from_fn(|k, l| {
            let image: Matrix2<C64> = kraus.iter().map(|op| op * pauli(l) * op.adjoint()).sum();
            0.5 * (pauli(k) * image).trace().re
        });
        Self::from_matrix(&m)
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = 1.0;
        for i in 0..3 {
            m[(i + 1, 0)] = self.v[i];
            for j in 0..3 {
                m[(i + 1, j + 1)] = self.lambda[(i, j)];
            }
        }
        m
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &BlochAffine) -> BlochAffine {
        BlochAffine {
            v: self.lambda * other.v + self.v,
            lambda: self.lambda * other.lambda,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.lambda.determinant()
    }

    /// Inverse map; fails when `|det Λ| ≤ threshold`.
    pub fn inverse(&self, threshold: f64) -> Option<BlochAffine> {
        if self.determinant().abs() <= threshold {
            return None;
        }
        let inv = self.lambda.try_inverse()?;
        Some(BlochAffine {
            v: -(inv * self.v),
            lambda: inv,
        })
    }

    pub fn apply_state(&self, s: &QubitState) -> Vector3<f64> {
        self.lambda * s.bloch() + self.v
    }

    /// Heisenberg action on an effect, `Mᵀ a₄`.
    pub fn apply_dual(&self, e: &QubitEffect) -> Vector4<f64> {
        dual_map(&self.matrix()) * e.a4()
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.v.norm() <= tol
    }
}

/// Schrödinger action of the map on a 4-vector, `M a₄`.
pub fn apply_map(m: &BlochAffine, a4: &Vector4<f64>) -> Vector4<f64> {
    m.matrix() * a4
}

/// Matrix of the dual map, `Mᵀ`.
pub fn dual_map(m: &Matrix4<f64>) -> Matrix4<f64> {
    m.transpose()
}

/// `tr(A B)` for two Bloch-form operators, computed from their matrices.
pub fn trace_pairing(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    let prod: DMatrix<C64> = a.matrix() * b.matrix();
    prod.trace().re
}

/// `n` quasi-uniform points on the unit sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

/// Result of maximizing `‖Λr + v‖` over unit vectors `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallImage {
    pub max_norm: f64,
    pub argmax: Vector3<f64>,
}

pub const BALL_SAMPLES: usize = 10_000;
const BALL_REFINE_STARTS: usize = 5;
const BALL_REFINE_STEPS: usize = 20;

/// Largest image norm of the unit sphere under `r ↦ Λr + v`: Fibonacci
/// sampling followed by projected gradient ascent on `‖Λr + v‖²` from the
/// best few samples. The maximum of this convex function over the ball is
/// attained on the sphere.
pub fn max_image_norm(lambda: &Matrix3<f64>, v: &Vector3<f64>, samples: usize) -> BallImage {
    let f = |r: &Vector3<f64>| (lambda * r + v).norm_squared();
    let mut scored: Vec<(f64, Vector3<f64>)> = fibonacci_sphere(samples)
        .into_iter()
        .map(|r| (f(&r), r))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let scale = lambda.norm().max(1e-12);
    let mut best = scored[0];
    for &(start_val, start) in scored.iter().take(BALL_REFINE_STARTS) {
        let (mut val, mut r) = (start_val, start);
        let mut step = 0.5 / (scale * scale);
        for _ in 0..BALL_REFINE_STEPS {
            let grad = 2.0 * lambda.transpose() * (lambda * r + v);
            // Tangential component only.
            let tangent = grad - r * r.dot(&grad);
            if tangent.norm() < 1e-16 {
                break;
            }
            let mut accepted = false;
            for _ in 0..30 {
                let cand = (r + tangent * step).normalize();
                let cv = f(&cand);
                if cv >= val {
                    r = cand;
                    val = cv;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if val > best.0 {
            best = (val, r);
        }
    }
    BallImage {
        max_norm: best.0.sqrt(),
        argmax: best.1,
    }
}

/// Whether the map sends the closed Bloch ball into itself (to `tol`).
pub fn maps_ball_into_ball(m: &BlochAffine, tol: f64) -> bool {
    max_image_norm(&m.lambda, &m.v, BALL_SAMPLES).max_norm <= 1.0 + tol
}
