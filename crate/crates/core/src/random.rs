//! Seeded randomness for property checks and randomized verifications.
//!
//! Every randomized routine draws from [`Rng64`], a xoshiro256++ generator
//! (64-bit output, 256-bit state, seeded through SplitMix64). Identical
//! seeds give identical draws on every platform.

use nalgebra::{DMatrix, Matrix2, Vector3};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::bloch::{BlochAffine, QubitEffect, QubitState};
use crate::smallmat::{HermitianMatrix, C64};

pub type Rng64 = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Uniform point on the unit sphere.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform point in the Bloch ball.
pub fn state<R: Rng + ?Sized>(rng: &mut R) -> QubitState {
    let r = rng.random::<f64>().cbrt();
    QubitState::new(unit_vector(rng) * r).expect("inside the unit ball")
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R) -> QubitState {
    QubitState::new(unit_vector(rng)).expect("unit vector")
}

/// Random valid effect: `a0` uniform in `[0, 2]`, `‖α‖` uniform up to
/// `min(a0, 2 - a0)`.
pub fn effect<R: Rng + ?Sized>(rng: &mut R) -> QubitEffect {
    let a0 = 2.0 * rng.random::<f64>();
    let len = rng.random::<f64>() * a0.min(2.0 - a0);
    QubitEffect::new(a0, unit_vector(rng) * len).expect("valid by construction")
}

/// Random unbiased effect (`a0 = 1`).
pub fn unbiased_effect<R: Rng + ?Sized>(rng: &mut R) -> QubitEffect {
    let len = rng.random::<f64>();
    QubitEffect::new(1.0, unit_vector(rng) * len).expect("valid by construction")
}

/// Hermitian matrix with independent Gaussian entries of the given scale.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> HermitianMatrix {
    let g = ginibre(rng, dim);
    let h = (&g + g.adjoint()) * C64::new(0.5 * scale, 0.0);
    HermitianMatrix::new(h).expect("Hermitian by construction")
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<C64> {
    let qr = ginibre(rng, dim).qr();
    let q = qr.q();
    let r = qr.r();
    let phases = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        } else {
            C64::new(0.0, 0.0)
        }
    });
    q * phases
}

/// Random qubit CPTP map: a Haar unitary on system ⊗ ancilla with the
/// ancilla prepared in `|0⟩` and traced out.
pub fn channel<R: Rng + ?Sized>(rng: &mut R) -> BlochAffine {
    let u = unitary(rng, 4);
    let kraus: Vec<Matrix2<C64>> = (0..2)
        .map(|e| Matrix2::from_fn(|s, t| u[(2 * s + e, 2 * t)]))
        .collect();
    BlochAffine::from_kraus(&kraus).expect("Kraus operators of an isometry")
}
