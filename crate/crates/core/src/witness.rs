//! Distinguishability of states and effects along a trajectory, the
//! non-Markovianity measures `N_S` and `N_H`, and two checks that need
//! independent routes: the brute-force effect-guessing optimum and the
//! system-environment bounds on revivals.
//!
//! In Bloch form a Hermitian `X = ½(x0 𝟙 + x·σ)` has eigenvalues
//! `(x0 ± ‖x‖)/2`, so `‖X‖_∞ = (|x0| + ‖x‖)/2` and `‖X‖₁ = max(|x0|, ‖x‖)`.
//! The measures use these closed forms; the curve and oracle routines
//! diagonalize explicit matrices instead.

use std::fmt;

use nalgebra::{DMatrix, Vector3, Vector4};

use crate::bloch::{
    bloch_operator, fibonacci_sphere, max_image_norm, QubitEffect, QubitState, BALL_SAMPLES,
};
use crate::dynmap::{p_divisibility, MapTrajectory, Picture, Side};
use crate::smallmat::{kron, ptrace_first, ptrace_second, unitary_evolution, HermitianMatrix, C64};
use crate::{Error, Result, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveLabel {
    D1,
    Dinf,
    PguessS,
    PguessE,
    Incompat,
    Sharpness,
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveLabel::D1 => "D1",
            CurveLabel::Dinf => "Dinf",
            CurveLabel::PguessS => "Pguess_s",
            CurveLabel::PguessE => "Pguess_e",
            CurveLabel::Incompat => "incompat",
            CurveLabel::Sharpness => "sharpness",
        })
    }
}

/// A scalar quantity sampled on a trajectory's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub label: CurveLabel,
}

impl TrajectoryCurve {
    /// Largest forward difference quotient `(v_{i+1} − v_i)/(t_{i+1} − t_i)`.
    pub fn max_increase_rate(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `E − F` in Bloch coefficients, `Δ = ½(δ0 𝟙 + δ·σ)`; valid differences
/// satisfy `|δ0| + ‖δ‖ ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectDifference {
    pub delta0: f64,
    pub delta: Vector3<f64>,
}

impl EffectDifference {
    pub fn new(delta0: f64, delta: Vector3<f64>) -> Result<Self> {
        if delta0.abs() + delta.norm() > 2.0 + Tolerances::default().bloch {
            return Err(Error::validation(format!(
                "effect difference needs |d0| + |d| <= 2, got {}",
                delta0.abs() + delta.norm()
            )));
        }
        Ok(EffectDifference { delta0, delta })
    }

    pub fn between(e: &QubitEffect, f: &QubitEffect) -> Self {
        EffectDifference {
            delta0: e.a0() - f.a0(),
            delta: e.alpha() - f.alpha(),
        }
    }

    pub fn a4(&self) -> Vector4<f64> {
        Vector4::new(self.delta0, self.delta.x, self.delta.y, self.delta.z)
    }

    /// Splits `Δ` into effects `E = Δ₊`, `F = Δ₋` (positive and negative parts).
    pub fn split(&self) -> (QubitEffect, QubitEffect) {
        let n = self.delta.norm();
        let (hi, lo) = ((self.delta0 + n) / 2.0, (self.delta0 - n) / 2.0);
        let u = if n > 0.0 {
            self.delta / n
        } else {
            Vector3::z()
        };
        // Eigen-decomposition Δ = hi·P₊ + lo·P₋ with P± = ½(𝟙 ± u·σ).
        let e = bloch_effect(hi.max(0.0), lo.max(0.0), &u);
        let f = bloch_effect((-hi).max(0.0), (-lo).max(0.0), &u);
        (e, f)
    }
}

// a·P₊ + b·P₋ for P± = ½(𝟙 ± u·σ).
fn bloch_effect(a: f64, b: f64, u: &Vector3<f64>) -> QubitEffect {
    QubitEffect::new(a + b, u * (a - b)).expect("eigenvalues in [0, 1]")
}

/// `‖X‖_∞` of `X = ½(x0 𝟙 + x·σ)`.
pub fn op_norm_bloch(x: &Vector4<f64>) -> f64 {
    (x[0].abs() + x.fixed_rows::<3>(1).norm()) / 2.0
}

/// `‖X‖₁` of `X = ½(x0 𝟙 + x·σ)`.
pub fn trace_norm_bloch(x: &Vector4<f64>) -> f64 {
    x[0].abs().max(x.fixed_rows::<3>(1).norm())
}

/// Trace distance `‖ρ − σ‖₁ / 2`.
pub fn d1(rho: &QubitState, sigma: &QubitState) -> f64 {
    matrix_difference(&rho.r4(), &sigma.r4()).trace_norm() / 2.0
}

/// Operator distance `‖E − F‖_∞`.
pub fn dinf(e: &QubitEffect, f: &QubitEffect) -> f64 {
    matrix_difference(&e.a4(), &f.a4()).op_norm()
}

fn matrix_difference(a: &Vector4<f64>, b: &Vector4<f64>) -> HermitianMatrix {
    bloch_operator(&(a - b))
}

pub fn p_guess_state(rho: &QubitState, sigma: &QubitState) -> f64 {
    (1.0 + d1(rho, sigma)) / 2.0
}

pub fn p_guess_effect(e: &QubitEffect, f: &QubitEffect) -> f64 {
    (1.0 + dinf(e, f)) / 2.0
}

/// Guessing probability for an effect pair found by direct search: the
/// error `½ − |tr((E − F)ρ)|/2` is minimized over `n_states` Fibonacci pure
/// states, then refined around the best few by pattern search.
pub fn p_guess_effect_bruteforce(e: &QubitEffect, f: &QubitEffect, n_states: usize) -> f64 {
    let diff = matrix_difference(&e.a4(), &f.a4());
    let error = |theta: f64, phi: f64| -> f64 {
        let r = spherical(theta, phi);
        let rho = bloch_operator(&Vector4::new(1.0, r.x, r.y, r.z));
        0.5 - (diff.matrix() * rho.matrix()).trace().re.abs() / 2.0
    };
    let mut starts: Vec<(f64, f64, f64)> = fibonacci_sphere(n_states.max(1))
        .into_iter()
        .map(|r| {
            let (theta, phi) = angles(&r);
            (error(theta, phi), theta, phi)
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = (4.0 / n_states.max(1) as f64).sqrt();
    let best = starts
        .iter()
        .take(5)
        .map(|&(_, theta, phi)| {
            -pattern_search(|p| -error(p[0], p[1]), vec![theta, phi], step, 1e-9, &[]).1
        })
        .fold(f64::INFINITY, f64::min);
    1.0 - best
}

fn spherical(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    )
}

fn angles(r: &Vector3<f64>) -> (f64, f64) {
    (r.z.clamp(-1.0, 1.0).acos(), r.y.atan2(r.x))
}

/// Compass search maximizing `f`; coordinates with an entry in `bounds`
/// are clamped to that interval. Returns the best point and value.
fn pattern_search(
    f: impl Fn(&[f64]) -> f64,
    start: Vec<f64>,
    step: f64,
    min_step: f64,
    bounds: &[(usize, f64, f64)],
) -> (Vec<f64>, f64) {
    let clamp = |x: &mut Vec<f64>| {
        for &(i, lo, hi) in bounds {
            x[i] = x[i].clamp(lo, hi);
        }
    };
    let mut x = start;
    clamp(&mut x);
    let mut best = f(&x);
    let mut h = step;
    while h > min_step {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut cand = x.clone();
                cand[i] += sign * h;
                clamp(&mut cand);
                let v = f(&cand);
                if v > best {
                    best = v;
                    x = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, best)
}

/// A pair whose distance is followed along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistancePair {
    States(QubitState, QubitState),
    Effects(QubitEffect, QubitEffect),
}

/// `D1(Φ_t[ρ], Φ_t[σ])` for a state pair or `D∞(Φ*_t[E], Φ*_t[F])` for an
/// effect pair, evaluated on explicit 2×2 matrices.
pub fn distance_trajectory(traj: &MapTrajectory, pair: &DistancePair) -> TrajectoryCurve {
    let (values, label) = match pair {
        DistancePair::States(rho, sigma) => {
            let v = traj
                .samples()
                .iter()
                .map(|m| {
                    let d = m.matrix() * (rho.r4() - sigma.r4());
                    bloch_operator(&d).trace_norm() / 2.0
                })
                .collect();
            (v, CurveLabel::D1)
        }
        DistancePair::Effects(e, f) => {
            let v = traj
                .samples()
                .iter()
                .map(|m| {
                    let d = m.matrix().transpose() * (e.a4() - f.a4());
                    bloch_operator(&d).op_norm()
                })
                .collect();
            (v, CurveLabel::Dinf)
        }
    };
    TrajectoryCurve {
        times: traj.times().to_vec(),
        values,
        label,
    }
}

/// Sum of the positive increments of a sampled curve: the integral of
/// `η̇` over the set where it is positive, with the sign of `η̇` decided on
/// each grid interval.
pub fn positive_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

/// Number of Fibonacci antipodal pairs screened for `N_S`.
pub const NS_CANDIDATES: usize = 200;
/// Number of effect differences screened for `N_H`.
pub const NH_CANDIDATES: usize = 500;
const REFINE_STARTS: usize = 5;
const REFINE_MIN_STEP: f64 = 1e-5;

/// Optimal pair found by [`nm_measure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureResult {
    pub value: f64,
    /// Schrödinger: Bloch direction `n` of the pair `±n`. Heisenberg: the
    /// effect difference `(δ0, δ)`.
    pub witness: Vector4<f64>,
}

/// `N_S` or `N_H` with the default candidate counts.
pub fn nm_measure(traj: &MapTrajectory, picture: Picture) -> MeasureResult {
    match picture {
        Picture::Schrodinger => nm_measure_with(traj, picture, NS_CANDIDATES),
        Picture::Heisenberg => nm_measure_with(traj, picture, NH_CANDIDATES),
    }
}

/// Maximizes the positive variation of the distance over a candidate family
/// of size about `candidates`, then refines the best five.
///
/// Schrödinger: antipodal pure states `±n`, for which `D1 = ‖Λn‖`.
/// Heisenberg: differences with `‖Δ‖_∞ = 1`, written `δ = s·n`,
/// `δ0 = 2 − s`; the distance is homogeneous in `Δ`, so the boundary is
/// enough, and `Δ → −Δ` leaves it unchanged, so `δ0 ≥ 0` is enough.
pub fn nm_measure_with(traj: &MapTrajectory, picture: Picture, candidates: usize) -> MeasureResult {
    let samples: Vec<_> = traj.samples().iter().map(|m| (m.lambda, m.v)).collect();
    match picture {
        Picture::Schrodinger => {
            let score = |theta: f64, phi: f64| {
                let n = spherical(theta, phi);
                let eta: Vec<f64> = samples.iter().map(|(l, _)| (l * n).norm()).collect();
                positive_variation(&eta)
            };
            let starts: Vec<Vec<f64>> = fibonacci_sphere(candidates)
                .iter()
                .map(|n| {
                    let (t, p) = angles(n);
                    vec![t, p]
                })
                .collect();
            let step = (4.0 / candidates as f64).sqrt();
            let (x, value) = screen_and_refine(|p| score(p[0], p[1]), starts, step, &[]);
            let n = spherical(x[0], x[1]);
            MeasureResult {
                value,
                witness: Vector4::new(0.0, n.x, n.y, n.z),
            }
        }
        Picture::Heisenberg => {
            let score = |theta: f64, phi: f64, s: f64| {
                let d = spherical(theta, phi) * s;
                let d0 = 2.0 - s;
                let eta: Vec<f64> = samples
                    .iter()
                    .map(|(l, v)| ((d0 + v.dot(&d)).abs() + (l.transpose() * d).norm()) / 2.0)
                    .collect();
                positive_variation(&eta)
            };
            let levels = 10;
            let dirs = (candidates / levels).max(1);
            let mut starts = Vec::with_capacity(dirs * levels);
            for n in fibonacci_sphere(dirs) {
                let (t, p) = angles(&n);
                for k in 0..levels {
                    starts.push(vec![t, p, 2.0 * (k + 1) as f64 / levels as f64]);
                }
            }
            let step = (4.0 / dirs as f64).sqrt();
            let (x, value) =
                screen_and_refine(|p| score(p[0], p[1], p[2]), starts, step, &[(2, 0.0, 2.0)]);
            let d = spherical(x[0], x[1]) * x[2];
            MeasureResult {
                value,
                witness: Vector4::new(2.0 - x[2], d.x, d.y, d.z),
            }
        }
    }
}

fn screen_and_refine(
    f: impl Fn(&[f64]) -> f64,
    starts: Vec<Vec<f64>>,
    step: f64,
    bounds: &[(usize, f64, f64)],
) -> (Vec<f64>, f64) {
    let mut scored: Vec<(f64, usize)> = starts.iter().enumerate().map(|(i, x)| (f(x), i)).collect();
    // Ties resolved by candidate index for determinism.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = (starts[scored[0].1].clone(), scored[0].0);
    for &(_, i) in scored.iter().take(REFINE_STARTS) {
        let (x, v) = pattern_search(&f, starts[i].clone(), step, REFINE_MIN_STEP, bounds);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// A maximal stretch where a curve increases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Revival {
    pub t_start: f64,
    pub t_end: f64,
    pub gain: f64,
}

/// Maximal runs of grid intervals whose difference quotient exceeds `tol`.
pub fn revival_intervals(curve: &TrajectoryCurve, tol: f64) -> Vec<Revival> {
    let mut out: Vec<Revival> = Vec::new();
    let mut open: Option<Revival> = None;
    for i in 0..curve.times.len().saturating_sub(1) {
        let (t0, t1) = (curve.times[i], curve.times[i + 1]);
        let dv = curve.values[i + 1] - curve.values[i];
        if dv / (t1 - t0) > tol {
            let r = open.get_or_insert(Revival {
                t_start: t0,
                t_end: t1,
                gain: 0.0,
            });
            r.t_end = t1;
            r.gain += dv;
        } else if let Some(r) = open.take() {
            out.push(r);
        }
    }
    out.extend(open);
    out
}

/// Effect pair whose operator distance starts to grow at the first
/// Heisenberg P-violation of the trajectory, or `None` if there is none.
///
/// At the first violating grid interval the right propagator sends some
/// state `r` outside the ball, to `w`; the operator `X = ŵ·σ` then has its
/// operator norm increased by the dual propagator. `X` is pulled back to
/// `t = 0` through `(Mᵀ)⁻¹`, rescaled to `‖Δ‖_∞ = 1` and split into effects.
pub fn heisenberg_revival_pair(
    traj: &MapTrajectory,
    tol: &Tolerances,
) -> Result<Option<(QubitEffect, QubitEffect)>> {
    let verdict = p_divisibility(traj, Picture::Heisenberg, tol)?;
    let Some(t) = verdict.first_violation_time else {
        return Ok(None);
    };
    let i = traj.index_of(t)?;
    let x = if traj.is_unital(1e-12) {
        // Top eigenvector of X_H: the direction whose norm grows fastest.
        let xh = crate::dynmap::negativity_matrix(traj, i, Picture::Heisenberg)?;
        let d = DMatrix::from_iterator(3, 3, xh.iter().copied());
        let eig = crate::smallmat::symmetric_eigen(&d);
        let col = eig.vectors.column(2);
        let u = traj.samples()[i].lambda * Vector3::new(col[0], col[1], col[2]);
        Vector4::new(0.0, u.x, u.y, u.z)
    } else {
        let prop = traj.propagator_between(i, i + 1, Side::Right)?;
        let r = max_image_norm(&prop.lambda, &prop.v, BALL_SAMPLES).argmax;
        let w = (prop.lambda * r + prop.v).normalize();
        Vector4::new(0.0, w.x, w.y, w.z)
    };
    let mt_inv = traj.samples()[i]
        .matrix()
        .transpose()
        .try_inverse()
        .ok_or(Error::Singular {
            t,
            det: traj.samples()[i].determinant(),
        })?;
    let x0 = mt_inv * x;
    let scale = 2.0 * op_norm_bloch(&x0);
    let d = EffectDifference::new(x0[0] / scale, x0.fixed_rows::<3>(1) / scale)?;
    Ok(Some(d.split()))
}

/// Closed system-environment dynamics of two qubits: `H_SE` with an
/// environment state `ρ_E`, a system state `ρ_S` (to reduce Heisenberg
/// operators onto the environment), an initial effect pair and an initial
/// state pair on the system.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationModel {
    pub hamiltonian: HermitianMatrix,
    pub env_state: QubitState,
    pub sys_state: QubitState,
    pub effects: (QubitEffect, QubitEffect),
    pub states: (QubitState, QubitState),
}

/// Both sides of one revival bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationBounds {
    /// Trace-distance revival bound.
    pub schrodinger: BoundCheck,
    /// Operator-distance revival bound.
    pub heisenberg: BoundCheck,
}

/// Slack added to the right-hand side when deciding `holds`.
pub const BOUND_TOL: f64 = 1e-9;

fn herm(x: DMatrix<C64>) -> HermitianMatrix {
    HermitianMatrix::with_tolerance((&x + x.adjoint()).scale(0.5), 1e-9)
        .expect("Hermitian by construction")
}

fn mat(h: &HermitianMatrix) -> DMatrix<C64> {
    h.matrix().clone()
}

/// Evaluates the trace-distance and operator-distance revival bounds from
/// `s` to `t` for the reduced dynamics of `m`.
pub fn dilation_bound_check(m: &DilationModel, s: f64, t: f64) -> Result<DilationBounds> {
    if m.hamiltonian.dim() != 4 {
        return Err(Error::validation("dilation Hamiltonian must be 4x4"));
    }
    if !(0.0 <= s && s <= t) {
        return Err(Error::validation(format!(
            "need 0 <= s <= t, got s = {s}, t = {t}"
        )));
    }
    let id2 = DMatrix::<C64>::identity(2, 2);
    let rho_e = mat(&m.env_state.matrix());
    let rho_s = mat(&m.sys_state.matrix());

    // Schrödinger side: ρ_SE(τ) = U (ρ_S ⊗ ρ_E) U†.
    let evolve_state = |rho: &QubitState, tau: f64| {
        let u = unitary_evolution(&m.hamiltonian, tau);
        let full = &u * kron(&mat(&rho.matrix()), &rho_e) * u.adjoint();
        let sys = ptrace_second(&full);
        let env = ptrace_first(&full);
        (full, sys, env)
    };
    let sd = |a: &DMatrix<C64>, b: &DMatrix<C64>| herm(a - b).trace_norm() / 2.0;
    let (_, s1t, _) = evolve_state(&m.states.0, t);
    let (_, s2t, _) = evolve_state(&m.states.1, t);
    let (f1, s1s, e1s) = evolve_state(&m.states.0, s);
    let (f2, s2s, e2s) = evolve_state(&m.states.1, s);
    let lhs = sd(&s1t, &s2t) - sd(&s1s, &s2s);
    let rhs = sd(&e1s, &e2s) + sd(&f1, &kron(&s1s, &e1s)) + sd(&f2, &kron(&s2s, &e2s));
    let schrodinger = BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_TOL,
    };

    // Heisenberg side: X_SE(τ) = U† (X ⊗ 𝟙) U, reduced with ρ_E and ρ_S.
    let evolve_effect = |x: &QubitEffect, tau: f64| {
        let u = unitary_evolution(&m.hamiltonian, tau);
        let full = u.adjoint() * kron(&mat(&x.matrix()), &id2) * &u;
        let sys = ptrace_second(&(kron(&id2, &rho_e) * &full));
        let env = ptrace_first(&(kron(&rho_s, &id2) * &full));
        (full, sys, env)
    };
    let od = |a: &DMatrix<C64>, b: &DMatrix<C64>| herm(a - b).op_norm();
    let (_, x1t, _) = evolve_effect(&m.effects.0, t);
    let (_, x2t, _) = evolve_effect(&m.effects.1, t);
    let (g1, x1s, y1s) = evolve_effect(&m.effects.0, s);
    let (g2, x2s, y2s) = evolve_effect(&m.effects.1, s);
    let lhs = od(&x1t, &x2t) - od(&x1s, &x2s);
    let rhs = od(&y1s, &y2s) + od(&g1, &kron(&x1s, &y1s)) + od(&g2, &kron(&x2s, &y2s));
    let heisenberg = BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_TOL,
    };

    Ok(DilationBounds {
        schrodinger,
        heisenberg,
    })
}

/// Random dilation: Gaussian Hermitian `H_SE` and uniformly random states
/// and effects.
pub fn random_dilation<R: rand::Rng + ?Sized>(rng: &mut R) -> DilationModel {
    use crate::random;
    DilationModel {
        hamiltonian: random::hermitian(rng, 4, 1.0),
        env_state: random::state(rng),
        sys_state: random::state(rng),
        effects: (random::effect(rng), random::effect(rng)),
        states: (random::state(rng), random::state(rng)),
    }
}
