//! Dynamical-map trajectories, left/right generators, propagators and
//! divisibility verdicts in both pictures.
//!
//! Conventions on the 4×4 Bloch form:
//!
//! * left generator `M_𝓛 = Ṁ M⁻¹`, right generator `M_𝓡 = M⁻¹ Ṁ`;
//! * Heisenberg generators are the transposes, `M_{𝓛*} = M_𝓛ᵀ`, `M_{𝓡*} = M_𝓡ᵀ`;
//! * left propagator `Φ^L_{t,s} = M(t) M(s)⁻¹` (Schrödinger evolution between
//!   intermediate times), right propagator `Φ^R_{t,s} = M(s)⁻¹ M(t)` (its dual
//!   evolves effects between intermediate times).

use std::fmt;

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3};
use rand::Rng;

use crate::bloch::{max_image_norm, BlochAffine, BALL_SAMPLES};
use crate::smallmat::{choi_from_bloch_matrix, symmetric_eigen, C64};
use crate::{Error, Result, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Picture {
    Schrodinger,
    Heisenberg,
}

impl fmt::Display for Picture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Picture::Schrodinger => "schrodinger",
            Picture::Heisenberg => "heisenberg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    P,
    CP,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::P => "P",
            Criterion::CP => "CP",
        })
    }
}

/// A time-dependent qubit map `t ↦ Φ_t` with optional analytic derivative.
pub trait DynamicalModel: Send + Sync {
    fn name(&self) -> String;

    fn map_at(&self, t: f64) -> Result<BlochAffine>;

    /// `dM/dt`; at a kink this must be the right derivative.
    fn derivative_at(&self, _t: f64) -> Option<Matrix4<f64>> {
        None
    }

    /// Times where the map is continuous but not differentiable.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Uniform time grid `t_start = t_0 < ... < t_{steps-1} = t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            t_start: 0.0,
            t_end: 10.0,
            steps: 2001,
        }
    }
}

impl Grid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::validation(format!(
                "grid needs at least 2 points, got {steps}"
            )));
        }
        if !(t_start.is_finite() && t_end.is_finite()) || t_start >= t_end {
            return Err(Error::validation(format!(
                "grid needs t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        Ok(Grid {
            t_start,
            t_end,
            steps,
        })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.steps - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let f = i as f64 / n;
                self.t_start * (1.0 - f) + self.t_end * f
            })
            .collect()
    }

    /// Same interval with the step halved.
    pub fn refined(&self) -> Grid {
        Grid {
            steps: 2 * self.steps - 1,
            ..*self
        }
    }
}

/// Samples of a dynamical map on a uniform grid, with the derivative at
/// every sample.
#[derive(Debug, Clone)]
pub struct MapTrajectory {
    name: String,
    times: Vec<f64>,
    samples: Vec<BlochAffine>,
    derivatives: Vec<Matrix4<f64>>,
    kinks: Vec<usize>,
    dt: f64,
    analytic: bool,
}

impl MapTrajectory {
    /// Samples `model` on `grid`. Kinks inside the grid must fall on grid
    /// points; derivatives come from the model when it provides them and
    /// from second-order finite differences otherwise.
    pub fn from_model(model: &dyn DynamicalModel, grid: &Grid) -> Result<Self> {
        let times = grid.times();
        let kinks = locate_kinks(&times, &model.kinks(), grid.dt())?;
        let samples = times
            .iter()
            .map(|&t| model.map_at(t))
            .collect::<Result<Vec<_>>>()?;
        let analytic: Option<Vec<Matrix4<f64>>> =
            times.iter().map(|&t| model.derivative_at(t)).collect();
        let mut traj = MapTrajectory {
            name: model.name(),
            times,
            samples,
            derivatives: Vec::new(),
            kinks,
            dt: grid.dt(),
            analytic: analytic.is_some(),
        };
        traj.check_origin()?;
        traj.derivatives = match analytic {
            Some(d) => d,
            None => traj.finite_differences(),
        };
        Ok(traj)
    }

    /// Builds a trajectory from raw samples; derivatives by finite differences.
    pub fn from_samples(name: &str, times: Vec<f64>, samples: Vec<BlochAffine>) -> Result<Self> {
        if times.len() != samples.len() || times.len() < 3 {
            return Err(Error::validation(
                "trajectory needs at least 3 samples with matching times",
            ));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let tol = Tolerances::default().grid;
        for (i, w) in times.windows(2).enumerate() {
            if w[0].is_nan() || w[1].is_nan() || w[1] <= w[0] {
                return Err(Error::validation(format!(
                    "times not increasing at index {i}"
                )));
            }
            if ((w[1] - w[0]) - dt).abs() > tol * dt.abs().max(1.0) {
                return Err(Error::validation(format!(
                    "grid spacing not uniform at index {i}"
                )));
            }
        }
        let mut traj = MapTrajectory {
            name: name.to_string(),
            times,
            samples,
            derivatives: Vec::new(),
            kinks: Vec::new(),
            dt,
            analytic: false,
        };
        traj.check_origin()?;
        traj.derivatives = traj.finite_differences();
        Ok(traj)
    }

    /// Copy whose derivatives are recomputed by finite differences of the samples.
    pub fn with_finite_differences(&self) -> Self {
        let mut t = self.clone();
        t.derivatives = t.finite_differences();
        t.analytic = false;
        t
    }

    fn check_origin(&self) -> Result<()> {
        if self.times[0] == 0.0 {
            let dev = (self.samples[0].matrix() - Matrix4::identity()).amax();
            if dev > 1e-12 {
                return Err(Error::validation(format!(
                    "map at t = 0 must be the identity (deviation {dev:e})"
                )));
            }
        }
        Ok(())
    }

    fn finite_differences(&self) -> Vec<Matrix4<f64>> {
        let n = self.samples.len();
        let m: Vec<Matrix4<f64>> = self.samples.iter().map(|s| s.matrix()).collect();
        let h = self.dt;
        (0..n)
            .map(|i| {
                let at_kink = self.kinks.binary_search(&i).is_ok();
                if (i == 0 || at_kink) && i + 2 < n {
                    (m[i + 1] * 4.0 - m[i] * 3.0 - m[i + 2]) / (2.0 * h)
                } else if i == n - 1 || i == 0 {
                    (m[i] * 3.0 - m[i - 1] * 4.0 + m[i - 2]) / (2.0 * h)
                } else if at_kink {
                    (m[i] - m[i - 1]) / h
                } else {
                    (m[i + 1] - m[i - 1]) / (2.0 * h)
                }
            })
            .collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[BlochAffine] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.analytic
    }

    /// Grid indices of the model's kinks.
    pub fn kink_indices(&self) -> &[usize] {
        &self.kinks
    }

    pub fn derivative(&self, i: usize) -> Matrix4<f64> {
        self.derivatives[i]
    }

    /// Index of the grid point equal to `t` (to a hundredth of a step).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let pos = (t - self.times[0]) / self.dt;
        let i = pos.round();
        if i < 0.0 || i as usize >= self.len() || (pos - i).abs() > 1e-2 {
            return Err(Error::validation(format!("t = {t} is not a grid point")));
        }
        Ok(i as usize)
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.samples.iter().all(|s| s.is_unital(tol))
    }

    fn inverse_at(&self, i: usize) -> Result<Matrix4<f64>> {
        let tol = Tolerances::default().invertibility;
        let det = self.samples[i].determinant();
        let inv = self.samples[i].inverse(tol).ok_or(Error::Singular {
            t: self.times[i],
            det,
        })?;
        Ok(inv.matrix())
    }

    /// `M_𝓛 = Ṁ M⁻¹` at grid index `i`.
    pub fn left_generator_at(&self, i: usize) -> Result<Matrix4<f64>> {
        Ok(self.derivatives[i] * self.inverse_at(i)?)
    }

    /// `M_𝓡 = M⁻¹ Ṁ` at grid index `i`.
    pub fn right_generator_at(&self, i: usize) -> Result<Matrix4<f64>> {
        Ok(self.inverse_at(i)? * self.derivatives[i])
    }

    /// Propagator between grid indices `s ≤ t`.
    pub fn propagator_between(&self, s: usize, t: usize, side: Side) -> Result<BlochAffine> {
        if s > t {
            return Err(Error::validation(format!(
                "propagator needs s <= t, got {s} > {t}"
            )));
        }
        let inv = self.inverse_at(s)?;
        let mt = self.samples[t].matrix();
        let p = match side {
            Side::Left => mt * inv,
            Side::Right => inv * mt,
        };
        BlochAffine::from_matrix(&p)
    }
}

fn locate_kinks(times: &[f64], kinks: &[f64], dt: f64) -> Result<Vec<usize>> {
    let (first, last) = (times[0], times[times.len() - 1]);
    let mut out = Vec::new();
    for &k in kinks {
        if k <= first || k >= last {
            continue;
        }
        let pos = (k - first) / dt;
        let i = pos.round();
        if (times[i as usize] - k).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::validation(format!(
                "grid must contain the model's kink at t = {k}; choose steps so that it is a grid point"
            )));
        }
        out.push(i as usize);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// A generator matrix in Bloch form at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSample {
    pub time: f64,
    pub matrix: Matrix4<f64>,
    pub picture: Picture,
    pub side: Side,
}

pub fn left_generator(traj: &MapTrajectory, t: f64) -> Result<GeneratorSample> {
    let i = traj.index_of(t)?;
    Ok(GeneratorSample {
        time: traj.times[i],
        matrix: traj.left_generator_at(i)?,
        picture: Picture::Schrodinger,
        side: Side::Left,
    })
}

pub fn right_generator(traj: &MapTrajectory, t: f64) -> Result<GeneratorSample> {
    let i = traj.index_of(t)?;
    Ok(GeneratorSample {
        time: traj.times[i],
        matrix: traj.right_generator_at(i)?,
        picture: Picture::Schrodinger,
        side: Side::Right,
    })
}

/// `(𝓛*_t, 𝓡*_t)`: transposes of the Schrödinger generator matrices.
pub fn heisenberg_generators(
    traj: &MapTrajectory,
    t: f64,
) -> Result<(GeneratorSample, GeneratorSample)> {
    let l = left_generator(traj, t)?;
    let r = right_generator(traj, t)?;
    Ok((
        GeneratorSample {
            matrix: l.matrix.transpose(),
            picture: Picture::Heisenberg,
            ..l
        },
        GeneratorSample {
            matrix: r.matrix.transpose(),
            picture: Picture::Heisenberg,
            ..r
        },
    ))
}

pub fn propagator(traj: &MapTrajectory, s: f64, t: f64, side: Side) -> Result<BlochAffine> {
    traj.propagator_between(traj.index_of(s)?, traj.index_of(t)?, side)
}

/// Max-entry norm of `[M_𝓛(t), M_𝓛(t')]`.
pub fn commutativity_defect(traj: &MapTrajectory, t: f64, t_prime: f64) -> Result<f64> {
    let a = left_generator(traj, t)?.matrix;
    let b = left_generator(traj, t_prime)?.matrix;
    Ok((a * b - b * a).amax())
}

/// Outcome of a divisibility test over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisibilityVerdict {
    pub picture: Picture,
    pub criterion: Criterion,
    pub divisible: bool,
    /// Grid time at which the first violation was found.
    pub first_violation_time: Option<f64>,
    /// CP: the most negative Choi eigenvalue. P on unital maps: the largest
    /// eigenvalue of `X_S` / `X_H`. P on non-unital maps: the largest excess
    /// of `‖Λr + v‖` over 1 across infinitesimal propagators.
    pub worst_value: f64,
}

/// CP-divisibility: every consecutive-grid propagator (left for Schrödinger,
/// right for Heisenberg) must have a PSD Choi matrix.
pub fn cp_divisibility(
    traj: &MapTrajectory,
    picture: Picture,
    tol: &Tolerances,
) -> Result<DivisibilityVerdict> {
    let side = propagator_side(picture);
    let mut worst = f64::INFINITY;
    let mut first = None;
    for i in 0..traj.len() - 1 {
        let prop = traj.propagator_between(i, i + 1, side)?;
        let min = choi_from_bloch_matrix(&prop.matrix())?.min_eigval();
        if min < -tol.verdict && first.is_none() {
            first = Some(traj.times[i]);
        }
        worst = worst.min(min);
    }
    Ok(DivisibilityVerdict {
        picture,
        criterion: Criterion::CP,
        divisible: worst >= -tol.verdict,
        first_violation_time: first,
        worst_value: worst,
    })
}

fn propagator_side(picture: Picture) -> Side {
    match picture {
        Picture::Schrodinger => Side::Left,
        Picture::Heisenberg => Side::Right,
    }
}

/// `X_S = Λ̇Λ⁻¹ + (Λ̇Λ⁻¹)ᵀ` or `X_H = Λ⁻¹Λ̇ + (Λ⁻¹Λ̇)ᵀ` at grid index `i`.
pub fn negativity_matrix(traj: &MapTrajectory, i: usize, picture: Picture) -> Result<Matrix3<f64>> {
    let g = match picture {
        Picture::Schrodinger => traj.left_generator_at(i)?,
        Picture::Heisenberg => traj.right_generator_at(i)?,
    };
    let block: Matrix3<f64> = g.fixed_view::<3, 3>(1, 1).into_owned();
    Ok(block + block.transpose())
}

pub fn max_symmetric_eigval(x: &Matrix3<f64>) -> f64 {
    let d = nalgebra::DMatrix::from_iterator(3, 3, x.iter().copied());
    *symmetric_eigen(&d).values.last().expect("3 eigenvalues")
}

/// P-divisibility. Unital trajectories use the negativity of `X_S` / `X_H`
/// at every grid point; non-unital ones test that every consecutive-grid
/// propagator maps the Bloch ball into itself.
pub fn p_divisibility(
    traj: &MapTrajectory,
    picture: Picture,
    tol: &Tolerances,
) -> Result<DivisibilityVerdict> {
    let mut worst = f64::NEG_INFINITY;
    let mut first = None;
    let limit;
    if traj.is_unital(1e-12) {
        limit = tol.verdict;
        for i in 0..traj.len() {
            let x = negativity_matrix(traj, i, picture)?;
            let top = max_symmetric_eigval(&x);
            if top > limit && first.is_none() {
                first = Some(traj.times[i]);
            }
            worst = worst.max(top);
        }
    } else {
        limit = tol.ball;
        let side = propagator_side(picture);
        for i in 0..traj.len() - 1 {
            let prop = traj.propagator_between(i, i + 1, side)?;
            let excess = max_image_norm(&prop.lambda, &prop.v, BALL_SAMPLES).max_norm - 1.0;
            if excess > limit && first.is_none() {
                first = Some(traj.times[i]);
            }
            worst = worst.max(excess);
        }
    }
    Ok(DivisibilityVerdict {
        picture,
        criterion: Criterion::P,
        divisible: worst <= limit,
        first_violation_time: first,
        worst_value: worst,
    })
}

/// Outcome of the sampled Kossakowski test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KossakowskiCheck {
    pub passes: bool,
    /// Smallest `Σ_α γ_α |⟨φ_μ|L_α|φ_μ'⟩|²` found.
    pub worst: f64,
}

/// Evaluates `Σ_α γ_α |⟨φ_μ|L_α|φ_μ'⟩|²` for `μ ≠ μ'` over `n_bases`
/// Haar-random qubit bases. A negative value refutes P-divisibility; a
/// pass is only as strong as the sampling.
pub fn kossakowski_p_check<R: Rng + ?Sized>(
    rates: &[(f64, Matrix2<C64>)],
    n_bases: usize,
    tol: f64,
    rng: &mut R,
) -> KossakowskiCheck {
    let mut worst = f64::INFINITY;
    for _ in 0..n_bases {
        let n = crate::random::unit_vector(rng);
        let (up, down) = basis_along(&n);
        for (a, b) in [(&up, &down), (&down, &up)] {
            let value: f64 = rates
                .iter()
                .map(|(g, op)| {
                    let amp: C64 = (a.adjoint() * op * b)[(0, 0)];
                    g * amp.norm_sqr()
                })
                .sum();
            worst = worst.min(value);
        }
    }
    KossakowskiCheck {
        passes: worst >= -tol,
        worst,
    }
}

/// Orthonormal qubit basis `{|n⟩, |−n⟩}` for a unit Bloch direction `n`.
pub fn basis_along(n: &Vector3<f64>) -> (nalgebra::Vector2<C64>, nalgebra::Vector2<C64>) {
    let theta = n.z.clamp(-1.0, 1.0).acos();
    let phi = n.y.atan2(n.x);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = C64::from_polar(1.0, phi);
    let up = nalgebra::Vector2::new(C64::new(c, 0.0), e * s);
    let down = nalgebra::Vector2::new(-e.conj() * s, C64::new(c, 0.0));
    (up, down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::smallmat::{pauli, sigma_minus, sigma_plus};

    /// `Λ(t) = e^{-ct} 𝟙`, `v = 0`.
    struct Isotropic(f64);

    impl DynamicalModel for Isotropic {
        fn name(&self) -> String {
            "isotropic".into()
        }
        fn map_at(&self, t: f64) -> Result<BlochAffine> {
            BlochAffine::new(Vector3::zeros(), Matrix3::identity() * (-self.0 * t).exp())
        }
        fn derivative_at(&self, t: f64) -> Option<Matrix4<f64>> {
            let mut d = Matrix4::zeros();
            for k in 1..4 {
                d[(k, k)] = -self.0 * (-self.0 * t).exp();
            }
            Some(d)
        }
    }

    /// Same dynamics without an analytic derivative.
    struct IsotropicSampled(f64);

    impl DynamicalModel for IsotropicSampled {
        fn name(&self) -> String {
            "isotropic-sampled".into()
        }
        fn map_at(&self, t: f64) -> Result<BlochAffine> {
            Isotropic(self.0).map_at(t)
        }
    }

    #[test]
    fn grid_construction() {
        let g = Grid::default();
        let ts = g.times();
        assert_eq!(ts.len(), 2001);
        assert_eq!(ts[200], 1.0);
        assert_eq!(ts[2000], 10.0);
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert_eq!(g.refined().dt(), g.dt() / 2.0);
    }

    #[test]
    fn semigroup_generators_are_constant_and_equal() {
        let traj =
            MapTrajectory::from_model(&Isotropic(1.0), &Grid::new(0.0, 3.0, 301).unwrap()).unwrap();
        for t in [0.0, 0.5, 2.0, 3.0] {
            let l = left_generator(&traj, t).unwrap().matrix;
            let r = right_generator(&traj, t).unwrap().matrix;
            let mut expect = Matrix4::zeros();
            for k in 1..4 {
                expect[(k, k)] = -1.0;
            }
            assert!((l - expect).amax() < 1e-12);
            assert_eq!(l, r);
            let (ls, rs) = heisenberg_generators(&traj, t).unwrap();
            assert_eq!(ls.matrix, rs.matrix);
            assert_eq!(ls.picture, Picture::Heisenberg);
        }
        assert!(commutativity_defect(&traj, 0.5, 2.5).unwrap() < 1e-15);
    }

    #[test]
    fn finite_differences_are_second_order() {
        let grid = Grid::new(0.0, 2.0, 201).unwrap();
        let err = |g: &Grid| {
            let t = MapTrajectory::from_model(&IsotropicSampled(1.3), g).unwrap();
            assert!(!t.has_analytic_derivatives());
            (0..t.len())
                .map(|i| {
                    let exact = Isotropic(1.3).derivative_at(t.times()[i]).unwrap();
                    (t.derivative(i) - exact).amax()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(&grid) / err(&grid.refined());
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn propagator_identities() {
        let traj =
            MapTrajectory::from_model(&Isotropic(0.7), &Grid::new(0.0, 2.0, 21).unwrap()).unwrap();
        let same = propagator(&traj, 1.0, 1.0, Side::Left).unwrap();
        assert!((same.matrix() - Matrix4::identity()).amax() < 1e-14);
        let phi = traj.samples()[15];
        for side in [Side::Left, Side::Right] {
            let p = propagator(&traj, 0.0, 1.5, side).unwrap();
            assert!((p.matrix() - phi.matrix()).amax() < 1e-14);
        }
        assert!(propagator(&traj, 1.5, 1.0, Side::Left).is_err());
        assert!(propagator(&traj, 0.05, 1.0, Side::Left).is_err());
    }

    #[test]
    fn isotropic_decay_is_divisible_everywhere() {
        let traj =
            MapTrajectory::from_model(&Isotropic(1.0), &Grid::new(0.0, 5.0, 501).unwrap()).unwrap();
        let tol = Tolerances::default();
        for pic in [Picture::Schrodinger, Picture::Heisenberg] {
            let p = p_divisibility(&traj, pic, &tol).unwrap();
            assert!(p.divisible);
            assert!(
                (p.worst_value + 2.0).abs() < 1e-12,
                "X = -2·𝟙, got {}",
                p.worst_value
            );
            let cp = cp_divisibility(&traj, pic, &tol).unwrap();
            assert!(cp.divisible && cp.first_violation_time.is_none());
        }
    }

    #[test]
    fn singular_maps_are_reported() {
        struct Collapse;
        impl DynamicalModel for Collapse {
            fn name(&self) -> String {
                "collapse".into()
            }
            fn map_at(&self, t: f64) -> Result<BlochAffine> {
                let l = (1.0 - t).max(0.0);
                BlochAffine::new(Vector3::zeros(), Matrix3::identity() * l)
            }
        }
        let traj = MapTrajectory::from_model(&Collapse, &Grid::new(0.0, 2.0, 21).unwrap()).unwrap();
        let err = p_divisibility(&traj, Picture::Schrodinger, &Tolerances::default()).unwrap_err();
        match err {
            Error::Singular { t, .. } => assert!((t - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kink_must_be_on_grid() {
        struct Kinked;
        impl DynamicalModel for Kinked {
            fn name(&self) -> String {
                "kinked".into()
            }
            fn map_at(&self, _t: f64) -> Result<BlochAffine> {
                Ok(BlochAffine::identity())
            }
            fn kinks(&self) -> Vec<f64> {
                vec![1.0]
            }
        }
        assert!(MapTrajectory::from_model(&Kinked, &Grid::new(0.0, 3.0, 31).unwrap()).is_ok());
        let off = MapTrajectory::from_model(&Kinked, &Grid::new(0.0, 3.0, 32).unwrap());
        assert!(matches!(off, Err(Error::Validation(_))));
    }

    // Analytic minimum of γ₊u² + γ₋(1−u)² + 4γ_z u(1−u) over u ∈ [0, 1].
    fn kossakowski_oracle(gp: f64, gm: f64, gz: f64) -> f64 {
        (0..=100_000)
            .map(|k| {
                let u = k as f64 / 100_000.0;
                gp * u * u + gm * (1.0 - u) * (1.0 - u) + 4.0 * gz * u * (1.0 - u)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn phase_covariant_ops(gp: f64, gm: f64, gz: f64) -> Vec<(f64, Matrix2<C64>)> {
        vec![(gp, sigma_plus()), (gm, sigma_minus()), (gz, pauli(3))]
    }

    #[test]
    fn kossakowski_positive_rates_pass() {
        let mut rng = random::seeded(1);
        let k = kossakowski_p_check(&phase_covariant_ops(0.3, 0.7, 0.1), 500, 1e-12, &mut rng);
        assert!(k.passes && k.worst >= 0.0);
    }

    #[test]
    fn kossakowski_matches_phase_covariant_condition() {
        let mut rng = random::seeded(2);
        let (gp, gm) = (0.8, 0.2);
        let edge = -f64::sqrt(gp * gm) / 2.0;
        let ok = kossakowski_p_check(
            &phase_covariant_ops(gp, gm, edge + 0.01),
            2000,
            1e-12,
            &mut rng,
        );
        assert!(ok.passes, "{ok:?}");
        let bad = kossakowski_p_check(
            &phase_covariant_ops(gp, gm, edge - 0.05),
            2000,
            1e-12,
            &mut rng,
        );
        assert!(!bad.passes);
        let oracle = kossakowski_oracle(gp, gm, edge - 0.05);
        assert!(oracle < 0.0);
        assert!(
            bad.worst >= oracle - 1e-9 && bad.worst < 0.5 * oracle,
            "{} vs {oracle}",
            bad.worst
        );
    }
}
