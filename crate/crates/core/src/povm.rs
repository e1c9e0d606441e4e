//! Binary qubit POVMs: joint measurability, the incompatibility monotones
//! `I_p` and `I_steer`, sharpness, and their evolution under dual maps.
//!
//! A joint observable for `M = (M_y, M_n)` and `N = (N_y, N_n)` is four
//! effects `G_ij ≥ 0` with `Σ_j G_ij = M_i` and `Σ_i G_ij = N_j`. In Bloch
//! coefficients `G = ½(g0 𝟙 + g·σ)` the Hilbert-Schmidt inner product is
//! Euclidean up to a constant, positivity is the second-order cone
//! `g0 ≥ ‖g‖`, and the marginal conditions are a 2×2 transportation
//! constraint per coordinate. Feasibility is decided by Dykstra's
//! alternating projections between the two sets.

use nalgebra::{Vector3, Vector4};

use crate::bloch::QubitEffect;
use crate::dynmap::MapTrajectory;
use crate::witness::{op_norm_bloch, CurveLabel, TrajectoryCurve};
use crate::{Error, Result};

/// Binary POVM `(E, 𝟙 − E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryPovm {
    pub e: QubitEffect,
}

impl BinaryPovm {
    pub fn new(e: QubitEffect) -> Self {
        BinaryPovm { e }
    }

    /// Sharp measurement along the unit vector `n`.
    pub fn projective(n: Vector3<f64>) -> Result<Self> {
        Ok(BinaryPovm {
            e: QubitEffect::projector(n)?,
        })
    }

    /// Element `i` (0 for `E`, 1 for `𝟙 − E`).
    pub fn element(&self, i: usize) -> QubitEffect {
        if i == 0 {
            self.e
        } else {
            self.e.complement()
        }
    }

    /// Heisenberg-evolved POVM, `E ↦ Φ*[E]` with `Φ*` given by `Mᵀ`.
    pub fn evolve(&self, m: &nalgebra::Matrix4<f64>) -> Result<Self> {
        Ok(BinaryPovm {
            e: QubitEffect::from_a4(&(m.transpose() * self.e.a4()))?,
        })
    }
}

/// Four effects `G_ij`, `i` indexing the outcome of the first POVM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointObservable {
    pub g: [[Vector4<f64>; 2]; 2],
}

impl JointObservable {
    /// Largest deviation of the marginals from `(M, N)`.
    pub fn marginal_error(&self, m: &BinaryPovm, n: &BinaryPovm) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let row = self.g[i][0] + self.g[i][1];
            let col = self.g[0][i] + self.g[1][i];
            err = err.max((row - m.element(i).a4()).amax());
            err = err.max((col - n.element(i).a4()).amax());
        }
        err
    }

    /// Smallest eigenvalue among the four elements.
    pub fn min_eigenvalue(&self) -> f64 {
        self.g
            .iter()
            .flatten()
            .map(|x| (x[0] - x.fixed_rows::<3>(1).norm()) / 2.0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of the feasibility solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub residual: f64,
    pub iterations: usize,
    /// Witness, present when feasible.
    pub joint: Option<JointObservable>,
}

pub const FEASIBILITY_TOL: f64 = 1e-7;
pub const MAX_ITERATIONS: usize = 5000;
const PLATEAU_WINDOW: usize = 200;
const PLATEAU_RATIO: f64 = 1e-12;
/// Absolute precision of the incompatibility bisections.
pub const BISECTION_TOL: f64 = 1e-4;

type Block = [[Vector4<f64>; 2]; 2];

fn cone_projection(x: &Vector4<f64>) -> Vector4<f64> {
    let g0 = x[0];
    let g = x.fixed_rows::<3>(1).into_owned();
    let n = g.norm();
    if n <= g0 {
        *x
    } else if n <= -g0 {
        Vector4::zeros()
    } else {
        let a = (g0 + n) / 2.0;
        let v = g * (a / n);
        Vector4::new(a, v.x, v.y, v.z)
    }
}

fn project_cone(x: &Block) -> Block {
    let mut out = *x;
    for row in out.iter_mut() {
        for g in row.iter_mut() {
            *g = cone_projection(g);
        }
    }
    out
}

fn project_marginals(x: &Block, m: &[Vector4<f64>; 2], n: &[Vector4<f64>; 2]) -> Block {
    let total = m[0] + m[1];
    let rows = [x[0][0] + x[0][1], x[1][0] + x[1][1]];
    let cols = [x[0][0] + x[1][0], x[0][1] + x[1][1]];
    let sum = rows[0] + rows[1];
    let mut out = *x;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] =
                x[i][j] - (rows[i] - m[i]) / 2.0 - (cols[j] - n[j]) / 2.0 + (sum - total) / 4.0;
        }
    }
    out
}

fn distance(a: &Block, b: &Block) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn add(a: &Block, b: &Block, sign: f64) -> Block {
    let mut out = *a;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] += b[i][j] * sign;
        }
    }
    out
}

/// Decides joint measurability of two binary POVMs.
///
/// Returns feasible when a point satisfying the marginals lies within
/// `1e-7` of the positive cone. A run that stalls (relative improvement
/// below `1e-12` over 200 iterations) or exhausts 5000 iterations is
/// reported infeasible with its last residual.
pub fn jointly_measurable(m: &BinaryPovm, n: &BinaryPovm) -> Feasibility {
    let ma = [m.element(0).a4(), m.element(1).a4()];
    let na = [n.element(0).a4(), n.element(1).a4()];
    let quarter_id = Vector4::new(0.5, 0.0, 0.0, 0.0);
    let mut x: Block = [[Vector4::zeros(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            x[i][j] = (ma[i] + na[j]) / 2.0 - quarter_id;
        }
    }
    let zero: Block = [[Vector4::zeros(); 2]; 2];
    let (mut p, mut q) = (zero, zero);
    let mut history: Vec<f64> = Vec::with_capacity(MAX_ITERATIONS + 1);
    for it in 0..=MAX_ITERATIONS {
        let residual = distance(&x, &project_cone(&x));
        if residual < FEASIBILITY_TOL {
            return Feasibility {
                feasible: true,
                residual,
                iterations: it,
                joint: Some(JointObservable { g: x }),
            };
        }
        history.push(residual);
        if it >= PLATEAU_WINDOW {
            let old = history[it - PLATEAU_WINDOW];
            if (old - residual) <= PLATEAU_RATIO * old {
                return Feasibility {
                    feasible: false,
                    residual,
                    iterations: it,
                    joint: None,
                };
            }
        }
        if it == MAX_ITERATIONS {
            break;
        }
        let y = project_cone(&add(&x, &p, 1.0));
        p = add(&add(&x, &p, 1.0), &y, -1.0);
        let next = project_marginals(&add(&y, &q, 1.0), &ma, &na);
        q = add(&add(&y, &q, 1.0), &next, -1.0);
        x = next;
    }
    let residual = *history.last().expect("at least one iteration");
    Feasibility {
        feasible: false,
        residual,
        iterations: MAX_ITERATIONS,
        joint: None,
    }
}

/// Compatibility of unbiased POVMs `½(𝟙 ± m·σ)`, `½(𝟙 ± n·σ)`:
/// `‖m + n‖ + ‖m − n‖ ≤ 2`.
pub fn unbiased_compatible(m: &Vector3<f64>, n: &Vector3<f64>) -> bool {
    (m + n).norm() + (m - n).norm() <= 2.0
}

/// `M_i ↦ (1 − λ)M_i + λ p_i 𝟙`.
pub fn mix_with_identity(m: &BinaryPovm, lambda: f64, p: (f64, f64)) -> Result<BinaryPovm> {
    let e = m.e;
    let a0 = (1.0 - lambda) * e.a0() + 2.0 * lambda * p.0;
    Ok(BinaryPovm {
        e: QubitEffect::new(a0, e.alpha() * (1.0 - lambda))?,
    })
}

/// `M_i ↦ (1 − λ)M_i + λ tr(M_i) 𝟙/2`.
pub fn mix_with_depolarized(m: &BinaryPovm, lambda: f64) -> Result<BinaryPovm> {
    let e = m.e;
    Ok(BinaryPovm {
        e: QubitEffect::new(e.a0(), e.alpha() * (1.0 - lambda))?,
    })
}

fn bisect(feasible_at: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    if feasible_at(0.0)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest mixing `λ` with `p_i 𝟙` that makes the pair compatible.
pub fn incompat_p(m: &BinaryPovm, n: &BinaryPovm, p: (f64, f64)) -> Result<f64> {
    if !(p.0 >= 0.0 && p.1 >= 0.0 && (p.0 + p.1 - 1.0).abs() < 1e-12) {
        return Err(Error::validation(format!(
            "p must be a probability pair, got {p:?}"
        )));
    }
    bisect(|l| {
        Ok(jointly_measurable(&mix_with_identity(m, l, p)?, &mix_with_identity(n, l, p)?).feasible)
    })
}

/// Smallest mixing `λ` with the completely depolarized POVM that makes the
/// pair compatible.
pub fn incompat_steer(m: &BinaryPovm, n: &BinaryPovm) -> Result<f64> {
    bisect(|l| {
        Ok(jointly_measurable(&mix_with_depolarized(m, l)?, &mix_with_depolarized(n, l)?).feasible)
    })
}

/// `Σ(E) = ‖E‖_∞ + ‖𝟙 − E‖_∞ − 1`, with the qubit operator norm taken in
/// closed form from the Bloch coefficients.
pub fn sharpness(e: &QubitEffect) -> f64 {
    op_norm_bloch(&e.a4()) + op_norm_bloch(&e.complement().a4()) - 1.0
}

/// Which monotone [`resource_trajectory`] follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resource {
    IncompatP { p: (f64, f64) },
    IncompatSteer,
    Sharpness,
}

/// Evaluates a monotone on `Φ*_t` applied to the inputs at every
/// `stride`-th grid time (and the last one). `second` is required for the
/// incompatibility monotones and ignored for sharpness.
pub fn resource_trajectory(
    traj: &MapTrajectory,
    which: Resource,
    first: &BinaryPovm,
    second: Option<&BinaryPovm>,
    stride: usize,
) -> Result<TrajectoryCurve> {
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if *idx.last().expect("nonempty trajectory") != traj.len() - 1 {
        idx.push(traj.len() - 1);
    }
    let need_second = || second.ok_or_else(|| Error::validation("incompatibility needs two POVMs"));
    let mut values = Vec::with_capacity(idx.len());
    for &i in &idx {
        let m = traj.samples()[i].matrix();
        let a = first.evolve(&m)?;
        values.push(match which {
            Resource::Sharpness => sharpness(&a.e),
            Resource::IncompatP { p } => incompat_p(&a, &need_second()?.evolve(&m)?, p)?,
            Resource::IncompatSteer => incompat_steer(&a, &need_second()?.evolve(&m)?)?,
        });
    }
    let label = match which {
        Resource::Sharpness => CurveLabel::Sharpness,
        _ => CurveLabel::Incompat,
    };
    Ok(TrajectoryCurve {
        times: idx.iter().map(|&i| traj.times()[i]).collect(),
        values,
        label,
    })
}
