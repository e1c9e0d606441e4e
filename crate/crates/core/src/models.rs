//! Built-in dynamics: the phase-covariant qubit model, the
//! dephasing+rotation pair `Λ⁽¹⁾ = O·D`, `Λ⁽²⁾ = D·Oᵀ`, and the classical
//! two-state system `S(t) = [[a, 1−b], [1−a, b]]`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3};
use rand::Rng;

use crate::bloch::BlochAffine;
use crate::dynmap::{Criterion, DivisibilityVerdict, DynamicalModel, Grid, Picture, Side};
use crate::smallmat::{pauli, pauli_coefficients, sigma_minus, sigma_plus, C64};
use crate::{Error, Result};

/// A scalar function of time with its first derivative in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFn {
    Const(f64),
    /// `offset + amp·e^{−rate·t}`
    ExpDecay {
        rate: f64,
        amp: f64,
        offset: f64,
    },
    /// `amp·sin(freq·t)`
    Sine {
        amp: f64,
        freq: f64,
    },
    /// `offset + amp·cos(freq·t)`
    Cosine {
        amp: f64,
        freq: f64,
        offset: f64,
    },
    /// `offset + amp·e^{−rate·t}·cos(freq·t)`
    DampedCosine {
        amp: f64,
        rate: f64,
        freq: f64,
        offset: f64,
    },
    /// `floor + (1 − floor)(1 + cos(πt/t1))/2` up to `t1`, then `floor`.
    CosineStep {
        t1: f64,
        floor: f64,
    },
    /// `amp·(1 − e^{−rate(t − start)})` from `start` on, zero before.
    Saturate {
        amp: f64,
        rate: f64,
        start: f64,
    },
    /// Piecewise cubic Hermite through `(t, value, slope)` knots, held
    /// constant outside the table.
    Cubic(Vec<(f64, f64, f64)>),
}

impl TimeFn {
    pub fn exp_decay(rate: f64) -> Self {
        TimeFn::ExpDecay {
            rate,
            amp: 1.0,
            offset: 0.0,
        }
    }

    /// `sin(t)/2`.
    pub fn half_sine() -> Self {
        TimeFn::Sine {
            amp: 0.5,
            freq: 1.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeFn::Const(c) => *c,
            TimeFn::ExpDecay { rate, amp, offset } => offset + amp * (-rate * t).exp(),
            TimeFn::Sine { amp, freq } => amp * (freq * t).sin(),
            TimeFn::Cosine { amp, freq, offset } => offset + amp * (freq * t).cos(),
            TimeFn::DampedCosine {
                amp,
                rate,
                freq,
                offset,
            } => offset + amp * (-rate * t).exp() * (freq * t).cos(),
            TimeFn::CosineStep { t1, floor } => {
                if t >= *t1 {
                    *floor
                } else {
                    floor + (1.0 - floor) * (1.0 + (PI * t / t1).cos()) / 2.0
                }
            }
            TimeFn::Saturate { amp, rate, start } => {
                if t < *start {
                    0.0
                } else {
                    amp * (1.0 - (-rate * (t - start)).exp())
                }
            }
            TimeFn::Cubic(knots) => cubic_eval(knots, t).0,
        }
    }

    /// Right derivative at kinks.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeFn::Const(_) => 0.0,
            TimeFn::ExpDecay { rate, amp, .. } => -rate * amp * (-rate * t).exp(),
            TimeFn::Sine { amp, freq } => amp * freq * (freq * t).cos(),
            TimeFn::Cosine { amp, freq, .. } => -amp * freq * (freq * t).sin(),
            TimeFn::DampedCosine {
                amp, rate, freq, ..
            } => -amp * (-rate * t).exp() * (rate * (freq * t).cos() + freq * (freq * t).sin()),
            TimeFn::CosineStep { t1, floor } => {
                if t >= *t1 {
                    0.0
                } else {
                    -(1.0 - floor) * PI / (2.0 * t1) * (PI * t / t1).sin()
                }
            }
            TimeFn::Saturate { amp, rate, start } => {
                if t < *start {
                    0.0
                } else {
                    amp * rate * (-rate * (t - start)).exp()
                }
            }
            TimeFn::Cubic(knots) => cubic_eval(knots, t).1,
        }
    }

    /// Points where the derivative may jump.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            TimeFn::Saturate { start, .. } => vec![*start],
            TimeFn::CosineStep { t1, .. } => vec![*t1],
            TimeFn::Cubic(knots) => match (knots.first(), knots.last()) {
                (Some(a), Some(b)) => vec![a.0, b.0],
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }
}

fn cubic_eval(knots: &[(f64, f64, f64)], t: f64) -> (f64, f64) {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t < first.0 {
        return (first.1, 0.0);
    }
    if t >= last.0 {
        return (last.1, 0.0);
    }
    let k = knots.partition_point(|k| k.0 <= t) - 1;
    let (t0, y0, d0) = knots[k];
    let (t1, y1, d1) = knots[k + 1];
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1;
    let slope = ((6.0 * s2 - 6.0 * s) * y0 + (-6.0 * s2 + 6.0 * s) * y1) / h
        + (3.0 * s2 - 4.0 * s + 1.0) * d0
        + (3.0 * s2 - 2.0 * s) * d1;
    (value, slope)
}

impl fmt::Display for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFn::Const(c) => write!(f, "{c}"),
            TimeFn::ExpDecay { rate, amp, offset } => {
                write!(f, "exp_decay(rate={rate}, amp={amp}, offset={offset})")
            }
            TimeFn::Sine { amp, freq } => write!(f, "sine(amp={amp}, freq={freq})"),
            TimeFn::Cosine { amp, freq, offset } => {
                write!(f, "cosine(amp={amp}, freq={freq}, offset={offset})")
            }
            TimeFn::DampedCosine {
                amp,
                rate,
                freq,
                offset,
            } => write!(
                f,
                "damped_cosine(amp={amp}, rate={rate}, freq={freq}, offset={offset})"
            ),
            TimeFn::CosineStep { t1, floor } => write!(f, "cosine_step(t1={t1}, floor={floor})"),
            TimeFn::Saturate { amp, rate, start } => {
                write!(f, "saturate(amp={amp}, rate={rate}, start={start})")
            }
            TimeFn::Cubic(knots) => {
                let parts: Vec<String> = knots
                    .iter()
                    .map(|(t, v, d)| format!("{t}:{v}:{d}"))
                    .collect();
                write!(f, "cubic({})", parts.join("; "))
            }
        }
    }
}

/// Parses `1.5`, `half_sine`, `exp_decay(rate=1)`, `cubic(0:1:0; 1:0.5:0)`
/// and the other named forms; `pi` is accepted as a number.
impl FromStr for TimeFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(c) = parse_number(s) {
            return Ok(TimeFn::Const(c));
        }
        let (name, body) = match s.find('(') {
            Some(open) => {
                let body = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::validation(format!("missing ')' in `{s}`")))?;
                (s[..open].trim(), body)
            }
            None => (s, ""),
        };
        if name == "cubic" {
            return parse_cubic(body);
        }
        let mut args = parse_args(body)?;
        let f = match name {
            "const" => TimeFn::Const(take(&mut args, "value", 0.0)),
            "exp_decay" => TimeFn::ExpDecay {
                rate: take(&mut args, "rate", 1.0),
                amp: take(&mut args, "amp", 1.0),
                offset: take(&mut args, "offset", 0.0),
            },
            "sine" => TimeFn::Sine {
                amp: take(&mut args, "amp", 1.0),
                freq: take(&mut args, "freq", 1.0),
            },
            "half_sine" => TimeFn::half_sine(),
            "cosine" => TimeFn::Cosine {
                amp: take(&mut args, "amp", 1.0),
                freq: take(&mut args, "freq", 1.0),
                offset: take(&mut args, "offset", 0.0),
            },
            "damped_cosine" => TimeFn::DampedCosine {
                amp: take(&mut args, "amp", 1.0),
                rate: take(&mut args, "rate", 1.0),
                freq: take(&mut args, "freq", 1.0),
                offset: take(&mut args, "offset", 0.0),
            },
            "cosine_step" => TimeFn::CosineStep {
                t1: take(&mut args, "t1", 1.0),
                floor: take(&mut args, "floor", 0.5),
            },
            "saturate" => TimeFn::Saturate {
                amp: take(&mut args, "amp", FRAC_PI_2),
                rate: take(&mut args, "rate", 3.0),
                start: take(&mut args, "start", 1.0),
            },
            other => {
                return Err(Error::validation(format!(
                    "unknown time function `{other}`"
                )))
            }
        };
        if let Some(key) = args.keys().next() {
            return Err(Error::validation(format!(
                "unknown argument `{key}` for `{name}`"
            )));
        }
        Ok(f)
    }
}

pub(crate) fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let value = match s {
        "pi" => PI,
        "-pi" => -PI,
        "pi/2" => FRAC_PI_2,
        _ => s
            .parse::<f64>()
            .map_err(|_| Error::validation(format!("not a number: `{s}`")))?,
    };
    if !value.is_finite() {
        return Err(Error::validation(format!("not a finite number: `{s}`")));
    }
    Ok(value)
}

fn parse_args(body: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("expected key=value, got `{part}`")))?;
        out.insert(k.trim().to_string(), parse_number(v)?);
    }
    Ok(out)
}

fn take(args: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    args.remove(key).unwrap_or(default)
}

fn parse_cubic(body: &str) -> Result<TimeFn> {
    let mut knots = Vec::new();
    for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(Error::validation(format!(
                "cubic knot must be t:value:slope, got `{part}`"
            )));
        }
        knots.push((
            parse_number(fields[0])?,
            parse_number(fields[1])?,
            parse_number(fields[2])?,
        ));
    }
    if knots.len() < 2 {
        return Err(Error::validation("cubic table needs at least two knots"));
    }
    if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::validation("cubic knots must have increasing times"));
    }
    Ok(TimeFn::Cubic(knots))
}

/// Phase-covariant map `Λ = diag(λ, λ, λ_z)`, `v = (0, 0, λ_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCovariantParams {
    pub lambda_t: TimeFn,
    pub lambda: TimeFn,
    pub lambda_z: TimeFn,
}

impl PhaseCovariantParams {
    /// `λ_T = sin(t)/2`, `λ_z = e^{−t}`, `λ = e^{−t/2}`: CP-divisible in the
    /// Schrödinger picture, not P-divisible in the Heisenberg picture.
    pub fn counterexample() -> Self {
        PhaseCovariantParams {
            lambda_t: TimeFn::half_sine(),
            lambda: TimeFn::exp_decay(0.5),
            lambda_z: TimeFn::exp_decay(1.0),
        }
    }

    fn values(&self, t: f64) -> (f64, f64, f64) {
        (
            self.lambda_t.value(t),
            self.lambda.value(t),
            self.lambda_z.value(t),
        )
    }

    fn derivatives(&self, t: f64) -> (f64, f64, f64) {
        (
            self.lambda_t.derivative(t),
            self.lambda.derivative(t),
            self.lambda_z.derivative(t),
        )
    }
}

const CP_SLACK: f64 = 1e-12;

pub fn phase_covariant_bloch(p: &PhaseCovariantParams, t: f64) -> Result<BlochAffine> {
    let (lt, l, lz) = p.values(t);
    if lz <= 0.0 {
        return Err(Error::Singular {
            t,
            det: (l * l * lz).abs(),
        });
    }
    if lt.abs() + lz.abs() > 1.0 + CP_SLACK || 4.0 * l * l + lt * lt > (1.0 + lz).powi(2) + CP_SLACK
    {
        return Err(Error::validation(format!(
            "phase-covariant parameters violate complete positivity at t = {t}: \
             lambda_t = {lt}, lambda = {l}, lambda_z = {lz}"
        )));
    }
    BlochAffine::new(
        Vector3::new(0.0, 0.0, lt),
        Matrix3::from_diagonal(&Vector3::new(l, l, lz)),
    )
}

/// `(rate₊, rate₋, rate_z)` of the jump operators `σ₊ = |0⟩⟨1|`, `σ₋`, `σ_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GklsRates {
    pub plus: f64,
    pub minus: f64,
    pub z: f64,
}

impl GklsRates {
    /// `(rate, jump operator)` pairs in the order `σ₊`, `σ₋`, `σ_z`.
    pub fn terms(&self) -> Vec<(f64, Matrix2<C64>)> {
        vec![
            (self.plus, sigma_plus()),
            (self.minus, sigma_minus()),
            (self.z, pauli(3)),
        ]
    }

    /// Bloch matrix of `Σ γ_α (L_α X L_α† − ½{L_α†L_α, X})`.
    pub fn generator_matrix(&self) -> Matrix4<f64> {
        gkls_bloch_matrix(&self.terms())
    }
}

/// Bloch matrix `G_kl = ½ tr(σ_k 𝓖[σ_l])` of a GKLS dissipator.
pub fn gkls_bloch_matrix(terms: &[(f64, Matrix2<C64>)]) -> Matrix4<f64> {
    let half = C64::new(0.5, 0.0);
    Matrix4::from_fn(|k, l| {
        let x = pauli(l);
        let image: Matrix2<C64> = terms
            .iter()
            .map(|(g, op)| {
                let ad = op.adjoint();
                let anti = ad * op * x + x * ad * op;
                (op * x * ad - anti * half) * C64::new(*g, 0.0)
            })
            .fold(Matrix2::zeros(), |acc, m| acc + m);
        0.5 * pauli_coefficients(&image)[k].re
    })
}

pub fn phase_covariant_rates(p: &PhaseCovariantParams, t: f64, side: Side) -> Result<GklsRates> {
    let (lt, l, lz) = p.values(t);
    let (dlt, dl, dlz) = p.derivatives(t);
    if lz <= 0.0 || l == 0.0 {
        return Err(Error::Singular {
            t,
            det: (l * l * lz).abs(),
        });
    }
    let z = (dlz / lz - 2.0 * dl / l) / 4.0;
    Ok(match side {
        Side::Left => GklsRates {
            plus: (dlt * lz - (1.0 + lt) * dlz) / (2.0 * lz),
            minus: (-dlt * lz - (1.0 - lt) * dlz) / (2.0 * lz),
            z,
        },
        Side::Right => GklsRates {
            plus: (dlt - dlz) / (2.0 * lz),
            minus: (-dlt - dlz) / (2.0 * lz),
            z,
        },
    })
}

/// Largest deviation of the right rates from their expression through the
/// left rates, `ξ_± = [γ₊(λ_z ∓ λ_T ± 1) + γ₋(λ_z ∓ λ_T ∓ 1)] / (2λ_z)`.
pub fn rate_conversion_check(p: &PhaseCovariantParams, t: f64) -> Result<f64> {
    let (lt, _, lz) = p.values(t);
    let g = phase_covariant_rates(p, t, Side::Left)?;
    let xi = phase_covariant_rates(p, t, Side::Right)?;
    let plus = (g.plus * (lz - lt + 1.0) + g.minus * (lz - lt - 1.0)) / (2.0 * lz);
    let minus = (g.plus * (lz + lt - 1.0) + g.minus * (lz + lt + 1.0)) / (2.0 * lz);
    Ok((xi.plus - plus)
        .abs()
        .max((xi.minus - minus).abs())
        .max((xi.z - g.z).abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCovariant {
    pub params: PhaseCovariantParams,
}

impl PhaseCovariant {
    pub fn new(params: PhaseCovariantParams) -> Self {
        PhaseCovariant { params }
    }

    pub fn counterexample() -> Self {
        PhaseCovariant::new(PhaseCovariantParams::counterexample())
    }
}

impl DynamicalModel for PhaseCovariant {
    fn name(&self) -> String {
        "phcov".into()
    }

    fn map_at(&self, t: f64) -> Result<BlochAffine> {
        phase_covariant_bloch(&self.params, t)
    }

    fn derivative_at(&self, t: f64) -> Option<Matrix4<f64>> {
        let (dlt, dl, dlz) = self.params.derivatives(t);
        let mut d = Matrix4::zeros();
        d[(3, 0)] = dlt;
        d[(1, 1)] = dl;
        d[(2, 2)] = dl;
        d[(3, 3)] = dlz;
        Some(d)
    }

    fn kinks(&self) -> Vec<f64> {
        let p = &self.params;
        [&p.lambda_t, &p.lambda, &p.lambda_z]
            .iter()
            .flat_map(|f| f.kinks())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephRotVariant {
    /// `Λ⁽¹⁾ = O·D`
    RotateAfter,
    /// `Λ⁽²⁾ = D·Oᵀ`
    RotateBefore,
}

/// Dephasing `D = diag(λ, λ, 1)` combined with a rotation
/// `O = exp(β·Θ(t − t1)·L_x)` about the x axis that switches on at `t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DephRotParams {
    pub variant: DephRotVariant,
    pub lambda: TimeFn,
    pub beta: TimeFn,
    pub t1: f64,
}

impl DephRotParams {
    pub fn default_for(variant: DephRotVariant) -> Self {
        let t1 = 1.0;
        DephRotParams {
            variant,
            lambda: TimeFn::CosineStep { t1, floor: 0.5 },
            beta: TimeFn::Saturate {
                amp: FRAC_PI_2,
                rate: 3.0,
                start: t1,
            },
            t1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t1.is_nan() || self.t1 <= 0.0 {
            return Err(Error::validation(format!(
                "t1 must be positive, got {}",
                self.t1
            )));
        }
        if (self.lambda.value(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::validation("dephasing function must start at 1"));
        }
        let n = 1000;
        let mut prev = 1.0;
        for k in 1..=n {
            let l = self.lambda.value(self.t1 * k as f64 / n as f64);
            if l > prev + 1e-12 {
                return Err(Error::validation(
                    "dephasing function must be nonincreasing before t1",
                ));
            }
            prev = l;
        }
        Ok(())
    }

    /// `(λ, λ̇)` with `λ` frozen after `t1`.
    pub fn dephasing(&self, t: f64) -> (f64, f64) {
        if t >= self.t1 {
            (self.lambda.value(self.t1), 0.0)
        } else {
            (self.lambda.value(t), self.lambda.derivative(t))
        }
    }

    /// `(β, β̇)`, zero before `t1`; right derivative at `t1`.
    pub fn angle(&self, t: f64) -> (f64, f64) {
        if t < self.t1 {
            (0.0, 0.0)
        } else {
            (self.beta.value(t), self.beta.derivative(t))
        }
    }
}

/// Rotation by `beta` about x, `exp(β L_x)`.
pub fn rotation_x(beta: f64) -> Matrix3<f64> {
    let (s, c) = beta.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// `L_x`, the generator of rotations about x.
pub fn generator_x() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
}

pub fn dephrot_bloch(p: &DephRotParams, t: f64) -> Result<BlochAffine> {
    BlochAffine::new(Vector3::zeros(), dephrot_lambda(p, t).0)
}

/// `(Λ, Λ̇)` for the dephasing+rotation model.
fn dephrot_lambda(p: &DephRotParams, t: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let (l, dl) = p.dephasing(t);
    let (b, db) = p.angle(t);
    let d = Matrix3::from_diagonal(&Vector3::new(l, l, 1.0));
    let dd = Matrix3::from_diagonal(&Vector3::new(dl, dl, 0.0));
    let o = rotation_x(b);
    let dot = generator_x() * o * db;
    match p.variant {
        DephRotVariant::RotateAfter => (o * d, dot * d + o * dd),
        DephRotVariant::RotateBefore => {
            (d * o.transpose(), dd * o.transpose() + d * dot.transpose())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DephRot {
    pub params: DephRotParams,
}

impl DephRot {
    pub fn new(params: DephRotParams) -> Result<Self> {
        params.validate()?;
        Ok(DephRot { params })
    }

    pub fn variant1() -> Self {
        DephRot {
            params: DephRotParams::default_for(DephRotVariant::RotateAfter),
        }
    }

    pub fn variant2() -> Self {
        DephRot {
            params: DephRotParams::default_for(DephRotVariant::RotateBefore),
        }
    }
}

impl DynamicalModel for DephRot {
    fn name(&self) -> String {
        match self.params.variant {
            DephRotVariant::RotateAfter => "dephrot1".into(),
            DephRotVariant::RotateBefore => "dephrot2".into(),
        }
    }

    fn map_at(&self, t: f64) -> Result<BlochAffine> {
        dephrot_bloch(&self.params, t)
    }

    fn derivative_at(&self, t: f64) -> Option<Matrix4<f64>> {
        let dl = dephrot_lambda(&self.params, t).1;
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(1, 1).copy_from(&dl);
        Some(m)
    }

    fn kinks(&self) -> Vec<f64> {
        vec![self.params.t1]
    }
}

/// Unital map `Λ = diag(f, f, g)` with fixed functions, used for the pure
/// dephasing (`f = e^{−t}`, `g = 1`) and isotropic depolarizing
/// (`f = g = e^{−t}`) built-ins.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalUnital {
    pub name: String,
    pub transverse: TimeFn,
    pub longitudinal: TimeFn,
}

impl DiagonalUnital {
    pub fn dephasing() -> Self {
        DiagonalUnital {
            name: "dephasing".into(),
            transverse: TimeFn::exp_decay(1.0),
            longitudinal: TimeFn::Const(1.0),
        }
    }

    pub fn depolarizing() -> Self {
        DiagonalUnital {
            name: "depolarizing".into(),
            transverse: TimeFn::exp_decay(1.0),
            longitudinal: TimeFn::exp_decay(1.0),
        }
    }
}

impl DynamicalModel for DiagonalUnital {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn map_at(&self, t: f64) -> Result<BlochAffine> {
        let f = self.transverse.value(t);
        let g = self.longitudinal.value(t);
        BlochAffine::new(
            Vector3::zeros(),
            Matrix3::from_diagonal(&Vector3::new(f, f, g)),
        )
    }

    fn derivative_at(&self, t: f64) -> Option<Matrix4<f64>> {
        let f = self.transverse.derivative(t);
        Some(Matrix4::from_diagonal(&nalgebra::Vector4::new(
            0.0,
            f,
            f,
            self.longitudinal.derivative(t),
        )))
    }

    fn kinks(&self) -> Vec<f64> {
        let mut k = self.transverse.kinks();
        k.extend(self.longitudinal.kinks());
        k
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_MODELS: [&str; 5] =
    ["phcov", "dephrot1", "dephrot2", "dephasing", "depolarizing"];

pub fn builtin(name: &str) -> Result<Box<dyn DynamicalModel>> {
    Ok(match name {
        "phcov" => Box::new(PhaseCovariant::counterexample()),
        "dephrot1" => Box::new(DephRot::variant1()),
        "dephrot2" => Box::new(DephRot::variant2()),
        "dephasing" => Box::new(DiagonalUnital::dephasing()),
        "depolarizing" => Box::new(DiagonalUnital::depolarizing()),
        other => {
            return Err(Error::validation(format!(
                "unknown model `{other}`; expected one of {}",
                BUILTIN_MODELS.join(", ")
            )))
        }
    })
}

/// Builds a model from a parameter table. `kind` selects the family
/// (`phase_covariant` or `dephrot`); missing keys take the built-in values.
pub fn model_from_table(
    kind: &str,
    table: &BTreeMap<String, String>,
) -> Result<Box<dyn DynamicalModel>> {
    let get =
        |key: &str| -> Result<Option<TimeFn>> { table.get(key).map(|s| s.parse()).transpose() };
    let check_keys = |allowed: &[&str]| -> Result<()> {
        match table
            .keys()
            .find(|k| !allowed.contains(&k.as_str()) && k.as_str() != "kind")
        {
            Some(k) => Err(Error::validation(format!(
                "unknown parameter `{k}` for `{kind}`"
            ))),
            None => Ok(()),
        }
    };
    match kind {
        "phase_covariant" | "phcov" => {
            check_keys(&["lambda_t", "lambda", "lambda_z"])?;
            let d = PhaseCovariantParams::counterexample();
            let params = PhaseCovariantParams {
                lambda_t: get("lambda_t")?.unwrap_or(d.lambda_t),
                lambda: get("lambda")?.unwrap_or(d.lambda),
                lambda_z: get("lambda_z")?.unwrap_or(d.lambda_z),
            };
            Ok(Box::new(PhaseCovariant::new(params)))
        }
        "dephrot" | "dephrot1" | "dephrot2" => {
            check_keys(&["variant", "lambda", "beta", "t1"])?;
            let variant = match (kind, table.get("variant").map(|s| s.trim())) {
                (_, Some("2")) | ("dephrot2", None) => DephRotVariant::RotateBefore,
                (_, Some("1")) | (_, None) => DephRotVariant::RotateAfter,
                (_, Some(v)) => {
                    return Err(Error::validation(format!(
                        "variant must be 1 or 2, got `{v}`"
                    )))
                }
            };
            let t1 = table
                .get("t1")
                .map(|s| parse_number(s))
                .transpose()?
                .unwrap_or(1.0);
            let mut params = DephRotParams::default_for(variant);
            params.t1 = t1;
            params.lambda = get("lambda")?.unwrap_or(TimeFn::CosineStep { t1, floor: 0.5 });
            params.beta = get("beta")?.unwrap_or(TimeFn::Saturate {
                amp: FRAC_PI_2,
                rate: 3.0,
                start: t1,
            });
            Ok(Box::new(DephRot::new(params)?))
        }
        other => Err(Error::validation(format!(
            "unknown model kind `{other}`; expected phase_covariant or dephrot"
        ))),
    }
}

/// Two-state stochastic dynamics `S(t) = [[a, 1−b], [1−a, b]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMap {
    pub a: TimeFn,
    pub b: TimeFn,
}

/// Off-diagonal entries of `L = Ṡ S⁻¹ = [[−ℓ₁, ℓ₂], [ℓ₁, −ℓ₂]]` and
/// `R = S⁻¹ Ṡ = [[−r₁, r₂], [r₁, −r₂]]`, with `w = ȧb − aḃ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalRates {
    pub l1: f64,
    pub l2: f64,
    pub r1: f64,
    pub r2: f64,
    pub w: f64,
}

impl ClassicalRates {
    pub fn left_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(-self.l1, self.l2, self.l1, -self.l2)
    }

    pub fn right_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(-self.r1, self.r2, self.r1, -self.r2)
    }
}

impl ClassicalMap {
    /// Requires `S(0) = 𝟙`.
    pub fn new(a: TimeFn, b: TimeFn) -> Result<Self> {
        if (a.value(0.0) - 1.0).abs() > 1e-12 || (b.value(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::validation(
                "classical map must start at the identity: a(0) = b(0) = 1",
            ));
        }
        Ok(ClassicalMap { a, b })
    }

    /// Stochastic-matrix path that need not start at the identity.
    pub fn unanchored(a: TimeFn, b: TimeFn) -> Self {
        ClassicalMap { a, b }
    }

    /// `a = (1 + e^{−t})/2`, `b = (1 + e^{−2t})/2`: divisible on both sides.
    pub fn scenario1() -> Self {
        ClassicalMap {
            a: TimeFn::ExpDecay {
                rate: 1.0,
                amp: 0.5,
                offset: 0.5,
            },
            b: TimeFn::ExpDecay {
                rate: 2.0,
                amp: 0.5,
                offset: 0.5,
            },
        }
    }

    /// `a = (3 + e^{−t})/4`, `b = (1 + 3e^{−2t} cos t)/4`: divisible on the
    /// left only.
    pub fn scenario2() -> Self {
        ClassicalMap {
            a: TimeFn::ExpDecay {
                rate: 1.0,
                amp: 0.25,
                offset: 0.75,
            },
            b: TimeFn::DampedCosine {
                amp: 0.75,
                rate: 2.0,
                freq: 1.0,
                offset: 0.25,
            },
        }
    }

    pub fn scenario(n: u32) -> Result<Self> {
        match n {
            1 => Ok(Self::scenario1()),
            2 => Ok(Self::scenario2()),
            other => Err(Error::validation(format!(
                "classical scenario must be 1 or 2, got {other}"
            ))),
        }
    }

    fn check(&self, t: f64) -> Result<(f64, f64)> {
        let (a, b) = (self.a.value(t), self.b.value(t));
        let slack = 1e-12;
        if !(-slack..=1.0 + slack).contains(&a) || !(-slack..=1.0 + slack).contains(&b) {
            return Err(Error::validation(format!(
                "a(t), b(t) must lie in [0, 1]; at t = {t} got a = {a}, b = {b}"
            )));
        }
        Ok((a, b))
    }

    pub fn determinant(&self, t: f64) -> f64 {
        self.a.value(t) + self.b.value(t) - 1.0
    }
}

pub fn classical_s(c: &ClassicalMap, t: f64) -> Result<Matrix2<f64>> {
    let (a, b) = c.check(t)?;
    Ok(Matrix2::new(a, 1.0 - b, 1.0 - a, b))
}

pub fn classical_s_dot(c: &ClassicalMap, t: f64) -> Matrix2<f64> {
    let (da, db) = (c.a.derivative(t), c.b.derivative(t));
    Matrix2::new(da, -db, -da, db)
}

pub fn classical_rates(c: &ClassicalMap, t: f64) -> Result<ClassicalRates> {
    let (a, b) = c.check(t)?;
    let det = a + b - 1.0;
    if det.abs() <= crate::Tolerances::default().invertibility {
        return Err(Error::Singular { t, det: det.abs() });
    }
    let (da, db) = (c.a.derivative(t), c.b.derivative(t));
    let w = da * b - a * db;
    Ok(ClassicalRates {
        l1: (-w - db) / det,
        l2: (w - da) / det,
        r1: -da / det,
        r2: -db / det,
        w,
    })
}

/// Rates on every grid time.
pub fn classical_rate_table(c: &ClassicalMap, grid: &Grid) -> Result<Vec<(f64, ClassicalRates)>> {
    grid.times()
        .into_iter()
        .map(|t| Ok((t, classical_rates(c, t)?)))
        .collect()
}

/// Left side: divisible iff every `ℓ_k ≥ −tol`; right side: same with `r_k`.
/// `worst_value` is the smallest rate found.
pub fn classical_divisibility(
    c: &ClassicalMap,
    side: Side,
    grid: &Grid,
    tol: f64,
) -> Result<DivisibilityVerdict> {
    let mut worst = f64::INFINITY;
    let mut first = None;
    for (t, r) in classical_rate_table(c, grid)? {
        let m = match side {
            Side::Left => r.l1.min(r.l2),
            Side::Right => r.r1.min(r.r2),
        };
        if m < -tol && first.is_none() {
            first = Some(t);
        }
        worst = worst.min(m);
    }
    Ok(DivisibilityVerdict {
        picture: match side {
            Side::Left => Picture::Schrodinger,
            Side::Right => Picture::Heisenberg,
        },
        criterion: Criterion::P,
        divisible: worst >= -tol,
        first_violation_time: first,
        worst_value: worst,
    })
}

/// `d/dt ‖S(t)x‖₁` (left) or `d/dt ‖Sᵀ(t)x‖_∞` (right) at each grid time,
/// as right derivatives of the norm.
pub fn classical_norm_monotonicity(
    c: &ClassicalMap,
    side: Side,
    x: &Vector2<f64>,
    grid: &Grid,
) -> Result<Vec<(f64, f64)>> {
    grid.times()
        .into_iter()
        .map(|t| {
            let s = classical_s(c, t)?;
            let ds = classical_s_dot(c, t);
            let rate = match side {
                Side::Left => {
                    let (y, dy) = (s * x, ds * x);
                    (0..2).map(|k| abs_derivative(y[k], dy[k])).sum()
                }
                Side::Right => {
                    let (y, dy) = (s.transpose() * x, ds.transpose() * x);
                    let top = y.abs().max();
                    (0..2)
                        .filter(|&k| y[k].abs() >= top - 1e-14 * top.max(1.0))
                        .map(|k| abs_derivative(y[k], dy[k]))
                        .fold(f64::NEG_INFINITY, f64::max)
                }
            };
            Ok((t, rate))
        })
        .collect()
}

fn abs_derivative(y: f64, dy: f64) -> f64 {
    if y > 0.0 {
        dy
    } else if y < 0.0 {
        -dy
    } else {
        dy.abs()
    }
}

/// Heisenberg divisibility implies Schrödinger divisibility: where every
/// `r_k ≥ −tol`, every `ℓ_k ≥ −tol` as well. Returns `false` on the first
/// grid time that contradicts it.
pub fn classical_implication_check(c: &ClassicalMap, grid: &Grid, tol: f64) -> Result<bool> {
    for (_, r) in classical_rate_table(c, grid)? {
        if r.r1 >= -tol && r.r2 >= -tol && (r.l1 < -tol || r.l2 < -tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Random smooth monotone path with `r₁, r₂ ≥ 0`. With probability ½ the
/// path decays from the identity towards a fixed point with `a + b > 1`;
/// otherwise `a`, `b` increase while staying below ½, so `a + b < 1`.
pub fn random_heisenberg_divisible<R: Rng + ?Sized>(rng: &mut R) -> ClassicalMap {
    if rng.random::<bool>() {
        loop {
            let (fa, fb) = (rng.random::<f64>(), rng.random::<f64>());
            if fa + fb > 1.05 {
                let a = TimeFn::ExpDecay {
                    rate: rng.random_range(0.1..3.0),
                    amp: 1.0 - fa,
                    offset: fa,
                };
                let b = TimeFn::ExpDecay {
                    rate: rng.random_range(0.1..3.0),
                    amp: 1.0 - fb,
                    offset: fb,
                };
                return ClassicalMap { a, b };
            }
        }
    }
    let increasing = |rng: &mut R| {
        let start = rng.random_range(0.0..0.2);
        let end = rng.random_range(start + 0.05..0.45);
        TimeFn::ExpDecay {
            rate: rng.random_range(0.1..3.0),
            amp: start - end,
            offset: end,
        }
    };
    let a = increasing(rng);
    let b = increasing(rng);
    ClassicalMap { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynmap::{left_generator, right_generator, MapTrajectory};
    use crate::random;
    use proptest::prelude::*;
    use rand::Rng;

    fn fd(f: &TimeFn, t: f64) -> f64 {
        let h = 1e-6;
        (f.value(t + h) - f.value(t - h)) / (2.0 * h)
    }

    #[test]
    fn time_function_derivatives_match_differences() {
        let fns: Vec<TimeFn> = vec![
            TimeFn::exp_decay(0.7),
            TimeFn::half_sine(),
            TimeFn::Cosine {
                amp: 0.3,
                freq: 2.0,
                offset: 0.1,
            },
            TimeFn::DampedCosine {
                amp: 0.75,
                rate: 2.0,
                freq: 1.0,
                offset: 0.25,
            },
            TimeFn::CosineStep {
                t1: 1.0,
                floor: 0.5,
            },
            TimeFn::Saturate {
                amp: FRAC_PI_2,
                rate: 3.0,
                start: 1.0,
            },
            "cubic(0:1:0; 1:0.6:-0.3; 2.5:0.5:0)".parse().unwrap(),
        ];
        for f in &fns {
            for t in [0.13, 0.5, 0.77, 1.4, 2.2, 3.3] {
                assert!((f.derivative(t) - fd(f, t)).abs() < 1e-7, "{f} at {t}");
            }
        }
    }

    #[test]
    fn cubic_interpolates_knots() {
        let f: TimeFn = "cubic(0:1:0; 1:0.6:-0.3; 2:0.5:0)".parse().unwrap();
        assert_eq!(f.value(0.0), 1.0);
        assert!((f.value(1.0) - 0.6).abs() < 1e-15);
        assert!((f.derivative(1.0) + 0.3).abs() < 1e-12);
        assert_eq!(f.value(5.0), 0.5);
        assert_eq!(f.kinks(), vec![0.0, 2.0]);
    }

    #[test]
    fn parse_named_functions() {
        assert_eq!(
            "exp_decay(rate=2)".parse::<TimeFn>().unwrap(),
            TimeFn::ExpDecay {
                rate: 2.0,
                amp: 1.0,
                offset: 0.0
            }
        );
        assert_eq!("half_sine".parse::<TimeFn>().unwrap(), TimeFn::half_sine());
        assert_eq!("0.25".parse::<TimeFn>().unwrap(), TimeFn::Const(0.25));
        assert!("exp_decay(speed=2)".parse::<TimeFn>().is_err());
        assert!("wobble".parse::<TimeFn>().is_err());
        assert!("cubic(1:0:0; 0:1:0)".parse::<TimeFn>().is_err());
        let f = TimeFn::DampedCosine {
            amp: 0.75,
            rate: 2.0,
            freq: 1.0,
            offset: 0.25,
        };
        assert_eq!(f.to_string().parse::<TimeFn>().unwrap(), f);
    }

    #[test]
    fn counterexample_map_values() {
        let p = PhaseCovariantParams::counterexample();
        let m0 = phase_covariant_bloch(&p, 0.0).unwrap();
        assert_eq!(m0.matrix(), Matrix4::identity());
        let m1 = phase_covariant_bloch(&p, 1.0).unwrap();
        let e = (-0.5f64).exp();
        assert!(
            (m1.lambda - Matrix3::from_diagonal(&Vector3::new(e, e, (-1.0f64).exp()))).amax()
                < 1e-15
        );
        assert!((m1.v - Vector3::new(0.0, 0.0, 1f64.sin() / 2.0)).amax() < 1e-15);
    }

    #[test]
    fn cp_violation_is_reported_with_time() {
        let p = PhaseCovariantParams {
            lambda_t: TimeFn::Const(0.5),
            lambda: TimeFn::Const(1.0),
            lambda_z: TimeFn::Const(0.8),
        };
        match phase_covariant_bloch(&p, 0.3) {
            Err(Error::Validation(msg)) => assert!(msg.contains("t = 0.3")),
            other => panic!("{other:?}"),
        }
        let zero = PhaseCovariantParams {
            lambda_z: TimeFn::Const(0.0),
            ..PhaseCovariantParams::counterexample()
        };
        assert!(matches!(
            phase_covariant_rates(&zero, 1.0, Side::Left),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn counterexample_rates_closed_forms() {
        let p = PhaseCovariantParams::counterexample();
        for k in 0..=500 {
            let t = k as f64 * 0.01;
            let g = phase_covariant_rates(&p, t, Side::Left).unwrap();
            let xi = phase_covariant_rates(&p, t, Side::Right).unwrap();
            assert!((g.plus - (2.0 + t.sin() + t.cos()) / 4.0).abs() < 1e-12);
            assert!((g.minus - (2.0 - t.sin() - t.cos()) / 4.0).abs() < 1e-12);
            assert!(g.z.abs() < 1e-15 && xi.z.abs() < 1e-15);
            assert!((xi.plus - (0.5 + t.exp() * t.cos() / 4.0)).abs() < 1e-12);
            assert!((xi.minus - (0.5 - t.exp() * t.cos() / 4.0)).abs() < 1e-12);
            assert!(rate_conversion_check(&p, t).unwrap() < 1e-12);
        }
    }

    #[test]
    fn unital_rates_coincide() {
        let p = PhaseCovariantParams {
            lambda_t: TimeFn::Const(0.0),
            lambda: TimeFn::exp_decay(0.8),
            lambda_z: TimeFn::exp_decay(1.1),
        };
        for t in [0.0, 0.4, 2.0] {
            let g = phase_covariant_rates(&p, t, Side::Left).unwrap();
            let xi = phase_covariant_rates(&p, t, Side::Right).unwrap();
            assert!((g.plus - xi.plus).abs() < 1e-15 && (g.minus - xi.minus).abs() < 1e-15);
            assert_eq!(g.z, xi.z);
            assert!(rate_conversion_check(&p, t).unwrap() < 1e-15);
        }
    }

    #[test]
    fn rates_reproduce_generators() {
        let model = PhaseCovariant::counterexample();
        let traj = MapTrajectory::from_model(&model, &Grid::new(0.0, 5.0, 1001).unwrap()).unwrap();
        for t in [0.0, 0.7, 1.9, 3.5, 5.0] {
            let l = left_generator(&traj, t).unwrap().matrix;
            let r = right_generator(&traj, t).unwrap().matrix;
            let gl = phase_covariant_rates(&model.params, t, Side::Left)
                .unwrap()
                .generator_matrix();
            let gr = phase_covariant_rates(&model.params, t, Side::Right)
                .unwrap()
                .generator_matrix();
            assert!((l - gl).amax() < 1e-12, "left at {t}: {}", (l - gl).amax());
            assert!((r - gr).amax() < 1e-12, "right at {t}: {}", (r - gr).amax());
        }
    }

    #[test]
    fn dephrot_variants() {
        let (m1, m2) = (DephRot::variant1(), DephRot::variant2());
        for t in [0.0, 0.3, 0.99] {
            assert_eq!(m1.map_at(t).unwrap(), m2.map_at(t).unwrap());
            let l = m1.params.dephasing(t).0;
            assert!(
                (m1.map_at(t).unwrap().lambda - Matrix3::from_diagonal(&Vector3::new(l, l, 1.0)))
                    .amax()
                    < 1e-15
            );
        }
        assert_eq!(m1.map_at(0.0).unwrap().matrix(), Matrix4::identity());
        for t in [1.0, 1.2, 2.0, 6.0] {
            let a = m1.map_at(t).unwrap().lambda;
            let b = m2.map_at(t).unwrap().lambda;
            let sa = a.singular_values().as_slice().to_vec();
            let sb = b.singular_values().as_slice().to_vec();
            for (x, y) in sa.iter().zip(&sb) {
                assert!((x - y).abs() < 1e-12);
            }
            // Variant 1 rotates the image ellipsoid; variant 2 keeps Λ Λᵀ fixed.
            let d = m1.params.dephasing(t).0;
            let dd = Matrix3::from_diagonal(&Vector3::new(d * d, d * d, 1.0));
            assert!((b * b.transpose() - dd).amax() < 1e-12);
            let o = rotation_x(m1.params.angle(t).0);
            assert!((a * a.transpose() - o * dd * o.transpose()).amax() < 1e-12);
        }
        assert!(m1.params.validate().is_ok());
        let mut bad = DephRotParams::default_for(DephRotVariant::RotateAfter);
        bad.lambda = TimeFn::Cosine {
            amp: 0.1,
            freq: 20.0,
            offset: 0.9,
        };
        assert!(DephRot::new(bad).is_err());
    }

    #[test]
    fn dephrot_derivatives_match_differences() {
        for m in [DephRot::variant1(), DephRot::variant2()] {
            for t in [0.2, 0.8, 1.0, 1.3, 4.0] {
                let h = 1e-6;
                let fwd = (m.map_at(t + h).unwrap().matrix() - m.map_at(t).unwrap().matrix()) / h;
                assert!(
                    (m.derivative_at(t).unwrap() - fwd).amax() < 5e-5,
                    "{} at {t}",
                    m.name()
                );
            }
        }
    }

    #[test]
    fn builtins_resolve() {
        for name in BUILTIN_MODELS {
            let m = builtin(name).unwrap();
            assert_eq!(m.name(), name);
            assert_eq!(m.map_at(0.0).unwrap().matrix(), Matrix4::identity());
        }
        assert!(builtin("lindblad").is_err());
    }

    #[test]
    fn model_table() {
        let mut table = BTreeMap::new();
        table.insert("lambda".to_string(), "exp_decay(rate=1)".to_string());
        let m = model_from_table("phase_covariant", &table).unwrap();
        assert!((m.map_at(1.0).unwrap().lambda[(0, 0)] - (-1.0f64).exp()).abs() < 1e-15);
        table.insert("gamma".to_string(), "1".to_string());
        assert!(model_from_table("phase_covariant", &table).is_err());
        let mut d = BTreeMap::new();
        d.insert("variant".to_string(), "2".to_string());
        d.insert("t1".to_string(), "2".to_string());
        let m = model_from_table("dephrot", &d).unwrap();
        assert_eq!(m.name(), "dephrot2");
        assert_eq!(m.kinks(), vec![2.0]);
    }

    #[test]
    fn classical_scenario1_at_origin() {
        let r = classical_rates(&ClassicalMap::scenario1(), 0.0).unwrap();
        assert!((r.l1 - 0.5).abs() < 1e-15 && (r.r1 - 0.5).abs() < 1e-15);
        assert!((r.l2 - 1.0).abs() < 1e-15 && (r.r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn classical_scenario1_right_rates_closed_form() {
        let c = ClassicalMap::scenario1();
        for k in 0..100 {
            let t = k as f64 * 0.1;
            let r = classical_rates(&c, t).unwrap();
            // a + b − 1 cancels to ~e^{−t}, so relative accuracy degrades with t.
            assert!((r.r1 - 1.0 / (1.0 + (-t).exp())).abs() < 1e-9);
            assert!((r.r2 - 2.0 / (t.exp() + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn classical_rates_reproduce_generators() {
        for c in [ClassicalMap::scenario1(), ClassicalMap::scenario2()] {
            for t in [0.0, 0.5, 1.7, 4.0] {
                let s = classical_s(&c, t).unwrap();
                let ds = classical_s_dot(&c, t);
                let inv = s.try_inverse().unwrap();
                let r = classical_rates(&c, t).unwrap();
                assert!((ds * inv - r.left_matrix()).amax() < 1e-10);
                assert!((inv * ds - r.right_matrix()).amax() < 1e-10);
                for m in [r.left_matrix(), r.right_matrix()] {
                    assert!(
                        (m[(0, 0)] + m[(1, 0)]).abs() < 1e-12
                            && (m[(0, 1)] + m[(1, 1)]).abs() < 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn classical_verdicts() {
        let grid = Grid::default();
        let tol = 1e-9;
        let c1 = ClassicalMap::scenario1();
        assert!(
            classical_divisibility(&c1, Side::Left, &grid, tol)
                .unwrap()
                .divisible
        );
        assert!(
            classical_divisibility(&c1, Side::Right, &grid, tol)
                .unwrap()
                .divisible
        );
        let c2 = ClassicalMap::scenario2();
        assert!(
            classical_divisibility(&c2, Side::Left, &grid, tol)
                .unwrap()
                .divisible
        );
        let right = classical_divisibility(&c2, Side::Right, &grid, tol).unwrap();
        assert!(!right.divisible && right.worst_value < -1e-3);
    }

    #[test]
    fn bistochastic_generators_coincide() {
        let e = TimeFn::ExpDecay {
            rate: 1.0,
            amp: 0.5,
            offset: 0.5,
        };
        let c = ClassicalMap::new(e.clone(), e).unwrap();
        for t in [0.1, 1.0, 3.0] {
            let r = classical_rates(&c, t).unwrap();
            assert!((r.left_matrix() - r.right_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn classical_validation() {
        assert!(ClassicalMap::new(TimeFn::Const(0.9), TimeFn::Const(1.0)).is_err());
        let half = ClassicalMap::unanchored(TimeFn::Const(0.5), TimeFn::Const(0.5));
        assert!(matches!(
            classical_rates(&half, 0.0),
            Err(Error::Singular { .. })
        ));
        let out = ClassicalMap::unanchored(TimeFn::Const(1.5), TimeFn::Const(0.5));
        assert!(matches!(classical_s(&out, 0.0), Err(Error::Validation(_))));
        assert!(ClassicalMap::scenario(3).is_err());
    }

    #[test]
    fn norm_monotonicity_scenarios() {
        let grid = Grid::default();
        let mut rng = random::seeded(11);
        let mut increase2 = false;
        for _ in 0..100 {
            let x = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for c in [ClassicalMap::scenario1(), ClassicalMap::scenario2()] {
                let left = classical_norm_monotonicity(&c, Side::Left, &x, &grid).unwrap();
                assert!(left.iter().all(|(_, d)| *d <= 1e-9));
            }
            let r1 =
                classical_norm_monotonicity(&ClassicalMap::scenario1(), Side::Right, &x, &grid)
                    .unwrap();
            assert!(r1.iter().all(|(_, d)| *d <= 1e-9));
            let r2 =
                classical_norm_monotonicity(&ClassicalMap::scenario2(), Side::Right, &x, &grid)
                    .unwrap();
            increase2 |= r2.iter().any(|(_, d)| *d > 1e-9);
        }
        assert!(increase2);
    }

    #[test]
    fn random_heisenberg_divisible_models_are_schrodinger_divisible() {
        let grid = Grid::new(0.0, 10.0, 401).unwrap();
        let mut rng = random::seeded(5);
        let mut branches = (0, 0);
        for _ in 0..100 {
            let c = random_heisenberg_divisible(&mut rng);
            assert!(
                classical_divisibility(&c, Side::Right, &grid, 1e-12)
                    .unwrap()
                    .divisible
            );
            assert!(classical_implication_check(&c, &grid, 1e-9).unwrap());
            if c.determinant(0.0) > 0.0 {
                branches.0 += 1
            } else {
                branches.1 += 1
            }
        }
        assert!(branches.0 > 20 && branches.1 > 20);
    }

    proptest! {
        #[test]
        fn conversion_identity_holds_for_valid_parameters(
            rate_l in 0.05f64..2.0, rate_z in 0.05f64..2.0, amp in 0.0f64..0.3, freq in 0.1f64..3.0, t in 0.0f64..5.0,
        ) {
            let p = PhaseCovariantParams {
                lambda_t: TimeFn::Sine { amp, freq },
                lambda: TimeFn::exp_decay(rate_l),
                lambda_z: TimeFn::exp_decay(rate_z),
            };
            prop_assert!(rate_conversion_check(&p, t).unwrap() < 1e-10);
        }

        #[test]
        fn classical_columns_sum_to_zero(ra in 0.1f64..3.0, rb in 0.1f64..3.0, fa in 0.55f64..0.95, fb in 0.55f64..0.95, t in 0.0f64..8.0) {
            let c = ClassicalMap::new(
                TimeFn::ExpDecay { rate: ra, amp: 1.0 - fa, offset: fa },
                TimeFn::ExpDecay { rate: rb, amp: 1.0 - fb, offset: fb },
            ).unwrap();
            let r = classical_rates(&c, t).unwrap();
            for m in [r.left_matrix(), r.right_matrix()] {
                prop_assert!((m[(0, 0)] + m[(1, 0)]).abs() < 1e-12);
                prop_assert!((m[(0, 1)] + m[(1, 1)]).abs() < 1e-12);
            }
        }
    }
}
