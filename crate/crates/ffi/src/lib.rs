//! C interface to `divimark`.
//!
//! Every function returns a [`DmStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and can be read with
//! [`dm_last_error_message`]. Trajectories are opaque handles created by
//! [`dm_trajectory_new_builtin`] and released with [`dm_trajectory_free`].
//!
//! Bloch matrices cross the boundary as 16 doubles in row-major order,
//! effects as 4 doubles `(a0, ax, ay, az)` with `E = ½(a0 𝟙 + a·σ)`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use divimark::bloch::QubitEffect;
use divimark::dynmap::{cp_divisibility, p_divisibility, Grid, MapTrajectory, Picture, Side};
use divimark::models::{builtin, phase_covariant_rates, PhaseCovariantParams};
use divimark::povm::{incompat_p, incompat_steer, sharpness, BinaryPovm};
use divimark::smallmat::choi_from_bloch_matrix;
use divimark::witness::nm_measure;
use divimark::{Error, Tolerances};
use nalgebra::{Matrix4, Vector4};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singular = 3,
    AnalysisFailed = 4,
    Panic = 5,
}

pub const DM_PICTURE_SCHRODINGER: u32 = 0;
pub const DM_PICTURE_HEISENBERG: u32 = 1;
pub const DM_CRITERION_P: u32 = 0;
pub const DM_CRITERION_CP: u32 = 1;

/// Opaque sampled trajectory.
pub struct DmTrajectory {
    inner: MapTrajectory,
}

/// Divisibility verdict. `first_violation_time` is meaningful only when
/// `has_violation` is set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmVerdict {
    pub divisible: bool,
    pub has_violation: bool,
    pub first_violation_time: f64,
    pub worst_value: f64,
}

/// Left rates `gamma_*` and right rates `xi_*` of the phase-covariant model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmRates {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_z: f64,
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub xi_z: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Validation(_) => DmStatus::InvalidArgument,
            Error::Singular { .. } => DmStatus::Singular,
            Error::Analysis(_) => DmStatus::AnalysisFailed,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DmStatus::Panic
        }
    }
}

fn picture(p: u32) -> Result<Picture, Failure> {
    match p {
        DM_PICTURE_SCHRODINGER => Ok(Picture::Schrodinger),
        DM_PICTURE_HEISENBERG => Ok(Picture::Heisenberg),
        _ => Err(Failure(
            DmStatus::InvalidArgument,
            format!("unknown picture {p}"),
        )),
    }
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn traj<'a>(ptr: *const DmTrajectory) -> Result<&'a MapTrajectory, Failure> {
    ptr.as_ref()
        .map(|t| &t.inner)
        .ok_or_else(|| null("trajectory"))
}

unsafe fn effect(ptr: *const f64, what: &str) -> Result<QubitEffect, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    let a = std::slice::from_raw_parts(ptr, 4);
    Ok(QubitEffect::from_a4(&Vector4::new(a[0], a[1], a[2], a[3]))?)
}

/// Samples a built-in model (`phcov`, `dephrot1`, `dephrot2`, `dephasing`,
/// `depolarizing`) on `steps` uniform points of `[t_start, t_end]`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out_handle` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dm_trajectory_new_builtin(
    name: *const c_char,
    t_start: f64,
    t_end: f64,
    steps: usize,
    out_handle: *mut *mut DmTrajectory,
) -> DmStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        *slot = std::ptr::null_mut();
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Failure(DmStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let model = builtin(name)?;
        let grid = Grid::new(t_start, t_end, steps)?;
        let inner = MapTrajectory::from_model(model.as_ref(), &grid)?;
        *slot = Box::into_raw(Box::new(DmTrajectory { inner }));
        Ok(())
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `handle` must come from [`dm_trajectory_new_builtin`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dm_trajectory_free(handle: *mut DmTrajectory) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_trajectory_len(
    handle: *const DmTrajectory,
    out_len: *mut usize,
) -> DmStatus {
    guard(|| {
        *out(out_len, "out_len")? = traj(handle)?.len();
        Ok(())
    })
}

/// Time and row-major 4×4 Bloch matrix of sample `index`.
///
/// # Safety
/// `out_matrix` must point to 16 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_trajectory_sample(
    handle: *const DmTrajectory,
    index: usize,
    out_time: *mut f64,
    out_matrix: *mut f64,
) -> DmStatus {
    guard(|| {
        let t = traj(handle)?;
        if index >= t.len() {
            return Err(Failure(
                DmStatus::InvalidArgument,
                format!("index {index} out of range"),
            ));
        }
        let time = out(out_time, "out_time")?;
        if out_matrix.is_null() {
            return Err(null("out_matrix"));
        }
        *time = t.times()[index];
        let m = t.samples()[index].matrix();
        let dst = std::slice::from_raw_parts_mut(out_matrix, 16);
        for r in 0..4 {
            for c in 0..4 {
                dst[4 * r + c] = m[(r, c)];
            }
        }
        Ok(())
    })
}

/// P or CP divisibility in the Schrödinger or Heisenberg picture.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_divisibility(
    handle: *const DmTrajectory,
    picture_code: u32,
    criterion_code: u32,
    out_verdict: *mut DmVerdict,
) -> DmStatus {
    guard(|| {
        let t = traj(handle)?;
        let slot = out(out_verdict, "out_verdict")?;
        let p = picture(picture_code)?;
        let tol = Tolerances::default();
        let v = match criterion_code {
            DM_CRITERION_P => p_divisibility(t, p, &tol)?,
            DM_CRITERION_CP => cp_divisibility(t, p, &tol)?,
            c => {
                return Err(Failure(
                    DmStatus::InvalidArgument,
                    format!("unknown criterion {c}"),
                ))
            }
        };
        *slot = DmVerdict {
            divisible: v.divisible,
            has_violation: v.first_violation_time.is_some(),
            first_violation_time: v.first_violation_time.unwrap_or(f64::NAN),
            worst_value: v.worst_value,
        };
        Ok(())
    })
}

/// `N_S` or `N_H` of the trajectory.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_nm_measure(
    handle: *const DmTrajectory,
    picture_code: u32,
    out_value: *mut f64,
) -> DmStatus {
    guard(|| {
        let t = traj(handle)?;
        let slot = out(out_value, "out_value")?;
        *slot = nm_measure(t, picture(picture_code)?).value;
        Ok(())
    })
}

/// Rates of the phase-covariant counterexample at time `t`.
///
/// # Safety
/// `out_rates` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dm_phcov_rates(t: f64, out_rates: *mut DmRates) -> DmStatus {
    guard(|| {
        let slot = out(out_rates, "out_rates")?;
        let p = PhaseCovariantParams::counterexample();
        let g = phase_covariant_rates(&p, t, Side::Left)?;
        let x = phase_covariant_rates(&p, t, Side::Right)?;
        *slot = DmRates {
            gamma_plus: g.plus,
            gamma_minus: g.minus,
            gamma_z: g.z,
            xi_plus: x.plus,
            xi_minus: x.minus,
            xi_z: x.z,
        };
        Ok(())
    })
}

/// # Safety
/// `effect_a4` must point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_sharpness(effect_a4: *const f64, out_value: *mut f64) -> DmStatus {
    guard(|| {
        let e = effect(effect_a4, "effect_a4")?;
        *out(out_value, "out_value")? = sharpness(&e);
        Ok(())
    })
}

/// Incompatibility of the binary POVMs `(M, 𝟙−M)` and `(N, 𝟙−N)` under
/// mixing with the trivial POVM `(p0 𝟙, p1 𝟙)`.
///
/// # Safety
/// `m_a4`, `n_a4` must point to 4 doubles each.
#[no_mangle]
pub unsafe extern "C" fn dm_incompat_p(
    m_a4: *const f64,
    n_a4: *const f64,
    p0: f64,
    p1: f64,
    out_value: *mut f64,
) -> DmStatus {
    guard(|| {
        let m = BinaryPovm::new(effect(m_a4, "m_a4")?);
        let n = BinaryPovm::new(effect(n_a4, "n_a4")?);
        *out(out_value, "out_value")? = incompat_p(&m, &n, (p0, p1))?;
        Ok(())
    })
}

/// Incompatibility under mixing with the completely depolarized POVMs.
///
/// # Safety
/// `m_a4`, `n_a4` must point to 4 doubles each.
#[no_mangle]
pub unsafe extern "C" fn dm_incompat_steer(
    m_a4: *const f64,
    n_a4: *const f64,
    out_value: *mut f64,
) -> DmStatus {
    guard(|| {
        let m = BinaryPovm::new(effect(m_a4, "m_a4")?);
        let n = BinaryPovm::new(effect(n_a4, "n_a4")?);
        *out(out_value, "out_value")? = incompat_steer(&m, &n)?;
        Ok(())
    })
}

/// Smallest eigenvalue of the Choi matrix of a row-major Bloch matrix.
///
/// # Safety
/// `bloch_matrix` must point to 16 doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_choi_min_eigenvalue(
    bloch_matrix: *const f64,
    out_value: *mut f64,
) -> DmStatus {
    guard(|| {
        if bloch_matrix.is_null() {
            return Err(null("bloch_matrix"));
        }
        let src = std::slice::from_raw_parts(bloch_matrix, 16);
        let m = Matrix4::from_row_slice(src);
        *out(out_value, "out_value")? = choi_from_bloch_matrix(&m)?.min_eigval();
        Ok(())
    })
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
