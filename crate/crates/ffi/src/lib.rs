//! C ABI over the simulator, the INDI estimator and the residual network.
//!
//! Every function returns an [`RlStatus`]. On failure the message is kept per
//! thread and can be read with [`rl_last_error`]. Handles are opaque and must
//! be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rotorlab::dynamics::{SensorFrame, Simulator};
use rotorlab::evaluation::{Scenario, ScenarioConfig};
use rotorlab::indi::{IndiConfig, IndiEstimator};
use rotorlab::learning::{MlpModel, FEATURE_DIM, LABEL_DIM};
use rotorlab::mathcore::Vec3;
use rotorlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NotReady = 5,
    Numerical = 6,
    Panic = 7,
}

/// Trained residual network.
pub struct RlModel(MlpModel);

/// Simulated vehicle with its scenario.
pub struct RlSimulator {
    sim: Simulator,
    scenario: Scenario,
}

/// INDI filter bank.
pub struct RlIndi(IndiEstimator);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlVehicleState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Row-major body-to-world rotation.
    pub rotation: [f64; 9],
    pub angular_velocity: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlSensorFrame {
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
    pub rpm: [f64; 4],
    pub pwm: [f64; 4],
    pub timestamp: f64,
}

/// Force in N (world frame) and torque in N·m (body frame).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlResidual {
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::Io { .. } => RlStatus::Io,
        Error::Parse { .. } | Error::Csv { .. } | Error::ModelFormat(_) => RlStatus::Parse,
        Error::FilterNotWarm { .. } => RlStatus::NotReady,
        Error::NonFinite(_) | Error::Singular(_) | Error::NonFiniteLoss { .. } => RlStatus::Numerical,
        _ => RlStatus::InvalidArgument,
    }
}

fn fail(status: RlStatus, msg: impl Into<String>) -> RlStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), RlStatus>) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(RlStatus::Panic, "internal panic"),
    }
}

fn check(r: rotorlab::Result<()>) -> Result<(), RlStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn lift<T>(r: rotorlab::Result<T>) -> Result<T, RlStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), RlStatus> {
    if p.is_null() {
        Err(fail(RlStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, RlStatus> {
    non_null(p, "path")?;
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(RlStatus::InvalidArgument, "path is not valid UTF-8"))
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file written by the training pipeline.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_model_load(path: *const c_char, out: *mut *mut RlModel) -> RlStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let model = lift(MlpModel::load_expecting(&path, FEATURE_DIM, LABEL_DIM))?;
        *out = Box::into_raw(Box::new(RlModel(model)));
        Ok(())
    })
}

/// Predicts the residual from a 19-element feature vector.
///
/// # Safety
/// `features` must point to 19 doubles; `model` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_model_predict(model: *const RlModel, features: *const f64, out: *mut RlResidual) -> RlStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(features, "features")?;
        non_null(out, "out")?;
        let x: &[f64; FEATURE_DIM] = &*features.cast();
        let e = lift((*model).0.predict_residual(x, 0.0))?;
        *out = RlResidual { force: e.force.to_array(), torque: e.torque.to_array() };
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`rl_model_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rl_model_free(model: *mut RlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Creates a simulator from a TOML scenario file, or the defaults when
/// `config_path` is null. The vehicle starts hovering at `position`.
///
/// # Safety
/// `config_path` must be null or NUL-terminated; `position` must point to 3
/// doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_new(
    config_path: *const c_char,
    payload: bool,
    seed: u64,
    position: *const f64,
    out: *mut *mut RlSimulator,
) -> RlStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(position, "position")?;
        let config = if config_path.is_null() {
            ScenarioConfig::default()
        } else {
            lift(ScenarioConfig::load(&path_arg(config_path)?))?
        };
        let scenario = lift(config.build())?;
        let p: &[f64; 3] = &*position.cast();
        let sim = lift(Simulator::new(
            scenario.vehicle.clone(),
            payload.then_some(scenario.payload),
            scenario.residual.clone(),
            scenario.noise,
            scenario.physics_dt,
            seed,
            Vec3::from(*p),
        ))?;
        *out = Box::into_raw(Box::new(RlSimulator { sim, scenario }));
        Ok(())
    })
}

/// Sets commanded rotor speeds (rad/s) for the following steps.
///
/// # Safety
/// `sim` must be valid and `speeds` must point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_set_command(sim: *mut RlSimulator, speeds: *const f64) -> RlStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(speeds, "speeds")?;
        let s: &[f64; 4] = &*speeds.cast();
        if s.iter().any(|v| !v.is_finite()) {
            return Err(fail(RlStatus::InvalidArgument, "rotor speeds must be finite"));
        }
        (*sim).sim.set_command(*s);
        Ok(())
    })
}

/// Advances by `steps` physics steps.
///
/// # Safety
/// `sim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_advance(sim: *mut RlSimulator, steps: usize) -> RlStatus {
    guard(|| {
        non_null(sim, "sim")?;
        check((*sim).sim.advance(steps))
    })
}

/// Physics steps per control tick of the scenario.
///
/// # Safety
/// `sim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_substeps(sim: *const RlSimulator, out: *mut usize) -> RlStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        *out = (*sim).scenario.substeps;
        Ok(())
    })
}

/// # Safety
/// `sim` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_state(sim: *const RlSimulator, out: *mut RlVehicleState) -> RlStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        let v = (*sim).sim.vehicle();
        *out = RlVehicleState {
            position: v.position.to_array(),
            velocity: v.velocity.to_array(),
            rotation: v.rotation.to_row_major(),
            angular_velocity: v.angular_velocity.to_array(),
        };
        Ok(())
    })
}

/// Draws one noisy sensor sample.
///
/// # Safety
/// `sim` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_sense(sim: *mut RlSimulator, out: *mut RlSensorFrame) -> RlStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        let f = (*sim).sim.sense();
        *out = RlSensorFrame {
            accel: f.accel.to_array(),
            gyro: f.gyro.to_array(),
            rpm: f.rpm,
            pwm: f.pwm,
            timestamp: f.timestamp,
        };
        Ok(())
    })
}

/// Ground-truth residual acting on the vehicle.
///
/// # Safety
/// `sim` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_true_residual(sim: *const RlSimulator, out: *mut RlResidual) -> RlStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        let (f, t) = (*sim).sim.true_residual();
        *out = RlResidual { force: f.to_array(), torque: t.to_array() };
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`rl_sim_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rl_sim_free(sim: *mut RlSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_indi_new(cutoff_hz: f64, sample_rate_hz: f64, out: *mut *mut RlIndi) -> RlStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let est = lift(IndiEstimator::new(IndiConfig { cutoff_hz, sample_rate_hz }))?;
        *out = Box::into_raw(Box::new(RlIndi(est)));
        Ok(())
    })
}

/// Feeds one sample taken from `sim` and writes the rotor-speed based
/// estimate. Returns `NotReady` until the filters are warm. Payload
/// simulators include the cable term.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_indi_update(
    indi: *mut RlIndi,
    sim: *const RlSimulator,
    frame: *const RlSensorFrame,
    out: *mut RlResidual,
) -> RlStatus {
    guard(|| {
        non_null(indi, "indi")?;
        non_null(sim, "sim")?;
        non_null(frame, "frame")?;
        non_null(out, "out")?;
        let s = &*sim;
        let f = &*frame;
        let frame = SensorFrame {
            accel: Vec3::from(f.accel),
            gyro: Vec3::from(f.gyro),
            rpm: f.rpm,
            pwm: f.pwm,
            timestamp: f.timestamp,
        };
        let payload = s.sim.payload_params().zip(s.sim.payload().map(|p| p.position));
        let e = lift((*indi).0.update(s.sim.params(), &frame, s.sim.vehicle(), payload))?;
        *out = RlResidual { force: e.indi.force.to_array(), torque: e.indi.torque.to_array() };
        Ok(())
    })
}

/// # Safety
/// `indi` must come from [`rl_indi_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rl_indi_free(indi: *mut RlIndi) {
    if !indi.is_null() {
        drop(Box::from_raw(indi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rotorlab::mathcore::Mat3;

    #[test]
    fn row_major_matches_core() {
        let r = Mat3::rot_z(0.3);
        assert_eq!(Mat3::from_row_major(r.to_row_major()), r);
    }

    #[test]
    fn error_status_mapping() {
        assert_eq!(status_of(&Error::FilterNotWarm { samples: 1, required: 5 }), RlStatus::NotReady);
        assert_eq!(status_of(&Error::ModelFormat("x".into())), RlStatus::Parse);
        assert_eq!(status_of(&Error::InvalidParameter("x".into())), RlStatus::InvalidArgument);
    }
}
