//! C interface to `fretsim`.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a
//! [`FretsimStatus`]; on failure [`fretsim_last_error`] describes what went
//! wrong on the calling thread.

use fretsim::fit::effective_lifetime;
use fretsim::inversion::{invert_radius, tau_eff_curve, CurveSettings, RadiusCurve};
use fretsim::model::{fret_efficiency, quenched_lifetime, DepthDistribution, ModelParams};
use fretsim::sim::{compose_signal, ensemble_decay, sample_histogram, SignalComposition, TcspcHistogram};
use fretsim::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result of a call. Values mirror the process exit codes of the command-line
/// tool where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FretsimStatus {
    Ok = 0,
    /// Argument outside the model's domain, or an unmet precondition.
    InvalidArgument = 2,
    /// Malformed input data.
    Format = 3,
    /// Fit or quadrature failure, non-monotone curve.
    Numerical = 4,
    /// Value outside the range covered by a calibration curve.
    OutOfRange = 5,
    NullPointer = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FretsimStatus {
    match e {
        Error::Range { .. } => FretsimStatus::OutOfRange,
        other => match other.exit_code() {
            3 => FretsimStatus::Format,
            4 => FretsimStatus::Numerical,
            _ => FretsimStatus::InvalidArgument,
        },
    }
}

enum Failure {
    Null,
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FretsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FretsimStatus::Ok,
        Ok(Err(Failure::Null)) => {
            set_error("null pointer argument".into());
            FretsimStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            FretsimStatus::Internal
        }
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fretsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Donor/acceptor model with its depth distribution.
pub struct FretsimModel {
    params: ModelParams,
    depth: DepthDistribution,
}

pub struct FretsimHistogram(TcspcHistogram);

pub struct FretsimCurve(RadiusCurve);

unsafe fn out<T>(dst: *mut T, v: T) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(Failure::Null);
    }
    dst.write(v);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null)
}

/// NV ensemble under a WSe₂ monolayer.
///
/// # Safety
/// `model` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn fretsim_model_new_default(model: *mut *mut FretsimModel) -> FretsimStatus {
    guard(|| {
        let params = ModelParams::nv_wse2();
        let depth = params.depth_distribution()?;
        out(model, Box::into_raw(Box::new(FretsimModel { params, depth })))
    })
}

/// Model with explicit constants; `distance_exponent` is 4 or 6.
///
/// # Safety
/// `model` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn fretsim_model_new(
    foerster_radius_nm: f64,
    bulk_lifetime_ns: f64,
    distance_exponent: u32,
    depth_mean_nm: f64,
    depth_sigma_nm: f64,
    model: *mut *mut FretsimModel,
) -> FretsimStatus {
    guard(|| {
        let params = ModelParams {
            foerster_radius_nm,
            bulk_lifetime_ns,
            distance_exponent: distance_exponent.try_into().map_err(Failure::Core)?,
            depth_mean_nm,
            depth_sigma_nm,
            unquenched_intensity: 1.0,
        };
        params.validate()?;
        let depth = params.depth_distribution()?;
        out(model, Box::into_raw(Box::new(FretsimModel { params, depth })))
    })
}

/// # Safety
/// `model` must be NULL or a handle from a `fretsim_model_new*` call that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn fretsim_model_free(model: *mut FretsimModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `lifetime_ns` writable.
#[no_mangle]
pub unsafe extern "C" fn fretsim_quenched_lifetime(
    model: *const FretsimModel,
    z_nm: f64,
    lifetime_ns: *mut f64,
) -> FretsimStatus {
    guard(|| out(lifetime_ns, quenched_lifetime(z_nm, &handle(model)?.params)?))
}

/// # Safety
/// `model` must be a live handle and `efficiency` writable.
#[no_mangle]
pub unsafe extern "C" fn fretsim_fret_efficiency(
    model: *const FretsimModel,
    z_nm: f64,
    efficiency: *mut f64,
) -> FretsimStatus {
    guard(|| out(efficiency, fret_efficiency(z_nm, &handle(model)?.params)?))
}

/// Photon histogram of the donor ensemble on the default 4096 × 32 ps grid
/// with the 326 ps instrument response. `with_acceptor` adds the WSe₂
/// emission seen on a flake.
///
/// # Safety
/// `model` must be a live handle and `histogram` writable.
#[no_mangle]
pub unsafe extern "C" fn fretsim_simulate_decay(
    model: *const FretsimModel,
    photons: f64,
    seed: u64,
    with_acceptor: bool,
    histogram: *mut *mut FretsimHistogram,
) -> FretsimStatus {
    guard(|| {
        let m = handle(model)?;
        let grid = fretsim::sim::TimeGrid::tcspc_default();
        let irf = fretsim::sim::IrfSpec::measured_setup();
        let comp = if with_acceptor {
            SignalComposition::on_flake()
        } else {
            SignalComposition::donor_only()
        };
        let curve = compose_signal(&ensemble_decay(&m.params, &m.depth, &grid)?, &comp, &irf)?;
        let h = sample_histogram(&curve, photons, seed)?;
        out(histogram, Box::into_raw(Box::new(FretsimHistogram(h))))
    })
}

/// # Safety
/// `histogram` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fretsim_histogram_free(histogram: *mut FretsimHistogram) {
    if !histogram.is_null() {
        drop(Box::from_raw(histogram));
    }
}

/// Number of time bins.
///
/// # Safety
/// `histogram` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fretsim_histogram_len(histogram: *const FretsimHistogram) -> usize {
    histogram.as_ref().map_or(0, |h| h.0.counts.len())
}

/// Copies `min(len, bins)` counts into `counts`.
///
/// # Safety
/// `histogram` must be a live handle and `counts` must point to `len`
/// writable `uint32_t`.
#[no_mangle]
pub unsafe extern "C" fn fretsim_histogram_counts(
    histogram: *const FretsimHistogram,
    counts: *mut u32,
    len: usize,
) -> FretsimStatus {
    guard(|| {
        let h = handle(histogram)?;
        if counts.is_null() {
            return Err(Failure::Null);
        }
        let n = len.min(h.0.counts.len());
        ptr::copy_nonoverlapping(h.0.counts.as_ptr(), counts, n);
        Ok(())
    })
}

/// Gated mono-exponential lifetime (3 ns head cut, 1 % tail) of a histogram.
///
/// # Safety
/// `histogram` must be a live handle; `value_ns` and `sigma_ns` writable.
#[no_mangle]
pub unsafe extern "C" fn fretsim_effective_lifetime(
    histogram: *const FretsimHistogram,
    value_ns: *mut f64,
    sigma_ns: *mut f64,
) -> FretsimStatus {
    guard(|| {
        let e = effective_lifetime(&handle(histogram)?.0, &Default::default(), None)?;
        out(value_ns, e.value)?;
        out(sigma_ns, e.sigma)
    })
}

/// Effective lifetime against Förster radius on `points` radii in
/// `[r_min_nm, r_max_nm]`, for the model's bulk lifetime and depth profile.
///
/// # Safety
/// `model` must be a live handle and `curve` writable.
#[no_mangle]
pub unsafe extern "C" fn fretsim_curve_new(
    model: *const FretsimModel,
    r_min_nm: f64,
    r_max_nm: f64,
    points: usize,
    curve: *mut *mut FretsimCurve,
) -> FretsimStatus {
    guard(|| {
        let m = handle(model)?;
        let settings = CurveSettings {
            params: m.params,
            depth: m.depth,
            ..CurveSettings::nv_wse2()?
        };
        let c = tau_eff_curve(r_min_nm, r_max_nm, points, &settings)?;
        out(curve, Box::into_raw(Box::new(FretsimCurve(c))))
    })
}

/// # Safety
/// `curve` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fretsim_curve_free(curve: *mut FretsimCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Förster radius whose effective lifetime is `tau_eff_ns`, with the
/// uncertainty propagated from `sigma_ns`.
///
/// # Safety
/// `curve` must be a live handle; `radius_nm` and `radius_sigma_nm` writable.
#[no_mangle]
pub unsafe extern "C" fn fretsim_invert_radius(
    curve: *const FretsimCurve,
    tau_eff_ns: f64,
    sigma_ns: f64,
    radius_nm: *mut f64,
    radius_sigma_nm: *mut f64,
) -> FretsimStatus {
    guard(|| {
        let r = invert_radius(tau_eff_ns, sigma_ns, &handle(curve)?.0)?;
        out(radius_nm, r.value)?;
        out(radius_sigma_nm, r.sigma)
    })
}

/// Dwell time in seconds to collect `photons` at `count_rate_cps`.
///
/// # Safety
/// `seconds` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fretsim_photon_budget(count_rate_cps: f64, photons: f64, seconds: *mut f64) -> FretsimStatus {
    guard(|| out(seconds, fretsim::flim::photon_budget(count_rate_cps, photons)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn errors_set_status_and_message() {
        let mut s = 0.0;
        let st = unsafe { fretsim_photon_budget(-1.0, 10.0, &mut s) };
        assert_eq!(st, FretsimStatus::InvalidArgument);
        let msg = unsafe { CStr::from_ptr(fretsim_last_error()) }.to_str().unwrap();
        assert!(msg.contains("count rate"), "{msg}");
        assert_eq!(
            unsafe { fretsim_photon_budget(1.0, 1.0, ptr::null_mut()) },
            FretsimStatus::NullPointer
        );
    }

    #[test]
    fn handles_round_trip() {
        unsafe {
            let mut m = ptr::null_mut();
            assert_eq!(fretsim_model_new_default(&mut m), FretsimStatus::Ok);
            let mut e = 0.0;
            assert_eq!(fretsim_fret_efficiency(m, 13.0, &mut e), FretsimStatus::Ok);
            assert!((e - 0.5).abs() < 1e-15);
            let mut h = ptr::null_mut();
            assert_eq!(fretsim_simulate_decay(m, 1e5, 3, false, &mut h), FretsimStatus::Ok);
            let n = fretsim_histogram_len(h);
            let mut counts = vec![0u32; n];
            assert_eq!(fretsim_histogram_counts(h, counts.as_mut_ptr(), n), FretsimStatus::Ok);
            assert!(counts.iter().map(|&c| c as u64).sum::<u64>() > 90_000);
            let (mut v, mut s) = (0.0, 0.0);
            assert_eq!(fretsim_effective_lifetime(h, &mut v, &mut s), FretsimStatus::Ok);
            assert!(v > 3.0 && v < 6.0, "{v}");
            fretsim_histogram_free(h);
            fretsim_model_free(m);
            fretsim_model_free(ptr::null_mut());
        }
    }

    #[test]
    fn out_of_range_inversion() {
        unsafe {
            let mut m = ptr::null_mut();
            fretsim_model_new(13.0, 12.0, 4, 6.5, 2.7, &mut m);
            let mut c = ptr::null_mut();
            assert_eq!(fretsim_curve_new(m, 5.0, 30.0, 6, &mut c), FretsimStatus::Ok);
            let (mut r, mut s) = (0.0, 0.0);
            assert_eq!(
                fretsim_invert_radius(c, 50.0, 0.1, &mut r, &mut s),
                FretsimStatus::OutOfRange
            );
            assert_eq!(
                fretsim_model_new(13.0, 12.0, 5, 6.5, 2.7, &mut m),
                FretsimStatus::InvalidArgument
            );
            fretsim_curve_free(c);
            fretsim_model_free(m);
        }
    }
}
