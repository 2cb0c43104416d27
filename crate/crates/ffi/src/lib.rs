//! C interface to the vcolor engine.
//!
//! Every function returns a [`VcStatus`]; on failure the message is
//! available from [`vc_last_error_message`] until the next call on the same
//! thread. Objects are opaque handles released with their `_free` function.
//! Images are packed 8-bit RGB, row-major; planes are row-major `float`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use vcolor::colorspace::{lab_to_rgb, rgb_to_lab, LabFrame, Rgb8Image};
use vcolor::correction::{composite, correction_mask, CorrectionOptions};
use vcolor::flow::{estimate_flow, load_flo, write_flo, FlowField, FlowParams};
use vcolor::metrics::{cdc, colorfulness, psnr};
use vcolor::plane::Plane;
use vcolor::warp::{assemble_warp_frame, warp_chroma};
use vcolor::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Format = 5,
    Colorizer = 6,
    Panic = 7,
}

/// A CIELAB frame (L, A and B planes of equal size).
pub struct VcLabFrame(LabFrame);

/// A backward optical-flow field.
pub struct VcFlow(FlowField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("nul bytes removed")));
}

fn status_of(err: &Error) -> VcStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::LuminanceMismatch { .. } => VcStatus::DimensionMismatch,
        Error::InvalidDimensions { .. } | Error::Config(_) | Error::Sequence(_) => VcStatus::InvalidArgument,
        Error::Io { .. } => VcStatus::Io,
        Error::Format { .. } | Error::Image { .. } | Error::Json { .. } => VcStatus::Format,
        Error::Provider { .. } => VcStatus::Colorizer,
    }
}

struct Fail(VcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(VcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Fail {
    Fail(VcStatus::InvalidArgument, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VcStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            VcStatus::Panic
        }
    }
}

fn pixel_count(width: usize, height: usize) -> Result<usize, Fail> {
    match width.checked_mul(height) {
        Some(n) if n > 0 => Ok(n),
        _ => Err(invalid(format!("invalid dimensions {width}x{height}"))),
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn rgb_image(rgb: *const u8, width: usize, height: usize) -> Result<Rgb8Image, Fail> {
    let n = pixel_count(width, height)?.checked_mul(3).ok_or_else(|| invalid("image too large"))?;
    let bytes = slice(rgb, n, "rgb")?;
    Ok(Rgb8Image::new(width, height, bytes.to_vec())?)
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// is valid until the next vcolor call on the same thread.
#[no_mangle]
pub extern "C" fn vc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Convert a packed RGB image to a new Lab frame.
///
/// # Safety
/// `rgb` must point to `width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_lab_from_rgb(
    rgb: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut VcLabFrame,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let img = rgb_image(rgb, width, height)?;
        *out = Box::into_raw(Box::new(VcLabFrame(rgb_to_lab(&img))));
        Ok(())
    })
}

/// Build a Lab frame from three planes of `width * height` floats.
///
/// # Safety
/// Each plane pointer must reference `width * height` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_lab_from_planes(
    l: *const f32,
    a: *const f32,
    b: *const f32,
    width: usize,
    height: usize,
    out: *mut *mut VcLabFrame,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = pixel_count(width, height)?;
        let plane = |p: *const f32, what: &str| -> Result<Plane<f32>, Fail> {
            Ok(Plane::new(width, height, slice(p, n, what)?.to_vec())?)
        };
        let frame = LabFrame::new(plane(l, "l")?, plane(a, "a")?, plane(b, "b")?)?;
        *out = Box::into_raw(Box::new(VcLabFrame(frame)));
        Ok(())
    })
}

/// Write the frame as packed RGB into `rgb`, which holds `len` bytes.
///
/// # Safety
/// `frame` must be a live handle and `rgb` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vc_lab_to_rgb(frame: *const VcLabFrame, rgb: *mut u8, len: usize) -> VcStatus {
    guard(|| {
        let frame = &handle(frame, "frame")?.0;
        let img = lab_to_rgb(frame);
        if len != img.as_bytes().len() {
            return Err(invalid(format!("buffer holds {len} bytes, need {}", img.as_bytes().len())));
        }
        slice_mut(rgb, len, "rgb")?.copy_from_slice(img.as_bytes());
        Ok(())
    })
}

/// Copy one channel (0 = L, 1 = A, 2 = B) into `dst`, which holds `len` floats.
///
/// # Safety
/// `frame` must be a live handle and `dst` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn vc_lab_channel(frame: *const VcLabFrame, channel: u32, dst: *mut f32, len: usize) -> VcStatus {
    guard(|| {
        let frame = &handle(frame, "frame")?.0;
        let plane = match channel {
            0 => &frame.l,
            1 => &frame.a,
            2 => &frame.b,
            c => return Err(invalid(format!("channel {c} is not 0, 1 or 2"))),
        };
        if len != plane.len() {
            return Err(invalid(format!("buffer holds {len} floats, need {}", plane.len())));
        }
        slice_mut(dst, len, "dst")?.copy_from_slice(plane.as_slice());
        Ok(())
    })
}

/// Report the frame size.
///
/// # Safety
/// `frame` must be a live handle; `width` and `height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_lab_dims(frame: *const VcLabFrame, width: *mut usize, height: *mut usize) -> VcStatus {
    guard(|| {
        let frame = &handle(frame, "frame")?.0;
        *out_ptr(width, "width")? = frame.width();
        *out_ptr(height, "height")? = frame.height();
        Ok(())
    })
}

/// # Safety
/// `frame` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vc_lab_free(frame: *mut VcLabFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Estimate the backward flow of `target` into `source` (luminance planes of
/// `width * height` floats). Zero parameters select the defaults.
///
/// # Safety
/// Both planes must reference `width * height` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_flow_estimate(
    target: *const f32,
    source: *const f32,
    width: usize,
    height: usize,
    pyramid_levels: usize,
    window_radius: usize,
    iterations: usize,
    out: *mut *mut VcFlow,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = pixel_count(width, height)?;
        let t = Plane::new(width, height, slice(target, n, "target")?.to_vec())?;
        let s = Plane::new(width, height, slice(source, n, "source")?.to_vec())?;
        let d = FlowParams::default();
        let pick = |v: usize, default: usize| if v == 0 { default } else { v };
        let params = FlowParams {
            pyramid_levels: pick(pyramid_levels, d.pyramid_levels),
            window_radius: pick(window_radius, d.window_radius),
            iterations: pick(iterations, d.iterations),
        };
        *out = Box::into_raw(Box::new(VcFlow(estimate_flow(&t, &s, &params)?)));
        Ok(())
    })
}

/// Build a flow field from displacement planes.
///
/// # Safety
/// `u` and `v` must reference `width * height` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_flow_from_planes(
    u: *const f32,
    v: *const f32,
    width: usize,
    height: usize,
    out: *mut *mut VcFlow,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = pixel_count(width, height)?;
        let u = Plane::new(width, height, slice(u, n, "u")?.to_vec())?;
        let v = Plane::new(width, height, slice(v, n, "v")?.to_vec())?;
        *out = Box::into_raw(Box::new(VcFlow(FlowField::new(u, v)?)));
        Ok(())
    })
}

/// Read a Middlebury `.flo` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_flow_load(path: *const c_char, out: *mut *mut VcFlow) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let flow = load_flo(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(VcFlow(flow)));
        Ok(())
    })
}

/// Write a Middlebury `.flo` file.
///
/// # Safety
/// `flow` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vc_flow_write(flow: *const VcFlow, path: *const c_char) -> VcStatus {
    guard(|| {
        let flow = &handle(flow, "flow")?.0;
        write_flo(flow, path_arg(path)?)?;
        Ok(())
    })
}

/// Copy the displacement planes into `u` and `v`, each holding `len` floats.
///
/// # Safety
/// `flow` must be a live handle; `u` and `v` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn vc_flow_planes(flow: *const VcFlow, u: *mut f32, v: *mut f32, len: usize) -> VcStatus {
    guard(|| {
        let flow = &handle(flow, "flow")?.0;
        if len != flow.u.len() {
            return Err(invalid(format!("buffers hold {len} floats, need {}", flow.u.len())));
        }
        slice_mut(u, len, "u")?.copy_from_slice(flow.u.as_slice());
        slice_mut(v, len, "v")?.copy_from_slice(flow.v.as_slice());
        Ok(())
    })
}

/// # Safety
/// `flow` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vc_flow_free(flow: *mut VcFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// One propagation step: warp `prev_final` along `flow`, flag pixels below
/// `tau_db`, and fill them from `colorized` (whose L plane is the current
/// luminance). Writes the new frame to `out` and, if non-NULL, the corrected
/// pixel fraction to `corrected_fraction`.
///
/// # Safety
/// Handles must be live; `out` must be writable; `corrected_fraction` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn vc_propagate_step(
    prev_final: *const VcLabFrame,
    colorized: *const VcLabFrame,
    flow: *const VcFlow,
    tau_db: f64,
    out: *mut *mut VcLabFrame,
    corrected_fraction: *mut f64,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let prev = &handle(prev_final, "prev_final")?.0;
        let colorized = &handle(colorized, "colorized")?.0;
        let flow = &handle(flow, "flow")?.0;
        if colorized.dims() != prev.dims() {
            return Err(Fail(
                VcStatus::DimensionMismatch,
                format!("colorized frame is {:?}, previous frame is {:?}", colorized.dims(), prev.dims()),
            ));
        }
        let chroma = warp_chroma(prev, flow)?;
        let warped = assemble_warp_frame(&colorized.l, &chroma)?;
        let mask = correction_mask(&warped, &chroma.valid, prev, tau_db, &CorrectionOptions::default())?;
        let next = composite(&warped, colorized, &mask)?;
        if let Some(f) = corrected_fraction.as_mut() {
            *f = mask.corrected_fraction();
        }
        *out = Box::into_raw(Box::new(VcLabFrame(next)));
        Ok(())
    })
}

/// PSNR in dB between two packed RGB images of equal size.
///
/// # Safety
/// Both images must reference `width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_psnr(
    result: *const u8,
    reference: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = psnr(&rgb_image(result, width, height)?, &rgb_image(reference, width, height)?)?;
        Ok(())
    })
}

/// Colorfulness of a packed RGB image.
///
/// # Safety
/// `rgb` must reference `width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_colorfulness(rgb: *const u8, width: usize, height: usize, out: *mut f64) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = colorfulness(&rgb_image(rgb, width, height)?);
        Ok(())
    })
}

/// Color distribution consistency of `frames` consecutive packed RGB images
/// stored back to back.
///
/// # Safety
/// `rgb` must reference `frames * width * height * 3` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vc_cdc(rgb: *const u8, frames: usize, width: usize, height: usize, out: *mut f64) -> VcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = pixel_count(width, height)? * 3;
        let total = n.checked_mul(frames).ok_or_else(|| invalid("sequence too large"))?;
        let bytes = slice(rgb, total, "rgb")?;
        let video = bytes
            .chunks_exact(n)
            .map(|c| Rgb8Image::new(width, height, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        *out = cdc(&video)?;
        Ok(())
    })
}
