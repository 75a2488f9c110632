//! C ABI for suvclip.
//!
//! Volumes and masks cross the boundary as opaque handles created by
//! `suv_*_read` / `suv_*_from_data` and released with the matching
//! `suv_*_free`. Every fallible call returns a [`SuvStatus`]; on failure the
//! message is available from [`suv_last_error_message`] on the same thread.
//! Panics are caught and reported as `SUV_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use suvclip::metrics::{evaluate, wilcoxon_signed_rank};
use suvclip::normalize::clip;
use suvclip::sweep::{compute_threshold, threshold_segment};
use suvclip::{nifti, Error, GridGeometry, Mask, Volume};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

impl From<&Error> for SuvStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Geometry(_) => SuvStatus::Geometry,
            Error::Io { .. } | Error::Csv { .. } => SuvStatus::Io,
            Error::BadMagic { .. }
            | Error::UnsupportedDatatype { .. }
            | Error::Truncated { .. }
            | Error::BadHeader { .. }
            | Error::Json { .. } => SuvStatus::Format,
            _ => SuvStatus::InvalidArgument,
        }
    }
}

/// Opaque intensity volume.
pub struct SuvVolume(Volume);

/// Opaque binary mask.
pub struct SuvMask(Mask);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuvMetrics {
    pub dsc: f64,
    pub nsd: f64,
    pub nsd_tau_mm: f64,
    pub hd95_mm: f64,
    pub empty_pred: bool,
    pub empty_gt: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuvWilcoxon {
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
    pub degenerate: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NULs removed"));
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SuvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SuvStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("{what} is NULL"));
            SuvStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_last_error(msg);
            SuvStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            let status = SuvStatus::from(&e);
            set_last_error(e.to_string());
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SuvStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn array3<T: Copy>(p: *const T, what: &'static str) -> Result<[T; 3], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok([*p, *p.add(1), *p.add(2)])
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread (empty after success).
/// The pointer stays valid until the next suvclip call on this thread.
#[no_mangle]
pub extern "C" fn suv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn suv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a NIfTI-1 volume (`.nii` or `.nii.gz`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn suv_volume_read(path: *const c_char, out: *mut *mut SuvVolume) -> SuvStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, SuvVolume(nifti::read_volume(path)?))
    })
}

/// Builds an axis-aligned volume from x-fastest `data` of length
/// `dims[0] * dims[1] * dims[2]`.
///
/// # Safety
/// `dims`, `spacing` and `origin` must point to 3 elements, `data` to
/// `len` elements, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn suv_volume_from_data(
    dims: *const usize,
    spacing: *const f64,
    origin: *const f64,
    data: *const f64,
    len: usize,
    out: *mut *mut SuvVolume,
) -> SuvStatus {
    guard(|| {
        let g = GridGeometry::axis_aligned(
            array3(dims, "dims")?,
            array3(spacing, "spacing")?,
            array3(origin, "origin")?,
        )?;
        let v = Volume::new(g, slice(data, len, "data")?.to_vec())?;
        put(out, SuvVolume(v))
    })
}

/// Writes `vol` as float32 NIfTI-1; gzip when the path ends in `.gz`.
///
/// # Safety
/// `vol` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn suv_volume_write(vol: *const SuvVolume, path: *const c_char) -> SuvStatus {
    guard(|| {
        let vol = deref(vol, "vol")?;
        nifti::write_volume(&vol.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Copies the grid dimensions into `dims[0..3]`.
///
/// # Safety
/// `vol` must be a live handle and `dims` must have room for 3 elements.
#[no_mangle]
pub unsafe extern "C" fn suv_volume_dims(vol: *const SuvVolume, dims: *mut usize) -> SuvStatus {
    guard(|| {
        let vol = deref(vol, "vol")?;
        if dims.is_null() {
            return Err(Fail::Null("dims"));
        }
        for (a, d) in vol.0.geometry().dims.iter().enumerate() {
            *dims.add(a) = *d;
        }
        Ok(())
    })
}

/// Number of voxels, or 0 for NULL.
///
/// # Safety
/// `vol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn suv_volume_len(vol: *const SuvVolume) -> usize {
    vol.as_ref().map_or(0, |v| v.0.len())
}

/// Borrowed pointer to the x-fastest voxel values, valid until the handle
/// is freed. NULL for a NULL handle.
///
/// # Safety
/// `vol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn suv_volume_data(vol: *const SuvVolume) -> *const f64 {
    vol.as_ref().map_or(ptr::null(), |v| v.0.data().as_ptr())
}

/// # Safety
/// `vol` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn suv_volume_free(vol: *mut SuvVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// Reads a NIfTI-1 mask; every voxel must be 0 or 1.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn suv_mask_read(path: *const c_char, out: *mut *mut SuvMask) -> SuvStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, SuvMask(nifti::read_mask(path)?))
    })
}

/// Builds an axis-aligned mask from x-fastest 0/1 `data`.
///
/// # Safety
/// As for [`suv_volume_from_data`].
#[no_mangle]
pub unsafe extern "C" fn suv_mask_from_data(
    dims: *const usize,
    spacing: *const f64,
    origin: *const f64,
    data: *const u8,
    len: usize,
    out: *mut *mut SuvMask,
) -> SuvStatus {
    guard(|| {
        let g = GridGeometry::axis_aligned(
            array3(dims, "dims")?,
            array3(spacing, "spacing")?,
            array3(origin, "origin")?,
        )?;
        let m = Mask::new(g, slice(data, len, "data")?.to_vec())?;
        put(out, SuvMask(m))
    })
}

/// Writes `mask` as uint8 NIfTI-1.
///
/// # Safety
/// `mask` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn suv_mask_write(mask: *const SuvMask, path: *const c_char) -> SuvStatus {
    guard(|| {
        let mask = deref(mask, "mask")?;
        nifti::write_mask(&mask.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Copies the grid dimensions into `dims[0..3]`.
///
/// # Safety
/// `mask` must be a live handle and `dims` must have room for 3 elements.
#[no_mangle]
pub unsafe extern "C" fn suv_mask_dims(mask: *const SuvMask, dims: *mut usize) -> SuvStatus {
    guard(|| {
        let mask = deref(mask, "mask")?;
        if dims.is_null() {
            return Err(Fail::Null("dims"));
        }
        for (a, d) in mask.0.geometry().dims.iter().enumerate() {
            *dims.add(a) = *d;
        }
        Ok(())
    })
}

/// Number of foreground voxels, or 0 for NULL.
///
/// # Safety
/// `mask` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn suv_mask_count(mask: *const SuvMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.count())
}

/// Borrowed pointer to the x-fastest 0/1 values.
///
/// # Safety
/// `mask` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn suv_mask_data(mask: *const SuvMask) -> *const u8 {
    mask.as_ref().map_or(ptr::null(), |m| m.0.data().as_ptr())
}

/// # Safety
/// `mask` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn suv_mask_free(mask: *mut SuvMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// DSC, NSD at `tau_mm` and HD-95 between two masks on the same grid.
///
/// # Safety
/// `pred` and `gt` must be live handles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn suv_metrics_evaluate(
    pred: *const SuvMask,
    gt: *const SuvMask,
    tau_mm: f64,
    out: *mut SuvMetrics,
) -> SuvStatus {
    guard(|| {
        let (pred, gt) = (deref(pred, "pred")?, deref(gt, "gt")?);
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let m = evaluate(&pred.0, &gt.0, tau_mm)?;
        *out = SuvMetrics {
            dsc: m.dsc,
            nsd: m.nsd,
            nsd_tau_mm: m.nsd_tau_mm,
            hd95_mm: m.hd95_mm,
            empty_pred: m.flag_empty_pred,
            empty_gt: m.flag_empty_gt,
        };
        Ok(())
    })
}

/// Two-sided paired Wilcoxon signed-rank test on `a[i] - b[i]`.
///
/// # Safety
/// `a` and `b` must point to `n` elements and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn suv_wilcoxon(a: *const f64, b: *const f64, n: usize, out: *mut SuvWilcoxon) -> SuvStatus {
    guard(|| {
        let (a, b) = (slice(a, n, "a")?, slice(b, n, "b")?);
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let r = wilcoxon_signed_rank(a, b)?;
        *out = SuvWilcoxon {
            statistic: r.statistic,
            w_plus: r.w_plus,
            w_minus: r.w_minus,
            n: r.n,
            p_value: r.p_value,
            exact: r.exact,
            degenerate: r.degenerate,
        };
        Ok(())
    })
}

/// Absolute threshold `p / 100 * suvmax`.
#[no_mangle]
pub extern "C" fn suv_compute_threshold(p: f64, suvmax: f64) -> f64 {
    compute_threshold(p, suvmax)
}

/// Voxels inside `scope` with uptake at or above `threshold`.
///
/// # Safety
/// `pet` and `scope` must be live handles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn suv_threshold_segment(
    pet: *const SuvVolume,
    scope: *const SuvMask,
    threshold: f64,
    out: *mut *mut SuvMask,
) -> SuvStatus {
    guard(|| {
        let (pet, scope) = (deref(pet, "pet")?, deref(scope, "scope")?);
        put(out, SuvMask(threshold_segment(&pet.0, &scope.0, threshold)?))
    })
}

/// New volume with intensities clamped to `[min_t, max_t]`.
///
/// # Safety
/// `vol` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn suv_clip(vol: *const SuvVolume, min_t: f64, max_t: f64, out: *mut *mut SuvVolume) -> SuvStatus {
    guard(|| {
        let vol = deref(vol, "vol")?;
        put(out, SuvVolume(clip(&vol.0, min_t, max_t)?))
    })
}
