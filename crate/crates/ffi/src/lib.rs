//! C ABI over `weylscale`.
//!
//! Objects cross the boundary as opaque handles created by `ws_*_new`-style
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`WsStatus`]; on failure the message is kept per thread and can
//! be read with [`ws_last_error_message`]. Panics are caught and reported as
//! [`WsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use weylscale::quasiequiv::{self, FormPath, KernelSign};
use weylscale::{dynamics, testfn, weyl, Complex64, Error, Grid, GridFunction};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    ZeroMode = 4,
    NumericalGuard = 5,
    Divergent = 6,
    Panic = 7,
}

/// Sampled test function.
pub struct WsFunction(GridFunction);

/// Galerkin model of `T` with its operator diagnostics.
pub struct WsGalerkin {
    trace_norm: f64,
    eigenvalues: Vec<f64>,
    matrix_element_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WsStatus {
    match e {
        Error::InvalidGrid(_) | Error::SupportOutsideGrid { .. } | Error::GridMismatch => WsStatus::InvalidGrid,
        Error::InvalidParameter { .. } => WsStatus::InvalidArgument,
        Error::ZeroMode { .. } => WsStatus::ZeroMode,
        Error::NumericalGuard { .. } => WsStatus::NumericalGuard,
    }
}

fn guarded(f: impl FnOnce() -> Result<(), WsStatus>) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            WsStatus::Panic
        }
    }
}

fn lib<T>(r: weylscale::Result<T>) -> Result<T, WsStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> WsStatus {
    set_error(format!("null pointer: {what}"));
    WsStatus::NullPointer
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, WsStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), WsStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

unsafe fn emit_function(out: *mut *mut WsFunction, f: GridFunction) -> Result<(), WsStatus> {
    write(out, Box::into_raw(Box::new(WsFunction(f))), "out")
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ws_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated, always
/// nul-terminated when `len > 0`). Returns the full message length, or 0 if
/// there is none.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn ws_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// `amplitude * exp(-1/(1-u^2))`, `u = (x - center)/width`, on the grid of `n` points over `[-half_width, half_width]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_function_bump(
    n: usize,
    half_width: f64,
    center: f64,
    width: f64,
    amp_re: f64,
    amp_im: f64,
    out: *mut *mut WsFunction,
) -> WsStatus {
    guarded(|| {
        let g = lib(Grid::new(n, half_width))?;
        let f = lib(GridFunction::bump(g, center, width, Complex64::new(amp_re, amp_im)))?;
        emit_function(out, f)
    })
}

/// Derivative of the bump; its integral vanishes.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_function_bump_derivative(
    n: usize,
    half_width: f64,
    center: f64,
    width: f64,
    amp_re: f64,
    amp_im: f64,
    out: *mut *mut WsFunction,
) -> WsStatus {
    guarded(|| {
        let g = lib(Grid::new(n, half_width))?;
        let f = lib(GridFunction::bump_derivative(g, center, width, Complex64::new(amp_re, amp_im)))?;
        emit_function(out, f)
    })
}

/// `a + b` on a common grid.
///
/// # Safety
/// All pointers must be valid; `a` and `b` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn ws_function_add(a: *const WsFunction, b: *const WsFunction, out: *mut *mut WsFunction) -> WsStatus {
    guarded(|| {
        let (a, b) = (as_ref(a, "a")?, as_ref(b, "b")?);
        emit_function(out, lib(a.0.add(&b.0))?)
    })
}

/// Number of samples of `f`.
///
/// # Safety
/// `f` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ws_function_len(f: *const WsFunction) -> usize {
    f.as_ref().map_or(0, |f| f.0.samples().len())
}

/// Copies the samples into `re` and `im`, each of length `len` equal to [`ws_function_len`].
///
/// # Safety
/// `re` and `im` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ws_function_samples(f: *const WsFunction, re: *mut f64, im: *mut f64, len: usize) -> WsStatus {
    guarded(|| {
        let f = as_ref(f, "f")?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let s = f.0.samples();
        if len != s.len() {
            set_error(format!("buffer length {len} does not match {} samples", s.len()));
            return Err(WsStatus::InvalidArgument);
        }
        for (j, z) in s.iter().enumerate() {
            *re.add(j) = z.re;
            *im.add(j) = z.im;
        }
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `f` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ws_function_free(f: *mut WsFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `||f||_m`; `m = 0` requires a vanishing real zero mode and returns
/// [`WsStatus::Divergent`] when the norm is infinite.
///
/// # Safety
/// `f` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ws_mass_norm(f: *const WsFunction, m: f64, out: *mut f64) -> WsStatus {
    guarded(|| {
        let f = as_ref(f, "f")?;
        match lib(testfn::mass_norm(&f.0, m))?.finite() {
            Some(v) => write(out, v, "out"),
            None => {
                set_error("norm diverges at m = 0".into());
                Err(WsStatus::Divergent)
            }
        }
    })
}

/// `sigma(f, g) = Im int conj(f) g`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ws_symplectic(f: *const WsFunction, g: *const WsFunction, out: *mut f64) -> WsStatus {
    guarded(|| {
        let (f, g) = (as_ref(f, "f")?, as_ref(g, "g")?);
        if f.0.grid() != g.0.grid() {
            set_error("operands live on different grids".into());
            return Err(WsStatus::InvalidGrid);
        }
        write(out, weyl::symplectic(&f.0, &g.0), "out")
    })
}

/// Klein-Gordon time evolution `tau_t^(m) f`.
///
/// # Safety
/// `f` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ws_time_translate(f: *const WsFunction, t: f64, m: f64, out: *mut *mut WsFunction) -> WsStatus {
    guarded(|| {
        let f = as_ref(f, "f")?;
        emit_function(out, lib(dynamics::time_translate(&f.0, t, m))?)
    })
}

/// `K_order(x)` for order 0 or 1.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ws_bessel_k(order: c_int, x: f64, out: *mut f64) -> WsStatus {
    guarded(|| {
        let order = u8::try_from(order).map_err(|_| {
            set_error(format!("order {order} is not 0 or 1"));
            WsStatus::InvalidArgument
        })?;
        write(out, lib(quasiequiv::bessel_k(order, x))?.value, "out")
    })
}

/// `Q-(x)` (`plus == 0`) or `Q+(x)` (`plus != 0`).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ws_kernel_q(plus: c_int, x: f64, m: f64, out: *mut f64) -> WsStatus {
    guarded(|| {
        let v = if plus != 0 { quasiequiv::kernel_q_plus(x, m) } else { quasiequiv::kernel_q_minus(x, m) };
        write(out, lib(v)?, "out")
    })
}

/// Bilinear form of `Q-` or `Q+` on real null-integral functions, by the
/// position path (`momentum == 0`) or the momentum path.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ws_form_q(
    plus: c_int,
    f: *const WsFunction,
    g: *const WsFunction,
    m: f64,
    momentum: c_int,
    out: *mut f64,
) -> WsStatus {
    guarded(|| {
        let (f, g) = (as_ref(f, "f")?, as_ref(g, "g")?);
        let sign = if plus != 0 { KernelSign::Plus } else { KernelSign::Minus };
        let path = if momentum != 0 { FormPath::Momentum } else { FormPath::Position };
        write(out, lib(quasiequiv::form_q(sign, &f.0, &g.0, m, path))?, "out")
    })
}

/// Builds a Galerkin model with `basis_size` functions per block on `[lo, hi]`
/// and runs its operator diagnostics.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ws_galerkin_new(
    n: usize,
    half_width: f64,
    lo: f64,
    hi: f64,
    m: f64,
    basis_size: usize,
    out: *mut *mut WsGalerkin,
) -> WsStatus {
    guarded(|| {
        let g = lib(Grid::new(n, half_width))?;
        let model = lib(quasiequiv::build_galerkin(g, (lo, hi), m, basis_size))?;
        let d = lib(quasiequiv::operator_diagnostics(&model))?;
        let h = WsGalerkin {
            trace_norm: d.trace_norm,
            eigenvalues: d.eigenvalues,
            matrix_element_residual: d.matrix_element_residual,
        };
        write(out, Box::into_raw(Box::new(h)), "out")
    })
}

/// `sum |eigenvalues of 1 - T|`.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ws_galerkin_trace_norm(h: *const WsGalerkin, out: *mut f64) -> WsStatus {
    guarded(|| write(out, as_ref(h, "h")?.trace_norm, "out"))
}

/// Max residual of the `1 - T` matrix elements against the momentum-path forms.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ws_galerkin_matrix_element_residual(h: *const WsGalerkin, out: *mut f64) -> WsStatus {
    guarded(|| write(out, as_ref(h, "h")?.matrix_element_residual, "out"))
}

/// Number of eigenvalues of `1 - T` (twice the basis size).
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ws_galerkin_len(h: *const WsGalerkin) -> usize {
    h.as_ref().map_or(0, |h| h.eigenvalues.len())
}

/// Copies the eigenvalues of `1 - T`, by decreasing magnitude.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ws_galerkin_eigenvalues(h: *const WsGalerkin, buf: *mut f64, len: usize) -> WsStatus {
    guarded(|| {
        let h = as_ref(h, "h")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != h.eigenvalues.len() {
            set_error(format!("buffer length {len} does not match {} eigenvalues", h.eigenvalues.len()));
            return Err(WsStatus::InvalidArgument);
        }
        ptr::copy_nonoverlapping(h.eigenvalues.as_ptr(), buf, len);
        Ok(())
    })
}

/// Releases a Galerkin handle; null is ignored.
///
/// # Safety
/// `h` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ws_galerkin_free(h: *mut WsGalerkin) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
