//! C ABI over the harness core.
//!
//! Functions return a [`VnnError`] code; on failure the message is
//! available from [`vnn_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use vnnharness::baseline::{verify_specification, Budget, Verdict};
use vnnharness::cex::{parse_counterexample, validate, CexMode};
use vnnharness::onnx::{load_network, Network};
use vnnharness::scoring::{classify, Status, Truth};
use vnnharness::specfmt::{load_specification, parse_str_with_cap, Specification, DEFAULT_CASE_CAP};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnnError {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    Network = 5,
    Dimension = 6,
    InvalidArgument = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnnStatus {
    Holds = 0,
    Violated = 1,
    Timeout = 2,
    Error = 3,
    Unknown = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnnTruth {
    Holds = 0,
    Violated = 1,
    Undetermined = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnnCexMode {
    DiscardOutputs = 0,
    PenalizeOutputs = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VnnVerdict {
    Holds = 0,
    Violated = 1,
    Unknown = 2,
}

/// A parsed specification.
pub struct VnnSpec(Specification);

/// A loaded network.
pub struct VnnNetwork(Network);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(VnnError, String);

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> VnnError {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            VnnError::Ok
        }
        Ok(Err(Fail(code, message))) => {
            set_error(&message);
            code
        }
        Err(_) => {
            set_error("internal panic");
            VnnError::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: the caller passes either null or a valid pointer.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(VnnError::NullPointer, format!("{what} is null")))
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| Fail(VnnError::NullPointer, format!("{what} is null")))
}

fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(VnnError::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|e| Fail(VnnError::InvalidUtf8, format!("{what}: {e}")))
}

fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(VnnError::NullPointer, format!("{what} is null")));
    }
    // SAFETY: `p` points at `len` readable elements per the API contract.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(VnnError::NullPointer, format!("{what} is null")));
    }
    // SAFETY: `p` points at `len` writable elements per the API contract.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn vnn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses VNN-LIB text. `*out` receives a handle on success.
#[no_mangle]
pub extern "C" fn vnn_spec_parse(text: *const c_char, out: *mut *mut VnnSpec) -> VnnError {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let spec = parse_str_with_cap(c_str(text, "text")?, DEFAULT_CASE_CAP)
            .map_err(|e| Fail(VnnError::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(VnnSpec(spec)));
        Ok(())
    })
}

/// Loads a `.vnnlib` file. `*out` receives a handle on success.
#[no_mangle]
pub extern "C" fn vnn_spec_load(path: *const c_char, out: *mut *mut VnnSpec) -> VnnError {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let spec = load_specification(path, DEFAULT_CASE_CAP).map_err(|e| {
            let code =
                if matches!(e, vnnharness::specfmt::SpecError::Io { .. }) { VnnError::Io } else { VnnError::Parse };
            Fail(code, format!("{path}: {e}"))
        })?;
        *out = Box::into_raw(Box::new(VnnSpec(spec)));
        Ok(())
    })
}

/// Writes input, output and DNF case counts; any out pointer may be null.
#[no_mangle]
pub extern "C" fn vnn_spec_counts(
    spec: *const VnnSpec,
    num_inputs: *mut usize,
    num_outputs: *mut usize,
    num_cases: *mut usize,
) -> VnnError {
    guard(|| {
        let spec = &non_null(spec, "spec")?.0;
        for (p, v) in [(num_inputs, spec.num_inputs), (num_outputs, spec.num_outputs), (num_cases, spec.cases.len())] {
            if let Ok(p) = out_ptr(p, "") {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vnn_spec_free(spec: *mut VnnSpec) {
    if !spec.is_null() {
        // SAFETY: produced by Box::into_raw in this crate and freed once.
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// Loads an ONNX file. `*out` receives a handle on success.
#[no_mangle]
pub extern "C" fn vnn_network_load(path: *const c_char, out: *mut *mut VnnNetwork) -> VnnError {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let net = load_network(path).map_err(|e| Fail(VnnError::Network, format!("{path}: {e}")))?;
        *out = Box::into_raw(Box::new(VnnNetwork(net)));
        Ok(())
    })
}

/// Decodes an in-memory ONNX model.
#[no_mangle]
pub extern "C" fn vnn_network_from_bytes(data: *const u8, len: usize, out: *mut *mut VnnNetwork) -> VnnError {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let net = Network::from_bytes(slice(data, len, "data")?).map_err(|e| Fail(VnnError::Network, e.to_string()))?;
        *out = Box::into_raw(Box::new(VnnNetwork(net)));
        Ok(())
    })
}

/// Writes flattened input and output sizes; either pointer may be null.
#[no_mangle]
pub extern "C" fn vnn_network_counts(
    net: *const VnnNetwork,
    num_inputs: *mut usize,
    num_outputs: *mut usize,
) -> VnnError {
    guard(|| {
        let net = &non_null(net, "net")?.0;
        for (p, v) in [(num_inputs, net.num_inputs()), (num_outputs, net.num_outputs())] {
            if let Ok(p) = out_ptr(p, "") {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Runs float32 inference on `x[0..nx]`, writing `y[0..ny]`.
#[no_mangle]
pub extern "C" fn vnn_network_infer(
    net: *const VnnNetwork,
    x: *const f32,
    nx: usize,
    y: *mut f32,
    ny: usize,
) -> VnnError {
    guard(|| {
        let net = &non_null(net, "net")?.0;
        if ny != net.num_outputs() {
            return Err(Fail(
                VnnError::Dimension,
                format!("output buffer holds {ny}, network has {}", net.num_outputs()),
            ));
        }
        let x = slice(x, nx, "x")?;
        let out = net.infer_flat(x).map_err(|e| {
            let code = if x.len() != net.num_inputs() { VnnError::Dimension } else { VnnError::Network };
            Fail(code, e.to_string())
        })?;
        slice_mut(y, ny, "y")?.copy_from_slice(&out);
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vnn_network_free(net: *mut VnnNetwork) {
    if !net.is_null() {
        // SAFETY: produced by Box::into_raw in this crate and freed once.
        drop(unsafe { Box::from_raw(net) });
    }
}

/// Checks witness text against `spec` and `net`. A negative `out_tol`
/// selects the default tolerance.
#[no_mangle]
pub extern "C" fn vnn_cex_check(
    net: *const VnnNetwork,
    spec: *const VnnSpec,
    witness: *const c_char,
    mode: VnnCexMode,
    out_tol: f64,
    valid: *mut bool,
) -> VnnError {
    guard(|| {
        let net = &non_null(net, "net")?.0;
        let spec = &non_null(spec, "spec")?.0;
        let valid = out_ptr(valid, "valid")?;
        let cex = parse_counterexample(c_str(witness, "witness")?).map_err(|e| Fail(VnnError::Parse, e.to_string()))?;
        let mode = match mode {
            VnnCexMode::DiscardOutputs => CexMode::DiscardOutputs,
            VnnCexMode::PenalizeOutputs => CexMode::PenalizeOutputs,
        };
        let tol = if out_tol < 0.0 { vnnharness::cex::DEFAULT_OUT_TOL } else { out_tol };
        let verdict = validate(&cex, spec, net, mode, tol).map_err(|e| Fail(VnnError::Dimension, e.to_string()))?;
        *valid = verdict.valid;
        Ok(())
    })
}

/// Points for one result: 10, 0 or -150.
#[no_mangle]
pub extern "C" fn vnn_score_instance(status: VnnStatus, witness_valid: bool, truth: VnnTruth) -> i64 {
    let status = match status {
        VnnStatus::Holds => Status::Holds,
        VnnStatus::Violated => Status::Violated,
        VnnStatus::Timeout => Status::Timeout,
        VnnStatus::Error => Status::Error,
        VnnStatus::Unknown => Status::Unknown,
    };
    let truth = match truth {
        VnnTruth::Holds => Truth::Holds,
        VnnTruth::Violated => Truth::Violated,
        VnnTruth::Undetermined => Truth::Undetermined,
    };
    classify(status, witness_valid, truth).points()
}

/// Runs the baseline verifier. On a violated verdict the witness inputs are
/// written to `witness[0..n]` when `n` matches the input count.
#[no_mangle]
pub extern "C" fn vnn_verify(
    net: *const VnnNetwork,
    spec: *const VnnSpec,
    timeout_s: f64,
    seed: u64,
    verdict: *mut VnnVerdict,
    witness: *mut f64,
    n: usize,
) -> VnnError {
    guard(|| {
        let net = &non_null(net, "net")?.0;
        let spec = &non_null(spec, "spec")?.0;
        let verdict = out_ptr(verdict, "verdict")?;
        let limit = Duration::try_from_secs_f64(timeout_s)
            .map_err(|_| Fail(VnnError::InvalidArgument, format!("invalid timeout {timeout_s}")))?;
        let budget = Budget { time_limit: Some(limit), seed, ..Budget::default() };
        let result = verify_specification(net, spec, &budget).map_err(|e| Fail(VnnError::Dimension, e.to_string()))?;
        *verdict = match &result {
            Verdict::Holds => VnnVerdict::Holds,
            Verdict::Unknown => VnnVerdict::Unknown,
            Verdict::Violated(cex) => {
                if n == net.num_inputs() {
                    let x = cex.input_vector(n).expect("baseline witnesses are complete");
                    slice_mut(witness, n, "witness")?.copy_from_slice(&x);
                }
                VnnVerdict::Violated
            }
        };
        Ok(())
    })
}
