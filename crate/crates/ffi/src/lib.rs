// SPDX-License-Identifier: Apache-2.0

//! C ABI over the minimalist inference engines.
//!
//! Models are opaque handles. Every fallible call returns an [`MgStatus`];
//! the message of the last failure on the calling thread is available from
//! [`mg_last_error_message`]. A handle may be shared between threads only if
//! the caller serializes [`mg_forward`] calls on it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use minimalist::circuit::{CircuitNetwork, CircuitParams};
use minimalist::gru::{forward_sequential, Network, Sequence};
use minimalist::io::{load_model, model_from_json, model_to_json};
use minimalist::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MgStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The model file could not be read.
    Io = 3,
    /// The model text is not valid JSON or has unknown fields.
    Parse = 4,
    /// The model is well-formed but inconsistent (codes, dimensions, version).
    InvalidModel = 5,
    /// Input length does not match `steps * n_in`, or `steps` is zero.
    InvalidInput = 6,
    /// An output buffer is too small.
    BufferTooSmall = 7,
    /// Unknown engine selector.
    InvalidEngine = 8,
    /// The circuit engine rejected the model or failed a consistency check.
    Circuit = 9,
    /// Internal failure; the handle should be freed.
    Internal = 10,
}

/// Inference engine selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MgEngine {
    /// Quantized minGRU arithmetic.
    Ideal = 0,
    /// Charge-domain capacitor simulation.
    Circuit = 1,
}

/// Opaque model handle.
pub struct MgModel {
    network: Network,
    circuit: Option<CircuitNetwork>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: MgStatus, msg: impl Into<String>) -> MgStatus {
    set_error(msg);
    status
}

fn model_status(e: &Error) -> MgStatus {
    match e {
        Error::Io(_) => MgStatus::Io,
        Error::Json(_) => MgStatus::Parse,
        _ => MgStatus::InvalidModel,
    }
}

/// Runs `f`, turning panics into [`MgStatus::Internal`].
fn guarded(f: impl FnOnce() -> MgStatus) -> MgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == MgStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(MgStatus::Internal, "internal panic"),
    }
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, MgStatus> {
    if s.is_null() {
        return Err(fail(MgStatus::NullArgument, "string argument is NULL"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(MgStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn publish(network: Network, out: *mut *mut MgModel) -> MgStatus {
    let handle = Box::new(MgModel {
        network,
        circuit: None,
    });
    *out = Box::into_raw(handle);
    MgStatus::Ok
}

/// Loads a model file and stores a new handle in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_model_load_file(
    path: *const c_char,
    out: *mut *mut MgModel,
) -> MgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MgStatus::NullArgument, "out is NULL");
        }
        *out = ptr::null_mut();
        let path = match c_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_model(Path::new(path)) {
            Ok(net) => publish(net, out),
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Parses model JSON and stores a new handle in `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_model_load_json(
    json: *const c_char,
    out: *mut *mut MgModel,
) -> MgStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MgStatus::NullArgument, "out is NULL");
        }
        *out = ptr::null_mut();
        let text = match c_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match model_from_json(text) {
            Ok(net) => publish(net, out),
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `model` must come from a load call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mg_model_free(model: *mut MgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input width of the first layer; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mg_model_n_in(model: *const MgModel) -> usize {
    model.as_ref().map_or(0, |m| m.network.n_in())
}

/// Number of readout units (logits); 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mg_model_n_out(model: *const MgModel) -> usize {
    model.as_ref().map_or(0, |m| m.network.n_out())
}

/// Number of layers; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mg_model_n_layers(model: *const MgModel) -> usize {
    model.as_ref().map_or(0, |m| m.network.layers().len())
}

/// Writes the canonical model JSON plus a NUL into `buf`.
///
/// `*needed` receives the required size including the NUL, also when the
/// buffer is too small. `buf` may be NULL when `cap` is 0.
///
/// # Safety
/// `model` must be a live handle, `buf` valid for `cap` bytes, `needed` valid.
#[no_mangle]
pub unsafe extern "C" fn mg_model_to_json(
    model: *const MgModel,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> MgStatus {
    guarded(|| {
        let Some(m) = model.as_ref() else {
            return fail(MgStatus::NullArgument, "model is NULL");
        };
        if needed.is_null() {
            return fail(MgStatus::NullArgument, "needed is NULL");
        }
        let text = model_to_json(&m.network);
        *needed = text.len() + 1;
        if cap < text.len() + 1 || buf.is_null() {
            return fail(
                MgStatus::BufferTooSmall,
                format!("model JSON needs {} bytes", text.len() + 1),
            );
        }
        ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
        *buf.add(text.len()) = 0;
        MgStatus::Ok
    })
}

/// Runs one sequence.
///
/// `inputs` holds `steps * n_in` bytes, step-major; any nonzero byte is an
/// active input. `logits` receives `n_out` values and must hold at least
/// `logits_len` doubles. `class_out` may be NULL. `engine` is an
/// [`MgEngine`] value.
///
/// # Safety
/// `model` must be a live handle not used concurrently, `inputs` valid for
/// `steps * n_in` bytes and `logits` valid for `logits_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mg_forward(
    model: *mut MgModel,
    engine: u32,
    inputs: *const u8,
    steps: usize,
    logits: *mut f64,
    logits_len: usize,
    class_out: *mut usize,
) -> MgStatus {
    guarded(|| {
        let Some(m) = model.as_mut() else {
            return fail(MgStatus::NullArgument, "model is NULL");
        };
        if inputs.is_null() || logits.is_null() {
            return fail(MgStatus::NullArgument, "inputs or logits is NULL");
        }
        let engine = match engine {
            0 => MgEngine::Ideal,
            1 => MgEngine::Circuit,
            e => return fail(MgStatus::InvalidEngine, format!("unknown engine {e}")),
        };
        let n_in = m.network.n_in();
        let n_out = m.network.n_out();
        if logits_len < n_out {
            return fail(
                MgStatus::BufferTooSmall,
                format!("logits holds {logits_len} values, model has {n_out}"),
            );
        }
        let Some(len) = steps.checked_mul(n_in).filter(|&l| l > 0) else {
            return fail(MgStatus::InvalidInput, "steps must be positive");
        };
        let bits = std::slice::from_raw_parts(inputs, len)
            .iter()
            .map(|&b| b != 0)
            .collect();
        let seq = match Sequence::new(n_in, bits) {
            Ok(s) => s,
            Err(e) => return fail(MgStatus::InvalidInput, e.to_string()),
        };
        let result = match engine {
            MgEngine::Ideal => forward_sequential(&seq, &m.network)
                .map(|f| (f.logits, f.class))
                .map_err(|e| (MgStatus::InvalidInput, e)),
            MgEngine::Circuit => {
                if m.circuit.is_none() {
                    match CircuitNetwork::new(m.network.clone(), CircuitParams::default(), None) {
                        Ok(c) => m.circuit = Some(c),
                        Err(e) => return fail(MgStatus::Circuit, e.to_string()),
                    }
                }
                let c = m.circuit.as_mut().expect("just built");
                c.run_fast(&seq)
                    .map(|r| (r.forward.logits, r.forward.class))
                    .map_err(|e| (MgStatus::Circuit, e))
            }
        };
        match result {
            Ok((values, class)) => {
                ptr::copy_nonoverlapping(values.as_ptr(), logits, n_out);
                if !class_out.is_null() {
                    *class_out = class;
                }
                MgStatus::Ok
            }
            Err((s, e)) => fail(s, e.to_string()),
        }
    })
}

/// Message of the last failed call on this thread, or an empty string.
///
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn mg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
