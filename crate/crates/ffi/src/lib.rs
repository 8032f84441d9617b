//! C interface to the synchrone-rc toolchain.
//!
//! Programs and modules are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`SrcStatus`]; on failure a message is available from
//! [`src_last_error`] until the next call on the same thread. Strings
//! handed out through `char **` parameters must be released with
//! [`src_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use synchrone_rc::analysis::{analyze_program, AnalyzeOptions};
use synchrone_rc::bytecode::{compile_program, Module};
use synchrone_rc::cfa::{build_call_graph, check_read_once};
use synchrone_rc::frontend::{self, TypedProgram};
use synchrone_rc::interp::{self, InterpError};
use synchrone_rc::shape::{verify, VerifyOptions};
use synchrone_rc::vm::{run_vm, VmError};

/// Result of a call; the values 0 to 7 agree with the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrcStatus {
    Ok = 0,
    Diagnostics = 1,
    ReadOnce = 2,
    Io = 3,
    Analysis = 4,
    Fuel = 5,
    VmFault = 6,
    Verify = 7,
    NullArgument = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

/// A parsed and type-checked source program.
pub struct SrcProgram {
    inner: TypedProgram,
}

/// A bytecode module.
pub struct SrcModule {
    inner: Module,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Outcome = Result<(), (SrcStatus, String)>;

fn guard(f: impl FnOnce() -> Outcome) -> SrcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SrcStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, (SrcStatus, String)> {
    if p.is_null() {
        return Err((SrcStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (SrcStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, (SrcStatus, String)> {
    p.as_ref().ok_or((SrcStatus::NullArgument, "null handle".into()))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, (SrcStatus, String)> {
    p.as_mut().ok_or((SrcStatus::NullArgument, "null output pointer".into()))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn src_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn src_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse and type-check `source`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_program_load(source: *const c_char, out: *mut *mut SrcProgram) -> SrcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let src = text(source)?;
        let tp = frontend::load(src).map_err(|ds| {
            let msg: Vec<String> = ds.iter().map(|d| d.render("<source>")).collect();
            (SrcStatus::Diagnostics, msg.join("\n"))
        })?;
        *out = Box::into_raw(Box::new(SrcProgram { inner: tp }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`src_program_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn src_program_free(p: *mut SrcProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Whether the program satisfies the read-once condition; on failure the
/// error message names the offending cycle.
///
/// # Safety
/// `p` must be a live program handle.
#[no_mangle]
pub unsafe extern "C" fn src_program_check_read_once(p: *const SrcProgram) -> SrcStatus {
    guard(|| {
        let p = handle(p)?;
        let r = check_read_once(&build_call_graph(&p.inner.program));
        if r.pass {
            Ok(())
        } else {
            Err((SrcStatus::ReadOnce, r.render()))
        }
    })
}

/// Run the resource analysis with the program's inline annotations and
/// store the text report in `*report`, also on analysis failure.
///
/// # Safety
/// `p` must be a live program handle and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_program_analyze(p: *const SrcProgram, report: *mut *mut c_char) -> SrcStatus {
    guard(|| {
        let report = out_ptr(report)?;
        *report = ptr::null_mut();
        let p = handle(p)?;
        let opts = AnalyzeOptions { annotations: p.inner.program.annotations.clone(), ..Default::default() };
        let r = analyze_program(&p.inner, &opts);
        *report = c_string(r.render());
        if !r.read_once.pass {
            Err((SrcStatus::ReadOnce, "read-once check failed".into()))
        } else if !r.pass() {
            Err((SrcStatus::Analysis, "analysis failed".into()))
        } else {
            Ok(())
        }
    })
}

/// Run the source interpreter for up to `instants` instants with `fuel`
/// steps per instant; the trace goes to `*trace` as text, or as JSON
/// records when `records` is nonzero.
///
/// # Safety
/// `p` must be a live program handle and `trace` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_program_run(
    p: *const SrcProgram,
    instants: u32,
    fuel: u64,
    records: bool,
    trace: *mut *mut c_char,
) -> SrcStatus {
    guard(|| {
        let trace = out_ptr(trace)?;
        *trace = ptr::null_mut();
        let p = handle(p)?;
        let t = interp::run(&p.inner, instants as usize, fuel).map_err(|e| match e {
            InterpError::FuelExhausted { .. } => (SrcStatus::Fuel, e.to_string()),
            _ => (SrcStatus::Analysis, e.to_string()),
        })?;
        *trace = c_string(if records { t.render_records() } else { t.render_text() });
        Ok(())
    })
}

/// Compile a program to bytecode.
///
/// # Safety
/// `p` must be a live program handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_program_compile(p: *const SrcProgram, out: *mut *mut SrcModule) -> SrcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let p = handle(p)?;
        let m = compile_program(&p.inner).map_err(|e| (SrcStatus::Diagnostics, e.to_string()))?;
        *out = Box::into_raw(Box::new(SrcModule { inner: m }));
        Ok(())
    })
}

/// Parse a module from its text form.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_module_parse(source: *const c_char, out: *mut *mut SrcModule) -> SrcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = ptr::null_mut();
        let m = Module::parse(text(source)?).map_err(|e| (SrcStatus::Diagnostics, e.to_string()))?;
        *out = Box::into_raw(Box::new(SrcModule { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a module handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn src_module_free(m: *mut SrcModule) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// The module's text form.
///
/// # Safety
/// `m` must be a live module handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_module_render(m: *const SrcModule, out: *mut *mut c_char) -> SrcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = c_string(handle(m)?.inner.render());
        Ok(())
    })
}

/// Run the bytecode verifier; the text report goes to `*report`, also
/// when verification fails.
///
/// # Safety
/// `m` must be a live module handle and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_module_verify(m: *const SrcModule, report: *mut *mut c_char) -> SrcStatus {
    guard(|| {
        let report = out_ptr(report)?;
        *report = ptr::null_mut();
        let r = verify(&handle(m)?.inner, &VerifyOptions::default());
        *report = c_string(r.render());
        if r.pass() {
            Ok(())
        } else {
            Err((SrcStatus::Verify, "verification failed".into()))
        }
    })
}

/// Execute a module on the virtual machine, like [`src_program_run`].
/// With `meter` nonzero the trace includes configuration sizes.
///
/// # Safety
/// `m` must be a live module handle and `trace` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn src_module_exec(
    m: *const SrcModule,
    instants: u32,
    fuel: u64,
    meter: bool,
    records: bool,
    trace: *mut *mut c_char,
) -> SrcStatus {
    guard(|| {
        let trace = out_ptr(trace)?;
        *trace = ptr::null_mut();
        let t = run_vm(&handle(m)?.inner, instants as usize, fuel, meter).map_err(|e| match e {
            VmError::FuelExhausted { .. } => (SrcStatus::Fuel, e.to_string()),
            VmError::Fault { .. } => (SrcStatus::VmFault, e.to_string()),
        })?;
        *trace = c_string(if records { t.render_records() } else { t.render_text() });
        Ok(())
    })
}
