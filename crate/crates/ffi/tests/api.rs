use std::ffi::{c_char, CStr, CString};
use std::ptr;

use synchrone_rc_ffi::*;

const ALARM: &str = include_str!("../../core/corpus/alarm.sct");
const EXP: &str = include_str!("../../core/corpus/exp.sct");

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { src_string_free(s) };
    out
}

fn last_error() -> String {
    let p = src_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(src: &str) -> *mut SrcProgram {
    let c = CString::new(src).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { src_program_load(c.as_ptr(), &mut p) }, SrcStatus::Ok);
    p
}

#[test]
fn alarm_round_trip() {
    unsafe {
        let p = load(ALARM);
        assert_eq!(src_program_check_read_once(p), SrcStatus::Ok);
        assert!(src_last_error().is_null());

        let mut report = ptr::null_mut();
        assert_eq!(src_program_analyze(p, &mut report), SrcStatus::Ok);
        assert!(take(report).contains("verdict: pass"));

        let mut trace = ptr::null_mut();
        assert_eq!(src_program_run(p, 5, 1_000_000, false, &mut trace), SrcStatus::Ok);
        let run = take(trace);

        let mut m = ptr::null_mut();
        assert_eq!(src_program_compile(p, &mut m), SrcStatus::Ok);
        let mut text = ptr::null_mut();
        assert_eq!(src_module_render(m, &mut text), SrcStatus::Ok);
        let text = take(text);
        assert!(text.contains("func alarm/2\n1: branch s 12\n"));

        let ctext = CString::new(text).unwrap();
        let mut m2 = ptr::null_mut();
        assert_eq!(src_module_parse(ctext.as_ptr(), &mut m2), SrcStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(src_module_verify(m2, &mut report), SrcStatus::Ok);
        assert!(!take(report).is_empty());

        let mut trace = ptr::null_mut();
        assert_eq!(src_module_exec(m2, 5, 1_000_000, false, true, &mut trace), SrcStatus::Ok);
        let records = take(trace);
        assert!(records.lines().all(|l| l.starts_with('{')));
        assert!(run.contains("ring=prst"), "{run}");

        src_module_free(m);
        src_module_free(m2);
        src_program_free(p);
    }
}

#[test]
fn diagnostics_are_reported() {
    let c = CString::new("beh f() = g()\nsystem = f()").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { src_program_load(c.as_ptr(), &mut p) }, SrcStatus::Diagnostics);
    assert!(p.is_null());
    assert!(last_error().contains("error"));
}

#[test]
fn read_once_violation_and_fuel() {
    unsafe {
        let p = load(EXP);
        assert_eq!(src_program_check_read_once(p), SrcStatus::ReadOnce);
        assert!(last_error().contains("exp"));
        let mut report = ptr::null_mut();
        assert_eq!(src_program_analyze(p, &mut report), SrcStatus::ReadOnce);
        take(report);
        let mut trace = ptr::null_mut();
        assert_eq!(src_program_run(p, 1, 3, false, &mut trace), SrcStatus::Fuel);
        assert!(trace.is_null());
        src_program_free(p);
    }
}

#[test]
fn faulting_module_reports_vm_fault_and_fails_verification() {
    let src = "type t = c || d\ndecl f() : beh\nsystem = f()\n\nfunc f/0\n1: load 7\n2: stop\n";
    let c = CString::new(src).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(src_module_parse(c.as_ptr(), &mut m), SrcStatus::Ok);
        let mut trace = ptr::null_mut();
        assert_eq!(src_module_exec(m, 1, 1000, false, false, &mut trace), SrcStatus::VmFault);
        let mut report = ptr::null_mut();
        assert_eq!(src_module_verify(m, &mut report), SrcStatus::Verify);
        take(report);
        src_module_free(m);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(src_program_load(ptr::null(), &mut p), SrcStatus::NullArgument);
        let c = CString::new(ALARM).unwrap();
        assert_eq!(src_program_load(c.as_ptr(), ptr::null_mut()), SrcStatus::NullArgument);
        assert_eq!(src_program_check_read_once(ptr::null()), SrcStatus::NullArgument);
        src_program_free(ptr::null_mut());
        src_module_free(ptr::null_mut());
        src_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_rejected() {
    let bytes = [0xffu8, 0xfe, 0];
    let mut p = ptr::null_mut();
    let rc = unsafe { src_program_load(bytes.as_ptr() as *const c_char, &mut p) };
    assert_eq!(rc, SrcStatus::InvalidUtf8);
}
