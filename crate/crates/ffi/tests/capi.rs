use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use atomless_ffi::*;

fn onestep() -> *mut AtomlessModel {
    let name = CString::new("unit-interval-onestep").unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { atomless_model_builtin(name.as_ptr(), 0, 0, 0.5, &mut m) };
    assert_eq!(st, AtomlessStatus::Ok);
    m
}

fn parse(m: *const AtomlessModel, rows: &str) -> *mut AtomlessPolicy {
    let rows = CString::new(rows).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { atomless_policy_parse(m, rows.as_ptr(), &mut p) }, AtomlessStatus::Ok);
    p
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(atomless_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn derandomize_half_half() {
    let m = onestep();
    let pi = parse(m, "0 1 0.5 0.5\n");
    unsafe {
        assert_eq!(atomless_policy_is_deterministic(pi), 0);
        let mut phi = ptr::null_mut();
        assert_eq!(atomless_derandomize(m, pi, 1e-9, &mut phi), AtomlessStatus::Ok);
        assert_eq!(atomless_policy_is_deterministic(phi), 1);
        let mut v = [0.0f64; 1];
        assert_eq!(atomless_evaluate(m, phi, 1e-12, v.as_mut_ptr(), 1), AtomlessStatus::Ok);
        assert!((v[0] - 0.5).abs() <= 1e-9);
        let s = atomless_policy_to_string(phi);
        assert!(CStr::from_ptr(s).to_str().unwrap().lines().count() >= 2);
        atomless_string_free(s);
        atomless_policy_free(phi);
        atomless_policy_free(pi);
        atomless_model_free(m);
    }
}

#[test]
fn mix_and_certificate() {
    let m = onestep();
    let p0 = parse(m, "0 1 0\n");
    let p1 = parse(m, "0 1 1\n");
    unsafe {
        let mut l = 0.0;
        assert_eq!(atomless_model_certificate(m, &mut l), AtomlessStatus::Ok);
        assert_eq!(l, 1.0);
        assert_eq!(atomless_model_criteria(m), 1);
        assert_eq!(atomless_model_actions(m), 2);
        let mut phi = ptr::null_mut();
        assert_eq!(atomless_mix(m, p0, p1, 0.25, 1e-9, &mut phi), AtomlessStatus::Ok);
        let mut v = [0.0f64; 1];
        assert_eq!(atomless_evaluate(m, phi, 1e-12, v.as_mut_ptr(), 1), AtomlessStatus::Ok);
        assert!((v[0] - 0.75).abs() <= 1e-9);
        for p in [phi, p0, p1] {
            atomless_policy_free(p);
        }
        atomless_model_free(m);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(atomless_model_from_toml(ptr::null(), &mut m), AtomlessStatus::NullPointer);
        let bad = CString::new("kind = \"absorbing\"\n").unwrap();
        assert_eq!(atomless_model_from_toml(bad.as_ptr(), &mut m), AtomlessStatus::Validation);
        assert!(!last_error().is_empty());
        let name = CString::new("no-such-model").unwrap();
        assert_eq!(atomless_model_builtin(name.as_ptr(), 8, 0, 0.5, &mut m), AtomlessStatus::Validation);
        assert!(last_error().contains("no-such-model"));
        let name = CString::new("example-3.12").unwrap();
        assert_eq!(atomless_model_builtin(name.as_ptr(), 8, 0, 0.5, &mut m), AtomlessStatus::InvalidArgument);
        let path = CString::new("/nonexistent/model.toml").unwrap();
        assert_eq!(atomless_model_load(path.as_ptr(), &mut m), AtomlessStatus::Io);

        let m = onestep();
        let rows = CString::new("0 0.5 0\n").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(atomless_policy_parse(m, rows.as_ptr(), &mut p), AtomlessStatus::Validation);
        let pi = parse(m, "0 1 0.5 0.5\n");
        let mut v = [0.0f64; 1];
        assert_eq!(atomless_evaluate(m, pi, 1e-12, v.as_mut_ptr(), 0), AtomlessStatus::InvalidArgument);
        let mut out = ptr::null_mut();
        assert_eq!(atomless_mix(m, pi, pi, 0.5, 1e-9, &mut out), AtomlessStatus::InvalidArgument);
        assert_eq!(atomless_derandomize(m, pi, -1.0, &mut out), AtomlessStatus::Validation);
        assert!(atomless_policy_to_string(ptr::null()).is_null());
        atomless_policy_free(pi);
        atomless_model_free(m);
        atomless_model_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/atomless.h");
    let body = std::fs::read_to_string(&header).unwrap();
    for sym in ["atomless_derandomize", "atomless_mix", "ATOMLESS_STATUS_PANIC = 7", "typedef struct AtomlessModel"] {
        assert!(body.contains(sym), "{sym} missing from header");
    }
    let dir = tempfile_dir();
    let src = dir.join("use.c");
    std::fs::write(&src, "#include \"atomless.h\"\nint main(void) { return atomless_last_error() != 0; }\n").unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "C compiler rejected the header"),
        Err(_) => eprintln!("no C compiler; syntax check skipped"),
    }
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("capi");
    std::fs::create_dir_all(&d).unwrap();
    d
}
