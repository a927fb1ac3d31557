use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ddsc_ffi::*;

fn last_error() -> String {
    let p = ddsc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn builtin(name: &str) -> *mut DdscSystem {
    let name = CString::new(name).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { ddsc_system_builtin(name.as_ptr(), &mut sys) }, DdscStatus::Ok);
    sys
}

#[test]
fn model_based_h2_round_trip() {
    let sys = builtin("h2-example");
    let (mut nx, mut nu) = (0, 0);
    unsafe {
        assert_eq!(ddsc_system_dims(sys, &mut nx, &mut nu, ptr::null_mut(), ptr::null_mut()), DdscStatus::Ok);
    }
    assert_eq!((nx, nu), (3, 2));

    let mut res = ptr::null_mut();
    let status = unsafe {
        ddsc_synthesize(
            sys,
            ptr::null(),
            DdscNorm::H2,
            DdscStructure::Unstructured,
            ptr::null(),
            DdscMultipliers::PerSample,
            ptr::null(),
            &mut res,
        )
    };
    assert_eq!(status, DdscStatus::Ok);
    let gamma = unsafe { ddsc_result_gamma(res) };
    assert!(unsafe { ddsc_result_is_optimal(res) });
    assert!((gamma - 2.1537).abs() < 0.01 * 2.1537);

    let mut k = [0.0; 6];
    assert_eq!(unsafe { ddsc_result_gain(res, k.as_mut_ptr(), 6) }, DdscStatus::Ok);
    assert_eq!(unsafe { ddsc_result_gain(res, k.as_mut_ptr(), 5) }, DdscStatus::Dimension);
    let mut norm = 0.0;
    assert_eq!(unsafe { ddsc_closed_loop_norm(sys, k.as_ptr(), DdscNorm::H2, &mut norm) }, DdscStatus::Ok);
    assert!(norm <= gamma * 1.01);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ddsc_result_to_json(res, &mut json) }, DdscStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_string_lossy().into_owned();
    assert!(text.contains("\"K\""));
    unsafe {
        ddsc_string_free(json);
        ddsc_result_free(res);
        ddsc_system_free(sys);
    }
}

#[test]
fn data_driven_ordering_through_handles() {
    let sys = builtin("h2-example");
    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { ddsc_trajectory_simulate(sys, 20, 0.1, 0, &mut traj) }, DdscStatus::Ok);
    assert_eq!(unsafe { ddsc_trajectory_len(traj) }, 20);
    let settings = ddsc_settings_default();
    let mut gammas = Vec::new();
    for mult in [DdscMultipliers::Shared, DdscMultipliers::PerSample] {
        let mut res = ptr::null_mut();
        let status = unsafe {
            ddsc_synthesize(sys, traj, DdscNorm::H2, DdscStructure::Unstructured, ptr::null(), mult, &settings, &mut res)
        };
        assert_eq!(status, DdscStatus::Ok);
        gammas.push(unsafe { ddsc_result_gamma(res) });
        unsafe { ddsc_result_free(res) };
    }
    assert!(gammas[1] <= gammas[0] + 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.json").to_str().unwrap()).unwrap();
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(ddsc_trajectory_save(traj, path.as_ptr()), DdscStatus::Ok);
        assert_eq!(ddsc_trajectory_load(path.as_ptr(), &mut back), DdscStatus::Ok);
        assert_eq!(ddsc_trajectory_len(back), 20);
        ddsc_trajectory_free(back);
        ddsc_trajectory_free(traj);
        ddsc_system_free(sys);
    }
}

#[test]
fn errors_are_reported() {
    let mut sys = ptr::null_mut();
    let name = CString::new("nope").unwrap();
    assert_eq!(unsafe { ddsc_system_builtin(name.as_ptr(), &mut sys) }, DdscStatus::InvalidArgument);
    assert!(last_error().contains("nope"));
    assert_eq!(unsafe { ddsc_system_builtin(ptr::null(), &mut sys) }, DdscStatus::NullPointer);

    let a = [1.0, 0.0, 0.0, 1.0];
    let b = [1.0, 0.0];
    let status = unsafe {
        ddsc_system_new(2, 1, 1, 1, a.as_ptr(), b.as_ptr(), ptr::null(), ptr::null(), ptr::null(), ptr::null(), &mut sys)
    };
    assert_eq!(status, DdscStatus::NullPointer);

    let sys = builtin("h2-example");
    let mut res = ptr::null_mut();
    let status = unsafe {
        ddsc_synthesize(
            sys,
            ptr::null(),
            DdscNorm::H2,
            DdscStructure::Structured,
            ptr::null(),
            DdscMultipliers::PerSample,
            ptr::null(),
            &mut res,
        )
    };
    assert_eq!(status, DdscStatus::NullPointer);
    let bad = CString::new("12;ab").unwrap();
    let status = unsafe {
        ddsc_synthesize(
            sys,
            ptr::null(),
            DdscNorm::H2,
            DdscStructure::Structured,
            bad.as_ptr(),
            DdscMultipliers::PerSample,
            ptr::null(),
            &mut res,
        )
    };
    assert_eq!(status, DdscStatus::Parse);

    // K = 0 keeps the open-loop plant, which is stable; a huge gain is not.
    let (zero, big) = ([0.0; 6], [100.0; 6]);
    let mut norm = 0.0;
    assert_eq!(unsafe { ddsc_closed_loop_norm(sys, zero.as_ptr(), DdscNorm::H2, &mut norm) }, DdscStatus::Ok);
    assert_eq!(unsafe { ddsc_closed_loop_norm(sys, big.as_ptr(), DdscNorm::H2, &mut norm) }, DdscStatus::Unstable);
    unsafe {
        ddsc_system_free(sys);
        ddsc_system_free(ptr::null_mut());
        ddsc_result_free(ptr::null_mut());
    }
    assert!(unsafe { ddsc_result_gamma(ptr::null()) }.is_nan());
}

/// Compiles a C program against the generated header and the shared library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("ddsc.h").exists());
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    if !lib_dir.join("libddsc_ffi.so").exists() {
        // `cargo test` builds only the rlib; build the cdylib into the same target dir.
        let mut cargo = Command::new(env!("CARGO"));
        cargo.args(["build", "-p", "ddsc-ffi", "--lib"]).env("CARGO_TARGET_DIR", lib_dir.parent().unwrap());
        if lib_dir.ends_with("release") {
            cargo.arg("--release");
        }
        assert!(cargo.status().unwrap().success(), "cargo build of the shared library failed");
    }
    assert!(lib_dir.join("libddsc_ffi.so").exists(), "shared library missing in {}", lib_dir.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "ddsc.h"

int main(void) {
    DdscSystem *sys = NULL;
    DdscResult *res = NULL;
    if (ddsc_system_builtin("hinf-example", &sys) != DDSC_STATUS_OK) return 1;
    if (ddsc_synthesize(sys, NULL, DDSC_NORM_HINF, DDSC_STRUCTURE_PDIAG_BASELINE, "110;110",
                        DDSC_MULTIPLIERS_PER_SAMPLE, NULL, &res) != DDSC_STATUS_OK) return 2;
    double gamma = ddsc_result_gamma(res);
    printf("%s %.4f\n", ddsc_version(), gamma);
    if (ddsc_system_builtin("x", NULL) != DDSC_STATUS_INVALID_ARGUMENT || ddsc_last_error_message() == NULL) return 3;
    ddsc_result_free(res);
    ddsc_system_free(sys);
    return fabs(gamma - 3.7464) < 0.01 * 3.7464 ? 0 : 4;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lddsc_ffi", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("C compiler available");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
