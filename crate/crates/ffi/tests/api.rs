use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use afdm_ffi::*;

const SMALL: &str = r#"
[waveform]
n_subcarriers = 16
[channel]
num_paths = 3
[[detectors]]
kind = "mmse"
[[detectors]]
kind = "ep-af"
[sweep]
snr_db = [4.0, 8.0]
min_frames = 3
max_frames = 6
target_errors = 10
seed = 9
"#;

fn last_error() -> String {
    let p = afdm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> (AfdmStatus, *mut AfdmExperiment) {
    let text = CString::new(text).unwrap();
    let mut exp = ptr::null_mut();
    let status = unsafe { afdm_experiment_parse(text.as_ptr(), &mut exp) };
    (status, exp)
}

fn run(exp: *const AfdmExperiment) -> *mut AfdmSweep {
    let mut sweep = ptr::null_mut();
    assert_eq!(unsafe { afdm_sweep_run(exp, &mut sweep) }, AfdmStatus::Ok);
    sweep
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(afdm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn sweep_round_trip_through_handles() {
    let (status, exp) = parse(SMALL);
    assert_eq!(status, AfdmStatus::Ok);
    unsafe {
        assert_eq!(afdm_experiment_num_detectors(exp), 2);
        assert_eq!(afdm_experiment_num_snr(exp), 2);
    }
    let sweep = run(exp);
    unsafe {
        assert_eq!(afdm_sweep_len(sweep), 4);
        let mut point = AfdmPoint::default();
        assert_eq!(afdm_sweep_point(sweep, 0, &mut point), AfdmStatus::Ok);
        assert_eq!(point.snr_db, 4.0);
        assert_eq!(point.bits, point.frames * 32);
        assert!((point.ber - point.bit_errors as f64 / point.bits as f64).abs() < 1e-15);
        assert_eq!(CStr::from_ptr(afdm_sweep_detector(sweep, 0)).to_str().unwrap(), "mmse");
        assert_eq!(CStr::from_ptr(afdm_sweep_detector(sweep, 3)).to_str().unwrap(), "ep-af");
        assert!(afdm_sweep_detector(sweep, 4).is_null());
        assert_eq!(afdm_sweep_point(sweep, 4, &mut point), AfdmStatus::OutOfRange);
        assert!(last_error().contains("out of range"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ber.csv");
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(afdm_sweep_write_csv(sweep, c_path.as_ptr()), AfdmStatus::Ok);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);

        // a second run from the same handle reproduces the file
        let again = run(exp);
        let path2 = dir.path().join("again.csv");
        let c_path2 = CString::new(path2.to_str().unwrap()).unwrap();
        assert_eq!(afdm_sweep_write_csv(again, c_path2.as_ptr()), AfdmStatus::Ok);
        assert_eq!(text, std::fs::read_to_string(&path2).unwrap());

        afdm_sweep_free(again);
        afdm_sweep_free(sweep);
        afdm_experiment_free(exp);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let (status, exp) = parse(&SMALL.replace("seed = 9", "seed = 9\nbogus = 1"));
    assert_eq!(status, AfdmStatus::InvalidConfig);
    assert!(exp.is_null());
    assert!(last_error().contains("bogus"));

    let missing = CString::new("/nonexistent/exp.toml").unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { afdm_experiment_load(missing.as_ptr(), &mut exp) }, AfdmStatus::Io);

    assert_eq!(unsafe { afdm_experiment_parse(ptr::null(), &mut exp) }, AfdmStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { afdm_experiment_parse(bad.as_ptr().cast(), &mut exp) },
        AfdmStatus::InvalidUtf8
    );
    let mut sweep = ptr::null_mut();
    assert_eq!(unsafe { afdm_sweep_run(ptr::null(), &mut sweep) }, AfdmStatus::NullPointer);

    unsafe {
        assert_eq!(afdm_sweep_len(ptr::null()), 0);
        assert_eq!(afdm_experiment_num_snr(ptr::null()), 0);
        afdm_sweep_free(ptr::null_mut());
        afdm_experiment_free(ptr::null_mut());
    }
}

#[test]
fn load_reads_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, SMALL).unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { afdm_experiment_load(c_path.as_ptr(), &mut exp) }, AfdmStatus::Ok);
    unsafe {
        assert_eq!(afdm_experiment_num_detectors(exp), 2);
        afdm_experiment_free(exp);
    }
}

/// Compiles a C translation unit that calls every entry point, if a C
/// compiler is available.
#[test]
fn header_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/afdm.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "afdm_version",
        "afdm_last_error",
        "afdm_experiment_parse",
        "afdm_experiment_load",
        "afdm_experiment_free",
        "afdm_sweep_run",
        "afdm_sweep_point",
        "afdm_sweep_detector",
        "afdm_sweep_write_csv",
        "afdm_sweep_free",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }

    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "afdm.h"
int run(const char *path) {
    AfdmExperiment *exp = NULL;
    AfdmSweep *sweep = NULL;
    AfdmPoint point;
    if (afdm_experiment_load(path, &exp) != AFDM_STATUS_OK) return afdm_last_error() != NULL;
    if (afdm_sweep_run(exp, &sweep) == AFDM_STATUS_OK) {
        for (size_t i = 0; i < afdm_sweep_len(sweep); i++) {
            afdm_sweep_point(sweep, i, &point);
            (void)afdm_sweep_detector(sweep, i);
        }
        afdm_sweep_write_csv(sweep, "out.csv");
    }
    afdm_sweep_free(sweep);
    afdm_experiment_free(exp);
    return afdm_version()[0] == '\0';
}
"#,
    )
    .unwrap();
    let out = match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-c", "-o"])
        .arg(tmp.path().join("use.o"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&src)
        .output()
    {
        Ok(o) => o,
        Err(_) => return,
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
