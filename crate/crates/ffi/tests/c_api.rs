use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use warpconv_ffi::*;

fn grid(dims: usize, points: usize, l: f64) -> *mut WcGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { wc_grid_new(dims, points, l, 0.5, &mut g) }, WcStatus::Ok);
    g
}

fn last_error() -> String {
    let p = wc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn grid_and_state_lifecycle() {
    let g = grid(2, 16, 6.0);
    unsafe {
        assert_eq!(wc_grid_len(g), 256);
        assert_eq!(wc_grid_dims(g), 2);
        let mut s = ptr::null_mut();
        assert_eq!(wc_state_domain_vector(g, [1, 0].as_ptr(), 2, &mut s), WcStatus::Ok);
        let mut n = 0.0;
        assert_eq!(wc_state_norm(s, &mut n), WcStatus::Ok);
        assert!((n - 1.0).abs() < 1e-6, "norm {n}");

        let (mut re, mut im) = (vec![0.0; 256], vec![0.0; 256]);
        assert_eq!(wc_state_amplitudes(s, re.as_mut_ptr(), im.as_mut_ptr(), 256), WcStatus::Ok);
        let mut t = ptr::null_mut();
        assert_eq!(wc_state_from_amplitudes(g, re.as_ptr(), im.as_ptr(), 256, &mut t), WcStatus::Ok);
        let mut d = 1.0;
        assert_eq!(wc_state_distance(s, t, &mut d), WcStatus::Ok);
        assert_eq!(d, 0.0);

        assert_eq!(wc_state_amplitudes(s, re.as_mut_ptr(), im.as_mut_ptr(), 3), WcStatus::InvalidArgument);
        wc_state_free(t);
        wc_state_free(s);
        wc_grid_free(g);
        wc_grid_free(ptr::null_mut());
    }
}

#[test]
fn null_and_invalid_inputs_report_errors() {
    unsafe {
        let mut n = 0.0;
        assert_eq!(wc_state_norm(ptr::null(), &mut n), WcStatus::NullPointer);
        assert!(last_error().contains("state"));

        let mut g = ptr::null_mut();
        assert_eq!(wc_grid_new(3, 0, 1.0, 0.5, &mut g), WcStatus::InvalidArgument);
        assert!(g.is_null());

        let g = grid(2, 8, 4.0);
        let not_skew = [0.0, 1.0, 1.0, 0.0];
        let mut h = ptr::null_mut();
        assert_eq!(wc_hamiltonian_new(g, not_skew.as_ptr(), 1.0, 0.5, &mut h), WcStatus::InvalidArgument);
        assert!(last_error().contains("skew"));
        assert!(h.is_null());
        wc_grid_free(g);
    }
}

#[test]
fn deformed_hamiltonian_through_the_boundary() {
    let g = grid(3, 16, 8.0);
    let b = [0.0, 0.1, 0.0, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0];
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(wc_hamiltonian_new(g, b.as_ptr(), 0.0, 0.5, &mut h), WcStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(wc_state_domain_vector(g, [1, 0, 0].as_ptr(), 3, &mut s), WcStatus::Ok);
        let mut r = 1.0;
        assert_eq!(wc_theorem_d1_check(h, s, &mut r), WcStatus::Ok);
        assert!(r < 1e-6, "residual {r}");

        let mut hs = ptr::null_mut();
        assert_eq!(wc_hamiltonian_apply(h, s, &mut hs), WcStatus::Ok);
        wc_state_free(hs);

        let mut fit = WcBoundFit::default();
        assert_eq!(wc_bound_fit(h, 7, 1e3, &mut fit), WcStatus::Ok);
        assert!(fit.feasible && fit.a < 1.0 && fit.b <= 1e3, "{fit:?}");
        assert_eq!(fit.samples, 50);

        wc_state_free(s);
        wc_hamiltonian_free(h);
        wc_grid_free(g);
    }
}

#[test]
fn warp_spectral_zero_skew_is_identity() {
    let g = grid(2, 16, 6.0);
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(wc_state_domain_vector(g, [0, 1].as_ptr(), 2, &mut s), WcStatus::Ok);
        let mut w = ptr::null_mut();
        let zero = [0.0; 4];
        assert_eq!(
            wc_warp_spectral(WcOperatorKind::FreeHamiltonian, 0, 0.5, zero.as_ptr(), 1.0, s, &mut w),
            WcStatus::Ok
        );
        let mut hs = ptr::null_mut();
        let mut h = ptr::null_mut();
        assert_eq!(wc_hamiltonian_new(g, zero.as_ptr(), 1.0, 0.5, &mut h), WcStatus::Ok);
        assert_eq!(wc_hamiltonian_apply(h, s, &mut hs), WcStatus::Ok);
        let mut d = 1.0;
        assert_eq!(wc_state_distance(w, hs, &mut d), WcStatus::Ok);
        assert!(d < 1e-10, "distance {d}");

        let mut bad = ptr::null_mut();
        assert_eq!(
            wc_warp_spectral(WcOperatorKind::Momentum, 5, 0.5, zero.as_ptr(), 1.0, s, &mut bad),
            WcStatus::InvalidArgument
        );
        for p in [s, w, hs] {
            wc_state_free(p);
        }
        wc_hamiltonian_free(h);
        wc_grid_free(g);
    }
}

#[test]
fn snapshot_round_trip_via_paths() {
    let dir = std::env::temp_dir().join(format!("warpconv-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let g = grid(1, 32, 6.0);
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(wc_state_domain_vector(g, [2].as_ptr(), 1, &mut s), WcStatus::Ok);
        for name in ["s.json", "s.bin"] {
            let p = CString::new(dir.join(name).to_str().unwrap()).unwrap();
            assert_eq!(wc_state_save(s, p.as_ptr()), WcStatus::Ok);
            let mut back = ptr::null_mut();
            assert_eq!(wc_state_load(p.as_ptr(), &mut back), WcStatus::Ok);
            let mut d = 1.0;
            assert_eq!(wc_state_distance(s, back, &mut d), WcStatus::Ok);
            assert_eq!(d, 0.0);
            wc_state_free(back);
        }
        let missing = CString::new(dir.join("missing.bin").to_str().unwrap()).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(wc_state_load(missing.as_ptr(), &mut back), WcStatus::Io);
        wc_state_free(s);
        wc_grid_free(g);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn version_and_convention_strings() {
    let v = unsafe { CStr::from_ptr(wc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let c = unsafe { CStr::from_ptr(wc_convention()) }.to_str().unwrap();
    assert_eq!(c, warpconv::grid::CONVENTION_TAG);
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "warpconv.h"

int main(void) {
    WcGrid *g = NULL;
    if (wc_grid_new(3, 16, 8.0, 0.5, &g) != WC_STATUS_OK) return 10;
    double b[9] = {0, 0.1, 0, -0.1, 0, 0, 0, 0, 0};
    WcHamiltonian *h = NULL;
    if (wc_hamiltonian_new(g, b, 1.0, 0.5, &h) != WC_STATUS_OK) return 11;
    int k[3] = {0, 1, 1};
    WcState *s = NULL;
    if (wc_state_domain_vector(g, k, 3, &s) != WC_STATUS_OK) return 12;
    double r = 1.0;
    if (wc_theorem_d1_check(h, s, &r) != WC_STATUS_OK) return 13;
    WcState *bad = NULL;
    if (wc_state_norm(NULL, &r) != WC_STATUS_NULL_POINTER) return 14;
    if (wc_last_error_message() == NULL) return 15;
    printf("%.3e\n", r);
    wc_state_free(s);
    wc_state_free(bad);
    wc_hamiltonian_free(h);
    wc_grid_free(g);
    return 0;
}
"#;

/// Compiles a C program against the generated header and the static library.
#[test]
fn c_program_links_against_the_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let lib = [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libwarpconv_ffi.a"))
        .find(|p| p.exists())
        .expect("static library next to the test binary");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c-smoke");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.join("main");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "cc failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let r: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!(r < 1e-6, "residual {r}");
}
