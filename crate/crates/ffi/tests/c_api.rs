use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use trlink_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(trlink_last_error()) }.to_string_lossy().into_owned()
}

unsafe fn cir(amps: &[f64], delays: &[f64]) -> *mut TrlinkCir {
    let phases = vec![0.0; amps.len()];
    let mut out = ptr::null_mut();
    assert_eq!(trlink_cir_new(amps.as_ptr(), phases.as_ptr(), delays.as_ptr(), amps.len(), &mut out), TrlinkStatus::Ok);
    out
}

unsafe fn samples(w: *const TrlinkWaveform) -> (Vec<f64>, Vec<f64>) {
    let n = trlink_waveform_len(w);
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(trlink_waveform_copy(w, re.as_mut_ptr(), im.as_mut_ptr(), n), TrlinkStatus::Ok);
    (re, im)
}

#[test]
fn sampled_cir_and_ideal_filter_focus() {
    unsafe {
        let dt = 1e-12;
        let h = cir(&[0.8, 0.6], &[0.0, 5e-12]);
        let mut energy = 0.0;
        assert_eq!(trlink_cir_energy(h, &mut energy), TrlinkStatus::Ok);
        assert!((energy - 1.0).abs() < 1e-12);

        let mut hs = ptr::null_mut();
        let mut merged = 99usize;
        assert_eq!(trlink_cir_to_sampled(h, dt, 0.0, &mut hs, &mut merged), TrlinkStatus::Ok);
        assert_eq!(merged, 0);
        assert_eq!(trlink_waveform_len(hs), 6);
        let (re, _) = samples(hs);
        assert!((re[0] - 0.8 / dt.sqrt()).abs() < 1e-6 * re[0]);
        assert!((re[5] - 0.6 / dt.sqrt()).abs() < 1e-6 * re[5]);

        let mut g = ptr::null_mut();
        assert_eq!(trlink_filter_ideal(hs, &mut g), TrlinkStatus::Ok);
        let mut delay = 0.0;
        assert_eq!(trlink_filter_causal_delay(g, &mut delay), TrlinkStatus::Ok);
        assert!((delay - 5e-12).abs() < 1e-24);
        let mut gw = ptr::null_mut();
        assert_eq!(trlink_filter_waveform(g, &mut gw), TrlinkStatus::Ok);
        let mut ge = 0.0;
        assert_eq!(trlink_waveform_energy(gw, &mut ge), TrlinkStatus::Ok);
        assert!((ge - 1.0).abs() < 1e-12);

        let mut y = ptr::null_mut();
        assert_eq!(trlink_convolve(hs, gw, &mut y), TrlinkStatus::Ok);
        let (re, im) = samples(y);
        let p: Vec<f64> = re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect();
        let peak = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(peak, 5);
        // dt * sum |h_k|^2 with h_k = A_k / sqrt(dt) and unit-energy taps
        assert!((re[5] - 1.0).abs() < 1e-12);

        trlink_waveform_free(y);
        trlink_waveform_free(gw);
        trlink_filter_free(g);
        trlink_waveform_free(hs);
        trlink_cir_free(h);
    }
}

#[test]
fn export_import_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(trlink_cir_synth(2e10, 0.5e-9, 3e-9, 0.0, 1e-9, 11, &mut h), TrlinkStatus::Ok);
        let n = trlink_cir_len(h);
        assert!(n > 0);
        let mut text = ptr::null_mut();
        assert_eq!(trlink_cir_export(h, &mut text), TrlinkStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(trlink_cir_import(text, &mut back), TrlinkStatus::Ok);
        trlink_string_free(text);
        assert_eq!(trlink_cir_len(back), n);
        for i in 0..n {
            let (mut a1, mut p1, mut d1, mut a2, mut p2, mut d2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            assert_eq!(trlink_cir_tap(h, i, &mut a1, &mut p1, &mut d1), TrlinkStatus::Ok);
            assert_eq!(trlink_cir_tap(back, i, &mut a2, &mut p2, &mut d2), TrlinkStatus::Ok);
            assert_eq!((a1, p1, d1), (a2, p2, d2));
        }
        let (mut rms, mut rms_back) = (0.0, 0.0);
        assert_eq!(trlink_cir_rms_delay_spread(h, &mut rms), TrlinkStatus::Ok);
        assert_eq!(trlink_cir_rms_delay_spread(back, &mut rms_back), TrlinkStatus::Ok);
        assert_eq!(rms, rms_back);
        assert!(rms > 0.0);
        trlink_cir_free(back);
        trlink_cir_free(h);
    }
}

#[test]
fn filter_stages_and_recipes() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(trlink_cir_synth(2e10, 0.5e-9, 2e-9, 0.0, 0.0, 5, &mut h), TrlinkStatus::Ok);
        let mut hs = ptr::null_mut();
        assert_eq!(trlink_cir_to_sampled(h, 1e-12, 0.0, &mut hs, ptr::null_mut()), TrlinkStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(trlink_filter_ideal(hs, &mut g), TrlinkStatus::Ok);
        let (mut z, mut j, mut q) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(trlink_filter_zoh(g, 1e11, &mut z), TrlinkStatus::Ok);
        assert_eq!(trlink_filter_jitter(z, 0.5, &mut j), TrlinkStatus::Ok);
        assert_eq!(trlink_filter_quantize(j, 6, &mut q), TrlinkStatus::Ok);

        let recipe = CString::new("tr+zoh@100GHz+jitter@0.5+quant@6").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(trlink_filter_from_recipe(hs, recipe.as_ptr(), &mut r), TrlinkStatus::Ok);
        let (mut wq, mut wr) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(trlink_filter_waveform(q, &mut wq), TrlinkStatus::Ok);
        assert_eq!(trlink_filter_waveform(r, &mut wr), TrlinkStatus::Ok);
        assert_eq!(samples(wq), samples(wr));

        let none = CString::new("none").unwrap();
        let mut unused = ptr::null_mut();
        assert_eq!(trlink_filter_from_recipe(hs, none.as_ptr(), &mut unused), TrlinkStatus::InvalidArgument);
        assert!(unused.is_null());
        let bad = CString::new("tr+zoh").unwrap();
        assert_ne!(trlink_filter_from_recipe(hs, bad.as_ptr(), &mut unused), TrlinkStatus::Ok);
        assert!(!last_error().is_empty());

        assert_ne!(trlink_filter_zoh(g, 2e12, &mut unused), TrlinkStatus::Ok);
        assert!(last_error().contains("upsample"), "{}", last_error());

        for w in [wq, wr, hs] {
            trlink_waveform_free(w);
        }
        for f in [g, z, j, q, r] {
            trlink_filter_free(f);
        }
        trlink_cir_free(h);
    }
}

#[test]
fn errors_and_null_handling() {
    unsafe {
        let mut out = ptr::null_mut();
        let amps = [1.0];
        assert_eq!(trlink_cir_new(amps.as_ptr(), ptr::null(), amps.as_ptr(), 1, &mut out), TrlinkStatus::NullPointer);
        assert!(last_error().contains("phases"));
        assert_eq!(trlink_cir_new(ptr::null(), ptr::null(), ptr::null(), 0, &mut out), TrlinkStatus::EmptyChannel);
        assert!(out.is_null());

        let bad = CString::new("not a cir").unwrap();
        assert_eq!(trlink_cir_import(bad.as_ptr(), &mut out), TrlinkStatus::Parse);

        let h = cir(&[1.0], &[0.0]);
        assert!(last_error().is_empty());
        let mut e = 0.0;
        assert_eq!(trlink_cir_energy(ptr::null(), &mut e), TrlinkStatus::NullPointer);
        assert_eq!(trlink_cir_energy(h, ptr::null_mut()), TrlinkStatus::NullPointer);
        let (mut a, mut p, mut d) = (0.0, 0.0, 0.0);
        assert_eq!(trlink_cir_tap(h, 1, &mut a, &mut p, &mut d), TrlinkStatus::InvalidArgument);
        assert_eq!(trlink_cir_len(ptr::null()), 0);

        let mut w = ptr::null_mut();
        assert_eq!(trlink_cir_to_sampled(h, -1.0, 0.0, &mut w, ptr::null_mut()), TrlinkStatus::InvalidArgument);
        assert_eq!(trlink_cir_to_sampled(h, 1e-12, 3e-12, &mut w, ptr::null_mut()), TrlinkStatus::Ok);
        let mut small = [0.0; 2];
        assert_eq!(trlink_waveform_copy(w, small.as_mut_ptr(), ptr::null_mut(), 2), TrlinkStatus::BufferTooSmall);
        let (mut dt, mut t0) = (0.0, 1.0);
        assert_eq!(trlink_waveform_grid(w, &mut dt, &mut t0), TrlinkStatus::Ok);
        assert_eq!((dt, t0), (1e-12, 0.0));

        let zeros = [0.0; 4];
        let mut z = ptr::null_mut();
        assert_eq!(trlink_waveform_new(zeros.as_ptr(), ptr::null(), 4, 1e-12, 0.0, &mut z), TrlinkStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(trlink_filter_ideal(z, &mut g), TrlinkStatus::ZeroEnergy);

        let mut other = ptr::null_mut();
        assert_eq!(trlink_waveform_new(zeros.as_ptr(), ptr::null(), 4, 2e-12, 0.0, &mut other), TrlinkStatus::Ok);
        let mut y = ptr::null_mut();
        assert_eq!(trlink_convolve(w, other, &mut y), TrlinkStatus::InvalidArgument);
        assert!(last_error().contains("grid"), "{}", last_error());

        trlink_waveform_free(other);
        trlink_waveform_free(z);
        trlink_waveform_free(w);
        trlink_cir_free(h);
        trlink_cir_free(ptr::null_mut());
        trlink_waveform_free(ptr::null_mut());
        trlink_filter_free(ptr::null_mut());
        trlink_string_free(ptr::null_mut());
    }
}

#[test]
fn ber_matches_core() {
    let mut ber = 0.0;
    unsafe {
        assert_eq!(trlink_ber_theoretical_ook(4.0, 1.0, 30.0, &mut ber), TrlinkStatus::Ok);
        assert_eq!(ber, trlink::phy::ber_theoretical_ook(4.0, 1.0, 30.0));
        assert_eq!(trlink_ber_theoretical_ook(0.0, 1.0, 30.0, &mut ber), TrlinkStatus::Ok);
        assert_eq!(ber, 0.5);
        assert_eq!(trlink_ber_theoretical_ook(1.0, 0.0, 30.0, &mut ber), TrlinkStatus::InvalidArgument);
    }
    let v = unsafe { CStr::from_ptr(trlink_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api_and_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/trlink.h")).expect("generated header");
    for name in [
        "typedef struct TrlinkCir TrlinkCir",
        "typedef struct TrlinkWaveform TrlinkWaveform",
        "typedef struct TrlinkFilter TrlinkFilter",
        "TRLINK_STATUS_BUFFER_TOO_SMALL = 5",
        "trlink_cir_synth(",
        "trlink_waveform_copy(",
        "trlink_filter_from_recipe(",
        "trlink_ber_theoretical_ook(",
        "trlink_last_error(void)",
    ] {
        assert!(header.contains(name), "header lacks `{name}`");
    }

    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "trlink.h"
int use(void) {
    TrlinkCir *h = NULL;
    TrlinkWaveform *w = NULL;
    size_t merged = 0;
    if (trlink_cir_synth(2e10, 0.5e-9, 4e-9, 0.0, 0.0, 1u, &h) != TRLINK_STATUS_OK) return 1;
    enum TrlinkStatus s = trlink_cir_to_sampled(h, 1e-12, 0.0, &w, &merged);
    trlink_waveform_free(w);
    trlink_cir_free(h);
    return s == TRLINK_STATUS_OK ? 0 : (int)s;
}
"#,
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status()
        .unwrap_or_else(|e| panic!("cannot run C compiler `{cc}`: {e}"));
    assert!(status.success());
}
