use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use painmeter_ffi::*;

fn last_error() -> String {
    let p = pm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_model(channels: usize, seq_len: usize, c: usize) -> *mut PmModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pm_model_new_cnn(channels, seq_len, c, 3, &mut m) }, PmStatus::Ok);
    m
}

#[test]
fn predict_returns_a_distribution() {
    let m = new_model(3, 200, 4);
    let (mut n, mut l, mut c) = (0, 0, 0);
    assert_eq!(unsafe { pm_model_shape(m, &mut n, &mut l, &mut c) }, PmStatus::Ok);
    assert_eq!((n, l, c), (3, 200, 4));
    let x: Vec<f64> = (0..600).map(|i| (i as f64 * 0.1).sin()).collect();
    let mut p = [0.0; 4];
    let st = unsafe { pm_model_predict(m, x.as_ptr(), 3, 200, p.as_mut_ptr(), 4) };
    assert_eq!(st, PmStatus::Ok);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let mut small = [0.0; 2];
    let st = unsafe { pm_model_predict(m, x.as_ptr(), 3, 200, small.as_mut_ptr(), 2) };
    assert_eq!(st, PmStatus::BufferTooSmall);
    let st = unsafe { pm_model_predict(m, x.as_ptr(), 2, 300, p.as_mut_ptr(), 4) };
    assert_eq!(st, PmStatus::Shape);
    assert!(last_error().contains("shape"));
    unsafe { pm_model_free(m) };
}

#[test]
fn consensus_counts_every_vote() {
    let m = new_model(2, 200, 3);
    let x: Vec<f64> = (0..2 * 500).map(|i| (i % 17) as f64).collect();
    let mut counts = [0usize; 3];
    let mut winner = 99;
    let st = unsafe {
        pm_model_consensus(m, x.as_ptr(), 2, 500, 25, 9, counts.as_mut_ptr(), 3, &mut winner)
    };
    assert_eq!(st, PmStatus::Ok);
    assert_eq!(counts.iter().sum::<usize>(), 25);
    let mut expect = 0;
    assert_eq!(unsafe { pm_plurality(counts.as_ptr(), 3, &mut expect) }, PmStatus::Ok);
    assert_eq!(winner, expect);
    let st = unsafe {
        pm_model_consensus(m, x.as_ptr(), 2, 150, 5, 9, counts.as_mut_ptr(), 3, &mut winner)
    };
    assert_eq!(st, PmStatus::Length);
    unsafe { pm_model_free(m) };
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.bin").to_str().unwrap()).unwrap();
    let m = new_model(2, 200, 2);
    assert_eq!(unsafe { pm_model_save(m, path.as_ptr()) }, PmStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { pm_model_load(path.as_ptr(), &mut back) }, PmStatus::Ok);
    let x = vec![0.5; 400];
    let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
    unsafe {
        pm_model_predict(m, x.as_ptr(), 2, 200, a.as_mut_ptr(), 2);
        pm_model_predict(back, x.as_ptr(), 2, 200, b.as_mut_ptr(), 2);
    }
    assert_eq!(a, b);
    let missing = CString::new(dir.path().join("nope.bin").to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pm_model_load(missing.as_ptr(), &mut h) }, PmStatus::Io);
    assert!(h.is_null());
    unsafe {
        pm_model_free(m);
        pm_model_free(back);
        pm_model_free(ptr::null_mut());
    }
}

#[test]
fn ordinal_loss_matches_hand_value() {
    // p = (0.2, 0.5, 0.3), truth 0: argmax 1, weight 1 + 1/2.
    let p = [0.2, 0.5, 0.3];
    let mut loss = 0.0;
    assert_eq!(unsafe { pm_ordinal_loss(p.as_ptr(), 3, 0, &mut loss) }, PmStatus::Ok);
    let want = -1.5 * 0.2f64.ln() / 3.0;
    assert!((loss - want).abs() < 1e-12, "{loss} vs {want}");
    let bad = [0.7, 0.7];
    assert_eq!(unsafe { pm_ordinal_loss(bad.as_ptr(), 2, 0, &mut loss) }, PmStatus::Usage);
}

#[test]
fn null_arguments_are_reported() {
    let mut out = 0;
    assert_eq!(unsafe { pm_plurality(ptr::null(), 3, &mut out) }, PmStatus::NullPointer);
    assert!(last_error().contains("null"));
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pm_recording_load(ptr::null(), &mut h) }, PmStatus::NullPointer);
    assert!(unsafe { pm_recording_values(ptr::null()) }.is_null());
}

#[test]
fn recording_handle_exposes_values() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.csv");
    std::fs::write(
        &file,
        "id=r1\nsubject=s1\npain_score=2\nsample_period_ms=15\npulse:left temple:p1,gsr:palm:g1\n1,2\n3,4\n5,6\n",
    )
    .unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { pm_recording_load(path.as_ptr(), &mut r) }, PmStatus::Ok);
    let (mut n, mut t, mut s) = (0, 0, 0u8);
    assert_eq!(unsafe { pm_recording_info(r, &mut n, &mut t, &mut s) }, PmStatus::Ok);
    assert_eq!((n, t, s), (2, 3, 2));
    let v = unsafe { std::slice::from_raw_parts(pm_recording_values(r), 6) };
    assert_eq!(v, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
    unsafe { pm_recording_free(r) };
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(pm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// The generated header must compile as both C and C++.
#[test]
fn header_compiles() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"painmeter.h\"\nint main(void) { PmModel *m = 0; size_t c = 3; \
         PmStatus s = pm_model_new_cnn(3, 200, c, 1, &m); pm_model_free(m); return s == PM_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let out = match Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I", include])
            .arg(&src)
            .output()
        {
            Ok(o) => o,
            Err(_) => {
                eprintln!("{compiler} not found, skipping");
                continue;
            }
        };
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
