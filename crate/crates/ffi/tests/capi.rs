use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use eol_mistrust_ffi::*;

fn last_error() -> String {
    let p = em_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synth(n: usize, seed: u64) -> *mut EmDataset {
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { em_dataset_synth(n, seed, &mut ds) }, EmStatus::Ok);
    assert!(!ds.is_null());
    ds
}

#[test]
fn synth_train_predict_roundtrip() {
    let ds = synth(400, 3);
    unsafe {
        assert_eq!(em_dataset_admission_count(ds), 400);
        let mut model = ptr::null_mut();
        assert_eq!(em_model_train(ds, 1.0, 1e-7, 5000, &mut model), EmStatus::Ok);
        assert_eq!(em_model_converged(model), 1);
        let k = em_model_n_features(model);
        assert!(k > 0);

        let x = vec![0.0; 2 * k];
        let mut out = [0.0; 2];
        assert_eq!(em_model_predict(model, x.as_ptr(), 2, k, out.as_mut_ptr()), EmStatus::Ok);
        let b = em_model_intercept(model);
        let expected = 1.0 / (1.0 + (-b).exp());
        assert!((out[0] - expected).abs() < 1e-12);
        assert_eq!(out[0], out[1]);

        let bad = em_model_predict(model, x.as_ptr(), 1, k + 1, out.as_mut_ptr());
        assert_eq!(bad, EmStatus::InvalidArgument);
        assert!(last_error().contains("dimension mismatch"));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.csv").to_str().unwrap()).unwrap();
        assert_eq!(em_model_save(model, path.as_ptr()), EmStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(em_model_load(path.as_ptr(), &mut loaded), EmStatus::Ok);
        assert_eq!(em_model_n_features(loaded), k);
        assert_eq!(em_model_intercept(loaded), b);

        let scores = CString::new(dir.path().join("s.csv").to_str().unwrap()).unwrap();
        assert_eq!(em_score_to_csv(loaded, ds, scores.as_ptr()), EmStatus::Ok);
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(text.lines().count(), 401);

        em_model_free(loaded);
        em_model_free(model);
        em_dataset_free(ds);
    }
}

#[test]
fn pipeline_writes_report() {
    let ds = synth(1500, 11);
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(em_pipeline_run(ds, out.as_ptr()), EmStatus::Ok);
        em_dataset_free(ds);
    }
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("treatment_disparities.csv").exists());
}

#[test]
fn load_reports_missing_directory() {
    let dir = CString::new("/nonexistent/eol-mistrust").unwrap();
    let mut ds = ptr::null_mut();
    let status = unsafe { em_dataset_load(dir.as_ptr(), 1, &mut ds) };
    assert_eq!(status, EmStatus::Io);
    assert!(ds.is_null());
    assert!(last_error().contains("admissions.csv"));
}

#[test]
fn load_reads_cli_output() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = eol_mistrust::synth::generate(&eol_mistrust::synth::SynthConfig {
        n_admissions: 50,
        ..Default::default()
    })
    .unwrap();
    eol_mistrust::data_model::write_dataset(&data, dir.path()).unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(em_dataset_load(path.as_ptr(), 1, &mut ds), EmStatus::Ok);
        assert_eq!(em_dataset_admission_count(ds), 50);
        em_dataset_free(ds);
    }
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        assert_eq!(em_dataset_synth(10, 1, ptr::null_mut()), EmStatus::NullPointer);
        let mut model = ptr::null_mut();
        assert_eq!(em_model_train(ptr::null(), 1.0, 1e-7, 10, &mut model), EmStatus::NullPointer);
        assert!(last_error().contains("ds"));
        assert_eq!(em_dataset_admission_count(ptr::null()), 0);
        assert!(em_model_intercept(ptr::null()).is_nan());
        em_dataset_free(ptr::null_mut());
        em_model_free(ptr::null_mut());
    }
}

#[test]
fn mann_whitney_matches_hand_count() {
    // a = {1, 2}, b = {3, 4}: no pair with a > b, so U = 0 and the exact
    // two-sided p is 2 / C(4, 2) = 1/3.
    let a = [1.0, 2.0];
    let b = [3.0, 4.0];
    let (mut u, mut p) = (f64::NAN, f64::NAN);
    let status = unsafe { em_mann_whitney(a.as_ptr(), 2, b.as_ptr(), 2, 20, 1, &mut u, &mut p) };
    assert_eq!(status, EmStatus::Ok);
    assert_eq!(u, 0.0);
    assert!((p - 1.0 / 3.0).abs() < 1e-12);

    let status = unsafe { em_mann_whitney(a.as_ptr(), 2, ptr::null(), 0, 20, 1, &mut u, &mut p) };
    assert_eq!(status, EmStatus::Degenerate);
}

#[test]
fn merged_duration_counts_short_gaps() {
    let starts = [0i64, 700, 2000];
    let ends = [100i64, 800, 2100];
    let mut out = 0;
    unsafe {
        // 600-minute gap merges (inclusive), 1200-minute gap does not
        assert_eq!(em_merged_duration(starts.as_ptr(), ends.as_ptr(), 3, 600, 1, &mut out), EmStatus::Ok);
        assert_eq!(out, 800 + 100);
        assert_eq!(em_merged_duration(starts.as_ptr(), ends.as_ptr(), 3, 600, 0, &mut out), EmStatus::Ok);
        assert_eq!(out, 300);
        let bad_end = [-5i64, 800, 2100];
        let s = em_merged_duration(starts.as_ptr(), bad_end.as_ptr(), 3, 600, 1, &mut out);
        assert_ne!(s, EmStatus::Ok);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/eol_mistrust.h")).unwrap();
    for name in [
        "em_last_error_message",
        "em_dataset_load",
        "em_dataset_synth",
        "em_dataset_admission_count",
        "em_dataset_free",
        "em_model_train",
        "em_model_load",
        "em_model_save",
        "em_model_free",
        "em_model_n_features",
        "em_model_intercept",
        "em_model_converged",
        "em_model_predict",
        "em_score_to_csv",
        "em_pipeline_run",
        "em_mann_whitney",
        "em_merged_duration",
        "typedef struct EmDataset EmDataset",
        "EM_STATUS_NULL_POINTER = 1",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(
        &src,
        "#include \"eol_mistrust.h\"\nint main(void) { EmDataset *d = 0; return em_dataset_synth(1, 1, &d) == EM_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
