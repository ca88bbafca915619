use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use reinflect::corpus::InflectionSample;
use reinflect::model::{save_checkpoint, Reinflector};
use reinflect::patches::PatchTable;
use reinflect_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    reinflect_string_free(s);
    out
}

fn last_error() -> String {
    let p = reinflect_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

const TSV: &str = "a\t0\tá\ne\t0\té\ná\t0\ta\né\t0\te\n";

#[test]
fn table_lookup_round_trip() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(reinflect_patch_table_from_tsv(c(TSV).as_ptr(), &mut t), ReinflectStatus::Ok);
        assert_eq!(reinflect_patch_table_class_count(t), 1);

        let mut out = 0u32;
        assert_eq!(reinflect_patch_table_apply(t, 'e' as u32, 0, &mut out), ReinflectStatus::Ok);
        assert_eq!(char::from_u32(out), Some('é'));
        assert_eq!(reinflect_patch_table_apply(t, 'x' as u32, 0, &mut out), ReinflectStatus::NotFound);
        assert!(last_error().contains("undefined"));

        let mut id = 9u32;
        assert_eq!(reinflect_patch_table_find(t, 'á' as u32, 'a' as u32, &mut id), ReinflectStatus::Ok);
        assert_eq!(id, 0);

        let mut text = ptr::null_mut();
        assert_eq!(reinflect_patch_table_to_tsv(t, &mut text), ReinflectStatus::Ok);
        let back = take(text);
        assert_eq!(PatchTable::from_tsv(&back).unwrap(), PatchTable::from_tsv(TSV).unwrap());
        reinflect_patch_table_free(t);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(reinflect_patch_table_from_tsv(c("a\tx\tb").as_ptr(), &mut t), ReinflectStatus::Parse);
        assert!(t.is_null());
        assert!(last_error().contains("patch id"));

        assert_eq!(reinflect_patch_table_from_tsv(ptr::null(), &mut t), ReinflectStatus::NullPointer);
        let bad = [0xffu8 as c_char, 0];
        assert_eq!(reinflect_patch_table_from_tsv(bad.as_ptr(), &mut t), ReinflectStatus::InvalidUtf8);

        let mut m = ptr::null_mut();
        assert_eq!(
            reinflect_model_load(c("/nonexistent/model.ckpt").as_ptr(), &mut m),
            ReinflectStatus::Io
        );
        // A successful call clears the message.
        assert_eq!(reinflect_patch_table_from_tsv(c("").as_ptr(), &mut t), ReinflectStatus::Ok);
        assert!(reinflect_last_error().is_null());
        reinflect_patch_table_free(t);
        reinflect_patch_table_free(ptr::null_mut());
        reinflect_string_free(ptr::null_mut());
    }
}

#[test]
fn oracle_and_run_through_the_abi() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(reinflect_patch_table_from_tsv(c(TSV).as_ptr(), &mut t), ReinflectStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(reinflect_oracle(t, c("tal").as_ptr(), c("tále").as_ptr(), &mut out), ReinflectStatus::Ok);
        let actions = take(out);
        assert_eq!(actions, "COPY MOVE PATCH:0 MOVE COPY MOVE EMIT:e EOW");

        assert_eq!(reinflect_run(t, c("tal").as_ptr(), c(&actions).as_ptr(), &mut out), ReinflectStatus::Ok);
        assert_eq!(take(out), "tále");

        assert_eq!(reinflect_align(ptr::null(), c("tal").as_ptr(), c("tále").as_ptr(), &mut out), ReinflectStatus::Ok);
        assert_eq!(take(out), "tal#\ttále\t2");

        assert_eq!(
            reinflect_run(t, c("tal").as_ptr(), c("JUMP").as_ptr(), &mut out),
            ReinflectStatus::InvalidArgument
        );
        reinflect_patch_table_free(t);
    }
}

#[test]
fn model_predicts_through_the_abi() {
    let samples = vec![InflectionSample::new("ab", Some("abc"), &["X"]).unwrap()];
    let model = Reinflector::for_samples(&samples, PatchTable::empty(), 4, 3, 1).unwrap();
    let expected = model
        .predict("ab", &["X".to_string()], &reinflect::model::DecodeOptions { beam_size: 2, ..Default::default() })
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path).unwrap();

    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(reinflect_model_load(c(path.to_str().unwrap()).as_ptr(), &mut m), ReinflectStatus::Ok);
        let mut form = ptr::null_mut();
        let mut ll = 1.0f64;
        assert_eq!(
            reinflect_model_predict(m, c("ab").as_ptr(), c("X").as_ptr(), 2, &mut form, &mut ll),
            ReinflectStatus::Ok
        );
        assert_eq!(take(form), expected.output);
        assert_eq!(ll, expected.log_likelihood);
        assert_eq!(
            reinflect_model_predict(m, c("ab").as_ptr(), c("X").as_ptr(), 0, &mut form, ptr::null_mut()),
            ReinflectStatus::InvalidArgument
        );
        reinflect_model_free(m);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/reinflect.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["reinflect_model_predict", "reinflect_patch_table_free", "REINFLECT_STATUS_NOT_FOUND"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Syntax-check with the system compiler when one is installed.
    if let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", header])
        .status()
    {
        assert!(status.success());
    }
}
