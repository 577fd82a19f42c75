use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

use dsem::fixtures::{COLOURED_PARAMS, TOURNAMENT_PARAMS};
use dsem_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dsem_last_error()) }.to_string_lossy().into_owned()
}

fn params(json: &str) -> *mut DsemParams {
    let c = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dsem_params_from_json(c.as_ptr(), &mut out) }, DsemStatus::Ok);
    out
}

fn take(s: *mut c_char) -> String {
    let v = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { dsem_string_free(s) };
    v
}

#[test]
fn probability_and_synthesis_round_trip() {
    let p = params(COLOURED_PARAMS);
    let world = CString::new("P(0) P(1) E(0,1) E(1,0)").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { dsem_sip_prob(p, world.as_ptr(), 2, &mut s) }, DsemStatus::Ok);
    assert_eq!(take(s), "7/40");

    let mut plp = ptr::null_mut();
    assert_eq!(unsafe { dsem_synthesize(p, &mut plp) }, DsemStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { dsem_plp_to_json(plp, &mut json) }, DsemStatus::Ok);
    let json = CString::new(take(json)).unwrap();
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { dsem_plp_from_json(json.as_ptr(), &mut again) }, DsemStatus::Ok);

    let mut passed: c_int = -1;
    let budget = dsem_default_budget();
    assert_eq!(unsafe { dsem_verify_global(again, p, 2, budget, &mut passed) }, DsemStatus::Ok);
    assert_eq!(passed, 1);
    assert_eq!(unsafe { dsem_verify_local(p, &mut passed) }, DsemStatus::Ok);
    assert_eq!(passed, 1);
    assert_eq!(unsafe { dsem_check_square(again, 2, budget, &mut passed) }, DsemStatus::Ok);
    assert_eq!(passed, 1);
    unsafe {
        dsem_plp_free(plp);
        dsem_plp_free(again);
        dsem_params_free(p);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dsem_params_from_json(ptr::null(), &mut out) }, DsemStatus::NullPointer);
    let bad = CString::new("{\"signature\": 3}").unwrap();
    assert_eq!(unsafe { dsem_params_from_json(bad.as_ptr(), &mut out) }, DsemStatus::InvalidInput);
    assert!(!last_error().is_empty());

    let t = params(TOURNAMENT_PARAMS);
    assert!(last_error().is_empty());
    let mut plp = ptr::null_mut();
    assert_eq!(unsafe { dsem_synthesize(t, &mut plp) }, DsemStatus::NotRepresentable);
    assert!(plp.is_null());
    assert!(last_error().contains("theta=[{}]"), "{}", last_error());

    let mut passed: c_int = 0;
    let nonprojective = CString::new(dsem::fixtures::NONPROJECTIVE_PLP).unwrap();
    let mut bad_plp = ptr::null_mut();
    assert_eq!(unsafe { dsem_plp_from_json(nonprojective.as_ptr(), &mut bad_plp) }, DsemStatus::Ok);
    assert_eq!(unsafe { dsem_check_square(bad_plp, 3, 2, &mut passed) }, DsemStatus::Budget);
    assert_eq!(unsafe { dsem_check_square(bad_plp, 3, 22, &mut passed) }, DsemStatus::Ok);
    assert_eq!(passed, 0);
    assert!(last_error().starts_with("FAIL n=2"));
    unsafe {
        dsem_plp_free(bad_plp);
        dsem_params_free(t);
        dsem_params_free(ptr::null_mut());
        dsem_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let h = include_str!("../include/dsem.h");
    for name in [
        "typedef struct DsemParams DsemParams;",
        "DSEM_STATUS_NOT_REPRESENTABLE = 4",
        "dsem_params_from_json",
        "dsem_sip_prob",
        "dsem_synthesize",
        "dsem_verify_local",
        "dsem_last_error",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"dsem.h\"\nint main(void) {\n  DsemParams *p = 0;\n  size_t n = 2;\n  (void)n;\n  return dsem_params_from_json(\"{}\", &p) == DSEM_STATUS_OK;\n}\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output();
    match out {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(e) => eprintln!("no C compiler available ({e}); header not compiled"),
    }
}
