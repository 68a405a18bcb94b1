use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ssagg_ffi::*;

fn last_error() -> String {
    let p = ssagg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let text = CStr::from_ptr(s).to_string_lossy().into_owned();
    ssagg_string_free(s);
    text
}

fn bundled(name: &str) -> *mut SsaggScenario {
    let name = CString::new(name).unwrap();
    let mut scenario = ptr::null_mut();
    assert_eq!(unsafe { ssagg_scenario_bundled(name.as_ptr(), &mut scenario) }, SsaggStatus::Ok);
    scenario
}

#[test]
fn run_bundled_scenario() {
    unsafe {
        let scenario = bundled("onchain-basic");
        let mut result = ptr::null_mut();
        assert_eq!(ssagg_scenario_run(scenario, 4, ptr::null(), &mut result), SsaggStatus::Ok);
        assert_eq!(ssagg_result_passed(result), 1);
        assert_eq!(ssagg_result_run_count(result), 1);

        let mut s = ptr::null_mut();
        assert_eq!(ssagg_result_report(result, &mut s), SsaggStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
        assert_eq!(report["seed"], 4);

        assert_eq!(ssagg_result_trace(result, &mut s), SsaggStatus::Ok);
        let trace = take(s);
        let mut digest = [0u8; 32];
        assert_eq!(ssagg_result_trace_digest(result, digest.as_mut_ptr()), SsaggStatus::Ok);
        assert_eq!(hex::encode(digest), report["trace_digest"].as_str().unwrap());
        assert_eq!(trace.lines().count(), ssagg::netsim::Trace::read_lines(trace.as_bytes()).unwrap().len());

        assert_eq!(ssagg_result_output(result, 0, &mut s), SsaggStatus::Ok);
        assert!(take(s).contains("given"));
        assert_eq!(ssagg_result_output(result, 5, &mut s), SsaggStatus::InvalidArgument);
        assert!(last_error().contains("index 5"));

        ssagg_result_free(result);
        ssagg_scenario_free(scenario);
    }
}

#[test]
fn options_override_mode() {
    unsafe {
        let scenario = bundled("onchain-basic");
        let options = SsaggRunOptions { mode: SsaggMode::OffChain, strict: -1, provider: SsaggProvider::System, threaded: 0 };
        let mut result = ptr::null_mut();
        assert_eq!(ssagg_scenario_run(scenario, 4, &options, &mut result), SsaggStatus::Ok);
        // the declared ledger delta no longer holds off-chain
        assert_eq!(ssagg_result_passed(result), 0);
        let mut s = ptr::null_mut();
        ssagg_result_report(result, &mut s);
        assert!(take(s).contains("\"mode\":\"offchain\""));
        ssagg_result_free(result);
        ssagg_scenario_free(scenario);
    }
}

#[test]
fn json_roundtrip_and_errors() {
    unsafe {
        let scenario = bundled("neuroscience");
        let mut s = ptr::null_mut();
        assert_eq!(ssagg_scenario_to_json(scenario, &mut s), SsaggStatus::Ok);
        let json = CString::new(take(s)).unwrap();
        let mut again = ptr::null_mut();
        assert_eq!(ssagg_scenario_from_json(json.as_ptr(), &mut again), SsaggStatus::Ok);
        ssagg_scenario_free(again);
        ssagg_scenario_free(scenario);

        let bad = CString::new(r#"{"name": 3}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(ssagg_scenario_from_json(bad.as_ptr(), &mut out), SsaggStatus::Config);
        assert!(out.is_null());
        assert!(last_error().contains("name"));

        assert_eq!(ssagg_scenario_from_json(ptr::null(), &mut out), SsaggStatus::NullPointer);
        let name = CString::new("missing").unwrap();
        assert_eq!(ssagg_scenario_bundled(name.as_ptr(), &mut out), SsaggStatus::NotFound);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(ssagg_scenario_from_json(invalid.as_ptr().cast(), &mut out), SsaggStatus::InvalidUtf8);

        assert_eq!(ssagg_result_passed(ptr::null()), 0);
        assert_eq!(ssagg_result_run_count(ptr::null()), 0);
        ssagg_result_free(ptr::null_mut());
        ssagg_scenario_free(ptr::null_mut());
        ssagg_string_free(ptr::null_mut());
        assert!(!CStr::from_ptr(ssagg_version()).to_bytes().is_empty());
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header().join("ssagg.h")).unwrap();
    let source = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<_> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap().to_string())
        .collect();
    assert!(exports.len() >= 14);
    for name in exports {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the header and the static library
/// when a C compiler is around.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = target.join("libssagg_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/smoke.c"))
        .arg("-I")
        .arg(header())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "passed 1");
}
