//! Exercises the C ABI through the same raw calls a foreign
//! caller would make.

use std::ffi::CString;
use std::ptr;

use adom_ffi::*;

const CONFIG: &str = "\
[experiment]
name = ffi-smoke
[oracle]
kind = quadratic
n = 4
d = 2
target_kappa = 10
[network]
topology = complete
[algorithm]
kind = adom
[run]
iterations = 30
";

fn write_config(text: &str) -> (tempfile::TempDir, CString) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, text).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    (dir, c)
}

#[test]
fn load_run_read_free() {
    let (_dir, path) = write_config(CONFIG);
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(adom_config_load(path.as_ptr(), &mut cfg), AdomStatus::Ok);
        let mut trace = ptr::null_mut();
        assert_eq!(adom_run_execute(cfg, &mut trace), AdomStatus::Ok);
        assert_eq!(adom_trace_len(trace), 31);

        let mut first = std::mem::zeroed::<AdomTraceRow>();
        let mut last = std::mem::zeroed::<AdomTraceRow>();
        assert_eq!(adom_trace_row(trace, 0, &mut first), AdomStatus::Ok);
        assert_eq!(adom_trace_row(trace, 30, &mut last), AdomStatus::Ok);
        assert_eq!(first.iter, 0);
        assert_eq!(last.comm_rounds, 60);
        assert!(last.dist_sq < first.dist_sq);
        assert!(last.lyapunov.is_finite(), "exact quadratic tracks the potential");

        let chi = adom_trace_chi(trace);
        assert!((chi - 1.0).abs() < 1e-8, "complete graph has chi 1, got {chi}");

        let mut row = std::mem::zeroed::<AdomTraceRow>();
        assert_eq!(adom_trace_row(trace, 31, &mut row), AdomStatus::OutOfRange);

        adom_trace_free(trace);
        adom_config_free(cfg);
    }
}

#[test]
fn errors_set_message_and_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(
            adom_config_load(ptr::null(), &mut cfg),
            AdomStatus::NullPointer
        );

        let bogus = CString::new("/nonexistent/file.cfg").unwrap();
        assert_eq!(
            adom_config_load(bogus.as_ptr(), &mut cfg),
            AdomStatus::ConfigError
        );
        assert!(cfg.is_null());

        let mut buf = [0 as std::ffi::c_char; 256];
        let len = adom_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(len > 0);
        let msg = std::ffi::CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert!(!msg.is_empty());
    }
}

#[test]
fn bad_config_reports_offending_key() {
    let (_dir, path) = write_config(&format!("{CONFIG}bogus_key = 1\n"));
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(adom_config_load(path.as_ptr(), &mut cfg), AdomStatus::ConfigError);
        let mut buf = [0 as std::ffi::c_char; 256];
        adom_last_error_message(buf.as_mut_ptr(), buf.len());
        let msg = std::ffi::CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert!(msg.contains("bogus_key"), "got: {msg}");
    }
}
