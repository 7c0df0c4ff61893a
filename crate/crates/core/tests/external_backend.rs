//! The file-exchange protocol against small shell-script backends.

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use aos_thermal::correction::{
    correct_external, BackendEndpoint, CorrectionBackend, CorrectionInput, ExchangeRequest, EXCHANGE_VERSION,
};
use aos_thermal::forest::VisibilityMask;
use aos_thermal::raster::{encode_tgr, write_raster, TemperatureRaster};
use aos_thermal::Error;

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\nset -e\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

/// Shell prologue: `$dir`, `$input`, `$output` from the request manifest.
const PARSE: &str = r#"while [ "$1" != "--request" ]; do shift; done
req="$2"
dir=$(dirname "$req")
input=$(sed -n 's/.*"input": *"\([^"]*\)".*/\1/p' "$req")
output=$(sed -n 's/.*"output": *"\([^"]*\)".*/\1/p' "$req")"#;

fn sigma() -> TemperatureRaster {
    TemperatureRaster::from_fn(6, 4, 15.0, 0.1, |x, y| 10.0 + x as f32 * 3.5 + y as f32 * 0.25).unwrap()
}

fn endpoint(program: PathBuf, root: &Path) -> BackendEndpoint {
    BackendEndpoint {
        exchange_root: Some(root.to_path_buf()),
        ..BackendEndpoint::new(program)
    }
}

fn backend_message(e: Error) -> (String, String) {
    match e {
        Error::Backend { message, diagnostics } => (message, diagnostics),
        other => panic!("expected a backend error, got {other:?}"),
    }
}

#[test]
fn echo_backend_round_trips_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let prog = script(tmp.path(), "echo.sh", &format!("{PARSE}\ncp \"$dir/$input\" \"$dir/$output\""));
    let s = sigma();
    let out = correct_external(&CorrectionInput::new(&s, 15.0), &endpoint(prog, tmp.path())).unwrap();
    assert_eq!(encode_tgr(&out), encode_tgr(&s));
    // successful exchanges clean up after themselves
    let left: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("exchange-"))
        .collect();
    assert!(left.is_empty());
}

#[test]
fn request_manifest_and_inputs_follow_the_protocol() {
    let tmp = tempfile::tempdir().unwrap();
    let seen = tmp.path().join("seen");
    fs::create_dir(&seen).unwrap();
    let prog = script(
        tmp.path(),
        "inspect.sh",
        &format!(
            "{PARSE}\necho \"$@\" > {seen}/argv\ncp \"$req\" {seen}/request.json\ncp \"$dir/f.tgr\" {seen}/f.tgr\ncp \"$dir/$input\" \"$dir/$output\"",
            seen = seen.display()
        ),
    );
    let s = sigma();
    let f = VisibilityMask::new(TemperatureRaster::filled(6, 4, 0.5, 15.0, 0.1).unwrap()).unwrap();
    let ep = BackendEndpoint {
        args: vec!["--model".into(), "toy.ckpt".into()],
        ..endpoint(prog, tmp.path())
    };
    let out = correct_external(&CorrectionInput::new(&s, 21.5).with_visibility(&f), &ep).unwrap();
    // ambient travels in the TGR1 header of the input
    assert_eq!(out.ambient_c(), 21.5);
    let req: ExchangeRequest = serde_json::from_slice(&fs::read(seen.join("request.json")).unwrap()).unwrap();
    assert_eq!(
        req,
        ExchangeRequest {
            version: EXCHANGE_VERSION,
            ambient_c: 21.5,
            input: "sigma.tgr".into(),
            mask: Some("f.tgr".into()),
            output: "sigma_prime.tgr".into(),
        }
    );
    assert_eq!(fs::read(seen.join("f.tgr")).unwrap(), encode_tgr(f.raster()));
    let argv = fs::read_to_string(seen.join("argv")).unwrap();
    assert!(argv.starts_with("--request "), "{argv}");
}

#[test]
fn dimension_mangling_backend_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let wrong = tmp.path().join("wrong.tgr");
    write_raster(&TemperatureRaster::filled(3, 3, 1.0, 15.0, 0.1).unwrap(), &wrong).unwrap();
    let prog = script(
        tmp.path(),
        "mangle.sh",
        &format!("{PARSE}\necho mangling >&2\ncp {} \"$dir/$output\"", wrong.display()),
    );
    let s = sigma();
    let err = correct_external(&CorrectionInput::new(&s, 15.0), &endpoint(prog, tmp.path())).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let (message, diagnostics) = backend_message(err);
    assert!(message.contains("dimension mismatch"), "{message}");
    assert!(diagnostics.contains("mangling"));
    // the failed exchange stays on disk for inspection
    assert!(fs::read_dir(tmp.path())
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().starts_with("exchange-")));
}

#[test]
fn failing_backend_reports_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let prog = script(tmp.path(), "fail.sh", "echo 'checkpoint not found' >&2\nexit 3");
    let s = sigma();
    let (message, diagnostics) =
        backend_message(correct_external(&CorrectionInput::new(&s, 15.0), &endpoint(prog, tmp.path())).unwrap_err());
    assert!(message.contains("exited"), "{message}");
    assert!(diagnostics.contains("checkpoint not found"));
}

#[test]
fn malformed_and_missing_outputs_are_backend_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let garbage = script(tmp.path(), "garbage.sh", &format!("{PARSE}\necho nonsense > \"$dir/$output\""));
    let silent = script(tmp.path(), "silent.sh", "exit 0");
    let s = sigma();
    for (prog, expect) in [(garbage, "malformed"), (silent, "no output")] {
        let (message, _) =
            backend_message(correct_external(&CorrectionInput::new(&s, 15.0), &endpoint(prog, tmp.path())).unwrap_err());
        assert!(message.contains(expect), "{message}");
    }
}

#[test]
fn slow_backend_times_out() {
    let tmp = tempfile::tempdir().unwrap();
    let prog = script(tmp.path(), "slow.sh", "sleep 5");
    let s = sigma();
    let ep = BackendEndpoint {
        timeout_s: 0.3,
        ..endpoint(prog, tmp.path())
    };
    let start = std::time::Instant::now();
    let (message, _) = backend_message(correct_external(&CorrectionInput::new(&s, 15.0), &ep).unwrap_err());
    assert!(message.contains("timed out"), "{message}");
    assert!(start.elapsed().as_secs_f64() < 4.0);
}

#[test]
fn missing_program_is_a_backend_error() {
    let tmp = tempfile::tempdir().unwrap();
    let s = sigma();
    let err = correct_external(
        &CorrectionInput::new(&s, 15.0),
        &endpoint(tmp.path().join("does-not-exist"), tmp.path()),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn backend_selection_dispatches() {
    let tmp = tempfile::tempdir().unwrap();
    let prog = script(tmp.path(), "echo.sh", &format!("{PARSE}\ncp \"$dir/$input\" \"$dir/$output\""));
    let s = sigma();
    let external = CorrectionBackend::External(endpoint(prog, tmp.path()));
    assert!(external.is_external() && !external.needs_mask());
    assert_eq!(external.correct(&CorrectionInput::new(&s, 15.0)).unwrap(), s);
    let analytic = CorrectionBackend::Analytic { min_visibility: 0.1 };
    assert!(analytic.needs_mask());
    assert_eq!(analytic.correct(&CorrectionInput::new(&s, 15.0)).unwrap_err().exit_code(), 4);
}
