//! Hands an integral to an external restoration program through the file
//! exchange protocol. The "model" here is a shell script that copies its
//! input, standing in for a trained network.
//!
//!     cargo run --example external_backend

use std::os::unix::fs::PermissionsExt;

use aos_thermal::correction::{BackendEndpoint, CorrectionBackend};
use aos_thermal::{CorrectionInput, Error, TemperatureRaster, VisibilityMask};

const IDENTITY_MODEL: &str = r#"#!/bin/sh
set -e
while [ "$1" != "--request" ]; do shift; done
dir=$(dirname "$2")
echo "request: $(tr -d '\n ' < "$2")" >&2
cp "$dir/sigma.tgr" "$dir/sigma_prime.tgr"
"#;

fn main() -> aos_thermal::Result<()> {
    let work = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let program = work.path().join("identity-model.sh");
    std::fs::write(&program, IDENTITY_MODEL).map_err(|e| Error::io(&program, e))?;
    std::fs::set_permissions(&program, std::fs::Permissions::from_mode(0o755)).map_err(|e| Error::io(&program, e))?;

    let sigma = TemperatureRaster::from_fn(32, 32, 15.0, 0.1, |x, y| 14.0 + (x + y) as f32 * 0.5)?;
    let f = VisibilityMask::new(TemperatureRaster::filled(32, 32, 0.4, 15.0, 0.1)?)?;
    let backend = CorrectionBackend::External(BackendEndpoint {
        args: vec!["--checkpoint".into(), "untrained.pt".into()],
        timeout_s: 10.0,
        exchange_root: Some(work.path().to_path_buf()),
        ..BackendEndpoint::new(&program)
    });
    let restored = backend.correct(&CorrectionInput::new(&sigma, 15.0).with_visibility(&f))?;
    println!(
        "{} backend returned a {}x{} raster; identical to the input: {}",
        backend.identifier(),
        restored.width(),
        restored.height(),
        restored == sigma
    );
    Ok(())
}
