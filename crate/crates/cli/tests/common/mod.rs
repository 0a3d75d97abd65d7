#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rfield_core::synth::{write_scene, RoomSpec};

/// Runs the `rfield` binary with `args` inside `cwd`.
pub fn rfield(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfield"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

/// Runs the binary and fails with its stderr unless it exits 0.
pub fn rfield_ok(cwd: &Path, args: &[&str]) {
    let out = rfield(cwd, args);
    assert!(
        out.status.success(),
        "rfield {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Writes a room scene with `views` cameras into `dir`.
pub fn write_room(dir: &Path, views: usize) {
    write_scene(&RoomSpec::standard(views).build().unwrap(), dir).unwrap();
}
