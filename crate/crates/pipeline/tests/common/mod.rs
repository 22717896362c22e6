#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;

use gunsmoke_pipeline::fixture::{write_fixture, CONFIG_FILE};
use gunsmoke_pipeline::Config;

/// The demo corpus, written once per test binary and only read afterwards.
pub fn fixture() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        write_fixture(d.path(), 1).unwrap();
        d
    })
    .path()
}

/// Fixture config with runs redirected to `runs`.
pub fn config(runs: &Path) -> Config {
    let mut c = Config::load(fixture().join(CONFIG_FILE)).unwrap();
    c.output.runs_dir = runs.to_path_buf();
    c
}
