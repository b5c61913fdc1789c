#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use nopa::config::RunConfig;
use nopa::resonance_solver::NopaDevice;

pub fn reference_device() -> NopaDevice {
    RunConfig::default().device().expect("reference device")
}

pub fn default_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.json")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn nopa(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_nopa"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Writes `cfg` into `dir` and returns its path.
pub fn write_config(dir: &Path, name: &str, cfg: &serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

/// Default config as JSON with `patch` merged in, one level deep per block.
pub fn patched(patch: serde_json::Value) -> serde_json::Value {
    let mut base = serde_json::to_value(RunConfig::default()).unwrap();
    for (block, fields) in patch.as_object().unwrap() {
        match fields {
            serde_json::Value::Object(f) => {
                let target = base[block.as_str()].as_object_mut().unwrap();
                for (k, v) in f {
                    target.insert(k.clone(), v.clone());
                }
            }
            other => {
                base[block.as_str()] = other.clone();
            }
        }
    }
    base
}

/// Data rows of a CSV with `#` comments and one header line.
pub fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

pub fn csv_meta(text: &str, key: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_owned))
}
