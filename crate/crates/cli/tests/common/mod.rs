#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_modelcmp")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("MODELCMP_SEED")
        .output()
        .expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Long-format CSV from `value(dataset, model, fold)`.
pub fn write_csv(
    dir: &Path,
    name: &str,
    n: usize,
    models: &[&str],
    r: usize,
    value: impl Fn(usize, usize, usize) -> f64,
) -> PathBuf {
    let mut s = String::from("dataset,model,resample,value\n");
    for i in 0..n {
        for (j, m) in models.iter().enumerate() {
            for f in 0..r {
                s.push_str(&format!("d{i},{m},Fold{}.Rep1,{:.6}\n", f + 1, value(i, j, f)));
            }
        }
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path
}

/// Deterministic pseudo-noise in [-1, 1] without an RNG dependency.
pub fn jitter(i: usize, j: usize, f: usize) -> f64 {
    let mut x = (i as u64 * 7919 + j as u64 * 104_729 + f as u64 * 1_299_709) ^ 0x9E37_79B9_7F4A_7C15;
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    (x % 2_000_001) as f64 / 1_000_000.0 - 1.0
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
