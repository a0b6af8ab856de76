#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use voicepad::io::{write_features, FeatureMatrix};

pub fn voicepad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voicepad"))
        .args(args)
        .output()
        .expect("spawn voicepad")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Protocol text for `n` bona fide trials `b<i>` followed by `n` spoof trials `s<i>`.
pub fn protocol_text(n: usize) -> String {
    let mut t = String::new();
    for i in 0..n {
        t.push_str(&format!("spk b{i} - - bonafide\n"));
    }
    for i in 0..n {
        t.push_str(&format!("spk s{i} - A01 spoof\n"));
    }
    t
}

/// `frames x dim` matrix of unit-variance Gaussian frames around `mean`.
pub fn gaussian_features(rng: &mut ChaCha8Rng, frames: usize, dim: usize, mean: f64) -> FeatureMatrix<f64> {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let data = (0..frames * dim).map(|_| mean + unit.sample(rng)).collect();
    FeatureMatrix::new(frames, dim, data).unwrap()
}

/// Writes `b<i>.padf` around `+shift` and `s<i>.padf` around `-shift`.
pub fn write_feature_dir(dir: &Path, n: usize, frames: usize, dim: usize, shift: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        write_features(
            dir.join(format!("b{i}.padf")),
            &gaussian_features(&mut rng, frames, dim, shift),
        )
        .unwrap();
        write_features(
            dir.join(format!("s{i}.padf")),
            &gaussian_features(&mut rng, frames, dim, -shift),
        )
        .unwrap();
    }
}
