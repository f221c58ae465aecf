#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use invaug::data::{Dataset, SyntheticSpec, TaskKind};
use invaug::sampler::SamplerConfig;
use invaug::trainer::{Mode, TrainerConfig};

pub fn rings(n_train: usize, n_test: usize, seed: u64) -> (Dataset, Dataset) {
    SyntheticSpec {
        kind: TaskKind::Rings,
        n_train,
        n_test,
        noise_sigma: 0.1,
        classes: 2,
        seed,
    }
    .generate()
    .unwrap()
}

pub fn trainer(mode: Mode, epsilon: Option<f64>, epochs: usize, seed: u64) -> TrainerConfig {
    TrainerConfig {
        mode,
        epsilon,
        eta_p: 0.1,
        eta_d: 1e-3,
        fixed_gamma: None,
        batch_size: 32,
        epochs,
        sampler: SamplerConfig::default(),
        momentum: 0.0,
        seed,
    }
}

/// A small rings run config in TOML; `trainer_extra` is appended to the
/// `[trainer]` table.
pub fn small_config(out: &Path, trainer_extra: &str) -> String {
    format!(
        r#"version = 1
output_dir = "{}"

[dataset]
kind = "rings"
n_train = 64
n_test = 32
noise_sigma = 0.1

[space]
kinds = ["rotate"]
levels_per_op = 12

[model]
layer_sizes = [2, 8, 2]

[trainer]
eta_p = 0.1
batch_size = 16
epochs = 3
{trainer_extra}
"#,
        out.display()
    )
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

pub fn invaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invaug")).args(args).output().unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
