//! Experiment harness: declarative run configs, run directories, sweeps and
//! diagnostic dumps.
//!
//! A run config is a TOML file (format version 1):
//!
//! ```toml
//! version = 1
//! seed = 0                      # optional; overrides every section's seed
//! output_dir = "runs/erm"
//!
//! [dataset]
//! kind = "rings"                # rings | wedges
//! n_train = 500
//! n_test = 500
//! noise_sigma = 0.1
//! classes = 2
//!
//! [space]
//! kinds = ["rotate"]            # identity rotate scale reflect_x reflect_y translate_x translate_y
//! levels_per_op = 30
//! include_identity = false
//! # ranges = { rotate = [-135.0, 135.0] }
//!
//! [model]
//! layer_sizes = [2, 32, 32, 2]
//! activation = "tanh"
//!
//! [trainer]
//! mode = "primal_dual"          # primal_dual | penalized | erm | uniform_constrained
//! epsilon = 0.1
//! eta_p = 0.1
//! eta_d = 0.001
//! batch_size = 32
//! epochs = 200
//! sampler = { n_steps = 2, m = 1 }
//!
//! [[sweep]]
//! field = "trainer.epsilon"
//! values = [0.3, 0.2, 0.1]
//! ```
//!
//! A run directory can also be replayed from its `manifest.json`, which
//! embeds the fully resolved config.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{self, GradCheckReport, Mlp, MlpConfig, Params};
use crate::oracle::{self, OracleReport};
use crate::rng::{self, purpose};
use crate::sampler::{orbit_loss_fn, run_chain, TraceStep};
use crate::trainer::{self, EpochMetrics, Mode, TrainerConfig};
use crate::transform::{Op, TransformKind, TransformSpace, DEFAULT_LEVELS};

pub const CONFIG_VERSION: u32 = 1;

pub const METRICS_FILE: &str = "metrics.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.csv";

pub const METRICS_HEADER: [&str; 7] = [
    "epoch",
    "train_loss",
    "slack",
    "gamma",
    "entropy",
    "test_loss",
    "test_acc",
];

const GRADCHECK_PROBES: usize = 20;
const GRADCHECK_STEP: f64 = 1e-5;
const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kinds: Vec<Op>,
    #[serde(default = "default_levels")]
    pub levels_per_op: usize,
    #[serde(default)]
    pub include_identity: bool,
    /// Magnitude range overrides keyed by kind name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ranges: BTreeMap<Op, (f64, f64)>,
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

impl SpaceConfig {
    pub fn build(&self) -> Result<TransformSpace> {
        let kinds = self
            .kinds
            .iter()
            .map(|&op| match self.ranges.get(&op) {
                Some(&(lo, hi)) => TransformKind::with_range(op, lo, hi),
                None => Ok(TransformKind::new(op)),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::config("space.ranges", e.to_string()))?;
        if let Some(op) = self.ranges.keys().find(|op| !self.kinds.contains(op)) {
            return Err(Error::config("space.ranges", format!("{op} is not in space.kinds")));
        }
        TransformSpace::new(kinds, self.levels_per_op, self.include_identity)
            .map_err(|e| Error::config("space.kinds", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the config, e.g. `trainer.epsilon` or `seed`.
    pub field: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "config_version")]
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub dataset: SyntheticSpec,
    pub space: SpaceConfig,
    pub model: MlpConfig,
    pub trainer: TrainerConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
}

fn config_version() -> u32 {
    CONFIG_VERSION
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

impl RunConfig {
    /// Parses a TOML config, or the `config` object of a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_value(Self::raw_value(path, &text)?)
    }

    fn raw_value(path: &Path, text: &str) -> Result<Value> {
        if path.extension().is_some_and(|e| e == "json") {
            let mut manifest: Value = serde_json::from_str(text)?;
            manifest
                .get_mut("config")
                .map(Value::take)
                .ok_or_else(|| Error::config("config", "manifest has no `config` object"))
        } else {
            toml::from_str::<Value>(text).map_err(|e| Error::config("<toml>", e.to_string()))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_value(toml::from_str::<Value>(text).map_err(|e| Error::config("<toml>", e.to_string()))?)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let mut config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." { "<root>".to_string() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        config.resolve_seeds();
        config.validate()?;
        Ok(config)
    }

    /// Pushes the top-level seed into every section.
    pub fn resolve_seeds(&mut self) {
        if let Some(seed) = self.seed {
            self.dataset.seed = seed;
            self.model.seed = seed;
            self.trainer.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        self.dataset.validate()?;
        self.space.build()?;
        let sizes = &self.model.layer_sizes;
        Mlp::new(self.model.clone())?;
        if sizes[0] != 2 {
            return Err(Error::config(
                "model.layer_sizes",
                "first size must be the feature dimension 2",
            ));
        }
        if *sizes.last().unwrap() != self.dataset.classes {
            return Err(Error::config(
                "model.layer_sizes",
                format!("last size must equal dataset.classes = {}", self.dataset.classes),
            ));
        }
        self.trainer.validate()?;
        for (i, axis) in self.sweep.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(Error::config(format!("sweep[{i}].values"), "must be non-empty"));
            }
        }
        Ok(())
    }

    /// Cross product of the sweep axes, one child config per grid point, in
    /// row-major order (the last axis varies fastest).
    pub fn expand_sweep(&self) -> Result<Vec<(Vec<Value>, RunConfig)>> {
        if self.sweep.is_empty() {
            return Err(Error::config("sweep", "config has no sweep block"));
        }
        // Children carry per-section seeds only; the top-level seed has
        // already been pushed into every section.
        let mut resolved = self.clone();
        resolved.resolve_seeds();
        resolved.seed = None;
        resolved.sweep.clear();
        let base = serde_json::to_value(&resolved)?;
        let mut points: Vec<Vec<Value>> = vec![vec![]];
        for axis in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        points
            .into_iter()
            .enumerate()
            .map(|(i, values)| {
                let mut v = base.clone();
                // A swept top-level seed reaches every section first, so an
                // explicit per-section seed axis still takes precedence.
                let axes = self.sweep.iter().zip(&values);
                for (_, value) in axes.clone().filter(|(a, _)| a.field == "seed") {
                    for path in ["dataset.seed", "model.seed", "trainer.seed"] {
                        set_path(&mut v, path, value.clone())?;
                    }
                }
                for (axis, value) in axes.filter(|(a, _)| a.field != "seed") {
                    set_path(&mut v, &axis.field, value.clone())?;
                }
                v["output_dir"] = json!(self.output_dir.join(point_dir(i)));
                Ok((values, RunConfig::from_value(v)?))
            })
            .collect()
    }
}

fn point_dir(i: usize) -> String {
    format!("point-{i:03}")
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::config(path, format!("`{}` is not a table", parts[..depth].join("."))))?;
        if depth + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    Err(Error::config(path, "empty field path"))
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn metrics_row(m: &EpochMetrics) -> [String; 7] {
    [
        m.epoch.to_string(),
        fmt_real(m.train_loss),
        fmt_real(m.slack),
        fmt_real(m.gamma),
        fmt_real(m.entropy),
        fmt_real(m.test_loss),
        fmt_real(m.test_accuracy),
    ]
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub config_version: u32,
    pub tool_version: String,
    pub seeds: BTreeMap<String, u64>,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub status: String,
    pub files: Vec<String>,
    pub config: RunConfig,
}

impl RunManifest {
    fn new(config: &RunConfig) -> Self {
        RunManifest {
            format: "invaug-run".into(),
            config_version: CONFIG_VERSION,
            tool_version: format!("invaug {}", env!("CARGO_PKG_VERSION")),
            seeds: BTreeMap::from([
                ("dataset".into(), config.dataset.seed),
                ("model".into(), config.model.seed),
                ("trainer".into(), config.trainer.seed),
            ]),
            started_unix: unix_now(),
            finished_unix: None,
            status: "running".into(),
            files: vec![],
            config: config.clone(),
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run config (TOML) or a run's manifest.json.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        CommonArgs {
            config: config.into(),
            seed: None,
            out: None,
        }
    }

    pub fn load(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = Some(seed);
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.resolve_seeds();
        Ok(config)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "invaug",
    version,
    about = "Invariance-constrained automatic data augmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run and write its run directory.
    Train(CommonArgs),
    /// Train every grid point of the config's sweep block.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Run grid points concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Print exact orbit quantities for one training sample as JSON.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0)]
        sample: usize,
        /// Defaults to `<output_dir>/checkpoint.bin`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck(CommonArgs),
    /// Dump one MH chain as CSV `step,kind,level,loss,accepted`.
    SampleTrace {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0)]
        sample: usize,
        /// Defaults to `<output_dir>/checkpoint.bin` when present, else the initial parameters.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn run(cli: Cli, stdout: &mut impl Write) -> Result<i32> {
    match cli.command {
        Command::Train(common) => {
            cmd_train(&common.load()?)?;
            Ok(0)
        }
        Command::Sweep { common, parallel } => {
            let summary = cmd_sweep(&common.load()?, parallel)?;
            writeln!(stdout, "{}", summary.display()).map_err(|e| Error::io("<stdout>", e))?;
            Ok(0)
        }
        Command::Oracle {
            common,
            sample,
            checkpoint,
        } => {
            let report = cmd_oracle(&common.load()?, sample, checkpoint.as_deref())?;
            serde_json::to_writer_pretty(&mut *stdout, &report)?;
            writeln!(stdout).map_err(|e| Error::io("<stdout>", e))?;
            Ok(0)
        }
        Command::Gradcheck(common) => {
            let report = cmd_gradcheck(&common.load()?)?;
            serde_json::to_writer_pretty(&mut *stdout, &report)?;
            writeln!(stdout).map_err(|e| Error::io("<stdout>", e))?;
            Ok(if report.max_relative_error < GRADCHECK_TOLERANCE {
                0
            } else {
                1
            })
        }
        Command::SampleTrace {
            common,
            sample,
            checkpoint,
        } => {
            let trace = cmd_sample_trace(&common.load()?, sample, checkpoint.as_deref())?;
            write_trace_csv(&trace, &mut *stdout)?;
            Ok(0)
        }
    }
}

/// Trains one run into `config.output_dir`, writing the manifest, metrics,
/// histograms and final checkpoint.
pub fn cmd_train(config: &RunConfig) -> Result<trainer::RunResult> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = RunManifest::new(config);
    manifest.write(dir)?;

    let outcome = train_into(config, dir);
    manifest.finished_unix = Some(unix_now());
    match &outcome {
        Ok(_) => {
            manifest.status = "completed".into();
            manifest.files = vec![
                MANIFEST_FILE.into(),
                METRICS_FILE.into(),
                HISTOGRAMS_FILE.into(),
                CHECKPOINT_FILE.into(),
            ];
        }
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.files = vec![MANIFEST_FILE.into(), METRICS_FILE.into(), HISTOGRAMS_FILE.into()];
        }
    }
    manifest.write(dir)?;
    outcome
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn train_into(config: &RunConfig, dir: &Path) -> Result<trainer::RunResult> {
    let (train_set, test_set) = config.dataset.generate()?;
    let space = config.space.build()?;
    let mlp = Mlp::new(config.model.clone())?;

    let metrics_path = dir.join(METRICS_FILE);
    let mut metrics = csv::Writer::from_writer(create(metrics_path.clone())?);
    metrics.write_record(METRICS_HEADER)?;
    metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
    let hist_path = dir.join(HISTOGRAMS_FILE);
    let mut histograms = create(hist_path.clone())?;

    let result = trainer::train_with(&train_set, &test_set, &space, &mlp, &config.trainer, |m| {
        metrics.write_record(metrics_row(m))?;
        metrics.flush().map_err(|e| Error::io(&metrics_path, e))?;
        let line = json!({ "epoch": m.epoch, "counts": m.transform_histogram });
        writeln!(histograms, "{line}").map_err(|e| Error::io(&hist_path, e))?;
        histograms.flush().map_err(|e| Error::io(&hist_path, e))
    })?;

    let ckpt = dir.join(CHECKPOINT_FILE);
    fs::write(&ckpt, model::write_checkpoint(mlp.config(), &result.theta)).map_err(|e| Error::io(ckpt, e))?;
    Ok(result)
}

/// Runs every grid point; failed points are recorded in `sweep.csv` and do
/// not stop the sweep. Returns the path of the summary.
pub fn cmd_sweep(config: &RunConfig, parallel: bool) -> Result<PathBuf> {
    let points = config.expand_sweep()?;
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let run_point = |(_, child): &(Vec<Value>, RunConfig)| cmd_train(child).map(|r| r.last().clone());
    let outcomes: Vec<Result<EpochMetrics>> = if parallel {
        points.par_iter().map(run_point).collect()
    } else {
        points.iter().map(run_point).collect()
    };

    let path = config.output_dir.join(SWEEP_FILE);
    let mut w = csv::Writer::from_writer(create(path.clone())?);
    let mut header = vec!["point".to_string()];
    header.extend(config.sweep.iter().map(|a| a.field.clone()));
    header.extend(
        [
            "status",
            "epsilon",
            "epoch",
            "train_loss",
            "final_slack",
            "final_gamma",
            "entropy",
            "test_loss",
            "test_acc",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for (i, ((values, child), outcome)) in points.iter().zip(&outcomes).enumerate() {
        let mut row = vec![point_dir(i)];
        row.extend(values.iter().map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }));
        let epsilon = child.trainer.epsilon.map(fmt_real).unwrap_or_default();
        match outcome {
            Ok(last) => {
                let [epoch, train_loss, slack, gamma, entropy, test_loss, test_acc] = metrics_row(last);
                row.extend([
                    "ok".into(),
                    epsilon,
                    epoch,
                    train_loss,
                    slack,
                    gamma,
                    entropy,
                    test_loss,
                    test_acc,
                ]);
            }
            Err(e) => {
                row.push(format!("failed: {e}"));
                row.push(epsilon);
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn load_checkpoint(path: &Path) -> Result<(MlpConfig, Params)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model::read_checkpoint(&text)
}

/// Exact orbit quantities for training sample `index` under the checkpoint.
pub fn cmd_oracle(config: &RunConfig, index: usize, checkpoint: Option<&Path>) -> Result<OracleReport> {
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output_dir.join(CHECKPOINT_FILE));
    let (model_config, theta) = load_checkpoint(&path)?;
    let mlp = Mlp::new(model_config)?;
    let (train_set, _) = config.dataset.generate()?;
    let space = config.space.build()?;
    oracle::oracle_report(&mlp, &theta, &train_set, index, &space)
}

/// Finite-difference gradient check of the configured model.
pub fn cmd_gradcheck(config: &RunConfig) -> Result<GradCheckReport> {
    let mlp = Mlp::new(config.model.clone())?;
    model::gradient_check(
        &mlp,
        GRADCHECK_PROBES,
        GRADCHECK_STEP,
        config.model.seed,
        |m, t, x, y| Ok(m.loss_grad(t, x, y)?.1),
    )
}

/// Passes the gradient check at the harness tolerance.
pub fn gradcheck_passes(report: &GradCheckReport) -> bool {
    report.max_relative_error < GRADCHECK_TOLERANCE
}

/// One traced MH chain on training sample `index`.
pub fn cmd_sample_trace(config: &RunConfig, index: usize, checkpoint: Option<&Path>) -> Result<Vec<TraceStep>> {
    let default_ckpt = config.output_dir.join(CHECKPOINT_FILE);
    let (mlp, theta) = match checkpoint {
        Some(p) => load_checkpoint(p)?,
        None if default_ckpt.exists() => load_checkpoint(&default_ckpt)?,
        None => {
            let mlp = Mlp::new(config.model.clone())?;
            let theta = mlp.init();
            (config.model.clone(), theta)
        }
    };
    let mlp = Mlp::new(mlp)?;
    let (train_set, _) = config.dataset.generate()?;
    let sample = train_set
        .samples
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("sample index {index} outside 0..{}", train_set.len())))?;
    let space = config.space.build()?;
    let sampler = &config.trainer.sampler;
    let mut trace = Vec::with_capacity(sampler.n_steps + 1);
    let mut r = rng::stream(config.trainer.seed, &[purpose::TRACE, index as u64]);
    let loss_at = orbit_loss_fn(&mlp, &theta, &sample.x, sample.y)?;
    run_chain(
        &space,
        sampler.n_steps,
        sampler.zero_loss_epsilon,
        loss_at,
        &mut r,
        Some(&mut trace),
    )?;
    Ok(trace)
}

pub fn write_trace_csv(trace: &[TraceStep], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "kind", "level", "loss", "accepted"])?;
    for t in trace {
        w.write_record([
            t.step.to_string(),
            t.kind.to_string(),
            t.level.to_string(),
            fmt_real(t.loss),
            u8::from(t.accepted).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))
}

/// Training split of a config, for external inspection.
pub fn training_data(config: &RunConfig) -> Result<Dataset> {
    Ok(config.dataset.generate()?.0)
}

/// Whether a mode draws transformations, for callers formatting summaries.
pub fn mode_samples(mode: Mode) -> bool {
    mode.samples_transforms()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        output_dir = "unused"
        [dataset]
        kind = "rings"
        n_train = 40
        n_test = 20
        noise_sigma = 0.1
        [space]
        kinds = ["rotate"]
        levels_per_op = 8
        [model]
        layer_sizes = [2, 8, 2]
        [trainer]
        mode = "erm"
        eta_p = 0.1
        batch_size = 8
        epochs = 3
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.version, 1);
        assert_eq!(c.trainer.eta_d, 1e-3);
        assert_eq!(c.trainer.sampler.n_steps, 2);
        assert_eq!(c.space.build().unwrap().len(), 8);
    }

    #[test]
    fn invalid_fields_are_named() {
        let field = |text: &str| match RunConfig::from_toml_str(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(
            field(&MINIMAL.replace("mode = \"erm\"", "mode = \"erm\"\nepsilon = -1.0")),
            "trainer.epsilon"
        );
        assert_eq!(
            field(&MINIMAL.replace("batch_size = 8", "batch_size = \"8\"")),
            "trainer.batch_size"
        );
        assert_eq!(field(&MINIMAL.replace("[2, 8, 2]", "[2, 8, 3]")), "model.layer_sizes");
        assert_eq!(
            field(&MINIMAL.replace("kinds = [\"rotate\"]", "kinds = [\"shear\"]")),
            "space.kinds[0]"
        );
        assert!(field(&MINIMAL.replace("epochs = 3", "epochs = 3\nlearning_rate = 1")).starts_with("trainer"));
        assert_eq!(field(&format!("version = 2\n{MINIMAL}")), "version");
    }

    #[test]
    fn seed_override_reaches_every_section() {
        let c = RunConfig::from_toml_str(&format!("seed = 7\n{MINIMAL}")).unwrap();
        assert_eq!((c.dataset.seed, c.model.seed, c.trainer.seed), (7, 7, 7));
    }

    #[test]
    fn sweep_expands_cross_product() {
        let text = format!(
            "{MINIMAL}\n[[sweep]]\nfield = \"trainer.eta_p\"\nvalues = [0.1, 0.2]\n[[sweep]]\nfield = \"seed\"\nvalues = [1, 2, 3]\n"
        );
        let c = RunConfig::from_toml_str(&text).unwrap();
        let points = c.expand_sweep().unwrap();
        assert_eq!(points.len(), 6);
        assert_eq!(points[4].1.trainer.eta_p, 0.2);
        let p = &points[4].1;
        assert_eq!((p.dataset.seed, p.model.seed, p.trainer.seed), (2, 2, 2));
        assert_eq!(points[4].1.output_dir, PathBuf::from("unused/point-004"));
        assert!(points.iter().all(|(_, p)| p.sweep.is_empty()));
    }

    #[test]
    fn section_seed_axis_beats_the_top_level_seed() {
        let text = format!("seed = 9\n{MINIMAL}\n[[sweep]]\nfield = \"dataset.seed\"\nvalues = [1, 2]\n");
        let points = RunConfig::from_toml_str(&text).unwrap().expand_sweep().unwrap();
        let seeds: Vec<_> = points.iter().map(|(_, p)| (p.dataset.seed, p.model.seed)).collect();
        assert_eq!(seeds, [(1, 9), (2, 9)]);
    }

    #[test]
    fn sweep_rejects_bad_paths() {
        let text = format!("{MINIMAL}\n[[sweep]]\nfield = \"trainer.nope\"\nvalues = [1]\n");
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert!(c.expand_sweep().is_err());
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert!(c.expand_sweep().is_err());
    }

    #[test]
    fn reals_use_seventeen_significant_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(2.0), "2.0000000000000000e0");
        let v: f64 = fmt_real(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn range_overrides_apply() {
        let text = MINIMAL.replace(
            "levels_per_op = 8",
            "levels_per_op = 3\nranges = { rotate = [-90.0, 90.0] }",
        );
        let c = RunConfig::from_toml_str(&text).unwrap();
        let space = c.space.build().unwrap();
        assert_eq!(space.enumerate()[2].magnitude, 90.0);
        let bad = MINIMAL.replace("levels_per_op = 8", "ranges = { scale = [1.0, 2.0] }");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }
}
