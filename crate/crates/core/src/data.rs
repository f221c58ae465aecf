//! Seeded synthetic 2-D classification tasks with controllable invariance.
//!
//! `rings` labels a point by the radial band it falls in, so its labels are
//! exactly rotation invariant. `wedges` labels by angular sector: scale
//! invariant but not rotation invariant.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub d: usize,
    pub k: usize,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Rings,
    Wedges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: TaskKind,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_classes() -> usize {
    2
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 {
            return Err(Error::config("dataset.n_train", "must be >= 1"));
        }
        if self.n_test == 0 {
            return Err(Error::config("dataset.n_test", "must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("dataset.noise_sigma", "must be finite and >= 0"));
        }
        if self.classes < 2 {
            return Err(Error::config("dataset.classes", "must be >= 2"));
        }
        Ok(())
    }

    /// Generates the full dataset and cuts it into (train, test); the first
    /// `n_train` samples form the training part.
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let full = match self.kind {
            TaskKind::Rings => make_rings(self)?,
            TaskKind::Wedges => make_wedges(self)?,
        };
        let mut samples = full.samples;
        let test = samples.split_off(self.n_train);
        let train = Dataset::new(format!("{}-train", full.name), 2, self.classes, samples)?;
        train.require_all_classes()?;
        let test = Dataset::new(format!("{}-test", full.name), 2, self.classes, test)?;
        Ok((train, test))
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>, d: usize, k: usize, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("dataset must be non-empty".into()));
        }
        if d == 0 {
            return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
        }
        for s in &samples {
            if s.x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.x.len(),
                });
            }
            if s.y >= k {
                return Err(Error::InvalidArgument(format!("label {} outside 0..{k}", s.y)));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature value".into()));
            }
        }
        Ok(Dataset {
            samples,
            d,
            k,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for s in &self.samples {
            counts[s.y] += 1;
        }
        counts
    }

    fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(class) => Err(Error::EmptyClass { class }),
            None => Ok(()),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.d).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
            row.push(s.y.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads the `x0,...,y` layout written by [`Dataset::write_csv`].
    pub fn read_csv<R: Read>(name: impl Into<String>, k: usize, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        if header.get(d) != Some("y") {
            return Err(Error::InvalidArgument("last CSV column must be `y`".into()));
        }
        let mut samples = Vec::new();
        for record in r.records() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad number `{}`", &record[i])))
            };
            let x = (0..d).map(parse).collect::<Result<Vec<_>>>()?;
            let y = record[d]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad label `{}`", &record[d])))?;
            samples.push(Sample { x, y });
        }
        Dataset::new(name, d, k, samples)
    }
}

/// Radial band label: nearest ring among radii 1, 2, ..., k.
pub fn ring_label(x: &[f64], k: usize) -> usize {
    let r = x[0].hypot(x[1]);
    ((r - 0.5).floor().max(0.0) as usize).min(k - 1)
}

/// Angular sector label with `k` equal sectors starting at angle 0.
pub fn wedge_label(x: &[f64], k: usize) -> usize {
    let angle = x[1].atan2(x[0]).rem_euclid(TAU);
    ((angle / (TAU / k as f64)).floor() as usize).min(k - 1)
}

fn check_kind(spec: &SyntheticSpec, want: TaskKind) -> Result<()> {
    if spec.kind != want {
        return Err(Error::InvalidArgument(format!(
            "expected a {want:?} spec, got {:?}",
            spec.kind
        )));
    }
    spec.validate()
}

fn add_noise(spec: &SyntheticSpec, rng: &mut rng::StreamRng, x: &mut [f64; 2]) {
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        for v in x.iter_mut() {
            *v += normal.sample(rng);
        }
    }
}

/// Points on `classes` concentric bands around radii 1..=classes; each label
/// is drawn uniformly, then a radius inside its band and a uniform angle.
/// Noise is added after labeling.
pub fn make_rings(spec: &SyntheticSpec) -> Result<Dataset> {
    check_kind(spec, TaskKind::Rings)?;
    let k = spec.classes;
    let mut rng = rng::stream(spec.seed, &[purpose::DATA, 0]);
    let samples = (0..spec.n_train + spec.n_test)
        .map(|_| {
            let y = rng::index(&mut rng, k);
            let r = y as f64 + 0.5 + rng::unit(&mut rng);
            let (s, c) = (TAU * rng::unit(&mut rng)).sin_cos();
            let mut x = [r * c, r * s];
            add_noise(spec, &mut rng, &mut x);
            Sample { x: x.to_vec(), y }
        })
        .collect();
    Dataset::new("rings", 2, k, samples)
}

/// Points in `classes` equal angular sectors with radius uniform in [0.5, 2.5).
pub fn make_wedges(spec: &SyntheticSpec) -> Result<Dataset> {
    check_kind(spec, TaskKind::Wedges)?;
    let k = spec.classes;
    let width = TAU / k as f64;
    let mut rng = rng::stream(spec.seed, &[purpose::DATA, 1]);
    let samples = (0..spec.n_train + spec.n_test)
        .map(|_| {
            let y = rng::index(&mut rng, k);
            let angle = width * (y as f64 + rng::unit(&mut rng));
            let r = 0.5 + 2.0 * rng::unit(&mut rng);
            let (s, c) = angle.sin_cos();
            let mut x = [r * c, r * s];
            add_noise(spec, &mut rng, &mut x);
            Sample { x: x.to_vec(), y }
        })
        .collect();
    Dataset::new("wedges", 2, k, samples)
}

/// Seeded shuffle, then a two-way cut with sizes `round(n * fractions[0])`
/// and the remainder.
pub fn split(ds: &Dataset, fractions: (f64, f64), seed: u64) -> Result<(Dataset, Dataset)> {
    let (a, b) = fractions;
    if !(a > 0.0 && b > 0.0) || ((a + b) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be positive and sum to 1, got ({a}, {b})"
        )));
    }
    let n = ds.len();
    let n_first = ((n as f64) * a).round() as usize;
    if n_first == 0 || n_first == n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} samples by ({a}, {b}) leaves a part empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[purpose::SPLIT]));
    let pick = |idx: &[usize]| idx.iter().map(|&i| ds.samples[i].clone()).collect::<Vec<_>>();
    let first = Dataset::new(format!("{}-a", ds.name), ds.d, ds.k, pick(&order[..n_first]))?;
    let second = Dataset::new(format!("{}-b", ds.name), ds.d, ds.k, pick(&order[n_first..]))?;
    let train = if first.len() >= second.len() { &first } else { &second };
    if let Some(class) = (0..ds.k).find(|&c| ds.class_counts()[c] > 0 && train.class_counts()[c] == 0) {
        return Err(Error::EmptyClass { class });
    }
    Ok((first, second))
}
