//! The finite transformation set: operation kinds crossed with discrete
//! magnitude levels, acting on 2-D feature vectors.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default number of magnitude levels per parametrized operation.
pub const DEFAULT_LEVELS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Identity,
    Rotate,
    Scale,
    ReflectX,
    ReflectY,
    TranslateX,
    TranslateY,
}

impl Op {
    pub const ALL: [Op; 7] = [
        Op::Identity,
        Op::Rotate,
        Op::Scale,
        Op::ReflectX,
        Op::ReflectY,
        Op::TranslateX,
        Op::TranslateY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Identity => "identity",
            Op::Rotate => "rotate",
            Op::Scale => "scale",
            Op::ReflectX => "reflect_x",
            Op::ReflectY => "reflect_y",
            Op::TranslateX => "translate_x",
            Op::TranslateY => "translate_y",
        }
    }

    /// Default magnitude range; `None` for parameter-free operations.
    /// Rotation is in degrees.
    pub fn default_range(self) -> Option<(f64, f64)> {
        match self {
            Op::Identity | Op::ReflectX | Op::ReflectY => None,
            Op::Rotate => Some((-135.0, 135.0)),
            Op::Scale => Some((0.5, 2.0)),
            Op::TranslateX | Op::TranslateY => Some((-1.0, 1.0)),
        }
    }

    pub fn has_magnitude(self) -> bool {
        self.default_range().is_some()
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Op {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Op::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown transform kind `{s}`")))
    }
}

/// An operation together with its magnitude range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformKind {
    op: Op,
    range: Option<(f64, f64)>,
}

impl TransformKind {
    pub fn new(op: Op) -> Self {
        TransformKind {
            op,
            range: op.default_range(),
        }
    }

    pub fn with_range(op: Op, lo: f64, hi: f64) -> Result<Self> {
        if !op.has_magnitude() {
            return Err(Error::InvalidArgument(format!("{op} takes no magnitude")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "magnitude range for {op} must satisfy lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(TransformKind {
            op,
            range: Some((lo, hi)),
        })
    }

    pub fn op(&self) -> Op {
        self.op
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    pub fn has_magnitude(&self) -> bool {
        self.range.is_some()
    }
}

/// One element of the transformation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    /// Position in the canonical enumeration of the owning space.
    pub index: usize,
    pub op: Op,
    pub level: usize,
    /// Resolved magnitude for `level`; 0 for parameter-free operations.
    pub magnitude: f64,
}

impl Transform {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x: &[f64; 2] = x.try_into().map_err(|_| Error::DimensionMismatch {
            expected: 2,
            got: x.len(),
        })?;
        Ok(self.apply2(x).to_vec())
    }

    pub fn apply2(&self, x: &[f64; 2]) -> [f64; 2] {
        let [a, b] = *x;
        match self.op {
            Op::Identity => [a, b],
            Op::Rotate => {
                let (s, c) = self.magnitude.to_radians().sin_cos();
                [c * a - s * b, s * a + c * b]
            }
            Op::Scale => [self.magnitude * a, self.magnitude * b],
            Op::ReflectX => [-a, b],
            Op::ReflectY => [a, -b],
            Op::TranslateX => [a + self.magnitude, b],
            Op::TranslateY => [a, b + self.magnitude],
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.op.has_magnitude() {
            write!(f, "{}@{}", self.op, self.level)
        } else {
            write!(f, "{}", self.op)
        }
    }
}

/// The finite transformation set with its canonical enumeration.
#[derive(Debug, Clone)]
pub struct TransformSpace {
    kinds: Vec<TransformKind>,
    levels_per_op: usize,
    elements: Vec<Transform>,
}

impl TransformSpace {
    /// Builds the space. With `include_identity`, an Identity kind is
    /// prepended when not already listed.
    pub fn new(mut kinds: Vec<TransformKind>, levels_per_op: usize, include_identity: bool) -> Result<Self> {
        if include_identity && !kinds.iter().any(|k| k.op == Op::Identity) {
            kinds.insert(0, TransformKind::new(Op::Identity));
        }
        if kinds.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (i, k) in kinds.iter().enumerate() {
            if kinds[..i].iter().any(|p| p.op == k.op) {
                return Err(Error::InvalidArgument(format!("duplicate transform kind {}", k.op)));
            }
        }
        if levels_per_op == 0 && kinds.iter().any(|k| k.has_magnitude()) {
            return Err(Error::InvalidArgument("levels_per_op must be >= 1".into()));
        }

        let mut elements = Vec::new();
        for kind in &kinds {
            match kind.range {
                None => elements.push(Transform {
                    index: elements.len(),
                    op: kind.op,
                    level: 0,
                    magnitude: 0.0,
                }),
                Some((lo, hi)) => {
                    for level in 0..levels_per_op {
                        let magnitude = if levels_per_op == 1 {
                            lo
                        } else {
                            lo + (hi - lo) * level as f64 / (levels_per_op - 1) as f64
                        };
                        elements.push(Transform {
                            index: elements.len(),
                            op: kind.op,
                            level,
                            magnitude,
                        });
                    }
                }
            }
        }
        Ok(TransformSpace {
            kinds,
            levels_per_op,
            elements,
        })
    }

    /// Convenience constructor from operations with default ranges.
    pub fn from_ops(ops: &[Op], levels_per_op: usize) -> Result<Self> {
        Self::new(
            ops.iter().copied().map(TransformKind::new).collect(),
            levels_per_op,
            false,
        )
    }

    pub fn kinds(&self) -> &[TransformKind] {
        &self.kinds
    }

    pub fn levels_per_op(&self) -> usize {
        self.levels_per_op
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains_identity(&self) -> bool {
        self.identity_index().is_some()
    }

    pub fn identity_index(&self) -> Option<usize> {
        self.elements.iter().position(|t| t.op == Op::Identity)
    }

    /// Every (kind, level) pair once: kinds in declaration order, levels ascending.
    pub fn enumerate(&self) -> &[Transform] {
        &self.elements
    }

    pub fn get(&self, index: usize) -> Option<&Transform> {
        self.elements.get(index)
    }

    pub fn uniform_sample(&self, rng: &mut impl RngCore) -> Transform {
        self.elements[rng::index(rng, self.elements.len())]
    }

    /// Counting measure of the space.
    pub fn measure(&self) -> f64 {
        self.elements.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rotations() -> TransformSpace {
        TransformSpace::from_ops(&[Op::Rotate], DEFAULT_LEVELS).unwrap()
    }

    #[test]
    fn rotate_quarter_turn() {
        let g = Transform {
            index: 0,
            op: Op::Rotate,
            level: 0,
            magnitude: 90.0,
        };
        let y = g.apply(&[1.0, 0.0]).unwrap();
        assert!(y[0].abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotate_level_reaching_ninety_degrees() {
        let space = TransformSpace::new(
            vec![TransformKind::with_range(Op::Rotate, -90.0, 90.0).unwrap()],
            3,
            false,
        )
        .unwrap();
        let g = space.enumerate()[2];
        assert_eq!(g.magnitude, 90.0);
        let y = g.apply(&[1.0, 0.0]).unwrap();
        assert!(y[0].abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_and_reflections() {
        let space = TransformSpace::from_ops(&[Op::Identity, Op::ReflectX, Op::ReflectY], 30).unwrap();
        let [id, rx, ry] = [space.enumerate()[0], space.enumerate()[1], space.enumerate()[2]];
        assert_eq!(id.apply(&[0.3, -2.0]).unwrap(), vec![0.3, -2.0]);
        assert_eq!(rx.apply(&[1.0, 2.0]).unwrap(), vec![-1.0, 2.0]);
        assert_eq!(ry.apply(&[1.0, 2.0]).unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn translations_and_scale() {
        let space = TransformSpace::from_ops(&[Op::Scale, Op::TranslateX, Op::TranslateY], 3).unwrap();
        let g = space.enumerate();
        assert_eq!(g[0].apply(&[2.0, -4.0]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(g[2].apply(&[2.0, -4.0]).unwrap(), vec![4.0, -8.0]);
        assert_eq!(g[3].apply(&[0.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(g[8].apply(&[0.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn apply_rejects_wrong_dimension() {
        let g = rotations().enumerate()[0];
        assert!(matches!(
            g.apply(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn cardinalities() {
        assert_eq!(
            TransformSpace::from_ops(&[Op::Identity, Op::ReflectX], 30)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(rotations().len(), 30);
        assert_eq!(
            TransformSpace::from_ops(&[Op::Identity, Op::Rotate, Op::Scale], 30)
                .unwrap()
                .len(),
            61
        );
    }

    #[test]
    fn measures() {
        assert_eq!(rotations().measure(), 30.0);
        assert_eq!(TransformSpace::from_ops(&[Op::Identity], 30).unwrap().measure(), 1.0);
        let s = TransformSpace::from_ops(&[Op::Identity, Op::Rotate, Op::Scale, Op::ReflectX], 30).unwrap();
        assert_eq!(s.measure(), 62.0);
    }

    #[test]
    fn level_map_is_affine_over_range() {
        let g = rotations();
        let e = g.enumerate();
        assert_eq!(e[0].magnitude, -135.0);
        assert_eq!(e[29].magnitude, 135.0);
        let step = e[1].magnitude - e[0].magnitude;
        for w in e.windows(2) {
            assert!((w[1].magnitude - w[0].magnitude - step).abs() < 1e-12);
        }
    }

    #[test]
    fn include_identity_prepends() {
        let s = TransformSpace::new(vec![TransformKind::new(Op::Rotate)], 30, true).unwrap();
        assert_eq!(s.enumerate()[0].op, Op::Identity);
        assert_eq!(s.len(), 31);
        assert!(s.contains_identity());
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(matches!(TransformSpace::new(vec![], 30, false), Err(Error::EmptySpace)));
        assert!(TransformSpace::from_ops(&[Op::Rotate, Op::Rotate], 30).is_err());
        assert!(TransformKind::with_range(Op::Rotate, 1.0, 1.0).is_err());
        assert!(TransformKind::with_range(Op::ReflectX, 0.0, 1.0).is_err());
    }

    #[test]
    fn parse_kind_names() {
        assert_eq!("rotate".parse::<Op>().unwrap(), Op::Rotate);
        assert_eq!("Reflect_X".parse::<Op>().unwrap(), Op::ReflectX);
        assert!("shear".parse::<Op>().is_err());
    }

    #[test]
    fn singleton_space_always_samples_its_element() {
        let s = TransformSpace::from_ops(&[Op::ReflectY], 30).unwrap();
        let mut r = rng::stream(3, &[]);
        for _ in 0..100 {
            assert_eq!(s.uniform_sample(&mut r).op, Op::ReflectY);
        }
    }

    #[test]
    fn uniform_sample_is_seed_deterministic() {
        let s = TransformSpace::from_ops(&[Op::Identity, Op::Rotate, Op::Scale], 30).unwrap();
        let a: Vec<_> = {
            let mut r = rng::stream(11, &[]);
            (0..20).map(|_| s.uniform_sample(&mut r).index).collect()
        };
        let b: Vec<_> = {
            let mut r = rng::stream(11, &[]);
            (0..20).map(|_| s.uniform_sample(&mut r).index).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_sample_frequencies() {
        // 3 sigma of Binomial(1e6, 1/61) frequency is ~3.8e-4; 0.002 is a loose cap.
        let s = TransformSpace::from_ops(&[Op::Identity, Op::Rotate, Op::Scale], 30).unwrap();
        let mut r = rng::stream(5, &[]);
        let n = 1_000_000;
        let mut counts = vec![0usize; s.len()];
        for _ in 0..n {
            counts[s.uniform_sample(&mut r).index] += 1;
        }
        let p = 1.0 / 61.0;
        let worst = counts
            .iter()
            .map(|&c| (c as f64 / n as f64 - p).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.002, "max deviation {worst}");
    }

    proptest! {
        #[test]
        fn identity_is_noop(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let s = TransformSpace::from_ops(&[Op::Identity], 30).unwrap();
            prop_assert_eq!(s.enumerate()[0].apply2(&[a, b]), [a, b]);
        }

        #[test]
        fn rotations_compose(a in -135.0f64..135.0, b in -135.0f64..135.0, x in -10.0f64..10.0, y in -10.0f64..10.0) {
            prop_assume!((-135.0..=135.0).contains(&(a + b)));
            let rot = |m: f64| Transform { index: 0, op: Op::Rotate, level: 0, magnitude: m };
            let two = rot(a).apply2(&rot(b).apply2(&[x, y]));
            let one = rot(a + b).apply2(&[x, y]);
            prop_assert!((two[0] - one[0]).abs() < 1e-10 && (two[1] - one[1]).abs() < 1e-10);
        }

        #[test]
        fn samples_are_members(seed in any::<u64>()) {
            let s = TransformSpace::from_ops(&[Op::Identity, Op::Rotate, Op::ReflectX], 7).unwrap();
            let mut r = rng::stream(seed, &[]);
            let g = s.uniform_sample(&mut r);
            prop_assert_eq!(s.enumerate()[g.index], g);
        }
    }

    #[test]
    fn enumeration_is_bijective() {
        let s = TransformSpace::from_ops(&Op::ALL, 9).unwrap();
        let e = s.enumerate();
        assert_eq!(e.len() as f64, s.measure());
        for (i, g) in e.iter().enumerate() {
            assert_eq!(g.index, i);
            assert!(e[..i].iter().all(|h| (h.op, h.level) != (g.op, g.level)));
        }
    }
}
