//! Planted benchmarks: a 2-D clustering shape embedded at features 4 and 5
//! (1-based) of a 9-feature dataset, padded with Gaussian noise features that
//! share the pooled mean and variance of the two informative coordinates.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cluster::LabelVector;
use crate::error::{DscofsError, Result};
use crate::model::{DataMatrix, Mat};

pub const PLANTED_FEATURES: usize = 9;
/// 0-based positions of the two informative features.
pub const INFORMATIVE: [usize; 2] = [3, 4];
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_JITTER: f64 = 0.05;

/// Two-dimensional points with class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape2d {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDataset {
    /// Raw (uncentered) `9 × n` matrix.
    pub data: DataMatrix,
    pub labels: LabelVector,
    pub informative: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    #[serde(rename = "2spiral")]
    TwoSpiral,
    Banana,
    Dartboard,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [
        SyntheticKind::TwoSpiral,
        SyntheticKind::Banana,
        SyntheticKind::Dartboard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::TwoSpiral => "2spiral",
            SyntheticKind::Banana => "banana",
            SyntheticKind::Dartboard => "dartboard",
        }
    }

    pub fn classes(self) -> usize {
        match self {
            SyntheticKind::Dartboard => 4,
            _ => 2,
        }
    }

    pub fn generate_shape(self, n: usize, jitter: f64, rng: &mut impl Rng) -> Result<Shape2d> {
        match self {
            SyntheticKind::TwoSpiral => gen_2spiral(n, jitter, rng),
            SyntheticKind::Banana => gen_banana(n, jitter, rng),
            SyntheticKind::Dartboard => gen_dartboard(n, jitter, rng),
        }
    }

    /// Shape plus noise embedding.
    pub fn generate(self, n: usize, rng: &mut impl Rng) -> Result<PlantedDataset> {
        let shape = self.generate_shape(n, DEFAULT_JITTER, rng)?;
        embed_with_noise(&shape, rng)
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = DscofsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2spiral" => Ok(SyntheticKind::TwoSpiral),
            "banana" => Ok(SyntheticKind::Banana),
            "dartboard" => Ok(SyntheticKind::Dartboard),
            other => Err(DscofsError::invalid(format!(
                "unknown synthetic dataset {other:?}; expected 2spiral, banana or dartboard"
            ))),
        }
    }
}

fn jitter_dist(sd: f64) -> Result<Option<Normal<f64>>> {
    if !(sd.is_finite() && sd >= 0.0) {
        return Err(DscofsError::invalid(format!("jitter sd {sd}")));
    }
    Ok(if sd > 0.0 {
        Some(Normal::new(0.0, sd).expect("valid sd"))
    } else {
        None
    })
}

fn jittered(p: [f64; 2], dist: &Option<Normal<f64>>, rng: &mut impl Rng) -> [f64; 2] {
    match dist {
        Some(d) => [p[0] + d.sample(rng), p[1] + d.sample(rng)],
        None => p,
    }
}

fn split_even(n: usize, classes: usize) -> Result<usize> {
    if n == 0 || !n.is_multiple_of(classes) {
        return Err(DscofsError::invalid(format!(
            "sample count {n} must be a positive multiple of {classes}"
        )));
    }
    Ok(n / classes)
}

/// Point on spiral `class` at angle `t`: radius `t / 3π`, the second arm rotated by π.
pub fn spiral_point(t: f64, class: usize) -> [f64; 2] {
    let r = t / (3.0 * PI);
    let sign = if class == 0 { 1.0 } else { -1.0 };
    [sign * r * t.cos(), sign * r * t.sin()]
}

/// Two interleaved Archimedean spirals over `t ∈ [0, 3π]`.
pub fn gen_2spiral(n: usize, jitter: f64, rng: &mut impl Rng) -> Result<Shape2d> {
    let per = split_even(n, 2)?;
    let dist = jitter_dist(jitter)?;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..2 {
        for _ in 0..per {
            let t = rng.random_range(0.0..=3.0 * PI);
            points.push(jittered(spiral_point(t, class), &dist, rng));
            labels.push(class);
        }
    }
    Ok(Shape2d { points, labels })
}

/// Point on crescent `class` at angle `θ ∈ [0, π]`.
pub fn banana_point(theta: f64, class: usize) -> [f64; 2] {
    if class == 0 {
        [theta.cos(), theta.sin()]
    } else {
        [1.0 - theta.cos(), 0.5 - theta.sin()]
    }
}

/// Two interlocking crescents.
pub fn gen_banana(n: usize, jitter: f64, rng: &mut impl Rng) -> Result<Shape2d> {
    let per = split_even(n, 2)?;
    let dist = jitter_dist(jitter)?;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..2 {
        for _ in 0..per {
            let theta = rng.random_range(0.0..=PI);
            points.push(jittered(banana_point(theta, class), &dist, rng));
            labels.push(class);
        }
    }
    Ok(Shape2d { points, labels })
}

/// Radius of dartboard ring `class`.
pub fn ring_radius(class: usize) -> f64 {
    (class + 1) as f64
}

/// Four concentric rings; jitter perturbs the radius only.
pub fn gen_dartboard(n: usize, jitter: f64, rng: &mut impl Rng) -> Result<Shape2d> {
    let per = split_even(n, 4)?;
    let dist = jitter_dist(jitter)?;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for class in 0..4 {
        for _ in 0..per {
            let angle = rng.random_range(0.0..2.0 * PI);
            let r = ring_radius(class) + dist.as_ref().map_or(0.0, |d| d.sample(rng));
            points.push([r * angle.cos(), r * angle.sin()]);
            labels.push(class);
        }
    }
    Ok(Shape2d { points, labels })
}

/// Builds the 9-feature dataset with the shape at [`INFORMATIVE`].
pub fn embed_with_noise(shape: &Shape2d, rng: &mut impl Rng) -> Result<PlantedDataset> {
    let n = shape.points.len();
    if n < 2 || shape.labels.len() != n {
        return Err(DscofsError::invalid("shape needs at least two labeled points"));
    }
    let nf = n as f64;
    let mut means = [0.0; 2];
    let mut vars = [0.0; 2];
    for c in 0..2 {
        means[c] = shape.points.iter().map(|p| p[c]).sum::<f64>() / nf;
        vars[c] = shape
            .points
            .iter()
            .map(|p| (p[c] - means[c]).powi(2))
            .sum::<f64>()
            / nf;
    }
    let mean = 0.5 * (means[0] + means[1]);
    let var = 0.5 * (vars[0] + vars[1]);
    let noise = Normal::new(mean, var.sqrt())
        .map_err(|e| DscofsError::invalid(format!("noise distribution: {e}")))?;

    let mut values = Mat::zeros(PLANTED_FEATURES, n);
    let mut noise_rows = (0..PLANTED_FEATURES).filter(|i| !INFORMATIVE.contains(i));
    for i in noise_rows.by_ref() {
        for j in 0..n {
            values[(i, j)] = noise.sample(rng);
        }
    }
    for (c, &row) in INFORMATIVE.iter().enumerate() {
        for (j, p) in shape.points.iter().enumerate() {
            values[(row, j)] = p[c];
        }
    }
    Ok(PlantedDataset {
        data: DataMatrix::new(values)?,
        labels: LabelVector::encode(&shape.labels),
        informative: INFORMATIVE,
    })
}
