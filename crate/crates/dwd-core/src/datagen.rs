//! Seeded synthetic data generators.
//!
//! Every generator is a pure function of its parameters and seed, drawing
//! from a named, versioned pseudo-random generator (ChaCha20 with
//! `seed_from_u64`, Gaussian variates via `rand_distr::StandardNormal`).
//! Emitted dataset files record the scenario, seed, and generator version
//! in their comment header so figures can be replayed.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{DwdError, Result};

/// Identifier of the pseudo-random pipeline; bump when the draw order or
/// the underlying generator changes.
pub const GENERATOR_VERSION: &str = "chacha20-v1";

/// The built-in simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Two-class planar Gaussian-mixture model with 10 random centers per
    /// class; comes with its own Bayes oracle.
    MixtureFig1,
    /// 100 points in 200 dimensions, class means at +-(3, 0, ..., 0).
    DataPilingFig2,
    Example1,
    Example2,
    Example3,
    Example4,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::MixtureFig1 => "fig1",
            Scenario::DataPilingFig2 => "fig2",
            Scenario::Example1 => "ex1",
            Scenario::Example2 => "ex2",
            Scenario::Example3 => "ex3",
            Scenario::Example4 => "ex4",
        }
    }
}

impl FromStr for Scenario {
    type Err = DwdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" | "mixture" => Ok(Scenario::MixtureFig1),
            "fig2" | "datapiling" => Ok(Scenario::DataPilingFig2),
            "ex1" => Ok(Scenario::Example1),
            "ex2" => Ok(Scenario::Example2),
            "ex3" => Ok(Scenario::Example3),
            "ex4" => Ok(Scenario::Example4),
            other => Err(DwdError::InvalidParameter(format!(
                "unknown scenario '{other}' (expected fig1, fig2, ex1, ex2, ex3, or ex4)"
            ))),
        }
    }
}

/// The exact Bayes rule of one realized mixture: compares the pooled
/// Gaussian densities `sum_k exp(-5 ||z - mu_k|| ^2 / 2)` of the two center
/// sets. Ties go to +1.
#[derive(Debug, Clone)]
pub struct BayesOracle {
    centers_pos: Vec<[f64; 2]>,
    centers_neg: Vec<[f64; 2]>,
}

impl BayesOracle {
    pub fn centers_pos(&self) -> &[[f64; 2]] {
        &self.centers_pos
    }

    pub fn centers_neg(&self) -> &[[f64; 2]] {
        &self.centers_neg
    }

    pub fn classify(&self, z: &[f64; 2]) -> f64 {
        let score = |centers: &[[f64; 2]]| -> f64 {
            centers
                .iter()
                .map(|c| {
                    let d2 = (z[0] - c[0]).powi(2) + (z[1] - c[1]).powi(2);
                    (-5.0 * d2 / 2.0).exp()
                })
                .sum()
        };
        if score(&self.centers_pos) >= score(&self.centers_neg) {
            1.0
        } else {
            -1.0
        }
    }

    /// Draws `n` fresh labeled points from the mixture (class prior 1/2,
    /// uniform center choice, then N(center, I/5)).
    pub fn sample(&self, n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let sd = (1.0f64 / 5.0).sqrt();
        let mut x = DMatrix::zeros(n, 2);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let centers = if label > 0.0 {
                &self.centers_pos
            } else {
                &self.centers_neg
            };
            let c = centers[rng.random_range(0..centers.len())];
            let g0: f64 = rng.sample(StandardNormal);
            let g1: f64 = rng.sample(StandardNormal);
            x[(i, 0)] = c[0] + sd * g0;
            x[(i, 1)] = c[1] + sd * g1;
            y.push(label);
        }
        (x, y)
    }
}

/// Planar mixture: 10 positive-class centers from N((1,0), I), 10
/// negative-class centers from N((0,1), I); each point picks a random
/// center of its class and adds N(0, I/5) noise. `n` must be even; the
/// classes are exactly balanced.
pub fn gen_mixture(n: usize, seed: u64) -> Result<(Dataset, BayesOracle)> {
    if n < 2 || n % 2 != 0 {
        return Err(DwdError::InvalidParameter(format!(
            "mixture needs an even n >= 2, got {n}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw_center = |mean: [f64; 2]| -> [f64; 2] {
        let g0: f64 = rng.sample(StandardNormal);
        let g1: f64 = rng.sample(StandardNormal);
        [mean[0] + g0, mean[1] + g1]
    };
    let centers_pos: Vec<[f64; 2]> = (0..10).map(|_| draw_center([1.0, 0.0])).collect();
    let centers_neg: Vec<[f64; 2]> = (0..10).map(|_| draw_center([0.0, 1.0])).collect();

    let half = n / 2;
    let sd = (1.0f64 / 5.0).sqrt();
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for (block, (centers, label)) in [(&centers_pos, 1.0), (&centers_neg, -1.0)]
        .into_iter()
        .enumerate()
    {
        for i in 0..half {
            let row = block * half + i;
            let c = centers[rng.random_range(0..10)];
            let g0: f64 = rng.sample(StandardNormal);
            let g1: f64 = rng.sample(StandardNormal);
            x[(row, 0)] = c[0] + sd * g0;
            x[(row, 1)] = c[1] + sd * g1;
            y[row] = label;
        }
    }
    Ok((
        Dataset::new(x, y)?,
        BayesOracle {
            centers_pos,
            centers_neg,
        },
    ))
}

/// The fixed 100 x 200 two-Gaussian design: rows 1..50 from N(-mu, I) with
/// label -1, rows 51..100 from N(+mu, I) with label +1, mu = (3, 0, ..., 0).
pub fn gen_datapiling(seed: u64) -> Result<Dataset> {
    let (n, p) = (100, 200);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let label = if i < 50 { -1.0 } else { 1.0 };
        y[i] = label;
        for j in 0..p {
            let mean = if j == 0 { 3.0 * label } else { 0.0 };
            let g: f64 = rng.sample(StandardNormal);
            x[(i, j)] = mean + g;
        }
    }
    Dataset::new(x, y)
}

/// How the per-point outlier coordinate of example 3 is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutlierCoordinate {
    /// Re-draw the replaced coordinate independently for every point.
    #[default]
    PerPoint,
    /// Draw one coordinate for the whole dataset.
    Shared,
}

/// The four benchmark designs, all balanced with `n/2` points per class.
///
/// 1. Gaussian with class means (+-2.2, 0, ..., 0), identity covariance.
/// 2. 80% as example 1, 20% from Gaussians with means (+-100, +-500, 0, ...).
/// 3. 80% as example 1; the rest have mean first coordinate +-0.1 and one
///    randomly chosen later coordinate's mean set to +-100.
/// 4. `p` must be 50: the -1 class is standard Gaussian and the +1 class is
///    11.09 times standard Gaussian on the first 25 coordinates; the last
///    25 coordinates are exactly the squares of the first 25.
pub fn gen_example(k: u8, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    gen_example_with(k, n, p, seed, OutlierCoordinate::default())
}

pub fn gen_example_with(
    k: u8,
    n: usize,
    p: usize,
    seed: u64,
    outlier_mode: OutlierCoordinate,
) -> Result<Dataset> {
    if !(1..=4).contains(&k) {
        return Err(DwdError::InvalidParameter(format!(
            "example index must be 1..4, got {k}"
        )));
    }
    if n < 2 || n % 2 != 0 {
        return Err(DwdError::InvalidParameter(format!(
            "examples need an even n >= 2, got {n}"
        )));
    }
    match k {
        2 | 3 if p < 2 => {
            return Err(DwdError::InvalidParameter(format!(
                "example {k} needs p >= 2, got {p}"
            )));
        }
        4 if p != 50 => {
            return Err(DwdError::InvalidParameter(format!(
                "example 4 has a fixed 25+25 structure; p must be 50, got {p}"
            )));
        }
        _ => {}
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let half = n / 2;
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let shared_coord = match (k, outlier_mode) {
        (3, OutlierCoordinate::Shared) => Some(rng.random_range(1..p)),
        _ => None,
    };

    for (block, label) in [(0usize, 1.0f64), (1, -1.0)] {
        // 20% of each class comes from the contaminating component in
        // examples 2 and 3.
        let outliers = match k {
            2 | 3 => ((half as f64) * 0.2).round() as usize,
            _ => 0,
        };
        for i in 0..half {
            let row = block * half + i;
            y[row] = label;
            let is_outlier = i >= half - outliers;
            match k {
                1 => {
                    for j in 0..p {
                        let mean = if j == 0 { 2.2 * label } else { 0.0 };
                        let g: f64 = rng.sample(StandardNormal);
                        x[(row, j)] = mean + g;
                    }
                }
                2 => {
                    for j in 0..p {
                        let mean = if is_outlier {
                            match j {
                                0 => 100.0 * label,
                                1 => 500.0 * label,
                                _ => 0.0,
                            }
                        } else if j == 0 {
                            2.2 * label
                        } else {
                            0.0
                        };
                        let g: f64 = rng.sample(StandardNormal);
                        x[(row, j)] = mean + g;
                    }
                }
                3 => {
                    let spike = if is_outlier {
                        Some(match outlier_mode {
                            OutlierCoordinate::PerPoint => rng.random_range(1..p),
                            OutlierCoordinate::Shared => shared_coord.unwrap(),
                        })
                    } else {
                        None
                    };
                    for j in 0..p {
                        let mean = match spike {
                            Some(s) if j == s => 100.0 * label,
                            Some(_) if j == 0 => 0.1 * label,
                            Some(_) => 0.0,
                            None if j == 0 => 2.2 * label,
                            None => 0.0,
                        };
                        let g: f64 = rng.sample(StandardNormal);
                        x[(row, j)] = mean + g;
                    }
                }
                4 => {
                    for j in 0..25 {
                        let g: f64 = rng.sample(StandardNormal);
                        x[(row, j)] = if label > 0.0 { 11.09 * g } else { g };
                    }
                    for j in 0..25 {
                        x[(row, 25 + j)] = x[(row, j)] * x[(row, j)];
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    Dataset::new(x, y)
}
