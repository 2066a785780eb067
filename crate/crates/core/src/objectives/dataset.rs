use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{gaussian, ObjectiveError};
use crate::linalg::Mat;
use crate::rng::{rng_from_seed, SimRng};

/// Labelled binary classification data: `m × d` features, labels in `{−1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Mat,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Mat, labels: Vec<f64>) -> Result<Self, ObjectiveError> {
        if features.rows() != labels.len() {
            return Err(ObjectiveError::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(ObjectiveError::InvalidDataset(format!("label {bad} is not -1 or +1")));
        }
        if !features.is_finite() {
            return Err(ObjectiveError::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn samples(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features.rows_iter().zip(self.labels.iter().copied())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features: Mat::from_vec(indices.len(), d, data),
            labels,
        }
    }

    /// Text format: header `m d`, then `m` lines of `d` features and a label.
    pub fn parse(text: &str) -> Result<Self, ObjectiveError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(ObjectiveError::Parse {
            line: 1,
            msg: "missing `m d` header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| ObjectiveError::Parse {
                line,
                msg: format!("bad header {header:?}"),
            })?;
        let [m, d] = dims[..] else {
            return Err(ObjectiveError::Parse {
                line,
                msg: format!("header must be `m d`, found {header:?}"),
            });
        };
        let mut data = Vec::with_capacity(m * d);
        let mut labels = Vec::with_capacity(m);
        let mut last = line;
        for (line, l) in lines {
            last = line;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| ObjectiveError::Parse {
                    line,
                    msg: "non-numeric value".into(),
                })?;
            if vals.len() != d + 1 {
                return Err(ObjectiveError::Parse {
                    line,
                    msg: format!("expected {} values, found {}", d + 1, vals.len()),
                });
            }
            data.extend_from_slice(&vals[..d]);
            labels.push(vals[d]);
        }
        if labels.len() != m {
            return Err(ObjectiveError::Parse {
                line: last,
                msg: format!("header declares {m} samples but {} were found", labels.len()),
            });
        }
        Dataset::new(Mat::from_vec(m, d, data), labels)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.len(), self.dim());
        for (x, y) in self.samples() {
            for v in x {
                s.push_str(&format!("{v} "));
            }
            s.push_str(if y > 0.0 { "1\n" } else { "-1\n" });
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ObjectiveError> {
        Dataset::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ObjectiveError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Two unit-variance Gaussian clouds centred at `±separation · 𝟙/√d`, labels
/// drawn with equal probability. `separation` is each centre's distance from
/// the separating hyperplane through the origin.
pub fn two_gaussians(m: usize, d: usize, separation: f64, rng: &mut SimRng) -> Dataset {
    let offset = separation / (d as f64).sqrt();
    let mut data = Vec::with_capacity(m * d);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for _ in 0..d {
            data.push(y * offset + gaussian(0.0, 1.0, rng));
        }
        labels.push(y);
    }
    Dataset {
        features: Mat::from_vec(m, d, data),
        labels,
    }
}

/// Shuffles with `seed` and splits into `n` disjoint shards whose sizes differ
/// by at most one.
pub fn partition(data: &Dataset, n: usize, seed: u64) -> Result<Vec<Dataset>, ObjectiveError> {
    let m = data.len();
    if n == 0 || m < n {
        return Err(ObjectiveError::TooFewSamples { m, n });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let base = m / n;
    let extra = m % n;
    let mut shards = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        shards.push(data.subset(&order[start..start + size]));
        start += size;
    }
    Ok(shards)
}
