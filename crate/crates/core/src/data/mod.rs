//! Synthetic data generation and plain-text dataset I/O.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::util::g17;

/// A feature matrix with one label per row. Labels use `{-1, +1}`; model
/// constructors coerce to their own convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn num_examples(&self) -> usize {
        self.features.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// Doubly heavy-tailed ternary features: entry `(j, i)` (1-based) is
/// nonzero with probability `density_scale * i^-gamma * j^-gamma`, with a
/// symmetric random sign. Early examples and early features are dense;
/// the tail is almost entirely zero. This is the regime where learned
/// importance sampling provably beats uniform sampling.
#[derive(Debug, Clone)]
pub struct HeavyTailConfig {
    pub num_examples: usize,
    pub num_features: usize,
    /// Tail exponent `gamma >= 1`; the scaling claims assume `gamma >= 2`.
    pub tail_exponent: f64,
    /// Scale `beta3` in `(0, 1]`, so every entry probability is <= 1.
    pub density_scale: f64,
    pub seed: u64,
}

impl HeavyTailConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_examples == 0 || self.num_features == 0 {
            return Err(Error::InvalidConfig(
                "need at least one example and one feature".into(),
            ));
        }
        if !(self.tail_exponent >= 1.0) || !self.tail_exponent.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tail_exponent must be >= 1, got {}",
                self.tail_exponent
            )));
        }
        if !(self.density_scale > 0.0 && self.density_scale <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "density_scale must be in (0, 1], got {}",
                self.density_scale
            )));
        }
        Ok(())
    }

    /// Probability that entry `(example, feature)` (0-based) is nonzero.
    pub fn nonzero_probability(&self, example: usize, feature: usize) -> f64 {
        let j = (example + 1) as f64;
        let i = (feature + 1) as f64;
        self.density_scale * i.powf(-self.tail_exponent) * j.powf(-self.tail_exponent)
    }

    /// Analytic `E |z_j|^2 = density_scale * j^-gamma * sum_i i^-gamma`.
    pub fn expected_sq_norm(&self, example: usize) -> f64 {
        (0..self.num_features)
            .map(|i| self.nonzero_probability(example, i))
            .sum()
    }
}

/// Generates the heavy-tailed dataset. Labels come from a hidden linear
/// teacher with i.i.d. standard-normal entries drawn from the same seed:
/// `y_j = sign(z_j . theta*)`, ties broken to `+1`.
///
/// The same seed always yields a bit-identical dataset.
pub fn generate_heavy_tailed(config: &HeavyTailConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let teacher: Vec<f64> = (0..config.num_features)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();

    let mut features = Vec::with_capacity(config.num_examples);
    let mut labels = Vec::with_capacity(config.num_examples);
    for j in 0..config.num_examples {
        let mut row = vec![0.0; config.num_features];
        let mut margin = 0.0;
        for (i, cell) in row.iter_mut().enumerate() {
            let p = config.nonzero_probability(j, i);
            // One uniform decides both the Bernoulli and the sign.
            let u = rng.random::<f64>();
            if u < 0.5 * p {
                *cell = 1.0;
            } else if u < p {
                *cell = -1.0;
            }
            margin += *cell * teacher[i];
        }
        features.push(row);
        labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
    }
    Ok(Dataset { features, labels })
}

/// Loads a dataset from `label,f1,...,fd` rows (no header).
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_text = fields.next().expect("split yields at least one field");
        let label: f64 = label_text.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad label '{label_text}'"),
        })?;
        let row: Vec<f64> = fields
            .map(|f| {
                f.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad feature value '{f}'"),
                })
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("ragged row: expected {d} features, got {}", row.len()),
                });
            }
            _ => {}
        }
        labels.push(label);
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no rows".into(),
        });
    }
    Ok(Dataset { features, labels })
}

/// Writes a dataset in the same `label,f1,...,fd` form read by
/// [`load_csv`], floats at 17 significant digits so a round trip is
/// bit-exact.
pub fn save_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    for (row, label) in dataset.features.iter().zip(&dataset.labels) {
        write!(out, "{}", g17(*label))?;
        for value in row {
            write!(out, ",{}", g17(*value))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
