//! Experiment execution: builds the dataset and model, runs every
//! (arm, seed) cell, and writes the per-run metrics plus a summary.

use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use adambs::optim::{train, write_metrics_csv, OptimMethod, RunMetrics, SamplingStrategy};
use adambs::{
    generate_heavy_tailed, load_csv, Dataset, HeavyTailConfig, LogisticRegression, Objective,
    OneNeuronRelu, SmallMlp,
};

use crate::config::{ArmKind, DatasetSpec, ExperimentConfig, ModelSpec, ProbeSpec};

/// Environment variable that overrides the config's `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "ADAMBS_OUT_DIR";

pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| config.output_dir.clone())
}

fn build_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    match spec {
        DatasetSpec::HeavyTailed {
            examples,
            features,
            tail_exponent,
            density_scale,
            seed,
        } => Ok(generate_heavy_tailed(&HeavyTailConfig {
            num_examples: *examples,
            num_features: *features,
            tail_exponent: *tail_exponent,
            density_scale: *density_scale,
            seed: *seed,
        })?),
        DatasetSpec::Csv { path } => {
            load_csv(path).with_context(|| format!("loading {}", path.display()))
        }
    }
}

fn build_model(spec: &ModelSpec, data: Dataset) -> Result<Box<dyn Objective>> {
    Ok(match spec {
        ModelSpec::Logistic => Box::new(LogisticRegression::new(data.features, data.labels)?),
        ModelSpec::OneNeuronRelu => Box::new(OneNeuronRelu::new(data.features, data.labels)?),
        ModelSpec::Mlp { hidden, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Box::new(SmallMlp::new(data.features, data.labels, *hidden, &mut rng)?)
        }
    })
}

struct CellResult {
    arm: String,
    seed: u64,
    rows: Vec<RunMetrics>,
}

/// Runs every (arm, seed) cell and writes `<arm>_seed<seed>.csv` per cell
/// plus `summary.csv`. Identical configs and seeds reproduce identical
/// metrics; with `record_wall_time` off the files are byte-identical too.
pub fn run_experiment(config: &ExperimentConfig) -> Result<()> {
    let dataset_spec = config.dataset.as_ref().context("config has no dataset")?;
    let model_spec = config.model.as_ref().context("config has no model")?;
    let data = build_dataset(dataset_spec)?;
    let model = build_model(model_spec, data)?;

    let out_dir = output_dir(config);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let n = model.num_examples();
    let mut cells: Vec<CellResult> = Vec::new();
    for arm in &config.arms {
        let method = match arm.kind {
            ArmKind::Adam | ArmKind::Adambs => OptimMethod::Adam,
            ArmKind::Amsgrad | ArmKind::AmsgradBs => OptimMethod::AmsGrad,
        };
        for &seed in &config.seeds {
            let strategy = if arm.kind.uses_bandit() {
                SamplingStrategy::Bandit(
                    arm.bandit
                        .clone()
                        .unwrap_or_default()
                        .resolve(n, config.iterations.max(1)),
                )
            } else {
                SamplingStrategy::Uniform
            };
            let mut rows = train(
                model.as_ref(),
                method,
                arm.optimizer.to_config(),
                strategy,
                config.iterations,
                config.batch_size,
                seed,
            )
            .with_context(|| format!("running arm '{}' seed {seed}", arm.name()))?;
            if !config.record_wall_time {
                for row in &mut rows {
                    row.wall_ms = 0.0;
                }
            }

            let path = out_dir.join(format!("{}_seed{}.csv", arm.name(), seed));
            let file = File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut writer = BufWriter::new(file);
            write_metrics_csv(&mut writer, &rows)?;
            writer.flush()?;

            cells.push(CellResult {
                arm: arm.name().to_string(),
                seed,
                rows,
            });
        }
    }

    write_summary(config, model.as_ref(), &cells, &out_dir.join("summary.csv"))?;
    Ok(())
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 0 {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    }
}

fn write_summary(
    config: &ExperimentConfig,
    model: &dyn Objective,
    cells: &[CellResult],
    path: &Path,
) -> Result<()> {
    let initial_loss = model.full_loss(&model.initial_theta());

    // Threshold per seed: configured value, or the log-space midpoint
    // between the initial loss and the best loss any arm reaches.
    let mut thresholds = std::collections::BTreeMap::new();
    for &seed in &config.seeds {
        let threshold = match config.loss_threshold {
            Some(t) => t,
            None => {
                let best = cells
                    .iter()
                    .filter(|c| c.seed == seed)
                    .flat_map(|c| c.rows.iter().map(|r| r.full_loss))
                    .fold(initial_loss, f64::min);
                (initial_loss.max(1e-300) * best.max(1e-300)).sqrt()
            }
        };
        thresholds.insert(seed, threshold);
    }

    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "arm,median_iters_to_threshold,median_wall_ms,median_final_loss"
    )?;
    for arm in &config.arms {
        let name = arm.name();
        let mut iters = Vec::new();
        let mut walls = Vec::new();
        let mut finals = Vec::new();
        for cell in cells.iter().filter(|c| c.arm == name) {
            let threshold = thresholds[&cell.seed];
            iters.push(
                cell.rows
                    .iter()
                    .find(|r| r.full_loss <= threshold)
                    .map_or(f64::INFINITY, |r| r.iteration as f64),
            );
            walls.push(cell.rows.last().map_or(0.0, |r| r.wall_ms));
            finals.push(cell.rows.last().map_or(initial_loss, |r| r.full_loss));
        }
        writeln!(
            out,
            "{},{},{},{}",
            name,
            fmt(median(&mut iters)),
            fmt(median(&mut walls)),
            fmt(median(&mut finals))
        )?;
    }
    out.flush()?;
    Ok(())
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "inf".to_string()
    }
}

/// Runs both scaling probes and writes `scaling_uniform.csv` and
/// `scaling_floored.csv`.
pub fn run_probes(config: &ExperimentConfig, probe: &ProbeSpec) -> Result<()> {
    let out_dir = output_dir(config);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let uniform = adambs::oracle::uniform_scaling_probe(
        probe.tail_exponent,
        probe.density_scale,
        probe.features,
        &probe.n_grid,
        probe.trials,
        probe.seed,
    )?;
    let floored = adambs::oracle::floored_scaling_probe(
        probe.tail_exponent,
        probe.density_scale,
        probe.features,
        &probe.n_grid,
    )?;

    for (report, file_name) in [(&uniform, "scaling_uniform.csv"), (&floored, "scaling_floored.csv")]
    {
        let path = out_dir.join(file_name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        report.write_csv(&mut writer)?;
        writer.flush()?;
        println!(
            "{file_name}: fit {} constant {:.6} residual {:.4}",
            report.model, report.fitted_constant, report.fit_residual
        );
    }
    Ok(())
}
