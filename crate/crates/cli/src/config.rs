//! JSON experiment configuration and its validation.
//!
//! One document describes a whole experiment: the dataset, the model, a
//! list of optimizer arms, and (optionally) a section for the scaling
//! probes. `validate` collects every violated invariant instead of
//! stopping at the first.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use adambs::optim::{LrSchedule, OptimConfig};
use adambs::sampler::BanditConfig;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub arms: Vec<ArmSpec>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Loss level for the iterations-to-threshold summary. When absent,
    /// each seed uses the log-space midpoint between the initial loss and
    /// the best loss any arm achieves.
    #[serde(default)]
    pub loss_threshold: Option<f64>,
    /// With this off, the wall_ms column is written as zero, which makes
    /// repeated runs of the same config byte-identical.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
}

fn default_batch_size() -> usize {
    128
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Doubly heavy-tailed ternary features with a hidden linear teacher.
    HeavyTailed {
        examples: usize,
        features: usize,
        #[serde(default = "default_tail_exponent")]
        tail_exponent: f64,
        #[serde(default = "default_density_scale")]
        density_scale: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Plain-text rows `label,f1,...,fd`.
    Csv { path: PathBuf },
}

fn default_tail_exponent() -> f64 {
    2.0
}

fn default_density_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Logistic,
    OneNeuronRelu,
    Mlp {
        hidden: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmKind {
    Adam,
    Adambs,
    Amsgrad,
    AmsgradBs,
}

impl ArmKind {
    pub fn default_name(self) -> &'static str {
        match self {
            ArmKind::Adam => "adam",
            ArmKind::Adambs => "adambs",
            ArmKind::Amsgrad => "amsgrad",
            ArmKind::AmsgradBs => "amsgrad-bs",
        }
    }

    pub fn uses_bandit(self) -> bool {
        matches!(self, ArmKind::Adambs | ArmKind::AmsgradBs)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub kind: ArmKind,
    /// File-name stem for this arm's CSVs; defaults to the kind.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub optimizer: OptimSpec,
    /// Bandit overrides; ignored by the uniform arms.
    #[serde(default)]
    pub bandit: Option<BanditSpec>,
}

impl ArmSpec {
    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.default_name())
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSpec {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub beta1_decay: f64,
    pub lr_schedule: LrScheduleSpec,
}

impl Default for OptimSpec {
    fn default() -> Self {
        let config = OptimConfig::default();
        OptimSpec {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            beta1_decay: config.beta1_decay,
            lr_schedule: LrScheduleSpec::Constant,
        }
    }
}

impl OptimSpec {
    pub fn to_config(&self) -> OptimConfig {
        OptimConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            beta1_decay: self.beta1_decay,
            lr_schedule: match self.lr_schedule {
                LrScheduleSpec::Constant => LrSchedule::Constant,
                LrScheduleSpec::InverseSqrt => LrSchedule::InverseSqrt,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrScheduleSpec {
    Constant,
    InverseSqrt,
}

/// Bandit hyperparameter overrides. Anything left out takes the
/// dataset-sized default: floor `1/(10n)`, Bregman radius `sqrt(log n)`,
/// adaptive gradient-norm bound, theoretical step size.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditSpec {
    pub step_size: Option<f64>,
    pub grad_norm_bound: Option<f64>,
    pub min_prob: Option<f64>,
    pub bregman_radius: Option<f64>,
}

impl BanditSpec {
    pub fn resolve(&self, n: usize, horizon: usize) -> BanditConfig {
        let mut config = BanditConfig::for_dataset(n, horizon);
        if let Some(bound) = self.grad_norm_bound {
            config.grad_norm_bound = Some(bound);
        }
        if let Some(min_prob) = self.min_prob {
            config.min_prob = min_prob;
        }
        if let Some(radius) = self.bregman_radius {
            config.bregman_radius = radius;
        }
        if let Some(step) = self.step_size {
            config.step_size = step;
        } else if self.min_prob.is_some()
            || self.bregman_radius.is_some()
            || self.grad_norm_bound.is_some()
        {
            // Re-derive the theoretical step from the overridden fields.
            config.step_size = config.theoretical_step_size(n);
        }
        config
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default = "default_tail_exponent")]
    pub tail_exponent: f64,
    #[serde(default = "default_density_scale")]
    pub density_scale: f64,
    pub features: usize,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    200
}

/// What a subcommand needs from the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigUse {
    Run,
    Probe,
    /// `validate` checks whatever sections are present and requires at
    /// least one complete section.
    Any,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> std::io::Result<Result<Self, String>> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text).map_err(|e| e.to_string()))
    }

    fn has_run_section(&self) -> bool {
        self.dataset.is_some() || self.model.is_some() || !self.arms.is_empty()
    }

    /// Returns every violated invariant, one message per violation. An
    /// empty list means the config is valid for the requested use.
    pub fn validate(&self, usage: ConfigUse) -> Vec<String> {
        let mut diagnostics = Vec::new();
        let check_run = match usage {
            ConfigUse::Run => true,
            ConfigUse::Probe => false,
            ConfigUse::Any => self.has_run_section() || self.probe.is_none(),
        };
        if check_run {
            self.validate_run(&mut diagnostics);
        }
        if let Some(probe) = &self.probe {
            validate_probe(probe, &mut diagnostics);
        } else if usage == ConfigUse::Probe {
            diagnostics.push("probe: section required by probe-scaling".into());
        }
        diagnostics
    }

    fn validate_run(&self, diagnostics: &mut Vec<String>) {
        let num_examples = match &self.dataset {
            None => {
                diagnostics.push("dataset: section is required".into());
                None
            }
            Some(spec) => validate_dataset(spec, diagnostics),
        };
        match &self.model {
            None => diagnostics.push("model: section is required".into()),
            Some(ModelSpec::Mlp { hidden, .. }) if *hidden == 0 => {
                diagnostics.push("model.hidden: must be at least 1".into());
            }
            Some(_) => {}
        }
        if self.arms.is_empty() {
            diagnostics.push("arms: at least one arm is required".into());
        }
        if self.batch_size == 0 {
            diagnostics.push("batch_size: must be at least 1".into());
        }
        if self.seeds.is_empty() {
            diagnostics.push("seeds: at least one seed is required".into());
        }
        if let Some(threshold) = self.loss_threshold {
            if !threshold.is_finite() {
                diagnostics.push(format!("loss_threshold: must be finite, got {threshold}"));
            }
        }

        let mut names = std::collections::BTreeSet::new();
        for (index, arm) in self.arms.iter().enumerate() {
            let prefix = format!("arms[{index}]");
            if !names.insert(arm.name().to_string()) {
                diagnostics.push(format!("{prefix}.name: duplicate arm name '{}'", arm.name()));
            }
            if let Err(e) = arm.optimizer.to_config().validate() {
                diagnostics.push(format!("{prefix}.optimizer: {e}"));
            }
            if arm.kind.uses_bandit() {
                if let Some(n) = num_examples {
                    let config = arm
                        .bandit
                        .clone()
                        .unwrap_or_default()
                        .resolve(n, self.iterations.max(1));
                    if let Err(e) = config.validate(n) {
                        diagnostics.push(format!("{prefix}.bandit: {e}"));
                    }
                }
            }
        }
    }
}

fn validate_dataset(spec: &DatasetSpec, diagnostics: &mut Vec<String>) -> Option<usize> {
    match spec {
        DatasetSpec::HeavyTailed {
            examples,
            features,
            tail_exponent,
            density_scale,
            seed,
        } => {
            let config = adambs::HeavyTailConfig {
                num_examples: *examples,
                num_features: *features,
                tail_exponent: *tail_exponent,
                density_scale: *density_scale,
                seed: *seed,
            };
            if let Err(e) = config.validate() {
                diagnostics.push(format!("dataset: {e}"));
                None
            } else {
                Some(*examples)
            }
        }
        DatasetSpec::Csv { path } => match adambs::load_csv(path) {
            Ok(data) => Some(data.num_examples()),
            Err(e) => {
                diagnostics.push(format!("dataset.path: {e}"));
                None
            }
        },
    }
}

fn validate_probe(probe: &ProbeSpec, diagnostics: &mut Vec<String>) {
    if !(probe.tail_exponent >= 2.0) {
        diagnostics.push(format!(
            "probe.tail_exponent: scaling probes assume >= 2, got {}",
            probe.tail_exponent
        ));
    }
    if !(probe.density_scale > 0.0 && probe.density_scale <= 1.0) {
        diagnostics.push(format!(
            "probe.density_scale: must be in (0, 1], got {}",
            probe.density_scale
        ));
    }
    if probe.features == 0 {
        diagnostics.push("probe.features: must be at least 1".into());
    }
    if probe.n_grid.is_empty() || probe.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        diagnostics.push("probe.n_grid: must be nonempty and strictly increasing".into());
    }
    if probe.trials == 0 {
        diagnostics.push("probe.trials: must be at least 1".into());
    }
}
