//! Adam and AMSGrad with bandit sampling.
//!
//! Plain Adam adapts per parameter but samples mini-batches uniformly.
//! This crate additionally adapts *per training example*: an adversarial
//! multi-armed bandit maintains an importance distribution over the
//! examples, mini-batches are drawn from it with replacement, and the
//! resulting importance-weighted gradient estimate (which stays unbiased
//! for the full-dataset gradient) drives the usual Adam or AMSGrad
//! parameter update.
//!
//! Modules:
//! - [`sampler`] — the example distribution: multiplicative-weights
//!   updates, KL projection onto a floored simplex, O(log n) sampling.
//! - [`optim`] — Adam/AMSGrad steps, the unbiased batch estimate and the
//!   training loop tying both sides together.
//! - [`models`] — desk-scale differentiable objectives exposing
//!   per-example losses and gradients.
//! - [`data`] — synthetic heavy-tailed data and a plain-text loader.
//! - [`oracle`] — independent brute-force validators (batch enumeration,
//!   optimal sampling distributions, scaling probes).

pub mod data;
pub mod error;
pub mod models;
pub mod optim;
pub mod oracle;
pub mod sampler;

mod util;

pub use data::{generate_heavy_tailed, load_csv, save_csv, Dataset, HeavyTailConfig};
pub use error::{Error, Result};
pub use models::{LogisticRegression, Objective, OneNeuronRelu, SmallMlp};
pub use optim::{
    adam_step, amsgrad_step, unbiased_estimate, GradientEstimate, LrSchedule, MiniBatch,
    MomentState, OptimConfig, OptimMethod, RunMetrics, SamplingStrategy, Trainer,
};
pub use sampler::{
    bandit_loss, estimate_bandit_gradient, project_kl, theoretical_step_size, BanditConfig,
    ExampleDistribution,
};
