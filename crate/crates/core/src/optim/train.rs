use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{adam_step, amsgrad_step, unbiased_estimate, MiniBatch, MomentState, OptimConfig,
    OptimMethod};
use crate::error::{Error, Result};
use crate::models::Objective;
use crate::sampler::{BanditConfig, ExampleDistribution};
use crate::util::{g17, l2_norm};

/// How mini-batches are selected.
#[derive(Debug, Clone)]
pub enum SamplingStrategy {
    /// Plain uniform sampling with replacement and batch-mean gradients —
    /// the baseline arm.
    Uniform,
    /// Bandit-learned importance distribution with Eq-weighted unbiased
    /// estimates.
    Bandit(BanditConfig),
}

/// One per-iteration log row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Cumulative optimization wall time in milliseconds, measured with a
    /// monotonic clock around the compute only (no metric I/O).
    pub wall_ms: f64,
    /// Mean loss over the whole dataset at the post-step parameters.
    pub full_loss: f64,
    /// Mean per-example loss of the sampled batch at the pre-step
    /// parameters.
    pub batch_loss: f64,
    /// Entropy of the sampling distribution (ln n for the uniform arm).
    pub entropy: f64,
}

/// Writes metrics as CSV with header `iter,wall_ms,full_loss,batch_loss,entropy`,
/// floats at 17 significant digits.
pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[RunMetrics]) -> io::Result<()> {
    writeln!(out, "iter,wall_ms,full_loss,batch_loss,entropy")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.iteration,
            g17(row.wall_ms),
            g17(row.full_loss),
            g17(row.batch_loss),
            g17(row.entropy)
        )?;
    }
    Ok(())
}

/// Owns one training run: parameters, optimizer moments, the sampling
/// distribution and the RNG. Step-by-step driving keeps trajectories
/// inspectable; [`train`] is the run-to-completion wrapper.
pub struct Trainer<'a> {
    model: &'a dyn Objective,
    method: OptimMethod,
    optim: OptimConfig,
    batch_size: usize,
    theta: Vec<f64>,
    state: MomentState,
    bandit: Option<(ExampleDistribution, BanditConfig)>,
    running_max_norm: f64,
    rng: ChaCha8Rng,
    iteration: usize,
    wall: Duration,
}

impl<'a> Trainer<'a> {
    /// `theta0 = None` starts from the model's own initialization. The
    /// same seed, model and configs reproduce the run bit for bit.
    pub fn new(
        model: &'a dyn Objective,
        theta0: Option<Vec<f64>>,
        method: OptimMethod,
        optim: OptimConfig,
        strategy: SamplingStrategy,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        optim.validate()?;
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        let theta = theta0.unwrap_or_else(|| model.initial_theta());
        if theta.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: theta.len(),
            });
        }
        let bandit = match strategy {
            SamplingStrategy::Uniform => None,
            SamplingStrategy::Bandit(config) => {
                let dist = ExampleDistribution::new_uniform(model.num_examples(), &config)?;
                Some((dist, config))
            }
        };
        Ok(Trainer {
            model,
            method,
            batch_size,
            theta,
            state: MomentState::for_method(method, model.dim()),
            bandit,
            running_max_norm: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            wall: Duration::ZERO,
            optim,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn moment_state(&self) -> &MomentState {
        &self.state
    }

    pub fn distribution(&self) -> Option<&ExampleDistribution> {
        self.bandit.as_ref().map(|(dist, _)| dist)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn full_loss(&self) -> f64 {
        self.model.full_loss(&self.theta)
    }

    /// Runs one iteration: sample a batch from the current distribution,
    /// form the gradient estimate, take the optimizer step, then feed the
    /// observed norms back to the bandit (bandit arm only).
    pub fn step(&mut self) -> Result<RunMetrics> {
        let start = Instant::now();
        self.iteration += 1;
        let n = self.model.num_examples();

        // Sample K indices with the draw-time probabilities. Both arms
        // consume exactly one uniform variate per draw, so runs with a
        // shared seed see identical streams.
        let mut indices = Vec::with_capacity(self.batch_size);
        let mut probs = Vec::with_capacity(self.batch_size);
        match &self.bandit {
            None => {
                let uniform = 1.0 / n as f64;
                for _ in 0..self.batch_size {
                    let u = self.rng.random::<f64>();
                    indices.push(((u * n as f64) as usize).min(n - 1));
                    probs.push(uniform);
                }
            }
            Some((dist, _)) => {
                for _ in 0..self.batch_size {
                    let j = dist.sample(&mut self.rng);
                    indices.push(j);
                    probs.push(dist.prob(j));
                }
            }
        }

        let mut grads = Vec::with_capacity(self.batch_size);
        let mut norms = Vec::with_capacity(self.batch_size);
        let mut batch_loss = 0.0;
        for &j in &indices {
            let grad = self.model.per_example_grad(&self.theta, j);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { example: j });
            }
            norms.push(l2_norm(&grad));
            batch_loss += self.model.per_example_loss(&self.theta, j);
            grads.push(grad);
        }
        batch_loss /= self.batch_size as f64;

        let estimate = match &self.bandit {
            None => {
                // Batch mean, accumulated in draw order.
                let mut acc = vec![0.0; self.model.dim()];
                for grad in &grads {
                    for (a, g) in acc.iter_mut().zip(grad) {
                        *a += g;
                    }
                }
                let inv_k = 1.0 / self.batch_size as f64;
                for a in &mut acc {
                    *a *= inv_k;
                }
                acc
            }
            Some(_) => {
                let batch = MiniBatch {
                    indices: indices.clone(),
                    grads,
                    norms: norms.clone(),
                    probs,
                };
                unbiased_estimate(&batch, n)?.values
            }
        };

        match self.method {
            OptimMethod::Adam => adam_step(&mut self.state, &mut self.theta, &estimate, &self.optim)?,
            OptimMethod::AmsGrad => {
                amsgrad_step(&mut self.state, &mut self.theta, &estimate, &self.optim)?
            }
        }

        if let Some((dist, config)) = &mut self.bandit {
            let batch_max = norms.iter().cloned().fold(0.0, f64::max);
            self.running_max_norm = self.running_max_norm.max(batch_max);
            let bound = config.effective_bound(self.running_max_norm);
            dist.update(&indices, &norms, config, bound)?;
        }

        let full_loss = self.model.full_loss(&self.theta);
        if !full_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: self.iteration,
            });
        }
        let entropy = match &self.bandit {
            None => (n as f64).ln(),
            Some((dist, _)) => dist.entropy(),
        };

        self.wall += start.elapsed();
        Ok(RunMetrics {
            iteration: self.iteration,
            wall_ms: self.wall.as_secs_f64() * 1e3,
            full_loss,
            batch_loss,
            entropy,
        })
    }
}

/// Runs `iterations` steps from the model's initialization and collects
/// one metrics row per iteration. Aborts on a non-finite loss or gradient.
pub fn train(
    model: &dyn Objective,
    method: OptimMethod,
    optim: OptimConfig,
    strategy: SamplingStrategy,
    iterations: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<RunMetrics>> {
    let mut trainer = Trainer::new(model, None, method, optim, strategy, batch_size, seed)?;
    let mut rows = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        rows.push(trainer.step()?);
    }
    Ok(rows)
}
