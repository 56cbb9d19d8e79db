//! The adversarial imitation loop: collect transitions with surrogate
//! rewards, alternate discriminator and policy/value updates on minibatches
//! of the collection, flush, repeat.
//!
//! Learners differ only in their random streams. They share one copy of
//! every network: each update averages the per-learner gradients in learner
//! order and applies the mean once, which is what synchronized replicas
//! would compute.

use std::path::Path;
use std::time::Instant;

use relmimic_core::env::{render, FrameStack, Status, WalkerState};
use relmimic_core::env::DemonstrationSet;
use relmimic_core::gail::{discriminator_gradients, surrogate_reward, DiscBatch};
use relmimic_core::math;
use relmimic_core::nn::{average_gradients, AgentConfig, DiscConfig, Discriminator, GradSet, Policy, ValueNet};
use relmimic_core::optim::{Adam, AdamConfig};
use relmimic_core::ppo::{
    compute_advantages, policy_gradients, value_gradients, Advantages, PpoConfig, RolloutBuffer, StepEnd,
    Transition,
};
use relmimic_core::rng::{self, Rng64};
use relmimic_core::Tensor;

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::error::{InModule, Result};

pub const ACTION_DIM: usize = 2;

/// Reset seeds of the evaluation episodes, shared by every run.
pub fn eval_seeds(episodes: usize) -> Vec<u64> {
    (0..episodes as u64).map(|i| 1_000_000 + i).collect()
}

/// One row of the per-iteration log.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Seconds since the run started.
    pub wall_time: f64,
    /// Mean surrogate return of the episodes that ended this iteration.
    pub surrogate_return: Option<f64>,
    /// Mean forward progress of the same episodes (never used for training).
    pub train_progress: Option<f64>,
    /// Mean progress of deterministic evaluation episodes, when evaluated.
    pub eval_progress: Option<f64>,
    /// Fraction of correctly classified samples over the iteration's
    /// discriminator updates.
    pub disc_accuracy: Option<f64>,
    pub policy_entropy: f64,
}

struct Learner {
    env: WalkerState,
    stack: FrameStack,
    rng: Rng64,
    buffer: RolloutBuffer,
    surrogate: f64,
}

impl Learner {
    fn new(k: usize, res: usize, mut rng: Rng64) -> Result<Learner> {
        let env = WalkerState::reset(rng::index(&mut rng, 1 << 30) as u64);
        Ok(Learner {
            env,
            stack: FrameStack::new(k, render(&env, res))?,
            rng,
            buffer: RolloutBuffer::new([k, res, res], ACTION_DIM),
            surrogate: 0.0,
        })
    }

    fn restart(&mut self, k: usize, res: usize) -> Result<()> {
        self.env = WalkerState::reset(rng::index(&mut self.rng, 1 << 30) as u64);
        self.stack = FrameStack::new(k, render(&self.env, res))?;
        self.surrogate = 0.0;
        Ok(())
    }
}

fn to_tensor(bytes: &[Vec<u8>], shape: [usize; 3]) -> Tensor {
    let data = bytes.iter().flat_map(|b| b.iter().map(|&v| v as f64)).collect();
    Tensor::new(&[bytes.len(), shape[0], shape[1], shape[2]], data).expect("stacked states conform")
}

/// Networks, optimizers and learners of one seed.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    demos: &'a DemonstrationSet,
    pub policy: Policy,
    pub value: ValueNet,
    pub disc: Discriminator,
    policy_opt: Adam,
    value_opt: Adam,
    disc_opt: Adam,
    ppo: PpoConfig,
    learners: Vec<Learner>,
    sample_rng: Rng64,
    penalty_rng: Rng64,
    iteration: usize,
    started: Instant,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &TrainConfig, seed: u64, demos: &'a DemonstrationSet) -> Result<Trainer<'a>> {
        cfg.validate()?;
        if demos.resolution() != cfg.resolution {
            return Err(crate::error::Error::Resolution {
                expected: cfg.resolution,
                found: demos.resolution(),
            });
        }
        let (k, res) = (cfg.k, cfg.resolution);
        let policy = Policy::new(&AgentConfig::new(k, res, cfg.variant.policy_stack(), ACTION_DIM), seed)?;
        let value = ValueNet::new(&AgentConfig::new(k, res, cfg.variant.value_stack(), ACTION_DIM), seed)?;
        let disc = Discriminator::new(&DiscConfig::new(k, res, cfg.variant.relational_reward()), seed)?;
        let ppo = PpoConfig {
            gamma: cfg.gamma,
            lambda: cfg.lambda,
            clip: cfg.clip,
            entropy_coef: cfg.entropy_coef,
            value_coef: cfg.value_coef,
            max_grad_norm: cfg.max_grad_norm,
            policy_lr: cfg.policy_lr,
            value_lr: cfg.value_lr,
            normalize_advantages: cfg.normalize_advantages,
        };
        let adam = |lr: f64| {
            let c = AdamConfig::new(lr);
            cfg.max_grad_norm.map_or(c, |m| c.with_clip(m))
        };
        let learners = (0..cfg.learners)
            .map(|l| Learner::new(k, res, rng::derive(seed, 1000 + l as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trainer {
            policy_opt: Adam::new(adam(cfg.policy_lr), &policy.params),
            value_opt: Adam::new(adam(cfg.value_lr), &value.params),
            disc_opt: Adam::new(AdamConfig::new(cfg.disc_lr), &disc.params),
            cfg: cfg.clone(),
            demos,
            policy,
            value,
            disc,
            ppo,
            learners,
            sample_rng: rng::derive(seed, 1),
            penalty_rng: rng::derive(seed, 2),
            iteration: 0,
            started: Instant::now(),
        })
    }

    fn state_shape(&self) -> [usize; 3] {
        [self.cfg.k, self.cfg.resolution, self.cfg.resolution]
    }

    fn values(&self, states: &[Vec<u8>]) -> Result<Vec<f64>> {
        let v = self.value.evaluate(&to_tensor(states, self.state_shape())).in_module("value")?;
        Ok(v.into_data())
    }

    /// Run every learner for `steps` control steps. Returns the surrogate
    /// return and progress of each episode that ended.
    fn collect(&mut self) -> Result<Vec<(f64, f64)>> {
        let (k, res) = (self.cfg.k, self.cfg.resolution);
        let shape = self.state_shape();
        let mut finished = Vec::new();
        for _ in 0..self.cfg.steps {
            let states: Vec<Vec<u8>> = self.learners.iter().map(|l| l.stack.to_bytes()).collect();
            let (means, log_std) = self.policy.evaluate(&to_tensor(&states, shape)).in_module("policy")?;
            let values = self.values(&states)?;
            let mut steps = Vec::with_capacity(self.learners.len());
            for (i, learner) in self.learners.iter_mut().enumerate() {
                let mut action = vec![0.0; ACTION_DIM];
                let mut log_prob = 0.0;
                for (j, a) in action.iter_mut().enumerate() {
                    let s = log_std.data()[j];
                    let eps = rng::normal(&mut learner.rng);
                    *a = means.data()[i * ACTION_DIM + j] + math::exp(s) * eps;
                    log_prob += -0.5 * eps * eps - s - 0.5 * math::LN_2PI;
                }
                let status = learner.env.step([action[0], action[1]]);
                learner.stack.push(render(&learner.env, res));
                steps.push((action, log_prob, status, learner.stack.to_bytes(), learner.env.progress()));
            }
            let next: Vec<Vec<u8>> = steps.iter().map(|s| s.3.clone()).collect();
            let probs = self.disc.probability(&to_tensor(&next, shape)).in_module("discriminator")?;
            let timeout: Vec<Vec<u8>> = steps
                .iter()
                .filter(|s| s.2 == Status::TimeUp)
                .map(|s| s.3.clone())
                .collect();
            let mut bootstrap = if timeout.is_empty() { Vec::new() } else { self.values(&timeout)? }.into_iter();
            for (i, (action, log_prob, status, next_state, progress)) in steps.into_iter().enumerate() {
                let reward = surrogate_reward(probs[i]);
                let end = match status {
                    Status::Running => StepEnd::Continue,
                    Status::Fallen => StepEnd::Terminal,
                    Status::TimeUp => StepEnd::Truncated {
                        bootstrap: bootstrap.next().expect("one value per timed-out learner"),
                    },
                };
                let learner = &mut self.learners[i];
                learner.surrogate += reward;
                learner.buffer.push(Transition {
                    state: states[i].clone(),
                    action,
                    log_prob,
                    next_state,
                    reward,
                    value: values[i],
                    end,
                })?;
                if status.is_done() {
                    finished.push((learner.surrogate, progress));
                    learner.restart(k, res)?;
                }
            }
        }
        // Segments cut by the end of collection bootstrap from the value of
        // the state they stopped in.
        let open: Vec<usize> = (0..self.learners.len())
            .filter(|&i| {
                self.learners[i].buffer.transitions().last().map(|t| t.end) == Some(StepEnd::Continue)
            })
            .collect();
        if !open.is_empty() {
            let states: Vec<Vec<u8>> = open.iter().map(|&i| self.learners[i].stack.to_bytes()).collect();
            let v = self.values(&states)?;
            for (&i, b) in open.iter().zip(v) {
                if let Some(t) = self.learners[i].buffer.last_mut() {
                    t.end = StepEnd::Truncated { bootstrap: b };
                }
            }
        }
        Ok(finished)
    }

    fn disc_step(&mut self) -> Result<f64> {
        self.disc.advance_power_iteration();
        let mb = self.cfg.minibatch;
        let mut grads: Vec<GradSet> = Vec::with_capacity(self.learners.len());
        let mut accuracy = 0.0;
        for l in &self.learners {
            let idx = rng::sample_indices(&mut self.sample_rng, l.buffer.len(), mb);
            let policy = l.buffer.next_states(&idx);
            let expert = self.demos.sample(&mut self.sample_rng, idx.len(), self.cfg.k);
            let batch = DiscBatch::new(policy, expert)?;
            let (g, info) =
                discriminator_gradients(&self.disc, &batch, self.cfg.nu, &mut self.penalty_rng).in_module("discriminator")?;
            accuracy += info.accuracy;
            grads.push(g);
        }
        let avg = average_gradients(&grads)?;
        self.disc_opt.step(&mut self.disc.params, &avg).in_module("discriminator")?;
        Ok(accuracy / self.learners.len() as f64)
    }

    fn ppo_step(&mut self, advantages: &[Advantages]) -> Result<f64> {
        let mb = self.cfg.minibatch;
        let mut pgs = Vec::with_capacity(self.learners.len());
        let mut vgs = Vec::with_capacity(self.learners.len());
        let mut entropy = 0.0;
        for (l, adv) in self.learners.iter().zip(advantages) {
            let idx = rng::sample_indices(&mut self.sample_rng, l.buffer.len(), mb);
            let batch = l.buffer.minibatch(&idx, adv, self.ppo.normalize_advantages)?;
            let (pg, st) = policy_gradients(&self.policy, &batch, &self.ppo).in_module("policy")?;
            let (vg, _) = value_gradients(&self.value, &batch, &self.ppo).in_module("value")?;
            entropy = st.entropy;
            pgs.push(pg);
            vgs.push(vg);
        }
        let pg = average_gradients(&pgs)?;
        let vg = average_gradients(&vgs)?;
        self.policy_opt.step(&mut self.policy.params, &pg).in_module("policy")?;
        self.value_opt.step(&mut self.value.params, &vg).in_module("value")?;
        Ok(entropy)
    }

    /// One outer iteration. Evaluates when `evaluate` is set.
    pub fn iterate(&mut self, evaluate: bool) -> Result<IterationLog> {
        self.iteration += 1;
        let finished = self.collect()?;
        let advantages = self
            .learners
            .iter()
            .map(|l| compute_advantages(&l.buffer, self.ppo.gamma, self.ppo.lambda))
            .collect::<relmimic_core::Result<Vec<_>>>()
            .in_module("advantages")?;
        if self.cfg.lr_decay {
            let frac = 1.0 - (self.iteration - 1) as f64 / self.cfg.iterations as f64;
            self.policy_opt.config.lr = self.cfg.policy_lr * frac;
            self.value_opt.config.lr = self.cfg.value_lr * frac;
        }
        let mut accuracy = Vec::new();
        let mut entropy = f64::NAN;
        for _ in 0..self.cfg.rounds {
            for _ in 0..self.cfg.disc_updates {
                accuracy.push(self.disc_step()?);
            }
            for _ in 0..self.cfg.ppo_updates {
                entropy = self.ppo_step(&advantages)?;
            }
        }
        for l in &mut self.learners {
            l.buffer.flush();
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let eval_progress = if evaluate {
            mean(&evaluate_policy(&self.policy, &self.cfg, &eval_seeds(self.cfg.eval_episodes))?)
        } else {
            None
        };
        Ok(IterationLog {
            iteration: self.iteration,
            wall_time: self.started.elapsed().as_secs_f64(),
            surrogate_return: mean(&finished.iter().map(|f| f.0).collect::<Vec<_>>()),
            train_progress: mean(&finished.iter().map(|f| f.1).collect::<Vec<_>>()),
            eval_progress,
            disc_accuracy: mean(&accuracy),
            policy_entropy: entropy,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.cfg, &[&self.policy.params, &self.value.params, &self.disc.params])
    }
}

/// Deterministic episodes with the policy's mean action, one per reset seed,
/// stepped in lockstep. Returns each episode's forward progress.
pub fn evaluate_policy(policy: &Policy, cfg: &TrainConfig, seeds: &[u64]) -> Result<Vec<f64>> {
    let (k, res) = (cfg.k, cfg.resolution);
    let mut envs: Vec<WalkerState> = seeds.iter().map(|&s| WalkerState::reset(s)).collect();
    let mut stacks = envs
        .iter()
        .map(|e| FrameStack::new(k, render(e, res)))
        .collect::<relmimic_core::Result<Vec<_>>>()?;
    let mut done = vec![false; envs.len()];
    while done.iter().any(|d| !d) {
        let live: Vec<usize> = (0..envs.len()).filter(|&i| !done[i]).collect();
        let states: Vec<Vec<u8>> = live.iter().map(|&i| stacks[i].to_bytes()).collect();
        let (means, _) = policy.evaluate(&to_tensor(&states, [k, res, res])).in_module("policy")?;
        for (j, &i) in live.iter().enumerate() {
            let a = [means.data()[j * ACTION_DIM], means.data()[j * ACTION_DIM + 1]];
            let status = envs[i].step(a);
            stacks[i].push(render(&envs[i], res));
            done[i] = status.is_done();
        }
    }
    Ok(envs.iter().map(WalkerState::progress).collect())
}

/// Mean progress of the scripted expert on the evaluation seeds.
pub fn expert_score(episodes: usize) -> f64 {
    let seeds = eval_seeds(episodes);
    let total: f64 = seeds
        .iter()
        .map(|&s| relmimic_core::env::expert_episode(s, 32).1)
        .sum();
    total / seeds.len() as f64
}

/// Outcome of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub log: Vec<IterationLog>,
    /// Final deterministic evaluation returns.
    pub eval_returns: Vec<f64>,
}

/// Train one seed, writing its log, evaluation returns and checkpoint into
/// `dir`. `on_row` observes every log row as it is produced.
pub fn run_seed(
    cfg: &TrainConfig,
    seed: u64,
    demos: &DemonstrationSet,
    dir: &Path,
    mut on_row: impl FnMut(u64, &IterationLog),
) -> Result<SeedRun> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    let mut trainer = Trainer::new(cfg, seed, demos)?;
    let mut log = Vec::with_capacity(cfg.iterations);
    let mut writer = crate::report::LogWriter::create(dir)?;
    for i in 1..=cfg.iterations {
        let evaluate = i % cfg.eval_every == 0 || i == cfg.iterations;
        let row = trainer.iterate(evaluate)?;
        writer.write(&row)?;
        on_row(seed, &row);
        log.push(row);
    }
    writer.finish()?;
    let eval_returns = evaluate_policy(&trainer.policy, cfg, &eval_seeds(cfg.eval_episodes))?;
    crate::report::write_returns(&dir.join("eval.csv"), &eval_returns)?;
    trainer.checkpoint().save(&dir.join("checkpoint.bin"))?;
    Ok(SeedRun {
        seed,
        log,
        eval_returns,
    })
}
