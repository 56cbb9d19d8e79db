//! Clipped-surrogate policy optimization: the rollout buffer, generalized
//! advantage estimation, the PPO losses and the per-minibatch update of the
//! policy and value networks.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::nn::{GradSet, Policy, ValueNet};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

/// How the trajectory continues after a transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepEnd {
    /// The next transition in the buffer follows from this one.
    Continue,
    /// Absorbing state: nothing is bootstrapped past this step.
    Terminal,
    /// The segment was cut short (time limit or end of collection); the
    /// value of the next state stands in for the rest of the return.
    Truncated { bootstrap: f64 },
}

/// One stored step. States are stacked frames as raw bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<u8>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub next_state: Vec<u8>,
    /// Surrogate reward of the next stacked state.
    pub reward: f64,
    /// Value estimate of `state` at collection time.
    pub value: f64,
    pub end: StepEnd,
}

/// Transitions collected in one outer iteration, in trajectory order.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBuffer {
    state_shape: [usize; 3],
    action_dim: usize,
    transitions: Vec<Transition>,
}

impl RolloutBuffer {
    pub fn new(state_shape: [usize; 3], action_dim: usize) -> Self {
        RolloutBuffer {
            state_shape,
            action_dim,
            transitions: Vec::new(),
        }
    }

    pub fn state_shape(&self) -> [usize; 3] {
        self.state_shape
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        let per: usize = self.state_shape.iter().product();
        if t.state.len() != per || t.next_state.len() != per {
            return Err(Error::invalid("RolloutBuffer::push", "state size does not match the buffer"));
        }
        if t.action.len() != self.action_dim {
            return Err(Error::ShapeMismatch {
                op: "RolloutBuffer::push",
                axis: 0,
                expected: self.action_dim,
                found: t.action.len(),
            });
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Drop every stored transition.
    pub fn flush(&mut self) {
        self.transitions.clear();
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn last_mut(&mut self) -> Option<&mut Transition> {
        self.transitions.last_mut()
    }

    fn gather(&self, idx: &[usize], pick: impl Fn(&Transition) -> &[u8]) -> Tensor {
        let [c, h, w] = self.state_shape;
        let per = c * h * w;
        let mut data = Vec::with_capacity(idx.len() * per);
        for &i in idx {
            data.extend(pick(&self.transitions[i]).iter().map(|&b| b as f64));
        }
        Tensor::new(&[idx.len(), c, h, w], data).expect("gathered states conform")
    }

    /// `[n, C, H, W]` pixel batch of the states at `idx`.
    pub fn states(&self, idx: &[usize]) -> Tensor {
        self.gather(idx, |t| &t.state)
    }

    pub fn next_states(&self, idx: &[usize]) -> Tensor {
        self.gather(idx, |t| &t.next_state)
    }

    /// Assemble a PPO minibatch; advantages are normalized within the
    /// minibatch when `normalize` is set.
    pub fn minibatch(&self, idx: &[usize], adv: &Advantages, normalize: bool) -> Result<PpoBatch> {
        if idx.is_empty() {
            return Err(Error::invalid("RolloutBuffer::minibatch", "empty minibatch"));
        }
        if adv.advantages.len() != self.len() {
            return Err(Error::ShapeMismatch {
                op: "RolloutBuffer::minibatch",
                axis: 0,
                expected: self.len(),
                found: adv.advantages.len(),
            });
        }
        let mut actions = Vec::with_capacity(idx.len() * self.action_dim);
        for &i in idx {
            actions.extend_from_slice(&self.transitions[i].action);
        }
        let mut advantages: Vec<f64> = idx.iter().map(|&i| adv.advantages[i]).collect();
        if normalize {
            normalize_advantages(&mut advantages);
        }
        Ok(PpoBatch {
            states: self.states(idx),
            actions: Tensor::new(&[idx.len(), self.action_dim], actions)?,
            log_probs: idx.iter().map(|&i| self.transitions[i].log_prob).collect(),
            advantages,
            returns: idx.iter().map(|&i| adv.returns[i]).collect(),
        })
    }
}

/// Per-transition advantage estimates and value targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<f64>,
    /// `advantage + value at collection time`.
    pub returns: Vec<f64>,
}

/// Generalized advantage estimation over the buffer. Discounting stops at
/// terminal steps; truncated steps bootstrap from their stored value. The
/// last transition must not be `Continue`.
pub fn compute_advantages(buf: &RolloutBuffer, gamma: f64, lambda: f64) -> Result<Advantages> {
    if buf.is_empty() {
        return Err(Error::invalid("compute_advantages", "empty buffer"));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid("compute_advantages", "discount and trace decay must lie in [0, 1]"));
    }
    let ts = buf.transitions();
    if ts[ts.len() - 1].end == StepEnd::Continue {
        return Err(Error::invalid(
            "compute_advantages",
            "last transition continues but carries no bootstrap value",
        ));
    }
    let n = ts.len();
    let mut advantages = alloc::vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        let t = &ts[i];
        let (next, chain) = match t.end {
            StepEnd::Continue => (ts[i + 1].value, 1.0),
            StepEnd::Terminal => (0.0, 0.0),
            StepEnd::Truncated { bootstrap } => (bootstrap, 0.0),
        };
        let delta = t.reward + gamma * next - t.value;
        acc = delta + gamma * lambda * chain * acc;
        advantages[i] = acc;
    }
    let returns = advantages.iter().zip(ts).map(|(a, t)| a + t.value).collect();
    Ok(Advantages {
        advantages,
        returns,
    })
}

/// Shift to zero mean and scale to unit (population) standard deviation.
/// A constant batch is only centered.
pub fn normalize_advantages(a: &mut [f64]) {
    if a.is_empty() {
        return;
    }
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = crate::math::sqrt(var);
    let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
    a.iter_mut().for_each(|x| *x = (*x - mean) * scale);
}

/// `−mean(min(ρ·A, clip(ρ, 1 − ε, 1 + ε)·A))` with `ρ = exp(new − old)`.
pub fn ppo_policy_loss(
    g: &mut Graph,
    log_prob_new: Var,
    log_prob_old: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<Var> {
    let n = g.shape(log_prob_new).iter().product::<usize>();
    if g.shape(log_prob_new).len() != 1 || log_prob_old.len() != n || advantages.len() != n {
        return Err(Error::invalid(
            "ppo_policy_loss",
            format!(
                "log-prob {:?}, old {} and advantages {} must be equal-length vectors",
                g.shape(log_prob_new),
                log_prob_old.len(),
                advantages.len()
            ),
        ));
    }
    let old = g.constant(Tensor::new(&[n], log_prob_old.to_vec())?);
    let adv = g.constant(Tensor::new(&[n], advantages.to_vec())?);
    let diff = g.sub(log_prob_new, old)?;
    let ratio = g.exp(diff);
    let plain = g.mul(ratio, adv)?;
    let clipped = g.clamp(ratio, 1.0 - clip, 1.0 + clip)?;
    let clipped = g.mul(clipped, adv)?;
    // elementwise min through a constant selection mask
    let (pv, cv) = (g.value(plain).data(), g.value(clipped).data());
    let mask: Vec<f64> = pv.iter().zip(cv).map(|(p, c)| if p <= c { 1.0 } else { 0.0 }).collect();
    let inv: Vec<f64> = mask.iter().map(|m| 1.0 - m).collect();
    let mask = g.constant(Tensor::new(&[n], mask)?);
    let inv = g.constant(Tensor::new(&[n], inv)?);
    let a = g.mul(plain, mask)?;
    let b = g.mul(clipped, inv)?;
    let m = g.add(a, b)?;
    let m = g.mean(m);
    Ok(g.neg(m))
}

/// Mean squared error against fixed targets.
pub fn value_loss(g: &mut Graph, values: Var, targets: &[f64]) -> Result<Var> {
    let n = targets.len();
    if g.shape(values) != [n] {
        return Err(Error::invalid(
            "value_loss",
            format!("values {:?} and {} targets differ", g.shape(values), n),
        ));
    }
    let t = g.constant(Tensor::new(&[n], targets.to_vec())?);
    let d = g.sub(values, t)?;
    let sq = g.square(d);
    Ok(g.mean(sq))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Global gradient-norm clip applied by both optimizers.
    pub max_grad_norm: Option<f64>,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.003,
            value_coef: 0.5,
            max_grad_norm: Some(0.5),
            policy_lr: 3e-4,
            value_lr: 3e-4,
            normalize_advantages: true,
        }
    }
}

/// A minibatch of augmented transitions with its advantage targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoBatch {
    /// `[n, C, H, W]` raw pixels.
    pub states: Tensor,
    /// `[n, A]`
    pub actions: Tensor,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Diagnostics of one policy/value step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStep {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left the clip interval.
    pub clip_fraction: f64,
}

fn finite(what: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(format!("{what} ({x})")))
    }
}

/// Gradients of `policy loss − entropy_coef · entropy`.
pub fn policy_gradients(policy: &Policy, batch: &PpoBatch, cfg: &PpoConfig) -> Result<(GradSet, PpoStep)> {
    let mut g = Graph::new();
    let b = policy.params.bind(&mut g, true);
    let x = g.constant(batch.states.clone());
    let out = policy.forward(&mut g, &b, x)?;
    let a = g.constant(batch.actions.clone());
    let lp = out.log_prob(&mut g, a)?;
    let surrogate = ppo_policy_loss(&mut g, lp, &batch.log_probs, &batch.advantages, cfg.clip)?;
    let ent = out.entropy(&mut g);
    let bonus = g.scale(ent, -cfg.entropy_coef);
    let loss = g.add(surrogate, bonus)?;
    let clip_fraction = g
        .value(lp)
        .data()
        .iter()
        .zip(&batch.log_probs)
        .filter(|(n, o)| libm::fabs(crate::math::exp(*n - *o) - 1.0) > cfg.clip)
        .count() as f64
        / batch.log_probs.len() as f64;
    let policy_loss = finite("policy loss", g.item(surrogate))?;
    let entropy = finite("policy entropy", g.item(ent))?;
    let grads = policy.params.gradients(&mut g, loss, &b)?;
    Ok((
        grads,
        PpoStep {
            policy_loss,
            entropy,
            clip_fraction,
            ..PpoStep::default()
        },
    ))
}

/// Gradients of `value_coef · MSE(V, returns)`; also returns the unweighted MSE.
pub fn value_gradients(value: &ValueNet, batch: &PpoBatch, cfg: &PpoConfig) -> Result<(GradSet, f64)> {
    let mut g = Graph::new();
    let b = value.params.bind(&mut g, true);
    let x = g.constant(batch.states.clone());
    let v = value.forward(&mut g, &b, x)?;
    let mse = value_loss(&mut g, v, &batch.returns)?;
    let loss = g.scale(mse, cfg.value_coef);
    let mse = finite("value loss", g.item(mse))?;
    Ok((value.params.gradients(&mut g, loss, &b)?, mse))
}

/// Separate adaptive-moment optimizers for the two networks.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoOptimizers {
    pub policy: Adam,
    pub value: Adam,
}

impl PpoOptimizers {
    pub fn new(cfg: &PpoConfig, policy: &Policy, value: &ValueNet) -> Self {
        let make = |lr: f64| {
            let c = AdamConfig::new(lr);
            match cfg.max_grad_norm {
                Some(m) => c.with_clip(m),
                None => c,
            }
        };
        PpoOptimizers {
            policy: Adam::new(make(cfg.policy_lr), &policy.params),
            value: Adam::new(make(cfg.value_lr), &value.params),
        }
    }
}

/// One step of each optimizer on a single minibatch.
pub fn update_policy_value(
    policy: &mut Policy,
    value: &mut ValueNet,
    opt: &mut PpoOptimizers,
    batch: &PpoBatch,
    cfg: &PpoConfig,
) -> Result<PpoStep> {
    let (pg, mut step) = policy_gradients(policy, batch, cfg)?;
    let (vg, mse) = value_gradients(value, batch, cfg)?;
    opt.policy.step(&mut policy.params, &pg)?;
    opt.value.step(&mut value.params, &vg)?;
    step.value_loss = mse;
    Ok(step)
}
