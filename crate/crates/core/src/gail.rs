//! Adversarial reward learning: the minimax value, the regularized
//! discriminator loss with a gradient penalty on interpolates, and the
//! surrogate reward `−log(1 − D)`.
//!
//! The generic functions take the discriminator as a closure from an input
//! batch var to logits `[N]`; `D = sigmoid(logit)`. Logs of `D` are taken in
//! log-sigmoid form, which is exact and finite for every logit.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::math;
use crate::nn::{Discriminator, GradSet};
use crate::optim::Adam;
use crate::rng::{self, Rng64};
use crate::tensor::Tensor;

/// Probability clamp applied before the reward's logarithm.
pub const DELTA: f64 = 1e-6;

/// Added under the square root of the penalty's gradient norm so its own
/// derivative stays finite at a zero gradient.
pub const NORM_EPS: f64 = 1e-24;

/// Equal-sized policy and expert batches of stacked states `[B, C, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscBatch {
    pub policy: Tensor,
    pub expert: Tensor,
}

impl DiscBatch {
    pub fn new(policy: Tensor, expert: Tensor) -> Result<Self> {
        if policy.rank() == 0 || expert.rank() == 0 {
            return Err(Error::invalid("DiscBatch", "empty batch"));
        }
        if policy.shape() != expert.shape() {
            return Err(Error::invalid(
                "DiscBatch",
                alloc::format!(
                    "policy batch {:?} and expert batch {:?} differ",
                    policy.shape(),
                    expert.shape()
                ),
            ));
        }
        Ok(DiscBatch { policy, expert })
    }

    pub fn len(&self) -> usize {
        self.policy.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Both halves divided by 255.
    pub fn standardized(&self) -> DiscBatch {
        DiscBatch {
            policy: self.policy.map(|x| x / 255.0),
            expert: self.expert.map(|x| x / 255.0),
        }
    }
}

/// `mean log(1 − D(policy)) + mean log D(expert)`.
pub fn gail_value<L>(g: &mut Graph, logits: &L, batch: &DiscBatch) -> Result<Var>
where
    L: Fn(&mut Graph, Var) -> Result<Var>,
{
    Ok(gail_value_parts(g, logits, batch)?.0)
}

/// The value together with the policy and expert logits.
fn gail_value_parts<L>(g: &mut Graph, logits: &L, batch: &DiscBatch) -> Result<(Var, Var, Var)>
where
    L: Fn(&mut Graph, Var) -> Result<Var>,
{
    let p = g.constant(batch.policy.clone());
    let e = g.constant(batch.expert.clone());
    let lp = logits(g, p)?;
    let le = logits(g, e)?;
    // log(1 − σ(l)) = −softplus(l); log σ(l) = −softplus(−l)
    let fake = g.softplus(lp);
    let fake = g.mean(fake);
    let ne = g.neg(le);
    let real = g.softplus(ne);
    let real = g.mean(real);
    let s = g.add(fake, real)?;
    Ok((g.neg(s), lp, le))
}

/// Mean over pairs of `(‖∇ logit(x̂)‖ − 1)²` at `x̂ = ε·expert + (1−ε)·policy`,
/// with one `ε ~ U(0, 1)` per pair. The result stays differentiable with
/// respect to the discriminator's parameters.
pub fn gradient_penalty<L>(g: &mut Graph, logits: &L, batch: &DiscBatch, rng: &mut Rng64) -> Result<Var>
where
    L: Fn(&mut Graph, Var) -> Result<Var>,
{
    let n = batch.len();
    let per = batch.policy.numel() / n;
    let mut mix = batch.policy.clone();
    for (m, e) in mix.data_mut().chunks_mut(per).zip(batch.expert.data().chunks(per)) {
        let eps = rng::uniform(rng, 0.0, 1.0);
        m.iter_mut().zip(e).for_each(|(p, &x)| *p = eps * x + (1.0 - eps) * *p);
    }
    let xh = g.param(mix);
    let l = logits(g, xh)?;
    let s = g.sum(l);
    let grad = g.backward(s, &[xh])?[0];
    let flat = g.reshape(grad, &[n, per])?;
    let sq = g.square(flat);
    let sq = g.sum_last(sq)?;
    let sq = g.offset(sq, NORM_EPS);
    let norm = g.sqrt(sq);
    let dev = g.offset(norm, -1.0);
    let pen = g.square(dev);
    Ok(g.mean(pen))
}

/// `−gail_value + ν·gradient_penalty`. With `ν = 0` the penalty is not
/// evaluated and no randomness is consumed.
pub fn discriminator_loss<L>(
    g: &mut Graph,
    logits: &L,
    batch: &DiscBatch,
    nu: f64,
    rng: &mut Rng64,
) -> Result<Var>
where
    L: Fn(&mut Graph, Var) -> Result<Var>,
{
    Ok(loss_parts(g, logits, batch, nu, rng)?.loss)
}

struct LossParts {
    loss: Var,
    value: Var,
    penalty: Option<Var>,
    policy_logits: Var,
    expert_logits: Var,
}

fn loss_parts<L>(
    g: &mut Graph,
    logits: &L,
    batch: &DiscBatch,
    nu: f64,
    rng: &mut Rng64,
) -> Result<LossParts>
where
    L: Fn(&mut Graph, Var) -> Result<Var>,
{
    if nu < 0.0 || nu.is_nan() {
        return Err(Error::invalid("discriminator_loss", "penalty weight must be non-negative"));
    }
    let (value, policy_logits, expert_logits) = gail_value_parts(g, logits, batch)?;
    let mut loss = g.neg(value);
    let mut penalty = None;
    if nu > 0.0 {
        let gp = gradient_penalty(g, logits, batch, rng)?;
        penalty = Some(gp);
        let scaled = g.scale(gp, nu);
        loss = g.add(loss, scaled)?;
    }
    Ok(LossParts {
        loss,
        value,
        penalty,
        policy_logits,
        expert_logits,
    })
}

/// `−log(1 − clamp(D, δ, 1 − δ))`.
pub fn surrogate_reward(d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    -math::ln(1.0 - d.clamp(DELTA, 1.0 - DELTA))
}

/// Surrogate rewards for a batch of raw stacked states.
pub fn rewards(disc: &Discriminator, states: &Tensor) -> Result<Vec<f64>> {
    Ok(disc
        .probability(states)?
        .into_iter()
        .map(surrogate_reward)
        .collect())
}

/// Diagnostics of one discriminator step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DiscStep {
    pub loss: f64,
    pub gail_value: f64,
    pub penalty: f64,
    /// Fraction of samples on the correct side of `D = 0.5`.
    pub accuracy: f64,
}

/// Loss gradients of the discriminator on a raw-pixel batch. The penalty is
/// taken with respect to the standardized input.
pub fn discriminator_gradients(
    disc: &Discriminator,
    batch: &DiscBatch,
    nu: f64,
    rng: &mut Rng64,
) -> Result<(GradSet, DiscStep)> {
    let unit = batch.standardized();
    let mut g = Graph::new();
    let b = disc.params.bind(&mut g, true);
    let logits = |g: &mut Graph, z: Var| disc.logits_unit(g, &b, z);
    let parts = loss_parts(&mut g, &logits, &unit, nu, rng)?;
    let right = g.value(parts.policy_logits).data().iter().filter(|&&l| l < 0.0).count()
        + g.value(parts.expert_logits).data().iter().filter(|&&l| l > 0.0).count();
    let accuracy = right as f64 / (2 * unit.len()) as f64;
    let value = g.item(parts.value);
    let penalty = parts.penalty.map_or(0.0, |p| g.item(p));
    let loss = parts.loss;
    let loss_value = g.item(loss);
    if !loss_value.is_finite() {
        return Err(Error::NonFinite(alloc::format!("discriminator loss ({loss_value})")));
    }
    let grads = disc.params.gradients(&mut g, loss, &b)?;
    Ok((
        grads,
        DiscStep {
            loss: loss_value,
            gail_value: value,
            penalty,
            accuracy,
        },
    ))
}

/// One optimizer step on the regularized loss, after advancing the power
/// iterations of every spectrally normalized layer.
pub fn update_discriminator(
    disc: &mut Discriminator,
    opt: &mut Adam,
    batch: &DiscBatch,
    nu: f64,
    rng: &mut Rng64,
) -> Result<DiscStep> {
    disc.advance_power_iteration();
    let (grads, info) = discriminator_gradients(disc, batch, nu, rng)?;
    opt.step(&mut disc.params, &grads)?;
    Ok(info)
}
