//! Advantage estimation, the clipped surrogate, value regression and the
//! policy/value update.

use proptest::prelude::*;
use relmimic_core::gradcheck::numeric_gradient;
use relmimic_core::math;
use relmimic_core::nn::{AgentConfig, Policy, ValueNet, Variant};
use relmimic_core::ppo::{
    compute_advantages, normalize_advantages, policy_gradients, ppo_policy_loss, update_policy_value,
    value_loss, PpoBatch, PpoConfig, PpoOptimizers, RolloutBuffer, StepEnd, Transition,
};
use relmimic_core::rng::{self, seeded};
use relmimic_core::{Graph, Tensor};

fn step(reward: f64, value: f64, end: StepEnd) -> Transition {
    Transition {
        state: vec![0; 4],
        action: vec![0.0],
        log_prob: 0.0,
        next_state: vec![0; 4],
        reward,
        value,
        end,
    }
}

fn buffer(steps: Vec<Transition>) -> RolloutBuffer {
    let mut b = RolloutBuffer::new([1, 2, 2], 1);
    for t in steps {
        b.push(t).unwrap();
    }
    b
}

// ---- advantages -----------------------------------------------------

#[test]
fn empty_buffer_is_rejected() {
    assert!(compute_advantages(&buffer(vec![]), 0.99, 0.95).is_err());
}

#[test]
fn dangling_continuation_is_rejected() {
    let b = buffer(vec![step(1.0, 0.0, StepEnd::Continue)]);
    assert!(compute_advantages(&b, 0.99, 0.95).is_err());
}

#[test]
fn zero_discount_gives_one_step_advantages() {
    let mut r = seeded(1);
    let steps: Vec<_> = (0..12)
        .map(|i| {
            let end = if i == 11 { StepEnd::Truncated { bootstrap: 3.0 } } else { StepEnd::Continue };
            step(rng::normal(&mut r), rng::normal(&mut r), end)
        })
        .collect();
    let b = buffer(steps.clone());
    let adv = compute_advantages(&b, 0.0, 0.95).unwrap();
    for (a, t) in adv.advantages.iter().zip(&steps) {
        assert_eq!(*a, t.reward - t.value);
    }
}

#[test]
fn full_trace_matches_monte_carlo_returns() {
    let gamma = 0.97;
    let mut r = seeded(2);
    let mut steps = Vec::new();
    // two episodes, the second cut short with a bootstrap value
    for (len, last) in [(15, StepEnd::Terminal), (9, StepEnd::Truncated { bootstrap: 2.5 })] {
        for i in 0..len {
            let end = if i + 1 == len { last } else { StepEnd::Continue };
            steps.push(step(rng::uniform(&mut r, -1.0, 2.0), rng::normal(&mut r), end));
        }
    }
    let adv = compute_advantages(&buffer(steps.clone()), gamma, 1.0).unwrap();
    for i in 0..steps.len() {
        let mut ret = 0.0;
        let mut disc = 1.0;
        for t in &steps[i..] {
            ret += disc * t.reward;
            disc *= gamma;
            match t.end {
                StepEnd::Continue => {}
                StepEnd::Terminal => break,
                StepEnd::Truncated { bootstrap } => {
                    ret += disc * bootstrap;
                    break;
                }
            }
        }
        assert!((adv.advantages[i] - (ret - steps[i].value)).abs() < 1e-10, "step {i}");
        assert!((adv.returns[i] - ret).abs() < 1e-10);
    }
}

#[test]
fn exact_values_give_zero_advantages() {
    let gamma = 0.99;
    let v = 1.0 / (1.0 - gamma);
    let mut steps: Vec<_> = (0..200).map(|_| step(1.0, v, StepEnd::Continue)).collect();
    steps.last_mut().unwrap().end = StepEnd::Truncated { bootstrap: v };
    let adv = compute_advantages(&buffer(steps), gamma, 0.95).unwrap();
    assert!(adv.advantages.iter().all(|a| a.abs() < 1e-9));
}

#[test]
fn terminal_steps_isolate_episodes() {
    let gamma = 0.9;
    let first: Vec<_> = [(1.0, 0.5), (0.0, 0.2), (2.0, 1.0)]
        .iter()
        .enumerate()
        .map(|(i, &(r, v))| step(r, v, if i == 2 { StepEnd::Terminal } else { StepEnd::Continue }))
        .collect();
    let alone = compute_advantages(&buffer(first.clone()), gamma, 0.95).unwrap();
    for second_reward in [-100.0, 0.0, 100.0] {
        let mut both = first.clone();
        both.push(step(second_reward, 7.0, StepEnd::Continue));
        both.push(step(second_reward, -3.0, StepEnd::Terminal));
        let joint = compute_advantages(&buffer(both), gamma, 0.95).unwrap();
        assert_eq!(&joint.advantages[..3], &alone.advantages[..]);
    }
}

#[test]
fn buffer_flush_empties_it() {
    let mut b = buffer(vec![step(1.0, 0.0, StepEnd::Terminal)]);
    assert_eq!(b.len(), 1);
    b.flush();
    assert!(b.is_empty());
}

#[test]
fn buffer_rejects_misshapen_transitions() {
    let mut b = RolloutBuffer::new([1, 2, 2], 1);
    let mut t = step(0.0, 0.0, StepEnd::Terminal);
    t.state = vec![0; 3];
    assert!(b.push(t).is_err());
    let mut t = step(0.0, 0.0, StepEnd::Terminal);
    t.action = vec![0.0, 1.0];
    assert!(b.push(t).is_err());
}

// ---- losses ----------------------------------------------------------

fn surrogate(new: &[f64], old: &[f64], adv: &[f64], clip: f64) -> f64 {
    let mut g = Graph::new();
    let lp = g.constant(Tensor::new(&[new.len()], new.to_vec()).unwrap());
    let l = ppo_policy_loss(&mut g, lp, old, adv, clip).unwrap();
    g.item(l)
}

#[test]
fn on_policy_loss_is_negative_mean_advantage() {
    let lp = [-1.0, 0.3, -2.5, 0.0];
    let adv = [1.0, -2.0, 0.5, 3.0];
    let l = surrogate(&lp, &lp, &adv, 0.2);
    assert!((l + adv.iter().sum::<f64>() / 4.0).abs() < 1e-15);
}

#[test]
fn large_ratio_with_positive_advantage_is_clipped() {
    let l = surrogate(&[math::ln(2.0)], &[0.0], &[3.0], 0.2);
    assert!((l + 1.2 * 3.0).abs() < 1e-12);
    // with a negative advantage the unclipped term is the minimum
    let l = surrogate(&[math::ln(2.0)], &[0.0], &[-3.0], 0.2);
    assert!((l - 2.0 * 3.0).abs() < 1e-12);
}

#[test]
fn surrogate_matches_per_sample_oracle() {
    for seed in 0..10 {
        let mut r = seeded(seed);
        let n = 50;
        let new: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
        let old: Vec<f64> = new.iter().map(|x| x + 0.4 * rng::normal(&mut r)).collect();
        let adv: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
        let mut oracle = 0.0;
        for i in 0..n {
            let ratio = (new[i] - old[i]).exp();
            let clipped = ratio.clamp(0.8, 1.2);
            oracle += (ratio * adv[i]).min(clipped * adv[i]);
        }
        oracle = -oracle / n as f64;
        assert!((surrogate(&new, &old, &adv, 0.2) - oracle).abs() < 1e-12);
    }
}

#[test]
fn surrogate_rejects_mismatched_lengths() {
    let mut g = Graph::new();
    let lp = g.constant(Tensor::zeros(&[3]));
    assert!(ppo_policy_loss(&mut g, lp, &[0.0; 2], &[0.0; 3], 0.2).is_err());
}

fn mse(v: &[f64], t: &[f64]) -> f64 {
    let mut g = Graph::new();
    let vv = g.constant(Tensor::new(&[v.len()], v.to_vec()).unwrap());
    let l = value_loss(&mut g, vv, t).unwrap();
    g.item(l)
}

#[test]
fn value_loss_cases() {
    let t = [1.0, -2.0, 0.5];
    assert_eq!(mse(&t, &t), 0.0);
    let shifted: Vec<f64> = t.iter().map(|x| x + 1.5).collect();
    assert!((mse(&shifted, &t) - 2.25).abs() < 1e-12);
    let mut r = seeded(4);
    let v: Vec<f64> = (0..40).map(|_| rng::normal(&mut r)).collect();
    let t: Vec<f64> = (0..40).map(|_| rng::normal(&mut r)).collect();
    let mut oracle = 0.0;
    for i in 0..40 {
        oracle += (v[i] - t[i]) * (v[i] - t[i]);
    }
    assert!((mse(&v, &t) - oracle / 40.0).abs() < 1e-12);
}

#[test]
fn normalized_advantages_have_zero_mean_unit_std() {
    let mut r = seeded(5);
    let mut a: Vec<f64> = (0..64).map(|_| 3.0 + 10.0 * rng::normal(&mut r)).collect();
    normalize_advantages(&mut a);
    let mean = a.iter().sum::<f64>() / 64.0;
    let std = (a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 64.0).sqrt();
    assert!(mean.abs() < 1e-10);
    assert!((std - 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn clipping_is_inactive_inside_the_trust_region(
        ratios in prop::collection::vec(0.8f64..1.2, 1..30),
        seed in 0u64..1000,
    ) {
        let mut r = seeded(seed);
        let old: Vec<f64> = ratios.iter().map(|_| rng::normal(&mut r)).collect();
        let new: Vec<f64> = old.iter().zip(&ratios).map(|(o, q)| o + q.ln()).collect();
        let adv: Vec<f64> = ratios.iter().map(|_| rng::normal(&mut r)).collect();
        let plain = -new.iter().zip(&old).zip(&adv)
            .map(|((n, o), a)| (n - o).exp() * a).sum::<f64>() / ratios.len() as f64;
        prop_assert!((surrogate(&new, &old, &adv, 0.2) - plain).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_standardizing(a in prop::collection::vec(-1e3f64..1e3, 2..80)) {
        let mut a = a;
        let spread = a.iter().cloned().fold(f64::MIN, f64::max) - a.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-3);
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-10);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }
}

// ---- updates ---------------------------------------------------------

fn tiny(action_dim: usize) -> AgentConfig {
    let mut cfg = AgentConfig::new(1, 8, Variant::Local, action_dim);
    cfg.channels = vec![4, 2, 2];
    cfg.hidden = 8;
    cfg
}

fn random_batch(policy: &Policy, n: usize, seed: u64) -> PpoBatch {
    let mut r = seeded(seed);
    let states = Tensor::rand_uniform(&[n, 1, 8, 8], 0.0, 255.0, &mut r);
    let actions = Tensor::randn(&[n, policy.action_dim()], &mut r);
    PpoBatch {
        states,
        actions,
        log_probs: (0..n).map(|_| -2.0 + 0.3 * rng::normal(&mut r)).collect(),
        advantages: (0..n).map(|_| rng::normal(&mut r)).collect(),
        returns: (0..n).map(|_| rng::normal(&mut r)).collect(),
    }
}

#[test]
fn zero_learning_rates_leave_parameters_unchanged() {
    let cfg = PpoConfig {
        policy_lr: 0.0,
        value_lr: 0.0,
        ..PpoConfig::default()
    };
    let mut policy = Policy::new(&tiny(2), 1).unwrap();
    let mut value = ValueNet::new(&tiny(2), 1).unwrap();
    let (p0, v0) = (policy.params.clone(), value.params.clone());
    let mut opt = PpoOptimizers::new(&cfg, &policy, &value);
    for s in 0..3 {
        let batch = random_batch(&policy, 8, s);
        update_policy_value(&mut policy, &mut value, &mut opt, &batch, &cfg).unwrap();
    }
    assert_eq!(policy.params, p0);
    assert_eq!(value.params, v0);
}

#[test]
fn policy_gradient_matches_finite_differences() {
    let cfg = PpoConfig::default();
    for seed in 0..5 {
        let mut policy = Policy::new(&tiny(2), seed).unwrap();
        // a unit-scale mean head so the trunk's gradients rise above round-off
        let head = policy.params.find("policy.mean.w").unwrap();
        *policy.params.get_mut(head) = Tensor::randn(&[2, 8], &mut seeded(seed + 99));
        let mut batch = random_batch(&policy, 6, seed + 50);
        // old log-probs near the current ones so ratios straddle the clip range
        let (means, log_std) = policy.evaluate(&batch.states).unwrap();
        let mut r = seeded(seed + 7);
        for (i, lp) in batch.log_probs.iter_mut().enumerate() {
            let mut cur = 0.0;
            for j in 0..2 {
                let s = log_std.data()[j];
                let z = (batch.actions.data()[2 * i + j] - means.data()[2 * i + j]) / s.exp();
                cur += -0.5 * z * z - s - 0.5 * math::LN_2PI;
            }
            *lp = cur + 0.25 * rng::normal(&mut r);
        }
        let (grads, _) = policy_gradients(&policy, &batch, &cfg).unwrap();
        for name in ["policy.log_std", "policy.mean.w", "policy.mean.b", "policy.fc.w", "policy.stem.w"] {
            let id = policy.params.find(name).unwrap();
            let loss_at = |w: &Tensor| {
                let mut p = policy.clone();
                *p.params.get_mut(id) = w.clone();
                let (_, s) = policy_gradients(&p, &batch, &cfg)?;
                Ok(s.policy_loss - cfg.entropy_coef * s.entropy)
            };
            let w = policy.params.get(id);
            let coarse = numeric_gradient(loss_at, w, 1e-5).unwrap();
            let fine = numeric_gradient(loss_at, w, 1e-6).unwrap();
            let analytic = &grads.grads()[id.index()];
            // coordinates below 1e-5 of the tensor's largest gradient
            // are compared against that floor instead of their own size
            let floor = 1e-5 * analytic.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(floor).max(1e-12);
            for i in 0..w.numel() {
                let a = analytic.data()[i];
                let err = rel(a, coarse.data()[i]).min(rel(a, fine.data()[i]));
                assert!(err < 1e-4, "seed {seed} {name}[{i}]: {err}");
            }
        }
    }
}

#[test]
fn quadratic_bandit_mean_converges_to_zero() {
    // One-step episodes with reward −a²; the optimal mean action is 0.
    let cfg = PpoConfig {
        policy_lr: 1e-2,
        value_lr: 1e-2,
        ..PpoConfig::default()
    };
    let mut policy = Policy::new(&tiny(1), 3).unwrap();
    let mut value = ValueNet::new(&tiny(1), 3).unwrap();
    let bias = policy.params.find("policy.mean.b").unwrap();
    *policy.params.get_mut(bias) = Tensor::full(&[1], 1.5);
    let mut opt = PpoOptimizers::new(&cfg, &policy, &value);
    let zero = Tensor::zeros(&[1, 1, 8, 8]);
    let mut r = seeded(9);
    let mean = |p: &Policy| p.evaluate(&zero).unwrap().0.data()[0];
    assert!(mean(&policy).abs() > 1.0);
    let n = 32;
    for _ in 0..500 {
        let mu = mean(&policy);
        let std = math::exp(policy.evaluate(&zero).unwrap().1.data()[0]);
        let v = value.evaluate(&zero).unwrap().data()[0];
        let mut buf = RolloutBuffer::new([1, 8, 8], 1);
        for _ in 0..n {
            let a = mu + std * rng::normal(&mut r);
            let z = (a - mu) / std;
            buf.push(Transition {
                state: vec![0; 64],
                action: vec![a],
                log_prob: -0.5 * z * z - std.ln() - 0.5 * math::LN_2PI,
                next_state: vec![0; 64],
                reward: -a * a,
                value: v,
                end: StepEnd::Terminal,
            })
            .unwrap();
        }
        let adv = compute_advantages(&buf, cfg.gamma, cfg.lambda).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let batch = buf.minibatch(&idx, &adv, true).unwrap();
        update_policy_value(&mut policy, &mut value, &mut opt, &batch, &cfg).unwrap();
    }
    let mu = mean(&policy);
    assert!(mu.abs() < 0.1, "final mean {mu}");
}
