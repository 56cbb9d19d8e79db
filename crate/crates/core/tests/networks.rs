//! Network construction, accounting, spectral normalization and gradients
//! of the composed stacks.

use nalgebra::DMatrix;
use relmimic_core::gradcheck::{grad_check, grad_check_multi};
use relmimic_core::math::LN_2PI;
use relmimic_core::nn::{
    average_gradients, build_agent, orthogonal, residual_block, spectral_normalize, AgentConfig,
    DiscConfig, Discriminator, GradSet, ParamSet, Policy, PowerIteration, ValueNet, Variant,
};
use relmimic_core::optim::{Adam, AdamConfig};
use relmimic_core::rng::seeded;
use relmimic_core::{Error, Graph, Result, Tensor, Var};

fn top_singular_value(w: &Tensor) -> f64 {
    let rows = w.shape()[0];
    let cols = w.numel() / rows;
    let m = DMatrix::from_row_slice(rows, cols, w.data());
    m.singular_values().max()
}

fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let shape = g.shape(y).to_vec();
    let r = g.constant(Tensor::rand_uniform(&shape, 0.5, 1.5, &mut seeded(seed ^ 0xfeed)));
    let p = g.mul(y, r)?;
    Ok(g.sum(p))
}

fn pixels(shape: &[usize], seed: u64) -> Tensor {
    Tensor::rand_uniform(shape, 0.0, 255.0, &mut seeded(seed))
}

// ---- residual block ---------------------------------------------------

#[test]
fn residual_block_with_zero_weights_is_identity() {
    let mut ps = ParamSet::new();
    let block = residual_block(&mut ps, 1, "r", 8, 4).unwrap();
    for id in ps.ids().collect::<Vec<_>>() {
        let z = Tensor::zeros(ps.get(id).shape());
        *ps.get_mut(id) = z;
    }
    let x = Tensor::randn(&[2, 8, 5, 5], &mut seeded(2));
    let mut g = Graph::new();
    let b = ps.bind(&mut g, false);
    let xv = g.constant(x.clone());
    let y = block.forward(&mut g, &b, xv).unwrap();
    assert_eq!(g.value(y), &x);
}

#[test]
fn residual_block_maps_zero_to_zero() {
    let mut ps = ParamSet::new();
    let block = residual_block(&mut ps, 3, "r", 8, 8).unwrap();
    let mut g = Graph::new();
    let b = ps.bind(&mut g, false);
    let xv = g.constant(Tensor::zeros(&[1, 8, 4, 4]));
    let y = block.forward(&mut g, &b, xv).unwrap();
    assert!(g.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn residual_block_rejects_wrong_channel_count() {
    let mut ps = ParamSet::new();
    let block = residual_block(&mut ps, 3, "r", 8, 4).unwrap();
    let mut g = Graph::new();
    let b = ps.bind(&mut g, false);
    let xv = g.constant(Tensor::zeros(&[1, 6, 4, 4]));
    let err = block.forward(&mut g, &b, xv).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch { axis: 1, .. }), "{err}");
}

#[test]
fn residual_block_gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut ps = ParamSet::new();
        let block = residual_block(&mut ps, seed, "r", 8, 4).unwrap();
        let x = Tensor::randn(&[1, 8, 5, 5], &mut seeded(seed + 50));
        let f = |g: &mut Graph, xv: Var| {
            let b = ps.bind(g, false);
            let y = block.forward(g, &b, xv)?;
            weighted_sum(g, y, seed)
        };
        worst = worst.max(grad_check(f, &x, 1e-5).unwrap());
        let w = ps.find("r.block.c2.w").unwrap();
        let f = |g: &mut Graph, wv: Var| {
            let b = ps.bind(g, false).with(w, wv);
            let xv = g.constant(x.clone());
            let y = block.forward(g, &b, xv)?;
            weighted_sum(g, y, seed)
        };
        worst = worst.max(grad_check(f, ps.get(w), 1e-5).unwrap());
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

// ---- agent construction and accounting -------------------------------

#[test]
fn conv_depth_is_thirteen_local_fifteen_non_local() {
    let local = build_agent(&AgentConfig::new(4, 84, Variant::Local, 2), 0).unwrap().0;
    let non_local = build_agent(&AgentConfig::new(4, 84, Variant::NonLocal, 2), 0).unwrap().0;
    assert_eq!(local.stats().conv_depth, 13);
    assert_eq!(non_local.stats().conv_depth, 15);
    assert!(!local.has_relational_block());
    assert!(non_local.has_relational_block());
}

#[test]
fn parameter_budget_at_84_pixels_is_near_reference() {
    let (trunk, params) = build_agent(&AgentConfig::new(4, 84, Variant::NonLocal, 2), 0).unwrap();
    let n = trunk.stats().params;
    assert_eq!(n, params.num_params());
    let reference = 457_700.0;
    assert!((n as f64 - reference).abs() / reference < 0.15, "{n}");
}

#[test]
fn non_local_adds_exactly_four_one_by_one_convs() {
    let (local, lp) = build_agent(&AgentConfig::new(4, 84, Variant::Local, 2), 0).unwrap();
    let (non_local, np) = build_agent(&AgentConfig::new(4, 84, Variant::NonLocal, 2), 0).unwrap();
    let extra: Vec<&str> = np
        .names()
        .iter()
        .map(String::as_str)
        .filter(|n| lp.find(n).is_none())
        .collect();
    assert_eq!(extra, ["trunk.rel.q", "trunk.rel.k", "trunk.rel.v", "trunk.rel.e"]);
    let conv_params: usize = extra.iter().map(|n| np.get(np.find(n).unwrap()).numel()).sum();
    // Stage-one width is 8 after channel pooling: three [4, 8] maps and one [8, 4].
    assert_eq!(conv_params, 4 * 8 * 4);
    assert_eq!(non_local.stats().params - local.stats().params, conv_params);
}

#[test]
fn zero_input_gives_finite_feature_vector() {
    for variant in [Variant::Local, Variant::NonLocal] {
        let (trunk, ps) = build_agent(&AgentConfig::new(4, 32, variant, 2), 7).unwrap();
        let mut g = Graph::new();
        let b = ps.bind(&mut g, false);
        let x = g.constant(Tensor::zeros(&[1, 4, 32, 32]));
        let y = trunk.forward(&mut g, &b, x).unwrap();
        assert_eq!(g.shape(y), &[1, 256]);
        assert!(g.value(y).is_finite());
    }
}

#[test]
fn invalid_configurations_report_the_failing_row() {
    let mut cfg = AgentConfig::new(4, 0, Variant::Local, 2);
    assert!(matches!(build_agent(&cfg, 0), Err(Error::Build { row: 0, .. })));
    cfg.resolution = 32;
    cfg.channels = vec![6, 4, 2];
    // Six stem channels pool to three, which cannot be split in half.
    cfg.variant = Variant::NonLocal;
    assert!(matches!(build_agent(&cfg, 0), Err(Error::Build { row: 5, .. })));
    cfg.variant = Variant::Local;
    assert!(build_agent(&cfg, 0).is_ok());
}

#[test]
fn zero_output_embedding_matches_local_agent_bit_for_bit() {
    for res in [32, 84] {
        let lcfg = AgentConfig::new(4, res, Variant::Local, 2);
        let ncfg = AgentConfig::new(4, res, Variant::NonLocal, 2);
        let local = Policy::new(&lcfg, 11).unwrap();
        let non_local = Policy::new(&ncfg, 11).unwrap();
        for (name, t) in local.params.iter() {
            assert_eq!(non_local.params.get(non_local.params.find(name).unwrap()), t, "{name}");
        }
        let x = pixels(&[2, 4, res, res], 5);
        assert_eq!(local.evaluate(&x).unwrap(), non_local.evaluate(&x).unwrap());
    }
}

#[test]
fn networks_are_pure_functions() {
    let cfg = AgentConfig::new(4, 32, Variant::NonLocal, 2);
    let v = ValueNet::new(&cfg, 3).unwrap();
    let x = pixels(&[3, 4, 32, 32], 9);
    let a = v.evaluate(&x).unwrap();
    let b = v.evaluate(&x).unwrap();
    assert_eq!(a.shape(), &[3]);
    assert!(a.is_finite());
    assert_eq!(a.data(), b.data());
}

#[test]
fn policy_and_value_parameters_are_disjoint() {
    let cfg = AgentConfig::new(4, 32, Variant::NonLocal, 2);
    let mut policy = Policy::new(&cfg, 1).unwrap();
    let value = ValueNet::new(&cfg, 1).unwrap();
    assert!(policy.params.names().iter().all(|n| value.params.find(n).is_none()));
    let x = pixels(&[2, 4, 32, 32], 2);
    let before = value.evaluate(&x).unwrap();
    for id in policy.params.ids().collect::<Vec<_>>() {
        policy.params.get_mut(id).data_mut().iter_mut().for_each(|w| *w += 1.0);
    }
    assert_eq!(value.evaluate(&x).unwrap(), before);
}

#[test]
fn log_prob_of_mean_action_is_gaussian_peak() {
    let mut cfg = AgentConfig::new(2, 32, Variant::Local, 3);
    cfg.init_log_std = -0.7;
    let policy = Policy::new(&cfg, 4).unwrap();
    let x = pixels(&[2, 2, 32, 32], 6);
    let mut g = Graph::new();
    let b = policy.params.bind(&mut g, false);
    let xv = g.constant(x);
    let out = policy.forward(&mut g, &b, xv).unwrap();
    let mean = g.value(out.mean).clone();
    let a = g.constant(mean);
    let lp = out.log_prob(&mut g, a).unwrap();
    let want = 3.0 * (0.7 - 0.5 * LN_2PI);
    for &v in g.value(lp).data() {
        assert!((v - want).abs() < 1e-12);
    }
}

#[test]
fn log_std_is_clamped() {
    let mut cfg = AgentConfig::new(1, 32, Variant::Local, 2);
    cfg.init_log_std = 7.0;
    let policy = Policy::new(&cfg, 4).unwrap();
    let (_, ls) = policy.evaluate(&Tensor::zeros(&[1, 1, 32, 32])).unwrap();
    assert_eq!(ls.data(), &[2.0, 2.0]);
    cfg.init_log_std = -9.0;
    let policy = Policy::new(&cfg, 4).unwrap();
    let (_, ls) = policy.evaluate(&Tensor::zeros(&[1, 1, 32, 32])).unwrap();
    assert_eq!(ls.data(), &[-5.0, -5.0]);
}

fn tiny_agent(variant: Variant) -> AgentConfig {
    let mut cfg = AgentConfig::new(2, 8, variant, 2);
    cfg.channels = vec![8, 2, 2];
    cfg.hidden = 6;
    cfg
}

#[test]
fn non_local_agent_gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut policy = Policy::new(&tiny_agent(Variant::NonLocal), seed).unwrap();
        // A nonzero output embedding so the attention path carries signal.
        let e = policy.params.find("policy.rel.e").unwrap();
        let shape = policy.params.get(e).shape().to_vec();
        *policy.params.get_mut(e) = Tensor::randn(&shape, &mut seeded(seed));
        let x = pixels(&[2, 2, 8, 8], seed + 100);
        let loss = |g: &mut Graph, b: &relmimic_core::nn::Bound, xv: Var| {
            let out = policy.forward(g, b, xv)?;
            weighted_sum(g, out.mean, seed)
        };
        let f = |g: &mut Graph, xv: Var| {
            let b = policy.params.bind(g, false);
            loss(g, &b, xv)
        };
        worst = worst.max(grad_check(f, &x, 1e-3).unwrap());
        for name in ["policy.stem.w", "policy.rel.q", "policy.rel.e", "policy.res4.c3.w", "policy.fc.w"] {
            let id = policy.params.find(name).unwrap();
            let f = |g: &mut Graph, wv: Var| {
                let b = policy.params.bind(g, false).with(id, wv);
                let xv = g.constant(x.clone());
                loss(g, &b, xv)
            };
            let err = grad_check(f, policy.params.get(id), 1e-6).unwrap();
            assert!(err < 1e-4, "seed {seed} {name}: {err}");
        }
    }
    assert!(worst < 1e-4, "input gradient relative error {worst}");
}

// ---- discriminator ------------------------------------------------------

#[test]
fn discriminator_has_two_relational_blocks() {
    let d = Discriminator::new(&DiscConfig::new(4, 32, true), 0).unwrap();
    assert_eq!(d.relational_blocks(), 2);
    let d = Discriminator::new(&DiscConfig::new(4, 32, false), 0).unwrap();
    assert_eq!(d.relational_blocks(), 0);
}

#[test]
fn discriminator_rejects_too_small_input_at_last_conv() {
    let err = Discriminator::new(&DiscConfig::new(4, 16, true), 0).unwrap_err();
    assert!(matches!(err, Error::Build { row: 8, .. }), "{err}");
}

#[test]
fn untrained_discriminator_gives_one_half_everywhere() {
    let d = Discriminator::new(&DiscConfig::new(4, 32, true), 0).unwrap();
    let (w, b) = d.logit_layer();
    assert!(d.params.get(w).data().iter().all(|&x| x == 0.0));
    assert_eq!(d.params.get(b).data(), &[0.0]);
    let x = pixels(&[5, 4, 32, 32], 1);
    assert!(d.probability(&x).unwrap().iter().all(|&p| p == 0.5));
}

#[test]
fn log_d_has_finite_input_gradient() {
    let mut d = Discriminator::new(&DiscConfig::new(4, 32, true), 2).unwrap();
    let (w, _) = d.logit_layer();
    let shape = d.params.get(w).shape().to_vec();
    *d.params.get_mut(w) = Tensor::randn(&shape, &mut seeded(2));
    for seed in 0..5 {
        let mut g = Graph::new();
        let b = d.params.bind(&mut g, false);
        let x = g.param(pixels(&[3, 4, 32, 32], seed));
        let l = d.logits(&mut g, &b, x).unwrap();
        let neg = g.neg(l);
        let sp = g.softplus(neg);
        let log_d = g.neg(sp);
        let s = g.sum(log_d);
        let grad = g.gradients(s, &[x]).unwrap();
        assert!(grad[0].is_finite());
        assert!(grad[0].norm() > 0.0);
    }
}

fn tiny_disc(seed: u64) -> Discriminator {
    let mut cfg = DiscConfig::new(1, 32, true);
    cfg.channels = vec![2, 2, 2, 2, 2];
    cfg.hidden = 4;
    let mut d = Discriminator::new(&cfg, seed).unwrap();
    // Zero-initialized weights would leave parts of the network inert.
    for name in ["disc.rel1.e", "disc.rel2.e", "disc.logit.w"] {
        let id = d.params.find(name).unwrap();
        let shape = d.params.get(id).shape().to_vec();
        *d.params.get_mut(id) = Tensor::randn(&shape, &mut seeded(seed + 7));
    }
    for _ in 0..3 {
        d.advance_power_iteration();
    }
    d
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    for seed in 0..20 {
        let d = tiny_disc(seed);
        let x = Tensor::rand_uniform(&[1, 1, 32, 32], 0.0, 1.0, &mut seeded(seed));
        let f = |g: &mut Graph, z: Var| {
            let b = d.params.bind(g, false);
            let l = d.logits_unit(g, &b, z)?;
            weighted_sum(g, l, seed)
        };
        let err = grad_check_multi(f, &x, &[1e-4, 1e-5]).unwrap();
        assert!(err < 1e-4, "seed {seed} input: {err}");
        for name in ["disc.conv1.w", "disc.rel1.q", "disc.rel2.e", "disc.fc.w", "disc.logit.w"] {
            let id = d.params.find(name).unwrap();
            let f = |g: &mut Graph, wv: Var| {
                let b = d.params.bind(g, false).with(id, wv);
                let z = g.constant(x.clone());
                let l = d.logits_unit(g, &b, z)?;
                weighted_sum(g, l, seed)
            };
            let err = grad_check_multi(f, d.params.get(id), &[1e-4, 1e-5]).unwrap();
            assert!(err < 1e-4, "seed {seed} {name}: {err}");
        }
    }
}

// ---- spectral normalization ---------------------------------------------

#[test]
fn diagonal_matrix_normalizes_to_unit_top_singular_value() {
    let w = Tensor::new(&[2, 2], vec![3.0, 0.0, 0.0, 1.0]).unwrap();
    let mut u = vec![0.6, 0.8];
    let mut out = w.clone();
    for _ in 0..50 {
        out = spectral_normalize(&w, &mut u);
    }
    assert!((top_singular_value(&out) - 1.0).abs() < 1e-6);
    assert!((out.data()[0] - 1.0).abs() < 1e-6);
}

#[test]
fn orthonormal_matrix_is_unchanged() {
    let w = orthogonal(6, 6, 1.0, &mut seeded(3));
    let mut u: Vec<f64> = Tensor::randn(&[6], &mut seeded(4)).into_data();
    let out = spectral_normalize(&w, &mut u);
    assert!(out.max_abs_diff(&w) < 1e-6);
}

#[test]
fn zero_matrix_passes_through() {
    let w = Tensor::zeros(&[3, 4]);
    let mut u = vec![1.0, 0.0, 0.0];
    assert_eq!(spectral_normalize(&w, &mut u), w);
}

#[test]
fn random_matrix_converges_against_svd_oracle() {
    for seed in 0..10 {
        let w = Tensor::randn(&[8, 8], &mut seeded(seed));
        let mut u: Vec<f64> = Tensor::randn(&[8], &mut seeded(seed + 100)).into_data();
        let mut out = w.clone();
        for _ in 0..500 {
            out = spectral_normalize(&w, &mut u);
        }
        let s = top_singular_value(&out);
        assert!((0.99..=1.01).contains(&s), "seed {seed}: {s}");
    }
}

#[test]
fn conv_weights_are_normalized_as_flattened_matrices() {
    let w = Tensor::randn(&[4, 3, 2, 2], &mut seeded(8));
    let mut p = PowerIteration::new(&w, &mut seeded(9));
    for _ in 0..200 {
        p.step(&w);
    }
    let s = p.sigma(&w);
    assert!((s - top_singular_value(&w)).abs() < 1e-8);
}

// ---- gradient averaging and the optimizer -------------------------------

fn grad_set(names: &[&str], seed: u64) -> GradSet {
    let mut rng = seeded(seed);
    GradSet::new(
        names.iter().map(|s| s.to_string()).collect(),
        names.iter().map(|_| Tensor::randn(&[3, 2], &mut rng)).collect(),
    )
    .unwrap()
}

#[test]
fn averaging_one_set_is_identity() {
    let g = grad_set(&["a", "b"], 1);
    assert_eq!(average_gradients(&[g.clone()]).unwrap(), g);
}

#[test]
fn opposite_gradients_cancel() {
    let g = grad_set(&["a", "b"], 2);
    let mut neg = g.clone();
    neg.scale(-1.0);
    let avg = average_gradients(&[g, neg]).unwrap();
    assert!(avg.grads().iter().all(|t| t.data().iter().all(|&x| x == 0.0)));
}

#[test]
fn average_matches_loop_oracle() {
    let sets: Vec<GradSet> = (0..4).map(|s| grad_set(&["a", "b", "c"], 10 + s)).collect();
    let avg = average_gradients(&sets).unwrap();
    for p in 0..3 {
        for i in 0..6 {
            let mut acc = 0.0;
            for s in &sets {
                acc += s.grads()[p].data()[i];
            }
            assert!((avg.grads()[p].data()[i] - acc / 4.0).abs() < 1e-15);
        }
    }
}

#[test]
fn averaging_rejects_mismatched_names() {
    let err = average_gradients(&[grad_set(&["a", "b"], 1), grad_set(&["a", "c"], 2)]).unwrap_err();
    assert!(err.to_string().contains("parameter"), "{err}");
    assert!(average_gradients(&[grad_set(&["a"], 1), grad_set(&["a", "b"], 2)]).is_err());
    assert!(average_gradients(&[]).is_err());
}

#[test]
fn adam_with_zero_learning_rate_keeps_parameters() {
    let mut ps = ParamSet::new();
    ps.add("a", Tensor::randn(&[3, 2], &mut seeded(1)));
    let before = ps.clone();
    let mut opt = Adam::new(AdamConfig::new(0.0), &ps);
    opt.step(&mut ps, &grad_set(&["a"], 3)).unwrap();
    assert_eq!(ps, before);
}

#[test]
fn adam_clips_global_norm_and_descends() {
    let mut ps = ParamSet::new();
    ps.add("a", Tensor::full(&[2], 1.0));
    let mut opt = Adam::new(AdamConfig::new(0.1).with_clip(0.5), &ps);
    for _ in 0..100 {
        let grads = GradSet::new(vec!["a".into()], vec![ps.values()[0].map(|x| 200.0 * x)]).unwrap();
        opt.step(&mut ps, &grads).unwrap();
    }
    assert!(ps.values()[0].data().iter().all(|x| x.abs() < 0.2));
}
