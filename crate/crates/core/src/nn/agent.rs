use alloc::vec;
use alloc::vec::Vec;

use super::layers::{Builder, Conv, Dense, LayerNorm, NetStats, Pool, RelationalLayer, ResidualBlock};
use super::params::{Bound, ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::math;
use crate::tensor::Tensor;

/// Perception stack flavor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Local,
    NonLocal,
}

/// Agent trunk hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    /// Frames per stacked state.
    pub k: usize,
    /// Color planes per frame.
    pub colors: usize,
    /// Input side length in pixels.
    pub resolution: usize,
    pub variant: Variant,
    /// `[stem, stage-one bottleneck, stage-two bottleneck]`. Stage widths
    /// follow from channel pooling of the stem output.
    pub channels: Vec<usize>,
    pub action_dim: usize,
    /// Width of the final dense layer.
    pub hidden: usize,
    /// Initial state-independent log standard deviation of the policy.
    pub init_log_std: f64,
}

impl AgentConfig {
    pub fn new(k: usize, resolution: usize, variant: Variant, action_dim: usize) -> Self {
        AgentConfig {
            k,
            colors: 1,
            resolution,
            variant,
            channels: vec![16, 8, 4],
            action_dim,
            hidden: 256,
            init_log_std: -0.5,
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.k * self.colors, self.resolution, self.resolution]
    }
}

/// Shared perception stack: pixels `[N, k·colors, R, R]` in `0..=255` to
/// `[N, hidden]` features.
#[derive(Clone, Debug)]
pub struct Trunk {
    stem: Conv,
    pool1: Pool,
    res1: ResidualBlock,
    relational: Option<RelationalLayer>,
    res2: ResidualBlock,
    pool2: Pool,
    res3: ResidualBlock,
    res4: ResidualBlock,
    dense: Dense,
    norm: LayerNorm,
    input: [usize; 3],
    stats: NetStats,
}

impl Trunk {
    pub(crate) fn build(cfg: &AgentConfig, params: &mut ParamSet, seed: u64, prefix: &str) -> Result<Self> {
        let row0 = |msg: &str| Error::Build {
            row: 0,
            msg: msg.into(),
        };
        if cfg.k == 0 || cfg.colors == 0 {
            return Err(row0("stacked frame count and color planes must be positive"));
        }
        if cfg.resolution == 0 {
            return Err(row0("resolution must be positive"));
        }
        let [stem, b1, b2] = match *cfg.channels {
            [a, b, c] if a > 0 && b > 0 && c > 0 => [a, b, c],
            _ => return Err(row0("channel schedule needs three positive widths")),
        };
        let start = params.num_params();
        let mut b = Builder::new(params, seed, prefix, cfg.input_shape());
        b.row = 2;
        let stem = b.conv("stem", stem, 7, 2, 3, true)?;
        b.row = 3;
        let pool1 = b.pool([3, 3, 3], [2, 2, 2], [1, 1, 1])?;
        b.row = 4;
        let res1 = b.residual("res1", b1)?;
        let relational = match cfg.variant {
            Variant::Local => None,
            Variant::NonLocal => {
                b.row = 5;
                Some(b.relational("rel")?)
            }
        };
        b.row = 6;
        let res2 = b.residual("res2", b1)?;
        b.row = 7;
        let pool2 = b.pool([3, 1, 1], [2, 1, 1], [1, 0, 0])?;
        b.row = 8;
        let res3 = b.residual("res3", b2)?;
        b.row = 9;
        let res4 = b.residual("res4", b2)?;
        b.row = 10;
        b.flatten();
        let dense = b.dense("fc", cfg.hidden, core::f64::consts::SQRT_2)?;
        let norm = b.layer_norm("fc.norm")?;
        let mut stats = b.finish();
        stats.params -= start;
        Ok(Trunk {
            stem,
            pool1,
            res1,
            relational,
            res2,
            pool2,
            res3,
            res4,
            dense,
            norm,
            input: cfg.input_shape(),
            stats,
        })
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    pub fn has_relational_block(&self) -> bool {
        self.relational.is_some()
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        check_input(g, x, self.input)?;
        let n = g.shape(x)[0];
        let h = g.scale(x, 1.0 / 255.0);
        let h = self.stem.forward(g, b, h)?;
        let h = g.relu(h);
        let h = self.pool1.forward(g, h)?;
        let mut h = self.res1.forward(g, b, h)?;
        if let Some(r) = &self.relational {
            h = r.forward(g, b, h)?;
        }
        let h = self.res2.forward(g, b, h)?;
        let h = g.relu(h);
        let h = self.pool2.forward(g, h)?;
        let h = self.res3.forward(g, b, h)?;
        let h = self.res4.forward(g, b, h)?;
        let h = g.relu(h);
        let f: usize = g.shape(h)[1..].iter().product();
        let h = g.reshape(h, &[n, f])?;
        let h = self.dense.forward(g, b, h)?;
        let h = self.norm.forward(g, b, h)?;
        Ok(g.relu(h))
    }
}

pub(crate) fn check_input(g: &Graph, x: Var, expect: [usize; 3]) -> Result<()> {
    let s = g.shape(x);
    if s.len() != 4 {
        return Err(Error::Rank {
            op: "network input",
            expected: 4,
            found: s.to_vec(),
        });
    }
    for a in 0..3 {
        if s[a + 1] != expect[a] {
            return Err(Error::ShapeMismatch {
                op: "network input",
                axis: a + 1,
                expected: expect[a],
                found: s[a + 1],
            });
        }
    }
    Ok(())
}

/// Standalone agent trunk with its own parameters (used for accounting).
pub fn build_agent(cfg: &AgentConfig, seed: u64) -> Result<(Trunk, ParamSet)> {
    let mut params = ParamSet::new();
    let trunk = Trunk::build(cfg, &mut params, seed, "trunk")?;
    Ok((trunk, params))
}

/// Diagonal Gaussian over actions.
#[derive(Clone, Copy, Debug)]
pub struct PolicyOutput {
    /// `[N, A]`
    pub mean: Var,
    /// `[A]`, already clamped.
    pub log_std: Var,
}

impl PolicyOutput {
    pub const LOG_STD_MIN: f64 = -5.0;
    pub const LOG_STD_MAX: f64 = 2.0;

    /// Log-density of `actions` `[N, A]`, summed over dimensions: `[N]`.
    pub fn log_prob(&self, g: &mut Graph, actions: Var) -> Result<Var> {
        let z = g.sub(actions, self.mean)?;
        let inv = g.neg(self.log_std);
        let inv = g.exp(inv);
        let z = g.mul(z, inv)?;
        let sq = g.square(z);
        let quad = g.scale(sq, -0.5);
        let norm = g.offset(self.log_std, 0.5 * math::LN_2PI);
        let per = g.sub(quad, norm)?;
        let n = g.shape(per)[0];
        let s = g.sum_last(per)?;
        g.reshape(s, &[n])
    }

    /// Entropy of the Gaussian (state independent): scalar.
    pub fn entropy(&self, g: &mut Graph) -> Var {
        let a = g.shape(self.log_std)[0] as f64;
        let s = g.sum(self.log_std);
        g.offset(s, 0.5 * a * (1.0 + math::LN_2PI))
    }
}

/// Policy network: its own trunk, a linear mean head and a learned
/// state-independent log standard deviation.
#[derive(Clone, Debug)]
pub struct Policy {
    pub params: ParamSet,
    trunk: Trunk,
    head: Dense,
    log_std: ParamId,
    action_dim: usize,
}

impl Policy {
    pub fn new(cfg: &AgentConfig, seed: u64) -> Result<Self> {
        if cfg.action_dim == 0 {
            return Err(Error::Build {
                row: 0,
                msg: "action dimension must be positive".into(),
            });
        }
        let mut params = ParamSet::new();
        let trunk = Trunk::build(cfg, &mut params, seed, "policy")?;
        let mut b = Builder::new(&mut params, seed, "policy", [cfg.hidden, 1, 1]);
        b.row = 11;
        b.flatten();
        let head = b.dense("mean", cfg.action_dim, 0.01)?;
        let log_std = b.add("log_std", Tensor::full(&[cfg.action_dim], cfg.init_log_std));
        Ok(Policy {
            params,
            trunk,
            head,
            log_std,
            action_dim: cfg.action_dim,
        })
    }

    pub fn trunk(&self) -> &Trunk {
        &self.trunk
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<PolicyOutput> {
        let h = self.trunk.forward(g, b, x)?;
        let mean = self.head.forward(g, b, h)?;
        let log_std = g.clamp(
            b.var(self.log_std),
            PolicyOutput::LOG_STD_MIN,
            PolicyOutput::LOG_STD_MAX,
        )?;
        Ok(PolicyOutput { mean, log_std })
    }

    /// Evaluate on constant parameters: `(means [N·A], log_std [A])`.
    pub fn evaluate(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let out = self.forward(&mut g, &b, xv)?;
        Ok((g.value(out.mean).clone(), g.value(out.log_std).clone()))
    }
}

/// State-value network with its own trunk.
#[derive(Clone, Debug)]
pub struct ValueNet {
    pub params: ParamSet,
    trunk: Trunk,
    head: Dense,
}

impl ValueNet {
    pub fn new(cfg: &AgentConfig, seed: u64) -> Result<Self> {
        let mut params = ParamSet::new();
        let trunk = Trunk::build(cfg, &mut params, seed, "value")?;
        let mut b = Builder::new(&mut params, seed, "value", [cfg.hidden, 1, 1]);
        b.row = 11;
        b.flatten();
        let head = b.dense("head", 1, 1.0)?;
        Ok(ValueNet {
            params,
            trunk,
            head,
        })
    }

    pub fn trunk(&self) -> &Trunk {
        &self.trunk
    }

    /// `[N]` state values.
    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        let h = self.trunk.forward(g, b, x)?;
        let v = self.head.forward(g, b, h)?;
        let n = g.shape(v)[0];
        g.reshape(v, &[n])
    }

    pub fn evaluate(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let v = self.forward(&mut g, &b, xv)?;
        Ok(g.value(v).clone())
    }
}

/// Standalone residual block over `channels` with the given bottleneck.
pub fn residual_block(
    params: &mut ParamSet,
    seed: u64,
    name: &str,
    channels: usize,
    bottleneck: usize,
) -> Result<ResidualBlock> {
    let mut b = Builder::new(params, seed, name, [channels, 3, 3]);
    b.row = 1;
    b.residual("block", bottleneck)
}
