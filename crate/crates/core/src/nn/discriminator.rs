use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::agent::check_input;
use super::layers::{
    param_rng, Builder, Conv, Dense, LayerNorm, NetStats, RelationalLayer, WeightMap,
};
use super::params::{Bound, ParamId, ParamSet};
use super::spectral::PowerIteration;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::math;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscConfig {
    pub k: usize,
    pub colors: usize,
    pub resolution: usize,
    /// Output channels of the five strided convolutions.
    pub channels: Vec<usize>,
    /// Insert relational blocks after the third and fourth convolutions.
    pub relational: bool,
    pub hidden: usize,
    pub slope: f64,
    pub spectral_norm: bool,
}

impl DiscConfig {
    pub fn new(k: usize, resolution: usize, relational: bool) -> Self {
        DiscConfig {
            k,
            colors: 1,
            resolution,
            channels: vec![8, 16, 16, 16, 16],
            relational,
            hidden: 256,
            slope: 0.1,
            spectral_norm: true,
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.k * self.colors, self.resolution, self.resolution]
    }
}

/// Reward network: strided convolutions with leaky ReLU, optional relational
/// blocks, a layer-normalized dense layer and a scalar logit. Every weight
/// is spectrally normalized on the forward pass.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub params: ParamSet,
    convs: Vec<Conv>,
    relational: Vec<RelationalLayer>,
    dense: Dense,
    norm: LayerNorm,
    logit: Dense,
    /// Power-iteration state per parameter index; `None` for biases and
    /// norm gains.
    power: Vec<Option<PowerIteration>>,
    input: [usize; 3],
    slope: f64,
    stats: NetStats,
}

struct Spectral<'a>(&'a [Option<PowerIteration>]);

impl WeightMap for Spectral<'_> {
    fn weight(&self, g: &mut Graph, b: &Bound, id: ParamId) -> Result<Var> {
        match &self.0[id.index()] {
            Some(p) => p.apply(g, b.var(id)),
            None => Ok(b.var(id)),
        }
    }
}

impl Discriminator {
    pub fn new(cfg: &DiscConfig, seed: u64) -> Result<Self> {
        if cfg.k == 0 || cfg.colors == 0 || cfg.resolution == 0 {
            return Err(Error::Build {
                row: 0,
                msg: "input extents must be positive".into(),
            });
        }
        if cfg.channels.len() != 5 || cfg.channels.contains(&0) {
            return Err(Error::Build {
                row: 0,
                msg: "channel schedule needs five positive widths".into(),
            });
        }
        let mut params = ParamSet::new();
        let mut b = Builder::new(&mut params, seed, "disc", cfg.input_shape());
        let mut convs = Vec::new();
        let mut relational = Vec::new();
        // Rows: 2, 3, 4 conv; 5 relational; 6 conv; 7 relational; 8 conv.
        let mut row = 2;
        for (i, &c) in cfg.channels.iter().enumerate() {
            b.row = row;
            convs.push(b.conv(&alloc::format!("conv{}", i + 1), c, 4, 2, 1, true)?);
            row += 1;
            if cfg.relational && (i == 2 || i == 3) {
                b.row = row;
                relational.push(b.relational(&alloc::format!("rel{}", relational.len() + 1))?);
            }
            if i == 2 || i == 3 {
                row += 1;
            }
        }
        b.row = 9;
        b.flatten();
        let dense = b.dense("fc", cfg.hidden, core::f64::consts::SQRT_2)?;
        let norm = b.layer_norm("fc.norm")?;
        b.row = 10;
        // A zero logit weight makes an untrained discriminator output 1/2
        // everywhere, so its reward carries no signal until it has learned.
        let logit = b.dense("logit", 1, 0.0)?;
        let stats = b.finish();

        let mut weights: Vec<ParamId> = convs.iter().map(|c| c.weight).collect();
        for r in &relational {
            let w = &r.weights;
            weights.extend([w.query, w.key, w.value, w.embed]);
        }
        weights.extend([dense.weight, logit.weight]);
        let mut power = vec![None; params.len()];
        if cfg.spectral_norm {
            for id in weights {
                let mut rng = param_rng(seed, &alloc::format!("{}.u", params.name(id)));
                power[id.index()] = Some(PowerIteration::new(params.get(id), &mut rng));
            }
        }
        Ok(Discriminator {
            params,
            convs,
            relational,
            dense,
            norm,
            logit,
            power,
            input: cfg.input_shape(),
            slope: cfg.slope,
            stats,
        })
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    pub fn relational_blocks(&self) -> usize {
        self.relational.len()
    }

    pub fn logit_layer(&self) -> (ParamId, ParamId) {
        (self.logit.weight, self.logit.bias)
    }

    /// Logits `[N]` for inputs already standardized to `[0, 1]`.
    pub fn logits_unit(&self, g: &mut Graph, b: &Bound, z: Var) -> Result<Var> {
        check_input(g, z, self.input)?;
        let m = Spectral(&self.power);
        let n = g.shape(z)[0];
        let mut h = z;
        for (i, c) in self.convs.iter().enumerate() {
            h = c.forward_mapped(g, b, &m, h)?;
            h = g.lrelu(h, self.slope);
            if (i == 2 || i == 3) && !self.relational.is_empty() {
                h = self.relational[i - 2].forward_mapped(g, b, &m, h)?;
            }
        }
        let f: usize = g.shape(h)[1..].iter().product();
        let h = g.reshape(h, &[n, f])?;
        let h = self.dense.forward_mapped(g, b, &m, h)?;
        let h = self.norm.forward(g, b, h)?;
        let h = g.lrelu(h, self.slope);
        let l = self.logit.forward_mapped(g, b, &m, h)?;
        g.reshape(l, &[n])
    }

    /// Logits `[N]` for raw pixel inputs in `0..=255`.
    pub fn logits(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        let z = g.scale(x, 1.0 / 255.0);
        self.logits_unit(g, b, z)
    }

    /// `D(x) ∈ (0, 1)` for raw pixel inputs, on constant parameters.
    pub fn probability(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let b = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let l = self.logits(&mut g, &b, xv)?;
        Ok(g.value(l).data().iter().map(|&v| math::sigmoid(v)).collect())
    }

    /// Advance every layer's power iteration by one step.
    pub fn advance_power_iteration(&mut self) {
        for (p, w) in self.power.iter_mut().zip(self.params.values()) {
            if let Some(p) = p {
                p.step(w);
            }
        }
    }

    /// The weights as applied on the forward pass, by parameter name.
    pub fn normalized_weights(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for id in self.params.ids() {
            if let Some(p) = &self.power[id.index()] {
                let w = self.params.get(id);
                let s = p.sigma(w);
                let applied = if libm::fabs(s) < super::spectral::SIGMA_FLOOR {
                    w.clone()
                } else {
                    w.map(|x| x / s)
                };
                out.push((String::from(self.params.name(id)), applied));
            }
        }
        out
    }

    pub fn power_state(&self) -> &[Option<PowerIteration>] {
        &self.power
    }

    pub fn power_state_mut(&mut self) -> &mut [Option<PowerIteration>] {
        &mut self.power
    }
}
