use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{Bound, ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::relational::{relational_block_forward, RelationalWeights};
use crate::rng::{self, Rng64};
use crate::tensor::Tensor;

/// Size and cost summary of a built network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NetStats {
    /// Scalar parameter count.
    pub params: usize,
    /// Twice the multiply-accumulates of convolutions and dense layers for
    /// one sample.
    pub flops: u64,
    /// Twice the multiply-accumulates of the attention products (similarity
    /// logits and weighted sums), reported separately from `flops`.
    pub attention_flops: u64,
    /// Longest serial chain of convolutions; a relational block counts 2.
    pub conv_depth: usize,
}

/// FNV-1a, used to give every parameter its own init stream.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub(crate) fn param_rng(seed: u64, name: &str) -> Rng64 {
    rng::derive(seed, name_hash(name))
}

/// `[rows, cols]` matrix with orthonormal rows (rows ≤ cols) or columns,
/// scaled by `gain`.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut Rng64) -> Tensor {
    let (n, d) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| rng::normal(rng)).collect();
        // Two Gram-Schmidt passes keep orthogonality at round-off level.
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let data = if rows <= cols {
        basis.into_iter().flatten().map(|x| x * gain).collect()
    } else {
        let mut t = vec![0.0; rows * cols];
        for (j, b) in basis.iter().enumerate() {
            for (i, &x) in b.iter().enumerate() {
                t[i * cols + j] = x * gain;
            }
        }
        t
    };
    Tensor::from_parts(vec![rows, cols], data)
}

/// Layer-by-layer network construction with shape tracking.
///
/// Every failure reports the table row being built.
pub(crate) struct Builder<'a> {
    pub params: &'a mut ParamSet,
    pub seed: u64,
    pub prefix: String,
    /// Current feature shape `[C, H, W]`, or `[F]` after flattening.
    pub shape: Vec<usize>,
    pub stats: NetStats,
    pub row: usize,
}

impl<'a> Builder<'a> {
    pub fn new(params: &'a mut ParamSet, seed: u64, prefix: &str, input: [usize; 3]) -> Self {
        Builder {
            params,
            seed,
            prefix: String::from(prefix),
            shape: input.to_vec(),
            stats: NetStats::default(),
            row: 0,
        }
    }

    pub fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Build {
            row: self.row,
            msg: msg.into(),
        }
    }

    fn full_name(&self, name: &str) -> String {
        format!("{}.{}", self.prefix, name)
    }

    pub fn add(&mut self, name: &str, t: Tensor) -> ParamId {
        let full = self.full_name(name);
        self.params.add(full, t)
    }

    pub fn rng(&self, name: &str) -> Rng64 {
        param_rng(self.seed, &self.full_name(name))
    }

    fn chw(&self) -> Result<[usize; 3]> {
        match *self.shape {
            [c, h, w] => Ok([c, h, w]),
            _ => Err(self.fail("expected a feature map")),
        }
    }

    pub fn conv(
        &mut self,
        name: &str,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
    ) -> Result<Conv> {
        let [c, h, w] = self.chw()?;
        if out_channels == 0 {
            return Err(self.fail(format!("{name}: zero output channels")));
        }
        let oh = out_extent(h, kernel, stride, pad)
            .ok_or_else(|| self.fail(format!("{name}: kernel {kernel} exceeds padded height {}", h + 2 * pad)))?;
        let ow = out_extent(w, kernel, stride, pad)
            .ok_or_else(|| self.fail(format!("{name}: kernel {kernel} exceeds padded width {}", w + 2 * pad)))?;
        let fan_in = c * kernel * kernel;
        let bound = libm::sqrt(6.0 / fan_in as f64);
        let wname = format!("{name}.w");
        let weight = Tensor::rand_uniform(
            &[out_channels, c, kernel, kernel],
            -bound,
            bound,
            &mut self.rng(&wname),
        );
        let weight = self.add(&wname, weight);
        let bias = bias.then(|| self.add(&format!("{name}.b"), Tensor::zeros(&[out_channels])));
        self.stats.flops += 2 * (out_channels * oh * ow * fan_in) as u64;
        self.stats.conv_depth += 1;
        self.shape = vec![out_channels, oh, ow];
        Ok(Conv {
            weight,
            bias,
            stride,
            pad,
        })
    }

    pub fn pool(&mut self, kernel: [usize; 3], stride: [usize; 3], pad: [usize; 3]) -> Result<Pool> {
        let chw = self.chw()?;
        let mut out = [0; 3];
        for a in 0..3 {
            if pad[a] >= kernel[a] {
                return Err(self.fail(format!("pool padding {} not below kernel {}", pad[a], kernel[a])));
            }
            out[a] = out_extent(chw[a], kernel[a], stride[a], pad[a]).ok_or_else(|| {
                self.fail(format!(
                    "pool kernel {} exceeds padded extent {} on axis {}",
                    kernel[a],
                    chw[a] + 2 * pad[a],
                    a + 1
                ))
            })?;
        }
        self.shape = out.to_vec();
        Ok(Pool { kernel, stride, pad })
    }

    pub fn residual(&mut self, name: &str, bottleneck: usize) -> Result<ResidualBlock> {
        let [c, _, _] = self.chw()?;
        let c1 = self.conv(&format!("{name}.c1"), bottleneck, 1, 1, 0, true)?;
        let c2 = self.conv(&format!("{name}.c2"), bottleneck, 3, 1, 1, true)?;
        let c3 = self.conv(&format!("{name}.c3"), c, 1, 1, 0, true)?;
        Ok(ResidualBlock { convs: [c1, c2, c3] })
    }

    pub fn relational(&mut self, name: &str) -> Result<RelationalLayer> {
        let [c, h, w] = self.chw()?;
        if c == 0 || c % 2 != 0 {
            return Err(self.fail(format!("relational block needs an even channel count, found {c}")));
        }
        let half = c / 2;
        let bound = libm::sqrt(6.0 / c as f64);
        let emb = |b: &mut Self, part: &str| {
            let n = format!("{name}.{part}");
            let t = Tensor::rand_uniform(&[half, c, 1, 1], -bound, bound, &mut b.rng(&n));
            b.add(&n, t)
        };
        let query = emb(self, "q");
        let key = emb(self, "k");
        let value = emb(self, "v");
        let embed = self.add(&format!("{name}.e"), Tensor::zeros(&[c, half, 1, 1]));
        let p = (h * w) as u64;
        let (c, half) = (c as u64, half as u64);
        self.stats.flops += 2 * (3 * half * c * p + c * half * p);
        self.stats.attention_flops += 2 * (half * p * p + half * p * p);
        self.stats.conv_depth += 2;
        Ok(RelationalLayer {
            weights: RelationalWeights {
                query,
                key,
                value,
                embed,
            },
        })
    }

    pub fn flatten(&mut self) {
        let n = self.shape.iter().product();
        self.shape = vec![n];
    }

    pub fn dense(&mut self, name: &str, out: usize, gain: f64) -> Result<Dense> {
        let inp = match *self.shape {
            [f] => f,
            _ => return Err(self.fail("dense layer expects a flat input")),
        };
        if out == 0 {
            return Err(self.fail(format!("{name}: zero output width")));
        }
        let wname = format!("{name}.w");
        let w = orthogonal(out, inp, gain, &mut self.rng(&wname));
        let weight = self.add(&wname, w);
        let bias = self.add(&format!("{name}.b"), Tensor::zeros(&[out]));
        self.stats.flops += 2 * (inp * out) as u64;
        self.shape = vec![out];
        Ok(Dense { weight, bias })
    }

    pub fn layer_norm(&mut self, name: &str) -> Result<LayerNorm> {
        let f = match *self.shape {
            [f] => f,
            _ => return Err(self.fail("layer norm expects a flat input")),
        };
        let gain = self.add(&format!("{name}.gain"), Tensor::ones(&[f]));
        let bias = self.add(&format!("{name}.bias"), Tensor::zeros(&[f]));
        Ok(LayerNorm { gain, bias })
    }

    pub fn finish(self) -> NetStats {
        NetStats {
            params: self.params.num_params(),
            ..self.stats
        }
    }
}

fn out_extent(n: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    (n + 2 * p >= k && n > 0 && s > 0).then(|| (n + 2 * p - k) / s + 1)
}

/// Applies the weight tensor actually used by a layer; the discriminator
/// substitutes spectrally normalized weights here.
pub(crate) trait WeightMap {
    fn weight(&self, g: &mut Graph, b: &Bound, id: ParamId) -> Result<Var>;
}

/// Uses bound parameters as they are.
pub(crate) struct Plain;

impl WeightMap for Plain {
    fn weight(&self, _: &mut Graph, b: &Bound, id: ParamId) -> Result<Var> {
        Ok(b.var(id))
    }
}

#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        self.forward_mapped(g, b, &Plain, x)
    }

    pub(crate) fn forward_mapped(
        &self,
        g: &mut Graph,
        b: &Bound,
        m: &impl WeightMap,
        x: Var,
    ) -> Result<Var> {
        let w = m.weight(g, b, self.weight)?;
        let bias = self.bias.map(|id| b.var(id));
        g.conv2d_bias(x, w, bias, (self.stride, self.stride), (self.pad, self.pad))
    }
}

#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        self.forward_mapped(g, b, &Plain, x)
    }

    pub(crate) fn forward_mapped(
        &self,
        g: &mut Graph,
        b: &Bound,
        m: &impl WeightMap,
        x: Var,
    ) -> Result<Var> {
        let w = m.weight(g, b, self.weight)?;
        g.dense(x, w, Some(b.var(self.bias)))
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-5;

    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        g.layer_norm(x, b.var(self.gain), b.var(self.bias), Self::EPS)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Pool {
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl Pool {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let t = |a: [usize; 3]| (a[0], a[1], a[2]);
        g.max_pool3d(x, t(self.kernel), t(self.stride), t(self.pad))
    }
}

/// Bottleneck residual block: 1×1 → 3×3 → 1×1, each preceded by ReLU, with
/// the input added back.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    pub convs: [Conv; 3],
}

impl ResidualBlock {
    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        for c in &self.convs {
            let a = g.relu(h);
            h = c.forward(g, b, a)?;
        }
        if g.shape(h) != g.shape(x) {
            return Err(Error::ShapeMismatch {
                op: "residual skip",
                axis: 1,
                expected: g.shape(x)[1],
                found: g.shape(h)[1],
            });
        }
        g.add(h, x)
    }
}

#[derive(Clone, Debug)]
pub struct RelationalLayer {
    pub weights: RelationalWeights<ParamId>,
}

impl RelationalLayer {
    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        self.forward_mapped(g, b, &Plain, x)
    }

    pub(crate) fn forward_mapped(
        &self,
        g: &mut Graph,
        b: &Bound,
        m: &impl WeightMap,
        x: Var,
    ) -> Result<Var> {
        let w = &self.weights;
        let vars = RelationalWeights {
            query: m.weight(g, b, w.query)?,
            key: m.weight(g, b, w.key)?,
            value: m.weight(g, b, w.value)?,
            embed: m.weight(g, b, w.embed)?,
        };
        relational_block_forward(g, x, &vars)
    }
}
