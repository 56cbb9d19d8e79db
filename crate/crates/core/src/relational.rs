//! Non-local self-attention ("relational") block.
//!
//! For a feature map `U: [N, C, H, W]` with positions flattened row-major
//! into `P = H·W` columns, the block computes
//!
//! ```text
//! A   = softmax_rows(q(U)ᵀ k(U))          [N, P, P]
//! out = e(v(U) · Aᵀ) + U                   [N, C, H, W]
//! ```
//!
//! where `q, k, v, e` are bias-free 1×1 convolutions. Row `i` of `A` holds the
//! normalized embedded-Gaussian similarities `exp(q_iᵀ k_j) / Σ_j exp(q_iᵀ k_j)`.

use alloc::format;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::rng::Rng64;
use crate::tensor::Tensor;

/// The four 1×1 embeddings of a relational block.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationalWeights<T> {
    /// `[C/2, C, 1, 1]`
    pub query: T,
    /// `[C/2, C, 1, 1]`
    pub key: T,
    /// `[Cv, C, 1, 1]`
    pub value: T,
    /// `[C, Cv, 1, 1]`
    pub embed: T,
}

pub type RelationalParams = RelationalWeights<Tensor>;

impl RelationalParams {
    /// Fan-in uniform init for `q, k, v`; the output embedding starts at
    /// zero so a fresh block is the identity.
    pub fn init(channels: usize, rng: &mut Rng64) -> Result<Self> {
        check_channels(channels)?;
        let half = channels / 2;
        let bound = libm::sqrt(3.0 / channels as f64);
        let mut u = |shape: &[usize]| Tensor::rand_uniform(shape, -bound, bound, rng);
        Ok(RelationalWeights {
            query: u(&[half, channels, 1, 1]),
            key: u(&[half, channels, 1, 1]),
            value: u(&[half, channels, 1, 1]),
            embed: Tensor::zeros(&[channels, half, 1, 1]),
        })
    }

    pub fn num_params(&self) -> usize {
        self.query.numel() + self.key.numel() + self.value.numel() + self.embed.numel()
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> RelationalWeights<Var> {
        RelationalWeights {
            query: g.leaf(self.query.clone(), trainable),
            key: g.leaf(self.key.clone(), trainable),
            value: g.leaf(self.value.clone(), trainable),
            embed: g.leaf(self.embed.clone(), trainable),
        }
    }
}

fn check_channels(c: usize) -> Result<()> {
    if c == 0 || c % 2 != 0 {
        return Err(Error::invalid(
            "relational_block",
            format!("input channels must be even and positive, found {c}"),
        ));
    }
    Ok(())
}

fn check_embedding(g: &Graph, w: Var, out: usize, inp: usize, name: &'static str) -> Result<()> {
    let s = g.shape(w);
    if s.len() != 4 || s[2] != 1 || s[3] != 1 {
        return Err(Error::invalid(name, format!("expected a 1x1 kernel, found {s:?}")));
    }
    if s[1] != inp {
        return Err(Error::ShapeMismatch {
            op: name,
            axis: 1,
            expected: inp,
            found: s[1],
        });
    }
    if s[0] != out {
        return Err(Error::ShapeMismatch {
            op: name,
            axis: 0,
            expected: out,
            found: s[0],
        });
    }
    Ok(())
}

fn nchw(g: &Graph, u: Var) -> Result<[usize; 4]> {
    match *g.shape(u) {
        [n, c, h, w] => Ok([n, c, h, w]),
        ref s => Err(Error::Rank {
            op: "relational_block",
            expected: 4,
            found: s.to_vec(),
        }),
    }
}

/// Embed with a 1×1 convolution and flatten positions: `[N, F, H·W]`.
fn embed_flat(g: &mut Graph, u: Var, w: Var) -> Result<Var> {
    let [n, _, h, wd] = nchw(g, u)?;
    let f = g.shape(w)[0];
    let y = g.conv2d(u, w, (1, 1), (0, 0))?;
    g.reshape(y, &[n, f, h * wd])
}

/// Row-stochastic attention matrix `[N, P, P]`.
pub fn attention_weights(g: &mut Graph, u: Var, wq: Var, wk: Var) -> Result<Var> {
    let [_, c, _, _] = nchw(g, u)?;
    check_channels(c)?;
    check_embedding(g, wq, c / 2, c, "query embedding")?;
    check_embedding(g, wk, c / 2, c, "key embedding")?;
    let q = embed_flat(g, u, wq)?;
    let k = embed_flat(g, u, wk)?;
    let logits = g.matmul_t(q, k, true, false)?;
    g.softmax_rows(logits)
}

/// Attention-weighted average of the value embeddings: `[N, Cv, H, W]`.
pub fn non_local_mean(g: &mut Graph, u: Var, wq: Var, wk: Var, wv: Var) -> Result<Var> {
    let [n, c, h, w] = nchw(g, u)?;
    let cv = g.shape(wv)[0];
    check_embedding(g, wv, cv, c, "value embedding")?;
    let attn = attention_weights(g, u, wq, wk)?;
    let v = embed_flat(g, u, wv)?;
    // out[c, i] = Σ_j v[c, j] · A[i, j]
    let out = g.matmul_t(v, attn, false, true)?;
    g.reshape(out, &[n, cv, h, w])
}

/// `e(non_local_mean(U)) + U`, same shape as `U`.
pub fn relational_block_forward(
    g: &mut Graph,
    u: Var,
    p: &RelationalWeights<Var>,
) -> Result<Var> {
    let [_, c, _, _] = nchw(g, u)?;
    let cv = g.shape(p.value)[0];
    check_embedding(g, p.embed, c, cv, "output embedding")?;
    let m = non_local_mean(g, u, p.query, p.key, p.value)?;
    let e = g.conv2d(m, p.embed, (1, 1), (0, 0))?;
    g.add(e, u)
}

/// Random parameters with a nonzero output embedding (tests, probes).
pub fn random_params(channels: usize, rng: &mut Rng64) -> Result<RelationalParams> {
    let mut p = RelationalParams::init(channels, rng)?;
    let bound = libm::sqrt(3.0 / (channels / 2) as f64);
    p.embed = Tensor::rand_uniform(p.embed.shape(), -bound, bound, rng);
    Ok(p)
}
