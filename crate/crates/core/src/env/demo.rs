//! State-only demonstrations: rendered expert episodes without actions or
//! rewards.

use alloc::vec::Vec;

use super::expert::scripted_expert;
use super::render::{render, Frame};
use super::walker::WalkerState;
use crate::error::{Error, Result};
use crate::rng::{self, Rng64};
use crate::tensor::Tensor;

/// A rendered episode: the initial frame and one frame per control step.
pub type Episode = Vec<Frame>;

#[derive(Clone, Debug, PartialEq)]
pub struct DemonstrationSet {
    resolution: usize,
    episodes: Vec<Episode>,
}

impl DemonstrationSet {
    /// Every frame must have the given resolution and every episode at least
    /// two frames.
    pub fn new(resolution: usize, episodes: Vec<Episode>) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::invalid("DemonstrationSet", "no episodes"));
        }
        for (i, ep) in episodes.iter().enumerate() {
            if ep.len() < 2 {
                return Err(Error::invalid("DemonstrationSet", alloc::format!("episode {i} has fewer than two frames")));
            }
            if let Some(f) = ep.iter().find(|f| f.resolution() != resolution) {
                return Err(Error::ShapeMismatch {
                    op: "DemonstrationSet",
                    axis: 0,
                    expected: resolution,
                    found: f.resolution(),
                });
            }
        }
        Ok(DemonstrationSet {
            resolution,
            episodes,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Stacked state ending at frame `t` of episode `e` as raw bytes.
    pub fn stacked(&self, e: usize, t: usize, k: usize) -> Vec<u8> {
        let ep = &self.episodes[e];
        let mut out = Vec::with_capacity(k * self.resolution * self.resolution);
        for i in 0..k {
            let idx = (t + i + 1).saturating_sub(k);
            out.extend_from_slice(ep[idx].pixels());
        }
        out
    }

    /// Uniform minibatch of stacked states `[n, k, res, res]` over every
    /// post-transition frame (`t ≥ 1`) of every episode.
    pub fn sample(&self, rng: &mut Rng64, n: usize, k: usize) -> Tensor {
        let total: usize = self.episodes.iter().map(|e| e.len() - 1).sum();
        let r = self.resolution;
        let mut data = Vec::with_capacity(n * k * r * r);
        for _ in 0..n {
            let mut j = rng::index(rng, total);
            let mut e = 0;
            while j >= self.episodes[e].len() - 1 {
                j -= self.episodes[e].len() - 1;
                e += 1;
            }
            data.extend(self.stacked(e, j + 1, k).into_iter().map(|b| b as f64));
        }
        Tensor::new(&[n, k, r, r], data).expect("sampled batch conforms")
    }
}

/// Roll out the scripted expert from the reset state of `seed`, returning
/// the rendered frames and the forward progress.
pub fn expert_episode(seed: u64, res: usize) -> (Episode, f64) {
    let mut s = WalkerState::reset(seed);
    let mut frames = alloc::vec![render(&s, res)];
    loop {
        let status = s.step(scripted_expert(&s));
        frames.push(render(&s, res));
        if status.is_done() {
            return (frames, s.progress());
        }
    }
}

/// Record `n` expert episodes from reset seeds `seed, seed + 1, …`. Also
/// returns the mean forward progress of the recorded episodes.
pub fn record_demos(n: usize, seed: u64, res: usize) -> Result<(DemonstrationSet, f64)> {
    if n == 0 {
        return Err(Error::invalid("record_demos", "need at least one episode"));
    }
    let mut total = 0.0;
    let mut episodes = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let (ep, p) = expert_episode(seed.wrapping_add(i), res);
        total += p;
        episodes.push(ep);
    }
    Ok((DemonstrationSet::new(res, episodes)?, total / n as f64))
}
