//! Frame stacking: a state is the `k` most recent frames, oldest first.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::render::Frame;
use crate::error::{Error, Result};

/// The `k` most recent frames, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackedState {
    frames: Vec<Frame>,
}

impl StackedState {
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn k(&self) -> usize {
        self.frames.len()
    }

    /// Concatenated pixels, `[k, res, res]` row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.frames.iter().flat_map(|f| f.pixels().iter().copied()).collect()
    }
}

/// Stack the last `k` frames of a history, repeating the first frame when
/// the history is shorter than `k`.
pub fn stack_frames(history: &[Frame], k: usize) -> Result<StackedState> {
    if k < 1 {
        return Err(Error::invalid("stack_frames", "stack depth must be at least 1"));
    }
    let first = history
        .first()
        .ok_or_else(|| Error::invalid("stack_frames", "empty history"))?;
    let pad = k.saturating_sub(history.len());
    let tail = &history[history.len().saturating_sub(k)..];
    let frames = core::iter::repeat_n(first, pad).chain(tail).cloned().collect();
    Ok(StackedState { frames })
}

/// Rolling stack maintained during an episode.
#[derive(Clone, Debug)]
pub struct FrameStack {
    k: usize,
    frames: VecDeque<Frame>,
}

impl FrameStack {
    /// Start an episode: `k` copies of the initial frame.
    pub fn new(k: usize, first: Frame) -> Result<FrameStack> {
        if k < 1 {
            return Err(Error::invalid("FrameStack", "stack depth must be at least 1"));
        }
        Ok(FrameStack {
            k,
            frames: core::iter::repeat_n(first, k).collect(),
        })
    }

    pub fn push(&mut self, frame: Frame) {
        self.frames.pop_front();
        self.frames.push_back(frame);
    }

    pub fn latest(&self) -> &Frame {
        &self.frames[self.k - 1]
    }

    pub fn state(&self) -> StackedState {
        StackedState {
            frames: self.frames.iter().cloned().collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.frames.iter().flat_map(|f| f.pixels().iter().copied()).collect()
    }
}
