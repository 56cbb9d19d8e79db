//! Relational adversarial imitation from pixels.
//!
//! A dependency-light (`no_std` + `alloc`) implementation of state-only visual
//! adversarial imitation: a small reverse-mode autodiff tensor library,
//! convolutional agents with a non-local self-attention block, a spectrally
//! normalized discriminator trained with a gradient penalty, PPO, and a
//! deterministic pixel-rendered hopper used as the desk-scale task.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod env;
pub mod error;
pub mod gail;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod ppo;
pub mod relational;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{Graph, Var};
pub use tensor::Tensor;
