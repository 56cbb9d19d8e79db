//! Network builders: agent trunks with policy and value heads, the reward
//! discriminator, spectral normalization and size accounting.

mod agent;
mod discriminator;
mod layers;
mod params;
pub mod spectral;

pub use agent::{
    build_agent, residual_block, AgentConfig, Policy, PolicyOutput, Trunk, ValueNet, Variant,
};
pub use discriminator::{DiscConfig, Discriminator};
pub use layers::{orthogonal, Conv, Dense, LayerNorm, NetStats, Pool, RelationalLayer, ResidualBlock};
pub use params::{average_gradients, Bound, GradSet, ParamId, ParamSet};
pub use spectral::{spectral_normalize, PowerIteration};
