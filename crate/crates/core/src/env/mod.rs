//! Desk-scale locomotion task: hopper dynamics, side-view rendering, frame
//! stacking, the scripted expert and state-only demonstrations.

pub mod demo;
pub mod expert;
pub mod render;
pub mod stack;
pub mod walker;

pub use demo::{expert_episode, record_demos, DemonstrationSet, Episode};
pub use expert::{scripted_expert, Gait};
pub use render::{render, Camera, Frame, TICK_SPACING};
pub use stack::{stack_frames, FrameStack, StackedState};
pub use walker::{Status, WalkerState};
