//! Appraisal-driven emotion simulation: agents built from dense layer
//! stacks perceive an environment, judge stimuli against core values,
//! label the resulting sign patterns as emotions and act.

pub mod action;
pub mod appraisal;
pub mod emotion;
pub mod environment;
pub mod error;
pub mod neuroware;
pub mod numerics;
pub mod perception;
pub mod scenario;

pub use error::{Error, Result};
