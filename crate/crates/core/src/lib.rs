//! Reinforcement-learned prompt refinement for code generation.

pub mod corpus;
pub mod embedding;
pub mod env;
pub mod eval;
pub mod gateway;
pub mod policy;
pub mod run;
pub mod ppo;
pub mod sandbox;
pub mod seeds;
pub mod synthetic;
pub mod transforms;
