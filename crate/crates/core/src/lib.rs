//! Verifiable self-play machinery for tool-calling agents.

pub mod canonical;
pub mod cli;
pub mod config;
pub mod curate;
pub mod eval;
pub mod gateway;
pub mod genreward;
pub mod parse;
pub mod selfplay;
pub mod service;
pub mod solreward;
pub mod taskspec;
pub mod world;
