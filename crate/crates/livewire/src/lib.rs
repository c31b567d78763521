//! Livewire: a sparse neural-network training engine in which the
//! connection graph itself is learned. Strongly activated node pairs
//! are collected into a bounded priority queue, scored by the loss
//! gradient the proposed edge would receive, grown, and balanced by
//! magnitude pruning — while every edge carries its own age-discounted
//! learning rate so fresh connections adapt fast and old ones stay put.
//!
//! Modules:
//! - [`topology`] — the layered DAG, structural mutation, invariants
//! - [`checkpoint`] — lossless text checkpoints
//! - [`init`] — sparse initialization with exponentially decaying
//!   cross-layer density
//! - [`propagation`] — forward/backward over the arbitrary DAG
//! - [`rewire`] — activation queue, candidate scoring, grow/prune plans
//! - [`schedule`] — triangular cyclic rate schedules
//! - [`plasticity`] — per-edge credibility learning rates and momentum
//! - [`infometrics`] — surprise, coincidence ratios, mutual information
//! - [`tasks`] — synthetic task generators and CSV ingestion
//! - [`harness`] — training loop, evaluation, few-shot runner, inspect
//!
//! See the crate examples for end-to-end usage; the `livewire` binary
//! exposes the same flows as `train`, `eval`, `fewshot` and `inspect`
//! subcommands.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod harness;
pub mod infometrics;
pub mod init;
pub mod plasticity;
pub mod propagation;
pub mod rewire;
pub mod schedule;
pub mod tasks;
pub mod topology;

pub use config::RunConfig;
pub use propagation::{Batch, LossKind};
pub use topology::{Network, NodeRef};
