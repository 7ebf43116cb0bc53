//! Channel-resilient adaptive waveform synthesis.
//!
//! A receiver-side signal classifier, frozen after training, loses accuracy
//! once the channel no longer looks like its training data. This crate closes
//! the loop from the transmitter side: a TD3 agent reads the receiver's
//! label/softmax feedback and emits per-channel complex FIR taps, constrained
//! to a small box around the pass-through filter, that pre-distort outgoing
//! waveforms so the classifier recovers.
//!
//! Modules follow the signal path: [`waveform`] synthesizes baseband signals,
//! [`dsp`] applies and inverts the synthesis filters, [`channel`] degrades
//! them, [`classifier`] votes on what arrived, [`env`] turns the loop into
//! states and rewards, [`agent`] learns the policy, [`baseline`] provides the
//! non-adaptive comparison points, and [`runner`] wires the experiment
//! pipelines behind the CLI.

pub mod agent;
pub mod baseline;
pub mod channel;
pub mod classifier;
pub mod config;
pub mod dsp;
pub mod env;
pub mod error;
pub mod iqfile;
pub mod nn;
pub mod rng;
pub mod runner;
pub mod waveform;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
