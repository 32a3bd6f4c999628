//! File formats, experiment drivers and the command-line front end for
//! `schatten-core`.
//!
//! The binary `schatten-mc` exposes four subcommands: `synth` (random
//! low-rank completion, RSE), `complete` (rating files, RMSE), `image`
//! (PGM inpainting, PSNR) and `verify` (quasi-norm identity checks). Every
//! report is JSON with a `schatten-mc/1` manifest; traces are CSV.

#![deny(unsafe_code)]

pub mod commands;
pub mod data;
pub mod error;
pub mod image;
pub mod report;

pub use error::{McError, Result};
