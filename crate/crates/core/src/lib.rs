// SPDX-License-Identifier: Apache-2.0

pub mod circuit;
pub mod cli;
pub mod energy;
pub mod error;
pub mod gru;
pub mod io;
pub mod train;

pub use error::{Error, Result};
