// SPDX-License-Identifier: Apache-2.0

pub mod classical;
pub mod empirical;
pub mod error;
pub mod histories;
pub mod ndm;
pub mod operator;
pub mod povm;
pub mod random;
pub mod scenario;

pub use error::{Error, Result};
