pub mod error;
pub mod fdsolve;
pub mod mms;
pub mod optim;
pub mod pinnloss;
pub mod scenarios;
pub mod tapenet;

pub use error::{Error, Result};
