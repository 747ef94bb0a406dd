pub mod data;
pub mod estimator;
pub mod error;
pub mod likelihood;
pub mod numeric;
pub mod query;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};

#[cfg(any(test, feature = "oracles"))]
pub mod oracle;
#[cfg(test)]
mod test_support;
