pub mod baselines;
pub mod cdamm;
pub mod cohort;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod evaluate;
pub mod imaging;
pub mod medrecords;
pub mod metrics;
pub mod questionnaire;

pub use error::{Error, FieldError, Result};
