//! HTTP facade, case log and CLI plumbing around `bronchial_dx`.

pub mod app;
pub mod engine;
pub mod error;
pub mod payload;
pub mod store;

pub use app::{router, AppState, SharedState};
pub use engine::Engine;
pub use error::{ServiceError, ServiceResult};
pub use store::CaseStore;
