//! Persistence, bundle assembly and HTTP service around the core checker.

pub mod api;
pub mod bundle;
pub mod pipeline;
pub mod store;
