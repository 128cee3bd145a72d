//! Evaluation of generated multi-page web apps against annotated design
//! mockups, plus analytics over coding-agent traces.

pub mod alignment;
pub mod behavior;
pub mod config;
pub mod driver;
pub mod evaluate;
pub mod localization;
pub mod model;
pub mod report;
pub mod resolver;
pub mod text;
pub mod trace;
pub mod visual;

pub use model::*;
