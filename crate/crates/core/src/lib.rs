pub mod app;
pub mod config;
pub mod env;
pub mod episode;
pub mod eval;
pub mod golden;
pub mod optim;
pub mod policy;
pub mod prompt;
pub mod service;
pub mod text;
pub mod train;
