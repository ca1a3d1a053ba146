pub mod autodiff;
pub mod domain;
pub mod physics;
pub mod data;
pub mod models;
pub mod training;
pub mod eval;
pub mod vision;
pub mod experiment;
pub mod service;
pub mod cli;
