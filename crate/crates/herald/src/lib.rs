//! IO, file formats, providers and the command-line front end of the Herald
//! NL-FL dataset pipeline. Pure logic lives in `herald-core`.

pub mod augment;
pub mod backend;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod export;
pub mod gateway;
pub mod informalize;
pub mod jsonl;
pub mod source;
pub mod store;
pub mod validator;
