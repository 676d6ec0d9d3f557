//! Experiment driver for `dgtime`.

pub mod config;
pub mod converge;
pub mod error;
pub mod interp;
pub mod maxreg;
pub mod normcheck;
pub mod oracle;
pub mod problems;
pub mod rates;
pub mod report;
