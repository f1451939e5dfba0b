//! The `smashspeed` command-line tool and its HTTP session service.

pub mod args;
pub mod commands;
pub mod service;
pub mod store;

use std::sync::Arc;

use serde_json::{json, Value};
use smashspeed_core::config::PipelineConfig;
use smashspeed_core::{Error, Result};

use crate::args::{Cli, Command};

/// Machine-readable error record shared by the CLI and the API.
pub fn error_record(e: &Error) -> Value {
    json!({ "error": { "code": e.code(), "message": e.to_string() } })
}

/// Runs one CLI invocation and returns its stdout text.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Track(a) => commands::track(&a),
        Command::Speed(a) => commands::speed(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::ReportTable1(a) => commands::report_table1(&a),
        Command::Serve(a) => {
            let defaults = match &a.config {
                Some(p) => PipelineConfig::load(p)?,
                None => PipelineConfig::default(),
            };
            let store = Arc::new(store::Store::open(&a.data_dir, defaults)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(store, &a.host, a.port))?;
            Ok(String::new())
        }
    }
}
