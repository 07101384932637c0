//! `geofeed`: discover, fetch, validate, report on and sign geofeeds.
//!
//! Exit codes: 0 success, 1 domain failure (verification failed, a
//! certificate or signature was refused, `--strict` found violations),
//! 2 usage or I/O error.

mod cmd;
mod config;
mod manifest;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Settings;

#[derive(Debug, Parser)]
#[command(name = "geofeed", version, about = "Geofeed discovery, validation, analytics and authentication")]
struct Cli {
    /// Flat `key = value` config file; flags and GEOFEED_* variables win over it.
    #[arg(long, global = true, env = "GEOFEED_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract geofeed locators from RPSL dumps into a JSON-lines index.
    Discover(cmd::discover::Args),
    /// Download the geofeeds in an index into a snapshot directory.
    Fetch(cmd::fetch::Args),
    /// Check geofeed files (a snapshot or a single file) for RFC 8805 adherence.
    Validate(cmd::validate::Args),
    /// Adoption and adherence tables from an index, file reports and fixtures.
    Report(cmd::report::Args),
    /// Create a signing identity.
    Keygen(cmd::pki::KeygenArgs),
    /// Issue a certificate (or a self-signed root).
    Issue(cmd::pki::IssueArgs),
    /// Sign a scope of a geofeed file.
    Sign(cmd::pki::SignArgs),
    /// Append a countersignature to a bundle.
    Countersign(cmd::pki::CountersignArgs),
    /// Verify every element of a bundle.
    Verify(cmd::pki::VerifyArgs),
    /// Compare registry prefix owners with a secondary source.
    Ownership(cmd::ownership::Args),
    /// Build and verify the CA -> ARIN -> AT&T -> LS Networks example chain.
    Demo(cmd::pki::DemoArgs),
    /// Time issuance, signing and verification over a synthetic hierarchy.
    Bench(cmd::bench::Args),
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A domain-level check failed.
    Failed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Failed => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Settings::load(cli.config.as_deref()).and_then(|mut settings| match cli.command {
        Command::Discover(a) => cmd::discover::run(a, &mut settings),
        Command::Fetch(a) => cmd::fetch::run(a, &mut settings),
        Command::Validate(a) => cmd::validate::run(a, &mut settings),
        Command::Report(a) => cmd::report::run(a, &mut settings),
        Command::Keygen(a) => cmd::pki::keygen(a, &mut settings),
        Command::Issue(a) => cmd::pki::issue(a, &mut settings),
        Command::Sign(a) => cmd::pki::sign(a, &mut settings),
        Command::Countersign(a) => cmd::pki::countersign(a, &mut settings),
        Command::Verify(a) => cmd::pki::verify(a, &mut settings),
        Command::Ownership(a) => cmd::ownership::run(a, &mut settings),
        Command::Demo(a) => cmd::pki::demo(a, &mut settings),
        Command::Bench(a) => cmd::bench::run(a, &mut settings),
    });
    match result {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
