use std::process::ExitCode;

use clap::{Parser, Subcommand};

use veilblock::commands::{audit, bench, client, curator, enforcer};
use veilblock::config::ConfigError;
use veilblock::wire::WireError;

/// On-device blocklisting toolkit: curator, enforcer, client, auditor, and
/// benchmark roles over one wire protocol.
#[derive(Parser, Debug)]
#[command(name = "veilblock", version, about)]
struct Cli {
    #[command(subcommand)]
    role: Role,
}

#[derive(Subcommand, Debug)]
enum Role {
    #[command(subcommand)]
    Curator(curator::CuratorCmd),
    #[command(subcommand)]
    Enforcer(enforcer::EnforcerCmd),
    #[command(subcommand)]
    Client(client::ClientCmd),
    #[command(subcommand)]
    Audit(audit::AuditCmd),
    Bench(bench::BenchCmd),
}

// Exit codes: 0 clean/benign, 1 violation/harmful, 2 usage, 3 protocol.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.is::<ConfigError>() || err.is::<clap::Error>() {
        2
    } else if err.is::<WireError>() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.role {
        Role::Curator(cmd) => curator::run(cmd).map(|_| 0),
        Role::Enforcer(cmd) => enforcer::run(cmd).map(|_| 0),
        Role::Client(cmd) => client::run(cmd),
        Role::Audit(cmd) => audit::run(cmd),
        Role::Bench(cmd) => bench::run(cmd).map(|_| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
