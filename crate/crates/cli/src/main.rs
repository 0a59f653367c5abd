use clap::Parser;
use parh_cli::config::{Args, RunConfig};
use parh_cli::{init_threads, run, CliError};
use std::process::ExitCode;

fn fail(command: &str, e: &CliError) -> ExitCode {
    let v = serde_json::json!({
        "command": command,
        "inputs_digest": null,
        "error": { "kind": e.kind(), "message": e.to_string() },
    });
    print!("{}", parh_cli::report::render(&v));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let name = args.command.name();
    if let Err(e) = init_threads(std::env::var("PARH_THREADS").ok()) {
        return fail(name, &e);
    }
    let cfg = match RunConfig::from_args(args) {
        Ok(c) => c,
        Err(e) => return fail(name, &e),
    };
    let out = run(&cfg);
    print!("{}", out.json);
    ExitCode::from(out.exit_code as u8)
}
