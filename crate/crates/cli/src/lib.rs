//! Batch front-end: parses spec files, runs one command and renders a JSON report.

pub mod commands;
pub mod config;
mod error;
pub mod report;
pub mod schema;

pub use error::{CliError, EXIT_INVALID, EXIT_NOT_CONVERGED};

use commands::{dispatch, Inputs};
use config::RunConfig;
use schema::{parse_intersection, parse_spec, serialize_spec, IntersectionText};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Report text and process exit code of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub json: String,
    pub exit_code: i32,
}

fn error_json(e: &CliError) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

/// SHA-256 over the command, the canonical inputs and the result-relevant options.
fn digest(cfg: &RunConfig, inp: &Inputs, ix_text: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(cfg.command.name().as_bytes());
    h.update(b"\n--spec\n");
    if let Some(s) = &inp.spec {
        h.update(serialize_spec(s).as_bytes());
    }
    h.update(b"\n--intersection\n");
    if let Some(t) = ix_text {
        h.update(t.as_bytes());
    }
    h.update(b"\n--config\n");
    h.update(cfg.canonical().as_bytes());
    format!("{:x}", h.finalize())
}

fn load(cfg: &RunConfig) -> Result<(Inputs, Option<String>), CliError> {
    let spec = cfg.spec.as_deref().map(parse_spec).transpose()?.map(|(s, _)| s);
    let (intersection, ix_text) = match (&cfg.intersection, &spec) {
        (Some(p), Some(s)) => {
            let (ix, text) = parse_intersection(p, s)?;
            let canonical = IntersectionText::from_toml(&text, &p.display().to_string())?.to_toml();
            (Some(ix), Some(canonical))
        }
        (Some(_), None) => return Err(CliError::Config("--intersection needs --spec".into())),
        _ => (None, None),
    };
    Ok((Inputs { spec, intersection }, ix_text))
}

/// Runs one command. Identical configurations and inputs give identical bytes.
pub fn run(cfg: &RunConfig) -> RunOutput {
    let name = cfg.command.name();
    let (inp, ix_text) = match cfg.validate().and_then(|_| load(cfg)) {
        Ok(v) => v,
        Err(e) => {
            let v = json!({ "command": name, "inputs_digest": Value::Null, "error": error_json(&e) });
            return RunOutput { json: report::render(&v), exit_code: e.exit_code() };
        }
    };
    let digest = digest(cfg, &inp, ix_text.as_deref());
    let (v, code) = match dispatch(cfg, &inp) {
        Ok(out) => {
            let mut v = json!({
                "command": name,
                "inputs_digest": digest,
                "result": out.result,
                "diagnostics": out.diagnostics,
            });
            let code = match &out.failure {
                Some(e) => {
                    v["error"] = error_json(e);
                    e.exit_code()
                }
                None => 0,
            };
            (v, code)
        }
        Err(e) => (json!({ "command": name, "inputs_digest": digest, "error": error_json(&e) }), e.exit_code()),
    };
    let text = report::render(&v);
    if let Some(dir) = &cfg.out {
        let path = dir.join(format!("{name}.json"));
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, &text)) {
            let err = CliError::Io { path: path.display().to_string(), detail: e.to_string() };
            let v = json!({ "command": name, "inputs_digest": digest, "error": error_json(&err) });
            return RunOutput { json: report::render(&v), exit_code: err.exit_code() };
        }
    }
    RunOutput { json: text, exit_code: code }
}

/// Caps the global thread pool from `PARH_THREADS` when set.
pub fn init_threads(var: Option<String>) -> Result<(), CliError> {
    let Some(v) = var else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| CliError::Config(format!("PARH_THREADS={v:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}
