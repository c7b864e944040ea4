mod commands;
mod failure;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use commands::{FamilyChoice, MeasureSelector};
use failure::Failure;

#[derive(Parser)]
#[command(
    name = "robust-snell",
    version,
    about = "Robust American pricing and superhedging on scenario trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robust value and optimal exercise nodes.
    Price(Common),
    /// Superhedging price and strategy, or a verdict on a supplied strategy.
    Hedge(Common),
    /// Superhedging price against the robust value under the chosen family.
    Duality(Common),
    /// Penalization convergence table under one measure.
    Penalize(Common),
    /// Dominating-diffusion verdicts for a characteristics file.
    Characteristics(Common),
    /// Expand a uv/levy generator spec into a tree model.
    Generate(Common),
}

#[derive(Args)]
struct Common {
    path: PathBuf,
    #[arg(long, value_enum, default_value = "given")]
    family: FamilyChoice,
    /// first | last | center | extreme:<k>
    #[arg(long, default_value = "first")]
    measure: MeasureSelector,
    #[arg(long, default_value = "1,10,100,1000")]
    n_list: String,
    /// Also run the exhaustive oracle (capped by ROBUST_SNELL_CAP).
    #[arg(long)]
    brute_force: bool,
    /// Check the strategy in this file instead of computing one.
    #[arg(long)]
    verify_only: Option<PathBuf>,
    /// Write the result here: CSV for `penalize`, the model for `generate`, JSON otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved for randomized sub-procedures; echoed in the payload.
    #[arg(long)]
    seed: Option<u64>,
}

/// Runs one command; the second element is text for `--out` when it differs from the JSON.
fn run(command: &Command) -> Result<(Value, Option<String>), Failure> {
    match command {
        Command::Price(a) => {
            let model = commands::load_any(&a.path)?;
            Ok((commands::price(&model, a.family, a.brute_force)?, None))
        }
        Command::Hedge(a) => {
            let model = commands::load_any(&a.path)?;
            Ok((commands::hedge(&model, a.verify_only.as_deref())?, None))
        }
        Command::Duality(a) => {
            let model = commands::load_any(&a.path)?;
            Ok((commands::duality(&model, a.family, a.brute_force)?, None))
        }
        Command::Penalize(a) => {
            let model = commands::load_any(&a.path)?;
            let n_list = commands::parse_n_list(&a.n_list)?;
            let (payload, csv) = commands::penalize(&model, a.measure, &n_list)?;
            Ok((payload, Some(csv)))
        }
        Command::Characteristics(a) => Ok((commands::characteristics(&a.path)?, None)),
        Command::Generate(a) => {
            let (payload, text) = commands::generate(&a.path)?;
            Ok((payload, Some(text)))
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Price(a)
        | Command::Hedge(a)
        | Command::Duality(a)
        | Command::Penalize(a)
        | Command::Characteristics(a)
        | Command::Generate(a) => a,
    }
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        code: "E_IO",
        exit: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = common(&cli.command);
    let start = Instant::now();
    let outcome = run(&cli.command);
    let timing_ms = start.elapsed().as_secs_f64() * 1e3;

    let (result, exit) = match outcome {
        Ok((mut payload, artifact)) => {
            payload["seed"] = json!(args.seed);
            let result = json!({ "status": "ok", "payload": payload, "timing_ms": timing_ms });
            let write = args.out.as_deref().map(|path| {
                let text = artifact.unwrap_or_else(|| pretty(&result));
                write_out(path, &text)
            });
            match write {
                Some(Err(f)) => (error_result(&f, timing_ms), f.exit),
                _ => (result, 0),
            }
        }
        Err(f) => (error_result(&f, timing_ms), f.exit),
    };
    // A closed pipe (e.g. `| head`) is not worth a panic.
    let _ = writeln!(std::io::stdout().lock(), "{}", pretty(&result));
    if exit != 0 {
        if let Some(msg) = result.pointer("/error/message").and_then(Value::as_str) {
            eprintln!("robust-snell: {msg}");
        }
    }
    ExitCode::from(exit)
}

fn error_result(f: &Failure, timing_ms: f64) -> Value {
    json!({
        "status": "error",
        "error": { "code": f.code, "message": f.message },
        "timing_ms": timing_ms,
    })
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value serializes")
}
