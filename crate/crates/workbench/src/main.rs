use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use hypercex_core::checker::DEFAULT_BOUND;
use hypercex_workbench::api::router;
use hypercex_workbench::bundle::Bundle;
use hypercex_workbench::pipeline::{self, Outcome};
use hypercex_workbench::store::Store;

#[derive(Parser)]
#[command(name = "hypercex", version, about = "HyperLTL counterexample workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a counterexample and explain it.
    Check {
        /// Machine JSON or AIGER (`aag`) file.
        machine: PathBuf,
        /// Formula file, or the formula itself.
        formula: String,
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: usize,
        /// Write the bundle here when a counterexample is found.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Explain an externally produced counterexample.
    Explain {
        machine: PathBuf,
        cex: PathBuf,
        formula: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the machine's state graph in DOT.
    ExportDot { machine: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "HYPERCEX_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn formula_text(arg: &str) -> Result<String, String> {
    let p = Path::new(arg);
    if p.is_file() {
        read(p)
    } else {
        Ok(arg.to_string())
    }
}

fn report(bundle: &Bundle, json: Option<&Path>) -> Result<(), String> {
    println!("counterexample: {}", bundle.summary);
    for s in &bundle.statements {
        println!("  [{}] {}", s.statement.statement_id, s.text);
    }
    if let Some(out) = json {
        fs::write(out, bundle.to_json()).map_err(|e| format!("{}: {e}", out.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Check { machine, formula, bound, json } => {
            let outcome = pipeline::check_sources(&read(&machine)?, &formula_text(&formula)?, bound)
                .map_err(|e| e.to_string())?;
            match outcome {
                Outcome::PassBounded(b) => {
                    println!("no counterexample up to bound {b}");
                    Ok(ExitCode::SUCCESS)
                }
                Outcome::Fail(bundle) => {
                    report(&bundle, json.as_deref())?;
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Explain { machine, cex, formula, json } => {
            let bundle = pipeline::explain_sources(&read(&machine)?, &read(&cex)?, &formula_text(&formula)?)
                .map_err(|e| e.to_string())?;
            report(&bundle, json.as_deref())?;
            Ok(ExitCode::from(1))
        }
        Command::ExportDot { machine } => {
            let sys = pipeline::load_system(&read(&machine)?).map_err(|e| e.to_string())?;
            match sys.machine {
                Some(m) => {
                    print!("{}", m.to_dot(None));
                    Ok(ExitCode::SUCCESS)
                }
                None => Err(format!("state graph not available: {}", sys.unavailable.unwrap_or_default())),
            }
        }
        Command::Serve { port, data_dir } => {
            let store = Store::open(&data_dir).map_err(|e| e.to_string())?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(async move {
                let addr = SocketAddr::from(([127, 0, 0, 1], port));
                let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| e.to_string())?;
                log::info!("listening on {addr}, data in {}", data_dir.display());
                axum::serve(listener, router(Arc::new(store))).await.map_err(|e| e.to_string())
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
