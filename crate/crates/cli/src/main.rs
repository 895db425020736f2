use congra::gateway;

use std::io::{self, BufRead, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use congra_core::analyzer::{analyze, resolve_anaphora, tokenize};
use congra_core::cqi::{serve_robot, SimParams, Simulator};
use congra_core::grammar::{load_grammar_dir, Grammar};
use congra_core::session::{run_script, Session, TcpLink};
use congra_core::specializer::{ntuple_to_canonical_text, specialize};
use congra_core::world::{load_world, SituationModel};
use tracing::info;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "congra", version, about = "Construction-grammar dialog for robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tree,
    Canonical,
}

#[derive(Subcommand)]
enum Command {
    /// Print the best analysis of an utterance.
    Analyze {
        #[arg(long, default_value = "grammar")]
        grammar: PathBuf,
        text: String,
        #[arg(long, value_enum, default_value_t = Format::Tree)]
        format: Format,
    },
    /// Print the n-tuple for an utterance.
    Specialize {
        #[arg(long, default_value = "grammar")]
        grammar: PathBuf,
        text: String,
    },
    /// Talk to the robot interactively.
    Repl {
        #[arg(long, default_value = "grammar")]
        grammar: PathBuf,
        #[arg(long)]
        world: PathBuf,
        /// `builtin` or `tcp:HOST:PORT`.
        #[arg(long, default_value = "builtin")]
        sim: String,
    },
    /// Run a script of utterances against the builtin simulator.
    Run {
        #[arg(long, default_value = "grammar")]
        grammar: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Compare the transcript with this file instead of printing it.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Serve the dialog gateway and the UI bundle.
    Serve {
        #[arg(long, default_value = "grammar")]
        grammar: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "ui/dist")]
        ui_dir: PathBuf,
    },
    /// Run the simulated robot as a TCP server.
    Sim {
        #[arg(long, default_value = "grammar")]
        grammar: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 7071)]
        port: u16,
        /// Run simulated time as fast as possible.
        #[arg(long)]
        fast: bool,
    },
}

fn grammar(dir: &Path) -> Result<Arc<Grammar>> {
    let g = load_grammar_dir(dir).with_context(|| format!("loading grammar from {}", dir.display()))?;
    Ok(Arc::new(g))
}

fn world(path: &Path, g: &Arc<Grammar>) -> Result<SituationModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_world(&text, g.clone()).with_context(|| format!("loading world {}", path.display()))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("CONGRA_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze { grammar: dir, text, format } => {
            let g = grammar(&dir)?;
            let tokens = tokenize(&text)?;
            let head = analyze(&g, &tokens)?.into_iter().next().context("no analysis")?;
            let resolved = resolve_anaphora(&g, &head.semspec)?;
            if !head.is_full_span(tokens.len()) {
                eprintln!("warning: best analysis covers only {} of {} tokens", head.covered.len(), tokens.len());
            }
            match format {
                Format::Tree => {
                    println!("{} [{} of {} tokens]", head.construction, head.covered.len(), tokens.len());
                    print!("{}", resolved.canonical_text());
                }
                Format::Canonical => print!("{}", resolved.canonical_text()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Specialize { grammar: dir, text } => {
            let g = grammar(&dir)?;
            let tokens = tokenize(&text)?;
            let head = analyze(&g, &tokens)?.into_iter().next().context("no analysis")?;
            if !head.is_full_span(tokens.len()) {
                bail!("only part of the utterance was understood");
            }
            let n = specialize(&g, &resolve_anaphora(&g, &head.semspec)?)?;
            print!("{}", ntuple_to_canonical_text(&n));
            Ok(ExitCode::SUCCESS)
        }
        Command::Repl { grammar: dir, world: w, sim } => {
            let g = grammar(&dir)?;
            let m = world(&w, &g)?;
            let mut session = match sim.strip_prefix("tcp:") {
                Some(addr) => {
                    let link = TcpLink::connect(addr, Duration::from_secs(120))
                        .with_context(|| format!("connecting to robot at {addr}"))?;
                    Session::new(g, m, Box::new(link), None)?
                }
                None if sim == "builtin" => Session::builtin(g, m, true),
                None => bail!("--sim must be builtin or tcp:HOST:PORT"),
            };
            let stdin = io::stdin();
            let mut out = io::stdout();
            write!(out, "> ")?;
            out.flush()?;
            for line in stdin.lock().lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    for e in session.repl_turn(&line) {
                        if e.kind.in_transcript() {
                            writeln!(out, "{e}")?;
                        }
                    }
                }
                write!(out, "> ")?;
                out.flush()?;
            }
            writeln!(out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            grammar: dir,
            world: w,
            script,
            golden,
        } => {
            let g = grammar(&dir)?;
            let m = world(&w, &g)?;
            let text = std::fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            let (transcript, status) = run_script(&text, g, m);
            match golden {
                None => {
                    print!("{transcript}");
                    Ok(ExitCode::from(status as u8))
                }
                Some(path) => {
                    let want =
                        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    if let Some((line, got, expected)) = first_difference(&transcript, &want) {
                        eprintln!("transcript differs from {} at line {line}", path.display());
                        eprintln!("  expected: {expected}");
                        eprintln!("  actual:   {got}");
                        return Ok(ExitCode::FAILURE);
                    }
                    println!("transcript matches {}", path.display());
                    Ok(ExitCode::from(status as u8))
                }
            }
        }
        Command::Serve {
            grammar: dir,
            world: w,
            port,
            ui_dir,
        } => {
            let g = grammar(&dir)?;
            let m = world(&w, &g)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
                    .await
                    .with_context(|| format!("binding port {port}"))?;
                info!(port, "gateway listening");
                gateway::serve(listener, g, m, ui_dir).await
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sim {
            grammar: dir,
            world: w,
            port,
            fast,
        } => {
            let g = grammar(&dir)?;
            let m = world(&w, &g)?;
            let listener = TcpListener::bind(("0.0.0.0", port)).with_context(|| format!("binding port {port}"))?;
            info!(port, "simulator listening");
            for stream in listener.incoming() {
                let stream = stream?;
                info!(peer = ?stream.peer_addr().ok(), "robot client connected");
                let sim = Simulator::new(m.clone(), SimParams::default());
                if let Err(e) = serve_robot(stream, sim, !fast) {
                    info!(error = %e, "robot client disconnected");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn first_difference<'a>(got: &'a str, want: &'a str) -> Option<(usize, &'a str, &'a str)> {
    let (mut g, mut w) = (got.lines(), want.lines());
    let mut n = 0;
    loop {
        n += 1;
        match (g.next(), w.next()) {
            (None, None) => return (got.ends_with('\n') != want.ends_with('\n')).then_some((n, "", "")),
            (a, b) if a == b => continue,
            (a, b) => return Some((n, a.unwrap_or("<end>"), b.unwrap_or("<end>"))),
        }
    }
}
