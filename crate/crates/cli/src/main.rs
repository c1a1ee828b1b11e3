mod args;
mod commands;
mod manifest;
mod model;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;

use args::{Cli, Command};
use manifest::{Manifest, Timing};
use run::{CliError, Run};

fn configure_threads() -> Result<(), CliError> {
    let Ok(text) = std::env::var("POCLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("POCLAB_THREADS must be a positive integer, got '{text}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn execute(command: &Command, run: &mut Run) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => commands::simulate(a, run),
        Command::Criteria(a) => commands::criteria(a, run),
        Command::PhaseScan(a) => commands::phase_scan(a, run),
        Command::Percolate(a) => commands::percolate(a, run),
        Command::Disagree(a) => commands::disagree(a, run),
        Command::Replay(_) => Err(CliError::Usage("a replay cannot replay itself".into())),
    }
}

fn seed_of(command: &Command) -> Option<u64> {
    match command {
        Command::Simulate(a) => Some(a.seed),
        Command::Criteria(a) => Some(a.seed),
        Command::PhaseScan(a) => Some(a.seed),
        Command::Percolate(a) => Some(a.seed),
        Command::Disagree(a) => Some(a.seed),
        Command::Replay(_) => None,
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Simulate(_) => "simulate",
        Command::Criteria(_) => "criteria",
        Command::PhaseScan(_) => "phase-scan",
        Command::Percolate(_) => "percolate",
        Command::Disagree(_) => "disagree",
        Command::Replay(_) => "replay",
    }
}

fn record(cli: &Cli, args: Vec<String>) -> Result<(), CliError> {
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut run = Run::default();
    execute(&cli.command, &mut run)?;
    for (path, bytes) in &run.files {
        std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    let manifest_path = cli.manifest.clone().unwrap_or_else(|| match run.files.first() {
        Some((p, _)) => {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("poclab-{}.manifest.json", command_name(&cli.command))),
    });
    let timing = Timing {
        started_unix,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    };
    let config = serde_json::to_value(&cli.command)?;
    let manifest = Manifest::new(args, config, seed_of(&cli.command), &run, timing);
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", manifest_path.display())))?;
    let mut out = std::io::stdout().lock();
    out.write_all(run.stdout.as_bytes())?;
    writeln!(out, "manifest: {}", manifest_path.display())?;
    Ok(())
}

fn replay(path: &std::path::Path) -> Result<(), CliError> {
    let manifest = Manifest::read(path).map_err(CliError::Runtime)?;
    let argv = std::iter::once("poclab".to_string()).chain(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Runtime(format!("recorded arguments: {e}")))?;
    let mut run = Run::default();
    execute(&cli.command, &mut run)?;
    let problems = manifest::compare(&manifest, &run);
    if problems.is_empty() {
        println!(
            "replay identical: {} outputs and standard output match",
            manifest.outputs.len()
        );
        Ok(())
    } else {
        Err(CliError::Runtime(format!("replay differs:\n  {}", problems.join("\n  "))))
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Replay(r) => replay(&r.manifest),
        _ => record(&cli, argv[1..].to_vec()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
