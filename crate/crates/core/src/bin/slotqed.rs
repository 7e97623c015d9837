use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slotqed::scenario::ScenarioFile;
use slotqed::{verify, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "slotqed", version = slotqed_version(), about = "Collective line shifts of atoms near a slot waveguide")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SLOTQED_WORKERS")]
    workers: Option<usize>,
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep declared in a scenario file.
    Run {
        scenario: PathBuf,
        /// Output directory; overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle suite and print a pass/fail table.
    Verify,
    /// Regenerate the reference tables into a directory.
    OracleTables { dir: PathBuf },
}

fn slotqed_version() -> &'static str {
    Box::leak(slotqed::version_string().into_boxed_str())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn run(path: &Path, out: Option<PathBuf>, quiet: bool) -> Result<(), Error> {
    let file = ScenarioFile::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config {
            path: path.display().to_string(),
            message: io.to_string(),
        },
        e => e,
    })?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty());
    let scenario = file.resolve(base)?;
    let dir = out.unwrap_or_else(|| {
        let d = &scenario.file.output.directory;
        match base {
            Some(b) if d.is_relative() => b.join(d),
            _ => d.clone(),
        }
    });
    log::info!("config hash {}", scenario.hash);
    let outcome = scenario.run_to_dir(&dir)?;
    if !quiet {
        let g0 = scenario.sim.params.gamma0;
        for (i, p) in outcome.points.iter().enumerate() {
            match (&p.shift, &p.fit, &p.error) {
                (Some(r), _, _) => println!(
                    "{i:>3}  x = {:<12.5e} N = {:<4} shift = {:+.4} ± {:.4} Γ0{}",
                    p.x,
                    p.n_atoms,
                    r.shift / g0,
                    r.shift_err / g0,
                    if r.ok { "" } else { "  (fit not converged)" }
                ),
                (None, Some(f), _) => println!(
                    "{i:>3}  centre = {:+.4} ± {:.4} Γ0  width = {:.4} Γ0{}",
                    f.center / g0,
                    f.center_err / g0,
                    f.width / g0,
                    if f.converged { "" } else { "  (fit not converged)" }
                ),
                (None, None, Some(e)) => println!("{i:>3}  failed: {e}"),
                _ => {}
            }
        }
        println!(
            "wrote {} files to {} in {:.1} s",
            outcome.files.len(),
            dir.display(),
            outcome.wall_time
        );
    }
    let bad = outcome.failed_points();
    if bad > 0 {
        log::warn!("{bad} sweep point(s) flagged; see shifts.csv and fits.toml");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "error"
    } else if cli.verbose {
        "debug"
    } else {
        "warn"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be >= 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let result = match cli.command {
        Command::Run { scenario, out } => run(&scenario, out, cli.quiet),
        Command::Verify => {
            let checks = verify::run_checks();
            if !cli.quiet {
                print!("{}", verify::format_report(&checks));
            }
            if checks.iter().all(|c| c.pass) {
                Ok(())
            } else {
                return ExitCode::from(EXIT_VERIFY);
            }
        }
        Command::OracleTables { dir } => slotqed::ingest::write_oracle_tables(&dir).map(|files| {
            if !cli.quiet {
                for f in files {
                    println!("{}", f.display());
                }
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
