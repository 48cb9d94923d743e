use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sympflux::report::{self, Report};
use sympflux::scenario::{self, FIXTURE_ENV};

/// Splitting seminorms and distances to the Hamiltonian group on flat tori.
#[derive(Parser, Debug)]
#[command(name = "sympflux", version)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Extra directory searched for scenario fixtures.
    #[arg(long, global = true, env = FIXTURE_ENV)]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario file or fixture and write its JSON report.
    Run {
        config: String,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the scenario seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Write one CSV table per experiment of a report.
    Plotdata {
        report: PathBuf,
        /// Output directory; the current directory when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario against the schema without running it.
    Validate { config: String },
    /// Bundled and directory fixtures.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
}

#[derive(Subcommand, Debug)]
enum FixturesAction {
    List,
}

const EXIT_CHECKS: u8 = 1;
const EXIT_SCHEMA: u8 = 2;

fn load(config: &str, dir: Option<&Path>) -> Result<(scenario::Source, scenario::Scenario), ExitCode> {
    let (source, text) = scenario::resolve(config, dir).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_SCHEMA)
    })?;
    let sc = scenario::parse_scenario(&text).map_err(|e| {
        eprintln!("schema error in {source} at {}: {}", e.pointer, e.message);
        ExitCode::from(EXIT_SCHEMA)
    })?;
    Ok((source, sc))
}

fn run(config: &str, dir: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> ExitCode {
    let (source, mut sc) = match load(config, dir) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    log::info!("running {} from {source}", sc.name);
    let report = match report::run_scenario(&sc) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CHECKS);
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, json + "\n") {
                eprintln!("error: cannot write {}: {e}", p.display());
                return ExitCode::from(EXIT_CHECKS);
            }
        }
        None => println!("{json}"),
    }
    let total = report.checks().count();
    if report.passed {
        eprintln!("{}: {total} checks passed", sc.name);
        ExitCode::SUCCESS
    } else {
        eprintln!("{}: {} of {total} checks failed", sc.name, report.failing.len());
        for c in report.checks().filter(|c| !c.passed) {
            eprintln!("FAIL {}: {}", c.name, c.detail);
        }
        ExitCode::from(EXIT_CHECKS)
    }
}

fn plotdata(path: &Path, out: Option<&Path>) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    let report: Report = match serde_path_to_error::deserialize(de) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("not a report: {} at {}", e.inner(), e.path());
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    let dir = out.unwrap_or(Path::new("."));
    if let Err(e) = std::fs::create_dir_all(dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return ExitCode::from(EXIT_CHECKS);
    }
    for (name, csv) in report::plotdata(&report) {
        let p = dir.join(name);
        if let Err(e) = std::fs::write(&p, csv) {
            eprintln!("error: cannot write {}: {e}", p.display());
            return ExitCode::from(EXIT_CHECKS);
        }
        println!("{}", p.display());
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCHEMA);
        }
    }
    let dir = cli.fixtures.as_deref();
    match cli.command {
        Command::Run { config, out, seed_override } => run(&config, dir, out.as_deref(), seed_override),
        Command::Plotdata { report, out } => plotdata(&report, out.as_deref()),
        Command::Validate { config } => match load(&config, dir) {
            Ok((source, sc)) => {
                println!("{source}: valid scenario {:?} with {} experiments", sc.name, sc.experiments.len());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Fixtures { action: FixturesAction::List } => match scenario::list_fixtures(dir) {
            Ok(list) => {
                for (name, source) in list {
                    println!("{name}\t{source}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_SCHEMA)
            }
        },
    }
}
