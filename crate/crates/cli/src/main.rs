use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use readtrace::evaluator::{generate_synthetic, SyntheticSpec};
use readtrace::ingest::{parse_course_outline, write_log_csv};
use readtrace::{report, AnalysisConfig, Error, Store};

#[derive(Debug, Parser)]
#[command(name = "readtrace", version, about = "Find reading problems in online courses from their server logs")]
struct Cli {
    #[command(flatten)]
    config: CliConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CliConfig {
    /// Directory holding the course store.
    #[arg(long, global = true, env = "READTRACE_DATA_DIR", default_value = "readtrace-data")]
    data_dir: PathBuf,
    /// Modified z-score above which an indicator value is anomalous.
    #[arg(long, global = true, env = "READTRACE_MAD_CUTOFF", default_value_t = 3.5)]
    mad_cutoff: f64,
    /// Fixed page-dwell threshold of the baseline splitter, in seconds.
    #[arg(long, global = true, env = "READTRACE_PAGE_THRESHOLD_S", default_value_t = 600.0)]
    page_threshold_s: f64,
    /// Fixed session-length threshold of the baseline splitter, in seconds.
    #[arg(long, global = true, env = "READTRACE_SESSION_THRESHOLD_S", default_value_t = 1800.0)]
    session_threshold_s: f64,
}

impl CliConfig {
    fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            mad_cutoff: self.mad_cutoff,
            page_threshold_s: self.page_threshold_s,
            session_threshold_s: self.session_threshold_s,
        }
    }

    fn open(&self) -> Result<Store> {
        Store::open(&self.data_dir, self.analysis())
            .with_context(|| format!("opening store at {}", self.data_dir.display()))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register a course (if new) and load a CSV log batch into it.
    Ingest { outline: PathBuf, log: PathBuf },
    /// Recompute a course's analysis and print a short summary.
    Analyze { course_id: String },
    /// Print the full report of a course.
    Report {
        course_id: String,
        #[arg(long, value_enum, default_value_t = Format::Structured)]
        format: Format,
        /// Write to this file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Print how the session splitter compares with the fixed-threshold baselines.
    Evaluate { course_id: String },
    /// List registered courses.
    Courses,
    /// Write a synthetic outline and log with known sessions.
    Synthetic {
        /// Directory to write outline.json and log.csv into.
        out_dir: PathBuf,
        #[arg(long, default_value_t = SyntheticSpec::default().n_actors)]
        learners: usize,
        #[arg(long, default_value_t = SyntheticSpec::default().seed)]
        seed: u64,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long, env = "READTRACE_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "READTRACE_PORT", default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Machine-readable JSON.
    Structured,
    /// Same as `structured`.
    Json,
    /// Human-readable tables.
    Text,
}

/// Writes command output; a closed stdout (e.g. `| head`) is not an error.
fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    if let Some(path) = output {
        return fs::write(path, text).with_context(|| format!("writing {}", path.display()));
    }
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn ingest(store: &mut Store, outline: &PathBuf, log: &PathBuf) -> Result<String> {
    let course = parse_course_outline(outline).with_context(|| format!("reading outline {}", outline.display()))?;
    let id = course.course_id().to_owned();
    match store.record(&id) {
        Ok(existing) if existing.course == course => {}
        Ok(_) => bail!("course {id} is already registered with a different outline"),
        Err(Error::NotFound(_)) => {
            store.register(course)?;
        }
        Err(e) => return Err(e.into()),
    }
    let file = fs::File::open(log).with_context(|| format!("opening log {}", log.display()))?;
    let report = store.ingest(&id, std::io::BufReader::new(file))?;
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

fn analyze(store: &mut Store, course_id: &str) -> Result<String> {
    match store.reanalyze(course_id) {
        Ok(_) => Ok(report::render_summary(&report::summary(store.record(course_id)?)?)),
        Err(Error::NoData) => Ok("no data\n".into()),
        Err(e) => Err(e.into()),
    }
}

fn synthetic(out_dir: &PathBuf, learners: usize, seed: u64) -> Result<String> {
    let spec = SyntheticSpec { n_actors: learners, seed, ..SyntheticSpec::default() };
    let log = generate_synthetic(&spec)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let outline = serde_json::to_string_pretty(&log.course)? + "\n";
    fs::write(out_dir.join("outline.json"), outline)?;
    let csv = fs::File::create(out_dir.join("log.csv"))?;
    write_log_csv(std::io::BufWriter::new(csv), &log.events)?;
    Ok(format!(
        "{} events from {} learners in {} sessions written to {}\n",
        log.events.len(),
        learners,
        log.truth.len(),
        out_dir.display()
    ))
}

async fn serve(config: &CliConfig, host: &str, port: u16) -> Result<()> {
    let store = config.open()?;
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .with_context(|| format!("binding {host}:{port}"))?;
    readtrace_server::serve(listener, readtrace_server::router(store)).await?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = &cli.config;
    let text = match &cli.command {
        Command::Ingest { outline, log } => ingest(&mut config.open()?, outline, log)?,
        Command::Analyze { course_id } => analyze(&mut config.open()?, course_id)?,
        Command::Report { course_id, format, output } => {
            let store = config.open()?;
            let record = store.record(course_id)?;
            let body = match format {
                Format::Structured | Format::Json => report::render_json(record)?,
                Format::Text => report::render_text(record)?,
            };
            return emit(&body, output.as_ref());
        }
        Command::Evaluate { course_id } => {
            let store = config.open()?;
            let record = store.record(course_id)?;
            let snap = record.snapshot.as_ref().ok_or(Error::NoData)?;
            serde_json::to_string_pretty(&snap.evaluation)? + "\n"
        }
        Command::Courses => {
            let store = config.open()?;
            store
                .courses()
                .map(|r| format!("{}\t{} elements\t{} events\n", r.course_id(), r.course.len(), r.events.len()))
                .collect()
        }
        Command::Synthetic { out_dir, learners, seed } => synthetic(out_dir, *learners, *seed)?,
        Command::Serve { host, port } => {
            return tokio::runtime::Runtime::new()?.block_on(serve(config, host, *port));
        }
    };
    emit(&text, None)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
