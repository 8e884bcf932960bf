//! `iglu`: run episodes, evaluate and replay episode files, validate task
//! files, serve the session protocol and score instruction text.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use iglu_core::agents::AgentKind;
use iglu_core::metrics::{EvalReport, KeywordLexicon, ReportFormat, TextReport};
use iglu_core::replay::{
    replay_verify, run_episode, EpisodeRecord, SystemClock, VerifyOptions, VerifyReport, EPISODE_EXTENSION,
};
use iglu_core::tasks::{parse_tasks_with, validate_task, DifficultyThresholds, TaskLibrary};
use iglu_core::EpisodeConfig;
use iglu_server::{Server, ServerConfig, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(
    name = "iglu",
    version,
    about = "Voxel building episodes: run, evaluate, replay, serve"
)]
struct Cli {
    /// Report encoding.
    #[arg(long, global = true, env = "IGLU_FORMAT", default_value = "text")]
    format: ReportFormat,
    /// Extra task file loaded next to the bundled tasks.
    #[arg(long, global = true, env = "IGLU_TASKS")]
    tasks: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run built-in agent episodes and write one episode file each.
    Run(RunArgs),
    /// Score episode files.
    Eval {
        /// Episode files, or directories holding them.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Re-run episode files and compare against what was recorded.
    Replay {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Verify files written by another engine version.
        #[arg(long)]
        allow_version_mismatch: bool,
    },
    /// Check a task file.
    ValidateTask { file: PathBuf },
    /// Serve the session protocol (TCP and WebSocket on one port).
    Serve(ServeArgs),
    /// BLEU-1..4 and keyword precision/recall of candidate lines.
    Bleu {
        /// One candidate per line.
        #[arg(long)]
        candidates: PathBuf,
        /// Reference file, line-aligned with the candidates; repeat for
        /// several references per candidate.
        #[arg(long, required = true)]
        references: Vec<PathBuf>,
        /// TOML lexicon with `colors`, `spatial` and `dialog` arrays.
        #[arg(long, env = "IGLU_LEXICON")]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, env = "IGLU_TASK")]
    task: String,
    #[arg(long, env = "IGLU_AGENT", default_value = "random")]
    agent: AgentKind,
    #[arg(long, env = "IGLU_EPISODES", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    episodes: u32,
    /// Seed of the first episode; episode k uses seed + k.
    #[arg(long, env = "IGLU_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "IGLU_MAX_STEPS", default_value_t = iglu_core::env::DEFAULT_MAX_STEPS)]
    max_steps: u32,
    /// Directory for episode files.
    #[arg(long, env = "IGLU_OUT", default_value = "episodes")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "IGLU_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "IGLU_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Record every episode to this directory.
    #[arg(long, env = "IGLU_OUT")]
    out: Option<PathBuf>,
    /// Seconds without client messages before a session is closed.
    #[arg(long, env = "IGLU_IDLE_TIMEOUT", default_value_t = 600)]
    idle_timeout: u64,
}

/// Exit statuses.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
    Divergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Divergence(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Validation(m) | Failure::Divergence(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let format = cli.format;
    match cli.command {
        Command::Run(args) => run(args, &library(cli.tasks.as_deref())?, format),
        Command::Eval { files } => eval(&files, format),
        Command::Replay {
            files,
            allow_version_mismatch,
        } => replay(
            &files,
            &library(cli.tasks.as_deref())?,
            VerifyOptions { allow_version_mismatch },
            format,
        ),
        Command::ValidateTask { file } => validate(&file, format),
        Command::Serve(args) => serve(args, library(cli.tasks.as_deref())?),
        Command::Bleu {
            candidates,
            references,
            lexicon,
        } => bleu(&candidates, &references, lexicon.as_deref(), format),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn library(extra: Option<&Path>) -> Result<TaskLibrary, Failure> {
    let mut lib = TaskLibrary::bundled();
    if let Some(path) = extra {
        let more = TaskLibrary::from_text(&read(path)?)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        lib.extend(more)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    }
    Ok(lib)
}

fn run(args: RunArgs, lib: &TaskLibrary, format: ReportFormat) -> Result<(), Failure> {
    lib.get(&args.task).map_err(|e| Failure::Usage(e.to_string()))?;
    let records = (0..args.episodes)
        .into_par_iter()
        .map(|k| {
            let seed = args.seed + k as u64;
            let config = EpisodeConfig::new(&args.task)
                .with_seed(seed)
                .with_max_steps(args.max_steps);
            let mut agent = args.agent.build(seed);
            run_episode(config, lib, agent.as_mut(), Box::new(SystemClock))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;

    fs::create_dir_all(&args.out).map_err(|e| Failure::Usage(format!("{}: {e}", args.out.display())))?;
    for (k, record) in records.iter().enumerate() {
        let path = args.out.join(format!("{}-{k:04}.{EPISODE_EXTENSION}", args.task));
        record
            .save(&path)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    eprintln!("wrote {} episode files to {}", records.len(), args.out.display());
    let summaries: Vec<_> = records.iter().map(EpisodeRecord::summary).collect();
    let report = EvalReport::new(&summaries).expect("at least one episode");
    print!("{}", report.render(format));
    Ok(())
}

/// Expands directories into their episode files, sorted by name.
fn episode_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|e| Failure::Validation(format!("{}: {e}", input.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == EPISODE_EXTENSION))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn load_checked(path: &Path) -> Result<EpisodeRecord, String> {
    let record = EpisodeRecord::load(path).map_err(|e| e.to_string())?;
    record.check_consistency().map_err(|e| e.to_string())?;
    Ok(record)
}

fn eval(inputs: &[PathBuf], format: ReportFormat) -> Result<(), Failure> {
    let files = episode_files(inputs)?;
    let mut summaries = Vec::new();
    let mut failed = 0;
    for path in &files {
        match load_checked(path) {
            Ok(r) => summaries.push(r.summary()),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failed += 1;
            }
        }
    }
    if summaries.is_empty() {
        return Err(Failure::Validation("no readable episode files".into()));
    }
    print!("{}", EvalReport::new(&summaries).expect("nonempty").render(format));
    if failed > 0 {
        return Err(Failure::Validation(format!("{failed} of {} files failed", files.len())));
    }
    Ok(())
}

#[derive(Serialize)]
struct ReplayRow {
    file: String,
    ok: bool,
    steps_checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    divergence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn replay(inputs: &[PathBuf], lib: &TaskLibrary, options: VerifyOptions, format: ReportFormat) -> Result<(), Failure> {
    let files = episode_files(inputs)?;
    let rows: Vec<ReplayRow> = files
        .par_iter()
        .map(|path| {
            let file = path.display().to_string();
            let verified = EpisodeRecord::load(path).and_then(|r| replay_verify(&r, lib, options));
            match verified {
                Ok(VerifyReport {
                    steps_checked,
                    divergence,
                }) => ReplayRow {
                    file,
                    ok: divergence.is_none(),
                    steps_checked,
                    divergence: divergence.map(|d| d.to_string()),
                    error: None,
                },
                Err(e) => ReplayRow {
                    file,
                    ok: false,
                    steps_checked: 0,
                    divergence: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    match format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize")),
        ReportFormat::Text => {
            for r in &rows {
                match (&r.divergence, &r.error) {
                    (Some(d), _) => println!("divergence {} {d}", r.file),
                    (_, Some(e)) => println!("error {} {e}", r.file),
                    _ => println!("ok {} steps={}", r.file, r.steps_checked),
                }
            }
        }
    }
    let diverged = rows.iter().filter(|r| r.divergence.is_some()).count();
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    if diverged > 0 {
        Err(Failure::Divergence(format!(
            "{diverged} of {} files diverged",
            rows.len()
        )))
    } else if errors > 0 {
        Err(Failure::Validation(format!(
            "{errors} of {} files could not be verified",
            rows.len()
        )))
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct TaskRow {
    task_id: String,
    difficulty: String,
    blocks: usize,
    subgoals: usize,
    ok: bool,
    violations: Vec<String>,
    warnings: Vec<String>,
}

fn validate(path: &Path, format: ReportFormat) -> Result<(), Failure> {
    let tasks = parse_tasks_with(&read(path)?, &DifficultyThresholds::default())
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<TaskRow> = tasks
        .iter()
        .map(|t| {
            let report = validate_task(t);
            TaskRow {
                task_id: t.task_id.clone(),
                difficulty: t.difficulty.to_string(),
                blocks: t.target.len(),
                subgoals: t.subgoals.len(),
                ok: report.is_ok(),
                violations: report.violations.iter().map(ToString::to_string).collect(),
                warnings: report.warnings.iter().map(ToString::to_string).collect(),
            }
        })
        .collect();
    let mut seen = std::collections::HashSet::new();
    for row in &mut rows {
        if !seen.insert(row.task_id.clone()) {
            row.ok = false;
            row.violations
                .push(format!("DuplicateId: `{}` appears more than once", row.task_id));
        }
    }

    match format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize")),
        ReportFormat::Text => {
            let mut out = String::new();
            for r in &rows {
                let status = if r.ok { "ok" } else { "invalid" };
                writeln!(
                    out,
                    "task {} {status} difficulty={} blocks={} subgoals={}",
                    r.task_id, r.difficulty, r.blocks, r.subgoals
                )
                .unwrap();
                for v in &r.violations {
                    writeln!(out, "  violation {v}").unwrap();
                }
                for w in &r.warnings {
                    writeln!(out, "  warning {w}").unwrap();
                }
            }
            print!("{out}");
        }
    }
    let bad = rows.iter().filter(|r| !r.ok).count();
    if bad > 0 {
        return Err(Failure::Validation(format!("{bad} of {} tasks invalid", rows.len())));
    }
    Ok(())
}

fn serve(args: ServeArgs, lib: TaskLibrary) -> Result<(), Failure> {
    let config = ServerConfig {
        idle_timeout: Duration::from_secs(args.idle_timeout.max(1)),
        record_dir: args.out,
        ..Default::default()
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
    runtime.block_on(async {
        let server = Server::bind((args.host.as_str(), args.port), lib, config)
            .await
            .map_err(|e| Failure::Usage(format!("cannot bind {}:{}: {e}", args.host, args.port)))?;
        let addr = server.local_addr().map_err(|e| Failure::Usage(e.to_string()))?;
        eprintln!("listening on {addr} (newline-delimited JSON and WebSocket)");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        server
            .run_until(shutdown)
            .await
            .map_err(|e| Failure::Usage(e.to_string()))
    })
}

fn lines(path: &Path) -> Result<Vec<String>, Failure> {
    Ok(read(path)?.lines().map(str::to_string).collect())
}

fn bleu(
    candidates: &Path,
    references: &[PathBuf],
    lexicon: Option<&Path>,
    format: ReportFormat,
) -> Result<(), Failure> {
    let lex = match lexicon {
        Some(p) => {
            KeywordLexicon::from_toml(&read(p)?).map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?
        }
        None => KeywordLexicon::default(),
    };
    let cands = lines(candidates)?;
    let ref_files = references.iter().map(|p| lines(p)).collect::<Result<Vec<_>, _>>()?;
    for (path, refs) in references.iter().zip(&ref_files) {
        if refs.len() != cands.len() {
            return Err(Failure::Validation(format!(
                "{} has {} lines but {} has {}",
                path.display(),
                refs.len(),
                candidates.display(),
                cands.len()
            )));
        }
    }
    let cand_refs: Vec<&str> = cands.iter().map(String::as_str).collect();
    let per_candidate: Vec<Vec<&str>> = (0..cands.len())
        .map(|i| ref_files.iter().map(|f| f[i].as_str()).collect())
        .collect();
    let report = TextReport::new(&cand_refs, &per_candidate, &lex).map_err(|e| Failure::Validation(e.to_string()))?;
    print!("{}", report.render(format));
    Ok(())
}
