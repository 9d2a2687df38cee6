use std::fmt::Display;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use logscope::config::KEYS;
use logscope::synth::{self, Planted};
use logscope::tsv::quote_field;
use logscope::{Config, ReportKind, Stage, Workspace};

/// Web and SQL log analytics over an on-disk workspace.
#[derive(Parser)]
#[command(name = "logscope", version)]
struct Cli {
    /// Workspace directory.
    #[arg(long, global = true, env = "LOGSCOPE_WORKSPACE", alias = "corpus")]
    workspace: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a workspace; settings come from --config, then flags.
    Init {
        /// Settings file to start from.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Run the ingest stage.
    Ingest {
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        settings: Settings,
    },
    /// Run pipeline stages in dependency order.
    Run {
        /// Comma-separated subset of ingest,fingerprint,sessionize,classify,report.
        #[arg(long, value_delimiter = ',', value_parser = parse_stage)]
        stages: Option<Vec<Stage>>,
        #[command(flatten)]
        run: RunOpts,
        #[command(flatten)]
        settings: Settings,
    },
    /// Show each stage as current, stale or missing.
    Status {
        #[command(flatten)]
        settings: Settings,
    },
    /// Write one report outside the pipeline.
    Report {
        #[arg(long, value_parser = parse_kind)]
        kind: ReportKind,
        /// Output directory; defaults to reports/<kind> in the workspace.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Suggest correct templates similar to a failing statement.
    Suggest {
        /// Read the statement from this file.
        #[arg(long, conflicts_with = "stdin", required_unless_present = "stdin")]
        file: Option<PathBuf>,
        /// Read the statement from standard input.
        #[arg(long)]
        stdin: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write a synthetic corpus with known structure.
    Synth {
        #[arg(long, value_enum)]
        profile: Profile,
        /// Output directory for http.log, sql.log and truth.tsv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Planted: population sizes.
        #[arg(long, default_value_t = 20)]
        spiders: usize,
        #[arg(long, default_value_t = 5)]
        bots: usize,
        #[arg(long, default_value_t = 13_000)]
        bot_queries: usize,
        #[arg(long, default_value_t = 100)]
        mortals: usize,
        #[arg(long, default_value_t = 50)]
        others: usize,
        #[arg(long, default_value_t = 2)]
        admins: usize,
        /// Power law: density exponent of think times.
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 100)]
        clients: usize,
        #[arg(long, default_value_t = 1000)]
        gaps: usize,
        /// Growth: months, first-month count, yearly multiplier, relative noise.
        #[arg(long, default_value_t = 36)]
        months: usize,
        #[arg(long, default_value_t = 1000.0)]
        base: f64,
        #[arg(long, default_value_t = 2.05)]
        yearly: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Mixed: web and SQL line counts.
        #[arg(long, default_value_t = 100_000)]
        web_lines: usize,
        #[arg(long, default_value_t = 20_000)]
        sql_lines: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Planted,
    Powerlaw,
    Growth,
    Mixed,
}

#[derive(Args)]
struct RunOpts {
    /// Rerun stages even when current.
    #[arg(long)]
    force: bool,
    /// Write flag overrides back to the workspace config.
    #[arg(long)]
    save: bool,
}

/// One flag per config key. Paths given here are relative to the current
/// directory; paths in the config file are relative to the workspace.
#[derive(Args, Default)]
struct Settings {
    #[arg(long)]
    http_logs: Option<String>,
    #[arg(long)]
    sql_logs: Option<String>,
    #[arg(long)]
    http_format: Option<String>,
    #[arg(long)]
    agent_config: Option<String>,
    #[arg(long)]
    noise_suffixes: Option<String>,
    #[arg(long)]
    admin_ips: Option<String>,
    #[arg(long)]
    gap_seconds: Option<String>,
    #[arg(long)]
    bot_reuse: Option<String>,
    #[arg(long)]
    min_events: Option<String>,
    #[arg(long)]
    min_duration: Option<String>,
    #[arg(long)]
    max_duration: Option<String>,
    #[arg(long)]
    ip_map: Option<String>,
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    languages: Option<String>,
    #[arg(long)]
    smooth: Option<String>,
    #[arg(long)]
    think_fit: Option<String>,
    #[arg(long)]
    size_fit: Option<String>,
    #[arg(long)]
    duration_fit: Option<String>,
    #[arg(long)]
    ngram: Option<String>,
    #[arg(long)]
    top_k: Option<String>,
}

const PATH_KEYS: [&str; 5] = ["http_logs", "sql_logs", "agent_config", "ip_map", "schema"];

impl Settings {
    fn pairs(&self) -> [(&'static str, &Option<String>); 20] {
        [
            ("http_logs", &self.http_logs),
            ("sql_logs", &self.sql_logs),
            ("http_format", &self.http_format),
            ("agent_config", &self.agent_config),
            ("noise_suffixes", &self.noise_suffixes),
            ("admin_ips", &self.admin_ips),
            ("gap_seconds", &self.gap_seconds),
            ("bot_reuse", &self.bot_reuse),
            ("min_events", &self.min_events),
            ("min_duration", &self.min_duration),
            ("max_duration", &self.max_duration),
            ("ip_map", &self.ip_map),
            ("schema", &self.schema),
            ("languages", &self.languages),
            ("smooth", &self.smooth),
            ("think_fit", &self.think_fit),
            ("size_fit", &self.size_fit),
            ("duration_fit", &self.duration_fit),
            ("ngram", &self.ngram),
            ("top_k", &self.top_k),
        ]
    }

    fn any(&self) -> bool {
        self.pairs().iter().any(|(_, v)| v.is_some())
    }

    /// Applies every given flag on top of `config`.
    fn apply(&self, config: &mut Config) -> Result<(), Failure> {
        let cwd = std::env::current_dir().map_err(|e| Failure::data(format!("current directory: {}", e)))?;
        for (key, value) in self.pairs() {
            let Some(value) = value else { continue };
            let value = if PATH_KEYS.contains(&key) {
                absolute_list(&cwd, value)
            } else {
                value.clone()
            };
            config.set(key, &value).map_err(Failure::usage)?;
        }
        config.validate().map_err(Failure::usage)
    }
}

fn absolute_list(cwd: &Path, value: &str) -> String {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| cwd.join(s).display().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| {
        let names: Vec<_> = Stage::ALL.iter().map(|s| s.as_str()).collect();
        format!("unknown stage `{}`; expected one of {}", s, names.join(", "))
    })
}

fn parse_kind(s: &str) -> Result<ReportKind, String> {
    ReportKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = ReportKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("unknown report kind `{}`; expected one of {}", s, names.join(", "))
    })
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl Display) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }

    fn data(e: impl Display) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

fn workspace_root(cli: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    cli.clone()
        .ok_or_else(|| Failure::usage("no workspace: pass --workspace or set LOGSCOPE_WORKSPACE"))
}

/// Opens the workspace and applies flag overrides.
fn open(root: &Path, settings: &Settings, save: bool) -> Result<Workspace, Failure> {
    let mut ws = Workspace::open(root).map_err(Failure::data)?;
    if settings.any() {
        let mut config = ws.config().clone();
        settings.apply(&mut config)?;
        ws.set_config(config).map_err(Failure::usage)?;
        if save {
            ws.save_config().map_err(Failure::data)?;
        }
    }
    Ok(ws)
}

fn run_stages(ws: &Workspace, stages: &[Stage], force: bool) -> Result<(), Failure> {
    let summary = ws.run(stages, force).map_err(Failure::data)?;
    for stage in &summary.skipped {
        println!("{}\tcurrent\tskipped", stage);
    }
    for (stage, table, rows) in &summary.tables {
        println!("{}\t{}\t{}", stage, table, rows);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Init { config, settings } => {
            let root = workspace_root(&cli.workspace)?;
            let mut base = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| Failure::data(format!("{}: {}", path.display(), e)))?;
                    Config::parse(&text).map_err(Failure::data)?
                }
                None => Config::default(),
            };
            settings.apply(&mut base)?;
            Workspace::init(&root, &base).map_err(Failure::data)?;
            println!("initialized {}", root.display());
            Ok(())
        }
        Command::Ingest { run, settings } => {
            let ws = open(&workspace_root(&cli.workspace)?, &settings, run.save)?;
            run_stages(&ws, &[Stage::Ingest], run.force)
        }
        Command::Run { stages, run, settings } => {
            let ws = open(&workspace_root(&cli.workspace)?, &settings, run.save)?;
            let stages = stages.unwrap_or_else(|| Stage::ALL.to_vec());
            run_stages(&ws, &stages, run.force)
        }
        Command::Status { settings } => {
            let ws = open(&workspace_root(&cli.workspace)?, &settings, false)?;
            for (stage, state) in ws.status().map_err(Failure::data)? {
                println!("{}\t{}", stage, state.as_str());
            }
            Ok(())
        }
        Command::Report { kind, out, settings } => {
            let ws = open(&workspace_root(&cli.workspace)?, &settings, false)?;
            let out = out.unwrap_or_else(|| ws.reports_dir().join(kind.as_str()));
            for (file, rows) in ws.write_report(kind, &out).map_err(Failure::data)? {
                println!("{}\t{}", out.join(file).display(), rows);
            }
            Ok(())
        }
        Command::Suggest { file, stdin: _, settings } => {
            let ws = open(&workspace_root(&cli.workspace)?, &settings, false)?;
            let statement = match file {
                Some(path) => fs::read_to_string(&path).map_err(|e| Failure::data(format!("{}: {}", path.display(), e)))?,
                None => {
                    let mut text = String::new();
                    io::stdin()
                        .read_to_string(&mut text)
                        .map_err(|e| Failure::data(format!("stdin: {}", e)))?;
                    text
                }
            };
            let config = ws.config();
            let index = ws.suggest_index(config.ngram).map_err(Failure::data)?;
            println!("rank\tsimilarity\ttemplate_id\texample");
            for (i, s) in index.suggest(statement.trim(), config.top_k).iter().enumerate() {
                println!(
                    "{}\t{:.4}\t{}\t{}",
                    i + 1,
                    s.similarity,
                    s.template_id,
                    quote_field(&s.example_statement)
                );
            }
            Ok(())
        }
        Command::Synth {
            profile,
            out,
            seed,
            spiders,
            bots,
            bot_queries,
            mortals,
            others,
            admins,
            alpha,
            clients,
            gaps,
            months,
            base,
            yearly,
            noise,
            web_lines,
            sql_lines,
        } => {
            let corpus = match profile {
                Profile::Planted => synth::planted(&Planted {
                    spiders,
                    bots,
                    bot_queries,
                    mortals,
                    others,
                    admins,
                    seed,
                    ..Planted::default()
                }),
                Profile::Powerlaw => {
                    if alpha.is_nan() || alpha <= 1.0 {
                        return Err(Failure::usage("--alpha must exceed 1"));
                    }
                    synth::power_law(alpha, clients, gaps, seed)
                }
                Profile::Growth => {
                    if !(yearly > 0.0 && noise >= 0.0) {
                        return Err(Failure::usage("--yearly must be positive and --noise non-negative"));
                    }
                    synth::growth(months, base, yearly, noise, seed)
                }
                Profile::Mixed => synth::mixed(web_lines, sql_lines, seed),
            };
            corpus.write(&out).map_err(|e| Failure::data(format!("{}: {}", out.display(), e)))?;
            println!("http.log\t{}", corpus.http.len());
            println!("sql.log\t{}", corpus.sql.len());
            println!("truth.tsv\t{}", corpus.truth.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    debug_assert_eq!(Settings::default().pairs().map(|(k, _)| k), KEYS);
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("logscope: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
