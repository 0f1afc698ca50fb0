//! The `align` command line: deterministic, scriptable subcommands over the
//! pipeline stages.
//!
//! Exit codes: 0 success, 1 data/validation failure, 2 backend failure,
//! 64 usage error.

mod config;
mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{BudgetSemantics, RunConfig, StageMode, SummaryMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_BACKEND: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }
}

impl From<crate::data::DataError> for CliError {
    fn from(e: crate::data::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::data::CourseLoadError> for CliError {
    fn from(e: crate::data::CourseLoadError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::proficiency::ProficiencyError> for CliError {
    fn from(e: crate::proficiency::ProficiencyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::gateway::GatewayError> for CliError {
    fn from(e: crate::gateway::GatewayError) -> Self {
        CliError::Backend(e.to_string())
    }
}

impl From<crate::diagnosis::DiagnosisError> for CliError {
    fn from(e: crate::diagnosis::DiagnosisError) -> Self {
        use crate::diagnosis::DiagnosisError::*;
        match e {
            Gateway(g) => CliError::Backend(g.to_string()),
            UnparseableDiagnosis(_) => CliError::Backend(e.to_string()),
            EmptyEvidence | CountMismatch { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<crate::recommender::RecommendError> for CliError {
    fn from(e: crate::recommender::RecommendError) -> Self {
        use crate::recommender::RecommendError::*;
        match e {
            InvalidK(_) => CliError::Usage(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<crate::summary::SummaryError> for CliError {
    fn from(e: crate::summary::SummaryError) -> Self {
        use crate::summary::SummaryError::*;
        match e {
            StudentMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<crate::evaluation::EvalError> for CliError {
    fn from(e: crate::evaluation::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::simulation::SimError> for CliError {
    fn from(e: crate::simulation::SimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "align",
    version,
    about = "Assessment-driven skill gap diagnosis and resource recommendation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the course-driven subcommands. Every tunable also has a
/// config-file default; flags override the file.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Course manifest (course.json).
    #[arg(long)]
    pub course: Option<PathBuf>,
    /// TOML config file with defaults for the tunables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mastery threshold between 0 and 1; topics strictly below are gaps.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Band cutoffs, e.g. high:0.8,medium:0.6
    #[arg(long)]
    pub bands: Option<String>,
    /// Resource budget.
    #[arg(long)]
    pub k: Option<usize>,
    /// Treat K as a per-gap budget instead of a global one.
    #[arg(long, default_value_t = false)]
    pub k_per_gap: bool,
    /// Diagnosis mode: rule | agent.
    #[arg(long, value_name = "MODE")]
    pub mode_diagnose: Option<String>,
    /// Compatibility mode: rule | agent.
    #[arg(long, value_name = "MODE")]
    pub mode_compat: Option<String>,
    /// Summary mode: template | agent.
    #[arg(long, value_name = "MODE")]
    pub mode_summary: Option<String>,
    /// Replay store for chat completions (offline deterministic runs).
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Record chat transcripts to this replay store on success.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Fixture directory holding search.json and pages/.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Output directory for emitted artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model id sent to the chat backend.
    #[arg(long)]
    pub model: Option<String>,
    /// Include exam assessments in proficiency evidence (they are excluded
    /// by default because exams are the evaluation ground truth).
    #[arg(long, default_value_t = false)]
    pub include_exams: bool,
    /// Directory of prompt template overrides.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    students: usize,
    #[arg(long, default_value_t = 4)]
    topics: usize,
    #[arg(long, default_value_t = 24)]
    questions_per_topic: usize,
    #[arg(long, default_value_t = 6)]
    exam_questions_per_topic: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Difficulty mix as easy:medium:hard proportions, e.g. 0.4:0.4:0.2
    #[arg(long)]
    difficulty_mix: Option<String>,
    /// Keep latent mastery outside [center-margin, center+margin].
    #[arg(long)]
    exclude_center: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    exclude_margin: f64,
    /// Directory to write the course bundle into.
    #[arg(long, default_value = "sim_course")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and cross-validate a course bundle.
    Validate(CommonArgs),
    /// Compute topic proficiency and skill gaps per student.
    Proficiency(CommonArgs),
    /// Diagnose each skill gap from the student's wrong answers.
    Diagnose(CommonArgs),
    /// Produce instructor and model difficulty label sets.
    Label(CommonArgs),
    /// Recommend preference-compatible resources per gap.
    Recommend(CommonArgs),
    /// Render per-student five-section summaries.
    Summarize(CommonArgs),
    /// Score predictions against exam-derived ground truth.
    Evaluate(CommonArgs),
    /// Generate a synthetic course bundle with known latent mastery.
    Simulate(SimulateArgs),
    /// Run validate, proficiency, diagnose, label, recommend, summarize,
    /// and evaluate in order, writing every artifact.
    Pipeline(CommonArgs),
}

/// Parse args and run. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    let result = match cli.command {
        Command::Validate(args) => stages::cmd_validate(&args),
        Command::Proficiency(args) => stages::cmd_proficiency(&args),
        Command::Diagnose(args) => stages::cmd_diagnose(&args),
        Command::Label(args) => stages::cmd_label(&args),
        Command::Recommend(args) => stages::cmd_recommend(&args),
        Command::Summarize(args) => stages::cmd_summarize(&args),
        Command::Evaluate(args) => stages::cmd_evaluate(&args),
        Command::Simulate(args) => stages::cmd_simulate(
            args.seed,
            args.students,
            args.topics,
            args.questions_per_topic,
            args.exam_questions_per_topic,
            args.noise,
            args.difficulty_mix.as_deref(),
            args.exclude_center,
            args.exclude_margin,
            &args.out,
        ),
        Command::Pipeline(args) => stages::cmd_pipeline(&args),
    };

    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("align: {}", e.message());
            e.exit_code()
        }
    }
}
