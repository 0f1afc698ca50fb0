//! Resolved run configuration: config-file defaults overridden by flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{CliError, CommonArgs};
use crate::proficiency::{BandConfig, DEFAULT_TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageMode {
    Rule,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryMode {
    Template,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetSemantics {
    Global,
    PerGap,
}

/// On-disk config file shape (all fields optional).
#[derive(Debug, Clone, Default, Deserialize)]
struct FileConfig {
    tau: Option<f64>,
    k: Option<usize>,
    k_per_gap: Option<bool>,
    model: Option<String>,
    include_exams: Option<bool>,
    bands: Option<FileBands>,
    modes: Option<FileModes>,
}

#[derive(Debug, Clone, Deserialize)]
struct FileBands {
    high: f64,
    medium: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct FileModes {
    diagnose: Option<String>,
    compat: Option<String>,
    summary: Option<String>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub course: Option<PathBuf>,
    pub tau: f64,
    pub bands: BandConfig,
    pub k: usize,
    pub budget: BudgetSemantics,
    pub mode_diagnose: StageMode,
    pub mode_compat: StageMode,
    pub mode_summary: SummaryMode,
    pub replay: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub out: PathBuf,
    pub model: String,
    pub include_exams: bool,
    pub prompts_dir: Option<PathBuf>,
}

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MODEL: &str = "gpt-4o";

fn parse_bands_flag(raw: &str) -> Result<BandConfig, CliError> {
    let mut high = None;
    let mut medium = None;
    for part in raw.split(',') {
        let (key, value) = part.split_once(':').ok_or_else(|| {
            CliError::Usage(format!("--bands expects high:<x>,medium:<y>, got {raw:?}"))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            CliError::Usage(format!("--bands value {value:?} is not a number"))
        })?;
        match key.trim() {
            "high" => high = Some(value),
            "medium" => medium = Some(value),
            other => {
                return Err(CliError::Usage(format!(
                    "--bands key must be high or medium, got {other:?}"
                )))
            }
        }
    }
    match (high, medium) {
        (Some(h), Some(m)) => {
            BandConfig::new(h, m).map_err(|e| CliError::Usage(e.to_string()))
        }
        _ => Err(CliError::Usage(
            "--bands must name both high and medium cutoffs".to_string(),
        )),
    }
}

fn parse_stage_mode(raw: &str, flag: &str) -> Result<StageMode, CliError> {
    match raw {
        "rule" => Ok(StageMode::Rule),
        "agent" => Ok(StageMode::Agent),
        other => Err(CliError::Usage(format!(
            "{flag} must be rule or agent, got {other:?}"
        ))),
    }
}

fn parse_summary_mode(raw: &str) -> Result<SummaryMode, CliError> {
    match raw {
        "template" => Ok(SummaryMode::Template),
        "agent" => Ok(SummaryMode::Agent),
        other => Err(CliError::Usage(format!(
            "--mode-summary must be template or agent, got {other:?}"
        ))),
    }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&raw)
        .map_err(|e| CliError::Usage(format!("config {} is not valid: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<RunConfig, CliError> {
        let file = load_file_config(args.config.as_deref())?;

        let tau = args.tau.or(file.tau).unwrap_or(DEFAULT_TAU);
        if !(0.0..=1.0).contains(&tau) {
            return Err(CliError::Usage(format!(
                "--tau must lie in [0,1], got {tau}"
            )));
        }

        let bands = if let Some(raw) = &args.bands {
            parse_bands_flag(raw)?
        } else if let Some(b) = &file.bands {
            BandConfig::new(b.high, b.medium).map_err(|e| CliError::Usage(e.to_string()))?
        } else {
            BandConfig::default()
        };

        let k = args.k.or(file.k).unwrap_or(DEFAULT_K);
        if k == 0 {
            return Err(CliError::Usage("--k must be >= 1".to_string()));
        }
        let budget = if args.k_per_gap || file.k_per_gap.unwrap_or(false) {
            BudgetSemantics::PerGap
        } else {
            BudgetSemantics::Global
        };

        let file_modes = file.modes.unwrap_or_default();
        let mode_diagnose = match args.mode_diagnose.as_deref().or(file_modes.diagnose.as_deref())
        {
            Some(raw) => parse_stage_mode(raw, "--mode-diagnose")?,
            None => StageMode::Rule,
        };
        let mode_compat = match args.mode_compat.as_deref().or(file_modes.compat.as_deref()) {
            Some(raw) => parse_stage_mode(raw, "--mode-compat")?,
            None => StageMode::Rule,
        };
        let mode_summary = match args.mode_summary.as_deref().or(file_modes.summary.as_deref()) {
            Some(raw) => parse_summary_mode(raw)?,
            None => SummaryMode::Template,
        };

        for (path, flag) in [(&args.replay, "--replay"), (&args.fixtures, "--fixtures")] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(CliError::Usage(format!(
                        "{flag} path {} does not exist",
                        path.display()
                    )));
                }
            }
        }

        Ok(RunConfig {
            course: args.course.clone(),
            tau,
            bands,
            k,
            budget,
            mode_diagnose,
            mode_compat,
            mode_summary,
            replay: args.replay.clone(),
            record: args.record.clone(),
            fixtures: args.fixtures.clone(),
            out: args.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            model: args
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            include_exams: args.include_exams || file.include_exams.unwrap_or(false),
            prompts_dir: args.prompts.clone(),
        })
    }

    pub fn course_path(&self) -> Result<&Path, CliError> {
        self.course
            .as_deref()
            .ok_or_else(|| CliError::Usage("--course <course.json> is required".to_string()))
    }
}
