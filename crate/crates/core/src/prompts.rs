//! Prompt templates for the model-backed stages.
//!
//! Defaults are embedded at compile time from the repository's top-level
//! `prompts/` directory. A prompts directory given at runtime (`--prompts`)
//! overrides any template by file name, so deployments can edit prompt
//! wording without rebuilding.

use std::path::Path;

use crate::gateway::PromptTemplate;

pub const DIAGNOSE: &str = include_str!("../../../prompts/diagnose.txt");
pub const LABEL: &str = include_str!("../../../prompts/label.txt");
pub const SUMMARIZE: &str = include_str!("../../../prompts/summarize.txt");
pub const EXTRACT: &str = include_str!("../../../prompts/extract.txt");
pub const COMPAT: &str = include_str!("../../../prompts/compat.txt");

pub const SYSTEM_DIAGNOSE: &str = "You are a diagnostic assistant helping a course instructor \
understand why a student answers incorrectly. Follow the requested output format exactly.";
pub const SYSTEM_LABEL: &str = "You are an assessment reviewer who classifies question \
difficulty. Follow the requested output format exactly.";
pub const SYSTEM_SUMMARIZE: &str = "You write clear, encouraging learning summaries for \
students. Follow the requested output format exactly.";
pub const SYSTEM_EXTRACT: &str = "You summarize student survey answers faithfully and briefly.";
pub const SYSTEM_COMPAT: &str = "You judge whether a learning resource fits a student's \
preferences and needs. Follow the requested output format exactly.";

/// The five template names, matching their file names under `prompts/`.
pub const TEMPLATE_NAMES: [&str; 5] = ["diagnose", "label", "summarize", "extract", "compat"];

fn embedded(name: &str) -> &'static str {
    match name {
        "diagnose" => DIAGNOSE,
        "label" => LABEL,
        "summarize" => SUMMARIZE,
        "extract" => EXTRACT,
        "compat" => COMPAT,
        _ => panic!("unknown template name {name:?}"),
    }
}

/// Load a template by name, preferring `<dir>/<name>.txt` when a prompts
/// directory is supplied and the file exists.
pub fn load(name: &str, prompts_dir: Option<&Path>) -> PromptTemplate {
    if let Some(dir) = prompts_dir {
        let path = dir.join(format!("{name}.txt"));
        if let Ok(body) = std::fs::read_to_string(&path) {
            return PromptTemplate::new(name, body);
        }
    }
    PromptTemplate::new(name, embedded(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_templates_load_by_name() {
        for name in TEMPLATE_NAMES {
            let t = load(name, None);
            assert!(!t.body.is_empty(), "{name} is empty");
        }
    }

    #[test]
    fn directory_overrides_embedded_body() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("label.txt"), "custom {{topic}}").unwrap();
        let t = load("label", Some(dir.path()));
        assert_eq!(t.body, "custom {{topic}}");
        let untouched = load("diagnose", Some(dir.path()));
        assert_eq!(untouched.body, DIAGNOSE);
    }
}
