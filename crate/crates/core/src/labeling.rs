//! Dual difficulty labeling: instructor labels loaded from the question
//! bank, and model labels generated from the question text, options, and
//! topic only. The labeling prompt is built from a [`QuizQuestion`] alone,
//! so no response or gradebook field can reach it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Difficulty, QuestionKind, QuizQuestion};
use crate::gateway::{AgentGateway, AgentRequest, GatewayError, PromptTemplate};
use crate::prompts;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("no difficulty word in reply after one reprompt: {0:?}")]
    UnparseableLabel(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Where a label set came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSource {
    Instructor,
    Model { model_id: String },
}

impl LabelSource {
    /// Short name used in `labels_<source>.json` file names.
    pub fn file_stem(&self) -> String {
        match self {
            LabelSource::Instructor => "instructor".to_string(),
            LabelSource::Model { model_id } => model_id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyLabel {
    pub question_id: String,
    pub level: Difficulty,
    pub source: LabelSource,
}

/// One source's labels over (part of) the question bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub source: LabelSource,
    pub labels: BTreeMap<String, Difficulty>,
    /// Fraction of the question bank this set covers; 0.0 for an empty bank.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFailure {
    pub question_id: String,
    pub error: String,
}

/// A full bank-labeling pass: the successful labels plus every per-question
/// failure, in question order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingOutcome {
    #[serde(flatten)]
    pub set: LabelSet,
    pub failures: Vec<LabelFailure>,
}

fn coverage(labeled: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        labeled as f64 / total as f64
    }
}

/// Collect the instructor labels carried inline in the question bank.
pub fn load_instructor_labels(questions: &[QuizQuestion]) -> LabelSet {
    let labels: BTreeMap<String, Difficulty> = questions
        .iter()
        .filter_map(|q| q.instructor_difficulty.map(|d| (q.question_id.clone(), d)))
        .collect();
    LabelSet {
        source: LabelSource::Instructor,
        coverage: coverage(labels.len(), questions.len()),
        labels,
    }
}

/// Build the labeling request. The bindings are drawn from the question
/// only, which enforces the blindness requirement by construction.
pub fn build_label_request(
    question: &QuizQuestion,
    model_id: &str,
    template: &PromptTemplate,
) -> Result<AgentRequest, GatewayError> {
    let options = match question.kind {
        QuestionKind::ShortAnswer => "(free response)".to_string(),
        QuestionKind::MultipleChoice => question
            .options
            .iter()
            .map(|o| format!("- {o}"))
            .collect::<Vec<_>>()
            .join("\n"),
    };
    let bindings = BTreeMap::from([
        ("topic".to_string(), question.topic.clone()),
        ("text".to_string(), question.text.clone()),
        ("options".to_string(), options),
    ]);
    let rendered = template.render(&bindings)?;
    Ok(AgentRequest::new(model_id, prompts::SYSTEM_LABEL, rendered.text))
}

/// Canonicalize a model reply to a difficulty level: the level word whose
/// first case-insensitive occurrence comes earliest wins.
pub fn parse_difficulty_reply(reply: &str) -> Option<Difficulty> {
    let lower = reply.to_lowercase();
    Difficulty::ALL
        .iter()
        .filter_map(|level| {
            lower
                .find(&level.name().to_lowercase())
                .map(|pos| (pos, *level))
        })
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, level)| level)
}

/// Label one question with the model, allowing one reprompt when the reply
/// contains no level word.
pub fn label_with_model(
    question: &QuizQuestion,
    gateway: &AgentGateway,
    model_id: &str,
    template: &PromptTemplate,
) -> Result<DifficultyLabel, LabelError> {
    let request = build_label_request(question, model_id, template)?;
    let reply = gateway.complete(&request)?;
    if let Some(level) = parse_difficulty_reply(&reply.text) {
        return Ok(DifficultyLabel {
            question_id: question.question_id.clone(),
            level,
            source: LabelSource::Model {
                model_id: model_id.to_string(),
            },
        });
    }

    let retry = AgentRequest::new(
        model_id,
        prompts::SYSTEM_LABEL,
        format!(
            "{}\n\nYour previous reply did not contain one of the words Easy, Medium, or Hard. \
             Reply with exactly one of those words.",
            request.user_text
        ),
    );
    let reply = gateway.complete(&retry)?;
    match parse_difficulty_reply(&reply.text) {
        Some(level) => Ok(DifficultyLabel {
            question_id: question.question_id.clone(),
            level,
            source: LabelSource::Model {
                model_id: model_id.to_string(),
            },
        }),
        None => Err(LabelError::UnparseableLabel(reply.text)),
    }
}

/// Label the whole bank in question_id order. Per-question failures are
/// recorded and do not abort the pass.
pub fn label_bank(
    questions: &[QuizQuestion],
    gateway: &AgentGateway,
    model_id: &str,
    template: &PromptTemplate,
) -> LabelingOutcome {
    let mut ordered: Vec<&QuizQuestion> = questions.iter().collect();
    ordered.sort_by(|a, b| a.question_id.cmp(&b.question_id));

    let mut labels = BTreeMap::new();
    let mut failures = Vec::new();
    for question in ordered {
        match label_with_model(question, gateway, model_id, template) {
            Ok(label) => {
                labels.insert(label.question_id, label.level);
            }
            Err(e) => failures.push(LabelFailure {
                question_id: question.question_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    LabelingOutcome {
        set: LabelSet {
            source: LabelSource::Model {
                model_id: model_id.to_string(),
            },
            coverage: coverage(labels.len(), questions.len()),
            labels,
        },
        failures,
    }
}
