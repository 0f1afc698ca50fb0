//! Readers for the four course input files and the course manifest.
//!
//! Formats:
//! - `gradebook.csv` - header `student_id,assessment_id,topic,points_earned,points_possible`
//! - `responses.csv` - header `student_id,question_id,selected_answer,points_earned,points_possible`
//! - `questions.json` - array of question objects; unknown fields ignored
//! - `preferences.json` - array of survey objects
//! - `course.json` - manifest naming the four files plus `exam_assessment_ids`

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    validate_dataset, CourseDataset, DataError, GradebookEntry, Modality, PreferenceSurvey,
    QuestionKind, QuestionResponse, QuizQuestion, StudentId, ValidationReport,
};

const GRADEBOOK_HEADER: [&str; 5] = [
    "student_id",
    "assessment_id",
    "topic",
    "points_earned",
    "points_possible",
];
const RESPONSES_HEADER: [&str; 5] = [
    "student_id",
    "question_id",
    "selected_answer",
    "points_earned",
    "points_possible",
];

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<(), DataError> {
    let got: Vec<&str> = record.iter().collect();
    if got != expected {
        return Err(DataError::Schema(format!(
            "expected header {:?}, got {:?}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse_points(
    record: &csv::StringRecord,
    earned_idx: usize,
    line: u64,
) -> Result<(f64, f64), DataError> {
    let parse = |idx: usize, name: &str| -> Result<f64, DataError> {
        record[idx]
            .trim()
            .parse::<f64>()
            .map_err(|_| DataError::MalformedRow {
                line,
                reason: format!("non-numeric {name} {:?}", &record[idx]),
            })
    };
    let earned = parse(earned_idx, "points_earned")?;
    let possible = parse(earned_idx + 1, "points_possible")?;
    if possible <= 0.0 || earned < 0.0 || earned > possible {
        return Err(DataError::Bounds {
            line,
            earned,
            possible,
        });
    }
    Ok((earned, possible))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Parse gradebook CSV. Row order is preserved; `normalized_score` is
/// computed from the two point columns.
pub fn parse_gradebook<R: Read>(raw: R) -> Result<Vec<GradebookEntry>, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
    check_header(
        reader
            .headers()
            .map_err(|e| DataError::Schema(e.to_string()))?,
        &GRADEBOOK_HEADER,
    )?;

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Schema(e.to_string()))?;
        let line = record_line(&record);
        if record.len() != 5 {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected 5 columns, got {}", record.len()),
            });
        }
        let student = record[0].trim();
        if student.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty student_id".to_string(),
            });
        }
        let (earned, possible) = parse_points(&record, 3, line)?;
        entries.push(GradebookEntry {
            student: StudentId(student.to_string()),
            assessment_id: record[1].trim().to_string(),
            topic: record[2].trim().to_string(),
            points_earned: earned,
            points_possible: possible,
            normalized_score: earned / possible,
        });
    }
    Ok(entries)
}

/// Parse question-level response CSV.
pub fn parse_responses<R: Read>(raw: R) -> Result<Vec<QuestionResponse>, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
    check_header(
        reader
            .headers()
            .map_err(|e| DataError::Schema(e.to_string()))?,
        &RESPONSES_HEADER,
    )?;

    let mut responses = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Schema(e.to_string()))?;
        let line = record_line(&record);
        if record.len() != 5 {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected 5 columns, got {}", record.len()),
            });
        }
        let student = record[0].trim();
        if student.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty student_id".to_string(),
            });
        }
        let (earned, possible) = parse_points(&record, 3, line)?;
        responses.push(QuestionResponse {
            student: StudentId(student.to_string()),
            question_id: record[1].trim().to_string(),
            selected_answer: record[2].to_string(),
            points_earned: earned,
            points_possible: possible,
        });
    }
    Ok(responses)
}

/// Parse the question bank JSON array and check every question invariant.
pub fn parse_question_bank<R: Read>(raw: R) -> Result<Vec<QuizQuestion>, DataError> {
    let questions: Vec<QuizQuestion> =
        serde_json::from_reader(raw).map_err(|e| DataError::Schema(e.to_string()))?;

    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(questions.len());
    for mut q in questions {
        q.topic = q.topic.trim().to_string();
        if q.question_id.is_empty() {
            return Err(DataError::Schema("empty question_id".to_string()));
        }
        if q.topic.is_empty() {
            return Err(DataError::Schema(format!(
                "question {:?} has an empty topic",
                q.question_id
            )));
        }
        if !seen.insert(q.question_id.clone()) {
            return Err(DataError::DuplicateQuestionId(q.question_id));
        }
        match q.kind {
            QuestionKind::MultipleChoice => {
                if q.options.len() < 2 {
                    return Err(DataError::Schema(format!(
                        "multiple_choice question {:?} has fewer than 2 options",
                        q.question_id
                    )));
                }
                if !q.options.contains(&q.correct_answer) {
                    return Err(DataError::InvalidAnswer {
                        question_id: q.question_id,
                        answer: q.correct_answer,
                    });
                }
            }
            QuestionKind::ShortAnswer => {}
        }
        out.push(q);
    }
    Ok(out)
}

/// Parse preference surveys and check that each modality ranking is a
/// permutation of the four modalities.
pub fn parse_preferences<R: Read>(raw: R) -> Result<Vec<PreferenceSurvey>, DataError> {
    let surveys: Vec<PreferenceSurvey> =
        serde_json::from_reader(raw).map_err(|e| DataError::Schema(e.to_string()))?;

    for s in &surveys {
        if s.student.as_str().is_empty() {
            return Err(DataError::Schema("empty student_id in survey".to_string()));
        }
        let mut seen = BTreeSet::new();
        for m in &s.modality_ranking {
            if !seen.insert(*m) {
                return Err(DataError::DuplicateModality {
                    student: s.student.to_string(),
                    modality: *m,
                });
            }
        }
        if seen.len() != Modality::ALL.len() {
            return Err(DataError::Schema(format!(
                "student {}: modality_ranking must contain all four modalities",
                s.student
            )));
        }
    }
    Ok(surveys)
}

/// The `course.json` manifest: file names are resolved relative to the
/// manifest's own directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CourseManifest {
    pub course_id: String,
    pub gradebook: String,
    pub responses: String,
    pub questions: String,
    pub preferences: String,
    pub exam_assessment_ids: BTreeSet<String>,
}

pub fn parse_course_manifest<R: Read>(raw: R) -> Result<CourseManifest, DataError> {
    serde_json::from_reader(raw).map_err(|e| DataError::Schema(e.to_string()))
}

/// Load and cross-validate a full course bundle from its manifest path.
pub fn load_course(manifest_path: &Path) -> Result<CourseDataset, CourseLoadError> {
    let manifest = parse_course_manifest(File::open(manifest_path).map_err(DataError::Io)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let open = |name: &str| File::open(dir.join(name)).map_err(DataError::Io);

    let gradebook = parse_gradebook(open(&manifest.gradebook)?)?;
    let responses = parse_responses(open(&manifest.responses)?)?;
    let questions = parse_question_bank(open(&manifest.questions)?)?;
    let surveys = parse_preferences(open(&manifest.preferences)?)?;

    validate_dataset(
        &manifest.course_id,
        questions,
        responses,
        gradebook,
        surveys,
        manifest.exam_assessment_ids,
    )
    .map_err(CourseLoadError::Invalid)
}

#[derive(Debug, thiserror::Error)]
pub enum CourseLoadError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("course bundle failed validation: {0}")]
    Invalid(ValidationReport),
}
