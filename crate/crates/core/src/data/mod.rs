//! Course data model: questions, responses, gradebook entries, and
//! preference surveys, plus cross-reference validation and bundle I/O.
//!
//! Parsing is pure and reentrant. A [`CourseDataset`] is immutable once
//! validated and safe to share across threads.

mod parse;
mod write;

pub use parse::{
    load_course, parse_course_manifest, parse_gradebook, parse_preferences, parse_question_bank,
    parse_responses, CourseLoadError, CourseManifest,
};
pub use write::{save_course, write_gradebook_csv, write_responses_csv};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque anonymized student identifier. Non-empty by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudentId(pub String);

impl StudentId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StudentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StudentId {
    fn from(s: &str) -> Self {
        StudentId(s.to_string())
    }
}

/// Instructional modality a learner can prefer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Video,
    TextPdf,
    Interactive,
    HandsOn,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Video,
        Modality::TextPdf,
        Modality::Interactive,
        Modality::HandsOn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::TextPdf => "text_pdf",
            Modality::Interactive => "interactive",
            Modality::HandsOn => "hands_on",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    SelfPaced,
    InstructorPaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    MultipleChoice,
    ShortAnswer,
}

/// Question difficulty level, assigned by the instructor or a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn name(&self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One question from the course question bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub question_id: String,
    pub quiz_id: String,
    pub topic: String,
    pub kind: QuestionKind,
    pub text: String,
    /// Ordered answer options; empty for short-answer questions.
    #[serde(default)]
    pub options: Vec<String>,
    pub correct_answer: String,
    #[serde(default)]
    pub concept_tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructor_difficulty: Option<Difficulty>,
}

/// One student answer to one question, with the points awarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResponse {
    pub student: StudentId,
    pub question_id: String,
    pub selected_answer: String,
    pub points_earned: f64,
    pub points_possible: f64,
}

/// One gradebook row: a student's score on an assessment, mapped to a topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradebookEntry {
    pub student: StudentId,
    pub assessment_id: String,
    pub topic: String,
    pub points_earned: f64,
    pub points_possible: f64,
    /// `points_earned / points_possible`, always in `[0, 1]`.
    pub normalized_score: f64,
}

/// A learner's preference survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSurvey {
    #[serde(rename = "student_id")]
    pub student: StudentId,
    pub pacing: Pacing,
    /// A permutation of the four modalities, most preferred first.
    pub modality_ranking: Vec<Modality>,
    pub assessment_preference: String,
    pub feedback_preference: String,
    pub study_time: String,
    /// Remaining survey items, preserved verbatim.
    #[serde(default, rename = "extra")]
    pub free_text: BTreeMap<String, String>,
}

/// Validated bundle of all inputs for one course.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseDataset {
    pub course_id: String,
    /// Roster, taken from the gradebook (the gradebook carries the full
    /// student roster; responses and surveys must reference it).
    pub students: BTreeSet<StudentId>,
    pub questions: Vec<QuizQuestion>,
    pub responses: Vec<QuestionResponse>,
    pub gradebook: Vec<GradebookEntry>,
    pub surveys: Vec<PreferenceSurvey>,
    /// Assessment ids reserved as exam ground truth (midterm/final).
    pub exam_assessment_ids: BTreeSet<String>,
}

impl CourseDataset {
    /// The course topic universe: every topic named by a question or a
    /// gradebook entry.
    pub fn topics(&self) -> BTreeSet<String> {
        self.questions
            .iter()
            .map(|q| q.topic.clone())
            .chain(self.gradebook.iter().map(|g| g.topic.clone()))
            .collect()
    }

    pub fn question(&self, question_id: &str) -> Option<&QuizQuestion> {
        self.questions.iter().find(|q| q.question_id == question_id)
    }

    pub fn survey_for(&self, student: &StudentId) -> Option<&PreferenceSurvey> {
        self.surveys.iter().find(|s| &s.student == student)
    }

    pub fn responses_of<'a>(
        &'a self,
        student: &'a StudentId,
    ) -> impl Iterator<Item = &'a QuestionResponse> {
        self.responses.iter().filter(move |r| &r.student == student)
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: points {earned} out of bounds for points_possible {possible}")]
    Bounds { line: u64, earned: f64, possible: f64 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("question {question_id}: correct_answer {answer:?} is not among the options")]
    InvalidAnswer { question_id: String, answer: String },
    #[error("student {student}: modality {modality:?} appears more than once in the ranking")]
    DuplicateModality { student: String, modality: Modality },
    #[error("duplicate question_id {0:?}")]
    DuplicateQuestionId(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One cross-reference violation found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A response names a question_id absent from the question bank.
    DanglingReference {
        student: StudentId,
        question_id: String,
    },
    /// A response or survey names a student absent from the gradebook roster.
    UnknownStudent { student: StudentId, source: String },
    /// An exam assessment id does not occur in the gradebook.
    MissingExam { assessment_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingReference {
                student,
                question_id,
            } => write!(
                f,
                "response by {student} references unknown question {question_id:?}"
            ),
            Violation::UnknownStudent { student, source } => {
                write!(f, "{source} references student {student} not in the gradebook roster")
            }
            Violation::MissingExam { assessment_id } => {
                write!(f, "exam assessment {assessment_id:?} absent from gradebook")
            }
        }
    }
}

/// Every violation found in one validation pass. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Cross-validate the already-parsed component lists into a [`CourseDataset`].
///
/// Succeeds iff no violation is found; otherwise returns the full list of
/// violations. The roster is the set of students appearing in the gradebook.
pub fn validate_dataset(
    course_id: &str,
    questions: Vec<QuizQuestion>,
    responses: Vec<QuestionResponse>,
    gradebook: Vec<GradebookEntry>,
    surveys: Vec<PreferenceSurvey>,
    exam_assessment_ids: BTreeSet<String>,
) -> Result<CourseDataset, ValidationReport> {
    let students: BTreeSet<StudentId> = gradebook.iter().map(|g| g.student.clone()).collect();
    let question_ids: BTreeSet<&str> =
        questions.iter().map(|q| q.question_id.as_str()).collect();
    let assessment_ids: BTreeSet<&str> =
        gradebook.iter().map(|g| g.assessment_id.as_str()).collect();

    let mut violations = Vec::new();
    for r in &responses {
        if !question_ids.contains(r.question_id.as_str()) {
            violations.push(Violation::DanglingReference {
                student: r.student.clone(),
                question_id: r.question_id.clone(),
            });
        }
        if !students.contains(&r.student) {
            violations.push(Violation::UnknownStudent {
                student: r.student.clone(),
                source: "response".to_string(),
            });
        }
    }
    for s in &surveys {
        if !students.contains(&s.student) {
            violations.push(Violation::UnknownStudent {
                student: s.student.clone(),
                source: "survey".to_string(),
            });
        }
    }
    for exam in &exam_assessment_ids {
        if !assessment_ids.contains(exam.as_str()) {
            violations.push(Violation::MissingExam {
                assessment_id: exam.clone(),
            });
        }
    }

    if violations.is_empty() {
        Ok(CourseDataset {
            course_id: course_id.to_string(),
            students,
            questions,
            responses,
            gradebook,
            surveys,
            exam_assessment_ids,
        })
    } else {
        Err(ValidationReport { violations })
    }
}
