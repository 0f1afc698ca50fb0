//! Preference extraction and concept-level gap diagnosis.
//!
//! Evidence for a gap is the student's wrong answers on that topic: the
//! missed questions themselves, a tally of which wrong options they chose,
//! and a tally of concept tags attached to missed questions. Short-answer
//! misses contribute to the tag tally but not to the distractor tally.
//!
//! Diagnosis renders that evidence into a prompt and expects the model to
//! reply as a numbered list, one deficiency statement per line, each citing
//! at least one missed question id. One reprompt is allowed on a contract
//! violation, then the call fails hard.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CourseDataset, Modality, Pacing, PreferenceSurvey, QuestionKind, StudentId};
use crate::gateway::{AgentGateway, AgentRequest, GatewayError, PromptTemplate};
use crate::proficiency::SkillGapEntry;
use crate::prompts;

#[derive(Debug, Error)]
pub enum DiagnosisError {
    #[error("cannot diagnose a topic with no missed questions")]
    EmptyEvidence,
    #[error("diagnosis reply violated the output contract after one reprompt: {0}")]
    UnparseableDiagnosis(String),
    #[error("{gaps} gap(s) but {diagnoses} diagnosis/es")]
    CountMismatch { gaps: usize, diagnoses: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Structured survey output consumed by query construction and summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPreferences {
    pub student: StudentId,
    pub pacing: Pacing,
    pub ranked_modalities: Vec<Modality>,
    pub feedback_style: String,
    pub notes: String,
}

impl ExtractedPreferences {
    pub fn top_modalities(&self, n: usize) -> &[Modality] {
        &self.ranked_modalities[..n.min(self.ranked_modalities.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissedQuestion {
    pub question_id: String,
    pub text: String,
    pub correct_answer: String,
    pub selected_answer: String,
}

/// Everything the diagnosis step may see about one (student, topic) pair.
/// Scores on other topics are deliberately unreachable from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisEvidence {
    pub student: StudentId,
    pub topic: String,
    pub missed_questions: Vec<MissedQuestion>,
    pub distractor_counts: BTreeMap<String, usize>,
    pub concept_tag_misses: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDiagnosis {
    pub topic: String,
    pub statements: Vec<String>,
    pub evidence_refs: Vec<String>,
}

impl ConceptDiagnosis {
    /// Fixed diagnosis for gaps that have no item-level evidence.
    pub fn insufficient_evidence(topic: &str) -> Self {
        ConceptDiagnosis {
            topic: topic.to_string(),
            statements: vec![
                "Insufficient item-level evidence for a concept-level diagnosis; the gap rests on gradebook scores alone.".to_string(),
            ],
            evidence_refs: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosedGap {
    pub entry: SkillGapEntry,
    pub diagnosis: ConceptDiagnosis,
}

/// The ordered skill-gap report for one student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub student: StudentId,
    pub gaps: Vec<DiagnosedGap>,
    pub tau_used: f64,
    pub generated_at: DateTime<Utc>,
}

/// Rule-based preference extraction: a pure field mapping. Free-text items
/// are joined into `notes` in key order.
pub fn extract_preferences(survey: &PreferenceSurvey) -> ExtractedPreferences {
    let mut notes = Vec::new();
    if !survey.assessment_preference.is_empty() {
        notes.push(format!("assessment: {}", survey.assessment_preference));
    }
    if !survey.study_time.is_empty() {
        notes.push(format!("study time: {}", survey.study_time));
    }
    for (key, value) in &survey.free_text {
        notes.push(format!("{key}: {value}"));
    }
    ExtractedPreferences {
        student: survey.student.clone(),
        pacing: survey.pacing,
        ranked_modalities: survey.modality_ranking.clone(),
        feedback_style: survey.feedback_preference.clone(),
        notes: notes.join("; "),
    }
}

/// Agent-mode extraction: same field mapping, but the notes are a model
/// summary of the survey's free text.
pub fn extract_preferences_with_agent(
    survey: &PreferenceSurvey,
    gateway: &AgentGateway,
    model_id: &str,
    template: &PromptTemplate,
) -> Result<ExtractedPreferences, DiagnosisError> {
    let modalities = survey
        .modality_ranking
        .iter()
        .map(|m| m.name())
        .collect::<Vec<_>>()
        .join(", ");
    let extra = if survey.free_text.is_empty() {
        "(none)".to_string()
    } else {
        survey
            .free_text
            .iter()
            .map(|(k, v)| format!("- {k}: {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let bindings = BTreeMap::from([
        (
            "pacing".to_string(),
            match survey.pacing {
                Pacing::SelfPaced => "self-paced".to_string(),
                Pacing::InstructorPaced => "instructor-paced".to_string(),
            },
        ),
        ("modalities".to_string(), modalities),
        ("assessment".to_string(), survey.assessment_preference.clone()),
        ("feedback".to_string(), survey.feedback_preference.clone()),
        ("study_time".to_string(), survey.study_time.clone()),
        ("extra".to_string(), extra),
    ]);
    let rendered = template.render(&bindings)?;
    let request = AgentRequest::new(model_id, prompts::SYSTEM_EXTRACT, rendered.text);
    let response = gateway.complete(&request)?;

    let mut prefs = extract_preferences(survey);
    prefs.notes = response.text.trim().to_string();
    Ok(prefs)
}

/// Collect a student's wrong answers on one topic and the derived tallies.
/// Empty evidence is valid: it means the student missed nothing there.
/// Responses to exam questions are excluded: exams are evaluation ground
/// truth and must never reach a model prompt.
pub fn assemble_evidence(
    dataset: &CourseDataset,
    student: &StudentId,
    topic: &str,
) -> DiagnosisEvidence {
    let mut missed_questions = Vec::new();
    let mut distractor_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut concept_tag_misses: BTreeMap<String, usize> = BTreeMap::new();

    for response in dataset.responses_of(student) {
        let Some(question) = dataset.question(&response.question_id) else {
            continue;
        };
        if dataset.exam_assessment_ids.contains(&question.quiz_id) {
            continue;
        }
        if question.topic != topic || response.selected_answer == question.correct_answer {
            continue;
        }
        missed_questions.push(MissedQuestion {
            question_id: question.question_id.clone(),
            text: question.text.clone(),
            correct_answer: question.correct_answer.clone(),
            selected_answer: response.selected_answer.clone(),
        });
        if question.kind == QuestionKind::MultipleChoice {
            *distractor_counts
                .entry(response.selected_answer.clone())
                .or_default() += 1;
        }
        for tag in &question.concept_tags {
            *concept_tag_misses.entry(tag.clone()).or_default() += 1;
        }
    }

    DiagnosisEvidence {
        student: student.clone(),
        topic: topic.to_string(),
        missed_questions,
        distractor_counts,
        concept_tag_misses,
    }
}

fn evidence_bindings(evidence: &DiagnosisEvidence) -> BTreeMap<String, String> {
    let missed = evidence
        .missed_questions
        .iter()
        .map(|m| {
            format!(
                "- [{}] {} | selected: {} | correct: {}",
                m.question_id, m.text, m.selected_answer, m.correct_answer
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let distractors = if evidence.distractor_counts.is_empty() {
        "(none)".to_string()
    } else {
        evidence
            .distractor_counts
            .iter()
            .map(|(option, n)| format!("- {option}: {n}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let tags = if evidence.concept_tag_misses.is_empty() {
        "(none)".to_string()
    } else {
        evidence
            .concept_tag_misses
            .iter()
            .map(|(tag, n)| format!("- {tag}: {n}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    BTreeMap::from([
        ("topic".to_string(), evidence.topic.clone()),
        ("missed_questions".to_string(), missed),
        ("distractor_counts".to_string(), distractors),
        ("concept_tags".to_string(), tags),
    ])
}

fn statement_line_regex() -> &'static Regex {
    use std::sync::OnceLock;
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*\d+[.)]\s*(.+?)\s*\[evidence:\s*([^\]]+)\]\s*$").unwrap()
    })
}

/// Parse a numbered-list diagnosis reply. Every line must cite at least one
/// id from `known_ids`; lines that are all whitespace are skipped.
fn parse_diagnosis_reply(
    reply: &str,
    topic: &str,
    known_ids: &BTreeSet<&str>,
) -> Result<ConceptDiagnosis, String> {
    let mut statements = Vec::new();
    let mut evidence_refs: Vec<String> = Vec::new();
    let mut seen_refs = BTreeSet::new();

    for line in reply.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let caps = statement_line_regex()
            .captures(line)
            .ok_or_else(|| format!("line does not match `N. <statement> [evidence: ...]`: {line:?}"))?;
        let statement = caps.get(1).unwrap().as_str().trim().to_string();
        if statement.is_empty() {
            return Err(format!("empty statement in line {line:?}"));
        }
        let ids: Vec<String> = caps
            .get(2)
            .unwrap()
            .as_str()
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if ids.is_empty() {
            return Err(format!("no evidence ids cited in line {line:?}"));
        }
        for id in &ids {
            if !known_ids.contains(id.as_str()) {
                return Err(format!("cited question id {id:?} is not in the evidence"));
            }
            if seen_refs.insert(id.clone()) {
                evidence_refs.push(id.clone());
            }
        }
        statements.push(statement);
    }

    if statements.is_empty() {
        return Err("reply contained no statements".to_string());
    }
    Ok(ConceptDiagnosis {
        topic: topic.to_string(),
        statements,
        evidence_refs,
    })
}

/// Model-backed diagnosis with one reprompt on contract violation.
pub fn diagnose(
    evidence: &DiagnosisEvidence,
    gateway: &AgentGateway,
    model_id: &str,
    template: &PromptTemplate,
) -> Result<ConceptDiagnosis, DiagnosisError> {
    if evidence.missed_questions.is_empty() {
        return Err(DiagnosisError::EmptyEvidence);
    }
    let known_ids: BTreeSet<&str> = evidence
        .missed_questions
        .iter()
        .map(|m| m.question_id.as_str())
        .collect();
    let rendered = template.render(&evidence_bindings(evidence))?;

    let request = AgentRequest::new(model_id, prompts::SYSTEM_DIAGNOSE, rendered.text.clone());
    let reply = gateway.complete(&request)?;
    let first_error = match parse_diagnosis_reply(&reply.text, &evidence.topic, &known_ids) {
        Ok(diagnosis) => return Ok(diagnosis),
        Err(e) => e,
    };

    let retry_text = format!(
        "{}\n\nYour previous reply was rejected: {}\nReply again, following the format exactly.",
        rendered.text, first_error
    );
    let retry = AgentRequest::new(model_id, prompts::SYSTEM_DIAGNOSE, retry_text);
    let reply = gateway.complete(&retry)?;
    parse_diagnosis_reply(&reply.text, &evidence.topic, &known_ids)
        .map_err(DiagnosisError::UnparseableDiagnosis)
}

/// Rule-based diagnosis: deterministic statements synthesized from the
/// evidence tallies, citing the missed question ids. Used when no model
/// backend is configured.
pub fn diagnose_with_rules(evidence: &DiagnosisEvidence) -> Result<ConceptDiagnosis, DiagnosisError> {
    if evidence.missed_questions.is_empty() {
        return Err(DiagnosisError::EmptyEvidence);
    }
    let all_ids: Vec<String> = evidence
        .missed_questions
        .iter()
        .map(|m| m.question_id.clone())
        .collect();

    let mut statements = Vec::new();
    statements.push(format!(
        "Missed {} question(s) on {}, indicating the core ideas are not yet secure.",
        evidence.missed_questions.len(),
        evidence.topic
    ));
    if let Some((option, count)) = evidence
        .distractor_counts
        .iter()
        .max_by_key(|(option, count)| (**count, std::cmp::Reverse(option.as_str())))
    {
        if *count >= 2 {
            statements.push(format!(
                "Repeatedly chose the incorrect option {option:?} ({count} times), suggesting a consistent misconception rather than a slip."
            ));
        }
    }
    let mut tags: Vec<(&String, &usize)> = evidence.concept_tag_misses.iter().collect();
    tags.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    if let Some((tag, count)) = tags.first() {
        statements.push(format!(
            "Errors cluster on the concept {tag:?} ({count} miss(es)); review it before moving on."
        ));
    }

    Ok(ConceptDiagnosis {
        topic: evidence.topic.clone(),
        statements,
        evidence_refs: all_ids,
    })
}

/// Pair gaps with their diagnoses, preserving gap order.
pub fn build_gap_report(
    gaps: Vec<SkillGapEntry>,
    diagnoses: Vec<ConceptDiagnosis>,
    tau: f64,
    student: &StudentId,
    generated_at: DateTime<Utc>,
) -> Result<GapReport, DiagnosisError> {
    if gaps.len() != diagnoses.len() {
        return Err(DiagnosisError::CountMismatch {
            gaps: gaps.len(),
            diagnoses: diagnoses.len(),
        });
    }
    Ok(GapReport {
        student: student.clone(),
        gaps: gaps
            .into_iter()
            .zip(diagnoses)
            .map(|(entry, diagnosis)| DiagnosedGap { entry, diagnosis })
            .collect(),
        tau_used: tau,
        generated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate_dataset, QuestionResponse, QuizQuestion};
    use crate::gateway::ScriptedChat;
    use proptest::prelude::*;
    use std::collections::BTreeSet as Set;

    fn mc_question(id: &str, topic: &str, correct: &str, tags: &[&str]) -> QuizQuestion {
        QuizQuestion {
            question_id: id.to_string(),
            quiz_id: "quiz1".to_string(),
            topic: topic.to_string(),
            kind: QuestionKind::MultipleChoice,
            text: format!("text {id}"),
            options: ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect(),
            correct_answer: correct.to_string(),
            concept_tags: tags.iter().map(|s| s.to_string()).collect(),
            instructor_difficulty: None,
        }
    }

    fn response(student: &str, qid: &str, selected: &str, correct: bool) -> QuestionResponse {
        QuestionResponse {
            student: StudentId::from(student),
            question_id: qid.to_string(),
            selected_answer: selected.to_string(),
            points_earned: if correct { 1.0 } else { 0.0 },
            points_possible: 1.0,
        }
    }

    fn gradebook_row(student: &str, topic: &str) -> crate::data::GradebookEntry {
        crate::data::GradebookEntry {
            student: StudentId::from(student),
            assessment_id: "quiz1".to_string(),
            topic: topic.to_string(),
            points_earned: 1.0,
            points_possible: 2.0,
            normalized_score: 0.5,
        }
    }

    fn dataset(
        questions: Vec<QuizQuestion>,
        responses: Vec<QuestionResponse>,
    ) -> CourseDataset {
        validate_dataset(
            "c",
            questions,
            responses,
            vec![gradebook_row("s1", "Graphs")],
            vec![],
            Set::new(),
        )
        .unwrap()
    }

    fn survey() -> PreferenceSurvey {
        PreferenceSurvey {
            student: StudentId::from("s1"),
            pacing: Pacing::SelfPaced,
            modality_ranking: vec![
                Modality::Video,
                Modality::Interactive,
                Modality::HandsOn,
                Modality::TextPdf,
            ],
            assessment_preference: "quizzes".to_string(),
            feedback_preference: "detailed".to_string(),
            study_time: "evening".to_string(),
            free_text: BTreeMap::new(),
        }
    }

    #[test]
    fn rule_extraction_maps_fields_directly() {
        let prefs = extract_preferences(&survey());
        assert_eq!(prefs.ranked_modalities, survey().modality_ranking);
        assert_eq!(prefs.pacing, Pacing::SelfPaced);
        assert_eq!(prefs.feedback_style, "detailed");
        assert!(prefs.notes.contains("study time: evening"));
    }

    #[test]
    fn rule_extraction_with_empty_survey_items_has_empty_notes() {
        let mut s = survey();
        s.assessment_preference.clear();
        s.study_time.clear();
        s.free_text.clear();
        assert_eq!(extract_preferences(&s).notes, "");
    }

    #[test]
    fn agent_extraction_is_deterministic_under_replay() {
        use crate::gateway::{record_session, ReplayStore};
        let template = crate::prompts::load("extract", None);
        let mut s = survey();
        s.free_text
            .insert("motivation".to_string(), "career change".to_string());

        let scripted = scripted_gateway(|_| "Prefers short evening video sessions.".to_string());
        let first =
            extract_preferences_with_agent(&s, &scripted, "m", &template).unwrap();
        assert_eq!(first.notes, "Prefers short evening video sessions.");
        assert_eq!(first.ranked_modalities, s.modality_ranking);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.json");
        record_session(&scripted.transcripts(), &path).unwrap();
        let replayed = AgentGateway::new(Box::new(ReplayStore::load(&path).unwrap()));
        let second =
            extract_preferences_with_agent(&s, &replayed, "m", &template).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn evidence_tallies_distractors_and_tags() {
        let data = dataset(
            vec![
                mc_question("q1", "Graphs", "A", &["bfs"]),
                mc_question("q2", "Graphs", "C", &["bfs", "dfs"]),
            ],
            vec![
                response("s1", "q1", "B", false),
                response("s1", "q2", "B", false),
            ],
        );
        let evidence = assemble_evidence(&data, &StudentId::from("s1"), "Graphs");
        assert_eq!(evidence.missed_questions.len(), 2);
        assert_eq!(evidence.distractor_counts["B"], 2);
        assert_eq!(evidence.concept_tag_misses["bfs"], 2);
        assert_eq!(evidence.concept_tag_misses["dfs"], 1);
    }

    #[test]
    fn all_correct_responses_leave_empty_evidence() {
        let data = dataset(
            vec![mc_question("q1", "Graphs", "A", &[])],
            vec![response("s1", "q1", "A", true)],
        );
        let evidence = assemble_evidence(&data, &StudentId::from("s1"), "Graphs");
        assert!(evidence.missed_questions.is_empty());
        assert!(evidence.distractor_counts.is_empty());
    }

    #[test]
    fn exam_question_misses_never_enter_evidence() {
        let mut exam_q = mc_question("fin_q1", "Graphs", "A", &["bfs"]);
        exam_q.quiz_id = "final".to_string();
        let data = validate_dataset(
            "c",
            vec![mc_question("q1", "Graphs", "A", &[]), exam_q],
            vec![
                response("s1", "q1", "B", false),
                response("s1", "fin_q1", "C", false),
            ],
            vec![
                gradebook_row("s1", "Graphs"),
                crate::data::GradebookEntry {
                    student: StudentId::from("s1"),
                    assessment_id: "final".to_string(),
                    topic: "Graphs".to_string(),
                    points_earned: 1.0,
                    points_possible: 2.0,
                    normalized_score: 0.5,
                },
            ],
            vec![],
            Set::from(["final".to_string()]),
        )
        .unwrap();
        let evidence = assemble_evidence(&data, &StudentId::from("s1"), "Graphs");
        assert_eq!(evidence.missed_questions.len(), 1);
        assert_eq!(evidence.missed_questions[0].question_id, "q1");
        assert!(!evidence.distractor_counts.contains_key("C"));
    }

    #[test]
    fn short_answer_misses_skip_distractor_tally() {
        let mut q = mc_question("q1", "Graphs", "recursion", &["base-case"]);
        q.kind = QuestionKind::ShortAnswer;
        q.options.clear();
        let data = dataset(vec![q], vec![response("s1", "q1", "loops", false)]);
        let evidence = assemble_evidence(&data, &StudentId::from("s1"), "Graphs");
        assert_eq!(evidence.missed_questions.len(), 1);
        assert!(evidence.distractor_counts.is_empty());
        assert_eq!(evidence.concept_tag_misses["base-case"], 1);
    }

    fn scripted_gateway(
        reply: impl Fn(&AgentRequest) -> String + Send + Sync + 'static,
    ) -> AgentGateway {
        AgentGateway::new(Box::new(ScriptedChat(move |r: &AgentRequest| Ok(reply(r)))))
    }

    fn two_miss_evidence() -> DiagnosisEvidence {
        DiagnosisEvidence {
            student: StudentId::from("s1"),
            topic: "Graphs".to_string(),
            missed_questions: vec![
                MissedQuestion {
                    question_id: "q1".to_string(),
                    text: "t1".to_string(),
                    correct_answer: "A".to_string(),
                    selected_answer: "B".to_string(),
                },
                MissedQuestion {
                    question_id: "q2".to_string(),
                    text: "t2".to_string(),
                    correct_answer: "C".to_string(),
                    selected_answer: "B".to_string(),
                },
            ],
            distractor_counts: BTreeMap::from([("B".to_string(), 2)]),
            concept_tag_misses: BTreeMap::from([("bfs".to_string(), 2)]),
        }
    }

    #[test]
    fn diagnose_parses_conformant_reply() {
        let gateway = scripted_gateway(|_| {
            "1. Confuses queue with stack order. [evidence: q1]\n\
             2. Misreads traversal direction. [evidence: q1,q2]"
                .to_string()
        });
        let template = crate::prompts::load("diagnose", None);
        let d = diagnose(&two_miss_evidence(), &gateway, "m", &template).unwrap();
        assert_eq!(d.statements.len(), 2);
        assert_eq!(d.evidence_refs, vec!["q1".to_string(), "q2".to_string()]);
    }

    #[test]
    fn diagnose_rejects_empty_evidence() {
        let gateway = scripted_gateway(|_| "1. x [evidence: q1]".to_string());
        let template = crate::prompts::load("diagnose", None);
        let mut evidence = two_miss_evidence();
        evidence.missed_questions.clear();
        assert!(matches!(
            diagnose(&evidence, &gateway, "m", &template),
            Err(DiagnosisError::EmptyEvidence)
        ));
    }

    #[test]
    fn diagnose_fails_after_one_reprompt_on_unknown_id() {
        let gateway = scripted_gateway(|_| "1. Bad citation. [evidence: q99]".to_string());
        let template = crate::prompts::load("diagnose", None);
        let err = diagnose(&two_miss_evidence(), &gateway, "m", &template).unwrap_err();
        assert!(matches!(err, DiagnosisError::UnparseableDiagnosis(_)));
        assert_eq!(gateway.transcripts().len(), 2);
    }

    #[test]
    fn diagnose_recovers_when_reprompt_conforms() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = std::sync::Arc::new(AtomicUsize::new(0));
        let calls2 = calls.clone();
        let gateway = scripted_gateway(move |_| {
            if calls2.fetch_add(1, Ordering::SeqCst) == 0 {
                "free-form prose, no format".to_string()
            } else {
                "1. Now conformant. [evidence: q2]".to_string()
            }
        });
        let template = crate::prompts::load("diagnose", None);
        let d = diagnose(&two_miss_evidence(), &gateway, "m", &template).unwrap();
        assert_eq!(d.statements, vec!["Now conformant.".to_string()]);
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn rule_diagnosis_cites_all_missed_ids() {
        let d = diagnose_with_rules(&two_miss_evidence()).unwrap();
        assert!(!d.statements.is_empty());
        assert_eq!(d.evidence_refs, vec!["q1".to_string(), "q2".to_string()]);
        assert!(d.statements.iter().any(|s| s.contains("\"B\"")));
    }

    #[test]
    fn gap_report_preserves_order_and_checks_counts() {
        let gaps = vec![
            SkillGapEntry { topic: "C".into(), rho: 0.4, rank: 1 },
            SkillGapEntry { topic: "B".into(), rho: 0.65, rank: 2 },
        ];
        let diagnoses = vec![
            ConceptDiagnosis::insufficient_evidence("C"),
            ConceptDiagnosis::insufficient_evidence("B"),
        ];
        let report = build_gap_report(
            gaps.clone(),
            diagnoses,
            0.7,
            &StudentId::from("s1"),
            Utc::now(),
        )
        .unwrap();
        assert_eq!(report.gaps[0].entry.topic, "C");
        assert_eq!(report.gaps[1].entry.topic, "B");

        let err = build_gap_report(
            gaps,
            vec![ConceptDiagnosis::insufficient_evidence("C")],
            0.7,
            &StudentId::from("s1"),
            Utc::now(),
        )
        .unwrap_err();
        assert!(matches!(err, DiagnosisError::CountMismatch { gaps: 2, diagnoses: 1 }));

        let empty = build_gap_report(vec![], vec![], 0.7, &StudentId::from("s1"), Utc::now());
        assert!(empty.unwrap().gaps.is_empty());
    }

    proptest! {
        // Distractor tally total equals the number of missed multiple-choice
        // questions; an independent recount over the raw responses agrees.
        #[test]
        fn tallies_match_brute_force_recount(
            picks in prop::collection::vec(0usize..4, 1..30),
        ) {
            let options = ["A", "B", "C", "D"];
            let questions: Vec<QuizQuestion> = (0..picks.len())
                .map(|i| mc_question(&format!("q{i}"), "Graphs", "A", &["tag"]))
                .collect();
            let responses: Vec<QuestionResponse> = picks
                .iter()
                .enumerate()
                .map(|(i, pick)| {
                    response("s1", &format!("q{i}"), options[*pick], *pick == 0)
                })
                .collect();
            let data = dataset(questions, responses.clone());
            let evidence = assemble_evidence(&data, &StudentId::from("s1"), "Graphs");

            // Brute-force recount straight off the response list.
            let mut expected: BTreeMap<String, usize> = BTreeMap::new();
            let mut missed = 0usize;
            for r in &responses {
                if r.selected_answer != "A" {
                    missed += 1;
                    *expected.entry(r.selected_answer.clone()).or_default() += 1;
                }
            }
            prop_assert_eq!(evidence.missed_questions.len(), missed);
            prop_assert_eq!(&evidence.distractor_counts, &expected);
            let tally_total: usize = evidence.distractor_counts.values().sum();
            prop_assert_eq!(tally_total, missed);
            prop_assert_eq!(
                evidence.concept_tag_misses.get("tag").copied().unwrap_or(0),
                missed
            );
        }

        // Rule-mode extraction is a pure function of the survey.
        #[test]
        fn rule_extraction_is_pure(seed in 0u64..500) {
            let mut s = survey();
            s.free_text.insert(format!("k{seed}"), format!("v{seed}"));
            let a = extract_preferences(&s);
            let b = extract_preferences(&s);
            prop_assert_eq!(a, b);
        }
    }
}
