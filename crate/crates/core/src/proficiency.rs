//! Topic proficiency estimation and skill-gap identification.
//!
//! For each topic with assessment evidence, the proficiency score is the
//! unweighted arithmetic mean of the normalized scores of its items. Scores
//! map to High/Medium/Low bands through configurable cutoffs; topics with no
//! evidence are Unknown. A topic is a skill gap when its score falls
//! strictly below the mastery threshold; gaps are ordered by ascending
//! score, then topic name, and ranked from 1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CourseDataset, GradebookEntry, StudentId};

pub const DEFAULT_HIGH_MIN: f64 = 0.80;
pub const DEFAULT_MEDIUM_MIN: f64 = 0.60;
pub const DEFAULT_TAU: f64 = 0.70;

#[derive(Debug, Error)]
pub enum ProficiencyError {
    #[error("gradebook entry names topic {0:?} outside the course topic set")]
    UnknownTopic(String),
    #[error("mastery threshold must lie in [0,1], got {0}")]
    InvalidTau(f64),
    #[error("band cutoffs must satisfy 0 < medium_min < high_min <= 1, got high={high}, medium={medium}")]
    InvalidBands { high: f64, medium: f64 },
}

/// Band cutoffs. `High` iff rho >= high_min, `Medium` iff
/// medium_min <= rho < high_min, `Low` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    pub high_min: f64,
    pub medium_min: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            high_min: DEFAULT_HIGH_MIN,
            medium_min: DEFAULT_MEDIUM_MIN,
        }
    }
}

impl BandConfig {
    pub fn new(high_min: f64, medium_min: f64) -> Result<Self, ProficiencyError> {
        if !(medium_min > 0.0 && medium_min < high_min && high_min <= 1.0) {
            return Err(ProficiencyError::InvalidBands {
                high: high_min,
                medium: medium_min,
            });
        }
        Ok(BandConfig {
            high_min,
            medium_min,
        })
    }

    pub fn band_for(&self, rho: f64) -> Band {
        if rho >= self.high_min {
            Band::High
        } else if rho >= self.medium_min {
            Band::Medium
        } else {
            Band::Low
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    High,
    Medium,
    Low,
    Unknown,
}

impl Band {
    pub fn name(&self) -> &'static str {
        match self {
            Band::High => "High",
            Band::Medium => "Medium",
            Band::Low => "Low",
            Band::Unknown => "Unknown",
        }
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// All normalized scores observed for one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScores {
    pub topic: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicProficiency {
    pub topic: String,
    pub rho: f64,
    pub band: Band,
    pub evidence_count: usize,
}

/// One student's proficiency over the whole course topic set: exactly one
/// entry per topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProficiencyVector {
    pub student: StudentId,
    pub entries: BTreeMap<String, TopicProficiency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillGapEntry {
    pub topic: String,
    pub rho: f64,
    pub rank: usize,
}

/// Group gradebook scores by topic. Topics in `topics` with no entries are
/// absent from the result; they surface later as Unknown.
pub fn process_gradebook(
    entries: &[GradebookEntry],
    topics: &BTreeSet<String>,
) -> Result<BTreeMap<String, TopicScores>, ProficiencyError> {
    let mut grouped: BTreeMap<String, TopicScores> = BTreeMap::new();
    for entry in entries {
        if !topics.contains(&entry.topic) {
            return Err(ProficiencyError::UnknownTopic(entry.topic.clone()));
        }
        grouped
            .entry(entry.topic.clone())
            .or_insert_with(|| TopicScores {
                topic: entry.topic.clone(),
                scores: Vec::new(),
            })
            .scores
            .push(entry.normalized_score);
    }
    Ok(grouped)
}

/// Mean the grouped scores into a complete proficiency vector over `topics`.
pub fn compute_proficiency(
    grouped: &BTreeMap<String, TopicScores>,
    topics: &BTreeSet<String>,
    bands: &BandConfig,
    student: &StudentId,
) -> ProficiencyVector {
    let mut entries = BTreeMap::new();
    for topic in topics {
        let entry = match grouped.get(topic) {
            Some(scores) if !scores.scores.is_empty() => {
                let rho = scores.scores.iter().sum::<f64>() / scores.scores.len() as f64;
                TopicProficiency {
                    topic: topic.clone(),
                    rho,
                    band: bands.band_for(rho),
                    evidence_count: scores.scores.len(),
                }
            }
            _ => TopicProficiency {
                topic: topic.clone(),
                rho: 0.0,
                band: Band::Unknown,
                evidence_count: 0,
            },
        };
        entries.insert(topic.clone(), entry);
    }
    ProficiencyVector {
        student: student.clone(),
        entries,
    }
}

/// Topics with evidence whose score falls strictly below `tau`, ascending by
/// score then topic name, ranked from 1.
pub fn identify_gaps(
    vector: &ProficiencyVector,
    tau: f64,
) -> Result<Vec<SkillGapEntry>, ProficiencyError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(ProficiencyError::InvalidTau(tau));
    }
    let mut gaps: Vec<&TopicProficiency> = vector
        .entries
        .values()
        .filter(|p| p.evidence_count > 0 && p.rho < tau)
        .collect();
    gaps.sort_by(|a, b| {
        a.rho
            .partial_cmp(&b.rho)
            .expect("rho is never NaN")
            .then_with(|| a.topic.cmp(&b.topic))
    });
    Ok(gaps
        .into_iter()
        .enumerate()
        .map(|(i, p)| SkillGapEntry {
            topic: p.topic.clone(),
            rho: p.rho,
            rank: i + 1,
        })
        .collect())
}

/// The gradebook evidence that feeds one student's proficiency: their own
/// rows, with exam assessments excluded unless `include_exams` is set
/// (exams are reserved as evaluation ground truth).
pub fn student_evidence(
    dataset: &CourseDataset,
    student: &StudentId,
    include_exams: bool,
) -> Vec<GradebookEntry> {
    dataset
        .gradebook
        .iter()
        .filter(|e| &e.student == student)
        .filter(|e| include_exams || !dataset.exam_assessment_ids.contains(&e.assessment_id))
        .cloned()
        .collect()
}

/// Full per-student path: filter evidence, group, and mean.
pub fn vector_for_student(
    dataset: &CourseDataset,
    student: &StudentId,
    bands: &BandConfig,
    include_exams: bool,
) -> Result<ProficiencyVector, ProficiencyError> {
    let topics = dataset.topics();
    let evidence = student_evidence(dataset, student, include_exams);
    let grouped = process_gradebook(&evidence, &topics)?;
    Ok(compute_proficiency(&grouped, &topics, bands, student))
}
