//! Synthetic cohorts with known latent mastery, used as an end-to-end
//! oracle for the proficiency and gap pipeline.
//!
//! Generation is fully deterministic given the seed. The generator is
//! ChaCha20 (`rand_chacha::ChaCha20Rng`), seeded through `seed_from_u64`;
//! draws happen in the documented order below, so equal configs yield
//! byte-identical bundles:
//!
//! 1. per question (quiz questions for every topic in index order, then
//!    exam questions): the index of the correct option;
//! 2. per student, per topic (students outer): the latent mastery, redrawn
//!    while it falls inside the configured exclusion band, if any;
//! 3. per student: pacing (one bool) and a Fisher-Yates shuffle of the
//!    modality ranking;
//! 4. per student, per question (same question order as step 1): a noise
//!    draw in [-1, 1], and for incorrect answers the wrong-option index.
//!
//! Response model: a response is correct iff
//! `clamp(mastery - penalty + noise_draw * noise, 0, 1) >= 0.5`, with
//! difficulty penalties 0 / 0.1 / 0.2 for Easy / Medium / Hard. The noise
//! draw is the only stochastic term, so at `noise = 0` correctness is a
//! deterministic threshold on mastery: mastery 1.0 answers everything
//! correctly, mastery 0.0 answers nothing correctly, and topic-level score
//! means cannot drift across the gap threshold, which is what makes exact
//! gap recovery provable for noiseless cohorts.
//!
//! Difficulty labels are apportioned per topic from the configured mix by
//! largest remainder, so realized proportions are exact up to rounding.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    validate_dataset, CourseDataset, Difficulty, GradebookEntry, Modality, Pacing,
    PreferenceSurvey, QuestionKind, QuestionResponse, QuizQuestion, StudentId,
};
use crate::proficiency::{identify_gaps, vector_for_student, BandConfig};

pub const EXAM_ASSESSMENT_ID: &str = "final";

/// Penalty subtracted from mastery per difficulty level.
pub fn difficulty_penalty(level: Difficulty) -> f64 {
    match level {
        Difficulty::Easy => 0.0,
        Difficulty::Medium => 0.1,
        Difficulty::Hard => 0.2,
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyMix {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

impl Default for DifficultyMix {
    fn default() -> Self {
        DifficultyMix {
            easy: 1.0 / 3.0,
            medium: 1.0 / 3.0,
            hard: 1.0 / 3.0,
        }
    }
}

impl DifficultyMix {
    fn validate(&self) -> Result<(), SimError> {
        let parts = [self.easy, self.medium, self.hard];
        if parts.iter().any(|p| *p < 0.0) {
            return Err(SimError::Config("difficulty proportions must be >= 0".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Config(format!(
                "difficulty proportions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Exact per-topic counts by largest remainder.
    fn apportion(&self, total: usize) -> [usize; 3] {
        let raw = [
            self.easy * total as f64,
            self.medium * total as f64,
            self.hard * total as f64,
        ];
        let mut counts = [raw[0] as usize, raw[1] as usize, raw[2] as usize];
        let mut remainders: Vec<(usize, f64)> = raw
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r - counts[i] as f64))
            .collect();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut assigned: usize = counts.iter().sum();
        let mut i = 0;
        while assigned < total {
            counts[remainders[i % 3].0] += 1;
            assigned += 1;
            i += 1;
        }
        counts
    }
}

/// Mastery values inside `[center - margin, center + margin]` are redrawn,
/// keeping latent mastery bounded away from a gap threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasteryExclusion {
    pub center: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_students: usize,
    pub n_topics: usize,
    pub questions_per_topic: usize,
    /// Noise amplitude in [0, 0.5]; the per-response perturbation is
    /// uniform in [-noise, +noise].
    pub noise: f64,
    pub exam_questions_per_topic: usize,
    pub difficulty_mix: DifficultyMix,
    /// Optional exclusion band for mastery draws.
    pub mastery_exclusion: Option<MasteryExclusion>,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        SimConfig {
            seed,
            n_students: 6,
            n_topics: 4,
            questions_per_topic: 24,
            noise: 0.0,
            exam_questions_per_topic: 6,
            difficulty_mix: DifficultyMix::default(),
            mastery_exclusion: None,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.n_students == 0 || self.n_topics == 0 {
            return Err(SimError::Config("students and topics must be >= 1".into()));
        }
        if self.questions_per_topic == 0 || self.exam_questions_per_topic == 0 {
            return Err(SimError::Config("questions per topic must be >= 1".into()));
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return Err(SimError::Config(format!(
                "noise must lie in [0, 0.5], got {}",
                self.noise
            )));
        }
        self.difficulty_mix.validate()
    }
}

/// One simulated student's hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentProfile {
    pub student: StudentId,
    pub mastery: BTreeMap<String, f64>,
    pub preference: PreferenceSurvey,
}

fn topic_name(i: usize) -> String {
    format!("topic_{:02}", i + 1)
}

fn student_name(i: usize) -> String {
    format!("s{:03}", i + 1)
}

const OPTION_COUNT: usize = 4;

fn option_text(topic: &str, question_idx: usize, option_idx: usize) -> String {
    format!("{topic} answer {question_idx}-{}", ["a", "b", "c", "d"][option_idx])
}

struct SimQuestion {
    question: QuizQuestion,
    is_exam: bool,
}

fn draw_mastery(rng: &mut ChaCha20Rng, exclusion: Option<&MasteryExclusion>) -> f64 {
    loop {
        let value: f64 = rng.random();
        match exclusion {
            Some(band)
                if value >= band.center - band.margin && value <= band.center + band.margin => {
                continue
            }
            _ => return value,
        }
    }
}

/// Generate a full course bundle plus the latent profiles it was built
/// from. Deterministic given the config.
pub fn generate_cohort(
    config: &SimConfig,
) -> Result<(CourseDataset, Vec<LatentProfile>), SimError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);

    let topics: Vec<String> = (0..config.n_topics).map(topic_name).collect();

    // Step 1: questions. Quiz questions per topic, then exam questions.
    let mut questions: Vec<SimQuestion> = Vec::new();
    let build_block = |rng: &mut ChaCha20Rng,
                           questions: &mut Vec<SimQuestion>,
                           topic: &str,
                           count: usize,
                           quiz_id: String,
                           prefix: &str,
                           is_exam: bool,
                           mix: &DifficultyMix| {
        let counts = mix.apportion(count);
        for idx in 0..count {
            let level = if idx < counts[0] {
                Difficulty::Easy
            } else if idx < counts[0] + counts[1] {
                Difficulty::Medium
            } else {
                Difficulty::Hard
            };
            let correct_idx = rng.random_range(0..OPTION_COUNT);
            let options: Vec<String> = (0..OPTION_COUNT)
                .map(|o| option_text(topic, idx, o))
                .collect();
            questions.push(SimQuestion {
                question: QuizQuestion {
                    question_id: format!("{prefix}_{topic}_{idx:03}"),
                    quiz_id: quiz_id.clone(),
                    topic: topic.to_string(),
                    kind: QuestionKind::MultipleChoice,
                    text: format!("Question {idx} on {topic}"),
                    correct_answer: options[correct_idx].clone(),
                    options,
                    concept_tags: vec![format!("{topic}-core"), format!("{topic}-c{}", idx % 3)],
                    instructor_difficulty: Some(level),
                },
                is_exam,
            });
        }
    };
    for topic in &topics {
        build_block(
            &mut rng,
            &mut questions,
            topic,
            config.questions_per_topic,
            format!("quiz_{topic}"),
            "q",
            false,
            &config.difficulty_mix,
        );
    }
    for topic in &topics {
        build_block(
            &mut rng,
            &mut questions,
            topic,
            config.exam_questions_per_topic,
            EXAM_ASSESSMENT_ID.to_string(),
            "x",
            true,
            &config.difficulty_mix,
        );
    }

    // Steps 2-3: latent profiles.
    let mut latents: Vec<LatentProfile> = Vec::new();
    for s in 0..config.n_students {
        let student = StudentId(student_name(s));
        let mut mastery = BTreeMap::new();
        for topic in &topics {
            mastery.insert(
                topic.clone(),
                draw_mastery(&mut rng, config.mastery_exclusion.as_ref()),
            );
        }
        let pacing = if rng.random::<bool>() {
            Pacing::SelfPaced
        } else {
            Pacing::InstructorPaced
        };
        let mut ranking = Modality::ALL.to_vec();
        ranking.shuffle(&mut rng);
        latents.push(LatentProfile {
            student: student.clone(),
            mastery,
            preference: PreferenceSurvey {
                student,
                pacing,
                modality_ranking: ranking,
                assessment_preference: "short quizzes".to_string(),
                feedback_preference: "detailed written feedback".to_string(),
                study_time: "evening".to_string(),
                free_text: BTreeMap::from([(
                    "environment".to_string(),
                    "quiet room".to_string(),
                )]),
            },
        });
    }

    // Step 4: responses.
    let mut responses: Vec<QuestionResponse> = Vec::new();
    for latent in &latents {
        for sim_q in &questions {
            let q = &sim_q.question;
            let mastery = latent.mastery[&q.topic];
            let penalty =
                difficulty_penalty(q.instructor_difficulty.expect("simulated questions are labeled"));
            let perturbation: f64 = rng.random_range(-1.0..=1.0) * config.noise;
            let ability = (mastery - penalty + perturbation).clamp(0.0, 1.0);
            let correct = ability >= 0.5;
            let selected_answer = if correct {
                q.correct_answer.clone()
            } else {
                let wrong: Vec<&String> =
                    q.options.iter().filter(|o| **o != q.correct_answer).collect();
                wrong[rng.random_range(0..wrong.len())].clone()
            };
            responses.push(QuestionResponse {
                student: latent.student.clone(),
                question_id: q.question_id.clone(),
                selected_answer,
                points_earned: if correct { 1.0 } else { 0.0 },
                points_possible: 1.0,
            });
        }
    }

    // Gradebook: per student, per topic, one quiz row and one exam row
    // aggregated from the responses.
    let correct_by: BTreeMap<(&StudentId, &str), (usize, usize, usize, usize)> = {
        let mut map: BTreeMap<(&StudentId, &str), (usize, usize, usize, usize)> = BTreeMap::new();
        let question_by_id: BTreeMap<&str, &SimQuestion> = questions
            .iter()
            .map(|q| (q.question.question_id.as_str(), q))
            .collect();
        for r in &responses {
            let sim_q = question_by_id[r.question_id.as_str()];
            let key = (&r.student, sim_q.question.topic.as_str());
            let slot = map.entry(key).or_insert((0, 0, 0, 0));
            let correct = r.points_earned > 0.0;
            if sim_q.is_exam {
                slot.2 += correct as usize;
                slot.3 += 1;
            } else {
                slot.0 += correct as usize;
                slot.1 += 1;
            }
        }
        map
    };

    let mut gradebook: Vec<GradebookEntry> = Vec::new();
    for latent in &latents {
        for topic in &topics {
            let (quiz_correct, quiz_total, exam_correct, exam_total) = correct_by
                .get(&(&latent.student, topic.as_str()))
                .copied()
                .unwrap_or((0, 0, 0, 0));
            gradebook.push(GradebookEntry {
                student: latent.student.clone(),
                assessment_id: format!("quiz_{topic}"),
                topic: topic.clone(),
                points_earned: quiz_correct as f64,
                points_possible: quiz_total as f64,
                normalized_score: quiz_correct as f64 / quiz_total as f64,
            });
            gradebook.push(GradebookEntry {
                student: latent.student.clone(),
                assessment_id: EXAM_ASSESSMENT_ID.to_string(),
                topic: topic.clone(),
                points_earned: exam_correct as f64,
                points_possible: exam_total as f64,
                normalized_score: exam_correct as f64 / exam_total as f64,
            });
        }
    }

    let surveys: Vec<PreferenceSurvey> =
        latents.iter().map(|l| l.preference.clone()).collect();
    let dataset = validate_dataset(
        &format!("sim_{}", config.seed),
        questions.into_iter().map(|q| q.question).collect(),
        responses,
        gradebook,
        surveys,
        BTreeSet::from([EXAM_ASSESSMENT_ID.to_string()]),
    )
    .expect("generated bundles are internally consistent");

    Ok((dataset, latents))
}

/// Gap-recovery quality: planted gaps (latent mastery below tau) versus
/// gaps detected by the proficiency pipeline on the generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub planted: usize,
    pub detected: usize,
    pub true_positives: usize,
}

pub fn recovery_report(
    dataset: &CourseDataset,
    latents: &[LatentProfile],
    tau: f64,
    bands: &BandConfig,
) -> RecoveryReport {
    let mut planted: BTreeSet<(StudentId, String)> = BTreeSet::new();
    for latent in latents {
        for (topic, mastery) in &latent.mastery {
            if *mastery < tau {
                planted.insert((latent.student.clone(), topic.clone()));
            }
        }
    }

    let mut detected: BTreeSet<(StudentId, String)> = BTreeSet::new();
    for latent in latents {
        let vector = vector_for_student(dataset, &latent.student, bands, false)
            .expect("simulated topics are consistent");
        for gap in identify_gaps(&vector, tau).expect("tau validated by caller") {
            detected.insert((latent.student.clone(), gap.topic));
        }
    }

    let true_positives = planted.intersection(&detected).count();
    let precision = if detected.is_empty() {
        1.0
    } else {
        true_positives as f64 / detected.len() as f64
    };
    let recall = if planted.is_empty() {
        1.0
    } else {
        true_positives as f64 / planted.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RecoveryReport {
        precision,
        recall,
        f1,
        planted: planted.len(),
        detected: detected.len(),
        true_positives,
    }
}
