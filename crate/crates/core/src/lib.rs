//! Diagnostic pipeline for course assessment data.
//!
//! The crate ingests three kinds of learner data (preference surveys,
//! gradebook records, question-level quiz responses), estimates per-topic
//! proficiency, identifies and diagnoses skill gaps, recommends learning
//! resources compatible with the learner's preferences, renders per-student
//! summaries, and evaluates predictions against exam-derived ground truth.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`data`] - parsing, validation, and (de)serialization of course bundles
//! - [`gateway`] - the single chat-completion boundary with record/replay
//! - [`proficiency`] - topic proficiency scores, bands, and gap detection
//! - [`diagnosis`] - per-gap evidence assembly and concept-level diagnosis
//! - [`labeling`] - instructor and model difficulty labels
//! - [`recommender`] - query construction, retrieval, and compatibility filtering
//! - [`summary`] - five-section student summaries
//! - [`evaluation`] - confusion matrices, precision/recall/F1, ground truth
//! - [`simulation`] - seeded synthetic cohorts with known latent mastery
//! - [`cli`] - subcommand orchestration used by the `align` binary

pub mod cli;
pub mod data;
pub mod diagnosis;
pub mod evaluation;
pub mod gateway;
pub mod labeling;
pub mod proficiency;
pub mod prompts;
pub mod recommender;
pub mod simulation;
pub mod summary;
