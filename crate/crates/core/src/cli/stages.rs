//! Subcommand implementations. Each stage loads the course bundle itself,
//! recomputes what it depends on, and writes its artifacts into the output
//! directory, so every subcommand is independently scriptable and the
//! pipeline is just the stages run in order against shared state.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::config::{BudgetSemantics, RunConfig, StageMode, SummaryMode};
use super::{CliError, CommonArgs};
use crate::data::{load_course, save_course, CourseDataset, Modality, Pacing, StudentId};
use crate::diagnosis::{
    assemble_evidence, build_gap_report, diagnose, diagnose_with_rules, extract_preferences,
    ConceptDiagnosis, ExtractedPreferences, GapReport,
};
use crate::evaluation::{
    compare_label_sets, confusion, derive_ground_truth, emit_chart_data, metrics, MetricsReport,
    SkippedPair,
};
use crate::gateway::{
    record_session, AgentGateway, ChatBackend, LiveChat, PromptTemplate, ReplayStore,
};
use crate::labeling::{label_bank, load_instructor_labels, LabelFailure, LabelingOutcome};
use crate::proficiency::{identify_gaps, vector_for_student, Band, ProficiencyVector, SkillGapEntry};
use crate::prompts;
use crate::recommender::{
    recommend, Budget, CompatMode, FetchBackend, FixturePages, LiveFetch, LiveSearch,
    RecommendError, RecommendationSet, SearchBackend, SearchFixtures, SearchQuery, SearchResult,
    ResourceContent,
};
use crate::simulation::{generate_cohort, DifficultyMix, MasteryExclusion, SimConfig};
use crate::summary::{summarize_template, summarize_with_agent, StudentSummary};

/// Timestamp for emitted reports. Honors SOURCE_DATE_EPOCH so deterministic
/// runs produce byte-identical artifacts.
fn stamp() -> DateTime<Utc> {
    if let Ok(raw) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(secs) = raw.parse::<i64>() {
            if let Some(t) = DateTime::from_timestamp(secs, 0) {
                return t;
            }
        }
    }
    Utc::now()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))?;
    fs::write(path, json + "\n")?;
    println!("wrote {}", path.display());
    Ok(())
}

struct UnavailableSearch;
impl SearchBackend for UnavailableSearch {
    fn search(&self, _query: &SearchQuery) -> Result<Vec<SearchResult>, RecommendError> {
        Err(RecommendError::BackendUnavailable(
            "no search backend: pass --fixtures <dir> or set ALIGN_SEARCH_URL".to_string(),
        ))
    }
}

struct UnavailableFetch;
impl FetchBackend for UnavailableFetch {
    fn fetch(&self, _url: &str) -> Result<ResourceContent, RecommendError> {
        Err(RecommendError::BackendUnavailable(
            "no fetch backend: pass --fixtures <dir> or set ALIGN_SEARCH_URL".to_string(),
        ))
    }
}

type RetrievalBackends = (Box<dyn SearchBackend>, Box<dyn FetchBackend>);

/// Shared state for one invocation: the loaded course, resolved config,
/// optional chat gateway, and the prompt templates.
struct Context {
    cfg: RunConfig,
    dataset: CourseDataset,
    gateway: Option<AgentGateway>,
}

impl Context {
    fn open(args: &CommonArgs) -> Result<Context, CliError> {
        let cfg = RunConfig::resolve(args)?;
        let dataset = load_course(cfg.course_path()?)?;
        let gateway = Self::make_gateway(&cfg)?;
        fs::create_dir_all(&cfg.out)?;
        Ok(Context {
            cfg,
            dataset,
            gateway,
        })
    }

    fn make_gateway(cfg: &RunConfig) -> Result<Option<AgentGateway>, CliError> {
        if let Some(path) = &cfg.replay {
            let store = ReplayStore::load(path)?;
            return Ok(Some(AgentGateway::new(Box::new(store))));
        }
        if std::env::var(crate::gateway::ENV_LLM_URL).is_ok() {
            let live: Box<dyn ChatBackend> = Box::new(LiveChat::from_env()?);
            return Ok(Some(AgentGateway::new(live)));
        }
        Ok(None)
    }

    fn gateway_required(&self, stage: &str) -> Result<&AgentGateway, CliError> {
        self.gateway.as_ref().ok_or_else(|| {
            CliError::Backend(format!(
                "{stage} needs a chat backend: pass --replay <store> or set ALIGN_LLM_URL/ALIGN_LLM_KEY"
            ))
        })
    }

    fn template(&self, name: &str) -> PromptTemplate {
        prompts::load(name, self.cfg.prompts_dir.as_deref())
    }

    fn search_backends(&self) -> Result<RetrievalBackends, CliError> {
        if let Some(dir) = &self.cfg.fixtures {
            let fixtures = SearchFixtures::load(&dir.join("search.json"))
                .map_err(|e| CliError::Backend(e.to_string()))?;
            let pages = FixturePages::new(dir.join("pages"));
            return Ok((Box::new(fixtures), Box::new(pages)));
        }
        if std::env::var(crate::recommender::ENV_SEARCH_URL).is_ok() {
            let search = LiveSearch::from_env().map_err(|e| CliError::Backend(e.to_string()))?;
            return Ok((Box::new(search), Box::new(LiveFetch::new())));
        }
        Ok((Box::new(UnavailableSearch), Box::new(UnavailableFetch)))
    }

    /// Preferences for one student; a neutral default when no survey is on
    /// file.
    fn prefs_for(&self, student: &StudentId) -> ExtractedPreferences {
        match self.dataset.survey_for(student) {
            Some(survey) => extract_preferences(survey),
            None => ExtractedPreferences {
                student: student.clone(),
                pacing: Pacing::InstructorPaced,
                ranked_modalities: Modality::ALL.to_vec(),
                feedback_style: String::new(),
                notes: "no preference survey on file".to_string(),
            },
        }
    }

    fn vector_and_gaps(
        &self,
        student: &StudentId,
    ) -> Result<(ProficiencyVector, Vec<SkillGapEntry>), CliError> {
        let vector = vector_for_student(
            &self.dataset,
            student,
            &self.cfg.bands,
            self.cfg.include_exams,
        )?;
        let gaps = identify_gaps(&vector, self.cfg.tau)?;
        Ok((vector, gaps))
    }

    /// Diagnose every gap of one student, honoring the configured mode.
    /// Gaps with no item-level evidence get the fixed fallback statement.
    fn gap_report_for(
        &self,
        student: &StudentId,
        gaps: Vec<SkillGapEntry>,
    ) -> Result<GapReport, CliError> {
        let template = self.template("diagnose");
        let mut diagnoses = Vec::with_capacity(gaps.len());
        for gap in &gaps {
            let evidence = assemble_evidence(&self.dataset, student, &gap.topic);
            let diagnosis = if evidence.missed_questions.is_empty() {
                ConceptDiagnosis::insufficient_evidence(&gap.topic)
            } else {
                match self.cfg.mode_diagnose {
                    StageMode::Rule => diagnose_with_rules(&evidence)?,
                    StageMode::Agent => {
                        let gateway = self.gateway_required("diagnosis (--mode-diagnose agent)")?;
                        diagnose(&evidence, gateway, &self.cfg.model, &template)?
                    }
                }
            };
            diagnoses.push(diagnosis);
        }
        Ok(build_gap_report(
            gaps,
            diagnoses,
            self.cfg.tau,
            student,
            stamp(),
        )?)
    }

    fn recommendations_for(
        &self,
        report: &GapReport,
        prefs: &ExtractedPreferences,
        search: &dyn SearchBackend,
        fetch: &dyn FetchBackend,
    ) -> Result<RecommendationSet, CliError> {
        let budget = match self.cfg.budget {
            BudgetSemantics::Global => Budget::Global(self.cfg.k),
            BudgetSemantics::PerGap => Budget::PerGap(self.cfg.k),
        };
        let template = self.template("compat");
        let compat = match self.cfg.mode_compat {
            StageMode::Rule => CompatMode::Rule,
            StageMode::Agent => CompatMode::Agent {
                gateway: self.gateway_required("compatibility (--mode-compat agent)")?,
                model_id: &self.cfg.model,
                template: &template,
            },
        };
        Ok(recommend(report, prefs, budget, search, fetch, &compat)?)
    }

    fn summary_for(
        &self,
        vector: &ProficiencyVector,
        report: &GapReport,
        recs: &RecommendationSet,
        prefs: &ExtractedPreferences,
    ) -> Result<StudentSummary, CliError> {
        match self.cfg.mode_summary {
            SummaryMode::Template => Ok(summarize_template(vector, report, recs, prefs)?),
            SummaryMode::Agent => {
                let gateway = self.gateway_required("summary (--mode-summary agent)")?;
                let template = self.template("summarize");
                Ok(summarize_with_agent(
                    vector,
                    report,
                    recs,
                    prefs,
                    gateway,
                    &self.cfg.model,
                    &template,
                )?)
            }
        }
    }

    /// Write the replay store when recording was requested.
    fn finish_recording(&self) -> Result<(), CliError> {
        if let (Some(path), Some(gateway)) = (&self.cfg.record, &self.gateway) {
            record_session(&gateway.transcripts(), path)?;
            println!("recorded {} transcript(s) to {}", gateway.transcripts().len(), path.display());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Output file shapes
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProficiencyFile {
    course_id: String,
    tau: f64,
    bands: crate::proficiency::BandConfig,
    include_exams: bool,
    students: BTreeMap<String, StudentProficiencyOut>,
}

#[derive(Serialize)]
struct StudentProficiencyOut {
    proficiency: Vec<TopicProficiencyOut>,
    gaps: Vec<GapOut>,
}

#[derive(Serialize)]
struct TopicProficiencyOut {
    topic: String,
    /// Six decimal places, fixed format.
    rho: String,
    band: Band,
    evidence_count: usize,
}

#[derive(Serialize)]
struct GapOut {
    topic: String,
    rho: String,
    rank: usize,
}

fn rho6(rho: f64) -> String {
    format!("{rho:.6}")
}

#[derive(Serialize)]
struct RecommendationsFile {
    course_id: String,
    k_requested: usize,
    students: BTreeMap<String, RecommendationSet>,
}

#[derive(Serialize)]
struct MetricsFile {
    #[serde(flatten)]
    report: MetricsReport,
    skipped_pairs: Vec<SkippedPair>,
}

fn proficiency_file(ctx: &Context) -> Result<ProficiencyFile, CliError> {
    let mut students = BTreeMap::new();
    for student in &ctx.dataset.students {
        let (vector, gaps) = ctx.vector_and_gaps(student)?;
        students.insert(
            student.to_string(),
            StudentProficiencyOut {
                proficiency: vector
                    .entries
                    .values()
                    .map(|p| TopicProficiencyOut {
                        topic: p.topic.clone(),
                        rho: rho6(p.rho),
                        band: p.band,
                        evidence_count: p.evidence_count,
                    })
                    .collect(),
                gaps: gaps
                    .iter()
                    .map(|g| GapOut {
                        topic: g.topic.clone(),
                        rho: rho6(g.rho),
                        rank: g.rank,
                    })
                    .collect(),
            },
        );
    }
    Ok(ProficiencyFile {
        course_id: ctx.dataset.course_id.clone(),
        tau: ctx.cfg.tau,
        bands: ctx.cfg.bands,
        include_exams: ctx.cfg.include_exams,
        students,
    })
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

pub fn cmd_validate(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(args)?;
    let dataset = load_course(cfg.course_path()?)?;
    println!(
        "course {} valid: {} student(s), {} question(s), {} response(s), {} gradebook row(s), {} survey(s)",
        dataset.course_id,
        dataset.students.len(),
        dataset.questions.len(),
        dataset.responses.len(),
        dataset.gradebook.len(),
        dataset.surveys.len(),
    );
    Ok(())
}

pub fn cmd_proficiency(args: &CommonArgs) -> Result<(), CliError> {
    let ctx = Context::open(args)?;
    let file = proficiency_file(&ctx)?;
    write_json(&ctx.cfg.out.join("proficiency.json"), &file)
}

pub fn cmd_diagnose(args: &CommonArgs) -> Result<(), CliError> {
    let ctx = Context::open(args)?;
    for student in &ctx.dataset.students {
        let (_, gaps) = ctx.vector_and_gaps(student)?;
        let report = ctx.gap_report_for(student, gaps)?;
        write_json(
            &ctx.cfg.out.join(format!("gap_report_{student}.json")),
            &report,
        )?;
    }
    ctx.finish_recording()
}

fn instructor_outcome(dataset: &CourseDataset) -> LabelingOutcome {
    LabelingOutcome {
        set: load_instructor_labels(&dataset.questions),
        failures: Vec::<LabelFailure>::new(),
    }
}

fn model_labels(ctx: &Context) -> Option<LabelingOutcome> {
    let gateway = ctx.gateway.as_ref()?;
    let template = ctx.template("label");
    Some(label_bank(
        &ctx.dataset.questions,
        gateway,
        &ctx.cfg.model,
        &template,
    ))
}

pub fn cmd_label(args: &CommonArgs) -> Result<(), CliError> {
    let ctx = Context::open(args)?;
    let instructor = instructor_outcome(&ctx.dataset);
    write_json(&ctx.cfg.out.join("labels_instructor.json"), &instructor)?;

    match model_labels(&ctx) {
        Some(outcome) => {
            let stem = outcome.set.source.file_stem();
            write_json(&ctx.cfg.out.join(format!("labels_{stem}.json")), &outcome)?;
        }
        None => {
            println!("no chat backend configured; skipping model labels");
        }
    }
    ctx.finish_recording()
}

pub fn cmd_recommend(args: &CommonArgs) -> Result<(), CliError> {
    let ctx = Context::open(args)?;
    let (search, fetch) = ctx.search_backends()?;
    let mut students = BTreeMap::new();
    for student in &ctx.dataset.students {
        let (_, gaps) = ctx.vector_and_gaps(student)?;
        let report = ctx.gap_report_for(student, gaps)?;
        let prefs = ctx.prefs_for(student);
        let recs = ctx.recommendations_for(&report, &prefs, search.as_ref(), fetch.as_ref())?;
        students.insert(student.to_string(), recs);
    }
    let file = RecommendationsFile {
        course_id: ctx.dataset.course_id.clone(),
        k_requested: ctx.cfg.k,
        students,
    };
    write_json(&ctx.cfg.out.join("recommendations.json"), &file)?;
    ctx.finish_recording()
}

pub fn cmd_summarize(args: &CommonArgs) -> Result<(), CliError> {
    let ctx = Context::open(args)?;
    let (search, fetch) = ctx.search_backends()?;
    for student in &ctx.dataset.students {
        let (vector, gaps) = ctx.vector_and_gaps(student)?;
        let report = ctx.gap_report_for(student, gaps)?;
        let prefs = ctx.prefs_for(student);
        let recs = ctx.recommendations_for(&report, &prefs, search.as_ref(), fetch.as_ref())?;
        let summary = ctx.summary_for(&vector, &report, &recs, &prefs)?;
        let path = ctx.cfg.out.join(format!("summary_{student}.md"));
        fs::write(&path, summary.to_markdown())?;
        println!("wrote {}", path.display());
    }
    ctx.finish_recording()
}

fn predictions(ctx: &Context) -> Result<BTreeMap<StudentId, BTreeMap<String, Band>>, CliError> {
    let mut map = BTreeMap::new();
    for student in &ctx.dataset.students {
        let (vector, _) = ctx.vector_and_gaps(student)?;
        map.insert(
            student.clone(),
            vector
                .entries
                .values()
                .map(|p| (p.topic.clone(), p.band))
                .collect(),
        );
    }
    Ok(map)
}

fn evaluate_into(ctx: &Context, model_outcome: Option<&LabelingOutcome>) -> Result<(), CliError> {
    let truth = derive_ground_truth(&ctx.dataset, &ctx.cfg.bands)?;
    let (matrix, skipped) = confusion(&predictions(ctx)?, &truth)?;
    let file = MetricsFile {
        report: metrics(&matrix),
        skipped_pairs: skipped,
    };
    write_json(&ctx.cfg.out.join("metrics.json"), &file)?;

    let instructor = load_instructor_labels(&ctx.dataset.questions);
    let chart = emit_chart_data(&ctx.dataset, &instructor);
    let chart_path = ctx.cfg.out.join("chart_topic_difficulty.csv");
    fs::write(&chart_path, chart)?;
    println!("wrote {}", chart_path.display());

    if let Some(outcome) = model_outcome {
        match compare_label_sets(&instructor, &outcome.set) {
            Ok(report) => {
                write_json(&ctx.cfg.out.join("label_comparison.json"), &report)?;
            }
            Err(e) => println!("skipping label_comparison.json: {e}"),
        }
    } else {
        println!("no model label set; skipping label_comparison.json");
    }
    Ok(())
}

pub fn cmd_evaluate(args: &CommonArgs) -> Result<(), CliError> {
    let ctx = Context::open(args)?;
    let model_outcome = model_labels(&ctx);
    evaluate_into(&ctx, model_outcome.as_ref())?;
    ctx.finish_recording()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    seed: u64,
    students: usize,
    topics: usize,
    questions_per_topic: usize,
    exam_questions_per_topic: usize,
    noise: f64,
    difficulty_mix: Option<&str>,
    exclude_center: Option<f64>,
    exclude_margin: f64,
    out: &Path,
) -> Result<(), CliError> {
    let mix = match difficulty_mix {
        None => DifficultyMix::default(),
        Some(raw) => {
            let parts: Vec<f64> = raw
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| {
                    CliError::Usage(format!(
                        "--difficulty-mix expects easy:medium:hard numbers, got {raw:?}"
                    ))
                })?;
            if parts.len() != 3 {
                return Err(CliError::Usage(
                    "--difficulty-mix expects exactly three proportions".to_string(),
                ));
            }
            DifficultyMix {
                easy: parts[0],
                medium: parts[1],
                hard: parts[2],
            }
        }
    };
    let config = SimConfig {
        seed,
        n_students: students,
        n_topics: topics,
        questions_per_topic,
        noise,
        exam_questions_per_topic,
        difficulty_mix: mix,
        mastery_exclusion: exclude_center.map(|center| MasteryExclusion {
            center,
            margin: exclude_margin,
        }),
    };
    let (dataset, latents) = generate_cohort(&config)?;
    save_course(&dataset, out)?;
    let latents_path = out.join("latents.json");
    let json = serde_json::to_string_pretty(&latents)
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))?;
    fs::write(&latents_path, json + "\n")?;
    println!(
        "wrote course bundle for {} student(s) x {} topic(s) to {}",
        students,
        topics,
        out.display()
    );
    Ok(())
}

pub fn cmd_pipeline(args: &CommonArgs) -> Result<(), CliError> {
    let ctx = Context::open(args)?;

    // validate happened implicitly in Context::open (load_course).
    println!("validate: course {} ok", ctx.dataset.course_id);

    // proficiency
    let file = proficiency_file(&ctx)?;
    write_json(&ctx.cfg.out.join("proficiency.json"), &file)?;

    // diagnose
    let mut reports: BTreeMap<StudentId, GapReport> = BTreeMap::new();
    for student in &ctx.dataset.students {
        let (_, gaps) = ctx.vector_and_gaps(student)?;
        let report = ctx.gap_report_for(student, gaps)?;
        write_json(
            &ctx.cfg.out.join(format!("gap_report_{student}.json")),
            &report,
        )?;
        reports.insert(student.clone(), report);
    }

    // label
    let instructor = instructor_outcome(&ctx.dataset);
    write_json(&ctx.cfg.out.join("labels_instructor.json"), &instructor)?;
    let model_outcome = model_labels(&ctx);
    if let Some(outcome) = &model_outcome {
        let stem = outcome.set.source.file_stem();
        write_json(&ctx.cfg.out.join(format!("labels_{stem}.json")), outcome)?;
    } else {
        println!("no chat backend configured; skipping model labels");
    }

    // recommend
    let (search, fetch) = ctx.search_backends()?;
    let mut all_recs: BTreeMap<String, RecommendationSet> = BTreeMap::new();
    let mut recs_by_student: BTreeMap<StudentId, RecommendationSet> = BTreeMap::new();
    for student in &ctx.dataset.students {
        let report = &reports[student];
        let prefs = ctx.prefs_for(student);
        let recs = ctx.recommendations_for(report, &prefs, search.as_ref(), fetch.as_ref())?;
        all_recs.insert(student.to_string(), recs.clone());
        recs_by_student.insert(student.clone(), recs);
    }
    write_json(
        &ctx.cfg.out.join("recommendations.json"),
        &RecommendationsFile {
            course_id: ctx.dataset.course_id.clone(),
            k_requested: ctx.cfg.k,
            students: all_recs,
        },
    )?;

    // summarize
    for student in &ctx.dataset.students {
        let (vector, _) = ctx.vector_and_gaps(student)?;
        let prefs = ctx.prefs_for(student);
        let summary = ctx.summary_for(
            &vector,
            &reports[student],
            &recs_by_student[student],
            &prefs,
        )?;
        let path = ctx.cfg.out.join(format!("summary_{student}.md"));
        fs::write(&path, summary.to_markdown())?;
        println!("wrote {}", path.display());
    }

    // evaluate
    evaluate_into(&ctx, model_outcome.as_ref())?;

    ctx.finish_recording()?;
    println!("pipeline complete: artifacts in {}", ctx.cfg.out.display());
    Ok(())
}
