//! Five-section student summaries.
//!
//! Template mode fills the sections deterministically from the structured
//! data, so the whole pipeline has a zero-model path. Agent mode asks the
//! gateway for the same five sections and parses them back out, with one
//! reprompt before failing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Pacing, StudentId};
use crate::diagnosis::{ExtractedPreferences, GapReport};
use crate::gateway::{AgentGateway, AgentRequest, GatewayError, PromptTemplate};
use crate::proficiency::{Band, ProficiencyVector};
use crate::prompts;
use crate::recommender::RecommendationSet;

pub const SECTION_KEYS: [&str; 5] = [
    "overall_trends",
    "topic_insights",
    "concept_gaps",
    "actionable_guidance",
    "motivational_support",
];

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("summary reply is missing section {0:?} after one reprompt")]
    MissingSection(String),
    #[error("inputs belong to different students: {a} vs {b}")]
    StudentMismatch { a: StudentId, b: StudentId },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A complete summary: all five sections present and non-empty, in fixed
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentSummary {
    pub student: StudentId,
    pub overall_trends: String,
    pub topic_insights: String,
    pub concept_gaps: String,
    pub actionable_guidance: String,
    pub motivational_support: String,
}

impl StudentSummary {
    pub fn sections(&self) -> [(&'static str, &str); 5] {
        [
            ("overall_trends", self.overall_trends.as_str()),
            ("topic_insights", self.topic_insights.as_str()),
            ("concept_gaps", self.concept_gaps.as_str()),
            ("actionable_guidance", self.actionable_guidance.as_str()),
            ("motivational_support", self.motivational_support.as_str()),
        ]
    }

    /// Render to the `summary_<student>.md` plain-text format.
    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Learning summary for {}\n", self.student);
        for (key, text) in self.sections() {
            out.push_str(&format!("\n## {key}\n\n{text}\n"));
        }
        out
    }
}

fn check_same_student(a: &StudentId, b: &StudentId) -> Result<(), SummaryError> {
    if a != b {
        return Err(SummaryError::StudentMismatch {
            a: a.clone(),
            b: b.clone(),
        });
    }
    Ok(())
}

fn percent(rho: f64) -> String {
    format!("{:.0}%", rho * 100.0)
}

/// Deterministic template-mode summary.
pub fn summarize_template(
    vector: &ProficiencyVector,
    report: &GapReport,
    recs: &RecommendationSet,
    prefs: &ExtractedPreferences,
) -> Result<StudentSummary, SummaryError> {
    check_same_student(&report.student, &recs.student)?;
    check_same_student(&report.student, &prefs.student)?;
    check_same_student(&report.student, &vector.student)?;

    let with_evidence: Vec<_> = vector
        .entries
        .values()
        .filter(|p| p.evidence_count > 0)
        .collect();
    let band_count = |band: Band| with_evidence.iter().filter(|p| p.band == band).count();
    let highs: Vec<&str> = with_evidence
        .iter()
        .filter(|p| p.band == Band::High)
        .map(|p| p.topic.as_str())
        .collect();

    let overall_trends = if with_evidence.is_empty() {
        "No assessment evidence is available yet, so no performance trend can be described."
            .to_string()
    } else {
        let mean =
            with_evidence.iter().map(|p| p.rho).sum::<f64>() / with_evidence.len() as f64;
        let strongest = if highs.is_empty() {
            String::new()
        } else {
            format!(" Strongest work so far: {}.", highs.join(", "))
        };
        format!(
            "Across {} assessed topic(s) the average proficiency is {} ({} high, {} medium, {} low).{}",
            with_evidence.len(),
            percent(mean),
            band_count(Band::High),
            band_count(Band::Medium),
            band_count(Band::Low),
            strongest
        )
    };

    let topic_insights = if with_evidence.is_empty() {
        "No topics have assessment evidence yet.".to_string()
    } else {
        with_evidence
            .iter()
            .map(|p| {
                format!(
                    "- {}: {} ({}, {} item(s))",
                    p.topic,
                    percent(p.rho),
                    p.band,
                    p.evidence_count
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    };

    let concept_gaps = if report.gaps.is_empty() {
        format!(
            "No skill gaps detected: every assessed topic is at or above the {} mastery threshold.",
            percent(report.tau_used)
        )
    } else {
        report
            .gaps
            .iter()
            .map(|gap| {
                format!(
                    "- {} ({}): {}",
                    gap.entry.topic,
                    percent(gap.entry.rho),
                    gap.diagnosis.statements.join(" ")
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    };

    let actionable_guidance = if recs.resources.is_empty() {
        if report.gaps.is_empty() {
            "Keep up the current study routine and continue practicing ahead of each new topic."
                .to_string()
        } else {
            "No compatible resources were found this cycle; revisit the course materials for the topics listed above.".to_string()
        }
    } else {
        let lines: Vec<String> = recs
            .resources
            .iter()
            .map(|r| format!("- For {}: \"{}\" ({})", r.topic, r.title, r.url))
            .collect();
        format!(
            "Work through these in order; they target the most severe gaps first:\n{}",
            lines.join("\n")
        )
    };

    let motivational_support = if report.gaps.is_empty() {
        "Excellent progress - the evidence shows solid mastery. Stay curious and keep stretching into new material.".to_string()
    } else {
        format!(
            "The {} area(s) above are specific and fixable. Focused practice there, in the format you prefer ({}), tends to pay off quickly - progress will show in the next assessment cycle.",
            report.gaps.len(),
            prefs
                .ranked_modalities
                .first()
                .map(|m| m.name())
                .unwrap_or("any"),
        )
    };

    Ok(StudentSummary {
        student: report.student.clone(),
        overall_trends,
        topic_insights,
        concept_gaps,
        actionable_guidance,
        motivational_support,
    })
}

fn summary_bindings(
    vector: &ProficiencyVector,
    report: &GapReport,
    recs: &RecommendationSet,
    prefs: &ExtractedPreferences,
) -> BTreeMap<String, String> {
    let proficiency = vector
        .entries
        .values()
        .map(|p| {
            format!(
                "- {}: {:.2} ({}, {} item(s))",
                p.topic, p.rho, p.band, p.evidence_count
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let gaps = if report.gaps.is_empty() {
        "(none)".to_string()
    } else {
        report
            .gaps
            .iter()
            .map(|g| {
                format!(
                    "- rank {}: {} ({:.2}) - {}",
                    g.entry.rank,
                    g.entry.topic,
                    g.entry.rho,
                    g.diagnosis.statements.join(" ")
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let resources = if recs.resources.is_empty() {
        "(none)".to_string()
    } else {
        recs.resources
            .iter()
            .map(|r| format!("- {} | {} | {}", r.topic, r.title, r.url))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let preferences = format!(
        "pacing: {}; modalities most preferred first: {}; feedback: {}; notes: {}",
        match prefs.pacing {
            Pacing::SelfPaced => "self-paced",
            Pacing::InstructorPaced => "instructor-paced",
        },
        prefs
            .ranked_modalities
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(", "),
        prefs.feedback_style,
        if prefs.notes.is_empty() { "(none)" } else { &prefs.notes },
    );
    BTreeMap::from([
        ("student".to_string(), report.student.to_string()),
        ("proficiency".to_string(), proficiency),
        ("gaps".to_string(), gaps),
        ("resources".to_string(), resources),
        ("preferences".to_string(), preferences),
    ])
}

/// Split an agent reply into the five labeled sections. Every section must
/// be present (as a `## key` heading) and non-empty; when resources exist,
/// actionable_guidance must cite at least one of their URLs.
fn parse_summary_reply(
    reply: &str,
    student: &StudentId,
    recs: &RecommendationSet,
) -> Result<StudentSummary, String> {
    let mut sections: BTreeMap<&'static str, String> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    let mut buffer = String::new();

    let flush =
        |current: &Option<&'static str>, buffer: &mut String, sections: &mut BTreeMap<&'static str, String>| {
            if let Some(key) = current {
                sections.insert(key, buffer.trim().to_string());
            }
            buffer.clear();
        };

    for line in reply.lines() {
        // A header is a line that is exactly one of the keys, with or
        // without leading markdown hashes.
        let header = line.trim().trim_start_matches('#').trim();
        if let Some(key) = SECTION_KEYS.iter().find(|k| header.eq_ignore_ascii_case(k)) {
            flush(&current, &mut buffer, &mut sections);
            current = Some(key);
            continue;
        }
        if current.is_some() {
            buffer.push_str(line);
            buffer.push('\n');
        }
    }
    flush(&current, &mut buffer, &mut sections);

    for key in SECTION_KEYS {
        match sections.get(key) {
            Some(text) if !text.is_empty() => {}
            _ => return Err(format!("missing or empty section {key}")),
        }
    }
    if !recs.resources.is_empty() {
        let guidance = &sections["actionable_guidance"];
        if !recs.resources.iter().any(|r| guidance.contains(&r.url)) {
            return Err("actionable_guidance cites none of the recommended resource URLs".into());
        }
    }

    Ok(StudentSummary {
        student: student.clone(),
        overall_trends: sections.remove("overall_trends").unwrap(),
        topic_insights: sections.remove("topic_insights").unwrap(),
        concept_gaps: sections.remove("concept_gaps").unwrap(),
        actionable_guidance: sections.remove("actionable_guidance").unwrap(),
        motivational_support: sections.remove("motivational_support").unwrap(),
    })
}

/// Agent-mode summary with one reprompt on a malformed reply.
pub fn summarize_with_agent(
    vector: &ProficiencyVector,
    report: &GapReport,
    recs: &RecommendationSet,
    prefs: &ExtractedPreferences,
    gateway: &AgentGateway,
    model_id: &str,
    template: &PromptTemplate,
) -> Result<StudentSummary, SummaryError> {
    check_same_student(&report.student, &recs.student)?;
    check_same_student(&report.student, &prefs.student)?;
    check_same_student(&report.student, &vector.student)?;

    let rendered = template.render(&summary_bindings(vector, report, recs, prefs))?;
    let request = AgentRequest::new(model_id, prompts::SYSTEM_SUMMARIZE, rendered.text.clone());
    let reply = gateway.complete(&request)?;
    let first_error = match parse_summary_reply(&reply.text, &report.student, recs) {
        Ok(summary) => return Ok(summary),
        Err(e) => e,
    };

    let retry = AgentRequest::new(
        model_id,
        prompts::SYSTEM_SUMMARIZE,
        format!(
            "{}\n\nYour previous reply was rejected: {}. Reply again with all five sections.",
            rendered.text, first_error
        ),
    );
    let reply = gateway.complete(&retry)?;
    parse_summary_reply(&reply.text, &report.student, recs).map_err(|e| {
        let missing = SECTION_KEYS
            .iter()
            .find(|k| e.contains(*k))
            .unwrap_or(&"actionable_guidance");
        SummaryError::MissingSection(missing.to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Modality;
    use crate::diagnosis::{ConceptDiagnosis, DiagnosedGap};
    use crate::gateway::ScriptedChat;
    use crate::proficiency::{SkillGapEntry, TopicProficiency};
    use crate::recommender::Resource;

    fn vector(pairs: &[(&str, f64, usize)]) -> ProficiencyVector {
        let bands = crate::proficiency::BandConfig::default();
        ProficiencyVector {
            student: StudentId::from("s1"),
            entries: pairs
                .iter()
                .map(|(t, rho, n)| {
                    (
                        t.to_string(),
                        TopicProficiency {
                            topic: t.to_string(),
                            rho: *rho,
                            band: if *n == 0 { Band::Unknown } else { bands.band_for(*rho) },
                            evidence_count: *n,
                        },
                    )
                })
                .collect(),
        }
    }

    fn report(gaps: &[(&str, f64)]) -> GapReport {
        GapReport {
            student: StudentId::from("s1"),
            gaps: gaps
                .iter()
                .enumerate()
                .map(|(i, (topic, rho))| DiagnosedGap {
                    entry: SkillGapEntry {
                        topic: topic.to_string(),
                        rho: *rho,
                        rank: i + 1,
                    },
                    diagnosis: ConceptDiagnosis::insufficient_evidence(topic),
                })
                .collect(),
            tau_used: 0.7,
            generated_at: chrono::Utc::now(),
        }
    }

    fn recs(urls: &[(&str, &str, &str)]) -> RecommendationSet {
        RecommendationSet {
            student: StudentId::from("s1"),
            resources: urls
                .iter()
                .map(|(topic, title, url)| Resource {
                    url: url.to_string(),
                    title: title.to_string(),
                    topic: topic.to_string(),
                    modality: Modality::Video,
                    rationale: "fits".to_string(),
                })
                .collect(),
            k_requested: 3,
        }
    }

    fn prefs() -> ExtractedPreferences {
        ExtractedPreferences {
            student: StudentId::from("s1"),
            pacing: Pacing::SelfPaced,
            ranked_modalities: vec![
                Modality::Video,
                Modality::TextPdf,
                Modality::Interactive,
                Modality::HandsOn,
            ],
            feedback_style: "detailed".to_string(),
            notes: String::new(),
        }
    }

    #[test]
    fn template_summary_with_no_gaps_has_all_sections() {
        let v = vector(&[("A", 0.9, 3), ("B", 0.85, 2)]);
        let summary =
            summarize_template(&v, &report(&[]), &recs(&[]), &prefs()).unwrap();
        for (_, text) in summary.sections() {
            assert!(!text.is_empty());
        }
        assert!(summary.concept_gaps.contains("No skill gaps detected"));
    }

    #[test]
    fn template_summary_names_every_resource_title() {
        let v = vector(&[("A", 0.4, 3), ("B", 0.5, 2)]);
        let r = recs(&[
            ("A", "Intro to A", "https://x.example/a"),
            ("B", "B Deep Dive", "https://x.example/b"),
        ]);
        let summary =
            summarize_template(&v, &report(&[("A", 0.4), ("B", 0.5)]), &r, &prefs()).unwrap();
        assert!(summary.actionable_guidance.contains("Intro to A"));
        assert!(summary.actionable_guidance.contains("B Deep Dive"));
        assert!(summary.actionable_guidance.contains("https://x.example/a"));
        assert!(summary.concept_gaps.contains("A (40%)"));
    }

    #[test]
    fn summary_grounding_topics_and_urls() {
        let v = vector(&[("A", 0.4, 3)]);
        let r = recs(&[("A", "Intro", "https://x.example/a")]);
        let rep = report(&[("A", 0.4)]);
        let summary = summarize_template(&v, &rep, &r, &prefs()).unwrap();
        // Every topic in concept_gaps comes from the gap report.
        for gap in &rep.gaps {
            assert!(summary.concept_gaps.contains(&gap.entry.topic));
        }
        // Every cited URL is a recommended one.
        assert!(summary.actionable_guidance.contains("https://x.example/a"));
    }

    #[test]
    fn student_mismatch_is_rejected() {
        let v = vector(&[("A", 0.4, 3)]);
        let mut r = recs(&[]);
        r.student = StudentId::from("other");
        assert!(matches!(
            summarize_template(&v, &report(&[]), &r, &prefs()),
            Err(SummaryError::StudentMismatch { .. })
        ));
    }

    #[test]
    fn markdown_rendering_contains_five_headings_in_order() {
        let v = vector(&[("A", 0.9, 1)]);
        let summary = summarize_template(&v, &report(&[]), &recs(&[]), &prefs()).unwrap();
        let md = summary.to_markdown();
        let mut last = 0;
        for key in SECTION_KEYS {
            let pos = md.find(&format!("## {key}")).expect(key);
            assert!(pos > last);
            last = pos;
        }
    }

    fn agent_reply(guidance: &str) -> String {
        format!(
            "## overall_trends\nSteady.\n\
             ## topic_insights\nA is strong.\n\
             ## concept_gaps\nB needs work.\n\
             ## actionable_guidance\n{guidance}\n\
             ## motivational_support\nKeep going.\n"
        )
    }

    #[test]
    fn agent_summary_parses_sections_and_checks_urls() {
        let v = vector(&[("A", 0.9, 1)]);
        let r = recs(&[("A", "Intro", "https://x.example/a")]);
        let gateway = crate::gateway::AgentGateway::new(Box::new(ScriptedChat(
            |_: &crate::gateway::AgentRequest| Ok(agent_reply("Use https://x.example/a first.")),
        )));
        let template = crate::prompts::load("summarize", None);
        let summary =
            summarize_with_agent(&v, &report(&[]), &r, &prefs(), &gateway, "m", &template)
                .unwrap();
        assert_eq!(summary.overall_trends, "Steady.");
        assert!(summary.actionable_guidance.contains("https://x.example/a"));
    }

    #[test]
    fn agent_summary_fails_after_reprompt_when_section_missing() {
        let v = vector(&[("A", 0.9, 1)]);
        let gateway = crate::gateway::AgentGateway::new(Box::new(ScriptedChat(
            |_: &crate::gateway::AgentRequest| {
                Ok("## overall_trends\nonly one section".to_string())
            },
        )));
        let template = crate::prompts::load("summarize", None);
        let err = summarize_with_agent(
            &v,
            &report(&[]),
            &recs(&[]),
            &prefs(),
            &gateway,
            "m",
            &template,
        )
        .unwrap_err();
        assert!(matches!(err, SummaryError::MissingSection(_)));
        assert_eq!(gateway.transcripts().len(), 2);
    }

    #[test]
    fn agent_summary_is_deterministic_under_replay() {
        use crate::gateway::{record_session, AgentGateway, ReplayStore};
        let v = vector(&[("A", 0.5, 2)]);
        let r = recs(&[("A", "Intro", "https://x.example/a")]);
        let template = crate::prompts::load("summarize", None);

        let scripted = AgentGateway::new(Box::new(ScriptedChat(
            |_: &crate::gateway::AgentRequest| Ok(agent_reply("Start at https://x.example/a.")),
        )));
        let first = summarize_with_agent(
            &v, &report(&[("A", 0.5)]), &r, &prefs(), &scripted, "m", &template,
        )
        .unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.json");
        record_session(&scripted.transcripts(), &path).unwrap();

        let replayed = AgentGateway::new(Box::new(ReplayStore::load(&path).unwrap()));
        let second = summarize_with_agent(
            &v, &report(&[("A", 0.5)]), &r, &prefs(), &replayed, "m", &template,
        )
        .unwrap();
        assert_eq!(first, second);
    }
}
