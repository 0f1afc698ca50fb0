//! Preference-aware resource recommendation.
//!
//! For each skill gap, most severe first: build a search query from the
//! topic, diagnosis keyphrases, and the student's top modality; retrieve
//! candidates; fetch each candidate in backend order, skipping broken links
//! and duplicate URLs; keep the ones compatible with the student's
//! preferences until the budget is exhausted. By default the budget K is
//! global across all gaps (both loops stop the moment it fills); a per-gap
//! budget is available behind a flag.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{Modality, StudentId};
use crate::diagnosis::{ConceptDiagnosis, ExtractedPreferences, GapReport};
use crate::gateway::{AgentGateway, AgentRequest, GatewayError, PromptTemplate};
use crate::proficiency::SkillGapEntry;
use crate::prompts;

/// Environment variable naming the live search endpoint.
pub const ENV_SEARCH_URL: &str = "ALIGN_SEARCH_URL";
/// Environment variable holding the live search API key.
pub const ENV_SEARCH_KEY: &str = "ALIGN_SEARCH_KEY";

/// Search backends return at most this many candidates per query.
pub const MAX_RESULTS_PER_QUERY: usize = 10;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("search backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("search fixtures have no entry for query {0:?}")]
    FixtureMiss(String),
    #[error("broken link {url}: {reason}")]
    BrokenLink { url: String, reason: String },
    #[error("resource budget K must be >= 1, got {0}")]
    InvalidK(usize),
    #[error("compatibility reply violated the yes/no contract after one reprompt: {0:?}")]
    UnparseableVerdict(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture is not valid JSON: {0}")]
    Fixture(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub gap_topic: String,
    pub text: String,
    pub preferred_modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub url: String,
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    VideoPage,
    Article,
    Pdf,
    Interactive,
}

impl MediaKind {
    pub fn name(&self) -> &'static str {
        match self {
            MediaKind::VideoPage => "video_page",
            MediaKind::Article => "article",
            MediaKind::Pdf => "pdf",
            MediaKind::Interactive => "interactive",
        }
    }

    /// The resource modality this media kind delivers.
    pub fn modality(&self) -> Modality {
        match self {
            MediaKind::VideoPage => Modality::Video,
            MediaKind::Article | MediaKind::Pdf => Modality::TextPdf,
            MediaKind::Interactive => Modality::Interactive,
        }
    }

    /// Preference modalities this media kind can satisfy. Interactive
    /// content also serves hands-on learners.
    pub fn satisfies(&self, modality: Modality) -> bool {
        match self {
            MediaKind::Interactive => {
                modality == Modality::Interactive || modality == Modality::HandsOn
            }
            other => other.modality() == modality,
        }
    }
}

/// Fetched page content, truncated to the first 4000 characters of
/// extracted text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceContent {
    pub url: String,
    pub media_kind: MediaKind,
    pub text_excerpt: String,
    pub http_status: u16,
}

pub const EXCERPT_LIMIT: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub url: String,
    pub title: String,
    pub topic: String,
    pub modality: Modality,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSet {
    pub student: StudentId,
    pub resources: Vec<Resource>,
    pub k_requested: usize,
}

pub trait SearchBackend: Send + Sync {
    fn search(&self, query: &SearchQuery) -> Result<Vec<SearchResult>, RecommendError>;
}

pub trait FetchBackend: Send + Sync {
    fn fetch(&self, url: &str) -> Result<ResourceContent, RecommendError>;
}

fn modality_keyword(modality: Modality) -> &'static str {
    match modality {
        Modality::Video => "video tutorial",
        Modality::TextPdf => "written article",
        Modality::Interactive => "interactive tutorial",
        Modality::HandsOn => "hands-on exercises",
    }
}

/// Compress one diagnosis statement to a short query phrase: the first
/// clause, capped at eight words.
fn keyphrase(statement: &str) -> String {
    let clause = statement
        .split(['.', ';', ':'])
        .next()
        .unwrap_or(statement);
    clause
        .split_whitespace()
        .take(8)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Build the search query for one gap: topic, up to two diagnosis
/// keyphrases, and the keyword for the student's top-ranked modality.
pub fn construct_query(
    gap: &SkillGapEntry,
    prefs: &ExtractedPreferences,
    diagnosis: &ConceptDiagnosis,
) -> SearchQuery {
    let preferred_modality = prefs
        .ranked_modalities
        .first()
        .copied()
        .unwrap_or(Modality::Video);
    let mut parts = vec![gap.topic.clone()];
    parts.extend(
        diagnosis
            .statements
            .iter()
            .take(2)
            .map(|s| keyphrase(s))
            .filter(|p| !p.is_empty()),
    );
    parts.push(modality_keyword(preferred_modality).to_string());
    SearchQuery {
        gap_topic: gap.topic.clone(),
        text: parts.join(" "),
        preferred_modality,
    }
}

/// Infer the media kind from the content type and URL shape. PDF beats
/// video beats interactive; HTML defaults to article.
pub fn infer_media_kind(url: &str, content_type: &str) -> MediaKind {
    let ct = content_type.to_lowercase();
    let lower = url.to_lowercase();
    let path_ends_pdf = url::Url::parse(url)
        .map(|u| u.path().to_lowercase().ends_with(".pdf"))
        .unwrap_or_else(|_| lower.ends_with(".pdf"));
    if ct.contains("pdf") || path_ends_pdf {
        return MediaKind::Pdf;
    }
    if ct.starts_with("video/")
        || ["youtube.com", "youtu.be", "vimeo.com"]
            .iter()
            .any(|host| lower.contains(host))
    {
        return MediaKind::VideoPage;
    }
    if lower.contains("interactive") || lower.contains("visualgo") || lower.contains("playground")
    {
        return MediaKind::Interactive;
    }
    MediaKind::Article
}

/// Strip tags and collapse whitespace to get indexable text from HTML.
pub fn extract_text(body: &str, content_type: &str) -> String {
    let text = if content_type.to_lowercase().contains("html") {
        let no_scripts = regex::Regex::new(r"(?is)<(script|style)\b.*?</(script|style)>")
            .unwrap()
            .replace_all(body, " ");
        let no_tags = regex::Regex::new(r"(?s)<[^>]*>")
            .unwrap()
            .replace_all(&no_scripts, " ")
            .into_owned();
        no_tags
    } else {
        body.to_string()
    };
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.chars().take(EXCERPT_LIMIT).collect()
}

fn content_from_page(
    url: &str,
    status: u16,
    content_type: &str,
    body: &str,
) -> Result<ResourceContent, RecommendError> {
    if !(200..=299).contains(&status) {
        return Err(RecommendError::BrokenLink {
            url: url.to_string(),
            reason: format!("HTTP {status}"),
        });
    }
    let media_kind = infer_media_kind(url, content_type);
    let text_excerpt = extract_text(body, content_type);
    Ok(ResourceContent {
        url: url.to_string(),
        media_kind,
        text_excerpt,
        http_status: status,
    })
}

// ---------------------------------------------------------------------------
// Fixture backends
// ---------------------------------------------------------------------------

/// Search fixtures: a JSON object mapping query text to a result array.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchFixtures {
    pub queries: BTreeMap<String, Vec<SearchResult>>,
}

impl SearchFixtures {
    pub fn load(path: &std::path::Path) -> Result<Self, RecommendError> {
        let raw = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&raw)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), RecommendError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

impl SearchBackend for SearchFixtures {
    fn search(&self, query: &SearchQuery) -> Result<Vec<SearchResult>, RecommendError> {
        let results = self
            .queries
            .get(&query.text)
            .ok_or_else(|| RecommendError::FixtureMiss(query.text.clone()))?;
        Ok(results.iter().take(MAX_RESULTS_PER_QUERY).cloned().collect())
    }
}

/// One recorded page under `fixtures/pages/`, keyed by the SHA-256 of its
/// URL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageFixture {
    pub url: String,
    pub status: u16,
    pub content_type: String,
    pub body: String,
}

pub fn url_digest(url: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(url.as_bytes());
    hex::encode(hasher.finalize())
}

/// Fetch backend reading recorded pages from a directory. A missing fixture
/// counts as a failed connection, i.e. a broken link.
pub struct FixturePages {
    dir: std::path::PathBuf,
}

impl FixturePages {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Self {
        FixturePages { dir: dir.into() }
    }

    pub fn store(&self, fixture: &PageFixture) -> Result<(), RecommendError> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(format!("{}.json", url_digest(&fixture.url)));
        std::fs::write(path, serde_json::to_string_pretty(fixture)? + "\n")?;
        Ok(())
    }
}

impl FetchBackend for FixturePages {
    fn fetch(&self, url: &str) -> Result<ResourceContent, RecommendError> {
        let path = self.dir.join(format!("{}.json", url_digest(url)));
        let raw = std::fs::read_to_string(&path).map_err(|e| RecommendError::BrokenLink {
            url: url.to_string(),
            reason: format!("no recorded page ({e})"),
        })?;
        let fixture: PageFixture = serde_json::from_str(&raw)?;
        content_from_page(url, fixture.status, &fixture.content_type, &fixture.body)
    }
}

// ---------------------------------------------------------------------------
// Live backends
// ---------------------------------------------------------------------------

/// Live search adapter: GET `<ALIGN_SEARCH_URL>?q=<query>` with a bearer
/// key, expecting a JSON array of `{url, title, snippet}` objects.
pub struct LiveSearch {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl LiveSearch {
    pub fn from_env() -> Result<Self, RecommendError> {
        let endpoint = std::env::var(ENV_SEARCH_URL).map_err(|_| {
            RecommendError::BackendUnavailable(format!("{ENV_SEARCH_URL} not set"))
        })?;
        let api_key = std::env::var(ENV_SEARCH_KEY).map_err(|_| {
            RecommendError::BackendUnavailable(format!("{ENV_SEARCH_KEY} not set"))
        })?;
        Ok(LiveSearch {
            endpoint,
            api_key,
            client: reqwest::blocking::Client::new(),
        })
    }
}

impl SearchBackend for LiveSearch {
    fn search(&self, query: &SearchQuery) -> Result<Vec<SearchResult>, RecommendError> {
        let mut endpoint = url::Url::parse(&self.endpoint)
            .map_err(|e| RecommendError::BackendUnavailable(e.to_string()))?;
        endpoint.query_pairs_mut().append_pair("q", &query.text);
        let response = self
            .client
            .get(endpoint.as_str())
            .bearer_auth(&self.api_key)
            .send()
            .map_err(|e| RecommendError::BackendUnavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(RecommendError::BackendUnavailable(format!(
                "search endpoint returned HTTP {}",
                response.status()
            )));
        }
        let results: Vec<SearchResult> = response
            .json()
            .map_err(|e| RecommendError::BackendUnavailable(e.to_string()))?;
        Ok(results.into_iter().take(MAX_RESULTS_PER_QUERY).collect())
    }
}

/// Live page fetcher.
pub struct LiveFetch {
    client: reqwest::blocking::Client,
}

impl LiveFetch {
    pub fn new() -> Self {
        LiveFetch {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for LiveFetch {
    fn default() -> Self {
        Self::new()
    }
}

impl FetchBackend for LiveFetch {
    fn fetch(&self, url: &str) -> Result<ResourceContent, RecommendError> {
        let response = self.client.get(url).send().map_err(|e| {
            RecommendError::BrokenLink {
                url: url.to_string(),
                reason: e.to_string(),
            }
        })?;
        let status = response.status().as_u16();
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        let body = response.text().unwrap_or_default();
        content_from_page(url, status, &content_type, &body)
    }
}

// ---------------------------------------------------------------------------
// Compatibility and the selection loop
// ---------------------------------------------------------------------------

/// How compatibility verdicts are produced.
pub enum CompatMode<'a> {
    /// Deterministic rule: the media kind must satisfy one of the student's
    /// top-2 modalities AND the topic or a diagnosis keyphrase must occur in
    /// the title or excerpt (case-insensitively).
    Rule,
    /// Model verdict per the yes/no prompt contract.
    Agent {
        gateway: &'a AgentGateway,
        model_id: &'a str,
        template: &'a PromptTemplate,
    },
}

/// Decide whether one fetched candidate suits the student.
pub fn check_compatibility(
    candidate: &SearchResult,
    content: &ResourceContent,
    prefs: &ExtractedPreferences,
    gap: &SkillGapEntry,
    diagnosis: &ConceptDiagnosis,
    mode: &CompatMode<'_>,
) -> Result<(bool, String), RecommendError> {
    match mode {
        CompatMode::Rule => Ok(rule_compatibility(candidate, content, prefs, gap, diagnosis)),
        CompatMode::Agent {
            gateway,
            model_id,
            template,
        } => agent_compatibility(
            candidate, content, prefs, gap, diagnosis, gateway, model_id, template,
        ),
    }
}

fn rule_compatibility(
    candidate: &SearchResult,
    content: &ResourceContent,
    prefs: &ExtractedPreferences,
    gap: &SkillGapEntry,
    diagnosis: &ConceptDiagnosis,
) -> (bool, String) {
    let top2 = prefs.top_modalities(2);
    let modality_ok = top2.iter().any(|m| content.media_kind.satisfies(*m));
    if !modality_ok {
        return (
            false,
            format!(
                "{} content does not match the student's top modalities ({})",
                content.media_kind.name(),
                top2.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
            ),
        );
    }

    let haystack = format!("{} {}", candidate.title, content.text_excerpt).to_lowercase();
    let topic_hit = haystack.contains(&gap.topic.to_lowercase());
    let keyphrase_hit = diagnosis
        .statements
        .iter()
        .map(|s| keyphrase(s).to_lowercase())
        .any(|p| !p.is_empty() && haystack.contains(&p));
    if !topic_hit && !keyphrase_hit {
        return (false, "topic not evidenced in title or content".to_string());
    }

    let grounds = if topic_hit {
        format!("covers {}", gap.topic)
    } else {
        "matches the diagnosed difficulty".to_string()
    };
    (
        true,
        format!(
            "{} fits preferred modalities and {grounds}",
            content.media_kind.name()
        ),
    )
}

fn parse_verdict(reply: &str) -> Option<(bool, String)> {
    let trimmed = reply.trim();
    let lower = trimmed.to_lowercase();
    for (prefix, accepted) in [("yes", true), ("no", false)] {
        if lower.starts_with(prefix) {
            let rest = trimmed[prefix.len()..]
                .trim_start_matches([':', '.', ',', '-', ' '])
                .trim()
                .to_string();
            let rationale = if rest.is_empty() {
                format!("model verdict: {prefix}")
            } else {
                rest
            };
            return Some((accepted, rationale));
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn agent_compatibility(
    candidate: &SearchResult,
    content: &ResourceContent,
    prefs: &ExtractedPreferences,
    gap: &SkillGapEntry,
    diagnosis: &ConceptDiagnosis,
    gateway: &AgentGateway,
    model_id: &str,
    template: &PromptTemplate,
) -> Result<(bool, String), RecommendError> {
    let bindings = BTreeMap::from([
        (
            "modalities".to_string(),
            prefs
                .ranked_modalities
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("topic".to_string(), gap.topic.clone()),
        ("diagnosis".to_string(), diagnosis.statements.join(" ")),
        ("title".to_string(), candidate.title.clone()),
        ("url".to_string(), candidate.url.clone()),
        ("media_kind".to_string(), content.media_kind.name().to_string()),
        ("excerpt".to_string(), content.text_excerpt.clone()),
    ]);
    let rendered = template.render(&bindings)?;
    let request = AgentRequest::new(model_id, prompts::SYSTEM_COMPAT, rendered.text.clone());
    let reply = gateway.complete(&request)?;
    if let Some(verdict) = parse_verdict(&reply.text) {
        return Ok(verdict);
    }

    let retry = AgentRequest::new(
        model_id,
        prompts::SYSTEM_COMPAT,
        format!(
            "{}\n\nYour previous reply did not start with yes or no. Reply again in the required format.",
            rendered.text
        ),
    );
    let reply = gateway.complete(&retry)?;
    parse_verdict(&reply.text).ok_or(RecommendError::UnparseableVerdict(reply.text))
}

/// Budget semantics for the selection loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// K total resources across all gaps (the default reading).
    Global(usize),
    /// Up to K resources for every gap.
    PerGap(usize),
}

impl Budget {
    fn k(&self) -> usize {
        match self {
            Budget::Global(k) | Budget::PerGap(k) => *k,
        }
    }
}

fn dedup_key(url: &str) -> String {
    match url::Url::parse(url) {
        Ok(mut u) => {
            u.set_fragment(None);
            u.to_string()
        }
        Err(_) => url.to_string(),
    }
}

/// Run the selection loop over a diagnosed gap report.
///
/// Gaps are visited in report order (ascending proficiency, most severe
/// first); candidates within a gap in search order. Broken links are
/// skipped and never recommended; URLs already accepted for an earlier gap
/// are skipped. With a global budget, both loops stop as soon as K
/// resources are accepted, so later candidates are never fetched.
pub fn recommend(
    report: &GapReport,
    prefs: &ExtractedPreferences,
    budget: Budget,
    search: &dyn SearchBackend,
    fetch: &dyn FetchBackend,
    compat: &CompatMode<'_>,
) -> Result<RecommendationSet, RecommendError> {
    if budget.k() == 0 {
        return Err(RecommendError::InvalidK(0));
    }

    let mut resources: Vec<Resource> = Vec::new();
    let mut seen_urls: BTreeSet<String> = BTreeSet::new();

    'gaps: for gap in &report.gaps {
        let mut accepted_for_gap = 0usize;
        let query = construct_query(&gap.entry, prefs, &gap.diagnosis);
        let candidates = search.search(&query)?;
        for candidate in candidates {
            if seen_urls.contains(&dedup_key(&candidate.url)) {
                continue;
            }
            let content = match fetch.fetch(&candidate.url) {
                Ok(content) => content,
                Err(RecommendError::BrokenLink { .. }) => continue,
                Err(other) => return Err(other),
            };
            let (accepted, rationale) = check_compatibility(
                &candidate,
                &content,
                prefs,
                &gap.entry,
                &gap.diagnosis,
                compat,
            )?;
            if !accepted {
                continue;
            }
            seen_urls.insert(dedup_key(&candidate.url));
            resources.push(Resource {
                url: candidate.url,
                title: candidate.title,
                topic: gap.entry.topic.clone(),
                modality: content.media_kind.modality(),
                rationale,
            });
            accepted_for_gap += 1;
            match budget {
                Budget::Global(k) => {
                    if resources.len() == k {
                        break 'gaps;
                    }
                }
                Budget::PerGap(k) => {
                    if accepted_for_gap == k {
                        break;
                    }
                }
            }
        }
    }

    Ok(RecommendationSet {
        student: report.student.clone(),
        resources,
        k_requested: budget.k(),
    })
}
