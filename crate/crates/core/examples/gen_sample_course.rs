//! Regenerates the bundled sample course under `sample_course/`: the data
//! files, the search/page fixtures, and the replay store that makes
//! `align pipeline` fully reproducible offline.
//!
//! The replay store is produced by running the real diagnosis and labeling
//! code against a scripted stand-in backend, so recorded digests always
//! match what the pipeline will request. Run after changing prompts,
//! evidence formatting, or the sample data:
//!
//! ```text
//! cargo run -p align-core --example gen_sample_course
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use align_core::data::{
    save_course, validate_dataset, CourseDataset, Difficulty, GradebookEntry, Modality, Pacing,
    PreferenceSurvey, QuestionKind, QuestionResponse, QuizQuestion, StudentId,
};
use align_core::diagnosis::{assemble_evidence, diagnose, extract_preferences};
use align_core::gateway::{record_session, AgentGateway, AgentRequest, GatewayError, ScriptedChat};
use align_core::labeling::label_bank;
use align_core::proficiency::{identify_gaps, vector_for_student, BandConfig};
use align_core::prompts;
use align_core::recommender::{construct_query, FixturePages, PageFixture, SearchFixtures, SearchResult};

const MODEL_ID: &str = "gpt-4o";
const TAU: f64 = 0.70;

fn sid(s: &str) -> StudentId {
    StudentId::from(s)
}

struct QuestionSpec {
    id: &'static str,
    quiz: &'static str,
    topic: &'static str,
    text: &'static str,
    options: &'static [&'static str],
    correct: &'static str,
    tags: &'static [&'static str],
    difficulty: Difficulty,
}

#[rustfmt::skip]
fn question_bank() -> Vec<QuestionSpec> {
    vec![
        // AVL Trees
        QuestionSpec { id: "avl_q1", quiz: "quiz_avl", topic: "AVL Trees",
            text: "After inserting 10, 20, 30 into an empty AVL tree, which rotation restores balance?",
            options: &["Left rotation at 10", "Right rotation at 30", "Left-right rotation", "No rotation needed"],
            correct: "Left rotation at 10", tags: &["rotations", "balance-factor"], difficulty: Difficulty::Medium },
        QuestionSpec { id: "avl_q2", quiz: "quiz_avl", topic: "AVL Trees",
            text: "What is the balance factor of a node with left subtree height 2 and right subtree height 0?",
            options: &["2", "-2", "0", "1"],
            correct: "2", tags: &["balance-factor"], difficulty: Difficulty::Easy },
        QuestionSpec { id: "avl_q3", quiz: "quiz_avl", topic: "AVL Trees",
            text: "Which sequence of insertions forces a right-left double rotation?",
            options: &["30, 10, 20", "10, 20, 30", "10, 30, 20", "20, 10, 30"],
            correct: "10, 30, 20", tags: &["rotations"], difficulty: Difficulty::Hard },
        QuestionSpec { id: "avl_q4", quiz: "quiz_avl", topic: "AVL Trees",
            text: "What is the worst-case height of an AVL tree with n nodes?",
            options: &["O(log n)", "O(n)", "O(sqrt n)", "O(n log n)"],
            correct: "O(log n)", tags: &["balance-factor", "height-bounds"], difficulty: Difficulty::Medium },
        // Graph Traversal
        QuestionSpec { id: "gt_q1", quiz: "quiz_graphs", topic: "Graph Traversal",
            text: "Which data structure drives an iterative breadth-first search?",
            options: &["Queue", "Stack", "Priority queue", "Linked list"],
            correct: "Queue", tags: &["bfs", "frontier-structures"], difficulty: Difficulty::Easy },
        QuestionSpec { id: "gt_q2", quiz: "quiz_graphs", topic: "Graph Traversal",
            text: "In what order does depth-first search visit nodes from A in the graph A-B, A-C, B-D (alphabetical tie-break)?",
            options: &["A, B, D, C", "A, B, C, D", "A, C, B, D", "A, D, B, C"],
            correct: "A, B, D, C", tags: &["dfs", "visit-order"], difficulty: Difficulty::Medium },
        QuestionSpec { id: "gt_q3", quiz: "quiz_graphs", topic: "Graph Traversal",
            text: "Which traversal finds shortest paths in an unweighted graph?",
            options: &["BFS", "DFS", "Pre-order", "Post-order"],
            correct: "BFS", tags: &["bfs", "shortest-paths"], difficulty: Difficulty::Easy },
        QuestionSpec { id: "gt_q4", quiz: "quiz_graphs", topic: "Graph Traversal",
            text: "What marks a back edge during depth-first search of a directed graph?",
            options: &["An edge to an ancestor on the current path", "An edge to an unvisited node", "An edge leaving the component", "Any edge into a finished node"],
            correct: "An edge to an ancestor on the current path", tags: &["dfs", "edge-classification"], difficulty: Difficulty::Hard },
        // Linked Lists
        QuestionSpec { id: "ll_q1", quiz: "quiz_lists", topic: "Linked Lists",
            text: "What is the time complexity of inserting at the head of a singly linked list?",
            options: &["O(1)", "O(n)", "O(log n)", "O(n^2)"],
            correct: "O(1)", tags: &["pointer-updates"], difficulty: Difficulty::Easy },
        QuestionSpec { id: "ll_q2", quiz: "quiz_lists", topic: "Linked Lists",
            text: "After deleting the node after p in a singly linked list, which pointer assignment is required?",
            options: &["p.next = p.next.next", "p = p.next", "p.next = p", "p.prev = p.next"],
            correct: "p.next = p.next.next", tags: &["pointer-updates", "deletion"], difficulty: Difficulty::Medium },
        QuestionSpec { id: "ll_q3", quiz: "quiz_lists", topic: "Linked Lists",
            text: "Which technique detects a cycle in a linked list with O(1) extra space?",
            options: &["Fast and slow pointers", "Hash set of nodes", "Sorting the nodes", "Recursion depth counting"],
            correct: "Fast and slow pointers", tags: &["cycle-detection"], difficulty: Difficulty::Medium },
        QuestionSpec { id: "ll_q4", quiz: "quiz_lists", topic: "Linked Lists",
            text: "Reversing a singly linked list iteratively requires how many pointer variables?",
            options: &["3", "1", "2", "4"],
            correct: "3", tags: &["pointer-updates", "reversal"], difficulty: Difficulty::Hard },
        // Time Complexity
        QuestionSpec { id: "tc_q1", quiz: "quiz_complexity", topic: "Time Complexity",
            text: "If f(n) = 3n^2 + 100n + 7, which Big-O class describes f?",
            options: &["O(n^2)", "O(n)", "O(n^3)", "O(100n)"],
            correct: "O(n^2)", tags: &["asymptotics"], difficulty: Difficulty::Medium },
        QuestionSpec { id: "tc_q2", quiz: "quiz_complexity", topic: "Time Complexity",
            text: "What is the time complexity of binary search on a sorted array?",
            options: &["O(log n)", "O(n)", "O(1)", "O(n log n)"],
            correct: "O(log n)", tags: &["asymptotics", "logarithms"], difficulty: Difficulty::Easy },
        QuestionSpec { id: "tc_q3", quiz: "quiz_complexity", topic: "Time Complexity",
            text: "Explain why two nested loops over n elements give O(n^2) time.",
            options: &[],
            correct: "Each of the n outer iterations performs n inner iterations, so the total work is n * n.",
            tags: &["nested-loops"], difficulty: Difficulty::Medium },
        QuestionSpec { id: "tc_q4", quiz: "quiz_complexity", topic: "Time Complexity",
            text: "Order these growth rates from slowest to fastest: n log n, 2^n, n^2.",
            options: &["n log n, n^2, 2^n", "n^2, n log n, 2^n", "2^n, n^2, n log n", "n log n, 2^n, n^2"],
            correct: "n log n, n^2, 2^n", tags: &["asymptotics", "growth-ordering"], difficulty: Difficulty::Hard },
        // Final exam questions (question-level exam evidence).
        QuestionSpec { id: "fin_q1", quiz: "final", topic: "Graph Traversal",
            text: "Trace BFS from node S in the given graph and report the visit order.",
            options: &["S, A, B, C", "S, B, A, C", "S, C, B, A", "A, S, B, C"],
            correct: "S, A, B, C", tags: &["bfs", "visit-order"], difficulty: Difficulty::Hard },
        QuestionSpec { id: "fin_q2", quiz: "final", topic: "AVL Trees",
            text: "Insert 5, 3, 8, 1, 2 into an AVL tree; which node is the final root?",
            options: &["5", "3", "2", "8"],
            correct: "5", tags: &["rotations", "balance-factor"], difficulty: Difficulty::Hard },
    ]
}

fn questions() -> Vec<QuizQuestion> {
    question_bank()
        .into_iter()
        .map(|q| QuizQuestion {
            question_id: q.id.to_string(),
            quiz_id: q.quiz.to_string(),
            topic: q.topic.to_string(),
            kind: if q.options.is_empty() {
                QuestionKind::ShortAnswer
            } else {
                QuestionKind::MultipleChoice
            },
            text: q.text.to_string(),
            options: q.options.iter().map(|s| s.to_string()).collect(),
            correct_answer: q.correct.to_string(),
            concept_tags: q.tags.iter().map(|s| s.to_string()).collect(),
            instructor_difficulty: Some(q.difficulty),
        })
        .collect()
}

/// (student, question, selected answer). Everything else derives from the
/// bank: a response is a miss iff the selected answer differs from the
/// correct one.
fn response_script() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        // stu_01: everything correct.
        ("stu_01", "avl_q1", "Left rotation at 10"),
        ("stu_01", "avl_q2", "2"),
        ("stu_01", "avl_q3", "10, 30, 20"),
        ("stu_01", "avl_q4", "O(log n)"),
        ("stu_01", "gt_q1", "Queue"),
        ("stu_01", "gt_q2", "A, B, D, C"),
        ("stu_01", "gt_q3", "BFS"),
        ("stu_01", "gt_q4", "An edge to an ancestor on the current path"),
        ("stu_01", "ll_q1", "O(1)"),
        ("stu_01", "ll_q2", "p.next = p.next.next"),
        ("stu_01", "ll_q3", "Fast and slow pointers"),
        ("stu_01", "ll_q4", "3"),
        ("stu_01", "tc_q1", "O(n^2)"),
        ("stu_01", "tc_q2", "O(log n)"),
        ("stu_01", "tc_q3", "Each of the n outer iterations performs n inner iterations, so the total work is n * n."),
        ("stu_01", "tc_q4", "n log n, n^2, 2^n"),
        ("stu_01", "fin_q1", "S, A, B, C"),
        ("stu_01", "fin_q2", "5"),
        // stu_02: consistently picks the stack answer for BFS-style
        // questions and mixes up rotations.
        ("stu_02", "avl_q1", "Right rotation at 30"),
        ("stu_02", "avl_q2", "2"),
        ("stu_02", "avl_q3", "10, 20, 30"),
        ("stu_02", "avl_q4", "O(log n)"),
        ("stu_02", "gt_q1", "Stack"),
        ("stu_02", "gt_q2", "A, C, B, D"),
        ("stu_02", "gt_q3", "DFS"),
        ("stu_02", "gt_q4", "An edge to an unvisited node"),
        ("stu_02", "ll_q1", "O(1)"),
        ("stu_02", "ll_q2", "p.next = p.next.next"),
        ("stu_02", "ll_q3", "Fast and slow pointers"),
        ("stu_02", "ll_q4", "3"),
        ("stu_02", "tc_q1", "O(n^2)"),
        ("stu_02", "tc_q2", "O(log n)"),
        ("stu_02", "tc_q3", "Each of the n outer iterations performs n inner iterations, so the total work is n * n."),
        ("stu_02", "tc_q4", "n log n, n^2, 2^n"),
        ("stu_02", "fin_q1", "S, B, A, C"),
        ("stu_02", "fin_q2", "3"),
        // stu_03: misses the short-answer and the ordering question on
        // complexity.
        ("stu_03", "avl_q1", "Left rotation at 10"),
        ("stu_03", "avl_q2", "2"),
        ("stu_03", "avl_q3", "10, 30, 20"),
        ("stu_03", "avl_q4", "O(log n)"),
        ("stu_03", "gt_q1", "Queue"),
        ("stu_03", "gt_q2", "A, B, D, C"),
        ("stu_03", "gt_q3", "BFS"),
        ("stu_03", "gt_q4", "An edge to an ancestor on the current path"),
        ("stu_03", "ll_q1", "O(1)"),
        ("stu_03", "ll_q2", "p.next = p.next.next"),
        ("stu_03", "ll_q3", "Fast and slow pointers"),
        ("stu_03", "ll_q4", "3"),
        ("stu_03", "tc_q1", "O(n)"),
        ("stu_03", "tc_q2", "O(n)"),
        ("stu_03", "tc_q3", "Because loops are slow."),
        ("stu_03", "tc_q4", "n^2, n log n, 2^n"),
        ("stu_03", "fin_q1", "S, A, B, C"),
        ("stu_03", "fin_q2", "5"),
        // stu_04: shaky on linked lists.
        ("stu_04", "avl_q1", "Left rotation at 10"),
        ("stu_04", "avl_q2", "2"),
        ("stu_04", "avl_q3", "10, 30, 20"),
        ("stu_04", "avl_q4", "O(log n)"),
        ("stu_04", "gt_q1", "Queue"),
        ("stu_04", "gt_q2", "A, B, D, C"),
        ("stu_04", "gt_q3", "BFS"),
        ("stu_04", "gt_q4", "An edge to an ancestor on the current path"),
        ("stu_04", "ll_q1", "O(n)"),
        ("stu_04", "ll_q2", "p = p.next"),
        ("stu_04", "ll_q3", "Fast and slow pointers"),
        ("stu_04", "ll_q4", "2"),
        ("stu_04", "tc_q1", "O(n^2)"),
        ("stu_04", "tc_q2", "O(log n)"),
        ("stu_04", "tc_q3", "Each of the n outer iterations performs n inner iterations, so the total work is n * n."),
        ("stu_04", "tc_q4", "n log n, n^2, 2^n"),
        ("stu_04", "fin_q1", "S, A, B, C"),
        ("stu_04", "fin_q2", "5"),
    ]
}

fn responses(bank: &[QuizQuestion]) -> Vec<QuestionResponse> {
    let by_id: BTreeMap<&str, &QuizQuestion> =
        bank.iter().map(|q| (q.question_id.as_str(), q)).collect();
    response_script()
        .into_iter()
        .map(|(student, qid, selected)| {
            let question = by_id[qid];
            let correct = selected == question.correct_answer;
            QuestionResponse {
                student: sid(student),
                question_id: qid.to_string(),
                selected_answer: selected.to_string(),
                points_earned: if correct { 1.0 } else { 0.0 },
                points_possible: 1.0,
            }
        })
        .collect()
}

/// Quiz rows aggregate the scripted responses; midterm/final rows are the
/// exam ground truth.
fn gradebook(bank: &[QuizQuestion], responses: &[QuestionResponse]) -> Vec<GradebookEntry> {
    let by_id: BTreeMap<&str, &QuizQuestion> =
        bank.iter().map(|q| (q.question_id.as_str(), q)).collect();
    let mut quiz_totals: BTreeMap<(String, String, String), (f64, f64)> = BTreeMap::new();
    for r in responses {
        let q = by_id[r.question_id.as_str()];
        if q.quiz_id == "final" {
            continue; // question-level exam evidence stays in responses.csv
        }
        let key = (r.student.to_string(), q.quiz_id.clone(), q.topic.clone());
        let slot = quiz_totals.entry(key).or_insert((0.0, 0.0));
        slot.0 += r.points_earned;
        slot.1 += r.points_possible;
    }

    let mut entries: Vec<GradebookEntry> = quiz_totals
        .into_iter()
        .map(|((student, quiz, topic), (earned, possible))| GradebookEntry {
            student: StudentId(student),
            assessment_id: quiz,
            topic,
            points_earned: earned,
            points_possible: possible,
            normalized_score: earned / possible,
        })
        .collect();

    // Exam rows: (student, assessment, topic, earned, possible).
    let exams: Vec<(&str, &str, &str, f64, f64)> = vec![
        ("stu_01", "midterm", "AVL Trees", 9.0, 10.0),
        ("stu_01", "midterm", "Graph Traversal", 10.0, 10.0),
        ("stu_01", "final", "Linked Lists", 9.0, 10.0),
        ("stu_01", "final", "Time Complexity", 8.5, 10.0),
        ("stu_02", "midterm", "AVL Trees", 5.5, 10.0),
        ("stu_02", "midterm", "Graph Traversal", 4.0, 10.0),
        ("stu_02", "final", "Linked Lists", 8.0, 10.0),
        ("stu_02", "final", "Time Complexity", 8.0, 10.0),
        ("stu_03", "midterm", "AVL Trees", 8.5, 10.0),
        ("stu_03", "midterm", "Graph Traversal", 8.0, 10.0),
        ("stu_03", "final", "Linked Lists", 8.0, 10.0),
        ("stu_03", "final", "Time Complexity", 4.5, 10.0),
        ("stu_04", "midterm", "AVL Trees", 8.0, 10.0),
        ("stu_04", "midterm", "Graph Traversal", 9.0, 10.0),
        ("stu_04", "final", "Linked Lists", 6.0, 10.0),
        ("stu_04", "final", "Time Complexity", 9.0, 10.0),
    ];
    for (student, assessment, topic, earned, possible) in exams {
        entries.push(GradebookEntry {
            student: sid(student),
            assessment_id: assessment.to_string(),
            topic: topic.to_string(),
            points_earned: earned,
            points_possible: possible,
            normalized_score: earned / possible,
        });
    }
    entries
}

fn surveys() -> Vec<PreferenceSurvey> {
    let mk = |student: &str,
              pacing: Pacing,
              ranking: [Modality; 4],
              study_time: &str,
              extra: &[(&str, &str)]| PreferenceSurvey {
        student: sid(student),
        pacing,
        modality_ranking: ranking.to_vec(),
        assessment_preference: "frequent short quizzes".to_string(),
        feedback_preference: "detailed written feedback".to_string(),
        study_time: study_time.to_string(),
        free_text: extra
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    };
    vec![
        mk(
            "stu_01",
            Pacing::SelfPaced,
            [Modality::TextPdf, Modality::Video, Modality::Interactive, Modality::HandsOn],
            "morning",
            &[("environment", "quiet library")],
        ),
        mk(
            "stu_02",
            Pacing::InstructorPaced,
            [Modality::Video, Modality::Interactive, Modality::TextPdf, Modality::HandsOn],
            "evening",
            &[("environment", "dorm with headphones"), ("devices", "laptop and phone")],
        ),
        mk(
            "stu_03",
            Pacing::SelfPaced,
            [Modality::TextPdf, Modality::Interactive, Modality::Video, Modality::HandsOn],
            "late night",
            &[("attention_span", "short bursts")],
        ),
        mk(
            "stu_04",
            Pacing::InstructorPaced,
            [Modality::HandsOn, Modality::Interactive, Modality::Video, Modality::TextPdf],
            "afternoon",
            &[("social", "prefers study groups")],
        ),
    ]
}

fn build_dataset() -> CourseDataset {
    let bank = questions();
    let resp = responses(&bank);
    let grades = gradebook(&bank, &resp);
    validate_dataset(
        "sample_cs_course",
        bank,
        resp,
        grades,
        surveys(),
        BTreeSet::from(["midterm".to_string(), "final".to_string()]),
    )
    .expect("sample course must validate")
}

/// Scripted stand-in replies: contract-conformant diagnosis lists built
/// from the ids in the prompt, and difficulty words derived from a stable
/// hash of the prompt.
fn scripted_reply(request: &AgentRequest) -> Result<String, GatewayError> {
    let text = &request.user_text;
    if request.system_text == prompts::SYSTEM_DIAGNOSE {
        let topic = text
            .lines()
            .next()
            .and_then(|l| l.split('"').nth(1))
            .unwrap_or("the topic")
            .to_string();
        let ids: Vec<&str> = text
            .lines()
            .filter_map(|l| {
                let l = l.trim();
                l.strip_prefix("- [")?.split(']').next()
            })
            .collect();
        let mut lines = vec![format!(
            "1. Misreads the core procedure behind {topic} questions and picks structurally similar wrong answers. [evidence: {}]",
            ids.join(",")
        )];
        if ids.len() > 1 {
            lines.push(format!(
                "2. Confuses closely related concepts within {topic} when several options look plausible. [evidence: {}]",
                ids[0]
            ));
        }
        return Ok(lines.join("\n"));
    }
    if request.system_text == prompts::SYSTEM_LABEL {
        let digest = request.digest();
        let level = match digest.as_bytes()[0] % 3 {
            0 => "Easy",
            1 => "Medium",
            _ => "Hard",
        };
        return Ok(level.to_string());
    }
    Err(GatewayError::BackendUnavailable(format!(
        "no scripted reply for system prompt {:?}",
        request.system_text
    )))
}

/// Candidate pool per topic: (url, title, status, content_type, body).
fn page_pool() -> Vec<(&'static str, &'static str, u16, &'static str, String)> {
    let page = |topic: &str, detail: &str| {
        format!(
            "<html><head><title>{topic}</title></head><body><h1>{topic}</h1>\
             <p>{detail}</p><p>A practical walkthrough of {topic} with worked examples.</p></body></html>"
        )
    };
    vec![
        (
            "https://www.youtube.com/watch?v=graph-bfs-101",
            "Graph Traversal: BFS explained step by step",
            200,
            "text/html",
            page("Graph Traversal", "Queues, frontiers, and why BFS finds shortest paths."),
        ),
        (
            "https://www.youtube.com/watch?v=graph-dfs-201",
            "Graph Traversal and AVL Trees: a visual tour",
            200,
            "text/html",
            page("Graph Traversal", "DFS edge classification and AVL Trees rotations side by side."),
        ),
        (
            "https://learn.example/articles/graph-traversal-dead",
            "Graph Traversal masterclass (retired page)",
            404,
            "text/html",
            String::new(),
        ),
        (
            "https://www.youtube.com/watch?v=avl-rotations",
            "AVL Trees rotations in five minutes",
            200,
            "text/html",
            page("AVL Trees", "Single and double rotations with balance factors."),
        ),
        (
            "https://learn.example/articles/avl-deep-dive",
            "AVL Trees deep dive",
            200,
            "text/html",
            page("AVL Trees", "Why balance factors stay in -1..1 after each rebalancing."),
        ),
        (
            "https://learn.example/articles/time-complexity-guide.pdf",
            "Time Complexity reading guide",
            200,
            "application/pdf",
            "Time Complexity from counting steps to asymptotic classes. Growth rate tables and nested-loops analysis.".to_string(),
        ),
        (
            "https://learn.example/articles/big-o-explained",
            "Time Complexity and Big-O explained",
            200,
            "text/html",
            page("Time Complexity", "Asymptotics, growth ordering, and common pitfalls."),
        ),
        (
            "https://playground.example/linked-lists-interactive",
            "Linked Lists interactive visualizer",
            200,
            "text/html",
            page("Linked Lists", "Drag pointers to rebuild insertion and deletion sequences."),
        ),
        (
            "https://learn.example/articles/linked-lists-pointers",
            "Linked Lists pointer surgery",
            200,
            "text/html",
            page("Linked Lists", "Head insertion, deletion-after, and reversal recipes."),
        ),
    ]
}

fn search_results_for(topic: &str) -> Vec<SearchResult> {
    let pool = page_pool();
    let urls: &[&str] = match topic {
        "Graph Traversal" => &[
            "https://learn.example/articles/graph-traversal-dead",
            "https://www.youtube.com/watch?v=graph-bfs-101",
            "https://www.youtube.com/watch?v=graph-dfs-201",
        ],
        "AVL Trees" => &[
            "https://www.youtube.com/watch?v=graph-dfs-201",
            "https://www.youtube.com/watch?v=avl-rotations",
            "https://learn.example/articles/avl-deep-dive",
        ],
        "Time Complexity" => &[
            "https://learn.example/articles/time-complexity-guide.pdf",
            "https://learn.example/articles/big-o-explained",
        ],
        "Linked Lists" => &[
            "https://playground.example/linked-lists-interactive",
            "https://learn.example/articles/linked-lists-pointers",
        ],
        _ => &[],
    };
    urls.iter()
        .map(|url| {
            let (u, title, ..) = pool.iter().find(|(u, ..)| u == url).expect("pool entry");
            SearchResult {
                url: u.to_string(),
                title: title.to_string(),
                snippet: format!("{title} - learning resource"),
            }
        })
        .collect()
}

fn main() {
    let workspace = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root exists");
    let root = workspace.join("sample_course");
    let dataset = build_dataset();
    save_course(&dataset, &root).expect("write sample bundle");

    // Replay store: run diagnosis and labeling against the scripted backend.
    let gateway = AgentGateway::new(Box::new(ScriptedChat(scripted_reply)));
    let bands = BandConfig::default();
    let diagnose_template = prompts::load("diagnose", None);
    let label_template = prompts::load("label", None);

    // Search fixtures keyed by the exact queries the pipeline constructs.
    let mut search = SearchFixtures::default();
    for student in &dataset.students {
        let vector = vector_for_student(&dataset, student, &bands, false).unwrap();
        let gaps = identify_gaps(&vector, TAU).unwrap();
        let prefs = extract_preferences(dataset.survey_for(student).unwrap());
        for gap in gaps {
            let evidence = assemble_evidence(&dataset, student, &gap.topic);
            let diagnosis = if evidence.missed_questions.is_empty() {
                align_core::diagnosis::ConceptDiagnosis::insufficient_evidence(&gap.topic)
            } else {
                diagnose(&evidence, &gateway, MODEL_ID, &diagnose_template).unwrap()
            };
            let query = construct_query(&gap, &prefs, &diagnosis);
            search
                .queries
                .insert(query.text.clone(), search_results_for(&gap.topic));
        }
    }
    let _ = label_bank(&dataset.questions, &gateway, MODEL_ID, &label_template);

    let fixtures_dir = root.join("fixtures");
    std::fs::create_dir_all(&fixtures_dir).expect("create fixtures dir");
    search
        .save(&fixtures_dir.join("search.json"))
        .expect("write search fixtures");

    let pages = FixturePages::new(fixtures_dir.join("pages"));
    for (url, _title, status, content_type, body) in page_pool() {
        pages
            .store(&PageFixture {
                url: url.to_string(),
                status,
                content_type: content_type.to_string(),
                body,
            })
            .expect("write page fixture");
    }

    record_session(&gateway.transcripts(), &root.join("replay.json"))
        .expect("write replay store");

    println!(
        "sample course written to {} ({} transcripts recorded)",
        root.display(),
        gateway.transcripts().len()
    );
}
