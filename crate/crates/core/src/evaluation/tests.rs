use super::*;
use crate::data::{validate_dataset, GradebookEntry, QuestionKind, QuizQuestion};
use crate::labeling::LabelSource;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Independent oracle: per-class TP/FP/FN/TN by brute-force enumeration
/// over the raw (truth, prediction) pair list.
pub(crate) fn oracle_metrics(classes: &[String], pairs: &[(usize, usize)]) -> MetricsReport {
    let n = pairs.len();
    let mut per_class = Vec::new();
    let mut zero_flags = Vec::new();
    for (i, class) in classes.iter().enumerate() {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        let mut support = 0usize;
        for (truth, pred) in pairs {
            if *truth == i {
                support += 1;
            }
            match (*truth == i, *pred == i) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 {
            zero_flags.push(format!("{class}:precision"));
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            zero_flags.push(format!("{class}:recall"));
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            class: class.clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let k = per_class.len().max(1) as f64;
    MetricsReport {
        macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k,
        macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        n,
        per_class,
        zero_denominator_classes: zero_flags,
    }
}

pub(crate) fn matrix_from_pairs(classes: &[String], pairs: &[(usize, usize)]) -> ConfusionMatrix {
    let mut matrix = ConfusionMatrix::new(classes.to_vec());
    for (truth, pred) in pairs {
        matrix.record(*truth, *pred);
    }
    matrix
}

fn three_classes() -> Vec<String> {
    vec!["High".to_string(), "Medium".to_string(), "Low".to_string()]
}

#[test]
fn binary_precision_recall_match_hand_values() {
    // TP=9, FP=1, FN=0 for the first class.
    let classes = vec!["pos".to_string(), "neg".to_string()];
    let mut pairs = vec![(0usize, 0usize); 9];
    pairs.push((1, 0)); // one false positive
    let report = metrics(&matrix_from_pairs(&classes, &pairs));
    let pos = &report.per_class[0];
    assert!((pos.precision - 0.90).abs() < 1e-12);
    assert!((pos.recall - 1.0).abs() < 1e-12);
}

#[test]
fn f1_from_pr_matches_hand_values() {
    assert_eq!(f1_from_pr(1.0, 1.0), 1.0);
    assert_eq!(f1_from_pr(0.0, 0.0), 0.0);
    // (0.90, 0.85) -> 0.8743, printed as 0.87.
    let f1 = f1_from_pr(0.90, 0.85);
    assert!((f1 - 0.8743).abs() < 5e-5, "{f1}");
    assert_eq!(format!("{:.2}", f1), "0.87");
    // (0.87, 0.82) -> 0.8443, printed as 0.84.
    let f1 = f1_from_pr(0.87, 0.82);
    assert!((f1 - 0.8443).abs() < 5e-5, "{f1}");
    assert_eq!(format!("{:.2}", f1), "0.84");
}

#[test]
fn known_three_class_matrix_matches_oracle_values() {
    // Rows (truth) x columns (prediction):
    //   [[5,1,0],
    //    [1,3,1],
    //    [0,1,2]]
    // Oracle (computed by per-class enumeration before this test was
    // written): accuracy = 10/14, macro precision = 0.70.
    let mut matrix = ConfusionMatrix::new(three_classes());
    let counts = [[5, 1, 0], [1, 3, 1], [0, 1, 2]];
    for (i, row) in counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            for _ in 0..*c {
                matrix.record(i, j);
            }
        }
    }
    let report = metrics(&matrix);
    assert_eq!(report.n, 14);
    assert!((report.accuracy - 10.0 / 14.0).abs() < 1e-12);
    assert!((report.macro_precision - 0.70).abs() < 1e-12);
    // Per-class precisions: 5/6, 3/5, 2/3.
    assert!((report.per_class[0].precision - 5.0 / 6.0).abs() < 1e-12);
    assert!((report.per_class[1].precision - 0.6).abs() < 1e-12);
    assert!((report.per_class[2].precision - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn identical_maps_give_diagonal_matrix() {
    let truth = GroundTruthMap {
        bands: BTreeMap::from([(
            StudentId::from("s1"),
            BTreeMap::from([
                ("A".to_string(), Band::High),
                ("B".to_string(), Band::Medium),
                ("C".to_string(), Band::Low),
                ("D".to_string(), Band::High),
                ("E".to_string(), Band::Medium),
            ]),
        )]),
    };
    let (matrix, skipped) = confusion(&truth.bands, &truth).unwrap();
    assert!(skipped.is_empty());
    assert_eq!(matrix.total(), 5);
    assert_eq!(matrix.trace(), 5);
    assert_eq!(metrics(&matrix).accuracy, 1.0);
}

#[test]
fn all_high_predictions_against_all_low_truth() {
    let students = ["s1", "s2", "s3", "s4"];
    let mut pred = BTreeMap::new();
    let mut truth = BTreeMap::new();
    for s in students {
        pred.insert(
            StudentId::from(s),
            BTreeMap::from([("A".to_string(), Band::High)]),
        );
        truth.insert(
            StudentId::from(s),
            BTreeMap::from([("A".to_string(), Band::Low)]),
        );
    }
    let (matrix, _) = confusion(&pred, &GroundTruthMap { bands: truth }).unwrap();
    // Single off-diagonal cell (truth Low, predicted High) holds all 4.
    let low = matrix.class_index("Low").unwrap();
    let high = matrix.class_index("High").unwrap();
    assert_eq!(matrix.counts[low][high], 4);
    assert_eq!(matrix.trace(), 0);
}

#[test]
fn disjoint_key_sets_are_an_empty_intersection() {
    let pred = BTreeMap::from([(
        StudentId::from("s1"),
        BTreeMap::from([("A".to_string(), Band::High)]),
    )]);
    let truth = GroundTruthMap {
        bands: BTreeMap::from([(
            StudentId::from("s2"),
            BTreeMap::from([("B".to_string(), Band::Low)]),
        )]),
    };
    assert!(matches!(
        confusion(&pred, &truth),
        Err(EvalError::EmptyIntersection)
    ));
}

fn exam_entry(student: &str, topic: &str, score: f64) -> GradebookEntry {
    GradebookEntry {
        student: StudentId::from(student),
        assessment_id: "final".to_string(),
        topic: topic.to_string(),
        points_earned: score * 10.0,
        points_possible: 10.0,
        normalized_score: score,
    }
}

#[test]
fn ground_truth_means_exam_scores_through_bands() {
    let gradebook = vec![
        exam_entry("s1", "A", 1.0),
        exam_entry("s1", "A", 0.9),
        exam_entry("s1", "B", 0.5),
    ];
    let dataset = validate_dataset(
        "c",
        vec![],
        vec![],
        gradebook,
        vec![],
        BTreeSet::from(["final".to_string()]),
    )
    .unwrap();
    let truth = derive_ground_truth(&dataset, &BandConfig::default()).unwrap();
    // Exam items [1.0, 0.9] mean 0.95 -> High.
    assert_eq!(truth.get(&StudentId::from("s1"), "A"), Some(Band::High));
    assert_eq!(truth.get(&StudentId::from("s1"), "B"), Some(Band::Low));
    // Topic with no exam items is absent.
    assert_eq!(truth.get(&StudentId::from("s1"), "C"), None);
}

#[test]
fn ground_truth_includes_exam_question_responses() {
    let questions = vec![QuizQuestion {
        question_id: "fq1".to_string(),
        quiz_id: "final".to_string(),
        topic: "A".to_string(),
        kind: QuestionKind::MultipleChoice,
        text: "?".to_string(),
        options: vec!["x".to_string(), "y".to_string()],
        correct_answer: "x".to_string(),
        concept_tags: vec![],
        instructor_difficulty: None,
    }];
    let responses = vec![crate::data::QuestionResponse {
        student: StudentId::from("s1"),
        question_id: "fq1".to_string(),
        selected_answer: "x".to_string(),
        points_earned: 1.0,
        points_possible: 1.0,
    }];
    // Gradebook must carry the roster and the exam assessment id.
    let gradebook = vec![exam_entry("s1", "B", 0.4)];
    let dataset = validate_dataset(
        "c",
        questions,
        responses,
        gradebook,
        vec![],
        BTreeSet::from(["final".to_string()]),
    )
    .unwrap();
    let truth = derive_ground_truth(&dataset, &BandConfig::default()).unwrap();
    assert_eq!(truth.get(&StudentId::from("s1"), "A"), Some(Band::High));
}

#[test]
fn ground_truth_without_exam_items_errors() {
    let dataset = validate_dataset(
        "c",
        vec![],
        vec![],
        vec![exam_entry("s1", "A", 0.5)],
        vec![],
        BTreeSet::new(), // nothing flagged as exam
    )
    .unwrap();
    assert!(matches!(
        derive_ground_truth(&dataset, &BandConfig::default()),
        Err(EvalError::NoExamData)
    ));
}

#[test]
fn ground_truth_matches_brute_force_recomputation() {
    // Mixed dataset of 20 exam items; oracle recomputes per-pair means by
    // direct enumeration.
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
    let students = ["s1", "s2"];
    let topics = ["A", "B"];
    let mut gradebook = Vec::new();
    for _ in 0..20 {
        let s = students[rng.random_range(0..students.len())];
        let t = topics[rng.random_range(0..topics.len())];
        let score = (rng.random_range(0..=10) as f64) / 10.0;
        gradebook.push(exam_entry(s, t, score));
    }
    let dataset = validate_dataset(
        "c",
        vec![],
        vec![],
        gradebook.clone(),
        vec![],
        BTreeSet::from(["final".to_string()]),
    )
    .unwrap();
    let bands = BandConfig::default();
    let truth = derive_ground_truth(&dataset, &bands).unwrap();

    for s in students {
        for t in topics {
            let scores: Vec<f64> = gradebook
                .iter()
                .filter(|e| e.student.as_str() == s && e.topic == t)
                .map(|e| e.normalized_score)
                .collect();
            let expected = if scores.is_empty() {
                None
            } else {
                Some(bands.band_for(scores.iter().sum::<f64>() / scores.len() as f64))
            };
            assert_eq!(truth.get(&StudentId::from(s), t), expected, "{s}/{t}");
        }
    }
}

fn label_set(source: LabelSource, labels: &[(&str, Difficulty)]) -> LabelSet {
    LabelSet {
        source,
        labels: labels
            .iter()
            .map(|(id, d)| (id.to_string(), *d))
            .collect(),
        coverage: 1.0,
    }
}

#[test]
fn label_comparison_identical_sets_score_one() {
    let labels: Vec<(&str, Difficulty)> = vec![
        ("q1", Difficulty::Easy),
        ("q2", Difficulty::Medium),
        ("q3", Difficulty::Hard),
    ];
    let a = label_set(LabelSource::Instructor, &labels);
    let b = label_set(
        LabelSource::Model {
            model_id: "m".to_string(),
        },
        &labels,
    );
    let report = compare_label_sets(&a, &b).unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.n, 3);
}

#[test]
fn label_comparison_disjoint_coverage_errors() {
    let a = label_set(LabelSource::Instructor, &[("q1", Difficulty::Easy)]);
    let b = label_set(
        LabelSource::Model {
            model_id: "m".to_string(),
        },
        &[("q2", Difficulty::Easy)],
    );
    assert!(matches!(
        compare_label_sets(&a, &b),
        Err(EvalError::EmptyIntersection)
    ));
}

#[test]
fn label_comparison_counts_disagreements() {
    // 12 jointly labeled questions with exactly 3 disagreements.
    // Oracle (hand-enumerated confusion): accuracy = 9/12 = 0.75.
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for i in 0..12 {
        let id = format!("q{i:02}");
        let level = Difficulty::ALL[i % 3];
        truth.push((id.clone(), level));
        let predicted = if i < 3 {
            Difficulty::ALL[(i + 1) % 3] // three disagreements
        } else {
            level
        };
        pred.push((id, predicted));
    }
    let to_refs = |v: &[(String, Difficulty)]| -> Vec<(String, Difficulty)> { v.to_vec() };
    let a = LabelSet {
        source: LabelSource::Instructor,
        labels: to_refs(&truth).into_iter().collect(),
        coverage: 1.0,
    };
    let b = LabelSet {
        source: LabelSource::Model {
            model_id: "m".to_string(),
        },
        labels: to_refs(&pred).into_iter().collect(),
        coverage: 1.0,
    };
    let report = compare_label_sets(&a, &b).unwrap();
    assert_eq!(report.n, 12);
    assert!((report.accuracy - 0.75).abs() < 1e-12);
    // Full per-class breakdown exists.
    assert_eq!(report.per_class.len(), 3);
    // Cross-check with the enumeration oracle.
    let classes: Vec<String> = Difficulty::ALL.iter().map(|d| d.name().to_string()).collect();
    let idx = |d: Difficulty| Difficulty::ALL.iter().position(|x| *x == d).unwrap();
    let pairs: Vec<(usize, usize)> = truth
        .iter()
        .zip(pred.iter())
        .map(|((_, t), (_, p))| (idx(*t), idx(*p)))
        .collect();
    let oracle = oracle_metrics(&classes, &pairs);
    assert_eq!(report.per_class, oracle.per_class);
}

#[test]
fn chart_data_counts_by_topic_and_difficulty() {
    let mk_question = |id: &str, topic: &str| QuizQuestion {
        question_id: id.to_string(),
        quiz_id: "quiz1".to_string(),
        topic: topic.to_string(),
        kind: QuestionKind::ShortAnswer,
        text: "?".to_string(),
        options: vec![],
        correct_answer: "x".to_string(),
        concept_tags: vec![],
        instructor_difficulty: None,
    };
    let dataset = validate_dataset(
        "c",
        vec![
            mk_question("q1", "A"),
            mk_question("q2", "A"),
            mk_question("q3", "A"),
            mk_question("q4", "B"),
        ],
        vec![],
        vec![exam_entry("s1", "A", 1.0)],
        vec![],
        BTreeSet::from(["final".to_string()]),
    )
    .unwrap();
    let labels = label_set(
        LabelSource::Instructor,
        &[
            ("q1", Difficulty::Easy),
            ("q2", Difficulty::Easy),
            ("q3", Difficulty::Hard),
            ("q4", Difficulty::Medium),
        ],
    );
    let csv = emit_chart_data(&dataset, &labels);
    assert_eq!(csv, "topic,easy,medium,hard,total\nA,2,0,1,3\nB,0,1,0,1\n");

    let empty = LabelSet {
        source: LabelSource::Instructor,
        labels: BTreeMap::new(),
        coverage: 0.0,
    };
    assert_eq!(
        emit_chart_data(&dataset, &empty),
        "topic,easy,medium,hard,total\n"
    );
}

#[test]
fn metric_oracle_equivalence_over_random_matrices() {
    // Deterministic sweep of random 3-class outcomes; implementation and
    // the enumeration oracle must agree exactly.
    let classes = three_classes();
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(42);
    for _ in 0..250 {
        let n = rng.random_range(1..60);
        let pairs: Vec<(usize, usize)> = (0..n)
            .map(|_| (rng.random_range(0..3), rng.random_range(0..3)))
            .collect();
        let report = metrics(&matrix_from_pairs(&classes, &pairs));
        let oracle = oracle_metrics(&classes, &pairs);
        assert_eq!(report, oracle);
    }
}

proptest! {
    // F1 is bounded by the stated literal bounds.
    #[test]
    fn f1_bounds(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        let f1 = f1_from_pr(p, r);
        prop_assert!(f1 <= (p + r) / 2.0 + 1e-12);
        prop_assert!(f1 <= 2.0 * p.min(r) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&f1));
    }

    // Accuracy is exactly the diagonal fraction for any matrix.
    #[test]
    fn accuracy_is_diagonal_fraction(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 1..100)
    ) {
        let classes = three_classes();
        let report = metrics(&matrix_from_pairs(&classes, &pairs));
        let diagonal = pairs.iter().filter(|(t, p)| t == p).count();
        prop_assert!((report.accuracy - diagonal as f64 / pairs.len() as f64).abs() < 1e-15);
    }
}
