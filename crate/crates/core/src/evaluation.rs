//! Classification metrics and exam-anchored ground truth.
//!
//! Ground truth comes from exam assessments only: per (student, topic), the
//! mean normalized exam score mapped through the same band cutoffs as
//! predictions. Metrics are one-vs-rest per class with macro averaging;
//! a zero denominator yields 0 and flags the class rather than crashing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CourseDataset, Difficulty, StudentId};
use crate::labeling::LabelSet;
use crate::proficiency::{Band, BandConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no usable exam items: cannot derive ground truth")]
    NoExamData,
    #[error("prediction and reference share no keys")]
    EmptyIntersection,
}

/// Row = truth, column = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn record(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> usize {
        self.counts.iter().map(|row| row[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub n: usize,
    /// Classes where a zero denominator forced a metric to 0.
    pub zero_denominator_classes: Vec<String>,
}

/// Harmonic combination of precision and recall; 0 when both are 0.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One-vs-rest metrics over a confusion matrix.
pub fn metrics(matrix: &ConfusionMatrix) -> MetricsReport {
    let n = matrix.total();
    let mut per_class = Vec::with_capacity(matrix.classes.len());
    let mut zero_denominator_classes = Vec::new();

    for (i, class) in matrix.classes.iter().enumerate() {
        let tp = matrix.counts[i][i];
        let fp = matrix.col_sum(i) - tp;
        let fn_ = matrix.row_sum(i) - tp;
        let support = matrix.row_sum(i);

        let precision = if tp + fp == 0 {
            zero_denominator_classes.push(format!("{class}:precision"));
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            zero_denominator_classes.push(format!("{class}:recall"));
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        per_class.push(ClassMetrics {
            class: class.clone(),
            precision,
            recall,
            f1: f1_from_pr(precision, recall),
            support,
        });
    }

    let k = per_class.len().max(1) as f64;
    MetricsReport {
        macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k,
        macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
        accuracy: if n == 0 {
            0.0
        } else {
            matrix.trace() as f64 / n as f64
        },
        n,
        per_class,
        zero_denominator_classes,
    }
}

/// Per-student, per-topic bands derived from exam items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMap {
    pub bands: BTreeMap<StudentId, BTreeMap<String, Band>>,
}

impl GroundTruthMap {
    pub fn get(&self, student: &StudentId, topic: &str) -> Option<Band> {
        self.bands.get(student).and_then(|m| m.get(topic)).copied()
    }

    pub fn len(&self) -> usize {
        self.bands.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Derive exam-based ground truth: per (student, topic), the mean of
/// normalized exam scores mapped through `bands`. Exam evidence comes from
/// gradebook rows whose assessment is flagged as an exam, plus responses to
/// questions whose quiz id is flagged. Pairs with no exam items are simply
/// absent.
pub fn derive_ground_truth(
    dataset: &CourseDataset,
    bands: &BandConfig,
) -> Result<GroundTruthMap, EvalError> {
    let mut sums: BTreeMap<(StudentId, String), (f64, usize)> = BTreeMap::new();

    for entry in &dataset.gradebook {
        if !dataset.exam_assessment_ids.contains(&entry.assessment_id) {
            continue;
        }
        let slot = sums
            .entry((entry.student.clone(), entry.topic.clone()))
            .or_insert((0.0, 0));
        slot.0 += entry.normalized_score;
        slot.1 += 1;
    }
    for response in &dataset.responses {
        let Some(question) = dataset.question(&response.question_id) else {
            continue;
        };
        if !dataset.exam_assessment_ids.contains(&question.quiz_id) {
            continue;
        }
        let slot = sums
            .entry((response.student.clone(), question.topic.clone()))
            .or_insert((0.0, 0));
        slot.0 += response.points_earned / response.points_possible;
        slot.1 += 1;
    }

    if sums.is_empty() {
        return Err(EvalError::NoExamData);
    }

    let mut map: BTreeMap<StudentId, BTreeMap<String, Band>> = BTreeMap::new();
    for ((student, topic), (sum, count)) in sums {
        let mean = sum / count as f64;
        map.entry(student)
            .or_default()
            .insert(topic, bands.band_for(mean));
    }
    Ok(GroundTruthMap { bands: map })
}

/// Pairs excluded from a confusion build, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub student: StudentId,
    pub topic: String,
    pub reason: String,
}

/// Build a band confusion matrix over the intersection of predicted and
/// ground-truth (student, topic) pairs. Pairs present on only one side, and
/// Unknown predictions, are reported as skipped.
pub fn confusion(
    predictions: &BTreeMap<StudentId, BTreeMap<String, Band>>,
    truth: &GroundTruthMap,
) -> Result<(ConfusionMatrix, Vec<SkippedPair>), EvalError> {
    let classes = vec![
        Band::High.name().to_string(),
        Band::Medium.name().to_string(),
        Band::Low.name().to_string(),
    ];
    let mut matrix = ConfusionMatrix::new(classes);
    let mut skipped = Vec::new();

    let mut all_pairs: BTreeSet<(StudentId, String)> = BTreeSet::new();
    for (student, topics) in predictions {
        for topic in topics.keys() {
            all_pairs.insert((student.clone(), topic.clone()));
        }
    }
    for (student, topics) in &truth.bands {
        for topic in topics.keys() {
            all_pairs.insert((student.clone(), topic.clone()));
        }
    }

    for (student, topic) in all_pairs {
        let pred = predictions.get(&student).and_then(|m| m.get(&topic)).copied();
        let actual = truth.get(&student, &topic);
        match (pred, actual) {
            (Some(Band::Unknown), Some(_)) => skipped.push(SkippedPair {
                student,
                topic,
                reason: "prediction has no evidence (Unknown)".to_string(),
            }),
            (Some(p), Some(t)) => {
                let ti = matrix.class_index(t.name()).expect("band class");
                let pi = matrix.class_index(p.name()).expect("band class");
                matrix.record(ti, pi);
            }
            (Some(_), None) => skipped.push(SkippedPair {
                student,
                topic,
                reason: "no exam ground truth for this pair".to_string(),
            }),
            (None, Some(_)) => skipped.push(SkippedPair {
                student,
                topic,
                reason: "no prediction for this pair".to_string(),
            }),
            (None, None) => unreachable!("pair came from one of the two maps"),
        }
    }

    if matrix.total() == 0 {
        return Err(EvalError::EmptyIntersection);
    }
    Ok((matrix, skipped))
}

/// Compare two label sets over their jointly labeled questions: `a` is the
/// reference, `b` the prediction.
pub fn compare_label_sets(a: &LabelSet, b: &LabelSet) -> Result<MetricsReport, EvalError> {
    let classes: Vec<String> = Difficulty::ALL.iter().map(|d| d.name().to_string()).collect();
    let mut matrix = ConfusionMatrix::new(classes);
    for (question_id, truth) in &a.labels {
        let Some(pred) = b.labels.get(question_id) else {
            continue;
        };
        let ti = matrix.class_index(truth.name()).expect("difficulty class");
        let pi = matrix.class_index(pred.name()).expect("difficulty class");
        matrix.record(ti, pi);
    }
    if matrix.total() == 0 {
        return Err(EvalError::EmptyIntersection);
    }
    Ok(metrics(&matrix))
}

/// Chart data: per-topic counts of labeled questions by difficulty, as CSV
/// `topic,easy,medium,hard,total` sorted by topic.
pub fn emit_chart_data(dataset: &CourseDataset, labels: &LabelSet) -> String {
    let mut rows: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for question in &dataset.questions {
        let Some(level) = labels.labels.get(&question.question_id) else {
            continue;
        };
        let slot = rows.entry(question.topic.clone()).or_insert([0; 3]);
        match level {
            Difficulty::Easy => slot[0] += 1,
            Difficulty::Medium => slot[1] += 1,
            Difficulty::Hard => slot[2] += 1,
        }
    }

    let mut out = String::from("topic,easy,medium,hard,total\n");
    for (topic, [easy, medium, hard]) in rows {
        let field = if topic.contains(',') || topic.contains('"') {
            format!("\"{}\"", topic.replace('"', "\"\""))
        } else {
            topic
        };
        out.push_str(&format!(
            "{field},{easy},{medium},{hard},{}\n",
            easy + medium + hard
        ));
    }
    out
}

#[cfg(test)]
mod tests;
