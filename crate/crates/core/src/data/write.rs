//! Writers that emit a [`CourseDataset`] back to the on-disk bundle layout.
//! Output is deterministic: re-parsing a saved bundle yields a structurally
//! equal dataset.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use super::parse::CourseManifest;
use super::{CourseDataset, DataError, GradebookEntry, QuestionResponse};

fn format_points(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn write_gradebook_csv<W: Write>(entries: &[GradebookEntry], w: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(w);
    writer
        .write_record(["student_id", "assessment_id", "topic", "points_earned", "points_possible"])
        .map_err(|e| DataError::Schema(e.to_string()))?;
    for e in entries {
        writer
            .write_record([
                e.student.as_str(),
                &e.assessment_id,
                &e.topic,
                &format_points(e.points_earned),
                &format_points(e.points_possible),
            ])
            .map_err(|err| DataError::Schema(err.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_responses_csv<W: Write>(
    responses: &[QuestionResponse],
    w: W,
) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(w);
    writer
        .write_record(["student_id", "question_id", "selected_answer", "points_earned", "points_possible"])
        .map_err(|e| DataError::Schema(e.to_string()))?;
    for r in responses {
        writer
            .write_record([
                r.student.as_str(),
                &r.question_id,
                &r.selected_answer,
                &format_points(r.points_earned),
                &format_points(r.points_possible),
            ])
            .map_err(|err| DataError::Schema(err.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Write the full bundle (`course.json` plus the four data files) into `dir`.
pub fn save_course(dataset: &CourseDataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir)?;

    write_gradebook_csv(&dataset.gradebook, File::create(dir.join("gradebook.csv"))?)?;
    write_responses_csv(&dataset.responses, File::create(dir.join("responses.csv"))?)?;

    let questions = serde_json::to_string_pretty(&dataset.questions)
        .map_err(|e| DataError::Schema(e.to_string()))?;
    fs::write(dir.join("questions.json"), questions + "\n")?;

    let preferences = serde_json::to_string_pretty(&dataset.surveys)
        .map_err(|e| DataError::Schema(e.to_string()))?;
    fs::write(dir.join("preferences.json"), preferences + "\n")?;

    let manifest = CourseManifest {
        course_id: dataset.course_id.clone(),
        gradebook: "gradebook.csv".to_string(),
        responses: "responses.csv".to_string(),
        questions: "questions.json".to_string(),
        preferences: "preferences.json".to_string(),
        exam_assessment_ids: dataset.exam_assessment_ids.clone(),
    };
    let manifest = serde_json::to_string_pretty(&manifest)
        .map_err(|e| DataError::Schema(e.to_string()))?;
    fs::write(dir.join("course.json"), manifest + "\n")?;
    Ok(())
}
