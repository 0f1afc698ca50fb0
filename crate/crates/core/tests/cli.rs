//! Exit-code and artifact contracts of the `align` CLI, exercised
//! in-process through `cli::run`.

use std::path::{Path, PathBuf};

use align_core::cli::{run, EXIT_BACKEND, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn sample_course() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../sample_course")
}

fn align(args: &[&str]) -> i32 {
    let mut argv = vec!["align".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(argv)
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(align(&["frobnicate"]), EXIT_USAGE);
}

#[test]
fn missing_course_flag_is_a_usage_error() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(
        align(&["proficiency", "--out", out.path().to_str().unwrap()]),
        EXIT_USAGE
    );
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(align(&["--help"]), EXIT_OK);
    assert_eq!(align(&["--version"]), EXIT_OK);
}

#[test]
fn validate_accepts_the_sample_course() {
    let course = sample_course().join("course.json");
    assert_eq!(align(&["validate", "--course", course.to_str().unwrap()]), EXIT_OK);
}

#[test]
fn validate_rejects_a_broken_bundle_with_data_exit() {
    // Copy the sample course and point a response at a missing question.
    let dir = tempfile::tempdir().unwrap();
    for file in ["course.json", "gradebook.csv", "questions.json", "preferences.json"] {
        std::fs::copy(sample_course().join(file), dir.path().join(file)).unwrap();
    }
    let responses = std::fs::read_to_string(sample_course().join("responses.csv")).unwrap();
    let broken = responses.replace("avl_q1", "no_such_question");
    std::fs::write(dir.path().join("responses.csv"), broken).unwrap();

    let course = dir.path().join("course.json");
    assert_eq!(align(&["validate", "--course", course.to_str().unwrap()]), EXIT_DATA);
}

#[test]
fn proficiency_writes_artifact_and_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let course = sample_course().join("course.json");
    let code = align(&[
        "proficiency",
        "--course",
        course.to_str().unwrap(),
        "--tau",
        "0.7",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let artifact = out.path().join("proficiency.json");
    assert!(artifact.exists());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(artifact).unwrap()).unwrap();
    assert_eq!(doc["tau"], 0.7);
    // rho is emitted with six decimal places.
    let rho = doc["students"]["stu_02"]["proficiency"][0]["rho"].as_str().unwrap();
    assert_eq!(rho.len(), rho.find('.').unwrap() + 7, "{rho} is not 6dp");
}

#[test]
fn agent_diagnosis_without_backend_is_a_backend_error() {
    let out = tempfile::tempdir().unwrap();
    let course = sample_course().join("course.json");
    let code = align(&[
        "diagnose",
        "--course",
        course.to_str().unwrap(),
        "--mode-diagnose",
        "agent",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_BACKEND);
}

#[test]
fn rule_mode_diagnose_runs_without_any_backend() {
    let out = tempfile::tempdir().unwrap();
    let course = sample_course().join("course.json");
    let code = align(&[
        "diagnose",
        "--course",
        course.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.path().join("gap_report_stu_02.json").exists());
}

#[test]
fn recommend_with_missing_fixture_dir_is_a_usage_error() {
    let course = sample_course().join("course.json");
    let code = align(&[
        "recommend",
        "--course",
        course.to_str().unwrap(),
        "--fixtures",
        "/no/such/fixtures",
    ]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn simulate_then_pipeline_runs_offline_end_to_end() {
    let sim_dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    assert_eq!(
        align(&[
            "simulate",
            "--seed",
            "7",
            "--students",
            "3",
            "--topics",
            "3",
            "--questions-per-topic",
            "8",
            "--exam-questions-per-topic",
            "3",
            "--out",
            sim_dir.path().to_str().unwrap(),
        ]),
        EXIT_OK
    );
    assert!(sim_dir.path().join("course.json").exists());
    assert!(sim_dir.path().join("latents.json").exists());

    // Rule-based stages need no backends; recommendation needs fixtures,
    // so give it an empty-but-valid fixture store and accept zero results
    // only when there are no gaps. Simpler: run the stages that are
    // backend-free.
    let course = sim_dir.path().join("course.json");
    for stage in ["validate", "proficiency", "diagnose", "label", "evaluate"] {
        let code = align(&[
            stage,
            "--course",
            course.to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "stage {stage}");
    }
    assert!(out.path().join("metrics.json").exists());
    assert!(out.path().join("chart_topic_difficulty.csv").exists());
    assert!(out.path().join("labels_instructor.json").exists());
}

#[test]
fn evaluate_emits_label_comparison_with_replay() {
    let out = tempfile::tempdir().unwrap();
    let sample = sample_course();
    let code = align(&[
        "evaluate",
        "--course",
        sample.join("course.json").to_str().unwrap(),
        "--replay",
        sample.join("replay.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.path().join("label_comparison.json").exists());
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.path().join("label_comparison.json")).unwrap(),
    )
    .unwrap();
    assert!(doc["accuracy"].as_f64().unwrap() <= 1.0);
    assert_eq!(doc["per_class"].as_array().unwrap().len(), 3);
}

#[test]
fn record_flag_writes_a_store_that_replays_identically() {
    let sample = sample_course();
    let out1 = tempfile::tempdir().unwrap();
    let recorded = out1.path().join("recorded.json");
    let code = align(&[
        "diagnose",
        "--course",
        sample.join("course.json").to_str().unwrap(),
        "--replay",
        sample.join("replay.json").to_str().unwrap(),
        "--record",
        recorded.to_str().unwrap(),
        "--mode-diagnose",
        "agent",
        "--out",
        out1.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(recorded.exists());

    // The freshly recorded store must be able to drive the same run.
    let out2 = tempfile::tempdir().unwrap();
    let code = align(&[
        "diagnose",
        "--course",
        sample.join("course.json").to_str().unwrap(),
        "--replay",
        recorded.to_str().unwrap(),
        "--mode-diagnose",
        "agent",
        "--out",
        out2.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    for student in ["stu_01", "stu_02", "stu_03", "stu_04"] {
        let name = format!("gap_report_{student}.json");
        let a: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out1.path().join(&name)).unwrap(),
        )
        .unwrap();
        let b: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out2.path().join(&name)).unwrap(),
        )
        .unwrap();
        assert_eq!(a["gaps"], b["gaps"], "{name}");
    }
}

#[test]
fn config_file_defaults_flow_into_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let config = out.path().join("align.toml");
    std::fs::write(&config, "tau = 0.9\n").unwrap();
    let course = sample_course().join("course.json");
    let code = align(&[
        "proficiency",
        "--course",
        course.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.path().join("proficiency.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["tau"], 0.9);
}
