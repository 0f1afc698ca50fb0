//! Compiles and runs a small C program against the generated header and
//! the built cdylib, proving the ABI from the consumer side. Skips when no
//! C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const SMOKE_C: &str = r#"
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include "align.h"

int main(void) {
    if (align_version() == NULL) return 1;

    double f1 = align_f1_from_pr(0.90, 0.85);
    if (f1 < 0.87 || f1 > 0.88) return 2;

    char tmpl[] = "/tmp/align_c_smoke_XXXXXX";
    char *dir = mkdtemp(tmpl);
    if (dir == NULL) return 3;

    if (align_simulate(42, 3, 2, 6, 2, 0.0, dir) != ALIGN_STATUS_OK) {
        fprintf(stderr, "simulate: %s\n", align_last_error());
        return 4;
    }

    char manifest[4096];
    snprintf(manifest, sizeof manifest, "%s/course.json", dir);
    AlignDataset *ds = NULL;
    if (align_dataset_load(manifest, &ds) != ALIGN_STATUS_OK) {
        fprintf(stderr, "load: %s\n", align_last_error());
        return 5;
    }
    if (align_dataset_student_count(ds) != 3) return 6;

    char *json = NULL;
    if (align_proficiency_json(ds, 0.7, 0.8, 0.6, false, &json) != ALIGN_STATUS_OK) {
        fprintf(stderr, "proficiency: %s\n", align_last_error());
        return 7;
    }
    if (strstr(json, "\"s001\"") == NULL) return 8;
    align_string_free(json);

    if (align_proficiency_json(ds, 1.7, 0.8, 0.6, false, &json)
            != ALIGN_STATUS_INVALID_ARGUMENT) {
        return 9;
    }

    align_dataset_free(ds);
    puts("c smoke ok");
    return 0;
}
"#;

fn compiler() -> Option<&'static str> {
    for candidate in ["cc", "clang", "gcc"] {
        if Command::new(candidate)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
        {
            return Some(candidate);
        }
    }
    None
}

#[test]
fn c_program_drives_the_abi() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping ABI smoke test");
        return;
    };

    let manifest_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest_dir.join("include");
    // target/debug (or release) is two levels up from the test binary in
    // target/<profile>/deps/.
    let lib_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    assert!(
        lib_dir.join("libalign_ffi.so").exists() || lib_dir.join("libalign_ffi.dylib").exists(),
        "cdylib not found next to the test binary ({})",
        lib_dir.display()
    );

    let work = tempfile::tempdir().unwrap();
    let source = work.path().join("smoke.c");
    std::fs::write(&source, SMOKE_C).unwrap();
    let binary = work.path().join("smoke");

    let compile = Command::new(cc)
        .arg("-Wall")
        .arg("-Wextra")
        .arg("-Werror")
        .arg(format!("-I{}", include_dir.display()))
        .arg(&source)
        .arg(format!("-L{}", lib_dir.display()))
        .arg("-lalign_ffi")
        .arg("-lm")
        .arg("-o")
        .arg(&binary)
        .output()
        .expect("run C compiler");
    assert!(
        compile.status.success(),
        "C compilation failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&binary)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .expect("run smoke binary");
    assert!(
        run.status.success(),
        "smoke binary failed ({:?}):\n{}\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
}
