//! End-to-end tests of the `signet` binary: layout, resume semantics,
//! batch merging, error messages, and the analysis/diffusion subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_signet");

fn signet(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("SIGNET_OUT")
        .output()
        .expect("binary launches")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

const QUICK_RUN: &str = "kind = \"baseline\"\nN = 10\nT = 2000\nseeds = 2\n";

#[test]
fn run_emits_full_layout() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let out = dir.path().join("out");
    let result = signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));
    assert!(stdout_of(&result).contains("2 completed run(s)"));

    for file in ["manifest.json", "cells.csv", "aggregate/seed_summary.csv", "aggregate/cell_summary.csv", "aggregate/group_sizes.csv"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    for seed in 0..2 {
        for file in ["final.bin", "trajectory.csv", "adoption.csv", "groups.csv", "agents.csv", "summary.json"] {
            let path = out.join(format!("cell000/seed{seed:05}/{file}"));
            assert!(path.is_file(), "missing {}", path.display());
        }
    }
}

#[test]
fn existing_output_needs_resume_flag() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let out = dir.path().join("out");
    let first = signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(first.status.success());

    let second = signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!second.status.success());
    assert!(stderr_of(&second).contains("pass --resume"), "stderr: {}", stderr_of(&second));
}

#[test]
fn resume_of_a_finished_run_is_a_byte_identical_noop() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let out = dir.path().join("out");
    assert!(signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());

    let watched = [
        out.join("aggregate/seed_summary.csv"),
        out.join("aggregate/cell_summary.csv"),
        out.join("cell000/seed00000/final.bin"),
        out.join("cell000/seed00001/trajectory.csv"),
    ];
    let before: Vec<Vec<u8>> = watched.iter().map(|p| std::fs::read(p).unwrap()).collect();

    let resumed = signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resume"]);
    assert!(resumed.status.success(), "stderr: {}", stderr_of(&resumed));
    assert!(stderr_of(&resumed).contains("0 job(s) to run"), "stderr: {}", stderr_of(&resumed));

    let after: Vec<Vec<u8>> = watched.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(before, after, "resume of a finished run must not change any artifact");
}

/// Seed batches run separately must aggregate to the same rows as one
/// batch covering the union, keyed by master seed.
#[test]
fn split_seed_batches_merge_cleanly() {
    let dir = TempDir::new().unwrap();
    let base = |base_seed: u64, seeds: u32| {
        format!("kind = \"baseline\"\nN = 10\nT = 2000\nseeds = {seeds}\nbase_seed = {base_seed}\n")
    };
    let run = |name: &str, body: &str| -> PathBuf {
        let config = write_config(dir.path(), name, body);
        let out = dir.path().join(name.trim_end_matches(".toml"));
        let result = signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(result.status.success(), "stderr: {}", stderr_of(&result));
        out
    };
    let out_a = run("a.toml", &base(0, 2));
    let out_b = run("b.toml", &base(2, 2));
    let out_c = run("c.toml", &base(0, 4));

    // Rows keyed by master_seed, with the per-batch `seed` column dropped.
    let rows = |out: &Path| -> BTreeMap<String, Vec<(String, String)>> {
        let mut reader = csv::Reader::from_path(out.join("aggregate/seed_summary.csv")).unwrap();
        let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        let mut map = BTreeMap::new();
        for record in reader.records() {
            let record = record.unwrap();
            let mut key = String::new();
            let mut fields = Vec::new();
            for (header, value) in headers.iter().zip(record.iter()) {
                match header.as_str() {
                    "master_seed" => key = value.to_string(),
                    "seed" => {}
                    _ => fields.push((header.clone(), value.to_string())),
                }
            }
            map.insert(key, fields);
        }
        map
    };
    let mut merged = rows(&out_a);
    merged.extend(rows(&out_b));
    assert_eq!(merged, rows(&out_c));
}

#[test]
fn subcommands_gate_on_config_kind() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let result = signet(&["seeded", "-c", config.to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(stderr_of(&result).contains("this subcommand needs kind"), "stderr: {}", stderr_of(&result));
}

#[test]
fn multi_cell_config_is_rejected_by_run() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "sweep.toml",
        "kind = \"baseline\"\nN = 10\nT = 2000\nNLS = [1.0, 10.0]\nseeds = 1\n",
    );
    let result = signet(&["run", "-c", config.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(stderr_of(&result).contains("use `signet sweep`"), "stderr: {}", stderr_of(&result));
}

#[test]
fn missing_artifacts_fail_resume_by_name() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let out = dir.path().join("out");
    assert!(signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());

    std::fs::remove_file(out.join("cell000/seed00001/final.bin")).unwrap();
    let resumed = signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resume"]);
    assert!(!resumed.status.success());
    let stderr = stderr_of(&resumed);
    assert!(stderr.contains("missing"), "stderr: {stderr}");
    assert!(stderr.contains("cell000/seed00001/final.bin"), "stderr: {stderr}");
}

#[test]
fn changed_config_cannot_resume_into_old_output() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let out = dir.path().join("out");
    assert!(signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());

    // Same path, different physics: the digest must not match.
    let changed = write_config(dir.path(), "quick.toml", "kind = \"baseline\"\nN = 10\nT = 4000\nseeds = 2\n");
    let resumed = signet(&["run", "-c", changed.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resume"]);
    assert!(!resumed.status.success());
    assert!(stderr_of(&resumed).contains("different configuration"), "stderr: {}", stderr_of(&resumed));
}

#[test]
fn extending_seeds_resumes_only_the_new_work() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let out = dir.path().join("out");
    assert!(signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());

    // seeds is excluded from the config digest precisely so a batch can grow.
    let grown = signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resume", "--seeds", "4"]);
    assert!(grown.status.success(), "stderr: {}", stderr_of(&grown));
    assert!(stderr_of(&grown).contains("2 job(s) to run, 2 already completed"), "stderr: {}", stderr_of(&grown));
    assert!(out.join("cell000/seed00003/final.bin").is_file());

    let mut reader = csv::Reader::from_path(out.join("aggregate/seed_summary.csv")).unwrap();
    assert_eq!(reader.records().count(), 4);
}

#[test]
fn analyze_reports_groups_and_writes_tables() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let out = dir.path().join("out");
    assert!(signet(&["run", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());

    let snapshot = out.join("cell000/seed00000/final.bin");
    let tables = dir.path().join("analysis");
    let result = signet(&["analyze", snapshot.to_str().unwrap(), "--out", tables.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));
    let stdout = stdout_of(&result);
    assert!(stdout.contains("10 agents, 16 strategies"), "stdout: {stdout}");
    assert!(stdout.contains("agent shares:"), "stdout: {stdout}");
    assert!(tables.join("groups.csv").is_file());
    assert!(tables.join("agents.csv").is_file());
}

#[test]
fn diffusion_over_constructed_groups_emits_curves() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "diffuse.toml",
        "kind = \"diffusion\"\nN = 16\nseeds = 2\ntrials = 20\n\n\
         [[groups]]\ntype = \"hybrid\"\nstrategies = [\"S1R2\", \"S2R1\"]\nsize = 8\n\n\
         [[groups]]\ntype = \"homogeneous\"\nstrategy = \"S1R1\"\nsize = 8\n",
    );
    let out = dir.path().join("out");
    let result = signet(&["diffuse", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    for seed in 0..2 {
        for file in ["diffusion.csv", "curves.csv", "diffusion_groups.csv"] {
            assert!(out.join(format!("cell000/seed{seed:05}/{file}")).is_file(), "missing {file}");
        }
    }
    for file in ["diffusion.csv", "curves.csv", "diffusion_groups.csv"] {
        assert!(out.join("aggregate").join(file).is_file(), "missing aggregate {file}");
    }

    // Both constructed groups appear, with the declared sizes.
    let mut reader = csv::Reader::from_path(out.join("aggregate/diffusion_groups.csv")).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let type_col = headers.iter().position(|h| h == "group_type").unwrap();
    let size_col = headers.iter().position(|h| h == "group_size").unwrap();
    let mut seen = BTreeMap::new();
    for record in reader.records() {
        let record = record.unwrap();
        seen.insert(record[type_col].to_string(), record[size_col].to_string());
    }
    assert_eq!(seen.get("hybrid").map(String::as_str), Some("8"));
    assert_eq!(seen.get("homogeneous").map(String::as_str), Some("8"));
}

#[test]
fn naive_agents_join_a_group_and_get_logged() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "naive.toml",
        "kind = \"naive\"\nN = 8\nseeds = 2\nnaive_rounds = 2000\n\n\
         [[groups]]\ntype = \"homogeneous\"\nstrategy = \"S1R1\"\nsize = 4\n\n\
         [[groups]]\ntype = \"homogeneous\"\nstrategy = \"S2R2\"\nsize = 4\n",
    );
    let out = dir.path().join("out");
    let result = signet(&["naive", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    for file in ["naive.csv", "naive_links.csv"] {
        assert!(out.join("aggregate").join(file).is_file(), "missing aggregate {file}");
    }
    let mut reader = csv::Reader::from_path(out.join("aggregate/naive.csv")).unwrap();
    assert_eq!(reader.records().count(), 2, "one naive outcome per seed");
}

#[test]
fn shipped_preset_configs_all_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map(|e| e == "toml") != Some(true) {
            continue;
        }
        seen += 1;
        signet_cli::config::ExperimentConfig::load(&path)
            .unwrap_or_else(|e| panic!("{} does not validate: {e:#}", path.display()));
    }
    assert!(seen >= 9, "expected the preset collection, found {seen} configs");
}

#[test]
fn invalid_configs_are_rejected_with_context() {
    let dir = TempDir::new().unwrap();
    let unknown_key = write_config(dir.path(), "bad.toml", "kind = \"baseline\"\nN = 10\nwalrus = 3\n");
    let result = signet(&["run", "-c", unknown_key.to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(stderr_of(&result).contains("walrus"), "stderr: {}", stderr_of(&result));

    let bad_seeds = write_config(dir.path(), "quick.toml", QUICK_RUN);
    let result = signet(&["run", "-c", bad_seeds.to_str().unwrap(), "--seeds", "0"]);
    assert!(!result.status.success());
    assert!(stderr_of(&result).contains("--seeds must lie in"), "stderr: {}", stderr_of(&result));
}
