//! Exit codes and stage ordering of the `aisbench` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

/// The shipped config with generated inputs, labels and output under `dir`.
fn write_config(dir: &Path, archive: &Path, extra: &str) -> PathBuf {
    let f = fixtures();
    let text = format!(
        r#"seed = 20241120
sizes = [5, 10]
probes_per_query = 5
probe_pool_size = 5
{extra}
[paths]
raw_ais = "{d}/generated/raw_ais.csv"
emissions = "{d}/generated/emissions.csv"
fleet = "{d}/generated/fleet.csv"
ports = "{f}/ports.csv"
zones = "{f}/zones.csv"
queries = "{f}/queries.csv"
expert_labels = "{d}/expert_labels.csv"
archive = "{a}"
out_dir = "{d}/out"

[transport]
mode = "replay"
model = "scripted-oracle"
"#,
        d = dir.display(),
        f = f.display(),
        a = archive.display(),
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn aisbench(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aisbench")).arg("--config").arg(config).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&aisbench(&dir.path().join("absent.toml"), &["score"])), 2);
    let cfg = write_config(dir.path(), &fixtures().join("replay/archive.jsonl"), "[sampling]\ntemperature = 5.0\n");
    let out = aisbench(&cfg, &["ingest"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("temperature"));
    let cfg = write_config(dir.path(), &fixtures().join("replay/archive.jsonl"), "");
    assert_eq!(code(&aisbench(&cfg, &["--methods", "zsa9", "score"])), 2);
}

#[test]
fn stages_in_order_and_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let shipped = fixtures().join("replay/archive.jsonl");
    let cfg = write_config(d, &shipped, "");

    // Nothing ingested yet.
    let out = aisbench(&cfg, &["ground-truth"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));

    for stage in ["synth", "ingest", "label-experts", "ground-truth"] {
        let out = aisbench(&cfg, &[stage]);
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }

    let out = aisbench(&cfg, &["run", "--dry-run"]);
    assert_eq!(code(&out), 0);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.starts_with("method,dataset_size,instances,prompt_tokens,overflows,requests"));
    assert_eq!(table.lines().count(), 1 + 4 * 2);
    assert!(!d.join("out/runs/answers.csv").exists());

    // Scoring before running.
    assert_eq!(code(&aisbench(&cfg, &["score"])), 3);

    // A replay archive without the needed prompts.
    let sparse = d.join("sparse.jsonl");
    let first = std::fs::read_to_string(&shipped).unwrap().lines().next().unwrap().to_string();
    std::fs::write(&sparse, format!("{first}\n")).unwrap();
    let sparse_dir = d.join("sparse-run");
    std::fs::create_dir_all(&sparse_dir).unwrap();
    let sparse_cfg = write_config(&sparse_dir, &sparse, "");
    for stage in ["synth", "ingest", "label-experts", "ground-truth"] {
        assert_eq!(code(&aisbench(&sparse_cfg, &[stage])), 0);
    }
    assert_eq!(code(&aisbench(&sparse_cfg, &["--methods", "zsa1", "run"])), 4);

    // Only size 5 answered, then a report over 5 and 10 has gaps.
    for stage in ["run", "score"] {
        let out = aisbench(&cfg, &["--sizes", "5", stage]);
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(code(&aisbench(&cfg, &["report"])), 6);
    assert!(d.join("out/report/gaps.csv").exists());
    assert_eq!(code(&aisbench(&cfg, &["--sizes", "5", "report"])), 0);
}
