use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn notebridge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_notebridge"))
        .env_remove("NOTEBRIDGE_CONFIG")
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn scripted_walkthrough_exports_golden_text() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = fixtures().join("lecture_walkthrough.json");
    let sim = notebridge(tmp.path(), &["simulate", "--scenario", scenario.to_str().unwrap()]);
    assert!(sim.status.success(), "{}", stderr(&sim));
    assert!(stdout(&sim).contains("converged:  true"));
    let doc = stdout(&sim).lines().find_map(|l| l.strip_prefix("document:").map(|d| d.trim().to_owned())).unwrap();

    let out = tmp.path().join("notes.txt");
    let export = notebridge(tmp.path(), &["doc", "export", "--doc", &doc, "--out", out.to_str().unwrap()]);
    assert!(export.status.success(), "{}", stderr(&export));
    assert_eq!(std::fs::read(out).unwrap(), std::fs::read(fixtures().join("lecture_walkthrough.txt")).unwrap());
}

#[test]
fn usage_analysis_prints_seven_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let log = fixtures().join("pilot_usage.jsonl");
    let pairs = fixtures().join("pilot_pairs.csv");
    let run = notebridge(
        tmp.path(),
        &["analyze", "usage", "--log", log.to_str().unwrap(), "--pairs", pairs.to_str().unwrap(), "--format", "csv"],
    );
    assert!(run.status.success(), "{}", stderr(&run));
    let text = stdout(&run);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(
        rows,
        ["G1,4,29,21,8", "G2,5,8,4,4", "G3,5,33,25,8", "G4,5,36,24,12", "G5,28,25,20,5", "G6,6,4,2,2", "G7,7,3,1,2"]
    );
}

#[test]
fn paired_analysis_reports_each_item() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("likert.csv");
    std::fs::write(&csv, "item,pre,post\nq1,1,2\nq1,1,3\nq1,1,4\nq2,3,3\nq2,4,4\n").unwrap();
    let run = notebridge(tmp.path(), &["analyze", "paired", "--csv", csv.to_str().unwrap(), "--format", "csv"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let text = stdout(&run);
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.lines().any(|l| l.starts_with("q1,3,") && l.contains(",0.25,")), "{text}");
}

#[test]
fn unknown_role_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let run = notebridge(tmp.path(), &["user", "add", "--name", "T", "--role", "teacher"]);
    assert_eq!(run.status.code(), Some(2));
    let run = notebridge(tmp.path(), &["teleport"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn domain_errors_print_a_code_first() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x.txt");
    let run = notebridge(tmp.path(), &["doc", "export", "--doc", "d404", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).starts_with("error[no_such_document]:"), "{}", stderr(&run));

    assert!(notebridge(tmp.path(), &["user", "add", "--name", "Eli", "--role", "swd"]).status.success());
    let run = notebridge(tmp.path(), &["class", "enroll", "--class", "c9", "--user", "u1"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).starts_with("error[no_such_class]:"), "{}", stderr(&run));
}

#[test]
fn admin_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let add = notebridge(tmp.path(), &["user", "add", "--name", "Dana", "--role", "pnt"]);
    assert!(add.status.success());
    let user = stdout(&add).split('\t').next().unwrap().to_owned();
    let class = notebridge(tmp.path(), &["class", "add", "--name", "Algorithms"]);
    let class = stdout(&class).split('\t').next().unwrap().to_owned();
    assert!(notebridge(tmp.path(), &["class", "enroll", "--class", &class, "--user", &user]).status.success());
    // enrolling twice is harmless
    assert!(notebridge(tmp.path(), &["class", "enroll", "--class", &class, "--user", &user]).status.success());

    let created = notebridge(tmp.path(), &["doc", "create", "--class", &class, "--title", "Week 1", "--user", &user]);
    assert!(created.status.success(), "{}", stderr(&created));
    let doc = stdout(&created).split('\t').next().unwrap().to_owned();
    let list = notebridge(tmp.path(), &["doc", "list", "--class", &class]);
    assert!(stdout(&list).contains("Week 1"));

    assert!(notebridge(tmp.path(), &["doc", "delete", "--doc", &doc, "--user", &user]).status.success());
    let list = notebridge(tmp.path(), &["doc", "list", "--class", &class]);
    assert!(!stdout(&list).contains("Week 1"));
}

#[test]
fn config_file_supplies_the_data_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("nb.toml");
    let data = tmp.path().join("from-config");
    std::fs::write(&config, format!("data_dir = {:?}\n", data.to_str().unwrap())).unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_notebridge"))
        .env("NOTEBRIDGE_CONFIG", &config)
        .args(["class", "add", "--name", "Physics"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(data.is_dir());

    std::fs::write(&config, "colour = \"blue\"\n").unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_notebridge"))
        .env("NOTEBRIDGE_CONFIG", &config)
        .args(["class", "add", "--name", "Physics"])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).starts_with("error[invalid_config]:"));
}

#[test]
fn fuzz_simulation_reports_json() {
    let tmp = tempfile::tempdir().unwrap();
    let run = notebridge(tmp.path(), &["simulate", "--fuzz", "--clients", "3", "--ops", "40", "--seed", "8", "--json"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let report: serde_json::Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(report["converged"], true);
}
