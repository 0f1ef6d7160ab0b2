use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jade_core::bundled::write_bundled;

fn jade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jade"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_tree() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_bundled(dir.path()).unwrap();
    dir
}

fn edit(path: &Path, from: &str, to: &str) {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.contains(from), "{} lacks {from:?}", path.display());
    fs::write(path, text.replacen(from, to, 1)).unwrap();
}

#[test]
fn bundled_data_validates() {
    let o = jade(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["ok"], true);

    let dir = data_tree();
    let o = jade(&["validate", "--data-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn purple_with_three_specials_fails() {
    let dir = data_tree();
    edit(
        &dir.path().join("boards/purple.toml"),
        "kind = \"special\"\neffect = \"reverse_direction\"",
        "kind = \"color\"\nfamily = \"purple\"",
    );
    let o = jade(&["validate", "--data-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("special-count"), "{}", stdout(&o));
}

#[test]
fn dangling_transition_fails() {
    let dir = data_tree();
    edit(
        &dir.path().join("software/toy-notes.toml"),
        "to = \"save-dialog\"",
        "to = \"nowhere\"",
    );
    let o = jade(&["validate", "--data-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("nowhere"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(jade(&["simulate", "--games", "lots"]).status.code(), Some(2));
    assert_eq!(jade(&["fly"]).status.code(), Some(2));
    assert_eq!(jade(&["simulate", "--board", "teal"]).status.code(), Some(2));
    assert_eq!(jade(&["simulate", "--games", "0"]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--board", "purple", "--games", "40", "--seed", "7", "--rounds", "5"];
    let a = jade(&args);
    assert_eq!(a.status.code(), Some(0));
    let b = jade(&args);
    assert_eq!(stdout(&a), stdout(&b));
    let report: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(report["games"], 40);
    assert_eq!(report["board"], "purple");

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = jade(&[
        "simulate", "--games", "10", "--agent", "greedy", "--teams", "3", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["seat_scores"].as_array().unwrap().len(), 3);
}

#[test]
fn exports_replay_logs() {
    use jade_core::engine::*;
    let ctx = GameContext::from_data(&jade_core::bundled::DataSet::bundled(), "orange").unwrap();
    let mut cfg = GameConfig::new("orange", vec!["toy-notes".into(), "bike-share".into()]);
    cfg.end_condition = EndCondition::RoundLimit(4);
    let game = jade_core::sim::play_game(&ctx, &cfg, &[jade_core::sim::AgentPolicy::random(); 2], 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("game.ndjson");
    fs::write(&log, events_to_ndjson(game.events())).unwrap();
    let path = log.to_str().unwrap();

    let o = jade(&["export-log", "--verify", path]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), events_to_ndjson(game.events()));

    let o = jade(&["export-sheet", path]);
    assert_eq!(o.status.code(), Some(0));
    let out: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sheets: Vec<ScoreSheetDoc> = serde_json::from_value(out["sheets"].clone()).unwrap();
    let expected: Vec<_> = game.teams().iter().map(|t| game.export_score_sheet(&t.id).unwrap()).collect();
    assert_eq!(sheets, expected);
    let o = jade(&["export-sheet", "--team", "B", path]);
    let out: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(out["sheets"].as_array().unwrap().len(), 1);

    let mut lines: Vec<String> = events_to_ndjson(game.events()).lines().map(str::to_owned).collect();
    let i = lines.iter().position(|l| l.contains("DiceRolled")).unwrap();
    lines[i] = lines[i].replacen("\"value\":", "\"value\":1", 1);
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    assert_eq!(jade(&["export-log", "--verify", path]).status.code(), Some(1));
}

#[test]
fn export_reads_session_files() {
    use jade_service::*;
    let dir = tempfile::tempdir().unwrap();
    let m = SessionManager::new(jade_core::bundled::DataSet::bundled(), Some(dir.path().to_owned()));
    let mut config = jade_core::engine::GameConfig::new("lime", vec!["toy-notes".into()]);
    config.first_team_method = jade_core::engine::FirstTeamMethod::Fixed("A".into());
    let c = m
        .create(CreateSession {
            config,
            teams: jade_core::sim::default_teams(2),
        })
        .unwrap();
    m.join(&c.session_id, &c.seats[0].token, "", false).unwrap();
    m.act(&c.session_id, &c.seats[0].token, Action::Start).unwrap();
    m.act(&c.session_id, &c.seats[0].token, Action::Roll).unwrap();
    let path = jade_service::store::session_path(dir.path(), &c.session_id);
    let o = jade(&["export-log", "--verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
    let o = jade(&["export-sheet", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}
