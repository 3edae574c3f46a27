use std::fs;
use std::path::Path;
use std::process::Command;

use grail_core::bank::{save_bank, train_bank};
use grail_core::envs::InteractionCounter;
use grail_core::learners::{LearnerHyper, LearnerKind};
use grail_harness::config::GoalPreset;
use grail_harness::experiment::{generate_demos, train_banks, write_demos};
use grail_harness::heatmap::{export_visit_heatmap, visit_rows};
use grail_harness::{ExperimentConfig, Regime};

fn grail(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_grail")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "goals = \"grid2\"\nlearnerz = [\"bc\"]\n").unwrap();
    let (code, _, err) = grail(&["eval", "--config", s(&cfg)]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = grail(&["train", "--config", s(&dir.path().join("missing.toml"))]);
    assert_eq!(code, 1);
}

#[test]
fn infer_on_reach_bank() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        demos_per_goal: 4,
        n_train: 3,
        n_test: 1,
        learners: vec![LearnerKind::Bc],
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::reach_defaults()
    };
    let (train, test) = generate_demos(&cfg, 0).unwrap();
    write_demos(dir.path(), &train, &test).unwrap();
    let bank = train_banks(&cfg, 0, &train, &InteractionCounter::new()).unwrap().remove(0);
    let bank_dir = dir.path().join("bank");
    save_bank(&bank, &bank_dir).unwrap();
    let traj = dir.path().join("test.jsonl");

    let (code, out, err) = grail(&["infer", "--bank", s(&bank_dir), "--traj", s(&traj), "--fraction", "0.5", "--index", "2"]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(report["per_goal_scores"].as_array().unwrap().len(), 4);
    assert_eq!(report["env_calls"], 0);

    let (code, _, err) = grail(&["infer", "--bank", s(&bank_dir), "--traj", s(&traj), "--fraction", "0.5", "--metric", "kl"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = grail(&["infer", "--bank", s(&bank_dir), "--traj", s(&traj), "--fraction", "1.5"]);
    assert_eq!(code, 1);
    let (code, _, _) = grail(&["heatmap", "--bank", s(&bank_dir), "--out", s(&dir.path().join("h.csv"))]);
    assert_eq!(code, 2);
}

#[test]
fn q_learning_visit_heatmap() {
    let cfg = ExperimentConfig {
        goals: GoalPreset::Grid2,
        regime: Regime::Optimal,
        ..ExperimentConfig::default()
    };
    let hp = LearnerHyper::default();
    let bank = train_bank(&cfg.domain(), &cfg.goal_ids(), None, LearnerKind::Qlearn, &hp, 0, false, &InteractionCounter::new()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("visits.csv");
    let rows = export_visit_heatmap(&bank, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("goal,x,y,dir,visits\n"));
    assert_eq!(text.lines().count(), rows.len() + 1);

    let budget = (hp.qlearn.episodes * cfg.grid.horizon) as u64;
    for goal in ["g_7_1", "g_7_7"] {
        let cells: Vec<_> = rows.iter().filter(|r| r.goal == goal && r.dir == "all").collect();
        let per_state: u64 = rows.iter().filter(|r| r.goal == goal && r.dir != "all").map(|r| r.visits).sum();
        assert_eq!(cells.iter().map(|r| r.visits).sum::<u64>(), budget);
        assert_eq!(per_state, budget);
        assert!(cells.iter().any(|r| (r.x, r.y) == (1, 4) && r.visits > 0));
    }
    let half = |north: bool| -> u64 {
        rows.iter()
            .filter(|r| r.goal == "g_7_1" && r.dir == "all" && (r.y <= 4) == north)
            .map(|r| r.visits)
            .sum()
    };
    assert!(half(true) > half(false), "north {} south {}", half(true), half(false));
}

#[test]
fn heatmap_rejects_non_q_bank() {
    let cfg = ExperimentConfig {
        demos_per_goal: 3,
        n_train: 2,
        n_test: 1,
        ..ExperimentConfig::default()
    };
    let (train, _) = generate_demos(&cfg, 0).unwrap();
    let bank = train_bank(&cfg.domain(), &cfg.goal_ids(), Some(&train), LearnerKind::Bc, &cfg.hyper, 0, false, &InteractionCounter::new()).unwrap();
    assert!(visit_rows(&bank).is_err());
}

#[test]
fn gen_demos_writes_split_and_per_goal_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!("goals = \"grid2\"\nseeds = 2\nout_dir = {:?}\n[regime]\nkind = \"suboptimal\"\n", s(&out)),
    )
    .unwrap();
    let (code, stdout, err) = grail(&["gen-demos", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(stdout.lines().count(), 4);
    for seed in 0..2 {
        let demos = out.join(format!("seed_{seed}/demos"));
        for goal in ["g_7_1", "g_7_7"] {
            let text = fs::read_to_string(demos.join(format!("grid_{goal}_suboptimal_{seed}.jsonl"))).unwrap();
            assert_eq!(text.lines().count(), 10);
        }
        assert_eq!(fs::read_to_string(demos.join("test.jsonl")).unwrap().lines().count(), 6);
    }
}
