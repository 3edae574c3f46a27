use std::fs;

use grail_core::bank::{load_bank, policy_file_name, save_bank, train_bank, PolicyBank, MANIFEST};
use grail_core::demogen::{gen_grid_demos, gen_reach_demos, GridRegime};
use grail_core::envs::{Domain, GridSpec, InteractionCounter, ReachSpec};
use grail_core::learners::{LearnerHyper, LearnerKind};
use grail_core::recognizer::infer_goal;
use grail_core::rng::derive_stream;
use grail_core::scoring::MetricKind;
use grail_core::types::{DemoSet, GoalId, Trajectory};
use grail_core::Error;

fn grid_goals() -> Vec<GoalId> {
    vec![GoalId::new(0, "g_7_1"), GoalId::new(1, "g_7_7")]
}

fn grid_demos(regime: GridRegime) -> DemoSet {
    let spec = GridSpec::default();
    let counter = InteractionCounter::new();
    DemoSet {
        per_goal: grid_goals()
            .into_iter()
            .map(|g| {
                let d = gen_grid_demos(&spec, &g, regime, 4, &mut derive_stream(3, &g.label), &counter).unwrap();
                (g, d)
            })
            .collect(),
    }
}

fn reach_demos(goals: &[GoalId]) -> DemoSet {
    let spec = ReachSpec::default();
    let counter = InteractionCounter::new();
    DemoSet {
        per_goal: goals
            .iter()
            .map(|g| {
                let d = gen_reach_demos(&spec, g, None, 3, &mut derive_stream(3, &g.label), &counter).unwrap();
                (g.clone(), d)
            })
            .collect(),
    }
}

fn quick_hyper() -> LearnerHyper {
    let mut hp = LearnerHyper::default();
    hp.bc.epochs = 5;
    hp.qlearn.episodes = 300;
    hp.ppo.iterations = 3;
    hp.gail.rounds = 3;
    hp.airl.rounds = 3;
    hp
}

fn probe_prefixes(demos: &DemoSet) -> Vec<&Trajectory> {
    demos.per_goal.iter().flat_map(|(_, d)| d.iter()).collect()
}

fn scores(bank: &PolicyBank, demos: &DemoSet, metric: MetricKind) -> Vec<Vec<f64>> {
    probe_prefixes(demos)
        .into_iter()
        .map(|t| {
            let r = infer_goal(&t.steps[..5], bank, &metric, &derive_stream(9, "s")).unwrap();
            r.per_goal_scores.iter().map(|g| g.score).collect()
        })
        .collect()
}

fn trained(domain: &Domain, goals: &[GoalId], demos: &DemoSet, kind: LearnerKind) -> PolicyBank {
    let d = kind.uses_demos().then_some(demos);
    train_bank(domain, goals, d, kind, &quick_hyper(), 17, false, &InteractionCounter::new()).unwrap()
}

#[test]
fn round_trip_preserves_scores_for_every_learner() {
    let grid = Domain::Grid(GridSpec::default());
    let gd = grid_demos(GridRegime::Biased { bias: None });
    for kind in LearnerKind::ALL {
        let bank = trained(&grid, &grid_goals(), &gd, kind);
        let dir = tempfile::tempdir().unwrap();
        save_bank(&bank, dir.path()).unwrap();
        let back = load_bank(dir.path()).unwrap();
        assert_eq!(back.learner, kind);
        assert_eq!(back.seed, 17);
        assert_eq!(back.hyperparams, bank.hyperparams);
        for (a, b) in bank.entries.iter().zip(&back.entries) {
            assert_eq!(a.policy, b.policy, "{kind:?}");
            assert_eq!(a.goal, b.goal);
            assert_eq!(a.env_calls, b.env_calls);
        }
        for m in [MetricKind::mse(), MetricKind::kl(), MetricKind::w1()] {
            assert_eq!(scores(&bank, &gd, m), scores(&back, &gd, m), "{kind:?} {m}");
        }
    }

    let reach = Domain::Reach(ReachSpec::default());
    let goals = vec![GoalId::new(0, "r_0"), GoalId::new(1, "r_1")];
    let rd = reach_demos(&goals);
    for kind in [LearnerKind::Bc, LearnerKind::Ppo, LearnerKind::Gail] {
        let bank = trained(&reach, &goals, &rd, kind);
        let dir = tempfile::tempdir().unwrap();
        save_bank(&bank, dir.path()).unwrap();
        let back = load_bank(dir.path()).unwrap();
        for m in [MetricKind::mse(), MetricKind::w1()] {
            assert_eq!(scores(&bank, &rd, m), scores(&back, &rd, m), "{kind:?} {m}");
        }
    }
}

fn saved_bc_bank() -> (tempfile::TempDir, PolicyBank) {
    let bank = trained(
        &Domain::Grid(GridSpec::default()),
        &grid_goals(),
        &grid_demos(GridRegime::Optimal),
        LearnerKind::Bc,
    );
    let dir = tempfile::tempdir().unwrap();
    save_bank(&bank, dir.path()).unwrap();
    (dir, bank)
}

#[test]
fn truncated_file_is_corrupt() {
    let (dir, _) = saved_bc_bank();
    let path = dir.path().join(policy_file_name(LearnerKind::Bc, "g_7_7"));
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    match load_bank(dir.path()) {
        Err(Error::Corrupt { file, .. }) => assert!(file.contains("g_7_7")),
        other => panic!("expected corruption, got {other:?}"),
    }
}

#[test]
fn missing_goal_file_names_the_goal() {
    let (dir, _) = saved_bc_bank();
    fs::remove_file(dir.path().join(policy_file_name(LearnerKind::Bc, "g_7_1"))).unwrap();
    match load_bank(dir.path()) {
        Err(Error::MissingGoalFile { goal, .. }) => assert_eq!(goal, "g_7_1"),
        other => panic!("expected missing goal file, got {other:?}"),
    }
}

#[test]
fn unknown_format_tag_is_rejected() {
    let (dir, _) = saved_bc_bank();
    let file = policy_file_name(LearnerKind::Bc, "g_7_1");
    let path = dir.path().join(&file);
    let mut body: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    body["format"] = "sparse-v9".into();
    let bytes = serde_json::to_vec(&body).unwrap();
    fs::write(&path, &bytes).unwrap();

    let manifest_path = dir.path().join(MANIFEST);
    let mut manifest: serde_json::Value = serde_json::from_slice(&fs::read(&manifest_path).unwrap()).unwrap();
    use sha2::Digest;
    manifest["goals"][0]["sha256"] = hex::encode(sha2::Sha256::digest(&bytes)).into();
    fs::write(&manifest_path, serde_json::to_vec(&manifest).unwrap()).unwrap();

    assert!(matches!(load_bank(dir.path()), Err(Error::UnknownFormat(tag)) if tag == "sparse-v9"));
}

#[test]
fn parallel_training_matches_sequential() {
    let domain = Domain::Grid(GridSpec::default());
    let demos = grid_demos(GridRegime::Biased { bias: None });
    for kind in [LearnerKind::Bc, LearnerKind::Qlearn, LearnerKind::Gail] {
        let d = kind.uses_demos().then_some(&demos);
        let hp = quick_hyper();
        let c1 = InteractionCounter::new();
        let c2 = InteractionCounter::new();
        let seq = train_bank(&domain, &grid_goals(), d, kind, &hp, 5, false, &c1).unwrap();
        let par = train_bank(&domain, &grid_goals(), d, kind, &hp, 5, true, &c2).unwrap();
        assert_eq!(c1.get(), c2.get());
        for (a, b) in seq.entries.iter().zip(&par.entries) {
            assert_eq!(a.policy, b.policy);
        }
    }
}

#[test]
fn bc_needs_no_environment() {
    let counter = InteractionCounter::new();
    let demos = grid_demos(GridRegime::Optimal);
    let bank = train_bank(
        &Domain::Grid(GridSpec::default()),
        &grid_goals(),
        Some(&demos),
        LearnerKind::Bc,
        &LearnerHyper::default(),
        0,
        false,
        &counter,
    )
    .unwrap();
    assert_eq!(counter.get(), 0);
    assert_eq!(bank.total_env_calls(), 0);
}

#[test]
fn training_error_names_the_goal() {
    let demos = grid_demos(GridRegime::Optimal);
    let goals = vec![GoalId::new(0, "g_7_1"), GoalId::new(1, "g_7_4")];
    let err = train_bank(
        &Domain::Grid(GridSpec::default()),
        &goals,
        Some(&demos),
        LearnerKind::Qlearn,
        &quick_hyper(),
        0,
        false,
        &InteractionCounter::new(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::GoalTraining { ref goal, .. } if goal == "g_7_4"), "{err}");
}
