use qexp::agents::Algorithm;
use qexp::harness::*;
use std::fs;
use std::path::Path;
use std::process::Command;

fn small(extra: &str) -> String {
    format!(
        "env = \"pendulum\"\nagent = \"tawac\"\ntotal_steps = 600\neval_interval = 200\nseeds = [0]\n\
         [policy]\nfamily = \"q_gaussian\"\nq = 0.0\n\
         [hyperparameters]\nhidden = [16, 16]\nbatch_size = 16\n{extra}"
    )
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn without_seconds(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn one_row_per_evaluation() {
    let c = cfg(&small(""));
    let run = train_run(&c, 0, None, |_| true).unwrap();
    assert_eq!(run.records.len() as u64, c.total_steps / c.eval_interval);
    let steps: Vec<u64> = run.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![200, 400, 600]);
    assert!(run.records.iter().all(|r| r.ret.is_finite() && r.seed == 0));
}

#[test]
fn smoke_run_has_total_over_interval_rows() {
    let c = cfg(&small("").replace("total_steps = 600\neval_interval = 200", "total_steps = 1000"));
    assert_eq!(c.eval_interval, 1000);
    let dir = tempfile::tempdir().unwrap();
    let runs = run_train(&c, "", dir.path()).unwrap();
    assert_eq!(runs[0].len(), 1);
    assert_eq!(read_eval_csv(&dir.path().join("seed-0/eval.csv")).unwrap().len(), 1);
}

#[test]
fn same_seed_same_csv() {
    let text = small("");
    let c = cfg(&text);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_train(&c, &text, a.path()).unwrap();
    run_train(&c, &text, b.path()).unwrap();
    let (x, y) = (without_seconds(&a.path().join("seed-0/eval.csv")), without_seconds(&b.path().join("seed-0/eval.csv")));
    assert_eq!(x, y);
    assert_eq!(x.lines().count(), 4);
    assert_eq!(fs::read_to_string(a.path().join("seed-0/config.toml")).unwrap(), text);
    assert_eq!(
        fs::read(a.path().join("seed-0/checkpoint.txt")).unwrap(),
        fs::read(b.path().join("seed-0/checkpoint.txt")).unwrap()
    );
}

#[test]
fn seeds_differ() {
    let c = cfg(&small("").replace("seeds = [0]", "seeds = [0, 1]"));
    let dir = tempfile::tempdir().unwrap();
    let runs = run_train(&c, "", dir.path()).unwrap();
    assert_ne!(runs[0].iter().map(|r| r.ret).collect::<Vec<_>>(), runs[1].iter().map(|r| r.ret).collect::<Vec<_>>());
}

#[test]
fn evaluation_leaves_parameters_alone() {
    let c = cfg(&small(""));
    let run = train_run(&c, 0, None, |_| true).unwrap();
    let before: Vec<Vec<f64>> = run.agent.networks().iter().map(|(_, p)| p.as_slice().to_vec()).collect();
    let mut rng = qexp::Rng::seed_from(5);
    for policy in [EvalPolicy::Mean, EvalPolicy::Sample] {
        evaluate(&run.agent, c.env, 2, policy, &mut rng).unwrap();
    }
    let after: Vec<Vec<f64>> = run.agent.networks().iter().map(|(_, p)| p.as_slice().to_vec()).collect();
    assert_eq!(before, after);
}

#[test]
fn early_stop_callback() {
    let c = cfg(&small(""));
    let run = train_run(&c, 0, None, |r| r.step < 400).unwrap();
    assert_eq!(run.records.len(), 2);
}

#[test]
fn checkpoint_round_trip_reproduces_the_actor() {
    let text = small("");
    let c = cfg(&text);
    let dir = tempfile::tempdir().unwrap();
    run_train(&c, &text, dir.path()).unwrap();
    let trained = train_run(&c, 0, None, |_| true).unwrap().agent;
    let loaded = load_agent(&c, &dir.path().join("seed-0/checkpoint.txt")).unwrap();
    let obs = [0.3, -0.2, 0.1];
    assert_eq!(trained.act_greedy(&obs).unwrap(), loaded.act_greedy(&obs).unwrap());
}

#[test]
fn offline_run_on_generated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = behavior_dataset(qexp::envs::EnvKind::Pendulum, None, 500, 3).unwrap();
    assert_eq!(data.transitions.len(), 500);
    let path = dir.path().join("d.bin");
    data.write(fs::File::create(&path).unwrap()).unwrap();
    for alg in [Algorithm::Tawac, Algorithm::Awac, Algorithm::Iql, Algorithm::Inac, Algorithm::Td3bc] {
        let text = small("batch_size = 32\n")
            .replace("batch_size = 16\n", "")
            .replace("agent = \"tawac\"", &format!("agent = \"{alg}\"\nmode = \"offline\"\ndataset = {:?}", path.to_str().unwrap()));
        let run = train_run(&cfg(&text), 0, load_dataset(&cfg(&text)).unwrap().as_ref(), |_| true).unwrap();
        assert_eq!(run.records.len(), 3, "{alg}");
        assert_eq!(run.agent.updates(), 600);
    }
}

#[test]
fn dataset_env_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    let data = behavior_dataset(qexp::envs::EnvKind::MountainCarCost, None, 50, 0).unwrap();
    data.write(fs::File::create(&path).unwrap()).unwrap();
    let text = small("").replace("agent = \"tawac\"", &format!("agent = \"awac\"\nmode = \"offline\"\ndataset = {:?}", path.to_str().unwrap()));
    assert!(matches!(load_dataset(&cfg(&text)), Err(qexp::Error::Config(_))));
}

#[test]
fn sweep_writes_every_point_and_reruns_the_best() {
    let text = small(
        "[sweep]\ncritic_lr = [1e-3, 1e-4]\nactor_lr_multiplier = [1.0]\ntau = [0.1]\nsweep_seeds = [10]\nbest_seeds = [0, 1]\nsweep_eval_interval = 200\nbest_eval_interval = 200\n",
    )
    .replace("total_steps = 600\neval_interval = 200", "total_steps = 400\neval_interval = 200\neval_episodes = 1");
    let c = cfg(&text);
    let dir = tempfile::tempdir().unwrap();
    let report = run_sweep(&c, dir.path()).unwrap();
    assert_eq!(report.points.len(), 2);
    let best = report.best.unwrap();
    assert_eq!(Some(best), select_best(&report.points.iter().map(|p| p.auc).collect::<Vec<_>>()));
    assert_eq!(report.best_runs.len(), 2);
    for i in 0..2 {
        assert!(dir.path().join(format!("point-{i}/seed-10/eval.csv")).is_file());
    }
    for s in [0, 1] {
        assert_eq!(read_eval_csv(&dir.path().join(format!("best/seed-{s}/eval.csv"))).unwrap().len(), 2);
    }
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let recorded = auc(&[read_eval_csv(&dir.path().join(format!("point-{best}/seed-10/eval.csv"))).unwrap()]);
    assert_eq!(recorded, report.points[best].auc);
}

#[test]
fn aggregate_across_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    for (seed, rets) in [(0u64, [1.0, 4.0]), (1, [3.0, 8.0])] {
        let d = seed_dir(dir.path(), seed);
        fs::create_dir_all(&d).unwrap();
        let recs: Vec<EvalRecord> = rets
            .iter()
            .enumerate()
            .map(|(i, &ret)| EvalRecord { step: 100 * (i as u64 + 1), seed, ret, seconds: 0.0 })
            .collect();
        write_eval_csv(&d.join("eval.csv"), &recs).unwrap();
    }
    let runs: Vec<_> = find_eval_csvs(dir.path()).unwrap().iter().map(|p| read_eval_csv(p).unwrap()).collect();
    let rows = aggregate(&runs);
    assert_eq!((rows[0].mean, rows[0].stderr, rows[0].n), (2.0, 1.0, 2));
    assert_eq!((rows[1].mean, rows[1].stderr), (6.0, 2.0));
    let smooth = plot_rows(&rows, 10);
    assert_eq!(smooth[1].mean, 4.0);
}

fn qexp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qexp")).args(args).output().unwrap()
}

#[test]
fn cli_sample_prints_n_rows() {
    let out = qexp(&["sample", "--family", "q_gaussian", "--q", "0.5", "--n", "10", "--seed", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text, String::from_utf8(qexp(&["sample", "--family", "q_gaussian", "--q", "0.5", "--n", "10", "--seed", "4"]).stdout).unwrap());
}

#[test]
fn cli_exit_codes() {
    assert_eq!(qexp(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(qexp(&["train", "--env", "cartpole"]).status.code(), Some(1));
    assert_eq!(qexp(&["aggregate", "/nonexistent/path"]).status.code(), Some(3));
    assert_eq!(qexp(&["sample", "--family", "beta", "--alpha", "0.5"]).status.code(), Some(3));
    assert_eq!(qexp(&["--help"]).status.code(), Some(0));
}

#[test]
fn cli_validate_passes() {
    let out = qexp(&["validate", "--samples", "2000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("check,statistic,threshold,pass"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn cli_train_then_dataset_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.toml");
    fs::write(&cfg_path, small("")).unwrap();
    let run = dir.path().join("run");
    let out = qexp(&["train", "--config", cfg_path.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(run.join("seed-0/config.toml")).unwrap(), small(""));
    let data = dir.path().join("d.bin");
    let ckpt = run.join("seed-0/checkpoint.txt");
    let out = qexp(&["gen-dataset", "--checkpoint", ckpt.to_str().unwrap(), "--transitions", "300", "--out", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = qexp::agents::Dataset::read(fs::File::open(&data).unwrap()).unwrap();
    assert_eq!(d.transitions.len(), 300);
    assert!(d.transitions.iter().all(|t| t.behavior_log_prob.is_some_and(f64::is_finite)));
    let summary = qexp(&["aggregate", run.to_str().unwrap()]);
    assert_eq!(String::from_utf8(summary.stdout).unwrap().lines().count(), 4);
}
