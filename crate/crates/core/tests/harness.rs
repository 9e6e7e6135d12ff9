use bbai::algorithms::{tri_bbai, StopReason, TriParams};
use bbai::harness::{
    read_csv, run_experiment, run_trial, run_trial_in, run_trials, summarize, Algorithm,
    BatchedEnv, ExperimentConfig, InstanceSpec, SummaryRow, TrialRecord, TrialSettings,
    SUMMARY_FILE, TRIALS_FILE,
};
use bbai::{BaiError, BanditInstance, RewardFamily};

const B: RewardFamily = RewardFamily::Bernoulli;

fn bern(means: &[f64]) -> BanditInstance {
    BanditInstance::new(B, means.to_vec()).unwrap()
}

fn without_timing(mut records: Vec<TrialRecord>) -> Vec<TrialRecord> {
    for r in &mut records {
        r.seconds = 0.0;
    }
    records
}

#[test]
fn easy_instance_is_solved_by_every_algorithm() {
    let inst = bern(&[0.9, 0.1]);
    for algo in Algorithm::ALL {
        let correct = (0..100)
            .filter(|&seed| {
                run_trial(algo, &inst, 0.1, &TrialSettings::default(), seed)
                    .unwrap()
                    .result
                    .unwrap()
                    .correct
            })
            .count();
        assert!(correct >= 95, "{algo}: {correct}/100");
    }
}

#[test]
fn track_and_stop_is_fast_on_easy_instance() {
    let inst = bern(&[0.9, 0.1]);
    let quick = (0..100)
        .filter(|&seed| {
            let r = run_trial(Algorithm::Tas, &inst, 0.1, &TrialSettings::default(), seed)
                .unwrap()
                .result
                .unwrap();
            assert_eq!(r.samples, r.batches);
            r.samples < 200
        })
        .count();
    assert!(quick >= 95, "{quick}/100");
}

#[test]
fn error_rate_at_delta_point_one() {
    let delta: f64 = 0.1;
    let limit = delta + 3.0 * (delta * (1.0 - delta) / 1000.0).sqrt();
    let cases = [
        (Algorithm::Tri, InstanceSpec::Explicit(vec![0.9, 0.1])),
        (Algorithm::Opt, InstanceSpec::Explicit(vec![0.9, 0.1])),
        (Algorithm::Tas, InstanceSpec::Explicit(vec![0.9, 0.1])),
        (Algorithm::Opt, InstanceSpec::Uniform10),
    ];
    for (algo, spec) in cases {
        let config = ExperimentConfig::new(algo, spec.clone(), vec![delta], 1000);
        let records = run_trials(&config, delta).unwrap();
        let errors = records.iter().filter(|r| !r.correct).count() as f64 / 1000.0;
        assert!(errors <= limit, "{algo} on {spec}: error rate {errors}");
    }
}

#[test]
fn conservation_for_every_algorithm() {
    let inst = bern(&[0.6, 0.5, 0.4, 0.35]);
    for algo in Algorithm::ALL {
        for seed in 0..10 {
            let env = BatchedEnv::new(inst.clone(), seed).with_pull_log();
            let (trial, env) = run_trial_in(algo, 0.05, &TrialSettings::default(), env).unwrap();
            let r = trial.result.unwrap();
            assert_eq!(r.samples, env.pull_log().unwrap().len() as u64);
            assert_eq!(r.samples, env.stats().pulls().iter().sum::<u64>());
            assert_eq!(r.batches, env.batch_count());
            assert_eq!((trial.samples, trial.batches), (r.samples, r.batches));
        }
    }
}

#[test]
fn tri_batches_are_bounded() {
    let inst = bern(&[0.5, 0.45, 0.4]);
    let params = TriParams::new(1e-4, 1.001, 3).unwrap().with_l2(10_000);
    for seed in 0..50 {
        let mut env = BatchedEnv::new(inst.clone(), seed);
        let r = tri_bbai(&mut env, &params).unwrap();
        assert!(r.batches <= 2 + params.max_stage2_rounds);
        if r.stop_reason == StopReason::Stage3Chernoff && r.diagnostics.stage2_rounds == 2 {
            assert_eq!(r.batches, 3);
        }
    }
}

#[test]
fn trial_replay_is_exact() {
    let config = ExperimentConfig::new(Algorithm::Opt, InstanceSpec::Normal10, vec![1e-3], 20);
    let a = without_timing(run_trials(&config, 1e-3).unwrap());
    let b = without_timing(run_trials(&config, 1e-3).unwrap());
    assert_eq!(a, b);
    let mut other = config.clone();
    other.base_seed = 1;
    assert_ne!(a, without_timing(run_trials(&other, 1e-3).unwrap()));
}

#[test]
fn parallel_runs_match_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(Algorithm::Tri, InstanceSpec::Uniform10, vec![1e-2, 1e-4], 64);
    config.base_seed = 42;
    let mut csvs = Vec::new();
    for parallelism in [1, 8] {
        config.parallelism = parallelism;
        config.output_path = dir.path().join(format!("p{parallelism}"));
        run_experiment(&config).unwrap();
        let mut rows: Vec<TrialRecord> = read_csv(&config.output_path.join(TRIALS_FILE)).unwrap();
        rows.sort_by(|x, y| (x.delta, x.trial).partial_cmp(&(y.delta, y.trial)).unwrap());
        csvs.push(without_timing(rows));
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn summary_recomputes_from_trial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(Algorithm::Opt, InstanceSpec::Uniform10, vec![0.1, 1e-3], 30);
    config.output_path = dir.path().to_path_buf();
    let returned = run_experiment(&config).unwrap();
    let trials: Vec<TrialRecord> = read_csv(&dir.path().join(TRIALS_FILE)).unwrap();
    let written: Vec<SummaryRow> = read_csv(&dir.path().join(SUMMARY_FILE)).unwrap();
    let recomputed = summarize(&trials);
    assert_eq!(written.len(), 2);
    for rows in [&returned, &recomputed] {
        for (a, b) in written.iter().zip(rows.iter()) {
            assert_eq!((a.algo, &a.instance, a.delta, a.trials), (b.algo, &b.instance, b.delta, b.trials));
            for (x, y) in [
                (a.mean_samples, b.mean_samples),
                (a.std_samples, b.std_samples),
                (a.mean_batches, b.mean_batches),
                (a.std_batches, b.std_batches),
                (a.recall, b.recall),
            ] {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }
}

#[test]
fn csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(Algorithm::Tas, InstanceSpec::Explicit(vec![0.8, 0.2]), vec![0.1], 3);
    config.output_path = dir.path().to_path_buf();
    run_experiment(&config).unwrap();
    let trials = std::fs::read_to_string(dir.path().join(TRIALS_FILE)).unwrap();
    let summary = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert!(trials.starts_with(
        "algo,family,instance,delta,trial,seed,returned_arm,correct,samples,batches,stop_reason,seconds\n"
    ));
    assert!(summary.starts_with(
        "algo,instance,delta,trials,mean_samples,std_samples,mean_batches,std_batches,recall\n"
    ));
    assert!(!trials.contains('\r') && !summary.contains('\r'));
    assert_eq!(trials.lines().count(), 4);
    assert!(trials.lines().nth(1).unwrap().starts_with("tas,bernoulli,means=0.8;0.2,0.1,0,"));
}

#[test]
fn io_errors_carry_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut config = ExperimentConfig::new(Algorithm::Tri, InstanceSpec::Uniform10, vec![0.1], 2);
    config.output_path = blocker.join("out");
    let err = run_experiment(&config).unwrap_err();
    assert!(matches!(err, BaiError::Io { .. }));
    assert!(err.to_string().contains("file"));
}

#[test]
fn forced_elimination_hook() {
    let inst = bern(&[0.5, 0.3, 0.3]);
    let on = TrialSettings {
        force_elimination: true,
        ..TrialSettings::default()
    };
    let mut fallbacks = 0;
    for seed in 0..100 {
        let hooked = run_trial(Algorithm::Opt, &inst, 0.1, &on, seed).unwrap().result.unwrap();
        if hooked.stop_reason == StopReason::Stage4OptFallback {
            fallbacks += 1;
        }
        let control = run_trial(Algorithm::Opt, &inst, 0.1, &TrialSettings::default(), seed)
            .unwrap()
            .result
            .unwrap();
        assert!(matches!(
            control.stop_reason,
            StopReason::Stage4OptElimination | StopReason::Stage3Chernoff
        ));
    }
    assert!(fallbacks >= 95);

    let two = bern(&[0.9, 0.1]);
    let r = run_trial(Algorithm::Opt, &two, 0.1, &on, 3).unwrap().result.unwrap();
    if r.stop_reason != StopReason::Stage3Chernoff {
        assert_eq!(r.returned_arm, 1);
    }

    for algo in [Algorithm::Tri, Algorithm::Tas] {
        assert!(matches!(run_trial(algo, &inst, 0.1, &on, 0), Err(BaiError::Config(_))));
    }
}

#[test]
fn pull_cap_aborts_are_recorded() {
    let settings = TrialSettings {
        pull_cap: Some(1000),
        ..TrialSettings::default()
    };
    let run = run_trial(Algorithm::Opt, &bern(&[0.5, 0.4, 0.3]), 0.1, &settings, 0).unwrap();
    assert!(run.result.is_none());
    assert!(run.abort.unwrap().contains("cap"));
    assert!(run.samples <= 1000);

    let mut config = ExperimentConfig::new(Algorithm::Opt, InstanceSpec::Explicit(vec![0.5, 0.4, 0.3]), vec![0.1], 2);
    config.pull_cap = Some(1000);
    let records = run_trials(&config, 0.1).unwrap();
    assert!(records.iter().all(|r| r.stop_reason == "aborted" && !r.correct && r.returned_arm.is_none()));
}

#[test]
fn gaussian_opt_needs_bounded_rewards() {
    let inst = BanditInstance::new(RewardFamily::GaussianUnitVariance, vec![0.0, -0.1]).unwrap();
    let run = run_trial(Algorithm::Opt, &inst, 0.1, &TrialSettings::default(), 0).unwrap();
    let abort = run.abort.expect("Stage IV is reached");
    assert!(abort.contains("bounded"), "{abort}");
    let tas = run_trial(Algorithm::Tas, &inst, 0.1, &TrialSettings::default(), 0).unwrap();
    assert!(tas.result.is_some());
}

#[test]
fn config_round_trips_through_toml() {
    let text = r#"
        algorithm = "opt"
        instance = "means=0.7;0.2"
        deltas = [0.1, 0.01]
        trials = 5
        output_path = "out"
        force_elimination = true
    "#;
    let config: ExperimentConfig = toml::from_str(text).unwrap();
    assert_eq!(config.algorithm, Algorithm::Opt);
    assert_eq!(config.instance, InstanceSpec::Explicit(vec![0.7, 0.2]));
    assert_eq!(config.alpha, 1.001);
    assert_eq!(config.parallelism, 1);
    assert!(config.validate().is_ok());
}
