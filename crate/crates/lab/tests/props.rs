use ironmask_core::plra::{sampler_success_prob, AttackConfig, SolverKind};
use ironmask_core::RandomStream;
use ironmask_lab::experiment::{run_experiment, ExperimentSpec, Scenario};
use ironmask_lab::rates::simulate_sampler;

const SEEDS: [u64; 5] = [1, 7, 42, 1234, 987_654_321];

fn lsa_spec(seed: u64) -> ExperimentSpec {
    let mut attack = AttackConfig::new(SolverKind::Lsa, 40, 10f64.to_radians());
    attack.t_th = 20;
    let mut spec = ExperimentSpec::new(Scenario::Noiseless, 64, 4, attack);
    spec.num_sketches = 3;
    spec.trials = 6;
    spec.seed = seed;
    spec
}

#[test]
fn identical_specs_give_identical_csv() {
    for seed in SEEDS {
        let spec = lsa_spec(seed);
        let a = run_experiment(&spec).unwrap();
        let mut parallel = spec.clone();
        parallel.workers = 3;
        let b = run_experiment(&parallel).unwrap();
        assert_eq!(a.trials_csv().unwrap(), b.trials_csv().unwrap(), "seed {seed}");
        let mut rot = ExperimentSpec::new(Scenario::Rotation, 32, 4, AttackConfig::new(SolverKind::Svd, 31, 0.5));
        rot.rotation_m = 4;
        rot.trials = 3;
        rot.seed = seed;
        assert_eq!(
            run_experiment(&rot).unwrap().trials_csv().unwrap(),
            run_experiment(&rot).unwrap().trials_csv().unwrap()
        );
    }
}

#[test]
fn simulated_sampler_matches_analytic() {
    let grid = [
        (32usize, 2usize, 31usize, 31usize),
        (32, 2, 20, 2),
        (64, 4, 63, 63),
        (64, 4, 40, 2),
        (64, 4, 40, 3),
        (128, 4, 100, 100),
        (128, 8, 60, 2),
    ];
    for seed in SEEDS {
        let mut rng = RandomStream::new(seed, 0);
        for &(n, alpha, k, t_prime) in &grid {
            let odds = sampler_success_prob(n, alpha, k, t_prime).unwrap();
            // well above the 2^6/p_s floor so 0.3 bits is a many-sigma band
            let trials = (1024.0 / odds.p()).ceil() as u64;
            let hits = simulate_sampler(n, alpha, k, t_prime, trials, &mut rng);
            let sim = -(hits as f64 / trials as f64).log2();
            assert!(
                (sim + odds.log2_p).abs() <= 0.3,
                "seed {seed} ({n},{alpha},{k},{t_prime}): {sim} vs {}",
                -odds.log2_p
            );
        }
    }
}

#[test]
fn reports_satisfy_the_runtime_identity() {
    for seed in SEEDS {
        let report = run_experiment(&lsa_spec(seed)).unwrap();
        assert!(report.t_all_gap() <= 1e-9, "seed {seed}: {}", report.t_all_gap());
        let mut svd = ExperimentSpec::new(Scenario::Noiseless, 64, 4, AttackConfig::new(SolverKind::Svd, 63, 0.2));
        svd.num_sketches = 63;
        svd.trials = 4;
        svd.seed = seed;
        assert!(run_experiment(&svd).unwrap().t_all_gap() <= 1e-9);
    }
}
