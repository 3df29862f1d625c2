//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits zero unless `ACCEPTANCE_STRICT=1`, so known gaps are reported without failing the
//! workspace test run.

use std::time::{Duration, Instant};

use ironmask_core::aux::tmto_cost;
use ironmask_core::ecc::{all_codewords, decode, design_distance, is_signed_permutation, sample_codeword};
use ironmask_core::ironmask::{authenticate_detailed, enroll, recover, sketch, DefenseParams};
use ironmask_core::plra::model::restart_cost_ratio;
use ironmask_core::plra::{
    expected_runtime, run_attack, sampler_success_prob, svd_null_solve, AttackConfig, RateModel, SolverKind,
};
use ironmask_core::sphere::{angle, dot, haar_orthogonal, naive_rotation, perturb_at_angle, random_unit};
use ironmask_core::{CodeParams, RandomStream, RotationMatrix};
use ironmask_lab::defense::{nearest_codeword_angle, recovery_rate};
use ironmask_lab::experiment::{run_experiment, ExperimentSpec, Scenario, Summary};
use ironmask_lab::planted::PlantedInstance;
use ironmask_lab::rates::{estimate_rates, simulate_sampler, RatesConfig};
use rand::seq::SliceRandom;
use rand::Rng;

const SEEDS: [u64; 5] = [1, 7, 42, 1234, 987_654_321];
const DAY: f64 = 86_400.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

fn criterion_1() -> Outcome {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for &(n, alpha) in &[(64usize, 4usize), (512, 16)] {
        let params = CodeParams::new(n, alpha).unwrap();
        let limit = design_distance(&params) / 2.0;
        let mut rng = RandomStream::new(101, n as u64);
        for i in 0..1000 {
            let w = random_unit(n, &mut rng).unwrap();
            let (sk, _) = sketch(&w, &params, &mut rng).unwrap();
            let beta = limit * (i as f64 + 0.5) / 1000.0;
            let q = perturb_at_angle(&w, beta, &mut rng).unwrap();
            let back = recover(&q, &sk).unwrap();
            let err = back.iter().zip(w.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(err);
            if err > 1e-6 {
                failures += 1;
            }
        }
    }
    outcome(failures == 0, format!("{failures} failures in 2000 trials, max entry error {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let cases = [
        ("k=511 l=1", 511usize, 511usize, 23.4, 0.1),
        ("two-sketch k=511", 511, 2, 32.0, 1.0),
        ("t'=2 k=220", 220, 2, 11.35, 0.1),
        ("t'=280 k=280", 280, 280, 12.83, 0.1),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, k, t_prime, target, tol) in cases {
        let v = -sampler_success_prob(512, 16, k, t_prime).unwrap().log2_p;
        pass &= (v - target).abs() <= tol;
        parts.push(format!("{label}: {v:.3} (target {target} ± {tol})"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let svd = expected_runtime(&RateModel::noiseless(23.4f64.exp2(), 0.041, 1.0)) / DAY;
    let lsa = expected_runtime(&RateModel::noiseless(11.35f64.exp2(), 0.102, 1.0 / 1538.5)) / DAY;
    let pass = (svd / 5.3 - 1.0).abs() <= 0.05 && (lsa / 4.8 - 1.0).abs() <= 0.05;
    outcome(pass, format!("SVD {svd:.2} days (5.3 ± 5%), LSA {lsa:.2} days (4.8 ± 5%)"))
}

fn end_to_end(solver: SolverKind, sketches: usize, k: usize) -> (u64, f64) {
    let mut attack = AttackConfig::new(solver, k, 10f64.to_radians());
    attack.max_outer_iterations = 1_000_000;
    let mut spec = ExperimentSpec::new(Scenario::Noiseless, 64, 4, attack);
    spec.num_sketches = sketches;
    spec.trials = 50;
    spec.seed = 404;
    spec.end_to_end = true;
    let report = run_experiment(&spec).unwrap();
    let Summary::EndToEnd(e) = &report.summary else {
        unreachable!()
    };
    (e.success.successes, report.metadata.median_trial_seconds.unwrap_or(f64::INFINITY))
}

fn criterion_4() -> Outcome {
    let (svd_ok, svd_median) = end_to_end(SolverKind::Svd, 63, 63);
    let (lsa_ok, lsa_median) = end_to_end(SolverKind::Lsa, 3, 40);
    let pass = svd_ok >= 48 && lsa_ok >= 48 && svd_median < 60.0 && lsa_median < 60.0;
    outcome(
        pass,
        format!(
            "SVD {svd_ok}/50 (median {svd_median:.3} s), LSA {lsa_ok}/50 (median {lsa_median:.3} s); need >= 48/50 and < 60 s"
        ),
    )
}

fn criterion_5() -> Outcome {
    let params = CodeParams::new(512, 16).unwrap();
    let mut worst = 1.0f64;
    for t in 0..100 {
        let mut rng = RandomStream::new(505, t);
        let mut inst = PlantedInstance::new(params, 511, 0.0, &mut rng).unwrap();
        let sys = inst.system(SolverKind::Svd, 511, &mut rng).unwrap();
        let out = svd_null_solve(&sys).unwrap();
        worst = worst.min(dot(&out, &inst.w).abs());
    }
    let svd_ok = worst >= 1.0 - 1e-6;

    let mut cfg = RatesConfig::new(params, 281, SolverKind::Lsa, 280, 10f64.to_radians());
    cfg.systems = 20;
    cfg.restarts_per_system = 1000;
    cfg.seed = 505;
    let est = estimate_rates(&cfg).unwrap();
    let rate = est.p_k.estimate;
    let target = 1.0 / 740.7;
    let lsa_ok = rate >= target / 3.0 && rate <= target * 3.0;
    outcome(
        svd_ok && lsa_ok,
        format!(
            "SVD min |<out,w>| = {worst:.9} over 100 (need >= 1-1e-6); LSA accept {}/{} = 1/{:.1} (target 1/740.7 within 3x)",
            est.p_k.successes,
            est.p_k.trials,
            1.0 / rate
        ),
    )
}

fn criterion_6() -> Outcome {
    let params = CodeParams::new(512, 16).unwrap();
    let mut svd = RatesConfig::new(params, 531, SolverKind::Svd, 531, 40f64.to_radians());
    svd.theta_prime = 8.7f64.to_radians();
    // 100 systems leave a binomial spread of about 4pp around the mean; 500 keep it under 2pp
    svd.systems = 500;
    svd.seed = 606;
    let s = estimate_rates(&svd).unwrap();
    let svd_ok = (s.p_k.estimate - 0.78).abs() <= 0.10;

    let mut lsa = RatesConfig::new(params, 3, SolverKind::Lsa, 280, 30f64.to_radians());
    lsa.theta_prime = 14f64.to_radians();
    lsa.systems = 20;
    lsa.restarts_per_system = 1000;
    lsa.seed = 606;
    let l = estimate_rates(&lsa).unwrap();
    let joint = l.p_joint.estimate;
    let target = 1.0 / 392.0;
    let lsa_ok = joint >= target / 3.0 && joint <= target * 3.0;
    outcome(
        svd_ok && lsa_ok,
        format!(
            "SVD 8.7° p_k = {}/{} (p_f {:.2}; target 0.78 ± 0.10); LSA 14° p_k·p_f = {}/{} = 1/{:.1} (target 1/392 within 3x)",
            s.p_k.successes,
            s.p_k.trials,
            s.p_f.estimate,
            l.p_joint.successes,
            l.p_joint.trials,
            1.0 / joint
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &(alpha, theta_a, target, tol) in &[(16usize, 48.3f64, 0.56, 0.05), (8, 54.3, 0.95, 0.05), (4, 59.4, 1.0, 0.0)] {
        let params = CodeParams::new(512, alpha).unwrap();
        let p = recovery_rate(&params, theta_a.to_radians(), 0.0, 2000, 707, 1).unwrap();
        pass &= (p.estimate - target).abs() <= tol;
        parts.push(format!("α={alpha} p_r {}/{} = {:.4} (target {target} ± {tol})", p.successes, p.trials, p.estimate));
    }
    for &(alpha, target) in &[(16usize, 63.8f64), (8, 70.1)] {
        let params = CodeParams::new(512, alpha).unwrap();
        let t = nearest_codeword_angle(&params, 2000, 708, 1).unwrap().mean.to_degrees();
        pass &= (t - target).abs() <= 1.0;
        parts.push(format!("α={alpha} θ_r {t:.2}° (target {target}° ± 1°)"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let mut spec = ExperimentSpec::new(
        Scenario::Rotation,
        512,
        16,
        AttackConfig::new(SolverKind::Svd, 511, 30f64.to_radians()),
    );
    spec.rotation_m = 8;
    spec.trials = 200;
    spec.seed = 808;
    let report = run_experiment(&spec).unwrap();
    let Summary::Rotation(r) = &report.summary else {
        unreachable!()
    };
    let rate = r.success.estimate;
    outcome(
        (rate - 0.60).abs() <= 0.10,
        format!(
            "{}/200 = {:.1}% recovered, {} returned a vector (target 60 ± 10%)",
            r.success.successes,
            100.0 * rate,
            r.returned.successes
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut spec = ExperimentSpec::new(Scenario::Tmto, 32, 4, AttackConfig::new(SolverKind::Svd, 31, 0.5));
    spec.trials = 20;
    spec.seed = 909;
    let report = run_experiment(&spec).unwrap();
    let Summary::Tmto(t) = &report.summary else {
        unreachable!()
    };
    let cost = tmto_cost(512, 16, 1, 32).unwrap();
    let pass = t.found.successes >= 19
        && (cost.entries_log2 - 57.8).abs() <= 0.2
        && (cost.additions_log2 - 60.8).abs() <= 0.2;
    outcome(
        pass,
        format!(
            "true codeword found in {}/20 runs (need >= 19); entries 2^{:.2} (57.8 ± 0.2), additions 2^{:.2} (60.8 ± 0.2), storage {:.2e} bytes",
            t.found.successes, cost.entries_log2, cost.additions_log2, cost.storage_bytes
        ),
    )
}

fn preserves_code(t: &RotationMatrix, params: &CodeParams) -> bool {
    all_codewords(params).iter().all(|c| {
        let tc = t.apply(&c.dense());
        let d = decode(&tc, params).dense();
        tc.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-9)
    })
}

fn criterion_10() -> Outcome {
    let params = CodeParams::new(6, 3).unwrap();
    let mut rng = RandomStream::new(1010, 0);
    let mut disagreements = 0;
    let (mut positives, mut negatives) = (0, 0);
    for _ in 0..120 {
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let mut entries = vec![0.0; 36];
        for (i, &p) in perm.iter().enumerate() {
            entries[i * 6 + p] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let sp = RotationMatrix::from_row_major(6, &entries).unwrap();
        let h = haar_orthogonal(6, &mut rng);
        let a = random_unit(6, &mut rng).unwrap();
        let b = random_unit(6, &mut rng).unwrap();
        let tilted = naive_rotation(&a, &b).unwrap().compose(&sp);
        for m in [&sp, &h, &tilted] {
            let structural = is_signed_permutation(m, 1e-9);
            if structural != preserves_code(m, &params) {
                disagreements += 1;
            }
            if structural {
                positives += 1;
            } else {
                negatives += 1;
            }
        }
    }
    outcome(
        disagreements == 0 && positives >= 100 && negatives >= 100,
        format!("{} matrices ({positives} signed permutations, {negatives} others), {disagreements} disagreements", positives + negatives),
    )
}

fn criterion_11() -> Outcome {
    let mut failed = Vec::new();
    for seed in SEEDS {
        let mut rng = RandomStream::new(seed, 1111);
        // isometry
        let m = haar_orthogonal(32, &mut rng);
        let v = random_unit(32, &mut rng).unwrap();
        let w = random_unit(32, &mut rng).unwrap();
        if (angle(&v, &w).unwrap() - angle(&m.apply(&v), &m.apply(&w)).unwrap()).abs() > 1e-8 {
            failed.push(format!("isometry/{seed}"));
        }
        // decoding radius
        let params = CodeParams::new(512, 16).unwrap();
        let half = design_distance(&params) / 2.0;
        for _ in 0..200 {
            let c = sample_codeword(&params, &mut rng);
            let p = perturb_at_angle(&c.to_template().unwrap(), half * 0.999, &mut rng).unwrap();
            if decode(&p, &params) != c {
                failed.push(format!("decoding radius/{seed}"));
                break;
            }
        }
        // salting overhead
        let small = CodeParams::new(32, 4).unwrap();
        let w = random_unit(32, &mut rng).unwrap();
        let defense = DefenseParams {
            n_fake: 3,
            ..DefenseParams::NONE
        };
        let record = enroll(&w, &small, &defense, 1, &mut rng).unwrap();
        let auth = authenticate_detailed(&w, &record).unwrap();
        if !auth.accepted || auth.decode_calls != 4 {
            failed.push(format!("salting/{seed}"));
        }
        // antipodal closure and determinism
        let params = CodeParams::new(64, 4).unwrap();
        let w = random_unit(64, &mut rng).unwrap();
        let sks: Vec<_> = (0..3).map(|_| sketch(&w, &params, &mut rng).unwrap().0).collect();
        let mut cfg = AttackConfig::new(SolverKind::Lsa, 40, 10f64.to_radians());
        cfg.seed = seed;
        let a = run_attack(&sks, &cfg).unwrap();
        let b = run_attack(&sks, &cfg).unwrap();
        if a.trace != b.trace {
            failed.push(format!("determinism/{seed}"));
        }
        match &a.recovered {
            Some(r) if r.unsigned_angle_to(&w).unwrap() <= 1e-4 => {}
            _ => failed.push(format!("antipodal closure/{seed}")),
        }
        // restart optimality
        let p_out = rng.gen_range(1e-4..0.99);
        if (2..20).any(|t| restart_cost_ratio(p_out, t) < restart_cost_ratio(p_out, 1)) {
            failed.push(format!("t_th/{seed}"));
        }
        // sampler: analytic bound and simulation
        let odds = sampler_success_prob(64, 4, 40, 2).unwrap();
        let trials = (1024.0 / odds.p()).ceil() as u64;
        let sim = (simulate_sampler(64, 4, 40, 2, trials, &mut rng) as f64 / trials as f64).log2();
        if odds.log2_p < odds.log2_lower_bound || (sim - odds.log2_p).abs() > 0.3 {
            failed.push(format!("sampler/{seed}"));
        }
    }
    let detail = if failed.is_empty() {
        "spot checks over 5 seeds clean; full suites run as the crates' integration tests".to_string()
    } else {
        format!("failed: {}", failed.join(", "))
    };
    outcome(failed.is_empty(), detail)
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 11] = [
        ("round-trip correctness", 120, criterion_1),
        ("sampler model vs analytic table", 1, criterion_2),
        ("expected-runtime reproduction", 1, criterion_3),
        ("end-to-end recovery at n=64", 50 * 60, criterion_4),
        ("planted solver checks at n=512", 2 * 3600, criterion_5),
        ("noise robustness spot checks", 3 * 3600, criterion_6),
        ("extra-noise defense table", 600, criterion_7),
        ("rotation attack", 1800, criterion_8),
        ("TMTO desk run and cost model", 300, criterion_9),
        ("code-preserving maps", 60, criterion_10),
        ("property suites", 600, criterion_11),
    ];
    let mut passed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let out = run();
        let elapsed = started.elapsed();
        let in_time = within_budget(elapsed, Duration::from_secs(*budget));
        let pass = out.pass && in_time;
        if pass {
            passed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {} [{:.1} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64(),
            budget
        );
    }
    println!("{passed}/{} criteria passed", criteria.len());
    if std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") && passed < criteria.len() {
        std::process::exit(1);
    }
}
