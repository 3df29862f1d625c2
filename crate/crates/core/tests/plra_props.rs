mod common;

use common::{check, SEEDS};
use ironmask_core::ecc::Codeword;
use ironmask_core::ironmask::sketch;
use ironmask_core::plra::{
    run_attack, sampler_success_prob, svd_null_solve, AttackConfig, EquationSampler, SolverKind,
};
use ironmask_core::plra::model::restart_cost_ratio;
use ironmask_core::sphere::{angle, dot, random_unit};
use ironmask_core::{CodeParams, RandomStream, SketchRecord, Template};
use proptest::prelude::*;

fn sketches(w: &Template, params: &CodeParams, count: usize, rng: &mut RandomStream) -> (Vec<SketchRecord>, Vec<Codeword>) {
    (0..count).map(|_| sketch(w, params, rng).unwrap()).unzip()
}

#[test]
fn correct_systems_yield_the_template() {
    check(4, any::<u64>(), |seed| {
        let params = CodeParams::new(64, 4).unwrap();
        let mut rng = RandomStream::new(seed, 20);
        let w = random_unit(64, &mut rng).unwrap();
        let (sks, cs) = sketches(&w, &params, 63, &mut rng);
        let sampler = EquationSampler::new(&sks, SolverKind::Svd).unwrap();
        let sys = sampler
            .sample_filtered(63, &mut rng, |src| cs[src.sketch].is_zero_at(src.row))
            .unwrap();
        prop_assert!(sys.is_correct(&cs));
        let out = svd_null_solve(&sys).unwrap();
        prop_assert!(dot(&out, &w).abs() >= 1.0 - 1e-6);
        Ok(())
    });
}

#[test]
fn sampler_odds_respect_their_bounds() {
    for &n in &[16usize, 64, 512] {
        for &alpha in &[1usize, 2, 4, 8, 16] {
            if alpha * 4 > n {
                continue;
            }
            for &t_prime in &[1usize, 2, 3, 8, n - 1] {
                for k in [1, n / 4, n / 2, n - 1] {
                    if k > t_prime * (n - alpha) || k == 0 {
                        continue;
                    }
                    let odds = sampler_success_prob(n, alpha, k, t_prime).unwrap();
                    assert!(
                        odds.log2_p >= odds.log2_lower_bound - 1e-9,
                        "n {n} alpha {alpha} t' {t_prime} k {k}: {odds:?}"
                    );
                    if t_prime > 2 && k == n - 1 {
                        let floor = -2.0 * alpha as f64 * std::f64::consts::LOG2_E;
                        assert!(odds.log2_p >= floor - 1e-9, "n {n} alpha {alpha} t' {t_prime}: {odds:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn accepted_outputs_are_antipodal_to_the_template() {
    let params = CodeParams::new(64, 4).unwrap();
    for seed in SEEDS {
        let mut rng = RandomStream::new(seed, 21);
        let w = random_unit(64, &mut rng).unwrap();
        let (sks, _) = sketches(&w, &params, 3, &mut rng);
        let mut cfg = AttackConfig::new(SolverKind::Lsa, 40, 10f64.to_radians());
        cfg.seed = seed;
        let out = run_attack(&sks, &cfg).unwrap();
        assert!(out.accepted, "seed {seed}");
        let r = out.recovered.unwrap();
        let a = angle(&r, &w).unwrap();
        assert!(a <= 1e-4 || std::f64::consts::PI - a <= 1e-4, "seed {seed}: {a}");
    }
}

#[test]
fn single_restart_is_optimal() {
    check(200, 1e-6f64..0.999, |p_out| {
        let best = restart_cost_ratio(p_out, 1);
        for t in 2..50 {
            prop_assert!(restart_cost_ratio(p_out, t) >= best);
        }
        Ok(())
    });
}

#[test]
fn attacks_replay_under_a_seed() {
    let params = CodeParams::new(32, 2).unwrap();
    for seed in SEEDS {
        let mut rng = RandomStream::new(seed, 22);
        let w = random_unit(32, &mut rng).unwrap();
        let (sks, _) = sketches(&w, &params, 3, &mut rng);
        let mut cfg = AttackConfig::new(SolverKind::Lsa, 20, 10f64.to_radians());
        cfg.seed = seed;
        let a = run_attack(&sks, &cfg).unwrap();
        let b = run_attack(&sks, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.recovered, b.recovered);
        assert_eq!(a.outer_iterations, b.outer_iterations);
    }
}
