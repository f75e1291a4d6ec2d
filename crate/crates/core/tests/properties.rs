//! Cross-module properties of the betting game, the mixture and the
//! hindsight solver.

use betting_core::audit::{self, trace_to_csv, Player, Strategy, TraceOptions};
use betting_core::features::FeatureSpec;
use betting_core::game::{GameState, Round};
use betting_core::hindsight::{self, MleOptions};
use betting_core::logistic::{log_capital, Theta};
use betting_core::mixture::{MixtureState, PriorSpec};
use betting_core::sim::{ForecasterModel, Observation, RealityModel, Scenario};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn honest(schedule: Vec<f64>, seed: u64) -> Vec<Observation> {
    let n = schedule.len();
    Scenario {
        forecaster: ForecasterModel::FromData(schedule),
        reality: RealityModel::Honest,
        n,
        seed,
    }
    .generate()
    .unwrap()
}

fn schedule(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.05..0.95)).collect()
}

fn final_log_capital(strategy: &Strategy, obs: &[Observation]) -> f64 {
    let mut player = Player::new(strategy.clone()).unwrap();
    for o in obs {
        player.play(*o, None).unwrap();
    }
    player.log_capital()
}

fn rounds_for(features: &FeatureSpec, obs: &[Observation]) -> Vec<Round> {
    let mut history = Vec::new();
    obs.iter()
        .map(|o| {
            let c = features.build(&history, o.p, None).unwrap();
            history.push(o.x);
            Round::new(o.p, c, o.x).unwrap()
        })
        .collect()
}

#[test]
fn expected_capital_under_the_null_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let n = rng.gen_range(1..=8usize);
        let ps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let cs: Vec<[f64; 2]> = (0..n).map(|_| [1.0, rng.gen_range(-2.0..2.0)]).collect();
        let prior = PriorSpec::uniform(vec![(-1.0, 1.5), (-0.5, 0.5)], 9).unwrap();
        let mut expected = 0.0;
        let mut joint_total = 0.0;
        for s in 0..1usize << n {
            let mut mix = MixtureState::new(&prior).unwrap();
            let mut state = GameState::new(2).unwrap();
            let mut prob = 1.0;
            for i in 0..n {
                let x = s >> i & 1 == 1;
                let r = Round::from_slice(ps[i], &cs[i], x).unwrap();
                let nu = mix.step(&r).unwrap();
                state.play_round(&r, nu).unwrap();
                prob *= if x { ps[i] } else { 1.0 - ps[i] };
            }
            expected += prob * state.capital();
            joint_total += prob * mix.log_capital().exp();
        }
        assert!((expected - 1.0).abs() < 1e-8, "{expected}");
        assert!((joint_total - 1.0).abs() < 1e-8);
    }
}

#[test]
fn honest_capital_is_a_martingale_across_replications() {
    let strategy = Strategy::preset("strategy-1", None).unwrap();
    let reps = 10_000;
    let finals: Vec<f64> = (0..reps)
        .map(|seed| {
            let obs = Scenario {
                forecaster: ForecasterModel::Constant(0.3),
                reality: RealityModel::Honest,
                n: 20,
                seed,
            }
            .generate()
            .unwrap();
            final_log_capital(&strategy, &obs).exp()
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / reps as f64;
    let var = finals.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let se = (var / reps as f64).sqrt();
    assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn grid_refinement_agrees_with_fine_grid() {
    let obs = honest(schedule(11, 200), 3);
    let features = FeatureSpec::preset("strategy-1").unwrap();
    let at = |m| {
        let prior = PriorSpec::unit_box(&features, Some(m)).unwrap();
        final_log_capital(&Strategy::new(features.clone(), prior).unwrap(), &obs)
    };
    assert!((at(65) - at(2001)).abs() < 1e-6);
}

#[test]
fn doubling_nodes_barely_moves_the_capital() {
    let obs = honest(schedule(12, 1000), 4);
    for (name, coarse) in [("strategy-1", 65), ("strategy-2", 33)] {
        let features = FeatureSpec::preset(name).unwrap();
        let at = |m| {
            let prior = PriorSpec::unit_box(&features, Some(m)).unwrap();
            final_log_capital(&Strategy::new(features.clone(), prior).unwrap(), &obs)
        };
        let (a, b) = (at(coarse), at(2 * coarse));
        assert!((a - b).abs() < 1e-4, "{name}: {a} vs {b}");
    }
}

#[test]
fn hindsight_beats_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let features = FeatureSpec::preset("strategy-3").unwrap();
    for seed in 0..10 {
        let obs = Scenario::preset("case-3", 300, seed).unwrap().generate().unwrap();
        let mut obs = obs;
        for (o, p) in obs.iter_mut().zip(schedule(100 + seed, 300)) {
            o.p = p;
        }
        let rounds = rounds_for(&features, &obs);
        let mle = hindsight::mle(&rounds, &Theta::zeros(3), &MleOptions::default()).unwrap();
        assert!(mle.converged);
        for _ in 0..100 {
            let th: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v = log_capital(&Theta::from_slice(&th).unwrap(), &rounds).unwrap();
            assert!(v <= mle.log_capital + 1e-9);
        }
    }
}

#[test]
fn hindsight_tracks_quadratic_approximation_on_honest_data() {
    let features = FeatureSpec::preset("strategy-1").unwrap();
    let mut inside = 0;
    let seeds = 50;
    for seed in 0..seeds {
        let obs = honest(schedule(500 + seed, 10_000), seed);
        let rounds = rounds_for(&features, &obs);
        let mut state = GameState::new(1).unwrap();
        for r in &rounds {
            state.play_round(r, 0.0).unwrap();
        }
        let mle = hindsight::mle(&rounds, &Theta::zeros(1), &MleOptions::default()).unwrap();
        let svs = state.diagnostics().svs.unwrap();
        if svs > 0.0 && (0.8..=1.25).contains(&(mle.log_capital / (0.5 * svs))) {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.9 * seeds as f64, "{inside}/{seeds}");
}

#[test]
fn summary_agrees_with_final_trace_row() {
    let obs = Scenario::preset("case-1", 300, 9).unwrap().generate().unwrap();
    let strategy = Strategy::preset("strategy-2", Some(17)).unwrap();
    let run = audit::run(&strategy, &obs, None, TraceOptions { every: 25 }).unwrap();
    let summary = run.summary();
    let csv = trace_to_csv(&run.trace);
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let last = rows.last().unwrap();
    let num = |s: &str| s.parse::<f64>().unwrap();
    assert_eq!(rows.len(), summary.rounds);
    assert_eq!(num(last[4]), summary.log_k_pi);
    assert_eq!(num(last[5]), summary.log_k_mle.unwrap());
    assert_eq!(num(last[6]), summary.svs_half.unwrap());
    assert_eq!(num(last[7]), summary.log_det_v.unwrap());
    assert_eq!(num(last[8]), summary.info_ratio.unwrap());
    let max = rows.iter().map(|r| num(r[4])).fold(0.0, f64::max);
    assert_eq!(max, summary.max_log_k_pi);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_is_bitwise_deterministic(seed in any::<u64>(), n in 1usize..60) {
        let obs = honest(schedule(seed, n), seed);
        let strategy = Strategy::preset("strategy-3", Some(5)).unwrap();
        let a = audit::run(&strategy, &obs, None, TraceOptions { every: 7 }).unwrap();
        let b = audit::run(&strategy, &obs, None, TraceOptions { every: 7 }).unwrap();
        prop_assert_eq!(trace_to_csv(&a.trace), trace_to_csv(&b.trace));
        prop_assert_eq!(a.player.state(), b.player.state());
    }

    #[test]
    fn played_capital_stays_positive_and_information_grows(seed in any::<u64>(), n in 1usize..80) {
        let obs = honest(schedule(seed ^ 0x5eed, n), seed);
        let mut player = Player::new(Strategy::preset("strategy-2", Some(9)).unwrap()).unwrap();
        let mut prev = player.state().info.clone();
        for o in &obs {
            player.play(*o, None).unwrap();
            prop_assert!(player.state().capital() > 0.0);
            let inc = &player.state().info - &prev;
            let eig = inc.clone().symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e >= -1e-12));
            prop_assert!(eig.iter().filter(|&&e| e > 1e-12).count() <= 1);
            prev = player.state().info.clone();
        }
        prop_assert!((player.log_capital() - player.mixture().log_capital()).abs() < 1e-9);
    }

    #[test]
    fn scenarios_are_seed_deterministic(seed in any::<u64>(), n in 1usize..200) {
        for name in ["case-1", "case-2", "case-3", "honest"] {
            let a = Scenario::preset(name, n, seed).unwrap().generate().unwrap();
            let b = Scenario::preset(name, n, seed).unwrap().generate().unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
