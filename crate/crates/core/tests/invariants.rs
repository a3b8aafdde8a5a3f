use autocurriculum::es::{es_gradient, update_params, ControlVariate, EsConfig, PerturbKey};
use autocurriculum::games::{sample_game, GameConfig, GameKind, GamePayload, MatrixPayload, GameInstance};
use autocurriculum::harness::io::{checkpoint_json, parse_checkpoint, parse_payoff_csv};
use autocurriculum::population::{evaluate_meta_game, extend_meta_game, PayoffMatrix, Population, Side};
use autocurriculum::real::l2_norm;
use autocurriculum::seed::rng_from;
use autocurriculum::solvers::{
    init_params, lp_nash, matrix_exploitability, solver_forward, Arch, MetaSolverParams,
};
use autocurriculum::Execution;
use proptest::prelude::*;

fn square(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), n))
}

fn arch() -> impl Strategy<Value = Arch> {
    prop_oneof![Just(Arch::Mlp), Just(Arch::Conv1d), Just(Arch::Gru)]
}

fn params(arch: Arch, seed: u64) -> MetaSolverParams {
    init_params(arch, 6, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_output_is_a_distribution(rows in square(7), a in arch(), seed in 0u64..50) {
        let m = PayoffMatrix::from_rows(&rows).unwrap();
        let w = solver_forward(&params(a, seed), &m).unwrap().into_inner();
        prop_assert_eq!(w.len(), rows.len());
        prop_assert!(w.iter().all(|&v| v >= 0.0 && v.is_finite()));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mlp_follows_row_permutations(rows in square(6), seed in 0u64..50, shift in 0usize..6) {
        let n = rows.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let p = params(Arch::Mlp, seed);
        let base = solver_forward(&p, &PayoffMatrix::from_rows(&rows).unwrap()).unwrap().into_inner();
        let moved = solver_forward(&p, &PayoffMatrix::from_rows(&permuted).unwrap()).unwrap().into_inner();
        for (i, &pi) in perm.iter().enumerate() {
            prop_assert!((moved[i] - base[pi]).abs() < 1e-9);
        }
    }

    #[test]
    fn antisymmetrized_games_are_zero_sum_under_swap(raw in prop::collection::vec(-3.0..3.0f64, 16), seed in 0u64..100) {
        let g = GameInstance::new(GamePayload::ExternalMatrix(MatrixPayload::antisymmetrize(4, &raw).unwrap()), 0);
        let mut rng = rng_from(&[seed]);
        let (x, y) = (g.random_policy(&mut rng), g.random_policy(&mut rng));
        prop_assert!((g.payoff(&x, &y).unwrap() + g.payoff(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!(g.payoff(&x, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exploitability_is_nonnegative_and_lp_nash_reaches_zero(raw in prop::collection::vec(-3.0..3.0f64, 25)) {
        let a = MatrixPayload::antisymmetrize(5, &raw).unwrap();
        let rows: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| a.entry(i, j)).collect()).collect();
        let m = PayoffMatrix::from_rows(&rows).unwrap();
        prop_assert!(matrix_exploitability(&m, &[0.2; 5]) >= -1e-12);
        let (x, v) = lp_nash(&m).unwrap();
        prop_assert!(v.abs() < 1e-7);
        prop_assert!(matrix_exploitability(&m, &x) < 1e-7);
    }

    #[test]
    fn clipped_updates_never_move_further_than_lr_times_clip(
        g in prop::collection::vec(-100.0..100.0f64, 1..20),
        clip in 0.01..10.0f64,
        lr in 0.001..1.0f64,
    ) {
        let theta = vec![0.5; g.len()];
        let next = update_params(&theta, &g, lr, Some(clip)).unwrap();
        let step: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        prop_assert!(l2_norm(&step) <= lr * clip * (1.0 + 1e-12));
    }

    #[test]
    fn es_estimate_does_not_depend_on_execution(seed in 0u64..1000, antithetic in any::<bool>()) {
        let cfg = EsConfig { n_perturb: 12, sigma: 0.1, antithetic, control_variate: ControlVariate::ForwardFd };
        let key = PerturbKey { run_seed: seed, step: 3 };
        let f = |t: &[f64], k: usize| Ok(t.iter().map(|v| v.sin() * (k as f64 + 1.0)).sum::<f64>());
        let theta: Vec<f64> = (0..7).map(|i| i as f64 * 0.3).collect();
        let a = es_gradient(f, &theta, 3, &cfg, key, Execution::Sequential).unwrap();
        let b = es_gradient(f, &theta, 3, &cfg, key, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn incremental_meta_game_matches_full_evaluation(seed in 0u64..200, start in 1usize..4, extra in 1usize..4) {
        let game = sample_game(GameKind::Rps2d, &GameConfig::default(), seed).unwrap();
        let mut rng = rng_from(&[seed, 1]);
        let mut pop = Population::random(&game, Side::Single, start, &mut rng).unwrap();
        let prev = evaluate_meta_game(&game, &pop, Execution::Sequential).unwrap();
        for _ in 0..extra {
            pop = pop.extend(&game, game.random_policy(&mut rng)).unwrap();
        }
        let inc = extend_meta_game(&game, &prev, &pop, Execution::Parallel).unwrap();
        let full = evaluate_meta_game(&game, &pop, Execution::Sequential).unwrap();
        prop_assert_eq!(inc, full);
    }

    #[test]
    fn checkpoints_round_trip_exactly(a in arch(), seed in 0u64..1000) {
        let p = init_params(a, 5, seed).unwrap();
        prop_assert_eq!(parse_checkpoint(&checkpoint_json(&p)).unwrap(), p);
    }

    #[test]
    fn payoff_csv_is_antisymmetrized(raw in prop::collection::vec(-9.0..9.0f64, 9)) {
        let text: String = raw
            .chunks(3)
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        let g = parse_payoff_csv(&text).unwrap();
        let m = g.matrix().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((m.entry(i, j) + m.entry(j, i)).abs() < 1e-12);
                prop_assert!((m.entry(i, j) - 0.5 * (raw[i * 3 + j] - raw[j * 3 + i])).abs() < 1e-12);
            }
        }
    }
}
