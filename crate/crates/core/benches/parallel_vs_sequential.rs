use autocurriculum::games::{GameConfig, GameKind};
use autocurriculum::harness::{Profile, Settings};
use autocurriculum::solvers::{init_params, Arch, MetaSolver};
use autocurriculum::train::{evaluate, held_out_games};
use autocurriculum::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

/// PSRO evaluation of one solver over a batch of GoS games.
fn evaluation(c: &mut Criterion) {
    let s = Settings::defaults(Profile::Desk, GameKind::Gos);
    let game = GameConfig { gos_dim: 20, ..s.game_config() };
    let games = held_out_games(GameKind::Gos, &game, 0, 8).unwrap();
    let solver = MetaSolver::Learned(init_params(Arch::Mlp, 16, 0).unwrap());
    let psro = s.psro();
    let mut group = c.benchmark_group("evaluate_gos20_x8");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate(&solver, &games, &psro, false, exec).unwrap())
        });
    }
    group.finish();
}

/// One ES meta-step (all perturbations times all games).
fn es_step(c: &mut Criterion) {
    let mut s = Settings::defaults(Profile::Desk, GameKind::Gos);
    s.meta_training_steps = 1;
    s.es_perturbations = 4;
    s.meta_batch_size = 2;
    let cfg = s.train_config();
    let mut group = c.benchmark_group("es_meta_step");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| autocurriculum::train::train(&cfg, 0, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, evaluation, es_step);
criterion_main!(benches);
