use raf::init::{self, InitConfig};
use raf::linalg;
use raf::metrics;
use raf::sensing::{self, GaussianModel};

fn init_error(n: usize, m: usize, trial: u64) -> f64 {
    let model = GaussianModel::<f64>::sample(m, n, 10_000 + trial).unwrap();
    let x = sensing::sample_signal::<f64>(n, 20_000 + trial);
    let inst = sensing::measure(model, x, 0.0, 0).unwrap();
    let cfg = InitConfig {
        seed: trial,
        ..InitConfig::default()
    };
    let out = init::initialize(&inst, &cfg).unwrap();
    metrics::distance(&out.z0, &inst.x_true).unwrap() / linalg::norm(&inst.x_true)
}

#[test]
fn initialization_improves_with_more_measurements() {
    let n = 200;
    let trials = 50;
    let mean = |ratio: usize| {
        (0..trials)
            .map(|t| init_error(n, ratio * n, t))
            .sum::<f64>()
            / trials as f64
    };
    let (e2, e4, e10) = (mean(2), mean(4), mean(10));
    assert!(e4 <= e2, "m=4n ({e4}) worse than m=2n ({e2})");
    assert!(e10 < e2, "m=10n ({e10}) not below m=2n ({e2})");
}

#[test]
fn early_exit_agrees_with_full_run() {
    let model = GaussianModel::<f64>::sample(600, 40, 5).unwrap();
    let x = sensing::sample_signal::<f64>(40, 6);
    let inst = sensing::measure(model, x, 0.0, 0).unwrap();
    let full = init::initialize(
        &inst,
        &InitConfig {
            power_iters: 2000,
            ..InitConfig::default()
        },
    )
    .unwrap();
    let early = init::initialize(
        &inst,
        &InitConfig {
            power_iters: 2000,
            eig_tol: 1e-12,
            ..InitConfig::default()
        },
    )
    .unwrap();
    assert!(early.iterations_used < full.iterations_used);
    assert!(metrics::distance(&early.z0, &full.z0).unwrap() < 1e-6 * linalg::norm(&full.z0));
}
