// A plain network trained on [-10, 10] against a mapped least-squares fit
// that stays accurate far outside its training interval.

use basisnet::nn::{
    forward, init_params, train, ActivationKind, Architecture, MetricsReport, SampleSpec, Sampling, TrainConfig,
};
use basisnet::projection::{fit, predict, Basis, FitConfig};

fn cube(p: &[f64]) -> f64 {
    p[0].powi(3)
}

fn main() -> basisnet::Result<()> {
    let train_box = vec![[-10.0, 10.0]];
    let test = SampleSpec {
        domain: vec![[-15.0, 15.0]],
        rule: Sampling::Grid { per_axis: 301 },
    }
    .generate(0)?;
    let truth: Vec<f64> = (0..test.rows()).map(|r| cube(test.row(r))).collect();

    let arch = Architecture::new(vec![1, 32, 32, 1], ActivationKind::Gelu)?;
    let mut config = TrainConfig::reference_defaults(1);
    config.epochs = 1000;
    config.learning_rate = 1e-2;
    config.samples = SampleSpec {
        domain: train_box.clone(),
        rule: Sampling::UniformRandom { count: 400 },
    };
    let x = config.samples.generate(0)?;
    let y: Vec<f64> = (0..x.rows()).map(|r| cube(x.row(r))).collect();
    let net = train(&init_params(&arch, &config.init_strategy())?, &arch, &x, &y, &config)?;
    let naive = MetricsReport::compute(&truth, &forward(&net.params, &arch, &test)?.into_data())?;

    let basis = Basis::Oracle { dimension: 1 };
    let model = fit(&basis, 3, &cube, &train_box, &FitConfig::defaults(1))?;
    let mapped = MetricsReport::compute(&truth, &predict(&model, &basis, &test)?)?;

    println!("tested on [-15, 15] after training on [-10, 10]");
    println!("  plain network   MSE {:.3e}", naive.mse);
    println!("  mapped LS fit   MSE {:.3e}", mapped.mse);
    Ok(())
}
