// Trains a small tanh network on sin(3x) and reports held-out accuracy.

use basisnet::nn::{
    forward, init_params, train, ActivationKind, Architecture, MetricsReport, SampleSpec, Sampling, TrainConfig,
};

fn main() -> basisnet::Result<()> {
    let arch = Architecture::new(vec![1, 32, 32, 1], ActivationKind::Tanh)?;
    let mut config = TrainConfig::reference_defaults(1);
    config.epochs = 1500;
    config.learning_rate = 5e-3;
    config.samples = SampleSpec::reference(1, Sampling::UniformRandom { count: 256 });

    let x = config.samples.generate(config.seed)?;
    let y: Vec<f64> = x.data().iter().map(|v| (3.0 * v).sin()).collect();
    let start = init_params(&arch, &config.init_strategy())?;
    let out = train(&start, &arch, &x, &y, &config)?;
    for (epoch, loss) in out.loss_history.iter().enumerate().step_by(300) {
        println!("epoch {epoch:>5}  loss {loss:.3e}");
    }

    let grid = SampleSpec::reference(1, Sampling::Grid { per_axis: 501 }).generate(0)?;
    let truth: Vec<f64> = grid.data().iter().map(|v| (3.0 * v).sin()).collect();
    let pred = forward(&out.params, &arch, &grid)?.into_data();
    let m = MetricsReport::compute(&truth, &pred)?;
    println!("held-out MSE {:.3e}, R^2 {:.6}", m.mse, m.r_squared.unwrap_or(f64::NAN));
    Ok(())
}
