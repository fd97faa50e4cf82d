// Pretrains a small chain of monomial nets, saves it and loads it back.
//
// Real libraries use `PretrainOptions::defaults` ([d, 1024, 1], thousands of
// epochs); this one is shrunk to run in seconds.

use basisnet::basis::{load_library, progressive_pretrain_with, save_library, PretrainOptions};
use basisnet::nn::{ActivationKind, Architecture, SampleSpec, Sampling};

fn main() -> basisnet::Result<()> {
    let mut opts = PretrainOptions::defaults(1)?;
    opts.arch = Architecture::single_hidden(1, 64, ActivationKind::Gelu)?;
    opts.config.epochs = 800;
    opts.config.samples = SampleSpec::reference(1, Sampling::UniformRandom { count: 256 });
    opts.tolerance = 1e-3;

    let library = progressive_pretrain_with(1, 3, &opts, |net| {
        println!(
            "x^{}  from {:<14} {} epochs, training MSE {:.2e}",
            net.spec,
            net.provenance.to_string(),
            net.epochs_run,
            net.final_mse
        );
    })?;

    let dir = tempfile::tempdir().map_err(|e| basisnet::Error::io(std::env::temp_dir(), e))?;
    let path = dir.path().join("basis-1d.bin");
    save_library(&library, &path)?;
    let back = load_library(&path)?;
    assert_eq!(back, library);
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!(
        "saved and reloaded {} nets ({size} bytes), id {}",
        back.len(),
        &back.id()[..16]
    );
    Ok(())
}
