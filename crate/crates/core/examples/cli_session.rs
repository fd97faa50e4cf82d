// Drives the command line in-process: fit, inspect, then predict.

use basisnet::cli::run;

fn main() -> basisnet::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| basisnet::Error::io(std::env::temp_dir(), e))?;
    let model = dir.path().join("fit.json");
    let model = model.to_str().expect("utf-8 temp path");

    let steps: [&[&str]; 3] = [
        &[
            "approx",
            "--target",
            "1d-f3",
            "--basis-source",
            "oracle",
            "--degree",
            "8",
            "--out",
            model,
        ],
        &["inspect", model],
        &["predict", "--model", model, "--domain", "-1,1", "--grid", "5"],
    ];
    for args in steps {
        println!("$ basisnet {}", args.join(" "));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("basisnet").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        print!("{}", String::from_utf8_lossy(&out));
        assert_eq!(code, 0, "step failed: {}", String::from_utf8_lossy(&err));
    }
    Ok(())
}
