use super::*;

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        std::iter::once("basisnet").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_codes() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for cmd in ["pretrain", "approx", "predict", "bench", "inspect"] {
        assert!(out.contains(cmd), "{out}");
    }
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["approx", "--degree", "x"]).0, EXIT_USAGE);
    let (code, _, err) = call(&["bench", "no-such-experiment"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("init-sensitivity"), "{err}");
    assert_eq!(call(&["approx", "--basis-source", "oracle"]).0, EXIT_USAGE);
    assert_eq!(
        call(&["approx", "--target", "1d-f1", "--mapping", "sideways"]).0,
        EXIT_USAGE
    );
}

#[test]
fn oracle_fit_predict_inspect() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("m.json");
    let (code, out, err) = call(&[
        "approx",
        "--target",
        "1d-f5",
        "--basis-source",
        "oracle",
        "--degree",
        "4",
        "--out",
        s(&model),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(
        out.contains("R^2 1.0000000000") || out.contains("R^2 0.99999999"),
        "{out}"
    );
    assert!(tmp.path().join("m.metrics.json").is_file());

    let pts = tmp.path().join("pts.csv");
    std::fs::write(&pts, "x\n0\n3\n-1\n").unwrap();
    let (code, out, err) = call(&["predict", "--model", s(&model), "--points", s(&pts)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "x,pf");
    let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 9.0).abs() < 1e-8, "{v}");

    let (code, out, _) = call(&["inspect", s(&model)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("basis source   oracle"), "{out}");
    assert_eq!(call(&["inspect", s(&tmp.path().join("missing.bin"))]).0, EXIT_RUNTIME);
}

#[test]
fn config_file_merges_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    let model = tmp.path().join("fit.json");
    std::fs::write(
        &cfg,
        format!(
            "target = 1d-f5\nbasis_source = oracle\ndegree = 1\nout = {}\n",
            model.display()
        ),
    )
    .unwrap();
    let (code, _, err) = call(&["approx", "--config", s(&cfg), "--degree", "2"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let fitted = FitModel::from_text(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(fitted.degrees.max_degree, 2);

    std::fs::write(&cfg, "target = 1d-f5\ntypo = 3\n").unwrap();
    let (code, _, err) = call(&["approx", "--config", s(&cfg)]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("typo"), "{err}");
}

#[test]
fn tiny_library_round_trip_and_degree_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let lib = tmp.path().join("lib.bin");
    let base = [
        "pretrain",
        "--dim",
        "1",
        "--max-degree",
        "2",
        "--epochs",
        "5",
        "--arch",
        "1,8,1",
        "--tolerance",
        "1e9",
    ];
    let (code, out, err) = call(&[&base[..], &["--out", s(&lib)]].concat());
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("(2)") && out.contains("inherited(1)"), "{out}");

    let (code, out, _) = call(&["inspect", s(&lib)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("max degree     2"), "{out}");

    let (code, _, err) = call(&["approx", "--library", s(&lib), "--target", "1d-f1", "--degree", "5"]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(err.contains('5') && err.contains('2'), "{err}");

    let model = tmp.path().join("m.json");
    let (code, _, err) = call(&[
        "approx",
        "--library",
        s(&lib),
        "--target",
        "1d-f5",
        "--degree",
        "2",
        "--out",
        s(&model),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, _, err) = call(&[
        "predict",
        "--model",
        s(&model),
        "--library",
        s(&lib),
        "--domain",
        "-1,9",
        "--grid",
        "11",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, out, _) = call(&[
        "predict",
        "--model",
        s(&model),
        "--library",
        s(&lib),
        "--domain",
        "-1,9",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 2002);
}
