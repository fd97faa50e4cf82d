// Runs a cut-down initialization study and reads the report back from disk.

use basisnet::bench::{run_to_dir, ExperimentKind, ExperimentReport, ParamGrid, RunContext};

fn main() -> basisnet::Result<()> {
    let mut spec = ExperimentKind::InitSensitivity.default_spec();
    spec.seeds = vec![0, 1];
    spec.train.epochs = 100;
    if let ParamGrid::Init { widths, cells, .. } = &mut spec.grid {
        *widths = vec![2, 16, 16, 1];
        cells.truncate(4);
    }

    let dir = tempfile::tempdir().map_err(|e| basisnet::Error::io(std::env::temp_dir(), e))?;
    let (report, run_dir) = run_to_dir(&spec, &RunContext::new(&[], 2), dir.path())?;
    for cell in &report.cells {
        let m = cell.metrics.as_ref();
        println!(
            "{:<28} rel L2 {:.4}",
            cell.id,
            m.and_then(|m| m.relative_l2).unwrap_or(f64::NAN)
        );
    }
    let back = ExperimentReport::read_from(&run_dir)?;
    assert_eq!(back, report);
    let files: Vec<String> = std::fs::read_dir(&run_dir)
        .map_err(|e| basisnet::Error::io(&run_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    println!("report files: {files:?}");
    Ok(())
}
