// A small SNR sweep comparing the optimal and greedy solvers.

use mmrp::eval::{run_experiment, ExperimentGrid};
use mmrp::SolverKind;

pub fn run() -> mmrp::Result<String> {
    let grid = ExperimentGrid {
        snr_db: vec![0.0, -12.0],
        num_streams: vec![2],
        solvers: vec![SolverKind::Optimal, SolverKind::Greedy],
        snr_known: vec![true, false],
        runs: 4,
        ..Default::default()
    };
    let report = run_experiment(&grid, 0)?;
    let csv = report.aggregate_csv()?;
    print!("{csv}");
    Ok(csv)
}

fn main() -> mmrp::Result<()> {
    run().map(|_| ())
}
