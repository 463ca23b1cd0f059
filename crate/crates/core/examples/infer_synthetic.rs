// Generates two coherent streams in heavy clutter, writes them to disk, reads
// them back without the truth column and recovers the streams.

use mmrp::events::{read_events, read_events_with_truth, write_clustering, write_events};
use mmrp::model::ClutterIntensity;
use mmrp::solver::infer;
use mmrp::synth::{self, AnalysisParams, GeneratorConfig, GeneratorKind};
use mmrp::{f_sn, f_trans, SolverKind};

pub fn run() -> mmrp::Result<(f64, f64)> {
    let config = GeneratorConfig {
        kind: GeneratorKind::Coherent,
        num_streams: 2,
        snr_db: -12.0,
        seed: 7,
        ..Default::default()
    };
    let data = synth::generate(&config)?;
    let dir = std::env::temp_dir().join(format!("mmrp-infer-synthetic-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let events_path = dir.join("events.csv");
    write_events(&data.events, Some(&data.truth), &events_path)?;

    let events = read_events(&events_path)?;
    let model = synth::analysis_model(
        config.kind.matched_model(),
        &config,
        &AnalysisParams::default(),
        ClutterIntensity::SnrDb(config.snr_db),
        data.clutter_region,
    )?
    .resolve_for(&events)?;
    let result = infer(&events, &model, SolverKind::Optimal)?;
    write_clustering(&result.clustering, dir.join("labels.csv"))?;

    let (_, truth) = read_events_with_truth(&events_path)?;
    let truth = truth.expect("file has a truth column");
    let sn = f_sn(&truth, &result.clustering)?;
    let tr = f_trans(&truth, &result.clustering)?;
    println!(
        "{} events, {} signal; found K={} with log ratio {:.1}",
        events.len(),
        data.num_signal,
        result.clustering.num_clusters(),
        result.log_ratio
    );
    println!("f_sn {:.4}  f_trans {:.4}", sn.f_measure, tr.f_measure);
    std::fs::remove_dir_all(&dir)?;
    Ok((sn.f_measure, tr.f_measure))
}

fn main() -> mmrp::Result<()> {
    run().map(|_| ())
}
