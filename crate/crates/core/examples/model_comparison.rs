// Analyses segregated data with the coherent and the segregated transition
// models and compares their maximised log likelihood ratios.

use mmrp::model::ClutterIntensity;
use mmrp::solver::infer;
use mmrp::synth::{self, AnalysisParams, GeneratorConfig, GeneratorKind, ModelKind};
use mmrp::{compare_models, SolverKind};

pub fn run() -> mmrp::Result<(usize, usize, f64)> {
    let config = GeneratorConfig {
        kind: GeneratorKind::Segregated,
        snr_db: -12.0,
        seed: 11,
        ..Default::default()
    };
    let data = synth::generate(&config)?;
    let mut fits = Vec::new();
    for kind in [ModelKind::Coherent, ModelKind::Segregated] {
        let model = synth::analysis_model(
            kind,
            &config,
            &AnalysisParams::default(),
            ClutterIntensity::SnrDb(config.snr_db),
            data.clutter_region,
        )?
        .resolve_for(&data.events)?;
        let result = infer(&data.events, &model, SolverKind::Optimal)?;
        println!(
            "{:>10}: K={} log ratio {:.2}",
            kind.name(),
            result.clustering.num_clusters(),
            result.log_ratio
        );
        fits.push(result);
    }
    let diff = compare_models(fits[0].log_ratio, fits[1].log_ratio);
    println!("coherent - segregated = {diff:.2}");
    Ok((fits[0].clustering.num_clusters(), fits[1].clustering.num_clusters(), diff))
}

fn main() -> mmrp::Result<()> {
    run().map(|_| ())
}
