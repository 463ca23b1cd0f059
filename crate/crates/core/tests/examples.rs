//! Runs every cargo example and checks what it reports.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }
    };
}

example!(three_observation_network);
example!(gmm_density);
example!(infer_synthetic);
example!(model_comparison);
example!(greedy_vs_optimal);
example!(evaluate_transitions);
example!(experiment_grid);

#[test]
fn three_observation_network_has_seven_paths() {
    let (paths, _) = three_observation_network::run().unwrap();
    assert_eq!(paths, 7);
}

#[test]
fn gmm_density_runs() {
    let v = gmm_density::run().unwrap();
    // 0.5 / (2 pi 0.02^2) at a mode
    assert!((v[0] - (0.5 / (2.0 * std::f64::consts::PI * 0.0004)).ln()).abs() < 1e-9);
    assert_eq!(v[2], f64::NEG_INFINITY);
}

#[test]
fn infer_synthetic_recovers_streams() {
    let (sn, tr) = infer_synthetic::run().unwrap();
    assert!(sn > 0.9 && tr > 0.9, "{sn} {tr}");
}

#[test]
fn model_comparison_prefers_segregated() {
    let (_, k_seg, diff) = model_comparison::run().unwrap();
    assert!(k_seg >= 1);
    assert!(diff < 0.0);
}

#[test]
fn greedy_is_trapped() {
    let (opt, greedy) = greedy_vs_optimal::run().unwrap();
    assert!((opt + 2.0).abs() < 1e-12);
    assert!((greedy + 1.5).abs() < 1e-12);
}

#[test]
fn evaluate_transitions_is_four_sevenths() {
    assert!((evaluate_transitions::run().unwrap() - 4.0 / 7.0).abs() < 1e-15);
}

#[test]
fn experiment_grid_emits_eight_cells() {
    let csv = experiment_grid::run().unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
}
