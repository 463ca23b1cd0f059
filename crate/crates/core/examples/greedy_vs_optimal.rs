// Four observations where taking the single best track first blocks a
// better pair of tracks.

use mmrp::{build_network, solve_greedy, solve_optimal, EventSet, MmrpModel, Observation};

struct Table;

impl MmrpModel for Table {
    fn birth_loglik(&self, _: &[f64]) -> f64 {
        -1.0
    }
    fn death_loglik(&self, _: &[f64]) -> f64 {
        -1.0
    }
    fn transition_loglik(&self, from: &[f64], to: &[f64], _gap: f64) -> f64 {
        match (from[0] as i32, to[0] as i32) {
            (1, 2) => 3.5,
            (0, 2) | (1, 3) => 3.0,
            _ => f64::NEG_INFINITY,
        }
    }
    fn clutter_loglik(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn tau_max(&self) -> f64 {
        10.0
    }
}

pub fn run() -> mmrp::Result<(f64, f64)> {
    let events = EventSet::from_observations(
        (0..4).map(|i| Observation::new(i, i as f64, vec![i as f64])).collect(),
    )?;
    let mut net = build_network(&events, &Table)?;
    let optimal = solve_optimal(&mut net)?;
    let optimal_cost = net.total_cost();
    let greedy = solve_greedy(&mut net)?;
    let greedy_cost = net.total_cost();
    println!("optimal {:?} cost {optimal_cost}", optimal.clusters());
    println!("greedy  {:?} cost {greedy_cost}", greedy.clusters());
    Ok((optimal_cost, greedy_cost))
}

fn main() -> mmrp::Result<()> {
    run().map(|_| ())
}
