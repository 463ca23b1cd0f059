// Builds the flow network for three observations under a model that allows
// every forward transition, counts its source-to-sink paths and solves it.

use mmrp::network::ArcKind;
use mmrp::{build_network, solve_optimal, EventSet, MmrpModel, Observation};

struct Flat;

impl MmrpModel for Flat {
    fn birth_loglik(&self, _: &[f64]) -> f64 {
        -1.0
    }
    fn death_loglik(&self, _: &[f64]) -> f64 {
        (0.5f64).ln()
    }
    fn transition_loglik(&self, from: &[f64], to: &[f64], _gap: f64) -> f64 {
        // rewards small steps
        1.0 - (to[0] - from[0]).abs()
    }
    fn clutter_loglik(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn tau_max(&self) -> f64 {
        10.0
    }
}

pub fn run() -> mmrp::Result<(u128, usize)> {
    let events = EventSet::from_observations(vec![
        Observation::new(1, 0.0, vec![0.0]),
        Observation::new(2, 1.0, vec![0.2]),
        Observation::new(3, 2.0, vec![0.3]),
    ])?;
    let mut net = build_network(&events, &Flat)?;
    let paths = net.count_st_paths();
    let transitions = net.arcs().iter().filter(|a| matches!(a.kind, ArcKind::Transition(..))).count();
    println!("{} nodes, {} arcs ({transitions} transitions), {paths} (s,t)-paths", net.node_count(), net.arc_count());

    let clustering = solve_optimal(&mut net)?;
    println!("clusters {:?}, noise {:?}, cost {:.4}", clustering.clusters(), clustering.noise(), net.total_cost());
    print!("{}", net.to_dot());
    Ok((paths, clustering.num_clusters()))
}

fn main() -> mmrp::Result<()> {
    run().map(|_| ())
}
