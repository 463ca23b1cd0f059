// Gaussian mixture densities: evaluation, truncated support and sampling.

use mmrp::Gmm;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> mmrp::Result<Vec<f64>> {
    // two components over (state step, log gap)
    let gmm = Gmm::diagonal(
        vec![0.5, 0.5],
        vec![vec![3.0, (0.5f64).ln()], vec![-3.0, (0.5f64).ln()]],
        vec![vec![0.02, 0.02], vec![0.02, 0.02]],
    )?;
    let at_mode = gmm.logpdf(&[3.0, (0.5f64).ln()])?;
    let between = gmm.logpdf(&[0.0, (0.5f64).ln()])?;
    let truncated = gmm.logpdf_within(&[0.0, (0.5f64).ln()], 6.0);
    println!("log density at a mode {at_mode:.4}, between modes {between:.1}, truncated {truncated}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<Vec<f64>> = (0..5).map(|_| gmm.sample(&mut rng)).collect();
    for d in &draws {
        println!("  step {:+.3}  gap {:.4}", d[0], d[1].exp());
    }
    println!("{}", serde_json::to_string(&gmm)?);
    Ok(vec![at_mode, between, truncated])
}

fn main() -> mmrp::Result<()> {
    run().map(|_| ())
}
