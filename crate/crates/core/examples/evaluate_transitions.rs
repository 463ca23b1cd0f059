// Scores a prediction that drops the middle observation of a five-long
// chain: two transitions survive, two are missed and one is invented.

use mmrp::{f_sn, f_trans, Clustering};

pub fn run() -> mmrp::Result<f64> {
    let truth = Clustering::new(vec![vec![1, 2, 3, 4, 5]], [])?;
    let predicted = Clustering::new(vec![vec![1, 2, 4, 5]], [3])?;
    let sn = f_sn(&truth, &predicted)?;
    let tr = f_trans(&truth, &predicted)?;
    println!("f_sn    {:.6}  (t+ {}, f+ {}, f- {})", sn.f_measure, sn.t_plus, sn.f_plus, sn.f_minus);
    println!("f_trans {:.6}  (t+ {}, f+ {}, f- {})", tr.f_measure, tr.t_plus, tr.f_plus, tr.f_minus);
    Ok(tr.f_measure)
}

fn main() -> mmrp::Result<()> {
    run().map(|_| ())
}
