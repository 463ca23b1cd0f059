//! MMRP likelihoods and their cost form.
//!
//! A cluster `x_1..x_n` (ascending in time) has likelihood ratio against the
//! clutter-only hypothesis
//!
//! ```text
//! p_b(x_1) p_d(x_n) prod_i f(x_i | x_{i-1}, tau_i) / prod_i p_c(x_i)
//! ```
//!
//! and the network costs are the negative logs of the factors, with the
//! clutter term entering as `a_c = +log p_c`.

mod gmm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Clustering, EventSet, Observation};

pub use gmm::Gmm;

/// Birth, death, transition and clutter log-likelihoods of an MMRP.
///
/// Evaluators return finite values or negative infinity for impossible
/// events. `transition_loglik` is only queried for gaps in `(0, tau_max]`.
pub trait MmrpModel {
    fn birth_loglik(&self, x: &[f64]) -> f64;
    fn death_loglik(&self, x: &[f64]) -> f64;
    fn transition_loglik(&self, from: &[f64], to: &[f64], gap: f64) -> f64;
    fn clutter_loglik(&self, x: &[f64]) -> f64;
    /// Largest time gap a transition may span.
    fn tau_max(&self) -> f64;
}

impl<M: MmrpModel + ?Sized> MmrpModel for &M {
    fn birth_loglik(&self, x: &[f64]) -> f64 {
        (**self).birth_loglik(x)
    }
    fn death_loglik(&self, x: &[f64]) -> f64 {
        (**self).death_loglik(x)
    }
    fn transition_loglik(&self, from: &[f64], to: &[f64], gap: f64) -> f64 {
        (**self).transition_loglik(from, to, gap)
    }
    fn clutter_loglik(&self, x: &[f64]) -> f64 {
        (**self).clutter_loglik(x)
    }
    fn tau_max(&self) -> f64 {
        (**self).tau_max()
    }
}

/// Component costs for one candidate transition `x -> x'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Costs {
    /// `-log p_b(x)`
    pub birth: f64,
    /// `-log p_d(x)`
    pub death: f64,
    /// `-log f(x' | x, tau)`
    pub transition: f64,
    /// `+log p_c(x)`
    pub clutter: f64,
}

impl Costs {
    pub fn sum(&self) -> f64 {
        self.birth + self.death + self.transition + self.clutter
    }
}

fn check_gap(gap: f64, tau_max: f64) -> Result<()> {
    if gap > 0.0 && gap <= tau_max {
        Ok(())
    } else {
        Err(Error::GapOutOfRange { gap, tau_max })
    }
}

pub fn birth_cost<M: MmrpModel + ?Sized>(model: &M, x: &[f64]) -> f64 {
    -model.birth_loglik(x)
}

pub fn death_cost<M: MmrpModel + ?Sized>(model: &M, x: &[f64]) -> f64 {
    -model.death_loglik(x)
}

pub fn transition_cost<M: MmrpModel + ?Sized>(model: &M, from: &[f64], to: &[f64], gap: f64) -> f64 {
    -model.transition_loglik(from, to, gap)
}

pub fn clutter_cost<M: MmrpModel + ?Sized>(model: &M, x: &[f64]) -> f64 {
    model.clutter_loglik(x)
}

/// Birth and clutter costs at `x`, death cost at `x`, and the transition
/// cost of `x -> x_next` over `gap`.
pub fn costs<M: MmrpModel + ?Sized>(model: &M, x: &[f64], x_next: &[f64], gap: f64) -> Result<Costs> {
    check_gap(gap, model.tau_max())?;
    Ok(Costs {
        birth: birth_cost(model, x),
        death: death_cost(model, x),
        transition: transition_cost(model, x, x_next, gap),
        clutter: clutter_cost(model, x),
    })
}

/// Log likelihood ratio of one cluster (MRP against clutter), observations
/// in ascending time order.
pub fn cluster_log_ratio<M: MmrpModel + ?Sized>(model: &M, cluster: &[&Observation]) -> Result<f64> {
    let (first, last) = match (cluster.first(), cluster.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyCluster),
    };
    let mut total = model.birth_loglik(&first.state) + model.death_loglik(&last.state);
    for pair in cluster.windows(2) {
        let gap = pair[1].time - pair[0].time;
        check_gap(gap, model.tau_max())?;
        let lt = model.transition_loglik(&pair[0].state, &pair[1].state, gap);
        if lt == f64::NEG_INFINITY {
            return Err(Error::ImpossibleTransition {
                from: pair[0].id,
                to: pair[1].id,
            });
        }
        total += lt;
    }
    for obs in cluster {
        total -= model.clutter_loglik(&obs.state);
    }
    Ok(total)
}

/// Log likelihood ratio of a whole clustering; the all-noise clustering
/// scores exactly zero.
pub fn clustering_log_ratio<M: MmrpModel + ?Sized>(
    model: &M,
    events: &EventSet,
    clustering: &Clustering,
) -> Result<f64> {
    let mut total = 0.0;
    for cluster in clustering.clusters() {
        let obs = cluster
            .iter()
            .map(|id| {
                events.get(*id).ok_or_else(|| {
                    Error::InvalidClustering(format!("id {id} is not in the event set"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        total += cluster_log_ratio(model, &obs)?;
    }
    Ok(total)
}

/// Log likelihood ratio between two models' best clusterings of the same
/// data under the same clutter model. Negative favours model `b`.
pub fn compare_models(log_ratio_a: f64, log_ratio_b: f64) -> f64 {
    log_ratio_a - log_ratio_b
}

/// Density of clutter over state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateDensity {
    /// Uniform over an axis-aligned box.
    Uniform { low: Vec<f64>, high: Vec<f64> },
    Gmm(Gmm),
}

impl StateDensity {
    pub fn dim(&self) -> usize {
        match self {
            StateDensity::Uniform { low, .. } => low.len(),
            StateDensity::Gmm(g) => g.dim(),
        }
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        match self {
            StateDensity::Uniform { low, high } => {
                let inside = x
                    .iter()
                    .zip(low.iter().zip(high))
                    .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
                if inside {
                    -low.iter().zip(high).map(|(lo, hi)| (hi - lo).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
            StateDensity::Gmm(g) => g.logpdf_within(x, f64::INFINITY),
        }
    }

    fn validate(&self) -> Result<()> {
        if let StateDensity::Uniform { low, high } = self {
            if low.is_empty() || low.len() != high.len() {
                return Err(Error::InvalidModel("uniform box bounds mismatch".into()));
            }
            if low.iter().zip(high).any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
                return Err(Error::InvalidModel("uniform box must have positive width".into()));
            }
        }
        Ok(())
    }
}

/// The stock MMRP: a Gaussian mixture over `(state delta, log gap)` for
/// transitions, constant birth likelihood, constant death probability and
/// homogeneous-in-time clutter.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmMrpModel {
    transition: Gmm,
    clutter_state: StateDensity,
    /// Clutter events per unit time.
    clutter_rate: f64,
    birth_loglik: f64,
    death_prob: f64,
    tau_max: f64,
    log_time_jacobian: bool,
    support_sigmas: Option<f64>,
}

impl GmmMrpModel {
    pub fn new(
        transition: Gmm,
        clutter_state: StateDensity,
        clutter_rate: f64,
        birth_loglik: f64,
        death_prob: f64,
        tau_max: f64,
    ) -> Result<Self> {
        let model = Self {
            transition,
            clutter_state,
            clutter_rate,
            birth_loglik,
            death_prob,
            tau_max,
            log_time_jacobian: true,
            support_sigmas: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Whether the `(delta, log tau)` density is converted to a density per
    /// unit time by subtracting `log tau`. On by default.
    pub fn with_log_time_jacobian(mut self, on: bool) -> Self {
        self.log_time_jacobian = on;
        self
    }

    /// Treats transitions further than `sigmas` Mahalanobis units from every
    /// mixture component as impossible, which removes their arcs.
    pub fn with_support_sigmas(mut self, sigmas: Option<f64>) -> Self {
        self.support_sigmas = sigmas;
        self
    }

    fn validate(&self) -> Result<()> {
        let d = self.clutter_state.dim();
        if self.transition.dim() != d + 1 {
            return Err(Error::InvalidModel(format!(
                "transition mixture has dimension {}, expected state dimension + 1 = {}",
                self.transition.dim(),
                d + 1
            )));
        }
        self.clutter_state.validate()?;
        if !(self.clutter_rate.is_finite() && self.clutter_rate > 0.0) {
            return Err(Error::InvalidModel(format!(
                "clutter rate must be positive, got {}",
                self.clutter_rate
            )));
        }
        if !(self.death_prob > 0.0 && self.death_prob <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "death probability must lie in (0, 1], got {}",
                self.death_prob
            )));
        }
        if !(self.tau_max.is_finite() && self.tau_max > 0.0) {
            return Err(Error::InvalidModel("tau_max must be positive".into()));
        }
        if self.birth_loglik.is_nan() || self.birth_loglik == f64::INFINITY {
            return Err(Error::InvalidModel("birth log-likelihood must be finite or -inf".into()));
        }
        if let Some(s) = self.support_sigmas {
            if !(s > 0.0) {
                return Err(Error::InvalidModel("support_sigmas must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.clutter_state.dim()
    }

    pub fn transition_gmm(&self) -> &Gmm {
        &self.transition
    }

    pub fn clutter_rate(&self) -> f64 {
        self.clutter_rate
    }

    /// Same model with a different clutter rate.
    pub fn with_clutter_rate(&self, rate: f64) -> Result<Self> {
        let mut m = self.clone();
        m.clutter_rate = rate;
        m.validate()?;
        Ok(m)
    }
}

impl MmrpModel for GmmMrpModel {
    fn birth_loglik(&self, _x: &[f64]) -> f64 {
        self.birth_loglik
    }

    fn death_loglik(&self, _x: &[f64]) -> f64 {
        self.death_prob.ln()
    }

    fn transition_loglik(&self, from: &[f64], to: &[f64], gap: f64) -> f64 {
        if !(gap > 0.0) {
            return f64::NEG_INFINITY;
        }
        let log_gap = gap.ln();
        let v: smallvec::SmallVec<[f64; 8]> = from
            .iter()
            .zip(to)
            .map(|(a, b)| b - a)
            .chain(std::iter::once(log_gap))
            .collect();
        let lp = self
            .transition
            .logpdf_within(&v, self.support_sigmas.unwrap_or(f64::INFINITY));
        if self.log_time_jacobian {
            lp - log_gap
        } else {
            lp
        }
    }

    fn clutter_loglik(&self, x: &[f64]) -> f64 {
        self.clutter_rate.ln() + self.clutter_state.logpdf(x)
    }

    fn tau_max(&self) -> f64 {
        self.tau_max
    }
}

/// How clutter intensity is specified in a model file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutterIntensity {
    /// Clutter events per unit time.
    Rate(f64),
    /// Assumed signal-to-noise ratio in dB: `10 log10(signal / clutter)`
    /// event counts. Resolved against the observed data.
    SnrDb(f64),
}

impl ClutterIntensity {
    /// Clutter rate for `n_obs` observations spread over `window` time units.
    pub fn rate(&self, n_obs: usize, window: f64) -> f64 {
        match *self {
            ClutterIntensity::Rate(r) => r,
            ClutterIntensity::SnrDb(snr_db) => {
                // n = signal + clutter, clutter = signal * ratio
                let ratio = 10f64.powf(-snr_db / 10.0);
                n_obs.max(1) as f64 * ratio / (1.0 + ratio) / window
            }
        }
    }
}

/// JSON model description.
///
/// ```json
/// {
///   "birth_loglik": -6.0,
///   "death_prob": 0.05,
///   "tau_max": 1.0,
///   "clutter": {"snr_db": 0.0},
///   "clutter_state": {"uniform": {"low": [0.0], "high": [30.0]}},
///   "transition": {"weights": [1.0], "means": [[0.0, 0.0]],
///                  "covariances": [[[0.01, 0.0], [0.0, 0.01]]]},
///   "log_time_jacobian": true,
///   "support_sigmas": 6.0
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub birth_loglik: f64,
    pub death_prob: f64,
    pub tau_max: f64,
    pub clutter: ClutterIntensity,
    pub clutter_state: StateDensity,
    pub transition: Gmm,
    #[serde(default = "default_true")]
    pub log_time_jacobian: bool,
    #[serde(default)]
    pub support_sigmas: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model config serializes")
    }

    /// Builds the model with clutter rate resolved for `n_obs` observations
    /// over `window` time units.
    pub fn resolve(&self, n_obs: usize, window: f64) -> Result<GmmMrpModel> {
        if !(window > 0.0) {
            return Err(Error::InvalidModel(format!("observation window {window} is not positive")));
        }
        Ok(GmmMrpModel::new(
            self.transition.clone(),
            self.clutter_state.clone(),
            self.clutter.rate(n_obs, window),
            self.birth_loglik,
            self.death_prob,
            self.tau_max,
        )?
        .with_log_time_jacobian(self.log_time_jacobian)
        .with_support_sigmas(self.support_sigmas))
    }

    /// Resolves against an event set, taking its time span (at least
    /// `tau_max`) as the observation window.
    pub fn resolve_for(&self, events: &EventSet) -> Result<GmmMrpModel> {
        if !events.is_empty() && events.dimension() != self.clutter_state.dim() {
            return Err(Error::InvalidModel(format!(
                "model state dimension {} does not match events dimension {}",
                self.clutter_state.dim(),
                events.dimension()
            )));
        }
        let span = events.time_range().map_or(0.0, |(a, b)| b - a);
        self.resolve(events.len(), span.max(self.tau_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Model with hand-set constants for sign checks.
    struct Fixed {
        birth: f64,
        death: f64,
        trans: f64,
        clutter: f64,
    }

    impl MmrpModel for Fixed {
        fn birth_loglik(&self, _: &[f64]) -> f64 {
            self.birth
        }
        fn death_loglik(&self, _: &[f64]) -> f64 {
            self.death
        }
        fn transition_loglik(&self, _: &[f64], _: &[f64], _: f64) -> f64 {
            self.trans
        }
        fn clutter_loglik(&self, _: &[f64]) -> f64 {
            self.clutter
        }
        fn tau_max(&self) -> f64 {
            10.0
        }
    }

    fn obs(id: u64, t: f64, x: f64) -> Observation {
        Observation::new(id, t, vec![x])
    }

    pub(crate) fn random_model(rng: &mut impl Rng) -> GmmMrpModel {
        let m = rng.random_range(1..4);
        let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let means = (0..m)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.5..0.5)])
            .collect();
        let sds = (0..m)
            .map(|_| vec![rng.random_range(0.3..1.5), rng.random_range(0.3..1.5)])
            .collect();
        GmmMrpModel::new(
            Gmm::diagonal(w, means, sds).unwrap(),
            StateDensity::Uniform { low: vec![-3.0], high: vec![3.0] },
            rng.random_range(0.1..3.0),
            rng.random_range(-3.0..0.0),
            rng.random_range(0.05..1.0),
            rng.random_range(0.5..3.0),
        )
        .unwrap()
    }

    #[test]
    fn cost_signs() {
        let m = Fixed { birth: 0.0, death: -1.0, trans: -2.0, clutter: 0.5f64.ln() };
        let c = costs(&m, &[0.0], &[1.0], 1.0).unwrap();
        assert_eq!(c.birth, 0.0);
        assert_eq!(c.death, 1.0);
        assert_eq!(c.transition, 2.0);
        assert_eq!(c.clutter, 0.5f64.ln());
        assert!(c.clutter < 0.0);
    }

    #[test]
    fn costs_reject_bad_gap() {
        let m = Fixed { birth: 0.0, death: 0.0, trans: 0.0, clutter: 0.0 };
        assert!(matches!(costs(&m, &[0.0], &[0.0], 0.0), Err(Error::GapOutOfRange { .. })));
        assert!(matches!(costs(&m, &[0.0], &[0.0], 10.5), Err(Error::GapOutOfRange { .. })));
    }

    #[test]
    fn singleton_cluster_ratio() {
        let m = Fixed { birth: -1.0, death: -2.0, trans: -7.0, clutter: 0.25 };
        let o = obs(0, 0.0, 0.0);
        assert_eq!(cluster_log_ratio(&m, &[&o]).unwrap(), -1.0 - 2.0 - 0.25);
        assert!(matches!(cluster_log_ratio(&m, &[]), Err(Error::EmptyCluster)));
    }

    #[test]
    fn cluster_gap_limit() {
        let m = Fixed { birth: 0.0, death: 0.0, trans: 0.0, clutter: 0.0 };
        let (a, b) = (obs(0, 0.0, 0.0), obs(1, 11.0, 0.0));
        assert!(matches!(cluster_log_ratio(&m, &[&a, &b]), Err(Error::GapOutOfRange { .. })));
    }

    /// Two-observation cluster: the cost form is the negated ratio, with
    /// birth and transition taken at the first point, death and the second
    /// clutter term at the second.
    #[test]
    fn pair_ratio_matches_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let m = random_model(&mut rng);
            let a = obs(0, 0.0, rng.random_range(-2.0..2.0));
            let gap = rng.random_range(0.01..m.tau_max());
            let b = obs(1, gap, rng.random_range(-2.0..2.0));
            let c1 = costs(&m, &a.state, &b.state, gap).unwrap();
            let c2 = costs(&m, &b.state, &a.state, gap).unwrap();
            let cost = c1.birth + c1.transition + c1.clutter + c2.death + c2.clutter;
            // direct evaluation of the ratio
            let direct = (m.birth_loglik(&a.state).exp()
                * m.death_loglik(&b.state).exp()
                * m.transition_loglik(&a.state, &b.state, gap).exp()
                / (m.clutter_loglik(&a.state).exp() * m.clutter_loglik(&b.state).exp()))
            .ln();
            let ratio = cluster_log_ratio(&m, &[&a, &b]).unwrap();
            assert!((ratio + cost).abs() < 1e-12);
            assert!((ratio - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn four_point_cluster_matches_cost_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = random_model(&mut rng);
            let mut t = 0.0;
            let pts: Vec<Observation> = (0..4)
                .map(|i| {
                    t += rng.random_range(0.01..m.tau_max());
                    obs(i, t, rng.random_range(-2.0..2.0))
                })
                .collect();
            let refs: Vec<&Observation> = pts.iter().collect();
            let mut cost = -m.birth_loglik(&pts[0].state) - m.death_loglik(&pts[3].state);
            for i in 1..4 {
                cost -= m.transition_loglik(&pts[i - 1].state, &pts[i].state, pts[i].time - pts[i - 1].time);
            }
            cost += pts.iter().map(|p| m.clutter_loglik(&p.state)).sum::<f64>();
            assert!((cluster_log_ratio(&m, &refs).unwrap() + cost).abs() < 1e-12);
        }
    }

    #[test]
    fn all_noise_scores_zero() {
        let events = EventSet::from_observations(vec![obs(0, 0.0, 0.0), obs(1, 1.0, 0.0)]).unwrap();
        let m = Fixed { birth: -1.0, death: -1.0, trans: -1.0, clutter: -1.0 };
        assert_eq!(clustering_log_ratio(&m, &events, &Clustering::all_noise([0, 1])).unwrap(), 0.0);
        let one = Clustering::new(vec![vec![0, 1]], []).unwrap();
        let direct = cluster_log_ratio(&m, &[&events.observations()[0], &events.observations()[1]]).unwrap();
        assert_eq!(clustering_log_ratio(&m, &events, &one).unwrap(), direct);
    }

    #[test]
    fn raising_clutter_lowers_ratio_by_n_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng);
        let delta: f64 = 0.7;
        let raised = m.with_clutter_rate(m.clutter_rate() * delta.exp()).unwrap();
        let pts: Vec<Observation> = (0..5).map(|i| obs(i, i as f64 * 0.3, 0.1 * i as f64)).collect();
        let refs: Vec<&Observation> = pts.iter().collect();
        let before = cluster_log_ratio(&m, &refs).unwrap();
        let after = cluster_log_ratio(&raised, &refs).unwrap();
        assert!((before - after - 5.0 * delta).abs() < 1e-12);
    }

    #[test]
    fn compare_models_is_difference() {
        assert_eq!(compare_models(1.5, 1.5), 0.0);
        assert_eq!(compare_models(3.0, 1.0), 2.0);
    }

    #[test]
    fn jacobian_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(&mut rng);
        let plain = m.clone().with_log_time_jacobian(false);
        let gap: f64 = 0.4;
        let a = m.transition_loglik(&[0.0], &[0.2], gap);
        let b = plain.transition_loglik(&[0.0], &[0.2], gap);
        assert!((b - a - gap.ln()).abs() < 1e-12);
        let g = m.transition_gmm().logpdf(&[0.2, gap.ln()]).unwrap();
        assert!((b - g).abs() < 1e-12);
    }

    /// With the Jacobian, the transition density integrates to one over
    /// (state delta, linear time).
    #[test]
    fn jacobian_density_is_per_unit_time() {
        let g = Gmm::diagonal(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![1.0, 0.4]]).unwrap();
        let m = GmmMrpModel::new(
            g,
            StateDensity::Uniform { low: vec![0.0], high: vec![1.0] },
            1.0,
            0.0,
            1.0,
            100.0,
        )
        .unwrap();
        let (n_x, n_t) = (400, 4000);
        let (hx, ht) = (16.0 / n_x as f64, 12.0 / n_t as f64);
        let mut mass = 0.0;
        for i in 0..n_x {
            let dx = -8.0 + (i as f64 + 0.5) * hx;
            for j in 0..n_t {
                let t = (j as f64 + 0.5) * ht;
                mass += m.transition_loglik(&[0.0], &[dx], t).exp() * hx * ht;
            }
        }
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn snr_resolves_rate() {
        // 0 dB: half the observations are clutter
        assert!((ClutterIntensity::SnrDb(0.0).rate(100, 10.0) - 5.0).abs() < 1e-12);
        let r = ClutterIntensity::SnrDb(-10.0).rate(110, 1.0);
        assert!((r - 100.0).abs() < 1e-9);
        assert_eq!(ClutterIntensity::Rate(2.5).rate(7, 3.0), 2.5);
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let text = r#"{
            "birth_loglik": -6.0,
            "death_prob": 0.05,
            "tau_max": 1.0,
            "clutter": {"snr_db": 0.0},
            "clutter_state": {"uniform": {"low": [0.0], "high": [30.0]}},
            "transition": {"weights": [1.0], "means": [[0.0, 0.0]],
                           "covariances": [[[0.01, 0.0], [0.0, 0.01]]]},
            "support_sigmas": 6.0
        }"#;
        let cfg = ModelConfig::from_json(text).unwrap();
        assert!(cfg.log_time_jacobian);
        let back = ModelConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let m = cfg.resolve(20, 10.0).unwrap();
        assert!((m.clutter_rate() - 1.0).abs() < 1e-12);
        assert!((m.clutter_loglik(&[3.0]) - (1.0f64 / 30.0).ln()).abs() < 1e-12);
        assert_eq!(m.clutter_loglik(&[31.0]), f64::NEG_INFINITY);

        let mut bad = cfg.clone();
        bad.death_prob = 0.0;
        assert!(bad.resolve(10, 1.0).is_err());
        let mut bad = cfg;
        bad.clutter_state = StateDensity::Uniform { low: vec![0.0, 0.0], high: vec![1.0, 1.0] };
        assert!(bad.resolve(10, 1.0).is_err());
    }
}
