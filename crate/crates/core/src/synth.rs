//! Synthetic alternating-tone data.
//!
//! Each stream alternates between two tones `A` and `B` a fixed state gap
//! apart. The *locked* generator repeats `ABAB...` with constant spacing. The
//! *coherent* generator is one MRP whose steps alternate `+gap` / `-gap` with
//! Gaussian noise on the state step and on the log time step, so `A`s and
//! `B`s drift together and never swap order. The *segregated* generator runs
//! two independent constant-tone MRPs (`A_A_A_` and `_B_B_B`) whose relative
//! phase wanders.
//!
//! Clutter is homogeneous Poisson in time over `[0, duration]` and uniform
//! over the signal state range widened by one tone gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Clustering, EventSet, Observation, ObservationId};
use crate::model::{ClutterIntensity, Gmm, ModelConfig, StateDensity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Locked,
    Coherent,
    Segregated,
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::Locked => "locked",
            GeneratorKind::Coherent => "coherent",
            GeneratorKind::Segregated => "segregated",
        }
    }

    /// Analysis model that matches this generator (locked data is analysed
    /// as coherent).
    pub fn matched_model(&self) -> ModelKind {
        match self {
            GeneratorKind::Segregated => ModelKind::Segregated,
            _ => ModelKind::Coherent,
        }
    }
}

/// Transition model used for analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Coherent,
    Segregated,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Coherent => "coherent",
            ModelKind::Segregated => "segregated",
        }
    }
}

/// Generator settings. The defaults are illustrative, not calibrated to any
/// published parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub num_streams: usize,
    /// Length of the observation window in seconds.
    pub duration: f64,
    /// Stream state offsets are uniform over this range.
    pub state_offset_range: [f64; 2],
    /// State distance between the `A` and `B` tones.
    pub tone_gap: f64,
    /// Seconds from one `A` to the next.
    pub period: f64,
    /// Standard deviation of the state step.
    pub state_noise: f64,
    /// Standard deviation of the log time step.
    pub log_time_noise: f64,
    /// Streams start uniformly within this fraction of the duration.
    pub onset_fraction: f64,
    /// `10 log10(signal count / expected clutter count)`.
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Coherent,
            num_streams: 1,
            duration: 10.0,
            state_offset_range: [0.0, 20.0],
            tone_gap: 3.0,
            period: 1.0,
            state_noise: 0.02,
            log_time_noise: 0.02,
            onset_fraction: 0.1,
            snr_db: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.num_streams == 0 {
            return bad("num_streams must be at least 1");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad("period must be positive");
        }
        if !(self.tone_gap.is_finite() && self.tone_gap > 0.0) {
            return bad("tone_gap must be positive");
        }
        let [lo, hi] = self.state_offset_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("state_offset_range must be an ordered pair");
        }
        if !(self.state_noise >= 0.0 && self.log_time_noise >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.onset_fraction) {
            return bad("onset_fraction must lie in [0, 1]");
        }
        if self.snr_db.is_nan() {
            return bad("snr_db is NaN");
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// A generated dataset with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub events: EventSet,
    pub truth: Clustering,
    /// Generating stream of each truth cluster; segregated streams own two
    /// clusters (the `A` chain and the `B` chain).
    pub cluster_streams: Vec<usize>,
    /// State interval clutter is drawn from.
    pub clutter_region: [f64; 2],
    pub duration: f64,
    pub num_signal: usize,
}

impl SynthData {
    /// Ground truth where each segregated stream's two chains are merged into
    /// one time-ordered `ABAB` cluster.
    pub fn interleaved_truth(&self) -> Result<Clustering> {
        let num_streams = self.cluster_streams.iter().map(|s| s + 1).max().unwrap_or(0);
        let mut merged: Vec<Vec<ObservationId>> = vec![Vec::new(); num_streams];
        for (cluster, &stream) in self.truth.clusters().iter().zip(&self.cluster_streams) {
            merged[stream].extend(cluster);
        }
        for cluster in &mut merged {
            cluster.sort_by_key(|id| self.events.position(*id));
        }
        merged.retain(|c| !c.is_empty());
        Clustering::new(merged, self.truth.noise().iter().copied())
    }
}

/// Signal observations before clutter: ids are assigned in time order.
pub fn generate_signal(config: &GeneratorConfig, rng: &mut impl Rng) -> Result<SynthData> {
    config.validate()?;
    let half = config.period / 2.0;
    let state_step = Normal::new(0.0, config.state_noise).map_err(|e| Error::Config(e.to_string()))?;
    let time_step = Normal::new(0.0, config.log_time_noise).map_err(|e| Error::Config(e.to_string()))?;

    // (time, state, truth cluster)
    let mut raw: Vec<(f64, f64, usize)> = Vec::new();
    let mut cluster_streams = Vec::new();
    let [lo, hi] = config.state_offset_range;
    for stream in 0..config.num_streams {
        let offset = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let onset = rng.random::<f64>() * config.onset_fraction * config.duration;
        match config.kind {
            GeneratorKind::Locked => {
                let cluster = cluster_streams.len();
                cluster_streams.push(stream);
                let mut k = 0usize;
                loop {
                    let t = onset + k as f64 * half;
                    if t > config.duration {
                        break;
                    }
                    let x = if k % 2 == 0 { offset } else { offset + config.tone_gap };
                    raw.push((t, x, cluster));
                    k += 1;
                }
            }
            GeneratorKind::Coherent => {
                let cluster = cluster_streams.len();
                cluster_streams.push(stream);
                let (mut t, mut x) = (onset, offset);
                let mut up = true;
                while t <= config.duration {
                    raw.push((t, x, cluster));
                    let sign = if up { 1.0 } else { -1.0 };
                    x += sign * config.tone_gap + state_step.sample(rng);
                    t += (half.ln() + time_step.sample(rng)).exp();
                    up = !up;
                }
            }
            GeneratorKind::Segregated => {
                // the B chain starts a random phase after the A chain
                let phase = rng.random::<f64>() * config.period;
                let starts = [(onset, offset), (onset + phase, offset + config.tone_gap)];
                for (mut t, mut x) in starts {
                    let cluster = cluster_streams.len();
                    cluster_streams.push(stream);
                    while t <= config.duration {
                        raw.push((t, x, cluster));
                        x += state_step.sample(rng);
                        t += (config.period.ln() + time_step.sample(rng)).exp();
                    }
                }
            }
        }
    }

    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut clusters: Vec<Vec<ObservationId>> = vec![Vec::new(); cluster_streams.len()];
    let observations: Vec<Observation> = raw
        .iter()
        .enumerate()
        .map(|(i, &(t, x, c))| {
            clusters[c].push(i as ObservationId);
            Observation::new(i as ObservationId, t, vec![x])
        })
        .collect();
    // a stream with an onset past the end emits nothing
    let (cluster_streams, clusters): (Vec<usize>, Vec<Vec<ObservationId>>) = cluster_streams
        .into_iter()
        .zip(clusters)
        .filter(|(_, c)| !c.is_empty())
        .unzip();
    let num_signal = observations.len();
    let (min_x, max_x) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.1), b.max(r.1)));
    let clutter_region = if num_signal == 0 {
        [lo - config.tone_gap, hi + 2.0 * config.tone_gap]
    } else {
        [min_x - config.tone_gap, max_x + config.tone_gap]
    };
    Ok(SynthData {
        events: EventSet::new(observations, 1)?,
        truth: Clustering::new(clusters, [])?,
        cluster_streams,
        clutter_region,
        duration: config.duration,
        num_signal,
    })
}

/// Expected clutter count for `signal` events at `snr_db`.
pub fn expected_clutter(signal: usize, snr_db: f64) -> f64 {
    signal as f64 * 10f64.powf(-snr_db / 10.0)
}

/// Appends Poisson clutter at `snr_db` relative to the signal already in
/// `data`. Clutter ids follow the largest existing id and join the truth
/// noise set.
pub fn add_clutter(data: &SynthData, snr_db: f64, rng: &mut impl Rng) -> Result<SynthData> {
    let mean = expected_clutter(data.num_signal, snr_db);
    let count = if mean > 0.0 && mean.is_finite() {
        Poisson::new(mean)
            .map_err(|e| Error::Config(e.to_string()))?
            .sample(rng) as u64
    } else if mean == 0.0 {
        0
    } else {
        return Err(Error::Config(format!("clutter mean {mean} is not usable")));
    };
    let next_id = data.events.ids().max().map_or(0, |m| m + 1);
    let [lo, hi] = data.clutter_region;
    let clutter: Vec<Observation> = (0..count)
        .map(|k| {
            let t = rng.random::<f64>() * data.duration;
            let x = lo + rng.random::<f64>() * (hi - lo);
            Observation::new(next_id + k, t, vec![x])
        })
        .collect();
    let ids: Vec<ObservationId> = clutter.iter().map(|o| o.id).collect();
    let clutter = EventSet::new(clutter, 1)?;
    Ok(SynthData {
        events: data.events.merged(&clutter)?,
        truth: data.truth.with_extra_noise(ids)?,
        cluster_streams: data.cluster_streams.clone(),
        clutter_region: data.clutter_region,
        duration: data.duration,
        num_signal: data.num_signal,
    })
}

/// Signal plus clutter, fully determined by `config.seed`.
pub fn generate(config: &GeneratorConfig) -> Result<SynthData> {
    let mut rng = config.rng();
    let signal = generate_signal(config, &mut rng)?;
    add_clutter(&signal, config.snr_db, &mut rng)
}

/// Settings of the analysis models that are not tied to the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    pub birth_loglik: f64,
    pub death_prob: f64,
    /// Transitions beyond this many standard deviations from every mixture
    /// component get no arc.
    pub support_sigmas: Option<f64>,
    /// Largest transition gap, in periods.
    pub coherent_tau_max: f64,
    pub segregated_tau_max: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            birth_loglik: -6.0,
            death_prob: 0.05,
            support_sigmas: Some(6.0),
            coherent_tau_max: 1.0,
            segregated_tau_max: 2.0,
        }
    }
}

/// Transition mixture over `(state delta, log gap)` for an analysis model.
///
/// Coherent: two equal components at `(+gap, log(period/2))` and
/// `(-gap, log(period/2))`. Segregated: one component at `(0, log period)`.
pub fn transition_gmm(kind: ModelKind, config: &GeneratorConfig) -> Result<Gmm> {
    let sd = vec![config.state_noise, config.log_time_noise];
    match kind {
        ModelKind::Coherent => {
            let lt = (config.period / 2.0).ln();
            Gmm::diagonal(
                vec![0.5, 0.5],
                vec![vec![config.tone_gap, lt], vec![-config.tone_gap, lt]],
                vec![sd.clone(), sd],
            )
        }
        ModelKind::Segregated => Gmm::diagonal(vec![1.0], vec![vec![0.0, config.period.ln()]], vec![sd]),
    }
}

/// Model file for analysing data from `config` with the `kind` transition
/// model and the given clutter assumption over `clutter_region`.
pub fn analysis_model(
    kind: ModelKind,
    config: &GeneratorConfig,
    params: &AnalysisParams,
    clutter: ClutterIntensity,
    clutter_region: [f64; 2],
) -> Result<ModelConfig> {
    let tau_max = config.period
        * match kind {
            ModelKind::Coherent => params.coherent_tau_max,
            ModelKind::Segregated => params.segregated_tau_max,
        };
    Ok(ModelConfig {
        birth_loglik: params.birth_loglik,
        death_prob: params.death_prob,
        tau_max,
        clutter,
        clutter_state: StateDensity::Uniform {
            low: vec![clutter_region[0]],
            high: vec![clutter_region[1]],
        },
        transition: transition_gmm(kind, config)?,
        log_time_jacobian: true,
        support_sigmas: params.support_sigmas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: GeneratorKind) -> GeneratorConfig {
        GeneratorConfig {
            kind,
            snr_db: 300.0,
            seed: 42,
            ..Default::default()
        }
    }

    #[test]
    fn locked_is_exact() {
        let data = generate(&cfg(GeneratorKind::Locked)).unwrap();
        assert_eq!(data.events.len(), data.num_signal);
        let obs = data.events.observations();
        let states: std::collections::BTreeSet<u64> = obs.iter().map(|o| o.state[0].to_bits()).collect();
        assert_eq!(states.len(), 2);
        for w in obs.windows(2) {
            assert_ne!(w[0].state, w[1].state);
            assert!(((w[1].time - w[0].time) - 0.5).abs() < 1e-9);
        }
        assert_eq!(data.truth.num_clusters(), 1);
        data.truth.validate(&data.events).unwrap();
    }

    #[test]
    fn coherent_log_gap_variance() {
        let config = GeneratorConfig {
            duration: 5000.0,
            log_time_noise: 0.1,
            onset_fraction: 0.0,
            ..cfg(GeneratorKind::Coherent)
        };
        let data = generate(&config).unwrap();
        let logs: Vec<f64> = data
            .events
            .observations()
            .windows(2)
            .map(|w| (w[1].time - w[0].time).ln())
            .collect();
        assert!(logs.len() >= 9_000);
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 0.5f64.ln()).abs() < 0.01);
        assert!((var / 0.01 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn coherent_alternates() {
        let data = generate(&GeneratorConfig { num_streams: 1, ..cfg(GeneratorKind::Coherent) }).unwrap();
        let obs = data.events.observations();
        for w in obs.windows(3) {
            let (d1, d2) = (w[1].state[0] - w[0].state[0], w[2].state[0] - w[1].state[0]);
            assert!(d1 * d2 < 0.0, "alternation broken");
        }
    }

    #[test]
    fn segregated_phase_random_walk() {
        // across many seeds, the spread of the A/B phase difference grows
        // with the event index
        let mut early = Vec::new();
        let mut late = Vec::new();
        for seed in 0..300 {
            let config = GeneratorConfig {
                duration: 40.0,
                onset_fraction: 0.0,
                log_time_noise: 0.05,
                seed,
                ..cfg(GeneratorKind::Segregated)
            };
            let data = generate(&config).unwrap();
            let chains = data.truth.clusters();
            let time = |id: &u64| data.events.get(*id).unwrap().time;
            let diff = |k: usize| time(&chains[1][k]) - time(&chains[0][k]);
            early.push(diff(2) - diff(0));
            late.push(diff(30) - diff(0));
        }
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!(var(&late) > 5.0 * var(&early));
    }

    #[test]
    fn deterministic_per_seed() {
        let config = GeneratorConfig { snr_db: -6.0, num_streams: 2, ..cfg(GeneratorKind::Segregated) };
        assert_eq!(generate(&config).unwrap(), generate(&config).unwrap());
        let other = GeneratorConfig { seed: 43, ..config.clone() };
        assert_ne!(generate(&config).unwrap().events, generate(&other).unwrap().events);
    }

    #[test]
    fn clutter_count_matches_snr() {
        let base = generate_signal(&cfg(GeneratorKind::Coherent), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(expected_clutter(100, 0.0), 100.0);
        assert!((expected_clutter(100, -12.0) - 1584.893).abs() < 1e-3);

        // Poisson mean check at -12 dB with 100 signal events
        let signal = GeneratorConfig { duration: 49.9, onset_fraction: 0.0, ..cfg(GeneratorKind::Locked) };
        let signal = generate_signal(&signal, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(signal.num_signal, 100);
        let runs = 100;
        let mut total = 0usize;
        for seed in 0..runs {
            let data = add_clutter(&signal, -12.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            total += data.events.len() - data.num_signal;
            data.truth.validate(&data.events).unwrap();
            assert_eq!(data.truth.num_noise(), data.events.len() - 100);
        }
        let mean = total as f64 / runs as f64;
        let expect = expected_clutter(100, -12.0);
        let se = (expect / runs as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean}");

        // huge SNR: no clutter
        let quiet = add_clutter(&base, 400.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(quiet.events.len(), base.num_signal);
    }

    #[test]
    fn clutter_in_region_and_window() {
        let data = generate(&GeneratorConfig { snr_db: -10.0, num_streams: 4, ..cfg(GeneratorKind::Coherent) }).unwrap();
        let [lo, hi] = data.clutter_region;
        for obs in data.events.iter() {
            assert!(obs.state[0] >= lo && obs.state[0] <= hi);
            assert!(obs.time >= 0.0 && obs.time <= data.duration);
        }
        data.truth.validate(&data.events).unwrap();
    }

    #[test]
    fn signal_count_scales_with_duration_and_streams() {
        let count = |duration: f64, streams: usize| {
            (0..20)
                .map(|seed| {
                    let c = GeneratorConfig { duration, num_streams: streams, onset_fraction: 0.0, seed, ..cfg(GeneratorKind::Coherent) };
                    generate(&c).unwrap().num_signal as f64
                })
                .sum::<f64>()
                / 20.0
        };
        let base = count(20.0, 1);
        assert!((count(40.0, 1) / base - 2.0).abs() < 0.05);
        assert!((count(20.0, 3) / base - 3.0).abs() < 0.05);
    }

    #[test]
    fn interleaved_truth_merges_chains() {
        let data = generate(&GeneratorConfig { num_streams: 2, ..cfg(GeneratorKind::Segregated) }).unwrap();
        assert_eq!(data.truth.num_clusters(), 4);
        let merged = data.interleaved_truth().unwrap();
        assert_eq!(merged.num_clusters(), 2);
        merged.validate(&data.events).unwrap();
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(generate(&GeneratorConfig { num_streams: 0, ..Default::default() }).is_err());
        assert!(generate(&GeneratorConfig { duration: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn analysis_models_resolve() {
        let config = GeneratorConfig::default();
        for kind in [ModelKind::Coherent, ModelKind::Segregated] {
            let m = analysis_model(kind, &config, &AnalysisParams::default(), ClutterIntensity::SnrDb(0.0), [0.0, 10.0])
                .unwrap();
            m.resolve(40, 10.0).unwrap();
            assert_eq!(m.transition.dim(), 2);
        }
    }
}
