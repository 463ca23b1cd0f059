//! Full-covariance Gaussian mixtures.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

type Buf = SmallVec<[f64; 8]>;

#[derive(Clone, Debug, PartialEq)]
struct Gaussian {
    mean: Vec<f64>,
    /// Row-major covariance, kept for serialization.
    cov: Vec<f64>,
    /// Row-major lower Cholesky factor of `cov`.
    chol: Vec<f64>,
    /// `-0.5 * (d ln 2pi + ln det cov)`
    log_norm: f64,
}

impl Gaussian {
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidGmm(format!(
                "covariance is not {d}x{d}"
            )));
        }
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGmm("non-finite parameter".into()));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (cov[i][j], cov[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidGmm("covariance is not symmetric".into()));
                }
            }
        }
        let flat: Vec<f64> = cov.into_iter().flatten().collect();
        let chol = cholesky(&flat, d)
            .ok_or_else(|| Error::InvalidGmm("covariance is not positive definite".into()))?;
        let log_det: f64 = (0..d).map(|i| 2.0 * chol[i * d + i].ln()).sum();
        Ok(Self {
            mean,
            cov: flat,
            chol,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Squared Mahalanobis distance of `v` from the mean.
    fn mahalanobis_sq(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        // solve L z = v - mean by forward substitution
        let mut z: Buf = SmallVec::with_capacity(d);
        let mut acc = 0.0;
        for i in 0..d {
            let mut s = v[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * z[j];
            }
            let zi = s / self.chol[i * d + i];
            acc += zi * zi;
            z.push(zi);
        }
        acc
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Buf = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.chol[i * d + j] * z[j]).sum::<f64>())
            .collect()
    }
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = a[i * d + j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Serialized form: `{"weights": [..], "means": [[..]], "covariances": [[[..]]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct GmmSpec {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
}

/// Gaussian mixture with full covariances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmSpec", into = "GmmSpec")]
pub struct Gmm {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl TryFrom<GmmSpec> for Gmm {
    type Error = Error;

    fn try_from(spec: GmmSpec) -> Result<Self> {
        Gmm::new(spec.weights, spec.means, spec.covariances)
    }
}

impl From<Gmm> for GmmSpec {
    fn from(gmm: Gmm) -> Self {
        GmmSpec {
            weights: gmm.weights.clone(),
            means: gmm.means(),
            covariances: gmm.covariances(),
        }
    }
}

impl Gmm {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidGmm("no components".into()));
        }
        if means.len() != weights.len() || covariances.len() != weights.len() {
            return Err(Error::InvalidGmm(format!(
                "{} weights, {} means, {} covariances",
                weights.len(),
                means.len(),
                covariances.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidGmm("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidGmm(format!("weights sum to {total}")));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::InvalidGmm("zero-dimensional component".into()));
        }
        let components = means
            .into_iter()
            .zip(covariances)
            .map(|(m, c)| {
                if m.len() != dim {
                    return Err(Error::InvalidGmm("components differ in dimension".into()));
                }
                Gaussian::new(m, c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            components,
        })
    }

    /// Single Gaussian component.
    pub fn gaussian(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![covariance])
    }

    /// Mixture of axis-aligned components, given per-axis standard deviations.
    pub fn diagonal(weights: Vec<f64>, means: Vec<Vec<f64>>, std_devs: Vec<Vec<f64>>) -> Result<Self> {
        let covariances = std_devs
            .into_iter()
            .map(|sd| {
                let d = sd.len();
                (0..d)
                    .map(|i| (0..d).map(|j| if i == j { sd[i] * sd[i] } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        Self::new(weights, means, covariances)
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.mean.clone()).collect()
    }

    pub fn covariances(&self) -> Vec<Vec<Vec<f64>>> {
        self.components
            .iter()
            .map(|c| {
                let d = c.dim();
                c.cov.chunks(d).map(<[f64]>::to_vec).collect()
            })
            .collect()
    }

    /// `log sum_m w_m N(v; mu_m, Sigma_m)`.
    pub fn logpdf(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        Ok(self.logpdf_within(v, f64::INFINITY))
    }

    /// As [`Gmm::logpdf`], but negative infinity when `v` lies further than
    /// `radius` Mahalanobis units from every component with positive weight.
    /// Panics in debug builds on a dimension mismatch.
    pub fn logpdf_within(&self, v: &[f64], radius: f64) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        let limit = radius * radius;
        let mut terms: SmallVec<[f64; 16]> = SmallVec::new();
        for (c, &lw) in self.components.iter().zip(&self.log_weights) {
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let m2 = c.mahalanobis_sq(v);
            if m2 <= limit {
                terms.push(lw + c.log_norm - 0.5 * m2);
            }
        }
        log_sum_exp(&terms)
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DensityDimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Draws one sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.sample_component_index(rng);
        self.components[k].sample(rng)
    }

    /// Draws from component `k` alone.
    pub fn sample_component<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        self.components[k].sample(rng)
    }

    fn sample_component_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        // rounding: fall back to the last component with positive weight
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std_normal() -> Gmm {
        Gmm::gaussian(vec![0.0], vec![vec![1.0]]).unwrap()
    }

    #[test]
    fn standard_normal_at_mode() {
        let lp = std_normal().logpdf(&[0.0]).unwrap();
        assert!((lp - (-0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-15);
        assert!((lp + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn identical_components_collapse() {
        let one = Gmm::gaussian(vec![0.3, -1.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let two = Gmm::new(
            vec![0.5, 0.5],
            vec![vec![0.3, -1.0]; 2],
            vec![vec![vec![2.0, 0.5], vec![0.5, 1.0]]; 2],
        )
        .unwrap();
        for v in [[0.0, 0.0], [1.5, -2.0], [-3.0, 4.0]] {
            let (a, b) = (one.logpdf(&v).unwrap(), two.logpdf(&v).unwrap());
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn correlated_gaussian_matches_closed_form() {
        // 2-d: det = 2*1 - 0.25 = 1.75, inverse = [[1,-0.5],[-0.5,2]]/1.75
        let g = Gmm::gaussian(vec![1.0, 2.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let (dx, dy) = (0.5, -1.0);
        let q = (dx * dx * 1.0 - 2.0 * 0.5 * dx * dy + 2.0 * dy * dy) / 1.75;
        let expect = -LN_2PI - 0.5 * 1.75f64.ln() - 0.5 * q;
        let got = g.logpdf(&[1.0 + dx, 2.0 + dy]).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        assert!(matches!(
            std_normal().logpdf(&[0.0, 1.0]),
            Err(Error::DensityDimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Gmm::new(vec![0.5, 0.4], vec![vec![0.0]; 2], vec![vec![vec![1.0]]; 2]).is_err());
        assert!(Gmm::gaussian(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(Gmm::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.1], vec![0.0, 1.0]]).is_err());
        assert!(Gmm::gaussian(vec![0.0], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn truncated_support() {
        let g = std_normal();
        assert!(g.logpdf_within(&[2.9], 3.0).is_finite());
        assert_eq!(g.logpdf_within(&[3.1], 3.0), f64::NEG_INFINITY);
    }

    /// Grid quadrature of a random 3-component 2-d mixture.
    #[test]
    fn density_integrates_to_one_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let means: Vec<Vec<f64>> = (0..3)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let covs: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|_| {
                let a: f64 = rng.random_range(0.3..1.0);
                let b: f64 = rng.random_range(0.3..1.0);
                let r: f64 = rng.random_range(-0.6..0.6);
                let c = r * (a * b).sqrt();
                vec![vec![a, c], vec![c, b]]
            })
            .collect();
        let gmm = Gmm::new(w, means, covs).unwrap();
        let (lo, hi, n) = (-10.0, 10.0, 800);
        let h = (hi - lo) / n as f64;
        let mut mass = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = lo + (i as f64 + 0.5) * h;
                let y = lo + (j as f64 + 0.5) * h;
                mass += gmm.logpdf(&[x, y]).unwrap().exp() * h * h;
            }
        }
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn sample_moments() {
        let g = Gmm::gaussian(vec![2.0, 3.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let s = g.sample(&mut rng);
            for k in 0..2 {
                sum[k] += s[k];
                sq[k] += s[k] * s[k];
            }
        }
        for (k, mu) in [2.0, 3.0].into_iter().enumerate() {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            // 3 standard errors of the mean is ~0.0095
            assert!((mean - mu).abs() < 0.01, "mean {mean}");
            assert!((var - 1.0).abs() < 3.0 * (2.0f64 / n as f64).sqrt(), "var {var}");
        }
    }

    #[test]
    fn correlated_sample_covariance() {
        let cov = vec![vec![2.0, 0.8], vec![0.8, 0.5]];
        let g = Gmm::gaussian(vec![0.0, 0.0], cov.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut c = [[0.0; 2]; 2];
        for _ in 0..n {
            let s = g.sample(&mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += s[i] * s[j] / n as f64;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                // standard error of a product moment: sqrt((S_ii S_jj + S_ij^2) / n)
                let se = ((cov[i][i] * cov[j][j] + cov[i][j] * cov[i][j]) / n as f64).sqrt();
                assert!((c[i][j] - cov[i][j]).abs() < 3.0 * se, "{i}{j}: {}", c[i][j]);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = Gmm::new(
            vec![0.3, 0.7],
            vec![vec![0.0], vec![5.0]],
            vec![vec![vec![1.0]], vec![vec![0.5]]],
        )
        .unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| g.sample(&mut rng)[0]).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn degenerate_weight_uses_one_component() {
        let g = Gmm::new(
            vec![1.0, 0.0],
            vec![vec![0.0], vec![1000.0]],
            vec![vec![vec![1.0]], vec![vec![1.0]]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..10_000).all(|_| g.sample(&mut rng)[0].abs() < 100.0));
    }

    #[test]
    fn json_round_trip() {
        let g = Gmm::diagonal(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![vec![0.1, 0.2]; 2])
            .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: Gmm = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<Gmm>(r#"{"weights":[0.5],"means":[[0]],"covariances":[[[1]]]}"#).is_err());
    }
}
