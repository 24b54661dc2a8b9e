//! Gaussian-mixture models of joint renewable forecast error.
//!
//! Chance constraints on a linear combination `a·W̃ + b` of the renewable
//! outputs reduce to a quantile of a univariate mixture, because an affine
//! map of a Gaussian mixture is again a Gaussian mixture.

mod em;

pub use em::{fit_em, EmConfig, EmFit};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("mixture has no components")]
    Empty,
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance of component {component} is not positive semidefinite ({detail})")]
    NotPsd { component: usize, detail: String },
    #[error("probability level {0} is outside (0, 1)")]
    Domain(f64),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// One mixture component. The covariance is stored as full rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

/// Joint mixture over `dim` renewable outputs, in MW. Serialized as
/// `{weights, means, covariances}` with one entry per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmRepr", into = "GmmRepr")]
pub struct Gmm {
    components: Vec<GmmComponent>,
    dim: usize,
}

/// Weight sums further than this from one are rejected rather than rescaled.
const WEIGHT_SUM_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;

impl Gmm {
    /// Validates and renormalizes the weights to sum to one.
    pub fn new(mut components: Vec<GmmComponent>) -> Result<Self, UncertaintyError> {
        let first = components.first().ok_or(UncertaintyError::Empty)?;
        let dim = first.mean.len();
        for (k, c) in components.iter().enumerate() {
            if c.mean.len() != dim {
                return Err(UncertaintyError::DimensionMismatch {
                    expected: dim,
                    got: c.mean.len(),
                });
            }
            if c.covariance.len() != dim || c.covariance.iter().any(|r| r.len() != dim) {
                return Err(UncertaintyError::DimensionMismatch {
                    expected: dim,
                    got: c.covariance.len(),
                });
            }
            if !c.mean.iter().chain(c.covariance.iter().flatten()).all(|v| v.is_finite()) {
                return Err(UncertaintyError::NonFinite("mixture component"));
            }
            check_psd(k, &c.covariance)?;
        }
        let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
        let normalized = normalize_weights(&weights)?;
        for (c, w) in components.iter_mut().zip(normalized) {
            c.weight = w;
        }
        Ok(Self { components, dim })
    }

    /// Independent Gaussian marginals with one shared mixture structure:
    /// `offsets` and `scales` are relative to `sigma` for every dimension, and
    /// `correlation` couples all pairs equally.
    pub fn from_means(
        mean: &[f64],
        sigma: &[f64],
        correlation: f64,
        weights: &[f64],
        offsets: &[f64],
        scales: &[f64],
    ) -> Result<Self, UncertaintyError> {
        if sigma.len() != mean.len() {
            return Err(UncertaintyError::DimensionMismatch {
                expected: mean.len(),
                got: sigma.len(),
            });
        }
        if offsets.len() != weights.len() || scales.len() != weights.len() {
            return Err(UncertaintyError::DimensionMismatch {
                expected: weights.len(),
                got: offsets.len().min(scales.len()),
            });
        }
        let n = mean.len();
        let components = weights
            .iter()
            .zip(offsets)
            .zip(scales)
            .map(|((&w, &o), &s)| GmmComponent {
                weight: w,
                mean: (0..n).map(|i| mean[i] + o * sigma[i]).collect(),
                covariance: (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let rho = if i == j { 1.0 } else { correlation };
                                rho * s * s * sigma[i] * sigma[j]
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (acc, v) in m.iter_mut().zip(&c.mean) {
                *acc += c.weight * v;
            }
        }
        m
    }

    /// Component-wise translation of every mean.
    pub fn shifted(&self, delta: &[f64]) -> Result<Self, UncertaintyError> {
        if delta.len() != self.dim {
            return Err(UncertaintyError::DimensionMismatch {
                expected: self.dim,
                got: delta.len(),
            });
        }
        let mut out = self.clone();
        for c in &mut out.components {
            for (m, d) in c.mean.iter_mut().zip(delta) {
                *m += d;
            }
        }
        Ok(out)
    }

    /// Log-density at `x`.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64, UncertaintyError> {
        if x.len() != self.dim {
            return Err(UncertaintyError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + gaussian_log_pdf(x, &c.mean, &c.covariance))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// Draws one joint sample.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        use rand::RngExt;
        use rand_distr::{Distribution, StandardNormal};
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (k, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = k;
                break;
            }
        }
        let c = &self.components[pick];
        let l = psd_factor(&c.covariance);
        let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(&mut *rng));
        let x = l * z;
        c.mean.iter().zip(x.iter()).map(|(m, v)| m + v).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmRepr {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<GmmRepr> for Gmm {
    type Error = UncertaintyError;
    fn try_from(r: GmmRepr) -> Result<Self, Self::Error> {
        let k = r.weights.len();
        for n in [r.means.len(), r.covariances.len()] {
            if n != k {
                return Err(UncertaintyError::DimensionMismatch { expected: k, got: n });
            }
        }
        let components = r
            .weights
            .into_iter()
            .zip(r.means)
            .zip(r.covariances)
            .map(|((weight, mean), covariance)| GmmComponent { weight, mean, covariance })
            .collect();
        Gmm::new(components)
    }
}

impl From<Gmm> for GmmRepr {
    fn from(g: Gmm) -> Self {
        let mut r = GmmRepr {
            weights: Vec::new(),
            means: Vec::new(),
            covariances: Vec::new(),
        };
        for c in g.components {
            r.weights.push(c.weight);
            r.means.push(c.mean);
            r.covariances.push(c.covariance);
        }
        r
    }
}

/// Scalar mixture; a zero variance is a point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateGmm {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl UnivariateGmm {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self, UncertaintyError> {
        if weights.is_empty() {
            return Err(UncertaintyError::Empty);
        }
        if means.len() != weights.len() || variances.len() != weights.len() {
            return Err(UncertaintyError::DimensionMismatch {
                expected: weights.len(),
                got: means.len().min(variances.len()),
            });
        }
        if !means.iter().chain(&variances).all(|v| v.is_finite()) {
            return Err(UncertaintyError::NonFinite("univariate mixture"));
        }
        if let Some(k) = variances.iter().position(|&v| v < 0.0) {
            return Err(UncertaintyError::NotPsd {
                component: k,
                detail: format!("variance {}", variances[k]),
            });
        }
        let weights = normalize_weights(&weights)?;
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// Standard deviation of the whole mixture.
    pub fn pooled_sigma(&self) -> f64 {
        let mu = self.mean();
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * (v + (m - mu).powi(2)))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.variances.iter().all(|&v| v == 0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components()
            .map(|(w, m, v)| {
                if v == 0.0 {
                    if x >= m {
                        w
                    } else {
                        0.0
                    }
                } else {
                    w * 0.5 * erfc(-(x - m) / v.sqrt() * FRAC_1_SQRT_2)
                }
            })
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Density of the continuous part; point masses contribute nothing.
    pub fn pdf(&self, x: f64) -> f64 {
        self.components()
            .filter(|&(_, _, v)| v > 0.0)
            .map(|(w, m, v)| w * (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
            .sum()
    }

    /// Smallest `x` with `cdf(x) ≥ alpha` (to within 1e-10 in probability
    /// where the cdf is continuous).
    pub fn quantile(&self, alpha: f64) -> Result<f64, UncertaintyError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(UncertaintyError::Domain(alpha));
        }
        if self.is_degenerate() {
            return Ok(self.point_mass_quantile(alpha));
        }
        const PROB_TOL: f64 = 1e-13;
        let sigma_max = self.variances.iter().fold(0.0_f64, |m, &v| m.max(v)).sqrt();
        let lo_mean = self.means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi_mean = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (lo_mean - 12.0 * sigma_max, hi_mean + 12.0 * sigma_max);
        // Extreme levels can fall outside ±12σ; widen until bracketed.
        while self.cdf(lo) > alpha {
            lo -= (hi - lo).max(sigma_max);
        }
        while self.cdf(hi) < alpha {
            hi += (hi - lo).max(sigma_max);
        }
        let z = Normal::standard().inverse_cdf(alpha);
        let mut x = (self.mean() + self.pooled_sigma() * z).clamp(lo, hi);

        for _ in 0..200 {
            let g = self.cdf(x) - alpha;
            if g.abs() <= PROB_TOL {
                return Ok(x);
            }
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = self.pdf(x);
            let newton = x - g / slope;
            x = if slope > 1e-300 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
        }
        // Bracket collapsed onto a jump of the cdf (a point mass): the
        // left-continuous inverse is the upper end.
        Ok(if self.cdf(x) >= alpha { x } else { hi })
    }

    fn point_mass_quantile(&self, alpha: f64) -> f64 {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.means[a].total_cmp(&self.means[b]));
        let mut acc = 0.0;
        for &k in &order {
            acc += self.weights[k];
            if acc >= alpha {
                return self.means[k];
            }
        }
        self.means[*order.last().unwrap()]
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((&w, &m), &v)| (w, m, v))
    }
}

/// Distribution of `a·W̃ + b`.
pub fn affine_project(g: &Gmm, a: &[f64], b: f64) -> Result<UnivariateGmm, UncertaintyError> {
    if a.len() != g.dim {
        return Err(UncertaintyError::DimensionMismatch {
            expected: g.dim,
            got: a.len(),
        });
    }
    let mut weights = Vec::with_capacity(g.components.len());
    let mut means = Vec::with_capacity(g.components.len());
    let mut variances = Vec::with_capacity(g.components.len());
    for (k, c) in g.components.iter().enumerate() {
        let mean = a.iter().zip(&c.mean).map(|(x, y)| x * y).sum::<f64>() + b;
        let mut var = 0.0;
        for (i, row) in c.covariance.iter().enumerate() {
            var += a[i] * row.iter().zip(a).map(|(s, x)| s * x).sum::<f64>();
        }
        if var < -1e-12 {
            return Err(UncertaintyError::NotPsd {
                component: k,
                detail: format!("projected variance {var}"),
            });
        }
        weights.push(c.weight);
        means.push(mean);
        variances.push(var.max(0.0));
    }
    UnivariateGmm::new(weights, means, variances)
}

fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>, UncertaintyError> {
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(UncertaintyError::InvalidWeights(format!("weight {w} is not positive")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(UncertaintyError::InvalidWeights(format!("weights sum to {sum}")));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

fn check_psd(component: usize, cov: &[Vec<f64>]) -> Result<(), UncertaintyError> {
    let n = cov.len();
    let scale = cov.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > SYMMETRY_TOL * (1.0 + scale) {
                return Err(UncertaintyError::NotPsd {
                    component,
                    detail: format!("asymmetric at ({i}, {j})"),
                });
            }
        }
    }
    if n == 0 {
        return Ok(());
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
    let min_eig = m.symmetric_eigenvalues().min();
    if min_eig < -PSD_TOL * (1.0 + scale) {
        return Err(UncertaintyError::NotPsd {
            component,
            detail: format!("eigenvalue {min_eig}"),
        });
    }
    Ok(())
}

/// A factor `L` with `L Lᵀ = Σ`, tolerant of singular Σ.
fn psd_factor(cov: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cov.len();
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
    let eig = m.symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

pub(crate) fn gaussian_log_pdf(x: &[f64], mean: &[f64], cov: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
    let diff = DVector::from_fn(n, |i, _| x[i] - mean[i]);
    match m.cholesky() {
        Some(ch) => {
            let z = ch.l().solve_lower_triangular(&diff).expect("triangular solve");
            let log_det: f64 = ch.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            -0.5 * (z.norm_squared() + log_det + n as f64 * (2.0 * PI).ln())
        }
        None => f64::NEG_INFINITY,
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> UnivariateGmm {
        UnivariateGmm::new(vec![1.0], vec![0.0], vec![1.0]).unwrap()
    }

    fn symmetric() -> UnivariateGmm {
        UnivariateGmm::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.25, 0.25]).unwrap()
    }

    fn joint() -> Gmm {
        Gmm::new(vec![
            GmmComponent {
                weight: 0.4,
                mean: vec![10.0, 20.0],
                covariance: vec![vec![4.0, 1.0], vec![1.0, 9.0]],
            },
            GmmComponent {
                weight: 0.6,
                mean: vec![12.0, 18.0],
                covariance: vec![vec![1.0, -0.5], vec![-0.5, 2.0]],
            },
        ])
        .unwrap()
    }

    #[test]
    fn marginal_projection() {
        let u = affine_project(&joint(), &[0.0, 1.0], 0.0).unwrap();
        assert_eq!(u.means(), &[20.0, 18.0]);
        assert_eq!(u.variances(), &[9.0, 2.0]);
        assert_eq!(u.weights(), &[0.4, 0.6]);
    }

    #[test]
    fn zero_coefficients_give_point_mass() {
        let u = affine_project(&joint(), &[0.0, 0.0], 5.0).unwrap();
        assert!(u.is_degenerate());
        assert_eq!(u.quantile(0.3).unwrap(), 5.0);
        assert_eq!(u.cdf(5.0), 1.0);
        assert_eq!(u.cdf(4.999), 0.0);
    }

    #[test]
    fn cdf_tails_and_symmetry() {
        let u = symmetric();
        let s = u.pooled_sigma();
        assert!(u.cdf(-12.0 * s) < 1e-15);
        assert!(u.cdf(12.0 * s) > 1.0 - 1e-15);
        assert!((u.cdf(0.0) - 0.5).abs() < 1e-15);
        assert!(u.quantile(0.5).unwrap().abs() < 1e-9);
    }

    #[test]
    fn standard_normal_quantile() {
        // Φ⁻¹(0.05) to 16 digits.
        let q = standard().quantile(0.05).unwrap();
        assert!((q + 1.6448536269514722).abs() < 1e-9, "{q}");
    }

    #[test]
    fn quantile_round_trip() {
        let u = affine_project(&joint(), &[1.0, -0.7], 3.0).unwrap();
        for a in [0.01, 0.05, 0.5, 0.95, 0.99] {
            let x = u.quantile(a).unwrap();
            assert!((u.cdf(x) - a).abs() <= 1e-10);
        }
    }

    #[test]
    fn quantile_rejects_bad_levels() {
        for a in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(standard().quantile(a).is_err());
        }
    }

    #[test]
    fn separated_components_need_the_safeguard() {
        let u = UnivariateGmm::new(vec![0.5, 0.5], vec![0.0, 1000.0], vec![1e-4, 1e-4]).unwrap();
        for a in [0.3, 0.5, 0.7] {
            let x = u.quantile(a).unwrap();
            assert!((u.cdf(x) - a).abs() <= 1e-10 || (0.1..999.9).contains(&x), "{a} -> {x}");
        }
    }

    #[test]
    fn point_mass_quantile_is_left_continuous() {
        let u = UnivariateGmm::new(vec![0.25, 0.75], vec![2.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(u.quantile(0.75).unwrap(), 1.0);
        assert_eq!(u.quantile(0.76).unwrap(), 2.0);
    }

    #[test]
    fn rejects_invalid_mixtures() {
        let mut c = joint().components().to_vec();
        c[0].covariance = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(Gmm::new(c), Err(UncertaintyError::NotPsd { .. })));
        let mut c = joint().components().to_vec();
        c[1].weight = 0.7;
        assert!(matches!(Gmm::new(c), Err(UncertaintyError::InvalidWeights(_))));
        assert!(UnivariateGmm::new(vec![1.0], vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn weights_are_renormalized() {
        let u = UnivariateGmm::new(vec![0.3 + 1e-9, 0.7], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!((u.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let g = joint();
        let text = serde_json::to_string(&g).unwrap();
        let back: Gmm = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn mixture_mean_from_means_helper() {
        let g = Gmm::from_means(&[100.0, 50.0], &[4.0, 2.0], 0.5, &[0.65, 0.35], &[0.35, -0.65], &[0.8, 1.3])
            .unwrap();
        let m = g.mean();
        // 0.65·0.35 − 0.35·0.65 = 0: the offsets keep the mixture centered.
        assert!((m[0] - 100.0).abs() < 1e-12 && (m[1] - 50.0).abs() < 1e-12);
    }
}
