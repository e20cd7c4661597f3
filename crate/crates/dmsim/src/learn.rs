//! DOA-error training sets, histogram density estimation, and grid-based
//! Bayesian learning of the error mean and standard deviation under uniform
//! priors.

use ndarray::Array2;
use rayon::prelude::*;

use crate::array::{generate_snapshots, sample_covariance, ArrayGeometry, SourceScenario};
use crate::doa::root_music;
use crate::error::{invalid, DmError, Result};
use crate::seed::derive_seed;
use crate::stats;

/// Repeated DOA measurement errors against a known true angle.
#[derive(Debug, Clone)]
pub struct ErrorSampleSet {
    pub errors_deg: Vec<f64>,
    pub true_angle_deg: f64,
    pub snr_db: f64,
    pub snapshots_per_measurement: usize,
    pub seed: u64,
    /// Measurements that failed outright (no usable root) and were recorded,
    /// not resampled.
    pub dropped: usize,
}

impl ErrorSampleSet {
    /// Raw measured angles (truth + error).
    pub fn measurements_deg(&self) -> Vec<f64> {
        self.errors_deg
            .iter()
            .map(|e| self.true_angle_deg + e)
            .collect()
    }
}

/// Normalized histogram over equal-width bins.
#[derive(Debug, Clone)]
pub struct HistogramDensity {
    pub bin_edges_deg: Vec<f64>,
    pub densities: Vec<f64>,
}

impl HistogramDensity {
    pub fn num_bins(&self) -> usize {
        self.densities.len()
    }

    /// Integral of the density over all bins; 1 up to roundoff.
    pub fn total_mass(&self) -> f64 {
        self.densities
            .iter()
            .enumerate()
            .map(|(i, d)| d * (self.bin_edges_deg[i + 1] - self.bin_edges_deg[i]))
            .sum()
    }
}

/// Gaussian fit of the measurement-error distribution.
#[derive(Debug, Clone)]
pub struct GaussianErrorModel {
    pub mean_deg: f64,
    pub std_deg: f64,
    /// Posterior std of the mean parameter; shrinks as the training set grows.
    pub posterior_mean_std_deg: f64,
    pub posterior: Option<PosteriorGrid>,
}

/// Joint posterior over (mu, sigma) on the prior grid, for diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    pub mu_grid_deg: Vec<f64>,
    pub sigma_grid_deg: Vec<f64>,
    /// Normalized mass, indexed `[mu][sigma]`.
    pub mass: Array2<f64>,
}

/// Uniform prior box for the Bayesian fit.
#[derive(Debug, Clone)]
pub struct BlPrior {
    pub mu_min_deg: f64,
    pub mu_max_deg: f64,
    pub sigma_min_deg: f64,
    pub sigma_max_deg: f64,
    pub grid_points: usize,
    /// When set, the prior is uniform in the variance sigma^2 rather than in
    /// sigma; implemented as a Jacobian weight on the sigma grid.
    pub variance_uniform: bool,
}

pub const SIGMA_FLOOR_DEG: f64 = 0.001;

impl BlPrior {
    /// Default box: mu in sample mean +- 5 sample std (at least +-2 degrees),
    /// sigma in [0.001, 5 sample std] (at least 2 degrees), 400x400 grid.
    pub fn default_for(samples: &[f64]) -> Self {
        Self::default_for_with_grid(samples, 400)
    }

    pub fn default_for_with_grid(samples: &[f64], grid_points: usize) -> Self {
        let m = stats::mean(samples);
        let s = stats::std_dev(samples);
        let half = (5.0 * s).max(2.0);
        Self {
            mu_min_deg: m - half,
            mu_max_deg: m + half,
            sigma_min_deg: SIGMA_FLOOR_DEG,
            sigma_max_deg: (5.0 * s).max(2.0),
            grid_points,
            variance_uniform: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu_max_deg > self.mu_min_deg) {
            return Err(invalid("prior_mu_range", "must have positive width"));
        }
        if !(self.sigma_min_deg > 0.0) || !(self.sigma_max_deg > self.sigma_min_deg) {
            return Err(invalid(
                "prior_sigma_range",
                "must have positive width with sigma_min > 0",
            ));
        }
        if self.grid_points < 2 {
            return Err(invalid("grid_points", "need at least 2 grid points"));
        }
        Ok(())
    }
}

/// Take `k` independent Root-MUSIC measurements, each from a fresh block of
/// `m` snapshots, and return the errors against the true angle.
pub fn collect_training_set(
    true_angle_deg: f64,
    k: usize,
    m: usize,
    snr_db: f64,
    geometry: &ArrayGeometry,
    seed: u64,
) -> Result<ErrorSampleSet> {
    if k < 1 {
        return Err(invalid("k", "training set size must be at least 1"));
    }
    if m < 2 {
        return Err(invalid("m", "need at least 2 snapshots per measurement"));
    }
    let scenario = SourceScenario::single_source(true_angle_deg, snr_db)?;
    let outcomes: Vec<Option<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let block_seed = derive_seed(seed, &[i as u64]);
            let x = generate_snapshots(&scenario, geometry, m, block_seed).ok()?;
            let r = sample_covariance(&x);
            let est = root_music(&r, geometry, 1).ok()?;
            Some(est.angles_deg[0] - true_angle_deg)
        })
        .collect();
    let dropped = outcomes.iter().filter(|o| o.is_none()).count();
    let errors_deg: Vec<f64> = outcomes.into_iter().flatten().collect();
    if errors_deg.is_empty() {
        return Err(DmError::NotEnoughRoots {
            needed: 1,
            found: 0,
            dropped,
        });
    }
    Ok(ErrorSampleSet {
        errors_deg,
        true_angle_deg,
        snr_db,
        snapshots_per_measurement: m,
        seed,
        dropped,
    })
}

/// Equal-width histogram over [min, max], normalized to integrate to 1.
/// All-equal samples degenerate to a single unit-mass bin of width 1e-6.
pub fn histogram(samples: &[f64], num_bins: usize) -> Result<HistogramDensity> {
    if samples.is_empty() {
        return Err(invalid("samples", "need at least one sample"));
    }
    if num_bins < 1 {
        return Err(invalid("num_bins", "need at least one bin"));
    }
    let min = samples.iter().cloned().fold(f64::MAX, f64::min);
    let max = samples.iter().cloned().fold(f64::MIN, f64::max);
    if max - min < 1e-12 {
        // normalize against the realized edge difference, not the nominal
        // width: the edges are min +- w/2 and the subtraction of two nearly
        // equal numbers does not reproduce w exactly
        let half = (0.5e-6f64).max(min.abs() * f64::EPSILON * 4.0);
        let (lo, hi) = (min - half, min + half);
        return Ok(HistogramDensity {
            bin_edges_deg: vec![lo, hi],
            densities: vec![1.0 / (hi - lo)],
        });
    }
    let width = (max - min) / num_bins as f64;
    let mut counts = vec![0usize; num_bins];
    for &x in samples {
        let idx = (((x - min) / width) as usize).min(num_bins - 1);
        counts[idx] += 1;
    }
    let total = samples.len() as f64;
    let densities = counts
        .iter()
        .map(|&c| c as f64 / (total * width))
        .collect();
    let bin_edges_deg = (0..=num_bins).map(|i| min + i as f64 * width).collect();
    Ok(HistogramDensity {
        bin_edges_deg,
        densities,
    })
}

/// Grid-posterior fit of a Gaussian to the samples under the uniform prior
/// box. The likelihood is evaluated in the log domain from sufficient
/// statistics and normalized; the reported point estimates are the posterior
/// means of mu and sigma.
pub fn bl_fit(samples: &[f64], prior: &BlPrior) -> Result<GaussianErrorModel> {
    bl_fit_impl(samples, prior, true)
}

/// `bl_fit` without retaining the posterior grid (cheaper for tight loops).
pub fn bl_fit_point(samples: &[f64], prior: &BlPrior) -> Result<GaussianErrorModel> {
    bl_fit_impl(samples, prior, false)
}

fn bl_fit_impl(samples: &[f64], prior: &BlPrior, keep_grid: bool) -> Result<GaussianErrorModel> {
    if samples.is_empty() {
        return Err(invalid("samples", "need at least one sample"));
    }
    prior.validate()?;
    let g = prior.grid_points;
    let k = samples.len() as f64;
    let sum: f64 = samples.iter().sum();
    let sum_sq: f64 = samples.iter().map(|x| x * x).sum();

    let mu_step = (prior.mu_max_deg - prior.mu_min_deg) / (g - 1) as f64;
    let sig_step = (prior.sigma_max_deg - prior.sigma_min_deg) / (g - 1) as f64;
    let mu_grid: Vec<f64> = (0..g).map(|i| prior.mu_min_deg + i as f64 * mu_step).collect();
    let sig_grid: Vec<f64> = (0..g)
        .map(|i| prior.sigma_min_deg + i as f64 * sig_step)
        .collect();

    // log L(mu, sigma) = -K log sigma - (sum_sq - 2 mu sum + K mu^2) / (2 sigma^2)
    let mut log_post = Array2::<f64>::zeros((g, g));
    let mut max_lp = f64::MIN;
    for (i, &mu) in mu_grid.iter().enumerate() {
        let quad = sum_sq - 2.0 * mu * sum + k * mu * mu;
        for (j, &sig) in sig_grid.iter().enumerate() {
            let mut lp = -k * sig.ln() - quad / (2.0 * sig * sig);
            if prior.variance_uniform {
                // d(sigma^2) = 2 sigma d(sigma)
                lp += sig.ln();
            }
            log_post[(i, j)] = lp;
            if lp > max_lp {
                max_lp = lp;
            }
        }
    }
    let mut mass = log_post.mapv(|lp| (lp - max_lp).exp());
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(DmError::PriorSupportTooNarrow);
    }
    mass.mapv_inplace(|m| m / total);

    // posterior piled onto the mu boundary or the sigma upper boundary means
    // the prior box clipped the likelihood
    let mu_boundary: f64 = (0..g).map(|j| mass[(0, j)] + mass[(g - 1, j)]).sum();
    let sig_upper: f64 = (0..g).map(|i| mass[(i, g - 1)]).sum();
    if mu_boundary > 0.99 || sig_upper > 0.99 {
        return Err(DmError::PriorSupportTooNarrow);
    }

    let mut mean_mu = 0.0;
    let mut mean_mu_sq = 0.0;
    let mut mean_sig = 0.0;
    for i in 0..g {
        for j in 0..g {
            let w = mass[(i, j)];
            mean_mu += w * mu_grid[i];
            mean_mu_sq += w * mu_grid[i] * mu_grid[i];
            mean_sig += w * sig_grid[j];
        }
    }
    let posterior_mean_std_deg = (mean_mu_sq - mean_mu * mean_mu).max(0.0).sqrt();
    Ok(GaussianErrorModel {
        mean_deg: mean_mu,
        std_deg: mean_sig,
        posterior_mean_std_deg,
        posterior: keep_grid.then(|| PosteriorGrid {
            mu_grid_deg: mu_grid,
            sigma_grid_deg: sig_grid,
            mass,
        }),
    })
}

/// Refined DOA from a training set: the posterior mean of the measurement
/// distribution's location, i.e. the TDS mean with the learned bias removed.
pub fn bl_refined_angle(measurements_deg: &[f64], grid_points: usize) -> Result<f64> {
    let prior = BlPrior::default_for_with_grid(measurements_deg, grid_points);
    let model = bl_fit_point(measurements_deg, &prior)?;
    Ok(model.mean_deg)
}

/// Root mean squared error of the estimates against the truth.
pub fn rmse(estimates_deg: &[f64], truth_deg: f64) -> f64 {
    let n = estimates_deg.len() as f64;
    (estimates_deg
        .iter()
        .map(|e| (e - truth_deg) * (e - truth_deg))
        .sum::<f64>()
        / n)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn geo(n: usize) -> ArrayGeometry {
        ArrayGeometry::ula_half_wavelength(n, 3.0e9).unwrap()
    }

    #[test]
    fn noiseless_training_set_has_zero_errors() {
        let set =
            collect_training_set(20.0, 8, 4, f64::INFINITY, &geo(8), 1).unwrap();
        assert_eq!(set.dropped, 0);
        for e in &set.errors_deg {
            assert!(e.abs() < 1e-6, "error {e}");
        }
    }

    #[test]
    fn training_set_is_reproducible() {
        let a = collect_training_set(20.0, 20, 4, 0.0, &geo(8), 7).unwrap();
        let b = collect_training_set(20.0, 20, 4, 0.0, &geo(8), 7).unwrap();
        assert_eq!(a.errors_deg, b.errors_deg);
    }

    #[test]
    fn histogram_degenerate_samples_single_bin() {
        let h = histogram(&[0.0, 0.0, 0.0], 10).unwrap();
        assert_eq!(h.num_bins(), 1);
        assert!((h.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_uniform_samples_flat() {
        let mut rng = derive_rng(3, &[]);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = histogram(&samples, 20).unwrap();
        for d in &h.densities {
            assert!((d - 0.5).abs() / 0.5 < 0.15, "density {d}");
        }
    }

    #[test]
    fn histogram_normalizes() {
        let mut rng = derive_rng(4, &[]);
        let samples: Vec<f64> = (0..500).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let h = histogram(&samples, 13).unwrap();
        assert!((h.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bl_fit_degenerate_samples() {
        let samples = vec![1.5; 30];
        let prior = BlPrior::default_for(&samples);
        let model = bl_fit(&samples, &prior).unwrap();
        let res = (prior.mu_max_deg - prior.mu_min_deg) / (prior.grid_points - 1) as f64;
        assert!((model.mean_deg - 1.5).abs() <= res);
        assert!(model.std_deg < 0.1);
    }

    #[test]
    fn bl_fit_recovers_synthetic_gaussian() {
        let mut rng = derive_rng(5, &[]);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| 0.3 + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let prior = BlPrior::default_for(&samples);
        let model = bl_fit(&samples, &prior).unwrap();
        assert!((model.mean_deg - 0.3).abs() < 0.02);
        assert!((model.std_deg - 0.5).abs() < 0.02);
    }

    #[test]
    fn bl_fit_posterior_normalizes() {
        let samples = vec![0.1, -0.4, 0.3, 0.0, 0.2];
        let model = bl_fit(&samples, &BlPrior::default_for(&samples)).unwrap();
        let total: f64 = model.posterior.unwrap().mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bl_fit_large_k_matches_sample_mean() {
        let mut rng = derive_rng(6, &[]);
        let samples: Vec<f64> = (0..1000)
            .map(|_| -0.7 + 1.2 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let prior = BlPrior::default_for(&samples);
        let res = (prior.mu_max_deg - prior.mu_min_deg) / (prior.grid_points - 1) as f64;
        let model = bl_fit(&samples, &prior).unwrap();
        assert!((model.mean_deg - stats::mean(&samples)).abs() <= 2.0 * res);
    }

    #[test]
    fn bl_fit_rejects_narrow_prior() {
        let samples = vec![10.0, 10.1, 9.9, 10.05];
        let prior = BlPrior {
            mu_min_deg: 0.0,
            mu_max_deg: 1.0,
            sigma_min_deg: SIGMA_FLOOR_DEG,
            sigma_max_deg: 0.5,
            grid_points: 50,
            variance_uniform: false,
        };
        assert!(matches!(
            bl_fit(&samples, &prior),
            Err(DmError::PriorSupportTooNarrow)
        ));
    }

    #[test]
    fn variance_uniform_toggle_changes_sigma_estimate() {
        let mut rng = derive_rng(7, &[]);
        let samples: Vec<f64> = (0..20)
            .map(|_| 0.6 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut prior = BlPrior::default_for(&samples);
        let a = bl_fit_point(&samples, &prior).unwrap();
        prior.variance_uniform = true;
        let b = bl_fit_point(&samples, &prior).unwrap();
        assert!((a.std_deg - b.std_deg).abs() > 1e-6);
        // with only 20 samples the two priors disagree a little, not wildly
        assert!((a.std_deg - b.std_deg).abs() < 0.5);
    }

    #[test]
    fn posterior_mean_std_shrinks_with_k() {
        let trials = 200;
        let mut means = Vec::new();
        for &k in &[1usize, 5, 10, 20] {
            let mut acc = 0.0;
            for t in 0..trials {
                let mut rng = derive_rng(8, &[k as u64, t]);
                let samples: Vec<f64> = (0..k)
                    .map(|_| 0.8 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let prior = BlPrior::default_for_with_grid(&samples, 100);
                acc += bl_fit_point(&samples, &prior).unwrap().posterior_mean_std_deg;
            }
            means.push(acc / trials as f64);
        }
        for w in means.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "posterior width grew: {means:?}");
        }
    }

    #[test]
    fn noiseless_refinement_is_identity() {
        let set = collect_training_set(12.0, 5, 4, f64::INFINITY, &geo(8), 2).unwrap();
        let refined = bl_refined_angle(&set.measurements_deg(), 200).unwrap();
        assert!((refined - 12.0).abs() < 1e-6);
    }

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[0.0, 0.0], 0.0), 0.0);
        assert!((rmse(&[1.0, -1.0], 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_histogram_is_near_symmetric_at_10_db() {
        // above the subspace threshold region the error law is clean and
        // close to Gaussian; at low SNR rare subspace swaps add heavy tails
        let set = collect_training_set(30.0, 2000, 4, 10.0, &geo(16), 9).unwrap();
        let s = stats::skewness(&set.errors_deg);
        assert!(s.abs() < 0.3, "skewness {s}");
    }
}
