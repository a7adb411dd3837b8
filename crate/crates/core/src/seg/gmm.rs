//! One-dimensional Gaussian mixture fitted by EM with quantile-initialized
//! means and a variance floor.

use crate::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Gmm1d {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Total log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl Gmm1d {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    fn log_component_densities(&self, x: f64) -> Vec<f64> {
        self.means
            .iter()
            .zip(&self.variances)
            .zip(&self.weights)
            .map(|((&m, &v), &w)| {
                let d = x - m;
                w.max(1e-300).ln() - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
                    - d * d / (2.0 * v)
            })
            .collect()
    }

    /// Posterior responsibilities p(component | x); rows sum to one.
    pub fn posteriors(&self, x: f64) -> Vec<f64> {
        let logs = self.log_component_densities(x);
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut exp: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
        let sum: f64 = exp.iter().sum();
        for e in &mut exp {
            *e /= sum;
        }
        exp
    }

    pub fn log_likelihood(&self, x: f64) -> f64 {
        let logs = self.log_component_densities(x);
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + logs.iter().map(|&l| (l - m).exp()).sum::<f64>().ln()
    }
}

/// Fits a K-component 1D GMM by EM. Means start at the sample quantiles;
/// iteration stops when the log-likelihood gain drops below `tol` or after
/// `max_iter` rounds. Deterministic; `seed` is accepted for interface
/// stability but unused by the quantile initializer.
pub fn fit_gmm_1d(
    values: &[f64],
    k: usize,
    max_iter: usize,
    tol: f64,
    _seed: u64,
) -> Result<Gmm1d> {
    if k == 0 {
        return Err(Error::Gmm("k must be >= 1".into()));
    }
    if values.len() < k {
        return Err(Error::Gmm(format!(
            "{} values cannot support {} components",
            values.len(),
            k
        )));
    }
    let mut distinct = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sorted = distinct.clone();
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::Gmm(format!(
            "only {} distinct values for {} components (collapse)",
            distinct.len(),
            k
        )));
    }
    let n = values.len();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sample_mean = values.iter().sum::<f64>() / n as f64;
    let sample_var = values
        .iter()
        .map(|v| (v - sample_mean) * (v - sample_mean))
        .sum::<f64>()
        / n as f64;
    let init_var = (sample_var / k as f64).max(VARIANCE_FLOOR);

    let mut gmm = Gmm1d {
        weights: vec![1.0 / k as f64; k],
        means: (0..k)
            .map(|j| sorted[((j as f64 + 0.5) / k as f64 * n as f64) as usize % n])
            .collect(),
        variances: vec![init_var; k],
        log_likelihood_trace: Vec::new(),
    };

    let mut resp = vec![0.0f64; n * k];
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        // E step.
        let mut ll = 0.0;
        for (i, &x) in values.iter().enumerate() {
            let logs = gmm.log_component_densities(x);
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &l) in logs.iter().enumerate() {
                let e = (l - m).exp();
                resp[i * k + j] = e;
                sum += e;
            }
            for j in 0..k {
                resp[i * k + j] /= sum;
            }
            ll += m + sum.ln();
        }
        gmm.log_likelihood_trace.push(ll);

        // M step.
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk < 1e-12 {
                // Starved component: keep parameters, shrink weight.
                gmm.weights[j] = nk / n as f64;
                continue;
            }
            let mean = (0..n).map(|i| resp[i * k + j] * values[i]).sum::<f64>() / nk;
            let var = (0..n)
                .map(|i| {
                    let d = values[i] - mean;
                    resp[i * k + j] * d * d
                })
                .sum::<f64>()
                / nk;
            gmm.weights[j] = nk / n as f64;
            gmm.means[j] = mean;
            gmm.variances[j] = var.max(VARIANCE_FLOOR);
        }
        let wsum: f64 = gmm.weights.iter().sum();
        for w in &mut gmm.weights {
            *w /= wsum;
        }

        if ll - prev_ll < tol && prev_ll.is_finite() {
            break;
        }
        prev_ll = ll;
    }
    Ok(gmm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut values = Vec::new();
        for _ in 0..200 {
            values.push(0.1 + rng.random_range(-0.01..0.01));
            values.push(0.9 + rng.random_range(-0.01..0.01));
        }
        let gmm = fit_gmm_1d(&values, 2, 100, 1e-9, 0).unwrap();
        let mut means = gmm.means.clone();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());

        // 1D k-means oracle (Lloyd) on the same data.
        let mut centers = [0.2f64, 0.8];
        for _ in 0..50 {
            let mut acc = [0.0f64; 2];
            let mut cnt = [0usize; 2];
            for &v in &values {
                let j = if (v - centers[0]).abs() <= (v - centers[1]).abs() {
                    0
                } else {
                    1
                };
                acc[j] += v;
                cnt[j] += 1;
            }
            for j in 0..2 {
                if cnt[j] > 0 {
                    centers[j] = acc[j] / cnt[j] as f64;
                }
            }
        }
        assert!((means[0] - centers[0]).abs() < 0.02);
        assert!((means[1] - centers[1]).abs() < 0.02);
    }

    #[test]
    fn k1_closed_form() {
        let values: Vec<f64> = (0..50).map(|i| (i as f64) * 0.01).collect();
        let gmm = fit_gmm_1d(&values, 1, 50, 1e-12, 0).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / values.len() as f64;
        assert!((gmm.means[0] - mean).abs() < 1e-9);
        assert!((gmm.variances[0] - var.max(VARIANCE_FLOOR)).abs() < 1e-9);
        assert!((gmm.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..300)
            .map(|i| {
                if i % 3 == 0 {
                    rng.random_range(0.0..0.2)
                } else {
                    rng.random_range(0.5..1.0)
                }
            })
            .collect();
        let gmm = fit_gmm_1d(&values, 3, 80, 1e-12, 0).unwrap();
        for w in gmm.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "ll decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn posteriors_sum_to_one() {
        let values: Vec<f64> = (0..100).map(|i| (i % 10) as f64 * 0.1).collect();
        let gmm = fit_gmm_1d(&values, 3, 50, 1e-9, 0).unwrap();
        for &x in &[0.0, 0.33, 0.77, 1.0] {
            let p = gmm.posteriors(x);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let wsum: f64 = gmm.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collapse_error() {
        let values = vec![0.5; 30];
        assert!(matches!(
            fit_gmm_1d(&values, 2, 10, 1e-6, 0),
            Err(Error::Gmm(_))
        ));
    }
}
