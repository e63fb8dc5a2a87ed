//! Task similarity: feature statistics, FID, cosine similarity of mean
//! features, and expert selection.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{sandwich, sqrtm_psd, trace_sqrtm_psd};
use crate::nn::ExpertCnn;
use crate::{Error, Real, Result, Tensor};

/// Ridge added to both covariances when a task has no more samples than feature dimensions.
pub const COVARIANCE_SHRINKAGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityMetric {
    Fid,
    Cosine,
}

impl SimilarityMetric {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityMetric::Fid => "fid",
            SimilarityMetric::Cosine => "cosine",
        }
    }
}

/// Mean and (N-1)-normalized covariance of a task's features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    /// Row-major `dim x dim`.
    pub covariance: Vec<f64>,
    pub n_samples: usize,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn is_finite(&self) -> bool {
        self.mean.iter().chain(&self.covariance).all(|v| v.is_finite())
    }
}

/// Column mean and sample covariance of `[N, dim]` features.
pub fn feature_stats<S: Real>(features: &Tensor<S>) -> Result<FeatureStats> {
    if features.shape().len() != 2 {
        return Err(Error::shape("feature_stats [N, dim]", &[0, 0], features.shape()));
    }
    let (n, d) = (features.shape()[0], features.shape()[1]);
    if n < 2 {
        return Err(Error::InsufficientData(alloc::format!("feature_stats needs N >= 2, got {n}")));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(features.row(i)) {
            *m += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for ((c, &v), m) in centered.iter_mut().zip(features.row(i)).zip(&mean) {
            *c = v.as_f64() - m;
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[a * d + b] += ca * centered[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    Ok(FeatureStats {
        mean,
        covariance: cov,
        n_samples: n,
    })
}

/// Fréchet distance `|mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))`, clamped at zero.
///
/// The cross term is evaluated as `Tr((S1^(1/2) S2 S1^(1/2))^(1/2))`, which
/// has the same trace and keeps every square root symmetric.
pub fn fid(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d || a.covariance.len() != d * d || b.covariance.len() != d * d {
        return Err(Error::shape("fid", &[d], &[b.dim()]));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("feature stats"));
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let ridge = if a.n_samples <= d || b.n_samples <= d {
        COVARIANCE_SHRINKAGE
    } else {
        0.0
    };
    let with_ridge = |c: &[f64]| {
        let mut c = c.to_vec();
        for i in 0..d {
            c[i * d + i] += ridge;
        }
        c
    };
    let s1 = with_ridge(&a.covariance);
    let s2 = with_ridge(&b.covariance);
    let trace = |c: &[f64]| (0..d).map(|i| c[i * d + i]).sum::<f64>();
    let root1 = sqrtm_psd(&s1, d);
    let cross = trace_sqrtm_psd(&sandwich(&root1, &s2, d), d);
    let value = mean_term + trace(&s1) + trace(&s2) - 2.0 * cross;
    Ok(value.max(0.0))
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("cosine", &[a.len()], &[b.len()]));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero-norm vector"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Outcome of routing one incoming task.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<S> {
    pub expert: usize,
    /// Score per expert: FID (lower is closer) or cosine (higher is closer).
    pub scores: Vec<f64>,
    /// Features of the routed images under the chosen expert.
    pub features: Tensor<S>,
}

/// Picks the expert whose cached initialization statistics are closest to the
/// incoming images, each expert judged in its own feature space.
/// FID takes the argmin, cosine the argmax; ties go to the lowest index.
pub fn select_expert<S: Real>(
    images: &Tensor<S>,
    experts: &[ExpertCnn<S>],
    init_stats: &[FeatureStats],
    metric: SimilarityMetric,
) -> Result<Selection<S>> {
    if experts.is_empty() {
        return Err(Error::Empty("expert pool"));
    }
    if experts.len() != init_stats.len() {
        return Err(Error::shape("select_expert stats", &[experts.len()], &[init_stats.len()]));
    }
    let mut scores = Vec::with_capacity(experts.len());
    let mut best: Option<(usize, f64, Tensor<S>)> = None;
    for (i, (expert, cached)) in experts.iter().zip(init_stats).enumerate() {
        let features = expert.features(images)?;
        let stats = feature_stats(&features)?;
        let score = match metric {
            SimilarityMetric::Fid => fid(&stats, cached)?,
            SimilarityMetric::Cosine => cosine_similarity(&stats.mean, &cached.mean)?,
        };
        scores.push(score);
        let better = match &best {
            None => true,
            Some((_, s, _)) => match metric {
                SimilarityMetric::Fid => score < *s,
                SimilarityMetric::Cosine => score > *s,
            },
        };
        if better {
            best = Some((i, score, features));
        }
    }
    let (expert, _, features) = best.expect("non-empty pool");
    Ok(Selection {
        expert,
        scores,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_1d(mean: f64, var: f64) -> FeatureStats {
        FeatureStats {
            mean: vec![mean],
            covariance: vec![var],
            n_samples: 10,
        }
    }

    #[test]
    fn hand_covariance() {
        let f = Tensor::from_vec(&[2, 2], vec![0.0f64, 0.0, 2.0, 0.0]).unwrap();
        let s = feature_stats(&f).unwrap();
        assert_eq!(s.mean, vec![1.0, 0.0]);
        assert_eq!(s.covariance, vec![2.0, 0.0, 0.0, 0.0]);
        let same = Tensor::from_vec(&[2, 2], vec![1.0f64, 3.0, 1.0, 3.0]).unwrap();
        assert!(feature_stats(&same).unwrap().covariance.iter().all(|&v| v == 0.0));
        let one = Tensor::from_vec(&[1, 2], vec![1.0f64, 3.0]).unwrap();
        assert!(feature_stats(&one).is_err());
    }

    #[test]
    fn scalar_fid_closed_form() {
        let v = fid(&stats_1d(0.0, 1.0), &stats_1d(1.0, 4.0)).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        assert!(fid(&stats_1d(0.3, 2.0), &stats_1d(0.3, 2.0)).unwrap() < 1e-8);
    }

    #[test]
    fn fid_rejects_mismatched_or_non_finite() {
        let two = FeatureStats {
            mean: vec![0.0, 0.0],
            covariance: vec![1.0, 0.0, 0.0, 1.0],
            n_samples: 5,
        };
        assert!(fid(&two, &stats_1d(0.0, 1.0)).is_err());
        assert!(matches!(fid(&stats_1d(f64::NAN, 1.0), &stats_1d(0.0, 1.0)), Err(Error::NonFinite(_))));
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn empty_pool_is_an_error() {
        let imgs = Tensor::<f64>::zeros(&[2, 3, 8, 8]);
        assert!(matches!(select_expert(&imgs, &[], &[], SimilarityMetric::Fid), Err(Error::Empty(_))));
    }
}
