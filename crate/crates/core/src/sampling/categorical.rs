use rand::Rng;

/// Running sums of `weights` divided by their total. The last entry is 1.
pub fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    let total = acc;
    for c in cdf.iter_mut() {
        *c /= total;
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// Cumulative distribution from log-weights, shifted by their maximum.
pub fn cumulative_from_logs(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    cumulative(&w)
}

/// First index whose cumulative value exceeds `u`.
#[inline]
pub fn invert(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Inverse-CDF draw: one uniform variate per sample.
#[inline]
pub fn sample<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    invert(cdf, rng.random::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_boundaries() {
        let cdf = cumulative(&[1.0, 2.0, 1.0]);
        assert_eq!(cdf, vec![0.25, 0.75, 1.0]);
        assert_eq!(invert(&cdf, 0.0), 0);
        assert_eq!(invert(&cdf, 0.2499), 0);
        assert_eq!(invert(&cdf, 0.25), 1);
        assert_eq!(invert(&cdf, 0.9999), 2);
    }

    #[test]
    fn zero_weight_entries_are_never_drawn() {
        let cdf = cumulative(&[0.0, 1.0, 0.0, 1.0]);
        for k in 0..1000 {
            let idx = invert(&cdf, k as f64 / 1000.0);
            assert!(idx == 1 || idx == 3);
        }
    }
}
