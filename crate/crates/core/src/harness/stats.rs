//! Empirical CDFs and percentiles of rate and power samples.

use crate::error::{Error, Result};

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid_arg("empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Sorted `(value, k/n)` pairs of the empirical CDF.
pub fn ecdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let v = sorted(values)?;
    let n = v.len() as f64;
    Ok(v.into_iter()
        .enumerate()
        .map(|(k, x)| (x, (k + 1) as f64 / n))
        .collect())
}

/// Fraction of samples `≤ x`.
pub fn ecdf_at(values: &[f64], x: f64) -> f64 {
    values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
}

/// Percentile `p ∈ [0, 1]` by lower interpolation: element `⌊p·(n−1)⌋` of the sorted sample.
pub fn percentile_lower(values: &[f64], p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid_arg(format!("percentile {p} outside [0, 1]")));
    }
    let v = sorted(values)?;
    let idx = (p * (v.len() - 1) as f64).floor() as usize;
    Ok(v[idx])
}

/// The rate reached by 95% of the sample; negative rates count as 0.
pub fn likely_rate_95(values: &[f64]) -> Result<f64> {
    percentile_lower(values, 0.05).map(|r| r.max(0.0))
}

pub fn median(values: &[f64]) -> Result<f64> {
    percentile_lower(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
        let probs: Vec<f64> = ecdf(&[3.0, 1.0, 4.0, 2.0])
            .unwrap()
            .iter()
            .map(|p| p.1)
            .collect();
        assert_eq!(probs, vec![0.25, 0.5, 0.75, 1.0]);
        assert!(ecdf(&[]).is_err());
    }

    #[test]
    fn ecdf_order_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let e = ecdf(&v).unwrap();
        assert_eq!(ecdf_at(&v, e[499].0), 0.5);
        assert!(e.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(e.last().unwrap().1, 1.0);
    }

    #[test]
    fn likely_rate_examples() {
        let v: Vec<f64> = (0..100).map(|x| x as f64).collect();
        assert_eq!(likely_rate_95(&v).unwrap(), 4.0);
        assert_eq!(likely_rate_95(&[7.5; 9]).unwrap(), 7.5);
        assert_eq!(likely_rate_95(&[-3.0, 1.0, 2.0]).unwrap(), 0.0);
        assert!(likely_rate_95(&[]).is_err());
    }
}
