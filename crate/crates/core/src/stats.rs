//! Small statistical helpers: ranks, Spearman correlation, bootstrap.

use rand::Rng;

use crate::rng::rng_from_seed;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation; NaN if either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    pearson(&ranks(x), &ranks(y))
}

/// Fraction of bootstrap resamples of `x` whose mean is strictly positive.
pub fn bootstrap_positive_mean_fraction(x: &[f64], resamples: usize, seed: u64) -> f64 {
    if x.is_empty() || resamples == 0 {
        return f64::NAN;
    }
    let mut rng = rng_from_seed(seed);
    let n = x.len();
    let mut positive = 0usize;
    for _ in 0..resamples {
        let s: f64 = (0..n).map(|_| x[rng.random_range(0..n)]).sum();
        if s > 0.0 {
            positive += 1;
        }
    }
    positive as f64 / resamples as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0, 25.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[5.0, 3.0, 2.0, 1.0, 0.0]) + 1.0).abs() < 1e-15);
        assert!(spearman(&x, &[1.0; 5]).is_nan());
    }

    #[test]
    fn spearman_matches_textbook_formula() {
        // no ties: 1 - 6 sum d^2 / (n (n^2 - 1))
        let x = [0.3, 1.2, -0.5, 2.2, 0.9, 1.7];
        let y = [1.0, 0.1, -2.0, 3.0, 2.5, 0.2];
        let (rx, ry) = (ranks(&x), ranks(&y));
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let expect = 1.0 - 6.0 * d2 / (6.0 * 35.0);
        assert!((spearman(&x, &y) - expect).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_extremes() {
        assert_eq!(bootstrap_positive_mean_fraction(&[1.0, 2.0, 0.5], 200, 1), 1.0);
        assert_eq!(bootstrap_positive_mean_fraction(&[-1.0, -2.0], 200, 1), 0.0);
    }

    #[test]
    fn summary_stats() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
