//! Effective sample size and split R-hat.

use crate::error::{Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64], divisor_offset: f64) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - divisor_offset)
}

/// Effective sample size of one chain by Geyer's initial monotone sequence.
/// Returns 0 for a constant chain; antithetic chains are capped at `10 N`.
pub fn ess_single(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidInput(format!("ESS needs at least 10 draws, got {n}")));
    }
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 <= 0.0 || !c0.is_finite() {
        return Ok(0.0);
    }
    let rho = |lag: usize| -> f64 {
        c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * c0)
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (-1.0 + 2.0 * sum).max(0.1);
    Ok(n as f64 / tau)
}

/// Sum of per-chain effective sample sizes.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::InvalidInput("no chains".into()));
    }
    chains.iter().map(|c| ess_single(c)).sum()
}

/// Split R-hat. A single chain is split into halves; every chain is split
/// in two before comparing between- and within-chain variance. Zero
/// within-chain variance yields `+inf`.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::InvalidInput("no chains".into()));
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len < 4 {
        return Err(Error::InvalidInput("R-hat needs at least 4 draws per chain".into()));
    }
    let half = len / 2;
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = &c[..len];
        pieces.push(&c[..half]);
        pieces.push(&c[len - half..]);
    }
    let n = half as f64;
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let w = pieces.iter().map(|p| variance(p, 1.0)).sum::<f64>() / pieces.len() as f64;
    if !(w > 0.0) {
        return Ok(f64::INFINITY);
    }
    let b = n * variance(&means, 1.0);
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// Kolmogorov-Smirnov distance between the empirical law of `draws` and
/// the continuous `cdf`.
pub fn ks_statistic(draws: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = draws.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = cdf(*v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn iid_ess_near_n() {
        let x = normals(1, 4000);
        let e = ess(&[x]).unwrap();
        assert!((0.7 * 4000.0..=1.3 * 4000.0).contains(&e), "{e}");
    }

    #[test]
    fn ar1_ess() {
        let z = normals(2, 20000);
        let mut x = vec![0.0; z.len()];
        for i in 1..z.len() {
            x[i] = 0.9 * x[i - 1] + z[i];
        }
        let expected = 20000.0 * 0.1 / 1.9;
        let e = ess(&[x]).unwrap();
        assert!((e - expected).abs() < 0.3 * expected, "{e} vs {expected}");
    }

    #[test]
    fn alternating_and_constant() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(ess(&[x]).unwrap(), 1000.0);
        assert_eq!(ess(&[vec![2.0; 50]]).unwrap(), 0.0);
        assert!(ess(&[vec![1.0; 5]]).is_err());
    }

    #[test]
    fn rhat_cases() {
        let chains: Vec<Vec<f64>> = (0..4).map(|s| normals(10 + s, 5000)).collect();
        assert!(rhat(&chains).unwrap() < 1.01);
        let shifted = vec![normals(20, 500), normals(21, 500).iter().map(|v| v + 5.0).collect()];
        assert!(rhat(&shifted).unwrap() > 1.5);
        let single = rhat(&[normals(30, 100)]).unwrap();
        assert!(single.is_finite());
        assert_eq!(rhat(&[vec![1.0; 10], vec![1.0; 10]]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&x, |v| v) - 0.005).abs() < 1e-12);
        let shifted: Vec<f64> = x.iter().map(|v| v * 0.5).collect();
        assert!(ks_statistic(&shifted, |v| v.clamp(0.0, 1.0)) > 0.49);
    }
}
