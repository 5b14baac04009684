//! Nonparanormal Gaussianization: winsorized normal scores of the ranks,
//! extended to new values by clamped linear interpolation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::DataMatrix;

/// Monotone map for one column: distinct training values and their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub knots: Vec<f64>,
    pub scores: Vec<f64>,
}

impl ColumnMap {
    pub fn apply(&self, x: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if x <= k[0] {
            return self.scores[0];
        }
        if x >= k[last] {
            return self.scores[last];
        }
        let hi = k.partition_point(|v| *v <= x);
        let lo = hi - 1;
        if k[lo] == x {
            return self.scores[lo];
        }
        let t = (x - k[lo]) / (k[hi] - k[lo]);
        self.scores[lo] + t * (self.scores[hi] - self.scores[lo])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpnTransform {
    pub columns: Vec<ColumnMap>,
    pub names: Vec<String>,
    pub delta: f64,
}

/// Truncation level `1 / (4 n^(1/4) sqrt(pi ln n))`.
pub fn winsor_level(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (4.0 * n.powf(0.25) * (std::f64::consts::PI * n.ln()).sqrt())
}

fn fit_column(x: &[f64], delta: f64, std_normal: &Normal) -> Option<ColumnMap> {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut knots = Vec::new();
    let mut raw = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        // average rank of the tie group, 1-based
        let rank = (i + j + 2) as f64 / 2.0;
        let u = (rank / n as f64).clamp(delta, 1.0 - delta);
        knots.push(sorted[i]);
        raw.push(std_normal.inverse_cdf(u));
        i = j + 1;
    }
    if knots.len() < 2 {
        return None;
    }
    // per-observation scores for the variance
    let mut obs = Vec::with_capacity(n);
    let mut g = 0;
    for v in &sorted {
        while knots[g] != *v {
            g += 1;
        }
        obs.push(raw[g]);
    }
    let mean = obs.iter().sum::<f64>() / n as f64;
    let var = obs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    Some(ColumnMap {
        knots,
        scores: raw.iter().map(|z| z / sd).collect(),
    })
}

/// Fits the per-column transforms.
pub fn fit_npn(y: &DataMatrix) -> Result<NpnTransform> {
    let n = y.n();
    if n < 10 {
        return Err(Error::InvalidInput(format!("nonparanormal fit needs n >= 10, got {n}")));
    }
    let delta = winsor_level(n);
    let std_normal = Normal::standard();
    let columns: Vec<Option<ColumnMap>> = (0..y.p())
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = y.values().column(j).iter().copied().collect();
            fit_column(&col, delta, &std_normal)
        })
        .collect();
    let mut out = Vec::with_capacity(columns.len());
    for (j, c) in columns.into_iter().enumerate() {
        match c {
            Some(c) => out.push(c),
            None => {
                return Err(Error::ConstantColumn {
                    column: y.names()[j].clone(),
                })
            }
        }
    }
    Ok(NpnTransform {
        columns: out,
        names: y.names().to_vec(),
        delta,
    })
}

/// Maps every value through its column's transform.
pub fn apply_npn(t: &NpnTransform, y: &DataMatrix) -> Result<DataMatrix> {
    if y.p() != t.columns.len() || y.names() != t.names.as_slice() {
        return Err(Error::InvalidInput(
            "data columns do not match the fitted transform".into(),
        ));
    }
    let v = y.values();
    let out = DMatrix::from_fn(y.n(), y.p(), |i, j| t.columns[j].apply(v[(i, j)]));
    DataMatrix::new(out, y.names().to_vec())
}
