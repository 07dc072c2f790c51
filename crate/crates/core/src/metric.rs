//! Exact weighted distance evaluation and the brute-force k-NN oracle.

use crate::data::{Dataset, Point, WeightVector};
use crate::error::{Error, Result};

/// The three supported distance measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// `l_p` distance with `0 < p <= 2`.
    Lp(f64),
    Hamming,
    Angular,
}

impl Metric {
    pub fn validate(&self) -> Result<()> {
        if let Metric::Lp(p) = self {
            if !(*p > 0.0 && *p <= 2.0) {
                return Err(Error::InvalidParameter(format!("p must lie in (0, 2], got {p}")));
            }
        }
        Ok(())
    }
}

fn check_dims(w: &WeightVector, x: &[f64], y: &[f64]) -> Result<()> {
    let d = w.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if y.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: y.len() });
    }
    Ok(())
}

/// `D_W(x, y) = D(W∘x, W∘y)` over raw coordinate slices.
pub fn weighted_distance_coords(metric: &Metric, w: &WeightVector, x: &[f64], y: &[f64]) -> Result<f64> {
    metric.validate()?;
    check_dims(w, x, y)?;
    match metric {
        Metric::Lp(p) => Ok(lp_weighted(*p, &w.weights, x, y)),
        Metric::Hamming => {
            let mut sum = 0.0;
            for i in 0..x.len() {
                sum += (w.weights[i] * x[i] - w.weights[i] * y[i]).abs();
            }
            Ok(sum)
        }
        Metric::Angular => {
            let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for i in 0..x.len() {
                let a = w.weights[i] * x[i];
                let b = w.weights[i] * y[i];
                dot += a * b;
                nx += a * a;
                ny += b * b;
            }
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::ZeroVector);
            }
            // Clamp absorbs rounding before arccos.
            Ok((dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0).acos())
        }
    }
}

pub(crate) fn lp_weighted(p: f64, weights: &[f64], x: &[f64], y: &[f64]) -> f64 {
    if p == 2.0 {
        let mut sum = 0.0;
        for i in 0..x.len() {
            let t = weights[i] * (x[i] - y[i]);
            sum += t * t;
        }
        sum.sqrt()
    } else if p == 1.0 {
        let mut sum = 0.0;
        for i in 0..x.len() {
            sum += (weights[i] * (x[i] - y[i])).abs();
        }
        sum
    } else {
        let mut sum = 0.0;
        for i in 0..x.len() {
            sum += (weights[i] * (x[i] - y[i])).abs().powf(p);
        }
        sum.powf(1.0 / p)
    }
}

/// `D_W(x, y)` over points.
pub fn weighted_distance(metric: &Metric, w: &WeightVector, x: &Point, y: &Point) -> Result<f64> {
    weighted_distance_coords(metric, w, &x.coords, &y.coords)
}

/// Exact k-NN by full scan; ties broken by ascending point id.
pub fn brute_force_knn(
    dataset: &Dataset,
    metric: &Metric,
    w: &WeightVector,
    q: &Point,
    k: usize,
) -> Result<Vec<(u32, f64)>> {
    let n = dataset.n();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut buf = Vec::with_capacity(dataset.d());
    let mut dists: Vec<(f64, u32)> = Vec::with_capacity(n);
    for i in 0..n {
        dataset.copy_row_f64(i, &mut buf);
        let dist = weighted_distance_coords(metric, w, &buf, &q.coords)?;
        dists.push((dist, i as u32));
    }
    dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dists.into_iter().take(k).map(|(dist, id)| (id, dist)).collect())
}
