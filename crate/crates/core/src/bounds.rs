//! Sensitivity bounds for derived weighted LSH families: given a base family
//! `W` and a target function `W'`, `R_up` bounds from above the base-space
//! distance of any pair within radius `R` under `W'`, and `cR_down` bounds
//! from below the base-space distance of any pair beyond `cR`.

use crate::data::WeightVector;
use crate::error::{Error, Result};
use crate::metric::Metric;

/// Order-statistic relaxation of the ratio bounds. `v = v' = 1` reproduces
/// the exact max/min bounds; larger values trade the accuracy guarantee for
/// smaller table counts, so relaxed bounds are heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Relaxation {
    pub v: usize,
    pub v_prime: usize,
}

impl Relaxation {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.v < 1 || self.v_prime < 1 || self.v + self.v_prime > d + 1 {
            return Err(Error::InvalidParameter(format!(
                "relaxation (v={}, v'={}) violates 1 <= v <= d+1-v' <= d for d={d}",
                self.v, self.v_prime
            )));
        }
        Ok(())
    }
}

/// A base-to-target bound query.
#[derive(Debug, Clone)]
pub struct BoundSpec<'a> {
    pub metric: Metric,
    pub base: &'a WeightVector,
    pub target: &'a WeightVector,
    pub relaxation: Option<Relaxation>,
}

impl<'a> BoundSpec<'a> {
    pub fn new(metric: Metric, base: &'a WeightVector, target: &'a WeightVector) -> Self {
        BoundSpec { metric, base, target, relaxation: None }
    }

    pub fn with_relaxation(mut self, relaxation: Option<Relaxation>) -> Self {
        self.relaxation = relaxation;
        self
    }

    fn check(&self) -> Result<usize> {
        let d = self.base.dim();
        if self.target.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.target.dim() });
        }
        if let Some(r) = &self.relaxation {
            r.validate(d)?;
        }
        Ok(d)
    }

    /// Ratios `w_i / w'_i`, or their squares for the angular metric.
    fn ratios(&self, squared: bool) -> Vec<f64> {
        self.base
            .weights
            .iter()
            .zip(&self.target.weights)
            .map(|(a, b)| {
                let r = a / b;
                if squared {
                    r * r
                } else {
                    r
                }
            })
            .collect()
    }

    /// (upper, lower) order statistics after optional relaxation: the v-th
    /// largest and the v'-th smallest ratio.
    fn ratio_stats(&self, squared: bool) -> (f64, f64) {
        let mut ratios = self.ratios(squared);
        ratios.sort_by(f64::total_cmp);
        let d = ratios.len();
        let (v, v_prime) = match &self.relaxation {
            Some(r) => (r.v, r.v_prime),
            None => (1, 1),
        };
        (ratios[d - v], ratios[v_prime - 1])
    }
}

fn check_rc(r: f64, c: u32) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("R must be positive, got {r}")));
    }
    if c < 2 {
        return Err(Error::InvalidParameter(format!("c must be >= 2, got {c}")));
    }
    Ok(())
}

/// `(R_up, cR_down)` for the `l_p` metric.
pub fn lp_bounds(spec: &BoundSpec, r: f64, c: u32) -> Result<(f64, f64)> {
    spec.check()?;
    check_rc(r, c)?;
    if !matches!(spec.metric, Metric::Lp(_)) {
        return Err(Error::InvalidParameter("lp_bounds requires an l_p metric".into()));
    }
    let (hi, lo) = spec.ratio_stats(false);
    Ok((r * hi, c as f64 * r * lo))
}

/// `(R_up, cR_down)` for the Hamming metric; same ratio formulas as `l_p`.
pub fn hamming_bounds(spec: &BoundSpec, r: f64, c: u32) -> Result<(f64, f64)> {
    spec.check()?;
    check_rc(r, c)?;
    if spec.metric != Metric::Hamming {
        return Err(Error::InvalidParameter("hamming_bounds requires the Hamming metric".into()));
    }
    let (hi, lo) = spec.ratio_stats(false);
    Ok((r * hi, c as f64 * r * lo))
}

/// `(R_up, cR_down)` for the angular metric, with arccos arguments clamped.
///
/// The cosine of the base-space angle is bracketed by scaling the numerator
/// with the extreme squared ratios and the norm product with M or N. Which
/// norm bound keeps the inequality direction depends on the sign of the
/// bracketed numerator, so each bound switches chains at zero; the two
/// chains agree there.
pub fn angular_bounds(spec: &BoundSpec, r: f64, c: u32) -> Result<(f64, f64)> {
    spec.check()?;
    check_rc(r, c)?;
    if spec.metric != Metric::Angular {
        return Err(Error::InvalidParameter("angular_bounds requires the angular metric".into()));
    }
    let (m, n) = spec.ratio_stats(true);
    let up_arg = {
        let a = r.cos() + (n - m) / m;
        if a >= 0.0 {
            a
        } else {
            (m * r.cos() + (n - m)) / n
        }
    };
    let r_up = up_arg.max(-1.0).acos();
    let cr = c as f64 * r;
    let down_arg = {
        let a = m * cr.cos() / n + (m - n) / n;
        if a >= 0.0 {
            a
        } else {
            cr.cos() + (m - n) / m
        }
    };
    let cr_down = down_arg.min(1.0).acos();
    Ok((r_up, cr_down))
}

/// Metric dispatch over the three bound computations.
pub fn bounds(spec: &BoundSpec, r: f64, c: u32) -> Result<(f64, f64)> {
    match spec.metric {
        Metric::Lp(_) => lp_bounds(spec, r, c),
        Metric::Hamming => hamming_bounds(spec, r, c),
        Metric::Angular => angular_bounds(spec, r, c),
    }
}

/// A derived family is usable at `(R, c)` iff `R_up < cR_down`.
pub fn usable(spec: &BoundSpec, r: f64, c: u32) -> Result<bool> {
    let (r_up, cr_down) = bounds(spec, r, c)?;
    Ok(r_up < cr_down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::weighted_distance_coords;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn wv(weights: &[f64]) -> WeightVector {
        WeightVector::new(0, weights.to_vec()).unwrap()
    }

    #[test]
    fn identical_vectors_give_r_and_cr() {
        let w = wv(&[1.5, 2.0, 0.25]);
        for (metric, f) in [
            (Metric::Lp(1.0), lp_bounds as fn(&BoundSpec, f64, u32) -> Result<(f64, f64)>),
            (Metric::Hamming, hamming_bounds),
        ] {
            let spec = BoundSpec::new(metric, &w, &w);
            let (up, down) = f(&spec, 2.0, 3).unwrap();
            assert!((up - 2.0).abs() < 1e-12);
            assert!((down - 6.0).abs() < 1e-12);
            assert!(usable(&spec, 2.0, 3).unwrap());
        }
        let spec = BoundSpec::new(Metric::Angular, &w, &w);
        let (up, down) = angular_bounds(&spec, 0.3, 3).unwrap();
        assert!((up - 0.3).abs() < 1e-12);
        assert!((down - 0.9).abs() < 1e-12);
    }

    #[test]
    fn uniform_scaling() {
        let base = wv(&[2.0, 2.0]);
        let target = wv(&[1.0, 1.0]);
        let spec = BoundSpec::new(Metric::Lp(2.0), &base, &target);
        let (up, down) = lp_bounds(&spec, 1.0, 3).unwrap();
        assert_eq!((up, down), (2.0, 6.0));
    }

    #[test]
    fn hamming_mixed_ratios() {
        let base = wv(&[3.0, 1.0]);
        let target = wv(&[1.0, 1.0]);
        let spec = BoundSpec::new(Metric::Hamming, &base, &target);
        let (up, down) = hamming_bounds(&spec, 2.0, 2).unwrap();
        assert_eq!((up, down), (6.0, 4.0));
        assert!(!usable(&spec, 2.0, 2).unwrap());
    }

    #[test]
    fn angular_clamp_branch() {
        // (N-M)/M is close to -1 for a large ratio spread, so any R past
        // pi/2 pushes cos(R) + (N-M)/M below -1 and the bound clamps to pi.
        let base = wv(&[10.0, 0.1]);
        let target = wv(&[0.1, 10.0]);
        let spec = BoundSpec::new(Metric::Angular, &base, &target);
        let (up, _) = angular_bounds(&spec, 2.8, 2).unwrap();
        assert!((up - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn usable_is_bound_comparison() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..300 {
            let d = 4;
            let base = wv(&(0..d).map(|_| rng.gen_range(0.5..5.0)).collect::<Vec<_>>());
            let target = wv(&(0..d).map(|_| rng.gen_range(0.5..5.0)).collect::<Vec<_>>());
            let metric = match rng.gen_range(0..3) {
                0 => Metric::Lp(rng.gen_range(0.2..2.0)),
                1 => Metric::Hamming,
                _ => Metric::Angular,
            };
            let spec = BoundSpec::new(metric, &base, &target);
            let r = rng.gen_range(0.01..1.0);
            let c = rng.gen_range(2..6);
            let (up, down) = bounds(&spec, r, c).unwrap();
            assert_eq!(usable(&spec, r, c).unwrap(), up < down);
        }
    }

    #[test]
    fn relaxation_validation() {
        let w = wv(&[1.0; 4]);
        let spec = BoundSpec::new(Metric::Lp(2.0), &w, &w)
            .with_relaxation(Some(Relaxation { v: 3, v_prime: 3 }));
        assert!(lp_bounds(&spec, 1.0, 2).is_err());
        let ok = BoundSpec::new(Metric::Lp(2.0), &w, &w)
            .with_relaxation(Some(Relaxation { v: 2, v_prime: 3 }));
        assert!(lp_bounds(&ok, 1.0, 2).is_ok());
    }

    #[test]
    fn relaxation_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let d = 8;
        for _ in 0..50 {
            let base = wv(&(0..d).map(|_| rng.gen_range(1.0..10.0)).collect::<Vec<_>>());
            let target = wv(&(0..d).map(|_| rng.gen_range(1.0..10.0)).collect::<Vec<_>>());
            let mut last_up = f64::INFINITY;
            let mut last_down = 0.0f64;
            for v in 1..=d / 2 {
                let spec = BoundSpec::new(Metric::Lp(1.0), &base, &target)
                    .with_relaxation(Some(Relaxation { v, v_prime: v }));
                let (up, down) = lp_bounds(&spec, 1.0, 2).unwrap();
                assert!(up <= last_up + 1e-12);
                assert!(down >= last_down - 1e-12);
                last_up = up;
                last_down = down;
            }
        }
    }

    #[test]
    fn swapping_base_and_target_inverts_ratios() {
        let base = wv(&[4.0, 2.0]);
        let target = wv(&[2.0, 1.0]);
        // Uniform ratio 2: forward bounds scale by 2, backward by 1/2.
        let fwd = BoundSpec::new(Metric::Lp(2.0), &base, &target);
        let bwd = BoundSpec::new(Metric::Lp(2.0), &target, &base);
        let (fu, fd) = lp_bounds(&fwd, 1.0, 2).unwrap();
        let (bu, bd) = lp_bounds(&bwd, 1.0, 2).unwrap();
        assert!((fu * bu - 1.0).abs() < 1e-12);
        assert!((fd * bd - 4.0).abs() < 1e-12);
    }

    fn containment_case(metric: Metric, rng: &mut ChaCha12Rng, pairs: usize) {
        let d = 6;
        let base = wv(&(0..d).map(|_| rng.gen_range(1.0..10.0)).collect::<Vec<_>>());
        let target = wv(&(0..d).map(|_| rng.gen_range(1.0..10.0)).collect::<Vec<_>>());
        let spec = BoundSpec::new(metric, &base, &target);
        let c = 2;

        let gen_point = |rng: &mut ChaCha12Rng| -> Vec<f64> {
            match metric {
                Metric::Hamming => (0..d).map(|_| f64::from(rng.gen_bool(0.5))).collect(),
                _ => (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            }
        };

        // Pick R from an initial sample so that both branches get exercised.
        let mut sample = Vec::new();
        for _ in 0..64 {
            let x = gen_point(rng);
            let y = gen_point(rng);
            if let Ok(dist) = weighted_distance_coords(&metric, &target, &x, &y) {
                if dist > 0.0 {
                    sample.push(dist);
                }
            }
        }
        sample.sort_by(f64::total_cmp);
        let r = sample[sample.len() / 4] / c as f64;
        let (r_up, cr_down) = bounds(&spec, r, c).unwrap();

        for _ in 0..pairs {
            let x = gen_point(rng);
            let y = gen_point(rng);
            let (dt, db) = match (
                weighted_distance_coords(&metric, &target, &x, &y),
                weighted_distance_coords(&metric, &base, &x, &y),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            if dt <= r {
                assert!(db <= r_up + 1e-9, "containment broken above: {db} > {r_up}");
            }
            if dt >= c as f64 * r {
                assert!(db >= cr_down - 1e-9, "containment broken below: {db} < {cr_down}");
            }
        }
    }

    #[test]
    fn containment_small() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for metric in [Metric::Lp(2.0), Metric::Lp(1.0), Metric::Lp(1.5), Metric::Hamming, Metric::Angular] {
            for _ in 0..3 {
                containment_case(metric, &mut rng, 1000);
            }
        }
    }
}
