//! Centripetal Catmull-Rom interpolation of timed keys.
//!
//! Keys are points in `R^N` attached to strictly increasing frame times. The
//! curve between consecutive keys is evaluated with the Barry-Goldman
//! pyramid on centripetal knots (`alpha = 0.5`); the frame time is mapped
//! linearly onto each segment's knot interval. Endpoint tangents come from
//! reflected phantom keys, so a two-key spline is a straight line.

use crate::error::{Error, Result};

pub const CENTRIPETAL: f64 = 0.5;

/// Smallest knot step; keeps coincident keys from producing zero intervals.
const MIN_KNOT_STEP: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CatmullRom<const N: usize> {
    times: Vec<f64>,
    // padded with one phantom key at each end
    points: Vec<[f64; N]>,
    knots: Vec<f64>,
}

fn lerp<const N: usize>(a: &[f64; N], b: &[f64; N], w: f64) -> [f64; N] {
    std::array::from_fn(|i| a[i] + (b[i] - a[i]) * w)
}

fn dist<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl<const N: usize> CatmullRom<N> {
    pub fn new(times: &[f64], keys: &[[f64; N]]) -> Result<Self> {
        Self::with_alpha(times, keys, CENTRIPETAL)
    }

    pub fn with_alpha(times: &[f64], keys: &[[f64; N]], alpha: f64) -> Result<Self> {
        if times.len() != keys.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: keys.len(),
            });
        }
        if keys.len() < 2 {
            return Err(Error::Validation("spline needs at least 2 keys".into()));
        }
        if times.windows(2).any(|w| w[1].is_nan() || w[0].is_nan() || w[1] <= w[0]) {
            return Err(Error::Validation("key frames not increasing".into()));
        }
        let n = keys.len();
        let mut points = Vec::with_capacity(n + 2);
        points.push(lerp(&keys[1], &keys[0], 2.0));
        points.extend_from_slice(keys);
        points.push(lerp(&keys[n - 2], &keys[n - 1], 2.0));

        let mut knots = Vec::with_capacity(n + 2);
        knots.push(0.0);
        for w in points.windows(2) {
            let step = dist(&w[0], &w[1]).powf(alpha).max(MIN_KNOT_STEP);
            knots.push(knots.last().unwrap() + step);
        }
        Ok(CatmullRom {
            times: times.to_vec(),
            points,
            knots,
        })
    }

    /// Value at frame time `t`, clamped to the key range. Exact at keys.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.points[1];
        }
        if t >= self.times[n - 1] {
            return self.points[n];
        }
        let seg = self.times.partition_point(|&k| k <= t) - 1;
        if t == self.times[seg] {
            return self.points[seg + 1];
        }
        let s = (t - self.times[seg]) / (self.times[seg + 1] - self.times[seg]);
        let [p0, p1, p2, p3] = [0, 1, 2, 3].map(|i| &self.points[seg + i]);
        let [t0, t1, t2, t3] = [0, 1, 2, 3].map(|i| self.knots[seg + i]);
        let t = t1 + s * (t2 - t1);
        let a1 = lerp(p0, p1, (t - t0) / (t1 - t0));
        let a2 = lerp(p1, p2, (t - t1) / (t2 - t1));
        let a3 = lerp(p2, p3, (t - t2) / (t3 - t2));
        let b1 = lerp(&a1, &a2, (t - t0) / (t2 - t0));
        let b2 = lerp(&a2, &a3, (t - t1) / (t3 - t1));
        lerp(&b1, &b2, (t - t1) / (t2 - t1))
    }

    /// One value per integer frame in `0..frame_count`.
    pub fn sample(&self, frame_count: usize) -> Vec<[f64; N]> {
        (0..frame_count).map(|f| self.eval(f as f64)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_equal_keys_give_a_constant() {
        let s = CatmullRom::new(&[0.0, 9.0], &[[3.0, 4.0], [3.0, 4.0]]).unwrap();
        assert!(s.sample(10).iter().all(|p| *p == [3.0, 4.0]));
    }

    #[test]
    fn two_keys_give_a_straight_line() {
        let s = CatmullRom::new(&[0.0, 10.0], &[[100.0], [200.0]]).unwrap();
        for f in 0..=10 {
            assert!((s.eval(f as f64)[0] - (100.0 + 10.0 * f as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_unordered_times() {
        assert!(CatmullRom::new(&[0.0, 0.0], &[[1.0], [2.0]]).is_err());
        assert!(CatmullRom::new(&[0.0], &[[1.0]]).is_err());
    }

    #[test]
    fn clamps_outside_the_key_range() {
        let s = CatmullRom::new(&[2.0, 5.0], &[[1.0], [4.0]]).unwrap();
        assert_eq!(s.eval(0.0), [1.0]);
        assert_eq!(s.eval(9.0), [4.0]);
    }

    #[test]
    fn repeated_interior_keys_stay_finite() {
        let s = CatmullRom::new(&[0.0, 3.0, 6.0, 9.0], &[[0.0], [5.0], [5.0], [9.0]]).unwrap();
        for f in 0..10 {
            assert!(s.eval(f as f64)[0].is_finite());
        }
        assert_eq!(s.eval(3.0), [5.0]);
        assert_eq!(s.eval(6.0), [5.0]);
    }
}
