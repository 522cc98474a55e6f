//! Least-squares cubic splines on uniform knots.
//!
//! The fit is over the uniform cubic B-spline basis, which spans every C²
//! piecewise cubic on the knot grid. The normal equations are banded
//! (half-bandwidth 3) and solved with a banded Cholesky factorisation.

use crate::error::{Error, Result};

/// Uniform cubic B-spline matrix: segment value = [1 u u² u³] · M · c[i..i+4].
const BSPLINE: [[f64; 4]; 4] = [
    [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0, 0.0],
    [-3.0 / 6.0, 0.0, 3.0 / 6.0, 0.0],
    [3.0 / 6.0, -6.0 / 6.0, 3.0 / 6.0, 0.0],
    [-1.0 / 6.0, 3.0 / 6.0, -3.0 / 6.0, 1.0 / 6.0],
];

fn basis(u: f64) -> [f64; 4] {
    let v = 1.0 - u;
    [
        v * v * v / 6.0,
        (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0,
        (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0,
        u * u * u / 6.0,
    ]
}

/// Piecewise cubic with C² joins, one set of segments per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpline {
    start: f64,
    spacing: f64,
    /// `coeffs[channel][segment]` holds the coefficients of `u⁰…u³`, with
    /// `u = (t − t_i)/h` the local parameter of the segment.
    coeffs: Vec<Vec<[f64; 4]>>,
}

impl SmoothingSpline {
    pub fn segments(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.segments()).map(|i| self.start + i as f64 * self.spacing).collect()
    }

    pub fn coefficients(&self, channel: usize) -> &[[f64; 4]] {
        &self.coeffs[channel]
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let s = (t - self.start) / self.spacing;
        let last = self.segments() - 1;
        let i = (s.floor().max(0.0) as usize).min(last);
        (i, s - i as f64)
    }

    /// `n`-th derivative (0–3) of `channel` at `t`. Outside the knot range
    /// the end segments are extrapolated.
    pub fn derivative(&self, channel: usize, n: usize, t: f64) -> f64 {
        let (i, u) = self.locate(t);
        let c = &self.coeffs[channel][i];
        let h = self.spacing;
        match n {
            0 => c[0] + u * (c[1] + u * (c[2] + u * c[3])),
            1 => (c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])) / h,
            2 => (2.0 * c[2] + 6.0 * u * c[3]) / (h * h),
            3 => 6.0 * c[3] / (h * h * h),
            _ => 0.0,
        }
    }

    pub fn evaluate(&self, channel: usize, t: f64) -> f64 {
        self.derivative(channel, 0, t)
    }

    /// Sum of squared residuals of `channel` against the data.
    pub fn residual(&self, channel: usize, times: &[f64], values: &[f64]) -> f64 {
        times.iter().zip(values).map(|(&t, &y)| (self.evaluate(channel, t) - y).powi(2)).sum()
    }
}

/// Fits every channel of `values` (each the same length as `times`) with a
/// cubic spline on knots `times[0] + k·spacing`, minimising the squared error.
pub fn fit_smoothing_spline(times: &[f64], values: &[Vec<f64>], spacing: f64) -> Result<SmoothingSpline> {
    if times.is_empty() || values.is_empty() {
        return Err(Error::Empty("spline data"));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter("knot spacing must be positive".into()));
    }
    for ch in values {
        if ch.len() != times.len() {
            return Err(Error::LengthMismatch { expected: times.len(), actual: ch.len() });
        }
    }
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::UnsortedTimes { index: i + 1 });
    }
    if times.iter().chain(values.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spline data"));
    }
    let start = times[0];
    let span = times[times.len() - 1] - start;
    let segments = ((span / spacing) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    if times.len() < 4 * segments {
        return Err(Error::InsufficientData(format!(
            "{} points for {segments} segments; need at least 4 per segment",
            times.len()
        )));
    }
    let nb = segments + 3;
    // Lower band of the normal matrix: band[j][d] = A(j, j − d).
    let mut band = vec![[0.0; 4]; nb];
    let mut rhs = vec![vec![0.0; nb]; values.len()];
    let probe = SmoothingSpline { start, spacing, coeffs: vec![vec![[0.0; 4]; segments]] };
    for (k, &t) in times.iter().enumerate() {
        let (i, u) = probe.locate(t);
        let b = basis(u);
        for r in 0..4 {
            for s in 0..=r {
                band[i + r][r - s] += b[r] * b[s];
            }
            for (ch, out) in values.iter().zip(rhs.iter_mut()) {
                out[i + r] += b[r] * ch[k];
            }
        }
    }
    let factor = banded_cholesky(band)?;
    let coeffs = rhs
        .into_iter()
        .map(|b| {
            let c = banded_solve(&factor, b);
            (0..segments)
                .map(|i| {
                    let mut poly = [0.0; 4];
                    for (p, row) in poly.iter_mut().zip(&BSPLINE) {
                        *p = (0..4).map(|r| row[r] * c[i + r]).sum();
                    }
                    poly
                })
                .collect()
        })
        .collect();
    Ok(SmoothingSpline { start, spacing, coeffs })
}

/// In-place Cholesky of a symmetric positive-definite band matrix with
/// half-bandwidth 3. Returns `L` in the same lower-band layout.
fn banded_cholesky(mut a: Vec<[f64; 4]>) -> Result<Vec<[f64; 4]>> {
    let n = a.len();
    let scale = a.iter().map(|r| r[0]).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = a[j][0];
        for k in 1..=3.min(j) {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 1e-13 * scale) {
            return Err(Error::Singular("spline normal equations"));
        }
        let d = d.sqrt();
        a[j][0] = d;
        for i in (j + 1)..(j + 4).min(n) {
            // L(i, j) = (A(i, j) − Σ_k L(i, k) L(j, k)) / L(j, j)
            let mut v = a[i][i - j];
            for k in i.saturating_sub(3)..j {
                v -= a[i][i - k] * a[j][j - k];
            }
            a[i][i - j] = v / d;
        }
    }
    Ok(a)
}

fn banded_solve(l: &[[f64; 4]], mut b: Vec<f64>) -> Vec<f64> {
    let n = l.len();
    for i in 0..n {
        let mut v = b[i];
        for k in i.saturating_sub(3)..i {
            v -= l[i][i - k] * b[k];
        }
        b[i] = v / l[i][0];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..(i + 4).min(n) {
            v -= l[k][k - i] * b[k];
        }
        b[i] = v / l[i][0];
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_cubic_is_reproduced() {
        let t = grid(200, 2.0);
        let y: Vec<f64> = t.iter().map(|t| t * t * t - t).collect();
        let s = fit_smoothing_spline(&t, std::slice::from_ref(&y), 0.1).unwrap();
        assert!(s.residual(0, &t, &y) < 1e-9);
        assert!((s.derivative(0, 1, 1.234) - (3.0 * 1.234f64.powi(2) - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn joins_are_c2() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = grid(500, 3.0);
        let y: Vec<f64> = t.iter().map(|t| t.sin() + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let s = fit_smoothing_spline(&t, &[y], 0.1).unwrap();
        let h = 0.1;
        for i in 1..s.segments() {
            let (a, b) = (s.coefficients(0)[i - 1], s.coefficients(0)[i]);
            let left = [a.iter().sum::<f64>(), (a[1] + 2.0 * a[2] + 3.0 * a[3]) / h, (2.0 * a[2] + 6.0 * a[3]) / (h * h)];
            let right = [b[0], b[1] / h, 2.0 * b[2] / (h * h)];
            for k in 0..3 {
                assert!((left[k] - right[k]).abs() < 1e-9 * (1.0 + left[k].abs()), "knot {i} deriv {k}");
            }
        }
    }

    #[test]
    fn smooths_noise_around_constant() {
        let n = 1000;
        let t = grid(n, 5.0);
        let mut means = Vec::new();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..n).map(|_| 2.0 + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let s = fit_smoothing_spline(&t, &[y], 0.5).unwrap();
            let m = t.iter().map(|&t| s.evaluate(0, t)).sum::<f64>() / n as f64;
            means.push(m - 2.0);
        }
        // Mean of the fitted curve equals the data mean (constants are in the
        // spline space), so its spread is σ/√N.
        let rms = (means.iter().map(|m| m * m).sum::<f64>() / means.len() as f64).sqrt();
        assert!(rms < 2.0 * 0.5 / (n as f64).sqrt(), "{rms}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_smoothing_spline(&[], &[vec![]], 0.1).is_err());
        let t = [0.0, 0.2, 0.1, 0.3];
        assert!(matches!(fit_smoothing_spline(&t, &[vec![0.0; 4]], 1.0), Err(Error::UnsortedTimes { index: 2 })));
        let t = grid(10, 1.0);
        assert!(matches!(fit_smoothing_spline(&t, &[vec![0.0; 10]], 0.1), Err(Error::InsufficientData(_))));
        assert!(fit_smoothing_spline(&t, &[vec![0.0; 9]], 1.0).is_err());
    }
}
