use crate::dynamics::{SensorFrame, VehicleState};
use crate::error::{Error, Result};
use crate::mathcore::Vec3;

pub const FEATURE_DIM: usize = 19;
pub const LABEL_DIM: usize = 6;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "vx", "vy", "vz", "ax", "ay", "az", "wx", "wy", "wz", "r00", "r10", "r20", "r01", "r11", "r21", "pwm1", "pwm2",
    "pwm3", "pwm4",
];

pub const LABEL_NAMES: [&str; LABEL_DIM] = ["fax", "fay", "faz", "tax", "tay", "taz"];

/// Network input: `[v, v̇, ω, R e_x, R e_y, pwm]`.
///
/// `v̇` is reconstructed from the filtered accelerometer as
/// `R·accel_filtered − g e_z`, the same quantity the estimator inverts.
pub fn build_features(state: &VehicleState, frame: &SensorFrame, accel_filtered: Vec3, gravity: f64) -> [f64; FEATURE_DIM] {
    let r = &state.rotation;
    let v_dot = *r * accel_filtered - Vec3::E_Z * gravity;
    let mut x = [0.0; FEATURE_DIM];
    x[0..3].copy_from_slice(&state.velocity.to_array());
    x[3..6].copy_from_slice(&v_dot.to_array());
    x[6..9].copy_from_slice(&frame.gyro.to_array());
    x[9..12].copy_from_slice(&r.col(0).to_array());
    x[12..15].copy_from_slice(&r.col(1).to_array());
    x[15..19].copy_from_slice(&frame.pwm);
    x
}

/// Per-dimension ranges for min-max scaling to `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub in_min: Vec<f64>,
    pub in_max: Vec<f64>,
    pub out_min: Vec<f64>,
    pub out_max: Vec<f64>,
}

fn ranges<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in rows {
        for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    (lo, hi)
}

fn scale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        2.0 * (x - lo) / (hi - lo) - 1.0
    } else {
        0.0
    }
}

fn unscale(y: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (y + 1.0) * 0.5 * (hi - lo) + lo
    } else {
        lo
    }
}

impl NormStats {
    pub fn from_data<'a>(
        inputs: impl Iterator<Item = &'a [f64]>,
        outputs: impl Iterator<Item = &'a [f64]>,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self> {
        let (in_min, in_max) = ranges(inputs, in_dim);
        let (out_min, out_max) = ranges(outputs, out_dim);
        if in_min.iter().chain(&out_min).any(|v| !v.is_finite()) || in_max.iter().chain(&out_max).any(|v| !v.is_finite()) {
            return Err(Error::Empty("normalisation data"));
        }
        Ok(NormStats { in_min, in_max, out_min, out_max })
    }

    /// Identity-like stats mapping `[−1, 1]` to itself.
    pub fn unit(in_dim: usize, out_dim: usize) -> Self {
        NormStats {
            in_min: vec![-1.0; in_dim],
            in_max: vec![1.0; in_dim],
            out_min: vec![-1.0; out_dim],
            out_max: vec![1.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_min.len()
    }

    pub fn out_dim(&self) -> usize {
        self.out_min.len()
    }

    /// Dimensions with zero range; they normalise to 0.
    pub fn constant_inputs(&self) -> Vec<usize> {
        (0..self.in_dim()).filter(|&i| !(self.in_max[i] > self.in_min[i])).collect()
    }

    pub fn normalize_input(&self, x: &[f64], out: &mut [f64]) {
        for (i, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            *o = scale(v, self.in_min[i], self.in_max[i]);
        }
    }

    pub fn normalize_output(&self, y: &[f64], out: &mut [f64]) {
        for (i, (o, &v)) in out.iter_mut().zip(y).enumerate() {
            *o = scale(v, self.out_min[i], self.out_max[i]);
        }
    }

    pub fn denormalize_output(&self, y: &[f64], out: &mut [f64]) {
        for (i, (o, &v)) in out.iter_mut().zip(y).enumerate() {
            *o = unscale(v, self.out_min[i], self.out_max[i]);
        }
    }

    pub fn denormalize_input(&self, x: &[f64], out: &mut [f64]) {
        for (i, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            *o = unscale(v, self.in_min[i], self.in_max[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Mat3;

    fn frame(pwm: f64) -> SensorFrame {
        SensorFrame { accel: Vec3::new(0.0, 0.0, 9.81), gyro: Vec3::ZERO, rpm: [0.0; 4], pwm: [pwm; 4], timestamp: 0.0 }
    }

    #[test]
    fn hover_features() {
        let s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let x = build_features(&s, &frame(0.6), Vec3::new(0.0, 0.0, 9.81), 9.81);
        let expected = [0., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., 0., 1., 0., 0.6, 0.6, 0.6, 0.6];
        assert_eq!(x, expected);
    }

    #[test]
    fn yawed_rotation_columns() {
        let mut s = VehicleState::at_rest(Vec3::ZERO);
        s.rotation = Mat3::rot_z(std::f64::consts::FRAC_PI_2);
        let x = build_features(&s, &frame(0.5), Vec3::new(0.0, 0.0, 9.81), 9.81);
        let cols = &x[9..15];
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in cols.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn endpoints_and_midpoint() {
        let st = NormStats { in_min: vec![-2.0, 5.0], in_max: vec![4.0, 5.0], out_min: vec![0.0], out_max: vec![1.0] };
        let mut o = [0.0; 2];
        st.normalize_input(&[-2.0, 5.0], &mut o);
        assert_eq!(o, [-1.0, 0.0]);
        st.normalize_input(&[4.0, 7.0], &mut o);
        assert_eq!(o, [1.0, 0.0]);
        st.normalize_input(&[1.0, 5.0], &mut o);
        assert_eq!(o[0], 0.0);
        assert_eq!(st.constant_inputs(), vec![1]);
        // No clamping outside the training range.
        st.normalize_input(&[10.0, 5.0], &mut o);
        assert_eq!(o[0], 3.0);
    }
}
