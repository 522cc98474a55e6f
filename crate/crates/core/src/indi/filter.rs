use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::mathcore::Vec3;

/// Second-order Butterworth low-pass, bilinear transform with the cutoff
/// prewarped, applied independently to `N` channels.
///
/// The first sample initialises every channel to its steady state, so a
/// constant input passes through without a start-up transient.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthFilter<const N: usize> {
    cutoff_hz: f64,
    sample_rate_hz: f64,
    b: [f64; 3],
    a: [f64; 2],
    state: [[f64; 2]; N],
    initialized: bool,
}

impl<const N: usize> ButterworthFilter<N> {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0 && sample_rate_hz > 0.0 && cutoff_hz < 0.5 * sample_rate_hz) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                0.5 * sample_rate_hz
            )));
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(ButterworthFilter {
            cutoff_hz,
            sample_rate_hz,
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
            state: [[0.0; 2]; N],
            initialized: false,
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Decay time constant of the poles, `1/(ζ ω_c)` with `ζ = 1/√2`, s.
    pub fn time_constant(&self) -> f64 {
        SQRT_2 / (2.0 * PI * self.cutoff_hz)
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn reset(&mut self) {
        self.state = [[0.0; 2]; N];
        self.initialized = false;
    }

    /// Sets every channel to the steady state for a constant input `x`.
    pub fn prime(&mut self, x: [f64; N]) {
        let [b0, _, b2] = self.b;
        let [_, a2] = self.a;
        for (s, &xi) in self.state.iter_mut().zip(&x) {
            s[0] = xi * (1.0 - b0);
            s[1] = xi * (b2 - a2);
        }
        self.initialized = true;
    }

    pub fn step(&mut self, x: [f64; N]) -> [f64; N] {
        if !self.initialized {
            self.prime(x);
        }
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let mut y = [0.0; N];
        for ((s, &xi), yi) in self.state.iter_mut().zip(&x).zip(y.iter_mut()) {
            *yi = b0 * xi + s[0];
            s[0] = b1 * xi - a1 * *yi + s[1];
            s[1] = b2 * xi - a2 * *yi;
        }
        y
    }
}

impl ButterworthFilter<3> {
    pub fn step_vec3(&mut self, x: Vec3) -> Vec3 {
        Vec3::from_array(self.step(x.to_array()))
    }
}
