use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_dt, sense, step_multirotor, step_payload_system, MotorBank, NoiseConfig, PayloadParams, PayloadState,
    ResidualModel, SensorFrame, VehicleParams, VehicleState,
};
use crate::error::Result;
use crate::mathcore::Vec3;

/// Owns one simulated vehicle (plus optional payload), its motors and its
/// sensor-noise RNG.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: VehicleParams,
    payload_params: Option<PayloadParams>,
    residual: ResidualModel,
    noise: NoiseConfig,
    rng: ChaCha8Rng,
    physics_dt: f64,
    vehicle: VehicleState,
    payload: Option<PayloadState>,
    motors: MotorBank,
    command: [f64; 4],
    time: f64,
    steps: u64,
}

impl Simulator {
    /// Starts at rest at `position` with the rotors spinning at hover speed.
    /// In payload mode the payload hangs `ℓ` below the vehicle.
    pub fn new(
        params: VehicleParams,
        payload_params: Option<PayloadParams>,
        residual: ResidualModel,
        noise: NoiseConfig,
        physics_dt: f64,
        seed: u64,
        position: Vec3,
    ) -> Result<Self> {
        params.validate()?;
        check_dt(physics_dt)?;
        if let Some(pp) = &payload_params {
            pp.validate()?;
        }
        let total = params.mass + payload_params.map_or(0.0, |p| p.mass);
        let hover = params.hover_rotor_speed(total);
        let vehicle = VehicleState::at_rest(position);
        let payload = payload_params.map(|pp| PayloadState::hanging(position, &pp, params.gravity));
        let motors = MotorBank::new([hover; 4], params.motor_time_constant);
        Ok(Simulator {
            params,
            payload_params,
            residual,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            physics_dt,
            vehicle,
            payload,
            motors,
            command: [hover; 4],
            time: 0.0,
            steps: 0,
        })
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn payload_params(&self) -> Option<&PayloadParams> {
        self.payload_params.as_ref()
    }

    pub fn residual_model(&self) -> &ResidualModel {
        &self.residual
    }

    pub fn vehicle(&self) -> &VehicleState {
        &self.vehicle
    }

    pub fn payload(&self) -> Option<&PayloadState> {
        self.payload.as_ref()
    }

    pub fn rotor_speeds(&self) -> [f64; 4] {
        self.motors.speeds
    }

    pub fn command(&self) -> [f64; 4] {
        self.command
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn physics_dt(&self) -> f64 {
        self.physics_dt
    }

    /// Places the vehicle (and re-hangs the payload below it).
    pub fn reset_to(&mut self, vehicle: VehicleState) {
        self.vehicle = vehicle;
        if let Some(pp) = &self.payload_params {
            self.payload = Some(PayloadState::hanging(vehicle.position, pp, self.params.gravity));
        }
    }

    /// Commanded rotor speeds, clamped to the rotor limits.
    pub fn set_command(&mut self, command: [f64; 4]) {
        let (lo, hi) = (self.params.rotor_speed_min, self.params.rotor_speed_max);
        self.command = command.map(|w| if w.is_finite() { w.clamp(lo, hi) } else { lo });
    }

    /// Sets the actual and commanded rotor speeds at once, bypassing the
    /// motor lag. Used to start from a trimmed condition.
    pub fn set_rotor_speeds(&mut self, speeds: [f64; 4]) {
        self.set_command(speeds);
        self.motors.speeds = self.command;
    }

    /// Ground-truth residual at the current state.
    pub fn true_residual(&self) -> (Vec3, Vec3) {
        self.residual.evaluate(&self.vehicle, self.time)
    }

    /// One physics step: integrate the body with the current rotor speeds,
    /// then advance the motor lag towards the command.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.physics_dt;
        let u = self.motors.speeds;
        match (&self.payload_params, &self.payload) {
            (Some(pp), Some(ps)) => {
                let (v, p) = step_payload_system(&self.params, pp, &self.vehicle, ps, u, &self.residual, self.time, dt)?;
                self.vehicle = v;
                self.payload = Some(p);
            }
            _ => {
                self.vehicle = step_multirotor(&self.params, &self.vehicle, u, &self.residual, self.time, dt)?;
            }
        }
        self.motors.update(self.command, dt);
        self.steps += 1;
        self.time = self.steps as f64 * dt;
        Ok(())
    }

    /// Runs `n` physics steps.
    pub fn advance(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    pub fn sense(&mut self) -> SensorFrame {
        let payload = self.payload_params.as_ref().zip(self.payload.as_ref());
        sense(
            &self.params,
            &self.vehicle,
            payload,
            self.motors.speeds,
            self.command,
            &self.residual,
            &self.noise,
            &mut self.rng,
            self.time,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_drift_over_ten_seconds() {
        let p = VehicleParams::crazyflie();
        let start = Vec3::new(0.0, 0.0, 1.0);
        let mut sim =
            Simulator::new(p, None, ResidualModel::None, NoiseConfig::default(), 0.001, 0, start).unwrap();
        sim.advance(10_000).unwrap();
        assert!((sim.vehicle().position - start).norm() < 1e-6);
        assert!((sim.time() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn command_is_clamped() {
        let p = VehicleParams::crazyflie();
        let mut sim = Simulator::new(p.clone(), None, ResidualModel::None, NoiseConfig::default(), 0.001, 0, Vec3::ZERO)
            .unwrap();
        sim.set_command([-5.0, 1e9, f64::NAN, 100.0]);
        assert_eq!(sim.command(), [0.0, p.rotor_speed_max, 0.0, 100.0]);
    }
}
