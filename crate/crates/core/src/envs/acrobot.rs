use std::f64::consts::PI;

use rand::Rng;

use super::{check_action, Observation, StepResult};
use crate::error::Result;

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_POS_1: f64 = 0.5;
const LINK_COM_POS_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
const TIME_LIMIT: usize = 500;

/// Two-link underactuated pendulum with torque applied at the elbow.
///
/// Internal state is `[theta1, theta2, dtheta1, dtheta2]`; the observation is
/// `[cos θ1, sin θ1, cos θ2, sin θ2, dθ1, dθ2]`.
#[derive(Clone, Debug)]
pub struct Acrobot {
    state: [f64; 4],
    elapsed: usize,
}

impl Acrobot {
    pub fn new() -> Self {
        Acrobot {
            state: [0.0; 4],
            elapsed: 0,
        }
    }

    pub fn with_state(state: [f64; 4]) -> Self {
        Acrobot { state, elapsed: 0 }
    }

    pub fn raw_state(&self) -> [f64; 4] {
        self.state
    }

    pub fn observation(&self) -> Observation {
        let [t1, t2, d1, d2] = self.state;
        vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), d1, d2]
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        for s in &mut self.state {
            *s = rng.gen_range(-0.1..=0.1);
        }
        self.elapsed = 0;
        self.observation()
    }

    fn is_terminal(&self) -> bool {
        let [t1, t2, ..] = self.state;
        -t1.cos() - (t2 + t1).cos() > 1.0
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 3)?;
        let torque = action as f64 - 1.0;
        let mut next = rk4(self.state, torque, DT);
        next[0] = wrap(next[0], -PI, PI);
        next[1] = wrap(next[1], -PI, PI);
        next[2] = next[2].clamp(-MAX_VEL_1, MAX_VEL_1);
        next[3] = next[3].clamp(-MAX_VEL_2, MAX_VEL_2);
        self.state = next;
        self.elapsed += 1;
        let terminal = self.is_terminal();
        Ok(StepResult {
            next_obs: self.observation(),
            reward: if terminal { 0.0 } else { -1.0 },
            terminal,
            truncated: !terminal && self.elapsed >= TIME_LIMIT,
        })
    }

    /// Total mechanical energy of the current state (kinetic + potential, joint pivot at height 0).
    pub fn energy(&self) -> f64 {
        let [t1, t2, d1, d2] = self.state;
        let (m1, m2, l1, lc1, lc2, i1, i2) = (
            LINK_MASS_1,
            LINK_MASS_2,
            LINK_LENGTH_1,
            LINK_COM_POS_1,
            LINK_COM_POS_2,
            LINK_MOI,
            LINK_MOI,
        );
        let d11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
        let d12 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
        let d22 = m2 * lc2 * lc2 + i2;
        let kinetic = 0.5 * (d11 * d1 * d1 + 2.0 * d12 * d1 * d2 + d22 * d2 * d2);
        let potential = -m1 * GRAVITY * lc1 * t1.cos()
            - m2 * GRAVITY * (l1 * t1.cos() + lc2 * (t1 + t2).cos());
        kinetic + potential
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Self::new()
    }
}

/// Equations of motion in the "book" formulation.
fn derivatives(s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2, i1, i2, g) = (
        LINK_MASS_1,
        LINK_MASS_2,
        LINK_LENGTH_1,
        LINK_COM_POS_1,
        LINK_COM_POS_2,
        LINK_MOI,
        LINK_MOI,
        GRAVITY,
    );
    let [theta1, theta2, dtheta1, dtheta2] = s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin()
        - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

/// One classical fourth-order Runge-Kutta step of length `dt`.
fn rk4(s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], h: f64| -> [f64; 4] {
        [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]]
    };
    let k1 = derivatives(s, torque);
    let k2 = derivatives(add(s, k1, dt / 2.0), torque);
    let k3 = derivatives(add(s, k2, dt / 2.0), torque);
    let k4 = derivatives(add(s, k3, dt), torque);
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    while x > hi {
        x -= span;
    }
    while x < lo {
        x += span;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reset_observation_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut env = Acrobot::new();
        for _ in 0..1000 {
            let obs = env.reset(&mut rng);
            assert_eq!(obs.len(), 6);
            let [t1, t2, d1, d2] = env.raw_state();
            assert!([t1, t2, d1, d2].iter().all(|v| v.abs() <= 0.1));
            // cos of an angle within 0.1 rad stays above cos(0.1)
            assert!(obs[0] >= 0.1f64.cos() && obs[2] >= 0.1f64.cos());
            assert!(obs[1].abs() <= 0.1f64.sin() && obs[3].abs() <= 0.1f64.sin());
        }
    }

    #[test]
    fn wrap_into_interval() {
        assert!((wrap(3.5 * PI, -PI, PI) - (-0.5 * PI)).abs() < 1e-12);
        assert!((wrap(-1.5 * PI, -PI, PI) - 0.5 * PI).abs() < 1e-12);
        assert_eq!(wrap(0.3, -PI, PI), 0.3);
    }

    #[test]
    fn hanging_rest_is_equilibrium() {
        let mut env = Acrobot::with_state([0.0; 4]);
        let r = env.step(1).unwrap();
        assert!(r.next_obs.iter().zip([1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(r.reward, -1.0);
    }

    #[test]
    fn unforced_motion_roughly_conserves_energy() {
        // RK4 with dt = 0.2 is not symplectic, but over a few steps the drift is small.
        let mut env = Acrobot::with_state([0.3, -0.2, 0.0, 0.0]);
        let e0 = env.energy();
        for _ in 0..10 {
            env.step(1).unwrap();
        }
        assert!((env.energy() - e0).abs() < 0.05 * e0.abs());
    }

    #[test]
    fn upright_is_terminal() {
        let mut env = Acrobot::with_state([PI, 0.0, 0.0, 0.0]);
        let r = env.step(1).unwrap();
        assert!(r.terminal);
        assert_eq!(r.reward, 0.0);
        assert!(!r.truncated);
    }

    #[test]
    fn invalid_action() {
        assert!(Acrobot::new().step(7).is_err());
    }
}
