//! CartPole: balance a pole on a cart by pushing left or right.

use super::{State, TerminalReason};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
/// Half the pole length, as in the classic formulation.
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const POLE_MASS_LENGTH: f64 = POLE_MASS * POLE_HALF_LENGTH;
pub const FORCE_MAG: f64 = 10.0;
/// Euler integration step in seconds.
pub const TAU: f64 = 0.02;
/// Episode step cap; surviving this long is a success.
pub const EPISODE_CAP: u32 = 200;
/// |x| beyond this is a failure.
pub const X_LIMIT: f64 = 2.4;
/// |theta| beyond this (12 degrees, in radians) is a failure.
pub const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
/// Initial `[x, x_dot, theta, theta_dot]` are each drawn from this range.
pub const INIT_RANGE: f64 = 0.05;

pub const OBSERVATION_DIM: usize = 4;
pub const ACTION_COUNT: usize = 2;

/// One Euler step of the classical cart-pole equations of motion.
pub fn step(state: &State, action: usize) -> (State, f64) {
    let [x, x_dot, theta, theta_dot]: [f64; 4] = state.observation[..].try_into().unwrap();
    let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
    let cos_theta = theta.cos();
    let sin_theta = theta.sin();

    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin_theta) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin_theta - cos_theta * temp)
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_theta * cos_theta / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_theta / TOTAL_MASS;

    let x = x + TAU * x_dot;
    let x_dot = x_dot + TAU * x_acc;
    let theta = theta + TAU * theta_dot;
    let theta_dot = theta_dot + TAU * theta_acc;

    let step_count = state.step_count + 1;
    let failed = x.abs() > X_LIMIT || theta.abs() > THETA_LIMIT;
    let reason = if failed {
        TerminalReason::Failure
    } else if step_count >= EPISODE_CAP {
        TerminalReason::Success
    } else {
        TerminalReason::None
    };
    let next = State {
        observation: vec![x, x_dot, theta, theta_dot],
        step_count,
        terminal: reason != TerminalReason::None,
        terminal_reason: reason,
    };
    (next, 1.0)
}

/// Quality of control: the smaller of the normalised distances to the two
/// failure thresholds, clamped to [0, 1]. Exactly 0 at a threshold.
pub fn qoc(observation: &[f64]) -> f64 {
    let x_margin = (X_LIMIT - observation[0].abs()) / X_LIMIT;
    let theta_margin = (THETA_LIMIT - observation[2].abs()) / THETA_LIMIT;
    x_margin.min(theta_margin).clamp(0.0, 1.0)
}
