//! GridBridge: cross a narrow bridge between two cliff rows to reach a goal.
//!
//! A 6x8 grid. Hazard cells fill rows 1 and 3 in columns 2..=5, leaving a
//! one-cell-wide bridge along row 2. The goal sits at (2, 7); episodes start
//! in the leftmost column next to the bridge entrance. Stepping onto a
//! hazard fails the episode, and reaching the goal pays a bonus so that
//! crossing the bridge, not an early hazard exit, maximises return.

use super::{State, TerminalReason};

pub const ROWS: usize = 6;
pub const COLS: usize = 8;
pub const GOAL: (usize, usize) = (2, 7);
/// Hazards occupy these rows in columns [`HAZARD_COL_MIN`]..=[`HAZARD_COL_MAX`].
pub const HAZARD_ROWS: [usize; 2] = [1, 3];
pub const HAZARD_COL_MIN: usize = 2;
pub const HAZARD_COL_MAX: usize = 5;
/// Episodes start uniformly from these three leftmost safe cells.
pub const START_CELLS: [(usize, usize); 3] = [(1, 0), (2, 0), (3, 0)];
/// Step cap; exhausting it without reaching the goal is a failure.
pub const EPISODE_CAP: u32 = 64;
pub const STEP_REWARD: f64 = -0.01;
/// Paid on top of the step reward when the move reaches the goal.
pub const GOAL_REWARD: f64 = 1.0;
/// Largest Manhattan distance from any cell to its nearest hazard
/// (realised at the far corners; verified by a test).
pub const MAX_HAZARD_DISTANCE: f64 = 4.0;

pub const OBSERVATION_DIM: usize = 2;
/// Actions: 0 north, 1 south, 2 east, 3 west. Off-grid moves stay in place.
pub const ACTION_COUNT: usize = 4;

pub fn is_hazard(row: usize, col: usize) -> bool {
    HAZARD_ROWS.contains(&row) && (HAZARD_COL_MIN..=HAZARD_COL_MAX).contains(&col)
}

pub fn on_grid(row: i64, col: i64) -> bool {
    (0..ROWS as i64).contains(&row) && (0..COLS as i64).contains(&col)
}

/// Manhattan distance from a cell to its nearest hazard.
pub fn hazard_distance(row: usize, col: usize) -> u32 {
    let mut best = u32::MAX;
    for &hr in &HAZARD_ROWS {
        for hc in HAZARD_COL_MIN..=HAZARD_COL_MAX {
            let d = row.abs_diff(hr) + col.abs_diff(hc);
            best = best.min(d as u32);
        }
    }
    best
}

fn cell_of(observation: &[f64]) -> (usize, usize) {
    (observation[0] as usize, observation[1] as usize)
}

pub fn step(state: &State, action: usize) -> (State, f64) {
    let (row, col) = cell_of(&state.observation);
    let (dr, dc): (i64, i64) = match action {
        0 => (-1, 0),
        1 => (1, 0),
        2 => (0, 1),
        _ => (0, -1),
    };
    let (nr, nc) = (row as i64 + dr, col as i64 + dc);
    let (row, col) = if on_grid(nr, nc) {
        (nr as usize, nc as usize)
    } else {
        (row, col)
    };

    let step_count = state.step_count + 1;
    let mut reward = STEP_REWARD;
    let reason = if is_hazard(row, col) {
        TerminalReason::Failure
    } else if (row, col) == GOAL {
        reward += GOAL_REWARD;
        TerminalReason::Success
    } else if step_count >= EPISODE_CAP {
        TerminalReason::Failure
    } else {
        TerminalReason::None
    };
    let next = State {
        observation: vec![row as f64, col as f64],
        step_count,
        terminal: reason != TerminalReason::None,
        terminal_reason: reason,
    };
    (next, reward)
}

/// Quality of control: Manhattan distance to the nearest hazard, normalised
/// by the largest such distance on the grid and clamped to [0, 1].
pub fn qoc(observation: &[f64]) -> f64 {
    let (row, col) = cell_of(observation);
    (f64::from(hazard_distance(row, col)) / MAX_HAZARD_DISTANCE).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_hazard_distance_matches_layout() {
        let mut max = 0;
        for row in 0..ROWS {
            for col in 0..COLS {
                if !is_hazard(row, col) {
                    max = max.max(hazard_distance(row, col));
                }
            }
        }
        assert_eq!(f64::from(max), MAX_HAZARD_DISTANCE);
    }

    #[test]
    fn start_cells_are_safe_and_distinct_from_goal() {
        for &(row, col) in &START_CELLS {
            assert!(!is_hazard(row, col));
            assert_ne!((row, col), GOAL);
            assert_eq!(col, 0);
        }
    }
}
