//! Grid of rooms in a row joined by single-cell doors.
//!
//! Rooms are `room_size × room_size`, separated by one-cell wall columns.
//! The door in wall `k` sits on the bottom row for even `k` and the top row
//! for odd `k`. The agent starts in the top-left cell of the first room and
//! the goal is the bottom-right cell of the last room.
//!
//! Each door pays `door_reward` the first time it is crossed. Doors can only
//! be crossed first in order, so the state is `(cell, doors crossed)`.

use super::EnvError;
use crate::mdp::TabularMdp;

/// Up, right, down, left.
const MOVES: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRoomSpec {
    pub num_rooms: usize,
    pub room_size: usize,
    pub discount: f64,
    pub goal_reward: f64,
    pub door_reward: f64,
}

impl MultiRoomSpec {
    pub fn new(num_rooms: usize, room_size: usize) -> Self {
        Self { num_rooms, room_size, discount: 0.9, goal_reward: 1000.0, door_reward: 0.001 }
    }
}

#[derive(Debug, Clone)]
pub struct MultiRoom {
    pub mdp: TabularMdp,
    pub spec: MultiRoomSpec,
    pub start: usize,
    pub goal: usize,
    /// Moves on a shortest start-to-goal path.
    pub shortest_path: usize,
    width: usize,
    cells: Vec<Option<usize>>,
}

impl MultiRoom {
    /// State index for grid cell `(x, y)` after `doors` first crossings.
    pub fn state_of(&self, x: usize, y: usize, doors: usize) -> Option<usize> {
        let cell = self.cells.get(y * self.width + x).copied().flatten()?;
        (doors < self.spec.num_rooms).then(|| cell * self.spec.num_rooms + doors)
    }

    /// Number of doors.
    pub fn num_doors(&self) -> usize {
        self.spec.num_rooms - 1
    }
}

pub fn build_multiroom(spec: &MultiRoomSpec) -> Result<MultiRoom, EnvError> {
    let (rooms, size) = (spec.num_rooms, spec.room_size);
    if rooms == 0 || size == 0 || (rooms == 1 && size == 1) {
        return Err(EnvError::Spec("need at least two cells".into()));
    }
    let width = rooms * (size + 1) - 1;
    let height = size;
    let door_at = |x: usize| -> Option<(usize, usize)> {
        // Wall column x belongs to wall k; returns (k, door row).
        ((x + 1) % (size + 1) == 0).then(|| {
            let k = x / (size + 1);
            (k, if k % 2 == 0 { size - 1 } else { 0 })
        })
    };
    let passable = |x: usize, y: usize| match door_at(x) {
        Some((_, row)) => y == row,
        None => true,
    };

    let goal_xy = (width - 1, height - 1);
    let mut cells = vec![None; width * height];
    let mut count = 0;
    for y in 0..height {
        for x in 0..width {
            if passable(x, y) && (x, y) != goal_xy {
                cells[y * width + x] = Some(count);
                count += 1;
            }
        }
    }
    let levels = rooms;
    let goal = count * levels;
    let num_states = goal + 1;
    let mut b = TabularMdp::builder(num_states, MOVES.len(), spec.discount);
    for y in 0..height {
        for x in 0..width {
            let Some(cell) = cells[y * width + x] else { continue };
            for doors in 0..levels {
                let s = cell * levels + doors;
                for (a, &(dx, dy)) in MOVES.iter().enumerate() {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    let inside = nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height;
                    if !inside || !passable(nx as usize, ny as usize) {
                        b.edge(s, a, s, 0.0);
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if (nx, ny) == goal_xy {
                        b.edge(s, a, goal, spec.goal_reward);
                        continue;
                    }
                    let ncell = cells[ny * width + nx].expect("passable");
                    match door_at(nx) {
                        Some((k, _)) if k == doors => {
                            b.edge(s, a, ncell * levels + doors + 1, spec.door_reward);
                        }
                        _ => {
                            b.edge(s, a, ncell * levels + doors, 0.0);
                        }
                    }
                }
            }
        }
    }
    b.terminal(goal);
    let mdp = b.build()?;

    // Doors alternate rows, so the path bends through each one.
    let shortest_path = (width - 1) + (height - 1) + shortest_detour(rooms, size);
    Ok(MultiRoom {
        start: cells[0].expect("start cell") * levels,
        goal,
        shortest_path,
        mdp,
        spec: spec.clone(),
        width,
        cells,
    })
}

/// Extra vertical moves forced by alternating door rows.
fn shortest_detour(rooms: usize, size: usize) -> usize {
    // Door rows: bottom, top, bottom, ... Vertical travel goes 0 → size−1 → 0 → ... → size−1.
    let doors = rooms - 1;
    let mut row = 0usize;
    let mut vertical = 0usize;
    for k in 0..doors {
        let target = if k % 2 == 0 { size - 1 } else { 0 };
        vertical += row.abs_diff(target);
        row = target;
    }
    vertical += row.abs_diff(size - 1);
    vertical - (size - 1)
}
