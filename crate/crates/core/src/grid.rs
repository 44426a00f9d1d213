//! Square cell grids and positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cell position, `x` along a row and `y` down the rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    /// Row-major index in a grid of the given side.
    #[inline]
    pub fn index(self, side: usize) -> usize {
        self.y as usize * side + self.x as usize
    }

    #[inline]
    pub fn from_index(index: usize, side: usize) -> Self {
        Cell::new((index % side) as u32, (index / side) as u32)
    }

    pub fn in_bounds(self, side: usize) -> bool {
        (self.x as usize) < side && (self.y as usize) < side
    }

    pub fn check(self, side: usize) -> Result<()> {
        if self.in_bounds(side) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x: self.x as i64,
                y: self.y as i64,
                side,
            })
        }
    }

    /// Chebyshev (king-move) distance.
    pub fn chebyshev(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    /// Straight-line distance in cells.
    pub fn euclidean(self, other: Cell) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx.hypot(dy)
    }

    /// Offset by `(dx, dy)` if the result stays inside the grid.
    #[inline]
    pub fn offset(self, dx: i32, dy: i32, side: usize) -> Option<Cell> {
        let x = self.x as i64 + dx as i64;
        let y = self.y as i64 + dy as i64;
        if x < 0 || y < 0 || x >= side as i64 || y >= side as i64 {
            None
        } else {
            Some(Cell::new(x as u32, y as u32))
        }
    }

    /// In-bounds 8-neighbours in a fixed order.
    pub fn neighbors8(self, side: usize) -> impl Iterator<Item = Cell> {
        NEIGHBORS8
            .iter()
            .filter_map(move |&(dx, dy)| self.offset(dx, dy, side))
    }
}

/// The eight king-move offsets, orthogonal first.
pub const NEIGHBORS8: [(i32, i32); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

/// The four orthogonal offsets.
pub const NEIGHBORS4: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
