//! 8-connected A* over the occupancy grid, plus the Dijkstra reference the
//! test suite checks it against.
//!
//! Step costs are 1 for straight moves and √2 for diagonals, carried as
//! exact (straight, diagonal) integer pairs; comparisons and the final path
//! cost are therefore free of float accumulation order. Diagonal moves are
//! forbidden only when both flanking orthogonal cells are blocked. Unknown
//! cells are traversable unless configured otherwise.

use crate::error::{Error, Result};
use crate::occupancy::{Cell, CellState, OccupancyGrid};
use serde::{Deserialize, Serialize};
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Exact path cost `straight + √2 · diagonal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl StepCost {
    pub const ZERO: StepCost = StepCost {
        straight: 0,
        diagonal: 0,
    };

    pub fn add_straight(self) -> Self {
        Self {
            straight: self.straight + 1,
            ..self
        }
    }

    pub fn add_diagonal(self) -> Self {
        Self {
            diagonal: self.diagonal + 1,
            ..self
        }
    }

    pub fn plus(self, other: Self) -> Self {
        Self {
            straight: self.straight + other.straight,
            diagonal: self.diagonal + other.diagonal,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.straight as f64 + std::f64::consts::SQRT_2 * self.diagonal as f64
    }
}

impl Ord for StepCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // self ? other  ⟺  x ? √2·y  with x = Δstraight, y = −Δdiagonal.
        let x = self.straight as i64 - other.straight as i64;
        let y = other.diagonal as i64 - self.diagonal as i64;
        if x == 0 && y == 0 {
            return Ordering::Equal;
        }
        match (x >= 0, y >= 0) {
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (true, true) => {
                // Both non-negative, not both zero: compare x² vs 2y².
                (x * x).cmp(&(2 * y * y))
            }
            (false, false) => (2 * y * y).cmp(&(x * x)),
        }
    }
}

impl PartialOrd for StepCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// An 8-connected obstacle-free path from the agent cell to the target cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

impl GridPath {
    /// Check the structural invariants against a grid. Used by tests.
    pub fn validate(&self, grid: &OccupancyGrid) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::invalid("empty path"));
        }
        if self.cells[0] != grid.agent_cell() {
            return Err(Error::invalid("path does not start at the agent cell"));
        }
        if *self.cells.last().unwrap() != grid.target_cell() {
            return Err(Error::invalid("path does not end at the target cell"));
        }
        let mut seen = std::collections::HashSet::new();
        for pair in self.cells.windows(2) {
            let dc = pair[0].col.abs_diff(pair[1].col);
            let dr = pair[0].row.abs_diff(pair[1].row);
            if dc > 1 || dr > 1 || (dc == 0 && dr == 0) {
                return Err(Error::invalid("cells are not 8-adjacent"));
            }
        }
        for &cell in &self.cells {
            if grid.state(cell) == CellState::Occupied {
                return Err(Error::invalid("path crosses an occupied cell"));
            }
            if !seen.insert((cell.row, cell.col)) {
                return Err(Error::invalid("path repeats a cell"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlannerOptions {
    /// Treat Unknown cells as blocked. Per-image grids are mostly Unknown
    /// beyond sensed surfaces, so the default keeps them traversable.
    pub unknown_is_occupied: bool,
}

fn blocked(grid: &OccupancyGrid, col: i64, row: i64, opts: &PlannerOptions) -> bool {
    if col < 0 || row < 0 || col >= grid.cols() as i64 || row >= grid.rows() as i64 {
        return true;
    }
    match grid.state_or_unknown(col, row) {
        CellState::Occupied => true,
        CellState::Unknown => opts.unknown_is_occupied,
        CellState::Free => false,
    }
}

const DIRS: [(i64, i64); 8] = [
    (0, -1),
    (-1, 0),
    (1, 0),
    (0, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
    (1, 1),
];

fn neighbors(
    grid: &OccupancyGrid,
    cell: Cell,
    opts: &PlannerOptions,
    mut visit: impl FnMut(Cell, bool),
) {
    let (c, r) = (cell.col as i64, cell.row as i64);
    for (dc, dr) in DIRS {
        let (nc, nr) = (c + dc, r + dr);
        if blocked(grid, nc, nr, opts) {
            continue;
        }
        let diagonal = dc != 0 && dr != 0;
        if diagonal {
            // No corner cutting when both flanking cells are blocked.
            let flank_a = blocked(grid, c + dc, r, opts);
            let flank_b = blocked(grid, c, r + dr, opts);
            if flank_a && flank_b {
                continue;
            }
        }
        visit(Cell::new(nc as usize, nr as usize), diagonal);
    }
}

fn octile(a: Cell, b: Cell) -> StepCost {
    let dc = a.col.abs_diff(b.col) as u32;
    let dr = a.row.abs_diff(b.row) as u32;
    StepCost {
        straight: dc.abs_diff(dr),
        diagonal: dc.min(dr),
    }
}

#[derive(PartialEq, Eq)]
struct OpenNode {
    f: StepCost,
    h: StepCost,
    index: u32,
}

impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f
            .cmp(&other.f)
            .then_with(|| self.h.cmp(&other.h))
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost path from the agent cell to the target cell, or `None` when
/// the target is unreachable (including a blocked start or goal).
///
/// The octile heuristic is admissible and consistent for the 1/√2 cost
/// model. Ties pop in lower-f, lower-h, then row-major index order, so the
/// returned path is unique and deterministic.
pub fn astar(grid: &OccupancyGrid, opts: &PlannerOptions) -> Option<GridPath> {
    let start = grid.agent_cell();
    let goal = grid.target_cell();
    let cols = grid.cols();
    if blocked(grid, start.col as i64, start.row as i64, opts)
        || blocked(grid, goal.col as i64, goal.row as i64, opts)
    {
        return None;
    }
    let index_of = |c: Cell| (c.row * cols + c.col) as u32;
    let cell_of = |i: u32| Cell::new(i as usize % cols, i as usize / cols);

    let n = cols * grid.rows();
    let mut g: Vec<Option<StepCost>> = vec![None; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let start_idx = index_of(start);
    g[start_idx as usize] = Some(StepCost::ZERO);
    let h0 = octile(start, goal);
    open.push(Reverse(OpenNode {
        f: h0,
        h: h0,
        index: start_idx,
    }));

    while let Some(Reverse(node)) = open.pop() {
        let idx = node.index;
        if closed[idx as usize] {
            continue;
        }
        closed[idx as usize] = true;
        let cell = cell_of(idx);
        if cell == goal {
            return Some(reconstruct(idx, &parent, cell_of, g[idx as usize].unwrap()));
        }
        let g_here = g[idx as usize].unwrap();
        neighbors(grid, cell, opts, |next, diagonal| {
            let next_idx = index_of(next);
            if closed[next_idx as usize] {
                return;
            }
            let tentative = if diagonal {
                g_here.add_diagonal()
            } else {
                g_here.add_straight()
            };
            let better = match g[next_idx as usize] {
                None => true,
                Some(prev) => tentative < prev,
            };
            if better {
                g[next_idx as usize] = Some(tentative);
                parent[next_idx as usize] = idx;
                let h = octile(next, goal);
                open.push(Reverse(OpenNode {
                    f: tentative.plus(h),
                    h,
                    index: next_idx,
                }));
            }
        });
    }
    None
}

fn reconstruct(
    goal_idx: u32,
    parent: &[u32],
    cell_of: impl Fn(u32) -> Cell,
    cost: StepCost,
) -> GridPath {
    let mut cells = vec![cell_of(goal_idx)];
    let mut idx = goal_idx;
    while parent[idx as usize] != u32::MAX {
        idx = parent[idx as usize];
        cells.push(cell_of(idx));
    }
    cells.reverse();
    GridPath {
        cells,
        cost: cost.to_f64(),
    }
}

/// Heuristic-free reference search with the same movement rules.
///
/// Kept independent of [`astar`] (down to its own neighbor enumeration) so
/// the optimality tests compare two separately written searches.
pub fn dijkstra_oracle(grid: &OccupancyGrid, opts: &PlannerOptions) -> Option<GridPath> {
    let start = grid.agent_cell();
    let goal = grid.target_cell();
    let cols = grid.cols() as i64;
    let rows = grid.rows() as i64;
    let passable = |c: i64, r: i64| -> bool {
        if c < 0 || r < 0 || c >= cols || r >= rows {
            return false;
        }
        match grid.state(Cell::new(c as usize, r as usize)) {
            CellState::Occupied => false,
            CellState::Unknown => !opts.unknown_is_occupied,
            CellState::Free => true,
        }
    };
    if !passable(start.col as i64, start.row as i64) || !passable(goal.col as i64, goal.row as i64)
    {
        return None;
    }

    let n = (cols * rows) as usize;
    let mut dist: Vec<Option<StepCost>> = vec![None; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut settled = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(StepCost, u32)>> = BinaryHeap::new();

    let start_idx = (start.row as i64 * cols + start.col as i64) as u32;
    dist[start_idx as usize] = Some(StepCost::ZERO);
    heap.push(Reverse((StepCost::ZERO, start_idx)));

    while let Some(Reverse((d, idx))) = heap.pop() {
        if settled[idx as usize] {
            continue;
        }
        settled[idx as usize] = true;
        let c = idx as i64 % cols;
        let r = idx as i64 / cols;
        if (c, r) == (goal.col as i64, goal.row as i64) {
            let cell_of =
                |i: u32| Cell::new(i as usize % cols as usize, i as usize / cols as usize);
            return Some(reconstruct(idx, &parent, cell_of, d));
        }
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                if dc == 0 && dr == 0 {
                    continue;
                }
                let (nc, nr) = (c + dc, r + dr);
                if !passable(nc, nr) {
                    continue;
                }
                let diagonal = dc != 0 && dr != 0;
                if diagonal && !passable(c + dc, r) && !passable(c, r + dr) {
                    continue;
                }
                let nd = if diagonal {
                    d.add_diagonal()
                } else {
                    d.add_straight()
                };
                let nidx = (nr * cols + nc) as u32;
                let better = match dist[nidx as usize] {
                    None => true,
                    Some(prev) => nd < prev,
                };
                if better {
                    dist[nidx as usize] = Some(nd);
                    parent[nidx as usize] = idx;
                    heap.push(Reverse((nd, nidx)));
                }
            }
        }
    }
    None
}

/// Grow every Occupied cell by a Chebyshev radius; the agent and target
/// cells are re-forced Free afterwards.
pub fn inflate_obstacles(grid: &OccupancyGrid, radius_cells: usize) -> OccupancyGrid {
    let mut out = grid.clone();
    if radius_cells == 0 {
        return out;
    }
    let r = radius_cells as i64;
    for row in 0..grid.rows() {
        for col in 0..grid.cols() {
            if grid.state(Cell::new(col, row)) != CellState::Occupied {
                continue;
            }
            for dr in -r..=r {
                for dc in -r..=r {
                    let (nc, nr) = (col as i64 + dc, row as i64 + dr);
                    if nc >= 0
                        && nr >= 0
                        && (nc as usize) < grid.cols()
                        && (nr as usize) < grid.rows()
                    {
                        out.set_state(Cell::new(nc as usize, nr as usize), CellState::Occupied);
                    }
                }
            }
        }
    }
    let agent = out.agent_cell();
    out.set_state(agent, CellState::Free);
    let target = out.target_cell();
    out.set_state(target, CellState::Free);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_grid() -> OccupancyGrid {
        let mut grid = OccupancyGrid::standard();
        for row in 0..50 {
            for col in 0..50 {
                grid.set_state(Cell::new(col, row), CellState::Free);
            }
        }
        grid.set_agent_cell(Cell::new(25, 0));
        grid
    }

    #[test]
    fn step_cost_ordering_is_exact() {
        let a = StepCost {
            straight: 3,
            diagonal: 0,
        };
        let b = StepCost {
            straight: 0,
            diagonal: 2,
        };
        // 3 > 2√2 ≈ 2.828
        assert!(a > b);
        let c = StepCost {
            straight: 2,
            diagonal: 0,
        };
        assert!(c < b);
        assert_eq!(
            StepCost {
                straight: 5,
                diagonal: 7
            }
            .cmp(&StepCost {
                straight: 5,
                diagonal: 7
            }),
            Ordering::Equal
        );
        // 7 + 5√2 vs 12 + 1√2: 7+7.071=14.071 < 13.414? No: 12+1.414=13.414 < 14.071.
        assert!(
            StepCost {
                straight: 7,
                diagonal: 5
            } > StepCost {
                straight: 12,
                diagonal: 1
            }
        );
    }

    #[test]
    fn straight_column_path() {
        let mut grid = open_grid();
        grid.set_target_cell(Cell::new(25, 20));
        let path = astar(&grid, &PlannerOptions::default()).unwrap();
        assert_eq!(path.cost, 20.0);
        assert_eq!(path.cells.len(), 21);
        assert!(path.cells.iter().all(|c| c.col == 25));
        path.validate(&grid).unwrap();
    }

    #[test]
    fn wall_disconnects() {
        let mut grid = open_grid();
        grid.set_target_cell(Cell::new(25, 20));
        for col in 0..50 {
            grid.set_state(Cell::new(col, 10), CellState::Occupied);
        }
        assert!(astar(&grid, &PlannerOptions::default()).is_none());
        assert!(dijkstra_oracle(&grid, &PlannerOptions::default()).is_none());
    }

    #[test]
    fn pure_diagonal_cost() {
        let mut grid = open_grid();
        grid.set_agent_cell(Cell::new(0, 0));
        grid.set_target_cell(Cell::new(10, 10));
        let d = dijkstra_oracle(&grid, &PlannerOptions::default()).unwrap();
        assert_eq!(d.cost, 10.0 * std::f64::consts::SQRT_2);
        let a = astar(&grid, &PlannerOptions::default()).unwrap();
        assert_eq!(a.cost, d.cost);
    }

    #[test]
    fn corner_cut_blocked_only_when_both_flanks_occupied() {
        let mut grid = open_grid();
        grid.set_agent_cell(Cell::new(0, 0));
        grid.set_target_cell(Cell::new(1, 1));
        grid.set_state(Cell::new(1, 0), CellState::Occupied);
        // One flank blocked: diagonal still allowed.
        let path = astar(&grid, &PlannerOptions::default()).unwrap();
        assert_eq!(path.cells.len(), 2);
        grid.set_state(Cell::new(0, 1), CellState::Occupied);
        // Both flanks blocked: must be unreachable (goal is fenced off).
        assert!(astar(&grid, &PlannerOptions::default()).is_none());
    }

    #[test]
    fn unknown_cells_traversable_by_default() {
        let mut grid = OccupancyGrid::standard();
        grid.set_target_cell(Cell::new(25, 20));
        assert!(astar(&grid, &PlannerOptions::default()).is_some());
        let strict = PlannerOptions {
            unknown_is_occupied: true,
        };
        assert!(astar(&grid, &strict).is_none());
    }

    #[test]
    fn determinism() {
        let mut grid = open_grid();
        grid.set_target_cell(Cell::new(40, 33));
        for i in 0..30 {
            grid.set_state(Cell::new((i * 7) % 50, (i * 13) % 50), CellState::Occupied);
        }
        grid.set_state(grid.agent_cell(), CellState::Free);
        grid.set_state(grid.target_cell(), CellState::Free);
        let a = astar(&grid, &PlannerOptions::default()).unwrap();
        let b = astar(&grid, &PlannerOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inflate_radius_zero_is_identity() {
        let mut grid = open_grid();
        grid.set_state(Cell::new(10, 10), CellState::Occupied);
        assert_eq!(inflate_obstacles(&grid, 0), grid);
    }

    #[test]
    fn inflate_single_cell() {
        let mut grid = open_grid();
        grid.set_target_cell(Cell::new(40, 40));
        grid.set_state(Cell::new(10, 10), CellState::Occupied);
        let inflated = inflate_obstacles(&grid, 1);
        let mut occupied = 0;
        for row in 0..50 {
            for col in 0..50 {
                if inflated.state(Cell::new(col, row)) == CellState::Occupied {
                    occupied += 1;
                    assert!(col.abs_diff(10) <= 1 && row.abs_diff(10) <= 1);
                }
            }
        }
        assert_eq!(occupied, 9);
    }

    #[test]
    fn inflation_is_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut grid = open_grid();
        grid.set_target_cell(Cell::new(49, 49));
        for _ in 0..200 {
            grid.set_state(
                Cell::new(rng.gen_range(0..50), rng.gen_range(0..50)),
                CellState::Occupied,
            );
        }
        grid.set_state(grid.agent_cell(), CellState::Free);
        grid.set_state(grid.target_cell(), CellState::Free);
        let inflated = inflate_obstacles(&grid, 1);
        for row in 0..50 {
            for col in 0..50 {
                let cell = Cell::new(col, row);
                if grid.state(cell) == CellState::Occupied && cell != grid.target_cell() {
                    assert_eq!(inflated.state(cell), CellState::Occupied);
                }
            }
        }
    }

    #[test]
    fn grid_path_json_shape() {
        let path = GridPath {
            cells: vec![Cell::new(25, 0), Cell::new(25, 1)],
            cost: 1.0,
        };
        let json = serde_json::to_string(&path).unwrap();
        assert_eq!(json, r#"{"cells":[[25,0],[25,1]],"cost":1.0}"#);
        let back: GridPath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, path);
    }

    /// The octile heuristic never exceeds the true remaining cost, checked
    /// against an exhaustive test-local Dijkstra from the goal.
    #[test]
    fn octile_heuristic_is_admissible() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let mut grid = open_grid();
            for _ in 0..400 {
                grid.set_state(
                    Cell::new(rng.gen_range(0..50), rng.gen_range(0..50)),
                    CellState::Occupied,
                );
            }
            let goal = Cell::new(rng.gen_range(0..50), rng.gen_range(0..50));
            grid.set_state(goal, CellState::Free);
            grid.set_target_cell(goal);

            // Full distances from the goal (the move rule is symmetric).
            let opts = PlannerOptions::default();
            let mut dist: Vec<Option<StepCost>> = vec![None; 2500];
            let mut heap = BinaryHeap::new();
            dist[goal.row * 50 + goal.col] = Some(StepCost::ZERO);
            heap.push(Reverse((StepCost::ZERO, (goal.row * 50 + goal.col) as u32)));
            while let Some(Reverse((d, idx))) = heap.pop() {
                let cell = Cell::new(idx as usize % 50, idx as usize / 50);
                if dist[idx as usize] != Some(d) {
                    continue;
                }
                neighbors(&grid, cell, &opts, |next, diagonal| {
                    let nd = if diagonal {
                        d.add_diagonal()
                    } else {
                        d.add_straight()
                    };
                    let nidx = next.row * 50 + next.col;
                    if dist[nidx].map(|prev| nd < prev).unwrap_or(true) {
                        dist[nidx] = Some(nd);
                        heap.push(Reverse((nd, nidx as u32)));
                    }
                });
            }

            for row in 0..50 {
                for col in 0..50 {
                    if let Some(true_cost) = dist[row * 50 + col] {
                        let h = octile(Cell::new(col, row), goal);
                        assert!(
                            h <= true_cost,
                            "heuristic {h:?} exceeds true cost {true_cost:?} at ({col},{row})"
                        );
                    }
                }
            }
        }
    }
}
