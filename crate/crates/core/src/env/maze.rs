//! Tilting marble maze on a discrete grid.
//!
//! Each action tilts the board towards one cardinal direction and the
//! marble rolls in a straight line until the next cell is a wall or the
//! board edge. Observations are one-hot vectors over all cells.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{count_step, EnvSpec, Environment, SolveCriterion, StepResult};
use crate::error::{Error, Result};

pub const REWARD_NEW_CELL: f64 = 0.1;
pub const REWARD_REVISIT: f64 = -0.25;
pub const REWARD_BLOCKED: f64 = -0.75;
pub const REWARD_GOAL: f64 = 10.0;

/// Bundled 15x15 layout; the shortest solution takes 23 moves.
pub const DEFAULT_MAZE: &str = "\
###############
#G....#..#.##.#
##...##.......#
##.#...#..#.#.#
#..#.##..##..##
##.......##..##
#.#........#..#
#....#.#....#.#
#.....###...#.#
#....##....##.#
#..##..#....#.#
###.......##..#
##......##...##
#..#.....##..S#
###############
";

const MAZE_SIDE: usize = 15;
const DEFAULT_OPTIMAL_MOVES: usize = 23;

/// Row/column offsets for actions 0 up, 1 right, 2 down, 3 left.
const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        name: "gridmaze".into(),
        observation_dim: MAZE_SIDE * MAZE_SIDE,
        n_actions: 4,
        max_episode_steps: MazeOptions::default().max_steps,
        solve: SolveCriterion {
            window: 1,
            threshold: DEFAULT_OPTIMAL_MOVES as f64,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Floor,
    Start,
    Goal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MazeLayout {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: usize,
    goal: usize,
}

impl MazeLayout {
    /// Parses a layout of any rectangular size (`#` wall, `.` floor,
    /// `S` start, `G` goal). Cells outside the grid count as walls.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let height = rows.len();
        if height == 0 {
            return Err(Error::Maze("empty layout".into()));
        }
        let width = rows[0].chars().count();
        let mut cells = Vec::with_capacity(width * height);
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Maze(format!("row {r} has {} columns, expected {width}", row.chars().count())));
            }
            for (c, ch) in row.chars().enumerate() {
                cells.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Floor,
                    'S' => Cell::Start,
                    'G' => Cell::Goal,
                    other => return Err(Error::Maze(format!("unexpected `{other}` at row {r}, column {c}"))),
                });
            }
        }
        let find = |kind: Cell, name: &str| -> Result<usize> {
            let mut it = cells.iter().enumerate().filter(|(_, &c)| c == kind).map(|(i, _)| i);
            match (it.next(), it.next()) {
                (Some(i), None) => Ok(i),
                (None, _) => Err(Error::Maze(format!("no {name} cell"))),
                (Some(_), Some(_)) => Err(Error::Maze(format!("more than one {name} cell"))),
            }
        };
        let start = find(Cell::Start, "start")?;
        let goal = find(Cell::Goal, "goal")?;
        let layout = MazeLayout {
            width,
            height,
            cells,
            start,
            goal,
        };
        if layout.optimal_moves().is_none() {
            return Err(Error::Maze("goal is not reachable from start".into()));
        }
        Ok(layout)
    }

    /// Parses a maze file, which must be exactly 15x15.
    pub fn parse_file_format(text: &str) -> Result<Self> {
        let layout = Self::parse(text)?;
        if layout.width != MAZE_SIDE || layout.height != MAZE_SIDE {
            return Err(Error::Maze(format!(
                "maze files must be {MAZE_SIDE}x{MAZE_SIDE}, got {}x{}",
                layout.width, layout.height
            )));
        }
        Ok(layout)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_file_format(&std::fs::read_to_string(path)?)
    }

    pub fn default_layout() -> Self {
        Self::parse(DEFAULT_MAZE).expect("bundled maze is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn cell(&self, index: usize) -> Cell {
        self.cells[index]
    }

    fn open(&self, r: isize, c: isize) -> bool {
        r >= 0
            && c >= 0
            && (r as usize) < self.height
            && (c as usize) < self.width
            && self.cells[r as usize * self.width + c as usize] != Cell::Wall
    }

    /// Where the marble comes to rest when tilted in `action`'s direction.
    pub fn slide(&self, from: usize, action: usize) -> usize {
        let (dr, dc) = MOVES[action];
        let (mut r, mut c) = ((from / self.width) as isize, (from % self.width) as isize);
        while self.open(r + dr, c + dc) {
            r += dr;
            c += dc;
        }
        r as usize * self.width + c as usize
    }

    /// Minimum number of moves from every cell to the goal.
    pub fn distances_to_goal(&self) -> Vec<Option<usize>> {
        let n = self.cells.len();
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for from in (0..n).filter(|&i| self.cells[i] != Cell::Wall) {
            for a in 0..MOVES.len() {
                let to = self.slide(from, a);
                if to != from {
                    incoming[to].push(from);
                }
            }
        }
        let mut dist = vec![None; n];
        dist[self.goal] = Some(0);
        let mut queue = VecDeque::from([self.goal]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap_or(0);
            for &y in &incoming[x] {
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Length of the shortest action sequence from start to goal.
    pub fn optimal_moves(&self) -> Option<usize> {
        self.distances_to_goal()[self.start]
    }

    fn floor_neighbours(&self, cell: usize) -> Vec<usize> {
        let (r, c) = ((cell / self.width) as isize, (cell % self.width) as isize);
        MOVES
            .iter()
            .filter(|(dr, dc)| self.open(r + dr, c + dc))
            .map(|(dr, dc)| (r + dr) as usize * self.width + (c + dc) as usize)
            .collect()
    }
}

impl fmt::Display for MazeLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.width) {
            for cell in row {
                f.write_str(match cell {
                    Cell::Wall => "#",
                    Cell::Floor => ".",
                    Cell::Start => "S",
                    Cell::Goal => "G",
                })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// What the episode score counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MazeFitness {
    /// Moves that bring the marble closer to the goal than before in the
    /// episode. At most the optimal move count, reached only at the goal.
    Progress,
    /// Moves that earn a positive reward: new cells and the goal.
    RewardingMoves,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeOptions {
    pub max_steps: usize,
    /// Episode stops once the cumulative reward falls to this value.
    pub min_cumulative_reward: f64,
    /// Probability that the observed cell is displaced to a random
    /// neighbouring floor cell.
    pub detection_noise: f64,
    pub fitness: MazeFitness,
}

impl Default for MazeOptions {
    fn default() -> Self {
        MazeOptions {
            max_steps: 75,
            min_cumulative_reward: -12.5,
            detection_noise: 0.0,
            fitness: MazeFitness::Progress,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridMaze {
    spec: EnvSpec,
    layout: MazeLayout,
    opts: MazeOptions,
    dist: Vec<Option<usize>>,
    position: usize,
    visited: Vec<bool>,
    steps: usize,
    cumulative: f64,
    best_distance: usize,
    progress: usize,
    rewarding: usize,
    done: bool,
    noise_rng: ChaCha8Rng,
}

impl GridMaze {
    pub fn new(layout: MazeLayout, opts: MazeOptions) -> Result<Self> {
        if !(0.0..=1.0).contains(&opts.detection_noise) {
            return Err(Error::InvalidConfig("detection_noise must lie in [0, 1]".into()));
        }
        if opts.max_steps == 0 {
            return Err(Error::InvalidConfig("maze max_steps must be positive".into()));
        }
        let dist = layout.distances_to_goal();
        let optimal = layout.optimal_moves().ok_or_else(|| Error::Maze("goal unreachable".into()))?;
        let spec = EnvSpec {
            name: "gridmaze".into(),
            observation_dim: layout.n_cells(),
            n_actions: MOVES.len(),
            max_episode_steps: opts.max_steps,
            solve: SolveCriterion {
                window: 1,
                threshold: optimal as f64,
            },
        };
        Ok(GridMaze {
            spec,
            dist,
            position: layout.start,
            visited: vec![false; layout.n_cells()],
            steps: 0,
            cumulative: 0.0,
            best_distance: optimal,
            progress: 0,
            rewarding: 0,
            done: true,
            noise_rng: ChaCha8Rng::seed_from_u64(0),
            layout,
            opts,
        })
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.cumulative
    }

    fn observe(&mut self) -> Vec<f64> {
        let mut cell = self.position;
        if self.opts.detection_noise > 0.0 && self.noise_rng.gen_bool(self.opts.detection_noise) {
            let neighbours = self.layout.floor_neighbours(cell);
            if !neighbours.is_empty() {
                cell = neighbours[self.noise_rng.gen_range(0..neighbours.len())];
            }
        }
        let mut obs = vec![0.0; self.layout.n_cells()];
        obs[cell] = 1.0;
        obs
    }
}

impl Environment for GridMaze {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.noise_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        self.position = self.layout.start;
        self.visited.fill(false);
        self.visited[self.position] = true;
        self.steps = 0;
        self.cumulative = 0.0;
        self.best_distance = self.dist[self.position].unwrap_or(usize::MAX);
        self.progress = 0;
        self.rewarding = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if action >= MOVES.len() {
            return Err(Error::ActionOutOfRange {
                action,
                n_actions: MOVES.len(),
            });
        }
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        count_step();
        let to = self.layout.slide(self.position, action);
        let mut reached_goal = false;
        let reward = if to == self.position {
            REWARD_BLOCKED
        } else if to == self.layout.goal {
            reached_goal = true;
            REWARD_GOAL
        } else if !self.visited[to] {
            REWARD_NEW_CELL
        } else {
            REWARD_REVISIT
        };
        self.visited[to] = true;
        self.position = to;
        self.steps += 1;
        self.cumulative += reward;
        if reward > 0.0 {
            self.rewarding += 1;
        }
        if let Some(d) = self.dist[to] {
            if d < self.best_distance {
                self.best_distance = d;
                self.progress += 1;
            }
        }

        // the tolerance absorbs rounding in sums of 0.1 steps
        let broke = self.cumulative <= self.opts.min_cumulative_reward + 1e-9;
        let terminal = reached_goal || broke;
        let truncated = !terminal && self.steps >= self.opts.max_steps;
        self.done = terminal || truncated;
        Ok(StepResult {
            next_state: self.observe(),
            reward,
            terminal,
            truncated,
        })
    }

    /// See [`MazeFitness`].
    fn episode_score(&self) -> f64 {
        match self.opts.fitness {
            MazeFitness::Progress => self.progress as f64,
            MazeFitness::RewardingMoves => self.rewarding as f64,
        }
    }
}
