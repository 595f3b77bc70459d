//! Seeded grid mazes with apples and a portal.
//!
//! Walls come from recursive division with one door per wall, followed by
//! a repair pass that knocks out walls until every free cell is reachable.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, EnvStep, Environment, TabularMdp, Transition};
use crate::error::config_err;
use crate::{Error, Result};

pub const APPLE_REWARD: f32 = 1.0;
pub const PORTAL_REWARD: f32 = 10.0;

/// Up, down, left, right as `(dx, dy)`.
pub const MOVES: [(isize, isize); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

const MAX_TABULAR_APPLES: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MazeLayout {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<bool>,
    pub spawn: usize,
    pub portal: usize,
    pub apples: Vec<usize>,
}

impl MazeLayout {
    pub fn generate(width: usize, height: usize, apples: usize, seed: u64) -> Result<Self> {
        if width < 2 || height < 2 {
            return config_err("maze must be at least 2x2");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut walls = vec![false; width * height];
        divide(&mut walls, width, (0, 0, width, height), &mut rng);
        repair(&mut walls, width, height, &mut rng);

        let mut free: Vec<usize> = (0..walls.len()).filter(|&c| !walls[c]).collect();
        if free.len() < apples + 2 {
            return config_err(format!(
                "maze has {} free cells, needs {} for spawn, portal and apples",
                free.len(),
                apples + 2
            ));
        }
        free.shuffle(&mut rng);
        Ok(Self {
            width,
            height,
            spawn: free[0],
            portal: free[1],
            apples: free[2..2 + apples].to_vec(),
            walls,
        })
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Cell reached from `cell` by `action`; walls and edges block.
    pub fn neighbor(&self, cell: usize, action: usize) -> usize {
        let (dx, dy) = MOVES[action];
        let x = (cell % self.width) as isize + dx;
        let y = (cell / self.width) as isize + dy;
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            return cell;
        }
        let next = y as usize * self.width + x as usize;
        if self.walls[next] {
            cell
        } else {
            next
        }
    }

    /// Free cells reachable from `start`.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        flood(&self.walls, self.width, self.height, start)
    }
}

fn divide(walls: &mut [bool], width: usize, region: (usize, usize, usize, usize), rng: &mut ChaCha8Rng) {
    let mut stack = vec![region];
    while let Some((x0, y0, w, h)) = stack.pop() {
        let can_v = w >= 5;
        let can_h = h >= 5;
        let vertical = match (can_v, can_h) {
            (false, false) => continue,
            (true, false) => true,
            (false, true) => false,
            _ if w != h => w > h,
            _ => rng.random_bool(0.5),
        };
        if vertical {
            let wx = x0 + rng.random_range(2..=w - 3);
            let door = y0 + rng.random_range(0..h);
            for y in y0..y0 + h {
                if y != door {
                    walls[y * width + wx] = true;
                }
            }
            stack.push((x0, y0, wx - x0, h));
            stack.push((wx + 1, y0, x0 + w - wx - 1, h));
        } else {
            let wy = y0 + rng.random_range(2..=h - 3);
            let door = x0 + rng.random_range(0..w);
            for x in x0..x0 + w {
                if x != door {
                    walls[wy * width + x] = true;
                }
            }
            stack.push((x0, y0, w, wy - y0));
            stack.push((x0, wy + 1, w, y0 + h - wy - 1));
        }
    }
}

fn neighbors(cell: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (x, y) = ((cell % width) as isize, (cell / width) as isize);
    MOVES.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && nx < width as isize && ny < height as isize).then(|| ny as usize * width + nx as usize)
    })
}

fn flood(walls: &[bool], width: usize, height: usize, start: usize) -> Vec<bool> {
    let mut seen = vec![false; walls.len()];
    if walls[start] {
        return seen;
    }
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(c) = queue.pop_front() {
        for n in neighbors(c, width, height) {
            if !walls[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

fn repair(walls: &mut [bool], width: usize, height: usize, rng: &mut ChaCha8Rng) {
    loop {
        let Some(start) = walls.iter().position(|&w| !w) else {
            walls[0] = false;
            continue;
        };
        let seen = flood(walls, width, height, start);
        let unreached = (0..walls.len()).any(|c| !walls[c] && !seen[c]);
        if !unreached {
            return;
        }
        let frontier: Vec<usize> = (0..walls.len())
            .filter(|&c| walls[c] && neighbors(c, width, height).any(|n| seen[n]))
            .collect();
        let bridging: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&c| neighbors(c, width, height).any(|n| !walls[n] && !seen[n]))
            .collect();
        let pool = if bridging.is_empty() { &frontier } else { &bridging };
        let pick = pool[rng.random_range(0..pool.len())];
        walls[pick] = false;
    }
}

/// Grid world: +1 per apple, +10 for the portal, which respawns the agent
/// and restores the apples (or ends the episode when `portal_terminal`).
///
/// Observation: four one-hot planes of `width * height` cells (agent,
/// apples still present, walls, portal). Actions: up, down, left, right.
#[derive(Debug, Clone)]
pub struct GridMaze {
    width: usize,
    height: usize,
    n_apples: usize,
    episode_cap: u32,
    layout_seed: Option<u64>,
    portal_terminal: bool,
    layout: Arc<MazeLayout>,
    loaded_seed: u64,
    agent: usize,
    apples_left: Vec<bool>,
    steps: u32,
}

impl GridMaze {
    pub fn new(
        width: usize,
        height: usize,
        apples: usize,
        episode_cap: u32,
        layout_seed: Option<u64>,
        portal_terminal: bool,
    ) -> Result<Self> {
        if episode_cap == 0 {
            return config_err("episode cap must be positive");
        }
        let seed = layout_seed.unwrap_or(0);
        let layout = Arc::new(MazeLayout::generate(width, height, apples, seed)?);
        Ok(Self {
            width,
            height,
            n_apples: apples,
            episode_cap,
            layout_seed,
            portal_terminal,
            agent: layout.spawn,
            apples_left: vec![true; apples],
            layout,
            loaded_seed: seed,
            steps: 0,
        })
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    fn observe(&self) -> Vec<f32> {
        let n = self.layout.cells();
        let mut obs = vec![0.0; 4 * n];
        obs[self.agent] = 1.0;
        for (k, &cell) in self.layout.apples.iter().enumerate() {
            if self.apples_left[k] {
                obs[n + cell] = 1.0;
            }
        }
        for (c, &w) in self.layout.walls.iter().enumerate() {
            if w {
                obs[2 * n + c] = 1.0;
            }
        }
        obs[3 * n + self.layout.portal] = 1.0;
        obs
    }

    fn apple_mask(&self) -> usize {
        self.apples_left
            .iter()
            .enumerate()
            .fold(0, |m, (k, &present)| if present { m | (1 << k) } else { m })
    }

    /// Tabular state index of the current configuration.
    pub fn tabular_state(&self) -> usize {
        self.agent * (1 << self.n_apples) + self.apple_mask()
    }
}

impl Environment for GridMaze {
    fn observation_dim(&self) -> usize {
        4 * self.width * self.height
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn reset(&mut self, seed: u64) -> Vec<f32> {
        let wanted = self.layout_seed.unwrap_or(seed);
        if wanted != self.loaded_seed {
            // Dimensions were validated in `new`; a seed cannot make them invalid
            // unless the maze is too crowded, in which case keep the old layout.
            if let Ok(l) = MazeLayout::generate(self.width, self.height, self.n_apples, wanted) {
                self.layout = Arc::new(l);
                self.loaded_seed = wanted;
            }
        }
        self.agent = self.layout.spawn;
        self.apples_left = vec![true; self.n_apples];
        self.steps = 0;
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let a = match *action {
            Action::Discrete(a) if a < 4 => a,
            ref other => return Err(Error::Config(format!("invalid maze action {other:?}"))),
        };
        self.agent = self.layout.neighbor(self.agent, a);
        self.steps += 1;
        let mut reward = 0.0;
        let mut terminal = false;
        if let Some(k) = self.layout.apples.iter().position(|&c| c == self.agent) {
            if self.apples_left[k] {
                self.apples_left[k] = false;
                reward += APPLE_REWARD;
            }
        }
        if self.agent == self.layout.portal {
            reward += PORTAL_REWARD;
            if self.portal_terminal {
                terminal = true;
            } else {
                self.agent = self.layout.spawn;
                self.apples_left.iter_mut().for_each(|p| *p = true);
            }
        }
        Ok(EnvStep {
            observation: self.observe(),
            reward,
            terminal,
            truncated: !terminal && self.steps >= self.episode_cap,
        })
    }

    fn max_abs_reward(&self) -> f64 {
        f64::from(PORTAL_REWARD)
    }

    fn as_tabular(&self) -> Option<&dyn TabularMdp> {
        (self.layout_seed.is_some() && self.portal_terminal && self.n_apples <= MAX_TABULAR_APPLES)
            .then_some(self as &dyn TabularMdp)
    }
}

impl TabularMdp for GridMaze {
    fn num_states(&self) -> usize {
        self.layout.cells() << self.n_apples
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn is_terminal(&self, state: usize) -> bool {
        state >> self.n_apples == self.layout.portal
    }

    fn transitions(&self, state: usize, action: usize) -> Vec<Transition> {
        let cell = state >> self.n_apples;
        let mut mask = state & ((1 << self.n_apples) - 1);
        let next = self.layout.neighbor(cell, action);
        let mut reward = 0.0;
        if let Some(k) = self.layout.apples.iter().position(|&c| c == next) {
            if mask & (1 << k) != 0 {
                mask &= !(1 << k);
                reward += f64::from(APPLE_REWARD);
            }
        }
        let terminal = next == self.layout.portal;
        if terminal {
            reward += f64::from(PORTAL_REWARD);
        }
        vec![Transition {
            prob: 1.0,
            next: (next << self.n_apples) | mask,
            reward,
            terminal,
        }]
    }
}
