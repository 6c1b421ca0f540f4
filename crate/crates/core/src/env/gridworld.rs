//! 6×6 spatial coordination environment.
//!
//! Team 1 (agents 1–3) builds the Shelter at the top-left corner from wood;
//! team 2 (agents 4–6) builds the Market at the bottom-right corner from
//! stone and gems. Wood groves sit in the top-left quadrant, stone quarries
//! and gem mines in the top-right quadrant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_log::{Event, EventKind};
use crate::agents::{AgentId, Team};
use crate::env::{Communication, Message};
use crate::rng::{RngStream, UniformSource};
use crate::scoring::N_AGENTS;

pub const SIZE: usize = 6;
pub const SHELTER_SITE: Pos = Pos { row: 0, col: 0 };
pub const MARKET_SITE: Pos = Pos { row: 5, col: 5 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn chebyshev(self, other: Pos) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }

    pub fn step(self, d: Direction) -> Option<Pos> {
        let (dr, dc) = d.delta();
        let row = self.row as isize + dr;
        let col = self.col as isize + dc;
        ((0..SIZE as isize).contains(&row) && (0..SIZE as isize).contains(&col)).then(|| Pos::new(row as usize, col as usize))
    }

    /// First step of a shortest path towards `target`; vertical moves first.
    pub fn direction_to(self, target: Pos) -> Option<Direction> {
        if target.row < self.row {
            Some(Direction::N)
        } else if target.row > self.row {
            Some(Direction::S)
        } else if target.col > self.col {
            Some(Direction::E)
        } else if target.col < self.col {
            Some(Direction::W)
        } else {
            None
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    S,
    E,
    W,
}

impl Direction {
    fn delta(self) -> (isize, isize) {
        match self {
            Direction::N => (-1, 0),
            Direction::S => (1, 0),
            Direction::E => (0, 1),
            Direction::W => (0, -1),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::N => "N",
            Direction::S => "S",
            Direction::E => "E",
            Direction::W => "W",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "N" | "NORTH" | "UP" => Ok(Direction::N),
            "S" | "SOUTH" | "DOWN" => Ok(Direction::S),
            "E" | "EAST" | "RIGHT" => Ok(Direction::E),
            "W" | "WEST" | "LEFT" => Ok(Direction::W),
            _ => Err(format!("unknown direction {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Wood,
    Stone,
    Gems,
}

impl Resource {
    pub const ALL: [Resource; 3] = [Resource::Wood, Resource::Stone, Resource::Gems];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resource::Wood => "wood",
            Resource::Stone => "stone",
            Resource::Gems => "gems",
        })
    }
}

impl FromStr for Resource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wood" => Ok(Resource::Wood),
            "stone" => Ok(Resource::Stone),
            "gems" | "gem" => Ok(Resource::Gems),
            _ => Err(format!("unknown resource {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terrain {
    Plain,
    WoodGrove,
    StoneQuarry,
    GemMine,
    ShelterSite,
    MarketSite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub terrain: Terrain,
    /// Units lying on the cell, indexed by [`Resource::index`].
    pub units: [u32; 3],
}

impl Cell {
    pub fn total(&self) -> u32 {
        self.units.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Project {
    Shelter,
    Market,
}

impl Project {
    pub fn of(team: Team) -> Project {
        match team {
            Team::One => Project::Shelter,
            Team::Two => Project::Market,
        }
    }

    pub fn site(self) -> Pos {
        match self {
            Project::Shelter => SHELTER_SITE,
            Project::Market => MARKET_SITE,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub shelter_requirement: [u32; 3],
    pub market_requirement: [u32; 3],
    pub carry_capacity: u32,
    pub attack_success: f64,
    pub steal_success: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            shelter_requirement: [30, 0, 0],
            market_requirement: [0, 20, 10],
            carry_capacity: 3,
            attack_success: 0.25,
            steal_success: 0.40,
        }
    }
}

impl GridConfig {
    pub fn requirement(&self, p: Project) -> [u32; 3] {
        match p {
            Project::Shelter => self.shelter_requirement,
            Project::Market => self.market_requirement,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridPhysical {
    Move(Direction),
    Gather,
    Deposit,
    Give {
        target: AgentId,
        resource: Resource,
        units: u32,
    },
    Attack {
        target: AgentId,
    },
    Steal {
        target: AgentId,
        resource: Resource,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GridAction {
    pub communication: Option<Communication>,
    /// `None` rests.
    pub physical: Option<GridPhysical>,
}

impl GridAction {
    pub fn physical(p: GridPhysical) -> Self {
        Self {
            communication: None,
            physical: Some(p),
        }
    }

    pub fn rest() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("agent {agent} cannot move {dir} off the grid")]
    IllegalMove { agent: AgentId, dir: Direction },
    #[error("agent {agent} gathered on a cell with nothing to take")]
    GatherOnEmptyCell { agent: AgentId },
    #[error("agent {agent} deposited away from its team's site")]
    DepositAtWrongSite { agent: AgentId },
    #[error("agent {agent} targeted {target}, which is not adjacent and alive")]
    TargetNotAdjacent { agent: AgentId, target: AgentId },
    #[error("agent {agent} gave more {resource} than it carries")]
    InsufficientResources { agent: AgentId, resource: Resource },
    #[error("agent {agent} is not alive")]
    DeadActor { agent: AgentId },
}

impl GridError {
    pub fn agent(&self) -> AgentId {
        match self {
            GridError::IllegalMove { agent, .. }
            | GridError::GatherOnEmptyCell { agent }
            | GridError::DepositAtWrongSite { agent }
            | GridError::TargetNotAdjacent { agent, .. }
            | GridError::InsufficientResources { agent, .. }
            | GridError::DeadActor { agent } => *agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub config: GridConfig,
    pub turn: u32,
    pub cells: Vec<Vec<Cell>>,
    pub positions: [Pos; N_AGENTS],
    pub inventories: [[u32; 3]; N_AGENTS],
    pub alive: [bool; N_AGENTS],
    /// Deposited units per project, indexed by resource.
    pub progress: [[u32; 3]; 2],
    pub contributions: [u32; N_AGENTS],
    pub conflict_events: u32,
    /// Agents that were the target of an attack during the last resolved turn.
    pub attacked_last_turn: [bool; N_AGENTS],
    pub initial_totals: [u32; 3],
}

/// One cell of a local view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellView {
    pub pos: Pos,
    pub terrain: Terrain,
    pub units: [u32; 3],
    pub residents: Vec<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridObservation {
    pub agent: AgentId,
    pub turn: u32,
    pub pos: Pos,
    /// Row-major 3×3 window centred on the agent; `None` marks out-of-bounds.
    pub window: [[Option<CellView>; 3]; 3],
    pub inventory: [u32; 3],
    pub carry_capacity: u32,
    pub project: Project,
    pub site: Pos,
    /// Units still required by the agent's own project.
    pub deficit: [u32; 3],
    pub progress: [[u32; 3]; 2],
    pub requirements: [[u32; 3]; 2],
    pub contributions: u32,
    pub attacked_last_turn: bool,
    pub inbox: Vec<Message>,
}

impl GridObservation {
    pub fn cells(&self) -> impl Iterator<Item = &CellView> {
        self.window.iter().flatten().flatten()
    }

    pub fn here(&self) -> &CellView {
        self.window[1][1].as_ref().expect("own cell is always in bounds")
    }

    pub fn out_of_bounds(&self) -> usize {
        self.window.iter().flatten().filter(|c| c.is_none()).count()
    }
}

/// Centre of the area where a resource is found, as agents are told.
pub fn region_hint(r: Resource) -> Pos {
    match r {
        Resource::Wood => Pos::new(1, 1),
        Resource::Stone | Resource::Gems => Pos::new(1, 4),
    }
}

fn add3(a: &mut [u32; 3], b: [u32; 3]) {
    for i in 0..3 {
        a[i] += b[i];
    }
}

impl GridState {
    /// Seeded layout: 4 wood groves (8–12 units) in the top-left quadrant,
    /// 3 stone quarries (7–11) and 2 gem mines (5–8) in the top-right quadrant.
    pub fn randomize(seed: u64, config: GridConfig) -> GridState {
        let mut rng = RngStream::new(seed, "gridworld:layout");
        let plain = Cell {
            terrain: Terrain::Plain,
            units: [0; 3],
        };
        let mut cells = vec![vec![plain; SIZE]; SIZE];
        cells[SHELTER_SITE.row][SHELTER_SITE.col].terrain = Terrain::ShelterSite;
        cells[MARKET_SITE.row][MARKET_SITE.col].terrain = Terrain::MarketSite;

        let mut left: Vec<Pos> = (0..3)
            .flat_map(|r| (0..3).map(move |c| Pos::new(r, c)))
            .filter(|p| *p != SHELTER_SITE)
            .collect();
        let mut right: Vec<Pos> = (0..3).flat_map(|r| (3..6).map(move |c| Pos::new(r, c))).collect();

        let mut place = |pool: &mut Vec<Pos>, count: usize, terrain: Terrain, r: Resource, lo: u32, hi: u32, rng: &mut RngStream| {
            for _ in 0..count {
                let p = pool.remove(rng.next_index(pool.len()));
                let cell = &mut cells[p.row][p.col];
                cell.terrain = terrain;
                cell.units[r.index()] = rng.next_range(lo, hi);
            }
        };
        place(&mut left, 4, Terrain::WoodGrove, Resource::Wood, 8, 12, &mut rng);
        place(&mut right, 3, Terrain::StoneQuarry, Resource::Stone, 7, 11, &mut rng);
        place(&mut right, 2, Terrain::GemMine, Resource::Gems, 5, 8, &mut rng);

        let mut initial_totals = [0; 3];
        for row in &cells {
            for cell in row {
                add3(&mut initial_totals, cell.units);
            }
        }
        let positions = std::array::from_fn(|i| Project::of(AgentId(i as u8 + 1).team()).site());
        GridState {
            config,
            turn: 0,
            cells,
            positions,
            inventories: [[0; 3]; N_AGENTS],
            alive: [true; N_AGENTS],
            progress: [[0; 3]; 2],
            contributions: [0; N_AGENTS],
            conflict_events: 0,
            attacked_last_turn: [false; N_AGENTS],
            initial_totals,
        }
    }

    pub fn cell(&self, p: Pos) -> &Cell {
        &self.cells[p.row][p.col]
    }

    fn cell_mut(&mut self, p: Pos) -> &mut Cell {
        &mut self.cells[p.row][p.col]
    }

    pub fn is_alive(&self, a: AgentId) -> bool {
        self.alive[a.index()]
    }

    pub fn pos(&self, a: AgentId) -> Pos {
        self.positions[a.index()]
    }

    pub fn carried(&self, a: AgentId) -> u32 {
        self.inventories[a.index()].iter().sum()
    }

    pub fn deficit(&self, p: Project) -> [u32; 3] {
        let req = self.config.requirement(p);
        let done = self.progress[p.index()];
        std::array::from_fn(|i| req[i].saturating_sub(done[i]))
    }

    /// Units on the grid, in inventories and deposited, per resource.
    pub fn resource_totals(&self) -> [u32; 3] {
        let mut t = [0; 3];
        for row in &self.cells {
            for cell in row {
                add3(&mut t, cell.units);
            }
        }
        for inv in &self.inventories {
            add3(&mut t, *inv);
        }
        for p in &self.progress {
            add3(&mut t, *p);
        }
        t
    }

    /// `(deposited, required)` per project, each capped per resource.
    pub fn project_fractions(&self) -> [(f64, f64); 2] {
        [Project::Shelter, Project::Market].map(|p| {
            let req = self.config.requirement(p);
            let done = self.progress[p.index()];
            let capped: u32 = (0..3).map(|i| done[i].min(req[i])).sum();
            (capped as f64, req.iter().sum::<u32>() as f64)
        })
    }

    /// Removes an agent, dropping whatever it carries onto its cell.
    pub fn eliminate(&mut self, a: AgentId) {
        if !self.is_alive(a) {
            return;
        }
        self.alive[a.index()] = false;
        let inv = std::mem::take(&mut self.inventories[a.index()]);
        let p = self.pos(a);
        add3(&mut self.cell_mut(p).units, inv);
    }

    pub fn local_observation(&self, agent: AgentId, inbox: Vec<Message>) -> GridObservation {
        let pos = self.pos(agent);
        let window = std::array::from_fn(|dr| {
            std::array::from_fn(|dc| {
                let row = pos.row as isize + dr as isize - 1;
                let col = pos.col as isize + dc as isize - 1;
                if !(0..SIZE as isize).contains(&row) || !(0..SIZE as isize).contains(&col) {
                    return None;
                }
                let p = Pos::new(row as usize, col as usize);
                let cell = self.cell(p);
                Some(CellView {
                    pos: p,
                    terrain: cell.terrain,
                    units: cell.units,
                    residents: AgentId::all().filter(|a| self.is_alive(*a) && self.pos(*a) == p).collect(),
                })
            })
        });
        let project = Project::of(agent.team());
        GridObservation {
            agent,
            turn: self.turn + 1,
            pos,
            window,
            inventory: self.inventories[agent.index()],
            carry_capacity: self.config.carry_capacity,
            project,
            site: project.site(),
            deficit: self.deficit(project),
            progress: self.progress,
            requirements: [self.config.shelter_requirement, self.config.market_requirement],
            contributions: self.contributions[agent.index()],
            attacked_last_turn: self.attacked_last_turn[agent.index()],
            inbox,
        }
    }

    fn adjacent_alive(&self, agent: AgentId, target: AgentId) -> Result<(), GridError> {
        if target != agent && target.is_valid() && self.is_alive(target) && self.pos(agent).chebyshev(self.pos(target)) <= 1 {
            Ok(())
        } else {
            Err(GridError::TargetNotAdjacent { agent, target })
        }
    }

    /// Validates one agent's physical action against the state at turn start.
    pub fn check_action(&self, agent: AgentId, act: &GridAction) -> Result<(), GridError> {
        if !self.is_alive(agent) {
            return Err(GridError::DeadActor { agent });
        }
        let Some(phys) = act.physical else {
            return Ok(());
        };
        match phys {
            GridPhysical::Move(dir) => {
                self.pos(agent).step(dir).ok_or(GridError::IllegalMove { agent, dir })?;
            }
            GridPhysical::Gather => {
                if self.cell(self.pos(agent)).total() == 0 {
                    return Err(GridError::GatherOnEmptyCell { agent });
                }
            }
            GridPhysical::Deposit => {
                if self.pos(agent) != Project::of(agent.team()).site() {
                    return Err(GridError::DepositAtWrongSite { agent });
                }
            }
            GridPhysical::Give {
                target,
                resource,
                units,
            } => {
                self.adjacent_alive(agent, target)?;
                if units == 0 || self.inventories[agent.index()][resource.index()] < units {
                    return Err(GridError::InsufficientResources { agent, resource });
                }
            }
            GridPhysical::Attack { target } | GridPhysical::Steal { target, .. } => {
                self.adjacent_alive(agent, target)?;
            }
        }
        Ok(())
    }

    /// Resolves one turn: moves, gathers, deposits, gives, then attacks and
    /// steals in agent order with one draw each from `rng`.
    pub fn step_turn(
        &self,
        actions: &[(AgentId, GridAction)],
        rng: &mut dyn UniformSource,
    ) -> Result<(GridState, Vec<Event>), GridError> {
        let mut by_agent: [Option<GridPhysical>; N_AGENTS] = [None; N_AGENTS];
        for (agent, act) in actions {
            self.check_action(*agent, act)?;
            by_agent[agent.index()] = act.physical;
        }
        let turn = self.turn + 1;
        let mut s = self.clone();
        s.turn = turn;
        s.attacked_last_turn = [false; N_AGENTS];
        let mut events = Vec::new();
        let cap = s.config.carry_capacity;

        for a in AgentId::all() {
            if let Some(GridPhysical::Move(dir)) = by_agent[a.index()] {
                s.positions[a.index()] = s.pos(a).step(dir).expect("checked");
                events.push(Event::new(turn, a, EventKind::Move(dir)));
            }
        }
        for a in AgentId::all() {
            if by_agent[a.index()] != Some(GridPhysical::Gather) {
                continue;
            }
            let need = s.deficit(Project::of(a.team()));
            let p = s.pos(a);
            let mut room = cap.saturating_sub(s.carried(a));
            let mut order: Vec<Resource> = Resource::ALL.to_vec();
            order.sort_by_key(|r| need[r.index()] == 0);
            let mut took = [0; 3];
            for r in order {
                let avail = s.cell(p).units[r.index()];
                let n = avail.min(room);
                s.cell_mut(p).units[r.index()] -= n;
                s.inventories[a.index()][r.index()] += n;
                took[r.index()] = n;
                room -= n;
            }
            events.push(Event::new(turn, a, EventKind::Gather(took)));
        }
        for a in AgentId::all() {
            if by_agent[a.index()] != Some(GridPhysical::Deposit) {
                continue;
            }
            let project = Project::of(a.team());
            let need = s.deficit(project);
            let mut put = [0; 3];
            for (i, n) in put.iter_mut().enumerate() {
                *n = s.inventories[a.index()][i].min(need[i]);
                s.inventories[a.index()][i] -= *n;
                s.progress[project.index()][i] += *n;
            }
            s.contributions[a.index()] += put.iter().sum::<u32>();
            events.push(Event::new(turn, a, EventKind::Deposit(put)));
        }
        for a in AgentId::all() {
            if let Some(GridPhysical::Give {
                target,
                resource,
                units,
            }) = by_agent[a.index()]
            {
                let n = s.inventories[a.index()][resource.index()].min(units);
                s.inventories[a.index()][resource.index()] -= n;
                s.inventories[target.index()][resource.index()] += n;
                events.push(Event::new(
                    turn,
                    a,
                    EventKind::Give {
                        target,
                        resource,
                        units: n,
                    },
                ));
            }
        }
        for a in AgentId::all() {
            match by_agent[a.index()] {
                Some(GridPhysical::Attack { target }) => {
                    s.conflict_events += 1;
                    s.attacked_last_turn[target.index()] = true;
                    let success = rng.next_f64() < s.config.attack_success;
                    if success {
                        let inv = std::mem::take(&mut s.inventories[target.index()]);
                        let p = s.pos(target);
                        add3(&mut s.cell_mut(p).units, inv);
                    }
                    events.push(Event::new(turn, a, EventKind::Attack { target, success }));
                }
                Some(GridPhysical::Steal { target, resource }) => {
                    s.conflict_events += 1;
                    let success = rng.next_f64() < s.config.steal_success;
                    if success && s.inventories[target.index()][resource.index()] > 0 {
                        s.inventories[target.index()][resource.index()] -= 1;
                        s.inventories[a.index()][resource.index()] += 1;
                    }
                    events.push(Event::new(
                        turn,
                        a,
                        EventKind::Steal {
                            target,
                            resource,
                            success,
                        },
                    ));
                }
                _ => {}
            }
        }
        Ok((s, events))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ScriptedDraws;
    use proptest::prelude::*;

    fn empty_state() -> GridState {
        let mut s = GridState::randomize(42, GridConfig::default());
        for row in &mut s.cells {
            for cell in row {
                cell.units = [0; 3];
            }
        }
        s.initial_totals = [0; 3];
        s
    }

    fn act(a: u8, p: GridPhysical) -> (AgentId, GridAction) {
        (AgentId(a), GridAction::physical(p))
    }

    #[test]
    fn gather_takes_whole_cell() {
        let mut s = empty_state();
        let grove = Pos::new(1, 1);
        s.cells[1][1] = Cell {
            terrain: Terrain::WoodGrove,
            units: [2, 0, 0],
        };
        s.positions[0] = grove;
        let (n, ev) = s
            .step_turn(&[act(1, GridPhysical::Gather)], &mut ScriptedDraws::new(vec![]))
            .unwrap();
        assert_eq!(n.inventories[0], [2, 0, 0]);
        assert_eq!(n.cell(grove).units, [0; 3]);
        assert_eq!(ev[0].to_string(), "T1:P1-GTH:2,0,0");
    }

    #[test]
    fn gather_respects_capacity() {
        let mut s = empty_state();
        s.cells[1][1].units = [10, 0, 0];
        s.positions[0] = Pos::new(1, 1);
        let (n, _) = s
            .step_turn(&[act(1, GridPhysical::Gather)], &mut ScriptedDraws::new(vec![]))
            .unwrap();
        assert_eq!(n.inventories[0], [3, 0, 0]);
        assert_eq!(n.cells[1][1].units, [7, 0, 0]);
        let empty = empty_state();
        assert_eq!(
            empty.step_turn(&[act(1, GridPhysical::Gather)], &mut ScriptedDraws::new(vec![])).unwrap_err(),
            GridError::GatherOnEmptyCell { agent: AgentId(1) }
        );
    }

    #[test]
    fn deposit_on_own_site() {
        let mut s = empty_state();
        s.inventories[0] = [3, 0, 0];
        let (n, _) = s
            .step_turn(&[act(1, GridPhysical::Deposit)], &mut ScriptedDraws::new(vec![]))
            .unwrap();
        assert_eq!(n.progress[0], [3, 0, 0]);
        assert_eq!(n.contributions[0], 3);
        s.positions[0] = MARKET_SITE;
        assert!(matches!(
            s.step_turn(&[act(1, GridPhysical::Deposit)], &mut ScriptedDraws::new(vec![])),
            Err(GridError::DepositAtWrongSite { .. })
        ));
    }

    #[test]
    fn moves_and_bounds() {
        let s = empty_state();
        assert!(matches!(
            s.step_turn(&[act(1, GridPhysical::Move(Direction::N))], &mut ScriptedDraws::new(vec![])),
            Err(GridError::IllegalMove { .. })
        ));
        let (n, _) = s
            .step_turn(&[act(1, GridPhysical::Move(Direction::S))], &mut ScriptedDraws::new(vec![]))
            .unwrap();
        assert_eq!(n.pos(AgentId(1)), Pos::new(1, 0));
    }

    #[test]
    fn attack_threshold() {
        let mut s = empty_state();
        s.inventories[1] = [2, 0, 0];
        let attack = [act(1, GridPhysical::Attack { target: AgentId(2) })];
        let (hit, _) = s.step_turn(&attack, &mut ScriptedDraws::new(vec![0.13])).unwrap();
        assert_eq!(hit.inventories[1], [0; 3]);
        assert_eq!(hit.cell(SHELTER_SITE).units, [2, 0, 0]);
        assert_eq!(hit.conflict_events, 1);
        let (miss, _) = s.step_turn(&attack, &mut ScriptedDraws::new(vec![0.30])).unwrap();
        assert_eq!(miss.inventories[1], [2, 0, 0]);
        assert_eq!(miss.conflict_events, 1);
        let far = [act(1, GridPhysical::Attack { target: AgentId(4) })];
        assert!(matches!(
            s.step_turn(&far, &mut ScriptedDraws::new(vec![0.1])),
            Err(GridError::TargetNotAdjacent { .. })
        ));
    }

    #[test]
    fn observation_geometry() {
        let mut s = GridState::randomize(42, GridConfig::default());
        assert_eq!(s.local_observation(AgentId(1), vec![]).out_of_bounds(), 5);
        s.positions[0] = Pos::new(2, 2);
        s.positions[1] = Pos::new(3, 3);
        let o1 = s.local_observation(AgentId(1), vec![]);
        assert_eq!(o1.out_of_bounds(), 0);
        let o2 = s.local_observation(AgentId(2), vec![]);
        assert!(o1.cells().any(|c| c.residents.contains(&AgentId(2))));
        assert!(o2.cells().any(|c| c.residents.contains(&AgentId(1))));
        assert!(!o1.cells().any(|c| c.residents.contains(&AgentId(4))));
    }

    #[test]
    fn layout_over_seeds() {
        for seed in 42..=51 {
            let s = GridState::randomize(seed, GridConfig::default());
            assert_eq!(s, GridState::randomize(seed, GridConfig::default()));
            for (r, row) in s.cells.iter().enumerate() {
                for (c, cell) in row.iter().enumerate() {
                    match cell.terrain {
                        Terrain::WoodGrove => assert!(r < 3 && c < 3),
                        Terrain::StoneQuarry | Terrain::GemMine => assert!(r < 3 && c >= 3),
                        _ => assert_eq!(cell.total(), 0),
                    }
                }
            }
            let t = s.initial_totals;
            assert!(t[0] >= 30 && t[1] >= 20 && t[2] >= 10, "{t:?}");
        }
    }

    #[test]
    fn conflict_rates() {
        let n = 10_000;
        for (steal, p) in [(false, 0.25), (true, 0.40)] {
            let mut rng = RngStream::new(42, if steal { "trial:steal" } else { "trial:attack" });
            let s = empty_state();
            let phys = if steal {
                GridPhysical::Steal {
                    target: AgentId(2),
                    resource: Resource::Wood,
                }
            } else {
                GridPhysical::Attack { target: AgentId(2) }
            };
            let mut wins = 0;
            for _ in 0..n {
                let (_, ev) = s.step_turn(&[act(1, phys)], &mut rng).unwrap();
                if matches!(ev[0].kind, EventKind::Attack { success: true, .. } | EventKind::Steal { success: true, .. }) {
                    wins += 1;
                }
            }
            let rate = wins as f64 / n as f64;
            assert!((rate - p).abs() < 0.02, "{rate}");
        }
    }

    fn arb_phys() -> impl Strategy<Value = GridPhysical> {
        let dir = prop_oneof![Just(Direction::N), Just(Direction::S), Just(Direction::E), Just(Direction::W)];
        let res = prop_oneof![Just(Resource::Wood), Just(Resource::Stone), Just(Resource::Gems)];
        prop_oneof![
            dir.prop_map(GridPhysical::Move),
            Just(GridPhysical::Gather),
            Just(GridPhysical::Deposit),
            (1u8..=6, res.clone(), 1u32..=3).prop_map(|(t, resource, units)| GridPhysical::Give {
                target: AgentId(t),
                resource,
                units
            }),
            (1u8..=6).prop_map(|t| GridPhysical::Attack { target: AgentId(t) }),
            (1u8..=6, res).prop_map(|(t, resource)| GridPhysical::Steal { target: AgentId(t), resource }),
        ]
    }

    proptest! {
        #[test]
        fn resources_are_conserved(seed in 0u64..50, turns in proptest::collection::vec(proptest::collection::vec(arb_phys(), 6), 1..40), kill in 0usize..6) {
            let mut s = GridState::randomize(seed, GridConfig::default());
            let mut rng = RngStream::new(seed, "conservation");
            let mut conflicts = 0;
            for (t, plan) in turns.iter().enumerate() {
                if t == 20 {
                    s.eliminate(AgentId(kill as u8 + 1));
                }
                let acts: Vec<_> = AgentId::all()
                    .filter(|a| s.is_alive(*a))
                    .map(|a| (a, GridAction::physical(plan[a.index()])))
                    .filter(|(a, x)| s.check_action(*a, x).is_ok())
                    .collect();
                s = s.step_turn(&acts, &mut rng).unwrap().0;
                prop_assert_eq!(s.resource_totals(), s.initial_totals);
                prop_assert!(s.conflict_events >= conflicts);
                conflicts = s.conflict_events;
            }
        }
    }
}
