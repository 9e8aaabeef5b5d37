//! Offline path planners.
//!
//! `shortest_path` is the per-robot planner used by the auction mechanisms:
//! robots commit to a fixed shortest route and only the timing of each hop
//! is negotiated online. `prioritized_plan` is the centralized baseline: it
//! plans robots one at a time in space-time against the reservations of all
//! higher-priority robots.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::workspace::{CellId, Workspace, WorkspaceError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanError {
    Workspace(WorkspaceError),
    NotRoad(CellId),
    Unreachable { source: CellId, goal: CellId },
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::Workspace(e) => write!(f, "{e}"),
            PlanError::NotRoad(c) => write!(f, "cell {c} is not a road cell"),
            PlanError::Unreachable { source, goal } => {
                write!(f, "no route from {source} to {goal}")
            }
        }
    }
}

impl core::error::Error for PlanError {}

impl From<WorkspaceError> for PlanError {
    fn from(e: WorkspaceError) -> Self {
        PlanError::Workspace(e)
    }
}

/// A hop-by-hop route. Consecutive cells are successor-related; a path of
/// length 1 means source and goal coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub cells: Vec<CellId>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn manhattan(w: &Workspace, a: CellId, b: CellId) -> u32 {
    let ca = &w.cells()[a.index()];
    let cb = &w.cells()[b.index()];
    let dr = (ca.row as i32 - cb.row as i32).unsigned_abs();
    let dc = (ca.col as i32 - cb.col as i32).unsigned_abs();
    dr + dc
}

/// A* over road cells, unit step cost, Manhattan-distance heuristic.
/// Deterministic: on equal f-score the smaller cell id is expanded first.
pub fn shortest_path(w: &Workspace, source: CellId, goal: CellId) -> Result<Path, PlanError> {
    for c in [source, goal] {
        if !w.is_road(c) {
            w.cell(c)?;
            return Err(PlanError::NotRoad(c));
        }
    }
    if source == goal {
        return Ok(Path { cells: alloc::vec![source] });
    }

    let mut open = BinaryHeap::new();
    let mut best_g: BTreeMap<CellId, u32> = BTreeMap::new();
    let mut parent: BTreeMap<CellId, CellId> = BTreeMap::new();
    best_g.insert(source, 0);
    open.push(Reverse((manhattan(w, source, goal), source.0, 0u32)));

    while let Some(Reverse((_, cell_raw, g))) = open.pop() {
        let cell = CellId(cell_raw);
        if g > *best_g.get(&cell).unwrap_or(&u32::MAX) {
            continue;
        }
        if cell == goal {
            let mut cells = alloc::vec![goal];
            let mut cur = goal;
            while let Some(&p) = parent.get(&cur) {
                cells.push(p);
                cur = p;
            }
            cells.reverse();
            return Ok(Path { cells });
        }
        for &next in w.successors(cell)? {
            let ng = g + 1;
            if ng < *best_g.get(&next).unwrap_or(&u32::MAX) {
                best_g.insert(next, ng);
                parent.insert(next, cell);
                open.push(Reverse((ng + manhattan(w, next, goal), next.0, ng)));
            }
        }
    }
    Err(PlanError::Unreachable { source, goal })
}

/// A route with explicit timing: consecutive entries are one step apart,
/// repeating a cell means waiting in place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedPath {
    pub steps: Vec<(CellId, u32)>,
}

impl TimedPath {
    pub fn entry_time(&self) -> u32 {
        self.steps.first().map(|&(_, t)| t).unwrap_or(0)
    }

    pub fn arrival_time(&self) -> u32 {
        self.steps.last().map(|&(_, t)| t).unwrap_or(0)
    }

    pub fn position_at(&self, t: u32) -> Option<CellId> {
        if t < self.entry_time() || t > self.arrival_time() {
            return None;
        }
        let idx = (t - self.entry_time()) as usize;
        self.steps.get(idx).map(|&(c, _)| c)
    }
}

/// Space-time reservation table built from higher-priority plans.
#[derive(Debug, Clone, Default)]
pub struct Reservation {
    cells: BTreeSet<(CellId, u32)>,
    /// (from, to, t): a reserved move from `from` to `to` during step t.
    edges: BTreeSet<(CellId, CellId, u32)>,
    /// Robots hold their final cell from arrival to the horizon.
    parked: BTreeMap<CellId, u32>,
}

impl Reservation {
    pub fn is_free(&self, cell: CellId, t: u32) -> bool {
        if self.cells.contains(&(cell, t)) {
            return false;
        }
        match self.parked.get(&cell) {
            Some(&from) => t < from,
            None => true,
        }
    }

    pub fn swap_conflict(&self, from: CellId, to: CellId, t: u32) -> bool {
        self.edges.contains(&(to, from, t))
    }

    pub fn insert_plan(&mut self, plan: &TimedPath) {
        for window in plan.steps.windows(2) {
            let (c1, t) = window[0];
            let (c2, _) = window[1];
            if c1 != c2 {
                self.edges.insert((c1, c2, t));
            }
        }
        for &(c, t) in &plan.steps {
            self.cells.insert((c, t));
        }
        if let Some(&(goal, arrival)) = plan.steps.last() {
            let earliest = match self.parked.get(&goal) {
                Some(&t) => t.min(arrival),
                None => arrival,
            };
            self.parked.insert(goal, earliest);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutcome {
    Planned(TimedPath),
    /// No collision-free route within the horizon; the robot is censored,
    /// planning continues for the rest.
    Failed { source: CellId, goal: CellId, reason: FailReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailReason {
    HorizonExceeded,
    SearchCapExceeded,
    BadEndpoint,
}

impl PlanOutcome {
    pub fn planned(&self) -> Option<&TimedPath> {
        match self {
            PlanOutcome::Planned(p) => Some(p),
            PlanOutcome::Failed { .. } => None,
        }
    }
}

const SEARCH_CAP: usize = 400_000;

/// Prioritized space-time planning. Robots are given as (source, goal,
/// start time) in priority order; earlier entries plan first and later ones
/// must avoid every cell reservation, swap, and parked goal they created.
/// A robot may idle off-grid past its start time before entering at its
/// source cell. Horizon: 4 * (width + height) steps.
pub fn prioritized_plan(
    w: &Workspace,
    robots: &[(CellId, CellId, u32)],
) -> Vec<PlanOutcome> {
    let horizon = 4 * (w.width() as u32 + w.height() as u32);
    let mut reservation = Reservation::default();
    let mut outcomes = Vec::with_capacity(robots.len());
    for &(source, goal, start) in robots {
        let outcome = plan_one_against(w, source, goal, start, horizon, &mut reservation);
        outcomes.push(outcome);
    }
    outcomes
}

/// Plans a single robot against an existing reservation table, recording
/// its plan into the table on success.
pub fn plan_one_against(
    w: &Workspace,
    source: CellId,
    goal: CellId,
    start: u32,
    horizon: u32,
    reservation: &mut Reservation,
) -> PlanOutcome {
    if !w.is_road(source) || !w.is_road(goal) {
        return PlanOutcome::Failed { source, goal, reason: FailReason::BadEndpoint };
    }
    // The robot parks on its goal from arrival to the horizon, so arriving
    // is only lawful strictly after the last time any higher-priority plan
    // touches the goal cell; a goal someone else parks on is lost entirely.
    if reservation.parked.contains_key(&goal) {
        return PlanOutcome::Failed { source, goal, reason: FailReason::HorizonExceeded };
    }
    let min_arrival = reservation
        .cells
        .range((goal, 0)..=(goal, u32::MAX))
        .next_back()
        .map(|&(_, t)| t + 1)
        .unwrap_or(0);
    let mut open: BinaryHeap<Reverse<(u32, u32, u32)>> = BinaryHeap::new();
    let mut parent: BTreeMap<(CellId, u32), (CellId, u32)> = BTreeMap::new();
    let mut seen: BTreeSet<(CellId, u32)> = BTreeSet::new();
    // Delayed entry: the robot may appear at its source at any free time at
    // or after its start; waiting off-grid still counts toward its cost.
    for t in start..=horizon {
        if reservation.is_free(source, t) {
            open.push(Reverse((t - start + manhattan(w, source, goal), source.0, t)));
        }
    }

    let mut popped = 0usize;
    while let Some(Reverse((_, cell_raw, t))) = open.pop() {
        let cell = CellId(cell_raw);
        if !seen.insert((cell, t)) {
            continue;
        }
        popped += 1;
        if popped > SEARCH_CAP {
            return PlanOutcome::Failed { source, goal, reason: FailReason::SearchCapExceeded };
        }
        if cell == goal && t >= min_arrival {
            let mut steps = alloc::vec![(cell, t)];
            let mut cur = (cell, t);
            while let Some(&p) = parent.get(&cur) {
                steps.push(p);
                cur = p;
            }
            steps.reverse();
            let plan = TimedPath { steps };
            reservation.insert_plan(&plan);
            return PlanOutcome::Planned(plan);
        }
        if t >= horizon {
            continue;
        }
        let mut push = |next: CellId, parent_state: (CellId, u32)| {
            if seen.contains(&(next, t + 1)) || !reservation.is_free(next, t + 1) {
                return;
            }
            if next != parent_state.0 && reservation.swap_conflict(parent_state.0, next, t) {
                return;
            }
            let g = t + 1 - start;
            let key = (next, t + 1);
            if let alloc::collections::btree_map::Entry::Vacant(e) = parent.entry(key) {
                e.insert(parent_state);
                open.push(Reverse((g + manhattan(w, next, goal), next.0, t + 1)));
            }
        };
        push(cell, (cell, t));
        for &next in w.successors(cell).unwrap_or(&[]) {
            push(next, (cell, t));
        }
    }
    PlanOutcome::Failed { source, goal, reason: FailReason::HorizonExceeded }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workspace::Workspace;

    #[test]
    fn trivial_path_is_the_cell_itself() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let road = w.cells().iter().find(|c| w.is_road(c.id)).unwrap().id;
        let p = shortest_path(&w, road, road).unwrap();
        assert_eq!(p.cells, alloc::vec![road]);
    }

    #[test]
    fn service_endpoints_are_rejected() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let service = w.service_cells().next().unwrap().id;
        let road = w.cells().iter().find(|c| w.is_road(c.id)).unwrap().id;
        assert_eq!(
            shortest_path(&w, service, road),
            Err(PlanError::NotRoad(service))
        );
    }

    #[test]
    fn paths_follow_successor_edges() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let a = w.cell_at(1, 3).unwrap();
        let b = w.cell_at(8, 12).unwrap();
        let p = shortest_path(&w, a, b).unwrap();
        assert_eq!(p.cells.first(), Some(&a));
        assert_eq!(p.cells.last(), Some(&b));
        for pair in p.cells.windows(2) {
            assert!(w.successors(pair[0]).unwrap().contains(&pair[1]));
        }
    }

    #[test]
    fn prioritized_lower_priority_waits() {
        // Both robots become available at the same cell at step 0; the
        // second has to idle off the grid until the first clears out.
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let shared = w.cell_at(1, 3).unwrap();
        let goal_a = w.cell_at(1, 10).unwrap();
        let goal_b = w.cell_at(8, 12).unwrap();
        let solo = prioritized_plan(&w, &[(shared, goal_b, 0)]);
        let solo_cost = solo[0].planned().unwrap().arrival_time();
        let plans = prioritized_plan(&w, &[(shared, goal_a, 0), (shared, goal_b, 0)]);
        let a = plans[0].planned().expect("higher priority plans");
        let b = plans[1].planned().expect("lower priority plans");
        assert_eq!(a.entry_time(), 0);
        assert!(b.entry_time() >= 1, "source is taken at step 0");
        assert!(b.arrival_time() > solo_cost, "lower priority must lose time");
        // Replay both against each other: no shared (cell, time).
        let mut occupied = BTreeSet::new();
        for &(c, t) in a.steps.iter().chain(&b.steps) {
            assert!(occupied.insert((c, t)), "collision at {c} t={t}");
        }
    }

    #[test]
    fn parked_goal_blocks_only_corridor() {
        // Priority 0 parks on the single southbound lane cell between two
        // roundabouts of the minimal 2-band grid; priority 1 must route
        // around it, priority 2 wants the parked cell itself and fails.
        let w = Workspace::generate_grid(9, 9, 5).unwrap();
        let parked_goal = w.cell_at(3, 0).unwrap();
        let source0 = w.cell_at(2, 0).unwrap();
        let other_source = w.cell_at(2, 8).unwrap();
        let other_goal = w.cell_at(7, 3).unwrap();
        let plans = prioritized_plan(
            &w,
            &[
                (source0, parked_goal, 0),
                (other_source, other_goal, 0),
                (other_source, parked_goal, 0),
            ],
        );
        assert!(plans[0].planned().is_some());
        assert!(plans[1].planned().is_some(), "detour exists around the parked robot");
        assert!(
            matches!(plans[2], PlanOutcome::Failed { reason: FailReason::HorizonExceeded, .. }),
            "goal cell is parked on forever: {:?}",
            plans[2]
        );
    }
}
