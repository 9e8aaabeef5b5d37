//! Discrete-time traffic simulation.
//!
//! Robots appear at a lane cell next to their source service cell, follow a
//! fixed shortest route, and vanish once they occupy the lane cell next to
//! their goal. One step moves every robot at most one cell. Outside the
//! roundabouts a lane cell has a unique feeding cell, so plain queueing is
//! collision-free: a robot advances exactly when its next cell was free at
//! the start of the step. Inside and around roundabouts the configured
//! mechanism decides who advances.
//!
//! The run is deterministic: randomness is only used to sample the roster
//! from the seed, after which stepping is a pure function of the roster.
//! Every step appends a full audit record (announcements, outcomes,
//! payments, transfers), and the books are balanced exactly at every step.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mechanism::{
    self, Announcement, AuctionOutcome, MechanismOptions, Party, RobotId, Transfer,
};
use crate::money::Money;
use crate::planner::{self, PlanError, PlanOutcome};
use crate::workspace::{CellId, Workspace, WorkspaceError};
use crate::Clock;

pub use crate::mechanism::MoveChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RobotClass {
    Economy,
    Regular,
    Premium,
}

impl RobotClass {
    pub const ALL: [RobotClass; 3] = [RobotClass::Economy, RobotClass::Regular, RobotClass::Premium];

    /// Per-step-of-delay value of this robot's time.
    pub fn weight(self) -> Money {
        match self {
            RobotClass::Economy => Money::from_ratio(1, 50),
            RobotClass::Regular => Money::from_ratio(13, 200),
            RobotClass::Premium => Money::from_ratio(1, 5),
        }
    }

    pub fn letter(self) -> char {
        match self {
            RobotClass::Economy => 'E',
            RobotClass::Regular => 'R',
            RobotClass::Premium => 'P',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'E' => Some(RobotClass::Economy),
            'R' => Some(RobotClass::Regular),
            'P' => Some(RobotClass::Premium),
            _ => None,
        }
    }
}

/// One robot's job: haul from `source` to `goal`, available from step
/// `start`. Source and goal may be service cells (the robot uses the
/// adjacent lane) or road cells directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotSpec {
    pub id: RobotId,
    pub class: RobotClass,
    pub source: CellId,
    pub goal: CellId,
    pub start: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalModel {
    AllAtStart,
    /// Start times drawn uniformly from 0..=window.
    UniformWindow { window: u32 },
    /// Half the robots start at 0, the rest uniformly over 1..=window.
    Split { window: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    Naive,
    Sparcas,
    PrioritizedBaseline,
}

impl MechanismKind {
    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Naive => "naive",
            MechanismKind::Sparcas => "sparcas",
            MechanismKind::PrioritizedBaseline => "prioritized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub width: u16,
    pub height: u16,
    pub block_spacing: u16,
    pub robots: usize,
    pub seed: u64,
    pub mechanism: MechanismKind,
    pub arrival: ArrivalModel,
    /// Relative sampling weights for economy, regular, premium.
    pub class_mix: [u32; 3],
    /// Explicit roster; when set, `robots`, `arrival`, `class_mix`, and
    /// `seed` do not matter.
    pub roster: Option<Vec<RobotSpec>>,
    /// Steps without any movement, injection, or completion (while robots
    /// are on the road) before the run is declared deadlocked.
    pub deadlock_window: u32,
    pub step_limit: u32,
    /// Wall-clock length of the per-step negotiation window, a reporting
    /// constant only; the simulation itself is untimed.
    pub mini_slot_micros: u64,
    pub options: MechanismOptions,
}

impl SimConfig {
    pub fn new(
        width: u16,
        height: u16,
        block_spacing: u16,
        robots: usize,
        seed: u64,
        mechanism: MechanismKind,
    ) -> Self {
        SimConfig {
            width,
            height,
            block_spacing,
            robots,
            seed,
            mechanism,
            arrival: ArrivalModel::AllAtStart,
            class_mix: [1, 1, 1],
            roster: None,
            deadlock_window: 10,
            step_limit: 10_000,
            mini_slot_micros: 60_000,
            options: MechanismOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    Workspace(WorkspaceError),
    Plan(PlanError),
    BadRoster(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Workspace(e) => write!(f, "{e}"),
            SimError::Plan(e) => write!(f, "{e}"),
            SimError::BadRoster(msg) => write!(f, "bad roster: {msg}"),
        }
    }
}

impl From<WorkspaceError> for SimError {
    fn from(e: WorkspaceError) -> Self {
        SimError::Workspace(e)
    }
}

impl From<PlanError> for SimError {
    fn from(e: PlanError) -> Self {
        SimError::Plan(e)
    }
}

impl core::error::Error for SimError {}

/// Audit record of one roundabout's auction in one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionRecord {
    pub ring: u32,
    pub announcements: Vec<Announcement>,
    /// Cells blocked by robots that cannot leave the ring this step.
    pub obstacles: Vec<CellId>,
    pub advancing: Vec<RobotId>,
    /// Payment of every announced robot, in id order.
    pub payments: Vec<(RobotId, Money)>,
    /// Robots the collected pool was split over; empty means the authority
    /// kept it.
    pub recipients: Vec<RobotId>,
    pub to_authority: Money,
}

/// Everything that happened in one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub t: u32,
    pub injected: Vec<(RobotId, CellId)>,
    pub completed: Vec<RobotId>,
    pub auctions: Vec<AuctionRecord>,
    /// All position changes this step, including auction winners.
    pub moves: Vec<(RobotId, CellId, CellId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotSummary {
    pub spec: RobotSpec,
    /// Step at which the robot actually got onto the road.
    pub entry: Option<u32>,
    /// Step at which it reached its goal lane cell and left.
    pub done: Option<u32>,
    /// Planned route, distinct cells only (length 1 means source lane ==
    /// goal lane). Empty for baseline robots that found no plan.
    pub route: Vec<CellId>,
    pub advances: u32,
    pub paid: Money,
    pub received: Money,
    /// Baseline only: no conflict-free plan existed within the horizon.
    pub failed: bool,
}

impl RobotSummary {
    pub fn route_len(&self) -> u32 {
        self.route.len() as u32
    }

    /// Steps lost versus driving the planned route unimpeded.
    pub fn delay(&self) -> Option<u32> {
        let done = self.done?;
        Some(done - self.spec.start - (self.route_len() - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub mechanism: MechanismKind,
    pub robots: Vec<RobotSummary>,
    pub steps: Vec<StepRecord>,
    pub steps_run: u32,
    pub completed: usize,
    pub failed: usize,
    /// Last completion time over all finished robots.
    pub makespan: Option<u32>,
    pub deadlocked: bool,
    pub hit_step_limit: bool,
    pub collected_total: Money,
    pub redistributed_total: Money,
    pub authority_total: Money,
    /// Largest single-robot route planning time (the offline phase runs
    /// per robot in parallel in the deployed system).
    pub planning_micros_max: u64,
    pub planning_micros_total: u64,
    /// Wall-clock time spent inside auction evaluations, whole run.
    pub auction_micros_total: u64,
    /// Collision flags raised by the detector; always 0, or the run would
    /// have aborted.
    pub collisions: usize,
    pub mini_slot_micros: u64,
}

impl RunReport {
    pub fn all_done(&self) -> bool {
        self.completed == self.robots.len()
    }

    /// One negotiation mini-slot per executed step until the last robot
    /// finished. Zero for the baseline, which negotiates nothing online.
    pub fn online_micros(&self) -> u64 {
        match self.mechanism {
            MechanismKind::PrioritizedBaseline => 0,
            _ => self.makespan.unwrap_or(self.steps_run) as u64 * self.mini_slot_micros,
        }
    }

    /// The wall-clock story of one run: for the auction mechanisms the
    /// offline phase runs per robot in parallel (max), then every step costs
    /// one mini-slot; the baseline plans centrally one robot after another.
    pub fn total_time_micros(&self) -> u64 {
        match self.mechanism {
            MechanismKind::PrioritizedBaseline => self.planning_micros_total,
            _ => self.planning_micros_max + self.online_micros(),
        }
    }

    pub fn never_paid_fraction(&self) -> Option<f64> {
        if self.robots.is_empty() {
            return None;
        }
        let never = self.robots.iter().filter(|r| r.paid.is_zero()).count();
        Some(never as f64 / self.robots.len() as f64)
    }

    pub fn mean_delay(&self) -> Option<f64> {
        Self::mean(self.robots.iter().filter_map(|r| r.delay().map(|d| d as f64)))
    }

    pub fn class_mean_delay(&self, class: RobotClass) -> Option<f64> {
        Self::mean(
            self.robots
                .iter()
                .filter(|r| r.spec.class == class)
                .filter_map(|r| r.delay().map(|d| d as f64)),
        )
    }

    pub fn class_mean_paid(&self, class: RobotClass) -> Option<f64> {
        Self::mean(
            self.robots
                .iter()
                .filter(|r| r.spec.class == class)
                .map(|r| r.paid.to_f64()),
        )
    }

    fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for v in values {
            sum += v;
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// One physical conflict between two consecutive occupancy snapshots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CollisionFlag {
    /// Two or more robots stand on one cell.
    SharedCell { cell: CellId, robots: Vec<RobotId> },
    /// A robot moved into a cell whose occupant stayed put.
    MoveIntoStayer { cell: CellId, mover: RobotId, stayer: RobotId },
    /// Two adjacent robots exchanged cells head-on.
    Swap { a: RobotId, b: RobotId },
}

/// Flags every conflict between the positions before and after one step:
/// shared cells, moves into a stayer, and head-on swaps. Robots present in
/// only one snapshot (just injected, just finished) take part in the
/// shared-cell check only.
pub fn detect_collisions(
    prev: &BTreeMap<RobotId, CellId>,
    next: &BTreeMap<RobotId, CellId>,
) -> Vec<CollisionFlag> {
    let mut flags = Vec::new();
    let mut by_cell: BTreeMap<CellId, Vec<RobotId>> = BTreeMap::new();
    for (&r, &c) in next {
        by_cell.entry(c).or_default().push(r);
    }
    for (&cell, robots) in &by_cell {
        if robots.len() < 2 {
            continue;
        }
        let stayer = robots.iter().copied().find(|r| prev.get(r) == Some(&cell));
        match stayer {
            Some(s) if robots.len() == 2 => {
                let mover = robots.iter().copied().find(|&r| r != s).unwrap();
                flags.push(CollisionFlag::MoveIntoStayer { cell, mover, stayer: s });
            }
            _ => flags.push(CollisionFlag::SharedCell { cell, robots: robots.clone() }),
        }
    }
    let moving: Vec<(RobotId, CellId, CellId)> = next
        .iter()
        .filter_map(|(&r, &n)| {
            let &p = prev.get(&r)?;
            (p != n).then_some((r, p, n))
        })
        .collect();
    for (i, &(a, a_prev, a_next)) in moving.iter().enumerate() {
        for &(b, b_prev, b_next) in &moving[i + 1..] {
            if a_next == b_prev && b_next == a_prev {
                flags.push(CollisionFlag::Swap { a, b });
            }
        }
    }
    flags
}

/// True iff some stretch of `window` consecutive recorded steps saw no
/// injection, move, or completion while at least one robot sat on the road.
/// This recomputes what the engine tracks incrementally, for audits of
/// recorded traces.
pub fn detect_deadlock(history: &[StepRecord], window: u32) -> bool {
    let mut on_road = 0usize;
    let mut streak = 0u32;
    for rec in history {
        on_road += rec.injected.len();
        on_road -= rec.completed.len();
        let stalled = rec.moves.is_empty()
            && rec.injected.is_empty()
            && rec.completed.is_empty()
            && on_road > 0;
        streak = if stalled { streak + 1 } else { 0 };
        if streak >= window {
            return true;
        }
    }
    false
}

/// Samples a roster: uniform service-cell sources and goals (distinct per
/// robot), classes by `class_mix`, start times by the arrival model.
pub fn sample_roster(
    w: &Workspace,
    robots: usize,
    seed: u64,
    arrival: &ArrivalModel,
    class_mix: &[u32; 3],
) -> Vec<RobotSpec> {
    let services: Vec<CellId> = w.service_cells().map(|c| c.id).collect();
    assert!(services.len() >= 2, "need at least two service cells to sample jobs");
    let mix_total: u32 = class_mix.iter().sum();
    assert!(mix_total > 0, "class mix must have positive total weight");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roster = Vec::with_capacity(robots);
    for i in 0..robots {
        let pick = rng.gen_range(0..mix_total);
        let class = if pick < class_mix[0] {
            RobotClass::Economy
        } else if pick < class_mix[0] + class_mix[1] {
            RobotClass::Regular
        } else {
            RobotClass::Premium
        };
        let source = services[rng.gen_range(0..services.len())];
        let goal = loop {
            let g = services[rng.gen_range(0..services.len())];
            if g != source {
                break g;
            }
        };
        let start = match arrival {
            ArrivalModel::AllAtStart => 0,
            ArrivalModel::UniformWindow { window } => rng.gen_range(0..=*window),
            ArrivalModel::Split { window } => {
                if i < robots.div_ceil(2) {
                    0
                } else {
                    rng.gen_range(1..=(*window).max(1))
                }
            }
        };
        roster.push(RobotSpec { id: RobotId(i as u32), class, source, goal, start });
    }
    roster
}

pub fn run(config: &SimConfig) -> Result<RunReport, SimError> {
    run_with_clock(config, &mut crate::NullClock)
}

pub fn run_with_clock(config: &SimConfig, clock: &mut dyn Clock) -> Result<RunReport, SimError> {
    let w = Workspace::generate_grid(config.width, config.height, config.block_spacing)?;
    let roster = match &config.roster {
        Some(r) => r.clone(),
        None => sample_roster(&w, config.robots, config.seed, &config.arrival, &config.class_mix),
    };
    validate_roster(&w, &roster)?;
    match config.mechanism {
        MechanismKind::PrioritizedBaseline => run_baseline(&w, config, roster, clock),
        _ => run_auctions(&w, config, roster, clock),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Perturbation {
    /// One more robot joins the roster.
    Add(RobotSpec),
    /// One robot is withdrawn before the run starts.
    Remove(RobotId),
}

/// Side-by-side view of a run and the same run with one robot added or
/// removed. Both runs went through the full engine with all its invariant
/// checks, so holding this struct already means both worlds stayed lawful.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationReport {
    pub base: RunReport,
    pub perturbed: RunReport,
    /// Every robot present in both runs planned the identical route; robots
    /// never replan because someone else appeared or left.
    pub routes_unchanged: bool,
    /// (robot, completion step in base run, in perturbed run) for robots
    /// present in both.
    pub done_deltas: Vec<(RobotId, Option<u32>, Option<u32>)>,
}

/// Runs `config` as-is and once more with one robot added or removed, then
/// compares the surviving robots' offline routes and completion times.
pub fn entry_exit_check(
    config: &SimConfig,
    perturbation: &Perturbation,
) -> Result<PerturbationReport, SimError> {
    let w = Workspace::generate_grid(config.width, config.height, config.block_spacing)?;
    let roster = match &config.roster {
        Some(r) => r.clone(),
        None => sample_roster(&w, config.robots, config.seed, &config.arrival, &config.class_mix),
    };
    let mut base_config = config.clone();
    base_config.roster = Some(roster.clone());
    let base = run(&base_config)?;

    let perturbed_roster: Vec<RobotSpec> = match perturbation {
        Perturbation::Add(spec) => {
            let mut r = roster;
            r.push(spec.clone());
            r
        }
        Perturbation::Remove(id) => roster.into_iter().filter(|s| s.id != *id).collect(),
    };
    let mut pert_config = config.clone();
    pert_config.roster = Some(perturbed_roster);
    let perturbed = run(&pert_config)?;

    let pert_by_id: BTreeMap<RobotId, &RobotSummary> =
        perturbed.robots.iter().map(|r| (r.spec.id, r)).collect();
    let mut routes_unchanged = true;
    let mut done_deltas = Vec::new();
    for r in &base.robots {
        let Some(p) = pert_by_id.get(&r.spec.id) else { continue };
        if p.route != r.route {
            routes_unchanged = false;
        }
        done_deltas.push((r.spec.id, r.done, p.done));
    }
    drop(pert_by_id);
    Ok(PerturbationReport { base, perturbed, routes_unchanged, done_deltas })
}

/// Robot positions implied by a cell-to-slot occupancy map.
fn positions(occupancy: &BTreeMap<CellId, usize>, slots: &[Slot]) -> BTreeMap<RobotId, CellId> {
    occupancy.iter().map(|(&c, &i)| (slots[i].spec.id, c)).collect()
}

fn validate_roster(w: &Workspace, roster: &[RobotSpec]) -> Result<(), SimError> {
    let mut seen = BTreeSet::new();
    for spec in roster {
        if !seen.insert(spec.id) {
            return Err(SimError::BadRoster(alloc::format!("duplicate robot id {}", spec.id)));
        }
        for c in [spec.source, spec.goal] {
            w.cell(c)?;
        }
        if spec.source == spec.goal {
            return Err(SimError::BadRoster(alloc::format!("{} has source == goal", spec.id)));
        }
    }
    Ok(())
}

struct Slot {
    spec: RobotSpec,
    path: Vec<CellId>,
    plan_micros: u64,
    entry: Option<u32>,
    done: Option<u32>,
    /// Index into `path` of the current cell while on the road.
    pos: usize,
    advances: u32,
    paid: Money,
    received: Money,
    failed: bool,
}

impl Slot {
    fn on_road(&self) -> bool {
        self.entry.is_some() && self.done.is_none() && !self.failed
    }

    fn current(&self) -> CellId {
        self.path[self.pos]
    }

    fn next(&self) -> Option<CellId> {
        self.path.get(self.pos + 1).copied()
    }
}

fn run_auctions(
    w: &Workspace,
    config: &SimConfig,
    roster: Vec<RobotSpec>,
    clock: &mut dyn Clock,
) -> Result<RunReport, SimError> {
    let mut slots: Vec<Slot> = Vec::with_capacity(roster.len());
    for spec in roster {
        let from = w.road_entry(spec.source)?;
        let to = w.road_entry(spec.goal)?;
        let before = clock.now_micros();
        let path = planner::shortest_path(w, from, to)?.cells;
        let plan_micros = clock.now_micros().saturating_sub(before);
        slots.push(Slot {
            spec,
            path,
            plan_micros,
            entry: None,
            done: None,
            pos: 0,
            advances: 0,
            paid: Money::zero(),
            received: Money::zero(),
            failed: false,
        });
    }

    let index: BTreeMap<RobotId, usize> =
        slots.iter().enumerate().map(|(i, s)| (s.spec.id, i)).collect();
    let mut occupancy: BTreeMap<CellId, usize> = BTreeMap::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut collected_total = Money::zero();
    let mut redistributed_total = Money::zero();
    let mut authority_total = Money::zero();
    let mut stalled_for = 0u32;
    let mut deadlocked = false;
    let mut hit_step_limit = false;
    let mut steps_run = 0;
    let mut auction_micros_total = 0u64;

    for t in 0..=config.step_limit {
        let mut record = StepRecord {
            t,
            injected: Vec::new(),
            completed: Vec::new(),
            auctions: Vec::new(),
            moves: Vec::new(),
        };

        // Injection: pending robots enter at their source lane when free.
        for (i, slot) in slots.iter_mut().enumerate() {
            if slot.entry.is_none() && slot.spec.start <= t {
                let cell = slot.path[0];
                if let alloc::collections::btree_map::Entry::Vacant(e) = occupancy.entry(cell) {
                    e.insert(i);
                    slot.entry = Some(t);
                    record.injected.push((slot.spec.id, cell));
                }
            }
        }

        // Completion: robots standing on their goal lane cell leave.
        for (i, slot) in slots.iter_mut().enumerate() {
            if slot.on_road() && slot.pos + 1 == slot.path.len() {
                let removed = occupancy.remove(&slot.current());
                assert_eq!(removed, Some(i));
                slot.done = Some(t);
                record.completed.push(slot.spec.id);
            }
        }

        if slots.iter().all(|s| s.done.is_some()) {
            steps.push(record);
            steps_run = t;
            break;
        }
        if t == config.step_limit {
            steps.push(record);
            steps_run = t;
            hit_step_limit = true;
            break;
        }

        // Classify robots: per-ring bidders, per-ring immobile bodies
        // (robots whose exit lane cell is taken), and free lane movers.
        let mut ring_bidders: BTreeMap<usize, Vec<Announcement>> = BTreeMap::new();
        let mut ring_members: BTreeMap<usize, BTreeSet<RobotId>> = BTreeMap::new();
        let mut ring_obstacles: BTreeMap<usize, BTreeSet<CellId>> = BTreeMap::new();
        let mut lane_movers: Vec<usize> = Vec::new();
        let mut announced: BTreeSet<RobotId> = BTreeSet::new();
        for (i, slot) in slots.iter().enumerate() {
            if !slot.on_road() {
                continue;
            }
            announced.insert(slot.spec.id);
            let current = slot.current();
            let next = slot.next().expect("unfinished robot has a next cell");
            let wait = (t - slot.entry.unwrap()) as u64 - slot.advances as u64;
            let value = mechanism::step_value(wait, &slot.spec.class.weight());
            let here = w.ring_of(current).map(|(k, _)| k);
            let there = w.ring_of(next).map(|(k, _)| k);
            match (here, there) {
                (Some(k), Some(k2)) => {
                    assert_eq!(k, k2, "ring slots of different rings are never adjacent");
                    ring_bidders.entry(k).or_default().push(Announcement {
                        robot: slot.spec.id,
                        current,
                        next,
                        value,
                    });
                    ring_members.entry(k).or_default().insert(slot.spec.id);
                }
                (Some(k), None) => {
                    if occupancy.contains_key(&next) {
                        // Exit blocked by a robot outside the auction: the
                        // robot keeps its slot and sits this auction out.
                        ring_obstacles.entry(k).or_default().insert(current);
                        ring_members.entry(k).or_default().insert(slot.spec.id);
                    } else {
                        ring_bidders.entry(k).or_default().push(Announcement {
                            robot: slot.spec.id,
                            current,
                            next,
                            value,
                        });
                        ring_members.entry(k).or_default().insert(slot.spec.id);
                    }
                }
                (None, Some(k)) => {
                    ring_bidders.entry(k).or_default().push(Announcement {
                        robot: slot.spec.id,
                        current,
                        next,
                        value,
                    });
                    ring_members.entry(k).or_default().insert(slot.spec.id);
                }
                (None, None) => lane_movers.push(i),
            }
        }

        // A robot whose next cell holds an immobile body cannot advance in
        // any assignment; letting it bid would only expose it to charges
        // for blocking others with a move it never had. Demote such robots
        // to bodies as well, transitively around the ring.
        if config.mechanism == MechanismKind::Sparcas {
            loop {
                let mut changed = false;
                for (&k, anns) in ring_bidders.iter_mut() {
                    let obstacles = ring_obstacles.entry(k).or_default();
                    let mut i = 0;
                    while i < anns.len() {
                        if obstacles.contains(&anns[i].next) {
                            let a = anns.remove(i);
                            obstacles.insert(a.current);
                            changed = true;
                        } else {
                            i += 1;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }

        // Auctions, one independent ring at a time.
        let auction_clock_start = clock.now_micros();
        let mut movers: Vec<(usize, CellId, CellId)> = Vec::new();
        let rings: Vec<usize> = ring_bidders
            .keys()
            .copied()
            .chain(ring_obstacles.keys().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for k in rings {
            let ring = w.roundabout(k).expect("classified ring exists");
            let anns = ring_bidders.remove(&k).unwrap_or_default();
            let obstacles = ring_obstacles.remove(&k).unwrap_or_default();
            let outcome: AuctionOutcome = match config.mechanism {
                MechanismKind::Sparcas => {
                    mechanism::sparcas_auction_with(ring, &anns, &obstacles, &config.options)
                }
                MechanismKind::Naive => mechanism::naive_step_with(ring, &anns, &obstacles),
                MechanismKind::PrioritizedBaseline => unreachable!(),
            };
            let mut advancing = Vec::new();
            for a in &anns {
                if outcome.configuration.choice(a.robot) == MoveChoice::Advance {
                    movers.push((index[&a.robot], a.current, a.next));
                    advancing.push(a.robot);
                }
            }
            for (robot, p) in &outcome.payments {
                slots[index[robot]].paid += p;
            }
            collected_total += &outcome.collected;

            // Redistribution: the pool goes to robots on the road that had
            // no stake in this ring. The naive mechanism keeps nothing of
            // the sort; its payments are sunk to the authority.
            let members = ring_members.remove(&k).unwrap_or_default();
            let mut recipients: Vec<RobotId> = Vec::new();
            let mut to_authority = Money::zero();
            match config.mechanism {
                MechanismKind::Sparcas if !outcome.collected.is_negative() => {
                    recipients = announced.iter().copied().filter(|r| !members.contains(r)).collect();
                    let transfers: Vec<Transfer> =
                        mechanism::redistribute(&outcome.collected, &recipients);
                    if transfers.is_empty() {
                        recipients.clear();
                    }
                    let mut sum = Money::zero();
                    for tr in &transfers {
                        sum += &tr.amount;
                        match tr.to {
                            Party::Robot(r) => {
                                slots[index[&r]].received += &tr.amount;
                                redistributed_total += &tr.amount;
                            }
                            Party::Authority => {
                                to_authority += &tr.amount;
                                recipients.clear();
                            }
                        }
                    }
                    assert_eq!(sum, outcome.collected, "redistribution must balance");
                }
                _ => {
                    to_authority = outcome.collected.clone();
                }
            }
            authority_total += &to_authority;

            record.auctions.push(AuctionRecord {
                ring: ring.id,
                announcements: anns,
                obstacles: obstacles.into_iter().collect(),
                advancing,
                payments: outcome.payments.into_iter().collect(),
                recipients,
                to_authority,
            });
        }

        auction_micros_total += clock.now_micros().saturating_sub(auction_clock_start);

        // Free-flow lane movement: advance when the next cell was free at
        // the snapshot. Unique predecessors make these moves conflict-free.
        for i in lane_movers {
            let current = slots[i].current();
            let next = slots[i].next().unwrap();
            if !occupancy.contains_key(&next) {
                movers.push((i, current, next));
            }
        }

        // Apply all moves at once.
        let before_moves = positions(&occupancy, &slots);
        movers.sort_by_key(|&(i, _, _)| slots[i].spec.id);
        for &(i, from, _) in &movers {
            let removed = occupancy.remove(&from);
            assert_eq!(removed, Some(i));
        }
        for &(i, from, to) in &movers {
            let prev = occupancy.insert(to, i);
            assert!(prev.is_none(), "collision at {to}");
            slots[i].pos += 1;
            slots[i].advances += 1;
            record.moves.push((slots[i].spec.id, from, to));
        }
        let after_moves = positions(&occupancy, &slots);
        let flags = detect_collisions(&before_moves, &after_moves);
        assert!(flags.is_empty(), "collisions: {flags:?}");

        // Ring capacity invariant (the naive mechanism does not have one).
        if config.mechanism == MechanismKind::Sparcas {
            for rb in w.roundabouts() {
                let inside = rb.ring.iter().filter(|c| occupancy.contains_key(c)).count();
                assert!(inside <= rb.capacity(), "ring {} over capacity", rb.id);
            }
        }

        let stalled = record.moves.is_empty()
            && record.injected.is_empty()
            && record.completed.is_empty()
            && slots.iter().any(Slot::on_road);
        stalled_for = if stalled { stalled_for + 1 } else { 0 };
        steps.push(record);
        if stalled_for >= config.deadlock_window {
            deadlocked = true;
            steps_run = t + 1;
            break;
        }
        steps_run = t + 1;
    }

    // Exact bookkeeping: everything collected was either handed back to
    // robots or kept by the authority.
    assert_eq!(
        collected_total,
        redistributed_total.clone() + &authority_total,
        "money must not leak"
    );
    let paid_sum: Money = slots.iter().map(|s| &s.paid).sum();
    let received_sum: Money = slots.iter().map(|s| &s.received).sum();
    assert_eq!(paid_sum, collected_total);
    assert_eq!(received_sum, redistributed_total);

    Ok(finish_report(config, slots, steps, steps_run, deadlocked, hit_step_limit,
        collected_total, redistributed_total, authority_total, auction_micros_total))
}

fn run_baseline(
    w: &Workspace,
    config: &SimConfig,
    roster: Vec<RobotSpec>,
    clock: &mut dyn Clock,
) -> Result<RunReport, SimError> {
    let mut jobs = Vec::with_capacity(roster.len());
    for spec in &roster {
        let from = w.road_entry(spec.source)?;
        let to = w.road_entry(spec.goal)?;
        jobs.push((from, to, spec.start));
    }
    let mut plans: Vec<PlanOutcome> = Vec::with_capacity(jobs.len());
    let mut micros: Vec<u64> = Vec::with_capacity(jobs.len());
    {
        // Plan robots one at a time in id order against earlier plans.
        let mut reservation = planner::Reservation::default();
        let horizon = 4 * (w.width() as u32 + w.height() as u32);
        for &(from, to, start) in &jobs {
            let before = clock.now_micros();
            let outcome = planner::plan_one_against(w, from, to, start, horizon, &mut reservation);
            micros.push(clock.now_micros().saturating_sub(before));
            plans.push(outcome);
        }
    }

    let mut slots: Vec<Slot> = Vec::with_capacity(roster.len());
    for ((spec, plan), plan_micros) in roster.into_iter().zip(&plans).zip(micros) {
        let (path, failed) = match plan {
            PlanOutcome::Planned(p) => (p.steps.iter().map(|&(c, _)| c).collect(), false),
            PlanOutcome::Failed { .. } => (Vec::new(), true),
        };
        slots.push(Slot {
            spec,
            path,
            plan_micros,
            entry: None,
            done: None,
            pos: 0,
            advances: 0,
            paid: Money::zero(),
            received: Money::zero(),
            failed,
        });
    }

    // Execute the plans. They are conflict-free by construction; the
    // occupancy map re-checks that claim every step. A plan may hand a cell
    // from one robot to the next within a single step, so all departures
    // apply before any entry.
    let mut occupancy: BTreeMap<CellId, usize> = BTreeMap::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let horizon = plans
        .iter()
        .filter_map(|p| p.planned().map(|tp| tp.arrival_time()))
        .max();
    let mut steps_run = 0;
    let hit_step_limit = horizon.map(|h| h > config.step_limit).unwrap_or(false);
    if let Some(last) = horizon {
        for t in 0..=last.min(config.step_limit) {
            let mut record = StepRecord {
                t,
                injected: Vec::new(),
                completed: Vec::new(),
                auctions: Vec::new(),
                moves: Vec::new(),
            };
            let before_moves = positions(&occupancy, &slots);
            let mut departures: Vec<(usize, CellId)> = Vec::new();
            let mut entries: Vec<(usize, CellId, Option<CellId>)> = Vec::new();
            for (i, slot) in slots.iter().enumerate() {
                if slot.failed || slot.done.is_some() {
                    continue;
                }
                let plan = plans[i].planned().unwrap();
                if plan.entry_time() == t {
                    entries.push((i, plan.steps[0].0, None));
                } else if let (Some(prev_c), Some(cur_c)) =
                    (plan.position_at(t.wrapping_sub(1)), plan.position_at(t))
                {
                    if prev_c != cur_c {
                        departures.push((i, prev_c));
                        entries.push((i, cur_c, Some(prev_c)));
                    }
                }
            }
            for &(i, c) in &departures {
                let removed = occupancy.remove(&c);
                assert_eq!(removed, Some(i));
            }
            for &(i, c, from) in &entries {
                let prev = occupancy.insert(c, i);
                assert!(prev.is_none(), "baseline collision at {c}");
                match from {
                    None => {
                        slots[i].entry = Some(t);
                        record.injected.push((slots[i].spec.id, c));
                    }
                    Some(from) => {
                        slots[i].advances += 1;
                        record.moves.push((slots[i].spec.id, from, c));
                    }
                }
            }
            let after_moves = positions(&occupancy, &slots);
            let flags = detect_collisions(&before_moves, &after_moves);
            assert!(flags.is_empty(), "baseline collisions: {flags:?}");
            for (i, slot) in slots.iter_mut().enumerate() {
                if slot.failed || slot.done.is_some() || slot.entry.is_none() {
                    continue;
                }
                let plan = plans[i].planned().unwrap();
                if plan.arrival_time() == t {
                    let removed = occupancy.remove(&plan.steps.last().unwrap().0);
                    assert_eq!(removed, Some(i));
                    slot.done = Some(t);
                    record.completed.push(slot.spec.id);
                }
            }
            steps.push(record);
            steps_run = t + 1;
        }
    }

    // Route for summaries: cells visited, waits collapsed.
    for slot in &mut slots {
        if !slot.failed {
            let mut dedup = slot.path.clone();
            dedup.dedup();
            slot.path = dedup;
        }
    }

    Ok(finish_report(config, slots, steps, steps_run, false, hit_step_limit,
        Money::zero(), Money::zero(), Money::zero(), 0))
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    config: &SimConfig,
    slots: Vec<Slot>,
    steps: Vec<StepRecord>,
    steps_run: u32,
    deadlocked: bool,
    hit_step_limit: bool,
    collected_total: Money,
    redistributed_total: Money,
    authority_total: Money,
    auction_micros_total: u64,
) -> RunReport {
    let planning_micros_max = slots.iter().map(|s| s.plan_micros).max().unwrap_or(0);
    let planning_micros_total = slots.iter().map(|s| s.plan_micros).sum();
    let makespan = slots.iter().filter_map(|s| s.done).max();
    let completed = slots.iter().filter(|s| s.done.is_some()).count();
    let failed = slots.iter().filter(|s| s.failed).count();
    let robots = slots
        .into_iter()
        .map(|s| RobotSummary {
            route: s.path,
            spec: s.spec,
            entry: s.entry,
            done: s.done,
            advances: s.advances,
            paid: s.paid,
            received: s.received,
            failed: s.failed,
        })
        .collect();
    RunReport {
        mechanism: config.mechanism,
        robots,
        steps,
        steps_run,
        completed,
        failed,
        makespan,
        deadlocked,
        hit_step_limit,
        collected_total,
        redistributed_total,
        authority_total,
        planning_micros_max,
        planning_micros_total,
        auction_micros_total,
        collisions: 0,
        mini_slot_micros: config.mini_slot_micros,
    }
}
