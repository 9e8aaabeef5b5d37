//! Independent reference implementations for cross-checking.
//!
//! Everything here recomputes answers from first principles with different
//! code than the production paths: the auction by materializing every
//! subset of advancing robots, distances by breadth-first search, optimal
//! coordination by A* over joint states. Tests compare the two sides; the
//! oracles are deliberately slow and refuse instances beyond their size
//! limits instead of approximating.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mechanism::{self, Announcement, RobotId};
use crate::money::Money;
use crate::workspace::{CellId, Roundabout, Workspace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub advancing: BTreeSet<RobotId>,
    pub welfare: Money,
    pub payments: BTreeMap<RobotId, Money>,
}

const MAX_ORACLE_ROBOTS: usize = 12;

/// Every subset of robots that could advance together, as sets.
fn feasible_subsets(
    ring: &Roundabout,
    anns: &[&Announcement],
    obstacles: &BTreeSet<CellId>,
) -> Vec<BTreeSet<RobotId>> {
    let ring_cells: BTreeSet<CellId> = ring.ring.iter().copied().collect();
    let blocked_in_ring = obstacles.intersection(&ring_cells).count();
    let limit = ring_cells.len() - 1;
    let mut result = Vec::new();
    'subset: for choice in 0..(1usize << anns.len()) {
        let movers: Vec<&Announcement> = anns
            .iter()
            .enumerate()
            .filter(|(i, _)| choice & (1 << i) != 0)
            .map(|(_, a)| *a)
            .collect();
        let mut occupied_after: BTreeSet<CellId> = BTreeSet::new();
        let mut load = blocked_in_ring;
        for a in anns {
            let lands_on = if movers.iter().any(|m| m.robot == a.robot) {
                if a.next == a.current {
                    continue 'subset;
                }
                a.next
            } else {
                a.current
            };
            if obstacles.contains(&lands_on) || !occupied_after.insert(lands_on) {
                continue 'subset;
            }
            if ring_cells.contains(&lands_on) {
                load += 1;
            }
        }
        if load > limit {
            continue 'subset;
        }
        for (x, a) in movers.iter().enumerate() {
            for b in movers.iter().skip(x + 1) {
                if a.next == b.current && b.next == a.current {
                    continue 'subset;
                }
            }
        }
        result.push(movers.iter().map(|a| a.robot).collect());
    }
    result
}

/// Picks the welfare-maximal subset; ties go to the assignment whose
/// advance flags, listed in robot-id order, are lexicographically least.
fn best_subset(
    ring: &Roundabout,
    anns: &[&Announcement],
    obstacles: &BTreeSet<CellId>,
) -> (BTreeSet<RobotId>, Money) {
    let by_robot: BTreeMap<RobotId, &Money> = anns.iter().map(|a| (a.robot, &a.value)).collect();
    let ids: Vec<RobotId> = by_robot.keys().copied().collect();
    let mut best: Option<(Vec<bool>, BTreeSet<RobotId>, Money)> = None;
    for subset in feasible_subsets(ring, anns, obstacles) {
        let welfare: Money = subset.iter().map(|r| by_robot[r]).sum();
        let flags: Vec<bool> = ids.iter().map(|r| subset.contains(r)).collect();
        let replace = match &best {
            None => true,
            Some((bf, _, bw)) => welfare > *bw || (welfare == *bw && flags < *bf),
        };
        if replace {
            best = Some((flags, subset, welfare));
        }
    }
    let (_, subset, welfare) = best.expect("staying put is always feasible");
    (subset, welfare)
}

pub fn oracle_auction(ring: &Roundabout, anns: &[Announcement]) -> OracleOutcome {
    oracle_auction_with(ring, anns, &BTreeSet::new())
}

/// Exhaustive re-derivation of the auction: chosen assignment, welfare,
/// and the removed-robot externality payments. Refuses big instances.
pub fn oracle_auction_with(
    ring: &Roundabout,
    anns: &[Announcement],
    obstacles: &BTreeSet<CellId>,
) -> OracleOutcome {
    assert!(anns.len() <= MAX_ORACLE_ROBOTS, "oracle refuses {} robots", anns.len());
    let all: Vec<&Announcement> = anns.iter().collect();
    let (advancing, welfare) = best_subset(ring, &all, obstacles);
    let mut payments = BTreeMap::new();
    for a in anns {
        let rest: Vec<&Announcement> =
            anns.iter().filter(|b| b.robot != a.robot).collect();
        let (_, alone) = best_subset(ring, &rest, obstacles);
        let own = if advancing.contains(&a.robot) { a.value.clone() } else { Money::zero() };
        let others_now = welfare.clone() - own;
        payments.insert(a.robot, alone - others_now);
    }
    OracleOutcome { advancing, welfare, payments }
}

/// A profitable lie found by the sweep, as evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deviation {
    pub robot: RobotId,
    pub reported: Money,
    pub truthful_payoff: Money,
    pub deviant_payoff: Money,
}

fn payoff(
    ring: &Roundabout,
    anns: &[Announcement],
    obstacles: &BTreeSet<CellId>,
    robot: RobotId,
    true_value: &Money,
) -> Money {
    let out = mechanism::sparcas_auction_with(ring, anns, obstacles, &Default::default());
    let gain = if out.configuration.choice(robot) == mechanism::MoveChoice::Advance {
        true_value.clone()
    } else {
        Money::zero()
    };
    gain - &out.payments[&robot]
}

/// Tries a grid of alternative reports for every robot: integers 0..=10,
/// everyone's bids nudged by one thousandth either way, and the truth
/// itself. Returns the first report that beats truth-telling, which the
/// mechanism promises never exists. Redistribution is ignored: a robot's
/// share of other rings' pools does not depend on its own report.
pub fn misreport_sweep(
    ring: &Roundabout,
    anns: &[Announcement],
    obstacles: &BTreeSet<CellId>,
) -> Option<Deviation> {
    let nudge = Money::from_ratio(1, 1000);
    let mut candidates: BTreeSet<Money> = (0..=10).map(Money::from_int).collect();
    for a in anns {
        candidates.insert(a.value.clone());
        candidates.insert(a.value.clone() + &nudge);
        let down = a.value.clone() - &nudge;
        if !down.is_negative() {
            candidates.insert(down);
        }
    }
    for (i, a) in anns.iter().enumerate() {
        let honest = payoff(ring, anns, obstacles, a.robot, &a.value);
        for reported in &candidates {
            if *reported == a.value {
                continue;
            }
            let mut lied = anns.to_vec();
            lied[i].value = reported.clone();
            let deviant = payoff(ring, &lied, obstacles, a.robot, &a.value);
            if deviant > honest {
                return Some(Deviation {
                    robot: a.robot,
                    reported: reported.clone(),
                    truthful_payoff: honest,
                    deviant_payoff: deviant,
                });
            }
        }
    }
    None
}

/// Steps from every road cell to `goal`, by breadth-first search over
/// reversed road edges. Unreachable cells are absent.
pub fn bfs_distances(w: &Workspace, goal: CellId) -> BTreeMap<CellId, u32> {
    let mut preds: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
    for cell in w.cells() {
        for &s in w.successors(cell.id).unwrap() {
            preds.entry(s).or_default().push(cell.id);
        }
    }
    let mut dist = BTreeMap::new();
    dist.insert(goal, 0u32);
    let mut queue = VecDeque::new();
    queue.push_back(goal);
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        for &p in preds.get(&c).into_iter().flatten() {
            if let alloc::collections::btree_map::Entry::Vacant(e) = dist.entry(p) {
                e.insert(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

const JOINT_STATE_CAP: usize = 400_000;
const MAX_JOINT_ROBOTS: usize = 4;

/// Cost of an optimal joint plan: the minimized sum of arrival times, and
/// the step at which that plan's last robot arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointCost {
    pub sum_of_costs: u64,
    pub makespan: u32,
}

/// Minimal possible sum of arrival times for a handful of robots moving
/// simultaneously under pure collision rules: one cell per robot, no
/// head-on swaps, finished robots leave the floor. No queueing discipline,
/// no ring capacity margin; this is the physical optimum the mechanisms
/// are measured against. Returns None when the search exceeds its budget.
pub fn joint_optimal(w: &Workspace, jobs: &[(CellId, CellId)]) -> Option<JointCost> {
    assert!(jobs.len() <= MAX_JOINT_ROBOTS, "joint oracle refuses {} robots", jobs.len());
    let mut sources = BTreeSet::new();
    for &(s, g) in jobs {
        assert!(w.is_road(s) && w.is_road(g), "joint oracle works on road cells");
        assert!(s != g, "trivial job");
        assert!(sources.insert(s), "two robots on one source");
    }
    let dists: Vec<BTreeMap<CellId, u32>> =
        jobs.iter().map(|&(_, g)| bfs_distances(w, g)).collect();

    // State: the active robots and where they stand, cheapest-first A*.
    type State = Vec<(u8, CellId)>;
    let start: State = jobs.iter().enumerate().map(|(i, &(s, _))| (i as u8, s)).collect();
    let h0: u32 = start.iter().map(|&(i, c)| dists[i as usize][&c]).sum();
    let mut open: BinaryHeap<Reverse<(u64, State, u32)>> = BinaryHeap::new();
    let mut best_g: BTreeMap<State, u64> = BTreeMap::new();
    best_g.insert(start.clone(), 0);
    open.push(Reverse((h0 as u64, start, 0)));
    let mut expanded = 0usize;

    while let Some(Reverse((f, state, t))) = open.pop() {
        let g = f - state.iter().map(|&(i, c)| dists[i as usize][&c] as u64).sum::<u64>();
        if g > *best_g.get(&state).unwrap_or(&u64::MAX) {
            continue;
        }
        if state.is_empty() {
            return Some(JointCost { sum_of_costs: g, makespan: t });
        }
        expanded += 1;
        if expanded > JOINT_STATE_CAP {
            return None;
        }

        // Product of per-robot options, pruned as it is built.
        let mut combos: Vec<State> = alloc::vec![Vec::new()];
        for &(i, c) in &state {
            let mut grown = Vec::new();
            let mut options = alloc::vec![c];
            options.extend(w.successors(c).unwrap().iter().copied());
            for combo in &combos {
                'option: for &o in &options {
                    if combo.iter().any(|&(_, t)| t == o) {
                        continue;
                    }
                    for &(j, t) in combo {
                        let jc = state.iter().find(|&&(r, _)| r == j).unwrap().1;
                        if t == c && o == jc {
                            continue 'option;
                        }
                    }
                    let mut next = combo.clone();
                    next.push((i, o));
                    grown.push(next);
                }
            }
            combos = grown;
        }
        let step_cost = state.len() as u64;
        for combo in combos {
            let survivors: State = combo
                .iter()
                .copied()
                .filter(|&(i, c)| c != jobs[i as usize].1)
                .collect();
            // Robots that cannot reach their goal any more are dead ends.
            let h: Option<u64> = survivors
                .iter()
                .map(|&(i, c)| dists[i as usize].get(&c).map(|&d| d as u64))
                .sum();
            let Some(h) = h else { continue };
            let ng = g + step_cost;
            if ng < *best_g.get(&survivors).unwrap_or(&u64::MAX) {
                best_g.insert(survivors.clone(), ng);
                open.push(Reverse((ng + h, survivors, t + 1)));
            }
        }
    }
    None
}

/// Random but physically valid auction instances for differential tests:
/// a few robots in the ring (heading onward or out) and at entry lanes,
/// with small rational bids, plus at most one immobile body on a slot.
pub fn random_instance(ring: &Roundabout, seed: u64) -> (Vec<Announcement>, BTreeSet<CellId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = ring.ring.len();
    let mut anns = Vec::new();
    let mut used_slots: BTreeSet<u8> = BTreeSet::new();
    let mut id = 0u32;
    let draw = |rng: &mut ChaCha8Rng| Money::from_ratio(rng.gen_range(0..=40), rng.gen_range(1..=8));

    for p in 0..slots as u8 {
        if rng.gen_range(0..100) < 40 {
            used_slots.insert(p);
        }
    }
    // One slot body may be an obstacle instead of a bidder.
    let mut obstacles = BTreeSet::new();
    if !used_slots.is_empty() && rng.gen_range(0..100) < 30 {
        let pick = rng.gen_range(0..used_slots.len());
        let p = *used_slots.iter().nth(pick).unwrap();
        used_slots.remove(&p);
        obstacles.insert(ring.ring[p as usize]);
    }
    for &p in &used_slots {
        let current = ring.ring[p as usize];
        let exit = ring.exits.get(&p);
        let next = match exit {
            Some(&e) if rng.gen_range(0..100) < 40 => e,
            _ => ring.ring_successor(p),
        };
        let value = draw(&mut rng);
        anns.push(Announcement { robot: RobotId(id), current, next, value });
        id += 1;
    }
    for (&lane, &p) in &ring.entries {
        if rng.gen_range(0..100) < 50 {
            anns.push(Announcement {
                robot: RobotId(id),
                current: lane,
                next: ring.ring[p as usize],
                value: draw(&mut rng),
            });
            id += 1;
        }
    }
    (anns, obstacles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ring4() -> Roundabout {
        let ring = vec![CellId(0), CellId(1), CellId(2), CellId(3)];
        let entries = (0..4u8).map(|p| (CellId(10 + p as u32), p)).collect();
        let exits = (0..4u8).map(|p| (p, CellId(20 + p as u32))).collect();
        Roundabout { id: 0, ring, entries, exits }
    }

    fn ann(id: u32, current: u32, next: u32, value: i64) -> Announcement {
        Announcement {
            robot: RobotId(id),
            current: CellId(current),
            next: CellId(next),
            value: Money::from_int(value),
        }
    }

    #[test]
    fn oracle_reproduces_contested_entry() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 5), ann(2, 11, 0, 3)];
        let out = oracle_auction(&r, &anns);
        assert!(out.advancing.contains(&RobotId(1)));
        assert!(!out.advancing.contains(&RobotId(2)));
        assert_eq!(out.payments[&RobotId(1)], Money::from_int(3));
        assert!(out.payments[&RobotId(2)].is_zero());
    }

    #[test]
    fn oracle_agrees_with_mechanism_on_random_instances() {
        let r = ring4();
        for seed in 0..150 {
            let (anns, obstacles) = random_instance(&r, seed);
            let fast = mechanism::sparcas_auction_with(&r, &anns, &obstacles, &Default::default());
            let slow = oracle_auction_with(&r, &anns, &obstacles);
            let fast_adv: BTreeSet<RobotId> = fast.configuration.advancing().collect();
            assert_eq!(fast_adv, slow.advancing, "seed {seed}: {anns:?}");
            assert_eq!(fast.welfare, slow.welfare, "seed {seed}");
            let fast_pay: BTreeMap<RobotId, Money> = fast.payments.into_iter().collect();
            assert_eq!(fast_pay, slow.payments, "seed {seed}");
            for p in slow.payments.values() {
                assert!(!p.is_negative(), "seed {seed}");
            }
        }
    }

    #[test]
    fn truth_telling_survives_the_sweep() {
        let r = ring4();
        for seed in 0..25 {
            let (anns, obstacles) = random_instance(&r, seed);
            if anns.is_empty() {
                continue;
            }
            assert_eq!(misreport_sweep(&r, &anns, &obstacles), None, "seed {seed}");
        }
    }

    #[test]
    fn pivotal_stayer_pays_what_its_body_blocks() {
        // A robot wedged behind an immobile body cannot move, yet its own
        // body denies an entrant the slot it stands on. The externality
        // definition charges it for that; the fast path and the oracle must
        // agree on this uncomfortable case.
        let r = ring4();
        let mut obstacles = BTreeSet::new();
        obstacles.insert(CellId(1));
        let anns = [ann(1, 0, 1, 2), ann(2, 10, 0, 9)];
        let fast = mechanism::sparcas_auction_with(&r, &anns, &obstacles, &Default::default());
        let slow = oracle_auction_with(&r, &anns, &obstacles);
        assert!(fast.configuration.is_all_stay());
        assert!(slow.advancing.is_empty());
        assert_eq!(slow.payments[&RobotId(1)], Money::from_int(9));
        assert_eq!(fast.payments[&RobotId(1)], Money::from_int(9));
        assert!(slow.payments[&RobotId(2)].is_zero());
    }

    #[test]
    fn bfs_matches_grid_geometry() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let goal = w.cell_at(1, 5).unwrap();
        let dist = bfs_distances(&w, goal);
        assert_eq!(dist[&goal], 0);
        assert_eq!(dist[&w.cell_at(1, 3).unwrap()], 2);
        // Every road cell reaches the goal in a strongly connected grid.
        for c in w.cells() {
            if w.is_road(c.id) {
                assert!(dist.contains_key(&c.id), "no route from {}", c.id);
            }
        }
    }

    #[test]
    fn joint_plan_for_independent_robots_is_sum_of_distances() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let a = (w.cell_at(1, 3).unwrap(), w.cell_at(1, 6).unwrap());
        let b = (w.cell_at(8, 10).unwrap(), w.cell_at(8, 13).unwrap());
        let da = bfs_distances(&w, a.1)[&a.0] as u64;
        let db = bfs_distances(&w, b.1)[&b.0] as u64;
        let lone = joint_optimal(&w, &[a]).unwrap();
        assert_eq!(lone.sum_of_costs, da);
        assert_eq!(lone.makespan as u64, da);
        let both = joint_optimal(&w, &[a, b]).unwrap();
        assert_eq!(both.sum_of_costs, da + db);
        assert_eq!(both.makespan as u64, da.max(db));
    }

    #[test]
    fn joint_plan_charges_for_contested_cell() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        // Two robots one step away from the same cell, one inside the ring
        // and one on the entry lane: they cannot land together, so the
        // optimum is one step worse than the distance sum.
        let rb = w
            .roundabouts()
            .iter()
            .find(|rb| !rb.entries.is_empty())
            .unwrap();
        let (&lane, &p) = rb.entries.iter().next().unwrap();
        let slot = rb.ring[p as usize];
        let prev = rb.ring[(p as usize + 3) % 4];
        let jobs = [(prev, slot), (lane, slot)];
        assert_eq!(joint_optimal(&w, &jobs).unwrap().sum_of_costs, 3);
    }
}
