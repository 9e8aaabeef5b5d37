//! Spot auctions for roundabout slots.
//!
//! Each roundabout runs an independent single-step auction. Robots holding
//! or approaching a ring announce their current cell, the next cell of
//! their committed route, and a reported value for advancing one step right
//! now. The auction picks the feasible stay/advance assignment with maximal
//! reported welfare and charges each robot the externality it imposes on
//! the others, computed by re-solving the auction with that robot removed.
//! Payments are therefore never negative and reporting the true value is a
//! dominant strategy. Collected payments are redistributed to robots not
//! involved in the auction, keeping the day budget-balanced.
//!
//! `naive_step` is the queueing baseline: advance when the next cell is
//! free, break head-on contests by bid then id, winner pays the best losing
//! bid. It has no ring capacity rule and can wedge a full ring permanently.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::money::Money;
use crate::workspace::{CellId, Roundabout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RobotId(pub u32);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MoveChoice {
    Stay,
    Advance,
}

/// One robot's declaration to the auction at the ring its current or next
/// cell belongs to. `next == current` announces that the robot cannot move
/// this step (it is then assigned Stay in every configuration).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Announcement {
    pub robot: RobotId,
    pub current: CellId,
    pub next: CellId,
    pub value: Money,
}

impl Announcement {
    fn target(&self, choice: MoveChoice) -> CellId {
        match choice {
            MoveChoice::Stay => self.current,
            MoveChoice::Advance => self.next,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Among welfare-maximal configurations pick the one whose choice
    /// vector, in robot-id order with Stay < Advance, is smallest.
    #[default]
    LexSmallest,
    /// Deliberately wrong variant for testing the test suite.
    LexLargest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MechanismOptions {
    pub tie_break: TieBreak,
    /// Deliberately wrong variant for testing the test suite.
    pub negate_payments: bool,
}

/// A stay/advance assignment for every announced robot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub moves: BTreeMap<RobotId, MoveChoice>,
}

impl Configuration {
    pub fn choice(&self, robot: RobotId) -> MoveChoice {
        self.moves.get(&robot).copied().unwrap_or(MoveChoice::Stay)
    }

    pub fn advancing(&self) -> impl Iterator<Item = RobotId> + '_ {
        self.moves
            .iter()
            .filter(|(_, &c)| c == MoveChoice::Advance)
            .map(|(&r, _)| r)
    }

    pub fn is_all_stay(&self) -> bool {
        self.moves.values().all(|&c| c == MoveChoice::Stay)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub configuration: Configuration,
    /// Sum of reported values of advancing robots.
    pub welfare: Money,
    pub payments: BTreeMap<RobotId, Money>,
    /// Sum of all payments.
    pub collected: Money,
}

/// Value of advancing one step for a robot of the given weight that has
/// waited `wait_steps` steps so far: (wait_steps + 1) * weight.
pub fn step_value(wait_steps: u64, weight: &Money) -> Money {
    weight.clone() * (wait_steps as i64 + 1)
}

/// Value a robot realizes under an assignment: its reported value when
/// allowed to move, zero when kept in place. None when the robot is not
/// part of the configuration.
pub fn valuation(config: &Configuration, ann: &Announcement) -> Option<Money> {
    match config.moves.get(&ann.robot)? {
        MoveChoice::Advance => Some(ann.value.clone()),
        MoveChoice::Stay => Some(Money::zero()),
    }
}

struct AuctionContext<'a> {
    ring: &'a Roundabout,
    /// Sorted by robot id ascending.
    anns: Vec<&'a Announcement>,
    obstacles: &'a BTreeSet<CellId>,
    /// Obstacle bodies inside the ring count toward its capacity.
    ring_obstacles: usize,
}

impl<'a> AuctionContext<'a> {
    fn new(
        ring: &'a Roundabout,
        anns: &'a [Announcement],
        obstacles: &'a BTreeSet<CellId>,
    ) -> Self {
        assert!(anns.len() <= 16, "auction with {} robots", anns.len());
        let mut sorted: Vec<&Announcement> = anns.iter().collect();
        sorted.sort_by_key(|a| a.robot);
        let mut currents = BTreeSet::new();
        for a in &sorted {
            assert!(currents.insert(a.current), "two robots share {}", a.current);
            assert!(!obstacles.contains(&a.current), "robot inside an obstacle");
        }
        assert!(
            sorted.windows(2).all(|w| w[0].robot < w[1].robot),
            "duplicate robot id in announcements"
        );
        let ring_obstacles = obstacles.iter().filter(|&&c| ring.contains(c)).count();
        AuctionContext { ring, anns: sorted, obstacles, ring_obstacles }
    }

    fn n(&self) -> usize {
        self.anns.len()
    }

    /// Bit of robot index i in a configuration mask; index 0 (smallest id)
    /// is the most significant bit so that numeric mask order equals the
    /// lexicographic order used for tie-breaking.
    fn bit(&self, i: usize) -> u32 {
        1 << (self.n() - 1 - i)
    }

    fn advances(&self, mask: u32, i: usize) -> bool {
        mask & self.bit(i) != 0
    }

    /// Checks physical feasibility of a configuration over the announced
    /// robots, ignoring (vanishing) the robot at index `skip` if given.
    fn feasible(&self, mask: u32, skip: Option<usize>) -> bool {
        let mut targets: Vec<CellId> = Vec::with_capacity(self.n());
        let mut in_ring = 0usize;
        for (i, a) in self.anns.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let adv = self.advances(mask, i);
            if adv && a.next == a.current {
                return false;
            }
            let t = a.target(if adv { MoveChoice::Advance } else { MoveChoice::Stay });
            if self.obstacles.contains(&t) {
                return false;
            }
            if targets.contains(&t) {
                return false;
            }
            if self.ring.contains(t) {
                in_ring += 1;
            }
            targets.push(t);
        }
        if in_ring + self.ring_obstacles > self.ring.capacity() {
            return false;
        }
        // Head-on swaps: both advance into each other's current cell.
        for (i, a) in self.anns.iter().enumerate() {
            if Some(i) == skip || !self.advances(mask, i) {
                continue;
            }
            for (j, b) in self.anns.iter().enumerate().skip(i + 1) {
                if Some(j) == skip || !self.advances(mask, j) {
                    continue;
                }
                if a.next == b.current && b.next == a.current {
                    return false;
                }
            }
        }
        true
    }

    fn welfare(&self, mask: u32, skip: Option<usize>) -> Money {
        self.anns
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != skip && self.advances(mask, i))
            .map(|(_, a)| &a.value)
            .sum()
    }

    /// Welfare-maximal feasible mask under the tie-break rule, with the
    /// robot at `skip` removed from the workspace entirely.
    fn best_mask(&self, skip: Option<usize>, tie_break: TieBreak) -> (u32, Money) {
        let mut best: Option<(u32, Money)> = None;
        for mask in 0..(1u32 << self.n()) {
            if let Some(s) = skip {
                // Canonical representative: a vanished robot never advances.
                if self.advances(mask, s) {
                    continue;
                }
            }
            if !self.feasible(mask, skip) {
                continue;
            }
            let w = self.welfare(mask, skip);
            let replace = match &best {
                None => true,
                Some((_, bw)) => match tie_break {
                    TieBreak::LexSmallest => w > *bw,
                    TieBreak::LexLargest => w >= *bw,
                },
            };
            if replace {
                best = Some((mask, w));
            }
        }
        best.expect("all-stay must be feasible; ring over capacity?")
    }

    fn configuration(&self, mask: u32) -> Configuration {
        let moves = self
            .anns
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let c = if self.advances(mask, i) { MoveChoice::Advance } else { MoveChoice::Stay };
                (a.robot, c)
            })
            .collect();
        Configuration { moves }
    }
}

/// All physically feasible stay/advance assignments, in lexicographic
/// order. Mostly useful for tests and audits; the auction itself scans
/// masks without materializing this list.
pub fn feasible_configurations(ring: &Roundabout, anns: &[Announcement]) -> Vec<Configuration> {
    feasible_configurations_with(ring, anns, &BTreeSet::new())
}

pub fn feasible_configurations_with(
    ring: &Roundabout,
    anns: &[Announcement],
    obstacles: &BTreeSet<CellId>,
) -> Vec<Configuration> {
    let ctx = AuctionContext::new(ring, anns, obstacles);
    (0..(1u32 << ctx.n()))
        .filter(|&m| ctx.feasible(m, None))
        .map(|m| ctx.configuration(m))
        .collect()
}

pub fn efficient_configuration(ring: &Roundabout, anns: &[Announcement]) -> Configuration {
    let none = BTreeSet::new();
    let ctx = AuctionContext::new(ring, anns, &none);
    let (mask, _) = ctx.best_mask(None, TieBreak::LexSmallest);
    ctx.configuration(mask)
}

/// Welfare-maximal assignment of the other robots when `excluded` is lifted
/// out of the workspace entirely, value and body both. This is the
/// counterfactual world behind the payment rule. The result covers every
/// announced robot except `excluded`; None when `excluded` never announced.
pub fn exclusion_configuration(
    ring: &Roundabout,
    anns: &[Announcement],
    excluded: RobotId,
) -> Option<Configuration> {
    exclusion_configuration_with(ring, anns, &BTreeSet::new(), excluded)
}

pub fn exclusion_configuration_with(
    ring: &Roundabout,
    anns: &[Announcement],
    obstacles: &BTreeSet<CellId>,
    excluded: RobotId,
) -> Option<Configuration> {
    let ctx = AuctionContext::new(ring, anns, obstacles);
    let i = ctx.anns.iter().position(|a| a.robot == excluded)?;
    let (mask, _) = ctx.best_mask(Some(i), TieBreak::LexSmallest);
    let mut config = ctx.configuration(mask);
    config.moves.remove(&excluded);
    Some(config)
}

pub fn sparcas_auction(ring: &Roundabout, anns: &[Announcement]) -> AuctionOutcome {
    sparcas_auction_with(ring, anns, &BTreeSet::new(), &MechanismOptions::default())
}

/// Runs the auction with extra immobile bodies (`obstacles`) that block
/// their cells and count toward ring capacity but do not bid or pay.
pub fn sparcas_auction_with(
    ring: &Roundabout,
    anns: &[Announcement],
    obstacles: &BTreeSet<CellId>,
    options: &MechanismOptions,
) -> AuctionOutcome {
    let ctx = AuctionContext::new(ring, anns, obstacles);
    let (mask, welfare) = ctx.best_mask(None, options.tie_break);
    let mut payments = BTreeMap::new();
    let mut collected = Money::zero();
    for (i, a) in ctx.anns.iter().enumerate() {
        // Externality of robot i: best welfare of the others with i gone
        // entirely, minus what the others get in the chosen configuration.
        let (_, without_i) = ctx.best_mask(Some(i), options.tie_break);
        let others_now = if ctx.advances(mask, i) {
            welfare.clone() - &a.value
        } else {
            welfare.clone()
        };
        let mut p = without_i - others_now;
        if options.negate_payments {
            p = -p;
        }
        collected += &p;
        payments.insert(a.robot, p);
    }
    AuctionOutcome { configuration: ctx.configuration(mask), welfare, payments, collected }
}

/// Recomputes the auction from one robot's perspective and returns its own
/// assignment and payment. Every participant observes the same
/// announcements, so this always agrees with the central outcome; the
/// function exists so tests can state that.
pub fn local_decision(
    ring: &Roundabout,
    anns: &[Announcement],
    me: RobotId,
) -> Option<(MoveChoice, Money)> {
    anns.iter().find(|a| a.robot == me)?;
    let outcome = sparcas_auction(ring, anns);
    let choice = outcome.configuration.choice(me);
    let payment = outcome.payments.get(&me).cloned().unwrap_or_else(Money::zero);
    Some((choice, payment))
}

pub fn naive_step(ring: &Roundabout, anns: &[Announcement]) -> AuctionOutcome {
    naive_step_with(ring, anns, &BTreeSet::new())
}

/// First-come queueing with bid contests, no capacity rule. A robot stops
/// whenever its next cell is occupied. Robots contesting the same free cell
/// are decided by bid, ties by larger id; the winner pays the best losing
/// bid. Payments here are sunk: the naive mechanism redistributes nothing.
pub fn naive_step_with(
    ring: &Roundabout,
    anns: &[Announcement],
    obstacles: &BTreeSet<CellId>,
) -> AuctionOutcome {
    let ctx = AuctionContext::new(ring, anns, obstacles);
    let occupied: BTreeSet<CellId> = ctx
        .anns
        .iter()
        .map(|a| a.current)
        .chain(obstacles.iter().copied())
        .collect();
    let mut moves = BTreeMap::new();
    let mut payments = BTreeMap::new();
    let mut welfare = Money::zero();
    let mut collected = Money::zero();
    for a in &ctx.anns {
        let mut choice = MoveChoice::Stay;
        let mut payment = Money::zero();
        if a.next != a.current && !occupied.contains(&a.next) {
            let mut wins = true;
            let mut best_losing = Money::zero();
            for b in &ctx.anns {
                if b.robot == a.robot || b.next != a.next {
                    continue;
                }
                if (&b.value, b.robot) > (&a.value, a.robot) {
                    wins = false;
                    break;
                }
                if b.value > best_losing {
                    best_losing = b.value.clone();
                }
            }
            if wins {
                choice = MoveChoice::Advance;
                payment = best_losing;
                welfare += &a.value;
            }
        }
        collected += &payment;
        moves.insert(a.robot, choice);
        payments.insert(a.robot, payment);
    }
    AuctionOutcome { configuration: Configuration { moves }, welfare, payments, collected }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Party {
    Robot(RobotId),
    /// Sink for money that cannot be redistributed (no eligible robot).
    Authority,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub to: Party,
    pub amount: Money,
}

/// Splits a collected pool equally over the recipients, exactly. With no
/// recipient the whole pool goes to the authority so that the books still
/// balance. The returned transfers always sum to `total`.
pub fn redistribute(total: &Money, recipients: &[RobotId]) -> Vec<Transfer> {
    if total.is_zero() {
        return Vec::new();
    }
    assert!(!total.is_negative(), "cannot redistribute a deficit");
    if recipients.is_empty() {
        return alloc::vec![Transfer { to: Party::Authority, amount: total.clone() }];
    }
    let share = total.div_count(recipients.len());
    recipients
        .iter()
        .map(|&r| Transfer { to: Party::Robot(r), amount: share.clone() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ring4() -> Roundabout {
        // Slots 0..4, entry lanes 10..14 feeding slots 0..4, exit lanes
        // 20..24 leaving slots 0..4.
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
    fn single_robot_advances_free() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 4)];
        let out = sparcas_auction(&r, &anns);
        assert_eq!(out.configuration.choice(RobotId(1)), MoveChoice::Advance);
        assert!(out.payments[&RobotId(1)].is_zero());
        assert_eq!(out.welfare, Money::from_int(4));
    }

    #[test]
    fn contested_slot_winner_pays_losing_bid() {
        let r = ring4();
        // Both entrants target slot 0; only one fits.
        let anns = [ann(1, 10, 0, 5), ann(2, 11, 0, 3)];
        let out = sparcas_auction(&r, &anns);
        assert_eq!(out.configuration.choice(RobotId(1)), MoveChoice::Advance);
        assert_eq!(out.configuration.choice(RobotId(2)), MoveChoice::Stay);
        assert_eq!(out.payments[&RobotId(1)], Money::from_int(3));
        assert!(out.payments[&RobotId(2)].is_zero());
        assert_eq!(out.collected, Money::from_int(3));
    }

    #[test]
    fn all_zero_values_keep_everyone_in_place() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 0), ann(2, 11, 0, 0)];
        let out = sparcas_auction(&r, &anns);
        assert!(out.configuration.is_all_stay());
        assert!(out.collected.is_zero());
    }

    #[test]
    fn exact_tie_resolves_lexicographically() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 5), ann(2, 11, 0, 5)];
        let out = sparcas_auction(&r, &anns);
        // (Stay, Advance) precedes (Advance, Stay), so robot 2 advances and
        // pays the full displaced bid.
        assert_eq!(out.configuration.choice(RobotId(1)), MoveChoice::Stay);
        assert_eq!(out.configuration.choice(RobotId(2)), MoveChoice::Advance);
        assert_eq!(out.payments[&RobotId(2)], Money::from_int(5));
        let flipped = sparcas_auction_with(
            &r,
            &anns,
            &BTreeSet::new(),
            &MechanismOptions { tie_break: TieBreak::LexLargest, ..Default::default() },
        );
        assert_eq!(flipped.configuration.choice(RobotId(1)), MoveChoice::Advance);
    }

    #[test]
    fn full_convoy_rotates_for_free() {
        let r = ring4();
        let anns = [ann(1, 0, 1, 2), ann(2, 1, 2, 3), ann(3, 2, 3, 1)];
        let out = sparcas_auction(&r, &anns);
        assert!(out.configuration.moves.values().all(|&c| c == MoveChoice::Advance));
        assert!(out.collected.is_zero());
    }

    #[test]
    fn advancing_into_a_stayer_is_infeasible() {
        let r = ring4();
        // Robot 2 cannot move (next == current), robot 1 wants its slot.
        let anns = [ann(1, 0, 1, 9), ann(2, 1, 1, 0)];
        let out = sparcas_auction(&r, &anns);
        assert!(out.configuration.is_all_stay());
        // The blocked robot pays nothing; the blocking robot pays for the
        // advance its body denies robot 1. Callers that know a robot is
        // immobile pass it as an obstacle instead to spare it the charge.
        assert!(out.payments[&RobotId(1)].is_zero());
        assert_eq!(out.payments[&RobotId(2)], Money::from_int(9));
    }

    #[test]
    fn capacity_blocks_entry_even_with_free_slot() {
        let r = ring4();
        // Three robots inside the ring that cannot move; a fourth may not
        // enter the free slot because the ring would then be full.
        let anns = [
            ann(1, 0, 0, 0),
            ann(2, 1, 1, 0),
            ann(3, 2, 2, 0),
            ann(4, 13, 3, 7),
        ];
        let out = sparcas_auction(&r, &anns);
        assert_eq!(out.configuration.choice(RobotId(4)), MoveChoice::Stay);
    }

    #[test]
    fn obstacles_block_cells_and_consume_capacity() {
        let r = ring4();
        let mut obstacles = BTreeSet::new();
        obstacles.insert(CellId(1));
        obstacles.insert(CellId(2));
        obstacles.insert(CellId(3));
        // Slot 0 is free but the ring already holds three bodies.
        let anns = [ann(1, 10, 0, 7)];
        let out = sparcas_auction_with(&r, &anns, &obstacles, &MechanismOptions::default());
        assert_eq!(out.configuration.choice(RobotId(1)), MoveChoice::Stay);
        assert!(out.payments[&RobotId(1)].is_zero());
    }

    #[test]
    fn payments_never_negative_even_in_chains() {
        let r = ring4();
        // An exiting robot with a follower: removing the leader would
        // strand the follower, yet nobody pays a negative amount.
        let anns = [ann(1, 0, 20, 1), ann(2, 3, 0, 6), ann(3, 13, 3, 2)];
        let out = sparcas_auction(&r, &anns);
        for (robot, p) in &out.payments {
            assert!(!p.is_negative(), "{robot} pays {p}");
        }
        assert!(out.configuration.moves.values().all(|&c| c == MoveChoice::Advance));
    }

    #[test]
    fn local_decisions_match_central_outcome() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 5), ann(2, 11, 0, 3), ann(3, 1, 2, 4)];
        let out = sparcas_auction(&r, &anns);
        for a in &anns {
            let (choice, payment) = local_decision(&r, &anns, a.robot).unwrap();
            assert_eq!(choice, out.configuration.choice(a.robot));
            assert_eq!(&payment, &out.payments[&a.robot]);
        }
        assert!(local_decision(&r, &anns, RobotId(99)).is_none());
    }

    #[test]
    fn naive_contest_highest_bid_wins_and_pays_second() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 7), ann(2, 11, 0, 5), ann(3, 12, 0, 2)];
        let out = naive_step(&r, &anns);
        assert_eq!(out.configuration.choice(RobotId(1)), MoveChoice::Advance);
        assert_eq!(out.configuration.choice(RobotId(2)), MoveChoice::Stay);
        assert_eq!(out.configuration.choice(RobotId(3)), MoveChoice::Stay);
        assert_eq!(out.payments[&RobotId(1)], Money::from_int(5));
        assert_eq!(out.collected, Money::from_int(5));
    }

    #[test]
    fn naive_tie_goes_to_larger_id() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 4), ann(2, 11, 0, 4)];
        let out = naive_step(&r, &anns);
        assert_eq!(out.configuration.choice(RobotId(1)), MoveChoice::Stay);
        assert_eq!(out.configuration.choice(RobotId(2)), MoveChoice::Advance);
        assert_eq!(out.payments[&RobotId(2)], Money::from_int(4));
    }

    #[test]
    fn naive_stops_at_occupied_cells_no_rotation() {
        let r = ring4();
        // A full ring under the naive rule is permanently wedged.
        let anns = [
            ann(1, 0, 1, 5),
            ann(2, 1, 2, 5),
            ann(3, 2, 3, 5),
            ann(4, 3, 0, 5),
        ];
        let out = naive_step(&r, &anns);
        assert!(out.configuration.is_all_stay());
        assert!(out.collected.is_zero());
    }

    #[test]
    fn redistribution_is_exact_and_total() {
        let pool = Money::from_ratio(1, 5);
        let recipients = [RobotId(4), RobotId(7), RobotId(9)];
        let transfers = redistribute(&pool, &recipients);
        assert_eq!(transfers.len(), 3);
        for t in &transfers {
            assert_eq!(t.amount, Money::from_ratio(1, 15));
        }
        let sum: Money = transfers.iter().map(|t| &t.amount).sum();
        assert_eq!(sum, pool);

        let orphan = redistribute(&pool, &[]);
        assert_eq!(orphan.len(), 1);
        assert_eq!(orphan[0].to, Party::Authority);
        assert_eq!(orphan[0].amount, pool);

        assert!(redistribute(&Money::zero(), &recipients).is_empty());
    }

    #[test]
    fn step_value_grows_linearly_with_waiting() {
        let w = Money::from_ratio(13, 200);
        assert_eq!(step_value(0, &w), Money::from_ratio(13, 200));
        assert_eq!(step_value(3, &w), Money::from_ratio(52, 200));
    }

    #[test]
    fn valuation_is_value_iff_advancing() {
        let a = Announcement {
            robot: RobotId(3),
            current: CellId(10),
            next: CellId(0),
            value: Money::from_ratio(5, 2),
        };
        let mut moves = BTreeMap::new();
        moves.insert(RobotId(3), MoveChoice::Advance);
        let config = Configuration { moves: moves.clone() };
        assert_eq!(valuation(&config, &a), Some(Money::from_ratio(5, 2)));
        moves.insert(RobotId(3), MoveChoice::Stay);
        assert_eq!(valuation(&Configuration { moves }, &a), Some(Money::zero()));
        let empty = Configuration { moves: BTreeMap::new() };
        assert_eq!(valuation(&empty, &a), None);
    }

    #[test]
    fn exclusion_lets_the_loser_advance() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 5), ann(2, 11, 0, 3)];
        let without_winner = exclusion_configuration(&r, &anns, RobotId(1)).unwrap();
        assert_eq!(without_winner.moves.len(), 1);
        assert_eq!(without_winner.choice(RobotId(2)), MoveChoice::Advance);
        // Excluding a robot from a 1-robot instance leaves nobody to move.
        let lone = [ann(1, 10, 0, 5)];
        let none_left = exclusion_configuration(&r, &lone, RobotId(1)).unwrap();
        assert!(none_left.moves.is_empty());
        assert!(exclusion_configuration(&r, &anns, RobotId(99)).is_none());
    }

    #[test]
    fn feasible_list_contains_all_stay_and_respects_swaps() {
        let r = ring4();
        // Entry at 10 -> slot 0 and an in-ring robot at slot 0 whose exit
        // is lane 20: move-into-leaver is allowed, swaps are not possible.
        let anns = [ann(1, 10, 0, 1), ann(2, 0, 20, 1)];
        let configs = feasible_configurations(&r, &anns);
        assert!(configs.iter().any(|c| c.is_all_stay()));
        // 1 advances only together with 2 leaving.
        for c in &configs {
            if c.choice(RobotId(1)) == MoveChoice::Advance {
                assert_eq!(c.choice(RobotId(2)), MoveChoice::Advance);
            }
        }
        assert_eq!(configs.len(), 3);
    }

    #[test]
    fn negated_payments_option_flips_sign() {
        let r = ring4();
        let anns = [ann(1, 10, 0, 5), ann(2, 11, 0, 3)];
        let opts = MechanismOptions { negate_payments: true, ..Default::default() };
        let out = sparcas_auction_with(&r, &anns, &BTreeSet::new(), &opts);
        assert_eq!(out.payments[&RobotId(1)], Money::from_int(-3));
    }
}
