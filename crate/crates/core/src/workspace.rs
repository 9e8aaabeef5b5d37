//! Workspace model: a directed grid of road cells with roundabout
//! intersections, plus service cells where deliveries start and end.
//!
//! Generated workspaces follow a fixed urban pattern: two-cell-wide road
//! bands (one lane per travel direction) repeat every `block_spacing + 2`
//! cells in both axes, and every band crossing is a four-slot roundabout.
//! The blocks between bands are service areas; only block cells adjacent to
//! a lane are addressable.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Index into [`Workspace::cells`]; dense, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lane travel direction. Rows grow southward, columns grow eastward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'N' => Some(Direction::North),
            'E' => Some(Direction::East),
            'S' => Some(Direction::South),
            'W' => Some(Direction::West),
            _ => None,
        }
    }

    fn step(self, row: u16, col: u16) -> Option<(u16, u16)> {
        match self {
            Direction::North => row.checked_sub(1).map(|r| (r, col)),
            Direction::South => Some((row + 1, col)),
            Direction::East => Some((row, col + 1)),
            Direction::West => col.checked_sub(1).map(|c| (row, c)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// One-way road cell outside any roundabout.
    Lane { dir: Direction },
    /// Slot `position` on the ring of `intersection`.
    RingSlot { intersection: u32, position: u8 },
    /// Source/goal cell; robots enter and leave the road at adjacent lanes.
    Service,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: CellId,
    pub kind: CellKind,
    pub row: u16,
    pub col: u16,
}

/// A roundabout: a unidirectional ring of slots with entry and exit lanes.
///
/// `ring[i]`'s in-ring successor is `ring[(i + 1) % ring.len()]`. With m
/// slots, at most m - 1 robots may occupy the ring at once; the free slot
/// is what lets a full convoy keep rotating.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roundabout {
    pub id: u32,
    pub ring: Vec<CellId>,
    /// Approach lane cell -> ring position it feeds into.
    pub entries: BTreeMap<CellId, u8>,
    /// Ring position -> departure lane cell.
    pub exits: BTreeMap<u8, CellId>,
}

impl Roundabout {
    pub fn ring_len(&self) -> usize {
        self.ring.len()
    }

    /// Maximum number of robot bodies allowed inside the ring.
    pub fn capacity(&self) -> usize {
        self.ring.len() - 1
    }

    pub fn ring_position(&self, cell: CellId) -> Option<u8> {
        self.ring.iter().position(|&c| c == cell).map(|p| p as u8)
    }

    pub fn contains(&self, cell: CellId) -> bool {
        self.ring.contains(&cell)
    }

    pub fn ring_successor(&self, position: u8) -> CellId {
        self.ring[(position as usize + 1) % self.ring.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkspaceError {
    /// Requested dimensions cannot fit one roundabout.
    TooSmall { width: u16, height: u16 },
    /// Block spacing must be at least 1 so lanes separate roundabouts.
    BadSpacing { spacing: u16 },
    UnknownCell(CellId),
    NotService(CellId),
    NotRoad(CellId),
    /// Structural invariant violation, for hand-assembled workspaces.
    Invalid(String),
}

impl fmt::Display for WorkspaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkspaceError::TooSmall { width, height } => {
                write!(f, "workspace {width}x{height} too small to fit one roundabout")
            }
            WorkspaceError::BadSpacing { spacing } => {
                write!(f, "block spacing {spacing} must be >= 1")
            }
            WorkspaceError::UnknownCell(c) => write!(f, "unknown cell id {c}"),
            WorkspaceError::NotService(c) => write!(f, "cell {c} is not a service cell"),
            WorkspaceError::NotRoad(c) => write!(f, "cell {c} is not a road cell"),
            WorkspaceError::Invalid(msg) => write!(f, "invalid workspace: {msg}"),
        }
    }
}

impl core::error::Error for WorkspaceError {}

/// Parse failure for the workspace text format; names the offending line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: field `{}`: {}", self.line, self.field, self.message)
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    width: u16,
    height: u16,
    cells: Vec<Cell>,
    roundabouts: Vec<Roundabout>,
    /// Road successor lists, indexed by cell id. Empty for service cells.
    successors: Vec<Vec<CellId>>,
    /// Adjacent lane cells of each service cell, indexed by cell id.
    service_access: Vec<Vec<CellId>>,
    coord_index: BTreeMap<(u16, u16), CellId>,
}

impl Workspace {
    /// Generates the periodic band-and-block pattern.
    ///
    /// Valid side lengths are `k * (block_spacing + 2) + 2`; the requested
    /// dimensions are rounded down to the nearest valid size (the actual
    /// size is recorded in the result). Requested dimensions must be at
    /// least 8; a spacing large enough that no second band fits yields the
    /// minimal workspace: a single roundabout.
    pub fn generate_grid(
        width: u16,
        height: u16,
        block_spacing: u16,
    ) -> Result<Workspace, WorkspaceError> {
        if block_spacing < 1 {
            return Err(WorkspaceError::BadSpacing { spacing: block_spacing });
        }
        if width < 8 || height < 8 {
            return Err(WorkspaceError::TooSmall { width, height });
        }
        let period = block_spacing + 2;
        let actual_w = ((width - 2) / period) * period + 2;
        let actual_h = ((height - 2) / period) * period + 2;

        let band = |x: u16| x % period < 2;
        let band_index = |x: u16| x / period;
        let v_bands = band_index(actual_w - 2) + 1;

        // First pass: assign kinds by coordinate.
        let mut kind_at: BTreeMap<(u16, u16), CellKind> = BTreeMap::new();
        for r in 0..actual_h {
            for c in 0..actual_w {
                let rb = band(r);
                let cb = band(c);
                let kind = match (rb, cb) {
                    (true, true) => {
                        let k = band_index(r) * v_bands + band_index(c);
                        // Ring cycle: SW -> SE -> NE -> NW.
                        let position = match (r % period, c % period) {
                            (1, 0) => 0,
                            (1, 1) => 1,
                            (0, 1) => 2,
                            (0, 0) => 3,
                            _ => unreachable!(),
                        };
                        CellKind::RingSlot { intersection: k as u32, position }
                    }
                    (true, false) => {
                        // Horizontal band: top row westbound, bottom eastbound.
                        let dir = if r % period == 0 { Direction::West } else { Direction::East };
                        CellKind::Lane { dir }
                    }
                    (false, true) => {
                        // Vertical band: left column southbound, right northbound.
                        let dir = if c % period == 0 { Direction::South } else { Direction::North };
                        CellKind::Lane { dir }
                    }
                    (false, false) => CellKind::Service,
                };
                kind_at.insert((r, c), kind);
            }
        }

        // Service cells exist only where they touch a lane.
        let interior: Vec<(u16, u16)> = kind_at
            .iter()
            .filter(|(&(r, c), &kind)| {
                if !matches!(kind, CellKind::Service) {
                    return false;
                }
                let neighbors = [
                    r.checked_sub(1).map(|rr| (rr, c)),
                    Some((r + 1, c)),
                    c.checked_sub(1).map(|cc| (r, cc)),
                    Some((r, c + 1)),
                ];
                !neighbors
                    .into_iter()
                    .flatten()
                    .any(|rc| matches!(kind_at.get(&rc), Some(CellKind::Lane { .. })))
            })
            .map(|(&rc, _)| rc)
            .collect();
        for rc in interior {
            kind_at.remove(&rc);
        }

        // Second pass: dense ids in row-major order.
        let mut cells = Vec::with_capacity(kind_at.len());
        let mut coord_index = BTreeMap::new();
        for (&(r, c), &kind) in &kind_at {
            let id = CellId(cells.len() as u32);
            cells.push(Cell { id, kind, row: r, col: c });
            coord_index.insert((r, c), id);
        }
        let at = |r: u16, c: u16| coord_index.get(&(r, c)).copied();

        // Third pass: successors, service access, roundabouts.
        let h_bands = band_index(actual_h - 2) + 1;
        let mut roundabouts: Vec<Roundabout> = (0..h_bands * v_bands)
            .map(|k| Roundabout {
                id: k as u32,
                ring: vec![CellId(0); 4],
                entries: BTreeMap::new(),
                exits: BTreeMap::new(),
            })
            .collect();
        let mut successors = vec![Vec::new(); cells.len()];
        let mut service_access = vec![Vec::new(); cells.len()];

        for cell in &cells {
            let (r, c) = (cell.row, cell.col);
            match cell.kind {
                CellKind::Lane { dir } => {
                    let (nr, nc) = dir
                        .step(r, c)
                        .expect("lane points off-grid");
                    let next = at(nr, nc).expect("lane successor missing");
                    successors[cell.id.index()].push(next);
                }
                CellKind::RingSlot { intersection, position } => {
                    roundabouts[intersection as usize].ring[position as usize] = cell.id;
                }
                CellKind::Service => {
                    let neighbors = [
                        r.checked_sub(1).map(|rr| (rr, c)),
                        Some((r + 1, c)),
                        c.checked_sub(1).map(|cc| (r, cc)),
                        Some((r, c + 1)),
                    ];
                    for (nr, nc) in neighbors.into_iter().flatten() {
                        if let Some(id) = at(nr, nc) {
                            if matches!(cells[id.index()].kind, CellKind::Lane { .. }) {
                                service_access[cell.id.index()].push(id);
                            }
                        }
                    }
                }
            }
        }

        // Ring edges and exits. Exit of position p serves the arm the ring
        // cell borders; it exists only where the arm exists.
        for rb in &mut roundabouts {
            let len = rb.ring.len();
            for p in 0..len {
                let cell = &cells[rb.ring[p].index()];
                let succ = rb.ring[(p + 1) % len];
                successors[cell.id.index()].push(succ);
                let exit_coord = match p {
                    0 => Some((cell.row + 1, cell.col)),              // south
                    1 => Some((cell.row, cell.col + 1)),              // east
                    2 => cell.row.checked_sub(1).map(|r| (r, cell.col)), // north
                    3 => cell.col.checked_sub(1).map(|c| (cell.row, c)), // west
                    _ => unreachable!(),
                };
                if let Some((er, ec)) = exit_coord {
                    if let Some(id) = at(er, ec) {
                        if matches!(cells[id.index()].kind, CellKind::Lane { .. }) {
                            successors[cell.id.index()].push(id);
                            rb.exits.insert(p as u8, id);
                        }
                    }
                }
            }
        }

        // Entries: every lane whose successor is a ring slot.
        for cell in &cells {
            if let CellKind::Lane { .. } = cell.kind {
                let next = successors[cell.id.index()][0];
                if let CellKind::RingSlot { intersection, position } = cells[next.index()].kind {
                    roundabouts[intersection as usize].entries.insert(cell.id, position);
                }
            }
        }

        let w = Workspace::from_parts(
            actual_w,
            actual_h,
            cells,
            roundabouts,
            successors,
            service_access,
        )?;
        w.check_strong_connectivity()?;
        Ok(w)
    }

    /// Assembles a workspace from explicit parts, validating every
    /// structural invariant. Hand-built workspaces (tests, parsed files) go
    /// through here; strong connectivity is checked only for generated ones.
    pub fn from_parts(
        width: u16,
        height: u16,
        cells: Vec<Cell>,
        roundabouts: Vec<Roundabout>,
        successors: Vec<Vec<CellId>>,
        service_access: Vec<Vec<CellId>>,
    ) -> Result<Workspace, WorkspaceError> {
        let bad = |msg: String| Err(WorkspaceError::Invalid(msg));
        if successors.len() != cells.len() || service_access.len() != cells.len() {
            return bad("successor/access tables must cover every cell".to_string());
        }
        let mut coord_index = BTreeMap::new();
        for (i, cell) in cells.iter().enumerate() {
            if cell.id.index() != i {
                return bad(format!("cell ids must be dense and ordered, got {} at {}", cell.id, i));
            }
            if cell.row >= height || cell.col >= width {
                return bad(format!("cell {} at ({}, {}) outside {}x{}", cell.id, cell.row, cell.col, width, height));
            }
            if coord_index.insert((cell.row, cell.col), cell.id).is_some() {
                return bad(format!("duplicate cell at ({}, {})", cell.row, cell.col));
            }
        }
        let get = |id: CellId| -> Result<&Cell, WorkspaceError> {
            cells.get(id.index()).ok_or(WorkspaceError::UnknownCell(id))
        };

        let mut in_degree = vec![0usize; cells.len()];
        for cell in &cells {
            let succ = &successors[cell.id.index()];
            for &s in succ {
                let target = get(s)?;
                if matches!(target.kind, CellKind::Service) {
                    return bad(format!("road edge {} -> {} enters a service cell", cell.id, s));
                }
                in_degree[s.index()] += 1;
            }
            match cell.kind {
                CellKind::Lane { .. } => {
                    if succ.len() != 1 {
                        return bad(format!("lane cell {} must have exactly 1 successor", cell.id));
                    }
                    if !service_access[cell.id.index()].is_empty() {
                        return bad(format!("road cell {} has service access", cell.id));
                    }
                }
                CellKind::RingSlot { .. } => {
                    if succ.is_empty() || succ.len() > 2 {
                        return bad(format!("ring cell {} must have 1..=2 successors", cell.id));
                    }
                }
                CellKind::Service => {
                    if !succ.is_empty() {
                        return bad(format!("service cell {} cannot have road successors", cell.id));
                    }
                    let access = &service_access[cell.id.index()];
                    if access.is_empty() {
                        return bad(format!("service cell {} has no access lane", cell.id));
                    }
                    for &a in access {
                        let lane = get(a)?;
                        if !matches!(lane.kind, CellKind::Lane { .. }) {
                            return bad(format!("service cell {} access {} is not a lane", cell.id, a));
                        }
                        let dr = (lane.row as i32 - cell.row as i32).abs();
                        let dc = (lane.col as i32 - cell.col as i32).abs();
                        if dr + dc != 1 {
                            return bad(format!("service cell {} access {} is not adjacent", cell.id, a));
                        }
                    }
                }
            }
        }

        // Unique predecessor per lane cell: rules out same-target contention
        // outside auctions (two robots can never race for one lane cell).
        for cell in &cells {
            if matches!(cell.kind, CellKind::Lane { .. }) && in_degree[cell.id.index()] > 1 {
                return bad(format!("lane cell {} has {} road predecessors", cell.id, in_degree[cell.id.index()]));
            }
        }

        let mut ring_membership: BTreeMap<CellId, (u32, u8)> = BTreeMap::new();
        for (k, rb) in roundabouts.iter().enumerate() {
            if rb.id as usize != k {
                return bad(format!("roundabout ids must be dense, got {} at {}", rb.id, k));
            }
            if rb.ring.len() < 3 {
                return bad(format!("roundabout {} capacity {} below 3", k, rb.ring.len()));
            }
            for (p, &rc) in rb.ring.iter().enumerate() {
                let cell = get(rc)?;
                match cell.kind {
                    CellKind::RingSlot { intersection, position }
                        if intersection as usize == k && position as usize == p => {}
                    _ => return bad(format!("cell {} is not ring slot {}/{}", rc, k, p)),
                }
                if ring_membership.insert(rc, (k as u32, p as u8)).is_some() {
                    return bad(format!("ring cell {} in two roundabouts", rc));
                }
                let succ = &successors[rc.index()];
                let expected = rb.ring[(p + 1) % rb.ring.len()];
                if succ.first() != Some(&expected) {
                    return bad(format!("ring cell {} must first continue the ring to {}", rc, expected));
                }
                match (succ.get(1), rb.exits.get(&(p as u8))) {
                    (None, None) => {}
                    (Some(&s), Some(&e)) if s == e => {
                        if !matches!(get(e)?.kind, CellKind::Lane { .. }) {
                            return bad(format!("exit {} of roundabout {} is not a lane", e, k));
                        }
                    }
                    _ => return bad(format!("ring cell {} successors disagree with exit table", rc)),
                }
            }
            for (&lane, &pos) in &rb.entries {
                let cell = get(lane)?;
                if !matches!(cell.kind, CellKind::Lane { .. }) {
                    return bad(format!("entry {} of roundabout {} is not a lane", lane, k));
                }
                if pos as usize >= rb.ring.len() {
                    return bad(format!("entry {} of roundabout {} has bad position {}", lane, k, pos));
                }
                if successors[lane.index()].first() != Some(&rb.ring[pos as usize]) {
                    return bad(format!("entry {} does not feed ring slot {}/{}", lane, k, pos));
                }
            }
        }

        // Entries table must be complete: any lane feeding a ring slot is an
        // entry (auction membership relies on it). Ring slots must all belong
        // to a roundabout.
        for cell in &cells {
            match cell.kind {
                CellKind::Lane { .. } => {
                    let next = successors[cell.id.index()][0];
                    if let Some(&(k, p)) = ring_membership.get(&next) {
                        if roundabouts[k as usize].entries.get(&cell.id) != Some(&p) {
                            return bad(format!("lane {} feeds ring slot {} but is not an entry", cell.id, next));
                        }
                    }
                }
                CellKind::RingSlot { .. } => {
                    if !ring_membership.contains_key(&cell.id) {
                        return bad(format!("ring cell {} belongs to no roundabout", cell.id));
                    }
                }
                CellKind::Service => {}
            }
        }

        Ok(Workspace {
            width,
            height,
            cells,
            roundabouts,
            successors,
            service_access,
            coord_index,
        })
    }

    fn check_strong_connectivity(&self) -> Result<(), WorkspaceError> {
        let road: Vec<CellId> = self
            .cells
            .iter()
            .filter(|c| !matches!(c.kind, CellKind::Service))
            .map(|c| c.id)
            .collect();
        let Some(&start) = road.first() else { return Ok(()) };

        let forward = |id: CellId| self.successors[id.index()].clone();
        let mut preds: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
        for &id in &road {
            for &s in &self.successors[id.index()] {
                preds.entry(s).or_default().push(id);
            }
        }
        let backward = |id: CellId| preds.get(&id).cloned().unwrap_or_default();

        for (name, step) in [
            ("reach", &forward as &dyn Fn(CellId) -> Vec<CellId>),
            ("co-reach", &backward as &dyn Fn(CellId) -> Vec<CellId>),
        ] {
            let mut seen = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(c) = queue.pop_front() {
                for n in step(c) {
                    if seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
            if seen.len() != road.len() {
                return Err(WorkspaceError::Invalid(format!(
                    "road graph not strongly connected ({name}: {}/{})",
                    seen.len(),
                    road.len()
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> Result<&Cell, WorkspaceError> {
        self.cells.get(id.index()).ok_or(WorkspaceError::UnknownCell(id))
    }

    pub fn cell_at(&self, row: u16, col: u16) -> Option<CellId> {
        self.coord_index.get(&(row, col)).copied()
    }

    pub fn roundabouts(&self) -> &[Roundabout] {
        &self.roundabouts
    }

    pub fn roundabout(&self, k: usize) -> Option<&Roundabout> {
        self.roundabouts.get(k)
    }

    /// Road successors of a cell. Service cells have none.
    pub fn successors(&self, id: CellId) -> Result<&[CellId], WorkspaceError> {
        self.cell(id)?;
        Ok(&self.successors[id.index()])
    }

    /// Roundabout membership of a road cell.
    pub fn ring_of(&self, id: CellId) -> Option<(usize, u8)> {
        match self.cells.get(id.index())?.kind {
            CellKind::RingSlot { intersection, position } => {
                Some((intersection as usize, position))
            }
            _ => None,
        }
    }

    pub fn is_road(&self, id: CellId) -> bool {
        self.cells
            .get(id.index())
            .map(|c| !matches!(c.kind, CellKind::Service))
            .unwrap_or(false)
    }

    pub fn service_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| matches!(c.kind, CellKind::Service))
    }

    /// Lane cell where a robot serving `id` enters or leaves the road: the
    /// smallest-id adjacent lane. Road cells map to themselves.
    pub fn road_entry(&self, id: CellId) -> Result<CellId, WorkspaceError> {
        let cell = self.cell(id)?;
        match cell.kind {
            CellKind::Service => self.service_access[id.index()]
                .iter()
                .min()
                .copied()
                .ok_or(WorkspaceError::NotService(id)),
            _ => Ok(id),
        }
    }

    pub fn service_access(&self, id: CellId) -> Result<&[CellId], WorkspaceError> {
        match self.cell(id)?.kind {
            CellKind::Service => Ok(&self.service_access[id.index()]),
            _ => Err(WorkspaceError::NotService(id)),
        }
    }

    /// Renders the stable line-oriented text format (see docs/FORMATS.md).
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("# sparcas-workspace v1\n");
        out.push_str(&format!("width {}\n", self.width));
        out.push_str(&format!("height {}\n", self.height));
        let m = self.roundabouts.first().map(|r| r.ring.len()).unwrap_or(4);
        out.push_str(&format!("ring {m}\n"));
        out.push_str(&format!("cells {}\n", self.cells.len()));
        out.push_str(&format!("roundabouts {}\n", self.roundabouts.len()));
        for cell in &self.cells {
            let succ = |id: CellId| {
                let list = &self.successors[id.index()];
                if list.is_empty() {
                    "-".to_string()
                } else {
                    list.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
                }
            };
            match cell.kind {
                CellKind::Lane { dir } => {
                    out.push_str(&format!(
                        "cell {} lane {} {} {} -> {}\n",
                        cell.id,
                        dir.letter(),
                        cell.row,
                        cell.col,
                        succ(cell.id)
                    ));
                }
                CellKind::RingSlot { intersection, position } => {
                    out.push_str(&format!(
                        "cell {} ring {}:{} {} {} -> {}\n",
                        cell.id,
                        intersection,
                        position,
                        cell.row,
                        cell.col,
                        succ(cell.id)
                    ));
                }
                CellKind::Service => {
                    let access = self.service_access[cell.id.index()]
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(",");
                    out.push_str(&format!(
                        "cell {} service {} {} @ {}\n",
                        cell.id, cell.row, cell.col, access
                    ));
                }
            }
        }
        for rb in &self.roundabouts {
            let ring = rb.ring.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
            let entries = if rb.entries.is_empty() {
                "-".to_string()
            } else {
                rb.entries
                    .iter()
                    .map(|(lane, pos)| format!("{lane}:{pos}"))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let exits = if rb.exits.is_empty() {
                "-".to_string()
            } else {
                rb.exits
                    .iter()
                    .map(|(pos, lane)| format!("{pos}:{lane}"))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            out.push_str(&format!(
                "roundabout {} ring {} entries {} exits {}\n",
                rb.id, ring, entries, exits
            ));
        }
        out
    }

    /// Parses the text format produced by [`Workspace::serialize`].
    pub fn parse(text: &str) -> Result<Workspace, ParseError> {
        let err = |line: usize, field: &'static str, message: String| ParseError {
            line,
            field,
            message,
        };
        let mut width = None;
        let mut height = None;
        let mut cells: Vec<Cell> = Vec::new();
        let mut successors: Vec<Vec<CellId>> = Vec::new();
        let mut service_access: Vec<Vec<CellId>> = Vec::new();
        let mut roundabouts: Vec<Roundabout> = Vec::new();
        let mut declared_cells = None;
        let mut declared_roundabouts = None;

        let parse_u16 = |line: usize, field: &'static str, s: &str| {
            s.parse::<u16>().map_err(|e| err(line, field, format!("`{s}`: {e}")))
        };
        let parse_id = |line: usize, field: &'static str, s: &str| {
            s.parse::<u32>().map(CellId).map_err(|e| err(line, field, format!("`{s}`: {e}")))
        };
        let parse_id_list = |line: usize, field: &'static str, s: &str| -> Result<Vec<CellId>, ParseError> {
            if s == "-" {
                return Ok(Vec::new());
            }
            s.split(',').map(|t| parse_id(line, field, t)).collect()
        };

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let tag = tokens.next().unwrap();
            let rest: Vec<&str> = tokens.collect();
            match tag {
                "width" => {
                    let &[v] = rest.as_slice() else {
                        return Err(err(line_no, "width", "expected one value".to_string()));
                    };
                    width = Some(parse_u16(line_no, "width", v)?);
                }
                "height" => {
                    let &[v] = rest.as_slice() else {
                        return Err(err(line_no, "height", "expected one value".to_string()));
                    };
                    height = Some(parse_u16(line_no, "height", v)?);
                }
                "ring" => {
                    let &[v] = rest.as_slice() else {
                        return Err(err(line_no, "ring", "expected one value".to_string()));
                    };
                    parse_u16(line_no, "ring", v)?;
                }
                "cells" => {
                    let &[v] = rest.as_slice() else {
                        return Err(err(line_no, "cells", "expected one value".to_string()));
                    };
                    declared_cells = Some(parse_u16(line_no, "cells", v)? as usize);
                }
                "roundabouts" => {
                    let &[v] = rest.as_slice() else {
                        return Err(err(line_no, "roundabouts", "expected one value".to_string()));
                    };
                    declared_roundabouts = Some(parse_u16(line_no, "roundabouts", v)? as usize);
                }
                "cell" => {
                    let (id, kind, row, col, succ, access) = match rest[..] {
                        [id, "lane", d, row, col, "->", succ] => {
                            let dir = d
                                .chars()
                                .next()
                                .and_then(Direction::from_letter)
                                .filter(|_| d.len() == 1)
                                .ok_or_else(|| err(line_no, "lane direction", format!("`{d}`")))?;
                            (
                                parse_id(line_no, "cell id", id)?,
                                CellKind::Lane { dir },
                                row,
                                col,
                                parse_id_list(line_no, "successors", succ)?,
                                Vec::new(),
                            )
                        }
                        [id, "ring", kp, row, col, "->", succ] => {
                            let (k, p) = kp
                                .split_once(':')
                                .ok_or_else(|| err(line_no, "ring slot", format!("`{kp}` missing `:`")))?;
                            let intersection = k
                                .parse::<u32>()
                                .map_err(|e| err(line_no, "ring slot", format!("`{k}`: {e}")))?;
                            let position = p
                                .parse::<u8>()
                                .map_err(|e| err(line_no, "ring slot", format!("`{p}`: {e}")))?;
                            (
                                parse_id(line_no, "cell id", id)?,
                                CellKind::RingSlot { intersection, position },
                                row,
                                col,
                                parse_id_list(line_no, "successors", succ)?,
                                Vec::new(),
                            )
                        }
                        [id, "service", row, col, "@", access] => (
                            parse_id(line_no, "cell id", id)?,
                            CellKind::Service,
                            row,
                            col,
                            Vec::new(),
                            parse_id_list(line_no, "access lanes", access)?,
                        ),
                        _ => {
                            return Err(err(line_no, "cell", format!("unrecognized record `{line}`")));
                        }
                    };
                    cells.push(Cell {
                        id,
                        kind,
                        row: parse_u16(line_no, "row", row)?,
                        col: parse_u16(line_no, "col", col)?,
                    });
                    successors.push(succ);
                    service_access.push(access);
                }
                "roundabout" => {
                    let &[id, "ring", ring, "entries", entries, "exits", exits] = rest.as_slice() else {
                        return Err(err(line_no, "roundabout", format!("unrecognized record `{line}`")));
                    };
                    let id = id
                        .parse::<u32>()
                        .map_err(|e| err(line_no, "roundabout id", format!("`{id}`: {e}")))?;
                    let ring = parse_id_list(line_no, "ring cells", ring)?;
                    let mut entry_map = BTreeMap::new();
                    if entries != "-" {
                        for pair in entries.split(',') {
                            let (lane, pos) = pair
                                .split_once(':')
                                .ok_or_else(|| err(line_no, "entries", format!("`{pair}` missing `:`")))?;
                            entry_map.insert(
                                parse_id(line_no, "entries", lane)?,
                                pos.parse::<u8>()
                                    .map_err(|e| err(line_no, "entries", format!("`{pos}`: {e}")))?,
                            );
                        }
                    }
                    let mut exit_map = BTreeMap::new();
                    if exits != "-" {
                        for pair in exits.split(',') {
                            let (pos, lane) = pair
                                .split_once(':')
                                .ok_or_else(|| err(line_no, "exits", format!("`{pair}` missing `:`")))?;
                            exit_map.insert(
                                pos.parse::<u8>()
                                    .map_err(|e| err(line_no, "exits", format!("`{pos}`: {e}")))?,
                                parse_id(line_no, "exits", lane)?,
                            );
                        }
                    }
                    roundabouts.push(Roundabout {
                        id,
                        ring,
                        entries: entry_map,
                        exits: exit_map,
                    });
                }
                _ => {
                    return Err(err(line_no, "record", format!("unknown record tag `{tag}`")));
                }
            }
        }

        let width = width.ok_or_else(|| err(0, "width", "missing header".to_string()))?;
        let height = height.ok_or_else(|| err(0, "height", "missing header".to_string()))?;
        if let Some(n) = declared_cells {
            if n != cells.len() {
                return Err(err(0, "cells", format!("header says {n}, found {}", cells.len())));
            }
        }
        if let Some(n) = declared_roundabouts {
            if n != roundabouts.len() {
                return Err(err(0, "roundabouts", format!("header says {n}, found {}", roundabouts.len())));
            }
        }
        Workspace::from_parts(width, height, cells, roundabouts, successors, service_access)
            .map_err(|e| err(0, "structure", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_pattern_is_one_roundabout() {
        // Spacing so large no second band fits: rounds down to the 2x2 core.
        let w = Workspace::generate_grid(8, 8, 10).unwrap();
        assert_eq!((w.width(), w.height()), (2, 2));
        assert_eq!(w.roundabouts().len(), 1);
        assert_eq!(w.roundabouts()[0].ring.len(), 4);
        assert!(w.roundabouts()[0].entries.is_empty());
        // The lone ring is still a strongly connected cycle.
        let r = &w.roundabouts()[0];
        for p in 0..4u8 {
            let slot = r.ring[p as usize];
            assert_eq!(w.successors(slot).unwrap(), &[r.ring_successor(p)][..]);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        assert_eq!(
            Workspace::generate_grid(7, 16, 5),
            Err(WorkspaceError::TooSmall { width: 7, height: 16 })
        );
        assert_eq!(
            Workspace::generate_grid(16, 16, 0),
            Err(WorkspaceError::BadSpacing { spacing: 0 })
        );
    }

    #[test]
    fn sixteen_grid_shape() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        assert_eq!((w.width(), w.height()), (16, 16));
        assert_eq!(w.roundabouts().len(), 9);
        let lanes = w.cells().iter().filter(|c| matches!(c.kind, CellKind::Lane { .. })).count();
        let rings = w.cells().iter().filter(|c| matches!(c.kind, CellKind::RingSlot { .. })).count();
        let service = w.service_cells().count();
        assert_eq!(rings, 36);
        assert_eq!(lanes, 120);
        assert_eq!(service, 64);
        // Interior 3x3 of each block is not addressable.
        assert_eq!(w.cells().len(), 220);
        assert!(w.cell_at(4, 4).is_none());
    }

    #[test]
    fn rounding_records_actual_size() {
        let w = Workspace::generate_grid(20, 20, 5).unwrap();
        assert_eq!((w.width(), w.height()), (16, 16));
    }

    #[test]
    fn lane_cells_have_one_successor_and_one_predecessor() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let mut in_deg: BTreeMap<CellId, usize> = BTreeMap::new();
        for c in w.cells() {
            for &s in w.successors(c.id).unwrap() {
                *in_deg.entry(s).or_default() += 1;
            }
        }
        for c in w.cells() {
            match c.kind {
                CellKind::Lane { .. } => {
                    assert_eq!(w.successors(c.id).unwrap().len(), 1);
                    assert_eq!(in_deg[&c.id], 1, "lane {} in-degree", c.id);
                }
                CellKind::RingSlot { .. } => {
                    let n = w.successors(c.id).unwrap().len();
                    assert!((1..=2).contains(&n));
                }
                CellKind::Service => assert!(w.successors(c.id).unwrap().is_empty()),
            }
        }
    }

    #[test]
    fn interior_roundabout_has_four_arms() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        // Center roundabout of the 3x3 lattice.
        let rb = &w.roundabouts()[4];
        assert_eq!(rb.entries.len(), 4);
        assert_eq!(rb.exits.len(), 4);
        // Corner roundabout has two arms.
        let corner = &w.roundabouts()[0];
        assert_eq!(corner.entries.len(), 2);
        assert_eq!(corner.exits.len(), 2);
    }

    #[test]
    fn service_round_trip_mapping() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        for cell in w.service_cells() {
            let lane = w.road_entry(cell.id).unwrap();
            assert!(matches!(w.cell(lane).unwrap().kind, CellKind::Lane { .. }));
        }
        let road = w.cells().iter().find(|c| !matches!(c.kind, CellKind::Service)).unwrap();
        assert_eq!(w.road_entry(road.id).unwrap(), road.id);
        assert!(w.service_access(road.id).is_err());
    }

    #[test]
    fn serialize_parse_round_trip() {
        let w = Workspace::generate_grid(16, 16, 5).unwrap();
        let text = w.serialize();
        let back = Workspace::parse(&text).unwrap();
        assert_eq!(w, back);
        assert_eq!(back.serialize(), text);
    }

    #[test]
    fn parse_errors_name_line_and_field() {
        let w = Workspace::generate_grid(8, 8, 10).unwrap();
        let text = w.serialize();
        let broken = text.replace("cell 0 ring 0:3 0 0", "cell 0 ring 0Z3 0 0");
        let e = Workspace::parse(&broken).unwrap_err();
        assert_eq!(e.field, "ring slot");
        assert!(e.line > 0);
        let truncated = text.replace("width 2", "width");
        let e = Workspace::parse(&truncated).unwrap_err();
        assert_eq!(e.field, "width");
    }

    #[test]
    fn unknown_cell_is_an_error() {
        let w = Workspace::generate_grid(8, 8, 10).unwrap();
        assert!(matches!(
            w.successors(CellId(9999)),
            Err(WorkspaceError::UnknownCell(_))
        ));
    }
}
