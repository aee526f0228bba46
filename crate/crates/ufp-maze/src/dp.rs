//! Dynamic program for the maximum-weight weakly feasible k-thin maze pair.
//!
//! The search walks the area under the capacity curve instead of the path
//! itself. A cell `(e, m_down, C_down, m_up, C_up, B)` stands for the
//! region on edge `e` between the levels of two m-tasks `m_down < m_up`
//! (both using `e`), remembering only the critical tasks of the two
//! delimiters and the at-most-k boundary tasks `B` sandwiched between
//! their levels on `e`. A *consistency property* keeps cells honest:
//! `(B u C_down u C_up, {m_down, m_up})` must be weakly feasible and the
//! remembered sets must be exactly the critical/boundary sets of their
//! own union.
//!
//! Cells are evaluated by memoized recursion from the root cell
//! `(e*, bottom, {}, top, {}, {})`, where `e*` is a zero-capacity
//! sentinel edge appended on the left and bottom/top are dummy m-tasks
//! below and above every level. The bottom dummy's bottleneck edge is
//! anchored one past the right end of the path (a mirror-image sentinel
//! used by no task), so walks below the lowest m-task close out cleanly
//! even when an m-task extends to the right end of the graph — after
//! preprocessing one always does. Three branchings move one edge toward
//! the bottleneck edge of `m_down` (or split the region):
//!
//! - *single*: `m_up` continues over the next edge; the cell slides over,
//!   re-guessing the boundary set there;
//! - *top-bottom*: an m-task `m_mid` starts exactly at the next edge with
//!   a level between the delimiters; the region splits into the part
//!   below and the part above `m_mid`;
//! - *left-right*: `e` is the last edge of `m_up`; an m-task `m_abv`
//!   above `m_up` spanning both edges takes over, splitting the region
//!   at the current edge.
//!
//! Each branching carries a compatibility filter tying the guessed sets
//! of the child cells to the parent's, and every child is strictly
//! smaller in the lexicographic measure
//! `(|e_up - e_down|, |e - e_down|)`, asserted at branch time. Candidate
//! sets are generated as subsets of the relevant band/critical pools and
//! filtered by the full compatibility equalities; the pools only skip
//! candidates that provably fail them.

use crate::maze::{gen_mtasks, MazePair, MTask, MTaskKind, MTaskSet};
use crate::model::{is_delta_large, is_preprocessed, Instance, TaskId};
use crate::rational::{rat_to_string, Rat};
use crate::scaled::{ScaleError, ScaledCtx, BOTTOM_RANK};
use num_traits::Zero;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("instance is not preprocessed (every vertex must host exactly one task endpoint)")]
    NotPreprocessed,
    #[error("task {0} is not delta-large for delta = {1}")]
    NotDeltaLarge(TaskId, String),
    #[error("guard exceeded: {0}")]
    GuardExceeded(String),
    #[error(transparent)]
    Numeric(#[from] ScaleError),
}

/// Tractability guards for exact runs. The cell space grows roughly as
/// `n^(O(k + ncrit))`, so desk-scale defaults are deliberately small;
/// relax them explicitly for longer runs.
#[derive(Debug, Clone)]
pub struct DpGuards {
    pub max_tasks: usize,
    pub max_k: u32,
    pub max_ncrit: u64,
}

impl Default for DpGuards {
    fn default() -> Self {
        DpGuards { max_tasks: 10, max_k: 4, max_ncrit: 6 }
    }
}

impl DpGuards {
    pub fn relaxed(max_tasks: usize, max_k: u32, max_ncrit: u64) -> Self {
        DpGuards { max_tasks, max_k, max_ncrit }
    }
}

/// Instance with the sentinel edge `e*` (index 0, capacity zero, used by
/// no task) and the two dummy m-tasks spanning every edge including `e*`.
#[derive(Debug, Clone)]
pub struct AugmentedInstance {
    /// Index 0 is `e*`; indices `1..=m` are the original edges.
    pub capacities: Vec<Rat>,
    pub bottom: MTask,
    pub top: MTask,
}

pub fn augment(inst: &Instance) -> AugmentedInstance {
    let m = inst.num_edges();
    let mut capacities = Vec::with_capacity(m + 1);
    capacities.push(Rat::zero());
    capacities.extend(inst.capacities.iter().cloned());
    // Vertex 0 is the new left endpoint; both dummies span edges
    // 0..=m+1, i.e. everything including the two sentinels.
    let bottom = MTask {
        id: usize::MAX - 1,
        s: 0,
        t: m + 2,
        kind: MTaskKind::Bottom,
        bottleneck: None,
        demand: Rat::zero(),
    };
    let top = MTask { id: usize::MAX, kind: MTaskKind::Top, ..bottom.clone() };
    AugmentedInstance { capacities, bottom, top }
}

/// Reference to an m-task within a cell: a dummy or a regular m-task by
/// its id in the generating [`MTaskSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MRef {
    Bottom,
    Regular(usize),
    Top,
}

/// Public, id-based view of a DP cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DpCell {
    /// Edge index; 0 is the sentinel `e*`.
    pub e: usize,
    pub m_down: MRef,
    pub c_down: Vec<TaskId>,
    pub m_up: MRef,
    pub c_up: Vec<TaskId>,
    pub b: Vec<TaskId>,
}

/// The root cell `(e*, bottom, {}, top, {}, {})`.
pub fn root_cell() -> DpCell {
    DpCell { e: 0, m_down: MRef::Bottom, c_down: vec![], m_up: MRef::Top, c_up: vec![], b: vec![] }
}

#[derive(Debug, Clone)]
pub struct DpOutcome {
    pub pair: MazePair,
    pub weight: Rat,
    pub cells_evaluated: usize,
}

// ---------------------------------------------------------------------
// Internal representation
// ---------------------------------------------------------------------

/// Internal m-task handle: 0 = bottom, 1..=R = regular index + 1,
/// R+1 = top.
type DpM = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CellKey {
    e: u32,
    lo: DpM,
    hi: DpM,
    cl: u64,
    ch: u64,
    b: u64,
}

#[derive(Debug, Clone, Copy)]
struct CellSol {
    /// `None` encodes minus infinity (cell unreachable in any feasible
    /// completion).
    value: Option<i128>,
    tasks: u64,
    mts: u128,
}

const DEAD: CellSol = CellSol { value: None, tasks: 0, mts: 0 };

struct Solver {
    sc: ScaledCtx,
    k: u32,
    ncrit: u64,
    /// Bottleneck edge of the bottom dummy: the sink sentinel one past
    /// the rightmost real edge.
    sink: usize,
    memo: HashMap<CellKey, CellSol>,
}

/// Ascending enumeration of the submasks of `pool` (including 0 and pool).
struct Submasks {
    pool: u64,
    next: Option<u64>,
}

fn submasks(pool: u64) -> Submasks {
    Submasks { pool, next: Some(0) }
}

impl Iterator for Submasks {
    type Item = u64;
    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        let after = (cur.wrapping_sub(self.pool)) & self.pool;
        self.next = if after == 0 { None } else { Some(after) };
        Some(cur)
    }
}

impl Solver {
    fn top_m(&self) -> DpM {
        self.sc.mt.len() as DpM + 1
    }

    fn is_dummy(&self, m: DpM) -> bool {
        m == 0 || m == self.top_m()
    }

    fn rank(&self, m: DpM) -> u32 {
        if m == 0 {
            BOTTOM_RANK
        } else if m == self.top_m() {
            self.sc.top_rank
        } else {
            self.sc.mt[m as usize - 1].rank
        }
    }

    fn uses(&self, m: DpM, e: usize) -> bool {
        if self.is_dummy(m) {
            true // dummies span every edge including the sentinel
        } else {
            self.sc.mt[m as usize - 1].uses_edge(e)
        }
    }

    fn crit_of(&self, m: DpM) -> u64 {
        if self.is_dummy(m) {
            0
        } else {
            self.sc.crit_mask[m as usize - 1]
        }
    }

    /// Bottleneck edge of a cell's lower delimiter.
    fn e_down(&self, m: DpM) -> usize {
        if m == 0 {
            self.sink
        } else {
            debug_assert!(m != self.top_m(), "top is never the lower delimiter");
            self.sc.mt[m as usize - 1].bedge
        }
    }

    /// Bottleneck edge of the upper delimiter; the top dummy takes the
    /// cell's own edge.
    fn e_up(&self, m: DpM, cell_edge: usize) -> usize {
        if m == self.top_m() {
            cell_edge
        } else {
            self.sc.mt[m as usize - 1].bedge
        }
    }

    fn mmask2(&self, a: DpM, b: DpM) -> u128 {
        let mut mask = 0u128;
        for m in [a, b] {
            if !self.is_dummy(m) {
                mask |= 1 << (m - 1);
            }
        }
        mask
    }

    fn measure(&self, c: &CellKey) -> (usize, usize) {
        let ed = self.e_down(c.lo);
        let eu = self.e_up(c.hi, c.e as usize);
        (eu.abs_diff(ed) + 1, (c.e as usize).abs_diff(ed) + 1)
    }

    /// Full cell validity: structural constraints plus the consistency
    /// property.
    fn cell_valid(&self, c: &CellKey) -> bool {
        let e = c.e as usize;
        if e > self.sink || !self.uses(c.lo, e) || !self.uses(c.hi, e) {
            return false;
        }
        if self.rank(c.lo) >= self.rank(c.hi) {
            return false;
        }
        if c.cl & !self.crit_of(c.lo) != 0 || c.ch & !self.crit_of(c.hi) != 0 {
            return false;
        }
        if u64::from(c.cl.count_ones()) > self.ncrit || u64::from(c.ch.count_ones()) > self.ncrit {
            return false;
        }
        let band = self.sc.band_mask(e, self.rank(c.lo), self.rank(c.hi));
        if c.b & !band != 0 || c.b.count_ones() > self.k {
            return false;
        }
        // Consistency: the union of the remembered sets reproduces them.
        let t = c.cl | c.ch | c.b;
        if self.sc.weak_feas_violation(t, self.mmask2(c.lo, c.hi)).is_some() {
            return false;
        }
        self.crit_of(c.lo) & t == c.cl && self.crit_of(c.hi) & t == c.ch && band & t == c.b
    }

    fn eval(&mut self, key: CellKey) -> CellSol {
        if let Some(sol) = self.memo.get(&key) {
            return *sol;
        }
        let sol = self.compute(&key);
        if let Some(v) = sol.value {
            // The recurrence adds weights of disjoint parts; the mask must
            // agree or a branching double-counted a task.
            assert_eq!(v, self.sc.weight_of(sol.tasks), "cell value must equal its task weight");
        }
        self.memo.insert(key, sol);
        sol
    }

    /// Recurses on a valid child cell, asserting the strict measure drop
    /// that makes the recursion well-founded.
    fn eval_child(&mut self, parent: &CellKey, child: CellKey) -> CellSol {
        assert!(self.measure(&child) < self.measure(parent), "child cells must shrink the measure");
        self.eval(child)
    }

    fn compute(&mut self, key: &CellKey) -> CellSol {
        let e = key.e as usize;
        let ed = self.e_down(key.lo);
        if e == ed {
            debug_assert_eq!(key.hi, self.top_m(), "base cells have the top dummy above");
            return CellSol { value: Some(0), tasks: 0, mts: 0 };
        }
        let en = if ed > e { e + 1 } else { e - 1 };
        let s0 = key.cl | key.ch | key.b;
        let band_e = self.sc.band_mask(e, self.rank(key.lo), self.rank(key.hi));
        let on_e = self.sc.tasks_on_edge[e];

        let mut best = DEAD;
        let mut consider = |cand: CellSol, best: &mut CellSol| {
            if let Some(v) = cand.value {
                if best.value.map_or(true, |b| v > b) {
                    *best = cand;
                }
            }
        };

        if self.uses(key.hi, en) {
            // --- single branching ---
            let band_en = self.sc.band_mask(en, self.rank(key.lo), self.rank(key.hi));
            let forced = s0 & band_en;
            let free = band_en & !s0 & !on_e;
            for x in submasks(free) {
                let bs = forced | x;
                if bs.count_ones() > self.k {
                    continue;
                }
                let child = CellKey { e: en as u32, b: bs, ..*key };
                if !self.cell_valid(&child) {
                    continue;
                }
                // Compatibility on T' = C_down u C_up u B u B_s.
                let t = s0 | bs;
                if self.crit_of(key.lo) & t != key.cl
                    || self.crit_of(key.hi) & t != key.ch
                    || band_e & t != key.b
                    || self.sc.band_mask(en, self.rank(key.lo), self.rank(key.hi)) & t != bs
                {
                    continue;
                }
                let sub = self.eval_child(key, child);
                let Some(v) = sub.value else { continue };
                let add = bs & !key.b;
                let cand = CellSol {
                    value: Some(v + self.sc.weight_of(add)),
                    tasks: sub.tasks | add,
                    mts: sub.mts,
                };
                consider(cand, &mut best);
            }

            // --- top-bottom branching ---
            for mid_ix in 0..self.sc.mt.len() {
                let mid = mid_ix as DpM + 1;
                let mt = &self.sc.mt[mid_ix];
                // m_mid starts exactly at the next edge (its far end faces
                // the walk direction) and sits strictly between the levels.
                let extremal = if ed > e { mt.s == en } else { mt.t - 1 == en };
                if !extremal
                    || self.rank(mid) <= self.rank(key.lo)
                    || self.rank(mid) >= self.rank(key.hi)
                {
                    continue;
                }
                let cm_all = self.crit_of(mid);
                let fc = s0 & cm_all;
                let excl = self.crit_of(key.lo) | self.crit_of(key.hi) | band_e;
                let yc_pool = cm_all & !s0 & !excl;
                for yc in submasks(yc_pool) {
                    let cmid = fc | yc;
                    if u64::from(cmid.count_ones()) > self.ncrit {
                        continue;
                    }
                    let s1 = s0 | cmid;
                    let band_b = self.sc.band_mask(en, self.rank(key.lo), self.rank(mid));
                    let band_t = self.sc.band_mask(en, self.rank(mid), self.rank(key.hi));
                    let new_excl = excl | cm_all;
                    let xb_pool = band_b & !s1 & !on_e & !new_excl;
                    let xt_pool = band_t & !s1 & !on_e & !new_excl;
                    for xb in submasks(xb_pool) {
                        let bb = (s1 & band_b) | xb;
                        if bb.count_ones() > self.k {
                            continue;
                        }
                        for xt in submasks(xt_pool) {
                            let bt = (s1 & band_t) | xt;
                            if bt.count_ones() > self.k {
                                continue;
                            }
                            let c_b = CellKey {
                                e: en as u32,
                                lo: key.lo,
                                hi: mid,
                                cl: key.cl,
                                ch: cmid,
                                b: bb,
                            };
                            let c_t = CellKey {
                                e: en as u32,
                                lo: mid,
                                hi: key.hi,
                                cl: cmid,
                                ch: key.ch,
                                b: bt,
                            };
                            if !self.cell_valid(&c_b) || !self.cell_valid(&c_t) {
                                continue;
                            }
                            let t = s0 | cmid | bb | bt;
                            if self.crit_of(key.hi) & t != key.ch
                                || self.crit_of(key.lo) & t != key.cl
                                || cm_all & t != cmid
                                || band_e & t != key.b
                                || band_b & t != bb
                                || band_t & t != bt
                            {
                                continue;
                            }
                            let sb = self.eval_child(key, c_b);
                            let Some(vb) = sb.value else { continue };
                            let st = self.eval_child(key, c_t);
                            let Some(vt) = st.value else { continue };
                            let add = (bb | bt) & !key.b;
                            let cand = CellSol {
                                value: Some(vb + vt + self.sc.weight_of(add)),
                                tasks: sb.tasks | st.tasks | add,
                                mts: sb.mts | st.mts | (1 << mid_ix),
                            };
                            consider(cand, &mut best);
                        }
                    }
                }
            }
        } else {
            // --- left-right branching ---
            // `m_up` is regular (the top dummy spans every edge) and `e`
            // is its extremal edge toward the walk direction.
            debug_assert!(!self.is_dummy(key.hi));
            let hi_mt = &self.sc.mt[key.hi as usize - 1];
            debug_assert!(if ed > e { hi_mt.t - 1 == e } else { hi_mt.s == e });

            let mut abv_cands: Vec<DpM> = (0..self.sc.mt.len())
                .map(|i| i as DpM + 1)
                .filter(|&m| {
                    self.uses(m, e) && self.uses(m, en) && self.rank(m) > self.rank(key.hi)
                })
                .collect();
            abv_cands.push(self.top_m());
            for abv in abv_cands {
                let ca_all = self.crit_of(abv);
                let fca = s0 & ca_all;
                let yca_pool =
                    ca_all & !s0 & !self.crit_of(key.lo) & !self.crit_of(key.hi) & !band_e;
                for yca in submasks(yca_pool) {
                    let cabv = fca | yca;
                    if u64::from(cabv.count_ones()) > self.ncrit {
                        continue;
                    }
                    let s1 = s0 | cabv;
                    let band_l = self.sc.band_mask(e, self.rank(key.hi), self.rank(abv));
                    let xl_pool = band_l
                        & !s1
                        & !self.crit_of(key.lo)
                        & !self.crit_of(key.hi)
                        & !ca_all;
                    for xl in submasks(xl_pool) {
                        let bl = (s1 & band_l) | xl;
                        if bl.count_ones() > self.k {
                            continue;
                        }
                        let s2 = s1 | bl;
                        let band_r = self.sc.band_mask(en, self.rank(key.lo), self.rank(abv));
                        let xr_pool = band_r
                            & !s2
                            & !on_e
                            & !self.crit_of(key.lo)
                            & !self.crit_of(key.hi)
                            & !ca_all;
                        for xr in submasks(xr_pool) {
                            let br = (s2 & band_r) | xr;
                            if br.count_ones() > self.k {
                                continue;
                            }
                            let c_l = CellKey {
                                e: key.e,
                                lo: key.hi,
                                hi: abv,
                                cl: key.ch,
                                ch: cabv,
                                b: bl,
                            };
                            let c_r = CellKey {
                                e: en as u32,
                                lo: key.lo,
                                hi: abv,
                                cl: key.cl,
                                ch: cabv,
                                b: br,
                            };
                            if !self.cell_valid(&c_l) || !self.cell_valid(&c_r) {
                                continue;
                            }
                            let t = s0 | cabv | bl | br;
                            if self.crit_of(key.hi) & t != key.ch
                                || self.crit_of(key.lo) & t != key.cl
                                || ca_all & t != cabv
                                || band_e & t != key.b
                                || band_r & t != br
                                || band_l & t != bl
                            {
                                continue;
                            }
                            let sl = self.eval_child(key, c_l);
                            let Some(vl) = sl.value else { continue };
                            let sr = self.eval_child(key, c_r);
                            let Some(vr) = sr.value else { continue };
                            let add = (bl | br) & !key.b;
                            let mut mts = sl.mts | sr.mts;
                            if abv != self.top_m() {
                                mts |= 1 << (abv - 1);
                            }
                            let cand = CellSol {
                                value: Some(vl + vr + self.sc.weight_of(add)),
                                tasks: sl.tasks | sr.tasks | add,
                                mts,
                            };
                            consider(cand, &mut best);
                        }
                    }
                }
            }
        }
        best
    }

    /// Re-validates the three feasible-for-c properties on every memoized
    /// cell solution.
    fn self_check(&self) {
        for (key, sol) in &self.memo {
            let Some(v) = sol.value else { continue };
            assert_eq!(v, self.sc.weight_of(sol.tasks));
            let mm = sol.mts | self.mmask2(key.lo, key.hi);
            assert!(
                self.sc.thinness_violation(sol.tasks | key.b, mm, self.k).is_none(),
                "cell solution must be k-thin"
            );
            assert!(
                self.sc
                    .weak_feas_violation(sol.tasks | key.b | key.cl | key.ch, mm)
                    .is_none(),
                "cell solution must be weakly feasible"
            );
            assert_eq!(
                self.crit_of(key.hi) & sol.tasks & !key.ch,
                0,
                "inclusion property: critical tasks of m_up must be remembered"
            );
        }
    }
}

// ---------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------

fn build_solver(
    inst: &Instance,
    mset: &MTaskSet,
    k: u32,
    delta: &Rat,
) -> Result<Solver, ScaleError> {
    let regs: Vec<&MTask> = mset.regulars().collect();
    let sc = ScaledCtx::new(inst, &regs, delta)?;
    let sink = inst.num_edges() + 1;
    Ok(Solver { sc, k, ncrit: crate::maze::ncrit(delta), sink, memo: HashMap::new() })
}

fn cell_to_key(solver: &Solver, mset: &MTaskSet, cell: &DpCell) -> CellKey {
    let to_dpm = |r: &MRef| -> DpM {
        match r {
            MRef::Bottom => 0,
            MRef::Top => solver.top_m(),
            MRef::Regular(id) => {
                let pos = mset
                    .regulars()
                    .position(|m| m.id == *id)
                    .expect("m-task id not in the generating set");
                pos as DpM + 1
            }
        }
    };
    CellKey {
        e: cell.e as u32,
        lo: to_dpm(&cell.m_down),
        hi: to_dpm(&cell.m_up),
        cl: solver.sc.mask_of_ids(&cell.c_down),
        ch: solver.sc.mask_of_ids(&cell.c_up),
        b: solver.sc.mask_of_ids(&cell.b),
    }
}

/// Checks the cardinality, membership, and consistency constraints of a
/// cell against the instance and its m-task set.
pub fn cell_valid(inst: &Instance, mset: &MTaskSet, cell: &DpCell, k: u32, delta: &Rat) -> bool {
    let solver = build_solver(inst, mset, k, delta).expect("instance numerics out of range");
    let key = cell_to_key(&solver, mset, cell);
    solver.cell_valid(&key)
}

/// Lexicographic cell measure `(|e_up - e_down|, |e - e_down|)`, counting
/// edges between the endpoints with boundaries included.
pub fn cell_measure(inst: &Instance, mset: &MTaskSet, cell: &DpCell) -> (usize, usize) {
    let solver =
        build_solver(inst, mset, 1, &Rat::from_integer(1.into())).expect("numerics out of range");
    let key = cell_to_key(&solver, mset, cell);
    solver.measure(&key)
}

pub fn solve(inst: &Instance, k: u32, delta: &Rat, guards: &DpGuards) -> Result<DpOutcome, DpError> {
    solve_with_options(inst, k, delta, guards, false)
}

/// As [`solve`]; with `self_check` every memoized cell solution is
/// re-validated against the k-thinness, weak-feasibility, and inclusion
/// properties.
pub fn solve_with_options(
    inst: &Instance,
    k: u32,
    delta: &Rat,
    guards: &DpGuards,
    self_check: bool,
) -> Result<DpOutcome, DpError> {
    assert!(k >= 1, "k must be at least 1");
    if inst.tasks.is_empty() {
        return Ok(DpOutcome { pair: MazePair::empty(), weight: Rat::zero(), cells_evaluated: 0 });
    }
    if !is_preprocessed(inst) {
        return Err(DpError::NotPreprocessed);
    }
    for t in &inst.tasks {
        if !is_delta_large(t, &inst.bottleneck(t), delta) {
            return Err(DpError::NotDeltaLarge(t.id, rat_to_string(delta)));
        }
    }
    if inst.tasks.len() > guards.max_tasks {
        return Err(DpError::GuardExceeded(format!(
            "{} tasks > max_tasks {}",
            inst.tasks.len(),
            guards.max_tasks
        )));
    }
    if k > guards.max_k {
        return Err(DpError::GuardExceeded(format!("k {} > max_k {}", k, guards.max_k)));
    }
    let nc = crate::maze::ncrit(delta);
    if nc > guards.max_ncrit {
        return Err(DpError::GuardExceeded(format!(
            "ncrit(delta) = {} > max_ncrit {}",
            nc, guards.max_ncrit
        )));
    }

    let mset = gen_mtasks(inst, delta);
    let mut solver = build_solver(inst, &mset, k, delta)?;
    let root = cell_to_key(&solver, &mset, &root_cell());
    assert!(solver.cell_valid(&root), "the root cell is always consistent");
    let sol = solver.eval(root);
    if self_check {
        solver.self_check();
    }
    let value = sol.value.expect("the root cell always admits the empty completion");

    let task_ids = solver.sc.ids_of_mask(sol.tasks);
    let regs: Vec<MTask> = mset.regulars().cloned().collect();
    let mtasks: Vec<MTask> = (0..regs.len())
        .filter(|i| sol.mts >> i & 1 == 1)
        .map(|i| regs[i].clone())
        .collect();
    let pair = MazePair::new(inst, task_ids, mtasks)
        .expect("DP m-tasks have pairwise distinct bottlenecks");
    let weight = pair.weight(inst);
    // The scaled objective and the rational weight must agree exactly.
    debug_assert_eq!(
        solver.sc.weight_of(sol.tasks),
        value,
        "root value consistent with its task set"
    );
    let _ = value;
    Ok(DpOutcome { pair, weight, cells_evaluated: solver.memo.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_instance, preprocess};
    use crate::rational::{rat, rat_int};

    fn i1_pre() -> Instance {
        let inst = load_instance(
            r#"{"capacities":[4,6,5,2],
                "tasks":[{"id":1,"s":1,"t":3,"d":2,"w":3},
                         {"id":2,"s":2,"t":4,"d":3,"w":4},
                         {"id":3,"s":3,"t":5,"d":2,"w":2}]}"#,
        )
        .unwrap();
        preprocess(&inst).0
    }

    #[test]
    fn augment_adds_zero_capacity_sentinel() {
        let inst = i1_pre();
        let aug = augment(&inst);
        assert_eq!(aug.capacities.len(), inst.num_edges() + 1);
        assert_eq!(aug.capacities[0], rat_int(0));
        assert_eq!(aug.bottom.s, 0);
        assert_eq!(aug.bottom.t, inst.num_edges() + 2);
        assert_eq!(aug.top.kind, MTaskKind::Top);
    }

    #[test]
    fn root_cell_is_valid_and_unique_at_sentinel() {
        let inst = i1_pre();
        let mset = gen_mtasks(&inst, &rat(1, 2));
        assert!(cell_valid(&inst, &mset, &root_cell(), 3, &rat(1, 2)));
        // No other delimiter pair can live on the sentinel edge.
        for m in mset.regulars() {
            let cell = DpCell { m_up: MRef::Regular(m.id), ..root_cell() };
            assert!(!cell_valid(&inst, &mset, &cell, 3, &rat(1, 2)));
        }
    }

    #[test]
    fn cell_validity_examples() {
        let inst = i1_pre();
        let mset = gen_mtasks(&inst, &rat(1, 2));
        // B must hold boundary tasks only: a task above m_up is rejected.
        // Edge 2 carries tasks 1 (b=4@e1) and 2 (b=5@e4 after preprocess).
        let m11 = mset
            .regulars()
            .find(|m| {
                let b = m.bottleneck.as_ref().unwrap();
                b.e == 1 && inst.tasks.iter().any(|t| (t.s, t.t) == (m.s, m.t))
            })
            .unwrap();
        let bad = DpCell {
            e: 2,
            m_down: MRef::Bottom,
            c_down: vec![],
            m_up: MRef::Regular(m11.id),
            c_up: vec![1],
            b: vec![2], // b(2) > b(m11): not a boundary task
        };
        assert!(!cell_valid(&inst, &mset, &bad, 3, &rat(1, 2)));

        let good = DpCell { b: vec![1], ..bad.clone() };
        assert!(cell_valid(&inst, &mset, &good, 3, &rat(1, 2)));

        // Cardinality: |B| must stay within k.
        let tight = load_instance(
            r#"{"capacities":[4,3],
                "tasks":[{"id":1,"s":1,"t":2,"d":2,"w":1},
                         {"id":2,"s":1,"t":3,"d":2,"w":1}]}"#,
        )
        .unwrap();
        let (tight, _) = preprocess(&tight);
        let tset = gen_mtasks(&tight, &rat(1, 2));
        // After splitting vertex 1, both tasks share the second edge;
        // their demands fill its capacity exactly (2 + 2 = 4).
        let bot = DpCell {
            e: 2,
            m_down: MRef::Bottom,
            c_down: vec![],
            m_up: MRef::Top,
            c_up: vec![],
            b: vec![1, 2],
        };
        assert!(cell_valid(&tight, &tset, &bot, 3, &rat(1, 2)));
        assert!(!cell_valid(&tight, &tset, &bot, 1, &rat(1, 2)));

        // Overload: bumping one demand makes B u C_down u C_up violate
        // the weak-feasibility condition on the shared edge (5 > 4).
        let over = load_instance(
            r#"{"capacities":[4,3],
                "tasks":[{"id":1,"s":1,"t":2,"d":3,"w":1},
                         {"id":2,"s":1,"t":3,"d":2,"w":1}]}"#,
        )
        .unwrap();
        let (over, _) = preprocess(&over);
        let oset = gen_mtasks(&over, &rat(1, 2));
        let cell = DpCell { b: vec![1, 2], ..bot.clone() };
        assert!(!cell_valid(&over, &oset, &cell, 3, &rat(1, 2)));
    }

    #[test]
    fn all_valid_cells_precede_the_root() {
        // Tiny instance: enumerate every id-based cell and check measure.
        let inst = load_instance(
            r#"{"capacities":[3,2],
                "tasks":[{"id":1,"s":1,"t":3,"d":1,"w":1}]}"#,
        )
        .unwrap();
        let (inst, _) = preprocess(&inst);
        let delta = rat(1, 2);
        let mset = gen_mtasks(&inst, &delta);
        let root = root_cell();
        let root_measure = cell_measure(&inst, &mset, &root);
        let mut mrefs = vec![MRef::Bottom, MRef::Top];
        mrefs.extend(mset.regulars().map(|m| MRef::Regular(m.id)));
        let ids: Vec<TaskId> = inst.tasks.iter().map(|t| t.id).collect();
        let mut subsets: Vec<Vec<TaskId>> = vec![vec![]];
        for id in ids {
            let mut more = subsets.clone();
            for s in &mut more {
                s.push(id);
            }
            subsets.extend(more);
        }
        let mut count = 0;
        for e in 0..=inst.num_edges() {
            for lo in &mrefs {
                for hi in &mrefs {
                    for cl in &subsets {
                        for ch in &subsets {
                            for b in &subsets {
                                let cell = DpCell {
                                    e,
                                    m_down: *lo,
                                    c_down: cl.clone(),
                                    m_up: *hi,
                                    c_up: ch.clone(),
                                    b: b.clone(),
                                };
                                if cell == root || !cell_valid(&inst, &mset, &cell, 2, &delta) {
                                    continue;
                                }
                                count += 1;
                                assert!(
                                    cell_measure(&inst, &mset, &cell) < root_measure,
                                    "every non-root cell precedes the root: {cell:?}"
                                );
                            }
                        }
                    }
                }
            }
        }
        assert!(count > 0);
    }

    #[test]
    fn solve_i1_matches_exact_optimum() {
        let inst = i1_pre();
        let out = solve(&inst, 3, &rat(1, 2), &DpGuards::relaxed(10, 4, 20)).unwrap();
        assert_eq!(out.weight, rat_int(9));
        assert_eq!(out.pair.tasks, vec![1, 2, 3]);
        let report = crate::model::check_feasible(&inst, &out.pair.tasks);
        assert!(report.feasible);
    }

    #[test]
    fn solve_with_self_check_and_certificates() {
        let inst = i1_pre();
        let out = solve_with_options(&inst, 3, &rat(1, 2), &DpGuards::relaxed(10, 4, 20), true)
            .unwrap();
        assert!(crate::maze::is_k_thin(&inst, &out.pair, 3));
        assert!(crate::maze::is_weakly_feasible(&inst, &out.pair, &rat(1, 2)));
    }

    #[test]
    fn solve_weight_is_monotone_in_k() {
        let inst = i1_pre();
        let guards = DpGuards::relaxed(10, 4, 20);
        let w1 = solve(&inst, 1, &rat(1, 2), &guards).unwrap().weight;
        let w2 = solve(&inst, 2, &rat(1, 2), &guards).unwrap().weight;
        let w3 = solve(&inst, 3, &rat(1, 2), &guards).unwrap().weight;
        assert!(w1 <= w2 && w2 <= w3);
        assert_eq!(w3, rat_int(9));
    }

    #[test]
    fn empty_instance_solves_to_zero() {
        let inst = Instance { capacities: vec![], tasks: vec![] };
        let out = solve(&inst, 1, &rat_int(1), &DpGuards::default()).unwrap();
        assert!(out.pair.tasks.is_empty());
        assert_eq!(out.weight, Rat::zero());
    }

    #[test]
    fn guards_and_preconditions_are_enforced() {
        let inst = i1_pre();
        assert!(matches!(
            solve(&inst, 3, &rat(1, 2), &DpGuards::default()),
            Err(DpError::GuardExceeded(_)) // ncrit(1/2) = 18 > 6
        ));
        assert!(matches!(
            solve(&inst, 3, &rat(99, 100), &DpGuards::relaxed(10, 4, 20)),
            Err(DpError::NotDeltaLarge(..))
        ));
        let raw = load_instance(
            r#"{"capacities":[4,6,5,2],
                "tasks":[{"id":1,"s":1,"t":3,"d":2,"w":3},
                         {"id":2,"s":2,"t":4,"d":3,"w":4},
                         {"id":3,"s":3,"t":5,"d":2,"w":2}]}"#,
        )
        .unwrap();
        assert!(matches!(
            solve(&raw, 3, &rat(1, 2), &DpGuards::relaxed(10, 4, 20)),
            Err(DpError::NotPreprocessed)
        ));
    }

    #[test]
    fn region_above_a_right_reaching_mtask_is_still_walked() {
        // z spans the whole path with its bottleneck at the leftmost
        // edge, so m(z,z) reaches the right end of the graph. x sits
        // above that m-task with its bottleneck strictly to the right.
        // The pair ({z, x}, {m(z,z)}) is weakly feasible and 1-thin, so
        // the DP must reach w(z) + w(x) at k = 1.
        let inst = load_instance(
            r#"{"capacities":[9,2,6,8],
                "tasks":[{"id":1,"s":1,"t":5,"d":1,"w":5},
                         {"id":2,"s":3,"t":4,"d":3,"w":7}]}"#,
        )
        .unwrap();
        let (inst, _) = preprocess(&inst);
        let delta = rat(1, 2);
        let out = solve(&inst, 1, &delta, &DpGuards::relaxed(10, 4, 20)).unwrap();
        assert_eq!(out.weight, rat_int(12));
        // Sanity: without an m-task the two tasks are not 1-thin on the
        // edge they share.
        let bare = MazePair::new(&inst, vec![1, 2], vec![]).unwrap();
        assert!(!crate::maze::is_k_thin(&inst, &bare, 1));
    }

    #[test]
    fn single_edge_task_at_the_right_end_is_picked_up() {
        // The base-case cell at the rightmost edge still collects its
        // boundary tasks.
        let inst = load_instance(
            r#"{"capacities":[3,2],
                "tasks":[{"id":1,"s":1,"t":2,"d":2,"w":5},
                         {"id":2,"s":2,"t":3,"d":2,"w":7}]}"#,
        )
        .unwrap();
        let (inst, _) = preprocess(&inst);
        let out = solve(&inst, 2, &rat(1, 2), &DpGuards::relaxed(10, 4, 20)).unwrap();
        assert_eq!(out.weight, rat_int(12));
    }
}
