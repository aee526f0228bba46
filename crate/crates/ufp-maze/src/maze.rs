//! Maze structures: m-tasks, maze pairs, the above/critical/subcritical
//! partition, boundary tasks, k-thinness, and weak feasibility.
//!
//! An m-task is a zero-profit structuring task obtained by gluing two
//! tasks that share a bottleneck edge `e`; it carries demand
//! `delta * u_e`. A maze pair `(T', M')` couples a task subset with a set
//! of m-tasks whose bottleneck order keys are pairwise distinct. The two
//! central predicates:
//!
//! - *k-thinness*: on every edge, each band of tasks between consecutive
//!   m-task levels (or outside all levels) holds at most `k` tasks;
//! - *weak feasibility*: on every edge, the above+critical tasks of the
//!   highest m-task plus that m-task's demand fit the capacity (plain
//!   feasibility where no m-task runs). Weak feasibility of the pair
//!   implies feasibility of `T'` alone.

use crate::model::{BottleneckInfo, Instance, LevelKey, TaskId};
use crate::rational::{floor_u64, Rat};
use crate::scaled::ScaledCtx;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MTaskKind {
    Regular,
    Bottom,
    Top,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MTask {
    pub id: usize,
    pub s: usize,
    pub t: usize,
    pub kind: MTaskKind,
    /// `None` for the dummies; their levels sit below/above every key.
    #[serde(skip)]
    pub bottleneck: Option<BottleneckInfo>,
    #[serde(with = "crate::rational::rat_serde")]
    pub demand: Rat,
}

impl MTask {
    pub fn regular(inst: &Instance, id: usize, s: usize, t: usize, bedge: usize, delta: &Rat) -> Self {
        let b = inst.cap(bedge).clone();
        MTask {
            id,
            s,
            t,
            kind: MTaskKind::Regular,
            demand: delta * &b,
            bottleneck: Some(BottleneckInfo { b, e: bedge }),
        }
    }

    pub fn key(&self) -> LevelKey {
        match self.kind {
            MTaskKind::Bottom => LevelKey::Bottom,
            MTaskKind::Top => LevelKey::Top,
            MTaskKind::Regular => self.bottleneck.as_ref().unwrap().key(),
        }
    }

    pub fn uses_edge(&self, e: usize) -> bool {
        self.s <= e && e < self.t
    }

    pub fn edges(&self) -> std::ops::Range<usize> {
        self.s..self.t
    }
}

/// The m-tasks of an instance: one per unordered pair of tasks sharing a
/// bottleneck edge (including the singleton pairs), deduplicated by
/// (path, bottleneck edge), plus the two dummies.
#[derive(Debug, Clone)]
pub struct MTaskSet {
    pub mtasks: Vec<MTask>,
}

impl MTaskSet {
    pub fn regulars(&self) -> impl Iterator<Item = &MTask> {
        self.mtasks.iter().filter(|m| m.kind == MTaskKind::Regular)
    }

    pub fn by_id(&self, id: usize) -> Option<&MTask> {
        self.mtasks.iter().find(|m| m.id == id)
    }
}

pub fn gen_mtasks(inst: &Instance, delta: &Rat) -> MTaskSet {
    assert!(
        delta > &Rat::zero() && delta <= &Rat::from_integer(1.into()),
        "delta must be in (0, 1]"
    );
    let mut paths: Vec<(usize, usize, usize)> = Vec::new(); // (bedge, s, t)
    let bottlenecks: Vec<usize> = inst.tasks.iter().map(|t| inst.bottleneck(t).e).collect();
    for (i, ti) in inst.tasks.iter().enumerate() {
        for (j, tj) in inst.tasks.iter().enumerate().skip(i) {
            if bottlenecks[i] == bottlenecks[j] {
                paths.push((bottlenecks[i], ti.s.min(tj.s), ti.t.max(tj.t)));
            }
        }
    }
    paths.sort_unstable();
    paths.dedup();
    let mut mtasks: Vec<MTask> = paths
        .into_iter()
        .enumerate()
        .map(|(id, (bedge, s, t))| MTask::regular(inst, id, s, t, bedge, delta))
        .collect();
    if inst.num_edges() > 0 {
        let next = mtasks.len();
        mtasks.push(MTask {
            id: next,
            s: 1,
            t: inst.num_vertices(),
            kind: MTaskKind::Bottom,
            bottleneck: None,
            demand: Rat::zero(),
        });
        mtasks.push(MTask {
            id: next + 1,
            s: 1,
            t: inst.num_vertices(),
            kind: MTaskKind::Top,
            bottleneck: None,
            demand: Rat::zero(),
        });
    }
    MTaskSet { mtasks }
}

#[derive(Debug, Error)]
pub enum MazePairError {
    #[error("m-tasks {0} and {1} share the same bottleneck order key")]
    DuplicateBottleneck(usize, usize),
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
}

/// A maze pair `(T', M')`. Dummies may be present but are ignored by all
/// predicates.
#[derive(Debug, Clone, PartialEq)]
pub struct MazePair {
    pub tasks: Vec<TaskId>,
    pub mtasks: Vec<MTask>,
}

impl MazePair {
    pub fn new(
        inst: &Instance,
        mut tasks: Vec<TaskId>,
        mtasks: Vec<MTask>,
    ) -> Result<Self, MazePairError> {
        tasks.sort_unstable();
        tasks.dedup();
        for id in &tasks {
            if inst.task_by_id(*id).is_none() {
                return Err(MazePairError::UnknownTask(*id));
            }
        }
        let regs: Vec<&MTask> = mtasks.iter().filter(|m| m.kind == MTaskKind::Regular).collect();
        for (i, a) in regs.iter().enumerate() {
            for b in &regs[i + 1..] {
                if a.key() == b.key() {
                    return Err(MazePairError::DuplicateBottleneck(a.id, b.id));
                }
            }
        }
        Ok(MazePair { tasks, mtasks })
    }

    pub fn empty() -> Self {
        MazePair { tasks: vec![], mtasks: vec![] }
    }

    pub fn weight(&self, inst: &Instance) -> Rat {
        inst.total_weight(&self.tasks)
    }

    pub fn regulars(&self) -> Vec<&MTask> {
        self.mtasks.iter().filter(|m| m.kind == MTaskKind::Regular).collect()
    }
}

/// The above/critical/subcritical partition of the tasks overlapping an
/// m-task, optionally restricted to one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition3 {
    pub abv: Vec<TaskId>,
    pub crit: Vec<TaskId>,
    pub subc: Vec<TaskId>,
}

pub fn partition(
    inst: &Instance,
    m: &MTask,
    tasks: &[TaskId],
    delta: &Rat,
    edge: Option<usize>,
) -> Partition3 {
    let mut out = Partition3 { abv: vec![], crit: vec![], subc: vec![] };
    let mkey = m.key();
    for id in tasks {
        let t = inst.task_by_id(*id).expect("unknown task id");
        let overlaps = t.s < m.t && m.s < t.t;
        if !overlaps {
            continue;
        }
        if let Some(e) = edge {
            if !t.uses_edge(e) {
                continue;
            }
        }
        let b = inst.bottleneck(t);
        if b.key() > mkey {
            out.abv.push(*id);
        } else {
            // Order key puts the task at or below the m-task; the critical
            // threshold (delta/2) b(m) compares raw values, inclusively.
            let critical = match m.kind {
                MTaskKind::Top => false,
                MTaskKind::Bottom => false, // unreachable: keys exceed Bottom
                MTaskKind::Regular => {
                    let bm = &m.bottleneck.as_ref().unwrap().b;
                    b.b >= delta / Rat::from_integer(2.into()) * bm
                }
            };
            if critical {
                out.crit.push(*id);
            } else {
                out.subc.push(*id);
            }
        }
    }
    out
}

/// Boundary tasks on edge `e`: bottleneck key strictly above `m_lo`'s and
/// at most `m_hi`'s.
pub fn bound_tasks(
    inst: &Instance,
    e: usize,
    m_lo: &MTask,
    m_hi: &MTask,
    tasks: &[TaskId],
) -> Vec<TaskId> {
    let lo = m_lo.key();
    let hi = m_hi.key();
    assert!(lo < hi, "bound_tasks requires b(m_lo) < b(m_hi)");
    tasks
        .iter()
        .copied()
        .filter(|id| {
            let t = inst.task_by_id(*id).expect("unknown task id");
            if !t.uses_edge(e) {
                return false;
            }
            let key = inst.bottleneck(t).key();
            key > lo && key <= hi
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ThinnessViolation {
    pub edge: usize,
    pub tasks: Vec<TaskId>,
    /// Bottleneck edges of the m-task levels bounding the violating band.
    pub band_lower: Option<usize>,
    pub band_upper: Option<usize>,
}

fn pair_ctx(inst: &Instance, pair: &MazePair, delta: &Rat) -> ScaledCtx {
    let regs = pair.regulars();
    ScaledCtx::new(inst, &regs, delta).expect("instance numerics out of range")
}

pub(crate) fn thinness_violation_with(
    inst: &Instance,
    pair: &MazePair,
    k: u32,
    strict_upper: bool,
) -> Option<ThinnessViolation> {
    // Thinness does not depend on delta; any value builds the same ranks.
    let ctx = pair_ctx(inst, pair, &Rat::from_integer(1.into()));
    let tmask = ctx.mask_of_ids(&pair.tasks);
    let mmask = (1u128 << ctx.mt.len()) - 1;
    let w = ctx.thinness_violation_with(tmask, mmask, k, strict_upper)?;
    let edge_of_rank = |r: u32| (1..=ctx.m).find(|&e| ctx.edge_rank[e] == r);
    Some(ThinnessViolation {
        edge: w.edge,
        tasks: ctx.ids_of_mask(w.tasks),
        band_lower: w.lower.and_then(edge_of_rank),
        band_upper: w.upper.and_then(edge_of_rank),
    })
}

/// First violating band if the pair is not k-thin.
pub fn thinness_violation(inst: &Instance, pair: &MazePair, k: u32) -> Option<ThinnessViolation> {
    assert!(k >= 1, "k must be at least 1");
    thinness_violation_with(inst, pair, k, false)
}

pub fn is_k_thin(inst: &Instance, pair: &MazePair, k: u32) -> bool {
    thinness_violation(inst, pair, k).is_none()
}

/// Smallest `k` for which the pair is k-thin.
pub fn thinness_level(inst: &Instance, pair: &MazePair) -> u32 {
    let ctx = pair_ctx(inst, pair, &Rat::from_integer(1.into()));
    let tmask = ctx.mask_of_ids(&pair.tasks);
    let mmask = (1u128 << ctx.mt.len()) - 1;
    ctx.thinness_level(tmask, mmask)
}

pub(crate) fn weak_feasibility_violation_with(
    inst: &Instance,
    pair: &MazePair,
    delta: &Rat,
    drop_top_demand: bool,
) -> Option<usize> {
    let ctx = pair_ctx(inst, pair, delta);
    let tmask = ctx.mask_of_ids(&pair.tasks);
    let mmask = (1u128 << ctx.mt.len()) - 1;
    ctx.weak_feas_violation_with(tmask, mmask, drop_top_demand)
}

/// First edge violating the weak-feasibility condition, if any.
pub fn weak_feasibility_violation(inst: &Instance, pair: &MazePair, delta: &Rat) -> Option<usize> {
    weak_feasibility_violation_with(inst, pair, delta, false)
}

pub fn is_weakly_feasible(inst: &Instance, pair: &MazePair, delta: &Rat) -> bool {
    weak_feasibility_violation(inst, pair, delta).is_none()
}

/// Joint feasibility of `T' ∪ M'`: per-edge task demand plus m-task demand
/// within capacity.
pub fn pair_union_feasible(inst: &Instance, pair: &MazePair) -> bool {
    let mut loads = vec![Rat::zero(); inst.num_edges() + 1];
    for id in &pair.tasks {
        let t = inst.task_by_id(*id).expect("unknown task id");
        for e in t.edges() {
            loads[e] += &t.d;
        }
    }
    for m in pair.regulars() {
        for e in m.edges() {
            loads[e] += &m.demand;
        }
    }
    (1..=inst.num_edges()).all(|e| &loads[e] <= inst.cap(e))
}

/// Maximum number of critical tasks per m-task in any weakly feasible
/// pair: `floor(4/delta^2 + 1/delta)`.
pub fn ncrit(delta: &Rat) -> u64 {
    assert!(
        delta > &Rat::zero() && delta <= &Rat::from_integer(1.into()),
        "delta must be in (0, 1]"
    );
    let four = Rat::from_integer(4.into());
    let one = Rat::from_integer(1.into());
    floor_u64(&(four / (delta * delta) + one / delta))
}
