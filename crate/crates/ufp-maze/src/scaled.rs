//! Integer-scaled view of an instance plus an m-task set.
//!
//! All demands, capacities, and thresholds are multiplied by a common
//! denominator so that the hot predicates (weak feasibility, thinness
//! bins, band/critical masks) run on `i128` and bitmasks. The scaling is
//! exact: it errors out instead of rounding when values do not fit.
//!
//! Edge indices here include the reserved index 0 for the zero-capacity
//! sentinel edge added by the dynamic program; real edges are `1..=m`.

use crate::maze::{MTask, MTaskKind};
use crate::model::{Instance, TaskId};
use crate::rational::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, thiserror::Error)]
pub enum ScaleError {
    #[error("instance numerics exceed the exact integer range of the solver")]
    Overflow,
    #[error("too many tasks for mask arithmetic ({0} > 64)")]
    TooManyTasks(usize),
    #[error("too many m-tasks for mask arithmetic ({0} > 128)")]
    TooManyMTasks(usize),
}

pub(crate) struct ScaledM {
    pub s: usize,
    pub t: usize,
    pub bedge: usize,
    pub rank: u32,
    pub dem: i128,
}

impl ScaledM {
    pub fn uses_edge(&self, e: usize) -> bool {
        self.s <= e && e < self.t
    }
}

pub(crate) struct ScaledCtx {
    /// Number of real edges; 0 is the sentinel.
    pub m: usize,
    pub cap: Vec<i128>,
    pub n: usize,
    pub dem: Vec<i128>,
    pub wgt: Vec<i128>,
    pub task_s: Vec<usize>,
    pub task_t: Vec<usize>,
    pub task_rank: Vec<u32>,
    pub task_bedge: Vec<usize>,
    pub id_of: Vec<TaskId>,
    /// Rank of each real edge under the (capacity, index) order, 1..=m.
    pub edge_rank: Vec<u32>,
    pub top_rank: u32,
    pub tasks_on_edge: Vec<u64>,
    pub mt: Vec<ScaledM>,
    pub crit_mask: Vec<u64>,
}

pub(crate) const BOTTOM_RANK: u32 = 0;

fn to_scaled(value: &Rat, scale: &BigInt) -> Result<i128, ScaleError> {
    let scaled = value * Rat::from_integer(scale.clone());
    if !scaled.is_integer() {
        return Err(ScaleError::Overflow);
    }
    scaled.to_integer().to_i128().ok_or(ScaleError::Overflow)
}

impl ScaledCtx {
    /// Builds the context for a preprocessed-or-not instance, a set of
    /// regular m-tasks, and a density parameter `delta = p/q`.
    pub fn new(inst: &Instance, mtasks: &[&MTask], delta: &Rat) -> Result<Self, ScaleError> {
        let n = inst.tasks.len();
        if n > 64 {
            return Err(ScaleError::TooManyTasks(n));
        }
        if mtasks.len() > 128 {
            return Err(ScaleError::TooManyMTasks(mtasks.len()));
        }
        let m = inst.num_edges();

        // Common denominator covering capacities, demands, and delta/2.
        let mut scale = BigInt::one();
        for r in inst.capacities.iter().chain(inst.tasks.iter().map(|t| &t.d)) {
            scale = scale.lcm(r.denom());
        }
        scale *= BigInt::from(2) * delta.denom();

        let mut cap = Vec::with_capacity(m + 1);
        cap.push(0);
        for e in 1..=m {
            cap.push(to_scaled(inst.cap(e), &scale)?);
        }

        let mut wscale = BigInt::one();
        for t in &inst.tasks {
            wscale = wscale.lcm(t.w.denom());
        }

        let mut dem = Vec::with_capacity(n);
        let mut wgt = Vec::with_capacity(n);
        let mut task_s = Vec::with_capacity(n);
        let mut task_t = Vec::with_capacity(n);
        let mut task_bedge = Vec::with_capacity(n);
        let mut id_of = Vec::with_capacity(n);
        for t in &inst.tasks {
            dem.push(to_scaled(&t.d, &scale)?);
            wgt.push(to_scaled(&t.w, &wscale)?);
            task_s.push(t.s);
            task_t.push(t.t);
            task_bedge.push(inst.bottleneck(t).e);
            id_of.push(t.id);
        }

        // Guard against overflow in any partial sum the predicates form.
        let mut total = BigInt::zero();
        for v in dem.iter().chain(cap.iter()) {
            total += BigInt::from(v.abs());
        }
        total += BigInt::from(cap.iter().max().copied().unwrap_or(0));
        if total.to_i128().is_none() {
            return Err(ScaleError::Overflow);
        }
        let wtotal: BigInt = wgt.iter().map(|v| BigInt::from(v.abs())).sum();
        if wtotal.to_i128().is_none() {
            return Err(ScaleError::Overflow);
        }

        // Edge ranks: position in the (capacity, index) order, 1-based.
        let mut order: Vec<usize> = (1..=m).collect();
        order.sort_by(|&a, &b| cap[a].cmp(&cap[b]).then(a.cmp(&b)));
        let mut edge_rank = vec![0u32; m + 1];
        for (pos, &e) in order.iter().enumerate() {
            edge_rank[e] = pos as u32 + 1;
        }
        let top_rank = m as u32 + 1;

        let task_rank: Vec<u32> = task_bedge.iter().map(|&e| edge_rank[e]).collect();

        let mut tasks_on_edge = vec![0u64; m + 1];
        for (i, (&s, &t)) in task_s.iter().zip(&task_t).enumerate() {
            for e in s..t {
                tasks_on_edge[e] |= 1 << i;
            }
        }

        let mut mt = Vec::with_capacity(mtasks.len());
        let mut crit_mask = Vec::with_capacity(mtasks.len());
        for mtask in mtasks {
            assert_eq!(mtask.kind, MTaskKind::Regular, "dummies are handled symbolically");
            let bedge = mtask.bottleneck.as_ref().expect("regular m-task has a bottleneck").e;
            let sm = ScaledM {
                s: mtask.s,
                t: mtask.t,
                bedge,
                rank: edge_rank[bedge],
                dem: to_scaled(&mtask.demand, &scale)?,
            };
            // Critical tasks: overlap the m-task path, bottleneck at most
            // its level (order key), and numerically >= (delta/2) b(m).
            let thr = to_scaled(&(delta / Rat::from_integer(2.into()) * inst.cap(bedge)), &scale)?;
            let mut mask = 0u64;
            for i in 0..n {
                let overlap = task_s[i] < sm.t && sm.s < task_t[i];
                if overlap && task_rank[i] <= sm.rank && cap[task_bedge[i]] >= thr {
                    mask |= 1 << i;
                }
            }
            mt.push(sm);
            crit_mask.push(mask);
        }

        Ok(ScaledCtx {
            m,
            cap,
            n,
            dem,
            wgt,
            task_s,
            task_t,
            task_rank,
            task_bedge,
            id_of,
            edge_rank,
            top_rank,
            tasks_on_edge,
            mt,
            crit_mask,
        })
    }

    pub fn task_index(&self, id: TaskId) -> Option<usize> {
        self.id_of.iter().position(|&x| x == id)
    }

    pub fn mask_of_ids(&self, ids: &[TaskId]) -> u64 {
        let mut mask = 0u64;
        for id in ids {
            let i = self.task_index(*id).expect("unknown task id");
            mask |= 1 << i;
        }
        mask
    }

    pub fn ids_of_mask(&self, mask: u64) -> Vec<TaskId> {
        let mut ids: Vec<TaskId> =
            (0..self.n).filter(|&i| mask >> i & 1 == 1).map(|i| self.id_of[i]).collect();
        ids.sort_unstable();
        ids
    }

    pub fn task_uses_edge(&self, i: usize, e: usize) -> bool {
        self.task_s[i] <= e && e < self.task_t[i]
    }

    /// Tasks on edge `e` with bottleneck rank in `(lo, hi]`. Sentinel
    /// edges (0 and anything past the last real edge) carry no tasks.
    pub fn band_mask(&self, e: usize, lo: u32, hi: u32) -> u64 {
        if e > self.m {
            return 0;
        }
        let mut out = 0u64;
        let mut on = self.tasks_on_edge[e];
        while on != 0 {
            let i = on.trailing_zeros() as usize;
            on &= on - 1;
            let r = self.task_rank[i];
            if r > lo && r <= hi {
                out |= 1 << i;
            }
        }
        out
    }

    pub fn weight_of(&self, mask: u64) -> i128 {
        let mut w = 0i128;
        let mut mm = mask;
        while mm != 0 {
            let i = mm.trailing_zeros() as usize;
            mm &= mm - 1;
            w += self.wgt[i];
        }
        w
    }

    /// Weak feasibility of `(tasks, m-tasks)` with dummies excluded; the
    /// edge check falls back to plain feasibility where no m-task runs.
    /// Returns the first violating edge. `drop_top_demand` is a test-only
    /// mutation that omits the `d(m_e)` term.
    pub fn weak_feas_violation_with(
        &self,
        tmask: u64,
        mmask: u128,
        drop_top_demand: bool,
    ) -> Option<usize> {
        for e in 1..=self.m {
            // Highest m-task level on this edge.
            let mut best: Option<usize> = None;
            let mut mm = mmask;
            while mm != 0 {
                let mi = mm.trailing_zeros() as usize;
                mm &= mm - 1;
                if self.mt[mi].uses_edge(e)
                    && best.map_or(true, |b| self.mt[mi].rank > self.mt[b].rank)
                {
                    best = Some(mi);
                }
            }
            let mut load = 0i128;
            match best {
                None => {
                    let mut on = self.tasks_on_edge[e] & tmask;
                    while on != 0 {
                        let i = on.trailing_zeros() as usize;
                        on &= on - 1;
                        load += self.dem[i];
                    }
                }
                Some(mi) => {
                    let crit = self.crit_mask[mi];
                    let rank = self.mt[mi].rank;
                    let mut on = self.tasks_on_edge[e] & tmask;
                    while on != 0 {
                        let i = on.trailing_zeros() as usize;
                        on &= on - 1;
                        if self.task_rank[i] > rank || crit >> i & 1 == 1 {
                            load += self.dem[i];
                        }
                    }
                    if !drop_top_demand {
                        load += self.mt[mi].dem;
                    }
                }
            }
            if load > self.cap[e] {
                return Some(e);
            }
        }
        None
    }

    pub fn weak_feas_violation(&self, tmask: u64, mmask: u128) -> Option<usize> {
        self.weak_feas_violation_with(tmask, mmask, false)
    }

    /// Thinness bin check. Sorts the m-task levels per edge and requires at
    /// most `k` tasks in every half-open band `(level_j, level_{j+1}]`.
    /// `strict_upper` is a test-only mutation flipping the band boundary.
    pub fn thinness_violation_with(
        &self,
        tmask: u64,
        mmask: u128,
        k: u32,
        strict_upper: bool,
    ) -> Option<ThinWitness> {
        for e in 1..=self.m {
            let mut levels: Vec<u32> = Vec::new();
            let mut mm = mmask;
            while mm != 0 {
                let mi = mm.trailing_zeros() as usize;
                mm &= mm - 1;
                if self.mt[mi].uses_edge(e) {
                    levels.push(self.mt[mi].rank);
                }
            }
            levels.sort_unstable();
            levels.dedup();
            let mut counts = vec![0u32; levels.len() + 1];
            let mut members: Vec<u64> = vec![0; levels.len() + 1];
            let mut on = self.tasks_on_edge[e] & tmask;
            while on != 0 {
                let i = on.trailing_zeros() as usize;
                on &= on - 1;
                let r = self.task_rank[i];
                let bin = if strict_upper {
                    levels.partition_point(|&l| l <= r)
                } else {
                    levels.partition_point(|&l| l < r)
                };
                counts[bin] += 1;
                members[bin] |= 1 << i;
                if counts[bin] > k {
                    return Some(ThinWitness {
                        edge: e,
                        bin,
                        tasks: members[bin],
                        lower: if bin == 0 { None } else { Some(levels[bin - 1]) },
                        upper: levels.get(bin).copied(),
                    });
                }
            }
        }
        None
    }

    pub fn thinness_violation(&self, tmask: u64, mmask: u128, k: u32) -> Option<ThinWitness> {
        self.thinness_violation_with(tmask, mmask, k, false)
    }

    /// Largest per-band task count over all edges: the smallest `k` for
    /// which the pair is k-thin.
    pub fn thinness_level(&self, tmask: u64, mmask: u128) -> u32 {
        let mut level = 0;
        for e in 1..=self.m {
            let mut levels: Vec<u32> = Vec::new();
            let mut mm = mmask;
            while mm != 0 {
                let mi = mm.trailing_zeros() as usize;
                mm &= mm - 1;
                if self.mt[mi].uses_edge(e) {
                    levels.push(self.mt[mi].rank);
                }
            }
            levels.sort_unstable();
            levels.dedup();
            let mut counts = vec![0u32; levels.len() + 1];
            let mut on = self.tasks_on_edge[e] & tmask;
            while on != 0 {
                let i = on.trailing_zeros() as usize;
                on &= on - 1;
                let bin = levels.partition_point(|&l| l < self.task_rank[i]);
                counts[bin] += 1;
                level = level.max(counts[bin]);
            }
        }
        level
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ThinWitness {
    pub edge: usize,
    pub bin: usize,
    pub tasks: u64,
    pub lower: Option<u32>,
    pub upper: Option<u32>,
}
