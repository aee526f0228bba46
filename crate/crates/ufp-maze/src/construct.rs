//! Construction of a thin profitable maze pair from a feasible solution.
//!
//! Pipeline: represent each solution task as a horizontal segment under
//! the capacity curve, split every segment at its bottleneck edge into a
//! left and a right half, shift each half-family into a left-anchored
//! staircase with pairwise distinct levels, decompose the staircase into
//! a rooted tree of representative sets, and pick a minimum-weight
//! segment cover of that tree by an integral tree DP. Lifting the two
//! covers back yields a segment set whose removal leaves a thin pair:
//! the removed tasks are replaced, per bottleneck edge, by one glued
//! m-task.
//!
//! With tree parameter `k` the cover is 2k-thin for its staircase and
//! costs at most `(2/k)` of the staircase weight; composing both sides
//! gives a `(4k + ceil(1/delta))`-thin pair `(T~, M~)` with feasible
//! union and `w(T*) - w(T~) <= (4/k) w(T*)`, all checked exactly.

use crate::maze::{MazePair, MTask};
use crate::model::{check_feasible, is_delta_large, Instance, TaskId};
use crate::rational::{ceil_u64, Rat};
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
    #[error("input solution is infeasible at edge {0}")]
    Infeasible(usize),
    #[error("task {0} is not delta-large")]
    NotDeltaLarge(TaskId),
    #[error("tree parameter k must be even and at least 2, got {0}")]
    BadK(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentSide {
    Full,
    Left,
    Right,
    Transformed,
}

/// A horizontal segment `(x_lo, x_hi) x {level}` in vertex coordinates.
/// It contains edge `e` iff `x_lo <= e` and `e + 1 <= x_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub task: TaskId,
    pub x_lo: usize,
    pub x_hi: usize,
    pub level: Rat,
    pub weight: Rat,
    pub side: SegmentSide,
}

impl Segment {
    pub fn contains_edge(&self, e: usize) -> bool {
        self.x_lo <= e && e + 1 <= self.x_hi
    }
}

/// Full segments `(s(i), t(i)) x {b(i)}` for the given solution tasks.
pub fn build_segments(inst: &Instance, solution: &[TaskId]) -> Vec<Segment> {
    let mut ids: Vec<TaskId> = solution.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|id| {
            let t = inst.task_by_id(*id).expect("unknown task id");
            Segment {
                task: *id,
                x_lo: t.s,
                x_hi: t.t,
                level: inst.bottleneck(t).b,
                weight: t.w.clone(),
                side: SegmentSide::Full,
            }
        })
        .collect()
}

/// Splits each segment at its bottleneck edge. The halves overlap exactly
/// on that edge and both carry the full task weight.
pub fn split_lr(inst: &Instance, full: &[Segment]) -> (Vec<Segment>, Vec<Segment>) {
    let mut left = Vec::with_capacity(full.len());
    let mut right = Vec::with_capacity(full.len());
    for seg in full {
        let t = inst.task_by_id(seg.task).expect("unknown task id");
        let e = inst.bottleneck(t).e;
        left.push(Segment { x_hi: e + 1, side: SegmentSide::Left, ..seg.clone() });
        right.push(Segment { x_lo: e, side: SegmentSide::Right, ..seg.clone() });
    }
    (left, right)
}

fn transform_rank_map(segments: &[Segment]) -> BTreeMap<TaskId, usize> {
    let mut ids: Vec<TaskId> = segments.iter().map(|s| s.task).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter().enumerate().map(|(i, id)| (id, i + 1)).collect()
}

/// Left-anchors every right half and separates levels: segment
/// `(v, u) x {b}` becomes `(1, u) x {b + M v + eps r}` with
/// `M = 1 + max_e u_e` and `eps = 1/(|L|+1)`, `r` the 1-based rank of the
/// task id. All resulting levels are pairwise distinct.
pub fn transform_right(inst: &Instance, right: &[Segment]) -> Vec<Segment> {
    let ranks = transform_rank_map(right);
    let big_m = Rat::one() + inst.capacities.iter().max().cloned().unwrap_or_else(Rat::zero);
    let eps = Rat::one() / Rat::from_integer((right.len() as i64 + 1).into());
    right
        .iter()
        .map(|seg| Segment {
            task: seg.task,
            x_lo: 1,
            x_hi: seg.x_hi,
            level: &seg.level
                + &big_m * Rat::from_integer((seg.x_lo as i64).into())
                + &eps * Rat::from_integer((ranks[&seg.task] as i64).into()),
            weight: seg.weight.clone(),
            side: SegmentSide::Transformed,
        })
        .collect()
}

/// Mirror of [`transform_right`] for the left halves. The result lives in
/// reflected coordinates (vertex `v` maps to `n + 1 - v`), where the left
/// halves become right-style segments anchored at vertex 1.
pub fn transform_left(inst: &Instance, left: &[Segment]) -> Vec<Segment> {
    let n = inst.num_vertices();
    let reflected: Vec<Segment> = left
        .iter()
        .map(|seg| Segment {
            x_lo: n + 1 - seg.x_hi,
            x_hi: n + 1 - seg.x_lo,
            side: SegmentSide::Right,
            ..seg.clone()
        })
        .collect();
    let ranks = transform_rank_map(&reflected);
    let big_m = Rat::one() + inst.capacities.iter().max().cloned().unwrap_or_else(Rat::zero);
    let eps = Rat::one() / Rat::from_integer((reflected.len() as i64 + 1).into());
    reflected
        .into_iter()
        .map(|seg| {
            let level = &seg.level
                + &big_m * Rat::from_integer((seg.x_lo as i64).into())
                + &eps * Rat::from_integer((ranks[&seg.task] as i64).into());
            Segment { x_lo: 1, level, side: SegmentSide::Transformed, ..seg }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DecompNode {
    pub edge: usize,
    /// Node interval `[y_lo, y_hi)`; `None` bounds are 0 / infinity.
    pub y_lo: Option<Rat>,
    pub y_hi: Option<Rat>,
    /// Representative segments (indices into the segment slice).
    pub reps: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Rooted decomposition tree of a left-anchored segment family.
#[derive(Debug, Clone)]
pub struct DecompTree {
    pub nodes: Vec<DecompNode>,
    pub root: Option<usize>,
    /// Node path of each segment, root-ward first. Empty tree: all empty.
    pub seg_paths: Vec<Vec<usize>>,
    pub k: u32,
}

impl DecompTree {
    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty()).collect()
    }

    /// Minimum number of paths over all arcs of the leaf-augmented tree.
    /// A path uses the arc entering each of its nodes plus the dummy arc
    /// appended under its leaf, so the load of the arc into node `w` is
    /// `|R_w|` and the load of a dummy arc equals the leaf's `|R_w|`.
    pub fn min_arc_load(&self) -> Option<usize> {
        let root = self.root?;
        let mut min = usize::MAX;
        for (i, node) in self.nodes.iter().enumerate() {
            if i != root || node.children.is_empty() {
                min = min.min(node.reps.len());
            }
        }
        if min == usize::MAX {
            // Single-node tree: only the dummy arc below the root.
            min = self.nodes[root].reps.len();
        }
        Some(min)
    }
}

fn in_interval(level: &Rat, lo: &Option<Rat>, hi: &Option<Rat>) -> bool {
    if let Some(lo) = lo {
        if level < lo {
            return false;
        }
    }
    if let Some(hi) = hi {
        if level >= hi {
            return false;
        }
    }
    true
}

/// Builds the decomposition tree of a left-anchored family with pairwise
/// distinct levels and pairwise distinct right endpoints (what the
/// transform plus preprocessing guarantee).
///
/// The root sits at the rightmost edge contained in at least `k-1`
/// segments; when no such edge exists the tree is empty and the cover is
/// empty by convention. Walking one edge left, the representative set
/// grows by at most one segment; when it reaches exactly `k` segments it
/// splits into the lower and upper `k/2` at a separating level `y_0` (the
/// level of the `(k/2+1)`-st segment). Every node therefore carries
/// between `k/2` and `k-1` representatives.
pub fn build_tree(segments: &[Segment], num_edges: usize, k: u32) -> Result<DecompTree, ConstructError> {
    if k < 2 || k % 2 != 0 {
        return Err(ConstructError::BadK(k));
    }
    for seg in segments {
        assert_eq!(seg.x_lo, 1, "build_tree expects left-anchored segments");
    }
    {
        let mut rights: Vec<usize> = segments.iter().map(|s| s.x_hi).collect();
        rights.sort_unstable();
        rights.dedup();
        assert_eq!(rights.len(), segments.len(), "right endpoints must be pairwise distinct");
    }
    let kk = k as usize;
    let mut seg_paths = vec![Vec::new(); segments.len()];
    let root_edge = (1..=num_edges)
        .rev()
        .find(|&e| segments.iter().filter(|s| s.contains_edge(e)).count() >= kk - 1);
    let Some(root_edge) = root_edge else {
        return Ok(DecompTree { nodes: vec![], root: None, seg_paths, k });
    };

    let mut nodes: Vec<DecompNode> = Vec::new();
    let root_reps: Vec<usize> =
        (0..segments.len()).filter(|&i| segments[i].contains_edge(root_edge)).collect();
    nodes.push(DecompNode {
        edge: root_edge,
        y_lo: None,
        y_hi: None,
        reps: root_reps,
        parent: None,
        children: vec![],
    });

    let mut queue = vec![0usize];
    while let Some(w) = queue.pop() {
        for &i in &nodes[w].reps {
            seg_paths[i].push(w);
        }
        let edge = nodes[w].edge;
        debug_assert!(
            nodes[w].reps.len() >= kk / 2 && nodes[w].reps.len() <= kk - 1,
            "representative sets stay within [k/2, k-1]"
        );
        if edge == 1 {
            continue; // leaf at the leftmost edge
        }
        let e2 = edge - 1;
        let (y_lo, y_hi) = (nodes[w].y_lo.clone(), nodes[w].y_hi.clone());
        let mut grown: Vec<usize> = (0..segments.len())
            .filter(|&i| {
                segments[i].contains_edge(e2) && in_interval(&segments[i].level, &y_lo, &y_hi)
            })
            .collect();
        assert!(
            grown.len() <= kk,
            "a left-anchored family with distinct right endpoints grows by at most one"
        );
        if grown.len() < kk {
            let child = nodes.len();
            nodes.push(DecompNode {
                edge: e2,
                y_lo,
                y_hi,
                reps: grown,
                parent: Some(w),
                children: vec![],
            });
            nodes[w].children.push(child);
            queue.push(child);
        } else {
            grown.sort_by(|&a, &b| segments[a].level.cmp(&segments[b].level));
            let bottom = grown[..kk / 2].to_vec();
            let top = grown[kk / 2..].to_vec();
            let y0 = segments[top[0]].level.clone();
            let b_child = nodes.len();
            nodes.push(DecompNode {
                edge: e2,
                y_lo: y_lo.clone(),
                y_hi: Some(y0.clone()),
                reps: bottom,
                parent: Some(w),
                children: vec![],
            });
            let t_child = nodes.len();
            nodes.push(DecompNode {
                edge: e2,
                y_lo: Some(y0),
                y_hi,
                reps: top,
                parent: Some(w),
                children: vec![],
            });
            nodes[w].children.push(b_child);
            nodes[w].children.push(t_child);
            queue.push(b_child);
            queue.push(t_child);
        }
    }
    Ok(DecompTree { nodes, root: Some(0), seg_paths, k })
}

#[derive(Debug, Clone)]
pub struct SegmentCover {
    /// Indices into the segment slice the tree was built from.
    pub selected: Vec<usize>,
    pub weight: Rat,
}

/// Minimum-weight segment cover: a subset hitting every node's
/// representative set. Solved exactly by a leaf-to-root DP over
/// (node, highest covered ancestor) states; the underlying constraint
/// matrix is totally unimodular, so this integral optimum also matches
/// the fractional one, which is at most `(2/k)` of the total weight.
pub fn min_segment_cover(tree: &DecompTree, segments: &[Segment]) -> SegmentCover {
    let Some(root) = tree.root else {
        return SegmentCover { selected: vec![], weight: Rat::zero() };
    };
    let n = tree.nodes.len();
    let mut depth = vec![0usize; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut stack = vec![root];
    while let Some(w) = stack.pop() {
        order.push(w);
        for &c in &tree.nodes[w].children {
            depth[c] = depth[w] + 1;
            stack.push(c);
        }
    }

    // Segments ending at each leaf, with the depth of their top node.
    let mut ending: Vec<Vec<(usize, usize)>> = vec![vec![]; n]; // (segment, top depth)
    for (i, path) in tree.seg_paths.iter().enumerate() {
        if let (Some(&first), Some(&last)) = (path.first(), path.last()) {
            ending[last].push((i, depth[first]));
        }
    }

    #[derive(Clone)]
    enum Choice {
        Seg(usize),
        /// Designated child (by position) carrying the reach requirement.
        Child(usize),
    }

    // table[w][d]: cheapest cover of subtree(w) whose selection reaches an
    // ancestor of depth <= d; d ranges over 0..=depth(w).
    let mut table: Vec<Vec<Option<Rat>>> = vec![vec![]; n];
    let mut choice: Vec<Vec<Option<Choice>>> = vec![vec![]; n];
    for &w in order.iter().rev() {
        let dw = depth[w];
        let mut f: Vec<Option<Rat>> = vec![None; dw + 1];
        let mut ch: Vec<Option<Choice>> = vec![None; dw + 1];
        if tree.nodes[w].children.is_empty() {
            for d in 0..=dw {
                for &(seg, top) in &ending[w] {
                    if top <= d {
                        let wgt = &segments[seg].weight;
                        if f[d].as_ref().map_or(true, |cur| wgt < cur) {
                            f[d] = Some(wgt.clone());
                            ch[d] = Some(Choice::Seg(seg));
                        }
                    }
                }
            }
        } else {
            let kids = &tree.nodes[w].children;
            // Each child must cover itself; one designated child also
            // reaches up to the required depth (covering w on the way).
            let base: Option<Rat> = kids
                .iter()
                .map(|&c| table[c][depth[c]].clone())
                .try_fold(Rat::zero(), |acc, v| v.map(|v| acc + v));
            for d in 0..=dw {
                if base.is_none() {
                    break;
                }
                for (pos, &c) in kids.iter().enumerate() {
                    let Some(reach) = table[c][d].clone() else { continue };
                    let Some(selfcov) = table[c][depth[c]].clone() else { continue };
                    let cost = base.clone().unwrap() - selfcov + reach;
                    if f[d].as_ref().map_or(true, |cur| &cost < cur) {
                        f[d] = Some(cost);
                        ch[d] = Some(Choice::Child(pos));
                    }
                }
            }
        }
        table[w] = f;
        choice[w] = ch;
    }

    let mut selected: BTreeSet<usize> = BTreeSet::new();
    // (node, required reach depth)
    let mut work = vec![(root, 0usize)];
    while let Some((w, d)) = work.pop() {
        match choice[w][d].as_ref().expect("cover exists: every node has representatives") {
            Choice::Seg(seg) => {
                selected.insert(*seg);
            }
            Choice::Child(pos) => {
                let kids = &tree.nodes[w].children;
                for (p, &c) in kids.iter().enumerate() {
                    work.push((c, if p == *pos { d } else { depth[c] }));
                }
            }
        }
    }
    let weight = selected.iter().map(|&i| segments[i].weight.clone()).sum();
    SegmentCover { selected: selected.into_iter().collect(), weight }
}

/// Lifts side covers back to full segments: `l(i)` is selected iff its
/// left half or its right half was (the transformed segments carry their
/// task ids, which is the selected-iff-selected back-mapping).
pub fn lift_cover(
    full: &[Segment],
    left_selected: &BTreeSet<TaskId>,
    right_selected: &BTreeSet<TaskId>,
) -> Vec<Segment> {
    full.iter()
        .filter(|seg| left_selected.contains(&seg.task) || right_selected.contains(&seg.task))
        .cloned()
        .collect()
}

/// Replaces the covered tasks with one glued m-task per bottleneck edge:
/// the m-task spans from the leftmost start to the rightmost end of the
/// covered tasks on that edge.
pub fn maze_pair_from_cover(
    inst: &Instance,
    solution: &[TaskId],
    covered: &BTreeSet<TaskId>,
    delta: &Rat,
) -> MazePair {
    let kept: Vec<TaskId> =
        solution.iter().copied().filter(|id| !covered.contains(id)).collect();
    let mut groups: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for id in covered {
        let t = inst.task_by_id(*id).expect("unknown task id");
        let e = inst.bottleneck(t).e;
        groups
            .entry(e)
            .and_modify(|(s, tt)| {
                *s = (*s).min(t.s);
                *tt = (*tt).max(t.t);
            })
            .or_insert((t.s, t.t));
    }
    let mtasks: Vec<MTask> = groups
        .into_iter()
        .enumerate()
        .map(|(id, (e, (s, t)))| MTask::regular(inst, id, s, t, e, delta))
        .collect();
    MazePair::new(inst, kept, mtasks).expect("glued m-tasks have distinct bottleneck edges")
}

/// Thinness-parameter arithmetic for a target approximation factor:
/// `k_prime` is the smallest even integer with `1 - 4/k' >= 1/(1+eps)`,
/// and `k` is the thinness the construction then guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KParams {
    pub k_prime: u32,
    pub k: u32,
}

pub fn k_of(eps: &Rat, delta: &Rat) -> KParams {
    assert!(eps > &Rat::zero(), "eps must be positive");
    assert!(
        delta > &Rat::zero() && delta <= &Rat::from_integer(1.into()),
        "delta must be in (0, 1]"
    );
    let four = Rat::from_integer(4.into());
    let bound = &four * (Rat::one() + eps) / eps;
    let mut k_prime = ceil_u64(&bound) as u32;
    if k_prime % 2 == 1 {
        k_prime += 1;
    }
    let k = 4 * k_prime + ceil_u64(&(Rat::one() / delta)) as u32;
    KParams { k_prime, k }
}

#[derive(Debug, Clone)]
pub struct ConstructOutcome {
    pub pair: MazePair,
    /// Tasks whose segments were covered and replaced by m-tasks.
    pub removed: Vec<TaskId>,
    pub input_weight: Rat,
    pub kept_weight: Rat,
    /// Weight of the two side covers (an upper bound on the removed weight).
    pub cover_weight: Rat,
    /// Thinness the pair is guaranteed to satisfy: `4k' + ceil(1/delta)`.
    pub thinness_bound: u32,
    /// Smallest k for which the pair actually is k-thin.
    pub thinness_achieved: u32,
    pub union_feasible: bool,
}

/// End-to-end construction: from a feasible delta-large solution to a
/// `(4k' + ceil(1/delta))`-thin maze pair with feasible union and weight
/// loss at most `(4/k') w(T*)`.
pub fn construct_thin_pair(
    inst: &Instance,
    solution: &[TaskId],
    k_prime: u32,
    delta: &Rat,
) -> Result<ConstructOutcome, ConstructError> {
    if k_prime < 2 || k_prime % 2 != 0 {
        return Err(ConstructError::BadK(k_prime));
    }
    for id in solution {
        let t = inst.task_by_id(*id).ok_or(ConstructError::UnknownTask(*id))?;
        if !is_delta_large(t, &inst.bottleneck(t), delta) {
            return Err(ConstructError::NotDeltaLarge(*id));
        }
    }
    let report = check_feasible(inst, solution);
    if let Some(e) = report.first_violation {
        return Err(ConstructError::Infeasible(e));
    }

    let full = build_segments(inst, solution);
    let input_weight: Rat = full.iter().map(|s| s.weight.clone()).sum();
    let thinness_bound = 4 * k_prime + ceil_u64(&(Rat::one() / delta)) as u32;
    if full.is_empty() {
        return Ok(ConstructOutcome {
            pair: MazePair::empty(),
            removed: vec![],
            input_weight: Rat::zero(),
            kept_weight: Rat::zero(),
            cover_weight: Rat::zero(),
            thinness_bound,
            thinness_achieved: 0,
            union_feasible: true,
        });
    }
    let (left, right) = split_lr(inst, &full);
    let m = inst.num_edges();

    let tilde_r = transform_right(inst, &right);
    let tree_r = build_tree(&tilde_r, m, k_prime)?;
    let cover_r = min_segment_cover(&tree_r, &tilde_r);
    let right_sel: BTreeSet<TaskId> = cover_r.selected.iter().map(|&i| tilde_r[i].task).collect();

    let tilde_l = transform_left(inst, &left);
    let tree_l = build_tree(&tilde_l, m, k_prime)?;
    let cover_l = min_segment_cover(&tree_l, &tilde_l);
    let left_sel: BTreeSet<TaskId> = cover_l.selected.iter().map(|&i| tilde_l[i].task).collect();

    let lifted = lift_cover(&full, &left_sel, &right_sel);
    let covered: BTreeSet<TaskId> = lifted.iter().map(|s| s.task).collect();
    let pair = maze_pair_from_cover(inst, solution, &covered, delta);

    let kept_weight = pair.weight(inst);
    let thinness_achieved = if pair.tasks.is_empty() { 0 } else { crate::maze::thinness_level(inst, &pair) };
    let union_feasible = crate::maze::pair_union_feasible(inst, &pair);
    Ok(ConstructOutcome {
        pair,
        removed: covered.into_iter().collect(),
        input_weight,
        kept_weight,
        cover_weight: cover_l.weight + cover_r.weight,
        thinness_bound,
        thinness_achieved,
        union_feasible,
    })
}
