//! Problem model: path instances, bottlenecks, preprocessing, feasibility,
//! and the exact brute-force optimum.
//!
//! Conventions used throughout the crate:
//! - vertices are 1-indexed; edge `e` joins vertices `e` and `e+1`;
//! - a task with start `s` and end `t` (`s < t`) uses edges `s ..= t-1`;
//! - bottleneck comparisons use the order key `(capacity, edge index)`,
//!   which is a strict total order even when capacity values tie. Two
//!   bottlenecks compare equal iff they are the same edge.

use crate::rational::{rat_serde, Rat};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub type TaskId = u64;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed instance document: {0}")]
    Malformed(String),
    #[error("task {id}: start {s} must be smaller than end {t}")]
    BadPath { id: TaskId, s: usize, t: usize },
    #[error("task {id}: endpoint {v} outside vertex range 1..={max}")]
    OutOfRange { id: TaskId, v: usize, max: usize },
    #[error("task {id}: demand must be positive")]
    NonPositiveDemand { id: TaskId },
    #[error("task {id}: profit must be non-negative")]
    NegativeProfit { id: TaskId },
    #[error("edge {edge}: capacity must be positive")]
    NonPositiveCapacity { edge: usize },
    #[error("duplicate task id {0}")]
    DuplicateId(TaskId),
    #[error("instance has {tasks} tasks, exceeding the oracle guard limit {limit}")]
    GuardExceeded { tasks: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub s: usize,
    pub t: usize,
    #[serde(with = "rat_serde")]
    pub d: Rat,
    #[serde(with = "rat_serde")]
    pub w: Rat,
}

impl Task {
    /// Edge indices of the task path, `s ..= t-1`.
    pub fn edges(&self) -> std::ops::RangeInclusive<usize> {
        self.s..=self.t - 1
    }

    pub fn uses_edge(&self, e: usize) -> bool {
        self.s <= e && e < self.t
    }
}

/// A path with positive edge capacities and a task set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(with = "rat_vec_serde")]
    pub capacities: Vec<Rat>,
    pub tasks: Vec<Task>,
}

mod rat_vec_serde {
    use super::*;
    use serde::de::Error as DeError;
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], ser: S) -> Result<S::Ok, S::Error> {
        struct One<'a>(&'a Rat);
        impl Serialize for One<'_> {
            fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                rat_serde::serialize(self.0, ser)
            }
        }
        let mut seq = ser.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&One(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Rat>, D::Error> {
        let vals = Vec::<serde_json::Value>::deserialize(de)?;
        vals.iter().map(|v| rat_serde::from_value(v).map_err(D::Error::custom)).collect()
    }
}

/// Strict total order on bottleneck levels. `Finite` compares by
/// `(capacity, edge index)`; the dummy levels sit below and above everything.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum LevelKey {
    Bottom,
    Finite { cap: Rat, edge: usize },
    Top,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottleneckInfo {
    pub b: Rat,
    pub e: usize,
}

impl BottleneckInfo {
    pub fn key(&self) -> LevelKey {
        LevelKey::Finite { cap: self.b.clone(), edge: self.e }
    }
}

impl Instance {
    pub fn num_edges(&self) -> usize {
        self.capacities.len()
    }

    pub fn num_vertices(&self) -> usize {
        if self.capacities.is_empty() {
            0
        } else {
            self.capacities.len() + 1
        }
    }

    pub fn cap(&self, e: usize) -> &Rat {
        &self.capacities[e - 1]
    }

    pub fn task_by_id(&self, id: TaskId) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Min-capacity edge of an explicit edge range, smallest index on ties.
    pub fn bottleneck_of_range(&self, s: usize, t: usize) -> BottleneckInfo {
        assert!(s < t, "path must be nonempty");
        let mut best_e = s;
        for e in s + 1..t {
            if self.cap(e) < self.cap(best_e) {
                best_e = e;
            }
        }
        BottleneckInfo { b: self.cap(best_e).clone(), e: best_e }
    }

    pub fn bottleneck(&self, task: &Task) -> BottleneckInfo {
        self.bottleneck_of_range(task.s, task.t)
    }

    pub fn total_weight(&self, ids: &[TaskId]) -> Rat {
        let mut w = Rat::zero();
        for id in ids {
            w += &self.task_by_id(*id).expect("unknown task id").w;
        }
        w
    }
}

/// `d(i) >= delta * b(i)`, compared on raw numeric values.
pub fn is_delta_large(task: &Task, bottleneck: &BottleneckInfo, delta: &Rat) -> bool {
    assert!(
        delta > &Rat::zero() && delta <= &Rat::from_integer(1.into()),
        "delta must be in (0, 1]"
    );
    task.d >= delta * &bottleneck.b
}

/// Parses an instance document, validates it, and discards tasks with
/// `d(i) > b(i)`. Task ids stay stable; tasks are kept sorted by id.
pub fn load_instance(doc: &str) -> Result<Instance, ModelError> {
    let mut inst: Instance =
        serde_json::from_str(doc).map_err(|e| ModelError::Malformed(e.to_string()))?;
    validate_and_trim(&mut inst)?;
    Ok(inst)
}

pub fn serialize_instance(inst: &Instance) -> String {
    serde_json::to_string_pretty(inst).expect("instance serialization cannot fail")
}

fn validate_and_trim(inst: &mut Instance) -> Result<(), ModelError> {
    for (idx, cap) in inst.capacities.iter().enumerate() {
        if !crate::rational::is_positive(cap) {
            return Err(ModelError::NonPositiveCapacity { edge: idx + 1 });
        }
    }
    let max_v = inst.num_vertices();
    let mut seen = std::collections::BTreeSet::new();
    for t in &inst.tasks {
        if !seen.insert(t.id) {
            return Err(ModelError::DuplicateId(t.id));
        }
        if t.s >= t.t {
            return Err(ModelError::BadPath { id: t.id, s: t.s, t: t.t });
        }
        if t.s < 1 || t.t > max_v {
            let v = if t.s < 1 { t.s } else { t.t };
            return Err(ModelError::OutOfRange { id: t.id, v, max: max_v });
        }
        if t.d <= Rat::zero() {
            return Err(ModelError::NonPositiveDemand { id: t.id });
        }
        if t.w < Rat::zero() {
            return Err(ModelError::NegativeProfit { id: t.id });
        }
    }
    // Discard tasks whose demand exceeds their bottleneck capacity.
    let caps = inst.capacities.clone();
    let view = Instance { capacities: caps, tasks: vec![] };
    inst.tasks.retain(|t| t.d <= view.bottleneck_of_range(t.s, t.t).b);
    inst.tasks.sort_by_key(|t| t.id);
    Ok(())
}

/// How each original vertex maps into the preprocessed instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexImage {
    Dropped,
    /// Contiguous copy range (single vertex when no split happened).
    Copies { first: usize, last: usize },
}

#[derive(Debug, Clone)]
pub struct PreprocessMap {
    pub vertex_image: Vec<VertexImage>,
    /// New edge indices inserted by vertex splitting.
    pub inserted_edges: Vec<usize>,
    pub sentinel_capacity: Option<Rat>,
}

impl PreprocessMap {
    pub fn image_of(&self, orig_vertex: usize) -> &VertexImage {
        &self.vertex_image[orig_vertex - 1]
    }
}

/// Rewrites the instance so that every vertex is the start or the end
/// vertex of exactly one task: vertices hosting no endpoint are contracted
/// (adjacent edges merged at their minimum capacity), vertices hosting
/// several endpoints are split into a chain of copies joined by edges of
/// capacity `max_e u_e + sum_i d(i)`, which never bind and are never
/// bottleneck edges.
///
/// Within a split vertex, copies for tasks ending there come before copies
/// for tasks starting there, each block ordered by task id.
pub fn preprocess(inst: &Instance) -> (Instance, PreprocessMap) {
    let n = inst.num_vertices();
    if inst.tasks.is_empty() {
        let map = PreprocessMap {
            vertex_image: vec![VertexImage::Dropped; n],
            inserted_edges: vec![],
            sentinel_capacity: None,
        };
        return (Instance { capacities: vec![], tasks: vec![] }, map);
    }

    // Endpoint bookkeeping: (ending task ids, starting task ids) per vertex.
    let mut ends: Vec<Vec<TaskId>> = vec![vec![]; n + 1];
    let mut starts: Vec<Vec<TaskId>> = vec![vec![]; n + 1];
    for t in &inst.tasks {
        starts[t.s].push(t.id);
        ends[t.t].push(t.id);
    }
    for v in 1..=n {
        starts[v].sort_unstable();
        ends[v].sort_unstable();
    }

    // Phase 1: keep only vertices hosting at least one endpoint. The edge
    // between two consecutive kept vertices takes the minimum capacity of
    // the original span; spans before the first / after the last kept
    // vertex are unused by every task and disappear.
    let kept: Vec<usize> = (1..=n).filter(|&v| !starts[v].is_empty() || !ends[v].is_empty()).collect();
    let mut merged_caps = Vec::with_capacity(kept.len().saturating_sub(1));
    for win in kept.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mut m = inst.cap(a).clone();
        for e in a + 1..b {
            if inst.cap(e) < &m {
                m = inst.cap(e).clone();
            }
        }
        merged_caps.push(m);
    }
    let phase1_index: BTreeMap<usize, usize> =
        kept.iter().enumerate().map(|(i, &v)| (v, i + 1)).collect();

    // Phase 2: split multi-endpoint vertices into chains of copies.
    let max_cap = inst.capacities.iter().max().cloned().unwrap_or_else(Rat::zero);
    let total_demand: Rat = inst.tasks.iter().map(|t| t.d.clone()).sum();
    let sentinel = &max_cap + &total_demand;

    let mut new_caps: Vec<Rat> = Vec::new();
    let mut inserted_edges: Vec<usize> = Vec::new();
    let mut vertex_image = vec![VertexImage::Dropped; n];
    let mut start_copy: BTreeMap<TaskId, usize> = BTreeMap::new();
    let mut end_copy: BTreeMap<TaskId, usize> = BTreeMap::new();

    let mut next_vertex = 0usize;
    for (pos, &v) in kept.iter().enumerate() {
        if pos > 0 {
            // Edge from the previous kept vertex's last copy.
            new_caps.push(merged_caps[pos - 1].clone());
        }
        let first = next_vertex + 1;
        // Ending tasks take the left copies, starting tasks the right ones.
        for &id in &ends[v] {
            next_vertex += 1;
            if next_vertex > first {
                new_caps.push(sentinel.clone());
                inserted_edges.push(new_caps.len());
            }
            end_copy.insert(id, next_vertex);
        }
        for &id in &starts[v] {
            next_vertex += 1;
            if next_vertex > first {
                new_caps.push(sentinel.clone());
                inserted_edges.push(new_caps.len());
            }
            start_copy.insert(id, next_vertex);
        }
        vertex_image[v - 1] = VertexImage::Copies { first, last: next_vertex };
    }
    let _ = phase1_index;

    let mut new_tasks: Vec<Task> = inst
        .tasks
        .iter()
        .map(|t| Task {
            id: t.id,
            s: start_copy[&t.id],
            t: end_copy[&t.id],
            d: t.d.clone(),
            w: t.w.clone(),
        })
        .collect();
    new_tasks.sort_by_key(|t| t.id);

    let out = Instance { capacities: new_caps, tasks: new_tasks };
    debug_assert!(is_preprocessed(&out));
    let map = PreprocessMap {
        vertex_image,
        inserted_edges: inserted_edges.clone(),
        sentinel_capacity: if inserted_edges.is_empty() { None } else { Some(sentinel) },
    };
    (out, map)
}

/// True iff every vertex is the start or end vertex of exactly one task.
pub fn is_preprocessed(inst: &Instance) -> bool {
    if inst.tasks.is_empty() {
        return inst.capacities.is_empty();
    }
    let n = inst.num_vertices();
    let mut count = vec![0usize; n + 1];
    for t in &inst.tasks {
        count[t.s] += 1;
        count[t.t] += 1;
    }
    (1..=n).all(|v| count[v] == 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeLoad {
    pub edge: usize,
    #[serde(with = "rat_serde")]
    pub load: Rat,
    #[serde(with = "rat_serde")]
    pub capacity: Rat,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub first_violation: Option<usize>,
    pub edges: Vec<EdgeLoad>,
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.edges {
            writeln!(
                f,
                "e{}: {}/{} {}",
                e.edge,
                crate::rational::rat_to_string(&e.load),
                crate::rational::rat_to_string(&e.capacity),
                if e.ok { "ok" } else { "VIOLATED" }
            )?;
        }
        Ok(())
    }
}

/// Per-edge load report for a task subset; feasible iff every edge holds
/// `d(T' \cap T_e) <= u_e`.
pub fn check_feasible(inst: &Instance, subset: &[TaskId]) -> FeasibilityReport {
    let mut loads = vec![Rat::zero(); inst.num_edges() + 1];
    for id in subset {
        let t = inst.task_by_id(*id).expect("unknown task id");
        for e in t.edges() {
            loads[e] += &t.d;
        }
    }
    let mut edges = Vec::with_capacity(inst.num_edges());
    let mut first_violation = None;
    for e in 1..=inst.num_edges() {
        let ok = &loads[e] <= inst.cap(e);
        if !ok && first_violation.is_none() {
            first_violation = Some(e);
        }
        edges.push(EdgeLoad {
            edge: e,
            load: loads[e].clone(),
            capacity: inst.cap(e).clone(),
            ok,
        });
    }
    FeasibilityReport { feasible: first_violation.is_none(), first_violation, edges }
}

pub const DEFAULT_EXACT_OPT_LIMIT: usize = 20;

/// Exact maximum-weight feasible subset by branch-and-prune enumeration.
/// Ties broken by lexicographically smallest id set. Guarded by a task
/// count limit since the search is exponential.
pub fn exact_opt(
    inst: &Instance,
    limit: usize,
) -> Result<(Vec<TaskId>, Rat), ModelError> {
    if inst.tasks.len() > limit {
        return Err(ModelError::GuardExceeded { tasks: inst.tasks.len(), limit });
    }
    let m = inst.num_edges();
    let mut loads = vec![Rat::zero(); m + 1];
    let mut chosen: Vec<TaskId> = Vec::new();
    let mut best: (Rat, Vec<TaskId>) = (Rat::zero(), vec![]);
    // Suffix weight sums allow pruning branches that cannot beat the best.
    let mut suffix = vec![Rat::zero(); inst.tasks.len() + 1];
    for i in (0..inst.tasks.len()).rev() {
        suffix[i] = &suffix[i + 1] + &inst.tasks[i].w;
    }
    fn go(
        inst: &Instance,
        i: usize,
        weight: &Rat,
        loads: &mut Vec<Rat>,
        chosen: &mut Vec<TaskId>,
        best: &mut (Rat, Vec<TaskId>),
        suffix: &[Rat],
    ) {
        if weight > &best.0 {
            *best = (weight.clone(), chosen.clone());
        } else if weight == &best.0 && !chosen.is_empty() {
            if best.1.is_empty() && weight == &Rat::zero() {
                // Keep the empty set: it is lexicographically smallest.
            } else if *chosen < best.1 {
                *best = (weight.clone(), chosen.clone());
            }
        }
        if i == inst.tasks.len() || weight.clone() + &suffix[i] < best.0 {
            return;
        }
        let task = &inst.tasks[i];
        // Branch: include (if it fits), then exclude. Trying inclusion
        // first reaches heavy sets early and the id-sorted order makes the
        // first max-weight set found lexicographically smallest.
        let fits = task.edges().all(|e| &loads[e] + &task.d <= *inst.cap(e));
        if fits {
            for e in task.edges() {
                loads[e] += &task.d;
            }
            chosen.push(task.id);
            let w2 = weight + &task.w;
            go(inst, i + 1, &w2, loads, chosen, best, suffix);
            chosen.pop();
            for e in task.edges() {
                loads[e] -= &task.d;
            }
        }
        go(inst, i + 1, weight, loads, chosen, best, suffix);
    }
    go(inst, 0, &Rat::zero(), &mut loads, &mut chosen, &mut best, &suffix);
    Ok((best.1, best.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    pub(crate) fn i1() -> Instance {
        load_instance(
            r#"{"capacities":[4,6,5,2],
                "tasks":[{"id":1,"s":1,"t":3,"d":2,"w":3},
                         {"id":2,"s":2,"t":4,"d":3,"w":4},
                         {"id":3,"s":3,"t":5,"d":2,"w":2}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn loads_i1_with_expected_bottlenecks() {
        let inst = i1();
        assert_eq!(inst.tasks.len(), 3);
        let b1 = inst.bottleneck(&inst.tasks[0]);
        let b2 = inst.bottleneck(&inst.tasks[1]);
        let b3 = inst.bottleneck(&inst.tasks[2]);
        assert_eq!((b1.b, b1.e), (rat_int(4), 1));
        assert_eq!((b2.b, b2.e), (rat_int(5), 3));
        assert_eq!((b3.b, b3.e), (rat_int(2), 4));
    }

    #[test]
    fn discards_task_with_demand_over_bottleneck() {
        let inst = load_instance(
            r#"{"capacities":[4,6,5,2],
                "tasks":[{"id":9,"s":4,"t":5,"d":9,"w":1}]}"#,
        )
        .unwrap();
        assert!(inst.tasks.is_empty());
    }

    #[test]
    fn empty_task_list_is_valid() {
        let inst = load_instance(r#"{"capacities":[1,2],"tasks":[]}"#).unwrap();
        assert_eq!(inst.num_edges(), 2);
        assert!(inst.tasks.is_empty());
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(matches!(load_instance("{"), Err(ModelError::Malformed(_))));
        assert!(matches!(
            load_instance(r#"{"capacities":[1],"tasks":[{"id":1,"s":2,"t":2,"d":1,"w":0}]}"#),
            Err(ModelError::BadPath { .. })
        ));
        assert!(matches!(
            load_instance(r#"{"capacities":[0],"tasks":[]}"#),
            Err(ModelError::NonPositiveCapacity { edge: 1 })
        ));
        assert!(matches!(
            load_instance(r#"{"capacities":[2],"tasks":[{"id":1,"s":1,"t":2,"d":0,"w":0}]}"#),
            Err(ModelError::NonPositiveDemand { id: 1 })
        ));
    }

    #[test]
    fn accepts_rational_strings_and_decimals() {
        let inst = load_instance(
            r#"{"capacities":["7/2",2.5],"tasks":[{"id":1,"s":1,"t":2,"d":"1/2","w":0.25}]}"#,
        )
        .unwrap();
        assert_eq!(inst.capacities[0], rat(7, 2));
        assert_eq!(inst.capacities[1], rat(5, 2));
        assert_eq!(inst.tasks[0].d, rat(1, 2));
        assert_eq!(inst.tasks[0].w, rat(1, 4));
    }

    #[test]
    fn bottleneck_examples() {
        let inst = i1();
        let t2 = &inst.tasks[1];
        let b = inst.bottleneck(t2);
        assert_eq!((b.b, b.e), (rat_int(5), 3));
        let single = inst.bottleneck_of_range(4, 5);
        assert_eq!((single.b, single.e), (rat_int(2), 4));
        // Equal capacities: smallest edge index attains the minimum.
        let tie = Instance { capacities: vec![rat_int(3), rat_int(3)], tasks: vec![] };
        let b = tie.bottleneck_of_range(1, 3);
        assert_eq!(b.e, 1);
    }

    #[test]
    fn delta_large_boundary() {
        let inst = i1();
        let t1 = &inst.tasks[0];
        let b1 = inst.bottleneck(t1);
        assert!(is_delta_large(t1, &b1, &rat(1, 2)));
        assert!(!is_delta_large(t1, &b1, &rat(3, 4)));
        // delta = d/b is the boundary and counts as large.
        assert!(is_delta_large(t1, &b1, &(&t1.d / &b1.b)));
    }

    #[test]
    fn feasibility_report_matches_per_edge_sums() {
        let inst = i1();
        let rep = check_feasible(&inst, &[1, 2, 3]);
        assert!(rep.feasible);
        let loads: Vec<Rat> = rep.edges.iter().map(|e| e.load.clone()).collect();
        assert_eq!(loads, vec![rat_int(2), rat_int(5), rat_int(5), rat_int(2)]);

        let empty = check_feasible(&inst, &[]);
        assert!(empty.feasible);
        assert!(empty.edges.iter().all(|e| e.load == Rat::zero()));
    }

    #[test]
    fn infeasibility_is_reported_with_edge() {
        // A clone of task 2 overloads edge 3 (3 + 3 = 6 > 5).
        let mut inst = i1();
        let mut clone = inst.tasks[1].clone();
        clone.id = 4;
        inst.tasks.push(clone);
        inst.tasks.sort_by_key(|t| t.id);
        let rep = check_feasible(&inst, &[2, 4]);
        assert!(!rep.feasible);
        assert_eq!(rep.first_violation, Some(3));
    }

    #[test]
    fn exact_opt_on_i1() {
        let inst = i1();
        let (ids, w) = exact_opt(&inst, DEFAULT_EXACT_OPT_LIMIT).unwrap();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(w, rat_int(9));
    }

    #[test]
    fn exact_opt_with_tightened_edge() {
        let mut inst = i1();
        inst.capacities[2] = rat_int(4);
        let (ids, w) = exact_opt(&inst, DEFAULT_EXACT_OPT_LIMIT).unwrap();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(w, rat_int(7));
    }

    #[test]
    fn exact_opt_empty_and_guard() {
        let inst = Instance { capacities: vec![], tasks: vec![] };
        let (ids, w) = exact_opt(&inst, DEFAULT_EXACT_OPT_LIMIT).unwrap();
        assert!(ids.is_empty());
        assert_eq!(w, Rat::zero());
        let big = i1();
        assert!(matches!(exact_opt(&big, 2), Err(ModelError::GuardExceeded { .. })));
    }

    #[test]
    fn preprocess_splits_shared_vertex() {
        let inst = i1();
        let (out, map) = preprocess(&inst);
        // Vertex 3 hosted two endpoints; everything else stays.
        assert_eq!(out.capacities.len(), 5);
        assert_eq!(out.capacities[2], rat_int(13)); // 6 + (2+3+2)
        assert_eq!(map.inserted_edges, vec![3]);
        assert_eq!(map.sentinel_capacity, Some(rat_int(13)));
        assert!(is_preprocessed(&out));
        // t1 ends at the left copy, t3 starts at the right copy.
        let t1 = out.task_by_id(1).unwrap();
        let t3 = out.task_by_id(3).unwrap();
        assert_eq!(t1.t + 1, t3.s);
        assert_eq!(*map.image_of(3), VertexImage::Copies { first: t1.t, last: t3.s });
    }

    #[test]
    fn preprocess_is_identity_on_fixed_points() {
        let inst = i1();
        let (once, _) = preprocess(&inst);
        let (twice, map) = preprocess(&once);
        assert_eq!(once, twice);
        assert!(map.inserted_edges.is_empty());
        assert!(map
            .vertex_image
            .iter()
            .enumerate()
            .all(|(i, img)| *img == VertexImage::Copies { first: i + 1, last: i + 1 }));
    }

    #[test]
    fn preprocess_expands_four_endpoint_vertex() {
        // Four tasks meeting at vertex 2: two ending, two starting.
        let inst = load_instance(
            r#"{"capacities":[10,10],
                "tasks":[{"id":1,"s":1,"t":2,"d":1,"w":1},
                         {"id":2,"s":1,"t":2,"d":1,"w":1},
                         {"id":3,"s":2,"t":3,"d":1,"w":1},
                         {"id":4,"s":2,"t":3,"d":1,"w":1}]}"#,
        )
        .unwrap();
        let (out, _) = preprocess(&inst);
        assert!(is_preprocessed(&out));
        // Vertex 2 became a chain of 4 copies; vertices 1 and 3 got 2 each.
        assert_eq!(out.num_vertices(), 8);
        // Ordering inside the split: enders (ids 1,2) then starters (ids 3,4).
        let ends: Vec<usize> = [1u64, 2].iter().map(|id| out.task_by_id(*id).unwrap().t).collect();
        let starts: Vec<usize> = [3u64, 4].iter().map(|id| out.task_by_id(*id).unwrap().s).collect();
        assert!(ends[0] < ends[1] && ends[1] < starts[0] && starts[0] < starts[1]);
    }

    #[test]
    fn preprocess_contracts_unused_vertices() {
        // Only one task in the middle; outer vertices have no endpoints.
        let inst = load_instance(
            r#"{"capacities":[4,6,5,2],"tasks":[{"id":1,"s":2,"t":4,"d":3,"w":1}]}"#,
        )
        .unwrap();
        let (out, map) = preprocess(&inst);
        assert!(is_preprocessed(&out));
        assert_eq!(out.num_edges(), 1);
        assert_eq!(out.capacities[0], rat_int(5)); // min(6, 5)
        assert_eq!(*map.image_of(1), VertexImage::Dropped);
        assert_eq!(*map.image_of(5), VertexImage::Dropped);
        let b = out.bottleneck(&out.tasks[0]);
        assert_eq!(b.b, rat_int(5));
    }

    #[test]
    fn preprocess_preserves_exact_optimum_on_samples() {
        for inst in [i1(), {
            let mut x = i1();
            x.capacities[2] = rat_int(4);
            x
        }] {
            let before = exact_opt(&inst, DEFAULT_EXACT_OPT_LIMIT).unwrap().1;
            let (pre, _) = preprocess(&inst);
            let after = exact_opt(&pre, DEFAULT_EXACT_OPT_LIMIT).unwrap().1;
            assert_eq!(before, after);
        }
    }

    #[test]
    fn inserted_edges_are_never_bottlenecks() {
        let inst = i1();
        let (out, map) = preprocess(&inst);
        for t in &out.tasks {
            let b = out.bottleneck(t);
            assert!(!map.inserted_edges.contains(&b.e));
        }
    }

    #[test]
    fn level_keys_are_total_and_edge_identified() {
        let a = LevelKey::Finite { cap: rat_int(3), edge: 1 };
        let b = LevelKey::Finite { cap: rat_int(3), edge: 2 };
        let c = LevelKey::Finite { cap: rat_int(4), edge: 1 };
        assert!(a < b && b < c);
        assert!(LevelKey::Bottom < a && c < LevelKey::Top);
        assert_eq!(a, LevelKey::Finite { cap: rat_int(3), edge: 1 });
    }

    #[test]
    fn instance_round_trips_through_json() {
        let inst = i1();
        let doc = serialize_instance(&inst);
        let back = load_instance(&doc).unwrap();
        assert_eq!(inst, back);
    }
}
