//! Sort-Tile-Recursive packed R-tree.
//!
//! The tree is bulk-loaded once and read-only afterwards. Each level is a flat
//! vector of nodes whose children are a contiguous range in the level below
//! (or in the entry array for leaves).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Range;

use thiserror::Error;

use crate::geometry::{distance, BoundingBox, Geometry, Point};

pub type ItemId = u64;

pub const DEFAULT_NODE_CAPACITY: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("node capacity must be at least 2, got {0}")]
    NodeCapacity(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEntry {
    pub item_id: ItemId,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    bbox: BoundingBox,
    children: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrTree {
    node_capacity: usize,
    entries: Vec<IndexEntry>,
    /// `levels[0]` are leaves; the last level holds the single root.
    levels: Vec<Vec<Node>>,
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// Returns a permutation of `boxes` and the runs (over the permuted order)
/// that become the nodes of the next level.
fn str_pack(boxes: &[BoundingBox], capacity: usize) -> (Vec<usize>, Vec<Range<usize>>) {
    let n = boxes.len();
    let leaves = n.div_ceil(capacity);
    let slices = (leaves as f64).sqrt().ceil() as usize;
    let slice_len = slices.max(1) * capacity;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_f64(boxes[a].center().x, boxes[b].center().x).then(a.cmp(&b)));
    let mut runs = Vec::with_capacity(leaves);
    for (s, slice) in order.chunks_mut(slice_len).enumerate() {
        slice.sort_by(|&a, &b| cmp_f64(boxes[a].center().y, boxes[b].center().y).then(a.cmp(&b)));
        let base = s * slice_len;
        let mut start = 0;
        while start < slice.len() {
            let end = (start + capacity).min(slice.len());
            runs.push(base + start..base + end);
            start = end;
        }
    }
    (order, runs)
}

fn cover(boxes: impl Iterator<Item = BoundingBox>) -> BoundingBox {
    boxes.reduce(|a, b| a.union(&b)).expect("non-empty run")
}

impl StrTree {
    pub fn build(entries: Vec<IndexEntry>, node_capacity: usize) -> Result<Self, IndexError> {
        if node_capacity < 2 {
            return Err(IndexError::NodeCapacity(node_capacity));
        }
        if entries.is_empty() {
            return Ok(StrTree {
                node_capacity,
                entries,
                levels: Vec::new(),
            });
        }

        let boxes: Vec<_> = entries.iter().map(|e| e.bbox).collect();
        let (order, runs) = str_pack(&boxes, node_capacity);
        let entries: Vec<_> = order.iter().map(|&i| entries[i]).collect();
        let mut level: Vec<Node> = runs
            .into_iter()
            .map(|r| Node {
                bbox: cover(entries[r.clone()].iter().map(|e| e.bbox)),
                children: r,
            })
            .collect();

        let mut levels = Vec::new();
        while level.len() > 1 {
            let boxes: Vec<_> = level.iter().map(|n| n.bbox).collect();
            let (order, runs) = str_pack(&boxes, node_capacity);
            let reordered: Vec<Node> = order.iter().map(|&i| level[i].clone()).collect();
            let parents = runs
                .into_iter()
                .map(|r| Node {
                    bbox: cover(reordered[r.clone()].iter().map(|n| n.bbox)),
                    children: r,
                })
                .collect();
            levels.push(reordered);
            level = parents;
        }
        levels.push(level);
        Ok(StrTree {
            node_capacity,
            entries,
            levels,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn node_capacity(&self) -> usize {
        self.node_capacity
    }

    /// Number of levels (0 for an empty tree, 1 when the root is a leaf).
    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn root_bbox(&self) -> Option<BoundingBox> {
        self.levels.last().map(|l| l[0].bbox)
    }

    pub fn root_child_count(&self) -> usize {
        self.levels.last().map_or(0, |l| l[0].children.len())
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    fn root(&self) -> Option<(usize, usize)> {
        if self.levels.is_empty() {
            None
        } else {
            Some((self.levels.len() - 1, 0))
        }
    }

    /// Ids of all entries whose bbox intersects `window`, ascending.
    pub fn query_bbox(&self, window: &BoundingBox) -> Vec<ItemId> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, usize)> = self.root().into_iter().collect();
        while let Some((level, idx)) = stack.pop() {
            let node = &self.levels[level][idx];
            if !node.bbox.intersects(window) {
                continue;
            }
            if level == 0 {
                out.extend(
                    self.entries[node.children.clone()]
                        .iter()
                        .filter(|e| e.bbox.intersects(window))
                        .map(|e| e.item_id),
                );
            } else {
                stack.extend(node.children.clone().map(|c| (level - 1, c)));
            }
        }
        out.sort_unstable();
        out
    }

    /// The `k` entries nearest to `origin` by exact distance, ascending, ties
    /// broken by ascending id.
    pub fn nearest_k<'g, F>(&self, origin: Point, k: usize, lookup: F) -> Vec<(ItemId, f64)>
    where
        F: Fn(ItemId) -> &'g Geometry,
    {
        let origin = Geometry::Point(origin);
        self.nearest_k_within(&origin, k, f64::INFINITY, |_| true, lookup)
    }

    /// Best-first kNN from an arbitrary geometry, restricted to accepted ids
    /// and to exact distance ≤ `max_distance`.
    pub fn nearest_k_within<'g, A, F>(
        &self,
        origin: &Geometry,
        k: usize,
        max_distance: f64,
        accept: A,
        lookup: F,
    ) -> Vec<(ItemId, f64)>
    where
        A: Fn(ItemId) -> bool,
        F: Fn(ItemId) -> &'g Geometry,
    {
        if k == 0 {
            return Vec::new();
        }
        self.nearest_iter(origin, max_distance, accept, lookup).take(k).collect()
    }

    /// Lazily yields accepted entries within `max_distance` of `origin` in
    /// ascending (distance, id) order.
    pub fn nearest_iter<'t, 'o, 'g, A, F>(
        &'t self,
        origin: &'o Geometry,
        max_distance: f64,
        accept: A,
        lookup: F,
    ) -> Nearest<'t, 'o, A, F>
    where
        A: Fn(ItemId) -> bool,
        F: Fn(ItemId) -> &'g Geometry,
    {
        let origin_box = origin.bbox();
        let mut heap = BinaryHeap::new();
        if let Some((level, idx)) = self.root() {
            heap.push(Candidate {
                dist: self.levels[level][idx].bbox.distance(&origin_box),
                kind: CandidateKind::Node { level, idx },
            });
        }
        Nearest {
            tree: self,
            origin,
            origin_box,
            max_distance,
            accept,
            lookup,
            heap,
        }
    }

    #[cfg(test)]
    fn check_invariants(&self) {
        for (l, level) in self.levels.iter().enumerate() {
            for node in level {
                assert!(node.children.len() <= self.node_capacity);
                if l == 0 {
                    for e in &self.entries[node.children.clone()] {
                        assert!(node.bbox.contains(&e.bbox));
                    }
                } else {
                    for c in &self.levels[l - 1][node.children.clone()] {
                        assert!(node.bbox.contains(&c.bbox));
                    }
                }
            }
        }
    }
}

pub struct Nearest<'t, 'o, A, F> {
    tree: &'t StrTree,
    origin: &'o Geometry,
    origin_box: BoundingBox,
    max_distance: f64,
    accept: A,
    lookup: F,
    heap: BinaryHeap<Candidate>,
}

impl<'g, A, F> Iterator for Nearest<'_, '_, A, F>
where
    A: Fn(ItemId) -> bool,
    F: Fn(ItemId) -> &'g Geometry,
{
    type Item = (ItemId, f64);

    fn next(&mut self) -> Option<(ItemId, f64)> {
        let tree = self.tree;
        while let Some(Candidate { dist, kind }) = self.heap.pop() {
            if dist > self.max_distance {
                self.heap.clear();
                return None;
            }
            match kind {
                CandidateKind::Item(id) => return Some((id, dist)),
                CandidateKind::Node { level: 0, idx } => {
                    for e in &tree.entries[tree.levels[0][idx].children.clone()] {
                        if !(self.accept)(e.item_id) {
                            continue;
                        }
                        let bound = e.bbox.distance(&self.origin_box);
                        if bound > self.max_distance {
                            continue;
                        }
                        let exact = distance(self.origin, (self.lookup)(e.item_id));
                        debug_assert!(bound <= exact + 1e-9, "bbox bound exceeds exact distance");
                        if exact <= self.max_distance {
                            self.heap.push(Candidate {
                                dist: exact,
                                kind: CandidateKind::Item(e.item_id),
                            });
                        }
                    }
                }
                CandidateKind::Node { level, idx } => {
                    for c in tree.levels[level][idx].children.clone() {
                        let d = tree.levels[level - 1][c].bbox.distance(&self.origin_box);
                        if d <= self.max_distance {
                            self.heap.push(Candidate {
                                dist: d,
                                kind: CandidateKind::Node { level: level - 1, idx: c },
                            });
                        }
                    }
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CandidateKind {
    Node { level: usize, idx: usize },
    Item(ItemId),
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    kind: CandidateKind,
}

impl Candidate {
    /// Nodes sort before items at equal distance so an equal-distance item
    /// with a smaller id hidden in a node is still found first.
    fn rank(&self) -> (u8, ItemId) {
        match self.kind {
            CandidateKind::Node { .. } => (0, 0),
            CandidateKind::Item(id) => (1, id),
        }
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Reversed: BinaryHeap is a max-heap and we want the smallest first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.rank().cmp(&self.rank()))
    }
}
