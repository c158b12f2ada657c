//! Sequential recourse on a K-nearest-neighbor data graph.
//!
//! Node 0 is the subject. Paths leave it, cross unfavorable nodes only, and
//! stop at the first favorable node. Edge weights are the Mahalanobis cost
//! of the step under a point estimate ([`RecourseGraph::assign_weights`]) or
//! the worst case over a confidence set
//! ([`RecourseGraph::assign_worst_case_weights`]). The second choice
//! over-estimates the coupled problem where one matrix prices the whole path;
//! [`minmax_flow_exhaustive`] solves that one by enumeration for small graphs.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{max_over_confidence, ConicError};
use crate::cost::{quad_form, ConfidenceSetSpec, CostError, CostMatrix, FeatureVector};

/// Default neighbor count.
pub const DEFAULT_K: usize = 10;
/// Default edge cap of enumerated paths.
pub const DEFAULT_PATH_CAP: usize = 8;
/// Enumerated paths allowed before giving up.
pub const ENUMERATION_BUDGET: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no favorable node is reachable from the subject")]
    Unreachable,
    #[error("more than {budget} paths to enumerate")]
    BudgetExceeded { budget: usize },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct RecourseGraph {
    nodes: Vec<FeatureVector>,
    positive: Vec<bool>,
    k: usize,
    edges: Vec<Edge>,
    /// Edge ids leaving each node, sorted by destination.
    out: Vec<Vec<usize>>,
}

impl RecourseGraph {
    /// kNN graph under Euclidean distance over `x0` (node 0, unfavorable)
    /// followed by `points`. Ties in distance go to the lower node index.
    /// With `symmetrize`, the reverse of every edge is added as well.
    /// Weights start as squared Euclidean lengths.
    pub fn build(
        x0: &FeatureVector,
        points: &[(FeatureVector, bool)],
        k: usize,
        symmetrize: bool,
    ) -> Result<Self, GraphError> {
        let mut nodes = Vec::with_capacity(points.len() + 1);
        let mut positive = Vec::with_capacity(points.len() + 1);
        nodes.push(x0.clone());
        positive.push(false);
        for (x, p) in points {
            x.check_dim(x0)?;
            nodes.push(x.clone());
            positive.push(*p);
        }
        let n = nodes.len();
        if k == 0 || k >= n {
            return Err(GraphError::InvalidArgument(format!("K = {k} needs 1 ≤ K < {n} nodes")));
        }
        let neighbors: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = nodes[i].as_vector();
                let mut others: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| ((nodes[j].as_vector() - xi).norm_squared(), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.truncate(k);
                others.into_iter().map(|(_, j)| j).collect()
            })
            .collect();
        let mut pairs = BTreeSet::new();
        for (i, nb) in neighbors.iter().enumerate() {
            for &j in nb {
                pairs.insert((i, j));
                if symmetrize {
                    pairs.insert((j, i));
                }
            }
        }
        let edges: Vec<Edge> = pairs
            .into_iter()
            .map(|(src, dst)| Edge {
                src,
                dst,
                weight: (nodes[src].as_vector() - nodes[dst].as_vector()).norm_squared(),
            })
            .collect();
        let mut out = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            out[e.src].push(id);
        }
        Ok(Self {
            nodes,
            positive,
            k,
            edges,
            out,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node(&self, i: usize) -> &FeatureVector {
        &self.nodes[i]
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.positive[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge `src → dst`, if present.
    pub fn edge(&self, src: usize, dst: usize) -> Option<&Edge> {
        self.out[src].iter().map(|&id| &self.edges[id]).find(|e| e.dst == dst)
    }

    fn step(&self, e: &Edge) -> DVector<f64> {
        self.nodes[e.dst].as_vector() - self.nodes[e.src].as_vector()
    }

    /// `w_ij = (xᵢ − xⱼ)ᵀ A (xᵢ − xⱼ)`.
    pub fn assign_weights(&mut self, a: &CostMatrix) -> Result<(), GraphError> {
        if a.dim() != self.nodes[0].dim() {
            return Err(CostError::DimensionMismatch {
                expected: self.nodes[0].dim(),
                found: a.dim(),
            }
            .into());
        }
        let weights: Vec<f64> = self.edges.par_iter().map(|e| quad_form(a.as_matrix(), &self.step(e))).collect();
        for (e, w) in self.edges.iter_mut().zip(weights) {
            e.weight = w;
        }
        Ok(())
    }

    /// `w̄_ij = max_{A ∈ U_P} (xᵢ − xⱼ)ᵀ A (xᵢ − xⱼ)`. Both directions of an
    /// edge share one solve.
    pub fn assign_worst_case_weights(&mut self, spec: &ConfidenceSetSpec) -> Result<(), GraphError> {
        let mut unique: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.src.min(e.dst), e.src.max(e.dst))).collect();
        unique.sort_unstable();
        unique.dedup();
        let values: Vec<f64> = unique
            .par_iter()
            .map(|&(i, j)| {
                let u = self.nodes[j].as_vector() - self.nodes[i].as_vector();
                max_over_confidence(&(&u * u.transpose()), spec).map(|r| r.value.max(0.0))
            })
            .collect::<Result<_, _>>()?;
        for e in &mut self.edges {
            let key = (e.src.min(e.dst), e.src.max(e.dst));
            let pos = unique.binary_search(&key).expect("edge listed");
            e.weight = values[pos];
        }
        Ok(())
    }

    /// Node-link form for the UI and debugging.
    pub fn to_node_link(&self) -> NodeLink {
        NodeLink {
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, x)| NodeLinkNode {
                    id,
                    class: u8::from(self.positive[id]),
                    features: x.as_slice().to_vec(),
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLinkNode {
    pub id: usize,
    pub class: u8,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLink {
    pub nodes: Vec<NodeLinkNode>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialPlan {
    /// Node indices from the subject (0) to the terminal.
    pub path: Vec<usize>,
    /// Always 1: only favorable nodes terminate a path.
    pub terminal_class: u8,
    pub path_cost: f64,
    pub edge_costs: Vec<f64>,
}

impl SequentialPlan {
    pub fn terminal(&self) -> usize {
        *self.path.last().expect("paths are nonempty")
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.path.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // min-heap on (dist, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest path from node 0 to a favorable node whose interior nodes are
/// all unfavorable. Favorable nodes are never expanded. Ties go to the lower
/// terminal index.
pub fn shortest_sequential_recourse(graph: &RecourseGraph) -> Result<SequentialPlan, GraphError> {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[0] = 0.0;
    heap.push(HeapItem { dist: 0.0, node: 0 });
    while let Some(HeapItem { dist: d, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if graph.positive[node] && node != 0 {
            continue;
        }
        for &id in &graph.out[node] {
            let e = &graph.edges[id];
            if e.dst == 0 {
                continue;
            }
            let nd = d + e.weight;
            if nd < dist[e.dst] {
                dist[e.dst] = nd;
                prev[e.dst] = Some(id);
                heap.push(HeapItem { dist: nd, node: e.dst });
            }
        }
    }
    let terminal = (1..n)
        .filter(|&i| graph.positive[i] && dist[i].is_finite())
        .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
        .ok_or(GraphError::Unreachable)?;
    let mut ids = Vec::new();
    let mut at = terminal;
    while let Some(id) = prev[at] {
        ids.push(id);
        at = graph.edges[id].src;
    }
    ids.reverse();
    let mut path = vec![0];
    path.extend(ids.iter().map(|&id| graph.edges[id].dst));
    let edge_costs: Vec<f64> = ids.iter().map(|&id| graph.edges[id].weight).collect();
    Ok(SequentialPlan {
        path,
        terminal_class: 1,
        path_cost: edge_costs.iter().sum(),
        edge_costs,
    })
}

/// Path minimizing `max_{A ∈ U_P} Σ_edges (xᵢ − xⱼ)ᵀ A (xᵢ − xⱼ)` among simple
/// paths of at most `cap` edges, found by depth-first enumeration.
///
/// Partial paths are pruned with `Σ uᵀ A u` for matrices `A` already returned
/// as maximizers: these are members of the set, so the sum bounds the path's
/// worst case from below and only grows as the path extends.
/// `edge_costs` split the optimum along the path under its maximizer.
pub fn minmax_flow_exhaustive(
    graph: &RecourseGraph,
    spec: &ConfidenceSetSpec,
    cap: usize,
) -> Result<SequentialPlan, GraphError> {
    if cap == 0 {
        return Err(GraphError::InvalidArgument("path cap must be ≥ 1".into()));
    }
    let d = graph.nodes[0].dim();
    let mut search = MinMaxSearch {
        graph,
        spec,
        cap,
        witnesses: Vec::new(),
        best: None,
        visited: vec![false; graph.len()],
        path: vec![0],
        steps: Vec::new(),
        enumerated: 0,
    };
    search.visited[0] = true;
    search.descend(&DMatrix::zeros(d, d))?;
    let (value, path, argmax) = search.best.ok_or(GraphError::Unreachable)?;
    let edge_costs: Vec<f64> = path
        .windows(2)
        .map(|w| quad_form(&argmax, &(graph.nodes[w[1]].as_vector() - graph.nodes[w[0]].as_vector())))
        .collect();
    Ok(SequentialPlan {
        path,
        terminal_class: 1,
        path_cost: value,
        edge_costs,
    })
}

/// Max witnesses kept for the lower bound.
const WITNESS_LIMIT: usize = 16;

struct MinMaxSearch<'a> {
    graph: &'a RecourseGraph,
    spec: &'a ConfidenceSetSpec,
    cap: usize,
    witnesses: Vec<DMatrix<f64>>,
    best: Option<(f64, Vec<usize>, DMatrix<f64>)>,
    visited: Vec<bool>,
    path: Vec<usize>,
    steps: Vec<DVector<f64>>,
    enumerated: usize,
}

impl MinMaxSearch<'_> {
    fn lower_bound(&self, s: &DMatrix<f64>) -> f64 {
        self.witnesses
            .iter()
            .map(|a| a.dot(s))
            .fold(0.0, f64::max)
    }

    fn descend(&mut self, s: &DMatrix<f64>) -> Result<(), GraphError> {
        let node = *self.path.last().expect("nonempty");
        if self.steps.len() == self.cap {
            return Ok(());
        }
        let g = self.graph;
        for &id in &g.out[node] {
            let dst = g.edges[id].dst;
            if self.visited[dst] {
                continue;
            }
            let u = g.nodes[dst].as_vector() - g.nodes[node].as_vector();
            let s_next = s + &u * u.transpose();
            if let Some((best, _, _)) = &self.best {
                if self.lower_bound(&s_next) > best + 1e-9 * best.abs().max(1.0) {
                    continue;
                }
            }
            self.path.push(dst);
            self.steps.push(u);
            if g.positive[dst] {
                self.enumerated += 1;
                if self.enumerated > ENUMERATION_BUDGET {
                    return Err(GraphError::BudgetExceeded {
                        budget: ENUMERATION_BUDGET,
                    });
                }
                self.evaluate(&s_next)?;
            } else {
                self.visited[dst] = true;
                self.descend(&s_next)?;
                self.visited[dst] = false;
            }
            self.path.pop();
            self.steps.pop();
        }
        Ok(())
    }

    fn evaluate(&mut self, s: &DMatrix<f64>) -> Result<(), GraphError> {
        let r = max_over_confidence(s, self.spec)?;
        let argmax = r.argmax.into_matrix();
        if self.witnesses.len() == WITNESS_LIMIT {
            self.witnesses.remove(0);
        }
        self.witnesses.push(argmax.clone());
        let better = match &self.best {
            None => true,
            Some((v, p, _)) => r.value < *v - 1e-12 || (r.value <= *v + 1e-12 && self.path < *p),
        };
        if better {
            self.best = Some((r.value, self.path.clone(), argmax));
        }
        Ok(())
    }
}

/// Worst-case value of a whole path with one matrix pricing every step.
pub fn path_worst_case(graph: &RecourseGraph, path: &[usize], spec: &ConfidenceSetSpec) -> Result<f64, GraphError> {
    let d = graph.nodes[0].dim();
    let mut s = DMatrix::zeros(d, d);
    for w in path.windows(2) {
        let u = graph.nodes[w[1]].as_vector() - graph.nodes[w[0]].as_vector();
        s += &u * u.transpose();
    }
    Ok(max_over_confidence(&s, spec)?.value)
}

/// `1 − |E₁ ∩ E₂| / |E₁ ∪ E₂|` over the plans' edge sets.
pub fn jaccard_edges(p1: &SequentialPlan, p2: &SequentialPlan) -> f64 {
    let a = p1.edge_set();
    let b = p2.edge_set();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(&b).count() as f64 / union as f64
}
