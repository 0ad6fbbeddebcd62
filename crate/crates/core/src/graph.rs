//! Proximity graph built from two passes of Kruskal's algorithm.
//!
//! Pass one inserts every minimum-spanning-tree edge of the complete
//! distance graph. Pass two scans the remaining edges by increasing length
//! and inserts an edge only while both endpoint degrees stay below the
//! degree bound and the edge is no longer than `beta` times the average
//! MST edge length.

use crate::error::CoreError;
use crate::instance::Instance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelEdge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
    /// True when inserted in the first (MST) pass.
    pub mst: bool,
}

/// Node-weighted proximity graph over the basic areas. Node i corresponds
/// to basic area i; node weight is the activity index. Edge weights are
/// unit for cut purposes; `length` keeps the travel time for bookkeeping.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    n: usize,
    node_weight: Vec<f64>,
    edges: Vec<ModelEdge>,
    adjacency: Vec<Vec<usize>>,
    omega_avg: f64,
}

impl ModelGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_weight(&self, v: usize) -> f64 {
        self.node_weight[v]
    }

    pub fn edges(&self) -> &[ModelEdge] {
        &self.edges
    }

    /// Neighbors of `v`, ascending by node id.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Average length of the first-pass MST edges.
    pub fn omega_avg(&self) -> f64 {
        self.omega_avg
    }

    /// Debug export: one line per edge, "u v length mst_flag".
    pub fn write_edge_list<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(w, "{} {} {} {}", e.u, e.v, e.length, u8::from(e.mst))?;
        }
        Ok(())
    }

    /// Builds a graph directly from an explicit edge list (test helper and
    /// oracle support; no degree or length filtering).
    pub fn from_edges(
        n: usize,
        node_weight: Vec<f64>,
        edge_list: &[(usize, usize, f64)],
    ) -> ModelGraph {
        assert_eq!(node_weight.len(), n);
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v, length) in edge_list {
            assert!(u != v && u < n && v < n);
            let (u, v) = (u.min(v), u.max(v));
            edges.push(ModelEdge { u, v, length, mst: false });
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        let omega_avg = if edges.is_empty() {
            0.0
        } else {
            edges.iter().map(|e| e.length).sum::<f64>() / edges.len() as f64
        };
        ModelGraph { n, node_weight, edges, adjacency, omega_avg }
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
        true
    }
}

fn sort_edges(edges: &mut [(usize, usize, f64)]) {
    // Deterministic order: (length, min id, max id).
    edges.sort_by(|a, b| {
        let ka = (a.0.min(a.1), a.0.max(a.1));
        let kb = (b.0.min(b.1), b.0.max(b.1));
        a.2.partial_cmp(&b.2).expect("finite edge lengths").then(ka.cmp(&kb))
    });
}

/// Minimum spanning tree by Kruskal's algorithm, ties broken by
/// (length, min id, max id). Errors when the edges do not connect all
/// `n` nodes, naming one unreached component.
pub fn kruskal_mst(
    n: usize,
    weighted_edges: &[(usize, usize, f64)],
) -> Result<Vec<(usize, usize, f64)>, CoreError> {
    for &(u, v, length) in weighted_edges {
        if !length.is_finite() {
            return Err(CoreError::NonFiniteEdge { u, v, length });
        }
    }
    let mut edges = weighted_edges.to_vec();
    sort_edges(&mut edges);
    let mut uf = UnionFind::new(n);
    let mut mst = Vec::with_capacity(n.saturating_sub(1));
    for &(u, v, length) in &edges {
        if uf.union(u, v) {
            mst.push((u.min(v), u.max(v), length));
            if mst.len() + 1 == n {
                break;
            }
        }
    }
    if mst.len() + 1 < n && n > 0 {
        // Report the component not containing node 0.
        let root0 = uf.find(0);
        let component: Vec<usize> = (0..n).filter(|&v| uf.find(v) != root0).collect();
        let root_other = uf.find(component[0]);
        let component: Vec<usize> = (0..n).filter(|&v| uf.find(v) == root_other).collect();
        return Err(CoreError::GraphDisconnected { component });
    }
    Ok(mst)
}

/// Builds the proximity model from an instance: MST edges first, then the
/// remaining complete-graph edges in increasing length subject to the
/// degree bound `gamma` and the length bound `beta * omega_avg`.
pub fn build_model(instance: &Instance, beta: f64, gamma: usize) -> Result<ModelGraph, CoreError> {
    let n = instance.n();
    if n < 2 {
        return Err(CoreError::ModelTooSmall(n));
    }
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(CoreError::BadModelParameter { name: "beta", value: beta });
    }
    if gamma <= 1 {
        return Err(CoreError::BadModelParameter { name: "gamma", value: gamma as f64 });
    }

    // Candidate universe: the complete graph with travel times as lengths.
    struct Cand {
        length: f64,
        u: u32,
        v: u32,
        mst: bool,
    }
    let mut cands = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            let length = instance.travel_time(u, v);
            if !length.is_finite() {
                return Err(CoreError::NonFiniteEdge { u, v, length });
            }
            cands.push(Cand { length, u: u as u32, v: v as u32, mst: false });
        }
    }
    cands.sort_by(|a, b| {
        a.length
            .partial_cmp(&b.length)
            .expect("finite edge lengths")
            .then((a.u, a.v).cmp(&(b.u, b.v)))
    });

    // Pass one: Kruskal over the sorted candidates.
    let mut uf = UnionFind::new(n);
    let mut mst_len_sum = 0.0;
    let mut mst_count = 0usize;
    for c in cands.iter_mut() {
        if uf.union(c.u as usize, c.v as usize) {
            c.mst = true;
            mst_len_sum += c.length;
            mst_count += 1;
            if mst_count + 1 == n {
                break;
            }
        }
    }
    debug_assert_eq!(mst_count, n - 1);
    let omega_avg = mst_len_sum / mst_count as f64;
    let max_len = beta * omega_avg;

    // Pass two: rescan non-MST edges in the same order.
    let mut degree = vec![0usize; n];
    let mut edges: Vec<ModelEdge> = cands
        .iter()
        .filter(|c| c.mst)
        .map(|c| ModelEdge { u: c.u as usize, v: c.v as usize, length: c.length, mst: true })
        .collect();
    for e in &edges {
        degree[e.u] += 1;
        degree[e.v] += 1;
    }
    for c in &cands {
        if c.mst {
            continue;
        }
        if c.length > max_len {
            break;
        }
        let (u, v) = (c.u as usize, c.v as usize);
        if degree[u] < gamma && degree[v] < gamma {
            degree[u] += 1;
            degree[v] += 1;
            edges.push(ModelEdge { u, v, length: c.length, mst: false });
        }
    }

    let mut adjacency = vec![Vec::new(); n];
    for e in &edges {
        adjacency[e.u].push(e.v);
        adjacency[e.v].push(e.u);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    let node_weight = instance.areas().iter().map(|a| a.activity).collect();
    Ok(ModelGraph { n, node_weight, edges, adjacency, omega_avg })
}
