//! Evolutionary territory partitioner ("kated").
//!
//! Steady-state loop over a population of feasible partitions: tournament
//! selection on the penalized objective, a cut-oriented combine operator on
//! the overlay of two parents, boundary-patch mutation, and eviction of the
//! worst individual. Every operator repairs its output: contiguity first,
//! then rebalancing, then boundary local search.

use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::derive_seed;
use crate::error::CoreError;
use crate::eval::{balance_bound, cut_size, fitness};
use crate::graph::ModelGraph;
use crate::instance::Instance;
use crate::partition::Partition;
use crate::runlog::RunLogger;

/// A population member: a partition with its cached objective and cut.
#[derive(Debug, Clone)]
pub struct Individual {
    pub partition: Partition,
    pub fitness: f64,
    pub cut: usize,
}

impl Individual {
    pub fn evaluate(
        partition: Partition,
        instance: &Instance,
        graph: &ModelGraph,
        alpha: f64,
    ) -> Individual {
        let fitness = fitness(&partition, instance, graph, alpha);
        let cut = cut_size(&partition, graph);
        Individual { partition, fitness, cut }
    }
}

#[derive(Debug, Clone)]
pub struct EvoConfig {
    pub population_size: usize,
    /// Contiguity penalty factor in the objective.
    pub alpha: f64,
    /// Wall-clock budget, seconds.
    pub time_limit: f64,
    pub seed: u64,
    pub tournament_size: usize,
    /// Expected fraction of boundary nodes perturbed per mutation.
    pub mutation_strength: f64,
    /// Probability of mutating each offspring.
    pub mutation_probability: f64,
    pub workers: usize,
    /// Deterministic generation budget per worker; None runs until the
    /// time limit.
    pub max_generations: Option<u64>,
    /// Generations between best-individual broadcasts among workers.
    pub migration_interval: u64,
}

impl EvoConfig {
    pub fn new(time_limit: f64, seed: u64, workers: usize) -> Self {
        let workers = workers.max(1);
        EvoConfig {
            population_size: 4usize.max(4 * workers),
            alpha: 0.1,
            time_limit,
            seed,
            tournament_size: 2,
            mutation_strength: 0.1,
            mutation_probability: 0.5,
            workers,
            max_generations: None,
            migration_interval: 50,
        }
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.population_size < 2 {
            return Err(CoreError::BadConfig("population_size must be >= 2".into()));
        }
        if !(self.time_limit > 0.0) {
            return Err(CoreError::BadConfig("time_limit must be > 0".into()));
        }
        if self.tournament_size < 2 {
            return Err(CoreError::BadConfig("tournament_size must be >= 2".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(CoreError::BadConfig("alpha must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return Err(CoreError::BadConfig("mutation_probability must be in [0,1]".into()));
        }
        if !(self.mutation_strength >= 0.0) {
            return Err(CoreError::BadConfig("mutation_strength must be >= 0".into()));
        }
        if self.migration_interval == 0 {
            return Err(CoreError::BadConfig("migration_interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Greedy graph growing: k random seed nodes; the territory with least
/// activity repeatedly claims its cheapest adjacent unassigned node; then
/// contiguity repair and rebalancing. Balance is best effort (the caller
/// checks).
pub fn initial_partition<R: Rng>(
    graph: &ModelGraph,
    instance: &Instance,
    rng: &mut R,
) -> Partition {
    let n = graph.n();
    let k = instance.k();
    let mut assignment = vec![usize::MAX; n];
    let mut nodes: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        nodes.swap(i, j);
    }

    // Per-territory min-heaps of candidate (length, node) edges into the
    // unassigned region. Nonnegative float keys sort correctly as bits.
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut heaps: Vec<BinaryHeap<Reverse<(u64, usize)>>> = vec![BinaryHeap::new(); k];
    let mut acts = vec![0.0f64; k];

    let push_frontier = |heaps: &mut Vec<BinaryHeap<Reverse<(u64, usize)>>>,
                             assignment: &[usize],
                             t: usize,
                             v: usize| {
        for &w in graph.neighbors(v) {
            if assignment[w] == usize::MAX {
                let len = instance.travel_time(v, w);
                heaps[t].push(Reverse((len.to_bits(), w)));
            }
        }
    };

    for (t, &s) in nodes[..k].iter().enumerate() {
        assignment[s] = t;
        acts[t] += instance.activity(s);
        push_frontier(&mut heaps, &assignment, t, s);
    }

    let mut assigned = k;
    let mut order: Vec<usize> = (0..k).collect();
    while assigned < n {
        order.sort_by(|&a, &b| acts[a].partial_cmp(&acts[b]).expect("finite").then(a.cmp(&b)));
        let mut grown = false;
        for &t in &order {
            let mut pick = None;
            while let Some(&Reverse((_, w))) = heaps[t].peek() {
                if assignment[w] == usize::MAX {
                    pick = Some(w);
                    break;
                }
                heaps[t].pop();
            }
            if let Some(w) = pick {
                heaps[t].pop();
                assignment[w] = t;
                acts[t] += instance.activity(w);
                push_frontier(&mut heaps, &assignment, t, w);
                assigned += 1;
                grown = true;
                break;
            }
        }
        if !grown {
            // Disconnected model safety net: hand the smallest unassigned
            // node to the least loaded territory.
            let v = (0..n).find(|&v| assignment[v] == usize::MAX).expect("unassigned exists");
            let t = order[0];
            assignment[v] = t;
            acts[t] += instance.activity(v);
            push_frontier(&mut heaps, &assignment, t, v);
            assigned += 1;
        }
    }

    let p = Partition::new(assignment, k).expect("labels in range");
    let p = make_contiguous(&p, graph, instance).expect("grown partition has no empty territory");
    rebalance(&p, graph, instance).0
}

fn territory_components(partition: &Partition, graph: &ModelGraph) -> Vec<Vec<Vec<usize>>> {
    let n = graph.n();
    let mut comps = vec![Vec::new(); partition.k()];
    let mut visited = vec![false; n];
    let mut stack = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let t = partition.territory_of(start);
        let mut comp = vec![start];
        visited[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in graph.neighbors(v) {
                if !visited[w] && partition.territory_of(w) == t {
                    visited[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comps[t].push(comp);
    }
    comps
}

/// Reassigns every excess connected component wholesale to the adjacent
/// territory with least current activity until each territory induces
/// exactly one component. The largest-activity component of each split
/// territory is the one kept.
pub fn make_contiguous(
    partition: &Partition,
    graph: &ModelGraph,
    instance: &Instance,
) -> Result<Partition, CoreError> {
    let k = partition.k();
    let mut p = partition.clone();
    {
        let mut counts = vec![0usize; k];
        for v in 0..p.len() {
            counts[p.territory_of(v)] += 1;
        }
        if let Some(t) = counts.iter().position(|&c| c == 0) {
            return Err(CoreError::EmptyTerritory(t));
        }
    }
    let mut acts = p.territory_activities(instance);
    loop {
        let comps = territory_components(&p, graph);
        let Some(t) = (0..k).find(|&t| comps[t].len() > 1) else {
            return Ok(p);
        };
        let activity_of =
            |comp: &[usize]| comp.iter().map(|&v| instance.activity(v)).sum::<f64>();
        let mut keep = 0;
        let mut keep_act = f64::NEG_INFINITY;
        for (i, comp) in comps[t].iter().enumerate() {
            let a = activity_of(comp);
            if a > keep_act {
                keep_act = a;
                keep = i;
            }
        }
        for (i, comp) in comps[t].iter().enumerate() {
            if i == keep {
                continue;
            }
            let mut receiver: Option<(f64, usize)> = None;
            for &v in comp {
                for &w in graph.neighbors(v) {
                    let b = p.territory_of(w);
                    if b != t && receiver.map_or(true, |(ra, rb)| (acts[b], b) < (ra, rb)) {
                        receiver = Some((acts[b], b));
                    }
                }
            }
            let Some((_, b)) = receiver else {
                return Err(CoreError::GraphDisconnected { component: comp.clone() });
            };
            let moved = activity_of(comp);
            for &v in comp {
                p.set(v, b);
            }
            acts[t] -= moved;
            acts[b] += moved;
        }
    }
}

fn block_members(p: &Partition, t: usize) -> Vec<usize> {
    (0..p.len()).filter(|&v| p.territory_of(v) == t).collect()
}

fn stays_connected_without(
    p: &Partition,
    graph: &ModelGraph,
    block: usize,
    exclude: usize,
    members: &[usize],
) -> bool {
    if members.len() <= 1 {
        return false;
    }
    let start = *members.iter().find(|&&v| v != exclude).expect("len > 1");
    let mut seen: HashMap<usize, ()> = HashMap::with_capacity(members.len());
    seen.insert(start, ());
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &w in graph.neighbors(v) {
            if w != exclude && p.territory_of(w) == block && !seen.contains_key(&w) {
                seen.insert(w, ());
                stack.push(w);
            }
        }
    }
    seen.len() == members.len() - 1
}

fn set_connected(graph: &ModelGraph, set: &[usize]) -> bool {
    if set.is_empty() {
        return false;
    }
    let inset: std::collections::HashSet<usize> = set.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    seen.insert(set[0]);
    let mut stack = vec![set[0]];
    while let Some(v) = stack.pop() {
        for &w in graph.neighbors(v) {
            if inset.contains(&w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == set.len()
}

/// Moves boundary nodes out of overloaded territories into adjacent,
/// lighter ones until the balance bound holds or no move reduces the total
/// excess. Moves that keep the donor connected are preferred; a splitting
/// move is immediately followed by contiguity repair. Stalls fall back to
/// boundary swaps. Returns the partition and whether it ended balanced.
pub fn rebalance(
    partition: &Partition,
    graph: &ModelGraph,
    instance: &Instance,
) -> (Partition, bool) {
    let bound = balance_bound(instance);
    let n = graph.n();
    let mut p = partition.clone();
    let mut acts = p.territory_activities(instance);
    let excess_of =
        |acts: &[f64]| acts.iter().map(|&a| (a - bound).max(0.0)).sum::<f64>();
    let mut cur = excess_of(&acts);
    if cur <= 0.0 {
        return (p, true);
    }
    let mut best_p = p.clone();
    let mut best_excess = cur;
    let iteration_cap = 20 * n + 200;

    for _ in 0..iteration_cap {
        if cur <= 0.0 {
            return (p, true);
        }
        let donor = (0..acts.len())
            .max_by(|&a, &b| {
                acts[a].partial_cmp(&acts[b]).expect("finite").then(b.cmp(&a))
            })
            .expect("k >= 1");
        let members = block_members(&p, donor);
        if members.len() <= 1 {
            break;
        }

        #[derive(Clone, Copy)]
        struct MoveCand {
            delta: f64,
            receiver_act: f64,
            v: usize,
            r: usize,
        }
        let mut moves: Vec<MoveCand> = Vec::new();
        for &v in &members {
            let av = instance.activity(v);
            let mut targets: Vec<usize> = graph
                .neighbors(v)
                .iter()
                .map(|&w| p.territory_of(w))
                .filter(|&b| b != donor)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            for r in targets {
                let delta = (acts[donor] - av - bound).max(0.0) - (acts[donor] - bound).max(0.0)
                    + (acts[r] + av - bound).max(0.0)
                    - (acts[r] - bound).max(0.0);
                if delta < -1e-9 {
                    moves.push(MoveCand { delta, receiver_act: acts[r], v, r });
                }
            }
        }

        if !moves.is_empty() {
            moves.sort_by(|a, b| {
                a.delta
                    .partial_cmp(&b.delta)
                    .expect("finite")
                    .then(a.receiver_act.partial_cmp(&b.receiver_act).expect("finite"))
                    .then(a.v.cmp(&b.v))
                    .then(a.r.cmp(&b.r))
            });
            let mut connectivity: HashMap<usize, bool> = HashMap::new();
            let chosen = moves.iter().find(|m| {
                *connectivity
                    .entry(m.v)
                    .or_insert_with(|| stays_connected_without(&p, graph, donor, m.v, &members))
            });
            match chosen {
                Some(m) => {
                    p.set(m.v, m.r);
                    acts[donor] -= instance.activity(m.v);
                    acts[m.r] += instance.activity(m.v);
                }
                None => {
                    // Split the donor, then repair contiguity right away.
                    let m = moves[0];
                    p.set(m.v, m.r);
                    p = make_contiguous(&p, graph, instance)
                        .expect("donor keeps at least one node");
                    acts = p.territory_activities(instance);
                }
            }
            cur = excess_of(&acts);
            if cur < best_excess {
                best_excess = cur;
                best_p = p.clone();
            }
            continue;
        }

        // Swap tier: exchange a donor boundary node with a receiver node.
        let mut best_swap: Option<(f64, usize, usize, usize)> = None; // (delta, v, w, r)
        for &v in &members {
            let av = instance.activity(v);
            let mut targets: Vec<usize> = graph
                .neighbors(v)
                .iter()
                .map(|&w| p.territory_of(w))
                .filter(|&b| b != donor)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            for r in targets {
                for w in block_members(&p, r) {
                    if !graph.neighbors(w).iter().any(|&x| p.territory_of(x) == donor) {
                        continue;
                    }
                    let aw = instance.activity(w);
                    let delta = (acts[donor] - av + aw - bound).max(0.0)
                        - (acts[donor] - bound).max(0.0)
                        + (acts[r] + av - aw - bound).max(0.0)
                        - (acts[r] - bound).max(0.0);
                    if delta < -1e-9
                        && best_swap.map_or(true, |(bd, bv, bw, br)| {
                            (delta, v, w, r) < (bd, bv, bw, br)
                        })
                    {
                        best_swap = Some((delta, v, w, r));
                    }
                }
            }
        }
        let Some((_, v, w, r)) = best_swap else { break };
        let donor_after: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&x| x != v)
            .chain(std::iter::once(w))
            .collect();
        let receiver_after: Vec<usize> = block_members(&p, r)
            .into_iter()
            .filter(|&x| x != w)
            .chain(std::iter::once(v))
            .collect();
        if !set_connected(graph, &donor_after) || !set_connected(graph, &receiver_after) {
            break;
        }
        let (av, aw) = (instance.activity(v), instance.activity(w));
        p.set(v, r);
        p.set(w, donor);
        acts[donor] += aw - av;
        acts[r] += av - aw;
        cur = excess_of(&acts);
        if cur < best_excess {
            best_excess = cur;
            best_p = p.clone();
        }
    }

    if cur <= 0.0 {
        (p, true)
    } else {
        (best_p, false)
    }
}

/// Boundary hill climbing: move a node to an adjacent territory when the
/// move strictly reduces the cut, keeps balance and donor connectivity,
/// and does not worsen the pairwise objective. Runs to a local optimum.
pub fn local_search(
    partition: &Partition,
    graph: &ModelGraph,
    instance: &Instance,
) -> Partition {
    let bound = balance_bound(instance);
    let n = graph.n();
    let k = partition.k();
    let mut p = partition.clone();
    let mut acts = p.territory_activities(instance);
    let mut members = p.members();

    let mut deg = vec![0usize; k];
    loop {
        #[derive(Clone, Copy)]
        struct Cand {
            cut_delta: i64,
            pc_delta: f64,
            v: usize,
            b: usize,
        }
        let mut cands: Vec<Cand> = Vec::new();
        for v in 0..n {
            let a = p.territory_of(v);
            if members[a].len() <= 1 {
                continue;
            }
            let mut touched: Vec<usize> = Vec::new();
            for &w in graph.neighbors(v) {
                let t = p.territory_of(w);
                if deg[t] == 0 {
                    touched.push(t);
                }
                deg[t] += 1;
            }
            let deg_a = deg[a];
            touched.sort_unstable();
            for &b in &touched {
                if b == a || deg[b] <= deg_a {
                    continue;
                }
                let av = instance.activity(v);
                if acts[b] + av > bound + 1e-9 {
                    continue;
                }
                let gained: f64 = members[b].iter().map(|&u| instance.travel_time(v, u)).sum();
                let lost: f64 = members[a]
                    .iter()
                    .filter(|&&u| u != v)
                    .map(|&u| instance.travel_time(v, u))
                    .sum();
                let pc_delta = gained - lost;
                if pc_delta > 1e-9 {
                    continue;
                }
                cands.push(Cand {
                    cut_delta: deg_a as i64 - deg[b] as i64,
                    pc_delta,
                    v,
                    b,
                });
            }
            for &t in &touched {
                deg[t] = 0;
            }
        }
        cands.sort_by(|x, y| {
            x.cut_delta
                .cmp(&y.cut_delta)
                .then(x.pc_delta.partial_cmp(&y.pc_delta).expect("finite"))
                .then(x.v.cmp(&y.v))
                .then(x.b.cmp(&y.b))
        });
        let mut applied = false;
        for c in &cands {
            let a = p.territory_of(c.v);
            if stays_connected_without(&p, graph, a, c.v, &members[a]) {
                p.set(c.v, c.b);
                acts[a] -= instance.activity(c.v);
                acts[c.b] += instance.activity(c.v);
                members = p.members();
                applied = true;
                break;
            }
        }
        if !applied {
            return p;
        }
    }
}

// Overlay projection: intersect the parents' territories into cells,
// contract the model to the quotient graph over cells, grow k balanced
// blocks greedily, and project back. Every projected cut edge is cut by
// at least one parent.
fn overlay_project<R: Rng>(
    a: &Partition,
    b: &Partition,
    graph: &ModelGraph,
    instance: &Instance,
    rng: &mut R,
) -> Partition {
    let n = graph.n();
    let k = a.k();
    let mut cell_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cell_of = vec![usize::MAX; n];
    for v in 0..n {
        let key = (a.territory_of(v), b.territory_of(v));
        let next = cell_ids.len();
        let c = *cell_ids.entry(key).or_insert(next);
        cell_of[v] = c;
    }
    let cells = cell_ids.len();
    let mut cell_act = vec![0.0f64; cells];
    for v in 0..n {
        cell_act[cell_of[v]] += instance.activity(v);
    }

    let block_of_cell: Vec<usize> = if cells == k {
        (0..k).collect()
    } else {
        let mut mult: HashMap<(usize, usize), usize> = HashMap::new();
        for e in graph.edges() {
            let (cu, cv) = (cell_of[e.u], cell_of[e.v]);
            if cu != cv {
                *mult.entry((cu.min(cv), cu.max(cv))).or_default() += 1;
            }
        }
        let mut qadj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cells];
        let mut pairs: Vec<((usize, usize), usize)> = mult.into_iter().collect();
        pairs.sort_unstable();
        for ((cu, cv), m) in pairs {
            qadj[cu].push((cv, m));
            qadj[cv].push((cu, m));
        }
        grow_quotient(cells, k, &cell_act, &qadj, rng)
    };

    let assignment = (0..n).map(|v| block_of_cell[cell_of[v]]).collect();
    Partition::new(assignment, k).expect("labels in range")
}

fn grow_quotient<R: Rng>(
    cells: usize,
    k: usize,
    cell_act: &[f64],
    qadj: &[Vec<(usize, usize)>],
    rng: &mut R,
) -> Vec<usize> {
    let mut block_of = vec![usize::MAX; cells];
    let mut ids: Vec<usize> = (0..cells).collect();
    for i in 0..k {
        let j = rng.random_range(i..cells);
        ids.swap(i, j);
    }
    let mut block_act = vec![0.0f64; k];
    let mut frontier: Vec<HashMap<usize, usize>> = vec![HashMap::new(); k];
    let claim = |c: usize,
                     blk: usize,
                     block_of: &mut Vec<usize>,
                     block_act: &mut Vec<f64>,
                     frontier: &mut Vec<HashMap<usize, usize>>| {
        block_of[c] = blk;
        block_act[blk] += cell_act[c];
        for &(d, m) in &qadj[c] {
            if block_of[d] == usize::MAX {
                *frontier[blk].entry(d).or_default() += m;
            }
        }
    };
    for (blk, &c) in ids[..k].iter().enumerate() {
        claim(c, blk, &mut block_of, &mut block_act, &mut frontier);
    }
    let mut assigned = k;
    let mut order: Vec<usize> = (0..k).collect();
    while assigned < cells {
        order.sort_by(|&x, &y| {
            block_act[x].partial_cmp(&block_act[y]).expect("finite").then(x.cmp(&y))
        });
        let mut grown = false;
        for &blk in &order {
            frontier[blk].retain(|&c, _| block_of[c] == usize::MAX);
            // Strongest attachment first: max multiplicity, then min cell id.
            let mut best: Option<(usize, usize)> = None;
            for (&c, &m) in &frontier[blk] {
                let better = match best {
                    None => true,
                    Some((bm, bc)) => m > bm || (m == bm && c < bc),
                };
                if better {
                    best = Some((m, c));
                }
            }
            if let Some((_, c)) = best {
                claim(c, blk, &mut block_of, &mut block_act, &mut frontier);
                assigned += 1;
                grown = true;
                break;
            }
        }
        if !grown {
            let c = (0..cells).find(|&c| block_of[c] == usize::MAX).expect("unassigned");
            let blk = order[0];
            claim(c, blk, &mut block_of, &mut block_act, &mut frontier);
            assigned += 1;
        }
    }
    block_of
}

fn better_parent(p1: &Individual, p2: &Individual) -> Individual {
    if p2.fitness < p1.fitness {
        p2.clone()
    } else {
        p1.clone()
    }
}

/// Combines two feasible parents through the overlay quotient graph; the
/// repaired, locally searched offspring is returned, or a clone of the
/// better parent when rebalancing fails.
pub fn combine<R: Rng>(
    parent1: &Individual,
    parent2: &Individual,
    graph: &ModelGraph,
    instance: &Instance,
    rng: &mut R,
    alpha: f64,
) -> Individual {
    let projected = overlay_project(&parent1.partition, &parent2.partition, graph, instance, rng);
    let repaired = match make_contiguous(&projected, graph, instance) {
        Ok(p) => p,
        Err(_) => return better_parent(parent1, parent2),
    };
    let (rebalanced, balanced) = rebalance(&repaired, graph, instance);
    if !balanced {
        return better_parent(parent1, parent2);
    }
    let refined = local_search(&rebalanced, graph, instance);
    let offspring = Individual::evaluate(refined, instance, graph, alpha);
    if parent1.partition == parent2.partition && offspring.fitness > parent1.fitness {
        return parent1.clone();
    }
    offspring
}

/// Reassigns a random connected patch of the boundary (expected size
/// strength * boundary size) to a random adjacent territory, then repairs.
/// Falls back to the unchanged individual whenever repair cannot restore
/// balance, so the output is always feasible.
pub fn mutate<R: Rng>(
    individual: &Individual,
    graph: &ModelGraph,
    instance: &Instance,
    rng: &mut R,
    strength: f64,
    alpha: f64,
) -> Individual {
    if strength <= 0.0 {
        return individual.clone();
    }
    let p = &individual.partition;
    let n = graph.n();
    let boundary: Vec<usize> = (0..n)
        .filter(|&v| {
            graph.neighbors(v).iter().any(|&w| p.territory_of(w) != p.territory_of(v))
        })
        .collect();
    if boundary.is_empty() {
        return individual.clone();
    }
    let target = strength * boundary.len() as f64;
    let mut size = target.floor() as usize;
    if rng.random::<f64>() < target.fract() {
        size += 1;
    }
    if size == 0 {
        return individual.clone();
    }
    let v0 = boundary[rng.random_range(0..boundary.len())];
    let donor = p.territory_of(v0);
    let donor_size = (0..n).filter(|&v| p.territory_of(v) == donor).count();
    let size = size.min(donor_size.saturating_sub(1));
    if size == 0 {
        return individual.clone();
    }

    let mut in_patch = vec![false; n];
    in_patch[v0] = true;
    let mut patch = vec![v0];
    let mut frontier: Vec<usize> = graph
        .neighbors(v0)
        .iter()
        .copied()
        .filter(|&w| p.territory_of(w) == donor)
        .collect();
    while patch.len() < size && !frontier.is_empty() {
        let i = rng.random_range(0..frontier.len());
        let v = frontier.swap_remove(i);
        if in_patch[v] {
            continue;
        }
        in_patch[v] = true;
        patch.push(v);
        for &w in graph.neighbors(v) {
            if !in_patch[w] && p.territory_of(w) == donor {
                frontier.push(w);
            }
        }
    }

    let mut targets: Vec<usize> = patch
        .iter()
        .flat_map(|&v| graph.neighbors(v).iter().copied())
        .map(|w| p.territory_of(w))
        .filter(|&b| b != donor)
        .collect();
    targets.sort_unstable();
    targets.dedup();
    if targets.is_empty() {
        return individual.clone();
    }
    let r = targets[rng.random_range(0..targets.len())];

    let mut q = p.clone();
    for &v in &patch {
        q.set(v, r);
    }
    let Ok(contiguous) = make_contiguous(&q, graph, instance) else {
        return individual.clone();
    };
    let (rebalanced, balanced) = rebalance(&contiguous, graph, instance);
    if !balanced {
        return individual.clone();
    }
    let refined = local_search(&rebalanced, graph, instance);
    Individual::evaluate(refined, instance, graph, alpha)
}

#[derive(Debug, Clone, Serialize)]
pub struct KatedLogRecord {
    pub generation: u64,
    pub best_fitness: f64,
    pub best_cut: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct KatedStats {
    /// Generations summed over workers.
    pub generations: u64,
    /// Best-ever improvements of the winning worker.
    pub trajectory: Vec<KatedLogRecord>,
    pub workers: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct KatedOutcome {
    pub best: Individual,
    /// False only when no balanced individual was ever constructed.
    pub feasible: bool,
    pub stats: KatedStats,
}

/// Steady-state evolutionary loop. One worker is deterministic for a fixed
/// seed; more workers run island populations that exchange their best
/// individuals every `migration_interval` generations.
pub fn solve_kated(
    instance: &Instance,
    graph: &ModelGraph,
    config: &EvoConfig,
    logger: &RunLogger,
) -> Result<KatedOutcome, CoreError> {
    config.validate()?;
    let start = Instant::now();

    if instance.k() == 1 {
        let p = Partition::single_territory(instance.n());
        let best = Individual::evaluate(p, instance, graph, config.alpha);
        logger.log(&KatedLogRecord {
            generation: 0,
            best_fitness: best.fitness,
            best_cut: best.cut,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        return Ok(KatedOutcome {
            best,
            feasible: true,
            stats: KatedStats {
                generations: 0,
                trajectory: Vec::new(),
                workers: 1,
                wall_seconds: start.elapsed().as_secs_f64(),
            },
        });
    }

    let workers = config.workers.max(1);
    let mut results: Vec<(Option<Individual>, Individual, KatedStats)> = if workers == 1 {
        vec![run_island(0, instance, graph, config, logger, start, None, Vec::new())]
    } else {
        let mut senders: Vec<Sender<Individual>> = Vec::new();
        let mut receivers: Vec<Receiver<Individual>> = Vec::new();
        for _ in 0..workers {
            let (tx, rx) = channel();
            senders.push(tx);
            receivers.push(rx);
        }
        let mut islands = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (w, rx) in receivers.into_iter().enumerate() {
                let peers: Vec<Sender<Individual>> = senders
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != w)
                    .map(|(_, tx)| tx.clone())
                    .collect();
                handles.push(scope.spawn(move || {
                    run_island(w, instance, graph, config, logger, start, Some(rx), peers)
                }));
            }
            drop(senders);
            for h in handles {
                islands.push(h.join().expect("island thread panicked"));
            }
        });
        islands
    };

    let generations: u64 = results.iter().map(|(_, _, s)| s.generations).sum();
    // Winner: best balanced individual across islands; best-effort
    // fallback when no island built one.
    let mut winner: Option<(usize, bool, f64)> = None;
    for (w, (feasible_best, fallback, _)) in results.iter().enumerate() {
        let (fit, feas) = match feasible_best {
            Some(ind) => (ind.fitness, true),
            None => (fallback.fitness, false),
        };
        let better = match winner {
            None => true,
            Some((_, bfeas, bfit)) => (feas && !bfeas) || (feas == bfeas && fit < bfit),
        };
        if better {
            winner = Some((w, feas, fit));
        }
    }
    let (w, feasible, _) = winner.expect("at least one worker");
    let (feasible_best, fallback, mut stats) = results.swap_remove(w);
    let best = if feasible { feasible_best.expect("winner feasible") } else { fallback };
    stats.generations = generations;
    stats.workers = workers;
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(KatedOutcome { best, feasible, stats })
}

#[allow(clippy::too_many_arguments)]
fn run_island(
    worker: usize,
    instance: &Instance,
    graph: &ModelGraph,
    config: &EvoConfig,
    logger: &RunLogger,
    start: Instant,
    inbox: Option<Receiver<Individual>>,
    peers: Vec<Sender<Individual>>,
) -> (Option<Individual>, Individual, KatedStats) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, worker as u64));
    let bound = balance_bound(instance);
    let balanced =
        |p: &Partition| p.territory_activities(instance).iter().all(|&a| a <= bound + 1e-9);
    let out_of_time = || start.elapsed().as_secs_f64() >= config.time_limit;

    let mut population: Vec<Individual> = Vec::new();
    let mut fallback: Option<Individual> = None;
    let mut attempts = 0usize;
    while population.len() < config.population_size && attempts < config.population_size * 20 {
        attempts += 1;
        let p = initial_partition(graph, instance, &mut rng);
        if balanced(&p) {
            let refined = local_search(&p, graph, instance);
            population.push(Individual::evaluate(refined, instance, graph, config.alpha));
        } else {
            let candidate = Individual::evaluate(p, instance, graph, config.alpha);
            if fallback.as_ref().map_or(true, |f| candidate.fitness < f.fitness) {
                fallback = Some(candidate);
            }
        }
        if out_of_time() {
            break;
        }
    }

    if population.is_empty() {
        let best_effort = fallback.unwrap_or_else(|| {
            let p = initial_partition(graph, instance, &mut rng);
            Individual::evaluate(p, instance, graph, config.alpha)
        });
        let stats = KatedStats {
            generations: 0,
            trajectory: Vec::new(),
            workers: 1,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        return (None, best_effort, stats);
    }

    let mut best = population
        .iter()
        .min_by(|a, b| a.fitness.partial_cmp(&b.fitness).expect("finite"))
        .expect("population non-empty")
        .clone();
    let mut trajectory = vec![KatedLogRecord {
        generation: 0,
        best_fitness: best.fitness,
        best_cut: best.cut,
        wall_seconds: start.elapsed().as_secs_f64(),
    }];
    logger.log(&trajectory[0]);

    let mut generation = 0u64;
    loop {
        if out_of_time() {
            break;
        }
        if let Some(max) = config.max_generations {
            if generation >= max {
                break;
            }
        }
        generation += 1;

        if let Some(rx) = &inbox {
            while let Ok(migrant) = rx.try_recv() {
                if migrant.fitness < best.fitness {
                    best = migrant.clone();
                }
                let worst = worst_index(&population);
                if migrant.fitness < population[worst].fitness {
                    population[worst] = migrant;
                }
            }
        }

        let i = tournament(&population, config.tournament_size, &mut rng);
        let j = tournament(&population, config.tournament_size, &mut rng);
        let mut offspring =
            combine(&population[i], &population[j], graph, instance, &mut rng, config.alpha);
        if config.mutation_probability > 0.0 && rng.random_bool(config.mutation_probability) {
            offspring =
                mutate(&offspring, graph, instance, &mut rng, config.mutation_strength, config.alpha);
        }

        if offspring.fitness < best.fitness {
            best = offspring.clone();
            let record = KatedLogRecord {
                generation,
                best_fitness: best.fitness,
                best_cut: best.cut,
                wall_seconds: start.elapsed().as_secs_f64(),
            };
            logger.log(&record);
            trajectory.push(record);
        }
        let worst = worst_index(&population);
        if offspring.fitness < population[worst].fitness {
            population[worst] = offspring;
        }

        if !peers.is_empty() && generation % config.migration_interval == 0 {
            for tx in &peers {
                let _ = tx.send(best.clone());
            }
        }
    }

    let stats = KatedStats {
        generations: generation,
        trajectory,
        workers: 1,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let fallback_ind = best.clone();
    (Some(best), fallback_ind, stats)
}

fn worst_index(population: &[Individual]) -> usize {
    let mut worst = 0;
    for (i, ind) in population.iter().enumerate() {
        if ind.fitness > population[worst].fitness {
            worst = i;
        }
    }
    worst
}

fn tournament<R: Rng>(population: &[Individual], size: usize, rng: &mut R) -> usize {
    let mut winner = rng.random_range(0..population.len());
    for _ in 1..size {
        let challenger = rng.random_range(0..population.len());
        if population[challenger].fitness < population[winner].fitness {
            winner = challenger;
        }
    }
    winner
}
