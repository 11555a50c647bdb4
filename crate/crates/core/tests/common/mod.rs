//! Independent oracles shared by the integration tests. Nothing here calls the
//! solver, the cluster code or the height sweep being checked.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};

use fpp_core::capacity::{Capacity, CapacityField, Rational};
use fpp_core::geometry::{in_w_layer, Edge, HyperRectangle, LatticeRegion, MarkedRegion, Point};
use num_traits::Zero;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn add(a: Capacity, b: Capacity) -> Capacity {
    match (a, b) {
        (Capacity::Finite(x), Capacity::Finite(y)) => Capacity::Finite(x + y),
        _ => Capacity::Infinite,
    }
}

pub fn total(caps: impl IntoIterator<Item = Capacity>) -> Capacity {
    caps.into_iter().fold(Capacity::zero(), add)
}

/// Exhaustive lexicographic optimum `(capacity, cardinality)` over every
/// source side containing the sources and avoiding the sinks.
pub fn brute_lexi(marked: &MarkedRegion, caps: &[Capacity]) -> (Capacity, usize) {
    let r = &marked.region;
    let n = r.num_vertices();
    let mut fixed = vec![None; n];
    for &s in &marked.sources {
        fixed[s] = Some(true);
    }
    for &t in &marked.sinks {
        fixed[t] = Some(false);
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    assert!(free.len() <= 20, "instance too large for enumeration");
    let mut best: Option<(Capacity, usize)> = None;
    for mask in 0u32..(1 << free.len()) {
        let mut side: Vec<bool> = fixed.iter().map(|f| f.unwrap_or(false)).collect();
        for (k, &v) in free.iter().enumerate() {
            side[v] = mask >> k & 1 == 1;
        }
        let crossing: Vec<usize> = r
            .edge_ends()
            .iter()
            .enumerate()
            .filter(|(_, &(u, v))| side[u] != side[v])
            .map(|(i, _)| i)
            .collect();
        let key = (total(crossing.iter().map(|&i| caps[i])), crossing.len());
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
    }
    best.unwrap()
}

/// Edmonds–Karp in exact rationals on the undirected region graph.
pub fn edmonds_karp(marked: &MarkedRegion, caps: &[Capacity]) -> Capacity {
    let r = &marked.region;
    let n = r.num_vertices() + 2;
    let (s, t) = (n - 2, n - 1);
    // residual capacity per arc, None = infinite
    let mut to = Vec::new();
    let mut res: Vec<Option<Rational>> = Vec::new();
    let mut adj = vec![Vec::new(); n];
    let mut push = |u: usize, v: usize, c: Option<Rational>, back: Option<Rational>| {
        adj[u].push(to.len());
        to.push(v);
        res.push(c);
        adj[v].push(to.len());
        to.push(u);
        res.push(back);
    };
    let as_opt = |c: &Capacity| c.finite();
    for (&(u, v), c) in r.edge_ends().iter().zip(caps) {
        push(u, v, as_opt(c), as_opt(c));
    }
    for &x in &marked.sources {
        push(s, x, None, Some(Rational::zero()));
    }
    for &x in &marked.sinks {
        push(x, t, None, Some(Rational::zero()));
    }
    let positive = |c: &Option<Rational>| c.is_none_or(|x| x > Rational::zero());
    let mut flow = Rational::zero();
    loop {
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &a in &adj[u] {
                if positive(&res[a]) && !seen[to[a]] {
                    seen[to[a]] = true;
                    prev[to[a]] = a;
                    q.push_back(to[a]);
                }
            }
        }
        if !seen[t] {
            return Capacity::Finite(flow);
        }
        let mut path = Vec::new();
        let mut v = t;
        while v != s {
            let a = prev[v];
            path.push(a);
            v = to[a ^ 1];
        }
        let bottleneck = path.iter().filter_map(|&a| res[a]).min();
        let Some(f) = bottleneck else {
            return Capacity::Infinite;
        };
        for &a in &path {
            if let Some(c) = res[a].as_mut() {
                *c -= f;
            }
            if let Some(c) = res[a ^ 1].as_mut() {
                *c += f;
            }
        }
        flow += f;
    }
}

/// BFS from the sources avoiding the given edges; true if no sink is reached.
pub fn separates(marked: &MarkedRegion, cut: &[Edge]) -> bool {
    let r = &marked.region;
    let d = r.dim();
    let removed: HashSet<Edge> = cut.iter().copied().collect();
    let sinks: HashSet<Point> = marked.sinks.iter().map(|&i| r.vertices()[i]).collect();
    let mut seen: HashSet<Point> = marked.sources.iter().map(|&i| r.vertices()[i]).collect();
    let mut stack: Vec<Point> = seen.iter().copied().collect();
    while let Some(x) = stack.pop() {
        if sinks.contains(&x) {
            return false;
        }
        for k in 0..d {
            for delta in [-1, 1] {
                let y = x.step(k, delta);
                if r.contains(&y) && !removed.contains(&Edge::between(x, y)) && seen.insert(y) {
                    stack.push(y);
                }
            }
        }
    }
    true
}

pub const CAPACITY_MENU: [&str; 6] = ["0", "1", "2", "1/2", "3/4", "inf"];

pub fn random_capacity(rng: &mut ChaCha8Rng) -> Capacity {
    CAPACITY_MENU.choose(rng).unwrap().parse().unwrap()
}

/// A random connected-or-not induced subgraph of a small box with at most
/// `max_edges` edges, nonempty disjoint sources and sinks, and mixed capacities.
pub fn small_instance(rng: &mut ChaCha8Rng, max_edges: usize) -> (MarkedRegion, Vec<Capacity>) {
    loop {
        let d = if rng.random_bool(0.5) { 2 } else { 3 };
        let dims: Vec<i32> = if d == 2 { vec![4, 3] } else { vec![3, 2, 2] };
        let mut pts = Vec::new();
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                if d == 2 {
                    pts.push(Point::new(&[x, y]));
                } else {
                    for z in 0..dims[2] {
                        pts.push(Point::new(&[x, y, z]));
                    }
                }
            }
        }
        pts.retain(|_| rng.random_bool(0.85));
        let region = LatticeRegion::from_points(d, pts);
        if region.num_vertices() < 2 || region.num_edges() > max_edges || region.num_edges() == 0 {
            continue;
        }
        let n = region.num_vertices();
        let mut roles: Vec<u8> = (0..n).map(|_| rng.random_range(0..4)).collect();
        roles[0] = 1;
        roles[n - 1] = 2;
        let sources = (0..n).filter(|&v| roles[v] == 1).collect();
        let sinks = (0..n).filter(|&v| roles[v] == 2).collect();
        let caps = (0..region.num_edges()).map(|_| random_capacity(rng)).collect();
        return (MarkedRegion::new(region, sources, sinks).unwrap(), caps);
    }
}

/// Positive cluster of `x` by recursive-style DFS into an ordered set.
pub fn flood_cluster(x: Point, field: &CapacityField, d: usize, limit: usize) -> Option<BTreeSet<Point>> {
    let mut set = BTreeSet::from([x]);
    let mut stack = vec![x];
    while let Some(p) = stack.pop() {
        for k in 0..d {
            for delta in [1, -1] {
                let q = p.step(k, delta);
                let e = Edge::between(p, q);
                if field.capacity(e.global_id(d)).is_positive() && set.insert(q) {
                    if set.len() > limit {
                        return None;
                    }
                    stack.push(q);
                }
            }
        }
    }
    Some(set)
}

/// Exterior boundary by classifying each complement neighbor as reachable from
/// a point far outside the bounding box, inside a box enlarged by `pad`.
pub fn far_boundary(d: usize, cluster: &BTreeSet<Point>, pad: i32) -> BTreeSet<Edge> {
    let first = cluster.first().expect("nonempty cluster").0;
    let (mut lo, mut hi) = (first, first);
    for p in cluster {
        for i in 0..d {
            lo[i] = lo[i].min(p.0[i] - pad);
            hi[i] = hi[i].max(p.0[i] + pad);
        }
    }
    let inside_box = |p: &Point| (0..d).all(|i| p.0[i] >= lo[i] && p.0[i] <= hi[i]);
    let start = Point(lo);
    let mut outside = HashSet::from([start]);
    let mut q = VecDeque::from([start]);
    while let Some(p) = q.pop_front() {
        for k in 0..d {
            for delta in [-1, 1] {
                let y = p.step(k, delta);
                if inside_box(&y) && !cluster.contains(&y) && outside.insert(y) {
                    q.push_back(y);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for x in cluster {
        for k in 0..d {
            for delta in [-1, 1] {
                let y = x.step(k, delta);
                if outside.contains(&y) {
                    out.insert(Edge::between(*x, y));
                }
            }
        }
    }
    out
}

/// Literal evaluation of `inf{t ≥ h : W(A, t, v) ∩ U = ∅}`: membership of a
/// vertex in `W(A, t, v)` only changes at its own height or at the height of a
/// neighbor, so the infimum is attained at `h` or at one of those heights.
pub fn scan_height(a: &HyperRectangle, h: f64, union: &[Point]) -> f64 {
    let d = a.dim();
    let mut candidates: Vec<f64> = vec![h];
    for x in union {
        for k in 0..d {
            for delta in [-1, 1] {
                let t = a.height(&x.step(k, delta));
                if t > h {
                    candidates.push(t);
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    for t in candidates {
        if !union.iter().any(|x| in_w_layer(a, t, x)) {
            return t;
        }
    }
    unreachable!("the largest neighbor height clears every vertex")
}
