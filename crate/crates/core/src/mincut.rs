//! Exact max-flow / min-cut on lattice regions with capacities in
//! `{0} ∪ Q_{>0} ∪ {+∞}`, the lexicographic (capacity, cardinality) minimum
//! cut, and the flow quantities Φ, τ, ψ and χ.
//!
//! Capacities are scaled by the least common multiple of their denominators
//! and solved in `i128`. An infinite edge weighs `W∞ = 1 + Σ finite scaled
//! capacities`, so it enters a minimum cut only when every cut contains one.
//! For the lexicographic cut each edge of scaled capacity `c` weighs
//! `c·(m+1) + 1` (`m` edges), which orders cuts by capacity first and
//! cardinality second; the minimum decodes as `(⌊W/(m+1)⌋, W mod (m+1))`.
//! When every cut is infinite the cardinality is minimized over all cuts by a
//! second unit-weight pass, and the result is flagged as not lexicographic.
//!
//! The reported cut is canonical: its source side is the set of vertices
//! reachable from the sources in the final residual graph.

use std::collections::{HashSet, VecDeque};
use std::io::Write;

use num_integer::Integer;
use serde::Serialize;

use crate::capacity::{require_supercritical_zero, Capacity, CapacityField, Rational, RegimeConstants};
use crate::clusters::{random_height, HeightOptions, RandomHeight};
use crate::dinic::Network;
use crate::error::{Error, Result};
use crate::geometry::{
    bottom_top_sets, build_cyl_prime, build_cylinder, slab_window, thicken, Edge, HyperRectangle, LatticeRegion,
    MarkedRegion, Point, SlabWindow,
};

/// Default cap on the lateral margin of the χ slab window.
pub const DEFAULT_WINDOW_CAP: i64 = 1 << 10;

/// A max-flow instance: a marked region and one capacity per region edge.
#[derive(Clone, Debug)]
pub struct FlowProblem<'a> {
    pub marked: &'a MarkedRegion,
    pub capacities: Vec<Capacity>,
}

impl<'a> FlowProblem<'a> {
    pub fn new(marked: &'a MarkedRegion, capacities: Vec<Capacity>) -> Result<FlowProblem<'a>> {
        if capacities.len() != marked.region.num_edges() {
            return Err(Error::InvalidInput(format!(
                "{} capacities for {} edges",
                capacities.len(),
                marked.region.num_edges()
            )));
        }
        Ok(FlowProblem { marked, capacities })
    }

    /// Capacities read from `field` at each region edge.
    pub fn from_field(marked: &'a MarkedRegion, field: &CapacityField) -> FlowProblem<'a> {
        let d = marked.region.dim();
        let capacities = marked
            .region
            .edges()
            .iter()
            .map(|e| field.edge_capacity(e, d))
            .collect();
        FlowProblem { marked, capacities }
    }

    pub fn to_json(&self) -> Result<String> {
        let r = &self.marked.region;
        let json = ProblemJson {
            d: r.dim(),
            vertices: r.vertices().iter().map(|p| p.coords(r.dim()).to_vec()).collect(),
            edges: r.edge_ends().to_vec(),
            capacities: self.capacities.iter().map(|c| c.to_string()).collect(),
            sources: self.marked.sources.clone(),
            sinks: self.marked.sinks.clone(),
        };
        Ok(serde_json::to_string(&json)?)
    }
}

#[derive(Serialize)]
struct ProblemJson {
    d: usize,
    vertices: Vec<Vec<i32>>,
    edges: Vec<(usize, usize)>,
    capacities: Vec<String>,
    sources: Vec<usize>,
    sinks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutResult {
    pub flow_value: Capacity,
    pub cut_capacity: Capacity,
    pub cut_cardinality: usize,
    /// Local edge ids of the cut, increasing.
    pub cut_edge_ids: Vec<usize>,
    pub cut_edges: Vec<Edge>,
    /// Canonical source side, lexicographic.
    pub source_side: Vec<Point>,
    /// True for a lexicographic optimum of finite capacity. False for plain
    /// max-flow results and when every cut is infinite; the cardinality is
    /// then still minimal over all cuts.
    pub lexicographic: bool,
}

#[derive(Serialize)]
struct CutJson {
    flow_value: Capacity,
    cut_capacity: Capacity,
    cut_cardinality: usize,
    lexicographic: bool,
    cut_edges: Vec<u64>,
    source_side_size: usize,
}

impl CutResult {
    /// JSON with cut edges given by their global identifiers.
    pub fn to_json(&self, d: usize) -> Result<String> {
        let json = CutJson {
            flow_value: self.flow_value,
            cut_capacity: self.cut_capacity,
            cut_cardinality: self.cut_cardinality,
            lexicographic: self.lexicographic,
            cut_edges: self.cut_edges.iter().map(|e| e.global_id(d)).collect(),
            source_side_size: self.source_side.len(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    /// CSV rows `x1..xd, y1..yd` giving the endpoints of each cut edge.
    pub fn write_cut_csv<W: Write>(&self, out: W, d: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (1..=d)
            .map(|i| format!("x{i}"))
            .chain((1..=d).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header)?;
        for e in &self.cut_edges {
            let (x, y) = e.endpoints();
            w.write_record(x.coords(d).iter().chain(y.coords(d)).map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    /// Contract positive-capacity edges before solving. Exact whenever a
    /// zero-capacity cut exists; otherwise the solver falls back to the full
    /// instance.
    pub contract_positive: bool,
}

pub fn max_flow(problem: &FlowProblem) -> Result<CutResult> {
    solve(problem, false, false)
}

/// A minimum-capacity cut of minimum cardinality.
pub fn lexi_min_cut(problem: &FlowProblem) -> Result<CutResult> {
    lexi_min_cut_with(problem, SolveOptions::default())
}

pub fn lexi_min_cut_with(problem: &FlowProblem, opts: SolveOptions) -> Result<CutResult> {
    solve(problem, true, opts.contract_positive)
}

fn overflow() -> Error {
    Error::Assertion("integer overflow in scaled capacities".into())
}

/// Scale factor and scaled capacities (`None` for `+∞`).
fn scale(capacities: &[Capacity]) -> Result<(i128, Vec<Option<i128>>)> {
    let mut lcm: i128 = 1;
    for c in capacities {
        if let Capacity::Finite(r) = c {
            lcm = lcm.lcm(&(*r.denom() as i128));
            if lcm > i64::MAX as i128 {
                return Err(overflow());
            }
        }
    }
    let scaled = capacities
        .iter()
        .map(|c| match c {
            Capacity::Finite(r) => Some(*r.numer() as i128 * (lcm / *r.denom() as i128)),
            Capacity::Infinite => None,
        })
        .collect();
    Ok((lcm, scaled))
}

/// Union-find over region vertices merging the endpoints of positive edges.
fn positive_classes(region: &LatticeRegion, capacities: &[Capacity]) -> Vec<usize> {
    let n = region.num_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (&(u, v), c) in region.edge_ends().iter().zip(capacities) {
        if c.is_positive() {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru.max(rv)] = ru.min(rv);
            }
        }
    }
    (0..n).map(|x| find(&mut parent, x)).collect()
}

fn solve(problem: &FlowProblem, lexi: bool, contract: bool) -> Result<CutResult> {
    let marked = problem.marked;
    let region = &marked.region;
    if marked.sources.is_empty() || marked.sinks.is_empty() {
        return Err(Error::InvalidInput("sources and sinks must be nonempty".into()));
    }
    if problem.capacities.len() != region.num_edges() {
        return Err(Error::InvalidInput("one capacity per edge required".into()));
    }
    let n = region.num_vertices();
    let m = region.num_edges() as i128;
    let (lcm, scaled) = scale(&problem.capacities)?;
    let finite_sum = scaled
        .iter()
        .flatten()
        .try_fold(0i128, |acc, &c| acc.checked_add(c))
        .ok_or_else(overflow)?;
    let w_inf = finite_sum + 1;
    let mult = if lexi { m + 1 } else { 1 };
    let weight = |c: &Option<i128>| -> Option<i128> {
        match c {
            Some(c) => c.checked_mul(mult)?.checked_add(lexi as i128),
            None => w_inf.checked_mul(mult),
        }
    };

    let class: Vec<usize> = if contract && lexi {
        let class = positive_classes(region, &problem.capacities);
        let src: HashSet<usize> = marked.sources.iter().map(|&s| class[s]).collect();
        if marked.sinks.iter().any(|&t| src.contains(&class[t])) {
            (0..n).collect()
        } else {
            class
        }
    } else {
        (0..n).collect()
    };

    let weights = scaled
        .iter()
        .map(|c| weight(c).ok_or_else(overflow))
        .collect::<Result<Vec<i128>>>()?;
    let (flow, reach) = run_network(marked, &class, &weights)?;
    let (quotient, remainder) = if lexi {
        (flow / (m + 1), flow % (m + 1))
    } else {
        (flow, 0)
    };
    let infinite = quotient >= w_inf;
    // Every cut of a forced-∞ instance has capacity ∞, so the lexicographic
    // optimum is a cut of minimum cardinality over the uncontracted region.
    let (flow, reach, class) = if lexi && infinite {
        let identity: Vec<usize> = (0..n).collect();
        let (k, reach) = run_network(marked, &identity, &vec![1; region.num_edges()])?;
        (k, reach, identity)
    } else {
        (flow, reach, class)
    };
    let on_source_side = |v: usize| reach[class[v]];
    if marked.sinks.iter().any(|&t| on_source_side(t)) {
        return Err(Error::Assertion("a sink is reachable in the residual graph".into()));
    }

    let mut cut_edge_ids = Vec::new();
    let mut cut_scaled: i128 = 0;
    let mut cut_infinite = false;
    for (i, &(u, v)) in region.edge_ends().iter().enumerate() {
        if on_source_side(u) != on_source_side(v) {
            cut_edge_ids.push(i);
            match scaled[i] {
                Some(c) => cut_scaled += c,
                None => cut_infinite = true,
            }
        }
    }
    let cut_cardinality = cut_edge_ids.len();
    let to_capacity = |x: i128| -> Result<Capacity> {
        let num = i64::try_from(x).map_err(|_| overflow())?;
        Ok(Capacity::Finite(Rational::new(num, lcm as i64)))
    };
    let (flow_value, cut_capacity) = if infinite {
        if !cut_infinite {
            return Err(Error::Assertion(
                "flow reached the infinite threshold but the cut is finite".into(),
            ));
        }
        if lexi && flow as usize != cut_cardinality {
            return Err(Error::Assertion(format!(
                "unit flow {flow} differs from cut size {cut_cardinality}"
            )));
        }
        (Capacity::Infinite, Capacity::Infinite)
    } else {
        if cut_infinite || cut_scaled != quotient {
            return Err(Error::Assertion(format!(
                "duality violated: flow {quotient} vs cut {cut_scaled} (scaled by {lcm})"
            )));
        }
        if lexi && remainder as usize != cut_cardinality {
            return Err(Error::Assertion(format!(
                "decoded cardinality {remainder} differs from cut size {cut_cardinality}"
            )));
        }
        let c = to_capacity(quotient)?;
        (c, c)
    };
    if !cut_separates(marked, &cut_edge_ids) {
        return Err(Error::Assertion("cut does not separate sources from sinks".into()));
    }
    let cut_edges = cut_edge_ids.iter().map(|&i| region.edges()[i]).collect();
    let source_side = region
        .vertices()
        .iter()
        .enumerate()
        .filter(|&(i, _)| on_source_side(i))
        .map(|(_, p)| *p)
        .collect();
    Ok(CutResult {
        flow_value,
        cut_capacity,
        cut_cardinality,
        cut_edge_ids,
        cut_edges,
        source_side,
        lexicographic: lexi && !infinite,
    })
}

/// Max flow from the sources to the sinks on the quotient by `class`, with
/// the given symmetric edge weights; returns the flow and the residual
/// reachability of each class representative.
fn run_network(marked: &MarkedRegion, class: &[usize], weights: &[i128]) -> Result<(i128, Vec<bool>)> {
    let region = &marked.region;
    let n = region.num_vertices();
    let (s_node, t_node) = (n, n + 1);
    let mut net = Network::new(n + 2);
    let mut total: i128 = 0;
    for (&(u, v), &w) in region.edge_ends().iter().zip(weights) {
        let (cu, cv) = (class[u], class[v]);
        if cu == cv {
            continue;
        }
        total = total.checked_add(w).ok_or_else(overflow)?;
        net.add_pair(cu, cv, w, w);
    }
    let big = total.checked_add(1).ok_or_else(overflow)?;
    for &s in &marked.sources {
        net.add_pair(s_node, class[s], big, 0);
    }
    for &t in &marked.sinks {
        net.add_pair(class[t], t_node, big, 0);
    }
    let flow = net.max_flow(s_node, t_node);
    Ok((flow, net.residual_reachable(s_node)))
}

/// Whether removing the given local edges leaves no source–sink path.
pub fn cut_separates(marked: &MarkedRegion, cut_edge_ids: &[usize]) -> bool {
    let region = &marked.region;
    let n = region.num_vertices();
    let removed: HashSet<usize> = cut_edge_ids.iter().copied().collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(u, v)) in region.edge_ends().iter().enumerate() {
        if !removed.contains(&i) {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut sink = vec![false; n];
    for &t in &marked.sinks {
        sink[t] = true;
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in &marked.sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        if sink[u] {
            return false;
        }
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    true
}

/// A cylinder region with its marked source and sink sets, reusable across
/// capacity fields.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub marked: MarkedRegion,
    pub h: f64,
}

impl Cylinder {
    /// `cyl(A, h)` with sources `T(A, h)` and sinks `B(A, h)`.
    pub fn top_bottom(a: &HyperRectangle, h: f64) -> Result<Cylinder> {
        let region = build_cylinder(a, h)?;
        let (bottom, top) = bottom_top_sets(a, h)?;
        let sources = region.indices_of(&top)?;
        let sinks = region.indices_of(&bottom)?;
        Ok(Cylinder {
            marked: MarkedRegion::new(region, sources, sinks)?,
            h,
        })
    }

    /// `cyl'(A, h)` with sources `C'_1` and sinks `C'_2`.
    pub fn half_boundaries(a: &HyperRectangle, h: f64) -> Result<Cylinder> {
        let (region, upper, lower) = build_cyl_prime(a, h)?;
        let sources = region.indices_of(&upper)?;
        let sinks = region.indices_of(&lower)?;
        Ok(Cylinder {
            marked: MarkedRegion::new(region, sources, sinks)?,
            h,
        })
    }

    pub fn problem(&self, field: &CapacityField) -> FlowProblem<'_> {
        FlowProblem::from_field(&self.marked, field)
    }

    pub fn max_flow(&self, field: &CapacityField) -> Result<CutResult> {
        max_flow(&self.problem(field))
    }

    pub fn lexi_min_cut(&self, field: &CapacityField) -> Result<CutResult> {
        lexi_min_cut(&self.problem(field))
    }
}

/// `Φ_G(A, h)`: maximal flow from the top to the bottom of `cyl(A, h)`.
pub fn phi(a: &HyperRectangle, h: f64, field: &CapacityField) -> Result<CutResult> {
    Cylinder::top_bottom(a, h)?.max_flow(field)
}

/// `τ_G(A, h)`: maximal flow from `C'_1` to `C'_2` in `cyl'(A, h)`.
pub fn tau(a: &HyperRectangle, h: f64, field: &CapacityField) -> Result<CutResult> {
    Cylinder::half_boundaries(a, h)?.max_flow(field)
}

/// `ψ_G(A, h, v)`: the smallest cardinality of a top–bottom cut of capacity `Φ_G(A, h)`.
pub fn psi(a: &HyperRectangle, h: f64, field: &CapacityField) -> Result<(usize, CutResult)> {
    let cut = Cylinder::top_bottom(a, h)?.lexi_min_cut(field)?;
    Ok((cut.cut_cardinality, cut))
}

#[derive(Clone, Copy, Debug)]
pub struct ChiOptions {
    pub height: HeightOptions,
    pub window_cap: i64,
    pub contract_positive: bool,
    /// When set, the field's law is checked against the supercritical-zero
    /// regime before any cluster is explored.
    pub constants: Option<RegimeConstants>,
}

impl Default for ChiOptions {
    fn default() -> Self {
        ChiOptions {
            height: HeightOptions::default(),
            window_cap: DEFAULT_WINDOW_CAP,
            contract_positive: true,
            constants: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChiResult {
    pub cardinality: usize,
    /// Local ids refer to `window.region`.
    pub cut: CutResult,
    pub height: RandomHeight,
    pub window: SlabWindow,
}

/// `χ_G(A, h, v)`: the smallest number of edges of a null-capacity set cutting
/// `Ā` from `hyp(A + H_{G,h}(A) v)` in `slab(A, H_{G,h}(A), v)`.
///
/// The infinite slab is truncated to a lateral window whose outer layer is
/// added to the sinks, so every window cut is also a cut in the slab. The
/// margin starts beyond the extent of the clusters meeting `Ā` and doubles
/// until the optimal cut avoids the window's outer layer and its cardinality is
/// unchanged by one further doubling.
pub fn chi(a: &HyperRectangle, h: f64, field: &CapacityField, opts: &ChiOptions) -> Result<ChiResult> {
    if let Some(c) = &opts.constants {
        require_supercritical_zero(&field.distribution(), c)?;
    }
    let d = a.dim();
    let height = random_height(a, h, field, &opts.height)?;
    let extent = height
        .thickened_clusters()
        .iter()
        .filter_map(|c| c.diameter)
        .fold(0.0f64, f64::max);
    let mut margin = d as i64 + extent.ceil() as i64 + 1;
    let mut settled: Option<(usize, ChiResult)> = None;
    loop {
        if margin > opts.window_cap {
            return Err(Error::WindowOverflow {
                margin,
                cap: opts.window_cap,
            });
        }
        let window = slab_window(a, height.value, margin)?;
        let sources = window.region.indices_of(&thicken(a).vertices())?;
        let sinks: Vec<usize> = window
            .escape
            .iter()
            .enumerate()
            .filter(|&(i, &e)| e || window.w_layer.binary_search(&window.region.vertices()[i]).is_ok())
            .map(|(i, _)| i)
            .collect();
        let marked = MarkedRegion::new(window.region.clone(), sources, sinks)?;
        let capacities = marked
            .region
            .edges()
            .iter()
            .map(|e| {
                if field.edge_is_positive(e, d) {
                    Capacity::Infinite
                } else {
                    Capacity::zero()
                }
            })
            .collect();
        let problem = FlowProblem::new(&marked, capacities)?;
        let cut = lexi_min_cut_with(
            &problem,
            SolveOptions {
                contract_positive: opts.contract_positive,
            },
        )?;
        let touches_boundary = cut.cut_edge_ids.iter().any(|&i| {
            let (u, v) = marked.region.edge_ends()[i];
            window.escape[u] || window.escape[v]
        });
        if cut.cut_capacity.is_zero() && !touches_boundary {
            let cardinality = cut.cut_cardinality;
            if let Some((prev, _)) = &settled {
                if *prev == cardinality {
                    return Ok(ChiResult {
                        cardinality,
                        cut,
                        height,
                        window,
                    });
                }
            }
            settled = Some((
                cardinality,
                ChiResult {
                    cardinality,
                    cut,
                    height: height.clone(),
                    window,
                },
            ));
        } else {
            settled = None;
        }
        margin *= 2;
    }
}

/// Whether `cut` separates `sources` from both the `W` layer and the lateral
/// escape layer inside `window`.
pub fn separates_in_window(window: &SlabWindow, sources: &[Point], cut: &[Edge]) -> bool {
    let region = &window.region;
    let d = region.dim();
    let removed: HashSet<Edge> = cut.iter().copied().collect();
    let targets: HashSet<Point> = window.w_layer.iter().copied().chain(window.escape_vertices()).collect();
    let mut seen: HashSet<Point> = HashSet::new();
    let mut queue: VecDeque<Point> = VecDeque::new();
    for s in sources {
        if region.contains(s) && seen.insert(*s) {
            queue.push_back(*s);
        }
    }
    while let Some(x) = queue.pop_front() {
        if targets.contains(&x) {
            return false;
        }
        for y in x.neighbors(d) {
            if region.contains(&y) && !removed.contains(&Edge::between(x, y)) && seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    true
}
