//! Clusters of the positive-capacity percolation `(1_{t(e) > 0})` and the
//! objects built from them: exterior edge boundaries, the random height and
//! the null cutset made of cluster boundaries.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::io::Write;

use serde::Serialize;

use crate::capacity::{regime_of, CapacityDistribution, CapacityField, Rational, RegimeConstants, ZeroRegime};
use crate::error::{Error, Result};
use crate::geometry::{thicken, Edge, HyperRectangle, Point, GEOM_TOL};
use crate::seed::derive_seed;

/// Default cap on the number of vertices explored per cluster.
pub const DEFAULT_CLUSTER_CAP: usize = 1_000_000;

/// `c_d = 2d`: each vertex has `2d` incident edges.
pub fn boundary_constant(d: usize) -> usize {
    2 * d
}

#[derive(Clone, Debug)]
pub struct ClusterReport {
    pub root: Point,
    /// Lexicographically sorted.
    pub vertices: Vec<Point>,
    /// Largest Euclidean distance between two vertices; `None` when truncated.
    pub diameter: Option<f64>,
    /// `∂_e C`, sorted; empty when truncated.
    pub boundary: Vec<Edge>,
    pub truncated: bool,
    pub d: usize,
}

#[derive(Serialize)]
struct ClusterJson {
    d: usize,
    root: Vec<i32>,
    card_v: usize,
    diameter: Option<f64>,
    truncated: bool,
    vertices: Vec<Vec<i32>>,
    boundary: Vec<[Vec<i32>; 2]>,
}

impl ClusterReport {
    pub fn card_v(&self) -> usize {
        self.vertices.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let d = self.d;
        let json = ClusterJson {
            d,
            root: self.root.coords(d).to_vec(),
            card_v: self.card_v(),
            diameter: self.diameter,
            truncated: self.truncated,
            vertices: self.vertices.iter().map(|v| v.coords(d).to_vec()).collect(),
            boundary: self
                .boundary
                .iter()
                .map(|e| [e.lo.coords(d).to_vec(), e.hi().coords(d).to_vec()])
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }
}

/// Source of the positive-edge percolation `1_{t(e) > 0}`.
pub trait PositiveEdges {
    fn is_positive(&self, e: &Edge, d: usize) -> bool;
}

impl PositiveEdges for CapacityField {
    fn is_positive(&self, e: &Edge, d: usize) -> bool {
        self.edge_is_positive(e, d)
    }
}

/// An explicit set of positive edges; every other edge has capacity 0.
impl PositiveEdges for HashSet<Edge> {
    fn is_positive(&self, e: &Edge, _d: usize) -> bool {
        self.contains(e)
    }
}

/// The cluster of `x` in the positive-capacity percolation (`+∞` counts as
/// positive), explored breadth first on the infinite lattice.
///
/// Exploration stops with `truncated = true` as soon as more than `cap`
/// vertices have been found.
pub fn cluster_of<F: PositiveEdges + ?Sized>(x: Point, field: &F, d: usize, cap: usize) -> ClusterReport {
    assert!(cap >= 1, "cluster cap must be at least 1");
    let mut seen: HashSet<Point> = HashSet::from([x]);
    let mut order = vec![x];
    let mut queue = VecDeque::from([x]);
    let mut truncated = false;
    'bfs: while let Some(p) = queue.pop_front() {
        for k in 0..d {
            for delta in [-1, 1] {
                let q = p.step(k, delta);
                if seen.contains(&q) {
                    continue;
                }
                let e = if delta == 1 {
                    Edge { lo: p, axis: k as u8 }
                } else {
                    Edge { lo: q, axis: k as u8 }
                };
                if field.is_positive(&e, d) {
                    seen.insert(q);
                    order.push(q);
                    if order.len() > cap {
                        truncated = true;
                        break 'bfs;
                    }
                    queue.push_back(q);
                }
            }
        }
    }
    order.sort_unstable();
    let (diameter, boundary) = if truncated {
        (None, Vec::new())
    } else {
        (Some(diameter(&order)), exterior_boundary(d, &order))
    };
    ClusterReport {
        root: x,
        vertices: order,
        diameter,
        boundary,
        truncated,
        d,
    }
}

fn diameter(points: &[Point]) -> f64 {
    let mut best = 0i64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.dist2(b));
        }
    }
    (best as f64).sqrt()
}

/// `∂_e C`: edges `⟨x, y⟩` with `x ∈ C` and `y` in the infinite component of
/// `Z^d \ C`, sorted. Edges into finite holes of `C` are excluded.
pub fn exterior_boundary(d: usize, vertices: &[Point]) -> Vec<Edge> {
    if vertices.is_empty() {
        return Vec::new();
    }
    let inside: HashSet<Point> = vertices.iter().copied().collect();
    let mut lo = vertices[0];
    let mut hi = vertices[0];
    for p in vertices {
        for i in 0..d {
            lo.0[i] = lo.0[i].min(p.0[i]);
            hi.0[i] = hi.0[i].max(p.0[i]);
        }
    }
    for i in 0..d {
        lo.0[i] -= 1;
        hi.0[i] += 1;
    }
    // Flood fill the complement inside the inflated box from one of its corners;
    // the box shell is outside C, connected, and reaches infinity.
    let extent: Vec<usize> = (0..d).map(|i| (hi.0[i] - lo.0[i] + 1) as usize).collect();
    let cell = |p: &Point| -> usize {
        extent
            .iter()
            .enumerate()
            .fold(0usize, |idx, (i, e)| idx * e + (p.0[i] - lo.0[i]) as usize)
    };
    let total: usize = extent.iter().product();
    let mut outside = vec![false; total];
    outside[cell(&lo)] = true;
    let mut queue = VecDeque::from([lo]);
    while let Some(p) = queue.pop_front() {
        for q in p.neighbors(d) {
            if (0..d).any(|i| q.0[i] < lo.0[i] || q.0[i] > hi.0[i]) || inside.contains(&q) {
                continue;
            }
            let c = cell(&q);
            if !outside[c] {
                outside[c] = true;
                queue.push_back(q);
            }
        }
    }
    let mut edges = Vec::new();
    for x in vertices {
        for y in x.neighbors(d) {
            if !inside.contains(&y) && outside[cell(&y)] {
                edges.push(Edge::between(*x, y));
            }
        }
    }
    edges.sort_unstable();
    edges
}

/// Options for [`random_height`] and [`lemma_cutset`].
#[derive(Clone, Copy, Debug)]
pub struct HeightOptions {
    pub cluster_cap: usize,
    /// Accept `h = 2d` in addition to `h > 2d`.
    pub allow_boundary_height: bool,
}

impl Default for HeightOptions {
    fn default() -> Self {
        HeightOptions {
            cluster_cap: DEFAULT_CLUSTER_CAP,
            allow_boundary_height: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomHeight {
    pub base: HyperRectangle,
    pub h: f64,
    /// `H_{G,h}(A) ≥ h`.
    pub value: f64,
    /// Distinct clusters of the vertices of `cyl(A, h/2)`, in order of discovery.
    pub contributing_clusters: Vec<ClusterReport>,
}

impl RandomHeight {
    /// Clusters containing a vertex of `Ā`.
    pub fn thickened_clusters(&self) -> Vec<&ClusterReport> {
        let abar = thicken(&self.base);
        self.contributing_clusters
            .iter()
            .filter(|c| c.vertices.iter().any(|v| abar.contains(v)))
            .collect()
    }
}

fn check_height_hypothesis(d: usize, h: f64, opts: &HeightOptions) -> Result<()> {
    let two_d = 2.0 * d as f64;
    let ok = if opts.allow_boundary_height {
        h >= two_d
    } else {
        h > two_d
    };
    if !ok {
        return Err(Error::InvalidInput(format!(
            "height {h} must exceed 2d = {two_d} (equality only with the boundary override)"
        )));
    }
    Ok(())
}

/// Clusters of all lattice points of `points`, deduplicated.
fn clusters_of_points<F: PositiveEdges + ?Sized>(
    points: &[Point],
    field: &F,
    d: usize,
    cap: usize,
) -> Result<Vec<ClusterReport>> {
    let mut owner: HashMap<Point, usize> = HashMap::new();
    let mut clusters = Vec::new();
    for &x in points {
        if owner.contains_key(&x) {
            continue;
        }
        let c = cluster_of(x, field, d, cap);
        if c.truncated {
            return Err(Error::Regime(format!(
                "cluster of {:?} exceeds {cap} vertices: positive edges may percolate",
                x.coords(d)
            )));
        }
        for v in &c.vertices {
            owner.insert(*v, clusters.len());
        }
        clusters.push(c);
    }
    Ok(clusters)
}

/// `H_{G,h}(A) = inf{t ≥ h : (∪_{x ∈ cyl(A,h/2)} C(x)) ∩ W(A, t, v) = ∅}`.
///
/// A vertex at height `s ≥ 0` lies in `W(A, t, v)` exactly when
/// `s ≤ t < s + δ`, where `δ = max_k |n_k| / ‖n‖` is the largest height gain of
/// a single lattice step, so the infimum is found by sweeping these intervals.
pub fn random_height<F: PositiveEdges + ?Sized>(
    a: &HyperRectangle,
    h: f64,
    field: &F,
    opts: &HeightOptions,
) -> Result<RandomHeight> {
    let d = a.dim();
    check_height_hypothesis(d, h, opts)?;
    let base_points = a.prism(0.0, h / 2.0, 0.0).points();
    let clusters = clusters_of_points(&base_points, field, d, opts.cluster_cap)?;
    let dir = a.direction();
    let step = dir.normal().iter().map(|c| c.abs()).max().unwrap() as f64 / dir.norm();
    let mut intervals: Vec<(f64, f64)> = clusters
        .iter()
        .flat_map(|c| c.vertices.iter())
        .map(|v| a.height(v))
        .filter(|&s| s >= -GEOM_TOL)
        .map(|s| (s, s + step))
        .collect();
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut t = h;
    for (start, end) in intervals {
        if start - GEOM_TOL > t {
            break;
        }
        if end - GEOM_TOL > t {
            t = end;
        }
    }
    let total: usize = clusters.iter().map(|c| c.card_v()).sum();
    if t > h + total as f64 + 2.0 * d as f64 {
        return Err(Error::Assertion(format!(
            "random height {t} exceeds h + cluster mass + 2d"
        )));
    }
    Ok(RandomHeight {
        base: a.clone(),
        h,
        value: t,
        contributing_clusters: clusters,
    })
}

/// `∪_{x ∈ Ā ∩ Z^d} ∂_e C(x)`: a null-capacity set cutting `Ā` from
/// `hyp(A + H_{G,h}(A) v)` in the slab. Sorted, without duplicates.
pub fn lemma_cutset<F: PositiveEdges + ?Sized>(
    a: &HyperRectangle,
    h: f64,
    field: &F,
    opts: &HeightOptions,
) -> Result<Vec<Edge>> {
    let d = a.dim();
    check_height_hypothesis(d, h, opts)?;
    let clusters = clusters_of_points(&thicken(a).vertices(), field, d, opts.cluster_cap)?;
    Ok(union_of_boundaries(&clusters))
}

pub(crate) fn union_of_boundaries<'a>(clusters: impl IntoIterator<Item = &'a ClusterReport>) -> Vec<Edge> {
    let set: BTreeSet<Edge> = clusters.into_iter().flat_map(|c| c.boundary.iter().copied()).collect();
    set.into_iter().collect()
}

/// Upper bound `Σ_{x ∈ Ā} c_d card_v(C(x))` on the null cutset size.
pub fn lemma_bound<F: PositiveEdges + ?Sized>(a: &HyperRectangle, field: &F, cap: usize) -> Result<usize> {
    let d = a.dim();
    let mut total = 0usize;
    let mut sizes: HashMap<Point, usize> = HashMap::new();
    for x in thicken(a).vertices() {
        let size = match sizes.get(&x) {
            Some(&s) => s,
            None => {
                let c = cluster_of(x, field, d, cap);
                if c.truncated {
                    return Err(Error::Regime("cluster cap exceeded".into()));
                }
                for v in &c.vertices {
                    sizes.insert(*v, c.card_v());
                }
                c.card_v()
            }
        };
        total += boundary_constant(d) * size;
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct SurvivalPoint {
    pub size: usize,
    /// Empirical `P[card_v > size]`.
    pub empirical: f64,
    /// `κ̂₁ exp(−κ̂₂ size)` when a fit exists.
    pub fitted: Option<f64>,
}

/// Exponential fit of the origin-cluster size tail.
#[derive(Clone, Debug, Serialize)]
pub struct TailFit {
    pub p: f64,
    pub d: usize,
    pub samples: usize,
    pub kappa1_hat: Option<f64>,
    pub kappa2_hat: Option<f64>,
    pub r_squared: Option<f64>,
    /// Inclusive range of sizes used in the regression.
    pub fit_range: (usize, usize),
    pub max_size: usize,
    pub survival: Vec<SurvivalPoint>,
}

impl TailFit {
    /// `P[card_v ≥ k]`.
    pub fn survival_at_least(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.survival
            .iter()
            .find(|s| s.size == k - 1)
            .map(|s| s.empirical)
            .unwrap_or(if k == 1 { 1.0 } else { 0.0 })
    }

    /// CSV with columns `size,empirical_survival,fitted_survival`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["size", "empirical_survival", "fitted_survival"])?;
        for s in &self.survival {
            w.write_record([
                s.size.to_string(),
                s.empirical.to_string(),
                s.fitted.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lower end of the regression range.
pub const TAIL_FIT_MIN_SIZE: usize = 5;

/// Samples origin clusters of `G_p` on `Z^d` and fits
/// `log P[card_v > n] ≈ log κ₁ − κ₂ n` by least squares on
/// `[5, 95th percentile of the observed sizes]`.
pub fn tail_fit(p: Rational, constants: &RegimeConstants, samples: usize, seed: u64) -> Result<TailFit> {
    let d = constants.d;
    let dist = CapacityDistribution::bernoulli(p)?;
    if regime_of(&dist, constants).zero != ZeroRegime::SupercriticalZero {
        return Err(Error::Regime(format!(
            "p = {} is not below p_c({d}) = {}",
            crate::capacity::format_rational(&p),
            constants.pc
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("tail fit needs at least one sample".into()));
    }
    let mut sizes = Vec::with_capacity(samples);
    for i in 0..samples {
        let field = CapacityField::new(derive_seed(seed, i as u64, 0), dist.clone());
        let c = cluster_of(Point::origin(), &field, d, DEFAULT_CLUSTER_CAP);
        if c.truncated {
            return Err(Error::Regime("origin cluster exceeded the size cap".into()));
        }
        sizes.push(c.card_v());
    }
    sizes.sort_unstable();
    let max_size = *sizes.last().unwrap();
    let p95 = sizes[((0.95 * samples as f64).ceil() as usize).clamp(1, samples) - 1];
    let n = samples as f64;
    // survival[k] = #{size > k} / n
    let mut survival: Vec<f64> = Vec::with_capacity(max_size + 1);
    let mut idx = 0;
    for k in 0..=max_size {
        while idx < sizes.len() && sizes[idx] <= k {
            idx += 1;
        }
        survival.push((sizes.len() - idx) as f64 / n);
    }
    let fit_range = (TAIL_FIT_MIN_SIZE, p95);
    let pts: Vec<(f64, f64)> = (fit_range.0..=fit_range.1.min(max_size))
        .filter(|&k| survival[k] > 0.0)
        .map(|k| (k as f64, survival[k].ln()))
        .collect();
    let fit = least_squares(&pts);
    let (kappa1_hat, kappa2_hat, r_squared) = match fit {
        Some((intercept, slope, r2)) => (Some(intercept.exp()), Some(-slope), r2),
        None => (None, None, None),
    };
    let survival = survival
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &s)| SurvivalPoint {
            size: k,
            empirical: s,
            fitted: kappa1_hat.zip(kappa2_hat).map(|(k1, k2)| k1 * (-k2 * k as f64).exp()),
        })
        .collect();
    Ok(TailFit {
        p: *p.numer() as f64 / *p.denom() as f64,
        d,
        samples,
        kappa1_hat,
        kappa2_hat,
        r_squared,
        fit_range,
        max_size,
        survival,
    })
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b, R²)`.
fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64, Option<f64>)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if pts.len() >= 3 && syy > 0.0 {
        Some(sxy * sxy / (sxx * syy))
    } else {
        None
    };
    Some((a, b, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::Capacity;
    use crate::geometry::for_each_in_box;

    fn zero_field() -> CapacityField {
        CapacityField::new(1, CapacityDistribution::point_mass(Capacity::zero()))
    }

    fn one_field() -> CapacityField {
        CapacityField::new(1, CapacityDistribution::point_mass(Capacity::integer(1)))
    }

    #[test]
    fn singleton_and_infinite_clusters() {
        let c = cluster_of(Point::origin(), &zero_field(), 3, 10);
        assert_eq!(c.card_v(), 1);
        assert_eq!(c.diameter, Some(0.0));
        assert_eq!(c.boundary.len(), 6);
        let c = cluster_of(Point::origin(), &one_field(), 3, 1000);
        assert!(c.truncated);
    }

    #[test]
    fn boundary_of_domino_and_shell() {
        let domino = [Point::new(&[0, 0, 0]), Point::new(&[1, 0, 0])];
        assert_eq!(exterior_boundary(3, &domino).len(), 10);

        let mut shell = Vec::new();
        for_each_in_box(3, &Point::new(&[0, 0, 0]), &Point::new(&[2, 2, 2]), |p| {
            if p != Point::new(&[1, 1, 1]) {
                shell.push(p);
            }
        });
        let ext = exterior_boundary(3, &shell);
        // full boundary of the 3x3x3 cube is 6 * 9 = 54 edges; the 6 edges to the
        // hidden center are excluded
        assert_eq!(ext.len(), 54);
        assert!(ext.iter().all(|e| !e.touches(&Point::new(&[1, 1, 1]))));
    }

    #[test]
    fn height_of_all_zero_field() {
        let a = HyperRectangle::straight(&[3.0, 3.0]).unwrap();
        let rh = random_height(&a, 7.0, &zero_field(), &HeightOptions::default()).unwrap();
        assert_eq!(rh.value, 7.0);
        assert!(random_height(&a, 6.0, &zero_field(), &HeightOptions::default()).is_err());
        let opts = HeightOptions {
            allow_boundary_height: true,
            ..Default::default()
        };
        assert_eq!(random_height(&a, 6.0, &zero_field(), &opts).unwrap().value, 6.0);
        let opts = HeightOptions {
            cluster_cap: 1000,
            ..Default::default()
        };
        assert!(matches!(
            random_height(&a, 7.0, &one_field(), &opts),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn lemma_cutset_all_zero_is_union_of_singleton_boundaries() {
        let a = HyperRectangle::straight(&[3.0, 3.0]).unwrap();
        let cut = lemma_cutset(&a, 7.0, &zero_field(), &HeightOptions::default()).unwrap();
        // every edge incident to the box [0,3]^2 x [0,3]: 3 * 4*4*4 internal
        // edges (144) plus the 6 * 16 = 96 edges leaving the box
        assert_eq!(cut.len(), 144 + 96);
    }

    #[test]
    fn tail_fit_degenerate() {
        let c = RegimeConstants::for_dim(3).unwrap();
        let fit = tail_fit(Rational::new(0, 1), &c, 200, 5).unwrap();
        assert_eq!(fit.survival_at_least(2), 0.0);
        assert!(fit.kappa2_hat.is_none());
        assert!(tail_fit(Rational::new(1, 2), &c, 10, 5).is_err());
    }

    #[test]
    fn least_squares_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let (a, b, r2) = least_squares(&pts).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
        assert!((r2.unwrap() - 1.0).abs() < 1e-12);
    }
}
