//! Lattice geometry: directions, hyperrectangles and the finite lattice regions
//! carved out of `Z^d` by cylinders, slabs and their discretized boundaries.
//!
//! All membership tests go through [`HyperRectangle::height`] and
//! [`HyperRectangle::lateral`]. Lattice dot products with the integer normal and
//! the integer side directions are exact; only the final comparison against a
//! real threshold uses the tolerance [`GEOM_TOL`], and points on the closed
//! boundary count as inside.
//!
//! The orientation of a cylinder follows the sign of the user-supplied normal:
//! negating the normal swaps the roles of the bottom and the top sets.

use std::collections::HashMap;
use std::io::Write;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 5;

/// Slack used when comparing lattice coordinates with real thresholds.
pub const GEOM_TOL: f64 = 1e-9;

/// A point of `Z^d`, stored in a fixed array; coordinates past `d` are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub [i32; MAX_DIM]);

impl Point {
    pub fn new(coords: &[i32]) -> Point {
        assert!(coords.len() <= MAX_DIM, "at most {MAX_DIM} coordinates");
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point(c)
    }

    pub fn origin() -> Point {
        Point::default()
    }

    pub fn coords(&self, d: usize) -> &[i32] {
        &self.0[..d]
    }

    /// Neighbor obtained by moving `delta` (±1) along `axis`.
    #[inline]
    pub fn step(&self, axis: usize, delta: i32) -> Point {
        let mut c = self.0;
        c[axis] += delta;
        Point(c)
    }

    /// The `2d` nearest neighbors, ordered by axis then sign (−, +).
    pub fn neighbors(&self, d: usize) -> impl Iterator<Item = Point> + '_ {
        (0..d).flat_map(move |k| [self.step(k, -1), self.step(k, 1)])
    }

    #[inline]
    pub fn dot(&self, v: &[i64; MAX_DIM]) -> i64 {
        self.0.iter().zip(v).map(|(&a, &b)| a as i64 * b).sum()
    }

    pub fn dist2(&self, other: &Point) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let t = (a - b) as i64;
                t * t
            })
            .sum()
    }
}

/// An undirected nearest-neighbor edge `⟨lo, lo + e_axis⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub lo: Point,
    pub axis: u8,
}

impl Edge {
    /// Edge joining two neighbors, given in any order.
    pub fn between(a: Point, b: Point) -> Edge {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let axis = (0..MAX_DIM)
            .find(|&k| lo.0[k] != hi.0[k])
            .expect("endpoints must differ");
        debug_assert_eq!(lo.step(axis, 1), hi, "endpoints must be neighbors");
        Edge { lo, axis: axis as u8 }
    }

    pub fn hi(&self) -> Point {
        self.lo.step(self.axis as usize, 1)
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (self.lo, self.hi())
    }

    pub fn touches(&self, p: &Point) -> bool {
        self.lo == *p || self.hi() == *p
    }

    /// Injective packing of the edge into a 64-bit identifier.
    ///
    /// Each coordinate gets `(64 − 3) / d` bits (30 for `d = 2`, 20 for `d = 3`,
    /// 15 for `d = 4`, 12 for `d = 5`) and the axis gets 3 bits. The identifier
    /// depends only on the edge, never on the region it was enumerated from.
    pub fn global_id(&self, d: usize) -> u64 {
        let bits = coord_bits(d);
        let offset = 1i64 << (bits - 1);
        let mut id = 0u64;
        for &c in self.lo.coords(d) {
            let shifted = c as i64 + offset;
            assert!(
                (0..(1i64 << bits)).contains(&shifted),
                "coordinate {c} outside the packable range for d = {d}"
            );
            id = (id << bits) | shifted as u64;
        }
        (id << 3) | self.axis as u64
    }
}

fn coord_bits(d: usize) -> u32 {
    ((64 - 3) / d) as u32
}

/// A rational direction given by a primitive integer normal vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    d: usize,
    normal: [i64; MAX_DIM],
    norm: f64,
}

impl Direction {
    /// Builds a direction from an integer normal; a common factor is divided out.
    pub fn new(normal: &[i64]) -> Result<Direction> {
        let d = normal.len();
        if !(2..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidGeometry(format!(
                "dimension {d} outside the supported range 2..={MAX_DIM}"
            )));
        }
        let g = normal.iter().fold(0i64, |g, &c| g.gcd(&c));
        if g == 0 {
            return Err(Error::InvalidGeometry("normal vector is zero".into()));
        }
        let mut n = [0; MAX_DIM];
        for (dst, &c) in n.iter_mut().zip(normal) {
            *dst = c / g;
        }
        let norm = (n.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
        Ok(Direction { d, normal: n, norm })
    }

    /// The straight direction `e_d`.
    pub fn straight(d: usize) -> Result<Direction> {
        let mut n = vec![0; d];
        if d > 0 {
            n[d - 1] = 1;
        }
        Direction::new(&n)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn normal(&self) -> &[i64] {
        &self.normal[..self.d]
    }

    pub fn normal_array(&self) -> &[i64; MAX_DIM] {
        &self.normal
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn unit(&self) -> Vec<f64> {
        self.normal().iter().map(|&c| c as f64 / self.norm).collect()
    }

    /// True when the normal is a signed canonical basis vector.
    pub fn is_axis_aligned(&self) -> bool {
        self.normal().iter().filter(|&&c| c != 0).count() == 1
    }

    /// Integer orthogonal frame of the hyperplane normal to the direction.
    ///
    /// Canonical basis vectors `e_1, …, e_d` are projected in that order onto
    /// the orthogonal complement of the normal and of the vectors already
    /// accepted; zero projections are skipped and each accepted vector is
    /// reduced to a primitive integer vector.
    pub fn lateral_frame(&self) -> Vec<[i64; MAX_DIM]> {
        let d = self.d;
        let mut basis: Vec<[i64; MAX_DIM]> = vec![self.normal];
        let mut frame = Vec::with_capacity(d - 1);
        for k in 0..d {
            if frame.len() == d - 1 {
                break;
            }
            let mut v = [0i64; MAX_DIM];
            v[k] = 1;
            for b in &basis {
                let bb = dot(b, b);
                let vb = dot(&v, b);
                if vb == 0 {
                    continue;
                }
                for i in 0..d {
                    v[i] = bb * v[i] - vb * b[i];
                }
                let g = v[..d].iter().fold(0i64, |g, &c| g.gcd(&c));
                if g > 1 {
                    v.iter_mut().for_each(|c| *c /= g);
                }
            }
            if v.iter().any(|&c| c != 0) {
                basis.push(v);
                frame.push(v);
            }
        }
        frame
    }
}

fn dot(a: &[i64; MAX_DIM], b: &[i64; MAX_DIM]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A non-degenerate `(d−1)`-dimensional rectangle `A` normal to a direction.
///
/// `A = { base + Σ λ_i ŵ_i : λ_i ∈ [0, L_i] }` where `ŵ_i` are the unit side
/// vectors from [`Direction::lateral_frame`] and `L_i` the side lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperRectangle {
    direction: Direction,
    base_point: Vec<f64>,
    side_lengths: Vec<f64>,
    side_dirs: Vec<[i64; MAX_DIM]>,
    side_norms: Vec<f64>,
    base_dot_normal: f64,
    base_dot_sides: Vec<f64>,
}

impl HyperRectangle {
    pub fn new(direction: Direction, base_point: Vec<f64>, side_lengths: Vec<f64>) -> Result<HyperRectangle> {
        let d = direction.dim();
        if base_point.len() != d {
            return Err(Error::InvalidGeometry(format!(
                "base point has {} coordinates, expected {d}",
                base_point.len()
            )));
        }
        if side_lengths.len() != d - 1 {
            return Err(Error::InvalidGeometry(format!(
                "{} side lengths given, expected {}",
                side_lengths.len(),
                d - 1
            )));
        }
        if let Some(l) = side_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "side length {l} is not a positive number"
            )));
        }
        if base_point.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGeometry("base point is not finite".into()));
        }
        let side_dirs = direction.lateral_frame();
        let side_norms = side_dirs.iter().map(|w| (dot(w, w) as f64).sqrt()).collect();
        let real_dot = |v: &[i64; MAX_DIM]| base_point.iter().zip(v).map(|(b, &c)| b * c as f64).sum();
        let base_dot_normal = real_dot(direction.normal_array());
        let base_dot_sides = side_dirs.iter().map(real_dot).collect();
        Ok(HyperRectangle {
            direction,
            base_point,
            side_lengths,
            side_dirs,
            side_norms,
            base_dot_normal,
            base_dot_sides,
        })
    }

    /// `Π [0, k_i] × {0}` with normal `e_d`.
    pub fn straight(side_lengths: &[f64]) -> Result<HyperRectangle> {
        let d = side_lengths.len() + 1;
        HyperRectangle::new(Direction::straight(d)?, vec![0.0; d], side_lengths.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.side_lengths
    }

    /// The real side vectors `L_i ŵ_i`.
    pub fn side_vectors(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.side_dirs
            .iter()
            .zip(&self.side_norms)
            .zip(&self.side_lengths)
            .map(|((w, n), l)| (0..d).map(|i| w[i] as f64 / n * l).collect())
            .collect()
    }

    /// `H^{d−1}(A)`.
    pub fn area(&self) -> f64 {
        self.side_lengths.iter().product()
    }

    /// Homothety `nA` (base point and side lengths scaled by `factor`).
    pub fn scaled(&self, factor: f64) -> Result<HyperRectangle> {
        HyperRectangle::new(
            self.direction.clone(),
            self.base_point.iter().map(|c| c * factor).collect(),
            self.side_lengths.iter().map(|l| l * factor).collect(),
        )
    }

    /// Signed distance of `x` to `hyp(A)` along the normal.
    #[inline]
    pub fn height(&self, x: &Point) -> f64 {
        (x.dot(self.direction.normal_array()) as f64 - self.base_dot_normal) / self.direction.norm
    }

    /// Coordinate of `x` along the `i`-th unit side vector, relative to the base point.
    #[inline]
    pub fn lateral(&self, x: &Point, i: usize) -> f64 {
        (x.dot(&self.side_dirs[i]) as f64 - self.base_dot_sides[i]) / self.side_norms[i]
    }

    /// Whether the closed segment `[x, y]` meets `A + level·v`.
    pub fn segment_meets_face(&self, x: &Point, y: &Point, level: f64) -> bool {
        let hx = self.height(x) - level;
        let hy = self.height(y) - level;
        let (mut lo, mut hi) = if (hx - hy).abs() <= GEOM_TOL {
            if hx.abs() > GEOM_TOL {
                return false;
            }
            (0.0, 1.0)
        } else {
            let l = hx / (hx - hy);
            if !(-GEOM_TOL..=1.0 + GEOM_TOL).contains(&l) {
                return false;
            }
            let l = l.clamp(0.0, 1.0);
            (l, l)
        };
        for i in 0..self.side_dirs.len() {
            let a = self.lateral(x, i);
            let b = self.lateral(y, i);
            let len = self.side_lengths[i];
            let slope = b - a;
            if slope.abs() <= GEOM_TOL {
                if a < -GEOM_TOL || a > len + GEOM_TOL {
                    return false;
                }
                continue;
            }
            let t0 = (-GEOM_TOL - a) / slope;
            let t1 = (len + GEOM_TOL - a) / slope;
            let (t0, t1) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            lo = lo.max(t0);
            hi = hi.min(t1);
            if lo > hi {
                return false;
            }
        }
        true
    }

    /// The prism `{x + t v : x ∈ A inflated by margin, t ∈ [lo, hi]}`.
    pub fn prism(&self, lo: f64, hi: f64, margin: f64) -> Prism<'_> {
        Prism {
            rect: self,
            lo,
            hi,
            margin,
        }
    }
}

/// A right prism over `A` (laterally inflated by `margin` in every side
/// direction) between heights `lo` and `hi`.
#[derive(Clone, Copy, Debug)]
pub struct Prism<'a> {
    pub rect: &'a HyperRectangle,
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
}

impl Prism<'_> {
    #[inline]
    pub fn contains(&self, x: &Point) -> bool {
        let t = self.rect.height(x);
        if t < self.lo - GEOM_TOL || t > self.hi + GEOM_TOL {
            return false;
        }
        self.laterally_contains(x)
    }

    #[inline]
    pub fn laterally_contains(&self, x: &Point) -> bool {
        (0..self.rect.side_dirs.len()).all(|i| {
            let s = self.rect.lateral(x, i);
            s >= -self.margin - GEOM_TOL && s <= self.rect.side_lengths[i] + self.margin + GEOM_TOL
        })
    }

    /// Integer bounding box `[min, max]` (inclusive) of the prism.
    pub fn bounding_box(&self) -> (Point, Point) {
        let d = self.rect.dim();
        let unit = self.rect.direction.unit();
        let sides: Vec<Vec<f64>> = self
            .rect
            .side_dirs
            .iter()
            .zip(&self.rect.side_norms)
            .map(|(w, n)| (0..d).map(|i| w[i] as f64 / n).collect())
            .collect();
        let mut lo = [f64::INFINITY; MAX_DIM];
        let mut hi = [f64::NEG_INFINITY; MAX_DIM];
        for mask in 0..(1usize << (d - 1)) {
            for t in [self.lo, self.hi] {
                for i in 0..d {
                    let mut c = self.rect.base_point[i] + t * unit[i];
                    for (j, s) in sides.iter().enumerate() {
                        let lambda = if mask >> j & 1 == 1 {
                            self.rect.side_lengths[j] + self.margin
                        } else {
                            -self.margin
                        };
                        c += lambda * s[i];
                    }
                    lo[i] = lo[i].min(c);
                    hi[i] = hi[i].max(c);
                }
            }
        }
        let mut pmin = [0; MAX_DIM];
        let mut pmax = [0; MAX_DIM];
        for i in 0..d {
            pmin[i] = (lo[i] - 1e-6).floor() as i32;
            pmax[i] = (hi[i] + 1e-6).ceil() as i32;
        }
        (Point(pmin), Point(pmax))
    }

    /// Lattice points of the prism in lexicographic order.
    pub fn points(&self) -> Vec<Point> {
        let d = self.rect.dim();
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::new();
        for_each_in_box(d, &lo, &hi, |p| {
            if self.contains(&p) {
                out.push(p);
            }
        });
        out
    }
}

/// Calls `f` on every lattice point of the box `[lo, hi]`, lexicographically.
pub fn for_each_in_box(d: usize, lo: &Point, hi: &Point, mut f: impl FnMut(Point)) {
    if (0..d).any(|i| lo.0[i] > hi.0[i]) {
        return;
    }
    let mut cur = *lo;
    loop {
        f(cur);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if cur.0[k] < hi.0[k] {
                cur.0[k] += 1;
                break;
            }
            cur.0[k] = lo.0[k];
        }
    }
}

/// A finite subgraph of `Z^d` with canonical vertex and edge enumeration.
///
/// Vertices are sorted lexicographically. Edges are sorted by their smaller
/// endpoint, then by axis, and an edge's local id is its position in that
/// order.
#[derive(Clone, Debug)]
pub struct LatticeRegion {
    d: usize,
    vertices: Vec<Point>,
    index: HashMap<Point, usize>,
    edges: Vec<Edge>,
    ends: Vec<(usize, usize)>,
    edge_index: HashMap<Edge, usize>,
}

impl LatticeRegion {
    /// Induced subgraph on the given vertex set (duplicates are ignored).
    pub fn from_points(d: usize, points: impl IntoIterator<Item = Point>) -> LatticeRegion {
        let mut vertices: Vec<Point> = points.into_iter().collect();
        vertices.sort_unstable();
        vertices.dedup();
        let index: HashMap<Point, usize> = vertices.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut edges = Vec::new();
        let mut ends = Vec::new();
        for (i, p) in vertices.iter().enumerate() {
            for axis in 0..d {
                if let Some(&j) = index.get(&p.step(axis, 1)) {
                    edges.push(Edge {
                        lo: *p,
                        axis: axis as u8,
                    });
                    ends.push((i, j));
                }
            }
        }
        let edge_index = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        LatticeRegion {
            d,
            vertices,
            index,
            edges,
            ends,
            edge_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Endpoint vertex indices of each edge, in edge order.
    pub fn edge_ends(&self) -> &[(usize, usize)] {
        &self.ends
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_index(&self, p: &Point) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn edge_index(&self, e: &Edge) -> Option<usize> {
        self.edge_index.get(e).copied()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.index.contains_key(p)
    }

    /// Local vertex indices of the given points; errors if one is missing.
    pub fn indices_of(&self, points: &[Point]) -> Result<Vec<usize>> {
        points
            .iter()
            .map(|p| {
                self.vertex_index(p)
                    .ok_or_else(|| Error::InvalidInput(format!("point {:?} is not in the region", p.coords(self.d))))
            })
            .collect()
    }
}

/// A region together with disjoint source and sink vertex sets (local indices).
#[derive(Clone, Debug)]
pub struct MarkedRegion {
    pub region: LatticeRegion,
    pub sources: Vec<usize>,
    pub sinks: Vec<usize>,
}

impl MarkedRegion {
    pub fn new(region: LatticeRegion, sources: Vec<usize>, sinks: Vec<usize>) -> Result<Self> {
        let n = region.num_vertices();
        let mut mark = vec![0u8; n];
        for &s in &sources {
            if s >= n {
                return Err(Error::InvalidInput(format!("source index {s} out of range")));
            }
            mark[s] = 1;
        }
        for &t in &sinks {
            if t >= n {
                return Err(Error::InvalidInput(format!("sink index {t} out of range")));
            }
            if mark[t] == 1 {
                return Err(Error::InvalidInput(format!(
                    "vertex {:?} is both a source and a sink",
                    region.vertices()[t].coords(region.dim())
                )));
            }
        }
        Ok(MarkedRegion { region, sources, sinks })
    }
}

fn check_height(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidGeometry(format!("height {h} must be positive")));
    }
    Ok(())
}

/// `Z^d ∩ cyl(A, h)` with all induced nearest-neighbor edges.
pub fn build_cylinder(a: &HyperRectangle, h: f64) -> Result<LatticeRegion> {
    check_height(h)?;
    Ok(LatticeRegion::from_points(a.dim(), a.prism(0.0, h, 0.0).points()))
}

/// Discretized bottom `B(A, h)` and top `T(A, h)` of `cyl(A, h)`.
pub fn bottom_top_sets(a: &HyperRectangle, h: f64) -> Result<(Vec<Point>, Vec<Point>)> {
    check_height(h)?;
    let cyl = a.prism(0.0, h, 0.0);
    let d = a.dim();
    let mut bottom = Vec::new();
    let mut top = Vec::new();
    for x in cyl.points() {
        let mut in_b = false;
        let mut in_t = false;
        for y in x.neighbors(d) {
            if cyl.contains(&y) {
                continue;
            }
            in_b = in_b || a.segment_meets_face(&x, &y, 0.0);
            in_t = in_t || a.segment_meets_face(&x, &y, h);
        }
        if in_b {
            bottom.push(x);
        }
        if in_t {
            top.push(x);
        }
    }
    if bottom.is_empty() || top.is_empty() {
        return Err(Error::DegenerateRegion(format!(
            "cylinder of height {h} has an empty {} set",
            if bottom.is_empty() { "bottom" } else { "top" }
        )));
    }
    Ok((bottom, top))
}

/// `Z^d ∩ cyl'(A, h)` and its upper and lower discrete half boundaries `C'_1`, `C'_2`.
pub fn build_cyl_prime(a: &HyperRectangle, h: f64) -> Result<(LatticeRegion, Vec<Point>, Vec<Point>)> {
    check_height(h)?;
    let cyl = a.prism(-h, h, 0.0);
    let d = a.dim();
    let points = cyl.points();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for x in &points {
        if !x.neighbors(d).any(|y| !cyl.contains(&y)) {
            continue;
        }
        let t = a.height(x);
        if t > GEOM_TOL {
            upper.push(*x);
        } else if t < -GEOM_TOL {
            lower.push(*x);
        }
    }
    if upper.is_empty() || lower.is_empty() {
        return Err(Error::DegenerateRegion(format!(
            "cyl'(A, {h}) has an empty half boundary"
        )));
    }
    Ok((LatticeRegion::from_points(d, points), upper, lower))
}

/// The thickened rectangle `Ā = cyl(A, d)`.
#[derive(Clone, Debug)]
pub struct Thickened<'a> {
    pub rect: &'a HyperRectangle,
}

impl<'a> Thickened<'a> {
    pub fn prism(&self) -> Prism<'a> {
        self.rect.prism(0.0, self.rect.dim() as f64, 0.0)
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.prism().contains(x)
    }

    pub fn vertices(&self) -> Vec<Point> {
        self.prism().points()
    }

    /// `Ā ∩ Z^d ∩ region`.
    pub fn vertices_in(&self, region: &LatticeRegion) -> Vec<Point> {
        self.vertices().into_iter().filter(|p| region.contains(p)).collect()
    }
}

pub fn thicken(a: &HyperRectangle) -> Thickened<'_> {
    Thickened { rect: a }
}

/// Whether `x ∈ W(A, t, v)`: `x` lies in `slab(A, t, v)` and has a neighbor in
/// `slab(A, ∞, v) \ slab(A, t, v)`.
pub fn in_w_layer(a: &HyperRectangle, t: f64, x: &Point) -> bool {
    let hx = a.height(x);
    if hx < -GEOM_TOL || hx > t + GEOM_TOL {
        return false;
    }
    x.neighbors(a.dim()).any(|y| a.height(&y) > t + GEOM_TOL)
}

/// A laterally truncated piece of `slab(A, t, v)`.
#[derive(Clone, Debug)]
pub struct SlabWindow {
    pub region: LatticeRegion,
    pub t: f64,
    pub margin: i64,
    /// `W(A, t, v)` restricted to the window, lexicographic.
    pub w_layer: Vec<Point>,
    /// Per vertex of `region`: true when the vertex has a neighbor inside the
    /// slab but outside the window.
    pub escape: Vec<bool>,
}

impl SlabWindow {
    pub fn escape_vertices(&self) -> Vec<Point> {
        self.region
            .vertices()
            .iter()
            .zip(&self.escape)
            .filter(|(_, &e)| e)
            .map(|(p, _)| *p)
            .collect()
    }
}

/// The window of `slab(A, t, v)` laterally bounded by `A` inflated by
/// `lateral_margin` in every side direction, with `W(A, t, v)` and the lateral
/// escape boundary.
pub fn slab_window(a: &HyperRectangle, t: f64, lateral_margin: i64) -> Result<SlabWindow> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidGeometry(format!("slab height {t} must be ≥ 0")));
    }
    if lateral_margin < 0 {
        return Err(Error::InvalidGeometry("lateral margin must be ≥ 0".into()));
    }
    let window = a.prism(0.0, t, lateral_margin as f64);
    let d = a.dim();
    let region = LatticeRegion::from_points(d, window.points());
    let mut w_layer = Vec::new();
    let mut escape = Vec::with_capacity(region.num_vertices());
    for x in region.vertices() {
        if in_w_layer(a, t, x) {
            w_layer.push(*x);
        }
        let esc = x.neighbors(d).any(|y| {
            let hy = a.height(&y);
            hy >= -GEOM_TOL && hy <= t + GEOM_TOL && !window.laterally_contains(&y)
        });
        escape.push(esc);
    }
    Ok(SlabWindow {
        region,
        t,
        margin: lateral_margin,
        w_layer,
        escape,
    })
}

/// JSON form of a geometry: `{d, normal, base_point, side_lengths, height}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub d: usize,
    pub normal: Vec<i64>,
    pub base_point: Vec<f64>,
    pub side_lengths: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

impl GeometrySpec {
    pub fn rectangle(&self) -> Result<HyperRectangle> {
        if self.normal.len() != self.d {
            return Err(Error::InvalidGeometry(format!(
                "normal has {} components but d = {}",
                self.normal.len(),
                self.d
            )));
        }
        HyperRectangle::new(
            Direction::new(&self.normal)?,
            self.base_point.clone(),
            self.side_lengths.clone(),
        )
    }

    pub fn from_rectangle(a: &HyperRectangle, height: Option<f64>) -> GeometrySpec {
        GeometrySpec {
            d: a.dim(),
            normal: a.direction().normal().to_vec(),
            base_point: a.base_point().to_vec(),
            side_lengths: a.side_lengths().to_vec(),
            height,
        }
    }
}

/// Writes points as CSV rows `x1,…,xd` (with a header).
pub fn write_points_csv<W: Write>(out: W, d: usize, points: &[Point]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=d).map(|i| format!("x{i}")))?;
    for p in points {
        w.write_record(p.coords(d).iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
