//! Capacity laws and reproducible capacity fields.
//!
//! A [`CapacityDistribution`] is a finite atomic law on `[0, +∞]` with exact
//! rational atoms and probabilities. A [`CapacityField`] realizes an i.i.d.
//! family of capacities: the capacity of an edge is a pure function of the
//! field seed and the edge's global identifier, so enlarging a region never
//! resamples edges that were already visible.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Edge;
use crate::seed::mix64;

pub type Rational = Ratio<i64>;

const UNIFORM_BITS: u32 = 53;

/// A capacity value: an exact non-negative rational or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Capacity {
    Finite(Rational),
    Infinite,
}

impl Capacity {
    pub fn zero() -> Capacity {
        Capacity::Finite(Rational::zero())
    }

    pub fn integer(v: i64) -> Capacity {
        Capacity::Finite(Rational::from_integer(v))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Capacity::Finite(r) if r.is_zero())
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero()
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Capacity::Infinite)
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            Capacity::Finite(r) => Some(*r),
            Capacity::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Capacity::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Capacity::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for Capacity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Capacity {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Capacity::Finite(a), Capacity::Finite(b)) => a.cmp(b),
            (Capacity::Finite(_), Capacity::Infinite) => Ordering::Less,
            (Capacity::Infinite, Capacity::Finite(_)) => Ordering::Greater,
            (Capacity::Infinite, Capacity::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Finite(r) => write!(f, "{}", format_rational(r)),
            Capacity::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Capacity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Capacity> {
        let t = s.trim();
        if matches!(t, "inf" | "+inf" | "infinity" | "∞") {
            return Ok(Capacity::Infinite);
        }
        let r = parse_rational(t)?;
        if r.is_negative() {
            return Err(Error::InvalidDistribution(format!("negative capacity {s:?}")));
        }
        Ok(Capacity::Finite(r))
    }
}

impl Serialize for Capacity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `p/q` for non-integers, `p` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"p"`, `"p/q"` or a plain decimal such as `"0.15"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::InvalidDistribution(format!("cannot parse {s:?} as a rational"));
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int: i64 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let den = 10i64.pow(frac.len() as u32);
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let mag = int
            .abs()
            .checked_mul(den)
            .and_then(|v| v.checked_add(f))
            .ok_or_else(bad)?;
        return Ok(Rational::new(if negative { -mag } else { mag }, den));
    }
    s.parse::<i64>().map(Rational::from_integer).map_err(|_| bad())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub value: Capacity,
    pub prob: Rational,
}

/// A finite atomic law `G` on `[0, +∞]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapacityDistribution {
    atoms: Vec<Atom>,
    /// `floor(P[atom ≤ i] · 2^53)`; the last entry is exactly `2^53`.
    thresholds: Vec<u64>,
    denominator: i64,
}

impl CapacityDistribution {
    pub fn new(atoms: Vec<Atom>) -> Result<CapacityDistribution> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut total = Rational::zero();
        for (i, a) in atoms.iter().enumerate() {
            if a.prob.is_negative() || a.prob > Rational::one() {
                return Err(Error::InvalidDistribution(format!(
                    "probability {} outside [0, 1]",
                    format_rational(&a.prob)
                )));
            }
            if let Capacity::Finite(v) = a.value {
                if v.is_negative() {
                    return Err(Error::InvalidDistribution("negative atom value".into()));
                }
            }
            if atoms[..i].iter().any(|b| b.value == a.value) {
                return Err(Error::InvalidDistribution(format!(
                    "atom value {} listed twice",
                    a.value
                )));
            }
            total += a.prob;
        }
        if total != Rational::one() {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {}, not 1",
                format_rational(&total)
            )));
        }
        let mut thresholds = Vec::with_capacity(atoms.len());
        let mut cum = Rational::zero();
        for a in &atoms {
            cum += a.prob;
            let t = (*cum.numer() as i128) << UNIFORM_BITS;
            thresholds.push((t / *cum.denom() as i128) as u64);
        }
        let denominator = atoms
            .iter()
            .filter_map(|a| a.value.finite())
            .fold(1i64, |l, v| l.lcm(v.denom()));
        Ok(CapacityDistribution {
            atoms,
            thresholds,
            denominator,
        })
    }

    /// The point mass `δ_value`.
    pub fn point_mass(value: Capacity) -> CapacityDistribution {
        CapacityDistribution::new(vec![Atom {
            value,
            prob: Rational::one(),
        }])
        .expect("point mass is a valid law")
    }

    /// `G_p = p δ_1 + (1 − p) δ_0`.
    pub fn bernoulli(p: Rational) -> Result<CapacityDistribution> {
        let atoms = [(Capacity::zero(), Rational::one() - p), (Capacity::integer(1), p)]
            .into_iter()
            .filter(|(_, q)| !q.is_zero())
            .map(|(value, prob)| Atom { value, prob })
            .collect();
        CapacityDistribution::new(atoms)
    }

    /// `G({0}) δ_0 + (1 − G({0})) δ_1` from a decimal or rational string for `G({0})`.
    pub fn zero_one(zero_mass: Rational) -> Result<CapacityDistribution> {
        CapacityDistribution::bernoulli(Rational::one() - zero_mass)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `G({0})`.
    pub fn zero_mass(&self) -> Rational {
        self.mass_where(|c| c.is_zero())
    }

    /// `G({+∞})`.
    pub fn infinity_mass(&self) -> Rational {
        self.mass_where(|c| c.is_infinite())
    }

    fn mass_where(&self, pred: impl Fn(&Capacity) -> bool) -> Rational {
        self.atoms
            .iter()
            .filter(|a| pred(&a.value))
            .fold(Rational::zero(), |s, a| s + a.prob)
    }

    /// Least common multiple of the finite atom denominators.
    pub fn common_denominator(&self) -> i64 {
        self.denominator
    }

    /// Inverse-CDF lookup of a 53-bit uniform integer.
    #[inline]
    pub fn sample_index(&self, u53: u64) -> usize {
        debug_assert!(u53 < 1 << UNIFORM_BITS);
        self.thresholds
            .iter()
            .position(|&t| u53 < t)
            .unwrap_or(self.atoms.len() - 1)
    }

    pub fn spec(&self) -> DistributionSpec {
        DistributionSpec {
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomSpec {
                    value: a.value.to_string(),
                    prob: format_rational(&a.prob),
                })
                .collect(),
        }
    }
}

/// JSON form: `{"atoms":[{"value":"0" | "p/q" | "inf", "prob":"p/q"}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub atoms: Vec<AtomSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub value: String,
    pub prob: String,
}

impl DistributionSpec {
    pub fn distribution(&self) -> Result<CapacityDistribution> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    value: a.value.parse()?,
                    prob: parse_rational(&a.prob)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CapacityDistribution::new(atoms)
    }
}

/// An i.i.d. capacity field `(t_G(e))` indexed by global edge identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityField {
    seed: u64,
    base: CapacityDistribution,
    /// When set, capacities are the indicators `1_{t_G(e) > 0}` of the base field.
    indicator: bool,
}

impl CapacityField {
    pub fn new(seed: u64, distribution: CapacityDistribution) -> CapacityField {
        CapacityField {
            seed,
            base: distribution,
            indicator: false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Law of a single edge capacity.
    pub fn distribution(&self) -> CapacityDistribution {
        if self.indicator {
            CapacityDistribution::bernoulli(Rational::one() - self.base.zero_mass()).expect("indicator law is valid")
        } else {
            self.base.clone()
        }
    }

    pub fn is_coupled(&self) -> bool {
        self.indicator
    }

    /// Common denominator of the finite capacities this field can produce.
    pub fn common_denominator(&self) -> i64 {
        if self.indicator {
            1
        } else {
            self.base.common_denominator()
        }
    }

    #[inline]
    fn atom(&self, edge_id: u64) -> &Atom {
        let u = mix64(self.seed ^ mix64(edge_id)) >> (64 - UNIFORM_BITS);
        &self.base.atoms[self.base.sample_index(u)]
    }

    #[inline]
    pub fn capacity(&self, edge_id: u64) -> Capacity {
        let v = self.atom(edge_id).value;
        if self.indicator {
            Capacity::integer(v.is_positive() as i64)
        } else {
            v
        }
    }

    #[inline]
    pub fn is_positive(&self, edge_id: u64) -> bool {
        self.atom(edge_id).value.is_positive()
    }

    pub fn edge_capacity(&self, edge: &Edge, d: usize) -> Capacity {
        self.capacity(edge.global_id(d))
    }

    pub fn edge_is_positive(&self, edge: &Edge, d: usize) -> bool {
        self.is_positive(edge.global_id(d))
    }

    /// The coupled Bernoulli field `t_{G_p}(e) = 1_{t_G(e) > 0}`, `p = 1 − G({0})`.
    pub fn couple_bernoulli(&self) -> CapacityField {
        CapacityField {
            seed: self.seed,
            base: self.base.clone(),
            indicator: true,
        }
    }
}

/// Capacity of the edge with global identifier `edge_id`.
pub fn edge_capacity(field: &CapacityField, edge_id: u64) -> Capacity {
    field.capacity(edge_id)
}

pub fn couple_bernoulli(field: &CapacityField) -> CapacityField {
    field.couple_bernoulli()
}

/// Dimension and the bond percolation threshold used to label regimes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeConstants {
    pub d: usize,
    pub pc: f64,
}

impl RegimeConstants {
    pub fn new(d: usize, pc: f64) -> Result<RegimeConstants> {
        if !(pc > 0.0 && pc < 1.0) {
            return Err(Error::InvalidInput(format!("p_c = {pc} must lie in (0, 1)")));
        }
        if d == 2 && pc != 0.5 {
            return Err(Error::InvalidInput("p_c(2) is exactly 1/2".into()));
        }
        Ok(RegimeConstants { d, pc })
    }

    /// Literature values for bond percolation; only `d = 2` is exact.
    pub fn for_dim(d: usize) -> Result<RegimeConstants> {
        let pc = match d {
            2 => 0.5,
            3 => 0.248_812_6,
            4 => 0.160_131_4,
            5 => 0.118_172,
            _ => return Err(Error::InvalidInput(format!("no default p_c for d = {d}"))),
        };
        Ok(RegimeConstants { d, pc })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroRegime {
    /// `G({0}) > 1 − p_c`: positive edges do not percolate.
    SupercriticalZero,
    CriticalZero,
    SubcriticalZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub zero: ZeroRegime,
    /// `G({+∞}) < p_c`.
    pub infinity_ok: bool,
}

pub fn regime_of(distribution: &CapacityDistribution, constants: &RegimeConstants) -> Regime {
    let g0 = distribution.zero_mass();
    let ginf = distribution.infinity_mass();
    let (zero_vs, inf_vs) = if constants.d == 2 {
        let half = Rational::new(1, 2);
        (g0.cmp(&half), ginf.cmp(&half))
    } else {
        let to_f = |r: Rational| *r.numer() as f64 / *r.denom() as f64;
        let threshold = 1.0 - constants.pc;
        (
            to_f(g0).partial_cmp(&threshold).unwrap_or(Ordering::Equal),
            to_f(ginf).partial_cmp(&constants.pc).unwrap_or(Ordering::Equal),
        )
    };
    let zero = match zero_vs {
        Ordering::Greater => ZeroRegime::SupercriticalZero,
        Ordering::Equal => ZeroRegime::CriticalZero,
        Ordering::Less => ZeroRegime::SubcriticalZero,
    };
    Regime {
        zero,
        infinity_ok: inf_vs == Ordering::Less,
    }
}

/// Errors unless the law is in the supercritical-zero regime.
pub fn require_supercritical_zero(distribution: &CapacityDistribution, constants: &RegimeConstants) -> Result<()> {
    let r = regime_of(distribution, constants);
    if r.zero != ZeroRegime::SupercriticalZero {
        return Err(Error::Regime(format!(
            "G({{0}}) = {} is not above 1 - p_c({}) = {}",
            format_rational(&distribution.zero_mass()),
            constants.d,
            1.0 - constants.pc
        )));
    }
    Ok(())
}
