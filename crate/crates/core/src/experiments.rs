//! Monte Carlo campaigns over scaled cylinders `cyl(nA, h(n))`.
//!
//! Replicate `r` at scale `n` uses the field seed `derive_seed(seed, r, n)`.
//! Fields at different scales or replicates are independent draws; within one
//! field, enlarging the region never changes edges already seen. Replicates
//! run on a pool of `workers` threads, results are collected in replicate
//! order and aggregated on one thread, so reports do not depend on the worker
//! count.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{
    format_rational, require_supercritical_zero, Capacity, CapacityDistribution, CapacityField, Rational,
    RegimeConstants,
};
use crate::clusters::{cluster_of, HeightOptions, DEFAULT_CLUSTER_CAP};
use crate::error::{Error, Result};
use crate::geometry::{HyperRectangle, Point};
use crate::mincut::{chi, ChiOptions, Cylinder, DEFAULT_WINDOW_CAP};
use crate::seed::derive_seed;
use crate::stats::{sample_variance, variance_standard_error, Summary};

/// Salt separating bootstrap streams from field seeds.
const BOOTSTRAP_SALT: u64 = 0xB007_5743_0000_0001;

/// Height schedule `n ↦ h(n)`, always rounded up to an integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase", deny_unknown_fields)]
pub enum HeightSchedule {
    /// `⌈c √n⌉`
    Sqrt { c: f64 },
    /// `⌈c n^α⌉`, `0 < α < 1`
    Power { c: f64, alpha: f64 },
    /// `⌈c (log(n+1))^β⌉`, `β > 1`
    Polylog { c: f64, beta: f64 },
}

impl Default for HeightSchedule {
    fn default() -> Self {
        HeightSchedule::Sqrt { c: 1.0 }
    }
}

impl HeightSchedule {
    /// Checks `h(n)/log n → ∞` and `h(n)/n → 0` from the parameters.
    pub fn validate(&self) -> Result<()> {
        let (c, ok) = match *self {
            HeightSchedule::Sqrt { c } => (c, true),
            HeightSchedule::Power { c, alpha } => (c, alpha > 0.0 && alpha < 1.0),
            HeightSchedule::Polylog { c, beta } => (c, beta > 1.0 && beta.is_finite()),
        };
        if !(c > 0.0 && c.is_finite()) || !ok {
            return Err(Error::InvalidInput(format!(
                "height schedule {self:?} violates h/log n → ∞, h/n → 0"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, n: u32) -> f64 {
        let n = n as f64;
        let raw = match *self {
            HeightSchedule::Sqrt { c } => c * n.sqrt(),
            HeightSchedule::Power { c, alpha } => c * n.powf(alpha),
            HeightSchedule::Polylog { c, beta } => c * (n + 1.0).ln().powf(beta),
        };
        // guard against 4.000000001 style rounding of exact values
        (raw - 1e-9).ceil().max(1.0)
    }
}

/// Statistical tolerances and resource caps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub ci_level: f64,
    pub bootstrap_resamples: usize,
    pub sigma_slack: f64,
    pub cluster_cap: usize,
    pub window_cap: i64,
    pub allow_boundary_height: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ci_level: 0.95,
            bootstrap_resamples: 10_000,
            sigma_slack: 3.0,
            cluster_cap: DEFAULT_CLUSTER_CAP,
            window_cap: DEFAULT_WINDOW_CAP,
            allow_boundary_height: false,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidInput("ci_level must lie in (0, 1)".into()));
        }
        if self.bootstrap_resamples == 0 || self.cluster_cap == 0 || self.window_cap < 1 {
            return Err(Error::InvalidInput("resamples and caps must be positive".into()));
        }
        if self.sigma_slack.is_nan() || self.sigma_slack < 0.0 {
            return Err(Error::InvalidInput("sigma_slack must be ≥ 0".into()));
        }
        Ok(())
    }

    fn height_options(&self) -> HeightOptions {
        HeightOptions {
            cluster_cap: self.cluster_cap,
            allow_boundary_height: self.allow_boundary_height,
        }
    }
}

/// A campaign over scales `n` of the base rectangle `A`.
#[derive(Clone, Debug)]
pub struct Campaign {
    pub distribution: CapacityDistribution,
    pub base: HyperRectangle,
    pub schedule: HeightSchedule,
    pub scales: Vec<u32>,
    pub replicates: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub constants: RegimeConstants,
    /// Also compute χ at height `max(h(n), 2d + 1)`.
    pub with_chi: bool,
    /// Compare ψ with ψ of the coupled Bernoulli field on samples where
    /// `ℋ_n` holds and `Φ = 0`; any disagreement aborts the campaign.
    pub coupling_audit: bool,
    /// Run every replicate on the coupled field `1_{t(e) > 0}`.
    pub coupled_field: bool,
    pub workers: usize,
}

impl Campaign {
    pub fn new(
        distribution: CapacityDistribution,
        base: HyperRectangle,
        schedule: HeightSchedule,
        scales: Vec<u32>,
        replicates: usize,
        seed: u64,
    ) -> Result<Campaign> {
        let constants = RegimeConstants::for_dim(base.dim())?;
        let c = Campaign {
            distribution,
            base,
            schedule,
            scales,
            replicates,
            seed,
            thresholds: Thresholds::default(),
            constants,
            with_chi: false,
            coupling_audit: false,
            coupled_field: false,
            workers: 1,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.thresholds.validate()?;
        if self.scales.is_empty() || self.scales.contains(&0) {
            return Err(Error::InvalidInput(
                "scales must be a nonempty list of positive integers".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be ≥ 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidInput("workers must be ≥ 1".into()));
        }
        if self.constants.d != self.base.dim() {
            return Err(Error::InvalidInput("regime constants are for another dimension".into()));
        }
        Ok(())
    }

    fn d(&self) -> usize {
        self.base.dim()
    }

    fn field(&self, replicate: usize, n: u32) -> CapacityField {
        let f = CapacityField::new(
            derive_seed(self.seed, replicate as u64, n as u64),
            self.distribution.clone(),
        );
        if self.coupled_field {
            f.couple_bernoulli()
        } else {
            f
        }
    }

    fn chi_height(&self, h: f64) -> f64 {
        h.max(2.0 * self.d() as f64 + 1.0)
    }

    fn chi_options(&self) -> ChiOptions {
        ChiOptions {
            height: self.thresholds.height_options(),
            window_cap: self.thresholds.window_cap,
            contract_positive: true,
            constants: None,
        }
    }

    fn bootstrap_seed(&self, statistic: u64, n: u32) -> u64 {
        derive_seed(self.seed ^ BOOTSTRAP_SALT, statistic, n as u64)
    }

    fn summary(&self, xs: &[f64], statistic: u64, n: u32) -> Summary {
        Summary::of(
            xs,
            self.thresholds.bootstrap_resamples,
            self.thresholds.ci_level,
            self.bootstrap_seed(statistic, n),
        )
    }
}

/// Maps `f` over replicates `0..reps` on a pool of `workers` threads and
/// returns the results in replicate order; the first error in that order wins.
pub fn parallel_replicates<T: Send>(
    workers: usize,
    reps: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..reps).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Whether every cluster of the given points has at most `k` vertices.
pub fn clusters_at_most(points: &[Point], field: &CapacityField, d: usize, k: usize) -> bool {
    if k == 0 {
        return points.is_empty();
    }
    let mut known: HashSet<Point> = HashSet::new();
    for &x in points {
        if known.contains(&x) {
            continue;
        }
        let c = cluster_of(x, field, d, k);
        if c.truncated {
            return false;
        }
        known.extend(c.vertices);
    }
    true
}

/// `ℋ_n` check on the bottom set of `cyl`: every cluster has at most `h/2` vertices.
fn bottom_event(cyl: &Cylinder, field: &CapacityField, h: f64) -> bool {
    let region = &cyl.marked.region;
    let bottom: Vec<Point> = cyl.marked.sinks.iter().map(|&i| region.vertices()[i]).collect();
    clusters_at_most(&bottom, field, region.dim(), (h / 2.0).floor() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub scale: u32,
    pub replicate: usize,
    pub seed: u64,
    pub h: f64,
    pub psi: usize,
    /// `Φ`, equal to the capacity of the lexicographic cut.
    pub phi: Capacity,
    pub chi: Option<usize>,
    pub chi_height: Option<f64>,
    /// `ℋ_n`, evaluated only under the coupling audit.
    pub bottom_event: Option<bool>,
    /// ψ of the coupled Bernoulli field, when the audit applied.
    pub coupled_psi: Option<usize>,
}

fn run_replicate(
    camp: &Campaign,
    cyl: &Cylinder,
    na: &HyperRectangle,
    n: u32,
    h: f64,
    r: usize,
) -> Result<ReplicateRecord> {
    let field = camp.field(r, n);
    let cut = cyl.lexi_min_cut(&field)?;
    let psi = cut.cut_cardinality;
    let phi = cut.cut_capacity;
    let mut bottom = None;
    let mut coupled_psi = None;
    if camp.coupling_audit {
        let holds = bottom_event(cyl, &field, h);
        bottom = Some(holds);
        if holds && phi.is_zero() {
            let other = cyl.lexi_min_cut(&field.couple_bernoulli())?.cut_cardinality;
            if other != psi {
                return Err(Error::Assertion(format!(
                    "coupling audit failed at n = {n}, replicate {r}: ψ_G = {psi}, ψ_Gp = {other}"
                )));
            }
            coupled_psi = Some(other);
        }
    }
    let (chi_card, chi_height) = if camp.with_chi {
        let res = chi(na, camp.chi_height(h), &field, &camp.chi_options())?;
        (Some(res.cardinality), Some(res.height.value))
    } else {
        (None, None)
    };
    Ok(ReplicateRecord {
        scale: n,
        replicate: r,
        seed: field.seed(),
        h,
        psi,
        phi,
        chi: chi_card,
        chi_height,
        bottom_event: bottom,
        coupled_psi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleEstimate {
    pub n: u32,
    pub h: f64,
    pub chi_h: Option<f64>,
    /// `H^{d−1}(nA)`.
    pub area: f64,
    /// ψ / area.
    pub psi: Summary,
    /// χ / area.
    pub chi: Option<Summary>,
    /// Φ / area; `None` if some replicate had infinite flow.
    pub phi: Option<Summary>,
    pub psi_mean_raw: f64,
    pub psi_variance_raw: f64,
    pub psi_variance_raw_se: f64,
    pub coupling_checks: usize,
    pub bottom_event_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub schema: u32,
    pub d: usize,
    pub distribution: crate::capacity::DistributionSpec,
    pub schedule: HeightSchedule,
    pub replicates: usize,
    pub seed: u64,
    pub scope_note: Option<String>,
    pub scales: Vec<ScaleEstimate>,
    /// Mean ψ/area at the largest scale.
    pub zeta_hat: f64,
    /// Mean Φ/area at the largest scale.
    pub nu_hat: Option<f64>,
    pub records: Vec<ReplicateRecord>,
}

impl EstimateReport {
    pub fn scale(&self, n: u32) -> Option<&ScaleEstimate> {
        self.scales.iter().find(|s| s.n == n)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Long-format CSV: `scale,statistic,type,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = LongCsv::new(out)?;
        for s in &self.scales {
            w.exact(s.n, "h", s.h)?;
            if let Some(ch) = s.chi_h {
                w.exact(s.n, "chi_h", ch)?;
            }
            w.float(s.n, "area", s.area)?;
            w.summary(s.n, "psi_area", &s.psi)?;
            if let Some(c) = &s.chi {
                w.summary(s.n, "chi_area", c)?;
            }
            if let Some(p) = &s.phi {
                w.summary(s.n, "phi_area", p)?;
            }
            w.float(s.n, "psi_mean", s.psi_mean_raw)?;
            w.float(s.n, "psi_variance", s.psi_variance_raw)?;
            w.exact(s.n, "coupling_checks", s.coupling_checks as f64)?;
            if let Some(rate) = s.bottom_event_rate {
                w.float(s.n, "bottom_event_rate", rate)?;
            }
        }
        let last = self.scales.last().map(|s| s.n).unwrap_or(0);
        w.float(last, "zeta_hat", self.zeta_hat)?;
        if let Some(nu) = self.nu_hat {
            w.float(last, "nu_hat", nu)?;
        }
        w.finish()
    }
}

struct LongCsv<W: Write> {
    w: csv::Writer<W>,
}

impl<W: Write> LongCsv<W> {
    fn new(out: W) -> Result<Self> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scale", "statistic", "type", "value"])?;
        Ok(LongCsv { w })
    }

    fn row(&mut self, n: u32, stat: &str, kind: &str, value: String) -> Result<()> {
        self.w
            .write_record([n.to_string(), stat.to_string(), kind.to_string(), value])?;
        Ok(())
    }

    fn exact(&mut self, n: u32, stat: &str, v: f64) -> Result<()> {
        debug_assert_eq!(v.fract(), 0.0);
        self.row(n, stat, "exact", format!("{}", v as i64))
    }

    fn float(&mut self, n: u32, stat: &str, v: f64) -> Result<()> {
        self.row(n, stat, "float", format!("{v:?}"))
    }

    fn summary(&mut self, n: u32, stat: &str, s: &Summary) -> Result<()> {
        self.float(n, &format!("{stat}_mean"), s.mean)?;
        self.float(n, &format!("{stat}_ci_low"), s.ci_low)?;
        self.float(n, &format!("{stat}_ci_high"), s.ci_high)?;
        self.float(n, &format!("{stat}_variance"), s.variance)
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

fn scope_note(d: usize) -> Option<String> {
    (d == 2).then(|| {
        "d = 2 is outside the proven range of the almost-sure limit (d >= 3); estimates are reported without that guarantee".to_string()
    })
}

/// Runs ψ (and optionally χ) on every replicate and scale and aggregates
/// ψ/area, χ/area and Φ/area.
pub fn estimate_zeta(camp: &Campaign) -> Result<EstimateReport> {
    camp.validate()?;
    require_supercritical_zero(&camp.distribution, &camp.constants)?;
    let d = camp.d();
    let mut scales = Vec::new();
    let mut records = Vec::new();
    for &n in &camp.scales {
        let na = camp.base.scaled(n as f64)?;
        let h = camp.schedule.eval(n);
        let cyl = Cylinder::top_bottom(&na, h)?;
        let recs = parallel_replicates(camp.workers, camp.replicates, |r| {
            run_replicate(camp, &cyl, &na, n, h, r)
        })?;
        let area = na.area();
        let psi_raw: Vec<f64> = recs.iter().map(|r| r.psi as f64).collect();
        let psi_area: Vec<f64> = psi_raw.iter().map(|x| x / area).collect();
        let chi = camp.with_chi.then(|| {
            let xs: Vec<f64> = recs.iter().map(|r| r.chi.unwrap() as f64 / area).collect();
            camp.summary(&xs, 1, n)
        });
        let phi = recs
            .iter()
            .map(|r| r.phi.finite().map(|q| *q.numer() as f64 / *q.denom() as f64 / area))
            .collect::<Option<Vec<f64>>>()
            .map(|xs| camp.summary(&xs, 2, n));
        let bottom_event_rate = camp
            .coupling_audit
            .then(|| recs.iter().filter(|r| r.bottom_event == Some(true)).count() as f64 / recs.len() as f64);
        scales.push(ScaleEstimate {
            n,
            h,
            chi_h: camp.with_chi.then(|| camp.chi_height(h)),
            area,
            psi: camp.summary(&psi_area, 0, n),
            chi,
            phi,
            psi_mean_raw: crate::stats::mean(&psi_raw),
            psi_variance_raw: sample_variance(&psi_raw),
            psi_variance_raw_se: variance_standard_error(&psi_raw),
            coupling_checks: recs.iter().filter(|r| r.coupled_psi.is_some()).count(),
            bottom_event_rate,
        });
        records.extend(recs);
    }
    let last = scales.last().unwrap();
    Ok(EstimateReport {
        schema: 1,
        d,
        distribution: camp.distribution.spec(),
        schedule: camp.schedule,
        replicates: camp.replicates,
        seed: camp.seed,
        scope_note: scope_note(d),
        zeta_hat: last.psi.mean,
        nu_hat: last.phi.as_ref().map(|p| p.mean),
        scales,
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfronSteinRow {
    pub n: u32,
    pub mean_psi: f64,
    pub variance_psi: f64,
    /// `4 √n · mean ψ`.
    pub bound: f64,
    /// `sigma_slack` standard errors of the sample variance.
    pub slack: f64,
    pub passes: bool,
}

/// Checks `Var(ψ) ≤ 4√n · E[ψ]` at each scale, allowing sampling slack.
pub fn efron_stein_audit(report: &EstimateReport, sigma_slack: f64) -> Vec<EfronSteinRow> {
    report
        .scales
        .iter()
        .map(|s| {
            let bound = 4.0 * (s.n as f64).sqrt() * s.psi_mean_raw;
            let slack = sigma_slack * s.psi_variance_raw_se;
            EfronSteinRow {
                n: s.n,
                mean_psi: s.psi_mean_raw,
                variance_psi: s.psi_variance_raw,
                bound,
                slack,
                passes: s.psi_variance_raw <= bound + slack,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub estimate: EstimateReport,
    pub efron_stein: Vec<EfronSteinRow>,
    /// (a): the bound holds at every scale.
    pub bound_holds: bool,
    /// Scales of the upper half used for (b).
    pub trend_scales: Vec<u32>,
    /// (b): Var(ψ/area) does not increase along `trend_scales`.
    pub variance_decreasing: bool,
}

/// Variance audit on the coupled Bernoulli field.
pub fn concentration_diagnostic(camp: &Campaign) -> Result<ConcentrationReport> {
    let mut c = camp.clone();
    c.coupled_field = true;
    let estimate = estimate_zeta(&c)?;
    let efron_stein = efron_stein_audit(&estimate, camp.thresholds.sigma_slack);
    let k = estimate.scales.len();
    let top = &estimate.scales[(k - 1) / 2..];
    let variance_decreasing = top.windows(2).all(|w| w[1].psi.variance <= w[0].psi.variance);
    Ok(ConcentrationReport {
        bound_holds: efron_stein.iter().all(|r| r.passes),
        trend_scales: top.iter().map(|s| s.n).collect(),
        variance_decreasing,
        efron_stein,
        estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubadditivityReport {
    pub n_small: u32,
    pub n_large: u32,
    pub chi_small: Summary,
    pub chi_large: Summary,
    pub psi_large: Summary,
    /// Mean χ/area at the large scale minus the small-scale mean.
    pub difference: f64,
    /// Sum of the two χ interval widths.
    pub combined_ci_width: f64,
    /// Set when the large-scale mean exceeds the small one by more than the combined width.
    pub flagged: bool,
    /// `|mean χ/area − mean ψ/area|` at the large scale.
    pub chi_psi_gap: f64,
    /// Sum of the χ and ψ interval widths at the large scale.
    pub chi_psi_ci_width: f64,
    pub chi_psi_agree: bool,
}

/// Compares E[χ]/area at two scales from a campaign with χ enabled.
pub fn subadditivity_from(report: &EstimateReport, n_small: u32, n_large: u32) -> Result<SubadditivityReport> {
    let get = |n: u32| {
        report
            .scale(n)
            .filter(|s| s.chi.is_some())
            .ok_or_else(|| Error::InvalidInput(format!("no χ estimate at scale {n}")))
    };
    let small = get(n_small)?;
    let large = get(n_large)?;
    let chi_small = small.chi.clone().unwrap();
    let chi_large = large.chi.clone().unwrap();
    let difference = chi_large.mean - chi_small.mean;
    let combined_ci_width = chi_small.ci_width() + chi_large.ci_width();
    let chi_psi_gap = (chi_large.mean - large.psi.mean).abs();
    let chi_psi_ci_width = chi_large.ci_width() + large.psi.ci_width();
    Ok(SubadditivityReport {
        n_small,
        n_large,
        flagged: difference > combined_ci_width,
        chi_psi_agree: chi_psi_gap <= chi_psi_ci_width,
        psi_large: large.psi.clone(),
        chi_small,
        chi_large,
        difference,
        combined_ci_width,
        chi_psi_gap,
        chi_psi_ci_width,
    })
}

pub fn subadditivity_diagnostic(camp: &Campaign, n_small: u32, n_large: u32) -> Result<SubadditivityReport> {
    if n_small >= n_large {
        return Err(Error::InvalidInput("n_small must be below n_large".into()));
    }
    let mut c = camp.clone();
    c.scales = vec![n_small, n_large];
    c.with_chi = true;
    subadditivity_from(&estimate_zeta(&c)?, n_small, n_large)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    /// `G({0})`.
    pub zero_mass: String,
    pub phi_area: Summary,
}

/// A sweep of `G({0})` over the laws `G({0}) δ_0 + (1 − G({0})) δ_1` on one cylinder.
#[derive(Clone, Debug)]
pub struct Scan {
    pub base: HyperRectangle,
    pub n: u32,
    pub h: f64,
    pub zero_masses: Vec<Rational>,
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
    pub thresholds: Thresholds,
}

/// Φ/area on `cyl(nA, h)` for each grid value.
///
/// Replicate `r` uses the same seed for every grid value, so the fields are
/// monotonically coupled across the grid.
pub fn positivity_scan(scan: &Scan) -> Result<Vec<ScanRow>> {
    if scan.n == 0 || scan.replicates == 0 {
        return Err(Error::InvalidInput("n and replicates must be ≥ 1".into()));
    }
    scan.thresholds.validate()?;
    let n = scan.n;
    let na = scan.base.scaled(n as f64)?;
    let cyl = Cylinder::top_bottom(&na, scan.h)?;
    let area = na.area();
    let mut rows = Vec::new();
    for (i, g0) in scan.zero_masses.iter().enumerate() {
        let dist = CapacityDistribution::zero_one(*g0)?;
        let flows = parallel_replicates(scan.workers, scan.replicates, |r| {
            let field = CapacityField::new(derive_seed(scan.seed, r as u64, n as u64), dist.clone());
            let flow = cyl.max_flow(&field)?.flow_value;
            let q = flow
                .finite()
                .ok_or_else(|| Error::Assertion("infinite flow with finite capacities".into()))?;
            Ok(*q.numer() as f64 / *q.denom() as f64 / area)
        })?;
        let phi_area = Summary::of(
            &flows,
            scan.thresholds.bootstrap_resamples,
            scan.thresholds.ci_level,
            derive_seed(scan.seed ^ BOOTSTRAP_SALT, i as u64, n as u64),
        );
        rows.push(ScanRow {
            zero_mass: format_rational(g0),
            phi_area,
        });
    }
    Ok(rows)
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["zero_mass", "phi_area_mean", "ci_low", "ci_high", "variance"])?;
    for r in rows {
        w.write_record([
            r.zero_mass.clone(),
            format!("{:?}", r.phi_area.mean),
            format!("{:?}", r.phi_area.ci_low),
            format!("{:?}", r.phi_area.ci_high),
            format!("{:?}", r.phi_area.variance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventRow {
    pub n: u32,
    pub h: f64,
    /// `ℰ_n`: clusters of `cyl(nA, h/2)` have fewer than `h/2` vertices.
    pub e_n: f64,
    /// `𝒢_n`: clusters of `cyl(nA, h)` have at most `min(h/4, n^{1/4})` vertices.
    pub g_n: f64,
    /// `ℋ_n`: clusters of `B(nA, h)` have at most `h/2` vertices.
    pub h_n: f64,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventStats {
    pub rows: Vec<EventRow>,
}

impl EventStats {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scale", "h", "e_n", "g_n", "h_n", "replicates"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.h.to_string(),
                format!("{:?}", r.e_n),
                format!("{:?}", r.g_n),
                format!("{:?}", r.h_n),
                r.replicates.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest integer `k` with `k < x`.
fn largest_below(x: f64) -> usize {
    ((x - 1e-9).ceil() as i64 - 1).max(0) as usize
}

pub fn event_probabilities(camp: &Campaign) -> Result<EventStats> {
    camp.validate()?;
    require_supercritical_zero(&camp.distribution, &camp.constants)?;
    let d = camp.d();
    let mut rows = Vec::new();
    for &n in &camp.scales {
        let na = camp.base.scaled(n as f64)?;
        let h = camp.schedule.eval(n);
        let half_cyl = na.prism(0.0, h / 2.0, 0.0).points();
        let full_cyl = Cylinder::top_bottom(&na, h)?;
        let g_cap = (h / 4.0).min((n as f64).powf(0.25)).floor() as usize;
        let flags = parallel_replicates(camp.workers, camp.replicates, |r| {
            let field = camp.field(r, n);
            let e = clusters_at_most(&half_cyl, &field, d, largest_below(h / 2.0));
            let g = clusters_at_most(full_cyl.marked.region.vertices(), &field, d, g_cap);
            let b = bottom_event(&full_cyl, &field, h);
            Ok((e, g, b))
        })?;
        let rate = |pick: fn(&(bool, bool, bool)) -> bool| {
            flags.iter().filter(|f| pick(f)).count() as f64 / flags.len() as f64
        };
        rows.push(EventRow {
            n,
            h,
            e_n: rate(|f| f.0),
            g_n: rate(|f| f.1),
            h_n: rate(|f| f.2),
            replicates: camp.replicates,
        });
    }
    Ok(EventStats { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_unit(d: usize) -> HyperRectangle {
        HyperRectangle::straight(&vec![1.0; d - 1]).unwrap()
    }

    #[test]
    fn schedules() {
        assert_eq!(HeightSchedule::Sqrt { c: 1.0 }.eval(16), 4.0);
        assert_eq!(HeightSchedule::Sqrt { c: 1.0 }.eval(20), 5.0);
        assert_eq!(HeightSchedule::Sqrt { c: 4.0 }.eval(8), 12.0);
        assert!(HeightSchedule::Power { c: 1.0, alpha: 1.0 }.validate().is_err());
        assert!(HeightSchedule::Polylog { c: 1.0, beta: 1.0 }.validate().is_err());
        assert!(HeightSchedule::Polylog { c: 1.0, beta: 2.0 }.validate().is_ok());
        let json = r#"{"form":"power","c":2.0,"alpha":0.5}"#;
        let s: HeightSchedule = serde_json::from_str(json).unwrap();
        assert_eq!(s, HeightSchedule::Power { c: 2.0, alpha: 0.5 });
        assert!(serde_json::from_str::<HeightSchedule>(r#"{"form":"sqrt","c":1,"x":2}"#).is_err());
    }

    #[test]
    fn below() {
        assert_eq!(largest_below(2.0), 1);
        assert_eq!(largest_below(2.5), 2);
        assert_eq!(largest_below(0.5), 0);
    }

    #[test]
    fn all_zero_campaign_is_exact() {
        let dist = CapacityDistribution::point_mass(Capacity::zero());
        let camp = Campaign::new(dist, straight_unit(3), HeightSchedule::default(), vec![8, 16], 4, 1).unwrap();
        let rep = estimate_zeta(&camp).unwrap();
        for s in &rep.scales {
            let expect = ((s.n + 1) * (s.n + 1)) as f64 / (s.n * s.n) as f64;
            assert_eq!(s.psi.mean, expect);
            assert_eq!(s.psi.variance, 0.0);
            assert_eq!((s.psi.ci_low, s.psi.ci_high), (expect, expect));
        }
        assert_eq!(rep.zeta_hat, (17.0f64 / 16.0).powi(2));
        assert!(rep.scope_note.is_none());
    }

    #[test]
    fn all_zero_events_hold() {
        let dist = CapacityDistribution::point_mass(Capacity::zero());
        let schedule = HeightSchedule::Sqrt { c: 2.0 };
        let camp = Campaign::new(dist, straight_unit(3), schedule, vec![4, 8], 3, 1).unwrap();
        let ev = event_probabilities(&camp).unwrap();
        for r in &ev.rows {
            assert_eq!((r.e_n, r.g_n, r.h_n), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn regime_is_enforced() {
        let dist = CapacityDistribution::point_mass(Capacity::integer(1));
        let camp = Campaign::new(dist, straight_unit(3), HeightSchedule::default(), vec![4], 2, 1).unwrap();
        assert!(matches!(estimate_zeta(&camp), Err(Error::Regime(_))));
    }
}
