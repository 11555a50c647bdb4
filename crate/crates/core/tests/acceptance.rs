//! Acceptance suite. Runs every criterion in sequence (so wall-clock limits
//! are measured without other tests competing for cores), prints one line per
//! criterion and exits nonzero if any criterion fails.

mod common;

use std::collections::{HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use fpp_core::capacity::{Atom, Capacity, CapacityDistribution, CapacityField, Rational, RegimeConstants};
use fpp_core::clusters::{lemma_cutset, random_height, tail_fit, HeightOptions};
use fpp_core::experiments::{
    efron_stein_audit, estimate_zeta, positivity_scan, subadditivity_from, Campaign, EstimateReport, HeightSchedule,
    Scan, Thresholds,
};
use fpp_core::geometry::{in_w_layer, thicken, Edge, HyperRectangle, LatticeRegion, MarkedRegion, Point};
use fpp_core::mincut::{chi, lexi_min_cut, max_flow, phi, psi, ChiOptions, FlowProblem};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn three_atom(g0: Rational, finite: Rational) -> CapacityDistribution {
    let rest = (Rational::from_integer(1) - g0) / 2;
    CapacityDistribution::new(vec![
        Atom {
            value: Capacity::zero(),
            prob: g0,
        },
        Atom {
            value: Capacity::Finite(finite),
            prob: rest,
        },
        Atom {
            value: Capacity::Infinite,
            prob: rest,
        },
    ])
    .unwrap()
}

fn unit_square() -> HyperRectangle {
    HyperRectangle::straight(&[1.0, 1.0]).unwrap()
}

/// A box of `d`-dimensional lattice points with about 10% of vertices
/// removed, bottom layer as sources and top layer as sinks.
fn large_instance(rng: &mut rand_chacha::ChaCha8Rng, target_edges: usize) -> (MarkedRegion, Vec<Capacity>) {
    loop {
        let d = if rng.random_bool(0.5) { 2 } else { 3 };
        let side = ((target_edges as f64 / d as f64).powf(1.0 / d as f64).floor() as i32).max(2);
        let dims: Vec<i32> = (0..d).map(|_| (side + rng.random_range(-1..=1)).max(2)).collect();
        let mut pts = Vec::new();
        let lo = Point::new(&vec![0; d]);
        let hi = Point::new(&dims.iter().map(|k| k - 1).collect::<Vec<_>>());
        fpp_core::geometry::for_each_in_box(d, &lo, &hi, |p| pts.push(p));
        pts.retain(|_| rng.random_bool(0.9));
        let region = LatticeRegion::from_points(d, pts);
        if region.num_edges() == 0 || region.num_edges() > 50_000 {
            continue;
        }
        let top = dims[d - 1] - 1;
        let sources: Vec<usize> = (0..region.num_vertices())
            .filter(|&i| region.vertices()[i].0[d - 1] == 0)
            .collect();
        let sinks: Vec<usize> = (0..region.num_vertices())
            .filter(|&i| region.vertices()[i].0[d - 1] == top)
            .collect();
        if sources.is_empty() || sinks.is_empty() {
            continue;
        }
        let caps = (0..region.num_edges()).map(|_| random_capacity(rng)).collect();
        return (MarkedRegion::new(region, sources, sinks).unwrap(), caps);
    }
}

/// Whether the sources reach the sinks through infinite-capacity edges alone.
fn infinite_path(marked: &MarkedRegion, caps: &[Capacity]) -> bool {
    let r = &marked.region;
    let inf: Vec<Edge> = r
        .edges()
        .iter()
        .zip(caps)
        .filter(|(_, c)| !c.is_infinite())
        .map(|(e, _)| *e)
        .collect();
    !separates(marked, &inf)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1);
    let (mut ok, mut infinite, mut largest) = (0, 0, 0);
    let mut failures = Vec::new();
    for i in 0..500 {
        let target = (10.0 * 5000f64.powf(rng.random::<f64>())) as usize;
        let (marked, caps) = large_instance(&mut rng, target);
        largest = largest.max(marked.region.num_edges());
        let problem = FlowProblem::new(&marked, caps.clone()).unwrap();
        let good = (|| {
            let plain = max_flow(&problem).ok()?;
            let lexi = lexi_min_cut(&problem).ok()?;
            if infinite_path(&marked, &caps) {
                infinite += 1;
                return Some(plain.flow_value.is_infinite() && lexi.flow_value.is_infinite());
            }
            let mut good = true;
            for cut in [&plain, &lexi] {
                good &= cut.flow_value == cut.cut_capacity;
                good &= cut.cut_capacity == total(cut.cut_edge_ids.iter().map(|&e| caps[e]));
                good &= separates(&marked, &cut.cut_edges);
            }
            Some(good && plain.flow_value == lexi.flow_value)
        })();
        if good == Some(true) {
            ok += 1;
        } else {
            failures.push(i);
        }
    }
    let t = start.elapsed();
    outcome(
        ok == 500 && within(t, 60),
        format!(
            "duality and validity: {ok}/500 instances (largest {largest} edges, {infinite} with infinite flow), {:.1} s of 60 s{}",
            t.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; failed {failures:?}") }
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(2);
    let mut ok = 0;
    for _ in 0..100 {
        let (marked, caps) = small_instance(&mut rng, 14);
        let want = brute_lexi(&marked, &caps);
        let got = lexi_min_cut(&FlowProblem::new(&marked, caps).unwrap()).unwrap();
        ok += usize::from((got.cut_capacity, got.cut_cardinality) == want);
    }
    let t = start.elapsed();
    outcome(
        ok == 100 && within(t, 30),
        format!(
            "exhaustive-oracle equivalence: {ok}/100 instances, {:.2} s of 30 s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let zero = CapacityField::new(0, CapacityDistribution::point_mass(Capacity::zero()));
    let one = CapacityField::new(0, CapacityDistribution::point_mass(Capacity::integer(1)));
    let mut rows = Vec::new();
    let mut good = true;
    for n in [4u32, 8, 16] {
        let a = unit_square().scaled(n as f64).unwrap();
        let h = HeightSchedule::default().eval(n);
        let columns = ((n + 1) * (n + 1)) as usize;
        let (psi0, _) = psi(&a, h, &zero).unwrap();
        let (psi1, _) = psi(&a, h, &one).unwrap();
        let flow = phi(&a, h, &one).unwrap().flow_value;
        good &= psi0 == columns && psi1 == columns && flow == Capacity::integer(columns as i64);
        good &= (psi0 as f64 / (n * n) as f64 - 1.0).abs() <= 3.0 / n as f64;
        rows.push(format!("n={n}: psi {psi0}/{psi1}, phi {flow}"));
    }
    let t = start.elapsed();
    outcome(
        good && within(t, 10),
        format!(
            "Menger anchors: {} (expect (n+1)^2), {:.2} s of 10 s",
            rows.join("; "),
            t.as_secs_f64()
        ),
    )
}

/// BFS inside the slab of height `t` from `Ā`, avoiding `cut`; true when no
/// vertex of the W layer is reached.
fn closes_off(a: &HyperRectangle, t: f64, cut: &[Edge]) -> bool {
    let d = a.dim();
    let removed: HashSet<Edge> = cut.iter().copied().collect();
    let mut seen: HashSet<Point> = thicken(a).vertices().into_iter().collect();
    let mut q: VecDeque<Point> = seen.iter().copied().collect();
    while let Some(x) = q.pop_front() {
        if in_w_layer(a, t, &x) || seen.len() > 2_000_000 {
            return false;
        }
        for y in x.neighbors(d) {
            let hy = a.height(&y);
            if hy < -1e-9 || hy > t + 1e-9 || removed.contains(&Edge::between(x, y)) {
                continue;
            }
            if seen.insert(y) {
                q.push_back(y);
            }
        }
    }
    true
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let opts = ChiOptions::default();
    let mut ok = 0;
    let mut gaps = Vec::new();
    for i in 0..200u64 {
        let g0 = if i % 2 == 0 {
            Rational::new(85, 100)
        } else {
            Rational::new(95, 100)
        };
        let n = if i % 4 < 2 { 6 } else { 10 };
        let a = unit_square().scaled(n as f64).unwrap();
        let h = HeightSchedule::default().eval(n).max(7.0);
        let field = CapacityField::new(
            fpp_core::seed::derive_seed(4, i, n as u64),
            three_atom(g0, Rational::new(1, 2)),
        );
        let cut = lemma_cutset(&a, h, &field, &HeightOptions::default()).unwrap();
        let t = random_height(&a, h, &field, &HeightOptions::default()).unwrap().value;
        let x = chi(&a, h, &field, &opts).unwrap();
        let zero = cut.iter().all(|e| field.edge_capacity(e, 3).is_zero());
        if zero && closes_off(&a, t, &cut) && cut.len() >= x.cardinality {
            ok += 1;
        }
        gaps.push(cut.len() - x.cardinality.min(cut.len()));
    }
    let t = start.elapsed();
    let mean_gap = gaps.iter().sum::<usize>() as f64 / gaps.len() as f64;
    outcome(
        ok == 200 && within(t, 300),
        format!(
            "null cutset witness: {ok}/200 fields (mean card - chi {mean_gap:.1}), {:.1} s of 300 s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let dist = CapacityDistribution::new(vec![
        Atom {
            value: Capacity::zero(),
            prob: Rational::new(9, 10),
        },
        Atom {
            value: Capacity::Finite(Rational::new(1, 2)),
            prob: Rational::new(1, 20),
        },
        Atom {
            value: Capacity::Infinite,
            prob: Rational::new(1, 20),
        },
    ])
    .unwrap();
    let mut camp = Campaign::new(dist, unit_square(), HeightSchedule::Sqrt { c: 4.0 }, vec![8], 200, 5).unwrap();
    camp.coupling_audit = true;
    camp.thresholds.bootstrap_resamples = 1_000;
    let report = match estimate_zeta(&camp) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("coupling identity: campaign aborted: {e}")),
    };
    let qualifying: Vec<_> = report
        .records
        .iter()
        .filter(|r| r.bottom_event == Some(true) && r.phi.is_zero())
        .collect();
    let agree = qualifying.iter().filter(|r| r.coupled_psi == Some(r.psi)).count();
    let t = start.elapsed();
    outcome(
        !qualifying.is_empty() && agree == qualifying.len() && within(t, 300),
        format!(
            "coupling identity: {agree}/{} qualifying samples of 200 agree, {:.1} s of 300 s",
            qualifying.len(),
            t.as_secs_f64()
        ),
    )
}

fn campaign_6(workers: usize) -> Campaign {
    let mut c = Campaign::new(
        CapacityDistribution::bernoulli(Rational::new(1, 10)).unwrap(),
        unit_square(),
        HeightSchedule::default(),
        vec![8, 12, 16, 20],
        200,
        6,
    )
    .unwrap();
    c.with_chi = true;
    c.workers = workers;
    c
}

fn criterion_6(report: &EstimateReport, elapsed: Duration) -> Outcome {
    let s8 = report.scale(8).unwrap();
    let s16 = report.scale(16).unwrap();
    let s20 = report.scale(20).unwrap();
    let overlap = s16.psi.overlaps(&s20.psi);
    let decreasing = s20.psi.variance < s8.psi.variance;
    outcome(
        overlap && decreasing && within(elapsed, 1800),
        format!(
            "convergence stability: CI n=16 [{:.4}, {:.4}] vs n=20 [{:.4}, {:.4}] overlap {overlap}; Var n=20 {:.3e} < n=8 {:.3e}: {decreasing}; {:.0} s of 1800 s",
            s16.psi.ci_low,
            s16.psi.ci_high,
            s20.psi.ci_low,
            s20.psi.ci_high,
            s20.psi.variance,
            s8.psi.variance,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7(report: &EstimateReport) -> Outcome {
    let rows = efron_stein_audit(report, 3.0);
    let detail: Vec<String> = rows
        .iter()
        .map(|r| format!("n={}: {:.1} <= {:.1}", r.n, r.variance_psi, r.bound + r.slack))
        .collect();
    outcome(
        rows.iter().all(|r| r.passes),
        format!("variance bound: {}", detail.join("; ")),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let fit = tail_fit(Rational::new(15, 100), &RegimeConstants::for_dim(3).unwrap(), 10_000, 8).unwrap();
    let t = start.elapsed();
    let (k2, r2) = (fit.kappa2_hat.unwrap_or(f64::NAN), fit.r_squared.unwrap_or(f64::NAN));
    outcome(
        k2 > 0.0 && r2 >= 0.95 && within(t, 120),
        format!(
            "cluster tails: kappa2 {k2:.4}, R^2 {r2:.4} over sizes {}..={}, {:.1} s of 120 s",
            fit.fit_range.0,
            fit.fit_range.1,
            t.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let scan = Scan {
        base: HyperRectangle::straight(&[1.0]).unwrap(),
        n: 24,
        h: 5.0,
        zero_masses: vec![Rational::new(3, 10), Rational::new(7, 10)],
        replicates: 100,
        seed: 9,
        workers: 1,
        thresholds: Thresholds::default(),
    };
    let rows = positivity_scan(&scan).unwrap();
    let (low, high) = (rows[0].phi_area.mean, rows[1].phi_area.mean);
    let t = start.elapsed();
    outcome(
        high < 0.1 * low && within(t, 300),
        format!(
            "positivity transition: mean flow/area {low:.4} at G(0)=3/10, {high:.4} at G(0)=7/10 (ratio {:.3}), {:.1} s of 300 s",
            high / low,
            t.as_secs_f64()
        ),
    )
}

fn criterion_10(report: &EstimateReport) -> Outcome {
    let sub = subadditivity_from(report, 8, 20).unwrap();
    outcome(
        sub.chi_psi_agree,
        format!(
            "chi-psi agreement at n=20: chi/area {:.4}, psi/area {:.4}, gap {:.4} vs combined CI width {:.4} (chi subadditivity flag n=8->20: {})",
            sub.chi_large.mean, sub.psi_large.mean, sub.chi_psi_gap, sub.chi_psi_ci_width, sub.flagged
        ),
    )
}

fn csv_bytes(report: &EstimateReport) -> Vec<u8> {
    let mut out = Vec::new();
    report.write_csv(&mut out).unwrap();
    out
}

fn criterion_11(report: &EstimateReport) -> Outcome {
    let start = Instant::now();
    let again = estimate_zeta(&campaign_6(1)).unwrap();
    let (a, b) = (csv_bytes(report), csv_bytes(&again));
    outcome(
        a == b,
        format!(
            "determinism: workers 8 vs 1 CSV {} ({} bytes), rerun {:.0} s",
            if a == b { "identical" } else { "differ" },
            a.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |k: usize, o: Outcome| {
        println!(
            "criterion {k:>2}: {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((k, o));
    };
    report(1, guarded(criterion_1));
    report(2, guarded(criterion_2));
    report(3, guarded(criterion_3));
    report(4, guarded(criterion_4));
    report(5, guarded(criterion_5));
    let start = Instant::now();
    let c6 = estimate_zeta(&campaign_6(8));
    let c6_time = start.elapsed();
    match &c6 {
        Ok(r) => {
            report(6, guarded(|| criterion_6(r, c6_time)));
            report(7, guarded(|| criterion_7(r)));
        }
        Err(e) => {
            report(6, outcome(false, format!("campaign aborted: {e}")));
            report(7, outcome(false, "campaign aborted".into()));
        }
    }
    report(8, guarded(criterion_8));
    report(9, guarded(criterion_9));
    match &c6 {
        Ok(r) => {
            report(10, guarded(|| criterion_10(r)));
            report(11, guarded(|| criterion_11(r)));
        }
        Err(_) => {
            report(10, outcome(false, "campaign aborted".into()));
            report(11, outcome(false, "campaign aborted".into()));
        }
    }
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(k, _)| *k).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({failed:?})")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
