//! The `fpp` command line: one subcommand per operation, a JSON config file,
//! a one-line summary on stdout and a JSON error object on stderr.
//!
//! Exit codes: 0 success, 2 invalid input, 3 regime or window overflow,
//! 4 failed internal assertion.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::capacity::{parse_rational, CapacityDistribution, CapacityField, DistributionSpec, RegimeConstants};
use crate::clusters::{cluster_of, random_height, tail_fit, HeightOptions};
use crate::error::{Error, Result};
use crate::experiments::{
    concentration_diagnostic, estimate_zeta, event_probabilities, positivity_scan, subadditivity_diagnostic,
    write_scan_csv, Campaign, HeightSchedule, Scan, Thresholds,
};
use crate::geometry::{GeometrySpec, HyperRectangle, Point};
use crate::mincut::{chi, phi, psi, tau, ChiOptions, CutResult};
use crate::seed::parse_seed;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "fpp",
    version,
    about = "Exact minimal cutsets for first passage percolation flows"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (decimal or 0x-hex); overrides the config.
    #[arg(long, global = true, value_parser = parse_seed)]
    pub seed: Option<u64>,
    /// Worker threads for campaigns; never changes results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory for CSV/JSON files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the cut edges as CSV (`cut.csv`).
    #[arg(long, global = true)]
    pub emit_cut: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Maximal flow Φ (or τ with `"quantity": "tau"`).
    Flow,
    /// Lexicographic minimal cut: capacity and cardinality ψ.
    Cut,
    /// Minimal null-capacity cut χ above the thickened base.
    Chi,
    /// Cluster report at `point`, or an origin-cluster tail fit.
    Clusters,
    /// Random height H.
    Height,
    /// ζ estimation campaign.
    Zeta,
    /// Flow-constant positivity scan over `zero_masses`.
    Scan,
    /// Concentration audit, plus the χ comparison when `n_small`/`n_large` are set.
    Diag,
    /// Empirical probabilities of the cluster-size events.
    Events,
}

/// Every subcommand reads the same document; unused keys are ignored by that
/// subcommand but unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<HeightSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
    /// `phi` (default) or `tau`, for `flow`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<i32>>,
    /// Positive-edge probability for the tail fit, as `p/q` or a decimal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_masses: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_small: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_large: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_chi: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_audit: Option<bool>,
    /// Overrides the default bond percolation threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::InvalidInput(format!(
                "unsupported config schema {} (expected {CONFIG_SCHEMA})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    fn missing(key: &str) -> Error {
        Error::InvalidInput(format!("config is missing \"{key}\""))
    }

    fn geometry(&self) -> Result<&GeometrySpec> {
        self.geometry.as_ref().ok_or_else(|| Self::missing("geometry"))
    }

    fn rectangle(&self) -> Result<HyperRectangle> {
        self.geometry()?.rectangle()
    }

    fn height(&self) -> Result<f64> {
        self.h
            .or(self.geometry.as_ref().and_then(|g| g.height))
            .ok_or_else(|| Self::missing("h"))
    }

    fn distribution(&self) -> Result<CapacityDistribution> {
        self.distribution
            .as_ref()
            .ok_or_else(|| Self::missing("distribution"))?
            .distribution()
    }

    fn thresholds(&self) -> Thresholds {
        self.thresholds.unwrap_or_default()
    }

    fn constants(&self, d: usize) -> Result<RegimeConstants> {
        match self.pc {
            Some(pc) => RegimeConstants::new(d, pc),
            None => RegimeConstants::for_dim(d),
        }
    }

    fn campaign(&self, seed: u64, workers: usize) -> Result<Campaign> {
        let base = self.rectangle()?;
        let mut c = Campaign::new(
            self.distribution()?,
            base,
            self.schedule.unwrap_or_default(),
            self.scales.clone().ok_or_else(|| Self::missing("scales"))?,
            self.replicates.ok_or_else(|| Self::missing("replicates"))?,
            seed,
        )?;
        c.constants = self.constants(c.base.dim())?;
        c.thresholds = self.thresholds();
        c.with_chi = self.with_chi.unwrap_or(false);
        c.coupling_audit = self.coupling_audit.unwrap_or(false);
        c.workers = workers;
        c.validate()?;
        Ok(c)
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Regime(_) | Error::WindowOverflow { .. } => 3,
        Error::Assertion(_) => 4,
        _ => 2,
    }
}

#[derive(Serialize)]
struct ErrorObject<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn report_error(kind: &str, message: String, code: i32) -> i32 {
    let obj = ErrorObject {
        error: kind,
        message,
        exit_code: code,
    };
    eprintln!("{}", serde_json::to_string(&obj).expect("error object serializes"));
    code
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            return report_error("usage", e.to_string().trim().to_string(), 2);
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => report_error(e.kind(), e.to_string(), exit_code(&e)),
    }
}

struct Context {
    cfg: RunConfig,
    seed: u64,
    workers: usize,
    out: Option<PathBuf>,
    emit_cut: bool,
}

impl Context {
    fn file(&self, name: &str) -> Result<Option<BufWriter<File>>> {
        match &self.out {
            None => Ok(None),
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(BufWriter::new(File::create(dir.join(name))?)))
            }
        }
    }

    fn write_text(&self, name: &str, text: &str) -> Result<()> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    fn emit(&self, cut: &CutResult, d: usize, json_name: &str) -> Result<()> {
        self.write_text(json_name, &cut.to_json(d)?)?;
        if self.emit_cut {
            let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            cut.write_cut_csv(BufWriter::new(File::create(dir.join("cut.csv"))?), d)?;
        }
        Ok(())
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_json(&fs::read_to_string(p)?),
        None => Ok(RunConfig {
            schema: CONFIG_SCHEMA,
            ..Default::default()
        }),
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let cfg = load_config(cli.config.as_deref())?;
    let ctx = Context {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        workers: cli.workers.or(cfg.workers).unwrap_or(1),
        out: cli.out.clone().or_else(|| cfg.out.clone()),
        emit_cut: cli.emit_cut,
        cfg,
    };
    if ctx.workers == 0 {
        return Err(Error::InvalidInput("--workers must be ≥ 1".into()));
    }
    match cli.command {
        Command::Flow => cmd_flow(&ctx),
        Command::Cut => cmd_cut(&ctx),
        Command::Chi => cmd_chi(&ctx),
        Command::Clusters => cmd_clusters(&ctx),
        Command::Height => cmd_height(&ctx),
        Command::Zeta => cmd_zeta(&ctx),
        Command::Scan => cmd_scan(&ctx),
        Command::Diag => cmd_diag(&ctx),
        Command::Events => cmd_events(&ctx),
    }
}

fn field(ctx: &Context) -> Result<CapacityField> {
    Ok(CapacityField::new(ctx.seed, ctx.cfg.distribution()?))
}

fn cmd_flow(ctx: &Context) -> Result<String> {
    let a = ctx.cfg.rectangle()?;
    let h = ctx.cfg.height()?;
    let f = field(ctx)?;
    let (name, cut) = match ctx.cfg.quantity.as_deref().unwrap_or("phi") {
        "phi" => ("phi", phi(&a, h, &f)?),
        "tau" => ("tau", tau(&a, h, &f)?),
        other => return Err(Error::InvalidInput(format!("unknown quantity {other:?}"))),
    };
    ctx.emit(&cut, a.dim(), "flow.json")?;
    Ok(format!(
        "{name}: flow {} (cut capacity {}, cardinality {})",
        cut.flow_value, cut.cut_capacity, cut.cut_cardinality
    ))
}

fn cmd_cut(ctx: &Context) -> Result<String> {
    let a = ctx.cfg.rectangle()?;
    let (k, cut) = psi(&a, ctx.cfg.height()?, &field(ctx)?)?;
    ctx.emit(&cut, a.dim(), "cut.json")?;
    Ok(format!("cut: capacity {}, cardinality {k}", cut.cut_capacity))
}

fn chi_options(ctx: &Context, d: usize) -> Result<ChiOptions> {
    let t = ctx.cfg.thresholds();
    Ok(ChiOptions {
        height: HeightOptions {
            cluster_cap: t.cluster_cap,
            allow_boundary_height: t.allow_boundary_height,
        },
        window_cap: t.window_cap,
        contract_positive: true,
        constants: Some(ctx.cfg.constants(d)?),
    })
}

fn cmd_chi(ctx: &Context) -> Result<String> {
    let a = ctx.cfg.rectangle()?;
    let d = a.dim();
    let res = chi(&a, ctx.cfg.height()?, &field(ctx)?, &chi_options(ctx, d)?)?;
    ctx.emit(&res.cut, d, "chi.json")?;
    Ok(format!(
        "chi: cardinality {} (capacity {}, random height {}, lateral margin {})",
        res.cardinality, res.cut.cut_capacity, res.height.value, res.window.margin
    ))
}

fn cmd_clusters(ctx: &Context) -> Result<String> {
    let cfg = &ctx.cfg;
    if let Some(coords) = &cfg.point {
        let d = coords.len();
        if !(2..=5).contains(&d) {
            return Err(Error::InvalidInput(format!("point has {d} coordinates")));
        }
        let cap = cfg.thresholds().cluster_cap;
        let report = cluster_of(Point::new(coords), &field(ctx)?, d, cap);
        ctx.write_text("cluster.json", &report.to_json()?)?;
        return Ok(format!(
            "cluster: {} vertices, {} boundary edges{}",
            report.card_v(),
            report.boundary.len(),
            if report.truncated { ", truncated" } else { "" }
        ));
    }
    let d = cfg
        .d
        .or(cfg.geometry.as_ref().map(|g| g.d))
        .ok_or_else(|| RunConfig::missing("d"))?;
    let p = parse_rational(cfg.p.as_deref().ok_or_else(|| RunConfig::missing("p"))?)?;
    let samples = cfg.samples.ok_or_else(|| RunConfig::missing("samples"))?;
    let fit = tail_fit(p, &cfg.constants(d)?, samples, ctx.seed)?;
    if let Some(w) = ctx.file("tail.csv")? {
        fit.write_csv(w)?;
    }
    let show = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
    Ok(format!(
        "tail fit: kappa1 {}, kappa2 {}, R^2 {} over sizes {}..={}",
        show(fit.kappa1_hat),
        show(fit.kappa2_hat),
        show(fit.r_squared),
        fit.fit_range.0,
        fit.fit_range.1
    ))
}

fn cmd_height(ctx: &Context) -> Result<String> {
    let a = ctx.cfg.rectangle()?;
    let t = ctx.cfg.thresholds();
    let opts = HeightOptions {
        cluster_cap: t.cluster_cap,
        allow_boundary_height: t.allow_boundary_height,
    };
    let rh = random_height(&a, ctx.cfg.height()?, &field(ctx)?, &opts)?;
    let sizes: Vec<usize> = rh.contributing_clusters.iter().map(|c| c.card_v()).collect();
    let json = serde_json::json!({ "h": rh.h, "value": rh.value, "cluster_sizes": sizes });
    ctx.write_text("height.json", &serde_json::to_string_pretty(&json)?)?;
    Ok(format!(
        "height: H = {} for h = {} ({} clusters)",
        rh.value,
        rh.h,
        rh.contributing_clusters.len()
    ))
}

fn cmd_zeta(ctx: &Context) -> Result<String> {
    let camp = ctx.cfg.campaign(ctx.seed, ctx.workers)?;
    let report = estimate_zeta(&camp)?;
    if let Some(w) = ctx.file("zeta.csv")? {
        report.write_csv(w)?;
    }
    ctx.write_text("zeta.json", &report.to_json()?)?;
    let last = report.scales.last().unwrap();
    Ok(format!(
        "zeta: zeta_hat {:.6} at n = {} (95% CI {:.6}..{:.6}, {} replicates){}",
        report.zeta_hat,
        last.n,
        last.psi.ci_low,
        last.psi.ci_high,
        report.replicates,
        report
            .scope_note
            .as_ref()
            .map(|s| format!("; note: {s}"))
            .unwrap_or_default()
    ))
}

fn cmd_scan(ctx: &Context) -> Result<String> {
    let cfg = &ctx.cfg;
    let zero_masses = cfg
        .zero_masses
        .as_ref()
        .ok_or_else(|| RunConfig::missing("zero_masses"))?
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.n.ok_or_else(|| RunConfig::missing("n"))?;
    let h = match cfg.h {
        Some(h) => h,
        None => cfg.schedule.unwrap_or_default().eval(n),
    };
    let scan = Scan {
        base: cfg.rectangle()?,
        n,
        h,
        zero_masses,
        replicates: cfg.replicates.ok_or_else(|| RunConfig::missing("replicates"))?,
        seed: ctx.seed,
        workers: ctx.workers,
        thresholds: cfg.thresholds(),
    };
    let rows = positivity_scan(&scan)?;
    if let Some(w) = ctx.file("scan.csv")? {
        write_scan_csv(&rows, w)?;
    }
    let parts: Vec<String> = rows
        .iter()
        .map(|r| format!("G(0)={}: {:.4}", r.zero_mass, r.phi_area.mean))
        .collect();
    Ok(format!(
        "scan: mean flow per unit area at n = {n}: {}",
        parts.join(", ")
    ))
}

fn cmd_diag(ctx: &Context) -> Result<String> {
    let camp = ctx.cfg.campaign(ctx.seed, ctx.workers)?;
    let conc = concentration_diagnostic(&camp)?;
    ctx.write_text("concentration.json", &serde_json::to_string_pretty(&conc)?)?;
    let mut summary = format!(
        "diag: variance bound {} at all scales, variance decreasing over {:?}: {}",
        if conc.bound_holds { "holds" } else { "FAILS" },
        conc.trend_scales,
        conc.variance_decreasing
    );
    if let (Some(ns), Some(nl)) = (ctx.cfg.n_small, ctx.cfg.n_large) {
        let sub = subadditivity_diagnostic(&camp, ns, nl)?;
        ctx.write_text("subadditivity.json", &serde_json::to_string_pretty(&sub)?)?;
        summary.push_str(&format!(
            "; chi/area {ns}->{nl}: {:.4} -> {:.4} (flagged: {}), chi-psi gap {:.4} vs CI width {:.4}",
            sub.chi_small.mean, sub.chi_large.mean, sub.flagged, sub.chi_psi_gap, sub.chi_psi_ci_width
        ));
    }
    Ok(summary)
}

fn cmd_events(ctx: &Context) -> Result<String> {
    let camp = ctx.cfg.campaign(ctx.seed, ctx.workers)?;
    let stats = event_probabilities(&camp)?;
    if let Some(w) = ctx.file("events.csv")? {
        stats.write_csv(w)?;
    }
    let parts: Vec<String> = stats
        .rows
        .iter()
        .map(|r| format!("n={}: E {:.3}, G {:.3}, H {:.3}", r.n, r.e_n, r.g_n, r.h_n))
        .collect();
    Ok(format!("events: {}", parts.join("; ")))
}
