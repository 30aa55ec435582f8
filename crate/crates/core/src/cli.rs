//! Command-line front end: JSON config plus flag overrides, exit-code
//! contract 0 = pass, 1 = verification failure, 2 = usage/config error.

use crate::catalog::{self, ExprArgs, SystemSpec};
use crate::coalgebra::{
    classical_integrals, deformed_integrals, verify_algebra, verify_involution,
    IntegralFamily, Realization, RealizationKind, RightOrdering, VerificationReport,
};
use crate::dynamics::{self, Integrator};
use crate::geometry;
use crate::phase::{Observable, PhaseState};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

const EXIT_PASS: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: i32,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

fn usage_err(message: impl fmt::Display) -> CliError {
    CliError { message: message.to_string(), code: EXIT_USAGE }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        usage_err(e)
    }
}

type CliResult = Result<i32, CliError>;

// ---------------------------------------------------------------- config

fn default_schema() -> u32 {
    1
}
fn default_samples() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-9
}
fn default_seed() -> u64 {
    42
}
fn default_dt() -> f64 {
    1e-3
}
fn default_steps() -> usize {
    10_000
}
fn default_integrator() -> Integrator {
    Integrator::Midpoint
}
fn default_curv_tol() -> f64 {
    1e-7
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub system: Option<SystemConfig>,
    pub realization: Option<RealizationConfig>,
    pub verify: Option<VerifyConfig>,
    pub curvature: Option<CurvatureConfig>,
    pub simulate: Option<SimulateConfig>,
    pub scan: Option<ScanConfig>,
    pub transform: Option<TransformConfig>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: default_samples(),
            tol: default_tol(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub f: Option<String>,
    pub t: Option<String>,
    pub v: Option<String>,
    pub u: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationConfig {
    pub kind: RealizationKindConfig,
    pub n: usize,
    #[serde(default)]
    pub z: f64,
    pub b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RealizationKindConfig {
    Classical,
    Deformed,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub points: Option<Vec<[f64; 2]>>,
    pub grid: Option<GridConfig>,
    #[serde(default = "default_curv_tol")]
    pub tol: f64,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        CurvatureConfig {
            points: None,
            grid: None,
            tol: default_curv_tol(),
            csv: None,
            json: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    pub trajectory_csv: Option<PathBuf>,
    pub drift_json: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub f: String,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_scan_points")]
    pub points: usize,
    pub z: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_scan_points() -> usize {
    50
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub q: [f64; 2],
    pub z: f64,
    pub lambda2sq: f64,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage_err(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| usage_err(format!("config {}: {e}", path.display())))?;
    if cfg.schema != 1 {
        return Err(usage_err(format!("unsupported config schema {}", cfg.schema)));
    }
    if let Some(r) = &cfg.realization {
        if let Some(b) = &r.b {
            if b.len() != r.n {
                return Err(usage_err(format!(
                    "config field \"b\" must have length n = {}, got {}",
                    r.n,
                    b.len()
                )));
            }
        }
    }
    Ok(cfg)
}

// ----------------------------------------------------------------- flags

#[derive(Parser, Debug)]
#[command(
    name = "coalg",
    about = "Superintegrable Hamiltonians from sl(2)/sl_z(2) coalgebras: \
             verification, curvature, transforms and dynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in Hamiltonian catalog
    Catalog,
    /// Check the defining bracket relations and Casimir centrality
    VerifyAlgebra(VerifyAlgebraArgs),
    /// Check that the universal integrals commute with a Hamiltonian
    VerifyIntegrals(VerifyIntegralsArgs),
    /// Gaussian curvature (closed form where known, Brioschi always)
    Curvature(CurvatureArgs),
    /// Geodesic polar coordinate transform and round trip
    Transform(TransformArgs),
    /// Classify the deformed f-family curvature as constant or not
    ScanCurvature(ScanArgs),
    /// Integrate the flow and monitor conservation drift
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct RealizationFlags {
    /// Realization kind: classical or deformed
    #[arg(long)]
    kind: Option<String>,
    /// Number of canonical pairs
    #[arg(long)]
    n: Option<usize>,
    /// Deformation parameter
    #[arg(long)]
    z: Option<f64>,
    /// Centrifugal coefficients, comma separated (default zeros)
    #[arg(long)]
    b: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct SystemFlags {
    /// Catalog system name
    #[arg(long)]
    system: Option<String>,
    /// System parameter as name=value (repeatable)
    #[arg(long = "param")]
    params: Vec<String>,
    /// Sign for z_ms: + or -
    #[arg(long, allow_hyphen_values = true)]
    sign: Option<String>,
    /// f expression argument (variable x)
    #[arg(long)]
    f: Option<String>,
    /// T expression argument (over Jm, Jp, J3)
    #[arg(long)]
    t: Option<String>,
    /// V expression argument (variable x)
    #[arg(long)]
    v: Option<String>,
    /// U expression argument (variable x)
    #[arg(long)]
    u: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyAlgebraArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    realization: RealizationFlags,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the verification report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyIntegralsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    realization: RealizationFlags,
    #[command(flatten)]
    system: SystemFlags,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvatureArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    realization: RealizationFlags,
    #[command(flatten)]
    system: SystemFlags,
    /// Evaluation point q1,q2 (repeatable)
    #[arg(long = "at", allow_hyphen_values = true)]
    at: Vec<String>,
    /// Square grid min,max,count over both axes
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Tolerance for closed-form vs Brioschi agreement
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Point q1,q2
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    lambda2sq: Option<f64>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// f expression in x
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    realization: RealizationFlags,
    #[command(flatten)]
    system: SystemFlags,
    /// Initial positions, comma separated
    #[arg(long, allow_hyphen_values = true)]
    q0: Option<String>,
    /// Initial momenta, comma separated
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// midpoint or rk4
    #[arg(long)]
    integrator: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

// --------------------------------------------------------------- helpers

fn parse_f64_list(label: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage_err(format!("{label}: bad number '{t}'")))
        })
        .collect()
}

fn load_opt_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => load_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn resolve_realization(
    flags: &RealizationFlags,
    cfg: &Option<RealizationConfig>,
) -> Result<Realization, CliError> {
    let kind = match (&flags.kind, cfg) {
        (Some(k), _) => match k.as_str() {
            "classical" => RealizationKindConfig::Classical,
            "deformed" => RealizationKindConfig::Deformed,
            other => return Err(usage_err(format!("unknown --kind '{other}'"))),
        },
        (None, Some(c)) => c.kind,
        (None, None) => RealizationKindConfig::Classical,
    };
    let n = flags
        .n
        .or(cfg.as_ref().map(|c| c.n))
        .ok_or_else(|| usage_err("missing --n (or realization.n in config)"))?;
    let z = flags.z.or(cfg.as_ref().map(|c| c.z)).unwrap_or(0.0);
    let b = match (&flags.b, cfg) {
        (Some(text), _) => parse_f64_list("--b", text)?,
        (None, Some(c)) => c.b.clone().unwrap_or_else(|| vec![0.0; n]),
        (None, None) => vec![0.0; n],
    };
    if b.len() != n {
        return Err(usage_err(format!("b must have length n = {n}, got {}", b.len())));
    }
    let r = match kind {
        RealizationKindConfig::Classical => Realization::classical(n, b),
        RealizationKindConfig::Deformed => Realization::deformed(n, z, b),
    };
    r.map_err(usage_err)
}

fn resolve_system(
    flags: &SystemFlags,
    cfg: &Option<SystemConfig>,
    realization: &Realization,
) -> Result<SystemSpec, CliError> {
    let name = flags
        .system
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.name.clone()))
        .ok_or_else(|| usage_err("missing --system (or system.name in config)"))?;
    let mut params: BTreeMap<String, f64> =
        cfg.as_ref().map(|c| c.params.clone()).unwrap_or_default();
    for pair in &flags.params {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| usage_err(format!("--param needs name=value, got '{pair}'")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| usage_err(format!("--param {key}: bad number '{value}'")))?;
        params.insert(key.trim().to_string(), value);
    }
    if let Some(sign) = &flags.sign {
        let v = match sign.as_str() {
            "+" | "+1" => 1.0,
            "-" | "-1" => -1.0,
            other => return Err(usage_err(format!("--sign must be + or -, got '{other}'"))),
        };
        params.insert("sign".to_string(), v);
    }
    let pick = |flag: &Option<String>, from_cfg: fn(&SystemConfig) -> Option<String>| {
        flag.clone().or_else(|| cfg.as_ref().and_then(from_cfg))
    };
    let exprs = ExprArgs {
        f: pick(&flags.f, |c| c.f.clone()),
        t: pick(&flags.t, |c| c.t.clone()),
        v: pick(&flags.v, |c| c.v.clone()),
        u: pick(&flags.u, |c| c.u.clone()),
    };
    catalog::build(&name, &params, &exprs, realization).map_err(usage_err)
}

fn applicable_integrals(r: &Realization) -> Result<Option<IntegralFamily>, CliError> {
    if r.n < 2 {
        return Ok(None);
    }
    let fam = match r.kind {
        RealizationKind::Classical => classical_integrals(r.n, &r.b),
        RealizationKind::Deformed => {
            deformed_integrals(r.n, r.z, &r.b, RightOrdering::OriginalOrder)
        }
    }
    .map_err(usage_err)?;
    Ok(Some(fam))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| usage_err(format!("cannot write {}: {e}", path.display())))
}

fn print_verification(report: &VerificationReport) {
    for rel in &report.relations {
        println!(
            "{} {} (max residual {:.3e}, tol {:.1e})",
            if rel.pass { "PASS" } else { "FAIL" },
            rel.relation,
            rel.max_residual,
            rel.tol
        );
    }
    println!(
        "{}: {} relations, {} samples, seed {}",
        if report.pass { "PASS" } else { "FAIL" },
        report.relations.len(),
        report.samples,
        report.seed
    );
}

fn verification_outcome(
    report: &VerificationReport,
    json: &Option<PathBuf>,
) -> CliResult {
    print_verification(report);
    if let Some(path) = json {
        write_text(path, &(report.to_json() + "\n"))?;
    }
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAIL })
}

// ------------------------------------------------------------- commands

fn cmd_catalog() -> CliResult {
    for e in catalog::list_catalog() {
        let params = if e.params.is_empty() {
            "-".to_string()
        } else {
            e.params.join(",")
        };
        let exprs = if e.exprs.is_empty() {
            "-".to_string()
        } else {
            e.exprs.join(",")
        };
        println!(
            "{:<12} realization={:<9?} params={:<10} exprs={:<6} {}",
            e.name, e.realization, params, exprs, e.description
        );
    }
    Ok(EXIT_PASS)
}

fn cmd_verify_algebra(args: &VerifyAlgebraArgs) -> CliResult {
    let cfg = load_opt_config(&args.config)?;
    let r = resolve_realization(&args.realization, &cfg.realization)?;
    let vcfg = cfg.verify.unwrap_or_default();
    let samples = args.samples.unwrap_or(vcfg.samples);
    let tol = args.tol.unwrap_or(vcfg.tol);
    let seed = args.seed.unwrap_or(vcfg.seed);
    let report = verify_algebra(&r, samples, tol, seed).map_err(usage_err)?;
    verification_outcome(&report, &args.json)
}

fn cmd_verify_integrals(args: &VerifyIntegralsArgs) -> CliResult {
    let cfg = load_opt_config(&args.config)?;
    let r = resolve_realization(&args.realization, &cfg.realization)?;
    let spec = resolve_system(&args.system, &cfg.system, &r)?;
    let fam = applicable_integrals(&r)?
        .ok_or_else(|| usage_err("integral families need n >= 2"))?;
    let vcfg = cfg.verify.unwrap_or_default();
    let samples = args.samples.unwrap_or(vcfg.samples);
    let tol = args.tol.unwrap_or(vcfg.tol);
    let seed = args.seed.unwrap_or(vcfg.seed);
    let report =
        verify_involution(&spec.hamiltonian, &fam, samples, tol, seed).map_err(usage_err)?;
    verification_outcome(&report, &args.json)
}

fn cmd_curvature(args: &CurvatureArgs) -> CliResult {
    let cfg = load_opt_config(&args.config)?;
    let r = resolve_realization(&args.realization, &cfg.realization)?;
    let spec = resolve_system(&args.system, &cfg.system, &r)?;
    let ccfg = cfg.curvature.unwrap_or_default();
    let tol = args.tol.unwrap_or(ccfg.tol);

    let mut points: Vec<[f64; 2]> = Vec::new();
    for text in &args.at {
        let v = parse_f64_list("--at", text)?;
        if v.len() != 2 {
            return Err(usage_err("--at needs exactly q1,q2"));
        }
        points.push([v[0], v[1]]);
    }
    if let Some(grid) = &args.grid {
        let v = parse_f64_list("--grid", grid)?;
        if v.len() != 3 || v[2] < 2.0 {
            return Err(usage_err("--grid needs min,max,count with count >= 2"));
        }
        points.extend(grid_points(v[0], v[1], v[2] as usize));
    } else if points.is_empty() {
        if let Some(p) = &ccfg.points {
            points.extend(p.iter().copied());
        }
        if let Some(g) = &ccfg.grid {
            points.extend(grid_points(g.min, g.max, g.count));
        }
    }
    if points.is_empty() {
        return Err(usage_err("no evaluation points: pass --at or --grid"));
    }

    let report = geometry::curvature_report(&spec, &points).map_err(usage_err)?;
    for p in &report.points {
        match p.k_closed {
            Some(k) => println!(
                "q=({:+.4},{:+.4})  K_closed={:.10}  K_brioschi={:.10}",
                p.q[0], p.q[1], k, p.k_brioschi
            ),
            None => println!(
                "q=({:+.4},{:+.4})  K_brioschi={:.10}",
                p.q[0], p.q[1], p.k_brioschi
            ),
        }
    }
    if let Some(path) = args.csv.as_ref().or(ccfg.csv.as_ref()) {
        let mut buf = Vec::new();
        geometry::write_curvature_csv(&mut buf, &report)
            .map_err(|e| usage_err(format!("csv: {e}")))?;
        write_text(path, &String::from_utf8(buf).expect("utf8 csv"))?;
    }
    if let Some(path) = args.json.as_ref().or(ccfg.json.as_ref()) {
        write_text(path, &(report.to_json() + "\n"))?;
    }
    match report.max_discrepancy {
        Some(d) => {
            let pass = d <= tol;
            println!(
                "{}: max closed-vs-Brioschi discrepancy {:.3e} (tol {:.1e})",
                if pass { "PASS" } else { "FAIL" },
                d,
                tol
            );
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
        None => {
            println!("no closed-form curvature tagged for '{}'", spec.name);
            Ok(EXIT_PASS)
        }
    }
}

fn grid_points(min: f64, max: f64, count: usize) -> Vec<[f64; 2]> {
    let step = (max - min) / (count.max(2) - 1) as f64;
    let mut out = Vec::with_capacity(count * count);
    for i in 0..count {
        for j in 0..count {
            out.push([min + step * i as f64, min + step * j as f64]);
        }
    }
    out
}

fn cmd_transform(args: &TransformArgs) -> CliResult {
    let cfg = load_opt_config(&args.config)?;
    let tc = cfg.transform;
    let q = match &args.q {
        Some(text) => {
            let v = parse_f64_list("--q", text)?;
            if v.len() != 2 {
                return Err(usage_err("--q needs exactly q1,q2"));
            }
            [v[0], v[1]]
        }
        None => tc.as_ref().map(|c| c.q).ok_or_else(|| usage_err("missing --q"))?,
    };
    let z = args
        .z
        .or(tc.as_ref().map(|c| c.z))
        .ok_or_else(|| usage_err("missing --z"))?;
    let l2 = args
        .lambda2sq
        .or(tc.as_ref().map(|c| c.lambda2sq))
        .ok_or_else(|| usage_err("missing --lambda2sq"))?;
    let (rho, theta) = geometry::to_polar(&q, z, l2).map_err(usage_err)?;
    let back = geometry::from_polar(rho, theta, z, l2).map_err(usage_err)?;
    println!("rho   = {rho:.16e}");
    println!("theta = {theta:.16e}");
    println!(
        "round trip (principal branch): q = ({:.16e}, {:.16e})",
        back[0], back[1]
    );
    Ok(EXIT_PASS)
}

fn cmd_scan(args: &ScanArgs) -> CliResult {
    let cfg = load_opt_config(&args.config)?;
    let sc = cfg.scan;
    let f_src = args
        .f
        .clone()
        .or_else(|| sc.as_ref().map(|c| c.f.clone()))
        .ok_or_else(|| usage_err("missing --f"))?;
    let x_min = args
        .x_min
        .or(sc.as_ref().map(|c| c.x_min))
        .ok_or_else(|| usage_err("missing --x-min"))?;
    let x_max = args
        .x_max
        .or(sc.as_ref().map(|c| c.x_max))
        .ok_or_else(|| usage_err("missing --x-max"))?;
    let count = args
        .points
        .or(sc.as_ref().map(|c| c.points))
        .unwrap_or_else(default_scan_points);
    let z = args
        .z
        .or(sc.as_ref().map(|c| c.z))
        .ok_or_else(|| usage_err("missing --z"))?;
    let tol = args.tol.or(sc.as_ref().map(|c| c.tol)).unwrap_or_else(default_tol);
    if count < 2 || x_max <= x_min {
        return Err(usage_err("scan needs x_max > x_min and at least 2 points"));
    }
    let f = crate::expr::parse(&f_src).map_err(usage_err)?;
    let xs: Vec<f64> = (0..count)
        .map(|i| x_min + (x_max - x_min) * i as f64 / (count - 1) as f64)
        .collect();
    let verdict = geometry::constant_curvature_scan(&f, &BTreeMap::new(), &xs, z, tol)
        .map_err(usage_err)?;
    match verdict {
        geometry::CurvatureVerdict::Constant { k } => {
            println!("constant curvature: K = {k:.12e}")
        }
        geometry::CurvatureVerdict::NonConstant { min, max } => {
            println!("non-constant curvature: K in [{min:.6e}, {max:.6e}]")
        }
    }
    Ok(EXIT_PASS)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult {
    let cfg = load_opt_config(&args.config)?;
    let r = resolve_realization(&args.realization, &cfg.realization)?;
    let spec = resolve_system(&args.system, &cfg.system, &r)?;
    let sim = cfg.simulate;

    let parse_vec = |label: &str, flag: &Option<String>, from_cfg: Option<&Vec<f64>>| {
        match flag {
            Some(text) => parse_f64_list(label, text),
            None => from_cfg
                .cloned()
                .ok_or_else(|| usage_err(format!("missing {label}"))),
        }
    };
    let q0 = parse_vec("--q0", &args.q0, sim.as_ref().map(|c| &c.q0))?;
    let p0 = parse_vec("--p0", &args.p0, sim.as_ref().map(|c| &c.p0))?;
    let s0 = PhaseState::new(q0, p0).map_err(usage_err)?;
    if s0.n() != r.n {
        return Err(usage_err(format!(
            "initial state has {} pairs, realization has {}",
            s0.n(),
            r.n
        )));
    }
    let dt = args.dt.or(sim.as_ref().map(|c| c.dt)).unwrap_or_else(default_dt);
    let steps = args
        .steps
        .or(sim.as_ref().map(|c| c.steps))
        .unwrap_or_else(default_steps);
    let integrator = match &args.integrator {
        Some(text) => match text.as_str() {
            "midpoint" => Integrator::Midpoint,
            "rk4" => Integrator::Rk4,
            other => return Err(usage_err(format!("unknown integrator '{other}'"))),
        },
        None => sim
            .as_ref()
            .map(|c| c.integrator)
            .unwrap_or_else(default_integrator),
    };

    let fam = applicable_integrals(&r)?;
    let monitors: Vec<&Observable> = fam
        .as_ref()
        .map(|f| f.members().collect())
        .unwrap_or_default();
    let (traj, report) = dynamics::simulate(&spec.hamiltonian, &s0, dt, steps, &monitors, integrator)
        .map_err(usage_err)?;

    for m in &report.monitors {
        println!(
            "{:<10} initial {:+.12e}  max drift {:.3e}  rel {:.3e}",
            m.name, m.initial, m.max_abs_drift, m.rel_drift
        );
    }
    if let Some(path) = args.csv.as_ref().or(sim.as_ref().and_then(|c| c.trajectory_csv.as_ref())) {
        let mut buf = Vec::new();
        dynamics::write_trajectory_csv(&mut buf, &traj)
            .map_err(|e| usage_err(format!("csv: {e}")))?;
        write_text(path, &String::from_utf8(buf).expect("utf8 csv"))?;
    }
    if let Some(path) = args.json.as_ref().or(sim.as_ref().and_then(|c| c.drift_json.as_ref())) {
        write_text(path, &(report.to_json() + "\n"))?;
    }
    Ok(EXIT_PASS)
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap's own rendering already uses the `error:` prefix for
            // failures and handles --help/--version with success codes.
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let outcome = match &cli.command {
        Command::Catalog => cmd_catalog(),
        Command::VerifyAlgebra(a) => cmd_verify_algebra(a),
        Command::VerifyIntegrals(a) => cmd_verify_integrals(a),
        Command::Curvature(a) => cmd_curvature(a),
        Command::Transform(a) => cmd_transform(a),
        Command::ScanCurvature(a) => cmd_scan(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
