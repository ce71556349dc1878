//! Command-line frontend.

mod render;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instances::{generate, Family, InstanceError, InstanceSpec};
use crate::kernel::{KernelError, Metric, Point2, SharingMode, SiteSet};
use crate::orderk::{build_tower, DiagramTower, OrderKError};
use crate::subdivision::{Census, OrderKLabel, PlanarSubdivision};
use crate::verify::{
    check_identities, check_structure, check_supporting, check_type2_stability, complexity_bound, oracle_agreement, type2_lower_intrusions,
    AgreementReport, Check, Report, StructureOptions, VerifyError,
};

pub use render::{render_svg, RenderOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{0} verification checks failed")]
    Verification(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Usage(_) => EXIT_IO,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Degenerate(_) => EXIT_DEGENERATE,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::NonFinite(_) | KernelError::BadId { .. } | KernelError::InvalidMetric(_) | KernelError::UnknownMetric(_) => CliError::Usage(e.to_string()),
            _ => CliError::Degenerate(e.to_string()),
        }
    }
}

impl From<OrderKError> for CliError {
    fn from(e: OrderKError) -> Self {
        match e {
            OrderKError::InfeasibleK { .. } => CliError::Infeasible(e.to_string()),
            OrderKError::UnsupportedMetric(_) | OrderKError::PslgMetric => CliError::Usage(e.to_string()),
            OrderKError::Kernel(k) => k.into(),
            OrderKError::Topology { .. } | OrderKError::Boundary(_) => CliError::Degenerate(e.to_string()),
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            InstanceError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            InstanceError::Kernel(k) => k.into(),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Instance(e) => e.into(),
            VerifyError::OrderK(e) => e.into(),
            VerifyError::Overlay(m) => CliError::Degenerate(m),
        }
    }
}

/// Instance file: `{"mode": "disjoint", "segments": [[x1, y1, x2, y2], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub mode: SharingMode,
    pub segments: Vec<[f64; 4]>,
}

impl InstanceFile {
    pub fn from_sites(sites: &SiteSet) -> Self {
        InstanceFile { mode: sites.mode, segments: sites.sites.iter().map(|s| [s.a.x, s.a.y, s.b.x, s.b.y]).collect() }
    }

    pub fn to_sites(&self) -> Result<SiteSet, KernelError> {
        SiteSet::new(self.mode, self.segments.iter().map(|s| (Point2::new(s[0], s[1]), Point2::new(s[2], s[3]))).collect())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &text)
}

pub fn load_instance(path: &Path) -> Result<SiteSet, CliError> {
    Ok(read_json::<InstanceFile>(path)?.to_sites()?)
}

pub fn load_diagram(path: &Path) -> Result<PlanarSubdivision, CliError> {
    read_json(path)
}

pub fn save_diagram(path: &Path, d: &PlanarSubdivision) -> Result<(), CliError> {
    write_json(path, d)
}

/// Parses `k` or `a..b` (inclusive) into a range of orders.
pub fn parse_k_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad order '{t}': {e}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if a == 0 || a > b {
        return Err(format!("empty or zero-based order range '{s}'"));
    }
    Ok(a..=b)
}

#[derive(Debug, Parser)]
#[command(name = "segvoronoi", version, about = "Order-k Voronoi diagrams of line segments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance JSON file.
    pub input: PathBuf,
    /// euclidean, l1 or linf.
    #[arg(long, default_value = "euclidean")]
    pub metric: Metric,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Builds levels and writes one diagram JSON per level.
    Compute {
        #[command(flatten)]
        common: Common,
        /// Order or inclusive range such as 1..3.
        #[arg(long, default_value = "1", value_parser = parse_k_range)]
        k: RangeInclusive<usize>,
        /// Output directory for level-<k>.json files.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Runs the identity, structure and oracle checks and writes a JSON report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Highest order checked (default n-1).
        #[arg(long)]
        k_max: Option<usize>,
        /// Oracle samples per level.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Sampled points per site for star-shapedness (0 disables).
        #[arg(long, default_value_t = 100)]
        star_points: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Report path; printed to stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Writes a generated instance.
    Generate {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Draws one level (from an instance or a diagram JSON) as SVG.
    Render {
        /// Instance or diagram JSON file.
        input: PathBuf,
        /// Instance the diagram was built from, when `input` is a diagram.
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long, default_value = "euclidean")]
        metric: Metric,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 800)]
        width: u32,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Prints per-level counts.
    Census {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_k_range)]
        k: Option<RangeInclusive<usize>>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCensus {
    pub k: usize,
    #[serde(flatten)]
    pub census: Census,
}

/// A region split into several faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionFaces {
    pub k: usize,
    pub label: String,
    pub faces: usize,
    pub unbounded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub n: usize,
    pub mode: SharingMode,
    pub metric: Metric,
    pub census: Vec<LevelCensus>,
    pub regions: Vec<RegionFaces>,
    pub agreement: Vec<AgreementReport>,
    pub checks: Vec<Check>,
    /// Informational counts that are not pass/fail.
    pub notes: Vec<String>,
    pub failures: usize,
}

fn tower_for(sites: &SiteSet, k_max: usize, metric: Metric) -> Result<DiagramTower, CliError> {
    if sites.len() < 2 {
        return Err(CliError::Infeasible(format!("need at least 2 sites, got {}", sites.len())));
    }
    Ok(build_tower(sites, k_max, metric)?)
}

fn census_rows(t: &DiagramTower) -> Result<Vec<LevelCensus>, CliError> {
    t.levels
        .iter()
        .map(|d| d.census().map(|census| LevelCensus { k: d.k, census }).map_err(|e| CliError::Degenerate(e.to_string())))
        .collect()
}

/// Regions of each level with more than one face.
pub fn split_regions(t: &DiagramTower) -> Vec<RegionFaces> {
    let mut out = Vec::new();
    for d in &t.levels {
        let mut by: BTreeMap<&OrderKLabel, (usize, usize)> = BTreeMap::new();
        for f in d.face_ids() {
            if let Some(l) = &d.faces[f].label {
                let e = by.entry(l).or_default();
                e.0 += 1;
                e.1 += d.faces[f].unbounded as usize;
            }
        }
        out.extend(by.into_iter().filter(|(_, c)| c.0 > 1).map(|(l, c)| RegionFaces { k: d.k, label: l.to_string(), faces: c.0, unbounded: c.1 }));
    }
    out
}

pub fn verify_tower(t: &DiagramTower, samples: usize, opts: &StructureOptions) -> Result<VerifyOutput, CliError> {
    let mut rep = check_identities(t);
    rep.extend(check_structure(t, opts));
    let mut notes = Vec::new();
    if t.sites.mode == SharingMode::Pslg {
        rep.extend(check_type2_stability(t, samples, opts.seed));
        for (k, hits, _) in type2_lower_intrusions(t) {
            notes.push(format!("order-{} elements inside Type-2 faces of order {k}: {hits}", k - 1));
        }
    } else if t.metric != Metric::L1 {
        rep.extend(check_supporting(t));
    }
    for c in complexity_bound(t) {
        notes.push(format!("{} at k={:?}: {} (bound {})", c.name, c.level, c.actual, c.expected));
    }
    let agreement: Vec<AgreementReport> = t.levels.iter().map(|d| oracle_agreement(d, &t.sites, samples, opts.seed)).collect();
    for a in &agreement {
        rep.checks.push(Check::eq("oracle agreement mismatches", Some(a.k), 0, a.mismatches.len() as i64));
    }
    let failures = rep.failures().count();
    let Report { checks } = rep;
    Ok(VerifyOutput {
        n: t.sites.len(),
        mode: t.sites.mode,
        metric: t.metric,
        census: census_rows(t)?,
        regions: split_regions(t),
        agreement,
        checks,
        notes,
        failures,
    })
}

fn format_census(rows: &[LevelCensus]) -> String {
    let mut s = format!("{:>3} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", "k", "F", "E", "V", "U", "Vnew", "Vold", "Vother");
    for r in rows {
        let c = &r.census;
        s += &format!("{:>3} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", r.k, c.f, c.e, c.v, c.u, c.v_new, c.v_old, c.v_other);
    }
    s
}

fn check_range(k: &RangeInclusive<usize>, n: usize) -> Result<(), CliError> {
    if *k.end() >= n.max(2) {
        return Err(CliError::Infeasible(format!("order {} is outside 1..={} for {n} sites", k.end(), n.saturating_sub(1))));
    }
    Ok(())
}

/// Runs one command, printing to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compute { common, k, out } => {
            let sites = load_instance(&common.input)?;
            check_range(&k, sites.len())?;
            let t = tower_for(&sites, *k.end(), common.metric)?;
            for d in t.levels.iter().filter(|d| k.contains(&d.k)) {
                let path = out.join(format!("level-{}.json", d.k));
                save_diagram(&path, d)?;
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Verify { common, k_max, samples, star_points, seed, out } => {
            let sites = load_instance(&common.input)?;
            let k_max = k_max.unwrap_or(sites.len().saturating_sub(1));
            check_range(&(1..=k_max), sites.len())?;
            let t = tower_for(&sites, k_max, common.metric)?;
            let opts = StructureOptions { star_points, seed, ..StructureOptions::default() };
            let report = verify_tower(&t, samples, &opts)?;
            match out {
                Some(p) => write_json(&p, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
            }
            for c in report.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {} (k={:?}): expected {}, got {} {}", c.name, c.level, c.expected, c.actual, c.detail);
            }
            if report.failures > 0 {
                return Err(CliError::Verification(report.failures));
            }
            Ok(())
        }
        Command::Generate { family, n, k, seed, scale, out } => {
            let sites = generate(&InstanceSpec { family, n, k, seed, scale })?;
            write_json(&out, &InstanceFile::from_sites(&sites))
        }
        Command::Render { input, sites, metric, k, width, out } => {
            let opts = RenderOptions { width, ..RenderOptions::default() };
            let svg = match read_json::<InstanceFile>(&input) {
                Ok(file) => {
                    let s = file.to_sites()?;
                    check_range(&(k..=k), s.len())?;
                    let t = tower_for(&s, k, metric)?;
                    render_svg(t.level(k).expect("built"), Some(&s), &opts)
                }
                Err(_) => {
                    let d = load_diagram(&input)?;
                    let s = sites.as_deref().map(load_instance).transpose()?;
                    render_svg(&d, s.as_ref(), &opts)
                }
            };
            write_text(&out, &svg)
        }
        Command::Census { common, k, json } => {
            let sites = load_instance(&common.input)?;
            let k = k.unwrap_or(1..=sites.len().saturating_sub(1).max(1));
            check_range(&k, sites.len())?;
            let t = tower_for(&sites, *k.end(), common.metric)?;
            let rows: Vec<LevelCensus> = census_rows(&t)?.into_iter().filter(|r| k.contains(&r.k)).collect();
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).expect("serializable"));
            } else {
                print!("{}", format_census(&rows));
            }
            Ok(())
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("3").unwrap(), 3..=3);
        assert_eq!(parse_k_range("1..3").unwrap(), 1..=3);
        assert_eq!(parse_k_range("1..=4").unwrap(), 1..=4);
        assert!(parse_k_range("0..2").is_err());
        assert!(parse_k_range("3..1").is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let text = r#"{"mode": "disjoint", "segments": [[0, 0, 1, 0], [0, 3, 2, 4]]}"#;
        let f: InstanceFile = serde_json::from_str(text).unwrap();
        let s = f.to_sites().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(InstanceFile::from_sites(&s), f);
    }

    #[test]
    fn error_codes_are_distinct() {
        let codes = [
            CliError::Usage(String::new()).exit_code(),
            CliError::Infeasible(String::new()).exit_code(),
            CliError::Degenerate(String::new()).exit_code(),
            CliError::Verification(1).exit_code(),
        ];
        assert_eq!(codes, [EXIT_IO, EXIT_INFEASIBLE, EXIT_DEGENERATE, EXIT_VERIFY]);
    }
}
