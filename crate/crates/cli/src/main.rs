//! Command-line entry point: constants tables, certificate campaigns,
//! lift scans, Brouwer degree reports and direct renormalization.
//!
//! Exit codes: 0 success, 2 usage errors, 3 numerical failure.

use anyhow::{anyhow, Context};
use caplift::bound::{certify, BoundCertificate, CertifyOptions};
use caplift::constants::{bound_constants, Dimension};
use caplift::geom::SpherePoint;
use caplift::measure::{hersch_renormalize, DiscreteMeasure, HerschOptions};
use caplift::metric::{ConformalMetric, MetricDto};
use caplift::quadform::{complement_symmetry_check, lift_path, PipelineOptions};
use caplift::spectral::{lambda_invariant, normalize, spectrum, NormalizeOptions, SpectrumOptions};
use caplift::topology::{
    degree_parity_check, degree, equivariance_residual, equivariant_sample_maps, SampledMap,
};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "caplift", version, about = "conformal eigenvalue bound laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Table of σ_n, K_n and the bounds over a range of dimensions
    Constants(ConstantsArgs),
    /// Certificate campaign over a set of conformal metrics
    Certify(CertifyArgs),
    /// Track the maximal-direction lift along a cap path, with symmetry residuals
    LiftScan(LiftScanArgs),
    /// Brouwer degree of a builtin, corpus or sampled map
    Degree(DegreeArgs),
    /// Renormalization point of a measure given as CSV
    Renormalize(RenormalizeArgs),
}

#[derive(Args)]
struct ConstantsArgs {
    /// dimension or inclusive range, e.g. 3 or 2..10
    #[arg(long = "n", default_value = "2..10")]
    n: String,
    /// output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CertifyArgs {
    /// campaign configuration JSON; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "n")]
    n: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// number of random metrics when no files are given
    #[arg(long)]
    count: Option<usize>,
    /// harmonic degree of random metrics
    #[arg(long)]
    degree: Option<u32>,
    /// coefficient amplitude of random metrics
    #[arg(long)]
    amplitude: Option<f64>,
    /// metric JSON files to certify instead of random ones
    #[arg(long = "metric", num_args = 0..)]
    metrics: Vec<PathBuf>,
    #[arg(long = "grid-order")]
    grid_order: Option<u32>,
    #[arg(long = "basis-L")]
    basis_l: Option<u32>,
    /// balance-root tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// output directory for certificates and the summary CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LiftScanArgs {
    /// metric JSON file; a random metric is drawn when omitted
    #[arg(long)]
    metric: Option<PathBuf>,
    #[arg(long = "n", default_value_t = 2)]
    n: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// cap axis, comma-separated coordinates
    #[arg(long, default_value = "1,0,0")]
    p: String,
    #[arg(long, default_value_t = -0.98, allow_negative_numbers = true)]
    r_min: f64,
    #[arg(long, default_value_t = 0.95, allow_negative_numbers = true)]
    r_max: f64,
    #[arg(long, default_value_t = 30)]
    steps: usize,
    #[arg(long = "grid-order", default_value_t = 30)]
    grid_order: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DegreeArgs {
    /// identity | antipodal | corpus
    #[arg(long)]
    builtin: Option<String>,
    /// CSV of samples p0..pn,f0..fn
    #[arg(long = "from-samples")]
    from_samples: Option<PathBuf>,
    #[arg(long = "n", default_value_t = 2)]
    n: u32,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long = "grid-order")]
    grid_order: Option<u32>,
    /// kernel radius for sampled maps
    #[arg(long, default_value_t = 0.1)]
    kernel_radius: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenormalizeArgs {
    /// measure CSV with header x0..xn,weight
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Campaign configuration file schema.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct CampaignConfig {
    #[serde(default)]
    n: Option<u32>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    count: Option<usize>,
    #[serde(default)]
    degree: Option<u32>,
    #[serde(default)]
    amplitude: Option<f64>,
    #[serde(default)]
    metric_files: Vec<String>,
    #[serde(default)]
    grid_order: Option<u32>,
    #[serde(default)]
    basis_l: Option<u32>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    out_dir: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Constants(args) => cmd_constants(args),
        Command::Certify(args) => cmd_certify(args),
        Command::LiftScan(args) => cmd_lift_scan(args),
        Command::Degree(args) => cmd_degree(args),
        Command::Renormalize(args) => cmd_renormalize(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn parse_range(text: &str) -> anyhow::Result<(u32, u32)> {
    if let Some((a, b)) = text.split_once("..") {
        let lo: u32 = a.trim().parse()?;
        let hi: u32 = b.trim().parse()?;
        if hi < lo {
            return Err(anyhow!("empty range {text}"));
        }
        Ok((lo, hi))
    } else {
        let v: u32 = text.trim().parse()?;
        Ok((v, v))
    }
}

fn cmd_constants(args: ConstantsArgs) -> anyhow::Result<ExitCode> {
    let (lo, hi) = match parse_range(&args.n) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("usage error: {e}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    if lo < 2 {
        eprintln!("usage error: dimensions start at 2");
        return Ok(ExitCode::from(EXIT_USAGE));
    }
    let mut csv = String::from("n,sigma_n,k_n,theorem_bound,conjecture_bound\n");
    for n in lo..=hi {
        let c = bound_constants(Dimension::new(n)?);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            n, c.sigma_n, c.k_n, c.theorem_bound, c.conjecture_bound
        ));
    }
    write_or_print(&args.out, &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn load_metric(path: &Path) -> anyhow::Result<ConformalMetric> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dto: MetricDto = serde_json::from_str(&text)?;
    Ok(ConformalMetric::from_json(&dto)?)
}

struct CampaignRow {
    index: usize,
    label: String,
    outcome: anyhow::Result<(BoundCertificate, f64)>,
}

fn cmd_certify(args: CertifyArgs) -> anyhow::Result<ExitCode> {
    let mut config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<CampaignConfig>(&text)?
        }
        None => CampaignConfig::default(),
    };
    // flag overrides
    if args.n.is_some() {
        config.n = args.n;
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if args.count.is_some() {
        config.count = args.count;
    }
    if args.degree.is_some() {
        config.degree = args.degree;
    }
    if args.amplitude.is_some() {
        config.amplitude = args.amplitude;
    }
    if args.grid_order.is_some() {
        config.grid_order = args.grid_order;
    }
    if args.basis_l.is_some() {
        config.basis_l = args.basis_l;
    }
    if args.tol.is_some() {
        config.tol = args.tol;
    }
    if !args.metrics.is_empty() {
        config.metric_files = args
            .metrics
            .iter()
            .map(|p| p.display().to_string())
            .collect();
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.display().to_string());
    }

    if let Some(tol) = config.tol {
        if tol <= 0.0 {
            eprintln!("usage error: tolerance must be positive");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    }
    let n = Dimension::new(config.n.unwrap_or(2))?;
    if n.get() > 3 {
        eprintln!("usage error: campaigns support n = 2 and 3");
        return Ok(ExitCode::from(EXIT_USAGE));
    }

    // assemble the metric list
    let mut metrics: Vec<(String, ConformalMetric)> = Vec::new();
    if config.metric_files.is_empty() {
        let seed = config.seed.unwrap_or(7);
        let count = config.count.unwrap_or(20);
        let degree = config.degree.unwrap_or(3);
        let amplitude = config.amplitude.unwrap_or(0.3);
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(seed);
        for i in 0..count {
            metrics.push((
                format!("random-{seed}-{i:03}"),
                ConformalMetric::random(n, degree, amplitude, &mut rng),
            ));
        }
    } else {
        for file in &config.metric_files {
            metrics.push((
                Path::new(file)
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| file.clone()),
                load_metric(Path::new(file))?,
            ));
        }
    }

    let mut certify_opts = CertifyOptions::for_dimension(n);
    if let Some(tol) = config.tol {
        certify_opts.balance_tolerance = tol;
    }
    let mut spectrum_opts = SpectrumOptions::for_dimension(n);
    if let Some(l) = config.basis_l {
        spectrum_opts = spectrum_opts.with_basis(l);
    }
    if let Some(order) = config.grid_order {
        spectrum_opts.grid_order = order;
    }
    spectrum_opts.k_max = 4;

    // campaign loop; each metric is independent and failures are recorded
    let indexed: Vec<usize> = (0..metrics.len()).collect();
    let rows: Vec<CampaignRow> = caplift::par::map_collect(&indexed, |&i| {
        let (label, metric) = &metrics[i];
        let outcome = (|| -> anyhow::Result<(BoundCertificate, f64)> {
            let cert = certify(metric, &certify_opts)?;
            let report = spectrum(metric, &spectrum_opts)?;
            Ok((cert, lambda_invariant(&report, 2)))
        })();
        CampaignRow {
            index: i,
            label: label.clone(),
            outcome,
        }
    });

    let out_dir = config.out_dir.as_ref().map(PathBuf::from);
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir)?;
    }

    let mut csv = String::from(
        "index,label,branch,r_star,minmax_value,solver_lambda2_vol,theorem_bound,conjecture_bound,margin_theorem,passed\n",
    );
    let mut all_passed = true;
    for row in &rows {
        match &row.outcome {
            Ok((cert, solver)) => {
                let branch = match cert.branch {
                    caplift::bound::Branch::MetricMultiple => "metric-multiple",
                    caplift::bound::Branch::CapMultiple => "cap-multiple",
                    caplift::bound::Branch::BalancedCap => "balanced-cap",
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    row.index,
                    row.label,
                    branch,
                    cert.r_star.map(|r| r.to_string()).unwrap_or_default(),
                    cert.minmax_value,
                    solver,
                    cert.theorem_bound,
                    cert.conjecture_bound,
                    cert.theorem_bound - cert.minmax_value,
                    cert.passed
                ));
                if !cert.passed {
                    all_passed = false;
                }
                if let Some(dir) = &out_dir {
                    let mut record = serde_json::to_value(cert)?;
                    record["solver_lambda2_vol"] = serde_json::json!(solver);
                    record["label"] = serde_json::json!(row.label);
                    fs::write(
                        dir.join(format!("{}.certificate.json", row.label)),
                        serde_json::to_string_pretty(&record)?,
                    )?;
                    fs::write(
                        dir.join(format!("{}.metric.json", row.label)),
                        serde_json::to_string_pretty(&metrics[row.index].1.to_json())?,
                    )?;
                }
            }
            Err(err) => {
                all_passed = false;
                csv.push_str(&format!("{},{},error: {err},,,,,,,false\n", row.index, row.label));
            }
        }
    }
    match &out_dir {
        Some(dir) => {
            fs::write(dir.join("summary.csv"), &csv)?;
            print!("{csv}");
        }
        None => print!("{csv}"),
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    })
}

fn cmd_lift_scan(args: LiftScanArgs) -> anyhow::Result<ExitCode> {
    let n = Dimension::new(args.n)?;
    let metric = match &args.metric {
        Some(path) => load_metric(path)?,
        None => {
            use rand::rngs::StdRng;
            use rand::SeedableRng;
            let mut rng = StdRng::seed_from_u64(args.seed);
            ConformalMetric::random(n, 3, 0.3, &mut rng)
        }
    };
    if args.steps < 2 || args.r_min >= args.r_max {
        eprintln!("usage error: need an ascending radius range with at least two steps");
        return Ok(ExitCode::from(EXIT_USAGE));
    }
    let coords: Vec<f64> = args
        .p
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("parsing --p: {e}"))?;
    if coords.len() != n.ambient() {
        eprintln!("usage error: --p needs {} coordinates", n.ambient());
        return Ok(ExitCode::from(EXIT_USAGE));
    }
    let p = SpherePoint::from_coords(&coords)?;

    let normalized = normalize(
        &metric,
        &NormalizeOptions {
            grid_order: args.grid_order,
            ..NormalizeOptions::default()
        },
    )?;
    let mut csv = String::new();
    let dim = n.ambient();
    let mut header = vec!["r".to_string()];
    header.extend((0..dim).map(|i| format!("s{i}")));
    header.push("gap".into());
    header.extend((0..dim).map(|i| format!("xi{i}")));
    header.push("symmetry_xi_residual".into());
    header.push("symmetry_dir_residual".into());
    csv.push_str(&header.join(","));
    csv.push('\n');

    if normalized.multiple {
        csv.push_str(&format!(
            "multiplicity,metric,{:e},,,,\n",
            normalized.gap
        ));
        write_or_print(&args.out, &csv)?;
        println!("metric gram form is multiple (gap {:e}); lift not tracked", normalized.gap);
        return Ok(ExitCode::SUCCESS);
    }

    let quad = caplift::grid::grid(n, args.grid_order)?;
    let nu = DiscreteMeasure::from_metric(&normalized, &quad);
    let r_grid: Vec<f64> = (0..args.steps)
        .map(|i| args.r_min + (args.r_max - args.r_min) * i as f64 / (args.steps as f64 - 1.0))
        .collect();
    let opts = PipelineOptions::default();
    let path = lift_path(&nu, &p, &r_grid, &opts)?;

    for sample in &path.samples {
        let cap = caplift::geom::Cap::new(sample.r, p)?;
        let report = complement_symmetry_check(&nu, &cap, &opts)?;
        let mut row = vec![sample.r.to_string()];
        row.extend(sample.s.vector().as_slice().iter().map(|v| v.to_string()));
        row.push(sample.relative_gap.to_string());
        row.extend(sample.xi.vector().as_slice().iter().map(|v| v.to_string()));
        row.push(format!("{:e}", report.xi_residual));
        row.push(format!("{:e}", report.direction_residual));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    if let Some(hit) = &path.multiplicity {
        csv.push_str(&format!("multiplicity,{},{:e},,,\n", hit.r, hit.relative_gap));
    }
    write_or_print(&args.out, &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_degree(args: DegreeArgs) -> anyhow::Result<ExitCode> {
    let n = Dimension::new(args.n)?;
    let order = args
        .grid_order
        .unwrap_or(if n.get() == 2 { 40 } else { 16 });

    let report = match (&args.builtin, &args.from_samples) {
        (Some(name), None) => match name.as_str() {
            "identity" => serde_json::to_value(degree(&SampledMap::Identity, n, order)?)?,
            "antipodal" => serde_json::to_value(degree(&SampledMap::Antipodal, n, order)?)?,
            "corpus" => {
                let mut entries = Vec::new();
                for (label, map) in equivariant_sample_maps(n, args.seed) {
                    let parity = degree_parity_check(&map, n, order)?;
                    entries.push(serde_json::json!({
                        "map": label,
                        "equivariance_residual": parity.equivariance_residual,
                        "degree": parity.degree.degree,
                        "rounding_gap": parity.degree.rounding_gap,
                        "parity_ok": parity.parity_ok,
                    }));
                }
                serde_json::Value::Array(entries)
            }
            other => {
                eprintln!("usage error: unknown builtin '{other}' (identity|antipodal|corpus)");
                return Ok(ExitCode::from(EXIT_USAGE));
            }
        },
        (None, Some(path)) => {
            let file = fs::File::open(path)?;
            let map = SampledMap::from_sample_csv(file, args.kernel_radius)?;
            let residual = equivariance_residual(&map, n);
            let deg = degree(&map, n, order)?;
            let parity_checked = residual <= 1e-6;
            serde_json::json!({
                "equivariance_residual": residual,
                "equivariance_gate_passed": parity_checked,
                "degree": deg.degree,
                "raw_integral": deg.raw_integral,
                "rounding_gap": deg.rounding_gap,
                "parity_ok": if parity_checked {
                    serde_json::json!(if n.get() % 2 == 0 { deg.degree.rem_euclid(2) == 1 } else { deg.degree == 1 })
                } else {
                    serde_json::Value::Null
                },
            })
        }
        _ => {
            eprintln!("usage error: pass exactly one of --builtin or --from-samples");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    write_or_print(&args.out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_renormalize(args: RenormalizeArgs) -> anyhow::Result<ExitCode> {
    if args.tol <= 0.0 {
        eprintln!("usage error: tolerance must be positive");
        return Ok(ExitCode::from(EXIT_USAGE));
    }
    let file = fs::File::open(&args.measure)
        .with_context(|| format!("reading {}", args.measure.display()))?;
    let nu = DiscreteMeasure::from_csv(file)?;
    let opts = HerschOptions {
        tolerance: args.tol,
        ..HerschOptions::default()
    };
    let point = hersch_renormalize(&nu, &opts)?;
    let report = serde_json::json!({
        "xi": point.xi.vector().as_slice(),
        "residual": point.residual,
        "iterations": point.iterations,
        "mass": nu.mass(),
    });
    write_or_print(&args.out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    Ok(ExitCode::SUCCESS)
}
