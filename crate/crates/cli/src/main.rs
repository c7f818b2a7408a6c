//! Command-line front end: simulate replicates, run the estimator, check the
//! acceptance criteria and produce Monte Carlo oracle grids.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use pencil_kde::analytic::{h2_closed_form, mc_condensed_density, SnrPoint};
use pencil_kde::bandwidth::write_bandwidth_reports;
use pencil_kde::config::RunConfig;
use pencil_kde::diffusion::write_log;
use pencil_kde::pencil::{eigensolve_replicates, write_eigen_dump};
use pencil_kde::pilot::write_maxima;
use pencil_kde::pipeline::{estimate_region, simulate, RegionOutcome};
use pencil_kde::validate::{overall, run_selected, ValidationOptions};
use pencil_kde::{ChebGrid, ReplicateSet, RngConfig, ScalarField};

#[derive(Debug, Parser)]
#[command(
    name = "pencil-kde",
    version,
    about = "Diffusion kernel estimates of Hankel pencil eigenvalue densities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Grid nodes along x and y.
    #[arg(long, global = true, num_args = 2, value_names = ["MX", "MY"])]
    grid: Option<Vec<usize>>,
    /// Restrict the estimate to one region (0-based).
    #[arg(long, global = true, value_name = "IDX")]
    region: Option<usize>,
    /// Use the operator exactly as printed (Laplacian without the factor a).
    #[arg(long = "literal-eq51", global = true)]
    literal: bool,
    /// Start each replicate's diffusion from its own eigenvalue only.
    #[arg(long, global = true)]
    per_point_delta: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw the replicated noisy samples and write the replicate file.
    Simulate,
    /// Run the estimator on every configured region.
    Estimate {
        /// Also emit the analytic and Monte Carlo grids (two-sample single-component models).
        #[arg(long)]
        mc_oracle: bool,
    },
    /// Run the acceptance criteria and report pass/fail for each.
    Validate {
        /// Comma-separated subset of criteria, e.g. `A1,A7`.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<String>,
    },
    /// Analytic two-sample density against a Monte Carlo histogram.
    McOracle {
        /// Number of Monte Carlo trials.
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
}

fn load_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if let Some(g) = &common.grid {
        cfg.mx = g[0];
        cfg.my = g[1];
    }
    cfg.literal_operator |= common.literal;
    cfg.per_point_delta |= common.per_point_delta;
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn sha256_hex(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn replicates_for(cfg: &RunConfig) -> anyhow::Result<ReplicateSet> {
    match &cfg.replicates_file {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Ok(ReplicateSet::read_text(BufReader::new(f))?)
        }
        None => Ok(simulate(cfg)?),
    }
}

fn cmd_simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    fs::create_dir_all(&cfg.output)?;
    let reps = simulate(cfg)?;
    let path = cfg.output.join("replicates.csv");
    let mut w = create(&cfg.output, "replicates.csv")?;
    reps.write_text(&mut w)?;
    w.flush()?;
    println!("seed {}", cfg.seed);
    println!("replicates {} x {}", reps.replicates(), reps.n());
    println!("sha256 {}  {}", sha256_hex(&path)?, path.display());
    Ok(())
}

fn write_grid(dir: &Path, name: &str, field: &ScalarField) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    field.write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_region(cfg: &RunConfig, o: &RegionOutcome) -> anyhow::Result<String> {
    let dir = cfg.output.join(format!("region{}", o.index));
    fs::create_dir_all(&dir)?;
    write_grid(&dir, "histogram.grid", &o.histogram)?;
    write_grid(&dir, "pilot.grid", &o.pilot)?;
    write_maxima(&o.pilot_maxima, create(&dir, "pilot_maxima.csv")?)?;
    if let Some(b) = &o.baseline {
        write_grid(&dir, "baseline.grid", &b.field)?;
    }
    if let Some(c) = &o.combined {
        write_grid(&dir, "estimate.grid", &c.field)?;
    }
    if let Some(c) = &o.combined_normalized {
        write_grid(&dir, "estimate_normalized.grid", &c.field)?;
    }
    for (j, e) in o.cluster_estimates.iter().enumerate() {
        write_grid(&dir, &format!("cluster{j}.grid"), &e.field)?;
    }
    if let Some(c) = &o.clusters {
        c.write_report(create(&dir, "clusters.csv")?)?;
    }
    write_bandwidth_reports(&o.reports, create(&dir, "bandwidth.csv")?)?;
    write_maxima(&o.maxima, create(&dir, "maxima.csv")?)?;
    let mut nodes = create(&dir, "true_nodes.csv")?;
    writeln!(nodes, "idx,re,im")?;
    for (i, z) in cfg.model.nodes.iter().enumerate() {
        writeln!(nodes, "{i},{},{}", z.re, z.im)?;
    }
    nodes.flush()?;
    if o.solver_logs.iter().flatten().any(|l| !l.is_empty()) {
        let logs = dir.join("solver_logs");
        fs::create_dir_all(&logs)?;
        for (j, per_rep) in o.solver_logs.iter().enumerate() {
            for (r, log) in per_rep.iter().enumerate() {
                write_log(log, create(&logs, &format!("cluster{j}_replicate{r}.csv"))?)?;
            }
        }
    }

    let k = o.clusters.as_ref().map_or(0, |c| c.k);
    let mut summary = format!(
        "region {}: {} pooled eigenvalues, {} pilot maxima, {} clusters\n",
        o.index,
        o.pooled.len(),
        o.pilot_maxima.len(),
        k
    );
    for r in &o.reports {
        summary.push_str(&format!(
            "  cluster {}: t_hat {:.4e}, t_opt {:.4e}{}\n",
            r.cluster,
            r.t_hat,
            r.t_opt,
            if r.fallback { " (fallback to t_hat)" } else { "" }
        ));
    }
    for m in &o.maxima {
        summary.push_str(&format!(
            "  maximum at ({:.4}, {:.4}), value {:.4e}\n",
            m.x, m.y, m.value
        ));
    }
    if k == 0 {
        summary.push_str("  no eigenvalues in region, no solver runs\n");
    }
    Ok(summary)
}

fn oracle_grids(cfg: &RunConfig, trials: usize, dir: &Path) -> anyhow::Result<()> {
    if cfg.model.n != 2 || cfg.model.p_star() != 1 {
        bail!("the Monte Carlo oracle needs a two-sample single-component model (n = 2, one node)");
    }
    let point = SnrPoint::new(cfg.model.coeffs[0], cfg.model.nodes[0], cfg.model.sigma)?;
    fs::create_dir_all(dir)?;
    for (i, region) in cfg.regions.iter().enumerate() {
        let grid = ChebGrid::new(*region, cfg.mx, cfg.my)?;
        let analytic = ScalarField::from_fn(&grid, |x, y| h2_closed_form(&point, num_complex::Complex64::new(x, y)));
        write_grid(dir, &format!("region{i}_analytic.grid"), &analytic)?;
        let mc = mc_condensed_density(&cfg.model, trials, &grid, &RngConfig::new(cfg.seed, format!("mc/{i}")))?;
        write_grid(dir, &format!("region{i}_monte_carlo.grid"), &mc)?;
        println!("region {i}: analytic and Monte Carlo grids ({trials} trials) written");
    }
    Ok(())
}

fn cmd_estimate(cfg: &RunConfig, region: Option<usize>, mc_oracle: bool) -> anyhow::Result<()> {
    fs::create_dir_all(&cfg.output)?;
    let reps = replicates_for(cfg)?;
    let samples = eigensolve_replicates(&reps).context("stage eigensolve")?;
    write_eigen_dump(&samples, create(&cfg.output, "eigenvalues.csv")?)?;
    let regions: Vec<usize> = match region {
        Some(i) if i >= cfg.regions.len() => bail!("region {i} does not exist ({} configured)", cfg.regions.len()),
        Some(i) => vec![i],
        None => (0..cfg.regions.len()).collect(),
    };
    let mut summary = format!("seed {}\n", cfg.seed);
    for i in regions {
        let o = estimate_region(cfg, &reps, &samples, i)?;
        summary.push_str(&write_region(cfg, &o)?);
    }
    if mc_oracle {
        let trials = if cfg.mc_trials > 0 { cfg.mc_trials } else { 100_000 };
        oracle_grids(cfg, trials, &cfg.output)?;
    }
    fs::write(cfg.output.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_validate(cfg: &RunConfig, explicit_grid: bool, criteria: &[String]) -> anyhow::Result<bool> {
    let defaults = ValidationOptions::default();
    let opts = ValidationOptions {
        seed: cfg.seed,
        noise: cfg.noise,
        mc_trials: if cfg.mc_trials > 0 {
            cfg.mc_trials
        } else {
            defaults.mc_trials
        },
        reproduction_grid: if explicit_grid {
            cfg.mx
        } else {
            defaults.reproduction_grid
        },
        clip_percentile: cfg.coeff_clip_percentile,
        time_budget: if cfg.time_budget > 0.0 {
            cfg.time_budget
        } else {
            defaults.time_budget
        },
        ..defaults
    };
    let results = run_selected(&opts, criteria);
    fs::create_dir_all(&cfg.output)?;
    let mut w = create(&cfg.output, "validation.csv")?;
    writeln!(w, "criterion,status,gated,seconds,detail")?;
    for r in &results {
        println!("{r}");
        let status = if r.passed { "pass" } else { "fail" };
        writeln!(
            w,
            "{},{},{},{:.3},\"{}\"",
            r.id,
            status,
            r.gated,
            r.seconds,
            r.detail.replace('"', "'")
        )?;
    }
    w.flush()?;
    let ok = overall(&results);
    println!("overall {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg).map(|_| true),
        Command::Estimate { mc_oracle } => cmd_estimate(&cfg, cli.common.region, mc_oracle).map(|_| true),
        Command::Validate { criteria } => cmd_validate(&cfg, cli.common.grid.is_some(), &criteria),
        Command::McOracle { trials } => oracle_grids(&cfg, trials, &cfg.output).map(|_| true),
    }
}

/// The error chain, skipping causes already quoted by the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    let mut last = text.clone();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            text.push_str(": ");
            text.push_str(&msg);
        }
        last = msg;
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(path) = &cli.common.config {
        if fs::read_to_string(path)
            .is_ok_and(|t| t.lines().all(|l| l.split('#').next().unwrap_or("").trim().is_empty()))
        {
            eprintln!("usage error: configuration file {} has no entries", path.display());
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
