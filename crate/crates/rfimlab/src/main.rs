//! Command-line driver: run CLT campaigns from a config file, solve single
//! realizations (free energy or ground state), produce localized
//! normal-approximation bounds, and score sample files against the standard
//! normal. Exits nonzero if any validation guard or invariant check fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rfim::error::Error;
use rfim::explab::{self, ExperimentConfig, ExportFormat};
use rfim::field::{sample_field, FieldModel};
use rfim::gibbs::{self, BoundaryCondition, Temperature};
use rfim::groundstate::ground_state_mincut;
use rfim::lattice::{LatticeRegion, Site};
use rfim::metrics::distance_report;
use rfim::rng::{stream, Domain};
use rfim::Result;

#[derive(Parser)]
#[command(name = "rfimlab", about = "Random field Ising model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full campaign described by a JSON config file.
    Clt {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve one field realization at finite temperature.
    FreeEnergy {
        #[command(flatten)]
        realization: RealizationArgs,
        /// Inverse temperature.
        #[arg(long)]
        beta: f64,
    },
    /// Solve one field realization at zero temperature.
    GroundState {
        #[command(flatten)]
        realization: RealizationArgs,
    },
    /// Estimate a normal-approximation bound for the energy at radius k.
    SteinBound {
        /// Box side (d = 2).
        #[arg(long)]
        side: i64,
        /// Neighborhood radius.
        #[arg(long)]
        k: u32,
        /// "finite" (requires --beta) or "ground".
        #[arg(long)]
        mode: String,
        #[arg(long)]
        beta: Option<f64>,
        /// Field model, e.g. "gaussian:0,1" or "uniform:-1,1".
        #[arg(long, default_value = "gaussian:0,1")]
        model: String,
        /// Replications for moment profiles and S estimates.
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// Replications for the energy-variance estimate.
        #[arg(long, default_value_t = 400)]
        energy_reps: usize,
        #[arg(long, default_value_t = 16)]
        quad_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a CSV of energy samples against the standard normal.
    Metrics {
        /// CSV produced by a campaign export.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct RealizationArgs {
    /// Box side; the region is a d-dimensional box.
    #[arg(long, conflicts_with = "region_file")]
    side: Option<i64>,
    /// Dimension of the box.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// JSON file holding an explicit site list, e.g. [[0,0],[0,1]].
    #[arg(long)]
    region_file: Option<PathBuf>,
    /// Boundary condition: "plus" or "minus".
    #[arg(long, default_value = "plus")]
    bc: String,
    /// Field model, e.g. "gaussian:0,1" or "uniform:-1,1".
    #[arg(long, default_value = "gaussian:0,1")]
    model: String,
    /// Master seed for the field draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_model(text: &str) -> Result<FieldModel> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("field model needs kind:params, got {text}")))?;
    let nums: Vec<f64> = rest
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad field model parameter: {p}")))
        })
        .collect::<Result<_>>()?;
    if nums.len() != 2 {
        return Err(Error::Config(format!(
            "field model {kind} takes 2 parameters, got {}",
            nums.len()
        )));
    }
    let model = match kind {
        "gaussian" => FieldModel::gaussian(nums[0], nums[1]),
        "uniform" => FieldModel::uniform(nums[0], nums[1]),
        other => return Err(Error::Config(format!("unknown field model: {other}"))),
    };
    model.validate()?;
    Ok(model)
}

fn parse_bc(text: &str) -> Result<BoundaryCondition> {
    match text {
        "plus" => Ok(BoundaryCondition::Plus),
        "minus" => Ok(BoundaryCondition::Minus),
        other => Err(Error::Config(format!(
            "boundary condition must be plus or minus, got {other}"
        ))),
    }
}

fn worker_override() -> Result<Option<usize>> {
    match std::env::var("RFIMLAB_WORKERS") {
        Ok(text) => text
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("RFIMLAB_WORKERS must be an integer, got {text}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("RFIMLAB_WORKERS: {e}"))),
    }
}

impl RealizationArgs {
    fn region(&self) -> Result<LatticeRegion> {
        match (&self.region_file, self.side) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                let coords: Vec<Vec<i64>> =
                    serde_json::from_str(&text).map_err(|e| Error::Json {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                LatticeRegion::from_sites(coords.into_iter().map(Site::new).collect())
            }
            (None, Some(side)) => LatticeRegion::cube(self.dim, side),
            _ => Err(Error::Config(
                "give exactly one of --side or --region-file".to_string(),
            )),
        }
    }

    fn field(&self, region: &LatticeRegion) -> Result<rfim::FieldRealization> {
        let model = parse_model(&self.model)?;
        Ok(sample_field(
            &model,
            region,
            &mut stream(self.seed, Domain::Field, 0),
        ))
    }
}

/// Write a line to stdout; a closed pipe (e.g. piping into `head`) is not an
/// error worth failing the run for.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Error::io("<stdout>".to_string(), e)),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: "<stdout>".to_string(),
        source: e,
    })?;
    emit(&text)
}

fn run_clt(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::io(config_path.display().to_string(), e))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: config_path.display().to_string(),
        source: e,
    })?;
    if let Some(w) = worker_override()? {
        config.workers = Some(w);
    }
    let record = explab::run_clt_campaign(&config)?;
    if let Some(path) = &config.csv_path {
        explab::export(&record, ExportFormat::Csv, Path::new(path))?;
        eprintln!("samples -> {path}");
    }
    if let Some(path) = &config.json_path {
        explab::export(&record, ExportFormat::Json, Path::new(path))?;
        eprintln!("record  -> {path}");
    }
    for agg in &record.aggregates {
        emit(&format!(
            "side={} sites={} var/site={:.6}±{:.6} d_W={:.6} d_K={:.6} kkw={}",
            agg.side,
            agg.n_sites,
            agg.variance_per_site.value,
            agg.variance_per_site.stderr,
            agg.distances.d_wasserstein,
            agg.distances.d_kolmogorov,
            if agg.distances.kkw_satisfied { "ok" } else { "VIOLATED" },
        ))?;
        for sk in &agg.stein {
            let bound = sk
                .report
                .bound_wasserstein
                .or(sk.report.bound_tv)
                .unwrap_or(f64::NAN);
            match &sk.a_k {
                Some(a) => emit(&format!(
                    "  k={} bound={:.6e} a_k={:.6}±{:.6}",
                    sk.k, bound, a.value, a.stderr
                ))?,
                None => emit(&format!("  k={} bound={:.6e} a_k=n/a (no interior)", sk.k, bound))?,
            }
        }
        for (i, gap) in agg.a_k_gaps.iter().enumerate() {
            emit(&format!(
                "  |a(k={}) - a(k={})| = {:.6e}",
                agg.stein[i].k,
                agg.stein[i + 1].k,
                gap
            ))?;
        }
    }
    let violated: Vec<i64> = record
        .aggregates
        .iter()
        .filter(|a| !a.distances.kkw_satisfied)
        .map(|a| a.side)
        .collect();
    if !violated.is_empty() {
        return Err(Error::domain(format!(
            "distance invariant violated (d_K > 2*sqrt(d_W)) at sides {violated:?}"
        )));
    }
    Ok(())
}

fn run_free_energy(realization: &RealizationArgs, beta: f64) -> Result<()> {
    let region = realization.region()?;
    let bc = parse_bc(&realization.bc)?;
    let field = realization.field(&region)?;
    let solution = gibbs::solve(&region, &bc, &field, beta)?;
    #[derive(Serialize)]
    struct Out {
        n_sites: usize,
        beta: f64,
        free_energy: f64,
        log_partition: f64,
        magnetization: Vec<f64>,
        phi: Vec<f64>,
    }
    print_json(&Out {
        n_sites: region.len(),
        beta,
        free_energy: solution.free_energy,
        log_partition: solution.log_partition,
        magnetization: solution.magnetization,
        phi: field.phi.clone(),
    })
}

fn run_ground_state(realization: &RealizationArgs) -> Result<()> {
    let region = realization.region()?;
    let bc = parse_bc(&realization.bc)?;
    let field = realization.field(&region)?;
    let ground = ground_state_mincut(&region, &bc, &field)?;
    #[derive(Serialize)]
    struct Out {
        n_sites: usize,
        energy: f64,
        sigma_hat: Vec<i8>,
        gradient: Option<Vec<f64>>,
        phi: Vec<f64>,
    }
    print_json(&Out {
        n_sites: region.len(),
        energy: ground.energy,
        sigma_hat: ground.sigma_hat,
        gradient: ground.gradient,
        phi: field.phi.clone(),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_stein_bound(
    side: i64,
    k: u32,
    mode: &str,
    beta: Option<f64>,
    model: &str,
    reps: usize,
    energy_reps: usize,
    quad_points: usize,
    seed: u64,
) -> Result<()> {
    let temperature = match (mode, beta) {
        ("finite", Some(b)) => Temperature::Finite(b),
        ("finite", None) => {
            return Err(Error::Config("--mode finite requires --beta".to_string()))
        }
        ("ground", None) => Temperature::Infinite,
        ("ground", Some(_)) => {
            return Err(Error::Config("--mode ground takes no --beta".to_string()))
        }
        (other, _) => {
            return Err(Error::Config(format!(
                "mode must be finite or ground, got {other}"
            )))
        }
    };
    let config = ExperimentConfig {
        d: 2,
        sides: vec![side],
        model: parse_model(model)?,
        temperature,
        bc: BoundaryCondition::Plus,
        reps: energy_reps,
        stein_reps: reps,
        k_schedule: vec![k],
        quad_points,
        master_seed: seed,
        workers: worker_override()?,
        csv_path: None,
        json_path: None,
    };
    let record = explab::run_clt_campaign(&config)?;
    let agg = &record.aggregates[0];
    #[derive(Serialize)]
    struct Out<'a> {
        side: i64,
        n_sites: usize,
        k: u32,
        variance: &'a rfim::Estimate,
        report: &'a rfim::SteinReport,
    }
    print_json(&Out {
        side,
        n_sites: agg.n_sites,
        k,
        variance: &agg.variance,
        report: &agg.stein[0].report,
    })
}

fn run_metrics(input: &Path) -> Result<()> {
    let samples = explab::import_csv(input)?;
    if samples.is_empty() {
        return Err(Error::domain("sample file holds no rows"));
    }
    #[derive(Serialize)]
    struct Out {
        side: i64,
        n_sites: usize,
        report: rfim::DistanceReport,
    }
    let mut out = Vec::new();
    for group in &samples {
        out.push(Out {
            side: group.side,
            n_sites: group.n_sites,
            report: distance_report(&group.energies)?,
        });
    }
    print_json(&out)?;
    let violated: Vec<i64> = out
        .iter()
        .filter(|o| !o.report.kkw_satisfied)
        .map(|o| o.side)
        .collect();
    if !violated.is_empty() {
        return Err(Error::domain(format!(
            "distance invariant violated (d_K > 2*sqrt(d_W)) at sides {violated:?}"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Clt { config } => run_clt(&config),
        Command::FreeEnergy { realization, beta } => run_free_energy(&realization, beta),
        Command::GroundState { realization } => run_ground_state(&realization),
        Command::SteinBound {
            side,
            k,
            mode,
            beta,
            model,
            reps,
            energy_reps,
            quad_points,
            seed,
        } => run_stein_bound(
            side,
            k,
            &mode,
            beta,
            &model,
            reps,
            energy_reps,
            quad_points,
            seed,
        ),
        Command::Metrics { input } => run_metrics(&input),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
