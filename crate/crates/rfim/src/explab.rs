//! Experiment orchestration: validated campaign configurations, the energy
//! sampling and central-limit-verification runs over increasing boxes, and
//! CSV/JSON persistence of samples and aggregates.
//!
//! Everything is deterministic in (config, master seed): each region derives
//! its own seed, each replication its own stream, and reductions are ordered,
//! so results do not depend on the worker count.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sample_field, FieldModel};
use crate::gibbs::{self, BoundaryCondition, Temperature, ENUMERATION_CUTOFF, TRANSFER_CUTOFF};
use crate::groundstate::ground_state_mincut;
use crate::lattice::LatticeRegion;
use crate::metrics::{distance_report, DistanceReport};
use crate::numeric::{mean_estimate, variance_estimate, Estimate};
use crate::rng::{derived_seed, stream, Domain};
use crate::stein::{
    bound_normcomb, bound_normcont, estimate_s_finite, estimate_s_ground, moment_profile_finite,
    moment_profile_ground, neighborhood_system, SteinReport,
};

/// Largest box side for zero-temperature (min-cut) campaigns.
pub const GROUND_SIDE_CAP: i64 = 64;

fn default_stein_reps() -> usize {
    200
}

fn default_quad_points() -> usize {
    16
}

/// A full campaign description: what model to draw fields from, how to
/// solve, the box schedule, and the Monte Carlo budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    /// Box sides, one region per entry, strictly increasing.
    pub sides: Vec<i64>,
    pub model: FieldModel,
    pub temperature: Temperature,
    pub bc: BoundaryCondition,
    /// Replications per region for energy sampling and distances.
    pub reps: usize,
    /// Replications per (region, k) for moment profiles and S estimates.
    #[serde(default = "default_stein_reps")]
    pub stein_reps: usize,
    /// Neighborhood radii to evaluate localized statistics at; empty skips
    /// that stage entirely.
    #[serde(default)]
    pub k_schedule: Vec<u32>,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    pub master_seed: u64,
    /// Worker threads; absent uses the process-global pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub csv_path: Option<String>,
    #[serde(default)]
    pub json_path: Option<String>,
}

fn box_site_count(d: usize, side: i64) -> i64 {
    (0..d).fold(1i64, |acc, _| acc.saturating_mul(side))
}

fn box_boundary_count(d: usize, side: i64) -> i64 {
    2 * d as i64 * (0..d.saturating_sub(1)).fold(1i64, |acc, _| acc.saturating_mul(side))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.temperature.validate()?;
        if matches!(self.bc, BoundaryCondition::Explicit(_)) {
            return Err(Error::Config(
                "campaigns run under plus or minus boundaries; explicit boundary \
                 values cannot follow a region schedule"
                    .to_string(),
            ));
        }
        if self.d == 0 {
            return Err(Error::Config("dimension must be positive".to_string()));
        }
        if self.sides.is_empty() {
            return Err(Error::Config("the region schedule is empty".to_string()));
        }
        if self.sides.iter().any(|&s| s < 1) {
            return Err(Error::Config("box sides must be at least 1".to_string()));
        }
        // Hypothesis guard: the boundary-to-volume ratio must strictly
        // decrease along the schedule, the finite-size stand-in for
        // "boundary is negligible in the limit".
        for w in self.sides.windows(2) {
            let ratio = |side: i64| {
                box_boundary_count(self.d, side) as f64 / box_site_count(self.d, side) as f64
            };
            if ratio(w[1]) >= ratio(w[0]) {
                return Err(Error::Config(format!(
                    "hypothesis guard: |boundary|/|sites| must strictly decrease \
                     along the schedule, but sides {} -> {} give {} -> {}",
                    w[0],
                    w[1],
                    ratio(w[0]),
                    ratio(w[1])
                )));
            }
        }
        if self.sides.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "box sides must be strictly increasing".to_string(),
            ));
        }
        if self.reps < 100 {
            return Err(Error::Config(
                "distance estimation needs at least 100 replications".to_string(),
            ));
        }
        if !self.k_schedule.is_empty() {
            if self.stein_reps < 100 {
                return Err(Error::Config(
                    "moment profiles need at least 100 replications".to_string(),
                ));
            }
            if self.quad_points < 8 {
                return Err(Error::Config(
                    "quadrature needs at least 8 points".to_string(),
                ));
            }
            if self.bc != BoundaryCondition::Plus {
                return Err(Error::Config(
                    "localized statistics are built on plus boundaries; run the \
                     k schedule under bc = plus"
                        .to_string(),
                ));
            }
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(Error::Config("worker count must be positive".to_string()));
            }
        }
        for &side in &self.sides {
            match self.temperature {
                Temperature::Infinite => {
                    if box_site_count(self.d, side) > GROUND_SIDE_CAP * GROUND_SIDE_CAP {
                        return Err(Error::Config(format!(
                            "side {side} exceeds the zero-temperature campaign cap \
                             of {GROUND_SIDE_CAP}x{GROUND_SIDE_CAP} sites"
                        )));
                    }
                }
                Temperature::Finite(_) => {
                    let enumerable = box_site_count(self.d, side) <= ENUMERATION_CUTOFF as i64;
                    let transferable = self.d == 2 && side <= TRANSFER_CUTOFF as i64;
                    if !enumerable && !transferable {
                        return Err(Error::Config(format!(
                            "side {side} exceeds the finite-temperature solvers \
                             (transfer-matrix width {TRANSFER_CUTOFF} on d=2 boxes, \
                             enumeration up to {ENUMERATION_CUTOFF} sites)"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Raw energy samples for one region of the schedule, in replication order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySamples {
    pub side: i64,
    pub n_sites: usize,
    pub energies: Vec<f64>,
}

/// Localized-statistics results at one neighborhood radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinKReport {
    pub k: u32,
    /// Per-site value of the interior representative (the sequence whose
    /// Cauchy gaps the campaign tabulates), when the interior is nonempty.
    pub a_k: Option<Estimate>,
    pub report: SteinReport,
}

/// Everything the campaign derives for one region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionAggregate {
    pub side: i64,
    pub n_sites: usize,
    pub boundary_sites: usize,
    pub energy_mean: Estimate,
    pub variance: Estimate,
    pub variance_per_site: Estimate,
    pub distances: DistanceReport,
    pub stein: Vec<SteinKReport>,
    /// |a_k - a_{k'}| for consecutive schedule entries, when every entry
    /// produced a per-site value.
    pub a_k_gaps: Vec<f64>,
}

/// A campaign's full output: the configuration it ran under, raw samples,
/// and per-region aggregates (empty for sample-only runs).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub samples: Vec<EnergySamples>,
    pub aggregates: Vec<RegionAggregate>,
}

fn with_pool<T: Send>(
    workers: Option<usize>,
    job: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn solve_energy(
    region: &LatticeRegion,
    bc: &BoundaryCondition,
    temperature: Temperature,
    field: &crate::field::FieldRealization,
) -> Result<f64> {
    match temperature {
        Temperature::Finite(beta) => Ok(gibbs::solve(region, bc, field, beta)?.free_energy),
        Temperature::Infinite => Ok(ground_state_mincut(region, bc, field)?.energy),
    }
}

/// Sample one energy (free energy or ground energy) per replication per
/// region. The returned record carries no aggregates.
pub fn run_energy_samples(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    with_pool(config.workers, || {
        let mut samples = Vec::with_capacity(config.sides.len());
        for (region_index, &side) in config.sides.iter().enumerate() {
            let region = LatticeRegion::cube(config.d, side)?;
            let region_master = derived_seed(config.master_seed, region_index as u64);
            let energies: Vec<f64> = (0..config.reps as u64)
                .into_par_iter()
                .map(|rep| -> Result<f64> {
                    let field = sample_field(
                        &config.model,
                        &region,
                        &mut stream(region_master, Domain::Field, rep),
                    );
                    solve_energy(&region, &config.bc, config.temperature, &field)
                })
                .collect::<Result<_>>()?;
            samples.push(EnergySamples {
                side,
                n_sites: region.len(),
                energies,
            });
        }
        Ok(ExperimentRecord {
            config: config.clone(),
            samples,
            aggregates: Vec::new(),
        })
    })
}

fn aggregate_region(
    config: &ExperimentConfig,
    region_index: usize,
    samples: &EnergySamples,
) -> Result<RegionAggregate> {
    let region = LatticeRegion::cube(config.d, samples.side)?;
    let energy_mean = mean_estimate(&samples.energies);
    let variance = variance_estimate(&samples.energies);
    let n = region.len() as f64;
    let variance_per_site = Estimate::new(variance.value / n, variance.stderr / n);
    let distances = distance_report(&samples.energies)?;
    let mut stein = Vec::with_capacity(config.k_schedule.len());
    for (k_index, &k) in config.k_schedule.iter().enumerate() {
        let ns = neighborhood_system(&region, k);
        let stein_master = derived_seed(
            derived_seed(config.master_seed, region_index as u64),
            1 + k_index as u64,
        );
        let (a_k, report) = match config.temperature {
            Temperature::Finite(beta) => {
                let profile = moment_profile_finite(
                    &region,
                    &ns,
                    &config.model,
                    beta,
                    &config.bc,
                    config.stein_reps,
                    stein_master,
                )?;
                let s = estimate_s_finite(
                    &region,
                    &ns,
                    &config.model,
                    beta,
                    &config.bc,
                    config.stein_reps,
                    stein_master,
                )?;
                let mut report = bound_normcomb(&profile, &ns, variance.value)?;
                report.estimate_s = Some(s.total);
                (s.interior_per_site, report)
            }
            Temperature::Infinite => {
                let profile = moment_profile_ground(
                    &region,
                    &ns,
                    &config.model,
                    config.stein_reps,
                    stein_master,
                )?;
                let s = estimate_s_ground(
                    &region,
                    &ns,
                    &config.model,
                    config.stein_reps,
                    config.quad_points,
                    stein_master,
                )?;
                let mut report = bound_normcont(&profile, &ns, variance.value)?;
                report.estimate_s = Some(s.total);
                (s.interior_per_site, report)
            }
        };
        stein.push(SteinKReport { k, a_k, report });
    }
    let a_values: Vec<f64> = stein
        .iter()
        .filter_map(|s| s.a_k.as_ref().map(|e| e.value))
        .collect();
    let a_k_gaps = if a_values.len() == stein.len() && a_values.len() >= 2 {
        a_values.windows(2).map(|w| (w[0] - w[1]).abs()).collect()
    } else {
        Vec::new()
    };
    Ok(RegionAggregate {
        side: samples.side,
        n_sites: samples.n_sites,
        boundary_sites: region.boundary().len(),
        energy_mean,
        variance,
        variance_per_site,
        distances,
        stein,
        a_k_gaps,
    })
}

/// The full campaign: energy samples, then per-region variances, distances
/// to the standard normal, and localized statistics per scheduled radius.
pub fn run_clt_campaign(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let mut record = run_energy_samples(config)?;
    let aggregates = with_pool(config.workers, || {
        record
            .samples
            .iter()
            .enumerate()
            .map(|(region_index, samples)| aggregate_region(config, region_index, samples))
            .collect::<Result<Vec<_>>>()
    })?;
    record.aggregates = aggregates;
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Write a record to disk: CSV holds the raw samples (one row per
/// replication, energies with 17 significant digits), JSON the whole record
/// including aggregates.
pub fn export(record: &ExperimentRecord, format: ExportFormat, path: &Path) -> Result<()> {
    match format {
        ExportFormat::Csv => {
            let mut out = String::from("region_side,n_sites,seed,energy\n");
            for (region_index, s) in record.samples.iter().enumerate() {
                let region_master =
                    derived_seed(record.config.master_seed, region_index as u64);
                for (rep, &e) in s.energies.iter().enumerate() {
                    let seed = derived_seed(region_master, rep as u64);
                    out.push_str(&format!("{},{},{},{:.16e}\n", s.side, s.n_sites, seed, e));
                }
            }
            fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
        }
        ExportFormat::Json => {
            let file = fs::File::create(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            serde_json::to_writer_pretty(BufWriter::new(file), record).map_err(|e| Error::Json {
                path: path.display().to_string(),
                source: e,
            })
        }
    }
}

/// Read raw samples back from a CSV produced by `export`.
pub fn import_csv(path: &Path) -> Result<Vec<EnergySamples>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .ok_or_else(|| Error::domain("sample file is empty"))?;
    if header.trim() != "region_side,n_sites,seed,energy" {
        return Err(Error::domain(format!(
            "unexpected sample header: {header}"
        )));
    }
    let mut samples: Vec<EnergySamples> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::domain(format!(
                "sample row {} has {} fields, expected 4",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::domain(format!("sample row {}: bad {what}", lineno + 2));
        let side: i64 = fields[0].parse().map_err(|_| bad("region side"))?;
        let n_sites: usize = fields[1].parse().map_err(|_| bad("site count"))?;
        let _seed: u64 = fields[2].parse().map_err(|_| bad("seed"))?;
        let energy: f64 = fields[3].parse().map_err(|_| bad("energy"))?;
        match samples.last_mut() {
            Some(s) if s.side == side && s.n_sites == n_sites => s.energies.push(energy),
            _ => samples.push(EnergySamples {
                side,
                n_sites,
                energies: vec![energy],
            }),
        }
    }
    Ok(samples)
}

/// Read a full record back from a JSON produced by `export`.
pub fn import_json(path: &Path) -> Result<ExperimentRecord> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })
}
