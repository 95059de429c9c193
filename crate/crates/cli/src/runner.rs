//! Replica ensemble execution and persistence.
//!
//! One run directory holds `manifest.json`, `snapshots.csv`,
//! `diagnostics.csv` and one `series_<name>.csv` per recorded series. All
//! file writes happen from this single writer after the (possibly
//! concurrent) replica executions are aggregated in replica order.

use crate::diagnose::{self, ReplicaSnapshots};
use crate::SystemKind;
use anyhow::{bail, Context, Result};
use kslab::bessel::{angular_path_sample, besq_sample, BesqSpec};
use kslab::clusters::simulate_clusters;
use kslab::diagnostics::DiagnosticsReport;
use kslab::integrator::{simulate_pair_cubed, simulate_system_with, PairState, TrajectoryRecord};
use kslab::noise::{NoiseChecksum, GENERATOR_ID};
use kslab::report::{
    snapshot_header, write_diagnostics_csv, write_series_csv, write_snapshot_rows,
};
use kslab::{NoiseStream, SimParams, Vec2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Everything needed to bit-exactly replay and audit a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_name: String,
    pub system: String,
    pub params: SimParams,
    pub record_every: usize,
    pub started_at: String,
    pub finished_at: String,
    pub tool_version: String,
    pub generator: String,
    pub noise_checksums: Vec<u64>,
}

/// A config document is either one SimParams object or an array of them.
pub fn parse_configs(text: &str) -> Result<Vec<SimParams>> {
    let configs: Vec<SimParams> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).context("invalid configuration sweep")?
    } else {
        vec![serde_json::from_str(text).context("invalid configuration")?]
    };
    if configs.is_empty() {
        bail!("configuration sweep is empty");
    }
    for (k, params) in configs.iter().enumerate() {
        params
            .validate()
            .map_err(|e| anyhow::anyhow!("entry {k}: {e}"))?;
    }
    Ok(configs)
}

pub fn run_experiment(
    config_path: &Path,
    out_root: &Path,
    name: &str,
    system: SystemKind,
    jobs: Option<usize>,
    overwrite: bool,
    record_every: Option<usize>,
) -> Result<()> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let configs = parse_configs(&text)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("cannot build worker pool")?;

    if configs.len() == 1 {
        run_arm(
            &pool,
            &configs[0],
            system,
            &out_root.join(name),
            name,
            overwrite,
            record_every,
        )
    } else {
        for (k, params) in configs.iter().enumerate() {
            let arm = format!("arm_{k:02}");
            run_arm(
                &pool,
                params,
                system,
                &out_root.join(name).join(&arm),
                &format!("{name}/{arm}"),
                overwrite,
                record_every,
            )?;
        }
        Ok(())
    }
}

struct ParticlesReplica {
    record: TrajectoryRecord<kslab::integrator::ParticleSystemState>,
    /// Minimum pair distance over every scheme step (finer than the
    /// recorded grid; not recomputable offline).
    min_pair_path: f64,
}

struct ClustersReplica {
    record: TrajectoryRecord<kslab::clusters::ClusterState>,
    boundary_merges: usize,
}

fn run_arm(
    pool: &rayon::ThreadPool,
    params: &SimParams,
    system: SystemKind,
    dir: &Path,
    experiment_name: &str,
    overwrite: bool,
    record_every: Option<usize>,
) -> Result<()> {
    if dir.join("manifest.json").exists() && !overwrite {
        bail!(
            "run directory {} already holds a manifest; pass --overwrite to replace it",
            dir.display()
        );
    }
    fs::create_dir_all(dir)?;
    // A marker from an earlier failed attempt must not outlive a rerun.
    let _ = fs::remove_file(dir.join("FAILED"));
    let started_at = chrono::Utc::now().to_rfc3339();
    let n_steps = params.n_steps();
    let stride = record_every.unwrap_or_else(|| n_steps.div_ceil(1000).max(1));
    if stride == 0 {
        bail!("--record-every must be at least 1");
    }

    let outcomes: Vec<Result<_, kslab::Error>> = pool.install(|| {
        (0..params.replicas as u64)
            .into_par_iter()
            .map(|replica| run_replica(params, system, replica, stride))
            .collect()
    });

    let mut completed = Vec::new();
    let mut failure = None;
    for (replica, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(data) => completed.push(data),
            Err(err) => {
                failure = Some(format!("replica {replica}: {err}"));
                break;
            }
        }
    }

    write_snapshots(dir, system, &completed)?;

    if let Some(message) = failure {
        fs::write(dir.join("FAILED"), format!("{message}\n"))?;
        bail!(
            "{experiment_name}: {message} (partial outputs kept in {})",
            dir.display()
        );
    }

    let checksums: Vec<u64> = completed.iter().map(|r| r.checksum).collect();
    let report = build_report(params, system, &completed)?;
    let mut file = fs::File::create(dir.join("diagnostics.csv"))?;
    write_diagnostics_csv(&mut file, &report)?;
    for series in &report.series {
        let mut f = fs::File::create(dir.join(format!("series_{}.csv", series.name)))?;
        write_series_csv(&mut f, &series.points)?;
    }

    let manifest = RunManifest {
        experiment_name: experiment_name.to_string(),
        system: system.as_str().to_string(),
        params: params.clone(),
        record_every: stride,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        generator: GENERATOR_ID.to_string(),
        noise_checksums: checksums,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

struct ReplicaOutcome {
    data: ReplicaData,
    checksum: u64,
}

enum ReplicaData {
    Particles(ParticlesReplica),
    Pair(TrajectoryRecord<PairState>),
    Clusters(ClustersReplica),
}

fn run_replica(
    params: &SimParams,
    system: SystemKind,
    replica: u64,
    stride: usize,
) -> Result<ReplicaOutcome, kslab::Error> {
    let mut noise = NoiseStream::new(params.seed, replica);
    match system {
        SystemKind::Particles => {
            let mut min_pair_sq = f64::INFINITY;
            let record = simulate_system_with(params, &mut noise, stride, |_, state| {
                for i in 0..state.positions.len() {
                    for j in (i + 1)..state.positions.len() {
                        min_pair_sq =
                            min_pair_sq.min((state.positions[i] - state.positions[j]).norm_sq());
                    }
                }
            })?;
            let checksum = record.noise_checksum;
            Ok(ReplicaOutcome {
                data: ReplicaData::Particles(ParticlesReplica {
                    record,
                    min_pair_path: min_pair_sq.sqrt(),
                }),
                checksum,
            })
        }
        SystemKind::Pair => {
            let record = simulate_pair_cubed(params, &mut noise, stride)?;
            let checksum = record.noise_checksum;
            Ok(ReplicaOutcome {
                data: ReplicaData::Pair(record),
                checksum,
            })
        }
        SystemKind::PairExact => {
            let record = exact_pair_record(params, &mut noise, stride)?;
            let checksum = record.noise_checksum;
            Ok(ReplicaOutcome {
                data: ReplicaData::Pair(record),
                checksum,
            })
        }
        SystemKind::Clusters => {
            let mut boundary_merges = 0usize;
            let record = simulate_clusters(params, &mut noise, stride, None, |_, _, events| {
                boundary_merges += events.iter().filter(|e| e.at_boundary).count();
            })?;
            let checksum = record.noise_checksum;
            Ok(ReplicaOutcome {
                data: ReplicaData::Clusters(ClustersReplica {
                    record,
                    boundary_merges,
                }),
                checksum,
            })
        }
    }
}

/// Pair process in exact law: radial path by chained squared Bessel
/// transitions on the step grid, angle by the uniform-anchored wrapped
/// construction, assembled as Z = (4R)^(3/2)·e^(iθ). Valid from a zero
/// start, where the Euler scheme cannot leave the origin.
fn exact_pair_record(
    params: &SimParams,
    noise: &mut NoiseStream,
    stride: usize,
) -> Result<TrajectoryRecord<PairState>, kslab::Error> {
    let dim = 2.0 - params.chi / (4.0 * std::f64::consts::PI);
    if dim <= 0.0 {
        return Err(kslab::Error::Domain(format!(
            "exact pair sampling needs dimension 2 - chi/(4 pi) > 0, got {dim}"
        )));
    }
    let initial = kslab::params::sample_initial(&params.initial_law, 2, noise)?;
    let d0 = initial[0] - initial[1];
    let mut r = d0.norm_sq() / 4.0;
    let n_steps = params.n_steps();

    let mut radial = Vec::with_capacity(n_steps);
    for j in 1..=n_steps {
        r = besq_sample(&BesqSpec::new(dim, r), params.dt, noise)?;
        radial.push((j as f64 * params.dt, r));
    }
    let angles = angular_path_sample(&radial, noise)?;

    let mut checksum = NoiseChecksum::new();
    let mut times = vec![0.0];
    let mut states = vec![PairState::from_pair_difference(d0)];
    checksum.absorb(states[0].z);
    for (j, (&(t, r), &(_, theta))) in radial.iter().zip(&angles).enumerate() {
        let z_norm = (4.0 * r).powf(1.5);
        let z = Vec2::new(z_norm * theta.cos(), z_norm * theta.sin());
        checksum.absorb(z);
        if (j + 1) % stride == 0 {
            times.push(t);
            states.push(PairState {
                time: t,
                z,
                frozen: false,
            });
        }
    }
    Ok(TrajectoryRecord {
        params: params.clone(),
        times,
        states,
        noise_checksum: checksum.value(),
    })
}

fn write_snapshots(dir: &Path, system: SystemKind, completed: &[ReplicaOutcome]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(dir.join("snapshots.csv"))?);
    match system {
        SystemKind::Clusters => writeln!(
            file,
            "{}",
            snapshot_header::<kslab::clusters::ClusterState>()
        )?,
        _ => writeln!(
            file,
            "{}",
            snapshot_header::<kslab::integrator::ParticleSystemState>()
        )?,
    }
    for (replica, outcome) in completed.iter().enumerate() {
        match &outcome.data {
            ReplicaData::Particles(p) => write_snapshot_rows(&mut file, replica as u64, &p.record)?,
            ReplicaData::Pair(record) => write_snapshot_rows(&mut file, replica as u64, record)?,
            ReplicaData::Clusters(c) => write_snapshot_rows(&mut file, replica as u64, &c.record)?,
        }
    }
    Ok(())
}

/// Snapshot-grid diagnostics shared with `diagnose`, plus the streaming
/// statistics only the live run can compute.
fn build_report(
    params: &SimParams,
    system: SystemKind,
    completed: &[ReplicaOutcome],
) -> Result<DiagnosticsReport> {
    let replicas: Vec<ReplicaSnapshots> = completed
        .iter()
        .map(|outcome| match &outcome.data {
            ReplicaData::Particles(p) => ReplicaSnapshots::from_states(&p.record),
            ReplicaData::Pair(record) => ReplicaSnapshots::from_states(record),
            ReplicaData::Clusters(c) => ReplicaSnapshots::from_states(&c.record),
        })
        .collect();

    let mut report = match system {
        SystemKind::Particles => {
            let mut report = diagnose::separations_suite(params, &replicas)?;
            diagnose::variance_slope_suite(params, &replicas, &mut report)?;
            diagnose::first_moment_suite(params, &replicas, &mut report)?;
            if params.alpha.is_some() {
                diagnose::fund_bound_suite(params, &replicas, &mut report)?;
            }
            report
        }
        SystemKind::Pair => {
            let mut report = DiagnosticsReport::new(params.clone());
            diagnose::pair_bessel_suite(params, &replicas, &mut report)?;
            report
        }
        SystemKind::PairExact => {
            let mut report = DiagnosticsReport::new(params.clone());
            diagnose::angular_uniformity_suite(params, &replicas, &mut report)?;
            report
        }
        SystemKind::Clusters => {
            let mut report = DiagnosticsReport::new(params.clone());
            diagnose::cluster_suite(params, &replicas, &mut report)?;
            report
        }
    };

    if let SystemKind::Particles = system {
        let mins: Vec<f64> = completed
            .iter()
            .filter_map(|o| match &o.data {
                ReplicaData::Particles(p) => Some(p.min_pair_path),
                _ => None,
            })
            .collect();
        let close_threshold = 10.0 * params.distance_floor();
        let close = mins.iter().filter(|&&m| m <= close_threshold).count();
        report.push_scalar(
            "min_pair_path_median",
            kslab::stats::median(&mins),
            0.0,
            0.0,
            mins.len(),
            None,
        );
        report.push_scalar(
            "min_pair_path_close_fraction",
            close as f64 / mins.len() as f64,
            0.0,
            0.0,
            mins.len(),
            Some(close_threshold),
        );
    }
    if let SystemKind::Clusters = system {
        let boundary: usize = completed
            .iter()
            .map(|o| match &o.data {
                ReplicaData::Clusters(c) => c.boundary_merges,
                _ => 0,
            })
            .sum();
        report.push_scalar(
            "boundary_merge_events",
            boundary as f64,
            0.0,
            0.0,
            completed.len(),
            None,
        );
    }
    Ok(report)
}
