//! Diagnostics over recorded snapshot grids. The same suite functions back
//! the live runner and the offline `diagnose` subcommand, so `diagnostics.csv`
//! is recomputable from `snapshots.csv` + `manifest.json` alone.

use crate::runner::RunManifest;
use anyhow::{bail, Context, Result};
use kslab::bessel::{besq_cdf, BesqSpec};
use kslab::diagnostics::{
    bessel_dimension, first_moment_bound, fund_bound, min_separations, path_moment, slope_fit,
    DiagnosticsReport,
};
use kslab::integrator::{project_pair, ParticleSystemState, TrajectoryRecord};
use kslab::report::{write_diagnostics_csv, SnapshotRows};
use kslab::stats::{chi_square_uniformity, correlation, ks_statistic, median};
use kslab::{InitialLaw, SimParams, Vec2};
use std::fs;
use std::path::Path;

/// The recorded grid of one replica: a frame of (x, y, mass) per particle
/// at each snapshot time.
pub struct ReplicaSnapshots {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<(f64, f64, Option<f64>)>>,
}

impl ReplicaSnapshots {
    pub fn from_states<S: SnapshotRows>(record: &TrajectoryRecord<S>) -> Self {
        let mut rows = Vec::new();
        let frames = record
            .states
            .iter()
            .map(|state| {
                rows.clear();
                state.rows(&mut rows);
                rows.iter().map(|r| (r.x, r.y, r.mass)).collect()
            })
            .collect();
        ReplicaSnapshots {
            times: record.times.clone(),
            frames,
        }
    }

    pub fn positions(&self, t_idx: usize) -> Vec<Vec2> {
        self.frames[t_idx]
            .iter()
            .map(|&(x, y, _)| Vec2::new(x, y))
            .collect()
    }

    fn as_system_record(&self, params: &SimParams) -> TrajectoryRecord<ParticleSystemState> {
        TrajectoryRecord {
            params: params.clone(),
            times: self.times.clone(),
            states: self
                .times
                .iter()
                .enumerate()
                .map(|(i, &time)| ParticleSystemState {
                    time,
                    positions: self.positions(i),
                })
                .collect(),
            noise_checksum: 0,
        }
    }
}

/// Suites assume a particular frame width (particle count per snapshot);
/// running a pair suite on a particle run, or vice versa, is a usage error
/// worth a clear message instead of an index panic.
fn ensure_frame_width(replicas: &[ReplicaSnapshots], expected: usize, what: &str) -> Result<()> {
    let got = replicas
        .first()
        .and_then(|r| r.frames.first())
        .map(|f| f.len())
        .unwrap_or(0);
    if got != expected {
        bail!("{what} needs {expected} particles per snapshot, the run has {got}");
    }
    Ok(())
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// ⟨f₀, √(1+|x|²)⟩ for the run's initial law.
pub fn initial_first_moment(law: &InitialLaw, n: usize) -> f64 {
    match law {
        InitialLaw::StandardGaussian => {
            // |X|² is exponential with mean 2; Simpson quadrature.
            let (a, b, m) = (0.0f64, 300.0f64, 60_000usize);
            let h = (b - a) / m as f64;
            let f = |r: f64| (1.0 + r).sqrt() * 0.5 * (-r / 2.0).exp();
            let mut sum = f(a) + f(b);
            for i in 1..m {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * f(a + i as f64 * h);
            }
            sum * h / 3.0
        }
        InitialLaw::UniformDisk { radius } => {
            let r2 = radius * radius;
            2.0 / (3.0 * r2) * ((1.0 + r2).powf(1.5) - 1.0)
        }
        InitialLaw::PointCloud { points } => {
            points
                .iter()
                .map(|&(x, y)| (1.0 + x * x + y * y).sqrt())
                .sum::<f64>()
                / points.len() as f64
        }
        InitialLaw::ProductOf { laws } => {
            let first = n.div_ceil(2);
            let m1 = initial_first_moment(&laws.0, first);
            let m2 = initial_first_moment(&laws.1, n - first);
            (first as f64 * m1 + (n - first) as f64 * m2) / n as f64
        }
    }
}

/// Minimum separations on the recorded grid: per-replica path minima of the
/// pair distance, and the fraction of replicas whose triple perimeter
/// reaches the run threshold.
pub fn separations_suite(
    params: &SimParams,
    replicas: &[ReplicaSnapshots],
) -> Result<DiagnosticsReport> {
    let mut report = DiagnosticsReport::new(params.clone());
    ensure_frame_width(replicas, params.n_particles, "the separations suite")?;
    let theta = params.triple_threshold();
    let mut pair_minima = Vec::with_capacity(replicas.len());
    let mut triple_hits = 0usize;
    let mut mean_pair_series = vec![0.0f64; replicas[0].times.len()];
    let n_r = replicas.len() as f64;
    for rep in replicas {
        let mut min_pair = f64::INFINITY;
        let mut hit = false;
        for (i, _) in rep.times.iter().enumerate() {
            let positions = rep.positions(i);
            let m = min_separations(&positions).map_err(|e| anyhow::anyhow!("{e}"))?;
            min_pair = min_pair.min(m.min_pair);
            mean_pair_series[i] += m.min_pair / n_r;
            if let Some(triple) = m.min_triple_sum {
                hit |= triple <= theta;
            }
        }
        pair_minima.push(min_pair);
        triple_hits += hit as usize;
    }
    report.push_scalar(
        "min_pair_recorded_median",
        median(&pair_minima),
        0.0,
        0.0,
        pair_minima.len(),
        None,
    );
    report.push_scalar(
        "triple_passage_fraction",
        triple_hits as f64 / n_r,
        0.0,
        0.0,
        replicas.len(),
        Some(theta),
    );
    report.push_series(
        "mean_min_pair",
        replicas[0]
            .times
            .iter()
            .copied()
            .zip(mean_pair_series)
            .collect(),
    );
    Ok(report)
}

/// Growth rate of the full-set variance against the dimension target
/// (N−1)(2 − χ/(4π)): mean of the per-replica second-half regressions with
/// its 95% half-width.
pub fn variance_slope_suite(
    params: &SimParams,
    replicas: &[ReplicaSnapshots],
    report: &mut DiagnosticsReport,
) -> Result<()> {
    ensure_frame_width(replicas, params.n_particles, "the variance suite")?;
    let full: Vec<usize> = (0..params.n_particles).collect();
    let times = &replicas[0].times;
    let half = times.len() / 2;
    let fit_window = times.len() - half;
    let mut slopes = Vec::with_capacity(replicas.len());
    let mut mean_series = vec![0.0f64; times.len()];
    for rep in replicas {
        let mut series = Vec::with_capacity(fit_window);
        for (i, &t) in rep.times.iter().enumerate() {
            let r = kslab::diagnostics::subset_variance(&rep.positions(i), &full)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            mean_series[i] += r / replicas.len() as f64;
            if i >= half {
                series.push((t, r));
            }
        }
        if fit_window >= 3 {
            slopes.push(slope_fit(&series).map_err(|e| anyhow::anyhow!("{e}"))?.0);
        }
    }
    // The regression needs at least three grid points in the second half;
    // shorter records still get the variance series.
    if !slopes.is_empty() {
        let (mean, se) = mean_se(&slopes);
        let target = bessel_dimension(params.n_particles, params.chi, params.n_particles);
        report.push_scalar(
            "variance_slope",
            mean,
            1.96 * se,
            0.95,
            slopes.len(),
            Some(target),
        );
    }
    report.push_series(
        "mean_subset_variance",
        times.iter().copied().zip(mean_series).collect(),
    );
    Ok(())
}

/// E[√(1+|X¹_t|²)] at the quarter, half and full horizon against m + 2t.
pub fn first_moment_suite(
    params: &SimParams,
    replicas: &[ReplicaSnapshots],
    report: &mut DiagnosticsReport,
) -> Result<()> {
    ensure_frame_width(replicas, params.n_particles, "the first-moment suite")?;
    let m = initial_first_moment(&params.initial_law, params.n_particles);
    let times = &replicas[0].times;
    for factor in [0.25, 0.5, 1.0] {
        let t_target = params.horizon * factor;
        let idx = times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t_target).abs().total_cmp(&(b.1 - t_target).abs()))
            .map(|(i, _)| i)
            .context("empty grid")?;
        let t = times[idx];
        let values: Vec<f64> = replicas
            .iter()
            .map(|rep| {
                let positions = rep.positions(idx);
                positions
                    .iter()
                    .map(|p| (1.0 + p.norm_sq()).sqrt())
                    .sum::<f64>()
                    / positions.len() as f64
            })
            .collect();
        let (mean, se) = mean_se(&values);
        report.push_scalar(
            &format!("first_moment_t{factor}"),
            mean,
            1.96 * se,
            0.95,
            values.len(),
            Some(first_moment_bound(m, t)),
        );
    }
    Ok(())
}

/// Ensemble mean of the pathwise pair moment against the closed-form bound.
pub fn fund_bound_suite(
    params: &SimParams,
    replicas: &[ReplicaSnapshots],
    report: &mut DiagnosticsReport,
) -> Result<()> {
    ensure_frame_width(replicas, params.n_particles, "the pathwise-moment suite")?;
    let alpha = params
        .alpha
        .context("fund_bound diagnostics need the alpha field in the run configuration")?;
    let m = initial_first_moment(&params.initial_law, params.n_particles);
    let bound = fund_bound(m, params.horizon, alpha, params.n_particles, params.chi)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let moments: Vec<f64> = replicas
        .iter()
        .map(|rep| {
            path_moment(&rep.as_system_record(params), alpha, 0, 1)
                .map_err(|e| anyhow::anyhow!("{e}"))
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_se(&moments);
    report.push_scalar(
        "path_moment_mean",
        mean,
        1.96 * se,
        0.95,
        moments.len(),
        Some(bound),
    );
    Ok(())
}

fn pair_start_radial(params: &SimParams) -> Result<f64> {
    match &params.initial_law {
        InitialLaw::PointCloud { points } if points.len() == 2 => {
            let d = Vec2::new(points[0].0 - points[1].0, points[0].1 - points[1].1);
            Ok(d.norm_sq() / 4.0)
        }
        _ => bail!("pair diagnostics need a two-point point_cloud initial law"),
    }
}

/// Distribution of the pair radial coordinate at the horizon against the
/// exact squared Bessel law, plus the frozen fraction.
pub fn pair_bessel_suite(
    params: &SimParams,
    replicas: &[ReplicaSnapshots],
    report: &mut DiagnosticsReport,
) -> Result<()> {
    ensure_frame_width(replicas, 1, "the pair suite")?;
    let dim = 2.0 - params.chi / (4.0 * std::f64::consts::PI);
    let r0 = pair_start_radial(params)?;
    let t = *replicas[0].times.last().context("empty grid")?;
    let mut frozen = 0usize;
    let radial: Vec<f64> = replicas
        .iter()
        .map(|rep| {
            let &(x, y, _) = rep.frames.last().unwrap().first().unwrap();
            let z = Vec2::new(x, y);
            if z == Vec2::ZERO {
                frozen += 1;
            }
            z.norm().powf(2.0 / 3.0) / 4.0
        })
        .collect();
    report.push_scalar(
        "frozen_fraction",
        frozen as f64 / replicas.len() as f64,
        0.0,
        0.0,
        replicas.len(),
        None,
    );
    if dim > 0.0 {
        let spec = BesqSpec::new(dim, r0);
        let ks = ks_statistic(&radial, |y| besq_cdf(&spec, t, y).unwrap())
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        report.push_scalar(
            "radial_ks_p",
            ks.p_value,
            0.0,
            0.0,
            ks.n_samples,
            Some(0.01),
        );
        let (mean, se) = mean_se(&radial);
        report.push_scalar(
            "radial_mean",
            mean,
            1.96 * se,
            0.95,
            radial.len(),
            Some(spec.mean(t)),
        );
    }
    Ok(())
}

/// Uniformity of the projected pair angle and its decorrelation from the
/// radius, at the final recorded time.
pub fn angular_uniformity_suite(
    _params: &SimParams,
    replicas: &[ReplicaSnapshots],
    report: &mut DiagnosticsReport,
) -> Result<()> {
    ensure_frame_width(replicas, 1, "the angular suite")?;
    let bins = 16usize;
    let mut counts = vec![0u64; bins];
    let mut angles = Vec::with_capacity(replicas.len());
    let mut radii = Vec::with_capacity(replicas.len());
    for rep in replicas {
        let &(x, y, _) = rep.frames.last().unwrap().first().unwrap();
        let d = project_pair(Vec2::new(x, y));
        let angle = d.angle();
        counts[((angle / std::f64::consts::TAU * bins as f64) as usize).min(bins - 1)] += 1;
        angles.push(angle);
        radii.push(d.norm());
    }
    let uniformity = chi_square_uniformity(&counts).map_err(|e| anyhow::anyhow!("{e}"))?;
    report.push_scalar(
        "angle_uniformity_p",
        uniformity.p_value,
        0.0,
        0.0,
        replicas.len(),
        Some(0.01),
    );
    report.push_scalar(
        "angle_radius_corr_abs",
        correlation(&angles, &radii).abs(),
        0.0,
        0.0,
        replicas.len(),
        Some(0.05),
    );
    Ok(())
}

/// Mass-lattice conformance and coalescence statistics.
pub fn cluster_suite(
    params: &SimParams,
    replicas: &[ReplicaSnapshots],
    report: &mut DiagnosticsReport,
) -> Result<()> {
    let n = params.n_particles;
    let allowed = kslab::clusters::allowed_mass_set(n, params.chi);
    let mut violations = 0usize;
    let mut coalesced = 0usize;
    let mut final_counts = Vec::with_capacity(replicas.len());
    let times = &replicas[0].times;
    let mut mean_count = vec![0.0f64; times.len()];
    for rep in replicas {
        for (i, frame) in rep.frames.iter().enumerate() {
            mean_count[i] += frame.len() as f64 / replicas.len() as f64;
            let mut total_units = 0usize;
            for &(_, _, mass) in frame {
                let mass = mass.context("cluster diagnostics need the mass column")?;
                let units = (mass * n as f64).round() as usize;
                if (mass - units as f64 / n as f64).abs() > 1e-9 || !allowed.contains(&units) {
                    violations += 1;
                }
                total_units += units;
            }
            if total_units != n {
                violations += 1;
            }
        }
        let last = rep.frames.last().unwrap();
        final_counts.push(last.len() as f64);
        coalesced += (last.len() == 1) as usize;
    }
    report.push_scalar(
        "mass_lattice_violations",
        violations as f64,
        0.0,
        0.0,
        replicas.len(),
        Some(0.0),
    );
    let (mean, se) = mean_se(&final_counts);
    report.push_scalar(
        "final_count_mean",
        mean,
        1.96 * se,
        0.95,
        final_counts.len(),
        None,
    );
    report.push_scalar(
        "coalescence_fraction",
        coalesced as f64 / replicas.len() as f64,
        0.0,
        0.0,
        replicas.len(),
        None,
    );
    report.push_series(
        "mean_particle_count",
        times.iter().copied().zip(mean_count).collect(),
    );
    Ok(())
}

fn load_snapshots(path: &Path) -> Result<Vec<ReplicaSnapshots>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("snapshots.csv is empty")?;
    let has_mass = header.ends_with(",mass");

    let mut replicas: Vec<ReplicaSnapshots> = Vec::new();
    let mut current: Option<(u64, ReplicaSnapshots)> = None;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if has_mass { 6 } else { 5 };
        if fields.len() != expected {
            bail!(
                "snapshots.csv line {}: expected {expected} fields",
                lineno + 2
            );
        }
        let replica: u64 = fields[0].parse()?;
        let time: f64 = fields[1].parse()?;
        let x: f64 = fields[3].parse()?;
        let y: f64 = fields[4].parse()?;
        let mass = if has_mass {
            Some(fields[5].parse()?)
        } else {
            None
        };

        let flush = matches!(&current, Some((r, _)) if *r != replica);
        if flush {
            replicas.push(current.take().unwrap().1);
        }
        let entry = current.get_or_insert_with(|| {
            (
                replica,
                ReplicaSnapshots {
                    times: Vec::new(),
                    frames: Vec::new(),
                },
            )
        });
        if entry.1.times.last() != Some(&time) {
            entry.1.times.push(time);
            entry.1.frames.push(Vec::new());
        }
        entry.1.frames.last_mut().unwrap().push((x, y, mass));
    }
    if let Some((_, rep)) = current {
        replicas.push(rep);
    }
    if replicas.is_empty() {
        bail!("snapshots.csv holds no rows");
    }
    Ok(replicas)
}

pub const SUITE_NAMES: [&str; 7] = [
    "separations",
    "variance_slope",
    "first_moment",
    "fund_bound",
    "pair_bessel",
    "angular_uniformity",
    "cluster_coalescence",
];

/// Recompute a named suite from a stored run and rewrite diagnostics.csv.
pub fn run_suite(run_dir: &Path, suite: &str) -> Result<()> {
    let manifest: RunManifest = serde_json::from_str(
        &fs::read_to_string(run_dir.join("manifest.json"))
            .with_context(|| format!("cannot read manifest in {}", run_dir.display()))?,
    )?;
    let replicas = load_snapshots(&run_dir.join("snapshots.csv"))?;
    let params = &manifest.params;

    let mut report = DiagnosticsReport::new(params.clone());
    match suite {
        "separations" => report = separations_suite(params, &replicas)?,
        "variance_slope" => variance_slope_suite(params, &replicas, &mut report)?,
        "first_moment" => first_moment_suite(params, &replicas, &mut report)?,
        "fund_bound" => fund_bound_suite(params, &replicas, &mut report)?,
        "pair_bessel" => pair_bessel_suite(params, &replicas, &mut report)?,
        "angular_uniformity" => angular_uniformity_suite(params, &replicas, &mut report)?,
        "cluster_coalescence" => cluster_suite(params, &replicas, &mut report)?,
        other => bail!(
            "unknown suite '{other}'; available: {}",
            SUITE_NAMES.join(", ")
        ),
    }

    let mut buf = Vec::new();
    write_diagnostics_csv(&mut buf, &report)?;
    fs::write(run_dir.join("diagnostics.csv"), &buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    Ok(())
}
