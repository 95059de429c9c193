//! Verification functionals: subset variances, Bessel dimensions,
//! collision-regime classification, moment bounds, separation statistics
//! and slope estimation.

use crate::error::{Error, Result};
use crate::integrator::{ParticleSystemState, TrajectoryRecord};
use crate::params::SimParams;
use crate::vec2::Vec2;
use std::f64::consts::PI;

/// Half the summed squared distances of a particle subset to its
/// barycenter. Behaves like a squared Bessel process of dimension
/// [`bessel_dimension`] along trajectories.
pub fn subset_variance(positions: &[Vec2], subset: &[usize]) -> Result<f64> {
    if subset.len() < 2 {
        return Err(Error::Domain(format!(
            "subset_variance needs |subset| ≥ 2, got {}",
            subset.len()
        )));
    }
    let k = subset.len() as f64;
    let bary = subset.iter().fold(Vec2::ZERO, |a, &i| a + positions[i]) / k;
    Ok(0.5
        * subset
            .iter()
            .map(|&i| (positions[i] - bary).norm_sq())
            .sum::<f64>())
}

/// Dimension governing the variance of a k-particle subset in the
/// N-particle system: (k−1)·(2 − χk/(4πN)).
pub fn bessel_dimension(n: usize, chi: f64, k: usize) -> f64 {
    debug_assert!((2..=n).contains(&k));
    bessel_dimension_continuous(n, chi, k as f64)
}

/// Real-argument extension used for root residual checks.
pub fn bessel_dimension_continuous(n: usize, chi: f64, x: f64) -> f64 {
    (x - 1.0) * (2.0 - chi * x / (4.0 * PI * n as f64))
}

/// The two roots of `bessel_dimension_continuous(n, chi, ·) = 2`,
/// [1 + 8πN/χ ± √((1 + 8πN/χ)² − 64πN/χ)]/2, in increasing order.
pub fn collision_roots(n: usize, chi: f64) -> Result<(f64, f64)> {
    if chi <= 0.0 {
        return Err(Error::Domain(format!("chi must be positive, got {chi}")));
    }
    let u = 8.0 * PI * n as f64 / chi;
    let disc = (1.0 + u) * (1.0 + u) - 8.0 * u;
    if disc < 0.0 {
        return Err(Error::NoRealRoots(format!(
            "dimension never reaches 2 for N = {n}, chi = {chi}"
        )));
    }
    let s = disc.sqrt();
    Ok(((1.0 + u - s) / 2.0, (1.0 + u + s) / 2.0))
}

/// Collision behavior of k-particle subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// dimension ≥ 2: subsets of this size never meet.
    NoCollision,
    /// dimension in (0, 2): instantaneously reflecting contacts.
    Reflecting,
    /// dimension ≤ 0: sticky contacts.
    Sticky,
}

/// Per-subset-size regimes for one (N, χ), with the dimension-2 roots when
/// they are real.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeTable {
    pub n: usize,
    pub chi: f64,
    /// regimes[k − 2] is the regime of k-particle subsystems, k = 2..=N.
    pub regimes: Vec<Regime>,
    pub roots: Option<(f64, f64)>,
}

impl RegimeTable {
    pub fn regime(&self, k: usize) -> Regime {
        self.regimes[k - 2]
    }

    /// Subset sizes with the given regime.
    pub fn sizes_with(&self, regime: Regime) -> Vec<usize> {
        (2..=self.n).filter(|&k| self.regime(k) == regime).collect()
    }
}

/// Classify every subsystem size by the sign tests on the dimension.
pub fn classify_regimes(n: usize, chi: f64) -> Result<RegimeTable> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "classification needs N ≥ 3, got {n}"
        )));
    }
    if chi <= 0.0 {
        return Err(Error::Domain(format!("chi must be positive, got {chi}")));
    }
    let regimes = (2..=n)
        .map(|k| {
            let delta = bessel_dimension(n, chi, k);
            if delta >= 2.0 {
                Regime::NoCollision
            } else if delta <= 0.0 {
                Regime::Sticky
            } else {
                Regime::Reflecting
            }
        })
        .collect();
    Ok(RegimeTable {
        n,
        chi,
        regimes,
        roots: collision_roots(n, chi).ok(),
    })
}

/// Upper bound on the expected pathwise pair moment
/// ∫₀ᵀ |X¹ − X²|^(α−2) ds for the exchangeable system:
/// (2√2·m + 4√2·T)^α / (α·(2α − (N−1)χ/(πN))).
pub fn fund_bound(first_moment: f64, horizon: f64, alpha: f64, n: usize, chi: f64) -> Result<f64> {
    if first_moment < 1.0 {
        return Err(Error::Domain(format!(
            "first moment of √(1+|x|²) is at least 1, got {first_moment}"
        )));
    }
    let lower = (n as f64 - 1.0) * chi / (2.0 * PI * n as f64);
    if !(alpha > lower && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in ({lower}, 1), got {alpha}"
        )));
    }
    let s = 2.0f64.sqrt();
    let numerator = (2.0 * s * first_moment + 4.0 * s * horizon).powf(alpha);
    let denominator = alpha * (2.0 * alpha - (n as f64 - 1.0) * chi / (PI * n as f64));
    Ok(numerator / denominator)
}

/// Upper bound m + 2t on E[√(1 + |X¹_t|²)] for the regularized system.
pub fn first_moment_bound(first_moment: f64, t: f64) -> f64 {
    first_moment + 2.0 * t
}

/// Minimum pairwise distance and minimum triple perimeter of a
/// configuration. The triple statistic needs at least three particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinSeparations {
    pub min_pair: f64,
    pub min_triple_sum: Option<f64>,
}

pub fn min_separations(positions: &[Vec2]) -> Result<MinSeparations> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "separation statistics need at least 2 positions, got {n}"
        )));
    }
    let mut min_pair = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            min_pair = min_pair.min((positions[i] - positions[j]).norm());
        }
    }
    let min_triple_sum = if n >= 3 {
        Some(crate::kernels::min_triple_perimeter(positions)?)
    } else {
        None
    };
    Ok(MinSeparations {
        min_pair,
        min_triple_sum,
    })
}

/// Left-point Riemann sum of |X^i − X^j|^(α−2) over the recorded grid.
/// Distances below the run's floor are capped at the floor, which keeps the
/// α−2 < −1 integrand summable on a discrete grid.
pub fn path_moment(
    record: &TrajectoryRecord<ParticleSystemState>,
    alpha: f64,
    i: usize,
    j: usize,
) -> Result<f64> {
    if i == j {
        return Err(Error::Domain(
            "path_moment needs distinct particle indices".into(),
        ));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let floor = record.params.distance_floor();
    let mut sum = 0.0;
    for w in 0..record.times.len().saturating_sub(1) {
        let dt = record.times[w + 1] - record.times[w];
        let state = &record.states[w];
        let d = (state.positions[i] - state.positions[j]).norm().max(floor);
        sum += d.powf(alpha - 2.0) * dt;
    }
    Ok(sum)
}

/// Least-squares slope of a time series with a 95% confidence half-width.
pub fn slope_fit(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Domain(format!(
            "slope_fit needs ≥ 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_t = series.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_v = series.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(t, v) in series {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (v - mean_v);
    }
    if sxx <= 0.0 {
        return Err(Error::Domain("degenerate time grid in slope_fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_v - slope * mean_t;
    let ssr: f64 = series
        .iter()
        .map(|&(t, v)| {
            let r = v - (intercept + slope * t);
            r * r
        })
        .sum();
    let se = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok((slope, 1.96 * se))
}

/// Normalized occupation histogram of positions over the centered square
/// [−extent, extent]², `bins` cells per axis. Mass outside the extent is
/// dropped; the grid sums to 1 when every particle lies inside.
pub fn density_histogram(positions: &[Vec2], extent: f64, bins: usize) -> Result<Vec<Vec<f64>>> {
    if bins == 0 {
        return Err(Error::Domain("density_histogram needs bins ≥ 1".into()));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(Error::Domain(format!(
            "extent must be positive, got {extent}"
        )));
    }
    let mut grid = vec![vec![0.0; bins]; bins];
    let weight = 1.0 / positions.len() as f64;
    let cell = |coord: f64| -> Option<usize> {
        if coord < -extent || coord > extent {
            return None;
        }
        let u = (coord + extent) / (2.0 * extent) * bins as f64;
        Some((u as usize).min(bins - 1))
    };
    for p in positions {
        if let (Some(ix), Some(iy)) = (cell(p.x), cell(p.y)) {
            grid[ix][iy] += weight;
        }
    }
    Ok(grid)
}

/// First time at which the minimum triple perimeter drops to `threshold`,
/// over recorded states.
pub fn triple_passage_time(
    times: &[f64],
    states: &[ParticleSystemState],
    threshold: f64,
) -> Result<Option<f64>> {
    for (t, s) in times.iter().zip(states) {
        if let Some(m) = min_separations(&s.positions)?.min_triple_sum {
            if m <= threshold {
                return Ok(Some(*t));
            }
        }
    }
    Ok(None)
}

/// A scalar diagnostic with its confidence interval and, for bound-type
/// tests, the bound it is checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEntry {
    pub name: String,
    pub estimate: f64,
    pub half_width: f64,
    pub confidence: f64,
    pub n: usize,
    pub bound: Option<f64>,
}

/// A named time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEntry {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Named scalar and series outputs of a run, carrying the generating
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub params: SimParams,
    pub scalars: Vec<ScalarEntry>,
    pub series: Vec<SeriesEntry>,
}

impl DiagnosticsReport {
    pub fn new(params: SimParams) -> Self {
        DiagnosticsReport {
            params,
            scalars: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn push_scalar(
        &mut self,
        name: &str,
        estimate: f64,
        half_width: f64,
        confidence: f64,
        n: usize,
        bound: Option<f64>,
    ) {
        self.scalars.push(ScalarEntry {
            name: name.into(),
            estimate,
            half_width,
            confidence,
            n,
            bound,
        });
    }

    pub fn push_series(&mut self, name: &str, points: Vec<(f64, f64)>) {
        self.series.push(SeriesEntry {
            name: name.into(),
            points,
        });
    }
}
