//! Run configuration and initial-condition sampling.
//!
//! A run configuration file is a single JSON document mirroring
//! [`SimParams`] field for field (snake_case). Unknown fields are rejected
//! so that typos surface as parse errors instead of silently ignored knobs.

use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Initial law of the particle positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    /// Standard 2D Gaussian.
    StandardGaussian,
    /// Uniform on the closed disk of the given radius centered at the origin.
    UniformDisk { radius: f64 },
    /// Deterministic positions; cardinality must equal the particle count.
    /// Collision-dichotomy experiments assume pairwise distinct entries
    /// (the non-atomic case); coincident entries are legitimate for pair
    /// starts at the origin.
    PointCloud { points: Vec<(f64, f64)> },
    /// Two independent blocks for pair experiments: the first ⌈n/2⌉
    /// particles from the first law, the rest from the second.
    ProductOf { laws: Box<(InitialLaw, InitialLaw)> },
}

impl InitialLaw {
    fn validate(&self) -> Result<()> {
        match self {
            InitialLaw::StandardGaussian => Ok(()),
            InitialLaw::UniformDisk { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Config(format!(
                        "initial_law.uniform_disk.radius must be positive and finite, got {radius}"
                    )));
                }
                Ok(())
            }
            InitialLaw::PointCloud { points } => {
                if points.is_empty() {
                    return Err(Error::Config("initial_law.point_cloud is empty".into()));
                }
                for (i, &(x, y)) in points.iter().enumerate() {
                    if !(x.is_finite() && y.is_finite()) {
                        return Err(Error::Config(format!(
                            "initial_law.point_cloud[{i}] has non-finite coordinates"
                        )));
                    }
                }
                Ok(())
            }
            InitialLaw::ProductOf { laws } => {
                laws.0.validate()?;
                laws.1.validate()
            }
        }
    }
}

/// All scalar parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Number of particles N (≥ 2).
    pub n_particles: usize,
    /// Chemotactic sensitivity χ (> 0).
    pub chi: f64,
    /// Kernel regularization ε in [0, 1]; 0 selects the singular kernel
    /// with the zero-at-origin convention.
    pub epsilon: f64,
    /// Cutoff scale ℓ for the triple-proximity drift switch; `None` runs
    /// without cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    /// Time step of the explicit Euler scheme.
    pub dt: f64,
    /// Horizon T.
    pub horizon: f64,
    /// Seed of the replica noise streams.
    pub seed: u64,
    /// Initial law of the positions.
    pub initial_law: InitialLaw,
    /// Number of independent replicas.
    pub replicas: usize,
    /// Radius below which the cubed pair process is frozen when χ ≥ 8π.
    /// Defaults to 10·dt^(3/4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freeze_radius: Option<f64>,
    /// Exponent α for pathwise-moment diagnostics; when present it must lie
    /// in the admissible interval ((N−1)χ/(2πN), 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl SimParams {
    /// Number of Euler steps: ⌈T/dt⌉, with near-integer ratios snapped so
    /// that decimal dt values cannot gain a spurious extra step through
    /// roundoff.
    pub fn n_steps(&self) -> usize {
        let raw = self.horizon / self.dt;
        let rounded = raw.round();
        if (raw - rounded).abs() < 1e-9 * rounded.max(1.0) {
            rounded as usize
        } else {
            raw.ceil() as usize
        }
    }

    /// Freeze radius for the cubed pair process.
    pub fn freeze_radius(&self) -> f64 {
        self.freeze_radius.unwrap_or(10.0 * self.dt.powf(0.75))
    }

    /// Detection threshold for triple proximity: max(10ε, 10√dt).
    pub fn triple_threshold(&self) -> f64 {
        (10.0 * self.epsilon).max(10.0 * self.dt.sqrt())
    }

    /// Default merge-detection threshold for cluster dynamics: max(ε, 10√dt).
    pub fn merge_threshold(&self) -> f64 {
        self.epsilon.max(10.0 * self.dt.sqrt())
    }

    /// Distance floor used to cap pathwise-moment integrands: ε for
    /// regularized runs, √dt for singular ones.
    pub fn distance_floor(&self) -> f64 {
        if self.epsilon > 0.0 {
            self.epsilon
        } else {
            self.dt.sqrt()
        }
    }

    /// Lower endpoint of the admissible α interval, (N−1)χ/(2πN).
    pub fn alpha_lower(&self) -> f64 {
        (self.n_particles as f64 - 1.0) * self.chi
            / (2.0 * std::f64::consts::PI * self.n_particles as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config(format!(
                "n_particles must be ≥ 2, got {}",
                self.n_particles
            )));
        }
        if !(self.chi.is_finite() && self.chi > 0.0) {
            return Err(Error::Config(format!(
                "chi must be positive, got {}",
                self.chi
            )));
        }
        if !(self.epsilon.is_finite() && (0.0..=1.0).contains(&self.epsilon)) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if let Some(ell) = self.ell {
            if !(ell.is_finite() && ell > 0.0) {
                return Err(Error::Config(format!("ell must be positive, got {ell}")));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.dt >= self.horizon {
            return Err(Error::Config(format!(
                "dt must be smaller than horizon, got dt = {} ≥ horizon = {}",
                self.dt, self.horizon
            )));
        }
        if self.replicas < 1 {
            return Err(Error::Config("replicas must be ≥ 1".into()));
        }
        if let Some(fr) = self.freeze_radius {
            if !(fr.is_finite() && fr >= 0.0) {
                return Err(Error::Config(format!(
                    "freeze_radius must be nonnegative, got {fr}"
                )));
            }
        }
        if let Some(alpha) = self.alpha {
            let lo = self.alpha_lower();
            if !(alpha > lo && alpha < 1.0) {
                return Err(Error::Config(format!(
                    "alpha must lie in ((N-1)chi/(2 pi N), 1) = ({lo}, 1), got {alpha}"
                )));
            }
        }
        if let InitialLaw::PointCloud { points } = &self.initial_law {
            if points.len() != self.n_particles {
                return Err(Error::Config(format!(
                    "initial_law.point_cloud has {} points but n_particles = {}",
                    points.len(),
                    self.n_particles
                )));
            }
        }
        self.initial_law.validate()
    }

    /// Parse and validate a single configuration document.
    pub fn from_json(text: &str) -> Result<SimParams> {
        let params: SimParams = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SimParams serializes")
    }
}

/// Draw `n` i.i.d. positions from `law`. Deterministic given the noise state.
pub fn sample_initial(law: &InitialLaw, n: usize, noise: &mut NoiseStream) -> Result<Vec<Vec2>> {
    if n == 0 {
        return Err(Error::Domain("sample_initial requires n ≥ 1".into()));
    }
    match law {
        InitialLaw::StandardGaussian => Ok((0..n).map(|_| noise.gaussian_pair()).collect()),
        InitialLaw::UniformDisk { radius } => Ok((0..n)
            .map(|_| {
                // Polar sampling: radius R√u, angle 2πv. Fixed two-word cost.
                let u = noise.uniform();
                let v = noise.uniform();
                let r = radius * u.sqrt();
                let theta = 2.0 * std::f64::consts::PI * v;
                Vec2::new(r * theta.cos(), r * theta.sin())
            })
            .collect()),
        InitialLaw::PointCloud { points } => {
            if points.len() != n {
                return Err(Error::Config(format!(
                    "point_cloud has {} points, expected {n}",
                    points.len()
                )));
            }
            Ok(points.iter().map(|&(x, y)| Vec2::new(x, y)).collect())
        }
        InitialLaw::ProductOf { laws } => {
            let first = n.div_ceil(2);
            let mut out = sample_initial(&laws.0, first, noise)?;
            if n > first {
                out.extend(sample_initial(&laws.1, n - first, noise)?);
            }
            Ok(out)
        }
    }
}
