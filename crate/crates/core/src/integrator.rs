//! Explicit Euler–Maruyama time stepping.
//!
//! Three systems are driven here: the N-particle system with regularized
//! (optionally cutoff) drift, the regularized pair difference, and the cubed
//! pair process whose coefficients stay continuous through the origin. The
//! schemes are fixed-step and explicit; reproducibility comes before
//! performance, so the drift uses the naive fixed-order summation.

use crate::error::{Error, Result};
use crate::kernels::{drift_field_into, kernel_regularized};
use crate::noise::{NoiseChecksum, NoiseStream};
use crate::params::{sample_initial, SimParams};
use crate::vec2::Vec2;
use std::f64::consts::PI;

/// Positions of the N planar particles at a time point.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystemState {
    pub time: f64,
    pub positions: Vec<Vec2>,
}

/// State of the cubed pair process Z = |D|²D.
///
/// `frozen` can only become true for χ ≥ 8π, and a frozen state has z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    pub time: f64,
    pub z: Vec2,
    pub frozen: bool,
}

impl PairState {
    /// Start the cubed process from the pair difference D₀.
    pub fn from_pair_difference(d0: Vec2) -> Self {
        PairState {
            time: 0.0,
            z: d0 * d0.norm_sq(),
            frozen: false,
        }
    }

    /// Radial part |Z|^(2/3)/4, the squared-Bessel coordinate of the pair.
    pub fn radial(&self) -> f64 {
        self.z.norm().powf(2.0 / 3.0) / 4.0
    }

    pub fn projected(&self) -> Vec2 {
        project_pair(self.z)
    }
}

/// Time-indexed snapshots plus the checksum of the consumed noise, enough
/// to verify a bit-exact replay from `(seed, replica_index)`.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord<S> {
    pub params: SimParams,
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub noise_checksum: u64,
}

impl<S> TrajectoryRecord<S> {
    pub fn last(&self) -> &S {
        self.states
            .last()
            .expect("record holds at least the initial state")
    }
}

fn check_finite(positions: &[Vec2], step: usize, time: f64) -> Result<()> {
    if positions.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { step, time })
    }
}

/// One explicit Euler step of the N-particle system. Draws one standard 2D
/// Gaussian per particle, in index order.
pub fn step_system(
    state: &ParticleSystemState,
    params: &SimParams,
    noise: &mut NoiseStream,
) -> Result<ParticleSystemState> {
    let noise_vecs: Vec<Vec2> = (0..state.positions.len())
        .map(|_| noise.gaussian_pair())
        .collect();
    step_system_with_noise(state, params, &noise_vecs)
}

/// One explicit Euler step with externally supplied noise:
/// x_i ← x_i + √(2·dt)·ξ_i + dt·b_i, with b evaluated at the pre-step
/// positions.
pub fn step_system_with_noise(
    state: &ParticleSystemState,
    params: &SimParams,
    noise_vecs: &[Vec2],
) -> Result<ParticleSystemState> {
    assert_eq!(noise_vecs.len(), state.positions.len());
    let mut drift = Vec::new();
    drift_field_into(
        &state.positions,
        params.chi,
        params.epsilon,
        params.ell,
        &mut drift,
    )?;
    let dt = params.dt;
    let diff = (2.0 * dt).sqrt();
    let positions: Vec<Vec2> = state
        .positions
        .iter()
        .zip(noise_vecs)
        .zip(&drift)
        .map(|((&x, &xi), &b)| x + xi * diff + b * dt)
        .collect();
    let time = state.time + dt;
    check_finite(&positions, 0, time)?;
    Ok(ParticleSystemState { time, positions })
}

/// Run the N-particle system over [0, T], recording a snapshot every
/// `record_every` steps (the initial state is always recorded).
pub fn simulate_system(
    params: &SimParams,
    noise: &mut NoiseStream,
    record_every: usize,
) -> Result<TrajectoryRecord<ParticleSystemState>> {
    simulate_system_with(params, noise, record_every, |_, _| {})
}

/// Same as [`simulate_system`] with a per-step observer, called after every
/// step (and once for the initial state) with the step index and the state.
/// Streaming statistics (minimum separations, subset variances) are computed
/// this way without recording every step.
pub fn simulate_system_with(
    params: &SimParams,
    noise: &mut NoiseStream,
    record_every: usize,
    mut observe: impl FnMut(usize, &ParticleSystemState),
) -> Result<TrajectoryRecord<ParticleSystemState>> {
    if record_every == 0 {
        return Err(Error::Domain("record_every must be ≥ 1".into()));
    }
    let n = params.n_particles;
    let mut checksum = NoiseChecksum::new();
    let positions = sample_initial(&params.initial_law, n, noise)?;
    for &p in &positions {
        checksum.absorb(p);
    }
    let mut state = ParticleSystemState {
        time: 0.0,
        positions,
    };
    check_finite(&state.positions, 0, 0.0)?;
    observe(0, &state);

    let n_steps = params.n_steps();
    let stride_dt = record_every as f64 * params.dt;
    let mut times = vec![0.0];
    let mut states = vec![state.clone()];

    let mut drift = Vec::with_capacity(n);
    let mut noise_vecs: Vec<Vec2> = Vec::with_capacity(n);
    let diff = (2.0 * params.dt).sqrt();

    for step in 1..=n_steps {
        drift_field_into(
            &state.positions,
            params.chi,
            params.epsilon,
            params.ell,
            &mut drift,
        )?;
        noise_vecs.clear();
        for _ in 0..n {
            let xi = noise.gaussian_pair();
            checksum.absorb(xi);
            noise_vecs.push(xi);
        }
        for ((x, &xi), &b) in state.positions.iter_mut().zip(&noise_vecs).zip(&drift) {
            *x = *x + xi * diff + b * params.dt;
        }
        state.time = step as f64 * params.dt;
        check_finite(&state.positions, step, state.time)?;
        observe(step, &state);
        if step % record_every == 0 {
            times.push((step / record_every) as f64 * stride_dt);
            states.push(state.clone());
        }
    }

    Ok(TrajectoryRecord {
        params: params.clone(),
        times,
        states,
        noise_checksum: checksum.value(),
    })
}

/// One explicit Euler step of the regularized pair difference:
/// d ← d + 2·√dt·ξ + dt·χ·K_ε(d). Requires ε > 0 (the singular pair
/// equation has no global solution for large χ and is not simulated
/// directly).
pub fn step_pair_regularized(
    d: Vec2,
    chi: f64,
    eps: f64,
    dt: f64,
    noise: &mut NoiseStream,
) -> Vec2 {
    assert!(eps > 0.0, "the pair difference scheme requires eps > 0");
    let xi = noise.gaussian_pair();
    step_pair_regularized_with_noise(d, chi, eps, dt, xi)
}

pub fn step_pair_regularized_with_noise(d: Vec2, chi: f64, eps: f64, dt: f64, xi: Vec2) -> Vec2 {
    d + xi * (2.0 * dt.sqrt()) + kernel_regularized(d, eps) * (chi * dt)
}

/// Diffusion matrix of the cubed process applied to a vector:
/// σ(z)·v = 2|z|^(−4/3)·(|z|²·v + 2·z·(z·v)), continuously extended by 0
/// at the origin. The operator norm is 6|z|^(2/3).
pub fn sigma_apply(z: Vec2, v: Vec2) -> Vec2 {
    let r2 = z.norm_sq();
    if r2 == 0.0 {
        return Vec2::ZERO;
    }
    let scale = 2.0 * r2.powf(-2.0 / 3.0);
    (v * r2 + z * (2.0 * z.dot(v))) * scale
}

/// Drift of the cubed process: b(z) = (16 − 3χ/(2π))·|z|^(−2/3)·z, b(0) = 0.
pub fn cubed_drift(z: Vec2, chi: f64) -> Vec2 {
    let r = z.norm();
    if r == 0.0 {
        return Vec2::ZERO;
    }
    z * ((16.0 - 3.0 * chi / (2.0 * PI)) * r.powf(-2.0 / 3.0))
}

/// One explicit Euler step of the cubed pair process with freezing.
///
/// A frozen state only advances its clock. Otherwise
/// z ← z + σ(z)·√dt·ξ + dt·b(z), and when χ ≥ 8π the state freezes at the
/// origin as soon as |z| falls within `freeze_radius` (exact hits of 0 have
/// probability zero in discrete time, so the stopped process must be
/// detected by radius).
pub fn step_cubed(
    state: &PairState,
    chi: f64,
    dt: f64,
    noise: &mut NoiseStream,
    freeze_radius: f64,
) -> PairState {
    if state.frozen {
        return PairState {
            time: state.time + dt,
            ..*state
        };
    }
    let xi = noise.gaussian_pair();
    step_cubed_with_noise(state, chi, dt, xi, freeze_radius)
}

/// Unfrozen cubed-process step with externally supplied noise.
pub fn step_cubed_with_noise(
    state: &PairState,
    chi: f64,
    dt: f64,
    xi: Vec2,
    freeze_radius: f64,
) -> PairState {
    let z = state.z + sigma_apply(state.z, xi) * dt.sqrt() + cubed_drift(state.z, chi) * dt;
    let freeze = chi >= 8.0 * PI && z.norm() <= freeze_radius;
    PairState {
        time: state.time + dt,
        z: if freeze { Vec2::ZERO } else { z },
        frozen: freeze,
    }
}

/// The pair difference recovered from the cubed process:
/// D = |Z|^(−2/3)·Z for Z ≠ 0, else 0.
pub fn project_pair(z: Vec2) -> Vec2 {
    let r = z.norm();
    if r == 0.0 {
        return Vec2::ZERO;
    }
    z * r.powf(-2.0 / 3.0)
}

/// Run the cubed pair process over [0, T]. The initial pair difference D₀
/// is `positions[0] − positions[1]` under the run's initial law, and
/// Z₀ = |D₀|²·D₀.
pub fn simulate_pair_cubed(
    params: &SimParams,
    noise: &mut NoiseStream,
    record_every: usize,
) -> Result<TrajectoryRecord<PairState>> {
    if record_every == 0 {
        return Err(Error::Domain("record_every must be ≥ 1".into()));
    }
    let mut checksum = NoiseChecksum::new();
    let initial = sample_initial(&params.initial_law, 2, noise)?;
    let d0 = initial[0] - initial[1];
    checksum.absorb(d0);
    let mut state = PairState::from_pair_difference(d0);
    let freeze_radius = params.freeze_radius();

    let n_steps = params.n_steps();
    let stride_dt = record_every as f64 * params.dt;
    let mut times = vec![0.0];
    let mut states = vec![state];

    for step in 1..=n_steps {
        if state.frozen {
            state.time = step as f64 * params.dt;
        } else {
            let xi = noise.gaussian_pair();
            checksum.absorb(xi);
            state = step_cubed_with_noise(&state, params.chi, params.dt, xi, freeze_radius);
        }
        if !state.z.is_finite() {
            return Err(Error::BlowUp {
                step,
                time: state.time,
            });
        }
        if step % record_every == 0 {
            times.push((step / record_every) as f64 * stride_dt);
            states.push(state);
        }
    }

    Ok(TrajectoryRecord {
        params: params.clone(),
        times,
        states,
        noise_checksum: checksum.value(),
    })
}
