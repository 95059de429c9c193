//! Supercritical particle system with masses: diffusion scaled by inverse
//! mass, mass-weighted drift, and sticky merges once the colliding mass
//! reaches 8π/χ.
//!
//! Masses are kept as integer multiples of 1/N so that the total is exactly
//! one after any sequence of merges.

use crate::error::{Error, Result};
use crate::integrator::TrajectoryRecord;
use crate::noise::{NoiseChecksum, NoiseStream};
use crate::params::{sample_initial, SimParams};
use crate::vec2::Vec2;
use std::collections::BTreeSet;
use std::f64::consts::PI;

/// One particle (or cluster of elementary particles) with its mass in units
/// of 1/N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParticle {
    pub position: Vec2,
    pub units: usize,
}

/// Variable-size list of (position, mass) pairs; total mass is exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub time: f64,
    /// Denominator of the mass lattice (the initial particle count N).
    pub n_initial: usize,
    pub particles: Vec<ClusterParticle>,
}

impl ClusterState {
    /// All masses 1/N at the given positions.
    pub fn from_positions(positions: Vec<Vec2>) -> Self {
        ClusterState {
            time: 0.0,
            n_initial: positions.len(),
            particles: positions
                .into_iter()
                .map(|position| ClusterParticle { position, units: 1 })
                .collect(),
        }
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.particles[i].units as f64 / self.n_initial as f64
    }

    pub fn total_units(&self) -> usize {
        self.particles.iter().map(|p| p.units).sum()
    }

    /// Mass-weighted barycenter.
    pub fn barycenter(&self) -> Vec2 {
        let total = self.total_units() as f64;
        self.particles
            .iter()
            .fold(Vec2::ZERO, |a, p| a + p.position * p.units as f64)
            / total
    }
}

/// Smallest unit count k with k/N ≥ 8π/χ, the sticky-mass threshold. The
/// comparison carries a 1e−9 relative slack so that lattice points exactly
/// at the threshold (like 8πN/χ = 5) are kept inclusive under roundoff.
pub fn min_sticky_units(n: usize, chi: f64) -> usize {
    let raw = 8.0 * PI * n as f64 / chi;
    (raw - 1e-9 * raw.max(1.0)).ceil().max(1.0) as usize
}

/// The mass lattice {1/N} ∪ {k/N : ⌈8πN/χ⌉ ≤ k ≤ N}, as unit counts.
pub fn allowed_mass_set(n: usize, chi: f64) -> BTreeSet<usize> {
    assert!(chi > 0.0, "chi must be positive");
    let mut set = BTreeSet::new();
    set.insert(1);
    for k in min_sticky_units(n, chi)..=n {
        set.insert(k);
    }
    set
}

/// Drift b_i = χ·Σ_j ν_j·K_ε(x_i − x_j).
pub fn cluster_drift(state: &ClusterState, chi: f64, eps: f64) -> Vec<Vec2> {
    let eps2 = eps * eps;
    let inv_n = 1.0 / state.n_initial as f64;
    state
        .particles
        .iter()
        .map(|pi| {
            let mut acc = Vec2::ZERO;
            for pj in &state.particles {
                let d = pi.position - pj.position;
                let denom = d.norm_sq() + eps2;
                if denom > 0.0 {
                    acc += d * (-(pj.units as f64) / (2.0 * PI * denom));
                }
            }
            acc * (chi * inv_n)
        })
        .collect()
}

/// One explicit Euler step: x_i ← x_i + √(2/(N·ν_i))·√dt·ξ_i + dt·b_i.
/// Masses are untouched; merging is a separate operation.
pub fn step_cluster(
    state: &ClusterState,
    chi: f64,
    eps: f64,
    dt: f64,
    noise: &mut NoiseStream,
) -> ClusterState {
    let noise_vecs: Vec<Vec2> = (0..state.particles.len())
        .map(|_| noise.gaussian_pair())
        .collect();
    step_cluster_with_noise(state, chi, eps, dt, &noise_vecs)
}

pub fn step_cluster_with_noise(
    state: &ClusterState,
    chi: f64,
    eps: f64,
    dt: f64,
    noise_vecs: &[Vec2],
) -> ClusterState {
    assert_eq!(noise_vecs.len(), state.particles.len());
    let drift = cluster_drift(state, chi, eps);
    let particles = state
        .particles
        .iter()
        .zip(noise_vecs)
        .zip(&drift)
        .map(|((p, &xi), &b)| {
            // √(2/(N·ν_i)) = √(2/units_i).
            let diff = (2.0 / p.units as f64).sqrt() * dt.sqrt();
            ClusterParticle {
                position: p.position + xi * diff + b * dt,
                units: p.units,
            }
        })
        .collect();
    ClusterState {
        time: state.time + dt,
        n_initial: state.n_initial,
        particles,
    }
}

/// One merge pass applied to the threshold graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeEvent {
    /// Indices (pre-merge) of the merged component, ascending.
    pub members: Vec<usize>,
    pub total_units: usize,
    /// The merged mass sits exactly at the sticky threshold 8π/χ; the
    /// inclusive rule decided this merge.
    pub at_boundary: bool,
}

/// Merge every connected component of the distance-`threshold` graph whose
/// total mass reaches 8π/χ into one particle at the mass-weighted centroid.
/// Lighter components are left untouched. Output ordering is stable: each
/// particle (or merged component) appears at the slot of its smallest
/// original index.
pub fn merge_components(state: &ClusterState, chi: f64, threshold: f64) -> ClusterState {
    merge_components_detailed(state, chi, threshold).0
}

pub fn merge_components_detailed(
    state: &ClusterState,
    chi: f64,
    threshold: f64,
) -> (ClusterState, Vec<MergeEvent>) {
    assert!(threshold > 0.0, "merge threshold must be positive");
    let n = state.particles.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let up = parent[i];
            let root = find(parent, up);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (state.particles[i].position - state.particles[j].position).norm();
            if d <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let k_min = min_sticky_units(state.n_initial, chi);
    let mut events = Vec::new();
    let mut particles = Vec::with_capacity(n);
    let mut emitted = vec![false; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if emitted[root] {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| find(&mut parent, j) == root).collect();
        let total_units: usize = members.iter().map(|&j| state.particles[j].units).sum();
        if members.len() >= 2 && total_units >= k_min {
            let centroid = members.iter().fold(Vec2::ZERO, |a, &j| {
                a + state.particles[j].position * state.particles[j].units as f64
            }) / total_units as f64;
            let s = total_units as f64 / state.n_initial as f64;
            events.push(MergeEvent {
                at_boundary: (s - 8.0 * PI / chi).abs() <= 1e-9 * s.max(1.0),
                members,
                total_units,
            });
            particles.push(ClusterParticle {
                position: centroid,
                units: total_units,
            });
            emitted[root] = true;
        } else {
            // Below the sticky mass: the component separates on its own, so
            // each member stays as is.
            particles.push(state.particles[i]);
        }
    }

    (
        ClusterState {
            time: state.time,
            n_initial: state.n_initial,
            particles,
        },
        events,
    )
}

/// Run the mass-carrying dynamics over [0, T]: Euler displacement followed
/// by one merge pass per step. `threshold` defaults to the run's merge
/// threshold max(ε, 10√dt).
pub fn simulate_clusters(
    params: &SimParams,
    noise: &mut NoiseStream,
    record_every: usize,
    threshold: Option<f64>,
    mut observe: impl FnMut(usize, &ClusterState, &[MergeEvent]),
) -> Result<TrajectoryRecord<ClusterState>> {
    if record_every == 0 {
        return Err(Error::Domain("record_every must be ≥ 1".into()));
    }
    let threshold = threshold.unwrap_or_else(|| params.merge_threshold());
    let mut checksum = NoiseChecksum::new();
    let positions = sample_initial(&params.initial_law, params.n_particles, noise)?;
    for &p in &positions {
        checksum.absorb(p);
    }
    let mut state = ClusterState::from_positions(positions);
    observe(0, &state, &[]);

    let n_steps = params.n_steps();
    let stride_dt = record_every as f64 * params.dt;
    let mut times = vec![0.0];
    let mut states = vec![state.clone()];

    for step in 1..=n_steps {
        let noise_vecs: Vec<Vec2> = (0..state.particles.len())
            .map(|_| {
                let xi = noise.gaussian_pair();
                checksum.absorb(xi);
                xi
            })
            .collect();
        let moved =
            step_cluster_with_noise(&state, params.chi, params.epsilon, params.dt, &noise_vecs);
        if !moved.particles.iter().all(|p| p.position.is_finite()) {
            return Err(Error::BlowUp {
                step,
                time: moved.time,
            });
        }
        let (merged, events) = merge_components_detailed(&moved, params.chi, threshold);
        state = merged;
        observe(step, &state, &events);
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

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_body(d: f64, units: (usize, usize), n: usize) -> ClusterState {
        ClusterState {
            time: 0.0,
            n_initial: n,
            particles: vec![
                ClusterParticle {
                    position: Vec2::new(-d / 2.0, 0.0),
                    units: units.0,
                },
                ClusterParticle {
                    position: Vec2::new(d / 2.0, 0.0),
                    units: units.1,
                },
            ],
        }
    }

    #[test]
    fn single_particle_no_drift() {
        let state = ClusterState {
            time: 0.0,
            n_initial: 4,
            particles: vec![ClusterParticle {
                position: Vec2::new(1.0, 2.0),
                units: 4,
            }],
        };
        assert_eq!(cluster_drift(&state, 10.0, 0.0), vec![Vec2::ZERO]);
    }

    #[test]
    fn symmetric_pair_drift() {
        // Masses ½, ½ at (±d/2, 0): b₁ = χ·½·K((−d, 0)) = (χ/(4πd), 0).
        let d = 2.0;
        let chi = 3.0;
        let state = two_body(d, (1, 1), 2);
        let drift = cluster_drift(&state, chi, 0.0);
        assert_relative_eq!(drift[0].x, chi / (4.0 * PI * d), max_relative = 1e-13);
        assert_relative_eq!(drift[1].x, -chi / (4.0 * PI * d), max_relative = 1e-13);
    }

    #[test]
    fn mass_weighted_drift_cancels() {
        let mut noise = NoiseStream::new(12, 0);
        let state = ClusterState {
            time: 0.0,
            n_initial: 10,
            particles: (0..6)
                .map(|i| ClusterParticle {
                    position: noise.gaussian_pair(),
                    units: [1, 1, 1, 2, 2, 3][i],
                })
                .collect(),
        };
        let drift = cluster_drift(&state, 16.0 * PI, 0.0);
        let total = state
            .particles
            .iter()
            .zip(&drift)
            .fold(Vec2::ZERO, |a, (p, &b)| a + b * (p.units as f64 / 10.0));
        assert!(total.norm() < 1e-12);
    }

    #[test]
    fn diffusion_scaling() {
        // Unit masses diffuse with coefficient √2; the full cluster with
        // √(2/N).
        let state = two_body(1.0, (1, 1), 10);
        let xi = [Vec2::new(1.0, 0.0), Vec2::ZERO];
        let dt = 0.01;
        let next = step_cluster_with_noise(&state, 0.0, 0.0, dt, &xi);
        let moved = next.particles[0].position - state.particles[0].position;
        assert_relative_eq!(moved.x, (2.0f64).sqrt() * dt.sqrt(), max_relative = 1e-13);

        let full = ClusterState {
            time: 0.0,
            n_initial: 10,
            particles: vec![ClusterParticle {
                position: Vec2::ZERO,
                units: 10,
            }],
        };
        let next = step_cluster_with_noise(&full, 0.0, 0.0, dt, &[Vec2::new(1.0, 0.0)]);
        assert_relative_eq!(
            next.particles[0].position.x,
            (2.0f64 / 10.0).sqrt() * dt.sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn zero_noise_symmetric_approach() {
        let state = two_body(1.0, (1, 1), 2);
        let next = step_cluster_with_noise(&state, 4.0 * PI, 0.0, 1e-3, &[Vec2::ZERO; 2]);
        let l = next.particles[0].position.x;
        let r = next.particles[1].position.x;
        assert_relative_eq!(l, -r, epsilon = 1e-15);
        assert!(l > -0.5, "particles move toward each other");
    }

    #[test]
    fn sticky_threshold_units() {
        assert_eq!(min_sticky_units(10, 16.0 * PI), 5);
        assert_eq!(min_sticky_units(10, 8.0 * PI), 10);
        assert_eq!(min_sticky_units(10, 4.0 * PI), 20);
        assert_eq!(min_sticky_units(10, 48.0 * PI), 2);
    }

    #[test]
    fn allowed_mass_lattices() {
        let set = allowed_mass_set(10, 8.0 * PI);
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec![1, 10]);

        let set = allowed_mass_set(10, 16.0 * PI);
        assert_eq!(
            set.into_iter().collect::<Vec<_>>(),
            vec![1, 5, 6, 7, 8, 9, 10]
        );

        // 8πN/χ = 20 > N: no merges possible.
        let set = allowed_mass_set(10, 4.0 * PI);
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn any_contact_sticky_when_chi_large() {
        // χ ≥ 4πN: a two-particle contact already reaches the sticky mass.
        for n in [3usize, 10, 25] {
            let chi = 4.0 * PI * n as f64;
            assert!(min_sticky_units(n, chi) <= 2);
            assert!(crate::diagnostics::bessel_dimension(n, chi, 2) <= 0.0 + 1e-12);
        }
    }

    #[test]
    fn light_pair_does_not_merge() {
        let state = two_body(1e-4, (1, 1), 10);
        let merged = merge_components(&state, 16.0 * PI, 1e-3);
        assert_eq!(merged.particles.len(), 2, "S = 0.2 < 8π/χ = 0.5 separates");
    }

    #[test]
    fn heavy_pair_merges_to_midpoint() {
        let state = two_body(1e-4, (1, 1), 2);
        let merged = merge_components(&state, 8.0 * PI, 1e-3);
        assert_eq!(merged.particles.len(), 1);
        assert_eq!(merged.particles[0].units, 2);
        assert!(merged.particles[0].position.norm() < 1e-12);
    }

    #[test]
    fn cluster_plus_singleton_merges() {
        // Mass 5/10 near 1/10 at χ = 16π: the cluster mass alone reaches
        // 8π/χ, so the contact is sticky and yields 6/10.
        let state = ClusterState {
            time: 0.0,
            n_initial: 10,
            particles: vec![
                ClusterParticle {
                    position: Vec2::ZERO,
                    units: 5,
                },
                ClusterParticle {
                    position: Vec2::new(1e-4, 0.0),
                    units: 1,
                },
                ClusterParticle {
                    position: Vec2::new(9.0, 9.0),
                    units: 4,
                },
            ],
        };
        let (merged, events) = merge_components_detailed(&state, 16.0 * PI, 1e-3);
        assert_eq!(merged.particles.len(), 2);
        assert_eq!(merged.particles[0].units, 6);
        // Mass-weighted centroid: (5·0 + 1·1e−4)/6.
        assert_relative_eq!(
            merged.particles[0].position.x,
            1e-4 / 6.0,
            max_relative = 1e-12
        );
        assert_eq!(merged.particles[1].units, 4);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].members, vec![0, 1]);
        assert!(!events[0].at_boundary);
    }

    #[test]
    fn boundary_merge_is_flagged() {
        // N = 10, χ = 16π: a 4+1 contact totals exactly 5 units = 8π/χ.
        let state = ClusterState {
            time: 0.0,
            n_initial: 10,
            particles: vec![
                ClusterParticle {
                    position: Vec2::ZERO,
                    units: 4,
                },
                ClusterParticle {
                    position: Vec2::new(1e-5, 0.0),
                    units: 1,
                },
            ],
        };
        let (merged, events) = merge_components_detailed(&state, 16.0 * PI, 1e-3);
        assert_eq!(merged.particles.len(), 1);
        assert_eq!(events.len(), 1);
        assert!(events[0].at_boundary);
    }

    #[test]
    fn multibody_component_merges_once() {
        // Three mutually close particles form one component and merge into
        // a single cluster in the same pass.
        let state = ClusterState {
            time: 0.0,
            n_initial: 6,
            particles: vec![
                ClusterParticle {
                    position: Vec2::ZERO,
                    units: 1,
                },
                ClusterParticle {
                    position: Vec2::new(1e-4, 0.0),
                    units: 1,
                },
                ClusterParticle {
                    position: Vec2::new(2e-4, 0.0),
                    units: 1,
                },
            ],
        };
        let merged = merge_components(&state, 24.0 * PI, 1.5e-4);
        assert_eq!(merged.particles.len(), 1);
        assert_eq!(merged.particles[0].units, 3);
    }

    #[test]
    fn trajectory_mass_conserved_and_count_monotone() {
        let params = SimParams {
            n_particles: 10,
            chi: 48.0 * PI,
            epsilon: 0.0,
            ell: None,
            dt: 1e-4,
            horizon: 0.5,
            seed: 7,
            initial_law: crate::params::InitialLaw::StandardGaussian,
            replicas: 1,
            freeze_radius: None,
            alpha: None,
        };
        let mut noise = NoiseStream::new(params.seed, 0);
        let allowed = allowed_mass_set(10, params.chi);
        let mut last_count = usize::MAX;
        simulate_clusters(&params, &mut noise, 100, None, |_, state, _| {
            assert_eq!(state.total_units(), 10);
            assert!(state.particles.len() <= last_count);
            last_count = state.particles.len();
            for p in &state.particles {
                assert!(
                    allowed.contains(&p.units),
                    "mass {}/10 not allowed",
                    p.units
                );
            }
        })
        .unwrap();
    }

    #[test]
    fn mass_weighted_barycenter_identity_per_step() {
        let mut noise = NoiseStream::new(88, 0);
        let state = ClusterState {
            time: 0.0,
            n_initial: 10,
            particles: (0..5)
                .map(|i| ClusterParticle {
                    position: noise.gaussian_pair(),
                    units: [1, 2, 3, 1, 3][i],
                })
                .collect(),
        };
        let dt = 1e-3;
        let xi: Vec<Vec2> = (0..5).map(|_| noise.gaussian_pair()).collect();
        let next = step_cluster_with_noise(&state, 16.0 * PI, 0.0, dt, &xi);
        let expected_increment = state
            .particles
            .iter()
            .zip(&xi)
            .fold(Vec2::ZERO, |a, (p, &x)| {
                let nu = p.units as f64 / 10.0;
                a + x * (nu * (2.0 / p.units as f64).sqrt() * dt.sqrt())
            });
        let got = next.barycenter() - state.barycenter();
        assert!((got - expected_increment).norm() < 1e-12);
    }
}
