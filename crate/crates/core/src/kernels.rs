//! The attractive interaction kernel, its regularization, the
//! triple-proximity cutoff and the pairwise drift field.

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use std::f64::consts::PI;

/// Singular kernel −x/(2π|x|²), with the zero-at-origin convention.
#[inline]
pub fn kernel_singular(x: Vec2) -> Vec2 {
    let r2 = x.norm_sq();
    if r2 == 0.0 {
        return Vec2::ZERO;
    }
    x * (-1.0 / (2.0 * PI * r2))
}

/// Regularized kernel −x/(2π(|x|²+ε²)); reduces to [`kernel_singular`]
/// when `eps` is zero.
#[inline]
pub fn kernel_regularized(x: Vec2, eps: f64) -> Vec2 {
    let denom = x.norm_sq() + eps * eps;
    if denom == 0.0 {
        return Vec2::ZERO;
    }
    x * (-1.0 / (2.0 * PI * denom))
}

/// Minimum over distinct triples of the three-point perimeter
/// |x_i−x_j| + |x_j−x_k| + |x_k−x_i|.
pub fn min_triple_perimeter(positions: &[Vec2]) -> Result<f64> {
    if positions.len() < 3 {
        return Err(Error::Domain(format!(
            "triple statistics need at least 3 positions, got {}",
            positions.len()
        )));
    }
    let mut min = f64::INFINITY;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let dij = (positions[i] - positions[j]).norm();
            for k in (j + 1)..positions.len() {
                let p = dij
                    + (positions[j] - positions[k]).norm()
                    + (positions[k] - positions[i]).norm();
                if p < min {
                    min = p;
                }
            }
        }
    }
    Ok(min)
}

/// Cutoff switch in [0, 1]: clamp of 2ℓ·m − 1 where m is the minimum triple
/// perimeter. Vanishes for m ≤ 1/(2ℓ) and saturates at 1 for m ≥ 1/ℓ.
pub fn cutoff_phi(positions: &[Vec2], ell: f64) -> Result<f64> {
    let m = min_triple_perimeter(positions)?;
    Ok((2.0 * ell * m - 1.0).clamp(0.0, 1.0))
}

/// Per-particle drift vectors of one system state.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    pub per_particle: Vec<Vec2>,
}

impl DriftField {
    /// Componentwise sum over particles; zero up to roundoff by oddness of
    /// the kernel.
    pub fn total(&self) -> Vec2 {
        self.per_particle.iter().fold(Vec2::ZERO, |a, &b| a + b)
    }
}

/// Drift b_i = (χ/N)·Σ_j K_ε(x_i − x_j), multiplied by the cutoff switch
/// when `cutoff_ell` is supplied. Summation over j in index order; the
/// self term contributes exactly zero through the kernel convention, so the
/// inner loop is branch-free.
pub fn drift_field(
    positions: &[Vec2],
    chi: f64,
    eps: f64,
    cutoff_ell: Option<f64>,
) -> Result<DriftField> {
    let mut per_particle = Vec::new();
    drift_field_into(positions, chi, eps, cutoff_ell, &mut per_particle)?;
    Ok(DriftField { per_particle })
}

/// Allocation-free variant of [`drift_field`] for stepping loops; same
/// fixed-order summation, bit-identical results.
pub fn drift_field_into(
    positions: &[Vec2],
    chi: f64,
    eps: f64,
    cutoff_ell: Option<f64>,
    out: &mut Vec<Vec2>,
) -> Result<()> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "drift_field needs at least 2 positions, got {n}"
        )));
    }
    let phi = match cutoff_ell {
        Some(ell) => cutoff_phi(positions, ell)?,
        None => 1.0,
    };
    let scale = chi / n as f64 * phi;
    let eps2 = eps * eps;
    out.clear();
    out.extend(positions.iter().map(|&xi| {
        let mut acc = Vec2::ZERO;
        for &xj in positions {
            let d = xi - xj;
            let denom = d.norm_sq() + eps2;
            if denom > 0.0 {
                acc += d * (-1.0 / (2.0 * PI * denom));
            }
        }
        acc * scale
    }));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn singular_kernel_values() {
        assert_eq!(kernel_singular(Vec2::ZERO), Vec2::ZERO);
        let k = kernel_singular(Vec2::new(1.0, 0.0));
        assert_relative_eq!(k.x, -1.0 / (2.0 * PI), max_relative = 1e-15);
        assert_eq!(k.y, 0.0);
        let k = kernel_singular(Vec2::new(0.0, 2.0));
        assert_eq!(k.x, 0.0);
        assert_relative_eq!(k.y, -1.0 / (4.0 * PI), max_relative = 1e-15);
    }

    #[test]
    fn regularized_kernel_values() {
        let k = kernel_regularized(Vec2::new(1.0, 0.0), 1.0);
        assert_relative_eq!(k.x, -1.0 / (4.0 * PI), max_relative = 1e-15);
        assert_eq!(kernel_regularized(Vec2::ZERO, 0.5), Vec2::ZERO);
        assert_eq!(
            kernel_regularized(Vec2::new(1.0, 0.0), 0.0),
            kernel_singular(Vec2::new(1.0, 0.0))
        );
        assert_eq!(kernel_regularized(Vec2::ZERO, 0.0), Vec2::ZERO);
    }

    #[test]
    fn antisymmetry_is_exact() {
        let mut noise = crate::noise::NoiseStream::new(1, 0);
        for _ in 0..100 {
            let x = noise.gaussian_pair();
            let eps = noise.uniform();
            assert_eq!(kernel_regularized(-x, eps), -kernel_regularized(x, eps));
        }
    }

    #[test]
    fn regularized_kernel_bound() {
        let mut noise = crate::noise::NoiseStream::new(2, 0);
        for _ in 0..200 {
            let x = noise.gaussian_pair() * 0.3;
            let eps = 0.05 + noise.uniform();
            let k = kernel_regularized(x, eps).norm();
            let bound = 1.0 / (2.0 * PI * (x.norm_sq() + eps * eps).sqrt());
            assert!(k <= bound * (1.0 + 1e-12));
            assert!(k <= 1.0 / (2.0 * PI * eps) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cutoff_clamps() {
        let ell = 2.0;
        // Collinear triple (0,0), (a,0), (2a,0) has perimeter 4a.
        let triple = |m: f64| {
            let a = m / 4.0;
            vec![Vec2::ZERO, Vec2::new(a, 0.0), Vec2::new(2.0 * a, 0.0)]
        };
        assert_eq!(cutoff_phi(&triple(2.0 / ell), ell).unwrap(), 1.0);
        assert_eq!(cutoff_phi(&triple(0.5 / ell), ell).unwrap(), 0.0);
        assert_relative_eq!(
            cutoff_phi(&triple(0.75 / ell), ell).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        assert!(cutoff_phi(&[Vec2::ZERO, Vec2::ZERO], ell).is_err());
    }

    #[test]
    fn two_body_drift() {
        let positions = [Vec2::new(1.0, 0.0), Vec2::ZERO];
        let field = drift_field(&positions, 4.0 * PI, 0.0, None).unwrap();
        assert_relative_eq!(field.per_particle[0].x, -1.0, max_relative = 1e-14);
        assert_relative_eq!(field.per_particle[1].x, 1.0, max_relative = 1e-14);
        assert_eq!(field.per_particle[0].y, 0.0);
    }

    #[test]
    fn equilateral_drift_against_brute_force() {
        // Unit equilateral triangle, χ = 2π, singular kernel. Each particle
        // is pulled toward the centroid with magnitude 1/√3: the two kernel
        // terms have norm 1/(2π) each and meet at 60 degrees, and the
        // prefactor is χ/N = 2π/3.
        let positions = [
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 3.0_f64.sqrt() / 2.0),
        ];
        let chi = 2.0 * PI;
        let field = drift_field(&positions, chi, 0.0, None).unwrap();

        // Independent brute-force oracle: compensated summation over pairs
        // in reversed order.
        for (i, &xi) in positions.iter().enumerate() {
            let mut acc = Vec2::ZERO;
            let mut comp = Vec2::ZERO;
            for &xj in positions.iter().rev() {
                let term = kernel_singular(xi - xj) * (chi / 3.0);
                let y = term - comp;
                let t = acc + y;
                comp = (t - acc) - y;
                acc = t;
            }
            assert_relative_eq!(field.per_particle[i].x, acc.x, epsilon = 1e-13);
            assert_relative_eq!(field.per_particle[i].y, acc.y, epsilon = 1e-13);
            assert_relative_eq!(
                field.per_particle[i].norm(),
                1.0 / 3.0_f64.sqrt(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn drift_total_vanishes() {
        let mut noise = crate::noise::NoiseStream::new(5, 0);
        for n in [2usize, 3, 8, 33] {
            let positions: Vec<Vec2> = (0..n).map(|_| noise.gaussian_pair()).collect();
            let field = drift_field(&positions, 7.0, 1e-3, None).unwrap();
            let total = field.total();
            let tol = 1e-12 * n as f64;
            assert!(
                total.x.abs() < tol && total.y.abs() < tol,
                "total {total:?}"
            );
        }
    }

    #[test]
    fn cutoff_gates_drift() {
        let ell = 1.0;
        // Perimeter 0.4 < 1/(2ℓ): drift off.
        let tight = [
            Vec2::ZERO,
            Vec2::new(0.1, 0.0),
            Vec2::new(0.2, 0.0),
            Vec2::new(5.0, 5.0),
        ];
        // min perimeter still 0.4 because of the tight triple.
        let field = drift_field(&tight, 5.0, 1e-2, Some(ell)).unwrap();
        assert!(field.per_particle.iter().all(|b| *b == Vec2::ZERO));

        // Perimeter 4 > 1/ℓ everywhere: cutoff inactive.
        let wide = [
            Vec2::ZERO,
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(5.0, 5.0),
        ];
        let gated = drift_field(&wide, 5.0, 1e-2, Some(ell)).unwrap();
        let plain = drift_field(&wide, 5.0, 1e-2, None).unwrap();
        assert_eq!(gated, plain);
    }

    #[test]
    fn deterministic_evaluation() {
        let positions: Vec<Vec2> = (0..10)
            .map(|i| Vec2::new(i as f64 * 0.37, (i * i) as f64 * 0.11))
            .collect();
        let a = drift_field(&positions, 3.0, 1e-2, None).unwrap();
        let b = drift_field(&positions, 3.0, 1e-2, None).unwrap();
        assert_eq!(a, b);
    }
}
