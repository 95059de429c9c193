//! Preset experiment configurations. Each preset reproduces one entry of
//! the acceptance suite, seed for seed.

use anyhow::{bail, Result};
use kslab::{InitialLaw, SimParams};
use std::f64::consts::PI;

pub const PRESET_NAMES: [&str; 8] = [
    "variance_slope",
    "pair_bessel",
    "fund_bound",
    "triple_dichotomy",
    "pair_collision",
    "cluster_coalescence",
    "angular_uniformity",
    "regime_table",
];

fn gaussian(
    n: usize,
    chi: f64,
    eps: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    replicas: usize,
) -> SimParams {
    SimParams {
        n_particles: n,
        chi,
        epsilon: eps,
        ell: None,
        dt,
        horizon,
        seed,
        initial_law: InitialLaw::StandardGaussian,
        replicas,
        freeze_radius: None,
        alpha: None,
    }
}

fn pair_from(
    d0: (f64, f64),
    chi: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    replicas: usize,
) -> SimParams {
    SimParams {
        n_particles: 2,
        chi,
        epsilon: 0.0,
        ell: None,
        dt,
        horizon,
        seed,
        initial_law: InitialLaw::PointCloud {
            points: vec![d0, (0.0, 0.0)],
        },
        replicas,
        freeze_radius: None,
        alpha: None,
    }
}

/// The sweep (one or several SimParams documents) behind a preset name,
/// plus the system the runner should drive with it.
pub fn preset(name: &str) -> Result<(Vec<SimParams>, &'static str)> {
    let sweep = match name {
        "variance_slope" => (
            vec![gaussian(32, 4.0 * PI, 1e-3, 1e-4, 1.0, 101, 500)],
            "particles",
        ),
        "pair_bessel" => (
            vec![pair_from((1.0, 0.0), 2.0 * PI, 1e-4, 1.0, 102, 2000)],
            "pair",
        ),
        "fund_bound" => {
            let mut p = gaussian(8, PI, 1e-3, 1e-3, 1.0, 105, 500);
            p.alpha = Some(0.75);
            (vec![p], "particles")
        }
        "triple_dichotomy" => (
            vec![
                gaussian(8, 7.0 * PI, 0.0, 1e-5, 1.0, 106, 200),
                gaussian(8, 23.0 * PI, 0.0, 1e-5, 1.0, 1106, 200),
            ],
            "particles",
        ),
        "pair_collision" => (
            vec![
                gaussian(4, 4.0 * PI, 1e-2, 2.5e-6, 1.0, 107, 200),
                gaussian(4, 4.0 * PI, 1e-3, 2.5e-6, 1.0, 108, 200),
                gaussian(4, 4.0 * PI, 1e-4, 2.5e-6, 1.0, 109, 200),
            ],
            "particles",
        ),
        "cluster_coalescence" => (
            vec![
                gaussian(10, 16.0 * PI, 0.0, 1e-4, 2.0, 108, 200),
                gaussian(10, 48.0 * PI, 0.0, 1e-4, 2.0, 1108, 200),
            ],
            "clusters",
        ),
        "angular_uniformity" => (
            vec![pair_from(
                (0.0, 0.0),
                4.0 * PI,
                0.5 / 64.0,
                0.5,
                109,
                10_000,
            )],
            "pair-exact",
        ),
        "regime_table" => (
            [5.0, 6.5, 7.5, 10.0, 25.0]
                .iter()
                .map(|&c| gaussian(5, c * PI, 1e-3, 1e-3, 0.01, 110, 1))
                .collect(),
            "particles",
        ),
        other => bail!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ),
    };
    for p in &sweep.0 {
        p.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    Ok(sweep)
}

pub fn print_preset(name: &str) -> Result<()> {
    let (sweep, system) = preset(name)?;
    let text = if sweep.len() == 1 {
        serde_json::to_string_pretty(&sweep[0])?
    } else {
        serde_json::to_string_pretty(&sweep)?
    };
    println!("{text}");
    eprintln!("# run with: kslab simulate --config <file> --system {system}");
    Ok(())
}
