//! Analytic paths against the exact pipeline on sampled inputs.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ed::{self, Model};
use crate::error::Result;
use crate::fermion::{XYDynamics, XYParams};
use crate::hilbert::{ChainSpec, Reduce};
use crate::linalg::{self, c, C64};
use crate::magnon::{self, HarperMap, HarperParams, HeisenbergOneMagnon, HeisenbergParams, TwoMagnonSector};
use crate::qdp::{self, ExactProcess, QdpSpec, XHeisenbergProcess, ZOneMagnonProcess};

/// Samples drawn per check.
pub const SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub samples: usize,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<24} samples={:<3} max_abs_diff={:.3e} tol={:.0e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.max_abs_diff,
            self.tolerance
        )
    }
}

/// Options for [`run`]. `tolerance` overrides every per-check default.
#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    pub n_sites: usize,
    pub tolerance: Option<f64>,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            n_sites: 8,
            tolerance: None,
            seed: 7,
        }
    }
}

fn pair_coefficients(rng: &mut ChaCha8Rng) -> (C64, C64) {
    let theta = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    (c(theta.cos(), 0.0), C64::from_polar(theta.sin(), phi))
}

/// Every single site, every nearest-neighbour pair, `(1, 3)` and `(1, 2, 3)`.
fn site_sets(n: usize, with_far: bool) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (1..=n).map(|j| vec![j]).collect();
    sets.extend((1..n).map(|j| vec![j, j + 1]));
    if with_far {
        sets.push(vec![1, 3]);
        sets.push(vec![1, 2, 3]);
    }
    sets
}

fn rdm_gap(a: &dyn Reduce, b: &dyn Reduce, sets: &[Vec<usize>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in sets {
        worst = worst.max(linalg::max_abs_diff(a.reduce(s)?.matrix(), b.reduce(s)?.matrix()));
    }
    Ok(worst)
}

struct Check {
    name: &'static str,
    tolerance: f64,
    run: fn(&ChainSpec, &mut ChaCha8Rng) -> Result<f64>,
}

fn one_magnon(ch: &ChainSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    let delta = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];
    let p = HeisenbergParams::new(1.0, delta)?;
    let u = ed::propagator(&Model::Heisenberg(p), ch)?;
    let (a, b) = pair_coefficients(rng);
    let t = rng.random_range(0.0..5.0);
    let analytic = magnon::evolve_one_magnon(a, b, ch, &p, t)?.to_pure_state()?;
    let exact = u.evolve(&ed::pair_state(ch, a, b)?, t)?;
    Ok(analytic
        .amplitudes()
        .iter()
        .zip(exact.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

fn two_magnon(ch: &ChainSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    let delta = [-1.0, 0.0, 0.5, 1.0, 2.0][rng.random_range(0..5)];
    let p = HeisenbergParams::new(1.0, delta)?;
    let u = ed::propagator(&Model::Heisenberg(p), ch)?;
    let (a, b) = pair_coefficients(rng);
    let t = rng.random_range(0.0..5.0);
    let analytic = magnon::evolve_vacuum_two_magnon(a, b, ch, &p, t)?;
    let exact = u.evolve(&ed::vacuum_pair_state(ch, a, b)?, t)?;
    rdm_gap(&analytic, &exact, &site_sets(ch.n_sites(), true))
}

fn xy(ch: &ChainSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    let p = [
        XYParams::new(0.7, 0.3, 0.1)?,
        XYParams::new(0.7, 0.3, 1.0)?,
        XYParams::new(0.7, 0.3, 10.0)?,
        XYParams::ising(0.5),
    ][rng.random_range(0..4)];
    let u = ed::propagator(&Model::Xy(p), ch)?;
    let (a, b) = pair_coefficients(rng);
    let t = rng.random_range(0.0..5.0);
    let analytic = XYDynamics::new(*ch, p, a, b).state(t)?;
    let exact = u.evolve(&ed::pair_state(ch, a, b)?, t)?;
    rdm_gap(&analytic, &exact, &site_sets(ch.n_sites(), false))
}

fn harper(ch: &ChainSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    let p = [HarperParams::new(0.1, 0.1, 1)?, HarperParams::new(1.0, 0.9, 1)?][rng.random_range(0..2)];
    let u = ed::propagator(&Model::Harper(p), ch)?;
    let (a, b) = pair_coefficients(rng);
    let t = p.tau * rng.random_range(0..60) as f64;
    let map = HarperMap::new(ch, &p);
    let initial = magnon::one_magnon_pair_state(*ch, a, b)?;
    let analytic = crate::hilbert::SectorAmplitudes::new(
        *ch,
        crate::hilbert::Sector::OneMagnon,
        map.kick(initial.amplitudes(), p.kicks_at(t)),
    )?;
    let exact = u.evolve(&ed::pair_state(ch, a, b)?, t)?;
    rdm_gap(&analytic, &exact, &site_sets(ch.n_sites(), true))
}

fn epochs(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let t0 = rng.random_range(0.0..3.0);
    (t0, t0 + rng.random_range(0.0..3.0))
}

fn z_qdp(ch: &ChainSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    let p = HeisenbergParams::new(1.0, [0.0, 1.0, 2.0][rng.random_range(0..3)])?;
    let (a, b) = pair_coefficients(rng);
    let site = rng.random_range(1..=ch.n_sites());
    let (t0, t) = epochs(rng);
    let analytic = ZOneMagnonProcess::new(
        HeisenbergOneMagnon { chain: *ch, params: p },
        magnon::one_magnon_pair_state(*ch, a, b)?,
        site,
    )?;
    let exact = ExactProcess::new(
        ed::propagator(&Model::Heisenberg(p), ch)?,
        ed::pair_state(ch, a, b)?,
        QdpSpec::projective(site, 0.0, qdp::Z_AXIS)?,
    )?;
    rdm_gap(
        &analytic.intervened_state(t0, t)?,
        &exact.intervened_state(t0, t)?,
        &site_sets(ch.n_sites(), true),
    )
}

fn x_qdp(ch: &ChainSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    let p = HeisenbergParams::new(1.0, [0.0, 1.0, 2.0][rng.random_range(0..3)])?;
    let (a, b) = pair_coefficients(rng);
    let site = rng.random_range(1..=ch.n_sites());
    let (t0, t) = epochs(rng);
    let sector = Arc::new(TwoMagnonSector::new(ch, &p)?);
    let analytic = XHeisenbergProcess::new(sector, magnon::one_magnon_pair_state(*ch, a, b)?, site)?;
    let exact = ExactProcess::new(
        ed::propagator(&Model::Heisenberg(p), ch)?,
        ed::pair_state(ch, a, b)?,
        QdpSpec::projective(site, 0.0, qdp::X_AXIS)?,
    )?;
    rdm_gap(
        &analytic.intervened_state(t0, t)?,
        &exact.intervened_state(t0, t)?,
        &site_sets(ch.n_sites(), true),
    )
}

const CHECKS: [Check; 6] = [
    Check {
        name: "one_magnon_green",
        tolerance: 1e-10,
        run: one_magnon,
    },
    Check {
        name: "two_magnon_rdm",
        tolerance: 1e-8,
        run: two_magnon,
    },
    Check {
        name: "xy_nn_rdm",
        tolerance: 1e-8,
        run: xy,
    },
    Check {
        name: "harper_composite",
        tolerance: 1e-10,
        run: harper,
    },
    Check {
        name: "z_qdp_kh",
        tolerance: 1e-10,
        run: z_qdp,
    },
    Check {
        name: "x_qdp_l_formula",
        tolerance: 1e-8,
        run: x_qdp,
    },
];

/// Runs every check with [`SAMPLES`] seeded samples each.
pub fn run(options: &ValidateOptions) -> Result<Vec<OracleCheck>> {
    let ch = ChainSpec::periodic(options.n_sites)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    CHECKS
        .iter()
        .map(|check| {
            let mut worst: f64 = 0.0;
            for _ in 0..SAMPLES {
                let d = (check.run)(&ch, &mut rng)?;
                worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
            }
            let tolerance = options.tolerance.unwrap_or(check.tolerance);
            Ok(OracleCheck {
                name: check.name,
                samples: SAMPLES,
                max_abs_diff: worst,
                tolerance,
                pass: worst < tolerance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_chain_passes() {
        let report = run(&ValidateOptions {
            n_sites: 6,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(report.len(), 6);
        for r in &report {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn tolerance_override() {
        let report = run(&ValidateOptions {
            n_sites: 5,
            tolerance: Some(0.0),
            seed: 1,
        })
        .unwrap();
        assert!(report.iter().all(|r| r.tolerance == 0.0 && !r.pass));
    }
}
