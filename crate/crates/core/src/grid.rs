//! Measure-versus-(row, time) grids shared by all dynamics.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{ChainSpec, Reduce};
use crate::measures::{self, MeasuredParty, XStateRdm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Concurrence,
    MutualInformation,
    Discord,
    Negativity,
    Tmi,
    /// `Re <s+_i s-_k>`.
    Hopping,
    /// `Re <s+_i s+_k>`.
    Pairing,
    /// `<sz_i sz_k>`.
    Zz,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::Concurrence,
        Measure::MutualInformation,
        Measure::Discord,
        Measure::Negativity,
        Measure::Tmi,
        Measure::Hopping,
        Measure::Pairing,
        Measure::Zz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Measure::Concurrence => "concurrence",
            Measure::MutualInformation => "mutual_information",
            Measure::Discord => "discord",
            Measure::Negativity => "negativity",
            Measure::Tmi => "tmi",
            Measure::Hopping => "hopping",
            Measure::Pairing => "pairing",
            Measure::Zz => "zz",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown measure `{s}`")))
    }
}

/// Two or three disjoint groups of chain sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Parties {
    Two(Vec<usize>, Vec<usize>),
    Three(Vec<usize>, Vec<usize>, Vec<usize>),
}

impl Parties {
    pub fn pair(a: usize, b: usize) -> Self {
        Parties::Two(vec![a], vec![b])
    }

    pub fn triple(a: usize, b: usize, c: usize) -> Self {
        Parties::Three(vec![a], vec![b], vec![c])
    }

    pub fn groups(&self) -> Vec<&[usize]> {
        match self {
            Parties::Two(a, b) => vec![a, b],
            Parties::Three(a, b, c) => vec![a, b, c],
        }
    }

    /// All sites, in group order.
    pub fn sites(&self) -> Vec<usize> {
        self.groups().into_iter().flatten().copied().collect()
    }

    /// File-name friendly label such as `2-1.3`.
    pub fn label(&self) -> String {
        self.groups()
            .iter()
            .map(|g| g.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("."))
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn check(&self, chain: &ChainSpec) -> Result<()> {
        let all = self.sites();
        chain.check_sites(&all)
    }
}

impl fmt::Display for Parties {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self
            .groups()
            .iter()
            .map(|g| g.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(":");
        f.write_str(&s)
    }
}

impl FromStr for Parties {
    type Err = Error;

    /// `1:2`, `2:1,3` or `1:2:3`.
    fn from_str(s: &str) -> Result<Self> {
        let groups = s
            .split(':')
            .map(|g| {
                g.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Config(format!("bad site `{x}` in parties `{s}`")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut it = groups.into_iter();
        match (it.next(), it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None, None) => Ok(Parties::Two(a, b)),
            (Some(a), Some(b), Some(c), None) => Ok(Parties::Three(a, b, c)),
            _ => Err(Error::Config(format!("parties `{s}` must have two or three groups"))),
        }
    }
}

fn single_pair(parties: &Parties, measure: Measure) -> Result<(usize, usize)> {
    match parties {
        Parties::Two(a, b) if a.len() == 1 && b.len() == 1 => Ok((a[0], b[0])),
        _ => Err(Error::unsupported(format!(
            "{measure} needs two single sites, got {parties}"
        ))),
    }
}

/// Evaluates one measure on the reduced state of `parties`.
pub fn evaluate<S: Reduce + ?Sized>(measure: Measure, parties: &Parties, state: &S) -> Result<f64> {
    match measure {
        Measure::Concurrence => {
            let (a, b) = single_pair(parties, measure)?;
            let rho = state.reduce(&[a, b])?;
            match XStateRdm::from_density(&rho) {
                Ok(x) => Ok(measures::concurrence_x(&x)),
                Err(_) => measures::concurrence(&rho),
            }
        }
        Measure::Discord => {
            let (a, b) = single_pair(parties, measure)?;
            measures::discord_of(&state.reduce(&[a, b])?, MeasuredParty::A)
        }
        Measure::Negativity => match parties {
            Parties::Two(a, b) => {
                let all: Vec<usize> = a.iter().chain(b).copied().collect();
                let rho = state.reduce(&all)?;
                if rho.dim() == 4 {
                    if let Ok(x) = XStateRdm::from_density(&rho) {
                        return Ok(measures::negativity_x(&x));
                    }
                }
                let local: Vec<usize> = (1..=a.len()).collect();
                measures::negativity(&rho, &local)
            }
            _ => Err(Error::unsupported("negativity needs a bipartition")),
        },
        Measure::MutualInformation => match parties {
            Parties::Two(a, b) => measures::mutual_information_of(state, a, b),
            _ => Err(Error::unsupported("mutual information needs two parties")),
        },
        Measure::Tmi => match parties {
            Parties::Three(a, b, c) => measures::tmi_of(state, a, b, c),
            _ => Err(Error::unsupported("tripartite mutual information needs three parties")),
        },
        Measure::Hopping | Measure::Pairing | Measure::Zz => {
            let (a, b) = single_pair(parties, measure)?;
            let rho = state.reduce(&[a, b])?;
            let m = rho.matrix();
            Ok(match measure {
                // first site is the high bit: |down up> is index 2
                Measure::Hopping => m[(2, 1)].re,
                Measure::Pairing => m[(3, 0)].re,
                _ => (m[(0, 0)] - m[(1, 1)] - m[(2, 2)] + m[(3, 3)]).re,
            })
        }
    }
}

/// A real matrix with labelled rows and columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(rows: Vec<f64>, cols: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows.len() * cols.len() {
            return Err(Error::Dimension {
                expected: rows.len() * cols.len(),
                found: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.cols.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows.len()).map(|r| self.get(r, col)).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute cell difference against a grid of the same shape.
    pub fn max_abs_diff(&self, other: &Grid) -> Result<f64> {
        if self.rows.len() != other.rows.len() || self.cols.len() != other.cols.len() {
            return Err(Error::Dimension {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// A time evolution that can hand out the state at any time.
pub trait Dynamics: Send + Sync {
    fn chain(&self) -> &ChainSpec;

    fn state_at(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>>;
}

/// Evaluates `measure` for every party group (rows, numbered from 1) and
/// every time (columns). Times are evaluated in parallel; the result does not
/// depend on scheduling.
pub fn measure_grid(dynamics: &dyn Dynamics, measure: Measure, parties: &[Parties], times: &[f64]) -> Result<Grid> {
    for p in parties {
        p.check(dynamics.chain())?;
    }
    let columns: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| {
            let state = dynamics.state_at(t)?;
            parties
                .iter()
                .map(|p| evaluate(measure, p, &*state))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(parties.len() * times.len());
    for r in 0..parties.len() {
        values.extend(columns.iter().map(|col| col[r]));
    }
    Grid::new((1..=parties.len()).map(|r| r as f64).collect(), times.to_vec(), values)
}

/// Nearest-neighbour pairs `(i, i+1)` for `i = 1..=last`.
pub fn nearest_neighbours(last: usize) -> Vec<Parties> {
    (1..=last).map(|i| Parties::pair(i, i + 1)).collect()
}

/// `n` equally spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
