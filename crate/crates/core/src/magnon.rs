//! Number-conserving dynamics: one- and two-magnon Heisenberg propagators and
//! the kicked Harper stroboscopic map.
//!
//! The Heisenberg chain is `H = -J sum_j (sx sx + sy sy + Delta sz sz)` on
//! nearest-neighbour bonds, so a down spin hops with amplitude `-2J` and each
//! bond contributes `-J Delta s_j s_{j+1}` on the diagonal.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Dynamics;
use crate::hilbert::{self, ChainSpec, Reduce, Sector, SectorAmplitudes};
use crate::linalg::{self, c, C64, ZERO};

/// Largest chain for which the two-magnon sector is diagonalized densely.
pub const MAX_TWO_MAGNON_SITES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergParams {
    pub j: f64,
    pub delta: f64,
}

impl HeisenbergParams {
    pub fn new(j: f64, delta: f64) -> Result<Self> {
        if j == 0.0 || !j.is_finite() || !delta.is_finite() {
            return Err(Error::domain(format!(
                "need finite J != 0 and finite Delta, got ({j}, {delta})"
            )));
        }
        Ok(Self { j, delta })
    }
}

impl Default for HeisenbergParams {
    fn default() -> Self {
        Self { j: 1.0, delta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarperParams {
    pub g: f64,
    pub tau: f64,
    pub eta: i64,
}

impl HarperParams {
    pub fn new(g: f64, tau: f64, eta: i64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || !g.is_finite() {
            return Err(Error::domain(format!(
                "need tau > 0 and finite g, got tau = {tau}, g = {g}"
            )));
        }
        Ok(Self { g, tau, eta })
    }

    /// Number of kicks applied up to time `t`.
    pub fn kicks_at(&self, t: f64) -> i64 {
        (t / self.tau).round() as i64
    }
}

/// One-magnon propagator: `entry(x, x0)` is the amplitude to find the down
/// spin at `x` at time `t` having started at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable {
    chain: ChainSpec,
    t: f64,
    entries: DMatrix<C64>,
}

impl GreenTable {
    pub fn identity(chain: ChainSpec) -> Self {
        let n = chain.n_sites();
        Self {
            chain,
            t: 0.0,
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn from_entries(chain: ChainSpec, t: f64, entries: DMatrix<C64>) -> Result<Self> {
        let n = chain.n_sites();
        if entries.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: n,
                found: entries.nrows(),
            });
        }
        Ok(Self { chain, t, entries })
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    #[inline]
    pub fn entry(&self, x: usize, x0: usize) -> C64 {
        self.entries[(x - 1, x0 - 1)]
    }

    /// Propagates one-magnon amplitudes.
    pub fn apply(&self, amps: &[C64]) -> Vec<C64> {
        let v = &self.entries * linalg::to_vector(amps);
        v.iter().copied().collect()
    }

    /// `later` after `self`.
    pub fn then(&self, later: &GreenTable) -> GreenTable {
        GreenTable {
            chain: self.chain,
            t: self.t + later.t,
            entries: &later.entries * &self.entries,
        }
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.entries)
    }
}

/// Energy of the all-up state, `-N J Delta`.
pub fn vacuum_energy(chain: &ChainSpec, params: &HeisenbergParams) -> f64 {
    -(chain.n_sites() as f64) * params.j * params.delta
}

/// One-magnon band `eps0 + 4 J Delta - 4 J cos p`.
pub fn one_magnon_energy(chain: &ChainSpec, params: &HeisenbergParams, p: f64) -> f64 {
    vacuum_energy(chain, params) + 4.0 * params.j * params.delta - 4.0 * params.j * p.cos()
}

/// Allowed momenta `2 pi I / N`, `I = 1..=N`.
pub fn momenta(chain: &ChainSpec) -> Vec<f64> {
    let n = chain.n_sites();
    (1..=n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// `G^x_{x0}(t) = (1/N) sum_p exp(i p (x - x0)) exp(-i eps1(p) t)`.
pub fn one_magnon_propagator(chain: &ChainSpec, params: &HeisenbergParams, t: f64) -> GreenTable {
    let n = chain.n_sites();
    let ps = momenta(chain);
    let phases: Vec<C64> = ps
        .iter()
        .map(|&p| C64::from_polar(1.0, -one_magnon_energy(chain, params, p) * t))
        .collect();
    let circ: Vec<C64> = (0..n)
        .map(|d| {
            ps.iter()
                .zip(&phases)
                .map(|(&p, ph)| C64::from_polar(1.0, p * d as f64) * ph)
                .sum::<C64>()
                / n as f64
        })
        .collect();
    let entries = DMatrix::from_fn(n, n, |x, x0| circ[(x + n - x0) % n]);
    GreenTable {
        chain: *chain,
        t,
        entries,
    }
}

fn check_pair_coefficients(alpha: C64, beta: C64) -> Result<()> {
    let norm_sqr = alpha.norm_sqr() + beta.norm_sqr();
    if (norm_sqr - 1.0).abs() > hilbert::NORM_SLOP {
        return Err(Error::Normalization {
            norm_sqr,
            tolerance: hilbert::NORM_SLOP,
        });
    }
    Ok(())
}

/// `alpha |10..0> + beta |010..0>` as one-magnon amplitudes.
pub fn one_magnon_pair_state(chain: ChainSpec, alpha: C64, beta: C64) -> Result<SectorAmplitudes> {
    check_pair_coefficients(alpha, beta)?;
    let mut amps = vec![ZERO; chain.n_sites()];
    amps[0] = alpha;
    amps[1] = beta;
    SectorAmplitudes::new(chain, Sector::OneMagnon, amps)
}

/// `alpha |00..0> + beta |110..0>` as vacuum-plus-two-magnon amplitudes.
pub fn vacuum_two_magnon_pair_state(chain: ChainSpec, alpha: C64, beta: C64) -> Result<SectorAmplitudes> {
    check_pair_coefficients(alpha, beta)?;
    let n = chain.n_sites();
    let mut amps = vec![ZERO; Sector::VacuumPlusTwoMagnon.dim(n)];
    amps[0] = alpha;
    amps[1 + hilbert::pair_index(1, 2, n)] = beta;
    SectorAmplitudes::new(chain, Sector::VacuumPlusTwoMagnon, amps)
}

/// `Omega^x(t) = alpha G^x_1(t) + beta G^x_2(t)`.
pub fn evolve_one_magnon(
    alpha: C64,
    beta: C64,
    chain: &ChainSpec,
    params: &HeisenbergParams,
    t: f64,
) -> Result<SectorAmplitudes> {
    let initial = one_magnon_pair_state(*chain, alpha, beta)?;
    let g = one_magnon_propagator(chain, params, t);
    SectorAmplitudes::new(*chain, Sector::OneMagnon, g.apply(initial.amplitudes()))
}

/// A one-magnon time evolution usable by the process engine.
pub trait OneMagnonPropagator: Send + Sync {
    fn chain(&self) -> &ChainSpec;

    /// Propagator carrying amplitudes from time `from` to time `to`.
    fn green_between(&self, from: f64, to: f64) -> Result<GreenTable>;

    fn evolve_between(&self, amps: &[C64], from: f64, to: f64) -> Result<Vec<C64>> {
        Ok(self.green_between(from, to)?.apply(amps))
    }
}

/// Heisenberg one-magnon propagation.
#[derive(Debug, Clone, Copy)]
pub struct HeisenbergOneMagnon {
    pub chain: ChainSpec,
    pub params: HeisenbergParams,
}

impl OneMagnonPropagator for HeisenbergOneMagnon {
    fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    fn green_between(&self, from: f64, to: f64) -> Result<GreenTable> {
        Ok(one_magnon_propagator(&self.chain, &self.params, to - from))
    }
}

/// Two-magnon propagator over pairs in [`hilbert::pair_index`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMagnonGreenTable {
    pub chain: ChainSpec,
    pub params: HeisenbergParams,
    pub t: f64,
    pub entries: DMatrix<C64>,
}

impl TwoMagnonGreenTable {
    /// Amplitude to go from the pair `(y1, y2)` to the pair `(x1, x2)`.
    pub fn entry(&self, x: (usize, usize), y: (usize, usize)) -> C64 {
        let n = self.chain.n_sites();
        self.entries[(hilbert::pair_index(x.0, x.1, n), hilbert::pair_index(y.0, y.1, n))]
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.entries)
    }
}

/// Diagonalized two-magnon block of the Heisenberg Hamiltonian.
#[derive(Debug, Clone)]
pub struct TwoMagnonSector {
    chain: ChainSpec,
    params: HeisenbergParams,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// The Heisenberg Hamiltonian restricted to two down spins.
pub fn two_magnon_hamiltonian(chain: &ChainSpec, params: &HeisenbergParams) -> Result<DMatrix<f64>> {
    let n = chain.n_sites();
    if n > MAX_TWO_MAGNON_SITES {
        return Err(Error::SizeLimit {
            what: "two-magnon sector (sites)",
            requested: n,
            limit: MAX_TWO_MAGNON_SITES,
        });
    }
    let pairs = hilbert::pairs(n);
    let dim = pairs.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let prev = |s: usize| if s == 1 { n } else { s - 1 };
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let down = |s: usize| s == a || s == b;
        let zz: f64 = chain
            .bonds()
            .map(|(i, j)| if down(i) == down(j) { 1.0 } else { -1.0 })
            .sum();
        h[(k, k)] = -params.j * params.delta * zz;
        for (s, other) in [(a, b), (b, a)] {
            for nb in [prev(s), chain.next(s)] {
                if !down(nb) {
                    h[(hilbert::pair_index(other, nb, n), k)] += -2.0 * params.j;
                }
            }
        }
    }
    Ok(h)
}

impl TwoMagnonSector {
    pub fn new(chain: &ChainSpec, params: &HeisenbergParams) -> Result<Self> {
        let h = two_magnon_hamiltonian(chain, params)?;
        let (values, vectors) = linalg::symmetric_eigen(h);
        Ok(Self {
            chain: *chain,
            params: *params,
            values,
            vectors,
        })
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn params(&self) -> &HeisenbergParams {
        &self.params
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn propagator(&self, t: f64) -> TwoMagnonGreenTable {
        TwoMagnonGreenTable {
            chain: self.chain,
            params: self.params,
            t,
            entries: linalg::spectral_propagator(&self.values, &self.vectors, t),
        }
    }

    /// Propagates pair amplitudes by `t` without forming the full propagator.
    pub fn evolve(&self, pair_amps: &[C64], t: f64) -> Vec<C64> {
        let mut coeffs = linalg::real_transpose_mul(&self.vectors, pair_amps);
        for (z, &l) in coeffs.iter_mut().zip(&self.values) {
            *z *= C64::from_polar(1.0, -l * t);
        }
        linalg::real_mul(&self.vectors, &coeffs)
    }

    /// Propagates a vacuum-plus-two-magnon state by `t`.
    pub fn evolve_state(&self, state: &SectorAmplitudes, t: f64) -> Result<SectorAmplitudes> {
        if state.sector() != Sector::VacuumPlusTwoMagnon || state.chain() != &self.chain {
            return Err(Error::domain("state does not live in this two-magnon sector"));
        }
        let amps = state.amplitudes();
        let mut out = Vec::with_capacity(amps.len());
        out.push(amps[0] * C64::from_polar(1.0, -vacuum_energy(&self.chain, &self.params) * t));
        out.extend(self.evolve(&amps[1..], t));
        SectorAmplitudes::new(self.chain, Sector::VacuumPlusTwoMagnon, out)
    }
}

pub fn two_magnon_propagator(chain: &ChainSpec, params: &HeisenbergParams, t: f64) -> Result<TwoMagnonGreenTable> {
    Ok(TwoMagnonSector::new(chain, params)?.propagator(t))
}

/// `alpha e^{-i eps0 t} |00..0> + beta sum G^{x1 x2}_{12}(t) |x1 x2>`.
pub fn evolve_vacuum_two_magnon(
    alpha: C64,
    beta: C64,
    chain: &ChainSpec,
    params: &HeisenbergParams,
    t: f64,
) -> Result<SectorAmplitudes> {
    let initial = vacuum_two_magnon_pair_state(*chain, alpha, beta)?;
    TwoMagnonSector::new(chain, params)?.evolve_state(&initial, t)
}

/// Diagonal of the kick factor `exp(-i tau g sum_j cos(2 pi eta j / N) sz_j)`
/// on the one-magnon states.
pub fn harper_kick_phases(chain: &ChainSpec, params: &HarperParams) -> Vec<C64> {
    let n = chain.n_sites();
    let field = |j: usize| (2.0 * PI * params.eta as f64 * j as f64 / n as f64).cos();
    let total: f64 = (1..=n).map(field).sum();
    (1..=n)
        .map(|x| C64::from_polar(1.0, -params.tau * params.g * (total - 2.0 * field(x))))
        .collect()
}

/// Parameters of the hopping term shared with the Heisenberg chain:
/// `-1/2 (sx sx + sy sy)` is the Heisenberg chain at `J = 1/2`, `Delta = 0`.
pub const HARPER_HOPPING: HeisenbergParams = HeisenbergParams { j: 0.5, delta: 0.0 };

/// One stroboscopic period: the kick, then free hopping for `tau`.
pub fn harper_step(chain: &ChainSpec, params: &HarperParams) -> GreenTable {
    let hop = one_magnon_propagator(chain, &HARPER_HOPPING, params.tau);
    let kick = harper_kick_phases(chain, params);
    let n = chain.n_sites();
    let entries = DMatrix::from_fn(n, n, |x, x0| hop.entries[(x, x0)] * kick[x0]);
    GreenTable {
        chain: *chain,
        t: params.tau,
        entries,
    }
}

/// The kicked Harper map on the one-magnon sector.
#[derive(Debug, Clone)]
pub struct HarperMap {
    chain: ChainSpec,
    params: HarperParams,
    step: GreenTable,
    inverse: DMatrix<C64>,
}

impl HarperMap {
    pub fn new(chain: &ChainSpec, params: &HarperParams) -> Self {
        let step = harper_step(chain, params);
        let inverse = step.entries.adjoint();
        Self {
            chain: *chain,
            params: *params,
            step,
            inverse,
        }
    }

    pub fn params(&self) -> &HarperParams {
        &self.params
    }

    pub fn step(&self) -> &GreenTable {
        &self.step
    }

    /// Applies `n` periods (or `|n|` inverse periods for negative `n`).
    pub fn kick(&self, amps: &[C64], n: i64) -> Vec<C64> {
        let m = if n >= 0 { &self.step.entries } else { &self.inverse };
        let mut v = linalg::to_vector(amps);
        for _ in 0..n.unsigned_abs() {
            v = m * v;
        }
        v.iter().copied().collect()
    }

    /// Composite Green function after `n` kicks.
    pub fn composite(&self, n: u32) -> GreenTable {
        let mut acc = GreenTable::identity(self.chain);
        for _ in 0..n {
            acc = acc.then(&self.step);
        }
        acc
    }
}

impl OneMagnonPropagator for HarperMap {
    fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    fn green_between(&self, from: f64, to: f64) -> Result<GreenTable> {
        let n = self.params.kicks_at(to) - self.params.kicks_at(from);
        let entries = if n >= 0 {
            self.composite(n as u32).entries
        } else {
            self.composite((-n) as u32).entries.adjoint()
        };
        GreenTable::from_entries(self.chain, to - from, entries)
    }

    fn evolve_between(&self, amps: &[C64], from: f64, to: f64) -> Result<Vec<C64>> {
        Ok(self.kick(amps, self.params.kicks_at(to) - self.params.kicks_at(from)))
    }
}

/// A one-magnon state evolved by any one-magnon propagator.
pub struct OneMagnonDynamics<P> {
    propagator: P,
    initial: SectorAmplitudes,
}

impl<P: OneMagnonPropagator> OneMagnonDynamics<P> {
    pub fn new(propagator: P, initial: SectorAmplitudes) -> Result<Self> {
        if initial.sector() != Sector::OneMagnon || initial.chain() != propagator.chain() {
            return Err(Error::domain(
                "initial state must be one-magnon on the propagator's chain",
            ));
        }
        Ok(Self { propagator, initial })
    }

    pub fn propagator(&self) -> &P {
        &self.propagator
    }

    pub fn initial(&self) -> &SectorAmplitudes {
        &self.initial
    }

    pub fn amplitudes_at(&self, t: f64) -> Result<SectorAmplitudes> {
        let amps = self.propagator.evolve_between(self.initial.amplitudes(), 0.0, t)?;
        SectorAmplitudes::new(*self.propagator.chain(), Sector::OneMagnon, amps)
    }
}

impl<P: OneMagnonPropagator> Dynamics for OneMagnonDynamics<P> {
    fn chain(&self) -> &ChainSpec {
        self.propagator.chain()
    }

    fn state_at(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.amplitudes_at(t)?))
    }
}

/// A vacuum-plus-two-magnon state under Heisenberg evolution.
pub struct TwoMagnonDynamics {
    sector: Arc<TwoMagnonSector>,
    initial: SectorAmplitudes,
}

impl TwoMagnonDynamics {
    pub fn new(sector: Arc<TwoMagnonSector>, initial: SectorAmplitudes) -> Result<Self> {
        if initial.sector() != Sector::VacuumPlusTwoMagnon || initial.chain() != sector.chain() {
            return Err(Error::domain(
                "initial state must be vacuum-plus-two-magnon on the sector's chain",
            ));
        }
        Ok(Self { sector, initial })
    }

    pub fn sector(&self) -> &Arc<TwoMagnonSector> {
        &self.sector
    }

    pub fn amplitudes_at(&self, t: f64) -> Result<SectorAmplitudes> {
        self.sector.evolve_state(&self.initial, t)
    }
}

impl Dynamics for TwoMagnonDynamics {
    fn chain(&self) -> &ChainSpec {
        self.sector.chain()
    }

    fn state_at(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.amplitudes_at(t)?))
    }
}

/// Real-space hopping matrix of a single down spin, used as an independent
/// check on the momentum-sum propagator.
pub fn one_magnon_hamiltonian(chain: &ChainSpec, params: &HeisenbergParams) -> DMatrix<C64> {
    let n = chain.n_sites();
    let diag = vacuum_energy(chain, params) + 4.0 * params.j * params.delta;
    let mut h = DMatrix::from_diagonal_element(n, n, c(diag, 0.0));
    for (a, b) in chain.bonds() {
        h[(a - 1, b - 1)] += c(-2.0 * params.j, 0.0);
        h[(b - 1, a - 1)] += c(-2.0 * params.j, 0.0);
    }
    h
}
