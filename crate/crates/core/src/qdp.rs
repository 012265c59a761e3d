//! Instantaneous local processes that interrupt the background evolution:
//! projective measurements and unitary kicks on one site at an epoch `t0`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed::ExactPropagator;
use crate::error::{Error, Result};
use crate::grid::{evaluate, Grid, Measure, Parties};
use crate::hilbert::{self, ChainSpec, DensityMatrix, Mixture, PureState, Reduce, Sector, SectorAmplitudes};
use crate::linalg::{self, c, C64, ZERO};
use crate::magnon::{HeisenbergOneMagnon, HeisenbergParams, OneMagnonPropagator, TwoMagnonSector};
use crate::measures::XStateRdm;

/// Tolerance on `|n| = 1` and on `|gamma|^2 + |delta|^2 = 1`.
pub const UNIT_TOL: f64 = 1e-12;

/// Branches lighter than this are dropped instead of renormalized.
const EMPTY_BRANCH: f64 = 1e-28;

pub type Qubit = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QdpKind {
    /// Measurement of `sigma . n`.
    Projective { axis: [f64; 3] },
    /// `V|0> = gamma|0> + delta|1>`, `V|1> = -conj(delta)|0> + conj(gamma)|1>`.
    Kick { gamma: [f64; 2], delta: [f64; 2] },
    /// Kick with `gamma = cos t0`, `delta = (n_y + i n_x) sin t0`.
    EpochKick { axis: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdpSpec {
    pub site: usize,
    pub t0: f64,
    pub kind: QdpKind,
}

fn check_axis(axis: [f64; 3]) -> Result<()> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::Normalization {
            norm_sqr: norm * norm,
            tolerance: UNIT_TOL,
        });
    }
    Ok(())
}

fn check_kick(gamma: C64, delta: C64) -> Result<()> {
    let n = gamma.norm_sqr() + delta.norm_sqr();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Normalization {
            norm_sqr: n,
            tolerance: UNIT_TOL,
        });
    }
    Ok(())
}

impl QdpSpec {
    pub fn new(site: usize, t0: f64, kind: QdpKind) -> Result<Self> {
        if site == 0 {
            return Err(Error::domain("sites are numbered from 1"));
        }
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::domain(format!(
                "epoch must be finite and non-negative, got {t0}"
            )));
        }
        match kind {
            QdpKind::Projective { axis } | QdpKind::EpochKick { axis } => check_axis(axis)?,
            QdpKind::Kick { gamma, delta } => check_kick(c(gamma[0], gamma[1]), c(delta[0], delta[1]))?,
        }
        Ok(Self { site, t0, kind })
    }

    pub fn projective(site: usize, t0: f64, axis: [f64; 3]) -> Result<Self> {
        Self::new(site, t0, QdpKind::Projective { axis })
    }

    pub fn kick(site: usize, t0: f64, gamma: C64, delta: C64) -> Result<Self> {
        Self::new(
            site,
            t0,
            QdpKind::Kick {
                gamma: [gamma.re, gamma.im],
                delta: [delta.re, delta.im],
            },
        )
    }

    pub fn epoch_kick(site: usize, t0: f64, axis: [f64; 3]) -> Result<Self> {
        Self::new(site, t0, QdpKind::EpochKick { axis })
    }

    /// Same process at another epoch.
    pub fn at_epoch(&self, t0: f64) -> Result<Self> {
        Self::new(self.site, t0, self.kind)
    }

    fn operation(&self) -> Operation {
        match self.kind {
            QdpKind::Projective { axis } => Operation::Kraus(kraus_operators(axis)),
            QdpKind::Kick { gamma, delta } => {
                Operation::Unitary(kick_operator(c(gamma[0], gamma[1]), c(delta[0], delta[1])))
            }
            QdpKind::EpochKick { axis } => {
                let (g, d) = epoch_kick_amplitudes(self.t0, axis);
                Operation::Unitary(kick_operator(g, d))
            }
        }
    }
}

enum Operation {
    Kraus([Qubit; 2]),
    Unitary(Qubit),
}

pub const X_AXIS: [f64; 3] = [1.0, 0.0, 0.0];
pub const Z_AXIS: [f64; 3] = [0.0, 0.0, 1.0];

/// `sigma . n` in the (up, down) basis.
pub fn sigma_dot(axis: [f64; 3]) -> Qubit {
    let [x, y, z] = axis;
    [[c(z, 0.0), c(x, -y)], [c(x, y), c(-z, 0.0)]]
}

/// `P0 = (1 + sigma . n) / 2`, `P1 = (1 - sigma . n) / 2`.
pub fn kraus_operators(axis: [f64; 3]) -> [Qubit; 2] {
    let s = sigma_dot(axis);
    let half = |sign: f64| {
        let mut p = [[ZERO; 2]; 2];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                let id = if i == j { 1.0 } else { 0.0 };
                *e = (c(id, 0.0) + s[i][j] * sign) * 0.5;
            }
        }
        p
    };
    [half(1.0), half(-1.0)]
}

fn qubit_mul(a: &Qubit, b: &Qubit) -> Qubit {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn qubit_adjoint(a: &Qubit) -> Qubit {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `max |sum_k P_k^dagger P_k - 1|`.
pub fn kraus_completeness_defect(ops: &[Qubit]) -> f64 {
    let mut sum = [[ZERO; 2]; 2];
    for p in ops {
        let m = qubit_mul(&qubit_adjoint(p), p);
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += m[i][j];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (i, row) in sum.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((e - id).norm());
        }
    }
    worst
}

/// Columns are the images of `|0>` and `|1>`.
pub fn kick_operator(gamma: C64, delta: C64) -> Qubit {
    [[gamma, -delta.conj()], [delta, gamma.conj()]]
}

pub fn epoch_kick_amplitudes(t0: f64, axis: [f64; 3]) -> (C64, C64) {
    (c(t0.cos(), 0.0), c(axis[1], axis[0]) * t0.sin())
}

fn qubit_mask(n_qubits: usize, site: usize) -> Result<usize> {
    if site == 0 || site > n_qubits {
        return Err(Error::domain(format!("site {site} outside 1..={n_qubits}")));
    }
    Ok(1 << (n_qubits - site))
}

fn left_apply(m: &DMatrix<C64>, mask: usize, op: Qubit) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    for col in 0..m.ncols() {
        let v: Vec<C64> = m.column(col).iter().copied().collect();
        for (r, z) in linalg::apply_qubit_operator(&v, mask, op).into_iter().enumerate() {
            out[(r, col)] = z;
        }
    }
    out
}

fn conjugate_by(rho: &DMatrix<C64>, mask: usize, op: Qubit) -> DMatrix<C64> {
    left_apply(&left_apply(rho, mask, op).adjoint(), mask, op).adjoint()
}

/// `P0 rho P0 + P1 rho P1` on qubit `site` of `rho`.
pub fn apply_projective(rho: &DensityMatrix, site: usize, axis: [f64; 3]) -> Result<DensityMatrix> {
    check_axis(axis)?;
    let mask = qubit_mask(rho.n_qubits(), site)?;
    let [p0, p1] = kraus_operators(axis);
    DensityMatrix::new(conjugate_by(rho.matrix(), mask, p0) + conjugate_by(rho.matrix(), mask, p1))
}

pub fn apply_unitary_kick(psi: &PureState, site: usize, gamma: C64, delta: C64) -> Result<PureState> {
    check_kick(gamma, delta)?;
    psi.chain().check_site(site)?;
    let v = linalg::apply_qubit_operator(
        psi.amplitudes(),
        psi.chain().site_mask(site),
        kick_operator(gamma, delta),
    );
    PureState::new(*psi.chain(), v)
}

pub fn apply_unitary_kick_density(rho: &DensityMatrix, site: usize, gamma: C64, delta: C64) -> Result<DensityMatrix> {
    check_kick(gamma, delta)?;
    let mask = qubit_mask(rho.n_qubits(), site)?;
    DensityMatrix::new(conjugate_by(rho.matrix(), mask, kick_operator(gamma, delta)))
}

/// Normalized outcome branches `P_k psi / |P_k psi|` with Born weights.
pub fn projective_branches(psi: &PureState, site: usize, axis: [f64; 3]) -> Result<Vec<(f64, PureState)>> {
    check_axis(axis)?;
    psi.chain().check_site(site)?;
    let mask = psi.chain().site_mask(site);
    let mut out = Vec::with_capacity(2);
    for p in kraus_operators(axis) {
        let v = linalg::apply_qubit_operator(psi.amplitudes(), mask, p);
        let w = linalg::norm_sqr(&v);
        if w > EMPTY_BRANCH {
            let s = w.sqrt();
            out.push((w, PureState::new(*psi.chain(), v.into_iter().map(|z| z / s).collect())?));
        }
    }
    Ok(out)
}

/// A background evolution with and without the intervention.
pub trait Process: Send + Sync {
    fn chain(&self) -> &ChainSpec;

    fn background(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>>;

    /// State at `t` for an intervention at `t0`; the background for `t < t0`.
    fn intervened(&self, t0: f64, t: f64) -> Result<Box<dyn Reduce + Send + Sync>>;

    /// States at every `t` in `times` for one epoch.
    fn intervened_row(&self, t0: f64, times: &[f64]) -> Result<Vec<Box<dyn Reduce + Send + Sync>>> {
        times.iter().map(|&t| self.intervened(t0, t)).collect()
    }
}

/// The three-step pipeline on the full state: evolve to `t0`, apply the
/// process, evolve to `t`.
pub struct ExactProcess {
    propagator: Arc<ExactPropagator>,
    initial: PureState,
    spec: QdpSpec,
}

impl ExactProcess {
    pub fn new(propagator: Arc<ExactPropagator>, initial: PureState, spec: QdpSpec) -> Result<Self> {
        initial.chain().check_site(spec.site)?;
        if initial.chain() != propagator.chain() {
            return Err(Error::domain("initial state and propagator live on different chains"));
        }
        Ok(Self {
            propagator,
            initial,
            spec,
        })
    }

    pub fn spec(&self) -> &QdpSpec {
        &self.spec
    }

    pub fn background_state(&self, t: f64) -> Result<PureState> {
        self.propagator.evolve(&self.initial, t)
    }

    /// State right after the process at `t0`, as weighted branches.
    pub fn after_process(&self, t0: f64) -> Result<Mixture<PureState>> {
        let spec = self.spec.at_epoch(t0)?;
        let at = self.propagator.evolve(&self.initial, t0)?;
        match spec.operation() {
            Operation::Kraus(ops) => {
                let mask = at.chain().site_mask(spec.site);
                let mut branches = Vec::with_capacity(2);
                for p in ops {
                    let v = linalg::apply_qubit_operator(at.amplitudes(), mask, p);
                    let w = linalg::norm_sqr(&v);
                    if w > EMPTY_BRANCH {
                        let s = w.sqrt();
                        branches.push((w, PureState::new(*at.chain(), v.into_iter().map(|z| z / s).collect())?));
                    }
                }
                Mixture::new(renormalize_weights(branches))
            }
            Operation::Unitary(v) => {
                let out = linalg::apply_qubit_operator(at.amplitudes(), at.chain().site_mask(spec.site), v);
                Ok(Mixture::pure(PureState::new(*at.chain(), out)?))
            }
        }
    }

    pub fn intervened_state(&self, t0: f64, t: f64) -> Result<Mixture<PureState>> {
        if t < t0 {
            return Ok(Mixture::pure(self.background_state(t)?));
        }
        let branches = self
            .after_process(t0)?
            .into_branches()
            .into_iter()
            .map(|(w, s)| Ok((w, self.propagator.evolve_between(&s, t0, t)?)))
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(branches)
    }
}

/// Removes the rounding drift of Born weights so they sum to one exactly
/// enough for `Mixture`.
fn renormalize_weights<S>(branches: Vec<(f64, S)>) -> Vec<(f64, S)> {
    let total: f64 = branches.iter().map(|(w, _)| w).sum();
    branches.into_iter().map(|(w, s)| (w / total, s)).collect()
}

impl Process for ExactProcess {
    fn chain(&self) -> &ChainSpec {
        self.propagator.chain()
    }

    fn background(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.background_state(t)?))
    }

    fn intervened(&self, t0: f64, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.intervened_state(t0, t)?))
    }

    fn intervened_row(&self, t0: f64, times: &[f64]) -> Result<Vec<Box<dyn Reduce + Send + Sync>>> {
        let after = self.after_process(t0)?;
        let expanded = after
            .branches()
            .iter()
            .map(|(w, s)| Ok((*w, self.propagator.spectral(s, t0)?)))
            .collect::<Result<Vec<_>>>()?;
        times
            .iter()
            .map(|&t| -> Result<Box<dyn Reduce + Send + Sync>> {
                if t < t0 {
                    return Ok(Box::new(self.background_state(t)?));
                }
                let branches = expanded
                    .iter()
                    .map(|(w, s)| Ok((*w, s.at(t)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Box::new(Mixture::new(branches)?))
            })
            .collect()
    }
}

/// The K and H amplitudes of a `z` measurement on a one-magnon state.
#[derive(Debug, Clone, PartialEq)]
pub struct KhAmplitudes {
    /// `Omega(t)` without the process.
    pub omega: Vec<C64>,
    /// Branch in which the magnon was found at the measured site.
    pub k: Vec<C64>,
    /// Branch in which it was not.
    pub h: Vec<C64>,
    /// `|Omega^m(t0)|^2`.
    pub weight_k: f64,
}

impl KhAmplitudes {
    /// Two-site X-state of the post-process mixture on `(j, k)`, assembled
    /// from `Omega` and `K` alone.
    pub fn xstate(&self, j: usize, k: usize) -> Result<XStateRdm> {
        let n = self.omega.len();
        if j == 0 || k == 0 || j > n || k > n || j == k {
            return Err(Error::domain(format!("bad site pair ({j}, {k})")));
        }
        let (oj, ok, kj, kk) = (self.omega[j - 1], self.omega[k - 1], self.k[j - 1], self.k[k - 1]);
        let pop = |o: C64, q: C64| o.norm_sqr() + 2.0 * q.norm_sqr() - 2.0 * (o.conj() * q).re;
        let (pj, pk) = (pop(oj, kj), pop(ok, kk));
        // <k| rho |j> for rho = |H><H| + |K><K| and H = Omega - K
        let coherence = ok * oj.conj() - ok * kj.conj() - kk * oj.conj() + 2.0 * kk * kj.conj();
        XStateRdm::new(1.0 - pj - pk, 0.0, pk, pj, coherence, ZERO)
    }
}

/// Projective `z` measurement on a one-magnon background.
pub struct ZOneMagnonProcess<P> {
    propagator: P,
    initial: SectorAmplitudes,
    site: usize,
}

impl<P: OneMagnonPropagator> ZOneMagnonProcess<P> {
    pub fn new(propagator: P, initial: SectorAmplitudes, site: usize) -> Result<Self> {
        if initial.sector() != Sector::OneMagnon || initial.chain() != propagator.chain() {
            return Err(Error::domain(
                "initial state must be one-magnon on the propagator's chain",
            ));
        }
        initial.chain().check_site(site)?;
        Ok(Self {
            propagator,
            initial,
            site,
        })
    }

    fn omega(&self, t: f64) -> Result<Vec<C64>> {
        self.propagator.evolve_between(self.initial.amplitudes(), 0.0, t)
    }

    pub fn background_state(&self, t: f64) -> Result<SectorAmplitudes> {
        SectorAmplitudes::new(*self.propagator.chain(), Sector::OneMagnon, self.omega(t)?)
    }

    /// `K^x = G^x_m(t - t0) Omega^m(t0)` and `H = Omega(t) - K`.
    pub fn amplitudes(&self, t0: f64, t: f64) -> Result<KhAmplitudes> {
        if t < t0 {
            return Err(Error::domain(format!("t = {t} precedes the epoch {t0}")));
        }
        let at = self.omega(t0)?;
        let mut local = vec![ZERO; at.len()];
        local[self.site - 1] = at[self.site - 1];
        let k = self.propagator.evolve_between(&local, t0, t)?;
        let omega = self.omega(t)?;
        let h = omega.iter().zip(&k).map(|(o, q)| o - q).collect();
        Ok(KhAmplitudes {
            omega,
            k,
            h,
            weight_k: at[self.site - 1].norm_sqr(),
        })
    }

    pub fn intervened_state(&self, t0: f64, t: f64) -> Result<Mixture<SectorAmplitudes>> {
        if t < t0 {
            return Ok(Mixture::pure(self.background_state(t)?));
        }
        let kh = self.amplitudes(t0, t)?;
        let chain = *self.propagator.chain();
        let mut branches = Vec::with_capacity(2);
        for amps in [kh.h, kh.k] {
            let w = linalg::norm_sqr(&amps);
            if w > EMPTY_BRANCH {
                let s = w.sqrt();
                branches.push((
                    w,
                    SectorAmplitudes::new(chain, Sector::OneMagnon, amps.into_iter().map(|z| z / s).collect())?,
                ));
            }
        }
        Mixture::new(renormalize_weights(branches))
    }
}

impl<P: OneMagnonPropagator> Process for ZOneMagnonProcess<P> {
    fn chain(&self) -> &ChainSpec {
        self.propagator.chain()
    }

    fn background(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.background_state(t)?))
    }

    fn intervened(&self, t0: f64, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.intervened_state(t0, t)?))
    }
}

/// Heisenberg `z` measurement at site `m` on `alpha |10..0> + beta |010..0>`.
pub fn z_qdp_one_magnon(
    alpha: C64,
    beta: C64,
    m: usize,
    t0: f64,
    t: f64,
    chain: &ChainSpec,
    params: &HeisenbergParams,
) -> Result<Mixture<SectorAmplitudes>> {
    if t < t0 {
        return Err(Error::domain(format!("t = {t} precedes the epoch {t0}")));
    }
    let initial = crate::magnon::one_magnon_pair_state(*chain, alpha, beta)?;
    let process = ZOneMagnonProcess::new(
        HeisenbergOneMagnon {
            chain: *chain,
            params: *params,
        },
        initial,
        m,
    )?;
    process.intervened_state(t0, t)
}

/// Projective `x` measurement on a one-magnon state under the Heisenberg
/// chain. The flipped branch lives in the vacuum-plus-two-magnon sector.
pub struct XHeisenbergProcess {
    one: HeisenbergOneMagnon,
    two: Arc<TwoMagnonSector>,
    initial: SectorAmplitudes,
    site: usize,
}

impl XHeisenbergProcess {
    pub fn new(two: Arc<TwoMagnonSector>, initial: SectorAmplitudes, site: usize) -> Result<Self> {
        if initial.sector() != Sector::OneMagnon || initial.chain() != two.chain() {
            return Err(Error::domain("initial state must be one-magnon on the sector's chain"));
        }
        initial.chain().check_site(site)?;
        Ok(Self {
            one: HeisenbergOneMagnon {
                chain: *two.chain(),
                params: *two.params(),
            },
            two,
            initial,
            site,
        })
    }

    fn omega(&self, t: f64) -> Result<Vec<C64>> {
        self.one.evolve_between(self.initial.amplitudes(), 0.0, t)
    }

    pub fn background_state(&self, t: f64) -> Result<SectorAmplitudes> {
        SectorAmplitudes::new(self.one.chain, Sector::OneMagnon, self.omega(t)?)
    }

    /// `sigma^x_m` applied to `Omega(t0)`.
    fn flipped(&self, t0: f64) -> Result<SectorAmplitudes> {
        let n = self.one.chain.n_sites();
        let at = self.omega(t0)?;
        let mut amps = vec![ZERO; Sector::VacuumPlusTwoMagnon.dim(n)];
        amps[0] = at[self.site - 1];
        for x in (1..=n).filter(|&x| x != self.site) {
            amps[1 + hilbert::pair_index(x.min(self.site), x.max(self.site), n)] = at[x - 1];
        }
        SectorAmplitudes::new(self.one.chain, Sector::VacuumPlusTwoMagnon, amps)
    }

    /// `L^{x1 x2}(t, t0) = sum_x G^{x1 x2}_{m x}(t - t0) Omega^x(t0)`, in pair order.
    pub fn l_amplitudes(&self, t0: f64, t: f64) -> Result<Vec<C64>> {
        let n = self.one.chain.n_sites();
        let at = self.omega(t0)?;
        let g = self.two.propagator(t - t0);
        let m = self.site;
        Ok(hilbert::pairs(n)
            .into_iter()
            .map(|target| {
                (1..=n)
                    .filter(|&x| x != m)
                    .map(|x| g.entry(target, (x.min(m), x.max(m))) * at[x - 1])
                    .sum()
            })
            .collect())
    }

    pub fn intervened_state(&self, t0: f64, t: f64) -> Result<Mixture<SectorAmplitudes>> {
        if t < t0 {
            return Ok(Mixture::pure(self.background_state(t)?));
        }
        let flipped = self.two.evolve_state(&self.flipped(t0)?, t - t0)?;
        Mixture::new(vec![(0.5, self.background_state(t)?), (0.5, flipped)])
    }
}

impl Process for XHeisenbergProcess {
    fn chain(&self) -> &ChainSpec {
        &self.one.chain
    }

    fn background(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.background_state(t)?))
    }

    fn intervened(&self, t0: f64, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.intervened_state(t0, t)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    /// With-process value minus background value.
    Delta,
    /// With-process value.
    Tilde,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SurfaceRequest {
    pub measure: Measure,
    pub parties: Parties,
    pub kind: SurfaceKind,
}

impl SurfaceRequest {
    pub fn delta(measure: Measure, parties: Parties) -> Self {
        Self {
            measure,
            parties,
            kind: SurfaceKind::Delta,
        }
    }

    pub fn tilde(measure: Measure, parties: Parties) -> Self {
        Self {
            measure,
            parties,
            kind: SurfaceKind::Tilde,
        }
    }

    /// Measure name, prefixed with `delta_` for differences.
    pub fn measure_label(&self) -> String {
        match self.kind {
            SurfaceKind::Delta => format!("delta_{}", self.measure),
            SurfaceKind::Tilde => self.measure.to_string(),
        }
    }
}

/// A surface over epochs (rows) and times (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub request: SurfaceRequest,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionResult {
    pub surfaces: Vec<Surface>,
}

impl InterventionResult {
    pub fn get(&self, request: &SurfaceRequest) -> Option<&Grid> {
        self.surfaces.iter().find(|s| &s.request == request).map(|s| &s.grid)
    }
}

/// Evaluates every request on the `(t0, t)` grid. Cells with `t < t0` carry
/// the background value, so their differences are exactly zero.
pub fn delta_surfaces(
    process: &dyn Process,
    requests: &[SurfaceRequest],
    times: &[f64],
    epochs: &[f64],
) -> Result<InterventionResult> {
    for r in requests {
        r.parties.check(process.chain())?;
    }
    let eval = |state: &dyn Reduce| -> Result<Vec<f64>> {
        requests
            .iter()
            .map(|r| evaluate(r.measure, &r.parties, state))
            .collect()
    };
    let background: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| eval(&*process.background(t)?))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<Option<Vec<f64>>>> = epochs
        .par_iter()
        .map(|&t0| {
            let start = times.partition_point(|&t| t < t0);
            let later = if times[start..].iter().all(|&t| t >= t0) {
                process.intervened_row(t0, &times[start..])?
            } else {
                // unsorted times fall back to cell-by-cell evaluation
                return times
                    .iter()
                    .map(|&t| {
                        if t < t0 {
                            Ok(None)
                        } else {
                            Ok(Some(eval(&*process.intervened(t0, t)?)?))
                        }
                    })
                    .collect();
            };
            let mut row: Vec<Option<Vec<f64>>> = vec![None; start];
            for state in later {
                row.push(Some(eval(&*state)?));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let cells: Vec<Option<Vec<f64>>> = rows.into_iter().flatten().collect();
    let surfaces = requests
        .iter()
        .enumerate()
        .map(|(r, req)| {
            let values = cells
                .iter()
                .enumerate()
                .map(|(cell, v)| {
                    let bg = background[cell % times.len()][r];
                    match (v, req.kind) {
                        (None, SurfaceKind::Delta) => 0.0,
                        (None, SurfaceKind::Tilde) => bg,
                        (Some(v), SurfaceKind::Delta) => v[r] - bg,
                        (Some(v), SurfaceKind::Tilde) => v[r],
                    }
                })
                .collect();
            Ok(Surface {
                request: req.clone(),
                grid: Grid::new(epochs.to_vec(), times.to_vec(), values)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(InterventionResult { surfaces })
}

/// The six panels of a measurement-at-site-2 study: `dI(1:2)`, `dI(2:3)`,
/// `dI(1:3)`, `dI(2:13)`, `I3(1:2:3)` and `dC(1:3)`.
pub fn standard_panels() -> Vec<SurfaceRequest> {
    vec![
        SurfaceRequest::delta(Measure::MutualInformation, Parties::pair(1, 2)),
        SurfaceRequest::delta(Measure::MutualInformation, Parties::pair(2, 3)),
        SurfaceRequest::delta(Measure::MutualInformation, Parties::pair(1, 3)),
        SurfaceRequest::delta(Measure::MutualInformation, Parties::Two(vec![2], vec![1, 3])),
        SurfaceRequest::tilde(Measure::Tmi, Parties::triple(1, 2, 3)),
        SurfaceRequest::delta(Measure::Concurrence, Parties::pair(1, 3)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::{self, Model};
    use crate::fermion::XYParams;
    use crate::grid::linspace;
    use crate::magnon::{self, HarperMap, HarperParams};
    use crate::measures;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn chain(n: usize) -> ChainSpec {
        ChainSpec::periodic(n).unwrap()
    }

    fn max_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        linalg::max_abs_diff(a.matrix(), b.matrix())
    }

    fn bell() -> DensityMatrix {
        let mut m = DMatrix::<C64>::zeros(4, 4);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = c(0.5, 0.0);
        }
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn kraus_sets_are_complete() {
        for axis in [Z_AXIS, X_AXIS, [0.0, 1.0, 0.0], [0.6, 0.0, 0.8], [0.48, 0.6, 0.64]] {
            assert!(kraus_completeness_defect(&kraus_operators(axis)) < 1e-12);
        }
        assert!(QdpSpec::projective(2, 0.0, [1.0, 1.0, 0.0]).is_err());
        assert!(QdpSpec::kick(2, 0.0, c(1.0, 0.0), c(0.1, 0.0)).is_err());
        assert!(QdpSpec::projective(0, 0.0, Z_AXIS).is_err());
        assert!(QdpSpec::projective(1, -1.0, Z_AXIS).is_err());
    }

    #[test]
    fn measuring_a_bell_pair() {
        let out = apply_projective(&bell(), 1, Z_AXIS).unwrap();
        let diag = DensityMatrix::from_diagonal(&[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(max_diff(&out, &diag) < 1e-15);
        assert!(measures::concurrence(&out).unwrap() < 1e-12);
        // diagonal states are unchanged by a z measurement
        assert!(max_diff(&apply_projective(&diag, 2, Z_AXIS).unwrap(), &diag) < 1e-15);
        assert!(apply_projective(&diag, 3, Z_AXIS).is_err());
    }

    #[test]
    fn z_measurement_removes_coherences_to_the_site() {
        let ch = chain(6);
        let p = HeisenbergParams::default();
        let rho = magnon::evolve_one_magnon(c(S, 0.0), c(S, 0.0), &ch, &p, 0.7)
            .unwrap()
            .to_pure_state()
            .unwrap()
            .to_density();
        let out = apply_projective(&rho, 2, Z_AXIS).unwrap();
        let mask = ch.site_mask(2);
        for i in 0..64 {
            assert!((out.matrix()[(i, i)] - rho.matrix()[(i, i)]).norm() < 1e-15);
            for j in 0..64 {
                let expected = if (i & mask) == (j & mask) {
                    rho.matrix()[(i, j)]
                } else {
                    ZERO
                };
                assert!((out.matrix()[(i, j)] - expected).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn kick_basics() {
        let ch = chain(4);
        let vac = PureState::basis(ch, &[]).unwrap();
        let id = apply_unitary_kick(&vac, 1, c(1.0, 0.0), ZERO).unwrap();
        assert_eq!(id.amplitudes(), vac.amplitudes());
        let flipped = apply_unitary_kick(&vac, 1, ZERO, c(1.0, 0.0)).unwrap();
        assert!((flipped.amplitudes()[ch.site_mask(1)].norm() - 1.0).abs() < 1e-15);
        assert!(apply_unitary_kick(&vac, 1, c(0.9, 0.0), ZERO).is_err());
        let rho = apply_unitary_kick_density(&bell(), 2, c(0.6f64.sqrt(), 0.0), c(0.0, 0.4f64.sqrt())).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        let (g, d) = epoch_kick_amplitudes(0.3, X_AXIS);
        assert!((g.norm_sqr() + d.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((d - c(0.0, 0.3f64.sin())).norm() < 1e-15);
    }

    #[test]
    fn kh_branch_weights() {
        let ch = chain(8);
        let p = HeisenbergParams::default();
        let at_epoch = z_qdp_one_magnon(c(S, 0.0), c(S, 0.0), 2, 0.0, 0.0, &ch, &p).unwrap();
        let w: Vec<f64> = at_epoch.branches().iter().map(|(w, _)| *w).collect();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
        assert!(z_qdp_one_magnon(c(S, 0.0), c(S, 0.0), 2, 1.0, 0.5, &ch, &p).is_err());

        let process = ZOneMagnonProcess::new(
            HeisenbergOneMagnon { chain: ch, params: p },
            magnon::one_magnon_pair_state(ch, c(S, 0.0), c(S, 0.0)).unwrap(),
            2,
        )
        .unwrap();
        let t0 = 0.8;
        let omega_m = process.background_state(t0).unwrap().at_site(2).norm_sqr();
        let kh = process.amplitudes(t0, t0).unwrap();
        assert!((kh.weight_k - omega_m).abs() < 1e-14);
        assert!((linalg::norm_sqr(&kh.k) - omega_m).abs() < 1e-12);
        assert!((linalg::norm_sqr(&kh.h) - (1.0 - omega_m)).abs() < 1e-12);
    }

    #[test]
    fn kh_xstate_matches_mixture() {
        let ch = chain(8);
        let process = ZOneMagnonProcess::new(
            HeisenbergOneMagnon {
                chain: ch,
                params: HeisenbergParams::new(1.0, 0.4).unwrap(),
            },
            magnon::one_magnon_pair_state(ch, c(0.6, 0.0), c(0.0, 0.8)).unwrap(),
            2,
        )
        .unwrap();
        let (t0, t) = (0.4, 1.1);
        let kh = process.amplitudes(t0, t).unwrap();
        let mix = process.intervened_state(t0, t).unwrap();
        for (j, k) in [(1, 2), (1, 3), (2, 3), (4, 7)] {
            let closed = kh.xstate(j, k).unwrap().to_density();
            assert!(max_diff(&closed, &mix.reduce(&[j, k]).unwrap()) < 1e-12);
        }
    }

    fn exact_heisenberg(n: usize, p: HeisenbergParams, spec: QdpSpec) -> ExactProcess {
        let ch = chain(n);
        let u = ed::propagator(&Model::Heisenberg(p), &ch).unwrap();
        ExactProcess::new(u, ed::pair_state(&ch, c(S, 0.0), c(S, 0.0)).unwrap(), spec).unwrap()
    }

    fn all_rdms_agree(a: &dyn Reduce, b: &dyn Reduce, n: usize, tol: f64) {
        let mut sets: Vec<Vec<usize>> = (1..=n).map(|j| vec![j]).collect();
        for j in 1..=n {
            for k in j + 1..=n {
                sets.push(vec![j, k]);
            }
        }
        sets.extend([vec![1, 2, 3], vec![2, 4, 7]]);
        for s in sets {
            let d = max_diff(&a.reduce(&s).unwrap(), &b.reduce(&s).unwrap());
            assert!(d < tol, "sites {s:?}: {d}");
        }
    }

    #[test]
    fn z_shortcut_matches_exact_pipeline() {
        let p = HeisenbergParams::default();
        let exact = exact_heisenberg(8, p, QdpSpec::projective(2, 0.0, Z_AXIS).unwrap());
        let ch = chain(8);
        let analytic = ZOneMagnonProcess::new(
            HeisenbergOneMagnon { chain: ch, params: p },
            magnon::one_magnon_pair_state(ch, c(S, 0.0), c(S, 0.0)).unwrap(),
            2,
        )
        .unwrap();
        for (t0, t) in [(0.5, 1.2), (0.0, 0.9), (1.5, 1.5), (2.0, 0.3)] {
            let a = analytic.intervened_state(t0, t).unwrap();
            let b = exact.intervened_state(t0, t).unwrap();
            all_rdms_agree(&a, &b, 8, 1e-10);
        }
    }

    #[test]
    fn z_shortcut_on_the_kicked_chain() {
        let ch = chain(8);
        let hp = HarperParams::new(1.0, 0.9, 1).unwrap();
        let analytic = ZOneMagnonProcess::new(
            HarperMap::new(&ch, &hp),
            magnon::one_magnon_pair_state(ch, c(S, 0.0), c(S, 0.0)).unwrap(),
            2,
        )
        .unwrap();
        let u = ed::propagator(&Model::Harper(hp), &ch).unwrap();
        let exact = ExactProcess::new(
            u,
            ed::pair_state(&ch, c(S, 0.0), c(S, 0.0)).unwrap(),
            QdpSpec::projective(2, 0.0, Z_AXIS).unwrap(),
        )
        .unwrap();
        for (t0, t) in [(0.9, 2.7), (1.8, 4.5)] {
            all_rdms_agree(
                &analytic.intervened_state(t0, t).unwrap(),
                &exact.intervened_state(t0, t).unwrap(),
                8,
                1e-10,
            );
        }
    }

    #[test]
    fn x_measurement_l_formula() {
        let ch = chain(10);
        let p = HeisenbergParams::default();
        let sector = Arc::new(TwoMagnonSector::new(&ch, &p).unwrap());
        let process = XHeisenbergProcess::new(
            sector,
            magnon::one_magnon_pair_state(ch, c(S, 0.0), c(S, 0.0)).unwrap(),
            2,
        )
        .unwrap();
        let (t0, t) = (1.0, 2.0);
        let mix = process.intervened_state(t0, t).unwrap();
        let flipped = &mix.branches()[1].1;
        let l = process.l_amplitudes(t0, t).unwrap();
        let diff = l
            .iter()
            .zip(&flipped.amplitudes()[1..])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8);

        let exact = exact_heisenberg(10, p, QdpSpec::projective(2, 0.0, X_AXIS).unwrap());
        all_rdms_agree(&mix, &exact.intervened_state(t0, t).unwrap(), 10, 1e-8);
    }

    #[test]
    fn x_measurement_on_the_vacuum() {
        let ch = chain(6);
        let u = ed::propagator(&Model::Heisenberg(HeisenbergParams::default()), &ch).unwrap();
        let vac = PureState::basis(ch, &[]).unwrap();
        let process = ExactProcess::new(u, vac, QdpSpec::projective(2, 0.0, X_AXIS).unwrap()).unwrap();
        let mix = process.after_process(0.0).unwrap();
        let flip_rho = PureState::basis(ch, &[2]).unwrap().to_density();
        let expected = DensityMatrix::new((vac_density(&ch) + flip_rho.into_matrix()) * c(0.5, 0.0)).unwrap();
        let full = mix.reduce(&(1..=6).collect::<Vec<_>>()).unwrap();
        // the two Born outcomes are |0> +- |1> at site 2, so the mixture is diagonal
        assert!(max_diff(&full, &expected) < 1e-14);
    }

    fn vac_density(ch: &ChainSpec) -> DMatrix<C64> {
        PureState::basis(*ch, &[]).unwrap().to_density().into_matrix()
    }

    #[test]
    fn no_intervention_before_the_epoch() {
        let p = HeisenbergParams::default();
        let exact = exact_heisenberg(6, p, QdpSpec::projective(2, 0.0, X_AXIS).unwrap());
        let before = exact.intervened_state(2.0, 1.0).unwrap();
        assert_eq!(before.branches().len(), 1);
        assert_eq!(before.branches()[0].1, exact.background_state(1.0).unwrap());
    }

    #[test]
    fn conservation_through_the_process() {
        let p = HeisenbergParams::default();
        let z = exact_heisenberg(8, p, QdpSpec::projective(2, 0.0, Z_AXIS).unwrap());
        let x = exact_heisenberg(8, p, QdpSpec::projective(2, 0.0, X_AXIS).unwrap());
        for (t0, t) in [(0.3, 0.3), (0.7, 2.0), (1.9, 4.0)] {
            let mz = z.intervened_state(t0, t).unwrap();
            assert!((mz.total_weight() - 1.0).abs() < 1e-10);
            let downs: f64 = mz.branches().iter().map(|(w, s)| w * (8.0 - s.total_sz()) / 2.0).sum();
            assert!((downs - 1.0).abs() < 1e-10);
            let mx = x.intervened_state(t0, t).unwrap();
            let odd: f64 = mx
                .branches()
                .iter()
                .map(|(w, s)| {
                    w * s
                        .amplitudes()
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| b.count_ones() % 2 == 1)
                        .map(|(_, a)| a.norm_sqr())
                        .sum::<f64>()
                })
                .sum();
            assert!(odd > 1e-6 && 1.0 - odd > 1e-6);
            let rho = mx.reduce(&[1, 2, 3]).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn kick_matches_exact_pipeline_on_xy() {
        let ch = chain(8);
        let xp = XYParams::new(0.7, 0.3, 1.0).unwrap();
        let u = ed::propagator(&Model::Xy(xp), &ch).unwrap();
        let (g, d) = (c(0.6f64.sqrt(), 0.0), c(0.4f64.sqrt(), 0.0));
        let psi0 = ed::pair_state(&ch, c(S, 0.0), c(S, 0.0)).unwrap();
        let process = ExactProcess::new(u.clone(), psi0.clone(), QdpSpec::kick(2, 0.0, g, d).unwrap()).unwrap();
        let (t0, t) = (0.6, 1.7);
        let by_hand = u
            .evolve_between(
                &apply_unitary_kick(&u.evolve(&psi0, t0).unwrap(), 2, g, d).unwrap(),
                t0,
                t,
            )
            .unwrap();
        let mix = process.intervened_state(t0, t).unwrap();
        assert!((mix.branches()[0].1.inner(&by_hand).norm() - 1.0).abs() < 1e-10);
        let parity_even: f64 = mix.branches()[0]
            .1
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(b, _)| b.count_ones() % 2 == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!((parity_even - 0.4).abs() < 1e-10);
    }

    #[test]
    fn surfaces_vanish_before_the_epoch_and_for_identity_kicks() {
        let p = HeisenbergParams::default();
        let times = linspace(0.0, 2.0, 9);
        let epochs = linspace(0.0, 1.0, 5);
        let z = exact_heisenberg(6, p, QdpSpec::projective(2, 0.0, Z_AXIS).unwrap());
        let res = delta_surfaces(&z, &standard_panels(), &times, &epochs).unwrap();
        assert_eq!(res.surfaces.len(), 6);
        for s in &res.surfaces {
            for (r, &t0) in epochs.iter().enumerate() {
                for (k, &t) in times.iter().enumerate() {
                    if t < t0 && s.request.kind == SurfaceKind::Delta {
                        assert_eq!(s.grid.get(r, k), 0.0);
                    }
                }
            }
        }
        let id = exact_heisenberg(6, p, QdpSpec::kick(2, 0.0, c(1.0, 0.0), ZERO).unwrap());
        let res = delta_surfaces(&id, &standard_panels(), &times, &epochs).unwrap();
        for s in res.surfaces.iter().filter(|s| s.request.kind == SurfaceKind::Delta) {
            assert!(s.grid.values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn tmi_change_decomposes() {
        let ch = chain(10);
        let p = HeisenbergParams::default();
        let process = ZOneMagnonProcess::new(
            HeisenbergOneMagnon { chain: ch, params: p },
            magnon::one_magnon_pair_state(ch, c(S, 0.0), c(S, 0.0)).unwrap(),
            2,
        )
        .unwrap();
        let times = linspace(0.0, 3.0, 13);
        let epochs = linspace(0.0, 2.0, 9);
        let mut requests = standard_panels();
        requests.push(SurfaceRequest::delta(Measure::Tmi, Parties::triple(1, 2, 3)));
        let res = delta_surfaces(&process, &requests, &times, &epochs).unwrap();
        let g = |i: usize| &res.surfaces[i].grid;
        for cell in 0..times.len() * epochs.len() {
            let lhs = g(6).values[cell];
            let rhs = g(0).values[cell] + g(1).values[cell] - g(3).values[cell];
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
