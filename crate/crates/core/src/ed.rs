//! Exact diagonalization of small chains, used as the reference for every
//! analytic path.
//!
//! All three Hamiltonians are real symmetric in the `sz` basis, so each
//! conserved block is diagonalized as a real matrix. Blocks are labelled by
//! magnon number when it is conserved and by parity otherwise.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fermion::XYParams;
use crate::grid::Dynamics;
use crate::hilbert::{ChainSpec, DensityMatrix, PureState, Reduce};
use crate::linalg::{self, c, C64, ZERO};
use crate::magnon::{HarperParams, HeisenbergParams, HARPER_HOPPING};

/// Largest chain handled by the exact engine.
pub const MAX_ED_SITES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Heisenberg(HeisenbergParams),
    Xy(XYParams),
    Harper(HarperParams),
}

impl Model {
    /// Whether the total `sz` is conserved.
    pub fn conserves_magnons(&self) -> bool {
        match self {
            Model::Heisenberg(_) | Model::Harper(_) => true,
            Model::Xy(p) => p.is_isotropic(),
        }
    }

    fn key(&self, n: usize) -> ModelKey {
        let bits = |x: f64| x.to_bits();
        match *self {
            Model::Heisenberg(p) => ModelKey(0, n, [bits(p.j), bits(p.delta), 0]),
            Model::Xy(p) => ModelKey(1, n, [bits(p.jx), bits(p.jy), bits(p.h)]),
            Model::Harper(p) => ModelKey(2, n, [bits(p.g), bits(p.tau), p.eta as u64]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ModelKey(u8, usize, [u64; 3]);

/// Which basis states a matrix is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectorChoice {
    Full,
    /// Fixed number of down spins.
    Magnons(usize),
    /// Even (`false`) or odd (`true`) number of down spins.
    Parity(bool),
}

impl SectorChoice {
    fn basis(&self, chain: &ChainSpec) -> Result<Vec<usize>> {
        let dim = full_dim(chain)?;
        let n = chain.n_sites();
        Ok(match *self {
            SectorChoice::Full => (0..dim).collect(),
            SectorChoice::Magnons(k) => {
                if k > n {
                    return Err(Error::domain(format!("{k} magnons on {n} sites")));
                }
                (0..dim).filter(|b| b.count_ones() as usize == k).collect()
            }
            SectorChoice::Parity(odd) => (0..dim).filter(|b| (b.count_ones() % 2 == 1) == odd).collect(),
        })
    }
}

fn full_dim(chain: &ChainSpec) -> Result<usize> {
    if chain.n_sites() > MAX_ED_SITES {
        return Err(Error::SizeLimit {
            what: "exact diagonalization (sites)",
            requested: chain.n_sites(),
            limit: MAX_ED_SITES,
        });
    }
    chain.full_dim()
}

/// `+1` for an up spin at `site`, `-1` for a down spin.
#[inline]
fn sz(chain: &ChainSpec, b: usize, site: usize) -> f64 {
    if b & chain.site_mask(site) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Nonzero elements `(target, value)` of `H |b>` for a real Hamiltonian.
fn apply_columns(chain: &ChainSpec, model: &Model, b: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(2 * chain.n_sites() + 1);
    let mut diag = 0.0;
    match model {
        Model::Heisenberg(p) => {
            for (i, k) in chain.bonds() {
                let (si, sk) = (sz(chain, b, i), sz(chain, b, k));
                diag += -p.j * p.delta * si * sk;
                if si != sk {
                    out.push((b ^ chain.site_mask(i) ^ chain.site_mask(k), -2.0 * p.j));
                }
            }
        }
        Model::Harper(_) => {
            let p = HARPER_HOPPING;
            for (i, k) in chain.bonds() {
                if sz(chain, b, i) != sz(chain, b, k) {
                    out.push((b ^ chain.site_mask(i) ^ chain.site_mask(k), -2.0 * p.j));
                }
            }
        }
        Model::Xy(p) => {
            for (i, k) in chain.bonds() {
                let equal = sz(chain, b, i) == sz(chain, b, k);
                // sx sx flips both with +1; sy sy gives -1 on equal and +1 on opposite spins
                let amp = if equal { p.jx - p.jy } else { p.jx + p.jy };
                if amp != 0.0 {
                    out.push((b ^ chain.site_mask(i) ^ chain.site_mask(k), amp));
                }
            }
            for s in 1..=chain.n_sites() {
                diag += p.h * sz(chain, b, s);
            }
        }
    }
    if diag != 0.0 {
        out.push((b, diag));
    }
    out
}

/// A real symmetric Hamiltonian on a list of basis states.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    pub model: Model,
    pub chain: ChainSpec,
    pub basis: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl HamiltonianMatrix {
    pub fn build(model: &Model, chain: &ChainSpec, sector: SectorChoice) -> Result<Self> {
        let basis = sector.basis(chain)?;
        let dim = full_dim(chain)?;
        let mut position = vec![usize::MAX; dim];
        for (k, &b) in basis.iter().enumerate() {
            position[b] = k;
        }
        let mut matrix = DMatrix::<f64>::zeros(basis.len(), basis.len());
        for (col, &b) in basis.iter().enumerate() {
            for (target, v) in apply_columns(chain, model, b) {
                let row = position[target];
                if row == usize::MAX {
                    return Err(Error::domain("sector is not invariant under this Hamiltonian"));
                }
                matrix[(row, col)] += v;
            }
        }
        Ok(Self {
            model: *model,
            chain: *chain,
            basis,
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Largest entry of `[H, O]` for an operator diagonal in the basis.
    pub fn diagonal_commutator(&self, diag: impl Fn(usize) -> f64) -> f64 {
        let d: Vec<f64> = self.basis.iter().map(|&b| diag(b)).collect();
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] * (d[j] - d[i])).abs());
            }
        }
        worst
    }

    pub fn eigen(&self) -> EigenDecomposition {
        let (values, vectors) = linalg::symmetric_eigen(self.matrix.clone());
        EigenDecomposition { values, vectors }
    }
}

/// Total `sum_j sz_j` of a basis state.
pub fn total_sz(chain: &ChainSpec, b: usize) -> f64 {
    chain.n_sites() as f64 - 2.0 * b.count_ones() as f64
}

/// Parity `prod_j sz_j` of a basis state.
pub fn parity(b: usize) -> f64 {
    if b.count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn reconstruction_error(&self, h: &DMatrix<f64>) -> f64 {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values));
        (&self.vectors * d * self.vectors.transpose() - h).amax()
    }

    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.values.len();
        (self.vectors.transpose() * &self.vectors - DMatrix::<f64>::identity(n, n)).amax()
    }
}

/// One stroboscopic period of the kicked Harper chain on a basis block.
#[derive(Debug, Clone)]
pub struct StepUnitary {
    pub chain: ChainSpec,
    pub basis: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

fn harper_kick(chain: &ChainSpec, p: &HarperParams, b: usize) -> C64 {
    let n = chain.n_sites();
    let field: f64 = (1..=n)
        .map(|j| (2.0 * std::f64::consts::PI * p.eta as f64 * j as f64 / n as f64).cos() * sz(chain, b, j))
        .sum();
    C64::from_polar(1.0, -p.tau * p.g * field)
}

impl StepUnitary {
    /// `exp(-i tau H_hop) exp(-i tau g sum_j cos(2 pi eta j / N) sz_j)`.
    pub fn build(params: &HarperParams, chain: &ChainSpec, sector: SectorChoice) -> Result<Self> {
        let model = Model::Harper(*params);
        let hop = HamiltonianMatrix::build(&model, chain, sector)?;
        let (values, vectors) = linalg::symmetric_eigen(hop.matrix);
        let free = linalg::spectral_propagator(&values, &vectors, params.tau);
        let kicks: Vec<C64> = hop.basis.iter().map(|&b| harper_kick(chain, params, b)).collect();
        let dim = hop.basis.len();
        let matrix = DMatrix::from_fn(dim, dim, |i, j| free[(i, j)] * kicks[j]);
        Ok(Self {
            chain: *chain,
            basis: hop.basis,
            matrix,
        })
    }
}

/// What `build_hamiltonian` produces for each model.
#[derive(Debug, Clone)]
pub enum Generator {
    Hamiltonian(HamiltonianMatrix),
    StepUnitary(StepUnitary),
}

pub fn build_hamiltonian(model: &Model, chain: &ChainSpec, sector: SectorChoice) -> Result<Generator> {
    match model {
        Model::Harper(p) => Ok(Generator::StepUnitary(StepUnitary::build(p, chain, sector)?)),
        _ => Ok(Generator::Hamiltonian(HamiltonianMatrix::build(model, chain, sector)?)),
    }
}

/// Conserved blocks of a model.
fn blocks(model: &Model, chain: &ChainSpec) -> Vec<SectorChoice> {
    if model.conserves_magnons() {
        (0..=chain.n_sites()).map(SectorChoice::Magnons).collect()
    } else {
        vec![SectorChoice::Parity(false), SectorChoice::Parity(true)]
    }
}

#[derive(Debug, Clone)]
struct EigenBlock {
    basis: Vec<usize>,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct StepBlock {
    basis: Vec<usize>,
    step: DMatrix<C64>,
}

#[derive(Debug, Clone)]
enum Blocks {
    Hamiltonian(Vec<EigenBlock>),
    Floquet {
        params: HarperParams,
        blocks: Vec<StepBlock>,
    },
}

/// Block-diagonalized time evolution of one model on one chain.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    model: Model,
    chain: ChainSpec,
    blocks: Blocks,
}

impl ExactPropagator {
    pub fn new(model: &Model, chain: &ChainSpec) -> Result<Self> {
        full_dim(chain)?;
        let sectors = blocks(model, chain);
        let blocks = match model {
            Model::Harper(p) => Blocks::Floquet {
                params: *p,
                blocks: sectors
                    .into_iter()
                    .map(|s| {
                        let u = StepUnitary::build(p, chain, s)?;
                        Ok(StepBlock {
                            basis: u.basis,
                            step: u.matrix,
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            _ => Blocks::Hamiltonian(
                sectors
                    .into_iter()
                    .map(|s| {
                        let h = HamiltonianMatrix::build(model, chain, s)?;
                        let (values, vectors) = linalg::symmetric_eigen(h.matrix);
                        Ok(EigenBlock {
                            basis: h.basis,
                            values,
                            vectors,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self {
            model: *model,
            chain: *chain,
            blocks,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    /// All eigenvalues (Hamiltonian models only), ascending.
    pub fn spectrum(&self) -> Option<Vec<f64>> {
        match &self.blocks {
            Blocks::Hamiltonian(bs) => {
                let mut all: Vec<f64> = bs.iter().flat_map(|b| b.values.iter().copied()).collect();
                all.sort_by(f64::total_cmp);
                Some(all)
            }
            Blocks::Floquet { .. } => None,
        }
    }

    /// Eigenvalues of one conserved block.
    pub fn block_spectrum(&self, sector: SectorChoice) -> Option<Vec<f64>> {
        let basis = sector.basis(&self.chain).ok()?;
        match &self.blocks {
            Blocks::Hamiltonian(bs) => bs.iter().find(|b| b.basis == basis).map(|b| b.values.clone()),
            Blocks::Floquet { .. } => None,
        }
    }

    fn check(&self, psi: &PureState) -> Result<()> {
        if psi.chain() != &self.chain {
            return Err(Error::Dimension {
                expected: self.chain.n_sites(),
                found: psi.chain().n_sites(),
            });
        }
        Ok(())
    }

    /// Evolves the amplitudes from time `from` to time `to`. Kicked chains
    /// count the kicks between the two stroboscopic times.
    pub fn evolve_between(&self, psi: &PureState, from: f64, to: f64) -> Result<PureState> {
        self.check(psi)?;
        let idle = match &self.blocks {
            Blocks::Hamiltonian(_) => to == from,
            Blocks::Floquet { params, .. } => params.kicks_at(to) == params.kicks_at(from),
        };
        if idle {
            return Ok(psi.clone());
        }
        let amps = psi.amplitudes();
        let mut out = vec![ZERO; amps.len()];
        match &self.blocks {
            Blocks::Hamiltonian(bs) => {
                let t = to - from;
                for b in bs {
                    let local: Vec<C64> = b.basis.iter().map(|&i| amps[i]).collect();
                    if local.iter().all(|z| *z == ZERO) {
                        continue;
                    }
                    let mut coeffs = linalg::real_transpose_mul(&b.vectors, &local);
                    for (z, &l) in coeffs.iter_mut().zip(&b.values) {
                        *z *= C64::from_polar(1.0, -l * t);
                    }
                    for (&i, z) in b.basis.iter().zip(linalg::real_mul(&b.vectors, &coeffs)) {
                        out[i] = z;
                    }
                }
            }
            Blocks::Floquet { params, blocks } => {
                let n = params.kicks_at(to) - params.kicks_at(from);
                for b in blocks {
                    let local: Vec<C64> = b.basis.iter().map(|&i| amps[i]).collect();
                    if local.iter().all(|z| *z == ZERO) {
                        continue;
                    }
                    let mut v = linalg::to_vector(&local);
                    let inverse;
                    let m = if n >= 0 {
                        &b.step
                    } else {
                        inverse = b.step.adjoint();
                        &inverse
                    };
                    for _ in 0..n.unsigned_abs() {
                        v = m * v;
                    }
                    for (&i, z) in b.basis.iter().zip(v.iter()) {
                        out[i] = *z;
                    }
                }
            }
        }
        PureState::new(self.chain, out)
    }

    pub fn evolve(&self, psi: &PureState, t: f64) -> Result<PureState> {
        self.evolve_between(psi, 0.0, t)
    }

    /// Projects `psi`, taken at time `t_ref`, onto the eigenbasis once so that
    /// later times cost one back-transformation each.
    pub fn spectral(&self, psi: &PureState, t_ref: f64) -> Result<SpectralState<'_>> {
        self.check(psi)?;
        let coeffs = match &self.blocks {
            Blocks::Hamiltonian(bs) => Some(
                bs.iter()
                    .map(|b| {
                        let local: Vec<C64> = b.basis.iter().map(|&i| psi.amplitudes()[i]).collect();
                        if local.iter().all(|z| *z == ZERO) {
                            None
                        } else {
                            Some(linalg::real_transpose_mul(&b.vectors, &local))
                        }
                    })
                    .collect(),
            ),
            Blocks::Floquet { .. } => None,
        };
        Ok(SpectralState {
            propagator: self,
            state: psi.clone(),
            t_ref,
            coeffs,
        })
    }

    /// `U rho U^dagger` with `U` the evolution over `t`.
    pub fn evolve_density(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let dim = full_dim(&self.chain)?;
        if rho.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: rho.dim(),
            });
        }
        // columns of U rho, then rows via (U (U rho)^dagger)^dagger
        let apply = |m: &DMatrix<C64>| -> Result<DMatrix<C64>> {
            let mut out = DMatrix::<C64>::zeros(dim, dim);
            for col in 0..dim {
                let v: Vec<C64> = m.column(col).iter().copied().collect();
                let norm = linalg::norm_sqr(&v).sqrt();
                if norm == 0.0 {
                    continue;
                }
                let scaled: Vec<C64> = v.iter().map(|z| z / norm).collect();
                let evolved = self.evolve(&PureState::new(self.chain, scaled)?, t)?;
                for (r, z) in evolved.amplitudes().iter().enumerate() {
                    out[(r, col)] = z * norm;
                }
            }
            Ok(out)
        };
        let half = apply(rho.matrix())?;
        let full = apply(&half.adjoint())?.adjoint();
        DensityMatrix::new(full)
    }

    /// Expectation of the Hamiltonian (Hamiltonian models only).
    pub fn energy(&self, psi: &PureState) -> Option<f64> {
        if matches!(self.blocks, Blocks::Floquet { .. }) {
            return None;
        }
        let amps = psi.amplitudes();
        let mut e = 0.0;
        for (b, a) in amps.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (target, v) in apply_columns(&self.chain, &self.model, b) {
                e += (amps[target].conj() * a * v).re;
            }
        }
        Some(e)
    }
}

/// A state expanded in the eigenbasis of an [`ExactPropagator`].
pub struct SpectralState<'a> {
    propagator: &'a ExactPropagator,
    state: PureState,
    t_ref: f64,
    coeffs: Option<Vec<Option<Vec<C64>>>>,
}

impl SpectralState<'_> {
    pub fn at(&self, t: f64) -> Result<PureState> {
        let (Some(coeffs), Blocks::Hamiltonian(bs)) = (&self.coeffs, &self.propagator.blocks) else {
            return self.propagator.evolve_between(&self.state, self.t_ref, t);
        };
        if t == self.t_ref {
            return Ok(self.state.clone());
        }
        let dt = t - self.t_ref;
        let mut out = vec![ZERO; self.state.amplitudes().len()];
        for (b, c) in bs.iter().zip(coeffs) {
            let Some(c) = c else { continue };
            let phased: Vec<C64> = c
                .iter()
                .zip(&b.values)
                .map(|(z, &l)| z * C64::from_polar(1.0, -l * dt))
                .collect();
            for (&i, z) in b.basis.iter().zip(linalg::real_mul(&b.vectors, &phased)) {
                out[i] = z;
            }
        }
        PureState::new(self.propagator.chain, out)
    }
}

type Slot = Arc<OnceLock<std::result::Result<Arc<ExactPropagator>, String>>>;

fn cache() -> &'static Mutex<HashMap<ModelKey, Slot>> {
    static CACHE: OnceLock<Mutex<HashMap<ModelKey, Slot>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared, lazily built propagator. Concurrent callers asking for the same
/// model wait on a single build.
pub fn propagator(model: &Model, chain: &ChainSpec) -> Result<Arc<ExactPropagator>> {
    full_dim(chain)?;
    let slot = {
        let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
        map.entry(model.key(chain.n_sites())).or_default().clone()
    };
    slot.get_or_init(|| {
        ExactPropagator::new(model, chain)
            .map(Arc::new)
            .map_err(|e| e.to_string())
    })
    .clone()
    .map_err(Error::Domain)
}

/// A pure state under exact evolution.
pub struct ExactDynamics {
    propagator: Arc<ExactPropagator>,
    initial: PureState,
}

impl ExactDynamics {
    pub fn new(propagator: Arc<ExactPropagator>, initial: PureState) -> Result<Self> {
        propagator.check(&initial)?;
        Ok(Self { propagator, initial })
    }

    pub fn state(&self, t: f64) -> Result<PureState> {
        self.propagator.evolve(&self.initial, t)
    }
}

impl Dynamics for ExactDynamics {
    fn chain(&self) -> &ChainSpec {
        self.propagator.chain()
    }

    fn state_at(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.state(t)?))
    }
}

/// Outcome of an analytic-versus-exact comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn compare_oracle(analytic: &[f64], exact: &[f64], tolerance: f64) -> Result<OracleReport> {
    if analytic.len() != exact.len() {
        return Err(Error::Dimension {
            expected: exact.len(),
            found: analytic.len(),
        });
    }
    let max_abs_diff = analytic
        .iter()
        .zip(exact)
        .map(|(a, b)| {
            if a.is_nan() || b.is_nan() {
                f64::INFINITY
            } else {
                (a - b).abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(OracleReport {
        max_abs_diff,
        tolerance,
        pass: max_abs_diff < tolerance,
    })
}

pub fn compare_matrices(analytic: &DMatrix<C64>, exact: &DMatrix<C64>, tolerance: f64) -> Result<OracleReport> {
    if analytic.shape() != exact.shape() {
        return Err(Error::Dimension {
            expected: exact.nrows(),
            found: analytic.nrows(),
        });
    }
    let max_abs_diff = linalg::max_abs_diff(analytic, exact);
    Ok(OracleReport {
        max_abs_diff,
        tolerance,
        pass: max_abs_diff < tolerance,
    })
}

/// `alpha |10..0> + beta |010..0>` in the full space.
pub fn pair_state(chain: &ChainSpec, alpha: C64, beta: C64) -> Result<PureState> {
    let dim = full_dim(chain)?;
    let mut amps = vec![ZERO; dim];
    amps[chain.site_mask(1)] = alpha;
    amps[chain.site_mask(2)] = beta;
    PureState::new(*chain, amps)
}

/// `alpha |00..0> + beta |110..0>` in the full space.
pub fn vacuum_pair_state(chain: &ChainSpec, alpha: C64, beta: C64) -> Result<PureState> {
    let dim = full_dim(chain)?;
    let mut amps = vec![ZERO; dim];
    amps[0] = alpha;
    amps[chain.site_mask(1) | chain.site_mask(2)] = beta;
    PureState::new(*chain, amps)
}

/// Apply a single-site 2x2 operator `[[a, b], [c, d]]` (basis up, down).
pub fn apply_site_operator(psi: &[C64], chain: &ChainSpec, site: usize, op: [[C64; 2]; 2]) -> Vec<C64> {
    linalg::apply_qubit_operator(psi, chain.site_mask(site), op)
}

/// Pauli matrices in the (up, down) basis.
pub fn pauli() -> [[[C64; 2]; 2]; 3] {
    let (o, z, i) = (c(1.0, 0.0), ZERO, c(0.0, 1.0));
    [[[z, o], [o, z]], [[z, -i], [i, z]], [[o, z], [z, -o]]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion;
    use crate::magnon;

    fn chain(n: usize) -> ChainSpec {
        ChainSpec::periodic(n).unwrap()
    }

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn heisenberg_three_site_one_magnon_block() {
        let p = HeisenbergParams::new(1.0, 0.5).unwrap();
        let h = HamiltonianMatrix::build(&Model::Heisenberg(p), &chain(3), SectorChoice::Magnons(1)).unwrap();
        // one magnon on three sites: one aligned bond, two anti-aligned
        let diag = -0.5 * (1.0 - 2.0);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { diag } else { -2.0 };
                assert!((h.matrix[(i, j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_space_limit() {
        let p = HeisenbergParams::default();
        assert!(matches!(
            ExactPropagator::new(&Model::Heisenberg(p), &chain(13)),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn symmetries_of_the_xy_chain() {
        let ch = chain(6);
        let iso = HamiltonianMatrix::build(
            &Model::Xy(XYParams::new(0.4, 0.4, 0.7).unwrap()),
            &ch,
            SectorChoice::Full,
        )
        .unwrap();
        assert!(iso.symmetry_defect() < 1e-15);
        assert!(iso.diagonal_commutator(|b| total_sz(&ch, b)) < 1e-12);
        let aniso = HamiltonianMatrix::build(
            &Model::Xy(XYParams::new(0.7, 0.3, 0.7).unwrap()),
            &ch,
            SectorChoice::Full,
        )
        .unwrap();
        assert!(aniso.diagonal_commutator(parity) < 1e-12);
        assert!(aniso.diagonal_commutator(|b| total_sz(&ch, b)) > 0.1);
        assert!(HamiltonianMatrix::build(
            &Model::Xy(XYParams::new(0.7, 0.3, 0.7).unwrap()),
            &ch,
            SectorChoice::Magnons(1)
        )
        .is_err());
    }

    #[test]
    fn xy_matrix_matches_pauli_products() {
        let ch = chain(4);
        let p = XYParams::new(0.7, 0.3, 0.9).unwrap();
        let h = HamiltonianMatrix::build(&Model::Xy(p), &ch, SectorChoice::Full).unwrap();
        let [sx, sy, szm] = pauli();
        let mut dense = DMatrix::<C64>::zeros(16, 16);
        for col in 0..16 {
            let mut e = vec![ZERO; 16];
            e[col] = c(1.0, 0.0);
            let mut acc = vec![ZERO; 16];
            for (i, k) in ch.bonds() {
                for (op, w) in [(sx, p.jx), (sy, p.jy)] {
                    let v = apply_site_operator(&apply_site_operator(&e, &ch, k, op), &ch, i, op);
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a += b * w;
                    }
                }
            }
            for s in 1..=4 {
                let v = apply_site_operator(&e, &ch, s, szm);
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b * p.h;
                }
            }
            for (r, z) in acc.into_iter().enumerate() {
                dense[(r, col)] = z;
            }
        }
        let ours = h.matrix.map(|x| c(x, 0.0));
        assert!(linalg::max_abs_diff(&ours, &dense) < 1e-14);
    }

    #[test]
    fn eigen_decomposition_quality() {
        let h = HamiltonianMatrix::build(
            &Model::Heisenberg(HeisenbergParams::new(1.0, 0.3).unwrap()),
            &chain(8),
            SectorChoice::Magnons(3),
        )
        .unwrap();
        let e = h.eigen();
        assert!(e.reconstruction_error(&h.matrix) < 1e-10);
        assert!(e.orthogonality_defect() < 1e-10);
    }

    #[test]
    fn evolution_is_reversible_and_conserving() {
        let ch = chain(8);
        for model in [
            Model::Heisenberg(HeisenbergParams::new(1.0, 0.5).unwrap()),
            Model::Xy(XYParams::new(0.7, 0.3, 1.0).unwrap()),
        ] {
            let u = ExactPropagator::new(&model, &ch).unwrap();
            let psi = vacuum_pair_state(&ch, c(S, 0.0), c(0.0, S)).unwrap();
            assert_eq!(u.evolve(&psi, 0.0).unwrap().amplitudes(), psi.amplitudes());
            let fwd = u.evolve(&psi, 1.7).unwrap();
            let back = u.evolve(&fwd, -1.7).unwrap();
            let diff = psi
                .amplitudes()
                .iter()
                .zip(back.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10);
            let e0 = u.energy(&psi).unwrap();
            for t in [0.5, 2.5] {
                let st = u.evolve(&psi, t).unwrap();
                assert!((u.energy(&st).unwrap() - e0).abs() < 1e-10);
                assert!((st.parity() - psi.parity()).abs() < 1e-10);
                if model.conserves_magnons() {
                    assert!((st.total_sz() - psi.total_sz()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn spectral_state_matches_direct_evolution() {
        let ch = chain(7);
        let u = ExactPropagator::new(&Model::Xy(XYParams::new(0.7, 0.3, 0.4).unwrap()), &ch).unwrap();
        let psi = pair_state(&ch, c(S, 0.0), c(0.0, S)).unwrap();
        let sp = u.spectral(&psi, 0.5).unwrap();
        for t in [0.5, 1.0, 3.0] {
            let a = sp.at(t).unwrap();
            let b = u.evolve_between(&psi, 0.5, t).unwrap();
            assert!((a.inner(&b).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_evolution_matches_pure_evolution() {
        let ch = chain(5);
        let model = Model::Xy(XYParams::new(0.7, 0.3, 0.4).unwrap());
        let u = ExactPropagator::new(&model, &ch).unwrap();
        let psi = pair_state(&ch, c(S, 0.0), c(S, 0.0)).unwrap();
        let rho = u.evolve_density(&psi.to_density(), 1.3).unwrap();
        let direct = u.evolve(&psi, 1.3).unwrap().to_density();
        assert!(linalg::max_abs_diff(rho.matrix(), direct.matrix()) < 1e-12);
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn one_magnon_green_function_matches() {
        let ch = chain(8);
        let p = HeisenbergParams::default();
        let u = ExactPropagator::new(&Model::Heisenberg(p), &ch).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let analytic = magnon::evolve_one_magnon(c(S, 0.0), c(S, 0.0), &ch, &p, t).unwrap();
            let exact = u.evolve(&pair_state(&ch, c(S, 0.0), c(S, 0.0)).unwrap(), t).unwrap();
            let embedded = analytic.to_pure_state().unwrap();
            let diff = embedded
                .amplitudes()
                .iter()
                .zip(exact.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "t = {t}: {diff}");
        }
    }

    #[test]
    fn harper_full_space_matches_one_magnon_map() {
        let ch = chain(8);
        let p = HarperParams::new(1.0, 0.9, 1).unwrap();
        let u = ExactPropagator::new(&Model::Harper(p), &ch).unwrap();
        let map = magnon::HarperMap::new(&ch, &p);
        let init = magnon::one_magnon_pair_state(ch, c(S, 0.0), c(0.0, S)).unwrap();
        let exact = u.evolve(&init.to_pure_state().unwrap(), 4.5).unwrap();
        let amps = map.kick(init.amplitudes(), 5);
        for x in 1..=8 {
            // the kick's global phase differs between the sectors only by a constant
            let e = exact.amplitudes()[ch.site_mask(x)];
            assert!((e.norm() - amps[x - 1].norm()).abs() < 1e-12);
        }
        let inner: C64 = (1..=8)
            .map(|x| exact.amplitudes()[ch.site_mask(x)].conj() * amps[x - 1])
            .sum();
        assert!((inner.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_magnon_sector_matches() {
        let ch = chain(8);
        for delta in [-1.0, 0.0, 0.5, 1.0] {
            let p = HeisenbergParams::new(1.0, delta).unwrap();
            let u = ExactPropagator::new(&Model::Heisenberg(p), &ch).unwrap();
            let analytic = magnon::evolve_vacuum_two_magnon(c(S, 0.0), c(S, 0.0), &ch, &p, 0.5).unwrap();
            let exact = u
                .evolve(&vacuum_pair_state(&ch, c(S, 0.0), c(S, 0.0)).unwrap(), 0.5)
                .unwrap();
            for sites in [vec![1, 2], vec![2, 5], vec![1, 2, 3]] {
                let a = analytic.reduce(&sites).unwrap();
                let b = exact.reduce(&sites).unwrap();
                assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) < 1e-8);
            }
        }
    }

    #[test]
    fn xy_correlators_match_exact() {
        let ch = chain(10);
        let (a, b) = (c(S, 0.0), c(S, 0.0));
        for (p, t) in [
            (XYParams::new(0.7, 0.3, 1.0).unwrap(), 1.0),
            (XYParams::new(0.7, 0.3, 0.1).unwrap(), 0.8),
            (XYParams::new(0.7, 0.3, 10.0).unwrap(), 2.5),
            (XYParams::ising(0.0), 1.3),
        ] {
            let u = ExactPropagator::new(&Model::Xy(p), &ch).unwrap();
            let exact = u.evolve(&pair_state(&ch, a, b).unwrap(), t).unwrap();
            let analytic = fermion::XYDynamics::new(ch, p, a, b).state(t).unwrap();
            for j in 1..10 {
                let x = analytic.reduce(&[j, j + 1]).unwrap();
                let y = exact.reduce(&[j, j + 1]).unwrap();
                assert!(linalg::max_abs_diff(x.matrix(), y.matrix()) < 1e-8, "{p:?} j = {j}");
            }
        }
    }

    #[test]
    fn odd_sector_spectrum_is_free_fermion() {
        let ch = chain(8);
        let p = XYParams::new(0.7, 0.3, 0.6).unwrap();
        let u = ExactPropagator::new(&Model::Xy(p), &ch).unwrap();
        let mut exact = u.block_spectrum(SectorChoice::Parity(true)).unwrap();
        exact.sort_by(f64::total_cmp);

        // pairs (q, -q) contribute {0, A - E, A, A, A + E}-type levels, the
        // unpaired q = 0 and q = pi modes contribute A_q n_q
        let n = 8;
        let a = |q: f64| 2.0 * ((p.jx + p.jy) * q.cos() - p.h);
        let e = |q: f64| (a(q).powi(2) + (2.0 * (p.jx - p.jy) * q.sin()).powi(2)).sqrt();
        let mut levels: Vec<(f64, u32)> = vec![(n as f64 * p.h, 0)];
        for m in 0..n {
            let q = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
            let options: Vec<(f64, u32)> = if m == 0 || 2 * m == n {
                vec![(0.0, 0), (a(q), 1)]
            } else if 2 * m < n {
                vec![(a(q) - e(q), 0), (a(q), 1), (a(q), 1), (a(q) + e(q), 0)]
            } else {
                continue;
            };
            levels = levels
                .iter()
                .flat_map(|&(base, par)| options.iter().map(move |&(d, pp)| (base + d, par + pp)))
                .collect();
        }
        let mut free: Vec<f64> = levels
            .into_iter()
            .filter(|&(_, par)| par % 2 == 1)
            .map(|(e, _)| e)
            .collect();
        free.sort_by(f64::total_cmp);
        assert_eq!(free.len(), exact.len());
        for (x, y) in free.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn isotropic_one_particle_levels() {
        let ch = chain(10);
        let p = XYParams::new(0.5, 0.5, 0.3).unwrap();
        let u = ExactPropagator::new(&Model::Xy(p), &ch).unwrap();
        let mut exact = u.block_spectrum(SectorChoice::Magnons(1)).unwrap();
        exact.sort_by(f64::total_cmp);
        let mut expected: Vec<f64> = fermion::odd_parity_momenta(10)
            .into_iter()
            .map(|q| 10.0 * p.h + 2.0 * ((p.jx + p.jy) * q.cos() - p.h))
            .collect();
        expected.sort_by(f64::total_cmp);
        for (x, y) in expected.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn cache_returns_shared_instances() {
        let ch = chain(6);
        let model = Model::Heisenberg(HeisenbergParams::new(1.0, 0.25).unwrap());
        let handles: Vec<_> = (0..8)
            .map(|_| std::thread::spawn(move || propagator(&model, &ch).unwrap()))
            .collect();
        let all: Vec<Arc<ExactPropagator>> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for p in &all[1..] {
            assert!(Arc::ptr_eq(p, &all[0]));
        }
    }

    #[test]
    fn oracle_report() {
        let r = compare_oracle(&[1.0, 2.0], &[1.0, 2.0], 1e-12).unwrap();
        assert_eq!(r.max_abs_diff, 0.0);
        assert!(r.pass);
        assert!(compare_oracle(&[1.0], &[1.0, 2.0], 1e-12).is_err());
        assert!(!compare_oracle(&[1.0], &[1.1], 1e-3).unwrap().pass);
    }
}
