//! Basis bookkeeping, state containers and reduced density matrices.
//!
//! Sites are 1-based. A basis index is read as the bitstring `|x_1 x_2 .. x_N>`
//! with site 1 as the most significant bit, so site `j` carries weight
//! `2^(N - j)` and a set bit means a down spin. Reduced density matrices use
//! the same convention over the kept sites in the order they were requested,
//! which puts a two-site RDM in the `|uu>, |ud>, |du>, |dd>` order of the
//! X-state layout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, C64, ZERO};

/// Largest chain embedded into the full `2^N` Hilbert space.
pub const MAX_FULL_SITES: usize = 14;

/// Largest chain handled by the sector (amplitude) representations.
pub const MAX_SECTOR_SITES: usize = 4096;

/// States within this distance of unit norm are silently renormalized.
pub const NORM_SLOP: f64 = 1e-9;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
}

/// A closed spin-1/2 chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainSpec {
    n_sites: usize,
    boundary: Boundary,
}

impl ChainSpec {
    pub fn periodic(n_sites: usize) -> Result<Self> {
        if n_sites < 3 {
            return Err(Error::domain(format!("a chain needs at least 3 sites, got {n_sites}")));
        }
        if n_sites > MAX_SECTOR_SITES {
            return Err(Error::SizeLimit {
                what: "chain length",
                requested: n_sites,
                limit: MAX_SECTOR_SITES,
            });
        }
        Ok(Self {
            n_sites,
            boundary: Boundary::Periodic,
        })
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Right neighbour of `site` with periodic wrap.
    #[inline]
    pub fn next(&self, site: usize) -> usize {
        site % self.n_sites + 1
    }

    /// Nearest-neighbour bonds `(i, i+1)`, including the wrap bond `(N, 1)`.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.n_sites).map(move |i| (i, self.next(i)))
    }

    /// Full Hilbert-space dimension, refusing chains beyond [`MAX_FULL_SITES`].
    pub fn full_dim(&self) -> Result<usize> {
        if self.n_sites > MAX_FULL_SITES {
            return Err(Error::SizeLimit {
                what: "full Hilbert-space embedding (sites)",
                requested: self.n_sites,
                limit: MAX_FULL_SITES,
            });
        }
        Ok(1 << self.n_sites)
    }

    /// Bit mask of `site` in a full-space basis index.
    #[inline]
    pub fn site_mask(&self, site: usize) -> usize {
        1 << (self.n_sites - site)
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.n_sites {
            return Err(Error::domain(format!("site {site} outside 1..={}", self.n_sites)));
        }
        Ok(())
    }

    /// Validates a nonempty list of distinct in-range sites.
    pub fn check_sites(&self, sites: &[usize]) -> Result<()> {
        if sites.is_empty() {
            return Err(Error::domain("site list is empty"));
        }
        for (i, &s) in sites.iter().enumerate() {
            self.check_site(s)?;
            if sites[..i].contains(&s) {
                return Err(Error::domain(format!("site {s} listed twice")));
            }
        }
        Ok(())
    }
}

/// Basis index of the configuration with down spins at `down_positions`.
pub fn configuration_index(down_positions: &[usize], chain: &ChainSpec) -> Result<usize> {
    if chain.n_sites() >= usize::BITS as usize {
        return Err(Error::SizeLimit {
            what: "bitstring index (sites)",
            requested: chain.n_sites(),
            limit: usize::BITS as usize - 1,
        });
    }
    let mut index = 0;
    let mut last = 0;
    for &s in down_positions {
        chain.check_site(s)?;
        if s <= last {
            return Err(Error::domain(format!(
                "down-spin positions must be strictly increasing, got {down_positions:?}"
            )));
        }
        last = s;
        index |= chain.site_mask(s);
    }
    Ok(index)
}

/// Inverse of [`configuration_index`].
pub fn configuration_sites(index: usize, chain: &ChainSpec) -> Result<Vec<usize>> {
    let n = chain.n_sites();
    if n < usize::BITS as usize && index >> n != 0 {
        return Err(Error::domain(format!("index {index} outside a {n}-site basis")));
    }
    Ok((1..=n).filter(|&s| index & chain.site_mask(s) != 0).collect())
}

/// Number of ordered pairs `x1 < x2` on `n` sites.
#[inline]
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Lexicographic index of the pair `(x1, x2)`; order of arguments is free.
#[inline]
pub fn pair_index(x1: usize, x2: usize, n: usize) -> usize {
    let (a, b) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    debug_assert!(a >= 1 && a < b && b <= n);
    (a - 1) * (2 * n - a) / 2 + (b - a - 1)
}

/// All pairs in [`pair_index`] order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(pair_count(n));
    for a in 1..=n {
        for b in (a + 1)..=n {
            out.push((a, b));
        }
    }
    out
}

fn normalized(mut amplitudes: Vec<C64>) -> Result<Vec<C64>> {
    let norm_sqr = linalg::norm_sqr(&amplitudes);
    if (norm_sqr - 1.0).abs() > NORM_SLOP {
        return Err(Error::Normalization {
            norm_sqr,
            tolerance: NORM_SLOP,
        });
    }
    let scale = 1.0 / norm_sqr.sqrt();
    for z in &mut amplitudes {
        *z *= scale;
    }
    Ok(amplitudes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Exactly one down spin; amplitude `x - 1` belongs to site `x`.
    OneMagnon,
    /// Amplitude 0 is the all-up state, then two-down-spin pairs in
    /// [`pair_index`] order.
    VacuumPlusTwoMagnon,
}

impl Sector {
    pub fn dim(&self, n: usize) -> usize {
        match self {
            Sector::OneMagnon => n,
            Sector::VacuumPlusTwoMagnon => 1 + pair_count(n),
        }
    }
}

/// A normalized state confined to one of the two number sectors used here.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorAmplitudes {
    chain: ChainSpec,
    sector: Sector,
    amplitudes: Vec<C64>,
}

impl SectorAmplitudes {
    pub fn new(chain: ChainSpec, sector: Sector, amplitudes: Vec<C64>) -> Result<Self> {
        let expected = sector.dim(chain.n_sites());
        if amplitudes.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            chain,
            sector,
            amplitudes: normalized(amplitudes)?,
        })
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// One-magnon amplitude at `site`.
    pub fn at_site(&self, site: usize) -> C64 {
        debug_assert_eq!(self.sector, Sector::OneMagnon);
        self.amplitudes[site - 1]
    }

    /// Two-magnon amplitude of the pair `{x1, x2}`.
    pub fn at_pair(&self, x1: usize, x2: usize) -> C64 {
        debug_assert_eq!(self.sector, Sector::VacuumPlusTwoMagnon);
        self.amplitudes[1 + pair_index(x1, x2, self.chain.n_sites())]
    }

    pub fn vacuum(&self) -> C64 {
        debug_assert_eq!(self.sector, Sector::VacuumPlusTwoMagnon);
        self.amplitudes[0]
    }

    /// Expected number of down spins.
    pub fn magnon_number(&self) -> f64 {
        match self.sector {
            Sector::OneMagnon => 1.0,
            Sector::VacuumPlusTwoMagnon => 2.0 * (1.0 - self.amplitudes[0].norm_sqr()),
        }
    }

    /// Embeds the state into the full `2^N` space.
    pub fn to_pure_state(&self) -> Result<PureState> {
        let dim = self.chain.full_dim()?;
        let n = self.chain.n_sites();
        let mut full = vec![ZERO; dim];
        match self.sector {
            Sector::OneMagnon => {
                for site in 1..=n {
                    full[self.chain.site_mask(site)] = self.amplitudes[site - 1];
                }
            }
            Sector::VacuumPlusTwoMagnon => {
                full[0] = self.amplitudes[0];
                for (k, (a, b)) in pairs(n).into_iter().enumerate() {
                    full[self.chain.site_mask(a) | self.chain.site_mask(b)] = self.amplitudes[1 + k];
                }
            }
        }
        PureState::new(self.chain, full)
    }
}

/// A normalized vector in the full `2^N` space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    chain: ChainSpec,
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(chain: ChainSpec, amplitudes: Vec<C64>) -> Result<Self> {
        let dim = chain.full_dim()?;
        if amplitudes.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            chain,
            amplitudes: normalized(amplitudes)?,
        })
    }

    /// The basis state with down spins at `down`.
    pub fn basis(chain: ChainSpec, down: &[usize]) -> Result<Self> {
        let mut sorted = down.to_vec();
        sorted.sort_unstable();
        let index = configuration_index(&sorted, &chain)?;
        let mut amps = vec![ZERO; chain.full_dim()?];
        amps[index] = c(1.0, 0.0);
        Self::new(chain, amps)
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = linalg::to_vector(&self.amplitudes);
        DensityMatrix::from_matrix_unchecked(&v * v.adjoint())
    }

    /// `<psi|phi>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Expectation value of `sum_j sigma^z_j`.
    pub fn total_sz(&self) -> f64 {
        let n = self.chain.n_sites() as i64;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| a.norm_sqr() * (n - 2 * idx.count_ones() as i64) as f64)
            .sum()
    }

    /// Expectation value of the parity `prod_j sigma^z_j`.
    pub fn parity(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                if idx.count_ones() % 2 == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum()
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix over `n` qubits,
/// qubit 1 being the most significant bit of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates hermiticity and trace. Positivity is checked on demand by
    /// [`DensityMatrix::check_positive`] since it costs a diagonalization.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || !dim.is_power_of_two() || dim == 0 {
            return Err(Error::domain(format!(
                "density matrix must be square with power-of-two size, got {:?}",
                matrix.shape()
            )));
        }
        let herm = linalg::hermiticity_defect(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::domain(format!("matrix is not Hermitian (defect {herm:.2e})")));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::domain(format!("trace {trace} is not 1")));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<C64>) -> Self {
        Self { matrix }
    }

    pub fn from_diagonal(populations: &[f64]) -> Result<Self> {
        let n = populations.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(populations[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn check_positive(&self) -> Result<()> {
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::domain(format!("density matrix has eigenvalue {min:.3e} < 0")));
        }
        Ok(())
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    fn check_local_sites(&self, keep: &[usize]) -> Result<()> {
        let n = self.n_qubits();
        if keep.is_empty() {
            return Err(Error::domain("keep list is empty"));
        }
        for (i, &q) in keep.iter().enumerate() {
            if q == 0 || q > n {
                return Err(Error::domain(format!("qubit {q} outside 1..={n}")));
            }
            if keep[..i].contains(&q) {
                return Err(Error::domain(format!("qubit {q} listed twice")));
            }
        }
        Ok(())
    }

    /// Trace over all qubits except `keep` (1-based positions in this matrix).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        self.check_local_sites(keep)?;
        let n = self.n_qubits();
        let rest: Vec<usize> = (1..=n).filter(|q| !keep.contains(q)).collect();
        let dl = 1usize << keep.len();
        let dr = 1usize << rest.len();
        let compose = |a: usize, r: usize| -> usize {
            let mut idx = 0;
            for (i, &q) in keep.iter().enumerate() {
                if a & (1 << (keep.len() - 1 - i)) != 0 {
                    idx |= 1 << (n - q);
                }
            }
            for (i, &q) in rest.iter().enumerate() {
                if r & (1 << (rest.len() - 1 - i)) != 0 {
                    idx |= 1 << (n - q);
                }
            }
            idx
        };
        let index: Vec<Vec<usize>> = (0..dl).map(|a| (0..dr).map(|r| compose(a, r)).collect()).collect();
        let out = DMatrix::from_fn(dl, dl, |a, b| {
            index[a].iter().zip(&index[b]).map(|(&i, &j)| self.matrix[(i, j)]).sum()
        });
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }

    /// Partial transpose on the qubits in `party` (1-based positions).
    pub fn partial_transpose(&self, party: &[usize]) -> Result<DMatrix<C64>> {
        self.check_local_sites(party)?;
        let n = self.n_qubits();
        let mask: usize = party.iter().map(|&q| 1usize << (n - q)).sum();
        let dim = self.dim();
        Ok(DMatrix::from_fn(dim, dim, |i, j| {
            // swap the party bits between row and column
            let ii = (i & !mask) | (j & mask);
            let jj = (j & !mask) | (i & mask);
            self.matrix[(ii, jj)]
        }))
    }
}

/// Anything that can produce reduced density matrices of chain sites.
pub trait Reduce {
    fn n_sites(&self) -> usize;

    /// Reduced density matrix of `sites`, in the order given.
    fn reduce(&self, sites: &[usize]) -> Result<DensityMatrix>;
}

/// `partial_trace(state, keep)` for any reducible state.
pub fn partial_trace<S: Reduce + ?Sized>(state: &S, keep: &[usize]) -> Result<DensityMatrix> {
    state.reduce(keep)
}

impl Reduce for PureState {
    fn n_sites(&self) -> usize {
        self.chain.n_sites()
    }

    fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        self.chain.check_sites(keep)?;
        let n = self.chain.n_sites();
        let rest: Vec<usize> = (1..=n).filter(|s| !keep.contains(s)).collect();
        let dl = 1usize << keep.len();
        let dr = 1usize << rest.len();
        // rows: kept configuration, columns: traced configuration
        let mut block = DMatrix::<C64>::zeros(dl, dr);
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            if *amp == ZERO {
                continue;
            }
            let mut a = 0;
            for (i, &s) in keep.iter().enumerate() {
                if idx & self.chain.site_mask(s) != 0 {
                    a |= 1 << (keep.len() - 1 - i);
                }
            }
            let mut r = 0;
            for (i, &s) in rest.iter().enumerate() {
                if idx & self.chain.site_mask(s) != 0 {
                    r |= 1 << i;
                }
            }
            block[(a, r)] = *amp;
        }
        let rho = &block * block.adjoint();
        Ok(DensityMatrix::from_matrix_unchecked(rho))
    }
}

impl Reduce for DensityMatrix {
    fn n_sites(&self) -> usize {
        self.n_qubits()
    }

    fn reduce(&self, sites: &[usize]) -> Result<DensityMatrix> {
        self.partial_trace(sites)
    }
}

impl Reduce for SectorAmplitudes {
    fn n_sites(&self) -> usize {
        self.chain.n_sites()
    }

    fn reduce(&self, sites: &[usize]) -> Result<DensityMatrix> {
        match self.sector {
            Sector::OneMagnon => rdm_one_magnon(self, sites),
            Sector::VacuumPlusTwoMagnon => rdm_vacuum_two_magnon(self, sites),
        }
    }
}

impl<T: Reduce + ?Sized> Reduce for Box<T> {
    fn n_sites(&self) -> usize {
        (**self).n_sites()
    }

    fn reduce(&self, sites: &[usize]) -> Result<DensityMatrix> {
        (**self).reduce(sites)
    }
}

impl<T: Reduce + ?Sized> Reduce for std::sync::Arc<T> {
    fn n_sites(&self) -> usize {
        (**self).n_sites()
    }

    fn reduce(&self, sites: &[usize]) -> Result<DensityMatrix> {
        (**self).reduce(sites)
    }
}

/// A convex combination of normalized branch states.
#[derive(Debug, Clone)]
pub struct Mixture<S> {
    branches: Vec<(f64, S)>,
}

impl<S: Reduce> Mixture<S> {
    /// Weights must be non-negative and sum to one within `1e-10`.
    pub fn new(branches: Vec<(f64, S)>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::domain("mixture has no branches"));
        }
        let n = branches[0].1.n_sites();
        let mut total = 0.0;
        for (w, s) in &branches {
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::domain(format!("invalid branch weight {w}")));
            }
            if s.n_sites() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: s.n_sites(),
                });
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("branch weights sum to {total}")));
        }
        Ok(Self { branches })
    }

    pub fn pure(state: S) -> Self {
        Self {
            branches: vec![(1.0, state)],
        }
    }

    pub fn branches(&self) -> &[(f64, S)] {
        &self.branches
    }

    pub fn into_branches(self) -> Vec<(f64, S)> {
        self.branches
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|(w, _)| w).sum()
    }
}

impl<S: Reduce> Reduce for Mixture<S> {
    fn n_sites(&self) -> usize {
        self.branches[0].1.n_sites()
    }

    fn reduce(&self, sites: &[usize]) -> Result<DensityMatrix> {
        let mut acc: Option<DMatrix<C64>> = None;
        for (w, s) in &self.branches {
            let part = s.reduce(sites)?.into_matrix() * c(*w, 0.0);
            acc = Some(match acc {
                None => part,
                Some(m) => m + part,
            });
        }
        Ok(DensityMatrix::from_matrix_unchecked(acc.expect("nonempty mixture")))
    }
}

fn local_bit(pos: usize, k: usize) -> usize {
    1 << (k - 1 - pos)
}

/// Closed-form RDM of a one-magnon state: with at most one down spin among the
/// kept sites the matrix is `1 - sum chi` on the all-up state plus the block
/// `Omega^a conj(Omega^b)` over single flips.
pub fn rdm_one_magnon(amps: &SectorAmplitudes, sites: &[usize]) -> Result<DensityMatrix> {
    if amps.sector != Sector::OneMagnon {
        return Err(Error::domain("rdm_one_magnon needs a one-magnon state"));
    }
    amps.chain.check_sites(sites)?;
    let k = sites.len();
    let dim = 1 << k;
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    let mut occupied = 0.0;
    for (a, &sa) in sites.iter().enumerate() {
        let oa = amps.at_site(sa);
        occupied += oa.norm_sqr();
        for (b, &sb) in sites.iter().enumerate() {
            rho[(local_bit(a, k), local_bit(b, k))] = oa * amps.at_site(sb).conj();
        }
    }
    rho[(0, 0)] = c(1.0 - occupied, 0.0);
    Ok(DensityMatrix::from_matrix_unchecked(rho))
}

/// Closed-form RDM of a vacuum-plus-two-magnon state.
///
/// With `a0` the vacuum amplitude and `A(x1,x2)` the pair amplitudes:
/// all-up population `|a0|^2 + sum_{pairs outside} |A|^2`, single-flip block
/// `sum_{x outside} A(s,x) conj(A(s',x))`, double-flip block
/// `A(s1,s2) conj(A(s3,s4))` and vacuum coherence `a0 conj(A(s1,s2))`.
pub fn rdm_vacuum_two_magnon(amps: &SectorAmplitudes, sites: &[usize]) -> Result<DensityMatrix> {
    if amps.sector != Sector::VacuumPlusTwoMagnon {
        return Err(Error::domain(
            "rdm_vacuum_two_magnon needs a vacuum-plus-two-magnon state",
        ));
    }
    let chain = amps.chain;
    chain.check_sites(sites)?;
    let n = chain.n_sites();
    let k = sites.len();
    let dim = 1 << k;
    let outside: Vec<usize> = (1..=n).filter(|s| !sites.contains(s)).collect();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);

    // all spins of the subset up
    let mut up = amps.vacuum().norm_sqr();
    for (i, &x) in outside.iter().enumerate() {
        for &y in &outside[i + 1..] {
            up += amps.at_pair(x, y).norm_sqr();
        }
    }
    rho[(0, 0)] = c(up, 0.0);

    // one flip inside, partner outside
    for (a, &sa) in sites.iter().enumerate() {
        for (b, &sb) in sites.iter().enumerate() {
            let mut acc = ZERO;
            for &x in &outside {
                acc += amps.at_pair(sa, x) * amps.at_pair(sb, x).conj();
            }
            rho[(local_bit(a, k), local_bit(b, k))] = acc;
        }
    }

    // both flips inside
    let inner: Vec<(usize, C64)> = (0..k)
        .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
        .map(|(a, b)| (local_bit(a, k) | local_bit(b, k), amps.at_pair(sites[a], sites[b])))
        .collect();
    for &(ia, za) in &inner {
        for &(ib, zb) in &inner {
            rho[(ia, ib)] = za * zb.conj();
        }
        let coh = amps.vacuum() * za.conj();
        rho[(0, ia)] = coh;
        rho[(ia, 0)] = coh.conj();
    }
    Ok(DensityMatrix::from_matrix_unchecked(rho))
}
