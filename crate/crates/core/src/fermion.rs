//! Transverse-field XY dynamics through Jordan-Wigner fermions.
//!
//! A fermion is a down spin, `n_j = (1 - sz_j) / 2`, and the Hamiltonian
//! `H = sum_j Jx sx sx + Jy sy sy + h sz` becomes
//! `sum_j (Jx+Jy)(c+_{j+1} c_j + h.c.) + (Jx-Jy)(c+_j c+_{j+1} + h.c.) + h (1 - 2 n_j)`.
//! A single fermion on top of the vacuum has odd parity, so the boundary bond
//! closes periodically and the momenta are `q = 2 pi m / N`, `m = 0..N-1`.
//!
//! Each Heisenberg-picture operator is a linear form
//! `c_j(t) = sum_l P(j-l) c_l + Q(j-l) c+_l`, and expectation values in the
//! state `(alpha c+_1 + beta c+_2)|vac>` are Pfaffians of vacuum contractions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Dynamics;
use crate::hilbert::{self, ChainSpec, DensityMatrix, Reduce};
use crate::linalg::{c, C64, ZERO};
use crate::measures::XStateRdm;

/// Modes with `omega` below this are treated as critical.
pub const CRITICAL_OMEGA: f64 = 1e-12;

/// Default number of midpoint nodes on `[0, pi]` for the quadrature backend.
pub const QUADRATURE_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XYParams {
    pub jx: f64,
    pub jy: f64,
    pub h: f64,
}

impl XYParams {
    pub fn new(jx: f64, jy: f64, h: f64) -> Result<Self> {
        if !(jx.is_finite() && jy.is_finite() && h.is_finite()) {
            return Err(Error::domain("XY couplings must be finite"));
        }
        if jx == 0.0 && jy == 0.0 {
            return Err(Error::domain("XY model needs (Jx, Jy) != (0, 0)"));
        }
        Ok(Self { jx, jy, h })
    }

    pub fn ising(h: f64) -> Self {
        Self { jx: 1.0, jy: 0.0, h }
    }

    /// Whether the magnon number is conserved (`Jx == Jy`).
    pub fn is_isotropic(&self) -> bool {
        self.jx == self.jy
    }
}

/// `omega_q = 2 sqrt(((Jx+Jy) cos q + h)^2 + ((Jx-Jy) sin q)^2)`.
pub fn dispersion(q: f64, p: &XYParams) -> f64 {
    let a = (p.jx + p.jy) * q.cos() + p.h;
    let b = (p.jx - p.jy) * q.sin();
    2.0 * (a * a + b * b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeData {
    pub q: f64,
    pub omega: f64,
    pub u: f64,
    pub v: f64,
}

/// Bogoliubov coefficients `u_q = sqrt(1/2 + ((Jx+Jy) cos q + h) / omega_q)`,
/// `v_q = sqrt(1 - u_q^2)`. Critical modes are rejected.
pub fn bogoliubov(q: f64, p: &XYParams) -> Result<ModeData> {
    let omega = dispersion(q, p);
    if omega < CRITICAL_OMEGA {
        return Err(Error::domain(format!("critical mode at q = {q}: omega = {omega:.3e}")));
    }
    let a = (p.jx + p.jy) * q.cos() + p.h;
    let u2 = (0.5 + a / omega).clamp(0.0, 1.0);
    Ok(ModeData {
        q,
        omega,
        u: u2.sqrt(),
        v: (1.0 - u2).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEvolution {
    pub q: f64,
    pub t: f64,
    pub chi: C64,
    pub xi: C64,
}

/// `chi = e^{-i w t} u^2 + e^{i w t} v^2`, `xi = -(q/|q|) 2 u v sin(w t)` from
/// the Bogoliubov coefficients. A critical mode does not evolve.
pub fn mode_evolution(q: f64, t: f64, p: &XYParams) -> ModeEvolution {
    match bogoliubov(q, p) {
        Ok(m) => {
            let w = m.omega * t;
            let chi = C64::from_polar(m.u * m.u, -w) + C64::from_polar(m.v * m.v, w);
            let sign = if q == 0.0 { 0.0 } else { q.signum() };
            ModeEvolution {
                q,
                t,
                chi,
                xi: c(-sign * 2.0 * m.u * m.v * w.sin(), 0.0),
            }
        }
        Err(_) => ModeEvolution {
            q,
            t,
            chi: c(1.0, 0.0),
            xi: ZERO,
        },
    }
}

fn sinc_t(e: f64, t: f64) -> f64 {
    // sin(e t) / e, continuous through e = 0
    let x = e * t;
    if x.abs() < 1e-8 {
        t * (1.0 - x * x / 6.0)
    } else {
        x.sin() / e
    }
}

/// Mode coefficients of `c_q(t) = chi c_q + xi c+_{-q}` for the Hamiltonian in
/// the module header, obtained from the 2x2 equation of motion.
pub fn heisenberg_mode(q: f64, t: f64, p: &XYParams) -> ModeEvolution {
    let a = 2.0 * ((p.jx + p.jy) * q.cos() - p.h);
    let b2 = 2.0 * (p.jx - p.jy) * q.sin();
    let e = (a * a + b2 * b2).sqrt();
    let s = sinc_t(e, t);
    ModeEvolution {
        q,
        t,
        chi: c((e * t).cos(), -a * s),
        xi: c(b2 * s, 0.0),
    }
}

/// Momenta of the odd-parity sector.
pub fn odd_parity_momenta(n: usize) -> Vec<f64> {
    (0..n).map(|m| 2.0 * PI * m as f64 / n as f64).collect()
}

/// Momenta of the even-parity sector, `2 pi (m + 1/2) / N`.
pub fn even_parity_momenta(n: usize) -> Vec<f64> {
    (0..n).map(|m| 2.0 * PI * (m as f64 + 0.5) / n as f64).collect()
}

/// How the momentum sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Exact sums over the `N` momenta of the periodic chain.
    FiniteChain,
    /// Integrals over `q` for an infinite chain, midpoint rule with the given
    /// number of nodes on `[0, pi]`. Sites `1..=N` are observable and the
    /// window `1-N..=2N` carries the evolution.
    Quadrature { points: usize },
}

/// `P(d)` and `Q(d)` tables at one time.
#[derive(Debug, Clone)]
struct Kernel {
    n: usize,
    periodic: bool,
    p: Vec<C64>,
    q: Vec<C64>,
}

impl Kernel {
    fn finite(n: usize, t: f64, params: &XYParams) -> Self {
        let modes: Vec<ModeEvolution> = odd_parity_momenta(n)
            .into_iter()
            .map(|q| heisenberg_mode(q, t, params))
            .collect();
        let mut p = vec![ZERO; n];
        let mut q = vec![ZERO; n];
        for d in 0..n {
            for m in &modes {
                let ph = C64::from_polar(1.0 / n as f64, m.q * d as f64);
                p[d] += ph * m.chi;
                q[d] += ph * m.xi;
            }
        }
        Self {
            n,
            periodic: true,
            p,
            q,
        }
    }

    /// Tables for `|d| < 2n`, enough for sites `1..=n` against the window
    /// `1-n..=2n` of an infinite chain.
    fn quadrature(n: usize, t: f64, params: &XYParams, points: usize) -> Self {
        let h = PI / points as f64;
        let modes: Vec<ModeEvolution> = (0..points)
            .map(|k| heisenberg_mode((k as f64 + 0.5) * h, t, params))
            .collect();
        let span = 4 * n - 1;
        let mut p = vec![ZERO; span];
        let mut q = vec![ZERO; span];
        for (idx, (pp, qq)) in p.iter_mut().zip(q.iter_mut()).enumerate() {
            let d = idx as f64 - (2 * n - 1) as f64;
            for m in &modes {
                *pp += m.chi * (m.q * d).cos();
                *qq += m.xi * (m.q * d).sin();
            }
            *pp *= h / PI;
            *qq *= c(0.0, h / PI);
        }
        Self {
            n,
            periodic: false,
            p,
            q,
        }
    }

    #[inline]
    fn index(&self, d: i64) -> usize {
        if self.periodic {
            d.rem_euclid(self.n as i64) as usize
        } else {
            (d + 2 * self.n as i64 - 1) as usize
        }
    }

    #[inline]
    fn p(&self, d: i64) -> C64 {
        self.p[self.index(d)]
    }

    #[inline]
    fn q(&self, d: i64) -> C64 {
        self.q[self.index(d)]
    }
}

/// A linear combination `sum_l ann[l] c_l + cre[l] c+_l` in some mode basis.
#[derive(Debug, Clone)]
struct Form {
    ann: Vec<C64>,
    cre: Vec<C64>,
}

impl Form {
    fn adjoint(&self) -> Form {
        Form {
            ann: self.cre.iter().map(|z| z.conj()).collect(),
            cre: self.ann.iter().map(|z| z.conj()).collect(),
        }
    }
}

/// `<vac| x y |vac>`.
fn contraction(x: &Form, y: &Form) -> C64 {
    x.ann.iter().zip(&y.cre).map(|(a, b)| a * b).sum()
}

fn pfaffian(m: &[Vec<C64>], idx: &[usize]) -> C64 {
    if idx.is_empty() {
        return c(1.0, 0.0);
    }
    let first = idx[0];
    let mut acc = ZERO;
    for k in 1..idx.len() {
        let a = m[first][idx[k]];
        if a == ZERO {
            continue;
        }
        let rest: Vec<usize> = idx[1..]
            .iter()
            .enumerate()
            .filter(|&(i, _)| i + 1 != k)
            .map(|(_, &x)| x)
            .collect();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc += a * sign * pfaffian(m, &rest);
    }
    acc
}

/// Vacuum expectation of an ordered product of linear forms.
fn wick(forms: &[&Form]) -> C64 {
    let k = forms.len();
    if k % 2 == 1 {
        return ZERO;
    }
    let mut m = vec![vec![ZERO; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            m[i][j] = contraction(forms[i], forms[j]);
        }
    }
    let idx: Vec<usize> = (0..k).collect();
    pfaffian(&m, &idx)
}

/// Nearest-neighbour correlators of sites `j` and `j+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorSet {
    pub j: usize,
    pub t: f64,
    /// `<c+_j c_j>`
    pub occupation_j: f64,
    /// `<c+_{j+1} c_{j+1}>`
    pub occupation_k: f64,
    /// `<c_j c_{j+1}>`
    pub pair: C64,
    /// `<c_j c+_{j+1}>`
    pub hopping: C64,
    /// `<n_j n_{j+1}>`
    pub density_density: f64,
}

impl CorrelatorSet {
    /// The X-state of sites `(j, j+1)`.
    pub fn to_xstate(&self) -> Result<XStateRdm> {
        let (nj, nk, nn) = (self.occupation_j, self.occupation_k, self.density_density);
        XStateRdm::new(
            1.0 - nj - nk + nn,
            nn,
            nk - nn,
            nj - nn,
            -self.hopping.conj(),
            -self.pair.conj(),
        )
    }
}

/// The time-evolved XY state seen through nearest-neighbour correlators.
#[derive(Debug, Clone)]
pub struct XYState {
    chain: ChainSpec,
    t: f64,
    kernel: Kernel,
    /// First site of the operator window.
    lo: i64,
    initial: Form,
}

impl XYState {
    fn new(chain: ChainSpec, params: &XYParams, alpha: C64, beta: C64, t: f64, backend: Backend) -> Result<Self> {
        let norm_sqr = alpha.norm_sqr() + beta.norm_sqr();
        if (norm_sqr - 1.0).abs() > hilbert::NORM_SLOP {
            return Err(Error::Normalization {
                norm_sqr,
                tolerance: hilbert::NORM_SLOP,
            });
        }
        let scale = 1.0 / norm_sqr.sqrt();
        let n = chain.n_sites();
        let kernel = match backend {
            Backend::FiniteChain => Kernel::finite(n, t, params),
            Backend::Quadrature { points } => {
                if points == 0 {
                    return Err(Error::domain("quadrature needs at least one node"));
                }
                Kernel::quadrature(n, t, params, points)
            }
        };
        let (lo, len) = if kernel.periodic { (1, n) } else { (1 - n as i64, 3 * n) };
        let mut cre = vec![ZERO; len];
        cre[(1 - lo) as usize] = alpha * scale;
        cre[(2 - lo) as usize] = beta * scale;
        Ok(Self {
            chain,
            t,
            kernel,
            lo,
            initial: Form {
                ann: vec![ZERO; len],
                cre,
            },
        })
    }

    /// `c_j(t)` as a form over the initial-time site operators.
    fn annihilator(&self, j: usize) -> Form {
        let len = self.initial.cre.len();
        let mut ann = vec![ZERO; len];
        let mut cre = vec![ZERO; len];
        for (i, (a, b)) in ann.iter_mut().zip(cre.iter_mut()).enumerate() {
            let d = j as i64 - (self.lo + i as i64);
            *a = self.kernel.p(d);
            *b = self.kernel.q(d);
        }
        Form { ann, cre }
    }

    fn expect(&self, ops: &[&Form]) -> C64 {
        let bra = self.initial.adjoint();
        let mut all: Vec<&Form> = Vec::with_capacity(ops.len() + 2);
        all.push(&bra);
        all.extend_from_slice(ops);
        all.push(&self.initial);
        wick(&all)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// `<c+_j c_j>`.
    pub fn occupation(&self, j: usize) -> Result<f64> {
        self.chain.check_site(j)?;
        let cj = self.annihilator(j);
        Ok(self.expect(&[&cj.adjoint(), &cj]).re)
    }

    pub fn correlators(&self, j: usize) -> Result<CorrelatorSet> {
        self.chain.check_site(j)?;
        if j >= self.chain.n_sites() {
            return Err(Error::unsupported(
                "the wrap-around pair carries a parity string; use the exact-diagonalization backend",
            ));
        }
        let cj = self.annihilator(j);
        let ck = self.annihilator(j + 1);
        let (cjd, ckd) = (cj.adjoint(), ck.adjoint());
        Ok(CorrelatorSet {
            j,
            t: self.t,
            occupation_j: self.expect(&[&cjd, &cj]).re,
            occupation_k: self.expect(&[&ckd, &ck]).re,
            pair: self.expect(&[&cj, &ck]),
            hopping: self.expect(&[&cj, &ckd]),
            density_density: self.expect(&[&cjd, &cj, &ckd, &ck]).re,
        })
    }

    pub fn nn_rdm(&self, j: usize) -> Result<XStateRdm> {
        self.correlators(j)?.to_xstate()
    }
}

impl Reduce for XYState {
    fn n_sites(&self) -> usize {
        self.chain.n_sites()
    }

    fn reduce(&self, sites: &[usize]) -> Result<DensityMatrix> {
        self.chain.check_sites(sites)?;
        match *sites {
            [j] => {
                let n = self.occupation(j)?;
                DensityMatrix::from_diagonal(&[1.0 - n, n])
            }
            [j, k] if k == j + 1 => Ok(self.nn_rdm(j)?.to_density()),
            [j, k] if j == k + 1 => Ok(self.nn_rdm(k)?.swapped().to_density()),
            _ => Err(Error::unsupported(format!(
                "analytic XY reduction covers single sites and nearest neighbours, not {sites:?}; \
                 use the exact-diagonalization backend"
            ))),
        }
    }
}

/// `(alpha c+_1 + beta c+_2)|vac>` under the XY Hamiltonian.
#[derive(Debug, Clone)]
pub struct XYDynamics {
    pub chain: ChainSpec,
    pub params: XYParams,
    pub alpha: C64,
    pub beta: C64,
    pub backend: Backend,
}

impl XYDynamics {
    pub fn new(chain: ChainSpec, params: XYParams, alpha: C64, beta: C64) -> Self {
        Self {
            chain,
            params,
            alpha,
            beta,
            backend: Backend::FiniteChain,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn state(&self, t: f64) -> Result<XYState> {
        XYState::new(self.chain, &self.params, self.alpha, self.beta, t, self.backend)
    }
}

impl Dynamics for XYDynamics {
    fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    fn state_at(&self, t: f64) -> Result<Box<dyn Reduce + Send + Sync>> {
        Ok(Box::new(self.state(t)?))
    }
}

/// The two-point part of [`CorrelatorSet`] at site `j`.
pub fn two_point_correlators(
    j: usize,
    t: f64,
    alpha: C64,
    beta: C64,
    chain: &ChainSpec,
    params: &XYParams,
) -> Result<CorrelatorSet> {
    XYDynamics::new(*chain, *params, alpha, beta).state(t)?.correlators(j)
}

/// `<c+_j c_j c+_{j+1} c_{j+1}>`.
pub fn density_density_correlator(
    j: usize,
    t: f64,
    alpha: C64,
    beta: C64,
    chain: &ChainSpec,
    params: &XYParams,
) -> Result<C64> {
    let st = XYDynamics::new(*chain, *params, alpha, beta).state(t)?;
    st.chain.check_site(j)?;
    if j >= chain.n_sites() {
        return Err(Error::unsupported("wrap-around pair"));
    }
    let cj = st.annihilator(j);
    let ck = st.annihilator(j + 1);
    Ok(st.expect(&[&cj.adjoint(), &cj, &ck.adjoint(), &ck]))
}

/// X-state of sites `(j, k)`; only `k = j + 1` is available analytically.
pub fn nn_rdm_xy(
    j: usize,
    k: usize,
    t: f64,
    alpha: C64,
    beta: C64,
    chain: &ChainSpec,
    params: &XYParams,
) -> Result<XStateRdm> {
    if k != j + 1 {
        return Err(Error::unsupported(format!(
            "analytic XY correlators exist for nearest neighbours only, not ({j}, {k}); \
             use the exact-diagonalization backend"
        )));
    }
    two_point_correlators(j, t, alpha, beta, chain, params)?.to_xstate()
}

/// Correlators evaluated directly in the momentum basis, one Wick expansion
/// over the modes `c_q(t) = chi_q c_q + xi_q c+_{-q}`. Slow reference path.
pub fn momentum_space_correlators(
    j: usize,
    t: f64,
    alpha: C64,
    beta: C64,
    chain: &ChainSpec,
    params: &XYParams,
) -> Result<CorrelatorSet> {
    chain.check_site(j)?;
    let n = chain.n_sites();
    if j >= n {
        return Err(Error::unsupported("wrap-around pair"));
    }
    let qs = odd_parity_momenta(n);
    let modes: Vec<ModeEvolution> = qs.iter().map(|&q| heisenberg_mode(q, t, params)).collect();
    let minus = |m: usize| (n - m) % n;
    let norm = 1.0 / (n as f64).sqrt();
    let site_op = |x: usize| {
        let mut ann = vec![ZERO; n];
        let mut cre = vec![ZERO; n];
        for (m, mode) in modes.iter().enumerate() {
            let ph = C64::from_polar(norm, mode.q * x as f64);
            ann[m] += ph * mode.chi;
            cre[minus(m)] += ph * mode.xi;
        }
        Form { ann, cre }
    };
    let initial = Form {
        ann: vec![ZERO; n],
        cre: qs
            .iter()
            .map(|&q| (alpha * C64::from_polar(1.0, -q) + beta * C64::from_polar(1.0, -2.0 * q)) * norm)
            .collect(),
    };
    let bra = initial.adjoint();
    let expect = |ops: &[&Form]| {
        let mut all = vec![&bra];
        all.extend_from_slice(ops);
        all.push(&initial);
        wick(&all)
    };
    let cj = site_op(j);
    let ck = site_op(j + 1);
    let (cjd, ckd) = (cj.adjoint(), ck.adjoint());
    Ok(CorrelatorSet {
        j,
        t,
        occupation_j: expect(&[&cjd, &cj]).re,
        occupation_k: expect(&[&ckd, &ck]).re,
        pair: expect(&[&cj, &ck]),
        hopping: expect(&[&cj, &ckd]),
        density_density: expect(&[&cjd, &cj, &ckd, &ck]).re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures;

    fn chain(n: usize) -> ChainSpec {
        ChainSpec::periodic(n).unwrap()
    }

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn dispersion_examples() {
        let iso = XYParams::new(0.5, 0.5, 0.0).unwrap();
        assert!(dispersion(PI / 2.0, &iso).abs() < 1e-15);
        let p = XYParams::new(0.7, 0.3, 1.0).unwrap();
        assert!((dispersion(PI / 2.0, &p) - 2.0 * 1.16f64.sqrt()).abs() < 1e-12);
        for k in 0..50 {
            let q = -PI + 2.0 * PI * k as f64 / 50.0;
            assert_eq!(dispersion(q, &p), dispersion(-q, &p));
        }
    }

    #[test]
    fn bogoliubov_limits() {
        let p = XYParams::new(0.7, 0.3, 1e6).unwrap();
        let m = bogoliubov(0.4, &p).unwrap();
        assert!((m.u - 1.0).abs() < 1e-6 && m.v < 1e-3);
        let p = XYParams::new(0.7, 0.3, 0.1).unwrap();
        for k in 0..40 {
            let m = bogoliubov(0.1 + 0.15 * k as f64, &p).unwrap();
            assert!((m.u * m.u + m.v * m.v - 1.0).abs() < 1e-12);
            assert!((m.omega - dispersion(m.q, &p)).abs() < 1e-12);
        }
        let crit = XYParams::new(0.5, 0.5, 0.0).unwrap();
        assert!(bogoliubov(PI / 2.0, &crit).is_err());
    }

    #[test]
    fn mode_evolution_is_unitary() {
        let p = XYParams::new(0.7, 0.3, 0.1).unwrap();
        let m0 = mode_evolution(0.8, 0.0, &p);
        assert!((m0.chi - c(1.0, 0.0)).norm() < 1e-15 && m0.xi.norm() < 1e-15);
        for k in 0..20 {
            for t in [0.3, 2.0, 7.5] {
                let q = -3.0 + 0.3 * k as f64;
                let m = mode_evolution(q, t, &p);
                assert!((m.chi.norm_sqr() + m.xi.norm_sqr() - 1.0).abs() < 1e-10);
                let h = heisenberg_mode(q, t, &p);
                assert!((h.chi.norm_sqr() + h.xi.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn heisenberg_mode_is_mode_evolution_at_reversed_field() {
        for (jx, jy) in [(0.7, 0.3), (0.2, 0.9)] {
            for h in [0.1, 1.0, 10.0] {
                let p = XYParams::new(jx, jy, h).unwrap();
                let flipped = XYParams { h: -h, ..p };
                let sign = (jx - jy).signum();
                for k in 1..30 {
                    let q = -PI + 0.2 * k as f64;
                    let t = 0.37 * k as f64;
                    let ours = heisenberg_mode(q, t, &p);
                    let reference = mode_evolution(q, t, &flipped);
                    assert!((ours.chi - reference.chi).norm() < 1e-12);
                    assert!((ours.xi + reference.xi * sign).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn strong_field_suppresses_pairing() {
        let p = XYParams::new(0.7, 0.3, 10.0).unwrap();
        for k in 0..200 {
            let q = -PI + 2.0 * PI * k as f64 / 200.0;
            for i in 0..=100 {
                assert!(mode_evolution(q, 0.1 * i as f64, &p).xi.norm() < 0.05);
            }
        }
        let max_xi = |h: f64| {
            let p = XYParams::new(0.7, 0.3, h).unwrap();
            (0..100)
                .map(|k| heisenberg_mode(-PI + 2.0 * PI * k as f64 / 100.0, 0.1, &p).xi.norm())
                .fold(0.0, f64::max)
        };
        assert!(max_xi(1.0) > max_xi(3.0) && max_xi(3.0) > max_xi(10.0));
    }

    #[test]
    fn pfaffian_of_four() {
        let mut m = vec![vec![ZERO; 4]; 4];
        let vals = [
            (0, 1, 2.0),
            (0, 2, 3.0),
            (0, 3, 5.0),
            (1, 2, 7.0),
            (1, 3, 11.0),
            (2, 3, 13.0),
        ];
        for (i, j, v) in vals {
            m[i][j] = c(v, 0.0);
        }
        let pf = pfaffian(&m, &[0, 1, 2, 3]);
        assert_eq!(pf, c(2.0 * 13.0 - 3.0 * 11.0 + 5.0 * 7.0, 0.0));
    }

    #[test]
    fn initial_correlators() {
        let ch = chain(10);
        let p = XYParams::new(0.7, 0.3, 0.1).unwrap();
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let st = XYDynamics::new(ch, p, a, b).state(0.0).unwrap();
        for j in 1..=10 {
            let expected = match j {
                1 => 0.36,
                2 => 0.64,
                _ => 0.0,
            };
            assert!((st.occupation(j).unwrap() - expected).abs() < 1e-14);
        }
        let cs = st.correlators(1).unwrap();
        assert!(cs.density_density.abs() < 1e-14);
        assert!(cs.pair.norm() < 1e-14);
    }

    #[test]
    fn bell_pair_at_time_zero() {
        let ch = chain(8);
        let p = XYParams::new(0.7, 0.3, 1.0).unwrap();
        let x = nn_rdm_xy(1, 2, 0.0, c(S, 0.0), c(S, 0.0), &ch, &p).unwrap();
        assert!((x.x.norm() - 0.5).abs() < 1e-14);
        assert!((x.w1 - 0.5).abs() < 1e-14 && (x.w2 - 0.5).abs() < 1e-14);
        assert!((measures::concurrence_x(&x) - 1.0).abs() < 1e-12);
        let far = nn_rdm_xy(3, 4, 0.0, c(S, 0.0), c(S, 0.0), &ch, &p).unwrap();
        assert!((far.u - 1.0).abs() < 1e-14);
        assert!(nn_rdm_xy(1, 3, 0.0, c(S, 0.0), c(S, 0.0), &ch, &p).is_err());
    }

    #[test]
    fn momentum_path_agrees_with_site_path() {
        let ch = chain(9);
        let p = XYParams::new(0.7, 0.3, 0.4).unwrap();
        for t in [0.3, 1.7] {
            for j in 1..9 {
                let a = two_point_correlators(j, t, c(S, 0.0), c(0.0, S), &ch, &p).unwrap();
                let b = momentum_space_correlators(j, t, c(S, 0.0), c(0.0, S), &ch, &p).unwrap();
                assert!((a.occupation_j - b.occupation_j).abs() < 1e-12);
                assert!((a.pair - b.pair).norm() < 1e-12);
                assert!((a.hopping - b.hopping).norm() < 1e-12);
                assert!((a.density_density - b.density_density).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn density_density_is_real() {
        let ch = chain(10);
        let p = XYParams::new(0.7, 0.3, 1.0).unwrap();
        for t in [0.0, 0.8, 3.3] {
            let z = density_density_correlator(4, t, c(S, 0.0), c(S, 0.0), &ch, &p).unwrap();
            assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn isotropic_chain_conserves_particles() {
        let ch = chain(12);
        let p = XYParams::new(0.5, 0.5, 0.3).unwrap();
        let st = XYDynamics::new(ch, p, c(S, 0.0), c(S, 0.0)).state(2.4).unwrap();
        let total: f64 = (1..=12).map(|j| st.occupation(j).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_field_nearly_conserves_particles() {
        // pair creation out of the vacuum is extensive, so bound the density
        let ch = chain(20);
        let p = XYParams::new(0.7, 0.3, 10.0).unwrap();
        let dynamics = XYDynamics::new(ch, p, c(S, 0.0), c(S, 0.0));
        for k in 0..=20 {
            let st = dynamics.state(0.5 * k as f64).unwrap();
            let total: f64 = (1..=20).map(|j| st.occupation(j).unwrap()).sum();
            assert!(
                (total - 1.0).abs() / 20.0 < 1e-3,
                "t = {} total = {total}",
                0.5 * k as f64
            );
        }
    }

    #[test]
    fn quadrature_matches_long_finite_chain() {
        let p = XYParams::new(0.7, 0.3, 1.0).unwrap();
        let long = XYDynamics::new(chain(256), p, c(S, 0.0), c(S, 0.0));
        let quad = XYDynamics::new(chain(256), p, c(S, 0.0), c(S, 0.0)).with_backend(Backend::Quadrature {
            points: QUADRATURE_POINTS,
        });
        for t in [0.5, 2.0, 4.0] {
            let a = long.state(t).unwrap();
            let b = quad.state(t).unwrap();
            for j in 1..=12 {
                let x = a.nn_rdm(j).unwrap();
                let y = b.nn_rdm(j).unwrap();
                assert!((x.u - y.u).abs() < 1e-4 && (x.x - y.x).norm() < 1e-4 && (x.z - y.z).norm() < 1e-4);
            }
        }
    }

    #[test]
    fn reduce_covers_neighbours_only() {
        let st = XYDynamics::new(chain(8), XYParams::ising(0.0), c(S, 0.0), c(S, 0.0))
            .state(0.5)
            .unwrap();
        assert!(st.reduce(&[2, 3]).is_ok());
        assert!(st.reduce(&[3, 2]).is_ok());
        assert!(st.reduce(&[5]).is_ok());
        assert!(matches!(st.reduce(&[1, 3]), Err(Error::Unsupported(_))));
        assert!(matches!(st.reduce(&[8, 1]), Err(Error::Unsupported(_))));
        assert!(matches!(st.reduce(&[1, 2, 3]), Err(Error::Unsupported(_))));
    }
}
