//! Entropies, two-qubit correlation measures and tripartite mutual information.
//!
//! All logarithms are base 2. Two-qubit states use the local ordering of
//! [`crate::hilbert`]: index 0 is both spins up, index 1 the second qubit
//! down, index 2 the first qubit down.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, Reduce};
use crate::linalg::{self, c, C64, ZERO};

/// Eigenvalues below this are dropped from entropy sums.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Tolerance on negative eigenvalues before a matrix is declared unphysical.
pub const NEGATIVE_TOL: f64 = 1e-10;

/// Largest magnitude an X-state's off-X elements may carry.
pub const X_FORM_TOL: f64 = 1e-10;

fn plogp(p: f64) -> f64 {
    if p <= EIGEN_FLOOR {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Shannon entropy of a binary distribution `(p, 1 - p)`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    plogp(p) + plogp(1.0 - p)
}

/// Shannon entropy of a spectrum, rejecting eigenvalues below `-1e-10`.
pub fn spectrum_entropy(values: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in values {
        if l < -NEGATIVE_TOL {
            return Err(Error::domain(format!("negative eigenvalue {l:.3e} in entropy")));
        }
        s += plogp(l);
    }
    Ok(s)
}

/// Von Neumann entropy in bits.
pub fn vn_entropy(rho: &DensityMatrix) -> Result<f64> {
    spectrum_entropy(&rho.eigenvalues())
}

/// The six independent elements of a two-qubit X-state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XStateRdm {
    pub u: f64,
    pub v: f64,
    pub w1: f64,
    pub w2: f64,
    pub x: C64,
    pub z: C64,
}

/// Eigenvalues of an X-state and of its partial transpose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XSpectrum {
    pub state: [f64; 4],
    pub transposed: [f64; 4],
}

impl XStateRdm {
    pub fn new(u: f64, v: f64, w1: f64, w2: f64, x: C64, z: C64) -> Result<Self> {
        let sum = u + v + w1 + w2;
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("X-state populations sum to {sum}")));
        }
        for (name, p) in [("u", u), ("v", v), ("w1", w1), ("w2", w2)] {
            if p < -1e-12 {
                return Err(Error::domain(format!("population {name} = {p:.3e} is negative")));
            }
        }
        let (u, v, w1, w2) = (u.max(0.0), v.max(0.0), w1.max(0.0), w2.max(0.0));
        if x.norm_sqr() > w1 * w2 + 1e-10 {
            return Err(Error::domain("|x|^2 exceeds w1 w2"));
        }
        if z.norm_sqr() > u * v + 1e-10 {
            return Err(Error::domain("|z|^2 exceeds u v"));
        }
        Ok(Self { u, v, w1, w2, x, z })
    }

    /// Reads the X elements of a 4x4 density matrix, failing if any element
    /// outside the X pattern exceeds [`X_FORM_TOL`].
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        let m = rho.matrix();
        if m.nrows() != 4 {
            return Err(Error::domain(format!(
                "X-state needs a two-qubit matrix, got dim {}",
                m.nrows()
            )));
        }
        let defect = x_form_defect(m);
        if defect > X_FORM_TOL {
            return Err(Error::unsupported(format!(
                "two-qubit state is not of X form (off-pattern element {defect:.2e})"
            )));
        }
        Self::new(
            m[(0, 0)].re,
            m[(3, 3)].re,
            m[(1, 1)].re,
            m[(2, 2)].re,
            m[(1, 2)],
            m[(0, 3)],
        )
    }

    pub fn to_density(&self) -> DensityMatrix {
        let mut m = DMatrix::<C64>::zeros(4, 4);
        m[(0, 0)] = c(self.u, 0.0);
        m[(1, 1)] = c(self.w1, 0.0);
        m[(2, 2)] = c(self.w2, 0.0);
        m[(3, 3)] = c(self.v, 0.0);
        m[(1, 2)] = self.x;
        m[(2, 1)] = self.x.conj();
        m[(0, 3)] = self.z;
        m[(3, 0)] = self.z.conj();
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// The same state with the two qubits exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            w1: self.w2,
            w2: self.w1,
            x: self.x.conj(),
            ..*self
        }
    }

    pub fn spectrum(&self) -> XSpectrum {
        let pair = |a: f64, b: f64, coh: f64| {
            let r = ((a - b).powi(2) + 4.0 * coh * coh).sqrt();
            [0.5 * (a + b + r), 0.5 * (a + b - r)]
        };
        let (x, z) = (self.x.norm(), self.z.norm());
        let [l1, l2] = pair(self.u, self.v, z);
        let [l3, l4] = pair(self.w1, self.w2, x);
        let [t1, t2] = pair(self.u, self.v, x);
        let [t3, t4] = pair(self.w1, self.w2, z);
        XSpectrum {
            state: [l1, l2, l3, l4],
            transposed: [t1, t2, t3, t4],
        }
    }

    pub fn entropy(&self) -> f64 {
        self.spectrum().state.iter().map(|&l| plogp(l)).sum()
    }

    /// Entropies of the first and second qubit marginals.
    pub fn marginal_entropies(&self) -> (f64, f64) {
        (binary_entropy(self.u + self.w1), binary_entropy(self.u + self.w2))
    }
}

fn x_form_defect(m: &DMatrix<C64>) -> f64 {
    const OFF: [(usize, usize); 8] = [(0, 1), (0, 2), (1, 3), (2, 3), (1, 0), (2, 0), (3, 1), (3, 2)];
    OFF.iter().map(|&(i, j)| m[(i, j)].norm()).fold(0.0, f64::max)
}

/// `xstate_spectrum`: state spectrum and partial-transpose spectrum.
pub fn xstate_spectrum(rdm: &XStateRdm) -> XSpectrum {
    rdm.spectrum()
}

/// Closed-form concurrence of an X-state.
pub fn concurrence_x(rdm: &XStateRdm) -> f64 {
    let a = rdm.x.norm() - (rdm.u * rdm.v).sqrt();
    let b = rdm.z.norm() - (rdm.w1 * rdm.w2).sqrt();
    (2.0 * a.max(b).max(0.0)).min(1.0)
}

fn check_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::domain(format!(
            "expected a two-qubit state, got dim {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// Wootters concurrence from the spectrum of `sqrt(rho) rho~ sqrt(rho)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let m = rho.matrix();
    let (vals, vecs) = linalg::hermitian_eigen(m);
    let sqrt_vals: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let sqrt_rho = DMatrix::from_fn(4, 4, |i, j| {
        (0..4)
            .map(|k| vecs[(i, k)] * sqrt_vals[k] * vecs[(j, k)].conj())
            .sum::<C64>()
    });
    // sigma_y (x) sigma_y is anti-diagonal with signs (-1, 1, 1, -1)
    let flip = |i: usize| if i == 0 || i == 3 { -1.0 } else { 1.0 };
    let tilde = DMatrix::from_fn(4, 4, |i, j| m[(3 - i, 3 - j)].conj() * flip(i) * flip(j));
    let r = &sqrt_rho * tilde * &sqrt_rho;
    let mut lambdas: Vec<f64> = linalg::hermitian_eigenvalues(&r)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// `S(A) + S(B) - S(AB)` for two disjoint groups of qubits of `rho`.
pub fn mutual_information(rho: &DensityMatrix, a: &[usize], b: &[usize]) -> Result<f64> {
    check_disjoint(&[a, b])?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let s_ab = vn_entropy(&rho.partial_trace(&ab)?)?;
    let s_a = vn_entropy(&rho.partial_trace(a)?)?;
    let s_b = vn_entropy(&rho.partial_trace(b)?)?;
    Ok(s_a + s_b - s_ab)
}

fn check_disjoint(groups: &[&[usize]]) -> Result<()> {
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::domain("empty party"));
        }
        for h in &groups[i + 1..] {
            if g.iter().any(|s| h.contains(s)) {
                return Err(Error::domain(format!("parties {g:?} and {h:?} overlap")));
            }
        }
    }
    Ok(())
}

/// Tripartite mutual information from the seven marginal entropies.
pub fn tmi(rho: &DensityMatrix, a: &[usize], b: &[usize], cc: &[usize]) -> Result<f64> {
    check_disjoint(&[a, b, cc])?;
    let join = |xs: &[&[usize]]| xs.iter().flat_map(|x| x.iter().copied()).collect::<Vec<_>>();
    let s = |keep: Vec<usize>| -> Result<f64> { vn_entropy(&rho.partial_trace(&keep)?) };
    let singles = s(a.to_vec())? + s(b.to_vec())? + s(cc.to_vec())?;
    let doubles = s(join(&[a, b]))? + s(join(&[a, cc]))? + s(join(&[b, cc]))?;
    let triple = s(join(&[a, b, cc]))?;
    Ok(singles - doubles + triple)
}

/// Tripartite mutual information as `I(A:B) + I(A:C) - I(A:BC)`.
pub fn tmi_from_mutual_information(rho: &DensityMatrix, a: &[usize], b: &[usize], cc: &[usize]) -> Result<f64> {
    let bc: Vec<usize> = b.iter().chain(cc).copied().collect();
    Ok(mutual_information(rho, a, b)? + mutual_information(rho, a, cc)? - mutual_information(rho, a, &bc)?)
}

/// Maps chain-site groups onto positions inside the reduced matrix of their union.
fn localize(groups: &[&[usize]]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut all = Vec::new();
    let mut local = Vec::new();
    for g in groups {
        let mut l = Vec::new();
        for &s in g.iter() {
            all.push(s);
            l.push(all.len());
        }
        local.push(l);
    }
    (all, local)
}

/// Mutual information between two groups of chain sites of any state.
pub fn mutual_information_of<S: Reduce + ?Sized>(state: &S, a: &[usize], b: &[usize]) -> Result<f64> {
    check_disjoint(&[a, b])?;
    let (all, local) = localize(&[a, b]);
    mutual_information(&state.reduce(&all)?, &local[0], &local[1])
}

/// Tripartite mutual information between three groups of chain sites.
pub fn tmi_of<S: Reduce + ?Sized>(state: &S, a: &[usize], b: &[usize], cc: &[usize]) -> Result<f64> {
    check_disjoint(&[a, b, cc])?;
    let (all, local) = localize(&[a, b, cc]);
    tmi(&state.reduce(&all)?, &local[0], &local[1], &local[2])
}

/// Which qubit of the pair is measured in the discord optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredParty {
    #[default]
    A,
    B,
}

/// Quantum discord of an X-state with a projective measurement on one qubit.
///
/// The measurement optimum is taken between the `sigma_z` and the equatorial
/// direction, the latter with the azimuth aligned to the coherence phases.
pub fn discord(rdm: &XStateRdm, measured: MeasuredParty) -> f64 {
    let r = match measured {
        MeasuredParty::A => *rdm,
        MeasuredParty::B => rdm.swapped(),
    };
    let cond = |a: f64, b: f64| {
        let s = a + b;
        if s <= EIGEN_FLOOR {
            0.0
        } else {
            plogp(a) + plogp(b) - plogp(s)
        }
    };
    // measuring qubit A along z leaves B in diag(u, w1) or diag(w2, v)
    let c_z = cond(r.u, r.w1) + cond(r.w2, r.v);
    let bloch = ((r.u + r.w2 - r.w1 - r.v).powi(2) + 4.0 * (r.x.norm() + r.z.norm()).powi(2)).sqrt();
    let c_xy = binary_entropy(0.5 * (1.0 + bloch.min(1.0)));
    let (s_a, _) = r.marginal_entropies();
    (c_z.min(c_xy) + s_a - r.entropy()).max(0.0)
}

/// Discord of a two-qubit density matrix, which must be of X form.
pub fn discord_of(rho: &DensityMatrix, measured: MeasuredParty) -> Result<f64> {
    check_two_qubit(rho)?;
    Ok(discord(&XStateRdm::from_density(rho)?, measured))
}

/// Negativity `(||rho^{T_A}||_1 - 1) / 2` from the closed-form spectrum.
pub fn negativity_x(rdm: &XStateRdm) -> f64 {
    let norm: f64 = rdm.spectrum().transposed.iter().map(|l| l.abs()).sum();
    ((norm - 1.0) / 2.0).clamp(0.0, 0.5)
}

/// Negativity with respect to the qubit group `party` via a dense partial transpose.
pub fn negativity(rho: &DensityMatrix, party: &[usize]) -> Result<f64> {
    if party.len() >= rho.n_qubits() {
        return Err(Error::domain("negativity needs a proper bipartition"));
    }
    let pt = rho.partial_transpose(party)?;
    let norm: f64 = linalg::hermitian_eigenvalues(&pt).iter().map(|l| l.abs()).sum();
    Ok(((norm - 1.0) / 2.0).max(0.0))
}

/// Two-qubit measures bundled for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureReport {
    pub concurrence: f64,
    pub mutual_information: f64,
    /// `None` when the state is not of X form.
    pub discord: Option<f64>,
    pub negativity: f64,
    pub tmi: Option<f64>,
}

impl MeasureReport {
    pub fn two_qubit(rho: &DensityMatrix) -> Result<Self> {
        check_two_qubit(rho)?;
        let xs = XStateRdm::from_density(rho).ok();
        Ok(Self {
            concurrence: match &xs {
                Some(x) => concurrence_x(x),
                None => concurrence(rho)?,
            },
            mutual_information: mutual_information(rho, &[1], &[2])?,
            discord: xs.as_ref().map(|x| discord(x, MeasuredParty::A)),
            negativity: match &xs {
                Some(x) => negativity_x(x),
                None => negativity(rho, &[1])?,
            },
            tmi: None,
        })
    }
}

/// `p |W3><W3| + q |111><111| + (1 - p - q) |000><000|`.
pub fn build_pq_mixture(p: f64, q: f64) -> Result<DensityMatrix> {
    if !(p >= 0.0 && q >= 0.0 && p + q <= 1.0 + 1e-12) {
        return Err(Error::domain(format!("need p, q >= 0 and p + q <= 1, got ({p}, {q})")));
    }
    let mut m = DMatrix::<C64>::zeros(8, 8);
    for i in [1usize, 2, 4] {
        for j in [1usize, 2, 4] {
            m[(i, j)] = c(p / 3.0, 0.0);
        }
    }
    m[(7, 7)] = c(q, 0.0);
    m[(0, 0)] = c((1.0 - p - q).max(0.0), 0.0);
    DensityMatrix::new(m)
}

/// Projective-measurement discord of a general two-qubit state, minimized by
/// brute force over a `(theta, phi)` grid on the Bloch sphere of qubit `A`.
pub fn discord_brute_force(rho: &DensityMatrix, theta_steps: usize, phi_steps: usize) -> Result<f64> {
    check_two_qubit(rho)?;
    let m = rho.matrix();
    let s_a = vn_entropy(&rho.partial_trace(&[1])?)?;
    let s_ab = vn_entropy(rho)?;
    let mut best = f64::INFINITY;
    for it in 0..=theta_steps {
        let theta = std::f64::consts::PI * it as f64 / theta_steps as f64;
        for ip in 0..phi_steps {
            let phi = 2.0 * std::f64::consts::PI * ip as f64 / phi_steps as f64;
            let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let mut cond = 0.0;
            for sign in [1.0, -1.0] {
                // projector on qubit A: (1 + sign n.sigma) / 2
                let pa = [
                    [
                        c(0.5 * (1.0 + sign * n[2]), 0.0),
                        c(0.5 * sign * n[0], -0.5 * sign * n[1]),
                    ],
                    [
                        c(0.5 * sign * n[0], 0.5 * sign * n[1]),
                        c(0.5 * (1.0 - sign * n[2]), 0.0),
                    ],
                ];
                let mut rb = DMatrix::<C64>::zeros(2, 2);
                for a1 in 0..2 {
                    for a2 in 0..2 {
                        let w = pa[a2][a1];
                        if w == ZERO {
                            continue;
                        }
                        for b1 in 0..2 {
                            for b2 in 0..2 {
                                rb[(b1, b2)] += w * m[(2 * a1 + b1, 2 * a2 + b2)];
                            }
                        }
                    }
                }
                let prob = rb.trace().re;
                if prob > EIGEN_FLOOR {
                    let vals = linalg::hermitian_eigenvalues(&(rb / c(prob, 0.0)));
                    cond += prob * spectrum_entropy(&vals)?;
                }
            }
            best = best.min(cond);
        }
    }
    Ok(best + s_a - s_ab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ChainSpec, PureState};
    use proptest::prelude::*;

    fn bell() -> XStateRdm {
        XStateRdm::new(0.0, 0.0, 0.5, 0.5, c(0.5, 0.0), ZERO).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_basics() {
        let pure = PureState::basis(ChainSpec::periodic(3).unwrap(), &[2]).unwrap();
        assert!(vn_entropy(&pure.to_density()).unwrap().abs() < 1e-14);
        let mixed = DensityMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
        assert!(close(vn_entropy(&mixed).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn entropy_of_coherent_block() {
        let x = XStateRdm::new(0.5, 0.5, 0.0, 0.0, ZERO, c(0.3, 0.0)).unwrap();
        let expected = binary_entropy(0.8);
        assert!(close(vn_entropy(&x.to_density()).unwrap(), expected, 1e-12));
        assert!(close(x.entropy(), expected, 1e-14));
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.1, 0.0), c(-0.1, 0.0)]));
        let rho = DensityMatrix::new(m).unwrap();
        assert!(vn_entropy(&rho).is_err());
    }

    #[test]
    fn bell_spectra() {
        let s = bell().spectrum();
        let mut st = s.state;
        st.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(st, [1.0, 0.0, 0.0, 0.0]);
        let mut tr = s.transposed;
        tr.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(tr, [0.5, 0.5, 0.5, -0.5]);
    }

    #[test]
    fn spectra_match_dense_eigensolver() {
        let x = XStateRdm::new(0.4, 0.1, 0.25, 0.25, c(0.2, 0.0), c(0.1, 0.0)).unwrap();
        let rho = x.to_density();
        let mut closed = x.spectrum().state.to_vec();
        closed.sort_by(f64::total_cmp);
        let dense = rho.eigenvalues();
        for (a, b) in closed.iter().zip(&dense) {
            assert!(close(*a, *b, 1e-12));
        }
        let mut closed = x.spectrum().transposed.to_vec();
        closed.sort_by(f64::total_cmp);
        let dense = linalg::hermitian_eigenvalues(&rho.partial_transpose(&[1]).unwrap());
        for (a, b) in closed.iter().zip(&dense) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn diagonal_state_has_population_spectrum() {
        let x = XStateRdm::new(0.1, 0.2, 0.3, 0.4, ZERO, ZERO).unwrap();
        let s = x.spectrum();
        let mut a = s.state;
        let mut b = s.transposed;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for ((p, q), r) in a.iter().zip(&b).zip([0.1, 0.2, 0.3, 0.4]) {
            assert!(close(*p, r, 1e-15) && close(*q, r, 1e-15));
        }
    }

    #[test]
    fn bell_measures() {
        let b = bell();
        let rho = b.to_density();
        assert!(close(concurrence_x(&b), 1.0, 1e-14));
        assert!(close(concurrence(&rho).unwrap(), 1.0, 1e-10));
        assert!(close(mutual_information(&rho, &[1], &[2]).unwrap(), 2.0, 1e-12));
        assert!(close(discord(&b, MeasuredParty::A), 1.0, 1e-12));
        assert!(close(negativity_x(&b), 0.5, 1e-14));
        assert!(close(negativity(&rho, &[1]).unwrap(), 0.5, 1e-12));
    }

    #[test]
    fn classical_state_measures() {
        let x = XStateRdm::new(0.5, 0.5, 0.0, 0.0, ZERO, ZERO).unwrap();
        let rho = x.to_density();
        assert!(close(mutual_information(&rho, &[1], &[2]).unwrap(), 1.0, 1e-12));
        assert!(discord(&x, MeasuredParty::A).abs() < 1e-12);
        assert_eq!(concurrence_x(&x), 0.0);
        assert!(concurrence(&rho).unwrap() < 1e-10);
        assert_eq!(negativity_x(&x), 0.0);
    }

    #[test]
    fn product_state_has_no_mutual_information() {
        let rho = DensityMatrix::from_diagonal(&[0.12, 0.28, 0.18, 0.42]).unwrap();
        assert!(mutual_information(&rho, &[1], &[2]).unwrap().abs() < 1e-12);
        assert!(mutual_information(&rho, &[1], &[1]).is_err());
    }

    #[test]
    fn concurrence_rejects_wrong_dimension() {
        let rho = DensityMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
        assert!(concurrence(&rho).is_err());
    }

    #[test]
    fn discord_matches_grid_minimization() {
        let x = XStateRdm::new(0.3, 0.1, 0.35, 0.25, c(0.2, 0.0), ZERO).unwrap();
        let brute = discord_brute_force(&x.to_density(), 400, 8).unwrap();
        let closed = discord(&x, MeasuredParty::A);
        assert!(close(closed, brute, 1e-4), "closed {closed} brute {brute}");
    }

    #[test]
    fn discord_party_b_is_discord_of_swapped_state() {
        let x = XStateRdm::new(0.3, 0.1, 0.35, 0.25, c(0.1, 0.15), c(0.05, -0.1)).unwrap();
        let swapped = x.swapped().to_density();
        let brute_b = discord_brute_force(&swapped, 400, 24).unwrap();
        assert!(close(discord(&x, MeasuredParty::B), brute_b, 1e-4));
    }

    #[test]
    fn pq_mixture_limits() {
        assert!(build_pq_mixture(0.7, 0.4).is_err());
        assert!(build_pq_mixture(-0.1, 0.4).is_err());
        for (p, q) in [(0.0, 1.0), (1.0, 0.0)] {
            let rho = build_pq_mixture(p, q).unwrap();
            assert!(close(rho.purity(), 1.0, 1e-12));
            assert!(tmi(&rho, &[1], &[2], &[3]).unwrap().abs() < 1e-10);
        }
        let rho = build_pq_mixture(0.5, 0.25).unwrap();
        assert!(tmi(&rho, &[1], &[2], &[3]).unwrap() < 0.0);
    }

    #[test]
    fn tmi_definitions_agree() {
        let rho = build_pq_mixture(0.4, 0.3).unwrap();
        let a = tmi(&rho, &[1], &[2], &[3]).unwrap();
        let b = tmi_from_mutual_information(&rho, &[1], &[2], &[3]).unwrap();
        assert!(close(a, b, 1e-12));
    }

    #[test]
    fn tmi_of_ghz4_is_one() {
        let ch = ChainSpec::periodic(4).unwrap();
        let mut amps = vec![ZERO; 16];
        amps[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[15] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let ghz = PureState::new(ch, amps).unwrap();
        assert!(close(tmi_of(&ghz, &[1], &[2], &[3]).unwrap(), 1.0, 1e-12));
        assert!(tmi_of(&ghz, &[1], &[2], &[2]).is_err());
    }

    #[test]
    fn report_on_bell_pair() {
        let r = MeasureReport::two_qubit(&bell().to_density()).unwrap();
        assert!(close(r.concurrence, 1.0, 1e-14));
        assert_eq!(r.discord.map(|d| (d - 1.0).abs() < 1e-12), Some(true));
        assert!(r.tmi.is_none());
    }

    fn arb_xstate() -> impl Strategy<Value = XStateRdm> {
        (
            prop::array::uniform4(0.0f64..1.0),
            0.0f64..1.0,
            0.0f64..1.0,
            0.0f64..std::f64::consts::TAU,
            0.0f64..std::f64::consts::TAU,
        )
            .prop_filter_map("nonzero weights", |(w, fx, fz, px, pz)| {
                let s: f64 = w.iter().sum();
                (s > 1e-3).then(|| {
                    let [u, v, w1, w2] = w.map(|p| p / s);
                    let x = C64::from_polar(fx * (w1 * w2).sqrt(), px);
                    let z = C64::from_polar(fz * (u * v).sqrt(), pz);
                    XStateRdm::new(u, v, w1, w2, x, z).unwrap()
                })
            })
    }

    fn arb_pure3() -> impl Strategy<Value = PureState> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8).prop_filter_map("nonzero", |v| {
            let n: f64 = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            (n > 1e-3).then(|| {
                let amps = v.into_iter().map(|(a, b)| c(a / n, b / n)).collect();
                PureState::new(ChainSpec::periodic(3).unwrap(), amps).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn concurrence_paths_agree(x in arb_xstate()) {
            let general = concurrence(&x.to_density()).unwrap();
            prop_assert!((general - concurrence_x(&x)).abs() < 1e-8);
        }

        #[test]
        fn ppt_matches_concurrence(x in arb_xstate()) {
            let cn = concurrence_x(&x);
            let ng = negativity_x(&x);
            // away from the separability boundary the two witnesses agree
            prop_assume!((cn > 1e-6 || cn == 0.0) && (ng > 1e-6 || ng == 0.0));
            prop_assert_eq!(cn > 1e-8, ng > 1e-8);
            prop_assert!((negativity(&x.to_density(), &[1]).unwrap() - ng).abs() < 1e-10);
        }

        #[test]
        fn measures_stay_in_range(x in arb_xstate()) {
            let rho = x.to_density();
            let cn = concurrence_x(&x);
            prop_assert!((0.0..=1.0).contains(&cn));
            prop_assert!((0.0..=0.5).contains(&negativity_x(&x)));
            prop_assert!(mutual_information(&rho, &[1], &[2]).unwrap() > -1e-10);
            let d = discord(&x, MeasuredParty::A);
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&d));
        }

        #[test]
        fn tmi_vanishes_on_pure_three_party_states(psi in arb_pure3()) {
            prop_assert!(tmi_of(&psi, &[1], &[2], &[3]).unwrap().abs() < 1e-10);
        }

        #[test]
        fn tmi_is_permutation_invariant(p in 0.0f64..1.0, q in 0.0f64..1.0) {
            prop_assume!(p + q <= 1.0);
            let rho = build_pq_mixture(p, q).unwrap();
            let base = tmi(&rho, &[1], &[2], &[3]).unwrap();
            for perm in [[1, 3, 2], [2, 1, 3], [2, 3, 1], [3, 1, 2], [3, 2, 1]] {
                let t = tmi(&rho, &[perm[0]], &[perm[1]], &[perm[2]]).unwrap();
                prop_assert!((t - base).abs() < 1e-10);
            }
        }
    }
}
