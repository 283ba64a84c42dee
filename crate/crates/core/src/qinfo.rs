//! From scattering amplitudes to the two-qubit state of the double dot, and
//! the two numbers we read off it: concurrence between the dots and the von
//! Neumann entropy that measures how much the dots are entangled with the
//! scattered carrier.
//!
//! The dot state lives in the product basis |0_L0_R⟩, |0_L1_R⟩, |1_L0_R⟩,
//! |1_L1_R⟩. Entropies are in nats.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bound::{ChannelBasis, OverlapTable};
use crate::error::{Error, Result};
use crate::qtbm::{ChannelKind, ScatteringSolution};

/// Qubit labels whose carrier states share one kinetic energy. ε₁ and ε₂ are
/// treated as degenerate, so the carrier cannot tell them apart.
pub const CARRIER_GROUPS: [&[usize]; 3] = [&[0], &[1, 2], &[3]];

/// Tolerance for the structural checks on density matrices.
pub const STATE_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Normalized outgoing amplitudes b̃_n, c̃_n over the four qubit states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputChannelState {
    /// Qubit label of the initial dot state.
    pub input: usize,
    pub reflected: [Complex64; 4],
    pub transmitted: [Complex64; 4],
    /// Flux fraction carried by open channels outside the qubit subspace,
    /// dropped before renormalizing.
    pub leaked: f64,
}

impl OutputChannelState {
    /// Normalize raw amplitudes so that Σ(|b̃|² + |c̃|²) = 1.
    pub fn from_amplitudes(
        input: usize,
        reflected: [Complex64; 4],
        transmitted: [Complex64; 4],
    ) -> Result<Self> {
        if input > 3 {
            return Err(Error::Validation(format!("qubit label {input} out of range")));
        }
        let total: f64 = reflected.iter().chain(&transmitted).map(|a| a.norm_sqr()).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateInput);
        }
        let s = total.sqrt().recip();
        Ok(OutputChannelState {
            input,
            reflected: reflected.map(|a| a * s),
            transmitted: transmitted.map(|a| a * s),
            leaked: 0.0,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.reflected.iter().chain(&self.transmitted).map(|a| a.norm_sqr()).sum()
    }

    /// |b̃_l|² + |c̃_l|².
    pub fn probability(&self, l: usize) -> f64 {
        self.reflected[l].norm_sqr() + self.transmitted[l].norm_sqr()
    }

    /// The same state times a global phase e^{iφ}.
    pub fn with_phase(&self, phi: f64) -> Self {
        let p = Complex64::from_polar(1.0, phi);
        OutputChannelState {
            reflected: self.reflected.map(|a| a * p),
            transmitted: self.transmitted.map(|a| a * p),
            ..self.clone()
        }
    }
}

/// Flux-normalized amplitudes of a solved injection, restricted to the
/// qubit states. Closed channels are dropped.
pub fn normalize_amplitudes(
    solution: &ScatteringSolution,
    basis: &ChannelBasis,
) -> Result<OutputChannelState> {
    let frame = basis
        .qubit
        .as_ref()
        .ok_or_else(|| Error::Validation("channel basis has no qubit frame".into()))?;
    let input = frame
        .channels
        .iter()
        .position(|&c| c == solution.input_channel)
        .ok_or_else(|| {
            Error::Validation(format!(
                "input channel {} is not a qubit state",
                solution.input_channel
            ))
        })?;
    let v0 = solution.channels[solution.input_channel].velocity();
    let weight = |n: usize| {
        let ch = &solution.channels[n];
        match ch.kind {
            ChannelKind::Traveling => (ch.velocity() / v0).sqrt(),
            ChannelKind::Evanescent => 0.0,
        }
    };
    let mut r = [ZERO; 4];
    let mut t = [ZERO; 4];
    for (l, &n) in frame.channels.iter().enumerate() {
        r[l] = solution.b[n] * weight(n);
        t[l] = solution.c[n] * weight(n);
    }
    let kept: f64 = r.iter().chain(&t).map(|a| a.norm_sqr()).sum();
    let all: f64 = (0..solution.b.len())
        .map(|n| weight(n).powi(2) * (solution.b[n].norm_sqr() + solution.c[n].norm_sqr()))
        .sum();
    let mut out = OutputChannelState::from_amplitudes(input, r, t)?;
    out.leaked = ((all - kept) / all).max(0.0);
    Ok(out)
}

/// A two-qubit density matrix in the product basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitState {
    pub elements: [[Complex64; 4]; 4],
}

fn to_matrix(e: &[[Complex64; 4]; 4]) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| e[i][j])
}

impl TwoQubitState {
    /// Checked constructor: unit trace, Hermitian and positive semidefinite.
    pub fn new(elements: [[Complex64; 4]; 4]) -> Result<Self> {
        let s = TwoQubitState { elements };
        s.validate()?;
        Ok(s)
    }

    /// |ψ⟩⟨ψ| for a normalized ψ.
    pub fn pure(psi: [Complex64; 4]) -> Self {
        let mut e = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                e[i][j] = psi[i] * psi[j].conj();
            }
        }
        TwoQubitState { elements: e }
    }

    /// Basis projector |k⟩⟨k|.
    pub fn basis_state(k: usize) -> Self {
        let mut psi = [ZERO; 4];
        psi[k] = Complex64::new(1.0, 0.0);
        Self::pure(psi)
    }

    /// Projector onto row `l` of an overlap table.
    pub fn eigenstate(table: &OverlapTable, l: usize) -> Self {
        Self::pure(table.0[l].map(|x| Complex64::new(x, 0.0)))
    }

    pub fn maximally_mixed() -> Self {
        let mut e = [[ZERO; 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = Complex64::new(0.25, 0.0);
        }
        TwoQubitState { elements: e }
    }

    pub fn matrix(&self) -> Matrix4<Complex64> {
        to_matrix(&self.elements)
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.elements[i][i].re).sum()
    }

    /// Populations of the four product states.
    pub fn populations(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.elements[i][i].re)
    }

    /// ⟨ε_l|ρ|ε_l⟩ for the rows of `table`.
    pub fn occupations(&self, table: &OverlapTable) -> [f64; 4] {
        std::array::from_fn(|l| {
            let v = table.0[l];
            let mut s = ZERO;
            for i in 0..4 {
                for j in 0..4 {
                    s += v[i] * self.elements[i][j] * v[j];
                }
            }
            s.re
        })
    }

    /// Largest element outside the diagonal and antidiagonal.
    pub fn off_x_weight(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                if i != j && i + j != 3 {
                    worst = worst.max(self.elements[i][j].norm());
                }
            }
        }
        worst
    }

    pub fn is_x(&self) -> bool {
        self.off_x_weight() < STATE_TOLERANCE
    }

    /// Eigenvalues in ascending order, with rounding-level negatives clipped
    /// to zero.
    pub fn eigenvalues(&self) -> Result<[f64; 4]> {
        let eig = SymmetricEigen::new(self.matrix());
        let mut ev: [f64; 4] = std::array::from_fn(|i| eig.eigenvalues[i]);
        ev.sort_by(f64::total_cmp);
        if ev[0] < -STATE_TOLERANCE {
            return Err(Error::NotPositive(ev[0]));
        }
        Ok(ev.map(|x| x.max(0.0)))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.elements;
        if (self.trace() - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::Validation(format!("trace {} differs from 1", self.trace())));
        }
        for i in 0..4 {
            for j in 0..4 {
                if (e[i][j] - e[j][i].conj()).norm() > STATE_TOLERANCE {
                    return Err(Error::Validation(format!("element ({i},{j}) breaks hermiticity")));
                }
            }
        }
        self.eigenvalues().map(|_| ())
    }

    /// U ρ U† for a 4×4 unitary.
    pub fn transformed(&self, u: &Matrix4<Complex64>) -> Self {
        let m = u * self.matrix() * u.adjoint();
        TwoQubitState {
            elements: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
        }
    }
}

/// Trace out the scattered carrier. Each qubit state ε_l is first expanded
/// in the product basis with `overlaps`; carrier states with different side
/// or energy group are orthogonal, so ρ is a sum of one pure term per side
/// and group.
pub fn reduced_density_matrix(
    state: &OutputChannelState,
    overlaps: &OverlapTable,
) -> Result<TwoQubitState> {
    let defect = overlaps.unitarity_defect();
    if defect > 1e-6 {
        return Err(Error::Basis(defect));
    }
    let mut e = [[ZERO; 4]; 4];
    for side in [&state.reflected, &state.transmitted] {
        for group in CARRIER_GROUPS {
            let mut phi = [ZERO; 4];
            for &l in group {
                for (k, p) in phi.iter_mut().enumerate() {
                    *p += side[l] * overlaps.0[l][k];
                }
            }
            for i in 0..4 {
                for j in 0..4 {
                    e[i][j] += phi[i] * phi[j].conj();
                }
            }
        }
    }
    TwoQubitState::new(e)
}

/// Von Neumann entropy −Tr ρ ln ρ from the eigenvalues, with 0·ln 0 = 0.
pub fn decoherence(state: &TwoQubitState) -> Result<f64> {
    Ok(entropy_of(&state.eigenvalues()?))
}

pub fn entropy_of(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum::<f64>().max(0.0)
}

/// Eigenvalues of a Hermitian 2×2 block [[a, z], [z*, d]].
fn block_eigenvalues(a: f64, d: f64, z: Complex64) -> [f64; 2] {
    let s = a + d;
    let disc = ((a - d).powi(2) + 4.0 * z.norm_sqr()).sqrt();
    [0.5 * (s + disc), 0.5 * (s - disc)]
}

/// Entropy of an X-state from its two 2×2 blocks, no diagonalization.
pub fn decoherence_xstate(state: &TwoQubitState) -> Result<f64> {
    let e = &state.elements;
    let w = state.off_x_weight();
    if w >= STATE_TOLERANCE {
        return Err(Error::NotXState(w));
    }
    let [o1, o2] = block_eigenvalues(e[0][0].re, e[3][3].re, e[0][3]);
    let [i1, i2] = block_eigenvalues(e[1][1].re, e[2][2].re, e[1][2]);
    let ev = [o1, o2, i1, i2];
    if let Some(&neg) = ev.iter().find(|&&x| x < -STATE_TOLERANCE) {
        return Err(Error::NotPositive(neg));
    }
    Ok(entropy_of(&ev.map(|x| x.max(0.0))))
}

/// The amplitude combinations that parametrize ρ for one injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XParameters {
    /// |α|² = |b̃₀|² + |c̃₀|²
    pub alpha_sq: f64,
    /// β± = (b̃₁ ± b̃₂)/√2
    pub beta_plus: Complex64,
    pub beta_minus: Complex64,
    /// γ± = (c̃₁ ± c̃₂)/√2
    pub gamma_plus: Complex64,
    pub gamma_minus: Complex64,
    /// |ω|² = |b̃₃|² + |c̃₃|²
    pub omega_sq: f64,
}

impl XParameters {
    pub fn from_state(s: &OutputChannelState) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (b, c) = (&s.reflected, &s.transmitted);
        XParameters {
            alpha_sq: s.probability(0),
            beta_plus: (b[1] + b[2]) * h,
            beta_minus: (b[1] - b[2]) * h,
            gamma_plus: (c[1] + c[2]) * h,
            gamma_minus: (c[1] - c[2]) * h,
            omega_sq: s.probability(3),
        }
    }

    /// Eigenvalues η± of the middle block. The discriminant carries the
    /// factor 4 of a 2×2 characteristic polynomial:
    /// η± = ½(S ± √(S² − 4|β₊γ₋ − β₋γ₊|²)).
    pub fn eta(&self) -> [f64; 2] {
        let s = self.beta_plus.norm_sqr()
            + self.gamma_plus.norm_sqr()
            + self.beta_minus.norm_sqr()
            + self.gamma_minus.norm_sqr();
        let det = (self.beta_plus * self.gamma_minus - self.beta_minus * self.gamma_plus).norm_sqr();
        let disc = (s * s - 4.0 * det).max(0.0).sqrt();
        [0.5 * (s + disc), 0.5 * (s - disc)]
    }

    /// k = |β₊β₋* + γ₊γ₋*| − |α||ω|.
    pub fn k(&self) -> f64 {
        (self.beta_plus * self.beta_minus.conj() + self.gamma_plus * self.gamma_minus.conj()).norm()
            - (self.alpha_sq * self.omega_sq).sqrt()
    }

    /// ξ = −|α|² ln|α|² − η₊ ln η₊ − η₋ ln η₋ − |ω|² ln|ω|².
    pub fn decoherence(&self) -> f64 {
        let [ep, em] = self.eta();
        entropy_of(&[self.alpha_sq, ep, em, self.omega_sq])
    }

    /// C = 2 max(0, k).
    pub fn concurrence(&self) -> f64 {
        2.0 * self.k().max(0.0)
    }
}

fn spin_flip() -> Matrix4<Complex64> {
    let mut y = Matrix4::<Complex64>::zeros();
    y[(0, 3)] = Complex64::new(-1.0, 0.0);
    y[(1, 2)] = Complex64::new(1.0, 0.0);
    y[(2, 1)] = Complex64::new(1.0, 0.0);
    y[(3, 0)] = Complex64::new(-1.0, 0.0);
    y
}

/// √λ_i of ζ = ρ(σ_y⊗σ_y)ρ*(σ_y⊗σ_y) in decreasing order.
///
/// With ρ = GG†, the λ_i are the squared singular values of GᵀYG, which
/// avoids the non-Hermitian eigenproblem.
pub fn wootters_roots(state: &TwoQubitState) -> Result<[f64; 4]> {
    let eig = SymmetricEigen::new(state.matrix());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -STATE_TOLERANCE {
        return Err(Error::NotPositive(min));
    }
    let mut g = eig.eigenvectors.clone();
    for (c, &mu) in eig.eigenvalues.iter().enumerate() {
        let s = mu.max(0.0).sqrt();
        g.column_mut(c).iter_mut().for_each(|x| *x *= s);
    }
    let s = g.transpose() * spin_flip() * g;
    let mut sv: [f64; 4] = std::array::from_fn(|i| s.singular_values()[i]);
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Wootters concurrence, valid for any two-qubit density matrix.
pub fn concurrence_wootters(state: &TwoQubitState) -> Result<f64> {
    let r = wootters_roots(state)?;
    Ok((r[0] - r[1] - r[2] - r[3]).max(0.0))
}

/// Closed-form concurrence of an X-state,
/// C = 2 max(0, |ρ₂₃| − √(ρ₁₁ρ₄₄), |ρ₁₄| − √(ρ₂₂ρ₃₃)).
pub fn concurrence_xstate(state: &TwoQubitState) -> Result<f64> {
    let w = state.off_x_weight();
    if w >= STATE_TOLERANCE {
        return Err(Error::NotXState(w));
    }
    let e = &state.elements;
    let inner = e[1][2].norm() - (e[0][0].re * e[3][3].re).max(0.0).sqrt();
    let outer = e[0][3].norm() - (e[1][1].re * e[2][2].re).max(0.0).sqrt();
    Ok(2.0 * inner.max(outer).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub concurrence: f64,
    /// Von Neumann entropy in nats.
    pub decoherence: f64,
    /// ρ eigenvalues, ascending.
    pub eigenvalues: [f64; 4],
    /// √λ_i of ζ, descending.
    pub wootters_roots: [f64; 4],
    pub x_structured: bool,
}

/// Concurrence and entropy of a state, through the general routes.
pub fn entanglement_report(state: &TwoQubitState) -> Result<EntanglementReport> {
    let eigenvalues = state.eigenvalues()?;
    let roots = wootters_roots(state)?;
    Ok(EntanglementReport {
        concurrence: (roots[0] - roots[1] - roots[2] - roots[3]).max(0.0),
        decoherence: entropy_of(&eigenvalues),
        eigenvalues,
        wootters_roots: roots,
        x_structured: state.is_x(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bell_and_product_concurrence() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = TwoQubitState::pure([ZERO, c(h, 0.0), c(h, 0.0), ZERO]);
        assert!((concurrence_wootters(&bell).unwrap() - 1.0).abs() < 1e-12);
        assert!((concurrence_xstate(&bell).unwrap() - 1.0).abs() < 1e-12);
        assert!(decoherence(&bell).unwrap().abs() < 1e-12);
        let prod = TwoQubitState::basis_state(1);
        assert!(concurrence_wootters(&prod).unwrap() < 1e-12);
        let mixed = TwoQubitState::maximally_mixed();
        assert!(concurrence_wootters(&mixed).unwrap() < 1e-12);
        assert!((decoherence(&mixed).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn half_excited_mixture_has_entropy_ln2() {
        let mut e = [[ZERO; 4]; 4];
        e[0][0] = c(0.5, 0.0);
        e[1][1] = c(0.25, 0.0);
        e[2][2] = c(0.25, 0.0);
        e[1][2] = c(0.25, 0.0);
        e[2][1] = c(0.25, 0.0);
        let rho = TwoQubitState::new(e).unwrap();
        assert!((decoherence(&rho).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((decoherence_xstate(&rho).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((concurrence_wootters(&rho).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_x_rejected_by_closed_forms() {
        let h = 0.5;
        let rho = TwoQubitState::pure([c(h, 0.0), c(h, 0.0), c(h, 0.0), c(h, 0.0)]);
        assert!(matches!(concurrence_xstate(&rho), Err(Error::NotXState(_))));
        assert!(matches!(decoherence_xstate(&rho), Err(Error::NotXState(_))));
        assert!(concurrence_wootters(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn negative_eigenvalue_is_an_error() {
        let mut e = [[ZERO; 4]; 4];
        e[0][0] = c(1.1, 0.0);
        e[1][1] = c(-0.1, 0.0);
        assert!(matches!(TwoQubitState::new(e), Err(Error::NotPositive(_))));
    }

    #[test]
    fn single_channel_output_is_pure() {
        let table = OverlapTable::ideal();
        let mut r = [ZERO; 4];
        let mut t = [ZERO; 4];
        r[2] = c(0.6, 0.0);
        t[2] = c(0.0, 0.8);
        let s = OutputChannelState::from_amplitudes(2, r, t).unwrap();
        let rho = reduced_density_matrix(&s, &table).unwrap();
        let target = TwoQubitState::eigenstate(&table, 2);
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.elements[i][j] - target.elements[i][j]).norm() < 1e-14);
            }
        }
        assert!((concurrence_xstate(&rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitudes_are_degenerate() {
        assert!(matches!(
            OutputChannelState::from_amplitudes(0, [ZERO; 4], [ZERO; 4]),
            Err(Error::DegenerateInput)
        ));
    }

    #[test]
    fn broken_table_is_a_basis_error() {
        let mut t = OverlapTable::ideal();
        t.0[0][0] = 0.5;
        let s = OutputChannelState::from_amplitudes(0, [c(1.0, 0.0), ZERO, ZERO, ZERO], [ZERO; 4]).unwrap();
        assert!(matches!(reduced_density_matrix(&s, &t), Err(Error::Basis(_))));
    }
}
