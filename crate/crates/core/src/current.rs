//! Repeated injection: a current of uncorrelated carriers, all at the same
//! kinetic energy, scattering one after the other off the double dot.
//!
//! Each carrier leaves before the next arrives and carries its own energy
//! label away, so between carriers the dot is described by occupations of
//! the qubit eigenstates ε₀..ε₃. One injection maps occupations o to
//! o'_n = Σ_j o_j P(n←j); the density matrix in the product basis follows
//! from the overlap table.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bound::{ChannelBasis, OverlapTable};
use crate::error::{Error, Result};
use crate::qinfo::{
    concurrence_xstate, decoherence_xstate, entropy_of, normalize_amplitudes,
    reduced_density_matrix, OutputChannelState, TwoQubitState, CARRIER_GROUPS,
};
use crate::qtbm::ScatteringSolution;

/// Allowed flux leaving the qubit subspace when a map is extracted.
pub const ROW_TOLERANCE: f64 = 1e-4;

/// Default number of injected carriers.
pub const DEFAULT_INJECTIONS: usize = 60;

/// Transition probabilities P(n←j) over the qubit states at one injection
/// energy. Rows of inputs that were never solved are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMap {
    /// Kinetic energy of every injected carrier (meV).
    pub kinetic_energy: f64,
    pub rows: [Option<[f64; 4]>; 4],
    /// Normalized outgoing amplitudes per input, when known.
    pub outputs: [Option<OutputChannelState>; 4],
    pub overlaps: OverlapTable,
}

fn row_of(s: &OutputChannelState) -> [f64; 4] {
    std::array::from_fn(|l| s.probability(l))
}

impl ChannelMap {
    /// Map built from output states, one per solved input.
    pub fn from_outputs(
        kinetic_energy: f64,
        outputs: Vec<OutputChannelState>,
        overlaps: OverlapTable,
    ) -> Result<Self> {
        let mut map = ChannelMap {
            kinetic_energy,
            rows: [None; 4],
            outputs: Default::default(),
            overlaps,
        };
        for s in outputs {
            let j = s.input;
            if map.rows[j].is_some() {
                return Err(Error::Validation(format!("input {j} given twice")));
            }
            map.rows[j] = Some(row_of(&s));
            map.outputs[j] = Some(s);
        }
        Ok(map)
    }

    /// The two-state map of the entangling resonance: ε₀ stays with
    /// probability p₀₀ or goes to ε₂; ε₂ always stays.
    pub fn ideal_entangling(p00: f64) -> Result<Self> {
        check_probability(p00)?;
        let one = Complex64::new(1.0, 0.0);
        let mut r0 = [Complex64::new(0.0, 0.0); 4];
        r0[0] = one * p00.sqrt();
        r0[2] = one * (1.0 - p00).sqrt();
        let mut r2 = [Complex64::new(0.0, 0.0); 4];
        r2[2] = one;
        let zero = [Complex64::new(0.0, 0.0); 4];
        Self::from_outputs(
            f64::NAN,
            vec![
                OutputChannelState::from_amplitudes(0, r0, zero)?,
                OutputChannelState::from_amplitudes(2, r2, zero)?,
            ],
            OverlapTable::ideal(),
        )
    }

    /// The relaxation map: ε₂ stays with probability p₂₂ or decays to ε₀;
    /// ε₀ cannot be excited.
    pub fn ideal_disentangling(p22: f64) -> Result<Self> {
        check_probability(p22)?;
        let one = Complex64::new(1.0, 0.0);
        let zero = [Complex64::new(0.0, 0.0); 4];
        let mut r0 = zero;
        r0[0] = one;
        let mut r2 = zero;
        r2[2] = one * p22.sqrt();
        r2[0] = one * (1.0 - p22).sqrt();
        Self::from_outputs(
            f64::NAN,
            vec![
                OutputChannelState::from_amplitudes(0, r0, zero)?,
                OutputChannelState::from_amplitudes(2, r2, zero)?,
            ],
            OverlapTable::ideal(),
        )
    }

    /// P(n←j).
    pub fn probability(&self, j: usize, n: usize) -> Option<f64> {
        self.rows[j].map(|r| r[n])
    }

    /// Stay probability p₀₀.
    pub fn p00(&self) -> Option<f64> {
        self.probability(0, 0)
    }

    /// Stay probability p₂₂.
    pub fn p22(&self) -> Option<f64> {
        self.probability(2, 2)
    }

    /// Occupations after one more carrier.
    pub fn step(&self, occupations: &[f64; 4]) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for (j, &o) in occupations.iter().enumerate() {
            if o == 0.0 {
                continue;
            }
            let row = self.rows[j].ok_or_else(|| {
                Error::Validation(format!(
                    "state ε{j} is populated ({o:e}) but the map has no row for it"
                ))
            })?;
            for (x, p) in out.iter_mut().zip(row) {
                *x += o * p;
            }
        }
        Ok(out)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Validation(format!("probability {p} outside [0, 1]")))
    }
}

/// Channel map from converged solves at one kinetic energy, one per input.
pub fn extract_channel_map(
    solutions: &[ScatteringSolution],
    basis: &ChannelBasis,
    overlaps: OverlapTable,
) -> Result<ChannelMap> {
    let mut outputs = Vec::with_capacity(solutions.len());
    let mut energy = None;
    for s in solutions {
        match energy {
            None => energy = Some(s.kinetic_energy),
            Some(e) if (e - s.kinetic_energy).abs() > 1e-12 * e.abs().max(1.0) => {
                return Err(Error::Validation(format!(
                    "solutions at kinetic energies {e} and {} mixed in one map",
                    s.kinetic_energy
                )))
            }
            _ => {}
        }
        let out = normalize_amplitudes(s, basis)?;
        if out.leaked > ROW_TOLERANCE {
            return Err(Error::Conservation {
                defect: out.leaked,
                tolerance: ROW_TOLERANCE,
            });
        }
        outputs.push(out);
    }
    let energy = energy.ok_or_else(|| Error::Validation("no solutions given".into()))?;
    ChannelMap::from_outputs(energy, outputs, overlaps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionStep {
    pub n: usize,
    pub state: TwoQubitState,
    pub concurrence: f64,
    pub decoherence: f64,
    /// Occupations of ε₀..ε₃.
    pub occupations: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionTrace {
    pub steps: Vec<InjectionStep>,
}

impl InjectionTrace {
    pub fn concurrence(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.concurrence).collect()
    }

    pub fn decoherence(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.decoherence).collect()
    }

    /// Columns n, C, xi, occ0, occ1, occ2, occ3.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,C,xi,occ0,occ1,occ2,occ3\n");
        for st in &self.steps {
            let o = st.occupations;
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                st.n, st.concurrence, st.decoherence, o[0], o[1], o[2], o[3]
            ));
        }
        s
    }
}

fn diagonal_state(occ: &[f64; 4], table: &OverlapTable) -> TwoQubitState {
    let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (l, &o) in occ.iter().enumerate() {
        let v = table.0[l];
        for i in 0..4 {
            for j in 0..4 {
                e[i][j] += o * v[i] * v[j];
            }
        }
    }
    TwoQubitState { elements: e }
}

fn record(n: usize, occ: [f64; 4], table: &OverlapTable) -> Result<InjectionStep> {
    let state = diagonal_state(&occ, table);
    // the X closed forms need the ideal table; fall back to the general
    // routes otherwise
    let (concurrence, decoherence) = if state.is_x() {
        (concurrence_xstate(&state)?, decoherence_xstate(&state)?)
    } else {
        (
            crate::qinfo::concurrence_wootters(&state)?,
            entropy_of(&occ),
        )
    };
    Ok(InjectionStep {
        n,
        state,
        concurrence,
        decoherence,
        occupations: occ,
    })
}

/// ρ⁽⁰⁾ … ρ⁽ⁿᵐᵃˣ⁾ for `n_max` carriers scattered with the same map.
///
/// The initial state enters through its occupations of the qubit
/// eigenstates; coherences between eigenstates are not propagated.
pub fn iterate_injections(
    map: &ChannelMap,
    initial: &TwoQubitState,
    n_max: usize,
) -> Result<InjectionTrace> {
    let schedule = vec![map; n_max];
    iterate_schedule(&schedule, initial)
}

/// Like [`iterate_injections`] with one map per carrier, e.g. for carriers
/// whose energies scatter around a nominal value.
pub fn iterate_schedule(maps: &[&ChannelMap], initial: &TwoQubitState) -> Result<InjectionTrace> {
    initial.validate()?;
    let table = maps.first().map_or(OverlapTable::ideal(), |m| m.overlaps);
    let mut occ = initial.occupations(&table);
    let mut steps = vec![record(0, occ, &table)?];
    for (k, map) in maps.iter().enumerate() {
        occ = map.step(&occ)?;
        steps.push(record(k + 1, occ, &table)?);
    }
    Ok(InjectionTrace { steps })
}

/// Trace starting from ε₂ (the Bell state) with the relaxation map.
pub fn disentangle_trace(map: &ChannelMap, n_max: usize) -> Result<InjectionTrace> {
    iterate_injections(map, &TwoQubitState::eigenstate(&map.overlaps, 2), n_max)
}

/// Trace starting from ε₀ with the excitation map.
pub fn entangle_trace(map: &ChannelMap, n_max: usize) -> Result<InjectionTrace> {
    iterate_injections(map, &TwoQubitState::eigenstate(&map.overlaps, 0), n_max)
}

/// −x ln x − (1−x) ln(1−x).
pub fn binary_entropy(x: f64) -> f64 {
    entropy_of(&[x, 1.0 - x])
}

/// (C, ξ) after n carriers for the ideal entangling map:
/// C = 1 − p₀₀ⁿ and ξ = h(p₀₀ⁿ).
pub fn closed_form_entangle(p00: f64, n: usize) -> (f64, f64) {
    let x = p00.powi(n as i32);
    (1.0 - x, binary_entropy(x))
}

/// (C, ξ) after n carriers for the ideal relaxation map: C = p₂₂ⁿ and
/// ξ = h(p₂₂ⁿ).
pub fn closed_form_disentangle(p22: f64, n: usize) -> (f64, f64) {
    let x = p22.powi(n as i32);
    (x, binary_entropy(x))
}

/// Real number of carriers at which p₀₀ⁿ = ½, where ξ peaks at ln 2.
pub fn entropy_peak_position(p00: f64) -> Option<f64> {
    (p00 > 0.0 && p00 < 1.0).then(|| 0.5f64.ln() / p00.ln())
}

/// Density matrix after two carriers, composed coherently from the stored
/// output amplitudes and traced over both carriers.
///
/// Carrier labels are (side, energy group); two paths j→n→m and j→n'→m'
/// interfere only when every label agrees.
pub fn compose_two_injections(map: &ChannelMap, input: usize) -> Result<TwoQubitState> {
    let group = |l: usize| CARRIER_GROUPS.iter().position(|g| g.contains(&l)).unwrap_or(l);
    let first = map.outputs[input]
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("no amplitudes for input ε{input}")))?;
    let side = |s: &OutputChannelState, k: usize| if k == 0 { s.reflected } else { s.transmitted };
    let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
    for sa in 0..2 {
        for sb in 0..2 {
            for ga in 0..CARRIER_GROUPS.len() {
                for gb in 0..CARRIER_GROUPS.len() {
                    let mut phi = [Complex64::new(0.0, 0.0); 4];
                    for n in 0..4 {
                        let a = side(first, sa)[n];
                        if group(n) != ga || a.norm_sqr() == 0.0 {
                            continue;
                        }
                        let second = map.outputs[n].as_ref().ok_or_else(|| {
                            Error::Validation(format!("ε{n} is reached but has no amplitudes"))
                        })?;
                        for m in 0..4 {
                            // energy handed to the second carrier fixes m's group
                            if group(m) != gb {
                                continue;
                            }
                            let amp = a * side(second, sb)[m];
                            for (k, p) in phi.iter_mut().enumerate() {
                                *p += amp * map.overlaps.0[m][k];
                            }
                        }
                    }
                    for i in 0..4 {
                        for j in 0..4 {
                            e[i][j] += phi[i] * phi[j].conj();
                        }
                    }
                }
            }
        }
    }
    TwoQubitState::new(e)
}

/// Density matrix after one carrier, from the stored amplitudes.
pub fn single_injection(map: &ChannelMap, input: usize) -> Result<TwoQubitState> {
    let s = map.outputs[input]
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("no amplitudes for input ε{input}")))?;
    reduced_density_matrix(s, &map.overlaps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_carriers_at_half() {
        let map = ChannelMap::ideal_entangling(0.5).unwrap();
        let trace = entangle_trace(&map, 3).unwrap();
        assert!((trace.steps[3].concurrence - 0.875).abs() < 1e-14);
        assert_eq!(trace.steps[0].concurrence, 0.0);
        assert_eq!(trace.steps[0].decoherence, 0.0);
    }

    #[test]
    fn two_step_composition_matches_recursion() {
        for p in [0.0, 0.3, 0.5, 1.0] {
            let map = ChannelMap::ideal_entangling(p).unwrap();
            let rho = compose_two_injections(&map, 0).unwrap();
            let trace = entangle_trace(&map, 2).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let d = rho.elements[i][j] - trace.steps[2].state.elements[i][j];
                    assert!(d.norm() < 1e-14, "p={p} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn missing_row_is_reported() {
        let map = ChannelMap::ideal_entangling(0.5).unwrap();
        let start = TwoQubitState::eigenstate(&map.overlaps, 1);
        assert!(iterate_injections(&map, &start, 1).is_err());
    }

    #[test]
    fn peak_position() {
        let n = entropy_peak_position(0.5).unwrap();
        assert!((n - 1.0).abs() < 1e-15);
        assert!(entropy_peak_position(1.0).is_none());
    }
}
