//! Single-particle dot orbitals, two-particle bound states and the change of
//! basis between the two-particle eigenbasis and the qubit product basis.
//!
//! All eigenproblems use hard walls at both domain ends. Wavefunctions are
//! stored over the full grid (walls included, where they vanish) with the
//! physical normalization Σ|ψ|²Δ = 1 in 1D and Σ|Ξ|²Δ² = 1 in 2D.

use std::fmt::Write as _;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EnergyScale, GridSpec, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dot {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleParticleState {
    pub energy: f64,
    pub wavefunction: Vec<f64>,
    pub dot: Dot,
    pub level: usize,
}

/// Parity under the combined reflection x₂ → L−x₂, x₃ → L−x₃.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleBoundState {
    pub index: usize,
    pub energy: f64,
    pub parity: Parity,
    /// Row-major over (x₂, x₃), `points_per_axis²` entries.
    pub wavefunction: Vec<f64>,
}

impl TwoParticleBoundState {
    /// Interior values scaled to unit Euclidean norm, row-major over the
    /// `(N_g−2)²` interior nodes.
    pub fn interior_unit(&self, grid: &GridSpec) -> Vec<f64> {
        let n = grid.points_per_axis;
        let m = n - 2;
        let mut out = Vec::with_capacity(m * m);
        for a in 1..=m {
            for b in 1..=m {
                out.push(self.wavefunction[a * n + b] * grid.spacing);
            }
        }
        out
    }
}

/// ⟨E_n^L E_m^R | ε_l⟩: rows are ε₀..ε₃, columns the product basis
/// |00⟩, |01⟩, |10⟩, |11⟩ with the left dot written first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable(pub [[f64; 4]; 4]);

impl OverlapTable {
    /// The ideal encoding: ε₀ = |00⟩, ε₁ = −(|01⟩+|10⟩)/√2,
    /// ε₂ = −(|01⟩−|10⟩)/√2, ε₃ = |11⟩.
    pub fn ideal() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        OverlapTable([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, -h, -h, 0.0],
            [0.0, -h, h, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// Largest deviation of `O Oᵀ` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let o = &self.0;
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| o[i][k] * o[j][k]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Largest entrywise distance to [`OverlapTable::ideal`], allowing each
    /// row an independent overall sign.
    pub fn distance_to_ideal(&self) -> f64 {
        let ideal = Self::ideal().0;
        let mut worst = 0.0f64;
        for (row, target) in self.0.iter().zip(ideal.iter()) {
            let plus = row.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let minus = row.iter().zip(target).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            worst = worst.max(plus.min(minus));
        }
        worst
    }
}

/// Lowest `count` eigenpairs of the 1D Hamiltonian with hard walls.
///
/// Vectors are returned over the full grid with physical normalization and an
/// unfixed sign.
pub fn single_particle_spectrum(
    potential: &[f64],
    grid: &GridSpec,
    scale: &EnergyScale,
    count: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = grid.points_per_axis;
    if potential.len() != n {
        return Err(Error::Validation(format!(
            "potential has {} samples for a grid of {n}",
            potential.len()
        )));
    }
    let m = n - 2;
    if count > m {
        return Err(Error::BoundStateShortfall { requested: count, found: m });
    }
    let t = scale.kinetic_prefactor / (grid.spacing * grid.spacing);
    let h = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            2.0 * t + potential[i + 1]
        } else if i.abs_diff(j) == 1 {
            -t
        } else {
            0.0
        }
    });
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Singular(format!("tridiagonal eigensolver: {e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let norm = grid.spacing.sqrt().recip();
    let energies = (0..count).map(|k| s[k]).collect();
    let vectors = (0..count)
        .map(|k| {
            let mut v = vec![0.0; n];
            for i in 0..m {
                v[i + 1] = u[(i, k)] * norm;
            }
            v
        })
        .collect();
    Ok((energies, vectors))
}

/// Flip `v` so that its first significant lobe, scanning from the left, is
/// positive.
pub(crate) fn first_lobe_positive(v: &mut [f64]) {
    let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-3 * peak) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Localized orbitals of both dots, `levels_per_dot` levels each.
///
/// Consecutive eigenpairs of the symmetric double well form tunnel-split
/// doublets; the left orbital is the combination with weight in the left
/// half, the right orbital its translate (mirror image times (−1)^level).
/// States are returned as L0, R0, L1, R1, …
pub fn solve_single_particle(
    potential: &[f64],
    grid: &GridSpec,
    scale: &EnergyScale,
    levels_per_dot: usize,
) -> Result<Vec<SingleParticleState>> {
    if levels_per_dot < 2 {
        return Err(Error::Validation("need at least two levels per dot".into()));
    }
    let wanted = 2 * levels_per_dot;
    let (energies, vectors) = single_particle_spectrum(potential, grid, scale, wanted)?;
    let bound = energies.iter().take_while(|&&e| e < 0.0).count();
    if bound < wanted {
        return Err(Error::BoundStateShortfall {
            requested: wanted,
            found: bound,
        });
    }
    let n = grid.points_per_axis;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(wanted);
    for level in 0..levels_per_dot {
        let (a, b) = (&vectors[2 * level], &vectors[2 * level + 1]);
        let plus: Vec<f64> = a.iter().zip(b).map(|(x, y)| h * (x + y)).collect();
        let minus: Vec<f64> = a.iter().zip(b).map(|(x, y)| h * (x - y)).collect();
        let left_weight = |v: &[f64]| v[..n / 2].iter().map(|x| x * x).sum::<f64>();
        let mut left = if left_weight(&plus) >= left_weight(&minus) { plus } else { minus };
        first_lobe_positive(&mut left);
        let sign = if level % 2 == 0 { 1.0 } else { -1.0 };
        let right: Vec<f64> = (0..n).map(|i| sign * left[n - 1 - i]).collect();
        let energy = 0.5 * (energies[2 * level] + energies[2 * level + 1]);
        out.push(SingleParticleState {
            energy,
            wavefunction: left,
            dot: Dot::Left,
            level,
        });
        out.push(SingleParticleState {
            energy,
            wavefunction: right,
            dot: Dot::Right,
            level,
        });
    }
    Ok(out)
}

/// Symmetry-adapted basis of one parity sector of the antisymmetric
/// two-particle space on the interior grid.
struct Sector {
    /// Per basis vector: interior grid entries (a·m + b) with coefficients.
    vectors: Vec<Vec<(usize, f64)>>,
}

impl Sector {
    fn new(m: usize, parity: Parity) -> Self {
        let sigma = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        let mut vectors = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                let (ma, mb) = (m - 1 - b, m - 1 - a);
                if (ma, mb) < (a, b) {
                    continue;
                }
                if (ma, mb) == (a, b) {
                    // reflection maps this pair onto minus itself
                    if parity == Parity::Odd {
                        let h = std::f64::consts::FRAC_1_SQRT_2;
                        vectors.push(vec![(a * m + b, h), (b * m + a, -h)]);
                    }
                    continue;
                }
                vectors.push(vec![
                    (a * m + b, 0.5),
                    (b * m + a, -0.5),
                    (ma * m + mb, -0.5 * sigma),
                    (mb * m + ma, 0.5 * sigma),
                ]);
            }
        }
        Sector { vectors }
    }
}

/// Apply the interior two-particle Hamiltonian to `v` (row-major m×m).
fn apply_h2(model: &Model, v: &[f64], out: &mut [f64]) {
    let m = model.grid.interior();
    let t = model.hopping();
    let pot = model.potential();
    for a in 0..m {
        for b in 0..m {
            let p = a * m + b;
            let mut y = (4.0 * t + pot[a + 1] + pot[b + 1] + model.pair(a, b)) * v[p];
            if a > 0 {
                y -= t * v[p - m];
            }
            if a + 1 < m {
                y -= t * v[p + m];
            }
            if b > 0 {
                y -= t * v[p - 1];
            }
            if b + 1 < m {
                y -= t * v[p + 1];
            }
            out[p] = y;
        }
    }
}

/// Lowest `count` antisymmetric eigenpairs of H₀(x₂) + H₀(x₃) + interaction.
///
/// The problem is block diagonal in the reflection parity; each block is
/// diagonalized densely. Degenerate partners therefore never mix across
/// parities and every state carries a definite [`Parity`]. Signs are fixed
/// by the first significant entry in row-major order.
pub fn solve_two_particle(model: &Model, count: usize) -> Result<Vec<TwoParticleBoundState>> {
    let n = model.grid.points_per_axis;
    let m = model.grid.interior();
    let mut candidates: Vec<(f64, Parity, Vec<f64>)> = Vec::new();
    for parity in [Parity::Even, Parity::Odd] {
        let sector = Sector::new(m, parity);
        let dim = sector.vectors.len();
        let take = count.min(dim);
        if take == 0 {
            continue;
        }
        let mut owner = vec![(usize::MAX, 0.0); m * m];
        for (i, v) in sector.vectors.iter().enumerate() {
            for &(g, c) in v {
                owner[g] = (i, c);
            }
        }
        let mut h = Mat::<f64>::zeros(dim, dim);
        let mut dense = vec![0.0; m * m];
        let mut image = vec![0.0; m * m];
        for (j, v) in sector.vectors.iter().enumerate() {
            for &(g, c) in v {
                dense[g] = c;
            }
            apply_h2(model, &dense, &mut image);
            for &(g, _) in v {
                dense[g] = 0.0;
            }
            for (g, &y) in image.iter().enumerate() {
                if y != 0.0 {
                    let (i, c) = owner[g];
                    h[(i, j)] += c * y;
                }
            }
        }
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Singular(format!("two-particle eigensolver: {e:?}")))?;
        for k in 0..take {
            let mut full = vec![0.0; m * m];
            for (i, v) in sector.vectors.iter().enumerate() {
                let coef = eig.U()[(i, k)];
                for &(g, c) in v {
                    full[g] += coef * c;
                }
            }
            candidates.push((eig.S()[k], parity, full));
        }
    }
    if candidates.len() < count {
        return Err(Error::BoundStateShortfall {
            requested: count,
            found: candidates.len(),
        });
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(count);
    let scale = 1.0 / model.grid.spacing;
    Ok(candidates
        .into_iter()
        .enumerate()
        .map(|(index, (energy, parity, mut unit))| {
            first_lobe_positive(&mut unit);
            let mut wavefunction = vec![0.0; n * n];
            for a in 0..m {
                for b in 0..m {
                    wavefunction[(a + 1) * n + b + 1] = unit[a * m + b] * scale;
                }
            }
            TwoParticleBoundState {
                index,
                energy,
                parity,
                wavefunction,
            }
        })
        .collect())
}

/// The four dot orbitals spanning the qubits: ground and first excited level
/// of each dot.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitOrbitals {
    pub left: [SingleParticleState; 2],
    pub right: [SingleParticleState; 2],
}

impl QubitOrbitals {
    /// Antisymmetrized product |E_n^L E_m^R⟩ as an interior unit vector.
    pub fn product(&self, grid: &GridSpec, n_left: usize, m_right: usize) -> Vec<f64> {
        let m = grid.interior();
        let w = grid.spacing;
        let l = &self.left[n_left].wavefunction;
        let r = &self.right[m_right].wavefunction;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = Vec::with_capacity(m * m);
        for a in 1..=m {
            for b in 1..=m {
                out.push(h * w * (l[a] * r[b] - r[a] * l[b]));
            }
        }
        out
    }

    /// Product basis in the order |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn product_basis(&self, grid: &GridSpec) -> [Vec<f64>; 4] {
        [
            self.product(grid, 0, 0),
            self.product(grid, 0, 1),
            self.product(grid, 1, 0),
            self.product(grid, 1, 1),
        ]
    }
}

/// Dot-level data needed to interpret scattering channels as qubit states.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitFrame {
    pub orbitals: QubitOrbitals,
    /// Basis index of ε₀..ε₃.
    pub channels: [usize; 4],
    pub overlaps: OverlapTable,
    /// Largest weight of any non-qubit state inside the product subspace.
    pub leakage: f64,
}

/// Two-particle states used as scattering channels, plus qubit bookkeeping
/// when the device actually binds the four qubit orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBasis {
    pub grid: GridSpec,
    pub states: Vec<TwoParticleBoundState>,
    pub qubit: Option<QubitFrame>,
    /// Lowest single-particle level: three-particle energies at or above it
    /// can ionize the double dot.
    pub ionization_threshold: Option<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ChannelBasis {
    /// Lowest `count` two-particle states of a binding device, with the
    /// qubit states identified and their gauge frozen.
    pub fn compute(model: &Model, count: usize) -> Result<Self> {
        if count < 4 {
            return Err(Error::Validation("at least four channels are required".into()));
        }
        let orb = solve_single_particle(model.potential(), &model.grid, &model.scale, 2)?;
        let orbitals = QubitOrbitals {
            left: [orb[0].clone(), orb[2].clone()],
            right: [orb[1].clone(), orb[3].clone()],
        };
        let mut states = solve_two_particle(model, count)?;
        let products = orbitals.product_basis(&model.grid);
        let units: Vec<Vec<f64>> = states.iter().map(|s| s.interior_unit(&model.grid)).collect();

        // weight of every state inside the product subspace
        let weights: Vec<f64> = units
            .iter()
            .map(|u| products.iter().map(|p| dot(p, u).powi(2)).sum())
            .collect();
        let mut qubit_like: Vec<usize> = (0..states.len()).filter(|&i| weights[i] > 0.5).collect();
        if qubit_like.len() != 4 {
            return Err(Error::Validation(format!(
                "expected four qubit-like two-particle states among the lowest {count}, found {}",
                qubit_like.len()
            )));
        }
        qubit_like.sort_unstable();
        let ground = qubit_like[0];
        let top = qubit_like[3];
        let mid: Vec<usize> = qubit_like[1..3].to_vec();
        let even = *mid
            .iter()
            .find(|&&i| states[i].parity == Parity::Even)
            .ok_or_else(|| Error::Validation("no even singly-excited state".into()))?;
        let odd = *mid
            .iter()
            .find(|&&i| states[i].parity == Parity::Odd)
            .ok_or_else(|| Error::Validation("no odd singly-excited state".into()))?;
        let channels = [ground, even, odd, top];

        // gauge: the reference column of each row gets the sign of the ideal table
        let reference = [(0usize, 1.0f64), (1, -1.0), (1, -1.0), (3, 1.0)];
        for (l, &(col, sign)) in reference.iter().enumerate() {
            let i = channels[l];
            if dot(&products[col], &units[i]) * sign < 0.0 {
                states[i].wavefunction.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let mut table = [[0.0; 4]; 4];
        for (l, row) in table.iter_mut().enumerate() {
            let u = states[channels[l]].interior_unit(&model.grid);
            for (col, p) in products.iter().enumerate() {
                row[col] = dot(p, &u);
            }
        }
        let leakage = (0..states.len())
            .filter(|i| !channels.contains(i))
            .map(|i| weights[i])
            .fold(0.0, f64::max);
        let ionization_threshold = Some(orbitals.left[0].energy);
        Ok(ChannelBasis {
            grid: model.grid,
            states,
            ionization_threshold,
            qubit: Some(QubitFrame {
                orbitals,
                channels,
                overlaps: OverlapTable(table),
                leakage,
            }),
        })
    }

    /// Channels without any qubit interpretation, e.g. for a flat potential.
    pub fn without_qubits(model: &Model, count: usize) -> Result<Self> {
        Ok(ChannelBasis {
            grid: model.grid,
            states: solve_two_particle(model, count)?,
            qubit: None,
            ionization_threshold: None,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }

    /// Basis index of qubit state ε_l, or `l` itself without a qubit frame.
    pub fn channel_of(&self, l: usize) -> usize {
        self.qubit.as_ref().map_or(l, |q| q.channels[l])
    }
}

/// ⟨E_n^L E_m^R|ε_l⟩ for the basis.
pub fn overlap_table(basis: &ChannelBasis) -> Result<OverlapTable> {
    basis
        .qubit
        .as_ref()
        .map(|q| q.overlaps)
        .ok_or_else(|| Error::Validation("channel basis has no qubit frame".into()))
}

/// CSV with a coordinate column followed by one column per state.
pub fn orbitals_csv(grid: &GridSpec, states: &[SingleParticleState]) -> String {
    let mut s = String::from("x_nm");
    for st in states {
        let side = match st.dot {
            Dot::Left => 'L',
            Dot::Right => 'R',
        };
        let _ = write!(s, ",chi_{}{}", side, st.level);
    }
    s.push('\n');
    for i in 0..grid.points_per_axis {
        let _ = write!(s, "{}", grid.coordinate(i));
        for st in states {
            let _ = write!(s, ",{:e}", st.wavefunction[i]);
        }
        s.push('\n');
    }
    s
}

/// CSV listing energies and parities of two-particle states.
pub fn spectrum_csv(basis: &ChannelBasis) -> String {
    let mut s = String::from("n,energy_mev,parity,qubit_label\n");
    for st in &basis.states {
        let label = basis
            .qubit
            .as_ref()
            .and_then(|q| q.channels.iter().position(|&c| c == st.index))
            .map_or(String::new(), |l| l.to_string());
        let parity = match st.parity {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        let _ = writeln!(s, "{},{:.12e},{},{}", st.index, st.energy, parity, label);
    }
    s
}

/// Summary of the bound-state problem of a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStateReport {
    /// Dot-orbital energies E_l^{L,R} (meV), left dot first at each level.
    pub orbital_energies_mev: Vec<f64>,
    pub two_particle_energies_mev: Vec<f64>,
    pub qubit_channels: Option<[usize; 4]>,
    pub overlaps: Option<OverlapTable>,
    pub overlap_distance_to_ideal: Option<f64>,
    pub unitarity_defect: Option<f64>,
    pub leakage: Option<f64>,
}

impl BoundStateReport {
    pub fn new(basis: &ChannelBasis) -> Self {
        let q = basis.qubit.as_ref();
        BoundStateReport {
            orbital_energies_mev: q.map_or(vec![], |q| {
                vec![
                    q.orbitals.left[0].energy,
                    q.orbitals.right[0].energy,
                    q.orbitals.left[1].energy,
                    q.orbitals.right[1].energy,
                ]
            }),
            two_particle_energies_mev: basis.energies(),
            qubit_channels: q.map(|q| q.channels),
            overlaps: q.map(|q| q.overlaps),
            overlap_distance_to_ideal: q.map(|q| q.overlaps.distance_to_ideal()),
            unitarity_defect: q.map(|q| q.overlaps.unitarity_defect()),
            leakage: q.map(|q| q.leakage),
        }
    }
}
