//! Open-boundary solver for one carrier scattering off the two bound
//! electrons, on the cube [0, L]³.
//!
//! The unknown is the carrier-resolved amplitude D(x₁; x₂, x₃): coordinate 1
//! belongs to the carrier, which leaves through the faces x₁ = 0 and x₁ = L,
//! while the bound pair obeys the hard walls of its own Hamiltonian. On the
//! x₁ faces D takes the lead expansions
//!
//! ```text
//! D(0, x₂, x₃) = Ξ_j + Σ_n b_n Ξ_n        D(L, x₂, x₃) = Σ_n c_n Ξ_n
//! ```
//!
//! and the physical wavefunction is
//! Ψ(x₁,x₂,x₃) = D(x₁;x₂,x₃) − D(x₂;x₁,x₃) − D(x₃;x₂,x₁), which carries the
//! same expansions on x₁ faces and their exchanged images on the other four.
//! The lead rows follow from the discrete equation on the boundary layer with
//! a ghost layer continued analytically, which gives
//!
//! ```text
//! b_n = λ_n ⟨Ξ_n|D(Δ)⟩ − δ_nj λ_j²        c_n = λ_n ⟨Ξ_n|D(L−Δ)⟩
//! ```
//!
//! with λ_n = e^{ik_nΔ} for open channels and e^{−κ_nΔ} for closed ones. The
//! interior operator E − H is real symmetric; it is factored once per total
//! energy and the amplitudes follow from a small complex bordered system.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use faer::Mat;

use crate::bound::ChannelBasis;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nested::GridFactorization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Channels with |T| below this are treated as closed and flagged (meV).
    pub threshold_tolerance: f64,
    /// Required relative residual of the full linear system.
    pub residual_tolerance: f64,
    pub max_refinements: usize,
    /// Allowed flux conservation defect.
    pub conservation_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            threshold_tolerance: 1e-4,
            residual_tolerance: 1e-8,
            max_refinements: 4,
            conservation_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Traveling,
    Evanescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub n: usize,
    /// T_(j−n) = E − ε_n in meV.
    pub kinetic: f64,
    /// k = √(T/K) for open channels, κ = √(−T/K) for closed ones (1/nm).
    pub wavenumber: f64,
    /// Lattice phase kΔ (open) or decay κΔ (closed) from the discrete
    /// dispersion T = 2t(1 − cos kΔ).
    pub lattice_phase: f64,
    pub kind: ChannelKind,
    pub near_threshold: bool,
}

impl ChannelInfo {
    pub fn ghost_factor(&self) -> Complex64 {
        match self.kind {
            ChannelKind::Traveling => Complex64::from_polar(1.0, self.lattice_phase),
            ChannelKind::Evanescent => Complex64::new((-self.lattice_phase).exp(), 0.0),
        }
    }

    /// Group velocity in units of 2tΔ/ħ; zero for closed channels.
    pub fn velocity(&self) -> f64 {
        match self.kind {
            ChannelKind::Traveling => self.lattice_phase.sin(),
            ChannelKind::Evanescent => 0.0,
        }
    }
}

/// One injection: the double dot starts in state `input_channel` and the
/// carrier arrives from the left with kinetic energy `kinetic_energy`.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringProblem<'a> {
    pub model: &'a Model,
    pub basis: &'a ChannelBasis,
    pub input_channel: usize,
    pub kinetic_energy: f64,
    pub options: SolverOptions,
}

impl<'a> ScatteringProblem<'a> {
    pub fn new(
        model: &'a Model,
        basis: &'a ChannelBasis,
        input_channel: usize,
        kinetic_energy: f64,
    ) -> Result<Self> {
        let p = ScatteringProblem {
            model,
            basis,
            input_channel,
            kinetic_energy,
            options: SolverOptions::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.basis.grid != self.model.grid {
            return Err(Error::Validation("channel basis and model use different grids".into()));
        }
        if self.input_channel >= self.basis.len() {
            return Err(Error::Validation(format!(
                "input channel {} outside the {} retained channels",
                self.input_channel,
                self.basis.len()
            )));
        }
        if !(self.kinetic_energy > 0.0 && self.kinetic_energy.is_finite()) {
            return Err(Error::Validation(format!(
                "kinetic energy must be positive, got {}",
                self.kinetic_energy
            )));
        }
        if let Some(limit) = self.basis.ionization_threshold {
            if self.total_energy() >= limit {
                return Err(Error::Validation(format!(
                    "total energy {:.3} meV reaches the ionization threshold {limit:.3} meV",
                    self.total_energy()
                )));
            }
        }
        Ok(())
    }

    pub fn total_energy(&self) -> f64 {
        self.kinetic_energy + self.basis.states[self.input_channel].energy
    }

    pub fn traveling_count(&self) -> usize {
        enumerate_channels(self)
            .iter()
            .filter(|c| c.kind == ChannelKind::Traveling)
            .count()
    }

    pub fn evanescent_count(&self) -> usize {
        self.basis.len() - self.traveling_count()
    }
}

fn channels_at(model: &Model, basis: &ChannelBasis, energy: f64, tol: f64) -> Vec<ChannelInfo> {
    let t = model.hopping();
    let k_scale = model.scale.kinetic_prefactor;
    basis
        .states
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let kinetic = energy - s.energy;
            let near_threshold = kinetic.abs() < tol;
            let traveling = kinetic > 0.0 && !near_threshold;
            let (wavenumber, lattice_phase, kind) = if traveling {
                let c = (1.0 - kinetic / (2.0 * t)).clamp(-1.0, 1.0);
                ((kinetic / k_scale).sqrt(), c.acos(), ChannelKind::Traveling)
            } else {
                let c = 1.0 + kinetic.abs() / (2.0 * t);
                ((kinetic.abs() / k_scale).sqrt(), c.acosh(), ChannelKind::Evanescent)
            };
            ChannelInfo {
                n,
                kinetic,
                wavenumber,
                lattice_phase,
                kind,
                near_threshold,
            }
        })
        .collect()
}

/// Kinetic energy, wavenumber and character of every retained channel.
pub fn enumerate_channels(problem: &ScatteringProblem) -> Vec<ChannelInfo> {
    channels_at(
        problem.model,
        problem.basis,
        problem.total_energy(),
        problem.options.threshold_tolerance,
    )
}

/// The assembled linear system over `[D (interior, m³); b (M); c (M)]`.
///
/// Interior rows read `(E − H)D + t·(face values) = 0`; lead rows read
/// `y_n − λ_n ⟨Ξ_n|layer⟩ = g_n`.
#[derive(Debug, Clone)]
pub struct QtbmSystem {
    m: usize,
    t: f64,
    energy: f64,
    input: usize,
    diag: Vec<f64>,
    modes: Vec<Vec<f64>>,
    ghost: Vec<Complex64>,
    channels: Vec<ChannelInfo>,
}

impl QtbmSystem {
    fn build(model: &Model, basis: &ChannelBasis, energy: f64, input: usize, opts: &SolverOptions) -> Result<Self> {
        let t = model.hopping();
        let channels = channels_at(model, basis, energy, opts.threshold_tolerance);
        for c in &channels {
            if c.kinetic > 4.0 * t {
                return Err(Error::Validation(format!(
                    "channel {} kinetic energy {:.3} meV exceeds the lattice band 4t = {:.3} meV",
                    c.n,
                    c.kinetic,
                    4.0 * t
                )));
            }
            if c.lattice_phase < 1e-8 {
                return Err(Error::NearThreshold {
                    channel: c.n,
                    kinetic: c.kinetic,
                    tolerance: opts.threshold_tolerance,
                });
            }
        }
        if channels[input].kind != ChannelKind::Traveling {
            return Err(Error::Validation(format!("input channel {input} is not open")));
        }
        let m = model.grid.interior();
        let pot = model.potential();
        let mut diag = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                let base = energy - 6.0 * t - pot[i + 1] - pot[j + 1] - model.pair(i, j);
                for k in 0..m {
                    diag[(i * m + j) * m + k] =
                        base - pot[k + 1] - model.pair(i, k) - model.pair(j, k);
                }
            }
        }
        Ok(QtbmSystem {
            m,
            t,
            energy,
            input,
            diag,
            modes: basis.states.iter().map(|s| s.interior_unit(&basis.grid)).collect(),
            ghost: channels.iter().map(ChannelInfo::ghost_factor).collect(),
            channels,
        })
    }

    pub fn interior_unknowns(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn channel_count(&self) -> usize {
        self.modes.len()
    }

    pub fn unknowns(&self) -> usize {
        self.interior_unknowns() + 2 * self.channel_count()
    }

    pub fn rows(&self) -> usize {
        self.unknowns()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        &self.channels
    }

    /// Offset of the first interior unknown on x₁-layer `layer`.
    fn layer(&self, layer: usize) -> usize {
        layer * self.m * self.m
    }

    /// Right-hand side for the configured input channel.
    pub fn rhs(&self) -> Vec<Complex64> {
        let mm = self.m * self.m;
        let nc = self.channel_count();
        let mut r = vec![Complex64::new(0.0, 0.0); self.unknowns()];
        for (q, &x) in self.modes[self.input].iter().enumerate() {
            r[q] = Complex64::new(-self.t * x, 0.0);
        }
        let lam = self.ghost[self.input];
        r[self.interior_unknowns() + self.input] = -lam * lam;
        debug_assert_eq!(r.len(), self.m * mm + 2 * nc);
        r
    }

    /// y = (system matrix) · z.
    pub fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        let m = self.m;
        let mm = m * m;
        let ni = self.interior_unknowns();
        let nc = self.channel_count();
        assert_eq!(z.len(), self.unknowns());
        let mut y = vec![Complex64::new(0.0, 0.0); z.len()];
        let t = self.t;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = (i * m + j) * m + k;
                    let mut s = Complex64::new(0.0, 0.0);
                    if i > 0 {
                        s += z[p - mm];
                    }
                    if i + 1 < m {
                        s += z[p + mm];
                    }
                    if j > 0 {
                        s += z[p - m];
                    }
                    if j + 1 < m {
                        s += z[p + m];
                    }
                    if k > 0 {
                        s += z[p - 1];
                    }
                    if k + 1 < m {
                        s += z[p + 1];
                    }
                    y[p] = self.diag[p] * z[p] + t * s;
                }
            }
        }
        let (first, last) = (self.layer(0), self.layer(m - 1));
        for n in 0..nc {
            let (b, c) = (z[ni + n], z[ni + nc + n]);
            let mut pb = Complex64::new(0.0, 0.0);
            let mut pc = Complex64::new(0.0, 0.0);
            for (q, &x) in self.modes[n].iter().enumerate() {
                y[first + q] += t * x * b;
                y[last + q] += t * x * c;
                pb += x * z[first + q];
                pc += x * z[last + q];
            }
            y[ni + n] = b - self.ghost[n] * pb;
            y[ni + nc + n] = c - self.ghost[n] * pc;
        }
        y
    }
}

/// Assemble the linear system of one injection.
pub fn assemble_system(problem: &ScatteringProblem) -> Result<QtbmSystem> {
    problem.validate()?;
    QtbmSystem::build(
        problem.model,
        problem.basis,
        problem.total_energy(),
        problem.input_channel,
        &problem.options,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub input_channel: usize,
    pub kinetic_energy: f64,
    pub total_energy: f64,
    /// Reflection amplitudes b_jn.
    pub b: Vec<Complex64>,
    /// Transmission amplitudes c_jn.
    pub c: Vec<Complex64>,
    pub channels: Vec<ChannelInfo>,
    /// Interior nodes per axis.
    pub interior_points: usize,
    /// Carrier-resolved amplitude D over interior nodes, `(i₁·m + i₂)·m + i₃`.
    #[serde(skip)]
    pub carrier_field: Vec<Complex64>,
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ScatteringSolution {
    /// Antisymmetrized wavefunction Ψ on interior nodes.
    pub fn wavefunction(&self) -> Vec<Complex64> {
        antisymmetrize(&self.carrier_field, self.interior_points)
    }
}

/// Ψ(1,2,3) = D(1;2,3) − D(2;1,3) − D(3;2,1).
pub fn antisymmetrize(d: &[Complex64], m: usize) -> Vec<Complex64> {
    let at = |i: usize, j: usize, k: usize| d[(i * m + j) * m + k];
    let mut out = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                out.push(at(i, j, k) - at(j, i, k) - at(k, j, i));
            }
        }
    }
    out
}

/// Factorization of the interior operator at one total energy, reusable for
/// every open input channel at that energy.
pub struct QtbmFactorization {
    system: QtbmSystem,
    lu: GridFactorization,
    /// A⁻¹ applied to the 2M boundary coupling columns.
    xb: Mat<f64>,
    /// Lead projections of `xb`.
    s0: DMatrix<f64>,
    options: SolverOptions,
}

impl QtbmFactorization {
    pub fn new(
        model: &Model,
        basis: &ChannelBasis,
        total_energy: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        if basis.grid != model.grid {
            return Err(Error::Validation("channel basis and model use different grids".into()));
        }
        // the input is set per solve; any open channel will do for assembly
        let channels = channels_at(model, basis, total_energy, options.threshold_tolerance);
        let input = channels
            .iter()
            .position(|c| c.kind == ChannelKind::Traveling)
            .ok_or_else(|| Error::Validation("no open channel at this energy".into()))?;
        let system = QtbmSystem::build(model, basis, total_energy, input, &options)?;
        let m = system.m;
        let mm = m * m;
        let nc = system.channel_count();
        let lu = GridFactorization::new(m, &system.diag, system.t)?;
        let mut xb = Mat::<f64>::zeros(system.interior_unknowns(), 2 * nc);
        let (first, last) = (system.layer(0), system.layer(m - 1));
        for n in 0..nc {
            for (q, &x) in system.modes[n].iter().enumerate() {
                xb[(first + q, n)] = system.t * x;
                xb[(last + q, nc + n)] = system.t * x;
            }
        }
        lu.solve_in_place(xb.as_mut());
        let s0 = DMatrix::from_fn(2 * nc, 2 * nc, |r, col| {
            let (n, base) = if r < nc { (r, first) } else { (r - nc, last) };
            (0..mm).map(|q| system.modes[n][q] * xb[(base + q, col)]).sum()
        });
        Ok(QtbmFactorization {
            system,
            lu,
            xb,
            s0,
            options,
        })
    }

    pub fn system(&self) -> &QtbmSystem {
        &self.system
    }

    fn ghost_all(&self) -> Vec<Complex64> {
        let g = &self.system.ghost;
        g.iter().chain(g.iter()).copied().collect()
    }

    fn bordered(&self) -> DMatrix<Complex64> {
        let lam = self.ghost_all();
        let k = lam.len();
        DMatrix::from_fn(k, k, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) + lam[r] * self.s0[(r, c)]
        })
    }

    /// Solve `A_sys δz = r` using the stored factors.
    fn correction(&self, r: &[Complex64], kmat: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>) -> Result<Vec<Complex64>> {
        let sys = &self.system;
        let ni = sys.interior_unknowns();
        let m = sys.m;
        let mm = m * m;
        let nc = sys.channel_count();
        let mut w = Mat::<f64>::from_fn(ni, 2, |p, c| if c == 0 { r[p].re } else { r[p].im });
        self.lu.solve_in_place(w.as_mut());
        let lam = self.ghost_all();
        let (first, last) = (sys.layer(0), sys.layer(m - 1));
        let rhs = nalgebra::DVector::from_fn(2 * nc, |row, _| {
            let (n, base) = if row < nc { (row, first) } else { (row - nc, last) };
            let proj: Complex64 = (0..mm)
                .map(|q| sys.modes[n][q] * Complex64::new(w[(base + q, 0)], w[(base + q, 1)]))
                .sum();
            r[ni + row] + lam[row] * proj
        });
        let dy = kmat
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("bordered amplitude system".into()))?;
        let mut out = Vec::with_capacity(sys.unknowns());
        for p in 0..ni {
            let mut v = Complex64::new(w[(p, 0)], w[(p, 1)]);
            for col in 0..2 * nc {
                v -= self.xb[(p, col)] * dy[col];
            }
            out.push(v);
        }
        out.extend(dy.iter().copied());
        Ok(out)
    }

    /// Scattering state for the double dot initially in `input`.
    pub fn solve(&self, input: usize) -> Result<ScatteringSolution> {
        let mut sys = self.system.clone();
        if input >= sys.channel_count() {
            return Err(Error::Validation(format!("input channel {input} not retained")));
        }
        if sys.channels[input].kind != ChannelKind::Traveling {
            return Err(Error::Validation(format!("input channel {input} is not open")));
        }
        sys.input = input;
        let kmat = self.bordered().lu();
        let rhs = sys.rhs();
        let rhs_norm = norm(&rhs);
        let mut z = self.correction(&rhs, &kmat)?;
        let mut history = Vec::new();
        loop {
            let az = sys.apply(&z);
            let r: Vec<Complex64> = rhs.iter().zip(&az).map(|(a, b)| a - b).collect();
            let rel = norm(&r) / rhs_norm;
            history.push(rel);
            if !rel.is_finite() {
                return Err(Error::Singular("non-finite residual".into()));
            }
            if rel <= self.options.residual_tolerance {
                break;
            }
            if history.len() > self.options.max_refinements {
                return Err(Error::NotConverged {
                    tolerance: self.options.residual_tolerance,
                    history,
                });
            }
            let dz = self.correction(&r, &kmat)?;
            z.iter_mut().zip(&dz).for_each(|(a, d)| *a += d);
        }
        let ni = sys.interior_unknowns();
        let nc = sys.channel_count();
        let warnings = sys
            .channels
            .iter()
            .filter(|c| c.near_threshold)
            .map(|c| {
                format!(
                    "channel {} within {:e} meV of threshold (T = {:e} meV), treated as closed",
                    c.n, self.options.threshold_tolerance, c.kinetic
                )
            })
            .collect();
        let kinetic = sys.channels[input].kinetic;
        Ok(ScatteringSolution {
            input_channel: input,
            kinetic_energy: kinetic,
            total_energy: sys.energy,
            b: z[ni..ni + nc].to_vec(),
            c: z[ni + nc..].to_vec(),
            channels: sys.channels.clone(),
            interior_points: sys.m,
            carrier_field: z[..ni].to_vec(),
            residual_norm: *history.last().unwrap_or(&f64::NAN),
            residual_history: history,
            warnings,
        })
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Assemble, factor and solve one injection.
pub fn solve_scattering(problem: &ScatteringProblem) -> Result<ScatteringSolution> {
    problem.validate()?;
    QtbmFactorization::new(
        problem.model,
        problem.basis,
        problem.total_energy(),
        problem.options,
    )?
    .solve(problem.input_channel)
}

/// Flux-weighted reflection and transmission probabilities per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProbabilities {
    pub reflection: Vec<f64>,
    pub transmission: Vec<f64>,
    /// |1 − Σ(p^R + p^T)|.
    pub conservation_defect: f64,
}

impl ChannelProbabilities {
    pub fn total(&self, n: usize) -> f64 {
        self.reflection[n] + self.transmission[n]
    }
}

/// p^R_n = (v_n/v_j)|b_jn|², p^T_n = (v_n/v_j)|c_jn|², with lattice group
/// velocities v ∝ sin kΔ; closed channels carry no flux.
pub fn channel_probabilities(solution: &ScatteringSolution, tolerance: f64) -> Result<ChannelProbabilities> {
    let v0 = solution.channels[solution.input_channel].velocity();
    let weight: Vec<f64> = solution.channels.iter().map(|c| c.velocity() / v0).collect();
    let reflection: Vec<f64> = solution.b.iter().zip(&weight).map(|(a, w)| w * a.norm_sqr()).collect();
    let transmission: Vec<f64> = solution.c.iter().zip(&weight).map(|(a, w)| w * a.norm_sqr()).collect();
    let total: f64 = reflection.iter().chain(&transmission).sum();
    let defect = (1.0 - total).abs();
    if !(defect <= tolerance) {
        return Err(Error::Conservation { defect, tolerance });
    }
    Ok(ChannelProbabilities {
        reflection,
        transmission,
        conservation_defect: defect,
    })
}

/// max |Ψ + PΨ| over all interior triples and the three pair exchanges P,
/// relative to max |Ψ|.
pub fn exchange_violation(psi: &[Complex64], m: usize) -> f64 {
    let at = |i: usize, j: usize, k: usize| psi[(i * m + j) * m + k];
    let mut worst = 0.0f64;
    let mut peak = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let v = at(i, j, k);
                peak = peak.max(v.norm());
                worst = worst
                    .max((v + at(j, i, k)).norm())
                    .max((v + at(k, j, i)).norm())
                    .max((v + at(i, k, j)).norm());
            }
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        worst / peak
    }
}

/// Exchange violation of the antisymmetrized wavefunction of a solution.
pub fn check_antisymmetry(solution: &ScatteringSolution) -> f64 {
    exchange_violation(&solution.wavefunction(), solution.interior_points)
}
