//! Energy sweeps: many independent injections at one input state, run on a
//! worker pool and collected into a deterministic result bundle.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bound::{ChannelBasis, OverlapTable};
use crate::config::{OverlapChoice, RunConfig};
use crate::current::{ChannelMap, InjectionTrace};
use crate::error::{Error, Result};
use crate::fit::{fit_fano, fit_lorentzian, LineshapeFit};
use crate::model::Model;
use crate::qinfo::{entanglement_report, normalize_amplitudes, reduced_density_matrix};
use crate::qtbm::{
    channel_probabilities, check_antisymmetry, ChannelKind, ScatteringSolution,
};

/// Kinetic energies of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyGrid {
    /// start, start + step, … up to and including stop (within step/1e6).
    Range {
        start_mev: f64,
        stop_mev: f64,
        step_mev: f64,
    },
    List(Vec<f64>),
}

impl EnergyGrid {
    /// `count` evenly spaced points from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        let step = if count > 1 { (stop - start) / (count - 1) as f64 } else { 0.0 };
        EnergyGrid::List((0..count).map(|i| start + step * i as f64).collect())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match self {
            EnergyGrid::Range {
                start_mev,
                stop_mev,
                step_mev,
            } => {
                if !(*step_mev > 0.0) {
                    return Err(Error::Validation(format!("step must be positive, got {step_mev}")));
                }
                let n = ((stop_mev - start_mev) / step_mev + 1e-6).floor();
                if !(n >= 0.0 && n < 1e7) {
                    return Err(Error::Validation("empty or oversized energy range".into()));
                }
                (0..=n as usize).map(|i| start_mev + step_mev * i as f64).collect()
            }
            EnergyGrid::List(v) => v.clone(),
        };
        if pts.is_empty() {
            return Err(Error::Validation("energy list is empty".into()));
        }
        if pts.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Validation("kinetic energies must be positive".into()));
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("kinetic energies must increase strictly".into()));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Qubit label j of the initial dot state.
    pub input_channel: usize,
    pub energies: EnergyGrid,
}

/// Model, channel basis and overlap table shared by every point of a run.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: RunConfig,
    pub model: Model,
    pub basis: ChannelBasis,
    pub overlaps: OverlapTable,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model()?;
        let basis = ChannelBasis::compute(&model, config.channels.count)?;
        let overlaps = match config.channels.overlaps {
            OverlapChoice::Ideal => OverlapTable::ideal(),
            OverlapChoice::Computed => crate::bound::overlap_table(&basis)?,
        };
        Ok(Session {
            config,
            model,
            basis,
            overlaps,
        })
    }

    /// Basis index of qubit label `j`.
    pub fn channel(&self, j: usize) -> Result<usize> {
        if j > 3 {
            return Err(Error::Validation(format!("qubit label {j} out of range 0..=3")));
        }
        Ok(self.basis.channel_of(j))
    }

    /// Scattering solution for qubit input `j` at kinetic energy `t0`.
    pub fn solve(&self, j: usize, t0: f64) -> Result<ScatteringSolution> {
        let n = self.channel(j)?;
        let problem = crate::qtbm::ScatteringProblem::new(&self.model, &self.basis, n, t0)?
            .with_options(self.config.solver.options());
        crate::qtbm::solve_scattering(&problem)
    }

    /// Solve and reduce one point; failures are kept in the record.
    pub fn evaluate(&self, j: usize, t0: f64) -> SweepRecord {
        match self.solve(j, t0).and_then(|s| self.reduce(&s)) {
            Ok(data) => SweepRecord {
                kinetic_energy: t0,
                data: Some(data),
                error: None,
            },
            Err(e) => SweepRecord {
                kinetic_energy: t0,
                data: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn reduce(&self, s: &ScatteringSolution) -> Result<PointData> {
        let tol = self.config.solver.conservation_tolerance;
        let probs = channel_probabilities(s, tol)?;
        let antisymmetry = check_antisymmetry(s);
        if antisymmetry > 1e-6 {
            return Err(Error::Validation(format!(
                "wavefunction exchange violation {antisymmetry:e}"
            )));
        }
        let out = normalize_amplitudes(s, &self.basis)?;
        let rho = reduced_density_matrix(&out, &self.overlaps)?;
        let report = entanglement_report(&rho)?;
        let labels = std::array::from_fn(|l| self.basis.channel_of(l));
        let reflection: [f64; 4] = labels.map(|n| probs.reflection[n]);
        let transmission: [f64; 4] = labels.map(|n| probs.transmission[n]);
        let qubit: f64 = reflection.iter().chain(&transmission).sum();
        let all: f64 = probs.reflection.iter().chain(&probs.transmission).sum();
        Ok(PointData {
            reflection,
            transmission,
            other_channels: (all - qubit).max(0.0),
            open_channels: s.channels.iter().filter(|c| c.kind == ChannelKind::Traveling).count(),
            concurrence: report.concurrence,
            decoherence: report.decoherence,
            conservation_defect: probs.conservation_defect,
            residual_norm: s.residual_norm,
            antisymmetry,
            warnings: s.warnings.clone(),
        })
    }

    /// Channel map at kinetic energy `t0` from solves at the given inputs.
    pub fn channel_map(&self, t0: f64, inputs: &[usize]) -> Result<ChannelMap> {
        let sols = inputs.iter().map(|&j| self.solve(j, t0)).collect::<Result<Vec<_>>>()?;
        crate::current::extract_channel_map(&sols, &self.basis, self.overlaps)
    }
}

/// Everything kept from one converged point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointData {
    /// Flux probabilities p^R_l and p^T_l for qubit labels l = 0..3.
    pub reflection: [f64; 4],
    pub transmission: [f64; 4],
    /// Flux into open channels outside the qubit subspace.
    pub other_channels: f64,
    pub open_channels: usize,
    pub concurrence: f64,
    pub decoherence: f64,
    pub conservation_defect: f64,
    pub residual_norm: f64,
    pub antisymmetry: f64,
    pub warnings: Vec<String>,
}

impl PointData {
    pub fn total(&self, l: usize) -> f64 {
        self.reflection[l] + self.transmission[l]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kinetic_energy: f64,
    pub data: Option<PointData>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// SHA-256 of the canonical JSON of configuration and sweep.
    pub config_hash: String,
    pub points_per_axis: usize,
    pub solver: crate::config::SolverConfig,
    pub channel_energies_mev: Vec<f64>,
    pub qubit_channels: [usize; 4],
    pub overlaps: OverlapChoice,
    pub version: String,
    /// Absent unless requested, so that bundles are reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTrace {
    pub label: String,
    pub kinetic_energy: f64,
    pub trace: InjectionTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub metadata: RunMetadata,
    pub input_channel: usize,
    /// Sorted by kinetic energy.
    pub records: Vec<SweepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<NamedTrace>,
}

impl ResultBundle {
    /// (T₀, data) of the converged points.
    pub fn converged(&self) -> impl Iterator<Item = (f64, &PointData)> {
        self.records
            .iter()
            .filter_map(|r| r.data.as_ref().map(|d| (r.kinetic_energy, d)))
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.data.is_none()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("bad bundle: {e}")))
    }

    /// One row per record; failed points have empty numeric fields.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
        for r in &self.records {
            let mut row = vec![r.kinetic_energy.to_string()];
            match &r.data {
                Some(d) => {
                    for l in 0..4 {
                        row.push(d.reflection[l].to_string());
                        row.push(d.transmission[l].to_string());
                    }
                    row.push(d.other_channels.to_string());
                    row.push(d.open_channels.to_string());
                    for x in [d.concurrence, d.decoherence, d.conservation_defect, d.residual_norm, d.antisymmetry] {
                        row.push(x.to_string());
                    }
                    row.push("ok".into());
                }
                None => {
                    row.extend(std::iter::repeat_n(String::new(), 15));
                    row.push("failed".into());
                }
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }

    /// Records from [`ResultBundle::to_csv`] output. Warnings and error texts
    /// are not part of the CSV and come back empty.
    pub fn records_from_csv(text: &str) -> Result<Vec<SweepRecord>> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| Error::Validation(format!("bad CSV: {e}")))?;
        if header.iter().ne(CSV_HEADER.split(',')) {
            return Err(Error::Validation("unexpected CSV header".into()));
        }
        rd.records()
            .map(|row| {
                let f = row.map_err(|e| Error::Validation(format!("malformed CSV row: {e}")))?;
                let bad = || Error::Validation(format!("malformed CSV row: {f:?}"));
                let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
                let kinetic_energy = num(0)?;
                if &f[16] != "ok" {
                    return Ok(SweepRecord {
                        kinetic_energy,
                        data: None,
                        error: Some(String::new()),
                    });
                }
                Ok(SweepRecord {
                    kinetic_energy,
                    data: Some(PointData {
                        reflection: [num(1)?, num(3)?, num(5)?, num(7)?],
                        transmission: [num(2)?, num(4)?, num(6)?, num(8)?],
                        other_channels: num(9)?,
                        open_channels: f[10].parse().map_err(|_| bad())?,
                        concurrence: num(11)?,
                        decoherence: num(12)?,
                        conservation_defect: num(13)?,
                        residual_norm: num(14)?,
                        antisymmetry: num(15)?,
                        warnings: vec![],
                    }),
                    error: None,
                })
            })
            .collect()
    }
}

pub const CSV_HEADER: &str = "T0_mev,pR_0,pT_0,pR_1,pT_1,pR_2,pT_2,pR_3,pT_3,p_other,open_channels,C,xi_nats,conservation_defect,residual,antisymmetry,status";

/// Deterministic hash of the configuration and sweep.
pub fn config_hash(config: &RunConfig, spec: &SweepSpec) -> String {
    let canonical = serde_json::json!({ "config": config, "sweep": spec });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

pub fn metadata(session: &Session, hash: String) -> RunMetadata {
    RunMetadata {
        config_hash: hash,
        points_per_axis: session.config.grid.points_per_axis,
        solver: session.config.solver,
        channel_energies_mev: session.basis.energies(),
        qubit_channels: std::array::from_fn(|l| session.basis.channel_of(l)),
        overlaps: session.config.channels.overlaps,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: None,
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {jobs} workers: {e}")))
}

/// Evaluate `energies` in parallel on `jobs` workers (0 = all cores).
pub fn evaluate_points(session: &Session, j: usize, energies: &[f64], jobs: usize) -> Result<Vec<SweepRecord>> {
    session.channel(j)?;
    let mut records: Vec<SweepRecord> =
        pool(jobs)?.install(|| energies.par_iter().map(|&t| session.evaluate(j, t)).collect());
    records.sort_by(|a, b| a.kinetic_energy.total_cmp(&b.kinetic_energy));
    Ok(records)
}

/// Run a sweep with an already prepared session.
pub fn run_sweep_with(session: &Session, spec: &SweepSpec, jobs: usize) -> Result<ResultBundle> {
    let energies = spec.energies.points()?;
    let records = evaluate_points(session, spec.input_channel, &energies, jobs)?;
    if records.iter().all(|r| r.data.is_none()) {
        let first = records[0].error.clone().unwrap_or_default();
        return Err(Error::SweepFailed(first));
    }
    Ok(ResultBundle {
        metadata: metadata(session, config_hash(&session.config, spec)),
        input_channel: spec.input_channel,
        records,
        traces: vec![],
    })
}

/// Load a configuration and run a sweep.
pub fn run_sweep(config: &RunConfig, spec: &SweepSpec, jobs: usize) -> Result<ResultBundle> {
    spec.energies.points()?;
    run_sweep_with(&Session::new(*config)?, spec, jobs)
}

/// Which feature of a spectrum to look for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    /// Maximum of p^R_l + p^T_l, fitted with a Lorentzian.
    Peak,
    /// Minimum of p^T_l, fitted with a Fano profile.
    TransmissionDip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// Fitted center when the fit is good and inside the sampled range,
    /// otherwise the extremal sample.
    pub center: f64,
    pub width: f64,
    pub sample_energy: f64,
    pub sample_value: f64,
    pub fit: Option<LineshapeFit>,
}

/// Minimum number of converged samples for a resonance search.
pub const MIN_RESONANCE_SAMPLES: usize = 7;

/// Locate the dominant resonance of qubit channel `l`. Returns `Ok(None)`
/// when the extremum sits on the edge of the sampled range.
pub fn find_resonance(bundle: &ResultBundle, l: usize, feature: Feature) -> Result<Option<Resonance>> {
    let (x, y): (Vec<f64>, Vec<f64>) = bundle
        .converged()
        .map(|(t, d)| {
            let v = match feature {
                Feature::Peak => d.total(l),
                Feature::TransmissionDip => d.transmission[l],
            };
            (t, v)
        })
        .unzip();
    find_extremum(&x, &y, feature)
}

/// [`find_resonance`] on raw samples.
pub fn find_extremum(x: &[f64], y: &[f64], feature: Feature) -> Result<Option<Resonance>> {
    if x.len() < MIN_RESONANCE_SAMPLES {
        return Err(Error::Validation(format!(
            "{} samples, at least {MIN_RESONANCE_SAMPLES} needed",
            x.len()
        )));
    }
    let sign = if feature == Feature::Peak { 1.0 } else { -1.0 };
    let k = (0..y.len())
        .max_by(|&a, &b| (sign * y[a]).total_cmp(&(sign * y[b])))
        .unwrap_or(0);
    if k == 0 || k + 1 == y.len() {
        return Ok(None);
    }
    let fit = match feature {
        Feature::Peak => fit_lorentzian(x, y),
        Feature::TransmissionDip => fit_fano(x, y),
    };
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let coarse = x[k + 1] - x[k - 1];
    let (center, width) = match fit {
        Some(f) if f.r_squared > 0.5 && f.center > lo && f.center < hi && f.width < hi - lo => {
            (f.center, f.width)
        }
        _ => (x[k], coarse),
    };
    Ok(Some(Resonance {
        center,
        width,
        sample_energy: x[k],
        sample_value: y[k],
        fit,
    }))
}

/// Coarse sweep over [lo, hi] followed by a fine sweep around the extremum
/// of the chosen feature. Both passes end up in the returned bundle.
#[allow(clippy::too_many_arguments)]
pub fn scan_resonance(
    session: &Session,
    j: usize,
    l: usize,
    feature: Feature,
    (lo, hi): (f64, f64),
    coarse_points: usize,
    fine_points: usize,
    jobs: usize,
) -> Result<(ResultBundle, Option<Resonance>)> {
    let spec = SweepSpec {
        input_channel: j,
        energies: EnergyGrid::linspace(lo, hi, coarse_points),
    };
    let mut bundle = run_sweep_with(session, &spec, jobs)?;
    let value = |d: &PointData| match feature {
        Feature::Peak => d.total(l),
        Feature::TransmissionDip => -d.transmission[l],
    };
    let best = bundle
        .converged()
        .max_by(|a, b| value(a.1).total_cmp(&value(b.1)))
        .map(|(t, _)| t)
        .ok_or_else(|| Error::SweepFailed("no converged coarse point".into()))?;
    let step = (hi - lo) / (coarse_points.max(2) - 1) as f64;
    let (a, b) = ((best - step).max(lo), (best + step).min(hi));
    // interior points only; the coarse samples already cover the ends
    let fine: Vec<f64> = (1..=fine_points)
        .map(|i| a + (b - a) * i as f64 / (fine_points + 1) as f64)
        .filter(|t| !bundle.records.iter().any(|r| (r.kinetic_energy - t).abs() < 1e-9))
        .collect();
    if !fine.is_empty() {
        let extra = evaluate_points(session, j, &fine, jobs)?;
        bundle.records.extend(extra);
        bundle.records.sort_by(|p, q| p.kinetic_energy.total_cmp(&q.kinetic_energy));
    }
    let res = find_resonance(&bundle, l, feature)?;
    Ok((bundle, res))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write a bundle as `sweep-j{j}-{hash}.{csv|json}`, plus one CSV per trace.
pub fn emit_outputs(bundle: &ResultBundle, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = format!("sweep-j{}-{}", bundle.input_channel, &bundle.metadata.config_hash[..12]);
    let mut written = Vec::new();
    let main = match format {
        OutputFormat::Csv => (dir.join(format!("{stem}.csv")), bundle.to_csv()),
        OutputFormat::Json => (dir.join(format!("{stem}.json")), bundle.to_json()),
    };
    write_file(&main.0, &main.1)?;
    written.push(main.0);
    for t in &bundle.traces {
        let p = dir.join(format!("{stem}-trace-{}.csv", t.label));
        write_file(&p, &t.trace.to_csv())?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_points() {
        let g = EnergyGrid::Range {
            start_mev: 1.0,
            stop_mev: 2.0,
            step_mev: 0.25,
        };
        assert_eq!(g.points().unwrap(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn invalid_grids() {
        assert!(EnergyGrid::List(vec![]).points().is_err());
        assert!(EnergyGrid::List(vec![1.0, 1.0]).points().is_err());
        assert!(EnergyGrid::List(vec![-1.0, 1.0]).points().is_err());
        let g = EnergyGrid::Range {
            start_mev: 1.0,
            stop_mev: 2.0,
            step_mev: 0.0,
        };
        assert!(g.points().is_err());
    }

    #[test]
    fn monotone_spectrum_has_no_resonance() {
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.1 * v).collect();
        assert!(find_extremum(&x, &y, Feature::Peak).unwrap().is_none());
    }

    #[test]
    fn hash_depends_on_config() {
        let spec = SweepSpec {
            input_channel: 0,
            energies: EnergyGrid::List(vec![1.0]),
        };
        let a = config_hash(&RunConfig::default(), &spec);
        let b = config_hash(&RunConfig::default().with_grid(41), &spec);
        assert_ne!(a, b);
        assert_eq!(a, config_hash(&RunConfig::default(), &spec));
        assert_eq!(a.len(), 64);
    }
}
