//! Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! The resonance, decoherence-free and relaxation criteria solve the device
//! at the production grid; together they take the better part of an hour
//! on a single core. The binary exits non-zero when any criterion fails.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dqd_scatter::bound::{single_particle_spectrum, ChannelBasis, OverlapTable};
use dqd_scatter::config::{RunConfig, CI_GRID, PRODUCTION_GRID};
use dqd_scatter::current::{closed_form_entangle, entangle_trace, ChannelMap};
use dqd_scatter::model::{DeviceSpec, Interaction, MaterialParams, Model};
use dqd_scatter::qinfo::{
    concurrence_wootters, concurrence_xstate, decoherence, decoherence_xstate, TwoQubitState,
};
use dqd_scatter::qtbm::{channel_probabilities, QtbmFactorization, SolverOptions};
use dqd_scatter::sweep::{
    run_sweep, scan_resonance, EnergyGrid, Feature, PointData, ResultBundle, Session, SweepSpec,
};

// bound levels (meV)
const LEVELS: [(f64, f64); 3] = [(-105.6, 1.0), (-92.5, 1.0), (-71.5, 1.5)];
const LEVELS_SECONDS: f64 = 10.0;
// overlap table
const TABLE_TOL: f64 = 1e-3;
const TABLE_SECONDS: f64 = 60.0;
// every converged solve
const CONSERVATION_TOL: f64 = 1e-6;
const ANTISYMMETRY_TOL: f64 = 1e-6;
// entangling resonance
const RESONANCE_WINDOW: (f64, f64) = (13.2, 19.2);
const RESONANCE_COARSE: usize = 31;
const RESONANCE_FINE: usize = 8;
const RESONANCE_CENTER: (f64, f64) = (15.8, 1.5);
const RESONANCE_SPLIT: (f64, f64) = (0.5, 0.1);
const RESONANCE_C: (f64, f64) = (0.5, 0.1);
const RESONANCE_XI_TOL: f64 = 0.1;
const RESONANCE_SECONDS: f64 = 1800.0;
// decoherence-free channel
const KEEP_MIN_P2: f64 = 0.99;
const KEEP_MIN_C: f64 = 0.99;
const KEEP_MAX_XI: f64 = 0.02;
// relaxation resonance: scanned wider than the tolerance so that a
// misplaced peak is located rather than missed
const RELAX_WINDOW: (f64, f64) = (1.6, 6.6);
const RELAX_COARSE: usize = 26;
const RELAX_FINE: usize = 6;
const RELAX_CENTER: (f64, f64) = (2.6, 1.0);
// current map
const MAP_STAY: [f64; 5] = [0.0, 0.3, 0.5, 0.9, 1.0];
const MAP_INJECTIONS: usize = 64;
const MAP_TOL: f64 = 1e-12;
const MAP_SECONDS: f64 = 1.0;
// quantum information
const QINFO_SAMPLES: usize = 1000;
const QINFO_TOL: f64 = 1e-10;
const QINFO_SECONDS: f64 = 5.0;
// free propagation
const FREE_ENERGIES: usize = 10;
const FREE_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// State shared between criteria: the production session and every point
/// solved along the way.
#[derive(Default)]
struct Run {
    production: Option<Session>,
    resonance: Option<f64>,
    points: Vec<PointData>,
    failed_points: Vec<String>,
}

impl Run {
    fn production(&mut self) -> &Session {
        self.production
            .get_or_insert_with(|| Session::new(RunConfig::default().with_grid(PRODUCTION_GRID)).expect("production basis"))
    }

    fn collect(&mut self, b: &ResultBundle) {
        for r in &b.records {
            match (&r.data, &r.error) {
                (Some(d), _) => self.points.push(d.clone()),
                (None, e) => self.failed_points.push(format!("T0={}: {}", r.kinetic_energy, e.clone().unwrap_or_default())),
            }
        }
    }
}

fn within(x: f64, (target, tol): (f64, f64)) -> bool {
    (x - target).abs() <= tol
}

fn bound_levels(_: &mut Run) -> Outcome {
    let t = Instant::now();
    let model = Model::reference(PRODUCTION_GRID).unwrap();
    let (e, _) = single_particle_spectrum(model.potential(), &model.grid, &model.scale, 6).unwrap();
    // tunnel-split doublets: the dot level is the doublet mean
    let levels: Vec<f64> = (0..3).map(|k| 0.5 * (e[2 * k] + e[2 * k + 1])).collect();
    let secs = t.elapsed().as_secs_f64();
    let ok = levels.iter().zip(LEVELS).all(|(&x, r)| within(x, r)) && secs < LEVELS_SECONDS;
    outcome(
        ok,
        format!(
            "E0={:.2} E1={:.2} E2={:.2} meV (targets -105.6±1.0, -92.5±1.0, -71.5±1.5), {secs:.1}s < {LEVELS_SECONDS}s",
            levels[0], levels[1], levels[2]
        ),
    )
}

fn overlap_table(_: &mut Run) -> Outcome {
    let t = Instant::now();
    let model = Model::reference(CI_GRID).unwrap();
    let basis = ChannelBasis::compute(&model, 8).unwrap();
    let table = basis.qubit.as_ref().unwrap().overlaps;
    let secs = t.elapsed().as_secs_f64();
    let ideal = OverlapTable::ideal().0;
    let mut magnitude = 0.0f64;
    let mut signs = true;
    for (row, target) in table.0.iter().zip(ideal) {
        for (a, b) in row.iter().zip(target) {
            magnitude = magnitude.max((a.abs() - b.abs()).abs());
        }
        // one overall sign per eigenvector
        let k = (0..4).max_by(|&i, &j| target[i].abs().total_cmp(&target[j].abs())).unwrap();
        let g = (row[k] * target[k]).signum();
        signs &= row.iter().zip(target).all(|(a, b)| b.abs() < 0.5 || (g * a).signum() == b.signum());
    }
    outcome(
        magnitude <= TABLE_TOL && signs && secs < TABLE_SECONDS,
        format!(
            "max magnitude error {magnitude:.2e} (tol {TABLE_TOL:.0e}), sign pattern {}, {secs:.1}s < {TABLE_SECONDS}s",
            if signs { "matches" } else { "differs" }
        ),
    )
}

fn resonance_scan(run: &mut Run) -> Outcome {
    let t = Instant::now();
    let session = run.production().clone();
    let (bundle, res) = match scan_resonance(
        &session,
        0,
        2,
        Feature::Peak,
        RESONANCE_WINDOW,
        RESONANCE_COARSE,
        RESONANCE_FINE,
        0,
    ) {
        Ok(x) => x,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let secs = t.elapsed().as_secs_f64();
    run.collect(&bundle);
    let Some(r) = res else {
        return outcome(false, "no interior channel-2 peak in the window".into());
    };
    run.resonance = Some(r.sample_energy);
    let (_, d) = bundle
        .converged()
        .find(|(t0, _)| *t0 == r.sample_energy)
        .expect("peak sample is a converged record");
    let (p0, p2) = (d.total(0), d.total(2));
    let ln2 = 2f64.ln();
    let ok = within(r.center, RESONANCE_CENTER)
        && within(p0, RESONANCE_SPLIT)
        && within(p2, RESONANCE_SPLIT)
        && within(d.concurrence, RESONANCE_C)
        && (d.decoherence - ln2).abs() <= RESONANCE_XI_TOL
        && secs < RESONANCE_SECONDS;
    let fit = r.fit.map_or("none".to_string(), |f| format!("R²={:.3}", f.r_squared));
    outcome(
        ok,
        format!(
            "peak {:.3} meV (sample {:.3}, width {:.3}, fit {fit}; target 15.8±1.5), P0={p0:.3} P2={p2:.3} (0.5±0.1), C={:.3} (0.5±0.1), xi={:.3} (ln2±0.1), {} points, {:.0}s < {RESONANCE_SECONDS}s",
            r.center,
            r.sample_energy,
            r.width,
            d.concurrence,
            d.decoherence,
            bundle.records.len(),
            secs
        ),
    )
}

fn decoherence_free(run: &mut Run) -> Outcome {
    let Some(t0) = run.resonance else {
        return outcome(false, "no located resonance to evaluate at".into());
    };
    let session = run.production().clone();
    let rec = session.evaluate(2, t0);
    let Some(d) = rec.data.clone() else {
        return outcome(false, format!("solve at {t0} failed: {}", rec.error.unwrap_or_default()));
    };
    run.points.push(d.clone());
    let p2 = d.total(2);
    outcome(
        p2 >= KEEP_MIN_P2 && d.concurrence >= KEEP_MIN_C && d.decoherence <= KEEP_MAX_XI,
        format!(
            "j=2 at T0={t0:.3}: P2={p2:.4} (≥{KEEP_MIN_P2}), C={:.4} (≥{KEEP_MIN_C}), xi={:.4} (≤{KEEP_MAX_XI})",
            d.concurrence, d.decoherence
        ),
    )
}

fn relaxation(run: &mut Run) -> Outcome {
    let t = Instant::now();
    let session = run.production().clone();
    let (bundle, res) = match scan_resonance(&session, 2, 0, Feature::Peak, RELAX_WINDOW, RELAX_COARSE, RELAX_FINE, 0) {
        Ok(x) => x,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    run.collect(&bundle);
    let secs = t.elapsed().as_secs_f64();
    match res {
        None => outcome(false, format!("no interior channel-0 peak in {RELAX_WINDOW:?} meV")),
        Some(r) => outcome(
            within(r.center, RELAX_CENTER),
            format!(
                "channel-0 peak at {:.3} meV (P0={:.3}; target 2.6±1.0), {} points, {secs:.0}s",
                r.center,
                r.sample_value,
                bundle.records.len()
            ),
        ),
    }
}

fn current_map(_: &mut Run) -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut limits = true;
    for p in MAP_STAY {
        let trace = entangle_trace(&ChannelMap::ideal_entangling(p).unwrap(), MAP_INJECTIONS).unwrap();
        for st in &trace.steps {
            let (c, xi) = closed_form_entangle(p, st.n);
            worst = worst
                .max((st.concurrence - c).abs())
                .max((st.decoherence - xi).abs())
                .max((st.concurrence - (1.0 - p.powi(st.n as i32))).abs());
        }
        if p < 1.0 {
            let last = trace.steps.last().unwrap();
            let (c, xi) = closed_form_entangle(p, 10_000);
            limits &= 1.0 - c < 1e-12 && xi < 1e-12;
            limits &= 1.0 - last.concurrence < 1e-2 && last.decoherence < 5e-2;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= MAP_TOL && limits && secs < MAP_SECONDS,
        format!(
            "max deviation {worst:.1e} (tol {MAP_TOL:.0e}) over p00 in {MAP_STAY:?}, n ≤ {MAP_INJECTIONS}; limits {}; {secs:.3}s",
            if limits { "hold" } else { "violated" }
        ),
    )
}

fn random_x_state(rng: &mut ChaCha8Rng) -> TwoQubitState {
    let p: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() + 1e-3);
    let s: f64 = p.iter().sum();
    let p = p.map(|x| x / s);
    let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
    for k in 0..4 {
        e[k][k] = Complex64::new(p[k], 0.0);
    }
    let tau = std::f64::consts::TAU;
    e[0][3] = Complex64::from_polar(rng.random::<f64>() * (p[0] * p[3]).sqrt(), tau * rng.random::<f64>());
    e[3][0] = e[0][3].conj();
    e[1][2] = Complex64::from_polar(rng.random::<f64>() * (p[1] * p[2]).sqrt(), tau * rng.random::<f64>());
    e[2][1] = e[1][2].conj();
    TwoQubitState::new(e).unwrap()
}

fn quantum_info(_: &mut Run) -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut dc, mut dx) = (0.0f64, 0.0f64);
    for _ in 0..QINFO_SAMPLES {
        let s = random_x_state(&mut rng);
        dc = dc.max((concurrence_xstate(&s).unwrap() - concurrence_wootters(&s).unwrap()).abs());
        dx = dx.max((decoherence(&s).unwrap() - decoherence_xstate(&s).unwrap()).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        dc <= QINFO_TOL && dx <= QINFO_TOL && secs < QINFO_SECONDS,
        format!(
            "{QINFO_SAMPLES} random X-states: |C_X − C_W| ≤ {dc:.1e}, |ξ_eig − ξ_block| ≤ {dx:.1e} (tol {QINFO_TOL:.0e}), {secs:.2}s"
        ),
    )
}

fn free_propagation(_: &mut Run) -> Outcome {
    let device = DeviceSpec {
        well_depth_mev: 0.0,
        ..DeviceSpec::default()
    };
    let model = Model::new(MaterialParams::default(), device, CI_GRID, Interaction::Off).unwrap();
    let basis = ChannelBasis::without_qubits(&model, 4).unwrap();
    let mut worst = 0.0f64;
    for k in 0..FREE_ENERGIES {
        let t0 = 1.0 + 3.0 * k as f64;
        let e = basis.states[0].energy + t0;
        let s = QtbmFactorization::new(&model, &basis, e, SolverOptions::default())
            .and_then(|f| f.solve(0));
        match s.and_then(|s| channel_probabilities(&s, CONSERVATION_TOL)) {
            Ok(p) => worst = worst.max((p.transmission[0] - 1.0).abs()),
            Err(e) => return outcome(false, format!("T0={t0}: {e}")),
        }
    }
    outcome(
        worst <= FREE_TOL,
        format!("|p^T − 1| ≤ {worst:.1e} over {FREE_ENERGIES} energies 1..28 meV (tol {FREE_TOL:.0e})"),
    )
}

fn determinism(run: &mut Run) -> Outcome {
    let cfg = RunConfig::default().with_grid(CI_GRID);
    let spec = SweepSpec {
        input_channel: 0,
        energies: EnergyGrid::List(vec![6.0, 14.5, 17.0]),
    };
    let a = run_sweep(&cfg, &spec, 1).unwrap();
    let b = run_sweep(&cfg, &spec, 1).unwrap();
    let c = run_sweep(&cfg, &spec, 0).unwrap();
    run.collect(&a);
    let same = a.to_json() == b.to_json() && a.to_json() == c.to_json() && a.to_csv() == c.to_csv();
    outcome(
        same,
        format!(
            "two runs and worker counts 1 vs {}: JSON and CSV {}",
            std::thread::available_parallelism().map_or(1, |n| n.get()),
            if same { "byte-identical" } else { "differ" }
        ),
    )
}

fn conservation(run: &mut Run) -> Outcome {
    let defect = run.points.iter().map(|d| d.conservation_defect).fold(0.0, f64::max);
    let anti = run.points.iter().map(|d| d.antisymmetry).fold(0.0, f64::max);
    let rejected: Vec<&String> = run
        .failed_points
        .iter()
        .filter(|e| e.contains("conservation") || e.contains("exchange"))
        .collect();
    outcome(
        !run.points.is_empty() && defect <= CONSERVATION_TOL && anti <= ANTISYMMETRY_TOL && rejected.is_empty(),
        format!(
            "{} converged solves: max defect {defect:.1e} (tol {CONSERVATION_TOL:.0e}), max exchange violation {anti:.1e} (tol {ANTISYMMETRY_TOL:.0e}); {} rejected, {} other failures",
            run.points.len(),
            rejected.len(),
            run.failed_points.len() - rejected.len()
        ),
    )
}

type Criterion = (&'static str, fn(&mut Run) -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("bound levels", bound_levels),
        ("overlap table", overlap_table),
        ("current map closed forms", current_map),
        ("quantum-info oracles", quantum_info),
        ("free propagation", free_propagation),
        ("determinism", determinism),
        ("entangling resonance", resonance_scan),
        ("decoherence-free channel", decoherence_free),
        ("relaxation resonance", relaxation),
        ("conservation", conservation),
    ];
    let mut run = Run::default();
    let mut failed = 0;
    let start = Instant::now();
    for (name, f) in criteria {
        let t = Instant::now();
        let o = f(&mut run);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{tag} {name}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
    }
    println!(
        "{} of {} criteria passed in {:.0}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
