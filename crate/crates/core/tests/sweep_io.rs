use approx::assert_abs_diff_eq;

use dqd_scatter::config::RunConfig;
use dqd_scatter::error::ErrorKind;
use dqd_scatter::fit::fit_fano;
use dqd_scatter::sweep::{
    config_hash, emit_outputs, find_extremum, run_sweep, run_sweep_with, EnergyGrid, Feature,
    OutputFormat, ResultBundle, Session, SweepSpec,
};

fn spec(energies: Vec<f64>) -> SweepSpec {
    SweepSpec {
        input_channel: 0,
        energies: EnergyGrid::List(energies),
    }
}

fn small() -> RunConfig {
    RunConfig::default().with_grid(21)
}

#[test]
fn bundles_do_not_depend_on_worker_count() {
    let s = spec(vec![4.0, 9.0, 13.5, 16.0, 18.5]);
    let a = run_sweep(&small(), &s, 1).unwrap();
    let b = run_sweep(&small(), &s, 3).unwrap();
    let c = run_sweep(&small(), &s, 1).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_json(), c.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn records_round_trip() {
    let session = Session::new(small()).unwrap();
    let bundle = run_sweep_with(&session, &spec(vec![3.0, 11.0, 150.0]), 1).unwrap();
    assert_eq!(bundle.failures(), 1, "the point above the band fails alone");

    let back = ResultBundle::from_json(&bundle.to_json()).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(back.to_json(), bundle.to_json());

    let csv = bundle.to_csv();
    let records = ResultBundle::records_from_csv(&csv).unwrap();
    let again = ResultBundle {
        records,
        ..bundle.clone()
    };
    assert_eq!(again.to_csv(), csv);
}

#[test]
fn outputs_are_named_by_hash() {
    let session = Session::new(small()).unwrap();
    let s = spec(vec![5.0, 6.0]);
    let bundle = run_sweep_with(&session, &s, 1).unwrap();
    let hash = config_hash(&session.config, &s);
    assert_eq!(hash.len(), 64);
    let dir = tempfile::tempdir().unwrap();
    for fmt in [OutputFormat::Csv, OutputFormat::Json] {
        let files = emit_outputs(&bundle, fmt, dir.path()).unwrap();
        let name = files[0].file_name().unwrap().to_str().unwrap().to_string();
        assert!(name.starts_with(&format!("sweep-j0-{}", &hash[..12])), "{name}");
        let first = std::fs::read_to_string(&files[0]).unwrap();
        emit_outputs(&bundle, fmt, dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(&files[0]).unwrap(), first);
    }

    let blocker = dir.path().join("plain-file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit_outputs(&bundle, OutputFormat::Csv, &blocker.join("sub")).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Io);
}

#[test]
fn bad_requests_fail_before_solving() {
    for energies in [vec![], vec![2.0, 1.0], vec![-1.0, 2.0]] {
        let err = run_sweep(&small(), &spec(energies), 1).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Validation);
    }
    let err = run_sweep(&small(), &spec(vec![150.0, 160.0]), 1).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Solver);
}

#[test]
fn lorentzian_samples_are_recovered() {
    let (x0, g, a, y0): (f64, f64, f64, f64) = (15.8, 0.4, 0.45, 0.05);
    let x: Vec<f64> = (0..41).map(|i| 13.2 + 0.15 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|&t| y0 + a * (g / 2.0).powi(2) / ((t - x0).powi(2) + (g / 2.0).powi(2))).collect();
    let r = find_extremum(&x, &y, Feature::Peak).unwrap().unwrap();
    assert_abs_diff_eq!(r.center, x0, epsilon = 1e-6);
    assert_abs_diff_eq!(r.width, g, epsilon = 1e-6);
    assert!(r.fit.unwrap().r_squared > 0.999_999);

    let rising: Vec<f64> = x.iter().map(|t| t * t).collect();
    assert!(find_extremum(&x, &rising, Feature::Peak).unwrap().is_none());
    assert!(find_extremum(&x[..5], &y[..5], Feature::Peak).is_err());
}

#[test]
fn fano_dip_reports_its_skew() {
    let (x0, g, q) = (16.0, 0.5, 0.8);
    let x: Vec<f64> = (0..61).map(|i| 14.5 + 0.05 * i as f64).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&t| {
            let e = 2.0 * (t - x0) / g;
            0.9 - 0.5 * (q + e).powi(2) / (1.0 + e * e) / (1.0 + q * q)
        })
        .collect();
    let f = fit_fano(&x, &y).unwrap();
    assert!(f.r_squared > 0.9999);
    assert!(f.skew().abs() > 0.1);
    let r = find_extremum(&x, &y, Feature::TransmissionDip).unwrap().unwrap();
    assert!((r.sample_energy - x0).abs() < 1.0);
}
