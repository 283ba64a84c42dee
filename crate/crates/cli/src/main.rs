use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dqd_scatter::bound::{orbitals_csv, spectrum_csv, BoundStateReport};
use dqd_scatter::config::RunConfig;
use dqd_scatter::current::{entangle_trace, disentangle_trace, ChannelMap};
use dqd_scatter::error::ErrorKind;
use dqd_scatter::figures::{figure, FigureOptions};
use dqd_scatter::sweep::{emit_outputs, run_sweep_with, EnergyGrid, NamedTrace, OutputFormat, Session, SweepSpec};
use dqd_scatter::{Error, Result};

/// Carrier scattering off a double quantum dot: bound states, spectra,
/// entanglement and repeated injection.
#[derive(Parser, Debug)]
#[command(name = "dqd-scatter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid points per axis, overriding the configuration.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core. Each worker holds its own
    /// factorization, about 2.5 GB at 66 points per axis.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Scenario {
    /// Start in ε₀ and excite towards ε₂.
    Entangle,
    /// Start in ε₂ and relax towards ε₀.
    Disentangle,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dot orbitals, two-particle levels and the qubit overlap table.
    BoundStates {
        #[command(flatten)]
        common: Common,
    },
    /// Scattering spectra against the kinetic energy of the carrier.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Qubit label of the initial dot state.
        #[arg(long, default_value_t = 0)]
        input: usize,
        #[arg(long, default_value_t = 13.2)]
        start: f64,
        #[arg(long, default_value_t = 19.2)]
        stop: f64,
        #[arg(long, default_value_t = 0.2)]
        step: f64,
        /// Explicit comma-separated energies (meV), replacing the range.
        #[arg(long, value_delimiter = ',')]
        energies: Option<Vec<f64>>,
    },
    /// Dot state after a current of carriers at one energy.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Scenario::Entangle)]
        scenario: Scenario,
        /// Carrier kinetic energy (meV); solves the device.
        #[arg(long, conflicts_with = "stay")]
        energy: Option<f64>,
        /// Use the ideal two-state map with this stay probability instead.
        #[arg(long)]
        stay: Option<f64>,
        #[arg(long, default_value_t = 60)]
        injections: usize,
    },
    /// Regenerate the data of one figure.
    ReproduceFigure {
        #[arg(value_parser = clap::value_parser!(u8).range(2..=5))]
        figure: u8,
        #[command(flatten)]
        common: Common,
        /// Samples across each spectrum window.
        #[arg(long, default_value_t = 31)]
        points: usize,
    },
}

fn config(common: &Common) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = match common.grid {
        Some(n) => cfg.with_grid(n),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| Error::Io {
        path: p.display().to_string(),
        source: e,
    })?;
    Ok(p)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::BoundStates { common } => {
            let session = Session::new(config(&common)?)?;
            let report = BoundStateReport::new(&session.basis);
            let mut files = vec![];
            match common.format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&report).expect("report serializes");
                    files.push(write(&common.out, "bound-states.json", &(text + "\n"))?);
                }
                Format::Csv => {
                    files.push(write(&common.out, "two-particle.csv", &spectrum_csv(&session.basis))?);
                    if let Some(q) = &session.basis.qubit {
                        let orb = [
                            q.orbitals.left[0].clone(),
                            q.orbitals.right[0].clone(),
                            q.orbitals.left[1].clone(),
                            q.orbitals.right[1].clone(),
                        ];
                        files.push(write(&common.out, "orbitals.csv", &orbitals_csv(&session.model.grid, &orb))?);
                    }
                }
            }
            for (name, e) in ["E0L", "E0R", "E1L", "E1R"].iter().zip(&report.orbital_energies_mev) {
                println!("{name} = {e:.3} meV");
            }
            if let (Some(ch), Some(d)) = (report.qubit_channels, report.overlap_distance_to_ideal) {
                for (l, &n) in ch.iter().enumerate() {
                    println!("eps{l} = {:.3} meV", report.two_particle_energies_mev[n]);
                }
                println!("overlap table distance to ideal = {d:.2e}");
            }
            Ok(files)
        }
        Command::Sweep {
            common,
            input,
            start,
            stop,
            step,
            energies,
        } => {
            let energies = match energies {
                Some(v) => EnergyGrid::List(v),
                None => EnergyGrid::Range {
                    start_mev: start,
                    stop_mev: stop,
                    step_mev: step,
                },
            };
            let spec = SweepSpec {
                input_channel: input,
                energies,
            };
            // reject bad grids before the bound-state solve
            spec.energies.points()?;
            let session = Session::new(config(&common)?)?;
            let bundle = run_sweep_with(&session, &spec, common.jobs)?;
            if bundle.failures() > 0 {
                eprintln!("{} of {} points failed; see the bundle", bundle.failures(), bundle.records.len());
            }
            emit_outputs(&bundle, common.format.into(), &common.out)
        }
        Command::Trace {
            common,
            scenario,
            energy,
            stay,
            injections,
        } => {
            let map = match (energy, stay) {
                (_, Some(p)) => match scenario {
                    Scenario::Entangle => ChannelMap::ideal_entangling(p)?,
                    Scenario::Disentangle => ChannelMap::ideal_disentangling(p)?,
                },
                (Some(t0), None) => Session::new(config(&common)?)?.channel_map(t0, &[0, 2])?,
                (None, None) => {
                    return Err(Error::Validation("give --energy or --stay".into()));
                }
            };
            let trace = match scenario {
                Scenario::Entangle => entangle_trace(&map, injections)?,
                Scenario::Disentangle => disentangle_trace(&map, injections)?,
            };
            let label = match scenario {
                Scenario::Entangle => "entangle",
                Scenario::Disentangle => "disentangle",
            };
            let file = match common.format {
                Format::Csv => write(&common.out, &format!("trace-{label}.csv"), &trace.to_csv())?,
                Format::Json => {
                    let named = NamedTrace {
                        label: label.into(),
                        kinetic_energy: energy.unwrap_or(f64::NAN),
                        trace,
                    };
                    let text = serde_json::to_string_pretty(&(map, named)).expect("trace serializes");
                    write(&common.out, &format!("trace-{label}.json"), &(text + "\n"))?
                }
            };
            Ok(vec![file])
        }
        Command::ReproduceFigure {
            figure: n,
            common,
            points,
        } => {
            let session = Session::new(config(&common)?)?;
            let opts = FigureOptions {
                points,
                jobs: common.jobs,
                ..FigureOptions::default()
            };
            let data = figure(n, &session, &opts)?;
            if let Some(r) = data.resonance {
                println!("resonance at T0 = {:.3} meV (width {:.3} meV)", r.center, r.width);
            }
            let mut files = vec![];
            for (name, text) in &data.files {
                files.push(write(&common.out, name, text)?);
            }
            if matches!(common.format, Format::Json) {
                for b in &data.bundles {
                    files.extend(emit_outputs(b, OutputFormat::Json, &common.out)?);
                }
            }
            Ok(files)
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Solver => 2,
        ErrorKind::Io => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
