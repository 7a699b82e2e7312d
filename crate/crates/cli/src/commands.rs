//! Argument definitions and dispatch for every subcommand.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use spinforge::algorithms::{self as algo, BooleanOracle, Corrections, OracleForm, PhaseError};
use spinforge::gates::{standard_gate, GateName, GateSpec};
use spinforge::grape::{default_rf_scalings, optimize_multistart, ControlProblem, GrapeOptions};
use spinforge::prep::{entanglement_bounds, peres_threshold, warren_bound};
use spinforge::pulses::{bb1, corpse_default, fidelity_sweep, sweep_csv, Bb1Placement, ErrorAxis, PulseEvent};
use spinforge::readout::{observable_lines, spectrum, spectrum_csv, synthesize_fid, TomographyPlan};
use spinforge::spin::{free_hamiltonian, Ket, ProductOperatorExpansion, SpinSystem};

use crate::program::{self, auto_acquisition, load_system, Acquisition, Initial, PulseProgram, RunOptions, StateSource};
use crate::CliError;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Parser, Debug)]
#[command(name = "spinforge", version, about = "Liquid-state NMR quantum information simulator")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Directory for data files (spectra, pulses, traces).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a pulse program and report the final state.
    Run(RunArgs),
    /// Optimize a piecewise-constant pulse for a target gate.
    Grape(GrapeArgs),
    /// Run an algorithm or protocol.
    Algo {
        #[command(subcommand)]
        which: AlgoCmd,
    },
    /// Reconstruct a state by simulated tomography.
    Tomo(TomoArgs),
    /// Pseudo-pure signal and entanglement bounds.
    Bounds(BoundsArgs),
    /// Spectrum of a state.
    Spectrum(SpectrumArgs),
    /// Fidelity of a pulse or composite pulse across a systematic error.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateKind {
    Thermal,
    ThermalLinear,
    PseudoPure,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Initial state; overrides the program's own.
    #[arg(long, value_enum)]
    pub state: Option<StateKind>,
    /// JSON file holding an initial-state description.
    #[arg(long, conflicts_with = "state")]
    pub state_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
}

#[derive(Args, Debug)]
pub struct GrapeArgs {
    /// Gate name (for example CNOT, X, H, pulse).
    #[arg(long)]
    pub target: String,
    /// Qubits the gate acts on, controls first.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub on: Vec<usize>,
    #[arg(long)]
    pub angle_deg: Option<f64>,
    #[arg(long)]
    pub phase_deg: Option<f64>,
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub segments: Option<usize>,
    /// Segment length in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 4)]
    pub starts: usize,
    /// Optimize over the default RF-scale ensemble.
    #[arg(long)]
    pub robust: bool,
}

#[derive(Subcommand, Debug)]
pub enum AlgoCmd {
    Deutsch {
        /// One of f00, f01, f10, f11.
        #[arg(long)]
        f: String,
        #[arg(long, value_enum, default_value_t = Form::Ancilla)]
        form: Form,
    },
    Dj {
        /// Truth table as a bit string, input 0 first.
        #[arg(long)]
        table: String,
        #[arg(long, value_enum, default_value_t = Form::Refined)]
        form: Form,
    },
    Grover {
        #[arg(long)]
        n: usize,
        /// Marked input as a bit string; repeat for several.
        #[arg(long, required = true)]
        mark: Vec<String>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    Counting {
        /// Marked one-bit inputs ("0", "1"); omit for none.
        #[arg(long)]
        mark: Vec<String>,
        #[arg(long, default_value_t = 16)]
        sweep: usize,
    },
    Gauss {
        #[arg(long = "N")]
        n_int: u64,
        #[arg(long)]
        l: u64,
        #[arg(long = "M")]
        m_terms: u64,
        #[arg(long, default_value_t = algo::FACTOR_CHECK_TOL)]
        tol: f64,
    },
    Zeno {
        #[arg(long, default_value_t = 1e-3)]
        t180: f64,
        #[arg(long)]
        k: usize,
    },
    Dense {
        #[arg(long)]
        message: String,
    },
    Teleport {
        #[arg(long, default_value_t = 0.0)]
        theta_deg: f64,
        #[arg(long, default_value_t = 0.0)]
        phi_deg: f64,
        #[arg(long, value_enum, default_value_t = Correction::Coherent)]
        corrections: Correction,
    },
    Qec {
        /// none, z0, z1 or z2.
        #[arg(long, default_value = "none")]
        error: String,
        /// Per-qubit Z probability for the channel run.
        #[arg(long)]
        q: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Form {
    Ancilla,
    Refined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Correction {
    Coherent,
    PostProcessed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlanKind {
    Full,
    Minimal,
}

#[derive(Args, Debug)]
pub struct TomoArgs {
    /// JSON initial-state description.
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, value_enum, default_value_t = PlanKind::Full)]
    pub plan: PlanKind,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    /// Largest n for a table; defaults to `--n`.
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Boltzmann factor `h nu / k T`.
    #[arg(long, default_value_t = 1e-5)]
    pub x: f64,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value_t = 1024)]
    pub npoints: usize,
    #[arg(long)]
    pub dwell: Option<f64>,
    #[arg(long)]
    pub t2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sequence {
    Naive,
    Bb1,
    Corpse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Length,
    Offset,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub sequence: Sequence,
    #[arg(long, default_value_t = 180.0)]
    pub theta_deg: f64,
    #[arg(long, value_enum, default_value_t = SweepAxis::Length)]
    pub axis: SweepAxis,
    /// Largest fractional error; the sweep covers `[-max, max]`.
    #[arg(long, default_value_t = 0.2)]
    pub max: f64,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<String, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

fn read_state(path: &Path) -> Result<StateSource, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
}

fn deviation_of(src: &StateSource, sys: &SpinSystem<f64>) -> Result<spinforge::Mat<f64>, CliError> {
    Ok(match src.build(sys)? {
        Initial::State(rho) => rho.deviation().m,
        Initial::Operator(m) => m,
    })
}

fn bits_to_index(s: &str, n: usize) -> Result<usize, CliError> {
    if s.len() != n || !s.chars().all(|c| c == '0' || c == '1') {
        return Err(CliError::Validation(format!("{s:?} is not a {n}-bit string")));
    }
    Ok(usize::from_str_radix(s, 2).unwrap_or(0))
}

fn require_json(cli: &Cli, what: &str) -> Result<(), CliError> {
    if cli.format == Format::Csv {
        return Err(CliError::Validation(format!("{what} reports are JSON only")));
    }
    Ok(())
}

/// Execute a parsed command line and return what goes to standard output.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(cli, a),
        Command::Grape(a) => cmd_grape(cli, a),
        Command::Algo { which } => cmd_algo(cli, which),
        Command::Tomo(a) => cmd_tomo(cli, a),
        Command::Bounds(a) => cmd_bounds(cli, a),
        Command::Spectrum(a) => cmd_spectrum(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
    }
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> Result<String, CliError> {
    require_json(cli, "run")?;
    let prog = PulseProgram::load(&a.program)?;
    let over = a.system.as_deref().map(load_system).transpose()?;
    let sys = prog.resolve_system(a.program.parent(), over)?;
    let state = match (a.state, &a.state_file) {
        (Some(StateKind::Thermal), _) => Some(StateSource::Thermal),
        (Some(StateKind::ThermalLinear), _) => Some(StateSource::ThermalLinear),
        (Some(StateKind::PseudoPure), _) => Some(StateSource::PseudoPure { epsilon: a.epsilon, index: 0 }),
        (None, Some(p)) => Some(read_state(p)?),
        (None, None) => None,
    };
    let report = program::run(&prog, &sys, &RunOptions { state, out_dir: cli.out.clone() })?;
    if let Some(e) = report.expect.as_ref().filter(|e| !e.passed) {
        return Err(CliError::Runtime(format!("expectation failed: {}", e.failures.join("; "))));
    }
    to_json(&report)
}

fn default_grape_system(n: usize) -> Result<SpinSystem<f64>, CliError> {
    Ok(match n {
        1 => SpinSystem::homonuclear(&[0.0], 0.0, 1e-5, 10.0, 1.0)?,
        _ => {
            let shifts: Vec<f64> = (0..n).map(|k| 50.0 - 100.0 * k as f64 / (n - 1) as f64).collect();
            SpinSystem::homonuclear(&shifts, 10.0, 1e-5, 10.0, 1.0)?
        }
    })
}

fn cmd_grape(cli: &Cli, a: &GrapeArgs) -> Result<String, CliError> {
    require_json(cli, "grape")?;
    let name: GateName = a.target.parse()?;
    let gate = GateSpec {
        name,
        targets: a.on.clone(),
        control_state: None,
        angle: a.angle_deg.map(f64::to_radians),
        phase: a.phase_deg.map(f64::to_radians),
    };
    let n_needed = a.on.iter().max().map_or(1, |m| m + 1);
    let sys = match &a.system {
        Some(p) => load_system(p)?,
        None => default_grape_system(n_needed)?,
    };
    let n = sys.n();
    let target = standard_gate(&gate, n)?;
    let drift = free_hamiltonian(&sys, &vec![0.0; n])?;
    let problem = ControlProblem::xy(drift, target)?;
    let (seg_default, dt_default) = if n == 1 { (10, 1e-5) } else { (50, 1.5e-3) };
    let segments = a.segments.unwrap_or(seg_default);
    let dt = a.dt.unwrap_or(dt_default);
    if segments == 0 || dt.is_nan() || dt <= 0.0 {
        return Err(CliError::Validation("segments and dt must be positive".into()));
    }
    let opts = GrapeOptions { max_iters: a.max_iters, tol: a.tol, starts: a.starts, seed: cli.seed, ..GrapeOptions::default() };
    let rf = default_rf_scalings::<f64>();
    let result = optimize_multistart(&problem, segments, dt, a.robust.then_some(rf.as_slice()), &opts)?;
    let mut files = serde_json::Map::new();
    if let Some(dir) = &cli.out {
        files.insert("pulse".into(), json!(write_file(dir, "pulse.json", &to_json(&result.controls)?)?));
        files.insert("trace".into(), json!(write_file(dir, "trace.csv", &result.trace_csv())?));
    }
    to_json(&json!({
        "target": gate,
        "segments": segments,
        "dt_s": dt,
        "fidelity": result.fidelity,
        "iterations": result.iterations,
        "status": result.status,
        "start": result.start,
        "seed": cli.seed,
        "files": files,
        "controls": result.controls,
    }))
}

fn cmd_algo(cli: &Cli, which: &AlgoCmd) -> Result<String, CliError> {
    require_json(cli, "algo")?;
    let form = |f: Form| match f {
        Form::Ancilla => OracleForm::Ancilla,
        Form::Refined => OracleForm::Refined,
    };
    match which {
        AlgoCmd::Deutsch { f, form: fm } => to_json(&algo::deutsch::<f64>(&BooleanOracle::deutsch(f)?, form(*fm), None)?),
        AlgoCmd::Dj { table, form: fm } => {
            let bits: Vec<bool> = table
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(CliError::Validation(format!("truth table {table:?} is not a bit string"))),
                })
                .collect::<Result<_, _>>()?;
            if !bits.len().is_power_of_two() || bits.len() < 2 {
                return Err(CliError::Validation("truth table length must be a power of two".into()));
            }
            let f = BooleanOracle::from_table(bits.len().trailing_zeros() as usize, bits)?;
            to_json(&algo::deutsch_jozsa::<f64>(&f, form(*fm), None)?)
        }
        AlgoCmd::Grover { n, mark, iterations } => {
            let marked = mark.iter().map(|m| bits_to_index(m, *n)).collect::<Result<Vec<_>, _>>()?;
            let f = BooleanOracle::marking(*n, &marked)?;
            to_json(&algo::grover::<f64>(&f, *iterations, None)?)
        }
        AlgoCmd::Counting { mark, sweep } => {
            let marked = mark.iter().map(|m| bits_to_index(m, 1)).collect::<Result<Vec<_>, _>>()?;
            let f = BooleanOracle::marking(1, &marked)?;
            let r = algo::quantum_counting::<f64>(&f, *sweep)?;
            to_json(&json!({"algorithm": "quantum_counting", "report": r}))
        }
        AlgoCmd::Gauss { n_int, l, m_terms, tol } => {
            let a = algo::gauss_sum::<f64>(*n_int, *l, *m_terms)?;
            let factor = algo::factor_check(*n_int, *l, *m_terms, *tol)?;
            to_json(&json!({
                "algorithm": "gauss_sum",
                "N": n_int, "l": l, "M": m_terms,
                "re": a.re, "im": a.im, "abs": a.norm(),
                "factor": factor,
            }))
        }
        AlgoCmd::Zeno { t180, k } => to_json(&json!({"algorithm": "zeno", "k": k, "report": algo::zeno_run(*t180, *k)?})),
        AlgoCmd::Dense { message } => to_json(&algo::dense_coding::<f64>(message, None)?),
        AlgoCmd::Teleport { theta_deg, phi_deg, corrections } => {
            let k = Ket::<f64>::from_angles(theta_deg.to_radians(), phi_deg.to_radians())?;
            let c = match corrections {
                Correction::Coherent => Corrections::Coherent,
                Correction::PostProcessed => Corrections::PostProcessed,
            };
            to_json(&json!({"algorithm": "teleport", "report": algo::teleport(&k, c)?}))
        }
        AlgoCmd::Qec { error, q } => {
            let e = match error.as_str() {
                "none" => PhaseError::None,
                "z0" => PhaseError::Z(0),
                "z1" => PhaseError::Z(1),
                "z2" => PhaseError::Z(2),
                other => return Err(CliError::Validation(format!("unknown error {other:?}; use none, z0, z1 or z2"))),
            };
            let input = Ket::<f64>::from_angles(1.0, 0.5)?;
            let fidelity = algo::phase_flip_qec_round(&input, e)?;
            let logical = q.map(algo::phase_flip_logical_error).transpose()?;
            to_json(&json!({"algorithm": "phase_flip_qec", "error": error, "fidelity": fidelity, "q": q, "logical_error": logical}))
        }
    }
}

fn cmd_tomo(cli: &Cli, a: &TomoArgs) -> Result<String, CliError> {
    require_json(cli, "tomo")?;
    let sys = load_system(&a.system)?;
    let dev = deviation_of(&read_state(&a.state)?, &sys)?;
    let plan = match (sys.n(), a.plan) {
        (1, _) => TomographyPlan::one_spin(),
        (2, PlanKind::Full) => TomographyPlan::two_spin_full(),
        (2, PlanKind::Minimal) => TomographyPlan::two_spin_minimal(),
        (n, _) => return Err(CliError::Validation(format!("tomography covers one or two spins, system has {n}"))),
    };
    let data = plan.simulate(&dev, Complex64::new(1.0, 0.0))?;
    let (_, report) = plan.reconstruct(&data)?;
    let plain = ProductOperatorExpansion::<f64>::new(sys.n());
    let named = plain.clone().with_names(sys.labels())?;
    let coefficients: std::collections::BTreeMap<String, f64> =
        report.coefficients.into_iter().map(|(k, v)| (plain.parse_label(&k).map(|s| named.label(&s)).unwrap_or(k), v)).collect();
    to_json(&json!({"coefficients": coefficients, "residual": report.residual, "experiments": plan.experiments.len()}))
}

#[derive(Serialize)]
struct BoundsRow {
    n: usize,
    lower: Option<f64>,
    upper: Option<f64>,
    peres: Option<f64>,
    warren_exact: f64,
    warren_approx: f64,
}

fn cmd_bounds(cli: &Cli, a: &BoundsArgs) -> Result<String, CliError> {
    let hi = a.max_n.unwrap_or(a.n);
    if a.n == 0 || hi < a.n {
        return Err(CliError::Validation("need 1 <= n <= max-n".into()));
    }
    let mut rows = Vec::new();
    for n in a.n..=hi {
        let (we, wa) = warren_bound(n, a.x)?;
        let (lower, upper) = if n >= 2 { entanglement_bounds(n).map(|(l, u)| (Some(l), Some(u)))? } else { (None, None) };
        rows.push(BoundsRow { n, lower, upper, peres: (n == 2).then(peres_threshold), warren_exact: we, warren_approx: wa });
    }
    match cli.format {
        Format::Json => to_json(&json!({"x": a.x, "rows": rows})),
        Format::Csv => {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let mut s = String::from("n,lower,upper,peres,warren_exact,warren_approx\n");
            for r in &rows {
                s.push_str(&format!("{},{},{},{},{},{}\n", r.n, f(r.lower), f(r.upper), f(r.peres), r.warren_exact, r.warren_approx));
            }
            Ok(s)
        }
    }
}

fn cmd_spectrum(cli: &Cli, a: &SpectrumArgs) -> Result<String, CliError> {
    let sys = load_system(&a.system)?;
    let dev = deviation_of(&read_state(&a.state)?, &sys)?;
    let lines = observable_lines(&dev, &sys, None)?;
    if cli.format == Format::Json {
        return to_json(&json!({"lines": lines}));
    }
    let acq = Acquisition { npoints: a.npoints, dwell_s: a.dwell, t2_star_s: a.t2 };
    let (dwell, t2) = auto_acquisition(&lines, &sys, &acq);
    let fid = synthesize_fid(&lines, t2, acq.npoints, dwell)?;
    let csv = spectrum_csv(&spectrum(&fid, dwell));
    match &cli.out {
        Some(dir) => Ok(write_file(dir, "spectrum.csv", &csv)? + "\n"),
        None => Ok(csv),
    }
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<String, CliError> {
    let theta = a.theta_deg.to_radians();
    let seq = match a.sequence {
        Sequence::Naive => vec![PulseEvent::xy(theta, 0.0)],
        Sequence::Bb1 => bb1(theta, false, Bb1Placement::Before)?,
        Sequence::Corpse => corpse_default(theta)?,
    };
    let axis = match a.axis {
        SweepAxis::Length => ErrorAxis::Length,
        SweepAxis::Offset => ErrorAxis::Offset,
    };
    let rows = fidelity_sweep(&seq, axis, a.max, a.points)?;
    match cli.format {
        Format::Csv => Ok(sweep_csv(&rows)),
        Format::Json => {
            let pts: Vec<_> = rows.iter().map(|(e, f)| json!({"epsilon": e, "fidelity": f})).collect();
            to_json(&json!({"sequence": seq, "points": pts}))
        }
    }
}
