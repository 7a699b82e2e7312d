//! Pulse-program files (`"schema": "spinforge/1"`): parsing, validation,
//! execution and embedded expectations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use spinforge::events::{Event, Simulator};
use spinforge::gates::{standard_gate, GateName, GateSpec};
use spinforge::grape::unitary_fidelity;
use spinforge::prep::{pseudo_pure, PseudoPureSpec};
use spinforge::readout::{observable_lines, spectrum, spectrum_csv, synthesize_fid, SpectrumLine, TomographyPlan, TomographyReport};
use spinforge::spin::evolution::equal_up_to_global_phase;
use spinforge::spin::{thermal_state, thermal_state_linear, DensityMatrix, Ket, ProductOperatorExpansion, SpinSystem};
use spinforge::Mat;

use crate::CliError;

pub const SCHEMA: &str = "spinforge/1";

/// Spin system given inline or as a path relative to the program file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Path(String),
    Inline(SpinSystem<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSource {
    /// Boltzmann state in the high-temperature limit.
    Thermal,
    /// Thermal state with only the single-spin `Iz` terms.
    ThermalLinear,
    PseudoPure {
        epsilon: f64,
        #[serde(default)]
        index: usize,
    },
    /// Pure state from `[re, im]` amplitudes.
    Ket { amps: Vec<[f64; 2]> },
    /// Traceless operator evolved linearly, by product-operator label.
    Operator { terms: BTreeMap<String, f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProgramEvent {
    Pulse {
        spins: Vec<usize>,
        angle_deg: f64,
        #[serde(default)]
        phase_deg: f64,
        #[serde(default)]
        duration_s: f64,
    },
    Delay {
        duration_s: f64,
    },
    FrameZ {
        spin: usize,
        angle_deg: f64,
    },
    Crush {
        #[serde(default = "yes")]
        preserve_zero_quantum: bool,
        /// Signed gradient area in arbitrary units.
        #[serde(default = "one")]
        area: f64,
        /// Accept an area that could refocus an earlier crush.
        #[serde(default)]
        allow_echo: bool,
    },
    Measure {
        #[serde(default)]
        spins: Option<Vec<usize>>,
    },
    Gate {
        name: String,
        targets: Vec<usize>,
        #[serde(default)]
        angle_deg: Option<f64>,
        #[serde(default)]
        phase_deg: Option<f64>,
    },
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl ProgramEvent {
    fn kind(&self) -> &'static str {
        match self {
            ProgramEvent::Pulse { .. } => "pulse",
            ProgramEvent::Delay { .. } => "delay",
            ProgramEvent::FrameZ { .. } => "frame_z",
            ProgramEvent::Crush { .. } => "crush",
            ProgramEvent::Measure { .. } => "measure",
            ProgramEvent::Gate { .. } => "gate",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acquisition {
    #[serde(default = "default_points")]
    pub npoints: usize,
    #[serde(default)]
    pub dwell_s: Option<f64>,
    #[serde(default)]
    pub t2_star_s: Option<f64>,
}

fn default_points() -> usize {
    1024
}

impl Default for Acquisition {
    fn default() -> Self {
        Acquisition { npoints: default_points(), dwell_s: None, t2_star_s: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorExpect {
    pub gate: String,
    pub targets: Vec<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    /// Expected final deviation by label; unlisted labels must vanish.
    #[serde(default)]
    pub deviation: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub propagator: Option<PropagatorExpect>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseProgram {
    pub schema: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub system: Option<SystemRef>,
    #[serde(default)]
    pub initial_state: Option<StateSource>,
    pub events: Vec<ProgramEvent>,
    #[serde(default)]
    pub acquisition: Option<Acquisition>,
    #[serde(default)]
    pub tomography: bool,
    #[serde(default)]
    pub expect: Option<Expect>,
}

fn parse_error(origin: &str, e: serde_json::Error) -> CliError {
    CliError::Validation(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
}

impl PulseProgram {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let p: PulseProgram = serde_json::from_str(text).map_err(|e| parse_error(origin, e))?;
        if p.schema != SCHEMA {
            return Err(CliError::Validation(format!("{origin}: schema {:?}, expected {SCHEMA:?}", p.schema)));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Resolve the spin system: an explicit override, then the program's own
    /// reference (paths relative to `base`).
    pub fn resolve_system(&self, base: Option<&Path>, over: Option<SpinSystem<f64>>) -> Result<SpinSystem<f64>, CliError> {
        if let Some(s) = over {
            return Ok(s);
        }
        match &self.system {
            Some(SystemRef::Inline(s)) => {
                s.validate()?;
                Ok(s.clone())
            }
            Some(SystemRef::Path(p)) => {
                let path = base.map(|b| b.join(p)).unwrap_or_else(|| PathBuf::from(p));
                load_system(&path)
            }
            None => Err(CliError::Validation("no spin system: pass --system or set \"system\" in the program".into())),
        }
    }

    /// Check event times, spin indices and gradient echoes, and convert to
    /// simulator events (angles to radians).
    pub fn compile(&self, sys: &SpinSystem<f64>) -> Result<Vec<Event<f64>>, CliError> {
        let n = sys.n();
        let mut out = Vec::with_capacity(self.events.len());
        let mut crushes: Vec<(usize, f64)> = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            let bad = |msg: String| CliError::Validation(format!("event {i} ({}): {msg}", ev.kind()));
            let check = |spins: &[usize]| match spins.iter().find(|&&k| k >= n) {
                Some(k) => Err(bad(format!("spin {k} does not exist in a {n}-spin system"))),
                None => Ok(()),
            };
            let time = |t: f64| {
                if t.is_finite() && t >= 0.0 {
                    Ok(t)
                } else {
                    Err(bad(format!("time {t} must be non-negative")))
                }
            };
            let e = match ev {
                ProgramEvent::Pulse { spins, angle_deg, phase_deg, duration_s } => {
                    check(spins)?;
                    if spins.is_empty() {
                        return Err(bad("no spins listed".into()));
                    }
                    Event::Pulse {
                        spins: spins.clone(),
                        angle: angle_deg.to_radians(),
                        phase: phase_deg.to_radians(),
                        duration_s: time(*duration_s)?,
                    }
                }
                ProgramEvent::Delay { duration_s } => Event::Delay { duration_s: time(*duration_s)? },
                ProgramEvent::FrameZ { spin, angle_deg } => {
                    check(&[*spin])?;
                    Event::FrameZ { spin: *spin, angle: angle_deg.to_radians() }
                }
                ProgramEvent::Crush { preserve_zero_quantum, area, allow_echo } => {
                    if !area.is_finite() || *area == 0.0 {
                        return Err(bad("gradient area must be finite and non-zero".into()));
                    }
                    if !allow_echo {
                        let tol = 1e-9 * area.abs();
                        if let Some((j, a)) = crushes.iter().find(|(_, a)| (a.abs() - area.abs()).abs() <= tol) {
                            return Err(bad(format!(
                                "area {area} can refocus the crush at event {j} (area {a}); use a different area or set allow_echo"
                            )));
                        }
                    }
                    crushes.push((i, *area));
                    Event::Crush { preserve_zero_quantum: *preserve_zero_quantum, area: *area }
                }
                ProgramEvent::Measure { spins } => {
                    if let Some(s) = spins {
                        check(s)?;
                    }
                    Event::Measure { spins: spins.clone() }
                }
                ProgramEvent::Gate { name, targets, angle_deg, phase_deg } => {
                    check(targets)?;
                    let g: GateName = name.parse().map_err(|e: spinforge::Error| bad(e.to_string()))?;
                    let spec = GateSpec {
                        name: g,
                        targets: targets.clone(),
                        control_state: None,
                        angle: angle_deg.map(f64::to_radians),
                        phase: phase_deg.map(f64::to_radians),
                    };
                    standard_gate(&spec, n).map_err(|e| bad(e.to_string()))?;
                    Event::Gate { gate: spec }
                }
            };
            out.push(e);
        }
        Ok(out)
    }
}

pub fn load_system(path: &Path) -> Result<SpinSystem<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let sys: SpinSystem<f64> = serde_json::from_str(&text).map_err(|e| parse_error(&path.display().to_string(), e))?;
    sys.validate()?;
    Ok(sys)
}

/// Initial condition: a density matrix or a bare operator.
pub enum Initial {
    State(DensityMatrix<f64>),
    Operator(Mat<f64>),
}

impl StateSource {
    pub fn build(&self, sys: &SpinSystem<f64>) -> Result<Initial, CliError> {
        let n = sys.n();
        Ok(match self {
            StateSource::Thermal => Initial::State(thermal_state(sys)),
            StateSource::ThermalLinear => Initial::State(thermal_state_linear(sys)),
            StateSource::PseudoPure { epsilon, index } => {
                if *index >= 1 << n {
                    return Err(CliError::Validation(format!("basis index {index} out of range for {n} spins")));
                }
                Initial::State(pseudo_pure(&PseudoPureSpec { epsilon: *epsilon, target: Ket::basis(n, *index) })?)
            }
            StateSource::Ket { amps } => {
                let k = Ket::new(amps.iter().map(|a| Complex64::new(a[0], a[1])).collect())?;
                if k.num_spins() != n {
                    return Err(CliError::Validation("ket does not match the spin system".into()));
                }
                Initial::State(DensityMatrix::from_ket(&k))
            }
            StateSource::Operator { terms } => {
                let mut e = ProductOperatorExpansion::new(n).with_names(sys.labels())?;
                for (label, v) in terms {
                    e.set(label, *v)?;
                }
                Initial::Operator(e.assemble())
            }
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagatorCheck {
    pub gate: String,
    pub targets: Vec<usize>,
    pub fidelity: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpectOutcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Traceless part of the final state, by product-operator label.
    pub final_deviation: BTreeMap<String, f64>,
    pub lines: Vec<SpectrumLine<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagator_check: Option<PropagatorCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographyReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<ExpectOutcome>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub state: Option<StateSource>,
    pub out_dir: Option<PathBuf>,
}

/// Sampling for the display spectrum: the dwell puts every line inside
/// 80% of the Nyquist band.
pub fn auto_acquisition(lines: &[SpectrumLine<f64>], sys: &SpinSystem<f64>, acq: &Acquisition) -> (f64, f64) {
    let fmax = lines.iter().map(|l| l.frequency_hz.abs()).fold(0.0, f64::max);
    let dwell = acq.dwell_s.unwrap_or(if fmax > 0.0 { 0.4 / fmax } else { 1e-3 });
    let t2 = acq.t2_star_s.unwrap_or_else(|| sys.spins.iter().map(|s| s.t2_s).fold(f64::INFINITY, f64::min).min(10.0));
    (dwell, t2)
}

pub fn run(program: &PulseProgram, sys: &SpinSystem<f64>, opts: &RunOptions) -> Result<RunReport, CliError> {
    let events = program.compile(sys)?;
    let sim = Simulator::new(sys);
    let source = opts.state.clone().or_else(|| program.initial_state.clone()).unwrap_or(StateSource::Thermal);
    let deviation = match source.build(sys)? {
        Initial::State(rho) => sim.run(&rho, &events)?.deviation().m,
        Initial::Operator(op) => sim.run_operator(&op, &events)?,
    };
    let expansion = ProductOperatorExpansion::expand(&deviation)?.with_names(sys.labels())?.traceless();
    let final_deviation: BTreeMap<String, f64> = expansion.labelled().into_iter().filter(|(_, v)| v.abs() > 1e-15).collect();
    let lines = observable_lines(&deviation, sys, None)?;

    let mut spectrum_path = None;
    if let Some(dir) = &opts.out_dir {
        let acq = program.acquisition.clone().unwrap_or_default();
        let (dwell, t2) = auto_acquisition(&lines, sys, &acq);
        let fid = synthesize_fid(&lines, t2, acq.npoints, dwell)?;
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        let path = dir.join("spectrum.csv");
        std::fs::write(&path, spectrum_csv(&spectrum(&fid, dwell))).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        spectrum_path = Some(path.display().to_string());
    }

    let propagator_check = match program.expect.as_ref().and_then(|e| e.propagator.as_ref()) {
        Some(p) => {
            if events.iter().any(|e| !e.is_unitary()) {
                return Err(CliError::Validation("propagator check needs a program without crush or measure events".into()));
            }
            let g: GateName = p.gate.parse()?;
            let want = standard_gate(&GateSpec::new(g, &p.targets), sys.n())?;
            let got = sim.propagator(&events)?;
            Some(PropagatorCheck {
                gate: p.gate.clone(),
                targets: p.targets.clone(),
                fidelity: unitary_fidelity(&got, &want),
                passed: equal_up_to_global_phase(&got, &want, p.tol),
            })
        }
        None => None,
    };

    let tomography = if program.tomography {
        let plan = match sys.n() {
            1 => TomographyPlan::one_spin(),
            2 => TomographyPlan::two_spin_full(),
            n => return Err(CliError::Validation(format!("tomography covers one or two spins, system has {n}"))),
        };
        let data = plan.simulate(&deviation, Complex64::new(1.0, 0.0))?;
        let (_, mut report) = plan.reconstruct(&data)?;
        let plain = ProductOperatorExpansion::<f64>::new(sys.n());
        let names = plain.clone().with_names(sys.labels())?;
        report.coefficients =
            report.coefficients.into_iter().map(|(k, v)| (plain.parse_label(&k).map(|s| names.label(&s)).unwrap_or(k), v)).collect();
        Some(report)
    } else {
        None
    };

    let expect = program.expect.as_ref().map(|e| {
        let mut failures = Vec::new();
        if let Some(want) = &e.deviation {
            for (label, v) in want {
                let got = expansion.get(label);
                if (got - v).abs() > e.tol {
                    failures.push(format!("{label}: expected {v}, got {got}"));
                }
            }
            for (label, v) in &final_deviation {
                if !want.contains_key(label) && v.abs() > e.tol {
                    failures.push(format!("{label}: expected 0, got {v}"));
                }
            }
        }
        if let Some(p) = &propagator_check {
            if !p.passed {
                failures.push(format!("propagator differs from {} (fidelity {})", p.gate, p.fidelity));
            }
        }
        ExpectOutcome { passed: failures.is_empty(), failures }
    });

    Ok(RunReport {
        schema: SCHEMA,
        name: program.name.clone(),
        final_deviation,
        lines,
        spectrum_csv: spectrum_path,
        propagator_check,
        tomography,
        expect,
    })
}
