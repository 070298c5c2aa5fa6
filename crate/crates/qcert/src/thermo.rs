//! Average currents, first and second law, operating modes, efficiencies,
//! TUR ratios and the fluctuation ratio `R`, plus the end-to-end
//! certification pipeline.
//!
//! Sign conventions: heat currents are positive when energy flows *into* the
//! machine; output power is positive when delivered to the drive or to a
//! work reservoir, so the first law reads `Ẇ = Σ_r Q̇_r` over thermal baths.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::equivalents::{classical_equivalent, EquivalenceReport, VIRTUAL_WORK_BATH};
use crate::error::{QcertError, Result};
use crate::fcs::{cumulants, CurrentStats};
use crate::linalg::inf_norm;
use crate::liouvillian::{build_classical_generator, build_quantum_generator};
use crate::machine_model::{ClassicalMachineSpec, CoherenceClass, Direction, MachineSpec};
use crate::machines::Machine;
use crate::scalar::{Dd, Field, Real};
use crate::steady_state::{solve_steady, SteadyState};

/// Currents whose magnitude is below this fraction of `‖W‖∞` count as zero
/// when deciding whether a machine is at equilibrium.
pub const EQUILIBRIUM_RTOL: f64 = 1e-13;

/// Energy currents of one solved machine.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurrentsReport {
    /// Heat into the machine from every thermal bath.
    pub heat: BTreeMap<String, f64>,
    /// Energy into the machine from every work reservoir (β → 0 baths and
    /// the stochastic stand-in of a drive).
    pub work_in: BTreeMap<String, f64>,
    /// Energy into the machine from a coherent drive.
    pub drive_in: f64,
    /// Output power, `−(drive_in + Σ work_in)`.
    pub power: f64,
    /// `−Σ_r β_r Q̇_r` over thermal baths.
    pub entropy_production: f64,
    /// `|Σ_r Q̇_r − Ẇ|` relative to the gross energy throughput.
    pub first_law_residual: f64,
}

fn rho_entry<T: Real>(s: &SteadyState<T>, a: usize, b: usize) -> T {
    // Real part of ρ_ab.
    if a == b {
        return s.population(a);
    }
    match s.basis.coherent_pair() {
        Some((u, v)) if (a == u && b == v) || (a == v && b == u) => s.coherence().re,
        _ => T::zero(),
    }
}

/// `Tr[H₀ D_r(ρ)]` for every bath, from the jump operators of the machine description.
///
/// For a collective operator `L = Σ_e √r_e |to_e⟩⟨from_e|` this is
/// `Σ_{e,e′: to_e = to_e′} √(r_e r_e′) (ε_to − ε_{from_e}) Re ρ_{from_e, from_e′}`,
/// which contains the usual branch fluxes and, for interfering branches,
/// the coherence contribution.
pub fn quantum_bath_currents<T: Real>(
    spec: &MachineSpec,
    steady: &SteadyState<T>,
) -> BTreeMap<String, T> {
    let mut out: BTreeMap<String, T> = spec
        .baths
        .iter()
        .map(|b| (b.id.clone(), T::zero()))
        .collect();
    for jump in &spec.jumps {
        let mut total = T::zero();
        for dir in [Direction::Down, Direction::Up] {
            let br: Vec<_> = jump
                .branches
                .iter()
                .filter(|b| spec.direction(b) == dir && b.rate > 0.0)
                .collect();
            for a in &br {
                for b in &br {
                    if a.to != b.to {
                        continue;
                    }
                    let amp = if std::ptr::eq(*a, *b) {
                        T::from_f64(a.rate)
                    } else {
                        (T::from_f64(a.rate) * T::from_f64(b.rate)).sqrt()
                    };
                    let de = T::from_f64(spec.energy(a.to)) - T::from_f64(spec.energy(a.from));
                    total = total + amp * de * rho_entry(steady, a.from, b.from);
                }
            }
        }
        let e = out.entry(jump.bath.clone()).or_insert_with(T::zero);
        *e = *e + total;
    }
    out
}

/// Energy fed into the machine by the coherent drive,
/// `2g·Im ρ_uv·(ε_v − ε_u)`.
pub fn drive_power_in<T: Real>(spec: &MachineSpec, steady: &SteadyState<T>) -> T {
    match (&spec.coupling, steady.basis.coherent_pair()) {
        (Some(c), Some(_)) => {
            let flux = T::from_f64(2.0 * c.g) * steady.coherence().im;
            flux * (T::from_f64(spec.energy(c.v)) - T::from_f64(spec.energy(c.u)))
        }
        _ => T::zero(),
    }
}

/// Quanta per unit time moved by the drive from `u` to `v`, `2g·Im ρ_uv`.
pub fn drive_flux<T: Real>(spec: &MachineSpec, steady: &SteadyState<T>) -> T {
    match (&spec.coupling, steady.basis.coherent_pair()) {
        (Some(c), Some(_)) => T::from_f64(2.0 * c.g) * steady.coherence().im,
        _ => T::zero(),
    }
}

/// `⟨Ẇ⟩ = ω_d·⟨Ṅ⟩` with `ω_d = ε_u − ε_v + Δ_d` and `Ṅ` the drive flux.
pub fn power_from_drive(spec: &MachineSpec, steady: &SteadyState<Dd>) -> Result<f64> {
    let c = spec.coupling.ok_or_else(|| QcertError::WrongClass {
        expected: "hamiltonian-energetic".into(),
        found: spec.coherence_class.to_string(),
    })?;
    let omega = spec.energy(c.u) - spec.energy(c.v) + c.detuning;
    Ok(omega * drive_flux(spec, steady).to_f64())
}

fn finish_currents<T: Real>(
    baths: &[crate::machine_model::BathSpec],
    currents: BTreeMap<String, T>,
    drive_in: T,
) -> CurrentsReport {
    let mut heat = BTreeMap::new();
    let mut work_in = BTreeMap::new();
    let mut sum_heat = T::zero();
    let mut gross = drive_in.abs();
    let mut sum_work = drive_in;
    let mut sdot = T::zero();
    for (id, q) in &currents {
        gross = gross + q.abs();
        let bath = baths.iter().find(|b| &b.id == id);
        match bath {
            Some(b) if !b.work => {
                sum_heat = sum_heat + *q;
                sdot = sdot - T::from_f64(b.beta_or_zero()) * *q;
                heat.insert(id.clone(), q.to_f64());
            }
            _ => {
                sum_work = sum_work + *q;
                work_in.insert(id.clone(), q.to_f64());
            }
        }
    }
    let power = -sum_work;
    let residual = if gross.is_zero() {
        0.0
    } else {
        ((sum_heat - power).abs() / gross).to_f64()
    };
    CurrentsReport {
        heat,
        work_in,
        drive_in: drive_in.to_f64(),
        power: power.to_f64(),
        entropy_production: sdot.to_f64(),
        first_law_residual: residual,
    }
}

/// Currents of a quantum machine in its steady state.
pub fn heat_currents<T: Real>(spec: &MachineSpec, steady: &SteadyState<T>) -> CurrentsReport {
    let currents = quantum_bath_currents(spec, steady);
    finish_currents(&spec.baths, currents, drive_power_in(spec, steady))
}

/// Currents of a classical rate network in its steady state.
pub fn classical_currents<T: Real>(
    spec: &ClassicalMachineSpec,
    populations: &[T],
) -> CurrentsReport {
    let mut currents: BTreeMap<String, T> = spec
        .baths
        .iter()
        .map(|b| (b.id.clone(), T::zero()))
        .collect();
    let mut free = T::zero();
    for t in &spec.transitions {
        let de = T::from_f64(spec.energy(t.j)) - T::from_f64(spec.energy(t.i));
        let flux = T::from_f64(t.rate_ij) * populations[t.i] - T::from_f64(t.rate_ji) * populations[t.j];
        match &t.bath {
            Some(id) => {
                let e = currents.entry(id.clone()).or_insert_with(T::zero);
                *e = *e + de * flux;
            }
            None => free = free + de * flux,
        }
    }
    finish_currents(&spec.baths, currents, free)
}

/// Operating mode of a machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    HeatEngine,
    Refrigerator,
    /// Reverse operation of the absorption refrigerator: heat from the
    /// medium bath is pumped into the hot bath.
    HeatPump,
    Equilibrium,
    /// No output convention (custom machines).
    Unspecified,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::HeatEngine => "heat-engine",
            Mode::Refrigerator => "refrigerator",
            Mode::HeatPump => "heat-pump",
            Mode::Equilibrium => "equilibrium",
            Mode::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_unit_ratio(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QcertError::Domain(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

/// `η_C = 1 − β_h/β_c`.
pub fn carnot(beta_c: f64, beta_h: f64) -> f64 {
    1.0 - beta_h / beta_c
}

/// `η_fr = β_h/(β_c − β_h)`.
pub fn fridge_bound(beta_c: f64, beta_h: f64) -> f64 {
    beta_h / (beta_c - beta_h)
}

/// `η_abs = (β_m − β_h)/(β_c − β_m)`.
pub fn absorption_bound(beta_c: f64, beta_m: f64, beta_h: f64) -> f64 {
    (beta_m - beta_h) / (beta_c - beta_m)
}

/// Mode from the operating rules of the built-in machines.
pub fn classify_mode(machine: &Machine) -> Result<Mode> {
    match machine {
        Machine::Amplifier(p) => {
            let x = p.omega_d() / p.eps2;
            check_unit_ratio("omega_d/eps2", x)?;
            let eta = carnot(p.beta_c, p.beta_h);
            Ok(if x == eta || p.beta_c == p.beta_h {
                Mode::Equilibrium
            } else if x < eta {
                Mode::HeatEngine
            } else {
                Mode::Refrigerator
            })
        }
        Machine::Fridge(p) => {
            let x = p.eps1 / p.eps3();
            let (nc, nm, nh) = p.nbars()?;
            // Cooling iff n̄c·n̄h > n̄m(n̄c + n̄h + 1), i.e. ε1/ε3 < η_abs.
            let lhs = nc * nh;
            let rhs = nm * (nc + nh + 1.0);
            if !(x > 0.0) {
                return Err(QcertError::Domain("eps1/eps3 must be positive".into()));
            }
            Ok(if lhs == rhs || (p.beta_c == p.beta_m && p.beta_m == p.beta_h) {
                Mode::Equilibrium
            } else if lhs > rhs {
                Mode::Refrigerator
            } else {
                Mode::HeatPump
            })
        }
        Machine::Nic(p) => {
            let x = p.eps1 / p.eps2;
            check_unit_ratio("eps1/eps2", x)?;
            let eta = carnot(p.beta_c, p.beta_h);
            Ok(if x == eta || p.beta_c == p.beta_h {
                Mode::Equilibrium
            } else if x < eta {
                Mode::HeatEngine
            } else {
                Mode::Refrigerator
            })
        }
        Machine::Generic4(_) => Ok(Mode::Unspecified),
    }
}

/// Useful output current, efficiency and its bound for a mode.  The
/// efficiency is `None` when the output is not positive (the machine does
/// not operate as the mode says, e.g. a noise-dominated heater).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Output {
    pub current: f64,
    pub efficiency: Option<f64>,
    pub bound: Option<f64>,
}

pub fn output(machine: &Machine, mode: Mode, c: &CurrentsReport) -> Output {
    let q = |id: &str| c.heat.get(id).copied().unwrap_or(0.0);
    let ratio = |num: f64, den: f64| {
        if num > 0.0 && den > 0.0 {
            Some(num / den)
        } else {
            None
        }
    };
    let (current, efficiency, bound) = match (machine, mode) {
        (Machine::Amplifier(p), Mode::HeatEngine) | (Machine::Amplifier(p), Mode::Equilibrium) => {
            (c.power, ratio(c.power, q("h")), Some(carnot(p.beta_c, p.beta_h)))
        }
        (Machine::Amplifier(p), _) => (q("c"), ratio(q("c"), -c.power), Some(fridge_bound(p.beta_c, p.beta_h))),
        (Machine::Fridge(p), Mode::HeatPump) => (
            -q("h"),
            ratio(-q("h"), q("m")),
            Some((p.beta_c - p.beta_m) / (p.beta_c - p.beta_h)),
        ),
        (Machine::Fridge(p), _) => (
            q("c"),
            ratio(q("c"), q("h")),
            Some(absorption_bound(p.beta_c, p.beta_m, p.beta_h)),
        ),
        (Machine::Nic(p), Mode::Refrigerator) => {
            (q("c"), ratio(q("c"), -c.power), Some(fridge_bound(p.beta_c, p.beta_h)))
        }
        (Machine::Nic(p), _) => (c.power, ratio(c.power, q("h")), Some(carnot(p.beta_c, p.beta_h))),
        (Machine::Generic4(_), _) => (c.power, None, None),
    };
    Output {
        current,
        efficiency,
        bound,
    }
}

/// `R = (Var_cl − Var_q)/Var_q`.
pub fn fluctuation_ratio(var_classical: f64, var_quantum: f64) -> Result<f64> {
    if !(var_quantum > 0.0) {
        return Err(QcertError::Domain(format!(
            "quantum variance must be positive, got {var_quantum:e}"
        )));
    }
    Ok((var_classical - var_quantum) / var_quantum)
}

/// `Q = Ṡ·Var[J]/⟨J⟩²`.  For tightly coupled machines every current is a
/// fixed multiple of the counted quanta, so `Var[J]/⟨J⟩² = c₂/c₁²`.
pub fn tur_ratio(entropy_production: f64, c1: f64, c2: f64) -> Result<f64> {
    if c1 == 0.0 {
        return Err(QcertError::Domain("TUR ratio undefined at zero current".into()));
    }
    Ok(entropy_production * c2 / (c1 * c1))
}

/// Per-current variances under tight coupling: `Var[Q̇_r] = Δε_r²·c₂` for
/// every gap, and `Var[Ẇ] = ω_d²·c₂` when a drive frequency is given.
pub fn variance_propagation(c2: f64, gaps: &[f64], omega_d: Option<f64>) -> (Vec<f64>, Option<f64>) {
    (
        gaps.iter().map(|g| g * g * c2).collect(),
        omega_d.map(|w| w * w * c2),
    )
}

/// Everything the certification produces for one machine.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationReport {
    /// The built-in machine, when the report came from one.
    pub machine: Option<Machine>,
    pub coherence_class: CoherenceClass,
    pub mode: Mode,
    pub monitored_bath: String,
    pub quantum: CurrentsReport,
    pub classical: Option<CurrentsReport>,
    pub stats_quantum: CurrentStats,
    pub stats_classical: Option<CurrentStats>,
    /// Output current of the mode (energy per time).
    pub output_current: f64,
    pub efficiency: Option<f64>,
    pub efficiency_bound: Option<f64>,
    pub fluctuation_ratio: Option<f64>,
    pub tur_ratio: Option<f64>,
    pub tur_ratio_classical: Option<f64>,
    pub feasible: bool,
    pub violated_constraints: Vec<String>,
    pub virtual_rate: f64,
    pub at_equilibrium: bool,
    pub trace_error: f64,
    pub min_population: f64,
    /// Largest deviation between quantum and classical populations.
    pub population_mismatch: Option<f64>,
    pub warnings: Vec<String>,
}

impl CertificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Intermediate results of a solved classical equivalent.
struct ClassicalSolution {
    stats: CurrentStats,
    currents: CurrentsReport,
    populations: Vec<f64>,
}

fn solve_classical(eq: &EquivalenceReport, monitored: &str) -> Result<ClassicalSolution> {
    let w = build_classical_generator::<Dd>(&eq.equivalent)?.monitor_bath(monitored)?;
    let s = solve_steady(&w)?;
    let stats = cumulants(&w)?;
    let pops = s.populations();
    Ok(ClassicalSolution {
        stats,
        currents: classical_currents(&eq.equivalent, &pops),
        populations: pops.iter().map(|p| p.to_f64()).collect(),
    })
}

/// Full pipeline: validate, solve, count, build and solve the classical
/// equivalent, and evaluate every figure of merit.
pub fn certify(machine: &Machine) -> Result<CertificationReport> {
    let spec = machine.spec()?;
    let mode = classify_mode(machine)?;
    certify_parts(&spec, Some(machine), machine.monitored_bath(), mode)
}

/// The pipeline for an arbitrary machine description, counting the quanta
/// exchanged with `monitored`.  No operating mode is assigned; the output
/// current is the power.
pub fn certify_spec(spec: &MachineSpec, monitored: &str) -> Result<CertificationReport> {
    certify_parts(spec, None, monitored, Mode::Unspecified)
}

fn certify_parts(
    spec: &MachineSpec,
    machine: Option<&Machine>,
    monitored: &str,
    mode: Mode,
) -> Result<CertificationReport> {
    let warnings = spec.validate().into_result()?;

    let wq = build_quantum_generator::<Dd>(&spec)?.monitor_bath(monitored)?;
    let steady = solve_steady(&wq)?;
    let stats_q = cumulants(&wq)?;
    let quantum = heat_currents(spec, &steady);
    let scale = inf_norm(&wq.value(), wq.dim()).to_f64();

    let eq = classical_equivalent(spec)?;
    let classical = if eq.feasible {
        Some(solve_classical(&eq, monitored)?)
    } else {
        None
    };

    let out = match machine {
        Some(m) => output(m, mode, &quantum),
        None => Output { current: quantum.power, efficiency: None, bound: None },
    };
    let at_equilibrium = mode == Mode::Equilibrium || stats_q.c1.abs() < EQUILIBRIUM_RTOL * scale;
    let (r, q, q_cl) = if at_equilibrium {
        (None, None, None)
    } else {
        let q = tur_ratio(quantum.entropy_production, stats_q.c1, stats_q.c2).ok();
        match &classical {
            Some(c) => (
                fluctuation_ratio(c.stats.c2, stats_q.c2).ok(),
                q,
                tur_ratio(c.currents.entropy_production, c.stats.c1, c.stats.c2).ok(),
            ),
            None => (None, q, None),
        }
    };
    let populations = steady.populations_f64();
    let mismatch = classical.as_ref().map(|c| {
        populations
            .iter()
            .zip(&c.populations)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    Ok(CertificationReport {
        machine: machine.copied(),
        coherence_class: spec.coherence_class,
        mode,
        monitored_bath: monitored.to_string(),
        quantum,
        stats_quantum: stats_q,
        stats_classical: classical.as_ref().map(|c| c.stats),
        classical: classical.map(|c| c.currents),
        output_current: out.current,
        efficiency: if at_equilibrium { None } else { out.efficiency },
        efficiency_bound: out.bound,
        fluctuation_ratio: r,
        tur_ratio: q,
        tur_ratio_classical: q_cl,
        feasible: eq.feasible,
        violated_constraints: eq.violated_constraints,
        virtual_rate: eq.virtual_rate,
        at_equilibrium,
        trace_error: steady.trace_error(),
        min_population: steady.min_population(),
        population_mismatch: mismatch,
        warnings,
    })
}

/// Whether a bath id denotes the stochastic stand-in of a drive.
pub fn is_virtual_bath(id: &str) -> bool {
    id == VIRTUAL_WORK_BATH
}
