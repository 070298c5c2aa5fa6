//! Trajectory oracles for the counting statistics.
//!
//! Two independent samplers produce `(c1, c2)` estimates with error bars
//! for one monitored bath:
//!
//! * [`gillespie`] simulates a classical rate network jump by jump;
//! * [`quantum_jump_unravel`] runs a Monte-Carlo wave-function unraveling
//!   of the quantum master equation, with the Lindblad branches as jump
//!   channels.
//!
//! Both estimate the cumulants by batch means: after a burn-in, the run is
//! cut into `B` equal-time batches of length τ, and with `Nₖ` the net count
//! in batch `k`,
//!
//! ```text
//! c1 ≈ mean(Nₖ)/τ,   c2 ≈ var(Nₖ)/τ,
//! σ(c1) = sqrt(var(Nₖ)/B)/τ,
//! σ(c2) = sqrt((m₄ − var(Nₖ)²·(B−3)/(B−1))/B)/τ,
//! ```
//!
//! with `m₄` the fourth central moment of the batch counts.
//!
//! Batches must be much longer than the relaxation time of the machine;
//! [`suggested_duration`] picks the run length from the spectral gap.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equivalents::classical_equivalent;
use crate::error::{QcertError, Result};
use crate::fcs::{cumulants, CurrentStats};
use crate::liouvillian::{build_classical_generator, build_quantum_generator, GeneratorMatrix};
use crate::machine_model::{ClassicalMachineSpec, Direction, MachineSpec};
use crate::machines::Machine;
use crate::scalar::{Dd, Field};
use crate::steady_state::solve_steady;

/// Name of the pseudo-random generator, recorded with every estimate.
pub const RNG_NAME: &str = "ChaCha8Rng";
/// Batches per run. Error bars come from the spread between batches, so
/// few batches make them noisy and skew the variance estimate.
pub const DEFAULT_BATCHES: usize = 128;

/// Expected number of jumps a verification run collects at least.
pub const MIN_JUMPS: f64 = 2e5;

/// Bisection depth below the coarse step when locating a jump time.
const BISECTION_LEVELS: usize = 40;
/// Coarse steps without crossing the jump threshold before the no-jump
/// evolution is declared stuck in a dark subspace.
const MAX_IDLE_STEPS: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McConfig {
    /// Measured time, after burn-in.
    pub duration: f64,
    pub burn_in: f64,
    pub batches: usize,
    pub seed: u64,
}

impl McConfig {
    /// `B = 128` batches and a burn-in of one batch length.
    pub fn new(duration: f64, seed: u64) -> Self {
        McConfig {
            duration,
            burn_in: duration / DEFAULT_BATCHES as f64,
            batches: DEFAULT_BATCHES,
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(QcertError::Domain(format!(
                "trajectory duration must be positive, got {}",
                self.duration
            )));
        }
        if self.batches < 2 {
            return Err(QcertError::Domain("need at least two batches".into()));
        }
        if !(self.burn_in >= 0.0) {
            return Err(QcertError::Domain("burn-in must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub c1: f64,
    pub c2: f64,
    pub c1_err: f64,
    pub c2_err: f64,
    pub duration: f64,
    pub batches: usize,
    /// All jumps after burn-in, counted or not.
    pub jumps: u64,
    pub seed: u64,
    pub rng: &'static str,
}

impl TrajectoryStats {
    /// Distance of `c1`, `c2` from reference values in units of the error
    /// bars.  A zero error bar with an exact match counts as zero distance.
    pub fn z_scores(&self, reference: &CurrentStats) -> (f64, f64) {
        let z = |est: f64, err: f64, want: f64| {
            let d = (est - want).abs();
            if d == 0.0 {
                0.0
            } else {
                d / err
            }
        };
        (
            z(self.c1, self.c1_err, reference.c1),
            z(self.c2, self.c2_err, reference.c2),
        )
    }
}

/// Per-batch net counts.
struct Batches {
    start: f64,
    tau: f64,
    counts: Vec<f64>,
    jumps: u64,
}

impl Batches {
    fn new(cfg: &McConfig) -> Self {
        Batches {
            start: cfg.burn_in,
            tau: cfg.duration / cfg.batches as f64,
            counts: vec![0.0; cfg.batches],
            jumps: 0,
        }
    }

    fn end(&self) -> f64 {
        self.start + self.tau * self.counts.len() as f64
    }

    fn record(&mut self, t: f64, nu: i32) {
        if t < self.start {
            return;
        }
        let k = ((t - self.start) / self.tau) as usize;
        if k < self.counts.len() {
            self.jumps += 1;
            self.counts[k] += nu as f64;
        }
    }

    fn finish(self, cfg: &McConfig) -> TrajectoryStats {
        let b = self.counts.len() as f64;
        let mean = self.counts.iter().sum::<f64>() / b;
        let var = self.counts.iter().map(|n| (n - mean).powi(2)).sum::<f64>() / (b - 1.0);
        let c2 = var / self.tau;
        // Standard error of the sample variance from the batch fourth
        // moment.  Batch counts with few jumps are far from Gaussian, and
        // the Gaussian value var·√(2/(B−1)) then understates the error.
        let m4 = self.counts.iter().map(|n| (n - mean).powi(4)).sum::<f64>() / b;
        let var_of_var = ((m4 - var * var * (b - 3.0) / (b - 1.0)) / b).max(0.0);
        TrajectoryStats {
            c1: mean / self.tau,
            c2,
            c1_err: (var / b).sqrt() / self.tau,
            c2_err: var_of_var.sqrt() / self.tau,
            duration: cfg.duration,
            batches: self.counts.len(),
            jumps: self.jumps,
            seed: cfg.seed,
            rng: RNG_NAME,
        }
    }
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // 1 − u lies in (0, 1]
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Exact-jump simulation of a rate network, counting the net quanta
/// absorbed from `bath` (upward `+1`, downward `−1`).
pub fn gillespie(spec: &ClassicalMachineSpec, bath: &str, cfg: &McConfig) -> Result<TrajectoryStats> {
    spec.validate().into_result()?;
    cfg.check()?;
    let n = spec.n_levels();
    // Outgoing moves per level: (to, rate, counting sign).
    let mut moves: Vec<Vec<(usize, f64, i32)>> = vec![Vec::new(); n];
    for t in &spec.transitions {
        for (from, to, rate) in [(t.i, t.j, t.rate_ij), (t.j, t.i, t.rate_ji)] {
            if rate <= 0.0 {
                continue;
            }
            let nu = match t.bath.as_deref() {
                Some(b) if b == bath => {
                    if spec.energy(to) > spec.energy(from) {
                        1
                    } else {
                        -1
                    }
                }
                _ => 0,
            };
            moves[from].push((to, rate, nu));
        }
    }
    let escape: Vec<f64> = moves.iter().map(|m| m.iter().map(|x| x.1).sum()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = Batches::new(cfg);
    let end = acc.end();
    let mut state = 0;
    let mut t = 0.0;
    loop {
        if escape[state] <= 0.0 {
            return Err(QcertError::Absorbing(state));
        }
        t += exponential(&mut rng, escape[state]);
        if t >= end {
            break;
        }
        let mut pick = rng.random::<f64>() * escape[state];
        let mut chosen = moves[state].len() - 1;
        for (k, m) in moves[state].iter().enumerate() {
            if pick < m.1 {
                chosen = k;
                break;
            }
            pick -= m.1;
        }
        let (to, _, nu) = moves[state][chosen];
        acc.record(t, nu);
        state = to;
    }
    Ok(acc.finish(cfg))
}

/// A Lindblad jump operator as a dense matrix plus its counting sign.
struct Channel {
    op: DMatrix<Complex64>,
    nu: i32,
}

/// Monte-Carlo wave-function unraveling of a quantum machine in the
/// rotating frame, counting the net quanta absorbed from `bath`.
///
/// The no-jump evolution `exp(−iH_eff t)` with
/// `H_eff = V − (i/2) Σ L†L` is applied through precomputed exact
/// propagators.  The squared norm decreases monotonically, so the jump time
/// (where it falls below a uniform threshold) is found by stepping with a
/// coarse propagator and bisecting with its halvings.
pub fn quantum_jump_unravel(spec: &MachineSpec, bath: &str, cfg: &McConfig) -> Result<TrajectoryStats> {
    spec.validate().into_result()?;
    cfg.check()?;
    let n = spec.n_levels();
    let zero = Complex64::new(0.0, 0.0);
    let mut h = DMatrix::from_element(n, n, zero);
    if let Some(c) = &spec.coupling {
        h[(c.u, c.u)] -= Complex64::new(c.detuning, 0.0);
        h[(c.u, c.v)] += Complex64::new(c.g, 0.0);
        h[(c.v, c.u)] += Complex64::new(c.g, 0.0);
    }
    let mut channels = Vec::new();
    for jump in &spec.jumps {
        for dir in [Direction::Up, Direction::Down] {
            let mut op = DMatrix::from_element(n, n, zero);
            let mut any = false;
            for b in jump.branches.iter().filter(|b| b.rate > 0.0 && spec.direction(b) == dir) {
                op[(b.to, b.from)] += Complex64::new(b.rate.sqrt(), 0.0);
                any = true;
            }
            if any {
                let nu = if jump.bath == bath { dir.counting_sign() } else { 0 };
                channels.push(Channel { op, nu });
            }
        }
    }
    let mut decay = DMatrix::from_element(n, n, zero);
    for c in &channels {
        decay += c.op.adjoint() * &c.op;
    }
    let max_decay = (0..n).map(|i| decay[(i, i)].re).fold(0.0, f64::max);
    if max_decay <= 0.0 {
        return Err(QcertError::Conditioning("machine has no jump channels".into()));
    }
    let h_eff = h - decay * Complex64::new(0.0, 0.5);
    let minus_i = Complex64::new(0.0, -1.0);
    // props[k] = exp(−iH_eff·dt/2ᵏ)
    let dt = 1.0 / max_decay;
    let props: Vec<DMatrix<Complex64>> = (0..=BISECTION_LEVELS)
        .map(|k| (&h_eff * (minus_i * dt / 2f64.powi(k as i32))).exp())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = Batches::new(cfg);
    let end = acc.end();
    let mut psi = DVector::from_element(n, zero);
    psi[0] = Complex64::new(1.0, 0.0);
    let mut t = 0.0;
    'run: loop {
        let threshold = 1.0 - rng.random::<f64>();
        let mut idle = 0u64;
        loop {
            let next = &props[0] * &psi;
            if next.norm_squared() < threshold {
                break;
            }
            psi = next;
            t += dt;
            if t >= end {
                break 'run;
            }
            idle += 1;
            if idle > MAX_IDLE_STEPS {
                return Err(QcertError::Simulation(format!(
                    "no-jump evolution stalled at t = {t:e} (dark subspace)"
                )));
            }
        }
        for (k, p) in props.iter().enumerate().skip(1) {
            let next = p * &psi;
            if next.norm_squared() >= threshold {
                psi = next;
                t += dt / 2f64.powi(k as i32);
            }
        }
        if t >= end {
            break;
        }
        let weights: Vec<f64> = channels.iter().map(|c| (&c.op * &psi).norm_squared()).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(QcertError::Simulation(format!(
                "norm underflow without an available jump at t = {t:e}"
            )));
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = channels.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                chosen = k;
                break;
            }
            pick -= w;
        }
        acc.record(t, channels[chosen].nu);
        let jumped = &channels[chosen].op * &psi;
        let norm = jumped.norm();
        psi = jumped / Complex64::new(norm, 0.0);
    }
    Ok(acc.finish(cfg))
}

/// Smallest non-zero relaxation rate of a generator (row-major `n×n`).
pub fn spectral_gap(w: &[f64], n: usize) -> Result<f64> {
    let m = DMatrix::from_row_slice(n, n, w);
    let scale = m.abs().row_sum().max();
    let eig = m.complex_eigenvalues();
    eig.iter()
        .map(|z| -z.re)
        .filter(|&r| r > 1e-10 * scale)
        .fold(None, |best: Option<f64>, r| Some(best.map_or(r, |b| b.min(r))))
        .ok_or_else(|| QcertError::Conditioning("generator has no relaxing mode".into()))
}

/// Run length covering `relaxations` multiples of the slowest relaxation
/// time of either generator.
pub fn suggested_duration(gaps: &[f64], relaxations: f64) -> f64 {
    let slowest = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    relaxations / slowest
}

/// One ICS-versus-trajectory comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyRow {
    pub machine: String,
    /// `"quantum"` (unraveling) or `"classical"` (Gillespie on the
    /// classical equivalent).
    pub model: &'static str,
    pub seed: u64,
    pub ics: CurrentStats,
    pub mc: TrajectoryStats,
    pub z_c1: f64,
    pub z_c2: f64,
}

impl VerifyRow {
    pub fn within(&self, sigmas: f64) -> bool {
        self.z_c1 <= sigmas && self.z_c2 <= sigmas
    }
}

/// Expected number of jumps per unit time in the steady state.
fn activity(spec_rates: &[(usize, f64)], pops: &[f64]) -> f64 {
    spec_rates.iter().map(|&(from, r)| r * pops[from]).sum()
}

/// Compare the ICS cumulants of a machine (and of its classical
/// equivalent, when feasible) with trajectory estimates.
///
/// The run length is `relaxations` slowest relaxation times, and at least
/// [`MIN_JUMPS`] expected jumps; runs that would need more than `max_jumps`
/// jumps are refused rather than left to grind.
pub fn verify_machine(
    machine: &Machine,
    relaxations: f64,
    seed: u64,
    max_jumps: f64,
) -> Result<Vec<VerifyRow>> {
    let spec = machine.spec()?;
    let bath = machine.monitored_bath();
    let wq = build_quantum_generator::<Dd>(&spec)?.monitor_bath(bath)?;
    let ics_q = cumulants(&wq)?;
    let pops_q = solve_steady(&wq)?.populations_f64();
    let rates_q: Vec<(usize, f64)> = spec
        .jumps
        .iter()
        .flat_map(|j| j.branches.iter().map(|b| (b.from, b.rate)))
        .collect();
    let value_f64 = |w: &GeneratorMatrix<Dd>| -> Vec<f64> { w.value().iter().map(|x| x.to_f64()).collect() };
    let mut gaps = vec![spectral_gap(&value_f64(&wq), wq.dim())?];
    let mut budget = activity(&rates_q, &pops_q);

    let eq = classical_equivalent(&spec)?;
    let classical = if eq.feasible {
        let wc = build_classical_generator::<Dd>(&eq.equivalent)?.monitor_bath(bath)?;
        let ics_c = cumulants(&wc)?;
        let pops_c = solve_steady(&wc)?.populations_f64();
        let rates_c: Vec<(usize, f64)> = eq
            .equivalent
            .transitions
            .iter()
            .flat_map(|t| [(t.i, t.rate_ij), (t.j, t.rate_ji)])
            .collect();
        gaps.push(spectral_gap(&value_f64(&wc), wc.dim())?);
        budget = budget.max(activity(&rates_c, &pops_c));
        Some(ics_c)
    } else {
        None
    };
    // Long enough to relax many times over and to collect enough jumps per
    // batch for the batch variance to be close to its Gaussian limit.
    let duration = suggested_duration(&gaps, relaxations).max(MIN_JUMPS / budget);
    if budget * duration > max_jumps {
        return Err(QcertError::Domain(format!(
            "trajectory would need about {:.1e} jumps (limit {max_jumps:.1e})",
            budget * duration
        )));
    }

    let cfg = McConfig::new(duration, seed);
    let name = machine.kind().name().to_string();
    let row = |model, ics: CurrentStats, mc: TrajectoryStats| {
        let (z_c1, z_c2) = mc.z_scores(&ics);
        VerifyRow { machine: name.clone(), model, seed, ics, mc, z_c1, z_c2 }
    };
    let mut rows = vec![row("quantum", ics_q, quantum_jump_unravel(&spec, bath, &cfg)?)];
    if let Some(ics_c) = classical {
        let cfg_c = McConfig { seed: seed ^ 0x9e37_79b9_7f4a_7c15, ..cfg };
        rows.push(row("classical", ics_c, gillespie(&eq.equivalent, bath, &cfg_c)?));
    }
    Ok(rows)
}
