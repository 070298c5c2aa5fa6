//! Built-in machines: the three-level amplifier, the three-qubit absorption
//! refrigerator, the noise-induced-coherence (NIC) machine, and a generic
//! four-state testbed for the sign of the fluctuation ratio.
//!
//! Parameters can be given as plain maps (for sweeps and the CLI).  Besides
//! the field names, a few ratio keys are accepted because sweep protocols
//! sample temperature ratios rather than temperatures:
//! `beta_h_over_beta_c` (amplifier, NIC), `beta_m_over_beta_c` and
//! `beta_h_over_beta_m` (fridge), and `omega_d` (amplifier, sets
//! `eps1 = omega_d − detuning`).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QcertError, Result};
use crate::liouvillian::{ChannelInfo, Component, GainEntry, GeneratorMatrix, TrackedBasis};
use crate::machine_model::{
    bose_occupation, thermal_rates, BathSpec, Branch, CoherenceClass, CoherentCoupling, Direction,
    JumpSpec, LevelSpec, MachineSpec,
};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MachineKind {
    Amplifier,
    Fridge,
    Nic,
    Generic4,
}

impl MachineKind {
    pub fn name(self) -> &'static str {
        match self {
            MachineKind::Amplifier => "amplifier",
            MachineKind::Fridge => "fridge",
            MachineKind::Nic => "nic",
            MachineKind::Generic4 => "generic4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "amplifier" => Ok(MachineKind::Amplifier),
            "fridge" => Ok(MachineKind::Fridge),
            "nic" => Ok(MachineKind::Nic),
            "generic4" => Ok(MachineKind::Generic4),
            other => Err(QcertError::Config(format!("unknown machine '{other}'"))),
        }
    }
}

impl fmt::Display for MachineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Three-level maser/amplifier: hot bath on 0↔2, cold bath on 1↔2, drive on
/// 0↔1 at `ω_d = ε₁ + Δ_d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplifierParams {
    pub beta_c: f64,
    pub beta_h: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub gamma_c: f64,
    pub gamma_h: f64,
    pub g: f64,
    pub detuning: f64,
}

impl Default for AmplifierParams {
    fn default() -> Self {
        AmplifierParams {
            beta_c: 1.0,
            beta_h: 0.1,
            eps1: 2.5,
            eps2: 5.0,
            gamma_c: 1e-3,
            gamma_h: 1e-3,
            g: 1e-3,
            detuning: 0.0,
        }
    }
}

impl AmplifierParams {
    pub fn omega_d(&self) -> f64 {
        self.eps1 + self.detuning
    }
    pub fn nbar_c(&self) -> Result<f64> {
        bose_occupation(self.beta_c, self.eps2 - self.eps1)
    }
    pub fn nbar_h(&self) -> Result<f64> {
        bose_occupation(self.beta_h, self.eps2)
    }
}

/// Three-qubit absorption refrigerator; qubit gaps `ε₁` (cold), `ε₂`
/// (medium/room), `ε₃ = ε₂ − ε₁` (hot), coupled by `g(|101⟩⟨010| + h.c.)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FridgeParams {
    pub beta_c: f64,
    pub beta_m: f64,
    pub beta_h: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub gamma_c: f64,
    pub gamma_m: f64,
    pub gamma_h: f64,
    pub g: f64,
}

impl Default for FridgeParams {
    fn default() -> Self {
        FridgeParams {
            beta_c: 1.0,
            beta_m: 0.5,
            beta_h: 0.1,
            eps1: 1.0,
            eps2: 5.0,
            gamma_c: 1e-3,
            gamma_m: 1e-3,
            gamma_h: 1e-3,
            g: 1e-3,
        }
    }
}

impl FridgeParams {
    pub fn eps3(&self) -> f64 {
        self.eps2 - self.eps1
    }
    pub fn nbars(&self) -> Result<(f64, f64, f64)> {
        Ok((
            bose_occupation(self.beta_c, self.eps1)?,
            bose_occupation(self.beta_m, self.eps2)?,
            bose_occupation(self.beta_h, self.eps3())?,
        ))
    }
}

/// Four-level NIC machine: ground 0, level 1 at `ε₁`, degenerate pair
/// 2a/2b at `ε₂`.  Cold bath collectively on 0↔2a,b; hot bath collectively
/// on 1↔2a,b; a work (infinite-temperature) source on 0↔1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NicParams {
    pub beta_c: f64,
    pub beta_h: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub gamma_ca: f64,
    pub gamma_cb: f64,
    pub gamma_ha: f64,
    pub gamma_hb: f64,
    /// Rate of the work-source transition (equal both ways).
    pub gamma_w: f64,
}

impl Default for NicParams {
    fn default() -> Self {
        NicParams {
            beta_c: 1.0,
            beta_h: 0.1,
            eps1: 2.5,
            eps2: 5.0,
            gamma_ca: 1e-3,
            gamma_cb: 1e-3,
            gamma_ha: 1e-3,
            gamma_hb: 1e-4,
            gamma_w: 1e-4,
        }
    }
}

impl NicParams {
    pub fn nbar_c(&self) -> Result<f64> {
        bose_occupation(self.beta_c, self.eps2)
    }
    pub fn nbar_h(&self) -> Result<f64> {
        bose_occupation(self.beta_h, self.eps2 - self.eps1)
    }
}

/// Generic four-state machine: coherent pair u, v, a neighbour m and one
/// mesostate S.  `gamma_xy` is the rate of `x → y`.  Levels are placed at
/// `0 = ε_m ≤ ε_v ≤ ε_u ≤ ε_s`; every transition gets its own bath whose
/// temperature follows from the rate ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Generic4Params {
    pub gamma_um: f64,
    pub gamma_mu: f64,
    pub gamma_vm: f64,
    pub gamma_mv: f64,
    pub gamma_us: f64,
    pub gamma_su: f64,
    pub gamma_vs: f64,
    pub gamma_sv: f64,
    pub gamma_ms: f64,
    pub gamma_sm: f64,
    pub g: f64,
    pub detuning: f64,
    pub unicycle: bool,
    pub eps_v: f64,
    pub eps_u: f64,
    pub eps_s: f64,
}

impl Default for Generic4Params {
    fn default() -> Self {
        Generic4Params {
            gamma_um: 1e-3,
            gamma_mu: 2e-4,
            gamma_vm: 2e-3,
            gamma_mv: 5e-4,
            gamma_us: 3e-4,
            gamma_su: 1e-3,
            gamma_vs: 2e-4,
            gamma_sv: 6e-4,
            gamma_ms: 1e-4,
            gamma_sm: 1.5e-3,
            g: 1e-3,
            detuning: 0.0,
            unicycle: false,
            eps_v: 1.0,
            eps_u: 2.0,
            eps_s: 3.0,
        }
    }
}

impl Generic4Params {
    /// Rates with the unicycle zeroing rule applied.
    pub fn effective(&self) -> Generic4Params {
        let mut p = *self;
        if p.unicycle {
            p.gamma_vs = 0.0;
            p.gamma_sv = 0.0;
            p.gamma_um = 0.0;
            p.gamma_mu = 0.0;
        }
        p
    }

    /// `Σ_i(γ_ui + γ_vi)`, total escape rate of the coherent pair.
    pub fn pair_escape(&self) -> f64 {
        let p = self.effective();
        p.gamma_um + p.gamma_us + p.gamma_vm + p.gamma_vs
    }
}

/// Level indices of the generic four-state machine.
pub mod g4 {
    pub const M: usize = 0;
    pub const V: usize = 1;
    pub const U: usize = 2;
    pub const S: usize = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "machine", rename_all = "lowercase")]
pub enum Machine {
    Amplifier(AmplifierParams),
    Fridge(FridgeParams),
    Nic(NicParams),
    Generic4(Generic4Params),
}

fn level(index: usize, energy: f64, label: &str) -> LevelSpec {
    LevelSpec {
        index,
        energy,
        label: Some(label.to_string()),
    }
}

/// A thermal jump with one downward branch `hi → lo` and its reverse.
fn thermal_pair(bath: &str, gap: f64, hi: usize, lo: usize, gamma: f64, nbar: f64) -> Result<JumpSpec> {
    let (down, up) = thermal_rates(gamma, nbar)?;
    Ok(JumpSpec {
        bath: bath.to_string(),
        gap,
        branches: vec![
            Branch { from: hi, to: lo, rate: down },
            Branch { from: lo, to: hi, rate: up },
        ],
    })
}

/// Build the amplifier spec.
pub fn build_amplifier(p: &AmplifierParams) -> Result<MachineSpec> {
    if !(p.eps1 > 0.0 && p.eps1 < p.eps2) {
        return Err(QcertError::Validation(format!(
            "amplifier needs 0 < eps1 < eps2, got ({}, {})",
            p.eps1, p.eps2
        )));
    }
    if !(p.beta_c >= p.beta_h && p.beta_h > 0.0) {
        return Err(QcertError::Validation(
            "amplifier needs beta_c >= beta_h > 0".into(),
        ));
    }
    let nc = p.nbar_c()?;
    let nh = p.nbar_h()?;
    let spec = MachineSpec {
        levels: vec![
            level(0, 0.0, "0"),
            level(1, p.eps1, "1"),
            level(2, p.eps2, "2"),
        ],
        baths: vec![BathSpec::thermal("c", p.beta_c), BathSpec::thermal("h", p.beta_h)],
        jumps: vec![
            thermal_pair("c", p.eps2 - p.eps1, 2, 1, p.gamma_c, nc)?,
            thermal_pair("h", p.eps2, 2, 0, p.gamma_h, nh)?,
        ],
        coupling: Some(CoherentCoupling {
            u: 1,
            v: 0,
            g: p.g,
            detuning: p.detuning,
        }),
        coherence_class: CoherenceClass::HamiltonianEnergetic,
    };
    Ok(spec)
}

/// Qubit occupations `(c, m, h)` of the fridge levels in the published
/// vector order; storage order is the stable energy sort of this list.
pub const FRIDGE_LABELS: [&str; 8] = ["000", "001", "100", "011", "110", "111", "101", "010"];

fn fridge_bits(label: &str) -> [u8; 3] {
    let b = label.as_bytes();
    [b[0] - b'0', b[1] - b'0', b[2] - b'0']
}

/// Storage order of the fridge levels: indices into [`FRIDGE_LABELS`].
pub fn fridge_order(p: &FridgeParams) -> Vec<usize> {
    let gaps = [p.eps1, p.eps2, p.eps3()];
    let energy = |k: usize| -> f64 {
        let b = fridge_bits(FRIDGE_LABELS[k]);
        (0..3).map(|q| b[q] as f64 * gaps[q]).sum()
    };
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| energy(a).total_cmp(&energy(b)));
    order
}

/// Build the fridge spec (levels sorted by energy; labels give `cmh`).
pub fn build_fridge(p: &FridgeParams) -> Result<MachineSpec> {
    let eps3 = p.eps3();
    if !(p.eps1 > 0.0 && eps3 > 0.0) {
        return Err(QcertError::Validation(format!(
            "fridge needs 0 < eps1 < eps2 (eps3 = {eps3})"
        )));
    }
    if !(p.beta_c >= p.beta_m && p.beta_m >= p.beta_h && p.beta_h > 0.0) {
        return Err(QcertError::Validation(
            "fridge needs beta_c >= beta_m >= beta_h > 0".into(),
        ));
    }
    let (nc, nm, nh) = p.nbars()?;
    let gaps = [p.eps1, p.eps2, eps3];
    let order = fridge_order(p);
    let mut index_of = [0usize; 8];
    let mut levels = Vec::with_capacity(8);
    for (i, &k) in order.iter().enumerate() {
        index_of[k] = i;
        let b = fridge_bits(FRIDGE_LABELS[k]);
        let e: f64 = (0..3).map(|q| b[q] as f64 * gaps[q]).sum();
        levels.push(level(i, e, FRIDGE_LABELS[k]));
    }
    // Pin the ground state exactly.
    levels[0].energy = 0.0;
    let find = |bits: [u8; 3]| -> usize {
        let k = FRIDGE_LABELS
            .iter()
            .position(|l| fridge_bits(l) == bits)
            .expect("all eight labels present");
        index_of[k]
    };
    let baths = [("c", p.beta_c, p.gamma_c, nc), ("m", p.beta_m, p.gamma_m, nm), ("h", p.beta_h, p.gamma_h, nh)];
    let mut jumps = Vec::new();
    for (q, &(id, _, gamma, nbar)) in baths.iter().enumerate() {
        let (down, up) = thermal_rates(gamma, nbar)?;
        let mut branches = Vec::new();
        for k in 0..8 {
            let b = fridge_bits(FRIDGE_LABELS[k]);
            if b[q] == 1 {
                let mut lo = b;
                lo[q] = 0;
                branches.push(Branch { from: find(b), to: find(lo), rate: down });
                branches.push(Branch { from: find(lo), to: find(b), rate: up });
            }
        }
        jumps.push(JumpSpec {
            bath: id.to_string(),
            gap: gaps[q],
            branches,
        });
    }
    Ok(MachineSpec {
        levels,
        baths: baths.iter().map(|&(id, beta, _, _)| BathSpec::thermal(id, beta)).collect(),
        jumps,
        coupling: Some(CoherentCoupling {
            u: find([1, 0, 1]),
            v: find([0, 1, 0]),
            g: p.g,
            detuning: 0.0,
        }),
        coherence_class: CoherenceClass::HamiltonianDegenerate,
    })
}

/// Build the NIC spec in the original (2a, 2b) basis.
pub fn build_nic(p: &NicParams) -> Result<MachineSpec> {
    if !(p.eps1 > 0.0 && p.eps1 < p.eps2) {
        return Err(QcertError::Validation(format!(
            "nic needs 0 < eps1 < eps2, got ({}, {})",
            p.eps1, p.eps2
        )));
    }
    if !(p.beta_c >= p.beta_h && p.beta_h > 0.0) {
        return Err(QcertError::Validation("nic needs beta_c >= beta_h > 0".into()));
    }
    for (name, r) in [
        ("gamma_ca", p.gamma_ca),
        ("gamma_cb", p.gamma_cb),
        ("gamma_ha", p.gamma_ha),
        ("gamma_hb", p.gamma_hb),
        ("gamma_w", p.gamma_w),
    ] {
        if !(r >= 0.0) {
            return Err(QcertError::Validation(format!("{name} must be >= 0")));
        }
    }
    let nc = p.nbar_c()?;
    let nh = p.nbar_h()?;
    let (dca, uca) = thermal_rates(p.gamma_ca, nc)?;
    let (dcb, ucb) = thermal_rates(p.gamma_cb, nc)?;
    let (dha, uha) = thermal_rates(p.gamma_ha, nh)?;
    let (dhb, uhb) = thermal_rates(p.gamma_hb, nh)?;
    let mut spec = MachineSpec {
        levels: vec![
            level(0, 0.0, "0"),
            level(1, p.eps1, "1"),
            level(2, p.eps2, "2a"),
            level(3, p.eps2, "2b"),
        ],
        baths: vec![
            BathSpec::thermal("c", p.beta_c),
            BathSpec::thermal("h", p.beta_h),
            BathSpec::work("w"),
        ],
        jumps: vec![
            JumpSpec {
                bath: "c".into(),
                gap: p.eps2,
                branches: vec![
                    Branch { from: 2, to: 0, rate: dca },
                    Branch { from: 3, to: 0, rate: dcb },
                    Branch { from: 0, to: 2, rate: uca },
                    Branch { from: 0, to: 3, rate: ucb },
                ],
            },
            JumpSpec {
                bath: "h".into(),
                gap: p.eps2 - p.eps1,
                branches: vec![
                    Branch { from: 2, to: 1, rate: dha },
                    Branch { from: 3, to: 1, rate: dhb },
                    Branch { from: 1, to: 2, rate: uha },
                    Branch { from: 1, to: 3, rate: uhb },
                ],
            },
            JumpSpec {
                bath: "w".into(),
                gap: p.eps1,
                branches: vec![
                    Branch { from: 1, to: 0, rate: p.gamma_w },
                    Branch { from: 0, to: 1, rate: p.gamma_w },
                ],
            },
        ],
        coupling: None,
        coherence_class: CoherenceClass::NoiseInduced,
    };
    spec.coherence_class = spec.infer_coherence_class();
    Ok(spec)
}

/// Rotated NIC spec over (0, 1, α, β) built from the rotated rates
/// directly; see `equivalents::nic_basis_change` for the rotation itself.
pub fn build_nic_rotated(
    p: &NicParams,
    gamma_c_alpha: f64,
    gamma_h_alpha: f64,
    gamma_h_beta: f64,
) -> Result<MachineSpec> {
    let rotated = NicParams {
        gamma_ca: gamma_c_alpha,
        gamma_cb: 0.0,
        gamma_ha: gamma_h_alpha,
        gamma_hb: gamma_h_beta,
        ..*p
    };
    let mut spec = build_nic(&rotated)?;
    spec.levels[2].label = Some("alpha".into());
    spec.levels[3].label = Some("beta".into());
    for j in &mut spec.jumps {
        j.branches.retain(|b| b.rate > 0.0);
    }
    spec.coherence_class = spec.infer_coherence_class();
    Ok(spec)
}

fn generic4_bath(
    id: &str,
    hi: usize,
    lo: usize,
    gap: f64,
    down: f64,
    up: f64,
) -> Result<Option<(BathSpec, JumpSpec)>> {
    if down == 0.0 && up == 0.0 {
        return Ok(None);
    }
    let beta = (down / up).ln() / gap;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(QcertError::Validation(format!(
            "generic4 transition {id}: rates (down {down}, up {up}) over gap {gap} imply no positive temperature"
        )));
    }
    Ok(Some((
        BathSpec::thermal(id, beta),
        JumpSpec {
            bath: id.to_string(),
            gap,
            branches: vec![
                Branch { from: hi, to: lo, rate: down },
                // Reconstructed so detailed balance holds to rounding.
                Branch { from: lo, to: hi, rate: down * (-beta * gap).exp() },
            ],
        },
    )))
}

/// Build the generic four-state spec (levels m, v, u, S by energy).
pub fn build_generic4_spec(p: &Generic4Params) -> Result<MachineSpec> {
    let q = p.effective();
    if !(0.0 < q.eps_v && q.eps_v <= q.eps_u && q.eps_u < q.eps_s) {
        return Err(QcertError::Validation(
            "generic4 needs 0 < eps_v <= eps_u < eps_s".into(),
        ));
    }
    use g4::*;
    let e = [0.0, q.eps_v, q.eps_u, q.eps_s];
    let mut baths = Vec::new();
    let mut jumps = Vec::new();
    for (id, hi, lo, down, up) in [
        ("vm", V, M, q.gamma_vm, q.gamma_mv),
        ("um", U, M, q.gamma_um, q.gamma_mu),
        ("su", S, U, q.gamma_su, q.gamma_us),
        ("sv", S, V, q.gamma_sv, q.gamma_vs),
        ("sm", S, M, q.gamma_sm, q.gamma_ms),
    ] {
        if let Some((b, j)) = generic4_bath(id, hi, lo, e[hi] - e[lo], down, up)? {
            baths.push(b);
            jumps.push(j);
        }
    }
    let class = if q.eps_u == q.eps_v {
        CoherenceClass::HamiltonianDegenerate
    } else {
        CoherenceClass::HamiltonianEnergetic
    };
    Ok(MachineSpec {
        levels: vec![level(M, 0.0, "m"), level(V, q.eps_v, "v"), level(U, q.eps_u, "u"), level(S, q.eps_s, "S")],
        baths,
        jumps,
        coupling: Some(CoherentCoupling { u: U, v: V, g: q.g, detuning: q.detuning }),
        coherence_class: class,
    })
}

/// Directly assembled generators of the generic four-state machine, in the
/// layout `(ρ_uu, ρ_vv, ρ_mm, ρ_SS, Re ρ_uv, Im ρ_uv)` (the Re row only when
/// `Δ_d ≠ 0`), and the classical 4×4 generator with the virtual u↔v rate.
/// The v↔m transition is dressed (absorption into the machine counted
/// positive, i.e. `m → v` carries `+1`).
pub fn build_generic4_generators<T: Real>(
    p: &Generic4Params,
) -> Result<(GeneratorMatrix<T>, GeneratorMatrix<T>)> {
    let q = p.effective();
    // Reduced layout indices.
    const U: usize = 0;
    const V: usize = 1;
    const M: usize = 2;
    const S: usize = 3;
    let rates: [(usize, usize, f64, &str); 10] = [
        (U, M, q.gamma_um, "um"),
        (M, U, q.gamma_mu, "um"),
        (V, M, q.gamma_vm, "vm"),
        (M, V, q.gamma_mv, "vm"),
        (U, S, q.gamma_us, "su"),
        (S, U, q.gamma_su, "su"),
        (V, S, q.gamma_vs, "sv"),
        (S, V, q.gamma_sv, "sv"),
        (M, S, q.gamma_ms, "sm"),
        (S, M, q.gamma_sm, "sm"),
    ];
    for &(_, _, r, _) in &rates {
        if !(r >= 0.0) {
            return Err(QcertError::Validation("generic4 rates must be >= 0".into()));
        }
    }
    // Energy order S > u ≥ v > m fixes the directions.
    let height = |i: usize| match i {
        M => 0,
        V => 1,
        U => 2,
        _ => 3,
    };
    let resonant = q.detuning == 0.0;
    let mut components = vec![
        Component::Population(g4::U),
        Component::Population(g4::V),
        Component::Population(g4::M),
        Component::Population(g4::S),
    ];
    if !resonant {
        components.push(Component::ReCoherence(g4::U, g4::V));
    }
    components.push(Component::ImCoherence(g4::U, g4::V));
    let dim = components.len();
    let im = dim - 1;
    let re = if resonant { None } else { Some(dim - 2) };

    let mut rest_q = vec![T::zero(); dim * dim];
    let mut rest_c = vec![T::zero(); 16];
    let mut gains_q = Vec::new();
    let mut gains_c = Vec::new();
    let mut channels = Vec::new();
    for &(from, to, r, bath) in &rates {
        if r == 0.0 {
            continue;
        }
        let rt = T::from_f64(r);
        rest_q[from * dim + from] = rest_q[from * dim + from] - rt;
        rest_c[from * 4 + from] = rest_c[from * 4 + from] - rt;
        let direction = if height(to) > height(from) {
            Direction::Up
        } else {
            Direction::Down
        };
        channels.push(ChannelInfo {
            source: channels.len(),
            direction,
            bath: Some(bath.to_string()),
        });
        let ch = channels.len() - 1;
        let tag = |i: usize| [g4::U, g4::V, g4::M, g4::S][i];
        gains_q.push(GainEntry { row: to, col: from, value: rt, channel: ch, branch: Some((tag(from), tag(to))), winding: 0 });
        gains_c.push(GainEntry { row: to, col: from, value: rt, channel: ch, branch: Some((tag(from), tag(to))), winding: 0 });
    }

    let two = T::from_f64(2.0);
    let g = T::from_f64(q.g);
    let delta = T::from_f64(q.detuning);
    let sigma = T::from_f64(q.pair_escape());
    let lambda = sigma / two;
    // dρ_uu = −2g Im, dρ_vv = +2g Im
    rest_q[U * dim + im] = -(two * g);
    rest_q[V * dim + im] = two * g;
    // dIm = Δ Re − Λ Im + g(ρ_uu − ρ_vv)
    rest_q[im * dim + im] = -lambda;
    rest_q[im * dim + U] = g;
    rest_q[im * dim + V] = -g;
    if let Some(re) = re {
        // dRe = −Λ Re − Δ Im
        rest_q[re * dim + re] = -lambda;
        rest_q[re * dim + im] = -delta;
        rest_q[im * dim + re] = delta;
    }

    // Virtual classical transition u ↔ v.
    let four = T::from_f64(4.0);
    let virt = four * g * g * sigma / (four * delta * delta + sigma * sigma);
    let mut channels_c = channels.clone();
    if !virt.is_zero() {
        for (from, to, dir) in [(U, V, Direction::Down), (V, U, Direction::Up)] {
            rest_c[from * 4 + from] = rest_c[from * 4 + from] - virt;
            channels_c.push(ChannelInfo { source: channels_c.len(), direction: dir, bath: None });
            gains_c.push(GainEntry {
                row: to,
                col: from,
                value: virt,
                channel: channels_c.len() - 1,
                branch: Some(([g4::U, g4::V][from], [g4::U, g4::V][to])),
                winding: 0,
            });
        }
    }

    let wq = GeneratorMatrix::from_parts(TrackedBasis { components: components.clone() }, rest_q, gains_q, channels)?
        .monitor_bath("vm")?;
    let wc = GeneratorMatrix::from_parts(TrackedBasis { components: components[..4].to_vec() }, rest_c, gains_c, channels_c)?
        .monitor_bath("vm")?;
    Ok((wq, wc))
}

/// Generic four-state machine: spec plus directly assembled generators.
pub fn build_generic4<T: Real>(
    p: &Generic4Params,
) -> Result<(MachineSpec, GeneratorMatrix<T>, GeneratorMatrix<T>)> {
    let spec = build_generic4_spec(p)?;
    let (wq, wc) = build_generic4_generators(p)?;
    Ok((spec, wq, wc))
}

fn set(map: &BTreeMap<String, f64>, key: &str, slot: &mut f64, used: &mut Vec<String>) {
    if let Some(&v) = map.get(key) {
        *slot = v;
        used.push(key.to_string());
    }
}

fn check_unused(map: &BTreeMap<String, f64>, used: &[String], kind: MachineKind) -> Result<()> {
    for k in map.keys() {
        if !used.contains(k) {
            return Err(QcertError::Config(format!(
                "unknown parameter '{k}' for machine {kind}"
            )));
        }
    }
    Ok(())
}

impl Machine {
    pub fn kind(&self) -> MachineKind {
        match self {
            Machine::Amplifier(_) => MachineKind::Amplifier,
            Machine::Fridge(_) => MachineKind::Fridge,
            Machine::Nic(_) => MachineKind::Nic,
            Machine::Generic4(_) => MachineKind::Generic4,
        }
    }

    pub fn default_for(kind: MachineKind) -> Machine {
        match kind {
            MachineKind::Amplifier => Machine::Amplifier(AmplifierParams::default()),
            MachineKind::Fridge => Machine::Fridge(FridgeParams::default()),
            MachineKind::Nic => Machine::Nic(NicParams::default()),
            MachineKind::Generic4 => Machine::Generic4(Generic4Params::default()),
        }
    }

    /// Defaults overridden by a parameter map (field names or ratio keys).
    pub fn from_params(kind: MachineKind, map: &BTreeMap<String, f64>) -> Result<Machine> {
        let mut used = Vec::new();
        let m = match kind {
            MachineKind::Amplifier => {
                let mut p = AmplifierParams::default();
                set(map, "beta_c", &mut p.beta_c, &mut used);
                set(map, "beta_h", &mut p.beta_h, &mut used);
                set(map, "eps1", &mut p.eps1, &mut used);
                set(map, "eps2", &mut p.eps2, &mut used);
                set(map, "gamma_c", &mut p.gamma_c, &mut used);
                set(map, "gamma_h", &mut p.gamma_h, &mut used);
                set(map, "g", &mut p.g, &mut used);
                set(map, "detuning", &mut p.detuning, &mut used);
                if let Some(&r) = map.get("beta_h_over_beta_c") {
                    p.beta_h = r * p.beta_c;
                    used.push("beta_h_over_beta_c".into());
                }
                if let Some(&w) = map.get("omega_d") {
                    p.eps1 = w - p.detuning;
                    used.push("omega_d".into());
                }
                Machine::Amplifier(p)
            }
            MachineKind::Fridge => {
                let mut p = FridgeParams::default();
                set(map, "beta_c", &mut p.beta_c, &mut used);
                set(map, "beta_m", &mut p.beta_m, &mut used);
                set(map, "beta_h", &mut p.beta_h, &mut used);
                set(map, "eps1", &mut p.eps1, &mut used);
                set(map, "eps2", &mut p.eps2, &mut used);
                set(map, "gamma_c", &mut p.gamma_c, &mut used);
                set(map, "gamma_m", &mut p.gamma_m, &mut used);
                set(map, "gamma_h", &mut p.gamma_h, &mut used);
                set(map, "g", &mut p.g, &mut used);
                if let Some(&r) = map.get("beta_m_over_beta_c") {
                    p.beta_m = r * p.beta_c;
                    used.push("beta_m_over_beta_c".into());
                }
                if let Some(&r) = map.get("beta_h_over_beta_m") {
                    p.beta_h = r * p.beta_m;
                    used.push("beta_h_over_beta_m".into());
                }
                Machine::Fridge(p)
            }
            MachineKind::Nic => {
                let mut p = NicParams::default();
                set(map, "beta_c", &mut p.beta_c, &mut used);
                set(map, "beta_h", &mut p.beta_h, &mut used);
                set(map, "eps1", &mut p.eps1, &mut used);
                set(map, "eps2", &mut p.eps2, &mut used);
                set(map, "gamma_ca", &mut p.gamma_ca, &mut used);
                set(map, "gamma_cb", &mut p.gamma_cb, &mut used);
                set(map, "gamma_ha", &mut p.gamma_ha, &mut used);
                set(map, "gamma_hb", &mut p.gamma_hb, &mut used);
                set(map, "gamma_w", &mut p.gamma_w, &mut used);
                if let Some(&r) = map.get("beta_h_over_beta_c") {
                    p.beta_h = r * p.beta_c;
                    used.push("beta_h_over_beta_c".into());
                }
                Machine::Nic(p)
            }
            MachineKind::Generic4 => {
                let mut p = Generic4Params::default();
                for (key, slot) in [
                    ("gamma_um", &mut p.gamma_um),
                    ("gamma_mu", &mut p.gamma_mu),
                    ("gamma_vm", &mut p.gamma_vm),
                    ("gamma_mv", &mut p.gamma_mv),
                    ("gamma_us", &mut p.gamma_us),
                    ("gamma_su", &mut p.gamma_su),
                    ("gamma_vs", &mut p.gamma_vs),
                    ("gamma_sv", &mut p.gamma_sv),
                    ("gamma_ms", &mut p.gamma_ms),
                    ("gamma_sm", &mut p.gamma_sm),
                    ("g", &mut p.g),
                    ("detuning", &mut p.detuning),
                    ("eps_v", &mut p.eps_v),
                    ("eps_u", &mut p.eps_u),
                    ("eps_s", &mut p.eps_s),
                ] {
                    set(map, key, slot, &mut used);
                }
                if let Some(&u) = map.get("unicycle") {
                    p.unicycle = u != 0.0;
                    used.push("unicycle".into());
                }
                Machine::Generic4(p)
            }
        };
        check_unused(map, &used, kind)?;
        Ok(m)
    }

    pub fn spec(&self) -> Result<MachineSpec> {
        match self {
            Machine::Amplifier(p) => build_amplifier(p),
            Machine::Fridge(p) => build_fridge(p),
            Machine::Nic(p) => build_nic(p),
            Machine::Generic4(p) => build_generic4_spec(p),
        }
    }

    /// Bath whose exchanged quanta are counted.
    pub fn monitored_bath(&self) -> &'static str {
        match self {
            Machine::Amplifier(_) | Machine::Fridge(_) => "c",
            Machine::Nic(_) => "w",
            Machine::Generic4(_) => "vm",
        }
    }
}
