//! Classical thermodynamic equivalents.
//!
//! A classical equivalent keeps the levels, energies and baths of a quantum
//! machine and reproduces its steady-state populations, hence every average
//! current, with a classical rate network:
//!
//! * a Hamiltonian coupling `g(|u⟩⟨v| + h.c.)` becomes a symmetric stochastic
//!   jump `u ↔ v` at the Lorentzian rate `4g²Σ/(4Δ² + Σ²)`, where `Σ` is the
//!   total dissipative escape rate of the pair;
//! * a noise-induced coherence between degenerate levels becomes a symmetric
//!   jump `u ↔ v` plus kinetic-only corrections to the collective branches.
//!   These corrections can turn rates negative, in which case no classical
//!   equivalent exists and the report is marked infeasible.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{QcertError, Result};
use crate::machine_model::{
    BathSpec, Branch, ClassicalMachineSpec, ClassicalTransition, CoherentCoupling, Direction,
    JumpSpec, LevelSpec, MachineSpec,
};

/// Outcome of an equivalent construction.  Infeasibility is data: the
/// equivalent is still returned (with its negative rates) so that callers can
/// inspect it, but it must not be solved.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub equivalent: ClassicalMachineSpec,
    pub feasible: bool,
    pub violated_constraints: Vec<String>,
    /// Rate of the added symmetric `u ↔ v` jump.
    pub virtual_rate: f64,
    /// Corrected branch rates keyed `"from->to"`.
    pub corrected_rates: BTreeMap<String, f64>,
}

impl EquivalenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Bath id used for the stochastic stand-in of a drive between
/// non-degenerate levels.
pub const VIRTUAL_WORK_BATH: &str = "virtual";

fn escape_rate(spec: &MachineSpec, level: usize) -> f64 {
    spec.jumps
        .iter()
        .flat_map(|j| j.branches.iter())
        .filter(|b| b.from == level)
        .map(|b| b.rate)
        .sum()
}

/// `4g²Σ / (4Δ² + Σ²)`.
pub fn lorentzian_rate(g: f64, detuning: f64, sigma: f64) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    4.0 * g * g * sigma / (4.0 * detuning * detuning + sigma * sigma)
}

/// Pair every branch with its reverse inside the same jump and emit one
/// classical transition per pair (lower level first).
fn classical_transitions(
    spec: &MachineSpec,
    rate: impl Fn(usize, &Branch) -> f64,
) -> Result<Vec<ClassicalTransition>> {
    let mut out = Vec::new();
    for (k, jump) in spec.jumps.iter().enumerate() {
        let mut seen: Vec<(usize, usize)> = Vec::new();
        for b in &jump.branches {
            let (lo, hi) = if spec.direction(b) == Direction::Up {
                (b.from, b.to)
            } else {
                (b.to, b.from)
            };
            if seen.contains(&(lo, hi)) {
                continue;
            }
            seen.push((lo, hi));
            let find = |from: usize, to: usize| {
                jump.branches
                    .iter()
                    .find(|x| x.from == from && x.to == to)
                    .map(|x| rate(k, x))
            };
            let up = find(lo, hi).ok_or_else(|| {
                QcertError::Validation(format!("jump {k}: branch {lo}->{hi} has no partner"))
            })?;
            let down = find(hi, lo).ok_or_else(|| {
                QcertError::Validation(format!("jump {k}: branch {hi}->{lo} has no partner"))
            })?;
            if up == 0.0 && down == 0.0 {
                continue;
            }
            out.push(ClassicalTransition {
                bath: Some(jump.bath.clone()),
                i: lo,
                j: hi,
                rate_ij: up,
                rate_ji: down,
            });
        }
    }
    Ok(out)
}

fn virtual_transition(
    spec: &MachineSpec,
    u: usize,
    v: usize,
    rate: f64,
    baths: &mut Vec<BathSpec>,
) -> ClassicalTransition {
    let degenerate = crate::machine_model::degenerate(&spec.levels, u, v);
    let bath = if degenerate {
        None
    } else {
        if !baths.iter().any(|b| b.id == VIRTUAL_WORK_BATH) {
            baths.push(BathSpec::work(VIRTUAL_WORK_BATH));
        }
        Some(VIRTUAL_WORK_BATH.to_string())
    };
    ClassicalTransition {
        bath,
        i: u.min(v),
        j: u.max(v),
        rate_ij: rate,
        rate_ji: rate,
    }
}

/// Classical equivalent of a machine with one Hamiltonian coupling.
pub fn hamiltonian_equivalent(spec: &MachineSpec) -> Result<EquivalenceReport> {
    let Some(c) = spec.coupling else {
        return Err(QcertError::WrongClass {
            expected: "hamiltonian-*".into(),
            found: spec.coherence_class.to_string(),
        });
    };
    if !spec.coherence_class.is_hamiltonian() {
        return Err(QcertError::WrongClass {
            expected: "hamiltonian-*".into(),
            found: spec.coherence_class.to_string(),
        });
    }
    spec.validate().into_result()?;
    let sigma = escape_rate(spec, c.u) + escape_rate(spec, c.v);
    let rate = lorentzian_rate(c.g, c.detuning, sigma);
    let mut baths = spec.baths.clone();
    let mut transitions = classical_transitions(spec, |_, b| b.rate)?;
    if rate > 0.0 {
        transitions.push(virtual_transition(spec, c.u, c.v, rate, &mut baths));
    }
    Ok(EquivalenceReport {
        equivalent: ClassicalMachineSpec {
            levels: spec.levels.clone(),
            baths,
            transitions,
        },
        feasible: true,
        violated_constraints: Vec::new(),
        virtual_rate: rate,
        corrected_rates: BTreeMap::new(),
    })
}

/// Branches of one collective operator: same jump, same direction.
fn operator_groups(spec: &MachineSpec) -> Vec<(usize, Direction, Vec<Branch>)> {
    let mut out = Vec::new();
    for (k, jump) in spec.jumps.iter().enumerate() {
        for dir in [Direction::Down, Direction::Up] {
            let br: Vec<Branch> = jump
                .branches
                .iter()
                .filter(|b| spec.direction(b) == dir)
                .copied()
                .collect();
            if !br.is_empty() {
                out.push((k, dir, br));
            }
        }
    }
    out
}

/// Rotate a degenerate collectively-coupled pair `(p, q)` into the bright
/// state `α` of the first collective operator and its orthogonal
/// complement `β`, so that this operator only touches `α`.
///
/// With the first operator's rates `r_p, r_q` out of the pair,
/// `α = (√r_p|p⟩ + √r_q|q⟩)/√(r_p + r_q)` and
/// `β = (√r_q|p⟩ − √r_p|q⟩)/√(r_p + r_q)`.  For the built-in NIC machine this
/// gives `γc^α = γc^a + γc^b` and the hot rates
/// `γh^α = (√(γc^a γh^a) + √(γc^b γh^b))²/γc^α`,
/// `γh^β = (√(γc^a γh^b) − √(γc^b γh^a))²/γc^α`.
pub fn nic_basis_change(spec: &MachineSpec) -> Result<MachineSpec> {
    if spec.coupling.is_some() {
        return Err(QcertError::WrongClass {
            expected: "noise-induced".into(),
            found: spec.coherence_class.to_string(),
        });
    }
    spec.validate().into_result()?;
    let Some((p, q)) = spec.coherent_pair()? else {
        return Err(QcertError::WrongClass {
            expected: "noise-induced".into(),
            found: spec.coherence_class.to_string(),
        });
    };
    if !crate::machine_model::degenerate(&spec.levels, p, q) {
        return Err(QcertError::Validation(format!(
            "levels {p} and {q} are not degenerate"
        )));
    }
    let groups = operator_groups(spec);
    // Reference weights from the first operator addressing both levels.
    let weights = groups.iter().find_map(|(_, _, br)| {
        for a in br {
            for b in br {
                if a.from == p && b.from == q && a.to == b.to && a.rate + b.rate > 0.0 {
                    return Some((a.rate, b.rate));
                }
                if a.to == p && b.to == q && a.from == b.from && a.rate + b.rate > 0.0 {
                    return Some((a.rate, b.rate));
                }
            }
        }
        None
    });
    let (rp, rq) = weights.ok_or_else(|| {
        QcertError::UnsupportedTopology("no collective operator addresses the pair".into())
    })?;
    let (sp, sq) = ((rp / (rp + rq)).sqrt(), (rq / (rp + rq)).sqrt());

    let mut jumps: Vec<JumpSpec> = spec
        .jumps
        .iter()
        .map(|j| JumpSpec { bath: j.bath.clone(), gap: j.gap, branches: Vec::new() })
        .collect();
    let mut beta_sign = 0.0f64;
    for (k, _, br) in &groups {
        // Partner levels of this operator, in first-appearance order.
        let mut partners: Vec<usize> = Vec::new();
        for b in br {
            let other = if b.from == p || b.from == q {
                b.to
            } else if b.to == p || b.to == q {
                b.from
            } else {
                jumps[*k].branches.push(*b);
                continue;
            };
            if !partners.contains(&other) {
                partners.push(other);
            }
        }
        for t in partners {
            let outgoing = br.iter().any(|b| b.to == t && (b.from == p || b.from == q));
            let rate = |i: usize| -> f64 {
                br.iter()
                    .find(|b| if outgoing { b.from == i && b.to == t } else { b.from == t && b.to == i })
                    .map(|b| b.rate)
                    .unwrap_or(0.0)
            };
            let (ap, aq) = (rate(p).sqrt(), rate(q).sqrt());
            let amp_alpha = sp * ap + sq * aq;
            let amp_beta = sq * ap - sp * aq;
            if amp_alpha.abs() > 0.0 && amp_beta.abs() > 0.0 {
                let s = amp_beta.signum();
                if beta_sign != 0.0 && s != beta_sign {
                    return Err(QcertError::UnsupportedTopology(
                        "collective operators address the rotated pair with opposite relative phases".into(),
                    ));
                }
                beta_sign = s;
            }
            for (level, amp) in [(p, amp_alpha), (q, amp_beta)] {
                let r = amp * amp;
                let b = if outgoing {
                    Branch { from: level, to: t, rate: r }
                } else {
                    Branch { from: t, to: level, rate: r }
                };
                jumps[*k].branches.push(b);
            }
        }
    }
    // Drop branch pairs that vanished in the rotation.
    for j in &mut jumps {
        let snapshot = j.branches.clone();
        j.branches.retain(|b| {
            b.rate > 0.0
                || snapshot
                    .iter()
                    .any(|x| x.from == b.to && x.to == b.from && x.rate > 0.0)
        });
    }
    let mut levels: Vec<LevelSpec> = spec.levels.clone();
    levels[p].label = Some("alpha".into());
    levels[q].label = Some("beta".into());
    let mut rotated = MachineSpec {
        levels,
        baths: spec.baths.clone(),
        jumps,
        coupling: None,
        coherence_class: spec.coherence_class,
    };
    rotated.coherence_class = rotated.infer_coherence_class();
    Ok(rotated)
}

/// Classical equivalent of a noise-induced-coherence machine.
///
/// With `D_n = √(γ_un γ_vn)` for every partner level `n` reached from both
/// coherent levels by one collective operator, and
/// `γ* = Σ_n D_n / Σ_j(γ_uj + γ_vj)`:
///
/// * the virtual rate is `(Σ_n D_n)² / Σ_j(γ_uj + γ_vj)`;
/// * each collective branch between `i ∈ {u, v}` and `n` has its kinetic
///   part reduced, `γ_in → γ_in − 2D_n γ*`, and the reverse branch is scaled
///   by the same factor so detailed balance is untouched.
///
/// For the rotated NIC machine this is the closed form
/// `γ_αβ = (n̄h+1)²γh^α γh^β / [(n̄c+1)γc^α + (n̄h+1)(γh^α+γh^β)]`,
/// `γ_k1 = (γh^k − 2γ_αβ/(n̄h+1))(n̄h+1)`, `γ_1k = (γh^k − 2γ_αβ/(n̄h+1))n̄h`.
///
/// The construction reproduces the quantum populations exactly when a
/// single partner level is shared by the pair (the case of every built-in
/// machine).  With several shared partners, cross terms between partners are
/// not representable by rate corrections and the currents are approximate.
pub fn nic_equivalent(rotated: &MachineSpec) -> Result<EquivalenceReport> {
    if rotated.coupling.is_some() {
        return Err(QcertError::WrongClass {
            expected: "noise-induced".into(),
            found: rotated.coherence_class.to_string(),
        });
    }
    rotated.validate().into_result()?;
    let Some((u, v)) = rotated.coherent_pair()? else {
        // No interference left (e.g. a dark β): the machine is classical.
        return Ok(EquivalenceReport {
            equivalent: ClassicalMachineSpec {
                levels: rotated.levels.clone(),
                baths: rotated.baths.clone(),
                transitions: classical_transitions(rotated, |_, b| b.rate)?,
            },
            feasible: true,
            violated_constraints: Vec::new(),
            virtual_rate: 0.0,
            corrected_rates: BTreeMap::new(),
        });
    };
    let sigma = escape_rate(rotated, u) + escape_rate(rotated, v);
    // Shared partners reached from both levels by one operator: (jump, n, D_n).
    let mut shared: Vec<(usize, usize, f64)> = Vec::new();
    for (k, _, br) in operator_groups(rotated) {
        for a in &br {
            for b in &br {
                if a.from == u && b.from == v && a.to == b.to && a.rate > 0.0 && b.rate > 0.0 {
                    shared.push((k, a.to, (a.rate * b.rate).sqrt()));
                }
            }
        }
    }
    let dsum: f64 = shared.iter().map(|s| s.2).sum();
    let gamma_star = if sigma > 0.0 { dsum / sigma } else { 0.0 };
    let virtual_rate = if sigma > 0.0 { dsum * dsum / sigma } else { 0.0 };

    // Correction factor per (jump, pair level, partner).
    let mut factor: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for &(k, n, d) in &shared {
        for i in [u, v] {
            let out_rate = rotated.jumps[k]
                .branches
                .iter()
                .find(|b| b.from == i && b.to == n)
                .map(|b| b.rate)
                .unwrap_or(0.0);
            factor.insert((k, i, n), 1.0 - 2.0 * d * gamma_star / out_rate);
        }
    }
    let mut corrected = BTreeMap::new();
    let mut violated = Vec::new();
    let transitions = classical_transitions(rotated, |k, b| {
        let key = if b.from == u || b.from == v {
            (k, b.from, b.to)
        } else {
            (k, b.to, b.from)
        };
        match factor.get(&key) {
            Some(&f) => b.rate * f,
            None => b.rate,
        }
    })?;
    for &(k, i, n) in factor.keys() {
        for (from, to) in [(i, n), (n, i)] {
            let Some(br) = rotated.jumps[k].branches.iter().find(|b| b.from == from && b.to == to) else {
                continue;
            };
            let r = br.rate * factor[&(k, i, n)];
            corrected.insert(format!("{from}->{to}"), r);
            if r < 0.0 {
                violated.push(format!("corrected rate {from}->{to} = {r:e} < 0"));
            }
        }
    }
    let mut baths = rotated.baths.clone();
    let mut transitions = transitions;
    if virtual_rate > 0.0 {
        transitions.push(virtual_transition(rotated, u, v, virtual_rate, &mut baths));
    }
    Ok(EquivalenceReport {
        equivalent: ClassicalMachineSpec {
            levels: rotated.levels.clone(),
            baths,
            transitions,
        },
        feasible: violated.is_empty(),
        violated_constraints: violated,
        virtual_rate,
        corrected_rates: corrected,
    })
}

/// Dispatch on the coherence class: Hamiltonian couplings directly, noise-
/// induced machines after the basis change, incoherent machines verbatim.
pub fn classical_equivalent(spec: &MachineSpec) -> Result<EquivalenceReport> {
    use crate::machine_model::CoherenceClass as C;
    match spec.coherence_class {
        C::HamiltonianEnergetic | C::HamiltonianDegenerate => hamiltonian_equivalent(spec),
        C::NoiseInduced => nic_equivalent(&nic_basis_change(spec)?),
        C::None => {
            spec.validate().into_result()?;
            Ok(EquivalenceReport {
                equivalent: ClassicalMachineSpec {
                    levels: spec.levels.clone(),
                    baths: spec.baths.clone(),
                    transitions: classical_transitions(spec, |_, b| b.rate)?,
                },
                feasible: true,
                violated_constraints: Vec::new(),
                virtual_rate: 0.0,
                corrected_rates: BTreeMap::new(),
            })
        }
    }
}

/// A machine with several Hamiltonian couplings on disjoint level pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiCouplingSpec {
    /// Incoherent part; its `coupling` must be `None`.
    pub base: MachineSpec,
    pub couplings: Vec<CoherentCoupling>,
}

/// One step of the one-coupling-at-a-time replacement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequentialStep {
    pub replaced: CoherentCoupling,
    /// Couplings still quantum after this step.
    pub remaining: Vec<CoherentCoupling>,
    /// Rate network so far: the bath transitions plus one virtual jump per
    /// replaced coupling.
    pub report: EquivalenceReport,
}

/// Replace couplings one at a time; the last step is fully classical.
///
/// With disjoint pairs the coherence of one pair is unaffected by the other
/// couplings, so each virtual rate depends only on the dissipative escape
/// rates of its own pair.
pub fn sequential_equivalent(spec: &MultiCouplingSpec) -> Result<Vec<SequentialStep>> {
    if spec.base.coupling.is_some() {
        return Err(QcertError::Config(
            "base machine of a multi-coupling spec must not carry a coupling".into(),
        ));
    }
    let n = spec.base.n_levels();
    let mut used: Vec<usize> = Vec::new();
    for c in &spec.couplings {
        if c.u >= n || c.v >= n || c.u == c.v {
            return Err(QcertError::Validation(format!(
                "coupling ({}, {}) is invalid",
                c.u, c.v
            )));
        }
        if used.contains(&c.u) || used.contains(&c.v) {
            return Err(QcertError::UnsupportedTopology(format!(
                "coupling ({}, {}) shares a level with another coupling",
                c.u, c.v
            )));
        }
        used.push(c.u);
        used.push(c.v);
    }
    let mut baths = spec.base.baths.clone();
    let mut transitions = classical_transitions(&spec.base, |_, b| b.rate)?;
    let mut steps = Vec::new();
    for (k, c) in spec.couplings.iter().enumerate() {
        let sigma = escape_rate(&spec.base, c.u) + escape_rate(&spec.base, c.v);
        let rate = lorentzian_rate(c.g, c.detuning, sigma);
        if rate > 0.0 {
            transitions.push(virtual_transition(&spec.base, c.u, c.v, rate, &mut baths));
        }
        steps.push(SequentialStep {
            replaced: *c,
            remaining: spec.couplings[k + 1..].to_vec(),
            report: EquivalenceReport {
                equivalent: ClassicalMachineSpec {
                    levels: spec.base.levels.clone(),
                    baths: baths.clone(),
                    transitions: transitions.clone(),
                },
                feasible: true,
                violated_constraints: Vec::new(),
                virtual_rate: rate,
                corrected_rates: BTreeMap::new(),
            },
        });
    }
    Ok(steps)
}
