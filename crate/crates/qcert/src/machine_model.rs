//! Declarative machine descriptions and their validation.
//!
//! A [`MachineSpec`] is the quantum machine: levels, baths, (possibly
//! collective) jump channels and an optional coherent coupling.  A
//! [`ClassicalMachineSpec`] is a plain rate network over the same levels.
//! Both are immutable values with a JSON representation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QcertError, Result};

/// Relative tolerance for the detailed-balance check.
pub const BALANCE_RTOL: f64 = 1e-12;
/// Relative tolerance (times the largest |ε|) under which two energies are
/// considered degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-12;
/// Weak-coupling advisory: rates or couplings above this fraction of the
/// smallest nonzero gap produce a warning.
pub const WEAK_COUPLING_FRACTION: f64 = 1e-1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub index: usize,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// A reservoir: thermal with inverse temperature `beta`, or an
/// infinite-temperature work source (`work = true`, no beta).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub work: bool,
}

impl BathSpec {
    pub fn thermal(id: &str, beta: f64) -> Self {
        BathSpec {
            id: id.to_string(),
            beta: Some(beta),
            work: false,
        }
    }

    pub fn work(id: &str) -> Self {
        BathSpec {
            id: id.to_string(),
            beta: None,
            work: true,
        }
    }

    /// Inverse temperature, zero for a work source.
    pub fn beta_or_zero(&self) -> f64 {
        if self.work {
            0.0
        } else {
            self.beta.unwrap_or(f64::NAN)
        }
    }
}

/// One level-to-level transition `from → to` at rate `rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// A bath channel with a single energy gap.  All downward branches form one
/// (collective) Lindblad operator, all upward branches another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub bath: String,
    pub gap: f64,
    pub branches: Vec<Branch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Towards higher energy (absorption from the bath).
    Up,
    /// Towards lower energy (emission into the bath).
    Down,
}

impl Direction {
    /// Counting sign: absorption counts positive.
    pub fn counting_sign(self) -> i32 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

/// Coherent coupling `g(|u⟩⟨v| e^{-iω_d t} + h.c.)` with drive frequency
/// `ω_d = ε_u − ε_v + Δ_d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentCoupling {
    pub u: usize,
    pub v: usize,
    pub g: f64,
    #[serde(default)]
    pub detuning: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceClass {
    None,
    HamiltonianEnergetic,
    HamiltonianDegenerate,
    NoiseInduced,
}

impl CoherenceClass {
    pub fn is_hamiltonian(self) -> bool {
        matches!(
            self,
            CoherenceClass::HamiltonianEnergetic | CoherenceClass::HamiltonianDegenerate
        )
    }
}

impl fmt::Display for CoherenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoherenceClass::None => "none",
            CoherenceClass::HamiltonianEnergetic => "hamiltonian-energetic",
            CoherenceClass::HamiltonianDegenerate => "hamiltonian-degenerate",
            CoherenceClass::NoiseInduced => "noise-induced",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub levels: Vec<LevelSpec>,
    pub baths: Vec<BathSpec>,
    pub jumps: Vec<JumpSpec>,
    #[serde(default)]
    pub coupling: Option<CoherentCoupling>,
    pub coherence_class: CoherenceClass,
}

/// A transition of a classical rate network.  `bath = None` marks a
/// free-noise (virtual) transition; when it joins levels of different
/// energy it acts as an infinite-temperature work source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTransition {
    #[serde(default)]
    pub bath: Option<String>,
    pub i: usize,
    pub j: usize,
    /// Rate of `i → j`.
    pub rate_ij: f64,
    /// Rate of `j → i`.
    pub rate_ji: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalMachineSpec {
    pub levels: Vec<LevelSpec>,
    pub baths: Vec<BathSpec>,
    pub transitions: Vec<ClassicalTransition>,
}

/// One problem found by validation.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyMachine,
    LevelIndex { position: usize, index: usize },
    GroundEnergy { energy: f64 },
    UnsortedEnergies { index: usize },
    DuplicateBath { id: String },
    BadBeta { id: String },
    UnknownBath { jump: usize, bath: String },
    NonPositiveGap { jump: usize },
    LevelOutOfRange { jump: usize, level: usize },
    GapMismatch { jump: usize, from: usize, to: usize, gap: f64, actual: f64 },
    NegativeRate { jump: usize, from: usize, to: usize },
    UnpairedBranch { jump: usize, from: usize, to: usize },
    DetailedBalance { jump: usize, from: usize, to: usize, ratio: f64, expected: f64 },
    SharedTransition { from: usize, to: usize },
    CouplingLevels { u: usize, v: usize },
    NegativeCoupling,
    CoherenceClassMismatch { declared: String, inferred: String },
    FreeNoiseAsymmetric { transition: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyMachine => write!(f, "machine has no levels"),
            LevelIndex { position, index } => {
                write!(f, "level at position {position} has index {index}")
            }
            GroundEnergy { energy } => write!(f, "ground energy must be 0, got {energy}"),
            UnsortedEnergies { index } => write!(f, "energy of level {index} decreases"),
            DuplicateBath { id } => write!(f, "bath '{id}' declared twice"),
            BadBeta { id } => write!(f, "bath '{id}' needs beta > 0 or work = true"),
            UnknownBath { jump, bath } => write!(f, "jump {jump} refers to unknown bath '{bath}'"),
            NonPositiveGap { jump } => write!(f, "jump {jump} has a non-positive gap"),
            LevelOutOfRange { jump, level } => write!(f, "jump {jump} touches missing level {level}"),
            GapMismatch { jump, from, to, gap, actual } => write!(
                f,
                "jump {jump}: branch {from}->{to} spans {actual}, declared gap {gap}"
            ),
            NegativeRate { jump, from, to } => {
                write!(f, "jump {jump}: branch {from}->{to} has a negative rate")
            }
            UnpairedBranch { jump, from, to } => {
                write!(f, "jump {jump}: branch {from}->{to} has no reverse branch")
            }
            DetailedBalance { jump, from, to, ratio, expected } => write!(
                f,
                "jump {jump}: rates of {from}<->{to} have ratio {ratio:e}, detailed balance needs {expected:e}"
            ),
            SharedTransition { from, to } => {
                write!(f, "transition {from}<->{to} is coupled to more than one bath")
            }
            CouplingLevels { u, v } => write!(f, "coupling levels ({u}, {v}) are invalid"),
            NegativeCoupling => write!(f, "coupling strength g must be non-negative"),
            CoherenceClassMismatch { declared, inferred } => write!(
                f,
                "declared coherence class {declared} but the structure implies {inferred}"
            ),
            FreeNoiseAsymmetric { transition } => {
                write!(f, "free-noise transition {transition} has unequal rates")
            }
        }
    }
}

/// Outcome of validation: hard violations plus advisory warnings.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Turn a report with violations into an error.
    pub fn into_result(self) -> Result<Vec<String>> {
        if self.violations.is_empty() {
            Ok(self.warnings)
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(QcertError::Validation(msgs.join("; ")))
        }
    }
}

/// Mean thermal occupation `1/(e^{β·gap} − 1)`.
pub fn bose_occupation(beta: f64, gap: f64) -> Result<f64> {
    let x = beta * gap;
    if !(x > 0.0) || !x.is_finite() {
        return Err(QcertError::Domain(format!(
            "bose occupation needs beta*gap > 0, got {x}"
        )));
    }
    Ok(1.0 / x.exp_m1())
}

/// Emission and absorption rates `(γ(n̄+1), γn̄)` of a thermal transition.
pub fn thermal_rates(gamma0: f64, nbar: f64) -> Result<(f64, f64)> {
    if !(gamma0 >= 0.0) || !(nbar >= 0.0) {
        return Err(QcertError::Domain(format!(
            "thermal rates need gamma0 >= 0 and nbar >= 0, got ({gamma0}, {nbar})"
        )));
    }
    Ok((gamma0 * (nbar + 1.0), gamma0 * nbar))
}

fn energy_scale(levels: &[LevelSpec]) -> f64 {
    levels.iter().fold(0.0_f64, |m, l| m.max(l.energy.abs()))
}

/// Whether two energies coincide up to the degeneracy tolerance.
pub fn degenerate(levels: &[LevelSpec], a: usize, b: usize) -> bool {
    let tol = DEGENERACY_RTOL * energy_scale(levels).max(1.0);
    (levels[a].energy - levels[b].energy).abs() <= tol
}

fn check_levels(levels: &[LevelSpec], out: &mut Vec<Violation>) {
    if levels.is_empty() {
        out.push(Violation::EmptyMachine);
        return;
    }
    for (k, l) in levels.iter().enumerate() {
        if l.index != k {
            out.push(Violation::LevelIndex {
                position: k,
                index: l.index,
            });
        }
    }
    if levels[0].energy != 0.0 {
        out.push(Violation::GroundEnergy {
            energy: levels[0].energy,
        });
    }
    for k in 1..levels.len() {
        if levels[k].energy < levels[k - 1].energy {
            out.push(Violation::UnsortedEnergies { index: k });
        }
    }
}

fn check_baths(baths: &[BathSpec], out: &mut Vec<Violation>) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    for b in baths {
        if map.contains_key(&b.id) {
            out.push(Violation::DuplicateBath { id: b.id.clone() });
        }
        let ok = match (b.work, b.beta) {
            (true, None) => true,
            (false, Some(beta)) => beta > 0.0 && beta.is_finite(),
            _ => false,
        };
        if !ok {
            out.push(Violation::BadBeta { id: b.id.clone() });
        }
        map.insert(b.id.clone(), b.beta_or_zero());
    }
    map
}

/// Check a pair of opposite rates against local detailed balance.  `up` is
/// the rate towards the level `gap` higher.
fn balanced(rate_up: f64, rate_down: f64, beta: f64, gap: f64) -> bool {
    let expected = rate_down * (-beta * gap).exp();
    let scale = rate_up.abs().max(expected.abs());
    scale == 0.0 || (rate_up - expected).abs() <= BALANCE_RTOL * scale
}

impl MachineSpec {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.levels[i].energy
    }

    pub fn bath(&self, id: &str) -> Option<&BathSpec> {
        self.baths.iter().find(|b| b.id == id)
    }

    /// Direction of a branch, judged by the level energies.
    pub fn direction(&self, b: &Branch) -> Direction {
        if self.energy(b.to) > self.energy(b.from) {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    /// Pair of levels carrying the tracked coherence: the coupling pair, or
    /// the degenerate pair shared by collective jumps.  `None` if there is
    /// no coherent pair.
    pub fn coherent_pair(&self) -> Result<Option<(usize, usize)>> {
        if let Some(c) = &self.coupling {
            return Ok(Some((c.u, c.v)));
        }
        let pairs = self.collective_pairs();
        match pairs.len() {
            0 => Ok(None),
            1 => Ok(Some(pairs[0])),
            _ => Err(QcertError::UnsupportedTopology(format!(
                "more than one collectively coupled degenerate pair: {pairs:?}"
            ))),
        }
    }

    /// Degenerate level pairs addressed together by one collective operator.
    fn collective_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for jump in &self.jumps {
            for dir in [Direction::Up, Direction::Down] {
                let br: Vec<&Branch> = jump
                    .branches
                    .iter()
                    .filter(|b| {
                        b.from < self.n_levels()
                            && b.to < self.n_levels()
                            && self.direction(b) == dir
                            && b.rate > 0.0
                    })
                    .collect();
                for (x, a) in br.iter().enumerate() {
                    for b in &br[x + 1..] {
                        // Two branches of one operator interfere when they share
                        // a source (targets degenerate) or share a target
                        // (sources degenerate).
                        let pair = if a.from == b.from && a.to != b.to {
                            Some((a.to, b.to))
                        } else if a.to == b.to && a.from != b.from {
                            Some((a.from, b.from))
                        } else {
                            None
                        };
                        if let Some((p, q)) = pair {
                            if degenerate(&self.levels, p, q) {
                                let key = (p.min(q), p.max(q));
                                if !pairs.contains(&key) {
                                    pairs.push(key);
                                }
                            }
                        }
                    }
                }
            }
        }
        pairs
    }

    /// Coherence class implied by the level and coupling structure.
    pub fn infer_coherence_class(&self) -> CoherenceClass {
        if let Some(c) = &self.coupling {
            if c.u < self.n_levels() && c.v < self.n_levels() && degenerate(&self.levels, c.u, c.v)
            {
                return CoherenceClass::HamiltonianDegenerate;
            }
            return CoherenceClass::HamiltonianEnergetic;
        }
        if self.collective_pairs().is_empty() {
            CoherenceClass::None
        } else {
            CoherenceClass::NoiseInduced
        }
    }

    /// Report every violated modeling assumption.  Pure; calling it twice
    /// yields the same report.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let mut warnings = Vec::new();
        check_levels(&self.levels, &mut v);
        let betas = check_baths(&self.baths, &mut v);
        let n = self.n_levels();
        let tol = DEGENERACY_RTOL * energy_scale(&self.levels).max(1.0);
        let mut owner: BTreeMap<(usize, usize), String> = BTreeMap::new();
        let mut max_rate = 0.0_f64;

        for (k, jump) in self.jumps.iter().enumerate() {
            let beta = match betas.get(&jump.bath) {
                Some(b) => Some(*b),
                None => {
                    v.push(Violation::UnknownBath {
                        jump: k,
                        bath: jump.bath.clone(),
                    });
                    None
                }
            };
            if !(jump.gap > 0.0) {
                v.push(Violation::NonPositiveGap { jump: k });
            }
            for b in &jump.branches {
                if b.from >= n || b.to >= n {
                    v.push(Violation::LevelOutOfRange {
                        jump: k,
                        level: b.from.max(b.to),
                    });
                    continue;
                }
                if !(b.rate >= 0.0) {
                    v.push(Violation::NegativeRate {
                        jump: k,
                        from: b.from,
                        to: b.to,
                    });
                }
                max_rate = max_rate.max(b.rate);
                let span = (self.energy(b.to) - self.energy(b.from)).abs();
                if (span - jump.gap).abs() > tol {
                    v.push(Violation::GapMismatch {
                        jump: k,
                        from: b.from,
                        to: b.to,
                        gap: jump.gap,
                        actual: span,
                    });
                }
                let key = (b.from.min(b.to), b.from.max(b.to));
                match owner.get(&key) {
                    Some(bath) if *bath != jump.bath => {
                        let viol = Violation::SharedTransition {
                            from: key.0,
                            to: key.1,
                        };
                        if !v.contains(&viol) {
                            v.push(viol);
                        }
                    }
                    _ => {
                        owner.insert(key, jump.bath.clone());
                    }
                }
                if self.direction(b) == Direction::Down {
                    match jump.branches.iter().find(|r| r.from == b.to && r.to == b.from) {
                        None => v.push(Violation::UnpairedBranch {
                            jump: k,
                            from: b.from,
                            to: b.to,
                        }),
                        Some(rev) => {
                            if let Some(beta) = beta {
                                if !balanced(rev.rate, b.rate, beta, jump.gap) {
                                    v.push(Violation::DetailedBalance {
                                        jump: k,
                                        from: b.from,
                                        to: b.to,
                                        ratio: rev.rate / b.rate,
                                        expected: (-beta * jump.gap).exp(),
                                    });
                                }
                            }
                        }
                    }
                } else if !jump
                    .branches
                    .iter()
                    .any(|r| r.from == b.to && r.to == b.from)
                {
                    v.push(Violation::UnpairedBranch {
                        jump: k,
                        from: b.from,
                        to: b.to,
                    });
                }
            }
        }

        if let Some(c) = &self.coupling {
            if c.u == c.v || c.u >= n || c.v >= n {
                v.push(Violation::CouplingLevels { u: c.u, v: c.v });
            }
            if !(c.g >= 0.0) {
                v.push(Violation::NegativeCoupling);
            }
        }
        if v.is_empty() {
            let inferred = self.infer_coherence_class();
            if inferred != self.coherence_class {
                v.push(Violation::CoherenceClassMismatch {
                    declared: self.coherence_class.to_string(),
                    inferred: inferred.to_string(),
                });
            }
            let min_gap = self
                .jumps
                .iter()
                .map(|j| j.gap)
                .filter(|g| *g > 0.0)
                .fold(f64::INFINITY, f64::min);
            if min_gap.is_finite() {
                let limit = WEAK_COUPLING_FRACTION * min_gap;
                if max_rate > limit {
                    warnings.push(format!(
                        "largest rate {max_rate:e} exceeds {WEAK_COUPLING_FRACTION} x smallest gap ({min_gap:e}); weak-coupling assumption questionable"
                    ));
                }
                if let Some(c) = &self.coupling {
                    if c.g > limit {
                        warnings.push(format!(
                            "coupling g = {:e} exceeds {WEAK_COUPLING_FRACTION} x smallest gap ({min_gap:e}); weak-driving assumption questionable",
                            c.g
                        ));
                    }
                }
            }
        }
        ValidationReport {
            violations: v,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("machine specs always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QcertError::Config(e.to_string()))
    }
}

impl ClassicalMachineSpec {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.levels[i].energy
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        check_levels(&self.levels, &mut v);
        let betas = check_baths(&self.baths, &mut v);
        let n = self.n_levels();
        for (k, t) in self.transitions.iter().enumerate() {
            if t.i >= n || t.j >= n || t.i == t.j {
                v.push(Violation::LevelOutOfRange {
                    jump: k,
                    level: t.i.max(t.j),
                });
                continue;
            }
            if !(t.rate_ij >= 0.0) || !(t.rate_ji >= 0.0) {
                v.push(Violation::NegativeRate {
                    jump: k,
                    from: t.i,
                    to: t.j,
                });
                continue;
            }
            match &t.bath {
                None => {
                    if t.rate_ij != t.rate_ji {
                        v.push(Violation::FreeNoiseAsymmetric { transition: k });
                    }
                }
                Some(id) => match betas.get(id) {
                    None => v.push(Violation::UnknownBath {
                        jump: k,
                        bath: id.clone(),
                    }),
                    Some(&beta) => {
                        let de = self.energy(t.j) - self.energy(t.i);
                        let (up, down) = if de >= 0.0 {
                            (t.rate_ij, t.rate_ji)
                        } else {
                            (t.rate_ji, t.rate_ij)
                        };
                        if !balanced(up, down, beta, de.abs()) {
                            v.push(Violation::DetailedBalance {
                                jump: k,
                                from: t.i,
                                to: t.j,
                                ratio: up / down,
                                expected: (-beta * de.abs()).exp(),
                            });
                        }
                    }
                },
            }
        }
        ValidationReport {
            violations: v,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classical specs always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QcertError::Config(e.to_string()))
    }
}
