//! Coarse-graining an N-level machine onto the four states (u, v, m, S):
//! the coherent pair, one neighbour `m` of `v`, and a mesostate `S` lumping
//! everything else.
//!
//! Rates into the mesostate are plain sums, `Γ_iS = Σ_{j∈S} γ_ij`; rates out
//! of it are weighted by the full steady state,
//! `Γ_Si = (1/π_S) Σ_{j∈S} γ_ji π_jj`.  The reduction is therefore exact
//! only at the steady state it was built from; transient dynamics of the
//! reduced model are not meaningful.

use serde::Serialize;

use crate::error::{QcertError, Result};
use crate::liouvillian::GeneratorMatrix;
use crate::machine_model::MachineSpec;
use crate::machines::{build_generic4_generators, Generic4Params};
use crate::scalar::Real;
use crate::steady_state::SteadyState;

/// Assignment of the levels of a machine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub u: usize,
    pub v: usize,
    pub m: usize,
    pub s: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MesostateReduction<T> {
    pub partition: Partition,
    /// Effective four-state rates (plus coupling and detuning).
    pub rates: Generic4Params,
    /// Aggregated populations `(π_u, π_v, π_m, π_S)` of the full machine.
    pub aggregated: [f64; 4],
    /// Reduced quantum generator, `v ↔ m` monitored.
    pub quantum: GeneratorMatrix<T>,
    /// Reduced classical generator, `v ↔ m` monitored.
    pub classical: GeneratorMatrix<T>,
}

/// Total rate of `from → to` over all jumps.
fn rate(spec: &MachineSpec, from: usize, to: usize) -> f64 {
    spec.jumps
        .iter()
        .flat_map(|j| j.branches.iter())
        .filter(|b| b.from == from && b.to == to)
        .map(|b| b.rate)
        .sum()
}

/// Build the reduction from a machine and its full steady state.
pub fn reduce<T: Real>(
    spec: &MachineSpec,
    full: &SteadyState<T>,
    partition: &Partition,
) -> Result<MesostateReduction<T>> {
    let n = spec.n_levels();
    let Partition { u, v, m, s } = partition;
    let (u, v, m) = (*u, *v, *m);
    let mut seen = vec![false; n];
    for &i in [u, v, m].iter().chain(s.iter()) {
        if i >= n || seen[i] {
            return Err(QcertError::Config(format!(
                "level {i} is out of range or assigned twice"
            )));
        }
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|x| !x) {
        return Err(QcertError::Config(format!(
            "partition misses level {missing}"
        )));
    }
    if s.is_empty() {
        return Err(QcertError::Config("mesostate S is empty".into()));
    }
    let coupling = spec.coupling.ok_or_else(|| QcertError::WrongClass {
        expected: "hamiltonian-*".into(),
        found: spec.coherence_class.to_string(),
    })?;
    if !((coupling.u == u && coupling.v == v) || (coupling.u == v && coupling.v == u)) {
        return Err(QcertError::Config(
            "u and v must be the coupled pair".into(),
        ));
    }
    if rate(spec, v, m) == 0.0 && rate(spec, m, v) == 0.0 {
        return Err(QcertError::Config(format!(
            "level m = {m} is not connected to v = {v} by a bath transition"
        )));
    }
    let pops = full.populations_f64();
    let pi_s: f64 = s.iter().map(|&j| pops[j]).sum();
    let into_s = |i: usize| -> f64 { s.iter().map(|&j| rate(spec, i, j)).sum() };
    let out_of_s = |i: usize| -> f64 {
        if pi_s == 0.0 {
            0.0
        } else {
            s.iter().map(|&j| rate(spec, j, i) * pops[j]).sum::<f64>() / pi_s
        }
    };
    let detuning = if coupling.u == u { coupling.detuning } else { -coupling.detuning };
    let rates = Generic4Params {
        gamma_um: rate(spec, u, m),
        gamma_mu: rate(spec, m, u),
        gamma_vm: rate(spec, v, m),
        gamma_mv: rate(spec, m, v),
        gamma_us: into_s(u),
        gamma_su: out_of_s(u),
        gamma_vs: into_s(v),
        gamma_sv: out_of_s(v),
        gamma_ms: into_s(m),
        gamma_sm: out_of_s(m),
        g: coupling.g,
        detuning,
        unicycle: false,
        ..Generic4Params::default()
    };
    let (quantum, classical) = build_generic4_generators::<T>(&rates)?;
    Ok(MesostateReduction {
        partition: partition.clone(),
        rates,
        aggregated: [pops[u], pops[v], pops[m], pi_s],
        quantum,
        classical,
    })
}
