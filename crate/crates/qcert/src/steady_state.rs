//! Steady states of tracked generators and closed-form coherence checks.

use num_complex::Complex;

use crate::error::{QcertError, Result};
use crate::linalg::{inf_norm, FullPivLu};
use crate::liouvillian::{Component, GeneratorMatrix, TrackedBasis};
use crate::machine_model::{Direction, MachineSpec};
use crate::scalar::Real;

/// Populations below zero by less than this are rounding and get clipped.
pub const CLIP_TOL: f64 = 1e-12;
/// Relative pivot size treated as zero when counting kernel dimensions.
pub const KERNEL_RTOL: f64 = 1e-16;
/// Residual bound `‖W·π‖∞ ≤ RESIDUAL_RTOL·‖W‖∞`.
pub const RESIDUAL_RTOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState<T> {
    pub basis: TrackedBasis,
    pub values: Vec<T>,
}

impl<T: Real> SteadyState<T> {
    pub fn population(&self, level: usize) -> T {
        self.basis
            .population_index(level)
            .map(|k| self.values[k])
            .unwrap_or_else(T::zero)
    }

    pub fn populations(&self) -> Vec<T> {
        let n = self.basis.n_populations();
        (0..n).map(|i| self.population(i)).collect()
    }

    /// `ρ_uv` of the tracked pair; zero when nothing is tracked.
    pub fn coherence(&self) -> Complex<T> {
        let mut z = Complex::new(T::zero(), T::zero());
        for (c, &x) in self.basis.components.iter().zip(&self.values) {
            match c {
                Component::ReCoherence(..) => z.re = x,
                Component::ImCoherence(..) => z.im = x,
                Component::Population(_) => {}
            }
        }
        z
    }

    /// `|Σ π_ii − 1|`.
    pub fn trace_error(&self) -> f64 {
        let s = self.populations().into_iter().fold(T::zero(), |a, b| a + b);
        (s - T::one()).abs().to_f64()
    }

    pub fn min_population(&self) -> f64 {
        self.populations()
            .into_iter()
            .map(|p| p.to_f64())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.to_f64()).collect()
    }

    pub fn populations_f64(&self) -> Vec<f64> {
        self.populations().into_iter().map(|x| x.to_f64()).collect()
    }
}

/// Dimension of the (numerical) kernel of the χ = 0 generator.
pub fn kernel_dimension<T: Real>(gen: &GeneratorMatrix<T>) -> usize {
    FullPivLu::new(gen.value(), gen.dim()).nullity(T::from_f64(KERNEL_RTOL).max(
        T::epsilon() * T::from_f64(1e3),
    ))
}

/// Solve `W π = 0` with `Σ π_ii = 1`.
pub fn solve_steady<T: Real>(gen: &GeneratorMatrix<T>) -> Result<SteadyState<T>> {
    let n = gen.dim();
    let w = gen.value();
    let kdim = kernel_dimension(gen);
    if kdim != 1 {
        return Err(QcertError::DegenerateKernel { dim: kdim });
    }
    let basis = gen.basis().clone();
    let first_pop = basis
        .components
        .iter()
        .position(|c| matches!(c, Component::Population(_)))
        .ok_or_else(|| QcertError::Config("generator has no populations".into()))?;

    // Population rows sum to zero, so any one of them is redundant; replace
    // it by the normalisation condition.
    let mut a = w.clone();
    for (c, comp) in basis.components.iter().enumerate() {
        a[first_pop * n + c] = match comp {
            Component::Population(_) => T::one(),
            _ => T::zero(),
        };
    }
    let mut b = vec![T::zero(); n];
    b[first_pop] = T::one();
    let mut x = FullPivLu::new(a, n)
        .solve(&b)
        .ok_or_else(|| QcertError::Conditioning("normalised steady-state system is singular".into()))?;

    let norm = inf_norm(&w, n);
    let residual = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| w[r * n + c] * x[c])
                .fold(T::zero(), |s, t| s + t)
                .abs()
        })
        .fold(T::zero(), |m, t| m.max(t));
    if residual > T::from_f64(RESIDUAL_RTOL) * norm {
        return Err(QcertError::Conditioning(format!(
            "steady-state residual {:e} exceeds {RESIDUAL_RTOL:e}·‖W‖",
            residual.to_f64()
        )));
    }

    let clip = T::from_f64(CLIP_TOL);
    for (c, comp) in basis.components.iter().enumerate() {
        if let Component::Population(i) = comp {
            if x[c] < T::zero() {
                if x[c] < -clip {
                    return Err(QcertError::Conditioning(format!(
                        "population of level {i} is {:e}",
                        x[c].to_f64()
                    )));
                }
                x[c] = T::zero();
            }
        }
    }
    Ok(SteadyState { basis, values: x })
}

/// Total rate out of `level` through all bath branches.
fn escape_rate(spec: &MachineSpec, level: usize) -> f64 {
    spec.jumps
        .iter()
        .flat_map(|j| j.branches.iter())
        .filter(|b| b.from == level)
        .map(|b| b.rate)
        .sum()
}

/// Closed-form steady coherence of a Hamiltonian-coupled pair,
/// `π_uv = 2g(π_vv − π_uu) / (2Δ_d + iΣ_j(γ_uj + γ_vj))`.
pub fn steady_coherence_hamiltonian(
    spec: &MachineSpec,
    populations: &[f64],
) -> Result<Complex<f64>> {
    let c = spec.coupling.ok_or_else(|| QcertError::WrongClass {
        expected: "hamiltonian-*".into(),
        found: spec.coherence_class.to_string(),
    })?;
    let sigma = escape_rate(spec, c.u) + escape_rate(spec, c.v);
    let num = Complex::new(2.0 * c.g * (populations[c.v] - populations[c.u]), 0.0);
    Ok(num / Complex::new(2.0 * c.detuning, sigma))
}

/// Closed-form steady coherence of a collectively driven degenerate pair,
///
/// `π_uv = [2Σ_i √(γ_iu γ_iv) π_ii − Σ_j √(γ_uj γ_vj)(π_uu + π_vv)] / Σ_j(γ_uj + γ_vj)`,
///
/// where the first sum runs over collective jumps *into* the pair and the
/// second over collective jumps *out of* it.
pub fn steady_coherence_nic(spec: &MachineSpec, populations: &[f64]) -> Result<f64> {
    let Some((u, v)) = spec.coherent_pair()? else {
        return Err(QcertError::WrongClass {
            expected: "noise-induced".into(),
            found: spec.coherence_class.to_string(),
        });
    };
    if spec.coupling.is_some() {
        return Err(QcertError::WrongClass {
            expected: "noise-induced".into(),
            found: spec.coherence_class.to_string(),
        });
    }
    let mut feed = 0.0;
    let mut drain = 0.0;
    for jump in &spec.jumps {
        for dir in [Direction::Up, Direction::Down] {
            let br: Vec<_> = jump
                .branches
                .iter()
                .filter(|b| spec.direction(b) == dir)
                .collect();
            for a in &br {
                for b in &br {
                    // into the pair from a common source i
                    if a.from == b.from && a.to == u && b.to == v {
                        feed += 2.0 * (a.rate * b.rate).sqrt() * populations[a.from];
                    }
                    // out of the pair into a common target j
                    if a.to == b.to && a.from == u && b.from == v {
                        drain += (a.rate * b.rate).sqrt() * (populations[u] + populations[v]);
                    }
                }
            }
        }
    }
    let sigma = escape_rate(spec, u) + escape_rate(spec, v);
    Ok((feed - drain) / sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::build_quantum_generator;
    use crate::machine_model::{BathSpec, Branch, CoherenceClass, JumpSpec, LevelSpec};

    #[test]
    fn two_level_gibbs_ratio() {
        let beta = 0.7;
        let e1 = 1.3;
        let down = 2e-3;
        let spec = MachineSpec {
            levels: vec![
                LevelSpec { index: 0, energy: 0.0, label: None },
                LevelSpec { index: 1, energy: e1, label: None },
            ],
            baths: vec![BathSpec::thermal("b", beta)],
            jumps: vec![JumpSpec {
                bath: "b".into(),
                gap: e1,
                branches: vec![
                    Branch { from: 1, to: 0, rate: down },
                    Branch { from: 0, to: 1, rate: down * (-beta * e1).exp() },
                ],
            }],
            coupling: None,
            coherence_class: CoherenceClass::None,
        };
        let w = build_quantum_generator::<f64>(&spec).unwrap();
        let s = solve_steady(&w).unwrap();
        let ratio = s.population(1) / s.population(0);
        assert!((ratio - (-beta * e1).exp()).abs() < 1e-14);
        assert!(s.trace_error() < 1e-15);
    }
}
