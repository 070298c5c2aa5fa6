//! Brute-force Lindblad oracle on the full N²-dimensional operator space.
//!
//! Nothing here reuses the tracked-basis machinery: the superoperator is
//! assembled element by element from the jump operators, the steady state
//! comes from a bordered linear solve, and the first two cumulants of a
//! counted bath come from Rayleigh–Schrödinger perturbation theory of the
//! tilted generator,
//!
//! ```text
//! c1 = tr L₁ρ,   c2 = tr L₂ρ + 2 tr L₁x,   L₀x = −(L₁ − c1)ρ,  tr x = 0.
//! ```
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use qcert::machine_model::{ClassicalMachineSpec, Direction, MachineSpec};

/// A jump operator as `(to, from, amplitude)` entries plus its counting sign
/// (zero when not monitored).
pub struct DenseJump {
    pub entries: Vec<(usize, usize, f64)>,
    pub nu: i32,
}

pub struct DenseModel {
    pub n: usize,
    pub h: DMatrix<C>,
    pub jumps: Vec<DenseJump>,
}

#[derive(Debug, Clone, Copy)]
pub struct DenseStats {
    pub c1: f64,
    pub c2: f64,
}

impl DenseModel {
    /// Interaction-picture model of a quantum spec, counting `bath`.
    pub fn quantum(spec: &MachineSpec, bath: &str) -> Self {
        let n = spec.n_levels();
        let mut h = DMatrix::zeros(n, n);
        if let Some(c) = &spec.coupling {
            h[(c.u, c.u)] = C::new(-c.detuning, 0.0);
            h[(c.u, c.v)] = C::new(c.g, 0.0);
            h[(c.v, c.u)] = C::new(c.g, 0.0);
        }
        let mut jumps = Vec::new();
        for j in &spec.jumps {
            for dir in [Direction::Up, Direction::Down] {
                let entries: Vec<_> = j
                    .branches
                    .iter()
                    .filter(|b| spec.direction(b) == dir && b.rate > 0.0)
                    .map(|b| (b.to, b.from, b.rate.sqrt()))
                    .collect();
                if entries.is_empty() {
                    continue;
                }
                let nu = if j.bath == bath { dir.counting_sign() } else { 0 };
                jumps.push(DenseJump { entries, nu });
            }
        }
        DenseModel { n, h, jumps }
    }

    /// Rate network as rank-one jumps, counting `bath`.
    pub fn classical(spec: &ClassicalMachineSpec, bath: &str) -> Self {
        let n = spec.n_levels();
        let mut jumps = Vec::new();
        for t in &spec.transitions {
            for (from, to, rate) in [(t.i, t.j, t.rate_ij), (t.j, t.i, t.rate_ji)] {
                if rate <= 0.0 {
                    continue;
                }
                let up = spec.energy(to) > spec.energy(from);
                let nu = match (&t.bath, up) {
                    (Some(b), true) if b == bath => 1,
                    (Some(b), false) if b == bath => -1,
                    _ => 0,
                };
                jumps.push(DenseJump { entries: vec![(to, from, rate.sqrt())], nu });
            }
        }
        DenseModel { n, h: DMatrix::zeros(n, n), jumps }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// `ρ ↦ Σ_k w(ν_k) L_k ρ L_k†`.
    fn jump_super(&self, w: impl Fn(i32) -> f64) -> DMatrix<C> {
        let d = self.n * self.n;
        let mut s = DMatrix::zeros(d, d);
        for jump in &self.jumps {
            let f = w(jump.nu);
            if f == 0.0 {
                continue;
            }
            for &(a, b, la) in &jump.entries {
                for &(c, e, lc) in &jump.entries {
                    // (L ρ L†)_{ac} += L_ab ρ_be L_ce
                    s[(self.idx(a, c), self.idx(b, e))] += C::new(f * la * lc, 0.0);
                }
            }
        }
        s
    }

    pub fn generator(&self) -> DMatrix<C> {
        let n = self.n;
        let mut k = self.h.map(|z| z * C::new(0.0, -1.0));
        for jump in &self.jumps {
            for &(a, b, la) in &jump.entries {
                for &(a2, e, lb) in &jump.entries {
                    if a == a2 {
                        k[(b, e)] -= C::new(0.5 * la * lb, 0.0);
                    }
                }
            }
        }
        // ρ ↦ Kρ + ρK†
        let d = n * n;
        let mut s = DMatrix::zeros(d, d);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    s[(self.idx(i, j), self.idx(l, j))] += k[(i, l)];
                    s[(self.idx(i, j), self.idx(i, l))] += k[(j, l)].conj();
                }
            }
        }
        s + self.jump_super(|_| 1.0)
    }

    fn trace(&self, x: &DMatrix<C>) -> C {
        (0..self.n).map(|i| x[(self.idx(i, i), 0)]).sum()
    }

    /// Solve `L₀x = b` under `tr x = t`, replacing the redundant `ρ₀₀` row.
    fn bordered_solve(&self, l0: &DMatrix<C>, mut b: DMatrix<C>, t: C) -> DMatrix<C> {
        let mut a = l0.clone();
        for c in 0..a.ncols() {
            a[(0, c)] = C::new(0.0, 0.0);
        }
        for i in 0..self.n {
            a[(0, self.idx(i, i))] = C::new(1.0, 0.0);
        }
        b[(0, 0)] = t;
        a.lu().solve(&b).expect("dense generator is singular")
    }

    pub fn steady(&self) -> DMatrix<C> {
        let l0 = self.generator();
        let d = self.n * self.n;
        self.bordered_solve(&l0, DMatrix::zeros(d, 1), C::new(1.0, 0.0))
    }

    pub fn populations(&self) -> Vec<f64> {
        let rho = self.steady();
        (0..self.n).map(|i| rho[(self.idx(i, i), 0)].re).collect()
    }

    pub fn cumulants(&self) -> DenseStats {
        let l0 = self.generator();
        let rho = self.steady();
        let l1 = self.jump_super(|nu| nu as f64);
        let l2 = self.jump_super(|nu| (nu * nu) as f64);
        let l1r = &l1 * &rho;
        let c1 = self.trace(&l1r);
        let rhs = -(l1r - &rho * c1);
        let x = self.bordered_solve(&l0, rhs, C::new(0.0, 0.0));
        let c2 = self.trace(&(&l2 * &rho)) + self.trace(&(&l1 * &x)) * 2.0;
        DenseStats { c1: c1.re, c2: c2.re }
    }
}
