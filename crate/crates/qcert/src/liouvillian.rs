//! Generator assembly over the tracked state vector.
//!
//! The tracked vector holds every population plus the real and/or imaginary
//! part of the single coherence that the machine sustains.  The quantum
//! generator is obtained by restricting the full Lindblad superoperator to
//! that subspace (and failing loudly if the restriction is not closed), so
//! no equation of motion is typed in by hand.
//!
//! Jump gain terms are kept separately from everything else so they can be
//! dressed with counting phases `e^{iνχ}` after assembly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{QcertError, Result};
use crate::jet::Jet2;
use crate::machine_model::{ClassicalMachineSpec, Direction, MachineSpec};
use crate::scalar::{Field, Real};

/// Largest generator dimension accepted by the cumulant kernels.
pub const MAX_DIM: usize = 12;

/// Relative size below which a superoperator element counts as zero when
/// deciding which coherence components survive.
const STRUCTURAL_ZERO: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Population(usize),
    ReCoherence(usize, usize),
    ImCoherence(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackedBasis {
    pub components: Vec<Component>,
}

impl TrackedBasis {
    pub fn populations(n: usize) -> Self {
        TrackedBasis {
            components: (0..n).map(Component::Population).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn position(&self, c: Component) -> Option<usize> {
        self.components.iter().position(|&x| x == c)
    }

    pub fn population_index(&self, level: usize) -> Option<usize> {
        self.position(Component::Population(level))
    }

    pub fn n_populations(&self) -> usize {
        self.components
            .iter()
            .filter(|c| matches!(c, Component::Population(_)))
            .count()
    }

    /// The coherent pair, if any coherence component is tracked.
    pub fn coherent_pair(&self) -> Option<(usize, usize)> {
        self.components.iter().find_map(|c| match *c {
            Component::ReCoherence(u, v) | Component::ImCoherence(u, v) => Some((u, v)),
            Component::Population(_) => None,
        })
    }
}

/// One dissipative channel: a (possibly collective) jump operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelInfo {
    /// Index of the originating `JumpSpec` or `ClassicalTransition`.
    pub source: usize,
    pub direction: Direction,
    /// Bath label; `None` for free-noise transitions.
    pub bath: Option<String>,
}

/// A jump gain term `value · ρ[col]` feeding `row`, dressed as
/// `e^{i·winding·χ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainEntry<T> {
    pub row: usize,
    pub col: usize,
    pub value: T,
    pub channel: usize,
    /// `(from, to)` when the entry is a single population-to-population
    /// branch.
    pub branch: Option<(usize, usize)>,
    pub winding: i32,
}

/// What has been dressed with the counting field, for reports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Monitor {
    Channel(usize, i32),
    Branch { from: usize, to: usize, nu: i32 },
    Bath(String),
}

/// Square generator over a [`TrackedBasis`], real at χ = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix<T> {
    basis: TrackedBasis,
    rest: Vec<T>,
    gains: Vec<GainEntry<T>>,
    channels: Vec<ChannelInfo>,
    monitored: Vec<Monitor>,
}

/// `e^{ix}` by its Taylor series, evaluated in `T`.
pub fn cis<T: Real>(x: T) -> Complex<T> {
    if x.magnitude() > 4.0 {
        let xf = x.to_f64();
        return Complex::new(T::from_f64(xf.cos()), T::from_f64(xf.sin()));
    }
    let (mut re, mut im) = (T::one(), T::zero());
    let mut term = T::one();
    for k in 1..80 {
        term = term * x / T::from_usize(k);
        if term.is_zero() || term.abs() < T::epsilon() * T::from_f64(1e-3) {
            break;
        }
        match k % 4 {
            1 => im = im + term,
            2 => re = re - term,
            3 => im = im - term,
            _ => re = re + term,
        }
    }
    Complex::new(re, im)
}

impl<T: Field> GeneratorMatrix<T> {
    /// Assemble from explicit parts; used for literal transcriptions of
    /// published matrices and by the mesostate reduction.
    pub fn from_parts(
        basis: TrackedBasis,
        rest: Vec<T>,
        gains: Vec<GainEntry<T>>,
        channels: Vec<ChannelInfo>,
    ) -> Result<Self> {
        let n = basis.len();
        if rest.len() != n * n {
            return Err(QcertError::Config(format!(
                "rest matrix has {} entries, expected {}",
                rest.len(),
                n * n
            )));
        }
        if n > MAX_DIM {
            return Err(QcertError::DimensionOverflow { dim: n, max: MAX_DIM });
        }
        for g in &gains {
            if g.row >= n || g.col >= n || g.channel >= channels.len() {
                return Err(QcertError::Config(format!(
                    "gain entry ({}, {}) on channel {} is out of range",
                    g.row, g.col, g.channel
                )));
            }
        }
        Ok(GeneratorMatrix {
            basis,
            rest,
            gains,
            channels,
            monitored: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &TrackedBasis {
        &self.basis
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        &self.channels
    }

    pub fn gains(&self) -> &[GainEntry<T>] {
        &self.gains
    }

    pub fn monitored(&self) -> &[Monitor] {
        &self.monitored
    }

    pub fn is_dressed(&self) -> bool {
        self.gains.iter().any(|g| g.winding != 0)
    }

    /// The real generator at χ = 0.
    pub fn value(&self) -> Vec<T> {
        let n = self.dim();
        let mut w = self.rest.clone();
        for g in &self.gains {
            w[g.row * n + g.col] = w[g.row * n + g.col] + g.value;
        }
        w
    }

    /// Entrywise jets in χ.
    pub fn jets(&self) -> Vec<Jet2<T>> {
        let mut w: Vec<Jet2<T>> = self.rest.iter().map(|&x| Jet2::constant(x)).collect();
        let n = self.dim();
        for g in &self.gains {
            let k = g.row * n + g.col;
            w[k] += Jet2::phase(g.winding).scale_real(g.value);
        }
        w
    }

    fn add_monitor(&mut self, m: Monitor) {
        self.monitored.push(m);
    }

    /// Dress every gain entry of one channel with `e^{iνχ}`.
    pub fn dress_channel(mut self, channel: usize, nu: i32) -> Result<Self> {
        if channel >= self.channels.len() {
            return Err(QcertError::NotFound(format!("channel {channel}")));
        }
        for g in self.gains.iter_mut().filter(|g| g.channel == channel) {
            g.winding += nu;
        }
        self.add_monitor(Monitor::Channel(channel, nu));
        Ok(self)
    }

    /// Dress the single population branch `from → to` with `e^{iνχ}`.
    ///
    /// Refused when the branch belongs to a collective channel that also
    /// feeds coherences, because such jumps cannot be attributed to one
    /// branch.
    pub fn dress_branch(mut self, from: usize, to: usize, nu: i32) -> Result<Self> {
        let (Some(_), Some(_)) = (
            self.basis.population_index(from),
            self.basis.population_index(to),
        ) else {
            return Err(QcertError::NotFound(format!("branch {from}->{to}")));
        };
        let mut channel = None;
        for g in &self.gains {
            if g.branch == Some((from, to)) {
                channel = Some(g.channel);
            }
        }
        let Some(ch) = channel else {
            return Err(QcertError::NotFound(format!("branch {from}->{to}")));
        };
        if self
            .gains
            .iter()
            .any(|g| g.channel == ch && g.branch.is_none())
        {
            return Err(QcertError::UnsupportedTopology(format!(
                "branch {from}->{to} is part of a collective jump that feeds coherences"
            )));
        }
        for g in self.gains.iter_mut().filter(|g| g.branch == Some((from, to))) {
            g.winding += nu;
        }
        self.add_monitor(Monitor::Branch { from, to, nu });
        Ok(self)
    }

    /// Count the quanta absorbed from a bath: upward channels `+1`,
    /// downward channels `−1`.
    pub fn monitor_bath(mut self, bath: &str) -> Result<Self> {
        let hits: Vec<(usize, i32)> = self
            .channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.bath.as_deref() == Some(bath))
            .map(|(k, c)| (k, c.direction.counting_sign()))
            .collect();
        if hits.is_empty() {
            return Err(QcertError::NotFound(format!("bath '{bath}'")));
        }
        for (ch, nu) in hits {
            for g in self.gains.iter_mut().filter(|g| g.channel == ch) {
                g.winding += nu;
            }
        }
        self.add_monitor(Monitor::Bath(bath.to_string()));
        Ok(self)
    }

    /// Remove all counting phases.
    pub fn undressed(mut self) -> Self {
        for g in &mut self.gains {
            g.winding = 0;
        }
        self.monitored.clear();
        self
    }

    /// Text dump: a `dim N` header, then one line per entry in row-major
    /// order with `re im` pairs for `v0 v1 v2`.
    pub fn debug_dump(&self) -> String {
        let n = self.dim();
        let mut s = format!("dim {n}\n");
        for (k, j) in self.jets().iter().enumerate() {
            let _ = writeln!(
                s,
                "{} {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                k / n,
                k % n,
                j.v0.re.to_f64(),
                j.v0.im.to_f64(),
                j.v1.re.to_f64(),
                j.v1.im.to_f64(),
                j.v2.re.to_f64(),
                j.v2.im.to_f64()
            );
        }
        s
    }
}

impl<T: Real> GeneratorMatrix<T> {
    /// The complex generator at a finite counting field.
    pub fn at(&self, chi: T) -> Vec<Complex<T>> {
        let n = self.dim();
        let mut w: Vec<Complex<T>> = self
            .rest
            .iter()
            .map(|&x| Complex::new(x, T::zero()))
            .collect();
        let mut phases: BTreeMap<i32, Complex<T>> = BTreeMap::new();
        for g in &self.gains {
            let p = *phases
                .entry(g.winding)
                .or_insert_with(|| cis(chi * T::from_f64(g.winding as f64)));
            let k = g.row * n + g.col;
            w[k] = w[k] + p.scale(g.value);
        }
        w
    }
}

// ---------------------------------------------------------------------------
// Quantum assembly
// ---------------------------------------------------------------------------

/// A jump operator as a sparse list of `(to, from, amplitude)` entries.
struct JumpOp<T> {
    entries: Vec<(usize, usize, T)>,
    info: ChannelInfo,
}

fn jump_operators<T: Real>(spec: &MachineSpec) -> Vec<JumpOp<T>> {
    let mut ops = Vec::new();
    for (k, jump) in spec.jumps.iter().enumerate() {
        for dir in [Direction::Up, Direction::Down] {
            let entries: Vec<(usize, usize, T)> = jump
                .branches
                .iter()
                .filter(|b| spec.direction(b) == dir && b.rate > 0.0)
                .map(|b| (b.to, b.from, T::from_f64(b.rate).sqrt()))
                .collect();
            if !entries.is_empty() {
                ops.push(JumpOp {
                    entries,
                    info: ChannelInfo {
                        source: k,
                        direction: dir,
                        bath: Some(jump.bath.clone()),
                    },
                });
            }
        }
    }
    ops
}

/// Complex superoperator block: rows over all N² elements, columns over the
/// candidate tracked elements.
struct Block<T> {
    n: usize,
    cols: Vec<(usize, usize)>,
    k: Vec<Complex<T>>,
}

impl<T: Real> Block<T> {
    fn new(n: usize, cols: &[(usize, usize)]) -> Self {
        Block {
            n,
            cols: cols.to_vec(),
            k: vec![Complex::zero(); n * n * cols.len()],
        }
    }

    fn add(&mut self, a: usize, b: usize, col: usize, z: Complex<T>) {
        let idx = (a * self.n + b) * self.cols.len() + col;
        self.k[idx] = self.k[idx] + z;
    }

    fn get(&self, a: usize, b: usize, col: usize) -> Complex<T> {
        self.k[(a * self.n + b) * self.cols.len() + col]
    }

    /// `X ρ` and `ρ Y` terms: d ρ_ab += fl·X_ac ρ_cb + fr·ρ_ad Y_db.
    fn add_left_right(&mut self, x: &[Complex<T>], fl: Complex<T>, fr: Complex<T>) {
        let n = self.n;
        for col in 0..self.cols.len() {
            let (c, d) = self.cols[col];
            for a in 0..n {
                let xac = x[a * n + c];
                if !xac.is_zero() {
                    self.add(a, d, col, fl * xac);
                }
            }
            for b in 0..n {
                let ydb = x[d * n + b];
                if !ydb.is_zero() {
                    self.add(c, b, col, fr * ydb);
                }
            }
        }
    }

    /// `L ρ L†` for a real sparse `L`.
    fn add_sandwich(&mut self, entries: &[(usize, usize, T)]) {
        for col in 0..self.cols.len() {
            let (c, d) = self.cols[col];
            for &(a, c2, la) in entries {
                if c2 != c {
                    continue;
                }
                for &(b, d2, lb) in entries {
                    if d2 != d {
                        continue;
                    }
                    self.add(a, b, col, Complex::new(la * lb, T::zero()));
                }
            }
        }
    }
}

/// Tracked elements before the Re/Im change of variables.
fn candidate_elements(n: usize, pair: Option<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    if let Some((u, v)) = pair {
        e.push((u, v));
        e.push((v, u));
    }
    e
}

/// Map a complex block restricted to the candidate elements onto the real
/// population/Re/Im layout (N + 2 components when a pair exists).
fn realify<T: Real>(
    block: &Block<T>,
    pair: Option<(usize, usize)>,
    scale: T,
) -> Result<Vec<T>> {
    let n = block.n;
    let m = n + if pair.is_some() { 2 } else { 0 };
    let mut out = vec![T::zero(); m * m];
    let half = T::from_f64(0.5);
    let tol = scale * T::from_f64(1e-12);
    let i_unit = Complex::new(T::zero(), T::one());

    // Columns in the real layout, expressed through the complex columns.
    let col_value = |a: usize, b: usize, rc: usize| -> Complex<T> {
        if rc < n {
            block.get(a, b, rc)
        } else if rc == n {
            block.get(a, b, n) + block.get(a, b, n + 1)
        } else {
            (block.get(a, b, n) - block.get(a, b, n + 1)) * i_unit
        }
    };

    for rc in 0..m {
        for rr in 0..m {
            let z = if rr < n {
                col_value(rr, rr, rc)
            } else {
                let (u, v) = pair.expect("coherence row implies a pair");
                let zuv = col_value(u, v, rc);
                let zvu = col_value(v, u, rc);
                if rr == n {
                    (zuv + zvu).scale(half)
                } else {
                    ((zuv - zvu) * -i_unit).scale(half)
                }
            };
            if z.im.abs() > tol {
                return Err(QcertError::UnsupportedTopology(format!(
                    "generator entry ({rr}, {rc}) is not real"
                )));
            }
            out[rr * m + rc] = z.re;
        }
    }
    Ok(out)
}

/// Fail if a tracked element feeds an untracked one.
fn check_closure<T: Real>(block: &Block<T>, tracked: &[(usize, usize)], scale: T) -> Result<()> {
    let tol = scale * T::from_f64(STRUCTURAL_ZERO);
    for a in 0..block.n {
        for b in 0..block.n {
            if tracked.contains(&(a, b)) {
                continue;
            }
            for col in 0..block.cols.len() {
                let z = block.get(a, b, col);
                if z.re.abs() > tol || z.im.abs() > tol {
                    let (c, d) = block.cols[col];
                    return Err(QcertError::UnsupportedTopology(format!(
                        "element ρ[{c},{d}] feeds the untracked coherence ρ[{a},{b}]"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Build the tracked generator of a quantum machine (rotating frame).
pub fn build_quantum_generator<T: Real>(spec: &MachineSpec) -> Result<GeneratorMatrix<T>> {
    spec.validate().into_result()?;
    let n = spec.n_levels();
    let pair = spec.coherent_pair()?;
    let elements = candidate_elements(n, pair);
    let ops = jump_operators::<T>(spec);

    // Scale for structural-zero decisions: the largest rate or coupling.
    let mut scale = T::zero();
    for op in &ops {
        for &(_, _, a) in &op.entries {
            scale = scale.max(a * a);
        }
    }
    if let Some(c) = &spec.coupling {
        scale = scale.max(T::from_f64(c.g.abs()));
        scale = scale.max(T::from_f64(c.detuning.abs()));
    }
    if scale.is_zero() {
        scale = T::one();
    }

    // Coherent part plus anticommutators form the undressable block.
    let mut rest = Block::new(n, &elements);
    if let Some(c) = &spec.coupling {
        let mut h = vec![Complex::<T>::zero(); n * n];
        h[c.u * n + c.u] = Complex::new(-T::from_f64(c.detuning), T::zero());
        h[c.u * n + c.v] = Complex::new(T::from_f64(c.g), T::zero());
        h[c.v * n + c.u] = Complex::new(T::from_f64(c.g), T::zero());
        let i_unit = Complex::new(T::zero(), T::one());
        rest.add_left_right(&h, -i_unit, i_unit);
    }
    let mut ldl = vec![Complex::<T>::zero(); n * n];
    for op in &ops {
        for &(a, c, la) in &op.entries {
            for &(b, d, lb) in &op.entries {
                if a == b {
                    ldl[c * n + d] = ldl[c * n + d] + Complex::new(la * lb, T::zero());
                }
            }
        }
    }
    let minus_half = Complex::new(T::from_f64(-0.5), T::zero());
    rest.add_left_right(&ldl, minus_half, minus_half);
    check_closure(&rest, &elements, scale)?;

    let mut chan_blocks = Vec::with_capacity(ops.len());
    for op in &ops {
        let mut b = Block::new(n, &elements);
        b.add_sandwich(&op.entries);
        check_closure(&b, &elements, scale)?;
        chan_blocks.push(b);
    }

    let rest_real = realify(&rest, pair, scale)?;
    let chan_real: Vec<Vec<T>> = chan_blocks
        .iter()
        .map(|b| realify(b, pair, scale))
        .collect::<Result<_>>()?;

    // Keep only the components connected to the populations.
    let m = n + if pair.is_some() { 2 } else { 0 };
    let tol = scale * T::from_f64(STRUCTURAL_ZERO);
    let nonzero = |r: usize, c: usize| {
        rest_real[r * m + c].abs() > tol || chan_real.iter().any(|w| w[r * m + c].abs() > tol)
    };
    let mut keep = vec![false; m];
    for k in keep.iter_mut().take(n) {
        *k = true;
    }
    loop {
        let mut changed = false;
        for a in 0..m {
            if keep[a] {
                continue;
            }
            if (0..m).any(|b| keep[b] && (nonzero(a, b) || nonzero(b, a))) {
                keep[a] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let kept: Vec<usize> = (0..m).filter(|&k| keep[k]).collect();
    let components: Vec<Component> = kept
        .iter()
        .map(|&k| {
            if k < n {
                Component::Population(k)
            } else {
                let (u, v) = pair.expect("coherence component implies a pair");
                if k == n {
                    Component::ReCoherence(u, v)
                } else {
                    Component::ImCoherence(u, v)
                }
            }
        })
        .collect();
    let dim = kept.len();
    if dim > MAX_DIM {
        return Err(QcertError::DimensionOverflow { dim, max: MAX_DIM });
    }

    let mut rest_out = vec![T::zero(); dim * dim];
    for (i, &r) in kept.iter().enumerate() {
        for (j, &c) in kept.iter().enumerate() {
            rest_out[i * dim + j] = rest_real[r * m + c];
        }
    }
    let mut gains = Vec::new();
    let mut channels = Vec::new();
    for (ch, (op, w)) in ops.iter().zip(&chan_real).enumerate() {
        channels.push(op.info.clone());
        for (i, &r) in kept.iter().enumerate() {
            for (j, &c) in kept.iter().enumerate() {
                let value = w[r * m + c];
                if value.is_zero() {
                    continue;
                }
                // Losses never sit in the jump term, so every diagonal
                // population entry here is a genuine branch.
                let branch = if r < n && c < n { Some((c, r)) } else { None };
                gains.push(GainEntry {
                    row: i,
                    col: j,
                    value,
                    channel: ch,
                    branch,
                    winding: 0,
                });
            }
        }
    }
    GeneratorMatrix::from_parts(TrackedBasis { components }, rest_out, gains, channels)
}

/// Build the population-only generator of a classical rate network.
pub fn build_classical_generator<T: Real>(
    spec: &ClassicalMachineSpec,
) -> Result<GeneratorMatrix<T>> {
    spec.validate().into_result()?;
    let n = spec.n_levels();
    if n > MAX_DIM {
        return Err(QcertError::DimensionOverflow { dim: n, max: MAX_DIM });
    }
    let mut rest = vec![T::zero(); n * n];
    let mut gains = Vec::new();
    let mut channels = Vec::new();
    for (k, t) in spec.transitions.iter().enumerate() {
        let upward = spec.energy(t.j) >= spec.energy(t.i);
        for (from, to, rate, dir) in [
            (
                t.i,
                t.j,
                t.rate_ij,
                if upward { Direction::Up } else { Direction::Down },
            ),
            (
                t.j,
                t.i,
                t.rate_ji,
                if upward { Direction::Down } else { Direction::Up },
            ),
        ] {
            if rate < 0.0 {
                return Err(QcertError::Validation(format!(
                    "negative rate on transition {k}"
                )));
            }
            if rate == 0.0 {
                continue;
            }
            let r = T::from_f64(rate);
            rest[from * n + from] = rest[from * n + from] - r;
            channels.push(ChannelInfo {
                source: k,
                direction: dir,
                bath: t.bath.clone(),
            });
            gains.push(GainEntry {
                row: to,
                col: from,
                value: r,
                channel: channels.len() - 1,
                branch: Some((from, to)),
                winding: 0,
            });
        }
    }
    GeneratorMatrix::from_parts(TrackedBasis::populations(n), rest, gains, channels)
}

/// Energy flux `Tr[H₀ D(ρ)]` of every bath, computed directly from a density
/// matrix rebuilt from the tracked state.  Independent of the
/// branch-flux bookkeeping in the thermodynamics module; used as an oracle.
pub fn dissipator_energy_flux(
    spec: &MachineSpec,
    basis: &TrackedBasis,
    values: &[f64],
) -> BTreeMap<String, f64> {
    let n = spec.n_levels();
    let mut rho = vec![Complex::<f64>::zero(); n * n];
    for (c, &x) in basis.components.iter().zip(values) {
        match *c {
            Component::Population(i) => rho[i * n + i] = Complex::new(x, 0.0),
            Component::ReCoherence(u, v) => {
                rho[u * n + v] += Complex::new(x, 0.0);
                rho[v * n + u] += Complex::new(x, 0.0);
            }
            Component::ImCoherence(u, v) => {
                rho[u * n + v] += Complex::new(0.0, x);
                rho[v * n + u] += Complex::new(0.0, -x);
            }
        }
    }
    let ops = jump_operators::<f64>(spec);
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for op in &ops {
        // Tr[H0 (LρL† − ½{L†L, ρ})] with dense products.
        let mut l = vec![Complex::<f64>::zero(); n * n];
        for &(a, c, x) in &op.entries {
            l[a * n + c] += Complex::new(x, 0.0);
        }
        let mut flux = 0.0;
        for a in 0..n {
            // (L ρ L†)_aa
            let mut s = Complex::<f64>::zero();
            for c in 0..n {
                for d in 0..n {
                    s += l[a * n + c] * rho[c * n + d] * l[a * n + d].conj();
                }
            }
            flux += spec.energy(a) * s.re;
        }
        // −½ Tr[H0 (L†L ρ + ρ L†L)] = −Re Tr[H0 L†L ρ] since both factors
        // are Hermitian.
        for a in 0..n {
            let mut s = Complex::<f64>::zero();
            for c in 0..n {
                let mut ldl = Complex::<f64>::zero();
                for b in 0..n {
                    ldl += l[b * n + a].conj() * l[b * n + c];
                }
                s += ldl * rho[c * n + a];
            }
            flux -= spec.energy(a) * s.re;
        }
        let bath = op.info.bath.clone().unwrap_or_default();
        *out.entry(bath).or_insert(0.0) += flux;
    }
    out
}
