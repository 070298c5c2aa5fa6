//! Shared oracles for the integration tests: closed-form characteristic
//! polynomial coefficients of the three built-in machines, literal matrix
//! transcriptions, and seeded parameter draws.
#![allow(dead_code)]

pub mod dense;

use num_complex::Complex;
use qcert::fcs::{char_poly_jets, PolyCoeffs};
use qcert::liouvillian::{build_quantum_generator, ChannelInfo, Component, GainEntry, GeneratorMatrix, TrackedBasis};
use qcert::machine_model::{bose_occupation, Direction};
use qcert::machines::{build_amplifier, build_fridge, AmplifierParams, FridgeParams, NicParams};
use qcert::Dd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (r.random_range(lo.ln()..hi.ln())).exp()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// `(a0', a0'', a1, a1', a2)` in prime notation: `x' = i ∂χ x`, `x'' = −∂²χ x`.
pub fn primes(p: &PolyCoeffs<Dd>) -> [f64; 5] {
    let i = Complex::new(Dd::from(0.0), Dd::from(1.0));
    let re = |z: Complex<Dd>| z.re.hi() + z.re.lo();
    [
        re(i * p.a[0].v1),
        re(-p.a[0].v2),
        re(p.a[1].v0),
        re(i * p.a[1].v1),
        re(p.a[2].v0),
    ]
}

pub fn amplifier_draw(r: &mut ChaCha8Rng) -> AmplifierParams {
    AmplifierParams {
        beta_c: 1.0,
        beta_h: 0.1,
        eps1: r.random_range(0.1..4.9),
        eps2: 5.0,
        gamma_c: log_uniform(r, 1e-5, 1e-2),
        gamma_h: log_uniform(r, 1e-5, 1e-2),
        g: log_uniform(r, 1e-5, 1e-2),
        detuning: 0.0,
    }
}

pub fn fridge_draw(r: &mut ChaCha8Rng) -> FridgeParams {
    let beta_c = 1.0;
    let beta_m = beta_c * r.random_range(0.0..1.0f64).max(1e-3);
    let beta_h = beta_m * r.random_range(0.0..1.0f64).max(1e-3);
    FridgeParams {
        beta_c,
        beta_m,
        beta_h,
        eps1: r.random_range(0.1..4.9),
        eps2: 5.0,
        gamma_c: log_uniform(r, 1e-5, 1e-2),
        gamma_m: log_uniform(r, 1e-5, 1e-2),
        gamma_h: log_uniform(r, 1e-5, 1e-2),
        g: log_uniform(r, 1e-4, 1e-2),
    }
}

pub fn nic_draw(r: &mut ChaCha8Rng) -> NicParams {
    NicParams {
        beta_c: 1.0,
        beta_h: r.random_range(0.0..1.0f64).max(1e-3),
        eps1: r.random_range(0.1..4.9),
        eps2: 5.0,
        gamma_ca: 1e-3,
        gamma_cb: 1e-3,
        gamma_ha: log_uniform(r, 1e-5, 1e-2),
        gamma_hb: log_uniform(r, 1e-5, 1e-2),
        gamma_w: 1e-4,
    }
}

/// Printed amplifier coefficients `(a0', a0'', a1, a1', a2)`.
pub fn amplifier_golden(p: &AmplifierParams) -> [f64; 5] {
    let nc = bose_occupation(p.beta_c, p.eps2 - p.eps1).unwrap();
    let nh = bose_occupation(p.beta_h, p.eps2).unwrap();
    let (g, gc, gh) = (p.g, p.gamma_c, p.gamma_h);
    let a0p = 2.0 * g * g * gc * gh * (nc - nh);
    let a0pp = -2.0 * g * g * gc * gh * (nc * (2.0 * nh + 1.0) + nh);
    let a1 = 0.5
        * (gc * (nc * (gh * gh * nh * (3.0 * nh + 1.0) + 12.0 * g * g) + gh * gh * nh * nh + 8.0 * g * g)
            + gc * gc * gh * nc * (nc * (3.0 * nh + 1.0) + nh)
            + 4.0 * g * g * gh * (3.0 * nh + 2.0));
    let a2 = 0.5
        * (gc * gh * (nc * (10.0 * nh + 3.0) + 3.0 * nh)
            + gc * gc * nc * (2.0 * nc + 1.0)
            + gh * gh * nh * (2.0 * nh + 1.0)
            + 8.0 * g * g);
    [a0p, a0pp, a1, 0.0, a2]
}

pub fn amplifier_coeffs(p: &AmplifierParams) -> [f64; 5] {
    let w = build_quantum_generator::<Dd>(&build_amplifier(p).unwrap())
        .unwrap()
        .monitor_bath("c")
        .unwrap();
    primes(&char_poly_jets(&w).unwrap())
}

/// Printed fridge `(a0', a0'', a1')`, evaluated with the medium and hot
/// labels exchanged (the printed cycle factor belongs to the qubit whose
/// gap is the sum of the other two).
pub fn fridge_golden(p: &FridgeParams) -> [f64; 3] {
    let (nc, nm, nh) = p.nbars().unwrap();
    let (gc, gm, gh) = (p.gamma_c, p.gamma_m, p.gamma_h);
    // exchange
    let (gh, gm, nh, nm) = (gm, gh, nm, nh);
    let g = p.g;
    let a = gc * (2.0 * nc + 1.0);
    let b = gm * (2.0 * nm + 1.0);
    let c = gh * (2.0 * nh + 1.0);
    let cyc = nh * (nc + nm + 1.0) - nc * nm;
    let common = (a + c) * (a + b) * (c + b) * (a + b + c);
    let a0p = 2.0 * g * g * gc * gh * gm * cyc * common;
    let a0pp = 2.0 * g * g * gc * gh * gm * (nh * (nc * (2.0 * nm + 1.0) + nm + 1.0) + nc * nm) * common;
    let a1p = 4.0 * g * g * gc * gh * gm * cyc
        * (4.0 * a * a * (c + b) + a * (9.0 * c * b + 4.0 * c * c + 4.0 * b * b) + a * a * a
            + (c + b) * (3.0 * c * b + c * c + b * b));
    [a0p, a0pp, a1p]
}

pub fn fridge_coeffs(p: &FridgeParams) -> [f64; 5] {
    let w = build_quantum_generator::<Dd>(&build_fridge(p).unwrap())
        .unwrap()
        .monitor_bath("c")
        .unwrap();
    primes(&char_poly_jets(&w).unwrap())
}

/// Rotated NIC rates `(γc^α, γh^α, γh^β)`.
pub fn nic_rotated_rates(p: &NicParams) -> (f64, f64, f64) {
    let ca = p.gamma_ca + p.gamma_cb;
    let ha = ((p.gamma_ca * p.gamma_ha).sqrt() + (p.gamma_cb * p.gamma_hb).sqrt()).powi(2) / ca;
    let hb = ((p.gamma_ca * p.gamma_hb).sqrt() - (p.gamma_cb * p.gamma_ha).sqrt()).powi(2) / ca;
    (ca, ha, hb)
}

/// Printed NIC `(a0', a0'', a1, a1')` in the rotated rates.
pub fn nic_golden(p: &NicParams) -> [f64; 4] {
    let nc = p.nbar_c().unwrap();
    let nh = p.nbar_h().unwrap();
    let (a, ha, hb) = nic_rotated_rates(p);
    let gw = p.gamma_w;
    [
        gw * nc * nh * (nh - nc) * a * a * ha * hb,
        gw * nc * nh * (nc * (2.0 * nh + 1.0) + nh) * a * a * ha * hb,
        -a * hb
            * (gw * (nc * (4.0 * nh + 1.0) + nh) * (nc * a + nh * (ha + hb))
                + nc * nh * (nc * (4.0 * nh + 3.0) + 3.0 * nh + 2.0) * a * ha),
        -gw * (nc - nh) * a * ha * (nc * a + nh * ha),
    ]
}

/// Literal transcription of the published 5×5 NIC generator over
/// `(ρ00, ρ11, ρ_αα, ρ_ββ, Re ρ_αβ)`: downward thermal rates `γn̄`, upward
/// `γ(n̄+1)`, doubled coherence row (diagonal sign made negative).  The
/// work-source entries are the counted channel.
pub fn nic_literal(p: &NicParams) -> GeneratorMatrix<Dd> {
    let nc = p.nbar_c().unwrap();
    let nh = p.nbar_h().unwrap();
    let (a, ha, hb) = nic_rotated_rates(p);
    let gw = p.gamma_w;
    let (a0_, _0a) = (a * nc, a * (nc + 1.0));
    let (a1_, _1a) = (ha * nh, ha * (nh + 1.0));
    let (b1_, _1b) = (hb * nh, hb * (nh + 1.0));
    let s = (a1_ * b1_).sqrt();
    let su = (_1a * _1b).sqrt();
    let rows: [[f64; 5]; 5] = [
        [-(_0a + gw), 0.0, a0_, 0.0, 0.0],
        [0.0, -(_1a + _1b + gw), a1_, b1_, 2.0 * s],
        [_0a, _1a, -(a1_ + a0_), 0.0, -s],
        [0.0, _1b, 0.0, -b1_, -s],
        [0.0, 2.0 * su, -s, -s, -(a0_ + a1_ + b1_)],
    ];
    let rest: Vec<Dd> = rows.iter().flatten().map(|&x| Dd::from(x)).collect();
    let channels = vec![
        ChannelInfo { source: 0, direction: Direction::Up, bath: Some("w".into()) },
        ChannelInfo { source: 0, direction: Direction::Down, bath: Some("w".into()) },
    ];
    let gains = vec![
        GainEntry { row: 1, col: 0, value: Dd::from(gw), channel: 0, branch: Some((0, 1)), winding: 0 },
        GainEntry { row: 0, col: 1, value: Dd::from(gw), channel: 1, branch: Some((1, 0)), winding: 0 },
    ];
    let basis = TrackedBasis {
        components: vec![
            Component::Population(0),
            Component::Population(1),
            Component::Population(2),
            Component::Population(3),
            Component::ReCoherence(2, 3),
        ],
    };
    GeneratorMatrix::from_parts(basis, rest, gains, channels)
        .unwrap()
        .monitor_bath("w")
        .unwrap()
}
