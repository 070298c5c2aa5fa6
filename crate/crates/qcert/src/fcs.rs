//! Full counting statistics: current mean and variance from the χ-jets of
//! the characteristic-polynomial coefficients, plus an independent
//! finite-difference oracle on the dominant eigenvalue.
//!
//! With `Pol(λ, χ) = det(W(χ) − λI) = Σ aₙ(χ) λⁿ` and the steady-state
//! root `λ(0) = 0`, implicit differentiation gives
//!
//! ```text
//! λ'  = −∂χa₀ / a₁
//! λ'' = −(∂²χa₀ + 2 ∂χa₁ λ' + 2 a₂ λ'²) / a₁
//! ```
//!
//! and the scaled cumulants of the counted quanta are `c₁ = −iλ'`,
//! `c₂ = −λ''`.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{QcertError, Result};
use crate::jet::Jet2;
use crate::linalg::{det_and_inverse_trace, drop_rows_cols, inf_norm, jet_det};
use crate::liouvillian::{GeneratorMatrix, MAX_DIM};
use crate::scalar::{Field, Real};

/// `|a₁| ≤ A1_RTOL·‖W‖∞·|a₂|` means a second (near-)zero eigenvalue.
pub const A1_RTOL: f64 = 1e-14;
/// `|a₀| ≤ A0_RTOL·‖W‖∞·|a₁|` is required: the generator must have a root at 0.
pub const A0_RTOL: f64 = 1e-8;
/// Eigenvalue ambiguity threshold of the finite-difference oracle, relative
/// to `‖W‖∞`.
pub const FD_AMBIGUITY_RTOL: f64 = 1e-10;
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Lowest coefficients `a₀, a₁, a₂` of `det(W(χ) − λI)` as jets in χ.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCoeffs<T> {
    pub a: Vec<Jet2<T>>,
    /// `‖W(0)‖∞`, the scale for conditioning decisions.
    pub scale: T,
}

/// Mean and variance of the counted-quanta flux (per unit time).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurrentStats {
    pub c1: f64,
    pub c2: f64,
    /// Largest imaginary part discarded from `c1`, `c2`.
    pub residual_imag: f64,
}

/// The three lowest coefficients of `det(W(χ) − λI)` as jets in χ.
///
/// They are principal-minor sums: `a₀ = det W`, `a₁ = −Σᵢ det W₍ᵢ₎` and
/// `a₂ = Σ_{i<j} det W₍ᵢⱼ₎`, where `W₍…₎` drops the listed rows and columns.
/// Each determinant is a pivoted elimination, so rates spread over many
/// decades keep full relative accuracy; trace recursions such as
/// Faddeev–LeVerrier lose it through cancellation of `‖W‖ⁿ`-sized terms.
pub fn char_poly_jets<T: Field>(gen: &GeneratorMatrix<T>) -> Result<PolyCoeffs<T>> {
    let n = gen.dim();
    if n > MAX_DIM {
        return Err(QcertError::DimensionOverflow { dim: n, max: MAX_DIM });
    }
    let a = gen.jets();
    let scale = inf_norm(&gen.value(), n);
    let mut coeffs = vec![jet_det(a.clone(), n)];
    if n >= 1 {
        let mut a1 = Jet2::zero();
        for i in 0..n {
            a1 -= jet_det(drop_rows_cols(&a, n, &[i]), n - 1);
        }
        coeffs.push(a1);
    }
    if n >= 2 {
        let mut a2 = Jet2::zero();
        for i in 0..n {
            for j in i + 1..n {
                a2 += jet_det(drop_rows_cols(&a, n, &[i, j]), n - 2);
            }
        }
        coeffs.push(a2);
    }
    Ok(PolyCoeffs { a: coeffs, scale })
}

fn finish<T: Real>(c1: Complex<T>, c2: Complex<T>) -> CurrentStats {
    CurrentStats {
        c1: c1.re.to_f64(),
        c2: c2.re.to_f64(),
        residual_imag: c1.im.to_f64().abs().max(c2.im.to_f64().abs()),
    }
}

/// First two scaled cumulants from polynomial jets.
pub fn cumulants_from_coeffs<T: Real>(p: &PolyCoeffs<T>) -> Result<CurrentStats> {
    if p.a.len() < 3 {
        // One-dimensional generator: nothing can flow.
        return Ok(CurrentStats {
            c1: 0.0,
            c2: 0.0,
            residual_imag: 0.0,
        });
    }
    let (a0, a1, a2) = (p.a[0], p.a[1], p.a[2]);
    let a1n = a1.v0.norm_sqr().sqrt();
    let a2n = a2.v0.norm_sqr().sqrt();
    if a1n <= T::from_f64(A1_RTOL) * p.scale * a2n || a1n.is_zero() {
        return Err(QcertError::Conditioning(format!(
            "a1 = {:e} is negligible against ‖W‖·a2 (near-degenerate kernel)",
            a1n.to_f64()
        )));
    }
    if a0.v0.norm_sqr().sqrt() > T::from_f64(A0_RTOL) * p.scale * a1n {
        return Err(QcertError::Conditioning(
            "generator has no zero eigenvalue (a0 does not vanish)".into(),
        ));
    }
    let two = T::from_f64(2.0);
    let inv_a1 = Complex::<T>::one() / a1.v0;
    let lp = -(a0.v1 * inv_a1);
    let lpp = -((a0.v2 + (a1.v1 * lp).scale(two) + (a2.v0 * lp * lp).scale(two)) * inv_a1);
    let i = Complex::new(T::zero(), T::one());
    Ok(finish(-(i * lp), -lpp))
}

/// Convenience: polynomial jets followed by cumulant extraction.
pub fn cumulants<T: Real>(gen: &GeneratorMatrix<T>) -> Result<CurrentStats> {
    cumulants_from_coeffs(&char_poly_jets(gen)?)
}

/// Newton iteration on `det(W − λI)` from `λ = 0`.
fn dominant_root<T: Real>(w: &[Complex<T>], n: usize, scale: T) -> Result<Complex<T>> {
    let mut lambda = Complex::<T>::zero();
    let tol = scale * T::epsilon() * T::from_f64(16.0);
    for _ in 0..60 {
        let mut m = w.to_vec();
        for i in 0..n {
            m[i * n + i] = m[i * n + i] - lambda;
        }
        let Some((det, tr_inv)) = det_and_inverse_trace(m, n) else {
            // Exactly singular: λ is an eigenvalue already.
            return Ok(lambda);
        };
        if det.is_zero() || tr_inv.is_zero() {
            return Ok(lambda);
        }
        // f/f' with f' = −det·tr((W−λ)⁻¹)
        let step = Complex::<T>::one() / tr_inv;
        lambda = lambda + step;
        if step.norm_sqr().sqrt() <= tol {
            return Ok(lambda);
        }
    }
    Err(QcertError::Conditioning(
        "dominant-eigenvalue Newton iteration did not converge".into(),
    ))
}

/// Check that exactly one eigenvalue of the χ = 0 generator sits at zero.
fn check_gap<T: Real>(gen: &GeneratorMatrix<T>, scale: f64) -> Result<()> {
    let n = gen.dim();
    if n < 2 {
        return Ok(());
    }
    let w: Vec<f64> = gen.value().iter().map(|x| x.to_f64()).collect();
    let eig = DMatrix::from_row_slice(n, n, &w).complex_eigenvalues();
    let mut mods: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    mods.sort_by(f64::total_cmp);
    if mods[1] <= FD_AMBIGUITY_RTOL * scale {
        return Err(QcertError::Conditioning(format!(
            "eigenvalue tracking ambiguous: second eigenvalue |λ| = {:e}",
            mods[1]
        )));
    }
    Ok(())
}

/// Independent oracle: fourth-order central differences of the dominant
/// eigenvalue of `W(χ)` at `χ ∈ {0, ±h, ±2h}`.
pub fn eigenvalue_fd<T: Real>(gen: &GeneratorMatrix<T>, h: f64) -> Result<CurrentStats> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(QcertError::Domain(format!(
            "finite-difference step {h:e} outside [1e-6, 1e-3]"
        )));
    }
    let n = gen.dim();
    let scale = inf_norm(&gen.value(), n);
    check_gap(gen, scale.to_f64())?;
    let hh = T::from_f64(h);
    let lam = |k: f64| -> Result<Complex<T>> {
        dominant_root(&gen.at(hh * T::from_f64(k)), n, scale)
    };
    let (lp1, lm1, lp2, lm2) = (lam(1.0)?, lam(-1.0)?, lam(2.0)?, lam(-2.0)?);
    // λ(0) = 0 for any generator
    let twelve_h = hh * T::from_f64(12.0);
    let d1 = ((lp1 - lm1).scale(T::from_f64(8.0)) - (lp2 - lm2)).unscale(twelve_h);
    let d2 = ((lp1 + lm1).scale(T::from_f64(16.0)) - (lp2 + lm2)).unscale(twelve_h * hh);
    let i = Complex::new(T::zero(), T::one());
    Ok(finish(-(i * d1), -d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{ChannelInfo, GainEntry, TrackedBasis};
    use crate::machine_model::Direction;
    use crate::scalar::Dd;
    use num_rational::Ratio;

    fn dimer<T: Field>(a: T, b: T) -> GeneratorMatrix<T> {
        // level 0 → 1 at rate a, 1 → 0 at rate b
        let chans = vec![
            ChannelInfo { source: 0, direction: Direction::Up, bath: Some("x".into()) },
            ChannelInfo { source: 0, direction: Direction::Down, bath: Some("x".into()) },
        ];
        let gains = vec![
            GainEntry { row: 1, col: 0, value: a, channel: 0, branch: Some((0, 1)), winding: 0 },
            GainEntry { row: 0, col: 1, value: b, channel: 1, branch: Some((1, 0)), winding: 0 },
        ];
        GeneratorMatrix::from_parts(
            TrackedBasis::populations(2),
            vec![-a, T::zero(), T::zero(), -b],
            gains,
            chans,
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_coefficients() {
        let p = char_poly_jets(&dimer(2.0, 3.0)).unwrap();
        assert_eq!(p.a[0].v0.re, 0.0);
        assert_eq!(p.a[1].v0.re, 5.0);
        assert_eq!(p.a[2].v0.re, 1.0);
    }

    #[test]
    fn exact_field_recursion() {
        let r = |x: i128| Ratio::new(x, 1);
        let gen = dimer(r(2), r(3)).monitor_bath("x").unwrap();
        let p = char_poly_jets(&gen).unwrap();
        // Dressing both directions of one transition cancels in a0.
        assert!(p.a[0].is_zero());
        assert_eq!(p.a[1].v0.re, r(5));
    }

    #[test]
    fn single_edge_net_count_is_bounded() {
        // Counting both directions of the only edge: the net count is the
        // occupation difference, so neither mean nor variance grows.
        let gen = dimer(0.3, 0.7).monitor_bath("x").unwrap();
        let s = cumulants(&gen).unwrap();
        assert!(s.c1.abs() < 1e-15 && s.c2.abs() < 1e-15, "{s:?}");
    }

    #[test]
    fn fast_parallel_channel_makes_counts_poissonian() {
        // Two channels at the same temperature; the second one is so fast
        // that jumps on the first are independent: c2 → 2ab/(a+b).
        let (a, b, k) = (0.3, 0.7, 1e7);
        let chans = vec![
            ChannelInfo { source: 0, direction: Direction::Up, bath: Some("x".into()) },
            ChannelInfo { source: 0, direction: Direction::Down, bath: Some("x".into()) },
            ChannelInfo { source: 1, direction: Direction::Up, bath: Some("y".into()) },
            ChannelInfo { source: 1, direction: Direction::Down, bath: Some("y".into()) },
        ];
        let gains = vec![
            GainEntry { row: 1, col: 0, value: a, channel: 0, branch: Some((0, 1)), winding: 0 },
            GainEntry { row: 0, col: 1, value: b, channel: 1, branch: Some((1, 0)), winding: 0 },
            GainEntry { row: 1, col: 0, value: k * a, channel: 2, branch: Some((0, 1)), winding: 0 },
            GainEntry { row: 0, col: 1, value: k * b, channel: 3, branch: Some((1, 0)), winding: 0 },
        ];
        let rest = vec![-(1.0 + k) * a, 0.0, 0.0, -(1.0 + k) * b];
        let gen = GeneratorMatrix::from_parts(TrackedBasis::populations(2), rest, gains, chans)
            .unwrap()
            .monitor_bath("x")
            .unwrap();
        let s = cumulants(&gen).unwrap();
        let poisson = 2.0 * a * b / (a + b);
        assert!(s.c1.abs() < 1e-15);
        assert!((s.c2 - poisson).abs() < 1e-6 * poisson, "{s:?}");
    }

    #[test]
    fn unidirectional_dressing_gives_a_current() {
        // Monitor only 0 → 1; mean is the one-way flux ab/(a+b).
        let (a, b) = (0.3, 0.7);
        let gen = dimer(a, b).dress_channel(0, 1).unwrap();
        let s = cumulants(&gen).unwrap();
        assert!((s.c1 - a * b / (a + b)).abs() < 1e-15);
        // f64 round-off limits the second difference to ~ε/h².
        let fd = eigenvalue_fd(&gen, 1e-4).unwrap();
        assert!((fd.c1 - s.c1).abs() < 1e-12);
        assert!((fd.c2 - s.c2).abs() < 1e-7);
        let gen_dd = dimer(Dd::from(a), Dd::from(b)).dress_channel(0, 1).unwrap();
        let fd = eigenvalue_fd(&gen_dd, 1e-4).unwrap();
        assert!((fd.c2 - s.c2).abs() < 1e-13, "{fd:?} {s:?}");
    }
}
