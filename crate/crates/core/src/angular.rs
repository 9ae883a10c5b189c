//! Angular-momentum special functions.
//!
//! Everything here uses the Condon–Shortley phase convention: the spherical
//! harmonics satisfy `Y^I_{-M} = (-1)^M conj(Y^I_M)` and the ladder operators
//! have non-negative matrix elements. The rest of the crate relies on this.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A pair `(I, M)` labelling `Y^I_M`, with `|M| <= I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AngularIndex {
    i: u32,
    m: i32,
}

impl AngularIndex {
    pub fn new(i: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > i {
            return Err(Error::invalid(format!("|M| = {} exceeds I = {i}", m.abs())));
        }
        Ok(Self { i, m })
    }

    #[inline]
    pub fn i(&self) -> u32 {
        self.i
    }

    #[inline]
    pub fn m(&self) -> i32 {
        self.m
    }
}

const LN_FACT_TABLE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`, tabulated below 4096 and from the Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACT_TABLE {
        return ln_fact_table()[n as usize];
    }
    let x = n as f64 + 1.0;
    // ln Γ(x) for large x
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn lf(n: i64) -> f64 {
    debug_assert!(n >= 0);
    ln_factorial(n as u64)
}

/// Sum by recursive halving; keeps the rounding error at O(log n).
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Clebsch–Gordan coefficient `<l m lp mp | I M>`.
///
/// Arguments are integers; negative `l`, `lp` or `i` are rejected, any other
/// selection-rule violation gives exactly zero.
pub fn clebsch_gordan(l: i32, lp: i32, m: i32, mp: i32, i: i32, big_m: i32) -> Result<f64> {
    if l < 0 || lp < 0 || i < 0 {
        return Err(Error::invalid(format!(
            "negative angular momentum in <{l} {m} {lp} {mp} | {i} {big_m}>"
        )));
    }
    if m.abs() > l || mp.abs() > lp || big_m.abs() > i {
        return Ok(0.0);
    }
    if m + mp != big_m || i < (l - lp).abs() || i > l + lp {
        return Ok(0.0);
    }
    if m == 0 && mp == 0 {
        return Ok(cg_parity(l, lp, i));
    }
    Ok(cg_racah(l, lp, m, mp, i, big_m))
}

/// `<l 0 lp 0 | I 0>` from its closed product form.
fn cg_parity(l: i32, lp: i32, i: i32) -> f64 {
    let two_g = l + lp + i;
    if two_g % 2 != 0 {
        return 0.0;
    }
    let g = (two_g / 2) as i64;
    let (l, lp, i) = (l as i64, lp as i64, i as i64);
    let ln_delta = lf(2 * g - 2 * l) + lf(2 * g - 2 * lp) + lf(2 * g - 2 * i) - lf(2 * g + 1);
    let ln_ratio = lf(g) - lf(g - l) - lf(g - lp) - lf(g - i);
    let sign = if (g - i) % 2 == 0 { 1.0 } else { -1.0 };
    sign * ((2 * i + 1) as f64).sqrt() * (0.5 * ln_delta + ln_ratio).exp()
}

/// Racah's single-sum formula evaluated term by term in log space.
fn cg_racah(j1: i32, j2: i32, m1: i32, m2: i32, j: i32, m: i32) -> f64 {
    let (j1, j2, m1, m2, j, m) = (
        j1 as i64, j2 as i64, m1 as i64, m2 as i64, j as i64, m as i64,
    );
    let ln_pref = 0.5
        * (((2 * j + 1) as f64).ln() + lf(j1 + j2 - j) + lf(j1 - j2 + j) + lf(-j1 + j2 + j)
            - lf(j1 + j2 + j + 1)
            + lf(j1 + m1)
            + lf(j1 - m1)
            + lf(j2 + m2)
            + lf(j2 - m2)
            + lf(j + m)
            + lf(j - m));
    let k_min = 0.max(j2 - j - m1).max(j1 - j + m2);
    let k_max = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    if k_min > k_max {
        return 0.0;
    }
    let terms: Vec<f64> = (k_min..=k_max)
        .map(|k| {
            let ln_den = lf(k)
                + lf(j1 + j2 - j - k)
                + lf(j1 - m1 - k)
                + lf(j2 + m2 - k)
                + lf(j - j2 + m1 + k)
                + lf(j - j1 - m2 + k);
            let mag = (ln_pref - ln_den).exp();
            if k % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    pairwise_sum(&terms)
}

/// Normalized associated Legendre values `P̄^M_I(cos θ)` for a fixed `θ`,
/// including the Condon–Shortley phase, so that
/// `Y^I_M(θ, φ) = P̄^M_I(cos θ) e^{iMφ}` for `M >= 0`.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    l_max: u32,
    values: Vec<f64>,
}

#[inline]
fn tri(i: u32, m: u32) -> usize {
    (i as usize * (i as usize + 1)) / 2 + m as usize
}

impl LegendreTable {
    pub fn new(l_max: u32, theta: f64) -> Self {
        let (s, x) = theta.sin_cos();
        let mut values = vec![0.0; tri(l_max, l_max) + 1];
        let mut diag = 1.0 / (4.0 * PI).sqrt();
        for m in 0..=l_max {
            if m > 0 {
                let mf = m as f64;
                diag *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
            }
            fill_column(m, l_max, x, diag, |i, v| values[tri(i, m)] = v);
        }
        Self { l_max, values }
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// `P̄^M_I` for `0 <= M <= I <= l_max`.
    #[inline]
    pub fn get(&self, i: u32, m: u32) -> f64 {
        self.values[tri(i, m)]
    }

    /// `Y^I_M(θ, φ)` for either sign of `M`.
    pub fn harmonic(&self, i: u32, m: i32, phi: f64) -> Complex64 {
        let mut p = self.get(i, m.unsigned_abs());
        if m < 0 && m % 2 != 0 {
            p = -p;
        }
        Complex64::from_polar(p, m as f64 * phi)
    }
}

/// Upward recurrence in `I` at fixed `M`, starting from the diagonal value.
fn fill_column(m: u32, l_max: u32, x: f64, diag: f64, mut put: impl FnMut(u32, f64)) {
    put(m, diag);
    if m == l_max {
        return;
    }
    let mf = m as f64;
    let a = |i: f64| ((4.0 * i * i - 1.0) / (i * i - mf * mf)).sqrt();
    let mut prev2 = diag;
    let mut prev1 = (2.0 * mf + 3.0).sqrt() * x * diag;
    put(m + 1, prev1);
    let mut a_prev = a(mf + 1.0);
    for i in (m + 2)..=l_max {
        let a_i = a(i as f64);
        let cur = a_i * (x * prev1 - prev2 / a_prev);
        put(i, cur);
        prev2 = prev1;
        prev1 = cur;
        a_prev = a_i;
    }
}

/// Orthonormal `Y^I_M(θ, φ)`; `θ` must lie in `[0, π]`.
pub fn spherical_harmonic(idx: AngularIndex, theta: f64, phi: f64) -> Result<Complex64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::invalid(format!("theta = {theta} outside [0, pi]")));
    }
    let mu = idx.m.unsigned_abs();
    let (s, x) = theta.sin_cos();
    let mut diag = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=mu {
        let kf = k as f64;
        diag *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    let mut p = 0.0;
    fill_column(mu, idx.i, x, diag, |i, v| {
        if i == idx.i {
            p = v
        }
    });
    let y = Complex64::from_polar(p, mu as f64 * phi);
    Ok(if idx.m >= 0 {
        y
    } else if mu.is_multiple_of(2) {
        y.conj()
    } else {
        -y.conj()
    })
}

/// `e^{-x} i_l(x)` for `l = 0..=l_max`, by Miller's backward recurrence
/// normalized to the closed form of `i_0`.
pub fn mod_sph_bessel_i_scaled_all(l_max: u32, x: f64) -> Result<Vec<f64>> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("Bessel argument x = {x} must be >= 0")));
    }
    let mut out = vec![0.0; l_max as usize + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let big = (l_max as f64).max(x);
    let start = (big.ceil() as usize) + 30 + (40.0 * big).sqrt().ceil() as usize;

    // i_{n-1} = i_{n+1} + (2n+1)/x i_n
    let mut above = 0.0f64;
    let mut cur = 1e-280f64;
    for n in (1..=start).rev() {
        if n <= l_max as usize {
            out[n] = cur;
        }
        let below = above + (2.0 * n as f64 + 1.0) / x * cur;
        above = cur;
        cur = below;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    out[0] = cur;
    let i0_scaled = -(-2.0 * x).exp_m1() / (2.0 * x);
    let scale = i0_scaled / cur;
    for v in out.iter_mut() {
        *v *= scale;
    }
    Ok(out)
}

/// Modified spherical Bessel function of the first kind,
/// `i_l(x) = sqrt(π/(2x)) I_{l+1/2}(x)`.
pub fn mod_sph_bessel_i(l: u32, x: f64) -> Result<f64> {
    let scaled = mod_sph_bessel_i_scaled_all(l, x)?;
    Ok(scaled[l as usize] * x.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cg(l: i32, lp: i32, m: i32, mp: i32, i: i32, mm: i32) -> f64 {
        clebsch_gordan(l, lp, m, mp, i, mm).unwrap()
    }

    /// Exact-factorial Racah formula in f64, usable for small arguments only.
    fn cg_naive(j1: i64, j2: i64, m1: i64, m2: i64, j: i64, m: i64) -> f64 {
        if m1 + m2 != m || j < (j1 - j2).abs() || j > j1 + j2 {
            return 0.0;
        }
        let f = |n: i64| (1..=n).map(|k| k as f64).product::<f64>();
        let pref = ((2 * j + 1) as f64 * f(j1 + j2 - j) * f(j1 - j2 + j) * f(-j1 + j2 + j)
            / f(j1 + j2 + j + 1))
            .sqrt()
            * (f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j + m) * f(j - m)).sqrt();
        let mut s = 0.0;
        for k in 0..=(j1 + j2 + j) {
            let args = [
                j1 + j2 - j - k,
                j1 - m1 - k,
                j2 + m2 - k,
                j - j2 + m1 + k,
                j - j1 - m2 + k,
            ];
            if args.iter().any(|&a| a < 0) {
                continue;
            }
            let den = f(k) * args.iter().map(|&a| f(a)).product::<f64>();
            s += if k % 2 == 0 { 1.0 } else { -1.0 } / den;
        }
        pref * s
    }

    #[test]
    fn cg_known_values() {
        for l in 0..6 {
            for m in -l..=l {
                assert!((cg(l, 0, m, 0, l, m) - 1.0).abs() < 1e-14);
            }
        }
        assert!((cg(1, 1, 0, 0, 2, 0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((cg(1, 1, 1, -1, 0, 0) - 1.0 / 3.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cg_selection_rules_and_errors() {
        assert_eq!(cg(2, 1, 1, 1, 3, 1), 0.0);
        assert_eq!(cg(2, 1, 1, 0, 4, 1), 0.0);
        assert_eq!(cg(1, 1, 0, 0, 1, 0), 0.0);
        assert!(clebsch_gordan(-1, 1, 0, 0, 1, 0).is_err());
        assert!(clebsch_gordan(1, 1, 0, 0, -2, 0).is_err());
    }

    #[test]
    fn cg_matches_naive_factorials() {
        for j1 in 0..7i64 {
            for j2 in 0..7i64 {
                for j in (j1 - j2).abs()..=(j1 + j2) {
                    for m1 in -j1..=j1 {
                        for m2 in -j2..=j2 {
                            let m = m1 + m2;
                            if m.abs() > j {
                                continue;
                            }
                            let a = cg(j1 as i32, j2 as i32, m1 as i32, m2 as i32, j as i32, m as i32);
                            let b = cg_naive(j1, j2, m1, m2, j, m);
                            assert!((a - b).abs() < 1e-12, "{j1} {m1} {j2} {m2} | {j} {m}: {a} vs {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cg_parity_form_agrees_with_racah_sum() {
        // the alternating Racah sum loses digits as l grows; the product form does not
        for l in 0..20 {
            for lp in 0..20 {
                for i in ((l as i32 - lp as i32).abs()..=(l + lp)).step_by(2) {
                    let a = cg_parity(l, lp, i);
                    let b = cg_racah(l, lp, 0, 0, i, 0);
                    assert!((a - b).abs() < 1e-10, "{l} {lp} {i}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn cg_orthogonality() {
        for l in 0..=12i32 {
            for lp in 0..=12 {
                let lo = (l - lp).abs();
                for i in lo..=(l + lp) {
                    for ip in lo..=(l + lp) {
                        for mm in -i.min(ip)..=i.min(ip) {
                            let mut s = 0.0;
                            for m in -l..=l {
                                let mp = mm - m;
                                if mp.abs() > lp {
                                    continue;
                                }
                                s += cg(l, lp, m, mp, i, mm) * cg(l, lp, m, mp, ip, mm);
                            }
                            let want = if i == ip { 1.0 } else { 0.0 };
                            assert!((s - want).abs() < 1e-10, "l={l} lp={lp} I={i} I'={ip} M={mm}: {s}");
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn cg_exchange_symmetry(l in 0i32..20, lp in 0i32..20, m_seed in 0i32..1000, mp_seed in 0i32..1000, i_seed in 0i32..1000) {
            let m = m_seed % (2 * l + 1) - l;
            let mp = mp_seed % (2 * lp + 1) - lp;
            let lo = (l - lp).abs();
            let i = lo + i_seed % (l + lp - lo + 1);
            prop_assume!((m + mp).abs() <= i);
            let a = cg(l, lp, m, mp, i, m + mp);
            let b = cg(lp, l, mp, m, i, m + mp);
            let sign = if (l + lp - i) % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a - sign * b).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_constant_mode_and_axis_value() {
        let idx = AngularIndex::new(0, 0).unwrap();
        for &(t, p) in &[(0.0, 0.0), (1.0, 2.0), (PI, -1.0)] {
            let y = spherical_harmonic(idx, t, p).unwrap();
            assert!((y.re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15 && y.im == 0.0);
        }
        let y10 = spherical_harmonic(AngularIndex::new(1, 0).unwrap(), 0.0, 0.3).unwrap();
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn harmonic_explicit_low_orders() {
        // Y^1_1 = -sqrt(3/8π) sinθ e^{iφ}, Y^2_1 = -sqrt(15/8π) sinθ cosθ e^{iφ}
        let (t, p) = (0.7, 1.3);
        let y11 = spherical_harmonic(AngularIndex::new(1, 1).unwrap(), t, p).unwrap();
        let want = Complex64::from_polar(-(3.0 / (8.0 * PI)).sqrt() * t.sin(), p);
        assert!((y11 - want).norm() < 1e-15);
        let y21 = spherical_harmonic(AngularIndex::new(2, 1).unwrap(), t, p).unwrap();
        let want = Complex64::from_polar(-(15.0 / (8.0 * PI)).sqrt() * t.sin() * t.cos(), p);
        assert!((y21 - want).norm() < 1e-15);
    }

    #[test]
    fn harmonic_rejects_bad_theta() {
        let idx = AngularIndex::new(2, 1).unwrap();
        assert!(spherical_harmonic(idx, -0.1, 0.0).is_err());
        assert!(spherical_harmonic(idx, PI + 1e-9, 0.0).is_err());
        assert!(AngularIndex::new(2, 3).is_err());
        assert!(AngularIndex::new(2, -3).is_err());
    }

    #[test]
    fn harmonic_negative_m_conjugation() {
        for i in 0..12u32 {
            for m in 1..=i as i32 {
                let yp = spherical_harmonic(AngularIndex::new(i, m).unwrap(), 1.1, 0.4).unwrap();
                let ym = spherical_harmonic(AngularIndex::new(i, -m).unwrap(), 1.1, 0.4).unwrap();
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!((ym - sign * yp.conj()).norm() < 1e-14);
            }
        }
    }

    /// Gauss–Legendre nodes/weights on [-1, 1] by Newton iteration.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for j in 2..=n {
                        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    }

    #[test]
    fn harmonic_normalization_by_quadrature() {
        let nodes = gauss_legendre(48);
        for i in 0..=30u32 {
            for m in 0..=i {
                let s: f64 = nodes
                    .iter()
                    .map(|&(x, w)| {
                        let t = LegendreTable::new(i, x.acos());
                        w * t.get(i, m).powi(2)
                    })
                    .sum::<f64>()
                    * 2.0
                    * PI;
                assert!((s - 1.0).abs() < 1e-10, "I={i} M={m}: {s}");
            }
        }
    }

    #[test]
    fn harmonic_addition_theorem() {
        for &theta in &[0.0, 0.3, 1.2, PI / 2.0, 2.9, PI] {
            let t = LegendreTable::new(30, theta);
            for i in 0..=30u32 {
                let s: f64 = (-(i as i32)..=i as i32)
                    .map(|m| t.harmonic(i, m, 0.77).norm_sqr())
                    .sum();
                let want = (2 * i + 1) as f64 / (4.0 * PI);
                assert!((s - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn legendre_table_stays_finite_at_high_degree() {
        let t = LegendreTable::new(400, 1.0);
        for i in 0..=400 {
            for m in 0..=i {
                assert!(t.get(i, m).is_finite());
            }
        }
    }

    /// Power series `Σ_k x^l (x²/2)^k / (k! (2l+2k+1)!!)`, all terms positive.
    fn bessel_series(l: u32, x: f64) -> f64 {
        let mut dfact = 1.0;
        for k in (1..=(2 * l + 1)).step_by(2) {
            dfact *= k as f64;
        }
        let mut term = x.powi(l as i32) / dfact;
        let mut sum = term;
        for k in 0.. {
            term *= 0.5 * x * x / ((k + 1) as f64 * (2 * l + 2 * k + 3) as f64);
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn bessel_closed_form_and_series() {
        for &x in &[1e-3, 0.5, 2.0, 14.0, 50.0] {
            let got = mod_sph_bessel_i(0, x).unwrap();
            assert!((got / (x.sinh() / x) - 1.0).abs() < 1e-14);
        }
        let want = bessel_series(1, 2.0);
        // cosh(2)/2 - sinh(2)/4
        assert!((want - (2.0f64.cosh() / 2.0 - 2.0f64.sinh() / 4.0)).abs() < 1e-15);
        assert!((mod_sph_bessel_i(1, 2.0).unwrap() / want - 1.0).abs() < 1e-14);
        for l in 0..=60 {
            for &x in &[1.0, 3.0, 14.0, 40.0, 110.0, 150.0] {
                let got = mod_sph_bessel_i(l, x).unwrap();
                let want = bessel_series(l, x);
                assert!((got / want - 1.0).abs() < 1e-12, "l={l} x={x}: {got} {want}");
            }
        }
    }

    #[test]
    fn bessel_edge_cases() {
        assert_eq!(mod_sph_bessel_i(0, 0.0).unwrap(), 1.0);
        assert_eq!(mod_sph_bessel_i(3, 0.0).unwrap(), 0.0);
        assert!(mod_sph_bessel_i(0, -1.0).is_err());
        assert!(mod_sph_bessel_i(0, f64::NAN).is_err());
        let v = mod_sph_bessel_i_scaled_all(600, 300.0).unwrap();
        assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn bessel_decreasing_in_order() {
        let v: Vec<f64> = (0..=40).map(|l| bessel_series(l, 14.0)).collect();
        let got = mod_sph_bessel_i_scaled_all(40, 14.0).unwrap();
        for l in 0..40 {
            assert!(v[l + 1] < v[l]);
            assert!(got[l + 1] < got[l]);
        }
    }

    #[test]
    fn bessel_three_term_recurrence() {
        for k in 0..=30 {
            let x = 1.0 + k as f64 * (149.0 / 30.0);
            let v = mod_sph_bessel_i_scaled_all(61, x).unwrap();
            for l in 1..=60usize {
                let lhs = v[l - 1] - v[l + 1];
                let rhs = (2 * l + 1) as f64 / x * v[l];
                assert!(((lhs - rhs) / rhs).abs() < 1e-9, "x={x} l={l}");
            }
        }
    }
}
