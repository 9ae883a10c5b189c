//! Squeezed exponential wave packets on the sphere and their spherical
//! harmonic expansions.
//!
//! The asymmetric packet is `exp(N sinθ (cosφ + iη sinφ))`, normalized,
//! with its symmetry axis along `x`. The symmetric packet adds the antipodal
//! copy, which removes every odd `I`. The linear packet (`η = 0`) is also
//! offered in the rotated frame where its axis is `z` and only `M = 0`
//! survives.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::angular::{clebsch_gordan, ln_factorial, mod_sph_bessel_i_scaled_all, AngularIndex};
use crate::error::{Error, Result};

/// Coefficients with modulus below this are never stored.
pub const STORAGE_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Asymmetric,
    Symmetric,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::Asymmetric => "asymmetric",
            Symmetry::Symmetric => "symmetric",
        })
    }
}

impl FromStr for Symmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymmetric" => Ok(Symmetry::Asymmetric),
            "symmetric" => Ok(Symmetry::Symmetric),
            _ => Err(Error::invalid(format!("unknown symmetry '{s}'"))),
        }
    }
}

/// Which axis the packet's orientation axis points along in the
/// coordinates the coefficients refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    SymmetryAxisIsX,
    SymmetryAxisIsZ,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::SymmetryAxisIsX => "x",
            Frame::SymmetryAxisIsZ => "z",
        })
    }
}

impl FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Frame::SymmetryAxisIsX),
            "z" => Ok(Frame::SymmetryAxisIsZ),
            _ => Err(Error::invalid(format!("unknown frame '{s}'"))),
        }
    }
}

/// When to stop adding angular momenta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Stop once the captured weight reaches `1 - epsilon`.
    pub epsilon: f64,
    /// Hard upper bound on `I`; `None` means `4N + 40`.
    pub i_cap: Option<u32>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            epsilon: 1e-12,
            i_cap: None,
        }
    }
}

impl TruncationPolicy {
    pub fn cap_for(&self, n: f64) -> u32 {
        self.i_cap.unwrap_or_else(|| (4.0 * n + 40.0).ceil() as u32)
    }
}

/// Recipe for one exponential wave packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacketSpec {
    n: f64,
    eta: f64,
    symmetry: Symmetry,
    truncation: TruncationPolicy,
}

impl WavePacketSpec {
    pub fn new(n: f64, eta: f64, symmetry: Symmetry) -> Result<Self> {
        Self::with_truncation(n, eta, symmetry, TruncationPolicy::default())
    }

    pub fn with_truncation(
        n: f64,
        eta: f64,
        symmetry: Symmetry,
        truncation: TruncationPolicy,
    ) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid(format!("N = {n} must be positive")));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("eta = {eta} outside [0, 1]")));
        }
        if !(truncation.epsilon > 0.0 && truncation.epsilon < 1.0) {
            return Err(Error::invalid("truncation epsilon must lie in (0, 1)"));
        }
        Ok(Self {
            n,
            eta,
            symmetry,
            truncation,
        })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn truncation(&self) -> TruncationPolicy {
        self.truncation
    }
}

/// Where a packet came from; carried into every file it is written to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PacketInfo {
    pub n: Option<f64>,
    pub eta: Option<f64>,
    pub symmetry: Option<Symmetry>,
    pub source: Option<String>,
}

/// `Ψ = Σ b_{IM} Y^I_M`, stored sparsely in `(I, M)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShExpansion {
    coeffs: BTreeMap<AngularIndex, Complex64>,
    i_max: u32,
    frame: Frame,
    info: PacketInfo,
}

impl ShExpansion {
    /// Collects coefficients, dropping those below [`STORAGE_FLOOR`].
    /// Repeated indices are summed.
    pub fn from_coefficients<I>(coeffs: I, frame: Frame, info: PacketInfo) -> Result<Self>
    where
        I: IntoIterator<Item = (AngularIndex, Complex64)>,
    {
        let mut map = BTreeMap::new();
        for (idx, b) in coeffs {
            if !(b.re.is_finite() && b.im.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite coefficient at I={} M={}",
                    idx.i(),
                    idx.m()
                )));
            }
            *map.entry(idx).or_insert(Complex64::new(0.0, 0.0)) += b;
        }
        map.retain(|_, b: &mut Complex64| b.norm() >= STORAGE_FLOOR);
        if map.is_empty() {
            return Err(Error::EmptyPacket);
        }
        let i_max = map.keys().map(|k| k.i()).max().unwrap_or(0);
        Ok(Self {
            coeffs: map,
            i_max,
            frame,
            info,
        })
    }

    pub fn i_max(&self) -> u32 {
        self.i_max
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn info(&self) -> &PacketInfo {
        &self.info
    }

    pub fn with_info(mut self, info: PacketInfo) -> Self {
        self.info = info;
        self
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, i: u32, m: i32) -> Complex64 {
        AngularIndex::new(i, m)
            .ok()
            .and_then(|k| self.coeffs.get(&k).copied())
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AngularIndex, Complex64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.values().map(|b| b.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::EmptyPacket);
        }
        for b in self.coeffs.values_mut() {
            *b /= norm;
        }
        Ok(self)
    }

    /// Applies `f(index, b)` to every stored coefficient.
    pub fn map_coefficients(&self, mut f: impl FnMut(AngularIndex, Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for (k, b) in out.coeffs.iter_mut() {
            *b = f(*k, *b);
        }
        out
    }

    /// The same packet rotated about `z` such that the new amplitude at `φ`
    /// equals the old one at `φ + α`: `b_{IM} → b_{IM} e^{iMα}`.
    pub fn rotate_z(&self, alpha: f64) -> Self {
        self.map_coefficients(|k, b| b * Complex64::from_polar(1.0, k.m() as f64 * alpha))
    }

    /// `<self | other>`.
    pub fn inner(&self, other: &ShExpansion) -> Complex64 {
        self.coeffs
            .iter()
            .filter_map(|(k, a)| other.coeffs.get(k).map(|b| a.conj() * b))
            .sum()
    }

    /// Largest coefficient-wise difference `max |a_{IM} - b_{IM}|`.
    pub fn max_abs_diff(&self, other: &ShExpansion) -> f64 {
        let mut worst = 0.0f64;
        for (k, a) in &self.coeffs {
            let b = other.coeffs.get(k).copied().unwrap_or_default();
            worst = worst.max((a - b).norm());
        }
        for (k, b) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                worst = worst.max(b.norm());
            }
        }
        worst
    }

    /// `‖self - other‖` in the coefficient (= L²) norm.
    pub fn distance(&self, other: &ShExpansion) -> f64 {
        let mut acc = 0.0;
        for (k, a) in &self.coeffs {
            let b = other.coeffs.get(k).copied().unwrap_or_default();
            acc += (a - b).norm_sqr();
        }
        for (k, b) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                acc += b.norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// True when only `M = 0` components are present.
    pub fn is_axial(&self) -> bool {
        self.coeffs.keys().all(|k| k.m() == 0)
    }

    pub fn has_only_even_i(&self) -> bool {
        self.coeffs.keys().all(|k| k.i() % 2 == 0)
    }

    /// Largest `k` with every stored `M` divisible by `k`; zero for an axial
    /// packet. The packet is invariant under `z`-rotations by `2π/k`.
    pub fn m_period(&self) -> u32 {
        self.coeffs
            .keys()
            .fold(0u32, |g, k| gcd(g, k.m().unsigned_abs()))
    }

    /// Weighted sum of `Σ |b|²` per `I`, indexed by `I`.
    pub fn weights_by_i(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.i_max as usize + 1];
        for (k, b) in &self.coeffs {
            w[k.i() as usize] += b.norm_sqr();
        }
        w
    }

    /// Dense `M = -I..=I` block for one `I`.
    pub(crate) fn block(&self, i: u32) -> Vec<Complex64> {
        let mut v = vec![Complex64::default(); 2 * i as usize + 1];
        let lo = AngularIndex::new(i, -(i as i32)).unwrap();
        let hi = AngularIndex::new(i, i as i32).unwrap();
        for (k, b) in self.coeffs.range(lo..=hi) {
            v[(k.m() + i as i32) as usize] = *b;
        }
        v
    }

    /// Distinct `I` values present, ascending.
    pub fn i_values(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.coeffs.keys().map(|k| k.i()).collect();
        v.dedup();
        v
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `ln sinh(y)` for `y > 0` without overflow.
fn ln_sinh(y: f64) -> f64 {
    if y > 20.0 {
        y - std::f64::consts::LN_2 + (-(-2.0 * y).exp()).ln_1p()
    } else {
        y.sinh().ln()
    }
}

/// Coefficients of the asymmetric packet from the double sum over the
/// exponents `(l, l')` of `sinθ e^{iφ}` and `sinθ e^{-iφ}`.
///
/// With `Y^l_l ∝ (-1)^l sin^l θ e^{ilφ}` (Condon–Shortley) the summand
/// carries `(-1)^l`; this is what places the packet on the `+x` axis.
///
/// Returns one dense block per `I = 0..=cap`, indexed by `M + I`, before
/// any truncation or renormalization.
pub fn exponential_coefficients(n: f64, eta: f64, cap: u32) -> Vec<Vec<f64>> {
    let ln_pref = 0.5 * ((2.0 * n).ln() - ln_sinh(2.0 * n));
    let log_weight = |k: u32, base: f64| -> Option<f64> {
        if k == 0 {
            Some(-0.5 * ln_factorial(0))
        } else if base <= 0.0 {
            None
        } else {
            Some(k as f64 * (n * base).ln() - 0.5 * ln_factorial(2 * k as u64))
        }
    };
    // Terms below this never reach the 1e-16 scale of any coefficient.
    let ln_floor = (1e-22f64).ln();
    let l_hard = cap + (6.0 * n) as u32 + 60;
    let plus: Vec<Option<f64>> = (0..=l_hard).map(|l| log_weight(l, 1.0 + eta)).collect();
    let minus: Vec<Option<f64>> = (0..=l_hard).map(|l| log_weight(l, 1.0 - eta)).collect();

    let mut blocks: Vec<Vec<f64>> = (0..=cap).map(|i| vec![0.0; 2 * i as usize + 1]).collect();
    for (l, wl) in plus.iter().enumerate() {
        let Some(wl) = wl else { continue };
        for (lp, wlp) in minus.iter().enumerate() {
            let Some(wlp) = wlp else { continue };
            let ln_t = ln_pref + wl + wlp;
            if ln_t < ln_floor {
                continue;
            }
            let (l, lp) = (l as i32, lp as i32);
            let big_m = l - lp;
            if big_m.unsigned_abs() > cap {
                continue;
            }
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let t = sign * ln_t.exp();
            let i_hi = (l + lp).min(cap as i32);
            let mut i = big_m.abs();
            if (l + lp + i) % 2 != 0 {
                i += 1;
            }
            while i <= i_hi {
                let c0 = clebsch_gordan(l, lp, 0, 0, i, 0).unwrap();
                let cm = clebsch_gordan(l, lp, l, -lp, i, big_m).unwrap();
                blocks[i as usize][(big_m + i) as usize] += t * c0 * cm / ((2 * i + 1) as f64).sqrt();
                i += 2;
            }
        }
    }
    blocks
}

/// Shortest prefix of per-`I` weights reaching `1 - epsilon`.
fn truncation_point(weights: &[f64], policy: &TruncationPolicy, cap: u32) -> Result<u32> {
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if cum >= 1.0 - policy.epsilon {
            return Ok(i as u32);
        }
    }
    Err(Error::TruncationFailure {
        cap,
        captured: cum,
        epsilon: policy.epsilon,
    })
}

/// The asymmetric exponential packet, symmetry axis along `x`.
pub fn build_asymmetric(spec: &WavePacketSpec) -> Result<ShExpansion> {
    let policy = spec.truncation;
    let cap = policy.cap_for(spec.n);
    let blocks = exponential_coefficients(spec.n, spec.eta, cap);
    let weights: Vec<f64> = blocks.iter().map(|b| b.iter().map(|x| x * x).sum()).collect();
    let i_cut = truncation_point(&weights, &policy, cap)?;
    let coeffs = blocks
        .into_iter()
        .enumerate()
        .take(i_cut as usize + 1)
        .flat_map(|(i, block)| {
            let i = i as u32;
            block.into_iter().enumerate().map(move |(j, b)| {
                (
                    AngularIndex::new(i, j as i32 - i as i32).unwrap(),
                    Complex64::new(b, 0.0),
                )
            })
        });
    let info = PacketInfo {
        n: Some(spec.n),
        eta: Some(spec.eta),
        symmetry: Some(Symmetry::Asymmetric),
        source: None,
    };
    ShExpansion::from_coefficients(coeffs, Frame::SymmetryAxisIsX, info)?.normalized()
}

/// The linear (`η = 0`) packet in the frame where its axis is `z`:
/// `b_{I0} = sqrt(2N / sinh 2N) sqrt(2I+1) i_I(N)`.
pub fn build_linear(n: f64, truncation: TruncationPolicy) -> Result<ShExpansion> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid(format!("N = {n} must be positive")));
    }
    let cap = truncation.cap_for(n);
    let scaled = mod_sph_bessel_i_scaled_all(cap, n)?;
    // e^N / sqrt(sinh 2N) = sqrt(2 / (1 - e^{-4N}))
    let pref = (2.0 * n).sqrt() * (-2.0 / (-4.0 * n).exp_m1()).sqrt();
    let amps: Vec<f64> = scaled
        .iter()
        .enumerate()
        .map(|(i, s)| pref * ((2 * i + 1) as f64).sqrt() * s)
        .collect();
    let weights: Vec<f64> = amps.iter().map(|a| a * a).collect();
    let i_cut = truncation_point(&weights, &truncation, cap)?;
    let coeffs = amps
        .into_iter()
        .enumerate()
        .take(i_cut as usize + 1)
        .map(|(i, a)| (AngularIndex::new(i as u32, 0).unwrap(), Complex64::new(a, 0.0)));
    let info = PacketInfo {
        n: Some(n),
        eta: Some(0.0),
        symmetry: Some(Symmetry::Asymmetric),
        source: None,
    };
    ShExpansion::from_coefficients(coeffs, Frame::SymmetryAxisIsZ, info)?.normalized()
}

/// Ratio of the interference term to the direct term in the symmetric
/// normalization: `sin(2ηN) / (η sinh 2N)`, with its `η → 0` limit.
pub fn interference_ratio(n: f64, eta: f64) -> f64 {
    let x = 2.0 * eta * n;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    // 2N / sinh 2N
    let direct = ((2.0 * n).ln() - ln_sinh(2.0 * n)).exp();
    sinc * direct
}

/// Even-`I` part scaled by the exact symmetric normalization, before the
/// final renormalization. Exposed for tests of that constant.
pub(crate) fn symmetrize_unnormalized(asym: &ShExpansion, spec: &WavePacketSpec) -> Result<ShExpansion> {
    let factor = (2.0 / (1.0 + interference_ratio(spec.n, spec.eta))).sqrt();
    let coeffs = asym
        .iter()
        .filter(|(k, _)| k.i() % 2 == 0)
        .map(|(k, b)| (k, b * factor));
    let info = PacketInfo {
        symmetry: Some(Symmetry::Symmetric),
        ..asym.info().clone()
    };
    ShExpansion::from_coefficients(coeffs, asym.frame(), info)
}

/// The symmetric combination of a packet and its antipode: odd `I` vanish,
/// even `I` are rescaled by the exact normalization and the result is
/// renormalized.
pub fn symmetrize(asym: &ShExpansion, spec: &WavePacketSpec) -> Result<ShExpansion> {
    symmetrize_unnormalized(asym, spec)?.normalized()
}

/// Builds whichever packet the spec describes.
pub fn build(spec: &WavePacketSpec) -> Result<ShExpansion> {
    let asym = build_asymmetric(spec)?;
    match spec.symmetry {
        Symmetry::Asymmetric => Ok(asym),
        Symmetry::Symmetric => symmetrize(&asym, spec),
    }
}

/// A linear (`η = 0`) packet of either symmetry in the frame where its axis
/// is `z`, so that only `M = 0` appears.
pub fn build_axial(spec: &WavePacketSpec) -> Result<ShExpansion> {
    if spec.eta != 0.0 {
        return Err(Error::invalid(format!(
            "the z-axis frame needs eta = 0, got {}",
            spec.eta
        )));
    }
    let asym = build_linear(spec.n, spec.truncation)?;
    match spec.symmetry {
        Symmetry::Asymmetric => Ok(asym),
        Symmetry::Symmetric => symmetrize(&asym, spec),
    }
}

/// Angular-momentum expectation values (`ħ = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub var_lx: f64,
    pub var_ly: f64,
    pub l2: f64,
    /// Positive root of `Ī(Ī+1) = <L²>`.
    pub i_bar: f64,
}

/// `Ī` from `Ī(Ī+1) = <L²>`.
pub fn i_bar_from_l2(l2: f64) -> f64 {
    0.5 * ((1.0 + 4.0 * l2.max(0.0)).sqrt() - 1.0)
}

/// `L₊` and `L₋` applied to one `I` block (`M = -I..=I`).
fn ladder(i: u32, v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let ii = i as f64 * (i as f64 + 1.0);
    let n = v.len();
    let mut up = vec![Complex64::default(); n];
    let mut down = vec![Complex64::default(); n];
    for (j, b) in v.iter().enumerate() {
        let m = j as f64 - i as f64;
        if j + 1 < n {
            up[j + 1] += b * (ii - m * (m + 1.0)).sqrt();
        }
        if j > 0 {
            down[j - 1] += b * (ii - m * (m - 1.0)).sqrt();
        }
    }
    (up, down)
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Expectation values via ladder-operator matrix elements.
pub fn observables(wp: &ShExpansion) -> Observables {
    let norm = wp.norm_sqr();
    let (mut lplus, mut lz, mut lx2, mut ly2, mut l2) =
        (Complex64::default(), 0.0, 0.0, 0.0, 0.0);
    for i in wp.i_values() {
        let v = wp.block(i);
        let (up, down) = ladder(i, &v);
        lplus += v.iter().zip(&up).map(|(a, b)| a.conj() * b).sum::<Complex64>();
        let sum: Vec<Complex64> = up.iter().zip(&down).map(|(a, b)| a + b).collect();
        let diff: Vec<Complex64> = up.iter().zip(&down).map(|(a, b)| a - b).collect();
        lx2 += 0.25 * norm_sqr(&sum);
        ly2 += 0.25 * norm_sqr(&diff);
        let w = norm_sqr(&v);
        l2 += i as f64 * (i as f64 + 1.0) * w;
        lz += v
            .iter()
            .enumerate()
            .map(|(j, b)| (j as f64 - i as f64) * b.norm_sqr())
            .sum::<f64>();
    }
    let (lx, ly) = (lplus.re / norm, lplus.im / norm);
    let l2 = l2 / norm;
    Observables {
        lx,
        ly,
        lz: lz / norm,
        var_lx: (lx2 / norm - lx * lx).max(0.0),
        var_ly: (ly2 / norm - ly * ly).max(0.0),
        l2,
        i_bar: i_bar_from_l2(l2),
    }
}

/// `‖(L_x + iη L_y) Ψ‖`, zero for an intelligent spin state.
pub fn intelligent_residual(wp: &ShExpansion, eta: f64) -> f64 {
    // L_x + iη L_y = ((1+η) L₊ + (1-η) L₋) / 2
    let mut acc = 0.0;
    for i in wp.i_values() {
        let v = wp.block(i);
        let (up, down) = ladder(i, &v);
        acc += up
            .iter()
            .zip(&down)
            .map(|(a, b)| (0.5 * ((1.0 + eta) * a + (1.0 - eta) * b)).norm_sqr())
            .sum::<f64>();
    }
    acc.sqrt()
}
