//! Fractional revivals of a rigid rotor.
//!
//! At `t = (m/n) T_rev` the quadratic phase `e^{-2πi I² m/n}` is periodic in
//! `I`, so it is a finite Fourier sum of linear phases. Each linear phase is a
//! free rotation by an effective time `t_s`, and the packet splits into the
//! corresponding fractional waves with Gauss-sum weights `a_s`.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::angular::pairwise_sum;
use crate::dynamics::EnergyModel;
use crate::error::{Error, Result};
use crate::wavepacket::ShExpansion;

/// Squared amplitudes below this count as zero in a schedule.
const ZERO_WEIGHT: f64 = 1e-18;

/// `(m/n) T_rev` with `gcd(m, n) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalTime {
    m: u32,
    n: u32,
}

impl RationalTime {
    /// Requires `n > 0`, `m > 0` and `gcd(m, n) = 1`.
    pub fn new(m: u32, n: u32) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("m and n must be positive, got {m}/{n}")));
        }
        if gcd(m as u64, n as u64) != 1 {
            return Err(Error::invalid(format!("{m}/{n} is not in lowest terms")));
        }
        Ok(Self { m, n })
    }

    /// `m/n` in lowest terms.
    pub fn reduced(m: u32, n: u32) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("m and n must be positive, got {m}/{n}")));
        }
        let g = gcd(m as u64, n as u64) as u32;
        Self::new(m / g, n / g)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `m/n`, the time in units of `T_rev`.
    pub fn value(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

impl fmt::Display for RationalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.m, self.n)
    }
}

impl FromStr for RationalTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, n) = s
            .split_once('/')
            .ok_or_else(|| Error::invalid(format!("expected m/n, got '{s}'")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| Error::invalid(format!("expected m/n, got '{s}'")))
        };
        Self::new(parse(m)?, parse(n)?)
    }
}

/// Which `I` values the packet contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    AllI,
    /// Symmetric packets: only even `I`.
    EvenIOnly,
}

impl Parity {
    pub fn of(wp: &ShExpansion) -> Self {
        if wp.has_only_even_i() {
            Parity::EvenIOnly
        } else {
            Parity::AllI
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::AllI => "all",
            Parity::EvenIOnly => "even",
        })
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Parity::AllI),
            "even" => Ok(Parity::EvenIOnly),
            _ => Err(Error::invalid(format!("parity must be 'all' or 'even', got '{s}'"))),
        }
    }
}

/// `e^{-2πi I(I+1) m/n} = Σ_s a_s e^{-2πi I t_s}` over the admitted `I`,
/// with `t_s = m/n + s/d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RevivalSchedule {
    pub time: RationalTime,
    pub parity: Parity,
    /// Period of the Gauss phases in the summation variable.
    pub l: u32,
    /// Denominator of the effective-time offsets.
    pub offset_denominator: u32,
    /// Number of non-zero amplitudes.
    pub q: u32,
    /// Non-zero `(s, a_s)`, ascending in `s`.
    pub amps: Vec<(u32, Complex64)>,
}

impl RevivalSchedule {
    /// `t_s` in units of `T_rev`, as an exact fraction `(num, den)`.
    pub fn effective_time_exact(&self, s: u32) -> (u64, u64) {
        let (m, n, d) = (self.time.m as u64, self.time.n as u64, self.offset_denominator as u64);
        let num = m * d + s as u64 * n;
        let den = n * d;
        let g = gcd(num, den);
        (num / g, den / g)
    }

    /// `t_s / T_rev`.
    pub fn effective_time(&self, s: u32) -> f64 {
        let (a, b) = self.effective_time_exact(s);
        a as f64 / b as f64
    }

    /// The term whose fractional wave is the initial packet itself, when
    /// its amplitude is non-zero.
    pub fn home_index(&self) -> Option<u32> {
        // t_s is a whole number of periods: integer for all I, a multiple of
        // 1/2 for even I
        let unit = match self.parity {
            Parity::AllI => 1,
            Parity::EvenIOnly => 2,
        };
        self.amps
            .iter()
            .map(|(s, _)| *s)
            .find(|&s| {
                let (_, den) = self.effective_time_exact(s);
                unit % den == 0
            })
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.amps.iter().map(|(_, a)| a.norm_sqr()).collect::<Vec<_>>())
    }
}

/// `e^{2πi num/den}` from exact integers.
fn turn(num: i128, den: i128) -> Complex64 {
    let r = num.rem_euclid(den);
    // fold to (-1/2, 1/2] turns so the angle is small and exact
    let r = if 2 * r > den { r - den } else { r };
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / den as f64)
}

/// `(1/p) Σ_{J<p} e^{-2πi J² a/b} e^{2πi J k/p}` for `k = 0..p`.
fn gauss_dft(a: u64, b: u64, p: u64) -> Vec<Complex64> {
    (0..p)
        .map(|k| {
            let terms: Vec<Complex64> = (0..p)
                .map(|j| {
                    let (j, k, a, b, p) = (j as i128, k as i128, a as i128, b as i128, p as i128);
                    // -j² a/b + j k/p over the common denominator b·p
                    turn(-j * j * a * p + j * k * b, b * p)
                })
                .collect();
            let re: Vec<f64> = terms.iter().map(|z| z.re).collect();
            let im: Vec<f64> = terms.iter().map(|z| z.im).collect();
            Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) / p as f64
        })
        .collect()
}

/// Period in `J` of `e^{-2πi J² a/b}` for `a/b` in lowest terms.
fn quadratic_period(b: u64) -> u64 {
    if b.is_multiple_of(4) {
        b / 2
    } else {
        b
    }
}

/// Gauss-sum amplitudes by inverse DFT over one period of the phases.
pub fn schedule(rt: RationalTime, parity: Parity) -> RevivalSchedule {
    let (m, n) = (rt.m as u64, rt.n as u64);
    let (l, d, coeffs): (u64, u64, Vec<(u32, Complex64)>) = match parity {
        Parity::AllI => {
            let l = quadratic_period(n);
            let c = gauss_dft(m, n, l);
            (l, l, c.into_iter().enumerate().map(|(s, a)| (s as u32, a)).collect())
        }
        Parity::EvenIOnly => {
            // I = 2J turns the phase into e^{-2πi J² (4m/n)}
            let g = gcd(4 * m, n);
            let (me, ne) = (4 * m / g, n / g);
            let p = quadratic_period(ne);
            let c = gauss_dft(me, ne, p);
            // e^{-2πi I s/d} with I = 2J must equal e^{-2πi J k/p}
            let d = if n % 4 == 0 { 2 * p } else { p };
            let amps = (0..p)
                .map(|s| {
                    let k = (2 * s * p / d) % p;
                    (s as u32, c[k as usize])
                })
                .collect();
            (p, d, amps)
        }
    };
    let amps: Vec<(u32, Complex64)> = coeffs
        .into_iter()
        .filter(|(_, a)| a.norm_sqr() > ZERO_WEIGHT)
        .collect();
    RevivalSchedule {
        time: rt,
        parity,
        l: l as u32,
        offset_denominator: d as u32,
        q: amps.len() as u32,
        amps,
    }
}

/// Number of fractional waves expected from the parity case analysis.
pub fn predicted_q(rt: RationalTime, parity: Parity) -> u32 {
    let n = rt.n;
    match parity {
        Parity::AllI => {
            if n % 2 == 1 {
                n
            } else {
                n / 2
            }
        }
        Parity::EvenIOnly => {
            if n % 2 == 1 {
                n
            } else if !n.is_multiple_of(4) {
                n / 2
            } else {
                let np = n / 4;
                if np % 2 == 1 {
                    np
                } else {
                    np / 2
                }
            }
        }
    }
}

/// Text table `m n parity l q s re im`, one line per non-zero amplitude.
pub fn format_schedule(s: &RevivalSchedule) -> String {
    let mut out = String::new();
    for (idx, a) in &s.amps {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {:.17e} {:.17e}",
            s.time.m, s.time.n, s.parity, s.l, s.q, idx, a.re, a.im
        );
    }
    out
}

/// One fractional wave with its weight in the decomposition.
#[derive(Debug, Clone)]
pub struct FractionalWave {
    pub s: u32,
    pub amplitude: Complex64,
    /// `t_s / T_rev`.
    pub effective_time: f64,
    pub wave: ShExpansion,
}

/// `Ψ_cl^(s) = Σ b_{IM} Y^I_M e^{-2πi I t_s}`, free rotation to `t_s`.
pub fn free_rotation(wp: &ShExpansion, schedule: &RevivalSchedule, s: u32) -> ShExpansion {
    let (num, den) = schedule.effective_time_exact(s);
    wp.map_coefficients(|k, b| b * turn(-(k.i() as i128) * num as i128, den as i128))
}

/// Decomposes a rigid-rotor packet at `(m/n) T_rev` into fractional waves.
/// The parity follows the `I` content of the packet.
pub fn fractional_waves(wp: &ShExpansion, rt: RationalTime, model: &EnergyModel) -> Result<Vec<FractionalWave>> {
    if !model.is_rigid() {
        return Err(Error::UnsupportedModel(
            "fractional waves are exact only for a rigid rotor".into(),
        ));
    }
    let sched = schedule(rt, Parity::of(wp));
    Ok(fractional_waves_for(wp, &sched))
}

pub fn fractional_waves_for(wp: &ShExpansion, sched: &RevivalSchedule) -> Vec<FractionalWave> {
    sched
        .amps
        .iter()
        .map(|&(s, a)| FractionalWave {
            s,
            amplitude: a,
            effective_time: sched.effective_time(s),
            wave: free_rotation(wp, sched, s),
        })
        .collect()
}

/// `Σ_s a_s Ψ_cl^(s)`.
pub fn recombine(waves: &[FractionalWave]) -> Result<ShExpansion> {
    let first = waves
        .first()
        .ok_or_else(|| Error::invalid("no fractional waves to recombine"))?;
    let mut acc = first.wave.map_coefficients(|_, b| b * first.amplitude);
    for w in &waves[1..] {
        let mut it = w.wave.iter();
        acc = acc.map_coefficients(|_, b| {
            let (_, c) = it.next().unwrap();
            b + c * w.amplitude
        });
    }
    Ok(acc)
}

/// How the fractional waves relate to the initial packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloneClass {
    /// Rotated copies of the initial packet account for the whole state.
    Clones,
    /// Rotated copies capture less than half of the state.
    Mutants,
    Mixed,
}

impl fmt::Display for CloneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CloneClass::Clones => "clones",
            CloneClass::Mutants => "mutants",
            CloneClass::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClonePeak {
    /// Rotation angle `φ₀` in `(-π, π]`: `R_z(φ₀)Ψ(0)` is the matching copy.
    pub phi: f64,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloneReport {
    /// Sorted by overlap, largest first.
    pub peaks: Vec<ClonePeak>,
    pub classification: CloneClass,
    pub q_observed: u32,
    /// `‖PΨ(t)‖²` for the projector onto the detected copies.
    pub captured: f64,
    /// `‖Ψ(t) - PΨ(t)‖²`.
    pub mismatch: f64,
}

/// Samples of the rotation overlap scan.
pub const SCAN_SAMPLES: usize = 2048;
/// Peaks below this fraction of the highest one are ignored.
pub const PEAK_FRACTION: f64 = 0.5;
/// Largest residual for which the copies explain the whole state.
pub const CLONE_MISMATCH: f64 = 1e-3;

/// Overlap profile `C(φ₀) = |<R_z(φ₀)Ψ₀|Ψ_t>|²` as a trigonometric sum.
struct OverlapProfile {
    terms: Vec<(f64, Complex64)>,
}

impl OverlapProfile {
    fn new(wp0: &ShExpansion, wpt: &ShExpansion) -> Self {
        let mut by_m = std::collections::BTreeMap::<i32, Complex64>::new();
        for (k, a) in wp0.iter() {
            let b = wpt.get(k.i(), k.m());
            *by_m.entry(k.m()).or_default() += a.conj() * b;
        }
        Self {
            terms: by_m.into_iter().map(|(m, s)| (m as f64, s)).collect(),
        }
    }

    /// `C`, `C'`, `C''` at `φ`.
    fn eval(&self, phi: f64) -> (f64, f64, f64) {
        let (mut f, mut f1, mut f2) = (Complex64::default(), Complex64::default(), Complex64::default());
        for &(m, s) in &self.terms {
            let e = Complex64::from_polar(1.0, -m * phi) * s;
            f += e;
            f1 += e * Complex64::new(0.0, -m);
            f2 += e * (-m * m);
        }
        let c = f.norm_sqr();
        let c1 = 2.0 * (f.conj() * f1).re;
        let c2 = 2.0 * (f1.norm_sqr() + (f.conj() * f2).re);
        (c, c1, c2)
    }
}

fn wrap(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Finds rotated copies of `wp0` inside `wpt`.
///
/// Packets invariant under `z`-rotations by `2π/k` are scanned over one
/// such sector only, so antipodal partners of a symmetric packet are not
/// counted twice.
pub fn clone_scan(wp0: &ShExpansion, wpt: &ShExpansion) -> Result<CloneReport> {
    if wp0.i_max() != wpt.i_max() || wp0.frame() != wpt.frame() {
        return Err(Error::InvalidPair(format!(
            "truncations differ: i_max {} vs {}",
            wp0.i_max(),
            wpt.i_max()
        )));
    }
    let norm0 = wp0.norm_sqr().sqrt();
    let normt = wpt.norm_sqr().sqrt();
    for (what, nrm) in [("initial", norm0), ("evolved", normt)] {
        if (nrm - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidPair(format!("{what} packet has norm {nrm}, expected 1")));
        }
    }
    let profile = OverlapProfile::new(wp0, wpt);
    let k = wp0.m_period();
    let mut peaks = Vec::new();
    if k == 0 {
        // axial about z: rotation changes nothing
        peaks.push(ClonePeak {
            phi: 0.0,
            overlap: profile.eval(0.0).0.min(1.0),
        });
    } else {
        let sector = 2.0 * PI / k as f64;
        let h = sector / SCAN_SAMPLES as f64;
        let vals: Vec<f64> = (0..SCAN_SAMPLES).map(|j| profile.eval(j as f64 * h).0).collect();
        let top = vals.iter().cloned().fold(0.0, f64::max);
        for j in 0..SCAN_SAMPLES {
            let prev = vals[(j + SCAN_SAMPLES - 1) % SCAN_SAMPLES];
            let next = vals[(j + 1) % SCAN_SAMPLES];
            let v = vals[j];
            if !(v > prev && v >= next) || v < PEAK_FRACTION * top * 0.9 {
                continue;
            }
            let denom = prev - 2.0 * v + next;
            let mut phi = j as f64 * h + if denom < 0.0 { 0.5 * h * (prev - next) / denom } else { 0.0 };
            for _ in 0..4 {
                let (_, c1, c2) = profile.eval(phi);
                if c2 >= 0.0 {
                    break;
                }
                let step = c1 / c2;
                if step.abs() > h {
                    break;
                }
                phi -= step;
            }
            let c = profile.eval(phi).0;
            peaks.push(ClonePeak {
                phi: wrap(phi),
                overlap: c.clamp(0.0, 1.0),
            });
        }
        let best = peaks.iter().map(|p| p.overlap).fold(0.0, f64::max);
        peaks.retain(|p| p.overlap >= PEAK_FRACTION * best);
    }
    peaks.sort_by(|a, b| b.overlap.total_cmp(&a.overlap).then(a.phi.total_cmp(&b.phi)));
    let (captured, mismatch) = projection(wp0, wpt, &peaks);
    let classification = if mismatch < CLONE_MISMATCH {
        CloneClass::Clones
    } else if captured < 0.5 {
        CloneClass::Mutants
    } else {
        CloneClass::Mixed
    };
    Ok(CloneReport {
        q_observed: peaks.len() as u32,
        peaks,
        classification,
        captured,
        mismatch,
    })
}

/// Least-squares fit of `wpt` by the rotated copies at the detected angles.
fn projection(wp0: &ShExpansion, wpt: &ShExpansion, peaks: &[ClonePeak]) -> (f64, f64) {
    let copies: Vec<ShExpansion> = peaks.iter().map(|p| wp0.rotate_z(p.phi)).collect();
    let q = copies.len();
    if q == 0 {
        return (0.0, 1.0);
    }
    let gram = DMatrix::from_fn(q, q, |r, c| copies[r].inner(&copies[c]));
    let rhs = DVector::from_fn(q, |r, _| copies[r].inner(wpt));
    let coef = match gram.clone().svd(true, true).solve(&rhs, 1e-12) {
        Ok(c) => c,
        Err(_) => return (0.0, 1.0),
    };
    // ‖PΨ‖² = c† G c = c† r
    let captured = coef.iter().zip(rhs.iter()).map(|(c, r)| c.conj() * r).sum::<Complex64>().re;
    let total = wpt.norm_sqr();
    (captured.clamp(0.0, total), (total - captured).max(0.0))
}

/// Revival times `m/n ≤ t_max` with `n ≤ n_max`, ascending.
pub fn farey_windows(n_max: u32, t_max: f64) -> Vec<RationalTime> {
    let mut v = Vec::new();
    for n in 1..=n_max {
        for m in 1..=n {
            if gcd(m as u64, n as u64) == 1 && (m as f64) <= t_max * n as f64 {
                v.push(RationalTime { m, n });
            }
        }
    }
    v.sort_by(|a, b| (a.m as u64 * b.n as u64).cmp(&(b.m as u64 * a.n as u64)));
    v
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
