//! Rotational energy models, time evolution of expansions and the
//! classical/revival time scales.
//!
//! Units: `ħ = 1`. Energies and angular frequencies share one unit and times
//! are measured in its inverse. Physical units travel as metadata only.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::wavepacket::ShExpansion;

/// `2π` split into a head and a tail for extended-precision reduction.
const TWO_PI_HI: f64 = 2.0 * PI;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Below this `|E''|` the revival time is considered undefined.
pub const DEGENERATE_CURVATURE: f64 = 1e-15;

/// Energy levels `E_I` of a `K = 0` rotational band.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyModel {
    /// `E_I = ω₀ I(I+1)`.
    RigidRotor { omega0: f64 },
    /// `E_I = a x + b x²` with `x = I(I+1)`.
    Polynomial { a: f64, b: f64 },
    /// Explicit levels, possibly for even `I` only.
    Tabulated(LevelTable),
}

/// Energies by `I`, with an optional unit label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelTable {
    levels: BTreeMap<u32, f64>,
    unit: Option<String>,
}

impl LevelTable {
    /// Rejects non-finite energies and bands that decrease with `I`.
    pub fn new(levels: BTreeMap<u32, f64>, unit: Option<String>) -> Result<Self> {
        let mut prev: Option<(u32, f64)> = None;
        for (&i, &e) in &levels {
            if !e.is_finite() {
                return Err(Error::invalid(format!("level I={i} is not finite")));
            }
            if let Some((pi, pe)) = prev {
                if e < pe {
                    return Err(Error::invalid(format!(
                        "levels must be non-decreasing: E({i}) = {e} < E({pi}) = {pe}"
                    )));
                }
            }
            prev = Some((i, e));
        }
        Ok(Self { levels, unit })
    }

    pub fn levels(&self) -> &BTreeMap<u32, f64> {
        &self.levels
    }

    pub fn unit(&self) -> Option<&str> {
        self.unit.as_deref()
    }

    pub fn get(&self, i: u32) -> Option<f64> {
        self.levels.get(&i).copied()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

impl EnergyModel {
    pub fn rigid_rotor(omega0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::invalid(format!("omega0 must be positive, got {omega0}")));
        }
        Ok(EnergyModel::RigidRotor { omega0 })
    }

    pub fn polynomial(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::invalid("polynomial coefficients must be finite"));
        }
        Ok(EnergyModel::Polynomial { a, b })
    }

    pub fn is_rigid(&self) -> bool {
        matches!(self, EnergyModel::RigidRotor { .. })
    }

    /// `E_I`.
    pub fn energy(&self, i: u32) -> Result<f64> {
        let x = i as f64 * (i as f64 + 1.0);
        match self {
            EnergyModel::RigidRotor { omega0 } => Ok(omega0 * x),
            EnergyModel::Polynomial { a, b } => Ok(a * x + b * x * x),
            EnergyModel::Tabulated(t) => t.get(i).ok_or(Error::MissingLevel(i)),
        }
    }

    /// `E_I t` reduced to `(-π, π]`.
    pub fn phase(&self, i: u32, t: f64) -> Result<f64> {
        Ok(reduce_angle_product(self.energy(i)?, t))
    }

    /// Checks that every `I` of `wp` has a level.
    pub fn covers(&self, wp: &ShExpansion) -> Result<()> {
        if let EnergyModel::Tabulated(t) = self {
            for i in wp.i_values() {
                if t.get(i).is_none() {
                    return Err(Error::MissingLevel(i));
                }
            }
        }
        Ok(())
    }
}

/// `x·y mod 2π` in `(-π, π]`, keeping the rounding error of the product and
/// of `2π` itself so large arguments stay accurate.
pub fn reduce_angle_product(x: f64, y: f64) -> f64 {
    let p = x * y;
    if !p.is_finite() {
        return f64::NAN;
    }
    let err = x.mul_add(y, -p);
    let k = (p / TWO_PI_HI).round();
    let r = (-k).mul_add(TWO_PI_HI, p);
    let mut r = (-k).mul_add(TWO_PI_LO, r) + err;
    if r > PI {
        r -= TWO_PI_HI;
    } else if r <= -PI {
        r += TWO_PI_HI;
    }
    r
}

/// `b_{IM} → b_{IM} e^{-i E_I t}`.
pub fn evolve(wp: &ShExpansion, model: &EnergyModel, t: f64) -> Result<ShExpansion> {
    model.covers(wp)?;
    let mut phases = BTreeMap::new();
    for i in wp.i_values() {
        let ph = model.phase(i, t)?;
        phases.insert(i, Complex64::from_polar(1.0, -ph));
    }
    Ok(wp.map_coefficients(|k, b| b * phases[&k.i()]))
}

/// Classical period and revival time near a given mean `I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScales {
    pub t_cl: f64,
    pub t_rev: f64,
    pub i_bar_used: f64,
}

/// `T_cl = 2π/|E'(Ī)|`, `T_rev = 2π/(½|E''(Ī)|)`.
///
/// Derivatives are with respect to `I`. A rigid rotor gives the exact
/// `T_rev = 2π/ω₀`; tabulated bands use central differences over
/// `I-2, I, I+2` and interpolate linearly between lattice points.
pub fn time_scales(model: &EnergyModel, i_bar: f64) -> Result<TimeScales> {
    if !(i_bar.is_finite() && i_bar >= 0.0) {
        return Err(Error::invalid(format!("mean I must be non-negative, got {i_bar}")));
    }
    let (d1, d2) = match model {
        EnergyModel::RigidRotor { omega0 } => {
            let t_rev = 2.0 * PI / omega0;
            return Ok(TimeScales {
                t_cl: t_rev / (2.0 * i_bar + 1.0),
                t_rev,
                i_bar_used: i_bar,
            });
        }
        EnergyModel::Polynomial { a, b } => {
            let x = i_bar * (i_bar + 1.0);
            let dx = 2.0 * i_bar + 1.0;
            let g = a + 2.0 * b * x;
            (g * dx, 2.0 * g + 2.0 * b * dx * dx)
        }
        EnergyModel::Tabulated(t) => tabulated_derivatives(t, i_bar)?,
    };
    if d2.abs() < DEGENERATE_CURVATURE {
        return Err(Error::DegenerateSpectrum(d2.abs()));
    }
    if d1 == 0.0 {
        return Err(Error::DegenerateSpectrum(0.0));
    }
    Ok(TimeScales {
        t_cl: 2.0 * PI / d1.abs(),
        t_rev: 4.0 * PI / d2.abs(),
        i_bar_used: i_bar,
    })
}

fn tabulated_derivatives(t: &LevelTable, i_bar: f64) -> Result<(f64, f64)> {
    let lv = t.levels();
    // lattice points where the three-point stencil is available
    let centers: Vec<u32> = lv
        .keys()
        .copied()
        .filter(|&i| i % 2 == 0 && i >= 2 && lv.contains_key(&(i - 2)) && lv.contains_key(&(i + 2)))
        .collect();
    if centers.is_empty() {
        return Err(Error::InsufficientData(
            "need levels at I-2, I, I+2 for some even I".into(),
        ));
    }
    let at = |c: u32| {
        let (lo, mid, hi) = (lv[&(c - 2)], lv[&c], lv[&(c + 2)]);
        ((hi - lo) / 4.0, (hi - 2.0 * mid + lo) / 4.0)
    };
    let first = centers[0] as f64;
    let last = *centers.last().unwrap() as f64;
    if i_bar <= first || centers.len() == 1 {
        return Ok(at(centers[0]));
    }
    if i_bar >= last {
        return Ok(at(*centers.last().unwrap()));
    }
    let k = centers.partition_point(|&c| (c as f64) <= i_bar);
    let (c0, c1) = (centers[k - 1], centers[k]);
    let (a0, a1) = (at(c0), at(c1));
    let w = (i_bar - c0 as f64) / (c1 - c0) as f64;
    Ok((a0.0 + w * (a1.0 - a0.0), a0.1 + w * (a1.1 - a0.1)))
}

/// Least-squares fit of `E_I ≈ a x + b x²`, `x = I(I+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialFit {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square residual over the fitted levels.
    pub rms: f64,
    pub points: usize,
}

impl PolynomialFit {
    pub fn model(&self) -> EnergyModel {
        EnergyModel::Polynomial { a: self.a, b: self.b }
    }
}

pub fn fit_polynomial(levels: &BTreeMap<u32, f64>) -> Result<PolynomialFit> {
    if levels.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "polynomial fit needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    let n = levels.len();
    let xs: Vec<f64> = levels.keys().map(|&i| i as f64 * (i as f64 + 1.0)).collect();
    let ys: Vec<f64> = levels.values().copied().collect();
    // column scaling keeps the design matrix well conditioned
    let s1 = xs.iter().fold(0.0f64, |m, x| m.max(*x)).max(1.0);
    let s2 = s1 * s1;
    let design = DMatrix::from_fn(n, 2, |r, c| if c == 0 { xs[r] / s1 } else { xs[r] * xs[r] / s2 });
    let rhs = DVector::from_vec(ys.clone());
    let svd = design.clone().svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    if svd.rank(1e-12) < 2 {
        return Err(Error::InsufficientData(
            "levels do not determine both coefficients".into(),
        ));
    }
    let (a, b) = (sol[0] / s1, sol[1] / s2);
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (a * x + b * x * x)).powi(2))
        .sum();
    Ok(PolynomialFit {
        a,
        b,
        rms: (ss / n as f64).sqrt(),
        points: n,
    })
}

/// Levels `E_I` of a model for the given `I` values.
pub fn tabulate(model: &EnergyModel, is: impl IntoIterator<Item = u32>) -> Result<BTreeMap<u32, f64>> {
    is.into_iter().map(|i| Ok((i, model.energy(i)?))).collect()
}
