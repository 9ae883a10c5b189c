//! Probability densities on angle–time grids ("quantum carpets") and on
//! `θ×φ` meshes, plus their CSV and pixel-map emitters.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::angular::LegendreTable;
use crate::dynamics::{time_scales, EnergyModel};
use crate::error::{Error, Result};
use crate::io::Header;
use crate::wavepacket::{observables, ShExpansion};

/// Version written as `carpet-format` in every emitted artifact.
pub const CARPET_FORMAT: u32 = 1;

/// Smallest grid dimension accepted by [`carpet`].
pub const MIN_SAMPLES: usize = 16;

/// Expansion collapsed onto the harmonics of `φ` at one `θ`:
/// `Ψ(θ, φ) = Σ_M F_M e^{iMφ}`.
struct FourierRow {
    /// `(M, F_M)`, ascending `M`.
    terms: Vec<(i32, Complex64)>,
}

/// Per-`I` phase applied on top of the stored coefficients.
fn fourier_row(wp: &ShExpansion, table: &LegendreTable, phases: Option<&[Complex64]>) -> FourierRow {
    let l = wp.i_max() as i32;
    let mut f = vec![Complex64::default(); 2 * l as usize + 1];
    for (k, b) in wp.iter() {
        let mu = k.m().unsigned_abs();
        let mut p = table.get(k.i(), mu);
        if k.m() < 0 && mu % 2 == 1 {
            p = -p;
        }
        let b = match phases {
            Some(ph) => b * ph[k.i() as usize],
            None => b,
        };
        f[(k.m() + l) as usize] += b * p;
    }
    FourierRow {
        terms: f
            .into_iter()
            .enumerate()
            .map(|(j, z)| (j as i32 - l, z))
            .filter(|(_, z)| *z != Complex64::default())
            .collect(),
    }
}

impl FourierRow {
    fn amplitude(&self, phi: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(m, f)| f * Complex64::from_polar(1.0, m as f64 * phi))
            .sum()
    }
}

/// `|Ψ(θ, φ)|²`.
pub fn density(wp: &ShExpansion, theta: f64, phi: f64) -> f64 {
    let table = LegendreTable::new(wp.i_max(), theta);
    fourier_row(wp, &table, None).amplitude(phi).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarpetKind {
    /// `|Ψ(π/2, φ, t)|²` over `φ ∈ [0, 2π)` and `t`.
    EquatorialCut,
    /// `2π sinθ |Ψ(θ, t)|²` over `θ ∈ [0, π]` and `t`, axial packets only.
    RingProfile,
}

impl fmt::Display for CarpetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CarpetKind::EquatorialCut => "equatorial",
            CarpetKind::RingProfile => "ring",
        })
    }
}

impl FromStr for CarpetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equatorial" => Ok(CarpetKind::EquatorialCut),
            "ring" => Ok(CarpetKind::RingProfile),
            _ => Err(Error::invalid(format!(
                "carpet kind must be 'equatorial' or 'ring', got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarpetSpec {
    pub kind: CarpetKind,
    pub angle_samples: usize,
    pub t_samples: usize,
    /// End of the time axis in units of `T_rev`.
    pub t_max: f64,
}

impl CarpetSpec {
    pub fn new(kind: CarpetKind, angle_samples: usize, t_samples: usize, t_max: f64) -> Result<Self> {
        if angle_samples < MIN_SAMPLES || t_samples < MIN_SAMPLES {
            return Err(Error::invalid(format!(
                "carpet needs at least {MIN_SAMPLES}x{MIN_SAMPLES} samples, got {angle_samples}x{t_samples}"
            )));
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
        }
        Ok(Self {
            kind,
            angle_samples,
            t_samples,
            t_max,
        })
    }

    /// `φ_k = 2πk/n` for the cut, `θ_j = jπ/(n-1)` for the ring profile.
    pub fn angles(&self) -> Vec<f64> {
        let n = self.angle_samples;
        match self.kind {
            CarpetKind::EquatorialCut => (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect(),
            CarpetKind::RingProfile => (0..n).map(|j| PI * j as f64 / (n - 1) as f64).collect(),
        }
    }

    /// `t_j = j T/(n-1)`, both ends included, in units of `T_rev`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.t_samples;
        (0..n).map(|j| self.t_max * j as f64 / (n - 1) as f64).collect()
    }
}

/// Density over angle (rows) and time (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CarpetGrid {
    pub spec: CarpetSpec,
    /// Revival time used to convert the time axis, in model time units.
    pub t_rev: f64,
    /// `true` when `t_rev` is exact (rigid rotor), `false` when estimated.
    pub t_rev_exact: bool,
    pub angles: Vec<f64>,
    /// In units of `T_rev`.
    pub times: Vec<f64>,
    pub values: Array2<f64>,
}

/// Revival time of `model` for `wp`: exact for a rigid rotor, otherwise
/// the local estimate at the packet's mean `I`.
pub fn revival_time(wp: &ShExpansion, model: &EnergyModel) -> Result<(f64, bool)> {
    match model {
        EnergyModel::RigidRotor { omega0 } => Ok((2.0 * PI / omega0, true)),
        _ => {
            let ib = observables(wp).i_bar;
            Ok((time_scales(model, ib)?.t_rev, false))
        }
    }
}

/// `e^{-iE_I t}` for `I = 0..=i_max`.
fn phase_column(wp: &ShExpansion, model: &EnergyModel, t: f64) -> Result<Vec<Complex64>> {
    let mut ph = vec![Complex64::new(1.0, 0.0); wp.i_max() as usize + 1];
    for i in wp.i_values() {
        ph[i as usize] = Complex64::from_polar(1.0, -model.phase(i, t)?);
    }
    Ok(ph)
}

/// Evaluates a carpet in parallel over time columns. Each column is computed
/// independently in a fixed order, so the result does not depend on the
/// number of worker threads.
pub fn carpet(wp: &ShExpansion, model: &EnergyModel, spec: &CarpetSpec) -> Result<CarpetGrid> {
    model.covers(wp)?;
    let (t_rev, exact) = revival_time(wp, model)?;
    carpet_with_period(wp, model, spec, t_rev, exact)
}

/// As [`carpet`] with a caller-supplied `T_rev`.
pub fn carpet_with_period(
    wp: &ShExpansion,
    model: &EnergyModel,
    spec: &CarpetSpec,
    t_rev: f64,
    t_rev_exact: bool,
) -> Result<CarpetGrid> {
    let spec = CarpetSpec::new(spec.kind, spec.angle_samples, spec.t_samples, spec.t_max)?;
    model.covers(wp)?;
    if spec.kind == CarpetKind::RingProfile && !wp.is_axial() {
        return Err(Error::SymmetryViolation(
            "ring profile needs an axially symmetric packet (M = 0 only)".into(),
        ));
    }
    let angles = spec.angles();
    let times = spec.times();
    let columns: Vec<Vec<f64>> = match spec.kind {
        CarpetKind::EquatorialCut => {
            let table = LegendreTable::new(wp.i_max(), 0.5 * PI);
            let l = wp.i_max() as i32;
            // e^{iMφ_k} for every row, shared by all columns
            let twiddle: Vec<Vec<Complex64>> = angles
                .iter()
                .map(|&phi| (-l..=l).map(|m| Complex64::from_polar(1.0, m as f64 * phi)).collect())
                .collect();
            times
                .par_iter()
                .map(|&t| {
                    let ph = phase_column(wp, model, t * t_rev)?;
                    let row = fourier_row(wp, &table, Some(&ph));
                    Ok(twiddle
                        .iter()
                        .map(|tw| {
                            row.terms
                                .iter()
                                .map(|&(m, f)| f * tw[(m + l) as usize])
                                .sum::<Complex64>()
                                .norm_sqr()
                        })
                        .collect())
                })
                .collect::<Result<_>>()?
        }
        CarpetKind::RingProfile => {
            let is = wp.i_values();
            // Y^I_0(θ_j) for every row
            let ylm: Vec<Vec<f64>> = angles
                .iter()
                .map(|&th| {
                    let t = LegendreTable::new(wp.i_max(), th);
                    is.iter().map(|&i| t.get(i, 0)).collect()
                })
                .collect();
            let b: Vec<Complex64> = is.iter().map(|&i| wp.get(i, 0)).collect();
            times
                .par_iter()
                .map(|&t| {
                    let ph = phase_column(wp, model, t * t_rev)?;
                    let c: Vec<Complex64> = is.iter().zip(&b).map(|(&i, b)| b * ph[i as usize]).collect();
                    Ok(angles
                        .iter()
                        .zip(&ylm)
                        .map(|(&th, y)| {
                            let psi: Complex64 = c.iter().zip(y).map(|(c, y)| c * y).sum();
                            2.0 * PI * th.sin().max(0.0) * psi.norm_sqr()
                        })
                        .collect())
                })
                .collect::<Result<_>>()?
        }
    };
    let mut values = Array2::zeros((spec.angle_samples, spec.t_samples));
    for (j, col) in columns.iter().enumerate() {
        for (k, v) in col.iter().enumerate() {
            values[[k, j]] = *v;
        }
    }
    Ok(CarpetGrid {
        spec,
        t_rev,
        t_rev_exact,
        angles,
        times,
        values,
    })
}

impl CarpetGrid {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }

    /// Index of the time sample closest to `t` (units of `T_rev`).
    pub fn nearest_column(&self, t: f64) -> usize {
        let h = self.spec.t_max / (self.spec.t_samples - 1) as f64;
        ((t / h).round().max(0.0) as usize).min(self.spec.t_samples - 1)
    }

    /// Trapezoid integral of a ring-profile column over `θ`.
    pub fn column_integral(&self, j: usize) -> f64 {
        let col = self.values.column(j);
        let h = PI / (self.spec.angle_samples - 1) as f64;
        let n = col.len();
        h * (col.iter().sum::<f64>() - 0.5 * (col[0] + col[n - 1]))
    }

    pub fn header(&self) -> Header {
        let mut h = Header::new();
        h.push("carpet-format", CARPET_FORMAT)
            .push("kind", self.spec.kind)
            .push("rows", match self.spec.kind {
                CarpetKind::EquatorialCut => "phi [rad] at theta = pi/2, phi_k = 2 pi k / n",
                CarpetKind::RingProfile => "theta [rad], theta_j = j pi / (n - 1); value 2 pi sin(theta) |psi|^2",
            })
            .push("columns", "time [T_rev], t_j = j t_max / (n - 1)")
            .push("angle-samples", self.spec.angle_samples)
            .push("t-samples", self.spec.t_samples)
            .push("t-max", self.spec.t_max)
            .push("t-rev", format!("{:e}", self.t_rev))
            .push("t-rev-source", if self.t_rev_exact { "exact" } else { "estimated" });
        h
    }
}

/// `|Ψ(θ, φ)|²` on a `θ×φ` mesh at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotGrid {
    /// `θ_j = π(j + 1/2)/n`.
    pub thetas: Vec<f64>,
    /// `φ_k = offset + 2πk/n`.
    pub phis: Vec<f64>,
    pub phi_offset: f64,
    /// Time label in units of `T_rev`.
    pub t: f64,
    /// Rows `θ`, columns `φ`.
    pub values: Array2<f64>,
}

/// Evaluates the density on a midpoint-in-`θ`, uniform-in-`φ` mesh.
pub fn snapshot(wp: &ShExpansion, theta_samples: usize, phi_samples: usize, phi_offset: f64, t: f64) -> Result<SnapshotGrid> {
    if theta_samples < 2 || phi_samples < 2 {
        return Err(Error::invalid("snapshot mesh needs at least 2x2 samples"));
    }
    let thetas: Vec<f64> = (0..theta_samples)
        .map(|j| PI * (j as f64 + 0.5) / theta_samples as f64)
        .collect();
    let phis: Vec<f64> = (0..phi_samples)
        .map(|k| phi_offset + 2.0 * PI * k as f64 / phi_samples as f64)
        .collect();
    let rows: Vec<Vec<f64>> = thetas
        .par_iter()
        .map(|&th| {
            let table = LegendreTable::new(wp.i_max(), th);
            let row = fourier_row(wp, &table, None);
            phis.iter().map(|&p| row.amplitude(p).norm_sqr()).collect()
        })
        .collect();
    let mut values = Array2::zeros((theta_samples, phi_samples));
    for (j, r) in rows.iter().enumerate() {
        for (k, v) in r.iter().enumerate() {
            values[[j, k]] = *v;
        }
    }
    Ok(SnapshotGrid {
        thetas,
        phis,
        phi_offset,
        t,
        values,
    })
}

impl SnapshotGrid {
    /// `∫|Ψ|² dΩ` by Fejér's first rule in `cos θ` and the rectangle rule in
    /// `φ`; exact once both sample counts exceed `2 i_max`.
    pub fn quadrature(&self) -> f64 {
        let n = self.thetas.len();
        let dphi = 2.0 * PI / self.phis.len() as f64;
        self.thetas
            .iter()
            .enumerate()
            .map(|(j, &th)| {
                let mut s = 0.0;
                for k in 1..=n / 2 {
                    s += (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
                }
                let w = 2.0 / n as f64 * (1.0 - 2.0 * s);
                w * dphi * self.values.row(j).sum()
            })
            .sum()
    }

    pub fn header(&self) -> Header {
        let mut h = Header::new();
        h.push("carpet-format", CARPET_FORMAT)
            .push("kind", "snapshot")
            .push("rows", "theta [rad], theta_j = pi (j + 1/2) / n")
            .push("columns", "phi [rad], phi_k = phi-offset + 2 pi k / n")
            .push("phi-offset", self.phi_offset)
            .push("theta-samples", self.thetas.len())
            .push("phi-samples", self.phis.len())
            .push("t", self.t);
        h
    }
}

/// Anything that can be written as a heat map.
pub trait Heatmap {
    fn values(&self) -> &Array2<f64>;
    fn row_axis(&self) -> &[f64];
    fn column_axis(&self) -> &[f64];
    fn metadata(&self) -> Header;
}

impl Heatmap for CarpetGrid {
    fn values(&self) -> &Array2<f64> {
        &self.values
    }
    fn row_axis(&self) -> &[f64] {
        &self.angles
    }
    fn column_axis(&self) -> &[f64] {
        &self.times
    }
    fn metadata(&self) -> Header {
        self.header()
    }
}

impl Heatmap for SnapshotGrid {
    fn values(&self) -> &Array2<f64> {
        &self.values
    }
    fn row_axis(&self) -> &[f64] {
        &self.thetas
    }
    fn column_axis(&self) -> &[f64] {
        &self.phis
    }
    fn metadata(&self) -> Header {
        self.header()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// 8-bit grayscale `P5`.
    Pgm,
    /// 8-bit RGB `P6` through a fixed color ramp.
    Ppm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intensity {
    Linear,
    /// `log10(v / max)` mapped from `-decades` to 0.
    Log { decades: f64 },
}

/// CSV: `#` headers, an axis line, then one line per row with the row
/// coordinate first.
pub fn render_csv(grid: &impl Heatmap, extra: &Header) -> String {
    let mut h = grid.metadata();
    h.extend(extra);
    let mut s = h.render();
    s.push_str("row\\col");
    for c in grid.column_axis() {
        let _ = write!(s, ",{c:e}");
    }
    s.push('\n');
    for (r, row) in grid.row_axis().iter().zip(grid.values().rows()) {
        let _ = write!(s, "{r:e}");
        for v in row {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

/// Parses [`render_csv`] output back to `(header, rows, columns, values)`.
pub fn parse_csv(text: &str) -> Result<(Header, Vec<f64>, Vec<f64>, Array2<f64>)> {
    let bad = |line: usize, msg: String| Error::Format {
        path: "<csv>".into(),
        line,
        message: msg,
    };
    let mut header = Header::new();
    let mut cols: Option<Vec<f64>> = None;
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                header.push(k.trim(), v.trim());
            }
            continue;
        }
        let mut fields = line.split(',');
        let first = fields.next().unwrap_or_default();
        let nums: Result<Vec<f64>> = fields
            .map(|f| f.parse::<f64>().map_err(|_| bad(n + 1, format!("bad number '{f}'"))))
            .collect();
        match &cols {
            None => cols = Some(nums?),
            Some(c) => {
                let v = nums?;
                if v.len() != c.len() {
                    return Err(bad(n + 1, format!("expected {} values, found {}", c.len(), v.len())));
                }
                rows.push(first.parse().map_err(|_| bad(n + 1, format!("bad number '{first}'")))?);
                data.extend(v);
            }
        }
    }
    let cols = cols.ok_or_else(|| bad(0, "missing axis line".into()))?;
    let values = Array2::from_shape_vec((rows.len(), cols.len()), data)
        .map_err(|e| bad(0, e.to_string()))?;
    Ok((header, rows, cols, values))
}

/// Fixed ramp: black, blue, magenta, orange, white.
fn ramp(x: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 0.0],
        [0.1, 0.1, 0.6],
        [0.7, 0.1, 0.5],
        [1.0, 0.6, 0.1],
        [1.0, 1.0, 1.0],
    ];
    let x = x.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let v = STOPS[i][c] + f * (STOPS[i + 1][c] - STOPS[i][c]);
        out[c] = (v * 255.0).round() as u8;
    }
    out
}

/// Scales values to `[0, 1]` against the grid maximum.
fn normalized_levels(values: &Array2<f64>, intensity: Intensity) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| {
            if max <= 0.0 || v <= 0.0 {
                return 0.0;
            }
            let r = v / max;
            match intensity {
                Intensity::Linear => r,
                Intensity::Log { decades } => (1.0 + r.log10() / decades).max(0.0),
            }
        })
        .collect()
}

/// Binary pixel map: row = first grid axis, column = second.
pub fn render_image(grid: &impl Heatmap, format: ImageFormat, intensity: Intensity, extra: &Header) -> Vec<u8> {
    let v = grid.values();
    let (h, w) = v.dim();
    let mut meta = grid.metadata();
    meta.extend(extra);
    match intensity {
        Intensity::Linear => meta.push("intensity", "linear"),
        Intensity::Log { decades } => meta.push("intensity", format!("log, {decades} decades")),
    };
    let magic = match format {
        ImageFormat::Pgm => "P5",
        ImageFormat::Ppm => "P6",
    };
    let mut out = format!("{magic}\n{}{w} {h}\n255\n", meta.render()).into_bytes();
    for x in normalized_levels(v, intensity) {
        match format {
            ImageFormat::Pgm => out.push((x * 255.0).round() as u8),
            ImageFormat::Ppm => out.extend_from_slice(&ramp(x)),
        }
    }
    out
}

/// Writes a grid as CSV or a pixel map, chosen by `format`.
pub fn emit(grid: &impl Heatmap, format: EmitFormat, path: &Path, extra: &Header) -> Result<()> {
    let bytes = match format {
        EmitFormat::Csv => render_csv(grid, extra).into_bytes(),
        EmitFormat::Image(f, i) => render_image(grid, f, i, extra),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmitFormat {
    Csv,
    Image(ImageFormat, Intensity),
}

/// Local maxima of a periodic sequence at or above `fraction` of its peak.
pub fn count_maxima(values: &[f64], fraction: f64) -> usize {
    let n = values.len();
    let top = values.iter().cloned().fold(0.0, f64::max);
    if n < 3 || top <= 0.0 {
        return 0;
    }
    (0..n)
        .filter(|&k| {
            let v = values[k];
            v >= fraction * top && v > values[(k + n - 1) % n] && v >= values[(k + 1) % n]
        })
        .count()
}

/// Dominant directions in an equatorial-cut column. A column that repeats
/// after half a turn (symmetric packets) is counted over half a turn, so an
/// antipodal pair is one direction.
pub fn count_directions(column: &[f64], fraction: f64) -> usize {
    let n = column.len();
    let top = column.iter().cloned().fold(0.0, f64::max);
    let half_periodic = n.is_multiple_of(2)
        && (0..n / 2).all(|k| (column[k] - column[k + n / 2]).abs() <= 1e-9 * top.max(f64::MIN_POSITIVE));
    if half_periodic {
        count_maxima(&column[..n / 2], fraction)
    } else {
        count_maxima(column, fraction)
    }
}
