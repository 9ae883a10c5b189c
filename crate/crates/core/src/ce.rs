//! Rotational packets from Coulomb excitation.
//!
//! Backscattering populates only `M = 0` states of the ground band, so the
//! packet is axial about the beam (`z`) axis and contains even `I` only.
//! Amplitudes come from an external calculation; a documented synthetic
//! profile stands in when none is available.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::angular::AngularIndex;
use crate::carpets::{carpet_with_period, revival_time, CarpetGrid, CarpetKind, CarpetSpec};
use crate::dynamics::{EnergyModel, LevelTable};
use crate::error::{Error, Result};
use crate::io::{parse_levels, Header, Table};
use crate::wavepacket::{i_bar_from_l2, Frame, PacketInfo, ShExpansion, Symmetry};

/// Level file for the `²³⁸U` ground band built from the two-parameter formula
/// with `a = 7.5`, `b = -0.004`, unit flagged as printed.
pub const U238_LEVELS: &str = include_str!("../data/u238_levels.txt");

/// `(I, amplitude)` pairs with free-text provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CeAmplitudeSet {
    pub entries: Vec<(u32, Complex64)>,
    pub source_note: Option<String>,
    /// True for generator output rather than a physics calculation.
    pub synthetic: bool,
}

/// Amplitude file: `# source:` and other headers, then `I re [im]` rows.
pub fn parse_amplitudes(text: &str, path: &str) -> Result<CeAmplitudeSet> {
    let t = Table::parse(text, path);
    let mut seen = BTreeMap::new();
    let mut entries = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        if !(row.1.len() == 2 || row.1.len() == 3) {
            return Err(t.error(row.0, format!("expected 'I re im', found {} columns", row.1.len())));
        }
        let i: u32 = t.field(row, 0, "I")?;
        if i % 2 == 1 {
            return Err(t.error(row.0, format!("odd I = {i}: backscattering excites even I only")));
        }
        if seen.insert(i, ()).is_some() {
            return Err(t.error(row.0, format!("duplicate entry for I = {i}")));
        }
        let re: f64 = t.field(row, 1, "re")?;
        let im: f64 = if row.1.len() == 3 { t.field(row, 2, "im")? } else { 0.0 };
        if !(re.is_finite() && im.is_finite()) {
            return Err(t.error(row.0, "non-finite amplitude"));
        }
        entries.push((i, Complex64::new(re, im)));
    }
    let synthetic = t.header.get("synthetic").is_some_and(|v| v == "true");
    Ok(CeAmplitudeSet {
        entries,
        source_note: t.header.get("source").map(str::to_owned),
        synthetic,
    })
}

pub fn format_amplitudes(set: &CeAmplitudeSet, extra: &Header) -> String {
    let mut h = Header::new();
    h.extend(extra);
    if let Some(s) = &set.source_note {
        h.push("source", s);
    }
    h.push("synthetic", set.synthetic);
    let mut s = h.render();
    s.push_str("# columns: I re im\n");
    for (i, a) in &set.entries {
        let _ = writeln!(s, "{i} {:.17e} {:.17e}", a.re, a.im);
    }
    s
}

/// Unit-norm axial expansion in the beam frame.
pub fn expansion_from_amplitudes(set: &CeAmplitudeSet) -> Result<ShExpansion> {
    let total: f64 = set.entries.iter().map(|(_, a)| a.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::EmptyPacket);
    }
    let mut source = set.source_note.clone().unwrap_or_else(|| "Coulomb excitation".into());
    if set.synthetic {
        source.push_str(" [synthetic]");
    }
    let info = PacketInfo {
        n: None,
        eta: Some(0.0),
        symmetry: Some(Symmetry::Symmetric),
        source: Some(source),
    };
    let coeffs = set
        .entries
        .iter()
        .map(|&(i, a)| Ok((AngularIndex::new(i, 0)?, a)))
        .collect::<Result<Vec<_>>>()?;
    ShExpansion::from_coefficients(coeffs, Frame::SymmetryAxisIsZ, info)?.normalized()
}

pub fn ingest_str(text: &str, path: &str) -> Result<ShExpansion> {
    expansion_from_amplitudes(&parse_amplitudes(text, path)?)
}

pub fn ingest(path: &Path) -> Result<ShExpansion> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_str(&text, &path.display().to_string())
}

/// Positive root of `Ī(Ī+1) = <L²>` from the coefficient weights.
pub fn ibar_from_coefficients(wp: &ShExpansion) -> f64 {
    let w = wp.weights_by_i();
    let norm: f64 = w.iter().sum();
    let l2: f64 = w
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 * (i as f64 + 1.0) * p)
        .sum();
    i_bar_from_l2(l2 / norm)
}

/// Real positive amplitudes with Gaussian weights
/// `|a_I|² ∝ exp(-(I - center)²/(2 width²))` for even `I ≤ i_max`.
pub fn synthetic_amplitudes(center: f64, width: f64, i_max: u32) -> Result<CeAmplitudeSet> {
    if !(width.is_finite() && width > 0.0) || !center.is_finite() {
        return Err(Error::invalid(format!(
            "synthetic profile needs a finite center and positive width, got {center}, {width}"
        )));
    }
    let raw: Vec<(u32, f64)> = (0..=i_max)
        .step_by(2)
        .map(|i| (i, (-(i as f64 - center).powi(2) / (4.0 * width * width)).exp()))
        .collect();
    let norm = raw.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::EmptyPacket);
    }
    Ok(CeAmplitudeSet {
        entries: raw
            .into_iter()
            .map(|(i, a)| (i, Complex64::new(a / norm, 0.0)))
            .collect(),
        source_note: Some(format!(
            "synthetic Gaussian profile, center {center}, width {width}, I <= {i_max}"
        )),
        synthetic: true,
    })
}

/// The shipped `²³⁸U` band.
pub fn u238_levels() -> LevelTable {
    parse_levels(U238_LEVELS, "u238_levels.txt").expect("bundled level file is valid")
}

/// Carpets of the same packet under an ideal and a realistic spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayPair {
    pub ideal: CarpetGrid,
    pub real: CarpetGrid,
}

/// Ring-profile carpets under both models, each on its own `T_rev` axis.
/// The realistic `T_rev` is the local estimate at `Ī` from the coefficients.
pub fn replay(wp: &ShExpansion, ideal: &EnergyModel, real: &EnergyModel, angle_samples: usize, t_samples: usize, t_max: f64) -> Result<ReplayPair> {
    if !ideal.is_rigid() {
        return Err(Error::UnsupportedModel("the ideal model must be a rigid rotor".into()));
    }
    let spec = CarpetSpec::new(CarpetKind::RingProfile, angle_samples, t_samples, t_max)?;
    let (t_ideal, _) = revival_time(wp, ideal)?;
    let (t_real, exact) = revival_time(wp, real)?;
    Ok(ReplayPair {
        ideal: carpet_with_period(wp, ideal, &spec, t_ideal, true)?,
        real: carpet_with_period(wp, real, &spec, t_real, exact)?,
    })
}
