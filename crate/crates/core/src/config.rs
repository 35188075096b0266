//! TOML experiment configuration for the batch runner.
//!
//! ```toml
//! figure = "InfoCurves"        # a figure name or "all"
//! out = "out"
//! seed = 1
//! trials = 100000
//!
//! [psf]
//! kind = "gaussian"            # gaussian | sinc | tabulated
//! width = 1.0                  # sigma or W; ignored for tabulated
//! # path = "psf.txt"           # two-column x, psi(x) table
//!
//! [grid]                       # separations in units of the PSF width
//! min = 0.0
//! max = 6.0
//! points = 121
//! spacing = "linear"           # linear | log
//!
//! [budget]
//! photons = 1.0                # mean photon number N
//! detected = [20, 100, 500]    # detected photons L for Monte Carlo
//! photon_mode = "fixed"        # fixed | poisson
//!
//! [misalignment]
//! xi = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::PhotonMode;
use crate::psf::{PointSpreadFunction, TabulatedPsf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Figure {
    InfoCurves,
    CrbCurves,
    BinaryComparison,
    SincComparison,
    MisalignHg,
    MisalignBinary,
    HybridBounds,
    McHg,
    McBinary,
    McMisaligned,
}

impl Figure {
    pub const ALL: [Figure; 10] = [
        Figure::InfoCurves,
        Figure::CrbCurves,
        Figure::BinaryComparison,
        Figure::SincComparison,
        Figure::MisalignHg,
        Figure::MisalignBinary,
        Figure::HybridBounds,
        Figure::McHg,
        Figure::McBinary,
        Figure::McMisaligned,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::InfoCurves => "InfoCurves",
            Figure::CrbCurves => "CrbCurves",
            Figure::BinaryComparison => "BinaryComparison",
            Figure::SincComparison => "SincComparison",
            Figure::MisalignHg => "MisalignHg",
            Figure::MisalignBinary => "MisalignBinary",
            Figure::HybridBounds => "HybridBounds",
            Figure::McHg => "McHg",
            Figure::McBinary => "McBinary",
            Figure::McMisaligned => "McMisaligned",
        }
    }

    /// Parses a figure name or `all`.
    pub fn parse_selection(s: &str) -> Result<Vec<Figure>> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Figure::ALL.to_vec());
        }
        Figure::ALL
            .iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .map(|f| vec![*f])
            .ok_or_else(|| Error::config("figure", format!("unknown figure `{s}`")))
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self, Figure::McHg | Figure::McBinary | Figure::McMisaligned)
    }

    fn needs_gaussian(&self) -> bool {
        matches!(
            self,
            Figure::MisalignHg | Figure::MisalignBinary | Figure::McHg | Figure::McBinary | Figure::McMisaligned
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsfKindName {
    Gaussian,
    Sinc,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsfSpec {
    #[serde(default = "default_kind")]
    pub kind: PsfKindName,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            spacing: Spacing::Log,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min >= 0.0) {
            return Err(Error::config("grid.min", "grid bounds must be finite and >= 0"));
        }
        if !(self.min < self.max) {
            return Err(Error::config("grid.max", format!("need min < max, got {} and {}", self.min, self.max)));
        }
        if self.points < 2 {
            return Err(Error::config("grid.points", "need at least 2 points"));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(Error::config("grid.min", "log spacing needs min > 0"));
        }
        Ok(())
    }

    /// Grid values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..=n)
            .map(|i| {
                let f = i as f64 / n as f64;
                match (i, self.spacing) {
                    (0, _) => self.min,
                    (i, _) if i == n => self.max,
                    (_, Spacing::Linear) => self.min + f * (self.max - self.min),
                    (_, Spacing::Log) => (self.min.ln() + f * (self.max / self.min).ln()).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default = "one")]
    pub photons: f64,
    #[serde(default = "default_detected")]
    pub detected: Vec<u64>,
    #[serde(default = "default_photon_mode")]
    pub photon_mode: PhotonMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisalignmentSpec {
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_figure")]
    pub figure: String,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "one_u64")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Estimate used when no photon is detected, in units of σ.
    #[serde(default = "two")]
    pub zero_photon_estimate: f64,
    #[serde(default = "default_psf")]
    pub psf: PsfSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_budget")]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub misalignment: Option<MisalignmentSpec>,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_u64() -> u64 {
    1
}
fn default_kind() -> PsfKindName {
    PsfKindName::Gaussian
}
fn default_spacing() -> Spacing {
    Spacing::Linear
}
fn default_detected() -> Vec<u64> {
    vec![20, 100, 500]
}
fn default_photon_mode() -> PhotonMode {
    PhotonMode::Fixed
}
fn default_figure() -> String {
    "all".into()
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_trials() -> u64 {
    100_000
}
fn default_psf() -> PsfSpec {
    PsfSpec {
        kind: PsfKindName::Gaussian,
        width: 1.0,
        path: None,
    }
}
fn default_budget() -> BudgetSpec {
    BudgetSpec {
        photons: 1.0,
        detected: default_detected(),
        photon_mode: PhotonMode::Fixed,
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            figure: default_figure(),
            out: default_out(),
            seed: 1,
            trials: default_trials(),
            zero_photon_estimate: 2.0,
            psf: default_psf(),
            grid: None,
            budget: default_budget(),
            misalignment: None,
        }
    }
}

/// Dotted key path of the entry covering byte `offset`.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let mut offset = offset.min(text.len());
    while !text.is_char_boundary(offset) {
        offset -= 1;
    }
    let line_start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[offset..].find('\n').map_or(text.len(), |i| offset + i);
    let line = text[line_start..line_end].trim();
    let key = line.split('=').next()?.trim();
    let section = text[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim());
    if line.starts_with('[') {
        return Some(line.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    }
    if key.is_empty() || !line.contains('=') {
        return section.map(str::to_string);
    }
    Some(match section {
        Some(s) => format!("{s}.{key}"),
        None => key.to_string(),
    })
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            let named = msg.split('`').nth(1).map(str::to_string);
            let field = named
                .filter(|_| msg.contains("field"))
                .or_else(|| e.span().and_then(|s| key_at(text, s.start)))
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let figures = Figure::parse_selection(&self.figure)?;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if !(self.zero_photon_estimate >= 0.0 && self.zero_photon_estimate.is_finite()) {
            return Err(Error::config("zero_photon_estimate", "must be finite and >= 0"));
        }
        if !(self.psf.width > 0.0 && self.psf.width.is_finite()) {
            return Err(Error::config("psf.width", "must be positive"));
        }
        if self.psf.kind == PsfKindName::Tabulated && self.psf.path.is_none() {
            return Err(Error::config("psf.path", "required for a tabulated PSF"));
        }
        if self.psf.kind != PsfKindName::Gaussian {
            if let Some(f) = figures.iter().find(|f| f.needs_gaussian()) {
                return Err(Error::config("psf.kind", format!("{} needs a gaussian PSF", f.name())));
            }
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if !(self.budget.photons > 0.0 && self.budget.photons.is_finite()) {
            return Err(Error::config("budget.photons", "must be positive"));
        }
        if self.budget.detected.is_empty() || self.budget.detected.contains(&0) {
            return Err(Error::config("budget.detected", "needs at least one entry, all >= 1"));
        }
        if let Some(m) = &self.misalignment {
            if m.xi.is_empty() || m.xi.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::config("misalignment.xi", "needs at least one entry, all finite and >= 0"));
            }
            let misaligned = m.xi.iter().any(|&x| x > 0.0);
            if misaligned && self.psf.kind != PsfKindName::Gaussian && figures.contains(&Figure::HybridBounds) {
                return Err(Error::config("misalignment.xi", "xi > 0 needs a gaussian PSF"));
            }
        }
        Ok(())
    }

    pub fn figures(&self) -> Vec<Figure> {
        Figure::parse_selection(&self.figure).unwrap_or_default()
    }

    /// Builds the configured PSF; relative table paths resolve against `base`.
    pub fn build_psf(&self, base: &Path) -> Result<PointSpreadFunction> {
        match self.psf.kind {
            PsfKindName::Gaussian => PointSpreadFunction::gaussian(self.psf.width),
            PsfKindName::Sinc => PointSpreadFunction::sinc(self.psf.width),
            PsfKindName::Tabulated => {
                let path = self.psf.path.as_ref().expect("validated");
                let path = if path.is_relative() { base.join(path) } else { path.clone() };
                let table = TabulatedPsf::load(&path).map_err(|e| Error::config("psf.path", format!("{}: {e}", path.display())))?;
                Ok(PointSpreadFunction::tabulated(table))
            }
        }
    }
}
