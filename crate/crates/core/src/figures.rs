//! Figure datasets: parameter sweeps over the separation grid written as one
//! CSV per curve plus a JSON manifest per figure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Figure, GridSpec, PsfKindName};
use crate::error::{Error, Result};
use crate::fisher::{self, localization_bound, MisalignmentConfig};
use crate::montecarlo::{run_error_sweep, EstimationReport, Scheme, SweepConfig};
use crate::psf::PointSpreadFunction;
use crate::qfi::{qfi_closed_form, OnePhotonModel};

/// One computed curve; `values[i]` is `None` where the point failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    /// Separation grid in units of the PSF width.
    pub grid: Vec<f64>,
    pub values: Vec<Option<f64>>,
    /// What `value` means, including its normalization.
    pub description: String,
}

impl Curve {
    pub fn failed_points(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn all_failed(&self) -> bool {
        self.failed_points() == self.values.len()
    }

    pub fn to_csv(&self, figure: Figure, psf_label: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# figure={} curve={} psf={}", figure.name(), self.name, psf_label);
        let _ = writeln!(
            s,
            "# 3 columns: theta2 in units of the PSF width; value = {}; ok = 0 marks a failed point",
            self.description
        );
        let _ = writeln!(s, "theta2,value,ok");
        for (x, v) in self.grid.iter().zip(&self.values) {
            match v {
                Some(v) => {
                    let _ = writeln!(s, "{x},{v},1");
                }
                None => {
                    let _ = writeln!(s, "{x},NaN,0");
                }
            }
        }
        s
    }
}

/// Everything one figure produces.
#[derive(Debug, Clone)]
pub struct FigureData {
    pub figure: Figure,
    pub psf_label: String,
    pub grid: GridSpec,
    pub curves: Vec<Curve>,
    pub reports: Vec<(String, EstimationReport)>,
}

/// Default separation grid for a figure, in units of the PSF width.
pub fn default_grid(figure: Figure) -> GridSpec {
    match figure {
        Figure::HybridBounds => GridSpec::log(0.01, 10.0, 61),
        f if f.is_monte_carlo() => GridSpec::linear(0.05, 2.0, 20),
        _ => GridSpec::linear(0.0, 6.0, 121),
    }
}

fn default_xi(figure: Figure) -> Vec<f64> {
    match figure {
        Figure::HybridBounds => vec![0.0],
        Figure::McMisaligned => vec![0.1],
        _ => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    }
}

fn psf_label(psf: &PointSpreadFunction, kind: PsfKindName) -> String {
    match kind {
        PsfKindName::Gaussian => format!("gaussian(sigma={})", psf.width()),
        PsfKindName::Sinc => format!("sinc(W={})", psf.width()),
        PsfKindName::Tabulated => format!("tabulated(rms_width={})", psf.width()),
    }
}

/// Evaluates `f` on every grid point in parallel; `f` returns one value per
/// output curve.
fn sweep<F>(grid: &[f64], width: f64, outputs: usize, f: F) -> Vec<Vec<Option<f64>>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Option<Vec<f64>>> = grid
        .par_iter()
        .map(|&g| f(g * width).ok())
        .collect();
    (0..outputs)
        .map(|k| {
            rows.iter()
                .map(|r| r.as_ref().map(|v| v[k]).filter(|x| !x.is_nan()))
                .collect()
        })
        .collect()
}

fn curves_from(names: &[(&str, String)], grid: &[f64], columns: Vec<Vec<Option<f64>>>) -> Vec<Curve> {
    names
        .iter()
        .zip(columns)
        .map(|((name, desc), values)| Curve {
            name: name.to_string(),
            grid: grid.to_vec(),
            values,
            description: desc.clone(),
        })
        .collect()
}

fn xi_tag(xi: f64) -> String {
    format!("xi{xi}")
}

fn inverse(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x
    } else {
        f64::INFINITY
    }
}

/// Computes the datasets of one figure.
pub fn compute_figure(figure: Figure, cfg: &ExperimentConfig, base: &Path) -> Result<FigureData> {
    let grid_spec = cfg.grid.clone().unwrap_or_else(|| default_grid(figure));
    let grid = grid_spec.values();
    let (psf, kind) = if figure == Figure::SincComparison {
        let w = if cfg.psf.kind == PsfKindName::Sinc { cfg.psf.width } else { 1.0 };
        (PointSpreadFunction::sinc(w)?, PsfKindName::Sinc)
    } else {
        (cfg.build_psf(base)?, cfg.psf.kind)
    };
    let width = psf.width();
    let n = cfg.budget.photons;
    let xis = cfg
        .misalignment
        .as_ref()
        .map(|m| m.xi.clone())
        .unwrap_or_else(|| default_xi(figure));
    let model = |t: f64| OnePhotonModel::centred(psf.clone(), t, n);
    let label = psf_label(&psf, kind);
    let mut reports = Vec::new();

    let curves = match figure {
        Figure::InfoCurves => {
            let norm = n * psf.dk2()?;
            let desc = |what: &str| format!("{what} / (N dk2), N = {n}, dk2 = {}", norm / n);
            let cols = sweep(&grid, width, 4, |t| {
                let m = model(t)?;
                let k = qfi_closed_form(&m)?;
                let d = fisher::direct_imaging_fisher(&m)?;
                Ok(vec![k.j11 / norm, k.j22 / norm, d.j11 / norm, d.j22 / norm])
            });
            let names = [
                ("K11", desc("quantum information K11")),
                ("K22", desc("quantum information K22")),
                ("J11_direct", desc("direct-imaging information J11")),
                ("J22_direct", desc("direct-imaging information J22")),
            ];
            curves_from(&names, &grid, cols)
        }
        Figure::CrbCurves => {
            let norm = n * psf.dk2()?;
            let desc = |what: &str| format!("{what} * N dk2 (quantum bound = 1), N = {n}");
            let cols = sweep(&grid, width, 2, |t| {
                let m = model(t)?;
                let k = qfi_closed_form(&m)?;
                let d = fisher::direct_imaging_fisher(&m)?;
                Ok(vec![inverse(k.j22) * norm, inverse(d.j22) * norm])
            });
            let names = [
                ("crb_quantum", desc("1/K22")),
                ("crb_direct", desc("1/J22_direct")),
            ];
            curves_from(&names, &grid, cols)
        }
        Figure::BinaryComparison | Figure::SincComparison => {
            let norm = match kind {
                PsfKindName::Sinc => n * std::f64::consts::PI.powi(2) / (3.0 * width * width),
                _ => n * psf.dk2()?,
            };
            let desc = |what: &str| format!("{what} / K22(0), N = {n}, K22(0) = {norm}");
            let gaussian = psf.is_gaussian();
            let cols = sweep(&grid, width, 3, |t| {
                let m = model(t)?;
                let d = fisher::direct_imaging_fisher(&m)?;
                let b = if gaussian {
                    fisher::binary_spade_fisher_gaussian(&m)?
                } else {
                    fisher::binary_spade_fisher_general(&psf, t, n)?
                };
                let top = if gaussian {
                    fisher::hg_spade_fisher_auto(&m)?.j22
                } else {
                    qfi_closed_form(&m)?.j22
                };
                Ok(vec![top / norm, b.j22 / norm, d.j22 / norm])
            });
            let top = if gaussian { "J22_hg" } else { "K22" };
            let names = [
                (top, desc(if gaussian { "HG SPADE information J22" } else { "quantum information K22" })),
                ("J22_binary", desc("binary SPADE information J22")),
                ("J22_direct", desc("direct-imaging information J22")),
            ];
            curves_from(&names, &grid, cols)
        }
        Figure::MisalignHg | Figure::MisalignBinary => {
            let norm = n * psf.dk2()?;
            let hg = figure == Figure::MisalignHg;
            let mis: Vec<MisalignmentConfig> = xis.iter().map(|&x| MisalignmentConfig::new(x)).collect::<Result<_>>()?;
            let cols = sweep(&grid, width, mis.len() + 1, |t| {
                let m = model(t)?;
                let mut row = Vec::with_capacity(mis.len() + 1);
                for c in &mis {
                    let j = if hg {
                        fisher::misaligned_hg_fisher(&m, *c)?
                    } else {
                        fisher::misaligned_binary_fisher(&m, *c)?
                    };
                    row.push(j.j22 / norm);
                }
                row.push(fisher::direct_imaging_fisher(&m)?.j22 / norm);
                Ok(row)
            });
            let what = if hg { "misaligned HG SPADE information J22" } else { "misaligned binary SPADE information J22" };
            let mut names: Vec<(String, String)> = xis
                .iter()
                .map(|&x| (xi_tag(x), format!("{what} at xi = {x} / (N/(4 sigma^2)), N = {n}")))
                .collect();
            names.push(("J22_direct".into(), format!("direct-imaging information J22 / (N/(4 sigma^2)), N = {n}")));
            let names: Vec<(&str, String)> = names.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
            curves_from(&names, &grid, cols)
        }
        Figure::HybridBounds => {
            // Isolated-source error with direct imaging: 1/(4 N dk2).
            let norm = 1.0 / (4.0 * n * psf.dk2()?);
            let mis: Vec<MisalignmentConfig> = xis.iter().map(|&x| MisalignmentConfig::new(x)).collect::<Result<_>>()?;
            let cols = sweep(&grid, width, mis.len() + 1, |t| {
                let m = model(t)?;
                let mut row = Vec::with_capacity(mis.len() + 1);
                for c in &mis {
                    row.push(localization_bound(&fisher::hybrid_fisher(&m, *c)?) / norm);
                }
                row.push(localization_bound(&fisher::direct_imaging_fisher(&m)?) / norm);
                Ok(row)
            });
            let desc = format!("localization bound 1/J11 + 1/(4 J22) / (isolated-source bound {norm}), N = {n}");
            let mut names: Vec<(String, String)> = xis
                .iter()
                .map(|&x| (format!("hybrid_{}", xi_tag(x)), format!("hybrid {desc}, xi = {x}")))
                .collect();
            names.push(("direct".into(), format!("direct-imaging {desc}")));
            let names: Vec<(&str, String)> = names.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
            curves_from(&names, &grid, cols)
        }
        Figure::McHg | Figure::McBinary | Figure::McMisaligned => {
            let sigma = width;
            let theta: Vec<f64> = grid.iter().map(|g| g * sigma).collect();
            let runs: Vec<(Scheme, f64)> = match figure {
                Figure::McHg => vec![(Scheme::HgSpade, 0.0)],
                Figure::McBinary => vec![(Scheme::BinarySpade, 0.0)],
                _ => xis.iter().map(|&x| (Scheme::MisalignedBinary, x)).collect(),
            };
            for &(scheme, xi) in &runs {
                for &l in &cfg.budget.detected {
                    let mut sc = SweepConfig::new(scheme, l, theta.clone(), cfg.trials, cfg.seed);
                    sc.sigma = sigma;
                    sc.xi = xi;
                    sc.photon_mode = cfg.budget.photon_mode;
                    sc.zero_photon_estimate = cfg.zero_photon_estimate;
                    let name = if figure == Figure::McMisaligned {
                        format!("{}_L{l}", xi_tag(xi))
                    } else {
                        format!("L{l}")
                    };
                    reports.push((name, run_error_sweep(&sc)?));
                }
            }
            if figure == Figure::McMisaligned {
                // 1/J22_direct at budget L, times L/(4 sigma^2): independent of L.
                let cols = sweep(&grid, width, 1, |t| {
                    let m = OnePhotonModel::centred(psf.clone(), t, 1.0)?;
                    let j = fisher::direct_imaging_fisher(&m)?.j22;
                    Ok(vec![inverse(j) / (4.0 * sigma * sigma)])
                });
                let names = [("crb_direct", "1/J22_direct at budget L, normalized by 4 sigma^2/L".to_string())];
                curves_from(&names, &grid, cols)
            } else {
                Vec::new()
            }
        }
    };
    Ok(FigureData {
        figure,
        psf_label: label,
        grid: grid_spec,
        curves,
        reports,
    })
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    name: String,
    file: String,
    points: usize,
    failed_points: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    figure: &'static str,
    library_version: &'static str,
    seed: u64,
    psf: &'a str,
    grid: &'a GridSpec,
    config: &'a ExperimentConfig,
    curves: Vec<ManifestEntry>,
}

/// Outcome of writing one figure.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSummary {
    pub figure: Figure,
    pub files: Vec<PathBuf>,
    /// Curves in which every point failed.
    pub failed_curves: Vec<String>,
}

/// Writes `out/<figure>/<curve>.csv`, Monte Carlo JSON sidecars and
/// `manifest.json`.
pub fn write_figure(data: &FigureData, cfg: &ExperimentConfig, out: &Path) -> Result<FigureSummary> {
    let dir = out.join(data.figure.name());
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut entries = Vec::new();
    let mut failed = Vec::new();
    for c in &data.curves {
        let file = format!("{}.csv", c.name);
        fs::write(dir.join(&file), c.to_csv(data.figure, &data.psf_label))?;
        files.push(dir.join(&file));
        if c.all_failed() {
            failed.push(c.name.clone());
        }
        entries.push(ManifestEntry {
            name: c.name.clone(),
            file,
            points: c.values.len(),
            failed_points: c.failed_points(),
        });
    }
    for (name, report) in &data.reports {
        let file = format!("{name}.csv");
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        fs::write(dir.join(&file), buf)?;
        fs::write(dir.join(format!("{name}.json")), report.to_json())?;
        files.push(dir.join(&file));
        entries.push(ManifestEntry {
            name: name.clone(),
            file,
            points: report.mse.len(),
            failed_points: 0,
        });
    }
    let manifest = Manifest {
        figure: data.figure.name(),
        library_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        psf: &data.psf_label,
        grid: &data.grid,
        config: cfg,
        curves: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(FigureSummary {
        figure: data.figure,
        files,
        failed_curves: failed,
    })
}

/// Runs every selected figure and writes its datasets under `cfg.out`.
/// `base` resolves relative paths in the configuration.
pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<Vec<FigureSummary>> {
    cfg.validate()?;
    let out = if cfg.out.is_relative() { base.join(&cfg.out) } else { cfg.out.clone() };
    cfg.figures()
        .into_iter()
        .map(|f| {
            let data = compute_figure(f, cfg, base)?;
            write_figure(&data, cfg, &out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_flags_failures_per_point() {
        let cols = sweep(&[1.0, 2.0, 3.0], 1.0, 2, |t| {
            if t == 2.0 {
                Err(Error::ZeroPhotons)
            } else {
                Ok(vec![t, if t == 1.0 { f64::NAN } else { 2.0 * t }])
            }
        });
        assert_eq!(cols[0], vec![Some(1.0), None, Some(3.0)]);
        assert_eq!(cols[1], vec![None, None, Some(6.0)]);
    }

    #[test]
    fn csv_marks_failed_points() {
        let c = Curve {
            name: "x".into(),
            grid: vec![0.0, 0.5],
            values: vec![Some(1.0), None],
            description: "test".into(),
        };
        let text = c.to_csv(Figure::InfoCurves, "gaussian(sigma=1)");
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows, vec!["theta2,value,ok", "0,1,1", "0.5,NaN,0"]);
        assert!(!c.all_failed());
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_grid(Figure::InfoCurves).values().len(), 121);
        let mc = default_grid(Figure::McHg).values();
        assert_eq!((mc.len(), mc[0], mc[19]), (20, 0.05, 2.0));
        let h = default_grid(Figure::HybridBounds).values();
        assert_eq!((h[0], h[60]), (0.01, 10.0));
    }
}
