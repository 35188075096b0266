//! Monte Carlo simulation of SPADE photon counting with maximum-likelihood
//! separation estimates, conditioned on the number of detected photons.
//!
//! Every trial owns a ChaCha8 stream addressed by (seed, scheme, grid index,
//! trial index), so results do not depend on thread scheduling.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{self, information_cutoff, mode_parameter, poisson_pmf, MisalignmentConfig};
use crate::psf::PointSpreadFunction;
use crate::qfi::OnePhotonModel;

/// Trials per parallel work unit.
const BLOCK: u64 = 1024;
/// Words of keystream reserved per trial.
const TRIAL_WORDS_LOG2: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    HgSpade,
    BinarySpade,
    MisalignedBinary,
    MisalignedHg,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::HgSpade => "HgSpade",
            Scheme::BinarySpade => "BinarySpade",
            Scheme::MisalignedBinary => "MisalignedBinary",
            Scheme::MisalignedHg => "MisalignedHg",
        }
    }

    /// Key component of the RNG. The two binary schemes share one so that
    /// the misaligned sampler at `ξ = 0` replays the aligned draws.
    fn stream_tag(&self) -> u64 {
        match self {
            Scheme::HgSpade => 1,
            Scheme::BinarySpade | Scheme::MisalignedBinary => 2,
            Scheme::MisalignedHg => 3,
        }
    }

    fn is_misaligned(&self) -> bool {
        matches!(self, Scheme::MisalignedBinary | Scheme::MisalignedHg)
    }
}

/// Outcome counts of one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeCounts {
    /// `m_q` for `q = 0, 1, …`.
    Full(Vec<u64>),
    /// `(m₀, L − m₀)`.
    Binary { m0: u64, excited: u64 },
}

/// Photon counts from `L` detected photons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCountRecord {
    l: u64,
    counts: ModeCounts,
}

impl ModeCountRecord {
    pub fn new(counts: ModeCounts) -> Self {
        let l = match &counts {
            ModeCounts::Full(m) => m.iter().sum(),
            ModeCounts::Binary { m0, excited } => m0 + excited,
        };
        Self { l, counts }
    }

    pub fn detected(&self) -> u64 {
        self.l
    }

    pub fn counts(&self) -> &ModeCounts {
        &self.counts
    }

    /// `Σ_q q m_q`; `None` for binary records.
    pub fn mode_sum(&self) -> Option<u64> {
        match &self.counts {
            ModeCounts::Full(m) => Some(m.iter().enumerate().map(|(q, &n)| q as u64 * n).sum()),
            ModeCounts::Binary { .. } => None,
        }
    }

    /// Photons found in the fundamental mode.
    pub fn fundamental(&self) -> u64 {
        match &self.counts {
            ModeCounts::Full(m) => m.first().copied().unwrap_or(0),
            ModeCounts::Binary { m0, .. } => *m0,
        }
    }
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// `Σ_q q m_q` for aligned SPADE: one Poisson(`LQ`) draw.
pub fn sample_hg_sufficient<R: Rng + ?Sized>(l: u64, q: f64, rng: &mut R) -> u64 {
    poisson_draw(l as f64 * q, rng)
}

/// `4σ√(stat/L)`.
pub fn mle_hg(stat: u64, l: u64, sigma: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::ZeroPhotons);
    }
    Ok(4.0 * sigma * (stat as f64 / l as f64).sqrt())
}

/// `(m₀, L − m₀)` with `m₀ ~ Binomial(L, p₀)`.
pub fn sample_binary<R: Rng + ?Sized>(l: u64, p0: f64, rng: &mut R) -> Result<(u64, u64)> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidInput(format!("p0 must lie in [0, 1], got {p0}")));
    }
    let m0 = Binomial::new(l, p0).expect("validated p0").sample(rng);
    Ok((m0, l - m0))
}

/// `4σ√(−ln(m₀/L))`, or `2σ` when no photon reached the fundamental mode.
/// The estimator ignores any device misalignment.
pub fn mle_binary(m0: u64, l: u64, sigma: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::ZeroPhotons);
    }
    if m0 > l {
        return Err(Error::InvalidInput(format!("m0 = {m0} exceeds L = {l}")));
    }
    if m0 == 0 {
        return Ok(2.0 * sigma);
    }
    let q = -(m0 as f64 / l as f64).ln();
    Ok(4.0 * sigma * q.max(0.0).sqrt())
}

/// One-photon mode distribution `P₁(q) = ½[Pois(q; Q₁) + Pois(q; Q₂)]` for
/// a Gaussian PSF, truncated as in the information sums.
pub fn mode_distribution(theta2: f64, sigma: f64, mis: MisalignmentConfig) -> Vec<f64> {
    let s4 = 4.0 * sigma * sigma;
    let d = mis.offset(sigma);
    let q1 = (d + 0.5 * theta2).powi(2) / s4;
    let q2 = (d - 0.5 * theta2).powi(2) / s4;
    let q_max = information_cutoff(q1.max(q2));
    let p1 = poisson_pmf(q1, q_max);
    let p2 = poisson_pmf(q2, q_max);
    p1.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// Draws each of `l` photons independently from `probs` (normalized over
/// the truncated support).
pub fn sample_categorical<R: Rng + ?Sized>(l: u64, probs: &[f64], rng: &mut R) -> Result<ModeCountRecord> {
    let index = WeightedIndex::new(probs)
        .map_err(|e| Error::InvalidInput(format!("mode probabilities: {e}")))?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..l {
        counts[index.sample(rng)] += 1;
    }
    Ok(ModeCountRecord::new(ModeCounts::Full(counts)))
}

/// Same distribution as [`sample_categorical`] through successive
/// conditional binomials, at a cost independent of `l`.
pub fn sample_multinomial<R: Rng + ?Sized>(l: u64, probs: &[f64], rng: &mut R) -> Result<ModeCountRecord> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidInput("mode probabilities must be finite and >= 0".into()));
    }
    let mut rest_mass: f64 = probs.iter().sum();
    if !(rest_mass > 0.0) {
        return Err(Error::InvalidInput("mode probabilities sum to zero".into()));
    }
    let mut left = l;
    let mut counts = vec![0u64; probs.len()];
    for (q, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if q + 1 == probs.len() {
            counts[q] = left;
            break;
        }
        let share = (p / rest_mass).clamp(0.0, 1.0);
        let n = Binomial::new(left, share).expect("clamped share").sample(rng);
        counts[q] = n;
        left -= n;
        rest_mass -= p;
    }
    Ok(ModeCountRecord::new(ModeCounts::Full(counts)))
}

/// How the detected photon number is chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhotonMode {
    /// Exactly `L` photons every trial.
    Fixed,
    /// `L ~ Poisson(N)` with `N` the configured budget.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scheme: Scheme,
    pub sigma: f64,
    /// Detected photons `L`, or the mean `N` in [`PhotonMode::Poisson`].
    pub photons: u64,
    pub theta2_grid: Vec<f64>,
    pub trials: u64,
    pub xi: f64,
    pub seed: u64,
    pub photon_mode: PhotonMode,
    /// Estimate reported when no photon is detected, in units of σ.
    pub zero_photon_estimate: f64,
}

impl SweepConfig {
    pub fn new(scheme: Scheme, photons: u64, theta2_grid: Vec<f64>, trials: u64, seed: u64) -> Self {
        Self {
            scheme,
            sigma: 1.0,
            photons,
            theta2_grid,
            trials,
            xi: 0.0,
            seed,
            photon_mode: PhotonMode::Fixed,
            zero_photon_estimate: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.photons == 0 {
            return bad("photon budget must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.theta2_grid.is_empty() || self.theta2_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("separation grid must be non-empty, finite and >= 0".into());
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return bad(format!("xi must be >= 0, got {}", self.xi));
        }
        if !self.scheme.is_misaligned() && self.xi != 0.0 {
            return bad(format!("{} does not take a misalignment", self.scheme.name()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub config: SweepConfig,
    pub mse: Vec<f64>,
    /// Cramér-Rao bound at budget `L` for the simulated scheme.
    pub crb: Vec<f64>,
}

fn trial_rng(seed: u64, tag: u64, grid_index: usize, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(grid_index as u64);
    rng.set_word_pos((trial as u128) << TRIAL_WORDS_LOG2);
    rng
}

/// Per-point sampling setup shared by all trials.
enum PointModel {
    Hg { q: f64 },
    Binary { p0: f64 },
    Modes { probs: Vec<f64> },
}

impl PointModel {
    fn new(cfg: &SweepConfig, theta2: f64) -> Self {
        let sigma = cfg.sigma;
        let mis = MisalignmentConfig { xi: cfg.xi, sign: 1.0 };
        match cfg.scheme {
            Scheme::HgSpade => PointModel::Hg {
                q: mode_parameter(theta2, sigma),
            },
            Scheme::BinarySpade => PointModel::Binary {
                p0: (-mode_parameter(theta2, sigma)).exp(),
            },
            Scheme::MisalignedBinary => {
                let s4 = 4.0 * sigma * sigma;
                let d = mis.offset(sigma);
                let q1 = (d + 0.5 * theta2).powi(2) / s4;
                let q2 = (d - 0.5 * theta2).powi(2) / s4;
                PointModel::Binary {
                    p0: 0.5 * ((-q1).exp() + (-q2).exp()),
                }
            }
            Scheme::MisalignedHg => PointModel::Modes {
                probs: mode_distribution(theta2, sigma, mis),
            },
        }
    }

    fn estimate(&self, l: u64, sigma: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        match self {
            PointModel::Hg { q } => mle_hg(sample_hg_sufficient(l, *q, rng), l, sigma),
            PointModel::Binary { p0 } => {
                let (m0, _) = sample_binary(l, *p0, rng)?;
                mle_binary(m0, l, sigma)
            }
            PointModel::Modes { probs } => {
                let record = sample_multinomial(l, probs, rng)?;
                mle_hg(record.mode_sum().unwrap_or(0), l, sigma)
            }
        }
    }
}

fn crb_at(cfg: &SweepConfig, theta2: f64) -> Result<f64> {
    let sigma = cfg.sigma;
    let l = cfg.photons as f64;
    let base = 4.0 * sigma * sigma / l;
    Ok(match cfg.scheme {
        Scheme::HgSpade => base,
        Scheme::BinarySpade => {
            let q = mode_parameter(theta2, sigma);
            if q == 0.0 {
                base
            } else {
                base * q.exp_m1() / q
            }
        }
        Scheme::MisalignedBinary | Scheme::MisalignedHg => {
            let psf = PointSpreadFunction::gaussian(sigma)?;
            let model = OnePhotonModel::with_photons(psf, 0.0, theta2, l)?;
            let mis = MisalignmentConfig { xi: cfg.xi, sign: 1.0 };
            let j = if cfg.scheme == Scheme::MisalignedBinary {
                fisher::misaligned_binary_fisher(&model, mis)?
            } else {
                fisher::misaligned_hg_fisher(&model, mis)?
            };
            if j.j22 > 0.0 {
                1.0 / j.j22
            } else {
                f64::INFINITY
            }
        }
    })
}

/// Mean-square error of the maximum-likelihood separation estimate at every
/// grid point, with the matching Cramér-Rao bound.
pub fn run_error_sweep(cfg: &SweepConfig) -> Result<EstimationReport> {
    cfg.validate()?;
    let tag = cfg.scheme.stream_tag();
    let blocks = cfg.trials.div_ceil(BLOCK);
    let units: Vec<(usize, u64)> = (0..cfg.theta2_grid.len())
        .flat_map(|g| (0..blocks).map(move |b| (g, b)))
        .collect();
    let models: Vec<PointModel> = cfg.theta2_grid.iter().map(|&t| PointModel::new(cfg, t)).collect();
    let block_sums: Vec<f64> = units
        .par_iter()
        .map(|&(g, b)| -> Result<f64> {
            let theta2 = cfg.theta2_grid[g];
            let model = &models[g];
            let mut sum = 0.0;
            for trial in b * BLOCK..((b + 1) * BLOCK).min(cfg.trials) {
                let mut rng = trial_rng(cfg.seed, tag, g, trial);
                let l = match cfg.photon_mode {
                    PhotonMode::Fixed => cfg.photons,
                    PhotonMode::Poisson => poisson_draw(cfg.photons as f64, &mut rng),
                };
                let est = if l == 0 {
                    cfg.zero_photon_estimate * cfg.sigma
                } else {
                    model.estimate(l, cfg.sigma, &mut rng)?
                };
                sum += (est - theta2).powi(2);
            }
            Ok(sum)
        })
        .collect::<Result<_>>()?;
    let mse = block_sums
        .chunks(blocks as usize)
        .map(|c| c.iter().sum::<f64>() / cfg.trials as f64)
        .collect();
    let crb = cfg
        .theta2_grid
        .iter()
        .map(|&t| crb_at(cfg, t))
        .collect::<Result<_>>()?;
    Ok(EstimationReport {
        config: cfg.clone(),
        mse,
        crb,
    })
}

impl EstimationReport {
    /// CSV with '#' metadata lines, a header row and one row per grid point.
    /// `mse` and `crb` are normalized by `4σ²/L`, `theta2` by `σ`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.config;
        let unit = 4.0 * c.sigma * c.sigma / c.photons as f64;
        writeln!(w, "# scheme={} sigma={} photon_mode={:?}", c.scheme.name(), c.sigma, c.photon_mode)?;
        writeln!(
            w,
            "# 8 columns; theta2 / sigma; mse and crb / (4 sigma^2 / L); estimate {} sigma when L = 0 or m0 = 0",
            c.zero_photon_estimate
        )?;
        writeln!(w, "theta2,mse,crb,trials,L,xi,scheme,seed")?;
        for ((t, m), b) in c.theta2_grid.iter().zip(&self.mse).zip(&self.crb) {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t / c.sigma,
                m / unit,
                b / unit,
                c.trials,
                c.photons,
                c.xi,
                c.scheme.name(),
                c.seed
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}
