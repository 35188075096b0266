//! Classical Fisher information for direct imaging and the SPADE family of
//! measurements, plus the localization bound built from them.
//!
//! All informations are with respect to `(θ₁, θ₂)` = (centroid, separation).
//! Measurements that only address the separation report `j11 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psf::{PointSpreadFunction, PsfKind};
use crate::qfi::OnePhotonModel;

/// Direct-imaging integrand is dropped where the intensity falls below this.
pub const INTENSITY_FLOOR: f64 = 1e-30;
/// Poisson tail mass left out of the Hermite-Gaussian sums.
pub const POISSON_TAIL: f64 = 1e-12;
/// Hard cap on the Hermite-Gaussian mode index.
pub const Q_MAX_CAP: usize = 512;
/// SPADE outcome probabilities below this carry no information and are skipped.
pub const PROBABILITY_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Quantum,
    Direct,
    HgSpade,
    BinarySpade,
    Hybrid,
}

/// Symmetric 2×2 information matrix over (centroid, separation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub j11: f64,
    pub j12: f64,
    pub j22: f64,
    pub provenance: Provenance,
    /// Mean photon number `N` (or detected count `L`) the values scale with.
    pub photon_budget: f64,
}

impl FisherMatrix {
    pub fn new(j11: f64, j12: f64, j22: f64, provenance: Provenance, photon_budget: f64) -> Self {
        Self {
            j11,
            j12,
            j22,
            provenance,
            photon_budget,
        }
    }

    fn separation_only(j22: f64, provenance: Provenance, photon_budget: f64) -> Self {
        Self::new(0.0, 0.0, j22, provenance, photon_budget)
    }

    pub fn determinant(&self) -> f64 {
        self.j11 * self.j22 - self.j12 * self.j12
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.j11 + self.j22);
        let half_gap = (0.25 * (self.j11 - self.j22).powi(2) + self.j12 * self.j12).sqrt();
        [mean - half_gap, mean + half_gap]
    }

    /// Same matrix with every element multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            j11: self.j11 * factor,
            j12: self.j12 * factor,
            j22: self.j22 * factor,
            photon_budget: self.photon_budget * factor,
            ..*self
        }
    }
}

/// Centroid-alignment error of a SPADE device: `|θ̌₁ − θ₁| = ξσ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentConfig {
    pub xi: f64,
    /// Direction of the offset, `+1` or `-1`.
    pub sign: f64,
}

impl MisalignmentConfig {
    pub fn new(xi: f64) -> Result<Self> {
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::InvalidInput(format!("misalignment xi must be >= 0, got {xi}")));
        }
        Ok(Self { xi, sign: 1.0 })
    }

    pub fn aligned() -> Self {
        Self { xi: 0.0, sign: 1.0 }
    }

    pub fn with_sign(mut self, sign: f64) -> Self {
        self.sign = if sign < 0.0 { -1.0 } else { 1.0 };
        self
    }

    /// `θ̌₁ − θ₁`.
    pub fn offset(&self, sigma: f64) -> f64 {
        self.sign * self.xi * sigma
    }
}

fn gaussian_sigma(psf: &PointSpreadFunction) -> Result<f64> {
    match psf.kind {
        PsfKind::Gaussian { sigma } => Ok(sigma),
        _ => Err(Error::NotGaussianPsf),
    }
}

/// `Q = θ₂²/(16σ²)`.
pub fn mode_parameter(theta2: f64, sigma: f64) -> f64 {
    theta2 * theta2 / (16.0 * sigma * sigma)
}

/// Smallest `q` such that the Poisson(`mean`) mass above `q` is below
/// [`POISSON_TAIL`], capped at [`Q_MAX_CAP`].
pub fn poisson_cutoff(mean: f64) -> usize {
    let mut p = (-mean).exp();
    for q in 0..Q_MAX_CAP {
        let next = p * mean / (q + 1) as f64;
        let ratio = mean / (q + 2) as f64;
        if ratio < 1.0 && next / (1.0 - ratio) < POISSON_TAIL {
            return q;
        }
        p = next;
    }
    Q_MAX_CAP
}

/// Relative share of the separation information allowed in the omitted tail.
pub const INFORMATION_TAIL: f64 = 1e-15;

/// Cutoff for information sums over Poisson(`mean`) outcomes. Extends
/// [`poisson_cutoff`] until the tail of `P(q)(q − Q)²/Q`, which is the
/// per-outcome share of the information, is below [`INFORMATION_TAIL`].
pub fn information_cutoff(mean: f64) -> usize {
    let mut q = poisson_cutoff(mean);
    if mean <= 0.0 {
        return q;
    }
    let mut p = poisson_pmf(mean, q)[q];
    while q < Q_MAX_CAP {
        let next = p * mean / (q + 1) as f64;
        let weight = |k: f64| (k - mean).powi(2) / mean;
        // Successive weighted terms shrink at least geometrically past the mode.
        let ratio = mean / (q + 2) as f64 * weight((q + 2) as f64) / weight((q + 1) as f64).max(f64::MIN_POSITIVE);
        if ratio < 1.0 && next * weight((q + 1) as f64) / (1.0 - ratio) < INFORMATION_TAIL {
            break;
        }
        p = next;
        q += 1;
    }
    q
}

/// Poisson probabilities `P(0..=q_max)` by recurrence.
pub(crate) fn poisson_pmf(mean: f64, q_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(q_max + 1);
    let mut p = (-mean).exp();
    out.push(p);
    for q in 1..=q_max {
        p *= mean / q as f64;
        out.push(p);
    }
    out
}

const CROSS_TERM_TOL: f64 = 1e-13;

/// Direct imaging with the default intensity floor.
pub fn direct_imaging_fisher(model: &OnePhotonModel) -> Result<FisherMatrix> {
    direct_imaging_fisher_with_floor(model, INTENSITY_FLOOR)
}

/// `𝒥_{μν} = N∫(∂_μΛ)(∂_νΛ)/Λ dx` for the photon-position density
/// `Λ = (ψ₁² + ψ₂²)/2`.
pub fn direct_imaging_fisher_with_floor(model: &OnePhotonModel, floor: f64) -> Result<FisherMatrix> {
    let psf = &model.psf;
    let (x1, x2) = (model.x1(), model.x2());
    let centres = [x1, x2];
    let parts = |x: f64| {
        let (p1, p2) = (psf.evaluate(x - x1), psf.evaluate(x - x2));
        let (d1, d2) = (psf.derivative(x - x1), psf.derivative(x - x2));
        let lambda = 0.5 * (p1 * p1 + p2 * p2);
        let dc = -(p1 * d1 + p2 * d2);
        let ds = 0.5 * (p1 * d1 - p2 * d2);
        (lambda, dc, ds)
    };
    let weighted = |select: fn(f64, f64) -> f64, abs_floor: f64| {
        psf.integrate_over_with_floor(&centres, abs_floor, move |x| {
            let (lambda, dc, ds) = parts(x);
            if lambda < floor {
                0.0
            } else {
                select(dc, ds) / lambda
            }
        })
    };
    let n = model.photons();
    let j11 = weighted(|c, _| c * c, 0.0)?;
    let j22 = if model.separation() == 0.0 {
        // ∂Λ/∂θ₂ vanishes identically.
        0.0
    } else {
        weighted(|_, s| s * s, 0.0)?
    };
    // |j12| <= sqrt(j11 j22), which sets the scale for an often-vanishing value.
    let j12 = weighted(|c, s| c * s, CROSS_TERM_TOL * (j11 * j22).sqrt())?;
    Ok(FisherMatrix::new(n * j11, n * j12, n * j22, Provenance::Direct, n))
}

/// Hermite-Gaussian SPADE aligned with the centroid:
/// `N Σ_{q≤q_max} P(q)(∂ ln P(q)/∂θ₂)²` with `P(q) = Poisson(q; Q)`.
pub fn hg_spade_fisher(model: &OnePhotonModel, q_max: usize) -> Result<FisherMatrix> {
    let sigma = gaussian_sigma(&model.psf)?;
    let n = model.photons();
    let theta2 = model.separation();
    if theta2 == 0.0 {
        return Ok(FisherMatrix::separation_only(
            n / (4.0 * sigma * sigma),
            Provenance::HgSpade,
            n,
        ));
    }
    let q = mode_parameter(theta2, sigma);
    // ∂ ln P(q)/∂θ₂ = 2(q − Q)/θ₂
    let sum: f64 = poisson_pmf(q, q_max)
        .iter()
        .enumerate()
        .map(|(k, p)| p * (2.0 * (k as f64 - q) / theta2).powi(2))
        .sum();
    Ok(FisherMatrix::separation_only(n * sum, Provenance::HgSpade, n))
}

/// [`hg_spade_fisher`] with the cutoff from [`information_cutoff`].
pub fn hg_spade_fisher_auto(model: &OnePhotonModel) -> Result<FisherMatrix> {
    let sigma = gaussian_sigma(&model.psf)?;
    hg_spade_fisher(model, information_cutoff(mode_parameter(model.separation(), sigma)))
}

/// `N/(4σ²) · Q e^{−Q}/(1 − e^{−Q})`.
pub fn binary_spade_fisher_gaussian(model: &OnePhotonModel) -> Result<FisherMatrix> {
    let sigma = gaussian_sigma(&model.psf)?;
    let n = model.photons();
    let q = mode_parameter(model.separation(), sigma);
    let ratio = if q == 0.0 { 1.0 } else { q / q.exp_m1() };
    Ok(FisherMatrix::separation_only(
        n / (4.0 * sigma * sigma) * ratio,
        Provenance::BinarySpade,
        n,
    ))
}

/// Below this fraction of the PSF width the Υ-based information is replaced
/// by its `θ₂ → 0` limit `NΔk²`.
pub const BINARY_LIMIT_FRACTION: f64 = 1e-6;

/// Binary SPADE with a PSF-matched fundamental mode, any PSF:
/// `N (∂Υ/∂θ₂)² / (Υ(1 − Υ))`.
pub fn binary_spade_fisher_general(psf: &PointSpreadFunction, theta2: f64, photons: f64) -> Result<FisherMatrix> {
    if !(theta2 >= 0.0 && theta2.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "separation must be finite and non-negative, got {theta2}"
        )));
    }
    let width = psf.width();
    if theta2 < BINARY_LIMIT_FRACTION * width {
        return Ok(FisherMatrix::separation_only(
            photons * psf.dk2()?,
            Provenance::BinarySpade,
            photons,
        ));
    }
    let upsilon = psf.transfer_overlap(theta2)?;
    let h = 1e-4 * width;
    let central = |h: f64| -> Result<f64> {
        Ok((psf.transfer_overlap(theta2 + h)? - psf.transfer_overlap(theta2 - h)?) / (2.0 * h))
    };
    let (coarse, fine) = (central(h)?, central(0.5 * h)?);
    let slope = (4.0 * fine - coarse) / 3.0;
    let denom = upsilon * (1.0 - upsilon);
    let j22 = if denom > 0.0 { photons * slope * slope / denom } else { 0.0 };
    Ok(FisherMatrix::separation_only(j22, Provenance::BinarySpade, photons))
}

/// `(Q₁, Q₂, ∂Q₁/∂θ₂, ∂Q₂/∂θ₂)` for a device centred at `θ₁ + offset`.
fn misaligned_parameters(theta2: f64, offset: f64, sigma: f64) -> (f64, f64, f64, f64) {
    let s4 = 4.0 * sigma * sigma;
    let a = offset + 0.5 * theta2;
    let b = offset - 0.5 * theta2;
    (a * a / s4, b * b / s4, a / s4, -b / s4)
}

/// Hermite-Gaussian SPADE centred at `θ₁ + ξσ`: each source excites a
/// Poisson mode distribution with its own displacement.
pub fn misaligned_hg_fisher(model: &OnePhotonModel, mis: MisalignmentConfig) -> Result<FisherMatrix> {
    let sigma = gaussian_sigma(&model.psf)?;
    let theta2 = model.separation();
    if mis.xi == 0.0 && theta2 == 0.0 {
        return hg_spade_fisher(model, 0);
    }
    let n = model.photons();
    let (q1, q2, dq1, dq2) = misaligned_parameters(theta2, mis.offset(sigma), sigma);
    let q_max = information_cutoff(q1.max(q2));
    let p1 = poisson_pmf(q1, q_max);
    let p2 = poisson_pmf(q2, q_max);
    let mut sum = 0.0;
    for k in 0..=q_max {
        let p = 0.5 * (p1[k] + p2[k]);
        if p < PROBABILITY_FLOOR {
            continue;
        }
        // ∂Poisson(k; Q)/∂Q = Poisson(k−1; Q) − Poisson(k; Q)
        let prev = |pk: &[f64]| if k == 0 { 0.0 } else { pk[k - 1] };
        let dp = 0.5 * ((prev(&p1) - p1[k]) * dq1 + (prev(&p2) - p2[k]) * dq2);
        sum += dp * dp / p;
    }
    Ok(FisherMatrix::separation_only(n * sum, Provenance::HgSpade, n))
}

/// Binary SPADE centred at `θ₁ + ξσ`, with
/// `P(q = 0) = (e^{−Q₁} + e^{−Q₂})/2`.
pub fn misaligned_binary_fisher(model: &OnePhotonModel, mis: MisalignmentConfig) -> Result<FisherMatrix> {
    let sigma = gaussian_sigma(&model.psf)?;
    let theta2 = model.separation();
    if mis.xi == 0.0 && theta2 == 0.0 {
        return binary_spade_fisher_gaussian(model);
    }
    let n = model.photons();
    let (q1, q2, dq1, dq2) = misaligned_parameters(theta2, mis.offset(sigma), sigma);
    let p0 = 0.5 * ((-q1).exp() + (-q2).exp());
    let p_high = -0.5 * ((-q1).exp_m1() + (-q2).exp_m1());
    let dp0 = -0.5 * ((-q1).exp() * dq1 + (-q2).exp() * dq2);
    let j22 = if p0 < PROBABILITY_FLOOR || p_high < PROBABILITY_FLOOR {
        0.0
    } else {
        n * dp0 * dp0 / (p0 * p_high)
    };
    Ok(FisherMatrix::separation_only(j22, Provenance::BinarySpade, n))
}

/// 50-50 split between direct imaging and binary SPADE, each arm receiving
/// `N/2` photons. The SPADE arm only informs the separation.
pub fn hybrid_fisher(model: &OnePhotonModel, mis: MisalignmentConfig) -> Result<FisherMatrix> {
    let direct = direct_imaging_fisher(model)?;
    let binary = if mis.xi == 0.0 && !model.psf.is_gaussian() {
        binary_spade_fisher_general(&model.psf, model.separation(), model.photons())?
    } else {
        misaligned_binary_fisher(model, mis)?
    };
    let n = model.photons();
    Ok(FisherMatrix::new(
        0.5 * direct.j11,
        0.0,
        0.5 * direct.j22 + 0.5 * binary.j22,
        Provenance::Hybrid,
        n,
    ))
}

/// Mean-square error bound for locating either source,
/// `1/𝒥₁₁ + 1/(4𝒥₂₂)`; infinite when either information vanishes.
pub fn localization_bound(fm: &FisherMatrix) -> f64 {
    if fm.j11 <= 0.0 || fm.j22 <= 0.0 {
        return f64::INFINITY;
    }
    1.0 / fm.j11 + 1.0 / (4.0 * fm.j22)
}
