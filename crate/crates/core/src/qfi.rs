//! Quantum Fisher information for the one-photon state of two incoherent
//! point sources.
//!
//! Two routes are provided: the closed form `𝒦₁₁ = 4N(Δk² − γ²)`,
//! `𝒦₂₂ = NΔk²`, `𝒦₁₂ = 0`, and an explicit symmetric-logarithmic-derivative
//! construction on the four-dimensional subspace spanned by the two source
//! modes and their position derivatives. The SLD route builds its basis norms
//! (`c₃`, `c₄`) by direct quadrature of the Gram-Schmidt residuals, so the two
//! routes share only the scalar overlaps.

use crate::error::{Error, Result};
use crate::fisher::{FisherMatrix, Provenance};
use crate::psf::{OverlapQuantities, PointSpreadFunction};

/// Weak-source regime bound on the mean photon number per coherence interval.
pub const MAX_EPSILON: f64 = 0.1;

/// Basis construction is refused when `1 - δ` drops below this.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// First-order (in ε) model of two equally bright incoherent sources imaged
/// through a shift-invariant PSF.
#[derive(Debug, Clone, PartialEq)]
pub struct OnePhotonModel {
    pub psf: PointSpreadFunction,
    x1: f64,
    x2: f64,
    epsilon: f64,
    intervals: u64,
}

impl OnePhotonModel {
    /// Sources are relabelled so that `x1 <= x2`.
    pub fn new(psf: PointSpreadFunction, x1: f64, x2: f64, epsilon: f64, intervals: u64) -> Result<Self> {
        if !(x1.is_finite() && x2.is_finite()) {
            return Err(Error::InvalidInput("source positions must be finite".into()));
        }
        if !(epsilon > 0.0 && epsilon <= MAX_EPSILON) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, {MAX_EPSILON}], got {epsilon}"
            )));
        }
        if intervals == 0 {
            return Err(Error::InvalidInput("need at least one coherence interval".into()));
        }
        let (x1, x2) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        Ok(Self {
            psf,
            x1,
            x2,
            epsilon,
            intervals,
        })
    }

    /// Sources at `centroid ∓ separation/2` with mean photon number
    /// `photons`, split into the fewest coherence intervals that keep
    /// `ε <= 0.1`.
    pub fn with_photons(psf: PointSpreadFunction, centroid: f64, separation: f64, photons: f64) -> Result<Self> {
        if !(separation >= 0.0 && separation.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "separation must be finite and non-negative, got {separation}"
            )));
        }
        if !(photons > 0.0 && photons.is_finite()) {
            return Err(Error::InvalidInput(format!("photon number must be positive, got {photons}")));
        }
        let intervals = (photons / MAX_EPSILON).ceil().max(1.0) as u64;
        let epsilon = photons / intervals as f64;
        Self::new(
            psf,
            centroid - 0.5 * separation,
            centroid + 0.5 * separation,
            epsilon,
            intervals,
        )
    }

    /// Centroid at the origin.
    pub fn centred(psf: PointSpreadFunction, separation: f64, photons: f64) -> Result<Self> {
        Self::with_photons(psf, 0.0, separation, photons)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn intervals(&self) -> u64 {
        self.intervals
    }

    /// `N = Mε`.
    pub fn photons(&self) -> f64 {
        self.intervals as f64 * self.epsilon
    }

    pub fn centroid(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }

    pub fn separation(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn overlaps(&self) -> Result<OverlapQuantities> {
        self.psf.overlaps(self.separation())
    }
}

/// `𝒦 = diag(4N(Δk² − γ²), NΔk²)`.
pub fn qfi_closed_form(model: &OnePhotonModel) -> Result<FisherMatrix> {
    let o = model.overlaps()?;
    let n = model.photons();
    Ok(FisherMatrix::new(
        4.0 * n * (o.dk2 - o.gamma * o.gamma),
        0.0,
        n * o.dk2,
        Provenance::Quantum,
        n,
    ))
}

pub type Matrix4 = [[f64; 4]; 4];

/// Scalars parameterizing the orthonormal basis `e₁..e₄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramData {
    pub delta: f64,
    pub one_minus_delta: f64,
    pub gamma: f64,
    pub dk2: f64,
    pub b2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl GramData {
    /// `Δk² + b² − γ²/(1−δ)`, the value `c₃²` must equal.
    pub fn c3_sq_formula(&self) -> f64 {
        self.dk2 + self.b2 - self.gamma * self.gamma / self.one_minus_delta
    }

    /// `Δk² − b² − γ²/(1+δ)`.
    pub fn c4_sq_formula(&self) -> f64 {
        self.dk2 - self.b2 - self.gamma * self.gamma / (1.0 + self.delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SldDecomposition {
    /// Eigenvalues of `ρ₁` in the `e` basis: `(1−δ)/2, (1+δ)/2, 0, 0`.
    pub eigenvalues: [f64; 4],
    pub gram: GramData,
    /// SLDs with respect to the source positions `X₁`, `X₂`.
    pub sld_positions: [Matrix4; 2],
    /// SLDs with respect to centroid and separation.
    pub sld: [Matrix4; 2],
}

/// Build the `e` basis, eigenvalues and SLD matrices for `model`.
pub fn sld_decompose(model: &OnePhotonModel) -> Result<SldDecomposition> {
    let o = model.overlaps()?;
    let omd = o.one_minus_delta;
    if !(omd >= DEGENERACY_THRESHOLD) {
        return Err(Error::DegenerateBasis(format!(
            "1 - δ = {omd:e} is below {DEGENERACY_THRESHOLD:e}; the sources coincide"
        )));
    }
    let psf = &model.psf;
    let (x1, x2) = (model.x1(), model.x2());
    let centres = [x1, x2];
    let a3 = o.gamma / omd;
    let a4 = o.gamma / (1.0 + o.delta);
    // The residuals cancel terms of size dk2, so only absolute accuracy on
    // that scale is meaningful.
    let floor = 1e-15 * o.dk2;
    let c3_sq = 0.5
        * psf.integrate_over_with_floor(&centres, floor, |x| {
            let r = psf.derivative(x - x1) + psf.derivative(x - x2) + a3 * (psf.evaluate(x - x1) - psf.evaluate(x - x2));
            r * r
        })?;
    let c4_sq = 0.5
        * psf.integrate_over_with_floor(&centres, floor, |x| {
            let r = psf.derivative(x - x2) - psf.derivative(x - x1) + a4 * (psf.evaluate(x - x1) + psf.evaluate(x - x2));
            r * r
        })?;
    let gram = GramData {
        delta: o.delta,
        one_minus_delta: omd,
        gamma: o.gamma,
        dk2: o.dk2,
        b2: o.b2,
        c3: c3_sq.sqrt(),
        c4: c4_sq.sqrt(),
    };
    Ok(decomposition_from_gram(gram))
}

/// Eigenvalues and SLD matrices from basis scalars. Requires `1 − δ > 0`.
pub fn decomposition_from_gram(gram: GramData) -> SldDecomposition {
    let GramData {
        delta,
        one_minus_delta: omd,
        gamma,
        c3,
        c4,
        ..
    } = gram;
    let opd = 1.0 + delta;
    let mut l1 = [[0.0; 4]; 4];
    let mut l2 = [[0.0; 4]; 4];
    let mut set = |j: usize, k: usize, v1: f64, v2: f64| {
        l1[j][k] = v1;
        l1[k][j] = v1;
        l2[j][k] = v2;
        l2[k][j] = v2;
    };
    let s11 = gamma / omd;
    let s12 = gamma * delta / (omd * opd).sqrt();
    set(0, 0, s11, -s11);
    set(0, 1, s12, s12);
    set(0, 2, c3 / omd.sqrt(), -c3 / omd.sqrt());
    set(0, 3, c4 / omd.sqrt(), c4 / omd.sqrt());
    set(1, 1, -gamma / opd, gamma / opd);
    set(1, 2, c3 / opd.sqrt(), c3 / opd.sqrt());
    set(1, 3, c4 / opd.sqrt(), -c4 / opd.sqrt());

    let mut centroid = [[0.0; 4]; 4];
    let mut separation = [[0.0; 4]; 4];
    for j in 0..4 {
        for k in 0..4 {
            centroid[j][k] = l1[j][k] + l2[j][k];
            separation[j][k] = 0.5 * (l2[j][k] - l1[j][k]);
        }
    }
    SldDecomposition {
        eigenvalues: [0.5 * omd, 0.5 * opd, 0.0, 0.0],
        gram,
        sld_positions: [l1, l2],
        sld: [centroid, separation],
    }
}

/// `𝒦_{μν} = N Re tr(ℒ_μ ℒ_ν ρ₁)`, evaluated in the eigenbasis of `ρ₁`.
pub fn qfi_from_sld(decomp: &SldDecomposition, model: &OnePhotonModel) -> FisherMatrix {
    let k = |a: &Matrix4, b: &Matrix4| {
        let mut acc = 0.0;
        for (j, d) in decomp.eigenvalues.iter().enumerate() {
            for kk in 0..4 {
                acc += d * a[j][kk] * b[kk][j];
            }
        }
        acc
    };
    let n = model.photons();
    let [c, s] = &decomp.sld;
    FisherMatrix::new(n * k(c, c), n * k(c, s), n * k(s, s), Provenance::Quantum, n)
}
