//! Point-spread functions and the overlap integrals built from them.
//!
//! All amplitudes are real and unit-normalized. Two-source geometry puts the
//! sources at `X1 = -θ₂/2` and `X2 = +θ₂/2` (centroid at the origin).

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, integrate_periodic_tails, PeriodicTails, QuadOptions};

/// Largest knot count for which every tabulated knot is seeded as a
/// breakpoint.
const MAX_SEEDED_KNOTS: usize = 4096;

/// Shape of the amplitude profile.
#[derive(Debug, Clone, PartialEq)]
pub enum PsfKind {
    /// `(2πσ²)^{-1/4} exp(-x²/(4σ²))`
    Gaussian { sigma: f64 },
    /// `W^{-1/2} sinc(x/W)` with `sinc u = sin(πu)/(πu)`
    Sinc { width: f64 },
    /// Natural cubic spline through user samples; zero outside the grid.
    Tabulated(TabulatedPsf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSpreadFunction {
    pub kind: PsfKind,
    /// Gaussian and tabulated: integrals run over `[min shift - h, max shift + h]`.
    /// Sinc: radius of the innermost truncation window of the tail
    /// extrapolation.
    pub support_halfwidth: f64,
}

/// Scalar overlap integrals for separation `θ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapQuantities {
    /// `∫ψ(x-X1)ψ(x-X2)dx`
    pub delta: f64,
    /// `1 - delta`, evaluated without cancellation.
    pub one_minus_delta: f64,
    /// `∫ψ'(x)ψ(x-θ₂)dx`
    pub gamma: f64,
    /// `∫ψ'(x)²dx`
    pub dk2: f64,
    /// `∫ ∂ψ(x-X1)/∂X1 · ∂ψ(x-X2)/∂X2 dx`
    pub b2: f64,
}

impl PointSpreadFunction {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("Gaussian sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            kind: PsfKind::Gaussian { sigma },
            support_halfwidth: 10.0 * sigma,
        })
    }

    pub fn sinc(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidInput(format!("sinc width must be positive, got {width}")));
        }
        Ok(Self {
            kind: PsfKind::Sinc { width },
            support_halfwidth: 32.0 * width,
        })
    }

    pub fn tabulated(table: TabulatedPsf) -> Self {
        let half = 0.5 * (table.xs[table.xs.len() - 1] - table.xs[0]);
        Self {
            kind: PsfKind::Tabulated(table),
            support_halfwidth: half,
        }
    }

    /// Characteristic length: σ, W, or the RMS width of a tabulated `ψ²`.
    pub fn width(&self) -> f64 {
        match &self.kind {
            PsfKind::Gaussian { sigma } => *sigma,
            PsfKind::Sinc { width } => *width,
            PsfKind::Tabulated(t) => t.rms_width,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, PsfKind::Gaussian { .. })
    }

    /// `ψ(x)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        match &self.kind {
            PsfKind::Gaussian { sigma } => {
                (2.0 * PI * sigma * sigma).powf(-0.25) * (-x * x / (4.0 * sigma * sigma)).exp()
            }
            PsfKind::Sinc { width } => sinc(x / width) / width.sqrt(),
            PsfKind::Tabulated(t) => t.value(x),
        }
    }

    /// `∂ψ/∂x`: analytic for Gaussian and sinc, the spline derivative for
    /// tabulated profiles.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            PsfKind::Gaussian { sigma } => -x / (2.0 * sigma * sigma) * self.evaluate(x),
            PsfKind::Sinc { width } => sinc_prime(x / width) / (width * width.sqrt()),
            PsfKind::Tabulated(t) => t.slope(x),
        }
    }

    fn quad_options(&self) -> QuadOptions {
        match self.kind {
            PsfKind::Gaussian { .. } => QuadOptions::new(0.0, 1e-12),
            PsfKind::Sinc { .. } => QuadOptions::new(0.0, 1e-12),
            PsfKind::Tabulated(_) => QuadOptions::new(0.0, 1e-10),
        }
    }

    /// Integrate `f` over the whole line, where `f` is built from copies of
    /// `ψ` centred at each of `centres`. Breakpoints are seeded at the centres
    /// (and, for sinc, at every zero of every copy).
    pub fn integrate_over<F: Fn(f64) -> f64>(&self, centres: &[f64], f: F) -> Result<f64> {
        self.integrate_over_with_floor(centres, 0.0, f)
    }

    /// As [`PointSpreadFunction::integrate_over`], accepting an absolute error `floor` for
    /// integrands whose value is far below the size of their terms.
    pub fn integrate_over_with_floor<F: Fn(f64) -> f64>(
        &self,
        centres: &[f64],
        floor: f64,
        f: F,
    ) -> Result<f64> {
        let lo = centres.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = centres.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput("integration needs finite centres".into()));
        }
        let mut opts = self.quad_options();
        opts.abs_tol = opts.abs_tol.max(floor);
        match &self.kind {
            PsfKind::Gaussian { .. } => {
                let h = self.support_halfwidth;
                let mut pts = vec![lo - h, hi + h];
                pts.extend_from_slice(centres);
                pts.push(0.5 * (lo + hi));
                sort_dedup(&mut pts);
                Ok(integrate_adaptive(&f, &pts, opts)?.value)
            }
            PsfKind::Sinc { width } => {
                let w = *width;
                let spread = (hi - lo).max(0.0);
                // Power-of-two window sizes keep nearby shifts on the same
                // layout, so finite differences across them stay smooth.
                let base = ((self.support_halfwidth / w).ceil() as usize)
                    .max(32)
                    .max((8.0 * (spread + lo.abs().max(hi.abs())) / w).ceil() as usize)
                    .next_power_of_two();
                let layout = PeriodicTails {
                    period: w,
                    origin: 0.0,
                    base_cells: base,
                    levels: 6,
                };
                let breaks = |a: f64, b: f64| {
                    let mut pts = Vec::with_capacity(centres.len() + 1);
                    for &c in centres {
                        // zeros of ψ(x - c) sit at c + kW, k ≠ 0; c itself is the peak
                        let k0 = ((a - c) / w).ceil();
                        let mut z = c + k0 * w;
                        while z < b {
                            if z > a {
                                pts.push(z);
                            }
                            z += w;
                        }
                    }
                    sort_dedup(&mut pts);
                    pts
                };
                Ok(integrate_periodic_tails(&f, breaks, layout, opts)?.value)
            }
            PsfKind::Tabulated(t) => {
                let a = t.xs[0];
                let b = t.xs[t.xs.len() - 1];
                let mut pts = vec![a + lo, b + hi];
                if t.xs.len() * centres.len() <= MAX_SEEDED_KNOTS {
                    for &c in centres {
                        pts.extend(t.xs.iter().map(|x| x + c));
                    }
                }
                sort_dedup(&mut pts);
                Ok(integrate_adaptive(&f, &pts, opts)?.value)
            }
        }
    }

    /// Overlap integrals at separation `theta2`. Gaussian profiles use the
    /// closed forms; everything else goes through quadrature.
    pub fn overlaps(&self, theta2: f64) -> Result<OverlapQuantities> {
        check_separation(theta2)?;
        match self.kind {
            PsfKind::Gaussian { sigma } => Ok(gaussian_overlaps(sigma, theta2)),
            _ => self.overlaps_by_quadrature(theta2),
        }
    }

    /// Overlap integrals by quadrature for any profile.
    pub fn overlaps_by_quadrature(&self, theta2: f64) -> Result<OverlapQuantities> {
        check_separation(theta2)?;
        let (x1, x2) = (-0.5 * theta2, 0.5 * theta2);
        let psi = |x: f64| self.evaluate(x);
        let dpsi = |x: f64| self.derivative(x);
        let centres = [x1, x2];
        let delta = self.integrate_over(&centres, |x| psi(x - x1) * psi(x - x2))?;
        let one_minus_delta = if theta2 == 0.0 {
            0.0
        } else {
            // ½∫(ψ₁-ψ₂)² with both copies unit-norm
            0.5 * self.integrate_over(&centres, |x| {
                let d = psi(x - x1) - psi(x - x2);
                d * d
            })?
        };
        let gamma = self.integrate_over(&centres, |x| dpsi(x - x1) * psi(x - x2))?;
        let dk2 = self.integrate_over(&[0.0], |x| dpsi(x).powi(2))?;
        let b2 = self.integrate_over(&centres, |x| dpsi(x - x1) * dpsi(x - x2))?;
        Ok(OverlapQuantities {
            delta,
            one_minus_delta,
            gamma,
            dk2,
            b2,
        })
    }

    /// `∫ψ'(x)²dx`.
    pub fn dk2(&self) -> Result<f64> {
        match self.kind {
            PsfKind::Gaussian { sigma } => Ok(1.0 / (4.0 * sigma * sigma)),
            _ => self.integrate_over(&[0.0], |x| self.derivative(x).powi(2)),
        }
    }

    /// Mode overlap factor `Υ(θ₂) = |∫ψ(x)ψ(x+θ₂/2)dx|²`, in position space.
    pub fn transfer_overlap(&self, theta2: f64) -> Result<f64> {
        if !theta2.is_finite() {
            return Err(Error::InvalidInput(format!("separation must be finite, got {theta2}")));
        }
        if theta2 == 0.0 {
            return Ok(1.0);
        }
        let s = 0.5 * theta2;
        let amp = self.integrate_over(&[0.0, -s], |x| self.evaluate(x) * self.evaluate(x + s))?;
        Ok((amp * amp).clamp(0.0, 1.0))
    }
}

fn check_separation(theta2: f64) -> Result<()> {
    if theta2 >= 0.0 && theta2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "separation must be finite and non-negative, got {theta2}"
        )))
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

fn gaussian_overlaps(sigma: f64, theta2: f64) -> OverlapQuantities {
    let s2 = sigma * sigma;
    let u = theta2 * theta2 / (8.0 * s2);
    let delta = (-u).exp();
    OverlapQuantities {
        delta,
        one_minus_delta: -(-u).exp_m1(),
        gamma: -theta2 / (4.0 * s2) * delta,
        dk2: 1.0 / (4.0 * s2),
        b2: (1.0 / (4.0 * s2)) * (1.0 - theta2 * theta2 / (4.0 * s2)) * delta,
    }
}

/// `sin(πu)/(πu)`, `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        sin_cos_pi(u).0 / (PI * u)
    }
}

/// `(sin πu, cos πu)` with the period removed exactly first, so values near
/// the zeros keep full relative accuracy far from the origin.
fn sin_cos_pi(u: f64) -> (f64, f64) {
    // exact: |u - 2n| <= 1 and both share the exponent range of u
    let r = u - 2.0 * (0.5 * u).round();
    let pr = PI * r;
    (pr.sin(), pr.cos())
}

fn sinc_prime(u: f64) -> f64 {
    let pu = PI * u;
    if pu.abs() < 0.16 {
        let z = pu * pu;
        PI * pu * (-1.0 / 3.0 + z * (1.0 / 30.0 + z * (-1.0 / 840.0 + z * (1.0 / 45360.0 - z / 3991680.0))))
    } else {
        let (s, c) = sin_cos_pi(u);
        (c - s / pu) / u
    }
}

/// A sampled amplitude profile interpolated by a natural cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPsf {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Spline second derivatives at the knots.
    m: Vec<f64>,
    rms_width: f64,
}

impl TabulatedPsf {
    /// Build from samples, renormalizing so that `∫ψ² = 1`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput("x and ψ columns differ in length".into()));
        }
        if xs.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "tabulated PSF needs at least 4 samples, got {}",
                xs.len()
            )));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tabulated PSF contains non-finite values".into()));
        }
        if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "tabulated grid is not strictly increasing at sample {}",
                i + 2
            )));
        }
        let m = natural_spline(&xs, &ys);
        let mut table = Self {
            xs,
            ys,
            m,
            rms_width: 1.0,
        };
        let (a, b) = (table.xs[0], table.xs[table.xs.len() - 1]);
        let knots = table.xs.clone();
        let opts = QuadOptions::new(0.0, 1e-12);
        let norm = integrate_adaptive(&|x| table.value(x).powi(2), &knots, opts)?.value;
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("tabulated PSF has zero norm".into()));
        }
        let scale = norm.sqrt().recip();
        table.ys.iter_mut().for_each(|y| *y *= scale);
        table.m.iter_mut().for_each(|y| *y *= scale);
        let mean = integrate_adaptive(&|x| x * table.value(x).powi(2), &knots, opts)?.value;
        let var = integrate_adaptive(&|x| (x - mean).powi(2) * table.value(x).powi(2), &knots, opts)?.value;
        table.rms_width = if var > 0.0 { var.sqrt() } else { b - a };
        Ok(table)
    }

    /// Parse two whitespace-separated columns `x ψ(x)`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected exactly two columns".into(),
                });
            };
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("bad number `{s}`: {e}"),
                })
            };
            let (x, y) = (parse(a)?, parse(b)?);
            if let Some(&last) = xs.last() {
                if !(x > last) {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("x = {x} does not increase past {last}"),
                    });
                }
            }
            xs.push(x);
            ys.push(y);
        }
        Self::new(xs, ys)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn rms_width(&self) -> f64 {
        self.rms_width
    }

    fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if !(x >= self.xs[0] && x <= self.xs[n - 1]) {
            return 0.0;
        }
        let (i, h, a, b) = self.locate(x);
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Derivative of the interpolating spline; zero outside the table.
    fn slope(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if !(x > self.xs[0] && x < self.xs[n - 1]) {
            return 0.0;
        }
        let (i, h, a, b) = self.locate(x);
        (self.ys[i + 1] - self.ys[i]) / h + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }

    fn locate(&self, x: f64) -> (usize, f64, f64, f64) {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        (i, h, (self.xs[i + 1] - x) / h, (x - self.xs[i]) / h)
    }
}

fn natural_spline(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    // Thomas algorithm on the interior equations.
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
        c[i] = h1 / diag;
        d[i] = (rhs - h0 * d[i - 1]) / diag;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gauss() -> PointSpreadFunction {
        PointSpreadFunction::gaussian(1.0).unwrap()
    }

    fn sinc1() -> PointSpreadFunction {
        PointSpreadFunction::sinc(1.0).unwrap()
    }

    #[test]
    fn sinc_is_accurate_near_distant_zeros() {
        let u = 4096.0 + 1e-9;
        // sin(π(4096 + δ)) = sin(πδ)
        let expected = (PI * (u - 4096.0)).sin() / (PI * u);
        assert!((sinc(u) / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evaluate_examples() {
        assert_relative_eq!(gauss().evaluate(0.0), 0.631_618_777_746_065_4, max_relative = 1e-12);
        assert_eq!(sinc1().evaluate(0.0), 1.0);
        assert!(sinc1().evaluate(1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(gauss().derivative(0.0), 0.0);
        assert_eq!(sinc1().derivative(0.0), 0.0);
        let g = gauss();
        assert_relative_eq!(g.derivative(1.0), -0.5 * g.evaluate(1.0), max_relative = 1e-14);
        let h = 1e-5;
        let fd = (g.evaluate(1.0 + h) - g.evaluate(1.0 - h)) / (2.0 * h);
        assert_relative_eq!(g.derivative(1.0), fd, max_relative = 1e-6);
    }

    #[test]
    fn sinc_derivative_series_matches_closed_form_at_switch() {
        for &u in &[0.049, 0.0509, 0.051, -0.0505] {
            let pu = PI * u;
            let direct = (pu.cos() - pu.sin() / pu) / u;
            assert_relative_eq!(sinc_prime(u), direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn gaussian_overlap_examples() {
        let o = gauss().overlaps(0.0).unwrap();
        assert_eq!(o.delta, 1.0);
        assert_eq!(o.gamma, 0.0);
        assert_eq!(o.dk2, 0.25);
        let o = gauss().overlaps(2.0).unwrap();
        assert_relative_eq!(o.delta, (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn gaussian_closed_forms_match_quadrature() {
        let g = gauss();
        for &t in &[0.0, 0.01, 0.3, 1.0, 2.0, 4.0, 6.0] {
            let c = g.overlaps(t).unwrap();
            let q = g.overlaps_by_quadrature(t).unwrap();
            assert_relative_eq!(c.delta, q.delta, max_relative = 1e-10);
            assert_relative_eq!(c.dk2, q.dk2, max_relative = 1e-10);
            assert_relative_eq!(c.b2, q.b2, max_relative = 1e-9, epsilon = 1e-14);
            assert_relative_eq!(c.gamma, q.gamma, max_relative = 1e-10, epsilon = 1e-14);
            if t > 0.0 {
                assert_relative_eq!(c.one_minus_delta, q.one_minus_delta, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn sinc_overlaps_match_fourier_closed_forms() {
        // Band-limited: autocorrelation C(t) = sinc(t/W); γ = C'(θ₂), b² = -C''(θ₂).
        let s = sinc1();
        for &t in &[0.05, 0.5, 1.0, 1.7, 3.0] {
            let q = s.overlaps_by_quadrature(t).unwrap();
            let pt = PI * t;
            let c1 = (pt * pt.cos() - pt.sin()) / (PI * t * t);
            let c2 = ((2.0 - pt * pt) * pt.sin() - 2.0 * pt * pt.cos()) / (PI * t * t * t);
            assert!((q.delta - sinc(t)).abs() < 1e-9, "δ({t}) = {}", q.delta);
            assert!((q.gamma - c1).abs() < 1e-8, "γ({t}) {} vs {c1}", q.gamma);
            assert!((q.b2 + c2).abs() < 1e-8, "b²({t}) {} vs {}", q.b2, -c2);
            assert!((q.dk2 - PI * PI / 3.0).abs() < 1e-8 * PI * PI / 3.0, "{}", q.dk2);
        }
    }

    #[test]
    fn sinc_normalization_over_whole_line() {
        let s = sinc1();
        let n = s.integrate_over(&[0.0], |x| s.evaluate(x).powi(2)).unwrap();
        assert!((n - 1.0).abs() < 1e-10, "{n}");
    }

    #[test]
    fn transfer_overlap_examples() {
        assert_eq!(gauss().transfer_overlap(0.0).unwrap(), 1.0);
        assert_relative_eq!(gauss().transfer_overlap(2.0).unwrap(), (-0.25f64).exp(), max_relative = 1e-12);
        for psf in [gauss(), sinc1()] {
            let t = 1e-3 * psf.width();
            let y = psf.transfer_overlap(t).unwrap();
            let dk2 = psf.dk2().unwrap();
            let expect = dk2 * t * t / 4.0;
            assert!(((1.0 - y) - expect).abs() < 0.01 * expect, "{} vs {}", 1.0 - y, expect);
        }
        let s = sinc1();
        assert!((s.transfer_overlap(1.0).unwrap() - sinc(0.5).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn gaussian_decay_is_monotone() {
        let g = gauss();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for &t in &[4.0, 8.0, 16.0] {
            let o = g.overlaps(t).unwrap();
            assert!(o.delta.abs() < last.0 && o.gamma.abs() < last.1);
            last = (o.delta.abs(), o.gamma.abs());
        }
    }

    #[test]
    fn negative_separation_rejected() {
        assert!(gauss().overlaps(-1.0).is_err());
    }

    #[test]
    fn tabulated_gaussian_reproduces_analytic_overlaps() {
        let g = gauss();
        let xs: Vec<f64> = (0..=1200).map(|i| -12.0 + i as f64 * 0.02).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * g.evaluate(x)).collect();
        let t = PointSpreadFunction::tabulated(TabulatedPsf::new(xs, ys).unwrap());
        assert_relative_eq!(t.width(), 1.0, max_relative = 1e-6);
        let q = t.overlaps(1.0).unwrap();
        let c = g.overlaps(1.0).unwrap();
        assert_relative_eq!(q.delta, c.delta, max_relative = 1e-7);
        assert_relative_eq!(q.dk2, c.dk2, max_relative = 1e-5);
        assert_relative_eq!(q.gamma, c.gamma, max_relative = 1e-5);
    }

    #[test]
    fn tabulated_slope_is_the_spline_derivative() {
        let g = gauss();
        let xs: Vec<f64> = (0..=400).map(|i| -10.0 + i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| g.evaluate(x)).collect();
        let t = PointSpreadFunction::tabulated(TabulatedPsf::new(xs, ys).unwrap());
        for &x in &[-3.1, -0.97, 0.013, 0.5, 2.26] {
            let h = 1e-6;
            let fd = (t.evaluate(x + h) - t.evaluate(x - h)) / (2.0 * h);
            assert_relative_eq!(t.derivative(x), fd, max_relative = 1e-6);
            assert!((t.derivative(x) - g.derivative(x)).abs() < 1e-5);
        }
        assert_eq!(t.derivative(10.5), 0.0);
    }

    #[test]
    fn parse_rejects_non_monotone_grid() {
        let err = TabulatedPsf::parse("0 1\n1 2\n0.5 1\n2 0\n3 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert!(matches!(TabulatedPsf::parse("0 1 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(TabulatedPsf::parse("# c\n0 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(TabulatedPsf::parse("0 0\n1 0\n2 0\n3 0\n").is_err());
        assert!(TabulatedPsf::parse("0 1\n1 1\n").is_err());
    }

    #[test]
    fn parse_renormalizes() {
        let text = "# triangle-ish\n-2 0\n-1 1\n0 2\n1 1\n2 0\n";
        let t = TabulatedPsf::parse(text).unwrap();
        let psf = PointSpreadFunction::tabulated(t);
        let n = psf.integrate_over(&[0.0], |x| psf.evaluate(x).powi(2)).unwrap();
        assert_relative_eq!(n, 1.0, max_relative = 1e-9);
        assert_eq!(psf.evaluate(5.0), 0.0);
    }
}
