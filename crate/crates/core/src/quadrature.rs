//! Adaptive Gauss-Kronrod integration.
//!
//! Two entry points cover every integral in the crate:
//!
//! * [`integrate_adaptive`]: globally adaptive G7/K15 bisection over a finite
//!   interval, optionally seeded with breakpoints (kinks, zeros, peaks).
//! * [`integrate_periodic_tails`]: whole-line integrals of slowly decaying
//!   integrands that are asymptotically `periodic(x) * x^-k`, e.g. products of
//!   sinc functions. The line is cut into period-aligned cells, partial sums
//!   over nested symmetric windows `|x| < N P` are formed for `N = N0, 2 N0,
//!   ...`, and the truncation remainder (a power series in `1/N`) is removed
//!   by Richardson extrapolation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default subdivision budget.
pub const MAX_PANELS: usize = 1_000_000;

// G7/K15 abscissae and weights (QUADPACK qk15), outermost node first.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and budget for an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            max_panels: MAX_PANELS,
        }
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self::new(1e-12, 1e-12)
    }
}

/// An integral value together with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    l1: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Single G7/K15 panel. Returns `(kronrod, error, ∫|f|)` with the QUADPACK
/// error rescaling, so smooth integrands report near-roundoff error once
/// resolved.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_k = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g * half).abs()).max(0.0);
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !res_k.is_finite() {
        err = f64::INFINITY;
    }
    (res_k, err, res_abs)
}

/// Compensated (Neumaier) sum.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidInput(format!(
            "integration bounds must satisfy a < b (got {a}, {b})"
        )));
    }
    integrate_adaptive(&f, &[a, b], QuadOptions::new(tol, 0.0)).map(|r| r.value)
}

/// Globally adaptive integration over `[points[0], points[last]]`, with the
/// interior points used as initial panel boundaries. Points must be sorted;
/// duplicates are ignored.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    points: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two integration points".into(),
        ));
    }
    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Panel> = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(Error::InvalidInput(format!(
                "integration points must be finite and sorted (got {a}, {b})"
            )));
        }
        if b == a {
            continue;
        }
        let (value, error, l1) = gk15(f, a, b);
        heap.push(Panel {
            a,
            b,
            value,
            error,
            l1,
        });
    }
    let mut total = heap.iter().map(|p| p.value).sum::<f64>();
    let mut total_err = heap.iter().map(|p| p.error).sum::<f64>();
    let mut total_l1 = heap.iter().map(|p| p.l1).sum::<f64>();
    let mut panels = heap.len();
    // Cancelling integrands (e.g. odd ones) can never beat the roundoff
    // floor relative to ∫|f|.
    let floor = |l1: f64| 100.0 * f64::EPSILON * l1;

    loop {
        if total_err <= opts.target(total).max(floor(total_l1)) {
            // Confirm with exact sums: running updates can drift past the
            // threshold when the integral cancels.
            total = neumaier_sum(heap.iter().chain(settled.iter()).map(|p| p.value));
            total_err = heap.iter().chain(settled.iter()).map(|p| p.error).sum();
            total_l1 = heap.iter().chain(settled.iter()).map(|p| p.l1).sum();
            if total_err <= opts.target(total).max(floor(total_l1)) {
                break;
            }
        }
        if panels >= opts.max_panels {
            return Err(Error::NonConvergence {
                panels,
                error: total_err,
                tolerance: opts.target(total),
            });
        }
        let Some(worst) = heap.pop() else {
            // Every panel is at the roundoff floor.
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            settled.push(worst);
            continue;
        }
        let (v1, e1, l1) = gk15(f, worst.a, mid);
        let (v2, e2, l2) = gk15(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        total_l1 += l1 + l2 - worst.l1;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            l1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            l1: l2,
        });
        panels += 1;
        // Refresh the running sums now and then so cancellation drift
        // cannot stall the termination test.
        if panels % 256 == 0 {
            total = neumaier_sum(heap.iter().chain(settled.iter()).map(|p| p.value));
            total_err = heap.iter().chain(settled.iter()).map(|p| p.error).sum();
            total_l1 = heap.iter().chain(settled.iter()).map(|p| p.l1).sum();
        }
    }

    let all = || heap.iter().chain(settled.iter());
    let value = neumaier_sum(all().map(|p| p.value));
    let abs_error = all().map(|p| p.error).sum::<f64>();
    let l1 = all().map(|p| p.l1).sum::<f64>();
    if !value.is_finite() {
        return Err(Error::NonConvergence {
            panels,
            error: f64::INFINITY,
            tolerance: opts.target(0.0),
        });
    }
    if abs_error > opts.target(value).max(floor(l1)) && !heap.is_empty() {
        return Err(Error::NonConvergence {
            panels,
            error: abs_error,
            tolerance: opts.target(value),
        });
    }
    Ok(QuadResult {
        value,
        abs_error,
        panels,
    })
}

/// Cell layout for [`integrate_periodic_tails`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicTails {
    /// Asymptotic period of the integrand's oscillation.
    pub period: f64,
    /// Cell boundaries sit at `origin + k * period`.
    pub origin: f64,
    /// Half-width of the innermost window, in cells.
    pub base_cells: usize,
    /// Number of nested windows (each twice the previous).
    pub levels: usize,
}

impl PeriodicTails {
    /// Outermost truncation radius.
    pub fn outer_radius(&self) -> f64 {
        self.period * (self.base_cells << (self.levels - 1)) as f64
    }
}

/// Whole-line integral of `f`, see the module docs. `breaks(a, b)` returns the
/// sorted interior breakpoints to seed inside cell `[a, b]`.
pub fn integrate_periodic_tails<F, B>(
    f: &F,
    breaks: B,
    layout: PeriodicTails,
    opts: QuadOptions,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
    B: Fn(f64, f64) -> Vec<f64>,
{
    if layout.levels < 2 || layout.base_cells == 0 || !(layout.period > 0.0) {
        return Err(Error::InvalidInput(
            "periodic tail layout needs period > 0, base_cells > 0 and levels >= 2".into(),
        ));
    }
    let n_max = (layout.base_cells << (layout.levels - 1)) as i64;
    let cell_opts = QuadOptions {
        abs_tol: opts.abs_tol / (4.0 * n_max as f64),
        rel_tol: opts.rel_tol.min(1e-13),
        max_panels: opts.max_panels,
    };
    // Cell k covers [origin + k P, origin + (k + 1) P], k in [-n_max, n_max).
    let mut cells = vec![0.0; 2 * n_max as usize];
    let mut quad_err = 0.0;
    let mut panels = 0;
    let cell = |k: i64, cell_opts: QuadOptions| -> Result<QuadResult> {
        let a = layout.origin + k as f64 * layout.period;
        let b = a + layout.period;
        let mut pts = vec![a];
        pts.extend(breaks(a, b).into_iter().filter(|&x| x > a && x < b));
        pts.push(b);
        integrate_adaptive(f, &pts, cell_opts)
    };
    let mut run = |k: i64, cell_opts: QuadOptions, cells: &mut [f64]| -> Result<()> {
        let r = cell(k, cell_opts)?;
        cells[(k + n_max) as usize] = r.value;
        quad_err += r.abs_error;
        panels += r.panels;
        Ok(())
    };
    let base = layout.base_cells as i64;
    for k in -base..base {
        run(k, cell_opts, &mut cells)?;
    }
    // Far cells only need to be accurate relative to the whole integral,
    // which the base window already sizes.
    let scale: f64 = cells[(n_max - base) as usize..(n_max + base) as usize]
        .iter()
        .map(|c| c.abs())
        .sum();
    let far_opts = QuadOptions {
        abs_tol: cell_opts.abs_tol.max(cell_opts.rel_tol * scale / (4.0 * n_max as f64)),
        ..cell_opts
    };
    for k in (-n_max..-base).chain(base..n_max) {
        run(k, far_opts, &mut cells)?;
    }

    // Partial sums over nested windows, accumulated outward so each level
    // reuses the previous one.
    let mut partial = Vec::with_capacity(layout.levels);
    let mut inner = 0i64;
    let mut acc = Vec::new();
    for level in 0..layout.levels {
        let n = (layout.base_cells << level) as i64;
        for k in inner..n {
            acc.push(cells[(k + n_max) as usize]);
            acc.push(cells[(-k - 1 + n_max) as usize]);
        }
        inner = n;
        partial.push(neumaier_sum(acc.iter().copied()));
    }

    // Neville table in h = 1/N with ratio 2.
    let mut table = partial.clone();
    let mut prev_diag = table[0];
    let mut extrap_err = f64::INFINITY;
    for k in 1..layout.levels {
        let factor = (1u64 << k) as f64 - 1.0;
        for i in (k..layout.levels).rev() {
            table[i] = table[i] + (table[i] - table[i - 1]) / factor;
        }
        extrap_err = (table[layout.levels - 1] - prev_diag).abs();
        prev_diag = table[layout.levels - 1];
    }
    let value = table[layout.levels - 1];
    let abs_error = extrap_err + quad_err;
    if !value.is_finite() {
        return Err(Error::NonConvergence {
            panels,
            error: f64::INFINITY,
            tolerance: opts.target(0.0),
        });
    }
    Ok(QuadResult {
        value,
        abs_error,
        panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_rule_is_exact_for_degree_22_polynomials() {
        // K15 integrates polynomials of degree 3n+1 = 22 exactly on one panel.
        for deg in 0..=22 {
            let (v, _, _) = gk15(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert_relative_eq!(v, 1.0 / (deg as f64 + 1.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn gaussian_normalization() {
        let sigma = 1.0f64;
        let psi2 = |x: f64| (-x * x / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate(psi2, -8.0, 8.0, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn odd_integrand_vanishes() {
        let f = |x: f64| x * (-x * x / 2.0).exp();
        let v = integrate(f, -9.0, 9.0, 1e-12).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // ∫_0^1 ln(x) dx = -1
        let v = integrate(|x: f64| x.ln(), 0.0, 1.0, 1e-9).unwrap();
        assert!((v + 1.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let err = integrate_adaptive(
            &|x: f64| (1.0 / x).sin() / x,
            &[1e-8, 1.0],
            QuadOptions::new(1e-14, 0.0).with_max_panels(50),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn rejects_reversed_bounds() {
        assert!(integrate(|x| x, 1.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn periodic_tails_recover_sinc_squared_norm() {
        let sinc = |u: f64| {
            if u == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * u).sin() / (std::f64::consts::PI * u)
            }
        };
        let layout = PeriodicTails {
            period: 1.0,
            origin: 0.0,
            base_cells: 32,
            levels: 6,
        };
        let r = integrate_periodic_tails(
            &|x: f64| sinc(x).powi(2),
            |_, _| Vec::new(),
            layout,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
        // ∫ sin(x)/x over the line, period 2π, decays like 1/x.
        let layout = PeriodicTails {
            period: 2.0 * std::f64::consts::PI,
            origin: -std::f64::consts::PI,
            base_cells: 16,
            levels: 7,
        };
        let r = integrate_periodic_tails(
            &|x: f64| if x == 0.0 { 1.0 } else { x.sin() / x },
            |_, _| Vec::new(),
            layout,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-9, "{}", r.value);
    }
}
