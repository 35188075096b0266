//! Independent numerical oracles for the information formulas.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use spade_bounds::fisher::{self, mode_parameter, MisalignmentConfig};
use spade_bounds::montecarlo::{
    mode_distribution, run_error_sweep, sample_categorical, sample_hg_sufficient, sample_multinomial, Scheme,
    SweepConfig,
};
use spade_bounds::qfi::{qfi_closed_form, qfi_from_sld, sld_decompose};
use spade_bounds::{OnePhotonModel, PointSpreadFunction, TabulatedPsf};

fn poisson_pmf(mean: f64, k_max: usize) -> Vec<f64> {
    let d = Poisson::new(mean).unwrap();
    (0..=k_max as u64).map(|k| d.pmf(k)).collect()
}

fn gauss(theta2: f64) -> OnePhotonModel {
    OnePhotonModel::centred(PointSpreadFunction::gaussian(1.0).unwrap(), theta2, 1.0).unwrap()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// QFI of the sampled two-source state: project the amplitudes and their
/// parameter derivatives onto an orthonormal basis of their span, then solve
/// for the SLD in the eigenbasis of the reduced density matrix.
fn discretized_qfi(psf: &PointSpreadFunction, theta2: f64, half_range: f64, n: usize) -> Matrix2<f64> {
    let (x1, x2) = (-0.5 * theta2, 0.5 * theta2);
    let dx = 2.0 * half_range / (n - 1) as f64;
    let w = dx.sqrt();
    let xs: Vec<f64> = (0..n).map(|i| -half_range + i as f64 * dx).collect();
    let col = |f: &dyn Fn(f64) -> f64| DVector::from_iterator(n, xs.iter().map(|&x| w * f(x)));
    let v1 = col(&|x| psf.evaluate(x - x1));
    let v2 = col(&|x| psf.evaluate(x - x2));
    let d1 = col(&|x| psf.derivative(x - x1));
    let d2 = col(&|x| psf.derivative(x - x2));
    // ∂/∂θ₁: −ψ′ for both; ∂/∂θ₂: +ψ′(x−X₁)/2 and −ψ′(x−X₂)/2
    let dv = [[-&d1, -&d2], [&d1 * 0.5, &d2 * -0.5]];
    let basis = DMatrix::from_columns(&[v1.clone(), v2.clone(), d1.clone(), d2.clone()]).qr().q();
    let proj = |v: &DVector<f64>| basis.transpose() * v;
    let (a1, a2) = (proj(&v1), proj(&v2));
    let rho = (&a1 * a1.transpose() + &a2 * a2.transpose()) * 0.5;
    let drho: Vec<DMatrix<f64>> = dv
        .iter()
        .map(|[b1, b2]| {
            let (b1, b2) = (proj(b1), proj(b2));
            (&b1 * a1.transpose() + &a1 * b1.transpose() + &b2 * a2.transpose() + &a2 * b2.transpose()) * 0.5
        })
        .collect();
    let rho4 = Matrix4::from_iterator(rho.iter().copied());
    let eig = SymmetricEigen::new(rho4);
    let u = DMatrix::from_iterator(4, 4, eig.eigenvectors.iter().copied());
    let rot: Vec<DMatrix<f64>> = drho.iter().map(|d| u.transpose() * d * &u).collect();
    let mut k = Matrix2::zeros();
    for mu in 0..2 {
        for nu in 0..2 {
            let mut s = 0.0;
            for j in 0..4 {
                for l in 0..4 {
                    let lam = eig.eigenvalues[j] + eig.eigenvalues[l];
                    if lam > 1e-12 {
                        s += 2.0 * rot[mu][(j, l)] * rot[nu][(l, j)] / lam;
                    }
                }
            }
            k[(mu, nu)] = s;
        }
    }
    k
}

#[test]
fn closed_form_qfi_matches_discretized_state() {
    let psf = PointSpreadFunction::gaussian(1.0).unwrap();
    for t in [0.05, 0.3, 1.0, 2.0, 4.0] {
        let k = discretized_qfi(&psf, t, 14.0, 4001);
        let c = qfi_closed_form(&gauss(t)).unwrap();
        assert_relative_eq!(k[(0, 0)], c.j11, max_relative = 1e-6);
        assert_relative_eq!(k[(1, 1)], c.j22, max_relative = 1e-6);
        assert!(k[(0, 1)].abs() < 1e-8);
    }
}

#[test]
fn tabulated_qfi_matches_discretized_state() {
    // An asymmetric profile exercises gamma and b2 away from the Gaussian.
    let xs: Vec<f64> = (0..=1600).map(|i| -8.0 + 0.01 * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (-(x * x) / 4.0).exp() * (1.0 + 0.3 * x / (1.0 + x * x))).collect();
    let psf = PointSpreadFunction::tabulated(TabulatedPsf::new(xs, ys).unwrap());
    for t in [0.4, 1.5] {
        let m = OnePhotonModel::centred(psf.clone(), t, 1.0).unwrap();
        let c = qfi_closed_form(&m).unwrap();
        let k = discretized_qfi(&psf, t, 7.9, 6001);
        assert_relative_eq!(k[(0, 0)], c.j11, max_relative = 1e-4);
        assert_relative_eq!(k[(1, 1)], c.j22, max_relative = 1e-4);
    }
}

#[test]
fn sld_route_matches_closed_form_on_log_grid() {
    for psf in [PointSpreadFunction::gaussian(1.0).unwrap(), PointSpreadFunction::sinc(1.0).unwrap()] {
        for t in log_grid(1e-2, 10.0, 50) {
            let m = OnePhotonModel::centred(psf.clone(), t, 1.0).unwrap();
            let c = qfi_closed_form(&m).unwrap();
            let s = qfi_from_sld(&sld_decompose(&m).unwrap(), &m);
            assert_relative_eq!(s.j11, c.j11, max_relative = 1e-8);
            assert_relative_eq!(s.j22, c.j22, max_relative = 1e-8);
            assert!(s.j12.abs() <= 1e-8 * c.j22, "theta2 = {t}: K12 = {}", s.j12);
        }
    }
}

#[test]
fn classical_information_never_exceeds_quantum() {
    for t in (0..=60).map(|i| 0.1 * i as f64) {
        let m = gauss(t);
        let k = qfi_closed_form(&m).unwrap();
        let j = fisher::direct_imaging_fisher(&m).unwrap();
        let diff = nalgebra::Matrix2::new(k.j11 - j.j11, k.j12 - j.j12, k.j12 - j.j12, k.j22 - j.j22);
        let min = diff.symmetric_eigenvalues().min();
        assert!(min >= -1e-8 * 0.25, "theta2 = {t}: {min}");
        for other in [
            fisher::binary_spade_fisher_gaussian(&m).unwrap(),
            fisher::hg_spade_fisher_auto(&m).unwrap(),
        ] {
            assert!(other.j22 <= k.j22 * (1.0 + 1e-8));
        }
    }
}

#[test]
fn direct_separation_information_rises_on_first_two_widths() {
    let vals: Vec<f64> = (0..50)
        .map(|i| fisher::direct_imaging_fisher(&gauss(2.0 * i as f64 / 49.0)).unwrap().j22)
        .collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
}

/// `Σ_k (P_k(θ+h) − P_k(θ−h))² / (4h² P_k(θ))` over a discrete model.
fn fd_information(p: impl Fn(f64) -> Vec<f64>, theta2: f64, h: f64) -> f64 {
    let (lo, mid, hi) = (p(theta2 - h), p(theta2), p(theta2 + h));
    mid.iter()
        .zip(lo.iter().zip(&hi))
        .filter(|(m, _)| **m > 1e-300)
        .map(|(m, (l, u))| (u - l).powi(2) / (4.0 * h * h * m))
        .sum()
}

#[test]
fn spade_informations_match_finite_differences() {
    let h = 1e-5;
    for t in [0.3, 1.0, 2.5, 5.0] {
        let m = gauss(t);
        let poisson = |t: f64| poisson_pmf(mode_parameter(t, 1.0), 80);
        assert_relative_eq!(
            fd_information(poisson, t, h),
            fisher::hg_spade_fisher_auto(&m).unwrap().j22,
            max_relative = 1e-4
        );
        for xi in [0.0, 0.2, 0.5] {
            let mis = MisalignmentConfig::new(xi).unwrap();
            let modes = |t: f64| {
                let mut p = mode_distribution(t, 1.0, mis);
                p.resize(80, 0.0);
                p
            };
            assert_relative_eq!(
                fd_information(modes, t, h),
                fisher::misaligned_hg_fisher(&m, mis).unwrap().j22,
                max_relative = 1e-4
            );
            let binary = |t: f64| {
                let p = mode_distribution(t, 1.0, mis);
                vec![p[0], 1.0 - p[0]]
            };
            assert_relative_eq!(
                fd_information(binary, t, h),
                fisher::misaligned_binary_fisher(&m, mis).unwrap().j22,
                max_relative = 1e-4
            );
        }
    }
}

#[test]
fn direct_information_matches_finite_differences() {
    // Differences of the intensity itself, no analytic derivatives.
    let psf = PointSpreadFunction::gaussian(1.0).unwrap();
    let h = 1e-4;
    for t in [0.5, 2.0, 4.0] {
        let lambda = |x: f64, c: f64, s: f64| 0.5 * (psf.evaluate(x - c + 0.5 * s).powi(2) + psf.evaluate(x - c - 0.5 * s).powi(2));
        let fd = |dc: f64, ds: f64| {
            psf.integrate_over(&[-0.5 * t, 0.5 * t], |x| {
                let l = lambda(x, 0.0, t);
                if l < 1e-300 {
                    return 0.0;
                }
                let d = (lambda(x, dc, t + ds) - lambda(x, -dc, t - ds)) / (2.0 * h);
                d * d / l
            })
            .unwrap()
        };
        let j = fisher::direct_imaging_fisher(&gauss(t)).unwrap();
        assert_relative_eq!(fd(h, 0.0), j.j11, max_relative = 1e-4);
        assert_relative_eq!(fd(0.0, h), j.j22, max_relative = 1e-4);
    }
}

/// Chi-square p-value of `counts` against Poisson(`mean`), pooling bins
/// with expectation below 5.
fn poisson_chi_square(counts: &[u64], mean: f64) -> f64 {
    let total: u64 = counts.iter().sum();
    let pmf = poisson_pmf(mean, counts.len() - 1);
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut obs, mut exp) = (0.0, 0.0);
    let mut tail_exp = total as f64;
    for (k, &c) in counts.iter().enumerate() {
        obs += c as f64;
        exp += pmf[k] * total as f64;
        tail_exp -= pmf[k] * total as f64;
        if exp >= 5.0 && tail_exp >= 5.0 {
            stat += (obs - exp).powi(2) / exp;
            bins += 1;
            obs = 0.0;
            exp = 0.0;
        }
    }
    let (obs, exp) = (obs, exp + tail_exp);
    stat += (obs - exp).powi(2) / exp;
    bins += 1;
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn per_photon_sampling_reproduces_the_sufficient_statistic() {
    let (l, t) = (10u64, 2.0);
    let q = mode_parameter(t, 1.0);
    let probs = mode_distribution(t, 1.0, MisalignmentConfig::aligned());
    let mut rng = ChaCha8Rng::seed_from_u64(2016);
    let trials = 20_000;
    let histogram = |draw: &mut dyn FnMut() -> u64| {
        let mut h = vec![0u64; 40];
        for _ in 0..trials {
            h[(draw() as usize).min(39)] += 1;
        }
        h
    };
    let cat = histogram(&mut || sample_categorical(l, &probs, &mut rng).unwrap().mode_sum().unwrap());
    let multi = histogram(&mut || sample_multinomial(l, &probs, &mut rng).unwrap().mode_sum().unwrap());
    let direct = histogram(&mut || sample_hg_sufficient(l, q, &mut rng));
    for h in [&cat, &multi, &direct] {
        let p = poisson_chi_square(h, l as f64 * q);
        assert!(p > 1e-3, "p-value {p}");
    }
}

#[test]
fn hg_estimator_approaches_the_bound() {
    let mse = |l: u64| run_error_sweep(&SweepConfig::new(Scheme::HgSpade, l, vec![1.0], 20_000, 77)).unwrap().mse[0];
    let (m100, m1000, m10000) = (mse(100), mse(1000), mse(10_000));
    assert!(m100 > m1000 && m1000 > m10000);
    let normalized = m10000 * 10_000.0 / 4.0;
    assert!((normalized - 1.0).abs() < 0.1, "{normalized}");
}

#[test]
fn misaligned_binary_beats_direct_imaging_at_small_separation() {
    let grid = vec![0.1, 0.2, 0.3];
    let mut cfg = SweepConfig::new(Scheme::MisalignedBinary, 100, grid.clone(), 20_000, 5);
    cfg.xi = 0.1;
    let r = run_error_sweep(&cfg).unwrap();
    for (t, mse) in grid.iter().zip(&r.mse) {
        let m = OnePhotonModel::centred(PointSpreadFunction::gaussian(1.0).unwrap(), *t, 100.0).unwrap();
        let direct_crb = 1.0 / fisher::direct_imaging_fisher(&m).unwrap().j22;
        assert!(*mse < 0.2 * direct_crb, "theta2 = {t}: {mse} vs {direct_crb}");
    }
}
