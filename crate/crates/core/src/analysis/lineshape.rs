//! Fano-modified Voigt and Lorentzian lineshapes with a weighted
//! Levenberg-Marquardt fitter.
//!
//! The Fano asymmetry is carried as p = 1/q so the symmetric Voigt is the
//! regular point p = 0.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::faddeeva::{faddeeva, faddeeva_derivative};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Fano-Voigt parameters and fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Line centre s (rad/s).
    pub shift: f64,
    /// Area A (absorption × rad/s).
    pub amplitude: f64,
    /// Fano asymmetry 1/q; 0 is the symmetric Voigt.
    pub inv_q: f64,
    /// Gaussian FWHM ω_D (rad/s), held fixed.
    pub omega_d: f64,
    /// Lorentzian FWHM γ_L (rad/s).
    pub gamma_l: f64,
    /// Covariance over (s, A, 1/q, γ_L); rows of fixed parameters are zero.
    pub covariance: [[f64; 4]; 4],
    /// √(Σ weighted residual²).
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn q(&self) -> f64 {
        1.0 / self.inv_q
    }

    pub fn shift_err(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }

    pub fn gamma_l_err(&self) -> f64 {
        self.covariance[3][3].max(0.0).sqrt()
    }

    pub fn params(&self) -> FanoVoigt {
        FanoVoigt {
            shift: self.shift,
            amplitude: self.amplitude,
            inv_q: self.inv_q,
            omega_d: self.omega_d,
            gamma_l: self.gamma_l,
        }
    }
}

/// Lineshape parameters without fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoVoigt {
    pub shift: f64,
    pub amplitude: f64,
    pub inv_q: f64,
    pub omega_d: f64,
    pub gamma_l: f64,
}

impl FanoVoigt {
    /// Parameters from the asymmetry q itself.
    pub fn with_q(shift: f64, amplitude: f64, q: f64, omega_d: f64, gamma_l: f64) -> Result<Self> {
        if (q * q - 1.0).abs() < f64::EPSILON {
            return Err(Error::Singular("Fano asymmetry q² = 1".into()));
        }
        Ok(Self {
            shift,
            amplitude,
            inv_q: if q.is_infinite() { 0.0 } else { 1.0 / q },
            omega_d,
            gamma_l,
        })
    }

    pub fn eval(&self, delta: f64) -> Result<f64> {
        if (self.inv_q * self.inv_q - 1.0).abs() < f64::EPSILON {
            return Err(Error::Singular("Fano asymmetry q² = 1".into()));
        }
        if !(self.omega_d > 0.0) {
            return Err(Error::domain("Gaussian width must be > 0"));
        }
        Ok(fv_eval(
            &[self.shift, self.amplitude, self.inv_q, self.gamma_l],
            self.omega_d,
            delta,
            None,
        ))
    }
}

/// Fano-Voigt profile at one detuning.
pub fn fano_voigt(delta: f64, params: &FanoVoigt) -> Result<f64> {
    params.eval(delta)
}

/// 2√ln2·A/(ω_D√π)·[Re w − 2p/(1 − p²)·Im w], optionally with the gradient
/// over (s, A, p, γ_L).
fn fv_eval(p: &[f64], omega_d: f64, delta: f64, grad: Option<&mut [f64]>) -> f64 {
    let [s, a, inv_q, gamma] = [p[0], p[1], p[2], p[3]];
    let ax = 2.0 * LN_2.sqrt() / omega_d;
    let by = LN_2.sqrt() / omega_d;
    let norm = ax / PI.sqrt();
    let z = Complex64::new(ax * (delta - s), by * gamma);
    let w = faddeeva(z);
    let den = 1.0 - inv_q * inv_q;
    let c = 2.0 * inv_q / den;
    let shape = w.re - c * w.im;
    if let Some(g) = grad {
        let dw = faddeeva_derivative(z, w);
        let ds = dw * (-ax);
        let dg = dw * Complex64::new(0.0, by);
        g[0] = norm * a * (ds.re - c * ds.im);
        g[1] = norm * shape;
        g[2] = -norm * a * w.im * 2.0 * (1.0 + inv_q * inv_q) / (den * den);
        g[3] = norm * a * (dg.re - c * dg.im);
    }
    norm * a * shape
}

/// Area-normalized Lorentzian A·(γ/2π)/((Δ − s)² + γ²/4).
pub fn lorentzian(delta: f64, shift: f64, amplitude: f64, fwhm: f64) -> f64 {
    lz_eval(&[shift, amplitude, fwhm], delta, None)
}

fn lz_eval(p: &[f64], x: f64, grad: Option<&mut [f64]>) -> f64 {
    let [s, a, g] = [p[0], p[1], p[2]];
    let u = x - s;
    let d = u * u + 0.25 * g * g;
    if let Some(j) = grad {
        j[0] = a * g / PI * u / (d * d);
        j[1] = g / (2.0 * PI * d);
        j[2] = a / (2.0 * PI) * (d - 0.5 * g * g) / (d * d);
    }
    a * g / (2.0 * PI * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit the Fano asymmetry; otherwise 1/q is held at its initial value.
    pub fit_asymmetry: bool,
    pub max_iter: usize,
    /// Relative parameter change that counts as converged.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fit_asymmetry: true,
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

/// Starting point for a Fano-Voigt fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitInit {
    pub shift: f64,
    pub amplitude: f64,
    pub inv_q: f64,
    pub gamma_l: f64,
}

impl FitInit {
    /// Peak position, trapezoidal area and a Lorentzian width that matches the
    /// observed FWHM through the usual Voigt width approximation.
    pub fn estimate(x: &[f64], y: &[f64], omega_d: f64) -> Self {
        let (imax, ymax) = y
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let area: f64 = x
            .windows(2)
            .zip(y.windows(2))
            .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
            .sum();
        let half = 0.5 * ymax;
        let lo = (0..imax).rev().find(|&i| y[i] < half).map_or(x[0], |i| x[i]);
        let hi = (imax..y.len()).find(|&i| y[i] < half).map_or(x[x.len() - 1], |i| x[i]);
        let fwhm = (hi - lo).max(1e-12 * omega_d);
        let voigt_fwhm = |g: f64| 0.5346 * g + (0.2166 * g * g + omega_d * omega_d).sqrt();
        let gamma_l = if fwhm <= voigt_fwhm(0.05 * omega_d) {
            0.05 * omega_d
        } else {
            let (mut a, mut b) = (0.0, fwhm);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if voigt_fwhm(m) > fwhm {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        };
        Self {
            shift: x[imax],
            amplitude: area,
            inv_q: 0.0,
            gamma_l,
        }
    }
}

struct Outcome {
    params: Vec<f64>,
    covariance: DMatrix<f64>,
    residual_norm: f64,
    iterations: usize,
    converged: bool,
}

/// Weighted Levenberg-Marquardt over the `free` parameters of `model`.
/// `scale` sets the natural size of each parameter; `project` enforces bounds.
fn levenberg_marquardt(
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    init: &[f64],
    free: &[usize],
    scale: &[f64],
    model: &dyn Fn(&[f64], f64, Option<&mut [f64]>) -> f64,
    project: &dyn Fn(&mut [f64]),
    opts: &FitOptions,
) -> Outcome {
    let n = x.len();
    let np = free.len();
    let weight = |i: usize| sigma.map_or(1.0, |s| 1.0 / s[i]);
    let mut p = init.to_vec();
    project(&mut p);
    let mut grad = vec![0.0; init.len()];

    let residuals = |p: &[f64]| -> (DVector<f64>, f64) {
        let r = DVector::from_fn(n, |i, _| (y[i] - model(p, x[i], None)) * weight(i));
        let c = r.norm_squared();
        (r, c)
    };
    let jacobian = |p: &[f64], grad: &mut [f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(n, np);
        for i in 0..n {
            model(p, x[i], Some(grad));
            for (col, &k) in free.iter().enumerate() {
                j[(i, col)] = grad[k] * scale[k] * weight(i);
            }
        }
        j
    };

    let (mut r, mut chi2) = residuals(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian(&p, &mut grad);
    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p.clone();
            for (col, &k) in free.iter().enumerate() {
                trial[k] += step[col] * scale[k];
            }
            project(&mut trial);
            let (rt, ct) = residuals(&trial);
            if ct.is_finite() && ct <= chi2 {
                // A tiny step only means convergence when it was not damped away.
                small_step = lambda < 1.0
                    && (free
                        .iter()
                        .all(|&k| (trial[k] - p[k]).abs() <= opts.tol * (p[k].abs() + scale[k] * 1e-6))
                        || chi2 - ct <= opts.tol * chi2);
                p = trial;
                r = rt;
                chi2 = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: numerically at the minimum.
            converged = true;
            break;
        }
        jac = jacobian(&p, &mut grad);
        if small_step || chi2 == 0.0 {
            converged = true;
            break;
        }
    }

    let dof = n.saturating_sub(np).max(1) as f64;
    let jtj = jac.transpose() * &jac;
    let cov_u = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| jtj.pseudo_inverse(1e-14).unwrap_or(DMatrix::zeros(np, np)));
    let factor = chi2 / dof;
    let k = init.len();
    let mut covariance = DMatrix::zeros(k, k);
    for (a, &ka) in free.iter().enumerate() {
        for (b, &kb) in free.iter().enumerate() {
            covariance[(ka, kb)] = cov_u[(a, b)] * scale[ka] * scale[kb] * factor;
        }
    }
    Outcome {
        params: p,
        covariance,
        residual_norm: chi2.sqrt(),
        iterations,
        converged,
    }
}

fn check_data(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<()> {
    if x.len() < 8 {
        return Err(Error::Fit(format!("need at least 8 points, got {}", x.len())));
    }
    if x.len() != y.len() || sigma.is_some_and(|s| s.len() != x.len()) {
        return Err(Error::Fit("grid lengths differ".into()));
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Fit("degenerate (flat or non-finite) data".into()));
    }
    Ok(())
}

/// Inverse-variance weights when every error is positive; otherwise unweighted.
fn weights_of(s: &Spectrum) -> Option<Vec<f64>> {
    (s.has_errors() && s.std_err.iter().all(|e| *e > 0.0)).then(|| s.std_err.clone())
}

/// Weighted Fano-Voigt fit with ω_D fixed.
pub fn fit_lineshape(spectrum: &Spectrum, omega_d: f64, init: Option<FitInit>, opts: &FitOptions) -> Result<FitResult> {
    let sigma = weights_of(spectrum);
    fit_fano_voigt(
        &spectrum.detunings,
        &spectrum.absorption,
        sigma.as_deref(),
        omega_d,
        init,
        opts,
    )
}

pub fn fit_fano_voigt(
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    omega_d: f64,
    init: Option<FitInit>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if !(omega_d > 0.0) {
        return Err(Error::domain("Gaussian width must be > 0"));
    }
    check_data(x, y, sigma)?;
    let init = init.unwrap_or_else(|| FitInit::estimate(x, y, omega_d));
    let p0 = [init.shift, init.amplitude, init.inv_q, init.gamma_l];
    let scale = [omega_d, init.amplitude.abs().max(f64::MIN_POSITIVE), 1.0, omega_d];
    let free: &[usize] = if opts.fit_asymmetry { &[0, 1, 2, 3] } else { &[0, 1, 3] };
    let model = |p: &[f64], d: f64, g: Option<&mut [f64]>| fv_eval(p, omega_d, d, g);
    let project = |p: &mut [f64]| {
        p[3] = p[3].max(0.0);
        // Keep away from the q² = 1 pole.
        p[2] = p[2].clamp(-0.99, 0.99);
    };
    let out = levenberg_marquardt(x, y, sigma, &p0, free, &scale, &model, &project, opts);
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = out.covariance[(i, j)];
        }
    }
    Ok(FitResult {
        shift: out.params[0],
        amplitude: out.params[1],
        inv_q: out.params[2],
        omega_d,
        gamma_l: out.params[3],
        covariance,
        residual_norm: out.residual_norm,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Lorentzian fit result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzFit {
    pub shift: f64,
    pub amplitude: f64,
    pub fwhm: f64,
    pub covariance: [[f64; 3]; 3],
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LorentzFit {
    pub fn fwhm_err(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }

    pub fn shift_err(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }
}

pub fn fit_lorentzian(spectrum: &Spectrum, opts: &FitOptions) -> Result<LorentzFit> {
    let x = &spectrum.detunings;
    let y = &spectrum.absorption;
    let sigma = weights_of(spectrum);
    check_data(x, y, sigma.as_deref())?;
    let span = x[x.len() - 1] - x[0];
    let guess = FitInit::estimate(x, y, span * 1e-9);
    let fwhm0 = guess.gamma_l.max(span / x.len() as f64);
    let p0 = [guess.shift, guess.amplitude, fwhm0];
    let scale = [fwhm0, guess.amplitude.abs().max(f64::MIN_POSITIVE), fwhm0];
    let project = |p: &mut [f64]| p[2] = p[2].abs().max(f64::MIN_POSITIVE);
    let out = levenberg_marquardt(
        x,
        y,
        sigma.as_deref(),
        &p0,
        &[0, 1, 2],
        &scale,
        &lz_eval,
        &project,
        opts,
    );
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = out.covariance[(i, j)];
        }
    }
    Ok(LorentzFit {
        shift: out.params[0],
        amplitude: out.params[1],
        fwhm: out.params[2],
        covariance,
        residual_norm: out.residual_norm,
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    const G0: f64 = 2.0 * PI * 1.89e6;

    fn grid(n: usize, half: f64) -> Vec<f64> {
        Spectrum::uniform_grid(-half, half, n)
    }

    fn sample(p: &FanoVoigt, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&d| p.eval(d).unwrap()).collect()
    }

    #[test]
    fn large_q_is_voigt() {
        let p = FanoVoigt::with_q(3.0 * G0, 2.0 * G0, 1e8, 40.0 * G0, 10.0 * G0).unwrap();
        let v = FanoVoigt { inv_q: 0.0, ..p };
        for d in grid(41, 150.0 * G0) {
            let a = p.eval(d).unwrap();
            let b = v.eval(d).unwrap();
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn pure_gaussian_limit() {
        let wd = 40.0 * G0;
        let p = FanoVoigt {
            shift: 0.0,
            amplitude: 1.0,
            inv_q: 0.0,
            omega_d: wd,
            gamma_l: 0.0,
        };
        let peak = p.eval(0.0).unwrap();
        let sigma = wd / (2.0 * (2.0 * LN_2).sqrt());
        assert!((peak - 1.0 / (sigma * (2.0 * PI).sqrt())).abs() < 1e-12 * peak);
        assert!((p.eval(0.5 * wd).unwrap() / peak - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unit_asymmetry_is_singular() {
        assert!(FanoVoigt::with_q(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
        let p = FanoVoigt {
            shift: 0.0,
            amplitude: 1.0,
            inv_q: -1.0,
            omega_d: 1.0,
            gamma_l: 0.0,
        };
        assert!(matches!(p.eval(0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn symmetric_profile_is_even() {
        let s = 5.0 * G0;
        let p = FanoVoigt {
            shift: s,
            amplitude: 1.0,
            inv_q: 0.0,
            omega_d: 30.0 * G0,
            gamma_l: 8.0 * G0,
        };
        for k in 1..40 {
            let d = k as f64 * 2.3 * G0;
            let a = p.eval(s + d).unwrap();
            let b = p.eval(s - d).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    fn trapz(x: &[f64], y: &[f64]) -> f64 {
        x.windows(2)
            .zip(y.windows(2))
            .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
            .sum()
    }

    #[test]
    fn area_is_independent_of_large_q() {
        // Wings of a Voigt decay like the Lorentzian; integrate far enough out.
        let x = grid(400_001, 20_000.0 * G0);
        let mut areas = Vec::new();
        for q in [1e4, 1e6, f64::INFINITY] {
            let p = FanoVoigt::with_q(0.0, 2.5, q, 20.0 * G0, 0.5 * G0).unwrap();
            areas.push(trapz(&x, &sample(&p, &x)));
        }
        for a in &areas {
            assert!((a / areas[2] - 1.0).abs() < 1e-4, "{areas:?}");
        }
        assert!((areas[2] / 2.5 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn noiseless_roundtrip() {
        let x = grid(201, 200.0 * G0);
        let truth = FanoVoigt {
            shift: 4.0 * G0,
            amplitude: 3.0 * G0,
            inv_q: 0.15,
            omega_d: 50.0 * G0,
            gamma_l: 12.0 * G0,
        };
        let y = sample(&truth, &x);
        let f = fit_fano_voigt(&x, &y, None, truth.omega_d, None, &FitOptions::default()).unwrap();
        assert!(f.converged);
        assert!((f.shift / truth.shift - 1.0).abs() < 1e-6, "{f:?}");
        assert!((f.amplitude / truth.amplitude - 1.0).abs() < 1e-6);
        assert!((f.inv_q / truth.inv_q - 1.0).abs() < 1e-6);
        assert!((f.gamma_l / truth.gamma_l - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_data_rejected() {
        let x = grid(20, 1.0);
        assert!(matches!(
            fit_fano_voigt(&x, &[0.3; 20], None, 1.0, None, &FitOptions::default()),
            Err(Error::Fit(_))
        ));
        assert!(fit_fano_voigt(
            &x[..5],
            &[0.0, 1.0, 2.0, 1.0, 0.0],
            None,
            1.0,
            None,
            &FitOptions::default()
        )
        .is_err());
    }

    #[test]
    fn noisy_shift_within_three_sigma() {
        // 1% noise relative to the peak, 200 points, s = +5 Γ0.
        let x = grid(200, 100.0 * G0);
        let truth = FanoVoigt {
            shift: 5.0 * G0,
            amplitude: 1.0,
            inv_q: 0.0,
            omega_d: 20.0 * G0,
            gamma_l: 5.0 * G0,
        };
        let clean = sample(&truth, &x);
        let peak = clean.iter().cloned().fold(0.0, f64::max);
        let noise = Normal::new(0.0, 0.01 * peak).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut within = 0;
        let mut shifts = Vec::new();
        let mut symmetric_q = Vec::new();
        for _ in 0..100 {
            let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let f = fit_fano_voigt(&x, &y, None, truth.omega_d, None, &FitOptions::default()).unwrap();
            shifts.push(f.shift);
            if (f.shift - truth.shift).abs() <= 0.15 * G0 {
                within += 1;
            }
            symmetric_q.push(f.inv_q / f.covariance[2][2].sqrt());
        }
        let m = shifts.iter().sum::<f64>() / 100.0;
        let sd = (shifts.iter().map(|s| (s - m).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!(sd < 0.06 * G0 && (m - 5.0 * G0).abs() < 3.0 * sd / 10.0, "{sd} {m}");
        assert!(within >= 99, "{within}");
        // 1/q on symmetric data scatters around zero in units of its own error.
        let mean = symmetric_q.iter().sum::<f64>() / 100.0;
        assert!(mean.abs() < 0.5, "{mean}");
    }

    #[test]
    fn lorentzian_roundtrip() {
        let x = grid(121, 200.0 * G0);
        let y: Vec<f64> = x.iter().map(|&d| lorentzian(d, 2.0 * G0, 7.0, 35.0 * G0)).collect();
        let s = Spectrum::new(x, y, vec![]).unwrap();
        let f = fit_lorentzian(&s, &FitOptions::default()).unwrap();
        assert!((f.fwhm / (35.0 * G0) - 1.0).abs() < 1e-8);
        assert!((f.shift / (2.0 * G0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = [3.0, 2.0, 0.2, 4.0];
        let mut g = [0.0; 4];
        fv_eval(&p, 10.0, 5.0, Some(&mut g));
        for k in 0..4 {
            let h = 1e-6;
            let mut a = p;
            let mut b = p;
            a[k] += h;
            b[k] -= h;
            let fd = (fv_eval(&a, 10.0, 5.0, None) - fv_eval(&b, 10.0, 5.0, None)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7 * g[k].abs().max(1e-3), "param {k}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn fit_recovers_any_admissible_params(
            s in -30.0f64..30.0, a in 0.5f64..5.0, iq in -0.4f64..0.4, wd in 20.0f64..80.0, gl in 1.0f64..40.0
        ) {
            let truth = FanoVoigt { shift: s * G0, amplitude: a * G0, inv_q: iq, omega_d: wd * G0, gamma_l: gl * G0 };
            let x = grid(301, 6.0 * (wd + gl) * G0);
            let y = sample(&truth, &x);
            let f = fit_fano_voigt(&x, &y, None, truth.omega_d, None, &FitOptions::default()).unwrap();
            proptest::prop_assert!((f.shift - truth.shift).abs() <= 1e-6 * G0 * s.abs().max(1.0));
            proptest::prop_assert!((f.amplitude / truth.amplitude - 1.0).abs() < 1e-6);
            proptest::prop_assert!((f.inv_q - truth.inv_q).abs() < 1e-6);
            proptest::prop_assert!((f.gamma_l / truth.gamma_l - 1.0).abs() < 1e-6);
        }
    }
}
