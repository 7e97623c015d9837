//! Free-space dyadic Green's tensor, the effective 1D guided-mode term and
//! the pairwise coupling rates derived from their sum.
//!
//! Normalization: G = (1 + ∇∇/k²)·e^{ikR}/(4πkR), so Im G_xx → 1/(6π) at
//! coincidence and Γ0 = 6πΓ0·Im G_self.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mode::ModeProfile;
use crate::params::Vec3;

/// Im G_xx at coincidence.
pub const SELF_IMAG: f64 = 1.0 / (6.0 * PI);

/// Pairs closer than this fraction of the wavelength do not interact.
pub const EXCLUSION_FRACTION: f64 = 1.0 / 500.0;

/// Relative tolerance on negative eigenvalues of Γ (in units of Γ0).
pub const PASSIVITY_TOL: f64 = 1e-8;

/// Spherical Bessel j0, j2 (first kind) and y0, y2 (second kind).
fn spherical_bessel(x: f64) -> (f64, f64, f64, f64) {
    let (s, c) = x.sin_cos();
    let x2 = x * x;
    let (j0, j2) = if x < 0.3 {
        let x4 = x2 * x2;
        (
            1.0 - x2 / 6.0 + x4 / 120.0 - x4 * x2 / 5040.0 + x4 * x4 / 362_880.0,
            x2 / 15.0 - x4 / 210.0 + x4 * x2 / 7560.0 - x4 * x4 / 498_960.0,
        )
    } else {
        let j0 = s / x;
        (j0, (3.0 / x2 - 1.0) * j0 - 3.0 * c / x2)
    };
    let y0 = -c / x;
    let y2 = (1.0 - 3.0 / x2) * c / x - 3.0 * s / x2;
    (j0, j2, y0, y2)
}

/// Full free-space dyadic tensor between two separated points.
pub fn greens_free_space_tensor(a: &Vec3, b: &Vec3, k: f64) -> Result<Matrix3<Complex64>> {
    let d = a - b;
    let r = d.norm();
    if !(r > 0.0) {
        return Err(Error::Singular("coincident points in free-space Green's tensor".into()));
    }
    let u = d / r;
    let (j0, j2, y0, y2) = spherical_bessel(k * r);
    let iso = Complex64::new(-(2.0 * y0 - y2) / 3.0, (2.0 * j0 - j2) / 3.0);
    let aniso = Complex64::new(-y2, j2);
    let mut g = Matrix3::from_element(Complex64::new(0.0, 0.0));
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            g[(i, j)] = (iso * delta + aniso * (u[i] * u[j])) / (4.0 * PI);
        }
    }
    Ok(g)
}

/// xx component of the free-space tensor (dipoles along the slot's confinement axis).
pub fn greens_free_space_xx(a: &Vec3, b: &Vec3, k: f64) -> Result<Complex64> {
    let d = a - b;
    let r = d.norm();
    if !(r > 0.0) {
        return Err(Error::Singular(
            "coincident points in free-space Green's function".into(),
        ));
    }
    Ok(free_space_xx_unchecked(d.x / r, k * r))
}

#[inline]
fn free_space_xx_unchecked(cos_x: f64, kr: f64) -> Complex64 {
    let (j0, j2, y0, y2) = spherical_bessel(kr);
    let c2 = cos_x * cos_x;
    Complex64::new(-((2.0 * y0 - y2) / 3.0 + c2 * y2), (2.0 * j0 - j2) / 3.0 + c2 * j2) / (4.0 * PI)
}

/// Guided-mode term i·√(w_a·w_b)/(6π)·e^{iβ0|Δz|} with w = Γ_WG/Γ0 at each
/// transverse position. Errors if either point leaves the profile domain.
pub fn greens_waveguide(a: &Vec3, b: &Vec3, mode: &ModeProfile) -> Result<Complex64> {
    let wa = mode.gamma_wg_over_gamma0(a.x, a.y)?;
    let wb = mode.gamma_wg_over_gamma0(b.x, b.y)?;
    Ok(waveguide_term(wa, wb, mode.beta0(), (a.z - b.z).abs()))
}

#[inline]
fn waveguide_term(wa: f64, wb: f64, beta0: f64, dz: f64) -> Complex64 {
    let mag = (wa * wb).sqrt() / (6.0 * PI);
    let (s, c) = (beta0 * dz).sin_cos();
    // i·mag·e^{iφ}
    Complex64::new(-mag * s, mag * c)
}

/// G_FS + G_WG for a separated pair.
pub fn greens_total(a: &Vec3, b: &Vec3, k: f64, mode: &ModeProfile) -> Result<Complex64> {
    Ok(greens_free_space_xx(a, b, k)? + greens_waveguide(a, b, mode)?)
}

/// PF = 1 + 6π·Γ_1D/Γ0.
pub fn purcell_factor(gamma_1d_self: f64, gamma0: f64) -> Result<f64> {
    if !(gamma_1d_self >= 0.0) {
        return Err(Error::domain(format!("Γ_1D must be >= 0, got {gamma_1d_self}")));
    }
    if !(gamma0 > 0.0) {
        return Err(Error::domain("Γ0 must be > 0"));
    }
    Ok(1.0 + 6.0 * PI * gamma_1d_self / gamma0)
}

/// Pairwise exchange and collective decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    /// Dispersive exchange J_mn = −3πΓ0·Re G (rad/s), zero diagonal.
    pub j: DMatrix<f64>,
    /// Dissipative exchange Γ_mn = 6πΓ0·Im G (rad/s); the diagonal holds the total decay.
    pub gamma: DMatrix<f64>,
    /// Per-atom total decay Γ0·(Γ1/Γ0 + Γ_WG/Γ0) (rad/s).
    pub decay: DVector<f64>,
}

impl CouplingMatrices {
    /// Mean-field kernel C_mn = −J_mn + iΓ_mn/2 with a zero diagonal.
    pub fn kernel(&self) -> DMatrix<Complex64> {
        let n = self.j.nrows();
        DMatrix::from_fn(n, n, |m, p| {
            if m == p {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-self.j[(m, p)], 0.5 * self.gamma[(m, p)])
            }
        })
    }
}

/// Options controlling how the pair sums are assembled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    /// Include the guided mode: Purcell-enhanced self decay and, with
    /// `guided_pairs`, the guided pair exchange.
    pub waveguide: bool,
    pub guided_pairs: bool,
    /// Include atom-atom interaction at all; decay rates are kept either way.
    pub interactions: bool,
    /// Non-guided decay in units of Γ0.
    pub nonguided_decay: f64,
    /// Pairs closer than this do not interact (m).
    pub exclusion_radius: f64,
}

impl CouplingOptions {
    pub fn new(lambda: f64) -> Self {
        Self {
            waveguide: true,
            guided_pairs: true,
            interactions: true,
            nonguided_decay: 1.0,
            exclusion_radius: lambda * EXCLUSION_FRACTION,
        }
    }
}

/// Guided coupling weights w_m = Γ_WG/Γ0 for each atom; zero outside the profile.
pub fn waveguide_weights(positions: &[Vec3], mode: &ModeProfile) -> Vec<f64> {
    positions
        .iter()
        .map(|p| mode.coupling_from_amplitude(mode.amplitude_or_zero(p.x, p.y)))
        .collect()
}

/// Fill the mean-field kernel C = 3πΓ0·G (zero diagonal, excluded pairs zero)
/// into `out`, row-major N×N, and the per-atom decay into `decay`.
/// This is the hot path used by the integrator; it performs no passivity check.
pub fn fill_kernel(
    positions: &[Vec3],
    weights: &[f64],
    k: f64,
    beta0: f64,
    gamma0: f64,
    opts: &CouplingOptions,
    out: &mut [Complex64],
    decay: &mut [f64],
) {
    let n = positions.len();
    debug_assert_eq!(out.len(), n * n);
    let w_on = opts.waveguide;
    for m in 0..n {
        let w = if w_on { weights[m] } else { 0.0 };
        decay[m] = gamma0 * (opts.nonguided_decay + w);
        out[m * n + m] = Complex64::new(0.0, 0.0);
    }
    let scale = 3.0 * PI * gamma0;
    for m in 0..n {
        for p in (m + 1)..n {
            let c = if opts.interactions {
                let d = positions[m] - positions[p];
                let r = d.norm();
                if r < opts.exclusion_radius {
                    Complex64::new(0.0, 0.0)
                } else {
                    let mut g = free_space_xx_unchecked(d.x / r, k * r);
                    if w_on && opts.guided_pairs {
                        g += waveguide_term(weights[m], weights[p], beta0, d.z.abs());
                    }
                    g * scale
                }
            } else {
                Complex64::new(0.0, 0.0)
            };
            out[m * n + p] = c;
            out[p * n + m] = c;
        }
    }
}

/// Assemble J, Γ and the decay vector for fixed positions, checking that Γ is
/// passive. Slightly negative eigenvalues (above −1e-8·Γ0) are clipped to zero.
pub fn coupling_matrices(
    positions: &[Vec3],
    k: f64,
    mode: &ModeProfile,
    gamma0: f64,
    opts: &CouplingOptions,
) -> Result<CouplingMatrices> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::domain("coupling matrices need at least one atom"));
    }
    let weights = waveguide_weights(positions, mode);
    let mut kern = vec![Complex64::new(0.0, 0.0); n * n];
    let mut decay = vec![0.0; n];
    fill_kernel(
        positions,
        &weights,
        k,
        mode.beta0(),
        gamma0,
        opts,
        &mut kern,
        &mut decay,
    );
    let j = DMatrix::from_fn(n, n, |m, p| -kern[m * n + p].re);
    let mut gamma = DMatrix::from_fn(n, n, |m, p| if m == p { decay[m] } else { 2.0 * kern[m * n + p].im });
    if n > 1 {
        gamma = enforce_passive(gamma, gamma0)?;
    }
    let decay = DVector::from_iterator(n, (0..n).map(|m| gamma[(m, m)]));
    Ok(CouplingMatrices { j, gamma, decay })
}

fn enforce_passive(gamma: DMatrix<f64>, gamma0: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(gamma.clone());
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(gamma);
    }
    if min < -PASSIVITY_TOL * gamma0 {
        return Err(Error::domain(format!(
            "dissipative matrix is not positive semidefinite (min eigenvalue {:.3e} Γ0)",
            min / gamma0
        )));
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose())
}
