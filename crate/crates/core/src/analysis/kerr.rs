//! Transmission → susceptibility → refractive index → Kerr coefficient and
//! the phase imprinted by one photon.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{HBAR, SPEED_OF_LIGHT};

/// Im χ = −ln T/(n_eff·k·L). Transmission above 1 is clipped to 1.
pub fn susceptibility_from_transmission(transmission: &[f64], n_eff: f64, k: f64, length: f64) -> Result<Vec<f64>> {
    let kl = n_eff * k * length;
    if !(kl > 0.0) {
        return Err(Error::domain("n_eff·k·L must be > 0"));
    }
    let mut clipped = 0;
    let out = transmission
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if !(t > 0.0) {
                return Err(Error::domain(format!("transmission must be > 0, got {t} at row {i}")));
            }
            if t > 1.0 {
                clipped += 1;
            }
            Ok(-t.min(1.0).ln() / kl)
        })
        .collect::<Result<Vec<_>>>()?;
    if clipped > 0 {
        warn!("{clipped} transmission values above 1 clipped");
    }
    Ok(out)
}

/// n = √(1 + Re χ) pointwise.
pub fn refractive_index(re_chi: &[f64]) -> Result<Vec<f64>> {
    re_chi
        .iter()
        .map(|&c| {
            if c > -1.0 {
                Ok((1.0 + c).sqrt())
            } else {
                Err(Error::domain(format!("Re χ must be > −1, got {c}")))
            }
        })
        .collect()
}

/// |dn/dΔ| at the node where Im χ peaks, by central difference.
pub fn resonance_slope(grid: &[f64], n: &[f64], im_chi: &[f64]) -> Result<f64> {
    if grid.len() < 3 || grid.len() != n.len() || n.len() != im_chi.len() {
        return Err(Error::domain("slope needs matching grids of at least 3 points"));
    }
    let i = im_chi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
        .clamp(1, grid.len() - 2);
    Ok(((n[i + 1] - n[i - 1]) / (grid[i + 1] - grid[i - 1])).abs())
}

/// n₂ = s·|dn/dΔ|/I.
pub fn kerr_coefficient(shift: f64, intensity: f64, slope: f64) -> Result<f64> {
    if !(intensity > 0.0) {
        return Err(Error::domain(format!("intensity must be > 0, got {intensity}")));
    }
    Ok(shift * slope / intensity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrEstimate {
    pub n2: f64,
    /// |dn/dΔ| (s/rad); zero when not derived from a spectrum.
    pub slope: f64,
    pub i_photon: f64,
    pub phi: f64,
    pub photons_for_pi: u64,
}

impl KerrEstimate {
    /// Dimensionless n₂·I_photon.
    pub fn n2_i_photon(&self) -> f64 {
        self.n2 * self.i_photon
    }
}

/// I_photon = ħω/(T·A_eff) for a photon of duration T = 2π/s.
pub fn single_photon_intensity(lambda: f64, bandwidth: f64, a_eff: f64) -> Result<f64> {
    if !(lambda > 0.0 && bandwidth > 0.0 && a_eff > 0.0) {
        return Err(Error::domain("wavelength, bandwidth and mode area must be > 0"));
    }
    let omega = 2.0 * PI * SPEED_OF_LIGHT / lambda;
    let duration = 2.0 * PI / bandwidth;
    Ok(HBAR * omega / (duration * a_eff))
}

/// φ = n_eff·k·L·n₂·I_photon and the photon count for a π shift.
/// `bandwidth` is the photon bandwidth in rad/s.
pub fn single_photon_phase(
    lambda: f64,
    n_eff: f64,
    length: f64,
    n2: f64,
    bandwidth: f64,
    a_eff: f64,
) -> Result<KerrEstimate> {
    if !(n_eff > 0.0 && length > 0.0) {
        return Err(Error::domain("n_eff and length must be > 0"));
    }
    if !(n2 >= 0.0 && n2.is_finite()) {
        return Err(Error::domain("n₂ must be finite and >= 0"));
    }
    let i_photon = single_photon_intensity(lambda, bandwidth, a_eff)?;
    let phi = n_eff * 2.0 * PI / lambda * length * n2 * i_photon;
    let photons_for_pi = if phi > 0.0 { (PI / phi).ceil() as u64 } else { u64::MAX };
    Ok(KerrEstimate {
        n2,
        slope: 0.0,
        i_photon,
        phi,
        photons_for_pi,
    })
}
