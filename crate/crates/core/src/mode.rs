//! Transverse model of the guided slot mode.
//!
//! A profile stores the normalized field amplitude |E|/max|E|. The waveguide
//! coupling rate follows as Γ_WG/Γ0 = (PF_max − 1)·amp², so drive and coupling
//! always derive from the same field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, SlotGeometry, Vec3};

/// Default decay length of the analytic evanescent tail.
pub const DEFAULT_DECAY_LENGTH: f64 = 50e-9;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Amplitude 1 everywhere with no guided coupling (free-space drive).
    Uniform,
    /// Unit amplitude inside the gap, amp² = exp(−d/ξ) outside, d the distance to the gap.
    Analytic { slot: SlotGeometry, decay_length: f64 },
    /// Bilinear interpolation on a rectilinear grid; `amp[j * nx + i]` sits at (xs[i], ys[j]).
    Grid { xs: Vec<f64>, ys: Vec<f64>, amp: Vec<f64> },
}

/// Guided-mode map over the waveguide cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    shape: Shape,
    pf_max: f64,
    n_eff: f64,
    beta0: f64,
    a_eff: Option<f64>,
}

/// How a scenario obtains its mode profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSource {
    /// Plane-wave drive, no waveguide channel.
    Uniform,
    Analytic {
        #[serde(default = "default_pf_max")]
        pf_max: f64,
        #[serde(default = "default_decay_length")]
        decay_length: f64,
    },
    File {
        path: std::path::PathBuf,
    },
}

fn default_pf_max() -> f64 {
    35.0
}

fn default_decay_length() -> f64 {
    DEFAULT_DECAY_LENGTH
}

impl Default for ModeSource {
    fn default() -> Self {
        ModeSource::Analytic {
            pf_max: default_pf_max(),
            decay_length: DEFAULT_DECAY_LENGTH,
        }
    }
}

impl ModeSource {
    /// Build the profile. Relative file paths resolve against `base_dir`.
    pub fn build(&self, params: &PhysicalParams, slot: SlotGeometry, base_dir: Option<&Path>) -> Result<ModeProfile> {
        match self {
            ModeSource::Uniform => Ok(ModeProfile::uniform(params)),
            ModeSource::Analytic { pf_max, decay_length } => {
                analytic_fallback_profile(params, slot, *pf_max, *decay_length)
            }
            ModeSource::File { path } => {
                let path = match base_dir {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                load_mode_profile(&path, params)
            }
        }
    }
}

/// Read a mode-profile grid file; see [`crate::ingest::read_mode_profile`] for the format.
pub fn load_mode_profile(path: &Path, params: &PhysicalParams) -> Result<ModeProfile> {
    let raw = crate::ingest::read_mode_profile(path)?;
    ModeProfile::from_grid(raw.xs, raw.ys, raw.amplitude, raw.pf_max, params)
}

/// Gap-uniform profile with an exponential tail, scaled so PF(center) = `pf_max`.
pub fn analytic_fallback_profile(
    params: &PhysicalParams,
    slot: SlotGeometry,
    pf_max: f64,
    decay_length: f64,
) -> Result<ModeProfile> {
    if !(pf_max.is_finite() && pf_max >= 1.0) {
        return Err(Error::domain(format!("pf_max must be >= 1, got {pf_max}")));
    }
    if !(decay_length.is_finite() && decay_length > 0.0) {
        return Err(Error::domain("decay length must be > 0"));
    }
    if !(slot.gap > 0.0 && slot.ridge_height > 0.0) {
        return Err(Error::domain("slot gap and height must be > 0"));
    }
    // Area of the gap plus the exponentially weighted offset bands of a convex rectangle.
    let perimeter = 2.0 * (slot.gap + slot.ridge_height);
    let a_eff = slot.gap * slot.ridge_height
        + perimeter * decay_length
        + 2.0 * std::f64::consts::PI * decay_length * decay_length;
    Ok(ModeProfile {
        shape: Shape::Analytic { slot, decay_length },
        pf_max,
        n_eff: params.n_eff,
        beta0: params.beta0(),
        a_eff: Some(a_eff),
    })
}

impl ModeProfile {
    /// Uniform unit drive without any guided channel; n_eff is taken from `params`.
    pub fn uniform(params: &PhysicalParams) -> Self {
        Self {
            shape: Shape::Uniform,
            pf_max: 1.0,
            n_eff: params.n_eff,
            beta0: params.beta0(),
            a_eff: None,
        }
    }

    /// Profile from tabulated |E| on a rectilinear grid (row-major, x fastest).
    /// Amplitudes are rescaled so their maximum is 1.
    pub fn from_grid(
        xs: Vec<f64>,
        ys: Vec<f64>,
        mut amp: Vec<f64>,
        pf_max: f64,
        params: &PhysicalParams,
    ) -> Result<Self> {
        check_axis(&xs, "x")?;
        check_axis(&ys, "y")?;
        if amp.len() != xs.len() * ys.len() {
            return Err(Error::domain(format!(
                "grid has {} values, expected {}x{}",
                amp.len(),
                xs.len(),
                ys.len()
            )));
        }
        if let Some(i) = amp.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::domain(format!(
                "amplitude at node {i} must be finite and >= 0, got {}",
                amp[i]
            )));
        }
        if !(pf_max.is_finite() && pf_max >= 1.0) {
            return Err(Error::domain(format!("pf_max must be >= 1, got {pf_max}")));
        }
        let max = amp.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            amp.iter_mut().for_each(|a| *a /= max);
        }
        let mut profile = Self {
            shape: Shape::Grid { xs, ys, amp },
            pf_max,
            n_eff: params.n_eff,
            beta0: params.beta0(),
            a_eff: None,
        };
        profile.a_eff = grid_area(&profile.shape);
        Ok(profile)
    }

    pub fn n_eff(&self) -> f64 {
        self.n_eff
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// Purcell factor at the field maximum.
    pub fn pf_max(&self) -> f64 {
        self.pf_max
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.shape, Shape::Uniform)
    }

    /// Grid axes and normalized amplitudes, if the profile is tabulated.
    pub fn grid(&self) -> Option<(&[f64], &[f64], &[f64])> {
        match &self.shape {
            Shape::Grid { xs, ys, amp } => Some((xs, ys, amp)),
            _ => None,
        }
    }

    /// Sample onto a rectilinear grid, e.g. to write an analytic profile to a file.
    pub fn sample_grid(&self, xs: Vec<f64>, ys: Vec<f64>, params: &PhysicalParams) -> Result<Self> {
        let mut amp = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                amp.push(self.amplitude(x, y)?);
            }
        }
        Self::from_grid(xs, ys, amp, self.pf_max, params)
    }

    /// Normalized field amplitude at (x, y); errors outside a tabulated domain.
    pub fn amplitude(&self, x: f64, y: f64) -> Result<f64> {
        match &self.shape {
            Shape::Uniform => Ok(1.0),
            Shape::Analytic { slot, decay_length } => {
                let d = distance_to_gap(slot, x, y);
                Ok((-0.5 * d / decay_length).exp())
            }
            Shape::Grid { xs, ys, amp } => bilinear(xs, ys, amp, x, y)
                .ok_or_else(|| Error::domain(format!("point ({x:e}, {y:e}) lies outside the mode profile grid"))),
        }
    }

    /// Like [`Self::amplitude`] but zero outside the tabulated domain.
    pub fn amplitude_or_zero(&self, x: f64, y: f64) -> f64 {
        self.amplitude(x, y).unwrap_or(0.0)
    }

    /// Γ_WG/Γ0 at (x, y).
    pub fn gamma_wg_over_gamma0(&self, x: f64, y: f64) -> Result<f64> {
        let a = self.amplitude(x, y)?;
        Ok(self.coupling_from_amplitude(a))
    }

    /// Γ_WG/Γ0 for a given normalized amplitude.
    pub fn coupling_from_amplitude(&self, amp: f64) -> f64 {
        match self.shape {
            Shape::Uniform => 0.0,
            _ => (self.pf_max - 1.0) * amp * amp,
        }
    }

    /// PF = 1 + Γ_WG/Γ0 at (x, y).
    pub fn purcell(&self, x: f64, y: f64) -> Result<f64> {
        Ok(1.0 + self.gamma_wg_over_gamma0(x, y)?)
    }

    /// Effective mode area ∫S dA / max S with S ∝ amp².
    pub fn effective_mode_area(&self) -> Result<f64> {
        self.a_eff
            .ok_or_else(|| Error::domain("effective mode area undefined for this profile"))
    }
}

/// Ω0 at a position: peak Rabi frequency times the local normalized amplitude.
pub fn local_drive(profile: &ModeProfile, position: &Vec3, omega0_peak: f64) -> Result<f64> {
    Ok(omega0_peak * profile.amplitude(position.x, position.y)?)
}

/// Free function form of [`ModeProfile::effective_mode_area`].
pub fn effective_mode_area(profile: &ModeProfile) -> Result<f64> {
    profile.effective_mode_area()
}

fn distance_to_gap(slot: &SlotGeometry, x: f64, y: f64) -> f64 {
    let (x0, x1, y0, y1) = slot.gap_rect();
    let dx = (x0 - x).max(0.0).max(x - x1);
    let dy = (y0 - y).max(0.0).max(y - y1);
    dx.hypot(dy)
}

fn check_axis(axis: &[f64], name: &str) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::domain(format!("{name} axis needs at least 2 nodes")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{name} axis has non-finite values")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

/// Index of the cell containing `v`, or None outside [axis[0], axis[last]].
fn cell(axis: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if !(v >= axis[0] && v <= axis[n - 1]) {
        return None;
    }
    let i = match axis.partition_point(|a| *a <= v) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    };
    let t = (v - axis[i]) / (axis[i + 1] - axis[i]);
    Some((i, t))
}

fn bilinear(xs: &[f64], ys: &[f64], amp: &[f64], x: f64, y: f64) -> Option<f64> {
    let (i, tx) = cell(xs, x)?;
    let (j, ty) = cell(ys, y)?;
    let nx = xs.len();
    let a00 = amp[j * nx + i];
    let a10 = amp[j * nx + i + 1];
    let a01 = amp[(j + 1) * nx + i];
    let a11 = amp[(j + 1) * nx + i + 1];
    Some((1.0 - ty) * ((1.0 - tx) * a00 + tx * a10) + ty * ((1.0 - tx) * a01 + tx * a11))
}

/// Trapezoidal ∫amp² dA over the grid (max amp² is 1 after normalization).
fn grid_area(shape: &Shape) -> Option<f64> {
    let Shape::Grid { xs, ys, amp } = shape else {
        return None;
    };
    let nx = xs.len();
    let weight = |axis: &[f64], i: usize| {
        let lo = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
        let hi = if i + 1 < axis.len() { axis[i + 1] - axis[i] } else { 0.0 };
        0.5 * (lo + hi)
    };
    let mut total = 0.0;
    for (j, _) in ys.iter().enumerate() {
        let wy = weight(ys, j);
        for (i, _) in xs.iter().enumerate() {
            let a = amp[j * nx + i];
            total += wy * weight(xs, i) * a * a;
        }
    }
    (total > 0.0).then_some(total)
}
