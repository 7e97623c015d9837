//! Physical parameter bundles, geometry and per-atom state shared by every
//! other module, plus the elementary unit conversions.
//!
//! Everything is SI internally. Rates and detunings are angular (rad/s);
//! user-facing tables report detunings in units of the natural linewidth.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * PI);
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Mass of a Rb-85 atom in kg.
pub const RB85_MASS: f64 = 1.409e-25;

/// Probe wavelength, guided-mode index and two-level transition constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    /// Probe wavelength (m).
    pub lambda_probe: f64,
    /// Effective index of the guided mode.
    pub n_eff: f64,
    /// Natural decay rate Γ0 (rad/s).
    pub gamma0: f64,
    /// Saturation intensity (W/m²).
    pub i_sat: f64,
    /// Vapor temperature (K).
    pub temperature: f64,
    /// Length of the open interaction region (m).
    pub interaction_length: f64,
    /// Decay into non-guided modes in units of Γ0. The perturbative total
    /// Green's function implies 1.
    pub nonguided_decay: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            lambda_probe: 1529e-9,
            n_eff: 2.53,
            gamma0: 2.0 * PI * 1.89e6,
            i_sat: 1.4,
            temperature: 473.0,
            interaction_length: 200e-6,
            nonguided_decay: 1.0,
        }
    }
}

impl PhysicalParams {
    /// Free-space probe wavenumber 2π/λ.
    pub fn k(&self) -> f64 {
        2.0 * PI / self.lambda_probe
    }

    /// Guided propagation constant n_eff·k.
    pub fn beta0(&self) -> f64 {
        self.n_eff * self.k()
    }

    /// Phase velocity c/n_eff of the linear-dispersion guided mode.
    pub fn phase_velocity(&self) -> f64 {
        SPEED_OF_LIGHT / self.n_eff
    }

    /// Probe angular frequency 2πc/λ.
    pub fn omega_probe(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.lambda_probe
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("physics.lambda_probe", self.lambda_probe),
            ("physics.n_eff", self.n_eff),
            ("physics.gamma0", self.gamma0),
            ("physics.i_sat", self.i_sat),
            ("physics.interaction_length", self.interaction_length),
            ("physics.nonguided_decay", self.nonguided_decay),
        ];
        for (path, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(path, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::config("physics.temperature", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Axis-aligned box given by its two corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| (self.max[i] - self.min[i]).max(0.0)).product()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Strict interior test; points on a face count as outside.
    pub fn contains_strict(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    pub fn encloses(&self, other: &Aabb) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }

    pub fn overlap_volume(&self, other: &Aabb) -> f64 {
        (0..3)
            .map(|i| (self.max[i].min(other.max[i]) - self.min[i].max(other.min[i])).max(0.0))
            .product()
    }

    pub fn extents(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }
}

/// Ridge width, ridge height and gap of the slot waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlotGeometry {
    pub ridge_width: f64,
    pub ridge_height: f64,
    pub gap: f64,
}

impl Default for SlotGeometry {
    fn default() -> Self {
        Self {
            ridge_width: 300e-9,
            ridge_height: 250e-9,
            gap: 50e-9,
        }
    }
}

impl SlotGeometry {
    /// Transverse centre of the gap. The ridges stand on the substrate plane y = 0
    /// and are mirror images about x = 0.
    pub fn center(&self) -> (f64, f64) {
        (0.0, 0.5 * self.ridge_height)
    }

    /// Cross-section of the gap region as (x_min, x_max, y_min, y_max).
    pub fn gap_rect(&self) -> (f64, f64, f64, f64) {
        (-0.5 * self.gap, 0.5 * self.gap, 0.0, self.ridge_height)
    }

    /// The two ridges as boxes spanning `z_min..z_max`.
    pub fn ridges(&self, z_min: f64, z_max: f64) -> [Aabb; 2] {
        let g = 0.5 * self.gap;
        let w = self.ridge_width;
        let h = self.ridge_height;
        [
            Aabb::new([-g - w, 0.0, z_min], [-g, h, z_max]),
            Aabb::new([g, 0.0, z_min], [g + w, h, z_max]),
        ]
    }
}

/// Probe volume with the dielectric regions atoms cannot enter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBox {
    pub bounds: Aabb,
    #[serde(default)]
    pub slot: SlotGeometry,
    #[serde(default)]
    pub dielectrics: Vec<Aabb>,
}

impl SimulationBox {
    /// Empty box of the given extents with one corner at the origin.
    pub fn free_space(extents: [f64; 3]) -> Self {
        Self {
            bounds: Aabb::new([0.0; 3], extents),
            slot: SlotGeometry::default(),
            dielectrics: Vec::new(),
        }
    }

    /// Box around the slot: `margin` of vapor beside and above the ridges,
    /// substrate at y = 0, `length` along the propagation axis.
    pub fn around_slot(slot: SlotGeometry, margin: f64, length: f64) -> Self {
        let half = 0.5 * slot.gap + slot.ridge_width + margin;
        Self {
            bounds: Aabb::new([-half, 0.0, 0.0], [half, slot.ridge_height + margin, length]),
            slot,
            dielectrics: slot.ridges(0.0, length).to_vec(),
        }
    }

    /// Only the gap between the ridges, open at the top.
    pub fn gap_only(slot: SlotGeometry, length: f64) -> Self {
        let (x0, x1, y0, y1) = slot.gap_rect();
        Self {
            bounds: Aabb::new([x0, y0, 0.0], [x1, y1, length]),
            slot,
            dielectrics: Vec::new(),
        }
    }

    pub fn extents(&self) -> [f64; 3] {
        self.bounds.extents()
    }

    /// Vapor-accessible volume.
    pub fn free_volume(&self) -> f64 {
        self.bounds.volume()
            - self
                .dielectrics
                .iter()
                .map(|d| d.overlap_volume(&self.bounds))
                .sum::<f64>()
    }

    pub fn in_dielectric(&self, p: &Vec3) -> bool {
        self.dielectrics.iter().any(|d| d.contains_strict(p))
    }

    pub fn is_free(&self, p: &Vec3) -> bool {
        self.bounds.contains(p) && !self.in_dielectric(p)
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.extents();
        if e.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("box.bounds", "extents must be finite and > 0"));
        }
        for (i, d) in self.dielectrics.iter().enumerate() {
            if !self.bounds.encloses(d) {
                return Err(Error::config(
                    format!("box.dielectrics[{i}]"),
                    "dielectric volume must lie within the box",
                ));
            }
            for (j, o) in self.dielectrics.iter().enumerate().skip(i + 1) {
                if d.overlap_volume(o) > 0.0 {
                    return Err(Error::config(
                        format!("box.dielectrics[{j}]"),
                        format!("overlaps dielectric {i}"),
                    ));
                }
            }
        }
        if self.free_volume() <= 0.0 {
            return Err(Error::config("box", "free volume must be > 0"));
        }
        Ok(())
    }
}

/// Position, velocity and mean-field spin variables of one atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub sigma_ge: Complex64,
    pub sigma_ee: f64,
    pub sigma_gg: f64,
}

impl AtomState {
    pub fn ground(position: Vec3, velocity: Vec3) -> Self {
        Self {
            position,
            velocity,
            sigma_ge: Complex64::new(0.0, 0.0),
            sigma_ee: 0.0,
            sigma_gg: 1.0,
        }
    }

    /// De-excite to the ground state and drop the coherence.
    pub fn reset_spin(&mut self) {
        self.sigma_ge = Complex64::new(0.0, 0.0);
        self.sigma_ee = 0.0;
        self.sigma_gg = 1.0;
    }

    /// Inversion ⟨σ_z⟩ = σ_ee − σ_gg.
    pub fn inversion(&self) -> f64 {
        self.sigma_ee - self.sigma_gg
    }

    /// Population bounds, trace and Bloch-vector length within `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.sigma_ee >= -tol
            && self.sigma_ee <= 1.0 + tol
            && (self.sigma_ee + self.sigma_gg - 1.0).abs() <= tol
            && self.sigma_ge.norm_sqr() <= self.sigma_ee * self.sigma_gg + tol
    }
}

/// Probe laser setting: Δ0 = ω_a − ω_L, intensity and peak Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserDrive {
    pub detuning: f64,
    pub intensity: f64,
    pub omega0_peak: f64,
}

impl LaserDrive {
    pub fn from_intensity(detuning: f64, intensity: f64, params: &PhysicalParams) -> Result<Self> {
        Ok(Self {
            detuning,
            intensity,
            omega0_peak: rabi_from_intensity(intensity, params.i_sat, params.gamma0)?,
        })
    }

    /// Drive specified by its peak Rabi frequency; the intensity follows from
    /// the same saturation convention.
    pub fn from_rabi(detuning: f64, omega0_peak: f64, params: &PhysicalParams) -> Self {
        let ratio = omega0_peak / params.gamma0;
        Self {
            detuning,
            intensity: 2.0 * params.i_sat * ratio * ratio,
            omega0_peak,
        }
    }
}

/// Mean inter-atomic distance r = (4π/3 · n)^(−1/3).
pub fn mean_distance(density: f64) -> Result<f64> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::domain(format!("density must be > 0, got {density}")));
    }
    Ok((4.0 * PI / 3.0 * density).powf(-1.0 / 3.0))
}

/// Normalized density (k·r)⁻³.
pub fn normalized_density(density: f64, k: f64) -> Result<f64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain(format!("wavenumber must be > 0, got {k}")));
    }
    let r = mean_distance(density)?;
    Ok((k * r).powi(-3))
}

/// Inverse of [`normalized_density`]: the number density for a given (k·r)⁻³.
pub fn density_from_normalized(normalized: f64, k: f64) -> Result<f64> {
    if !(normalized.is_finite() && normalized > 0.0 && k > 0.0) {
        return Err(Error::domain("normalized density and k must be > 0"));
    }
    Ok(3.0 * normalized * k.powi(3) / (4.0 * PI))
}

/// Ω0 = Γ0·√(I / 2I_sat).
pub fn rabi_from_intensity(intensity: f64, i_sat: f64, gamma0: f64) -> Result<f64> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::domain(format!("intensity must be >= 0, got {intensity}")));
    }
    if !(i_sat > 0.0) {
        return Err(Error::domain("saturation intensity must be > 0"));
    }
    Ok(gamma0 * (intensity / (2.0 * i_sat)).sqrt())
}

/// Doppler shift n_eff·k·v_z seen by an atom moving along the guide.
pub fn doppler_shift(v_z: f64, n_eff: f64, k: f64) -> f64 {
    n_eff * k * v_z
}

/// One-dimensional thermal velocity spread √(k_B T / m).
pub fn thermal_speed(temperature: f64, mass: f64) -> f64 {
    (BOLTZMANN * temperature / mass).sqrt()
}

/// Gaussian (Doppler) FWHM of the guided-probe line in rad/s.
pub fn doppler_fwhm(params: &PhysicalParams, mass: f64) -> f64 {
    2.0 * (2.0 * 2f64.ln()).sqrt() * params.beta0() * thermal_speed(params.temperature, mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_distance_unit_case() {
        assert_relative_eq!(mean_distance(3.0 / (4.0 * PI)).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mean_distance_scales_as_cube_root() {
        let n = 1.3e19;
        let r = mean_distance(n).unwrap();
        assert_relative_eq!(mean_distance(8.0 * n).unwrap(), r / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn mean_distance_at_densest_case() {
        let k = PhysicalParams::default().k();
        let n = density_from_normalized(6.7, k).unwrap();
        let r = mean_distance(n).unwrap();
        // r = k⁻¹·6.7^(−1/3)
        assert_relative_eq!(r, 6.7f64.powf(-1.0 / 3.0) / k, max_relative = 1e-12);
        assert_relative_eq!(r, 1.290_830_889_476_46e-7, max_relative = 1e-12);
        assert_relative_eq!(normalized_density(n, k).unwrap(), 6.7, max_relative = 1e-12);
    }

    #[test]
    fn normalized_density_identity_and_linearity() {
        let k: f64 = 4.0e6;
        // r = 1/k  ⇔  n = 3k³/(4π)
        let n = 3.0 * k.powi(3) / (4.0 * PI);
        assert_relative_eq!(normalized_density(n, k).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(normalized_density(2.0 * n, k).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn non_positive_density_is_rejected() {
        assert!(matches!(mean_distance(0.0), Err(Error::Domain(_))));
        assert!(matches!(mean_distance(-1.0), Err(Error::Domain(_))));
        assert!(normalized_density(-2.0, 1.0).is_err());
    }

    #[test]
    fn rabi_convention() {
        let g = 2.0 * PI * 1.89e6;
        assert_eq!(rabi_from_intensity(0.0, 1.4, g).unwrap(), 0.0);
        assert_relative_eq!(rabi_from_intensity(2.8, 1.4, g).unwrap(), g, max_relative = 1e-15);
        let o = rabi_from_intensity(22.0 * 1.4, 1.4, g).unwrap();
        assert_relative_eq!(o / g, 11f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(o / g, 3.317, max_relative = 1e-3);
        assert!(rabi_from_intensity(-1.0, 1.4, g).is_err());
    }

    #[test]
    fn drive_roundtrip() {
        let p = PhysicalParams::default();
        let d = LaserDrive::from_intensity(0.0, 7.0, &p).unwrap();
        let back = LaserDrive::from_rabi(0.0, d.omega0_peak, &p);
        assert_relative_eq!(back.intensity, 7.0, max_relative = 1e-12);
    }

    #[test]
    fn doppler_values() {
        let p = PhysicalParams::default();
        assert_eq!(doppler_shift(0.0, p.n_eff, p.k()), 0.0);
        let d = doppler_shift(100.0, p.n_eff, p.k());
        // n_eff·(2π/λ)·v evaluated by hand
        assert_relative_eq!(d, 1.0397e9, max_relative = 1e-4);
        assert_relative_eq!(d / (2.0 * PI), 165.5e6, max_relative = 1e-3);
        assert_eq!(doppler_shift(-100.0, p.n_eff, p.k()), -d);
    }

    #[test]
    fn derived_wavenumbers_are_exact() {
        let p = PhysicalParams::default();
        assert_eq!(p.k(), 2.0 * PI / p.lambda_probe);
        assert_eq!(p.beta0(), p.n_eff * p.k());
        p.validate().unwrap();
        let bad = PhysicalParams {
            gamma0: 0.0,
            ..PhysicalParams::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn slot_box_free_volume() {
        let slot = SlotGeometry::default();
        let b = SimulationBox::around_slot(slot, 150e-9, 1e-6);
        b.validate().unwrap();
        let full = b.bounds.volume();
        let ridges = 2.0 * 300e-9 * 250e-9 * 1e-6;
        assert_relative_eq!(b.free_volume(), full - ridges, max_relative = 1e-12);
        assert!(b.in_dielectric(&Vec3::new(100e-9, 100e-9, 0.5e-6)));
        assert!(!b.in_dielectric(&Vec3::new(0.0, 100e-9, 0.5e-6)));
    }

    #[test]
    fn box_rejects_outside_dielectric() {
        let mut b = SimulationBox::free_space([1.0, 1.0, 1.0]);
        b.dielectrics.push(Aabb::new([0.5, 0.5, 0.5], [1.5, 0.9, 0.9]));
        assert!(b.validate().is_err());
        let full = SimulationBox {
            dielectrics: vec![Aabb::new([0.0; 3], [1.0; 3])],
            ..SimulationBox::free_space([1.0, 1.0, 1.0])
        };
        assert!(full.validate().is_err());
    }

    #[test]
    fn atom_state_invariants() {
        let mut a = AtomState::ground(Vec3::zeros(), Vec3::zeros());
        assert!(a.is_physical(1e-9));
        a.sigma_ee = 0.4;
        a.sigma_gg = 0.6;
        a.sigma_ge = Complex64::new(0.3, 0.2);
        assert!(a.is_physical(1e-9));
        a.sigma_ge = Complex64::new(0.6, 0.0);
        assert!(!a.is_physical(1e-9));
        a.reset_spin();
        assert_eq!(a.sigma_ee, 0.0);
        assert_eq!(a.inversion(), -1.0);
    }

    proptest::proptest! {
        #[test]
        fn normalized_density_roundtrip(log_n in 15.0f64..25.0, log_k in 5.0f64..8.0) {
            let n = 10f64.powf(log_n);
            let k = 10f64.powf(log_k);
            let via_r = (k * mean_distance(n).unwrap()).powi(-3);
            let direct = normalized_density(n, k).unwrap();
            proptest::prop_assert!(((via_r - direct) / direct).abs() < 1e-12);
            let back = density_from_normalized(direct, k).unwrap();
            proptest::prop_assert!(((back - n) / n).abs() < 1e-12);
        }
    }
}
