//! Exact master-equation solver for a handful of stationary atoms, and the
//! closed-form single-atom scattering amplitudes.
//!
//! Basis states are bit strings: bit m set means atom m is excited.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::CouplingMatrices;

pub const MAX_ATOMS: usize = 6;

/// Largest system solved through the dense Liouvillian.
pub const MAX_DIRECT_ATOMS: usize = 3;

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };
const I: C = C { re: 0.0, im: 1.0 };

/// Joint density matrix of N two-level atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub n_atoms: usize,
    pub rho: DMatrix<C>,
}

impl DensityMatrix {
    pub fn ground(n_atoms: usize) -> Self {
        let d = 1 << n_atoms;
        let mut rho = DMatrix::from_element(d, d, ZERO);
        rho[(0, 0)] = C::new(1.0, 0.0);
        Self { n_atoms, rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C {
        self.rho.trace()
    }

    /// ⟨σ_ee⟩ of atom m.
    pub fn sigma_ee(&self, m: usize) -> f64 {
        (0..self.dim())
            .filter(|s| s & (1 << m) != 0)
            .map(|s| self.rho[(s, s)].re)
            .sum()
    }

    /// ⟨σ_ge⟩ = Tr(ρ·|g⟩⟨e|) of atom m.
    pub fn sigma_ge(&self, m: usize) -> C {
        let bit = 1 << m;
        (0..self.dim())
            .filter(|s| s & bit != 0)
            .map(|s| self.rho[(s, s ^ bit)])
            .sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint())
            .iter()
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Master-equation generator dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ Γ_mn σ_n ρ σ_m†.
pub struct Lindblad {
    n: usize,
    h_eff: DMatrix<C>,
    gamma: DMatrix<f64>,
    rate_scale: f64,
}

fn lowering(n: usize, m: usize) -> DMatrix<C> {
    let d = 1 << n;
    let bit = 1 << m;
    let mut op = DMatrix::from_element(d, d, ZERO);
    for s in 0..d {
        if s & bit != 0 {
            op[(s ^ bit, s)] = C::new(1.0, 0.0);
        }
    }
    op
}

impl Lindblad {
    /// H = Σ Δ0·σee − Σ(Ω_m·σeg + h.c.) + Σ_{m≠n} J_mn·σeg^m·σge^n with
    /// Δ0 = ω_a − ω_L and the dissipator taken from `couplings.gamma`.
    pub fn new(couplings: &CouplingMatrices, drives: &[C], detuning0: f64) -> Result<Self> {
        let n = drives.len();
        if n == 0 || n > MAX_ATOMS {
            return Err(Error::domain(format!("oracle supports 1..={MAX_ATOMS} atoms, got {n}")));
        }
        if couplings.j.nrows() != n {
            return Err(Error::domain("coupling matrices and drives disagree on N"));
        }
        let d = 1 << n;
        let low: Vec<DMatrix<C>> = (0..n).map(|m| lowering(n, m)).collect();
        let mut h = DMatrix::from_element(d, d, ZERO);
        for m in 0..n {
            let raise = low[m].adjoint();
            h += (&raise * &low[m]) * C::new(detuning0, 0.0);
            h -= &raise * drives[m] + &low[m] * drives[m].conj();
            for p in 0..n {
                if p != m && couplings.j[(m, p)] != 0.0 {
                    h += (&raise * &low[p]) * C::new(couplings.j[(m, p)], 0.0);
                }
            }
        }
        let mut k = DMatrix::from_element(d, d, ZERO);
        for m in 0..n {
            for p in 0..n {
                let g = couplings.gamma[(m, p)];
                if g != 0.0 {
                    k += (low[m].adjoint() * &low[p]) * C::new(0.5 * g, 0.0);
                }
            }
        }
        let h_eff = h - k * I;
        let rate_scale = couplings.gamma.diagonal().max().max(f64::MIN_POSITIVE);
        Ok(Self {
            n,
            h_eff,
            gamma: couplings.gamma.clone(),
            rate_scale,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    /// Apply the generator to any operator (not only density matrices).
    pub fn apply(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let mut out = (&self.h_eff * rho - rho * self.h_eff.adjoint()) * (-I);
        let d = rho.nrows();
        for m in 0..self.n {
            let bm = 1usize << m;
            for p in 0..self.n {
                let g = self.gamma[(m, p)];
                if g == 0.0 {
                    continue;
                }
                let bp = 1usize << p;
                // (σ_p ρ σ_m†)[s, t] = ρ[s|p, t|m] when bit p of s and bit m of t are clear.
                for s in (0..d).filter(|s| s & bp == 0) {
                    for t in (0..d).filter(|t| t & bm == 0) {
                        out[(s, t)] += rho[(s | bp, t | bm)] * g;
                    }
                }
            }
        }
        out
    }

    /// Dense superoperator acting on column-stacked ρ.
    pub fn superoperator(&self) -> DMatrix<C> {
        let d = 1 << self.n;
        let mut l = DMatrix::from_element(d * d, d * d, ZERO);
        let mut basis = DMatrix::from_element(d, d, ZERO);
        for col in 0..d * d {
            let (i, j) = (col % d, col / d);
            basis[(i, j)] = C::new(1.0, 0.0);
            let img = self.apply(&basis);
            basis[(i, j)] = ZERO;
            for (row, v) in img.iter().enumerate() {
                l[(row, col)] = *v;
            }
        }
        l
    }
}

/// How to reach the steady state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateMethod {
    /// Solve L(δρ) = −L(|g⟩⟨g|) with Tr δρ = 0. Keeps full relative precision
    /// at vanishing drive. Requires N ≤ [`MAX_DIRECT_ATOMS`].
    Direct,
    /// RK4 to 50/Γ and beyond until ‖dρ/dt‖ < 1e-10·Γ.
    Integrate,
}

/// Steady state of the master equation.
pub fn lindblad_steady_state(
    couplings: &CouplingMatrices,
    drives: &[C],
    detuning0: f64,
    method: SteadyStateMethod,
) -> Result<DensityMatrix> {
    let l = Lindblad::new(couplings, drives, detuning0)?;
    match method {
        SteadyStateMethod::Direct => direct(&l),
        SteadyStateMethod::Integrate => integrate(&l, 50.0 / l.rate_scale, 1e-10),
    }
}

fn direct(l: &Lindblad) -> Result<DensityMatrix> {
    if l.n > MAX_DIRECT_ATOMS {
        return Err(Error::domain(format!(
            "direct solve limited to {MAX_DIRECT_ATOMS} atoms; integrate instead"
        )));
    }
    let d = 1 << l.n;
    let ground = DensityMatrix::ground(l.n);
    let mut sup = l.superoperator();
    let rhs0 = l.apply(&ground.rho);
    let mut rhs = DVector::from_iterator(d * d, rhs0.iter().map(|v| -*v));
    // Replace the first row (the ρ00 balance) by the trace condition Tr δρ = 0.
    for c in 0..d * d {
        sup[(0, c)] = ZERO;
    }
    for k in 0..d {
        sup[(0, k * d + k)] = C::new(1.0, 0.0);
    }
    rhs[0] = ZERO;
    let delta = sup
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SteadyState("Liouvillian is singular: steady state not unique".into()))?;
    let mut rho = ground.rho;
    for (k, v) in delta.iter().enumerate() {
        rho[(k % d, k / d)] += *v;
    }
    let rho = (&rho + rho.adjoint()) * C::new(0.5, 0.0);
    Ok(DensityMatrix { n_atoms: l.n, rho })
}

fn integrate(l: &Lindblad, t_min: f64, tol: f64) -> Result<DensityMatrix> {
    let norm = |m: &DMatrix<C>| m.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let hscale = norm(&l.h_eff).max(l.rate_scale);
    let dt = 0.05 / hscale;
    let mut rho = DensityMatrix::ground(l.n).rho;
    let mut t = 0.0;
    let t_max = 1e4 * t_min;
    loop {
        let k1 = l.apply(&rho);
        if t >= t_min && norm(&k1) < tol * l.rate_scale {
            break;
        }
        if t > t_max {
            return Err(Error::SteadyState(format!(
                "no convergence by t = {t:.3e} s (‖dρ/dt‖ = {:.3e})",
                norm(&k1)
            )));
        }
        let h = C::new(dt, 0.0);
        let half = C::new(0.5 * dt, 0.0);
        let k2 = l.apply(&(&rho + &k1 * half));
        let k3 = l.apply(&(&rho + &k2 * half));
        let k4 = l.apply(&(&rho + &k3 * h));
        rho += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(dt / 6.0, 0.0);
        t += dt;
    }
    Ok(DensityMatrix { n_atoms: l.n, rho })
}

/// Evolve from the ground state for a fixed time with step `dt` and return
/// the trajectory end point; used to check trace and Hermiticity preservation.
pub fn evolve(l: &Lindblad, t_end: f64, dt: f64, mut on_step: impl FnMut(&DMatrix<C>)) -> DMatrix<C> {
    let mut rho = DensityMatrix::ground(l.n).rho;
    let steps = (t_end / dt).ceil() as usize;
    let h = C::new(dt, 0.0);
    let half = C::new(0.5 * dt, 0.0);
    for _ in 0..steps {
        let k1 = l.apply(&rho);
        let k2 = l.apply(&(&rho + &k1 * half));
        let k3 = l.apply(&(&rho + &k2 * half));
        let k4 = l.apply(&(&rho + &k3 * h));
        rho += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(dt / 6.0, 0.0);
        on_step(&rho);
    }
    rho
}

/// Steady coherence and scattering amplitudes of one atom on the guide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scattering {
    pub coherence: C,
    pub reflection: C,
    pub transmission: C,
}

/// Single atom coupled with strength g0 to a guide of phase velocity v_p.
/// Γ_WG = 4π·g0²/v_p and PF·Γ0 = Γ1 + Γ_WG; the incident field is 1.
pub fn single_atom_scattering(delta: f64, g0: f64, v_p: f64, gamma0: f64, gamma1: f64) -> Result<Scattering> {
    let gamma_wg = 4.0 * PI * g0 * g0 / v_p;
    let total = gamma1 + gamma_wg;
    if !(total > 0.0) || !(gamma0 > 0.0) || !(v_p > 0.0) {
        return Err(Error::domain("total decay PF·Γ0 must be > 0"));
    }
    let coherence = I * g0 * (2.0 * PI).sqrt() / C::new(0.5 * total, delta);
    let reflection = -gamma_wg / C::new(total, 2.0 * delta);
    Ok(Scattering {
        coherence,
        reflection,
        transmission: 1.0 + reflection,
    })
}

/// g0 that produces a given Purcell factor at Γ1 = Γ0.
pub fn g0_for_purcell(pf: f64, gamma0: f64, v_p: f64) -> f64 {
    ((pf - 1.0) * gamma0 * v_p / (4.0 * PI)).sqrt()
}

/// Two atoms side by side at kR = 0.2 in free space: (Ω0/Γ0, probe detuning/Γ0, σ_ee).
pub fn two_atom_reference_rows() -> Result<Vec<(f64, f64, f64)>> {
    use crate::greens::{coupling_matrices, CouplingOptions};
    use crate::mode::ModeProfile;
    use crate::params::{PhysicalParams, Vec3};
    let p = PhysicalParams {
        n_eff: 1.0,
        ..PhysicalParams::default()
    };
    let mode = ModeProfile::uniform(&p);
    let pos = [Vec3::zeros(), Vec3::new(0.0, 0.2 / p.k(), 0.0)];
    let c = coupling_matrices(&pos, p.k(), &mode, p.gamma0, &CouplingOptions::new(p.lambda_probe))?;
    let j12 = c.j[(0, 1)];
    let mut rows = Vec::new();
    for &omega in &[1e-1, 1e-2, 1e-3] {
        for &probe in &[0.0, j12 / p.gamma0, 2.0 * j12 / p.gamma0] {
            let drives = [C::new(omega * p.gamma0, 0.0); 2];
            let rho = lindblad_steady_state(&c, &drives, -probe * p.gamma0, SteadyStateMethod::Direct)?;
            rows.push((omega, probe, rho.sigma_ee(0)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{coupling_matrices, CouplingOptions};
    use crate::mode::ModeProfile;
    use crate::params::{PhysicalParams, Vec3};

    fn params() -> PhysicalParams {
        PhysicalParams {
            n_eff: 1.0,
            ..PhysicalParams::default()
        }
    }

    fn couplings(pos: &[Vec3], interactions: bool) -> CouplingMatrices {
        let p = params();
        let opts = CouplingOptions {
            interactions,
            ..CouplingOptions::new(p.lambda_probe)
        };
        coupling_matrices(pos, p.k(), &ModeProfile::uniform(&p), p.gamma0, &opts).unwrap()
    }

    fn two_level(omega: f64, delta: f64, gamma: f64) -> f64 {
        let s = 8.0 * omega * omega / (gamma * gamma);
        0.5 * s / (1.0 + s + (2.0 * delta / gamma).powi(2))
    }

    #[test]
    fn undriven_atom_is_ground() {
        let c = couplings(&[Vec3::zeros()], true);
        for m in [SteadyStateMethod::Direct, SteadyStateMethod::Integrate] {
            let rho = lindblad_steady_state(&c, &[ZERO], 0.0, m).unwrap();
            assert!((rho.rho[(0, 0)].re - 1.0).abs() < 1e-12);
            assert!(rho.sigma_ee(0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_atom_closed_form() {
        let g = params().gamma0;
        let c = couplings(&[Vec3::zeros()], true);
        for &(om, det) in &[(0.01, 0.0), (0.01, 1.3), (0.3, -0.7), (2.0, 0.4)] {
            let rho = lindblad_steady_state(&c, &[C::new(om * g, 0.0)], det * g, SteadyStateMethod::Direct).unwrap();
            let exact = two_level(om * g, det * g, g);
            assert!(
                (rho.sigma_ee(0) - exact).abs() <= 1e-10 * exact.max(1e-12),
                "{om} {det}"
            );
        }
        let rho = lindblad_steady_state(&c, &[C::new(0.01 * g, 0.0)], 0.0, SteadyStateMethod::Integrate).unwrap();
        let exact = two_level(0.01 * g, 0.0, g);
        assert!((rho.sigma_ee(0) / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uncoupled_pair_factorizes() {
        let g = params().gamma0;
        let pos = [Vec3::zeros(), Vec3::new(0.0, 1e-7, 0.0)];
        let c = couplings(&pos, false);
        let drives = [C::new(0.2 * g, 0.0), C::new(0.05 * g, 0.1 * g)];
        let rho = lindblad_steady_state(&c, &drives, 0.5 * g, SteadyStateMethod::Direct).unwrap();
        for m in 0..2 {
            let exact = two_level(drives[m].norm() * g / g, 0.5 * g, g);
            assert!((rho.sigma_ee(m) - exact).abs() < 1e-10);
        }
        let both = rho.rho[(3, 3)].re;
        assert!((both - rho.sigma_ee(0) * rho.sigma_ee(1)).abs() < 1e-10);
    }

    #[test]
    fn evolution_preserves_trace_and_hermiticity() {
        let g = params().gamma0;
        let k = params().k();
        let pos = [
            Vec3::zeros(),
            Vec3::new(0.0, 0.3 / k, 0.0),
            Vec3::new(0.2 / k, 0.1 / k, 0.4 / k),
        ];
        let c = couplings(&pos, true);
        let drives = [C::new(1.0 * g, 0.0), C::new(0.5 * g, 0.5 * g), C::new(0.0, 2.0 * g)];
        let l = Lindblad::new(&c, &drives, 0.3 * g).unwrap();
        evolve(&l, 2.0 / g, 2e-3 / g, |rho| {
            let dm = DensityMatrix {
                n_atoms: 3,
                rho: rho.clone(),
            };
            assert!((dm.trace() - 1.0).norm() < 1e-10);
            assert!(dm.hermiticity_error() < 1e-10);
        });
    }

    #[test]
    fn integrate_matches_direct_for_coupled_pair() {
        let g = params().gamma0;
        let k = params().k();
        let c = couplings(&[Vec3::zeros(), Vec3::new(0.0, 0.5 / k, 0.0)], true);
        let drives = [C::new(0.5 * g, 0.0); 2];
        let a = lindblad_steady_state(&c, &drives, 0.2 * g, SteadyStateMethod::Direct).unwrap();
        let b = lindblad_steady_state(&c, &drives, 0.2 * g, SteadyStateMethod::Integrate).unwrap();
        assert!((a.sigma_ee(0) - b.sigma_ee(0)).abs() < 1e-8);
        assert!(a.min_eigenvalue() > -1e-10);
        assert!((a.trace() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn scattering_identities() {
        let g0 = 2.0 * PI * 1.89e6;
        let vp = 3e8 / 2.53;
        let s = single_atom_scattering(0.0, 0.0, vp, g0, g0).unwrap();
        assert_eq!(s.reflection, ZERO);
        assert_eq!(s.transmission, C::new(1.0, 0.0));
        let g = g0_for_purcell(35.0, g0, vp);
        let s = single_atom_scattering(0.0, g, vp, g0, g0).unwrap();
        assert!((s.transmission.norm() - 1.0 / 35.0).abs() < 1e-12);
        assert!((s.transmission.norm() - 0.02857).abs() < 1e-5);
        // |r| falls to 1/√2 of its peak at δ = ±PF·Γ0/2.
        let peak = s.reflection.norm();
        let edge = single_atom_scattering(17.5 * g0, g, vp, g0, g0)
            .unwrap()
            .reflection
            .norm();
        assert!((edge / peak - 0.5f64.sqrt()).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn scattering_unitarity(delta in -1e3f64..1e3, pf in 1.0f64..100.0) {
            let g0 = 1.0;
            let vp = 1e8;
            let g = g0_for_purcell(pf, g0, vp);
            let s = single_atom_scattering(delta, g, vp, g0, g0).unwrap();
            proptest::prop_assert!(s.reflection.norm_sqr() + s.transmission.norm_sqr() <= 1.0 + 1e-12);
            proptest::prop_assert!((1.0 + s.reflection - s.transmission).norm() <= 1e-14);
        }
    }
}
