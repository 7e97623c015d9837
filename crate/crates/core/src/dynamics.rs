//! Mean-field Bloch dynamics of the moving ensemble and spectrum accumulation.
//!
//! A trial samples one set of trajectories and drives every detuning of the
//! grid and every coupling variant along it, so that variants (for example
//! interacting against non-interacting) see identical atoms and their
//! difference carries no trajectory noise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{fit_lineshape, fit_lorentzian, FitInit, FitOptions};
use crate::ensemble::{advance_positions, sample_atoms, trial_streams, EnsembleConfig};
use crate::error::{Error, Result};
use crate::greens::{fill_kernel, waveguide_weights, CouplingMatrices, CouplingOptions};
use crate::mode::ModeProfile;
use crate::params::{AtomState, LaserDrive, PhysicalParams, SimulationBox, Vec3};
use crate::spectrum::{Spectrum, SpectrumMeta};

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };
const ZERO: C = C { re: 0.0, im: 0.0 };

/// Largest dt·Γ accepted by the single-atom step.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Ω_eff^m = Ω0(x_m, y_m)·e^{iβ0 z_m} + Σ_{p≠m} (−J_mp + iΓ_mp/2)·σ_ge^p.
pub fn effective_rabi(
    m: usize,
    atoms: &[AtomState],
    couplings: &CouplingMatrices,
    mode: &ModeProfile,
    drive: &LaserDrive,
) -> Result<C> {
    let a = &atoms[m];
    let mut om = drive_term(mode, &a.position, drive.omega0_peak)?;
    for (p, other) in atoms.iter().enumerate() {
        if p != m {
            om += C::new(-couplings.j[(m, p)], 0.5 * couplings.gamma[(m, p)]) * other.sigma_ge;
        }
    }
    Ok(om)
}

fn drive_term(mode: &ModeProfile, pos: &Vec3, omega0: f64) -> Result<C> {
    let amp = mode.amplitude(pos.x, pos.y)?;
    Ok(C::from_polar(omega0 * amp, mode.beta0() * pos.z))
}

/// Bloch right-hand side for one atom at fixed Ω_eff.
fn bloch_rhs(sge: C, see: f64, om: C, delta: f64, gamma: f64) -> (C, f64) {
    let dsge = -C::new(0.5 * gamma, delta) * sge - I * om * (2.0 * see - 1.0);
    let dsee = -2.0 * (om * sge.conj()).im - gamma * see;
    (dsge, dsee)
}

/// One RK4 step of the mean-field Bloch equations at fixed Ω_eff, with the
/// populations clamped to [0, 1] afterwards.
pub fn bloch_step(state: &AtomState, omega_eff: C, delta_total: f64, gamma_total: f64, dt: f64) -> Result<AtomState> {
    if !(dt > 0.0) || !(dt * gamma_total < STABILITY_LIMIT) {
        return Err(Error::Integrator(format!(
            "dt·Γ = {:.3e} exceeds {STABILITY_LIMIT}; reduce dt",
            dt * gamma_total
        )));
    }
    let f = |s: C, e: f64| bloch_rhs(s, e, omega_eff, delta_total, gamma_total);
    let (s0, e0) = (state.sigma_ge, state.sigma_ee);
    let (k1s, k1e) = f(s0, e0);
    let (k2s, k2e) = f(s0 + k1s * (0.5 * dt), e0 + 0.5 * dt * k1e);
    let (k3s, k3e) = f(s0 + k2s * (0.5 * dt), e0 + 0.5 * dt * k2e);
    let (k4s, k4e) = f(s0 + k3s * dt, e0 + dt * k3e);
    let mut out = *state;
    out.sigma_ge = s0 + (k1s + k2s * 2.0 + k3s * 2.0 + k4s) * (dt / 6.0);
    out.sigma_ee = (e0 + dt / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)).clamp(0.0, 1.0);
    out.sigma_gg = 1.0 - out.sigma_ee;
    Ok(out)
}

/// Mean-field steady state of stationary atoms: returns (σ_ge, σ_ee) per atom.
///
/// `kernel` is C = −J + iΓ/2 (row-major, zero diagonal), `delta` the per-atom
/// Δ = ω_a − ω_L and `decay` the per-atom total decay. Newton iteration from
/// the weak-drive linear solution; when that solution is far from linear the
/// drive is ramped up from a weak value and the branch followed.
pub fn mean_field_steady_state(kernel: &[C], drives: &[C], delta: &[f64], decay: &[f64]) -> Result<(Vec<C>, Vec<f64>)> {
    let n = drives.len();
    if kernel.len() != n * n || delta.len() != n || decay.len() != n {
        return Err(Error::domain("steady state inputs disagree on N"));
    }
    // Work in units of the largest decay so the unknowns and residuals are O(1).
    let unit = decay.iter().cloned().fold(0.0, f64::max);
    if !(unit > 0.0) {
        return Err(Error::domain("steady state needs a positive decay rate"));
    }
    let sys = MeanField {
        n,
        k: kernel.iter().map(|c| c / unit).collect(),
        dl: delta.iter().map(|d| d / unit).collect(),
        g: decay.iter().map(|d| d / unit).collect(),
    };
    let om: Vec<C> = drives.iter().map(|c| c / unit).collect();

    let a = DMatrix::from_fn(n, n, |m, p| {
        let diag = if m == p {
            C::new(0.5 * sys.g[m], sys.dl[m])
        } else {
            ZERO
        };
        diag - I * sys.k[m * n + p]
    });
    let rhs = DVector::from_iterator(n, om.iter().map(|o| I * o));
    let lin = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SteadyState("linear response matrix is singular".into()))?;
    let lin_max = lin.iter().fold(0.0f64, |a, s| a.max(s.norm()));

    let mut x = vec![0.0; 3 * n];
    let mut level = if lin_max > 0.01 { 0.01 / lin_max } else { 1.0 };
    for m in 0..n {
        x[m] = level * lin[m].re;
        x[n + m] = level * lin[m].im;
        x[2 * n + m] = (level * lin[m]).norm_sqr();
    }
    loop {
        let scaled: Vec<C> = om.iter().map(|o| o * level).collect();
        sys.newton(&mut x, &scaled)?;
        if level >= 1.0 {
            break;
        }
        let next = (level * 1.5).min(1.0);
        let r = next / level;
        for v in &mut x[..2 * n] {
            *v *= r;
        }
        level = next;
    }
    let sge = (0..n).map(|m| C::new(x[m], x[n + m])).collect();
    let see = (0..n).map(|m| x[2 * n + m].clamp(0.0, 1.0)).collect();
    Ok((sge, see))
}

/// Mean-field equations in units of the largest decay.
struct MeanField {
    n: usize,
    k: Vec<C>,
    dl: Vec<f64>,
    g: Vec<f64>,
}

impl MeanField {
    /// Real residual over x = [Re σ, Im σ, σ_ee].
    fn residual(&self, om: &[C], x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for m in 0..n {
            let s = C::new(x[m], x[n + m]);
            let e = x[2 * n + m];
            let mut field = om[m];
            for p in 0..n {
                field += self.k[m * n + p] * C::new(x[p], x[n + p]);
            }
            let (ds, de) = bloch_rhs(s, e, field, self.dl[m], self.g[m]);
            out[m] = ds.re;
            out[n + m] = ds.im;
            out[2 * n + m] = de;
        }
    }

    fn newton(&self, x: &mut [f64], om: &[C]) -> Result<()> {
        let n = self.n;
        let dim = 3 * n;
        // Coherence residuals scale like Ω, population residuals like Ω².
        let ws = om.iter().fold(0.0f64, |a, o| a.max(o.norm())).clamp(1e-150, 1.0);
        let norm = |v: &[f64]| {
            (0..dim)
                .map(|i| {
                    let w = if i < 2 * n { ws } else { ws * ws };
                    (v[i] / w).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        };
        let mut f = vec![0.0; dim];
        let mut fp = vec![0.0; dim];
        let mut fm = vec![0.0; dim];
        let mut trial = vec![0.0; dim];
        let mut jac = DMatrix::zeros(dim, dim);
        self.residual(om, x, &mut f);
        for _ in 0..100 {
            let fnorm = norm(&f);
            if fnorm <= 1e-13 {
                break;
            }
            // The residual is quadratic, so central differences give the exact Jacobian.
            let h = 1e-3 * ws;
            for c in 0..dim {
                let keep = x[c];
                x[c] = keep + h;
                self.residual(om, x, &mut fp);
                x[c] = keep - h;
                self.residual(om, x, &mut fm);
                x[c] = keep;
                for r in 0..dim {
                    jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
                }
            }
            let step = jac
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(&f))
                .ok_or_else(|| Error::SteadyState("singular Newton Jacobian".into()))?;
            let mut lambda = 1.0;
            loop {
                for i in 0..dim {
                    trial[i] = x[i] - lambda * step[i];
                }
                self.residual(om, &trial, &mut fp);
                if norm(&fp) < fnorm || lambda < 1e-6 {
                    break;
                }
                lambda *= 0.5;
            }
            if lambda < 1e-6 {
                break;
            }
            x.copy_from_slice(&trial);
            f.copy_from_slice(&fp);
        }
        let r = norm(&f);
        if r <= 1e-9 {
            Ok(())
        } else {
            Err(Error::SteadyState(format!("scaled residual {r:.3e} after Newton")))
        }
    }
}

/// Where the atoms come from in each trial.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Sampled thermally over the free volume.
    Random,
    /// Given positions, at rest.
    Fixed(Vec<Vec3>),
}

/// How each detuning point is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Integrate and average σ_ee over atoms and time steps.
    TimeAverage,
    /// Mean-field steady state per trial; only for atoms at rest.
    SteadyState,
}

/// Everything one spectrum computation needs.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: PhysicalParams,
    pub bx: SimulationBox,
    pub mode: ModeProfile,
    pub ensemble: EnsembleConfig,
    /// Peak Rabi frequency Ω0 (rad/s).
    pub omega0_peak: f64,
    /// Coupling variants driven along the same trajectories.
    pub variants: Vec<CouplingOptions>,
    pub placement: Placement,
    pub method: SpectrumMethod,
    /// Fraction of the leading steps left out of the average.
    pub discard_fraction: f64,
    /// Rebuild the coupling kernel every this many steps.
    pub refresh_stride: usize,
    /// Apply the propagation phase e^{iβ0 z} to the drive; off for a
    /// spatially uniform drive.
    pub drive_phase: bool,
}

impl Simulation {
    pub fn n_atoms(&self) -> usize {
        match &self.placement {
            Placement::Random => self.ensemble.n_atoms,
            Placement::Fixed(p) => p.len(),
        }
    }

    /// Same scenario at another density; the atom count follows the free volume.
    pub fn at_density(&self, density: f64) -> Result<Simulation> {
        let mut s = self.clone();
        s.ensemble.density = density;
        s.ensemble.n_atoms = EnsembleConfig::atoms_for_density(density, &s.bx)?;
        Ok(s)
    }

    /// Same density in a free-space box `cross` × `cross` × `length`.
    pub fn with_free_box(&self, cross: f64, length: f64) -> Result<Simulation> {
        let mut s = self.clone();
        s.bx = SimulationBox::free_space([cross, cross, length]);
        s.ensemble.n_atoms = EnsembleConfig::atoms_for_density(s.ensemble.density, &s.bx)?;
        Ok(s)
    }

    pub fn is_static(&self) -> bool {
        matches!(self.placement, Placement::Fixed(_)) || self.ensemble.temperature == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.bx.validate()?;
        self.ensemble.validate(&self.bx)?;
        if self.variants.is_empty() {
            return Err(Error::config("variants", "at least one coupling variant is required"));
        }
        if !(self.omega0_peak.is_finite() && self.omega0_peak >= 0.0) {
            return Err(Error::config("drive", "Rabi frequency must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.discard_fraction) {
            return Err(Error::config("dynamics.discard_fraction", "must lie in [0, 1)"));
        }
        if self.refresh_stride == 0 {
            return Err(Error::config("dynamics.refresh_stride", "must be >= 1"));
        }
        if let Placement::Fixed(p) = &self.placement {
            if p.is_empty() {
                return Err(Error::config("placement", "fixed placement needs at least one atom"));
            }
            if let Some(i) = p.iter().position(|q| !self.bx.is_free(q)) {
                return Err(Error::config(
                    "placement",
                    format!("atom {i} is not in the free volume"),
                ));
            }
        }
        if self.method == SpectrumMethod::SteadyState && !self.is_static() {
            return Err(Error::config(
                "dynamics.method",
                "steady-state evaluation needs atoms at rest (fixed placement or T = 0)",
            ));
        }
        let gmax = self.params.gamma0 * (self.params.nonguided_decay + self.mode.pf_max() - 1.0);
        if self.method == SpectrumMethod::TimeAverage && !(self.ensemble.dt * gmax < STABILITY_LIMIT) {
            return Err(Error::config(
                "ensemble.dt",
                format!("dt·Γ_max = {:.3e} exceeds {STABILITY_LIMIT}", self.ensemble.dt * gmax),
            ));
        }
        Ok(())
    }
}

/// Per-variant kernel and decay for the current positions.
struct Couplings {
    kernel: Vec<C>,
    decay: Vec<f64>,
    coupled: bool,
    /// 2·max row sum of |C|, entering the substep count.
    stiffness: f64,
}

impl Couplings {
    fn new(n: usize, opts: &CouplingOptions) -> Self {
        Self {
            kernel: vec![ZERO; n * n],
            decay: vec![0.0; n],
            coupled: opts.interactions && n > 1,
            stiffness: 0.0,
        }
    }

    fn refresh(&mut self, pos: &[Vec3], weights: &[f64], sim: &Simulation, opts: &CouplingOptions) {
        let n = pos.len();
        fill_kernel(
            pos,
            weights,
            sim.params.k(),
            sim.mode.beta0(),
            sim.params.gamma0,
            opts,
            &mut self.kernel,
            &mut self.decay,
        );
        self.stiffness = if self.coupled {
            2.0 * (0..n)
                .map(|m| self.kernel[m * n..(m + 1) * n].iter().map(|c| c.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        } else {
            0.0
        };
    }
}

/// Spin arrays of one (variant, detuning) pair.
struct Spins {
    sge: Vec<C>,
    see: Vec<f64>,
}

/// Coupled RK4 scratch.
struct Work {
    k: [Vec<C>; 4],
    e: [Vec<f64>; 4],
    s_tmp: Vec<C>,
    e_tmp: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![ZERO; n]),
            e: std::array::from_fn(|_| vec![0.0; n]),
            s_tmp: vec![ZERO; n],
            e_tmp: vec![0.0; n],
        }
    }
}

fn coupled_rhs(c: &Couplings, drive: &[C], delta: &[f64], sge: &[C], see: &[f64], ds: &mut [C], de: &mut [f64]) {
    let n = sge.len();
    for m in 0..n {
        let mut om = drive[m];
        if c.coupled {
            let row = &c.kernel[m * n..(m + 1) * n];
            for (kp, sp) in row.iter().zip(sge) {
                om += kp * sp;
            }
        }
        let (a, b) = bloch_rhs(sge[m], see[m], om, delta[m], c.decay[m]);
        ds[m] = a;
        de[m] = b;
    }
}

/// Advance all atoms of one (variant, detuning) by `dt` with coupled RK4 in
/// `substeps` equal pieces. Ω_eff is re-evaluated at every stage.
fn coupled_step(c: &Couplings, drive: &[C], delta: &[f64], spins: &mut Spins, dt: f64, substeps: usize, w: &mut Work) {
    let h = dt / substeps as f64;
    let n = spins.sge.len();
    for _ in 0..substeps {
        for stage in 0..4 {
            let frac = match stage {
                0 => 0.0,
                3 => h,
                _ => 0.5 * h,
            };
            if stage == 0 {
                w.s_tmp.copy_from_slice(&spins.sge);
                w.e_tmp.copy_from_slice(&spins.see);
            } else {
                for m in 0..n {
                    w.s_tmp[m] = spins.sge[m] + w.k[stage - 1][m] * frac;
                    w.e_tmp[m] = spins.see[m] + w.e[stage - 1][m] * frac;
                }
            }
            let (ks, es) = (&mut w.k[stage], &mut w.e[stage]);
            coupled_rhs(c, drive, delta, &w.s_tmp, &w.e_tmp, ks, es);
        }
        for m in 0..n {
            spins.sge[m] += (w.k[0][m] + w.k[1][m] * 2.0 + w.k[2][m] * 2.0 + w.k[3][m]) * (h / 6.0);
            let e = spins.see[m] + h / 6.0 * (w.e[0][m] + 2.0 * w.e[1][m] + 2.0 * w.e[2][m] + w.e[3][m]);
            spins.see[m] = e.clamp(0.0, 1.0);
        }
    }
}

fn substeps_for(c: &Couplings, drive: &[C], delta: &[f64], dt: f64) -> usize {
    let local = drive
        .iter()
        .zip(delta)
        .zip(&c.decay)
        .map(|((o, d), g)| d.abs() + g + 2.0 * o.norm())
        .fold(0.0, f64::max);
    ((local + c.stiffness) * dt).ceil().max(1.0) as usize
}

fn initial_atoms(sim: &Simulation, trial: u64) -> Result<(Vec<AtomState>, Vec<rand_chacha::ChaCha8Rng>)> {
    let n = sim.n_atoms();
    let mut streams = trial_streams(sim.ensemble.seed, trial, n);
    let atoms = match &sim.placement {
        Placement::Random => {
            let mut cfg = sim.ensemble.clone();
            cfg.n_atoms = n;
            sample_atoms(&cfg, &sim.bx, &mut streams)?
        }
        Placement::Fixed(p) => p.iter().map(|q| AtomState::ground(*q, Vec3::zeros())).collect(),
    };
    Ok((atoms, streams))
}

/// One trial: mean σ_ee per [variant][detuning].
fn run_trial(sim: &Simulation, trial: u64, probe: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (mut atoms, mut streams) = initial_atoms(sim, trial)?;
    let n = atoms.len();
    let nv = sim.variants.len();
    let nd = probe.len();
    let mut couplings: Vec<Couplings> = sim.variants.iter().map(|o| Couplings::new(n, o)).collect();
    let mut pos: Vec<Vec3> = atoms.iter().map(|a| a.position).collect();
    let mut weights = waveguide_weights(&pos, &sim.mode);
    let beta0 = sim.mode.beta0();
    let phase_k = if sim.drive_phase { beta0 } else { 0.0 };
    for (c, o) in couplings.iter_mut().zip(&sim.variants) {
        c.refresh(&pos, &weights, sim, o);
    }
    let mut drive: Vec<C> = pos
        .iter()
        .map(|p| C::from_polar(sim.omega0_peak * sim.mode.amplitude_or_zero(p.x, p.y), phase_k * p.z))
        .collect();

    if sim.method == SpectrumMethod::SteadyState {
        let mut out = vec![vec![0.0; nd]; nv];
        let mut delta = vec![0.0; n];
        for (v, c) in couplings.iter().enumerate() {
            for (d, &pr) in probe.iter().enumerate() {
                delta.iter_mut().for_each(|x| *x = -pr);
                let (_, see) = mean_field_steady_state(&c.kernel, &drive, &delta, &c.decay)?;
                out[v][d] = see.iter().sum::<f64>() / n as f64;
            }
        }
        return Ok(out);
    }

    let steps = sim.ensemble.steps();
    let dt = sim.ensemble.dt;
    let discard = (sim.discard_fraction * steps as f64).floor() as usize;
    let sigma_v = sim.ensemble.sigma_v();
    let moving = atoms.iter().any(|a| a.velocity != Vec3::zeros());
    let mut spins: Vec<Spins> = (0..nv * nd)
        .map(|_| Spins {
            sge: vec![ZERO; n],
            see: vec![0.0; n],
        })
        .collect();
    let mut acc = vec![0.0; nv * nd];
    let mut work = Work::new(n);
    let mut delta = vec![0.0; n];
    let mut doppler: Vec<f64> = atoms.iter().map(|a| beta0 * a.velocity.z).collect();

    for step in 0..steps {
        for (v, c) in couplings.iter().enumerate() {
            for (d, &pr) in probe.iter().enumerate() {
                for m in 0..n {
                    delta[m] = -pr + doppler[m];
                }
                let sub = substeps_for(c, &drive, &delta, dt);
                let s = &mut spins[v * nd + d];
                coupled_step(c, &drive, &delta, s, dt, sub, &mut work);
                if step >= discard {
                    acc[v * nd + d] += s.see.iter().sum::<f64>();
                }
            }
        }
        if spins
            .iter()
            .any(|s| s.see.iter().any(|e| !e.is_finite()) || s.sge.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::NonFinite {
                trial: trial as usize,
                message: format!("spin state non-finite at step {step}"),
            });
        }
        if !moving {
            continue;
        }
        let events = advance_positions(&mut atoms, &sim.bx, dt, sigma_v, &mut streams);
        for ev in &events {
            for s in spins.iter_mut() {
                s.sge[ev.atom] = ZERO;
                s.see[ev.atom] = 0.0;
            }
        }
        for (m, a) in atoms.iter().enumerate() {
            pos[m] = a.position;
            doppler[m] = beta0 * a.velocity.z;
            let amp = sim.mode.amplitude_or_zero(a.position.x, a.position.y);
            drive[m] = C::from_polar(sim.omega0_peak * amp, phase_k * a.position.z);
        }
        weights = waveguide_weights(&pos, &sim.mode);
        if (step + 1) % sim.refresh_stride == 0 {
            for (c, o) in couplings.iter_mut().zip(&sim.variants) {
                c.refresh(&pos, &weights, sim, o);
            }
        } else {
            for (c, o) in couplings.iter_mut().zip(&sim.variants) {
                for m in 0..n {
                    let w = if o.waveguide { weights[m] } else { 0.0 };
                    c.decay[m] = sim.params.gamma0 * (o.nonguided_decay + w);
                }
            }
        }
    }
    let norm = ((steps - discard).max(1) * n) as f64;
    Ok((0..nv)
        .map(|v| (0..nd).map(|d| acc[v * nd + d] / norm).collect())
        .collect())
}

/// Spectra for every coupling variant over the probe-detuning grid
/// (ω_L − ω_a, rad/s). Trials run on the current rayon pool; the result does
/// not depend on its size.
pub fn simulate_variants(sim: &Simulation, probe: &[f64], trials: usize) -> Result<Vec<Spectrum>> {
    sim.validate()?;
    if trials == 0 {
        return Err(Error::config("trials", "must be >= 1"));
    }
    if probe.is_empty() || probe.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(
            "sweep.detuning",
            "grid must be non-empty and strictly increasing",
        ));
    }
    let results: Vec<Result<Vec<Vec<f64>>>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(sim, t, probe))
        .collect();
    let mut ok = Vec::with_capacity(trials);
    let mut aborted = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(Error::NonFinite { trial, message }) => {
                log::warn!("trial {trial} aborted: {message}");
                aborted.push(t);
            }
            Err(Error::SteadyState(message)) => {
                log::warn!("trial {t} aborted: {message}");
                aborted.push(t);
            }
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        return Err(Error::Integrator("every trial aborted".into()));
    }
    let nt = ok.len() as f64;
    let mut out = Vec::with_capacity(sim.variants.len());
    for v in 0..sim.variants.len() {
        let mut mean = vec![0.0; probe.len()];
        let mut err = vec![0.0; probe.len()];
        for d in 0..probe.len() {
            let m = ok.iter().map(|t| t[v][d]).sum::<f64>() / nt;
            mean[d] = m;
            if ok.len() > 1 {
                let var = ok.iter().map(|t| (t[v][d] - m).powi(2)).sum::<f64>() / (nt - 1.0);
                err[d] = (var / nt).sqrt();
            }
        }
        if ok.len() < 2 {
            err.clear();
        }
        let mut s = Spectrum::new(probe.to_vec(), mean, err)?;
        s.meta = SpectrumMeta {
            config_hash: String::new(),
            seed: sim.ensemble.seed,
            trials: ok.len(),
            aborted: aborted.clone(),
        };
        out.push(s);
    }
    Ok(out)
}

/// Spectrum of the first coupling variant.
pub fn simulate_spectrum(sim: &Simulation, probe: &[f64], trials: usize) -> Result<Spectrum> {
    let mut sim = sim.clone();
    sim.variants.truncate(1);
    Ok(simulate_variants(&sim, probe, trials)?.remove(0))
}

/// Line model used to locate the line centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineModel {
    Lorentzian,
    /// Fano-Voigt with this fixed Gaussian FWHM (rad/s).
    FanoVoigt {
        omega_d: f64,
    },
}

impl LineModel {
    /// Lorentzian for atoms at rest, Fano-Voigt at the thermal Doppler width otherwise.
    pub fn for_simulation(sim: &Simulation) -> Self {
        let sigma_v = sim.ensemble.sigma_v();
        if sim.is_static() || sigma_v == 0.0 {
            LineModel::Lorentzian
        } else {
            LineModel::FanoVoigt {
                omega_d: 2.0 * (2.0 * 2f64.ln()).sqrt() * sim.mode.beta0() * sigma_v,
            }
        }
    }
}

/// Fitted centre of one spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub center: f64,
    pub center_err: f64,
    /// Lorentzian FWHM (rad/s).
    pub width: f64,
    pub converged: bool,
}

pub fn fit_center(spectrum: &Spectrum, model: LineModel, opts: &FitOptions) -> Result<LineFit> {
    match model {
        LineModel::Lorentzian => {
            let f = fit_lorentzian(spectrum, opts)?;
            Ok(LineFit {
                center: f.shift,
                center_err: f.shift_err(),
                width: f.fwhm,
                converged: f.converged,
            })
        }
        LineModel::FanoVoigt { omega_d } => {
            let init = FitInit::estimate(&spectrum.detunings, &spectrum.absorption, omega_d);
            let f = fit_lineshape(spectrum, omega_d, Some(init), opts)?;
            Ok(LineFit {
                center: f.shift,
                center_err: f.shift_err(),
                width: f.gamma_l,
                converged: f.converged,
            })
        }
    }
}

/// Collective shift: centre of the interacting line minus centre of the
/// reference line computed along the same trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftRow {
    /// Swept quantity in its natural unit (Ω0 in rad/s, density in 1/m³, length in m).
    pub x: f64,
    pub shift: f64,
    pub shift_err: f64,
    pub interacting: LineFit,
    pub reference: LineFit,
    /// Both fits converged.
    pub ok: bool,
}

/// Run `sim` with variants [interacting, reference] and fit the shift.
pub fn measure_shift(sim: &Simulation, x: f64, probe: &[f64], trials: usize, opts: &FitOptions) -> Result<ShiftRow> {
    if sim.variants.len() != 2 {
        return Err(Error::config(
            "variants",
            "shift measurement needs [interacting, reference]",
        ));
    }
    let spectra = simulate_variants(sim, probe, trials)?;
    Ok(shift_from_spectra(
        x,
        &spectra[0],
        &spectra[1],
        LineModel::for_simulation(sim),
        opts,
    ))
}

/// Fit both lines and difference their centres. A failed fit gives a NaN row
/// with `ok = false`.
pub fn shift_from_spectra(
    x: f64,
    interacting: &Spectrum,
    reference: &Spectrum,
    model: LineModel,
    opts: &FitOptions,
) -> ShiftRow {
    let bad = LineFit {
        center: f64::NAN,
        center_err: f64::NAN,
        width: f64::NAN,
        converged: false,
    };
    let fit = |s: &Spectrum| match fit_center(s, model, opts) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("fit failed at x = {x:e}: {e}");
            bad
        }
    };
    let a = fit(interacting);
    let b = fit(reference);
    ShiftRow {
        x,
        shift: a.center - b.center,
        shift_err: a.center_err.hypot(b.center_err),
        interacting: a,
        reference: b,
        ok: a.converged && b.converged,
    }
}

/// Interacting variant from `base` plus its non-interacting reference.
pub fn shift_variants(base: CouplingOptions) -> Vec<CouplingOptions> {
    vec![
        base,
        CouplingOptions {
            interactions: false,
            ..base
        },
    ]
}

/// Shift against peak Rabi frequency.
pub fn extract_shift_vs_intensity(
    sim: &Simulation,
    omega0: &[f64],
    probe: &[f64],
    trials: usize,
    opts: &FitOptions,
) -> Result<Vec<ShiftRow>> {
    omega0
        .iter()
        .map(|&om| {
            let mut s = sim.clone();
            s.omega0_peak = om;
            measure_shift(&s, om, probe, trials, opts)
        })
        .collect()
}

/// Shift against number density; the atom count follows the free volume.
pub fn density_sweep(
    sim: &Simulation,
    densities: &[f64],
    probe: &[f64],
    trials: usize,
    opts: &FitOptions,
) -> Result<Vec<ShiftRow>> {
    densities
        .iter()
        .map(|&n| measure_shift(&sim.at_density(n)?, n, probe, trials, opts))
        .collect()
}

/// Shift for boxes of cross-section `cross` × `cross` and varying length
/// along z at the density of `sim`, in free space.
pub fn box_length_sweep(
    sim: &Simulation,
    cross: f64,
    lengths: &[f64],
    probe: &[f64],
    trials: usize,
    opts: &FitOptions,
) -> Result<Vec<ShiftRow>> {
    lengths
        .iter()
        .map(|&l| measure_shift(&sim.with_free_box(cross, l)?, l, probe, trials, opts))
        .collect()
}
