//! Thermal vapor sampling and ballistic propagation with the wall rules.
//!
//! Every atom owns a ChaCha stream keyed by (seed, trial) and selected by its
//! index, so trajectories do not depend on how trials are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::{thermal_speed, AtomState, SimulationBox, Vec3, BOLTZMANN, RB85_MASS};

/// Resolved Monte-Carlo settings for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_atoms: usize,
    /// Number density (1/m³), consistent with `n_atoms` and the free volume.
    pub density: f64,
    pub temperature: f64,
    pub mass: f64,
    pub seed: u64,
    pub dt: f64,
    pub t_total: f64,
}

impl EnsembleConfig {
    /// Atom count for a density: round(n·V_free), at least one atom.
    pub fn atoms_for_density(density: f64, bx: &SimulationBox) -> Result<usize> {
        let v = bx.free_volume();
        if !(v > 0.0) {
            return Err(Error::config("box", "free volume must be > 0"));
        }
        if !(density.is_finite() && density > 0.0) {
            return Err(Error::config("ensemble.density", "must be > 0"));
        }
        Ok(((density * v).round() as usize).max(1))
    }

    pub fn validate(&self, bx: &SimulationBox) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::config("ensemble.n_atoms", "must be >= 1"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("ensemble.dt", "must be > 0"));
        }
        if !(self.t_total >= self.dt) {
            return Err(Error::config("ensemble.t_total", "must be >= dt"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::config("ensemble.mass", "must be > 0"));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::config("ensemble.temperature", "must be >= 0"));
        }
        if !(bx.free_volume() > 0.0) {
            return Err(Error::config("box", "free volume must be > 0"));
        }
        Ok(())
    }

    /// One-dimensional velocity spread √(k_B T/m).
    pub fn sigma_v(&self) -> f64 {
        thermal_speed(self.temperature, self.mass)
    }

    /// Number of integration steps covering `t_total`.
    pub fn steps(&self) -> usize {
        ((self.t_total / self.dt).round() as usize).max(1)
    }
}

/// Default step: resolve the fastest decay and the transit across the smallest box extent.
pub fn default_dt(gamma0: f64, pf_max: f64, bx: &SimulationBox, temperature: f64, mass: f64) -> f64 {
    let decay = 1.0 / (200.0 * gamma0 * pf_max);
    let v_mean = (8.0 * BOLTZMANN * temperature / (std::f64::consts::PI * mass)).sqrt();
    if v_mean > 0.0 {
        let min_extent = bx.extents().iter().cloned().fold(f64::INFINITY, f64::min);
        decay.min(min_extent / (50.0 * v_mean))
    } else {
        decay
    }
}

pub fn default_mass() -> f64 {
    RB85_MASS
}

/// Stream for atom `atom` in trial `trial`. The key hashes (seed, trial, purpose).
pub fn atom_rng(seed: u64, trial: u64, atom: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"slotqed-atom");
    h.update(seed.to_le_bytes());
    h.update(trial.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(atom);
    rng
}

/// One stream per atom.
pub fn trial_streams(seed: u64, trial: u64, n: usize) -> Vec<ChaCha8Rng> {
    (0..n as u64).map(|m| atom_rng(seed, trial, m)).collect()
}

fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// Speed normal to a wall for atoms crossing it: density ∝ v·exp(−v²/2σ²).
fn flux_speed<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let u: f64 = rng.random();
    sigma * (-2.0 * (1.0 - u).ln()).sqrt()
}

fn uniform_free_point<R: Rng>(rng: &mut R, bx: &SimulationBox) -> Result<Vec3> {
    let b = &bx.bounds;
    for _ in 0..100_000 {
        let p = Vec3::new(
            rng.random_range(b.min[0]..=b.max[0]),
            rng.random_range(b.min[1]..=b.max[1]),
            rng.random_range(b.min[2]..=b.max[2]),
        );
        if !bx.in_dielectric(&p) {
            return Ok(p);
        }
    }
    Err(Error::config("box", "free volume too small to sample"))
}

/// Positions uniform over the free volume, Maxwell-Boltzmann velocities, ground state.
pub fn sample_atoms(config: &EnsembleConfig, bx: &SimulationBox, streams: &mut [ChaCha8Rng]) -> Result<Vec<AtomState>> {
    config.validate(bx)?;
    if streams.len() != config.n_atoms {
        return Err(Error::domain("one random stream per atom is required"));
    }
    let sigma = config.sigma_v();
    streams
        .iter_mut()
        .map(|rng| {
            let p = uniform_free_point(rng, bx)?;
            let v = if sigma > 0.0 {
                Vec3::new(gaussian(rng, sigma), gaussian(rng, sigma), gaussian(rng, sigma))
            } else {
                Vec3::zeros()
            };
            Ok(AtomState::ground(p, v))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionKind {
    /// Left the probe volume and was re-injected on the crossed face.
    BoxExit,
    /// Struck a dielectric surface.
    Dielectric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionEvent {
    pub atom: usize,
    pub kind: CollisionKind,
}

/// Earliest time in (0, dt] at which the segment p + v·t leaves the box, with the face.
fn box_exit(p: &Vec3, v: &Vec3, dt: f64, bx: &SimulationBox) -> Option<(f64, usize, bool)> {
    let mut best: Option<(f64, usize, bool)> = None;
    for a in 0..3 {
        let end = p[a] + v[a] * dt;
        let (t, upper) = if end > bx.bounds.max[a] && v[a] > 0.0 {
            ((bx.bounds.max[a] - p[a]) / v[a], true)
        } else if end < bx.bounds.min[a] && v[a] < 0.0 {
            ((bx.bounds.min[a] - p[a]) / v[a], false)
        } else {
            continue;
        };
        let t = t.max(0.0);
        if best.is_none_or(|(bt, _, _)| t < bt) {
            best = Some((t, a, upper));
        }
    }
    best
}

/// Earliest entry into a dielectric box by the slab method: (time, axis,
/// entered through the upper face, face coordinate).
fn dielectric_entry(p: &Vec3, v: &Vec3, dt: f64, bx: &SimulationBox) -> Option<(f64, usize, bool, f64)> {
    let mut best: Option<(f64, usize, bool, f64)> = None;
    for d in &bx.dielectrics {
        let mut t_in = 0.0f64;
        let mut t_out = dt;
        let mut face = None;
        let mut miss = false;
        for a in 0..3 {
            if v[a] == 0.0 {
                if p[a] <= d.min[a] || p[a] >= d.max[a] {
                    miss = true;
                    break;
                }
                continue;
            }
            let t0 = (d.min[a] - p[a]) / v[a];
            let t1 = (d.max[a] - p[a]) / v[a];
            let (lo, hi, upper) = if t0 < t1 { (t0, t1, false) } else { (t1, t0, true) };
            if lo > t_in {
                t_in = lo;
                face = Some((a, upper));
            }
            t_out = t_out.min(hi);
        }
        if miss || t_in >= t_out {
            continue;
        }
        if let Some((a, upper)) = face {
            if best.is_none_or(|(bt, ..)| t_in < bt) {
                let wall = if upper { d.max[a] } else { d.min[a] };
                best = Some((t_in, a, upper, wall));
            }
        }
    }
    best
}

/// Fresh thermal velocity whose component along `axis` points in `sign` direction.
fn flux_velocity<R: Rng>(rng: &mut R, sigma: f64, axis: usize, sign: f64) -> Vec3 {
    let mut v = Vec3::new(gaussian(rng, sigma), gaussian(rng, sigma), gaussian(rng, sigma));
    v[axis] = sign * flux_speed(rng, sigma);
    v
}

/// Ballistic step with the wall rules. Colliding atoms have their spin reset;
/// the returned events name them so callers holding extra spin copies can follow.
pub fn advance_positions(
    atoms: &mut [AtomState],
    bx: &SimulationBox,
    dt: f64,
    sigma_v: f64,
    streams: &mut [ChaCha8Rng],
) -> Vec<CollisionEvent> {
    let mut events = Vec::new();
    for (m, (atom, rng)) in atoms.iter_mut().zip(streams.iter_mut()).enumerate() {
        let p = atom.position;
        let v = atom.velocity;
        if v == Vec3::zeros() {
            continue;
        }
        let exit = box_exit(&p, &v, dt, bx);
        let hit = dielectric_entry(&p, &v, dt, bx);
        let wall_first = match (exit, hit) {
            (Some((te, ..)), Some((th, ..))) => Some(te <= th),
            (Some(_), None) => Some(true),
            (None, Some(_)) => Some(false),
            (None, None) => None,
        };
        match wall_first {
            None => atom.position = p + v * dt,
            Some(true) => {
                let (_, axis, upper) = exit.unwrap();
                atom.position = respawn_on_face(rng, bx, axis, upper);
                atom.velocity = flux_velocity(rng, sigma_v, axis, if upper { -1.0 } else { 1.0 });
                atom.reset_spin();
                events.push(CollisionEvent {
                    atom: m,
                    kind: CollisionKind::BoxExit,
                });
            }
            Some(false) => {
                let (t, axis, upper, wall) = hit.unwrap();
                let hit_point = p + v * t;
                // Mirror the remaining path about the struck face.
                let mut q = p + v * dt;
                q[axis] = 2.0 * wall - q[axis];
                atom.position = if bx.is_free(&q) { q } else { hit_point };
                // Entering through the lower face means the outward normal points down.
                let sign = if upper { 1.0 } else { -1.0 };
                atom.velocity = flux_velocity(rng, sigma_v, axis, sign);
                atom.reset_spin();
                events.push(CollisionEvent {
                    atom: m,
                    kind: CollisionKind::Dielectric,
                });
            }
        }
    }
    events
}

fn respawn_on_face<R: Rng>(rng: &mut R, bx: &SimulationBox, axis: usize, upper: bool) -> Vec3 {
    let b = &bx.bounds;
    let inward = if upper { -1.0 } else { 1.0 };
    let nudge = 1e-9 * b.extents()[axis];
    let mut p = Vec3::zeros();
    for _ in 0..100_000 {
        for a in 0..3 {
            p[a] = if a == axis {
                if upper {
                    b.max[a]
                } else {
                    b.min[a]
                }
            } else {
                rng.random_range(b.min[a]..=b.max[a])
            };
        }
        let mut probe = p;
        probe[axis] += inward * nudge;
        if !bx.in_dielectric(&probe) {
            return p;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{PhysicalParams, SlotGeometry};

    fn cfg(n: usize, t: f64) -> EnsembleConfig {
        EnsembleConfig {
            n_atoms: n,
            density: 1.0,
            temperature: t,
            mass: RB85_MASS,
            seed: 7,
            dt: 1e-11,
            t_total: 1e-9,
        }
    }

    #[test]
    fn zero_temperature_is_static() {
        let bx = SimulationBox::free_space([1e-6; 3]);
        let c = cfg(50, 0.0);
        let mut s = trial_streams(c.seed, 0, c.n_atoms);
        let atoms = sample_atoms(&c, &bx, &mut s).unwrap();
        assert!(atoms.iter().all(|a| a.velocity == Vec3::zeros() && a.sigma_ee == 0.0));
    }

    #[test]
    fn velocity_moments() {
        let bx = SimulationBox::free_space([1e-6; 3]);
        let c = cfg(1_000_000, 473.0);
        let mut s = trial_streams(c.seed, 0, c.n_atoms);
        let atoms = sample_atoms(&c, &bx, &mut s).unwrap();
        let sig = c.sigma_v();
        let n = atoms.len() as f64;
        let mean_vz = atoms.iter().map(|a| a.velocity.z).sum::<f64>() / n;
        assert!(mean_vz.abs() < 3.0 * sig / 1e3, "{mean_vz}");
        let v2 = atoms.iter().map(|a| a.velocity.norm_squared()).sum::<f64>() / n;
        let expected = 3.0 * BOLTZMANN * 473.0 / RB85_MASS;
        assert!((v2 / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn samples_avoid_dielectric() {
        let bx = SimulationBox::around_slot(SlotGeometry::default(), 150e-9, 1e-6);
        let c = cfg(5000, 473.0);
        let mut s = trial_streams(1, 2, c.n_atoms);
        let atoms = sample_atoms(&c, &bx, &mut s).unwrap();
        assert!(atoms.iter().all(|a| bx.is_free(&a.position)));
    }

    #[test]
    fn interior_step_is_translation() {
        let bx = SimulationBox::free_space([1e-6; 3]);
        let mut atoms = vec![AtomState::ground(
            Vec3::new(5e-7, 5e-7, 5e-7),
            Vec3::new(100.0, -50.0, 20.0),
        )];
        atoms[0].sigma_ee = 0.3;
        atoms[0].sigma_gg = 0.7;
        let mut s = trial_streams(0, 0, 1);
        let ev = advance_positions(&mut atoms, &bx, 1e-11, 200.0, &mut s);
        assert!(ev.is_empty());
        assert_eq!(atoms[0].position, Vec3::new(5e-7 + 1e-9, 5e-7 - 5e-10, 5e-7 + 2e-10));
        assert_eq!(atoms[0].sigma_ee, 0.3);
    }

    #[test]
    fn z_exit_resets_spin() {
        let bx = SimulationBox::free_space([1e-6; 3]);
        let mut atoms = vec![AtomState::ground(
            Vec3::new(5e-7, 5e-7, 1e-6 - 1e-10),
            Vec3::new(0.0, 0.0, 300.0),
        )];
        atoms[0].sigma_ee = 0.4;
        atoms[0].sigma_gg = 0.6;
        atoms[0].sigma_ge = num_complex::Complex64::new(0.1, 0.2);
        let mut s = trial_streams(0, 0, 1);
        let ev = advance_positions(&mut atoms, &bx, 1e-11, 200.0, &mut s);
        assert_eq!(
            ev,
            vec![CollisionEvent {
                atom: 0,
                kind: CollisionKind::BoxExit
            }]
        );
        assert_eq!(atoms[0].sigma_ee, 0.0);
        assert_eq!(atoms[0].sigma_ge, num_complex::Complex64::new(0.0, 0.0));
        assert_eq!(atoms[0].position.z, 1e-6);
        assert!(atoms[0].velocity.z < 0.0);
    }

    #[test]
    fn dielectric_hit_reflects_outward() {
        let bx = SimulationBox::around_slot(SlotGeometry::default(), 150e-9, 1e-6);
        // In the gap moving +x into the right ridge at x = 25 nm.
        let mut atoms = vec![AtomState::ground(
            Vec3::new(24e-9, 100e-9, 5e-7),
            Vec3::new(300.0, 0.0, 0.0),
        )];
        atoms[0].sigma_ee = 0.5;
        atoms[0].sigma_gg = 0.5;
        let mut s = trial_streams(3, 0, 1);
        let ev = advance_positions(&mut atoms, &bx, 1e-11, 200.0, &mut s);
        assert_eq!(ev[0].kind, CollisionKind::Dielectric);
        assert!(bx.is_free(&atoms[0].position));
        assert!(atoms[0].position.x < 25e-9);
        assert!(atoms[0].velocity.x < 0.0);
        assert_eq!(atoms[0].sigma_ee, 0.0);
    }

    #[test]
    fn default_dt_respects_both_limits() {
        let p = PhysicalParams::default();
        let bx = SimulationBox::around_slot(SlotGeometry::default(), 150e-9, 1e-6);
        let dt = default_dt(p.gamma0, 35.0, &bx, 473.0, RB85_MASS);
        assert!(dt <= 1.0 / (200.0 * p.gamma0 * 35.0));
        assert_eq!(
            default_dt(p.gamma0, 35.0, &bx, 0.0, RB85_MASS),
            1.0 / (200.0 * p.gamma0 * 35.0)
        );
    }

    #[test]
    fn streams_are_independent_of_order() {
        let a: u64 = atom_rng(5, 3, 17).random();
        let mut all = trial_streams(5, 3, 20);
        let b: u64 = all[17].random();
        assert_eq!(a, b);
        let c: u64 = atom_rng(5, 4, 17).random();
        assert_ne!(a, c);
    }

    fn run_ensemble(seed: u64, steps: usize) -> (Vec<AtomState>, SimulationBox) {
        let bx = SimulationBox::around_slot(SlotGeometry::default(), 150e-9, 2e-7);
        let c = EnsembleConfig {
            seed,
            ..cfg(400, 473.0)
        };
        let mut s = trial_streams(c.seed, 0, c.n_atoms);
        let mut atoms = sample_atoms(&c, &bx, &mut s).unwrap();
        for _ in 0..steps {
            advance_positions(&mut atoms, &bx, 2e-11, c.sigma_v(), &mut s);
            assert_eq!(atoms.len(), c.n_atoms);
            assert!(atoms.iter().all(|a| bx.is_free(&a.position)));
        }
        (atoms, bx)
    }

    #[test]
    fn long_run_stays_uniform() {
        let (atoms, bx) = run_ensemble(11, 400);
        // Eight octants of the bounding box, weighted by their free volume.
        let b = bx.bounds;
        let mid: Vec<f64> = (0..3).map(|a| 0.5 * (b.min[a] + b.max[a])).collect();
        let mut counts = [0usize; 8];
        for a in &atoms {
            let i = (0..3).fold(0, |acc, ax| acc * 2 + usize::from(a.position[ax] > mid[ax]));
            counts[i] += 1;
        }
        let total_free = bx.free_volume();
        let n = atoms.len() as f64;
        for (i, &c) in counts.iter().enumerate() {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for ax in 0..3 {
                let bit = (i >> (2 - ax)) & 1;
                lo[ax] = if bit == 1 { mid[ax] } else { b.min[ax] };
                hi[ax] = if bit == 1 { b.max[ax] } else { mid[ax] };
            }
            let cell = crate::params::Aabb::new(lo, hi);
            let free = cell.volume() - bx.dielectrics.iter().map(|d| d.overlap_volume(&cell)).sum::<f64>();
            let p = free / total_free;
            let expect = n * p;
            let sd = (n * p * (1.0 - p)).sqrt();
            assert!(
                (c as f64 - expect).abs() <= 3.0 * sd + 1.0,
                "cell {i}: {c} vs {expect:.1}"
            );
        }
    }

    #[test]
    fn trajectories_are_reproducible() {
        let (a, _) = run_ensemble(5, 50);
        let (b, _) = run_ensemble(5, 50);
        assert_eq!(a, b);
    }
}
