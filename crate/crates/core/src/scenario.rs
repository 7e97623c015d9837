//! Scenario files: schema, resolution into a [`Simulation`], and the sweep
//! runner that writes the result tables.
//!
//! Units in the file: Rabi frequencies and detunings in Γ0, lengths in m,
//! densities in 1/m³ or as the normalized density (kr)⁻³.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::FitOptions;
use crate::dynamics::{
    fit_center, shift_from_spectra, shift_variants, simulate_variants, LineFit, LineModel, Placement, ShiftRow,
    Simulation, SpectrumMethod,
};
use crate::ensemble::{default_dt, EnsembleConfig};
use crate::error::{Error, Result};
use crate::greens::CouplingOptions;
use crate::ingest::{format_number, spectrum_table, Table};
use crate::mode::ModeSource;
use crate::params::{
    density_from_normalized, rabi_from_intensity, PhysicalParams, SimulationBox, SlotGeometry, Vec3, RB85_MASS,
};
use crate::spectrum::Spectrum;

/// Top-level scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    pub trials: usize,
    #[serde(default)]
    pub physics: PhysicalParams,
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    #[serde(default)]
    pub mode: ModeSource,
    pub ensemble: EnsembleSpec,
    pub drive: DriveSpec,
    #[serde(default)]
    pub couplings: CouplingSpec,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoxSpec {
    FreeSpace {
        extents: [f64; 3],
    },
    AroundSlot {
        margin: f64,
        length: f64,
        #[serde(default)]
        slot: SlotGeometry,
    },
    GapOnly {
        length: f64,
        #[serde(default)]
        slot: SlotGeometry,
    },
}

impl BoxSpec {
    pub fn build(&self) -> Result<SimulationBox> {
        let bx = match *self {
            BoxSpec::FreeSpace { extents } => SimulationBox::free_space(extents),
            BoxSpec::AroundSlot { margin, length, slot } => SimulationBox::around_slot(slot, margin, length),
            BoxSpec::GapOnly { length, slot } => SimulationBox::gap_only(slot, length),
        };
        bx.validate()?;
        Ok(bx)
    }

    fn slot(&self) -> SlotGeometry {
        match *self {
            BoxSpec::FreeSpace { .. } => SlotGeometry::default(),
            BoxSpec::AroundSlot { slot, .. } | BoxSpec::GapOnly { slot, .. } => slot,
        }
    }
}

/// Exactly one of `n_atoms`, `density`, `normalized_density` or `positions`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_atoms: Option<usize>,
    /// 1/m³.
    pub density: Option<f64>,
    /// (kr)⁻³.
    pub normalized_density: Option<f64>,
    /// Fixed atoms at rest (m).
    pub positions: Option<Vec<[f64; 3]>>,
    /// Defaults to `physics.temperature`.
    pub temperature: Option<f64>,
    pub mass: Option<f64>,
    pub dt: Option<f64>,
    pub t_total: Option<f64>,
}

/// Probe strength as Ω0 (Γ0) or intensity (W/m²), and the detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub omega0: Option<f64>,
    pub intensity: Option<f64>,
    pub detuning: GridSpec,
}

/// Uniform grid of probe detunings ω_L − ω_a in Γ0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSpec {
    pub waveguide: bool,
    pub guided_pairs: bool,
    pub interactions: bool,
    /// Pairs closer than this do not interact (m). Defaults to a fixed fraction of λ.
    pub exclusion_radius: Option<f64>,
}

impl Default for CouplingSpec {
    fn default() -> Self {
        Self {
            waveguide: true,
            guided_pairs: true,
            interactions: true,
            exclusion_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    TimeAverage,
    SteadyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModelSpec {
    /// Lorentzian for atoms at rest, Fano-Voigt at the Doppler width otherwise.
    Auto,
    Lorentzian,
    FanoVoigt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSpec {
    pub method: MethodSpec,
    pub discard_fraction: f64,
    pub refresh_stride: usize,
    pub drive_phase: bool,
    /// Constant single-body Casimir-Polder offset added to reported shifts (Γ0).
    pub cp_offset: f64,
    pub fit: FitModelSpec,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        Self {
            method: MethodSpec::TimeAverage,
            discard_fraction: 0.0,
            refresh_stride: 1,
            drive_phase: true,
            cp_offset: -70.0,
            fit: FitModelSpec::Auto,
        }
    }
}

/// Swept axis. `detuning` computes one spectrum; the others compute a shift
/// against the non-interacting reference at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    Detuning,
    /// Ω0 values in Γ0.
    Intensity {
        omega0: Vec<f64>,
    },
    /// Normalized densities (kr)⁻³; the atom count follows the box volume.
    Density {
        normalized: Vec<f64>,
    },
    /// Free-space boxes `cross` × `cross` × length (m) at fixed density.
    BoxLength {
        cross: f64,
        lengths: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: PathBuf,
    /// Write every spectrum, not only the shift and fit tables.
    pub spectra: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            spectra: true,
        }
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Config {
            path: "<file>".into(),
            message: e.to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                path,
                message: e.into_inner().message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Fill every default and check the file. `base_dir` resolves a relative mode file.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<Scenario> {
        let mut file = self.clone();
        let p = &file.physics;
        p.validate()?;
        if file.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        let bx = file.bx.build()?;
        let mode = file.mode.build(p, file.bx.slot(), base_dir)?;
        let g0 = p.gamma0;

        let d = &file.drive;
        let omega0 = match (d.omega0, d.intensity) {
            (Some(om), None) => {
                if !(om.is_finite() && om >= 0.0) {
                    return Err(Error::config("drive.omega0", "must be finite and >= 0"));
                }
                om * g0
            }
            (None, Some(i)) => rabi_from_intensity(i, p.i_sat, g0)?,
            _ => return Err(Error::config("drive", "give exactly one of omega0 or intensity")),
        };
        let grid = d.detuning;
        if grid.points < 2 || !(grid.max > grid.min) || !grid.min.is_finite() || !grid.max.is_finite() {
            return Err(Error::config("drive.detuning", "need points >= 2 and max > min"));
        }
        let probe = Spectrum::uniform_grid(grid.min * g0, grid.max * g0, grid.points);

        let e = &mut file.ensemble;
        let given = [
            e.n_atoms.is_some(),
            e.density.is_some(),
            e.normalized_density.is_some(),
            e.positions.is_some(),
        ];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(Error::config(
                "ensemble",
                "give exactly one of n_atoms, density, normalized_density or positions",
            ));
        }
        let temperature = *e.temperature.get_or_insert(p.temperature);
        let mass = *e.mass.get_or_insert(RB85_MASS);
        let placement = match &e.positions {
            Some(pos) => {
                if pos.is_empty() {
                    return Err(Error::config("ensemble.positions", "must not be empty"));
                }
                let pts: Vec<Vec3> = pos.iter().map(|q| Vec3::new(q[0], q[1], q[2])).collect();
                if let Some(i) = pts.iter().position(|q| !bx.is_free(q)) {
                    return Err(Error::config(
                        format!("ensemble.positions[{i}]"),
                        "outside the free volume",
                    ));
                }
                Placement::Fixed(pts)
            }
            None => Placement::Random,
        };
        let vol = bx.free_volume();
        let (n_atoms, density) = if let Some(n) = e.n_atoms {
            if n == 0 {
                return Err(Error::config("ensemble.n_atoms", "must be >= 1"));
            }
            (n, n as f64 / vol)
        } else if let Some(pos) = &e.positions {
            (pos.len(), pos.len() as f64 / vol)
        } else {
            let n = match (e.density, e.normalized_density) {
                (Some(n), _) => n,
                (_, Some(x)) => density_from_normalized(x, p.k())
                    .map_err(|err| Error::config("ensemble.normalized_density", err.to_string()))?,
                _ => unreachable!(),
            };
            (EnsembleConfig::atoms_for_density(n, &bx)?, n)
        };
        let dyn_spec = file.dynamics;
        let is_static = matches!(placement, Placement::Fixed(_)) || temperature == 0.0;
        let method = match dyn_spec.method {
            MethodSpec::TimeAverage => SpectrumMethod::TimeAverage,
            MethodSpec::SteadyState => SpectrumMethod::SteadyState,
        };
        let dt = *e
            .dt
            .get_or_insert_with(|| default_dt(g0, mode.pf_max(), &bx, temperature, mass));
        let t_total = match (e.t_total, method) {
            (Some(t), _) => t,
            (None, SpectrumMethod::SteadyState) => dt,
            (None, SpectrumMethod::TimeAverage) => {
                return Err(Error::config(
                    "ensemble.t_total",
                    "required for the time_average method",
                ))
            }
        };
        e.t_total = Some(t_total);
        if method == SpectrumMethod::SteadyState && !is_static {
            return Err(Error::config(
                "dynamics.method",
                "steady_state needs atoms at rest (temperature 0 or fixed positions)",
            ));
        }
        let ensemble = EnsembleConfig {
            n_atoms,
            density,
            temperature,
            mass,
            seed: file.seed,
            dt,
            t_total,
        };

        let c = file.couplings;
        let mut base = CouplingOptions::new(p.lambda_probe);
        base.waveguide = c.waveguide;
        base.guided_pairs = c.guided_pairs;
        base.interactions = c.interactions;
        base.nonguided_decay = p.nonguided_decay;
        if let Some(r) = c.exclusion_radius {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::config("couplings.exclusion_radius", "must be >= 0"));
            }
            base.exclusion_radius = r;
        }
        if !(0.0..1.0).contains(&dyn_spec.discard_fraction) {
            return Err(Error::config("dynamics.discard_fraction", "must lie in [0, 1)"));
        }
        if dyn_spec.refresh_stride == 0 {
            return Err(Error::config("dynamics.refresh_stride", "must be >= 1"));
        }
        if !dyn_spec.cp_offset.is_finite() {
            return Err(Error::config("dynamics.cp_offset", "must be finite"));
        }

        let variants = match file.sweep {
            SweepSpec::Detuning => vec![base],
            _ => shift_variants(base),
        };
        let sim = Simulation {
            params: p.clone(),
            bx,
            mode,
            ensemble,
            omega0_peak: omega0,
            variants,
            placement,
            method,
            discard_fraction: dyn_spec.discard_fraction,
            refresh_stride: dyn_spec.refresh_stride,
            drive_phase: dyn_spec.drive_phase,
        };
        sim.validate()?;
        check_sweep(&file.sweep, &sim)?;
        let model = match dyn_spec.fit {
            FitModelSpec::Auto => LineModel::for_simulation(&sim),
            FitModelSpec::Lorentzian => LineModel::Lorentzian,
            FitModelSpec::FanoVoigt => match LineModel::for_simulation(&sim) {
                m @ LineModel::FanoVoigt { .. } => m,
                LineModel::Lorentzian => {
                    return Err(Error::config(
                        "dynamics.fit",
                        "fano_voigt needs a nonzero Doppler width",
                    ))
                }
            },
        };
        let hash = config_hash(&file);
        Ok(Scenario {
            file,
            sim,
            probe,
            model,
            hash,
        })
    }
}

fn check_sweep(sweep: &SweepSpec, sim: &Simulation) -> Result<()> {
    let positive = |path: &str, v: &[f64]| -> Result<()> {
        if v.is_empty() {
            return Err(Error::config(path, "must not be empty"));
        }
        if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::config(format!("{path}[{i}]"), "must be finite and > 0"));
        }
        Ok(())
    };
    match sweep {
        SweepSpec::Detuning => Ok(()),
        SweepSpec::Intensity { omega0 } => positive("sweep.omega0", omega0),
        SweepSpec::Density { normalized } => {
            if matches!(sim.placement, Placement::Fixed(_)) {
                return Err(Error::config("sweep", "density sweep needs randomly placed atoms"));
            }
            positive("sweep.normalized", normalized)
        }
        SweepSpec::BoxLength { cross, lengths } => {
            if matches!(sim.placement, Placement::Fixed(_)) {
                return Err(Error::config("sweep", "box_length sweep needs randomly placed atoms"));
            }
            positive("sweep.cross", &[*cross])?;
            positive("sweep.lengths", lengths)
        }
    }
}

/// SHA-256 over the resolved file without its output block.
fn config_hash(file: &ScenarioFile) -> String {
    let mut f = file.clone();
    f.output = OutputSpec::default();
    hex::encode(Sha256::digest(f.to_toml().as_bytes()))
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// The file with every default filled in.
    pub file: ScenarioFile,
    pub sim: Simulation,
    /// Probe detunings (rad/s).
    pub probe: Vec<f64>,
    pub model: LineModel,
    pub hash: String,
}

/// One point of a sweep with its spectra.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub x: f64,
    pub n_atoms: usize,
    /// Interacting first, then the reference when the sweep has one.
    pub spectra: Vec<Spectrum>,
    /// Present for shift sweeps.
    pub shift: Option<ShiftRow>,
    /// Present for a detuning-only run.
    pub fit: Option<LineFit>,
    /// Set when the point could not be computed at all.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub points: Vec<SweepPoint>,
    pub files: Vec<PathBuf>,
    pub wall_time: f64,
}

impl RunOutcome {
    pub fn failed_points(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.error.is_some() || p.shift.is_some_and(|s| !s.ok) || p.fit.is_some_and(|f| !f.converged))
            .count()
    }
}

impl Scenario {
    /// Swept values in their natural units and the simulation at each.
    fn points(&self) -> Result<Vec<(f64, Simulation)>> {
        let k = self.sim.params.k();
        let g0 = self.sim.params.gamma0;
        match &self.file.sweep {
            SweepSpec::Detuning => Ok(vec![(0.0, self.sim.clone())]),
            SweepSpec::Intensity { omega0 } => Ok(omega0
                .iter()
                .map(|&om| {
                    let mut s = self.sim.clone();
                    s.omega0_peak = om * g0;
                    (om, s)
                })
                .collect()),
            SweepSpec::Density { normalized } => normalized
                .iter()
                .map(|&x| Ok((x, self.sim.at_density(density_from_normalized(x, k)?)?)))
                .collect(),
            SweepSpec::BoxLength { cross, lengths } => lengths
                .iter()
                .map(|&l| Ok((l, self.sim.with_free_box(*cross, l)?)))
                .collect(),
        }
    }

    /// Run every sweep point. A point whose trials all fail is reported, not fatal.
    pub fn run(&self) -> Result<Vec<SweepPoint>> {
        let opts = FitOptions::default();
        let trials = self.file.trials;
        let mut out = Vec::new();
        for (x, sim) in self.points()? {
            log::info!("sweep point x = {x} with {} atoms", sim.n_atoms());
            let n_atoms = sim.n_atoms();
            let mut point = SweepPoint {
                x,
                n_atoms,
                spectra: Vec::new(),
                shift: None,
                fit: None,
                error: None,
            };
            match simulate_variants(&sim, &self.probe, trials) {
                Ok(mut spectra) => {
                    for s in &mut spectra {
                        s.meta.config_hash = self.hash.clone();
                    }
                    if spectra.len() == 2 {
                        point.shift = Some(shift_from_spectra(x, &spectra[0], &spectra[1], self.model, &opts));
                    } else {
                        point.fit = Some(match fit_center(&spectra[0], self.model, &opts) {
                            Ok(f) => f,
                            Err(e) => {
                                point.error = Some(e.to_string());
                                LineFit {
                                    center: f64::NAN,
                                    center_err: f64::NAN,
                                    width: f64::NAN,
                                    converged: false,
                                }
                            }
                        });
                    }
                    point.spectra = spectra;
                }
                Err(e @ (Error::Integrator(_) | Error::SteadyState(_) | Error::NonFinite { .. })) => {
                    log::warn!("sweep point x = {x} failed: {e}");
                    point.error = Some(e.to_string());
                }
                Err(e) => return Err(e),
            }
            out.push(point);
        }
        Ok(out)
    }

    /// Run and write spectra, `shifts.csv` (shift sweeps), `fits.toml`,
    /// `resolved.toml` and `manifest.toml` under `dir`.
    pub fn run_to_dir(&self, dir: &Path) -> Result<RunOutcome> {
        let start = Instant::now();
        let points = self.run()?;
        let wall_time = start.elapsed().as_secs_f64();
        let files = self.write_outputs(dir, &points, wall_time)?;
        Ok(RunOutcome {
            points,
            files,
            wall_time,
        })
    }

    fn meta(&self) -> Vec<(String, String)> {
        vec![
            ("version".into(), crate::version_string()),
            ("config_hash".into(), self.hash.clone()),
            ("seed".into(), self.file.seed.to_string()),
            ("trials".into(), self.file.trials.to_string()),
            ("gamma0".into(), format_number(self.sim.params.gamma0)),
        ]
    }

    fn axis(&self) -> (&'static str, &'static str) {
        match self.file.sweep {
            SweepSpec::Detuning => ("point", "1"),
            SweepSpec::Intensity { .. } => ("omega0", "Gamma0"),
            SweepSpec::Density { .. } => ("normalized_density", "(kr)^-3"),
            SweepSpec::BoxLength { .. } => ("length", "m"),
        }
    }

    pub fn write_outputs(&self, dir: &Path, points: &[SweepPoint], wall_time: f64) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let g0 = self.sim.params.gamma0;
        let mut files = Vec::new();
        let variant_names = ["interacting", "reference"];

        if self.file.output.spectra {
            let sdir = dir.join("spectra");
            fs::create_dir_all(&sdir)?;
            for (i, p) in points.iter().enumerate() {
                for (s, name) in p.spectra.iter().zip(variant_names) {
                    let mut t = spectrum_table(s, g0);
                    t.meta.push((self.axis().0.into(), format_number(p.x)));
                    let path = sdir.join(format!("point{i:03}_{name}.csv"));
                    t.write(&path)?;
                    files.push(path);
                }
            }
        }

        if !matches!(self.file.sweep, SweepSpec::Detuning) {
            let (axis, unit) = self.axis();
            let mut meta = self.meta();
            meta.push(("cp_offset".into(), format_number(self.file.dynamics.cp_offset)));
            let mut t = Table::new(
                meta,
                &[
                    axis,
                    "n_atoms",
                    "shift",
                    "shift_err",
                    "shift_reported",
                    "center",
                    "center_ref",
                    "width",
                    "width_ref",
                    "ok",
                ],
                &[
                    unit, "1", "Gamma0", "Gamma0", "Gamma0", "Gamma0", "Gamma0", "Gamma0", "Gamma0", "1",
                ],
            );
            for p in points {
                let nan = f64::NAN;
                let (shift, err, ci, cr, wi, wr, ok) = match p.shift {
                    Some(r) => (
                        r.shift / g0,
                        r.shift_err / g0,
                        r.interacting.center / g0,
                        r.reference.center / g0,
                        r.interacting.width / g0,
                        r.reference.width / g0,
                        r.ok,
                    ),
                    None => (nan, nan, nan, nan, nan, nan, false),
                };
                let mut row: Vec<String> = [p.x].iter().map(|v| format_number(*v)).collect();
                row.push(p.n_atoms.to_string());
                for v in [shift, err, shift + self.file.dynamics.cp_offset, ci, cr, wi, wr] {
                    row.push(format_number(v));
                }
                row.push(u8::from(ok).to_string());
                t.push(row);
            }
            let path = dir.join("shifts.csv");
            t.write(&path)?;
            files.push(path);
        }

        let path = dir.join("fits.toml");
        fs::write(&path, self.fits_toml(points))?;
        files.push(path);

        let path = dir.join("resolved.toml");
        fs::write(&path, self.file.to_toml())?;
        files.push(path);

        let manifest = Manifest {
            version: crate::version_string(),
            config_hash: self.hash.clone(),
            seed: self.file.seed,
            trials: self.file.trials,
            wall_time_s: wall_time,
            failed_points: points
                .iter()
                .enumerate()
                .filter(|(_, p)| p.error.is_some())
                .map(|(i, _)| i)
                .collect(),
            files: files
                .iter()
                .map(|f| f.strip_prefix(dir).unwrap_or(f).display().to_string())
                .collect(),
        };
        let path = dir.join("manifest.toml");
        fs::write(&path, toml::to_string(&manifest).expect("manifest serializes"))?;
        files.push(path);
        Ok(files)
    }

    fn fits_toml(&self, points: &[SweepPoint]) -> String {
        let g0 = self.sim.params.gamma0;
        let record = |i: usize, x: f64, variant: &str, f: &LineFit, error: &Option<String>| FitRecord {
            point: i,
            x,
            variant: variant.to_string(),
            model: match self.model {
                LineModel::Lorentzian => "lorentzian".into(),
                LineModel::FanoVoigt { .. } => "fano_voigt".into(),
            },
            center: finite_or_none(f.center / g0),
            center_err: finite_or_none(f.center_err / g0),
            width: finite_or_none(f.width / g0),
            converged: f.converged,
            error: error.clone(),
        };
        let mut fits = Vec::new();
        for (i, p) in points.iter().enumerate() {
            if let Some(f) = &p.fit {
                fits.push(record(i, p.x, "interacting", f, &p.error));
            }
            if let Some(r) = &p.shift {
                fits.push(record(i, p.x, "interacting", &r.interacting, &p.error));
                fits.push(record(i, p.x, "reference", &r.reference, &p.error));
            }
            if p.fit.is_none() && p.shift.is_none() {
                let nan = LineFit {
                    center: f64::NAN,
                    center_err: f64::NAN,
                    width: f64::NAN,
                    converged: false,
                };
                fits.push(record(i, p.x, "interacting", &nan, &p.error));
            }
        }
        toml::to_string(&FitFile {
            config_hash: self.hash.clone(),
            units: "Gamma0".into(),
            fit: fits,
        })
        .expect("fits serialize")
    }
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// One fitted line in `fits.toml`. Missing numbers mean the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub point: usize,
    pub x: f64,
    pub variant: String,
    pub model: String,
    pub center: Option<f64>,
    pub center_err: Option<f64>,
    /// Lorentzian FWHM.
    pub width: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub config_hash: String,
    pub units: String,
    pub fit: Vec<FitRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub wall_time_s: f64,
    pub failed_points: Vec<usize>,
    pub files: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
trials = 2

[box]
kind = "free_space"
extents = [1e-6, 1e-6, 1e-6]

[mode]
kind = "uniform"

[ensemble]
positions = [[5e-7, 5e-7, 5e-7]]

[drive]
omega0 = 0.01
detuning = { min = -5.0, max = 5.0, points = 21 }

[dynamics]
method = "steady_state"

[sweep]
axis = "detuning"
"#;

    #[test]
    fn minimal_file_resolves() {
        let f = ScenarioFile::from_toml(MINIMAL).unwrap();
        let s = f.resolve(None).unwrap();
        assert_eq!(s.sim.n_atoms(), 1);
        assert_eq!(s.probe.len(), 21);
        assert_eq!(s.model, LineModel::Lorentzian);
        assert_eq!(s.hash.len(), 64);
        // resolving is idempotent
        let again = ScenarioFile::from_toml(&s.file.to_toml())
            .unwrap()
            .resolve(None)
            .unwrap();
        assert_eq!(again.hash, s.hash);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let text = MINIMAL.replace("omega0 = 0.01", "omega0 = 0.01\nomega = 3");
        match ScenarioFile::from_toml(&text) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "drive.omega");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_errors_carry_paths() {
        let text = MINIMAL.replace("omega0 = 0.01", "omega0 = 0.01\nintensity = 1.0");
        let err = ScenarioFile::from_toml(&text).unwrap().resolve(None).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref path, .. } if path == "drive"),
            "{err}"
        );

        let text = MINIMAL.replace("points = 21", "points = 1");
        let err = ScenarioFile::from_toml(&text).unwrap().resolve(None).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "drive.detuning"));

        let text = MINIMAL.replace("positions = [[5e-7, 5e-7, 5e-7]]", "n_atoms = 3\ntemperature = 300.0");
        let err = ScenarioFile::from_toml(&text).unwrap().resolve(None).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "dynamics.method"));
    }

    #[test]
    fn output_directory_does_not_change_hash() {
        let a = ScenarioFile::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output.directory = PathBuf::from("elsewhere");
        assert_eq!(a.resolve(None).unwrap().hash, b.resolve(None).unwrap().hash);
        b.seed = 8;
        assert_ne!(a.resolve(None).unwrap().hash, b.resolve(None).unwrap().hash);
    }

    #[test]
    fn minimal_run_writes_one_spectrum_and_one_fit() {
        let s = ScenarioFile::from_toml(MINIMAL).unwrap().resolve(None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = s.run_to_dir(dir.path()).unwrap();
        let spectra: Vec<_> = out
            .files
            .iter()
            .filter(|f| f.extension().is_some_and(|e| e == "csv"))
            .collect();
        assert_eq!(spectra.len(), 1);
        let fits: FitFile = toml::from_str(&fs::read_to_string(dir.path().join("fits.toml")).unwrap()).unwrap();
        assert_eq!(fits.fit.len(), 1);
        let f = &fits.fit[0];
        assert!(f.converged);
        assert!(f.center.unwrap().abs() < 1e-6);
        assert!((f.width.unwrap() - 1.0).abs() < 1e-3);
        assert!(dir.path().join("manifest.toml").exists());
    }
}
