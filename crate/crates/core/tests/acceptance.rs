//! Acceptance criteria 1-10. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr (uncaptured) and then asserts.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use slotqed::analysis::{fit_fano_voigt, FanoVoigt, FitInit, FitOptions};
use slotqed::dynamics::ShiftRow;
use slotqed::oracle::{g0_for_purcell, single_atom_scattering};
use slotqed::params::{PhysicalParams, SPEED_OF_LIGHT};
use slotqed::scenario::{Scenario, ScenarioFile, SweepPoint, SweepSpec};
use slotqed::spectrum::Spectrum;
use slotqed::verify;

fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {}  {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str) -> ScenarioFile {
    ScenarioFile::load(&scenario_path(name)).unwrap()
}

fn resolve(f: &ScenarioFile) -> Scenario {
    f.resolve(None).unwrap()
}

fn shifts(points: &[SweepPoint], g0: f64) -> Vec<(f64, f64, f64, bool)> {
    points
        .iter()
        .map(|p| {
            let r: ShiftRow = p.shift.expect("shift sweep");
            (p.x, r.shift / g0, r.shift_err / g0, r.ok)
        })
        .collect()
}

fn fmt_rows(rows: &[(f64, f64, f64, bool)]) -> String {
    rows.iter()
        .map(|(x, s, e, _)| format!("{x:.4}:{s:+.3}±{e:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for k in i..=j {
            r[idx[k]] = 0.5 * (i + j) as f64;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn criterion_01_single_atom_purcell_line() {
    let s = resolve(&load("single_atom.toml"));
    let g0 = s.sim.params.gamma0;
    let points = s.run().unwrap();
    let fit = points[0].fit.unwrap();
    let fwhm = fit.width / g0;

    let p = PhysicalParams::default();
    let v_p = SPEED_OF_LIGHT / p.n_eff;
    let t0 = single_atom_scattering(0.0, g0_for_purcell(35.0, p.gamma0, v_p), v_p, p.gamma0, p.gamma0)
        .unwrap()
        .transmission
        .norm();
    let pass = fit.converged && (fwhm / 35.0 - 1.0).abs() <= 0.02 && (t0 * 35.0 - 1.0).abs() <= 0.01;
    report(
        1,
        pass,
        &format!("FWHM = {fwhm:.4} Γ0 (35 ± 2%), |t(0)| = {t0:.6} (1/35 ± 1%)"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_greens_identities() {
    let checks = verify::run_checks();
    let wanted = ["Im G_FS self limit", "Purcell identity", "1 + r = t"];
    let picked: Vec<_> = checks
        .iter()
        .filter(|c| wanted.iter().any(|w| c.name.starts_with(w)))
        .collect();
    assert_eq!(picked.len(), 3);
    let pass = picked.iter().all(|c| c.pass);
    let detail: Vec<String> = picked
        .iter()
        .map(|c| format!("{} = {:.2e}", c.name, c.measured))
        .collect();
    report(2, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_03_mean_field_vs_lindblad() {
    let drives = [3e-2, 3e-3, 3e-4, 3e-5];
    let gaps: Vec<f64> = drives
        .iter()
        .map(|&om| verify::mean_field_pair_gap(om).unwrap())
        .collect();
    let saturation = 8.0 * drives[0] * drives[0];
    let pass = saturation < 0.01 && gaps.iter().all(|g| *g < 0.05) && gaps.windows(2).all(|w| w[1] < w[0]);
    let detail: Vec<String> = drives
        .iter()
        .zip(&gaps)
        .map(|(o, g)| format!("Ω0 = {o:e}: {g:.2e}"))
        .collect();
    report(3, pass, &format!("relative σ_ee gap {}", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_04_dimensional_crossover() {
    let s = resolve(&load("box_length.toml"));
    assert!(s.file.trials >= 20);
    let lam = s.sim.params.lambda_probe;
    let g0 = s.sim.params.gamma0;
    let rows = shifts(&s.run().unwrap(), g0);
    assert!(rows.iter().all(|r| r.0 > 0.0));
    let at = |l: f64| rows.iter().find(|r| (r.0 / lam - l).abs() < 1e-9).unwrap().1;
    // The sign change must happen inside [0.2λ, 0.6λ] and nowhere else.
    let changes: Vec<f64> = rows
        .windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| 0.5 * (w[0].0 + w[1].0) / lam)
        .collect();
    let pass = at(0.1) < 0.0 && at(2.0) > 0.0 && changes.len() == 1 && changes.iter().all(|c| (0.2..=0.6).contains(c));
    let scaled: Vec<_> = rows.iter().map(|r| (r.0 / lam, r.1, r.2, r.3)).collect();
    report(4, pass, &format!("shift (l/λ:Γ0) {}", fmt_rows(&scaled)));
    assert!(pass);
}

/// Density sweep in the slot gap with guided pairs on; shared by criteria 5 and 6.
struct DensityRun {
    rows: Vec<(f64, f64, f64, bool)>,
    max_atoms: usize,
    trials: usize,
}

fn slot_density() -> &'static DensityRun {
    static CELL: OnceLock<DensityRun> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = resolve(&load("slot_density.toml"));
        let points = s.run().unwrap();
        DensityRun {
            rows: shifts(&points, s.sim.params.gamma0),
            max_atoms: points.iter().map(|p| p.n_atoms).max().unwrap(),
            trials: s.file.trials,
        }
    })
}

#[test]
fn criterion_05_density_linearity() {
    let run = slot_density();
    let rows = &run.rows;
    assert!(run.trials >= 30 && run.max_atoms <= 60);
    let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let r2 = pearson(&x, &y).powi(2);
    let pass = y.iter().all(|v| *v > 0.0) && r2 >= 0.9;
    report(5, pass, &format!("shift ((kr)^-3:Γ0) {}; R² = {r2:.3}", fmt_rows(rows)));
    assert!(pass);
}

#[test]
fn criterion_06_purcell_enhancement() {
    let on = slot_density().rows.iter().find(|r| r.0 == 5.0).unwrap().1;
    let mut f = load("slot_density.toml");
    f.couplings.guided_pairs = false;
    f.sweep = SweepSpec::Density { normalized: vec![5.0] };
    f.drive.detuning.min = -150.0;
    f.drive.detuning.max = 150.0;
    let s = resolve(&f);
    let off_rows = shifts(&s.run().unwrap(), s.sim.params.gamma0);
    let off = off_rows[0].1;
    let ratio = on / off;
    let pass = (4.0..=16.0).contains(&ratio);
    report(
        6,
        pass,
        &format!(
            "at (kr)^-3 = 5: guided pairs on {on:+.3} Γ0, off {off:+.3} ± {:.3} Γ0, ratio {ratio:.2}",
            off_rows[0].2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_shift_saturation() {
    let s = resolve(&load("slot_intensity.toml"));
    let rows = shifts(&s.run().unwrap(), s.sim.params.gamma0);
    assert!(rows.len() >= 8);
    let om: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert!(om[om.len() - 1] / om[0] >= 100.0 * (1.0 - 1e-9));
    let mag: Vec<f64> = rows.iter().map(|r| r.1.abs()).collect();
    let rho = pearson(&ranks(&om), &ranks(&mag));
    let ratio = mag[mag.len() - 1] / mag[0];
    let pass = rho <= -0.9 && ratio < 0.14;
    report(
        7,
        pass,
        &format!(
            "shift (Ω0/Γ0:Γ0) {}; Spearman {rho:.3}; last/first {ratio:.3}",
            fmt_rows(&rows)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_kerr_numbers() {
    let checks = verify::run_checks();
    let wanted = [
        "n2·I_photon (Rb)",
        "single-photon phase",
        "photons for a π shift",
        "n2·I_photon (Na)",
    ];
    let picked: Vec<_> = checks
        .iter()
        .filter(|c| wanted.iter().any(|w| c.name.starts_with(w)))
        .collect();
    assert_eq!(picked.len(), 4);
    let pass = picked.iter().all(|c| c.pass);
    let detail: Vec<String> = picked
        .iter()
        .map(|c| format!("{} = {:.4e}", c.name, c.measured))
        .collect();
    report(8, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_09_analysis_chain() {
    let checks = verify::run_checks();
    let faddeeva = checks.iter().find(|c| c.name.starts_with("Faddeeva")).unwrap();
    let kk = checks.iter().find(|c| c.name.starts_with("KK")).unwrap();

    // Noiseless Fano-Voigt roundtrip.
    let g0 = 2.0 * PI * 1.89e6;
    let truth = FanoVoigt::with_q(4.0 * g0, 2.0e-6, 6.0, 60.0 * g0, 12.0 * g0).unwrap();
    let x = Spectrum::uniform_grid(-300.0 * g0, 300.0 * g0, 301);
    let y: Vec<f64> = x.iter().map(|&d| truth.eval(d).unwrap()).collect();
    let init = FitInit::estimate(&x, &y, truth.omega_d);
    let fit = fit_fano_voigt(&x, &y, None, truth.omega_d, Some(init), &FitOptions::default()).unwrap();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let roundtrip = rel(fit.shift, truth.shift)
        .max(rel(fit.gamma_l, truth.gamma_l))
        .max(rel(fit.amplitude, truth.amplitude))
        .max(rel(fit.inv_q, truth.inv_q));

    // q → ∞ is the symmetric Voigt.
    let big_q = FanoVoigt::with_q(0.0, 1.0, 1e9, 40.0 * g0, 10.0 * g0).unwrap();
    let voigt = FanoVoigt { inv_q: 0.0, ..big_q };
    let mut q_err: f64 = 0.0;
    for d in Spectrum::uniform_grid(-150.0 * g0, 150.0 * g0, 61) {
        let v = voigt.eval(d).unwrap();
        q_err = q_err.max((big_q.eval(d).unwrap() - v).abs() / v);
    }

    let pass = faddeeva.pass && kk.pass && fit.converged && roundtrip <= 1e-6 && q_err <= 1e-6;
    report(
        9,
        pass,
        &format!(
            "Faddeeva {:.1e}, Fano-Voigt roundtrip {roundtrip:.1e}, KK {:.1e}, large-q {q_err:.1e}",
            faddeeva.measured, kk.measured
        ),
    );
    assert!(pass);
}

fn run_with_workers(s: &Scenario, workers: usize, dir: &Path) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| s.run_to_dir(dir)).unwrap();
}

fn tables(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("spectra")] {
        let Ok(entries) = fs::read_dir(&sub) else { continue };
        for e in entries {
            let p = e.unwrap().path();
            let keep = p.is_file() && p.file_name().is_some_and(|n| n != "manifest.toml");
            if keep {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let mut f = load("thermal_slot.toml");
    f.trials = 6;
    let thermal = resolve(&f);
    let mut g = load("box_length.toml");
    g.trials = 4;
    g.sweep = SweepSpec::BoxLength {
        cross: 4.587e-7,
        lengths: vec![3.058e-7, 1.529e-6],
    };
    let sweep = resolve(&g);

    let mut same = true;
    let mut n_files = 0;
    for s in [&thermal, &sweep] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_with_workers(s, 1, a.path());
        run_with_workers(s, 3, b.path());
        let ta = tables(a.path());
        let tb = tables(b.path());
        n_files += ta.len();
        same &= !ta.is_empty() && ta == tb;
    }
    report(
        10,
        same,
        &format!("{n_files} output files byte-identical with 1 and 3 workers"),
    );
    assert!(same);
}
