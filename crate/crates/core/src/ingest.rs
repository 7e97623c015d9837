//! Text formats: mode-profile grids, spectrum tables and the oracle tables
//! used by verification.
//!
//! Tables are comma separated. Leading `#` lines carry `key = value`
//! metadata, then one line of column names and one line of units.
//!
//! Mode-profile grid (version 1):
//!
//! ```text
//! # slotqed mode profile v1
//! pf_max = 35
//! nx = 3
//! ny = 2
//! x = -1e-7 0 1e-7
//! y = 0 2.5e-7
//! -1e-7 0 0.2
//! ...
//! ```
//!
//! One `x y |E|` row per node in any order; |E| is rescaled to a maximum of 1.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mode::ModeProfile;
use crate::spectrum::{Spectrum, SpectrumMeta};

pub const MODE_HEADER: &str = "# slotqed mode profile v1";

/// Parsed contents of a mode-profile file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawModeGrid {
    pub pf_max: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major with x fastest.
    pub amplitude: Vec<f64>,
}

fn parse_err(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(file: &Path, line: usize, tok: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(file, line, format!("expected a number, found `{tok}`")))
}

pub fn read_mode_profile(path: &Path) -> Result<RawModeGrid> {
    let text = fs::read_to_string(path)?;
    parse_mode_profile(&text, path)
}

pub fn parse_mode_profile(text: &str, file: &Path) -> Result<RawModeGrid> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, l)) if l == MODE_HEADER => {}
        Some((n, l)) => return Err(parse_err(file, n, format!("expected `{MODE_HEADER}`, found `{l}`"))),
        None => return Err(parse_err(file, 1, "empty file")),
    }
    let mut header: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let key = key.trim();
            if !matches!(key, "pf_max" | "nx" | "ny" | "x" | "y") {
                return Err(parse_err(file, n, format!("unknown header key `{key}`")));
            }
            if header.insert(key, (n, value.trim())).is_some() {
                return Err(parse_err(file, n, format!("duplicate header key `{key}`")));
            }
        } else {
            rows.push((n, line));
        }
    }
    let get = |key: &str| {
        header
            .get(key)
            .copied()
            .ok_or_else(|| parse_err(file, 1, format!("missing header key `{key}`")))
    };
    let (ln, v) = get("pf_max")?;
    let pf_max = parse_f64(file, ln, v)?;
    if !(pf_max >= 1.0) {
        return Err(parse_err(file, ln, "pf_max must be >= 1"));
    }
    let count = |key: &str| -> Result<usize> {
        let (ln, v) = get(key)?;
        v.parse::<usize>()
            .map_err(|_| parse_err(file, ln, format!("`{key}` must be a count")))
    };
    let nx = count("nx")?;
    let ny = count("ny")?;
    let axis = |key: &str, len: usize| -> Result<Vec<f64>> {
        let (ln, v) = get(key)?;
        let vals = v
            .split_whitespace()
            .map(|t| parse_f64(file, ln, t))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != len {
            return Err(parse_err(
                file,
                ln,
                format!("`{key}` has {} values, expected {len}", vals.len()),
            ));
        }
        if len < 2 || vals.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(parse_err(
                file,
                ln,
                format!("`{key}` axis must be strictly increasing with >= 2 nodes"),
            ));
        }
        Ok(vals)
    };
    let xs = axis("x", nx)?;
    let ys = axis("y", ny)?;
    let locate = |axis: &[f64], v: f64| {
        let tol = 1e-9 * (axis[axis.len() - 1] - axis[0]);
        axis.iter().position(|a| (a - v).abs() <= tol)
    };
    let mut amplitude = vec![f64::NAN; nx * ny];
    for (n, line) in &rows {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(
                file,
                *n,
                format!("expected `x y |E|`, found {} fields", toks.len()),
            ));
        }
        let x = parse_f64(file, *n, toks[0])?;
        let y = parse_f64(file, *n, toks[1])?;
        let a = parse_f64(file, *n, toks[2])?;
        if !(a.is_finite() && a >= 0.0) {
            return Err(parse_err(
                file,
                *n,
                format!("amplitude must be finite and >= 0, got {a}"),
            ));
        }
        let (Some(i), Some(j)) = (locate(&xs, x), locate(&ys, y)) else {
            return Err(parse_err(file, *n, format!("({x}, {y}) is not a grid node")));
        };
        let slot = &mut amplitude[j * nx + i];
        if !slot.is_nan() {
            return Err(parse_err(file, *n, format!("node ({x}, {y}) listed twice")));
        }
        *slot = a;
    }
    if rows.len() != nx * ny {
        let last = rows.last().map_or(1, |r| r.0);
        return Err(parse_err(
            file,
            last,
            format!("{} rows, expected {}", rows.len(), nx * ny),
        ));
    }
    Ok(RawModeGrid {
        pf_max,
        xs,
        ys,
        amplitude,
    })
}

/// Serialize a tabulated profile in the version-1 format.
pub fn format_mode_profile(profile: &ModeProfile) -> Result<String> {
    let (xs, ys, amp) = profile
        .grid()
        .ok_or_else(|| Error::domain("only tabulated profiles can be written; sample it first"))?;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
    let mut s = String::new();
    writeln!(s, "{MODE_HEADER}").unwrap();
    writeln!(s, "pf_max = {:e}", profile.pf_max()).unwrap();
    writeln!(s, "nx = {}", xs.len()).unwrap();
    writeln!(s, "ny = {}", ys.len()).unwrap();
    writeln!(s, "x = {}", join(xs)).unwrap();
    writeln!(s, "y = {}", join(ys)).unwrap();
    for (j, y) in ys.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            writeln!(s, "{x:e} {y:e} {:e}", amp[j * xs.len() + i]).unwrap();
        }
    }
    Ok(s)
}

pub fn write_mode_profile(path: &Path, profile: &ModeProfile) -> Result<()> {
    fs::write(path, format_mode_profile(profile)?)?;
    Ok(())
}

/// Column-oriented table with `#` metadata, a names line and a units line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(meta: Vec<(String, String)>, columns: &[&str], units: &[&str]) -> Self {
        Self {
            meta,
            columns: columns.iter().map(|s| s.to_string()).collect(),
            units: units.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| format_number(*v)).collect());
    }

    pub fn push(&mut self, values: Vec<String>) {
        self.rows.push(values);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            writeln!(s, "# {k} = {v}").unwrap();
        }
        writeln!(s, "{}", self.columns.join(",")).unwrap();
        writeln!(s, "{}", self.units.join(",")).unwrap();
        for r in &self.rows {
            writeln!(s, "{}", r.join(",")).unwrap();
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)?;
        let mut meta = Vec::new();
        let mut body = String::new();
        let mut first_body_line = 0;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if first_body_line == 0 {
                if let Some(rest) = line.strip_prefix('#') {
                    if let Some((k, v)) = rest.split_once('=') {
                        meta.push((k.trim().to_string(), v.trim().to_string()));
                    }
                    continue;
                }
                first_body_line = i + 1;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(path, line + first_body_line - 1, e.to_string())
            })?;
            records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        if records.len() < 2 {
            return Err(parse_err(
                path,
                first_body_line.max(1),
                "missing column-name or unit line",
            ));
        }
        let rows = records.split_off(2);
        Ok(Self {
            meta,
            columns: records[0].clone(),
            units: records[1].clone(),
            rows,
        })
    }

    /// Line number in the source file of data row `i`.
    pub fn line_of_row(&self, i: usize) -> usize {
        self.meta.len() + 3 + i
    }
}

/// Fixed scientific formatting for every number written to a table.
pub fn format_number(v: f64) -> String {
    format!("{v:.12e}")
}

/// Unit conversion factor to rad/s for a declared detuning unit.
fn detuning_factor(unit: &str, gamma0: Option<f64>) -> Result<f64> {
    match unit {
        "rad/s" => Ok(1.0),
        "MHz" => Ok(2.0 * PI * 1e6),
        "Gamma0" => gamma0.ok_or_else(|| Error::domain("detunings in Gamma0 need gamma0 metadata")),
        other => Err(Error::domain(format!("unknown detuning unit `{other}`"))),
    }
}

fn spectrum_meta(table: &Table) -> SpectrumMeta {
    SpectrumMeta {
        config_hash: table.meta_value("config_hash").unwrap_or_default().to_string(),
        seed: table.meta_value("seed").and_then(|v| v.parse().ok()).unwrap_or(0),
        trials: table.meta_value("trials").and_then(|v| v.parse().ok()).unwrap_or(0),
        aborted: Vec::new(),
    }
}

/// Read a spectrum table: detuning column first, value second, optional
/// error third. Units come from the units line; Γ0-relative detunings need a
/// `gamma0` metadata entry (rad/s) or the `gamma0` argument.
pub fn read_spectrum_table(path: &Path, gamma0: Option<f64>) -> Result<Spectrum> {
    let table = Table::read(path)?;
    if table.columns.len() < 2 {
        return Err(parse_err(
            path,
            table.meta.len() + 1,
            "need at least detuning and value columns",
        ));
    }
    let unit = table
        .units
        .first()
        .map(String::as_str)
        .filter(|u| !u.is_empty())
        .ok_or_else(|| parse_err(path, table.meta.len() + 2, "missing detuning unit"))?;
    let g0 = table
        .meta_value("gamma0")
        .and_then(|v| v.parse::<f64>().ok())
        .or(gamma0);
    let factor = detuning_factor(unit, g0).map_err(|e| parse_err(path, table.meta.len() + 2, e.to_string()))?;
    let with_err = table.columns.len() >= 3;
    let mut det = Vec::new();
    let mut val = Vec::new();
    let mut err = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let line = table.line_of_row(i);
        let num = |k: usize| -> Result<f64> {
            let tok = row.get(k).ok_or_else(|| parse_err(path, line, "short row"))?;
            let v = parse_f64(path, line, tok)?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("non-finite value in row {i}")));
            }
            Ok(v)
        };
        det.push(num(0)? * factor);
        val.push(num(1)?);
        if with_err {
            err.push(num(2)?);
        }
    }
    if let Some(i) = det.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(parse_err(
            path,
            table.line_of_row(i + 1),
            "detuning grid is not strictly increasing",
        ));
    }
    let mut s = Spectrum::new(det, val, err).map_err(|e| parse_err(path, 0, e.to_string()))?;
    s.meta = spectrum_meta(&table);
    Ok(s)
}

/// Metadata lines shared by every output table.
pub fn standard_meta(meta: &SpectrumMeta, gamma0: f64) -> Vec<(String, String)> {
    vec![
        ("version".into(), crate::version_string()),
        ("config_hash".into(), meta.config_hash.clone()),
        ("seed".into(), meta.seed.to_string()),
        ("trials".into(), meta.trials.to_string()),
        ("gamma0".into(), format_number(gamma0)),
    ]
}

/// Spectrum as a table with detunings in Γ0 units.
pub fn spectrum_table(spectrum: &Spectrum, gamma0: f64) -> Table {
    let mut meta = standard_meta(&spectrum.meta, gamma0);
    if !spectrum.meta.aborted.is_empty() {
        let list: Vec<String> = spectrum.meta.aborted.iter().map(usize::to_string).collect();
        meta.push(("aborted_trials".into(), list.join(" ")));
    }
    let mut t = Table::new(meta, &["detuning", "absorption", "std_err"], &["Gamma0", "1", "1"]);
    for i in 0..spectrum.len() {
        let e = spectrum.std_err.get(i).copied().unwrap_or(0.0);
        t.push_numbers(&[spectrum.detunings[i] / gamma0, spectrum.absorption[i], e]);
    }
    t
}

pub fn write_spectrum_table(path: &Path, spectrum: &Spectrum, gamma0: f64) -> Result<()> {
    spectrum_table(spectrum, gamma0).write(path)
}

/// Faddeeva by its Maclaurin series Σ (iz)ⁿ/Γ(n/2 + 1); usable for |z| ≤ 4.
fn faddeeva_series(z: Complex64) -> Complex64 {
    let iz = Complex64::new(-z.im, z.re);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    // Γ(n/2 + 1) built up from Γ(1) = 1 and Γ(3/2) = √π/2.
    let mut gamma_even = 1.0;
    let mut gamma_odd = PI.sqrt() / 2.0;
    for n in 0..400 {
        let g = if n % 2 == 0 {
            if n > 0 {
                gamma_even *= n as f64 / 2.0;
            }
            gamma_even
        } else {
            if n > 1 {
                gamma_odd *= n as f64 / 2.0;
            }
            gamma_odd
        };
        let term = power / g;
        sum += term;
        if n > 10 && term.norm() < 1e-18 * sum.norm() {
            break;
        }
        power *= iz;
    }
    sum
}

/// Free-space G_xx straight from the dyadic closed form.
pub(crate) fn greens_closed_form(kr: f64, cos_x: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let g = (i * kr).exp() / (4.0 * PI * kr);
    let a = 1.0 + (i * kr - 1.0) / (kr * kr);
    let b = (3.0 - 3.0 * i * kr - kr * kr) / (kr * kr);
    g * (a + b * cos_x * cos_x)
}

/// Regenerate the reference grids under `dir`. Returns the written paths.
pub fn write_oracle_tables(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let provenance = |method: &str| {
        vec![
            ("version".to_string(), crate::version_string()),
            ("method".to_string(), method.to_string()),
        ]
    };

    let mut t = Table::new(
        provenance("Maclaurin series of w(z), |z| <= 2.5"),
        &["x", "y", "re", "im"],
        &["1", "1", "1", "1"],
    );
    // Beyond |z| ≈ 2.5 the alternating series loses too many digits to cancellation.
    for iy in 0..=5 {
        for ix in -5..=5 {
            let z = Complex64::new(ix as f64 * 0.5, iy as f64 * 0.5);
            if z.norm() <= 2.5 {
                let w = faddeeva_series(z);
                t.push_numbers(&[z.re, z.im, w.re, w.im]);
            }
        }
    }
    let p = dir.join("faddeeva.csv");
    t.write(&p)?;
    written.push(p);

    let mut t = Table::new(
        provenance("closed-form dyadic free-space Green's function, xx component"),
        &["kR", "geometry", "re", "im"],
        &["1", "-", "1", "1"],
    );
    for &kr in &[0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0] {
        for (name, c) in [("head_to_tail", 1.0), ("side_by_side", 0.0)] {
            let g = greens_closed_form(kr, c);
            t.push(vec![
                format_number(kr),
                name.into(),
                format_number(g.re),
                format_number(g.im),
            ]);
        }
    }
    let p = dir.join("greens.csv");
    t.write(&p)?;
    written.push(p);

    let mut t = Table::new(
        provenance("analytic Lorentzian pair chi = -1/(delta + i gamma/2), gamma = 1"),
        &["delta", "im_chi", "re_chi"],
        &["gamma", "1", "1"],
    );
    for i in -200..=200 {
        let d = i as f64 * 0.1;
        let den = d * d + 0.25;
        t.push_numbers(&[d, 0.5 / den, -d / den]);
    }
    let p = dir.join("kk_lorentzian.csv");
    t.write(&p)?;
    written.push(p);

    let mut t = Table::new(
        provenance("two-atom master equation, direct steady-state solve; free space, side-by-side kR = 0.2"),
        &["omega0", "detuning", "sigma_ee"],
        &["Gamma0", "Gamma0", "1"],
    );
    for (omega, det, ee) in crate::oracle::two_atom_reference_rows()? {
        t.push_numbers(&[omega, det, ee]);
    }
    let p = dir.join("lindblad_two_atom.csv");
    t.write(&p)?;
    written.push(p);
    Ok(written)
}
