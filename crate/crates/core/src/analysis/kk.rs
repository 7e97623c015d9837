//! Kramers-Kronig transforms on a uniform detuning grid.
//!
//! Re χ(Δ) = (1/π)·P∫ Im χ(Δ')/(Δ' − Δ) dΔ' over the full line, evaluated with
//! Maclaurin's rule: only nodes an odd number of steps away from the
//! singular node contribute, with weight 2h. This pairs the nodes
//! symmetrically around the pole so the principal value cancels exactly.

use std::f64::consts::PI;

use log::warn;

use crate::error::{Error, Result};

/// Fraction of the grid on each side covered by the cosine taper.
pub const TAPER_FRACTION: f64 = 0.05;

fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.len() < 4 {
        return Err(Error::domain("Kramers-Kronig needs at least 4 grid points"));
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::domain("grid must be increasing"));
    }
    for (i, w) in grid.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-6 * h {
            return Err(Error::domain(format!("grid is not uniform at node {}", i + 1)));
        }
    }
    Ok(h)
}

/// Cosine taper: 1 in the interior, falling smoothly to 0 over the outer
/// `TAPER_FRACTION` of the grid on either side.
pub fn taper(n: usize) -> Vec<f64> {
    let edge = ((n as f64) * TAPER_FRACTION).round() as usize;
    (0..n)
        .map(|i| {
            let d = i.min(n - 1 - i);
            if edge == 0 || d >= edge {
                1.0
            } else {
                0.5 * (1.0 - (PI * d as f64 / edge as f64).cos())
            }
        })
        .collect()
}

fn hilbert(grid: &[f64], f: &[f64], sign: f64) -> Result<Vec<f64>> {
    if grid.len() != f.len() {
        return Err(Error::domain("grid and values differ in length"));
    }
    check_uniform(grid)?;
    let w = taper(f.len());
    let g: Vec<f64> = f.iter().zip(&w).map(|(a, b)| a * b).collect();
    let n = g.len();
    let out = (0..n)
        .map(|i| {
            let mut s = 0.0;
            let start = if i % 2 == 0 { 1 } else { 0 };
            for j in (start..n).step_by(2) {
                s += g[j] / (j as f64 - i as f64);
            }
            // (1/π)·2h·Σ g_j/((j − i)h)
            sign * 2.0 * s / PI
        })
        .collect();
    Ok(out)
}

/// Relative size of the edge values compared to the peak.
fn edge_fraction(f: &[f64]) -> f64 {
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    f[0].abs().max(f[f.len() - 1].abs()) / peak
}

/// Re χ from Im χ on a uniform grid. Warns when Im χ has not decayed to 1% of
/// its peak at the grid edges.
pub fn kramers_kronig(grid: &[f64], im_chi: &[f64]) -> Result<Vec<f64>> {
    let edge = edge_fraction(im_chi);
    if edge > 0.01 {
        warn!(
            "Im χ at the grid edge is {:.2}% of its peak; expect a truncation error of that order",
            100.0 * edge
        );
    }
    hilbert(grid, im_chi, 1.0)
}

/// Im χ from Re χ, the inverse relation.
pub fn kramers_kronig_inverse(grid: &[f64], re_chi: &[f64]) -> Result<Vec<f64>> {
    hilbert(grid, re_chi, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, half: f64) -> Vec<f64> {
        (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
    }

    /// χ = −1/(Δ + iγ/2): causal absorber, Im χ > 0.
    fn pair(d: f64, g: f64) -> (f64, f64) {
        let den = d * d + 0.25 * g * g;
        (-d / den, 0.5 * g / den)
    }

    #[test]
    fn lorentzian_pair_interior() {
        let g = 1.0;
        let x = grid(4001, 200.0);
        let im: Vec<f64> = x.iter().map(|&d| pair(d, g).1).collect();
        let re = kramers_kronig(&x, &im).unwrap();
        let peak = im.iter().cloned().fold(0.0, f64::max);
        for (i, &d) in x.iter().enumerate() {
            if d.abs() <= 100.0 {
                let err = (re[i] - pair(d, g).0).abs();
                assert!(err < 0.01 * peak, "Δ = {d}: {err}");
            }
        }
    }

    #[test]
    fn zero_and_linearity() {
        let x = grid(201, 10.0);
        assert!(kramers_kronig(&x, &vec![0.0; 201]).unwrap().iter().all(|v| *v == 0.0));
        let f: Vec<f64> = x.iter().map(|&d| pair(d, 1.0).1).collect();
        let g: Vec<f64> = x.iter().map(|&d| pair(d - 2.0, 0.5).1).collect();
        let mix: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let kf = kramers_kronig(&x, &f).unwrap();
        let kg = kramers_kronig(&x, &g).unwrap();
        let km = kramers_kronig(&x, &mix).unwrap();
        for i in 0..x.len() {
            assert!((km[i] - (2.0 * kf[i] - 3.0 * kg[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn double_transform_returns_input() {
        let x = grid(4001, 400.0);
        let im: Vec<f64> = x.iter().map(|&d| pair(d, 4.0).1).collect();
        let re = kramers_kronig(&x, &im).unwrap();
        let back = kramers_kronig_inverse(&x, &re).unwrap();
        let peak = im.iter().cloned().fold(0.0, f64::max);
        for (i, &d) in x.iter().enumerate() {
            if d.abs() <= 0.5 * 400.0 {
                assert!((back[i] - im[i]).abs() < 0.02 * peak, "Δ = {d}");
            }
        }
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let x = vec![0.0, 1.0, 2.5, 3.0, 4.0];
        assert!(kramers_kronig(&x, &[0.0; 5]).is_err());
    }
}
