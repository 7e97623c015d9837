//! Faddeeva function w(z) = e^{−z²}·erfc(−iz).
//!
//! Weideman's rational expansion in (L + iz)/(L − iz) with 40 terms gives
//! about 1e-13 relative accuracy everywhere in the closed upper half plane.
//! The lower half plane uses w(z) = 2e^{−z²} − w(−z).

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

const TERMS: usize = 40;

struct Expansion {
    l: f64,
    a: [f64; TERMS + 1],
}

fn expansion() -> &'static Expansion {
    static E: OnceLock<Expansion> = OnceLock::new();
    E.get_or_init(|| {
        let n = TERMS;
        let m = 2 * n;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        let mut a = [0.0; TERMS + 1];
        // The k = −m sample sits at θ = −π where the weight vanishes.
        for (j, aj) in a.iter_mut().enumerate() {
            let mut sum = 0.0;
            for k in -(m as i64) + 1..m as i64 {
                let theta = k as f64 * PI / m as f64;
                let t = l * (0.5 * theta).tan();
                sum += (-t * t).exp() * (l * l + t * t) * (j as f64 * theta).cos();
            }
            *aj = sum / (2 * m) as f64;
        }
        Expansion { l, a }
    })
}

fn upper(z: Complex64) -> Complex64 {
    let e = expansion();
    let i = Complex64::new(0.0, 1.0);
    let den = e.l - i * z;
    let big_z = (e.l + i * z) / den;
    let mut p = Complex64::new(0.0, 0.0);
    for n in (1..=TERMS).rev() {
        p = p * big_z + e.a[n];
    }
    2.0 * p / (den * den) + 1.0 / (PI.sqrt() * den)
}

/// Faddeeva function on the whole complex plane.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        let mut w = upper(z);
        if z.im == 0.0 {
            // Exact on the real axis; avoids absolute error in the tiny Gaussian tail.
            w.re = (-z.re * z.re).exp();
        }
        w
    } else {
        2.0 * (-z * z).exp() - upper(-z)
    }
}

/// dw/dz = −2z·w(z) + 2i/√π.
pub fn faddeeva_derivative(z: Complex64, w: Complex64) -> Complex64 {
    -2.0 * z * w + Complex64::new(0.0, 2.0 / PI.sqrt())
}
