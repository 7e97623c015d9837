//! Lineshape fitting and the refractive-index / Kerr chain.

pub mod faddeeva;
pub mod kerr;
pub mod kk;
pub mod lineshape;

pub use faddeeva::faddeeva;
pub use kerr::{
    kerr_coefficient, refractive_index, resonance_slope, single_photon_intensity, single_photon_phase,
    susceptibility_from_transmission, KerrEstimate,
};
pub use kk::{kramers_kronig, kramers_kronig_inverse};
pub use lineshape::{
    fano_voigt, fit_fano_voigt, fit_lineshape, fit_lorentzian, lorentzian, FanoVoigt, FitInit, FitOptions, FitResult,
    LorentzFit,
};
