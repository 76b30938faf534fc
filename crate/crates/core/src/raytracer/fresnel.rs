//! Fresnel reflection at lossy dielectric surfaces.
//!
//! The engine carries a single fixed (vertical) polarization. Materials are
//! described by relative permittivity ε_r and conductivity σ (S/m), folded
//! into the complex permittivity ε = ε_r − jσ/(2πfε₀).

use num_complex::Complex64;

use crate::scene::Material;
use crate::VACUUM_PERMITTIVITY;

/// Complex relative permittivity of `material` at carrier `f` (Hz).
pub fn complex_permittivity(material: &Material, f: f64) -> Complex64 {
    Complex64::new(
        material.eps_r,
        -material.sigma / (std::f64::consts::TAU * f * VACUUM_PERMITTIVITY),
    )
}

/// Reflection coefficient Γ(θᵢ) for the engine's fixed polarization:
///
/// Γ = (cos θᵢ − √(ε − sin²θᵢ)) / (cos θᵢ + √(ε − sin²θᵢ))
///
/// θᵢ is measured from the surface normal, θᵢ ∈ [0, π/2). At normal
/// incidence on a lossless dielectric this reduces to (1−√ε_r)/(1+√ε_r);
/// in the conductor limit Γ → −1; toward grazing Γ → −1 for any material.
pub fn fresnel_gamma(material: &Material, theta_i: f64, f: f64) -> Complex64 {
    debug_assert!(
        (0.0..std::f64::consts::FRAC_PI_2).contains(&theta_i),
        "incidence angle out of range: {theta_i}"
    );
    let eps = complex_permittivity(material, f);
    let cos_i = theta_i.cos();
    let sin2_i = theta_i.sin().powi(2);
    let root = (eps - sin2_i).sqrt();
    (cos_i - root) / (cos_i + root)
}
