//! Pointwise closure laws: Carman-Kozeny permeability, interfacial area,
//! Arrhenius surface reaction rate, reaction heat, interface concentration,
//! reaction rate and mixture thermal conductivity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("porosity {0} outside (0, 1)")]
    PorosityOutOfRange(f64),
    #[error("permeability must be positive, got {0}")]
    NonPositivePermeability(f64),
    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
}

/// Physical constants of the model, SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    /// Pseudo-compressibility (1/Pa).
    pub gamma: f64,
    /// Fluid viscosity (Pa s).
    pub mu: f64,
    /// Molecular diffusion per axis (m^2/s); a single entry applies to all axes.
    pub diffusion: Vec<f64>,
    /// Mass-transfer coefficient (m/s).
    pub k_c: f64,
    /// Initial interfacial area (1/m).
    pub a0: f64,
    /// Acid dissolving power (kg/mol).
    pub alpha: f64,
    pub rho_s: f64,
    pub rho_f: f64,
    /// Heat capacities (J/(kg K)).
    pub theta_s: f64,
    pub theta_f: f64,
    /// Thermal conductivities (W/(m K)).
    pub lambda_s: f64,
    pub lambda_f: f64,
    /// Surface reaction rate at the reference temperature (m/s).
    pub k_s0: f64,
    /// Activation energy (J/mol).
    pub e_g: f64,
    /// Molar gas constant (J/(mol K)).
    pub r_g: f64,
    /// Reference temperature of `k_s0` (K).
    pub t_ref: f64,
    /// Injected acid concentration (mol/m^3).
    pub c_inj: f64,
}

impl PhysParams {
    /// Unit-scale parameter set used by the manufactured-solution studies.
    pub fn verification() -> Self {
        PhysParams {
            gamma: 1.0,
            mu: 1.0,
            diffusion: vec![1e-2],
            k_c: 1.0,
            a0: 1.0,
            alpha: 1.0,
            rho_s: 10.0,
            rho_f: 1.0,
            theta_s: 1.0,
            theta_f: 10.0,
            lambda_s: 10.0,
            lambda_f: 1.0,
            k_s0: 1.0,
            e_g: 1.0,
            r_g: 1.0,
            t_ref: 10.0,
            c_inj: 1.0,
        }
    }

    /// Limestone/HCl parameter set of the dissolution scenarios.
    pub fn carbonate() -> Self {
        PhysParams {
            gamma: 1.0,
            mu: 1.0e-3,
            diffusion: vec![1e-9],
            k_c: 1e-3,
            a0: 0.5,
            alpha: 5e-2,
            rho_s: 2.71e3,
            rho_f: 1.01e3,
            theta_s: 2.0e2,
            theta_f: 4.184e3,
            lambda_s: 5.526,
            lambda_f: 0.58,
            k_s0: 2e-3,
            e_g: 5.02416e4,
            r_g: 8.314,
            t_ref: 298.0,
            c_inj: 1e3,
        }
    }

    /// Diffusion coefficient along `axis`.
    pub fn diffusion(&self, axis: usize) -> f64 {
        *self.diffusion.get(axis).or(self.diffusion.last()).unwrap_or(&0.0)
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        let named = [
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("k_c", self.k_c),
            ("a0", self.a0),
            ("alpha", self.alpha),
            ("rho_s", self.rho_s),
            ("rho_f", self.rho_f),
            ("theta_s", self.theta_s),
            ("theta_f", self.theta_f),
            ("lambda_s", self.lambda_s),
            ("lambda_f", self.lambda_f),
            ("k_s0", self.k_s0),
            ("e_g", self.e_g),
            ("r_g", self.r_g),
            ("t_ref", self.t_ref),
            ("c_inj", self.c_inj),
        ];
        for (name, value) in named {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConstitutiveError::NonPositiveParam { name, value });
            }
        }
        if self.diffusion.is_empty() {
            return Err(ConstitutiveError::NonPositiveParam { name: "diffusion", value: 0.0 });
        }
        for &value in &self.diffusion {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConstitutiveError::NonPositiveParam { name: "diffusion", value });
            }
        }
        Ok(())
    }
}

/// Distance kept from the `(1 - phi)^-2` pole of the Carman-Kozeny law.
pub const POROSITY_EPS: f64 = 1e-9;
/// Smallest porosity fed to the Carman-Kozeny law.
pub const POROSITY_MIN: f64 = 1e-12;

fn check_porosity(phi: f64) -> Result<(), ConstitutiveError> {
    if phi > 0.0 && phi < 1.0 {
        Ok(())
    } else {
        Err(ConstitutiveError::PorosityOutOfRange(phi))
    }
}

/// Carman-Kozeny permeability `K(phi)` relative to the initial state `(phi0, k0)`.
pub fn permeability(phi: f64, phi0: f64, k0: f64) -> Result<f64, ConstitutiveError> {
    check_porosity(phi)?;
    check_porosity(phi0)?;
    Ok(carman_kozeny(phi, phi0, k0))
}

#[inline]
fn carman_kozeny(phi: f64, phi0: f64, k0: f64) -> f64 {
    let r = phi * (1.0 - phi0) / (phi0 * (1.0 - phi));
    k0 * (phi / phi0) * r * r
}

/// Carman-Kozeny with `phi` clipped to `[POROSITY_MIN, 1 - POROSITY_EPS]`.
/// The flag reports whether clipping happened.
#[inline]
pub fn permeability_guarded(phi: f64, phi0: f64, k0: f64) -> (f64, bool) {
    permeability_capped(phi, phi0, k0, 1.0 - POROSITY_EPS)
}

/// Carman-Kozeny with `phi` clipped to `[POROSITY_MIN, phi_max]`; `phi_max`
/// is itself kept at or below `1 - POROSITY_EPS`.
#[inline]
pub fn permeability_capped(phi: f64, phi0: f64, k0: f64, phi_max: f64) -> (f64, bool) {
    let clipped = phi.clamp(POROSITY_MIN, phi_max.min(1.0 - POROSITY_EPS));
    (carman_kozeny(clipped, phi0, k0), clipped != phi)
}

/// `dK/dphi` of the Carman-Kozeny law.
pub fn permeability_derivative(phi: f64, phi0: f64, k0: f64) -> f64 {
    let c = k0 * (1.0 - phi0).powi(2) / phi0.powi(3);
    c * phi * phi * (3.0 - phi) / (1.0 - phi).powi(3)
}

/// Interfacial area from porosity and permeability.
pub fn interfacial_area(phi: f64, phi0: f64, a0: f64, k: f64, k0: f64) -> Result<f64, ConstitutiveError> {
    check_porosity(phi)?;
    check_porosity(phi0)?;
    if !(k > 0.0) {
        return Err(ConstitutiveError::NonPositivePermeability(k));
    }
    if !(k0 > 0.0) {
        return Err(ConstitutiveError::NonPositivePermeability(k0));
    }
    Ok(a0 * (phi / phi0) * (k0 * phi / (k * phi0)).sqrt())
}

/// Interfacial area with `K` taken from the Carman-Kozeny law, which reduces
/// to `a0 (1 - phi) / (1 - phi0)`.
#[inline]
pub fn interfacial_area_ck(phi: f64, phi0: f64, a0: f64) -> f64 {
    a0 * (1.0 - phi) / (1.0 - phi0)
}

/// Arrhenius surface reaction rate `k_s(T)`.
pub fn surface_rate(temp: f64, p: &PhysParams) -> Result<f64, ConstitutiveError> {
    if !(temp > 0.0) {
        return Err(ConstitutiveError::NonPositiveTemperature(temp));
    }
    Ok(surface_rate_unchecked(temp, p))
}

#[inline]
pub(crate) fn surface_rate_unchecked(temp: f64, p: &PhysParams) -> f64 {
    p.k_s0 * ((p.e_g / p.r_g) * (1.0 / p.t_ref - 1.0 / temp)).exp()
}

/// Reaction heat per mole of acid consumed (J/mol).
#[inline]
pub fn reaction_heat(temp: f64) -> f64 {
    (-9702.0 + 16.97 * temp - 0.00234 * temp * temp).abs()
}

/// Fraction `1 - 1/(1 + k_s/k_c)` of the cup-mixing concentration that reacts.
#[inline]
pub fn reactive_fraction(temp: f64, p: &PhysParams) -> f64 {
    1.0 - 1.0 / (1.0 + surface_rate_unchecked(temp, p) / p.k_c)
}

/// Interface concentration `c_s = c_f / (1 + k_s(T)/k_c)`.
pub fn interface_conc(c_f: f64, temp: f64, p: &PhysParams) -> Result<f64, ConstitutiveError> {
    Ok(c_f / (1.0 + surface_rate(temp, p)? / p.k_c))
}

/// `R(c_f, T) = k_c (c_f - c_s)`.
pub fn reaction_rate(c_f: f64, temp: f64, p: &PhysParams) -> Result<f64, ConstitutiveError> {
    let c_s = interface_conc(c_f, temp, p)?;
    Ok(p.k_c * (c_f - c_s))
}

/// Same rate in the factored form `k_c (1 - 1/(1 + k_s/k_c)) c_f`.
pub fn reaction_rate_factored(c_f: f64, temp: f64, p: &PhysParams) -> Result<f64, ConstitutiveError> {
    if !(temp > 0.0) {
        return Err(ConstitutiveError::NonPositiveTemperature(temp));
    }
    Ok(p.k_c * reactive_fraction(temp, p) * c_f)
}

/// Mixture conductivity `(1 - phi) lambda_s + phi lambda_f`.
#[inline]
pub fn thermal_conductivity(phi: f64, p: &PhysParams) -> f64 {
    (1.0 - phi) * p.lambda_s + phi * p.lambda_f
}

/// Volumetric heat capacity `rho_s (1 - phi) theta_s + rho_f phi theta_f`.
#[inline]
pub fn heat_capacity(phi: f64, p: &PhysParams) -> f64 {
    p.rho_s * (1.0 - phi) * p.theta_s + p.rho_f * phi * p.theta_f
}

/// `max(0, min(c, c_max))`.
#[inline]
pub fn clamp_conc(c: f64, c_max: f64) -> f64 {
    c.min(c_max).max(0.0)
}
