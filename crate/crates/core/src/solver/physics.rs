//! Physical constants, carrier statistics, and local physics kernels for
//! the drift-diffusion solver. All quantities use CGS-flavoured device
//! units: cm for lengths, cm^-3 for densities, V, s, A.

/// Elementary charge (C).
pub const Q: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K).
pub const KB: f64 = 1.380_649e-23;
/// Lattice temperature (K).
pub const T_LATTICE: f64 = 300.0;
/// Thermal voltage kT/q at 300 K (V).
pub const VT: f64 = KB * T_LATTICE / Q;
/// Vacuum permittivity (F/cm).
pub const EPS0: f64 = 8.854_187_812_8e-14;
/// Relative permittivity of silicon.
pub const EPS_R_SI: f64 = 11.7;
/// Relative permittivity of SiO2.
pub const EPS_R_OX: f64 = 3.9;
/// Intrinsic carrier density of silicon at 300 K (cm^-3).
pub const N_I: f64 = 1.08e10;
/// Conduction-band effective density of states (cm^-3).
pub const NC: f64 = 2.8e19;
/// Valence-band effective density of states (cm^-3).
pub const NV: f64 = 1.04e19;
/// Default electron mobility (cm^2/V/s).
pub const MU_N: f64 = 1417.0;
/// Default hole mobility (cm^2/V/s).
pub const MU_P: f64 = 470.0;
/// Workfunction (eV) that lines a metal up with the intrinsic level; metal
/// potentials are referenced as V - (workfunction - this).
pub const MIDGAP_WORKFUNCTION_EV: f64 = 4.61;

/// Carrier statistics used to relate potential and density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Statistics {
    /// Exponential (non-degenerate) statistics; all analytic oracles assume
    /// this mode.
    Boltzmann,
    /// Fermi-Dirac statistics through full-range analytic approximations of
    /// the half-order integral and its inverse.
    FermiDiracApprox,
}

impl Default for Statistics {
    fn default() -> Self {
        Statistics::Boltzmann
    }
}

/// Scharfetter-Gummel kernel B(x) = x / (exp(x) - 1), with a series branch
/// near zero to avoid catastrophic cancellation.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // 1 - x/2 + x^2/12 (next term x^4/720 is below f64 resolution here)
        1.0 - 0.5 * x + x * x / 12.0
    } else if x > 700.0 {
        // exp overflows; the true value underflows to 0
        0.0
    } else if x < -700.0 {
        -x
    } else {
        // exp_m1 keeps full precision where exp(x) - 1 would cancel
        x / x.exp_m1()
    }
}

/// Shockley-Read-Hall trap parameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SrhParams {
    /// Electron lifetime (s).
    pub tau_n: f64,
    /// Hole lifetime (s).
    pub tau_p: f64,
    /// Trap-level electron density parameter (cm^-3).
    pub n1: f64,
    /// Trap-level hole density parameter (cm^-3).
    pub p1: f64,
}

impl Default for SrhParams {
    fn default() -> Self {
        SrhParams {
            tau_n: 1e-7,
            tau_p: 1e-7,
            n1: N_I,
            p1: N_I,
        }
    }
}

/// Net SRH recombination rate (cm^-3 s^-1); positive = recombination.
pub fn srh_rate(n: f64, p: f64, srh: &SrhParams) -> f64 {
    let denom = srh.tau_p * (n + srh.n1) + srh.tau_n * (p + srh.p1);
    (n * p - N_I * N_I) / denom
}

/// Partial derivatives of the SRH rate with respect to n and p at (n, p).
pub fn srh_rate_derivs(n: f64, p: f64, srh: &SrhParams) -> (f64, f64) {
    let denom = srh.tau_p * (n + srh.n1) + srh.tau_n * (p + srh.p1);
    let num = n * p - N_I * N_I;
    let dn = (p * denom - num * srh.tau_p) / (denom * denom);
    let dp = (n * denom - num * srh.tau_n) / (denom * denom);
    (dn, dp)
}

/// Full-range analytic approximation of the Fermi-Dirac integral of order
/// 1/2 (normalised so that F(eta) -> exp(eta) for eta -> -inf). Accuracy is
/// a few tenths of a percent over the full range, and F(eta) < exp(eta)
/// always, which preserves the degenerate-saturation property.
pub fn fermi_half(eta: f64) -> f64 {
    if eta < -50.0 {
        return eta.exp();
    }
    let e = eta;
    let g = e.powi(4) + 33.6 * e * (1.0 - 0.68 * (-0.17 * (e + 1.0) * (e + 1.0)).exp()) + 50.0;
    let inv = (-e).exp() + (3.0 * std::f64::consts::PI.sqrt() / 4.0) * g.powf(-0.375);
    1.0 / inv
}

/// Inverse of `fermi_half`: reduced Fermi level eta for a given ratio
/// nu = n / Nc. Newton refinement on the forward approximation keeps the
/// pair mutually consistent.
pub fn fermi_half_inverse(nu: f64) -> f64 {
    debug_assert!(nu > 0.0);
    // Full-range explicit seed, then Newton on ln fermi_half.
    let mut eta = if nu < 1e-3 {
        nu.ln()
    } else {
        // Joyce-Dixon-style seed for moderate nu; asymptotic for large.
        if nu > 10.0 {
            (0.75 * std::f64::consts::PI.sqrt() * nu).powf(2.0 / 3.0)
        } else {
            nu.ln() + 0.353_553 * nu
        }
    };
    for _ in 0..60 {
        let f = fermi_half(eta);
        let resid = f.ln() - nu.ln();
        if resid.abs() < 1e-13 {
            break;
        }
        // d ln F / d eta by central difference (smooth approximation).
        let h = 1e-6;
        let d = (fermi_half(eta + h).ln() - fermi_half(eta - h).ln()) / (2.0 * h);
        eta -= resid / d.max(1e-12);
    }
    eta
}

/// Electron density at intrinsic-referenced potential `psi` minus electron
/// quasi-Fermi potential `phi_n`.
pub fn electron_density(psi: f64, phi_n: f64, stats: Statistics) -> f64 {
    let u = (psi - phi_n) / VT;
    match stats {
        Statistics::Boltzmann => N_I * u.exp(),
        Statistics::FermiDiracApprox => {
            let chi_c = (NC / N_I).ln();
            NC * fermi_half(u - chi_c)
        }
    }
}

/// Hole density at intrinsic-referenced potential `psi` minus hole
/// quasi-Fermi potential `phi_p`.
pub fn hole_density(psi: f64, phi_p: f64, stats: Statistics) -> f64 {
    let u = (phi_p - psi) / VT;
    match stats {
        Statistics::Boltzmann => N_I * u.exp(),
        Statistics::FermiDiracApprox => {
            let chi_v = (NV / N_I).ln();
            NV * fermi_half(u - chi_v)
        }
    }
}

/// d(electron density)/d(psi) at fixed quasi-Fermi potential.
pub fn electron_density_dpsi(psi: f64, phi_n: f64, stats: Statistics) -> f64 {
    match stats {
        Statistics::Boltzmann => electron_density(psi, phi_n, stats) / VT,
        Statistics::FermiDiracApprox => {
            let h = 1e-6;
            (electron_density(psi + h, phi_n, stats) - electron_density(psi - h, phi_n, stats))
                / (2.0 * h)
        }
    }
}

/// d(hole density)/d(psi) at fixed quasi-Fermi potential (negative).
pub fn hole_density_dpsi(psi: f64, phi_p: f64, stats: Statistics) -> f64 {
    match stats {
        Statistics::Boltzmann => -hole_density(psi, phi_p, stats) / VT,
        Statistics::FermiDiracApprox => {
            let h = 1e-6;
            (hole_density(psi + h, phi_p, stats) - hole_density(psi - h, phi_p, stats)) / (2.0 * h)
        }
    }
}

/// Intrinsic-referenced potential of a charge-neutral semiconductor with
/// net doping `net` (donor minus acceptor, cm^-3) at zero applied bias.
pub fn neutral_potential(net: f64, stats: Statistics) -> f64 {
    match stats {
        Statistics::Boltzmann => VT * (net / (2.0 * N_I)).asinh(),
        Statistics::FermiDiracApprox => {
            // Solve n(psi) - p(psi) = net by bisection; the Boltzmann value
            // brackets the root from above in magnitude.
            let seed = VT * (net / (2.0 * N_I)).asinh();
            let (mut lo, mut hi) = (seed - 1.0, seed + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let f = electron_density(mid, 0.0, stats) - hole_density(mid, 0.0, stats) - net;
                if f < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// Dirichlet potential of an ohmic contact at applied voltage `v` on
/// material with net doping `net`.
pub fn ohmic_potential(v: f64, net: f64, stats: Statistics) -> f64 {
    v + neutral_potential(net, stats)
}

/// Equilibrium carrier pair at an ohmic contact (charge-neutral).
pub fn ohmic_carriers(net: f64, stats: Statistics) -> (f64, f64) {
    let psi = neutral_potential(net, stats);
    (
        electron_density(psi, 0.0, stats),
        hole_density(psi, 0.0, stats),
    )
}

/// Dirichlet potential of a metal region with workfunction `wf` (eV) at
/// applied voltage `v`.
pub fn metal_potential(v: f64, wf_ev: f64) -> f64 {
    v - (wf_ev - MIDGAP_WORKFUNCTION_EV)
}

/// Doping-dependent low-field mobility (Caughey-Thomas form); `total`
/// is the total impurity concentration (cm^-3).
pub fn doping_mobility_n(total: f64) -> f64 {
    65.0 + (MU_N - 65.0) / (1.0 + (total / 8.5e16).powf(0.72))
}

/// Hole counterpart of `doping_mobility_n`.
pub fn doping_mobility_p(total: f64) -> f64 {
    48.0 + (MU_P - 48.0) / (1.0 + (total / 6.3e16).powf(0.70))
}
