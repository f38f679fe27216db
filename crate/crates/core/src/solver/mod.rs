//! Drift-diffusion device solver: coupled Poisson and electron/hole
//! continuity equations on a tensor-product mesh, discretised with
//! cell-centred finite volumes and Scharfetter-Gummel edge fluxes, iterated
//! with a damped Gummel (decoupled) scheme.
//!
//! Conventions: potentials are referenced to the intrinsic level, lengths
//! inside the solver are cm, densities cm^-3, currents A per cm of device
//! width for planar (2D) meshes and A for 3D meshes.

pub mod linear;
pub mod physics;

use crate::error::{Error, Result};
use crate::mesh::{ContactKind, DopingField, MeshContact, TensorMesh};
use crate::process::{BiasPoint, RegionTag};
use linear::{solve_ilu_bicgstab, Csr};
use physics::{
    bernoulli, electron_density, electron_density_dpsi, fermi_half_inverse, hole_density,
    hole_density_dpsi, metal_potential, neutral_potential, ohmic_carriers, srh_rate,
    srh_rate_derivs, SrhParams, Statistics, EPS0, EPS_R_OX, EPS_R_SI, MU_N, MU_P, N_I, Q, VT,
};

/// Nanometre-to-centimetre conversion for mesh coordinates.
const NM: f64 = 1e-7;
/// Carrier density floor (cm^-3) protecting logs and divisions.
const DENSITY_FLOOR: f64 = 1e-25;

/// Iteration controls and model selection for the solver.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    /// Outer (Gummel) convergence threshold on the potential update (V).
    pub gummel_tol_v: f64,
    /// Maximum outer iterations per bias point.
    pub max_outer: usize,
    /// Clamp on any single Newton potential update (V).
    pub damping_clamp_v: f64,
    /// Carrier statistics model.
    pub statistics: Statistics,
    /// Relative tolerance of the inner sparse linear solves.
    pub linear_rel_tol: f64,
    /// Shockley-Read-Hall lifetimes and trap levels.
    pub srh: SrhParams,
    /// Use doping-dependent mobility instead of the constant defaults.
    pub doping_dependent_mobility: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gummel_tol_v: 1e-6,
            max_outer: 200,
            damping_clamp_v: 0.5,
            statistics: Statistics::default(),
            linear_rel_tol: 1e-10,
            srh: SrhParams::default(),
            doping_dependent_mobility: false,
        }
    }
}

impl SolverOptions {
    /// Validates the numeric controls.
    pub fn validate(&self) -> Result<()> {
        if !(self.gummel_tol_v > 0.0 && self.damping_clamp_v > 0.0 && self.linear_rel_tol > 0.0) {
            return Err(Error::Config(
                "solver tolerances and damping clamp must be positive".into(),
            ));
        }
        if self.max_outer == 0 {
            return Err(Error::Config("max outer iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Converged solution of one bias point.
#[derive(Debug, Clone)]
pub struct SolutionState {
    /// Electrostatic potential per cell (V, intrinsic-referenced).
    pub psi: Vec<f64>,
    /// Electron density per cell (cm^-3; zero outside semiconductors).
    pub n: Vec<f64>,
    /// Hole density per cell (cm^-3; zero outside semiconductors).
    pub p: Vec<f64>,
    /// Bias at which the state converged.
    pub bias: BiasPoint,
    /// Whether the outer iteration met its tolerance.
    pub converged: bool,
    /// Outer iterations used for the final bias step.
    pub iterations: usize,
    /// Largest potential update of the last outer iteration (V).
    pub final_update_v: f64,
}

/// Terminal currents, positive into the device.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ContactCurrents {
    /// (contact name, current) pairs in mesh contact order. Units follow
    /// the mesh dimensionality (A/cm of width in 2D, A in 3D).
    pub currents: Vec<(String, f64)>,
}

impl ContactCurrents {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.currents
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, i)| *i)
    }

    /// (sum of all terminal currents, largest magnitude among them).
    pub fn imbalance(&self) -> (f64, f64) {
        let sum: f64 = self.currents.iter().map(|(_, i)| i).sum();
        let max = self
            .currents
            .iter()
            .map(|(_, i)| i.abs())
            .fold(0.0, f64::max);
        (sum, max)
    }
}

/// One simulated bias point of an I-V characteristic.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IvPoint {
    pub bias: BiasPoint,
    /// Drain current in A (width-scaled).
    pub i_d: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Swept I-V characteristic.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct IvCurve {
    pub points: Vec<IvPoint>,
}

impl IvCurve {
    /// Converged drain current at the given gate/drain bias, if present.
    pub fn current_at(&self, v_gs: f64, v_ds: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| {
                p.converged && (p.bias.v_gs - v_gs).abs() < 1e-9 && (p.bias.v_ds - v_ds).abs() < 1e-9
            })
            .map(|p| p.i_d)
    }

    /// CSV rendering with a fixed header and deterministic float format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v_gs,v_ds,v_miv,i_d_amps,converged,iterations\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.9e},{:.9e},{:.9e},{:.9e},{},{}\n",
                p.bias.v_gs, p.bias.v_ds, p.bias.v_miv, p.i_d, p.converged, p.iterations
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellKind {
    Semiconductor,
    Insulator,
    Metal,
}

fn cell_kind(tag: RegionTag) -> CellKind {
    if tag.is_semiconductor() {
        CellKind::Semiconductor
    } else if tag.is_metal() {
        CellKind::Metal
    } else {
        CellKind::Insulator
    }
}

/// A face between two adjacent cells, with precomputed geometry factors.
#[derive(Debug, Clone, Copy)]
struct Face {
    i: usize,
    j: usize,
    /// Poisson coupling: area / (d_i/eps_i + d_j/eps_j), F/cm scaled by the
    /// out-of-plane depth convention.
    eps_coef: f64,
    /// Continuity coupling: area / distance (cm), zero unless both sides
    /// are semiconductors.
    a_over_d: f64,
    /// Face electron/hole diffusivities (cm^2/s).
    dn: f64,
    dp: f64,
}

/// Pinned (Dirichlet) role of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pin {
    Free,
    /// Metal cell of a contacted region: potential follows the terminal.
    Metal { contact: usize },
}

/// An ohmic-contact face: Dirichlet data applied on the cell surface via a
/// half-cell ghost, so the contact sits exactly on the geometric boundary.
#[derive(Debug, Clone, Copy)]
struct BoundaryFace {
    cell: usize,
    contact: usize,
    /// eps * area / (half cell span), F/cm.
    eps_coef: f64,
    /// area / (half cell span), cm.
    a_over_d: f64,
    dn: f64,
    dp: f64,
}

/// Assembled device: mesh, doping, and all precomputed discretisation data.
pub struct Device<'a> {
    pub mesh: &'a TensorMesh,
    pub doping: &'a DopingField,
    pub options: SolverOptions,
    ncells: usize,
    kind: Vec<CellKind>,
    pin: Vec<Pin>,
    volume: Vec<f64>,
    faces: Vec<Face>,
    boundary: Vec<BoundaryFace>,
    /// Per-cell capacitive coupling density to the out-of-plane gate plate
    /// of plan-view meshes (F/cm^3).
    coupling: Vec<f64>,
    /// Workfunction of the gate-plate metal (eV).
    plate_wf: f64,
    /// Net doping per cell (cm^-3).
    net: Vec<f64>,
}

/// Maps a contact name to its terminal voltage in a bias point.
fn terminal_voltage(name: &str, bias: &BiasPoint) -> Result<f64> {
    match name {
        "source" => Ok(0.0),
        "drain" => Ok(bias.v_ds),
        "gate" => Ok(bias.v_gs),
        "substrate" => Ok(bias.v_sub),
        "miv" => Ok(bias.v_miv),
        other => Err(Error::Config(format!(
            "unknown terminal '{other}': expected source, drain, gate, substrate, or miv"
        ))),
    }
}

impl<'a> Device<'a> {
    pub fn new(
        mesh: &'a TensorMesh,
        doping: &'a DopingField,
        options: SolverOptions,
    ) -> Result<Device<'a>> {
        options.validate()?;
        let ncells = mesh.num_cells();
        if doping.donor.len() != ncells {
            return Err(Error::Mismatch(
                "doping field does not match mesh cell count".into(),
            ));
        }
        let kind: Vec<CellKind> = mesh.tags.iter().map(|t| cell_kind(*t)).collect();
        let net: Vec<f64> = (0..ncells).map(|c| doping.net(c)).collect();

        let dim = mesh.dim();
        let volume: Vec<f64> = (0..ncells)
            .map(|c| mesh.cell_volume(c) * NM.powi(dim as i32))
            .collect();

        let mobility = |cell: usize, electron: bool| -> f64 {
            if options.doping_dependent_mobility {
                let total = doping.donor[cell].abs() + doping.acceptor[cell].abs();
                if electron {
                    physics::doping_mobility_n(total)
                } else {
                    physics::doping_mobility_p(total)
                }
            } else if electron {
                MU_N
            } else {
                MU_P
            }
        };

        // Pin assignment and ohmic boundary faces from contacts.
        let mut pin = vec![Pin::Free; ncells];
        let mut boundary = Vec::new();
        for (ci, contact) in mesh.contacts.iter().enumerate() {
            match &contact.kind {
                ContactKind::Ohmic => {
                    for f in &contact.faces {
                        if kind[f.cell] != CellKind::Semiconductor {
                            return Err(Error::Geometry(format!(
                                "ohmic contact '{}' touches a non-semiconductor cell",
                                contact.name
                            )));
                        }
                        let idx = mesh.cell_coords(f.cell);
                        let half = 0.5 * mesh.spacing(f.axis, idx[f.axis]) * NM;
                        let area = mesh.face_area(f.cell, f.axis) * NM.powi(dim as i32 - 1);
                        boundary.push(BoundaryFace {
                            cell: f.cell,
                            contact: ci,
                            eps_coef: EPS_R_SI * EPS0 * area / half,
                            a_over_d: area / half,
                            dn: VT * mobility(f.cell, true),
                            dp: VT * mobility(f.cell, false),
                        });
                    }
                }
                ContactKind::MetalRegion(tag) => {
                    for (cell, t) in mesh.tags.iter().enumerate() {
                        if t == tag {
                            pin[cell] = Pin::Metal { contact: ci };
                        }
                    }
                }
            }
        }
        // Uncontacted metal would leave Poisson singular.
        for cell in 0..ncells {
            if kind[cell] == CellKind::Metal && pin[cell] == Pin::Free {
                return Err(Error::Geometry(
                    "metal region without an attached contact".into(),
                ));
            }
        }
        let eps_rel = |k: CellKind| -> f64 {
            match k {
                CellKind::Semiconductor => EPS_R_SI,
                CellKind::Insulator => EPS_R_OX,
                // Perfect conductor: no internal field resistance.
                CellKind::Metal => f64::INFINITY,
            }
        };

        let mut faces = Vec::new();
        for cell in 0..ncells {
            for axis in 0..dim {
                let Some(nb) = mesh.neighbor(cell, axis, 1) else {
                    continue;
                };
                let idx = mesh.cell_coords(cell);
                let span_i = mesh.spacing(axis, idx[axis]) * NM;
                let span_j = mesh.spacing(axis, idx[axis] + 1) * NM;
                let area = mesh.face_area(cell, axis) * NM.powi(dim as i32 - 1);
                let (ki, kj) = (kind[cell], kind[nb]);
                if ki == CellKind::Metal && kj == CellKind::Metal {
                    continue;
                }
                let (ei, ej) = (eps_rel(ki) * EPS0, eps_rel(kj) * EPS0);
                let ri = if ei.is_finite() { 0.5 * span_i / ei } else { 0.0 };
                let rj = if ej.is_finite() { 0.5 * span_j / ej } else { 0.0 };
                let eps_coef = area / (ri + rj);
                let semi_semi =
                    ki == CellKind::Semiconductor && kj == CellKind::Semiconductor;
                let a_over_d = if semi_semi {
                    area / (0.5 * (span_i + span_j))
                } else {
                    0.0
                };
                let (dn, dp) = if semi_semi {
                    (
                        VT * 0.5 * (mobility(cell, true) + mobility(nb, true)),
                        VT * 0.5 * (mobility(cell, false) + mobility(nb, false)),
                    )
                } else {
                    (0.0, 0.0)
                };
                faces.push(Face {
                    i: cell,
                    j: nb,
                    eps_coef,
                    a_over_d,
                    dn,
                    dp,
                });
            }
        }

        let (coupling, plate_wf) = build_plate_coupling(mesh, &kind);

        Ok(Device {
            mesh,
            doping,
            options,
            ncells,
            kind,
            pin,
            volume,
            faces,
            boundary,
            coupling,
            plate_wf,
            net,
        })
    }

    /// Dirichlet data at a bias: per-cell metal potentials and, aligned
    /// with `self.boundary`, the ohmic (psi_b, n_b, p_b) ghost values.
    fn pin_values(&self, bias: &BiasPoint) -> Result<(Vec<Option<f64>>, Vec<(f64, f64, f64)>)> {
        let stats = self.options.statistics;
        let mut psi = vec![None; self.ncells];
        for (cell, pin) in self.pin.iter().enumerate() {
            if let Pin::Metal { contact } = *pin {
                let c: &MeshContact = &self.mesh.contacts[contact];
                let v = terminal_voltage(&c.name, bias)?;
                let wf = c
                    .workfunction_ev
                    .unwrap_or(physics::MIDGAP_WORKFUNCTION_EV);
                psi[cell] = Some(metal_potential(v, wf));
            }
        }
        let mut ghosts = Vec::with_capacity(self.boundary.len());
        for bf in &self.boundary {
            let c = &self.mesh.contacts[bf.contact];
            let v = terminal_voltage(&c.name, bias)?;
            let net = self.net[bf.cell];
            let (n_b, p_b) = ohmic_carriers(net, stats);
            ghosts.push((v + neutral_potential(net, stats), n_b, p_b));
        }
        Ok((psi, ghosts))
    }

    /// Effective gate-plate potential entering the coupling term.
    fn plate_v_eff(&self, bias: &BiasPoint) -> f64 {
        metal_potential(bias.v_gs, self.plate_wf)
    }

    /// Newton solve of the nonlinear Poisson equation. Carrier densities
    /// respond to the potential with frozen quasi-Fermi levels, taken from
    /// `state.n/p` (or from equilibrium statistics when `equilibrium`).
    fn newton_poisson(
        &self,
        state: &mut SolutionState,
        pin_psi: &[Option<f64>],
        ghosts: &[(f64, f64, f64)],
        v_eff: f64,
        equilibrium: bool,
    ) -> Result<usize> {
        let stats = self.options.statistics;
        let nc = self.ncells;
        // Reduced Fermi offsets reproducing the current densities at the
        // current potential (frozen quasi-Fermi linearisation).
        let mut eta_n = vec![0.0; nc];
        let mut eta_p = vec![0.0; nc];
        if !equilibrium {
            for c in 0..nc {
                if self.kind[c] == CellKind::Semiconductor {
                    match stats {
                        Statistics::Boltzmann => {
                            eta_n[c] = (state.n[c].max(DENSITY_FLOOR) / N_I).ln() - state.psi[c] / VT;
                            eta_p[c] = (state.p[c].max(DENSITY_FLOOR) / N_I).ln() + state.psi[c] / VT;
                        }
                        Statistics::FermiDiracApprox => {
                            let chi_c = (physics::NC / N_I).ln();
                            let chi_v = (physics::NV / N_I).ln();
                            eta_n[c] = fermi_half_inverse(state.n[c].max(DENSITY_FLOOR) / physics::NC)
                                - state.psi[c] / VT
                                + chi_c;
                            eta_p[c] = fermi_half_inverse(state.p[c].max(DENSITY_FLOOR) / physics::NV)
                                + state.psi[c] / VT
                                + chi_v;
                        }
                    }
                }
            }
        }
        // Density and derivative at a candidate potential.
        let carriers_at = |c: usize, psi: f64| -> (f64, f64, f64, f64) {
            if self.kind[c] != CellKind::Semiconductor {
                return (0.0, 0.0, 0.0, 0.0);
            }
            if equilibrium {
                let n = electron_density(psi, 0.0, stats);
                let p = hole_density(psi, 0.0, stats);
                (
                    n,
                    p,
                    electron_density_dpsi(psi, 0.0, stats),
                    hole_density_dpsi(psi, 0.0, stats),
                )
            } else {
                match stats {
                    Statistics::Boltzmann => {
                        let n = N_I * (psi / VT + eta_n[c]).exp();
                        let p = N_I * (-psi / VT + eta_p[c]).exp();
                        (n, p, n / VT, -p / VT)
                    }
                    Statistics::FermiDiracApprox => {
                        let chi_c = (physics::NC / N_I).ln();
                        let chi_v = (physics::NV / N_I).ln();
                        let un = psi / VT + eta_n[c] - chi_c;
                        let up = -psi / VT + eta_p[c] - chi_v;
                        let n = physics::NC * physics::fermi_half(un);
                        let p = physics::NV * physics::fermi_half(up);
                        let h = 1e-6;
                        let dn = physics::NC
                            * (physics::fermi_half(un + h / VT) - physics::fermi_half(un - h / VT))
                            / (2.0 * h);
                        let dp = physics::NV
                            * (physics::fermi_half(up - h / VT) - physics::fermi_half(up + h / VT))
                            / (2.0 * h);
                        (n, p, dn, dp)
                    }
                }
            }
        };

        let max_newton = 400;
        let mut last_step = f64::NAN;
        for it in 1..=max_newton {
            let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.faces.len() * 4 + nc);
            let mut rhs = vec![0.0; nc];
            // Residual F and Jacobian diag from cell terms.
            for c in 0..nc {
                if let Some(v) = pin_psi[c] {
                    triplets.push((c, c, 1.0));
                    rhs[c] = v - state.psi[c];
                    continue;
                }
                let (n, p, dn, dp) = carriers_at(c, state.psi[c]);
                let mut diag = Q * self.volume[c] * (dn - dp);
                let mut f = -Q * self.volume[c] * (p - n + self.net[c]);
                if self.coupling[c] != 0.0 {
                    f -= self.volume[c] * self.coupling[c] * (v_eff - state.psi[c]);
                    diag += self.volume[c] * self.coupling[c];
                }
                triplets.push((c, c, diag));
                rhs[c] = -f;
            }
            for face in &self.faces {
                let (i, j) = (face.i, face.j);
                let pin_i = pin_psi[i].is_some();
                let pin_j = pin_psi[j].is_some();
                let flux = face.eps_coef * (state.psi[i] - state.psi[j]);
                if !pin_i {
                    rhs[i] -= flux;
                    triplets.push((i, i, face.eps_coef));
                    triplets.push((i, j, -face.eps_coef));
                }
                if !pin_j {
                    rhs[j] += flux;
                    triplets.push((j, j, face.eps_coef));
                    triplets.push((j, i, -face.eps_coef));
                }
            }
            // Ohmic ghost potentials applied at the contact surfaces.
            for (bf, g) in self.boundary.iter().zip(ghosts) {
                let c = bf.cell;
                rhs[c] -= bf.eps_coef * (state.psi[c] - g.0);
                triplets.push((c, c, bf.eps_coef));
            }
            let a = Csr::from_triplets(nc, &mut triplets);
            let mut delta = vec![0.0; nc];
            solve_ilu_bicgstab(&a, &rhs, &mut delta, self.options.linear_rel_tol)?;
            let clamp = self.options.damping_clamp_v;
            let mut max_step = 0.0f64;
            for c in 0..nc {
                let d = delta[c].clamp(-clamp, clamp);
                state.psi[c] += d;
                max_step = max_step.max(d.abs());
            }
            if max_step < 1e-11 {
                return Ok(it);
            }
            last_step = max_step;
        }
        Err(Error::Convergence {
            bias_step: "potential update stalled inside a Newton solve".into(),
            iteration: max_newton,
            residual: last_step,
        })
    }

    /// Solves one carrier continuity equation at frozen potential with a
    /// lagged SRH source linearised in the solved carrier.
    fn solve_continuity(
        &self,
        state: &mut SolutionState,
        ghosts: &[(f64, f64, f64)],
        electrons: bool,
    ) -> Result<()> {
        let nc = self.ncells;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.faces.len() * 4 + nc);
        let mut rhs = vec![0.0; nc];
        let mut unknown = vec![false; nc];
        for c in 0..nc {
            if self.kind[c] == CellKind::Semiconductor {
                unknown[c] = true;
                let (r0, (drdn, drdp)) = (
                    srh_rate(state.n[c], state.p[c], &self.options.srh),
                    srh_rate_derivs(state.n[c], state.p[c], &self.options.srh),
                );
                let dr = if electrons { drdn } else { drdp }.max(0.0);
                let old = if electrons { state.n[c] } else { state.p[c] };
                triplets.push((c, c, self.volume[c] * dr));
                rhs[c] = self.volume[c] * (dr * old - r0);
            } else {
                triplets.push((c, c, 1.0));
                rhs[c] = 0.0;
            }
        }
        // Ohmic ghost carriers applied at the contact surfaces.
        for (bf, g) in self.boundary.iter().zip(ghosts) {
            let c = bf.cell;
            let delta = (g.0 - state.psi[c]) / VT;
            if electrons {
                let gc = bf.dn * bf.a_over_d;
                triplets.push((c, c, gc * bernoulli(-delta)));
                rhs[c] += gc * g.1 * bernoulli(delta);
            } else {
                let gc = bf.dp * bf.a_over_d;
                triplets.push((c, c, gc * bernoulli(delta)));
                rhs[c] += gc * g.2 * bernoulli(-delta);
            }
        }
        for face in &self.faces {
            if face.a_over_d == 0.0 {
                continue;
            }
            let (i, j) = (face.i, face.j);
            let delta = (state.psi[j] - state.psi[i]) / VT;
            let (coef_ii, coef_ij) = if electrons {
                let g = face.dn * face.a_over_d;
                (g * bernoulli(-delta), -g * bernoulli(delta))
            } else {
                let g = face.dp * face.a_over_d;
                (g * bernoulli(delta), -g * bernoulli(-delta))
            };
            if unknown[i] {
                triplets.push((i, i, coef_ii));
                triplets.push((i, j, coef_ij));
            }
            // Mirrored flux for cell j (F(j->i) = -F(i->j)).
            if unknown[j] {
                triplets.push((j, j, -coef_ij));
                triplets.push((j, i, -coef_ii));
            }
        }
        let a = Csr::from_triplets(nc, &mut triplets);
        let mut x: Vec<f64> = if electrons {
            state.n.clone()
        } else {
            state.p.clone()
        };
        solve_ilu_bicgstab(&a, &rhs, &mut x, self.options.linear_rel_tol)?;
        for c in 0..nc {
            if self.kind[c] == CellKind::Semiconductor {
                x[c] = x[c].max(DENSITY_FLOOR);
            } else {
                x[c] = 0.0;
            }
        }
        if electrons {
            state.n = x;
        } else {
            state.p = x;
        }
        Ok(())
    }

    /// Extra continuity-only cycles after Gummel convergence so both
    /// carrier equations share one self-consistent SRH rate; this is what
    /// drives the terminal-current imbalance to the conservation target.
    fn refine_recombination(
        &self,
        state: &mut SolutionState,
        ghosts: &[(f64, f64, f64)],
    ) -> Result<()> {
        for _ in 0..40 {
            let n_prev = state.n.clone();
            let p_prev = state.p.clone();
            self.solve_continuity(state, ghosts, true)?;
            self.solve_continuity(state, ghosts, false)?;
            let mut worst = 0.0f64;
            for c in 0..self.ncells {
                if self.kind[c] == CellKind::Semiconductor {
                    let dn = (state.n[c] - n_prev[c]).abs() / state.n[c].max(DENSITY_FLOOR);
                    let dp = (state.p[c] - p_prev[c]).abs() / state.p[c].max(DENSITY_FLOOR);
                    worst = worst.max(dn).max(dp);
                }
            }
            if worst < 1e-11 {
                break;
            }
        }
        Ok(())
    }

    /// Equilibrium solve: all terminals grounded, carriers in detailed
    /// balance with the potential.
    pub fn solve_equilibrium(&self) -> Result<SolutionState> {
        let bias = BiasPoint {
            v_gs: 0.0,
            v_ds: 0.0,
            v_sub: 0.0,
            v_miv: 0.0,
        };
        let stats = self.options.statistics;
        let mut state = SolutionState {
            psi: vec![0.0; self.ncells],
            n: vec![0.0; self.ncells],
            p: vec![0.0; self.ncells],
            bias,
            converged: false,
            iterations: 0,
            final_update_v: f64::NAN,
        };
        // Neutral initial guess in semiconductors.
        for c in 0..self.ncells {
            if self.kind[c] == CellKind::Semiconductor {
                state.psi[c] = neutral_potential(self.net[c], stats);
            }
        }
        let (pin_psi, ghosts) = self.pin_values(&bias)?;
        let v_eff = self.plate_v_eff(&bias);
        let iters = self.newton_poisson(&mut state, &pin_psi, &ghosts, v_eff, true)?;
        for c in 0..self.ncells {
            if self.kind[c] == CellKind::Semiconductor {
                state.n[c] = electron_density(state.psi[c], 0.0, stats);
                state.p[c] = hole_density(state.psi[c], 0.0, stats);
            }
        }
        state.converged = true;
        state.iterations = iters;
        state.final_update_v = 0.0;
        Ok(state)
    }

    /// Gummel iteration at a fixed bias from a warm-start state.
    fn gummel(&self, init: &SolutionState, bias: BiasPoint) -> Result<SolutionState> {
        let mut state = init.clone();
        state.bias = bias;
        state.converged = false;
        let (pin_psi, ghosts) = self.pin_values(&bias)?;
        let v_eff = self.plate_v_eff(&bias);
        let mut last_update = f64::NAN;
        for outer in 1..=self.options.max_outer {
            let psi_prev = state.psi.clone();
            self.newton_poisson(&mut state, &pin_psi, &ghosts, v_eff, false)?;
            self.solve_continuity(&mut state, &ghosts, true)?;
            self.solve_continuity(&mut state, &ghosts, false)?;
            let update = state
                .psi
                .iter()
                .zip(&psi_prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if update < self.options.gummel_tol_v {
                self.refine_recombination(&mut state, &ghosts)?;
                state.converged = true;
                state.iterations = outer;
                state.final_update_v = update;
                return Ok(state);
            }
            last_update = update;
        }
        Err(Error::Convergence {
            bias_step: format!(
                "v_gs = {:.4} V, v_ds = {:.4} V, v_sub = {:.4} V, v_miv = {:.4} V",
                bias.v_gs, bias.v_ds, bias.v_sub, bias.v_miv
            ),
            iteration: self.options.max_outer,
            residual: last_update,
        })
    }

    /// Solves at `target`, ramping terminals from the state's bias in steps
    /// of at most 0.1 V (halved on failure down to 0.0125 V).
    pub fn solve_bias(
        &self,
        state: &SolutionState,
        target: BiasPoint,
    ) -> Result<(SolutionState, ContactCurrents)> {
        target.validate()?;
        let mut current = state.clone();
        let mut step_v = 0.1;
        loop {
            let delta = bias_delta_max(&current.bias, &target);
            if delta < 1e-12 {
                // Ensure the exact target is recorded even for a no-op ramp.
                if !current.converged || bias_delta_max(&current.bias, &target) > 0.0 {
                    current = self.gummel(&current, target)?;
                }
                let currents = self.contact_currents(&current)?;
                return Ok((current, currents));
            }
            let frac = (step_v / delta).min(1.0);
            let next = bias_lerp(&current.bias, &target, frac);
            match self.gummel(&current, next) {
                Ok(s) => current = s,
                Err(e) => {
                    step_v *= 0.5;
                    if step_v < 0.0125 - 1e-12 {
                        return Err(match e {
                            Error::Convergence {
                                bias_step,
                                iteration,
                                residual,
                            } => Error::Convergence {
                                bias_step: format!(
                                    "{bias_step} (ramp step narrowed to {:.4} V)",
                                    step_v * 2.0
                                ),
                                iteration,
                                residual,
                            },
                            other => other,
                        });
                    }
                }
            }
        }
    }

    /// Terminal currents from Scharfetter-Gummel fluxes through the ohmic
    /// contact surfaces, oriented into the device. Insulated terminals
    /// (gate, out-of-plane via) carry zero DC current.
    pub fn contact_currents(&self, state: &SolutionState) -> Result<ContactCurrents> {
        let (_, ghosts) = self.pin_values(&state.bias)?;
        let mut per_contact = vec![0.0f64; self.mesh.contacts.len()];
        for (bf, g) in self.boundary.iter().zip(&ghosts) {
            let c = bf.cell;
            let delta = (g.0 - state.psi[c]) / VT;
            // Particle fluxes from the cell toward the contact ghost.
            let f_n = bf.dn
                * bf.a_over_d
                * (state.n[c] * bernoulli(-delta) - g.1 * bernoulli(delta));
            let f_p = bf.dp
                * bf.a_over_d
                * (state.p[c] * bernoulli(delta) - g.2 * bernoulli(-delta));
            // Electrons leaving the device mean conventional current in.
            per_contact[bf.contact] += Q * (f_n - f_p);
        }
        Ok(ContactCurrents {
            currents: self
                .mesh
                .contacts
                .iter()
                .zip(per_contact)
                .map(|(c, i)| (c.name.clone(), i))
                .collect(),
        })
    }

    /// Drain-current sweep over gate voltages at fixed drain bias. Failed
    /// points are recorded unconverged and do not abort later points. The
    /// first failure, if any, is returned alongside.
    pub fn id_vg_sweep(
        &self,
        v_ds: f64,
        v_gs_grid: &[f64],
        width_scale_cm: f64,
    ) -> (IvCurve, Option<Error>) {
        self.sweep_internal(v_gs_grid, width_scale_cm, |v| BiasPoint {
            v_gs: v,
            v_ds,
            v_sub: 0.0,
            v_miv: BiasPoint::default().v_miv,
        })
    }

    /// Drain-current sweep over drain voltages at fixed gate bias.
    pub fn id_vd_sweep(
        &self,
        v_gs: f64,
        v_ds_grid: &[f64],
        width_scale_cm: f64,
    ) -> (IvCurve, Option<Error>) {
        self.sweep_internal(v_ds_grid, width_scale_cm, |v| BiasPoint {
            v_gs,
            v_ds: v,
            v_sub: 0.0,
            v_miv: BiasPoint::default().v_miv,
        })
    }

    fn sweep_internal(
        &self,
        grid: &[f64],
        width_scale_cm: f64,
        bias_of: impl Fn(f64) -> BiasPoint,
    ) -> (IvCurve, Option<Error>) {
        let mut curve = IvCurve::default();
        let mut first_err: Option<Error> = None;
        let eq = match self.solve_equilibrium() {
            Ok(eq) => eq,
            Err(e) => return (curve, Some(e)),
        };
        let mut last_good = eq;
        for &v in grid {
            let bias = bias_of(v);
            match self.solve_bias(&last_good, bias) {
                Ok((state, currents)) => {
                    let i_d = currents.get("drain").unwrap_or(0.0) * width_scale_cm;
                    curve.points.push(IvPoint {
                        bias,
                        i_d,
                        converged: true,
                        iterations: state.iterations,
                    });
                    last_good = state;
                }
                Err(e) => {
                    curve.points.push(IvPoint {
                        bias,
                        i_d: f64::NAN,
                        converged: false,
                        iterations: 0,
                    });
                    if first_err.is_none() {
                        first_err = Some(e);
                    }
                }
            }
        }
        (curve, first_err)
    }
}

/// Capacitive coupling densities of the out-of-plane gate plate carried by
/// plan-view meshes: the plate's MOS areal capacitance eps_ox / t_ox is
/// spread over the slab depth and applied to every semiconductor cell by
/// its fractional overlap with the plate window.
fn build_plate_coupling(mesh: &TensorMesh, kind: &[CellKind]) -> (Vec<f64>, f64) {
    let nc = mesh.num_cells();
    let Some(p) = mesh.gate_plate.as_ref() else {
        return (vec![0.0; nc], physics::MIDGAP_WORKFUNCTION_EV);
    };
    let c_vol =
        EPS0 * EPS_R_OX / (p.oxide_thickness_nm * NM) / (p.slab_depth_nm * NM);
    let window = [p.x_range, p.y_range];
    let mut coupling = vec![0.0; nc];
    for cell in 0..nc {
        if kind[cell] != CellKind::Semiconductor {
            continue;
        }
        let mut frac = 1.0;
        for (axis, &d) in mesh.axis_dims.iter().enumerate() {
            if d > 1 {
                continue; // the window is an x/y footprint
            }
            let (lo, hi) = mesh.cell_span(cell, axis);
            let (wlo, whi) = window[d];
            frac *= (hi.min(whi) - lo.max(wlo)).max(0.0) / (hi - lo);
        }
        if frac > 0.0 {
            coupling[cell] = c_vol * frac;
        }
    }
    (coupling, p.workfunction_ev)
}

fn bias_delta_max(a: &BiasPoint, b: &BiasPoint) -> f64 {
    (a.v_gs - b.v_gs)
        .abs()
        .max((a.v_ds - b.v_ds).abs())
        .max((a.v_sub - b.v_sub).abs())
        .max((a.v_miv - b.v_miv).abs())
}

fn bias_lerp(a: &BiasPoint, b: &BiasPoint, t: f64) -> BiasPoint {
    BiasPoint {
        v_gs: a.v_gs + t * (b.v_gs - a.v_gs),
        v_ds: a.v_ds + t * (b.v_ds - a.v_ds),
        v_sub: a.v_sub + t * (b.v_sub - a.v_sub),
        v_miv: a.v_miv + t * (b.v_miv - a.v_miv),
    }
}

/// Convenience wrapper: equilibrium solve on a mesh/doping pair.
pub fn solve_equilibrium(
    mesh: &TensorMesh,
    doping: &DopingField,
    options: SolverOptions,
) -> Result<SolutionState> {
    Device::new(mesh, doping, options)?.solve_equilibrium()
}

/// Convenience wrapper: ramped bias solve from a converged state.
pub fn solve_bias(
    mesh: &TensorMesh,
    doping: &DopingField,
    state: &SolutionState,
    target: BiasPoint,
    options: SolverOptions,
) -> Result<(SolutionState, ContactCurrents)> {
    Device::new(mesh, doping, options)?.solve_bias(state, target)
}
