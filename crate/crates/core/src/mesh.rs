//! Graded tensor-product finite-volume meshes and net-doping fields.
//!
//! A mesh is a set of strictly increasing node arrays, one per simulated
//! axis (1-D, 2-D cross-section, or full 3-D). Every layout box edge that
//! intersects the simulated slice lands exactly on a mesh line; spacing is
//! refined near oxide/semiconductor interfaces and junctions and grows by
//! at most a fixed ratio elsewhere.

use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{
    ContactAttach, ContactSpec, DeviceGeometry, DeviceLayout, GatePlate, ProcessCorner, RegionTag,
};

/// Grading limits for mesh generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementPolicy {
    /// Largest interval anywhere, nm.
    pub max_spacing: f64,
    /// Largest interval within `interface_band` of an interface or
    /// junction, nm.
    pub interface_spacing: f64,
    /// Half-width of the refined band around interfaces/junctions, nm.
    pub interface_band: f64,
    /// Largest interval in the thin band below the silicon surface, nm.
    /// This resolves the doping peak and the inversion layer.
    pub surface_spacing: f64,
    /// Depth of the surface band, nm.
    pub surface_band: f64,
    /// Largest allowed ratio between adjacent intervals.
    pub growth: f64,
    /// Hard cap on the total cell count.
    pub max_cells: usize,
}

impl Default for RefinementPolicy {
    fn default() -> Self {
        RefinementPolicy {
            max_spacing: 5.0,
            interface_spacing: 0.5,
            interface_band: 2.0,
            surface_spacing: 0.1,
            surface_band: 0.2,
            growth: 1.3,
            max_cells: 40_000,
        }
    }
}

impl RefinementPolicy {
    /// Same policy with every spacing halved (used for refinement studies).
    pub fn refined(&self, factor: f64) -> RefinementPolicy {
        RefinementPolicy {
            max_spacing: self.max_spacing / factor,
            interface_spacing: self.interface_spacing / factor,
            surface_spacing: self.surface_spacing / factor,
            ..*self
        }
    }
}

/// Which axes are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshDims {
    /// Transport axis only.
    X,
    /// Transport and width: the plan view of the conducting slab, sliced at
    /// the middle of the layout's depth extent. Used for vertical MIV
    /// placement, where the via stands beside the device width edge.
    XY,
    /// Transport and depth: the cross-section through the width centre.
    /// Used for horizontal MIV placement, where the via stands beyond a
    /// source/drain end.
    XZ,
    /// Full 3-D.
    Xyz,
}

impl MeshDims {
    fn physical_dims(self) -> &'static [usize] {
        match self {
            MeshDims::X => &[0],
            MeshDims::XY => &[0, 1],
            MeshDims::XZ => &[0, 2],
            MeshDims::Xyz => &[0, 1, 2],
        }
    }
}

impl DeviceLayout {
    /// The simulation plane this layout was constructed for.
    pub fn natural_dims(&self) -> MeshDims {
        match self.scenario.orientation {
            crate::process::Orientation::Vertical => MeshDims::XY,
            crate::process::Orientation::Horizontal => MeshDims::XZ,
        }
    }
}

/// One face of a cell, identified by the owning cell, the mesh axis normal
/// to the face, and the side (-1 = low-coordinate face, +1 = high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactFace {
    pub cell: usize,
    pub axis: usize,
    pub side: i8,
}

/// How a mesh contact imposes its boundary condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContactKind {
    /// Carrier-equilibrium Dirichlet condition on the listed faces.
    Ohmic,
    /// Metal region: potential pinned on all faces bordering the region;
    /// region cells are excluded from the solve.
    MetalRegion(RegionTag),
}

/// A named electrode resolved onto the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshContact {
    pub name: String,
    pub kind: ContactKind,
    pub workfunction_ev: Option<f64>,
    pub faces: Vec<ContactFace>,
}

/// Tensor-product mesh. All coordinates in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMesh {
    /// Node coordinates per simulated axis, strictly increasing.
    pub axes: Vec<Vec<f64>>,
    /// Physical dimension (0 = x, 1 = y, 2 = z) of each simulated axis.
    pub axis_dims: Vec<usize>,
    /// Fixed coordinate of each physical dimension absent from `axes`.
    pub slice: [Option<f64>; 3],
    /// Region tag per cell, in mesh index order.
    pub tags: Vec<RegionTag>,
    pub contacts: Vec<MeshContact>,
    /// Out-of-plane gate coupling data, if the layout carries one.
    pub gate_plate: Option<GatePlate>,
}

impl TensorMesh {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Cells per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len() - 1).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.shape().iter().product()
    }

    /// Flat index from per-axis cell indices (axis 0 fastest).
    pub fn cell_index(&self, idx: &[usize]) -> usize {
        let shape = self.shape();
        let mut flat = 0;
        for k in (0..idx.len()).rev() {
            flat = flat * shape[k] + idx[k];
        }
        flat
    }

    /// Per-axis cell indices from a flat index.
    pub fn cell_coords(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for k in 0..shape.len() {
            idx[k] = flat % shape[k];
            flat /= shape[k];
        }
        idx
    }

    /// Interval length along `axis` for cell slot `k`, nm.
    pub fn spacing(&self, axis: usize, k: usize) -> f64 {
        self.axes[axis][k + 1] - self.axes[axis][k]
    }

    /// Cell centre in full 3-D physical coordinates, nm.
    pub fn center(&self, cell: usize) -> [f64; 3] {
        let idx = self.cell_coords(cell);
        let mut p = [0.0; 3];
        for d in 0..3 {
            p[d] = self.slice[d].unwrap_or(f64::NAN);
        }
        for (k, &d) in self.axis_dims.iter().enumerate() {
            p[d] = 0.5 * (self.axes[k][idx[k]] + self.axes[k][idx[k] + 1]);
        }
        p
    }

    /// Cell extent along simulated axis `k`, nm.
    pub fn cell_span(&self, cell: usize, axis: usize) -> (f64, f64) {
        let idx = self.cell_coords(cell);
        (self.axes[axis][idx[axis]], self.axes[axis][idx[axis] + 1])
    }

    /// Cell volume in nm^dim.
    pub fn cell_volume(&self, cell: usize) -> f64 {
        let idx = self.cell_coords(cell);
        (0..self.dim()).map(|k| self.spacing(k, idx[k])).product()
    }

    /// Area of the face normal to `axis`, nm^(dim-1).
    pub fn face_area(&self, cell: usize, axis: usize) -> f64 {
        let idx = self.cell_coords(cell);
        (0..self.dim())
            .filter(|&k| k != axis)
            .map(|k| self.spacing(k, idx[k]))
            .product()
    }

    /// Flat index of the neighbour across the given face, if any.
    pub fn neighbor(&self, cell: usize, axis: usize, side: i8) -> Option<usize> {
        let mut idx = self.cell_coords(cell);
        let shape = self.shape();
        if side < 0 {
            if idx[axis] == 0 {
                return None;
            }
            idx[axis] -= 1;
        } else {
            if idx[axis] + 1 >= shape[axis] {
                return None;
            }
            idx[axis] += 1;
        }
        Some(self.cell_index(&idx))
    }
}

/// Net doping per cell: donor and acceptor stored separately, net = N_D - N_A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopingField {
    /// Donor concentration per cell, cm^-3.
    pub donor: Vec<f64>,
    /// Acceptor concentration per cell, cm^-3.
    pub acceptor: Vec<f64>,
}

impl DopingField {
    /// Signed net doping N_D - N_A for one cell, cm^-3.
    pub fn net(&self, cell: usize) -> f64 {
        self.donor[cell] - self.acceptor[cell]
    }
}

/// Characteristic depth of the source/drain Gaussian: the profile decays
/// from n_src at the surface to n_sub exactly at src_depth.
pub fn doping_sigma(geometry: &DeviceGeometry, corner: &ProcessCorner) -> f64 {
    geometry.src_depth / (corner.n_src / corner.n_sub).ln().sqrt()
}

/// Donor profile value at a given depth below the surface, cm^-3.
pub fn donor_profile(geometry: &DeviceGeometry, corner: &ProcessCorner, depth: f64) -> f64 {
    if depth < 0.0 {
        return 0.0;
    }
    let s = doping_sigma(geometry, corner);
    corner.n_src * (-(depth / s) * (depth / s)).exp()
}

/// Error function, Abramowitz & Stegun 7.1.26 (|error| < 1.5e-7). Used only
/// for cell averages of the doping Gaussian, where mesh-to-mesh consistency
/// matters more than absolute accuracy (cell sums telescope exactly).
pub(crate) fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Average of the donor Gaussian over a depth interval [z0, z1], cm^-3.
/// Exact analytic integral, so summed dose is independent of the mesh.
fn donor_cell_average(
    geometry: &DeviceGeometry,
    corner: &ProcessCorner,
    z0: f64,
    z1: f64,
) -> f64 {
    let z0 = z0.max(0.0);
    if z1 <= z0 {
        return 0.0;
    }
    let s = doping_sigma(geometry, corner);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    corner.n_src * 0.5 * sqrt_pi * s * (erf(z1 / s) - erf(z0 / s)) / (z1 - z0)
}

/// Maximum acceptor level of the guard ring, cm^-3.
const GUARD_RING_DOPING_CAP: f64 = 1e20;

fn dedup_sorted(v: &mut Vec<f64>, tol: f64) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    v.dedup_by(|a, b| (*a - *b).abs() <= tol);
}

/// A band of the axis with a spacing cap.
#[derive(Debug, Clone, Copy)]
struct Zone {
    lo: f64,
    hi: f64,
    h: f64,
}

/// Interval-length envelopes for one gap fill: `n` intervals bridging a gap
/// of length `L`, entering at spacing <= `b_l` and leaving at <= `b_r`, all
/// capped at `h`, with adjacent-interval ratios bounded by `growth`.
///
/// The achievable lengths form a band [lower(k), upper(k)] per slot:
/// geometric chains from the two ends. Any profile obtained by clamping a
/// constant plateau into this band keeps all ratios within `growth`,
/// because both envelopes change by at most a factor `growth` per slot and
/// an upward envelope crossing is required for a clamp switch.
struct GapEnvelope {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Ratio budget allotted to each side of a forced line: a boundary interval
/// lands in [b / BAND, b], so two gaps meeting at a line stay within
/// BAND^2 = growth of each other.
fn band(growth: f64) -> f64 {
    growth.sqrt()
}

fn gap_envelope(
    n: usize,
    b_l: Option<f64>,
    b_r: Option<f64>,
    h: f64,
    growth: f64,
) -> GapEnvelope {
    let beta = band(growth);
    let mut lower = vec![0.0f64; n];
    let mut upper = vec![h; n];
    for k in 0..n {
        if let Some(b) = b_l {
            upper[k] = upper[k].min(b * growth.powi(k as i32));
            lower[k] = lower[k].max(b / beta / growth.powi(k as i32));
        }
        if let Some(b) = b_r {
            let j = (n - 1 - k) as i32;
            upper[k] = upper[k].min(b * growth.powi(j));
            lower[k] = lower[k].max(b / beta / growth.powi(j));
        }
        lower[k] = lower[k].min(upper[k]);
    }
    GapEnvelope { lower, upper }
}

/// Fills one gap with `n` intervals summing to `L` inside the envelope:
/// lengths are `clamp(level, lower, upper)` with the plateau level solved
/// by bisection.
fn fill_gap(n: usize, len: f64, env: &GapEnvelope, h: f64) -> Vec<f64> {
    let total = |level: f64| -> f64 {
        (0..n)
            .map(|k| level.clamp(env.lower[k], env.upper[k]))
            .sum()
    };
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < len {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    let mut parts: Vec<f64> = (0..n)
        .map(|k| level.clamp(env.lower[k], env.upper[k]))
        .collect();
    let sum: f64 = parts.iter().sum();
    for p in parts.iter_mut() {
        *p *= len / sum;
    }
    parts
}

/// Builds the node array for one axis from forced lines and spacing zones.
///
/// Boundary spacings are negotiated per forced line first (zone caps, short
/// neighbouring gaps, Lipschitz growth limit), then each gap is filled with
/// a clamped double-geometric profile. When a gap length falls between what
/// `n` and `n + 1` intervals can legally cover, its boundary spacings are
/// lowered and the negotiation repeats, so the growth bound holds globally.
fn build_axis(forced: &[f64], zones: &[Zone], policy: &RefinementPolicy) -> Result<Vec<f64>> {
    let growth = policy.growth;
    let beta = band(growth);
    let mut lines = forced.to_vec();
    let (lo, hi) = (forced[0], *forced.last().unwrap());
    for z in zones {
        for v in [z.lo, z.hi] {
            if v > lo && v < hi {
                lines.push(v);
            }
        }
    }
    dedup_sorted(&mut lines, 1e-9);
    let m = lines.len();
    let gap_len: Vec<f64> = lines.windows(2).map(|w| w[1] - w[0]).collect();

    // Spacing cap of each gap (zone boundaries are forced, so a zone either
    // covers a gap entirely or not at all).
    let gap_cap: Vec<f64> = lines
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let mut h = policy.max_spacing;
            for z in zones {
                if mid >= z.lo && mid <= z.hi {
                    h = h.min(z.h);
                }
            }
            h
        })
        .collect();

    // Boundary spacing budget per line.
    let mut b: Vec<f64> = (0..m)
        .map(|i| {
            let mut v = policy.max_spacing;
            if i > 0 {
                v = v.min(gap_cap[i - 1]).min(beta * gap_len[i - 1]);
            }
            if i < m - 1 {
                v = v.min(gap_cap[i]).min(beta * gap_len[i]);
            }
            v
        })
        .collect();

    // Negotiate until every gap admits a legal fill.
    let mut chosen_n = vec![0usize; gap_len.len()];
    for round in 0..200 {
        // Spacing may grow by at most (growth - 1) per unit length.
        for i in 1..m {
            b[i] = b[i].min(b[i - 1] + (growth - 1.0) * gap_len[i - 1]);
        }
        for i in (0..m - 1).rev() {
            b[i] = b[i].min(b[i + 1] + (growth - 1.0) * gap_len[i]);
        }

        let mut all_feasible = true;
        for g in 0..gap_len.len() {
            let len = gap_len[g];
            let h = gap_cap[g];
            let b_l = (g > 0).then_some(b[g]);
            let b_r = (g < gap_len.len() - 1).then_some(b[g + 1]);
            // Smallest n whose envelope can reach len.
            let n_max = (2.0 * len / h + 400.0) as usize;
            let mut found = None;
            for n in 1..=n_max {
                let env = gap_envelope(n, b_l, b_r, h, growth);
                let hi_sum: f64 = env.upper.iter().sum();
                if hi_sum < len {
                    continue;
                }
                let lo_sum: f64 = env.lower.iter().sum();
                if lo_sum <= len {
                    found = Some(n);
                } else {
                    // Infeasible window: lower this gap's boundary budgets
                    // so n intervals can stretch down to len.
                    let gamma = (len / lo_sum).min(1.0 - 1e-12);
                    b[g] *= gamma;
                    b[g + 1] *= gamma;
                    all_feasible = false;
                }
                break;
            }
            match found {
                Some(n) => chosen_n[g] = n,
                None if all_feasible => {
                    return Err(Error::Geometry(format!(
                        "cannot mesh gap of {len} nm at cap {h} nm"
                    )));
                }
                None => {}
            }
        }
        if all_feasible {
            break;
        }
        if round == 199 {
            return Err(Error::Geometry(
                "axis spacing negotiation failed to converge".into(),
            ));
        }
    }

    let mut nodes = Vec::with_capacity(lines.len() * 2);
    nodes.push(lines[0]);
    let mut caps_ok = true;
    for g in 0..gap_len.len() {
        let b_l = (g > 0).then_some(b[g]);
        let b_r = (g < gap_len.len() - 1).then_some(b[g + 1]);
        let env = gap_envelope(chosen_n[g], b_l, b_r, gap_cap[g], growth);
        let parts = fill_gap(chosen_n[g], gap_len[g], &env, gap_cap[g]);
        caps_ok &= parts.iter().all(|p| *p <= gap_cap[g] * (1.0 + 1e-9));
        let mut acc = lines[g];
        for p in &parts {
            acc += p;
            nodes.push(acc);
        }
        // Snap accumulated drift onto the forced line.
        *nodes.last_mut().unwrap() = lines[g + 1];
    }
    let ratios_ok = nodes.windows(3).all(|w| {
        let (a, b) = (w[1] - w[0], w[2] - w[1]);
        b <= growth * a * (1.0 + 1e-9) && a <= growth * b * (1.0 + 1e-9)
    });
    if !caps_ok || !ratios_ok {
        return Err(Error::Geometry(
            "axis spacing negotiation produced an invalid profile".into(),
        ));
    }
    Ok(nodes)
}

/// Material class used to detect interfaces that need refinement.
fn needs_refined_boundary(a: RegionTag, b: RegionTag) -> bool {
    if a == b {
        return false;
    }
    let semi = (a.is_semiconductor(), b.is_semiconductor());
    match semi {
        // Junctions and high/low doping steps inside the semiconductor.
        (true, true) => true,
        // Oxide or metal against semiconductor (MOS interfaces).
        (true, false) | (false, true) => true,
        (false, false) => false,
    }
}

/// Generates a graded mesh conforming to the layout slice.
pub fn generate_mesh(
    layout: &DeviceLayout,
    policy: &RefinementPolicy,
    dims: MeshDims,
) -> Result<TensorMesh> {
    let axis_dims: Vec<usize> = dims.physical_dims().to_vec();
    let mut slice = [None; 3];
    if !axis_dims.contains(&1) {
        slice[1] = Some(0.0);
    }
    if !axis_dims.contains(&2) {
        slice[2] = Some(0.5 * (layout.bbox.lo[2] + layout.bbox.hi[2]));
    }
    if !axis_dims.contains(&0) {
        return Err(Error::Geometry("the transport axis is always simulated".into()));
    }

    // Boxes intersecting the slice (closed intersection).
    let in_slice = |b: &crate::process::LayoutBox| -> bool {
        (0..3).all(|d| match slice[d] {
            Some(v) => b.lo[d] <= v + 1e-9 && b.hi[d] >= v - 1e-9,
            None => true,
        })
    };
    let boxes: Vec<_> = layout.boxes.iter().filter(|b| in_slice(b)).collect();
    if boxes.is_empty() {
        return Err(Error::Geometry("slice plane intersects no layout boxes".into()));
    }

    let mut axes = Vec::new();
    for &d in &axis_dims {
        // Forced lines: every box edge on this physical dimension.
        let mut forced: Vec<f64> = Vec::new();
        forced.push(layout.bbox.lo[d]);
        forced.push(layout.bbox.hi[d]);
        for b in &boxes {
            forced.push(b.lo[d]);
            forced.push(b.hi[d]);
        }
        if let Some(p) = &layout.gate_plate {
            let window = [p.x_range, p.y_range];
            if d < 2 {
                for v in [window[d].0, window[d].1] {
                    if v > layout.bbox.lo[d] && v < layout.bbox.hi[d] {
                        forced.push(v);
                    }
                }
            }
        }
        dedup_sorted(&mut forced, 1e-9);

        // Interface zones: box boundaries where material classes change.
        let mut zones: Vec<Zone> = Vec::new();
        for (i, a) in boxes.iter().enumerate() {
            for b in boxes.iter().skip(i + 1) {
                if !needs_refined_boundary(a.tag, b.tag) {
                    continue;
                }
                // Adjacent across this axis (a.hi == b.lo or vice versa),
                // overlapping in the other simulated dimensions.
                let touching = |p: &crate::process::LayoutBox,
                                q: &crate::process::LayoutBox|
                 -> Option<f64> {
                    if (p.hi[d] - q.lo[d]).abs() > 1e-9 {
                        return None;
                    }
                    let overlaps = (0..3).filter(|&e| e != d).all(|e| {
                        p.lo[e] < q.hi[e] - 1e-9 && q.lo[e] < p.hi[e] - 1e-9
                    });
                    overlaps.then_some(p.hi[d])
                };
                for c in [touching(a, b), touching(b, a)] {
                    if let Some(at) = c {
                        zones.push(Zone {
                            lo: at - policy.interface_band,
                            hi: at + policy.interface_band,
                            h: policy.interface_spacing,
                        });
                    }
                }
            }
        }
        // Depth axis: extra-fine band just below the silicon surface.
        if d == 2 {
            zones.push(Zone {
                lo: 0.0,
                hi: policy.surface_band,
                h: policy.surface_spacing,
            });
        }
        for z in zones.iter_mut() {
            z.lo = z.lo.max(layout.bbox.lo[d]);
            z.hi = z.hi.min(layout.bbox.hi[d]);
        }

        axes.push(build_axis(&forced, &zones, policy)?);
    }

    // Budget check before tagging (tagging cost scales with cell count).
    let cells: usize = axes.iter().map(|a| a.len() - 1).product();
    if cells > policy.max_cells {
        return Err(Error::Budget {
            cells,
            budget: policy.max_cells,
        });
    }

    // Region tags from cell centres.
    let shape: Vec<usize> = axes.iter().map(|a| a.len() - 1).collect();
    let mut tags = Vec::with_capacity(cells);
    let mut idx = vec![0usize; axes.len()];
    'outer: loop {
        let mut p = [0.0; 3];
        for d in 0..3 {
            if let Some(v) = slice[d] {
                p[d] = v;
            }
        }
        for (k, &d) in axis_dims.iter().enumerate() {
            p[d] = 0.5 * (axes[k][idx[k]] + axes[k][idx[k] + 1]);
        }
        let tag = layout
            .tag_at(p)
            .ok_or_else(|| Error::Geometry(format!("cell centre {p:?} outside all boxes")))?;
        tags.push(tag);
        // Odometer increment, axis 0 fastest.
        for k in 0..axes.len() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }

    let mut mesh = TensorMesh {
        axes,
        axis_dims,
        slice,
        tags,
        contacts: Vec::new(),
        gate_plate: layout.gate_plate.clone(),
    };
    resolve_contacts(layout, &mut mesh)?;
    Ok(mesh)
}

/// Maps the layout's contact specs onto mesh faces.
fn resolve_contacts(layout: &DeviceLayout, mesh: &mut TensorMesh) -> Result<()> {
    let mut contacts: Vec<MeshContact> = Vec::new();
    for spec in &layout.contacts {
        let resolved = resolve_contact(spec, mesh)?;
        // Multiple patches of one electrode (e.g. both guard-ring segments)
        // merge into a single named contact.
        if let Some(existing) = contacts.iter_mut().find(|c| c.name == spec.name) {
            existing.faces.extend(resolved.faces);
        } else {
            contacts.push(resolved);
        }
    }
    mesh.contacts = contacts;
    Ok(())
}

fn resolve_contact(spec: &ContactSpec, mesh: &TensorMesh) -> Result<MeshContact> {
    let mut faces = Vec::new();
    let kind = match &spec.attach {
        ContactAttach::Plane { axis, at, lo, hi } => {
            // Rectangle coordinates are over the physical dims != axis, in
            // ascending dim order.
            let rect_dims: Vec<usize> = (0..3).filter(|d| d != axis).collect();
            // Applicable only if the slice point of any fixed dim is inside
            // the rectangle.
            let mut applicable = true;
            for (r, &d) in rect_dims.iter().enumerate() {
                if let Some(v) = mesh.slice[d] {
                    if v < lo[r] - 1e-9 || v > hi[r] + 1e-9 {
                        applicable = false;
                    }
                }
            }
            let mesh_axis = mesh.axis_dims.iter().position(|d| d == axis);
            if applicable {
                let mesh_axis = mesh_axis.ok_or_else(|| {
                    Error::Geometry(format!(
                        "contact '{}' lies on a non-simulated axis",
                        spec.name
                    ))
                })?;
                // Find the node index equal to `at`.
                let nodes = &mesh.axes[mesh_axis];
                let node = nodes
                    .iter()
                    .position(|v| (v - at).abs() < 1e-9)
                    .ok_or_else(|| {
                        Error::Geometry(format!(
                            "contact '{}' plane at {at} is not a mesh line",
                            spec.name
                        ))
                    })?;
                // Contact acts on the semiconductor cell on the high side
                // of the plane (into the substrate for z contacts); planes
                // on the axis maximum attach to the low-side cell instead.
                let shape = mesh.shape();
                let (cell_slot, side) = if node < shape[mesh_axis] {
                    (node, -1i8)
                } else {
                    (node - 1, 1i8)
                };
                for cell in 0..mesh.num_cells() {
                    let idx = mesh.cell_coords(cell);
                    if idx[mesh_axis] != cell_slot {
                        continue;
                    }
                    if !mesh.tags[cell].is_semiconductor() {
                        continue;
                    }
                    let c = mesh.center(cell);
                    let inside = rect_dims.iter().enumerate().all(|(r, &d)| {
                        c[d] >= lo[r] - 1e-9 && c[d] <= hi[r] + 1e-9
                    });
                    if inside {
                        faces.push(ContactFace {
                            cell,
                            axis: mesh_axis,
                            side,
                        });
                    }
                }
            }
            ContactKind::Ohmic
        }
        ContactAttach::Region { tag } => {
            // Faces of non-metal cells bordering the region's metal cells.
            for cell in 0..mesh.num_cells() {
                if mesh.tags[cell] == *tag {
                    continue;
                }
                for axis in 0..mesh.dim() {
                    for side in [-1i8, 1i8] {
                        if let Some(nb) = mesh.neighbor(cell, axis, side) {
                            if mesh.tags[nb] == *tag {
                                faces.push(ContactFace { cell, axis, side });
                            }
                        }
                    }
                }
            }
            ContactKind::MetalRegion(*tag)
        }
    };
    Ok(MeshContact {
        name: spec.name.clone(),
        kind,
        workfunction_ev: spec.workfunction_ev,
        faces,
    })
}

/// Assembles the net doping field for each mesh cell.
///
/// Donors follow a Gaussian in depth under the source/drain footprints
/// (abrupt laterally), acceptors are n_sub in the substrate and
/// source/drain, and the capped guard-ring level in the ring.
pub fn assign_doping(layout: &DeviceLayout, mesh: &TensorMesh) -> DopingField {
    let g = &layout.geometry;
    let c = &layout.corner;
    let n = mesh.num_cells();
    let mut donor = vec![0.0; n];
    let mut acceptor = vec![0.0; n];

    let x_src = (0.0, g.src_length);
    let x_drn = (
        g.src_length + g.channel_length,
        g.src_length + g.channel_length + g.src_length,
    );
    let w2 = 0.5 * g.width;
    let z_axis = mesh.axis_dims.iter().position(|&d| d == 2);

    for cell in 0..n {
        let tag = mesh.tags[cell];
        if !tag.is_semiconductor() {
            continue;
        }
        acceptor[cell] = match tag {
            RegionTag::GuardRing => {
                (g.guard_ring_doping_factor * c.n_sub).min(GUARD_RING_DOPING_CAP)
            }
            _ => c.n_sub,
        };
        let p = mesh.center(cell);
        let in_footprint = (p[0] >= x_src.0 && p[0] <= x_src.1
            || p[0] >= x_drn.0 && p[0] <= x_drn.1)
            && p[1].abs() <= w2 + 1e-9;
        if in_footprint {
            donor[cell] = match z_axis {
                Some(k) => {
                    let (z0, z1) = mesh.cell_span(cell, k);
                    donor_cell_average(g, c, z0, z1)
                }
                None => donor_profile(g, c, mesh.slice[2].unwrap_or(0.0)),
            };
        }
    }
    DopingField { donor, acceptor }
}

/// Writes cell centres, tags, and net doping as CSV.
///
/// Column order: `x_nm,y_nm,z_nm,tag,net_doping_cm3` (fixed coordinates of
/// non-simulated axes are repeated per cell).
pub fn write_mesh_csv<W: IoWrite>(
    mesh: &TensorMesh,
    doping: &DopingField,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "x_nm,y_nm,z_nm,tag,net_doping_cm3")?;
    for cell in 0..mesh.num_cells() {
        let p = mesh.center(cell);
        writeln!(
            out,
            "{:.6e},{:.6e},{:.6e},{:?},{:.9e}",
            p[0],
            p[1],
            p[2],
            mesh.tags[cell],
            doping.net(cell)
        )?;
    }
    Ok(())
}
